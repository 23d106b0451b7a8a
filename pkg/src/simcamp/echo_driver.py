"""Built-in external driver speaking the campaign line protocol on stdio.

Wraps the in-process reference model behind the same protocol a real
simulator driver would use, so the external execution path can be tested
end to end:

    python -m simcamp.echo_driver --seed 7 --alphabet a,b

Header/comment lines receive no reply; every command line receives one of
``OK``, ``OUT <token>``, or ``ERR <message>``.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .engine import Simulator, reference_model
from .optimizer import parse_command
from .traces import Alphabet, TraceFormatError


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="simcamp-echo-driver",
        description="Reference-model driver for the campaign line protocol.",
    )
    parser.add_argument("--seed", type=int, default=0, help="reference model seed")
    parser.add_argument(
        "--alphabet",
        required=True,
        help="comma-separated input symbol tokens, in order",
    )
    args = parser.parse_args(argv)

    alphabet = Alphabet(tuple(args.alphabet.split(",")))
    sim = Simulator(reference_model(alphabet, args.seed))

    for raw in sys.stdin:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            cmd = parse_command(line, alphabet)
        except TraceFormatError as exc:
            print(f"ERR {exc}", flush=True)
            continue
        before = len(sim.observations)
        if sim.step(cmd):
            if len(sim.observations) > before:
                print(f"OUT {sim.observations[-1].token}", flush=True)
            else:
                print("OK", flush=True)
        else:
            print(f"ERR {sim.error}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
