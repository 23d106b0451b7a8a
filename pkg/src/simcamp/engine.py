"""Campaign execution: the simulator state machine and cost estimation.

A simulator holds a model state, the input history that produced it, and
a bounded map of checkpointed (state, history) pairs keyed by node id.
Executing a campaign folds its commands over that machine; Load of an
absent id, Store of a present id, or Free of an absent id puts the
machine into an absorbing error state.  Campaigns can run either against
an in-process model or over a line protocol to an external driver.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from .optimizer import Campaign, Command, campaign_lines
from .traces import Alphabet, TraceFormatError

_MASK64 = (1 << 64) - 1


def _mix64(value: int) -> int:
    """splitmix64 finalizer: a cheap, well-scrambled 64-bit permutation."""
    value = (value ^ (value >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    value = (value ^ (value >> 27)) * 0x94D049BB133111EB & _MASK64
    return value ^ (value >> 31)


class SystemModel:
    """Deterministic system driven by piecewise-constant symbol inputs.

    ``transition`` must be a semigroup action: advancing k quanta equals
    advancing one quantum k times.  ``observe`` projects a state to the
    output token reported at Out commands.
    """

    alphabet: Alphabet
    initial_state: object

    def transition(self, state: object, symbol: int, quanta: int) -> object:
        raise NotImplementedError

    def observe(self, state: object) -> str:
        raise NotImplementedError


class ReferenceModel(SystemModel):
    """Keyed 64-bit mixing model: a desk-scale stand-in for a real simulator.

    Each quantum folds the current state with a per-symbol key through the
    splitmix64 finalizer, so distinct input histories yield distinct
    digests with overwhelming probability.  ``fail_when`` (a predicate on
    the hex digest) lets tests plant failing scenarios: outputs become
    ``FAIL:<digest>`` / ``PASS:<digest>``.
    """

    def __init__(
        self,
        alphabet: Alphabet,
        seed: int,
        fail_when: Callable[[str], bool] | None = None,
    ) -> None:
        self.alphabet = alphabet
        self.seed = seed
        self.fail_when = fail_when
        self.initial_state = _mix64(seed & _MASK64)
        self._symbol_keys = [
            _mix64((seed + 0x9E3779B97F4A7C15 * (i + 1)) & _MASK64)
            for i in range(len(alphabet))
        ]

    def transition(self, state: int, symbol: int, quanta: int) -> int:
        key = self._symbol_keys[symbol]
        for _ in range(quanta):
            state = _mix64((state + key) & _MASK64)
        return state

    def observe(self, state: int) -> str:
        digest = f"{state:016x}"
        if self.fail_when is None:
            return digest
        return f"FAIL:{digest}" if self.fail_when(digest) else f"PASS:{digest}"


def reference_model(
    alphabet: Alphabet, seed: int, fail_when: Callable[[str], bool] | None = None
) -> ReferenceModel:
    return ReferenceModel(alphabet, seed, fail_when)


class Observation(NamedTuple):
    token: str
    symbols: tuple[int, ...]


class Simulator:
    """The command-level state machine; errors are absorbing."""

    def __init__(self, model: SystemModel) -> None:
        self.model = model
        self.state = model.initial_state
        self.history: tuple[int, ...] = ()
        self.memory: dict[int, tuple[object, tuple[int, ...]]] = {}
        self.error: str | None = None
        self.peak_memory = 0
        self.length_quanta = 0
        self.observations: list[Observation] = []

    def _fail(self, message: str) -> bool:
        self.error = message
        return False

    def step(self, cmd: Command) -> bool:
        """Apply one command; returns False if the machine is (now) in error."""
        if self.error is not None:
            return False
        op = cmd.op
        if op == "run":
            self.state = self.model.transition(self.state, cmd.symbol, cmd.quanta)
            self.history = self.history + (cmd.symbol,) * cmd.quanta
            self.length_quanta += cmd.quanta
        elif op == "store":
            if cmd.node_id in self.memory:
                return self._fail(f"store of already-present id {cmd.node_id}")
            self.memory[cmd.node_id] = (self.state, self.history)
            if len(self.memory) > self.peak_memory:
                self.peak_memory = len(self.memory)
        elif op == "load":
            entry = self.memory.get(cmd.node_id)
            if entry is None:
                return self._fail(f"load of absent id {cmd.node_id}")
            self.state, self.history = entry
        elif op == "free":
            if cmd.node_id not in self.memory:
                return self._fail(f"free of absent id {cmd.node_id}")
            del self.memory[cmd.node_id]
        elif op == "out":
            self.observations.append(
                Observation(self.model.observe(self.state), self.history)
            )
        else:
            return self._fail(f"unknown command op {op!r}")
        return True


@dataclass(slots=True)
class ExecutionResult:
    observations: list[Observation]
    executable: bool
    failing_index: int | None
    error: str | None
    length_quanta: int
    peak_memory: int
    command_counts: dict[str, int] = field(default_factory=dict)


def execute(
    campaign: Campaign,
    model: SystemModel,
    progress: Callable[[int], None] | None = None,
) -> ExecutionResult:
    """Run a campaign against an in-process model.

    Stops at the first erroring command; ``progress`` (if given) receives
    the running count of completed Out commands.
    """
    sim = Simulator(model)
    failing_index: int | None = None
    counts: dict[str, int] = {}
    for i, cmd in enumerate(campaign.commands):
        if not sim.step(cmd):
            failing_index = i
            break
        counts[cmd.op] = counts.get(cmd.op, 0) + 1
        if cmd.op == "out" and progress is not None:
            progress(len(sim.observations))
    return ExecutionResult(
        observations=sim.observations,
        executable=failing_index is None,
        failing_index=failing_index,
        error=sim.error,
        length_quanta=sim.length_quanta,
        peak_memory=sim.peak_memory,
        command_counts=counts,
    )


# ---------------------------------------------------------------------------
# Cost model
#
#   file format (whitespace-separated key=value pairs):
#     load=<s> store=<s> free=<s> out=<s> run_per_q=<s> f=<x>
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CostModel:
    """Per-command wall-clock costs in seconds; ``f`` inflates Load+Store."""

    load: float
    store: float
    free: float = 0.0
    out: float = 0.0
    run_per_q: float = 1.0
    f: float = 1.0

    def with_inflation(self, f: float) -> "CostModel":
        return CostModel(self.load, self.store, self.free, self.out, self.run_per_q, f)


def parse_cost_model(text: str) -> CostModel:
    values: dict[str, float] = {}
    for token in text.split():
        if token.startswith("#"):
            break
        key, _, raw = token.partition("=")
        if not _:
            raise TraceFormatError(f"malformed cost entry {token!r}")
        try:
            values[key] = float(raw)
        except ValueError as exc:
            raise TraceFormatError(f"malformed cost entry {token!r}") from exc
    missing = {"load", "store", "free", "out", "run_per_q"} - values.keys()
    if missing:
        raise TraceFormatError(f"cost model missing keys: {sorted(missing)}")
    return CostModel(
        load=values["load"],
        store=values["store"],
        free=values["free"],
        out=values["out"],
        run_per_q=values["run_per_q"],
        f=values.get("f", 1.0),
    )


def read_cost_file(path: str) -> CostModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_cost_model(fh.read())


def format_cost_model(cost: CostModel) -> str:
    return (
        f"load={cost.load:g} store={cost.store:g} free={cost.free:g} "
        f"out={cost.out:g} run_per_q={cost.run_per_q:g} f={cost.f:g}"
    )


def write_cost_file(cost: CostModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_cost_model(cost) + "\n")


def estimate_seconds_from_counts(
    counts: dict[str, int], length_quanta: int, cost: CostModel
) -> float:
    """Estimated wall-clock seconds; Load and Store are inflated by ``f``."""
    return (
        length_quanta * cost.run_per_q
        + counts.get("load", 0) * cost.load * cost.f
        + counts.get("store", 0) * cost.store * cost.f
        + counts.get("free", 0) * cost.free
        + counts.get("out", 0) * cost.out
    )


def estimate_seconds(campaign: Campaign, cost: CostModel) -> float:
    return estimate_seconds_from_counts(
        campaign.command_counts(), campaign.length_quanta, cost
    )


# ---------------------------------------------------------------------------
# External driver protocol
#
# The engine writes every campaign file line (header included) to the
# driver's stdin.  Header/comment lines get no reply.  Every other line
# gets exactly one reply line:  OK | OUT <token> | ERR <message>
# ---------------------------------------------------------------------------


class DriverProtocolError(RuntimeError):
    """The external driver violated the line protocol."""


def run_external(
    campaign: Campaign,
    argv: Sequence[str],
    progress: Callable[[int], None] | None = None,
) -> ExecutionResult:
    """Execute a campaign through an external driver subprocess.

    The engine keeps its own shadow of the input history and checkpoint
    map, so observations carry the associated traces no matter what model
    the driver wraps.
    """
    observations: list[Observation] = []
    history: tuple[int, ...] = ()
    memory: dict[int, tuple[int, ...]] = {}
    counts: dict[str, int] = {}
    peak = length = 0
    failing_index: int | None = None
    error: str | None = None

    proc = subprocess.Popen(
        list(argv),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    assert proc.stdin is not None and proc.stdout is not None
    try:
        command_index = -1
        for line in campaign_lines(campaign):
            try:
                proc.stdin.write(line + "\n")
                proc.stdin.flush()
            except BrokenPipeError:
                raise DriverProtocolError("driver exited mid-campaign") from None
            if line.startswith("#"):
                continue
            command_index += 1
            reply = proc.stdout.readline()
            if not reply:
                raise DriverProtocolError("driver closed its output mid-campaign")
            reply = reply.rstrip("\n")
            cmd = campaign.commands[command_index]
            if reply.startswith("ERR"):
                failing_index = command_index
                error = reply[3:].strip() or "driver error"
                break
            if cmd.op == "out":
                if not reply.startswith("OUT "):
                    raise DriverProtocolError(f"expected OUT reply, got {reply!r}")
                observations.append(Observation(reply[4:], history))
                if progress is not None:
                    progress(len(observations))
            elif reply != "OK":
                raise DriverProtocolError(f"expected OK reply, got {reply!r}")
            counts[cmd.op] = counts.get(cmd.op, 0) + 1
            if cmd.op == "run":
                history = history + (cmd.symbol,) * cmd.quanta
                length += cmd.quanta
            elif cmd.op == "store":
                if cmd.node_id in memory:
                    raise DriverProtocolError("driver accepted a store of a present id")
                memory[cmd.node_id] = history
                peak = max(peak, len(memory))
            elif cmd.op == "load":
                if cmd.node_id not in memory:
                    raise DriverProtocolError("driver accepted a load of an absent id")
                history = memory[cmd.node_id]
            elif cmd.op == "free":
                if cmd.node_id not in memory:
                    raise DriverProtocolError("driver accepted a free of an absent id")
                del memory[cmd.node_id]
    finally:
        try:
            proc.stdin.close()
        except BrokenPipeError:
            pass
        try:
            proc.stdout.read()
            proc.wait(timeout=60)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
    return ExecutionResult(
        observations=observations,
        executable=failing_index is None,
        failing_index=failing_index,
        error=error,
        length_quanta=length,
        peak_memory=peak,
        command_counts=counts,
    )
