"""Constrained scenario generation: counting and indexed extraction.

A constraint spec is a fixed horizon plus deterministic finite automata
("monitors") over the input alphabet; the scenario set is every length-h
word accepted by all monitors.  A dynamic-programming table over the
product automaton supports exact counting and direct extraction of the
j-th word in lexicographic order, without enumerating the set.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from .traces import Alphabet, InputTrace, TraceFormatError


@dataclass(frozen=True, slots=True)
class Dfa:
    """Complete DFA over the spec's alphabet; states are 0..num_states-1.

    ``step[s][u]`` is the successor of state s on symbol index u.
    """

    num_states: int
    start: int
    accepting: frozenset[int]
    step: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.num_states < 1:
            raise ValueError("monitor needs at least one state")
        if not (0 <= self.start < self.num_states):
            raise ValueError("monitor start state out of range")
        if any(not (0 <= s < self.num_states) for s in self.accepting):
            raise ValueError("monitor accepting state out of range")
        if len(self.step) != self.num_states:
            raise ValueError("monitor transition table must cover every state")
        width = len(self.step[0]) if self.step else 0
        for row in self.step:
            if len(row) != width:
                raise ValueError("monitor transition rows must have equal width")
            if any(not (0 <= t < self.num_states) for t in row):
                raise ValueError("monitor transition target out of range")

    def accepts(self, symbols: Sequence[int]) -> bool:
        state = self.start
        for u in symbols:
            state = self.step[state][u]
        return state in self.accepting


@dataclass(frozen=True, slots=True)
class ConstraintSpec:
    alphabet: Alphabet
    horizon: int
    monitors: tuple[Dfa, ...] = ()

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for dfa in self.monitors:
            if dfa.step and len(dfa.step[0]) != len(self.alphabet):
                raise ValueError("monitor transitions must cover the whole alphabet")


def satisfies(spec: ConstraintSpec, trace: InputTrace) -> bool:
    """Whether every monitor accepts the trace (replayed symbol by symbol)."""
    return all(dfa.accepts(trace.symbols) for dfa in spec.monitors)


class GeneratorTable:
    """Suffix-count table over the product automaton.

    ``_counts[r]`` maps each product state reachable at depth h-r to the
    exact number of accepted suffixes of length r.  Counts are Python
    integers, so they stay exact far beyond 64 bits.  Read-only once
    built; safe to share across threads.
    """

    def __init__(self, spec: ConstraintSpec) -> None:
        self.spec = spec
        self._n_symbols = len(spec.alphabet)
        start = tuple(dfa.start for dfa in spec.monitors)
        levels: list[set[tuple[int, ...]]] = [{start}]
        for _ in range(spec.horizon):
            frontier = levels[-1]
            nxt = {
                self._step(state, u)
                for state in frontier
                for u in range(self._n_symbols)
            }
            levels.append(nxt)
        counts: list[dict[tuple[int, ...], int]] = [
            {
                s: 1 if self._accepting(s) else 0
                for s in levels[spec.horizon]
            }
        ]
        for r in range(1, spec.horizon + 1):
            deeper = counts[r - 1]
            counts.append(
                {
                    s: sum(
                        deeper[self._step(s, u)] for u in range(self._n_symbols)
                    )
                    for s in levels[spec.horizon - r]
                }
            )
        self._counts = counts
        self._start = start

    def _step(self, state: tuple[int, ...], symbol: int) -> tuple[int, ...]:
        return tuple(
            dfa.step[s][symbol] for dfa, s in zip(self.spec.monitors, state)
        )

    def _accepting(self, state: tuple[int, ...]) -> bool:
        return all(
            s in dfa.accepting for dfa, s in zip(self.spec.monitors, state)
        )

    def count(self) -> int:
        """Number of length-h words accepted by all monitors."""
        return self._counts[self.spec.horizon][self._start]

    def get(self, index: int) -> InputTrace:
        """The index-th accepted word in lexicographic order."""
        if not (0 <= index < self.count()):
            raise IndexError(
                f"scenario index {index} out of range [0, {self.count()})"
            )
        state = self._start
        symbols: list[int] = []
        remaining = index
        for r in range(self.spec.horizon, 0, -1):
            for u in range(self._n_symbols):
                nxt = self._step(state, u)
                below = self._counts[r - 1].get(nxt, 0)
                if remaining < below:
                    symbols.append(u)
                    state = nxt
                    break
                remaining -= below
            else:
                raise AssertionError("count table inconsistent with extraction")
        return InputTrace(self.spec.alphabet, tuple(symbols))


def scenario_count(spec: ConstraintSpec) -> int:
    return GeneratorTable(spec).count()


def scenario_at(spec: ConstraintSpec, index: int) -> InputTrace:
    return GeneratorTable(spec).get(index)


def sample_indices(n: int, fraction: float, seed: int) -> list[int]:
    """A sorted, duplicate-free sample of round(fraction*n) indices in [0, n).

    Deterministic for a given seed; fraction must lie in (0, 1].
    """
    if n < 1:
        raise ValueError("population size must be >= 1")
    if not (0 < fraction <= 1):
        raise ValueError("fraction must lie in (0, 1]")
    size = math.floor(fraction * n + 0.5)
    return sorted(random.Random(seed).sample(range(n), size))


# ---------------------------------------------------------------------------
# Constraint spec file format
#
#   alphabet=<tok>,<tok>,...
#   horizon=<H>
#   then one block per monitor:
#     states=<N>
#     start=<s>
#     accept=<s>,<s>,...        (possibly empty after '=')
#     <from> <token> -> <to>    (one line per transition; must be complete)
# ---------------------------------------------------------------------------


def read_constraint_file(path: str) -> ConstraintSpec:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [
            line.strip()
            for line in fh
            if line.strip() and not line.strip().startswith("#")
        ]
    return parse_constraint_spec(lines)


def parse_constraint_spec(lines: Sequence[str]) -> ConstraintSpec:
    if not lines or not lines[0].startswith("alphabet="):
        raise TraceFormatError("constraint spec must begin with alphabet=")
    alphabet = Alphabet(tuple(lines[0][len("alphabet="):].split(",")))
    if len(lines) < 2 or not lines[1].startswith("horizon="):
        raise TraceFormatError("constraint spec must state horizon= second")
    try:
        horizon = int(lines[1][len("horizon="):])
    except ValueError as exc:
        raise TraceFormatError("malformed horizon") from exc

    monitors: list[Dfa] = []
    i = 2
    while i < len(lines):
        if not lines[i].startswith("states="):
            raise TraceFormatError(f"expected states= to open a monitor: {lines[i]!r}")
        try:
            num_states = int(lines[i][len("states="):])
            if not lines[i + 1].startswith("start="):
                raise ValueError
            start = int(lines[i + 1][len("start="):])
            if not lines[i + 2].startswith("accept="):
                raise ValueError
            accept_raw = lines[i + 2][len("accept="):]
            accepting = frozenset(
                int(s) for s in accept_raw.split(",") if s != ""
            )
        except (ValueError, IndexError) as exc:
            raise TraceFormatError("malformed monitor block header") from exc
        i += 3
        table: dict[tuple[int, int], int] = {}
        while i < len(lines) and not lines[i].startswith("states="):
            parts = lines[i].split()
            if len(parts) != 4 or parts[2] != "->":
                raise TraceFormatError(f"malformed transition line: {lines[i]!r}")
            try:
                src, dst = int(parts[0]), int(parts[3])
            except ValueError as exc:
                raise TraceFormatError(f"malformed transition line: {lines[i]!r}") from exc
            symbol = alphabet.index(parts[1])
            if (src, symbol) in table:
                raise TraceFormatError(f"duplicate transition: {lines[i]!r}")
            table[(src, symbol)] = dst
            i += 1
        step_rows = []
        for s in range(num_states):
            row = []
            for u in range(len(alphabet)):
                if (s, u) not in table:
                    raise TraceFormatError(
                        f"monitor transition function incomplete at state {s}, "
                        f"symbol {alphabet.tokens[u]!r}"
                    )
                row.append(table[(s, u)])
            step_rows.append(tuple(row))
        if len(table) != num_states * len(alphabet):
            raise TraceFormatError("monitor has transitions from out-of-range states")
        monitors.append(Dfa(num_states, start, accepting, tuple(step_rows)))
    return ConstraintSpec(alphabet, horizon, tuple(monitors))


def format_constraint_spec(spec: ConstraintSpec) -> str:
    out = [
        f"alphabet={','.join(spec.alphabet.tokens)}",
        f"horizon={spec.horizon}",
    ]
    for dfa in spec.monitors:
        out.append(f"states={dfa.num_states}")
        out.append(f"start={dfa.start}")
        out.append("accept=" + ",".join(str(s) for s in sorted(dfa.accepting)))
        for s in range(dfa.num_states):
            for u in range(len(spec.alphabet)):
                out.append(f"{s} {spec.alphabet.tokens[u]} -> {dfa.step[s][u]}")
    return "\n".join(out) + "\n"


def write_constraint_file(spec: ConstraintSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_constraint_spec(spec))
