"""Slow-but-obviously-correct reference computations.

These are deliberately independent of the production tree/optimizer code:
they work directly on symbol tuples with brute-force definitions, and are
used to cross-check the fast implementations and to freeze expected values
in the test suite.
"""

from __future__ import annotations

from .optimizer import Campaign, Command
from .traces import InputTrace

EDGE_BUDGET_SYMBOLS = 10**5
PAIRWISE_BUDGET_TRACES = 500


class OracleBudgetError(ValueError):
    """Input too large for a brute-force oracle."""


def edge_count(traces: list[InputTrace], budget: int = EDGE_BUDGET_SYMBOLS) -> int:
    """Number of distinct non-empty prefixes across all traces.

    Equals the edge count of the prefix tree of the set, and hence the
    minimum number of quanta any campaign covering the set must simulate.
    """
    total = sum(t.horizon for t in traces)
    if total > budget:
        raise OracleBudgetError(f"{total} trace-symbols exceeds oracle budget {budget}")
    seen: set[tuple[int, ...]] = set()
    for t in traces:
        s = t.symbols
        for d in range(1, len(s) + 1):
            seen.add(s[:d])
    return len(seen)


def _lcp_len(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    """Length of the longest common prefix, via binary search on slice equality."""
    lo, hi = 0, min(len(a), len(b))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if a[:mid] == b[:mid]:
            lo = mid
        else:
            hi = mid - 1
    return lo


def shared_prefixes(
    traces: list[InputTrace], budget: int = PAIRWISE_BUDGET_TRACES
) -> set[tuple[int, ...]]:
    """All pairwise longest-common-prefixes of distinct traces.

    Quadratic and simple: every unordered pair of distinct traces
    contributes its longest common prefix (possibly the empty tuple).
    A singleton set has no pairs, hence no shared prefixes.
    """
    if len(traces) > budget:
        raise OracleBudgetError(f"{len(traces)} traces exceeds oracle budget {budget}")
    symbol_lists = [t.symbols for t in traces]
    prefixes: set[tuple[int, ...]] = set()
    for i in range(len(symbol_lists)):
        a = symbol_lists[i]
        for j in range(i + 1, len(symbol_lists)):
            b = symbol_lists[j]
            if a != b:
                prefixes.add(a[: _lcp_len(a, b)])
    return prefixes


def shared_prefix_counts(
    traces: list[InputTrace], budget: int = PAIRWISE_BUDGET_TRACES
) -> dict[tuple[int, ...], int]:
    """Shared prefixes with, for each, the number of traces it is a prefix of."""
    symbol_lists = [t.symbols for t in traces]
    return {
        p: sum(1 for s in symbol_lists if s[: len(p)] == p)
        for p in shared_prefixes(traces, budget)
    }


def naive_campaign(ordered: list[InputTrace], quantum: float, slice_id: int = 0) -> Campaign:
    """Baseline schedule: store only the initial state, replay each trace in full.

    Emits Store(0) once, then per trace Load(0), maximal constant-symbol
    Run commands, and Out.  Peak live memory is exactly 1; total length is
    the sum of the horizons, in quanta.
    """
    if not ordered:
        raise ValueError("naive_campaign needs a non-empty slice")
    commands: list[Command] = [Command("store", node_id=0)]
    for trace in ordered:
        commands.append(Command("load", node_id=0))
        start = 0
        symbols = trace.symbols
        while start < len(symbols):
            end = start
            while end + 1 < len(symbols) and symbols[end + 1] == symbols[start]:
                end += 1
            commands.append(Command("run", symbol=symbols[start], quanta=end - start + 1))
            start = end + 1
        commands.append(Command("out"))
    return Campaign(
        commands=commands,
        quantum=quantum,
        slice_id=slice_id,
        peak_stored=1,
        alphabet=ordered[0].alphabet,
    )
