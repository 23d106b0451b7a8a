"""Input alphabets, traces, and the on-disk trace format.

A scenario is a finite sequence of symbols drawn from a finite ordered
alphabet.  Interpreted against a time quantum q, the sequence is a
piecewise-constant input function: symbol i is held on [i*q, (i+1)*q).
Symbols are stored as integer indices into the alphabet; tokens appear
only at I/O boundaries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

LESS = -1
EQUAL = 0
GREATER = 1

_TOKEN_FORBIDDEN = set(",;#")


class TraceFormatError(ValueError):
    """Malformed trace/spec/campaign file content."""


class AlphabetMismatchError(ValueError):
    """Operands drawn from different alphabets."""


@dataclass(frozen=True, slots=True)
class Alphabet:
    """Finite ordered input domain: the order of ``tokens`` is the total order."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("alphabet must not be empty")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("alphabet tokens must be distinct")
        for tok in self.tokens:
            if not tok or any(c in _TOKEN_FORBIDDEN or c.isspace() for c in tok):
                raise ValueError(f"bad alphabet token: {tok!r}")

    @staticmethod
    def of(*tokens: str) -> "Alphabet":
        return Alphabet(tuple(tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise TraceFormatError(f"unknown symbol token {token!r}") from None


@dataclass(frozen=True, slots=True)
class InputTrace:
    """One scenario: symbol indices over ``alphabet``; horizon = len(symbols)."""

    alphabet: Alphabet
    symbols: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.symbols:
            raise ValueError("trace horizon must be >= 1")
        n = len(self.alphabet)
        if any(not (0 <= s < n) for s in self.symbols):
            raise ValueError("trace symbol index out of alphabet range")

    @property
    def horizon(self) -> int:
        return len(self.symbols)

    def tokens(self) -> tuple[str, ...]:
        return tuple(self.alphabet.tokens[s] for s in self.symbols)

    @staticmethod
    def from_tokens(alphabet: Alphabet, tokens: Iterable[str]) -> "InputTrace":
        return InputTrace(alphabet, tuple(alphabet.index(t) for t in tokens))


def _symbols_of(t: "InputTrace | Sequence[int]") -> Sequence[int]:
    return t.symbols if isinstance(t, InputTrace) else t


def _check_same_alphabet(a: object, b: object) -> None:
    if (
        isinstance(a, InputTrace)
        and isinstance(b, InputTrace)
        and a.alphabet != b.alphabet
    ):
        raise AlphabetMismatchError("traces use different alphabets")


def lex_compare(a: "InputTrace | Sequence[int]", b: "InputTrace | Sequence[int]") -> int:
    """Total lexicographic order; a proper prefix precedes its extensions.

    Returns LESS (-1), EQUAL (0) or GREATER (1).
    """
    _check_same_alphabet(a, b)
    sa, sb = tuple(_symbols_of(a)), tuple(_symbols_of(b))
    if sa == sb:
        return EQUAL
    return LESS if sa < sb else GREATER


class PrefixRelation(enum.Enum):
    NOT_PREFIX = "not_prefix"
    PROPER_PREFIX = "proper_prefix"
    EQUAL = "equal"


def prefix_relation(
    a: "InputTrace | Sequence[int]", b: "InputTrace | Sequence[int]"
) -> PrefixRelation:
    """How ``a`` relates to ``b`` as a prefix; ``a`` may be the empty sequence ()."""
    _check_same_alphabet(a, b)
    sa, sb = tuple(_symbols_of(a)), tuple(_symbols_of(b))
    if sa == sb:
        return PrefixRelation.EQUAL
    if len(sa) < len(sb) and sb[: len(sa)] == sa:
        return PrefixRelation.PROPER_PREFIX
    return PrefixRelation.NOT_PREFIX


def sample_time_function(trace: InputTrace, quantum: float, time: float) -> str:
    """The input token held at ``time``: symbol at index floor(time/quantum)."""
    if quantum <= 0:
        raise ValueError("time quantum must be > 0")
    if not (0 <= time < quantum * trace.horizon):
        raise ValueError(
            f"time {time} outside [0, {quantum * trace.horizon}) for horizon {trace.horizon}"
        )
    return trace.alphabet.tokens[trace.symbols[int(time // quantum)]]


@dataclass(slots=True)
class TraceCorpus:
    """A set of scenarios sharing one alphabet and one time quantum."""

    alphabet: Alphabet
    quantum: float
    traces: list[InputTrace] = field(default_factory=list)
    provenance: str = ""
    is_sorted: bool = False

    def __post_init__(self) -> None:
        if self.quantum <= 0:
            raise ValueError("time quantum must be > 0")
        for t in self.traces:
            if t.alphabet != self.alphabet:
                raise AlphabetMismatchError("corpus traces must share the corpus alphabet")
        if self.is_sorted:
            for prev, cur in zip(self.traces, self.traces[1:]):
                if not prev.symbols < cur.symbols:
                    raise ValueError("corpus flagged sorted but is not strictly ascending")

    def __len__(self) -> int:
        return len(self.traces)

    @property
    def min_horizon(self) -> int:
        return min(t.horizon for t in self.traces)

    @property
    def max_horizon(self) -> int:
        return max(t.horizon for t in self.traces)


# ---------------------------------------------------------------------------
# Trace file format
#
#   line 1:  #alphabet=<tok>,<tok>,...;q=<decimal>
#   then one trace per non-empty line, comma-separated tokens.
#   Lines starting with '#' after line 1 are comments.
# ---------------------------------------------------------------------------


def parse_trace_header(line: str) -> tuple[Alphabet, float]:
    line = line.strip()
    if not line.startswith("#alphabet="):
        raise TraceFormatError("missing #alphabet= header on line 1")
    body = line[1:]
    try:
        alpha_part, q_part = body.split(";", 1)
        tokens = alpha_part[len("alphabet="):].split(",")
        if not q_part.startswith("q="):
            raise ValueError
        quantum = float(q_part[len("q="):])
    except ValueError as exc:
        raise TraceFormatError(f"malformed trace header: {line!r}") from exc
    if quantum <= 0:
        raise TraceFormatError("header quantum must be > 0")
    try:
        alphabet = Alphabet(tuple(tokens))
    except ValueError as exc:
        raise TraceFormatError(f"malformed trace header: {line!r}") from exc
    return alphabet, quantum


def format_trace_header(alphabet: Alphabet, quantum: float) -> str:
    return f"#alphabet={','.join(alphabet.tokens)};q={quantum:g}"


def iter_trace_lines(stream: TextIO) -> Iterator[tuple[Alphabet, float] | list[str]]:
    """Streaming reader: yields (alphabet, quantum) once, then token lists."""
    header = stream.readline()
    if not header:
        raise TraceFormatError("empty trace file")
    yield parse_trace_header(header)
    for raw in stream:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line.split(",")


def read_trace_file(path: str) -> TraceCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        items = iter_trace_lines(fh)
        alphabet, quantum = next(items)  # type: ignore[misc]
        traces = [InputTrace.from_tokens(alphabet, tokens) for tokens in items]  # type: ignore[arg-type]
    return TraceCorpus(alphabet, quantum, traces, provenance=f"file:{path}")


def write_trace_file(corpus: TraceCorpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_trace_header(corpus.alphabet, corpus.quantum) + "\n")
        for t in corpus.traces:
            fh.write(",".join(t.tokens()) + "\n")
