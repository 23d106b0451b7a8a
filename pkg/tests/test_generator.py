from __future__ import annotations

import itertools
import random

import pytest

from simcamp.generator import (
    ConstraintSpec,
    Dfa,
    GeneratorTable,
    format_constraint_spec,
    parse_constraint_spec,
    read_constraint_file,
    sample_indices,
    satisfies,
    scenario_at,
    scenario_count,
    write_constraint_file,
)
from simcamp.traces import Alphabet, InputTrace, TraceFormatError

AB01 = Alphabet.of("0", "1")

# accepts words with no two consecutive 1s
NO_11 = Dfa(num_states=3, start=0, accepting=frozenset({0, 1}),
            step=((0, 1), (0, 2), (2, 2)))


def test_no_consecutive_ones_horizon_two():
    spec = ConstraintSpec(AB01, 2, (NO_11,))
    table = GeneratorTable(spec)
    assert table.count() == 3
    assert [table.get(j).symbols for j in range(3)] == [(0, 0), (0, 1), (1, 0)]
    with pytest.raises(IndexError, match=r"index 3 out of range \[0, 3\)"):
        table.get(3)
    assert scenario_count(spec) == 3
    assert scenario_at(spec, 2).symbols == (1, 0)


def test_unconstrained_spec_counts_all_words():
    spec = ConstraintSpec(AB01, 3)
    table = GeneratorTable(spec)
    assert table.count() == 8
    # plain mixed-radix enumeration in lexicographic order
    assert [table.get(j).symbols for j in range(8)] == [
        tuple(w) for w in itertools.product((0, 1), repeat=3)
    ]


def test_empty_language():
    dead = Dfa(num_states=1, start=0, accepting=frozenset(), step=((0, 0),))
    table = GeneratorTable(ConstraintSpec(AB01, 2, (dead,)))
    assert table.count() == 0
    with pytest.raises(IndexError):
        table.get(0)


def test_satisfies():
    spec = ConstraintSpec(AB01, 2, (NO_11,))
    assert satisfies(spec, InputTrace(AB01, (1, 0)))
    assert not satisfies(spec, InputTrace(AB01, (1, 1)))


def test_random_specs_match_brute_force():
    rng = random.Random(7)
    for _ in range(25):
        k = rng.randint(2, 3)
        alphabet = Alphabet(tuple("abc"[:k]))
        h = rng.randint(1, 6)
        monitors = []
        for _ in range(rng.randint(1, 2)):
            n = rng.randint(1, 3)
            step = tuple(
                tuple(rng.randrange(n) for _ in range(k)) for _ in range(n)
            )
            accepting = frozenset(
                s for s in range(n) if rng.random() < 0.6
            )
            monitors.append(Dfa(n, rng.randrange(n), accepting, step))
        spec = ConstraintSpec(alphabet, h, tuple(monitors))
        table = GeneratorTable(spec)
        brute = [
            w
            for w in itertools.product(range(k), repeat=h)
            if all(m.accepts(w) for m in monitors)
        ]
        assert table.count() == len(brute)
        assert [table.get(j).symbols for j in range(len(brute))] == brute


def test_dfa_validation():
    with pytest.raises(ValueError):
        Dfa(2, 5, frozenset({0}), ((0, 0), (1, 1)))  # start out of range
    with pytest.raises(ValueError):
        Dfa(2, 0, frozenset({3}), ((0, 0), (1, 1)))  # accepting out of range
    with pytest.raises(ValueError):
        Dfa(2, 0, frozenset({0}), ((0, 2), (1, 1)))  # target out of range
    with pytest.raises(ValueError):
        ConstraintSpec(AB01, 0)
    with pytest.raises(ValueError):
        # transition width disagrees with the alphabet
        ConstraintSpec(AB01, 2, (Dfa(1, 0, frozenset({0}), ((0, 0, 0),)),))


def test_sample_indices():
    # floor(fraction*n + 0.5) distinct indices, sorted
    picked = sample_indices(10, 0.25, seed=1)
    assert len(picked) == 3
    assert picked == sorted(set(picked))
    assert all(0 <= j < 10 for j in picked)
    assert sample_indices(10, 0.25, seed=1) == picked
    assert len(sample_indices(10, 1.0, seed=0)) == 10
    assert len(sample_indices(3, 0.1, seed=0)) == 0
    with pytest.raises(ValueError):
        sample_indices(0, 0.5, seed=0)
    with pytest.raises(ValueError):
        sample_indices(10, 0.0, seed=0)
    with pytest.raises(ValueError):
        sample_indices(10, 1.5, seed=0)


def test_constraint_file_round_trip(tmp_path):
    spec = ConstraintSpec(AB01, 4, (NO_11,))
    path = tmp_path / "spec.txt"
    write_constraint_file(spec, str(path))
    back = read_constraint_file(str(path))
    assert back == spec


def test_parse_errors():
    with pytest.raises(TraceFormatError):
        parse_constraint_spec(["horizon=2"])
    with pytest.raises(TraceFormatError):
        parse_constraint_spec(["alphabet=0,1"])
    with pytest.raises(TraceFormatError):
        parse_constraint_spec(
            ["alphabet=0,1", "horizon=2", "states=1", "start=0", "accept=0",
             "0 0 -> 0"]  # missing the transition for symbol 1
        )
    with pytest.raises(TraceFormatError):
        parse_constraint_spec(
            ["alphabet=0,1", "horizon=2", "states=1", "start=0", "accept=0",
             "0 0 -> 0", "0 1 -> 0", "0 1 -> 0"]  # duplicate
        )


def test_format_includes_everything():
    text = format_constraint_spec(ConstraintSpec(AB01, 2, (NO_11,)))
    assert "alphabet=0,1" in text
    assert "horizon=2" in text
    assert "states=3" in text
    assert "0 1 -> 1" in text
