import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exlab.exceptions import BudgetExhausted, ParameterError
from exlab.pow import (
    DifficultyPolicy,
    Puzzle,
    PuzzleIssuer,
    attempts_used,
    leading_zero_bits,
    make_puzzle,
    solve,
    verify,
)

# found once by exhaustive search over suffixes 0, 1, 2, ...
PINNED = Puzzle(b"exlab-pinned-challenge", 8)
PINNED_SUFFIX = bytes.fromhex("000000000000038e")


def test_zero_flags_give_base_difficulty():
    assert DifficultyPolicy(8, 1, 20).difficulty(0) == 8


def test_flags_saturate_at_cap():
    policy = DifficultyPolicy(8, 2, 12)
    assert policy.difficulty(1) == 10
    assert policy.difficulty(100) == 12


@given(st.integers(0, 10), st.integers(0, 4), st.integers(0, 30), st.integers(0, 50))
def test_difficulty_is_monotone_and_bounded(base, inc, cap, flags):
    if base > cap:
        return
    policy = DifficultyPolicy(base, inc, cap)
    assert base <= policy.difficulty(flags) <= cap
    assert policy.difficulty(flags) <= policy.difficulty(flags + 1)


@pytest.mark.parametrize("args", [(9, 1, 8), (0, -1, 5), (0, 1, 31)])
def test_policy_validation(args):
    with pytest.raises(ParameterError):
        DifficultyPolicy(*args)


def test_issuances_have_distinct_nonces():
    issuer = PuzzleIssuer(b"secret")
    a = issuer.make_puzzle("alice", DifficultyPolicy())
    b = issuer.make_puzzle("alice", DifficultyPolicy())
    assert a.challenge != b.challenge
    assert make_puzzle("bob", DifficultyPolicy()).challenge != make_puzzle("bob", DifficultyPolicy()).challenge


def test_issuer_is_thread_safe():
    issuer = PuzzleIssuer(b"secret")
    seen = []

    def work():
        seen.extend(issuer.make_puzzle("a", DifficultyPolicy()).challenge for _ in range(200))

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(seen)) == 800


def test_difficulty_zero_accepts_any_suffix():
    puzzle = Puzzle(b"x", 0)
    assert verify(puzzle, b"")
    assert verify(puzzle, b"anything")
    assert attempts_used(solve(puzzle)) == 1


def test_pinned_solution_verifies():
    assert verify(PINNED, PINNED_SUFFIX)
    assert solve(PINNED) == PINNED_SUFFIX


def test_flipping_a_bit_breaks_pinned_solution():
    for bit in range(64):
        flipped = (int.from_bytes(PINNED_SUFFIX, "big") ^ (1 << bit)).to_bytes(8, "big")
        assert not verify(PINNED, flipped)


def test_difficulty_eight_solves_within_budget():
    puzzle = PuzzleIssuer(b"k").make_puzzle("a", DifficultyPolicy(8, 0, 8))
    assert verify(puzzle, solve(puzzle, max_attempts=10**6))


def test_exhausted_search_raises():
    with pytest.raises(BudgetExhausted):
        solve(Puzzle(b"hard", 30), max_attempts=10)


def test_mean_attempts_at_difficulty_ten():
    issuer = PuzzleIssuer(b"mean")
    policy = DifficultyPolicy(10, 0, 10)
    attempts = [attempts_used(solve(issuer.make_puzzle("a", policy))) for _ in range(200)]
    assert 0.6 * 1024 <= np.mean(attempts) <= 1.6 * 1024


def test_leading_zero_bits():
    assert leading_zero_bits(bytes([0, 0x0F])) == 12
    assert leading_zero_bits(bytes(4)) == 32


def test_puzzle_dict_round_trip():
    assert Puzzle.from_dict(PINNED.to_dict()) == PINNED
