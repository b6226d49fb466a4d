"""HashCash-style proof-of-work puzzles over SHA-256."""

from __future__ import annotations

import hashlib
import os
import struct
import threading
from dataclasses import dataclass

from .exceptions import BudgetExhausted, ParameterError

MAX_DIFFICULTY = 30


@dataclass(frozen=True)
class Puzzle:
    challenge: bytes
    difficulty_bits: int

    def to_dict(self):
        return {"challenge_hex": self.challenge.hex(), "difficulty_bits": self.difficulty_bits}

    @classmethod
    def from_dict(cls, d):
        return cls(bytes.fromhex(d["challenge_hex"]), int(d["difficulty_bits"]))


@dataclass(frozen=True)
class DifficultyPolicy:
    """``difficulty = min(base + increment * flags, cap)``.

    The flag count comes from the query-similarity detector, standing in for
    a leakage estimate that representations do not provide.
    """

    base_bits: int = 8
    increment_bits_per_flag: int = 1
    cap_bits: int = 20

    def __post_init__(self):
        if not 0 <= self.base_bits <= self.cap_bits <= MAX_DIFFICULTY:
            raise ParameterError(f"need 0 <= base <= cap <= {MAX_DIFFICULTY}")
        if self.increment_bits_per_flag < 0:
            raise ParameterError("increment must be >= 0")

    def difficulty(self, flags):
        return min(self.base_bits + self.increment_bits_per_flag * max(0, int(flags)), self.cap_bits)


def leading_zero_bits(digest: bytes):
    n = int.from_bytes(digest, "big")
    return len(digest) * 8 - n.bit_length()


class PuzzleIssuer:
    """Issues puzzles with unique nonces; safe to share between threads."""

    def __init__(self, secret: bytes | None = None):
        self._secret = os.urandom(16) if secret is None else bytes(secret)
        self._counter = 0
        self._lock = threading.Lock()

    def make_puzzle(self, account, policy: DifficultyPolicy, detector_flags_count=0) -> Puzzle:
        with self._lock:
            counter = self._counter
            self._counter += 1
        nonce = hashlib.sha256(self._secret + struct.pack(">Q", counter)).digest()[:16]
        challenge = str(account).encode() + b"|" + nonce + b"|" + struct.pack(">Q", counter)
        return Puzzle(challenge, policy.difficulty(detector_flags_count))


_default_issuer = PuzzleIssuer()


def make_puzzle(account, policy: DifficultyPolicy, detector_flags_count=0) -> Puzzle:
    return _default_issuer.make_puzzle(account, policy, detector_flags_count)


def verify(puzzle: Puzzle, suffix: bytes) -> bool:
    if puzzle.difficulty_bits == 0:
        return True
    digest = hashlib.sha256(puzzle.challenge + bytes(suffix)).digest()
    return leading_zero_bits(digest) >= puzzle.difficulty_bits


def solve(puzzle: Puzzle, max_attempts=1 << 32) -> bytes:
    """Search suffixes ``0, 1, 2, ...`` (8-byte big-endian) until one verifies.

    The number of attempts used is ``int.from_bytes(suffix, "big") + 1``.
    """
    if max_attempts < 1:
        raise ParameterError("max_attempts must be >= 1")
    bits = puzzle.difficulty_bits
    if bits == 0:
        return struct.pack(">Q", 0)
    limit = 1 << (256 - bits)
    base = hashlib.sha256(puzzle.challenge)
    pack = struct.Struct(">Q").pack
    for i in range(max_attempts):
        suffix = pack(i)
        h = base.copy()
        h.update(suffix)
        if int.from_bytes(h.digest(), "big") < limit:
            return suffix
    raise BudgetExhausted(f"no solution within {max_attempts} attempts at difficulty {bits}")


def attempts_used(suffix: bytes):
    return int.from_bytes(suffix, "big") + 1
