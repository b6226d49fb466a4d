"""A simulated representation API in front of a victim encoder.

Each query runs through the configured defense chain in order and is
appended to a per-account query log. Model parameters are only read.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .defenses.active import NoiseConfig, perturb_if_similar, perturb_noise
from .defenses.detect import DetectorConfig, HistoryStore, check_similar
from .exceptions import AccessDenied, ParameterError
from .pow import DifficultyPolicy, PuzzleIssuer, attempts_used, solve, verify
from .validation import check_matrix

EXPOSE = ("representations_y", "projections_z")


@dataclass(frozen=True)
class NoiseDefense:
    noise: NoiseConfig = NoiseConfig(10.0, 1.0)
    kind = "noise"


@dataclass(frozen=True)
class SimilarityDefense:
    """Replace outputs for queries similar to the account's history."""

    detector: DetectorConfig = DetectorConfig()
    big_noise: NoiseConfig = NoiseConfig(1000.0, 20.0)
    kind = "similarity_perturb"


@dataclass(frozen=True)
class PowGate:
    policy: DifficultyPolicy = DifficultyPolicy()
    kind = "pow_gate"


DEFENSE_TYPES = (NoiseDefense, SimilarityDefense, PowGate)


@dataclass(frozen=True)
class ServeConfig:
    expose: str = "representations_y"
    defenses: tuple = ()
    logging: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.expose not in EXPOSE:
            raise ParameterError(f"expose must be one of {EXPOSE}, got {self.expose!r}")
        for d in self.defenses:
            if not isinstance(d, DEFENSE_TYPES):
                raise ParameterError(f"unknown defense {d!r}")
        if sum(isinstance(d, PowGate) for d in self.defenses) > 1:
            raise ParameterError("at most one proof-of-work gate is allowed")


class QueryLogEntry(NamedTuple):
    account: str
    index: int
    input_hash: str
    vector: np.ndarray
    flags: tuple

    def to_line(self):
        vec = ",".join(repr(float(v)) for v in self.vector)
        return f"{self.account}\t{self.index}\t{self.input_hash}\t{vec}\t{'|'.join(self.flags)}"

    @classmethod
    def from_line(cls, line):
        account, index, h, vec, flags = line.rstrip("\n").split("\t")
        vector = np.array([float(v) for v in vec.split(",")]) if vec else np.zeros(0)
        return cls(account, int(index), h, vector, tuple(f for f in flags.split("|") if f))


class QueryLog:
    """Append-only log with a monotone query index per account."""

    def __init__(self):
        self._entries = []
        self._next = {}
        self._lock = threading.Lock()

    def append(self, account, input_hash, vector, flags=()):
        with self._lock:
            index = self._next.get(account, 0)
            self._next[account] = index + 1
            entry = QueryLogEntry(str(account), index, input_hash, np.array(vector, dtype=np.float64), tuple(flags))
            self._entries.append(entry)
            return entry

    def __len__(self):
        return len(self._entries)

    def entries(self, account=None):
        with self._lock:
            items = list(self._entries)
        return items if account is None else [e for e in items if e.account == str(account)]

    def save(self, path):
        with open(path, "w") as fh:
            fh.writelines(e.to_line() + "\n" for e in self.entries())

    @classmethod
    def load(cls, path):
        log = cls()
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    e = QueryLogEntry.from_line(line)
                    log.append(e.account, e.input_hash, e.vector, e.flags)
        return log


def input_hash(x):
    return hashlib.sha256(np.ascontiguousarray(x, dtype=np.float64).tobytes()).hexdigest()[:16]


class RepresentationAPI:
    """Serve ``f_v(x)`` (or ``g_v(f_v(x))``) behind a defense chain.

    Safe to call from several threads: the model is read-only and all
    mutable state (log, history, noise stream, puzzles) is guarded by a lock.
    """

    def __init__(self, victim, config: ServeConfig | None = None):
        self._victim = victim
        self.config = config or ServeConfig()
        self.log = QueryLog()
        self.history = HistoryStore()
        self._rng = np.random.default_rng(self.config.seed)
        self._issuer = PuzzleIssuer(secret=str(self.config.seed).encode())
        self._pending = {}
        self._flags = {}
        self._served = {}
        self._lock = threading.Lock()
        self._gate = next((d for d in self.config.defenses if isinstance(d, PowGate)), None)

    def __deepcopy__(self, memo):
        # a service handle: copies (e.g. sklearn.clone) share the one endpoint
        return self

    @property
    def input_dim(self):
        return self._victim.encoder.input_dim

    @property
    def output_dim(self):
        if self.config.expose == "projections_z":
            return self._victim.head.output_dim
        return self._victim.encoder.output_dim

    def queries_served(self, account=None):
        with self._lock:
            if account is None:
                return sum(self._served.values())
            return self._served.get(str(account), 0)

    def flag_count(self, account):
        with self._lock:
            return self._flags.get(str(account), 0)

    def _check_gate(self, account, solution):
        if self._gate is None:
            return
        with self._lock:
            puzzle = self._pending.get(account)
            if puzzle is None or solution is None:
                if puzzle is None:
                    flags = self._flags.get(account, 0)
                    puzzle = self._issuer.make_puzzle(account, self._gate.policy, flags)
                    self._pending[account] = puzzle
                raise AccessDenied(puzzle)
            if not verify(puzzle, solution):
                raise AccessDenied(puzzle, "proof-of-work solution rejected")
            del self._pending[account]

    def query(self, account, X, solution=None):
        """Serve a batch of flat or (N, H, W) inputs for ``account``.

        With a proof-of-work gate each call needs a fresh solution; a call
        without one raises ``AccessDenied`` carrying the puzzle to solve.
        """
        account = str(account)
        X = check_matrix(X, self.input_dim)
        self._check_gate(account, solution)
        reps = self._victim.represent(X)
        z = self._victim.project(X) if self._needs_projection() else None
        clean = z if self.config.expose == "projections_z" else reps
        out = np.empty_like(clean)
        with self._lock:
            for i in range(len(X)):
                vec = clean[i].copy()
                actions = []
                h = input_hash(X[i])
                for d in self.config.defenses:
                    if isinstance(d, NoiseDefense):
                        vec = perturb_noise(vec, d.noise, self._rng)
                        actions.append("noise")
                    elif isinstance(d, SimilarityDefense):
                        probe = z[i] if d.detector.space == "projection_z" else reps[i]
                        verdict = check_similar(self.history, account, probe, d.detector)
                        self.history.record(account, probe, h, ("flagged",) if verdict.flagged else ())
                        if verdict.flagged:
                            self._flags[account] = self._flags.get(account, 0) + 1
                            vec = perturb_if_similar(vec, verdict, d.big_noise, self._rng)
                            actions.append("similar_replaced")
                if self._gate is not None:
                    actions.append("pow")
                out[i] = vec
                self._served[account] = self._served.get(account, 0) + 1
                if self.config.logging:
                    self.log.append(account, h, vec, actions)
        return out

    def _needs_projection(self):
        if self.config.expose == "projections_z":
            return True
        return any(
            isinstance(d, SimilarityDefense) and d.detector.space == "projection_z" for d in self.config.defenses
        )


def serve_query(api: RepresentationAPI, account, x, solution=None):
    """Serve a single input and return its (possibly perturbed) vector."""
    return api.query(account, np.asarray(x, dtype=np.float64).reshape(1, -1), solution)[0]


@dataclass
class PowClient:
    """Simulated client that solves puzzles when the API demands them."""

    api: RepresentationAPI
    account: str
    max_attempts: int = 1 << 32
    attempts: int = 0
    puzzles: list = field(default_factory=list)

    def query(self, X):
        try:
            return self.api.query(self.account, X)
        except AccessDenied as denied:
            suffix = solve(denied.puzzle, self.max_attempts)
            self.attempts += attempts_used(suffix)
            self.puzzles.append(denied.puzzle.difficulty_bits)
            return self.api.query(self.account, X, solution=suffix)
