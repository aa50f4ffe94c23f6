"""Seeded two-sided driving sequences and the per-symbol fiber table."""

from dataclasses import dataclass

import numpy as np

from .maps import cached_fiber_map, make_fiber_map
from .potentials import PotentialSpec, make_potential

BACKWARD_MASK = 0x9E3779B97F4A7C15
MAX_WINDOW = 10**6


class DrivingError(ValueError):
    pass


class WindowOverflow(RuntimeError):
    """Requested fiber index lies beyond the configured window."""


@dataclass(frozen=True)
class FiberSpec:
    symbol: int
    map_family: str
    map_params: tuple
    potential: PotentialSpec

    def __post_init__(self):
        # validates parameters eagerly
        fm = make_fiber_map(self.map_family, dict(self.map_params))
        self.potential.validate_for(fm)

    @property
    def map(self):
        return cached_fiber_map(self.map_family, self.map_params)

    @property
    def params(self):
        return dict(self.map_params)

    def weight(self, x):
        """g(x) using the map's own branch assignment."""
        return self.potential.weight(self.map, x)

    def branch_weight(self, branch, y):
        return self.potential.branch_weight(self.map, branch, y)


def make_fiber_spec(symbol, family, params=None, potential=None):
    params = tuple(sorted((params or {}).items()))
    if potential is None:
        potential = PotentialSpec("geometric", t=1.0)
    elif isinstance(potential, dict):
        potential = make_potential(potential)
    return FiberSpec(int(symbol), str(family).lower().replace("-", "_"), params, potential)


class _SymbolStream:
    """One direction of the driving sequence, extended by doubling."""

    def __init__(self, seed, cum):
        self.rng = np.random.default_rng(seed)
        self.cum = cum
        self.buf = np.zeros(0, dtype=np.int64)

    def get(self, i):
        if i >= self.buf.size:
            size = max(64, self.buf.size)
            while self.buf.size + size <= i:
                size *= 2
            u = self.rng.random(size)
            sym = np.searchsorted(self.cum, u, side="right")
            sym = np.minimum(sym, self.cum.size - 1)
            self.buf = np.concatenate([self.buf, sym])
        return int(self.buf[i])


class DrivingProcess:
    """Realisation of the base shift: fiber index k -> symbol -> FiberSpec."""

    def __init__(self, kind, fiber_table, p=None, word=None, seed=0,
                 max_window=MAX_WINDOW, offset=0, _streams=None):
        self.kind = kind
        self.seed = int(seed)
        self.fiber_table = dict(fiber_table)
        self.max_window = int(max_window)
        self.offset = int(offset)
        if kind == "iid":
            p = np.asarray(p, dtype=float)
            if p.size == 0:
                raise DrivingError("empty alphabet")
            if np.any(p < 0):
                raise DrivingError("negative probability in p")
            if abs(p.sum() - 1.0) > 1e-12:
                raise DrivingError(f"probabilities sum to {p.sum()!r}, not 1")
            self.p = p
            self.word = None
            self.alphabet_size = p.size
            if _streams is None:
                cum = np.cumsum(p)
                cum[-1] = 1.0
                mask = (1 << 64) - 1
                _streams = (_SymbolStream(self.seed & mask, cum),
                            _SymbolStream((self.seed ^ BACKWARD_MASK) & mask, cum))
            self._streams = _streams
        elif kind == "periodic":
            if word is None or len(word) == 0:
                raise DrivingError("periodic driving needs a nonempty word")
            self.word = tuple(int(s) for s in word)
            if min(self.word) < 0:
                raise DrivingError("symbols must be nonnegative")
            self.alphabet_size = max(self.word) + 1
            self.p = np.bincount(self.word, minlength=self.alphabet_size) / len(self.word)
            self._streams = None
        else:
            raise DrivingError(f"unknown driving kind {kind!r}")
        used = set(range(self.alphabet_size)) if kind == "iid" else set(self.word)
        missing = [s for s in sorted(used) if s not in self.fiber_table]
        if missing:
            raise DrivingError(f"symbols without a fiber specification: {missing}")

    def symbol_at(self, k):
        j = int(k) + self.offset
        if abs(j) > self.max_window:
            raise WindowOverflow(f"fiber index {j} outside window +-{self.max_window}")
        if self.kind == "periodic":
            return self.word[j % len(self.word)]
        if self.alphabet_size == 1:
            return 0
        if j >= 0:
            return self._streams[0].get(j)
        return self._streams[1].get(-j - 1)

    def fiber_at(self, k):
        return self.fiber_table[self.symbol_at(k)]

    def word_at(self, k, n):
        return tuple(self.symbol_at(k + j) for j in range(n))

    def maps_window(self, k, n):
        return [self.fiber_at(k + j).map for j in range(n)]

    def shifted(self, m):
        """The same realisation re-anchored: shifted(m).fiber_at(k) == fiber_at(k + m)."""
        return DrivingProcess(self.kind, self.fiber_table, p=self.p, word=self.word,
                              seed=self.seed, max_window=self.max_window,
                              offset=self.offset + m, _streams=self._streams)

    @property
    def symbols(self):
        if self.kind == "periodic":
            return sorted(set(self.word))
        return [s for s in range(self.alphabet_size) if self.p[s] > 0]

    def __repr__(self):
        return f"DrivingProcess({self.kind}, seed={self.seed}, alphabet={self.alphabet_size})"


def make_driving(spec, fiber_table=None):
    """Build a DrivingProcess from a descriptor dict.

    ``spec`` looks like {"kind": "iid", "p": [...], "seed": N} or
    {"kind": "periodic", "word": [...]}; ``fiber_table`` maps symbols to
    FiberSpec (or to dicts with family/params/potential).
    """
    kind = spec.get("kind", "iid")
    table = {}
    for sym, fs in (fiber_table or spec.get("fibers", {})).items():
        if isinstance(fs, dict):
            fs = make_fiber_spec(int(sym), fs["family"], fs.get("params", {}), fs.get("potential"))
        table[int(sym)] = fs
    return DrivingProcess(kind, table, p=spec.get("p"), word=spec.get("word"),
                          seed=spec.get("seed", 0),
                          max_window=spec.get("max_window", MAX_WINDOW))


def constant_process(family, params=None, potential=None):
    """Deterministic system: the same fiber at every index."""
    fs = make_fiber_spec(0, family, params, potential)
    return DrivingProcess("periodic", {0: fs}, word=[0])


def iid_process(fibers, p, seed=0):
    """fibers: list of (family, params, potential) per symbol."""
    table = {i: make_fiber_spec(i, *f) for i, f in enumerate(fibers)}
    return DrivingProcess("iid", table, p=p, seed=seed)
