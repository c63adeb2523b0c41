"""Resource model and enumeration of per-server feasible VM configurations.

Conventions used throughout the package:

* an *aggregate config* is a length-M tuple of non-negative ints, the number
  of VMs of each type hosted simultaneously on one server;
* a *resource vector* is a length-K tuple of non-negative ``Fraction`` values
  (capacities or per-VM demands), kept exact so feasibility is never decided
  by float rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class UnboundedConfigError(ValueError):
    """A VM type demands zero of every resource, so configs are unbounded."""


def resource_vector(values) -> tuple[Fraction, ...]:
    """Normalize a sequence of amounts (int/float/str/Fraction) to exact Fractions."""
    out = tuple(Fraction(v) for v in values)
    if any(v < 0 for v in out):
        raise ValueError("resource amounts must be non-negative")
    return out


def feasible_from_resources(capacity, demands) -> set[tuple[int, ...]]:
    """All integer VM-count vectors eta with sum_m eta_m * R[m] <= capacity componentwise.

    ``capacity`` is one resource vector, ``demands`` one per VM type.
    Raises UnboundedConfigError if some type has zero demand on every resource.
    """
    cap = resource_vector(capacity)
    dem = [resource_vector(d) for d in demands]
    K = len(cap)
    if K < 1:
        raise ValueError("need at least one resource")
    for d in dem:
        if len(d) != K:
            raise ValueError("demand vector length does not match capacity")
        if all(x == 0 for x in d):
            raise UnboundedConfigError("VM type with zero demand on every resource")

    # per-type count ceiling; exact division keeps the bound tight
    bounds = []
    for d in dem:
        b = min(cap[k] // d[k] for k in range(K) if d[k] > 0)
        bounds.append(int(b))

    feasible = set()

    def extend(m, counts, used):
        if m == len(dem):
            feasible.add(tuple(counts))
            return
        d = dem[m]
        for n in range(bounds[m] + 1):
            new_used = tuple(used[k] + n * d[k] for k in range(K))
            if any(new_used[k] > cap[k] for k in range(K)):
                break
            extend(m + 1, counts + [n], new_used)

    extend(0, [], tuple(Fraction(0) for _ in range(K)))
    return feasible


def feasible_from_maximal(maximal) -> set[tuple[int, ...]]:
    """Downward closure of a set of maximal aggregate configs, deduplicated."""
    maximal = [tuple(int(x) for x in w) for w in maximal]
    if not maximal:
        raise ValueError("need at least one maximal config")
    M = len(maximal[0])
    if any(len(w) != M for w in maximal):
        raise ValueError("maximal configs must share one length")
    if any(x < 0 for w in maximal for x in w):
        raise ValueError("maximal configs must be non-negative")
    closed = set()
    for w in maximal:
        for cfg in itertools.product(*(range(x + 1) for x in w)):
            closed.add(cfg)
    return closed


@dataclass(frozen=True)
class ClusterModel:
    """Immutable cluster description: per-server feasible aggregate sets.

    ``feasible_sets[l]`` is the lexicographically sorted tuple of aggregate
    configs server l can host. Sets must contain the all-zero config and be
    downward closed; both are checked at construction.
    """

    M: int
    S: int
    feasible_sets: tuple[tuple[tuple[int, ...], ...], ...]
    _lookup: tuple[frozenset, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.M < 1 or self.S < 1:
            raise ValueError("M and S must be >= 1")
        if not self.feasible_sets:
            raise ValueError("need at least one server")
        lookups = []
        for fs in self.feasible_sets:
            fset = frozenset(fs)
            zero = (0,) * self.M
            if zero not in fset:
                raise ValueError("feasible set must contain the all-zero config")
            for w in fset:
                if len(w) != self.M:
                    raise ValueError("config length does not match M")
                for m in range(self.M):
                    if w[m] > 0:
                        below = w[:m] + (w[m] - 1,) + w[m + 1:]
                        if below not in fset:
                            raise ValueError("feasible set is not downward closed")
            if tuple(sorted(fs)) != tuple(fs):
                raise ValueError("feasible sets must be stored lex-sorted")
            lookups.append(fset)
        object.__setattr__(self, "_lookup", tuple(lookups))

    # -- constructors ------------------------------------------------------

    @staticmethod
    def identical(feasible: set[tuple[int, ...]], L: int, S: int) -> "ClusterModel":
        """L identical servers sharing one feasible aggregate set."""
        if L < 1:
            raise ValueError("L must be >= 1")
        fs = tuple(sorted(feasible))
        M = len(fs[0])
        return ClusterModel(M=M, S=S, feasible_sets=(fs,) * L)

    @staticmethod
    def from_maximal(maximal, L: int, S: int) -> "ClusterModel":
        return ClusterModel.identical(feasible_from_maximal(maximal), L, S)

    @staticmethod
    def from_resources(capacity, demands, L: int, S: int) -> "ClusterModel":
        return ClusterModel.identical(feasible_from_resources(capacity, demands), L, S)

    @staticmethod
    def heterogeneous(per_server_feasible, S: int) -> "ClusterModel":
        sets = tuple(tuple(sorted(fs)) for fs in per_server_feasible)
        M = len(sets[0][0])
        return ClusterModel(M=M, S=S, feasible_sets=sets)

    # -- queries -----------------------------------------------------------

    @property
    def L(self) -> int:
        return len(self.feasible_sets)

    @property
    def N_max(self) -> int:
        return max(max(sum(w) for w in fs) for fs in self.feasible_sets)

    @property
    def identical_servers(self) -> bool:
        return all(fs == self.feasible_sets[0] for fs in self.feasible_sets)

    def is_feasible(self, w, server: int) -> bool:
        """True iff aggregate w is in the given server's feasible set."""
        if not 0 <= server < self.L:
            raise IndexError("server index out of range")
        w = tuple(int(x) for x in w)
        if len(w) != self.M:
            raise ValueError("config length does not match M")
        return w in self._lookup[server]

    def config_arrays(self):
        """Padded numpy views for the hot loops.

        Returns (W, ncfg) with W of shape (L, ncfg_max, M) int64 and ncfg of
        shape (L,); rows beyond ncfg[l] are zero padding.
        """
        ncfg = np.array([len(fs) for fs in self.feasible_sets], dtype=np.int64)
        W = np.zeros((self.L, int(ncfg.max()), self.M), dtype=np.int64)
        for l, fs in enumerate(self.feasible_sets):
            W[l, : len(fs)] = np.array(fs, dtype=np.int64)
        return W, ncfg
