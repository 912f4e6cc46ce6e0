"""Site-indexed bias environments and the shift map.

An environment assigns to every lattice site i and regime a win probability
p_i in (0,1).  Three stationary ergodic generators are supported: exactly
periodic tables, iid draws from a finite support, and the Gauss continued
fraction map iterated from a stationary start.  Realizations are finite
windows of such a process together with enough bookkeeping to apply the
shift T (reading index i after a shift equals reading index i+1 before).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EnvError",
    "EnvSpec",
    "EnvRealization",
    "MeanLogOdds",
    "realize",
    "shift",
    "mean_log_odds",
]

# probabilities this close to 0 or 1 make the odds ratio blow up; reject them
_PROB_MARGIN = 1e-12

PERIODIC = "periodic"
IID = "iid"
GAUSS_MAP = "gauss_map"


class EnvError(ValueError):
    """Invalid environment specification or out-of-window access."""


def _check_probs(values, what: str):
    for v in values:
        if not (_PROB_MARGIN < float(v) < 1.0 - _PROB_MARGIN):
            raise EnvError(f"{what} value {v!r} is not strictly inside (0,1)")


@dataclass(frozen=True)
class EnvSpec:
    """One regime's bias process.

    kind is one of "periodic" (values cycle with their length as period),
    "iid" (independent draws from support with the given weights), or
    "gauss_map" (orbit of T(e) = 1/e - floor(1/e) from a stationary draw,
    with p_i equal to the orbit value itself).
    """

    kind: str
    values: tuple = ()
    support: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind == PERIODIC:
            if len(self.values) == 0:
                raise EnvError("periodic spec needs at least one value")
            _check_probs(self.values, "periodic")
        elif self.kind == IID:
            if len(self.support) == 0 or len(self.support) != len(self.weights):
                raise EnvError("iid spec needs matching support and weights")
            _check_probs(self.support, "iid support")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise EnvError("iid weights must be positive and sum to 1")
        elif self.kind == GAUSS_MAP:
            if self.values or self.support or self.weights:
                raise EnvError("gauss_map spec takes no parameters")
        else:
            raise EnvError(f"unknown environment kind {self.kind!r}")

    @classmethod
    def periodic(cls, values) -> "EnvSpec":
        return cls(kind=PERIODIC, values=tuple(float(v) for v in values))

    @classmethod
    def iid(cls, support, weights) -> "EnvSpec":
        return cls(
            kind=IID,
            support=tuple(float(v) for v in support),
            weights=tuple(float(w) for w in weights),
        )

    @classmethod
    def gauss_map(cls) -> "EnvSpec":
        return cls(kind=GAUSS_MAP)

    @property
    def period(self):
        """Spatial period, or None when the spec is not periodic."""
        return len(self.values) if self.kind == PERIODIC else None

    @property
    def regenerable(self) -> bool:
        """Whether arbitrary windows can be reproduced from the spec alone."""
        return self.kind == PERIODIC


@dataclass(frozen=True)
class EnvRealization:
    """A finite window of per-regime bias values.

    table has one row per regime and one column per site in
    [i_min, i_max].  origin_shift records how many applications of the
    shift T separate this realization from the originally drawn one.
    """

    specs: tuple
    i_min: int
    i_max: int
    table: np.ndarray = field(repr=False)
    origin_shift: int = 0
    seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or t.shape != (len(self.specs), self.i_max - self.i_min + 1):
            raise EnvError(f"table shape {t.shape} does not match window/regimes")
        if np.any(t <= 0.0) or np.any(t >= 1.0):
            raise EnvError("realized probabilities must lie strictly in (0,1)")
        object.__setattr__(self, "table", t)

    @property
    def m(self) -> int:
        return len(self.specs)

    @property
    def window(self) -> tuple[int, int]:
        return (self.i_min, self.i_max)

    def read(self, regime: int, i: int) -> float:
        """Bias value p_i for one regime at site i (window-checked)."""
        if not self.i_min <= i <= self.i_max:
            raise EnvError(f"site {i} outside realized window {self.window}")
        return float(self.table[regime, i - self.i_min])

    def read_column(self, i: int) -> np.ndarray:
        """All regimes' bias values at site i as a vector."""
        if not self.i_min <= i <= self.i_max:
            raise EnvError(f"site {i} outside realized window {self.window}")
        return self.table[:, i - self.i_min].copy()


def _periodic_row(spec: EnvSpec, i_min: int, i_max: int, phase: int) -> np.ndarray:
    vals = np.asarray(spec.values, dtype=float)
    idx = (np.arange(i_min, i_max + 1) + phase) % len(vals)
    return vals[idx]


def _stationary_gauss_draw(rng: np.random.Generator) -> float:
    # inverse cdf of the density 1/((1+x) log 2) on (0,1)
    return float(np.exp2(rng.random()) - 1.0)


def _gauss_row(i_min: int, i_max: int, rng: np.random.Generator) -> np.ndarray:
    width = i_max - i_min + 1
    out = np.empty(width)
    e = _stationary_gauss_draw(rng)
    # guard against landing on a rational orbit that exits (0,1)
    for k in range(width):
        if not (0.0 < e < 1.0):
            e = _stationary_gauss_draw(rng)
        out[k] = e
        e = 1.0 / e - math.floor(1.0 / e)
    return out


def realize(specs, window: tuple[int, int], seed: int = 0) -> EnvRealization:
    """Realize all regimes' bias processes on a window of sites.

    Deterministic in (specs, window, seed).  Periodic rows ignore the seed;
    iid and Gauss map rows use independent substreams derived from it.  The
    Gauss map is realized as a forward orbit started at the window's left
    edge, which is the natural one-sided stand-in for its two-sided
    extension (T is not invertible, so there is no canonical backward
    orbit).
    """
    if isinstance(specs, EnvSpec):
        specs = (specs,)
    specs = tuple(specs)
    i_min, i_max = int(window[0]), int(window[1])
    if i_max < i_min:
        raise EnvError(f"empty window {window}")
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(specs))
    rows = []
    for spec, child in zip(specs, children):
        if spec.kind == PERIODIC:
            rows.append(_periodic_row(spec, i_min, i_max, phase=0))
        elif spec.kind == IID:
            rng = np.random.default_rng(child)
            support = np.asarray(spec.support, dtype=float)
            idx = rng.choice(len(support), size=i_max - i_min + 1, p=spec.weights)
            rows.append(support[idx])
        else:
            rows.append(_gauss_row(i_min, i_max, np.random.default_rng(child)))
    return EnvRealization(
        specs=specs, i_min=i_min, i_max=i_max, table=np.vstack(rows), seed=int(seed)
    )


def shift(e: EnvRealization, k: int) -> EnvRealization:
    """Apply the shift T^k: reading index i afterwards reads i+k before.

    Fully periodic realizations are regenerated on the same window (so a
    shift by a common period is the identity).  Other kinds keep their
    realized data and relabel the window, which shrinks nothing but moves
    the readable index range to [i_min-k, i_max-k].
    """
    k = int(k)
    if k == 0:
        return e
    if all(s.kind == PERIODIC for s in e.specs):
        phase = e.origin_shift + k
        rows = [_periodic_row(s, e.i_min, e.i_max, phase=phase) for s in e.specs]
        return EnvRealization(
            specs=e.specs,
            i_min=e.i_min,
            i_max=e.i_max,
            table=np.vstack(rows),
            origin_shift=phase,
            seed=e.seed,
        )
    new_min, new_max = e.i_min - k, e.i_max - k
    if new_max < new_min:
        raise EnvError("shift exceeds realized window for non-regenerable spec")
    return EnvRealization(
        specs=e.specs,
        i_min=new_min,
        i_max=new_max,
        table=e.table,
        origin_shift=e.origin_shift + k,
        seed=e.seed,
    )


@dataclass(frozen=True)
class MeanLogOdds:
    """Ergodic mean of log((1-p)/p) with sampling metadata."""

    value: float
    stderr: float
    exact: bool
    n_samples: int


def mean_log_odds(spec: EnvSpec, n_samples: int = 1_000_000, seed: int = 0) -> MeanLogOdds:
    """Ergodic average of the log odds ratio log((1-p_i)/p_i).

    Exact (a plain average over one period) for periodic specs.  For iid
    and Gauss map specs this is a Monte Carlo average over stationary
    draws with a reported standard error; the Gauss map's stationary law
    has density 1/((1+x) log 2), giving the known limit (log 2)/2.
    """
    if n_samples < 1:
        raise EnvError("n_samples must be at least 1")
    if spec.kind == PERIODIC:
        v = np.asarray(spec.values, dtype=float)
        value = float(np.mean(np.log1p(-v) - np.log(v)))
        return MeanLogOdds(value=value, stderr=0.0, exact=True, n_samples=len(v))
    if spec.kind == IID:
        s = np.asarray(spec.support, dtype=float)
        w = np.asarray(spec.weights, dtype=float)
        value = float(np.dot(w, np.log1p(-s) - np.log(s)))
        return MeanLogOdds(value=value, stderr=0.0, exact=True, n_samples=len(s))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x = np.exp2(rng.random(int(n_samples))) - 1.0
    logs = np.log1p(-x) - np.log(x)
    value = float(logs.mean())
    stderr = float(logs.std(ddof=1) / math.sqrt(len(logs)))
    return MeanLogOdds(value=value, stderr=stderr, exact=False, n_samples=int(n_samples))
