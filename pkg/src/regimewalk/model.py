"""Regime-switching walk models and their transfer matrices.

A model couples an m-state regime chain (row-stochastic matrix Q) with one
bias environment per regime.  At every site i the one-step structure is
captured by a pair of m x m matrices: an up-step matrix Q diag(p_i) and a
down-step matrix Q diag(1-p_i), whose sum is Q.  When the relevant inverses
exist these assemble into 2m x 2m one-step transfer matrices that propagate
hitting-probability vectors, plus reduced 2r x 2r versions when Q has rank
r < m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import linalg
from .environments import PERIODIC, EnvRealization, EnvSpec

__all__ = [
    "ModelError",
    "DegenerateStructureError",
    "RegimeModel",
    "RankDecomposition",
    "TransferMatrices",
    "HypothesisReport",
    "DegenerateReduction",
    "ProbeResult",
    "rank_decompose",
    "build_transfer",
    "check_hypothesis_inv",
    "rank1_reduce_degenerate",
    "irreducibility_probe",
]

_DET_TOL = 1e-12


class ModelError(ValueError):
    """Invalid model definition or unusable structure."""


class DegenerateStructureError(ModelError):
    """The duplicated-regime fallback does not apply to this model."""


@dataclass(frozen=True)
class RegimeModel:
    """Regime chain Q plus one environment spec per regime."""

    Q: np.ndarray = field(repr=False)
    env: tuple

    def __post_init__(self):
        q = np.asarray(self.Q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise ModelError(f"Q must be square and nonempty, got shape {q.shape}")
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise ModelError("Q entries must lie in [0,1]")
        if np.abs(q.sum(axis=1) - 1.0).max() > 1e-12:
            raise ModelError("Q rows must sum to 1")
        env = tuple(self.env)
        if len(env) != q.shape[0]:
            raise ModelError("need exactly one environment spec per regime")
        for spec in env:
            if not isinstance(spec, EnvSpec):
                raise ModelError("env entries must be EnvSpec instances")
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "env", env)

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def spatial_period(self):
        """lcm of the regimes' periods, or None if any regime is aperiodic."""
        periods = [s.period for s in self.env]
        if any(p is None for p in periods):
            return None
        return math.lcm(*periods)

    def realize_env(self, window: tuple[int, int], seed: int = 0) -> EnvRealization:
        from .environments import realize

        return realize(self.env, window, seed=seed)


@dataclass(frozen=True)
class RankDecomposition:
    """Q split as independent rows pi and dependent rows theta @ pi.

    row_permutation lists the independent row indices first; pi stacks
    those rows of Q and theta solves (dependent rows) = theta @ pi.
    """

    r: int
    row_permutation: tuple
    pi: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)

    @property
    def independent(self) -> tuple:
        return self.row_permutation[: self.r]

    @property
    def dependent(self) -> tuple:
        return self.row_permutation[self.r :]

    def reconstruct(self) -> np.ndarray:
        """Rebuild Q from (pi; theta pi), undoing the permutation."""
        m = len(self.row_permutation)
        out = np.empty((m, self.pi.shape[1]))
        stacked = np.vstack([self.pi, self.theta @ self.pi]) if self.r < m else self.pi
        for pos, row in enumerate(self.row_permutation):
            out[row] = stacked[pos]
        return out


def rank_decompose(Q, tol: float = 1e-9) -> RankDecomposition:
    """Numerical rank of Q with an explicit independent-row selection.

    Greedy in index order: a row joins the independent set whenever it
    increases the numerical rank of the rows kept so far, so ties are
    broken deterministically.  theta comes from least squares, which is
    exact up to roundoff since dependent rows lie in the span by
    construction.
    """
    q = np.asarray(Q, dtype=float)
    r = linalg.numerical_rank(q, tol=tol)
    kept: list[int] = []
    for idx in range(q.shape[0]):
        if len(kept) == r:
            break
        cand = q[kept + [idx]]
        if linalg.numerical_rank(cand, tol=tol) > len(kept):
            kept.append(idx)
    rest = [i for i in range(q.shape[0]) if i not in kept]
    pi = q[kept]
    if rest:
        theta, *_ = np.linalg.lstsq(pi.T, q[rest].T, rcond=None)
        theta = theta.T
    else:
        theta = np.zeros((0, r))
    return RankDecomposition(
        r=r, row_permutation=tuple(kept + rest), pi=pi, theta=theta
    )


@dataclass(frozen=True)
class TransferMatrices:
    """All one-site matrices of the model at a single site.

    up_step and down_step are the m x m coefficients multiplying the
    hitting vectors one site up and one site down; their sum is Q exactly.
    odds is up_step^-1 down_step.  transfer is the 2m x 2m block matrix
    ((up_step^-1, -odds), (I, 0)) which fixes the all-ones vector;
    dual_transfer is its inverse conjugated by the block swap.  The
    _reduced fields carry the 2r x 2r analogues built from the rank
    decomposition; they are None when the rank path does not apply or the
    reduced up/down matrices are singular.
    """

    site: int
    m: int
    r: int
    delta: np.ndarray = field(repr=False)
    up_step: np.ndarray = field(repr=False)
    down_step: np.ndarray = field(repr=False)
    odds: np.ndarray | None = field(repr=False, default=None)
    transfer: np.ndarray | None = field(repr=False, default=None)
    dual_transfer: np.ndarray | None = field(repr=False, default=None)
    delta_independent: np.ndarray | None = field(repr=False, default=None)
    delta_dependent: np.ndarray | None = field(repr=False, default=None)
    up_step_reduced: np.ndarray | None = field(repr=False, default=None)
    down_step_reduced: np.ndarray | None = field(repr=False, default=None)
    odds_reduced: np.ndarray | None = field(repr=False, default=None)
    transfer_reduced: np.ndarray | None = field(repr=False, default=None)
    dual_transfer_reduced: np.ndarray | None = field(repr=False, default=None)
    up_invertible: bool = False
    down_invertible: bool = False
    reduced_up_invertible: bool = False
    reduced_down_invertible: bool = False

    @property
    def path(self) -> str:
        if self.r == self.m:
            return "full"
        return "rank1" if self.r == 1 else "reduced"


def _assemble_transfer(up: np.ndarray, down: np.ndarray):
    """((up^-1, -up^-1 down), (I, 0)) and its swap-conjugated inverse."""
    k = up.shape[0]
    det_up = np.linalg.det(up)
    det_down = np.linalg.det(down)
    up_ok = abs(det_up) > _DET_TOL
    down_ok = abs(det_down) > _DET_TOL
    transfer = None
    dual = None
    if up_ok:
        up_inv = linalg.inverse(up)
        odds = up_inv @ down
        transfer = np.zeros((2 * k, 2 * k))
        transfer[:k, :k] = up_inv
        transfer[:k, k:] = -odds
        transfer[k:, :k] = np.eye(k)
    else:
        odds = None
    if down_ok:
        down_inv = linalg.inverse(down)
        dual = np.zeros((2 * k, 2 * k))
        dual[:k, :k] = down_inv
        dual[:k, k:] = -(down_inv @ up)
        dual[k:, :k] = np.eye(k)
    return odds, transfer, dual, up_ok, down_ok


def build_transfer(
    model: RegimeModel,
    e: EnvRealization,
    i: int,
    decomposition: RankDecomposition | None = None,
) -> TransferMatrices:
    """All transfer structure of the model at site i of the realization.

    A missing inverse is reported through None fields and the
    *_invertible flags rather than an exception, since rank-deficient
    steps are expected on the degenerate path.
    """
    if decomposition is None:
        decomposition = rank_decompose(model.Q)
    p = e.read_column(i)
    if len(p) != model.m:
        raise ModelError("environment realization does not match model regimes")
    delta = np.diag(p)
    up = model.Q @ delta
    down = model.Q @ (np.eye(model.m) - delta)
    odds, transfer, dual, up_ok, down_ok = _assemble_transfer(up, down)

    kwargs: dict = {}
    r = decomposition.r
    if 0 < r < model.m:
        ind = list(decomposition.independent)
        dep = list(decomposition.dependent)
        pi_ind = decomposition.pi[:, ind]
        pi_dep = decomposition.pi[:, dep]
        d_ind = np.diag(p[ind])
        d_dep = np.diag(p[dep])
        up_red = pi_ind @ d_ind + pi_dep @ d_dep @ decomposition.theta
        down_red = pi_ind @ (np.eye(r) - d_ind) + pi_dep @ (
            np.eye(len(dep)) - d_dep
        ) @ decomposition.theta
        odds_red, transfer_red, dual_red, rup_ok, rdown_ok = _assemble_transfer(
            up_red, down_red
        )
        kwargs = dict(
            delta_independent=d_ind,
            delta_dependent=d_dep,
            up_step_reduced=up_red,
            down_step_reduced=down_red,
            odds_reduced=odds_red,
            transfer_reduced=transfer_red,
            dual_transfer_reduced=dual_red,
            reduced_up_invertible=rup_ok,
            reduced_down_invertible=rdown_ok,
        )

    return TransferMatrices(
        site=int(i),
        m=model.m,
        r=r,
        delta=delta,
        up_step=up,
        down_step=down,
        odds=odds,
        transfer=transfer,
        dual_transfer=dual,
        up_invertible=up_ok,
        down_invertible=down_ok,
        **kwargs,
    )


@dataclass(frozen=True)
class HypothesisReport:
    """Per-site invertibility of the reduced up/down matrices."""

    sites: tuple
    det_up: tuple
    det_down: tuple
    tol: float
    holds: bool


def check_hypothesis_inv(
    model: RegimeModel,
    e: EnvRealization,
    sites,
    decomposition: RankDecomposition | None = None,
    tol: float = _DET_TOL,
) -> HypothesisReport:
    """Check reduced up/down invertibility on a range of sites.

    For full-rank Q the plain up/down matrices are checked instead, so the
    report is meaningful on every rank path.
    """
    if decomposition is None:
        decomposition = rank_decompose(model.Q)
    sites = tuple(int(s) for s in sites)
    dets_up = []
    dets_down = []
    for i in sites:
        t = build_transfer(model, e, i, decomposition)
        if 0 < decomposition.r < model.m:
            dets_up.append(float(np.linalg.det(t.up_step_reduced)))
            dets_down.append(float(np.linalg.det(t.down_step_reduced)))
        else:
            dets_up.append(float(np.linalg.det(t.up_step)))
            dets_down.append(float(np.linalg.det(t.down_step)))
    holds = all(abs(d) > tol for d in dets_up) and all(
        abs(d) > tol for d in dets_down
    )
    return HypothesisReport(
        sites=sites,
        det_up=tuple(dets_up),
        det_down=tuple(dets_down),
        tol=tol,
        holds=holds,
    )


@dataclass(frozen=True)
class DegenerateReduction:
    """Scalar effective chain for the duplicated-regime fallback.

    When the two independent regimes carry identical bias processes the
    reduced up-step matrix has equal columns and rank 1.  The sum h_i of
    the two independent regimes' hitting probabilities then satisfies a
    scalar birth-death recursion whose up probability is the column sum
    of the reduced up-step matrix, and every regime's hitting probability
    is an explicit readout of h.
    """

    model: RegimeModel
    decomposition: RankDecomposition
    effective_model: RegimeModel
    effective_values: tuple
    period: int

    def effective_probability(self, i: int) -> float:
        return self.effective_values[i % self.period]

    def reconstruct_pair(self, e: EnvRealization, i: int, h_up: float, h_down: float) -> np.ndarray:
        """Independent-pair hitting values from the scalar solution.

        h_up and h_down are the scalar chain's aggregate (sum over the two
        independent regimes) at sites i+1 and i-1.
        """
        t = build_transfer(self.model, e, i, self.decomposition)
        up_col = t.up_step_reduced[:, 0]
        down_col = t.down_step_reduced[:, 0]
        return up_col * h_up + down_col * h_down


def rank1_reduce_degenerate(model: RegimeModel, e: EnvRealization) -> DegenerateReduction:
    """Collapse a duplicated-regime rank-r model to a scalar chain.

    Applies when Q has rank m-1 = 2-regime-independent structure with the
    two independent regimes sharing one environment spec, which makes the
    reduced up-step matrix rank 1 at every site.  Raises
    DegenerateStructureError when that structure is not present.
    """
    decomposition = rank_decompose(model.Q)
    r = decomposition.r
    if not (1 < r < model.m):
        raise DegenerateStructureError("rank must be strictly between 1 and m")
    ind = decomposition.independent
    specs = [model.env[a] for a in ind]
    if any(s != specs[0] for s in specs[1:]):
        raise DegenerateStructureError(
            "independent regimes carry different environments; no duplication"
        )
    if any(s.kind != PERIODIC for s in model.env):
        raise DegenerateStructureError("fallback implemented for periodic environments")
    period = model.spatial_period
    values = []
    for i in range(period):
        t = build_transfer(model, e, i, decomposition)
        up_red = t.up_step_reduced
        col_spread = np.abs(up_red - up_red[:, [0]]).max()
        if col_spread > 1e-10:
            raise DegenerateStructureError(
                f"reduced up-step columns differ by {col_spread:.2e} at site {i}"
            )
        values.append(float(up_red[:, 0].sum()))
    if any(not 0.0 < v < 1.0 for v in values):
        raise DegenerateStructureError("effective probabilities left (0,1)")
    effective = RegimeModel(
        Q=np.array([[1.0]]), env=(EnvSpec.periodic(values),)
    )
    return DegenerateReduction(
        model=model,
        decomposition=decomposition,
        effective_model=effective,
        effective_values=tuple(values),
        period=period,
    )


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of the finite-quotient irreducibility probe."""

    status: str  # "irreducible", "reducible", or "unknown"
    classes: tuple
    quotient_period: int


def irreducibility_probe(
    model: RegimeModel, e: EnvRealization, quotient_period: int | None = None
) -> ProbeResult:
    """Strongly connected components of the (regime, site mod P) quotient.

    Edges follow positive entries of Q with site moves of +-1, which is
    faithful because every realized bias lies strictly inside (0,1).  The
    probe is conclusive only for periodic environments (the quotient then
    is an honest factor of the quenched chain); anything else returns
    "unknown".
    """
    period = model.spatial_period
    if period is None:
        return ProbeResult(status="unknown", classes=(), quotient_period=0)
    if quotient_period is None:
        quotient_period = math.lcm(2, period)
    quotient_period = int(quotient_period)
    if quotient_period < 2 or quotient_period % 2 or quotient_period % period:
        raise ModelError(
            "quotient period must be even and a multiple of the spatial period"
        )
    m = model.m
    n_nodes = m * quotient_period
    rows, cols = [], []
    for a in range(m):
        for b in range(m):
            if model.Q[a, b] <= 0.0:
                continue
            for res in range(quotient_period):
                src = a * quotient_period + res
                rows.append(src)
                cols.append(b * quotient_period + (res + 1) % quotient_period)
                rows.append(src)
                cols.append(b * quotient_period + (res - 1) % quotient_period)
    graph = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_nodes, n_nodes)
    )
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    classes = []
    for c in range(n_comp):
        members = frozenset(
            (node // quotient_period, node % quotient_period)
            for node in np.flatnonzero(labels == c)
        )
        classes.append(members)
    classes.sort(key=lambda s: sorted(s))
    status = "irreducible" if n_comp == 1 else "reducible"
    return ProbeResult(
        status=status, classes=tuple(classes), quotient_period=quotient_period
    )
