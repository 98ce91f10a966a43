"""L^q-spectra of loop classes, concave conjugates and the formalism verdict.

Curves live on a finite q-grid.  Scalar loop classes are solved through
the pressure equation; matrix classes use moment sums over scale
partitions restricted to the class.  Conjugates are discrete
Legendre-Fenchel transforms taking the value NEG_INF outside the range of
chord slopes.
"""
from __future__ import annotations

import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import BisectionFailure, GridTooNarrow, NonConcaveInput, PathExplosion
from .exact import AlgebraicReal
from .graph import PathRef, TransitionGraph, extend_path, make_path
from .loops import (
    NOT_DEGENERATE,
    PROVEN,
    LoopClassReport,
    shortest_rooted_path,
)

CLOSED_FORM = "closed_form_scalar"
PRESSURE_ROOT = "pressure_root"
MOMENT_SLOPE = "moment_slope"

DEFAULT_PATH_CAP = 2_000_000
CLOSED_FORM_SLACK = 1e-9
MOMENT_SLACK = 5e-3
Q_BIG = 40.0
ALPHA_TOL = 5e-3  # attachment tolerance for point spectra outside the resolved range
VALUE_TOL = 1e-9
_LOG_EPS = 1e-9  # threshold comparisons in log space


class _NegInf:
    """Extended-real minus infinity.  Ordered below every float; no arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NEG_INF"

    def __str__(self):
        return "-inf"

    def __float__(self):
        return float("-inf")

    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("NEG_INF")

    def _forbidden(self, *args):
        raise TypeError("arithmetic with NEG_INF is not defined")

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _forbidden
    __truediv__ = __rtruediv__ = __neg__ = __abs__ = _forbidden


NEG_INF = _NegInf()


def default_q_grid() -> np.ndarray:
    base = np.round(np.linspace(-10.0, 10.0, 81), 12)
    return np.array(sorted(set(base.tolist()) | {-Q_BIG, Q_BIG}))


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("MFDECOMP_THREADS", "1")))
    except ValueError:
        return 1


def _log_fraction(x) -> float:
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log of a nonpositive value")
    return math.log(x.numerator) - math.log(x.denominator)


def _fmt(x) -> str:
    if x is NEG_INF:
        return "-inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{float(x):.12g}"


# ---------------------------------------------------------------------------
# scale partitions


@dataclass(frozen=True)
class ScalePartition:
    threshold: object
    paths: tuple
    restrict: Optional[tuple] = None  # (class id, zeta edges)

    def __len__(self):
        return len(self.paths)

    def total_measure(self) -> Fraction:
        return sum((p.measure for p in self.paths), Fraction(0))


def _as_element(g: TransitionGraph, t) -> AlgebraicReal:
    F = g.wifs.field
    if isinstance(t, AlgebraicReal):
        return t
    if isinstance(t, float):
        t = Fraction(t)
    return F.element(t)


def scale_partition(g: TransitionGraph, t, restrict=None, cap: int = DEFAULT_PATH_CAP) -> ScalePartition:
    """Paths eta with W(eta) <= t < W(eta minus its last edge), by exact comparison.

    The empty path is never a member, so t = 1 gives the length-1 paths.
    ``restrict = (lc, zeta)`` keeps only extensions of the rooted path zeta by
    edges inside the loop class lc.
    """
    t = _as_element(g, t)
    if t.sign() <= 0 or t > 1:
        raise ValueError("threshold must lie in (0, 1]")
    if restrict is None:
        start = make_path(g, ())
        allowed = None
        tag = None
    else:
        lc, zeta = restrict
        zeta = tuple(zeta)
        start = make_path(g, zeta)
        if start.end not in lc.vertices:
            raise ValueError("zeta does not end in the loop class")
        allowed = set(lc.edges)
        tag = (lc.id, zeta)
        if zeta and start.weight <= t:
            # zeta is the only candidate; it needs its parent above t
            parent = make_path(g, zeta[:-1])
            members = (start,) if parent.weight > t else ()
            return ScalePartition(t, members, tag)
    out = []
    stack = [start]
    while stack:
        p = stack.pop()
        if len(p) and p.weight <= t:
            out.append(p)
            if len(out) > cap:
                raise PathExplosion(f"more than {cap} paths at threshold {float(t):.6g}",
                                    threshold=t, count=len(out))
            continue
        for k in reversed(g.out_edges[p.end]):
            if allowed is None or k in allowed:
                stack.append(extend_path(g, p, k))
    out.sort(key=lambda p: p.edges)
    return ScalePartition(t, tuple(out), tag)


def lq_moment(partition: ScalePartition, q) -> float:
    """Sum of ||T(eta)||^q over the partition.

    Small nonnegative integer q is summed exactly; other q go through a
    log-sum-exp of the exact logarithms.
    """
    if not partition.paths:
        return 0.0
    qf = float(q)
    if qf == int(qf) and 0 <= qf <= 16:
        e = int(qf)
        return float(sum((p.measure ** e for p in partition.paths), Fraction(0)))
    return math.exp(log_lq_moment(partition, qf))


def log_lq_moment(partition: ScalePartition, q) -> float:
    if not partition.paths:
        return float("-inf")
    logs = np.array([_log_fraction(p.measure) for p in partition.paths])
    return _logsumexp(float(q) * logs)


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class SpectrumCurve:
    q: np.ndarray
    tau: np.ndarray
    method: str
    error: Optional[np.ndarray] = None
    label: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        if self.q.shape != self.tau.shape:
            raise ValueError("q and tau must have the same shape")
        if np.any(np.diff(self.q) <= 0):
            raise ValueError("q grid must be strictly increasing")

    def at(self, q: float) -> float:
        idx = np.flatnonzero(np.isclose(self.q, q, rtol=0, atol=1e-12))
        if not len(idx):
            raise KeyError(f"q = {q} not on the grid")
        return float(self.tau[idx[0]])

    def slopes(self) -> np.ndarray:
        return np.diff(self.tau) / np.diff(self.q)

    def slack(self) -> float:
        return CLOSED_FORM_SLACK if self.method in (CLOSED_FORM, PRESSURE_ROOT) else MOMENT_SLACK

    def concavity_defect(self) -> float:
        """Largest positive second difference, scaled by the local grid step."""
        s = self.slopes()
        if len(s) < 2:
            return 0.0
        h = np.minimum(np.diff(self.q)[:-1], np.diff(self.q)[1:])
        return float(max(0.0, np.max(np.diff(s) * h)))

    def concavity_excess(self) -> float:
        """Concavity defect beyond what the error bars can produce.

        Perturbing tau by e moves a scaled second difference by at most
        e[j-1] + 2 e[j] + e[j+1].
        """
        s = self.slopes()
        if len(s) < 2:
            return 0.0
        h = np.minimum(np.diff(self.q)[:-1], np.diff(self.q)[1:])
        d = np.diff(s) * h
        if self.error is not None:
            e = np.asarray(self.error, float)
            d = d - (e[:-2] + 2 * e[1:-1] + e[2:])
        return float(max(0.0, np.max(d)))

    def monotonicity_defect(self) -> float:
        d = np.diff(self.tau)
        return float(max(0.0, -np.min(d))) if len(d) else 0.0

    def is_concave(self, slack: Optional[float] = None) -> bool:
        return self.concavity_excess() <= (self.slack() if slack is None else slack)

    def is_monotone(self, slack: Optional[float] = None) -> bool:
        return self.monotonicity_defect() <= (self.slack() if slack is None else slack)


@dataclass(frozen=True)
class ConjugateCurve:
    alpha: np.ndarray
    values: tuple  # floats or NEG_INF
    source: str = ""
    domain: Optional[tuple] = None  # (lo, hi) of the finite part

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != len(self.alpha):
            raise ValueError("one value per alpha is required")

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def finite_mask(self) -> np.ndarray:
        return np.array([v is not NEG_INF for v in self.values])

    def value_at(self, alpha: float):
        idx = np.flatnonzero(np.isclose(self.alpha, alpha, rtol=0, atol=1e-12))
        if not len(idx):
            raise KeyError(f"alpha = {alpha} not on the grid")
        return self.values[idx[0]]


# ---------------------------------------------------------------------------
# pressure equation for scalar classes


def _pressure_data(g: TransitionGraph, lc: LoopClassReport):
    verts = list(lc.vertices)
    pos = {v: i for i, v in enumerate(verts)}
    data = []
    for k in lc.edges:
        e = g.edges[k]
        if len(e.matrix) != 1 or len(e.matrix[0]) != 1:
            raise ValueError("pressure equation needs 1x1 matrices")
        data.append((pos[e.source], pos[e.target], _log_fraction(e.matrix[0][0]), e.log_weight))
    return len(verts), data


def _log_spectral_radius(n, data, q, s) -> float:
    M = np.full((n, n), -np.inf)
    for i, j, lt, lw in data:
        M[i, j] = np.logaddexp(M[i, j], q * lt - s * lw)
    m = np.max(M[np.isfinite(M)])
    A = np.where(np.isfinite(M), np.exp(M - m), 0.0)
    if n == 1:
        return m + math.log(A[0, 0])
    r = float(np.max(np.abs(np.linalg.eigvals(A))))
    return m + math.log(r)


def pressure_root(g: TransitionGraph, lc: LoopClassReport, q_grid, tol: float = 1e-12) -> SpectrumCurve:
    """tau(q) = s solving spectralRadius(sum T(e)^q W(e)^-s) = 1, by bisection."""
    n, data = _pressure_data(g, lc)
    taus = []
    for q in np.asarray(q_grid, dtype=float):
        def h(s):
            return _log_spectral_radius(n, data, q, s)

        lo, hi = -1.0, 1.0
        while h(lo) > 0:
            lo *= 2
            if lo < -1e6:
                raise BisectionFailure(f"no sign change below s = {lo} at q = {q}", bracket=(lo, hi))
        while h(hi) < 0:
            hi *= 2
            if hi > 1e6:
                raise BisectionFailure(f"no sign change above s = {hi} at q = {q}", bracket=(lo, hi))
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if h(mid) < 0:
                lo = mid
            else:
                hi = mid
        taus.append(0.5 * (lo + hi))
    return SpectrumCurve(np.asarray(q_grid, float), np.array(taus), PRESSURE_ROOT,
                         error=np.full(len(taus), tol), label=f"class {lc.id}")


# ---------------------------------------------------------------------------
# moment sums over scale partitions


@dataclass
class MomentTable:
    q: np.ndarray
    log_t: np.ndarray
    log_moments: np.ndarray  # (thresholds, q)
    counts: np.ndarray
    truncated: bool


def _float_matrices(g: TransitionGraph):
    return [np.array([[float(c) for c in row] for row in e.matrix]) for e in g.edges]


def _frontier_moments(logS: np.ndarray, logC: np.ndarray, q: np.ndarray, threads: int) -> np.ndarray:
    def chunk(qs):
        return [_logsumexp(qq * logS + logC) for qq in qs]

    if threads <= 1 or len(q) < 2 * threads:
        return np.array(chunk(q))
    parts = np.array_split(q, threads)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        res = list(ex.map(chunk, parts))
    return np.concatenate([np.asarray(r) for r in res])


def moment_table(
    g: TransitionGraph,
    q_grid,
    lc: Optional[LoopClassReport] = None,
    zeta: Optional[Sequence[int]] = None,
    path_cap: int = DEFAULT_PATH_CAP,
    max_thresholds: int = 200,
    threads: Optional[int] = None,
) -> MomentTable:
    """log A_q(t_k) for t_k = rho^k, rho the largest edge weight in use.

    Paths are kept in per-vertex numpy arrays (log W, log ||T||, normalized
    row vector, log multiplicity); the partition at t_{k+1} is obtained from
    the one at t_k by expanding the members with W > t_{k+1}.  Paths that
    agree in all three quantities behave identically from then on and are
    merged into one entry with a multiplicity.  Stops before the number of
    entries exceeds ``path_cap``.
    """
    q = np.asarray(q_grid, dtype=float)
    threads = thread_count() if threads is None else threads
    mats = _float_matrices(g)
    if lc is None:
        allowed = None
        start = make_path(g, ())
        out_edges = g.out_edges
    else:
        allowed = set(lc.edges)
        if zeta is None:
            zeta = shortest_rooted_path(g, lc.vertices)
        start = make_path(g, tuple(zeta))
        out_edges = [[k for k in ks if k in allowed] for ks in g.out_edges]
    used = lc.edges if lc is not None else range(len(g.edges))
    log_rho = max(g.edges[k].log_weight for k in used)
    x0 = np.array([float(c) for c in start.vector])
    s0 = float(np.sum(x0))
    # frontier: vertex -> (logW, logS, X, logC)
    frontier = {start.end: (np.array([start.weight.log() if len(start) else 0.0]),
                            np.array([_log_fraction(start.measure) if len(start) else 0.0]),
                            (x0 / s0)[None, :], np.zeros(1))}
    # start below W(start): the empty path, or zeta, is never a member
    log_w0 = start.weight.log() if len(start) else 0.0
    k = 1
    while k * log_rho >= log_w0 - _LOG_EPS:
        k += 1
    first_expand = True
    log_ts, logA, counts = [], [], []
    truncated = False
    while len(log_ts) < max_thresholds:
        lt = k * log_rho
        k += 1
        nxt = _refine(frontier, lt, out_edges, g, mats, first_expand, path_cap)
        if nxt is None:
            truncated = True
            break
        first_expand = False
        frontier = nxt
        total = sum(len(v[0]) for v in frontier.values())
        if total == 0:
            break
        logS = np.concatenate([v[1] for v in frontier.values()])
        logC = np.concatenate([v[3] for v in frontier.values()])
        log_ts.append(lt)
        logA.append(_frontier_moments(logS, logC, q, threads))
        counts.append(total)
    if not log_ts:
        raise PathExplosion("no complete scale partition within the path cap", count=path_cap)
    return MomentTable(q, np.array(log_ts), np.vstack(logA), np.array(counts), truncated)


def _merge(lw, ls, X, lc):
    n = len(lw)
    if n < 2:
        return lw, ls, X, lc
    key = np.round(np.column_stack([lw, ls, X]) * 1e9).astype(np.int64)
    # lexsort is stable, so order[new] picks the first occurrence of each row
    order = np.lexsort(key.T[::-1])
    ks = key[order]
    new = np.ones(n, dtype=bool)
    new[1:] = np.any(ks[1:] != ks[:-1], axis=1)
    if new.all():
        return lw, ls, X, lc
    first = order[new]
    inv = np.empty(n, dtype=np.int64)
    inv[order] = np.cumsum(new) - 1
    out = np.full(len(first), -np.inf)
    np.logaddexp.at(out, inv, lc)
    return lw[first], ls[first], X[first], out


def _refine(frontier, lt, out_edges, g, mats, force, path_cap):
    cur = frontier
    forced = force
    while True:
        changed = False
        groups = defaultdict(list)
        for v, (lw, ls, X, lc) in cur.items():
            if forced:
                mask = np.ones(len(lw), dtype=bool)
            else:
                mask = lw > lt + _LOG_EPS
            keep = ~mask
            if keep.any():
                groups[v].append((lw[keep], ls[keep], X[keep], lc[keep]))
            if not mask.any():
                continue
            changed = True
            lwm, lsm, Xm, lcm = lw[mask], ls[mask], X[mask], lc[mask]
            for k in out_edges[v]:
                e = g.edges[k]
                Y = Xm @ mats[k]
                s = Y.sum(axis=1)
                groups[e.target].append((lwm + e.log_weight, lsm + np.log(s), Y / s[:, None], lcm))
        cur = {}
        for v, parts in sorted(groups.items()):
            cur[v] = _merge(*(np.concatenate([p[i] for p in parts]) if i != 2
                              else np.vstack([p[2] for p in parts]) for i in range(4)))
        if sum(len(c[0]) for c in cur.values()) > path_cap:
            return None
        forced = False
        if not changed:
            return cur


@dataclass
class SlopeFit:
    estimate: np.ndarray  # log-corrected fit over the tail
    least_squares: np.ndarray
    last_ratio: np.ndarray
    error: np.ndarray
    fekete: np.ndarray
    successive: np.ndarray  # (thresholds - 1, q)


def _tail_fit(L, A, lo, with_log=True):
    n = len(L) - lo
    cols = [L[lo:], np.ones(n)]
    if with_log:
        cols.insert(1, np.log(-L[lo:]))
    X = np.column_stack(cols)
    sol, *_ = np.linalg.lstsq(X, A[lo:], rcond=None)
    return sol[0]


def _geometric_tail(succ: np.ndarray, max_ratio: float = 0.8, n_ratios: int = 4) -> np.ndarray:
    """Remaining distance bound for successive slopes that converge geometrically.

    Uses the last ``n_ratios + 1`` differences; inf where they do not shrink
    by a steady factor below ``max_ratio``.
    """
    out = np.full(succ.shape[1], np.inf)
    if len(succ) < n_ratios + 2:
        return out
    d = np.diff(succ[-(n_ratios + 2):], axis=0)
    tiny = np.max(np.abs(d), axis=0) < 1e-13
    with np.errstate(divide="ignore", invalid="ignore"):
        r = d[1:] / d[:-1]
        rmax = np.max(np.abs(r), axis=0)
        steady = np.all(r > 0, axis=0) & (rmax < max_ratio) & (np.ptp(r, axis=0) < 0.25)
        bound = 2 * np.abs(d[-1]) * rmax / (1 - np.minimum(rmax, max_ratio))
    out = np.where(steady, np.maximum(bound, 1e-12), out)
    out[tiny] = 1e-12
    return out


def _windowed_fit(L, A):
    """Fit from the first fifth on, with the spread over window starts up to
    the middle and the spread over starts up to five points before the end."""
    K = len(L)
    first = K // 5
    est = _tail_fit(L, A, first)
    fits = np.vstack([_tail_fit(L, A, lo) for lo in range(first, K - 4)])
    half = max(1, K // 2 + 1 - first)
    return (est, np.maximum(np.ptp(fits[:half], axis=0), 1e-12),
            np.maximum(np.ptp(fits, axis=0), 1e-12))


def fit_slopes(table: MomentTable, min_points: int = 6) -> SlopeFit:
    """Slope of log A_q(t) against log t.

    The estimate fits log A = tau log t + b log|log t| + c over the last
    four fifths of the schedule; the log term absorbs polynomial prefactors
    coming from non-diagonalizable cycle matrices.  The error bar is the
    spread of the same fit over windows starting anywhere from there to
    the middle of the schedule.  Refinements are screened against the wider
    spread over windows reaching five points before the end, which catches
    slow drift but overstates bounded oscillation.  The same is done along
    every second and third threshold, which removes period-2 or period-3
    wobble, and where
    successive slopes settle geometrically the last one is used with its
    tail bound.  Per q, the candidate with the smallest error bar wins among
    those that agree with the plain fit within both error bars.
    """
    L, A = table.log_t, table.log_moments
    K = len(L)
    if K < min_points:
        raise PathExplosion(f"only {K} scale partitions fit under the path cap",
                            count=int(table.counts[-1]))
    est, err, gate = _windowed_fit(L, A)
    base, base_gate = est, gate
    ls = _tail_fit(L, A, K // 2, with_log=False)
    succ = np.diff(A, axis=0) / np.diff(L)[:, None]
    for period in (1, 2, 3):
        idx = np.arange(K - 1, -1, -period)[::-1]
        if len(idx) < 6:
            break
        Lp, Ap = L[idx], A[idx]
        cands = []
        if period > 1 and len(idx) >= 10:
            cands.append(_windowed_fit(Lp, Ap))
        sub = np.diff(Ap, axis=0) / np.diff(Lp)[:, None]
        tail = _geometric_tail(sub)
        cands.append((sub[-1], tail, tail))
        for e, r, rg in cands:
            # only accept refinements consistent with the plain fit
            use = (rg < gate) & (np.abs(e - base) <= base_gate + rg)
            est = np.where(use, e, est)
            err = np.where(use, r, err)
            gate = np.where(use, rg, gate)
    ratios = A / L[:, None]
    # one-sided bounds from sub/super-multiplicativity, constant taken as 1
    fek = np.where(table.q >= 0, ratios.max(axis=0), ratios.min(axis=0))
    return SlopeFit(est, ls, succ[-1], err, fek, succ)


def concave_projection(q, tau) -> np.ndarray:
    """Make the chord slopes non-increasing by weighted isotonic regression.

    With weights equal to the q-steps, every pooled block is replaced by the
    chord between its end points, so values at block ends are unchanged.
    """
    q = np.asarray(q, float)
    tau = np.asarray(tau, float)
    if len(q) < 3:
        return tau.copy()
    h = np.diff(q)
    s = isotonic_regression(np.diff(tau) / h, weights=h, increasing=False).x
    return tau[0] + np.concatenate([[0.0], np.cumsum(s * h)])


@dataclass
class CycleBound:
    q: np.ndarray
    bound: np.ndarray
    alphas: list  # (alpha, cycle) pairs, sorted by alpha


def cycle_bound(g: TransitionGraph, lc: LoopClassReport, q_grid, max_len: int = 4,
                max_cycles: int = 20_000) -> CycleBound:
    """Upper bound tau_L(q) <= q * alpha(theta) over short cycles theta in the class.

    alpha(theta) = log sr(T(theta)) / log W(theta).  The bound holds for every
    q because zeta theta^n is a single member of the restricted partitions.
    """
    q = np.asarray(q_grid, float)
    cs = set(lc.vertices)
    mats = {k: np.array([[float(c) for c in row] for row in g.edges[k].matrix]) for k in lc.edges}
    out_in = {v: [k for k in g.out_edges[v] if g.edges[k].target in cs] for v in lc.vertices}
    found = []
    order = {v: i for i, v in enumerate(lc.vertices)}
    for v0 in lc.vertices:
        # cycles whose smallest vertex is v0, so each rotation class is seen once
        stack = [(v0, (), None, 0.0)]
        while stack and len(found) < max_cycles:
            v, path, P, lw = stack.pop()
            for k in out_in[v]:
                e = g.edges[k]
                w = e.target
                if order[w] < order[v0]:
                    continue
                P2 = mats[k] if P is None else P @ mats[k]
                lw2 = lw + e.log_weight
                if w == v0:
                    r = float(np.max(np.abs(np.linalg.eigvals(P2))))
                    if r > 0:
                        found.append((math.log(r) / lw2, path + (k,)))
                if len(path) + 1 < max_len:
                    stack.append((w, path + (k,), P2, lw2))
    found.sort()
    if not found:
        return CycleBound(q, np.full(len(q), np.inf), [])
    lo, hi = found[0][0], found[-1][0]
    bound = np.where(q >= 0, q * lo, q * hi)
    return CycleBound(q, bound, found)


def moment_slope(
    g: TransitionGraph,
    lc: Optional[LoopClassReport],
    q_grid,
    path_cap: int = DEFAULT_PATH_CAP,
    zeta=None,
    max_thresholds: int = 200,
    threads: Optional[int] = None,
    cycle_len: int = 4,
) -> SpectrumCurve:
    """Moment-slope estimate; ``lc = None`` gives the full-graph spectrum of mu.

    The fitted values are projected onto concave sequences, then class
    estimates are capped by :func:`cycle_bound` (``cycle_len = 0`` disables
    this).  Both steps keep the curve concave.
    """
    table = moment_table(g, q_grid, lc, zeta, path_cap, max_thresholds, threads)
    fit = fit_slopes(table)
    tau = concave_projection(table.q, fit.estimate)
    error = np.maximum(fit.error, np.abs(tau - fit.estimate))
    extras = {"raw_estimate": fit.estimate, "least_squares": fit.least_squares,
              "last_ratio": fit.last_ratio, "fekete": fit.fekete,
              "thresholds": len(table.log_t), "paths": int(table.counts[-1]),
              "truncated": table.truncated,
              "concave_adjustment": float(np.max(np.abs(tau - fit.estimate)))}
    if lc is not None and cycle_len:
        cb = cycle_bound(g, lc, table.q, cycle_len)
        tau = np.minimum(tau, cb.bound)
        extras["cycle_bound"] = cb.bound
        extras["clipped"] = fit.estimate > cb.bound
        if cb.alphas:
            extras["cycle_alpha_range"] = (cb.alphas[0][0], cb.alphas[-1][0])
    return SpectrumCurve(table.q, tau, MOMENT_SLOPE, error=error,
                         label="graph" if lc is None else f"class {lc.id}", extras=extras)


def loop_lq_spectrum(
    g: TransitionGraph,
    lc: LoopClassReport,
    q_grid=None,
    method: Optional[str] = None,
    path_cap: int = DEFAULT_PATH_CAP,
    zeta=None,
    threads: Optional[int] = None,
    max_thresholds: int = 200,
) -> SpectrumCurve:
    """tau of a loop class: pressure root when every matrix is 1x1, else moment slope."""
    q_grid = default_q_grid() if q_grid is None else np.asarray(q_grid, float)
    if method is None:
        method = PRESSURE_ROOT if lc.scalar else MOMENT_SLOPE
    if method == PRESSURE_ROOT:
        return pressure_root(g, lc, q_grid)
    if method == MOMENT_SLOPE:
        return moment_slope(g, lc, q_grid, path_cap, zeta, max_thresholds, threads)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# min assembly and crossings


@dataclass
class PhaseTransition:
    q_lo: float
    q_hi: float
    q_cross: float
    left: tuple  # classes attaining the min just below
    right: tuple
    alpha_interval: tuple  # (alpha_2, alpha_1)

    def to_dict(self) -> dict:
        return {
            "q_interval": [_fmt(self.q_lo), _fmt(self.q_hi)],
            "q_cross": _fmt(self.q_cross),
            "classes_below": list(self.left),
            "classes_above": list(self.right),
            "alpha_interval": [_fmt(a) for a in self.alpha_interval],
        }


@dataclass
class AssembledTau:
    curve: SpectrumCurve
    argmin: list  # per q, tuple of class ids within tolerance of the min
    certified: np.ndarray  # per q
    crossings: list


def _tie_tol(curves, i):
    errs = [0.0 if c.error is None else float(c.error[i]) for c in curves.values()]
    return max(1e-9, max(errs))


def assemble_tau_mu(curves: dict, decomposable: bool = True) -> AssembledTau:
    """Pointwise min over the class curves; q < 0 is certified only when decomposable."""
    ids = sorted(curves)
    if not ids:
        raise ValueError("no loop-class curves to assemble")
    q = curves[ids[0]].q
    for i in ids:
        if not np.array_equal(curves[i].q, q):
            raise ValueError("all curves must share the q grid")
    stack = np.vstack([curves[i].tau for i in ids])
    tau = stack.min(axis=0)
    argmin = []
    for j in range(len(q)):
        tol = _tie_tol(curves, j)
        argmin.append(tuple(ids[r] for r in range(len(ids)) if stack[r, j] - tau[j] <= tol))
    crossings = []
    # grid points where several classes tie are skipped over, so a switch
    # landing exactly on a grid point is still seen
    r = 0
    for k in range(1, len(q)):
        a, b = argmin[r], argmin[k]
        if set(a) & set(b):
            if not set(b) > set(a):
                r = k
            continue
        A, B = a[0], b[0]
        ta, tb = curves[A].tau, curves[B].tau
        d0, d1 = ta[r] - tb[r], ta[k] - tb[k]
        dq = q[k] - q[r]
        q0 = q[r] + dq * d0 / (d0 - d1) if d0 != d1 else 0.5 * (q[r] + q[k])
        sa = (ta[k] - ta[r]) / dq
        sb = (tb[k] - tb[r]) / dq
        crossings.append(PhaseTransition(float(q[r]), float(q[k]), float(q0), a, b,
                                         (float(min(sa, sb)), float(max(sa, sb)))))
        r = k
    certified = np.where(q >= 0, True, bool(decomposable))
    methods = {curves[i].method for i in ids}
    method = methods.pop() if len(methods) == 1 else MOMENT_SLOPE
    err = np.array([max(0.0 if curves[i].error is None else float(curves[i].error[j]) for i in argmin[j])
                    for j in range(len(q))])
    curve = SpectrumCurve(q, tau, method, error=err, label="tau_mu")
    return AssembledTau(curve, argmin, certified, crossings)


# ---------------------------------------------------------------------------
# conjugates


def default_alpha_grid(curves: Sequence[SpectrumCurve], step: float = 1e-3, max_points: int = 20001) -> np.ndarray:
    """Uniform grid over the joint slope range with a margin, plus every chord slope."""
    slopes = np.concatenate([c.slopes() for c in curves])
    lo, hi = float(slopes.min()), float(slopes.max())
    margin = 0.05 * (hi - lo) + 0.02
    a, b = lo - margin, hi + margin
    n = min(max_points, int(math.ceil((b - a) / step)) + 1)
    grid = np.linspace(a, b, n)
    pts = np.unique(np.concatenate([grid, slopes]))
    # drop points that only differ by rounding from their left neighbour
    keep = np.concatenate([[True], np.diff(pts) > 1e-9 * np.maximum(1.0, np.abs(pts[1:]))])
    return pts[keep]


def concave_conjugate(curve: SpectrumCurve, alpha_grid=None, slack: Optional[float] = None,
                      domain: Optional[tuple] = None) -> ConjugateCurve:
    """f*(alpha) = min over the grid of alpha*q - tau(q); NEG_INF off the chord-slope range.

    Raises NonConcaveInput when tau fails concavity by more than ``slack``
    beyond its error bars.
    """
    slack = curve.slack() if slack is None else slack
    defect = curve.concavity_excess()
    if defect > slack:
        raise NonConcaveInput(f"{curve.label or 'curve'} violates concavity by {defect:.3g} (slack {slack:.3g})")
    alpha = default_alpha_grid([curve]) if alpha_grid is None else np.asarray(alpha_grid, float)
    if domain is None:
        s = curve.slopes()
        if len(s) == 0:
            raise ValueError("need at least two grid points")
        lo, hi = float(s.min()), float(s.max())
        pad = 1e-12 * max(1.0, abs(lo), abs(hi))
        domain = (lo - pad, hi + pad)
    lo, hi = domain
    vals = (alpha[:, None] * curve.q[None, :] - curve.tau[None, :]).min(axis=1)
    out = tuple(float(v) if lo <= a <= hi else NEG_INF for a, v in zip(alpha, vals))
    return ConjugateCurve(alpha, out, curve.label, (lo, hi))


def conjugate_back(conj: ConjugateCurve, q_grid) -> SpectrumCurve:
    """inf over the finite alpha of alpha*q - f(alpha), i.e. the second conjugate."""
    mask = conj.finite_mask()
    if not mask.any():
        raise ValueError("conjugate is -inf everywhere")
    a = conj.alpha[mask]
    f = conj.as_array()[mask]
    q = np.asarray(q_grid, float)
    tau = (q[:, None] * a[None, :] - f[None, :]).min(axis=1)
    return SpectrumCurve(q, tau, CLOSED_FORM, label=f"{conj.source}**")


def assemble_f_mu(conjugates: dict, classes: Sequence[LoopClassReport]) -> tuple:
    """Pointwise max of included class conjugates; returns (curve, included, excluded).

    When no class has its hypotheses established every class is included and
    all of them are also reported as excluded, so the verdict stays advisory.
    """
    included, excluded = [], []
    for lc in classes:
        if lc.irreducible == PROVEN and lc.degenerate == NOT_DEGENERATE:
            included.append(lc.id)
        else:
            excluded.append(lc.id)
    if not included:
        included = list(excluded)
    alpha = conjugates[included[0]].alpha
    vals = []
    for j in range(len(alpha)):
        best = NEG_INF
        for i in included:
            v = conjugates[i].values[j]
            if v is not NEG_INF and (best is NEG_INF or v > best):
                best = v
        vals.append(best)
    return ConjugateCurve(alpha, vals, "f_mu"), included, excluded


def is_concave_on_grid(conj: ConjugateCurve, tol: float = 1e-6) -> bool:
    """Finite part contiguous and never below the chord of its neighbours by more than ``tol``."""
    mask = conj.finite_mask()
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return True
    if idx[-1] - idx[0] + 1 != len(idx):
        return False
    a = conj.alpha[idx]
    f = conj.as_array()[idx]
    if len(a) < 3:
        return True
    w = (a[1:-1] - a[:-2]) / (a[2:] - a[:-2])
    chord = f[:-2] + w * (f[2:] - f[:-2])
    return bool(np.all(f[1:-1] >= chord - tol))


# ---------------------------------------------------------------------------
# alpha range


@dataclass
class AlphaRange:
    alpha_min: float
    alpha_max: float
    min_bracket: tuple
    max_bracket: tuple

    @property
    def widths(self) -> tuple:
        return (self.min_bracket[1] - self.min_bracket[0], self.max_bracket[1] - self.max_bracket[0])

    def to_dict(self) -> dict:
        return {
            "alpha_min": _fmt(self.alpha_min),
            "alpha_max": _fmt(self.alpha_max),
            "alpha_min_bracket": [_fmt(x) for x in self.min_bracket],
            "alpha_max_bracket": [_fmt(x) for x in self.max_bracket],
        }


def alpha_range(curve: SpectrumCurve, q_big: float = Q_BIG) -> AlphaRange:
    """End chord slopes as estimates, bracketed by tau(+-q_big)/(+-q_big).

    For a concave tau with nonnegative conjugate at the end points,
    tau(q)/q <= alpha_min <= last chord slope and first chord slope <=
    alpha_max <= tau(-q)/(-q).
    """
    q = curve.q
    if q[-1] < q_big - 1e-12 or q[0] > -q_big + 1e-12:
        raise GridTooNarrow(f"q grid must reach +-{q_big}")
    s = curve.slopes()
    hi_q = np.flatnonzero(q >= q_big - 1e-12)[0]
    lo_q = np.flatnonzero(q <= -q_big + 1e-12)[-1]
    tmin = float(curve.tau[hi_q] / q[hi_q])
    tmax = float(curve.tau[lo_q] / q[lo_q])
    a_min, a_max = float(s[-1]), float(s[0])
    return AlphaRange(a_min, a_max, (min(tmin, a_min), max(tmin, a_min)), (min(tmax, a_max), max(tmax, a_max)))


# ---------------------------------------------------------------------------
# verdict


@dataclass
class Verdict:
    holds: bool
    alpha: np.ndarray
    holds_at: np.ndarray
    failing_intervals: list
    f_mu_concave: bool
    loc_dim_interval: Optional[bool]
    isolated_points: list
    gaps: list
    certified: bool
    caveats: list
    included: list
    excluded: list
    tau_mu_star: ConjugateCurve
    f_mu: ConjugateCurve
    resolved: tuple

    def to_dict(self) -> dict:
        return {
            "formalism_holds": self.holds,
            "certified": self.certified,
            "failing_alpha_intervals": [[_fmt(a), _fmt(b)] for a, b in self.failing_intervals],
            "f_mu_concave": self.f_mu_concave,
            "local_dimension_set_is_interval": self.loc_dim_interval,
            "isolated_points": [_fmt(a) for a in self.isolated_points],
            "gaps": [[_fmt(a), _fmt(b)] for a, b in self.gaps],
            "resolved_alpha_range": [_fmt(a) for a in self.resolved],
            "included_classes": list(self.included),
            "excluded_classes": list(self.excluded),
            "caveats": list(self.caveats),
        }


def _runs(alpha, bad):
    out = []
    j = 0
    n = len(alpha)
    while j < n:
        if bad[j]:
            k = j
            while k + 1 < n and bad[k + 1]:
                k += 1
            out.append((float(alpha[j]), float(alpha[k])))
            j = k + 1
        else:
            j += 1
    return out


def _components(intervals, tol):
    """Merge intervals closer than ``tol``; returns sorted (lo, hi, members)."""
    items = sorted(intervals, key=lambda t: t[0])
    comps = []
    for lo, hi, i in items:
        if comps and lo <= comps[-1][1] + tol:
            c = comps[-1]
            comps[-1] = (c[0], max(c[1], hi), c[2] + [i])
        else:
            comps.append((lo, hi, [i]))
    return comps


def formalism_verdict(
    curves: dict,
    classes: Sequence[LoopClassReport],
    decomposable: bool,
    alpha_grid=None,
    q_big: float = Q_BIG,
    value_tol: float = VALUE_TOL,
    alpha_tol: float = ALPHA_TOL,
):
    """Compare f_mu with tau_mu* on an alpha grid.

    Inside the chord-slope range of tau_mu the two discrete conjugates are
    compared directly.  Outside it the grid cannot resolve tau_mu*, so only
    the shape of the local-dimension set is used: the (bracketed) alpha
    ranges of the included classes must join up, and a separate component
    (typically an isolated point spectrum) is a failure.
    Returns ``(Verdict, AssembledTau, conjugates)``.
    """
    assembled = assemble_tau_mu(curves, decomposable)
    tau_mu = assembled.curve
    all_curves = list(curves.values()) + [tau_mu]
    alpha = default_alpha_grid(all_curves) if alpha_grid is None else np.asarray(alpha_grid, float)
    conj = {i: concave_conjugate(c, alpha) for i, c in curves.items()}
    f_mu, included, excluded = assemble_f_mu(conj, classes)
    tms = concave_conjugate(tau_mu, alpha, slack=max(c.slack() for c in curves.values()))
    lo_r, hi_r = tms.domain
    # the uncertainty of a discrete conjugate at alpha is that of tau at the
    # attaining grid point
    arg_mu = np.argmin(alpha[:, None] * tau_mu.q[None, :] - tau_mu.tau[None, :], axis=1)
    err_mu = np.zeros(len(tau_mu.q)) if tau_mu.error is None else tau_mu.error
    cls_err = {}
    for i in included:
        c = curves[i]
        arg = np.argmin(alpha[:, None] * c.q[None, :] - c.tau[None, :], axis=1)
        cls_err[i] = np.zeros(len(alpha)) if c.error is None else c.error[arg]
    holds_at = np.ones(len(alpha), dtype=bool)
    for j in range(len(alpha)):
        t, f = tms.values[j], f_mu.values[j]
        if t is NEG_INF:
            continue
        if f is NEG_INF:
            holds_at[j] = False
            continue
        best = max((i for i in included if conj[i].values[j] is not NEG_INF),
                   key=lambda i: conj[i].values[j])
        tol = value_tol * max(1.0, abs(t)) + float(err_mu[arg_mu[j]]) + float(cls_err[best][j])
        if t - f > tol:
            holds_at[j] = False
    # local-dimension set beyond the resolved range
    ranges = {i: alpha_range(curves[i], q_big) for i in included}
    outer = [(ranges[i].min_bracket[0], ranges[i].max_bracket[1], i) for i in included]
    comps = _components(outer, alpha_tol)
    gaps = [(comps[k][1], comps[k + 1][0]) for k in range(len(comps) - 1)]
    isolated = []
    for lo, hi, members in comps:
        if len(comps) > 1 and hi - lo <= alpha_tol:
            isolated.append(0.5 * (lo + hi))
    for a, b in gaps:
        holds_at &= ~((alpha > a) & (alpha < b))
    failing = _runs(alpha, ~holds_at)
    nonessential = [lc for lc in classes if not lc.essential]
    loc_interval = len(comps) == 1 if all(lc.simple for lc in nonessential) else None
    caveats = []
    if excluded == included:
        caveats.append("no class has its hypotheses established: f_mu uses every class")
    elif excluded:
        caveats.append(f"classes {excluded} excluded from f_mu: hypotheses not established")
    if not decomposable:
        caveats.append("decomposability unknown: tau_mu for q < 0 is advisory")
    ess = [lc.id for lc in classes if lc.essential]
    if len(ess) > 1:
        base = curves[ess[0]]
        for i in ess[1:]:
            c = curves[i]
            tol = 1e-6 + (0 if base.error is None else base.error) + (0 if c.error is None else c.error)
            if np.any(np.abs(base.tau - c.tau) > tol):
                caveats.append(f"essential classes {ess[0]} and {i} disagree beyond their error bars")
    certified = decomposable and not excluded
    v = Verdict(
        holds=bool(holds_at.all()),
        alpha=alpha,
        holds_at=holds_at,
        failing_intervals=failing,
        f_mu_concave=is_concave_on_grid(f_mu),
        loc_dim_interval=loc_interval,
        isolated_points=isolated,
        gaps=gaps,
        certified=certified,
        caveats=caveats,
        included=included,
        excluded=excluded,
        tau_mu_star=tms,
        f_mu=f_mu,
        resolved=(lo_r, hi_r),
    )
    return v, assembled, conj


# ---------------------------------------------------------------------------
# local dimensions along a path


@dataclass
class LocalDimensionSequence:
    log_measure: np.ndarray  # log ||T(gamma|n)|| for n = 1..N
    log_weight: np.ndarray

    @property
    def running(self) -> np.ndarray:
        return self.log_measure / self.log_weight

    def differenced(self, period: int) -> np.ndarray:
        """Ratios of increments over ``period`` steps; entry n-1 uses gamma|n and gamma|(n-period)."""
        lm = np.concatenate([[0.0], self.log_measure])
        lw = np.concatenate([[0.0], self.log_weight])
        n = len(self.log_measure)
        out = np.full(n, np.nan)
        for k in range(period, n + 1):
            out[k - 1] = (lm[k] - lm[k - period]) / (lw[k] - lw[k - period])
        return out


def path_local_dimension(g: TransitionGraph, path) -> LocalDimensionSequence:
    """log rho(gamma|n) / log W(gamma|n) for each prefix of a rooted path."""
    edges = path.edges if isinstance(path, PathRef) else tuple(path)
    if not edges:
        raise ValueError("path must be nonempty")
    p = make_path(g, ())
    lm, lw = [], []
    acc_w = 0.0
    for k in edges:
        p = extend_path(g, p, k)
        acc_w += g.edges[k].log_weight
        lm.append(_log_fraction(p.measure))
        lw.append(acc_w)
    return LocalDimensionSequence(np.array(lm), np.array(lw))


# ---------------------------------------------------------------------------
# CSV export


def spectra_csv(q, curves: dict, assembled: AssembledTau) -> str:
    ids = sorted(curves)
    lines = [",".join(["q"] + [f"tau_class_{i}" for i in ids] + ["tau_min", "certified_flag"])]
    for j, qq in enumerate(q):
        row = [_fmt(qq)] + [_fmt(curves[i].tau[j]) for i in ids]
        row += [_fmt(assembled.curve.tau[j]), "1" if assembled.certified[j] else "0"]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def conjugates_csv(verdict: Verdict, conj: dict) -> str:
    ids = sorted(conj)
    lines = [",".join(["alpha"] + [f"fstar_class_{i}" for i in ids] + ["f_mu", "tau_mu_star", "formalism_holds"])]
    for j, a in enumerate(verdict.alpha):
        row = [_fmt(a)] + [_fmt(conj[i].values[j]) for i in ids]
        row += [_fmt(verdict.f_mu.values[j]), _fmt(verdict.tau_mu_star.values[j]),
                "1" if verdict.holds_at[j] else "0"]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
