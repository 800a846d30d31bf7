"""Space-time pairings, strong norms, rate fits, and CSV reports.

The laboratory's reported quantities are unweighted space-time L2 inner
products over [0, T] x domain: pairings of a solution (discrete or oracle)
against a fixed dictionary of test functions, and strong norms of
differences against a reference.  Time integration uses per-slab Gauss
rules of degree >= 4; space integration uses exact load vectors on the
discrete spaces (or per-cell Gauss points for oracle callables).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .solver import EvolutionSolution
from .spaces import TensorSpace
from .timequad import TimeGrid

__all__ = [
    "TEST_DICTIONARY_1D",
    "VECTOR_TEST_DICTIONARY",
    "gauss_panels",
    "slab_gauss",
    "space_cuts",
    "restricted_load",
    "eval_matrix_1d",
    "pairing",
    "strong_norm_diff",
    "fit_rate",
    "ConvergenceReport",
    "write_csv",
]

_NODE_TOL = 1e-12

# Scalar test dictionary: name -> (spatial factor or None for 1, temporal
# factor or None for 1).  The names double as CSV quantity suffixes.
TEST_DICTIONARY_1D = {
    "1": (None, None),
    "x": (lambda x: x, None),
    "x2": (lambda x: x * x, None),
    "sinpix": (lambda x: np.sin(np.pi * x), None),
    "t": (None, lambda t: t),
}

# Vector test dictionary for the 2-D flux pair: name -> (component-1 term,
# component-2 term), each a separable (fx, fy) pair of 1-D callables or
# None for a vanishing component (scalars mean constants).
VECTOR_TEST_DICTIONARY = {
    "x0": ((lambda x: x, 1.0), None),
    "0y": (None, (1.0, lambda y: y)),
    "sinpix0": ((lambda x: np.sin(np.pi * x), 1.0), None),
    "0sinpiy": (None, (1.0, lambda y: np.sin(np.pi * y))),
    "1": ((1.0, 1.0), (1.0, 1.0)),
}


def _leggauss(npts):
    return np.polynomial.legendre.leggauss(int(npts))


def gauss_panels(cuts, npts):
    """Gauss points/weights of a composite rule over the partition ``cuts``."""
    cuts = np.asarray(cuts, dtype=float)
    gx, gw = _leggauss(npts)
    mid = 0.5 * (cuts[:-1] + cuts[1:])[:, None]
    half = 0.5 * np.diff(cuts)[:, None]
    return (mid + half * gx).ravel(), (half * gw).ravel()


def slab_gauss(grid, npts=4):
    """Per-slab Gauss nodes/weights on [0, T]: arrays of shape (M, npts)."""
    gx, gw = _leggauss(npts)
    pts = np.asarray(grid.t_points)
    mid = 0.5 * (pts[:-1] + pts[1:])[:, None]
    half = 0.5 * np.diff(pts)[:, None]
    return mid + half * gx, half * np.broadcast_to(gw, (grid.num_slabs, npts))


def space_cuts(space, lo=None, hi=None, extra=()):
    """Cell partition of a 1-D space restricted to [lo, hi]."""
    a, b = space.span
    lo = a if lo is None else max(float(lo), a)
    hi = b if hi is None else min(float(hi), b)
    if hi - lo <= _NODE_TOL:
        raise ValueError("empty restriction interval")
    cuts = np.concatenate(
        [
            np.asarray([lo, hi]),
            np.asarray(space.boundaries_within(lo, hi), dtype=float),
            np.asarray(list(extra), dtype=float),
        ]
    )
    cuts = np.unique(cuts)
    cuts = cuts[(cuts >= lo - _NODE_TOL) & (cuts <= hi + _NODE_TOL)]
    keep = [cuts[0]]
    for p in cuts[1:]:
        if p - keep[-1] > _NODE_TOL:
            keep.append(p)
    return np.asarray(keep)


def _as_spatial(fn):
    if fn is None:
        return lambda x: np.ones_like(x)
    if np.isscalar(fn):
        c = float(fn)
        return lambda x: np.full_like(x, c)
    return fn


def restricted_load(space, fn, lo=None, hi=None, npts=8):
    """Load vector  b_i = int_{lo}^{hi} fn * space_i  (exact cell splitting)."""
    fn = _as_spatial(fn)
    cuts = space_cuts(space, lo, hi)
    out = np.zeros(space.nfull)
    gx, gw = _leggauss(npts)
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        ci = space.cell_containing(mid)
        pts = mid + 0.5 * (b - a) * gx
        w = 0.5 * (b - a) * gw * np.asarray(fn(pts), dtype=float)
        basis = space.eval_cell(ci, pts)
        np.add.at(out, space.cell_full_dofs(ci), basis @ w)
    return space.P.T @ out


def eval_matrix_1d(space, xs, deriv=0):
    """Sparse (len(xs), ndof) point-evaluation matrix of a 1-D space."""
    xs = np.asarray(xs, dtype=float)
    rows, cols, vals = [], [], []
    for ix, x in enumerate(xs):
        ci = space.cell_containing(x)
        basis = space.eval_cell(ci, np.asarray([x]), deriv)[:, 0]
        dofs = space.cell_full_dofs(ci)
        rows.extend([ix] * len(dofs))
        cols.extend(dofs)
        vals.extend(basis)
    full = sp.csr_matrix((vals, (rows, cols)), shape=(len(xs), space.nfull))
    return (full @ space.P).tocsr()


def _slab_values(sol, component, r, tq):
    """r . c(t) at the slab-Gauss nodes tq (num_slabs, nt) -> same shape."""
    sl = sol.problem.component_slice(component)
    a0 = sol.coeffs[:, 0, sl] @ r
    a1 = sol.coeffs[:, 1, sl] @ r
    pts = np.asarray(sol.grid.t_points)
    tau = (tq - pts[:-1, None]) / np.diff(pts)[:, None]
    return a0[:, None] + (2.0 * tau - 1.0) * a1[:, None]


def _temporal_values(temporal, tq):
    if temporal is None:
        return np.ones_like(tq)
    return np.asarray(temporal(tq), dtype=float)


def _resolve_scalar_test(v):
    """Normalise a scalar test spec into (spatial, temporal)."""
    if isinstance(v, str):
        if v not in TEST_DICTIONARY_1D:
            raise ValueError(
                f"dictionary mismatch: {v!r} is not a scalar test function"
            )
        return TEST_DICTIONARY_1D[v]
    if isinstance(v, tuple) and len(v) == 2:
        return v
    if callable(v) or np.isscalar(v):
        return (v, None)
    raise ValueError("dictionary mismatch: unsupported test function spec")


def pairing(u, v, domain=None, component=0, *, grid=None, nt=4, nx=8, cells=64):
    """Unweighted space-time L2 pairing of ``u`` against a test function.

    ``u`` is an EvolutionSolution (exact load-vector path), or a callable
    ``u(t, xs)`` / scalar together with an explicit ``grid`` and 1-D
    ``domain`` interval (composite-Gauss oracle path).  ``v`` is a test
    dictionary name, a ``(spatial, temporal)`` pair, or a spatial callable.
    Vector dictionary names pair the flux components (1, 2) of a 2-D
    solution.  ``domain`` restricts the spatial integral.
    """
    if isinstance(u, EvolutionSolution):
        spaces = u.problem.spaces
        if isinstance(v, str) and v in VECTOR_TEST_DICTIONARY and (
            v not in TEST_DICTIONARY_1D
            or isinstance(spaces[min(1, len(spaces) - 1)], TensorSpace)
        ):
            return _pairing_vector(u, v, domain, nt)
        spatial, temporal = _resolve_scalar_test(v)
        space = spaces[component]
        if isinstance(space, TensorSpace):
            raise ValueError(
                "dictionary mismatch: scalar test on a 2-D component; "
                "use the vector test dictionary"
            )
        lo, hi = (None, None) if domain is None else domain
        r = restricted_load(space, spatial, lo, hi)
        tq, wq = slab_gauss(u.grid, nt)
        vals = _slab_values(u, component, r, tq)
        return float(np.sum(wq * _temporal_values(temporal, tq) * vals))
    # oracle/callable path (1-D)
    if grid is None or not isinstance(grid, TimeGrid):
        raise ValueError("callable pairings need an explicit TimeGrid")
    if domain is None:
        raise ValueError("callable pairings need an explicit domain interval")
    spatial, temporal = _resolve_scalar_test(v)
    spatial = _as_spatial(spatial)
    xs, ws = gauss_panels(np.linspace(domain[0], domain[1], int(cells) + 1), nx)
    wsv = ws * np.asarray(spatial(xs), dtype=float)
    fn = (lambda t, x: np.full_like(x, float(u))) if np.isscalar(u) else u
    tq, wq = slab_gauss(grid, nt)
    gt = _temporal_values(temporal, tq)
    acc = 0.0
    for m in range(tq.shape[0]):
        for q in range(tq.shape[1]):
            acc += wq[m, q] * gt[m, q] * float(
                np.dot(wsv, np.asarray(fn(tq[m, q], xs), dtype=float))
            )
    return acc


def _pairing_vector(u, name, domain, nt):
    comps = VECTOR_TEST_DICTIONARY[name]
    spaces = u.problem.spaces
    if len(spaces) < 3 or not all(
        isinstance(spaces[k], TensorSpace) for k in (1, 2)
    ):
        raise ValueError(
            "dictionary mismatch: vector tests need a 2-D flux pair"
        )
    if domain is None:
        dx = dy = (None, None)
    else:
        dx, dy = domain
    tq, wq = slab_gauss(u.grid, nt)
    acc = 0.0
    for k, term in zip((1, 2), comps):
        if term is None:
            continue
        fx, fy = term
        space = spaces[k]
        r = np.kron(
            restricted_load(space.sx, fx, dx[0], dx[1]),
            restricted_load(space.sy, fy, dy[0], dy[1]),
        )
        acc += float(np.sum(wq * _slab_values(u, k, r, tq)))
    return acc


def _evaluator_1d(obj, component, xs):
    """Return fn(t) -> values at xs for a solution/callable/constant."""
    if isinstance(obj, EvolutionSolution):
        space = obj.problem.spaces[component]
        if isinstance(space, TensorSpace):
            raise ValueError("incompatible components: expected a 1-D space")
        emat = eval_matrix_1d(space, xs)
        sl = obj.problem.component_slice(component)
        return lambda t: emat @ obj.coefficient_at(t)[sl]
    if np.isscalar(obj):
        const = np.full(len(xs), float(obj))
        return lambda t: const
    return lambda t: np.asarray(obj(t, xs), dtype=float)


def _evaluator_2d(obj, component, xs, ys):
    if isinstance(obj, EvolutionSolution):
        space = obj.problem.spaces[component]
        if not isinstance(space, TensorSpace):
            raise ValueError("incompatible components: expected a 2-D space")
        emat = sp.kron(
            eval_matrix_1d(space.sx, xs), eval_matrix_1d(space.sy, ys)
        ).tocsr()
        sl = obj.problem.component_slice(component)
        return lambda t: emat @ obj.coefficient_at(t)[sl]
    if np.isscalar(obj):
        const = np.full(len(xs) * len(ys), float(obj))
        return lambda t: const
    xg = np.repeat(xs, len(ys))
    yg = np.tile(ys, len(xs))
    return lambda t: np.asarray(obj(t, xg, yg), dtype=float)


def _union_quad_1d(u, ref, component, subdomain, nx):
    spaces = []
    for obj in (u, ref):
        if isinstance(obj, EvolutionSolution):
            spaces.append(obj.problem.spaces[component])
    lo, hi = (None, None) if subdomain is None else subdomain
    cuts = None
    for space in spaces:
        extra = () if cuts is None else cuts
        cuts = space_cuts(space, lo, hi, extra=extra)
    if cuts is None:
        raise ValueError("strong norms need at least one discrete solution")
    return gauss_panels(cuts, nx)


def strong_norm_diff(u, ref, component=0, subdomain=None, *, nt=4, nx=3):
    """Space-time L2 norm of (u - ref) on a component over a subdomain.

    ``u`` and ``ref`` are EvolutionSolutions on possibly different meshes
    (evaluated on the union-cell Gauss points of the finer partition),
    callables ``f(t, xs)`` / ``f(t, xg, yg)``, or constants.  At least one
    must be a discrete solution; its grid supplies the time rule.
    """
    sols = [o for o in (u, ref) if isinstance(o, EvolutionSolution)]
    if not sols:
        raise ValueError("strong norms need at least one discrete solution")
    grid = sols[0].grid
    space0 = sols[0].problem.spaces[component]
    for s in sols[1:]:
        other = s.problem.spaces[component]
        if isinstance(other, TensorSpace) != isinstance(space0, TensorSpace):
            raise ValueError("incompatible components: 1-D vs 2-D spaces")
    if isinstance(space0, TensorSpace):
        sx, sy = (None, None) if subdomain is None else subdomain
        xcuts = ycuts = None
        for s in sols:
            spc = s.problem.spaces[component]
            xcuts = space_cuts(
                spc.sx, *(sx or (None, None)), extra=() if xcuts is None else xcuts
            )
            ycuts = space_cuts(
                spc.sy, *(sy or (None, None)), extra=() if ycuts is None else ycuts
            )
        xs, wx = gauss_panels(xcuts, nx)
        ys, wy = gauss_panels(ycuts, nx)
        ws = np.kron(wx, wy)
        fu = _evaluator_2d(u, component, xs, ys)
        fr = _evaluator_2d(ref, component, xs, ys)
    else:
        xs, ws = _union_quad_1d(u, ref, component, subdomain, nx)
        fu = _evaluator_1d(u, component, xs)
        fr = _evaluator_1d(ref, component, xs)
    tq, wq = slab_gauss(grid, nt)
    acc = 0.0
    for m in range(tq.shape[0]):
        for q in range(tq.shape[1]):
            d = fu(tq[m, q]) - fr(tq[m, q])
            acc += wq[m, q] * float(np.dot(ws, d * d))
    return math.sqrt(max(acc, 0.0))


def fit_rate(points):
    """Least-squares slope of log(value) against log(n)."""
    pts = sorted((float(n), float(v)) for n, v in points)
    if len(pts) < 3:
        raise ValueError("rate fits need at least three points")
    ns = np.asarray([p[0] for p in pts])
    vs = np.asarray([p[1] for p in pts])
    if np.any(vs <= 0.0) or np.any(ns <= 0.0):
        raise ValueError("rate fits need positive abscissae and values")
    return float(np.polyfit(np.log(ns), np.log(vs), 1)[0])


@dataclass(frozen=True)
class ConvergenceReport:
    """Rows of (n, quantity, value) for one example family.

    Rows with n = 0 carry fitted slopes (quantity ``slope_<name>``).
    """

    example: str
    rows: tuple

    def __post_init__(self):
        rows = tuple((int(n), str(q), float(v)) for n, q, v in self.rows)
        object.__setattr__(self, "rows", rows)
        per_q = {}
        for n, q, v in rows:
            if not math.isfinite(v):
                raise ValueError(f"non-finite value for {q!r} at n = {n}")
            if n > 0:
                per_q.setdefault(q, set()).add(n)
        ns = set()
        for got in per_q.values():
            ns |= got
        for q, got in per_q.items():
            if got != ns:
                raise ValueError(f"quantity {q!r} missing for some n")

    def ns(self):
        return tuple(sorted({n for n, _, _ in self.rows if n > 0}))

    def quantities(self):
        return tuple(sorted({q for n, q, _ in self.rows if n > 0}))

    def series(self, quantity):
        out = [(n, v) for n, q, v in self.rows if q == quantity and n > 0]
        if not out:
            raise KeyError(f"no rows for quantity {quantity!r}")
        return sorted(out)

    def value(self, n, quantity):
        for rn, q, v in self.rows:
            if rn == n and q == quantity:
                return v
        raise KeyError(f"no row ({n}, {quantity!r})")

    def slope(self, quantity):
        return fit_rate(self.series(quantity))

    def write(self, path):
        write_csv(path, self.example, self.rows)


def write_csv(path, example, rows):
    """CSV with columns exactly example, n, quantity, value."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["example", "n", "quantity", "value"])
        for n, q, v in rows:
            writer.writerow([example, int(n), q, f"{float(v):.12e}"])
