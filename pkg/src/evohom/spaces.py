"""Discrete spaces on interval and tensor meshes, with Gram/load assembly.

Line spaces come in three kinds:

* :class:`NodalLineSpace` — H1-conforming Lagrange elements of degree k,
  optionally periodic or with point constraints (zero value at listed nodes);
* :class:`GaussLineSpace` — discontinuous elements of degree k collocated at
  the (k+1)-point Gauss nodes of each cell, so the unweighted mass matrix is
  exactly diagonal;
* :class:`CompositeLineSpace` — concatenation of line spaces on abutting
  subintervals (used for problems whose operator changes character at an
  interior point).

Constraints are realised by a sparse prolongation ``P`` from constrained
degrees of freedom to unconstrained nodal values; all assembled forms are
``P^T G_full P``.  Tensor-product 2-D spaces combine two line spaces with
x-major degree-of-freedom ordering, and 2-D forms with separable coefficients
assemble as Kronecker sums of 1-D weighted Grams.

Quadrature: per (union-)cell Gauss rules with at least 4 points and enough
points to integrate the polynomial integrand exactly; piecewise-constant
coefficients are split along their breakpoints, so they are integrated
exactly as well.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import Field, Separable2D
from .meshes import Mesh1D, TensorMesh2D

_NODE_TOL = 1e-10


def gauss_rule(npts):
    """Gauss–Legendre nodes/weights on the reference cell [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(int(npts))
    return 0.5 * (x + 1.0), 0.5 * w


class _LagrangeBasis:
    """Lagrange basis on [0, 1] through the given nodes."""

    def __init__(self, nodes):
        self.nodes = np.asarray(nodes, dtype=float)
        m = self.nodes.size
        vander = np.vander(self.nodes, m, increasing=True)
        self.coef = np.linalg.inv(vander)  # coef[j, l]: x^j coefficient of basis l

    @property
    def size(self):
        return self.nodes.size

    def eval(self, t, deriv=0):
        """Values (or d-th derivatives) of all basis functions: (nbasis, nt)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        m = self.nodes.size
        coef = self.coef
        for _ in range(deriv):
            coef = coef[1:] * np.arange(1, coef.shape[0])[:, None]
        if coef.shape[0] == 0:
            return np.zeros((m, t.size))
        powers = np.vander(t, coef.shape[0], increasing=True)
        return (powers @ coef).T


class LineSpace:
    """Common interface of the 1-D spaces (see module docstring)."""

    span = (0.0, 1.0)
    degree = 1
    nfull = 0  # unconstrained DOFs
    P = None  # (nfull, ndof) prolongation

    @property
    def ndof(self):
        return self.P.shape[1]

    @property
    def ncells(self):
        raise NotImplementedError

    def cell_bounds(self, ci):
        raise NotImplementedError

    def cell_full_dofs(self, ci):
        raise NotImplementedError

    def cell_containing(self, x):
        raise NotImplementedError

    def boundaries_within(self, lo, hi):
        raise NotImplementedError

    def eval_cell(self, ci, xs, deriv=0):
        """Local basis values at global points xs: (nlocal, npts)."""
        raise NotImplementedError

    def mass(self, coeff=None):
        return gram1d(self, self, coeff=coeff)


class NodalLineSpace(LineSpace):
    """H1-conforming Lagrange elements, optionally periodic or constrained."""

    def __init__(self, mesh, degree=1, periodic=False, constraints=()):
        if degree < 1:
            raise ValueError("nodal line spaces need degree >= 1")
        self.mesh = mesh if isinstance(mesh, Mesh1D) else Mesh1D(mesh)
        self.degree = int(degree)
        self.basis = _LagrangeBasis(np.linspace(0.0, 1.0, self.degree + 1))
        self.span = self.mesh.span
        k, nc = self.degree, self.mesh.ncells
        self.nfull = nc * k + 1
        self.periodic = bool(periodic)
        node_x = np.empty(self.nfull)
        for c in range(nc):
            a, b = self.mesh.cell_bounds(c)
            node_x[c * k : (c + 1) * k + 1] = a + (b - a) * np.linspace(0, 1, k + 1)
        self.node_positions = node_x

        if periodic and constraints:
            raise ValueError("periodic spaces take no extra point constraints")
        if periodic:
            data = np.ones(self.nfull)
            rows = np.arange(self.nfull)
            cols = np.concatenate([np.arange(self.nfull - 1), [0]])
            self.P = sp.csr_matrix((data, (rows, cols)), shape=(self.nfull, self.nfull - 1))
        else:
            drop = set()
            for x0 in constraints:
                hits = np.nonzero(np.abs(node_x - float(x0)) <= _NODE_TOL)[0]
                if hits.size == 0:
                    raise ValueError(f"constraint point {x0} is not a node")
                drop.add(int(hits[0]))
            keep = [i for i in range(self.nfull) if i not in drop]
            data = np.ones(len(keep))
            self.P = sp.csr_matrix(
                (data, (np.asarray(keep), np.arange(len(keep)))),
                shape=(self.nfull, len(keep)),
            )

    @property
    def ncells(self):
        return self.mesh.ncells

    def cell_bounds(self, ci):
        return self.mesh.cell_bounds(ci)

    def cell_full_dofs(self, ci):
        k = self.degree
        return np.arange(ci * k, (ci + 1) * k + 1)

    def cell_containing(self, x):
        return self.mesh.cell_containing(x)

    def boundaries_within(self, lo, hi):
        b = self.mesh.boundaries
        return b[(b >= lo - _NODE_TOL) & (b <= hi + _NODE_TOL)]

    def eval_cell(self, ci, xs, deriv=0):
        a, b = self.mesh.cell_bounds(ci)
        t = (np.asarray(xs, dtype=float) - a) / (b - a)
        return self.basis.eval(t, deriv) / (b - a) ** deriv


class GaussLineSpace(LineSpace):
    """Discontinuous elements collocated at per-cell Gauss nodes."""

    def __init__(self, mesh, degree=0):
        if degree < 0:
            raise ValueError("discontinuous line spaces need degree >= 0")
        self.mesh = mesh if isinstance(mesh, Mesh1D) else Mesh1D(mesh)
        self.degree = int(degree)
        ref_nodes, ref_w = gauss_rule(self.degree + 1)
        self.basis = _LagrangeBasis(ref_nodes)
        self.span = self.mesh.span
        nloc, nc = self.degree + 1, self.mesh.ncells
        self.nfull = nc * nloc
        self.P = sp.identity(self.nfull, format="csr")
        widths = self.mesh.widths
        lefts = self.mesh.boundaries[:-1]
        self.nodes_global = (lefts[:, None] + widths[:, None] * ref_nodes[None, :]).ravel()
        self.weights_global = (widths[:, None] * ref_w[None, :]).ravel()

    @property
    def ncells(self):
        return self.mesh.ncells

    def cell_bounds(self, ci):
        return self.mesh.cell_bounds(ci)

    def cell_full_dofs(self, ci):
        nloc = self.degree + 1
        return np.arange(ci * nloc, (ci + 1) * nloc)

    def cell_containing(self, x):
        return self.mesh.cell_containing(x)

    def boundaries_within(self, lo, hi):
        b = self.mesh.boundaries
        return b[(b >= lo - _NODE_TOL) & (b <= hi + _NODE_TOL)]

    def eval_cell(self, ci, xs, deriv=0):
        a, b = self.mesh.cell_bounds(ci)
        t = (np.asarray(xs, dtype=float) - a) / (b - a)
        return self.basis.eval(t, deriv) / (b - a) ** deriv


class CompositeLineSpace(LineSpace):
    """Concatenation of line spaces on abutting subintervals."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ValueError("composite space needs at least one part")
        for left, right in zip(parts, parts[1:]):
            if abs(left.span[1] - right.span[0]) > _NODE_TOL:
                raise ValueError("composite parts must abut")
        self.parts = parts
        self.span = (parts[0].span[0], parts[-1].span[1])
        self.degree = max(p.degree for p in parts)
        self.nfull = sum(p.nfull for p in parts)
        self.P = sp.block_diag([p.P for p in parts], format="csr")
        self._cell_offsets = np.cumsum([0] + [p.ncells for p in parts])
        self._full_offsets = np.cumsum([0] + [p.nfull for p in parts])
        dof_offsets = np.cumsum([0] + [p.ndof for p in parts])
        self.part_slices = [
            slice(int(a), int(b)) for a, b in zip(dof_offsets, dof_offsets[1:])
        ]

    @property
    def ncells(self):
        return int(self._cell_offsets[-1])

    def _locate(self, ci):
        pi = int(np.searchsorted(self._cell_offsets, ci, side="right")) - 1
        pi = min(max(pi, 0), len(self.parts) - 1)
        return pi, ci - int(self._cell_offsets[pi])

    def cell_bounds(self, ci):
        pi, local = self._locate(ci)
        return self.parts[pi].cell_bounds(local)

    def cell_full_dofs(self, ci):
        pi, local = self._locate(ci)
        return self.parts[pi].cell_full_dofs(local) + int(self._full_offsets[pi])

    def cell_containing(self, x):
        for pi, part in enumerate(self.parts):
            if x <= part.span[1] or pi == len(self.parts) - 1:
                return part.cell_containing(x) + int(self._cell_offsets[pi])
        raise AssertionError

    def boundaries_within(self, lo, hi):
        vals = np.concatenate([p.boundaries_within(lo, hi) for p in self.parts])
        return np.unique(vals)

    def eval_cell(self, ci, xs, deriv=0):
        pi, local = self._locate(ci)
        return self.parts[pi].eval_cell(local, xs, deriv)


def _coeff_pieces(coeff):
    """Normalise a 1-D coefficient to (scale, callable|None, breakpoints-fn)."""
    if coeff is None:
        return 1.0, None, lambda lo, hi: ()
    if np.isscalar(coeff):
        return float(coeff), None, lambda lo, hi: ()
    if isinstance(coeff, Field):
        return 1.0, coeff, coeff.breakpoints
    if callable(coeff):
        return 1.0, coeff, lambda lo, hi: ()
    raise TypeError(f"unsupported coefficient {coeff!r}")


def _union_cuts(row, col, lo, hi, extra):
    cuts = np.concatenate(
        [
            np.asarray([lo, hi]),
            row.boundaries_within(lo, hi),
            col.boundaries_within(lo, hi) if col is not None else np.empty(0),
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


def gram1d(row, col, coeff=None, drow=0, dcol=0, npts=None):
    """Weighted Gram matrix  G_ij = int coeff * d^drow(row_i) * d^dcol(col_j).

    Integration runs over the union mesh of the two spaces (and the
    coefficient's breakpoints), so aligned piecewise-constant data and
    polynomial factors are integrated exactly.  Returns a CSR matrix of
    shape (row.ndof, col.ndof).
    """
    lo = max(row.span[0], col.span[0])
    hi = min(row.span[1], col.span[1])
    scale, fn, bp = _coeff_pieces(coeff)
    if hi <= lo + _NODE_TOL or scale == 0.0:
        return sp.csr_matrix((row.ndof, col.ndof))
    if npts is None:
        npts = max(4, (row.degree + col.degree) // 2 + 2)
    ref_x, ref_w = gauss_rule(npts)
    cuts = _union_cuts(row, col, lo, hi, bp(lo, hi))

    rows, cols, vals = [], [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        ri = row.cell_containing(mid)
        ci = col.cell_containing(mid)
        pts = a + (b - a) * ref_x
        w = (b - a) * ref_w * scale
        if fn is not None:
            w = w * np.asarray(fn(pts), dtype=float)
        br = row.eval_cell(ri, pts, drow)
        bc = col.eval_cell(ci, pts, dcol)
        local = np.einsum("iq,q,jq->ij", br, w, bc)
        rd = row.cell_full_dofs(ri)
        cd = col.cell_full_dofs(ci)
        rows.append(np.repeat(rd, cd.size))
        cols.append(np.tile(cd, rd.size))
        vals.append(local.ravel())
    g_full = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row.nfull, col.nfull),
    ).tocsr()
    return (row.P.T @ g_full @ col.P).tocsr()


def load1d(space, f, deriv=0, npts=None):
    """Load vector  b_i = int f * d^deriv(space_i)  over the space's span."""
    lo, hi = space.span
    scale, fn, bp = _coeff_pieces(f)
    if npts is None:
        npts = max(4, space.degree + 2)
    ref_x, ref_w = gauss_rule(npts)
    cuts = _union_cuts(space, None, lo, hi, bp(lo, hi))
    out = np.zeros(space.nfull)
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        ci = space.cell_containing(mid)
        pts = a + (b - a) * ref_x
        w = (b - a) * ref_w * scale
        if fn is not None:
            w = w * np.asarray(fn(pts), dtype=float)
        basis = space.eval_cell(ci, pts, deriv)
        np.add.at(out, space.cell_full_dofs(ci), basis @ w)
    return space.P.T @ out


def collocated_mass(space, coeff=None):
    """Diagonal weighted mass of a Gauss-collocated space.

    Instead of integrating the coefficient exactly, it is *sampled* at the
    collocation nodes: diag(w_q * coeff(x_q)).  For piecewise-constant
    aligned coefficients this equals the exact Gram; for smooth coefficients
    it is the spectral-collocation variant that makes the semidiscrete
    system decouple into per-node ODEs with the sampled coefficient.
    """
    if not isinstance(space, GaussLineSpace):
        raise TypeError("collocated masses are defined for Gauss line spaces")
    vals = space.weights_global.copy()
    if coeff is not None:
        if np.isscalar(coeff):
            vals = vals * float(coeff)
        else:
            vals = vals * np.asarray(coeff(space.nodes_global), dtype=float)
    return sp.diags(vals, format="csr")


def evaluate1d(space, coeffs, xs, deriv=0):
    """Point values of a discrete function given by constrained coefficients."""
    full = space.P @ np.asarray(coeffs)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.zeros(xs.shape, dtype=full.dtype)
    for ix, x in enumerate(xs):
        ci = space.cell_containing(x)
        basis = space.eval_cell(ci, np.asarray([x]), deriv)[:, 0]
        out[ix] = basis @ full[space.cell_full_dofs(ci)]
    return out


# ---------------------------------------------------------------------------
# Tensor-product 2-D spaces
# ---------------------------------------------------------------------------


class TensorSpace:
    """Tensor product of two line spaces with x-major DOF ordering."""

    def __init__(self, sx, sy):
        self.sx = sx
        self.sy = sy

    @property
    def ndof(self):
        return self.sx.ndof * self.sy.ndof

    def mass(self, coeff=None):
        return gram2d(self, self, coeff=coeff)

    def __repr__(self):
        return f"TensorSpace({self.sx.ndof} x {self.sy.ndof} DOFs)"


def _coeff_terms_2d(coeff):
    """Normalise a 2-D coefficient into separable (fx, fy) term pairs."""
    if coeff is None:
        return [(None, None)]
    if np.isscalar(coeff):
        return [(float(coeff), None)]
    if isinstance(coeff, Separable2D):
        return list(coeff.terms)
    raise TypeError("2-D coefficients must be scalars or Separable2D")


def gram2d(row, col, coeff=None, drow=(0, 0), dcol=(0, 0)):
    """Weighted 2-D Gram matrix as a Kronecker sum over separable terms."""
    out = None
    for fx, fy in _coeff_terms_2d(coeff):
        gx = gram1d(row.sx, col.sx, coeff=fx, drow=drow[0], dcol=dcol[0])
        gy = gram1d(row.sy, col.sy, coeff=fy, drow=drow[1], dcol=dcol[1])
        term = sp.kron(gx, gy, format="csr")
        out = term if out is None else out + term
    return out


def load2d(space, coeff):
    """2-D load vector for a separable right-hand side."""
    out = np.zeros(space.ndof)
    for fx, fy in _coeff_terms_2d(coeff):
        bx = load1d(space.sx, fx)
        by = load1d(space.sy, fy)
        out += np.kron(bx, by)
    return out


def evaluate2d(space, coeffs, points):
    """Point values of a tensor-space function at points of shape (npts, 2)."""
    full = space.sx.P @ (
        np.asarray(coeffs).reshape(space.sx.ndof, space.sy.ndof) @ space.sy.P.T.toarray()
    )
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(pts.shape[0], dtype=full.dtype)
    for ip, (x, y) in enumerate(pts):
        cx = space.sx.cell_containing(x)
        cy = space.sy.cell_containing(y)
        bx = space.sx.eval_cell(cx, np.asarray([x]))[:, 0]
        by = space.sy.eval_cell(cy, np.asarray([y]))[:, 0]
        sub = full[np.ix_(space.sx.cell_full_dofs(cx), space.sy.cell_full_dofs(cy))]
        out[ip] = bx @ sub @ by
    return out


class RTSpace:
    """H(div)-conforming tensor-product Raviart–Thomas pair of order k.

    Component spaces: vx in CG_{k+1}(x) x DG_k(y), vy in DG_k(x) x CG_{k+1}(y).
    """

    def __init__(self, mesh, degree=0):
        if degree < 0:
            raise ValueError("RT spaces need degree >= 0")
        self.degree = int(degree)
        k = self.degree
        self.vx = TensorSpace(
            NodalLineSpace(mesh.x, k + 1), GaussLineSpace(mesh.y, k)
        )
        self.vy = TensorSpace(
            GaussLineSpace(mesh.x, k), NodalLineSpace(mesh.y, k + 1)
        )

    @property
    def components(self):
        return self.vx, self.vy

    @property
    def ndof(self):
        return self.vx.ndof + self.vy.ndof


def build_space(mesh, family, degree=1, periodic=False, constraints=(), zero_trace=False):
    """Spec-level space factory.

    1-D families: ``"cg"`` (optionally periodic or with point constraints)
    and ``"dg"``.  2-D families on tensor meshes: ``"q"`` (scalar continuous,
    optionally zero-trace), ``"rt"`` (Raviart–Thomas pair of order
    ``degree``), ``"dgq"`` (discontinuous tensor elements).
    """
    family = family.lower()
    if isinstance(mesh, Mesh1D):
        if family == "cg":
            return NodalLineSpace(
                mesh, degree, periodic=periodic, constraints=constraints
            )
        if family == "dg":
            return GaussLineSpace(mesh, degree)
        raise ValueError(f"unsupported 1-D family {family!r}")
    if isinstance(mesh, TensorMesh2D):
        if family == "q":
            cons_x = (mesh.x.span[0], mesh.x.span[1]) if zero_trace else ()
            cons_y = (mesh.y.span[0], mesh.y.span[1]) if zero_trace else ()
            return TensorSpace(
                NodalLineSpace(mesh.x, degree, constraints=cons_x),
                NodalLineSpace(mesh.y, degree, constraints=cons_y),
            )
        if family == "rt":
            return RTSpace(mesh, degree)
        if family == "dgq":
            return TensorSpace(
                GaussLineSpace(mesh.x, degree), GaussLineSpace(mesh.y, degree)
            )
        raise ValueError(f"unsupported 2-D family {family!r}")
    raise TypeError("mesh must be Mesh1D or TensorMesh2D")
