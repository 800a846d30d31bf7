"""Space-time dG(1) march with exponentially weighted Radau quadrature.

On each half-open slab (t_{m-1}, t_m] the trial/test space is spanned by the
shifted Legendre pair l0 = 1, l1 = 2(t - t_{m-1})/h - 1, and the variational
statement uses the slab's 2-point weighted right-sided Gauss-Radau rule plus
the upwind jump term <M0 [U]_{m-1}, Phi+>.  With temporal-major stacking
[U^0; U^1] the slab matrix is

    K = kron(T1 + J, M0) + kron(T0, M1 + A),

where T0/T1 are the quadrature mass/stiffness forms of the temporal basis
and J_ij = l_i(left) * l_j(left).  On uniform time grids K is
slab-independent and its sparse factorisation is reused across the march.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .operators import assemble_law_masses
from .spaces import TensorSpace, evaluate1d, evaluate2d
from .timequad import TRACE_LEFT, TimeGrid, build_radau_rule, temporal_matrices


class EvolutionProblem:
    """One well-posed evolutionary solve: spaces + instant law + A + data.

    ``forcing`` is a sequence of separable terms ``(g, b)`` with ``g`` a
    scalar time signal and ``b`` a stacked spatial load vector; ``u0`` is a
    stacked coefficient vector of the initial datum (default zero).
    """

    def __init__(
        self,
        spaces,
        law,
        operator,
        grid,
        forcing=(),
        u0=None,
        rho=0.0,
        m0mat=None,
        m1mat=None,
    ):
        self.spaces = tuple(spaces)
        self.law = law
        self.operator = operator
        if law is not None and law.ncomp != len(self.spaces):
            raise ValueError("law and spaces disagree on the component count")
        if operator.ncomp != len(self.spaces):
            raise ValueError("operator and spaces disagree on the component count")
        self.offsets = operator.offsets
        self.ndof = int(self.offsets[-1])
        if sum(s.ndof for s in self.spaces) != self.ndof:
            raise ValueError("operator offsets do not match the spaces")
        if not isinstance(grid, TimeGrid):
            raise TypeError("grid must be a TimeGrid")
        self.grid = grid
        self.rho = float(rho)
        if m0mat is not None or m1mat is not None:
            # preassembled masses (e.g. collocated diagonal variants)
            if m0mat is None or m1mat is None:
                raise ValueError("pass both m0mat and m1mat or neither")
            self.m0mat = sp.csr_matrix(m0mat)
            self.m1mat = sp.csr_matrix(m1mat)
        else:
            if law is None:
                raise ValueError("either a law or preassembled masses are required")
            self.m0mat, self.m1mat = assemble_law_masses(self.spaces, law)
        if self.m0mat.shape != (self.ndof, self.ndof) or self.m1mat.shape != (
            self.ndof,
            self.ndof,
        ):
            raise ValueError("mass matrices must match the stacked DOF count")
        self.forcing = []
        for g, b in forcing:
            b = np.asarray(b, dtype=float)
            if b.shape != (self.ndof,):
                raise ValueError("forcing loads must be stacked over all DOFs")
            self.forcing.append((g, b))
        if u0 is None:
            u0 = np.zeros(self.ndof)
        self.u0 = np.asarray(u0, dtype=float)
        if self.u0.shape != (self.ndof,):
            raise ValueError("u0 must be a stacked coefficient vector")

    def component_slice(self, i):
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))


def _slab_matrix(problem, rule):
    t0, t1, jump = temporal_matrices(rule)
    spatial = (problem.m1mat + problem.operator.matrix).tocsr()
    return (
        sp.kron(t1 + jump, problem.m0mat) + sp.kron(t0, spatial)
    ).tocsc()


def _slab_rhs(problem, rule, prev_trace_vec):
    tau = (rule.nodes - rule.t_left) / rule.h
    basis = np.stack([np.ones_like(tau), 2.0 * tau - 1.0])  # (2, nq)
    rhs = np.zeros(2 * problem.ndof)
    for g, b in problem.forcing:
        gvals = np.asarray([g(t) for t in rule.nodes], dtype=float)
        for i in range(2):
            weight = float(np.sum(rule.weights * gvals * basis[i]))
            rhs[i * problem.ndof : (i + 1) * problem.ndof] += weight * b
    for i in range(2):
        rhs[i * problem.ndof : (i + 1) * problem.ndof] += TRACE_LEFT[i] * prev_trace_vec
    return rhs


def assemble_slab_system(problem, m, prev_trace_vec):
    """Matrix and right-hand side of slab m (1-based).

    ``prev_trace_vec`` is the M0-weighted datum entering the jump term: for
    m = 1 the M0-weighted initial datum, otherwise M0 times the previous
    slab's right trace.
    """
    if not 1 <= m <= problem.grid.num_slabs:
        raise ValueError(f"slab index {m} out of range")
    rule = build_radau_rule(problem.grid.slab(m), problem.rho)
    return _slab_matrix(problem, rule), _slab_rhs(problem, rule, prev_trace_vec)


class EvolutionSolution:
    """Per-slab dG(1) coefficients: array (num_slabs, 2, ndof)."""

    def __init__(self, problem, coeffs):
        self.problem = problem
        self.coeffs = coeffs
        coeffs.setflags(write=False)

    @property
    def grid(self):
        return self.problem.grid

    def right_trace(self, m):
        """Value at t_m from slab m (1-based): U^0 + U^1."""
        return self.coeffs[m - 1, 0] + self.coeffs[m - 1, 1]

    def left_value(self, m):
        """Limit from the right at t_{m-1} on slab m: U^0 - U^1."""
        return self.coeffs[m - 1, 0] - self.coeffs[m - 1, 1]

    def coefficient_at(self, t):
        """Stacked spatial coefficients at time t in (0, T], right-continuous."""
        t = float(t)
        if not 0.0 < t <= self.grid.T + 1e-12:
            raise ValueError(f"t = {t} outside (0, {self.grid.T}]")
        m = self.grid.slab_containing(t)
        t_left, t_right = self.grid.slab(m)
        tau = (t - t_left) / (t_right - t_left)
        return self.coeffs[m - 1, 0] + (2.0 * tau - 1.0) * self.coeffs[m - 1, 1]

    def component_at(self, t, i):
        return self.coefficient_at(t)[self.problem.component_slice(i)]


def solve_evolution(problem):
    """March all slabs; the factorisation is reused on uniform grids."""
    grid = problem.grid
    ndof = problem.ndof
    coeffs = np.zeros((grid.num_slabs, 2, ndof))
    prev = problem.m0mat @ problem.u0
    factor = None
    uniform = grid.is_uniform()
    for m in range(1, grid.num_slabs + 1):
        rule = build_radau_rule(grid.slab(m), problem.rho)
        if factor is None or not uniform:
            try:
                factor = splu(_slab_matrix(problem, rule))
            except RuntimeError as exc:
                raise RuntimeError(f"singular slab system at slab {m}: {exc}") from exc
        rhs = _slab_rhs(problem, rule, prev)
        x = factor.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise RuntimeError(f"singular slab system at slab {m}: non-finite solve")
        coeffs[m - 1, 0] = x[:ndof]
        coeffs[m - 1, 1] = x[ndof:]
        prev = problem.m0mat @ (coeffs[m - 1, 0] + coeffs[m - 1, 1])
    return EvolutionSolution(problem, coeffs)


def evaluate_solution(sol, t, points):
    """Per-component point values at time t (right-continuous in t)."""
    vec = sol.coefficient_at(t)
    problem = sol.problem
    out = []
    for i, space in enumerate(problem.spaces):
        ci = vec[problem.component_slice(i)]
        if isinstance(space, TensorSpace):
            out.append(evaluate2d(space, ci, points))
        else:
            out.append(evaluate1d(space, ci, points))
    return out
