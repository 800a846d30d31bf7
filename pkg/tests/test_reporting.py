"""Tests for pairings, strong norms, rate fits, and CSV reports."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from evohom.analytic import ode_exact, ode_hom_exact
from evohom.meshes import build_mesh
from evohom.operators import assemble_skew_operator
from evohom.reporting import (
    ConvergenceReport,
    fit_rate,
    pairing,
    restricted_load,
    strong_norm_diff,
    write_csv,
)
from evohom.solver import EvolutionProblem, solve_evolution
from evohom.spaces import build_space
from evohom.timequad import TimeGrid

# Independently derived by dense tensor-Gauss quadrature of the analytic
# solutions (stable to 6e-17 under refinement): the oracle pairing
# int_0^2 int_0^1 (u_1(t,x) - u_hom(t)) x dx dt for the oscillating ODE
# family at n = 1 with unit-step forcing.
ORACLE_PAIRING_X_N1 = 0.2427626039834412


def _linear_solution(ncells=4, span=(0.0, 1.0), fn=None, u0=None, slabs=8):
    """Solve M u' = b with b the load of ``fn``: u(t, x) = t * fn_proj(x)."""
    mesh = build_mesh(span, ncells)
    space = build_space(mesh, "cg", 1)
    op = assemble_skew_operator("zero", (space,))
    mass = space.mass()
    b = restricted_load(space, fn if fn is not None else 1.0)
    problem = EvolutionProblem(
        (space,),
        None,
        op,
        TimeGrid.uniform(2.0, slabs),
        forcing=((lambda t: 1.0, b),),
        u0=u0,
        m0mat=mass,
        m1mat=sp.csr_matrix(mass.shape),
    )
    return solve_evolution(problem)


def _vector_solution():
    """2-D flux pair with vx(t,x,y) = t*x and vy = 0 exactly."""
    mesh = build_mesh(((-2.0, 2.0), (-2.0, 2.0)), (2, 2))
    su = build_space(mesh, "q", 1, zero_trace=True)
    rt = build_space(mesh, "rt", 0)
    spaces = (su, rt.vx, rt.vy)
    op = assemble_skew_operator("zero", (su,))
    from evohom.operators import extend_with_zero_components

    op = extend_with_zero_components(op, [rt.vx.ndof, rt.vy.ndof])
    mass = sp.block_diag(
        [su.mass(), rt.vx.mass(), rt.vy.mass()], format="csr"
    )
    b = np.concatenate(
        [
            np.zeros(su.ndof),
            np.kron(
                restricted_load(rt.vx.sx, lambda x: x),
                restricted_load(rt.vx.sy, 1.0),
            ),
            np.zeros(rt.vy.ndof),
        ]
    )
    problem = EvolutionProblem(
        spaces,
        None,
        op,
        TimeGrid.uniform(2.0, 8),
        forcing=((lambda t: 1.0, b),),
        m0mat=mass,
        m1mat=sp.csr_matrix(mass.shape),
    )
    return solve_evolution(problem)


class TestPairingCallable:
    def test_unit_cylinder(self):
        grid = TimeGrid.uniform(2.0, 8)
        val = pairing(1.0, "1", domain=(0.0, 1.0), grid=grid)
        assert val == pytest.approx(2.0, rel=1e-13)

    def test_orthogonal_sine(self):
        grid = TimeGrid.uniform(2.0, 8)
        val = pairing(
            lambda t, x: np.sin(2.0 * np.pi * x),
            "1",
            domain=(0.0, 1.0),
            grid=grid,
        )
        assert abs(val) <= 1e-12

    def test_oracle_reference_value(self):
        grid = TimeGrid.uniform(2.0, 64)
        val = pairing(
            lambda t, x: ode_exact(1, t, x) - ode_hom_exact(t),
            "x",
            domain=(0.0, 1.0),
            grid=grid,
        )
        assert val == pytest.approx(ORACLE_PAIRING_X_N1, abs=1e-9)

    def test_needs_grid_and_domain(self):
        with pytest.raises(ValueError, match="TimeGrid"):
            pairing(1.0, "1", domain=(0.0, 1.0))
        with pytest.raises(ValueError, match="domain"):
            pairing(1.0, "1", grid=TimeGrid.uniform(1.0, 2))


class TestPairingSolution:
    def test_linear_exact_values(self):
        sol = _linear_solution(fn=lambda x: x)  # u = t*x
        assert pairing(sol, "x") == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert pairing(sol, "x2") == pytest.approx(0.5, rel=1e-12)
        assert pairing(sol, "t") == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert pairing(sol, "1") == pytest.approx(1.0, rel=1e-12)

    def test_subdomain_restriction(self):
        sol = _linear_solution(fn=lambda x: x)
        val = pairing(sol, "x", domain=(0.5, 1.0))
        assert val == pytest.approx(2.0 * 7.0 / 24.0, rel=1e-12)

    def test_offgrid_subdomain(self):
        # cut point 0.55 interior to a cell: load splitting keeps it exact
        sol = _linear_solution(fn=lambda x: x)
        val = pairing(sol, "x", domain=(0.55, 1.0))
        exact = 2.0 * (1.0 - 0.55**3) / 3.0
        assert val == pytest.approx(exact, rel=1e-12)

    def test_dictionary_mismatch(self):
        sol = _linear_solution()
        with pytest.raises(ValueError, match="dictionary mismatch"):
            pairing(sol, "x0")
        with pytest.raises(ValueError, match="dictionary mismatch"):
            pairing(sol, "no_such_test")

    def test_vector_pairings(self):
        sol = _vector_solution()
        # vx = t*x, vy = 0 on [0,2] x (-2,2)^2
        assert pairing(sol, "x0") == pytest.approx(128.0 / 3.0, rel=1e-12)
        assert abs(pairing(sol, "0y")) <= 1e-12
        # <t*x, sin(pi x)> = int t * int_y * int x sin(pi x) = 2*4*(-4/pi)
        assert pairing(sol, "sinpix0") == pytest.approx(-32.0 / math.pi, rel=1e-6)
        assert abs(pairing(sol, "1")) <= 1e-12  # odd in x
        box = ((0.0, 2.0), (-2.0, 2.0))
        val = pairing(sol, "1", domain=box)
        assert val == pytest.approx(2.0 * 2.0 * 4.0, rel=1e-12)

    def test_scalar_test_on_tensor_component(self):
        sol = _vector_solution()
        with pytest.raises(ValueError, match="dictionary mismatch"):
            pairing(sol, "x", component=1)


class TestStrongNormDiff:
    def test_self_is_zero(self):
        sol = _linear_solution(fn=lambda x: x)
        assert strong_norm_diff(sol, sol) == 0.0

    def test_constants(self):
        mesh = build_mesh((0.0, 1.0), 4)
        space = build_space(mesh, "cg", 1)
        op = assemble_skew_operator("zero", (space,))
        mass = space.mass()
        problem = EvolutionProblem(
            (space,),
            None,
            op,
            TimeGrid.uniform(2.0, 4),
            u0=3.0 * np.ones(space.ndof),
            m0mat=mass,
            m1mat=sp.csr_matrix(mass.shape),
        )
        sol = solve_evolution(problem)  # u = 3 for all t
        val = strong_norm_diff(sol, 1.0)
        assert val == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-12)

    def test_cross_mesh_agreement(self):
        a = _linear_solution(ncells=4, fn=lambda x: x)
        b = _linear_solution(ncells=6, fn=lambda x: x)
        assert strong_norm_diff(a, b) <= 1e-12

    def test_subdomain(self):
        sol = _linear_solution(fn=lambda x: x)
        val = strong_norm_diff(sol, 0.0, subdomain=(0.5, 1.0))
        assert val == pytest.approx(math.sqrt(7.0) / 3.0, rel=1e-12)

    def test_tensor_component(self):
        sol = _vector_solution()
        assert strong_norm_diff(sol, lambda t, xg, yg: t * xg, component=1) <= 1e-12
        val = strong_norm_diff(sol, 0.0, component=1)
        assert val == pytest.approx(math.sqrt(512.0) / 3.0, rel=1e-12)

    def test_incompatible_components(self):
        a = _linear_solution()
        b = _vector_solution()
        with pytest.raises(ValueError, match="incompatible components"):
            strong_norm_diff(a, b)

    def test_needs_a_solution(self):
        with pytest.raises(ValueError, match="discrete solution"):
            strong_norm_diff(1.0, 2.0)


class TestFitRate:
    def test_exact_power_law(self):
        assert fit_rate([(1, 1.0), (2, 0.5), (4, 0.25)]) == pytest.approx(
            -1.0, abs=1e-12
        )

    def test_stagnation(self):
        assert fit_rate([(1, 0.7), (2, 0.7), (4, 0.7)]) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_figure_series(self):
        pts = [(1, 2.4276e-1), (2, 1.2138e-1), (4, 6.0692e-2), (8, 3.0346e-2)]
        assert fit_rate(pts) == pytest.approx(-1.0, abs=5e-3)

    def test_errors(self):
        with pytest.raises(ValueError, match="three points"):
            fit_rate([(1, 1.0), (2, 0.5)])
        with pytest.raises(ValueError, match="positive"):
            fit_rate([(1, 1.0), (2, 0.0), (4, 0.25)])


class TestConvergenceReport:
    def test_round_trip(self, tmp_path):
        rows = [
            (1, "pair_u_x", 0.24),
            (2, "pair_u_x", 0.12),
            (4, "pair_u_x", 0.06),
            (0, "slope_pair_u_x", -1.0),
        ]
        rep = ConvergenceReport("EX1", tuple(rows))
        assert rep.ns() == (1, 2, 4)
        assert rep.quantities() == ("pair_u_x",)
        assert rep.slope("pair_u_x") == pytest.approx(-1.0, abs=1e-10)
        assert rep.value(2, "pair_u_x") == 0.12
        path = tmp_path / "rep.csv"
        rep.write(path)
        text = path.read_text(encoding="utf-8")
        lines = text.split("\n")
        assert lines[0] == "example,n,quantity,value"
        assert lines[1].startswith("EX1,1,pair_u_x,2.4")
        assert "e-01" in lines[1]
        assert text.count("\r") == 0

    def test_missing_quantity_rejected(self):
        rows = [
            (1, "a", 1.0),
            (2, "a", 0.5),
            (4, "a", 0.25),
            (1, "b", 1.0),
        ]
        with pytest.raises(ValueError, match="missing"):
            ConvergenceReport("EX1", tuple(rows))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            ConvergenceReport("EX1", ((1, "a", float("nan")),))

    def test_write_csv_format(self, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, "EX3", [(2, "pair_u_1", 2.6876e-2)])
        lines = path.read_text(encoding="utf-8").strip().split("\n")
        assert lines == [
            "example,n,quantity,value",
            "EX3,2,pair_u_1,2.687600000000e-02",
        ]
