"""Tests for meshes, line/tensor spaces, and Gram/load assembly."""

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from evohom.fields import Constant, RegionIndicator, Separable2D, SineOsc, StripeIndicator
from evohom.meshes import Mesh1D, TensorMesh2D, build_mesh
from evohom.spaces import (
    CompositeLineSpace,
    GaussLineSpace,
    NodalLineSpace,
    RTSpace,
    TensorSpace,
    build_space,
    collocated_mass,
    evaluate1d,
    evaluate2d,
    gram1d,
    gram2d,
    load1d,
    load2d,
)


class TestBuildMesh:
    def test_aligned_interval(self):
        mesh = build_mesh((0.0, 1.0), 20, alignment=2)
        assert mesh.ncells == 20
        for p in (0.25, 0.5, 0.75):
            assert mesh.has_boundary_at(p)

    def test_misaligned_interval_names_multiple(self):
        with pytest.raises(ValueError, match="multiple of 4"):
            build_mesh((0.0, 1.0), 3, alignment=2)

    def test_graded_rectangle(self):
        mesh = build_mesh(
            ((-2.0, 2.0), (-2.0, 2.0)), (10, 80), alignment=1, osc_region=(-1.0, 1.0)
        )
        assert isinstance(mesh, TensorMesh2D)
        assert mesh.ncells == (10, 80)
        inner = mesh.x.boundaries[(mesh.x.boundaries > -1 - 1e-12) & (mesh.x.boundaries < 1 + 1e-12)]
        assert np.allclose(np.diff(inner), 0.25)
        assert mesh.x.has_boundary_at(-1.0) and mesh.x.has_boundary_at(1.0)
        assert np.allclose(np.diff(mesh.x.boundaries[:2]), 1.0)  # exterior spacing 1/n
        assert np.allclose(np.diff(mesh.y.boundaries), 4.0 / 80)

    def test_graded_rectangle_wrong_count(self):
        with pytest.raises(ValueError, match="requires exactly 20"):
            build_mesh(
                ((-2.0, 2.0), (-2.0, 2.0)), (16, 40), alignment=2, osc_region=(-1.0, 1.0)
            )

    def test_union(self):
        a = Mesh1D(np.linspace(0, 1, 5))
        b = Mesh1D([0.0, 0.3, 1.0])
        u = a.union(b)
        assert u.ncells == 5  # {0, 1/4, 0.3, 1/2, 3/4, 1}
        assert u.has_boundary_at(0.3)

    def test_validation(self):
        with pytest.raises(ValueError):
            Mesh1D([0.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            build_mesh((0.0, 1.0), 0)


class TestLineSpaces:
    def test_periodic_p1_dof_count(self):
        mesh = build_mesh((0.0, 1.0), 4)
        space = build_space(mesh, "cg", 1, periodic=True)
        assert space.ndof == 4

    def test_endpoint_constrained_p1_dof_count(self):
        mesh = build_mesh((-1.0, 0.0), 4)
        space = build_space(mesh, "cg", 1, constraints=(0.0,))
        assert space.ndof == 4

    def test_constraint_must_hit_node(self):
        mesh = build_mesh((0.0, 1.0), 4)
        with pytest.raises(ValueError, match="not a node"):
            NodalLineSpace(mesh, 1, constraints=(0.33,))

    def test_cg_mass_total(self):
        mesh = build_mesh((0.0, 1.0), 8)
        for k in (1, 2):
            space = NodalLineSpace(mesh, k)
            m = space.mass()
            ones = np.ones(space.ndof)
            assert ones @ (m @ ones) == pytest.approx(1.0, rel=1e-13)

    def test_dg_mass_diagonal(self):
        mesh = build_mesh((0.0, 1.0), 5)
        for k in (0, 1, 2):
            space = GaussLineSpace(mesh, k)
            m = space.mass().toarray()
            assert np.allclose(m, np.diag(space.weights_global))

    def test_stripe_weighted_mass_exact(self):
        mesh = build_mesh((0.0, 1.0), 8, alignment=2)
        space = NodalLineSpace(mesh, 1)
        m = gram1d(space, space, coeff=StripeIndicator(2))
        ones = np.ones(space.ndof)
        assert ones @ (m @ ones) == pytest.approx(0.5, rel=1e-13)

    def test_unaligned_stripe_still_exact(self):
        # the Gram integrator splits cells at coefficient breakpoints
        mesh = build_mesh((0.0, 1.0), 3)
        space = NodalLineSpace(mesh, 1)
        m = gram1d(space, space, coeff=StripeIndicator(1))
        ones = np.ones(space.ndof)
        assert ones @ (m @ ones) == pytest.approx(0.5, rel=1e-13)

    def test_periodic_derivative_skew(self):
        mesh = build_mesh((0.0, 1.0), 6)
        space = NodalLineSpace(mesh, 1, periodic=True)
        d = gram1d(space, space, dcol=1).toarray()
        assert np.max(np.abs(d + d.T)) <= 1e-14

    def test_load_partition_of_unity(self):
        mesh = build_mesh((0.0, 1.0), 10)
        space = NodalLineSpace(mesh, 1)
        b = load1d(space, SineOsc(1).__call__)
        # sum of loads = integral of sin(2 pi x) = 0
        assert np.sum(b) == pytest.approx(0.0, abs=1e-12)
        b2 = load1d(space, lambda x: np.sin(np.pi * x))
        assert np.sum(b2) == pytest.approx(2.0 / np.pi, rel=1e-9)

    def test_evaluate_linear_exact(self):
        mesh = build_mesh((0.0, 2.0), 4)
        space = NodalLineSpace(mesh, 1)
        coeffs = space.node_positions.copy()  # interpolates f(x) = x
        xs = np.array([0.1, 0.77, 1.5, 2.0])
        assert np.allclose(evaluate1d(space, coeffs, xs), xs)
        assert np.allclose(evaluate1d(space, coeffs, xs, deriv=1), 1.0)

    def test_collocated_mass_samples_nodes(self):
        mesh = build_mesh((0.0, 1.0), 10)
        space = GaussLineSpace(mesh, 0)
        m = collocated_mass(space, SineOsc(1).__call__).toarray()
        mids = 0.5 * (mesh.boundaries[:-1] + mesh.boundaries[1:])
        assert np.allclose(np.diag(m), 0.1 * np.sin(2 * np.pi * mids))
        with pytest.raises(TypeError):
            collocated_mass(NodalLineSpace(mesh, 1))

    def test_mass_spd(self):
        mesh = build_mesh((0.0, 1.0), 6)
        for space in (
            NodalLineSpace(mesh, 1),
            NodalLineSpace(mesh, 2),
            NodalLineSpace(mesh, 1, periodic=True),
            NodalLineSpace(mesh, 1, constraints=(0.0, 1.0)),
            GaussLineSpace(mesh, 1),
        ):
            m = space.mass().tocsc()
            splu(m)  # factorises only if nonsingular
            eigs = np.linalg.eigvalsh(m.toarray())
            assert eigs.min() > 0.0


class TestCompositeSpace:
    def _space(self):
        left = NodalLineSpace(build_mesh((-1.0, 0.0), 4), 1, constraints=(0.0,))
        right = GaussLineSpace(build_mesh((0.0, 1.0), 3), 0)
        return CompositeLineSpace([left, right])

    def test_layout(self):
        space = self._space()
        assert space.ndof == 4 + 3
        assert space.span == (-1.0, 1.0)
        assert space.part_slices[0] == slice(0, 4)
        assert space.part_slices[1] == slice(4, 7)

    def test_parts_must_abut(self):
        left = NodalLineSpace(build_mesh((-1.0, 0.0), 2), 1)
        right = GaussLineSpace(build_mesh((0.5, 1.0), 2), 0)
        with pytest.raises(ValueError, match="abut"):
            CompositeLineSpace([left, right])

    def test_region_weighted_gram_vanishes_off_region(self):
        space = self._space()
        g = gram1d(space, space, coeff=RegionIndicator(-1.0, 0.0)).toarray()
        assert np.max(np.abs(g[4:, :])) == 0.0
        assert np.max(np.abs(g[:, 4:])) == 0.0
        assert g[:4, :4].sum() > 0.0

    def test_evaluate_dispatch(self):
        space = self._space()
        coeffs = np.zeros(space.ndof)
        coeffs[4:] = 2.0
        vals = evaluate1d(space, coeffs, np.array([-0.5, 0.25, 0.75]))
        assert vals[0] == pytest.approx(0.0)
        assert vals[1] == pytest.approx(2.0)
        assert vals[2] == pytest.approx(2.0)


class TestTensorSpaces:
    def test_rt0_dof_count(self):
        mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), (2, 2))
        rt = build_space(mesh, "rt", 0)
        assert isinstance(rt, RTSpace)
        assert rt.vx.ndof == 6 and rt.vy.ndof == 6
        assert rt.ndof == 12

    def test_rt1_dof_count(self):
        mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), (2, 2))
        rt = build_space(mesh, "rt", 1)
        assert rt.vx.ndof == 5 * 4 and rt.vy.ndof == 4 * 5
        assert rt.ndof == 40

    def test_zero_trace_q1(self):
        mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), (2, 2))
        q = build_space(mesh, "q", 1, zero_trace=True)
        assert q.ndof == 1
        m = q.mass().toarray()
        assert m[0, 0] == pytest.approx(1.0 / 9.0, rel=1e-13)

    def test_q1_mass_total_area(self):
        mesh = build_mesh(((-2.0, 2.0), (-2.0, 2.0)), (4, 4))
        q = build_space(mesh, "q", 1)
        ones = np.ones(q.ndof)
        assert ones @ (q.mass() @ ones) == pytest.approx(16.0, rel=1e-13)

    def test_separable_weighted_mass(self):
        mesh = build_mesh(((-2.0, 2.0), (-2.0, 2.0)), (4, 4))
        q = build_space(mesh, "q", 1)
        box = RegionIndicator(-1.0, 1.0)
        omega1 = Separable2D([(box, box)])
        m = gram2d(q, q, coeff=omega1)
        ones = np.ones(q.ndof)
        assert ones @ (m @ ones) == pytest.approx(4.0, rel=1e-13)

    def test_load2d_total(self):
        mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), (3, 3))
        q = build_space(mesh, "q", 1)
        f = Separable2D([(Constant(2.0), Constant(1.0))])
        b = load2d(q, f)
        assert np.sum(b) == pytest.approx(2.0, rel=1e-13)

    def test_evaluate2d_bilinear_exact(self):
        mesh = build_mesh(((0.0, 1.0), (0.0, 2.0)), (2, 3))
        q = build_space(mesh, "q", 1)
        nx = q.sx.node_positions
        ny = q.sy.node_positions
        coeffs = (nx[:, None] * (2.0 + ny[None, :])).ravel()
        pts = np.array([[0.3, 0.4], [0.9, 1.7], [0.5, 2.0]])
        expected = pts[:, 0] * (2.0 + pts[:, 1])
        assert np.allclose(evaluate2d(q, coeffs, pts), expected)

    def test_unsupported_families(self):
        mesh1 = build_mesh((0.0, 1.0), 2)
        mesh2 = build_mesh(((0.0, 1.0), (0.0, 1.0)), (2, 2))
        with pytest.raises(ValueError):
            build_space(mesh1, "rt", 0)
        with pytest.raises(ValueError):
            build_space(mesh2, "cg", 1)


class TestCrossSpaceGram:
    def test_projection_between_meshes(self):
        coarse = NodalLineSpace(build_mesh((0.0, 1.0), 4), 1)
        fine = NodalLineSpace(build_mesh((0.0, 1.0), 6), 1)
        cross = gram1d(coarse, fine)
        ones_f = np.ones(fine.ndof)
        ones_c = np.ones(coarse.ndof)
        # <1, 1> across meshes equals the interval length
        assert ones_c @ (cross @ ones_f) == pytest.approx(1.0, rel=1e-13)
        # linear function represented on both meshes: cross-Gram pairing
        xc = coarse.node_positions
        xf = fine.node_positions
        val = xc @ (cross @ xf)
        assert val == pytest.approx(1.0 / 3.0, rel=1e-13)
