import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import qp_projection
from weightedcs.cone import (
    ConeCoordinates,
    from_cone_coordinates,
    lineality_basis,
    make_cone,
    project,
    project_point,
    to_cone_coordinates,
    verify_witness,
)


def random_cone(rng, dmax=6):
    d = int(rng.integers(2, dmax + 1))
    k = int(rng.integers(1, d))
    w = rng.uniform(0.1, 10.0, d)
    return make_cone(w, rng.choice(d, k, replace=False))


@st.composite
def cone_and_point(draw, dmax=7):
    d = draw(st.integers(2, dmax))
    k = draw(st.integers(1, d - 1))
    support = draw(st.permutations(range(d)))[:k]
    w = np.array(draw(st.lists(st.floats(0.1, 10.0), min_size=d, max_size=d)))
    z = np.array(draw(st.lists(st.floats(-5, 5), min_size=d, max_size=d)))
    return make_cone(w, support), z


class TestConeSpec:
    def test_derived_fields(self):
        c = make_cone([3.0, 1.0, 4.0, 2.0], [2, 0])
        assert list(c.support) == [0, 2]
        assert list(c.complement) == [1, 3]
        assert c.k == 2 and c.d == 4
        assert math.isclose(c.a**2, 25.0, rel_tol=1e-14)

    @pytest.mark.parametrize("support", [[], [0, 1, 2]])
    def test_rejects_empty_and_full_support(self, support):
        with pytest.raises(ValueError):
            make_cone([1.0, 1.0, 1.0], support)

    def test_rejects_nonpositive_weights(self):
        with pytest.raises(ValueError):
            make_cone([1.0, 0.0], [0])


class TestCoordinates:
    def test_apex_direction(self):
        coords = to_cone_coordinates(make_cone([1, 1], [0]), [-1.0, 0.0])
        assert coords.z0 == 1.0
        assert list(coords.zJ) == [0.0]
        assert coords.gL.size == 0

    def test_lineality_vector(self):
        coords = to_cone_coordinates(make_cone([1, 1, 1], [0, 1]), [1.0, -1.0, 0.0])
        assert coords.z0 == pytest.approx(0.0, abs=1e-15)
        assert list(coords.zJ) == [0.0]
        assert coords.gL == pytest.approx([math.sqrt(2)], rel=1e-14)

    def test_isometry_and_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            cone = random_cone(rng)
            z = rng.standard_normal(cone.d)
            coords = to_cone_coordinates(cone, z)
            assert abs(coords.norm() - np.linalg.norm(z)) <= 1e-12
            np.testing.assert_allclose(from_cone_coordinates(cone, coords), z, atol=1e-12)

    def test_lineality_basis_is_orthonormal_and_in_L(self):
        cone = make_cone([0.5, 2.0, 1.0, 3.0, 0.7], [0, 2, 3])
        Q = lineality_basis(cone)
        np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(cone.w @ Q, 0.0, atol=1e-14)
        assert np.all(Q[cone.complement] == 0)


class TestProjectExamples:
    cone = make_cone([1.0, 1.0], [0])

    def _proj(self, z0, zj):
        return project(self.cone, ConeCoordinates(z0, np.array([zj], dtype=float)))

    def test_origin_projects_to_apex(self):
        w = self._proj(0.0, 0.0)
        assert (w.m, w.face_dim, w.sq_norm) == (0, 0, 0.0)

    def test_ray_face(self):
        w = self._proj(1.0, 2.0)
        assert (w.m, w.face_dim) == (1, 1)
        assert w.t == 0.5
        assert w.alphas == pytest.approx([1.5])
        assert w.sq_norm == pytest.approx(4.5)
        assert w.thresholds == pytest.approx([-2.0, 2.0])

    def test_ray_face_matches_qp_oracle(self):
        # coords (z0=1, zJ=2) is z = (-1, 2) canonically
        z = np.array([-1.0, 2.0])
        pi = qp_projection([1.0, 1.0], [0], z)
        assert np.dot(pi, pi) == pytest.approx(4.5, abs=1e-10)

    def test_interior(self):
        w = self._proj(2.0, 1.0)
        assert w.interior and w.face_dim == 2 and w.sq_norm == 5.0

    def test_polar_direction(self):
        w = self._proj(-2.0, 1.0)
        assert (w.m, w.face_dim, w.sq_norm) == (0, 0, 0.0)


class TestProjectAgainstOracle:
    def test_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            cone = random_cone(rng)
            z = rng.standard_normal(cone.d) * rng.uniform(0.1, 5)
            wit = project_point(cone, z)
            pi = qp_projection(cone.w, cone.support, z)
            assert np.linalg.norm(wit.pi - pi) <= 1e-8
            assert wit.sq_norm == pytest.approx(np.dot(pi, pi), abs=1e-8)

    def test_witness_invariants(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            cone = random_cone(rng, 8)
            z = rng.standard_normal(cone.d)
            wit = project_point(cone, z)
            assert np.all(wit.alphas > 0)
            assert 0 <= wit.sq_norm <= np.dot(z, z) + 1e-12
            assert cone.k - 1 <= wit.face_dim <= cone.d
            report = verify_witness(cone, z, wit)
            assert report.ok, report


class TestVerifyWitness:
    def test_perturbed_alpha_breaks_complementarity(self):
        cone = make_cone([1.0, 1.0], [0])
        z = np.array([-1.0, 2.0])
        wit = project_point(cone, z)
        assert verify_witness(cone, z, wit)
        wit.alphas = wit.alphas + np.array([0.1])
        report = verify_witness(cone, z, wit)
        assert not report.ok
        assert "complementarity" in report.failed
        assert report.residuals["complementarity"] > 1e-3

    def test_interior_point_has_zero_residuals(self):
        cone = make_cone([1.0, 2.0, 1.0], [1])
        z = np.array([0.1, -3.0, 0.2])
        wit = project_point(cone, z)
        assert wit.interior
        report = verify_witness(cone, z, wit)
        assert all(v == 0.0 for v in report.residuals.values())


def generic(cone, z, gap=1e-7):
    """Away from ties in the sort and from every threshold (a measure-zero set)."""
    coords = to_cone_coordinates(cone, z)
    ratios = np.sort(np.abs(coords.zJ) / cone.w[cone.complement])
    b = project(cone, coords).thresholds
    return (np.all(np.diff(ratios) > gap) and ratios[0] > gap
            and np.min(np.abs(b - cone.a * coords.z0)) > gap * max(1.0, np.abs(b).max()))


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(cone_and_point(), st.floats(0.01, 100.0))
    def test_positive_homogeneity(self, cz, c):
        cone, z = cz
        w1, w2 = project_point(cone, z), project_point(cone, c * z)
        np.testing.assert_allclose(w2.pi, c * w1.pi, atol=1e-9 * max(1, c))
        assert w2.sq_norm == pytest.approx(c * c * w1.sq_norm, rel=1e-9, abs=1e-9)
        if generic(cone, z):
            assert w1.face_dim == w2.face_dim

    @settings(max_examples=200, deadline=None)
    @given(cone_and_point(), st.floats(0.01, 100.0))
    def test_weight_scaling_invariance(self, cz, c):
        cone, z = cz
        scaled = make_cone(c * cone.w, cone.support)
        w1, w2 = project_point(cone, z), project_point(scaled, z)
        assert w2.sq_norm == pytest.approx(w1.sq_norm, rel=1e-9, abs=1e-9)
        np.testing.assert_allclose(w2.pi, w1.pi, atol=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(cone_and_point())
    def test_thresholds_monotone_and_unique_bracket(self, cz):
        cone, z = cz
        wit = project_point(cone, z)
        b = wit.thresholds
        assume(generic(cone, z))
        assert np.all(np.diff(b) >= -1e-9 * max(1.0, np.abs(b).max()))
        az0 = cone.a * to_cone_coordinates(cone, z).z0
        bext = np.concatenate([[-np.inf], b, [np.inf]])
        hits = [m for m in range(len(b) + 1) if bext[m] < az0 <= bext[m + 1]]
        assert hits == [wit.m]

    @settings(max_examples=200, deadline=None)
    @given(cone_and_point(), st.lists(st.floats(-5, 5), min_size=7, max_size=7))
    def test_nonexpansive(self, cz, other):
        cone, z = cz
        z2 = np.array(other[: cone.d])
        p1, p2 = project_point(cone, z).pi, project_point(cone, z2).pi
        assert np.linalg.norm(p1 - p2) <= np.linalg.norm(z - z2) + 1e-9
