import math

import numpy as np
import pytest

from bergman_extremal.errors import DimensionError, IllConditionedError, RankDeficiencyError
from bergman_extremal.geometry import ProjectivePoint, section_local_values
from bergman_extremal.kernel import (
    COND_WARN,
    SectionSpaceBasis,
    bergman_log,
    bergman_log_many,
    bm_constant,
    gram_inner,
    orthonormality_defect,
    orthonormalize,
    section_space_dimension,
    trace_mass,
    weighted_bergman_log_at_nodes,
)
from bergman_extremal.measure import WeightedCompactSet, annulus_pair_set, circle_set, interval_set
from bergman_extremal.scenarios import get_scenario

ORIGIN = ProjectivePoint.affine(0.0)
INF = ProjectivePoint.infinity()


def test_dimension_formula():
    assert SectionSpaceBasis(7).dimension == 8
    assert section_space_dimension(4, 2) == 15
    assert section_space_dimension(3, 3) == 20
    for m in (1, 2, 3):
        ratios = [section_space_dimension(n, m) / n**m for n in (10, 100, 1000)]
        assert max(ratios) <= 2.0**m
    with pytest.raises(DimensionError):
        section_space_dimension(-1)


class TestGramInner:
    def test_monomials_on_circle(self):
        n = 6
        s = circle_set(1.0, 2 * n + 2)
        eye = np.eye(n + 1)
        for j in range(n + 1):
            assert gram_inner(eye[j], eye[j], s, n).real == pytest.approx(2.0**-n, rel=1e-12)
            for k in range(n + 1):
                if k != j:
                    assert abs(gram_inner(eye[j], eye[k], s, n)) <= 1e-14

    def test_zero_vector(self):
        s = circle_set(1.0, 16)
        assert gram_inner(np.zeros(4), np.ones(4), s, 3) == 0

    def test_conjugate_symmetric_and_positive(self):
        s = interval_set(64)
        rng = np.random.default_rng(0)
        a = rng.normal(size=6) + 1j * rng.normal(size=6)
        b = rng.normal(size=6) + 1j * rng.normal(size=6)
        assert gram_inner(a, b, s, 5) == pytest.approx(np.conj(gram_inner(b, a, s, 5)), rel=1e-13)
        assert gram_inner(a, a, s, 5).real > 0
        assert abs(gram_inner(a, a, s, 5).imag) <= 1e-15

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            gram_inner(np.ones(3), np.ones(4), circle_set(1.0, 8), 3)

    def test_rank_deficiency(self):
        with pytest.raises(RankDeficiencyError):
            gram_inner(np.ones(9), np.ones(9), circle_set(1.0, 4), 8)


class TestOrthonormalize:
    def test_circle_rows_span_scaled_monomials(self):
        n = 4
        K = orthonormalize(circle_set(1.0, 256), n)
        # orthonormal sections are 2^(n/2) z^j up to a unitary change of basis
        C = K.coeff_matrix
        assert C @ C.conj().T == pytest.approx(2.0**n * np.eye(n + 1), abs=1e-12)
        assert bergman_log(K, ORIGIN) == pytest.approx(4 * math.log(2), abs=1e-12)

    def test_degree_zero(self):
        s = interval_set(16, lambda p: 0.0)
        K = orthonormalize(s, 0)
        assert K.coeff_matrix.shape == (1, 1)
        assert abs(K.coeff_matrix[0, 0]) == pytest.approx(1.0, abs=1e-15)
        assert gram_inner(K.coeff_matrix[0], K.coeff_matrix[0], s, 0).real == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize(
        "wset,n",
        [
            (circle_set(1.0, 40), 16),
            (interval_set(128), 8),
            (annulus_pair_set(0.5, 1.0, 96), 12),
        ],
    )
    def test_discrete_orthonormality_through_gram_inner(self, wset, n):
        K = orthonormalize(wset, n)
        C = K.coeff_matrix
        G = np.array([[gram_inner(C[j], C[k], wset, n) for k in range(n + 1)] for j in range(n + 1)])
        assert np.max(np.abs(G - np.eye(n + 1))) <= 1e-8
        assert np.linalg.matrix_rank(C) == n + 1

    @pytest.mark.parametrize("scenario", ["circle", "interval", "annulus_pair"])
    @pytest.mark.parametrize("n", [1, 16, 64])
    def test_node_basis_orthonormal(self, scenario, n):
        K = orthonormalize(get_scenario(scenario).build(n), n)
        assert orthonormality_defect(K) <= 1e-12

    def test_permutation_invariance(self, grid):
        s = get_scenario("interval").build(16)
        perm = np.random.default_rng(3).permutation(len(s))
        a = bergman_log_many(orthonormalize(s, 16), grid.points)
        b = bergman_log_many(orthonormalize(s.permuted(perm), 16), grid.points)
        assert np.max(np.abs(a - b)) <= 1e-10

    @pytest.mark.parametrize(
        "wset,n",
        [(circle_set(1.0, 64), 12), (interval_set(256), 6), (interval_set(256), 8), (annulus_pair_set(0.5, 1.0, 128), 16)],
    )
    def test_gram_path_agrees(self, wset, n, grid):
        a = orthonormalize(wset, n, method="arnoldi")
        assert a.cond_estimate < 1e6
        b = orthonormalize(wset, n, method="gram")
        pts = list(grid.points) + list(wset.nodes[:7])
        assert np.max(np.abs(bergman_log_many(a, pts) - bergman_log_many(b, pts))) <= 1e-10

    def test_gram_path_refuses_ill_conditioned(self):
        with pytest.raises(IllConditionedError):
            orthonormalize(interval_set(512), 16, method="gram")

    def test_conditioning_warning_recorded(self):
        K = orthonormalize(interval_set(512), 64)
        assert K.cond_estimate > COND_WARN
        assert K.warnings and "condition" in K.warnings[0]
        assert not orthonormalize(circle_set(1.0, 256), 64).warnings

    def test_rank_deficiency(self):
        with pytest.raises(RankDeficiencyError, match="distinct nodes"):
            orthonormalize(circle_set(1.0, 6), 6)

    def test_duplicate_nodes_do_not_count(self):
        p = [ProjectivePoint.affine(x) for x in (0.1, 0.2, 0.1, 0.2, 0.1)]
        s = WeightedCompactSet(tuple(p), np.full(5, 0.2), np.zeros(5), "dup")
        with pytest.raises(RankDeficiencyError):
            orthonormalize(s, 2)

    def test_node_at_infinity_rejected(self):
        nodes = (ProjectivePoint.affine(0.1), ProjectivePoint.affine(0.5), INF)
        s = WeightedCompactSet(nodes, np.full(3, 1 / 3), np.zeros(3), "inf")
        with pytest.raises(RankDeficiencyError, match="infinity"):
            orthonormalize(s, 1)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            orthonormalize(circle_set(1.0, 8), 2, method="svd")

    def test_high_degree_representable(self):
        n = 512
        K = orthonormalize(circle_set(1.0, 4 * n + 8), n)
        vals = bergman_log_many(K, [ORIGIN, INF, ProjectivePoint.affine(1.0), ProjectivePoint.affine(0.5j)])
        assert np.all(np.isfinite(vals))
        assert vals[0] == pytest.approx(n * math.log(2), rel=1e-9)
        assert vals[2] == pytest.approx(math.log(n + 1), rel=1e-9)


class TestBergmanLog:
    def test_examples(self):
        K4 = orthonormalize(circle_set(1.0, 256), 4)
        assert math.exp(bergman_log(K4, ORIGIN)) == pytest.approx(16.0, rel=1e-12)
        assert math.exp(bergman_log(K4, INF)) == pytest.approx(16.0, rel=1e-12)
        K8 = orthonormalize(circle_set(1.0, 256), 8)
        assert bergman_log(K8, ProjectivePoint.affine(1.0)) == pytest.approx(math.log(9), abs=1e-12)

    def test_closed_form_on_circle(self, grid):
        # B_n(z) = sum_j |z|^(2j) / (1+|z|^2)^n * 2^n, both charts
        n = 10
        K = orthonormalize(circle_set(1.0, 64), n)
        for p in grid.points:
            r2 = abs(p.coord) ** 2
            expected = n * math.log(2) + math.log(sum(r2**j for j in range(n + 1))) - n * math.log1p(r2)
            assert bergman_log(K, p) == pytest.approx(expected, abs=1e-12)

    def test_matches_explicit_sum(self, grid):
        s = annulus_pair_set(0.5, 1.0, 64)
        K = orthonormalize(s, 6)
        vals = section_local_values(K.coeff_matrix, grid.points, 6)
        direct = np.log(np.sum(np.abs(vals) ** 2, axis=0))
        assert np.max(np.abs(bergman_log_many(K, grid.points) - direct)) <= 1e-10

    def test_positive_everywhere(self, grid):
        for scenario in ("circle", "interval", "annulus_pair"):
            K = orthonormalize(get_scenario(scenario).build(32), 32)
            assert np.all(np.isfinite(bergman_log_many(K, grid.points)))


class TestBernsteinMarkov:
    def test_examples(self):
        K = orthonormalize(circle_set(1.0, 256), 8)
        bm = bm_constant(K, circle_set(1.0, 256))
        assert bm.M_n == pytest.approx(9.0, rel=1e-12)
        s0 = interval_set(16, lambda p: 0.0)
        assert bm_constant(orthonormalize(s0, 0), s0).M_n == pytest.approx(1.0, abs=1e-14)

    def test_ties_resolve_to_lowest_index(self):
        s = circle_set(1.0, 64)
        assert bm_constant(orthonormalize(s, 5), s).argmax_node == 0

    def test_interval_argmax_at_endpoint(self):
        s = interval_set(512)
        bm = bm_constant(orthonormalize(s, 8), s)
        assert abs(s.nodes[bm.argmax_node].z()) == pytest.approx(max(abs(p.z()) for p in s.nodes))

    def test_kernel_from_other_set(self):
        K = orthonormalize(circle_set(1.0, 64), 4)
        with pytest.raises(DimensionError):
            bm_constant(K, circle_set(1.0, 32))

    def test_mean_value_lower_bound(self):
        for scenario in ("circle", "interval", "annulus_pair"):
            s = get_scenario(scenario).build(16)
            assert bm_constant(orthonormalize(s, 16), s).M_n >= 17 * (1 - 1e-12)

    @pytest.mark.parametrize("scenario", ["circle", "interval", "annulus_pair"])
    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_best_constant_against_random_sections(self, scenario, n):
        s = get_scenario(scenario).build(n, nodes=96)
        K = orthonormalize(s, n)
        bm = bm_constant(K, s)
        rng = np.random.default_rng(100 * n + len(scenario))
        coeffs = rng.normal(size=(10_000, n + 1)) + 1j * rng.normal(size=(10_000, n + 1))
        w = np.exp(-2 * n * s.q_values)
        sq = np.abs(section_local_values(coeffs, s.nodes, n)) ** 2 * w
        ratio = sq.max(axis=1) / (sq @ s.masses)
        assert ratio.max() <= bm.M_n * (1 + 1e-10)
        # the reproducing section at the maximizing node attains the constant
        vals = section_local_values(K.coeff_matrix, [s.nodes[bm.argmax_node]], n)[:, 0]
        rep = np.conj(vals) @ K.coeff_matrix
        sq_rep = np.abs(section_local_values(rep, s.nodes, n)[0]) ** 2 * w
        assert sq_rep.max() / (sq_rep @ s.masses) >= bm.M_n * 0.98
        assert sq_rep.max() / (sq_rep @ s.masses) == pytest.approx(bm.M_n, rel=1e-9)


class TestTrace:
    @pytest.mark.parametrize("scenario", ["circle", "interval", "annulus_pair"])
    def test_trace_equals_dimension(self, scenario):
        for n in (0, 3, 17, 40):
            s = get_scenario(scenario).build(n)
            assert trace_mass(orthonormalize(s, n), s) == pytest.approx(n + 1, rel=1e-8)

    def test_trace_scales_with_total_mass(self):
        nodes = tuple(ProjectivePoint.affine(np.exp(2j * np.pi * k / 32)) for k in range(32))
        s = WeightedCompactSet(nodes, np.full(32, 3.0 / 32), np.zeros(32), "heavy")
        K = orthonormalize(s, 5)
        # the mass-weighted trace is the dimension for any total mass
        assert trace_mass(K, s) == pytest.approx(6.0, rel=1e-12)
        assert bm_constant(K, s).M_n == pytest.approx(6.0 / 3.0, rel=1e-12)

    def test_weighted_node_values_shape(self):
        s = interval_set(64)
        assert weighted_bergman_log_at_nodes(orthonormalize(s, 4), s).shape == (64,)
