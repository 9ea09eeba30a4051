import math
import warnings

import numpy as np
import pytest
import scipy.linalg

from netlap import geometry as geo
from netlap import laplacian as lap
from netlap.geometry import GeometryError
from netlap.laplacian import build, directed_multiplicity, laplacian_scale
from netlap.sampling import Net, SamplerConfig, assign_weights, sample_net


def three_point_net(interval):
    net = Net(interval, np.zeros(3, int), np.array([0.25, 0.5, 0.75]), np.ones(3), 0.25)
    assign_weights(net)
    return net


@pytest.fixture
def net3(interval):
    return three_point_net(interval)


class TestDirectedMultiplicity:
    def test_interior_pair(self, interval):
        net = Net(interval, np.zeros(2, int), np.array([0.5, 0.6]), np.ones(2), 0.3)
        assign_weights(net)
        assert directed_multiplicity(interval, net, 0, 1, 0.3, "boundary") == 1

    def test_boundary_pair_counts_twice(self, interval):
        net = Net(interval, np.zeros(2, int), np.array([0.05, 0.1]), np.ones(2), 0.3)
        assign_weights(net)
        assert directed_multiplicity(interval, net, 0, 1, 0.3, "boundary") == 2
        assert directed_multiplicity(interval, net, 0, 1, 0.3, "closed") == 1

    def test_cross_part_via_mirror(self, circles11):
        net = Net(circles11, np.array([0, 1]), np.array([0.05, 0.1]), np.ones(2), 0.3)
        assign_weights(net)
        assert directed_multiplicity(circles11, net, 0, 1, 0.3, "glued") == 1
        # without mirrors the parts stay disconnected
        assert directed_multiplicity(circles11, net, 0, 1, 0.3, "closed") == 0

    def test_matches_assembly(self, circles11, rng):
        net = sample_net(circles11, SamplerConfig("uniform_random", 0.04, seed=5))
        L = build(circles11, net, 0.2, "glued")
        idx = rng.integers(0, net.n_points, size=(150, 2))
        for i, j in idx:
            if i == j:
                continue
            m = 0.5 * (directed_multiplicity(circles11, net, int(i), int(j), 0.2, "glued")
                       + directed_multiplicity(circles11, net, int(j), int(i), 0.2, "glued"))
            assert L.weights[int(i), int(j)] == pytest.approx(m)


class TestBuild:
    def test_three_point_example(self, interval, net3):
        L = build(interval, net3, 0.3, "boundary")
        assert L.scale == pytest.approx(2 * 3 / (2 * 0.3**3))
        assert L.scale == pytest.approx(111.111111111, rel=1e-9)
        W = L.weights.toarray()
        assert W[0, 1] == 1 and W[1, 2] == 1 and W[0, 2] == 0
        assert np.allclose(W, W.T)

    def test_three_point_wider_rho(self, interval, net3):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            L = build(interval, net3, 0.6, "boundary")
        W = L.weights.toarray()
        # reflected self-pairs drop; only the plain pair 0-2 enters
        assert W[0, 1] == 1 and W[1, 2] == 1 and W[0, 2] == 1
        assert np.all(np.diag(W) == 0)

    def test_closed_on_circle_is_intro_operator(self, unit_circle):
        net = sample_net(unit_circle, SamplerConfig("grid", 0.02))
        a = build(unit_circle, net, 0.1, "closed")
        b = build(unit_circle, net, 0.1, "boundary")
        c = build(unit_circle, net, 0.1, "glued")
        assert (a.weights != b.weights).nnz == 0
        assert (a.weights != c.weights).nnz == 0

    def test_multiplicity_range(self, circles11):
        # tie-free net: symmetrized counts are half-integers
        net = sample_net(circles11, SamplerConfig("uniform_random", 0.01, seed=2))
        L = build(circles11, net, 0.1, "glued")
        vals = np.unique(L.weights.data)
        assert np.all(vals * 2 == np.round(vals * 2))
        assert vals.max() <= 2 * (len(circles11.parts) + 1)
        # tie-aligned grid: the half-weight tie band can add quarter steps
        net_g = sample_net(circles11, SamplerConfig("grid", 0.01))
        L_g = build(circles11, net_g, 0.1, "glued")
        vals_g = np.unique(L_g.weights.data)
        assert np.all(vals_g * 4 == np.round(vals_g * 4))

    def test_interior_equivalence_bit_identical(self, circ_seg):
        # all points far from the vertex and the free end
        pts = np.linspace(0.3, 0.7, 30)
        net = Net(circ_seg, np.concatenate([np.zeros(30, int), np.ones(30, int)]),
                  np.concatenate([pts, pts]), np.ones(60), 0.02)
        assign_weights(net)
        variants = [build(circ_seg, net, 0.05, v) for v in ("closed", "boundary", "glued")]
        for other in variants[1:]:
            assert (variants[0].weights != other.weights).nnz == 0
            assert np.array_equal(variants[0].weights.data, other.weights.data)

    def test_rho_guard(self, circles11):
        net = sample_net(circles11, SamplerConfig("grid", 0.02))
        with pytest.raises(GeometryError):
            build(circles11, net, 0.45, "glued")

    def test_book_pages_glued_assembly(self, rng):
        book = geo.book_pages(3, 1.0, 1.0)
        net = sample_net(book, SamplerConfig("grid", 0.1, mc_probes=60_000))
        rho = 0.2
        L = build(book, net, rho, "glued")
        assert np.all(L.apply(np.ones(net.n_points)) == 0.0)
        A, _ = L.to_weighted_symmetric()
        Ad = A.toarray()
        assert np.max(np.abs(Ad - Ad.T)) < 1e-12
        # cross-page pairs need one endpoint inside the spine collar and
        # reach at most rho beyond it
        W = L.weights.tocoo()
        cross = net.part_ids[W.row] != net.part_ids[W.col]
        assert np.any(cross)
        thr = rho**0.75
        x_lo = np.minimum(net.coords[W.row[cross], 0], net.coords[W.col[cross], 0])
        x_hi = np.maximum(net.coords[W.row[cross], 0], net.coords[W.col[cross], 0])
        assert np.all(x_lo < thr)
        assert np.all(x_hi < thr + rho)
        # assembly matches the scalar directed counts on a sample
        idx = rng.integers(0, net.n_points, size=(60, 2))
        for i, j in idx:
            if i == j:
                continue
            m = 0.5 * (directed_multiplicity(book, net, int(i), int(j), rho, "glued")
                       + directed_multiplicity(book, net, int(j), int(i), rho, "glued"))
            assert L.weights[int(i), int(j)] == pytest.approx(m)

    def test_margin_warning(self, interval, net3):
        with pytest.warns(UserWarning, match="4\\*epsilon"):
            build(interval, net3, 0.6, "boundary")

    def test_one_point_per_part(self, circles11):
        # minimal glued nets: the mirror coupling alone connects the parts
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            far = Net(circles11, np.array([0, 1]), np.array([0.5, 0.5]), np.ones(2), 0.5)
            assign_weights(far)
            assert np.allclose(far.mu, 1.0)
            L_far = build(circles11, far, 0.3, "glued")
            near = Net(circles11, np.array([0, 1]), np.array([0.1, 0.2]), np.ones(2), 0.5)
            assign_weights(near)
            L_near = build(circles11, near, 0.3, "glued")
        assert L_far.weights.nnz == 0    # antipodal points sit beyond the collar
        assert np.all(L_far.apply(np.array([1.0, -1.0])) == 0.0)
        assert L_near.weights[0, 1] == 1.0


class TestOperator:
    def test_constants_in_kernel(self, interval, net3):
        L = build(interval, net3, 0.3, "boundary")
        assert np.all(L.apply(np.ones(3)) == 0.0)

    def test_two_point_action(self, interval):
        net = Net(interval, np.zeros(2, int), np.array([0.4, 0.6]), np.ones(2), 0.25)
        assign_weights(net)
        net.mu = np.ones(2)
        L = build(interval, net, 0.3, "closed")
        s = L.scale
        out = L.apply(np.array([0.0, 1.0]))
        assert np.allclose(out, [s, -s])

    def test_three_point_hand_expansion(self, interval, net3):
        L = build(interval, net3, 0.3, "boundary")
        s = L.scale
        out = L.apply(np.array([1.0, 0.0, 0.0]))
        # row 0: m01*mu1*(u1-u0); row 1: m01*mu0*(u0-u1); row 2: nothing
        assert out[0] == pytest.approx(s * 0.25 * (-1.0))
        assert out[1] == pytest.approx(s * 0.375 * (1.0))
        assert out[2] == pytest.approx(0.0)

    def test_dimension_mismatch(self, interval, net3):
        L = build(interval, net3, 0.3, "boundary")
        with pytest.raises(ValueError):
            L.apply(np.ones(4))

    def test_energy_constant_zero(self, interval, net3):
        L = build(interval, net3, 0.3, "boundary")
        assert L.dirichlet_energy(np.full(3, 2.5)) == 0.0

    def test_energy_two_point(self, interval):
        net = Net(interval, np.zeros(2, int), np.array([0.4, 0.6]), np.ones(2), 0.25)
        assign_weights(net)
        net.mu = np.ones(2)
        L = build(interval, net, 0.3, "closed")
        assert L.dirichlet_energy(np.array([0.0, 1.0])) == pytest.approx(L.scale)

    def test_energy_matches_quadratic_form(self, interval, rng):
        net = sample_net(interval, SamplerConfig("grid", 0.01))
        L = build(interval, net, 0.05, "boundary")
        u = rng.standard_normal(net.n_points)
        direct = float(-L.apply(u) @ (net.mu * u))
        assert L.dirichlet_energy(u) == pytest.approx(direct, rel=1e-10)
        # independent dense double-sum oracle
        W = L.weights.toarray()
        mu = net.mu
        double = 0.5 * L.scale * float(
            np.sum(W * np.outer(mu, mu) * (u[:, None] - u[None, :]) ** 2))
        assert L.dirichlet_energy(u) == pytest.approx(double, rel=1e-10)


class TestWeightedSymmetric:
    def test_equal_weights_matches_minus_l(self, interval):
        net = Net(interval, np.zeros(4, int), np.array([0.2, 0.4, 0.6, 0.8]),
                  np.ones(4), 0.25)
        assign_weights(net)
        net.mu = np.full(4, 0.25)
        L = build(interval, net, 0.25, "closed")
        A, _ = L.to_weighted_symmetric()
        for u in np.eye(4):
            assert np.allclose(A @ u, -L.apply(u))

    def test_symmetry_and_psd(self, interval, net3, rng):
        L = build(interval, net3, 0.3, "boundary")
        A, _ = L.to_weighted_symmetric()
        Ad = A.toarray()
        assert np.max(np.abs(Ad - Ad.T)) < 1e-12
        w = scipy.linalg.eigvalsh(Ad)
        assert w[0] >= -1e-9 * L.scale
        for _ in range(50):
            u = rng.standard_normal(3)
            assert u @ (Ad @ u) >= -1e-9 * L.scale

    def test_matches_generalized_eigenproblem(self, interval, rng):
        net = sample_net(interval, SamplerConfig("uniform_random", 0.05, seed=4))
        L = build(interval, net, 0.2, "boundary")
        A, _ = L.to_weighted_symmetric()
        w = scipy.linalg.eigvalsh(A.toarray())
        minus_l = np.column_stack([-L.apply(u) for u in np.eye(net.n_points)])
        wg = scipy.linalg.eigvalsh(np.diag(net.mu) @ minus_l, np.diag(net.mu))
        assert np.allclose(np.sort(w), np.sort(wg), atol=1e-10 * L.scale)

    def test_nonpositive_weight_rejected(self, interval, net3):
        L = build(interval, net3, 0.3, "boundary")
        L.mu = L.mu.copy()
        L.mu[0] = 0.0
        with pytest.raises(ValueError):
            L.to_weighted_symmetric()


class TestDoublingConsistency:
    def test_interval_energy_is_half_double_circle(self, interval, rng):
        net = sample_net(interval, SamplerConfig("uniform_random", 0.01, seed=13))
        rho = 0.05
        L_int = build(interval, net, rho, "boundary")
        circle2 = geo.circle(2.0)
        x = net.coords[:, 0]
        xd = np.concatenate([x, 2.0 - x])
        net_d = Net(circle2, np.zeros(2 * net.n_points, int), xd,
                    np.ones(2 * net.n_points), net.epsilon)
        assign_weights(net_d)
        assert np.allclose(net_d.mu, np.concatenate([net.mu, net.mu]))
        L_circ = build(circle2, net_d, rho, "closed")
        for _ in range(5):
            u = rng.standard_normal(net.n_points)
            ud = np.concatenate([u, u])
            assert L_int.dirichlet_energy(u) == pytest.approx(
                0.5 * L_circ.dirichlet_energy(ud), rel=1e-9)


class TestExport:
    def test_matrix_export_format(self, interval, net3, tmp_path):
        L = build(interval, net3, 0.3, "boundary")
        path = tmp_path / "matrix.txt"
        L.export_matrix(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# N=3 scale=")
        assert "variant=boundary" in lines[0]
        i, j, v = lines[1].split()
        assert int(i) >= 0 and int(j) >= 0 and float(v) > 0

    def test_scale_values(self):
        assert laplacian_scale(1, 0.3) == pytest.approx(100.0 / 0.9)
        assert laplacian_scale(2, 0.1) == pytest.approx(8.0 / (math.pi * 1e-4))
