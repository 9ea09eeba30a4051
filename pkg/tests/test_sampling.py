import numpy as np
import pytest

from netlap import geometry as geo
from netlap import sampling
from netlap.sampling import (Net, SamplerConfig, SamplingError, assign_weights,
                             load_net_csv, sample_net, save_net_csv, verify_net)


class TestGridSampler:
    def test_interval_midpoint_grid(self, interval):
        net = sample_net(interval, SamplerConfig("grid", 0.1))
        assert np.allclose(np.sort(net.coords[:, 0]), np.arange(10) * 0.1 + 0.05)
        assert np.allclose(net.mu, 0.1)
        assert net.epsilon == pytest.approx(0.05)

    def test_circle_grid_avoids_origin(self, unit_circle):
        net = sample_net(unit_circle, SamplerConfig("grid", 0.02))
        assert np.all(net.coords[:, 0] > 0)
        assert np.allclose(net.mu, net.mu[0])

    def test_rectangle_grid_covering(self, square):
        net = sample_net(square, SamplerConfig("grid", 0.1, mc_probes=40_000))
        rep = verify_net(square, net, probe_step=net.epsilon / 5)
        assert rep.covered

    def test_weight_total_exact(self, circles21):
        net = sample_net(circles21, SamplerConfig("grid", 0.05))
        assert net.mu.sum() == pytest.approx(3.0, rel=1e-12)


class TestRandomSamplers:
    def test_uniform_covering_certified(self, circles11):
        net = sample_net(circles11, SamplerConfig("uniform_random", 0.02, seed=1))
        rep = verify_net(circles11, net)
        assert rep.covered
        assert rep.covering_radius <= 0.02

    def test_deterministic_given_seed(self, interval):
        cfg = SamplerConfig("uniform_random", 0.01, seed=7)
        a = sample_net(interval, cfg)
        b = sample_net(interval, cfg)
        assert np.array_equal(a.coords, b.coords)
        assert np.array_equal(a.mu, b.mu)

    def test_clustered_density_ratio(self, interval):
        eps = 0.02
        net = sample_net(interval, SamplerConfig("clustered", eps, seed=7, locus_bias=10.0))
        x = net.coords[:, 0]
        zone = (x < eps) | (x > 1.0 - eps)
        density_ratio = np.mean(zone) / (2 * eps)
        assert density_ratio >= 3.0
        rep = verify_net(interval, net)
        assert rep.covered
        assert rep.min_separation < eps / 3  # piled points sit far closer than eps

    def test_clustered_anchor_restriction(self, interval):
        eps = 0.02
        net = sample_net(interval, SamplerConfig(
            "clustered", eps, seed=7, locus_bias=10.0, anchors=((0, 0.0),)))
        x = net.coords[:, 0]
        assert np.mean(x < eps) > 5 * np.mean(x > 1.0 - eps)

    def test_clustered_2d_edge_pile(self, square):
        eps = 0.08
        net = sample_net(square, SamplerConfig("clustered", eps, seed=4,
                                               locus_bias=8.0, mc_probes=60_000))
        rep = verify_net(square, net, probe_step=eps / 5)
        assert rep.covered
        assert np.all(net.mu > 0)
        d_edge = np.min(np.column_stack([net.coords, 1.0 - net.coords]), axis=1)
        # the pile outweighs the uniform collar share even after the covering
        # repair adds interior points
        frac = np.mean(d_edge < eps)
        assert frac > 1.5 * (1 - (1 - 2 * eps) ** 2)

    def test_bias_below_one_rejected(self, interval):
        with pytest.raises(SamplingError):
            sample_net(interval, SamplerConfig("clustered", 0.02, locus_bias=0.5))

    def test_points_off_boundary_and_vertices(self, circ_seg):
        net = sample_net(circ_seg, SamplerConfig("clustered", 0.02, seed=3, locus_bias=20.0))
        for pid, c in zip(net.part_ids, net.coords[:, 0]):
            part = circ_seg.part(int(pid))
            if part.shape == geo.SEGMENT:
                assert 0.0 < c < part.extent[0]


class TestWeights:
    def test_interval_midpoint_cells(self, interval):
        net = Net(interval, np.zeros(3, int), np.array([0.25, 0.5, 0.75]),
                  np.ones(3), 0.25)
        assign_weights(net)
        assert np.allclose(net.mu, [0.375, 0.25, 0.375])

    def test_circle_equispaced(self, unit_circle):
        pts = (np.arange(10) + 0.3) / 10.0
        net = Net(unit_circle, np.zeros(10, int), pts, np.ones(10), 0.1)
        assign_weights(net)
        assert np.allclose(net.mu, 0.1)

    def test_rectangle_jittered_grid_total(self, square, rng):
        g = (np.arange(32) + 0.5) / 32.0
        X, Y = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        pts += rng.uniform(-0.2 / 32, 0.2 / 32, pts.shape)
        net = Net(square, np.zeros(1024, int), pts, np.ones(1024), 0.04)
        assign_weights(net, mc_probes=1_000_000)
        # count-proportional estimates make the total exact
        assert net.mu.sum() == pytest.approx(1.0, rel=1e-12)
        assert net.mu_sigma is not None and np.all(net.mu_sigma > 0)
        # cells of a mildly jittered grid stay near the exact grid volume
        assert np.max(np.abs(net.mu - 1.0 / 1024)) < 5e-4

    def test_midpoint_tie_goes_to_lower_index(self, interval):
        net = Net(interval, np.zeros(2, int), np.array([0.25, 0.75]), np.ones(2), 0.3)
        assign_weights(net)
        owner, _ = net.nearest(0, np.array([0.5]))
        assert owner[0] == 0

    def test_weights_positive(self, circles11):
        net = sample_net(circles11, SamplerConfig("clustered", 0.02, seed=2, locus_bias=5.0))
        assert np.all(net.mu > 0)

    def test_non_covering_rejected_in_mc(self, square):
        pts = np.array([[0.1, 0.1], [0.2, 0.3]])
        net = Net(square, np.zeros(2, int), pts, np.ones(2), 0.05)
        with pytest.raises(SamplingError):
            assign_weights(net, mc_probes=20_000)


class TestVerifyNet:
    def test_grid_report(self, interval):
        net = sample_net(interval, SamplerConfig("grid", 0.1))
        rep = verify_net(interval, net)
        assert rep.covering_radius <= 0.05 + 0.005
        assert rep.weight_sum_residual == pytest.approx(0.0, abs=1e-12)

    def test_deleted_point_flagged(self, interval):
        net = sample_net(interval, SamplerConfig("grid", 0.1))
        keep = net.coords[:, 0] != 0.55
        broken = Net(interval, net.part_ids[keep], net.coords[keep],
                     net.mu[keep], net.epsilon)
        rep = verify_net(interval, broken)
        assert not rep.covered


class TestNetCsv:
    def test_roundtrip_exact(self, circles11, tmp_path):
        net = sample_net(circles11, SamplerConfig("uniform_random", 0.05, seed=9))
        path = tmp_path / "net.csv"
        save_net_csv(net, path)
        back = load_net_csv(circles11, path, net.epsilon)
        assert np.array_equal(back.part_ids, net.part_ids)
        assert np.array_equal(back.coords[:, 0], net.coords[:, 0])
        assert np.array_equal(back.mu, net.mu)
        header = path.read_text().splitlines()[0]
        assert header == sampling.NET_CSV_HEADER

    def test_roundtrip_2d(self, square, tmp_path):
        net = sample_net(square, SamplerConfig("grid", 0.2, mc_probes=40_000))
        path = tmp_path / "net2d.csv"
        save_net_csv(net, path)
        back = load_net_csv(square, path, net.epsilon)
        assert np.array_equal(back.coords, net.coords)
        assert np.array_equal(back.mu, net.mu)
