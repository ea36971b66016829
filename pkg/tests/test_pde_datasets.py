from __future__ import annotations

import math

import numpy as np
import pytest

from dpasr.aph import AphConfig
from dpasr.pde_datasets import (
    Dataset,
    UnknownSystem,
    diffusion_reaction_source,
    diffusion_reaction_truth,
    diffusion_truth,
    evaluation_set,
    kovasznay_lambda,
    kovasznay_truth,
    sample_dataset,
    system_info,
    taylor_green_truth,
)

SMALL_APH = AphConfig(grid=(21, 21))


def central(f, a, h):
    return (f(a + h) - f(a - h)) / (2 * h)


class TestDiffusion:
    def test_values(self):
        assert diffusion_truth(0.5, 0.0) == pytest.approx(1.0, abs=1e-15)
        assert diffusion_truth(0.0, 0.7) == 0.0
        assert diffusion_truth(0.5, 1.0) == pytest.approx(0.3678794, abs=1e-7)

    def test_pde_residual(self):
        rng = np.random.default_rng(0)
        x, t, h = rng.uniform(0.01, 0.99, 100), rng.uniform(0.01, 0.99, 100), 1e-4
        u = diffusion_truth
        u_t = central(lambda s: u(x, s), t, h)
        u_xx = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / h**2
        res = u_t - u_xx + np.exp(-t) * np.sin(np.pi * x) * (1 - np.pi**2)
        assert np.abs(res).max() < 1e-4


class TestKovasznay:
    def test_lambda(self):
        assert kovasznay_lambda(20.0) == pytest.approx(-1.8101, abs=1e-4)
        with pytest.raises(ValueError):
            kovasznay_lambda(0.0)

    def test_values(self):
        u, v, p = kovasznay_truth(0.0, 0.0)
        assert (u, v, p) == (0.0, 0.0, 0.0)
        x = np.linspace(-0.5, 1.0, 7)
        np.testing.assert_array_equal(kovasznay_truth(x, np.zeros(7))[1], 0.0)

    def test_navier_stokes_residual(self):
        # steady NS with nu = 1/Re; an independent check of the lambda formula
        re, nu = 20.0, 1 / 20.0
        rng = np.random.default_rng(1)
        x, y = rng.uniform(-0.5, 1.0, 100), rng.uniform(-0.5, 1.5, 100)
        f = lambda a, b: np.array(kovasznay_truth(a, b, re))  # noqa: E731
        h, h2 = 1e-5, 1e-4
        val = f(x, y)
        dx = (f(x + h, y) - f(x - h, y)) / (2 * h)
        dy = (f(x, y + h) - f(x, y - h)) / (2 * h)
        lap = (f(x + h2, y) + f(x - h2, y) + f(x, y + h2) + f(x, y - h2) - 4 * val) / h2**2
        u, v = val[0], val[1]
        assert np.abs(dx[0] + dy[1]).max() < 1e-6
        assert np.abs(u * dx[0] + v * dy[0] + dx[2] - nu * lap[0]).max() < 1e-5
        assert np.abs(u * dx[1] + v * dy[1] + dy[2] - nu * lap[1]).max() < 1e-5


class TestTaylorGreen:
    def test_origin(self):
        u, v, p = taylor_green_truth(0.0, 0.0, 0.0)
        assert u == 0.0 and v == 0.0 and p == -0.5

    def test_decay(self):
        decay = math.exp(-2 * math.pi**2 * 0.01 * 10)
        rng = np.random.default_rng(2)
        x, y = rng.uniform(0, 2, 200), rng.uniform(0, 2, 200)
        u, v, p = taylor_green_truth(x, y, 10.0)
        u0, v0, p0 = taylor_green_truth(x, y, 0.0)
        np.testing.assert_allclose(u, u0 * decay, atol=1e-15)
        assert np.abs(u).max() <= decay
        assert np.abs(taylor_green_truth(x, y, 1e4)[0]).max() < 1e-8

    def test_divergence_free(self):
        rng = np.random.default_rng(3)
        x, y, t = rng.uniform(0, 2, 100), rng.uniform(0, 2, 100), rng.uniform(0, 1, 100)
        h = 1e-5
        du = central(lambda s: taylor_green_truth(s, y, t)[0], x, h)
        dv = central(lambda s: taylor_green_truth(x, s, t)[1], y, h)
        assert np.abs(du + dv).max() < 1e-6

    def test_invalid_viscosity(self):
        with pytest.raises(ValueError):
            taylor_green_truth(0.0, 0.0, 0.0, nu=0.0)


class TestDiffusionReaction:
    def test_zeros(self):
        for t in (0.0, 0.5, 1.0):
            assert diffusion_reaction_truth(0.0, t) == 0.0
            assert abs(diffusion_reaction_truth(np.pi, t)) < 1e-14
            assert abs(diffusion_reaction_truth(-np.pi, t)) < 1e-14

    def test_sub_terms(self):
        x, t = 0.7, 0.3
        p = (12 * math.sin(x) * (1 + math.cos(x)) + 4 * math.sin(3 * x)) / 12
        q = math.sin(4 * x) * (1 + math.cos(4 * x)) / 4
        assert diffusion_reaction_truth(x, t) == pytest.approx(math.exp(-t) * (p + q), rel=1e-14)

    def test_pde_residual(self):
        rng = np.random.default_rng(4)
        x, t, h = rng.uniform(-3.1, 3.1, 100), rng.uniform(0.01, 0.99, 100), 1e-4
        u = diffusion_reaction_truth
        u_t = central(lambda s: u(x, s), t, h)
        u_xx = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / h**2
        res = u_t - u_xx - np.exp(-t) * diffusion_reaction_source(x)
        assert np.abs(res).max() < 1e-4


class TestSampling:
    def test_diffusion_split(self):
        ds = sample_dataset("diffusion", seed=0)
        assert len(ds) == 10201
        assert ds.count("test") == 2701
        assert ds.count("train") + ds.count("validation") == 7500
        assert ds.count("validation") == 750
        x = ds.inputs
        assert x[:, 0].min() == 0.0 and x[:, 0].max() == 1.0
        np.testing.assert_array_equal(ds.targets["u"], diffusion_truth(x[:, 0], x[:, 1]))

    def test_splits_disjoint_and_complete(self):
        ds = sample_dataset("diffusion_reaction", seed=3)
        masks = [ds.mask(s) for s in ("train", "validation", "test")]
        assert np.all(sum(m.astype(int) for m in masks) == 1)
        assert ds.inputs[:, 0].min() == pytest.approx(-np.pi)

    def test_kovasznay_grid(self):
        ds = sample_dataset("kovasznay", seed=0)
        assert len(ds) == 10201
        assert ds.outputs == ("u", "v", "p")
        assert ds.inputs[:, 1].max() == 1.5

    def test_taylor_green_points(self):
        ds = sample_dataset("taylor_green", seed=0)
        assert len(ds) == 25_000
        xy = ds.inputs[:, :2]
        assert np.all((xy > 0) & (xy < 2))
        t = ds.inputs[:, 2]
        np.testing.assert_allclose(t * 10, np.round(t * 10), atol=1e-12)
        assert t.min() == 0.0 and t.max() == 1.0

    def test_determinism(self):
        a = sample_dataset("diffusion", seed=5)
        b = sample_dataset("diffusion", seed=5)
        c = sample_dataset("diffusion", seed=6)
        assert a.to_csv() == b.to_csv()
        assert not np.array_equal(a.split, c.split)

    def test_unknown_system(self):
        with pytest.raises(UnknownSystem, match="burgers"):
            sample_dataset("burgers")

    def test_aph(self):
        ds = sample_dataset("aph", seed=0, aph_config=SMALL_APH)
        assert len(ds) == 21 * 21
        assert ds.outputs == system_info("aph").outputs
        assert system_info("aph").headline_metric == "mae"
        assert ds.meta["sweeps"] >= 1


class TestEvaluationSet:
    @pytest.mark.parametrize("system", ["diffusion", "kovasznay", "taylor_green", "diffusion_reaction"])
    def test_size_and_domain(self, system):
        ev = evaluation_set(system, seed=0)
        assert len(ev) == 10_000
        assert ev.count("test") == 10_000
        for col, (lo, hi) in zip(ev.inputs.T, system_info(system).bounds):
            assert col.min() >= lo and col.max() <= hi

    def test_independent_of_training_grid(self):
        ev = evaluation_set("diffusion", seed=0)
        grid = sample_dataset("diffusion", seed=0).inputs
        shared = {tuple(r) for r in grid} & {tuple(r) for r in ev.inputs}
        assert len(shared) == 0

    def test_aph_interpolation_matches_grid_nodes(self):
        ev = evaluation_set("aph", n=200, seed=1, aph_config=SMALL_APH)
        ds = sample_dataset("aph", aph_config=SMALL_APH)
        for name in ds.outputs:
            assert ev.targets[name].min() >= ds.targets[name].min() - 1e-12
            assert ev.targets[name].max() <= ds.targets[name].max() + 1e-12


class TestDatasetType:
    def test_csv_round_trip(self):
        ds = sample_dataset("kovasznay", seed=1, grid_points=11)
        back = Dataset.from_csv(ds.to_csv(), "kovasznay")
        np.testing.assert_array_equal(back.inputs, ds.inputs)
        for k in ds.outputs:
            np.testing.assert_array_equal(back.targets[k], ds.targets[k])
        np.testing.assert_array_equal(back.split, ds.split)

    def test_rejects_non_finite_targets(self):
        with pytest.raises(ValueError):
            Dataset("diffusion", ("x", "t"), np.zeros((2, 2)), {"u": [0.0, np.nan]}, ["train", "test"])

    def test_rejects_bad_split(self):
        with pytest.raises(ValueError):
            Dataset("diffusion", ("x", "t"), np.zeros((1, 2)), {"u": [0.0]}, ["holdout"])

    def test_pair(self):
        ds = sample_dataset("diffusion", seed=0, grid_points=11)
        inputs, y = ds.pair("u", "train")
        assert set(inputs) == {"x", "t"}
        assert y.shape == (ds.count("train"),)
