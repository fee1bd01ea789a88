import numpy as np
import pytest

from conftest import vector_matrix
from convclust.analysis import SynthSpec, ari, synth_generate
from convclust.dpgmm import (
    DpgmmConfig,
    expected_weights,
    fit,
    load_model,
    predict,
    save_model,
)
from convclust.errors import DataError
from convclust.points import scale_to_range


def separated_fixture(seed=0):
    pm, truth = synth_generate(SynthSpec(k_true=3, dim=2, n_points=600, separation=10, sigma=0.5, seed=seed))
    return scale_to_range(pm), truth


class TestFit:
    def test_bit_identical_for_same_seed(self):
        pm, _ = separated_fixture()
        cfg = DpgmmConfig(seed=5)
        r1, r2 = fit(pm, cfg), fit(pm, cfg)
        for name in ("gamma1", "gamma2", "m", "beta", "a", "b"):
            assert getattr(r1.model, name).tobytes() == getattr(r2.model, name).tobytes()
        assert r1.elbo_trace == r2.elbo_trace
        assert r1.converged == r2.converged

    def test_three_cluster_recovery(self):
        pm, truth = separated_fixture(seed=7)
        result = fit(pm, DpgmmConfig(seed=7))
        labels = predict(result.model, pm)
        assert ari(labels, truth) >= 0.95
        assert result.effective_components == 3
        assert result.converged

    def test_labels_ordered_by_mass(self):
        pm, _ = separated_fixture(seed=3)
        result = fit(pm, DpgmmConfig(seed=3))
        labels = predict(result.model, pm)
        counts = np.bincount(labels)
        occupied = counts[counts > 0]
        assert np.all(np.diff(occupied) <= 0)
        assert counts[0] == counts.max()

    def test_single_point(self):
        pm = vector_matrix(np.array([[2.0, -1.0]]), scaled=False)
        with pytest.warns(UserWarning):
            result = fit(pm, DpgmmConfig(seed=0))
        assert result.converged
        labels = predict(result.model, pm)
        # exactly one component carries the mass, centered near the point
        assert labels.tolist() == [0]
        assert np.allclose(result.model.m[0], [2.0, -1.0], atol=1e-6)
        assert expected_weights(result.model)[0] > 0.8

    def test_iterations_equals_trace_length(self):
        pm, _ = separated_fixture()
        result = fit(pm, DpgmmConfig(max_iter=4))
        assert result.iterations == len(result.elbo_trace) <= 4

    def test_empty_point_set(self):
        with pytest.raises(DataError, match="empty"):
            fit(vector_matrix(np.zeros((0, 2))), DpgmmConfig())

    def test_invariants_every_iteration(self):
        pm, _ = separated_fixture(seed=11)
        rows_ok, weights_ok = [], []

        def watch(iteration, model, phi, value):
            rows_ok.append(
                bool(np.all(phi >= 0.0)) and bool(np.allclose(phi.sum(axis=1), 1.0, atol=1e-9))
            )
            w = expected_weights(model)
            weights_ok.append(bool(np.all(w >= 0.0)) and abs(w.sum() - 1.0) < 1e-9)

        fit(pm, DpgmmConfig(seed=11), callback=watch)
        assert rows_ok and all(rows_ok)
        assert all(weights_ok)

    def test_elbo_trace_monotone(self):
        pm, _ = separated_fixture(seed=2)
        trace = np.array(fit(pm, DpgmmConfig(seed=2)).elbo_trace)
        assert np.all(np.diff(trace) >= -1e-6 * np.abs(trace[:-1]))

    def test_threads_agree_with_single_thread(self):
        pm, truth = separated_fixture(seed=4)
        r1 = fit(pm, DpgmmConfig(seed=4), threads=1)
        r4 = fit(pm, DpgmmConfig(seed=4), threads=4)
        assert predict(r1.model, pm).tolist() == predict(r4.model, pm).tolist()
        e1, e4 = r1.elbo_trace[-1], r4.elbo_trace[-1]
        assert abs(e1 - e4) <= 1e-6 * max(1.0, abs(e1))

    def test_alpha_default_matches_documented_configuration(self):
        cfg = DpgmmConfig()
        assert cfg.alpha == 0.2
        assert cfg.truncation == 50


class TestModelJson:
    def test_roundtrip_identical(self, tmp_path):
        pm, _ = separated_fixture(seed=9)
        result = fit(pm, DpgmmConfig(seed=9))
        path = tmp_path / "model.json"
        save_model(result, path)
        back = load_model(path)
        for name in ("gamma1", "gamma2", "m", "beta", "a", "b"):
            assert getattr(back.model, name).tobytes() == getattr(result.model, name).tobytes()
        assert back.model.alpha == result.model.alpha
        assert back.model.seed == result.model.seed
        assert back.elbo_trace == result.elbo_trace
        assert back.converged == result.converged

    def test_predict_after_load(self, tmp_path):
        pm, truth = separated_fixture(seed=6)
        result = fit(pm, DpgmmConfig(seed=6))
        path = tmp_path / "model.json"
        save_model(result, path)
        loaded = load_model(path).model
        assert predict(loaded, pm).tolist() == predict(result.model, pm).tolist()

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"alpha": 0.2}')
        with pytest.raises(DataError, match="missing"):
            load_model(path)
