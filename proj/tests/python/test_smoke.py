import math

import numpy as np
import pytest

import spherecal


def test_normalize():
    out = spherecal.normalize(np.array([[3.0, 4.0], [0.0, 2.0]]))
    assert out == pytest.approx(np.array([[0.6, 0.8], [0.0, 1.0]]))


def test_angle_matrix_right_angle():
    th = spherecal.angle_matrix(np.array([[1.0, 0.0], [0.0, 5.0]]))
    assert th[0, 1] == pytest.approx(math.pi / 2)
    assert th[0, 0] == 0.0


def test_angular_diversity_equilateral():
    tri = np.array([[1.0, 0.0],
                    [-0.5, math.sqrt(3) / 2],
                    [-0.5, -math.sqrt(3) / 2]])
    value, grad = spherecal.angular_diversity(tri)
    assert value == pytest.approx(-2 * math.pi / 3, abs=1e-9)
    assert grad.shape == (3, 2)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((5, 4))
    _, grad = spherecal.angular_diversity(feats)
    numeric = spherecal.finite_diff_gradient("angular_diversity", feats)
    assert grad == pytest.approx(numeric, rel=1e-4, abs=1e-7)


def test_gradnorm_laws():
    measured, predicted = spherecal.verify_angular_gradnorm_law(
        np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert measured == pytest.approx(1.0)
    assert predicted == 1.0
    curve = spherecal.gradnorm_curve([math.pi / 6])
    assert curve[0, 1] == pytest.approx(0.5)
    assert curve[0, 2] == pytest.approx(1.0)


def test_ece_two_bin_oracle():
    probs = np.array([[0.9, 0.1]] * 4 + [[2 / 3, 1 / 3]] * 6)
    labels = [0, 0, 0, 1] + [0, 0, 0, 0, 1, 1]
    report = spherecal.compute_ece(probs, labels, n_bins=4)
    assert report["ece"] == pytest.approx(0.06, abs=1e-12)
    assert report["n_bins"] == 4
    assert len(report["bins"]) == 4


def test_weighted_average():
    assert spherecal.weighted_average([(2465, 2.76), (8100, 3.92)]) == pytest.approx(
        3.649351632749645)


def test_solve_tammes_square():
    points, min_angle, runs = spherecal.solve_tammes(4, 2, restarts=2, steps=3000)
    assert points.shape == (4, 2)
    assert min_angle == pytest.approx(math.pi / 2, abs=math.radians(1.0))
    assert len(runs) == 2
    assert spherecal.tammes_reference(4, 2) == pytest.approx(math.pi / 2)
    assert spherecal.tammes_reference(9, 7) is None


def test_run_episode():
    result = spherecal.run_episode({
        "n_classes": 5,
        "dim": 6,
        "n_samples": 10,
        "noise_sigma": 0.25,
        "master_seed": 0,
    })
    assert len(result["records"]) == 10
    assert 0.0 <= result["calibration"]["ece"] <= 1.0
    assert result["mean_min_angle"] > 0.0


def test_tune_features_trace():
    rng = np.random.default_rng(1)
    feats = rng.standard_normal((4, 6))
    image = rng.standard_normal(6)
    tuned, trace = spherecal.tune_features(feats, image, steps=3, lam=10.0)
    assert tuned.shape == feats.shape
    assert len(trace) == 3
    norms = np.linalg.norm(tuned, axis=1)
    assert norms == pytest.approx(np.ones(4), abs=1e-10)
