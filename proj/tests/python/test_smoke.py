import json

import numpy as np
import pytest

import wrflow


def c2_flow():
    return wrflow.Flow(np.eye(2), [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])


def test_one_step_identity():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    r = g @ g.conj().T
    q, _ = np.linalg.qr(rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
    p = q @ q.conj().T
    phi = wrflow.wr_update(r, p)
    d = wrflow.dissipated(r, p)
    assert np.linalg.norm(r - phi - d) <= 1e-10 * np.linalg.norm(r)
    assert np.linalg.eigvalsh(phi).min() >= -1e-10 * np.linalg.norm(r, 2)
    s = wrflow.psd_sqrt(r)
    assert np.allclose(s @ s, r, atol=1e-10)


def test_worked_example():
    flow = c2_flow()
    assert flow.alpha == pytest.approx(1.0)
    assert flow.contraction == pytest.approx(0.5)
    assert flow.splitting
    assert np.allclose(flow.residual("1"), np.diag([0.0, 1.0]))
    assert np.allclose(flow.residual("12"), 0.0)
    x = np.array([1.0, 1.0]) / np.sqrt(2.0)
    assert np.allclose(flow.transition("", "energy", x), [0.5, 0.5])
    values, errors = flow.expectation_profile(2, "energy", x)
    assert np.allclose(values, [1.0, 0.5, 0.0], atol=1e-12)
    assert errors == [0.0, 0.0, 0.0]


def test_sampling_and_frames():
    flow = c2_flow()
    samples = flow.sample_branches(20, seed=3, kind="trace")
    assert all(sorted(s["letters"]) == [1, 2] for s in samples)
    assert all(s["stopped_reason"] == "residual_below_tol" for s in samples)
    frame = flow.frame_atoms(seed=1)
    atoms = frame["atoms"]
    assert atoms.shape == (2, 2)
    assert frame["extinct"]
    assert np.allclose(atoms @ atoms.conj().T, np.eye(2))


def test_errors_are_typed():
    with pytest.raises(wrflow.WrflowError, match="NotPsd"):
        wrflow.psd_sqrt(np.diag([1.0, -1.0]))
    with pytest.raises(wrflow.WrflowError, match="NotProjection"):
        wrflow.Flow(np.eye(2), [np.diag([0.5, 1.0])])
    with pytest.raises(wrflow.WrflowError, match="InvalidLetter"):
        c2_flow().residual("3")


def test_run_scenario_matches_cli_contract():
    cfg = {
        "dim": 2,
        "r0": {"type": "identity"},
        "projections": {"type": "coordinate_split", "m": 2},
        "measure": {"kind": "energy", "x": [0.7071067811865476, 0.7071067811865476]},
        "depth": 2,
        "samples": 50,
    }
    report = wrflow.run_scenario(json.dumps(cfg), "check")
    assert report["all_pass"]
    summary = json.loads(report["files"]["summary.json"])
    assert summary["profile"][1] == pytest.approx(0.5)
    again = wrflow.run_scenario(json.dumps(cfg), "check", threads=2)
    assert again["files"] == report["files"]
