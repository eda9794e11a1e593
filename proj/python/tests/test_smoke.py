import json
from pathlib import Path

import numpy as np
import pytest

import gspnp

DATA = Path(__file__).resolve().parents[2] / "data"


def test_prox_solves_normal_equations():
    rng = np.random.default_rng(0)
    k = gspnp.gaussian_kernel(1.0, 1.0, 0.0, 5)
    y = rng.random((8, 8, 1))
    fid = gspnp.Fidelity("deblur", y, kernel=k)
    z = rng.random((8, 8, 1))
    p = fid.prox(z, 0.7)
    assert np.max(np.abs(0.7 * fid.grad(p) + p - z)) < 1e-10


def test_adjoint_pairing():
    rng = np.random.default_rng(1)
    fid = gspnp.Fidelity("sr", rng.random((4, 4, 1)), signal_shape=(8, 8, 1), kernel=gspnp.kernel("gauss:1:1:0:5"))
    x, r = rng.random((8, 8, 1)), rng.random((4, 4, 1))
    assert abs(np.sum(fid.forward(x) * r) - np.sum(x * fid.adjoint(r))) < 1e-12


def test_filter_denoiser_is_gradient_step():
    rng = np.random.default_rng(2)
    d = gspnp.Denoiser.filter(0.55, gspnp.gaussian_kernel(1.0, 1.0, 0.0, 5), 0.45, (8, 8, 1))
    x = rng.random((8, 8, 1))
    assert np.allclose(d(x), x - d.grad_g(x), atol=1e-12)
    assert d.g(x) >= 0.0


def test_gradient_step_run_decreases_objective():
    rng = np.random.default_rng(3)
    clean = rng.random((16, 16, 1))
    k = gspnp.gaussian_kernel(1.2, 1.2, 0.0, 7)
    y = gspnp.add_noise(gspnp.Fidelity("deblur", clean, kernel=k).forward(clean), 0.02, 5)
    fid = gspnp.Fidelity("deblur", y, kernel=k, noise=0.02)
    d = gspnp.Denoiser.filter(0.55, gspnp.gaussian_kernel(1.0, 1.0, 0.0, 5), 0.45, (16, 16, 1))
    params = gspnp.Params.defaults("gs")
    out, trace = gspnp.run("gs", params, fid, d, y, clean)
    assert out.shape == clean.shape
    objectives = [trace["initial_objective"]] + [r["objective"] for r in trace["records"]]
    assert all(b <= a + 1e-9 for a, b in zip(objectives, objectives[1:]))
    assert trace["csv"].startswith("k,")


def test_unknown_algorithm_raises():
    with pytest.raises(gspnp.Error):
        gspnp.Params.defaults("nope")


@pytest.mark.skipif(not (DATA / "models" / "gs_elu.pnpm").exists(), reason="trained model not present")
def test_restore_from_config(tmp_path):
    cfg = {
        "problem": {"kind": "deblur", "kernels": ["gauss:1.6:1.6:0:9"], "nu": 0.03},
        "denoiser": {"model": str(DATA / "models" / "gs_elu.pnpm")},
        "images": [str(DATA / "desk" / "eval" / "coffee_saucer.png")],
        "crop": 32,
        "output_dir": str(tmp_path),
    }
    res = gspnp.restore(json.dumps(cfg))
    assert res["final_psnr"] > res["observed_psnr"] + 0.5
    assert (tmp_path / "trace.csv").exists()
