import json

import numpy as np
import pytest

from maxinv import experiments as ex
from maxinv.config import RunConfig
from maxinv.errors import ValidationError

# a small box that still holds both inclusions, so these runs take seconds
SMALL = dict(extents=((-1.6, 1.6), (-0.5, 0.5), (-0.4, 0.4)),
             inner_extents=((-1.4, 1.4), (-0.3, 0.3), (-0.3, 0.3)),
             tau=0.01, T=0.6, max_iter=2)


@pytest.fixture(scope="module")
def base():
    return RunConfig().updated(**SMALL)


@pytest.fixture(scope="module")
def clean21(base):
    return ex.generate_data(ex.case_config("i", base))


def test_case_table():
    assert ex.CASES == {"i": (21.0, 3.0), "ii": (21.0, 10.0), "iii": (30.0, 3.0), "iv": (30.0, 10.0)}
    cfg = ex.case_config("iv")
    assert (cfg.omega, cfg.noise_level) == (30.0, 10.0)
    with pytest.raises(ValidationError):
        ex.case_config("v")


def test_true_coefficients(base):
    setup = ex.Setup.coarse(base)
    coef = ex.true_coefficients(base, setup)
    assert coef.eps.max() == 12.0 and coef.mu.max() == 2.0
    assert np.all(coef.eps[setup.mask.outer] == 1.0)


def test_clean_trace_meta(clean21, base):
    setup = ex.Setup.coarse(base)
    assert clean21.data.shape == (61, setup.bmap.observation.size, 3)
    assert clean21.noise_level == 0.0
    assert np.isfinite(clean21.data).all() and np.abs(clean21.data).max() > 0


def test_noise_cases_share_clean_data(clean21, base):
    a = ex.noisy(ex.case_config("i", base), clean21)
    b = ex.noisy(ex.case_config("ii", base), clean21)
    assert not np.array_equal(a.data, b.data)
    ra = np.linalg.norm(a.data - clean21.data) / np.linalg.norm(clean21.data)
    rb = np.linalg.norm(b.data - clean21.data) / np.linalg.norm(clean21.data)
    assert ra < rb


def test_run_case_artifacts_and_determinism(tmp_path, base, clean21):
    rep1 = ex.run_case("i", tmp_path / "a", base=base, clean=clean21)
    rep2 = ex.run_case("i", tmp_path / "b", base=base, clean=clean21)
    d1, d2 = tmp_path / "a" / "case_i", tmp_path / "b" / "case_i"
    for name in ("manifest.toml", "trace_clean.npz", "trace_noisy.npz", "reconstruction.vtk",
                 "thresholded.vtk", "thresholded_eps.csv", "thresholded_mu.csv", "log.csv",
                 "report.json"):
        assert (d1 / name).is_file(), name
    assert (d1 / "report.json").read_bytes() == (d2 / "report.json").read_bytes()
    assert (d1 / "reconstruction.vtk").read_bytes() == (d2 / "reconstruction.vtk").read_bytes()
    report = json.loads((d1 / "report.json").read_text())
    assert report["iterations"] == rep1["iterations"] <= 2
    assert report["F_nonincreasing"]
    assert rep1["max_eps"] == rep2["max_eps"]


def test_regsearch_rows(base, clean21):
    cfg = ex.case_config("i", base)
    rows = ex.regsearch(cfg, gamma_grid=((0.0, 0.0), (0.01, 0.9)), obs=ex.noisy(cfg, clean21))
    assert [(r["gamma_eps"], r["gamma_mu"]) for r in rows] == [(0.0, 0.0), (0.01, 0.9)]
    assert sum(r["best"] for r in rows) == 1


def test_first_arrival():
    t = np.linspace(0, 1, 11)
    assert ex.first_arrival(t, t.copy(), 0.55) == pytest.approx(0.55)
    assert np.isnan(ex.first_arrival(t, np.zeros(11), 0.5))
