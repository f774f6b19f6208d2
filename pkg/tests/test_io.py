import numpy as np
import pytest

from maxinv.domain import build_grid
from maxinv.errors import IoError, ShapeMismatch
from maxinv.fields import ObservationTrace
from maxinv.io import load_trace, read_field_csv, read_vtk_header, save_trace, write_field


@pytest.fixture
def grid():
    return build_grid(((-0.3, 0.3), (-0.2, 0.2), (0.0, 0.2)), 0.1)


def test_uniform_field_csv(tmp_path, grid):
    p = tmp_path / "f.csv"
    write_field(np.full(grid.shape, 2.5), grid, p, "csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "i,j,k,x1,x2,x3,value"
    assert len(lines) == grid.size + 1
    assert {ln.rsplit(",", 1)[1] for ln in lines[1:]} == {"2.5"}


def test_csv_round_trip_is_exact(tmp_path, grid, rng):
    f = rng.standard_normal(grid.shape) * 1e3
    p = tmp_path / "f.csv"
    write_field(f, grid, p, "csv")
    assert np.array_equal(read_field_csv(p, grid.shape), f)


def test_csv_coordinates(tmp_path, grid):
    p = tmp_path / "f.csv"
    write_field(np.zeros(grid.shape), grid, p, "csv")
    row = p.read_text().splitlines()[1].split(",")
    assert row[:3] == ["0", "0", "0"]
    assert [float(v) for v in row[3:6]] == [-0.3, -0.2, 0.0]


def test_vtk_header(tmp_path, grid, rng):
    p = tmp_path / "f.vtk"
    write_field({"eps": rng.random(grid.shape), "mu": rng.random(grid.shape)}, grid, p, "vtk")
    head = read_vtk_header(p)
    assert head["dimensions"] == grid.shape
    assert head["spacing"] == (0.1, 0.1, 0.1)
    assert head["origin"] == (-0.3, -0.2, 0.0)
    assert head["scalars"] == ["eps", "mu"]
    text = p.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert "DATASET STRUCTURED_POINTS" in text and f"POINT_DATA {grid.size}" in text


def test_vtk_x_fastest(tmp_path, grid):
    f = np.zeros(grid.shape)
    f[1, 0, 0] = 7.0
    p = tmp_path / "f.vtk"
    write_field(f, grid, p)
    data = p.read_text().split("LOOKUP_TABLE default\n")[1].split()
    assert float(data[1]) == 7.0


def test_write_errors(tmp_path, grid):
    with pytest.raises(ShapeMismatch):
        write_field(np.zeros((2, 2, 2)), grid, tmp_path / "f.vtk")
    with pytest.raises(ValueError):
        write_field(np.zeros(grid.shape), grid, tmp_path / "f.png", "png")
    with pytest.raises(IoError):
        write_field(np.zeros(grid.shape), grid, tmp_path / "no" / "f.vtk")


def test_trace_round_trip(tmp_path, rng):
    t = ObservationTrace(rng.standard_normal((5, 4, 3)), 0.01, 0.04, omega=21.0,
                         noise_level=3.0, seed=9, meta={"calibrated": True})
    save_trace(t, tmp_path / "t.npz")
    back = load_trace(tmp_path / "t.npz")
    assert np.array_equal(back.data, t.data)
    assert (back.tau, back.T, back.omega, back.noise_level, back.seed, back.meta) == \
        (0.01, 0.04, 21.0, 3.0, 9, {"calibrated": True})
    with pytest.raises(IoError):
        load_trace(tmp_path / "none.npz")
