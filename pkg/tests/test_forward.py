import math

import numpy as np
import pytest
from scipy.special import jv

from transeig import farfield as ff
from transeig import forward as fw

ANG64 = 2 * np.pi * np.arange(64) / 64


@pytest.fixture(scope="module")
def disk256():
    h = 2.2 / 256
    grid = fw.SamplingGrid((-1.1, -1.1), h, 256, 256)
    med = fw.disk_medium(2.0, 1.0, h, grid=grid)
    return med, fw.solve_forward(med, fw.IncidentField.plane(2.0, 0.0))


def test_grid_covering_margin():
    g = fw.SamplingGrid.covering(-1, 1, -0.5, 0.5, 0.1)
    x0, x1, y0, y1 = g.bounds()
    assert x0 <= -1 - 0.2 + 1e-12 and x1 >= 1 + 0.2 - 1e-12
    assert y0 <= -0.7 + 1e-12 and y1 >= 0.7 - 1e-12
    with pytest.raises(fw.ForwardError):
        fw.SamplingGrid((0, 0), 0.0, 3, 3)


def test_field_invariants():
    g = fw.SamplingGrid((0, 0), 0.1, 4, 4)
    n2 = np.ones((4, 4))
    n2[1, 1] = 4.0
    med = fw.RefractiveField.from_n2(g, n2)
    assert med.delta0 == 3.0 and med.mask.sum() == 1
    with pytest.raises(fw.ForwardError):
        fw.RefractiveField(g, n2, np.zeros((4, 4), bool))
    with pytest.raises(fw.ForwardError):
        fw.RefractiveField.from_n2(g, -n2)


def test_zero_contrast():
    g = fw.SamplingGrid((-1, -1), 0.05, 40, 40)
    med = fw.RefractiveField.from_n2(g, np.ones(g.shape))
    inc = fw.IncidentField.plane(3.0, 0.4)
    tot = fw.solve_forward(med, inc)
    assert np.array_equal(tot.u, tot.u_incident)
    assert np.all(fw.far_field(tot, ANG64) == 0)


def test_disk_matches_series(disk256):
    med, tot = disk256
    ds = fw.disk_series(2.0, 1.0, 2.0)
    X, Y = med.grid.centers()
    inside = X**2 + Y**2 < 0.95**2
    ref = ds.near_field(np.c_[X[inside], Y[inside]])
    assert np.linalg.norm(tot.u[inside] - ref) / np.linalg.norm(ref) <= 1e-2
    far = fw.far_field(tot, ANG64)
    ref_far = ds.far_field(ANG64)
    assert np.linalg.norm(far - ref_far) / np.linalg.norm(ref_far) <= 1e-2
    assert tot.residual <= fw.DEFAULT_TOL


def test_reciprocity(disk256):
    med, tot = disk256
    a2 = 2.1
    tot2 = fw.solve_forward(med, fw.IncidentField.plane(2.0, a2))
    x = fw.far_field(tot, [a2 + np.pi])[0]
    y = fw.far_field(tot2, [np.pi])[0]
    assert abs(x - y) <= 1e-3 * abs(x)


def test_linearity():
    med = fw.disk_medium(2.0, 1.0, 0.04)
    a = 2.0 - 1.0j
    u1 = fw.solve_forward(med, fw.IncidentField.plane(2.0, 0.3)).u
    u2 = fw.solve_forward(med, fw.IncidentField.plane(2.0, 0.3, amplitude=a)).u
    assert np.max(np.abs(u2 - a * u1)) <= 1e-12 * np.max(np.abs(u2))


def test_refinement_halves_error():
    ds = fw.disk_series(2.0, 1.0, 2.0)
    ref = ds.far_field(ANG64)
    errs = []
    for N in (64, 128):
        h = 2.2 / N
        med = fw.disk_medium(2.0, 1.0, h, grid=fw.SamplingGrid((-1.1, -1.1), h, N, N))
        far = fw.far_field(fw.solve_forward(med, fw.IncidentField.plane(2.0, 0.0)), ANG64)
        errs.append(np.linalg.norm(far - ref) / np.linalg.norm(ref))
    assert errs[0] >= 2 * errs[1]


def test_translation_phase():
    med = fw.square_medium(3.0, 1.0, 0.04)
    t = (0.3, -0.2)
    k, a = 2.5, 0.8
    d = np.array([math.cos(a), math.sin(a)])
    f0 = fw.far_field(fw.solve_forward(med, fw.IncidentField.plane(k, a)), ANG64)
    f1 = fw.far_field(fw.solve_forward(med.translated(t), fw.IncidentField.plane(k, a)), ANG64)
    xh = np.c_[np.cos(ANG64), np.sin(ANG64)]
    shift = np.exp(1j * k * ((d - xh) @ np.asarray(t)))
    assert np.linalg.norm(f1 - shift * f0) <= 1e-3 * np.linalg.norm(f0)


def test_resolution_precondition():
    med = fw.disk_medium(10.0, 1.0, 0.1)
    with pytest.raises(fw.PreconditionError):
        fw.solve_forward(med, fw.IncidentField.plane(2.0, 0.0))


def test_solver_failure(monkeypatch):
    monkeypatch.setattr(fw, "GMRES_BUDGET", 3)
    med = fw.disk_medium(4.0, 1.0, 0.05)
    with pytest.raises(fw.SolverFailure) as info:
        fw.solve_forward(med, fw.IncidentField.plane(2.0, 0.0))
    assert info.value.residual > fw.DEFAULT_TOL


def test_incident_validation():
    with pytest.raises(fw.ForwardError):
        fw.IncidentField("plane", 1.0, direction=(1.0, 1.0))
    with pytest.raises(fw.ForwardError):
        fw.IncidentField.plane(0.0, 0.0)


def test_series_zero_contrast():
    ds = fw.disk_series(1.0, 1.0, 3.0)
    assert np.max(np.abs(ds.b)) < 1e-14


def test_series_interface_continuity():
    ds = fw.disk_series(2.0, 1.0, 2.0)
    th = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    pts = np.c_[np.cos(th), np.sin(th)]
    inner = ds.interior_field(pts)
    outer = ds.near_field(pts * (1 + 1e-15))
    assert np.max(np.abs(inner - outer)) <= 1e-9


def test_series_optical_theorem():
    for n, k in [(2.0, 2.0), (0.5, 4.0)]:
        ds = fw.disk_series(n, 1.0, k, angle=0.4)
        th = 0.4 + 2 * np.pi * np.arange(512) / 512
        total = 2 * np.pi * np.mean(np.abs(ds.far_field(th)) ** 2)
        forward = ds.far_field([0.4])[0]
        assert total == pytest.approx(8 * np.pi * forward.imag, rel=1e-6)


def test_series_truncation_guard():
    with pytest.raises(fw.ForwardError):
        fw.disk_series(2.0, 1.0, 2.0, m_trunc=5)
    assert fw.disk_series(2.0, 1.0, 2.0).tail < 1e-12


def _kernel(coeffs):
    dirs = ff.DirectionSet(len(coeffs))
    return ff.HerglotzKernel(1.0, dirs, coeffs)


def test_herglotz_constant():
    g = _kernel(np.full(16, 1 / (2 * np.pi)))
    assert fw.herglotz_eval(g, 3.0, [[0.0, 0.0]])[0] == pytest.approx(1.0, abs=1e-14)


def test_herglotz_jacobi_anger():
    m, k = 3, 5.0
    dirs = ff.DirectionSet(256)
    g = ff.HerglotzKernel(k, dirs, np.exp(1j * m * dirs.angles))
    rng = np.random.default_rng(3)
    r = 2 * np.sqrt(rng.random(60))
    phi = 2 * np.pi * rng.random(60)
    pts = np.c_[r * np.cos(phi), r * np.sin(phi)]
    ref = 2 * np.pi * 1j**m * jv(m, k * r) * np.exp(1j * m * phi)
    assert np.max(np.abs(fw.herglotz_eval(g, k, pts) - ref)) <= 1e-8


def test_herglotz_conjugation():
    rng = np.random.default_rng(0)
    N = 32
    c = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    flipped = np.conj(np.roll(c, -N // 2))  # -theta_j is theta_{j + N/2}
    pts = rng.standard_normal((10, 2))
    v = fw.herglotz_eval(_kernel(c), 2.0, pts)
    w = fw.herglotz_eval(_kernel(flipped), 2.0, pts)
    assert np.allclose(w, np.conj(v), atol=1e-13)


def test_polygon_and_shapes():
    poly = fw.square_boundary(2.0)
    assert fw.polygon_contains(poly, np.array([0.0, 1.5]), np.array([0.0, 0.0])).tolist() == [True, False]
    kite = fw.kite_boundary()
    x, y = kite[:, 0], kite[:, 1]
    area = 0.5 * abs(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))
    med = fw.kite_medium(2.0, 0.02)
    frac = med.contrast / 3.0
    assert frac.sum() * med.grid.cell_area == pytest.approx(area, rel=2e-3)
    disk = fw.disk_medium(2.0, 1.0, 0.02)
    assert (disk.contrast / 3.0).sum() * disk.grid.cell_area == pytest.approx(math.pi, rel=1e-3)


def test_bump_shape():
    with pytest.raises(fw.ForwardError):
        fw.RadialBump(0.0, 0.3, -0.1)
    b = fw.RadialBump(0.0, 0.3, 0.1)
    assert b.profile(0.0) == pytest.approx(0.1)
    assert b.profile(0.5) == 0.0
    base = fw.bump_disk_medium(0.5, 1.0, fw.RadialBump(0.0, 0.3, 0.0), 0.02)
    bumped = fw.bump_disk_medium(0.5, 1.0, b, 0.02, grid=base.grid)
    assert bumped.mask.sum() > base.mask.sum()


def test_medium_csv_roundtrip(tmp_path):
    med = fw.disk_medium(2.0, 0.5, 0.05)
    path = fw.write_medium_csv(tmp_path / "m.csv", med)
    back = fw.read_medium_csv(path)
    assert back.grid == med.grid
    assert np.array_equal(back.n2, med.n2)
    assert back.digest() == med.digest()
    with pytest.raises(FileNotFoundError):
        fw.read_medium_csv(tmp_path / "missing.csv")


def test_far_field_csv(tmp_path):
    path = fw.write_far_field_csv(tmp_path / "f.csv", 2.0, [0.0, 1.0], [0.5], np.array([[1 + 2j], [3 - 1j]]))
    lines = path.read_text().splitlines()
    assert lines[0] == "k,obs_angle,inc_angle,re,im"
    assert len(lines) == 3
