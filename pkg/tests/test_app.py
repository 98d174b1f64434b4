import json
import os

import numpy as np
import pytest
from scipy import ndimage

from rssphase.app.config import (
    ExperimentConfig,
    Problem,
    config_dict,
    load_config,
    parse_config,
    serialize_config,
)
from rssphase.app.images import (
    RasterImage,
    field_to_image,
    image_to_field,
    load_pgm,
    save_pgm,
    threshold,
)
from rssphase.app.presets import (
    builtin_initial_conditions,
    disk_image,
    grid_nodes,
    heat_exact,
    heat_source,
    two_stripes,
)
from rssphase.app.runner import FAILURE_MARKER, run_experiment, snapshot_name
from rssphase.diagnostics import verify_monotone
from rssphase.errors import ConfigError, ImageFormatError, NonFiniteError, ParameterError
from rssphase.operators import Kind
from rssphase.schemes import Scheme

# -- configuration ---------------------------------------------------------


def test_minimal_heat_config_defaults():
    cfg = parse_config("problem = heat\n")
    assert cfg.scheme is Scheme.HEAT_RSS_EULER
    assert cfg.tau == 2.0 and cfg.project_mean is True
    assert cfg.operator_kind is Kind.LELE4


@pytest.mark.parametrize("problem,project", [("allen_cahn", True), ("cahn_hilliard", True),
                                             ("inpaint", False), ("segment", False)])
def test_projection_default_by_problem(problem, project):
    assert parse_config(f"problem = {problem}").project_mean is project


def test_comments_aliases_and_blank_lines():
    cfg = parse_config("# header\n\nproblem = segment  # inline\nlambda = 3.5\nscheme_id = segment\n")
    assert cfg.lam == 3.5 and cfg.scheme is Scheme.AC_SEGMENT


@pytest.mark.parametrize("text,line", [
    ("problem = heat\ndt = -1", 2),
    ("n = 4", 1),
    ("problem = heat\n\ncolour = red", 3),
    ("dt = 1e-3\ndt = 2e-3", 2),
    ("tau", 1),
    ("project_mean = maybe", 1),
    ("problem = heat\nscheme = imex", 2),
    ("t_max = 0.1\nsnapshot_times = 0.05, 0.2", 2),
    ("operator_kind = spectral", 1),
    ("problem = inpaint\ndim = 3", 2),
])
def test_config_errors_name_the_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_full_config_roundtrip():
    text = """
    problem = allen_cahn
    scheme = df
    n = 32
    dim = 2
    dt = 0.0001
    t_max = 0.01
    tau = 3.5
    epsilon = 0.02
    operator_kind = cs2
    project_mean = false
    initial_condition = cross
    output_dir = out/ac
    snapshot_times = 0.0, 0.005, 0.01
    max_fixed_point_iters = 80
    fixed_point_tol = 1e-11
    """
    cfg = parse_config(text)
    assert cfg.snapshot_times == (0.0, 0.005, 0.01)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)
    assert config_dict(cfg)["scheme"] == "df"


def test_t_max_zero_allowed():
    assert parse_config("t_max = 0").t_max == 0.0


def test_load_config(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("problem = heat\nn = 16\n")
    assert load_config(path).n == 16
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_bad_enum_in_constructor():
    with pytest.raises(ConfigError):
        ExperimentConfig(problem="fluid")


# -- images ----------------------------------------------------------------


def test_ascii_pgm_exact_values(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P2\n# two by two\n2 2\n255\n0 255\n128 64\n")
    img = load_pgm(path)
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.tolist() == [[0, 255], [128, 64]]


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_roundtrip(tmp_path, binary, rng):
    img = RasterImage.from_array(rng.integers(0, 256, (5, 7)))
    path = tmp_path / "r.pgm"
    save_pgm(img, path, binary=binary)
    back = load_pgm(path)
    assert (back.width, back.height) == (7, 5)
    assert np.array_equal(back.pixels, img.pixels)


def test_p2_and_p5_load_identically(tmp_path, rng):
    img = RasterImage.from_array(rng.integers(0, 256, (4, 3)))
    save_pgm(img, tmp_path / "b.pgm", binary=True)
    save_pgm(img, tmp_path / "a.pgm", binary=False)
    assert np.array_equal(load_pgm(tmp_path / "b.pgm").pixels, load_pgm(tmp_path / "a.pgm").pixels)


@pytest.mark.parametrize("payload", [
    b"P6\n2 2\n255\n" + bytes(12),
    b"P5\n2 2\n",
    b"P5\n2 x\n255\n" + bytes(4),
    b"P5\n2 2\n65535\n" + bytes(8),
    b"P5\n2 2\n255\n" + bytes(3),
    b"P2\n2 2\n255\n1 2 3\n",
    b"P2\n2 2\n255\n1 2 3 300\n",
    b"P5\n0 2\n255\n",
])
def test_malformed_pgm(tmp_path, payload):
    path = tmp_path / "bad.pgm"
    path.write_bytes(payload)
    with pytest.raises(ImageFormatError):
        load_pgm(path)


def test_raster_image_validation():
    with pytest.raises(ImageFormatError):
        RasterImage(3, 3, np.zeros(8))
    with pytest.raises(ImageFormatError):
        RasterImage.from_array(np.full((2, 2), 300))
    with pytest.raises(ImageFormatError):
        RasterImage.from_array(np.zeros(4))


def test_image_field_maps():
    img = RasterImage.from_array(np.array([[10, 20], [30, 110]]))
    f = image_to_field(img)
    assert f.min() == -1.0 and f.max() == 1.0
    assert image_to_field(img, (0.0, 1.0))[0, 1] == pytest.approx(0.1)
    flat = RasterImage.from_array(np.full((3, 3), 77))
    assert np.array_equal(image_to_field(flat), np.zeros((3, 3)))
    assert np.array_equal(image_to_field(flat, (0.0, 1.0)), np.full((3, 3), 0.5))


def test_field_image_roundtrip_quantization(rng):
    v = rng.uniform(-1, 1, (9, 9))
    v[0, 0], v[0, 1] = -1.0, 1.0
    back = image_to_field(field_to_image(v))
    assert np.abs(back - v).max() <= 2.0 / 255
    assert field_to_image(np.array([[-5.0, 5.0]])).pixels.tolist() == [[0, 255]]
    assert field_to_image(np.zeros(4)).height == 1
    assert field_to_image(np.zeros((4, 4, 3))).width == 4


def test_threshold():
    v = np.array([[0.97, -0.97], [-0.97, 0.97]])
    assert np.array_equal(threshold(v), [[1, 0], [0, 1]])
    assert not threshold(-np.ones(5)).any()
    assert threshold(np.zeros(1))[0] == 1.0
    w = np.random.default_rng(4).uniform(-1, 1, 50)
    assert np.array_equal(threshold(2 * threshold(w) - 1), threshold(w))


# -- presets -----------------------------------------------------------------


def test_ac2d_preset_matches_formula():
    u = builtin_initial_conditions("ac2d", 16, 2)
    x, y = grid_nodes(16, 2)
    assert np.allclose(u, np.cos(np.pi * x) * np.cos(2 * np.pi * y), rtol=0, atol=1e-15)
    assert u[0, 0] == 1.0
    w = builtin_initial_conditions("ac3d", 8, 3)
    x, y, z = grid_nodes(8, 3)
    assert np.allclose(w, np.cos(np.pi * x) * np.cos(2 * np.pi * y) * np.cos(6 * z))
    c = builtin_initial_conditions("ch3d", 8, 3)
    assert np.allclose(c, np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y) * np.cos(np.pi * z))


def test_cell_grid_nodes():
    (x,) = grid_nodes(4, 1, "cell")
    assert np.allclose(x, [0.125, 0.375, 0.625, 0.875])


def test_simple_presets():
    assert not builtin_initial_conditions("zero", 8, 2).any()
    circles = builtin_initial_conditions("two_circles", 64, 2)
    assert set(np.unique(circles)) == {-1.0, 1.0}
    assert ndimage.label(circles > 0)[1] == 2
    cross = builtin_initial_conditions("cross", 64, 2)
    assert ndimage.label(cross > 0)[1] == 1


def test_preset_errors():
    with pytest.raises(ParameterError):
        builtin_initial_conditions("spiral", 8, 2)
    with pytest.raises(ParameterError):
        builtin_initial_conditions("cross", 8, 1)


def test_heat_source_consistent():
    coords = grid_nodes(6, 2)
    t, d = 0.7, 1e-6
    dudt = (heat_exact(coords, t + d) - heat_exact(coords, t - d)) / (2 * d)
    lap = -2 * np.pi**2 * heat_exact(coords, t)
    assert np.allclose(heat_source(coords, t), dudt - lap, atol=1e-7)


def test_synthetic_images():
    image, mask, truth = two_stripes(64)
    assert image.shape == mask.shape == truth.shape == (64, 64)
    assert ndimage.label(truth > 0)[1] == 2
    assert ndimage.label(image > 200)[1] == 4  # the band splits each stripe
    assert (mask == 0).sum() == 12 * 64
    f0, inside = disk_image(32)
    assert set(np.unique(f0)) == {0.2, 0.8} and inside.sum() > 0


# -- runner ----------------------------------------------------------------


def _cfg(tmp_path, **kw):
    base = dict(problem=Problem.ALLEN_CAHN, n=16, dim=2, dt=1e-4, t_max=1e-3, epsilon=0.05,
                operator_kind="cs2", initial_condition="ac2d", output_dir=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


def test_zero_time_echoes_initial_state(tmp_path):
    cfg = _cfg(tmp_path, t_max=0.0)
    res = run_experiment(cfg, write=False)
    assert np.array_equal(res.final, builtin_initial_conditions("ac2d", 16, 2))
    assert len(res.history) == 1 and res.step_times == []


def test_run_writes_outputs(tmp_path):
    cfg = _cfg(tmp_path, snapshot_times=(0.0, 5e-4, 1e-3)).resolved()
    res = run_experiment(cfg)
    out = tmp_path / "out"
    for t in cfg.snapshot_times:
        name = snapshot_name(cfg, t)
        assert (out / f"{name}.pgm").exists() and (out / f"{name}.csv").exists()
    assert snapshot_name(cfg, 5e-4) == "allen_cahn_rss_imex_t0.0005"
    assert len(res.snapshots) == 6
    assert (out / "allen_cahn_rss_imex_history.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["steps_completed"] == 10
    assert len(res.step_times) == 10 and not (out / FAILURE_MARKER).exists()
    snap = np.loadtxt(out / f"{snapshot_name(cfg, 1e-3)}.csv", delimiter=",")
    assert np.array_equal(snap, res.final)


def test_run_is_reproducible(tmp_path):
    files = []
    for k in range(2):
        cfg = _cfg(tmp_path, output_dir=str(tmp_path / f"o{k}"), snapshot_times=(1e-3,))
        run_experiment(cfg)
        files.append(sorted(p for p in os.listdir(tmp_path / f"o{k}") if p.endswith(".csv")))
    assert files[0] == files[1]
    for name in files[0]:
        assert (tmp_path / "o0" / name).read_bytes() == (tmp_path / "o1" / name).read_bytes()


def test_failure_marker_and_partial_history(tmp_path):
    cfg = _cfg(tmp_path, tau=0.0, dt=1.0, t_max=50.0, operator_kind="second_order")
    with np.errstate(all="ignore"), pytest.raises(NonFiniteError):
        run_experiment(cfg)
    out = tmp_path / "out"
    assert (out / FAILURE_MARKER).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "failed" and 0 < summary["steps_completed"] < 50
    # a later successful run clears the marker
    run_experiment(_cfg(tmp_path))
    assert not (out / FAILURE_MARKER).exists()


@pytest.mark.parametrize("scheme", ["rss_euler", "rss_cn", "rss_gear", "rss_adi", "rss_strang"])
def test_heat_schemes_run(tmp_path, scheme):
    cfg = _cfg(tmp_path, problem=Problem.HEAT, scheme=scheme, initial_condition="heat",
               dt=0.01, t_max=0.1, tau=2.0)
    res = run_experiment(cfg, write=False)
    assert len(res.heat_errors) == 11 and res.heat_errors[-1] < 0.1


@pytest.mark.parametrize("scheme", ["imex", "rss_imex", "df", "convex_split", "splitting"])
def test_ac_schemes_run(tmp_path, scheme):
    res = run_experiment(_cfg(tmp_path, scheme=scheme), write=False)
    assert np.all(np.isfinite(res.final)) and len(res.history) == 11


@pytest.mark.parametrize("scheme", ["ch_rss_imex", "ch_nlrss", "ch_sav"])
def test_ch_schemes_run(tmp_path, scheme):
    cfg = _cfg(tmp_path, problem=Problem.CAHN_HILLIARD, scheme=scheme, dt=1e-5, tau=4.0,
               initial_condition="two_circles")
    res = run_experiment(cfg, write=False)
    assert abs(res.summary["mass_drift"]) < 1e-12


def test_cross_energy_monotone(tmp_path):
    cfg = _cfg(tmp_path, n=64, epsilon=0.01, t_max=0.1, tau=2.0, initial_condition="cross",
               operator_kind="second_order")
    for scheme in ("rss_imex", "splitting"):
        res = run_experiment(cfg.__class__(**{**cfg.__dict__, "scheme": Scheme(scheme)}), write=False)
        assert verify_monotone(res.history.energies)[0], scheme


def test_image_problems_with_files(tmp_path):
    image, mask, _ = two_stripes(16, band=4, stripe=3, gap=4)
    save_pgm(RasterImage.from_array(image), tmp_path / "img.pgm")
    save_pgm(RasterImage.from_array((mask * 255).astype(np.uint8)), tmp_path / "mask.pgm")
    cfg = ExperimentConfig(problem=Problem.INPAINT, n=16, dt=1e-6, t_max=1e-5, epsilon=0.05,
                           tau=4.0, lambda0=9e5, initial_condition=str(tmp_path / "img.pgm"),
                           mask_path=str(tmp_path / "mask.pgm"), output_dir=str(tmp_path / "o"))
    res = run_experiment(cfg)
    assert np.all(np.isfinite(res.final)) and len(res.history) == 11
    seg = ExperimentConfig(problem=Problem.SEGMENT, n=16, dt=1e-4, t_max=1e-3, epsilon=0.05,
                           lam=100.0, initial_condition=str(tmp_path / "img.pgm"),
                           output_dir=str(tmp_path / "s"))
    res = run_experiment(seg)
    assert np.abs(res.final).max() <= 1 + 1e-12


def test_image_errors(tmp_path):
    save_pgm(RasterImage.from_array(np.zeros((8, 8), dtype=np.uint8)), tmp_path / "small.pgm")
    with pytest.raises(ConfigError):
        run_experiment(_cfg(tmp_path, problem=Problem.SEGMENT, initial_condition=str(tmp_path / "small.pgm")),
                       write=False)
    with pytest.raises(ConfigError):
        run_experiment(_cfg(tmp_path, problem=Problem.SEGMENT, initial_condition=str(tmp_path / "nope.pgm")),
                       write=False)
    with pytest.raises(ConfigError):
        run_experiment(_cfg(tmp_path, problem=Problem.INPAINT, initial_condition="ac2d"), write=False)
    with pytest.raises(ConfigError):
        run_experiment(_cfg(tmp_path, initial_condition="cross", dim=1), write=False)


def test_overrides(tmp_path):
    u0 = np.full((16, 16), 0.25)
    res = run_experiment(_cfg(tmp_path, problem=Problem.HEAT, t_max=1e-3), {"u0": u0}, write=False)
    assert np.allclose(res.final, 0.25, atol=1e-12)
    g = np.sign(builtin_initial_conditions("ac2d", 16, 2)) + (builtin_initial_conditions("ac2d", 16, 2) == 0)
    res = run_experiment(_cfg(tmp_path, problem=Problem.INPAINT, dt=1e-6, t_max=1e-5, lambda0=1e3, tau=4.0),
                         {"u0": g, "mask": np.ones((16, 16))}, write=False)
    assert np.all(np.isfinite(res.final))
