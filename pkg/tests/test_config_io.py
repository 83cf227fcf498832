import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckduffing.config import (
    PRESETS,
    apply_overrides,
    parse_assignment,
    parse_config,
    preset_config,
    serialize_config,
)
from ckduffing.errors import ConfigError
from ckduffing.fileio import (
    params_hash,
    read_grid,
    read_series_csv,
    read_wavefunction,
    write_grid,
    write_manifest,
    write_series_csv,
    write_wavefunction,
)
from ckduffing.model import DuffingParams, GaussianState
from ckduffing.phasespace import HusimiField
from ckduffing.quantum import init_gaussian, make_grid


def test_empty_config_is_chaotic_dissipative_default():
    cfg = parse_config("")
    p = cfg.params
    assert cfg.preset == "chaotic-dissipative"
    assert (p.alpha, p.beta, p.delta, p.gamma, p.omega) == (-1.0, 0.25, 0.1, 2.5, 2.0)
    assert (cfg.initial.x0, cfg.initial.p0, cfg.initial.sigma) == (1.0, -1.5, 0.5)
    assert cfg.schedule.snapshot_cycles == 13.37
    assert cfg.quantum_dt == pytest.approx(math.pi / 2000)


@pytest.mark.parametrize(
    "name,values",
    [
        ("harmonic-dissipative", (1.0, 0.0, 0.1)),
        ("hardening-transient", (1.0, 0.25, 0.1)),
        ("conservative-chaotic", (-1.0, 0.25, 0.0)),
        ("chaotic-dissipative", (-1.0, 0.25, 0.1)),
    ],
)
def test_presets_carry_regime_parameters(name, values):
    p = preset_config(name).params
    assert (p.alpha, p.beta, p.delta) == values
    assert (p.gamma, p.omega, p.mass, p.hbar) == (2.5, 2.0, 1.0, 1.0)


def test_presets_are_all_listed():
    assert set(PRESETS) == {"harmonic-dissipative", "hardening-transient", "conservative-chaotic",
                            "chaotic-dissipative"}
    with pytest.raises(ConfigError):
        preset_config("nope")


def test_invalid_parameter_reports_key_path_and_line():
    with pytest.raises(ConfigError) as info:
        parse_config("preset = harmonic-dissipative\n\nparams.omega = 0\n")
    assert info.value.key == "params.omega"
    assert info.value.line == 3


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("# comment\nparams.delta = 0.2\nparams.zeta = 1\n")
    assert info.value.line == 3 and info.value.key == "params.zeta"


@pytest.mark.parametrize("text", ["husimi.nx = 2.5", "outputs.png = maybe", "params.delta = nan",
                                  "husimi.window = 1,2,3", "ensemble.on_overflow = ignore", "novalue"])
def test_malformed_values_are_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_override_pipeline():
    cfg = apply_overrides(preset_config("conservative-chaotic"), [(None, *parse_assignment("params.delta=0.3"))])
    assert cfg.params.delta == 0.3 and cfg.preset == "conservative-chaotic"
    with pytest.raises(ConfigError):
        parse_assignment("params.delta")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_serialized_config_round_trips(name):
    text = serialize_config(preset_config(name))
    assert parse_config(text) == preset_config(name)
    assert serialize_config(parse_config(text)) == text


@settings(max_examples=50, deadline=None)
@given(
    delta=st.floats(0, 2, allow_nan=False),
    gamma=st.floats(0, 10),
    sigma=st.floats(0.05, 3),
    n=st.integers(1, 10**6),
    png=st.booleans(),
)
def test_round_trip_is_exact(delta, gamma, sigma, n, png):
    text = (f"params.delta = {delta!r}\nparams.gamma = {gamma!r}\nhusimi.sigma = {sigma!r}\n"
            f"ensemble.n = {n}\noutputs.png = {str(png).lower()}\n")
    cfg = parse_config(text)
    assert cfg.params.delta == delta and cfg.husimi.sigma == sigma and cfg.outputs.png is png
    assert parse_config(serialize_config(cfg)) == cfg


def test_empty_series_csv_is_header_only(tmp_path):
    path = tmp_path / "s.csv"
    write_series_csv(path, {"t": [], "C": []})
    assert path.read_bytes() == b"t,C\n"


def test_series_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    cols = {"t": rng.normal(size=7), "x": rng.normal(size=7) * 1e-300}
    path = tmp_path / "s.csv"
    write_series_csv(path, cols)
    back = read_series_csv(path)
    for k in cols:
        assert np.array_equal(back[k], cols[k])
    assert b"\r" not in path.read_bytes()
    with pytest.raises(ValueError):
        write_series_csv(path, {"a": [1.0], "b": []})


def test_grid_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    f = HusimiField(np.linspace(-2.0, 3.0, 11), np.linspace(-1.0, 1.5, 7), rng.random((11, 7)) / 7,
                    4.2, 0.65, 0.5, 0.65)
    path = tmp_path / "h.grid"
    write_grid(path, f)
    g = read_grid(path)
    assert np.array_equal(g.values, f.values)
    assert np.array_equal(g.x_centers, f.x_centers) and np.array_equal(g.P_centers, f.P_centers)
    assert (g.t, g.hbar_t, g.sigma_analysis, g.a_t) == (4.2, 0.65, 0.5, 0.65)


def test_wavefunction_round_trip(tmp_path):
    p = DuffingParams()
    psi = init_gaussian(make_grid(-8, 8, 8), GaussianState(), p)
    path = tmp_path / "psi.txt"
    write_wavefunction(path, psi, p)
    back, h = read_wavefunction(path)
    assert np.array_equal(back.amplitudes, psi.amplitudes)
    assert back.grid == psi.grid and back.t == psi.t
    assert h == params_hash(p) != params_hash(p.replace(delta=0.2))


def test_manifest_is_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    write_series_csv(a, {"t": [0.0, 1.0]})
    m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
    write_manifest(m1, "params.delta = 0.1\n", [a, tmp_path / "missing.csv"])
    write_manifest(m2, "params.delta = 0.1\n", [a, tmp_path / "missing.csv"])
    assert m1.read_bytes() == m2.read_bytes()
    doc = json.loads(m1.read_text())
    assert doc["status"] == "complete"
    assert [f["path"] for f in doc["files"]] == ["a.csv"]
    assert len(doc["files"][0]["sha256"]) == 64
