"""Text output formats. Floats are written with ``repr`` (shortest round-trip
decimal), files are UTF-8 with LF line endings."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import DuffingParams
from .phasespace import HusimiField
from .quantum import SpatialGrid, WaveFunction


class OutputError(OSError):
    exit_code = 3


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_text(path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_series_csv(path, columns: Mapping[str, Sequence]):
    """One header row then one row per index; all columns must have equal length."""
    names = list(columns)
    data = [list(columns[n]) for n in names]
    lengths = {len(d) for d in data}
    if len(lengths) > 1:
        raise ValueError("columns differ in length")
    rows = [",".join(names)]
    rows += [",".join(_fmt(col[i]) for col in data) for i in range(lengths.pop() if lengths else 0)]
    write_text(path, "\n".join(rows) + "\n")


def read_series_csv(path) -> dict[str, np.ndarray]:
    lines = _read_text(path).splitlines()
    names = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return {n: arr[:, i] for i, n in enumerate(names)}


def write_grid(path, field: HusimiField):
    """Header of ``key value`` lines, a ``values`` marker, then one row per x centre."""
    nx, nP = field.values.shape
    head = [
        "# husimi grid",
        f"x_range {_fmt(field.x_centers[0])} {_fmt(field.x_centers[-1])}",
        f"P_range {_fmt(field.P_centers[0])} {_fmt(field.P_centers[-1])}",
        f"resolution {nx} {nP}",
        f"t {_fmt(field.t)}",
        f"hbar_t {_fmt(field.hbar_t)}",
        f"a_t {_fmt(field.a_t)}",
        f"sigma_analysis {_fmt(field.sigma_analysis)}",
        "values",
    ]
    rows = [" ".join(repr(float(v)) for v in row) for row in field.values]
    write_text(path, "\n".join(head + rows) + "\n")


def read_grid(path) -> HusimiField:
    lines = _read_text(path).splitlines()
    meta = {}
    i = 0
    while lines[i] != "values":
        if not lines[i].startswith("#"):
            key, *vals = lines[i].split()
            meta[key] = vals
        i += 1
    nx, nP = (int(v) for v in meta["resolution"])
    values = np.array([[float(v) for v in line.split()] for line in lines[i + 1: i + 1 + nx]])
    x_lo, x_hi = (float(v) for v in meta["x_range"])
    P_lo, P_hi = (float(v) for v in meta["P_range"])
    return HusimiField(
        np.linspace(x_lo, x_hi, nx),
        np.linspace(P_lo, P_hi, nP),
        values.reshape(nx, nP),
        float(meta["t"][0]),
        float(meta["hbar_t"][0]),
        float(meta["sigma_analysis"][0]),
        float(meta["a_t"][0]),
    )


def params_hash(params: DuffingParams) -> str:
    text = json.dumps({k: repr(v) for k, v in asdict(params).items()}, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_wavefunction(path, psi: WaveFunction, params: DuffingParams):
    g = psi.grid
    head = [
        "# wavefunction",
        f"x_min {_fmt(g.x_min)}",
        f"x_max {_fmt(g.x_max)}",
        f"m_points {g.m_points}",
        f"t {_fmt(psi.t)}",
        f"params_hash {params_hash(params)}",
        "amplitudes",
    ]
    rows = [f"{repr(float(z.real))} {repr(float(z.imag))}" for z in psi.amplitudes]
    write_text(path, "\n".join(head + rows) + "\n")


def read_wavefunction(path) -> tuple[WaveFunction, str]:
    """Returns the state and the stored parameter hash."""
    lines = _read_text(path).splitlines()
    meta = {}
    i = 0
    while lines[i] != "amplitudes":
        if not lines[i].startswith("#"):
            key, value = lines[i].split(maxsplit=1)
            meta[key] = value
        i += 1
    grid = SpatialGrid(float(meta["x_min"]), float(meta["x_max"]), int(meta["m_points"]))
    pairs = np.array([[float(v) for v in line.split()] for line in lines[i + 1: i + 1 + grid.m_points]])
    amps = pairs[:, 0] + 1j * pairs[:, 1]
    return WaveFunction(grid, amps, float(meta["t"])), meta["params_hash"]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, config_text: str, outputs: Sequence[Path], status: str = "complete",
                   notes: Mapping[str, object] | None = None):
    """JSON listing every output with its sha256 and the resolved config.

    No timestamps are recorded so reruns are byte-identical.
    """
    path = Path(path)
    files = []
    for p in outputs:
        p = Path(p)
        if p.exists():
            files.append({"path": p.name, "sha256": sha256_file(p)})
    doc = {
        "status": status,
        "config": config_text.splitlines(),
        "files": sorted(files, key=lambda f: f["path"]),
        "notes": dict(notes or {}),
    }
    write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
