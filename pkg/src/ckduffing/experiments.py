"""Runs that combine the classical, quantum and phase-space pieces and write
their outputs. Each ``write_*`` function returns the list of files written."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .classical import (
    ClassicalEnsemble,
    StrobeSpec,
    evolve_ensemble,
    frequency_response,
    lyapunov_exponent,
    sample_ensemble,
)
from .config import ExperimentConfig, parse_window, serialize_config
from .fileio import write_grid, write_manifest, write_series_csv, write_text, write_wavefunction
from .model import damping_factor
from .otoc import OtocSeries, find_exponential_window, fit_quantum_lyapunov, otoc_series, sample_schedule
from .phasespace import HusimiField, auto_window, find_husimi_zeros, husimi
from .quantum import Evolution, evolve, init_gaussian
from .render import render_heatmap



@dataclass
class RegimeResult:
    config: ExperimentConfig
    points: np.ndarray
    evolution: Evolution
    field: HusimiField
    zeros: list
    files: list[Path]


def classical_snapshot(cfg: ExperimentConfig) -> np.ndarray:
    """``(x, P)`` of the sampled ensemble at the snapshot time."""
    e = sample_ensemble(cfg.initial, cfg.ensemble.n, cfg.ensemble.seed, cfg.params)
    t = cfg.snapshot_time
    snaps = evolve_ensemble(
        e, t, cfg.classical_dt, StrobeSpec.snapshot(cfg.schedule.snapshot_cycles), cfg.params,
        on_overflow=cfg.ensemble.on_overflow,
    )
    return snaps[0][1]


def poincare_section(cfg: ExperimentConfig) -> np.ndarray:
    """Stroboscopic ``(x, P)`` points of the single trajectory from the packet centre."""
    p = cfg.poincare
    g = cfg.initial
    e = ClassicalEnsemble(np.array([g.x0]), np.array([g.p0 / cfg.params.mass]), 0.0, cfg.ensemble.seed)
    strobe = StrobeSpec.periodic(p.count, p.phase, p.transient_cycles)
    t_end = (p.transient_cycles + p.count - 1 + p.phase) * cfg.params.period
    snaps = evolve_ensemble(e, t_end, cfg.classical_dt, strobe, cfg.params)
    return np.vstack([pts for _, pts in snaps])


def quantum_run(cfg: ExperimentConfig, observe: bool = True) -> Evolution:
    grid = cfg.grid.build()
    psi = init_gaussian(grid, cfg.initial, cfg.params)
    return evolve(
        psi, cfg.snapshot_time, cfg.quantum_dt, cfg.params,
        monitor=cfg.monitor, observe_every=cfg.schedule.observe_every if observe else None,
    )


def husimi_window(cfg: ExperimentConfig, points: np.ndarray, t: float, grid) -> tuple[float, ...]:
    window = parse_window(cfg.husimi.window, 4)
    if window is not None:
        return window
    hbar_t = cfg.params.hbar * float(damping_factor(t, cfg.params))
    x_lo, x_hi, P_lo, P_hi = auto_window(points, cfg.husimi.sigma, hbar_t)
    P_max = 0.95 * hbar_t * grid.k_nyquist
    x_pad = 0.5 * cfg.husimi.sigma
    return (
        max(x_lo, grid.x_min + x_pad), min(x_hi, grid.x_max - x_pad),
        max(P_lo, -P_max), min(P_hi, P_max),
    )


def snapshot_field(cfg: ExperimentConfig, psi, points: np.ndarray) -> HusimiField:
    window = husimi_window(cfg, points, psi.t, psi.grid)
    return husimi(psi, cfg.husimi.sigma, window, (cfg.husimi.nx, cfg.husimi.np), cfg.params)


def observables_columns(evo: Evolution) -> dict[str, list[float]]:
    obs = evo.observables
    return {
        "t": [o.t for o in obs],
        "norm": [o.norm for o in obs],
        "mean_x": [o.mean_x for o in obs],
        "mean_P": [o.mean_P for o in obs],
        "energy": [o.energy for o in obs],
    }


def _write_field(out: Path, field: HusimiField, points, cfg: ExperimentConfig, files: list[Path]):
    zeros = find_husimi_zeros(field, cfg.husimi.zero_threshold)
    write_grid(out / "husimi.grid", field)
    files.append(out / "husimi.grid")
    write_series_csv(out / "zeros.csv", {
        "x": [z.x for z in zeros], "P": [z.P for z in zeros], "winding": [z.winding for z in zeros],
    })
    files.append(out / "zeros.csv")
    if cfg.outputs.png:
        render_heatmap(field, out / "husimi.png", floor=cfg.husimi.floor)
        files.append(out / "husimi.png")
        if points is not None:
            render_heatmap(field, out / "overlay.png", points=points, floor=cfg.husimi.floor)
            files.append(out / "overlay.png")
    return zeros


class _Bundle:
    """Collects written files and always leaves a manifest behind."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = Path(out)
        self.files: list[Path] = []
        self.notes: dict[str, object] = {}

    def __enter__(self):
        self.out.mkdir(parents=True, exist_ok=True)
        write_text(self.out / "config.txt", serialize_config(self.cfg))
        self.files.append(self.out / "config.txt")
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            self.notes["error"] = f"{type(exc).__name__}: {exc}"
        write_manifest(
            self.out / "manifest.json", serialize_config(self.cfg), self.files,
            "complete" if exc is None else "incomplete", self.notes,
        )
        return False


def run_regime(cfg: ExperimentConfig, out) -> RegimeResult:
    """Classical ensemble, quantum packet and Husimi snapshot at ``schedule.snapshot_cycles``."""
    with _Bundle(cfg, out) as b:
        points = classical_snapshot(cfg)
        write_series_csv(b.out / "poincare.csv", {"x": points[:, 0], "P": points[:, 1]})
        b.files.append(b.out / "poincare.csv")

        evo = quantum_run(cfg)
        write_series_csv(b.out / "observables.csv", observables_columns(evo))
        b.files.append(b.out / "observables.csv")
        b.notes.update(
            steps=evo.steps,
            snapshot_t=evo.final.t,
            max_boundary_mass=evo.max_boundary_mass,
            max_spectral_mass=evo.max_spectral_mass,
            norm_drift=abs(evo.final.norm() - 1.0),
        )

        field = snapshot_field(cfg, evo.final, points)
        zeros = _write_field(b.out, field, points, cfg, b.files)
        b.notes["zeros"] = len(zeros)
        b.notes["husimi_mass"] = field.mass()
        if cfg.outputs.figures:
            plotting.regime_figure(points, field, b.out / "regime.png", title=cfg.preset,
                                   floor=cfg.husimi.floor, zeros=zeros)
            b.files.append(b.out / "regime.png")
    return RegimeResult(cfg, points, evo, field, zeros, b.files)


def write_poincare(cfg: ExperimentConfig, out) -> list[Path]:
    with _Bundle(cfg, out) as b:
        points = classical_snapshot(cfg)
        write_series_csv(b.out / "poincare.csv", {"x": points[:, 0], "P": points[:, 1]})
        b.files.append(b.out / "poincare.csv")
        if cfg.poincare.count > 0:
            sec = poincare_section(cfg)
            write_series_csv(b.out / "section.csv", {"x": sec[:, 0], "P": sec[:, 1]})
            b.files.append(b.out / "section.csv")
    return b.files


def write_lyapunov(cfg: ExperimentConfig, out) -> list[Path]:
    lc = cfg.lyapunov
    T = cfg.params.period
    with _Bundle(cfg, out) as b:
        est = lyapunov_exponent(
            cfg.initial, lc.transient_cycles * T, lc.measure_cycles * T, T / lc.steps_per_cycle,
            cfg.params, lc.tolerance,
        )
        write_series_csv(b.out / "lyapunov.csv", {
            "delta": [cfg.params.delta], "lambda": [est.value], "first_half": [est.first_half],
            "second_half": [est.second_half], "converged": [int(est.converged)],
        })
        b.files.append(b.out / "lyapunov.csv")
        b.notes["lambda"] = est.value
    return b.files


def write_freqresponse(cfg: ExperimentConfig, out) -> list[Path]:
    fc = cfg.freqresponse
    with _Bundle(cfg, out) as b:
        grid = np.linspace(fc.omega_min, fc.omega_max, fc.points)
        branches = frequency_response(cfg.params, grid, damping=fc.damping)
        write_series_csv(b.out / "freqresponse.csv", {
            "omega": [r.omega for r in branches], "amplitude": [r.amplitude for r in branches],
            "stable": [int(r.stable) for r in branches],
        })
        b.files.append(b.out / "freqresponse.csv")
        if cfg.outputs.figures:
            plotting.response_figure(branches, b.out / "freqresponse.png")
            b.files.append(b.out / "freqresponse.png")
    return b.files


def write_quantum_evolve(cfg: ExperimentConfig, out) -> list[Path]:
    with _Bundle(cfg, out) as b:
        evo = quantum_run(cfg)
        write_series_csv(b.out / "observables.csv", observables_columns(evo))
        write_wavefunction(b.out / "psi_final.txt", evo.final, cfg.params)
        b.files += [b.out / "observables.csv", b.out / "psi_final.txt"]
        b.notes.update(snapshot_t=evo.final.t, requested_t=cfg.snapshot_time,
                       snap=abs(evo.final.t - cfg.snapshot_time),
                       norm_drift=abs(evo.final.norm() - 1.0))
    return b.files


def write_quantum_husimi(cfg: ExperimentConfig, out) -> list[Path]:
    with _Bundle(cfg, out) as b:
        points = classical_snapshot(cfg)
        evo = quantum_run(cfg, observe=False)
        field = snapshot_field(cfg, evo.final, points)
        zeros = _write_field(b.out, field, points, cfg, b.files)
        b.notes.update(zeros=len(zeros), husimi_mass=field.mass())
    return b.files


def otoc_run(cfg: ExperimentConfig, truncate: bool = True) -> OtocSeries:
    oc = cfg.otoc
    grid = oc.build_grid()
    dt = cfg.params.period / oc.steps_per_cycle
    psi = init_gaussian(grid, cfg.initial, cfg.params)
    times = sample_schedule(cfg.params, dt, oc.cycles, oc.samples)
    return otoc_series(psi, times, dt, cfg.params, cfg.monitor, truncate=truncate, initial=cfg.initial)


def write_otoc(cfg: ExperimentConfig, out) -> list[Path]:
    with _Bundle(cfg, out) as b:
        series = otoc_run(cfg)
        write_series_csv(b.out / "otoc.csv", {"t": series.times, "C": series.values, "lnC": series.log_values})
        b.files.append(b.out / "otoc.csv")
        window = parse_window(cfg.otoc.fit_window, 2)
        fit = None
        if window is not None or find_exponential_window(series) is not None:
            fit = fit_quantum_lyapunov(series, window)
        write_series_csv(b.out / "fit.csv", {
            "lambda_q": [fit.lambda_q] if fit else [],
            "window_lo": [fit.window[0]] if fit else [],
            "window_hi": [fit.window[1]] if fit else [],
            "r2": [fit.r_squared] if fit else [],
        })
        b.files.append(b.out / "fit.csv")
        if series.stopped_by:
            b.notes["truncated"] = series.stopped_by
        if cfg.outputs.figures:
            plotting.otoc_figure([series], b.out / "otoc.png", [fit])
            b.files.append(b.out / "otoc.png")
    return b.files
