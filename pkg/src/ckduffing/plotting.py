"""Static matplotlib figures for regime snapshots, OTOC curves and response curves."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .phasespace import HusimiField, log_density  # noqa: E402

_SAVE = dict(dpi=120, metadata={"Software": None})


def _extent(field: HusimiField):
    return (field.x_centers[0], field.x_centers[-1], field.P_centers[0], field.P_centers[-1])


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def regime_figure(points: np.ndarray, field: HusimiField, path, title: str = "", floor: float = 1e-12,
                  zeros=None):
    """Three panels: classical snapshot, log Husimi, and the two superimposed."""
    fig, axes = plt.subplots(1, 3, figsize=(13.5, 4.2), sharex=True, sharey=True)
    logq = log_density(field, floor).T
    vmin = max(np.log10(floor), logq.max() - 12)
    pts = points[np.all(np.isfinite(points), axis=1)]

    axes[0].plot(pts[:, 0], pts[:, 1], ",", color="k")
    axes[0].set_title("classical snapshot")
    for ax in axes[1:]:
        im = ax.imshow(logq, origin="lower", extent=_extent(field), aspect="auto",
                       cmap="viridis", vmin=vmin, interpolation="nearest")
    axes[1].set_title(r"$\log_{10} Q(x, P)$")
    if zeros:
        axes[1].plot([z.x for z in zeros], [z.P for z in zeros], "o", ms=2, mfc="none", mec="w", mew=0.5)
    axes[2].plot(pts[:, 0], pts[:, 1], ",", color="r")
    axes[2].set_title("superimposed")
    for ax in axes:
        ax.set_xlabel("x")
        ax.set_xlim(field.x_centers[0], field.x_centers[-1])
        ax.set_ylim(field.P_centers[0], field.P_centers[-1])
    axes[0].set_ylabel("P")
    fig.colorbar(im, ax=axes, shrink=0.85)
    if title:
        fig.suptitle(title)
    _save(fig, path)


def otoc_figure(series_list, path, fits=None):
    """``ln C`` against time for one or more series; fitted lines dashed."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, s in enumerate(series_list):
        line, = ax.plot(s.times, s.log_values, ".-", ms=3, label=f"delta={s.params.delta:g}")
        if fits and fits[i] is not None:
            f = fits[i]
            t = np.array(f.window)
            mask = (s.times >= t[0]) & (s.times <= t[1])
            c0 = np.mean(s.log_values[mask] - 2 * f.lambda_q * s.times[mask])
            ax.plot(t, c0 + 2 * f.lambda_q * t, "--", color=line.get_color(), lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel("ln C(t)")
    ax.legend()
    _save(fig, path)


def response_figure(branches, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    stable = [(b.omega, b.amplitude) for b in branches if b.stable]
    unstable = [(b.omega, b.amplitude) for b in branches if not b.stable]
    if stable:
        ax.plot(*zip(*stable), ".", ms=2, color="C0", label="stable")
    if unstable:
        ax.plot(*zip(*unstable), ".", ms=2, color="C3", label="unstable")
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel("A")
    ax.legend()
    _save(fig, path)
