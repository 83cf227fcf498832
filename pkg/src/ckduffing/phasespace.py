"""Husimi distributions under the Caldirola-Kanai convention.

Coherent states are built with the decaying Planck constant
``hbar(t) = hbar a(t)``. The overlap with the state at mechanical momentum
``P`` is the transform of the Gaussian-windowed wave function at the
canonical wavenumber ``kappa = P / hbar(t) = p / hbar``:

    G(x_c, kappa) = (2 pi s^2)^(-1/4) sum_j exp(-(y_j - x_c)^2 / 4 s^2) psi_j exp(-i kappa y_j) dx

and ``Q = |G|^2 / (2 pi hbar(t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.signal import CZT
from scipy.spatial import cKDTree

from .errors import ParameterError
from .model import DuffingParams, damping_factor
from .quantum import WaveFunction

# Window support in units of sigma; exp(-12^2/4) is below double precision.
_SUPPORT = 12.0


@dataclass
class OverlapField:
    """Complex coherent-state overlaps on an ``(x_c, kappa)`` lattice."""

    x_centers: np.ndarray
    kappa: np.ndarray
    values: np.ndarray
    t: float
    hbar: float
    a_t: float
    sigma: float

    @property
    def hbar_t(self) -> float:
        return self.hbar * self.a_t

    @property
    def p_centers(self) -> np.ndarray:
        return self.hbar * self.kappa

    @property
    def P_centers(self) -> np.ndarray:
        return self.hbar_t * self.kappa


@dataclass
class HusimiField:
    x_centers: np.ndarray
    P_centers: np.ndarray
    values: np.ndarray
    t: float
    hbar_t: float
    sigma_analysis: float
    a_t: float = 1.0
    overlap: OverlapField | None = None

    @property
    def p_centers(self) -> np.ndarray:
        """Canonical momenta ``p = P / a(t)``."""
        return self.P_centers / self.a_t

    @property
    def cell_area(self) -> float:
        return _spacing(self.x_centers) * _spacing(self.P_centers)

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)


@dataclass(frozen=True)
class HusimiZero:
    x: float
    P: float
    winding: int


def _spacing(c: np.ndarray) -> float:
    return float(c[1] - c[0]) if len(c) > 1 else 1.0


def _window(grid, sigma: float) -> np.ndarray:
    return (2 * math.pi * sigma**2) ** -0.25 * np.exp(-((grid.x) ** 2) / (4 * sigma**2))


def _check_sigma(psi: WaveFunction, sigma: float):
    if not sigma >= 2 * psi.grid.dx:
        raise ParameterError("sigma", f"analysis width {sigma} unresolved by dx={psi.grid.dx}")


def _check_centers(psi: WaveFunction, x_centers: np.ndarray):
    g = psi.grid
    if x_centers.min() < g.x_min or x_centers.max() > g.x_max:
        raise ParameterError("x_centers", "window centres must lie inside the grid")


def coherent_overlap_field(
    psi: WaveFunction, sigma: float, x_centers, params: DuffingParams
) -> OverlapField:
    """Overlaps on the grid's own wavenumber lattice, one length-M FFT per centre.

    Columns are sorted by ascending ``kappa`` (``fftshift`` order).
    """
    x_centers = np.atleast_1d(np.asarray(x_centers, dtype=float))
    _check_sigma(psi, sigma)
    _check_centers(psi, x_centers)
    g = psi.grid
    norm = (2 * math.pi * sigma**2) ** -0.25
    k = sfft.fftshift(g.k)
    phase = g.dx * np.exp(-1j * k * g.x_min)
    out = np.empty((len(x_centers), g.m_points), dtype=complex)
    for i, c in enumerate(x_centers):
        f = norm * np.exp(-((g.x - c) ** 2) / (4 * sigma**2)) * psi.amplitudes
        out[i] = phase * sfft.fftshift(sfft.fft(f))
    a = float(damping_factor(psi.t, params))
    return OverlapField(x_centers, k, out, psi.t, params.hbar, a, sigma)


def overlap_on_lattice(
    psi: WaveFunction, sigma: float, x_centers, kappa, params: DuffingParams
) -> OverlapField:
    """Overlaps at arbitrary uniformly spaced wavenumbers.

    The windowed function is transformed with a chirp-z transform, which
    evaluates its discrete-time Fourier transform exactly on the requested
    lattice (band-limited interpolation of the FFT samples).
    """
    x_centers = np.atleast_1d(np.asarray(x_centers, dtype=float))
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    _check_sigma(psi, sigma)
    _check_centers(psi, x_centers)
    g = psi.grid
    if np.abs(kappa).max() > g.k_nyquist:
        raise ParameterError("window", "momentum window exceeds the grid's Nyquist range")
    if len(kappa) > 1 and not np.allclose(np.diff(kappa), kappa[1] - kappa[0], rtol=1e-9, atol=0):
        raise ParameterError("window", "momentum lattice must be uniform")

    half = int(math.ceil(_SUPPORT * sigma / g.dx))
    width = 2 * half + 1
    dk = kappa[1] - kappa[0] if len(kappa) > 1 else 0.0
    transform = CZT(width, len(kappa), w=np.exp(-1j * dk * g.dx), a=np.exp(1j * kappa[0] * g.dx))
    norm = (2 * math.pi * sigma**2) ** -0.25
    padded = np.concatenate([np.zeros(width, complex), psi.amplitudes, np.zeros(width, complex)])
    offsets = np.arange(width)
    out = np.empty((len(x_centers), len(kappa)), dtype=complex)
    for i, c in enumerate(x_centers):
        j0 = int(round((c - g.x_min) / g.dx)) - half
        y0 = g.x_min + j0 * g.dx
        y = y0 + offsets * g.dx
        seg = padded[j0 + width: j0 + 2 * width]
        f = norm * np.exp(-((y - c) ** 2) / (4 * sigma**2)) * seg
        out[i] = g.dx * np.exp(-1j * kappa * y0) * transform(f)
    a = float(damping_factor(psi.t, params))
    return OverlapField(x_centers, kappa, out, psi.t, params.hbar, a, sigma)


def husimi(
    psi: WaveFunction,
    sigma: float,
    window: tuple[float, float, float, float],
    resolution: tuple[int, int],
    params: DuffingParams,
    axis: str = "mechanical",
    keep_overlap: bool = True,
) -> HusimiField:
    """Husimi density on a uniform ``(x, P)`` window.

    ``window = (x_lo, x_hi, P_lo, P_hi)`` with inclusive endpoints as the
    first/last pixel centres. With ``axis="canonical"`` the momentum bounds
    are canonical ``p`` and are converted with ``P = a(t) p`` before the
    same computation.
    """
    x_lo, x_hi, m_lo, m_hi = map(float, window)
    nx, nP = (int(r) for r in resolution)
    if nx < 2 or nP < 2:
        raise ParameterError("resolution", "needs at least 2 x 2 pixels")
    a = float(damping_factor(psi.t, params))
    if axis == "canonical":
        m_lo, m_hi = a * m_lo, a * m_hi
    elif axis != "mechanical":
        raise ValueError("axis must be 'mechanical' or 'canonical'")
    hbar_t = params.hbar * a
    x_c = np.linspace(x_lo, x_hi, nx)
    P_c = np.linspace(m_lo, m_hi, nP)
    ov = overlap_on_lattice(psi, sigma, x_c, P_c / hbar_t, params)
    Q = np.abs(ov.values) ** 2 / (2 * math.pi * hbar_t)
    return HusimiField(x_c, P_c, Q, psi.t, hbar_t, sigma, a, ov if keep_overlap else None)


def auto_window(points: np.ndarray, sigma: float, hbar_t: float, margin: float = 3.0):
    """Bounding box of ``(x, P)`` points dilated by ``margin`` coherent-state widths."""
    pts = points[np.all(np.isfinite(points), axis=1)]
    dP = hbar_t / (2 * sigma)
    return (
        float(pts[:, 0].min() - margin * sigma),
        float(pts[:, 0].max() + margin * sigma),
        float(pts[:, 1].min() - margin * dP),
        float(pts[:, 1].max() + margin * dP),
    )


def log_density(field, floor: float = 1e-12) -> np.ndarray:
    if not floor > 0:
        raise ValueError("floor must be > 0")
    values = field.values if isinstance(field, HusimiField) else np.asarray(field, dtype=float)
    return np.log10(np.maximum(values, floor))


def husimi_moments(field: HusimiField) -> dict[str, float]:
    Q = field.values
    dA = field.cell_area
    mass = Q.sum() * dA
    X, P = np.meshgrid(field.x_centers, field.P_centers, indexing="ij")
    mx = (Q * X).sum() * dA / mass
    mp = (Q * P).sum() * dA / mass
    return {
        "mass": float(mass),
        "mean_x": float(mx),
        "mean_P": float(mp),
        "var_x": float((Q * (X - mx) ** 2).sum() * dA / mass),
        "var_P": float((Q * (P - mp) ** 2).sum() * dA / mass),
    }


def localization_fraction(field: HusimiField, points: np.ndarray, radius: float) -> float:
    """Share of the field's mass within ``radius`` of any point (Euclidean in ``(x, P)``)."""
    pts = points[np.all(np.isfinite(points), axis=1)]
    X, P = np.meshgrid(field.x_centers, field.P_centers, indexing="ij")
    dist, _ = cKDTree(pts).query(np.column_stack([X.ravel(), P.ravel()]))
    inside = (dist <= radius).reshape(field.values.shape)
    total = field.values.sum()
    return float(field.values[inside].sum() / total)


def _lattice(field) -> OverlapField:
    if isinstance(field, HusimiField):
        if field.overlap is None:
            raise ValueError("Husimi field was computed without keeping its overlap")
        return field.overlap
    return field


def _gauged(ov: OverlapField) -> np.ndarray:
    # Shifting the position origin to the window centre halves the phase
    # gradient along kappa; a smooth nonvanishing factor leaves windings intact.
    x_mid = 0.5 * (ov.x_centers[0] + ov.x_centers[-1])
    return ov.values * np.exp(1j * ov.kappa * x_mid)[None, :]


def plaquette_windings(field) -> np.ndarray:
    """Winding number of ``arg G`` around each lattice plaquette (counter-clockwise in ``(x, P)``)."""
    G = _gauged(_lattice(field))
    c00, c10, c11, c01 = G[:-1, :-1], G[1:, :-1], G[1:, 1:], G[:-1, 1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        total = (
            np.angle(c10 / c00) + np.angle(c11 / c10) + np.angle(c01 / c11) + np.angle(c00 / c01)
        )
    return np.rint(np.nan_to_num(total) / (2 * math.pi)).astype(int)


def boundary_winding(field) -> int:
    """Winding of ``arg G`` along the outer edge of the lattice."""
    G = _gauged(_lattice(field))
    loop = np.concatenate([G[:, 0], G[-1, 1:], G[-2::-1, -1], G[0, -2:0:-1], G[:1, 0]])
    with np.errstate(invalid="ignore", divide="ignore"):
        total = np.angle(loop[1:] / loop[:-1]).sum()
    return int(np.rint(total / (2 * math.pi)))


def find_husimi_zeros(field, threshold: float = 1e-6) -> list[HusimiZero]:
    """Simple zeros of the coherent-state overlap.

    A plaquette is reported when the phase winds by exactly one turn around
    it and its largest corner magnitude is at least ``threshold`` times the
    field maximum, which discards windings produced by round-off in the
    numerically empty tails. The zero is placed at the corner centroid
    weighted by ``1/|G|``.
    """
    ov = _lattice(field)
    W = plaquette_windings(ov)
    mag = np.abs(ov.values)
    corners = np.stack([mag[:-1, :-1], mag[1:, :-1], mag[1:, 1:], mag[:-1, 1:]])
    keep = (np.abs(W) == 1) & (corners.max(axis=0) >= threshold * mag.max())
    xs, ks = ov.x_centers, ov.kappa
    zeros = []
    for i, j in zip(*np.nonzero(keep)):
        w = 1.0 / np.maximum(corners[:, i, j], 1e-300)
        cx = np.array([xs[i], xs[i + 1], xs[i + 1], xs[i]])
        ck = np.array([ks[j], ks[j], ks[j + 1], ks[j + 1]])
        x = float(np.dot(w, cx) / w.sum())
        P = float(ov.hbar_t * np.dot(w, ck) / w.sum())
        zeros.append(HusimiZero(x, P, int(W[i, j])))
    return zeros
