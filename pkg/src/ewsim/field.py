"""Single-photon electric and magnetic wave functions on spatial grids.

Fields are built from a discrete k-space spectrum ``c_lambda(k)`` in the
helicity basis:

    psi_E(x, t) = i c    sum_k sqrt|k|      sum_l c_l(k) eps_l(k)       exp(i(k.x - c|k|t))
    psi_B(x, t) = i      sum_k 1/sqrt|k|    sum_l c_l(k) (k x eps_l(k)) exp(i(k.x - c|k|t))

With these prefactors every mode solves the vacuum Maxwell equations for any
``c``.  Derivatives are centred second-order differences evaluated on interior
grid points only; axes with a single point are treated as invariant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

MAX_PHASE_PER_CELL = math.pi / 4


class UnderResolvedGrid(ValueError):
    pass


def polarization_basis(k) -> np.ndarray:
    """Helicity vectors ``eps_+/- = (e1 +/- i e2)/sqrt(2)`` per wave vector, shape ``(K, 2, 3)``.

    ``e1`` is Gram-Schmidt of the Cartesian axis least aligned with ``k``;
    ``e2 = k_hat x e1``.
    """
    k = np.atleast_2d(np.asarray(k, dtype=float))
    norm = np.linalg.norm(k, axis=1)
    if np.any(norm == 0):
        raise ValueError("wave vectors must be non-zero")
    khat = k / norm[:, None]
    axis = np.eye(3)[np.argmin(np.abs(khat), axis=1)]
    e1 = axis - np.sum(axis * khat, axis=1)[:, None] * khat
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(khat, e1)
    plus = (e1 + 1j * e2) / math.sqrt(2)
    minus = (e1 - 1j * e2) / math.sqrt(2)
    return np.stack([plus, minus], axis=1)


@dataclass
class ModeSpectrum:
    """Amplitudes ``c[k_index, lambda]`` on wave vectors ``k[k_index]``; lambda 0 is +, 1 is -."""

    k: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.k = np.atleast_2d(np.asarray(self.k, dtype=float))
        self.c = np.asarray(self.c, dtype=complex).reshape(len(self.k), 2)
        self.eps = polarization_basis(self.k)

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.c) ** 2))

    @property
    def k_max(self) -> float:
        return float(np.max(np.linalg.norm(self.k, axis=1)))

    def normalized(self) -> "ModeSpectrum":
        n = math.sqrt(self.norm2)
        return ModeSpectrum(self.k, self.c / n if n else self.c)

    def combine(self, a: complex, other: "ModeSpectrum", b: complex) -> "ModeSpectrum":
        """``a * self + b * other`` on a shared k set."""
        if self.k.shape != other.k.shape or not np.array_equal(self.k, other.k):
            raise ValueError("spectra live on different k sets")
        return ModeSpectrum(self.k, a * self.c + b * other.c)


def k_lattice(center, spacing: float, n: int = 8, dims: int = 3) -> np.ndarray:
    """``n**dims`` wave vectors on a cubic lattice centred at ``center``.

    ``dims = 1`` places them on the line through ``center`` along its own direction.
    """
    center = np.asarray(center, dtype=float)
    offs = (np.arange(n) - (n - 1) / 2) * spacing
    if dims == 1:
        direction = center / np.linalg.norm(center)
        return center + offs[:, None] * direction
    g = np.stack(np.meshgrid(*([offs] * 3), indexing="ij"), axis=-1).reshape(-1, 3)
    return center + g


def gaussian_spectrum(k0, width: float, spacing: float | None = None, n: int = 8,
                      helicity: int = 0, dims: int = 3) -> ModeSpectrum:
    """Normalized Gaussian packet ``exp(-|k - k0|^2 / (4 width^2))`` in one helicity."""
    spacing = width / 2 if spacing is None else spacing
    k = k_lattice(k0, spacing, n, dims)
    amp = np.exp(-np.sum((k - np.asarray(k0, dtype=float)) ** 2, axis=1) / (4 * width ** 2))
    c = np.zeros((len(k), 2), dtype=complex)
    c[:, helicity] = amp
    return ModeSpectrum(k, c).normalized()


def random_spectrum(rng: np.random.Generator, k_max: float = 1.0, n: int = 8,
                    dims: int = 3) -> ModeSpectrum:
    """Random normalized spectrum on an ``n**dims`` lattice inside ``|k_i| <= k_max``.

    Wave vectors avoid the origin; both helicities get complex Gaussian amplitudes.
    """
    spacing = 2 * k_max / n
    k = k_lattice(np.zeros(3) if dims == 3 else np.array([0.0, 0.0, k_max]), spacing, n, dims)
    k = k[np.linalg.norm(k, axis=1) > 1e-12]
    c = rng.normal(size=(len(k), 2)) + 1j * rng.normal(size=(len(k), 2))
    return ModeSpectrum(k, c).normalized()


@dataclass
class FieldGrid:
    axes: tuple[np.ndarray, np.ndarray, np.ndarray]
    t: float
    E: np.ndarray  # (3, nx, ny, nz)
    B: np.ndarray
    c: float = 1.0
    eps0: float = 1.0

    @property
    def mu0(self) -> float:
        return 1 / (self.eps0 * self.c ** 2)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.E.shape[1:]

    @property
    def spacing(self) -> tuple[float | None, ...]:
        return tuple(float(a[1] - a[0]) if len(a) > 1 else None for a in self.axes)

    def energy_density(self) -> np.ndarray:
        return self.eps0 / 2 * (np.sum(np.abs(self.E) ** 2, axis=0) + self.c ** 2 * np.sum(np.abs(self.B) ** 2, axis=0))

    def poynting(self) -> np.ndarray:
        """``(1/2 mu0)(E* x B + E x B*)``."""
        return np.real(np.cross(self.E.conj(), self.B, axis=0)) / self.mu0


def grid_axes(n, spacing, origin=0.0) -> tuple[np.ndarray, ...]:
    """Three axes; ``n`` and ``spacing`` may be scalars or 3-sequences."""
    n = np.broadcast_to(n, 3)
    h = np.broadcast_to(spacing, 3)
    o = np.broadcast_to(origin, 3)
    return tuple(o[i] + h[i] * np.arange(int(n[i])) for i in range(3))


def synthesize(spectrum: ModeSpectrum, axes, t: float = 0.0, c: float = 1.0,
               eps0: float = 1.0, check: bool = True) -> FieldGrid:
    """Evaluate ``psi_E`` and ``psi_B`` on the grid spanned by ``axes`` at time ``t``."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    k = spectrum.k
    kn = np.linalg.norm(k, axis=1)
    if check and len(k):
        for i, a in enumerate(axes):
            if len(a) > 1 and (a[1] - a[0]) * kn.max() > MAX_PHASE_PER_CELL * (1 + 1e-12):
                raise UnderResolvedGrid(
                    f"axis {i}: spacing {a[1] - a[0]:.3g} with |k|max {kn.max():.3g} exceeds pi/4 per cell")
    pol = np.einsum("kl,klj->kj", spectrum.c, spectrum.eps)  # sum_l c_l eps_l
    temporal = np.exp(-1j * c * kn * t)
    e_amp = 1j * c * (np.sqrt(kn) * temporal)[:, None] * pol
    b_amp = 1j * (temporal / np.sqrt(kn))[:, None] * np.cross(k, pol)
    ex, ey, ez = (np.exp(1j * np.outer(k[:, i], axes[i])) for i in range(3))
    E = np.einsum("ka,kx,ky,kz->axyz", e_amp, ex, ey, ez, optimize=True)
    B = np.einsum("ka,kx,ky,kz->axyz", b_amp, ex, ey, ez, optimize=True)
    return FieldGrid(axes, float(t), E, B, c, eps0)


# --- finite differences ------------------------------------------------------------


def _interior(shape) -> tuple[slice, ...]:
    return tuple(slice(1, -1) if n > 2 else slice(None) for n in shape)


def _d(f: np.ndarray, axis: int, h: float | None) -> np.ndarray:
    """Centred derivative along ``axis`` on interior points (zero on invariant axes)."""
    if h is None:
        return np.zeros_like(f)
    out = np.zeros_like(f)
    sl_c = [slice(None)] * f.ndim
    sl_p = [slice(None)] * f.ndim
    sl_m = [slice(None)] * f.ndim
    sl_c[axis], sl_p[axis], sl_m[axis] = slice(1, -1), slice(2, None), slice(None, -2)
    out[tuple(sl_c)] = (f[tuple(sl_p)] - f[tuple(sl_m)]) / (2 * h)
    return out


def curl(F: np.ndarray, spacing) -> np.ndarray:
    hx, hy, hz = spacing
    return np.stack([
        _d(F[2], 1, hy) - _d(F[1], 2, hz),
        _d(F[0], 2, hz) - _d(F[2], 0, hx),
        _d(F[1], 0, hx) - _d(F[0], 1, hy),
    ])


def divergence(F: np.ndarray, spacing) -> np.ndarray:
    return sum(_d(F[i], i, spacing[i]) for i in range(3))


def _check_triplet(before: FieldGrid, now: FieldGrid, after: FieldGrid) -> float:
    if not (before.shape == now.shape == after.shape):
        raise ValueError("field grids differ in shape")
    dt1, dt2 = now.t - before.t, after.t - now.t
    if not (dt1 > 0 and abs(dt1 - dt2) <= 1e-12 * max(dt1, 1.0)):
        raise ValueError("times must be equally spaced and increasing")
    return dt1


def shared_points(shape) -> tuple[slice, ...]:
    """Points of a grid refined by 2 that coincide with the coarse grid's interior."""
    return tuple(slice(2, -2, 2) if n > 2 else slice(None) for n in shape)


def _region(shape, region):
    return _interior(shape) if region is None else tuple(region)


def maxwell_residual(before: FieldGrid, now: FieldGrid, after: FieldGrid,
                     region=None) -> dict[str, float]:
    """Max-norm residuals of the four vacuum Maxwell equations at ``now.t``.

    ``region`` (slices into the grid, interior points only) restricts the
    norm; by default all interior points count.
    """
    dt = _check_triplet(before, now, after)
    h = now.spacing
    dE = (after.E - before.E) / (2 * dt)
    dB = (after.B - before.B) / (2 * dt)
    inner = (slice(None),) + _region(now.shape, region)
    r = {
        "faraday": curl(now.E, h) + dB,
        "ampere": curl(now.B, h) - dE / now.c ** 2,
        "div_E": divergence(now.E, h)[None],
        "div_B": divergence(now.B, h)[None],
    }
    return {name: float(np.max(np.abs(v[inner]))) if v[inner].size else 0.0 for name, v in r.items()}


def continuity_residual(before: FieldGrid, now: FieldGrid, after: FieldGrid, region=None) -> float:
    """Max-norm of ``du/dt + div S`` on interior points at ``now.t``."""
    dt = _check_triplet(before, now, after)
    du = (after.energy_density() - before.energy_density()) / (2 * dt)
    res = du + divergence(now.poynting(), now.spacing)
    inner = _region(now.shape, region)
    return float(np.max(np.abs(res[inner]))) if res[inner].size else 0.0


@dataclass
class PoyntingVelocity:
    v: np.ndarray  # (3, nx, ny, nz); NaN where undefined
    defined: np.ndarray

    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=0)


def poynting_velocity(field: FieldGrid, threshold: float = 1e-12) -> PoyntingVelocity:
    """``v = S / u``; points with ``u`` below ``threshold`` times its peak are flagged undefined."""
    u = field.energy_density()
    peak = float(u.max()) if u.size else 0.0
    defined = u > threshold * peak if peak > 0 else np.zeros(u.shape, dtype=bool)
    v = np.full((3,) + u.shape, np.nan)
    S = field.poynting()
    v[:, defined] = S[:, defined] / u[defined]
    return PoyntingVelocity(v, defined)


def centroid(field: FieldGrid) -> np.ndarray:
    """Energy-weighted mean position."""
    u = field.energy_density()
    grids = np.meshgrid(*field.axes, indexing="ij")
    return np.array([float(np.sum(g * u) / np.sum(u)) for g in grids])


def write_slice(field: FieldGrid, path, axis: int = 2, index: int | None = None) -> None:
    """CSV of one grid plane: ``x, y, z`` then real and imaginary parts of E and B."""
    index = field.shape[axis] // 2 if index is None else index
    sel = [slice(None)] * 3
    sel[axis] = slice(index, index + 1)
    sel = tuple(sel)
    coords = [g[sel].ravel() for g in np.meshgrid(*field.axes, indexing="ij")]
    cols = {}
    for name, F in (("E", field.E), ("B", field.B)):
        for i, comp in enumerate("xyz"):
            vals = F[i][sel].ravel()
            cols[f"Re{name}{comp}"] = vals.real
            cols[f"Im{name}{comp}"] = vals.imag
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", *cols])
        for row in zip(*coords, *cols.values()):
            w.writerow([f"{v:.12g}" for v in row])
