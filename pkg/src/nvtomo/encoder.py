"""Gradient encoding of a molecule into spin-noise spectra.

Under a uniform gradient of |B| along u, every spin with the same projection
r = u . x precesses at the same Larmor frequency, so a spectrum with bins of
width delta_f slices the molecule into planes of width
delta_f / (gamma' |grad B|). Each bin holds the r.m.s. field those spins
produce at the NV.

Bins sit on a lattice shared by all orientations: bin k is centred at
r = k * dr, i.e. at frequency offset k * delta_f from the unshifted Larmor
line. Spectra from different orientations therefore stack without
resampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .phantom import Molecule
from .physics import CONSTANTS, GradientSetting, NM, PhysicalConstants, dipolar_variance

SLICE_COMBINE = ("quadrature", "linear")


@dataclass(frozen=True)
class SpinNoiseSpectrum:
    freq_offsets: np.ndarray  # Hz, bin centres
    brms: np.ndarray  # T
    delta_f: float
    gradient: GradientSetting
    first_bin: int = 0  # lattice index of freq_offsets[0]

    def __post_init__(self):
        if len(self.brms) < 1 or len(self.brms) != len(self.freq_offsets):
            raise ValueError("spectrum needs matching, non-empty offset and brms arrays")
        if not self.delta_f > 0:
            raise ValueError("delta_f must be positive")

    @property
    def r_values(self) -> np.ndarray:
        return rescale_to_spatial(self.freq_offsets, self.gradient)

    def occupied_spread(self) -> float:
        """Frequency band (Hz) covered by non-empty bins, edge to edge."""
        occ = np.flatnonzero(self.brms > 0)
        if occ.size == 0:
            return 0.0
        return float((occ[-1] - occ[0] + 1) * self.delta_f)


@dataclass(frozen=True)
class ProjectionGrid:
    """Equispaced (theta, phi) orientations over [0, pi) x [0, pi).

    theta = 0 is repeated for every phi so that n_theta * n_phi projections
    are always produced.
    """

    n_theta: int = 9
    n_phi: int = 9

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("n_theta and n_phi must be >= 1")

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n_theta) * (math.pi / self.n_theta)

    @property
    def phis(self) -> np.ndarray:
        return np.arange(self.n_phi) * (math.pi / self.n_phi)

    def __len__(self):
        return self.n_theta * self.n_phi


@dataclass(frozen=True)
class SignalArray:
    """s[r, theta, phi] on a common r-axis symmetric about 0.

    The r-axis is ``r0 + i * dr`` (nm); ``gradient`` is |grad B| in T/m.
    """

    r0: float
    dr: float
    thetas: np.ndarray
    phis: np.ndarray
    values: np.ndarray  # (n_r, n_theta, n_phi)
    delta_f: float
    gradient: float

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[1:] != (len(self.thetas), len(self.phis)):
            raise ValueError(f"values shape {self.values.shape} does not match "
                             f"{len(self.thetas)} thetas x {len(self.phis)} phis")
        if not self.dr > 0:
            raise ValueError("dr must be positive")

    @property
    def n_r(self) -> int:
        return self.values.shape[0]

    @property
    def r_values(self) -> np.ndarray:
        return self.r0 + np.arange(self.n_r) * self.dr

    def spectrum(self, j: int, k: int) -> SpinNoiseSpectrum:
        g = GradientSetting(float(self.thetas[j]), float(self.phis[k]), self.gradient)
        first = int(round(self.r0 / self.dr))
        freqs = (first + np.arange(self.n_r)) * self.delta_f
        return SpinNoiseSpectrum(freqs, self.values[:, j, k].copy(), self.delta_f, g, first)

    def with_values(self, values) -> "SignalArray":
        return replace(self, values=np.asarray(values, dtype=float))


def slice_width(delta_f: float, g: GradientSetting, constants: PhysicalConstants = CONSTANTS) -> float:
    """Thickness (nm) of the isomagnetic slab resolved by one frequency bin."""
    if not delta_f > 0:
        raise ValueError("delta_f must be positive")
    return delta_f / g.hz_per_nm(constants)


def project_coordinates(m: Molecule, g: GradientSetting) -> np.ndarray:
    """r_i = u . x_i for every atom, u the gradient direction."""
    m.require_atoms()
    p = m.positions
    u = g.direction
    return p[:, 0] * u[0] + p[:, 1] * u[1] + p[:, 2] * u[2]


def _bin_index(r: np.ndarray, dr: float) -> np.ndarray:
    # round-half-even is odd-symmetric, so reversing u maps bin k to -k exactly
    return np.rint(r / dr).astype(np.int64)


def encode_projection(m: Molecule, g: GradientSetting, delta_f: float, nv_pos, nv_axis,
                      slice_combine: str = "quadrature",
                      constants: PhysicalConstants = CONSTANTS) -> SpinNoiseSpectrum:
    if slice_combine not in SLICE_COMBINE:
        raise ValueError(f"slice_combine must be one of {SLICE_COMBINE}")
    m.require_atoms()
    dr = slice_width(delta_f, g, constants)
    k = _bin_index(project_coordinates(m, g), dr)
    variance = dipolar_variance(m.positions, nv_pos, nv_axis, constants)
    first = int(k.min()) - 1
    n_bins = int(k.max()) - first + 2
    acc = np.zeros(n_bins)
    if slice_combine == "quadrature":
        np.add.at(acc, k - first, variance)
        brms = np.sqrt(acc)
    else:
        np.add.at(acc, k - first, np.sqrt(variance))
        brms = acc
    freqs = (first + np.arange(n_bins)) * delta_f
    return SpinNoiseSpectrum(freqs, brms, float(delta_f), g, first)


def encode_all(m: Molecule, grid: ProjectionGrid, gradient: float, delta_f: float, nv_pos, nv_axis,
               slice_combine: str = "quadrature",
               constants: PhysicalConstants = CONSTANTS) -> SignalArray:
    """Encode every orientation and stack onto a shared r-axis.

    ``gradient`` is |grad B| in T/m. The axis spans the largest projected
    half-extent over all orientations plus one padding bin on each side.
    """
    spectra = {}
    for j, theta in enumerate(grid.thetas):
        for k, phi in enumerate(grid.phis):
            g = GradientSetting(float(theta), float(phi), gradient)
            spectra[j, k] = encode_projection(m, g, delta_f, nv_pos, nv_axis, slice_combine, constants)
    half = max(max(-s.first_bin, s.first_bin + len(s.brms) - 1) for s in spectra.values())
    n_r = 2 * half + 1
    values = np.zeros((n_r, grid.n_theta, grid.n_phi))
    for (j, k), s in spectra.items():
        lo = s.first_bin + half
        values[lo:lo + len(s.brms), j, k] = s.brms
    dr = slice_width(delta_f, GradientSetting(0.0, 0.0, gradient), constants)
    return SignalArray(-half * dr, dr, grid.thetas, grid.phis, values, float(delta_f), float(gradient))


def rescale_to_spatial(freq_offsets, g: GradientSetting, constants: PhysicalConstants = CONSTANTS):
    """Map frequency offsets (Hz) to positions along the gradient (nm)."""
    rate = g.hz_per_nm(constants) if isinstance(g, GradientSetting) else constants.gamma_h_hz * g * NM
    if not rate > 0:
        raise ValueError("gradient must be non-zero")
    return np.asarray(freq_offsets, dtype=float) / rate


def spatial_to_frequency(r_values, g: GradientSetting, constants: PhysicalConstants = CONSTANTS):
    return np.asarray(r_values, dtype=float) * g.hz_per_nm(constants)


def max_occupied_spread(signal: SignalArray) -> tuple[float, tuple[int, int]]:
    """Largest occupied frequency band over all orientations and where it occurs."""
    best, where = 0.0, (0, 0)
    for j in range(len(signal.thetas)):
        for k in range(len(signal.phis)):
            spread = signal.spectrum(j, k).occupied_spread()
            if spread > best:
                best, where = spread, (j, k)
    return best, where


def add_measurement_noise(obj, sigma: float, seed: int = 0):
    """Add N(0, sigma^2) to every bin of a spectrum or signal array, clamped at 0."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return obj
    rng = np.random.default_rng(seed)
    if isinstance(obj, SpinNoiseSpectrum):
        noisy = np.maximum(obj.brms + rng.normal(0.0, sigma, size=obj.brms.shape), 0.0)
        return replace(obj, brms=noisy)
    if isinstance(obj, SignalArray):
        return obj.with_values(np.maximum(obj.values + rng.normal(0.0, sigma, size=obj.values.shape), 0.0))
    raise TypeError(f"cannot add noise to {type(obj).__name__}")
