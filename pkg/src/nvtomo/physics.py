"""Spin statistics and magnetostatics for the NV microscope.

Lengths passed in and out of this module are nm unless a name says
otherwise; fields are tesla; gradients are T/m internally (1 G/nm = 1e5 T/m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants as sc

NM = 1e-9
GAUSS = 1e-4
G_PER_NM = GAUSS / NM  # T/m

MIN_SPIN_DISTANCE_NM = 0.1
TIP_GUARD_NM = 10.0
FD_STEP_NM = 0.01


@dataclass(frozen=True)
class PhysicalConstants:
    gamma_h: float  # rad s^-1 T^-1
    mu0_over_4pi: float  # T m / A
    hbar: float
    h_planck: float
    k_boltzmann: float

    @property
    def gamma_h_hz(self) -> float:
        """Proton gyromagnetic ratio in Hz/T (gamma / 2 pi)."""
        return self.gamma_h / (2 * math.pi)

    @property
    def gamma_h_khz_per_gauss(self) -> float:
        return self.gamma_h_hz * GAUSS / 1e3


CONSTANTS = PhysicalConstants(
    gamma_h=sc.physical_constants["proton gyromag. ratio"][0],
    mu0_over_4pi=sc.mu_0 / (4 * math.pi),
    hbar=sc.hbar,
    h_planck=sc.h,
    k_boltzmann=sc.k,
)


@dataclass(frozen=True)
class GradientSetting:
    """Uniform gradient of |B| across the sample.

    ``theta`` is the polar angle from +z, ``phi`` the azimuth, ``magnitude``
    in T/m. Encoding grids keep (theta, phi) in one hemisphere, but single
    settings may point anywhere.
    """

    theta: float
    phi: float
    magnitude: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")
        if not self.magnitude > 0:
            raise ValueError(f"gradient magnitude must be positive, got {self.magnitude}")

    @classmethod
    def from_g_per_nm(cls, theta: float, phi: float, g_per_nm: float) -> "GradientSetting":
        return cls(theta, phi, g_per_nm * G_PER_NM)

    @classmethod
    def from_vector(cls, grad) -> "GradientSetting":
        g = np.asarray(grad, dtype=float)
        mag = float(np.linalg.norm(g))
        if not mag > 0:
            raise ValueError("zero gradient has no direction")
        theta = math.acos(max(-1.0, min(1.0, g[2] / mag)))
        return cls(theta, math.atan2(g[1], g[0]), mag)

    @property
    def g_per_nm(self) -> float:
        return self.magnitude / G_PER_NM

    @property
    def direction(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    @property
    def in_hemisphere(self) -> bool:
        return 0.0 <= self.theta < math.pi and 0.0 <= self.phi < math.pi

    def hz_per_nm(self, constants: PhysicalConstants = CONSTANTS) -> float:
        """Larmor frequency change per nm along the gradient direction."""
        return constants.gamma_h_hz * self.magnitude * NM


@dataclass(frozen=True)
class TipModel:
    """Magnetic tip as an ideal point dipole; position nm, moment A m^2."""

    position: tuple[float, float, float]
    moment: tuple[float, float, float]


@dataclass(frozen=True)
class BoltzmannExcess:
    exact: float
    approx: float
    energy_ratio: float  # Delta E / kT


@dataclass(frozen=True)
class CurvatureReport:
    max_relative_deviation: float
    non_uniform: bool
    corner_gradients: np.ndarray  # (8, 3) T/m


# --- spin statistics ------------------------------------------------------------

def boltzmann_excess(n_spins: float, b_field: float, temperature: float,
                     constants: PhysicalConstants = CONSTANTS) -> BoltzmannExcess:
    """Thermal population excess of N spin-1/2 nuclei, exact and high-T forms."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if n_spins < 0:
        raise ValueError("n_spins must be >= 0")
    x = constants.h_planck * constants.gamma_h * b_field / (2 * math.pi * constants.k_boltzmann * temperature)
    return BoltzmannExcess(n_spins * math.expm1(x), n_spins * x, x)


def spin_noise_sigma(n_spins: float) -> float:
    """r.m.s. of n_up - n_down for N unpolarized spin-1/2 nuclei."""
    if n_spins < 0:
        raise ValueError("n_spins must be >= 0")
    return math.sqrt(n_spins)


def dipolar_variance(spins, nv_pos, nv_axis, constants: PhysicalConstants = CONSTANTS) -> np.ndarray:
    """Per-spin variance (T^2) of the field component along ``nv_axis``.

    An unpolarized proton at displacement r from the NV contributes
    (mu0 gamma hbar / 4 pi)^2 (1/4) (3 cos^2 theta + 1) / r^6, theta measured
    between r and the NV axis. Only correctly rounded elementwise operations
    are used so that single-spin and batched evaluation agree bit for bit.
    """
    s = np.asarray(spins, dtype=float).reshape(-1, 3)
    p = np.asarray(nv_pos, dtype=float)
    a = np.asarray(nv_axis, dtype=float)
    a = a / math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
    dx, dy, dz = s[:, 0] - p[0], s[:, 1] - p[1], s[:, 2] - p[2]
    r2 = dx * dx + dy * dy + dz * dz
    if s.shape[0] and r2.min() <= MIN_SPIN_DISTANCE_NM ** 2:
        raise ValueError(f"spin within {MIN_SPIN_DISTANCE_NM} nm of the NV; the point-dipole formula diverges")
    proj = dx * a[0] + dy * a[1] + dz * a[2]
    cos2 = proj * proj / r2
    r2m = r2 * (NM * NM)
    coupling = constants.mu0_over_4pi * constants.gamma_h * constants.hbar
    return (coupling * coupling * 0.25) * (3.0 * cos2 + 1.0) / (r2m * r2m * r2m)


def dipolar_brms(spins, nv_pos, nv_axis, constants: PhysicalConstants = CONSTANTS) -> float:
    """r.m.s. spin-noise field at the NV, spins combined in quadrature."""
    return math.sqrt(float(np.sum(dipolar_variance(spins, nv_pos, nv_axis, constants))))


def larmor_frequency(b0: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Proton Larmor frequency in Hz for a field in tesla."""
    if b0 < 0:
        raise ValueError("b0 must be >= 0")
    return constants.gamma_h_hz * b0


# --- magnetic tip -------------------------------------------------------------------

def tip_field(tip: TipModel, at, constants: PhysicalConstants = CONSTANTS) -> np.ndarray:
    """Point-dipole field (T) of the tip at ``at`` (nm); accepts (..., 3)."""
    r = (np.asarray(at, dtype=float) - np.asarray(tip.position, dtype=float)) * NM
    dist = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(dist <= 1.0 * NM):
        raise ValueError("tip field evaluated within 1 nm of the dipole")
    rhat = r / dist
    m = np.asarray(tip.moment, dtype=float)
    mdotr = np.sum(rhat * m, axis=-1, keepdims=True)
    return constants.mu0_over_4pi * (3 * mdotr * rhat - m) / dist ** 3


def field_magnitude_gradient(tip: TipModel, at, step: float = FD_STEP_NM,
                             constants: PhysicalConstants = CONSTANTS) -> np.ndarray:
    """grad |B| in T/m by central differences with ``step`` nm."""
    at = np.asarray(at, dtype=float)
    grad = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        hi = np.linalg.norm(tip_field(tip, at + e, constants))
        lo = np.linalg.norm(tip_field(tip, at - e, constants))
        grad[k] = (hi - lo) / (2 * step * NM)
    return grad


def gradient_at_sample(tip: TipModel, sample_center, sample_extent: float,
                       constants: PhysicalConstants = CONSTANTS):
    """Gradient setting seen by the sample plus a uniformity report.

    The report gives the largest relative deviation of grad |B| at the eight
    corners of a cube of side ``sample_extent`` from its value at the centre;
    more than 10 % is flagged non-uniform.
    """
    center = np.asarray(sample_center, dtype=float)
    if np.linalg.norm(np.asarray(tip.position) - center) < TIP_GUARD_NM:
        raise ValueError(f"tip closer than {TIP_GUARD_NM} nm to the sample; far-field model invalid")
    g0 = field_magnitude_gradient(tip, center, constants=constants)
    half = sample_extent / 2
    corners = np.array([[sx, sy, sz] for sx in (-half, half) for sy in (-half, half) for sz in (-half, half)])
    gc = np.array([field_magnitude_gradient(tip, center + c, constants=constants) for c in corners])
    dev = float(np.max(np.linalg.norm(gc - g0, axis=1)) / np.linalg.norm(g0))
    return GradientSetting.from_vector(g0), CurvatureReport(dev, dev > 0.1, gc)


def moment_for_gradient(target_g_per_nm: float, standoff_nm: float,
                        constants: PhysicalConstants = CONSTANTS) -> float:
    """On-axis dipole moment (A m^2) giving |grad|B|| = target at the standoff.

    On the dipole axis |B| = 2 k m / d^3, so its gradient is 6 k m / d^4.
    """
    if not target_g_per_nm > 0 or not standoff_nm > 0:
        raise ValueError("target gradient and standoff must be positive")
    d = standoff_nm * NM
    return target_g_per_nm * G_PER_NM * d ** 4 / (6 * constants.mu0_over_4pi)


def calibrated_tip(theta: float, phi: float, g_per_nm: float = 3.0, standoff_nm: float = 100.0) -> TipModel:
    """Tip on the (theta, phi) ray at ``standoff_nm`` from the origin, moment
    along that ray, sized to produce ``g_per_nm`` at the origin."""
    u = GradientSetting(theta, phi, 1.0).direction
    m = moment_for_gradient(g_per_nm, standoff_nm)
    return TipModel(tuple(u * standoff_nm), tuple(u * m))
