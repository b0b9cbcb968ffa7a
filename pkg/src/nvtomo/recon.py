"""Filtered back-projection of plane-integral projections.

The encoded data are 3D Radon transforms: each value integrates over a plane
u . x = r. Inverting them needs a second-derivative filter along r (a k^2
ramp in Fourier space) instead of the |k| ramp of line-integral CT, followed
by smearing each filtered value back over its plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .encoder import SignalArray
from .phantom import DensityGrid, GridSpec

FILTER_KINDS = ("quadratic_ramp", "none")
WINDOWS = ("rectangular", "cosine_rolloff")
MODES = ("gather", "paper")
ROLLOFF_FRACTION = 0.2


@dataclass(frozen=True)
class FilterSpec:
    kind: str = "quadratic_ramp"
    cutoff_fraction: float = 1.0
    window: str = "cosine_rolloff"

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"filter kind must be one of {FILTER_KINDS}")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        if not 0 < self.cutoff_fraction <= 1:
            raise ValueError("cutoff_fraction must lie in (0, 1]")


@dataclass
class ImageArray(DensityGrid):
    mode: str = "gather"


@dataclass(frozen=True)
class RotationOp:
    theta: float
    phi: float
    matrix: np.ndarray  # 4x4 homogeneous

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:3, :3]


# --- filtering -----------------------------------------------------------------------

def filter_response(n_fft: int, dr: float, spec: FilterSpec) -> np.ndarray:
    """k^2 times window on the rfft frequency grid; k in rad/nm."""
    k = 2 * np.pi * np.fft.rfftfreq(n_fft, d=dr)
    k_cut = spec.cutoff_fraction * np.pi / dr
    resp = k * k
    ak = np.abs(k)
    if spec.window == "cosine_rolloff":
        start = (1 - ROLLOFF_FRACTION) * k_cut
        t = np.clip((ak - start) / (k_cut - start), 0.0, 1.0)
        resp = resp * 0.5 * (1 + np.cos(np.pi * t))
    resp[ak > k_cut] = 0.0
    resp[0] = 0.0
    return resp


def quadratic_filter(signal: SignalArray, spec: FilterSpec = FilterSpec()) -> SignalArray:
    """Apply the k^2 filter along r to every (theta, phi) column.

    Columns are edge-padded to twice the next power of two. The first sample
    is subtracted beforehand; with edge padding the filter maps constants to
    zero, so this changes nothing except that constant columns come out as
    exact zeros.
    """
    if spec.kind == "none":
        return signal
    n_r = signal.n_r
    if n_r < 4:
        raise ValueError(f"quadratic filter needs at least 4 r bins, got {n_r}")
    n_fft = 2 * (1 << (n_r - 1).bit_length())
    pad_lo = (n_fft - n_r) // 2
    pad_hi = n_fft - n_r - pad_lo
    v = signal.values - signal.values[:1]
    padded = np.pad(v, ((pad_lo, pad_hi), (0, 0), (0, 0)), mode="edge")
    resp = filter_response(n_fft, signal.dr, spec)
    out = np.fft.irfft(np.fft.rfft(padded, axis=0) * resp[:, None, None], n=n_fft, axis=0)
    return signal.with_values(out[pad_lo:pad_lo + n_r])


# --- rotations ------------------------------------------------------------------------

def zy_rotation(a: float, b: float) -> np.ndarray:
    """In-plane rotation by -a composed with a rotation by -b about y (4x4)."""
    rz = np.array([
        [math.cos(-a), -math.sin(-a), 0, 0],
        [math.sin(-a), math.cos(a), 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
    ])
    ry = np.array([
        [math.cos(-b), 0, math.sin(-b), 0],
        [0, 1, 0, 0],
        [-math.sin(-b), 0, math.cos(b), 0],
        [0, 0, 0, 1],
    ])
    return rz @ ry


def rotation_for(theta: float, phi: float) -> RotationOp:
    """Rotation carrying the frame normal z onto the gradient direction u.

    Same z-rotation times y-rotation structure as ``zy_rotation``, with the
    azimuth driving the in-plane rotation and the polar angle the tilt:
    R = Rz(phi) Ry(theta), so R z = (sin t cos p, sin t sin p, cos t).
    """
    return RotationOp(theta, phi, zy_rotation(-phi, -theta))


# --- back-projection --------------------------------------------------------------------

def image_spec(signal: SignalArray, n: int) -> GridSpec:
    """n^3 grid with voxel = r-bin width and a voxel centre at the origin."""
    if signal.n_r > n:
        raise ValueError(f"r-axis has {signal.n_r} bins but the image only {n} voxels per axis")
    return GridSpec.centered(n, signal.dr)


def _canonical_order(signal: SignalArray):
    pairs = [(float(t), float(p), j, k) for j, t in enumerate(signal.thetas) for k, p in enumerate(signal.phis)]
    return sorted(pairs)


def backproject(filtered: SignalArray, n: int, mode: str = "gather", interpolation: str = "linear") -> ImageArray:
    """Accumulate every filtered projection into an n^3 image.

    ``gather``: each voxel x reads column (theta, phi) at r = u . x.
    ``paper``: each r-plane of the column is replicated over an xy-plane of a
    scratch frame, rotated by ``rotation_for`` and splatted into the image.
    Projections are accumulated in sorted (theta, phi) order and the sum is
    divided by the projection count.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if interpolation not in ("linear", "nearest"):
        raise ValueError("interpolation must be 'linear' or 'nearest'")
    spec = image_spec(filtered, n)
    order = _canonical_order(filtered)
    if mode == "gather":
        acc = _gather(filtered, spec, order, interpolation)
    else:
        acc = _scatter(filtered, spec, order, interpolation)
    return ImageArray(spec, acc / len(order), mode)


def sample_backprojection(signal: SignalArray, points, interpolation: str = "linear") -> np.ndarray:
    """Gather-mode back-projection evaluated at arbitrary points (nm), shape (M, 3).

    Sums over projections in sorted (theta, phi) order and divides by their
    count, so ``backproject(..., mode="gather")`` is this function sampled at
    the voxel centres.
    """
    if interpolation not in ("linear", "nearest"):
        raise ValueError("interpolation must be 'linear' or 'nearest'")
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    order = _canonical_order(signal)
    return _gather_points(signal, p[:, 0], p[:, 1], p[:, 2], order, interpolation) / len(order)


def _gather_points(signal: SignalArray, x, y, z, order, interpolation) -> np.ndarray:
    r0, dr = signal.r0, signal.dr
    grid_idx = np.arange(signal.n_r, dtype=float)
    acc = np.zeros(x.shape)
    for theta, phi, j, k in order:
        st = math.sin(theta)
        u = (st * math.cos(phi), st * math.sin(phi), math.cos(theta))
        t = (x * u[0] + y * u[1] + z * u[2] - r0) / dr
        col = signal.values[:, j, k]
        if interpolation == "nearest":
            i = np.rint(t).astype(np.int64)
            ok = (i >= 0) & (i < signal.n_r)
            vals = np.zeros_like(t)
            vals[ok] = col[i[ok]]
        else:
            vals = np.interp(t, grid_idx, col, left=0.0, right=0.0)
        acc += vals
    return acc


def _gather(signal: SignalArray, spec: GridSpec, order, interpolation) -> np.ndarray:
    n = spec.n
    ax = spec.axis(0)
    z, y, x = np.meshgrid(ax, ax, ax, indexing="ij")
    acc = _gather_points(signal, x.ravel(), y.ravel(), z.ravel(), order, interpolation)
    return acc.reshape(n, n, n)


def _splat(acc: np.ndarray, pts: np.ndarray, vals: np.ndarray, spec: GridSpec) -> None:
    """Trilinear splat into the flat accumulator; points needing an
    out-of-grid corner are dropped (same rule as ``trilinear_weights``)."""
    n = spec.n
    f = (pts - np.asarray(spec.origin)) / spec.voxel_size
    base = np.floor(f).astype(np.int64)
    on_edge = base == n - 1
    base[on_edge] -= 1
    inside = np.all((base >= 0) & (base <= n - 2), axis=1)
    f, base, vals = f[inside], base[inside], vals[inside]
    frac = f - base
    flat0 = (base[:, 2] * n + base[:, 1]) * n + base[:, 0]
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    for dz, wz in ((0, 1.0 - fz), (1, fz)):
        vz = vals * wz
        for dy, wy in ((0, 1.0 - fy), (1, fy)):
            vzy = vz * wy
            for dx, wx in ((0, 1.0 - fx), (1, fx)):
                acc += np.bincount(flat0 + ((dz * n + dy) * n + dx), weights=vzy * wx, minlength=n ** 3)


def _scatter(signal: SignalArray, spec: GridSpec, order, interpolation) -> np.ndarray:
    n = spec.n
    ax = spec.axis(0)
    # scratch frame: plane z = r_i for every r bin, each replicated over the xy grid
    pz, py, px = np.meshgrid(signal.r_values, ax, ax, indexing="ij")
    frame = np.column_stack([px.ravel(), py.ravel(), pz.ravel()])
    plane_of = np.repeat(np.arange(signal.n_r), n * n)
    acc = np.zeros(n ** 3)
    for theta, phi, j, k in order:
        rot = rotation_for(theta, phi).linear
        moved = frame @ rot.T
        vals = signal.values[plane_of, j, k]
        if interpolation == "nearest":
            idx = np.rint((moved - np.asarray(spec.origin)) / spec.voxel_size).astype(np.int64)
            ok = np.all((idx >= 0) & (idx < n), axis=1)
            flat = (idx[ok, 2] * n + idx[ok, 1]) * n + idx[ok, 0]
            acc += np.bincount(flat, weights=vals[ok], minlength=n ** 3)
        else:
            _splat(acc, moved, vals, spec)
    return acc.reshape(n, n, n)


def psf_rescale(img: ImageArray, mode: str = "identity") -> ImageArray:
    """Point-spread-function correction hook; only ``identity`` exists so far."""
    if mode != "identity":
        raise ValueError(f"PSF mode {mode!r} is not implemented (available: 'identity')")
    return img


# --- metrics ----------------------------------------------------------------------------

def resample(grid: DensityGrid, spec: GridSpec) -> np.ndarray:
    """Trilinear resampling of ``grid`` onto the voxel centres of ``spec``."""
    if grid.spec == spec:
        return grid.values
    pts = spec.coordinates().reshape(-1, 3)
    f = (pts - np.asarray(grid.spec.origin)) / grid.spec.voxel_size
    coords = f[:, ::-1].T  # values are indexed [z, y, x]
    out = ndimage.map_coordinates(grid.values, coords, order=1, mode="constant", cval=0.0)
    return out.reshape(spec.n, spec.n, spec.n)


def correlation(img: DensityGrid, truth: DensityGrid) -> float:
    """Pearson correlation over all voxels, truth resampled onto img's grid."""
    a = np.asarray(img.values, dtype=float).ravel()
    b = resample(truth, img.spec).ravel()
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0:
        raise ValueError("correlation undefined for a constant image")
    return float(a @ b) / den


def toroid_contrast(img: DensityGrid, core_radius: float = 0.3, annulus=(0.45, 0.75),
                    slab_halfheight: float = 0.4, center=(0.0, 0.0, 0.0)) -> float:
    """Mean density in a cylindrical shell over the mean in the central core.

    Both regions are cylinders about the z-axis through ``center`` cut to
    |z - z_center| <= slab_halfheight; negative voxels count as zero.
    """
    pts = img.spec.coordinates()
    dx = pts[..., 0] - center[0]
    dy = pts[..., 1] - center[1]
    rho = np.hypot(dx, dy)
    slab = np.abs(pts[..., 2] - center[2]) <= slab_halfheight
    core = slab & (rho <= core_radius)
    shell = slab & (rho >= annulus[0]) & (rho <= annulus[1])
    if not core.any() or not shell.any():
        raise ValueError("core or annulus region contains no voxels")
    v = np.clip(img.values, 0.0, None)
    core_mean = float(v[core].mean())
    shell_mean = float(v[shell].mean())
    if core_mean == 0:
        return math.inf if shell_mean > 0 else 1.0
    return shell_mean / core_mean
