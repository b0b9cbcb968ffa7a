"""On-disk formats for grids, signal arrays and spectra.

Grid (``.nvg``)::

    b"NVG1" | version u32 | nx ny nz u32 | voxel_size_nm f64 | origin f64 x3
    | payload f64[nz][ny][nx]

Signal array (``.nvs``)::

    b"NVS1" | n_r n_theta n_phi u32 | delta_f_hz gradient_t_per_m r0_nm dr_nm f64
    | thetas f64[n_theta] | phis f64[n_phi] | payload f64[n_phi][n_theta][n_r]

Everything little-endian; payloads are written with x (resp. r) fastest.
"""

from __future__ import annotations

import csv
import io as _io
import math
import struct
from collections import defaultdict

import numpy as np

from .encoder import SignalArray, SpinNoiseSpectrum
from .phantom import DensityGrid, GridSpec
from .physics import CONSTANTS, NM, GradientSetting

GRID_MAGIC = b"NVG1"
GRID_VERSION = 1
SIGNAL_MAGIC = b"NVS1"

_GRID_HEADER = struct.Struct("<4sIIII4d")
_SIGNAL_HEADER = struct.Struct("<4sIII4d")

SPECTRA_COLUMNS = ("proj_index", "theta_deg", "phi_deg", "freq_offset_hz", "r_nm", "brms_tesla")


class FormatError(ValueError):
    pass


def _ensure_square(nx, ny, nz):
    if not nx == ny == nz:
        raise FormatError(f"only cubic grids are supported, got {nx}x{ny}x{nz}")


# --- grids ----------------------------------------------------------------------------

def grid_to_bytes(grid: DensityGrid) -> bytes:
    n = grid.spec.n
    header = _GRID_HEADER.pack(GRID_MAGIC, GRID_VERSION, n, n, n, grid.spec.voxel_size, *grid.spec.origin)
    return header + np.ascontiguousarray(grid.values, dtype="<f8").tobytes()


def grid_from_bytes(data: bytes) -> DensityGrid:
    if len(data) < _GRID_HEADER.size:
        raise FormatError("truncated grid header")
    magic, version, nx, ny, nz, voxel, ox, oy, oz = _GRID_HEADER.unpack_from(data)
    if magic != GRID_MAGIC:
        raise FormatError(f"bad grid magic {magic!r}")
    if version != GRID_VERSION:
        raise FormatError(f"unsupported grid version {version}")
    _ensure_square(nx, ny, nz)
    expected = _GRID_HEADER.size + 8 * nx * ny * nz
    if len(data) != expected:
        raise FormatError(f"grid payload has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=_GRID_HEADER.size).reshape(nz, ny, nx)
    try:
        spec = GridSpec(nx, voxel, (ox, oy, oz))
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    return DensityGrid(spec, values.astype(float))


def write_grid(path, grid: DensityGrid) -> None:
    with open(path, "wb") as fh:
        fh.write(grid_to_bytes(grid))


def read_grid(path) -> DensityGrid:
    with open(path, "rb") as fh:
        return grid_from_bytes(fh.read())


# --- signal arrays ----------------------------------------------------------------------

def signal_to_bytes(sig: SignalArray) -> bytes:
    n_r, nt, npf = sig.values.shape
    header = _SIGNAL_HEADER.pack(SIGNAL_MAGIC, n_r, nt, npf, sig.delta_f, sig.gradient, sig.r0, sig.dr)
    angles = np.concatenate([sig.thetas, sig.phis]).astype("<f8").tobytes()
    payload = np.ascontiguousarray(np.transpose(sig.values, (2, 1, 0)), dtype="<f8").tobytes()
    return header + angles + payload


def signal_from_bytes(data: bytes) -> SignalArray:
    if len(data) < _SIGNAL_HEADER.size:
        raise FormatError("truncated signal header")
    magic, n_r, nt, npf, delta_f, gradient, r0, dr = _SIGNAL_HEADER.unpack_from(data)
    if magic != SIGNAL_MAGIC:
        raise FormatError(f"bad signal magic {magic!r}")
    expected = _SIGNAL_HEADER.size + 8 * (nt + npf + n_r * nt * npf)
    if len(data) != expected:
        raise FormatError(f"signal file has {len(data)} bytes, expected {expected}")
    off = _SIGNAL_HEADER.size
    angles = np.frombuffer(data, dtype="<f8", count=nt + npf, offset=off).astype(float)
    off += 8 * (nt + npf)
    payload = np.frombuffer(data, dtype="<f8", offset=off).reshape(npf, nt, n_r)
    try:
        return SignalArray(r0, dr, angles[:nt], angles[nt:],
                           np.transpose(payload, (2, 1, 0)).astype(float), delta_f, gradient)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_signal(path, sig: SignalArray) -> None:
    with open(path, "wb") as fh:
        fh.write(signal_to_bytes(sig))


def read_signal(path) -> SignalArray:
    with open(path, "rb") as fh:
        return signal_from_bytes(fh.read())


# --- spectra CSV ------------------------------------------------------------------------------

def spectra_to_csv(spectra) -> str:
    """One row per bin; ``spectra`` is an iterable of SpinNoiseSpectrum."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SPECTRA_COLUMNS)
    for idx, s in enumerate(spectra):
        theta_deg = math.degrees(s.gradient.theta)
        phi_deg = math.degrees(s.gradient.phi)
        for f, r, b in zip(s.freq_offsets, s.r_values, s.brms):
            w.writerow([idx, f"{theta_deg:.17e}", f"{phi_deg:.17e}", f"{f:.17e}", f"{r:.17e}", f"{b:.17e}"])
    return buf.getvalue()


def signal_spectra(sig: SignalArray):
    """Spectra of a signal array in proj_index order (theta outer, phi inner)."""
    return [sig.spectrum(j, k) for j in range(len(sig.thetas)) for k in range(len(sig.phis))]


def spectra_from_csv(text: str) -> list[SpinNoiseSpectrum]:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or tuple(rows[0]) != SPECTRA_COLUMNS:
        raise FormatError(f"spectra CSV header must be {','.join(SPECTRA_COLUMNS)}")
    groups = defaultdict(list)
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(SPECTRA_COLUMNS):
            raise FormatError(f"line {lineno}: expected {len(SPECTRA_COLUMNS)} fields")
        try:
            groups[int(row[0])].append([float(v) for v in row[1:]])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric field") from None
    out = []
    for idx in sorted(groups):
        a = np.array(groups[idx])
        freqs, rs, brms = a[:, 2], a[:, 3], a[:, 4]
        nz = np.flatnonzero(rs != 0)
        if len(freqs) < 2 or nz.size == 0:
            raise FormatError(f"projection {idx}: need at least two bins to recover delta_f and gradient")
        delta_f = float(freqs[1] - freqs[0])
        rate = freqs[nz[0]] / rs[nz[0]]  # Hz per nm
        g = GradientSetting(math.radians(a[0, 0]), math.radians(a[0, 1]), rate / (CONSTANTS.gamma_h_hz * NM))
        first = int(round(freqs[0] / delta_f))
        out.append(SpinNoiseSpectrum(freqs, brms, delta_f, g, first))
    return out
