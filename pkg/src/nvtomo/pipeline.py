"""End-to-end run: phantom -> spectra -> filtered back-projection -> metrics."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, phantom, physics
from .config import ConfigError, RunConfig
from .encoder import ProjectionGrid, SignalArray, add_measurement_noise, encode_all, max_occupied_spread
from .recon import FilterSpec, ImageArray, backproject, correlation, psf_rescale, quadratic_filter, toroid_contrast
from .timing import estimate_time

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4

ARTIFACTS = {
    "spectra": "spectra.csv",
    "signal": "signal.nvs",
    "raw": "recon_raw.nvg",
    "filtered": "recon_filtered.nvg",
    "truth": "truth.nvg",
    "metrics": "metrics.txt",
    "plot_data": "plot_data.csv",
    "config": "config.txt",
}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception, exit_code: int):
        self.stage = stage
        self.exit_code = exit_code
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class Placement:
    molecule: phantom.Molecule
    nv: phantom.NVGeometry

    @property
    def center(self) -> tuple[float, float, float]:
        return tuple(float(c) for c in self.molecule.positions.mean(axis=0))


@dataclass
class RunResult:
    config: RunConfig
    placement: Placement
    signal: SignalArray
    raw: ImageArray
    image: ImageArray
    truth: phantom.DensityGrid
    metrics: dict = field(default_factory=dict)


def load_phantom(cfg: RunConfig) -> phantom.Molecule:
    """Hydrogen phantom named by ``cfg.input`` (plus an optional surface layer)."""
    if cfg.input == "beta-cyclodextrin":
        mol = phantom.extract_hydrogens(phantom.beta_cyclodextrin())
    elif cfg.input == "toroid":
        mol = phantom.generate_toroid(cfg.toroid_n, cfg.toroid_major_nm, cfg.toroid_tube_nm, cfg.seed)
    else:
        mol = phantom.extract_hydrogens(phantom.load_molecule(cfg.input))
    mol.require_atoms()
    return mol


def place(cfg: RunConfig, mol: phantom.Molecule) -> Placement:
    m, nv = phantom.center_and_place(mol, cfg.nv_depth_nm, cfg.nv_axis_vector)
    if cfg.surface_density > 0:
        m = phantom.add_surface_layer(m, cfg.surface_density, cfg.surface_extent_nm, 0.0, cfg.seed)
    return Placement(m, nv)


def encode(cfg: RunConfig, placement: Placement) -> SignalArray:
    sig = encode_all(placement.molecule, ProjectionGrid(cfg.n_theta, cfg.n_phi),
                     cfg.gradient_g_per_nm * physics.G_PER_NM, cfg.delta_f_hz,
                     placement.nv.position, placement.nv.axis, cfg.slice_combine)
    return add_measurement_noise(sig, cfg.noise_sigma_t, cfg.seed)


def reconstruct(cfg: RunConfig, sig: SignalArray) -> tuple[ImageArray, ImageArray]:
    """Unfiltered and filtered back-projections (the latter through the PSF hook)."""
    spec = FilterSpec(cfg.filter_kind, cfg.filter_cutoff, cfg.filter_window)
    raw = backproject(sig, cfg.grid_n, cfg.mode, cfg.interpolation)
    img = backproject(quadratic_filter(sig, spec), cfg.grid_n, cfg.mode, cfg.interpolation)
    img = psf_rescale(img, cfg.psf_mode)
    if not np.all(np.isfinite(img.values)):
        raise FloatingPointError("reconstruction contains non-finite voxels")
    return raw, img


def compute_metrics(cfg: RunConfig, placement: Placement, sig: SignalArray, img: ImageArray,
                    truth: phantom.DensityGrid) -> dict:
    nv = placement.nv
    spread, (j, k) = max_occupied_spread(sig)
    est = estimate_time(len(sig.thetas) * len(sig.phis), max(spread, cfg.delta_f_hz), cfg.delta_f_hz,
                        cfg.timing_method)
    return {
        "n_spins": len(placement.molecule),
        "brms_nt": physics.dipolar_brms(placement.molecule.positions, nv.position, nv.axis) * 1e9,
        "larmor_hz": physics.larmor_frequency(cfg.b0_gauss * physics.GAUSS),
        "slice_width_nm": sig.dr,
        "n_r": sig.n_r,
        "n_projections": len(sig.thetas) * len(sig.phis),
        "max_spread_hz": spread,
        "max_spread_theta_deg": math.degrees(sig.thetas[j]),
        "max_spread_phi_deg": math.degrees(sig.phis[k]),
        "rho": correlation(img, truth),
        "contrast": toroid_contrast(img, cfg.core_radius_nm, (cfg.annulus_inner_nm, cfg.annulus_outer_nm),
                                    cfg.slab_halfheight_nm, placement.center),
        "acquisition_seconds": est.total_seconds,
        "acquisition_breakdown": est.breakdown(),
    }


def format_metrics(metrics: dict) -> str:
    lines = []
    for key, value in metrics.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def plot_data_csv(sig: SignalArray, img: ImageArray, center) -> str:
    """Spectra plus central xy / xz image slices, long format."""
    out = ["kind,i,j,k,x,y,value"]
    r = sig.r_values
    for j in range(len(sig.thetas)):
        for k in range(len(sig.phis)):
            for i in range(sig.n_r):
                out.append(f"signal,{i},{j},{k},{r[i]!r},0,{sig.values[i, j, k]!r}")
    ax = img.spec.axis(0)
    iz = int(np.argmin(np.abs(img.spec.axis(2) - center[2])))
    iy = int(np.argmin(np.abs(img.spec.axis(1) - center[1])))
    for a in range(img.spec.n):
        for b in range(img.spec.n):
            out.append(f"slice_xy,{b},{a},{iz},{ax[b]!r},{ax[a]!r},{img.values[iz, a, b]!r}")
            out.append(f"slice_xz,{b},{iy},{a},{ax[b]!r},{ax[a]!r},{img.values[a, iy, b]!r}")
    return "\n".join(out) + "\n"


def _stage(name, code, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (phantom.ParseError, phantom.EmptyMoleculeError, OSError) as exc:
        raise StageError(name, exc, EXIT_INPUT) from exc
    except ConfigError as exc:
        raise StageError(name, exc, EXIT_CONFIG) from exc
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        raise StageError(name, exc, code) from exc


def run(cfg: RunConfig) -> RunResult:
    """Run every stage in memory; nothing is written."""
    t0 = time.perf_counter()
    mol = _stage("load", EXIT_INPUT, load_phantom, cfg)
    placement = _stage("place", EXIT_INPUT, place, cfg, mol)
    sig = _stage("encode", EXIT_NUMERICAL, encode, cfg, placement)
    raw, img = _stage("reconstruct", EXIT_NUMERICAL, reconstruct, cfg, sig)
    truth = _stage("truth", EXIT_NUMERICAL, phantom.voxelize, placement.molecule, img.spec)
    metrics = _stage("metrics", EXIT_NUMERICAL, compute_metrics, cfg, placement, sig, img, truth)
    log.info("pipeline finished in %.2f s", time.perf_counter() - t0)
    return RunResult(cfg, placement, sig, raw, img, truth, metrics)


def write_artifacts(result: RunResult, output_dir=None) -> dict:
    out = Path(output_dir or result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in ARTIFACTS.items()}
    paths["spectra"].write_text(io.spectra_to_csv(io.signal_spectra(result.signal)), encoding="utf-8", newline="\n")
    io.write_signal(paths["signal"], result.signal)
    io.write_grid(paths["raw"], result.raw)
    io.write_grid(paths["filtered"], result.image)
    io.write_grid(paths["truth"], result.truth)
    paths["metrics"].write_text(format_metrics(result.metrics), encoding="utf-8", newline="\n")
    paths["plot_data"].write_text(plot_data_csv(result.signal, result.image, result.placement.center),
                                  encoding="utf-8", newline="\n")
    paths["config"].write_text(result.config.to_text(), encoding="utf-8", newline="\n")
    return paths


def run_pipeline(cfg: RunConfig, output_dir=None) -> RunResult:
    result = run(cfg)
    try:
        write_artifacts(result, output_dir)
    except OSError as exc:
        raise StageError("write", exc, EXIT_INPUT) from exc
    return result
