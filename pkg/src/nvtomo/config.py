"""Run configuration: a flat ``key = value`` file, defaults at the reference
operating point (500 G, 3 G/nm, 1.28 kHz bins, 9x9 orientations, 5 nm NV)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .encoder import SLICE_COMBINE
from .recon import FILTER_KINDS, MODES, WINDOWS
from .timing import METHODS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    input: str = "beta-cyclodextrin"  # builtin name, 'toroid', or a .xyz/.pdb path
    output_dir: str = "out"
    b0_gauss: float = 500.0
    gradient_g_per_nm: float = 3.0
    delta_f_hz: float = 1280.0
    n_theta: int = 9
    n_phi: int = 9
    nv_depth_nm: float = 5.0
    nv_axis: str = "1,1,1"
    grid_n: int = 64
    mode: str = "gather"
    interpolation: str = "linear"
    slice_combine: str = "quadrature"
    filter_kind: str = "quadratic_ramp"
    filter_cutoff: float = 1.0
    filter_window: str = "cosine_rolloff"
    psf_mode: str = "identity"
    noise_sigma_t: float = 0.0
    seed: int = 42
    toroid_n: int = 70
    toroid_major_nm: float = 0.525
    toroid_tube_nm: float = 0.225
    surface_density: float = 0.0  # spins / nm^2
    surface_extent_nm: float = 4.0
    core_radius_nm: float = 0.3
    annulus_inner_nm: float = 0.45
    annulus_outer_nm: float = 0.75
    slab_halfheight_nm: float = 0.4
    timing_method: str = "enhanced"

    def __post_init__(self):
        positive = ("b0_gauss", "gradient_g_per_nm", "delta_f_hz", "nv_depth_nm", "filter_cutoff",
                    "toroid_major_nm", "toroid_tube_nm", "surface_extent_nm", "core_radius_nm",
                    "annulus_inner_nm", "annulus_outer_nm", "slab_halfheight_nm")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("n_theta", "n_phi", "toroid_n"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.grid_n < 4:
            raise ConfigError("grid_n must be >= 4")
        if self.noise_sigma_t < 0 or self.surface_density < 0:
            raise ConfigError("noise_sigma_t and surface_density must be >= 0")
        if self.filter_cutoff > 1:
            raise ConfigError("filter_cutoff is a fraction of Nyquist and must be <= 1")
        choices = {
            "mode": MODES, "slice_combine": SLICE_COMBINE, "filter_kind": FILTER_KINDS,
            "filter_window": WINDOWS, "interpolation": ("linear", "nearest"),
            "psf_mode": ("identity",), "timing_method": tuple(METHODS),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        self.nv_axis_vector  # validates

    @property
    def nv_axis_vector(self) -> tuple[float, float, float]:
        try:
            v = tuple(float(x) for x in self.nv_axis.split(","))
        except ValueError:
            raise ConfigError(f"nv_axis must be 'x,y,z', got {self.nv_axis!r}") from None
        if len(v) != 3 or not any(v):
            raise ConfigError(f"nv_axis must be a non-zero 3-vector, got {self.nv_axis!r}")
        return v

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = types[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for key, raw in (overrides or {}).items():
        values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
