"""Molecular phantoms: coordinate parsing, hydrogen extraction, placement
above the NV centre, synthetic toroids and ground-truth voxelization.

All lengths are in nm. File formats carry Angstrom and are converted at the
boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

log = logging.getLogger(__name__)

ANGSTROM_PER_NM = 10.0

# enough of the periodic table for biomolecules and common phantoms
ELEMENTS = frozenset(
    """H D He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Mn Fe Co Ni Cu Zn
    Se Br I""".split()
)


class ParseError(ValueError):
    """Malformed coordinate input. ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyMoleculeError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    position: tuple[float, float, float]

    def __post_init__(self):
        if self.element not in ELEMENTS:
            raise ValueError(f"unknown element {self.element!r}")
        if len(self.position) != 3 or not all(math.isfinite(c) for c in self.position):
            raise ValueError(f"non-finite position {self.position!r}")


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    name: str = ""

    def __len__(self):
        return len(self.atoms)

    @property
    def positions(self) -> np.ndarray:
        """(N, 3) array of positions in nm."""
        if not self.atoms:
            return np.zeros((0, 3))
        return np.array([a.position for a in self.atoms], dtype=float)

    @property
    def elements(self) -> list[str]:
        return [a.element for a in self.atoms]

    @classmethod
    def from_arrays(cls, elements, positions, name: str = "") -> "Molecule":
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        if isinstance(elements, str):
            elements = [elements] * len(positions)
        atoms = tuple(
            Atom(el, (float(p[0]), float(p[1]), float(p[2])))
            for el, p in zip(elements, positions)
        )
        return cls(atoms, name)

    def require_atoms(self) -> None:
        if not self.atoms:
            raise EmptyMoleculeError(f"molecule {self.name!r} has no atoms")


@dataclass(frozen=True)
class NVGeometry:
    position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -5.0]))
    axis: np.ndarray = field(default_factory=lambda: np.ones(3) / np.sqrt(3.0))


@dataclass(frozen=True)
class GridSpec:
    """Cubic voxel grid. ``origin`` is the centre of voxel (0, 0, 0)."""

    n: int
    voxel_size: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2, got {self.n}")
        if not self.voxel_size > 0:
            raise ValueError(f"voxel_size must be positive, got {self.voxel_size}")

    @classmethod
    def centered(cls, n: int, voxel_size: float) -> "GridSpec":
        """Grid whose voxel ``n // 2`` sits at the coordinate origin on every axis."""
        o = -(n // 2) * voxel_size
        return cls(n, voxel_size, (o, o, o))

    def axis(self, dim: int) -> np.ndarray:
        return self.origin[dim] + self.voxel_size * np.arange(self.n)

    def coordinates(self) -> np.ndarray:
        """Voxel centres, shape (n, n, n, 3), indexed [z, y, x]."""
        z, y, x = np.meshgrid(self.axis(2), self.axis(1), self.axis(0), indexing="ij")
        return np.stack([x, y, z], axis=-1)


@dataclass
class DensityGrid:
    """Scalar field on a GridSpec. ``values`` is indexed [z, y, x]."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.spec.n
        if self.values.shape != (n, n, n):
            raise ValueError(f"values shape {self.values.shape} does not match n={n}")


# --- parsers -----------------------------------------------------------------

def parse_xyz(text: str, name: str = "") -> Molecule:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty input", 1)
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"atom count expected, got {lines[0]!r}", 1) from None
    if count < 0:
        raise ParseError("negative atom count", 1)
    comment = lines[1].strip() if len(lines) > 1 else ""
    body = [(i + 3, ln) for i, ln in enumerate(lines[2:]) if ln.strip()]
    if len(body) != count:
        raise ParseError(f"header declares {count} atoms, found {len(body)}", 1)

    atoms = []
    for lineno, ln in body:
        parts = ln.split()
        if len(parts) < 4:
            raise ParseError(f"expected 'element x y z', got {ln!r}", lineno)
        el = _normalize_element(parts[0])
        try:
            xyz = [float(v) / ANGSTROM_PER_NM for v in parts[1:4]]
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {ln!r}", lineno) from None
        try:
            atoms.append(Atom(el, tuple(xyz)))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return Molecule(tuple(atoms), name or comment)


def write_xyz(m: Molecule, comment: str | None = None) -> str:
    out = [str(len(m)), m.name if comment is None else comment]
    for a in m.atoms:
        x, y, z = (c * ANGSTROM_PER_NM for c in a.position)
        out.append(f"{a.element} {x!r} {y!r} {z!r}")
    return "\n".join(out) + "\n"


def _normalize_element(symbol: str) -> str:
    s = symbol.strip()
    return s[:1].upper() + s[1:].lower()


def _element_from_name(name: str) -> str:
    """Guess the element from a PDB atom name such as ' HO2', '1HB ', 'CA'."""
    s = name.strip()
    if s[:1].isdigit() and s[1:2].upper() == "H":
        return "H"
    if s[:1].upper() == "H":
        return "H"
    letters = "".join(ch for ch in s if ch.isalpha())
    if not letters:
        raise ValueError(f"cannot infer element from atom name {name!r}")
    two = _normalize_element(letters[:2])
    # four-char names with the element in column 13 are two-letter elements
    if len(name) >= 2 and name[0] != " " and two in ELEMENTS and not name[0].isdigit():
        return two
    return _normalize_element(letters[0])


def parse_pdb_atoms(text: str, name: str = "") -> Molecule:
    atoms = []
    for lineno, ln in enumerate(text.splitlines(), start=1):
        if not ln.startswith(("ATOM  ", "HETATM")):
            continue
        try:
            xyz = tuple(float(ln[c:c + 8]) / ANGSTROM_PER_NM for c in (30, 38, 46))
        except ValueError:
            raise ParseError(f"unparseable coordinate field {ln[30:54]!r}", lineno) from None
        el = ln[76:78].strip() if len(ln) >= 77 else ""
        try:
            el = _normalize_element(el) if el else _element_from_name(ln[12:16])
            atoms.append(Atom(el, xyz))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if not atoms:
        raise EmptyMoleculeError("no ATOM/HETATM records")
    return Molecule(tuple(atoms), name)


def load_molecule(path) -> Molecule:
    """Read an .xyz or .pdb file, dispatching on the suffix."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    if path.lower().endswith((".pdb", ".ent")):
        return parse_pdb_atoms(text, name=stem)
    return parse_xyz(text, name=stem)


def beta_cyclodextrin() -> Molecule:
    """All-atom beta-cyclodextrin (C42H70O35), ring normal along z."""
    text = resources.files("nvtomo.data").joinpath("beta_cyclodextrin.xyz").read_text("utf-8")
    return parse_xyz(text, name="beta-cyclodextrin")


# --- transformations -----------------------------------------------------------

def extract_hydrogens(m: Molecule) -> Molecule:
    return Molecule(tuple(a for a in m.atoms if a.element in ("H", "D")), m.name)


def center_and_place(m: Molecule, nv_depth: float = 5.0, nv_axis=None) -> tuple[Molecule, NVGeometry]:
    """Put the molecule on the diamond surface (z = 0) above the NV.

    The centroid goes onto the z-axis and the lowest atom onto z = 0; the NV
    sits at (0, 0, -nv_depth). Everything is computed from offsets to the
    first atom, so translating the input by an exactly representable vector
    gives a bit-identical result.
    """
    m.require_atoms()
    if not nv_depth > 0:
        raise ValueError(f"nv_depth must be positive, got {nv_depth}")
    pos = m.positions
    rel = pos - pos[0]
    out = np.empty_like(rel)
    out[:, :2] = rel[:, :2] - rel[:, :2].mean(axis=0)
    out[:, 2] = rel[:, 2] - rel[:, 2].min()
    axis = np.ones(3) / np.sqrt(3.0) if nv_axis is None else np.asarray(nv_axis, dtype=float)
    norm = np.linalg.norm(axis)
    if not norm > 0:
        raise ValueError("nv_axis must be non-zero")
    nv = NVGeometry(np.array([0.0, 0.0, -float(nv_depth)]), axis / norm)
    return Molecule.from_arrays(m.elements, out, m.name), nv


def generate_toroid(n_points: int = 70, major_radius: float = 0.525, tube_radius: float = 0.225,
                    seed: int = 0) -> Molecule:
    """Hydrogens sampled uniformly (by area) on a torus around the z-axis."""
    if not major_radius > tube_radius > 0:
        raise ValueError("need major_radius > tube_radius > 0")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = np.random.default_rng(seed)
    R, r = float(major_radius), float(tube_radius)
    v = np.empty(0)
    # area element is proportional to R + r cos(v)
    while v.size < n_points:
        cand = rng.uniform(0.0, 2 * np.pi, size=2 * n_points)
        keep = rng.uniform(0.0, R + r, size=cand.size) < R + r * np.cos(cand)
        v = np.concatenate([v, cand[keep]])
    v = v[:n_points]
    u = rng.uniform(0.0, 2 * np.pi, size=n_points)
    rho = R + r * np.cos(v)
    pos = np.column_stack([rho * np.cos(u), rho * np.sin(u), r * np.sin(v)])
    return Molecule.from_arrays("H", pos, name=f"toroid-R{R}-r{r}-s{seed}")


def add_surface_layer(m: Molecule, areal_density: float, extent: float, z_level: float = 0.0,
                      seed: int = 0) -> Molecule:
    """Append a random monolayer of hydrogens (adsorbed water and the like)."""
    if areal_density < 0 or not extent > 0:
        raise ValueError("need areal_density >= 0 and extent > 0")
    count = int(round(areal_density * extent ** 2))
    if count == 0:
        return m
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-extent / 2, extent / 2, size=(count, 2))
    layer = Molecule.from_arrays("H", np.column_stack([xy, np.full(count, float(z_level))]))
    return Molecule(m.atoms + layer.atoms, m.name)


# --- voxelization ----------------------------------------------------------------

def trilinear_weights(points: np.ndarray, spec: GridSpec):
    """Corner indices and weights for trilinear interpolation/splatting.

    Returns ``(idx, w, inside)`` where idx is (M, 8, 3) integer [x, y, z]
    corner indices, w is (M, 8) weights and ``inside`` masks the points whose
    eight corners all lie in the grid.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    f = (pts - np.asarray(spec.origin)) / spec.voxel_size
    base = np.floor(f).astype(np.int64)
    frac = f - base
    # a point exactly on the last voxel centre still needs a valid upper corner
    on_edge = base == spec.n - 1
    base[on_edge] -= 1
    frac[on_edge] += 1.0
    inside = np.all((base >= 0) & (base <= spec.n - 2), axis=1)
    offsets = np.array([[i, j, k] for k in (0, 1) for j in (0, 1) for i in (0, 1)])
    idx = base[:, None, :] + offsets[None, :, :]
    w = np.prod(np.where(offsets[None, :, :] == 1, frac[:, None, :], 1.0 - frac[:, None, :]), axis=2)
    return idx, w, inside


def voxelize(m: Molecule, spec: GridSpec, weights=None) -> DensityGrid:
    """Deposit each atom with weight 1 (or ``weights``) by trilinear splatting."""
    n = spec.n
    pts = m.positions
    wts = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    values = np.zeros(n ** 3)
    if len(pts):
        idx, w, inside = trilinear_weights(pts, spec)
        dropped = int((~inside).sum())
        if dropped:
            log.warning("voxelize: %d of %d atoms outside the grid were dropped", dropped, len(pts))
        idx, w = idx[inside], w[inside] * wts[inside, None]
        flat = (idx[..., 2] * n + idx[..., 1]) * n + idx[..., 0]
        values = np.bincount(flat.ravel(), weights=w.ravel(), minlength=n ** 3)
    return DensityGrid(spec, values.reshape(n, n, n))
