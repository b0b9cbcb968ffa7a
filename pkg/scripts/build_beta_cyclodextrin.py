"""Generate 3D coordinates of beta-cyclodextrin (C42H70O35) with RDKit.

Seven alpha-D-glucopyranose units are joined head-to-tail by alpha(1->4)
glycosidic bonds, hydrogens are added, the ring is embedded with ETKDGv3
(macrocycle torsion terms) and relaxed with MMFF94 while the seven bridging
oxygens are held on a regular heptagon of radius 5.07 A (O4-O4 spacing of
4.4 A, as in the crystal), which keeps the ring open instead of letting
vacuum hydrogen bonds collapse it. Stereocentres of every
unit are checked against an embedded monomer by signed volume, so a parity
slip during graph editing cannot pass silently.

RDKit is only needed to regenerate the shipped XYZ file; the package itself
never imports it.

    python scripts/build_beta_cyclodextrin.py src/nvtomo/data/beta_cyclodextrin.xyz
"""

import argparse
import sys

import numpy as np
from rdkit import Chem
from rdkit.Chem import AllChem

# alpha-D-glucopyranose; atom order: C6 C5 C4 C3 C2 C1 O5 O1 O2 O3 O4 O6
GLUCOSE = "C([C@@H]1[C@H]([C@@H]([C@H]([C@H](O1)O)O)O)O)O"
N_UNITS = 7


def _roles(mol):
    """Map glucose atom labels to indices for a single monomer."""
    patt = Chem.MolFromSmarts("[CH2:6]([OX2:16])[CH1:5]1[CH1:4]([OX2:14])[CH1:3]([OX2:13])[CH1:2]([OX2:12])[CH1:1]([OX2:11])[OX2:15]1")
    match = mol.GetSubstructMatch(patt)
    if not match:
        raise RuntimeError("glucose pattern not found")
    roles = {}
    for atom_idx, patt_atom in zip(match, patt.GetAtoms()):
        num = patt_atom.GetAtomMapNum()
        label = {1: "C1", 2: "C2", 3: "C3", 4: "C4", 5: "C5", 6: "C6",
                 11: "O1", 12: "O2", 13: "O3", 14: "O4", 15: "O5", 16: "O6"}[num]
        roles[label] = atom_idx
    return roles


# neighbour roles (heavy atoms) plus implicit H used for the signed volume
CENTRES = {
    "C1": ("O5", "C2", "O1"),
    "C2": ("C1", "C3", "O2"),
    "C3": ("C2", "C4", "O3"),
    "C4": ("C3", "C5", "O4"),
    "C5": ("C4", "O5", "C6"),
}


def _signed_volume(pos, centre, a, b, c):
    va, vb, vc = pos[a] - pos[centre], pos[b] - pos[centre], pos[c] - pos[centre]
    return float(np.dot(va, np.cross(vb, vc)))


def _embed(mol, seed):
    params = AllChem.ETKDGv3()
    params.randomSeed = seed
    params.useMacrocycleTorsions = True
    if AllChem.EmbedMolecule(mol, params) != 0:
        raise RuntimeError("embedding failed")
    AllChem.MMFFOptimizeMolecule(mol, maxIters=5000)
    return mol.GetConformer().GetPositions()


O4_RING_RADIUS = 5.07  # Angstrom


def _relax_open_ring(mol, bridges):
    props = AllChem.MMFFGetMoleculeProperties(mol)
    ff = AllChem.MMFFGetMoleculeForceField(mol, props)
    n = len(bridges)
    for i in range(n):
        for j in range(i + 1, n):
            d = 2 * O4_RING_RADIUS * np.sin(np.pi * (j - i) / n)
            ff.MMFFAddDistanceConstraint(bridges[i], bridges[j], False, d - 0.05, d + 0.05, 500.0)
    ff.Minimize(maxIts=20000)
    return mol.GetConformer().GetPositions()


def _align(pos, bridges):
    """Centre on the bridging-oxygen ring and put the ring normal on +z."""
    ring = pos[bridges]
    centre = ring.mean(axis=0)
    _, vecs = np.linalg.eigh(np.cov((ring - centre).T))
    frame = vecs[:, ::-1]  # largest in-plane variance -> x, normal -> z
    if np.linalg.det(frame) < 0:
        frame[:, 0] *= -1
    return (pos - centre) @ frame


def build(seed=24):
    mono = Chem.AddHs(Chem.MolFromSmiles(GLUCOSE))
    mono_pos = _embed(mono, seed)
    mono_roles = _roles(mono)
    reference = {
        c: np.sign(_signed_volume(mono_pos, mono_roles[c], *(mono_roles[r] for r in nbrs)))
        for c, nbrs in CENTRES.items()
    }

    heavy = Chem.MolFromSmiles(GLUCOSE)
    unit_roles = _roles(heavy)
    combo = heavy
    for _ in range(N_UNITS - 1):
        combo = Chem.CombineMols(combo, heavy)
    rw = Chem.RWMol(combo)
    n = heavy.GetNumAtoms()
    roles = [{k: v + i * n for k, v in unit_roles.items()} for i in range(N_UNITS)]
    # O1 of unit i becomes the bridge to C4 of unit i+1; O4 of unit i+1 is dropped
    for i in range(N_UNITS):
        j = (i + 1) % N_UNITS
        rw.AddBond(roles[i]["O1"], roles[j]["C4"], Chem.BondType.SINGLE)
    for i in sorted((r["O4"] for r in roles), reverse=True):
        rw.RemoveAtom(i)
    # recompute indices after removals
    removed = sorted(r["O4"] for r in roles)

    def shift(idx):
        return idx - sum(1 for k in removed if k < idx)

    roles = [{k: shift(v) for k, v in r.items() if k != "O4"} for r in roles]
    for i in range(N_UNITS):
        roles[i]["O4"] = roles[(i - 1) % N_UNITS]["O1"]

    mol = rw.GetMol()
    Chem.SanitizeMol(mol)
    for attempt in range(4):
        molh = Chem.AddHs(mol)
        pos = _embed(molh, seed + attempt)
        flipped = False
        for r in roles:
            for c, nbrs in CENTRES.items():
                sign = np.sign(_signed_volume(pos, r[c], *(r[x] for x in nbrs)))
                if sign != reference[c]:
                    mol.GetAtomWithIdx(r[c]).InvertChirality()
                    flipped = True
        if not flipped:
            bridges = [r["O1"] for r in roles]
            pos = _relax_open_ring(molh, bridges)
            return molh, _align(pos, bridges)
    raise RuntimeError("stereocentres did not converge")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output")
    ap.add_argument("--seed", type=int, default=24)
    ap.add_argument("--pdb", help="also write HETATM records to this path")
    args = ap.parse_args(argv)

    mol, pos = build(args.seed)
    symbols = [a.GetSymbol() for a in mol.GetAtoms()]
    counts = {s: symbols.count(s) for s in sorted(set(symbols))}
    if counts != {"C": 42, "H": 70, "O": 35}:
        raise RuntimeError(f"unexpected composition {counts}")
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(symbols)}\n")
        fh.write("beta-cyclodextrin C42H70O35, RDKit ETKDGv3+MMFF94 (open-ring restraint), ring normal along z, Angstrom\n")
        for s, (x, y, z) in zip(symbols, pos):
            fh.write(f"{s:2s} {x:12.6f} {y:12.6f} {z:12.6f}\n")
    print(f"wrote {args.output}: {counts}", file=sys.stderr)
    if args.pdb:
        write_pdb(args.pdb, symbols, pos)


def write_pdb(path, symbols, pos):
    seen = {}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("COMPND    BETA-CYCLODEXTRIN\n")
        for serial, (el, (x, y, z)) in enumerate(zip(symbols, pos), start=1):
            seen[el] = seen.get(el, 0) + 1
            name = f"{el}{seen[el]}"
            name = f" {name:<3s}" if len(name) < 4 else name[:4]
            fh.write(f"HETATM{serial:5d} {name} BCD A   1    {x:8.3f}{y:8.3f}{z:8.3f}  1.00  0.00          {el:>2s}\n")
        fh.write("END\n")


if __name__ == "__main__":
    main()
