"""Functional-group decomposition of molecular graphs.

Detection runs a declarative catalogue of patterns (root-atom constraints
plus neighbor-slot requirements, with one-level look-ahead exclusions) and
two aromatic-ring patterns. Atoms left over after detection are
interpolated onto the nearest detected group by graph hop distance, ties
resolved toward the lowest group id; a molecule with no detected groups
gets one fallback group holding every atom. The result is the binary
atom-by-group matrix M with total row coverage.

Group ids are dense and ordered by (pattern_id, lowest member atom index),
which fixes the F axis everywhere downstream. The catalogue is fingerprinted
(catalogue_hash) so label files can verify they were produced against the
same pattern set.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageViolation
from .molgraph import MolecularGraph, shortest_path_distances

FALLBACK = -1


@dataclass(frozen=True)
class AtomReq:
    """Constraints one atom must satisfy. None fields match anything."""
    element: tuple[str, ...] | None = None
    aromatic: bool | None = None
    charge: int | None = None
    min_h: int | None = None
    degree: int | None = None
    protic: bool = False   # implicit_h >= 1 or negative formal charge


@dataclass(frozen=True)
class Nbr:
    """One neighbor slot: between min_count and max_count distinct
    neighbors of the root must match. `lacks` lists (AtomReq, order)
    pairs that must NOT appear among the matched neighbor's own
    neighbors (the root itself is not considered)."""
    atom: AtomReq
    order: object = None        # 1, 2, 3, "aromatic", or None for any
    min_count: int = 1
    max_count: int = 1
    member: bool = True
    lacks: tuple = ()


@dataclass(frozen=True)
class Pattern:
    name: str
    root: AtomReq | None = None
    nbrs: tuple[Nbr, ...] = ()
    exact_neighbors: bool = False   # every heavy neighbor must fill a slot
    ring_size: int | None = None    # set for aromatic-ring patterns
    ring_hetero: bool = False


@dataclass
class GroupAssignment:
    group_id: int
    pattern_id: int
    name: str
    member_atoms: frozenset[int]
    assigned_atoms: set[int] = field(default_factory=set)

    def all_atoms(self):
        return self.member_atoms | self.assigned_atoms


_C = AtomReq(element=("C",))
_O1 = AtomReq(element=("O",), degree=1)
_CARBONYL_O = (AtomReq(element=("O",)), 2)   # used in `lacks`
_IMINE_N = (AtomReq(element=("N",)), 2)


def default_catalogue() -> tuple[Pattern, ...]:
    amine_c = Nbr(_C, order=1, member=False, lacks=(_CARBONYL_O, _IMINE_N))
    return (
        Pattern("hydroxyl",
                AtomReq(element=("O",), aromatic=False, charge=0, degree=1, min_h=1),
                (Nbr(_C, order=1, member=False, lacks=(_CARBONYL_O,)),)),
        Pattern("carboxylic_acid",
                AtomReq(element=("C",), aromatic=False),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(AtomReq(element=("O",), degree=1, protic=True), order=1))),
        Pattern("ester",
                AtomReq(element=("C",), aromatic=False),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(AtomReq(element=("O",), degree=2, charge=0), order=1))),
        Pattern("ether",
                AtomReq(element=("O",), aromatic=False, charge=0, degree=2),
                (Nbr(_C, order=1, min_count=2, max_count=2, member=False,
                     lacks=(_CARBONYL_O,)),),
                exact_neighbors=True),
        Pattern("aldehyde",
                AtomReq(element=("C",), aromatic=False, min_h=1),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(_C, min_count=0, max_count=1, member=False)),
                exact_neighbors=True),
        Pattern("ketone",
                AtomReq(element=("C",), aromatic=False, degree=3),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(_C, min_count=2, max_count=2, member=False)),
                exact_neighbors=True),
        Pattern("amide",
                AtomReq(element=("C",)),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(AtomReq(element=("N",), charge=0), order=1))),
        Pattern("primary_amine",
                AtomReq(element=("N",), aromatic=False, charge=0, degree=1, min_h=2),
                (amine_c,)),
        Pattern("secondary_amine",
                AtomReq(element=("N",), aromatic=False, charge=0, degree=2, min_h=1),
                (Nbr(_C, order=1, min_count=2, max_count=2, member=False,
                     lacks=(_CARBONYL_O, _IMINE_N)),),
                exact_neighbors=True),
        Pattern("tertiary_amine",
                AtomReq(element=("N",), aromatic=False, charge=0, degree=3),
                (Nbr(_C, order=1, min_count=3, max_count=3, member=False,
                     lacks=(_CARBONYL_O, _IMINE_N)),),
                exact_neighbors=True),
        Pattern("nitro",
                AtomReq(element=("N",), charge=1),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(AtomReq(element=("O",), degree=1, charge=-1), order=1))),
        Pattern("nitrile",
                AtomReq(element=("C",)),
                (Nbr(AtomReq(element=("N",), degree=1), order=3),)),
        Pattern("thiol",
                AtomReq(element=("S",), aromatic=False, charge=0, degree=1, min_h=1),
                (Nbr(_C, order=1, member=False),)),
        Pattern("thioether",
                AtomReq(element=("S",), aromatic=False, charge=0, degree=2),
                (Nbr(_C, order=1, min_count=2, max_count=2, member=False),),
                exact_neighbors=True),
        Pattern("sulfonamide",
                AtomReq(element=("S",)),
                (Nbr(AtomReq(element=("O",), degree=1), order=2,
                     min_count=2, max_count=2),
                 Nbr(AtomReq(element=("N",)), order=1))),
        Pattern("phosphate",
                AtomReq(element=("P",)),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(AtomReq(element=("O",)), order=1, min_count=2, max_count=3))),
        Pattern("halo_carbon",
                AtomReq(element=("F", "Cl", "Br", "I"), charge=0, degree=1),
                (Nbr(_C, member=False),)),
        Pattern("aromatic_6_ring", ring_size=6),
        Pattern("aromatic_5_het_ring", ring_size=5, ring_hetero=True),
        Pattern("guanidine",
                AtomReq(element=("C",)),
                (Nbr(AtomReq(element=("N",)), order=2),
                 Nbr(AtomReq(element=("N",)), order=1, min_count=2, max_count=2))),
        Pattern("urea",
                AtomReq(element=("C",)),
                (Nbr(AtomReq(element=("O",), degree=1), order=2),
                 Nbr(AtomReq(element=("N",), charge=0), order=1,
                     min_count=2, max_count=2))),
    )


def catalogue_hash(catalogue=None) -> str:
    """Stable fingerprint of the pattern set; labels built against one
    catalogue refuse to load against another."""
    catalogue = default_catalogue() if catalogue is None else catalogue
    digest = hashlib.sha256()
    for i, p in enumerate(catalogue):
        digest.update(f"{i}:{p!r}\n".encode())
    return digest.hexdigest()


# --- matching engine ------------------------------------------------------------


def _atom_ok(g, i, req: AtomReq):
    a = g.atoms[i]
    if req.element is not None and a.element not in req.element:
        return False
    if req.aromatic is not None and a.is_aromatic != req.aromatic:
        return False
    if req.charge is not None and a.formal_charge != req.charge:
        return False
    if req.min_h is not None and a.implicit_h < req.min_h:
        return False
    if req.degree is not None and a.degree != req.degree:
        return False
    if req.protic and not (a.implicit_h >= 1 or a.formal_charge < 0):
        return False
    return True


def _nbr_ok(g, root, v, order, slot: Nbr):
    if slot.order is not None and order != slot.order:
        return False
    if not _atom_ok(g, v, slot.atom):
        return False
    for lreq, lorder in slot.lacks:
        for w, o in g.neighbors(v):
            if w != root and o == lorder and _atom_ok(g, w, lreq):
                return False
    return True


def _match_at(g, pattern: Pattern, root):
    """All distinct member sets of maximal slot assignments rooted at
    `root` (maximal: no unused neighbor could still fill a slot — keeps
    e.g. a triol phosphate from also matching as its two-O subsets)."""
    if not _atom_ok(g, root, pattern.root):
        return []
    neighbors = g.neighbors(root)
    slots = pattern.nbrs
    counts = [0] * len(slots)
    picks = []
    results = []

    def leaf():
        if not all(counts[k] >= s.min_count for k, s in enumerate(slots)):
            return
        for k, v, o in picks:
            if k is None and any(counts[j] < s.max_count and _nbr_ok(g, root, v, o, s)
                                 for j, s in enumerate(slots)):
                return   # not maximal
        members = {root}
        members.update(v for k, v, _ in picks if k is not None and slots[k].member)
        if members not in results:
            results.append(frozenset(members))

    def extend(i):
        if i == len(neighbors):
            leaf()
            return
        v, o = neighbors[i]
        for k, slot in enumerate(slots):
            if counts[k] < slot.max_count and _nbr_ok(g, root, v, o, slot):
                counts[k] += 1
                picks.append((k, v, o))
                extend(i + 1)
                picks.pop()
                counts[k] -= 1
        if not pattern.exact_neighbors:
            picks.append((None, v, o))
            extend(i + 1)
            picks.pop()

    extend(0)
    return results


def _match_rings(g, pattern: Pattern):
    for ring in g.rings:
        if len(ring) != pattern.ring_size:
            continue
        if not all(g.atoms[i].is_aromatic for i in ring):
            continue
        if pattern.ring_hetero and all(g.atoms[i].element == "C" for i in ring):
            continue
        yield frozenset(ring)


def detect_groups(g: MolecularGraph, catalogue=None) -> list[GroupAssignment]:
    """All catalogue matches as GroupAssignments with dense group ids
    ordered by (pattern_id, lowest member atom)."""
    catalogue = default_catalogue() if catalogue is None else catalogue
    found = []
    seen = set()
    for pid, pattern in enumerate(catalogue):
        if pattern.ring_size is not None:
            matches = _match_rings(g, pattern)
        else:
            matches = (m for r in range(g.n_atoms)
                       for m in _match_at(g, pattern, r))
        for members in matches:
            key = (pid, members)
            if key not in seen:
                seen.add(key)
                found.append((pid, pattern.name, members))
    found.sort(key=lambda t: (t[0], min(t[2]), sorted(t[2])))
    return [GroupAssignment(gid, pid, name, members)
            for gid, (pid, name, members) in enumerate(found)]


def interpolate_unassigned(g: MolecularGraph, groups: list[GroupAssignment]):
    """Attach every uncovered atom to its hop-nearest group (ties to the
    lowest group id); with no groups at all, emit one fallback group."""
    if not groups:
        return [GroupAssignment(0, FALLBACK, "fallback",
                                frozenset(range(g.n_atoms)))]
    covered = set()
    for grp in groups:
        covered |= grp.member_atoms
    leftover = [i for i in range(g.n_atoms) if i not in covered]
    if leftover:
        dist = shortest_path_distances(g)
        for i in leftover:
            best = min(groups,
                       key=lambda grp: (min(dist[i, j] for j in grp.member_atoms),
                                        grp.group_id))
            best.assigned_atoms.add(i)
    return groups


def build_matrix(n_atoms: int, groups: list[GroupAssignment]) -> np.ndarray:
    m = np.zeros((n_atoms, len(groups)))
    for grp in groups:
        for i in grp.all_atoms():
            m[i, grp.group_id] = 1.0
    if (m.sum(axis=1) < 1).any():
        bad = np.where(m.sum(axis=1) < 1)[0].tolist()
        raise CoverageViolation(f"atoms {bad} belong to no group")
    return m


def decompose(g: MolecularGraph, catalogue=None):
    """detect + interpolate + matrix in one call."""
    groups = interpolate_unassigned(g, detect_groups(g, catalogue))
    return groups, build_matrix(g.n_atoms, groups)


# --- groups.jsonl ---------------------------------------------------------------


def group_record(mol_id: str, g: MolecularGraph, groups, matrix) -> dict:
    return {
        "id": mol_id,
        "n_atoms": g.n_atoms,
        "groups": [{"group_id": grp.group_id,
                    "pattern": grp.name,
                    "pattern_id": grp.pattern_id,
                    "atoms": sorted(grp.all_atoms())}
                   for grp in groups],
        "matrix": [int(v) for v in matrix.reshape(-1)],
        "catalogue": catalogue_hash(),
    }


def write_groups_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_groups_jsonl(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def matrix_from_record(rec: dict) -> np.ndarray:
    n, f = rec["n_atoms"], len(rec["groups"])
    return np.asarray(rec["matrix"], dtype=np.float64).reshape(n, f)
