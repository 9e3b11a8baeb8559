"""SMILES parsing into heavy-atom molecular graphs.

Supported subset: organic-subset atoms (B, C, N, O, P, S, F, Cl, Br, I),
bracket atoms with explicit H count and charge, branches, ring closures
1-9, bond symbols - = # :, aromatic lowercase. Stereo markers, isotopes,
atom classes, '%nn' ring labels and multi-component '.' are rejected
loudly as UnsupportedFeature.

Aromaticity model: a ring is aromatic when every member was written
lowercase, or when it is a six-ring of carbons whose bonds alternate
single/double (Kekule benzene). Lowercase atoms outside any such ring are
a syntax error. Implicit hydrogens are counted (aromatic bonds weigh 1.5,
the sum is floored) but never materialized as graph nodes.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraph, SmilesSyntaxError, UnsupportedFeature

ELEMENTS = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
_AROMATIC_OK = {"b", "c", "n", "o", "p", "s"}
HYBRIDIZATIONS = ("sp", "sp2", "sp3", "other")

# smallest standard valence >= bond-order sum wins; charge shifts the base
_VALENCES = {"B": (3,), "C": (4,), "N": (3,), "O": (2,), "P": (3, 5),
             "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,)}

_ORDER_WEIGHT = {1: 1.0, 2: 2.0, 3: 3.0, "aromatic": 1.5}

_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?(?P<sym>[A-Z][a-z]?|[bcnops])(?P<stereo>@{1,2})?"
    r"(?P<h>H\d*)?(?P<charge>\+\d+|-\d+|\++|-+)?(?P<cls>:\d+)?$")


@dataclass
class Atom:
    element: str
    is_aromatic: bool = False
    formal_charge: int = 0
    explicit_hcount: int | None = None   # set only for bracket atoms
    degree: int = 0
    implicit_h: int = 0
    hybridization: str = "sp3"


@dataclass
class MolecularGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[tuple[int, int, object]] = field(default_factory=list)
    canonical_order: list[int] = field(default_factory=list)
    rings: list[list[int]] = field(default_factory=list)

    @property
    def n_atoms(self):
        return len(self.atoms)

    def neighbors(self, i):
        return self._adj[i]

    def _build_adjacency(self):
        adj = [[] for _ in self.atoms]
        for a, b, order in self.bonds:
            adj[a].append((b, order))
            adj[b].append((a, order))
        self._adj = adj


def _tokenize(smiles):
    i, n = 0, len(smiles)
    while i < n:
        ch = smiles[i]
        if ch == "[":
            j = smiles.find("]", i)
            if j < 0:
                raise SmilesSyntaxError("unterminated bracket atom")
            yield ("atom", smiles[i + 1:j], True)
            i = j + 1
        elif smiles.startswith(("Cl", "Br"), i):
            yield ("atom", smiles[i:i + 2], False)
            i += 2
        elif ch in "BCNOPSFI":
            yield ("atom", ch, False)
            i += 1
        elif ch in "bcnops":
            yield ("atom", ch, False)
            i += 1
        elif ch in "-=#:":
            yield ("bond", ch, None)
            i += 1
        elif ch == "(":
            yield ("open", ch, None)
            i += 1
        elif ch == ")":
            yield ("close", ch, None)
            i += 1
        elif ch in "123456789":
            yield ("ring", int(ch), None)
            i += 1
        elif ch in "/\\":
            raise UnsupportedFeature("stereo bond markers are not supported")
        elif ch == "@":
            raise UnsupportedFeature("stereocenters are not supported")
        elif ch == ".":
            raise UnsupportedFeature("multi-component SMILES ('.') is not supported")
        elif ch == "%":
            raise UnsupportedFeature("ring closures above 9 ('%') are not supported")
        elif ch in "0*$~":
            raise UnsupportedFeature(f"'{ch}' is outside the supported subset")
        else:
            raise SmilesSyntaxError(f"unknown token {ch!r} at position {i}")


def _parse_bracket(body):
    m = _BRACKET_RE.match(body)
    if m is None:
        raise SmilesSyntaxError(f"malformed bracket atom [{body}]")
    if m["isotope"]:
        raise UnsupportedFeature(f"isotope label in [{body}] is not supported")
    if m["stereo"]:
        raise UnsupportedFeature(f"stereocenter in [{body}] is not supported")
    if m["cls"]:
        raise UnsupportedFeature(f"atom class in [{body}] is not supported")
    sym = m["sym"]
    lower = sym[0].islower()
    if lower and sym not in _AROMATIC_OK:
        raise SmilesSyntaxError(f"unknown element token {sym!r}")
    if (sym.capitalize() if lower else sym) not in ELEMENTS:
        raise SmilesSyntaxError(f"unknown element token {sym!r}")
    h = m["h"]
    hcount = 0 if h is None else (1 if h == "H" else int(h[1:]))
    c = m["charge"]
    if c is None:
        charge = 0
    elif c[0] == "+":
        charge = int(c[1:]) if c[1:].isdigit() else len(c)
    else:
        charge = -(int(c[1:]) if c[1:].isdigit() else len(c))
    return sym.capitalize() if lower else sym, lower, hcount, charge


_BOND_ORDER = {"-": 1, "=": 2, "#": 3, ":": "aromatic"}


def parse_smiles(smiles: str) -> MolecularGraph:
    """Parse one SMILES string into a MolecularGraph."""
    if not smiles or not smiles.strip():
        raise SmilesSyntaxError("empty SMILES")
    smiles = smiles.strip()

    g = MolecularGraph()
    aromatic_token = []
    prev = None
    pending = None
    branch_stack = []
    open_rings = {}
    bond_pairs = set()

    def add_bond(a, b, order):
        if a == b:
            raise SmilesSyntaxError("ring closure creates a self-bond")
        key = (min(a, b), max(a, b))
        if key in bond_pairs:
            raise SmilesSyntaxError(f"duplicate bond between atoms {a} and {b}")
        bond_pairs.add(key)
        g.bonds.append((a, b, order))

    def resolve_order(sym, a, b):
        if sym is not None:
            return _BOND_ORDER[sym]
        if aromatic_token[a] and aromatic_token[b]:
            return "aromatic"
        return 1

    for kind, value, bracket in _tokenize(smiles):
        if kind == "atom":
            if bracket:
                elem, lower, hcount, charge = _parse_bracket(value)
                atom = Atom(elem, is_aromatic=lower, formal_charge=charge,
                            explicit_hcount=hcount)
            else:
                lower = value[0].islower()
                elem = value.capitalize() if lower else value
                if elem not in ELEMENTS:
                    raise SmilesSyntaxError(f"unknown element token {value!r}")
                if lower and value not in _AROMATIC_OK:
                    raise SmilesSyntaxError(f"{value!r} cannot be aromatic")
                atom = Atom(elem, is_aromatic=lower)
            idx = len(g.atoms)
            g.atoms.append(atom)
            aromatic_token.append(lower)
            if prev is not None:
                add_bond(prev, idx, resolve_order(pending, prev, idx))
            elif pending is not None:
                raise SmilesSyntaxError("bond symbol before the first atom")
            pending = None
            prev = idx
        elif kind == "bond":
            if pending is not None:
                raise SmilesSyntaxError("two bond symbols in a row")
            pending = value
        elif kind == "open":
            if prev is None:
                raise SmilesSyntaxError("branch opened before any atom")
            branch_stack.append(prev)
        elif kind == "close":
            if not branch_stack:
                raise SmilesSyntaxError("unbalanced parentheses: ')' without '('")
            if pending is not None:
                raise SmilesSyntaxError("dangling bond symbol before ')'")
            prev = branch_stack.pop()
        elif kind == "ring":
            if prev is None:
                raise SmilesSyntaxError("ring closure digit before any atom")
            if value in open_rings:
                other, other_bond = open_rings.pop(value)
                if pending is not None and other_bond is not None and pending != other_bond:
                    raise SmilesSyntaxError(f"conflicting bond orders on ring closure {value}")
                sym = pending if pending is not None else other_bond
                add_bond(other, prev, resolve_order(sym, other, prev))
                pending = None
            else:
                open_rings[value] = (prev, pending)
                pending = None

    if branch_stack:
        raise SmilesSyntaxError("unbalanced parentheses: unclosed '('")
    if open_rings:
        raise SmilesSyntaxError(f"dangling ring closure digit(s): {sorted(open_rings)}")
    if pending is not None:
        raise SmilesSyntaxError("trailing bond symbol")

    g.canonical_order = list(range(len(g.atoms)))
    g._build_adjacency()
    _check_connected(g)
    g.rings = _perceive_rings(g)
    _assign_aromaticity(g, aromatic_token)
    g._build_adjacency()
    _finalize_atoms(g)
    return g


def _check_connected(g):
    if not g.atoms:
        raise SmilesSyntaxError("no atoms parsed")
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v, _ in g.neighbors(u):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    if len(seen) != len(g.atoms):
        raise SmilesSyntaxError("SMILES produced a disconnected graph")


def _perceive_rings(g, max_size=8):
    """Small rings as ordered atom cycles: per bond, the shortest closing path."""
    rings, seen = [], set()
    for a, b, _ in g.bonds:
        path = _shortest_path_avoiding(g, a, b, max_size - 1)
        if path is None:
            continue
        key = frozenset(path)
        if key not in seen:
            seen.add(key)
            rings.append(path)
    return rings


def _shortest_path_avoiding(g, src, dst, max_edges):
    # BFS src->dst that may not use the direct (src, dst) bond
    parents = {src: None}
    queue = deque([(src, 0)])
    while queue:
        u, d = queue.popleft()
        if d >= max_edges:
            continue
        for v, _ in g.neighbors(u):
            if u == src and v == dst:
                continue
            if v in parents:
                continue
            parents[v] = u
            if v == dst:
                path = [v]
                while parents[path[-1]] is not None:
                    path.append(parents[path[-1]])
                return path
            queue.append((v, d + 1))
    return None


def _bond_index(g):
    return {(min(a, b), max(a, b)): k for k, (a, b, _) in enumerate(g.bonds)}


def _assign_aromaticity(g, aromatic_token):
    bidx = _bond_index(g)
    covered = set()

    def ring_bond_keys(ring):
        return [(min(u, v), max(u, v))
                for u, v in zip(ring, ring[1:] + ring[:1])]

    for ring in g.rings:
        keys = ring_bond_keys(ring)
        if all(aromatic_token[i] for i in ring):
            aromatic = True
        elif (len(ring) == 6
              and all(g.atoms[i].element == "C" and not aromatic_token[i] for i in ring)):
            orders = [g.bonds[bidx[k]][2] for k in keys]
            aromatic = (orders[0::2] == [orders[0]] * 3
                        and orders[1::2] == [orders[1]] * 3
                        and {orders[0], orders[1]} == {1, 2})
        else:
            aromatic = False
        if aromatic:
            covered.update(i for i in ring)
            for k in keys:
                a, b, _ = g.bonds[bidx[k]]
                g.bonds[bidx[k]] = (a, b, "aromatic")
            for i in ring:
                g.atoms[i].is_aromatic = True

    for i, tok in enumerate(aromatic_token):
        if tok and i not in covered:
            raise SmilesSyntaxError(f"aromatic atom {i} is not inside an aromatic ring")


def _finalize_atoms(g):
    for i, atom in enumerate(g.atoms):
        orders = [o for _, o in g.neighbors(i)]
        atom.degree = len(orders)
        weight = int(sum(_ORDER_WEIGHT[o] for o in orders))
        if atom.explicit_hcount is not None:
            atom.implicit_h = atom.explicit_hcount
        else:
            allowed = [v + atom.formal_charge for v in _VALENCES[atom.element]]
            fits = [v for v in allowed if v >= weight]
            atom.implicit_h = (fits[0] - weight) if fits else 0
        atom.hybridization = _hybridization(atom, orders)


def _hybridization(atom, orders):
    if atom.is_aromatic:
        return "sp2"
    doubles = sum(1 for o in orders if o == 2)
    triples = sum(1 for o in orders if o == 3)
    if triples >= 1 or doubles >= 2:
        return "sp" if atom.element in ("C", "N") else "other"
    if doubles == 1:
        return "sp2"
    return "sp3"


# --- derived matrices ---------------------------------------------------------

def atom_features(g: MolecularGraph) -> np.ndarray:
    """N x 5 feature rows: [element_index, degree, hybridization_index,
    formal_charge, is_aromatic]; the index tables are ELEMENTS and
    HYBRIDIZATIONS above."""
    x = np.zeros((g.n_atoms, 5))
    for i, a in enumerate(g.atoms):
        x[i] = (ELEMENTS.index(a.element), a.degree,
                HYBRIDIZATIONS.index(a.hybridization), a.formal_charge,
                1.0 if a.is_aromatic else 0.0)
    return x


def shortest_path_distances(g: MolecularGraph) -> np.ndarray:
    """All-pairs hop counts via BFS from every atom."""
    n = g.n_atoms
    dist = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v, _ in g.neighbors(u):
                if dist[s, v] < 0:
                    dist[s, v] = dist[s, u] + 1
                    queue.append(v)
    if (dist < 0).any():
        raise DisconnectedGraph("graph has unreachable atom pairs")
    return dist


# --- emission -----------------------------------------------------------------

def emit_smiles(g: MolecularGraph) -> str:
    """Write the graph back out as SMILES (DFS from atom 0)."""
    n = g.n_atoms
    visited = [False] * n
    tree_children = [[] for _ in range(n)]
    closures = [[] for _ in range(n)]
    closure_bonds = []

    order_map = {}
    for a, b, o in g.bonds:
        order_map[(a, b)] = o
        order_map[(b, a)] = o

    # iterative DFS fixing tree edges and ring-closure (back) edges
    visited[0] = True
    stack = [0]
    parent = {0: None}
    seen_edges = set()
    while stack:
        u = stack.pop()
        for v, o in sorted(g.neighbors(u)):
            key = (min(u, v), max(u, v))
            if key in seen_edges:
                continue
            if visited[v]:
                seen_edges.add(key)
                closure_bonds.append((u, v, o))
            else:
                seen_edges.add(key)
                visited[v] = True
                parent[v] = u
                tree_children[u].append(v)
                stack.append(v)

    for digit, (u, v, o) in enumerate(closure_bonds, start=1):
        if digit > 9:
            raise UnsupportedFeature("emission needs more than 9 ring-closure digits")
        closures[u].append((digit, v, o))
        closures[v].append((digit, u, o))

    def bond_str(u, v, o):
        if o == 2:
            return "="
        if o == 3:
            return "#"
        if o == 1 and g.atoms[u].is_aromatic and g.atoms[v].is_aromatic:
            return "-"
        return ""

    def atom_str(i):
        a = g.atoms[i]
        sym = a.element.lower() if a.is_aromatic else a.element
        if a.formal_charge == 0 and a.explicit_hcount is None:
            return sym
        h = ""
        hc = a.explicit_hcount if a.explicit_hcount is not None else a.implicit_h
        if hc == 1:
            h = "H"
        elif hc > 1:
            h = f"H{hc}"
        c = ""
        if a.formal_charge > 0:
            c = "+" if a.formal_charge == 1 else f"+{a.formal_charge}"
        elif a.formal_charge < 0:
            c = "-" if a.formal_charge == -1 else f"-{-a.formal_charge}"
        return f"[{sym}{h}{c}]"

    out = []

    def write(u):
        out.append(atom_str(u))
        for digit, other, o in closures[u]:
            out.append(bond_str(u, other, o) + str(digit))
        kids = tree_children[u]
        for k, v in enumerate(kids):
            last = (k == len(kids) - 1)
            if not last:
                out.append("(")
            out.append(bond_str(u, v, order_map[(u, v)]))
            write(v)
            if not last:
                out.append(")")

    write(0)
    return "".join(out)


# --- .smi input ----------------------------------------------------------------

def read_smi_file(path):
    """Yield (mol_id, smiles) from a .smi file: one SMILES per line,
    optional tab-separated identifier; blank lines and '#' comments skipped."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            smiles = parts[0].strip()
            mol_id = parts[1].strip() if len(parts) > 1 and parts[1].strip() else f"mol{lineno}"
            records.append((mol_id, smiles))
    return records
