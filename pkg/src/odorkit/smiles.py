"""A small SMILES reader producing a validated molecular graph.

Supported: organic-subset atoms (B C N O P S F Cl Br I), aromatic lowercase
atoms (b c n o p s), bracket atoms with isotope, charge and explicit
hydrogens, bond symbols ``- = # :``, branches, ring closures (``1``..``9`` and
``%nn``) and ``.`` disconnections. Stereo marks (``/ \\ @``) are read and
dropped.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")
DIGITS = "0123456789"

# bracket atoms may name any element; unusual ones featurize as "other"
ELEMENTS = frozenset("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu
Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba
La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb
Bi Po At Rn Fr Ra Ac Th Pa U Np Pu
""".split())

DEFAULT_VALENCE = {
    "B": (3,), "C": (4,), "N": (3,), "O": (2,), "P": (3, 5), "S": (2, 4, 6),
    "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

BOND_ORDER = {"single": 1.0, "double": 2.0, "triple": 3.0, "aromatic": 1.5}
_BOND_SYMBOL = {"-": "single", "=": "double", "#": "triple", ":": "aromatic",
                "/": None, "\\": None}


class ParseError(ValueError):
    """Malformed SMILES. ``offset`` is the byte offset of the offending token."""

    def __init__(self, message: str, smiles: str = "", index: int = 0):
        self.smiles = smiles
        self.offset = len(smiles[:index].encode("utf-8"))
        super().__init__(f"{message} at byte {self.offset}")


class EmptyInput(ParseError):
    pass


class UnmatchedRingClosure(ParseError):
    pass


class UnmatchedParenthesis(ParseError):
    pass


class UnknownAtomToken(ParseError):
    pass


class DanglingBond(ParseError):
    pass


class InvalidRingBond(ParseError):
    """Ring closure onto the same atom, onto an existing bond, or with conflicting bond symbols."""


class ValenceError(ParseError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    aromatic: bool = False
    explicit_h: int | None = None
    in_ring: bool = False
    degree: int = 0
    implicit_h: int = 0
    bracket: bool = False

    @property
    def total_h(self) -> int:
        return self.implicit_h if self.explicit_h is None else self.explicit_h


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: str
    in_ring: bool = False


@dataclass(frozen=True)
class MoleculeGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append(bond.b)
            adj[bond.b].append(bond.a)
        return adj


def _parse_bracket(body: str, smiles: str, start: int) -> dict:
    """Parse the inside of ``[...]``; ``start`` indexes the opening bracket."""
    i = 0
    while i < len(body) and body[i] in DIGITS:
        i += 1
    rest = body[i:]
    element = None
    aromatic = False
    for sym in AROMATIC_BRACKET:
        if rest.startswith(sym):
            element, aromatic = sym.capitalize(), True
            i += len(sym)
            break
    if element is None:
        if len(rest) >= 2 and rest[:2] in ELEMENTS:
            element = rest[:2]
        elif rest[:1] in ELEMENTS:
            element = rest[:1]
        if element is None:
            raise UnknownAtomToken(f"unknown bracket atom [{body}]", smiles, start)
        i += len(element)

    while i < len(body) and body[i] == "@":
        i += 1
    # extended chirality classes such as @TH1 / @SP2
    if i < len(body) and body[i:i + 2] in ("TH", "AL", "SP", "TB", "OH"):
        i += 2
        while i < len(body) and body[i] in DIGITS:
            i += 1

    hcount = 0
    if i < len(body) and body[i] == "H":
        i += 1
        j = i
        while j < len(body) and body[j] in DIGITS:
            j += 1
        hcount = int(body[i:j]) if j > i else 1
        i = j

    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        j = i + 1
        while j < len(body) and body[j] == body[i]:
            j += 1
        k = j
        while k < len(body) and body[k] in DIGITS:
            k += 1
        if k > j:
            if j - i > 1:
                raise UnknownAtomToken(f"malformed charge in [{body}]", smiles, start)
            charge = sign * int(body[j:k])
        else:
            charge = sign * (j - i)
        i = k

    if i < len(body) and body[i] == ":":
        j = i + 1
        while j < len(body) and body[j] in DIGITS:
            j += 1
        if j == i + 1:
            raise UnknownAtomToken(f"malformed atom class in [{body}]", smiles, start)
        i = j

    if i != len(body):
        raise UnknownAtomToken(f"unparsed text in bracket atom [{body}]", smiles, start)
    return {"element": element, "aromatic": aromatic, "explicit_h": hcount,
            "formal_charge": charge, "bracket": True}


def _implicit_h(element: str, aromatic: bool, bond_sum: int) -> tuple[int, bool]:
    """Return (implicit H count, valence_ok) for an organic-subset atom."""
    valences = DEFAULT_VALENCE[element]
    for v in valences:
        if v >= bond_sum:
            h = v - bond_sum - (1 if aromatic else 0)
            return max(0, h), True
    return 0, False


def _ring_atoms(n_atoms: int, tree_bonds: list[tuple[int, int]],
                closures: list[tuple[int, int]]) -> tuple[set[int], set[tuple[int, int]]]:
    """Atoms and bonds on a cycle: each closure bond plus the tree path joining its ends."""
    adj: list[list[int]] = [[] for _ in range(n_atoms)]
    for a, b in tree_bonds:
        adj[a].append(b)
        adj[b].append(a)
    atoms: set[int] = set()
    bonds: set[tuple[int, int]] = set()
    for a, b in closures:
        parent = {a: -1}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            if u == b:
                break
            for v in adj[u]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        atoms.update((a, b))
        bonds.add((min(a, b), max(a, b)))
        u = b
        while parent.get(u, -1) != -1:
            p = parent[u]
            atoms.add(u)
            atoms.add(p)
            bonds.add((min(u, p), max(u, p)))
            u = p
    return atoms, bonds


def parse_smiles(s: str, strict_valence: bool = False) -> MoleculeGraph:
    """Parse ``s`` into a :class:`MoleculeGraph`.

    Raises a :class:`ParseError` subclass on malformed input. Organic-subset
    atoms whose bonds exceed every default valence produce a warning on the
    graph, or a :class:`ValenceError` when ``strict_valence`` is set.
    """
    if not isinstance(s, str) or not s:
        raise EmptyInput("empty SMILES", s or "", 0)

    atoms: list[dict] = []
    bonds: list[list] = []          # [a, b, order, is_closure]
    pairs: set[tuple[int, int]] = set()
    prev: int | None = None
    pending: tuple[str, str | None, int] | None = None  # (symbol, order, index)
    branches: list[tuple[int, int, int]] = []           # (atom, index of '(', atoms at open)
    rings: dict[int, tuple[int, str | None, str | None, int]] = {}

    def add_bond(a: int, b: int, order: str | None, closure: bool, index: int) -> None:
        key = (min(a, b), max(a, b))
        if a == b:
            raise InvalidRingBond("ring closure onto the same atom", s, index)
        if key in pairs:
            raise InvalidRingBond("duplicate bond", s, index)
        if order is None:
            order = "aromatic" if atoms[a]["aromatic"] and atoms[b]["aromatic"] else "single"
        pairs.add(key)
        bonds.append([a, b, order, closure])

    def add_atom(info: dict) -> None:
        nonlocal prev, pending
        atoms.append(info)
        idx = len(atoms) - 1
        if prev is not None:
            order = pending[1] if pending else None
            add_bond(prev, idx, order, False, pending[2] if pending else info["index"])
        pending = None
        prev = idx

    i, n = 0, len(s)
    while i < n:
        ch = s[i]
        if ch == "(":
            if prev is None:
                raise UnmatchedParenthesis("branch without a preceding atom", s, i)
            if pending is not None:
                raise DanglingBond("bond symbol before branch", s, pending[2])
            branches.append((prev, i, len(atoms)))
            i += 1
        elif ch == ")":
            if not branches:
                raise UnmatchedParenthesis("unmatched ')'", s, i)
            if pending is not None:
                raise DanglingBond("bond symbol closes a branch", s, pending[2])
            anchor, open_at, n_before = branches.pop()
            if len(atoms) == n_before:
                raise UnmatchedParenthesis("empty branch", s, open_at)
            prev = anchor
            i += 1
        elif ch in _BOND_SYMBOL:
            if prev is None or pending is not None:
                raise DanglingBond(f"bond '{ch}' without an atom to attach", s, i)
            pending = (ch, _BOND_SYMBOL[ch], i)
            i += 1
        elif ch == ".":
            if prev is None or pending is not None:
                raise DanglingBond("misplaced '.'", s, i)
            prev = None
            pending = (".", None, i)
            i += 1
        elif ch in "0123456789%":
            start = i
            if ch == "%":
                digits = s[i + 1:i + 3]
                if len(digits) != 2 or not all(d in DIGITS for d in digits):
                    raise UnmatchedRingClosure("'%' must be followed by two digits", s, i)
                label = int(s[i + 1:i + 3])
                i += 3
            else:
                label = int(ch)
                i += 1
            if prev is None:
                raise UnmatchedRingClosure("ring-closure digit without an atom", s, start)
            sym, order = (pending[0], pending[1]) if pending else (None, None)
            if label in rings:
                other, osym, oorder, _ = rings.pop(label)
                if osym is not None and sym is not None and oorder != order:
                    raise InvalidRingBond(f"conflicting ring bond symbols for {label}", s, start)
                add_bond(other, prev, order if sym is not None else oorder, True, start)
            else:
                rings[label] = (prev, sym, order, start)
            pending = None
        elif ch == "[":
            end = s.find("]", i + 1)
            if end < 0:
                raise UnknownAtomToken("unterminated bracket atom", s, i)
            info = _parse_bracket(s[i + 1:end], s, i)
            info["index"] = i
            add_atom(info)
            i = end + 1
        else:
            for sym in ORGANIC:
                if s.startswith(sym, i):
                    add_atom({"element": sym, "aromatic": False, "explicit_h": None,
                              "formal_charge": 0, "bracket": False, "index": i})
                    i += len(sym)
                    break
            else:
                if ch in AROMATIC_ORGANIC:
                    add_atom({"element": ch.upper(), "aromatic": True, "explicit_h": None,
                              "formal_charge": 0, "bracket": False, "index": i})
                    i += 1
                else:
                    raise UnknownAtomToken(f"unknown atom token {ch!r}", s, i)

    if pending is not None:
        raise DanglingBond(f"'{pending[0]}' at end of input", s, pending[2])
    if branches:
        raise UnmatchedParenthesis("unclosed '('", s, branches[-1][1])
    if rings:
        first = min(rings.values(), key=lambda r: r[3])
        raise UnmatchedRingClosure("ring closure never closed", s, first[3])
    if not atoms:
        raise EmptyInput("no atoms", s, 0)

    tree = [(a, b) for a, b, _, closure in bonds if not closure]
    closures = [(a, b) for a, b, _, closure in bonds if closure]
    ring_atoms, ring_bonds = _ring_atoms(len(atoms), tree, closures)

    degree = [0] * len(atoms)
    bond_sum = [0] * len(atoms)
    for a, b, order, _ in bonds:
        degree[a] += 1
        degree[b] += 1
        # aromatic bonds count 1; aromatic atoms lose one more valence below
        w = 1 if order == "aromatic" else int(BOND_ORDER[order])
        bond_sum[a] += w
        bond_sum[b] += w

    warnings: list[str] = []
    final_atoms = []
    for k, info in enumerate(atoms):
        implicit = 0
        if not info["bracket"]:
            implicit, ok = _implicit_h(info["element"], info["aromatic"], bond_sum[k])
            if not ok:
                msg = f"atom {k} ({info['element']}) exceeds default valence"
                if strict_valence:
                    raise ValenceError(msg, s, info["index"])
                warnings.append(msg)
        final_atoms.append(Atom(
            element=info["element"],
            formal_charge=info["formal_charge"],
            aromatic=info["aromatic"],
            explicit_h=info["explicit_h"],
            in_ring=k in ring_atoms,
            degree=degree[k],
            implicit_h=implicit,
            bracket=info["bracket"],
        ))
    final_bonds = tuple(
        Bond(a, b, order, (min(a, b), max(a, b)) in ring_bonds)
        for a, b, order, _ in bonds
    )
    return MoleculeGraph(tuple(final_atoms), final_bonds, s, tuple(warnings))
