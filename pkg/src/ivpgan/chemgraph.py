"""SMILES parsing into undirected molecular graphs.

Supports the organic subset, bracket atoms (isotope, chirality and atom-class
fields are read and discarded), branches, ring closures (single digits and
``%nn``), explicit bond symbols and the ``.`` fragment separator. Lowercase
symbols are trusted as aromatic; no kekulization or aromaticity perception is
attempted.
"""

from __future__ import annotations

import random
import struct
import warnings
from dataclasses import dataclass, field

SINGLE, DOUBLE, TRIPLE, AROMATIC = "single", "double", "triple", "aromatic"

BOND_ORDER_VALUE = {SINGLE: 1.0, DOUBLE: 2.0, TRIPLE: 3.0, AROMATIC: 1.5}
BOND_CODE = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, AROMATIC: 4}
_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC}

# fmt: off
_PERIODIC = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce "
    "Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn "
    "Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl "
    "Mc Lv Ts Og"
).split()
# fmt: on
ATOMIC_NUMBER = {sym: z for z, sym in enumerate(_PERIODIC, start=1)}
SYMBOL = {z: sym for sym, z in ATOMIC_NUMBER.items()}

DEFAULT_VALENCE = {5: 3, 6: 4, 7: 3, 8: 2, 15: 3, 16: 2, 9: 1, 17: 1, 35: 1, 53: 1}

_ORGANIC = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
_ORGANIC_AROMATIC = {"b", "c", "n", "o", "p", "s"}
_BRACKET_AROMATIC = {"b", "c", "n", "o", "p", "s", "se", "as", "te"}


class SmilesError(ValueError):
    """Malformed SMILES; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


@dataclass(frozen=True)
class Atom:
    element: int
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int = 0
    implicit_h: int = 0
    degree: int = 0
    in_ring: bool = False
    bracket: bool = False

    @property
    def total_h(self) -> int:
        return self.explicit_h + self.implicit_h

    @property
    def symbol(self) -> str:
        return SYMBOL[self.element]


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: str = SINGLE


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.atoms)

    def bond_between(self, i: int, j: int) -> Bond | None:
        for bond in self.bonds:
            if (bond.a, bond.b) in ((i, j), (j, i)):
                return bond
        return None

    def neighbors(self, i: int) -> list[tuple[int, str]]:
        """(neighbor index, bond order) pairs of atom ``i``."""
        out = []
        for bond in self.bonds:
            if bond.a == i:
                out.append((bond.b, bond.order))
            elif bond.b == i:
                out.append((bond.a, bond.order))
        return out


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.atoms: list[dict] = []
        self.bonds: dict[frozenset, tuple[int, int, str | None]] = {}
        self.rings: dict[int, tuple[int, str | None, int]] = {}

    def error(self, message: str, pos: int | None = None) -> SmilesError:
        return SmilesError(message, self.pos if pos is None else pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> None:
        text = self.text
        prev: int | None = None
        pending_bond: str | None = None
        pending_pos = 0
        stack: list[tuple[int | None, int]] = []
        expect_atom = True  # start of string or after '(' / '.'

        while self.pos < len(text):
            ch = text[self.pos]
            if ch == "(":
                if prev is None or expect_atom:
                    raise self.error("branch opened without a preceding atom")
                stack.append((prev, self.pos))
                self.pos += 1
                expect_atom = True
            elif ch == ")":
                if not stack:
                    raise self.error("unbalanced ')'")
                if pending_bond is not None or expect_atom:
                    raise self.error("empty branch or dangling bond before ')'")
                prev, _ = stack.pop()
                self.pos += 1
            elif ch == ".":
                if pending_bond is not None or prev is None or expect_atom:
                    raise self.error("misplaced '.'")
                if stack:
                    raise self.error("'.' inside a branch")
                prev = None
                self.pos += 1
                expect_atom = True
            elif ch in _BOND_SYMBOLS or ch in "/\\":
                if pending_bond is not None:
                    raise self.error("two consecutive bond symbols")
                if prev is None:
                    raise self.error("bond symbol without a preceding atom")
                pending_bond = _BOND_SYMBOLS.get(ch, SINGLE)
                pending_pos = self.pos
                self.pos += 1
            elif ch.isdigit() or ch == "%":
                if prev is None or expect_atom:
                    raise self.error("ring-closure digit without a preceding atom")
                start = self.pos
                number = self.read_ring_number()
                self.ring_closure(prev, number, pending_bond, start)
                pending_bond = None
            else:
                start = self.pos
                idx = self.read_atom()
                if prev is not None:
                    self.add_bond(prev, idx, pending_bond, start)
                pending_bond = None
                prev = idx
                expect_atom = False
        if pending_bond is not None:
            raise self.error("dangling bond at end of input", pending_pos)
        if expect_atom and self.atoms and not stack:
            raise self.error("trailing '.'", len(text) - 1)
        if stack:
            raise self.error("unbalanced '('", stack[-1][1])
        if self.rings:
            number, (_, _, pos) = next(iter(self.rings.items()))
            raise self.error(f"unclosed ring bond {number}", pos)
        if not self.atoms:
            raise self.error("no atoms")

    def read_ring_number(self) -> int:
        text = self.text
        if text[self.pos] == "%":
            digits = text[self.pos + 1 : self.pos + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise self.error("'%' must be followed by two digits")
            self.pos += 3
            return int(digits)
        self.pos += 1
        return int(text[self.pos - 1])

    def ring_closure(self, atom: int, number: int, bond: str | None, pos: int) -> None:
        if number not in self.rings:
            self.rings[number] = (atom, bond, pos)
            return
        other, other_bond, _ = self.rings.pop(number)
        if bond is not None and other_bond is not None and bond != other_bond:
            raise self.error(f"conflicting bond orders on ring bond {number}", pos)
        if other == atom:
            raise self.error(f"ring bond {number} closes on itself", pos)
        self.add_bond(other, atom, bond if bond is not None else other_bond, pos)

    def add_bond(self, a: int, b: int, order: str | None, pos: int) -> None:
        key = frozenset((a, b))
        if key in self.bonds:
            raise self.error("duplicate bond between the same atoms", pos)
        self.bonds[key] = (a, b, order)

    def read_atom(self) -> int:
        text = self.text
        ch = text[self.pos]
        if ch == "[":
            return self.read_bracket()
        two = text[self.pos : self.pos + 2]
        if two in ("Cl", "Br"):
            self.pos += 2
            return self.new_atom(ATOMIC_NUMBER[two], aromatic=False)
        if ch in _ORGANIC:
            self.pos += 1
            return self.new_atom(ATOMIC_NUMBER[ch], aromatic=False)
        if ch in _ORGANIC_AROMATIC:
            self.pos += 1
            return self.new_atom(ATOMIC_NUMBER[ch.upper()], aromatic=True)
        if ch == "*":
            raise self.error("wildcard atom '*' is not supported")
        raise self.error(f"unknown element symbol {ch!r}")

    def read_bracket(self) -> int:
        text = self.text
        start = self.pos
        end = text.find("]", start)
        if end < 0:
            raise self.error("unterminated bracket atom", start)
        body = text[start + 1 : end]
        i = 0
        while i < len(body) and body[i].isdigit():  # isotope, ignored
            i += 1
        symbol = None
        aromatic = False
        two, one = body[i : i + 2], body[i : i + 1]
        if len(two) == 2 and two in ATOMIC_NUMBER:
            symbol = two
        elif len(two) == 2 and two in _BRACKET_AROMATIC:
            symbol, aromatic = two.capitalize(), True
        elif one in ATOMIC_NUMBER:
            symbol = one
        elif one in _BRACKET_AROMATIC:
            symbol, aromatic = one.upper(), True
        if symbol is None:
            raise self.error(f"unknown element symbol in bracket atom {body!r}", start + 1 + i)
        i += len(symbol)
        if body[i : i + 1] == "@":  # chirality, ignored
            i += 1
            if body[i : i + 1] == "@":
                i += 1
            elif body[i : i + 2] in ("TH", "AL", "SP", "TB", "OH"):
                i += 2
                while i < len(body) and body[i].isdigit():
                    i += 1
        hcount = 0
        if body[i : i + 1] == "H":
            i += 1
            hcount = 1
            if body[i : i + 1].isdigit():
                hcount = int(body[i])
                i += 1
        charge = 0
        if body[i : i + 1] in ("+", "-"):
            sign = 1 if body[i] == "+" else -1
            i += 1
            if body[i : i + 1].isdigit():
                digits = ""
                while i < len(body) and body[i].isdigit():
                    digits += body[i]
                    i += 1
                charge = sign * int(digits)
            else:
                charge = sign
                while body[i : i + 1] == body[i - 1]:  # '++' style
                    charge += sign
                    i += 1
        if body[i : i + 1] == ":":  # atom class, ignored
            i += 1
            if not body[i : i + 1].isdigit():
                raise self.error("atom class requires digits", start + 1 + i)
            while i < len(body) and body[i].isdigit():
                i += 1
        if i != len(body):
            raise self.error(f"bracket syntax error in {body!r}", start + 1 + i)
        self.pos = end + 1
        return self.new_atom(
            ATOMIC_NUMBER[symbol],
            aromatic=aromatic,
            charge=charge,
            explicit_h=hcount,
            bracket=True,
        )

    def new_atom(self, element, aromatic, charge=0, explicit_h=0, bracket=False) -> int:
        self.atoms.append(
            dict(
                element=element,
                aromatic=aromatic,
                formal_charge=charge,
                explicit_h=explicit_h,
                bracket=bracket,
            )
        )
        return len(self.atoms) - 1


def _ring_atoms(n_atoms: int, edges: list[tuple[int, int]]) -> set[int]:
    """Atoms incident to at least one non-bridge edge (iterative Tarjan)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_atoms)]
    for e, (a, b) in enumerate(edges):
        adj[a].append((b, e))
        adj[b].append((a, e))
    disc = [-1] * n_atoms
    low = [0] * n_atoms
    bridges: set[int] = set()
    timer = 0
    for root in range(n_atoms):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, parent_edge, it = stack[-1]
            advanced = False
            for w, e in it:
                if e == parent_edge:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, e, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.add(parent_edge)
    ring = set()
    for e, (a, b) in enumerate(edges):
        if e not in bridges:
            ring.update((a, b))
    return ring


def _effective_valence(element: int, charge: int) -> int | None:
    base = DEFAULT_VALENCE.get(element)
    if base is None:
        return None
    if element == 5:
        return base - charge
    if element == 6:
        return base - abs(charge)
    return base + charge


def _compute_implicit_h(atom: dict, bond_sum: float, warn: bool = True) -> int:
    if atom["bracket"]:
        return 0
    valence = _effective_valence(atom["element"], atom["formal_charge"])
    if valence is None:
        if warn:
            warnings.warn(
                f"no default valence for element {SYMBOL[atom['element']]}; assuming 0 implicit H",
                stacklevel=3,
            )
        return 0
    return max(0, valence - int(bond_sum) - atom["explicit_h"])


def _assemble(atom_dicts: list[dict], bond_triples: list[tuple[int, int, str | None]]) -> MolGraph:
    aromatic = [a["aromatic"] for a in atom_dicts]
    bonds = []
    for a, b, order in bond_triples:
        if order is None:
            order = AROMATIC if aromatic[a] and aromatic[b] else SINGLE
        bonds.append(Bond(a, b, order))
    n = len(atom_dicts)
    adjacency: list[list[int]] = [[] for _ in range(n)]
    bond_sum = [0.0] * n
    for bond in bonds:
        adjacency[bond.a].append(bond.b)
        adjacency[bond.b].append(bond.a)
        bond_sum[bond.a] += BOND_ORDER_VALUE[bond.order]
        bond_sum[bond.b] += BOND_ORDER_VALUE[bond.order]
    ring = _ring_atoms(n, [(b.a, b.b) for b in bonds])
    atoms = tuple(
        Atom(
            element=d["element"],
            aromatic=d["aromatic"],
            formal_charge=d["formal_charge"],
            explicit_h=d["explicit_h"],
            implicit_h=_compute_implicit_h(d, bond_sum[i]),
            degree=len(adjacency[i]),
            in_ring=i in ring,
            bracket=d["bracket"],
        )
        for i, d in enumerate(atom_dicts)
    )
    return MolGraph(atoms, tuple(bonds), tuple(tuple(x) for x in adjacency))


def parse_smiles(text: str) -> MolGraph:
    """Parse a SMILES string into a :class:`MolGraph`.

    Atoms keep first-encounter order. Stereo markers (``/``, ``\\``, ``@``)
    are accepted and ignored. Raises :class:`SmilesError` on malformed input.
    """
    if not isinstance(text, str):
        raise TypeError(f"expected str, got {type(text).__name__}")
    if not text:
        raise SmilesError("empty SMILES", 0)
    for i, ch in enumerate(text):
        if not (ch.isascii() and ch.isprintable()) or ch.isspace():
            raise SmilesError(f"invalid character {ch!r}", i)
    parser = _Parser(text)
    parser.parse()
    return _assemble(parser.atoms, list(parser.bonds.values()))


def implicit_hydrogen_count(graph: MolGraph, atom: int) -> int:
    """Recompute implicit hydrogens of ``atom`` from the valence table.

    Aromatic bonds count 1.5 and the bond-order sum is floored. Bracket atoms
    carry their hydrogen count explicitly and get none implicit.
    """
    a = graph.atoms[atom]
    bond_sum = sum(BOND_ORDER_VALUE[order] for _, order in graph.neighbors(atom))
    d = dict(
        element=a.element,
        formal_charge=a.formal_charge,
        explicit_h=a.explicit_h,
        bracket=a.bracket,
    )
    return _compute_implicit_h(d, bond_sum)


# ---------------------------------------------------------------------------
# stable hashing

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def stable_hash(values) -> int:
    """64-bit FNV-1a over little-endian int64 encodings, splitmix64-finalized.

    Platform and process independent (unlike the builtin ``hash``).
    """
    data = struct.pack(f"<{len(values)}q", *(_to_signed(v) for v in values))
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & _MASK64
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & _MASK64
    h ^= h >> 31
    return h


def _to_signed(v: int) -> int:
    v = int(v) & _MASK64
    return v - (1 << 64) if v >= 1 << 63 else v


def invariant_tuple(atom: Atom) -> tuple[int, int, int, int, int, int]:
    return (
        atom.element,
        atom.degree,
        atom.total_h,
        atom.formal_charge,
        int(atom.aromatic),
        int(atom.in_ring),
    )


def atom_invariant(graph: MolGraph, atom: int) -> int:
    """Initial ECFP identifier: stable hash of the atom's invariant tuple."""
    return stable_hash(invariant_tuple(graph.atoms[atom]))


# ---------------------------------------------------------------------------
# writer (randomized atom order; used to produce equivalent rewrites)


def _atom_token(atom: Atom) -> str:
    sym = atom.symbol
    if atom.aromatic:
        sym = sym.lower()
    organic = (sym in _ORGANIC or sym in _ORGANIC_AROMATIC) and not atom.bracket
    if organic:
        return sym
    out = "[" + sym
    if atom.explicit_h:
        out += "H" if atom.explicit_h == 1 else f"H{atom.explicit_h}"
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        mag = abs(atom.formal_charge)
        out += sign if mag == 1 else f"{sign}{mag}"
    return out + "]"


def _bond_token(graph: MolGraph, a: int, b: int, order: str) -> str:
    both_aromatic = graph.atoms[a].aromatic and graph.atoms[b].aromatic
    if order == SINGLE:
        return "-" if both_aromatic else ""
    if order == AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order == DOUBLE else "#"


def write_smiles(graph: MolGraph, rng: random.Random | None = None) -> str:
    """Write a (non-canonical) SMILES for ``graph``.

    With ``rng`` the start atom of each fragment and the neighbor visiting
    order are shuffled, giving a random atom-order rewrite of the molecule.
    """
    n = len(graph.atoms)
    orders = {frozenset((b.a, b.b)): b.order for b in graph.bonds}
    nbrs = [list(graph.adjacency[i]) for i in range(n)]
    roots = list(range(n))
    if rng is not None:
        for lst in nbrs:
            rng.shuffle(lst)
        rng.shuffle(roots)

    visited = [False] * n
    parent = [-1] * n
    order_seen: list[int] = []
    tree_children: list[list[int]] = [[] for _ in range(n)]
    fragments: list[int] = []
    for root in roots:
        if visited[root]:
            continue
        fragments.append(root)
        stack = [(root, -1)]
        while stack:
            v, p = stack.pop()
            if visited[v]:
                continue
            visited[v] = True
            parent[v] = p
            order_seen.append(v)
            if p >= 0:
                tree_children[p].append(v)
            for w in reversed(nbrs[v]):
                if not visited[w]:
                    stack.append((w, v))
    tree = {frozenset((v, parent[v])) for v in range(n) if parent[v] >= 0}
    ring_set = [key for key in orders if key not in tree]

    rank = {v: i for i, v in enumerate(order_seen)}
    opens: dict[int, list[tuple[int, frozenset]]] = {i: [] for i in range(n)}
    for key in ring_set:
        a, b = sorted(key, key=rank.__getitem__)
        opens[a].append((b, key))
    opens_at = {i: sorted(v, key=lambda t: rank[t[0]]) for i, v in opens.items()}

    free = list(range(99, 0, -1))
    labels: dict[frozenset, int] = {}
    out: list[str] = []

    def ring_label(number: int) -> str:
        return str(number) if number < 10 else f"%{number:02d}"

    def emit(v: int) -> None:
        # iterative emission to survive deep chains
        work: list = [("atom", v)]
        while work:
            kind, item = work.pop()
            if kind == "text":
                out.append(item)
                continue
            v = item
            out.append(_atom_token(graph.atoms[v]))
            closing = [key for key in labels if v in key]
            for key in sorted(closing, key=labels.__getitem__):
                num = labels.pop(key)
                a, b = tuple(key)
                out.append(_bond_token(graph, a, b, orders[key]) + ring_label(num))
                free.append(num)
                free.sort(reverse=True)
            for w, key in opens_at[v]:
                num = free.pop()
                labels[key] = num
                out.append(_bond_token(graph, v, w, orders[key]) + ring_label(num))
            children = tree_children[v]
            seq: list = []
            for j, c in enumerate(children):
                bond = _bond_token(graph, v, c, orders[frozenset((v, c))])
                if j < len(children) - 1:
                    seq.append(("text", "(" + bond))
                    seq.append(("atom", c))
                    seq.append(("text", ")"))
                else:
                    seq.append(("text", bond))
                    seq.append(("atom", c))
            work.extend(reversed(seq))

    for i, root in enumerate(fragments):
        if i:
            out.append(".")
        emit(root)
    return "".join(out)
