"""Extended-connectivity fingerprints (Morgan / Rogers-Hahn iteration)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .chemgraph import BOND_CODE, MolGraph, atom_invariant, parse_smiles, stable_hash


class FingerprintConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SubstructureId:
    code: int
    radius: int
    atoms: frozenset[int]


@dataclass(frozen=True)
class FingerprintVector:
    bits: np.ndarray  # uint8 0/1, shape (length,)
    diameter: int | None = None

    @property
    def length(self) -> int:
        return int(self.bits.shape[0])

    def popcount(self) -> int:
        return int(self.bits.sum())

    def to_hex(self) -> str:
        """Bit ``i`` is stored MSB-first in byte ``i // 8``."""
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, length: int, diameter: int | None = None) -> FingerprintVector:
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        return cls(np.unpackbits(raw)[:length].copy(), diameter)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FingerprintVector):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self.bits, other.bits))

    __hash__ = None


def ecfp_identifiers(graph: MolGraph, radius: int) -> list[SubstructureId]:
    """Enumerate ECFP substructure identifiers up to ``radius`` iterations.

    Each iteration rehashes an atom's code with its neighbors' previous codes
    (sorted by bond code then neighbor code, so atom order does not matter).
    An environment whose covered atom set was already emitted is dropped;
    within one iteration the smaller code wins a tie. Identifiers form a set,
    so a code seen before (e.g. from a symmetric atom) is not emitted again.
    """
    if radius < 0:
        raise FingerprintConfigError(f"radius must be >= 0, got {radius}")
    n = len(graph.atoms)
    codes = [atom_invariant(graph, i) for i in range(n)]
    cover = [frozenset((i,)) for i in range(n)]
    neighbors = [[] for _ in range(n)]
    for bond in graph.bonds:
        neighbors[bond.a].append((BOND_CODE[bond.order], bond.b))
        neighbors[bond.b].append((BOND_CODE[bond.order], bond.a))

    out: list[SubstructureId] = []
    seen: set[frozenset[int]] = set()
    seen_codes: set[int] = set()

    def emit(r: int) -> None:
        fresh: dict[frozenset[int], int] = {}
        for i in range(n):
            atoms = cover[i]
            if atoms in seen:
                continue
            if atoms not in fresh or codes[i] < fresh[atoms]:
                fresh[atoms] = codes[i]
        for atoms, code in sorted(fresh.items(), key=lambda kv: (kv[1], sorted(kv[0]))):
            if code not in seen_codes:
                out.append(SubstructureId(code, r, atoms))
                seen_codes.add(code)
        seen.update(fresh)

    emit(0)
    for r in range(1, radius + 1):
        new_codes = []
        new_cover = []
        for i in range(n):
            env = sorted((bc, codes[j]) for bc, j in neighbors[i])
            flat = [r, codes[i]]
            for bc, c in env:
                flat.extend((bc, c))
            new_codes.append(stable_hash(flat))
            new_cover.append(cover[i].union(*(cover[j] for _, j in neighbors[i])))
        codes, cover = new_codes, new_cover
        emit(r)
    return out


def _check_n_bits(n_bits: int) -> None:
    if n_bits < 64 or n_bits & (n_bits - 1):
        raise FingerprintConfigError(f"n_bits must be a power of two >= 64, got {n_bits}")


def fold(identifiers, n_bits: int = 1024, diameter: int | None = None) -> FingerprintVector:
    _check_n_bits(n_bits)
    bits = np.zeros(n_bits, dtype=np.uint8)
    for ident in identifiers:
        bits[ident.code % n_bits] = 1
    return FingerprintVector(bits, diameter)


def ecfp(graph: MolGraph | str, diameter: int = 8, n_bits: int = 1024) -> FingerprintVector:
    """Binary ECFP of the given diameter, folded to ``n_bits``."""
    if diameter < 0 or diameter % 2:
        raise FingerprintConfigError(f"diameter must be even and >= 0, got {diameter}")
    _check_n_bits(n_bits)
    if isinstance(graph, str):
        graph = parse_smiles(graph)
    return fold(ecfp_identifiers(graph, diameter // 2), n_bits, diameter)


class ECFPTransformer(TransformerMixin, BaseEstimator):
    """Map SMILES strings (or parsed graphs) to a dense 0/1 fingerprint matrix."""

    def __init__(self, diameter=8, n_bits=1024):
        self.diameter = diameter
        self.n_bits = n_bits

    def fit(self, X, y=None):
        if self.diameter % 2:
            raise FingerprintConfigError(f"diameter must be even, got {self.diameter}")
        _check_n_bits(self.n_bits)
        self.n_features_out_ = self.n_bits
        return self

    def transform(self, X):
        rows = [ecfp(x, self.diameter, self.n_bits).bits for x in X]
        if not rows:
            return np.zeros((0, self.n_bits))
        return np.vstack(rows).astype(np.float64)
