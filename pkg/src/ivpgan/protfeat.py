"""Protein sequence composition: amino-acid, dipeptide and tripeptide frequencies."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
_INDEX = {aa: i for i, aa in enumerate(AMINO_ACIDS)}

AAC_DIM, DC_DIM, TC_DIM = 20, 400, 8000
PSC_DIM = AAC_DIM + DC_DIM + TC_DIM

DIPEPTIDES = [a + b for a in AMINO_ACIDS for b in AMINO_ACIDS]
TRIPEPTIDES = [a + b + c for a in AMINO_ACIDS for b in AMINO_ACIDS for c in AMINO_ACIDS]


class SequenceError(ValueError):
    pass


def encode(sequence: str) -> np.ndarray:
    """Residue indices 0..19 in alphabetical one-letter order."""
    if not sequence:
        raise SequenceError("empty sequence")
    bad = [i for i, ch in enumerate(sequence) if ch not in _INDEX]
    if bad:
        shown = ", ".join(f"{i}:{sequence[i]!r}" for i in bad[:10])
        more = f" (+{len(bad) - 10} more)" if len(bad) > 10 else ""
        raise SequenceError(f"non-standard residues at positions {shown}{more}")
    return np.fromiter((_INDEX[ch] for ch in sequence), dtype=np.int64, count=len(sequence))


def _composition(codes: np.ndarray, n: int) -> np.ndarray:
    width = 20**n
    m = len(codes) - n + 1
    idx = np.zeros(m, dtype=np.int64)
    for offset in range(n):
        idx = idx * 20 + codes[offset : offset + m]
    return np.bincount(idx, minlength=width) / m


def aac(sequence: str) -> np.ndarray:
    return _composition(encode(sequence), 1)


def dc(sequence: str) -> np.ndarray:
    codes = encode(sequence)
    if len(codes) < 2:
        raise SequenceError("dipeptide composition needs length >= 2")
    return _composition(codes, 2)


def tc(sequence: str) -> np.ndarray:
    codes = encode(sequence)
    if len(codes) < 3:
        raise SequenceError("tripeptide composition needs length >= 3")
    return _composition(codes, 3)


def psc(sequence: str, scale: str = "fraction") -> np.ndarray:
    """Concatenated [AAC, DC, TC] vector of length 8420.

    ``scale="percent"`` multiplies every entry by 100.
    """
    if scale not in ("fraction", "percent"):
        raise ValueError(f"scale must be 'fraction' or 'percent', got {scale!r}")
    codes = encode(sequence)
    if len(codes) < 3:
        raise SequenceError("sequence composition needs length >= 3")
    out = np.concatenate([_composition(codes, 1), _composition(codes, 2), _composition(codes, 3)])
    return out * 100.0 if scale == "percent" else out


class PSCTransformer(TransformerMixin, BaseEstimator):
    def __init__(self, scale="fraction"):
        self.scale = scale

    def fit(self, X, y=None):
        self.n_features_out_ = PSC_DIM
        return self

    def transform(self, X):
        rows = [psc(s, self.scale) for s in X]
        return np.vstack(rows) if rows else np.zeros((0, PSC_DIM))
