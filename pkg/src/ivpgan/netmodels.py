"""Parameterized models: graph convolution encoder, generator and discriminator."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import tensor as T
from .chemgraph import MolGraph
from .protfeat import PSC_DIM

ELEMENT_SLOTS = (5, 6, 7, 8, 15, 16, 9, 17, 35, 53)  # B C N O P S F Cl Br I, then "other"
MAX_DEGREE = 5
MAX_H = 4
CHARGES = (-1, 0, 1)
ATOM_FEATURE_WIDTH = len(ELEMENT_SLOTS) + 1 + (MAX_DEGREE + 1) + (MAX_H + 1) + len(CHARGES) + 2

VARIANTS = ("ecfp_psc", "graphconv_psc", "ivpgan")


def atom_features(graph: MolGraph) -> np.ndarray:
    """One row per atom: element, degree, total H and charge one-hots, then
    aromatic and ring flags. Out-of-range values land in the boundary slot."""
    out = np.zeros((len(graph.atoms), ATOM_FEATURE_WIDTH))
    deg0 = len(ELEMENT_SLOTS) + 1
    h0 = deg0 + MAX_DEGREE + 1
    q0 = h0 + MAX_H + 1
    for i, atom in enumerate(graph.atoms):
        slot = ELEMENT_SLOTS.index(atom.element) if atom.element in ELEMENT_SLOTS else len(ELEMENT_SLOTS)
        out[i, slot] = 1.0
        out[i, deg0 + min(atom.degree, MAX_DEGREE)] = 1.0
        out[i, h0 + min(atom.total_h, MAX_H)] = 1.0
        out[i, q0 + CHARGES.index(max(-1, min(1, atom.formal_charge)))] = 1.0
        out[i, q0 + 3] = float(atom.aromatic)
        out[i, q0 + 4] = float(atom.in_ring)
    return out


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _padded(groups: list[list[int]]) -> np.ndarray:
    width = max((len(g) for g in groups), default=0)
    out = np.full((len(groups), max(width, 1)), -1, dtype=np.int64)
    for i, g in enumerate(groups):
        out[i, : len(g)] = g
    return out


@dataclass
class GraphBatch:
    """Several molecules stacked into one disconnected graph.

    ``neighbors[v]`` and ``members[m]`` list atom rows (padded with -1) for
    the neighbor sum of atom v and the gather of molecule m.
    """

    features: np.ndarray
    neighbors: np.ndarray
    members: np.ndarray

    @classmethod
    def from_graphs(cls, graphs, features=None) -> GraphBatch:
        if features is None:
            features = [atom_features(g) for g in graphs]
        nbrs: list[list[int]] = []
        members: list[list[int]] = []
        offset = 0
        for g in graphs:
            nbrs += [[j + offset for j in g.adjacency[i]] for i in range(len(g.atoms))]
            members.append(list(range(offset, offset + len(g.atoms))))
            offset += len(g.atoms)
        feats = np.vstack(features) if offset else np.zeros((0, ATOM_FEATURE_WIDTH))
        return cls(feats, _padded(nbrs), _padded(members))


class GraphConv:
    """h' = relu(h W_self + (sum of neighbor h) W_neigh + b), then a sum over atoms.

    Both sums are order-independent and the products row-stable, so renumbering
    atoms or batching molecules together leaves each output bit-for-bit unchanged.
    """

    def __init__(self, widths=(64, 128), in_width=ATOM_FEATURE_WIDTH, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.widths = tuple(widths)
        self.layers = []
        prev = in_width
        for i, w in enumerate(self.widths):
            self.layers.append(
                (
                    T.parameter(glorot(rng, prev, w), f"gconv{i}.w_self"),
                    T.parameter(glorot(rng, prev, w), f"gconv{i}.w_neigh"),
                    T.parameter(np.zeros(w), f"gconv{i}.bias"),
                )
            )
            prev = w

    @property
    def out_width(self) -> int:
        return self.widths[-1] if self.widths else ATOM_FEATURE_WIDTH

    def parameters(self) -> list[T.Tensor]:
        return [p for layer in self.layers for p in layer]

    def __call__(self, batch: GraphBatch) -> T.Tensor:
        h = T.Tensor(batch.features)
        for w_self, w_neigh, bias in self.layers:
            neigh = T.pool_sum(h, batch.neighbors)
            h = T.relu(T.add(T.matmul(h, w_self, True) + T.matmul(neigh, w_neigh, True), bias))
        return T.pool_sum(h, batch.members)


class MLP:
    def __init__(self, sizes, rng=None, prefix="mlp"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = tuple(sizes)
        self.layers = [
            (T.parameter(glorot(rng, a, b), f"{prefix}{i}.w"), T.parameter(np.zeros(b), f"{prefix}{i}.b"))
            for i, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:]))
        ]

    def parameters(self) -> list[T.Tensor]:
        return [p for layer in self.layers for p in layer]

    def __call__(self, x: T.Tensor) -> T.Tensor:
        x = T.as_tensor(x)
        if x.data.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise T.ShapeError("mlp input", x.shape, (None, self.sizes[0]))
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            x = T.add(T.matmul(x, w), b)
            if i < last:
                x = T.relu(x)
        return x


class Generator(MLP):
    """Relu MLP with a linear scalar head; output shape (n, 1)."""

    def __init__(self, in_width, hidden=(2048, 512), rng=None):
        super().__init__((in_width, *hidden, 1), rng, prefix="gen")


class Discriminator(MLP):
    """Maps alignment rows of length k to probabilities in (0, 1)."""

    def __init__(self, k, hidden=(32, 16), rng=None):
        super().__init__((k, *hidden, 1), rng, prefix="disc")
        self.k = k

    def __call__(self, rows) -> T.Tensor:
        rows = T.as_tensor(rows)
        if rows.data.ndim != 2 or rows.shape[1] != self.k:
            raise T.ShapeError("discriminator input", rows.shape, (None, self.k))
        return T.sigmoid(super().__call__(rows))


class FeatureStandardizer(TransformerMixin, BaseEstimator):
    """Per-column z-scoring; columns with (near) zero spread are only centred."""

    def __init__(self, floor=1e-12):
        self.floor = floor

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std < self.floor, 1.0, std)
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureStandardizer must be fitted before transform")
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_


def build_civ(fp: np.ndarray | None, gconv: T.Tensor | None, psc: np.ndarray) -> T.Tensor:
    """Concatenate fingerprint bits, learned graph vector and standardized PSC."""
    parts = []
    if fp is not None:
        parts.append(T.Tensor(np.asarray(fp, dtype=np.float64)))
    if gconv is not None:
        parts.append(gconv)
    parts.append(T.Tensor(np.asarray(psc, dtype=np.float64)))
    return T.concat(parts, axis=1)


@dataclass
class NetworkConfig:
    variant: str = "ivpgan"
    n_bits: int = 1024
    gconv_widths: tuple[int, ...] = (64, 128)
    gen_hidden: tuple[int, ...] = (2048, 512)
    disc_hidden: tuple[int, ...] = (32, 16)
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        self.gconv_widths = tuple(self.gconv_widths)
        self.gen_hidden = tuple(self.gen_hidden)
        self.disc_hidden = tuple(self.disc_hidden)

    @property
    def uses_fingerprint(self) -> bool:
        return self.variant in ("ecfp_psc", "ivpgan")

    @property
    def uses_graphconv(self) -> bool:
        return self.variant in ("graphconv_psc", "ivpgan")

    @property
    def civ_width(self) -> int:
        width = PSC_DIM
        if self.uses_fingerprint:
            width += self.n_bits
        if self.uses_graphconv:
            width += self.gconv_widths[-1]
        return width


class Network:
    """Generator (with its graph encoder), discriminator and PSC standardizer."""

    def __init__(self, config: NetworkConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.gconv = GraphConv(config.gconv_widths, rng=rng) if config.uses_graphconv else None
        self.generator = Generator(config.civ_width, config.gen_hidden, rng=rng)
        self.discriminator = Discriminator(config.k, config.disc_hidden, rng=rng)
        self.standardizer = FeatureStandardizer()

    def generator_parameters(self) -> list[T.Tensor]:
        params = self.gconv.parameters() if self.gconv is not None else []
        return params + self.generator.parameters()

    def discriminator_parameters(self) -> list[T.Tensor]:
        return self.discriminator.parameters()

    def parameters(self) -> list[T.Tensor]:
        return self.generator_parameters() + self.discriminator_parameters()

    def forward(self, fp, graphs: GraphBatch | None, graph_index, psc_std) -> T.Tensor:
        """Predicted affinities, shape (n,).

        ``graphs`` holds the distinct molecules of the batch and ``graph_index``
        maps each row to its molecule.
        """
        gvec = None
        if self.gconv is not None:
            gvec = T.take(self.gconv(graphs), graph_index)
        civ = build_civ(fp if self.config.uses_fingerprint else None, gvec, psc_std)
        return T.reshape(self.generator(civ), (-1,))

    # -- checkpoints -------------------------------------------------------

    def state(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]

    def load_state(self, arrays) -> None:
        params = self.parameters()
        if len(arrays) != len(params):
            raise ValueError(f"expected {len(params)} arrays, got {len(arrays)}")
        for p, a in zip(params, arrays):
            if p.shape != a.shape:
                raise T.ShapeError(f"load {p.name}", p.shape, a.shape)
            p.data[...] = a

    def save(self, path, extra: dict | None = None) -> None:
        arrays = {p.name: p.data for p in self.parameters()}
        if hasattr(self.standardizer, "mean_"):
            arrays["standardizer.mean"] = self.standardizer.mean_
            arrays["standardizer.scale"] = self.standardizer.scale_
        meta = {"network": asdict(self.config), "extra": extra or {}}
        write_checkpoint(path, arrays, meta)

    @classmethod
    def load(cls, path) -> tuple[Network, dict]:
        arrays, meta = read_checkpoint(path)
        net = cls(NetworkConfig(**meta["network"]))
        net.load_state([arrays[p.name] for p in net.parameters()])
        if "standardizer.mean" in arrays:
            net.standardizer.mean_ = arrays["standardizer.mean"]
            net.standardizer.scale_ = arrays["standardizer.scale"]
        return net, meta.get("extra", {})


# -- checkpoint container --------------------------------------------------
# Layout: magic, u64 header length, UTF-8 JSON header (sorted keys) listing
# each array's name/shape/offset, then the arrays as little-endian float64.

CHECKPOINT_MAGIC = b"IVPGCKPT\x01"


def write_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    entries = []
    offset = 0
    blobs = []
    for name in arrays:
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True, default=list).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<Q", raw, pos)
    pos += 8
    header = json.loads(raw[pos : pos + hlen])
    base = pos + hlen
    arrays = {}
    for e in header["arrays"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        start = base + e["offset"]
        arrays[e["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=start).reshape(e["shape"]).copy()
    return arrays, header["meta"]
