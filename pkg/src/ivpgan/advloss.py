"""Neighborhood-alignment adversarial objective and the alternating training loop."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .metrics import concordance_index, pearson_r2, rmse
from .netmodels import GraphBatch, Network


class TrainingDiverged(RuntimeError):
    def __init__(self, message, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class TrainConfig:
    lam: float = 0.1
    k: int | None = None  # None -> min(5, batch_size - 1)
    include_self: bool = True
    batch_size: int = 32
    lr_gen: float = 1e-4
    lr_disc: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    epochs: int = 100
    seed: int = 0
    log_eps: float = T.DEFAULT_LOG_EPS
    val_fraction: float = 0.1
    patience: int = 10

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.k is not None:
            if self.k < 1:
                raise ValueError(f"k must be >= 1, got {self.k}")
            if self.k > self.batch_size:
                raise ValueError(f"k={self.k} exceeds batch_size={self.batch_size}")
        self.betas = tuple(self.betas)

    @property
    def neighbors(self) -> int:
        return self.k if self.k is not None else min(5, self.batch_size - 1)


# ---------------------------------------------------------------------------
# alignment matrices


def _check_k(n: int, k: int, include_self: bool) -> None:
    limit = n if include_self else n - 1
    if n < 2:
        raise ValueError(f"alignment needs at least 2 values, got {n}")
    if not 1 <= k <= limit:
        raise ValueError(f"k={k} out of range [1, {limit}] for N={n}, include_self={include_self}")


def _neighbor_order(values: np.ndarray, k: int, include_self: bool) -> np.ndarray:
    n = values.shape[0]
    diffs = np.abs(values[:, None] - values[None, :])
    cols = np.broadcast_to(np.arange(n), (n, n))
    if not include_self:
        keep = ~np.eye(n, dtype=bool)
        diffs = diffs[keep].reshape(n, n - 1)
        cols = cols[keep].reshape(n, n - 1)
    order = np.argsort(diffs, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(cols, order, axis=1)


def alignment_matrix(values, k: int, include_self: bool = True) -> np.ndarray:
    """Row i holds the k smallest |v_i - v_j| in ascending order."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    _check_k(values.shape[0], k, include_self)
    n = values.shape[0]
    diffs = np.abs(values[:, None] - values[None, :])
    if not include_self:
        diffs = diffs[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    return np.sort(diffs, axis=1)[:, :k]


def alignment_rows(values: T.Tensor, k: int, include_self: bool = True) -> T.Tensor:
    """Differentiable alignment matrix of a 1-d tensor.

    Neighbor order is read off the current values and held fixed, so the
    gradient flows only through the selected |v_i - v_j| terms.
    """
    flat = T.reshape(values, (-1,))
    n = flat.shape[0]
    _check_k(n, k, include_self)
    cols = _neighbor_order(flat.data, k, include_self)
    rows = np.repeat(np.arange(n)[:, None], k, axis=1)
    return T.absolute(T.take(flat, rows) - T.take(flat, cols))


# ---------------------------------------------------------------------------
# losses


def mse_loss(predictions, labels) -> T.Tensor:
    predictions = T.reshape(T.as_tensor(predictions), (-1,))
    labels = np.asarray(labels.data if isinstance(labels, T.Tensor) else labels, dtype=np.float64).reshape(-1)
    if predictions.shape[0] == 0:
        raise ValueError("mse_loss of empty input")
    if predictions.shape[0] != labels.shape[0]:
        raise T.ShapeError("mse_loss", predictions.shape, labels.shape)
    return T.mean(T.square(predictions - T.Tensor(labels)))


def discriminator_loss(disc, real_rows, fake_rows, eps: float = T.DEFAULT_LOG_EPS) -> T.Tensor:
    """E_real[-log D(x)] + E_fake[-log(1 - D(x))]."""
    if T.as_tensor(real_rows).shape[0] == 0 or T.as_tensor(fake_rows).shape[0] == 0:
        raise ValueError("discriminator_loss needs non-empty real and fake rows")
    d_real = disc(real_rows)
    d_fake = disc(fake_rows)
    real_term = -T.mean(T.log_guarded(d_real, eps))
    fake_term = -T.mean(T.log_guarded(1.0 - d_fake, eps))
    return real_term + fake_term


def generator_adv_loss(disc, fake_rows, eps: float = T.DEFAULT_LOG_EPS) -> T.Tensor:
    """Non-saturating generator loss E_fake[-log D(x)]."""
    if T.as_tensor(fake_rows).shape[0] == 0:
        raise ValueError("generator_adv_loss needs non-empty fake rows")
    return -T.mean(T.log_guarded(disc(fake_rows), eps))


def composite_generator_loss(mse, adv, lam: float):
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    return mse + lam * adv


# ---------------------------------------------------------------------------
# training


@dataclass
class PairData:
    """Featurized interaction pairs, stored per distinct entity.

    ``fingerprints[c]`` / ``graphs[c]`` describe compound c, ``psc[t]`` is the
    raw composition vector of target t, and row i pairs compound
    ``compound_index[i]`` with target ``target_index[i]``.
    """

    fingerprints: np.ndarray
    graphs: list
    atom_features: list
    psc: np.ndarray
    compound_index: np.ndarray
    target_index: np.ndarray
    y: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.compound_index.shape[0])


@dataclass
class LossRecord:
    mse: float
    adv_g: float
    adv_d: float
    composite: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.mse, self.adv_g, self.adv_d, self.composite))


@dataclass
class Trainer:
    """Owns the network, its optimizers and the standardized PSC table."""

    network: Network
    config: TrainConfig
    psc_std: np.ndarray
    opt_g: T.Adam = field(init=False)
    opt_d: T.Adam = field(init=False)

    def __post_init__(self):
        c = self.config
        self.opt_g = T.Adam(self.network.generator_parameters(), c.lr_gen, c.betas, c.adam_eps, c.weight_decay)
        self.opt_d = T.Adam(self.network.discriminator_parameters(), c.lr_disc, c.betas, c.adam_eps)

    @property
    def lam(self) -> float:
        # the two descriptor baselines are plain regression models
        return self.config.lam if self.network.config.variant == "ivpgan" else 0.0

    def predict_tensor(self, data: PairData, rows: np.ndarray) -> T.Tensor:
        comp = data.compound_index[rows]
        graphs = None
        gidx = comp
        if self.network.gconv is not None:
            uniq, gidx = np.unique(comp, return_inverse=True)
            graphs = GraphBatch.from_graphs(
                [data.graphs[c] for c in uniq], [data.atom_features[c] for c in uniq]
            )
        fp = data.fingerprints[comp] if self.network.config.uses_fingerprint else None
        return self.network.forward(fp, graphs, gidx, self.psc_std[data.target_index[rows]])

    def predict(self, data: PairData, rows=None, batch_size: int = 256) -> np.ndarray:
        rows = np.arange(len(data)) if rows is None else np.asarray(rows)
        out = [self.predict_tensor(data, rows[s : s + batch_size]).data for s in range(0, len(rows), batch_size)]
        return np.concatenate(out) if out else np.zeros(0)

    def discriminator_step(self, real_rows: np.ndarray, fake_rows: np.ndarray) -> float:
        loss = discriminator_loss(self.network.discriminator, real_rows, fake_rows, self.config.log_eps)
        grads = T.backward(loss)
        self.opt_d.step(grads)
        return loss.item()

    def train_step(self, data: PairData, rows: np.ndarray) -> LossRecord:
        """One discriminator update followed by one generator update."""
        c = self.config
        y = data.y[rows]
        k = min(self.network.discriminator.k, len(rows) if c.include_self else len(rows) - 1)
        if k != self.network.discriminator.k:
            raise ValueError(f"batch of {len(rows)} too small for k={self.network.discriminator.k}")
        pred = self.predict_tensor(data, rows)

        real = alignment_matrix(y, k, c.include_self)
        fake = alignment_matrix(pred.data, k, c.include_self)
        adv_d = self.discriminator_step(real, fake)

        mse = mse_loss(pred, y)
        fake_rows = alignment_rows(pred, k, c.include_self)
        adv = generator_adv_loss(self.network.discriminator, fake_rows, c.log_eps)
        lam = self.lam
        total = composite_generator_loss(mse, adv, lam) if lam > 0 else mse
        record = LossRecord(mse.item(), adv.item(), adv_d, mse.item() + lam * adv.item())
        if not record.is_finite():
            raise TrainingDiverged(
                f"non-finite loss {record}",
                {"losses": asdict(record), "rows": rows.tolist(), "predictions": pred.data.tolist()},
            )
        grads = T.backward(total)
        self.opt_g.step(grads)
        return record


def make_batches(rows: np.ndarray, batch_size: int, min_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle and chunk; a short tail is merged into the previous batch."""
    rows = rng.permutation(rows)
    batches = [rows[s : s + batch_size] for s in range(0, len(rows), batch_size)]
    if len(batches) > 1 and len(batches[-1]) < min_size:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


HISTORY_FIELDS = ("epoch", "mse", "adv_g", "adv_d", "composite", "val_rmse", "val_ci", "val_r2")


def _val_metrics(y, pred) -> tuple[float, float, float]:
    out = [rmse(pred, y)]
    for fn in (concordance_index, pearson_r2):
        try:
            out.append(fn(pred, y))
        except ValueError:
            out.append(float("nan"))
    return tuple(out)


def train(trainer: Trainer, data: PairData, train_rows, val_rows=None) -> list[dict]:
    """Epoch loop with early stopping on validation RMSE.

    On return the network holds the best parameters seen (by validation
    RMSE when ``val_rows`` is given, else the final ones).
    """
    c = trainer.config
    train_rows = np.asarray(train_rows, dtype=np.int64)
    if len(train_rows) == 0:
        raise ValueError("empty training fold")
    k = trainer.network.discriminator.k
    min_size = max(2, k + (0 if c.include_self else 1))
    if len(train_rows) < min_size:
        raise ValueError(f"training fold of {len(train_rows)} rows is smaller than k-neighborhood {min_size}")
    rng = np.random.default_rng(c.seed)
    history: list[dict] = []
    best = (math.inf, None)
    stale = 0
    for epoch in range(1, c.epochs + 1):
        records = [trainer.train_step(data, b) for b in make_batches(train_rows, c.batch_size, min_size, rng)]
        row = {"epoch": epoch}
        for name in ("mse", "adv_g", "adv_d", "composite"):
            row[name] = float(np.mean([getattr(r, name) for r in records]))
        if val_rows is not None and len(val_rows):
            vy = data.y[val_rows]
            row["val_rmse"], row["val_ci"], row["val_r2"] = _val_metrics(vy, trainer.predict(data, val_rows))
            if row["val_rmse"] < best[0]:
                best = (row["val_rmse"], trainer.network.state())
                stale = 0
            else:
                stale += 1
        else:
            row["val_rmse"] = row["val_ci"] = row["val_r2"] = float("nan")
        history.append(row)
        if val_rows is not None and len(val_rows) and stale >= c.patience:
            break
    if best[1] is not None:
        trainer.network.load_state(best[1])
    return history


def write_history_csv(path, history: list[dict], header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in history:
            writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in HISTORY_FIELDS})
