"""scikit-learn compatible affinity regressor over (SMILES, sequence) pairs."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_random_state

from .advloss import PairData, TrainConfig, Trainer, train
from .chemgraph import MolGraph, parse_smiles
from .fingerprint import ecfp
from .netmodels import VARIANTS, Network, NetworkConfig, atom_features
from .protfeat import psc


def check_pairs(X) -> list[tuple[str, str]]:
    """Coerce ``X`` to a list of (smiles, sequence) string pairs.

    Accepts an (n, 2) array-like or a DataFrame with ``smiles`` and
    ``sequence`` columns.
    """
    if hasattr(X, "columns") and {"smiles", "sequence"} <= set(X.columns):
        X = X[["smiles", "sequence"]].to_numpy()
    arr = np.asarray(X, dtype=object)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n_samples, 2) pairs of (smiles, sequence), got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("empty input")
    for i, (s, q) in enumerate(arr):
        if not isinstance(s, str) or not isinstance(q, str):
            raise TypeError(f"row {i}: SMILES and sequence must be strings")
    return [(s, q) for s, q in arr]


class PairFeaturizer:
    """Memoizes per-compound and per-target features by their string content."""

    def __init__(self, diameter=8, n_bits=1024, psc_scale="fraction"):
        self.diameter = diameter
        self.n_bits = n_bits
        self.psc_scale = psc_scale
        self._graphs: dict[str, MolGraph] = {}
        self._atom_feats: dict[str, np.ndarray] = {}
        self._fps: dict[str, np.ndarray] = {}
        self._psc: dict[str, np.ndarray] = {}

    def prime(self, fingerprints: dict[str, np.ndarray] | None = None, compositions: dict[str, np.ndarray] | None = None):
        """Seed the memo with precomputed features keyed by SMILES / sequence."""
        for smi, bits in (fingerprints or {}).items():
            self._fps[smi] = np.asarray(bits, dtype=np.float64)
        for seq, vec in (compositions or {}).items():
            self._psc[seq] = np.asarray(vec, dtype=np.float64)
        return self

    def compound(self, smiles: str):
        if smiles not in self._graphs:
            graph = parse_smiles(smiles)
            self._graphs[smiles] = graph
            self._atom_feats[smiles] = atom_features(graph)
        if smiles not in self._fps:
            self._fps[smiles] = ecfp(self._graphs[smiles], self.diameter, self.n_bits).bits.astype(np.float64)
        return self._graphs[smiles], self._atom_feats[smiles], self._fps[smiles]

    def target(self, sequence: str) -> np.ndarray:
        if sequence not in self._psc:
            self._psc[sequence] = psc(sequence, self.psc_scale)
        return self._psc[sequence]

    def encode(self, pairs, y=None) -> PairData:
        smiles_ids: dict[str, int] = {}
        seq_ids: dict[str, int] = {}
        ci = np.empty(len(pairs), dtype=np.int64)
        ti = np.empty(len(pairs), dtype=np.int64)
        for i, (s, q) in enumerate(pairs):
            ci[i] = smiles_ids.setdefault(s, len(smiles_ids))
            ti[i] = seq_ids.setdefault(q, len(seq_ids))
        comps = [self.compound(s) for s in smiles_ids]
        return PairData(
            fingerprints=np.vstack([c[2] for c in comps]),
            graphs=[c[0] for c in comps],
            atom_features=[c[1] for c in comps],
            psc=np.vstack([self.target(q) for q in seq_ids]),
            compound_index=ci,
            target_index=ti,
            y=None if y is None else np.asarray(y, dtype=np.float64),
        )


class IVPGANRegressor(RegressorMixin, BaseEstimator):
    """Binding-affinity regressor on compound/target pairs.

    ``variant`` selects the input views: ``"ecfp_psc"`` (fingerprint +
    composition), ``"graphconv_psc"`` (learned graph vector + composition) or
    ``"ivpgan"`` (all three, trained with the adversarial alignment term
    weighted by ``lam``). The two baselines are trained on squared error only.

    A ``val_fraction`` share of the training pairs is held out to pick the
    epoch with the lowest validation RMSE (early stopping after ``patience``
    epochs without improvement); set it to 0 to train for exactly ``epochs``.
    """

    def __init__(
        self,
        variant="ivpgan",
        diameter=8,
        n_bits=1024,
        psc_scale="fraction",
        gconv_widths=(64, 128),
        gen_hidden=(2048, 512),
        disc_hidden=(32, 16),
        lam=0.1,
        k=None,
        include_self=True,
        batch_size=32,
        lr_gen=1e-4,
        lr_disc=1e-3,
        weight_decay=0.0,
        epochs=100,
        val_fraction=0.1,
        patience=10,
        log_eps=1e-7,
        random_state=0,
    ):
        self.variant = variant
        self.diameter = diameter
        self.n_bits = n_bits
        self.psc_scale = psc_scale
        self.gconv_widths = gconv_widths
        self.gen_hidden = gen_hidden
        self.disc_hidden = disc_hidden
        self.lam = lam
        self.k = k
        self.include_self = include_self
        self.batch_size = batch_size
        self.lr_gen = lr_gen
        self.lr_disc = lr_disc
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.val_fraction = val_fraction
        self.patience = patience
        self.log_eps = log_eps
        self.random_state = random_state

    def _train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            lam=self.lam,
            k=self.k,
            include_self=self.include_self,
            batch_size=self.batch_size,
            lr_gen=self.lr_gen,
            lr_disc=self.lr_disc,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            seed=seed,
            log_eps=self.log_eps,
            val_fraction=self.val_fraction,
            patience=self.patience,
        )

    def _featurizer(self) -> PairFeaturizer:
        feat = getattr(self, "featurizer_", None)
        if feat is None or (feat.diameter, feat.n_bits, feat.psc_scale) != (self.diameter, self.n_bits, self.psc_scale):
            feat = PairFeaturizer(self.diameter, self.n_bits, self.psc_scale)
        return feat

    def fit(self, X, y, featurizer: PairFeaturizer | None = None):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        pairs = check_pairs(X)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.shape[0] != len(pairs):
            raise ValueError(f"X has {len(pairs)} rows but y has {y.shape[0]}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if isinstance(self.random_state, (int, np.integer)):
            seed = int(self.random_state)
        else:
            seed = int(check_random_state(self.random_state).randint(0, 2**31 - 1))
        config = self._train_config(seed)
        self.featurizer_ = featurizer if featurizer is not None else self._featurizer()
        data = self.featurizer_.encode(pairs, y)

        n = len(pairs)
        split_rng = np.random.default_rng(seed)
        n_val = int(round(self.val_fraction * n)) if self.val_fraction else 0
        perm = split_rng.permutation(n)
        val_rows = np.sort(perm[:n_val]) if n_val else None
        train_rows = np.sort(perm[n_val:])

        network = Network(
            NetworkConfig(
                variant=self.variant,
                n_bits=self.n_bits,
                gconv_widths=self.gconv_widths,
                gen_hidden=self.gen_hidden,
                disc_hidden=self.disc_hidden,
                k=config.neighbors,
                seed=seed,
            )
        )
        # standardizer sees the training pairs only, weighted by occurrence
        network.standardizer.fit(data.psc[data.target_index[train_rows]])
        trainer = Trainer(network, config, network.standardizer.transform(data.psc))
        self.history_ = train(trainer, data, train_rows, val_rows)
        self.network_ = network
        self.n_epochs_ = len(self.history_)
        self.train_rows_ = train_rows
        self.val_rows_ = val_rows
        return self

    def _predict_data(self, data: PairData) -> np.ndarray:
        net = self.network_
        trainer = Trainer(net, self._train_config(0), net.standardizer.transform(data.psc))
        return trainer.predict(data)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        pairs = check_pairs(X)
        return self._predict_data(self.featurizer_.encode(pairs))

    def save(self, path, extra: dict | None = None) -> None:
        check_is_fitted(self, "network_")
        meta = {"estimator": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.get_params().items()}}
        meta.update(extra or {})
        self.network_.save(path, meta)

    @classmethod
    def load(cls, path) -> IVPGANRegressor:
        network, extra = Network.load(path)
        params = dict(extra.get("estimator", {}))
        for key in ("gconv_widths", "gen_hidden", "disc_hidden"):
            if key in params:
                params[key] = tuple(params[key])
        est = cls(**params)
        est.network_ = network
        est.featurizer_ = est._featurizer()
        est.checkpoint_meta_ = extra
        return est
