import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ivpgan import IVPGANRegressor
from ivpgan.datasets import make_synthetic_table
from ivpgan.estimator import PairFeaturizer, check_pairs

SMALL = dict(n_bits=64, gconv_widths=(8,), gen_hidden=(16,), disc_hidden=(8,), batch_size=10, lr_gen=1e-3)


@pytest.fixture(scope="module")
def table():
    return make_synthetic_table(5, 6, seq_length=(20, 40), noise=0.05, seed=0)


@pytest.fixture(scope="module")
def fitted(table):
    return IVPGANRegressor(epochs=3, val_fraction=0.2, patience=2, random_state=1, **SMALL).fit(
        table.pairs(), table.affinities
    )


def test_params_and_clone():
    est = IVPGANRegressor(lam=0.3, **SMALL)
    params = est.get_params()
    assert params["lam"] == 0.3 and params["n_bits"] == 64
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(variant="ecfp_psc")
    assert est.variant == "ecfp_psc"


def test_fit_predict(fitted, table):
    pred = fitted.predict(table.pairs())
    assert pred.shape == (len(table),) and np.all(np.isfinite(pred))
    assert fitted.n_epochs_ == len(fitted.history_) <= 3
    assert len(fitted.val_rows_) == 6 and len(fitted.train_rows_) == 24
    assert np.isfinite(fitted.score(table.pairs(), table.affinities))


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        IVPGANRegressor().predict([("C", "ACD")])


def test_same_seed_same_predictions(fitted, table):
    again = clone(fitted).fit(table.pairs(), table.affinities)
    assert np.array_equal(again.predict(table.pairs()), fitted.predict(table.pairs()))


@pytest.mark.parametrize("variant", ["ecfp_psc", "graphconv_psc"])
def test_baseline_variants(variant, table):
    est = IVPGANRegressor(variant=variant, epochs=1, val_fraction=0, **SMALL).fit(table.pairs(), table.affinities)
    assert est.predict(table.pairs()[:3]).shape == (3,)


def test_save_load(fitted, table, tmp_path):
    path = tmp_path / "m.ckpt"
    fitted.save(path, {"note": "x"})
    back = IVPGANRegressor.load(path)
    assert back.get_params() == fitted.get_params()
    assert back.checkpoint_meta_["note"] == "x"
    assert np.array_equal(back.predict(table.pairs()), fitted.predict(table.pairs()))


def test_bad_inputs(table):
    est = IVPGANRegressor(epochs=1, **SMALL)
    with pytest.raises(ValueError, match="variant"):
        IVPGANRegressor(variant="rf").fit(table.pairs(), table.affinities)
    with pytest.raises(ValueError, match="rows"):
        est.fit(table.pairs(), table.affinities[:-1])
    with pytest.raises(ValueError, match="non-finite"):
        est.fit(table.pairs(), np.full(len(table), np.nan))
    with pytest.raises(ValueError, match="shape"):
        check_pairs([["C", "A", "x"]])
    with pytest.raises(ValueError, match="empty"):
        check_pairs(np.empty((0, 2), dtype=object))
    with pytest.raises(TypeError):
        check_pairs([["C", 3]])


def test_featurizer_memoizes_and_primes():
    feat = PairFeaturizer(8, 64)
    data = feat.encode([("CCO", "ACD"), ("CCO", "MKV"), ("C", "ACD")])
    assert data.fingerprints.shape == (2, 64) and data.psc.shape == (2, 8420)
    assert data.compound_index.tolist() == [0, 0, 1] and data.target_index.tolist() == [0, 1, 0]
    primed = PairFeaturizer(8, 64).prime({"C": np.ones(64)})
    assert primed.compound("C")[2].sum() == 64
