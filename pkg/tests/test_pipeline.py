import csv
import os

import numpy as np
import pytest
from sklearn.base import clone

from uncertain_batch.cli import main
from uncertain_batch.config import ExperimentConfig, parse_config_text, validate_config
from uncertain_batch.data import make_synthetic, save_dataset
from uncertain_batch.estimator import EpochRecord, UncertainBatchClassifier
from uncertain_batch.exceptions import ConfigError
from uncertain_batch.harness import read_epoch_csv, read_matrix_csv, run_experiment

TIMING = set(EpochRecord.TIMING_FIELDS)


def _small_fit(**kw):
    ds = make_synthetic(60, 5, 3, seed=2)
    params = dict(selector="ours", hidden_layer_sizes=(8,), batch_size=8, epochs=6, warmup=2,
                  window=2, s0=20.0, random_state=3)
    params.update(kw)
    est = UncertainBatchClassifier(**params)
    return est.fit(ds.X[:40], ds.Y[:40], eval_set=(ds.X[40:], ds.Y[40:])), ds


def test_sklearn_params_and_clone():
    est = UncertainBatchClassifier(selector="random", epochs=3)
    assert est.get_params()["epochs"] == 3
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.set_params(lam=0.2).lam == 0.2


def test_fit_predict_shapes_and_validation():
    est, ds = _small_fit()
    assert est.predict_proba(ds.X).shape == (60, 3)
    assert set(np.unique(est.predict(ds.X))) <= {0, 1}
    assert 1 <= est.best_epoch_ <= 6
    with pytest.raises(ValueError):
        UncertainBatchClassifier().fit(ds.X, ds.Y * 2)


def test_two_fits_identical():
    a, ds = _small_fit()
    b, _ = _small_fit()
    np.testing.assert_array_equal(a.predict_proba(ds.X), b.predict_proba(ds.X))
    for ra, rb in zip(a.history_, b.history_):
        assert repr((ra.train_loss, ra.val_macro_auc, ra.pressure)) == repr((rb.train_loss, rb.val_macro_auc, rb.pressure))


@pytest.mark.parametrize("selector", ["ours", "active", "recency"])
def test_warmup_only_run_equals_random(selector):
    ours, ds = _small_fit(selector=selector, epochs=2, warmup=2)
    rand, _ = _small_fit(selector="random", epochs=2, warmup=2)
    np.testing.assert_array_equal(ours.predict_proba(ds.X), rand.predict_proba(ds.X))
    assert [r.train_loss for r in ours.history_] == [r.train_loss for r in rand.history_]


def test_final_epoch_sampling_is_uniform():
    est, _ = _small_fit()
    assert est.history_[-1].pressure == 1.0
    np.testing.assert_array_equal(est.selector_.P_, 1.0 / 40)


def _experiment_cfg(tmp_path, name, **kw):
    ds = make_synthetic(40, 4, 3, seed=5)
    path = tmp_path / "toy.mll"
    save_dataset(ds, path)
    cfg = ExperimentConfig(dataset=str(path), selectors=["ours", "random"], batch_size=8, epochs=5,
                           warmup=2, window=2, s0=10.0, hidden=[6], k_folds=3, folds=[0, 1],
                           seed=11, out=str(tmp_path / name))
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


def _strip_timing(path):
    rows = read_epoch_csv(path)
    return [{k: v for k, v in r.items() if k not in TIMING} for r in rows]


def test_experiment_outputs_are_reproducible(tmp_path):
    run_experiment(_experiment_cfg(tmp_path, "a"))
    run_experiment(_experiment_cfg(tmp_path, "b"))
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    assert "epochs_ours_0.csv" in names and "summary.csv" in names
    for name in names:
        if name.startswith("epochs_"):
            assert _strip_timing(tmp_path / "a" / name) == _strip_timing(tmp_path / "b" / name)
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_summary_rows_and_means(tmp_path):
    rows, results = run_experiment(_experiment_cfg(tmp_path, "s", selectors=["random"]))
    assert [r["fold"] for r in rows] == ["0", "1", "mean"]
    for m in ("macro_auc", "ranking_loss", "hamming_loss"):
        vals = [float(r[m]) for r in rows[:2]]
        assert float(rows[2][m]) == pytest.approx(np.mean(vals), abs=1e-15)
        assert float(rows[2][m + "_std"]) == pytest.approx(np.std(vals), abs=1e-15)
    # Each fold row reports the test score at its best validation epoch.
    for res in results:
        recs = read_epoch_csv(tmp_path / "s" / f"epochs_random_{res.fold}.csv")
        aucs = [float(r["val_macro_auc"]) for r in recs]
        assert res.best_epoch == int(np.argmax(aucs)) + 1


def test_grid_doubles_rows(tmp_path):
    rows, _ = run_experiment(_experiment_cfg(tmp_path, "g", selectors=["ours"], grid_s0=[2.0, 100.0]))
    assert len(rows) == 6
    assert {r["s0"] for r in rows} == {"2.0", "100.0"}
    assert os.path.isdir(tmp_path / "g" / "s0=2_T=2_lambda1=0.5")


def test_dumps(tmp_path):
    cfg = _experiment_cfg(tmp_path, "d", selectors=["ours"], folds=[0], epochs=6,
                          dump=["U", "C", "w", "P"], corr_diff=[3, 5])
    run_experiment(cfg)
    d = tmp_path / "d" / "dumps_ours_0"
    for t in range(1, 7):
        U = read_matrix_csv(d / f"U_epoch_{t}.csv")
        assert U.min() >= 0.0 and U.max() <= 1.0
    for t in range(3, 7):
        C = read_matrix_csv(d / f"corr_epoch_{t}.csv")
        np.testing.assert_array_equal(C, C.T)
        np.testing.assert_array_equal(np.diag(C), 1.0)
        table = read_matrix_csv(d / f"sampling_epoch_{t}.csv", header=True)
        assert table.shape[1] == 4 and abs(table[:, 3].sum() - 1.0) < 1e-9
    diff = read_matrix_csv(d / "corr_diff_3_5.csv")
    want = read_matrix_csv(d / "corr_epoch_5.csv") - read_matrix_csv(d / "corr_epoch_3.csv")
    np.testing.assert_allclose(diff, want, atol=1e-11)


def test_config_parsing_and_validation():
    cfg = parse_config_text("# comment\nselectors = ours, balance\nbatch_size = 32\nrefresh_full_epoch = yes\n")
    assert cfg.selectors == ["ours", "balance"] and cfg.batch_size == 32 and cfg.refresh_full_epoch
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config_text("nonsense = 1")
    with pytest.raises(ConfigError, match=":2:"):
        parse_config_text("epochs = 3\nbatch_size = many\n")
    with pytest.raises(ConfigError, match="warmup"):
        validate_config(ExperimentConfig(warmup=2, window=5))
    validate_config(ExperimentConfig(warmup=3, window=5, refresh_full_epoch=True))


def test_cli_exit_codes(tmp_path, capsys):
    cfg = _experiment_cfg(tmp_path, "cli")
    conf = tmp_path / "run.conf"
    conf.write_text(f"dataset = {cfg.dataset}\nbatch_size = 8\nepochs = 4\nwarmup = 2\nwindow = 2\n"
                    f"hidden = 6\nk_folds = 3\nfolds = 0\nout = {tmp_path / 'cli'}\n")
    assert main(["validate-config", "--config", str(conf)]) == 0
    assert "batch_size = 8" in capsys.readouterr().out
    assert main(["train", "--config", str(conf), "--selector", "ours"]) == 0
    assert (tmp_path / "cli" / "epochs_ours_0.csv").exists()
    assert main(["experiment", "--config", str(conf), "--selector", "random,balance"]) == 0
    assert main(["inspect", "--config", str(conf), "--selector", "ours"]) == 0
    assert (tmp_path / "cli" / "dumps_ours_0" / "corr_epoch_3.csv").exists()
    assert main(["validate-config", "--set", "selectors=bogus"]) == 2
    assert main(["train", "--config", str(conf), "--dataset", str(tmp_path / "missing.mll")]) == 3
    bad = tmp_path / "bad.mll"
    bad.write_text("#MLL n=2 d=1 q=1\n1|0\n")
    assert main(["train", "--config", str(conf), "--dataset", str(bad)]) == 3
    assert "bad.mll" in capsys.readouterr().err


def test_external_score_selector(tmp_path):
    cfg = _experiment_cfg(tmp_path, "ext", selectors=["external"], folds=[0])
    scores = tmp_path / "scores.csv"
    with open(scores, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "instance", "score"])
        for i in range(40):
            w.writerow([3, i, i % 7])
    cfg.score_path = str(scores)
    rows, results = run_experiment(cfg)
    assert results[0].status == "ok"
    assert results[0].records[-1].pressure == 1.0
