"""Cross-validated experiment runner, CSV logging and matrix dumps."""

import csv
import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import validate_config
from .data import load_dataset, scale_features, stratified_kfold
from .estimator import EpochRecord, UncertainBatchClassifier
from .exceptions import NumericError, UncertainBatchError
from .metrics import evaluate

logger = logging.getLogger(__name__)

EPOCH_FIELDS = [f.name for f in dataclasses.fields(EpochRecord)]
METRICS = ("macro_auc", "ranking_loss", "hamming_loss")
SUMMARY_FIELDS = [
    "selector", "s0", "window", "lambda1", "fold", "best_epoch",
    "macro_auc", "macro_auc_std", "ranking_loss", "ranking_loss_std",
    "hamming_loss", "hamming_loss_std", "status",
]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_epoch_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPOCH_FIELDS)
        for r in records:
            w.writerow([_fmt(getattr(r, k)) for k in EPOCH_FIELDS])


def read_epoch_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_matrix_csv(M, path, header=None):
    M = np.atleast_2d(np.asarray(M))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in M:
            w.writerow([f"{float(x):.12g}" for x in row])


def read_matrix_csv(path, header=False):
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    return np.array([[float(x) for x in r] for r in rows])


def grid_dirname(s0, window, lam):
    return f"s0={s0:g}_T={window}_lambda1={lam:g}"


class MatrixDumper:
    """Epoch callback writing the requested selector state as CSV files."""

    def __init__(self, directory, keys, corr_diff=()):
        self.directory = directory
        self.keys = set(keys)
        self.corr_diff = tuple(corr_diff)
        self._corr = {}
        os.makedirs(directory, exist_ok=True)

    def __call__(self, epoch, est):
        snap = est.selector_.snapshot()
        if "U" in self.keys and "U" in snap:
            write_matrix_csv(snap["U"], os.path.join(self.directory, f"U_epoch_{epoch}.csv"))
        if "C" in snap:
            if epoch in self.corr_diff:
                self._corr[epoch] = snap["C"]
            if "C" in self.keys:
                write_matrix_csv(snap["C"], os.path.join(self.directory, f"corr_epoch_{epoch}.csv"))
        if self.keys & {"w", "P"} and "w" in snap:
            table = np.column_stack([np.arange(len(snap["w"])), snap["w"], snap["Q"], snap["P"]])
            write_matrix_csv(
                table, os.path.join(self.directory, f"sampling_epoch_{epoch}.csv"),
                header=["instance", "w", "Q", "P"],
            )
        if len(self.corr_diff) == 2 and all(e in self._corr for e in self.corr_diff):
            a, b = self.corr_diff
            write_matrix_csv(self._corr[b] - self._corr[a],
                             os.path.join(self.directory, f"corr_diff_{a}_{b}.csv"))
            self._corr.clear()
            self.corr_diff = ()


@dataclass
class CellResult:
    selector: str
    s0: float
    window: int
    lambda1: float
    fold: int
    records: list
    best_epoch: int = None
    test: dict = None
    status: str = "ok"


def make_estimator(cfg, selector, s0, window, lam, fold):
    return UncertainBatchClassifier(
        selector=selector, hidden_layer_sizes=tuple(cfg.hidden), batch_size=cfg.batch_size,
        epochs=cfg.epochs, learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay,
        warmup=cfg.warmup, window=window, lam=lam, s0=s0, bins=cfg.bins,
        use_correlation=not cfg.identity_c, refresh_full_epoch=cfg.refresh_full_epoch,
        # Stream depends on (seed, fold) only, so selectors and grid points
        # share initial weights and warm-up batches within a fold.
        random_state=(cfg.seed, fold), score_path=cfg.score_path,
    )


def fold_plan(cfg, ds):
    return stratified_kfold(ds.Y, cfg.k_folds, np.random.default_rng(cfg.seed))


def run_training(cfg, ds, plan, fold, selector, s0=None, window=None, lam=None, dump_dir=None):
    """Train one (selector, fold, grid point) cell.

    Returns a :class:`CellResult` holding the epoch records and the test
    metrics of the best validation epoch.
    """
    s0 = cfg.s0 if s0 is None else s0
    window = cfg.window if window is None else window
    lam = cfg.lambda1 if lam is None else lam
    if cfg.force_lambda is not None:
        lam = cfg.force_lambda
    train, val, test = plan.split(fold)
    scaled = scale_features(ds, train)
    est = make_estimator(cfg, selector, s0, window, lam, fold)
    callback = None
    if dump_dir is not None and (cfg.dump or cfg.corr_diff):
        callback = MatrixDumper(dump_dir, cfg.dump, cfg.corr_diff)
    est.fit(
        scaled.X[train], scaled.Y[train], eval_set=(scaled.X[val], scaled.Y[val]),
        instance_ids=train, epoch_callback=callback,
    )
    records = [dataclasses.replace(r, fold=fold) for r in est.history_]
    report = evaluate(est.predict_proba(scaled.X[test]), scaled.Y[test])
    return CellResult(selector, s0, window, lam, fold, records, est.best_epoch_,
                      {m: getattr(report, m) for m in METRICS})


def _cell_dir(cfg, s0, window, lam):
    if len(cfg.grid()) == 1:
        return cfg.out
    return os.path.join(cfg.out, grid_dirname(s0, window, lam))


def _run_cell(args):
    cfg, ds, plan, selector, s0, window, lam, fold = args
    out = _cell_dir(cfg, s0, window, lam)
    os.makedirs(out, exist_ok=True)
    dump_dir = None
    if cfg.dump or cfg.corr_diff:
        dump_dir = os.path.join(out, f"dumps_{selector}_{fold}")
    try:
        res = run_training(cfg, ds, plan, fold, selector, s0, window, lam, dump_dir)
    except NumericError as exc:
        logger.error("cell %s/fold %d failed: %s", selector, fold, exc)
        return CellResult(selector, s0, window, lam, fold, [], status=f"numeric failure: {exc}")
    except UncertainBatchError as exc:
        logger.error("cell %s/fold %d failed: %s", selector, fold, exc)
        return CellResult(selector, s0, window, lam, fold, [], status=f"failed: {exc}")
    write_epoch_csv(res.records, os.path.join(out, f"epochs_{selector}_{fold}.csv"))
    return res


def summarize(results):
    """Summary rows: one per fold, then a mean row (with std) per cell."""
    rows = []
    groups = {}
    for r in results:
        groups.setdefault((r.selector, r.s0, r.window, r.lambda1), []).append(r)
    for (sel, s0, window, lam), cell in groups.items():
        key = {"selector": sel, "s0": _fmt(float(s0)), "window": str(window), "lambda1": _fmt(float(lam))}
        for r in cell:
            row = dict(key, fold=str(r.fold), status=r.status,
                       best_epoch="" if r.best_epoch is None else str(r.best_epoch))
            for m in METRICS:
                row[m] = _fmt(float(r.test[m])) if r.test else ""
                row[m + "_std"] = ""
            rows.append(row)
        ok = [r for r in cell if r.test]
        row = dict(key, fold="mean", best_epoch="", status=f"{len(ok)}/{len(cell)} ok")
        for m in METRICS:
            vals = np.array([r.test[m] for r in ok], dtype=np.float64)
            row[m] = _fmt(float(vals.mean())) if vals.size else ""
            row[m + "_std"] = _fmt(float(vals.std())) if vals.size else ""
        rows.append(row)
    return rows


def write_summary(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def run_experiment(cfg, ds=None):
    """Run every (grid point x selector x fold) cell and write ``summary.csv``.

    Returns ``(summary_rows, cell_results)``.
    """
    validate_config(cfg)
    if ds is None:
        ds = load_dataset(cfg.dataset)
    plan = fold_plan(cfg, ds)
    os.makedirs(cfg.out, exist_ok=True)
    jobs = [
        (cfg, ds, plan, sel, s0, window, lam, fold)
        for (s0, window, lam) in cfg.grid()
        for sel in cfg.selectors
        for fold in cfg.fold_ids()
    ]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    rows = summarize(results)
    write_summary(rows, os.path.join(cfg.out, "summary.csv"))
    return rows, results
