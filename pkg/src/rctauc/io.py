"""CSV dataset ingestion, flat run-config files and report serialisation."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .data import EPS, NuisanceEstimates, RctDataset, ScoreSet, make_nuisance
from .harness import ExperimentReport, ReportRow

SCORE_PREFIX = "score__"
FEATURE_PREFIX = "x_"
NUISANCE_COLUMNS = ("omega_hat", "tau_hat")
POOL_COLUMNS = ("y0", "y1", "omega_true", "tau_true")


class DataError(ValueError):
    """Malformed input data; the message carries the 1-based line number."""


@dataclass
class LoadedCsv:
    dataset: RctDataset
    scores: list
    nuisance: NuisanceEstimates | None = None
    extras: dict = field(default_factory=dict)
    feature_names: list = field(default_factory=list)


def _parse_float(text, line, column):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}: column {column}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {line}: column {column}: non-finite value {text!r}")
    return value


def _parse_binary(text, line, column, what):
    value = _parse_float(text, line, column)
    if value not in (0.0, 1.0):
        raise DataError(f"line {line}: non-binary {what}")
    return int(value)


def load_csv(path, pi="empirical", eps: float = EPS) -> LoadedCsv:
    """Read a trial CSV.

    Required columns ``t`` and ``y``; optional ``score__<name>``, ``x_<k>``,
    ``omega_hat``/``tau_hat`` and synthetic-pool extras. ``pi`` is the design
    randomization probability or ``"empirical"`` for the observed treated
    share.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("line 1: missing header") from None
        for required in ("t", "y"):
            if required not in header:
                raise DataError(f"line 1: missing required column {required!r}")
        if len(set(header)) != len(header):
            raise DataError("line 1: duplicate column names")
        col = {name: i for i, name in enumerate(header)}
        score_cols = [h for h in header if h.startswith(SCORE_PREFIX)]
        feature_cols = [h for h in header if h.startswith(FEATURE_PREFIX)]
        extra_cols = [h for h in header if h in POOL_COLUMNS]
        nuisance_cols = [h for h in header if h in NUISANCE_COLUMNS]
        t, y = [], []
        numeric = {h: [] for h in score_cols + feature_cols + extra_cols + nuisance_cols}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"line {line_no}: expected {len(header)} fields, got {len(row)}")
            t.append(_parse_binary(row[col["t"]], line_no, "t", "treatment"))
            y.append(_parse_binary(row[col["y"]], line_no, "y", "outcome"))
            for h, values in numeric.items():
                values.append(_parse_float(row[col[h]], line_no, h))
    if not t:
        raise DataError("no data rows")
    t_arr = np.array(t, dtype=np.int8)
    if pi == "empirical":
        pi_value = float(t_arr.mean())
    else:
        pi_value = float(pi)
        if not 0.0 <= pi_value <= 1.0:
            raise DataError(f"randomization probability {pi_value} outside [0, 1]")
    features = (np.column_stack([numeric[h] for h in feature_cols]) if feature_cols
                else np.zeros((len(t), 0)))
    dataset = RctDataset(features, np.array(y, dtype=np.int8), t_arr, pi_value)
    scores = [ScoreSet(h[len(SCORE_PREFIX):], np.array(numeric[h])) for h in score_cols]
    nuisance = None
    if len(nuisance_cols) == 2:
        nuisance = make_nuisance(numeric["omega_hat"], numeric["tau_hat"], dataset, eps)
    elif nuisance_cols:
        raise DataError(f"line 1: {nuisance_cols[0]} given without its partner column")
    extras = {h: np.array(numeric[h]) for h in extra_cols}
    return LoadedCsv(dataset, scores, nuisance, extras, feature_cols)


def _atomic_write(path, text: str):
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def dataset_to_csv(dataset: RctDataset, scores=(), nuisance: NuisanceEstimates | None = None,
                   extras: dict | None = None, feature_names=None) -> str:
    """Render a dataset in the CSV schema read by ``load_csv``."""
    p = dataset.features.shape[1]
    feature_names = feature_names or [f"{FEATURE_PREFIX}{k}" for k in range(p)]
    columns = [("t", dataset.treatment.astype(int)), ("y", dataset.outcome.astype(int))]
    columns += [(name, dataset.features[:, k]) for k, name in enumerate(feature_names)]
    columns += [(f"{SCORE_PREFIX}{s.model_name}", s.scores) for s in scores]
    if nuisance is not None:
        columns += [("omega_hat", nuisance.omega_hat), ("tau_hat", nuisance.tau_hat)]
    for name, values in (extras or {}).items():
        values = np.asarray(values)
        columns.append((name, values.astype(int) if name in ("y0", "y1") else values))
    lines = [",".join(name for name, _ in columns)]
    for i in range(dataset.n):
        lines.append(",".join(_fmt(values[i]) for _, values in columns))
    return "\n".join(lines) + "\n"


def write_dataset_csv(path, dataset: RctDataset, **kwargs):
    _atomic_write(path, dataset_to_csv(dataset, **kwargs))


def pool_to_dataset(pool) -> tuple[RctDataset, dict]:
    """A synthetic pool as a trial: its own assignment, matching observed outcome."""
    t = pool.assignment
    y = np.where(t == 1, pool.y1, pool.y0)
    extras = {"y0": pool.y0, "y1": pool.y1, "omega_true": pool.omega_true,
              "tau_true": pool.tau_effective}
    return RctDataset(pool.features, y, t, pool.config.pi), extras


# --- reports ----------------------------------------------------------------

def _setting_label(setting: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in setting.items())


def report_to_json(report: ExperimentReport) -> str:
    payload = {
        "metric": report.metric_name,
        "provenance": report.provenance,
        "rows": [{"setting": r.setting, "method": r.method, "mean": r.mean, "ci_lo": r.ci_lo,
                  "ci_hi": r.ci_hi, "used": r.used, "skipped": r.skipped, "extra": r.extra}
                 for r in report.rows],
    }
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def report_to_csv(report: ExperimentReport) -> str:
    """Long format: one line per setting x method x statistic."""
    lines = ["setting,method,stat,value"]
    for r in report.rows:
        label = _setting_label(r.setting)
        if any(ch in label for ch in ',"\n'):
            label = '"' + label.replace('"', '""') + '"'
        for stat in ("mean", "ci_lo", "ci_hi"):
            lines.append(f"{label},{r.method},{stat},{_fmt(getattr(r, stat))}")
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, path, fmt: str = "json"):
    if fmt == "json":
        text = report_to_json(report)
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    _atomic_write(path, text)


def read_report(path) -> ExperimentReport:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    rows = [ReportRow(r["setting"], r["method"], r["mean"], r["ci_lo"], r["ci_hi"], r["used"],
                      r["skipped"], r.get("extra", {})) for r in payload["rows"]]
    return ExperimentReport(payload["metric"], rows, payload.get("provenance", {}))


def read_report_csv(path) -> dict:
    """Parse a long-format report CSV into {(setting, method, stat): value}."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out[(rec["setting"], rec["method"], rec["stat"])] = float(rec["value"])
    return out


# --- run-config files -------------------------------------------------------

# flat key -> (section, field). "cate_shape" is the DGP's tau_form.
CONFIG_KEYS = {
    "dim": ("dgp", "dim"), "pool_size": ("dgp", "pool_size"), "delta": ("dgp", "delta"),
    "pi": ("dgp", "pi"), "w_y_density": ("dgp", "w_y_density"),
    "w_tau_support": ("dgp", "w_tau_support"), "w_tau_probs": ("dgp", "w_tau_probs"),
    "prob_clip": ("dgp", "prob_clip"), "seed": ("dgp", "seed"),
    "cate_shape": ("dgp", "tau_form"),
    "n_rct": ("sweep", "n_rct"), "replications": ("sweep", "replications"),
    "ate_grid": ("sweep", "ate_grid"), "noise_grid": ("sweep", "noise_grid"),
    "nuisance_mode": ("sweep", "nuisance_mode"), "estimators": ("sweep", "estimator_set"),
    "tie": ("sweep", "tie"), "base_seed": ("sweep", "base_seed"),
    "training_sizes": ("sweep", "training_sizes"), "model_seed": ("sweep", "model_seed"),
    "folds": ("sweep", "folds"), "tau_form": ("sweep", "tau_form"),
    "redraw_outcomes": ("sweep", "redraw_outcomes"), "truth": ("sweep", "truth"),
    "n_grid": ("power", "n_grid"), "bootstrap_samples": ("power", "bootstrap_samples"),
    "repetitions": ("power", "repetitions"), "significance": ("power", "significance"),
    "noise_variance": ("power", "noise_variance"), "stratified": ("power", "stratified"),
    "combine": ("npw", "combine"), "clip_tau_path": ("npw", "clip_tau_path"),
    "epsilon": ("npw", "epsilon"),
}


class ConfigError(ValueError):
    pass


def parse_run_config(text: str) -> dict:
    """Parse a flat YAML mapping into {section: {field: value}}."""
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a flat key-value mapping")
    sections = {"dgp": {}, "sweep": {}, "power": {}, "npw": {}}
    for key, value in doc.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"config key {key!r} must be a scalar or list")
        section, name = CONFIG_KEYS[key]
        sections[section][name] = tuple(value) if isinstance(value, list) else value
    return sections


def load_run_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_run_config(fh.read())
