"""Shared data model: trial datasets, model scores, nuisance estimates, results."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

EPS = 1e-6


class Method(str, Enum):
    STANDARD = "standard"
    TREATED = "treated"
    NAIVE = "naive"
    ALL_DATA = "all_data"
    NPW = "npw"
    NPW_OMEGA_ONLY = "npw_omega_only"
    NPW_TAU_ONLY = "npw_tau_only"


class DegenerateEstimationError(ValueError):
    """Raised when an estimator has no usable pairs (single-class arm, zero weight)."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RctDataset:
    """Observed trial data: features, binary outcome, binary treatment flag.

    ``randomization_prob`` is the design probability of treatment, known from
    the trial protocol rather than estimated from the realised arm sizes.
    """

    features: np.ndarray
    outcome: np.ndarray
    treatment: np.ndarray
    randomization_prob: float = 0.5
    source_index: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim == 1:
            feats = feats.reshape(len(feats), -1) if feats.size else np.zeros((0, 0))
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "outcome", _frozen(self.outcome))
        object.__setattr__(self, "treatment", _frozen(self.treatment))
        object.__setattr__(self, "randomization_prob", float(self.randomization_prob))
        if self.source_index is not None:
            object.__setattr__(self, "source_index", _frozen(self.source_index, int))

    @property
    def n(self) -> int:
        return len(self.outcome)

    @property
    def empirical_treatment_rate(self) -> float:
        return float(self.treatment.mean()) if self.n else float("nan")

    @classmethod
    def without_features(cls, outcome, treatment, randomization_prob=0.5) -> "RctDataset":
        n = len(outcome)
        return cls(np.zeros((n, 0)), outcome, treatment, randomization_prob)

    def subset(self, idx) -> "RctDataset":
        idx = np.asarray(idx, dtype=int)
        src = None if self.source_index is None else self.source_index[idx]
        return RctDataset(self.features[idx], self.outcome[idx], self.treatment[idx],
                          self.randomization_prob, src)


@dataclass(frozen=True)
class ArmSubset:
    """One treatment arm, carrying the original sample indices."""

    indices: np.ndarray
    features: np.ndarray
    outcome: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class ScoreSet:
    model_name: str
    scores: np.ndarray
    true_auc: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        scores = _frozen(self.scores)
        if scores.ndim != 1:
            raise ValueError("scores must be a vector")
        if not np.all(np.isfinite(scores)):
            raise ValueError(f"model {self.model_name!r}: non-finite scores")
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class NuisanceEstimates:
    """Per-sample nuisance estimates plus the population-level plug-ins.

    ``omega_hat`` estimates P(Y=1 | X, T=0) and ``tau_hat`` the conditional
    treatment effect. ``indices`` says which dataset rows the vectors refer to
    (the treated arm, or every row when ``full_length`` is set).
    """

    omega_hat: np.ndarray
    tau_hat: np.ndarray
    mu1_hat: float
    mu0_hat: float
    tau_bar_hat: float
    indices: np.ndarray | None = None
    full_length: bool = True
    fold_of: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "omega_hat", _frozen(self.omega_hat))
        object.__setattr__(self, "tau_hat", _frozen(self.tau_hat))
        if len(self.omega_hat) != len(self.tau_hat):
            raise ValueError("omega_hat and tau_hat lengths differ")
        if self.indices is not None:
            object.__setattr__(self, "indices", _frozen(self.indices, int))
        if self.fold_of is not None:
            object.__setattr__(self, "fold_of", _frozen(self.fold_of, int))

    def for_rows(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (omega_hat, tau_hat) restricted to dataset ``rows``."""
        rows = np.asarray(rows, dtype=int)
        if self.full_length:
            return self.omega_hat[rows], self.tau_hat[rows]
        if self.indices is None:
            if len(rows) != len(self.omega_hat):
                raise ValueError("nuisance vectors do not match the requested rows")
            return self.omega_hat, self.tau_hat
        pos = {int(k): i for i, k in enumerate(self.indices)}
        try:
            sel = np.array([pos[int(r)] for r in rows], dtype=int)
        except KeyError as exc:
            raise ValueError(f"no nuisance estimate for row {exc.args[0]}") from None
        return self.omega_hat[sel], self.tau_hat[sel]


def plugin_aggregates(treated_outcome, tau_hat_treated, eps: float = EPS):
    """Population-level plug-ins from the treated arm.

    mu1 is the treated outcome rate, tau_bar the mean CATE estimate over the
    treated arm and mu0 = mu1 - tau_bar clamped into [eps, 1 - eps].
    """
    y = np.asarray(treated_outcome, dtype=float)
    tau = np.asarray(tau_hat_treated, dtype=float)
    mu1 = float(y.mean()) if len(y) else float("nan")
    tau_bar = float(tau.mean()) if len(tau) else 0.0
    mu0 = float(np.clip(mu1 - tau_bar, eps, 1 - eps))
    return mu1, mu0, tau_bar


def make_nuisance(omega_hat, tau_hat, dataset: RctDataset, eps: float = EPS,
                  fold_of=None) -> NuisanceEstimates:
    """Build full-length NuisanceEstimates for ``dataset`` with clamped omega."""
    omega = np.clip(np.asarray(omega_hat, dtype=float), eps, 1 - eps)
    tau = np.asarray(tau_hat, dtype=float)
    if len(omega) != dataset.n or len(tau) != dataset.n:
        raise ValueError("nuisance vectors must have one entry per dataset row")
    treated = dataset.treatment == 1
    mu1, mu0, tau_bar = plugin_aggregates(dataset.outcome[treated], tau[treated], eps)
    return NuisanceEstimates(omega, tau, mu1, mu0, tau_bar,
                             indices=np.arange(dataset.n), full_length=True, fold_of=fold_of)


@dataclass(frozen=True)
class AucEstimate:
    method: Method
    value: float
    n_control: int
    n_treated: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": Method(self.method).value,
            "value": self.value,
            "n_control": self.n_control,
            "n_treated": self.n_treated,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class BiasDiagnostics:
    alpha: float
    beta: float
    delta_f: float
    sigma_f: float

    @property
    def predicted_bias(self) -> float:
        return self.alpha * self.delta_f - self.beta * self.sigma_f


def validate_dataset(dataset: RctDataset, require_both_arms: bool = False) -> list[str]:
    """Return a list of violations; an empty list means the dataset is usable."""
    problems = []
    n = len(dataset.outcome)
    if len(dataset.treatment) != n or dataset.features.shape[0] != n:
        problems.append(
            f"length mismatch: features={dataset.features.shape[0]}, "
            f"outcome={n}, treatment={len(dataset.treatment)}")
    if not np.isin(dataset.outcome, (0, 1)).all():
        problems.append("non-binary outcome")
    if not np.isin(dataset.treatment, (0, 1)).all():
        problems.append("non-binary treatment")
    if not 0.0 < dataset.randomization_prob < 1.0:
        problems.append(f"randomization probability {dataset.randomization_prob} outside (0, 1)")
    if require_both_arms and len(dataset.treatment) == n:
        if not (dataset.treatment == 0).any():
            problems.append("empty control arm")
        if not (dataset.treatment == 1).any():
            problems.append("empty treatment arm")
    return problems


def split_by_treatment(dataset: RctDataset) -> tuple[ArmSubset, ArmSubset]:
    t = dataset.treatment
    arms = []
    for flag in (0, 1):
        idx = np.flatnonzero(t == flag)
        arms.append(ArmSubset(_frozen(idx, int), dataset.features[idx], dataset.outcome[idx]))
    return arms[0], arms[1]
