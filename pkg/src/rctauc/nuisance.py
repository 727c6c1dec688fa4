"""Nuisance estimation: a small L2-regularised logistic learner, k-fold
cross-fitting of omega(x) = P(Y=1 | x, T=0) and tau(x) (T-learner), and a
noisy oracle for simulations where the true nuisances are known."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import EPS, NuisanceEstimates, RctDataset, make_nuisance


@dataclass(frozen=True)
class LearnerConfig:
    l2_penalty: float = 1.0
    max_iterations: int = 500
    step_size: float = 0.1
    convergence_tol: float = 1e-7


@dataclass(frozen=True)
class CrossFitConfig:
    folds: int = 5
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("cross-fitting needs at least 2 folds")


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    converged: bool = True
    iterations: int = 0
    degenerate: bool = False
    losses: tuple = ()

    def predict_proba(self, features, eps=EPS):
        return predict_proba(self.weights, self.intercept, features, eps)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def logistic_loss_and_grad(weights, intercept, features, labels, l2_penalty):
    """Mean negative log-likelihood plus l2/(2n) * ||w||^2, and its gradient."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = len(y)
    z = x @ weights + intercept
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_penalty * np.dot(weights, weights) / n
    resid = sigmoid(z) - y
    grad_w = x.T @ resid / n + l2_penalty * weights / n
    grad_b = resid.mean()
    return float(loss), grad_w, float(grad_b)


def fit_logistic(features, labels, config: LearnerConfig | None = None,
                 eps: float = EPS) -> LogisticModel:
    """Full-batch gradient descent on standardised features.

    Weights are returned on the original feature scale. A single-class label
    vector gives zero weights and the clamped logit of the class rate.
    """
    config = config or LearnerConfig()
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("features must be an (n, p) matrix matching labels")
    if len(y) == 0:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite features")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary")
    p = x.shape[1]
    rate = y.mean()
    if rate in (0.0, 1.0):
        return LogisticModel(np.zeros(p), float(logit(np.clip(rate, eps, 1 - eps))),
                             converged=True, degenerate=True)

    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    xs = (x - mean) / sd

    w = np.zeros(p)
    b = float(logit(rate))
    losses = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        loss, gw, gb = logistic_loss_and_grad(w, b, xs, y, config.l2_penalty)
        losses.append(loss)
        if np.sqrt(np.dot(gw, gw) + gb * gb) < config.convergence_tol:
            converged = True
            break
        w = w - config.step_size * gw
        b = b - config.step_size * gb
    weights = w / sd
    intercept = b - float(np.dot(weights, mean))
    return LogisticModel(weights, intercept, converged, it, False, tuple(losses))


def predict_proba(weights, intercept, features, eps=EPS):
    x = np.asarray(features, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(w):
        raise ValueError(f"feature dimension {x.shape} does not match {len(w)} weights")
    with np.errstate(over="ignore"):
        return np.clip(sigmoid(x @ w + intercept), eps, 1 - eps)


def fold_assignment(n: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Random fold labels 0..folds-1 with fold sizes differing by at most one."""
    labels = np.arange(n) % folds
    return labels[rng.permutation(n)]


@dataclass(frozen=True)
class CrossFitResult:
    nuisance: NuisanceEstimates
    fold_of: np.ndarray
    training_rows: tuple
    omega_models: tuple
    treated_models: tuple

    def out_of_fold(self) -> bool:
        """Every row was predicted by models whose training rows exclude it."""
        return all(not np.isin(np.flatnonzero(self.fold_of == k), rows).any()
                   for k, rows in enumerate(self.training_rows))


def cross_fit(dataset: RctDataset, config: CrossFitConfig | None = None,
              eps: float = EPS, fold_of=None) -> CrossFitResult:
    """k-fold T-learner: each fold is scored by arm models fit on the other folds.

    ``fold_of`` fixes the fold labels (0..k-1); by default they are drawn
    from ``config.seed``.
    """
    config = config or CrossFitConfig()
    if fold_of is None:
        fold_of = fold_assignment(dataset.n, config.folds, np.random.default_rng(config.seed))
    else:
        fold_of = np.asarray(fold_of, dtype=int)
        if fold_of.shape != (dataset.n,) or not np.isin(fold_of, range(config.folds)).all():
            raise ValueError("fold_of must label every row with a fold in 0..folds-1")
    x, y, t = dataset.features, dataset.outcome, dataset.treatment
    omega_hat = np.empty(dataset.n)
    mu1_hat = np.empty(dataset.n)
    training, omega_models, treated_models = [], [], []
    for k in range(config.folds):
        held = fold_of == k
        train = np.flatnonzero(~held)
        ctrl = train[t[train] == 0]
        trt = train[t[train] == 1]
        if len(ctrl) == 0 or len(trt) == 0:
            raise ValueError("insufficient arm data for cross-fitting")
        m0 = fit_logistic(x[ctrl], y[ctrl], config.learner, eps)
        m1 = fit_logistic(x[trt], y[trt], config.learner, eps)
        omega_hat[held] = m0.predict_proba(x[held], eps)
        mu1_hat[held] = m1.predict_proba(x[held], eps)
        training.append(train)
        omega_models.append(m0)
        treated_models.append(m1)
    nuisance = make_nuisance(omega_hat, mu1_hat - omega_hat, dataset, eps, fold_of=fold_of)
    return CrossFitResult(nuisance, fold_of, tuple(training), tuple(omega_models),
                          tuple(treated_models))


def cross_fit_nuisance(dataset: RctDataset, config: CrossFitConfig | None = None,
                       eps: float = EPS) -> NuisanceEstimates:
    return cross_fit(dataset, config, eps).nuisance


def noisy_oracle(omega_true, tau_true, variance: float, rng: np.random.Generator,
                 dataset: RctDataset | None = None, eps: float = EPS) -> NuisanceEstimates:
    """True nuisances plus N(0, variance) noise; omega clipped, tau left raw.

    With ``dataset`` the aggregates follow the treated-arm plug-in rule;
    without it they come from the noisy vectors themselves.
    """
    if variance < 0:
        raise ValueError("variance must be non-negative")
    omega = np.asarray(omega_true, dtype=float)
    tau = np.asarray(tau_true, dtype=float)
    sd = np.sqrt(variance)
    omega_hat = np.clip(omega + rng.normal(0.0, sd, len(omega)), eps, 1 - eps)
    tau_hat = tau + rng.normal(0.0, sd, len(tau))
    if dataset is not None:
        return make_nuisance(omega_hat, tau_hat, dataset, eps)
    mu0 = float(np.clip(omega_hat.mean(), eps, 1 - eps))
    tau_bar = float(tau_hat.mean())
    return NuisanceEstimates(omega_hat, tau_hat, mu0 + tau_bar, mu0, tau_bar,
                             indices=np.arange(len(omega)), full_length=True)
