"""Binary logistic regression by damped Newton/IRLS, BIC, and forward selection."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import ModelError, PredictError, SeparationWarning
from .tables import FeatureTable

COEF_CAP = 30.0  # |beta| bound applied when separation is detected (standardized inputs)
GRAD_TOL = 1e-8
MAX_ITER = 100
_P_EPS = 1e-15


@dataclass(frozen=True)
class FittedLogReg:
    intercept: float
    coefficients: dict[str, float]
    selected_order: tuple[str, ...]
    log_likelihood: float
    bic: float
    n_train: int
    converged: bool = True
    separated: bool = False

    def __post_init__(self) -> None:
        if tuple(self.coefficients) != self.selected_order:
            raise ModelError("coefficient keys must equal selected_order")


def _design(table: FeatureTable, features: list[str], *, for_fit: bool) -> np.ndarray:
    cols = [table.feature_index(f) for f in features]
    if cols and table.missing[:, cols].any():
        exc = ModelError if for_fit else PredictError
        raise exc("missing cells in model feature columns")
    x = np.ones((table.n_samples, len(cols) + 1))
    if cols:
        x[:, 1:] = table.values[:, cols]
    return x


def _log_likelihood(x: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    p = _sigmoid(x @ beta)
    p = np.clip(p, _P_EPS, 1.0 - _P_EPS)
    return float(y @ np.log(p) + (1 - y) @ np.log1p(-p))


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit(table: FeatureTable, features: list[str] | tuple[str, ...] = ()) -> FittedLogReg:
    """Maximum-likelihood fit with a logit link.

    Damped Newton steps guarantee a non-decreasing log-likelihood; the fit
    converges when the largest score-gradient component falls below 1e-8.
    Perfect separation is reported through SeparationWarning and the
    coefficients are capped at |beta| <= 30; a singular design raises.
    """
    features = list(features)
    y = table.labels.astype(float)
    if y.min() == y.max():
        raise ModelError("training data must contain both classes")
    x = _design(table, features, for_fit=True)
    beta = np.zeros(x.shape[1])
    ll = _log_likelihood(x, y, beta)
    converged = separated = False
    for _ in range(MAX_ITER):
        p = np.clip(_sigmoid(x @ beta), _P_EPS, 1.0 - _P_EPS)
        grad = x.T @ (y - p)
        if np.max(np.abs(grad)) < GRAD_TOL:
            converged = True
            break
        w = p * (1.0 - p)
        hess = x.T @ (x * w[:, None])
        try:
            step = sla.cho_solve(sla.cho_factor(hess), grad)
        except (sla.LinAlgError, ValueError) as exc:
            raise ModelError(f"singular design: {exc}") from None
        lam = 1.0
        while lam > 1e-8:
            cand = beta + lam * step
            ll_cand = _log_likelihood(x, y, cand)
            if ll_cand >= ll - 1e-10:
                beta, ll = cand, ll_cand
                break
            lam /= 2.0
        if np.max(np.abs(beta)) > COEF_CAP:
            separated = True
            beta = np.clip(beta, -COEF_CAP, COEF_CAP)
            ll = _log_likelihood(x, y, beta)
            warnings.warn("perfect separation detected; coefficients capped",
                          SeparationWarning)
            break
    k = 1 + len(features)
    n = table.n_samples
    return FittedLogReg(
        intercept=float(beta[0]),
        coefficients={f: float(b) for f, b in zip(features, beta[1:])},
        selected_order=tuple(features),
        log_likelihood=ll,
        bic=k * math.log(n) - 2.0 * ll,
        n_train=n,
        converged=converged,
        separated=separated,
    )


def predict_proba(model: FittedLogReg, table: FeatureTable) -> np.ndarray:
    """Per-row sigmoid(intercept + beta . x), clipped into the open interval (0,1)."""
    x = _design(table, list(model.selected_order), for_fit=False)
    beta = np.concatenate([[model.intercept], list(model.coefficients.values())])
    return np.clip(_sigmoid(x @ beta), _P_EPS, 1.0 - _P_EPS)


def forward_select(table: FeatureTable, candidates: list[str] | tuple[str, ...],
                   delta_bic_stop: float = 2.0) -> FittedLogReg:
    """Greedy forward selection under a BIC-improvement stop rule.

    Starting from the intercept-only model, each step fits every one-feature
    extension and adds the lowest-BIC candidate (exact ties broken by name);
    selection halts when the best improvement over the current model's BIC
    is <= delta_bic_stop or candidates are exhausted. Candidates whose fit
    fails are skipped with a warning.
    """
    remaining = list(dict.fromkeys(candidates))
    if not remaining:
        raise ModelError("forward selection needs at least one candidate")
    current = fit(table, [])
    while remaining:
        scored: list[tuple[float, str, FittedLogReg]] = []
        for name in remaining:
            try:
                trial = fit(table, list(current.selected_order) + [name])
            except ModelError as exc:
                warnings.warn(f"skipping candidate {name!r}: {exc}")
                continue
            scored.append((trial.bic, name, trial))
        if not scored:
            break
        scored.sort(key=lambda t: (t[0], t[1]))
        best_bic, best_name, best_model = scored[0]
        if current.bic - best_bic <= delta_bic_stop:
            break
        current = best_model
        remaining.remove(best_name)
    return current


def to_doc(model: FittedLogReg) -> dict:
    """Serializable document for a fitted model (versioned)."""
    return {
        "format": "latefuse-logreg",
        "version": 1,
        "intercept": model.intercept,
        "coefficients": dict(model.coefficients),
        "selected_order": list(model.selected_order),
        "log_likelihood": model.log_likelihood,
        "bic": model.bic,
        "n_train": model.n_train,
        "converged": model.converged,
        "separated": model.separated,
    }


def from_doc(doc: dict) -> FittedLogReg:
    if doc.get("format") != "latefuse-logreg" or doc.get("version") != 1:
        raise ModelError("unrecognized logistic model document")
    return FittedLogReg(
        intercept=float(doc["intercept"]),
        coefficients={k: float(v) for k, v in doc["coefficients"].items()},
        selected_order=tuple(doc["selected_order"]),
        log_likelihood=float(doc["log_likelihood"]),
        bic=float(doc["bic"]),
        n_train=int(doc["n_train"]),
        converged=bool(doc["converged"]),
        separated=bool(doc["separated"]),
    )
