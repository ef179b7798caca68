"""Average-treatment-effect estimators over a fitted outcome/propensity model.

Given Q-hat and g-hat, the package exposes the classical estimator family:

  psi_q      plug-in mean of Q(1, x) - Q(0, x)
  psi_aiptw  plug-in plus the inverse-propensity residual correction;
             solves the estimating equation mean(phi) = 0 by construction
  psi_tmle   one-step targeted update: a closed-form fluctuation epsilon
             moves Q along the clever covariate before plugging in
  psi_treg   plug-in over the perturbed outcome using the epsilon trained
             jointly with the network

All estimators expect pre-trimmed inputs: run `trim` on the propensity
scores first and feed every estimator the same retained rows, which is
what `apply_estimators` does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, NumericDomainError, ShapeError, UsageError
from .objectives import (
    h_values,
    select_observed,
    stationary_epsilon,
)

OVERLAP_ACCURACY_THRESHOLD = 0.90

TAG_Q = "Q"
TAG_AIPTW = "AIPTW"
TAG_TMLE = "TMLE"
TAG_TREG = "TREG"
ESTIMATOR_TAGS = (TAG_Q, TAG_AIPTW, TAG_TMLE, TAG_TREG)


@dataclass(frozen=True)
class Estimate:
    psi_hat: float
    estimator_tag: str
    n_used: int
    trim_bounds: tuple[float, float]


@dataclass(frozen=True)
class InfluenceValues:
    """Efficient influence curve values phi_i and their plain mean."""

    phi: np.ndarray
    mean_phi: float


@dataclass(frozen=True)
class TrimResult:
    kept: np.ndarray
    dropped_low: int
    dropped_high: int
    bounds: tuple[float, float]


@dataclass(frozen=True)
class EstimateReport:
    """One estimator's output plus the trimming diagnostics of its run."""

    estimator_tag: str
    psi_hat: float
    n_used: int
    trim_bounds: tuple[float, float]
    mean_phi: float
    dropped_low: int
    dropped_high: int

    def to_dict(self) -> dict:
        return {
            "estimator_tag": self.estimator_tag,
            "psi_hat": self.psi_hat,
            "n_used": self.n_used,
            "trim_bounds": list(self.trim_bounds),
            "mean_phi": self.mean_phi,
            "dropped_low": self.dropped_low,
            "dropped_high": self.dropped_high,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        return cls(
            estimator_tag=d["estimator_tag"],
            psi_hat=d["psi_hat"],
            n_used=d["n_used"],
            trim_bounds=tuple(d["trim_bounds"]),
            mean_phi=d["mean_phi"],
            dropped_low=d["dropped_low"],
            dropped_high=d["dropped_high"],
        )


def _arr(name: str, x) -> np.ndarray:
    out = np.asarray(x, dtype=np.float64)
    if out.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {out.shape}")
    return out


def _check_rows(n: int, context: str):
    if n == 0:
        raise EstimationError(f"{context}: no rows to estimate from")


def _check_g(g: np.ndarray):
    if ((g <= 0.0) | (g >= 1.0)).any():
        raise NumericDomainError("propensity values must lie strictly inside (0, 1)")


def _check_t(t: np.ndarray):
    if not np.isin(t, (0.0, 1.0)).all():
        raise NumericDomainError("t must contain only 0 and 1")


def _check_bounds(bounds) -> tuple[float, float]:
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (0.0 <= lo < hi <= 1.0):
        raise NumericDomainError(f"trim bounds must satisfy 0 <= low < high <= 1, got {bounds}")
    return lo, hi


def clever_covariate(t, g):
    """H(t, g) = t/g - (1-t)/(1-g); scalar in, scalar out."""
    g_arr = np.asarray(g, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.float64)
    _check_g(g_arr.reshape(-1))
    _check_t(t_arr.reshape(-1))
    out = h_values(t_arr, g_arr)
    return float(out) if out.ndim == 0 else out


def trim(g_values, bounds=(0.01, 0.99)) -> TrimResult:
    """Indices of rows whose propensity lies inside [low, high], inclusive."""
    g = _arr("g_values", g_values)
    if ((g < 0.0) | (g > 1.0)).any():
        raise NumericDomainError("g_values must lie in [0, 1]")
    lo, hi = _check_bounds(bounds)
    kept = np.flatnonzero((g >= lo) & (g <= hi))
    return TrimResult(
        kept=kept,
        dropped_low=int((g < lo).sum()),
        dropped_high=int((g > hi).sum()),
        bounds=(lo, hi),
    )


def overlap_flag(heldout_accuracy: float) -> bool:
    """True when treatment is too predictable: accuracy strictly above 0.90."""
    acc = float(heldout_accuracy)
    if not 0.0 <= acc <= 1.0:
        raise NumericDomainError(f"accuracy must be in [0, 1], got {acc}")
    return acc > OVERLAP_ACCURACY_THRESHOLD


def propensity_accuracy(g_values, t) -> float:
    """Share of rows where thresholding g at 0.5 reproduces t."""
    g = _arr("g_values", g_values)
    t = _arr("t", t)
    _check_t(t)
    if g.shape != t.shape:
        raise ShapeError(f"g {g.shape} and t {t.shape} must align")
    _check_rows(g.size, "propensity_accuracy")
    return float(np.mean((g > 0.5).astype(np.float64) == t))


def diff_in_means(t, y) -> float:
    """Unadjusted mean(y | t=1) - mean(y | t=0); the no-covariate baseline."""
    t = _arr("t", t)
    y = _arr("y", y)
    _check_t(t)
    if t.shape != y.shape:
        raise ShapeError("t and y must align")
    treated = t == 1.0
    if not treated.any() or treated.all():
        raise EstimationError("diff_in_means needs both treated and control rows")
    return float(y[treated].mean() - y[~treated].mean())


def influence_curve(q0, q1, g, t, y, psi: float) -> InfluenceValues:
    """phi_i = q1_i - q0_i + H(t_i, g_i) * (y_i - q_{t_i}) - psi."""
    q0 = _arr("q0", q0)
    q1 = _arr("q1", q1)
    g = _arr("g", g)
    t = _arr("t", t)
    y = _arr("y", y)
    n = {a.size for a in (q0, q1, g, t, y)}
    if len(n) != 1:
        raise ShapeError("q0, q1, g, t, y must all have the same length")
    _check_rows(q0.size, "influence_curve")
    _check_g(g)
    _check_t(t)
    q_at_t = select_observed(q0, q1, t)
    phi = q1 - q0 + h_values(t, g) * (y - q_at_t) - float(psi)
    return InfluenceValues(phi=phi, mean_phi=float(np.mean(phi)))


def _predictions(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-d, got shape {X.shape}")
    _check_rows(X.shape[0], "estimator input")
    q0 = _arr("q0", model.q0(X))
    q1 = _arr("q1", model.q1(X))
    g = _arr("g", model.g(X))
    _check_g(g)
    return q0, q1, g


def psi_q(model, X, trim_bounds=(0.0, 1.0)) -> Estimate:
    """Plug-in estimate: mean of q1(x) - q0(x) over the given rows."""
    q0, q1, _ = _predictions(model, X)
    psi = float(np.mean(q1 - q0))
    return Estimate(psi, TAG_Q, q0.size, _check_bounds(trim_bounds))


def psi_aiptw(model, X, t, y, trim_bounds=(0.0, 1.0)) -> tuple[Estimate, InfluenceValues]:
    """Augmented IPW: plug-in plus mean inverse-propensity residual.

    The estimate is the value that zeroes the empirical mean of the
    influence curve, so mean_phi is 0 up to rounding by construction.
    """
    q0, q1, g = _predictions(model, X)
    t = _arr("t", t)
    y = _arr("y", y)
    _check_t(t)
    contrib = q1 - q0 + h_values(t, g) * (y - select_observed(q0, q1, t))
    psi = float(np.mean(contrib))
    iv = influence_curve(q0, q1, g, t, y, psi)
    return Estimate(psi, TAG_AIPTW, q0.size, _check_bounds(trim_bounds)), iv


def psi_tmle(
    model, X, t, y, trim_bounds=(0.0, 1.0)
) -> tuple[Estimate, InfluenceValues, float]:
    """One-step targeted update with the closed-form fluctuation.

    epsilon = sum(H (y - q)) / sum(H^2) minimizes the squared perturbed
    residual exactly, the updated outcomes are q + epsilon * H, and the
    plug-in over them satisfies the estimating equation mean(phi) = 0 up
    to float rounding.  No iteration is needed: the fluctuation is linear
    in epsilon so one exact step lands on the solution.
    """
    q0, q1, g = _predictions(model, X)
    t = _arr("t", t)
    y = _arr("y", y)
    _check_t(t)
    q_at_t = select_observed(q0, q1, t)
    eps = stationary_epsilon(y, q_at_t, t, g)
    q1_star = q1 + eps / g
    q0_star = q0 - eps / (1.0 - g)
    psi = float(np.mean(q1_star - q0_star))
    iv = influence_curve(q0_star, q1_star, g, t, y, psi)
    return Estimate(psi, TAG_TMLE, q0.size, _check_bounds(trim_bounds)), iv, float(eps)


def psi_treg(model, X, t, y, trim_bounds=(0.0, 1.0)) -> tuple[Estimate, InfluenceValues]:
    """Plug-in over the perturbed outcomes at the jointly trained epsilon.

    Requires a model trained with the targeted-regularization term (its
    epsilon_hat is meaningless otherwise).  mean_phi is diagnostic: it is
    near zero exactly when training reached stationarity in epsilon on
    the rows being estimated.
    """
    if not model.treg:
        raise UsageError("psi_treg needs a model trained with beta > 0")
    q0, q1, g = _predictions(model, X)
    t = _arr("t", t)
    y = _arr("y", y)
    _check_t(t)
    eps = float(model.epsilon_hat)
    q1_star = q1 + eps / g
    q0_star = q0 - eps / (1.0 - g)
    psi = float(np.mean(q1_star - q0_star))
    iv = influence_curve(q0_star, q1_star, g, t, y, psi)
    return Estimate(psi, TAG_TREG, q0.size, _check_bounds(trim_bounds)), iv


def apply_estimators(
    model, X, t, y, bounds=(0.01, 0.99), estimators=None
) -> dict[str, EstimateReport]:
    """Trim once, then run the requested estimators on the retained rows.

    Returns {tag: EstimateReport}.  The default set is Q/AIPTW/TMLE, plus
    TREG when the model was trained with targeted regularization.
    """
    X = np.asarray(X, dtype=np.float64)
    t = _arr("t", t)
    y = _arr("y", y)
    if estimators is None:
        estimators = (TAG_Q, TAG_AIPTW, TAG_TMLE) + ((TAG_TREG,) if model.treg else ())
    unknown = set(estimators) - set(ESTIMATOR_TAGS)
    if unknown:
        raise UsageError(f"unknown estimator tags: {sorted(unknown)}")
    _check_rows(X.shape[0], "apply_estimators")
    g_all = model.g(X)
    tr = trim(g_all, bounds)
    if tr.kept.size == 0:
        raise EstimationError(
            f"trimming to {tr.bounds} removed every row "
            f"({tr.dropped_low} low, {tr.dropped_high} high)"
        )
    Xk, tk, yk = X[tr.kept], t[tr.kept], y[tr.kept]
    q0, q1, g = _predictions(model, Xk)
    reports: dict[str, EstimateReport] = {}

    def report(tag, psi, mean_phi):
        reports[tag] = EstimateReport(
            estimator_tag=tag,
            psi_hat=psi,
            n_used=int(tr.kept.size),
            trim_bounds=tr.bounds,
            mean_phi=mean_phi,
            dropped_low=tr.dropped_low,
            dropped_high=tr.dropped_high,
        )

    for tag in estimators:
        if tag == TAG_Q:
            est = psi_q(model, Xk, tr.bounds)
            iv = influence_curve(q0, q1, g, tk, yk, est.psi_hat)
            report(tag, est.psi_hat, iv.mean_phi)
        elif tag == TAG_AIPTW:
            est, iv = psi_aiptw(model, Xk, tk, yk, tr.bounds)
            report(tag, est.psi_hat, iv.mean_phi)
        elif tag == TAG_TMLE:
            est, iv, _ = psi_tmle(model, Xk, tk, yk, tr.bounds)
            report(tag, est.psi_hat, iv.mean_phi)
        elif tag == TAG_TREG:
            est, iv = psi_treg(model, Xk, tk, yk, tr.bounds)
            report(tag, est.psi_hat, iv.mean_phi)
    return reports
