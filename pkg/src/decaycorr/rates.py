"""
Decay laws: symbolic bound prediction, pointwise bound evaluation and fitting.

Rate models are sequences ``C * a_n``. :func:`predict_bound` composes a
modulus class with a diameter law and pairs the result with the tail-driven
term; :func:`fit_rate` classifies an empirical correlation series.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares, minimize_scalar
from scipy.stats import chi2 as chi2_dist

from .correlation import CorrelationSeries
from .errors import InsufficientDataError, UnsupportedCaseError, UsageError
from .observables import ExpLogPower as ExpLogPowerModulus
from .observables import Hoelder, Lipschitz, LogPoly, ModulusClass, modulus_bound
from .tower.laws import ExpTail, PolyTail, StretchedTail

TIE_TOLERANCE = 0.05
NOISE_FLOOR = 3.0
MIN_POINTS = 5


# --------------------------------------------------------------------------- #
# rate models
# --------------------------------------------------------------------------- #

def _n(n):
    return np.asarray(n, dtype=float)


@dataclass(frozen=True)
class Exponential:
    """``C * theta**n``."""

    theta: float
    C: float = 1.0

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise UsageError(f"Exponential needs theta in (0, 1), got {self.theta}")
        _check_C(self.C)

    def log_value(self, n):
        return math.log(self.C) + _n(n) * math.log(self.theta)

    @property
    def rate(self) -> float:
        """``-log theta``, the exponent in ``e^{-rate n}``."""
        return -math.log(self.theta)


@dataclass(frozen=True)
class StretchedExp:
    """``C * exp(-c n**eta)``."""

    c: float
    eta: float
    C: float = 1.0

    def __post_init__(self):
        if not self.c > 0 or not 0 < self.eta < 1:
            raise UsageError("StretchedExp needs c > 0 and eta in (0, 1)")
        _check_C(self.C)

    def log_value(self, n):
        return math.log(self.C) - self.c * _n(n) ** self.eta


@dataclass(frozen=True)
class Polynomial:
    """``C * n**(-p)`` (defined for ``n >= 1``)."""

    p: float
    C: float = 1.0

    def __post_init__(self):
        if not self.p > 0:
            raise UsageError("Polynomial needs p > 0")
        _check_C(self.C)

    def log_value(self, n):
        with np.errstate(divide="ignore"):
            return math.log(self.C) - self.p * np.log(_n(n))


@dataclass(frozen=True)
class LogPolynomial:
    """``C * (log n)**(-alpha)`` (defined for ``n >= 2``)."""

    alpha: float
    C: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise UsageError("LogPolynomial needs alpha > 0")
        _check_C(self.C)

    def log_value(self, n):
        with np.errstate(divide="ignore", invalid="ignore"):
            return math.log(self.C) - self.alpha * np.log(np.log(_n(n)))


@dataclass(frozen=True)
class ExpLogPower:
    """``C * exp(-c (log n)**alpha)`` (defined for ``n >= 1``)."""

    alpha: float
    c: float = 1.0
    C: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1 or not self.c > 0:
            raise UsageError("ExpLogPower needs alpha in (0, 1) and c > 0")
        _check_C(self.C)

    def log_value(self, n):
        with np.errstate(divide="ignore", invalid="ignore"):
            return math.log(self.C) - self.c * np.log(_n(n)) ** self.alpha


RateModel = (Exponential, StretchedExp, Polynomial, LogPolynomial, ExpLogPower)
MODEL_NAMES = {Exponential: "Exponential", StretchedExp: "StretchedExp", Polynomial: "Polynomial",
               LogPolynomial: "LogPolynomial", ExpLogPower: "ExpLogPower"}
_BY_NAME = {v: k for k, v in MODEL_NAMES.items()}
# slowest family first
_RANK = {LogPolynomial: 0, ExpLogPower: 1, Polynomial: 2, StretchedExp: 3, Exponential: 4}


def _check_C(C):
    if not (C > 0 and math.isfinite(C)):
        raise UsageError(f"multiplicative constant must be positive and finite, got {C}")


def model_name(model) -> str:
    return MODEL_NAMES[type(model)]


def evaluate(model, n) -> np.ndarray:
    """``C * a_n``."""
    return np.exp(model.log_value(n))


def model_to_dict(model) -> dict:
    out = {"model": model_name(model)}
    out.update({k: float(v) for k, v in vars(model).items()})
    return out


def model_from_dict(spec: dict):
    spec = dict(spec)
    name = spec.pop("model")
    if name not in _BY_NAME:
        raise UsageError(f"unknown rate model {name!r}")
    return _BY_NAME[name](**spec)


def _shape(model) -> tuple:
    """Parameters that fix the decay up to the constant, ordered so larger means faster."""
    if isinstance(model, Exponential):
        return (-model.theta,)
    if isinstance(model, StretchedExp):
        return (model.eta, model.c)
    if isinstance(model, Polynomial):
        return (model.p,)
    if isinstance(model, LogPolynomial):
        return (model.alpha,)
    return (model.alpha, model.c)


def slower(a, b):
    """The slower-decaying of two models; equal shapes are merged by adding constants."""
    ka = (_RANK[type(a)], _shape(a))
    kb = (_RANK[type(b)], _shape(b))
    if ka == kb:
        return replace(a, C=a.C + b.C)
    return a if ka < kb else b


# --------------------------------------------------------------------------- #
# symbolic prediction
# --------------------------------------------------------------------------- #

def compose_modulus(modulus, delta):
    """``R_class(delta_n)`` as a rate model.

    Hölder and Lipschitz compositions are exact including the constant. Log
    classes compose exactly when ``delta`` has unit constant; otherwise the
    constant only shifts lower-order terms and is dropped.
    """
    if not isinstance(modulus, ModulusClass):
        raise UsageError(f"not a modulus class: {modulus!r}")
    if isinstance(delta, (LogPolynomial, ExpLogPower)):
        raise UnsupportedCaseError(
            f"{model_name(delta)} diameter decay is not covered; supported diameter laws: "
            "Exponential, StretchedExp, Polynomial")
    if not isinstance(delta, RateModel):
        raise UsageError(f"not a rate model: {delta!r}")
    if isinstance(modulus, (Hoelder, Lipschitz)):
        a, k = (modulus.alpha, 1.0) if isinstance(modulus, Hoelder) else (1.0, modulus.L)
        C = k * delta.C ** a
        if isinstance(delta, Exponential):
            return Exponential(delta.theta ** a, C)
        if isinstance(delta, StretchedExp):
            return StretchedExp(a * delta.c, delta.eta, C)
        return Polynomial(a * delta.p, C)
    if isinstance(modulus, ExpLogPowerModulus):
        a = modulus.alpha
        if a >= 1:
            # exp(-|log eps|) = eps: Lipschitz with unit constant
            return compose_modulus(Lipschitz(1.0), delta)
        if isinstance(delta, Exponential):
            return StretchedExp(abs(math.log(delta.theta)) ** a, a)
        if isinstance(delta, StretchedExp):
            return StretchedExp(delta.c ** a, delta.eta * a)
        return ExpLogPower(a, delta.p ** a)
    # LogPoly
    a = modulus.alpha
    if isinstance(delta, Exponential):
        return Polynomial(a, abs(math.log(delta.theta)) ** (-a))
    if isinstance(delta, StretchedExp):
        return Polynomial(delta.eta * a, delta.c ** (-a))
    return LogPolynomial(a, delta.p ** (-a))


def tail_term(tail):
    """Representative of the tail-driven term ``u_n``.

    The guaranteed law keeps the family and exponent of the tail (``n**(1-alpha)``
    for polynomial tails); rates and constants that are only asserted to exist
    are represented by the tail's own values.
    """
    if isinstance(tail, ExpTail):
        return Exponential(tail.theta)
    if isinstance(tail, StretchedTail):
        return StretchedExp(tail.c, tail.eta)
    if isinstance(tail, PolyTail):
        return Polynomial(tail.alpha - 1.0)
    raise UsageError(f"not a tail law: {tail!r}")


def predict_bound(modulus, tail, delta_decay):
    """``(modulus term, u_n, dominant)`` for the two-term correlation bound."""
    term = compose_modulus(modulus, delta_decay)
    u = tail_term(tail)
    return term, u, slower(term, u)


def henon_inputs(theta: float):
    """Tail and diameter laws for the Hénon case: both geometric with ratio ``theta``."""
    return ExpTail(theta), Exponential(theta)


def solenoid_inputs(gamma: float):
    """Tail and diameter laws for the intermittent solenoid: ``n**(-1/gamma)`` (needs ``gamma < 1``)."""
    if not 0 < gamma < 1:
        raise UnsupportedCaseError("the solenoid bound needs 0 < gamma < 1")
    return PolyTail(1.0 / gamma), Polynomial(1.0 / gamma)


# --------------------------------------------------------------------------- #
# pointwise bound and check
# --------------------------------------------------------------------------- #

def bound_sequence(prefactor: float, modulus, delta_seq, u_seq) -> np.ndarray:
    """``prefactor * R(delta_n) + u_n``; entries where a log modulus meets ``delta >= 1`` are NaN."""
    d = np.asarray(delta_seq, dtype=float)
    u = np.asarray(u_seq, dtype=float)
    if d.shape != u.shape:
        raise UsageError("delta_seq and u_seq must have equal lengths")
    if np.any(d < 0):
        raise UsageError("diameters must be non-negative")
    out = np.full(d.shape, np.nan)
    ok = np.ones(d.shape, dtype=bool)
    if isinstance(modulus, (ExpLogPowerModulus, LogPoly)):
        ok = d < 1
    out[ok] = prefactor * np.asarray(modulus_bound(modulus, d[ok]), dtype=float) + u[ok]
    return out


@dataclass
class BoundCheck:
    passed: bool
    max_ratio: float
    ratios: np.ndarray
    n_violations: int
    n_skipped: int

    def to_text(self) -> str:
        verdict = "pass" if self.passed else "fail"
        return (f"bound check: {verdict}; max |C_n| / (slack*bound + 3se) = {self.max_ratio:.4g}; "
                f"violations {self.n_violations}; skipped {self.n_skipped}")


def check_bound(series: CorrelationSeries, bound, slack: float = 1.0) -> BoundCheck:
    """One-sided check ``|C_n| <= slack * bound_n + 3 se_n`` entrywise (NaN bounds are skipped)."""
    bound = np.asarray(bound, dtype=float)
    if bound.shape != series.estimates.shape:
        raise UsageError("bound and series must have equal lengths")
    if slack < 1:
        raise UsageError("slack must be >= 1")
    lim = slack * bound + NOISE_FLOOR * series.std_errors
    ok = np.isfinite(lim)
    mag = series.magnitude
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(ok, np.where(lim > 0, mag / lim, np.where(mag > 0, np.inf, 0.0)), np.nan)
    viol = ok & (mag > lim)
    max_ratio = float(np.nanmax(ratios)) if ok.any() else float("nan")
    return BoundCheck(not viol.any(), max_ratio, ratios, int(viol.sum()), int((~ok).sum()))


# --------------------------------------------------------------------------- #
# fitting
# --------------------------------------------------------------------------- #

@dataclass
class CandidateFit:
    name: str
    model: Optional[object]
    residual: float  # MSE in the candidate's own linearizing coordinates
    relative_residual: float  # RMS of data / fit - 1
    note: str = ""
    chi2: float = math.nan  # sum of (log y - log fit)**2 / (v + extra_variance) when errors exist
    extra_variance: float = 0.0


@dataclass
class FitResult:
    model: object
    window: tuple
    residual: float
    relative_residual: float
    competitors: dict
    n_used: int
    n_censored: int
    indistinguishable: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return model_name(self.model)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"selected: {self.name} {model_to_dict(self.model)}\n")
        buf.write(f"window: [{self.window[0]}, {self.window[1]}]; used {self.n_used}; "
                  f"censored {self.n_censored}\n")
        for name, c in sorted(self.competitors.items()):
            params = model_to_dict(c.model) if c.model is not None else {}
            buf.write(f"  {name}: relative residual {c.relative_residual:.6g}; "
                      f"transformed MSE {c.residual:.6g} {params} {c.note}\n".rstrip() + "\n")
        if self.indistinguishable:
            buf.write("indistinguishable on this window: " + ", ".join(self.indistinguishable) + "\n")
        return buf.getvalue()

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("candidate,selected,relative_residual,transformed_mse,parameters\n")
        for name, c in sorted(self.competitors.items()):
            params = ";".join(f"{k}={v!r}" for k, v in model_to_dict(c.model).items() if k != "model") \
                if c.model is not None else ""
            buf.write(f"{name},{int(name == self.name)},{c.relative_residual!r},{c.residual!r},{params}\n")
        return buf.getvalue()


def _wmean(v, w):
    return float(np.sum(w * v) / np.sum(w))


def _linear(x, z, w):
    """Weighted least squares line ``z = a + b x``; returns ``(a, b, weighted mse)``."""
    sw = np.sqrt(w)
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A * sw[:, None], z * sw, rcond=None)
    r = z - A @ coef
    return coef[0], coef[1], _wmean(r * r, w)


def _rel(model, n, y, w):
    """Weighted RMS relative error of the data against the fitted sequence, ``y / (C a_n) - 1``."""
    with np.errstate(over="ignore", invalid="ignore"):
        r = np.exp(np.log(y) - model.log_value(n)) - 1.0
        v = math.sqrt(_wmean(r * r, w))
    return v if math.isfinite(v) else math.inf


def _bad(name, note):
    return CandidateFit(name, None, math.inf, math.inf, note)


def _fit_exponential(n, y, w):
    a, b, mse = _linear(n, np.log(y), w)
    if not b < 0:
        return _bad("Exponential", "non-decaying slope")
    m = Exponential(math.exp(b), math.exp(a))
    return CandidateFit("Exponential", m, mse, _rel(m, n, y, w))


def _fit_polynomial(n, y, w):
    ok = n >= 1
    if ok.sum() < MIN_POINTS:
        return _bad("Polynomial", "needs n >= 1")
    a, b, mse = _linear(np.log(n[ok]), np.log(y[ok]), w[ok])
    if not b < 0:
        return _bad("Polynomial", "non-decaying slope")
    m = Polynomial(-b, math.exp(a))
    return CandidateFit("Polynomial", m, mse, _rel(m, n[ok], y[ok], w[ok]))


def _fit_logpoly(n, y, w):
    ok = n >= 2
    if ok.sum() < MIN_POINTS:
        return _bad("LogPolynomial", "needs n >= 2")
    a, b, mse = _linear(np.log(np.log(n[ok])), np.log(y[ok]), w[ok])
    if not b < 0:
        return _bad("LogPolynomial", "non-decaying slope")
    m = LogPolynomial(-b, math.exp(a))
    return CandidateFit("LogPolynomial", m, mse, _rel(m, n[ok], y[ok], w[ok]))


def _double_log_fit(x, logy, logC, w):
    """Regress ``log(-log(y / C))`` on ``x``; returns ``(log c, exponent, mse)``.

    ``log y`` with weight ``w`` maps to weight ``w v**2`` for ``log v``, ``v = log C - log y``.
    """
    v = logC - logy
    if np.any(v <= 0):
        return None
    return _linear(x, np.log(v), w * v * v)


def _fit_double_log(name, x, n, y, w, build, exponent_ok):
    """Shared fit for ``log y = log C - c * x**e`` families with ``x = n`` or ``log n``.

    ``C`` is profiled: for each trial constant the double-log regression gives
    ``(c, e)``, scored by the squared error of ``log y``. The best profile point
    seeds a joint least-squares refinement of the three parameters.
    """
    logy = np.log(y)
    top = float(logy.max())
    lx = np.log(x)

    def score(t):
        fit = _double_log_fit(lx, logy, top + math.exp(t), w)
        if fit is None:
            return math.inf
        lc, e, _ = fit
        pred = top + math.exp(t) - math.exp(lc) * x ** e
        return _wmean((pred - logy) ** 2, w)

    # early points give the starting constant; the profile search brackets around it
    grid = np.linspace(-12.0, 4.0, 65)
    vals = [score(t) for t in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    t_best = minimize_scalar(score, bounds=(lo, hi), method="bounded",
                             options={"xatol": 1e-12}).x if hi > lo else grid[i]
    fit = _double_log_fit(lx, logy, top + math.exp(t_best), w)
    if fit is None:
        return _bad(name, "double-log transform undefined")
    lc, e, _ = fit
    p0 = np.array([top + math.exp(t_best), lc, math.log(max(e, 1e-6))])

    sw = np.sqrt(w / np.mean(w))

    def resid(p):
        return sw * (p[0] - np.exp(p[1]) * x ** np.exp(p[2]) - logy)

    sol = least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    logC, lc, le = sol.x
    if max(abs(logC), abs(lc), abs(le)) > 700:
        return _bad(name, "refinement diverged")
    e = math.exp(le)
    if not exponent_ok(e):
        return _bad(name, f"fitted exponent {e:.4g} outside the family's range")
    try:
        m = build(math.exp(lc), e, math.exp(logC))
    except UsageError as err:
        return _bad(name, str(err))
    fit = _double_log_fit(lx, logy, logC, w)
    mse = fit[2] if fit is not None else math.inf
    return CandidateFit(name, m, mse, _rel(m, n, y, w))


def _fit_stretched(n, y, w):
    ok = n >= 1
    if ok.sum() < MIN_POINTS:
        return _bad("StretchedExp", "needs n >= 1")
    return _fit_double_log("StretchedExp", n[ok], n[ok], y[ok], w[ok],
                           lambda c, e, C: StretchedExp(c, e, C), lambda e: 0 < e < 1)


def _fit_explogpower(n, y, w):
    ok = n >= 3  # log n > 1 keeps the double log away from zero
    if ok.sum() < MIN_POINTS:
        return _bad("ExpLogPower", "needs n >= 3")
    return _fit_double_log("ExpLogPower", np.log(n[ok]), n[ok], y[ok], w[ok],
                           lambda c, e, C: ExpLogPower(e, c, C), lambda e: 0 < e < 1)


_FITTERS = {"Exponential": _fit_exponential, "Polynomial": _fit_polynomial,
            "LogPolynomial": _fit_logpoly, "StretchedExp": _fit_stretched,
            "ExpLogPower": _fit_explogpower}
ALL_CANDIDATES = tuple(_FITTERS)
N_PARAMS = {"Exponential": 2, "Polynomial": 2, "LogPolynomial": 2, "StretchedExp": 3, "ExpLogPower": 3}
DOMAIN_START = {"Exponential": 0, "Polynomial": 1, "LogPolynomial": 2, "StretchedExp": 1, "ExpLogPower": 3}


def _fit_extra_variance(name, n, y, v, max_iter: int = 50):
    """Fit ``name`` with weights ``1 / (v + s2)``, re-estimating ``s2`` until it settles."""
    dof = max(len(n) - N_PARAMS[name], 1)
    start = n >= DOMAIN_START[name]
    s2 = 0.0
    fit = None
    for _ in range(max_iter):
        w = 1.0 / (v + s2)
        fit = _FITTERS[name](n, y, w / np.mean(w))
        if fit.model is None:
            return fit, s2
        r2 = (np.log(y[start]) - fit.model.log_value(n[start])) ** 2
        vs = v[start]

        def excess(t):
            return float(np.sum(r2 / (vs + t))) - dof

        if excess(0.0) <= 0:
            new = 0.0
        else:
            hi = max(float(np.max(r2)), 1e-300)
            while excess(hi) > 0:
                hi *= 2
            new = brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-12)
        if abs(new - s2) <= 1e-9 * max(new, 1e-300) or new == s2:
            s2 = new
            break
        s2 = new
    return fit, s2


def series_from_values(n, values, std_errors=None, estimator_kind="time_average") -> CorrelationSeries:
    """Wrap a plain sequence as a series (zero standard errors by default)."""
    values = np.asarray(values, dtype=float)
    se = np.zeros_like(values) if std_errors is None else std_errors
    return CorrelationSeries(n, values, se, estimator_kind, 0)


def fit_rate(series: CorrelationSeries, window=None, candidates: Sequence = ALL_CANDIDATES) -> FitResult:
    """Fit each candidate family to ``|C_n|`` on ``window`` and select the best.

    Entries with ``|C_n| <= 3 se_n`` (or zero) are censored. When every kept
    entry has a positive standard error, point ``i`` carries the weight
    ``1 / (v_i + s2)`` in both the fit and the comparison, where
    ``v_i = (se_i / y_i)**2`` is the sampling variance of ``log y_i`` and ``s2``
    is the candidate's extra variance (Paule-Mandel: the value giving a
    chi-square of one per degree of freedom, zero when the noise explains the
    residuals).
    Candidates are compared by the weighted RMS relative error of the fitted
    sequence; all within 5% of the best are indistinguishable, and so is a
    simpler candidate whose chi-square exceeds the best one's by less than the
    95% likelihood-ratio threshold. Among indistinguishable candidates the one
    with the fewest parameters is selected.
    """
    n_all = series.n_values
    if window is None:
        window = (int(n_all.min()), int(n_all.max()))
    n_min, n_max = int(window[0]), int(window[1])
    if n_min > n_max:
        raise UsageError("empty window")
    names = [c if isinstance(c, str) else MODEL_NAMES.get(c, str(c)) for c in candidates]
    unknown = [c for c in names if c not in _FITTERS]
    if unknown:
        raise UsageError(f"unknown candidates {unknown}; choose from {list(_FITTERS)}")
    sel = (n_all >= n_min) & (n_all <= n_max)
    n = n_all[sel].astype(float)
    y = series.magnitude[sel]
    se = series.std_errors[sel]
    keep = (y > NOISE_FLOOR * se) & (y > 0)
    n, y, se = n[keep], y[keep], se[keep]
    censored = int((~keep).sum())
    if len(n) < MIN_POINTS:
        raise InsufficientDataError(
            f"{len(n)} usable points in [{n_min}, {n_max}] after censoring {censored} "
            f"below {NOISE_FLOOR:g} standard errors; need {MIN_POINTS}")
    weighted = bool(np.all(se > 0))
    v = (se / y) ** 2 if weighted else None  # variance of log y
    fits = {}
    for name in names:
        if weighted:
            fits[name], extra = _fit_extra_variance(name, n, y, v)
        else:
            fits[name], extra = _FITTERS[name](n, y, np.ones_like(y)), 0.0
        fits[name].extra_variance = extra
    lowest = min(fits.values(), key=lambda f: (f.relative_residual, names.index(f.name)))
    if lowest.model is None:
        raise InsufficientDataError("no candidate produced a decaying fit on this window")
    def chi2(f, n_from, extra):
        on = n >= n_from
        r = np.log(y[on]) - f.model.log_value(n[on])
        return float(np.sum(r * r / (v[on] + extra)))

    if weighted:
        for f in fits.values():
            if f.model is not None:
                f.chi2 = chi2(f, DOMAIN_START[f.name], f.extra_variance)
    tol = TIE_TOLERANCE * lowest.relative_residual
    close = [f for f in fits.values()
             if f.model is not None and f.relative_residual - lowest.relative_residual <= tol]
    if weighted:
        # extra parameters must buy a significant drop in chi-square (likelihood ratio at 95%),
        # compared on the points both candidates are defined on
        for f in fits.values():
            dk = N_PARAMS[lowest.name] - N_PARAMS[f.name] if f.model is not None else 0
            if dk > 0 and f not in close:
                start = max(DOMAIN_START[f.name], DOMAIN_START[lowest.name])
                e = lowest.extra_variance
                if chi2(f, start, e) - chi2(lowest, start, e) <= chi2_dist.ppf(0.95, dk):
                    close.append(f)
    best = min(close, key=lambda f: (N_PARAMS[f.name], f.relative_residual, names.index(f.name)))
    ties = [f.name for f in close if f is not best]
    return FitResult(best.model, (n_min, n_max), best.residual, best.relative_residual, fits,
                     len(n), censored, ties)
