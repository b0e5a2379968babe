"""Closed-form goal-achieving probability and its universal lower bound.

With beta = int_0^T |theta|^2, the probability that efficient wealth touches
the discounted target by T is ``f(sqrt(beta))`` where

    f(x) = N(x/2) + exp(3 x^2) (1 - N(5x/2)).

``f`` is evaluated as N(x/2) + 0.5 exp(-x^2/8) erfcx(5x / (2 sqrt 2)), which
never overflows; the literal form overflows near x = 15.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .market import AssumptionViolation, MarketModel
from .special import SQRT2, SQRT_2PI, erfc, erfcx, norm_cdf, norm_sf

__all__ = [
    "BoundConstants",
    "ProbabilityCurve",
    "bound_constants",
    "erfc",
    "erfcx",
    "f",
    "f_curve",
    "f_prime",
    "g",
    "goal_prob",
    "golden_section",
    "h",
    "horizon_scan",
    "minimize_f",
    "minimize_h",
    "norm_cdf",
    "reflection_hitting_prob",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
H_ARGMIN = 2.0 / math.sqrt(5.0)


def _out(x, value):
    return float(value) if np.ndim(x) == 0 else value


def f(x):
    """Goal-achieving probability as a function of sqrt(beta(T)); x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("f is defined for x >= 0")
    value = norm_cdf(x / 2.0) + 0.5 * np.exp(-x * x / 8.0) * erfcx(5.0 * x / (2.0 * SQRT2))
    return _out(x, value)


def f_prime(x):
    """Analytic derivative 6x e^{3x^2}(1 - N(5x/2)) - 2 e^{-x^2/8} / sqrt(2 pi)."""
    x = np.asarray(x, dtype=float)
    tail = 0.5 * np.exp(-x * x / 8.0) * erfcx(5.0 * x / (2.0 * SQRT2))
    return _out(x, 6.0 * x * tail - 2.0 * np.exp(-x * x / 8.0) / SQRT_2PI)


def g(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("g is defined for x >= 0")
    lead = (np.sqrt(16.0 + 25.0 * x * x) - 5.0 * x) / (4.0 * SQRT_2PI)
    return _out(x, norm_cdf(x / 2.0) + lead * np.exp(-x * x / 8.0))


def h(x):
    """N(x/2) + e^{-x^2/8} / (3 sqrt(2 pi) x), the value of f at any interior critical point."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("h is defined for x > 0")
    return _out(x, norm_cdf(x / 2.0) + np.exp(-x * x / 8.0) / (3.0 * SQRT_2PI * x))


def goal_prob(beta_T):
    """P(tau <= T) for an efficient wealth process whose market has beta(T) = ``beta_T``."""
    b = np.asarray(beta_T, dtype=float)
    if np.any(~(b > 0)):
        raise AssumptionViolation("goal probability needs beta(T) > 0")
    return _out(beta_T, f(np.sqrt(b)))


def reflection_hitting_prob(drift, level, horizon):
    """P(sup_{t <= horizon} (drift t + W(t)) >= level) for standard Brownian motion W.

    N((drift s - b)/sqrt s) + e^{2 drift b} N(-(b + drift s)/sqrt s), with the
    exponential term folded into erfcx when its normal argument is in the tail.
    """
    mu = np.asarray(drift, dtype=float)
    b = np.asarray(level, dtype=float)
    s = np.asarray(horizon, dtype=float)
    if np.any(b <= 0) or np.any(s <= 0):
        raise ValueError("level and horizon must be positive")
    root = np.sqrt(s)
    first = norm_cdf((mu * s - b) / root)
    a = (b + mu * s) / root
    # e^{2 mu b} N(-a) = 0.5 e^{-(mu s - b)^2 / (2 s)} erfcx(a / sqrt 2) for a >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        stable = 0.5 * np.exp(-((mu * s - b) ** 2) / (2.0 * s)) * erfcx(np.abs(a) / SQRT2)
        direct = np.exp(2.0 * mu * b) * norm_sf(a)
    second = np.where(a >= 0, stable, direct)
    out = np.clip(first + second, 0.0, 1.0)
    if np.ndim(drift) == 0 and np.ndim(level) == 0 and np.ndim(horizon) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class BoundConstants:
    lower_bound: float
    tail_bound: float
    h_argmin: float


def bound_constants() -> BoundConstants:
    """The universal lower bound on f, the bound valid for x >= 1, and argmin of h."""
    lower = norm_cdf(1.0 / math.sqrt(5.0)) + math.sqrt(10.0 / math.pi) * math.exp(-0.1) / 12.0
    tail = norm_cdf(0.5) + (math.sqrt(41.0) - 5.0) / 4.0 * math.exp(-0.125) / SQRT_2PI
    return BoundConstants(lower_bound=lower, tail_bound=tail, h_argmin=H_ARGMIN)


def golden_section(func, a: float, b: float, tol: float = 1e-10, max_iter: int = 500):
    """Minimise a unimodal ``func`` on [a, b]; returns (argmin, min value)."""
    a, b = min(a, b), max(a, b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = func(d)
    x = 0.5 * (a + b)
    candidates = [(func(x), x), (fc, c), (fd, d)]
    val, x = min(candidates)
    return x, val


def _grid_then_golden(func, lo: float, hi: float, npoints: int):
    xs = np.linspace(lo, hi, npoints)
    vals = func(xs)
    i = int(np.argmin(vals))
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, npoints - 1)]
    x, val = golden_section(lambda v: float(func(v)), left, right, tol=1e-12)
    if vals[i] < val:
        return float(xs[i]), float(vals[i])
    return x, val


def minimize_f(xmax: float = 10.0, npoints: int = 10_000):
    """Numerical minimum of f on [0, xmax]: grid search refined by golden section."""
    if xmax < 2:
        raise ValueError("xmax must be at least 2")
    if npoints < 1000:
        raise ValueError("npoints must be at least 1000")
    return _grid_then_golden(f, 0.0, xmax, npoints)


def minimize_h(lo: float = 1e-3, hi: float = 10.0, npoints: int = 10_000):
    return _grid_then_golden(h, lo, hi, npoints)


@dataclass(frozen=True)
class ProbabilityCurve:
    """Tabulated (abscissa, probability) pairs."""

    abscissa: np.ndarray
    values: np.ndarray
    label: str = "x"
    formula: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = np.asarray(self.abscissa, dtype=float)
        vs = np.asarray(self.values, dtype=float)
        if xs.shape != vs.shape or xs.ndim != 1:
            raise ValueError("abscissa and values must be 1-d arrays of equal length")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        if np.any((vs < 0) | (vs > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "abscissa", xs)
        object.__setattr__(self, "values", vs)

    def __len__(self):
        return len(self.abscissa)

    def points(self):
        return list(zip(self.abscissa.tolist(), self.values.tolist()))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["abscissa", "value"])
        for x, v in self.points():
            writer.writerow([f"{x:.12g}", f"{v:.12g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def f_curve(xmax: float = 3.0, npoints: int = 301) -> ProbabilityCurve:
    xs = np.linspace(0.0, xmax, npoints)
    return ProbabilityCurve(xs, f(xs), label="x", formula="f(x)")


def horizon_scan(model: MarketModel, horizons, extend: bool = False) -> ProbabilityCurve:
    """Goal probability as a function of the investment horizon.

    Horizons past the model's own horizon need ``extend=True``; the final
    coefficient values are then held constant beyond it.
    """
    horizons = np.asarray(horizons, dtype=float)
    if horizons.size == 0:
        raise ValueError("empty horizon grid")
    if np.any(horizons <= 0):
        raise ValueError("horizons must be positive")
    top = float(horizons.max())
    if top > model.horizon:
        if not extend:
            raise ValueError(
                f"horizon {top} exceeds the market horizon {model.horizon}; pass extend=True"
            )
        model = model.extended(top)
    betas = np.array([model.beta(float(t)) for t in horizons])
    return ProbabilityCurve(
        horizons, goal_prob(betas), label="T", formula="f(sqrt(beta(T)))",
        meta={"beta": betas},
    )
