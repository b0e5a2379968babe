"""Deterministic market: bank account plus m stocks with piecewise-constant coefficients.

Piecewise-constant curves make every time integral used downstream (the
accumulated interest rate and the accumulated squared market price of risk)
an exact finite sum. Smooth coefficient functions are handled by sampling
them on a fine grid, which is an approximation the caller controls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_DELTA = 1e-8
MAX_CONDITION = 1e12


class AssumptionViolation(ValueError):
    """Raised when an operation needs ellipticity or a nonzero price of risk."""


@dataclass(frozen=True)
class CoefficientCurve:
    """Right-continuous step function on ``[breakpoints[0], breakpoints[-1]]``.

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``; the last
    interval is closed at the horizon.
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) < 2:
            raise ValueError("a curve needs at least two breakpoints")
        if len(vals) != len(bp) - 1:
            raise ValueError(
                f"{len(bp)} breakpoints need {len(bp) - 1} values, got {len(vals)}"
            )
        if bp[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, horizon: float) -> "CoefficientCurve":
        return cls((0.0, horizon), (value,))

    @classmethod
    def coerce(cls, value, horizon: float) -> "CoefficientCurve":
        """Build from a scalar shorthand or a ``{breakpoints, values}`` mapping."""
        if isinstance(value, CoefficientCurve):
            return value
        if isinstance(value, (int, float)):
            return cls.constant(float(value), horizon)
        if isinstance(value, dict):
            return cls(tuple(value["breakpoints"]), tuple(value["values"]))
        raise TypeError(f"cannot build a coefficient curve from {value!r}")

    @property
    def horizon(self) -> float:
        return self.breakpoints[-1]

    def __call__(self, t: float) -> float:
        if t < 0.0 or t > self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[min(k, len(self.values) - 1)]

    def on_grid(self, grid: Sequence[float]) -> np.ndarray:
        """Values on each interval of a refinement ``grid`` of this curve's breakpoints."""
        grid = np.asarray(grid, dtype=float)
        k = np.searchsorted(self.breakpoints, grid[:-1], side="right") - 1
        return np.asarray(self.values)[np.minimum(k, len(self.values) - 1)]

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}


def common_refinement(curves: Sequence[CoefficientCurve]) -> np.ndarray:
    horizons = {c.horizon for c in curves}
    if len(horizons) != 1:
        raise ValueError(f"curves end at different horizons: {sorted(horizons)}")
    return np.unique(np.concatenate([np.asarray(c.breakpoints) for c in curves]))


@dataclass(frozen=True)
class PieceReport:
    start: float
    end: float
    min_eigenvalue: float
    condition_number: float


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking uniform ellipticity (A1) and a nonzero, finite price of risk (A2)."""

    ellipticity_ok: bool
    price_of_risk_ok: bool
    beta_T: float
    delta: float
    pieces: tuple
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return self.ellipticity_ok and self.price_of_risk_ok

    def summary(self) -> str:
        lines = [
            f"A1 (sigma sigma' >= {self.delta:g} I): {'pass' if self.ellipticity_ok else 'FAIL'}",
            f"A2 (0 < beta(T) < inf): {'pass' if self.price_of_risk_ok else 'FAIL'}"
            f" (beta(T) = {self.beta_T:.12g})",
        ]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Bank account with rate r(t) and m stocks with appreciation mu_i(t), volatility sigma_ij(t).

    All coefficient curves are merged onto their common refinement at
    construction; the derived arrays below are indexed by piece.
    """

    horizon: float
    rate: CoefficientCurve
    appreciation: tuple
    volatility: tuple
    delta: float = DEFAULT_DELTA

    grid: np.ndarray = field(init=False, repr=False)
    rate_values: np.ndarray = field(init=False, repr=False)
    mu_values: np.ndarray = field(init=False, repr=False)
    sigma_values: np.ndarray = field(init=False, repr=False)
    excess_values: np.ndarray = field(init=False, repr=False)
    theta_values: np.ndarray = field(init=False, repr=False)
    theta_sq: np.ndarray = field(init=False, repr=False)
    min_eigenvalues: np.ndarray = field(init=False, repr=False)
    condition_numbers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        horizon = float(self.horizon)
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        rate = CoefficientCurve.coerce(self.rate, horizon)
        mu = tuple(CoefficientCurve.coerce(c, horizon) for c in self.appreciation)
        m = len(mu)
        if m == 0:
            raise ValueError("need at least one stock")
        sigma = tuple(
            tuple(CoefficientCurve.coerce(c, horizon) for c in row)
            for row in self.volatility
        )
        if len(sigma) != m or any(len(row) != m for row in sigma):
            raise ValueError(f"volatility must be a {m}x{m} matrix of curves")
        curves = [rate, *mu, *(c for row in sigma for c in row)]
        if any(not math.isclose(c.horizon, horizon) for c in curves):
            raise ValueError("every coefficient curve must end at the horizon")
        grid = common_refinement(
            [CoefficientCurve(c.breakpoints[:-1] + (horizon,), c.values) for c in curves]
        )

        r_vals = rate.on_grid(grid)
        if np.any(r_vals < 0):
            raise ValueError("interest rate must be nonnegative")
        mu_vals = np.stack([c.on_grid(grid) for c in mu], axis=1)
        sig_vals = np.stack(
            [np.stack([c.on_grid(grid) for c in row], axis=1) for row in sigma], axis=1
        )
        excess = mu_vals - r_vals[:, None]

        n_pieces = len(grid) - 1
        theta = np.full((n_pieces, m), np.nan)
        min_eig = np.empty(n_pieces)
        cond = np.empty(n_pieces)
        for k in range(n_pieces):
            s = sig_vals[k]
            min_eig[k] = np.linalg.eigvalsh(s @ s.T).min()
            cond[k] = np.linalg.cond(s)
            if np.isfinite(cond[k]) and cond[k] <= MAX_CONDITION:
                # theta sigma' = B  <=>  sigma theta' = B'
                theta[k] = np.linalg.solve(s, excess[k])

        set_ = object.__setattr__
        set_(self, "horizon", horizon)
        set_(self, "rate", rate)
        set_(self, "appreciation", mu)
        set_(self, "volatility", sigma)
        set_(self, "grid", grid)
        set_(self, "rate_values", r_vals)
        set_(self, "mu_values", mu_vals)
        set_(self, "sigma_values", sig_vals)
        set_(self, "excess_values", excess)
        set_(self, "theta_values", theta)
        set_(self, "theta_sq", np.sum(theta * theta, axis=1))
        set_(self, "min_eigenvalues", min_eig)
        set_(self, "condition_numbers", cond)
        for arr in (grid, r_vals, mu_vals, sig_vals, excess, theta, min_eig, cond):
            arr.setflags(write=False)
        self.theta_sq.setflags(write=False)

        # exact cumulative integrals at the breakpoints
        widths = np.diff(grid)
        set_(self, "_beta_cum", np.concatenate([[0.0], np.cumsum(self.theta_sq * widths)]))
        set_(self, "_rate_cum", np.concatenate([[0.0], np.cumsum(r_vals * widths)]))

    # construction helpers

    @classmethod
    def constant(cls, rate: float, mu, sigma, horizon: float, delta: float = DEFAULT_DELTA):
        """Market with constant coefficients; ``mu`` and ``sigma`` may be scalars (m=1)."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls(
            horizon=horizon,
            rate=rate,
            appreciation=tuple(float(v) for v in mu),
            volatility=tuple(tuple(float(v) for v in row) for row in sigma),
            delta=delta,
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "MarketModel":
        horizon = float(doc["horizon"])
        stocks = doc["stocks"]
        return cls(
            horizon=horizon,
            rate=doc["rate"],
            appreciation=tuple(s["mu"] for s in stocks),
            volatility=tuple(tuple(s["sigma_row"]) for s in stocks),
            delta=float(doc.get("delta", DEFAULT_DELTA)),
        )

    @classmethod
    def from_json(cls, path) -> "MarketModel":
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "rate": self.rate.to_dict(),
            "stocks": [
                {"mu": mu.to_dict(), "sigma_row": [c.to_dict() for c in row]}
                for mu, row in zip(self.appreciation, self.volatility)
            ],
            "delta": self.delta,
        }

    def extended(self, horizon: float) -> "MarketModel":
        """Same market with the final coefficient values held out to a longer horizon."""
        if horizon <= self.horizon:
            return self

        def ext(c):
            return CoefficientCurve(c.breakpoints[:-1] + (horizon,), c.values)

        return MarketModel(
            horizon=horizon,
            rate=ext(self.rate),
            appreciation=tuple(ext(c) for c in self.appreciation),
            volatility=tuple(tuple(ext(c) for c in row) for row in self.volatility),
            delta=self.delta,
        )

    def truncated(self, horizon: float) -> "MarketModel":
        """Same market restricted to [0, horizon]."""
        if not 0 < horizon <= self.horizon:
            raise ValueError(f"horizon {horizon} outside (0, {self.horizon}]")

        def cut(c):
            bp = [b for b in c.breakpoints if b < horizon]
            return CoefficientCurve(tuple(bp) + (horizon,), c.values[: len(bp)])

        return MarketModel(
            horizon=horizon,
            rate=cut(self.rate),
            appreciation=tuple(cut(c) for c in self.appreciation),
            volatility=tuple(tuple(cut(c) for c in row) for row in self.volatility),
            delta=self.delta,
        )

    # derived quantities

    @property
    def n_stocks(self) -> int:
        return len(self.appreciation)

    @property
    def n_pieces(self) -> int:
        return len(self.grid) - 1

    def piece_index(self, t: float) -> int:
        if t < 0.0 or t > self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.grid, t, side="right")) - 1
        return min(k, self.n_pieces - 1)

    def piece_is_elliptic(self, k: int) -> bool:
        return bool(
            self.min_eigenvalues[k] >= self.delta
            and self.condition_numbers[k] <= MAX_CONDITION
        )

    def _require_elliptic(self, k: int):
        if not self.piece_is_elliptic(k):
            raise AssumptionViolation(
                f"ellipticity fails on [{self.grid[k]:g}, {self.grid[k + 1]:g}]: "
                f"min eigenvalue {self.min_eigenvalues[k]:.3g}, "
                f"condition number {self.condition_numbers[k]:.3g}"
            )

    def theta_at(self, t: float) -> np.ndarray:
        """Market price of risk B(t) (sigma(t)')^{-1} on the piece containing t."""
        k = self.piece_index(t)
        self._require_elliptic(k)
        return self.theta_values[k].copy()

    def _cumulative(self, cum, values, t):
        k = self.piece_index(t)
        return float(cum[k] + values[k] * (t - self.grid[k]))

    def beta(self, t: float) -> float:
        """Accumulated squared price of risk, the integral of |theta|^2 over [0, t]."""
        k = self.piece_index(t)
        for j in range(k + 1):
            self._require_elliptic(j)
        return self._cumulative(self._beta_cum, self.theta_sq, t)

    @property
    def beta_T(self) -> float:
        return self.beta(self.horizon)

    def rate_integral(self, s: float, t: float) -> float:
        """Integral of r over [s, t]."""
        if s > t:
            raise ValueError(f"rate_integral needs s <= t, got s={s}, t={t}")
        return self._cumulative(self._rate_cum, self.rate_values, t) - self._cumulative(
            self._rate_cum, self.rate_values, s
        )

    def rate_integral_to_horizon(self, t) -> np.ndarray:
        """Vectorised integral of r over [t, T] for an array of times."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.grid, t, side="right") - 1, 0, self.n_pieces - 1)
        upto = self._rate_cum[k] + self.rate_values[k] * (t - self.grid[k])
        return self._rate_cum[-1] - upto


def validate(model: MarketModel) -> ValidationReport:
    """Check A1 on every piece and A2 on the whole horizon. Never raises."""
    pieces = []
    violations = []
    for k in range(model.n_pieces):
        pieces.append(
            PieceReport(
                float(model.grid[k]),
                float(model.grid[k + 1]),
                float(model.min_eigenvalues[k]),
                float(model.condition_numbers[k]),
            )
        )
        if not model.piece_is_elliptic(k):
            violations.append(
                f"A1 violated on [{model.grid[k]:g}, {model.grid[k + 1]:g}]: "
                f"min eigenvalue {model.min_eigenvalues[k]:.6g} (delta {model.delta:g}), "
                f"condition number {model.condition_numbers[k]:.3g}"
            )
    a1 = not violations
    beta_T = float(model._beta_cum[-1]) if a1 else float("nan")
    a2 = a1 and 0.0 < beta_T < math.inf
    if a1 and not a2:
        violations.append(f"A2 violated: beta(T) = {beta_T:.12g}")
    return ValidationReport(
        ellipticity_ok=a1,
        price_of_risk_ok=a2,
        beta_T=beta_T,
        delta=model.delta,
        pieces=tuple(pieces),
        violations=tuple(violations),
    )


def theta_at(model: MarketModel, t: float) -> np.ndarray:
    return model.theta_at(t)


def beta(model: MarketModel, t: float) -> float:
    return model.beta(t)


def rate_integral(model: MarketModel, s: float, t: float) -> float:
    return model.rate_integral(s, t)


def reference_market(theta: float = 0.4, horizon: float = 1.0) -> MarketModel:
    """Single stock with r=0.06, sigma=0.15 and mu chosen so the price of risk is ``theta``.

    The default gives mu=0.12 and beta(T)=0.16.
    """
    r, sigma = 0.06, 0.15
    return MarketModel.constant(r, r + sigma * theta, sigma, horizon)
