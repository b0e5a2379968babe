"""Monte Carlo for the efficient wealth process, its goal hitting time and bankruptcy.

Every statistic reported here is a function of the scalar process

    phi(t) = 1.5 beta(t) + int_0^t theta dW,

which by the time change is a Brownian motion with drift 3/2 run on the clock
beta(t). The goal is reached when phi first reaches beta(T); wealth is
nonpositive exactly when phi is at or below the bankruptcy barrier.

Two schemes produce phi on a grid:

``exact_y``
    sums exact Gaussian increments of phi and maps phi to wealth in closed form.
``euler``
    runs Euler-Maruyama on the controlled wealth SDE with the feedback
    allocation and reads phi back from wealth. Only the component of dW along
    theta moves the wealth of an efficient portfolio, so the Brownian
    increment is drawn along theta/|theta|; for one stock this is the full
    Brownian motion.

Both schemes consume the same normal draws. Random numbers come from one
Philox generator per path keyed by (seed, path index), so results do not
depend on chunking or on the number of workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .analytics import goal_prob, reflection_hitting_prob
from .frontier import EfficientStrategy
from .market import AssumptionViolation, MarketModel, validate

SCHEMES = ("exact_y", "euler")
MAX_TOTAL_STEPS = 10_000_000
_CHUNK_BUDGET = 10_000_000  # path-steps held in memory per chunk
Z95 = 1.959963984540054

NEITHER, GOAL, BANKRUPTCY = 0, 1, 2
WHICH_FIRST = {NEITHER: "neither", GOAL: "goal", BANKRUPTCY: "bankruptcy"}


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 10_000
    n_steps: int = 1000  # per coefficient piece
    seed: int = 0
    scheme: str = "exact_y"
    bridge_correction: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be at least 1")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform steps inside each coefficient piece, aligned to the breakpoints."""

    times: np.ndarray
    dt: np.ndarray
    piece: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.dt)


def time_grid(model: MarketModel, n_steps: int) -> TimeGrid:
    total = n_steps * model.n_pieces
    if total > MAX_TOTAL_STEPS:
        raise ValueError(
            f"{n_steps} steps x {model.n_pieces} pieces exceeds the {MAX_TOTAL_STEPS} step guard"
        )
    times = [np.array([0.0])]
    for k in range(model.n_pieces):
        seg = np.linspace(model.grid[k], model.grid[k + 1], n_steps + 1)[1:]
        times.append(seg)
    times = np.concatenate(times)
    piece = np.repeat(np.arange(model.n_pieces), n_steps)
    return TimeGrid(times=times, dt=np.diff(times), piece=piece)


def path_noise(seed: int, path_ids, n_steps: int, uniforms: bool = True):
    """Normal (and optionally uniform) draws for the given paths, one generator each."""
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    z = np.empty((len(path_ids), n_steps))
    u = np.empty((len(path_ids), n_steps)) if uniforms else None
    for j, pid in enumerate(path_ids):
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, pid], dtype=np.uint64)))
        gen.standard_normal(out=z[j])
        if uniforms:
            gen.random(out=u[j])
    return z, u


def phi_increments(model: MarketModel, grid: TimeGrid, normals: np.ndarray) -> np.ndarray:
    """Increments 1.5 |theta|^2 dt + |theta| sqrt(dt) xi of phi."""
    th2 = model.theta_sq[grid.piece]
    return 1.5 * th2 * grid.dt + np.sqrt(th2 * grid.dt) * normals


def _phi_from_normals(model, grid, normals):
    phi = np.zeros((normals.shape[0], grid.n_steps + 1))
    np.cumsum(phi_increments(model, grid, normals), axis=1, out=phi[:, 1:])
    return phi


def simulate_phi(model: MarketModel, config: SimConfig):
    """Return (times, phi) with phi of shape (n_paths, n_steps + 1). Keeps every path in memory."""
    report = validate(model)
    if not report.ok:
        raise AssumptionViolation(report.summary())
    grid = time_grid(model, config.n_steps)
    normals, _ = path_noise(config.seed, np.arange(config.n_paths), grid.n_steps, uniforms=False)
    return grid.times, _phi_from_normals(model, grid, normals)


def first_passage_index(phi, barrier, step_var, uniforms=None, upward=True):
    """Index of the grid point at which each path is first declared to have crossed ``barrier``.

    A step counts as crossed when its right endpoint is on or beyond the
    barrier or, given ``uniforms``, when the Brownian bridge between the two
    endpoints would have touched it: u < exp(-2 d_i d_{i+1} / v) with d the
    distances to the barrier. Downward checks use 1 - u so one uniform per
    step serves both directions. Returns -1 where no crossing is detected.
    """
    phi = np.atleast_2d(phi)
    dist = (barrier - phi) if upward else (phi - barrier)
    at_start = dist[:, 0] <= 0
    left, right = dist[:, :-1], dist[:, 1:]
    event = right <= 0
    if uniforms is not None:
        uniforms = np.atleast_2d(uniforms)
        var = np.broadcast_to(np.asarray(step_var, dtype=float), left.shape[-1:])
        both_clear = (left > 0) & (right > 0) & (var > 0)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            expo = np.where(both_clear, -2.0 * left * right / np.where(var > 0, var, 1.0), -np.inf)
        p = np.exp(expo)
        draw = uniforms if upward else 1.0 - uniforms
        event |= draw < p
    idx = np.where(event.any(axis=1), event.argmax(axis=1) + 1, -1)
    idx[at_start] = 0
    return idx


def detect_hitting(phi, barrier, times, step_var=None, uniforms=None, upward=True):
    """Crossing time of a single discretised path, or None.

    The reported time is the right endpoint of the step in which the crossing
    is detected.
    """
    idx = int(first_passage_index(phi, barrier, step_var, uniforms, upward)[0])
    return None if idx < 0 else float(np.asarray(times)[idx])


@dataclass(frozen=True)
class PathOutcome:
    path_id: int
    terminal_wealth: float
    tau: Optional[float]
    bankruptcy_time: Optional[float]
    which_first: str


@dataclass(frozen=True)
class McReport:
    label: str
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    n_paths: int
    seed: int
    scheme: str
    reference: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def proportion(cls, label, hits, config, reference=None, **extra):
        hits = np.asarray(hits, dtype=bool)
        n = hits.size
        p = float(np.count_nonzero(hits)) / n
        se = math.sqrt(p * (1.0 - p) / n)
        return cls._make(label, p, se, n, config, reference, extra)

    @classmethod
    def _make(cls, label, est, se, n, config, reference, extra):
        half = Z95 * se if math.isfinite(se) else 0.0
        return cls(
            label=label, estimate=est, std_error=se,
            ci_low=est - half, ci_high=est + half,
            n_paths=n, seed=int(config.seed), scheme=config.scheme,
            reference=None if reference is None else float(reference),
            extra=dict(extra),
        )

    def deviation(self, se_floor: float = 0.0) -> float:
        """|estimate - reference| in standard errors; nan without a reference."""
        if self.reference is None:
            return math.nan
        se = max(self.std_error, se_floor)
        diff = abs(self.estimate - self.reference)
        if se == 0:
            return 0.0 if diff == 0 else math.inf
        return diff / se

    def to_dict(self) -> dict:
        return asdict(self)


def _mean_report(label, x, config, reference):
    n = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return McReport._make(label, mean, se, n, config, reference, {})


def _variance_report(label, x, config, reference):
    n = x.size
    if n < 2:
        return McReport._make(label, 0.0, math.nan, n, config, reference, {})
    dev = x - x.mean()
    m2 = float(np.mean(dev**2))
    m4 = float(np.mean(dev**4))
    var = float(np.var(x, ddof=1))
    se = math.sqrt(max(m4 - m2 * m2, 0.0) / n)
    return McReport._make(label, var, se, n, config, reference, {})


@dataclass
class SimulationResult:
    """Per-path outcomes of one run. Times are NaN where the event did not occur."""

    strategy: EfficientStrategy
    config: SimConfig
    times: np.ndarray
    tau: np.ndarray
    bankruptcy_time: np.ndarray
    terminal_wealth: np.ndarray
    which_first: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.tau.size

    @property
    def hit(self) -> np.ndarray:
        return ~np.isnan(self.tau)

    @property
    def bankrupt(self) -> np.ndarray:
        return ~np.isnan(self.bankruptcy_time)

    @property
    def stopped_terminal_wealth(self) -> np.ndarray:
        """Terminal wealth when the portfolio is moved to the bank account at the goal."""
        s = self.strategy
        out = self.terminal_wealth.copy()
        tau = self.tau[self.hit]
        # discounted target at tau, then risk-free growth to T
        grow = s.market.rate_integral_to_horizon(tau)
        out[self.hit] = s.discounted_target(tau) * np.exp(grow)
        return out

    def outcome(self, i: int) -> PathOutcome:
        def opt(v):
            return None if np.isnan(v) else float(v)

        return PathOutcome(
            path_id=i,
            terminal_wealth=float(self.terminal_wealth[i]),
            tau=opt(self.tau[i]),
            bankruptcy_time=opt(self.bankruptcy_time[i]),
            which_first=WHICH_FIRST[int(self.which_first[i])],
        )

    def goal_report(self) -> McReport:
        return McReport.proportion(
            "goal_probability", self.hit, self.config,
            reference=goal_prob(self.strategy.market.beta_T),
        )

    def moment_reports(self):
        s = self.strategy
        x = self.terminal_wealth
        return (
            _mean_report("terminal_mean", x, self.config, s.target),
            _variance_report("terminal_variance", x, self.config, s.min_variance()),
        )

    def stopped_report(self) -> McReport:
        s = self.strategy
        x = self.stopped_terminal_wealth
        q = np.quantile(x, [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99])
        return McReport.proportion(
            "stopped_reaches_target", x >= s.target * (1.0 - 1e-12), self.config,
            reference=goal_prob(s.market.beta_T),
            mean=float(x.mean()),
            std=float(x.std(ddof=1)) if x.size > 1 else math.nan,
            quantiles=dict(zip(["q01", "q05", "q25", "q50", "q75", "q95", "q99"], q.tolist())),
        )

    def bankruptcy_reports(self):
        """(bankrupt by T, bankrupt before goal, goal before bankruptcy, neither)."""
        s = self.strategy
        bc = s.barrier_constants()
        # bankruptcy is -phi rising through -c: drift -3/2 on the clock beta
        oracle = reflection_hitting_prob(-1.5, -bc.bankruptcy, bc.goal)
        return (
            McReport.proportion("bankruptcy_by_T", self.bankrupt, self.config, reference=oracle),
            McReport.proportion("bankruptcy_first", self.which_first == BANKRUPTCY, self.config),
            McReport.proportion("goal_first", self.which_first == GOAL, self.config),
            McReport.proportion("neither", self.which_first == NEITHER, self.config),
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["path_id", "tau", "bankruptcy_time", "terminal_wealth", "which_first"])
            for i in range(self.n_paths):
                o = self.outcome(i)
                writer.writerow([
                    o.path_id,
                    "" if o.tau is None else f"{o.tau:.12g}",
                    "" if o.bankruptcy_time is None else f"{o.bankruptcy_time:.12g}",
                    f"{o.terminal_wealth:.12g}",
                    o.which_first,
                ])


def _euler_paths(strategy, grid, normals, want_phi=True, keep_wealth=False):
    """Euler-Maruyama wealth under the feedback allocation.

    Returns (phi read back from wealth or None, terminal wealth, full wealth paths or None).
    """
    model = strategy.market
    n_paths = normals.shape[0]
    gamma = strategy.gamma
    disc = np.exp(-model.rate_integral_to_horizon(grid.times))

    # per-piece coefficients
    gains, directions = [], []
    for k in range(model.n_pieces):
        s = model.sigma_values[k]
        gains.append(np.linalg.solve(s @ s.T, model.excess_values[k]))
        th = model.theta_values[k]
        norm = math.sqrt(float(th @ th))
        if norm > 0:
            directions.append(th / norm)
        else:
            e = np.zeros_like(th)
            e[0] = 1.0
            directions.append(e)

    x = np.full(n_paths, float(strategy.x0))
    phi = np.zeros((n_paths, grid.n_steps + 1)) if want_phi else None
    wealth = np.empty((n_paths, grid.n_steps + 1)) if keep_wealth else None
    if keep_wealth:
        wealth[:, 0] = x
    for i in range(grid.n_steps):
        k = grid.piece[i]
        dt = grid.dt[i]
        r = model.rate_values[k]
        sigma = model.sigma_values[k]
        b = model.excess_values[k]
        pi = -np.outer(x - gamma * disc[i], gains[k])
        dw = np.outer(normals[:, i], directions[k]) * math.sqrt(dt)
        x = x + (r * x + pi @ b) * dt + np.einsum("pi,ij,pj->p", pi, sigma, dw)
        if want_phi:
            phi[:, i + 1] = strategy.phi_from_wealth(grid.times[i + 1], x)
        if keep_wealth:
            wealth[:, i + 1] = x
    return phi, x, wealth


def _run_chunk(strategy, config, grid, path_ids, barriers):
    model = strategy.market
    normals, uniforms = path_noise(
        config.seed, path_ids, grid.n_steps, uniforms=config.bridge_correction
    )
    if config.scheme == "exact_y":
        phi = _phi_from_normals(model, grid, normals)
        terminal = strategy.wealth_from_phi(model.horizon, phi[:, -1])
    else:
        phi, terminal, _ = _euler_paths(strategy, grid, normals)
    step_var = model.theta_sq[grid.piece] * grid.dt
    goal_idx = first_passage_index(phi, barriers.goal, step_var, uniforms, upward=True)
    bank_idx = first_passage_index(phi, barriers.bankruptcy, step_var, uniforms, upward=False)
    return goal_idx, bank_idx, terminal


def simulate(strategy: EfficientStrategy, config: SimConfig) -> SimulationResult:
    """Simulate ``config.n_paths`` efficient wealth paths and record goal/bankruptcy times."""
    model = strategy.market
    report = validate(model)
    if not report.ok:
        raise AssumptionViolation(report.summary())
    strategy.require_strict()
    barriers = strategy.barrier_constants()
    grid = time_grid(model, config.n_steps)

    chunk = max(1, _CHUNK_BUDGET // grid.n_steps)
    bounds = [(lo, min(lo + chunk, config.n_paths)) for lo in range(0, config.n_paths, chunk)]

    def work(lo_hi):
        return _run_chunk(strategy, config, grid, np.arange(*lo_hi), barriers)

    if config.n_jobs == 1 or len(bounds) == 1:
        parts = [work(b) for b in bounds]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            parts = list(pool.map(work, bounds))  # map preserves chunk order

    goal_idx = np.concatenate([p[0] for p in parts])
    bank_idx = np.concatenate([p[1] for p in parts])
    terminal = np.concatenate([p[2] for p in parts])

    times = grid.times
    tau = np.where(goal_idx >= 0, times[np.maximum(goal_idx, 0)], np.nan)
    bank_t = np.where(bank_idx >= 0, times[np.maximum(bank_idx, 0)], np.nan)

    big = np.iinfo(np.int64).max
    g = np.where(goal_idx >= 0, goal_idx, big)
    b = np.where(bank_idx >= 0, bank_idx, big)
    # same step: goal takes precedence
    which = np.full(goal_idx.shape, NEITHER, dtype=np.int8)
    which[(g <= b) & (g < big)] = GOAL
    which[(b < g)] = BANKRUPTCY

    return SimulationResult(
        strategy=strategy, config=config, times=times, tau=tau,
        bankruptcy_time=bank_t, terminal_wealth=terminal, which_first=which,
    )


def wealth_from_phi(strategy: EfficientStrategy, times, phi):
    return strategy.wealth_from_phi(times, phi)


def simulate_euler(strategy: EfficientStrategy, config: SimConfig):
    """Euler wealth paths on the full grid: returns (times, wealth) of shape (n_paths, n_steps + 1).

    Draws the same normals as the exact scheme for equal seeds.
    """
    grid = time_grid(strategy.market, config.n_steps)
    normals, _ = path_noise(config.seed, np.arange(config.n_paths), grid.n_steps, uniforms=False)
    _, _, wealth = _euler_paths(strategy, grid, normals, want_phi=False, keep_wealth=True)
    return grid.times, wealth


def mc_goal_prob(strategy: EfficientStrategy, config: SimConfig) -> McReport:
    return simulate(strategy, config).goal_report()


def mc_terminal_moments(strategy: EfficientStrategy, config: SimConfig):
    return simulate(strategy, config).moment_reports()


def simulate_stopped(strategy: EfficientStrategy, config: SimConfig) -> McReport:
    return simulate(strategy, config).stopped_report()


def mc_bankruptcy(strategy: EfficientStrategy, config: SimConfig):
    return simulate(strategy, config).bankruptcy_reports()
