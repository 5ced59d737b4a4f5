"""SEIR epidemic models on weighted graphs.

Two simulators share one output type.  ``simulate_ode_seir`` treats each
node as a well-mixed population and integrates the deterministic
compartment system with classical fixed-step fourth-order Runge-Kutta.
Populations couple through the force of infection
``beta * sum_j w(j, i) * I_j / N_j``, optionally including an implicit
unit self-weight per node so a seeded population can sustain its own
outbreak.  ``simulate_agent_seir`` treats each node as one person and
runs a discrete daily chain: a susceptible node is exposed by each
infectious neighbor independently with probability ``min(1, beta * w)``,
an exposed node becomes infectious with probability ``sigma`` per day,
an infectious node is removed with probability ``gamma`` per day, and
all transitions within a day are resolved synchronously from the
previous day's states.

Determinism contract for the agent model: one uniform variate is drawn
for every node on every day, in node order, regardless of state.  The
draw count therefore never depends on the trajectory, and a fixed seed
replays the identical run on any machine.  Ensembles derive one
independent child stream per trial from the master seed and merge
results in trial-index order, so the thread count cannot change any
output bit.

Agent curves record the post-update state of each simulated day (times
1..T).  The pre-update seeding state is not a row of the curve, so peak
statistics describe the epidemic's own course rather than the injected
initial infections.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy import sparse

from .graphs import Graph

_INIT_MODES = ("explicit", "cluster-seed", "random-fraction")
_NEG_TOL = 1e-9


class EpidemicError(RuntimeError):
    """Raised when a simulation or calibration cannot complete."""


@dataclass(frozen=True)
class OdeSeirParams:
    """Rates and integration controls for the population model.

    ``beta`` is the transmission rate per unit time per unit edge
    weight, ``sigma`` the E to I rate per day, ``gamma`` the I to R rate
    per day.  ``dt`` is the fixed integration step in days and is capped
    at 0.5 as a stability guard.  With ``self_mixing`` every node gets
    an implicit unit self-weight in the force-of-infection sum only; the
    edge weights themselves are untouched.
    """

    beta: float
    sigma: float = 0.4
    gamma: float = 0.2
    dt: float = 0.05
    horizon: float = 365.0
    self_mixing: bool = True

    def __post_init__(self):
        if not self.beta >= 0.0:
            raise ValueError("beta must be non-negative")
        if not (self.sigma > 0.0 and self.gamma > 0.0):
            raise ValueError("sigma and gamma must be positive rates")
        if not 0.0 < self.dt <= 0.5:
            raise ValueError("dt must lie in (0, 0.5]")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class AgentSeirParams:
    """Daily probabilities and run controls for the per-person model.

    ``beta`` scales the per-edge per-day transmission probability
    ``min(1, beta * w)``; ``sigma`` and ``gamma`` are the daily E to I
    and I to R probabilities.  ``seed`` is required: every run is fully
    reproducible from it.  With ``stop_at_extinction`` the run ends as
    soon as no exposed or infectious node remains.
    """

    beta: float
    sigma: float = 0.4
    gamma: float = 0.2
    horizon: int = 1000
    seed: int | np.random.SeedSequence | None = None
    stop_at_extinction: bool = True

    def __post_init__(self):
        if not self.beta >= 0.0:
            raise ValueError("beta must be non-negative")
        if not (0.0 < self.sigma <= 1.0 and 0.0 < self.gamma <= 1.0):
            raise ValueError("sigma and gamma must be daily probabilities in (0, 1]")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive whole number of days")
        if self.seed is None:
            raise ValueError("seed is required; runs must be reproducible")


@dataclass(frozen=True)
class InitialCondition:
    """Where the epidemic starts.

    ``explicit`` and ``cluster-seed`` carry the seeded node set directly
    (``cluster-seed`` names the common case of seeding one community's
    node set).  ``random-fraction`` selects ``round(fraction * n)``
    distinct nodes uniformly at random from ``seed``.  For the
    population model each seeded node starts with ``infectious_fraction``
    of its population infectious; for the agent model each seeded node
    is one infectious person and ``infectious_fraction`` is ignored.
    """

    mode: str = "explicit"
    nodes: tuple[int, ...] | None = None
    fraction: float = 0.0
    infectious_fraction: float = 1.0
    seed: int | np.random.SeedSequence | None = None

    def __post_init__(self):
        if self.mode not in _INIT_MODES:
            raise ValueError(f"mode must be one of {_INIT_MODES}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        if not 0.0 <= self.infectious_fraction <= 1.0:
            raise ValueError("infectious_fraction must lie in [0, 1]")
        if self.mode == "random-fraction":
            if self.seed is None:
                raise ValueError("random-fraction mode requires a seed")
        elif self.nodes is None:
            raise ValueError(f"{self.mode} mode requires an explicit node set")
        if self.nodes is not None:
            object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))


def resolve_initial_nodes(graph: Graph, init: InitialCondition) -> np.ndarray:
    """Return the seeded node ids as a sorted unique int64 array."""
    n = graph.node_count
    if init.mode == "random-fraction":
        count = int(round(init.fraction * n))
        rng = np.random.default_rng(init.seed)
        nodes = np.sort(rng.choice(n, size=count, replace=False).astype(np.int64))
        return nodes
    nodes = np.unique(np.asarray(init.nodes, dtype=np.int64))
    if nodes.size and (nodes[0] < 0 or nodes[-1] >= n):
        raise ValueError("seeded node ids must lie in [0, node_count)")
    return nodes


@dataclass
class EpidemicCurve:
    """Aggregate S, E, I, R fractions over time.

    ``times`` is in days.  ``counts`` carries the exact integer
    occupancy per day for agent runs (one row per time point, columns
    S, E, I, R).  ``per_node`` optionally carries per-node fraction
    trajectories keyed by compartment letter.  ``trials`` records how
    many runs were averaged into the curve.
    """

    times: np.ndarray
    s: np.ndarray
    e: np.ndarray
    i: np.ndarray
    r: np.ndarray
    counts: np.ndarray | None = None
    per_node: dict[str, np.ndarray] | None = None
    trials: int = 1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        for name in ("s", "e", "i", "r"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != self.times.shape:
                raise ValueError(f"{name} must match times in length")
            setattr(self, name, arr)

    @property
    def peak_prevalence(self) -> float:
        self._require_points()
        return float(self.i.max())

    @property
    def peak_time(self) -> float:
        self._require_points()
        return float(self.times[int(np.argmax(self.i))])

    @property
    def final_size(self) -> float:
        self._require_points()
        return float(self.r[-1])

    def _require_points(self):
        if self.times.size == 0:
            raise ValueError("curve has no time points")

    def validate(self, atol: float = 1e-9):
        """Recheck conservation, range, and monotonicity invariants."""
        self._require_points()
        total = self.s + self.e + self.i + self.r
        if np.abs(total - 1.0).max() > atol:
            raise ValueError("compartment fractions must sum to 1 at every time")
        for name in ("s", "e", "i", "r"):
            arr = getattr(self, name)
            if arr.min() < -atol or arr.max() > 1.0 + atol:
                raise ValueError(f"{name} fractions must lie in [0, 1]")
        if self.times.size > 1:
            if np.diff(self.s).max() > atol:
                raise ValueError("S must be non-increasing")
            if np.diff(self.r).min() < -atol:
                raise ValueError("R must be non-decreasing")
        if self.counts is not None:
            if self.counts.shape != (self.times.size, 4):
                raise ValueError("counts must be one row of 4 per time point")
            sums = self.counts.sum(axis=1)
            if not np.all(sums == sums[0]):
                raise ValueError("counts must conserve the population exactly")


def curve_metrics(curve: EpidemicCurve) -> dict[str, float]:
    """Peak prevalence, first time attaining it, and final size."""
    if curve.times.size == 0:
        raise ValueError("curve has no time points")
    return {
        "peak_prevalence": curve.peak_prevalence,
        "peak_time": curve.peak_time,
        "final_size": curve.final_size,
    }


def _node_weights(graph: Graph) -> np.ndarray:
    if graph.populations is not None:
        return np.asarray(graph.populations, dtype=np.float64)
    return np.ones(graph.node_count, dtype=np.float64)


def _adjacency_csr(graph: Graph) -> sparse.csr_matrix:
    n = graph.node_count
    rows = np.concatenate([graph.edge_u, graph.edge_v])
    cols = np.concatenate([graph.edge_v, graph.edge_u])
    vals = np.concatenate([graph.edge_w, graph.edge_w])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def simulate_ode_seir(
    graph: Graph,
    params: OdeSeirParams,
    init: InitialCondition,
    record_per_node: bool = False,
    settle_tol: float | None = None,
) -> EpidemicCurve:
    """Integrate the per-population compartment system with RK4.

    The state per node is its compartment occupancy as fractions of its
    own population, so the dynamics are population-free and populations
    enter only through the aggregate averages.  With ``settle_tol`` the
    integration stops early once the aggregate exposed plus infectious
    fraction falls below it; the remaining change in final size is
    bounded by that fraction.
    """
    n = graph.node_count
    if n == 0:
        raise ValueError("graph has no nodes")
    seeds = resolve_initial_nodes(graph, init)
    weights = _node_weights(graph)
    share = weights / weights.sum()
    A = _adjacency_csr(graph)
    beta, sig, gam = params.beta, params.sigma, params.gamma
    dt = params.dt
    nsteps = int(round(params.horizon / dt))
    if nsteps < 1:
        raise ValueError("horizon must cover at least one step")

    Y = np.zeros((4, n), dtype=np.float64)
    Y[0] = 1.0
    if seeds.size:
        Y[2, seeds] = init.infectious_fraction
        Y[0, seeds] = 1.0 - init.infectious_fraction

    def deriv(Z):
        force = A.dot(Z[2])
        if params.self_mixing:
            force += Z[2]
        force *= beta
        newly = force * Z[0]
        out = np.empty_like(Z)
        out[0] = -newly
        out[1] = newly - sig * Z[1]
        out[2] = sig * Z[1] - gam * Z[2]
        out[3] = gam * Z[2]
        return out

    agg = np.empty((nsteps + 1, 4), dtype=np.float64)
    agg[0] = Y.dot(share)
    if record_per_node:
        traj = np.empty((nsteps + 1, 4, n), dtype=np.float64)
        traj[0] = Y
    recorded = 1
    for step in range(1, nsteps + 1):
        k1 = deriv(Y)
        k2 = deriv(Y + (0.5 * dt) * k1)
        k3 = deriv(Y + (0.5 * dt) * k2)
        k4 = deriv(Y + dt * k3)
        Y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        low = Y.min()
        if not np.isfinite(low) or low < -_NEG_TOL:
            raise EpidemicError(
                f"compartment went negative ({low:.3e}) at t = {step * dt:.3f}; reduce dt"
            )
        np.maximum(Y, 0.0, out=Y)
        agg[step] = Y.dot(share)
        if record_per_node:
            traj[step] = Y
        recorded = step + 1
        if settle_tol is not None and agg[step, 1] + agg[step, 2] < settle_tol:
            break

    times = np.arange(recorded, dtype=np.float64) * dt
    per_node = None
    if record_per_node:
        per_node = {
            "s": traj[:recorded, 0].copy(),
            "e": traj[:recorded, 1].copy(),
            "i": traj[:recorded, 2].copy(),
            "r": traj[:recorded, 3].copy(),
        }
    return EpidemicCurve(
        times=times,
        s=agg[:recorded, 0],
        e=agg[:recorded, 1],
        i=agg[:recorded, 2],
        r=agg[:recorded, 3],
        per_node=per_node,
    )


@njit(cache=True, nogil=True)
def _agent_day(indptr, adj_nodes, log_miss, state, new_state, u, sigma, gamma):
    """Advance one synchronous day; reads ``state``, writes ``new_state``.

    ``log_miss`` holds log1p(-p) per adjacency slot, so the aggregate
    escape probability across infectious neighbors is one exp away and
    a certain transmission (p = 1) propagates as -inf.
    """
    n = state.size
    for v in range(n):
        sv = state[v]
        if sv == 0:
            total = 0.0
            exposed_to = False
            for k in range(indptr[v], indptr[v + 1]):
                if state[adj_nodes[k]] == 2:
                    total += log_miss[k]
                    exposed_to = True
            if exposed_to and u[v] < -math.expm1(total):
                new_state[v] = 1
            else:
                new_state[v] = 0
        elif sv == 1:
            new_state[v] = 2 if u[v] < sigma else 1
        elif sv == 2:
            new_state[v] = 3 if u[v] < gamma else 2
        else:
            new_state[v] = 3


def _edge_log_miss(graph: Graph, beta: float) -> np.ndarray:
    probs = beta * graph.adj_weights
    if probs.size and probs.max() > 1.0:
        warnings.warn(
            "beta times the largest edge weight exceeds 1; "
            "per-edge transmission probabilities are clamped to 1",
            UserWarning,
            stacklevel=3,
        )
        np.minimum(probs, 1.0, out=probs)
    with np.errstate(divide="ignore"):
        return np.log1p(-probs)


def simulate_agent_seir(
    graph: Graph, params: AgentSeirParams, init: InitialCondition
) -> EpidemicCurve:
    """Run the discrete daily per-person chain from a fixed seed.

    Every node is one person; per-node populations are not used here.
    The returned curve has one row per simulated day with exact integer
    counts attached.
    """
    n = graph.node_count
    if n == 0:
        raise ValueError("graph has no nodes")
    seeds = resolve_initial_nodes(graph, init)
    if seeds.size == 0:
        raise ValueError("initial infectious set is empty")
    log_miss = _edge_log_miss(graph, params.beta)
    state = np.zeros(n, dtype=np.int8)
    state[seeds] = 2
    scratch = np.empty_like(state)
    rng = np.random.default_rng(params.seed)
    counts = []
    for _day in range(int(params.horizon)):
        u = rng.random(n)
        _agent_day(
            graph.indptr, graph.adj_nodes, log_miss, state, scratch,
            u, params.sigma, params.gamma,
        )
        state, scratch = scratch, state
        row = np.bincount(state, minlength=4).astype(np.int64)
        counts.append(row)
        if params.stop_at_extinction and row[1] + row[2] == 0:
            break
    counts = np.array(counts, dtype=np.int64)
    fracs = counts / float(n)
    times = np.arange(1, counts.shape[0] + 1, dtype=np.float64)
    return EpidemicCurve(
        times=times,
        s=fracs[:, 0],
        e=fracs[:, 1],
        i=fracs[:, 2],
        r=fracs[:, 3],
        counts=counts,
    )


def ensemble_agent_seir(
    graph: Graph,
    params: AgentSeirParams,
    init: InitialCondition,
    trials: int,
    threads: int = 1,
) -> tuple[EpidemicCurve, list[dict[str, float]]]:
    """Average independent agent runs derived from one master seed.

    A single trial reuses the master stream unchanged, so the ensemble
    then matches the direct ``simulate_agent_seir`` call exactly.  With
    more trials, trial t gets its own child stream (and, in
    random-fraction mode, its own re-randomized initial condition).
    Runs that went extinct early are padded with their terminal state so
    the mean stays well-defined at every day.  Results are merged in
    trial-index order regardless of the thread count.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if trials == 1:
        curve = simulate_agent_seir(graph, params, init)
        return curve, [_trial_summary(0, curve)]

    master = params.seed
    if not isinstance(master, np.random.SeedSequence):
        master = np.random.SeedSequence(master)
    children = master.spawn(trials)

    def run(t: int) -> EpidemicCurve:
        init_stream, dyn_stream = children[t].spawn(2)
        trial_init = init
        if init.mode == "random-fraction":
            trial_init = replace(init, seed=init_stream)
        return simulate_agent_seir(graph, replace(params, seed=dyn_stream), trial_init)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curves = list(pool.map(run, range(trials)))
    else:
        curves = [run(t) for t in range(trials)]

    tmax = max(c.times.size for c in curves)
    stacked = np.empty((trials, 4, tmax), dtype=np.float64)
    for t, c in enumerate(curves):
        pad = tmax - c.times.size
        for j, name in enumerate(("s", "e", "i", "r")):
            arr = getattr(c, name)
            stacked[t, j] = np.pad(arr, (0, pad), mode="edge") if pad else arr
    mean = stacked.mean(axis=0)
    curve = EpidemicCurve(
        times=np.arange(1, tmax + 1, dtype=np.float64),
        s=mean[0],
        e=mean[1],
        i=mean[2],
        r=mean[3],
        trials=trials,
    )
    summaries = [_trial_summary(t, c) for t, c in enumerate(curves)]
    return curve, summaries


def _trial_summary(t: int, curve: EpidemicCurve) -> dict[str, float]:
    out = {"trial": t, "days": float(curve.times.size)}
    out.update(curve_metrics(curve))
    return out


def beta_from_r0(graph: Graph, r0: float) -> float:
    """Transmission scale matching a target basic reproduction number.

    Uses the degree-moment relation beta = r0 * <k> / (<k^2> - <k>)
    with unit-weight degrees.  Values above 1 are returned as computed,
    with a warning that the agent model will clamp per-edge
    probabilities.
    """
    if r0 < 0.0:
        raise ValueError("r0 must be non-negative")
    if graph.node_count == 0:
        raise ValueError("graph has no nodes")
    deg = np.diff(graph.indptr).astype(np.float64)
    k1 = deg.mean()
    k2 = (deg * deg).mean()
    if k2 <= k1:
        raise ValueError(
            "mean squared degree must exceed mean degree; "
            "the degree-moment relation is degenerate on this graph"
        )
    beta = float(r0 * k1 / (k2 - k1))
    if beta > 1.0:
        warnings.warn(
            f"beta = {beta:g} exceeds 1; the agent model clamps per-edge "
            "transmission probabilities at 1",
            UserWarning,
            stacklevel=2,
        )
    return beta


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of a final-size calibration."""

    beta: float
    achieved: float
    iterations: int
    model: str
    trials: int


def calibrate_beta_final_size(
    graph: Graph,
    init: InitialCondition,
    *,
    model: str,
    target: float,
    tol: float = 0.01,
    bracket: tuple[float, float] | None = None,
    sigma: float = 0.4,
    gamma: float = 0.2,
    dt: float = 0.05,
    horizon: float | None = None,
    trials: int = 20,
    seed: int = 0,
    max_iter: int = 60,
    threads: int = 1,
) -> CalibrationResult:
    """Bisect beta until the final epidemic size hits the target.

    Final size is treated as monotone non-decreasing in beta.  A bracket
    endpoint whose final size already meets the tolerance is returned
    directly with zero iterations, which is how a target equal to the
    seeded fraction resolves to the lower edge.  The agent model is
    evaluated as an ensemble mean with the same master seed at every
    beta, so each evaluation sees common random numbers; at the accepted
    beta the Monte Carlo noise must satisfy
    std / sqrt(trials) <= tol / 2, otherwise the call errors and asks
    for more trials.
    """
    if model not in ("ode", "agent"):
        raise ValueError("model must be 'ode' or 'agent'")
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if trials < 2 and model == "agent":
        raise ValueError("agent calibration needs at least 2 trials")
    if bracket is None:
        bracket = (0.0, 1.0) if model == "agent" else (0.0, 10.0)
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0.0 <= lo < hi:
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    if horizon is None:
        horizon = 1000 if model == "agent" else 365.0

    def final_size(beta: float) -> tuple[float, np.ndarray]:
        if model == "ode":
            params = OdeSeirParams(
                beta=beta, sigma=sigma, gamma=gamma, dt=dt, horizon=horizon
            )
            curve = simulate_ode_seir(graph, params, init, settle_tol=1e-12)
            return curve.final_size, np.array([curve.final_size])
        params = AgentSeirParams(
            beta=beta, sigma=sigma, gamma=gamma, horizon=int(horizon), seed=seed
        )
        _, summaries = ensemble_agent_seir(graph, params, init, trials, threads=threads)
        sizes = np.array([row["final_size"] for row in summaries])
        return float(sizes.mean()), sizes

    def accept(beta: float, achieved: float, sizes: np.ndarray, iteration: int):
        if model == "agent" and sizes.size > 1:
            noise = float(sizes.std(ddof=1)) / math.sqrt(sizes.size)
            if noise > 0.5 * tol:
                raise EpidemicError(
                    f"final-size noise {noise:.4f} exceeds tol/2 = {0.5 * tol:.4f} "
                    f"at beta = {beta:g}; increase trials"
                )
        return CalibrationResult(
            beta=beta,
            achieved=achieved,
            iterations=iteration,
            model=model,
            trials=trials if model == "agent" else 1,
        )

    f_lo, sizes_lo = final_size(lo)
    if abs(f_lo - target) <= tol:
        return accept(lo, f_lo, sizes_lo, 0)
    f_hi, sizes_hi = final_size(hi)
    if abs(f_hi - target) <= tol:
        return accept(hi, f_hi, sizes_hi, 0)
    if not f_lo <= target <= f_hi:
        raise EpidemicError(
            f"target {target:g} is not bracketed: final size is {f_lo:.6f} "
            f"at beta = {lo:g} and {f_hi:.6f} at beta = {hi:g}"
        )
    best = (math.inf, lo, f_lo)
    for iteration in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid, sizes = final_size(mid)
        gap = abs(f_mid - target)
        if gap < best[0]:
            best = (gap, mid, f_mid)
        if gap <= tol:
            return accept(mid, f_mid, sizes, iteration)
        if f_mid < target:
            lo = mid
        else:
            hi = mid
    raise EpidemicError(
        f"bisection did not reach |final size - {target:g}| <= {tol:g} in "
        f"{max_iter} iterations; closest was {best[2]:.6f} at beta = {best[1]:g}"
    )
