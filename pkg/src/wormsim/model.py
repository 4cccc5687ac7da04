"""Mean-field engine for two-worm predator/prey dynamics.

Continuum state (s_star, s_prime, i_a, i_b): hosts susceptible to both
worms, hosts susceptible only to the beneficial worm, malicious-worm
carriers, beneficial-worm carriers. The beneficial worm terminates the
malicious one on contact and patches (vaccinates) susceptible hosts.

Two right-hand sides are provided:

* basic: every node cooperative, prey-susceptible and always on,

      ds/dt   = -beta * s * (i_a + i_b)
      di_a/dt =  beta * i_a * (s - i_b)
      di_b/dt =  beta * (s * i_b + i_a * i_b)

* characteristic: a fraction c of N cooperates, a fraction i of those is
  immune to the malicious worm, and each encounter is active with
  probability p, which thins the contact rate to p*beta:

      ds_star/dt  = -p*beta * s_star * (i_a + i_b)
      ds_prime/dt = -p*beta * s_prime * i_b
      di_a/dt     =  p*beta * i_a * (s_star - i_b)
      di_b/dt     =  p*beta * ((s_star + s_prime) * i_b + i_a * i_b)

The compartments always sum to c*N; the (1-c)*N non-cooperative nodes
never enter the state vector.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import MetricSet, MetricsError, relative_base

EULER_GAMMA = 0.5772  # truncated constant used by the infect-all delay formula
DEFAULT_STABILITY_PRODUCT = 0.005  # target beta*N*step for the default step
STABILITY_WARN = 0.01
STABILITY_ERROR = 0.1
REMOVAL_THRESHOLD = 0.5  # continuum stand-in for "under half a node left"
INFECT_ALL_THRESHOLD = 0.5
TRAJECTORY_CSV_HEADER = "t,s_star,s_prime,i_a,i_b"

BASIC = "basic"
CHARACTERISTIC = "characteristic"

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class ModelError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one scenario.

    beta is the pairwise contact rate (per second per node pair); n_total
    the node count N; coop_frac/immune_frac/on_prob the node-characteristic
    fractions c, i, p; i_a0/i_b0 the initial malicious and beneficial
    carrier counts. Both seed groups are drawn from the cooperative
    non-immune pool, so i_a0 + i_b0 may not exceed c*(1-i)*N.
    """

    beta: float
    n_total: float
    coop_frac: float = 1.0
    immune_frac: float = 0.0
    on_prob: float = 1.0
    i_a0: float = 1.0
    i_b0: float = 1.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ModelError(f"beta must be >= 0, got {self.beta}")
        if not self.n_total > 0:
            raise ModelError(f"n_total must be > 0, got {self.n_total}")
        for name in ("coop_frac", "immune_frac", "on_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ModelError(f"{name} must be in [0, 1], got {v}")
        if self.i_a0 < 0 or self.i_b0 < 0:
            raise ModelError("seed counts must be non-negative")
        if self.i_a0 + self.i_b0 > self.seed_pool + 1e-9:
            raise ModelError(
                f"seeds i_a0 + i_b0 = {self.i_a0 + self.i_b0} exceed the "
                f"cooperative non-immune pool c(1-i)N = {self.seed_pool}"
            )

    @property
    def coop_pool(self) -> float:
        return self.coop_frac * self.n_total

    @property
    def immune_pool(self) -> float:
        return self.coop_frac * self.immune_frac * self.n_total

    @property
    def seed_pool(self) -> float:
        """Cooperative non-immune population c*(1-i)*N; seeds come from here."""
        return self.coop_frac * (1.0 - self.immune_frac) * self.n_total

    @property
    def n_star(self) -> float:
        """Base population for relative metrics, c*(1-i)*N."""
        return relative_base(self)

    def is_basic(self) -> bool:
        return self.coop_frac == 1.0 and self.immune_frac == 0.0 and self.on_prob == 1.0


@dataclass(frozen=True)
class ModelState:
    t: float
    s_star: float
    s_prime: float
    i_a: float
    i_b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s_star, self.s_prime, self.i_a, self.i_b])

    @property
    def total(self) -> float:
        return self.s_star + self.s_prime + self.i_a + self.i_b


def initial_state(params: ModelParams) -> ModelState:
    """Seeding rule: both seed groups consume the cooperative non-immune pool;
    the immune pool c*i*N starts untouched."""
    return ModelState(
        t=0.0,
        s_star=params.seed_pool - params.i_a0 - params.i_b0,
        s_prime=params.immune_pool,
        i_a=params.i_a0,
        i_b=params.i_b0,
    )


def derivatives_basic(state: ModelState, params: ModelParams) -> np.ndarray:
    """Rates (ds_star, ds_prime, di_a, di_b) for the basic system.

    Only valid in the fully-cooperative always-on special case; other
    parameters must use derivatives_characteristic.
    """
    if not params.is_basic():
        raise ModelError(
            "basic model requires coop_frac=1, immune_frac=0, on_prob=1; "
            f"got c={params.coop_frac}, i={params.immune_frac}, p={params.on_prob}"
        )
    b = params.beta
    s, ia, ib = state.s_star, state.i_a, state.i_b
    return np.array(
        [-b * s * (ia + ib), 0.0, b * ia * (s - ib), b * (s * ib + ia * ib)]
    )


def derivatives_characteristic(state: ModelState, params: ModelParams) -> np.ndarray:
    """Rates (ds_star, ds_prime, di_a, di_b) for the node-characteristic system."""
    pb = params.on_prob * params.beta
    ss, sp, ia, ib = state.s_star, state.s_prime, state.i_a, state.i_b
    return np.array(
        [
            -pb * ss * (ia + ib),
            -pb * sp * ib,
            pb * ia * (ss - ib),
            pb * ((ss + sp) * ib + ia * ib),
        ]
    )


def _rhs(model: str, params: ModelParams):
    if model == BASIC:
        if not params.is_basic():
            raise ModelError("params outside the basic special case")
        b = params.beta

        def f(y):
            s, sp, ia, ib = y
            return np.array([-b * s * (ia + ib), 0.0, b * ia * (s - ib), b * (s * ib + ia * ib)])

        return f
    if model == CHARACTERISTIC:
        pb = params.on_prob * params.beta

        def f(y):
            ss, sp, ia, ib = y
            return np.array(
                [
                    -pb * ss * (ia + ib),
                    -pb * sp * ib,
                    pb * ia * (ss - ib),
                    pb * ((ss + sp) * ib + ia * ib),
                ]
            )

        return f
    raise ModelError(f"unknown model {model!r}")


@dataclass(frozen=True)
class Trajectory:
    params: ModelParams
    model: str
    step: float
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 4)

    @property
    def s_star(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def s_prime(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def i_a(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def i_b(self) -> np.ndarray:
        return self.states[:, 3]

    def __len__(self) -> int:
        return len(self.times)

    def state_at(self, k: int) -> ModelState:
        t = self.times[k]
        return ModelState(float(t), *map(float, self.states[k]))

    def terminal(self) -> ModelState:
        return self.state_at(len(self.times) - 1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_CSV_HEADER.split(","))
            for t, row in zip(self.times, self.states):
                writer.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def default_step(params: ModelParams) -> float:
    """Step size keeping beta*N*step at the default stability product."""
    bn = params.beta * params.n_total
    if bn <= 0:
        raise ModelError("default step undefined for beta*N = 0; pass step explicitly")
    return DEFAULT_STABILITY_PRODUCT / bn


def integrate(
    params: ModelParams,
    model: str = CHARACTERISTIC,
    horizon: float = None,
    step: float = None,
) -> Trajectory:
    """Fixed-step classical Runge-Kutta (RK4) trajectory on a uniform grid.

    Enforces beta*N*step <= 0.01 (warns above, refuses above 0.1), checks
    compartment conservation to 1e-6*N at every step and aborts with a
    diagnostic if any compartment dips below -1e-6*N.
    """
    if horizon is None:
        raise ModelError("horizon is required")
    if step is None:
        step = default_step(params)
    if not step > 0:
        raise ModelError(f"step must be > 0, got {step}")
    if horizon < step:
        raise ModelError(f"horizon {horizon} shorter than one step {step}")
    bn_step = params.beta * params.n_total * step
    if bn_step > STABILITY_ERROR:
        raise ModelError(
            f"beta*N*step = {bn_step:.3g} exceeds the hard stability bound {STABILITY_ERROR}"
        )
    if bn_step > STABILITY_WARN:
        warnings.warn(
            f"beta*N*step = {bn_step:.3g} above {STABILITY_WARN}; proceeding",
            stacklevel=2,
        )

    f = _rhs(model, params)
    n_steps = max(1, int(math.ceil(horizon / step - 1e-9)))
    times = step * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, 4))
    y = initial_state(params).as_array()
    states[0] = y
    total0 = y.sum()
    tol_negative = -1e-6 * params.n_total
    tol_conserve = 1e-6 * params.n_total
    half = 0.5 * step
    sixth = step / 6.0
    for k in range(n_steps):
        k1 = f(y)
        k2 = f(y + half * k1)
        k3 = f(y + half * k2)
        k4 = f(y + step * k3)
        y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if y.min() < tol_negative:
            raise IntegrationError(
                f"divergent state at t={times[k + 1]:.6g}: compartments {y.tolist()}"
            )
        if abs(y.sum() - total0) > tol_conserve:
            raise IntegrationError(
                f"conservation violated at t={times[k + 1]:.6g}: "
                f"sum {y.sum()!r} vs {total0!r}"
            )
        states[k + 1] = y
    return Trajectory(params=params, model=model, step=step, times=times, states=states)


def _first_crossing(times: np.ndarray, values: np.ndarray, threshold: float):
    """First grid time with values < threshold, or None if never."""
    below = np.nonzero(values < threshold)[0]
    if below.size == 0:
        return None, None
    k = int(below[0])
    return float(times[k]), k


def model_metrics(
    traj: Trajectory,
    removal_threshold: float = REMOVAL_THRESHOLD,
    infect_all_threshold: float = INFECT_ALL_THRESHOLD,
) -> MetricSet:
    """Extract the six metrics from a continuum trajectory.

    ti integrates the malicious-worm inflow p*beta*s_star*i_a (trapezoidal)
    plus the i_a0 seeds, except in the suppressed regime i_b0 >= s_star(0)
    where the inflow never outruns termination and ti is pinned to the seed
    count. tl sums i_a up to tr. Metrics whose defining crossing does not
    happen before the end of the trajectory come back censored.
    """
    params = traj.params
    p_beta = params.on_prob * params.beta
    t = traj.times
    ia = traj.i_a

    tr, k_tr = _first_crossing(t, ia, removal_threshold)
    censored_tr = tr is None
    remaining = params.coop_pool - traj.i_b
    ta, _ = _first_crossing(t, remaining, infect_all_threshold)
    censored_ta = ta is None

    mi = float(ia.max())
    suppressed = params.i_b0 >= traj.states[0, 0]
    if suppressed:
        ti = params.i_a0
    else:
        ti = params.i_a0 + float(_trapezoid(p_beta * traj.s_star * ia, t))

    end = len(t) if censored_tr else k_tr + 1
    tl = float(_trapezoid(ia[:end], t[:end]))

    al_undefined = ti <= 0.0
    al = 0.0 if al_undefined else tl / ti

    n_star = params.n_star
    ti_rel = ti / n_star if n_star > 0 else 0.0
    mi_rel = mi / n_star if n_star > 0 else 0.0

    scale = 1e-9 * max(1.0, abs(ti))
    if params.i_a0 > mi + scale or mi > ti + scale:
        raise MetricsError(f"metric ordering violated: i_a0={params.i_a0}, mi={mi}, ti={ti}")
    if ti >= 1.0 and al > tl + scale:
        raise MetricsError(f"metric ordering violated: al={al} > tl={tl}")
    if tr is not None and ta is not None and tr > ta + 1e-9:
        raise MetricsError(f"metric ordering violated: tr={tr} > ta={ta}")

    return MetricSet(
        ti=ti,
        mi=mi,
        tl=tl,
        al=al,
        ta=ta,
        tr=tr,
        ti_rel=ti_rel,
        mi_rel=mi_rel,
        censored_ta=censored_ta,
        censored_tr=censored_tr,
        al_undefined=al_undefined,
    )


def ta_closed_form(params: ModelParams) -> float:
    """Average time for one worm to reach every node under uniform encounters:
    (2 ln N + 0.5772) / (p N beta)."""
    if params.on_prob <= 0:
        raise ModelError("closed form requires on_prob > 0")
    if params.beta <= 0:
        raise ModelError("closed form requires beta > 0")
    if params.n_total < 2:
        raise ModelError("closed form requires at least two nodes")
    n = params.n_total
    return (2.0 * math.log(n) + EULER_GAMMA) / (params.on_prob * n * params.beta)


def suppression_threshold(params: ModelParams, model: str = BASIC) -> float:
    """Beneficial-worm seeding that zeroes the malicious growth rate at t=0.

    Equals the initial both-worm-susceptible count s_star(0) as realized by
    the seeding rule; in the basic special case that is S(0) since
    s_prime(0) = 0.
    """
    if model == BASIC and not params.is_basic():
        raise ModelError("params outside the basic special case")
    if model not in (BASIC, CHARACTERISTIC):
        raise ModelError(f"unknown model {model!r}")
    return initial_state(params).s_star
