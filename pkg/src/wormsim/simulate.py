"""Event-driven stochastic simulator of worm interaction rounds.

Encounters form an exact continuous-time process: global inter-event gaps
are exponential with rate beta*N*(N-1)/2 and each event picks an unordered
node pair uniformly (non-cooperative nodes included; their encounters are
no-ops). Per-encounter on-off behavior draws a single Bernoulli(p) trial on
the link, so the effective contact rate is p*beta. Every round is
deterministic given its rng_seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .events import (
    CAUSE_PREY_INFECTION,
    CAUSE_SEED,
    CAUSE_TERMINATION,
    CAUSE_VACCINATION,
    EventLog,
    IMMUNE_SUSCEPTIBLE,
    NON_COOPERATIVE,
    NodeProfile,
    PREDATOR_INFECTED,
    PREY_INFECTED,
    ROLE_NONE,
    ROLE_PREDATOR_SEED,
    ROLE_PREY_SEED,
    SUSCEPTIBLE,
    Transition,
)
from .model import ModelParams

_ENCOUNTER_BATCH = 1024


class SimulationError(ValueError):
    pass


class EncounterEvent(NamedTuple):
    time: float
    node_u: int
    node_v: int
    source: str = "generated"


@dataclass(frozen=True)
class RoundConfig:
    """One simulation round: parameters, seed, horizon and seed lag.

    prey_delay is the injection time of the prey seed relative to the
    predator seed: the predator is injected at max(0, -prey_delay) and the
    prey at max(0, prey_delay), so positive values put the predator first.
    A seed that has not been injected yet cannot infect or be infected.
    """

    params: ModelParams
    rng_seed: int
    horizon: float
    prey_delay: float = 0.0
    transmission_trials_per_encounter: int = 1

    def __post_init__(self):
        if not self.horizon > 0:
            raise SimulationError(f"horizon must be > 0, got {self.horizon}")
        if self.transmission_trials_per_encounter != 1:
            raise SimulationError("exactly one transmission trial per encounter is supported")
        for name in ("n_total", "i_a0", "i_b0"):
            v = getattr(self.params, name)
            if not float(v).is_integer():
                raise SimulationError(f"simulation requires integer {name}, got {v}")


def derive_round_seed(master_seed: int, k: int) -> int:
    """Stable per-round seed; independent of execution order or worker count."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(k,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def assign_profiles(
    params: ModelParams, rng: np.random.Generator
) -> tuple[list[NodeProfile], list[int], list[int]]:
    """Sample per-node profiles: floor(c*N) cooperative nodes of which
    floor(i*c*N) are immune; seeds drawn from the cooperative non-immune rest.

    Returns (profiles, prey_seed_ids, predator_seed_ids). Raises if the
    non-immune cooperative pool cannot host all seeds.
    """
    n = int(params.n_total)
    coop_count = math.floor(params.coop_frac * n)
    immune_count = math.floor(params.immune_frac * params.coop_frac * n)
    n_prey = int(params.i_a0)
    n_pred = int(params.i_b0)
    eligible_count = coop_count - immune_count
    if n_prey + n_pred > eligible_count:
        raise SimulationError(
            f"seed pools exhausted: {n_prey + n_pred} seeds but only "
            f"{eligible_count} cooperative non-immune nodes"
        )

    perm = rng.permutation(n)
    coop_ids = perm[:coop_count]
    immune_ids = set(coop_ids[:immune_count].tolist())
    eligible = coop_ids[immune_count:]
    picks = rng.choice(eligible.size, size=n_prey + n_pred, replace=False) if n_prey + n_pred else []
    prey_ids = sorted(int(eligible[j]) for j in picks[:n_prey])
    pred_ids = sorted(int(eligible[j]) for j in picks[n_prey:])

    coop_set = set(coop_ids.tolist())
    prey_set = set(prey_ids)
    pred_set = set(pred_ids)
    profiles = []
    for node in range(n):
        role = ROLE_NONE
        if node in prey_set:
            role = ROLE_PREY_SEED
        elif node in pred_set:
            role = ROLE_PREDATOR_SEED
        profiles.append(
            NodeProfile(
                node_id=node,
                cooperative=node in coop_set,
                immune=node in immune_ids,
                role=role,
            )
        )
    return profiles, prey_ids, pred_ids


def generate_uniform_encounters(
    params: ModelParams, rng: np.random.Generator, horizon: float
) -> Iterator[EncounterEvent]:
    """Exact realization of the uniform encounter process up to horizon."""
    n = int(params.n_total)
    if n < 2:
        raise SimulationError("need at least two nodes")
    rate = params.beta * n * (n - 1) / 2.0
    if rate <= 0:
        return
    scale = 1.0 / rate
    t = 0.0
    while t <= horizon:
        gaps = rng.exponential(scale, size=_ENCOUNTER_BATCH)
        us = rng.integers(0, n, size=_ENCOUNTER_BATCH)
        vs = rng.integers(0, n - 1, size=_ENCOUNTER_BATCH)
        vs = vs + (vs >= us)  # uniform over v != u
        times = t + np.cumsum(gaps)
        t = float(times[-1])
        for time, u, v in zip(times.tolist(), us.tolist(), vs.tolist()):
            if time > horizon:
                return
            yield EncounterEvent(time, u, v)


def apply_encounter(event, states: list[int], on_prob: float, rng) -> Transition | None:
    """Apply one encounter in place; return the transition or None.

    ``event`` is anything indexable as (time, node_u, node_v, ...). Exactly
    one rule fires per encounter: a beneficial carrier converts a malicious
    carrier (termination) or any susceptible (vaccination); a malicious
    carrier converts a plain susceptible. Immune nodes ignore the malicious
    worm; non-cooperative nodes ignore everything. The single Bernoulli(p)
    link trial is drawn only when the pair could actually change state,
    which leaves outcomes distributionally unchanged.
    """
    t = event[0]
    u = event[1]
    v = event[2]
    cu = states[u]
    cv = states[v]
    if cu <= cv:
        w, cw, co = u, cu, cv
    else:
        w, cw, co = v, cv, cu
    if co == PREDATOR_INFECTED:
        if cw == PREDATOR_INFECTED:
            return None
    elif co != PREY_INFECTED or cw != SUSCEPTIBLE:
        return None
    if on_prob < 1.0 and rng.random() >= on_prob:
        return None
    if co == PREDATOR_INFECTED:
        cause = CAUSE_TERMINATION if cw == PREY_INFECTED else CAUSE_VACCINATION
        states[w] = PREDATOR_INFECTED
        return Transition(t, w, cw, PREDATOR_INFECTED, cause)
    states[w] = PREY_INFECTED
    return Transition(t, w, SUSCEPTIBLE, PREY_INFECTED, CAUSE_PREY_INFECTION)


def drive_events(
    states: list[int],
    events: Iterable,
    schedule: list[tuple[float, tuple[int, ...], int]],
    on_prob: float,
    rng,
    horizon: float,
) -> list[Transition]:
    """Shared event loop: inject scheduled seeds, apply encounters in time
    order, stop early once no further transition is possible.

    ``schedule`` holds (time, node_ids, compartment) seed injections sorted
    by time; scheduled nodes are inert until injected. Mutates ``states``.
    """
    transitions = []
    append = transitions.append
    n_sus = 0
    n_imm = 0
    n_prey = 0
    n_pred = 0
    for c in states:
        if c == SUSCEPTIBLE:
            n_sus += 1
        elif c == IMMUNE_SUSCEPTIBLE:
            n_imm += 1
        elif c == PREY_INFECTED:
            n_prey += 1
        elif c == PREDATOR_INFECTED:
            n_pred += 1

    pending: set[int] = set()
    for _, ids, _ in schedule:
        pending.update(ids)
    si = 0
    ns = len(schedule)

    def inject_through(t):
        nonlocal si, n_sus, n_prey, n_pred
        while si < ns and schedule[si][0] <= t:
            at, ids, comp = schedule[si]
            for node in ids:
                if states[node] != SUSCEPTIBLE:
                    raise SimulationError(f"seed node {node} not susceptible at injection")
                states[node] = comp
                n_sus -= 1
                if comp == PREY_INFECTED:
                    n_prey += 1
                else:
                    n_pred += 1
                append(Transition(at, node, SUSCEPTIBLE, comp, CAUSE_SEED))
            pending.difference_update(ids)
            si += 1

    def absorbed():
        return si >= ns and not (
            (n_prey > 0 and n_sus > 0)
            or (n_pred > 0 and (n_sus + n_imm + n_prey) > 0)
        )

    for ev in events:
        t = ev[0]
        if t > horizon:
            break
        if si < ns:
            inject_through(t)
            if absorbed():
                break
        if pending and (ev[1] in pending or ev[2] in pending):
            continue
        tr = apply_encounter(ev, states, on_prob, rng)
        if tr is None:
            continue
        append(tr)
        src = tr[2]
        if src == SUSCEPTIBLE:
            n_sus -= 1
        elif src == IMMUNE_SUSCEPTIBLE:
            n_imm -= 1
        else:
            n_prey -= 1
        if tr[3] == PREY_INFECTED:
            n_prey += 1
        else:
            n_pred += 1
        if absorbed():
            break
    inject_through(horizon)
    return transitions


def seed_schedule(
    prey_ids, pred_ids, prey_delay: float
) -> list[tuple[float, tuple[int, ...], int]]:
    pred_t = max(0.0, -prey_delay)
    prey_t = max(0.0, prey_delay)
    schedule = []
    if pred_ids:
        schedule.append((pred_t, tuple(pred_ids), PREDATOR_INFECTED))
    if prey_ids:
        schedule.append((prey_t, tuple(prey_ids), PREY_INFECTED))
    schedule.sort(key=lambda s: (s[0], s[2] != PREDATOR_INFECTED))
    return schedule


def run_round(config: RoundConfig, encounters: Iterable | None = None) -> EventLog:
    """Simulate one round and return its transition log.

    When ``encounters`` is None the uniform encounter stream is generated
    internally from the round rng (after the profile draws), so the whole
    round is a function of config.rng_seed. An explicit stream must be
    time-ordered (time, node_u, node_v, ...) tuples.
    """
    params = config.params
    rng = np.random.default_rng(config.rng_seed)
    profiles, prey_ids, pred_ids = assign_profiles(params, rng)
    states = [p.initial_compartment() for p in profiles]
    schedule = seed_schedule(prey_ids, pred_ids, config.prey_delay)
    if encounters is None:
        encounters = generate_uniform_encounters(params, rng, config.horizon)
    transitions = drive_events(
        states, encounters, schedule, params.on_prob, rng, config.horizon
    )
    return EventLog(
        transitions=transitions, horizon=config.horizon, profiles=tuple(profiles)
    )


def iter_round_logs(
    template: RoundConfig, rounds: int, master_seed: int
) -> Iterator[tuple[int, EventLog]]:
    """Yield (round_index, EventLog); round k uses derive_round_seed(master_seed, k)."""
    if rounds < 1:
        raise SimulationError(f"rounds must be >= 1, got {rounds}")
    for k in range(rounds):
        config = replace(template, rng_seed=derive_round_seed(master_seed, k))
        yield k, run_round(config)


def run_rounds(
    template: RoundConfig, rounds: int, master_seed: int
) -> tuple[list[EventLog], list[tuple[int, str]]]:
    """Run independent rounds; per-round failures are recorded, not fatal.

    Returns (logs, failures) with failures as (round_index, message). The
    template's own rng_seed is ignored; round k is seeded from
    (master_seed, k), so output order is deterministic.
    """
    logs: list[EventLog] = []
    failures: list[tuple[int, str]] = []
    if rounds < 1:
        raise SimulationError(f"rounds must be >= 1, got {rounds}")
    for k in range(rounds):
        config = replace(template, rng_seed=derive_round_seed(master_seed, k))
        try:
            logs.append(run_round(config))
        except Exception as exc:  # recorded per spec, batch continues
            failures.append((k, f"{type(exc).__name__}: {exc}"))
    return logs, failures
