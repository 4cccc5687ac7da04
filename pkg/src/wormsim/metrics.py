"""Infection-outcome metrics extracted from round logs and their aggregation.

Six metrics quantify one round of worm interaction:

* ``ti``  total infectives: hosts ever infected by the malicious worm,
  seed included.
* ``mi``  maximum infectives: peak instantaneous count of malicious
  carriers.
* ``tl``  total life span: summed infected time over all malicious
  carriers (the total damage).
* ``al``  average individual life span, ``tl / ti``.
* ``ta``  time until every cooperative node carries the beneficial worm.
* ``tr``  time until the last malicious carrier is removed.

``ta``/``tr`` are censored (None) when the defining event does not happen
before the horizon. Relative variants divide by the cooperative
prey-susceptible population ``n_star = c*(1-i)*N``.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .events import (
    CAUSE_TERMINATION,
    EventLog,
    PREDATOR_INFECTED,
    PREY_INFECTED,
    SUSCEPTIBLE,
    IMMUNE_SUSCEPTIBLE,
    TRANSITION_EDGES,
)


class MetricsError(ValueError):
    pass


FLAT_JSON_KEYS = ("ti", "mi", "tl", "al", "ta", "tr", "censored")
ROUND_CSV_HEADER = "round,ti,mi,tl,al,ta,tr,ti_rel,mi_rel,censored_ta,censored_tr"
AGGREGATED_KEYS = ("ti", "mi", "tl", "al", "ta", "tr", "ti_rel", "mi_rel")


@dataclass(frozen=True)
class MetricSet:
    ti: float
    mi: float
    tl: float
    al: float
    ta: float | None
    tr: float | None
    ti_rel: float
    mi_rel: float
    censored_ta: bool = False
    censored_tr: bool = False
    al_undefined: bool = False

    @property
    def censored(self) -> bool:
        return self.censored_ta or self.censored_tr

    def value(self, key: str) -> float | None:
        return getattr(self, key)

    def to_flat_json(self) -> dict:
        """Flat export with keys ti, mi, tl, al, ta, tr, censored."""
        return {
            "ti": self.ti,
            "mi": self.mi,
            "tl": self.tl,
            "al": self.al,
            "ta": self.ta,
            "tr": self.tr,
            "censored": self.censored,
        }


def relative_base(params) -> float:
    """Cooperative prey-susceptible population c*(1-i)*N."""
    return params.coop_frac * (1.0 - params.immune_frac) * params.n_total


def extract_metrics(log: EventLog, config) -> MetricSet:
    """Extract the six metrics from one round log.

    ``config`` is a RoundConfig or anything carrying ``.params``; a bare
    ModelParams works too. Pure function of its inputs; transitions that
    violate the compartment edge set raise MetricsError.
    """
    params = getattr(config, "params", config)
    horizon = log.horizon

    state = [p.initial_compartment() for p in log.profiles]
    n_nodes = len(state)
    coop_count = log.coop_count

    infected_at: dict[int, float] = {}
    removed_at: dict[int, float] = {}
    n_prey = 0
    n_pred = 0
    mi = 0
    last_termination = None
    ta = None
    last_time = -math.inf

    for tr in log.transitions:
        t, node, src, dst, cause = tr
        if t < last_time:
            raise MetricsError(f"transitions out of order at t={t}")
        last_time = t
        if node < 0 or node >= n_nodes:
            raise MetricsError(f"unknown node id {node}")
        if (src, dst, cause) not in TRANSITION_EDGES:
            raise MetricsError(f"illegal transition {tr}")
        if state[node] != src:
            raise MetricsError(
                f"node {node} is in compartment {state[node]}, transition claims {src}"
            )
        state[node] = dst
        if dst == PREY_INFECTED:
            infected_at[node] = t
            n_prey += 1
            if n_prey > mi:
                mi = n_prey
        else:  # dst == PREDATOR_INFECTED
            if src == PREY_INFECTED:
                removed_at[node] = t
                n_prey -= 1
                last_termination = t
            n_pred += 1
            if ta is None and n_pred == coop_count:
                ta = t

    ti = len(infected_at)

    tl = 0.0
    censored_tr = n_prey > 0
    for node, t0 in infected_at.items():
        tl += removed_at.get(node, horizon) - t0

    if ti == 0:
        tr_val: float | None = 0.0
        censored_tr = False
    elif censored_tr:
        tr_val = None
    else:
        tr_val = last_termination

    censored_ta = ta is None and coop_count > 0
    if coop_count == 0:
        ta = 0.0

    al_undefined = ti == 0
    al = 0.0 if al_undefined else tl / ti

    n_star = relative_base(params)
    ti_rel = ti / n_star if n_star > 0 else 0.0
    mi_rel = mi / n_star if n_star > 0 else 0.0

    return MetricSet(
        ti=float(ti),
        mi=float(mi),
        tl=tl,
        al=al,
        ta=ta,
        tr=tr_val,
        ti_rel=ti_rel,
        mi_rel=mi_rel,
        censored_ta=censored_ta,
        censored_tr=censored_tr,
        al_undefined=al_undefined,
    )


def lower_median(values: Sequence[float]) -> float:
    """Median as the lower-middle element for even counts (no interpolation)."""
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class MetricStats:
    mean: float
    median: float
    std: float
    count: int
    censored: int = 0

    def to_json(self) -> dict:
        def clean(x):
            return None if (isinstance(x, float) and math.isnan(x)) else x

        return {
            "mean": clean(self.mean),
            "median": clean(self.median),
            "std": clean(self.std),
            "count": self.count,
            "censored": self.censored,
        }


@dataclass
class RoundAggregate:
    rounds: int
    stats: dict[str, MetricStats] = field(default_factory=dict)

    def mean(self, key: str) -> float:
        return self.stats[key].mean

    def median(self, key: str) -> float:
        return self.stats[key].median

    def std(self, key: str) -> float:
        return self.stats[key].std

    def sem(self, key: str) -> float:
        """Standard error of the mean."""
        s = self.stats[key]
        return s.std / math.sqrt(s.count) if s.count else math.nan

    def to_json(self) -> dict:
        return {
            "rounds": self.rounds,
            "metrics": {k: v.to_json() for k, v in self.stats.items()},
        }


def _stats_for(values: list[float], censored: int) -> MetricStats:
    if not values:
        return MetricStats(math.nan, math.nan, math.nan, 0, censored)
    mean = statistics.fmean(values)
    std = math.sqrt(statistics.fmean((v - mean) ** 2 for v in values))
    return MetricStats(mean, lower_median(values), std, len(values), censored)


def aggregate(metric_sets: Iterable[MetricSet]) -> RoundAggregate:
    """Per-metric mean / lower-median / population stddev across rounds.

    Censored ta/tr values are excluded from the moments and counted
    separately. Order of the input does not matter.
    """
    sets = list(metric_sets)
    if not sets:
        raise MetricsError("aggregate() needs at least one MetricSet")
    agg = RoundAggregate(rounds=len(sets))
    for key in AGGREGATED_KEYS:
        if key == "ta":
            values = [m.ta for m in sets if not m.censored_ta]
            censored = sum(m.censored_ta for m in sets)
        elif key == "tr":
            values = [m.tr for m in sets if not m.censored_tr]
            censored = sum(m.censored_tr for m in sets)
        else:
            values = [m.value(key) for m in sets]
            censored = 0
        agg.stats[key] = _stats_for([float(v) for v in values], censored)
    return agg


def write_round_csv(metric_sets: Sequence[MetricSet], path) -> None:
    """Per-round CSV; censored ta/tr cells are left empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUND_CSV_HEADER.split(","))
        for k, m in enumerate(metric_sets):
            writer.writerow(
                [
                    k,
                    repr(m.ti),
                    repr(m.mi),
                    repr(m.tl),
                    repr(m.al),
                    "" if m.ta is None else repr(m.ta),
                    "" if m.tr is None else repr(m.tr),
                    repr(m.ti_rel),
                    repr(m.mi_rel),
                    int(m.censored_ta),
                    int(m.censored_tr),
                ]
            )


def write_aggregate_json(agg: RoundAggregate, path) -> None:
    with open(path, "w") as fh:
        json.dump(agg.to_json(), fh, indent=2)
        fh.write("\n")
