"""Compartment vocabulary and per-round transition logs.

Shared by the event-driven simulators (uniform and trace-driven) and the
metric extractors. Compartments are plain ints so the hot event loops stay
cheap; ``COMPARTMENT_NAMES`` maps them back for exports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

SUSCEPTIBLE = 0
IMMUNE_SUSCEPTIBLE = 1
PREY_INFECTED = 2
PREDATOR_INFECTED = 3
NON_COOPERATIVE = 4

COMPARTMENT_NAMES = (
    "susceptible",
    "immune_susceptible",
    "prey_infected",
    "predator_infected",
    "non_cooperative",
)

ROLE_NONE = "none"
ROLE_PREY_SEED = "prey_seed"
ROLE_PREDATOR_SEED = "predator_seed"

CAUSE_SEED = "seed"
CAUSE_PREY_INFECTION = "prey_infection"
CAUSE_VACCINATION = "vaccination"
CAUSE_TERMINATION = "termination"


class Transition(NamedTuple):
    time: float
    node: int
    src: int
    dst: int
    cause: str


# The only legal (src, dst, cause) edges. Predator-infected and
# non-cooperative are absorbing; nothing ever leaves them.
TRANSITION_EDGES = frozenset(
    {
        (SUSCEPTIBLE, PREY_INFECTED, CAUSE_PREY_INFECTION),
        (SUSCEPTIBLE, PREDATOR_INFECTED, CAUSE_VACCINATION),
        (IMMUNE_SUSCEPTIBLE, PREDATOR_INFECTED, CAUSE_VACCINATION),
        (PREY_INFECTED, PREDATOR_INFECTED, CAUSE_TERMINATION),
        (SUSCEPTIBLE, PREY_INFECTED, CAUSE_SEED),
        (SUSCEPTIBLE, PREDATOR_INFECTED, CAUSE_SEED),
    }
)


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class NodeProfile:
    """Static per-node characteristics fixed for the whole round."""

    node_id: int
    cooperative: bool
    immune: bool
    role: str = ROLE_NONE

    def __post_init__(self):
        if self.immune and not self.cooperative:
            raise ProfileError(f"node {self.node_id}: immune nodes must be cooperative")
        if self.role not in (ROLE_NONE, ROLE_PREY_SEED, ROLE_PREDATOR_SEED):
            raise ProfileError(f"node {self.node_id}: unknown role {self.role!r}")
        if self.role != ROLE_NONE and (not self.cooperative or self.immune):
            raise ProfileError(
                f"node {self.node_id}: seed nodes must be cooperative and non-immune"
            )

    def initial_compartment(self) -> int:
        if not self.cooperative:
            return NON_COOPERATIVE
        if self.immune:
            return IMMUNE_SUSCEPTIBLE
        return SUSCEPTIBLE


@dataclass
class EventLog:
    """State-transition history of one simulated round.

    ``transitions`` is time-ordered and includes the seed injections.
    ``horizon`` is the round end time (trace end for replays) even when the
    round terminated early in an absorbing configuration.
    """

    transitions: list[Transition]
    horizon: float
    profiles: tuple[NodeProfile, ...]
    _counts: tuple[int, int] | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.profiles)

    def _count(self) -> tuple[int, int]:
        if self._counts is None:
            coop = sum(1 for p in self.profiles if p.cooperative)
            immune = sum(1 for p in self.profiles if p.immune)
            self._counts = (coop, immune)
        return self._counts

    @property
    def coop_count(self) -> int:
        return self._count()[0]

    @property
    def immune_count(self) -> int:
        return self._count()[1]

    def seed_ids(self, role: str) -> tuple[int, ...]:
        return tuple(p.node_id for p in self.profiles if p.role == role)
