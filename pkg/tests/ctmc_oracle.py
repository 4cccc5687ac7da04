"""Exact absorption analysis for tiny interaction networks.

Independent oracle for the event-driven simulator: enumerates the full
compartment state space of the contact process with uniform pairwise
encounter rates and solves absorption probabilities by first-step analysis
with exact rational arithmetic. No simulator code is used.

Per-node state is (compartment, ever_prey flag); every effective contact
rule fires at the same rate (the common factor p*beta cancels out of all
probabilities), and every rule strictly increases the number of infected
nodes, so the state graph is a DAG and memoized recursion terminates.

Rules (uniform pair rate):
  carrier_b + carrier_a  -> carrier_a becomes carrier_b   (termination)
  carrier_b + open       -> open becomes carrier_b        (vaccination)
  carrier_a + open       -> open becomes carrier_a        (infection)
"""

from fractions import Fraction
from functools import lru_cache

OPEN = 0  # susceptible to both worms
CARRIER_A = 1  # malicious worm
CARRIER_B = 2  # beneficial worm


def _successors(state):
    """All states reachable in one contact event, with multiplicity."""
    out = []
    n = len(state)
    for a in range(n):
        ca = state[a][0]
        for b in range(a + 1, n):
            cb = state[b][0]
            if ca == cb:
                continue
            lo, hi = (a, b) if ca < cb else (b, a)
            c_lo = state[lo][0]
            c_hi = state[hi][0]
            if c_hi == CARRIER_B:
                # lo is OPEN or CARRIER_A; either way it becomes CARRIER_B
                new = (CARRIER_B, state[lo][1])
            else:  # c_hi == CARRIER_A, c_lo == OPEN
                new = (CARRIER_A, True)
            nxt = list(state)
            nxt[lo] = new
            out.append(tuple(nxt))
    return out


@lru_cache(maxsize=None)
def _flag_count_distribution(state):
    """Distribution of the final number of ever-infected-by-A nodes."""
    succ = _successors(state)
    if not succ:
        count = sum(1 for comp, flag in state if flag)
        return ((count, Fraction(1)),)
    share = Fraction(1, len(succ))
    dist = {}
    for nxt in succ:
        for count, prob in _flag_count_distribution(nxt):
            dist[count] = dist.get(count, Fraction(0)) + share * prob
    return tuple(sorted(dist.items()))


def ever_prey_distribution(n_susceptible, prey_seeds=1, predator_seeds=1):
    """Exact distribution of TI (nodes ever malicious-infected, seeds included)
    for a fully-cooperative always-on network of
    prey_seeds + predator_seeds + n_susceptible nodes."""
    state = (
        ((CARRIER_A, True),) * prey_seeds
        + ((CARRIER_B, False),) * predator_seeds
        + ((OPEN, False),) * n_susceptible
    )
    return dict(_flag_count_distribution(state))


def prob_susceptible_ever_prey(n_susceptible, prey_seeds=1, predator_seeds=1):
    """Probability a given susceptible node is ever infected by the malicious
    worm (all susceptibles are exchangeable)."""
    dist = ever_prey_distribution(n_susceptible, prey_seeds, predator_seeds)
    total = Fraction(0)
    for count, prob in dist.items():
        total += prob * Fraction(count - prey_seeds, n_susceptible)
    return total


if __name__ == "__main__":
    for ns in (1, 2, 3):
        dist = ever_prey_distribution(ns)
        print(f"susceptibles={ns}:")
        for count, prob in sorted(dist.items()):
            print(f"  P(TI = {count}) = {prob} = {float(prob):.6f}")
        print(f"  P(one fixed susceptible ever infected) = "
              f"{prob_susceptible_ever_prey(ns)}")
