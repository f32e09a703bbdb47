"""Named scenarios: a node-set builder per degree plus flags for the checks that apply."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import ConfigurationError
from .measure import (
    WeightedCompactSet,
    annulus_pair_set,
    circle_set,
    default_annulus_nodes,
    default_circle_nodes,
    default_interval_nodes,
    interval_set,
    minus_fs_weight,
    zero_weight,
)


@dataclass(frozen=True)
class Scenario:
    name: str
    builder: Callable[[int], WeightedCompactSet]
    default_nodes: Callable[[int], int]
    has_oracle: bool
    # M_n <= n^C0 is only claimed where the measure is known to be Bernstein-Markov
    check_growth: bool

    def build(self, n: int, nodes: Optional[int] = None) -> WeightedCompactSet:
        return self.builder(nodes if nodes is not None else self.default_nodes(n))


ANNULUS_RADII = (0.5, 1.0)

SCENARIOS: dict[str, Scenario] = {
    "circle": Scenario(
        "circle", lambda N: circle_set(1.0, N, zero_weight), default_circle_nodes, True, True
    ),
    "interval": Scenario(
        "interval", lambda N: interval_set(N, minus_fs_weight), default_interval_nodes, True, True
    ),
    "annulus_pair": Scenario(
        "annulus_pair",
        lambda N: annulus_pair_set(*ANNULUS_RADII, N + (N % 2), zero_weight),
        default_annulus_nodes,
        False,
        False,
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}"
        ) from None
