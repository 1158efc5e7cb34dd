import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import graphviz
from robot.api.deco import keyword

from QFP.core.helpers import to_label
from QFP.Gates import DEFAULT_GUARD_MODES, validate_layout
from QFP.QKD import LinkMetrics


POLICIES = ("ordered", "balanced")

Link = Tuple[str, str]


class CapacityError(ValueError):
    """Raised when there are not enough secure pairs for the requested users."""


@dataclass
class NetworkPlan:
    """Assignment of frequency pairs to the links of a fully connected
    network.

    :param users: user identifiers
    :param links: pair index per unordered user pair
    :param unused_pairs: usable pairs left unassigned
    :param max_users: largest network the usable pairs could serve
    :param rates: sifted key rate per pair index, if known
    """

    users: List[str]
    links: Dict[Link, int]
    unused_pairs: List[int]
    max_users: int
    rates: Dict[int, float] = field(default_factory=dict)
    policy: str = "ordered"

    def __post_init__(self):
        expected = set(itertools.combinations(self.users, 2))
        if set(self.links) != expected:
            raise ValueError("Links must cover every user pair exactly once")
        assigned = list(self.links.values())
        if len(set(assigned)) != len(assigned):
            raise ValueError("A pair index is assigned to more than one link")
        if set(assigned) & set(self.unused_pairs):
            raise ValueError("Assigned pairs listed as unused")

    def __len__(self):
        return len(self.links)

    def link_rate(self, link: Link) -> Optional[float]:
        return self.rates.get(self.links[link])

    def min_rate(self) -> Optional[float]:
        if not self.links or not self.rates:
            return None
        return min(self.rates[n] for n in self.links.values())

    def to_dict(self) -> dict:
        return {
            "users": list(self.users),
            "links": [
                {"a": a, "b": b, "n": n, "sifted_bps": self.link_rate((a, b))}
                for (a, b), n in self.links.items()
            ],
            "unused": list(self.unused_pairs),
            "max_users": self.max_users,
            "policy": self.policy,
        }


def usable_pairs(metrics: Sequence[LinkMetrics]) -> List[int]:
    """Secure pair indices, best sifted rate first and ties by index."""
    secure = [m for m in metrics if m.secure]
    secure.sort(key=lambda m: (-m.sifted_rate, m.n))
    return [m.n for m in secure]


def links_needed(n_users: int) -> int:
    return n_users * (n_users - 1) // 2


def max_users(usable_count: int) -> int:
    """Largest N with N(N - 1)/2 <= usable_count, at least 1."""
    if usable_count < 0:
        raise ValueError("Usable pair count must be non-negative")
    n = int((1 + math.isqrt(1 + 8 * usable_count)) // 2)
    while links_needed(n + 1) <= usable_count:
        n += 1
    while n > 1 and links_needed(n) > usable_count:
        n -= 1
    return max(n, 1)


def _balanced_assignment(links, pairs, rates):
    """Hand the best remaining pair to the link whose users hold the
    least total rate, ties in link order."""
    held: Dict[str, float] = {}
    assignment = {}
    open_links = list(links)
    for n in pairs:
        link = min(
            open_links,
            key=lambda ab: held.get(ab[0], 0.0) + held.get(ab[1], 0.0),
        )
        open_links.remove(link)
        assignment[link] = n
        for user in link:
            held[user] = held.get(user, 0.0) + rates.get(n, 0.0)
    return {link: assignment[link] for link in links}


def allocate(
    usable: Sequence[int],
    n_users: int,
    rates: Optional[Mapping[int, float]] = None,
    policy: str = "ordered",
    users: Optional[Sequence[str]] = None,
) -> NetworkPlan:
    """Assign the best usable pairs to every link of an `n_users` network.

    With the ``ordered`` policy the k best pairs go to links in
    lexicographic order. ``balanced`` uses the same k pairs but spreads
    rate evenly across users.

    :param usable: pair indices, best first
    :param n_users: number of users
    :param rates: sifted rate per pair, needed for ``balanced``
    :param policy: ``ordered`` or ``balanced``
    :param users: user identifiers, A, B, C ... by default
    :raises CapacityError: fewer usable pairs than links
    """
    if policy not in POLICIES:
        raise ValueError(f"Unknown allocation policy: {policy}")
    if n_users < 1:
        raise ValueError("Network needs at least one user")

    users = list(users) if users is not None else [to_label(i) for i in range(n_users)]
    if len(users) != n_users or len(set(users)) != n_users:
        raise ValueError("Need one unique identifier per user")

    usable = list(usable)
    needed = links_needed(n_users)
    if needed > len(usable):
        raise CapacityError(
            f"{n_users} users need {needed} pairs, only {len(usable)} usable "
            f"(short by {needed - len(usable)})"
        )

    rates = dict(rates or {})
    links = sorted(itertools.combinations(sorted(users), 2))
    chosen = usable[:needed]
    if policy == "balanced":
        assignment = _balanced_assignment(links, chosen, rates)
    else:
        assignment = dict(zip(links, chosen))

    return NetworkPlan(
        users=sorted(users),
        links=assignment,
        unused_pairs=usable[needed:],
        max_users=max_users(len(usable)),
        rates={n: rates[n] for n in usable if n in rates},
        policy=policy,
    )


def validate_guard_layout(bases: Sequence[int], guard_modes: int = DEFAULT_GUARD_MODES):
    """Check qubit blocks keep `guard_modes` free modes between them."""
    return validate_layout(bases, guard_modes)


class PlanGraph:
    """Undirected graph of a network plan, one edge per link."""

    GRAPH = {"layout": "circo"}
    NODE = {
        "shape": "circle",
        "style": "filled",
        "color": "#5cb85c",
        "fontcolor": "#ffffff",
        "fontname": "Helvetica, Arial, sans-serif",
        "fontsize": "12",
    }
    EDGE = {"fontsize": "10"}

    def __init__(self, plan: NetworkPlan):
        self.plan = plan

    def create_graph(self) -> graphviz.Graph:
        graph = graphviz.Graph(
            name="network", graph_attr=self.GRAPH, node_attr=self.NODE, edge_attr=self.EDGE
        )
        for user in self.plan.users:
            graph.node(user)
        for (a, b), n in self.plan.links.items():
            rate = self.plan.rates.get(n)
            label = f"n={n}" if rate is None else f"n={n}\n{rate:.2f} bit/s"
            graph.edge(a, b, label=label)
        return graph

    def save(self, path) -> str:
        """Write the DOT source, no graphviz executable needed."""
        path = Path(path)
        return self.create_graph().save(filename=path.name, directory=str(path.parent))


def plan_graph(plan: NetworkPlan) -> graphviz.Graph:
    return PlanGraph(plan).create_graph()


class Network:
    """`Network` is a library for planning a fully connected key
    distribution network over the secure frequency pairs of a source.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Get usable pairs")
    def get_usable_pairs(self, metrics: Sequence[LinkMetrics]) -> List[int]:
        pairs = usable_pairs(metrics)
        self.logger.info("%d of %d pairs are usable", len(pairs), len(metrics))
        return pairs

    @keyword("Get max users")
    def get_max_users(self, usable_count: int) -> int:
        return max_users(int(usable_count))

    @keyword("Allocate network")
    def allocate_network(
        self, metrics: Sequence[LinkMetrics], users: int, policy: str = "ordered"
    ) -> NetworkPlan:
        """Plan a network of `users` users from link metrics.

        :param metrics: key metrics of every pair
        :param users: number of users
        :param policy: ``ordered`` or ``balanced``
        """
        self.logger.info("Allocating %s users with %s policy", users, policy)
        rates = {m.n: m.sifted_rate for m in metrics}
        return allocate(usable_pairs(metrics), int(users), rates, policy)

    @keyword("Save network graph")
    def save_network_graph(self, plan: NetworkPlan, path) -> str:
        self.logger.info("Saving network graph to %s", path)
        return PlanGraph(plan).save(path)
