"""Directed interaction graphs: who retweeted or replied to whom.

Edges point from the acting user to the author of the content acted
on. Aggregation sums parallel edges into integer weights, optionally
merging the two interaction kinds. Community labels come from a
deterministic, seeded label propagation, and graphs can be exported as
an edge CSV (re-importable) or as GEXF 1.2 for graph tools.
"""

from __future__ import annotations

import csv
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .tweets import Tweet

__all__ = [
    "KIND_REPLY",
    "KIND_RETWEET",
    "InteractionEdge",
    "WeightedGraph",
    "aggregate",
    "export_edges_csv",
    "export_gexf",
    "extract_interactions",
    "import_edges_csv",
    "label_propagation",
    "notable_subgraph",
]

KIND_RETWEET = "retweet"
KIND_REPLY = "reply"

GEXF_NAMESPACE = "http://www.gexf.net/1.2draft"


@dataclass(frozen=True, slots=True)
class InteractionEdge:
    """One observed interaction, traceable to the tweet that caused it."""

    source: str
    target: str
    kind: str
    tweet_id: int

    def __post_init__(self):
        if not self.source or not self.target:
            raise ValueError("edge endpoints must be non-empty screen names")
        if self.kind not in (KIND_RETWEET, KIND_REPLY):
            raise ValueError(f"unknown interaction kind: {self.kind!r}")

    @property
    def is_self_loop(self) -> bool:
        return self.source == self.target


# edge key: (source, target, kind); kind is None once kinds are merged
EdgeKey = tuple[str, str, str | None]


@dataclass
class WeightedGraph:
    """Directed graph with positive integer edge weights."""

    nodes: set[str] = field(default_factory=set)
    edges: dict[EdgeKey, int] = field(default_factory=dict)

    def total_weight(self) -> int:
        return sum(self.edges.values())

    def weighted_degree(self, node: str) -> int:
        """In-weight plus out-weight; a self-loop counts on both sides."""
        total = 0
        for (source, target, _kind), weight in self.edges.items():
            if source == node:
                total += weight
            if target == node:
                total += weight
        return total

    def undirected_adjacency(self) -> dict[str, dict[str, int]]:
        """Neighbor weights with direction and kind collapsed."""
        adjacency: dict[str, dict[str, int]] = {node: {} for node in self.nodes}
        for (source, target, _kind), weight in self.edges.items():
            if source == target:
                adjacency[source][source] = adjacency[source].get(source, 0) + weight
            else:
                adjacency[source][target] = adjacency[source].get(target, 0) + weight
                adjacency[target][source] = adjacency[target].get(source, 0) + weight
        return adjacency


def extract_interactions(tweets: Iterable[Tweet]) -> list[InteractionEdge]:
    """One edge per retweet and one per reply, in input order.

    A single tweet emits at most one edge of each kind. Self-loops are
    kept; InteractionEdge.is_self_loop flags them for callers that want
    to drop self-references before community detection.
    """
    edges = []
    for tweet in tweets:
        if tweet.retweet_of is not None:
            edges.append(
                InteractionEdge(
                    source=tweet.author,
                    target=tweet.retweet_of.original_author,
                    kind=KIND_RETWEET,
                    tweet_id=tweet.id,
                )
            )
        if tweet.reply_to is not None:
            edges.append(
                InteractionEdge(
                    source=tweet.author,
                    target=tweet.reply_to,
                    kind=KIND_REPLY,
                    tweet_id=tweet.id,
                )
            )
    return edges


def aggregate(
    edges: Iterable[InteractionEdge], merge_kinds: bool = False
) -> WeightedGraph:
    """Sum parallel edges into weights; weights add up to the raw edge count."""
    graph = WeightedGraph()
    for edge in edges:
        key = (edge.source, edge.target, None if merge_kinds else edge.kind)
        graph.edges[key] = graph.edges.get(key, 0) + 1
        graph.nodes.add(edge.source)
        graph.nodes.add(edge.target)
    return graph


def _name_order(name: str) -> tuple[str, str]:
    return (name.casefold(), name)


def notable_subgraph(graph: WeightedGraph, top_n: int = 50) -> WeightedGraph:
    """Keep the top_n nodes by weighted degree and the edges among them.

    Degree ties break toward the lexicographically smaller name
    (case-insensitive). Applying the same cut twice is a no-op.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    ranked = sorted(
        graph.nodes,
        key=lambda node: (-graph.weighted_degree(node), *_name_order(node)),
    )
    keep = set(ranked[:top_n])
    return WeightedGraph(
        nodes=keep,
        edges={
            key: weight
            for key, weight in graph.edges.items()
            if key[0] in keep and key[1] in keep
        },
    )


def label_propagation(
    graph: WeightedGraph, seed: int = 42, max_iters: int = 100
) -> dict[str, int]:
    """Deterministic weighted label propagation over the undirected graph.

    Every node starts with its own label; sweeps visit nodes in an
    order reshuffled by a generator seeded with ``seed``, and each node
    adopts the label with the largest summed incident weight, ties
    going to the smallest label. Stops at a fixpoint or after
    ``max_iters`` sweeps. Labels are renumbered 0..C-1 in order of
    first appearance over the sorted node list, and a community can
    never span two connected components.
    """
    nodes = sorted(graph.nodes, key=_name_order)
    if not nodes:
        return {}
    index = {node: i for i, node in enumerate(nodes)}
    adjacency = graph.undirected_adjacency()
    neighbors: list[list[tuple[int, int]]] = [
        [(index[other], weight) for other, weight in adjacency[node].items()]
        for node in nodes
    ]
    labels = list(range(len(nodes)))
    order = list(range(len(nodes)))
    rng = random.Random(seed)
    for _sweep in range(max_iters):
        rng.shuffle(order)
        changed = False
        for i in order:
            if not neighbors[i]:
                continue
            sums: dict[int, int] = {}
            for j, weight in neighbors[i]:
                label = labels[j]
                sums[label] = sums.get(label, 0) + weight
            best = max(sums.values())
            winner = min(label for label, total in sums.items() if total == best)
            if winner != labels[i]:
                labels[i] = winner
                changed = True
        if not changed:
            break
    renumber: dict[int, int] = {}
    communities: dict[str, int] = {}
    for i, node in enumerate(nodes):
        label = labels[i]
        if label not in renumber:
            renumber[label] = len(renumber)
        communities[node] = renumber[label]
    return communities


def _sorted_edge_items(graph: WeightedGraph) -> list[tuple[EdgeKey, int]]:
    return sorted(
        graph.edges.items(),
        key=lambda item: (
            *_name_order(item[0][0]),
            *_name_order(item[0][1]),
            item[0][2] or "",
        ),
    )


def export_edges_csv(graph: WeightedGraph, path: str | Path) -> None:
    """Write "Source,Target,Weight[,Kind]" rows; Kind is omitted when merged.

    Fields are quoted only when they need it. The row order is the
    sorted edge order, so identical graphs always produce identical
    bytes.
    """
    with_kind = any(key[2] is not None for key in graph.edges)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = ["Source", "Target", "Weight"]
        if with_kind:
            header.append("Kind")
        writer.writerow(header)
        for (source, target, kind), weight in _sorted_edge_items(graph):
            row = [source, target, weight]
            if with_kind:
                row.append(kind or "")
            writer.writerow(row)


def import_edges_csv(path: str | Path) -> WeightedGraph:
    """Rebuild a WeightedGraph from an exported edge CSV."""
    graph = WeightedGraph()
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or header[:3] != ["Source", "Target", "Weight"]:
            raise ValueError(f"not an edge CSV: {path}")
        with_kind = len(header) > 3 and header[3] == "Kind"
        for row in reader:
            if not row:
                continue
            source, target, weight = row[0], row[1], int(row[2])
            kind = row[3] if with_kind and len(row) > 3 and row[3] else None
            key = (source, target, kind)
            graph.edges[key] = graph.edges.get(key, 0) + weight
            graph.nodes.add(source)
            graph.nodes.add(target)
    return graph


def export_gexf(
    graph: WeightedGraph, communities: dict[str, int], path: str | Path
) -> None:
    """Write GEXF 1.2 XML with a "community" integer attribute per node.

    Edge weights ride on the standard ``weight`` edge attribute; when
    the graph still distinguishes interaction kinds, a string "kind"
    edge attribute is declared and filled. Output is fully sorted, so
    equal inputs produce identical bytes.
    """
    missing = graph.nodes - communities.keys()
    if missing:
        raise ValueError(f"no community for node(s): {sorted(missing)[:3]}")
    with_kind = any(key[2] is not None for key in graph.edges)

    ET.register_namespace("", GEXF_NAMESPACE)
    ns = f"{{{GEXF_NAMESPACE}}}"
    root = ET.Element(f"{ns}gexf", {"version": "1.2"})
    meta = ET.SubElement(root, f"{ns}meta")
    ET.SubElement(meta, f"{ns}creator").text = "eventpulse"
    graph_el = ET.SubElement(
        root, f"{ns}graph", {"defaultedgetype": "directed", "mode": "static"}
    )
    node_attrs = ET.SubElement(graph_el, f"{ns}attributes", {"class": "node"})
    ET.SubElement(
        node_attrs,
        f"{ns}attribute",
        {"id": "community", "title": "community", "type": "integer"},
    )
    if with_kind:
        edge_attrs = ET.SubElement(graph_el, f"{ns}attributes", {"class": "edge"})
        ET.SubElement(
            edge_attrs,
            f"{ns}attribute",
            {"id": "kind", "title": "kind", "type": "string"},
        )

    nodes_el = ET.SubElement(graph_el, f"{ns}nodes")
    for node in sorted(graph.nodes, key=_name_order):
        node_el = ET.SubElement(nodes_el, f"{ns}node", {"id": node, "label": node})
        values = ET.SubElement(node_el, f"{ns}attvalues")
        ET.SubElement(
            values,
            f"{ns}attvalue",
            {"for": "community", "value": str(communities[node])},
        )

    edges_el = ET.SubElement(graph_el, f"{ns}edges")
    for edge_id, ((source, target, kind), weight) in enumerate(
        _sorted_edge_items(graph)
    ):
        edge_el = ET.SubElement(
            edges_el,
            f"{ns}edge",
            {
                "id": str(edge_id),
                "source": source,
                "target": target,
                "weight": str(weight),
            },
        )
        if with_kind and kind is not None:
            values = ET.SubElement(edge_el, f"{ns}attvalues")
            ET.SubElement(values, f"{ns}attvalue", {"for": "kind", "value": kind})

    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    tree.write(path, encoding="utf-8", xml_declaration=True)
