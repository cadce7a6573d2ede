from collections import deque

import networkx as nx
import pytest

from conftest import make_tweet
from eventpulse.graph import (
    KIND_REPLY,
    KIND_RETWEET,
    InteractionEdge,
    WeightedGraph,
    aggregate,
    export_edges_csv,
    export_gexf,
    extract_interactions,
    import_edges_csv,
    label_propagation,
    notable_subgraph,
)


def undirected(pairs: dict[tuple[str, str], int]) -> WeightedGraph:
    """Build a kind-merged graph from {(source, target): weight}."""
    graph = WeightedGraph()
    for (source, target), weight in pairs.items():
        graph.edges[(source, target, None)] = weight
        graph.nodes.add(source)
        graph.nodes.add(target)
    return graph


def triangle(a: str, b: str, c: str, weight: int) -> dict[tuple[str, str], int]:
    return {(a, b): weight, (b, c): weight, (a, c): weight}


class TestExtraction:
    def test_edges_in_input_order_with_provenance(self):
        tweets = [
            make_tweet(1, author="ben", retweet_of=(100, "amaia")),
            make_tweet(2, author="carla", reply_to="amaia"),
            make_tweet(3, author="dani", retweet_of=(100, "amaia"), reply_to="ben"),
        ]
        edges = extract_interactions(tweets)
        assert [(e.source, e.target, e.kind, e.tweet_id) for e in edges] == [
            ("ben", "amaia", KIND_RETWEET, 1),
            ("carla", "amaia", KIND_REPLY, 2),
            ("dani", "amaia", KIND_RETWEET, 3),
            ("dani", "ben", KIND_REPLY, 3),
        ]

    def test_edge_count_identity(self):
        tweets = [
            make_tweet(1, author="a", retweet_of=(9, "b")),
            make_tweet(2, author="a"),
            make_tweet(3, author="a", reply_to="b"),
        ]
        edges = extract_interactions(tweets)
        retweets = sum(1 for t in tweets if t.retweet_of is not None)
        replies = sum(1 for t in tweets if t.reply_to is not None)
        assert len(edges) == retweets + replies

    def test_self_reply_is_flagged(self):
        edges = extract_interactions([make_tweet(1, author="solo", reply_to="solo")])
        assert edges[0].is_self_loop

    def test_edge_validation(self):
        with pytest.raises(ValueError):
            InteractionEdge(source="", target="b", kind=KIND_REPLY, tweet_id=1)
        with pytest.raises(ValueError):
            InteractionEdge(source="a", target="b", kind="quote", tweet_id=1)


class TestAggregate:
    def edges(self):
        return [
            InteractionEdge("x", "y", KIND_RETWEET, 1),
            InteractionEdge("x", "y", KIND_RETWEET, 2),
            InteractionEdge("x", "y", KIND_REPLY, 3),
            InteractionEdge("y", "x", KIND_RETWEET, 4),
        ]

    def test_kinds_kept_apart_by_default(self):
        graph = aggregate(self.edges())
        assert graph.edges == {
            ("x", "y", KIND_RETWEET): 2,
            ("x", "y", KIND_REPLY): 1,
            ("y", "x", KIND_RETWEET): 1,
        }
        assert graph.nodes == {"x", "y"}

    def test_merged_kinds(self):
        graph = aggregate(self.edges(), merge_kinds=True)
        assert graph.edges == {("x", "y", None): 3, ("y", "x", None): 1}

    def test_weight_sum_equals_edge_count(self):
        edges = self.edges()
        assert aggregate(edges).total_weight() == len(edges)
        assert aggregate(edges, merge_kinds=True).total_weight() == len(edges)

    def test_weighted_degree_counts_self_loops_twice(self):
        graph = undirected({("n", "n"): 3, ("n", "m"): 1})
        assert graph.weighted_degree("n") == 7
        assert graph.weighted_degree("m") == 1

    def test_undirected_adjacency_folds_directions(self):
        graph = aggregate(self.edges())
        adjacency = graph.undirected_adjacency()
        assert adjacency["x"]["y"] == 4
        assert adjacency["y"]["x"] == 4


class TestNotableSubgraph:
    def star(self):
        return aggregate(
            [
                InteractionEdge("hub", "l1", KIND_RETWEET, 1),
                InteractionEdge("hub", "l1", KIND_RETWEET, 2),
                InteractionEdge("hub", "l1", KIND_RETWEET, 3),
                InteractionEdge("l2", "hub", KIND_REPLY, 4),
                InteractionEdge("l2", "hub", KIND_REPLY, 5),
                InteractionEdge("hub", "l3", KIND_RETWEET, 6),
                InteractionEdge("l4", "hub", KIND_REPLY, 7),
                InteractionEdge("l5", "hub", KIND_RETWEET, 8),
            ]
        )

    def test_cut_keeps_highest_degree_nodes(self):
        cut = notable_subgraph(self.star(), top_n=3)
        assert cut.nodes == {"hub", "l1", "l2"}
        assert set(cut.edges) == {
            ("hub", "l1", KIND_RETWEET),
            ("l2", "hub", KIND_REPLY),
        }

    def test_degree_ties_break_alphabetically(self):
        cut = notable_subgraph(self.star(), top_n=4)
        assert cut.nodes == {"hub", "l1", "l2", "l3"}

    def test_idempotent(self):
        once = notable_subgraph(self.star(), top_n=3)
        twice = notable_subgraph(once, top_n=3)
        assert once == twice

    def test_top_n_wider_than_graph(self):
        graph = self.star()
        assert notable_subgraph(graph, top_n=100) == graph

    def test_top_n_validated(self):
        with pytest.raises(ValueError):
            notable_subgraph(self.star(), top_n=0)


BRIDGED = undirected(
    {
        **triangle("a", "b", "c", 2),
        **triangle("d", "e", "f", 2),
        ("c", "d"): 1,
    }
)


class TestLabelPropagation:
    def test_empty_graph(self):
        assert label_propagation(WeightedGraph()) == {}

    def test_isolated_nodes_stay_alone(self):
        graph = undirected({("a", "b"): 1})
        graph.nodes.add("loner")
        communities = label_propagation(graph)
        assert communities["a"] == communities["b"]
        assert communities["loner"] != communities["a"]

    def test_disjoint_triangles_split(self):
        graph = undirected({**triangle("a", "b", "c", 1), **triangle("d", "e", "f", 1)})
        for seed in range(10):
            communities = label_propagation(graph, seed=seed)
            assert communities["a"] == communities["b"] == communities["c"]
            assert communities["d"] == communities["e"] == communities["f"]
            assert communities["a"] != communities["d"]

    def test_bridged_triangles_split_for_any_seed(self):
        for seed in range(30):
            communities = label_propagation(BRIDGED, seed=seed)
            assert communities == {
                "a": 0,
                "b": 0,
                "c": 0,
                "d": 1,
                "e": 1,
                "f": 1,
            }, f"seed {seed}"

    def test_bridged_triangles_can_never_merge(self):
        """Exhaust every reachable label state, not just sampled seeds.

        The update rule is re-implemented here from scratch; starting
        from all-distinct labels we apply every possible single-node
        update breadth-first and check that no reachable state is fully
        merged and every reachable fixpoint is the two-triangle split.
        """
        names = sorted(BRIDGED.nodes)
        position = {name: i for i, name in enumerate(names)}
        neighbors: list[list[tuple[int, int]]] = [[] for _ in names]
        for (source, target, _), weight in BRIDGED.edges.items():
            neighbors[position[source]].append((position[target], weight))
            neighbors[position[target]].append((position[source], weight))

        def forced(labels: tuple[int, ...], i: int) -> int:
            sums: dict[int, int] = {}
            for j, weight in neighbors[i]:
                sums[labels[j]] = sums.get(labels[j], 0) + weight
            best = max(sums.values())
            return min(label for label, total in sums.items() if total == best)

        start = tuple(range(len(names)))
        seen = {start}
        frontier = deque([start])
        fixpoints = []
        while frontier:
            state = frontier.popleft()
            moved = False
            for i in range(len(names)):
                winner = forced(state, i)
                if winner == state[i]:
                    continue
                moved = True
                nxt = tuple(
                    winner if k == i else state[k] for k in range(len(names))
                )
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
            assert len(set(state)) > 1, f"fully merged state reachable: {state}"
            if not moved:
                fixpoints.append(state)
        assert fixpoints
        left = {position[n] for n in ("a", "b", "c")}
        for state in fixpoints:
            left_labels = {state[i] for i in left}
            right_labels = {state[i] for i in range(6) if i not in left}
            assert len(left_labels) == 1
            assert len(right_labels) == 1
            assert left_labels != right_labels

    def test_same_seed_same_answer(self):
        first = label_propagation(BRIDGED, seed=7)
        second = label_propagation(BRIDGED, seed=7)
        assert first == second

    def test_labels_are_contiguous_from_zero(self):
        graph = undirected(
            {**triangle("a", "b", "c", 1), **triangle("x", "y", "z", 1), ("m", "n"): 1}
        )
        communities = label_propagation(graph)
        assert set(communities.values()) == set(range(len(set(communities.values()))))

    def test_communities_stay_inside_components(self):
        graph = undirected(
            {("a", "b"): 1, ("b", "c"): 2, ("x", "y"): 3, ("p", "q"): 1}
        )
        communities = label_propagation(graph, seed=3)
        assert communities["x"] == communities["y"]
        assert communities["p"] == communities["q"]
        component_of = {"a": 0, "b": 0, "c": 0, "x": 1, "y": 1, "p": 2, "q": 2}
        by_label: dict[int, set[int]] = {}
        for node, label in communities.items():
            by_label.setdefault(label, set()).add(component_of[node])
        for components in by_label.values():
            assert len(components) == 1


class TestEdgeCsv:
    def test_exact_bytes_with_kinds(self, tmp_path):
        graph = aggregate(
            [
                InteractionEdge("x", "y", KIND_RETWEET, 1),
                InteractionEdge("x", "y", KIND_RETWEET, 2),
                InteractionEdge("x", "y", KIND_REPLY, 3),
                InteractionEdge("y", "x", KIND_RETWEET, 4),
            ]
        )
        out = tmp_path / "edges.csv"
        export_edges_csv(graph, out)
        assert out.read_bytes() == (
            b"Source,Target,Weight,Kind\n"
            b"x,y,1,reply\n"
            b"x,y,2,retweet\n"
            b"y,x,1,retweet\n"
        )

    def test_exact_bytes_merged(self, tmp_path):
        graph = undirected({("x", "y"): 3, ("y", "x"): 1})
        out = tmp_path / "edges.csv"
        export_edges_csv(graph, out)
        assert out.read_bytes() == b"Source,Target,Weight\nx,y,3\ny,x,1\n"

    def test_empty_graph_is_header_only(self, tmp_path):
        out = tmp_path / "edges.csv"
        export_edges_csv(WeightedGraph(), out)
        assert out.read_bytes() == b"Source,Target,Weight\n"

    def test_names_needing_quotes(self, tmp_path):
        graph = undirected({("ha,na", "b"): 1})
        out = tmp_path / "edges.csv"
        export_edges_csv(graph, out)
        assert b'"ha,na",b,1\n' in out.read_bytes()
        assert import_edges_csv(out).nodes == {"ha,na", "b"}

    def test_round_trip(self, tmp_path):
        graph = aggregate(
            [
                InteractionEdge("x", "y", KIND_RETWEET, 1),
                InteractionEdge("y", "x", KIND_REPLY, 2),
                InteractionEdge("z", "z", KIND_REPLY, 3),
            ]
        )
        out = tmp_path / "edges.csv"
        export_edges_csv(graph, out)
        back = import_edges_csv(out)
        assert back.edges == graph.edges
        assert back.nodes == graph.nodes

    def test_import_rejects_foreign_csv(self, tmp_path):
        out = tmp_path / "other.csv"
        out.write_text("id,latitude,longitude\n1,2,3\n")
        with pytest.raises(ValueError):
            import_edges_csv(out)

    def test_import_sums_repeated_rows(self, tmp_path):
        out = tmp_path / "edges.csv"
        out.write_text("Source,Target,Weight\na,b,1\na,b,2\n")
        assert import_edges_csv(out).edges == {("a", "b", None): 3}


class TestGexf:
    def fixture(self):
        graph = aggregate(
            [
                InteractionEdge("Ane", "ben", KIND_RETWEET, 1),
                InteractionEdge("Ane", "ben", KIND_RETWEET, 2),
                InteractionEdge("ben", "Ane", KIND_REPLY, 3),
                InteractionEdge("carla", "carla", KIND_REPLY, 4),
            ]
        )
        communities = label_propagation(graph)
        return graph, communities

    def test_structure_is_valid(self, tmp_path, gexf_checker):
        graph, communities = self.fixture()
        out = tmp_path / "graph.gexf"
        export_gexf(graph, communities, out)
        assert gexf_checker(out) == []

    def test_merged_structure_is_valid(self, tmp_path, gexf_checker):
        graph = undirected({("a", "b"): 2, ("b", "a"): 1})
        out = tmp_path / "graph.gexf"
        export_gexf(graph, label_propagation(graph), out)
        assert gexf_checker(out) == []

    def test_networkx_reads_it_back(self, tmp_path):
        graph, communities = self.fixture()
        out = tmp_path / "graph.gexf"
        export_gexf(graph, communities, out)
        loaded = nx.read_gexf(out)
        assert set(loaded.nodes) == graph.nodes
        for node in graph.nodes:
            assert loaded.nodes[node]["community"] == communities[node]
        weights: dict[tuple[str, str, str | None], int] = {}
        for source, target, data in loaded.edges(data=True):
            key = (source, target, data.get("kind"))
            weights[key] = weights.get(key, 0) + int(data["weight"])
        assert weights == graph.edges

    def test_byte_determinism(self, tmp_path):
        graph, communities = self.fixture()
        first = tmp_path / "one.gexf"
        second = tmp_path / "two.gexf"
        export_gexf(graph, communities, first)
        export_gexf(graph, communities, second)
        assert first.read_bytes() == second.read_bytes()

    def test_missing_community_is_rejected(self, tmp_path):
        graph = undirected({("a", "b"): 1})
        with pytest.raises(ValueError):
            export_gexf(graph, {"a": 0}, tmp_path / "graph.gexf")

    def test_empty_graph_is_still_valid(self, tmp_path, gexf_checker):
        out = tmp_path / "graph.gexf"
        export_gexf(WeightedGraph(), {}, out)
        assert gexf_checker(out) == []
