import itertools
import logging

import numpy as np
import pytest

from hyperlex import (PairwiseGraph, eva, lemon, lemon_cover, louvain, modularity,
                      quantile_bin_attributes)
from hyperlex.community import (Cover, LemonParams, Partition, eva_objective,
                                partition_purity)
from hyperlex.ingest import Lexicon, LexiconEntry


def two_triangles():
    return PairwiseGraph.from_edges([("a", "b"), ("b", "c"), ("a", "c"),
                                     ("d", "e"), ("e", "f"), ("d", "f"), ("c", "d")])


def modularity_direct(g, assignment, gamma=1.0):
    """Independent direct summation over all node pairs."""
    two_m = 2 * g.edge_count
    q = 0.0
    for i in g.nodes:
        for j in g.nodes:
            if assignment[i] != assignment[j]:
                continue
            a_ij = 1.0 if (min(i, j), max(i, j)) in g.edges else 0.0
            q += a_ij - gamma * g.degree(i) * g.degree(j) / two_m
    return q / two_m


def set_partitions(items):
    """All set partitions (Bell-number many)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [first]] + part[i + 1:]
        yield [[first]] + part


def as_assignment(blocks):
    return {w: i for i, block in enumerate(blocks) for w in block}


def groups_of(partition):
    return set(frozenset(c) for c in partition.communities().values())


def test_modularity_single_community_zero():
    g = two_triangles()
    assignment = {w: 0 for w in g.nodes}
    assert modularity(g, assignment) == pytest.approx(0.0, abs=1e-12)


def test_modularity_singletons_analytic():
    g = two_triangles()
    assignment = {w: i for i, w in enumerate(g.nodes)}
    expected = -sum((g.degree(w) / (2 * g.edge_count)) ** 2 for w in g.nodes)
    assert modularity(g, assignment) == pytest.approx(expected, abs=1e-12)


def test_modularity_two_triangles_direct_oracle():
    g = two_triangles()
    assignment = {"a": 0, "b": 0, "c": 0, "d": 1, "e": 1, "f": 1}
    assert modularity(g, assignment) == pytest.approx(
        modularity_direct(g, assignment), abs=1e-12)
    assert modularity(g, assignment) == pytest.approx(5 / 14, abs=1e-12)


def test_modularity_errors():
    g = PairwiseGraph(nodes=("a", "b"), edges=frozenset())
    with pytest.raises(ValueError):
        modularity(g, {"a": 0, "b": 0})
    g2 = two_triangles()
    with pytest.raises(ValueError):
        modularity(g2, {"a": 0})  # misses nodes
    with pytest.raises(ValueError):
        modularity(g2, {w: 0 for w in g2.nodes}, gamma=0.0)


def test_modularity_bounded():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = 8
        pairs = [(f"n{i}", f"n{j}") for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.4]
        if not pairs:
            continue
        g = PairwiseGraph.from_edges(pairs)
        assignment = {w: int(rng.integers(3)) for w in g.nodes}
        q = modularity(g, assignment)
        assert -1.0 <= q <= 1.0


def test_louvain_two_triangles_is_global_optimum():
    g = two_triangles()
    nodes = list(g.nodes)
    best_q, best_blocks, count = -2.0, None, 0
    for blocks in set_partitions(nodes):
        count += 1
        q = modularity(g, as_assignment(blocks))
        if q > best_q:
            best_q, best_blocks = q, blocks
    assert count == 203  # Bell(6)
    assert set(map(frozenset, best_blocks)) == {frozenset("abc"), frozenset("def")}
    part = louvain(g, seed=0)
    assert groups_of(part) == {frozenset("abc"), frozenset("def")}
    assert modularity(g, part) == pytest.approx(best_q, abs=1e-12)


def test_louvain_complete_graph_single_community():
    g = PairwiseGraph.from_edges(itertools.combinations("abcde", 2))
    part = louvain(g, seed=1)
    assert len(part) == 1


def test_louvain_never_below_singleton_q():
    rng = np.random.default_rng(11)
    for trial in range(5):
        pairs = [(f"n{i}", f"n{j}") for i in range(10) for j in range(i + 1, 10)
                 if rng.random() < 0.3]
        if not pairs:
            continue
        g = PairwiseGraph.from_edges(pairs)
        part = louvain(g, seed=trial)
        singleton_q = modularity(g, {w: i for i, w in enumerate(g.nodes)})
        assert modularity(g, part) >= singleton_q - 1e-12


def test_louvain_disconnected_components_never_merge():
    rng = np.random.default_rng(3)
    for trial in range(5):
        pairs = []
        for prefix in ("x", "y"):
            names = [f"{prefix}{i}" for i in range(6)]
            pairs += [(names[i], names[i + 1]) for i in range(5)]  # keep connected
            pairs += [(names[i], names[j]) for i in range(6) for j in range(i + 1, 6)
                      if rng.random() < 0.4]
        g = PairwiseGraph.from_edges(pairs)
        part = louvain(g, seed=trial)
        for members in part.communities().values():
            prefixes = {w[0] for w in members}
            assert len(prefixes) == 1


def test_louvain_seed_determinism():
    g = two_triangles()
    assert louvain(g, seed=4).assignment == louvain(g, seed=4).assignment


def test_partition_ids_contiguous():
    part = Partition(assignment={"a": 5, "b": 5, "c": 9})
    assert set(part.assignment.values()) == {0, 1}


def test_eva_alpha_zero_reduces_to_louvain():
    g = two_triangles()
    labels = {w: (0,) for w in g.nodes}
    for seed in (0, 1, 2):
        assert eva(g, labels, alpha=0.0, seed=seed).assignment == \
            louvain(g, seed=seed).assignment


def test_eva_alpha_one_aligned_labels_exhaustive_oracle():
    g = two_triangles()
    labels = {w: ((0,) if w in "abc" else (1,)) for w in g.nodes}

    def objective(blocks, alpha):
        purity = []
        for block in blocks:
            counts = {}
            for w in block:
                counts[labels[w][0]] = counts.get(labels[w][0], 0) + 1
            purity.append(max(counts.values()) / len(block))
        p = sum(purity) / len(purity)
        return alpha * p + (1 - alpha) * modularity(g, as_assignment(blocks))

    # lexicographic (objective, modularity) over all 203 partitions
    best = max(set_partitions(list(g.nodes)),
               key=lambda b: (objective(b, 1.0), modularity(g, as_assignment(b))))
    assert set(map(frozenset, best)) == {frozenset("abc"), frozenset("def")}
    part = eva(g, labels, alpha=1.0, seed=2)
    assert groups_of(part) == {frozenset("abc"), frozenset("def")}
    purities = partition_purity(part, labels)
    assert all(p == 1.0 for p in purities.values())


def test_eva_default_alpha_on_aligned_triangles():
    g = two_triangles()
    labels = {w: ((0,) if w in "abc" else (1,)) for w in g.nodes}
    part = eva(g, labels, alpha=0.8, seed=0)
    assert groups_of(part) == {frozenset("abc"), frozenset("def")}


def test_eva_objective_not_below_singletons():
    rng = np.random.default_rng(7)
    for trial in range(4):
        pairs = [(f"n{i}", f"n{j}") for i in range(9) for j in range(i + 1, 9)
                 if rng.random() < 0.35]
        if not pairs:
            continue
        g = PairwiseGraph.from_edges(pairs)
        labels = {w: (int(rng.integers(2)), int(rng.integers(2))) for w in g.nodes}
        part = eva(g, labels, alpha=0.8, seed=trial)
        singles = Partition(assignment={w: i for i, w in enumerate(g.nodes)})
        assert eva_objective(g, part, labels, 0.8) >= \
            eva_objective(g, singles, labels, 0.8) - 1e-9


def test_eva_missing_attributes_fatal():
    g = two_triangles()
    with pytest.raises(ValueError):
        eva(g, {"a": (0,)}, alpha=0.5)


def test_purity_range_and_identity():
    g = two_triangles()
    labels = {w: ((0,) if w in "abc" else (1,)) for w in g.nodes}
    part = Partition(assignment={"a": 0, "b": 0, "c": 0, "d": 1, "e": 1, "f": 1})
    purities = partition_purity(part, labels)
    assert purities == {0: 1.0, 1: 1.0}
    mixed = Partition(assignment={w: 0 for w in g.nodes})
    assert partition_purity(mixed, labels)[0] == pytest.approx(0.5)
    for value in purities.values():
        assert 0.0 < value <= 1.0


def test_quantile_bins():
    entries = {}
    for i, w in enumerate(["aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh"]):
        feats = {f: 5.0 for f in ("valence", "arousal", "dominance", "semantic_size",
                                  "concreteness", "gender", "aoa", "familiarity")}
        feats["valence"] = float(i)
        feats["log_frequency"] = 1.0
        feats["polysemy"] = 2.0
        feats["length"] = 2.0
        entries[w] = LexiconEntry(word=w, features=feats)
    lex = Lexicon(entries=entries)
    bins = quantile_bin_attributes(lex, ["valence", "arousal"])
    valence_labels = [bins[w][0] for w in lex.words_sorted()]
    assert sorted(set(valence_labels)) == [0, 1, 2, 3]
    assert all(valence_labels.count(b) == 2 for b in range(4))  # quartiles balance
    arousal_labels = {bins[w][1] for w in lex.words_sorted()}
    assert len(arousal_labels) == 1  # constant feature collapses
    with pytest.raises(ValueError):
        quantile_bin_attributes(lex, ["valence"], bins=1)


def two_cliques_bridge():
    edges = list(itertools.combinations(["a1", "a2", "a3", "a4"], 2)) + \
        list(itertools.combinations(["b1", "b2", "b3", "b4"], 2)) + [("a1", "b1")]
    return PairwiseGraph.from_edges(edges)


def test_lemon_two_cliques_matches_bruteforce():
    g = two_cliques_bridge()
    best = None
    for r in range(2, 5):
        for sub in itertools.combinations(g.nodes, r):
            if "a2" not in sub:
                continue
            c = g.conductance(set(sub))
            if best is None or c < best[0]:
                best = (c, frozenset(sub))
    got = lemon(g, "a2")
    assert got == best[1] == frozenset({"a1", "a2", "a3", "a4"})
    assert got <= {"a1", "a2", "a3", "a4"}


def test_lemon_isolated_triangle_component():
    g = PairwiseGraph.from_edges([("a", "b"), ("b", "c"), ("a", "c"),
                                  ("x", "y"), ("y", "z"), ("x", "z"), ("z", "w")])
    got = lemon(g, "b")
    assert got <= {"a", "b", "c"}
    assert "b" in got


def test_lemon_isolated_seed_warns(caplog):
    g = PairwiseGraph(nodes=("a", "b", "c"), edges=frozenset({("a", "b")}))
    with caplog.at_level(logging.WARNING):
        got = lemon(g, "c")
    assert got == frozenset({"c"})
    assert any("isolated" in r.message for r in caplog.records)


def test_lemon_size_cap_and_seed_membership():
    rng = np.random.default_rng(9)
    pairs = [(f"n{i}", f"n{j}") for i in range(14) for j in range(i + 1, 14)
             if rng.random() < 0.3]
    g = PairwiseGraph.from_edges(pairs)
    for seed_node in g.nodes:
        got = lemon(g, seed_node)
        assert seed_node in got
        assert len(got) <= 4


def test_lemon_params_defaults():
    params = LemonParams()
    assert (params.max_size, params.min_size, params.walk_steps, params.subspace_dim) \
        == (4, 3, 3, 3)


def test_lemon_cover_structure():
    g = two_cliques_bridge()
    cover = lemon_cover(g)
    assert len(cover) == g.node_count  # one community per seed
    covered = set()
    for comm in cover.communities:
        covered |= comm
    assert covered == set(g.nodes)  # every node in at least one community
    for seed_word, comm in zip(cover.seeds, cover.communities):
        assert seed_word in comm


def test_partition_csv_round_trip(tmp_path):
    part = Partition(assignment={"dog": 0, "cat": 0, "zebra": 1}, method="louvain")
    path = tmp_path / "p.csv"
    part.to_csv(path)
    back = Partition.from_csv(path)
    assert back.assignment == part.assignment


def test_cover_file_round_trip(tmp_path):
    cover = Cover(communities=(frozenset({"dog", "box", "cat"}),
                               frozenset({"dog", "zebra", "elephant"})),
                  seeds=("dog", "dog"))
    path = tmp_path / "c.tsv"
    cover.to_file(path)
    back = Cover.from_file(path)
    assert back.communities == cover.communities
    assert back.seeds == cover.seeds
    assert back.communities_containing("dog") == cover.communities
    assert back.communities_containing("cat") == (frozenset({"dog", "box", "cat"}),)
