"""Pairwise graphs and hypergraphs built from free-association rows.

Four pairwise construction rules are supported:

* ``r1``     cue linked to the first response only
* ``r123``   cue linked to each response
* ``chain``  consecutive links cue-R1, R1-R2, R2-R3
* ``clique`` all pairs among cue and responses

All pairwise graphs are simple and undirected: self-loops are dropped and
duplicate pairs collapse. The hypergraph keeps one hyperedge per response
instance ({cue} union responses), a multiset unless deduplication is
requested. Node sets consist of words that actually appear in some edge
or hyperedge.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .ingest import FilteredDataset, ResponseRow, ResponseTable

log = logging.getLogger(__name__)

PAIRWISE_STRATEGIES = ("r1", "r123", "chain", "clique")


def _rows_of(source) -> tuple[ResponseRow, ...]:
    if isinstance(source, FilteredDataset):
        return source.responses.rows
    if isinstance(source, ResponseTable):
        return source.rows
    return tuple(source)


@dataclass
class PairwiseGraph:
    """Simple undirected graph with a stable sorted node order."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    construction: str = "custom"
    _adjacency: dict[str, set[str]] = field(default_factory=dict, repr=False)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._index = {w: i for i, w in enumerate(self.nodes)}
        adj: dict[str, set[str]] = {w: set() for w in self.nodes}
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop {a!r}")
            if a not in adj or b not in adj:
                raise ValueError(f"edge endpoint outside node set: {(a, b)}")
            adj[a].add(b)
            adj[b].add(a)
        self._adjacency = adj

    @classmethod
    def from_edges(cls, pairs: Iterable[tuple[str, str]], construction: str = "custom",
                   extra_nodes: Iterable[str] = ()) -> "PairwiseGraph":
        edges = set()
        nodes = set(extra_nodes)
        for a, b in pairs:
            if a == b:
                continue
            lo, hi = (a, b) if a < b else (b, a)
            edges.add((lo, hi))
            nodes.add(a)
            nodes.add(b)
        return cls(nodes=tuple(sorted(nodes)), edges=frozenset(edges), construction=construction)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def __contains__(self, node: str) -> bool:
        return node in self._adjacency

    def index_of(self, node: str) -> int:
        return self._index[node]

    def neighbors(self, node: str) -> set[str]:
        if node not in self._adjacency:
            raise KeyError(f"unknown node {node!r}")
        return set(self._adjacency[node])

    def degree(self, node: str) -> int:
        if node not in self._adjacency:
            raise KeyError(f"unknown node {node!r}")
        return len(self._adjacency[node])

    def degrees(self) -> dict[str, int]:
        return {w: len(nbrs) for w, nbrs in self._adjacency.items()}

    def volume(self, nodes: Iterable[str]) -> int:
        """Sum of degrees over the given nodes."""
        return sum(self.degree(w) for w in nodes)

    def cut_size(self, nodes: Iterable[str]) -> int:
        inside = set(nodes)
        cut = 0
        for w in inside:
            for nbr in self._adjacency[w]:
                if nbr not in inside:
                    cut += 1
        return cut

    def conductance(self, nodes: Iterable[str]) -> float:
        """cut / min(vol(S), vol(V-S)); a zero cut gives 0, empty sides give 1."""
        inside = set(nodes)
        vol_in = self.volume(inside)
        vol_out = 2 * self.edge_count - vol_in
        cut = self.cut_size(inside)
        if cut == 0:
            return 0.0
        denom = min(vol_in, vol_out)
        if denom == 0:
            return 1.0
        return cut / denom

    def subgraph(self, nodes: Iterable[str]) -> "PairwiseGraph":
        keep = set(nodes)
        pairs = [(a, b) for a, b in self.edges if a in keep and b in keep]
        return PairwiseGraph.from_edges(
            pairs, construction=self.construction, extra_nodes=keep & set(self.nodes)
        )

    def connected_components(self) -> list[set[str]]:
        seen: set[str] = set()
        components = []
        for start in self.nodes:
            if start in seen:
                continue
            stack = [start]
            comp = {start}
            seen.add(start)
            while stack:
                current = stack.pop()
                for nbr in self._adjacency[current]:
                    if nbr not in comp:
                        comp.add(nbr)
                        seen.add(nbr)
                        stack.append(nbr)
            components.append(comp)
        return components

    def adjacency_matrix(self) -> sparse.csr_array:
        """Binary adjacency in sorted node order."""
        n = len(self.nodes)
        rows, cols = [], []
        for a, b in self.edges:
            i, j = self._index[a], self._index[b]
            rows.extend((i, j))
            cols.extend((j, i))
        data = np.ones(len(rows), dtype=float)
        return sparse.csr_array((data, (rows, cols)), shape=(n, n))

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(["word1", "word2"])
            for a, b in sorted(self.edges):
                writer.writerow([a, b])

    @classmethod
    def from_tsv(cls, path: str | Path, construction: str = "imported") -> "PairwiseGraph":
        pairs = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, delimiter="\t")
            for record in reader:
                if not record or record[0].startswith("#"):
                    continue
                if record[:2] == ["word1", "word2"]:
                    continue
                if len(record) < 2:
                    raise ValueError(f"{path}: edge rows need two columns, got {record!r}")
                pairs.append((record[0].strip().lower(), record[1].strip().lower()))
        return cls.from_edges(pairs, construction=construction)


@dataclass(frozen=True)
class StarEgo:
    """All hyperedges containing a center word, in construction order."""

    center: str
    hyperedges: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        for edge in self.hyperedges:
            if self.center not in edge:
                raise ValueError(f"{self.center!r} missing from its own star member")

    def __len__(self) -> int:
        return len(self.hyperedges)


@dataclass
class Hypergraph:
    """Multiset of hyperedges (node sets, sizes 2..4) over a sorted node order."""

    nodes: tuple[str, ...]
    hyperedges: tuple[frozenset[str], ...]
    _incidence: dict[str, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        node_set = set(self.nodes)
        incidence: dict[str, list[int]] = {w: [] for w in self.nodes}
        for idx, edge in enumerate(self.hyperedges):
            if len(edge) < 2:
                raise ValueError(f"hyperedge {set(edge)} smaller than 2")
            if not edge <= node_set:
                raise ValueError(f"hyperedge {set(edge)} outside node set")
            for w in edge:
                incidence[w].append(idx)
        self._incidence = {w: tuple(ix) for w, ix in incidence.items()}

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.hyperedges)

    def __contains__(self, node: str) -> bool:
        return node in self._incidence

    def star_ego(self, node: str) -> StarEgo:
        if node not in self._incidence:
            raise KeyError(f"unknown node {node!r}")
        members = tuple(self.hyperedges[i] for i in self._incidence[node])
        return StarEgo(center=node, hyperedges=members)

    def to_tsv(self, path: str | Path) -> None:
        """One hyperedge per line, members tab-joined in sorted order."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for edge in self.hyperedges:
                fh.write("\t".join(sorted(edge)) + "\n")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "Hypergraph":
        edges = []
        nodes: set[str] = set()
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, line in enumerate(fh, start=1):
                words = [w.strip().lower() for w in line.rstrip("\n").split("\t") if w.strip()]
                if not words:
                    continue
                edge = frozenset(words)
                if len(edge) < 2:
                    raise ValueError(f"{path}:{lineno}: hyperedge smaller than 2")
                edges.append(edge)
                nodes.update(edge)
        if not edges:
            raise ValueError(f"{path}: no hyperedges")
        return cls(nodes=tuple(sorted(nodes)), hyperedges=tuple(edges))


def ego_neighborhood(graph: PairwiseGraph, node: str) -> set[str]:
    """Direct neighbors plus the node itself; |ego| - 1 = degree."""
    return graph.neighbors(node) | {node}


def _row_pairs(row: ResponseRow, strategy: str) -> Iterable[tuple[str, str]]:
    words = [row.cue, *row.responses]
    if strategy == "r1":
        yield (row.cue, row.responses[0])
    elif strategy == "r123":
        for resp in row.responses:
            yield (row.cue, resp)
    elif strategy == "chain":
        for a, b in zip(words, words[1:]):
            yield (a, b)
    elif strategy == "clique":
        # dedup within the row so a repeated response cannot pair with itself
        unique = sorted(set(words))
        yield from combinations(unique, 2)
    else:
        raise ValueError(f"unknown pairwise strategy {strategy!r}")


def build_pairwise(responses, strategy: str, dedup_flag: bool = False) -> PairwiseGraph:
    """Build the simple undirected graph for one construction rule.

    dedup_flag collapses repeated (cue, responses) instances first; the
    resulting edge set is unchanged (graphs are simple either way), so the
    flag only matters for parity with build_hypergraph.
    """
    strategy = strategy.strip().lower()
    if strategy not in PAIRWISE_STRATEGIES:
        raise ValueError(f"unknown pairwise strategy {strategy!r}; use one of {PAIRWISE_STRATEGIES}")
    rows = _rows_of(responses)
    if not rows:
        raise ValueError("empty response table")
    if dedup_flag:
        rows = tuple(dict.fromkeys(rows))
    pairs: list[tuple[str, str]] = []
    for row in rows:
        pairs.extend(_row_pairs(row, strategy))
    graph = PairwiseGraph.from_edges(pairs, construction=strategy)
    log.info("built %s graph: %d nodes, %d edges", strategy, graph.node_count, graph.edge_count)
    return graph


def build_hypergraph(responses, dedup_flag: bool = False) -> Hypergraph:
    """One hyperedge per response instance: {cue} union responses.

    Hyperedges that shrink below size 2 (cue repeated by every response)
    are dropped. With dedup_flag, identical node sets collapse to one.
    """
    rows = _rows_of(responses)
    if not rows:
        raise ValueError("empty response table")
    edges: list[frozenset[str]] = []
    dropped = 0
    for row in rows:
        edge = frozenset(row.words())
        if len(edge) < 2:
            dropped += 1
            continue
        edges.append(edge)
    if dedup_flag:
        edges = list(dict.fromkeys(edges))
    if not edges:
        raise ValueError("no hyperedges of size >= 2")
    if dropped:
        log.warning("dropped %d degenerate hyperedges (size < 2)", dropped)
    nodes = tuple(sorted(set().union(*edges)))
    hg = Hypergraph(nodes=nodes, hyperedges=tuple(edges))
    log.info("built hypergraph: %d nodes, %d hyperedges", hg.node_count, hg.edge_count)
    return hg


def structure_counts(responses, dedup_flag: bool = False) -> dict[str, dict[str, int]]:
    """Node/edge counts for every construction, for reporting."""
    counts = {}
    for strategy in PAIRWISE_STRATEGIES:
        graph = build_pairwise(responses, strategy, dedup_flag)
        counts[strategy] = {"nodes": graph.node_count, "edges": graph.edge_count}
    hg = build_hypergraph(responses, dedup_flag)
    counts["hypergraph"] = {"nodes": hg.node_count, "edges": hg.edge_count}
    return counts
