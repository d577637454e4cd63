"""Community detection on pairwise graphs.

Three detectors:

* louvain: greedy modularity optimization (local moves + coarsening).
* eva: attribute-aware variant optimizing alpha*P + (1-alpha)*Q, where a
  community's purity is the product over features of its modal bin-label
  frequency and P averages purity over communities. alpha=0 runs the
  exact louvain objective through the same engine.
* lemon: local seed-set expansion by short random walks, an approximate
  invariant subspace, an l1-penalized linear program, and a conductance
  sweep capped at max_size.

Partitions are crisp (every node exactly one community id, contiguous
from 0); lemon_cover produces one overlapping community per seed word.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .structures import PairwiseGraph

log = logging.getLogger(__name__)

_EPS = 1e-12


@dataclass
class Partition:
    assignment: dict[str, int]
    method: str = "louvain"
    gamma: float = 1.0
    alpha: float | None = None

    def __post_init__(self) -> None:
        ids = sorted(set(self.assignment.values()))
        if ids and ids != list(range(len(ids))):
            remap = {old: new for new, old in enumerate(ids)}
            self.assignment = {w: remap[c] for w, c in self.assignment.items()}

    def __len__(self) -> int:
        return len(set(self.assignment.values()))

    def community_of(self, word: str) -> int:
        return self.assignment[word]

    def communities(self) -> dict[int, set[str]]:
        groups: dict[int, set[str]] = {}
        for word, cid in self.assignment.items():
            groups.setdefault(cid, set()).add(word)
        return groups

    def members(self, word: str) -> set[str]:
        cid = self.assignment[word]
        return {w for w, c in self.assignment.items() if c == cid}

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["word", "community_id"])
            for word in sorted(self.assignment):
                writer.writerow([word, self.assignment[word]])

    @classmethod
    def from_csv(cls, path: str | Path, method: str = "imported") -> "Partition":
        assignment: dict[str, int] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty partition file")
            if [h.strip().lower() for h in header[:2]] != ["word", "community_id"]:
                raise ValueError(f"{path}: expected header word,community_id")
            for record in reader:
                if len(record) < 2:
                    continue
                assignment[record[0].strip().lower()] = int(record[1])
        if not assignment:
            raise ValueError(f"{path}: no assignments")
        return cls(assignment=assignment, method=method)


@dataclass
class Cover:
    """Overlapping communities, one per seed."""

    communities: tuple[frozenset[str], ...]
    seeds: tuple[str, ...]
    _containing: dict[str, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if len(self.communities) != len(self.seeds):
            raise ValueError("one seed per community required")
        for seed, comm in zip(self.seeds, self.communities):
            if seed not in comm:
                raise ValueError(f"seed {seed!r} missing from its community")
        containing: dict[str, list[int]] = {}
        for idx, comm in enumerate(self.communities):
            for word in comm:
                containing.setdefault(word, []).append(idx)
        self._containing = {w: tuple(ix) for w, ix in containing.items()}

    def __len__(self) -> int:
        return len(self.communities)

    def communities_containing(self, word: str) -> tuple[frozenset[str], ...]:
        return tuple(self.communities[i] for i in self._containing.get(word, ()))

    def to_file(self, path: str | Path) -> None:
        """One line per community: seed, then tab-joined sorted members."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for seed, comm in zip(self.seeds, self.communities):
                fh.write("\t".join([seed, *sorted(comm)]) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "Cover":
        seeds, comms = [], []
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, line in enumerate(fh, start=1):
                fields = [f.strip().lower() for f in line.rstrip("\n").split("\t") if f.strip()]
                if not fields:
                    continue
                if len(fields) < 2:
                    raise ValueError(f"{path}:{lineno}: need seed plus members")
                seeds.append(fields[0])
                comms.append(frozenset(fields[1:]))
        if not comms:
            raise ValueError(f"{path}: no communities")
        return cls(communities=tuple(comms), seeds=tuple(seeds))


def modularity(graph: PairwiseGraph, partition, gamma: float = 1.0) -> float:
    """Q = (1/2m) sum_ij [A_ij - gamma k_i k_j / 2m] delta(c_i, c_j)."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if graph.edge_count == 0:
        raise ValueError("modularity undefined on a graph with zero edges")
    assignment = partition.assignment if isinstance(partition, Partition) else dict(partition)
    missing = [w for w in graph.nodes if w not in assignment]
    if missing:
        raise ValueError(f"partition misses {len(missing)} nodes (e.g. {missing[:3]})")
    two_m = 2.0 * graph.edge_count
    internal: dict[int, int] = {}
    for a, b in graph.edges:
        if assignment[a] == assignment[b]:
            internal[assignment[a]] = internal.get(assignment[a], 0) + 1
    volume: dict[int, int] = {}
    for w in graph.nodes:
        volume[assignment[w]] = volume.get(assignment[w], 0) + graph.degree(w)
    q = 0.0
    for cid in set(volume):
        q += 2.0 * internal.get(cid, 0) / two_m - gamma * (volume[cid] / two_m) ** 2
    return q


def quantile_bin_attributes(lexicon, features: Sequence[str], bins: int = 4) -> dict[str, tuple[int, ...]]:
    """Per-feature quantile bin labels for every lexicon word.

    Values equal to a boundary fall in the upper bin; a constant feature
    collapses to a single label.
    """
    if bins < 2:
        raise ValueError("need at least 2 bins")
    words = lexicon.words_sorted()
    labels = {w: [] for w in words}
    probs = [i / bins for i in range(1, bins)]
    for feature in features:
        values = np.array([lexicon.value(w, feature) for w in words])
        bounds = np.quantile(values, probs)
        binned = np.searchsorted(bounds, values, side="right")
        for w, b in zip(words, binned):
            labels[w].append(int(b))
    return {w: tuple(lab) for w, lab in labels.items()}


class _GreedyState:
    """One coarsening level of the louvain/eva engine.

    Degrees follow the weighted convention where a self-loop of weight w
    adds 2w; two_m is invariant across levels.
    """

    def __init__(self, neighbors_w, self_w, labels, sizes, members, gamma, alpha):
        self.neighbors_w = neighbors_w
        self.self_w = self_w
        self.labels = labels
        self.sizes = sizes
        self.members = members
        self.gamma = gamma
        self.alpha = alpha
        self.n = len(neighbors_w)
        self.k = [sum(nbrs.values()) + 2.0 * self_w[i] for i, nbrs in enumerate(neighbors_w)]
        self.two_m = sum(self.k)
        self.comm = list(range(self.n))
        self.tot = list(self.k)
        self.csize = list(sizes)
        if alpha > 0.0:
            self.ccounts = [[Counter(c) for c in labels[i]] for i in range(self.n)]
            self.purity = [self._purity_of(i) for i in range(self.n)]
        else:
            self.ccounts = None
            self.purity = None
        self.live = self.n
        self._s = 0.0

    def _purity_of(self, cid: int) -> float:
        size = self.csize[cid]
        if size <= 0:
            return 0.0
        value = 1.0
        for counter in self.ccounts[cid]:
            value *= max(counter.values()) / size
        return value

    def purity_sum(self) -> float:
        if self.ccounts is None:
            return 0.0
        return sum(self.purity[c] for c in range(self.n) if self.csize[c] > 0)

    def _links_to_communities(self, node: int) -> dict[int, float]:
        d: dict[int, float] = {}
        for nbr, w in self.neighbors_w[node].items():
            cid = self.comm[nbr]
            d[cid] = d.get(cid, 0.0) + w
        return d

    def _purity_after(self, cid: int, node: int, sign: int) -> float:
        """Purity of community cid after adding (sign=+1) / removing (-1) node."""
        size = self.csize[cid] + sign * self.sizes[node]
        if size <= 0:
            return 0.0
        value = 1.0
        for f, counter in enumerate(self.ccounts[cid]):
            best = 0
            node_counts = self.labels[node][f]
            for label in set(counter) | set(node_counts):
                count = counter.get(label, 0) + sign * node_counts.get(label, 0)
                if count > best:
                    best = count
            value *= best / size
        return value

    def one_pass(self, order) -> int:
        moved = 0
        for node in order:
            old = self.comm[node]
            links = self._links_to_communities(node)
            d_old = links.get(old, 0.0)
            tot_old_removed = self.tot[old] - self.k[node]
            candidates = sorted(c for c in links if c != old)
            if not candidates:
                continue
            use_purity = self.ccounts is not None
            if use_purity:
                s_before = self._s
                n_before = self.live
                pur_old_before = self.purity[old]
                pur_old_after = self._purity_after(old, node, -1)
                old_empties = self.csize[old] - self.sizes[node] <= 0

            best_cid = -1
            best_key = None
            for cid in candidates:
                dq = (2.0 * (links[cid] - d_old) / self.two_m
                      - 2.0 * self.gamma * self.k[node] * (self.tot[cid] - tot_old_removed)
                      / (self.two_m ** 2))
                if use_purity:
                    pur_new_before = self.purity[cid]
                    pur_new_after = self._purity_after(cid, node, +1)
                    s_after = s_before - pur_old_before - pur_new_before + pur_new_after
                    if not old_empties:
                        s_after += pur_old_after
                    n_after = n_before - (1 if old_empties else 0)
                    dp = s_after / n_after - s_before / n_before
                    df = self.alpha * dp + (1.0 - self.alpha) * dq
                else:
                    df = dq
                key = (df, dq, -cid)
                if best_key is None or key > best_key:
                    best_key = key
                    best_cid = cid
            df, dq, _ = best_key
            # plateau rule: zero-objective moves accepted when modularity
            # strictly improves (vacuous at alpha=0)
            accept = df > _EPS or (abs(df) <= _EPS and dq > _EPS)
            if not accept:
                continue
            self._apply_move(node, old, best_cid, links)
            moved += 1
        return moved

    def _apply_move(self, node: int, old: int, new: int, links) -> None:
        self.tot[old] -= self.k[node]
        self.tot[new] += self.k[node]
        self.csize[old] -= self.sizes[node]
        self.csize[new] += self.sizes[node]
        self.comm[node] = new
        if self.ccounts is not None:
            for f, node_counts in enumerate(self.labels[node]):
                self.ccounts[old][f].subtract(node_counts)
                self.ccounts[old][f] += Counter()  # drop zero/negative entries
                self.ccounts[new][f].update(node_counts)
            s_delta = -self.purity[old] - self.purity[new]
            self.purity[old] = self._purity_of(old)
            self.purity[new] = self._purity_of(new)
            s_delta += self.purity[old] + self.purity[new]
            self._s += s_delta
            if self.csize[old] <= 0:
                self.live -= 1

    def local_phase(self, rng, max_passes: int = 64) -> int:
        if self.ccounts is not None:
            self._s = self.purity_sum()
        total = 0
        for _ in range(max_passes):
            order = np.arange(self.n)
            rng.shuffle(order)
            moved = self.one_pass(order.tolist())
            total += moved
            if moved == 0:
                return total
        log.warning("local phase hit the pass cap (%d); continuing", max_passes)
        return total

    def coarsen(self) -> "_GreedyState":
        live_ids = sorted({self.comm[i] for i in range(self.n)})
        remap = {cid: j for j, cid in enumerate(live_ids)}
        n_new = len(live_ids)
        neighbors_w = [dict() for _ in range(n_new)]
        self_w = [0.0] * n_new
        sizes = [0] * n_new
        members = [[] for _ in range(n_new)]
        labels = None
        if self.ccounts is not None:
            n_features = len(self.labels[0])
            labels = [[Counter() for _ in range(n_features)] for _ in range(n_new)]
        for i in range(self.n):
            a = remap[self.comm[i]]
            sizes[a] += self.sizes[i]
            members[a].extend(self.members[i])
            self_w[a] += self.self_w[i]
            if labels is not None:
                for f, counts in enumerate(self.labels[i]):
                    labels[a][f].update(counts)
            for j, w in self.neighbors_w[i].items():
                b = remap[self.comm[j]]
                if a == b:
                    if i < j:
                        self_w[a] += w
                else:
                    neighbors_w[a][b] = neighbors_w[a].get(b, 0.0) + w
        return _GreedyState(neighbors_w, self_w, labels, sizes, members, self.gamma, self.alpha)


def _greedy_partition(graph: PairwiseGraph, labels_by_word, alpha: float,
                      gamma: float, seed: int, method: str) -> Partition:
    if graph.node_count == 0:
        raise ValueError("empty graph")
    words = graph.nodes
    index = {w: i for i, w in enumerate(words)}
    neighbors_w = [dict() for _ in words]
    for a, b in graph.edges:
        neighbors_w[index[a]][index[b]] = 1.0
        neighbors_w[index[b]][index[a]] = 1.0
    labels = None
    if alpha > 0.0:
        missing = [w for w in words if w not in labels_by_word]
        if missing:
            raise ValueError(f"attributes missing for {len(missing)} nodes (e.g. {missing[:3]})")
        labels = [[Counter({lab: 1}) for lab in labels_by_word[w]] for w in words]
    state = _GreedyState(
        neighbors_w=neighbors_w,
        self_w=[0.0] * len(words),
        labels=labels,
        sizes=[1] * len(words),
        members=[[i] for i in range(len(words))],
        gamma=gamma,
        alpha=alpha,
    )
    rng = np.random.default_rng(seed)
    while True:
        moved = state.local_phase(rng)
        coarse = state.coarsen()
        if moved == 0 or coarse.n == state.n:
            state = coarse
            break
        state = coarse
    assignment_idx: dict[int, int] = {}
    for cid, group in enumerate(state.members):
        for orig in group:
            assignment_idx[orig] = cid
    # stable ids: communities numbered by their alphabetically first member
    groups: dict[int, list[str]] = {}
    for orig, cid in assignment_idx.items():
        groups.setdefault(cid, []).append(words[orig])
    ordered = sorted(groups.values(), key=min)
    assignment = {}
    for new_id, group in enumerate(ordered):
        for w in group:
            assignment[w] = new_id
    return Partition(assignment=assignment, method=method, gamma=gamma,
                     alpha=alpha if method == "eva" else None)


def louvain(graph: PairwiseGraph, gamma: float = 1.0, seed: int = 0) -> Partition:
    """Greedy modularity partition; Q never falls below the singleton Q."""
    return _greedy_partition(graph, None, 0.0, gamma, seed, "louvain")


def eva(graph: PairwiseGraph, binned_attributes: dict[str, tuple[int, ...]],
        alpha: float = 0.8, gamma: float = 1.0, seed: int = 0) -> Partition:
    """Attribute-aware partition maximizing alpha*P + (1-alpha)*Q."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if alpha == 0.0:
        part = _greedy_partition(graph, None, 0.0, gamma, seed, "eva")
        part.alpha = 0.0
        return part
    return _greedy_partition(graph, binned_attributes, alpha, gamma, seed, "eva")


def partition_purity(partition: Partition, binned_attributes) -> dict[int, float]:
    """Per-community purity: product over features of modal-label frequency."""
    purities = {}
    for cid, members in partition.communities().items():
        size = len(members)
        value = 1.0
        n_features = len(next(iter(binned_attributes.values())))
        for f in range(n_features):
            counts = Counter(binned_attributes[w][f] for w in members)
            value *= max(counts.values()) / size
        purities[cid] = value
    return purities


def eva_objective(graph: PairwiseGraph, partition: Partition, binned_attributes,
                  alpha: float, gamma: float = 1.0) -> float:
    purities = partition_purity(partition, binned_attributes)
    p = sum(purities.values()) / len(purities)
    return alpha * p + (1.0 - alpha) * modularity(graph, partition, gamma)


@dataclass(frozen=True)
class LemonParams:
    max_size: int = 4
    min_size: int = 3
    walk_steps: int = 3
    subspace_dim: int = 3
    sample_cap: int = 512


def _lazy_walk_matrix(adj):
    n = adj.shape[0]
    lazy = (adj + sparse.eye_array(n, format="csr")).tocsr()
    inv_rows = 1.0 / lazy.sum(axis=1)
    return (sparse.diags_array(inv_rows) @ lazy).tocsr()


def lemon(graph: PairwiseGraph, seed_node: str, params: LemonParams = LemonParams(),
          _cache: tuple | None = None) -> frozenset[str]:
    """Local community around seed_node, size <= max_size, by conductance sweep.

    Fully deterministic: the walk starts from the seed indicator vector and
    ranking ties break alphabetically.
    """
    if seed_node not in graph:
        raise KeyError(f"unknown seed {seed_node!r}")
    if graph.degree(seed_node) == 0:
        log.warning("isolated seed %r: returning singleton", seed_node)
        return frozenset({seed_node})
    if _cache is None:
        adj = graph.adjacency_matrix()
        walk = _lazy_walk_matrix(adj)
    else:
        adj, walk = _cache
    n = graph.node_count
    seed_idx = graph.index_of(seed_node)
    p = np.zeros(n)
    p[seed_idx] = 1.0
    for _ in range(params.walk_steps):
        p = p @ walk
    reachable = np.flatnonzero(p > 0)
    if len(reachable) > params.sample_cap:
        top = np.argsort(-p[reachable], kind="stable")[: params.sample_cap]
        reachable = reachable[top]
    if seed_idx not in reachable:
        reachable = np.append(reachable, seed_idx)
    sample = np.sort(reachable)
    sub_words = [graph.nodes[i] for i in sample]
    local_seed = int(np.flatnonzero(sample == seed_idx)[0])

    sub_adj = adj[sample][:, sample].tocsr()
    sub_walk = _lazy_walk_matrix(sub_adj)
    v = np.zeros(len(sample))
    v[local_seed] = 1.0
    for _ in range(params.walk_steps):
        v = v @ sub_walk
    krylov = [v]
    for _ in range(params.subspace_dim - 1):
        krylov.append(krylov[-1] @ sub_walk)
    basis, _ = np.linalg.qr(np.column_stack(krylov))

    y = _sparse_indicator(basis, local_seed)
    if y is None:
        log.warning("linear program failed for seed %r; falling back to walk scores", seed_node)
        y = v

    order = sorted(range(len(sample)), key=lambda i: (-y[i], sub_words[i]))
    ranked = [sub_words[i] for i in order if i != local_seed]
    lo = max(2, min(params.min_size, len(sample)))
    hi = min(params.max_size, len(sample))
    best_set: frozenset[str] | None = None
    best_key = None
    for size in range(lo, hi + 1):
        candidate = frozenset([seed_node, *ranked[: size - 1]])
        key = (graph.conductance(candidate), len(candidate))
        if best_key is None or key < best_key:
            best_key = key
            best_set = candidate
    if best_set is None:
        best_set = frozenset({seed_node})
    return best_set


def _sparse_indicator(basis: np.ndarray, seed_idx: int) -> np.ndarray | None:
    """min 1'y subject to y = basis @ w, y >= 0, y[seed] >= 1."""
    n, d = basis.shape
    c = basis.sum(axis=0)
    a_ub = np.vstack([-basis, -basis[seed_idx]])
    b_ub = np.concatenate([np.zeros(n), [-1.0]])
    result = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * d, method="highs")
    if not result.success:
        return None
    y = basis @ result.x
    y[y < 0] = 0.0
    return y


def lemon_cover(graph: PairwiseGraph, params: LemonParams = LemonParams()) -> Cover:
    """One lemon run per node; every node seeds exactly one community."""
    if graph.node_count == 0:
        raise ValueError("empty graph")
    adj = graph.adjacency_matrix()
    cache = (adj, _lazy_walk_matrix(adj))
    seeds = graph.nodes
    communities = tuple(lemon(graph, s, params, _cache=cache) for s in seeds)
    return Cover(communities=communities, seeds=tuple(seeds))
