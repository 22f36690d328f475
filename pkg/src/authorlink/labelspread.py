"""Co-authorship graph construction and label spreading over it.

Authors are nodes; an edge weight counts the distinct publications two
authors share. Seed authors carry a known field label at the chosen
granularity; spreading diffuses those labels along the symmetrically
normalized graph

    F(t+1) = alpha * S @ F(t) + (1 - alpha) * Y,   F(0) = Y

with S = D^-1/2 W D^-1/2, until successive iterates differ by at most `tol`
in the entrywise max norm or the sweep budget runs out. The fixed point has
the closed form F* = (1 - alpha) (I - alpha S)^-1 Y, implemented densely as
a cross-check for small graphs.

A candidate is accepted when the class spread onto their node equals the
registry record's own field, projected to the same granularity.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .ingest import SeedAlignment
from .model import AuthorProfile, Decision, Method, RegistryRecord, Verdict
from .taxonomy import Granularity, project

logger = logging.getLogger(__name__)


class ShapeError(ValueError):
    """Matrix dimensions that do not line up."""


class TooLarge(ValueError):
    """Graph too large for the dense closed-form solver."""


class NodeNotFound(KeyError):
    """Author identifier absent from the graph."""


@dataclass(frozen=True)
class CoauthorGraph:
    """Undirected weighted co-authorship graph.

    Includes every profile auid plus every co-author auid mentioned on any
    publication, so candidates without their own profile line can still
    receive label mass.
    """

    auids: tuple[str, ...]
    index: dict[str, int]
    W: sparse.csr_matrix

    @property
    def n_nodes(self) -> int:
        return len(self.auids)


def build_graph(profiles: Iterable[AuthorProfile], binary: bool = False) -> CoauthorGraph:
    """Count distinct shared publications per author pair.

    A paper listed in both endpoints' profiles contributes one, not two: the
    pair's publication set is keyed by pub_id. With `binary=True` any
    co-authorship collapses to weight 1.
    """
    profiles = list(profiles)
    nodes: list[str] = []
    index: dict[str, int] = {}

    def node_id(auid: str) -> int:
        if auid not in index:
            index[auid] = len(nodes)
            nodes.append(auid)
        return index[auid]

    for profile in profiles:
        node_id(profile.auid)
    edge_pubs: dict[tuple[int, int], set[str]] = {}
    for profile in profiles:
        i = index[profile.auid]
        for pub in profile.publications:
            for coauthor in pub.coauthor_auids:
                if coauthor == profile.auid:
                    continue
                j = node_id(coauthor)
                key = (i, j) if i < j else (j, i)
                edge_pubs.setdefault(key, set()).add(pub.pub_id)

    n = len(nodes)
    rows, cols, vals = [], [], []
    for (i, j), pubs in edge_pubs.items():
        w = 1.0 if binary else float(len(pubs))
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    W = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return CoauthorGraph(auids=tuple(nodes), index=index, W=W)


def normalize(W: sparse.spmatrix) -> sparse.csr_matrix:
    """Symmetric normalization S = D^-1/2 W D^-1/2.

    Zero-degree nodes keep all-zero rows and columns instead of dividing by
    zero; they receive no spread mass and keep whatever Y says.
    """
    if W.shape[0] != W.shape[1]:
        raise ShapeError(f"adjacency must be square, got {W.shape}")
    W = W.tocsr().astype(np.float64)
    degrees = np.asarray(W.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(degrees)
    nz = degrees > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(degrees[nz])
    D = sparse.diags(inv_sqrt)
    return (D @ W @ D).tocsr()


@dataclass(frozen=True)
class SpreadParams:
    """Iteration settings; defaults follow the evaluated configuration."""

    alpha: float = 0.2
    tol: float = 0.001
    max_iter: int = 30

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")


@dataclass(frozen=True)
class SeedLabels:
    """One-hot seed matrix Y over the graph's nodes.

    `classes` is sorted, so column order (and therefore tie-breaking by
    smallest index) is reproducible.
    """

    classes: tuple[str, ...]
    Y: np.ndarray
    n_labeled: int


def build_seed_labels(graph: CoauthorGraph, seeds: Sequence[SeedAlignment],
                      level: Granularity,
                      records: dict[str, RegistryRecord] | None = None) -> SeedLabels:
    """Project each seed's field to `level` and one-hot encode it on the graph.

    Discipline-level classes come from the seed's registry record, which is
    why `records` is required for that granularity. An auid seeded with
    conflicting classes keeps the most frequent one; ties resolve to the
    smallest class id (logged).
    """
    by_auid: dict[str, Counter] = {}
    for seed in seeds:
        ad = None
        if level is Granularity.AD:
            if records is None or seed.record_id not in records:
                raise KeyError(f"discipline-level seeding needs the registry record for {seed.record_id}")
            ad = records[seed.record_id].ad
        label = project(seed.rf, level, ad=ad)
        if seed.auid in graph.index:
            by_auid.setdefault(seed.auid, Counter())[label] += 1
        else:
            logger.warning("seed auid %s is not in the co-authorship graph; skipped", seed.auid)

    assigned: dict[str, str] = {}
    for auid, counts in by_auid.items():
        top = max(counts.values())
        winners = sorted(label for label, c in counts.items() if c == top)
        if len(counts) > 1:
            logger.warning("seed auid %s has conflicting labels %s; keeping %s",
                           auid, dict(counts), winners[0])
        assigned[auid] = winners[0]

    classes = tuple(sorted(set(assigned.values())))
    col = {c: k for k, c in enumerate(classes)}
    Y = np.zeros((graph.n_nodes, len(classes)), dtype=np.float64)
    for auid, label in assigned.items():
        Y[graph.index[auid], col[label]] = 1.0
    return SeedLabels(classes=classes, Y=Y, n_labeled=len(assigned))


@dataclass(frozen=True)
class SoftLabels:
    """Result of the spreading iteration.

    `diff_inf` and `diff_l2` hold one entry per sweep (entrywise max and
    spectral norm of F(t+1)-F(t)) when tracking was requested.
    """

    F: np.ndarray
    iterations: int
    converged: bool
    diff_inf: tuple[float, ...] = ()
    diff_l2: tuple[float, ...] = ()


def spread(S: sparse.spmatrix, Y: np.ndarray, params: SpreadParams = SpreadParams(),
           track_diffs: bool = False) -> SoftLabels:
    """Iterate F(t+1) = alpha S F(t) + (1-alpha) Y from F(0) = Y."""
    if S.shape[0] != S.shape[1]:
        raise ShapeError(f"S must be square, got {S.shape}")
    if Y.ndim != 2 or Y.shape[0] != S.shape[0]:
        raise ShapeError(f"Y rows must match S, got S {S.shape} and Y {Y.shape}")
    alpha = params.alpha
    base = (1.0 - alpha) * Y
    F = Y.astype(np.float64, copy=True)
    inf_hist: list[float] = []
    l2_hist: list[float] = []
    converged = False
    iterations = 0
    for _ in range(params.max_iter):
        F_next = alpha * (S @ F) + base
        delta = F_next - F
        diff = float(np.max(np.abs(delta))) if delta.size else 0.0
        if track_diffs:
            inf_hist.append(diff)
            l2_hist.append(float(np.linalg.norm(delta, 2)) if delta.size else 0.0)
        F = F_next
        iterations += 1
        if diff <= params.tol:
            converged = True
            break
    return SoftLabels(F=F, iterations=iterations, converged=converged,
                      diff_inf=tuple(inf_hist), diff_l2=tuple(l2_hist))


def closed_form(S: sparse.spmatrix, Y: np.ndarray, alpha: float = 0.2,
                cap: int = 2000) -> np.ndarray:
    """Dense fixed point F* = (1-alpha)(I - alpha S)^-1 Y.

    Meant as an oracle for small graphs; refuses anything larger than `cap`
    nodes rather than silently allocating a huge dense matrix.
    """
    n = S.shape[0]
    if n > cap:
        raise TooLarge(f"{n} nodes exceeds the dense-solve cap of {cap}")
    if S.shape[0] != S.shape[1] or Y.shape[0] != n:
        raise ShapeError(f"got S {S.shape} and Y {Y.shape}")
    A = np.eye(n) - alpha * np.asarray(S.todense() if sparse.issparse(S) else S)
    return (1.0 - alpha) * np.linalg.solve(A, Y)


@dataclass(frozen=True)
class Inference:
    """Class read off one node's row: argmax with explicit abstain and tie flags."""

    class_id: str | None
    confidence: float
    tie: bool = False


def infer_class(F: np.ndarray, classes: Sequence[str], node_row: int) -> Inference:
    """Argmax over a node's soft labels.

    An all-zero row means no labeled mass ever reached the node: abstain.
    Exact ties go to the smallest class index and are flagged.
    """
    row = F[node_row]
    total = float(row.sum())
    if row.size == 0 or float(row.max()) <= 0.0:
        return Inference(class_id=None, confidence=0.0)
    best = int(np.argmax(row))
    tie = bool(np.sum(row == row[best]) > 1)
    return Inference(class_id=classes[best], confidence=float(row[best]) / total, tie=tie)


def infer_auid(graph: CoauthorGraph, labels: SeedLabels, soft: SoftLabels, auid: str) -> Inference:
    """Convenience lookup by author identifier; unknown auids raise NodeNotFound."""
    if auid not in graph.index:
        raise NodeNotFound(auid)
    return infer_class(soft.F, labels.classes, graph.index[auid])


def ls_classify(record: RegistryRecord, auid: str, graph: CoauthorGraph,
                labels: SeedLabels, soft: SoftLabels, level: Granularity) -> Decision:
    """Accept the pair when the spread class matches the record's own field.

    Abstains (rather than guessing) when the auid is not a node or no label
    mass reached it; the caller folds abstains into "no" for binary metrics.
    """
    expected = project(record.rf, level, ad=record.ad if level is Granularity.AD else None)
    if auid not in graph.index:
        logger.warning("auid %s not in co-authorship graph; abstaining", auid)
        return Decision(record_id=record.record_id, auid=auid, verdict=Verdict.ABSTAIN,
                        method=Method.LS, explanation="author not in co-authorship graph")
    inference = infer_class(soft.F, labels.classes, graph.index[auid])
    evidence = {"ls": {"expected": expected, "inferred": inference.class_id,
                       "confidence": round(inference.confidence, 6), "tie": inference.tie}}
    if inference.class_id is None:
        return Decision(record_id=record.record_id, auid=auid, verdict=Verdict.ABSTAIN,
                        method=Method.LS, explanation="no labeled mass reached the author",
                        evidence=evidence)
    verdict = Verdict.YES if inference.class_id == expected else Verdict.NO
    return Decision(record_id=record.record_id, auid=auid, verdict=verdict,
                    method=Method.LS, evidence=evidence)


def write_edge_list(graph: CoauthorGraph, path: str | Path) -> None:
    """Dump the graph as CSV (auid_a, auid_b, weight), one row per undirected edge."""
    coo = sparse.triu(graph.W, k=1).tocoo()
    edges = sorted(
        (graph.auids[i], graph.auids[j], w) for i, j, w in zip(coo.row, coo.col, coo.data)
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["auid_a", "auid_b", "weight"])
        for a, b, w in edges:
            writer.writerow([a, b, int(w) if float(w).is_integer() else w])
