"""Shared data models: genes, expression, regulatory graphs and embeddings."""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from grnformer.core.tensor import Tensor, gather_rows
from grnformer.errors import AlignmentError, DataError, ShapeError, UnknownCellError, VocabularyError


@dataclass(frozen=True)
class GenomicPosition:
    """Point coordinate of a gene."""
    chrom: str
    position: int


@dataclass(frozen=True)
class Region:
    """Half-open genomic interval, e.g. an enhancer."""
    chrom: str
    start: int
    end: int

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"region end {self.end} precedes start {self.start}")

    def distance_to(self, position: GenomicPosition) -> float:
        """Basepairs from a gene point to the nearest point of the interval."""
        if position.chrom != self.chrom:
            return float("inf")
        if position.position < self.start:
            return float(self.start - position.position)
        if position.position > self.end:
            return float(position.position - self.end)
        return 0.0


@dataclass
class GeneVocabulary:
    """Ordered gene identifiers, the TF subset and optional coordinates."""
    genes: Tuple[str, ...]
    tfs: FrozenSet[str] = frozenset()
    coordinates: Dict[str, GenomicPosition] = field(default_factory=dict)

    def __post_init__(self):
        self.genes = tuple(self.genes)
        self.tfs = frozenset(self.tfs)
        if len(set(self.genes)) != len(self.genes):
            raise DataError("gene identifiers must be unique")
        unknown = self.tfs - set(self.genes)
        if unknown:
            raise DataError(f"TFs not in vocabulary: {sorted(unknown)}")
        self._index = {g: i for i, g in enumerate(self.genes)}

    def __len__(self) -> int:
        return len(self.genes)

    def index(self, gene: str) -> int:
        try:
            return self._index[gene]
        except KeyError:
            raise VocabularyError(f"unknown gene id: {gene}") from None

    def indices(self, genes: Iterable[str]) -> np.ndarray:
        return np.array([self.index(g) for g in genes], dtype=np.int64)

    def is_tf(self, index: int) -> bool:
        return self.genes[index] in self.tfs

    @cached_property
    def tf_indices(self) -> FrozenSet[int]:
        return frozenset(self._index[g] for g in self.tfs)

    def coordinate(self, index: int) -> GenomicPosition:
        gene = self.genes[index]
        if gene not in self.coordinates:
            raise DataError(f"missing genomic coordinates for gene {gene}")
        return self.coordinates[gene]


@dataclass
class ExpressionMatrix:
    """Cells x genes non-negative expression values."""
    values: np.ndarray
    cell_ids: Tuple[str, ...]
    gene_ids: Tuple[str, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.cell_ids = tuple(self.cell_ids)
        self.gene_ids = tuple(self.gene_ids)
        if self.values.ndim != 2 or self.values.shape != (len(self.cell_ids), len(self.gene_ids)):
            raise ShapeError(
                f"expression values {self.values.shape} do not match "
                f"{len(self.cell_ids)} cells x {len(self.gene_ids)} genes",
                self.values.shape,
            )
        if len(set(self.cell_ids)) != len(self.cell_ids):
            raise DataError("cell identifiers must be unique")
        if len(set(self.gene_ids)) != len(self.gene_ids):
            raise DataError("gene identifiers must be unique")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DataError("expression values must be finite and non-negative")
        self._cell_index = {c: i for i, c in enumerate(self.cell_ids)}

    @property
    def n_cells(self) -> int:
        return len(self.cell_ids)

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    def cell_index(self, cell_id: str) -> int:
        try:
            return self._cell_index[cell_id]
        except KeyError:
            raise UnknownCellError(f"unknown cell id: {cell_id}") from None

    def row(self, cell_id: str) -> np.ndarray:
        return self.values[self.cell_index(cell_id)]

    def subset(self, cell_ids: Sequence[str]) -> "ExpressionMatrix":
        rows = [self.cell_index(c) for c in cell_ids]
        return ExpressionMatrix(self.values[rows], tuple(cell_ids), self.gene_ids)


class GrnScale(str, Enum):
    """Resolution at which a regulatory graph was built."""
    CELL_TYPE = "cell-type-specific"
    CELL = "cell-specific"


class EdgeProvenance(str, Enum):
    """Where an edge came from."""
    REGULATORY = "regulatory"
    COEXPRESSION = "coexpression"
    RANDOM = "random"


@dataclass(frozen=True)
class Edge:
    """Directed TF -> target edge."""
    source: int
    target: int
    weight: float = 1.0
    provenance: EdgeProvenance = EdgeProvenance.REGULATORY

    @property
    def pair(self) -> Tuple[int, int]:
        return (self.source, self.target)

    @property
    def undirected(self) -> Tuple[int, int]:
        return (min(self.source, self.target), max(self.source, self.target))


@dataclass(frozen=True)
class Grn:
    """Directed regulatory graph at one scale.

    Attributes:
        scale: cell-type-specific or cell-specific
        edges: edge list; regulatory edges always start at a TF
        owner: cell-type name or cell id
        n_genes: vocabulary size (nodes are 0..n_genes-1, isolated ones included)
        tfs: TF node indices; every regulatory edge must start at one
    """
    scale: GrnScale
    edges: Tuple[Edge, ...]
    owner: str
    n_genes: int
    tfs: FrozenSet[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "tfs", frozenset(self.tfs))
        seen = set()
        for e in self.edges:
            if e.source == e.target:
                raise DataError(f"self-loop on gene {e.source} in GRN {self.owner}")
            if not (0 <= e.source < self.n_genes and 0 <= e.target < self.n_genes):
                raise DataError(f"edge {e.pair} outside vocabulary of size {self.n_genes}")
            if e.pair in seen:
                raise DataError(f"duplicate edge {e.pair} in GRN {self.owner}")
            seen.add(e.pair)
            if not (np.isfinite(e.weight) and 0 < e.weight <= 1):
                raise DataError(f"edge {e.pair} weight {e.weight} outside (0, 1]")
            if e.provenance == EdgeProvenance.REGULATORY and e.source not in self.tfs:
                declared = "" if self.tfs else " (the GRN declares no TFs)"
                raise DataError(f"regulatory edge {e.pair} does not start at a TF{declared}")

    def __len__(self) -> int:
        return len(self.edges)

    @cached_property
    def pairs(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(e.pair for e in self.edges)

    @cached_property
    def undirected_pairs(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(e.undirected for e in self.edges)

    @cached_property
    def neighbors(self) -> List[np.ndarray]:
        """Undirected neighborhoods, sorted ascending, one array per gene."""
        sets: List[set] = [set() for _ in range(self.n_genes)]
        for e in self.edges:
            sets[e.source].add(e.target)
            sets[e.target].add(e.source)
        return [np.array(sorted(s), dtype=np.int64) for s in sets]

    def degrees(self) -> np.ndarray:
        """Total (in + out) edge count per gene."""
        deg = np.zeros(self.n_genes, dtype=np.int64)
        for e in self.edges:
            deg[e.source] += 1
            deg[e.target] += 1
        return deg

    def out_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_genes, dtype=np.int64)
        for e in self.edges:
            deg[e.source] += 1
        return deg

    def replace(self, edges: Iterable[Edge], owner: Optional[str] = None, scale: Optional[GrnScale] = None) -> "Grn":
        return Grn(
            scale=scale or self.scale,
            edges=tuple(edges),
            owner=owner if owner is not None else self.owner,
            n_genes=self.n_genes,
            tfs=self.tfs,
        )


@dataclass(frozen=True)
class ERegulon:
    """One TF with its enhancers and correlated, nearby target genes."""
    name: str
    tf: int
    enhancers: Tuple[Region, ...]
    targets: Tuple[Tuple[int, float], ...]

    @property
    def target_indices(self) -> Tuple[int, ...]:
        return tuple(t for t, _ in self.targets)


@dataclass(frozen=True)
class CoExpressionGraph:
    """Implicit clique over the genes expressed in one cell."""
    owner: str
    active: np.ndarray = field(compare=False)

    @property
    def n_active(self) -> int:
        return int(self.active.size)

    @property
    def n_pairs(self) -> int:
        k = self.n_active
        return k * (k - 1) // 2

    def pairs(self) -> np.ndarray:
        """All implied unordered pairs as an (n_pairs, 2) array, lower index first."""
        i, j = np.triu_indices(self.n_active, k=1)
        return np.stack([self.active[i], self.active[j]], axis=1)

    def pairs_at(self, indices: np.ndarray) -> np.ndarray:
        """Rows ``indices`` of :meth:`pairs` without listing the clique."""
        k = self.n_active
        indices = np.asarray(indices, dtype=np.int64)
        if np.any((indices < 0) | (indices >= self.n_pairs)):
            raise IndexError(f"pair index outside 0..{self.n_pairs - 1}")
        rows = np.arange(k, dtype=np.int64)
        offsets = rows * (2 * k - rows - 1) // 2
        i = np.searchsorted(offsets, indices, side="right") - 1
        j = indices - offsets[i] + i + 1
        return np.stack([self.active[i], self.active[j]], axis=1).reshape(-1, 2)


@dataclass
class EmbeddingSet:
    """Row vectors at a fixed width, keyed by gene index or cell id."""
    values: Tensor
    row_ids: Tuple
    scale: str = ""

    def __post_init__(self):
        self.row_ids = tuple(self.row_ids)
        if len(self.values.shape) != 2 or self.values.shape[0] != len(self.row_ids):
            raise ShapeError(
                f"embedding values {self.values.shape} do not match {len(self.row_ids)} rows",
                self.values.shape,
            )

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.row_ids)

    def select(self, row_ids: Sequence) -> "EmbeddingSet":
        """Gather rows in the requested order (differentiable)."""
        lookup = {r: i for i, r in enumerate(self.row_ids)}
        missing = [r for r in row_ids if r not in lookup]
        if missing:
            raise AlignmentError("rows not present in embedding set", missing)
        index = [lookup[r] for r in row_ids]
        return EmbeddingSet(gather_rows(self.values, index), tuple(row_ids), self.scale)


@dataclass(frozen=True)
class PerturbationExample:
    """A control profile, the genes perturbed in it and the observed response.

    Attributes:
        example_id: unique id
        cell_id: cell whose GRNs the example uses (directly or via an alias)
        control: unperturbed expression over the vocabulary
        perturbed_genes: vocabulary indices of the perturbed genes
        post: post-perturbation expression over the vocabulary
        targets: indices of genes known to respond (evaluation labels)
        group: grouping key for metrics, e.g. the perturbed gene names
        split: "train" or "heldout"
    """
    example_id: str
    cell_id: str
    control: np.ndarray = field(compare=False)
    perturbed_genes: Tuple[int, ...]
    post: np.ndarray = field(compare=False)
    targets: Tuple[int, ...] = ()
    group: str = ""
    split: str = "train"

    def __post_init__(self):
        control = np.asarray(self.control, dtype=np.float64)
        post = np.asarray(self.post, dtype=np.float64)
        if control.ndim != 1 or control.shape != post.shape:
            raise ShapeError(f"example {self.example_id}: control and post must be equal-length vectors",
                             control.shape, post.shape)
        for gene in (*self.perturbed_genes, *self.targets):
            if not 0 <= gene < control.size:
                raise VocabularyError(f"example {self.example_id}: gene index {gene} outside the vocabulary")
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "post", post)
        object.__setattr__(self, "perturbed_genes", tuple(int(g) for g in self.perturbed_genes))
        object.__setattr__(self, "targets", tuple(int(g) for g in self.targets))


__all__ = [
    "GenomicPosition",
    "Region",
    "GeneVocabulary",
    "ExpressionMatrix",
    "GrnScale",
    "EdgeProvenance",
    "Edge",
    "Grn",
    "ERegulon",
    "CoExpressionGraph",
    "EmbeddingSet",
    "PerturbationExample",
]
