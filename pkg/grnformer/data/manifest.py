"""Dataset manifests: file inventory with checksums, and loading a dataset from one."""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from grnformer.data.matrix_io import load_cell_types, load_gene_list, load_matrix
from grnformer.errors import DataError, ParseError
from grnformer.grn.io import read_coordinates, read_enhancers
from grnformer.models import ExpressionMatrix, GeneVocabulary, PerturbationExample, Region

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_NAME = "manifest.json"
REQUIRED_FILES = ("expression", "coordinates", "enhancers", "tfs", "cell_types")


def file_checksum(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class DatasetManifest:
    """Relative file paths and their sha256 digests, plus generator provenance."""
    root: Path
    files: Dict[str, str]
    checksums: Dict[str, str] = field(default_factory=dict)
    seed: int = 0
    version: str = ""
    config: Dict[str, Any] = field(default_factory=dict)

    def path(self, key: str) -> Path:
        if key not in self.files:
            raise DataError(f"manifest has no '{key}' entry")
        return self.root / self.files[key]

    def has(self, key: str) -> bool:
        return key in self.files

    def record_checksums(self) -> None:
        self.checksums = {key: file_checksum(self.path(key)) for key in sorted(self.files)}

    def verify(self) -> None:
        """Check that every listed file exists and matches its digest.

        Raises:
            FileNotFoundError: a listed file is missing
            DataError: a digest differs
        """
        for key in sorted(self.files):
            path = self.path(key)
            if not path.is_file():
                raise FileNotFoundError(f"manifest file '{key}' not found: {path}")
            expected = self.checksums.get(key)
            if expected is not None and file_checksum(path) != expected:
                raise DataError(f"checksum mismatch for {path}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "seed": self.seed,
            "files": dict(sorted(self.files.items())),
            "checksums": dict(sorted(self.checksums.items())),
            "config": self.config,
        }

    def write(self, path: PathLike = None) -> Path:
        path = Path(path) if path is not None else self.root / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: PathLike, verify: bool = True) -> "DatasetManifest":
        """Read a manifest; relative file paths resolve against its directory.

        Raises:
            FileNotFoundError: manifest or a listed file missing
            ParseError: malformed manifest
            DataError: checksum mismatch or a required entry missing
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"manifest not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            manifest = cls(
                root=path.parent,
                files=dict(payload["files"]),
                checksums=dict(payload.get("checksums", {})),
                seed=int(payload.get("seed", 0)),
                version=str(payload.get("version", "")),
                config=dict(payload.get("config", {})),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f"invalid manifest: {e}", str(path)) from None
        missing = [key for key in REQUIRED_FILES if key not in manifest.files]
        if missing:
            raise DataError(f"{path}: manifest lacks entries {missing}")
        if verify:
            manifest.verify()
        return manifest


@dataclass
class Dataset:
    """Everything the pipeline stages read from a manifest."""
    manifest: DatasetManifest
    vocab: GeneVocabulary
    expression: ExpressionMatrix
    cell_types: Dict[str, str]
    enhancers: Dict[str, List[Region]]

    @property
    def type_names(self) -> List[str]:
        return sorted(set(self.cell_types.values()))

    def cells_of_type(self, cell_type: str) -> List[str]:
        return [c for c in self.expression.cell_ids if self.cell_types[c] == cell_type]


def load_dataset(path: PathLike, verify: bool = True) -> Dataset:
    """Load the dataset described by the manifest at ``path``.

    Raises:
        DataError: inconsistent files (unlabelled cells, unknown TFs or genes)
    """
    manifest = DatasetManifest.load(path, verify=verify)
    expression = load_matrix(manifest.path("expression"))
    tfs = load_gene_list(manifest.path("tfs"))
    coordinates = read_coordinates(manifest.path("coordinates"))
    vocab = GeneVocabulary(expression.gene_ids, frozenset(tfs), coordinates)
    cell_types = load_cell_types(manifest.path("cell_types"))
    unlabelled = [c for c in expression.cell_ids if c not in cell_types]
    if unlabelled:
        raise DataError(f"cells without a cell type: {unlabelled[:5]}")
    enhancers = read_enhancers(manifest.path("enhancers"))
    unknown = sorted(tf for tf in enhancers if tf not in vocab.tfs)
    if unknown:
        raise DataError(f"enhancers listed for non-TF genes: {unknown}")
    logger.info("loaded %d cells x %d genes (%d TFs)", expression.n_cells, expression.n_genes, len(tfs))
    return Dataset(manifest, vocab, expression, cell_types, enhancers)


def load_ground_truth(manifest: DatasetManifest) -> Dict[str, Any]:
    path = manifest.path("ground_truth")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid ground truth: {e}", str(path)) from None


def load_perturbation_task(manifest: DatasetManifest, vocab: GeneVocabulary) -> List[PerturbationExample]:
    """Examples from the control/post matrices and their JSON descriptions.

    Raises:
        VocabularyError: an example names an unknown gene
        DataError: control/post rows missing for an example
    """
    control = load_matrix(manifest.path("perturb_control"))
    post = load_matrix(manifest.path("perturb_post"))
    if control.gene_ids != vocab.genes or post.gene_ids != vocab.genes:
        raise DataError("perturbation matrices must use the dataset gene order")
    path = manifest.path("perturb_examples")
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid perturbation examples: {e}", str(path)) from None
    examples = []
    for position, record in enumerate(records):
        if not isinstance(record, dict) or not {"id", "cell", "genes"} <= set(record):
            raise ParseError(f"example {position} needs id, cell and genes", str(path))
        example_id = record["id"]
        examples.append(PerturbationExample(
            example_id=example_id,
            cell_id=record["cell"],
            control=control.row(example_id),
            perturbed_genes=tuple(int(g) for g in vocab.indices(record["genes"])),
            post=post.row(example_id),
            targets=tuple(int(g) for g in vocab.indices(record.get("targets", []))),
            group="+".join(record["genes"]),
            split=record.get("split", "train"),
        ))
    return examples


def split_examples(examples: List[PerturbationExample], split: str) -> List[PerturbationExample]:
    return [e for e in examples if e.split == split]


def query_profiles(examples: List[PerturbationExample], known_cells) -> Dict[str, np.ndarray]:
    """Control profiles of example cells that have no GRNs of their own, first occurrence wins."""
    out: Dict[str, np.ndarray] = {}
    for example in examples:
        if example.cell_id not in known_cells and example.cell_id not in out:
            out[example.cell_id] = example.control
    return out


__all__ = [
    "MANIFEST_NAME",
    "file_checksum",
    "DatasetManifest",
    "Dataset",
    "load_dataset",
    "load_ground_truth",
    "load_perturbation_task",
    "split_examples",
    "query_profiles",
]
