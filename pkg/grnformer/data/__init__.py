"""Text-file I/O, dataset manifests and the synthetic dataset generator."""

from grnformer.data.manifest import (
    MANIFEST_NAME,
    Dataset,
    DatasetManifest,
    load_dataset,
    load_ground_truth,
    load_perturbation_task,
    query_profiles,
    split_examples,
)
from grnformer.data.matrix_io import (
    load_cell_types,
    load_gene_list,
    load_matrix,
    save_cell_types,
    save_gene_list,
    save_matrix,
)
from grnformer.data.synthetic import GENERATOR_VERSION, gen_synthetic, plant_model
from grnformer.tables import FLOAT_FORMAT, read_table, write_table

__all__ = [
    "MANIFEST_NAME",
    "Dataset",
    "DatasetManifest",
    "load_dataset",
    "load_ground_truth",
    "load_perturbation_task",
    "query_profiles",
    "split_examples",
    "load_cell_types",
    "load_gene_list",
    "load_matrix",
    "save_cell_types",
    "save_gene_list",
    "save_matrix",
    "GENERATOR_VERSION",
    "gen_synthetic",
    "plant_model",
    "FLOAT_FORMAT",
    "read_table",
    "write_table",
]
