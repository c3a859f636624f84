"""Edge-list, coordinate, enhancer and eRegulon files."""

import json
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd

from grnformer.errors import DataError, ParseError, VocabularyError
from grnformer.models import Edge, ERegulon, GeneVocabulary, GenomicPosition, Grn, GrnScale, Region
from grnformer.tables import parse_floats, parse_ints, read_table, write_table

PathLike = Union[str, Path]

EDGE_COLUMNS = ("source", "target", "weight", "scale", "owner")
COORDINATE_COLUMNS = ("gene", "chrom", "position")
ENHANCER_COLUMNS = ("tf", "chrom", "start", "end")


def write_edge_list(grns: Iterable[Grn], vocab: GeneVocabulary, path: PathLike) -> None:
    """Write one or more GRNs to a single edge-list file."""
    rows = []
    for grn in grns:
        for e in grn.edges:
            rows.append((vocab.genes[e.source], vocab.genes[e.target], e.weight, grn.scale.value, grn.owner))
    write_table(pd.DataFrame(rows, columns=list(EDGE_COLUMNS)), path)


def read_edge_list(
    path: PathLike,
    vocab: GeneVocabulary,
    owners: Sequence[str] = (),
    scale: Optional[GrnScale] = None,
) -> Dict[str, Grn]:
    """Read an edge-list file into one Grn per owner.

    Owners listed in ``owners`` but absent from the file come back as empty
    graphs (an edge list cannot represent a GRN with no edges).

    Raises:
        ParseError: malformed rows, unknown scale tags, or unknown gene ids
    """
    table = read_table(path, EDGE_COLUMNS)
    weights = parse_floats(table[[2]].to_numpy(), path)[:, 0] if len(table) else []
    grouped: Dict[str, List[Edge]] = defaultdict(list)
    scales: Dict[str, GrnScale] = {}
    for r, (source, target, _, tag, owner) in enumerate(table.itertuples(index=False)):
        try:
            grn_scale = GrnScale(tag)
            edge = Edge(vocab.index(source), vocab.index(target), float(weights[r]))
        except (ValueError, VocabularyError) as e:
            raise ParseError(str(e), str(path), r + 2) from None
        if scales.setdefault(owner, grn_scale) != grn_scale:
            raise ParseError(f"owner {owner} appears with two scales", str(path), r + 2)
        grouped[owner].append(edge)

    tfs = vocab.tf_indices
    out: Dict[str, Grn] = {}
    for owner, edges in grouped.items():
        try:
            out[owner] = Grn(scale=scales[owner], edges=tuple(edges), owner=owner, n_genes=len(vocab), tfs=tfs)
        except DataError as e:
            raise ParseError(str(e), str(path)) from None
    for owner in owners:
        if owner not in out:
            out[owner] = Grn(scale=scale or GrnScale.CELL, edges=(), owner=owner, n_genes=len(vocab), tfs=tfs)
    return out


def write_coordinates(coordinates: Dict[str, GenomicPosition], path: PathLike) -> None:
    rows = [(gene, pos.chrom, pos.position) for gene, pos in coordinates.items()]
    write_table(pd.DataFrame(rows, columns=list(COORDINATE_COLUMNS)), path)


def read_coordinates(path: PathLike) -> Dict[str, GenomicPosition]:
    table = read_table(path, COORDINATE_COLUMNS)
    positions = parse_ints(table[2], path, "position")
    return {
        gene: GenomicPosition(chrom, pos)
        for (gene, chrom, _), pos in zip(table.itertuples(index=False), positions)
    }


def write_enhancers(enhancers: Dict[str, Sequence[Region]], path: PathLike) -> None:
    rows = [(tf, r.chrom, r.start, r.end) for tf, regions in enhancers.items() for r in regions]
    write_table(pd.DataFrame(rows, columns=list(ENHANCER_COLUMNS)), path)


def read_enhancers(path: PathLike) -> Dict[str, List[Region]]:
    """Enhancer intervals grouped by the TF they belong to."""
    table = read_table(path, ENHANCER_COLUMNS)
    starts = parse_ints(table[2], path, "start")
    ends = parse_ints(table[3], path, "end")
    out: Dict[str, List[Region]] = defaultdict(list)
    for r, ((tf, chrom, _, _), start, end) in enumerate(zip(table.itertuples(index=False), starts, ends)):
        try:
            out[tf].append(Region(chrom, start, end))
        except ValueError as e:
            raise ParseError(str(e), str(path), r + 2) from None
    return dict(out)


def write_eregulons(eregulons: Sequence[ERegulon], vocab: GeneVocabulary, path: PathLike) -> None:
    payload = [
        {
            "name": reg.name,
            "tf": vocab.genes[reg.tf],
            "enhancers": [[e.chrom, e.start, e.end] for e in reg.enhancers],
            "targets": [[vocab.genes[t], r] for t, r in reg.targets],
        }
        for reg in eregulons
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


def read_eregulons(path: PathLike, vocab: GeneVocabulary) -> List[ERegulon]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        return [
            ERegulon(
                name=item["name"],
                tf=vocab.index(item["tf"]),
                enhancers=tuple(Region(c, int(s), int(e)) for c, s, e in item["enhancers"]),
                targets=tuple((vocab.index(g), float(r)) for g, r in item["targets"]),
            )
            for item in payload
        ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ParseError(f"invalid eRegulon file: {e}", str(path)) from None


__all__ = [
    "EDGE_COLUMNS",
    "write_edge_list",
    "read_edge_list",
    "write_coordinates",
    "read_coordinates",
    "write_enhancers",
    "read_enhancers",
    "write_eregulons",
    "read_eregulons",
]
