"""Language-space grounding baseline: map beam-generated item embeddings onto
the candidate catalog by reading the beam x candidate ranking matrix column
by column and keeping the first K unique items.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .decoder import DEFAULT_EPSILON, RankedList, check_query_id, rank_table
from .exceptions import ConfigError, EmptyMemoryError, RecordFormatError
from .utils import as_vector, read_jsonl

logger = logging.getLogger("general_logger")


@dataclass(frozen=True)
class BeamSet:
    query_id: int
    embeddings: np.ndarray

    @property
    def beam_count(self):
        return int(self.embeddings.shape[0])


def make_beam_set(query_id, vectors, dim):
    if len(vectors) < 1:
        raise ConfigError(f"query {query_id}: a beam set needs at least one beam")
    rows = [as_vector(v, dim, f"query {query_id} beam {b}") for b, v in enumerate(vectors)]
    embeddings = np.stack(rows)
    embeddings.flags.writeable = False
    return BeamSet(query_id, embeddings)


def ranking_matrix(beams, candidates, depth, epsilon=DEFAULT_EPSILON):
    """Row b = beam b's candidate ranking, cut to depth columns"""
    return [rank_table(beam, candidates, depth, epsilon) for beam in beams.embeddings]


def ground_beams(beams, candidates, K, epsilon=DEFAULT_EPSILON):
    """Top-K unique items from the column-major flatten of the ranking matrix.

    After c full columns at least c distinct items are seen (beam 1's prefix),
    so only the first K columns are ever needed.
    """
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if len(candidates) == 0:
        raise EmptyMemoryError("empty candidate table")
    matrix = ranking_matrix(beams, candidates, K, epsilon)
    seen = set()
    entries = []
    for column in range(K):
        for row in matrix:
            if column >= len(row):
                continue
            entry = row[column]
            if entry.item in seen:
                continue
            seen.add(entry.item)
            entries.append(entry)
            if len(entries) == K:
                break
        if len(entries) == K:
            break
    logger.debug(f"Grounded query {beams.query_id}: {beams.beam_count} beams -> {len(entries)} items")
    return RankedList(beams.query_id, tuple(entries), mode="grounding")


def read_beam_sets(path, dim):
    """Beam sets from JSONL records {query_id, beams: [[...], ...]}"""
    beam_sets = []
    for lineno, obj in read_jsonl(path):
        where = f"{path}:{lineno}"
        if "query_id" not in obj or "beams" not in obj:
            raise RecordFormatError(f"{where}: beam records need query_id and beams")
        if not isinstance(obj["beams"], list):
            raise RecordFormatError(f"{where}: beams must be an array of vectors")
        query_id = check_query_id(obj["query_id"], where)
        beam_sets.append(make_beam_set(query_id, obj["beams"], dim))
    return beam_sets
