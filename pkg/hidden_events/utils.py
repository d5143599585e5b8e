# MIT License

# Copyright (c) 2024 hidden-events developers

# Utils
# ..................................................................................................................
# ..................................................................................................................

import hashlib
import json
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


def group_in_batches(
    sizes: Sequence[int],
    max_batch_size: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> List[List[int]]:

    """

    Group consecutive items in batches of given total size or given number of items.

    Items are occurrence dates in practice and their size is the number of (t, s) pairs
    they contribute. An item larger than max_batch_size gets a batch of its own.

    Args:
        sizes: size of every item
        max_batch_size: maximum total size of a batch
        batch_size: number of items in a batch

    Returns:
        List of batches (lists) of item indices.

    Examples:
        >>> group_in_batches([3, 3, 3], max_batch_size=6)
        [[0, 1], [2]]
        >>> group_in_batches([3, 10, 3], max_batch_size=6)
        [[0], [1], [2]]
        >>> group_in_batches([1, 1, 1], batch_size=2)
        [[0, 1], [2]]
        >>> group_in_batches([1, 1, 1])
        [[0, 1, 2]]
        >>> group_in_batches([])
        []

    """

    if max_batch_size is not None and batch_size is not None:
        raise ValueError("max_batch_size and batch_size are mutually exclusive.")

    indices = list(range(len(sizes)))
    if not indices:
        return []

    if max_batch_size is not None:
        batches: List[List[int]] = []
        batch: List[int] = []
        total = 0
        for i, size in enumerate(sizes):
            if batch and total + size > max_batch_size:
                batches.append(batch)
                batch = []
                total = 0
            batch.append(i)
            total += size
        if batch:
            batches.append(batch)
        return batches

    if batch_size is not None:
        return [indices[i : i + batch_size] for i in range(0, len(indices), batch_size)]

    return [indices]


def segment_starts(lengths: np.ndarray) -> np.ndarray:

    """

    Flat start offset of every segment for segments laid out back to back.

    Examples:
        >>> segment_starts(np.array([2, 3, 1])).tolist()
        [0, 2, 5]

    """

    lengths = np.asarray(lengths, dtype=np.int64)
    starts = np.zeros(len(lengths), dtype=np.int64)
    if len(lengths) > 1:
        starts[1:] = np.cumsum(lengths[:-1])
    return starts


def segment_cumsum(values: np.ndarray, lengths: np.ndarray) -> np.ndarray:

    """

    Cumulative sums restarted at every segment, with a leading zero per segment.

    The result has one more row per segment than values: entry k of a segment is
    the sum of its first k values.

    Args:
        values: flat array (1d or 2d, segments along the first axis)
        lengths: length of every segment

    Returns:
        Array with len(values) + len(lengths) rows.

    Examples:
        >>> segment_cumsum(np.array([1., 2., 3., 4.]), np.array([2, 2])).tolist()
        [0.0, 1.0, 3.0, 0.0, 3.0, 7.0]

    """

    values = np.asarray(values, dtype=float)
    lengths = np.asarray(lengths, dtype=np.int64)
    n_rows = len(values) + len(lengths)
    out = np.zeros((n_rows,) + values.shape[1:], dtype=float)
    if len(values) == 0:
        return out
    total = np.cumsum(values, axis=0)
    starts = segment_starts(lengths)
    # value i of segment r lands at i + r + 1 in the padded layout
    segment_of_value = np.repeat(np.arange(len(lengths)), lengths)
    before = np.zeros((len(lengths),) + values.shape[1:], dtype=float)
    nonfirst = starts > 0
    before[nonfirst] = total[starts[nonfirst] - 1]
    out[np.arange(len(values)) + segment_of_value + 1] = total - before[segment_of_value]
    return out


def _to_builtin(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, "isoformat"):
        return value.isoformat()
    raise TypeError(f"{type(value)} is not JSON serializable")


def dumps(obj: Dict[str, Any]) -> str:

    """

    Serialize a report dictionary to canonical JSON (sorted keys, numpy aware).

    Examples:
        >>> dumps({'b': np.int64(2), 'a': [np.float64(0.5)]})
        '{\\n  "a": [\\n    0.5\\n  ],\\n  "b": 2\\n}'

    """

    return json.dumps(obj, default=_to_builtin, indent=2, sort_keys=True)


def write_json(obj: Dict[str, Any], output_path: str):
    with open(output_path, "w") as f:
        f.write(dumps(obj))
        f.write("\n")


def config_hash(text: str, seed: Optional[int] = None) -> str:

    """

    SHA-256 of a canonical configuration text and seed, embedded in every artifact.

    Examples:
        >>> config_hash("a = 1", 3) == config_hash("a = 1", 3)
        True
        >>> config_hash("a = 1", 3) == config_hash("a = 1", 4)
        False

    """

    digest = hashlib.sha256()
    digest.update(text.encode("utf-8"))
    digest.update(f"\nseed={seed}".encode("utf-8"))
    return digest.hexdigest()
