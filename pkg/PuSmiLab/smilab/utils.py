"""
Helpers shared by the experiment code and the management commands:
seed derivation, thread fan-out and artifact writing.
"""
import csv
import dataclasses
import json
import logging
import math
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)


def seed_sequence(seed):
    """
    SeedSequence for an int, None, SeedSequence or Generator seed.

    A Generator contributes one draw as entropy, so it advances.
    """
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2 ** 63)))
    return np.random.SeedSequence(seed)


def spawn_seeds(seed, count):
    return seed_sequence(seed).spawn(count)


def parallel_map(func, items, threads=1):
    """func over items on a thread pool; results keep the order of items."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=threads, prefer='threads')(delayed(func)(item) for item in items)


def mean_stderr(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    mean = float(values.mean())
    if values.size == 1:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def to_jsonable(value):
    """Plain JSON types; non-finite floats become null."""
    if hasattr(value, 'to_dict'):
        return to_jsonable(value.to_dict())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload):
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)


def sidecar_path(path):
    path = Path(path)
    return path.with_name(f"{path.stem}.meta.json")


def write_metadata(path, metadata):
    target = sidecar_path(path)
    target.write_text(dumps(metadata) + '\n', encoding='utf-8')
    return target


def write_json(path, payload, metadata=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload) + '\n', encoding='utf-8')
    if metadata is not None:
        write_metadata(path, metadata)
    logger.info("wrote %s", path)
    return path


def write_csv(path, header, rows, metadata=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(cell) for cell in row])
    if metadata is not None:
        write_metadata(path, metadata)
    logger.info("wrote %s (%d columns)", path, len(header))
    return path


def _csv_cell(cell):
    if isinstance(cell, (float, np.floating)):
        return repr(float(cell))
    if isinstance(cell, np.integer):
        return int(cell)
    return cell
