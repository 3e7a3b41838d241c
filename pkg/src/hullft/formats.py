"""
On-disk formats.

Pool files (``HFT1``)::

    offset  size  field
    0       4     magic b"HFT1"
    4       4     version (u32, = 1)
    8       4     K (u32)
    12      4     d (u32)
    16      4     flags (u32; bit 0 = rows unit-normalized)
    20      K*d*4 row-major little-endian float32 payload

Ids live in an optional UTF-8 sidecar ``<pool>.ids`` with one id per line;
without it the ids are ``0..K-1``. Selections, schedules and toy targets are
JSON documents.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .errors import PoolFormatError
from .geometry import CandidatePool
from .schedule import ScheduleStats, TrainingSchedule

MAGIC = b"HFT1"
VERSION = 1
HEADER = struct.Struct("<4sIIII")
FLAG_UNIT_NORM = 1
MAX_ELEMENTS = 2**31 - 1
NORM_TOL = 1e-6


def ids_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".ids")


def atomic_write(path, data: bytes):
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_pool(pool: CandidatePool) -> bytes:
    flags = FLAG_UNIT_NORM if pool.unit_normalized else 0
    header = HEADER.pack(MAGIC, VERSION, pool.size, pool.dim, flags)
    return header + np.ascontiguousarray(pool.vectors, dtype="<f4").tobytes()


def _default_ids(pool: CandidatePool) -> bool:
    return pool.ids == tuple(range(pool.size))


def write_pool(pool: CandidatePool, path):
    """Write ``pool`` (and its ids sidecar unless the ids are ``0..K-1``)."""
    atomic_write(path, encode_pool(pool))
    side = ids_path(path)
    if not _default_ids(pool):
        text = "".join(f"{i}\n" for i in pool.ids)
        if any("\n" in str(i) for i in pool.ids):
            raise PoolFormatError("ids may not contain newlines")
        atomic_write(side, text.encode("utf-8"))
    elif side.exists():
        side.unlink()


def decode_pool(data: bytes, ids=None, source="<bytes>") -> CandidatePool:
    if len(data) < HEADER.size:
        raise PoolFormatError(f"{source}: file is {len(data)} bytes, shorter than the {HEADER.size}-byte header")
    magic, version, K, d, flags = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise PoolFormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise PoolFormatError(f"{source}: unsupported version {version}, expected {VERSION}")
    if K < 1 or d < 1:
        raise PoolFormatError(f"{source}: header declares K={K}, d={d}; both must be >= 1")
    if K * d > MAX_ELEMENTS:
        raise PoolFormatError(f"{source}: K*d = {K * d} overflows the {MAX_ELEMENTS}-element limit")
    expected = K * d * 4
    payload = len(data) - HEADER.size
    if payload < expected:
        raise PoolFormatError(f"{source}: truncated payload: expected {expected} bytes, found {payload}")
    if payload > expected:
        raise PoolFormatError(f"{source}: payload has {payload - expected} trailing bytes beyond the expected {expected}")

    vectors = np.frombuffer(data, dtype="<f4", count=K * d, offset=HEADER.size).reshape(K, d)
    vectors = vectors.astype(np.float32)
    unit = bool(flags & FLAG_UNIT_NORM)
    if unit:
        norms = np.sqrt(np.einsum("ij,ij->i", vectors.astype(np.float64), vectors.astype(np.float64)))
        off = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
        if off.size:
            warnings.warn(
                f"{source}: unit-norm flag set but row {int(off[0])} has norm {norms[off[0]]:.9g}; clearing flag",
                stacklevel=2,
            )
            unit = False

    if ids is not None and len(ids) != K:
        raise PoolFormatError(f"{source}: id sidecar has {len(ids)} ids for K={K} rows")
    if ids is not None and len(set(ids)) != len(ids):
        seen, dup = set(), None
        for i in ids:
            if i in seen:
                dup = i
                break
            seen.add(i)
        raise PoolFormatError(f"{source}: duplicate id {dup!r} in sidecar")
    return CandidatePool(vectors, ids=ids, unit_normalized=unit)


def read_pool(path) -> CandidatePool:
    path = Path(path)
    data = path.read_bytes()
    side = ids_path(path)
    ids = None
    if side.exists():
        ids = side.read_text(encoding="utf-8").splitlines()
    return decode_pool(data, ids, source=str(path))


def is_pool_file(path) -> bool:
    with open(path, "rb") as f:
        return f.read(4) == MAGIC


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def write_json(obj, path=None) -> str:
    text = dumps(obj)
    if path is not None:
        atomic_write(path, text.encode("utf-8"))
    return text


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise PoolFormatError(f"{path}: not valid JSON ({e})") from None


def schedule_to_dict(schedule: TrainingSchedule) -> dict:
    st = schedule.stats()
    return {
        "refresh_interval": schedule.refresh_interval,
        "steps": [{"id": ex, "action": a.value} for ex, a in schedule.steps],
        "stats": {
            "fb_passes": st.fb_passes,
            "reuse_steps": st.reuse_steps,
            "theoretical_speedup": st.theoretical_speedup,
        },
    }


def schedule_from_dict(doc: dict, source="<schedule>") -> TrainingSchedule:
    """Parse a schedule document and check its stats block against the steps."""
    try:
        steps = tuple((s["id"], s["action"]) for s in doc["steps"])
        schedule = TrainingSchedule(steps, doc["refresh_interval"])
        claimed = doc["stats"]
    except (KeyError, TypeError, ValueError) as e:
        raise PoolFormatError(f"{source}: malformed schedule ({e})") from None
    st: ScheduleStats = schedule.stats()
    actual = {"fb_passes": st.fb_passes, "reuse_steps": st.reuse_steps, "theoretical_speedup": st.theoretical_speedup}
    for key, value in actual.items():
        if key not in claimed or claimed[key] != value:
            raise PoolFormatError(f"{source}: stats.{key} is {claimed.get(key)!r} but the steps give {value!r}")
    return schedule


def read_schedule(path) -> TrainingSchedule:
    return schedule_from_dict(read_json(path), source=str(path))


def read_sequence(path) -> list:
    """Plain id-per-line sequence file; blank lines are ignored."""
    return [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def read_query(path, row: int = 0):
    """Query vector and id from a JSON file or a pool file row.

    JSON may be a bare list of numbers or ``{"id": ..., "vector": [...]}``.
    """
    if is_pool_file(path):
        pool = read_pool(path)
        if not 0 <= row < pool.size:
            raise PoolFormatError(f"{path}: query row {row} out of range for K={pool.size}")
        return np.asarray(pool.vectors[row], dtype=np.float64), pool.ids[row]
    doc = read_json(path)
    if isinstance(doc, dict):
        if "vector" not in doc:
            raise PoolFormatError(f"{path}: query object needs a 'vector' field")
        return np.asarray(doc["vector"], dtype=np.float64), doc.get("id", Path(path).stem)
    if isinstance(doc, list):
        return np.asarray(doc, dtype=np.float64), Path(path).stem
    raise PoolFormatError(f"{path}: query must be a list or an object")


def selection_to_dict(result, pool: CandidatePool, req, query_id=None, timing=True) -> dict:
    """JSON-ready selection document.

    Every fractional support point is listed (count 0 included) so the
    serialized weights still sum to one; ``count`` is omitted entirely when
    no integerizer ran.
    """
    counts = {}
    if result.multiset is not None:
        counts = dict(zip(result.multiset.support, result.multiset.counts))
    support = []
    for i, w in zip(result.fractional.indices, result.fractional.values):
        entry = {"pool_index": i, "id": pool.ids[i], "weight": w}
        if result.multiset is not None:
            entry["count"] = counts.get(i, 0)
        support.append(entry)
    metrics = {k: v for k, v in result.metrics.items()}
    metrics["iterations"] = result.iterations
    metrics["stop_reason"] = result.stop_reason
    if timing:
        metrics["stage_seconds"] = dict(result.timings)
    doc = {
        "query_id": query_id,
        "budget": req.budget,
        "selector": req.selector,
        "integerizer": req.integerizer,
        "support": support,
        "metrics": metrics,
        "warning": result.warning,
    }
    if req.pca_dim is not None:
        doc["pca_dim"] = req.pca_dim
    return doc


def multiset_from_selection(doc: dict, source="<selection>"):
    """``(SupportMultiset, ids)`` from a selection document with counts."""
    from .integerize import SupportMultiset

    try:
        entries = doc["support"]
        if doc.get("integerizer") == "none" or any("count" not in e for e in entries):
            raise PoolFormatError(f"{source}: selection has no integer counts (integerizer=none)")
        indices = [int(e["pool_index"]) for e in entries]
        counts = [int(e["count"]) for e in entries]
        ids = {int(e["pool_index"]): e["id"] for e in entries}
        weight_sum = sum(float(e["weight"]) for e in entries)
        ms = SupportMultiset(indices, counts, int(doc["budget"]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, PoolFormatError):
            raise
        raise PoolFormatError(f"{source}: malformed selection ({e})") from None
    if abs(weight_sum - 1.0) > 1e-6:
        raise PoolFormatError(f"{source}: support weights sum to {weight_sum!r}")
    return ms, ids
