"""Mined corpus of (graph, best QAOA angles) records and the angle <-> model-space mapping.

On disk a corpus is a UTF-8 JSON-lines file with one record per line plus a
sibling manifest ``<stem>.manifest.json`` holding the generation config.
Generation appends and fsyncs one record at a time, so an interrupted run
resumes at the first missing index.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from diffqaoa.errors import InvariantError, ParameterError, ParseError, PersistenceError, VersionError
from diffqaoa.graph import Graph, brute_force_maxcut, generate_random_graph
from diffqaoa.qaoa_opt import OptimizerConfig, multi_start_optimize
from diffqaoa.qsim import NUM_PARAMS
from diffqaoa.rng import derive_seed, make_rng

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
# energies come from floating-point simulation and can undershoot an exact bound by rounding
ENERGY_TOL = 1e-9
TRAIN_STREAM = 0


def wrap_angles(x) -> np.ndarray:
    """Reduce angles into [-pi, pi)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.mod(x + math.pi, 2 * math.pi) - math.pi
    return np.where(w >= math.pi, w - 2 * math.pi, w)


def normalize_params(pv) -> np.ndarray:
    x = np.asarray(pv, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ParameterError("parameters must be finite")
    return wrap_angles(x) / math.pi


def denormalize_params(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ParameterError("normalized vector must be finite")
    return wrap_angles(x * math.pi)


@dataclass(frozen=True)
class TrainingRecord:
    index: int
    graph: Graph
    best_params: tuple[float, ...]
    best_energy: float
    ground_energy: int
    gen_meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        if len(self.best_params) != NUM_PARAMS:
            raise InvariantError(f"record {self.index}: expected {NUM_PARAMS} parameters")
        if not all(-math.pi <= a < math.pi for a in self.best_params):
            raise InvariantError(f"record {self.index}: parameters outside [-pi, pi)")
        if not math.isfinite(self.best_energy):
            raise InvariantError(f"record {self.index}: non-finite energy")
        if self.best_energy < self.ground_energy - ENERGY_TOL:
            raise InvariantError(
                f"record {self.index}: best_energy {self.best_energy} is below "
                f"ground_energy {self.ground_energy}"
            )

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "graph": self.graph.to_dict(),
            "best_params": list(self.best_params),
            "best_energy": self.best_energy,
            "ground_energy": self.ground_energy,
            "gen_meta": self.gen_meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TrainingRecord:
        return cls(
            int(d["index"]),
            Graph.from_dict(d["graph"]),
            tuple(float(a) for a in d["best_params"]),
            float(d["best_energy"]),
            int(d["ground_energy"]),
            dict(d.get("gen_meta", {})),
        )


@dataclass(frozen=True)
class CorpusManifest:
    count: int
    n_range: tuple[int, int] = (4, 8)
    p_range: tuple[float, float] = (0.3, 0.75)
    n_starts: int = 10
    optimizer: OptimizerConfig = OptimizerConfig()
    master_seed: int = 0
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.count < 1:
            raise ParameterError(f"count must be >= 1, got {self.count}")
        lo, hi = self.n_range
        if not 2 <= lo <= hi:
            raise ParameterError(f"bad node range {self.n_range}")
        plo, phi = self.p_range
        if not 0 < plo <= phi <= 1:
            raise ParameterError(f"bad edge-probability range {self.p_range}")
        if self.n_starts < 1:
            raise ParameterError("n_starts must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        d["p_range"] = list(self.p_range)
        # the optimizer seed is replaced per record
        d["optimizer"].pop("seed")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> CorpusManifest:
        return cls(
            count=int(d["count"]),
            n_range=tuple(int(v) for v in d["n_range"]),
            p_range=tuple(float(v) for v in d["p_range"]),
            n_starts=int(d["n_starts"]),
            optimizer=OptimizerConfig(**d["optimizer"]),
            master_seed=int(d["master_seed"]),
            version=int(d["version"]),
        )


@dataclass
class Corpus:
    manifest: CorpusManifest
    records: list[TrainingRecord]

    def params_array(self) -> np.ndarray:
        return np.array([r.best_params for r in self.records], dtype=np.float64).reshape(-1, NUM_PARAMS)

    def normalized(self) -> np.ndarray:
        return normalize_params(self.params_array())


def generate_record(manifest: CorpusManifest, index: int) -> TrainingRecord:
    """Mine record ``index``; depends only on the manifest and the index."""
    seed = derive_seed(manifest.master_seed, TRAIN_STREAM, index)
    rng = make_rng(seed)
    n = int(rng.integers(manifest.n_range[0], manifest.n_range[1] + 1))
    p_edge = float(rng.uniform(*manifest.p_range))
    g = generate_random_graph(n, p_edge, derive_seed(seed, 1))
    cfg = OptimizerConfig(**{**asdict(manifest.optimizer), "seed": derive_seed(seed, 2)})
    trace = multi_start_optimize(g, manifest.n_starts, cfg)
    return TrainingRecord(
        index=index,
        graph=g,
        best_params=tuple(wrap_angles(trace.best_params).tolist()),
        best_energy=trace.best_energy,
        ground_energy=brute_force_maxcut(g).ground_energy,
        gen_meta={
            "seed": seed,
            "p_edge": p_edge,
            "n_starts": manifest.n_starts,
            "iterations": cfg.max_iters,
            "winning_start": trace.start_index,
        },
    )


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def _record_line(rec: TrainingRecord) -> str:
    return json.dumps(rec.to_dict(), separators=(",", ":")) + "\n"


def _manifest_text(m: CorpusManifest) -> str:
    return json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n"


def _durable_prefix(path: Path) -> tuple[list[TrainingRecord], int]:
    """Records that parse cleanly from the start of ``path`` and the byte length they span."""
    records, good = [], 0
    with open(path, "rb") as fh:
        for raw in fh:
            if not raw.endswith(b"\n"):
                break
            try:
                rec = TrainingRecord.from_dict(json.loads(raw))
            except (ValueError, KeyError, TypeError):
                break
            if rec.index != len(records):
                break
            records.append(rec)
            good += len(raw)
    return records, good


def _mine(manifest: CorpusManifest, indices: range, workers: int) -> Iterator[TrainingRecord]:
    if workers <= 1:
        for i in indices:
            yield generate_record(manifest, i)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, so appends stay index-ordered
        yield from pool.map(generate_record, [manifest] * len(indices), indices)


def generate_corpus(
    count: int,
    n_range: tuple[int, int] = (4, 8),
    p_range: tuple[float, float] = (0.3, 0.75),
    cfg: OptimizerConfig = OptimizerConfig(),
    master_seed: int = 0,
    n_starts: int = 10,
    out=None,
    workers: int = 1,
    progress: Callable[[TrainingRecord], None] | None = None,
) -> Corpus:
    """Mine ``count`` records. With ``out`` set, records are checkpointed there and a rerun resumes."""
    manifest = CorpusManifest(count, tuple(n_range), tuple(p_range), n_starts, cfg, master_seed)
    if out is None:
        records = []
        for rec in _mine(manifest, range(count), workers):
            records.append(rec)
            if progress:
                progress(rec)
        return Corpus(manifest, records)

    out = Path(out)
    mpath = manifest_path(out)
    records: list[TrainingRecord] = []
    try:
        if out.exists() and mpath.exists():
            if mpath.read_text(encoding="utf-8") != _manifest_text(manifest):
                raise ParameterError(f"{out} was generated with a different configuration")
            records, good = _durable_prefix(out)
            records = records[:count]
            with open(out, "r+b") as fh:
                fh.truncate(good)
            if records:
                log.info("resuming %s at record %d", out, len(records))
        else:
            out.parent.mkdir(parents=True, exist_ok=True)
            mpath.write_text(_manifest_text(manifest), encoding="utf-8")
            out.write_bytes(b"")
        with open(out, "a", encoding="utf-8") as fh:
            for rec in _mine(manifest, range(len(records), count), workers):
                fh.write(_record_line(rec))
                fh.flush()
                os.fsync(fh.fileno())
                records.append(rec)
                if progress:
                    progress(rec)
    except OSError as exc:
        raise PersistenceError(f"writing {out} failed: {exc}", len(records) - 1) from exc
    return Corpus(manifest, records)


def save_corpus(corpus: Corpus, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        manifest_path(path).write_text(_manifest_text(corpus.manifest), encoding="utf-8")
        with open(path, "w", encoding="utf-8") as fh:
            for rec in corpus.records:
                fh.write(_record_line(rec))
    except OSError as exc:
        raise PersistenceError(f"writing {path} failed: {exc}") from exc


def load_corpus(path, allow_partial: bool = False) -> Corpus:
    """Read and validate a corpus.

    Raises :class:`ParseError` for malformed JSON, :class:`VersionError` for a
    newer format, and :class:`InvariantError` when a record breaks its
    invariants or the record count falls short of the manifest.
    """
    path = Path(path)
    try:
        mtext = manifest_path(path).read_text(encoding="utf-8")
        lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    except OSError as exc:
        raise PersistenceError(f"reading {path} failed: {exc}") from exc
    try:
        mdoc = json.loads(mtext)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path(path)}: {exc}") from exc
    if int(mdoc.get("version", 0)) > FORMAT_VERSION:
        raise VersionError(f"corpus format {mdoc['version']} is newer than supported {FORMAT_VERSION}")
    try:
        manifest = CorpusManifest.from_dict(mdoc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{manifest_path(path)}: malformed manifest ({exc})") from exc

    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.endswith("\n"):
            raise ParseError(f"{path}:{lineno}: truncated record")
        try:
            rec = TrainingRecord.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        rec.validate()
        if rec.index != len(records):
            raise InvariantError(f"{path}:{lineno}: expected index {len(records)}, got {rec.index}")
        records.append(rec)
    if len(records) > manifest.count or (not allow_partial and len(records) != manifest.count):
        raise InvariantError(f"{path}: {len(records)} records but manifest expects {manifest.count}")
    return Corpus(manifest, records)
