"""End-to-end experiment harness: config, baselines, orchestration, reports.

``run_experiment`` loads and encodes a dataset, fits the validation model
(random forest) and the cross-validated jury, samples seeded non-target
query rows, generates counterfactual sets per (generator, preference),
times the generation, and aggregates the full metric suite into one
report row per (generator, preference). Reports serialize to a CSV table
with a fixed column order and to a structured JSON document that also
embeds the decoded counterfactual tables.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .engine import CandidateCE, GenerationConfig, generate, select_prototypes
from .models import ClassifierModel, cv_weights, fit_builtin
from .scoring import EUCLIDEAN, distance_fn
from .tabular import Dataset, EncodedDataset, Encoder, encode_dataset, fit_encoder, load_csv, load_schema

GENERATORS = ("tcol", "nearest_target", "random_path")

CSV_COLUMNS = (
    "dataset",
    "generator",
    "preference",
    "proximity",
    "sparsity",
    "validity",
    "data_fidelity",
    "centrality",
    "runtime_s",
)

CONFIG_KEYS = (
    "dataset",
    "schema",
    "target",
    "target_class",
    "preferences",
    "generators",
    "queries",
    "seed",
    "depth",
    "num_ces",
    "budget",
    "jury",
    "folds",
    "out",
)

_REQUIRED_KEYS = ("dataset", "schema", "target", "target_class")


class ExperimentError(RuntimeError):
    """A pipeline stage failed; the message carries the stage tag."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    schema: str
    target: str
    target_class: str
    preferences: tuple = ("a", "b", "c", "d", "e")
    generators: tuple = ("tcol",)
    queries: int = 10
    seed: int = 0
    depth: int = 3
    num_ces: int = 5
    budget: int = 64
    jury: tuple = ("knn", "naive_bayes", "decision_tree")
    folds: int = 10
    out: str = "report"

    def __post_init__(self):
        object.__setattr__(self, "preferences", tuple(self.preferences))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "jury", tuple(self.jury))
        if self.queries < 1:
            raise ValueError("queries must be positive")
        for gen in self.generators:
            if gen not in GENERATORS:
                raise ValueError(f"unknown generator {gen!r}, expected one of {GENERATORS}")
        # preference / depth / num_ces / budget are validated by GenerationConfig
        if self.preferences:
            for pref in self.preferences:
                GenerationConfig(
                    preference=pref, depth=self.depth, num_ces=self.num_ces, budget=self.budget
                )
        if len(self.jury) < 2:
            raise ValueError("jury needs at least two member kinds")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(CONFIG_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = set(_REQUIRED_KEYS) - set(raw)
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        return cls(**raw)

    def snapshot(self) -> dict:
        snap = asdict(self)
        snap["preferences"] = list(self.preferences)
        snap["generators"] = list(self.generators)
        snap["jury"] = list(self.jury)
        return snap


@dataclass
class RunRecord:
    """Everything one experiment produced: config, metric rows, decoded CEs."""

    config: dict
    dataset_name: str
    rows: list = field(default_factory=list)
    ce_tables: list = field(default_factory=list)
    query_indices: list = field(default_factory=list)


def baseline_nearest_target(
    data: EncodedDataset, query, m: int, distance: str = EUCLIDEAN
) -> list[CandidateCE]:
    """The m nearest target-class rows, returned verbatim as counterfactuals."""
    query = np.asarray(query, dtype=float)
    target_idx = np.flatnonzero(data.target_mask())
    if len(target_idx) < m:
        raise ValueError(f"requested {m} counterfactuals but only {len(target_idx)} target rows")
    dist = distance_fn(distance)
    d = np.array([dist(data.X[i], query) for i in target_idx])
    order = np.argsort(d, kind="stable")[:m]
    all_prototype = (0,) * data.n_features
    return [
        CandidateCE(
            vector=data.X[target_idx[i]].copy(),
            path=all_prototype,
            prototype_index=int(target_idx[i]),
            score=0.0,
            validated=False,
        )
        for i in order
    ]


def baseline_random_path(
    data: EncodedDataset,
    query,
    m: int,
    seed: int,
    validation_model: ClassifierModel,
    attempts: int = 200,
) -> list[CandidateCE]:
    """Random full-length paths over the nearest prototype, validated.

    Immutable positions are forced to the query side. Keeps the first m
    distinct validated fills; returns fewer (with a warning when zero) if
    the attempt budget runs out.
    """
    query = np.asarray(query, dtype=float)
    proto_idx = baseline_nearest_target(data, query, 1)[0].prototype_index
    prototype = data.X[proto_idx]
    immutable = data.immutable_mask()
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    for _ in range(attempts):
        bits = rng.integers(0, 2, size=data.n_features)
        bits[immutable] = 1
        path = tuple(int(b) for b in bits)
        vector = np.where(np.asarray(path) == 1, query, prototype)
        key = vector.tobytes()
        if key in seen:
            continue
        if validation_model.predict(vector) != data.target_class:
            continue
        seen.add(key)
        out.append(
            CandidateCE(
                vector=vector, path=path, prototype_index=proto_idx, score=0.0, validated=True
            )
        )
        if len(out) == m:
            break
    if not out:
        warnings.warn("random path baseline found no valid counterfactual", stacklevel=2)
    return out


def _sample_queries(data: EncodedDataset, count: int, seed: int) -> list[int]:
    non_target = np.flatnonzero(~data.target_mask())
    if len(non_target) < count:
        raise ValueError(f"requested {count} queries but only {len(non_target)} non-target rows")
    picked = np.random.default_rng(seed).choice(non_target, size=count, replace=False)
    return sorted(int(i) for i in picked)


def _generate_for(
    generator: str,
    preference: str,
    data: EncodedDataset,
    query: np.ndarray,
    query_index: int,
    config: ExperimentConfig,
    validation_model: ClassifierModel,
) -> list[CandidateCE]:
    if generator == "tcol":
        gen_config = GenerationConfig(
            preference=preference,
            depth=config.depth,
            num_ces=config.num_ces,
            budget=config.budget,
            seed=config.seed,
        )
        return generate(data, query, gen_config, validation_model)
    if generator == "nearest_target":
        return baseline_nearest_target(data, query, config.num_ces)
    return baseline_random_path(
        data, query, config.num_ces, config.seed + 7919 * query_index, validation_model
    )


def run_experiment(config: ExperimentConfig, measure_runtime: bool = True) -> RunRecord:
    """Run the full pipeline; see the module docstring.

    ``measure_runtime=False`` writes 0.0 in place of wall-clock timing so
    that two runs of the same config are byte-identical end to end.
    """

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ExperimentError:
            raise
        except Exception as exc:
            raise ExperimentError(name, str(exc)) from exc

    schema = stage("schema", load_schema, config.schema)
    dataset: Dataset = stage(
        "load", load_csv, config.dataset, schema, config.target, config.target_class
    )
    encoder: Encoder = stage("encode", fit_encoder, dataset)
    encoded: EncodedDataset = stage("encode", encode_dataset, encoder, dataset)
    validation_model = stage("train", fit_builtin, "random_forest", encoded, config.seed)
    jury = stage("jury", cv_weights, config.jury, encoded, config.folds, config.seed)
    query_indices = stage("sample", _sample_queries, encoded, config.queries, config.seed)

    record = RunRecord(
        config=config.snapshot(),
        dataset_name=Path(config.dataset).stem,
        query_indices=query_indices,
    )

    for generator in config.generators:
        for preference in config.preferences:
            sets, times, table = [], [], []
            for qi in query_indices:
                query = encoded.X[qi]
                start = time.perf_counter() if measure_runtime else 0.0
                ces = stage(
                    "generate",
                    _generate_for,
                    generator,
                    preference,
                    encoded,
                    query,
                    qi,
                    config,
                    validation_model,
                )
                if measure_runtime:
                    times.append(time.perf_counter() - start)
                sets.append((qi, ces))
                table.append(
                    {
                        "query_index": qi,
                        "query": _decoded(encoder, query),
                        "ces": [
                            {
                                "values": _decoded(encoder, ce.vector),
                                "validated": ce.validated,
                                "fallback": ce.fallback,
                            }
                            for ce in ces
                        ],
                    }
                )
            row = stage(
                "metrics",
                _aggregate,
                record.dataset_name,
                generator,
                preference,
                sets,
                encoded,
                validation_model,
                jury,
                float(np.mean(times)) if times else 0.0,
            )
            record.rows.append(row)
            record.ce_tables.append(
                {"generator": generator, "preference": preference, "queries": table}
            )
    return record


def _decoded(encoder: Encoder, vector) -> dict:
    values = encoder.decode(vector)
    return {f.name: v for f, v in zip(encoder.schema, values)}


def _aggregate(
    dataset_name, generator, preference, sets, encoded, validation_model, jury, mean_time
) -> metrics_mod.MetricsRow:
    """Average each metric over the per-query counterfactual sets."""
    prox, spar, val, fid, cen = [], [], [], [], []
    n_ces = 0
    skipped_centrality = 0
    for qi, ces in sets:
        if not ces:
            continue
        n_ces += len(ces)
        query = encoded.X[qi]
        vectors = [ce.vector for ce in ces]
        prox.append(metrics_mod.proximity(vectors, query))
        spar.append(metrics_mod.sparsity(vectors, query))
        val.append(metrics_mod.validity(vectors, validation_model, encoded.target_class))
        fid.append(metrics_mod.data_fidelity(vectors, jury, encoded.target_class))
        ratios = []
        for v in vectors:
            try:
                ratios.append(metrics_mod.centrality(v, encoded))
            except ValueError:
                skipped_centrality += 1  # CE coincides with a centroid neighbor
        if ratios:
            cen.append(float(np.mean(ratios)))
    if skipped_centrality:
        warnings.warn(
            f"{skipped_centrality} counterfactuals coincided with centroid neighbors "
            f"and were excluded from centrality ({generator}/{preference})",
            stacklevel=2,
        )
    if n_ces == 0:
        warnings.warn(f"no counterfactuals produced for {generator}/{preference}", stacklevel=2)
    return metrics_mod.MetricsRow(
        dataset=dataset_name,
        generator=generator,
        preference=preference,
        proximity=float(np.mean(prox)) if prox else 0.0,
        sparsity=float(np.mean(spar)) if spar else 0.0,
        validity=float(np.mean(val)) if val else 0.0,
        data_fidelity=float(np.mean(fid)) if fid else 0.0,
        centrality=float(np.mean(cen)) if cen else 0.0,
        runtime_s=mean_time,
        n_queries=len(sets),
        n_ces=n_ces,
    )


def emit_report(record: RunRecord, fmt: str, path: str | Path) -> Path:
    """Write the report; ``fmt`` is ``csv`` or ``structured`` (JSON)."""
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in record.rows:
            lines.append(
                ",".join(
                    [
                        row.dataset,
                        row.generator,
                        row.preference,
                        f"{row.proximity:.6f}",
                        f"{row.sparsity:.6f}",
                        f"{row.validity:.6f}",
                        f"{row.data_fidelity:.6f}",
                        f"{row.centrality:.6f}",
                        f"{row.runtime_s:.6f}",
                    ]
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
    if fmt == "structured":
        payload = {
            "format_version": 1,
            "config": record.config,
            "dataset": record.dataset_name,
            "query_indices": record.query_indices,
            "metrics": [asdict(row) for row in record.rows],
            "counterfactuals": record.ce_tables,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
    raise ValueError(f"unknown report format {fmt!r}, expected 'csv' or 'structured'")
