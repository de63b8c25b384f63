"""Evaluation of counterfactual sets: proximity, sparsity, validity,
data fidelity, centrality, and the reliability composite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ClassifierModel, ThirdPartyJury, f1_score
from .scoring import EUCLIDEAN, count_diffs, distance_fn
from .tabular import EncodedDataset


def _vectors(ces) -> list[np.ndarray]:
    """Accept raw vectors or CandidateCE-like objects with a .vector field."""
    out = [np.asarray(getattr(ce, "vector", ce), dtype=float) for ce in ces]
    if not out:
        raise ValueError("empty counterfactual list")
    return out


def proximity(ces, query, distance: str = EUCLIDEAN) -> float:
    """Mean distance from each counterfactual to the query."""
    dist = distance_fn(distance)
    query = np.asarray(query, dtype=float)
    return float(np.mean([dist(v, query) for v in _vectors(ces)]))


def sparsity(ces, query) -> float:
    """Mean count of features where a counterfactual differs from the query."""
    query = np.asarray(query, dtype=float)
    return float(np.mean([count_diffs(v, query) for v in _vectors(ces)]))


def validity(ces, model: ClassifierModel, target_class) -> float:
    """Fraction of counterfactuals the model classifies as the target class."""
    return float(np.mean([model.predict(v) == target_class for v in _vectors(ces)]))


def member_agreement(model: ClassifierModel, ces, target_class) -> float:
    """One juror's endorsement of a counterfactual set, as an F1 score.

    Every counterfactual's reference label is the target class, so the
    confusion matrix degenerates: precision is 1 whenever the juror
    predicts the target class at all, and recall is the predicted-target
    fraction.
    """
    preds = [model.predict(v) for v in _vectors(ces)]
    agreeing = sum(1 for p in preds if p == target_class)
    precision = 1.0 if agreeing else 0.0
    recall = agreeing / len(preds)
    return f1_score(precision, recall)


def data_fidelity(ces, jury: ThirdPartyJury, target_class) -> float:
    """Weight-averaged juror agreement: sum(w_i * p_i) / sum(w_i)."""
    total = sum(jury.weights)
    if total == 0.0:
        raise ValueError("jury weights sum to zero")
    weighted = sum(
        w * member_agreement(model, ces, target_class) for model, w in jury.members
    )
    return weighted / total


def centrality(
    ce,
    data: EncodedDataset,
    n_neighbors: int = 10,
    distance: str = EUCLIDEAN,
) -> float:
    """Mean ratio d(neighbor, centroid) / d(neighbor, ce) over the target
    rows nearest the target-class centroid.

    A counterfactual that coincides with a neighbor makes a ratio undefined
    and raises; callers may exclude such counterfactuals rather than smooth.
    """
    ce = np.asarray(getattr(ce, "vector", ce), dtype=float)
    dist = distance_fn(distance)
    rows = data.X[data.target_mask()]
    if len(rows) < n_neighbors:
        raise ValueError(f"need at least {n_neighbors} target rows, got {len(rows)}")
    center = rows.mean(axis=0)
    to_center = np.array([dist(r, center) for r in rows])
    nearest = np.argsort(to_center, kind="stable")[:n_neighbors]
    ratios = []
    for i in nearest:
        denom = dist(rows[i], ce)
        if denom == 0.0:
            raise ValueError("counterfactual coincides with a centroid neighbor")
        ratios.append(to_center[i] / denom)
    return float(np.mean(ratios))


def reliability_composite(data_fidelity_value: float, validity_value: float) -> float:
    """Reliability under model change: 0.75 * data fidelity + 0.25 * validity."""
    for name, v in (("data_fidelity", data_fidelity_value), ("validity", validity_value)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return 0.75 * data_fidelity_value + 0.25 * validity_value


@dataclass(frozen=True)
class MetricsRow:
    """One report line: a (dataset, generator, preference) cell of the
    property table, averaged over query samples."""

    dataset: str
    generator: str
    preference: str
    proximity: float
    sparsity: float
    validity: float
    data_fidelity: float
    centrality: float
    runtime_s: float
    n_queries: int
    n_ces: int

    def __post_init__(self):
        for name in ("proximity", "sparsity", "validity", "data_fidelity", "centrality", "runtime_s"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if not 0.0 <= self.validity <= 1.0:
            raise ValueError("validity outside [0, 1]")
        if not 0.0 <= self.data_fidelity <= 1.0:
            raise ValueError("data_fidelity outside [0, 1]")
