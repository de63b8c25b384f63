"""Path-scoring functions for candidate feature combinations.

All three rules compare a candidate combination against the prototype it
borrows values from and the query it explains, on encoded vectors:

  fcs  sigmoid(cos(candidate, prototype)) * diffs(candidate, query)
       (literal form; the sparsity-corrected variant uses n - diffs)
  ncs  sigmoid(cos(candidate, prototype)) / exp(d(candidate, query))
  rss  exp(cos(candidate, prototype)) / sigmoid(d(candidate, query))

Higher is better for every rule. Distances default to Euclidean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
MANHATTAN = "manhattan"

FCS_LITERAL = "literal"
FCS_SPARSITY_CORRECTED = "sparsity_corrected"


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def euclidean(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.linalg.norm(a - b))


def manhattan(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.abs(a - b).sum())


DISTANCES = {EUCLIDEAN: euclidean, MANHATTAN: manhattan}


def distance_fn(tag: str):
    try:
        return DISTANCES[tag]
    except KeyError:
        raise ValueError(f"unknown distance {tag!r}, expected one of {sorted(DISTANCES)}") from None


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vector shapes differ: {a.shape} vs {b.shape}")
    return a, b


def cosine(a, b) -> float:
    """Cosine similarity; undefined (error) when either vector is all zero."""
    a, b = _pair(a, b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vector")
    c = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, c))


def count_diffs(a, b) -> int:
    """Number of components where the vectors differ, by exact equality.

    Feature-based candidates copy components verbatim from their sources,
    so equality is bitwise and no tolerance is appropriate.
    """
    a, b = _pair(a, b)
    return int(np.sum(a != b))


def fcs(candidate, prototype, query, variant: str = FCS_SPARSITY_CORRECTED) -> float:
    """Few-counterfactual score.

    The literal form grows with the number of differing features; the
    sparsity-corrected default rewards fewer differences (n - diffs),
    which is the direction a sparsity-seeking caller wants to maximize.
    """
    sim = sigmoid(cosine(candidate, prototype))
    diffs = count_diffs(candidate, query)
    if variant == FCS_LITERAL:
        return sim * diffs
    if variant == FCS_SPARSITY_CORRECTED:
        return sim * (len(np.asarray(candidate)) - diffs)
    raise ValueError(f"unknown fcs variant {variant!r}")


def ncs(candidate, prototype, query, distance: str = EUCLIDEAN) -> float:
    """Near-counterfactual score: prototype similarity over exp(query distance)."""
    sim = sigmoid(cosine(candidate, prototype))
    return sim / math.exp(distance_fn(distance)(candidate, query))


def rss(candidate, prototype, query, distance: str = EUCLIDEAN) -> float:
    """Relative similarity score: exp(prototype similarity) over sigmoid(query distance)."""
    sim = math.exp(cosine(candidate, prototype))
    return sim / sigmoid(distance_fn(distance)(candidate, query))


RULE_TAGS = ("fcs", "ncs", "rss")


@dataclass(frozen=True)
class ScoreRule:
    """A fully specified scoring rule: tag plus distance / fcs variant knobs."""

    tag: str
    distance: str = EUCLIDEAN
    fcs_variant: str = FCS_SPARSITY_CORRECTED

    def __post_init__(self):
        if self.tag not in RULE_TAGS:
            raise ValueError(f"unknown score rule {self.tag!r}")
        distance_fn(self.distance)
        if self.fcs_variant not in (FCS_LITERAL, FCS_SPARSITY_CORRECTED):
            raise ValueError(f"unknown fcs variant {self.fcs_variant!r}")

    def score(self, candidate, prototype, query) -> float:
        if self.tag == "fcs":
            return fcs(candidate, prototype, query, variant=self.fcs_variant)
        if self.tag == "ncs":
            return ncs(candidate, prototype, query, distance=self.distance)
        return rss(candidate, prototype, query, distance=self.distance)
