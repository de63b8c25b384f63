import numpy as np
import pytest

from tcol.data import SYNTHETIC_TARGET, SYNTHETIC_TARGET_CLASS, load_synthetic, synthetic_paths
from tcol.models import ClassifierModel, cv_weights, fit_builtin
from tcol.tabular import EncodedDataset, FeatureSchema, encode_dataset, fit_encoder


def numeric_schema(n_features, immutable=()):
    """All-numeric [0,1] schema for tests that build encoded data directly."""
    return tuple(
        FeatureSchema(
            name=f"f{i}",
            kind="numeric",
            mutability="immutable" if i in immutable else "mutable",
            domain=(0.0, 1.0),
        )
        for i in range(n_features)
    )


def make_encoded(X, y, target_class="yes", immutable=()):
    X = np.asarray(X, dtype=float)
    return EncodedDataset(
        X=X,
        y=np.asarray(y, dtype=object),
        target_class=target_class,
        schema=numeric_schema(X.shape[1], immutable=immutable),
    )


class StubModel(ClassifierModel):
    """Predicts the target class exactly for vectors in a fixed 'yes' set."""

    kind = "stub"

    def __init__(self, target_class="yes", other_class="no", yes_vectors=None, always=None):
        super().__init__()
        self.target_class = target_class
        self.other_class = other_class
        self.always = always
        self._yes = {np.asarray(v, dtype=float).tobytes() for v in (yes_vectors or [])}
        self.fitted = True

    def _fit(self, X, y):
        pass

    def predict_proba(self, vector):
        if self.always is not None:
            return 1.0 if self.always else 0.0
        return 1.0 if np.asarray(vector, dtype=float).tobytes() in self._yes else 0.0


@pytest.fixture(scope="session")
def synthetic():
    return load_synthetic()


@pytest.fixture(scope="session")
def synthetic_encoder(synthetic):
    return fit_encoder(synthetic)


@pytest.fixture(scope="session")
def synthetic_encoded(synthetic, synthetic_encoder):
    return encode_dataset(synthetic_encoder, synthetic)


@pytest.fixture(scope="session")
def validation_model(synthetic_encoded):
    return fit_builtin("random_forest", synthetic_encoded, seed=0)


@pytest.fixture(scope="session")
def synthetic_jury(synthetic_encoded):
    return cv_weights(("knn", "naive_bayes", "decision_tree"), synthetic_encoded, folds=10, seed=0)


@pytest.fixture(scope="session")
def synthetic_files():
    csv_path, schema_path = synthetic_paths()
    return {
        "dataset": str(csv_path),
        "schema": str(schema_path),
        "target": SYNTHETIC_TARGET,
        "target_class": SYNTHETIC_TARGET_CLASS,
    }
