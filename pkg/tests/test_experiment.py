import json
import warnings

import numpy as np
import pytest

from conftest import StubModel, make_encoded
from tcol.experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentError,
    baseline_nearest_target,
    baseline_random_path,
    emit_report,
    run_experiment,
)


class TestNearestTargetBaseline:
    def test_exact_match_comes_back_first(self):
        query = np.array([0.4, 0.6])
        X = np.vstack([query, np.array([0.9, 0.9]), np.array([0.1, 0.1])])
        data = make_encoded(X, ["yes", "yes", "no"])
        ces = baseline_nearest_target(data, query, m=1)
        assert np.array_equal(ces[0].vector, query)
        assert ces[0].prototype_index == 0

    def test_requesting_more_than_available_is_an_error(self):
        data = make_encoded([[0.1], [0.5], [0.9]], ["yes", "no", "no"])
        with pytest.raises(ValueError, match="only 1 target rows"):
            baseline_nearest_target(data, np.array([0.2]), m=2)

    def test_matches_independent_sort(self):
        rng = np.random.default_rng(41)
        X = rng.random((15, 4))
        labels = ["yes" if i % 2 == 0 else "no" for i in range(15)]
        data = make_encoded(X, labels)
        query = rng.random(4)
        ces = baseline_nearest_target(data, query, m=3)
        target_rows = [i for i in range(15) if labels[i] == "yes"]
        expected = sorted(target_rows, key=lambda i: (float(np.linalg.norm(X[i] - query)), i))[:3]
        assert [ce.prototype_index for ce in ces] == expected


class TestRandomPathBaseline:
    def test_fixed_seed_is_deterministic(self, synthetic_encoded, validation_model):
        qi = int(np.flatnonzero(~synthetic_encoded.target_mask())[0])
        query = synthetic_encoded.X[qi]
        a = baseline_random_path(synthetic_encoded, query, 5, seed=11, validation_model=validation_model)
        b = baseline_random_path(synthetic_encoded, query, 5, seed=11, validation_model=validation_model)
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert np.array_equal(x.vector, y.vector) and x.path == y.path

    def test_all_immutable_schema_pins_to_query(self):
        X = np.array([[0.2, 0.3], [0.8, 0.9], [0.5, 0.5]])
        data = make_encoded(X, ["yes", "yes", "no"], immutable=(0, 1))
        query = np.array([0.4, 0.4])
        ces = baseline_random_path(data, query, 3, seed=0, validation_model=StubModel(always=True))
        assert len(ces) == 1  # only one distinct fill exists
        assert np.array_equal(ces[0].vector, query)

    def test_validated_outputs_classify_as_target(self, synthetic_encoded, validation_model):
        qi = int(np.flatnonzero(~synthetic_encoded.target_mask())[1])
        query = synthetic_encoded.X[qi]
        ces = baseline_random_path(synthetic_encoded, query, 5, seed=3, validation_model=validation_model)
        assert ces
        for ce in ces:
            assert ce.validated
            assert validation_model.predict(ce.vector) == synthetic_encoded.target_class

    def test_zero_hits_warns_and_returns_empty(self):
        data = make_encoded([[0.2], [0.8]], ["yes", "no"])
        with pytest.warns(UserWarning, match="no valid counterfactual"):
            ces = baseline_random_path(
                data, np.array([0.5]), 2, seed=0,
                validation_model=StubModel(always=False), attempts=10,
            )
        assert ces == []


class TestExperimentConfig:
    def test_from_json_round_trip(self, tmp_path, synthetic_files):
        payload = dict(
            synthetic_files,
            preferences=["a", "b"],
            generators=["tcol"],
            queries=3,
            seed=1,
            depth=3,
            num_ces=2,
            budget=16,
            jury=["knn", "decision_tree"],
            folds=5,
            out="r",
        )
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        config = ExperimentConfig.from_json(path)
        assert config.preferences == ("a", "b")
        assert config.queries == 3 and config.folds == 5

    def test_unknown_keys_rejected(self, tmp_path, synthetic_files):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(dict(synthetic_files, depht=3)), encoding="utf-8")
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_json(path)

    def test_missing_required_keys_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"dataset": "x.csv"}), encoding="utf-8")
        with pytest.raises(ValueError, match="missing config keys"):
            ExperimentConfig.from_json(path)

    def test_zero_queries_rejected(self, synthetic_files):
        with pytest.raises(ValueError, match="queries"):
            ExperimentConfig(**synthetic_files, queries=0)

    def test_unknown_generator_rejected(self, synthetic_files):
        with pytest.raises(ValueError, match="generator"):
            ExperimentConfig(**synthetic_files, generators=("dice",))


@pytest.fixture(scope="module")
def small_config(synthetic_files):
    return ExperimentConfig(
        **synthetic_files,
        preferences=("a", "c"),
        generators=("tcol", "nearest_target"),
        queries=4,
        seed=0,
        folds=5,
    )


@pytest.fixture(scope="module")
def small_record(small_config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_experiment(small_config)


class TestRunExperiment:
    def test_produces_one_row_per_generator_preference(self, small_record):
        combos = [(r.generator, r.preference) for r in small_record.rows]
        assert combos == [
            ("tcol", "a"), ("tcol", "c"),
            ("nearest_target", "a"), ("nearest_target", "c"),
        ]

    def test_rows_carry_counts_and_finite_metrics(self, small_record):
        for row in small_record.rows:
            assert row.n_queries == 4
            assert row.n_ces > 0
            assert 0.0 <= row.validity <= 1.0
            assert 0.0 <= row.data_fidelity <= 1.0

    def test_ce_tables_align_with_rows(self, small_record):
        assert len(small_record.ce_tables) == len(small_record.rows)
        for table in small_record.ce_tables:
            assert len(table["queries"]) == 4

    def test_decoded_values_come_from_dataset_or_query(self, small_record, synthetic):
        columns = {
            f.name: {row[i] for row in synthetic.rows}
            for i, f in enumerate(synthetic.schema)
        }
        kinds = {f.name: f.kind for f in synthetic.schema}
        for table in small_record.ce_tables:
            for entry in table["queries"]:
                for ce in entry["ces"]:
                    for name, value in ce["values"].items():
                        allowed = columns[name] | {entry["query"][name]}
                        if kinds[name] == "categorical":
                            assert value in allowed
                        else:
                            assert min(abs(value - u) for u in allowed) <= 1e-9

    def test_missing_dataset_aborts_with_stage_tag(self, synthetic_files):
        config = ExperimentConfig(
            dataset="/nonexistent/x.csv",
            schema=synthetic_files["schema"],
            target="loan",
            target_class="approved",
            queries=1,
        )
        with pytest.raises(ExperimentError, match=r"\[load\]"):
            run_experiment(config)

    def test_repeat_run_identical_without_timing(self, small_config, tmp_path):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rec1 = run_experiment(small_config, measure_runtime=False)
            rec2 = run_experiment(small_config, measure_runtime=False)
        p1 = emit_report(rec1, "csv", tmp_path / "a.csv")
        p2 = emit_report(rec2, "csv", tmp_path / "b.csv")
        assert p1.read_bytes() == p2.read_bytes()
        j1 = emit_report(rec1, "structured", tmp_path / "a.json")
        j2 = emit_report(rec2, "structured", tmp_path / "b.json")
        assert j1.read_bytes() == j2.read_bytes()


class TestEmitReport:
    def test_csv_column_order_is_exact(self, small_record, tmp_path):
        path = emit_report(small_record, "csv", tmp_path / "report.csv")
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "dataset,generator,preference,proximity,sparsity,validity,data_fidelity,centrality,runtime_s"
        assert header == ",".join(CSV_COLUMNS)

    def test_csv_has_one_line_per_row(self, small_record, tmp_path):
        path = emit_report(small_record, "csv", tmp_path / "report.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1 + len(small_record.rows)

    def test_empty_preferences_yield_header_only(self, synthetic_files, tmp_path):
        config = ExperimentConfig(**synthetic_files, preferences=(), queries=2, folds=5)
        record = run_experiment(config, measure_runtime=False)
        path = emit_report(record, "csv", tmp_path / "empty.csv")
        assert path.read_text(encoding="utf-8").splitlines() == [",".join(CSV_COLUMNS)]

    def test_structured_report_embeds_counterfactual_tables(self, small_record, tmp_path):
        path = emit_report(small_record, "structured", tmp_path / "report.json")
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert payload["format_version"] == 1
        assert len(payload["metrics"]) == len(small_record.rows)
        assert payload["counterfactuals"][0]["queries"][0]["ces"]

    def test_unknown_format_rejected(self, small_record, tmp_path):
        with pytest.raises(ValueError, match="format"):
            emit_report(small_record, "yaml", tmp_path / "x.yaml")
