"""
Unit tests for instance schema validation and the instance file codec.
"""

import json

import numpy as np
import pytest

from randcons.errors import InstanceFormatError
from randcons.experiments import LocalizationSpec, build_localization_instance
from randcons.geometry import MixedIntegerSpace
from randcons.instance import SCHEMA_VERSION, Instance, load_instance, save_instance
from randcons.network import EdgeSchedule
from randcons.schema_validator import (
    assert_valid_instance,
    load_schema,
    validate_instance,
    validate_instance_file,
)
from randcons.uncertainty import UncertainConstraintSet


def minimal_instance():
    sets = tuple(
        UncertainConstraintSet.interval_matrix(i, np.array([[1.0, -1.0]]), np.array([2.0]), 0.1)
        for i in (1, 2)
    )
    return Instance(
        kind="milp", seed=5, space=MixedIntegerSpace(1, 1), objective=(1.0, 1.0), sets=sets,
        schedule=EdgeSchedule.static(2, {(1, 2), (2, 1)}), epsilons=(0.05, 0.05), deltas=(1e-4, 1e-4),
        epsilon=0.1, delta=2e-4,
    )


class TestSchemaValidator:
    """Test schema validation functionality."""

    def test_load_schema(self):
        schema = load_schema()

        assert isinstance(schema, dict)
        assert "$schema" in schema
        assert "properties" in schema
        assert "required" in schema

    def test_validate_generated_instance(self):
        is_valid, errors = validate_instance(minimal_instance().to_dict())

        assert is_valid, f"Validation failed: {errors}"
        assert errors == []

    def test_missing_required_field(self):
        data = minimal_instance().to_dict()
        del data["schedule"]

        is_valid, errors = validate_instance(data)

        assert not is_valid
        assert any("schedule" in error for error in errors)

    def test_wrong_schema_version(self):
        data = minimal_instance().to_dict()
        data["schema_version"] = 99

        is_valid, errors = validate_instance(data)

        assert not is_valid
        assert any(error.startswith("schema_version") for error in errors)

    def test_error_paths_point_into_nodes(self):
        data = minimal_instance().to_dict()
        data["nodes"][1]["epsilon"] = 1.5

        is_valid, errors = validate_instance(data)

        assert not is_valid
        assert any(error.startswith("nodes.1.epsilon") for error in errors)

    def test_assert_valid_raises(self):
        data = minimal_instance().to_dict()
        data["kind"] = "quadratic"

        with pytest.raises(InstanceFormatError):
            assert_valid_instance(data)

    def test_validate_file(self, tmp_path):
        path = tmp_path / "instance.json"
        path.write_text(json.dumps(minimal_instance().to_dict()), encoding="utf-8")

        is_valid, errors = validate_instance_file(path)

        assert is_valid, errors

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            validate_instance_file(tmp_path / "missing.json")


class TestInstanceFile:
    def test_save_and_load_milp(self, tmp_path):
        original = minimal_instance()
        loaded = load_instance(save_instance(original, tmp_path / "milp.json"))
        assert loaded == original
        assert loaded.to_dict()["schema_version"] == SCHEMA_VERSION

    def test_save_and_load_localization(self, tmp_path):
        original = build_localization_instance(LocalizationSpec(n=5, seed=1))
        loaded = load_instance(save_instance(original, tmp_path / "loc.json"))
        assert loaded.truth == original.truth
        assert loaded.sets[0].fixed_rows == original.sets[0].fixed_rows
        assert loaded.schedule.edges_at(0) == original.schedule.edges_at(0)

    def test_semantic_errors_become_format_errors(self):
        data = minimal_instance().to_dict()
        data["schedule"]["n"] = 3
        with pytest.raises(InstanceFormatError):
            Instance.from_dict(data)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(InstanceFormatError):
            load_instance(path)
