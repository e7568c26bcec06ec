"""
Unit tests for the artifact store.

Tests writing and reading every stage output in a run directory.
"""

import json
import os

import numpy as np
import pytest

from rdbn.bootstrap import EdgeStrengthTable
from rdbn.dag import Dag
from rdbn.exceptions import DeserializationError
from rdbn.network import fit_network
from rdbn.persistence import (
    FILE_FORMAT_VERSION,
    ArtifactStore,
    file_digest,
    read_dag,
    read_dataset,
    read_json,
    read_network,
    read_strengths,
)


class TestArtifactStoreInit:
    """Tests for ArtifactStore initialization."""

    def test_init_creates_directory(self, tmp_path):
        """Test that initialization creates the output directory."""
        out = tmp_path / "nested" / "run"
        store = ArtifactStore(out)
        assert os.path.isdir(out)
        assert store.list_files() == []

    def test_init_existing_directory(self, temp_out_dir):
        """Test initialization with an existing directory."""
        store = ArtifactStore(temp_out_dir)
        assert str(store.out_dir) == temp_out_dir


class TestJson:
    """Tests for versioned JSON files."""

    def test_version_stamp(self, temp_out_dir):
        """Test that every JSON artifact carries the format version."""
        store = ArtifactStore(temp_out_dir)
        store.write_json("x.json", {"a": 1})
        assert read_json(store.path("x.json")) == {"version": FILE_FORMAT_VERSION, "a": 1}

    def test_nonfinite_becomes_null(self, temp_out_dir):
        """Test NaN and infinity are stored as null."""
        store = ArtifactStore(temp_out_dir)
        store.write_json("x.json", {"gap": float("inf"), "values": np.array([1.0, np.nan])})
        data = read_json(store.path("x.json"))
        assert data["gap"] is None
        assert data["values"] == [1.0, None]

    def test_sorted_keys(self, temp_out_dir):
        """Test output is stable across runs."""
        store = ArtifactStore(temp_out_dir)
        store.write_json("x.json", {"b": 1, "a": 2})
        text = store.path("x.json").read_text()
        assert text.index('"a"') < text.index('"b"')

    def test_newer_version_rejected(self, temp_out_dir):
        """Test that files from a newer format are refused."""
        path = os.path.join(temp_out_dir, "new.json")
        with open(path, "w") as f:
            json.dump({"version": FILE_FORMAT_VERSION + 1}, f)
        with pytest.raises(DeserializationError):
            read_json(path)

    def test_non_integer_version_rejected(self, temp_out_dir):
        """Test that a version that is not a format number is refused."""
        path = os.path.join(temp_out_dir, "odd.json")
        with open(path, "w") as f:
            json.dump({"version": "0.1.0"}, f)
        with pytest.raises(DeserializationError):
            read_json(path)

    def test_corrupt(self, temp_out_dir):
        """Test that corrupt JSON is reported."""
        path = os.path.join(temp_out_dir, "bad.json")
        with open(path, "w") as f:
            f.write("{not json")
        with pytest.raises(DeserializationError):
            read_json(path)

    def test_not_an_object(self, temp_out_dir):
        """Test that a JSON list is not an artifact."""
        path = os.path.join(temp_out_dir, "list.json")
        with open(path, "w") as f:
            f.write("[1, 2]")
        with pytest.raises(DeserializationError):
            read_json(path)

    def test_missing(self, temp_out_dir):
        """Test that a missing file is reported."""
        with pytest.raises(DeserializationError):
            read_json(os.path.join(temp_out_dir, "absent.json"))

    def test_jsonl(self, temp_out_dir):
        """Test one JSON record per line."""
        store = ArtifactStore(temp_out_dir)
        store.write_jsonl("t.jsonl", [{"i": 1}, {"i": 2, "d": float("nan")}])
        lines = store.path("t.jsonl").read_text().splitlines()
        assert [json.loads(line) for line in lines] == [{"i": 1}, {"d": None, "i": 2}]


class TestAtomicWrite:
    """Tests for atomic file replacement."""

    def test_no_temp_files_left(self, temp_out_dir):
        """Test that temporary files are renamed away."""
        store = ArtifactStore(temp_out_dir)
        store.write_text("a.txt", "one")
        store.write_text("a.txt", "two")
        assert store.path("a.txt").read_text() == "two"
        assert not any(name.endswith(".tmp") for name in os.listdir(temp_out_dir))

    def test_digest(self, temp_out_dir):
        """Test digests follow file content."""
        store = ArtifactStore(temp_out_dir)
        path = store.write_text("a.txt", "one")
        first = file_digest(path)
        store.write_text("a.txt", "two")
        assert file_digest(path) != first
        assert len(first) == 64


class TestDomainFiles:
    """Tests for dataset, DAG, network and strength files."""

    def test_dataset_roundtrip(self, temp_out_dir, small_dataset):
        """Test a dataset with missing cells survives CSV."""
        store = ArtifactStore(temp_out_dir)
        path = store.write_dataset("merged", small_dataset)
        assert store.exists("merged.json")
        loaded = read_dataset(path)
        assert loaded.countries == small_dataset.countries
        assert loaded.columns == small_dataset.columns
        np.testing.assert_array_equal(loaded.mask, small_dataset.mask)
        np.testing.assert_allclose(
            np.nan_to_num(loaded.values), np.nan_to_num(small_dataset.values), rtol=1e-12
        )

    def test_dataset_subject_from_sidecar(self, temp_out_dir, small_dataset):
        """Test the subject is restored from the JSON sidecar."""
        import dataclasses

        store = ArtifactStore(temp_out_dir)
        math_data = dataclasses.replace(small_dataset, subject="math")
        path = store.write_dataset("merged", math_data)
        assert read_dataset(path).subject == "math"
        assert read_dataset(path, subject="science").subject == "science"

    def test_dataset_malformed(self, temp_out_dir):
        """Test that a CSV without a country column is refused."""
        path = os.path.join(temp_out_dir, "bad.csv")
        with open(path, "w") as f:
            f.write("a,b\n1,2\n")
        with pytest.raises(DeserializationError):
            read_dataset(path)

    def test_dag_files(self, temp_out_dir):
        """Test DOT and JSON forms of a DAG."""
        store = ArtifactStore(temp_out_dir)
        dag = Dag(["Y", "X2005"], [("X2005", "Y")])
        store.write_dag("consensus", dag, strengths={("X2005", "Y"): 0.7})
        assert read_dag(store.path("consensus.json")) == dag
        assert "strength=0.7" in store.path("consensus.dot").read_text()

    def test_cyclic_dag_file(self, temp_out_dir):
        """Test a stored cycle fails to load."""
        store = ArtifactStore(temp_out_dir)
        store.write_json("dag.json", {"dag": {"nodes": ["a", "b"], "edges": [["a", "b"], ["b", "a"]]}})
        with pytest.raises(DeserializationError):
            read_dag(store.path("dag.json"))

    def test_network_roundtrip(self, temp_out_dir, chain_frame):
        """Test fitted parameters survive JSON."""
        store = ArtifactStore(temp_out_dir)
        net = fit_network(Dag(["a", "b", "c"], [("a", "b"), ("b", "c")]), chain_frame)
        store.write_network("network.json", net)
        loaded = read_network(store.path("network.json"))
        assert loaded.dag == net.dag
        for v in net.nodes:
            assert loaded[v].intercept == net[v].intercept
            assert loaded[v].coefficients == net[v].coefficients
            assert loaded[v].residual_variance == net[v].residual_variance

    def test_strengths_roundtrip(self, temp_out_dir):
        """Test edge strength tables survive JSON and get a CSV view."""
        store = ArtifactStore(temp_out_dir)
        table = EdgeStrengthTable(("Y", "a"), {("a", "Y"): 3}, 4)
        store.write_strengths("strengths", table)
        assert read_strengths(store.path("strengths.json")).strengths() == {("a", "Y"): 0.75}
        assert store.path("strengths.csv").read_text().splitlines()[0] == "parent,child,strength,direction"

    def test_strengths_missing_entry(self, temp_out_dir):
        """Test a JSON file without strengths is refused."""
        store = ArtifactStore(temp_out_dir)
        store.write_json("other.json", {"dag": {}})
        with pytest.raises(DeserializationError):
            read_strengths(store.path("other.json"))

    def test_manifest(self, temp_out_dir):
        """Test manifest save and load."""
        store = ArtifactStore(temp_out_dir)
        store.save_manifest({"command": "learn", "argv": ["learn"]})
        assert store.load_manifest()["command"] == "learn"
        assert store.list_files() == ["manifest.json"]
