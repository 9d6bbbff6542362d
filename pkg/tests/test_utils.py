"""Tests for the utility functions."""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"

import json
import os
import pathlib

import boto3
import moto
import numpy as np
import pandas as pd
import pytest

import src.utils as utils


@pytest.fixture(autouse=True)
def _setup_environment() -> None:
    """Set up the environment variables."""
    os.environ["AWS_ACCESS_KEY_ID"] = "test"
    os.environ["AWS_DEFAULT_REGION"] = "us-east-1"
    os.environ["AWS_SECRET_ACCESS_KEY"] = "test"  # noqa: S105 This is a fake value for the tests


@pytest.mark.parametrize(
    ("target", "expected"),
    [
        ("out/run", (None, "out/run")),
        ("s3://bucket", ("bucket", "")),
        ("s3://bucket/runs/7/", ("bucket", "runs/7")),
    ],
)
def test_split_target(target: str, expected: tuple[str | None, str]) -> None:
    """Test split_target for local and S3 targets."""
    assert utils.split_target(target) == expected


def test_split_target_no_bucket() -> None:
    """Test split_target rejects an S3 URI without a bucket."""
    with pytest.raises(ValueError, match="No bucket"):
        utils.split_target("s3:///prefix")


def test_to_json_sorted_and_numpy() -> None:
    """Test to_json sorts keys and converts numpy values."""
    payload = {"b": np.float64(0.5), "a": np.int64(3), "c": np.array([1.0, 2.0]), "d": np.bool_(True)}
    text = utils.to_json(payload)
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": 3, "b": 0.5, "c": [1.0, 2.0], "d": True}
    assert text.endswith("\n")


def test_to_json_deterministic() -> None:
    """Test to_json gives identical text for equal payloads built in different orders."""
    first = {"x": 1.0 / 3.0, "y": [1, 2]}
    second = {"y": [1, 2], "x": 1.0 / 3.0}
    assert utils.to_json(first) == utils.to_json(second)


def test_to_json_rejects_objects() -> None:
    """Test to_json refuses values it cannot serialise."""
    with pytest.raises(TypeError, match="Cannot serialise"):
        utils.to_json({"value": object()})


def test_write_json_local(tmp_path: pathlib.Path) -> None:
    """Test write_json creates the directory and writes the report."""
    target = tmp_path / "nested" / "run"
    written = utils.write_json(str(target), "report.json", {"a": 1})
    assert written == str(target / "report.json")
    assert json.loads((target / "report.json").read_text(encoding="utf-8")) == {"a": 1}


def test_write_csv_local(tmp_path: pathlib.Path) -> None:
    """Test write_csv keeps full precision and drops the index."""
    df = pd.DataFrame({"index": [0, 1], "value": [1.0 / 3.0, 2.0]})
    utils.write_csv(str(tmp_path), "u.csv", df)
    lines = (tmp_path / "u.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "index,value"
    assert float(lines[1].split(",")[1]) == 1.0 / 3.0


@pytest.mark.filterwarnings(
    "ignore::DeprecationWarning"
)  # "datetime.datetime.utcnow() is deprecated" coming from boto3
@moto.mock_aws
def test_write_json_s3() -> None:
    """Test that reports are written to S3 correctly."""
    s3 = boto3.client("s3")
    s3.create_bucket(Bucket="bucket")

    written = utils.write_json("s3://bucket/runs/1", "report.json", {"key": "value"})

    assert written == "s3://bucket/runs/1/report.json"
    response = s3.get_object(Bucket="bucket", Key="runs/1/report.json")
    assert response["Body"].read().decode("utf-8") == '{\n  "key": "value"\n}\n'


@pytest.mark.filterwarnings("ignore::DeprecationWarning")
@moto.mock_aws
def test_write_csv_s3_bucket_root() -> None:
    """Test that a CSV lands at the bucket root when no prefix is given."""
    s3 = boto3.client("s3")
    s3.create_bucket(Bucket="bucket")

    utils.write_csv("s3://bucket", "path.csv", pd.DataFrame({"t": [0.5]}))

    response = s3.get_object(Bucket="bucket", Key="path.csv")
    assert response["Body"].read().decode("utf-8") == "t\n0.5\n"


def test_summarize_counts() -> None:
    """Test summarize counts passing and failing suites per dimension pair."""
    df = pd.DataFrame(
        {
            "name": ["newton", "garding", "newton", "euler"],
            "n": [4, 4, 3, 3],
            "k": [2, 2, 2, 2],
            "passed": [True, False, True, True],
        }
    )
    result = utils.summarize(df)
    assert result[["n", "k"]].to_numpy().tolist() == [[3, 2], [4, 2]]
    assert result["Passed"].tolist() == [2, 1]
    assert result["Failed"].tolist() == [0, 1]


def test_summarize_empty() -> None:
    """Test summarize with no suites."""
    result = utils.summarize(pd.DataFrame({"n": [], "k": [], "passed": []}))
    assert result.empty
