"""Utility functions for writing run artifacts."""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import json
import logging
import os
import pathlib
import typing

import boto3
import numpy as np
import pandas as pd
from types_boto3_s3.client import S3Client

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

S3_SCHEME = "s3://"
CSV_FLOAT_FORMAT = "%.17g"


def split_target(target: str) -> tuple[str | None, str]:
    """
    Split an output target into bucket and prefix.

    Args:
    ----
        target: A local directory or an s3://bucket/prefix URI.

    Returns:
    -------
        The bucket (None for local targets) and the directory or key prefix.

    """
    if not target.startswith(S3_SCHEME):
        return None, target
    bucket, _, prefix = target[len(S3_SCHEME) :].partition("/")
    if not bucket:
        raise ValueError(f"No bucket in output target {target}")  # noqa: TRY003
    return bucket, prefix.strip("/")


def _plain(value: typing.Any) -> typing.Any:  # noqa: ANN401 json default hook
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Cannot serialise {type(value).__name__}")  # noqa: TRY003


def to_json(payload: typing.Mapping[str, typing.Any]) -> str:
    """Render a report deterministically: sorted keys, fixed indentation."""
    return json.dumps(payload, default=_plain, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_text(target: str, name: str, body: str) -> str:
    """
    Write a text artifact to a local directory or an S3 prefix.

    Args:
    ----
        target: Output directory or s3://bucket/prefix.
        name: File name of the artifact.
        body: The content.

    Returns:
    -------
        Where the artifact was written.

    """
    bucket, prefix = split_target(target)
    if bucket is None:
        directory = pathlib.Path(prefix)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / name
        path.write_text(body, encoding="utf-8")
        LOGGER.debug("Wrote %s", path)
        return str(path)

    key = f"{prefix}/{name}" if prefix else name
    s3: S3Client = boto3.client("s3")
    s3.put_object(Bucket=bucket, Key=key, Body=body.encode("utf-8"))
    LOGGER.debug("Uploaded s3://%s/%s", bucket, key)
    return f"{S3_SCHEME}{bucket}/{key}"


def write_json(target: str, name: str, payload: typing.Mapping[str, typing.Any]) -> str:
    """Write a JSON report."""
    return write_text(target, name, to_json(payload))


def write_csv(target: str, name: str, dataframe: pd.DataFrame) -> str:
    """Write a dataframe as CSV with full float precision and no index column."""
    return write_text(target, name, dataframe.to_csv(index=False, float_format=CSV_FLOAT_FORMAT))


def summarize(df: pd.DataFrame) -> pd.DataFrame:
    """
    Count passing and failing suites per dimension pair.

    Args:
    ----
        df: One row per suite with n, k and passed columns.

    Returns:
    -------
        A DataFrame with columns n, k, Passed, Failed sorted by (n, k).

    """
    if df.empty:
        return pd.DataFrame({"n": [], "k": [], "Passed": [], "Failed": []})
    grouped = df.groupby(["n", "k"])["passed"].agg(["sum", "count"]).reset_index()
    grouped["Failed"] = grouped["count"] - grouped["sum"]
    grouped = grouped.rename(columns={"sum": "Passed"}).drop(columns="count")
    grouped.sort_values(["n", "k"], inplace=True)
    return grouped.reset_index(drop=True)
