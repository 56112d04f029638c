"""Loading and validation of the experiment CSV/manifest artifacts."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

__all__ = ["RenderInputError", "load_trajectory", "load_table", "load_manifest"]


class RenderInputError(RuntimeError):
    """A required input file is missing, empty, or malformed."""


def _check_exists(path: str) -> None:
    if not os.path.isfile(path):
        raise RenderInputError(f"missing input file: {path}")
    if os.path.getsize(path) == 0:
        raise RenderInputError(f"empty input file: {path}")


def load_trajectory(path: str) -> tuple[list[str], np.ndarray]:
    """Read a trajectory CSV (header ``t,<components...>``) into an array."""
    _check_exists(path)
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header[0] != "t" or len(header) < 2:
            raise RenderInputError(f"{path}: not a trajectory CSV (header {header})")
        try:
            data = np.loadtxt(f, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise RenderInputError(f"{path}: malformed trajectory data: {exc}") from exc
    if data.size == 0 or data.shape[1] != len(header):
        raise RenderInputError(f"{path}: no data rows or column mismatch")
    return header, data


def load_table(path: str, required: tuple[str, ...]) -> list[dict]:
    """Read a summary CSV into dict rows, checking the required columns."""
    _check_exists(path)
    with open(path) as f:
        reader = csv.DictReader(f)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise RenderInputError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise RenderInputError(f"{path}: no data rows")
    return rows


def load_manifest(path: str) -> dict:
    _check_exists(path)
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise RenderInputError(f"{path}: malformed manifest: {exc}") from exc
