"""
Collection of helper functions
"""
import datetime
from pathlib import Path

import pandas as pd

from fusetrack.metrics import METRIC_KEYS

METRIC_ROW_COLUMNS = ("label", "sequence", "seed") + METRIC_KEYS


def list_sequence_dirs(path) -> list:
    """
    List the sequence directories of a dataset and their last modification time.

    A sequence directory is any direct sub-directory holding a ``meta.json``.

    Args:
        path: The dataset directory.

    Returns:
        list: Dictionaries with the sequence name ('name'), its directory ('path')
              and the last modification time of its ``meta.json`` ('last_modified'),
              sorted by name.

    Example:
        >>> for seq in list_sequence_dirs("runs/dataset"):
                print(f"Sequence: {seq['name']}, Last Modified: {seq['last_modified']}")
    """
    root = Path(path)
    if not root.is_dir():
        raise NotADirectoryError(f"Dataset path '{root}' is not a directory.")

    sequence_info = []
    for child in sorted(root.iterdir()):
        meta = child / "meta.json"
        if not (child.is_dir() and meta.is_file()):
            continue
        last_modified = datetime.datetime.fromtimestamp(meta.stat().st_mtime)
        sequence_info.append({"name": child.name, "path": child, "last_modified": last_modified})

    return sequence_info


def create_metric_row_dataframe(**kwargs):
    """
    Creates a single-row DataFrame with the fixed metric-table columns.

    Columns are ``label``, ``sequence``, ``seed`` and the eight scalar metrics.
    Any column not provided is None.

    Args:
        **kwargs: Values for any of the fixed columns.

    Returns:
        pd.DataFrame: A DataFrame with one row.

    Raises:
        ValueError: If a keyword is not one of the fixed columns.
    """
    invalid_keys = set(kwargs) - set(METRIC_ROW_COLUMNS)
    if invalid_keys:
        raise ValueError(f"Invalid column names provided: {sorted(invalid_keys)}")

    row = {column: kwargs.get(column) for column in METRIC_ROW_COLUMNS}
    return pd.DataFrame([row], columns=list(METRIC_ROW_COLUMNS))
