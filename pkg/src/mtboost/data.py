"""Multi-task dataset container and its CSV serialization.

CSV layout: header row ``task,y,x0,...,x{d-1}``, comma-delimited, ``.``
decimal separator. ``task`` is an integer task id, ``y`` is the regression
target or integer class index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class MultiTaskDataset:
    """Features, targets and task ids for T tasks sharing one feature space.

    ``num_classes`` is 1 for regression; for classification targets are
    class indices in ``[0, num_classes)``.
    """

    features: np.ndarray
    targets: np.ndarray
    task_of: np.ndarray
    num_tasks: int
    num_classes: int = 1
    _task_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.task_of = np.asarray(self.task_of, dtype=np.int64)
        if self.num_classes >= 2:
            self.targets = np.asarray(self.targets, dtype=np.int64)
        else:
            self.targets = np.asarray(self.targets, dtype=np.float64)
        n = self.features.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.features.ndim != 2:
            raise ValueError("features must be an N x d matrix")
        if self.targets.shape != (n,) or self.task_of.shape != (n,):
            raise ValueError(
                f"features ({n}), targets ({self.targets.shape}) and task ids "
                f"({self.task_of.shape}) disagree on sample count"
            )
        if self.task_of.min() < 0 or self.task_of.max() >= self.num_tasks:
            raise ValueError(f"task ids must lie in [0, {self.num_tasks})")
        counts = np.bincount(self.task_of, minlength=self.num_tasks)
        if (counts == 0).any():
            empty = np.nonzero(counts == 0)[0]
            raise ValueError(f"tasks {empty.tolist()} have no samples")
        if self.num_classes >= 2:
            if self.targets.min() < 0 or self.targets.max() >= self.num_classes:
                raise ValueError(
                    f"class labels must lie in [0, {self.num_classes})"
                )
        self._task_index = None

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def task_indices(self, task_id: int) -> np.ndarray:
        """Row indices belonging to one task, in dataset order."""
        if not 0 <= task_id < self.num_tasks:
            raise ValueError(f"unknown task id {task_id}")
        if self._task_index is None:
            self._task_index = {
                t: np.nonzero(self.task_of == t)[0] for t in range(self.num_tasks)
            }
        return self._task_index[task_id]

    def task_counts(self) -> np.ndarray:
        return np.bincount(self.task_of, minlength=self.num_tasks)

    def subset(self, indices: np.ndarray) -> "MultiTaskDataset":
        """New dataset restricted to ``indices`` (task id space unchanged)."""
        indices = np.asarray(indices)
        return MultiTaskDataset(
            features=self.features[indices],
            targets=self.targets[indices],
            task_of=self.task_of[indices],
            num_tasks=self.num_tasks,
            num_classes=self.num_classes,
        )

    def task_slice(self, task_id: int) -> "MultiTaskDataset":
        """One task's samples as a standalone single-task dataset."""
        idx = self.task_indices(task_id)
        return MultiTaskDataset(
            features=self.features[idx],
            targets=self.targets[idx],
            task_of=np.zeros(idx.shape[0], dtype=np.int64),
            num_tasks=1,
            num_classes=self.num_classes,
        )


def save_csv(dataset: MultiTaskDataset, path) -> None:
    path = Path(path)
    d = dataset.num_features
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task", "y"] + [f"x{j}" for j in range(d)])
        classify = dataset.num_classes >= 2
        for i in range(dataset.num_samples):
            y = int(dataset.targets[i]) if classify else repr(float(dataset.targets[i]))
            row = [int(dataset.task_of[i]), y]
            row.extend(repr(float(v)) for v in dataset.features[i])
            writer.writerow(row)


def load_csv(path, num_classes: int = 1) -> MultiTaskDataset:
    """Parse a dataset CSV; malformed rows raise with their line number."""
    path = Path(path)
    tasks, targets, rows = [], [], []
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "task" or header[1] != "y":
            raise ValueError(
                f"{path}, line 1: expected header 'task,y,x0,...', got {header!r}"
            )
        d = len(header) - 2
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise ValueError(
                    f"{path}, line {line_no}: expected {d + 2} fields, got {len(row)}"
                )
            try:
                tasks.append(int(row[0]))
                targets.append(int(row[1]) if num_classes >= 2 else float(row[1]))
                rows.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise ValueError(f"{path}, line {line_no}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    task_of = np.asarray(tasks, dtype=np.int64)
    return MultiTaskDataset(
        features=np.asarray(rows, dtype=np.float64),
        targets=np.asarray(targets),
        task_of=task_of,
        num_tasks=int(task_of.max()) + 1,
        num_classes=num_classes,
    )
