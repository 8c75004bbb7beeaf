"""Offline (assortment, choice) records and their JSON-lines serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .models import make_assortment, offer_mask


@dataclass(eq=False)
class OfflineDataset:
    """Logged records ``(assortment, choice)``; choice 0 means no purchase.

    ``mask`` and ``choices`` are dense views used by the likelihood kernels.
    """

    records: list
    num_items: int
    mask: np.ndarray = field(init=False, repr=False)
    choices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.records) < 1:
            raise ValueError("dataset needs at least one record")
        clean = []
        for i, (s, a) in enumerate(self.records):
            s = make_assortment(s, self.num_items)
            a = int(a)
            if a != 0 and a not in s:
                raise ValueError(f"record {i}: choice {a} not in assortment {list(s)} or 0")
            clean.append((s, a))
        self.records = clean
        self.mask = offer_mask([s for s, _ in clean], self.num_items)
        self.choices = np.array([a for _, a in clean], dtype=int)

    @property
    def size(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"s": list(s), "a": a}) + "\n" for s, a in self.records)

    @classmethod
    def from_jsonl(cls, text: str, num_items: int) -> "OfflineDataset":
        records = []
        for line in text.splitlines():
            if line.strip():
                row = json.loads(line)
                records.append((row["s"], row["a"]))
        return cls(records, num_items)


def dataset_from_arrays(assortments: Sequence[Iterable[int]], choices: Sequence[int],
                        num_items: int) -> OfflineDataset:
    return OfflineDataset(list(zip(assortments, choices)), num_items)
