from dataclasses import dataclass, field
from typing import Optional

import math
import numpy as np

from ..errors import ModelFormatError
from ..io import read_json, write_json


@dataclass
class Explanation:
    """Relevance scores shaped like the explained input."""

    relevance: np.ndarray
    method: str
    target: int
    seed: Optional[int] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.relevance = np.asarray(self.relevance, dtype=np.float64)

    @property
    def shape(self):
        return self.relevance.shape

    @property
    def sum_relevance(self):
        return math.fsum(self.relevance.ravel())

    def to_dict(self):
        return {"method": self.method, "target": int(self.target), "seed": self.seed,
                "shape": list(self.relevance.shape), "relevance": self.relevance.ravel().tolist(),
                "sum": self.sum_relevance}

    @classmethod
    def from_dict(cls, doc):
        try:
            rel = np.array(doc["relevance"], dtype=np.float64).reshape(doc["shape"])
            return cls(rel, str(doc["method"]), int(doc["target"]), doc.get("seed"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed explanation file: {exc}") from None


def save_explanation(expl, path):
    write_json(path, expl.to_dict())


def load_explanation(path):
    return Explanation.from_dict(read_json(path))
