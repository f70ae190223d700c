"""Count data: for each sequence, the shot number N and the bright count n."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .sequences import GateSequence


@dataclass
class DataSet:
    """Ordered records ``sequence -> (N, n)``.

    Counts are stored as floats.  Sampled data always holds integers; the
    infinite-shot datasets used for exactness checks hold ``n = N p``.
    """

    sequences: list[GateSequence]
    shots: np.ndarray
    counts: np.ndarray
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.sequences = list(self.sequences)
        self.shots = np.asarray(self.shots, dtype=float).reshape(-1)
        self.counts = np.asarray(self.counts, dtype=float).reshape(-1)
        if not (len(self.sequences) == self.shots.size == self.counts.size):
            raise InputError("sequence, shot and count arrays differ in length")
        self._index = {s: k for k, s in enumerate(self.sequences)}
        if len(self._index) != len(self.sequences):
            raise InputError("dataset contains duplicate sequences")
        if np.any(self.shots <= 0) or not np.all(np.isfinite(self.shots)):
            raise InputError("shot counts must be positive")
        if np.any(self.counts < 0) or np.any(self.counts > self.shots):
            raise InputError("bright counts must lie in [0, N]")

    def __len__(self) -> int:
        return len(self.sequences)

    def __contains__(self, s) -> bool:
        return s in self._index

    def __getitem__(self, s: GateSequence) -> tuple[float, float]:
        k = self._index[s]
        return self.shots[k], self.counts[k]

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots

    @property
    def is_integral(self) -> bool:
        return bool(np.all(self.counts == np.round(self.counts)) and np.all(self.shots == np.round(self.shots)))

    def subset(self, sequences: Iterable[GateSequence]) -> "DataSet":
        seqs = list(sequences)
        try:
            idx = [self._index[s] for s in seqs]
        except KeyError as exc:
            raise InputError(f"dataset has no record for sequence {exc.args[0]}") from None
        # Keep the caller's objects so their provenance and block form survive.
        return DataSet(seqs, self.shots[idx], self.counts[idx])

    def with_counts(self, counts: np.ndarray) -> "DataSet":
        return DataSet(self.sequences, self.shots, counts)

    def frequency_of(self, s: GateSequence) -> float:
        n_shots, n = self[s]
        return n / n_shots

    def equals(self, other: "DataSet") -> bool:
        return (
            self.sequences == other.sequences
            and np.array_equal(self.shots, other.shots)
            and np.array_equal(self.counts, other.counts)
        )


def merge_provenance(ds: DataSet, sequences: Sequence[GateSequence]) -> DataSet:
    """Replace record keys by equal sequences carrying provenance/blocks."""
    lookup = {s: s for s in sequences}
    return DataSet([lookup.get(s, s) for s in ds.sequences], ds.shots, ds.counts)
