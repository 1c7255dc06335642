"""Queue traces and loss series shared by both simulators, plus CSV export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import EmptyWindow


@dataclass
class QueueTrace:
    """Queue level observed at sample epochs.

    ``active[i]`` is the number of sources transmitting from ``times[i]``
    until the next sample.  For fluid traces this, together with
    ``peak_rate`` and ``service_rate``, is enough to rebuild the whole
    piecewise-linear trajectory.
    """

    times: np.ndarray
    levels: np.ndarray
    active: np.ndarray
    duration: float
    buffer_size: float
    service_rate: float
    peak_rate: Optional[float] = None
    overflow_intervals: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    discarded_fluid: float = 0.0
    final_level: float = 0.0
    kind: str = "fluid"

    @property
    def samples(self):
        return np.column_stack([self.times, self.levels])

    @property
    def active_count_series(self):
        return np.column_stack([self.times, self.active])

    def __len__(self):
        return len(self.times)

    def to_csv(self, path, overflow_path=None, header=None):
        """Write ``time_s,queue_pkts,active_sources``; overflow intervals go
        to ``overflow_path`` when given."""
        path = Path(path)
        with open(path, "w") as fh:
            _comment(fh, header)
            fh.write("time_s,queue_pkts,active_sources\n")
            for t, q, k in zip(self.times.tolist(), self.levels.tolist(), self.active.tolist()):
                fh.write(f"{t!r},{q!r},{int(k)}\n")
        if overflow_path is not None:
            with open(overflow_path, "w") as fh:
                _comment(fh, header)
                fh.write("overflow_start_s,overflow_end_s\n")
                for s, e in self.overflow_intervals.tolist():
                    fh.write(f"{s!r},{e!r}\n")
        return path


@dataclass
class LossSeries:
    """Aggregate drops per fixed-width time bin."""

    bins: np.ndarray
    bin_width: float
    start: float = 0.0

    def __len__(self):
        return len(self.bins)

    @property
    def bin_starts(self):
        return self.start + self.bin_width * np.arange(len(self.bins))

    def to_csv(self, path, header=None):
        with open(path, "w") as fh:
            _comment(fh, header)
            fh.write("bin_start_s,drops\n")
            for s, d in zip(self.bin_starts.tolist(), self.bins.tolist()):
                fh.write(f"{s!r},{int(d)}\n")
        return Path(path)


def aggregate_losses(drop_times, bin_width, window):
    """Count drops per bin over ``window = (start, end)``, end exclusive.

    >>> aggregate_losses([0.01, 0.02, 1.5], 1.0, (0.0, 2.0)).bins.tolist()
    [2, 1]
    """
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    start, end = float(window[0]), float(window[1])
    if not end > start:
        raise EmptyWindow(f"empty observation window [{start}, {end})")
    n_bins = math.ceil((end - start) / bin_width - 1e-9)
    t = np.asarray(drop_times, dtype=float)
    t = t[(t >= start) & (t < end)]
    idx = np.minimum(((t - start) / bin_width).astype(np.int64), n_bins - 1)
    return LossSeries(np.bincount(idx, minlength=n_bins).astype(np.int64), float(bin_width), start)


def read_trace_csv(path):
    """Inverse of :meth:`QueueTrace.to_csv` for the sample columns."""
    with open(path) as fh:
        n_comments = 0
        for line in fh:
            if not line.startswith("#"):
                break
            n_comments += 1
    data = np.genfromtxt(path, delimiter=",", skip_header=n_comments, names=True, ndmin=1)
    return data["time_s"], data["queue_pkts"], data["active_sources"].astype(np.int64)


def _comment(fh, header):
    if header:
        for line in str(header).splitlines():
            fh.write(f"# {line}\n")
