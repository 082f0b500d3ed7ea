"""Epoch arithmetic: timestamps to epoch indices and epoch indices to tree labels."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

DEFAULT_EPOCH_LENGTH = 3600
DEFAULT_WINDOW = 1
DEFAULT_EPOCH_BITS = 20


class EpochError(ValueError):
    pass


@dataclass(frozen=True)
class EpochConfig:
    t0: int = 0
    epoch_length: int = DEFAULT_EPOCH_LENGTH
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.epoch_length <= 0:
            raise EpochError("epoch_length must be positive")
        if self.window < 0:
            raise EpochError("window must be non-negative")

    def epoch_start(self, epoch: int) -> int:
        return self.t0 + epoch * self.epoch_length


def epoch_from_timestamp(ts: float, cfg: EpochConfig) -> int:
    if ts < cfg.t0:
        raise EpochError(f"timestamp {ts} precedes the epoch origin {cfg.t0}")
    return int((ts - cfg.t0) // cfg.epoch_length)


def current_epoch(cfg: EpochConfig, now: Optional[float] = None) -> int:
    return epoch_from_timestamp(time.time() if now is None else now, cfg)


def window_order(epoch: int, window: int, n: int) -> Iterator[int]:
    """Candidate epochs for windowed verification: e, e-1, e+1, e-2, e+2, ... clipped to [0, n)."""
    if 0 <= epoch < n:
        yield epoch
    for d in range(1, window + 1):
        for e in (epoch - d, epoch + d):
            if 0 <= e < n:
                yield e


def epoch_bits_for(n: int) -> int:
    """ceil(log2 n) for n >= 2."""
    if n < 2:
        raise EpochError("need at least two epochs")
    return (n - 1).bit_length()


def label(i: int, epoch_bits: int) -> str:
    """Leaf label of epoch ``i`` as a big-endian '0'/'1' string."""
    if not 0 <= i < (1 << epoch_bits):
        raise EpochError(f"epoch {i} outside [0, 2^{epoch_bits})")
    return format(i, f"0{epoch_bits}b") if epoch_bits else ""


def binid(i: int, epoch_bits: int) -> Tuple[bytes, ...]:
    """Fixed-width big-endian bit decomposition of ``i`` as identity levels b'0'/b'1'."""
    return label_identity(label(i, epoch_bits))


def label_identity(bits: str) -> Tuple[bytes, ...]:
    return tuple(b.encode() for b in bits)


def covers(node: str, epoch: int, epoch_bits: int) -> bool:
    """True if the tree node ``node`` is an ancestor of (or equal to) the leaf of ``epoch``."""
    return label(epoch, epoch_bits).startswith(node)
