"""Dataclass configurations shared by the experiment scripts."""
from __future__ import annotations

from dataclasses import dataclass, field

from selharq.analysis import LinkParams


@dataclass(frozen=True)
class ExperimentConfig:
    snr_db: tuple = tuple(range(0, 21, 2))
    packets: int = 10_000
    seed: int = 20240601
    channel_mode: str = "iid_subcarrier"
    workers: int = 1
    params: LinkParams = field(default_factory=LinkParams)


THROUGHPUT = ExperimentConfig()
MSCC = ExperimentConfig(snr_db=tuple(range(0, 13, 2)), packets=2000)
BER = ExperimentConfig(snr_db=tuple(range(0, 21, 4)), packets=2000)
TAU = ExperimentConfig(snr_db=tuple(range(0, 21, 1)))
