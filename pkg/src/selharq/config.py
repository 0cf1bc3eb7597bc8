"""Protocol configuration shared by the analysis, optimizer and simulator."""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum


class Kind(str, Enum):
    ARQ = "arq"
    CC = "cc"
    SCC = "scc"
    MSCC = "mscc"
    CCWS = "ccws"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown protocol {value!r}; choose from {[k.value for k in cls]}") from None


@dataclass(frozen=True)
class ProtocolConfig:
    """One retransmission scheme.

    ``mscc_omega`` is the number of selective retransmissions allowed inside
    one round, so SCC is MSCC with ``mscc_omega = 1``.  ``tau`` may be
    ``math.inf`` (select every subcarrier).  ``crc_bits`` are subtracted from
    the delivered payload when nonzero.
    """

    kind: Kind = Kind.SCC
    tau: float = 0.0
    max_mac_rounds: int = 50
    mscc_omega: int = 1
    crc_bits: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if self.kind is Kind.SCC and self.mscc_omega != 1:
            raise ValueError("SCC is MSCC with mscc_omega=1")
        if self.mscc_omega < 1:
            raise ValueError("mscc_omega must be >= 1")
        if self.max_mac_rounds < 1:
            raise ValueError("max_mac_rounds must be >= 1")
        if not self.tau >= 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if self.crc_bits < 0:
            raise ValueError("crc_bits must be nonnegative")

    @property
    def label(self) -> str:
        if self.kind is Kind.MSCC:
            return f"mscc{self.mscc_omega}"
        return self.kind.value

    def with_tau(self, tau: float) -> "ProtocolConfig":
        return replace(self, tau=tau)
