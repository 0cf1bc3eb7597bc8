"""Offline threshold tables: throughput-optimal and full-retransmission-equivalent taus."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .analysis import LinkParams, analytic_curves, ber_ccws_joint, ber_full_cc, ber_scc_joint
from .config import Kind
from .numerics import chi2_quantile

__all__ = [
    "ConfigurationError",
    "ThresholdCeilingWarning",
    "GridSpec",
    "ThresholdTable",
    "throughput_at",
    "optimize_tau",
    "tau_full_equivalent",
    "build_table",
    "read_table_csv",
    "read_tables_csv",
]

TIE_TOL = 1e-12


class ConfigurationError(ValueError):
    pass


class ThresholdCeilingWarning(UserWarning):
    """The BER slack was not reached below the search ceiling."""


@dataclass(frozen=True)
class GridSpec:
    """Candidate thresholds for the exhaustive search.

    By default ``points`` log-spaced values from ``tau_min`` up to the
    ``ceiling_prob`` quantile of the subcarrier norm, plus ``0`` and
    ``inf`` so both endpoints are always candidates.  ``values`` overrides
    all of that.
    """

    points: int = 256
    tau_min: float = 1e-4
    ceiling_prob: float = 0.999
    include_endpoints: bool = True
    values: tuple | None = None

    def taus(self, params: LinkParams) -> np.ndarray:
        if self.values is not None:
            grid = np.asarray(sorted(self.values), dtype=float)
        else:
            top = self.ceiling(params)
            grid = np.geomspace(self.tau_min, top, self.points)
            if self.include_endpoints:
                grid = np.concatenate(([0.0], grid, [math.inf]))
        if grid.size == 0:
            raise ConfigurationError("threshold grid is empty")
        if np.any(grid < 0) or np.any(np.isnan(grid)):
            raise ConfigurationError("threshold grid must be nonnegative")
        return grid

    def ceiling(self, params: LinkParams) -> float:
        return chi2_quantile(params.chi2, self.ceiling_prob)


@dataclass
class ThresholdTable:
    protocol: Kind
    snr_points: list = field(default_factory=list)
    tau_opt: list = field(default_factory=list)
    tau_target: list = field(default_factory=list)
    eta_at_opt: list = field(default_factory=list)

    def __post_init__(self):
        self.protocol = Kind.parse(self.protocol)
        n = len(self.snr_points)
        if not (len(self.tau_opt) == len(self.tau_target) == len(self.eta_at_opt) == n):
            raise ValueError("table columns differ in length")
        if any(b <= a for a, b in zip(self.snr_points, self.snr_points[1:])):
            raise ValueError("SNR points must be strictly increasing")

    def __len__(self):
        return len(self.snr_points)

    def lookup(self, snr_db: float, column: str = "opt") -> float:
        values = self.tau_opt if column == "opt" else self.tau_target
        for s, v in zip(self.snr_points, values):
            if math.isclose(s, snr_db, abs_tol=1e-9):
                return v
        raise KeyError(f"SNR {snr_db} dB is not in the {self.protocol.value} threshold table")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["snr_db", "tau_opt", "eta_opt", "tau_full", "protocol"])
        for row in zip(self.snr_points, self.tau_opt, self.eta_at_opt, self.tau_target):
            w.writerow([f"{v:.6g}" for v in row] + [self.protocol.value])
        return buf.getvalue()


def read_tables_csv(text: str) -> list[ThresholdTable]:
    """Parse a table file; rows are grouped by their ``protocol`` column in order of appearance."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise ValueError("threshold table is empty")
    groups: dict = {}
    for r in rows:
        groups.setdefault(r["protocol"], []).append(r)
    return [
        ThresholdTable(
            protocol=kind,
            snr_points=[float(r["snr_db"]) for r in rs],
            tau_opt=[float(r["tau_opt"]) for r in rs],
            tau_target=[float(r["tau_full"]) for r in rs],
            eta_at_opt=[float(r["eta_opt"]) for r in rs],
        )
        for kind, rs in groups.items()
    ]


def read_table_csv(text: str) -> ThresholdTable:
    tables = read_tables_csv(text)
    if len(tables) != 1:
        raise ValueError(f"expected one protocol, found {[t.protocol.value for t in tables]}")
    return tables[0]


def _check_protocol(protocol) -> Kind:
    kind = Kind.parse(protocol)
    if kind not in (Kind.SCC, Kind.CCWS):
        raise ConfigurationError(f"thresholds are optimized for SCC or CCWS, not {kind.value}")
    return kind


def throughput_at(protocol, params: LinkParams, tau: float) -> float:
    return analytic_curves(_check_protocol(protocol), params, tau)[1]


def optimize_tau(protocol, params: LinkParams, grid: GridSpec | None = None) -> tuple[float, float]:
    """Grid point maximizing the analytical throughput.

    Values within ``TIE_TOL`` of the maximum, relative to it, count as ties
    and the smallest such tau wins.  The relative form keeps the search
    meaningful at low SNR where every throughput is astronomically small.
    """
    kind = _check_protocol(protocol)
    taus = (grid or GridSpec()).taus(params)
    etas = np.array([throughput_at(kind, params, t) for t in taus])
    top = etas.max()
    best = np.flatnonzero(etas >= top - TIE_TOL * top)[0]
    return float(taus[best]), float(etas[best])


def tau_full_equivalent(protocol, params: LinkParams, slack: float = 0.01, ceiling: float | None = None) -> float:
    """Smallest tau whose joint BER bound is within ``1 + slack`` of the all-bins limit.

    For SCC the limit is full Chase combining; for CCWS it is the four-copy
    bound reached as ``tau -> inf``.  If the slack is not met by ``ceiling``
    a :class:`ThresholdCeilingWarning` is issued and the ceiling returned.
    """
    kind = _check_protocol(protocol)
    if kind is Kind.SCC:
        def ber(t):
            return ber_scc_joint(params, t)

        floor = ber_full_cc(params)
    else:
        def ber(t):
            return ber_ccws_joint(params, t)

        floor = ber_ccws_joint(params, math.inf)
    target = floor * (1.0 + slack)
    if ber(0.0) <= target:
        return 0.0
    if ceiling is None:
        ceiling = chi2_quantile(params.chi2, 1.0 - 1e-9)
    if ber(ceiling) > target:
        warnings.warn(
            f"{kind.value}: BER slack {slack} not reached below tau={ceiling:.4g}",
            ThresholdCeilingWarning,
            stacklevel=2,
        )
        return float(ceiling)
    return float(optimize.brentq(lambda t: ber(t) - target, 0.0, ceiling, xtol=1e-12, rtol=1e-12))


def build_table(protocol, snr_grid, params_template: LinkParams | None = None, grid: GridSpec | None = None,
                slack: float = 0.01) -> ThresholdTable:
    kind = _check_protocol(protocol)
    snrs = [float(s) for s in snr_grid]
    if not snrs:
        raise ConfigurationError("SNR grid is empty")
    template = params_template or LinkParams()
    table = ThresholdTable(kind)
    for snr in snrs:
        params = template.at_snr(snr)
        try:
            tau_o, eta = optimize_tau(kind, params, grid)
            tau_f = tau_full_equivalent(kind, params, slack)
        except Exception as exc:
            raise type(exc)(f"at {snr} dB: {exc}") from exc
        table.snr_points.append(snr)
        table.tau_opt.append(tau_o)
        table.tau_target.append(tau_f)
        table.eta_at_opt.append(eta)
    table.__post_init__()
    return table
