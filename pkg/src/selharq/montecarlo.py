"""SNR sweeps over protocol configurations with batch-means error bars.

Every (SNR, protocol) point is split into a fixed number of batches that
depends only on the packet count.  Each batch draws from its own Philox
stream keyed by ``(seed, snr index, protocol index, batch index)``, so the
merged result is the same for any number of worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import LinkParams, analytic_curves
from .config import Kind, ProtocolConfig
from .optimizer import ThresholdTable
from .phy import CHANNEL_MODES
from .protocols import simulate_batch

__all__ = [
    "TableTau",
    "SweepSpec",
    "PointResult",
    "SweepResult",
    "ComparisonRow",
    "ComparisonReport",
    "batch_sizes",
    "stream",
    "run_sweep",
    "compare_to_analysis",
    "eta_resolution",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "snr_db", "protocol", "tau", "ber_m", "ber_a", "fer_m", "eta_m", "eta_a",
    "stderr_ber", "stderr_eta", "loss_rate", "mean_rounds",
)
MIN_BATCHES = 20
MAX_BATCH = 1000


@dataclass(frozen=True)
class TableTau:
    """A protocol whose threshold is read per SNR from a threshold table."""

    config: ProtocolConfig
    table: ThresholdTable
    column: str = "opt"

    def at(self, snr_db: float) -> ProtocolConfig:
        return self.config.with_tau(self.table.lookup(snr_db, self.column))


def _resolve(entry, snr_db: float) -> ProtocolConfig:
    return entry.at(snr_db) if isinstance(entry, TableTau) else entry


@dataclass(frozen=True)
class SweepSpec:
    snr_db_points: tuple
    protocols: tuple
    packets_per_point: int = 10_000
    seed: int = 0
    channel_mode: str = "tap"
    params: LinkParams = field(default_factory=LinkParams)

    def __post_init__(self):
        object.__setattr__(self, "snr_db_points", tuple(float(s) for s in self.snr_db_points))
        object.__setattr__(self, "protocols", tuple(self.protocols))
        if not all(math.isfinite(s) for s in self.snr_db_points):
            raise ValueError("SNR points must be finite")
        if self.packets_per_point < 1:
            raise ValueError("packets_per_point must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.channel_mode not in CHANNEL_MODES:
            raise ValueError(f"channel_mode must be one of {CHANNEL_MODES}")
        for p in self.protocols:
            if not isinstance(p, (ProtocolConfig, TableTau)):
                raise TypeError(f"protocol entries must be ProtocolConfig or TableTau, got {type(p).__name__}")


@dataclass(frozen=True)
class PointResult:
    """Aggregates for one (SNR, protocol) point.

    ``ber_m`` counts errors at the last decode of every round.  The
    ``stage_*`` tuples break BER down by decode stage within a round
    (``stage_decodes`` counts frames decoded at each stage) and
    ``selection_*`` give the mean fraction of subcarriers selected at each
    selective retransmission.
    """

    snr_db: float
    protocol: str
    tau: float
    omega: int
    packets: int
    bits_sent: int
    bits_delivered: int
    ber_m: float
    fer_m: float
    eta_m: float
    stderr_ber: float
    stderr_fer: float
    stderr_eta: float
    loss_rate: float
    mean_rounds: float
    ber_a: float
    eta_a: float
    stage_ber: tuple = ()
    stage_stderr: tuple = ()
    stage_decodes: tuple = ()
    selection_fraction: tuple = ()
    selection_stderr: tuple = ()


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list = field(default_factory=list)

    def get(self, snr_db: float, protocol: str) -> PointResult:
        for p in self.points:
            if p.protocol == protocol and math.isclose(p.snr_db, snr_db, abs_tol=1e-9):
                return p
        raise KeyError((snr_db, protocol))

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            w.writerow([_fmt(getattr(p, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self, header: str | None = None) -> str:
        doc = {"points": [asdict(p) for p in self.points]}
        if header:
            doc = {"header": header, **doc}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def batch_sizes(packets: int) -> list[int]:
    """Fixed batch partition: at least 20 batches (fewer only if packets < 20), at most 1000 packets each."""
    n = min(packets, max(MIN_BATCHES, math.ceil(packets / MAX_BATCH)))
    base, extra = divmod(packets, n)
    return [base + (i < extra) for i in range(n)]


def stream(seed: int, snr_idx: int, proto_idx: int, batch_idx: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(snr_idx, proto_idx, batch_idx))
    return np.random.Generator(np.random.Philox(ss))


def _run_task(task):
    cfg, params, n, seed, key, mode = task
    out = simulate_batch(cfg, params, n, stream(seed, *key), mode)
    return dict(
        packets=out.n_packets,
        bits_sent=int(out.bits_sent.sum()),
        bits_delivered=int(out.bits_delivered.sum()),
        lost=int(np.count_nonzero(~out.delivered)),
        rounds=int(out.rounds.sum()),
        final_errors=out.final_errors,
        final_decodes=out.final_decodes,
        final_failures=int(out.rounds.sum() - out.delivered.sum()),
        stage_errors=out.stage_errors.tolist(),
        stage_decodes=out.stage_decodes.tolist(),
        selection_sums=out.selection_sums.tolist(),
        selection_counts=out.selection_counts.tolist(),
    )


def _ratio(num, den):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    total = num.sum() / den.sum() if den.sum() > 0 else math.nan
    ok = den > 0
    r = num[ok] / den[ok]
    se = float(np.std(r, ddof=1) / math.sqrt(r.size)) if r.size >= 2 else math.nan
    return float(total), se


def _aggregate(snr, cfg, params, batches) -> PointResult:
    lf, ns = params.frame_bits, params.subcarriers

    def col(name):
        return np.array([b[name] for b in batches], dtype=float)

    ber, se_ber = _ratio(col("final_errors"), col("final_decodes") * lf)
    fer, se_fer = _ratio(col("final_failures"), col("final_decodes"))
    eta, se_eta = _ratio(col("bits_delivered"), col("bits_sent"))
    stage_err = np.array([b["stage_errors"] for b in batches], dtype=float)
    stage_dec = np.array([b["stage_decodes"] for b in batches], dtype=float)
    stages = [_ratio(stage_err[:, i], stage_dec[:, i] * lf) for i in range(stage_err.shape[1])]
    sel_sum = np.array([b["selection_sums"] for b in batches], dtype=float)
    sel_cnt = np.array([b["selection_counts"] for b in batches], dtype=float)
    sels = [_ratio(sel_sum[:, i], sel_cnt[:, i] * ns) for i in range(sel_sum.shape[1])]
    packets = int(col("packets").sum())
    ber_a, eta_a = analytic_curves(cfg.kind, params, cfg.tau, cfg.mscc_omega)
    return PointResult(
        snr_db=snr,
        protocol=cfg.label,
        tau=float(cfg.tau) if cfg.kind is not Kind.CC else math.inf,
        omega=cfg.mscc_omega,
        packets=packets,
        bits_sent=int(col("bits_sent").sum()),
        bits_delivered=int(col("bits_delivered").sum()),
        ber_m=ber,
        fer_m=fer,
        eta_m=eta,
        stderr_ber=se_ber,
        stderr_fer=se_fer,
        stderr_eta=se_eta,
        loss_rate=float(col("lost").sum() / packets),
        mean_rounds=float(col("rounds").sum() / packets),
        ber_a=float(ber_a),
        eta_a=float(eta_a),
        stage_ber=tuple(s[0] for s in stages),
        stage_stderr=tuple(s[1] for s in stages),
        stage_decodes=tuple(int(v) for v in stage_dec.sum(axis=0)),
        selection_fraction=tuple(s[0] for s in sels),
        selection_stderr=tuple(s[1] for s in sels),
    )


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Simulate every (SNR, protocol) point; ``workers`` never changes the result."""
    sizes = batch_sizes(spec.packets_per_point)
    groups, tasks = [], []
    for si, snr in enumerate(spec.snr_db_points):
        params = spec.params.at_snr(snr)
        for pi, entry in enumerate(spec.protocols):
            cfg = _resolve(entry, snr)
            groups.append((snr, cfg, params, len(tasks), len(sizes)))
            for bi, n in enumerate(sizes):
                tasks.append((cfg, params, n, spec.seed, (si, pi, bi), spec.channel_mode))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_task, tasks))
    else:
        outs = [_run_task(t) for t in tasks]
    result = SweepResult(spec)
    for snr, cfg, params, start, count in groups:
        try:
            result.points.append(_aggregate(snr, cfg, params, outs[start:start + count]))
        except Exception as exc:
            raise RuntimeError(f"aggregating {cfg.label} at {snr} dB failed: {exc}") from exc
    return result


@dataclass(frozen=True)
class ComparisonRow:
    snr_db: float
    protocol: str
    tau: float
    ber_m: float
    ber_a: float
    stderr_ber: float
    eta_m: float
    eta_a: float
    stderr_eta: float
    bound_satisfied: bool | None
    throughput_bound_satisfied: bool | None
    ber_ratio: float
    eta_gap: float


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [r for r in self.rows if r.bound_satisfied is False or r.throughput_bound_satisfied is False]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        names = list(ComparisonRow.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, n)) for n in names])
        return buf.getvalue()

    def to_json(self, header: str | None = None) -> str:
        doc = {"rows": [asdict(r) for r in self.rows], "violations": len(self.violations)}
        if header:
            doc = {"header": header, **doc}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def eta_resolution(point: PointResult, frame_bits: int) -> float:
    """One delivered frame over all bits sent: the smallest nonzero throughput the sweep can resolve."""
    return frame_bits / point.bits_sent if point.bits_sent else math.inf


def _within(sim, bound, se, sign, floor=0.0):
    """``sim <= bound + 3 se`` (sign=+1) or ``sim >= bound - 3 se`` (sign=-1); None when no bound exists.

    ``se`` is raised to ``floor`` first, so a point with no events at all does
    not claim zero uncertainty.
    """
    if math.isnan(bound) or math.isnan(sim):
        return None
    slack = 3.0 * max(se if math.isfinite(se) else 0.0, floor)
    return bool(sim <= bound + slack) if sign > 0 else bool(sim >= bound - slack)


def compare_to_analysis(result: SweepResult, params: LinkParams | None = None) -> ComparisonReport:
    """Check every point against the BER upper bound and the throughput lower bound."""
    template = params or result.spec.params
    report = ComparisonReport()
    for p in result.points:
        kind = Kind.MSCC if p.protocol.startswith("mscc") else Kind.parse(p.protocol)
        ber_a, eta_a = analytic_curves(kind, template.at_snr(p.snr_db), p.tau, p.omega)
        report.rows.append(ComparisonRow(
            snr_db=p.snr_db,
            protocol=p.protocol,
            tau=p.tau,
            ber_m=p.ber_m,
            ber_a=ber_a,
            stderr_ber=p.stderr_ber,
            eta_m=p.eta_m,
            eta_a=eta_a,
            stderr_eta=p.stderr_eta,
            bound_satisfied=_within(p.ber_m, ber_a, p.stderr_ber, +1),
            throughput_bound_satisfied=_within(
                p.eta_m, eta_a, p.stderr_eta, -1, eta_resolution(p, template.frame_bits)
            ),
            ber_ratio=ber_a / p.ber_m if p.ber_m > 0 else math.inf,
            eta_gap=abs(p.eta_m - eta_a) / eta_a if eta_a > 0 else math.nan,
        ))
    return report
