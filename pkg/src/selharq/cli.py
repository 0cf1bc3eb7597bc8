"""Command-line front end.

Subcommands ``bounds``, ``optimize``, ``simulate``, ``compare`` and
``reproduce``.  Settings come from built-in defaults, then an optional
``--config`` file of ``key = value`` lines, then flags.  Every output
starts with ``#`` header lines echoing the resolved configuration.

Exit status: 0 on success, 1 when a bound violation is flagged, 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

from . import __version__
from .analysis import LinkParams, analytic_curves, ber_point
from .config import Kind, ProtocolConfig
from .montecarlo import SweepSpec, TableTau, compare_to_analysis, run_sweep, stream, batch_sizes
from .optimizer import ThresholdTable, build_table, read_tables_csv
from .protocols import simulate_batch

__all__ = ["main", "RunConfig", "UsageError", "parse_snr_grid", "PRESETS"]

MODULATIONS = {"4qam": 4, "16qam": 16}
TAU_WORDS = ("opt", "full-equiv")


class UsageError(Exception):
    pass


def parse_snr_grid(text: str) -> list[float]:
    """``start:step:stop`` (inclusive), a comma list, or a single value, in dB."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, step, stop = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise UsageError(f"bad SNR range {text!r}: need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            grid = [round(start + i * step, 10) for i in range(n)]
        else:
            grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse SNR grid {text!r}") from None
    if not grid or not all(math.isfinite(v) for v in grid):
        raise UsageError(f"SNR grid {text!r} must hold finite values")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("SNR grid must be strictly increasing")
    return grid


def _parse_tau(word: str):
    word = word.strip().lower()
    if word in TAU_WORDS:
        return word
    if word in ("inf", "infinity"):
        return math.inf
    try:
        value = float(word)
    except ValueError:
        raise UsageError(f"tau must be 0, inf, opt, full-equiv or a number, got {word!r}") from None
    if not value >= 0:
        raise UsageError(f"tau must be nonnegative, got {word!r}")
    return value


def _positive_int(name):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise UsageError(f"{name} must be an integer, got {text!r}") from None
        if v < 1:
            raise UsageError(f"{name} must be >= 1, got {v}")
        return v

    return conv


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise UsageError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise UsageError("seed must fit in 64 unsigned bits")
    return v


def _choice(name, options):
    def conv(text):
        v = str(text).strip().lower()
        if v not in options:
            raise UsageError(f"{name} must be one of {sorted(options)}, got {text!r}")
        return v

    return conv


def _nonneg_float(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise UsageError(f"{name} must be a number, got {text!r}") from None
        if not v >= 0:
            raise UsageError(f"{name} must be nonnegative")
        return v

    return conv


# key -> (converter, default); keys double as --flag names and config-file keys
SETTINGS = {
    "snr": (parse_snr_grid, [0.0, 4.0, 8.0, 12.0, 16.0, 20.0]),
    "protocol": (lambda s: [Kind.parse(p.strip()) for p in str(s).split(",") if p.strip()], [Kind.SCC]),
    "tau": (lambda s: [_parse_tau(t) for t in str(s).split(",") if t.strip()], [0.0]),
    "omega": (_positive_int("omega"), 2),
    "packets": (_positive_int("packets"), 10_000),
    "seed": (_seed, None),
    "channel_mode": (_choice("channel-mode", {"tap", "iid_subcarrier"}), "tap"),
    "nr": (_positive_int("nr"), 1),
    "mod": (_choice("mod", set(MODULATIONS)), "4qam"),
    "max_rounds": (_positive_int("max-rounds"), 50),
    "crc_bits": (lambda s: int(s), 0),
    "slack": (_nonneg_float("slack"), 0.01),
    "grid_points": (_positive_int("grid-points"), 256),
    "format": (_choice("format", {"csv", "json"}), "csv"),
}


@dataclass
class RunConfig:
    command: str
    snr: list
    protocol: list
    tau: list
    omega: int
    packets: int
    seed: int
    channel_mode: str
    nr: int
    mod: str
    max_rounds: int
    crc_bits: int
    slack: float
    grid_points: int
    format: str
    tables: list = field(default_factory=list)
    preset: str | None = None
    out: str | None = None
    trace: str | None = None
    workers: int = 1
    explicit: frozenset = frozenset()

    @property
    def params(self) -> LinkParams:
        return LinkParams(constellation_order=MODULATIONS[self.mod], rx_antennas=self.nr)

    def echo(self) -> str:
        """Configuration line for output headers; excludes settings that cannot change results."""
        skip = {"out", "trace", "workers", "format", "explicit"}
        d = {k: v for k, v in asdict(self).items() if k not in skip}
        d["protocol"] = [k.value for k in self.protocol]
        d["tau"] = [t if isinstance(t, str) else repr(float(t)) for t in self.tau]
        return f"selharq {__version__} " + json.dumps(d, sort_keys=True, default=str)


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SETTINGS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        values[key] = value
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selharq", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"selharq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bounds", "evaluate BER and throughput bounds"),
        ("optimize", "build a threshold table"),
        ("simulate", "run a Monte Carlo sweep"),
        ("compare", "run a sweep and check it against the bounds"),
        ("reproduce", "run a named figure preset"),
    ):
        p = sub.add_parser(name, help=help_text)
        if name == "reproduce":
            p.add_argument("preset", choices=sorted(PRESETS))
        for key in SETTINGS:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
        p.add_argument("--config", default=None, help="flat key = value settings file")
        p.add_argument("--table", action="append", default=[], help="threshold table CSV (repeatable)")
        p.add_argument("--out", default=None, help="output file (stdout if omitted)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--trace", default=None, help="write per-packet JSON lines for the first batch of each point")
    return parser


def resolve_config(argv) -> RunConfig:
    args = _build_parser().parse_args(argv)
    file_values = _read_config_file(args.config) if args.config else {}
    resolved, explicit = {}, set()
    for key, (conv, default) in SETTINGS.items():
        raw = getattr(args, key)
        if raw is None:
            raw = file_values.get(key)
        if raw is not None:
            explicit.add(key)
        if raw is None and key == "seed":
            raw = os.environ.get("SELHARQ_SEED", "0")
        resolved[key] = conv(raw) if raw is not None else default
    if args.workers < 1:
        raise UsageError("workers must be >= 1")
    if resolved["crc_bits"] < 0:
        raise UsageError("crc-bits must be nonnegative")
    tables = []
    for path in args.table:
        try:
            with open(path) as fh:
                tables.extend(read_tables_csv(fh.read()))
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot load threshold table {path}: {exc}") from None
    return RunConfig(
        command=args.command,
        tables=tables,
        preset=getattr(args, "preset", None),
        out=args.out,
        trace=args.trace,
        workers=args.workers,
        explicit=frozenset(explicit),
        **resolved,
    )


def _table_for(kind: Kind, tables) -> ThresholdTable | None:
    want = Kind.SCC if kind in (Kind.SCC, Kind.MSCC) else kind
    for t in tables:
        if t.protocol is want:
            return t
    return None


def _protocol_entries(cfg: RunConfig, tables) -> list:
    """Cartesian product of protocols and tau specs; tau is ignored for ARQ and CC."""
    entries, seen = [], set()
    for kind in cfg.protocol:
        taus = [0.0] if kind in (Kind.ARQ, Kind.CC) else cfg.tau
        for tau in taus:
            base = ProtocolConfig(
                kind=kind,
                tau=tau if isinstance(tau, float) else 0.0,
                max_mac_rounds=cfg.max_rounds,
                mscc_omega=cfg.omega if kind is Kind.MSCC else 1,
                crc_bits=cfg.crc_bits,
            )
            if isinstance(tau, str):
                table = _table_for(kind, tables)
                if table is None:
                    raise UsageError(f"--tau {tau} for {kind.value} needs a threshold table (--table)")
                missing = [s for s in cfg.snr if not any(math.isclose(s, t, abs_tol=1e-9) for t in table.snr_points)]
                if missing:
                    raise UsageError(f"threshold table lacks SNR points {missing}")
                entry = TableTau(base, table, "opt" if tau == "opt" else "full")
            else:
                entry = base
            key = (kind, repr(tau), base.mscc_omega)
            if key not in seen:
                seen.add(key)
                entries.append(entry)
    return entries


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_or_json(cfg: RunConfig, rows: list[dict], header: str) -> str:
    if cfg.format == "json":
        return json.dumps({"header": header, "rows": rows}, indent=1, sort_keys=True) + "\n"
    cols = list(rows[0]) if rows else []
    lines = [f"# {header}", ",".join(cols)]
    for r in rows:
        lines.append(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in r.values()))
    return "\n".join(lines) + "\n"


def cmd_bounds(cfg: RunConfig) -> int:
    entries = _protocol_entries(cfg, cfg.tables)
    template = cfg.params
    rows = []
    for snr in cfg.snr:
        params = template.at_snr(snr)
        for entry in entries:
            pc = entry.at(snr) if isinstance(entry, TableTau) else entry
            tau = math.inf if pc.kind is Kind.CC else pc.tau
            point = ber_point(params, tau)
            ber, eta = analytic_curves(pc.kind, params, tau, pc.mscc_omega)
            rows.append(dict(
                snr_db=float(snr), protocol=pc.label, tau=float(tau),
                ber_single=point.single_tx, ber_full_cc=point.full_cc,
                ber_bound=float(ber), eta_bound=float(eta), clamped=int(point.clamped),
            ))
    _emit(cfg, _csv_or_json(cfg, rows, cfg.echo()))
    return 0


def _build_tables(cfg: RunConfig, kinds) -> list[ThresholdTable]:
    from .optimizer import GridSpec

    wanted = []
    for k in kinds:
        k = Kind.SCC if k is Kind.MSCC else k
        if k in (Kind.SCC, Kind.CCWS) and k not in wanted:
            wanted.append(k)
    return [build_table(k, cfg.snr, cfg.params, GridSpec(points=cfg.grid_points), cfg.slack) for k in wanted]


def cmd_optimize(cfg: RunConfig) -> int:
    bad = [k.value for k in cfg.protocol if k not in (Kind.SCC, Kind.CCWS)]
    if bad:
        raise UsageError(f"optimize supports scc and ccws, not {bad}")
    tables = _build_tables(cfg, cfg.protocol)
    if cfg.format == "json":
        doc = {"header": cfg.echo(), "tables": [
            {"protocol": t.protocol.value, "snr_db": t.snr_points, "tau_opt": t.tau_opt,
             "eta_opt": t.eta_at_opt, "tau_full": t.tau_target} for t in tables]}
        _emit(cfg, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    else:
        body = tables[0].to_csv()
        for t in tables[1:]:
            body += t.to_csv().split("\n", 1)[1]
        _emit(cfg, f"# {cfg.echo()}\n{body}")
    return 0


def _sweep(cfg: RunConfig, tables):
    entries = _protocol_entries(cfg, tables)
    spec = SweepSpec(
        snr_db_points=tuple(cfg.snr),
        protocols=tuple(entries),
        packets_per_point=cfg.packets,
        seed=cfg.seed,
        channel_mode=cfg.channel_mode,
        params=cfg.params,
    )
    result = run_sweep(spec, workers=cfg.workers)
    if cfg.trace:
        _write_trace(cfg.trace, spec)
    return result


def _write_trace(path: str, spec: SweepSpec) -> None:
    """Replay batch 0 of every point with tracing on; the stream is the same one the sweep used."""
    n = batch_sizes(spec.packets_per_point)[0]
    with open(path, "w") as fh:
        for si, snr in enumerate(spec.snr_db_points):
            params = spec.params.at_snr(snr)
            for pi, entry in enumerate(spec.protocols):
                pc = entry.at(snr) if isinstance(entry, TableTau) else entry
                out = simulate_batch(pc, params, n, stream(spec.seed, si, pi, 0), spec.channel_mode, trace=True)
                for i, rec in enumerate(out.records):
                    fh.write(json.dumps(dict(
                        snr_db=snr, protocol=pc.label, packet=i, rounds=rec.rounds_used,
                        beta=rec.retx_symbol_counts, outcome=rec.outcome,
                    )) + "\n")


def cmd_simulate(cfg: RunConfig) -> int:
    result = _sweep(cfg, cfg.tables)
    text = result.to_json(cfg.echo()) if cfg.format == "json" else result.to_csv(cfg.echo())
    _emit(cfg, text)
    return 0


def _report_violations(report) -> int:
    for r in report.violations:
        sys.stderr.write(
            f"violation: {r.protocol} at {r.snr_db:g} dB: ber_m={r.ber_m:.4g} ber_a={r.ber_a:.4g} "
            f"eta_m={r.eta_m:.4g} eta_a={r.eta_a:.4g}\n"
        )
    return 1 if report.violations else 0


def cmd_compare(cfg: RunConfig) -> int:
    result = _sweep(cfg, cfg.tables)
    report = compare_to_analysis(result)
    text = report.to_json(cfg.echo()) if cfg.format == "json" else report.to_csv(cfg.echo())
    _emit(cfg, text)
    return _report_violations(report)


@dataclass(frozen=True)
class Preset:
    description: str
    protocol: str
    tau: str
    snr: str = "0:2:20"
    packets: int = 10_000
    omega: int = 2
    tables_only: bool = False


PRESETS = {
    "fig-ber-scc": Preset("SCC BER at tau = 0, tau_f and tau_o with full CC", "scc,cc", "0,full-equiv,opt", "0:4:20", 2000),
    "fig-ber-ccws": Preset("CCWS BER at tau = 0, tau_f and tau_o", "ccws", "0,full-equiv,opt", "0:4:20", 2000),
    "fig-throughput-comparison": Preset("throughput of CC, SCC and CCWS at tau_o", "cc,scc,ccws", "opt"),
    "fig-mscc": Preset("SCC against MSCC with two selective retransmissions", "scc,mscc", "opt", "0:2:12", 2000),
    "fig-tau": Preset("tau_o and tau_f against SNR", "scc,ccws", "opt", tables_only=True),
}


def cmd_reproduce(cfg: RunConfig) -> int:
    """Preset values sit between the defaults and anything given in a config file or flag."""
    preset = PRESETS[cfg.preset]
    for key in ("protocol", "tau", "snr", "packets", "omega"):
        if key not in cfg.explicit:
            conv, _ = SETTINGS[key]
            setattr(cfg, key, conv(getattr(preset, key)))
    tables = _build_tables(cfg, cfg.protocol)
    if preset.tables_only:
        body = tables[0].to_csv()
        for t in tables[1:]:
            body += t.to_csv().split("\n", 1)[1]
        _emit(cfg, f"# {cfg.echo()}\n# preset {cfg.preset}: {preset.description}\n{body}")
        return 0
    result = _sweep(cfg, tables)
    header = f"{cfg.echo()}\npreset {cfg.preset}: {preset.description}"
    text = result.to_json(header) if cfg.format == "json" else result.to_csv(header)
    _emit(cfg, text)
    return _report_violations(compare_to_analysis(result))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = resolve_config(argv)
        if cfg.command == "bounds":
            return cmd_bounds(cfg)
        if cfg.command == "optimize":
            return cmd_optimize(cfg)
        if cfg.command == "simulate":
            return cmd_simulate(cfg)
        if cfg.command == "compare":
            return cmd_compare(cfg)
        return cmd_reproduce(cfg)
    except UsageError as exc:
        sys.stderr.write(f"selharq: error: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(f"selharq: invalid configuration: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
