"""Simulated and analytical throughput of ARQ, CC, SCC and CCWS at their optimal thresholds."""
import os

from _common import parse
from experiment_config import THROUGHPUT

from selharq.config import ProtocolConfig
from selharq.montecarlo import SweepSpec, TableTau, compare_to_analysis, run_sweep
from selharq.optimizer import build_table


def main():
    cfg, out = parse(__doc__, THROUGHPUT)
    scc = build_table("scc", cfg.snr_db, cfg.params)
    ccws = build_table("ccws", cfg.snr_db, cfg.params)
    spec = SweepSpec(
        snr_db_points=cfg.snr_db,
        protocols=(
            ProtocolConfig("arq"),
            ProtocolConfig("cc"),
            TableTau(ProtocolConfig("scc"), scc),
            TableTau(ProtocolConfig("ccws"), ccws),
        ),
        packets_per_point=cfg.packets,
        seed=cfg.seed,
        channel_mode=cfg.channel_mode,
        params=cfg.params,
    )
    result = run_sweep(spec, workers=cfg.workers)
    header = f"throughput comparison seed={cfg.seed} packets={cfg.packets} mode={cfg.channel_mode}"
    with open(os.path.join(out, "throughput.csv"), "w") as fh:
        fh.write(result.to_csv(header))
    with open(os.path.join(out, "throughput_check.csv"), "w") as fh:
        fh.write(compare_to_analysis(result).to_csv(header))
    for p in result.points:
        print(f"{p.snr_db:5.1f} dB {p.protocol:5s} eta_m={p.eta_m:.4f} +- {p.stderr_eta:.1e}  eta_a={p.eta_a:.4f}")


if __name__ == "__main__":
    main()
