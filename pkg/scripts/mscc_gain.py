"""SCC against MSCC with two selective retransmissions per round, both at the SCC optimal threshold."""
import math
import os

from _common import parse
from experiment_config import MSCC

from selharq.config import ProtocolConfig
from selharq.montecarlo import SweepSpec, TableTau, run_sweep
from selharq.optimizer import build_table


def main():
    cfg, out = parse(__doc__, MSCC)
    table = build_table("scc", cfg.snr_db, cfg.params)
    spec = SweepSpec(
        snr_db_points=cfg.snr_db,
        protocols=(TableTau(ProtocolConfig("scc"), table), TableTau(ProtocolConfig("mscc", mscc_omega=2), table)),
        packets_per_point=cfg.packets,
        seed=cfg.seed,
        channel_mode=cfg.channel_mode,
        params=cfg.params,
    )
    result = run_sweep(spec, workers=cfg.workers)
    with open(os.path.join(out, "mscc.csv"), "w") as fh:
        fh.write(result.to_csv(f"mscc gain seed={cfg.seed} packets={cfg.packets}"))
    for snr in cfg.snr_db:
        a, b = result.get(snr, "scc"), result.get(snr, "mscc2")
        z = (b.eta_m - a.eta_m) / math.hypot(a.stderr_eta, b.stderr_eta) if a.stderr_eta or b.stderr_eta else math.nan
        print(f"{snr:5.1f} dB scc={a.eta_m:.4f} mscc2={b.eta_m:.4f} z={z:.1f}")


if __name__ == "__main__":
    main()
