"""Joint-detection BER of SCC at tau = 0, tau_f and tau_o next to full CC, simulated and bounded."""
import os

from _common import parse
from experiment_config import BER

from selharq.config import ProtocolConfig
from selharq.montecarlo import SweepSpec, TableTau, run_sweep
from selharq.optimizer import build_table


def main():
    cfg, out = parse(__doc__, BER)
    table = build_table("scc", cfg.snr_db, cfg.params)
    base = ProtocolConfig("scc", max_mac_rounds=1)
    entries = (
        base,
        TableTau(base, table, "full"),
        TableTau(base, table, "opt"),
        ProtocolConfig("cc", max_mac_rounds=1),
    )
    rows = ["snr_db,curve,tau,ber_sim,stderr,ber_bound"]
    # one sweep per entry so rows can be labelled by curve
    for name, entry in zip(("scc_tau0", "scc_tauf", "scc_tauo", "cc"), entries):
        res = run_sweep(SweepSpec(cfg.snr_db, (entry,), cfg.packets, cfg.seed, cfg.channel_mode, cfg.params), cfg.workers)
        for p in res.points:
            stage = min(1, len(p.stage_ber) - 1)
            rows.append(f"{p.snr_db:g},{name},{p.tau:.6g},{p.stage_ber[stage]:.6g},{p.stage_stderr[stage]:.3g},{p.ber_a:.6g}")
            print(rows[-1])
    with open(os.path.join(out, "ber_scc.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
