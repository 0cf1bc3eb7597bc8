"""Optimal and full-CC-equivalent thresholds for SCC and CCWS against SNR."""
import os

from _common import parse
from experiment_config import TAU

from selharq.optimizer import build_table


def main():
    cfg, out = parse(__doc__, TAU)
    path = os.path.join(out, "tau_tables.csv")
    tables = [build_table(k, cfg.snr_db, cfg.params) for k in ("scc", "ccws")]
    with open(path, "w") as fh:
        fh.write(tables[0].to_csv() + tables[1].to_csv().split("\n", 1)[1])
    for t in tables:
        print(t.protocol.value)
        for row in zip(t.snr_points, t.tau_opt, t.tau_target, t.eta_at_opt):
            print("  snr=%5.1f dB  tau_o=%.4g  tau_f=%.4g  eta=%.4g" % row)
    print("wrote", path)


if __name__ == "__main__":
    main()
