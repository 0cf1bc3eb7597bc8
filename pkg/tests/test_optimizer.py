import math
import warnings

import numpy as np
import pytest

from selharq.analysis import LinkParams, ber_ccws_joint, ber_full_cc, ber_scc_joint
from selharq.numerics import chi2_cdf
from selharq.optimizer import (
    ConfigurationError,
    GridSpec,
    ThresholdCeilingWarning,
    ThresholdTable,
    build_table,
    optimize_tau,
    read_table_csv,
    read_tables_csv,
    tau_full_equivalent,
    throughput_at,
)

SNRS = list(range(0, 21, 2))


@pytest.fixture(scope="module")
def scc_table():
    return build_table("scc", SNRS)


@pytest.fixture(scope="module")
def ccws_table():
    return build_table("ccws", SNRS)


class TestGrid:
    def test_default_covers_quantile(self):
        p = LinkParams()
        taus = GridSpec().taus(p)
        assert taus[0] == 0.0 and math.isinf(taus[-1])
        assert taus.size == 258
        assert chi2_cdf(p.chi2, taus[-2]) >= 0.999 - 1e-12

    def test_empty_grid(self):
        with pytest.raises(ConfigurationError):
            GridSpec(values=()).taus(LinkParams())

    def test_negative_grid(self):
        with pytest.raises(ConfigurationError):
            GridSpec(values=(-1.0, 2.0)).taus(LinkParams())


class TestOptimize:
    def test_single_candidate(self):
        p = LinkParams().at_snr(10)
        tau, eta = optimize_tau("scc", p, GridSpec(values=(0.0,)))
        assert tau == 0.0
        assert eta == throughput_at("scc", p, 0.0)

    def test_rejects_other_protocols(self):
        with pytest.raises(ConfigurationError):
            optimize_tau("cc", LinkParams())

    @pytest.mark.parametrize("kind", ["scc", "ccws"])
    def test_high_snr_tau_vanishes(self, kind):
        # grid evaluation: tau_o shrinks roughly like N0 and pins to the smallest positive point by 60 dB
        grid = GridSpec()
        taus = [optimize_tau(kind, LinkParams().at_snr(s), grid)[0] for s in (20, 30, 40, 60)]
        assert taus[0] > taus[1] > taus[2] >= taus[3]
        assert taus[1] < 0.01
        assert taus[3] == grid.taus(LinkParams().at_snr(60))[1]

    def test_tie_goes_to_smaller_tau(self):
        # beyond every realistic norm the selection is total, so both candidates give the same eta
        p = LinkParams().at_snr(10)
        tau, eta = optimize_tau("scc", p, GridSpec(values=(1e6, 1e7)))
        assert tau == 1e6
        assert eta == throughput_at("scc", p, math.inf)

    def test_exhaustive_against_coarse_rescan(self, scc_table):
        # independent rescan on a different grid can never beat the fine grid by more than its resolution
        for snr, eta in zip(scc_table.snr_points, scc_table.eta_at_opt):
            p = LinkParams().at_snr(snr)
            coarse = [throughput_at("scc", p, t) for t in np.linspace(0, 8, 161)]
            assert max(coarse) <= eta * 1.02 + 1e-300

    def test_optimum_is_grid_max(self):
        p = LinkParams().at_snr(10)
        grid = GridSpec(points=64)
        tau, eta = optimize_tau("ccws", p, grid)
        etas = [throughput_at("ccws", p, t) for t in grid.taus(p)]
        assert eta == max(etas)
        assert tau in set(grid.taus(p))


class TestTauFull:
    def test_infinite_slack(self):
        assert tau_full_equivalent("scc", LinkParams().at_snr(10), slack=math.inf) == 0.0

    @pytest.mark.parametrize("snr", [0, 6, 12, 20])
    def test_slack_met_and_minimal(self, snr):
        p = LinkParams().at_snr(snr)
        t = tau_full_equivalent("scc", p)
        assert ber_scc_joint(p, t) <= 1.01 * ber_full_cc(p) * (1 + 1e-9)
        assert ber_scc_joint(p, t * 0.99) > 1.01 * ber_full_cc(p)

    def test_ccws_target(self):
        p = LinkParams().at_snr(8)
        t = tau_full_equivalent("ccws", p)
        assert ber_ccws_joint(p, t) <= 1.01 * ber_ccws_joint(p, math.inf) * (1 + 1e-9)

    def test_ceiling_warning(self):
        p = LinkParams().at_snr(10)
        with pytest.warns(ThresholdCeilingWarning):
            t = tau_full_equivalent("scc", p, slack=1e-6, ceiling=0.1)
        assert t == 0.1

    def test_decreasing_in_snr(self, scc_table, ccws_table):
        assert np.all(np.diff(scc_table.tau_target) < 0)
        assert np.all(np.diff(ccws_table.tau_target) < 0)


class TestTable:
    def test_single_point(self):
        assert len(build_table("scc", [8.0])) == 1

    def test_rows_reproduce_optimizer(self, scc_table):
        p = LinkParams().at_snr(SNRS[3])
        assert (scc_table.tau_opt[3], scc_table.eta_at_opt[3]) == optimize_tau("scc", p)

    def test_scc_trend(self, scc_table):
        assert scc_table.tau_opt[0] >= scc_table.tau_opt[-1]
        assert np.all(np.diff(scc_table.tau_opt) <= 0)

    @pytest.mark.parametrize("which", ["scc", "ccws"])
    def test_beats_endpoints(self, which, scc_table, ccws_table):
        table = scc_table if which == "scc" else ccws_table
        for snr, eta in zip(table.snr_points, table.eta_at_opt):
            p = LinkParams().at_snr(snr)
            ceiling = GridSpec().ceiling(p)
            assert eta >= throughput_at(which, p, 0.0)
            assert eta >= throughput_at(which, p, ceiling)
            assert eta >= throughput_at(which, p, math.inf)

    def test_deterministic(self):
        assert build_table("ccws", [4, 8]).to_csv() == build_table("ccws", [4, 8]).to_csv()

    def test_csv_round_trip(self, scc_table):
        text = scc_table.to_csv()
        assert text.splitlines()[0] == "snr_db,tau_opt,eta_opt,tau_full,protocol"
        back = read_table_csv("# header\n" + text)
        assert back.snr_points == scc_table.snr_points
        assert back.tau_opt == pytest.approx(scc_table.tau_opt, rel=1e-5)

    def test_mixed_file(self, scc_table, ccws_table):
        text = scc_table.to_csv() + ccws_table.to_csv().split("\n", 1)[1]
        tables = read_tables_csv(text)
        assert [t.protocol.value for t in tables] == ["scc", "ccws"]
        with pytest.raises(ValueError):
            read_table_csv(text)

    def test_lookup(self, scc_table):
        assert scc_table.lookup(8.0) == scc_table.tau_opt[4]
        assert scc_table.lookup(8.0, "full") == scc_table.tau_target[4]
        with pytest.raises(KeyError):
            scc_table.lookup(9.0)

    def test_invariants(self):
        with pytest.raises(ValueError):
            ThresholdTable("scc", [1.0, 0.0], [0, 0], [0, 0], [0, 0])
        with pytest.raises(ValueError):
            ThresholdTable("scc", [1.0], [0, 0], [0], [0])

    def test_error_carries_snr(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(ConfigurationError, match="at 3.0 dB"):
                build_table("scc", [3.0], grid=GridSpec(values=()))

    def test_empty_snr_grid(self):
        with pytest.raises(ConfigurationError):
            build_table("scc", [])
