"""Acceptance criteria 1-11, one test each, at their stated tolerances.

Each test prints a single ``CRITERION n: PASS|FAIL`` line with the numbers
behind the verdict.  The Monte Carlo criteria share one session-scoped sweep
(iid subcarriers, 4-QAM, one receive antenna, 10^4 packets per point).
"""
import math

import numpy as np
import pytest
from scipy import integrate

from selharq.analysis import (
    LinkParams,
    ber_ccws_joint,
    ber_full_cc,
    ber_scc_joint,
    ber_single,
    throughput_ccws,
    throughput_scc,
)
from selharq.cli import main
from selharq.config import ProtocolConfig
from selharq.montecarlo import (
    SweepSpec,
    TableTau,
    compare_to_analysis,
    eta_resolution,
    run_sweep,
)
from selharq.numerics import ChiSquareSpec, chi2_cdf, chi2_pdf, truncated_mgf
from selharq.optimizer import build_table

from .oracles import ccws_series_throughput, scc_series_throughput

PARAMS = LinkParams()
MODE = "iid_subcarrier"
SEED = 20240601
PACKETS = 10_000
SWEEP_SNR = (0.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0)
BOUND_SNR = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0)
MGF_GRID = [(n, r, t) for n in (1, 2, 4) for r in (0.1, 1.0, 10.0) for t in (0.0, 0.5, 2.0, 10.0)]


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def eta_se(point):
    return max(point.stderr_eta, eta_resolution(point, PARAMS.frame_bits))


@pytest.fixture(scope="session")
def tables():
    return build_table("scc", SWEEP_SNR, PARAMS), build_table("ccws", SWEEP_SNR, PARAMS)


@pytest.fixture(scope="session")
def sweep(tables):
    scc, ccws = tables
    spec = SweepSpec(
        snr_db_points=SWEEP_SNR,
        protocols=(
            ProtocolConfig("arq"),
            ProtocolConfig("cc"),
            TableTau(ProtocolConfig("scc"), scc),
            TableTau(ProtocolConfig("ccws"), ccws),
            TableTau(ProtocolConfig("mscc", mscc_omega=2), scc),
        ),
        packets_per_point=PACKETS,
        seed=SEED,
        channel_mode=MODE,
        params=PARAMS,
    )
    return run_sweep(spec)


def test_criterion_01_oracle_equivalence(capsys):
    worst_mgf, worst_cdf = 0.0, 0.0
    for n, rate, tau in MGF_GRID:
        spec = ChiSquareSpec(n)
        f = lambda x: math.exp(-rate * x) * float(chi2_pdf(spec, x))
        for side, (lo, hi) in (("upper", (tau, math.inf)), ("lower", (0.0, tau))):
            exact, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)
            got = truncated_mgf(spec, rate, tau, side)
            err = abs(got - exact) / exact if exact else abs(got)
            worst_mgf = max(worst_mgf, err)
        if tau > 0:
            exact, _ = integrate.quad(lambda x: float(chi2_pdf(spec, x)), 0, tau, epsabs=0, epsrel=1e-13)
            worst_cdf = max(worst_cdf, abs(chi2_cdf(spec, tau) - exact) / exact)
    ok = worst_mgf <= 1e-9 and worst_cdf <= 1e-10
    verdict(capsys, 1, ok, f"max rel err mgf={worst_mgf:.2e} (<=1e-9) cdf={worst_cdf:.2e} (<=1e-10) over {len(MGF_GRID)} points")


def test_criterion_02_series_vs_closed_form(capsys):
    rng = np.random.default_rng(SEED)
    triples = []
    while len(triples) < 100:
        a, b, m = rng.random(3)
        # alpha <= 0.8 keeps the 200-term truncation error below 1e-18
        if a * b <= 0.8:
            triples.append((a, b, m))
    worst = 0.0
    for a, b, m in triples:
        worst = max(
            worst,
            abs(throughput_scc(a, b, m) / scc_series_throughput(a, b, m) - 1),
            abs(throughput_ccws(a, b, m) / ccws_series_throughput(a, b, m) - 1),
        )
    verdict(capsys, 2, worst <= 1e-10, f"max rel err {worst:.2e} (<=1e-10) over 100 triples, both protocols")


def test_criterion_03_limit_identities(capsys):
    worst = 0.0
    for snr in range(0, 31, 2):
        p = PARAMS.at_snr(snr)
        for got, want in (
            (ber_scc_joint(p, 0.0), ber_single(p)),
            (ber_scc_joint(p, math.inf), ber_full_cc(p)),
            (ber_ccws_joint(p, 0.0), ber_full_cc(p)),
        ):
            worst = max(worst, abs(got - want) / want)
    eps = np.finfo(float).eps
    verdict(capsys, 3, worst <= 4 * eps, f"max rel err {worst:.2e} (machine eps {eps:.1e}) over 0:2:30 dB")


JOINT_STAGE = {"arq": 0, "cc": 1, "scc": 1, "ccws": 1}


@pytest.mark.slow
def test_criterion_04_ber_bound_validity(capsys, sweep):
    failures, ratios = [], []
    for snr in BOUND_SNR:
        for proto, stage in JOINT_STAGE.items():
            pt = sweep.get(snr, proto)
            sim, se, bound = pt.stage_ber[stage], pt.stage_stderr[stage], pt.ber_a
            se = se if math.isfinite(se) else 0.0
            if not sim <= bound + 3 * se:
                failures.append(f"{proto}@{snr:g}dB sim={sim:.3g}>bound={bound:.3g}+3se")
            if snr >= 8:
                ratio = bound / sim if sim > 0 else math.inf
                ratios.append(ratio)
                if not ratio <= 2:
                    failures.append(f"{proto}@{snr:g}dB bound/sim={ratio:.3g}")
    detail = f"{len(failures)} violations; worst ratio {max(ratios):.3g}" + (": " + "; ".join(failures) if failures else "")
    verdict(capsys, 4, not failures, detail)


@pytest.mark.slow
def test_criterion_05_throughput_bound(capsys, sweep):
    failures, gaps = [], []
    for snr in BOUND_SNR:
        for proto in JOINT_STAGE:
            pt = sweep.get(snr, proto)
            if not pt.eta_m >= pt.eta_a - 3 * eta_se(pt):
                failures.append(f"{proto}@{snr:g}dB eta_m={pt.eta_m:.4g}<eta_a={pt.eta_a:.4g}-3se")
            if snr >= 8:
                gap = abs(pt.eta_m - pt.eta_a) / pt.eta_a
                gaps.append(gap)
                if not gap <= 0.05:
                    failures.append(f"{proto}@{snr:g}dB gap={gap:.1%} (eta_m={pt.eta_m:.4g}, eta_a={pt.eta_a:.4g})")
    detail = f"{len(failures)} violations; max gap {max(gaps):.1%}" + (": " + "; ".join(failures) if failures else "")
    verdict(capsys, 5, not failures, detail)


def separated(hi, lo):
    pooled = math.hypot(eta_se(hi), eta_se(lo))
    return hi.eta_m - lo.eta_m > 3 * pooled, pooled


@pytest.mark.slow
def test_criterion_06_low_snr_ordering(capsys, sweep):
    failures, lines = [], []
    for snr in (0.0, 2.0, 4.0):
        ccws, scc, cc = (sweep.get(snr, p) for p in ("ccws", "scc", "cc"))
        lines.append(f"{snr:g}dB ccws={ccws.eta_m:.3g} scc={scc.eta_m:.3g} cc={cc.eta_m:.3g}")
        for hi, lo in ((ccws, scc), (scc, cc)):
            ok, pooled = separated(hi, lo)
            if not ok:
                failures.append(f"{hi.protocol}>{lo.protocol}@{snr:g}dB diff={hi.eta_m - lo.eta_m:.3g} 3se={3 * pooled:.3g}")
    detail = "; ".join(lines) + (" | " + "; ".join(failures) if failures else "")
    verdict(capsys, 6, not failures, detail)


@pytest.mark.slow
def test_criterion_07_mscc_gain(capsys, sweep):
    failures, lines = [], []
    for snr in (0.0, 2.0, 4.0, 6.0):
        mscc, scc = sweep.get(snr, "mscc2"), sweep.get(snr, "scc")
        ok, pooled = separated(mscc, scc)
        lines.append(f"{snr:g}dB mscc2={mscc.eta_m:.3g} scc={scc.eta_m:.3g} 3se={3 * pooled:.2g}")
        if not ok:
            failures.append(f"{snr:g}dB")
    detail = "; ".join(lines) + (f" | not separated at {', '.join(failures)}" if failures else "")
    verdict(capsys, 7, not failures, detail)


def test_criterion_08_tau_full(capsys):
    snrs = (8.0, 10.0, 12.0, 14.0, 16.0)
    table = build_table("scc", snrs, PARAMS)
    failures, lines = [], []
    for snr, tau in zip(snrs, table.tau_target):
        p = PARAMS.at_snr(snr)
        if not ber_scc_joint(p, tau) <= 1.01 * ber_full_cc(p) * (1 + 1e-12):
            failures.append(f"analytic slack missed at {snr:g}dB")
    spec = SweepSpec(
        snr_db_points=snrs,
        protocols=(
            TableTau(ProtocolConfig("scc", max_mac_rounds=1), table, "full"),
            ProtocolConfig("cc", max_mac_rounds=1),
        ),
        packets_per_point=4000,
        seed=SEED,
        channel_mode=MODE,
        params=PARAMS,
    )
    res = run_sweep(spec)
    for snr in snrs:
        scc, cc = res.get(snr, "scc").stage_ber[1], res.get(snr, "cc").stage_ber[1]
        ratio = scc / cc if cc > 0 else math.inf
        lines.append(f"{snr:g}dB {ratio:.3f}")
        if not 1 / 1.5 <= ratio <= 1.5:
            failures.append(f"ratio {ratio:.3f} at {snr:g}dB")
    detail = "sim BER ratio scc(tau_f)/cc: " + ", ".join(lines) + (" | " + "; ".join(failures) if failures else "")
    verdict(capsys, 8, not failures, detail)


def test_criterion_09_ccws_four_branch_diversity(capsys):
    snr = 6.0
    common = dict(snr_db_points=(snr,), seed=SEED, channel_mode=MODE)
    ccws = run_sweep(SweepSpec(
        protocols=(ProtocolConfig("ccws", tau=math.inf, max_mac_rounds=1),),
        packets_per_point=1000, params=PARAMS, **common,
    )).points[0]
    arq = run_sweep(SweepSpec(
        protocols=(ProtocolConfig("arq", max_mac_rounds=1),),
        packets_per_point=1000, params=LinkParams(rx_antennas=4), **common,
    )).points[0]
    bits_ccws = ccws.stage_decodes[1] * PARAMS.frame_bits
    bits_arq = arq.stage_decodes[0] * PARAMS.frame_bits
    a, sa = ccws.stage_ber[1], ccws.stage_stderr[1]
    b, sb = arq.stage_ber[0], arq.stage_stderr[0]
    pooled = math.hypot(sa, sb)
    ok = abs(a - b) <= 3 * pooled and min(bits_ccws, bits_arq) >= 1_000_000
    detail = f"ccws(inf) joint BER={a:.4g} ({bits_ccws} bits) vs n_r=4 single={b:.4g} ({bits_arq} bits); |diff|={abs(a - b):.2g}, 3se={3 * pooled:.2g}"
    verdict(capsys, 9, ok, detail)


def test_criterion_10_empirical_m(capsys):
    failures, lines = [], []
    for nr in (1, 2):
        params = LinkParams(rx_antennas=nr)
        taus = (0.2, 0.7, 1.5)
        # at 0 dB every first decode fails, so the selected set is never conditioned on a failure
        res = run_sweep(SweepSpec(
            snr_db_points=(0.0,),
            protocols=tuple(ProtocolConfig("scc", tau=t, max_mac_rounds=1) for t in taus),
            packets_per_point=400,
            seed=SEED,
            channel_mode=MODE,
            params=params,
        ))
        for t, pt in zip(taus, res.points):
            frac, se = pt.selection_fraction[0], pt.selection_stderr[0]
            m = chi2_cdf(params.chi2, t)
            lines.append(f"nr={nr} tau={t}: {frac:.4f} vs {m:.4f}")
            if not abs(frac - m) <= 3 * se:
                failures.append(f"nr={nr} tau={t} |diff|={abs(frac - m):.2g} 3se={3 * se:.2g}")
    detail = "; ".join(lines) + (" | " + "; ".join(failures) if failures else "")
    verdict(capsys, 10, not failures, detail)


def test_criterion_11_determinism(capsys, tmp_path, tables):
    scc, ccws = tables
    spec = SweepSpec(
        snr_db_points=(2.0, 12.0),
        protocols=(
            ProtocolConfig("arq"),
            ProtocolConfig("cc"),
            TableTau(ProtocolConfig("scc"), scc),
            TableTau(ProtocolConfig("ccws"), ccws),
            TableTau(ProtocolConfig("mscc", mscc_omega=2), scc),
        ),
        packets_per_point=200,
        seed=SEED,
        channel_mode="tap",
        params=PARAMS,
    )
    one, three = run_sweep(spec, workers=1), run_sweep(spec, workers=3)
    same = (
        one.to_csv("h") == three.to_csv("h")
        and one.to_json("h") == three.to_json("h")
        and compare_to_analysis(one).to_csv() == compare_to_analysis(three).to_csv()
    )
    argv = ["simulate", "--snr", "4,12", "--protocol", "arq,scc,mscc,ccws", "--tau", "0.6", "--packets", "60", "--seed", "5"]
    files = []
    for workers in ("1", "3"):
        out = tmp_path / f"w{workers}.csv"
        main([*argv, "--workers", workers, "--out", str(out)])
        files.append(out.read_bytes())
    same_cli = files[0] == files[1]
    verdict(capsys, 11, same and same_cli, f"library outputs identical={same}, CLI files identical={same_cli} (workers 1 vs 3)")
