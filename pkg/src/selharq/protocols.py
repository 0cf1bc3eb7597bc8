"""Retransmission state machines with exact bit accounting.

The engines advance a whole batch of packets one round at a time, so one
call simulates many independent packets from a single random stream.
``run_packet_*`` wrap a batch of one and return a :class:`TransferRecord`.

Round structure per protocol:

* ARQ: one transmission, one decode.  The observation is never reused.
* CC: full transmission, decode, full retransmission, joint decode.
* SCC / MSCC: full transmission, decode, then up to ``mscc_omega`` selective
  retransmissions of the bins whose cumulative norm within the round is
  below ``tau``, each followed by a joint decode of everything received in
  the round.
* CCWS: full transmission plus one selective copy of its own weak bins,
  decode; on failure a full retransmission plus its own selective copy and a
  joint decode of all four groups.

Observations are discarded at the end of every failed round.  CRC is ideal:
a frame is accepted iff every decoded bit is right.

The MAC counter starts at 1 and advances with every selective
retransmission (SCC, MSCC), every full retransmission (CC), every attempt
(ARQ) and every round (CCWS).  A packet is lost once a failed round leaves
the counter at ``max_mac_rounds`` or above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import LinkParams
from .config import Kind, ProtocolConfig
from .phy import Combiner, count_bit_errors, draw_axis_codes, draw_channel_array, symbols_from_codes, transmit

__all__ = [
    "SelectionSet",
    "TransferRecord",
    "BatchOutcome",
    "select_for_retx",
    "simulate_batch",
    "run_packet",
    "run_packet_arq",
    "run_packet_cc",
    "run_packet_mscc",
    "run_packet_ccws",
]


@dataclass(frozen=True)
class SelectionSet:
    indices: np.ndarray

    @property
    def cardinality(self) -> int:
        return int(self.indices.size)


@dataclass
class TransferRecord:
    """Accounting for one packet.

    ``decode_errors`` lists ``(round, stage, bit_errors)`` for every decode;
    stage 0 is the first decode of a round.  ``retx_log`` lists
    ``(round, slot, selected_bins)`` for every selective retransmission.
    """

    bits_sent: int = 0
    bits_delivered: int = 0
    rounds_used: int = 0
    full_transmissions: int = 0
    retx_symbol_counts: list = field(default_factory=list)
    decode_errors: list = field(default_factory=list)
    retx_log: list = field(default_factory=list)
    outcome: str = "lost"


@dataclass
class BatchOutcome:
    """Per-packet totals and pooled decode statistics for one batch."""

    bits_sent: np.ndarray
    bits_delivered: np.ndarray
    rounds: np.ndarray
    full_transmissions: np.ndarray
    selective_symbols: np.ndarray
    delivered: np.ndarray
    stage_errors: np.ndarray
    stage_decodes: np.ndarray
    final_errors: int
    final_decodes: int
    selection_sums: np.ndarray
    selection_counts: np.ndarray
    frame_bits: int
    max_depth: int = 0
    records: list | None = None

    @property
    def n_packets(self) -> int:
        return int(self.bits_sent.size)


def select_for_retx(cumulative_norms, tau: float) -> SelectionSet:
    """Bins whose cumulative norm is strictly below ``tau``."""
    norms = np.asarray(cumulative_norms, dtype=float)
    return SelectionSet(np.flatnonzero(norms < tau))


class _Batch:
    """Mutable per-packet state shared by both engines."""

    def __init__(self, n: int, n_stages: int, n_selections: int, params: LinkParams, trace: bool):
        self.params = params
        self.lf = params.frame_bits
        self.k = params.bits_per_symbol
        self.bits_sent = np.zeros(n, dtype=np.int64)
        self.bits_delivered = np.zeros(n, dtype=np.int64)
        self.rounds = np.zeros(n, dtype=np.int64)
        self.full_tx = np.zeros(n, dtype=np.int64)
        self.sel_symbols = np.zeros(n, dtype=np.int64)
        self.delivered = np.zeros(n, dtype=bool)
        self.stage_errors = np.zeros(n_stages, dtype=np.int64)
        self.stage_decodes = np.zeros(n_stages, dtype=np.int64)
        self.final_errors = 0
        self.final_decodes = 0
        self.selection_sums = np.zeros(n_selections, dtype=np.int64)
        self.selection_counts = np.zeros(n_selections, dtype=np.int64)
        self.max_depth = 0
        self.records = [TransferRecord() for _ in range(n)] if trace else None

    def full(self, ids):
        self.full_tx[ids] += 1
        self.bits_sent[ids] += self.lf

    def selective(self, ids, sel, slot):
        beta = sel.sum(axis=1)
        self.sel_symbols[ids] += beta
        self.bits_sent[ids] += beta * self.k
        self.selection_sums[slot] += int(beta.sum())
        self.selection_counts[slot] += beta.size
        if self.records is not None:
            for i, b, row in zip(ids, beta, sel):
                rec = self.records[i]
                rec.retx_symbol_counts.append(int(b))
                rec.retx_log.append((rec.rounds_used, slot, np.flatnonzero(row)))

    def decoded(self, ids, errors, stage):
        self.stage_errors[stage] += int(errors.sum())
        self.stage_decodes[stage] += errors.size
        if self.records is not None:
            for i, e in zip(ids, errors):
                rec = self.records[i]
                rec.decode_errors.append((rec.rounds_used, stage, int(e)))

    def close_round(self, ids, final_errors, ok, crc_bits, depth):
        self.max_depth = max(self.max_depth, int(depth.max()))
        self.rounds[ids] += 1
        self.final_errors += int(final_errors.sum())
        self.final_decodes += ids.size
        won = ids[ok]
        self.delivered[won] = True
        self.bits_delivered[won] += self.lf - crc_bits
        if self.records is not None:
            for i in ids:
                self.records[i].rounds_used += 1

    def outcome(self) -> BatchOutcome:
        if self.records is not None:
            for i, rec in enumerate(self.records):
                rec.bits_sent = int(self.bits_sent[i])
                rec.bits_delivered = int(self.bits_delivered[i])
                rec.full_transmissions = int(self.full_tx[i])
                rec.outcome = "delivered" if self.delivered[i] else "lost"
        return BatchOutcome(
            bits_sent=self.bits_sent,
            bits_delivered=self.bits_delivered,
            rounds=self.rounds,
            full_transmissions=self.full_tx,
            selective_symbols=self.sel_symbols,
            delivered=self.delivered,
            stage_errors=self.stage_errors,
            stage_decodes=self.stage_decodes,
            final_errors=self.final_errors,
            final_decodes=self.final_decodes,
            selection_sums=self.selection_sums,
            selection_counts=self.selection_counts,
            frame_bits=self.lf,
            max_depth=self.max_depth,
            records=self.records,
        )


def _errors(comb: Combiner, rows, codes, params) -> np.ndarray:
    est, _ = comb.estimate(rows)
    return count_bit_errors(est, codes[rows], params)


def _run_chase_family(cfg, params, n, rng, mode, trace) -> BatchOutcome:
    """ARQ, CC, SCC and MSCC share one loop: a full transmission then ``omega`` repeats."""
    kind = cfg.kind
    omega = {Kind.ARQ: 0, Kind.CC: 1}.get(kind, cfg.mscc_omega)
    tau = math.inf if kind is Kind.CC else cfg.tau
    st = _Batch(n, omega + 1, max(omega, 1), params, trace)
    nv = params.noise_variance
    n_sub = params.subcarriers
    mac = np.ones(n, dtype=np.int64)  # J
    active = np.arange(n)
    while active.size:
        na = active.size
        codes = draw_axis_codes(params, rng, (na,))
        sym = symbols_from_codes(codes, params)
        comb = Combiner((na, n_sub))
        h = draw_channel_array(params, rng, mode, (na,))
        cum = comb.add(h, transmit(sym, h, nv, rng))
        st.full(active)
        err = _errors(comb, slice(None), codes, params)
        st.decoded(active, err, 0)
        ok = err == 0
        for it in range(omega):
            rows = np.flatnonzero(~ok)
            if rows.size == 0:
                break
            ids = active[rows]
            hs = draw_channel_array(params, rng, mode, (rows.size,))
            ys = transmit(sym[rows], hs, nv, rng)
            if kind is Kind.CC:
                comb.add(hs, ys, rows=rows)
                st.full(ids)
            else:
                sel = cum[rows] < tau
                cum[rows] += comb.add(hs, ys, mask=sel, rows=rows)
                st.selective(ids, sel, it)
            mac[ids] += 1
            e = _errors(comb, rows, codes, params)
            st.decoded(ids, e, it + 1)
            err[rows] = e
            ok[rows] = e == 0
        st.close_round(active, err, ok, cfg.crc_bits, comb.depth)
        failed = active[~ok]
        lost = mac[failed] >= cfg.max_mac_rounds
        if kind is Kind.ARQ:
            mac[failed] += 1
        active = failed[~lost]
    return st.outcome()


def _run_ccws(cfg, params, n, rng, mode, trace) -> BatchOutcome:
    st = _Batch(n, 2, 2, params, trace)
    nv, tau = params.noise_variance, cfg.tau
    n_sub = params.subcarriers
    mac = np.ones(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        na = active.size
        codes = draw_axis_codes(params, rng, (na,))
        sym = symbols_from_codes(codes, params)
        comb = Combiner((na, n_sub))
        err = np.zeros(na, dtype=np.int64)
        ok = np.zeros(na, dtype=bool)
        rows = np.arange(na)
        for stage in (0, 1):
            if stage == 1:
                rows = np.flatnonzero(~ok)
                if rows.size == 0:
                    break
            ids = active[rows]
            h = draw_channel_array(params, rng, mode, (rows.size,))
            norm = comb.add(h, transmit(sym[rows], h, nv, rng), rows=rows)
            sel = norm < tau
            hs = draw_channel_array(params, rng, mode, (rows.size,))
            comb.add(hs, transmit(sym[rows], hs, nv, rng), mask=sel, rows=rows)
            st.full(ids)
            st.selective(ids, sel, stage)
            e = _errors(comb, rows, codes, params)
            st.decoded(ids, e, stage)
            err[rows] = e
            ok[rows] = e == 0
        st.close_round(active, err, ok, cfg.crc_bits, comb.depth)
        failed = active[~ok]
        lost = mac[failed] >= cfg.max_mac_rounds
        mac[failed] += 1
        active = failed[~lost]
    return st.outcome()


def simulate_batch(
    cfg: ProtocolConfig,
    params: LinkParams,
    n_packets: int,
    rng: np.random.Generator,
    mode: str = "tap",
    trace: bool = False,
) -> BatchOutcome:
    """Run ``n_packets`` independent packets to delivery or loss."""
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    if params.frame_bits != params.subcarriers * params.bits_per_symbol:
        raise ValueError("the simulator needs frame_bits == subcarriers * log2(M)")
    if cfg.crc_bits >= params.frame_bits:
        raise ValueError("crc_bits must be smaller than the frame")
    if cfg.kind is Kind.CCWS:
        return _run_ccws(cfg, params, n_packets, rng, mode, trace)
    return _run_chase_family(cfg, params, n_packets, rng, mode, trace)


def run_packet(cfg: ProtocolConfig, params: LinkParams, rng: np.random.Generator, mode: str = "tap") -> TransferRecord:
    return simulate_batch(cfg, params, 1, rng, mode, trace=True).records[0]


def _checked(kinds, cfg):
    if cfg.kind not in kinds:
        raise ValueError(f"expected a {'/'.join(k.value for k in kinds)} config, got {cfg.kind.value}")
    return cfg


def run_packet_arq(cfg, params, rng, mode="tap") -> TransferRecord:
    return run_packet(_checked((Kind.ARQ,), cfg), params, rng, mode)


def run_packet_cc(cfg, params, rng, mode="tap") -> TransferRecord:
    return run_packet(_checked((Kind.CC,), cfg), params, rng, mode)


def run_packet_mscc(cfg, params, rng, mode="tap") -> TransferRecord:
    return run_packet(_checked((Kind.SCC, Kind.MSCC), cfg), params, rng, mode)


def run_packet_ccws(cfg, params, rng, mode="tap") -> TransferRecord:
    return run_packet(_checked((Kind.CCWS,), cfg), params, rng, mode)
