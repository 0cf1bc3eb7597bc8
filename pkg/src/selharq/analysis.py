"""Closed-form BER upper bounds and throughput lower bounds.

All bounds replace Q(x) by ``exp(-x^2/2)/12 + exp(-2x^2/3)/4`` and average
over Rayleigh subcarrier norms.  Each term is then a product of truncated
moment generating functions at the two rates ``g/(2 N0)`` and
``g1/(2 N0)`` with ``g1 = 4g/3``.

Noise is normalized per information bit: ``N0 = 1/snr_b`` with unit bit
energy, which is the normalization under which ``g = 2`` holds for 4-QAM.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .numerics import ChiSquareSpec, chi2_cdf, mgf_scale, poisson_tails, q_inverse

__all__ = [
    "BoundClampWarning",
    "LinkParams",
    "BerPoint",
    "ThroughputInputs",
    "snr_db_to_n0",
    "retx_fraction_m",
    "ber_single",
    "ber_full_cc",
    "ber_scc_joint",
    "ber_ccws_first",
    "ber_ccws_joint",
    "ber_point",
    "frame_error",
    "frame_success",
    "throughput_arq",
    "throughput_scc",
    "throughput_ccws",
    "threshold_from_target_ber",
    "analytic_curves",
]


class BoundClampWarning(UserWarning):
    """A bound exceeded 1 and was clamped."""


def snr_db_to_n0(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True)
class LinkParams:
    """Link constants shared by the analysis, optimizer and simulator.

    ``mod_const_c`` and ``mod_const_g`` default to ``2/log2 M`` and
    ``3 log2 M / (M - 1)`` (``c = 1``, ``g = 2`` for 4-QAM).
    """

    constellation_order: int = 4
    noise_level: float = 0.1
    rx_antennas: int = 1
    component_variance: float = 0.5
    subcarriers: int = 512
    taps: int = 10
    frame_bits: int | None = None
    mod_const_c: float | None = None
    mod_const_g: float | None = None

    def __post_init__(self):
        m = self.constellation_order
        k = round(math.log2(m)) if m > 1 else 0
        if m < 4 or 2 ** k != m or k % 2:
            raise ValueError(f"constellation_order must be a power of 4, got {m}")
        if not self.noise_level > 0:
            raise ValueError(f"noise_level must be positive, got {self.noise_level}")
        if self.rx_antennas < 1:
            raise ValueError("rx_antennas must be >= 1")
        if not self.component_variance > 0:
            raise ValueError("component_variance must be positive")
        if self.subcarriers < 1 or self.taps < 1 or self.taps > self.subcarriers:
            raise ValueError("need 1 <= taps <= subcarriers")
        if self.frame_bits is None:
            object.__setattr__(self, "frame_bits", self.subcarriers * k)
        if self.frame_bits < 1:
            raise ValueError("frame_bits must be >= 1")
        if self.mod_const_c is None:
            object.__setattr__(self, "mod_const_c", 2.0 / k)
        if self.mod_const_g is None:
            object.__setattr__(self, "mod_const_g", 3.0 * k / (m - 1))
        if not (self.mod_const_c > 0 and self.mod_const_g > 0):
            raise ValueError("modulation constants must be positive")

    @property
    def bits_per_symbol(self) -> int:
        return round(math.log2(self.constellation_order))

    @property
    def chi2(self) -> ChiSquareSpec:
        return ChiSquareSpec(self.rx_antennas, self.component_variance)

    @property
    def noise_variance(self) -> float:
        """Complex noise variance per sample for unit-energy symbols."""
        return self.noise_level / self.bits_per_symbol

    @property
    def snr_db(self) -> float:
        return -10.0 * math.log10(self.noise_level)

    def at_snr(self, snr_db: float) -> "LinkParams":
        from dataclasses import replace

        return replace(self, noise_level=snr_db_to_n0(snr_db))


@dataclass(frozen=True)
class BerPoint:
    single_tx: float
    full_cc: float
    scc_joint: float
    ccws_first: float
    ccws_joint: float
    clamped: bool = False


@dataclass(frozen=True)
class ThroughputInputs:
    p_frame_err_first: float
    p_frame_err_joint: float
    retx_fraction: float
    alpha: float = field(init=False)

    def __post_init__(self):
        for v in (self.p_frame_err_first, self.p_frame_err_joint, self.retx_fraction):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"probability out of range: {v}")
        object.__setattr__(self, "alpha", self.p_frame_err_first * self.p_frame_err_joint)


def _clamp(value: float, what: str) -> float:
    if value > 1.0:
        warnings.warn(f"{what} bound {value:.4g} exceeds 1, clamped", BoundClampWarning, stacklevel=3)
        return 1.0
    return value


def _families(params: LinkParams, tau: float):
    """Per rate: (full MGF A, upper tail S, lower tail F) with A*S, A*F the truncated MGFs."""
    n0, g = params.noise_level, params.mod_const_g
    spec = params.chi2
    out = []
    for rate in (g / (2.0 * n0), (4.0 * g / 3.0) / (2.0 * n0)):
        rho2 = mgf_scale(spec, rate).rho ** 2
        full = (rho2 / spec.component_variance) ** spec.half_degrees
        cdf, sf = poisson_tails(spec.half_degrees, tau / (2.0 * rho2))
        out.append((full, sf, cdf))
    return out


def retx_fraction_m(params: LinkParams, tau: float) -> float:
    """Expected fraction of subcarriers with ``||H||^2 <= tau``."""
    return chi2_cdf(params.chi2, tau)


def ber_single(params: LinkParams) -> float:
    """Bound on the BER of one transmission with ``n_r`` receive antennas."""
    (a, _, _), (a1, _, _) = _families(params, 0.0)
    c = params.mod_const_c
    return _clamp(c / 12 * a + c / 4 * a1, "single-transmission")


def ber_full_cc(params: LinkParams) -> float:
    """Bound for Chase combining of two full copies."""
    (a, _, _), (a1, _, _) = _families(params, 0.0)
    c = params.mod_const_c
    return _clamp(c / 12 * a * a + c / 4 * a1 * a1, "full-CC")


def ber_scc_joint(params: LinkParams, tau: float) -> float:
    """Bound on the joint-detection BER after one selective retransmission.

    ``tau = 0`` gives :func:`ber_single`, ``tau = math.inf`` gives
    :func:`ber_full_cc`.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    c = params.mod_const_c
    (a, s, f), (a1, s1, f1) = _families(params, tau)
    value = c / 12 * (a * s + a * a * f) + c / 4 * (a1 * s1 + a1 * a1 * f1)
    return _clamp(value, "SCC joint")


def ber_ccws_first(params: LinkParams, tau: float) -> float:
    """First decode of CCWS: same channel stack as SCC."""
    return ber_scc_joint(params, tau)


def ber_ccws_joint(params: LinkParams, tau: float) -> float:
    """Bound on the CCWS decode after the full retransmission.

    Sums the four selection events over the first and the Chase copy; the
    two mixed events are equiprobable and contribute the doubled middle term.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    c = params.mod_const_c
    total = 0.0
    for weight, (a, s, f) in zip((c / 12, c / 4), _families(params, tau)):
        total += weight * (a**2 * s * s + 2 * a**3 * s * f + a**4 * f * f)
    return _clamp(total, "CCWS joint")


def ber_point(params: LinkParams, tau: float) -> BerPoint:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundClampWarning)
        values = dict(
            single_tx=ber_single(params),
            full_cc=ber_full_cc(params),
            scc_joint=ber_scc_joint(params, tau),
            ccws_first=ber_ccws_first(params, tau),
            ccws_joint=ber_ccws_joint(params, tau),
        )
    clamped = any(issubclass(w.category, BoundClampWarning) for w in caught)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return BerPoint(**values, clamped=clamped)


def frame_error(bit_error: float, frame_bits: int) -> float:
    """``1 - (1 - p)^L_f`` for independent bit errors."""
    if not 0.0 <= bit_error <= 1.0:
        raise ValueError(f"bit_error must lie in [0, 1], got {bit_error}")
    if bit_error == 1.0:
        return 1.0
    return -math.expm1(frame_bits * math.log1p(-bit_error))


def throughput_arq(p_eps: float) -> float:
    """Plain retransmission without combining: every attempt is a fresh frame."""
    return 1.0 - p_eps


def frame_success(bit_error: float, frame_bits: int) -> float:
    """``(1 - p)^L_f``, kept accurate when it is far below machine epsilon."""
    if not 0.0 <= bit_error <= 1.0:
        raise ValueError(f"bit_error must lie in [0, 1], got {bit_error}")
    if bit_error == 1.0:
        return 0.0
    return math.exp(frame_bits * math.log1p(-bit_error))


def _scc_from_success(p_c: float, p_cs: float, m: float) -> float:
    # 1 - alpha = p_c + p_eps * p_cs avoids cancellation when both frames almost surely fail
    p_eps = 1.0 - p_c
    one_minus_alpha = p_c + p_eps * p_cs
    alpha = p_eps * (1.0 - p_cs)
    denom = p_c * (1.0 + m * alpha) + p_eps * p_cs * (1.0 + m)
    if denom == 0.0:
        return 0.0
    return one_minus_alpha**2 / denom


def _ccws_from_success(p_c1: float, p_c2: float, m: float) -> float:
    p_eps1 = 1.0 - p_c1
    one_minus_alpha = p_c1 + p_eps1 * p_c2
    alpha = p_eps1 * (1.0 - p_c2)
    denom = (p_c1 * (1.0 + alpha) + 2.0 * p_eps1 * p_c2) * (1.0 + m)
    if denom == 0.0:
        return 0.0
    return one_minus_alpha**2 / denom


def throughput_scc(p_eps: float, p_eps_s: float, m: float) -> float:
    """Throughput of SCC over unlimited rounds.

    Each round costs one frame plus a fraction ``m`` of a frame when the first
    decode fails.  ``m = 1`` is conventional Chase combining.
    """
    ThroughputInputs(p_eps, p_eps_s, m)
    return _scc_from_success(1.0 - p_eps, 1.0 - p_eps_s, m)


def throughput_ccws(p_eps1: float, p_eps2: float, m: float) -> float:
    """Throughput of CCWS: every full transmission carries ``(1 + m)`` frames on average."""
    ThroughputInputs(p_eps1, p_eps2, m)
    return _ccws_from_success(1.0 - p_eps1, 1.0 - p_eps2, m)


def threshold_from_target_ber(params: LinkParams, target_ber: float) -> float:
    """Subcarrier norm at which ``c Q(sqrt(g tau / N0))`` equals ``target_ber``."""
    c = params.mod_const_c
    if not 0.0 < target_ber < c:
        raise ValueError(f"target_ber must lie in (0, c={c}), got {target_ber}")
    return params.noise_level / params.mod_const_g * q_inverse(target_ber / c) ** 2


def analytic_curves(kind, params: LinkParams, tau: float = 0.0, omega: int = 1) -> tuple[float, float]:
    """Return ``(ber_bound, throughput_bound)`` for one protocol at ``params``.

    The BER is the bound for the last decode of a round.  MSCC with more than
    one selective retransmission has no closed form and yields NaNs.
    """
    from .config import Kind

    kind = Kind.parse(kind)
    lf = params.frame_bits
    single = ber_single(params)
    if kind is Kind.ARQ:
        return single, frame_success(single, lf)
    if kind is Kind.CC:
        ber = ber_full_cc(params)
        return ber, _scc_from_success(frame_success(single, lf), frame_success(ber, lf), 1.0)
    if kind in (Kind.SCC, Kind.MSCC):
        if kind is Kind.MSCC and omega != 1:
            return math.nan, math.nan
        ber = ber_scc_joint(params, tau)
        m = retx_fraction_m(params, tau)
        return ber, _scc_from_success(frame_success(single, lf), frame_success(ber, lf), m)
    first = frame_success(ber_ccws_first(params, tau), lf)
    ber = ber_ccws_joint(params, tau)
    return ber, _ccws_from_success(first, frame_success(ber, lf), retx_fraction_m(params, tau))
