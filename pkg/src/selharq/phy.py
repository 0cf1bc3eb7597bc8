"""Physical layer: Rayleigh OFDM bins, Gray QAM, AWGN and MRC detection.

Arrays are batched: channels have shape ``(..., N_s, n_r)``, symbols
``(..., N_s)`` and bits ``(..., N_s * log2 M)``.  Every random draw goes
through an explicit :class:`numpy.random.Generator`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analysis import LinkParams

__all__ = [
    "FramingError",
    "TapChannel",
    "SubcarrierChannel",
    "ObservationStack",
    "draw_taps",
    "frequency_response",
    "draw_channel",
    "draw_channel_array",
    "modulate",
    "demodulate",
    "transmit",
    "draw_axis_codes",
    "symbols_from_codes",
    "count_bit_errors",
    "Combiner",
    "joint_detect",
]

CHANNEL_MODES = ("tap", "iid_subcarrier")


class FramingError(ValueError):
    """Bit count does not fill a whole number of symbols."""


@dataclass(frozen=True)
class TapChannel:
    """``L`` complex taps per receive antenna, shape ``(n_r, L)``."""

    taps: np.ndarray


@dataclass
class SubcarrierChannel:
    gains: np.ndarray

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2))


@dataclass
class ObservationStack:
    """Observations of one subcarrier symbol gathered across transmissions."""

    channels: list
    received: list

    def push(self, channel, received) -> None:
        self.channels.append(np.asarray(channel, dtype=complex))
        self.received.append(np.asarray(received, dtype=complex))

    @property
    def depth(self) -> int:
        return len(self.channels)


def _complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    # float32 draws halve the generator cost; precision is ample for Monte Carlo
    z = rng.standard_normal(tuple(shape) + (2,), dtype=np.float32)
    z *= np.float32(math.sqrt(variance / 2.0))
    return z.view(np.complex64)[..., 0]


def draw_taps(params: LinkParams, rng: np.random.Generator, batch=()) -> np.ndarray:
    """Uniform power-delay profile, variance ``1/L`` per tap; shape ``batch + (n_r, L)``."""
    shape = tuple(batch) + (params.rx_antennas, params.taps)
    return _complex_normal(rng, shape, 1.0 / params.taps)


@lru_cache(maxsize=16)
def _dft_rows(n_sub: int, n_taps: int) -> np.ndarray:
    k = np.arange(n_sub)[None, :]
    l = np.arange(n_taps)[:, None]
    return np.exp(-2j * np.pi * l * k / n_sub)


def frequency_response(taps: np.ndarray, n_sub: int) -> np.ndarray:
    """Evaluate ``sum_l h_l exp(-2 pi j l k / N_s)`` at every bin.

    ``taps`` has shape ``(..., n_r, L)``; the result has shape ``(..., N_s, n_r)``.
    """
    resp = taps @ _dft_rows(n_sub, taps.shape[-1])
    return np.swapaxes(resp, -1, -2)


def draw_channel_array(params: LinkParams, rng: np.random.Generator, mode: str = "tap", batch=()) -> np.ndarray:
    """Per-bin gains of shape ``batch + (N_s, n_r)``, each bin CN(0, 1) per antenna."""
    if mode == "tap":
        return frequency_response(draw_taps(params, rng, batch), params.subcarriers)
    if mode == "iid_subcarrier":
        return _complex_normal(rng, tuple(batch) + (params.subcarriers, params.rx_antennas))
    raise ValueError(f"unknown channel mode {mode!r}; choose from {CHANNEL_MODES}")


def draw_channel(params: LinkParams, rng: np.random.Generator, mode: str = "tap") -> list[SubcarrierChannel]:
    gains = draw_channel_array(params, rng, mode)
    return [SubcarrierChannel(g) for g in gains]


@lru_cache(maxsize=8)
def _gray_axis(bits_per_axis: int):
    """Level and bit pattern per axis index, index 0 being the most positive level."""
    n = 2**bits_per_axis
    levels = (n - 1 - 2 * np.arange(n)).astype(float)
    gray = np.arange(n) ^ (np.arange(n) >> 1)
    patterns = (gray[:, None] >> np.arange(bits_per_axis - 1, -1, -1)) & 1
    # bit-pattern integer -> index
    inverse = np.empty(n, dtype=np.int64)
    inverse[gray] = np.arange(n)
    return levels, patterns.astype(np.int8), inverse


def _qam_scale(order: int) -> float:
    return math.sqrt(2.0 * (order - 1) / 3.0)


def modulate(bits, params: LinkParams) -> np.ndarray:
    """Gray-mapped square QAM with unit average energy.

    Each symbol takes ``log2 M`` bits: the first half selects the in-phase
    level, the second half the quadrature level.  On each axis the bits are
    the binary-reflected Gray code of the level index counted from the most
    positive level, so for 4-QAM ``00 -> (1 + 1j)/sqrt(2)``.
    """
    bits = np.asarray(bits)
    k = params.bits_per_symbol
    if bits.shape[-1] % k:
        raise FramingError(f"{bits.shape[-1]} bits is not a multiple of {k} bits per symbol")
    half = k // 2
    levels, _, inverse = _gray_axis(half)
    grouped = bits.reshape(bits.shape[:-1] + (-1, 2, half)).astype(np.int64)
    weights = 1 << np.arange(half - 1, -1, -1)
    idx = inverse[grouped @ weights]
    amp = levels[idx] / _qam_scale(params.constellation_order)
    return amp[..., 0] + 1j * amp[..., 1]


def demodulate(symbols, params: LinkParams) -> np.ndarray:
    """Nearest-point hard decisions, inverse of :func:`modulate`."""
    symbols = np.asarray(symbols)
    half = params.bits_per_symbol // 2
    levels, patterns, _ = _gray_axis(half)
    n = levels.size
    scale = _qam_scale(params.constellation_order)
    out = []
    for axis in (symbols.real, symbols.imag):
        idx = np.clip(np.rint(((n - 1) - axis * scale) / 2.0), 0, n - 1).astype(np.int64)
        out.append(patterns[idx])
    bits = np.stack(out, axis=-2)
    return bits.reshape(symbols.shape[:-1] + (-1,))


def draw_axis_codes(params: LinkParams, rng: np.random.Generator, batch=()) -> np.ndarray:
    """Uniform per-axis Gray codewords, shape ``batch + (N_s, 2)``.

    A uniform codeword is the same as uniform bits on that axis, and the
    engine never has to pack or unpack individual bits.
    """
    n = 2 ** (params.bits_per_symbol // 2)
    return rng.integers(0, n, tuple(batch) + (params.subcarriers, 2), dtype=np.uint8)


@lru_cache(maxsize=8)
def _code_tables(order: int):
    half = round(math.log2(order)) // 2
    levels, _, inverse = _gray_axis(half)
    amp = (levels[inverse] / _qam_scale(order)).astype(np.float32)  # codeword -> amplitude
    gray = (np.arange(2**half) ^ (np.arange(2**half) >> 1)).astype(np.uint8)  # index -> codeword
    popcount = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)
    return amp, gray, popcount


def symbols_from_codes(codes, params: LinkParams) -> np.ndarray:
    amp, _, _ = _code_tables(params.constellation_order)
    a = amp[codes]
    return a[..., 0] + 1j * a[..., 1]


def count_bit_errors(estimates, codes, params: LinkParams) -> np.ndarray:
    """Hard-decide ``estimates`` and count bit errors per frame against ``codes``."""
    order = params.constellation_order
    _, gray, popcount = _code_tables(order)
    n = gray.size
    scale = np.float32(_qam_scale(order))
    total = 0
    for axis, part in enumerate((estimates.real, estimates.imag)):
        idx = np.rint(((n - 1) - part * scale) * np.float32(0.5))
        np.clip(idx, 0, n - 1, out=idx)
        detected = gray[idx.astype(np.intp)]
        total = total + popcount[detected ^ codes[..., axis]].sum(axis=-1, dtype=np.int64)
    return total


def transmit(symbols, channels, noise_variance: float, rng: np.random.Generator) -> np.ndarray:
    """``y = H s + w`` per bin and antenna, ``w ~ CN(0, noise_variance)``."""
    symbols = np.asarray(symbols)
    channels = np.asarray(channels)
    y = channels * symbols[..., None]
    if noise_variance > 0:
        y = y + _complex_normal(rng, y.shape, noise_variance)
    return y


class Combiner:
    """Running maximal-ratio combiner over a batch of frames.

    Keeps ``sum H^H y`` and ``sum ||H||^2`` per bin, which is all MRC needs;
    observations can be added to any subset of bins.
    """

    def __init__(self, shape):
        self.num = np.zeros(shape, dtype=np.complex64)
        self.den = np.zeros(shape, dtype=np.float32)
        self.depth = np.zeros(shape, dtype=np.int16)

    def add(self, channels, received, mask=None, rows=None) -> np.ndarray:
        """Fold in one observation, optionally only on ``rows`` and on bins in ``mask``.

        Returns the per-bin ``||H||^2`` that was actually added.
        """
        if rows is None:
            rows = slice(None)
        num = np.sum(np.conj(channels) * received, axis=-1)
        den = np.sum(channels.real**2 + channels.imag**2, axis=-1)
        if mask is not None:
            num = np.where(mask, num, 0.0)
            den = np.where(mask, den, 0.0)
            self.depth[rows] += mask
        else:
            self.depth[rows] += 1
        self.num[rows] += num
        self.den[rows] += den
        return den

    def estimate(self, rows=None) -> tuple[np.ndarray, np.ndarray]:
        """Symbol estimates and an erasure mask for bins with zero combined norm."""
        if rows is None:
            rows = slice(None)
        num, den = self.num[rows], self.den[rows]
        erased = den <= 0.0
        est = np.where(erased, 0.0, num / np.where(erased, 1.0, den))
        return est, erased


def joint_detect(stack: ObservationStack, params: LinkParams):
    """MRC over every observation of one symbol, then a hard decision.

    Returns ``(estimate, bits, erased)``.  A zero combined norm is an erasure:
    the estimate is 0 and the bits are those of the nearest point to 0.
    """
    if stack.depth < 1:
        raise ValueError("observation stack is empty")
    h = np.stack(stack.channels)
    y = np.stack(stack.received)
    den = float(np.sum(np.abs(h) ** 2))
    if den == 0.0:
        est = 0.0 + 0.0j
        return est, demodulate(np.array([est]), params), True
    est = complex(np.sum(np.conj(h) * y) / den)
    return est, demodulate(np.array([est]), params), False
