"""Waveform-level Monte-Carlo oracle for the 1-bit fronthaul link.

Synthesizes the actual time-domain frame (OFDM-style baseband on the
occupied bins, real RF up-conversion, additive Gaussian dither, sign
quantization), down-converts at the receiving end, applies the same
combiners as the closed-form path, and measures the empirical EVM.  This
path shares no second-order-statistics code with the analytic modules, so
agreement between the two is a genuine cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bussgang, combiners
from .params import DerivedGrid, SystemParams, build_grid


@dataclass(frozen=True)
class WaveformFrame:
    """One synthesized frame: transmitted symbols and all intermediate signals."""

    s_hat: np.ndarray  # (U, S) frequency-domain symbols
    y_bb: np.ndarray  # (B, N) complex baseband at the APs
    y_rf: np.ndarray  # (B, N) real RF samples
    z_rf: np.ndarray  # (B, N) one-bit quantizer output, entries +-1


def draw_symbols(E_s: float, U: int, S: int, rng) -> np.ndarray:
    """I.i.d. CN(0, E_s) frequency-domain symbols, shape (U, S)."""
    return math.sqrt(E_s / 2.0) * (
        rng.standard_normal((U, S)) + 1j * rng.standard_normal((U, S))
    )


def synthesize_frame(
    channels: np.ndarray,
    p: SystemParams,
    grid: DerivedGrid,
    rng,
    s_hat: np.ndarray | None = None,
) -> WaveformFrame:
    """Synthesize one received-and-quantized frame for a channel realization.

    channels is (B, U) flat or (S, B, U) per occupied bin.  The RF samples
    are y_rf[n] = sqrt(2) Re{y_bb[n] e^(j 2 pi (f_c/f_s) n)}; the quantizer
    is sign(y_rf + d) with sign(0) mapped to +1 and d white Gaussian of
    variance E_d/2 per sample.
    """
    N, S = grid.N, grid.S
    H = bussgang._channel_stack(channels, S)
    B, U = H.shape[1], H.shape[2]
    if s_hat is None:
        s_hat = draw_symbols(p.E_s, U, S, rng)
    w_hat = math.sqrt(p.N_0 / 2.0) * (
        rng.standard_normal((B, S)) + 1j * rng.standard_normal((B, S))
    )
    X = np.zeros((B, N), dtype=complex)
    X[:, list(grid.bin_set)] = np.einsum("sbu,us->bs", H, s_hat) + w_hat
    y_bb = math.sqrt(N) * np.fft.ifft(X, axis=1)
    n = np.arange(N)
    carrier = np.exp(2j * np.pi * p.carrier_ratio * n)
    y_rf = math.sqrt(2.0) * (y_bb * carrier[None, :]).real
    d = math.sqrt(p.E_d / 2.0) * rng.standard_normal((B, N)) if p.E_d > 0 else 0.0
    z_rf = np.where(y_rf + d >= 0.0, 1.0, -1.0)
    return WaveformFrame(s_hat=s_hat, y_bb=y_bb, y_rf=y_rf, z_rf=z_rf)


def down_convert(z: np.ndarray, grid: DerivedGrid, f_c: float, f_s: float) -> np.ndarray:
    """Digital down-conversion to the occupied bins.

    z_hat[b, k] = sqrt(2/N) sum_n z[b, n] e^(-j 2 pi (k/N + f_c/f_s) n),
    returned with shape (B, S) ordered like grid.bin_set.
    """
    N = grid.N
    n = np.arange(N)
    folded = np.asarray(z) * np.exp(-2j * np.pi * (f_c / f_s) * n)[None, :]
    full = math.sqrt(2.0 / N) * np.fft.fft(folded, axis=1)
    return full[:, list(grid.bin_set)]


def _flat_combiners(
    kind: str, H: np.ndarray, p: SystemParams, grid: DerivedGrid, lag_tol=None
) -> np.ndarray:
    """Per-bin combining matrices (S, U, B) for a flat channel, using the
    same closed-form gain and error spectrum as the analytic EVM path."""
    Y, p_vec = bussgang.flat_quant_sums(
        H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s, lag_tol=lag_tol
    )
    gain = bussgang.flat_bussgang_gain(p_vec)
    S = grid.S
    if kind == "mr":
        A = combiners.mr_combiner(H, gain)
        return np.broadcast_to(A, (S,) + A.shape)
    if kind == "zf":
        A = combiners.zf_combiner(H, gain)
        return np.broadcast_to(A, (S,) + A.shape)
    if kind == "lmmse":
        Ce = (4.0 / math.pi) * Y
        return np.stack(
            [
                combiners.lmmse_combiner(H, gain, Ce_k, p.E_s, p.N_0, p.E_d)
                for Ce_k in Ce
            ]
        )
    raise ValueError(f"unknown combiner kind {kind!r}")


def empirical_evm(
    kind: str,
    H: np.ndarray,
    p: SystemParams,
    n_frames: int,
    rng,
    grid: DerivedGrid | None = None,
    lag_tol: float | None = None,
    quantized: bool = True,
) -> combiners.EvmResult:
    """Empirical squared EVM for one channel realization over n_frames frames.

    Symbols, noise, and dither are redrawn per frame; the combiner is fixed
    per realization.  With quantized=False the quantizer is bypassed (the
    combiner then uses unit gain and zero error spectrum), which isolates the
    numerical floor of the synthesis/down-conversion round trip.
    """
    grid = grid if grid is not None else build_grid(p)
    S, U = grid.S, p.U
    if quantized:
        A = _flat_combiners(kind, H, p, grid, lag_tol)
    else:
        unit = bussgang.BussgangGain(g=np.ones(np.asarray(H).shape[0]))
        if kind == "mr":
            A0 = combiners.mr_combiner(H, unit)
        elif kind == "zf":
            A0 = combiners.zf_combiner(H, unit)
        else:
            A0 = combiners.lmmse_combiner(
                H, unit, np.zeros((p.B, p.B)), p.E_s, p.N_0, p.E_d
            )
        A = np.broadcast_to(A0, (S,) + A0.shape)
    per_frame = np.empty(n_frames)
    for i in range(n_frames):
        frame = synthesize_frame(H, p, grid, rng)
        obs = frame.z_rf if quantized else frame.y_rf
        z_hat = down_convert(obs, grid, p.f_c, p.f_s)  # (B, S)
        s_est = np.einsum("sub,bs->us", A, z_hat)
        err = np.abs(s_est - frame.s_hat) ** 2
        per_frame[i] = err.sum() / (p.E_s * U * S)
    stderr = (
        float(per_frame.std(ddof=1) / math.sqrt(n_frames)) if n_frames > 1 else float("inf")
    )
    return combiners.EvmResult(
        eta_sq=float(per_frame.mean()),
        stderr=stderr,
        n_trials=n_frames,
        samples=per_frame,
    )


def empirical_autocov(
    H: np.ndarray,
    p: SystemParams,
    n_frames: int,
    rng,
    grid: DerivedGrid | None = None,
    n_lags: int = 8,
    signal: str = "z_rf",
) -> np.ndarray:
    """Empirical lag autocovariance (n_lags, B, B) of the RF-domain signal,
    averaged over frames with circular lags (matches the analytic model)."""
    grid = grid if grid is not None else build_grid(p)
    N = grid.N
    acc = np.zeros((n_lags, np.asarray(H).shape[0], np.asarray(H).shape[0]))
    for _ in range(n_frames):
        frame = synthesize_frame(H, p, grid, rng)
        x = getattr(frame, signal)
        for m in range(n_lags):
            # lag convention E[x[n+m] x[n]^T], circular over the frame
            rolled = np.roll(x, -m, axis=1)
            acc[m] += (rolled @ x.T).real / N
    return acc / n_frames
