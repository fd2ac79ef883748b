"""Bussgang MR/ZF/LMMSE combiners and the nonasymptotic squared EVM.

The Monte-Carlo expectation runs over channel realizations only; symbol,
noise, dither, and quantization-error statistics enter in closed form.  All
per-draw evaluations are pure functions, so trials can share a draw list for
paired comparisons and common-random-number sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bussgang
from .params import DerivedGrid, SystemParams, build_grid


class DegenerateChannelError(ArithmeticError):
    """Zero-norm channel column; MR diagonal normalization undefined."""


class SingularChannelError(ArithmeticError):
    """Rank-deficient channel; ZF pseudo-inverse undefined."""


@dataclass(frozen=True)
class EvmResult:
    """Squared EVM with term decomposition and Monte-Carlo error bar."""

    eta_sq: float
    stderr: float
    n_trials: int
    terms: dict = field(default_factory=dict)
    n_discarded: int = 0
    samples: np.ndarray | None = None

    @property
    def eta(self) -> float:
        return math.sqrt(self.eta_sq)


# ---------------------------------------------------------------------------
# Combining matrices (one bin)
# ---------------------------------------------------------------------------


def mr_combiner(H_k: np.ndarray, gain: bussgang.BussgangGain) -> np.ndarray:
    """Bussgang MR with array-gain normalization: A = diag(H^H H)^-1 H^H G^-1."""
    HhH_diag = (np.abs(H_k) ** 2).sum(axis=0)
    if (HhH_diag <= 0).any():
        raise DegenerateChannelError("zero-norm channel column")
    E = H_k.conj().T / HhH_diag[:, None]
    return E / gain.g[None, :]


def zf_combiner(H_k: np.ndarray, gain: bussgang.BussgangGain) -> np.ndarray:
    """Bussgang ZF: A = (H^H H)^-1 H^H G^-1."""
    F = _zf_matrix(H_k)
    return F / gain.g[None, :]


def lmmse_combiner(
    H_k: np.ndarray,
    gain: bussgang.BussgangGain,
    Ce_k: np.ndarray,
    E_s: float,
    N_0: float,
    E_d: float,
) -> np.ndarray:
    """Bussgang LMMSE combiner (minimizes the EVM among linear combiners)."""
    B = H_k.shape[0]
    Ginv = 1.0 / gain.g
    inner = (
        H_k @ H_k.conj().T
        + ((N_0 + E_d) / E_s) * np.eye(B)
        + (np.outer(Ginv, Ginv) * Ce_k) / E_s
    )
    return np.linalg.solve(inner.conj().T, H_k).conj().T * Ginv[None, :]


def _zf_matrix(H_k: np.ndarray) -> np.ndarray:
    HhH = H_k.conj().T @ H_k
    try:
        F = np.linalg.solve(HhH, H_k.conj().T)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError("rank-deficient channel") from exc
    if not np.all(np.isfinite(F)):
        raise SingularChannelError("non-finite ZF combiner")
    return F


def _mr_matrices(H_k: np.ndarray):
    HhH = H_k.conj().T @ H_k
    d = np.diagonal(HhH).real
    if (d <= 0).any():
        raise DegenerateChannelError("zero-norm channel column")
    E = H_k.conj().T / d[:, None]
    Bmat = (HhH - np.diag(np.diagonal(HhH))) / d[:, None]
    return E, Bmat


# ---------------------------------------------------------------------------
# Per-draw squared EVM, frequency-flat fast path
# ---------------------------------------------------------------------------


def _flat_draw_stats(
    H: np.ndarray, p: SystemParams, grid: DerivedGrid, lag_tol: float | None
):
    """Return (p_vec, X) with X_k = G^-1 C_e,k G^-1 stacked over bins."""
    Y, p_vec = bussgang.flat_quant_sums(
        H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s, lag_tol=lag_tol
    )
    X = 2.0 * np.outer(p_vec, p_vec)[None, :, :] * Y
    return p_vec, X


def eta2_draw(
    kind: str,
    H: np.ndarray,
    X: np.ndarray,
    p: SystemParams,
    grid: DerivedGrid,
) -> tuple[float, dict]:
    """Squared EVM for one flat-fading channel draw given X_k = G^-1 C_e,k G^-1.

    Returns (eta_sq, term breakdown).  MR/ZF follow the three/two-term trace
    sums; LMMSE is the normalized MMSE (1/US) sum_k tr((I + Z_k)^-1).
    """
    E_s, N_0, E_d, U, S = p.E_s, p.N_0, p.E_d, p.U, grid.S
    if kind == "mr":
        E, Bmat = _mr_matrices(H)
        interf = E_s * S * float((np.abs(Bmat) ** 2).sum())
        noise = (N_0 + E_d) * S * float((np.abs(E) ** 2).sum())
        quant = float(np.einsum("ub,kbc,uc->", E, X, E.conj()).real)
        denom = E_s * U * S
        terms = {
            "interference": interf / denom,
            "noise_dither": noise / denom,
            "quantization": quant / denom,
        }
        return (interf + noise + quant) / denom, terms
    if kind == "zf":
        F = _zf_matrix(H)
        noise = (N_0 + E_d) * S * float((np.abs(F) ** 2).sum())
        quant = float(np.einsum("ub,kbc,uc->", F, X, F.conj()).real)
        denom = E_s * U * S
        terms = {"noise_dither": noise / denom, "quantization": quant / denom}
        return (noise + quant) / denom, terms
    if kind == "lmmse":
        B = H.shape[0]
        inner = ((N_0 + E_d) / E_s) * np.eye(B)[None, :, :] + X / E_s
        Z = H.conj().T[None, :, :] @ np.linalg.solve(inner, np.broadcast_to(H, (S, B, U)).copy())
        mse = np.linalg.inv(np.eye(U)[None, :, :] + Z)
        eta_sq = float(np.trace(mse, axis1=1, axis2=2).sum().real) / (U * S)
        return eta_sq, {"mmse": eta_sq}
    raise ValueError(f"unknown combiner kind {kind!r}")


def eta2_draw_generic(
    kind: str,
    H_bins: np.ndarray,
    gain: bussgang.BussgangGain,
    Ce: np.ndarray,
    p: SystemParams,
    grid: DerivedGrid,
) -> float:
    """Squared EVM for one draw with per-bin channels H_bins (S, B, U)."""
    E_s, N_0, E_d, U, S = p.E_s, p.N_0, p.E_d, p.U, grid.S
    Ginv = 1.0 / gain.g
    X = np.outer(Ginv, Ginv)[None, :, :] * Ce
    total = 0.0
    for H_k, X_k in zip(H_bins, X):
        if kind == "mr":
            E, Bmat = _mr_matrices(H_k)
            total += E_s * float((np.abs(Bmat) ** 2).sum())
            total += (N_0 + E_d) * float((np.abs(E) ** 2).sum())
            total += float(np.einsum("ub,bc,uc->", E, X_k, E.conj()).real)
        elif kind == "zf":
            F = _zf_matrix(H_k)
            total += (N_0 + E_d) * float((np.abs(F) ** 2).sum())
            total += float(np.einsum("ub,bc,uc->", F, X_k, F.conj()).real)
        elif kind == "lmmse":
            B = H_k.shape[0]
            inner = ((N_0 + E_d) / E_s) * np.eye(B) + X_k / E_s
            Z = H_k.conj().T @ np.linalg.solve(inner, H_k)
            total += E_s * float(np.trace(np.linalg.inv(np.eye(U) + Z)).real)
        else:
            raise ValueError(f"unknown combiner kind {kind!r}")
    return total / (E_s * U * S)


# ---------------------------------------------------------------------------
# Monte-Carlo drivers
# ---------------------------------------------------------------------------


def evm_for_draws(
    kind: str,
    p: SystemParams,
    grid: DerivedGrid,
    draws,
    lag_tol: float | None = None,
) -> EvmResult:
    """Average the per-draw squared EVM over an explicit list of channel draws."""
    samples = []
    term_acc: dict = {}
    discarded = 0
    for H in draws:
        try:
            _, X = _flat_draw_stats(H, p, grid, lag_tol)
            eta_sq, terms = eta2_draw(kind, H, X, p, grid)
        except (DegenerateChannelError, SingularChannelError):
            discarded += 1
            continue
        samples.append(eta_sq)
        for name, val in terms.items():
            term_acc[name] = term_acc.get(name, 0.0) + val
    return _finalize(samples, term_acc, discarded)


def _finalize(samples, term_acc, discarded) -> EvmResult:
    arr = np.asarray(samples)
    n = arr.size
    if n == 0:
        raise SingularChannelError("all channel draws were degenerate")
    stderr = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return EvmResult(
        eta_sq=float(arr.mean()),
        stderr=stderr,
        n_trials=n,
        terms={k: v / n for k, v in term_acc.items()},
        n_discarded=discarded,
        samples=arr,
    )


def _draw_list(channel_source, n_trials, rng):
    return [channel_source(rng) for _ in range(n_trials)]


def evm_mr(p, channel_source, n_trials, rng, grid=None, lag_tol=None) -> EvmResult:
    grid = grid if grid is not None else build_grid(p)
    return evm_for_draws("mr", p, grid, _draw_list(channel_source, n_trials, rng), lag_tol)


def evm_zf(p, channel_source, n_trials, rng, grid=None, lag_tol=None) -> EvmResult:
    grid = grid if grid is not None else build_grid(p)
    return evm_for_draws("zf", p, grid, _draw_list(channel_source, n_trials, rng), lag_tol)


def evm_lmmse(p, channel_source, n_trials, rng, grid=None, lag_tol=None) -> EvmResult:
    grid = grid if grid is not None else build_grid(p)
    return evm_for_draws("lmmse", p, grid, _draw_list(channel_source, n_trials, rng), lag_tol)


# ---------------------------------------------------------------------------
# Imperfect CSI
# ---------------------------------------------------------------------------


def eta2_draw_imperfect(
    kind: str,
    H: np.ndarray,
    H_est: np.ndarray,
    p: SystemParams,
    grid: DerivedGrid,
    lag_tol: float | None = None,
) -> float:
    """Squared EVM with an estimated channel in the ZF/MR combiner.

    Uses the mismatch expansion with Q = F~ G~^-1 G H - I, the G~^-2 G^2
    noise term, and the true quantization-error spectrum.  Collapses to the
    perfect-CSI expression when H_est equals H.
    """
    E_s, N_0, E_d, U, S = p.E_s, p.N_0, p.E_d, p.U, grid.S
    Y, p_vec = bussgang.flat_quant_sums(
        H, E_s, N_0, E_d, grid, p.f_c, p.f_s, lag_tol=lag_tol
    )
    p_est = bussgang.flat_p(H_est, E_s, N_0, E_d, grid)
    if kind == "zf":
        Fe = _zf_matrix(H_est)
    elif kind == "mr":
        Fe, _ = _mr_matrices(H_est)
    else:
        raise ValueError("imperfect-CSI EVM supports kinds 'zf' and 'mr'")
    ratio = p_est / p_vec  # diag(G~^-1 G)
    Fr = Fe * ratio[None, :]
    Q = Fr @ H - np.eye(U)
    mismatch = E_s * S * float((np.abs(Q) ** 2).sum())
    noise = (N_0 + E_d) * S * float((np.abs(Fr) ** 2).sum())
    X_est = 2.0 * np.outer(p_est, p_est)[None, :, :] * Y
    quant = float(np.einsum("ub,kbc,uc->", Fe, X_est, Fe.conj()).real)
    return (mismatch + noise + quant) / (E_s * U * S)


def evm_zf_imperfect_csi(
    p: SystemParams,
    pair_source,
    n_trials: int,
    rng,
    grid: DerivedGrid | None = None,
    lag_tol: float | None = None,
    kind: str = "zf",
) -> EvmResult:
    """Monte-Carlo EVM over (true, estimated) channel pairs from pair_source."""
    grid = grid if grid is not None else build_grid(p)
    samples = []
    discarded = 0
    for _ in range(n_trials):
        H, H_est = pair_source(rng)
        try:
            samples.append(eta2_draw_imperfect(kind, H, H_est, p, grid, lag_tol))
        except (DegenerateChannelError, SingularChannelError):
            discarded += 1
    return _finalize(samples, {}, discarded)


def pilot_estimate_channel(
    H: np.ndarray,
    gains: np.ndarray,
    p: SystemParams,
    grid: DerivedGrid,
    n_pilots: int,
    E_d_pilot: float,
    rng,
) -> np.ndarray:
    """Default pilot-based channel estimator (pluggable; a documented stand-in).

    Simulates ceil(n_pilots/S) one-bit pilot frames with a fixed, known pilot
    block and dither energy E_d_pilot, averages the down-converted outputs,
    and applies a per-AP linear MMSE fit based on the Bussgang-linearized
    observation model with prior channel statistics.  The linearization gain
    and error floor use receiver-side prior knowledge (path-loss gains), not
    the realized channel.
    """
    from . import waveform  # local import; waveform also consumes combiners

    E_s, N_0, S = p.E_s, p.N_0, grid.S
    B, U = H.shape
    if n_pilots < 1:
        raise ValueError("need at least one pilot symbol")
    n_frames = -(-n_pilots // S)
    pilot_params = SystemParams(
        f_c=p.f_c, W=p.W, f_s=p.f_s, S=p.S, B=p.B, U=p.U,
        Ebar_s=p.Ebar_s, E_d=E_d_pilot, N_0=p.N_0,
    )
    if E_s == 0:
        return np.zeros((B, U), dtype=complex)
    s_pilot = waveform.draw_symbols(E_s, U, S, rng)  # fixed across frames
    z_acc = np.zeros((B, S), dtype=complex)
    for _ in range(n_frames):
        frame = waveform.synthesize_frame(H, pilot_params, grid, rng, s_hat=s_pilot)
        z_acc += waveform.down_convert(frame.z_rf, grid, p.f_c, p.f_s)
    z_bar = z_acc / n_frames

    # prior-statistics linearization: expected per-AP input power
    prior_row = E_s * np.asarray(gains).sum(axis=1) + N_0
    p_prior = np.sqrt((S / grid.N) * prior_row + E_d_pilot / 2.0)
    g_prior = bussgang.SQRT_2_OVER_PI / p_prior
    ce_white = 2.0 * (1.0 - 2.0 / math.pi)  # white quantization-error floor

    H_est = np.empty((B, U), dtype=complex)
    for b in range(B):
        A = g_prior[b] * s_pilot.T  # (S, U)
        lam = np.asarray(gains)[b, :]
        v = (g_prior[b] ** 2 * (N_0 + E_d_pilot) + ce_white) / n_frames
        Cz = (A * lam[None, :]) @ A.conj().T + v * np.eye(S)
        H_est[b] = lam * (A.conj().T @ np.linalg.solve(Cz, z_bar[b]))
    return H_est
