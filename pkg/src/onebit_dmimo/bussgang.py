"""Second-order statistics of the dithered 1-bit quantized RF signal.

Covers the autocovariance of the pre-quantizer signal, the Bussgang gain,
the arcsine-law output covariance, the quantization-error covariance and its
per-bin frequency-domain form, plus the frequency-flat fast path used by the
Monte-Carlo EVM sweeps.

All lag sequences are indexed m = 0..N-1.  The bin transform sums those N
lags one-sidedly; because the lag sequences here are circularly stationary
over the observation window (and exp(-j*2*pi*(k/N + f_c/f_s)*m) is
N-periodic when f_c/W is an integer), this one-sided sum is exactly the
covariance of the down-converted error, with no triangular taper.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import DerivedGrid

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
ARCSINE_EPS = 1e-12


class NumericalValidityError(ArithmeticError):
    """Normalized covariance argument left [-1, 1] by more than roundoff."""


class SingularConfigurationError(ArithmeticError):
    """Quantizer input has zero power (no signal, no noise, no dither)."""


@dataclass(frozen=True)
class AutocovSequence:
    """Lag-indexed family of real B x B matrices, data shape (n_lags, B, B)."""

    data: np.ndarray
    signal: str  # one of "y_rf", "q", "z_rf", "e"

    @property
    def n_lags(self) -> int:
        return self.data.shape[0]

    @property
    def B(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BussgangGain:
    """Diagonal Bussgang gain matrix, stored as its diagonal g."""

    g: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.g)


@dataclass(frozen=True)
class QuantErrorSpectrum:
    """Per-bin quantization-error covariances, shape (S, B, B) complex."""

    data: np.ndarray
    bins: tuple


@dataclass(frozen=True)
class FlatFadingAux:
    """Auxiliary flat-fading quantities (full lag materialization)."""

    p: np.ndarray  # (B,)
    c: np.ndarray  # (N,)
    v: np.ndarray  # (N, B, B)
    s: np.ndarray  # (N, B, B)
    r: np.ndarray  # (N, B, B)
    gamma: np.ndarray  # (B,)


def dirichlet_c(N: int, S: int) -> np.ndarray:
    """Real bin-sum kernel c[m] = 1 + 2 sum_{k=1}^{(S-1)/2} cos(2 pi m k / N)."""
    m = np.arange(N)
    half = (S - 1) // 2
    if half == 0:
        return np.ones(N)
    k = np.arange(1, half + 1)
    return 1.0 + 2.0 * np.cos(2.0 * np.pi * np.outer(m, k) / N).sum(axis=1)


def _channel_stack(channels: np.ndarray, S: int) -> np.ndarray:
    """Broadcast a flat (B, U) channel to the (S, B, U) per-bin family."""
    channels = np.asarray(channels)
    if channels.ndim == 2:
        return np.broadcast_to(channels, (S,) + channels.shape)
    if channels.ndim == 3 and channels.shape[0] == S:
        return channels
    raise ValueError(f"channels must be (B, U) or (S, B, U), got {channels.shape}")


def ry_rf(
    grid: DerivedGrid,
    channels: np.ndarray,
    E_s: float,
    N_0: float,
    f_c: float,
    f_s: float,
    n_lags: int | None = None,
) -> AutocovSequence:
    """Autocovariance of the sampled RF signal before quantization.

    R_y[m] = (1/N) Re{ sum_{k in bins} (E_s H_k H_k^H + N_0 I)
                       exp(j 2 pi (k/N + f_c/f_s) m) }.
    """
    N = grid.N
    if n_lags is None:
        n_lags = N
    H = _channel_stack(channels, grid.S)
    B = H.shape[1]
    M = E_s * np.einsum("sbu,scu->sbc", H, H.conj()) + N_0 * np.eye(B)
    k = np.asarray(grid.bin_set, dtype=float)
    m = np.arange(n_lags)
    phase = np.exp(2j * np.pi * np.outer(m, k / N + f_c / f_s))
    R = np.einsum("ms,sbc->mbc", phase, M).real / N
    return AutocovSequence(data=R, signal="y_rf")


def rq(ry: AutocovSequence, E_d: float) -> AutocovSequence:
    """Add the white dither variance E_d/2 at lag zero only."""
    if ry.signal != "y_rf":
        raise ValueError("rq expects the pre-dither RF autocovariance")
    data = ry.data.copy()
    data[0] += (E_d / 2.0) * np.eye(ry.B)
    return AutocovSequence(data=data, signal="q")


def bussgang_gain(Rq0: np.ndarray) -> BussgangGain:
    """G = sqrt(2/pi) diag(R_q[0])^{-1/2}."""
    d = np.diagonal(np.asarray(Rq0)).real
    if (d <= 0).any():
        raise SingularConfigurationError(
            "quantizer input has a nonpositive-power branch; "
            "need signal, noise, or dither on every AP"
        )
    return BussgangGain(g=SQRT_2_OVER_PI / np.sqrt(d))


def _clamped_arcsine_arg(x: np.ndarray) -> np.ndarray:
    over = np.abs(x) - 1.0
    if (over > ARCSINE_EPS).any():
        raise NumericalValidityError(
            f"normalized covariance exceeds 1 by {over.max():.3e}; "
            "analytic bound |s| <= 1 violated"
        )
    return np.clip(x, -1.0, 1.0)


def rz_arcsine(rq_seq: AutocovSequence) -> AutocovSequence:
    """Arcsine law: R_z[m] = (2/pi) arcsin(D^{-1/2} R_q[m] D^{-1/2})."""
    if rq_seq.signal != "q":
        raise ValueError("rz_arcsine expects the quantizer-input autocovariance")
    d = np.diagonal(rq_seq.data[0]).real
    if (d <= 0).any():
        raise SingularConfigurationError("zero-power branch in R_q[0]")
    inv_scale = 1.0 / np.sqrt(np.outer(d, d))
    normalized = rq_seq.data * inv_scale
    # the lag-0 diagonal is exactly 1 by construction; arcsin is square-root
    # sensitive there, so remove the d/sqrt(d)^2 roundoff before evaluating
    np.fill_diagonal(normalized[0], 1.0)
    normalized = _clamped_arcsine_arg(normalized)
    return AutocovSequence(data=(2.0 / np.pi) * np.arcsin(normalized), signal="z_rf")


def re_seq(
    rz: AutocovSequence, rq_seq: AutocovSequence, gain: BussgangGain
) -> AutocovSequence:
    """Quantization-error autocovariance R_e[m] = R_z[m] - G R_q[m] G."""
    gg = np.outer(gain.g, gain.g)
    return AutocovSequence(data=rz.data - gg * rq_seq.data, signal="e")


def ce_spectrum(
    re: AutocovSequence, grid: DerivedGrid, f_c: float, f_s: float
) -> QuantErrorSpectrum:
    """Per-bin covariance C_e,k = 2 sum_m R_e[m] exp(-j 2 pi (k/N + f_c/f_s) m).

    The carrier phase is folded into the lag sequence and the bin sum is a
    length-N DFT over m, evaluated for every k and then restricted to the
    occupied bins.
    """
    N = grid.N
    if re.n_lags != N:
        raise ValueError(f"need all {N} lags, got {re.n_lags}")
    m = np.arange(N)
    folded = re.data * np.exp(-2j * np.pi * (f_c / f_s) * m)[:, None, None]
    full = 2.0 * np.fft.fft(folded, axis=0)
    return QuantErrorSpectrum(data=full[list(grid.bin_set)], bins=grid.bin_set)


def check_ce_psd(spec: QuantErrorSpectrum) -> None:
    """Warn if any per-bin covariance has an eigenvalue below -1e-8 * trace."""
    for k, C in zip(spec.bins, spec.data):
        w = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
        floor = -1e-8 * max(np.trace(C).real, np.finfo(float).tiny)
        if w.min() < floor:
            warnings.warn(
                f"quantization-error covariance at bin {k} has eigenvalue "
                f"{w.min():.3e} below roundoff floor {floor:.3e}",
                stacklevel=2,
            )


# ---------------------------------------------------------------------------
# Frequency-flat fast path
# ---------------------------------------------------------------------------


def flat_p(H: np.ndarray, E_s: float, N_0: float, E_d: float, grid: DerivedGrid) -> np.ndarray:
    """Per-AP RMS quantizer input p_b = sqrt((S/N)(E_s |h_b|^2 + N_0) + E_d/2)."""
    row_pow = (np.abs(H) ** 2).sum(axis=1)
    return np.sqrt((grid.S / grid.N) * (E_s * row_pow + N_0) + E_d / 2.0)


def flat_gamma(H: np.ndarray, E_s: float, N_0: float, E_d: float, S: int) -> np.ndarray:
    """N-free domination envelope gamma_b = sqrt(S(E_s |h_b|^2 + N_0) + E_d/2)."""
    row_pow = (np.abs(H) ** 2).sum(axis=1)
    return np.sqrt(S * (E_s * row_pow + N_0) + E_d / 2.0)


def flat_aux(
    H: np.ndarray,
    E_s: float,
    N_0: float,
    E_d: float,
    grid: DerivedGrid,
    f_c: float,
    f_s: float,
) -> FlatFadingAux:
    """Materialize the flat-fading auxiliaries p, c, v, s, r for all N lags."""
    H = np.asarray(H)
    N, S = grid.N, grid.S
    B = H.shape[0]
    M = E_s * (H @ H.conj().T) + N_0 * np.eye(B)
    p = flat_p(H, E_s, N_0, E_d, grid)
    c = dirichlet_c(N, S)
    theta = 2.0 * np.pi * (f_c / f_s)
    m = np.arange(N)
    v = (
        np.cos(theta * m)[:, None, None] * M.real
        - np.sin(theta * m)[:, None, None] * M.imag
    )
    s = (c / N)[:, None, None] * v / np.outer(p, p)
    s[0] += (E_d / 2.0) * np.eye(B) / np.outer(p, p)
    s = _clamped_arcsine_arg(s)
    r = np.arcsin(s) - s
    gamma = flat_gamma(H, E_s, N_0, E_d, S)
    return FlatFadingAux(p=p, c=c, v=v, s=s, r=r, gamma=gamma)


def flat_bussgang_gain(p: np.ndarray) -> BussgangGain:
    """Flat-fading closed form [G]_bb = sqrt(2/pi) / p_b."""
    return BussgangGain(g=SQRT_2_OVER_PI / p)


def flat_ce_entry(
    aux: FlatFadingAux, k: int, grid: DerivedGrid, f_c: float, f_s: float
) -> np.ndarray:
    """C_e,k from the flat auxiliaries: (4/pi) sum_m r[m] exp(-j 2 pi (k/N + f_c/f_s) m)."""
    m = np.arange(grid.N)
    phase = np.exp(-2j * np.pi * (k / grid.N + f_c / f_s) * m)
    return (4.0 / np.pi) * np.einsum("m,mbc->bc", phase, aux.r)


def flat_quant_sums(
    H: np.ndarray,
    E_s: float,
    N_0: float,
    E_d: float,
    grid: DerivedGrid,
    f_c: float,
    f_s: float,
    lag_tol: float | None = None,
    chunk: int = 4096,
):
    """Per-bin lag sums Y_k = sum_m r[m] exp(-j 2 pi (k/N + f_c/f_s) m).

    Returns (Y, p) with Y of shape (S, B, B).  From these,
    C_e,k = (4/pi) Y_k and G^{-1} C_e,k G^{-1} = 2 (p p^T) * Y_k.

    When lag_tol is set, lags whose worst-case contribution to
    G^{-1} C_e,k G^{-1} is below lag_tol*(N_0+E_d)/N are skipped; the total
    truncation error in any entry is then below lag_tol*(N_0+E_d).  Since the
    noise-plus-dither EVM term carries the same (N_0+E_d) weight through the
    same combiner, this caps the relative squared-EVM error at about lag_tol.
    r[m] is cubic in the small normalized covariance, so mid-range lags are
    negligible and the active set shrinks as N grows.
    """
    H = np.asarray(H)
    N, S = grid.N, grid.S
    B = H.shape[0]
    M = E_s * (H @ H.conj().T) + N_0 * np.eye(B)
    p = flat_p(H, E_s, N_0, E_d, grid)
    pp = np.outer(p, p)
    c = dirichlet_c(N, S)
    theta = 2.0 * np.pi * (f_c / f_s)

    if lag_tol is not None:
        s_bound = np.minimum(np.abs(c) / N * np.abs(M).max() / (p.min() ** 2), 1.0)
        r_bound = np.arcsin(s_bound) - s_bound
        keep = 2.0 * (p.max() ** 2) * r_bound > lag_tol * (N_0 + E_d) / N
        keep[0] = True
        # series fast path: where |s| is certified small, arcsin(s) - s is a
        # short odd polynomial in s[m] = a[m] P - b[m] Q with fixed matrices
        # P, Q, so the lag sum reduces to scalar monomial sums (relative
        # error < 1e-5 at the 0.2 cutoff); lag_tol=None keeps the exact path
        series = keep & (s_bound <= _SERIES_CUT) & (np.arange(N) > 0)
    else:
        keep = np.ones(N, dtype=bool)
        series = np.zeros(N, dtype=bool)
    ms = np.nonzero(keep & ~series)[0]

    k = np.asarray(grid.bin_set, dtype=float)
    Y = np.zeros((S, B, B), dtype=complex)
    eye = np.eye(B)
    for start in range(0, ms.size, chunk):
        mc = ms[start : start + chunk]
        v = (
            np.cos(theta * mc)[:, None, None] * M.real
            - np.sin(theta * mc)[:, None, None] * M.imag
        )
        s = (c[mc] / N)[:, None, None] * v / pp
        if mc[0] == 0:
            s[0] += (E_d / 2.0) * eye / pp
        s = _clamped_arcsine_arg(s)
        r = np.arcsin(s) - s
        ang = 2.0 * np.pi * np.outer(mc, k / N + f_c / f_s)
        # two real tensordots instead of one complex einsum (r stays float)
        Y += np.tensordot(np.cos(ang), r, axes=(0, 0))
        Y -= 1j * np.tensordot(np.sin(ang), r, axes=(0, 0))
    if series.any():
        Y += _series_lag_sums(
            series, c, N, theta, M.real / pp, M.imag / pp, k, f_c / f_s
        )
    return Y, p


_SERIES_CUT = 0.2
# odd-series coefficients of arcsin(x) - x: x^3, x^5, x^7
_SERIES_COEF = (1.0 / 6.0, 3.0 / 40.0, 15.0 / 336.0)


def _series_lag_sums(mask, c, N, theta, P, Q, k, carrier_ratio):
    """Sum of (arcsin(s) - s)[m] e^{-j phi_k m} over the masked lags, using the
    cubic/quintic/septic series of the arcsine with s[m] = a[m] P - b[m] Q,
    a = (c/N) cos(theta m), b = (c/N) sin(theta m).

    Expanding each odd power binomially turns the lag dependence into scalar
    monomials a^i b^j, so only their phased sums touch all N lags; the B x B
    structure enters through fixed elementwise products of P and Q.
    """
    m = np.nonzero(mask)[0]
    rho = c[m] / N
    a = rho * np.cos(theta * m)
    b = rho * np.sin(theta * m)
    phase = np.exp(-2j * np.pi * np.outer(m, k / N + carrier_ratio))  # (n, S)
    S = k.size
    B = P.shape[0]
    out = np.zeros((S, B, B), dtype=complex)
    for order, coef in zip((3, 5, 7), _SERIES_COEF):
        for i in range(order + 1):
            mono = (a ** (order - i)) * ((-b) ** i)  # (n,)
            T = phase.T @ mono  # (S,)
            mat = (P ** (order - i)) * (Q**i)  # elementwise
            out += coef * math.comb(order, i) * T[:, None, None] * mat
    return out
