"""Large-oversampling EVM limits and supporting numeric diagnostics.

As the oversampling ratio grows (fixed S), the per-sample quantizer input is
dominated by the dither, the Bussgang gain tends to sqrt(4/(pi E_d)), and the
quantization-error covariance whitens to 2(1 - 2/pi) I.  Substituting those
limits collapses the EVM to closed forms in which quantization acts as extra
AWGN of energy (pi/2 - 1) E_d, i.e. an effective noise N_0 + (pi/2) E_d
replacing N_0 + E_d.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import bussgang
from .params import ConfigError, grid_from_osr

_HALF_PI_M1 = math.pi / 2.0 - 1.0


@dataclass(frozen=True)
class AsymptoticEvm:
    eta_sq: float
    stderr: float
    n_trials: int
    n_discarded: int = 0

    @property
    def eta(self) -> float:
        return math.sqrt(self.eta_sq)


@dataclass(frozen=True)
class MatrixLimits:
    g: float  # limiting per-AP Bussgang gain
    ce_diag: float  # limiting white quantization-error variance


@dataclass(frozen=True)
class LagSumCheck:
    """Per-grid-size diagnostics for the vanishing-off-lag argument."""

    N: int
    r0_offdiag_max: float  # max |r_bb'[0]|, b != b'
    tail_sum_max: float  # max over (b, b') of sum_{m>=1} |r_bb'[m]|
    tail_bound_max: float  # analytic envelope for the same quantity
    r_cap: float  # uniform cap pi/2 - 1


@dataclass(frozen=True)
class DominationDiagnostics:
    """Dither-domination bounds for one channel draw (single UE)."""

    t: np.ndarray  # (B, B) lag-0 bound
    t_bar: np.ndarray  # (B, B) tail bound
    gamma: np.ndarray  # (B,)
    gamma_bar: float
    r0_check: np.ndarray  # |p_b p_b' r_bb'[0]| - t  (should be <= 0)
    tail_check: np.ndarray  # |sum_{m>=1} ...| - t_bar  (should be <= 0)


def matrix_limits(E_d: float) -> MatrixLimits:
    """Limiting Bussgang gain and white error floor for dither energy E_d."""
    if E_d <= 0:
        raise ConfigError("the large-oversampling limits require E_d > 0")
    return MatrixLimits(
        g=math.sqrt(4.0 / (math.pi * E_d)),
        ce_diag=2.0 * (1.0 - 2.0 / math.pi),
    )


def _mc(samples, discarded) -> AsymptoticEvm:
    arr = np.asarray(samples, dtype=float)
    n = arr.size
    if n == 0:
        raise ConfigError("all channel draws were degenerate")
    stderr = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return AsymptoticEvm(float(arr.mean()), stderr, n, discarded)


def evm_mrzf_asymptotic(
    E_s: float, N_0: float, E_d: float, channel_source, n_trials: int, rng
) -> AsymptoticEvm:
    """Limiting squared EVM of MR and ZF for a single UE.

    eta^2 -> (N_0 + (pi/2) E_d)/E_s * E[1/||h||^2].  For B = 1 Rayleigh
    fading this expectation diverges; a warning flags that regime.
    """
    samples, discarded = [], 0
    warned = False
    for _ in range(n_trials):
        h = np.asarray(channel_source(rng)).reshape(-1)
        if h.size == 1 and not warned:
            warnings.warn(
                "E[1/|h|^2] diverges for single-antenna Rayleigh fading; "
                "the Monte-Carlo mean will not stabilize",
                stacklevel=2,
            )
            warned = True
        nrm = float((np.abs(h) ** 2).sum())
        if nrm == 0.0:
            discarded += 1
            continue
        samples.append((N_0 + (math.pi / 2.0) * E_d) / (E_s * nrm))
    return _mc(samples, discarded)


def evm_lmmse_asymptotic(
    E_s: float, N_0: float, E_d: float, channel_source, n_trials: int, rng
) -> AsymptoticEvm:
    """Limiting squared EVM of LMMSE for a single UE:
    E[(1 + E_s ||h||^2 / (N_0 + (pi/2) E_d))^{-1}]."""
    samples = []
    for _ in range(n_trials):
        h = np.asarray(channel_source(rng)).reshape(-1)
        nrm = float((np.abs(h) ** 2).sum())
        samples.append(1.0 / (1.0 + E_s * nrm / (N_0 + (math.pi / 2.0) * E_d)))
    return _mc(samples, 0)


def multiuser_asymptotic_evm(
    kind: str, E_s: float, N_0: float, E_d: float, channel_source, n_trials: int, rng
) -> AsymptoticEvm:
    """Limiting squared EVM for any U, by the effective-noise substitution.

    With N_eff = N_0 + (pi/2) E_d (E_d = 0 gives the unquantized reference):
      mr:    (E_s tr(B B^H) + N_eff tr(E E^H)) / (E_s U)
      zf:    (N_eff / (E_s U)) tr((H^H H)^{-1})
      lmmse: (1/U) tr((I + (E_s/N_eff) H^H H)^{-1})
    """
    n_eff = N_0 + (math.pi / 2.0) * E_d
    samples, discarded = [], 0
    for _ in range(n_trials):
        H = np.asarray(channel_source(rng))
        U = H.shape[1]
        HhH = H.conj().T @ H
        d = np.diagonal(HhH).real
        if (d <= 0).any():
            discarded += 1
            continue
        if kind == "mr":
            E = H.conj().T / d[:, None]
            Bmat = (HhH - np.diag(np.diagonal(HhH))) / d[:, None]
            val = (
                E_s * float((np.abs(Bmat) ** 2).sum())
                + n_eff * float((np.abs(E) ** 2).sum())
            ) / (E_s * U)
        elif kind == "zf":
            try:
                val = n_eff / (E_s * U) * float(np.trace(np.linalg.inv(HhH)).real)
            except np.linalg.LinAlgError:
                discarded += 1
                continue
        elif kind == "lmmse":
            val = float(
                np.trace(np.linalg.inv(np.eye(U) + (E_s / n_eff) * HhH)).real
            ) / U
        else:
            raise ValueError(f"unknown combiner kind {kind!r}")
        samples.append(val)
    return _mc(samples, discarded)


# ---------------------------------------------------------------------------
# Numeric support for the limit arguments
# ---------------------------------------------------------------------------


def _f_arcsine(x):
    return np.arcsin(x) - x


def lemma1_numeric_check(
    H: np.ndarray,
    E_s: float,
    N_0: float,
    E_d: float,
    S: int,
    osr_list,
    fc_over_w: float,
) -> list[LagSumCheck]:
    """Check, for a ladder of oversampling ratios, that the nonzero-lag error
    correlations vanish as claimed.

    For each O the full lag sequence r[m] is materialized; the reported tail
    bound is N * f(min(1, 2 S (E_s ||h_b|| ||h_b'|| + N_0) / (N E_d))) with
    f(x) = arcsin(x) - x.  E_d must be positive for the bound to be finite.
    """
    if E_d <= 0:
        raise ConfigError("the tail bound requires E_d > 0")
    H = np.asarray(H)
    row_norm = np.sqrt((np.abs(H) ** 2).sum(axis=1))
    out = []
    for O in osr_list:
        grid = grid_from_osr(S, int(O))
        N = grid.N
        f_c = fc_over_w  # W normalized to 1
        f_s = float(O)
        aux = bussgang.flat_aux(H, E_s, N_0, E_d, grid, f_c, f_s)
        absr = np.abs(aux.r)
        off = ~np.eye(H.shape[0], dtype=bool)
        r0_off = float(absr[0][off].max()) if off.any() else 0.0
        tail = absr[1:].sum(axis=0)
        x = np.minimum(
            1.0, 2.0 * S * (E_s * np.outer(row_norm, row_norm) + N_0) / (N * E_d)
        )
        bound = N * _f_arcsine(x)
        out.append(
            LagSumCheck(
                N=N,
                r0_offdiag_max=r0_off,
                tail_sum_max=float(tail.max()),
                tail_bound_max=float(bound.max()),
                r_cap=_HALF_PI_M1,
            )
        )
    return out


def whitening_margin(
    H: np.ndarray, E_s: float, N_0: float, E_d: float, S: int, N: int
) -> np.ndarray:
    """Per-AP ratio of dither power to signal-plus-noise power at the quantizer:
    (E_d / 2 N_0) / ((S/N)((E_s/N_0)|h_b|^2 + 1)).  Large values mean the
    white-error limit is a good approximation."""
    row_pow = (np.abs(np.asarray(H)) ** 2).sum(axis=1)
    return (E_d / (2.0 * N_0)) / ((S / N) * ((E_s / N_0) * row_pow + 1.0))


def domination_diagnostics(
    h: np.ndarray,
    E_s: float,
    N_0: float,
    E_d: float,
    grid,
    f_c: float,
    f_s: float,
) -> DominationDiagnostics:
    """Evaluate the dither-domination bounds for one single-UE channel draw.

    t bounds the lag-0 off-diagonal term |p_b p_b' r_bb'[0]| and t_bar the
    carrier-modulated tail |sum_{m>=1} p_b p_b' r_bb'[m] c[m] e^{-j theta m}|;
    gamma_bar is the resulting uniform effective-channel-gain floor.
    """
    if E_d <= 0:
        raise ConfigError("the domination bounds require E_d > 0")
    h = np.asarray(h).reshape(-1, 1)
    absh = np.abs(h[:, 0])
    S, N = grid.S, grid.N
    aux = bussgang.flat_aux(h, E_s, N_0, E_d, grid, f_c, f_s)
    p, gamma = aux.p, aux.gamma
    pp = np.outer(p, p)
    t = _HALF_PI_M1 * np.outer(gamma, gamma)
    t_bar = (
        _HALF_PI_M1
        * S
        * np.outer(gamma, gamma)
        * (2.0 * S * E_s * np.outer(absh, absh) + N_0)
        / E_d
    )
    theta = 2.0 * np.pi * (f_c / f_s)
    m = np.arange(1, N)
    phase = np.exp(-1j * theta * m)
    tail = np.einsum(
        "m,mbc->bc", phase * aux.c[1:], pp[None, :, :] * aux.r[1:]
    )
    r0_check = np.abs(pp * aux.r[0]) - t
    tail_check = np.abs(tail) - t_bar
    hnorm_sq = float((absh**2).sum())
    denom = (
        _HALF_PI_M1 * float((gamma**2).sum())
        + (2.0 / E_s) * float(t.sum())
        + (2.0 / (E_s * S)) * float(t_bar.sum())
    )
    gamma_bar = hnorm_sq / denom
    return DominationDiagnostics(
        t=t,
        t_bar=t_bar,
        gamma=gamma,
        gamma_bar=gamma_bar,
        r0_check=r0_check,
        tail_check=tail_check,
    )
