"""System parameters, derived sampling grid, and rate/energy budgeting.

All energies and powers are kept in linear units internally.  dBm/dB values
only appear at the CLI/config boundary (see :mod:`onebit_dmimo.experiments`).

Unit convention: the noise level ``N_0`` and the normalized energy per sample
``Ebar_s`` live on the same linear per-sample scale, i.e. a noise power of
-94 dBm is converted directly to ``N_0 = 10**(-9.4)`` mW.  Absolute EVM
levels depend on this choice; all ratio- and ordering-based results do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid or inconsistent system configuration."""


class FronthaulBudgetError(ConfigError):
    """Fronthaul rate too small to give each AP at least one sample per symbol."""


def db_to_lin(x_db):
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x):
    return 10.0 * math.log10(x)


def dbm_to_mw(x_dbm):
    return 10.0 ** (x_dbm / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Scalar parameters of one simulated configuration.

    f_c, W, f_s in Hz; Ebar_s, E_d, N_0 in linear energy units on a common
    scale.  The dither per-sample variance is E_d/2.
    """

    f_c: float
    W: float
    f_s: float
    S: int
    B: int
    U: int
    Ebar_s: float
    E_d: float
    N_0: float

    def __post_init__(self):
        if self.S <= 0 or self.S % 2 == 0:
            raise ConfigError(f"S must be a positive odd integer, got {self.S}")
        if self.B < 1 or self.U < 1:
            raise ConfigError("B and U must be positive integers")
        ratio = self.f_c / self.W
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"f_c/W must be an integer, got {ratio}")
        if self.f_s <= self.W:
            raise ConfigError("f_s must exceed the signal bandwidth W")
        if self.Ebar_s <= 0 or self.N_0 <= 0 or self.E_d < 0:
            raise ConfigError("require Ebar_s > 0, N_0 > 0, E_d >= 0")

    @property
    def E_s(self) -> float:
        """Per-UE energy per sample under the energy-efficient normalization."""
        return energy_per_sample(self.Ebar_s, self.B)

    @property
    def osr(self) -> int:
        """Temporal oversampling ratio O = f_s/W (must be integral)."""
        o = self.f_s / self.W
        o_int = round(o)
        if abs(o - o_int) > 1e-6 * max(1.0, o):
            raise ConfigError(f"f_s/W = {o} is not integral")
        return int(o_int)

    @property
    def carrier_ratio(self) -> float:
        return self.f_c / self.f_s


@dataclass(frozen=True)
class DerivedGrid:
    """Discrete observation grid: N samples, S occupied bins, index set."""

    N: int
    O: int
    S: int
    bin_set: tuple = field(repr=False)
    T: float

    def __post_init__(self):
        if self.N != self.O * self.S:
            raise ConfigError("N must equal O*S")
        if len(self.bin_set) != self.S:
            raise ConfigError("bin_set size must equal S")


@dataclass(frozen=True)
class BandpassVerdict:
    valid: bool
    ell: int | None = None


def validate_bandpass_sampling(f_c: float, W: float, f_s: float) -> BandpassVerdict:
    """Check whether f_s admits alias-free bandpass sampling of the RF signal.

    Scans the candidate band indices ell = 1 .. floor((f_c + W/2)/W) and
    returns the smallest ell for which
        (2 f_c + W)/ell <= f_s <= (2 f_c - W)/(ell - 1)
    holds (the upper constraint is vacuous at ell = 1).
    """
    ell_max = math.floor((f_c + W / 2.0) / W)
    for ell in range(1, ell_max + 1):
        lo = (2.0 * f_c + W) / ell
        if f_s < lo:
            continue
        if ell == 1 or f_s <= (2.0 * f_c - W) / (ell - 1):
            return BandpassVerdict(True, ell)
    return BandpassVerdict(False, None)


def fronthaul_to_osr(R_fh: float, B: int, W: float) -> int:
    """Largest integral OSR O with B*O*W <= R_fh.

    Non-integral budgets floor, so the stated fronthaul rate is never
    exceeded.
    """
    if R_fh < B * W:
        raise FronthaulBudgetError(
            f"fronthaul budget {R_fh} bit/s below minimum {B * W} (B*W)"
        )
    return int(math.floor(R_fh / (B * W) + 1e-9))


def energy_per_sample(Ebar_s: float, B: int) -> float:
    """Per-UE energy per sample, scaled down with AP count: E_s = Ebar_s/B."""
    if B < 1:
        raise ConfigError("B must be >= 1")
    return Ebar_s / B


def build_bin_set(N: int, S: int) -> tuple:
    """Occupied DFT bins: {0..(S-1)/2} and {N-(S-1)/2 .. N-1}."""
    half = (S - 1) // 2
    return tuple(range(half + 1)) + tuple(range(N - half, N))


def build_grid(p: SystemParams) -> DerivedGrid:
    """Derive (N, O, bin_set, T) from the system parameters."""
    O = p.osr
    return grid_from_osr(p.S, O, p.f_s)


def grid_from_osr(S: int, O: int, f_s: float | None = None) -> DerivedGrid:
    if O < 1:
        raise ConfigError("OSR must be >= 1")
    N = O * S
    T = N / f_s if f_s is not None else float("nan")
    return DerivedGrid(N=N, O=O, S=S, bin_set=build_bin_set(N, S), T=T)


def make_params(
    *,
    f_c: float,
    W: float,
    S: int,
    B: int,
    U: int,
    Ebar_s: float,
    E_d: float,
    N_0: float,
    R_fh: float | None = None,
    osr: int | None = None,
    f_s: float | None = None,
) -> SystemParams:
    """Build SystemParams with f_s derived from a fronthaul budget or OSR.

    Exactly one of R_fh, osr, f_s must be given.  Sweep experiments
    parameterize by R_fh; standalone validation may pass f_s directly.
    """
    given = sum(x is not None for x in (R_fh, osr, f_s))
    if given != 1:
        raise ConfigError("specify exactly one of R_fh, osr, f_s")
    if R_fh is not None:
        osr = fronthaul_to_osr(R_fh, B, W)
    if osr is not None:
        f_s = osr * W
    return SystemParams(
        f_c=f_c, W=W, f_s=f_s, S=S, B=B, U=U, Ebar_s=Ebar_s, E_d=E_d, N_0=N_0
    )
