"""AP/UE geometry, path loss, and Rayleigh channel generation.

Distances are 3-D Euclidean (AP height minus UE height included), so with
the default 10 m AP height the d < d_0 clamp never triggers in practice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .params import ConfigError

PATHLOSS_EXPONENT_DB = 37.6
PATHLOSS_OFFSET_DB = 35.3
D_REF = 1.0  # m


@dataclass(frozen=True)
class Topology:
    """AP and UE positions (meters) inside an L_r x W_r rectangle."""

    L_r: float
    W_r: float
    ap_positions: np.ndarray  # (B, 3)
    ue_positions: np.ndarray  # (U, 3)

    def __post_init__(self):
        for pos in (self.ap_positions, self.ue_positions):
            if pos.ndim != 2 or pos.shape[1] != 3:
                raise ConfigError("positions must be (n, 3) arrays")
            if (
                (pos[:, 0] < -1e-9).any()
                or (pos[:, 0] > self.L_r + 1e-9).any()
                or (pos[:, 1] < -1e-9).any()
                or (pos[:, 1] > self.W_r + 1e-9).any()
            ):
                raise ConfigError("positions outside the coverage rectangle")
            pos.setflags(write=False)

    @property
    def B(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def U(self) -> int:
        return self.ue_positions.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "L_r": self.L_r,
                "W_r": self.W_r,
                "ap_positions": self.ap_positions.tolist(),
                "ue_positions": self.ue_positions.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        d = json.loads(text)
        return cls(
            L_r=d["L_r"],
            W_r=d["W_r"],
            ap_positions=np.asarray(d["ap_positions"], dtype=float),
            ue_positions=np.asarray(d["ue_positions"], dtype=float),
        )


def place_aps_grid(B: int, L_r: float, W_r: float, ap_height: float = 10.0) -> np.ndarray:
    """Uniform A x A grid of cell-center AP positions, B = A**2 with A even."""
    A = round(B ** 0.5)
    if A * A != B:
        raise ConfigError(f"B = {B} is not a perfect square")
    if A % 2 != 0:
        raise ConfigError(f"grid placement needs an even root, got A = {A}")
    xs = (np.arange(A) + 0.5) * L_r / A
    ys = (np.arange(A) + 0.5) * W_r / A
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pos = np.column_stack([gx.ravel(), gy.ravel(), np.full(B, ap_height)])
    return pos


def place_ues(
    U: int,
    L_r: float,
    W_r: float,
    mode: str = "center",
    rng: np.random.Generator | None = None,
    ue_height: float = 0.0,
) -> np.ndarray:
    """UE positions: single center UE, a square sub-grid, or uniform random drops.

    The grid mode puts UEs at the cell centers of a sqrt(U) x sqrt(U)
    partition of the rectangle (for U=4: the four quarter centers).  The
    exact grid coordinates are a layout default, not a calibrated value.
    """
    if mode == "center":
        if U != 1:
            raise ConfigError("center placement requires U = 1")
        return np.array([[L_r / 2.0, W_r / 2.0, ue_height]])
    if mode == "grid":
        A = round(U ** 0.5)
        if A * A != U:
            raise ConfigError(f"grid placement needs a perfect-square U, got {U}")
        xs = (np.arange(A) + 0.5) * L_r / A
        ys = (np.arange(A) + 0.5) * W_r / A
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel(), np.full(U, ue_height)])
    if mode == "uniform_random":
        if rng is None:
            raise ConfigError("uniform_random placement requires an RNG")
        xy = rng.uniform([0.0, 0.0], [L_r, W_r], size=(U, 2))
        return np.column_stack([xy, np.full(U, ue_height)])
    raise ConfigError(f"unknown UE placement mode {mode!r}")


def pathloss_gain_db(d: np.ndarray) -> np.ndarray:
    """Distance-based power gain in dB; d below the 1 m reference is clamped."""
    d = np.maximum(np.asarray(d, dtype=float), D_REF)
    return -PATHLOSS_EXPONENT_DB * np.log10(d / D_REF) - PATHLOSS_OFFSET_DB


def path_loss(topology: Topology) -> np.ndarray:
    """Linear power gains, shape (B, U)."""
    diff = topology.ap_positions[:, None, :] - topology.ue_positions[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    return 10.0 ** (pathloss_gain_db(d) / 10.0)


def draw_channel(gains: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One CN(0, gains) realization H of shape (B, U), entries independent."""
    gains = np.asarray(gains, dtype=float)
    scale = np.sqrt(gains / 2.0)
    return scale * (rng.standard_normal(gains.shape) + 1j * rng.standard_normal(gains.shape))


def rayleigh_source(gains: np.ndarray):
    """Channel-draw source: closure mapping an RNG to one realization."""

    def draw(rng: np.random.Generator) -> np.ndarray:
        return draw_channel(gains, rng)

    return draw
