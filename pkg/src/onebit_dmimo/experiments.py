"""Experiment sweeps (dither, fronthaul, availability, pilots) and CSV output.

Determinism contract: every record is a pure function of (spec, seed).  Each
independent sweep cell derives its RNG from a SeedSequence spawned from the
spec seed and a stable cell key, and channel draws are seeded by the keys
they must be shared across (common random numbers), so results do not depend
on worker scheduling.  Rows are sorted before writing.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics, channel, combiners
from .params import (
    ConfigError,
    build_grid,
    dbm_to_mw,
    make_params,
    validate_bandpass_sampling,
)

PRESETS = {
    "paper-v": {
        "L_r": 100.0,
        "W_r": 100.0,
        "ap_height": 10.0,
        "ue_height": 0.0,
        "f_c": 2.4e9,
        "W": 24e6,
        "S": 9,
        "noise_dbm": -94.0,
        "Ebar_s_dbm": 20.0,
    }
}

DEFAULT_DITHER_GRID_DB = tuple(range(-20, 21))
DEFAULT_EVM_THRESHOLD = 0.125  # 16-QAM EVM requirement


@dataclass(frozen=True)
class SweepSpec:
    """One experiment run: what to sweep, over which scenario, how many trials."""

    kind: str  # dither | fronthaul | availability | pilots
    values: tuple  # swept axis: E_d/N_0 dB | R_fh | R_fh | pilot counts
    preset: str = "paper-v"
    overrides: dict = field(default_factory=dict)
    combiners: tuple = ("mr", "zf", "lmmse")
    B_list: tuple = (4,)
    U: int = 1
    R_fh: float | None = None  # fixed fronthaul rate (dither/pilot sweeps)
    dither_grid_db: tuple = DEFAULT_DITHER_GRID_DB
    pilot_dither_grid_db: tuple = tuple(range(-5, 26, 5))
    data_dither_db: float = -3.0  # data-phase E_d/N_0 for pilot sweeps
    threshold: float = DEFAULT_EVM_THRESHOLD
    n_trials: int = 100
    n_drops: int = 1000
    seed: int = 0
    lag_tol: float | None = 1e-4  # relative eta^2 truncation error bound

    def __post_init__(self):
        if self.kind not in ("dither", "fronthaul", "availability", "pilots"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        vals = tuple(self.values)
        if len(vals) == 0:
            raise ConfigError("swept values must be nonempty")
        if any(b >= a for b, a in zip(vals, vals[1:])):
            raise ConfigError("swept values must be strictly increasing")
        if self.kind in ("dither", "pilots") and self.R_fh is None:
            raise ConfigError(f"{self.kind} sweep requires a fixed R_fh")
        bad = [c for c in self.combiners if c not in ("mr", "zf", "lmmse")]
        if bad:
            raise ConfigError(f"unknown combiner kinds {bad}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")

    def scenario(self) -> dict:
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        sc = dict(PRESETS[self.preset])
        sc.update(self.overrides)
        return sc


def spec_from_dict(d: dict) -> SweepSpec:
    """Build a SweepSpec from a parsed config mapping (YAML/JSON-friendly)."""
    d = dict(d)

    def num(x):
        # PyYAML (YAML 1.1) parses exponents without a sign, like 43.2e9,
        # as strings; accept them as numbers
        return float(x) if isinstance(x, str) else x

    for key in ("values", "dither_grid_db", "pilot_dither_grid_db"):
        if key in d:
            d[key] = tuple(num(v) for v in d[key])
    for key in ("combiners", "B_list"):
        if key in d:
            d[key] = tuple(d[key])
    for key in ("R_fh", "threshold", "data_dither_db"):
        if d.get(key) is not None:
            try:
                d[key] = num(d[key])
            except ValueError as exc:
                raise ConfigError(f"non-numeric value for {key}: {d[key]!r}") from exc
    known = {f.name for f in dataclasses.fields(SweepSpec)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return SweepSpec(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def spec_hash(spec: SweepSpec) -> str:
    blob = json.dumps(dataclasses.asdict(spec), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Scenario plumbing
# ---------------------------------------------------------------------------


def _scenario_energies(sc: dict) -> tuple[float, float]:
    return dbm_to_mw(sc["Ebar_s_dbm"]), dbm_to_mw(sc["noise_dbm"])


def _gains(sc: dict, B: int, U: int, ue_positions: np.ndarray | None = None) -> np.ndarray:
    aps = channel.place_aps_grid(B, sc["L_r"], sc["W_r"], sc["ap_height"])
    if ue_positions is None:
        mode = "center" if U == 1 else "grid"
        ues = channel.place_ues(U, sc["L_r"], sc["W_r"], mode, ue_height=sc["ue_height"])
    else:
        ues = ue_positions
    topo = channel.Topology(sc["L_r"], sc["W_r"], aps, ues)
    return channel.path_loss(topo)


def _params(sc: dict, B: int, U: int, R_fh: float, ed_over_n0_db: float):
    Ebar_s, N_0 = _scenario_energies(sc)
    p = make_params(
        f_c=sc["f_c"], W=sc["W"], S=sc["S"], B=B, U=U,
        Ebar_s=Ebar_s, E_d=N_0 * 10.0 ** (ed_over_n0_db / 10.0), N_0=N_0,
        R_fh=R_fh,
    )
    verdict = validate_bandpass_sampling(p.f_c, p.W, p.f_s)
    if not verdict.valid:
        raise ConfigError(
            f"f_s = {p.f_s:g} Hz does not admit alias-free bandpass sampling "
            f"of the band around {p.f_c:g} Hz"
        )
    return p


def _fading_draws(gains: np.ndarray, n: int, seed_key: tuple) -> list:
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_key)))
    return [channel.draw_channel(gains, rng) for _ in range(n)]


def _eta_pct(eta_sq: float) -> float:
    return 100.0 * math.sqrt(eta_sq)


# ---------------------------------------------------------------------------
# Sweep cells (each cell is an independent, deterministic unit of work)
# ---------------------------------------------------------------------------


def _cells(spec: SweepSpec) -> list:
    if spec.kind == "dither":
        return [("dither", b) for b in spec.B_list]
    if spec.kind == "fronthaul":
        return [("fronthaul", b, r) for b in spec.B_list for r in spec.values]
    if spec.kind == "availability":
        return [("availability", b, r) for b in spec.B_list for r in spec.values] + [
            ("colocated",)
        ]
    if spec.kind == "pilots":
        return [("pilots", int(n)) for n in spec.values]
    raise ConfigError(spec.kind)


def _run_cell(spec: SweepSpec, cell: tuple) -> list:
    kind = cell[0]
    if kind == "dither":
        return _dither_cell(spec, cell[1])
    if kind == "fronthaul":
        return _fronthaul_cell(spec, cell[1], cell[2])
    if kind == "availability":
        return _availability_cell(spec, cell[1], cell[2])
    if kind == "colocated":
        return _colocated_cell(spec)
    if kind == "pilots":
        return _pilot_cell(spec, cell[1])
    raise ConfigError(kind)


def _dither_cell(spec: SweepSpec, B: int) -> list:
    sc = spec.scenario()
    gains = _gains(sc, B, spec.U)
    draws = _fading_draws(gains, spec.n_trials, (spec.seed, 1, B))
    source = _list_source(draws)
    records = []
    for ed_db in spec.values:
        p = _params(sc, B, spec.U, spec.R_fh, ed_db)
        grid = build_grid(p)
        for comb in spec.combiners:
            res = combiners.evm_for_draws(comb, p, grid, draws, spec.lag_tol)
            asym = asymptotics.multiuser_asymptotic_evm(
                comb, p.E_s, p.N_0, p.E_d, source, len(draws),
                np.random.default_rng(0),
            )
            records.append(
                {
                    "b": B,
                    "combiner": comb,
                    "r_fh_bit_s": spec.R_fh,
                    "osr": grid.O,
                    "ed_over_n0_db": float(ed_db),
                    "eta_pct": _eta_pct(res.eta_sq),
                    "eta_stderr_pct": _stderr_pct(res),
                    "eta_asymptotic_pct": _eta_pct(asym.eta_sq),
                    "n_trials": res.n_trials,
                }
            )
    return records


def _list_source(draws):
    it = {"i": 0}

    def src(_rng):
        H = draws[it["i"] % len(draws)]
        it["i"] += 1
        return H

    return src


def _stderr_pct(res) -> float:
    # delta method: d(eta)/d(eta_sq) = 1/(2 eta)
    if res.eta_sq <= 0 or not math.isfinite(res.stderr):
        return float("nan")
    return 100.0 * res.stderr / (2.0 * math.sqrt(res.eta_sq))


def _fronthaul_cell(spec: SweepSpec, B: int, R_fh: float) -> list:
    sc = spec.scenario()
    gains = _gains(sc, B, spec.U)
    draws = _fading_draws(gains, spec.n_trials, (spec.seed, 1, B))
    source = _list_source(draws)
    records = []
    for comb in spec.combiners:
        best = None
        for ed_db in spec.dither_grid_db:
            p = _params(sc, B, spec.U, R_fh, ed_db)
            grid = build_grid(p)
            res = combiners.evm_for_draws(comb, p, grid, draws, spec.lag_tol)
            if best is None or res.eta_sq < best[0].eta_sq:
                best = (res, float(ed_db), p, grid)
        res, ed_db, p, grid = best
        asym = asymptotics.multiuser_asymptotic_evm(
            comb, p.E_s, p.N_0, p.E_d, source, len(draws), np.random.default_rng(0)
        )
        records.append(
            {
                "b": B,
                "combiner": comb,
                "r_fh_bit_s": float(R_fh),
                "osr": grid.O,
                "opt_ed_over_n0_db": ed_db,
                "eta_pct": _eta_pct(res.eta_sq),
                "eta_stderr_pct": _stderr_pct(res),
                "eta_asymptotic_pct": _eta_pct(asym.eta_sq),
                "n_trials": res.n_trials,
            }
        )
    return records


def _drops(spec: SweepSpec, sc: dict) -> list:
    """UE positions and fading seeds shared by every (B, R_fh) cell."""
    out = []
    for i in range(spec.n_drops):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2, i]))
        ues = channel.place_ues(
            spec.U, sc["L_r"], sc["W_r"], "uniform_random", rng, sc["ue_height"]
        )
        out.append((ues, (spec.seed, 3, i)))
    return out


def _availability_cell(spec: SweepSpec, B: int, R_fh: float) -> list:
    sc = spec.scenario()
    drops = _drops(spec, sc)
    pairs = []  # (gains, draw) per drop, common across (B, R_fh) cells
    for ues, fading_key in drops:
        gains = _gains(sc, B, spec.U, ue_positions=ues)
        H = _fading_draws(gains, 1, fading_key + (B,))[0]
        pairs.append(H)
    records = []
    for comb in spec.combiners:
        # dither level optimized on the mean EVM over a drop subsample
        sub = pairs[: min(len(pairs), 100)]
        best = None
        for ed_db in spec.dither_grid_db:
            p = _params(sc, B, spec.U, R_fh, ed_db)
            grid = build_grid(p)
            res = combiners.evm_for_draws(comb, p, grid, sub, spec.lag_tol)
            if best is None or res.eta_sq < best[0]:
                best = (res.eta_sq, float(ed_db), p, grid)
        _, ed_db, p, grid = best
        n_ok = 0
        for H in pairs:
            try:
                eta_sq = combiners.evm_for_draws(
                    comb, p, grid, [H], spec.lag_tol
                ).eta_sq
            except (combiners.DegenerateChannelError, combiners.SingularChannelError):
                continue
            if math.sqrt(eta_sq) < spec.threshold:
                n_ok += 1
        records.append(
            {
                "scenario": "distributed",
                "b": B,
                "combiner": comb,
                "r_fh_bit_s": float(R_fh),
                "osr": grid.O,
                "opt_ed_over_n0_db": ed_db,
                "threshold_pct": 100.0 * spec.threshold,
                "availability": n_ok / len(pairs),
                "n_drops": len(pairs),
            }
        )
    return records


def _colocated_cell(spec: SweepSpec) -> list:
    """Reference: one co-located multi-antenna receiver at the area center,
    no quantization, no fronthaul limit (LMMSE on the unquantized model)."""
    sc = spec.scenario()
    B = max(spec.B_list)
    Ebar_s, N_0 = _scenario_energies(sc)
    E_s = Ebar_s / B
    center = np.array(
        [[sc["L_r"] / 2.0, sc["W_r"] / 2.0, sc["ap_height"]]]
    )
    n_ok = 0
    n_tot = 0
    for ues, fading_key in _drops(spec, sc):
        topo = channel.Topology(
            sc["L_r"], sc["W_r"], np.repeat(center, B, axis=0), ues
        )
        gains = channel.path_loss(topo)
        H = _fading_draws(gains, 1, fading_key + (0,))[0]
        HhH = H.conj().T @ H
        eta_sq = float(
            np.trace(
                np.linalg.inv(np.eye(spec.U) + (E_s / N_0) * HhH)
            ).real
        ) / spec.U
        n_tot += 1
        if math.sqrt(eta_sq) < spec.threshold:
            n_ok += 1
    return [
        {
            "scenario": "colocated",
            "b": B,
            "combiner": "lmmse",
            "r_fh_bit_s": float("inf"),
            "osr": 0,
            "opt_ed_over_n0_db": float("nan"),
            "threshold_pct": 100.0 * spec.threshold,
            "availability": n_ok / n_tot,
            "n_drops": n_tot,
        }
    ]


def _pilot_cell(spec: SweepSpec, n_pilots: int) -> list:
    sc = spec.scenario()
    B = spec.B_list[0]
    gains = _gains(sc, B, spec.U)
    p = _params(sc, B, spec.U, spec.R_fh, spec.data_dither_db)
    grid = build_grid(p)
    draws = _fading_draws(gains, spec.n_trials, (spec.seed, 1, B))
    comb = spec.combiners[0] if len(spec.combiners) == 1 else "zf"
    perfect = combiners.evm_for_draws(comb, p, grid, draws, spec.lag_tol)
    best = None
    for ed_db in spec.pilot_dither_grid_db:
        E_d_pilot = p.N_0 * 10.0 ** (ed_db / 10.0)
        samples = []
        for i, H in enumerate(draws):
            rng = np.random.default_rng(
                np.random.SeedSequence([spec.seed, 4, int(n_pilots), i])
            )
            H_est = combiners.pilot_estimate_channel(
                H, gains, p, grid, n_pilots, E_d_pilot, rng
            )
            samples.append(
                combiners.eta2_draw_imperfect(comb, H, H_est, p, grid, spec.lag_tol)
            )
        mean = float(np.mean(samples))
        if best is None or mean < best[0]:
            arr = np.asarray(samples)
            best = (
                mean,
                float(ed_db),
                float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else float("inf"),
            )
    eta_sq, ed_db, stderr = best
    return [
        {
            "b": B,
            "combiner": comb,
            "r_fh_bit_s": spec.R_fh,
            "n_pilots": int(n_pilots),
            "opt_pilot_ed_over_n0_db": ed_db,
            "eta_pct": _eta_pct(eta_sq),
            "eta_stderr_pct": 100.0 * stderr / (2.0 * math.sqrt(eta_sq)),
            "eta_perfect_csi_pct": _eta_pct(perfect.eta_sq),
            "n_trials": len(draws),
        }
    ]


# ---------------------------------------------------------------------------
# Driver and CSV
# ---------------------------------------------------------------------------


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    """Run all cells of a sweep (optionally in parallel) and return sorted records."""
    cells = _cells(spec)
    if jobs <= 1 or len(cells) <= 1:
        nested = [_run_cell(spec, cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            nested = list(pool.map(_run_cell, [spec] * len(cells), cells))
    records = [r for group in nested for r in group]
    return sorted(records, key=_sort_key)


def run_dither_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    if spec.kind != "dither":
        raise ConfigError("spec.kind must be 'dither'")
    return run_sweep(spec, jobs)


def run_fronthaul_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    if spec.kind != "fronthaul":
        raise ConfigError("spec.kind must be 'fronthaul'")
    return run_sweep(spec, jobs)


def run_availability(spec: SweepSpec, jobs: int = 1) -> list:
    if spec.kind != "availability":
        raise ConfigError("spec.kind must be 'availability'")
    return run_sweep(spec, jobs)


def run_pilot_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    if spec.kind != "pilots":
        raise ConfigError("spec.kind must be 'pilots'")
    return run_sweep(spec, jobs)


def _sort_key(record: dict):
    return tuple(
        (k, _canonical(record[k])) for k in sorted(record)
    )


def _canonical(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        f = float(v)
        return ("num", 0.0, "nan") if math.isnan(f) else ("num", f, "")
    return ("str", 0.0, str(v))


def _format(v) -> str:
    if isinstance(v, float):
        return "%.10g" % v
    return str(v)


def records_to_csv(records: list, spec: SweepSpec) -> str:
    """Serialize records (already sorted) with a metadata comment line."""
    if not records:
        raise ConfigError("no records to write")
    header = list(records[0].keys())
    for r in records:
        if list(r.keys()) != header:
            raise ConfigError("inconsistent record schemas")
    buf = io.StringIO()
    buf.write(f"# config_hash={spec_hash(spec)} seed={spec.seed} kind={spec.kind}\n")
    buf.write(",".join(header) + "\n")
    for r in records:
        buf.write(",".join(_format(r[k]) for k in header) + "\n")
    return buf.getvalue()


def run_to_csv(spec: SweepSpec, jobs: int = 1) -> str:
    return records_to_csv(run_sweep(spec, jobs), spec)
