"""Uplink EVM analysis of distributed massive MIMO with a one-bit dithered
radio-over-fiber fronthaul: closed-form Bussgang-based EVM, large-oversampling
limits, and an independent waveform-level Monte-Carlo oracle."""

from .params import (
    BandpassVerdict,
    ConfigError,
    DerivedGrid,
    FronthaulBudgetError,
    SystemParams,
    build_grid,
    db_to_lin,
    dbm_to_mw,
    fronthaul_to_osr,
    grid_from_osr,
    lin_to_db,
    make_params,
    validate_bandpass_sampling,
)
from .channel import (
    Topology,
    draw_channel,
    path_loss,
    place_aps_grid,
    place_ues,
    rayleigh_source,
)
from .bussgang import (
    AutocovSequence,
    BussgangGain,
    NumericalValidityError,
    QuantErrorSpectrum,
    SingularConfigurationError,
    bussgang_gain,
    ce_spectrum,
    re_seq,
    rq,
    ry_rf,
    rz_arcsine,
)
from .combiners import (
    DegenerateChannelError,
    EvmResult,
    SingularChannelError,
    evm_lmmse,
    evm_mr,
    evm_zf,
    evm_zf_imperfect_csi,
    lmmse_combiner,
    mr_combiner,
    pilot_estimate_channel,
    zf_combiner,
)
from .asymptotics import (
    evm_lmmse_asymptotic,
    evm_mrzf_asymptotic,
    matrix_limits,
    multiuser_asymptotic_evm,
    whitening_margin,
)
from .waveform import WaveformFrame, down_convert, empirical_evm, synthesize_frame
from .experiments import (
    SweepSpec,
    run_availability,
    run_dither_sweep,
    run_fronthaul_sweep,
    run_pilot_sweep,
    run_sweep,
    run_to_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
