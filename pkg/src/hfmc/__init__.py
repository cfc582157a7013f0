"""Hyperbolic frequency multicarrier (HFMC) simulation toolkit.

Physical-layer simulation of a multicarrier scheme whose subcarriers are
delayed copies of a single hyperbolic FM pulse, plus the surrounding
machinery: parameter design, a wideband delay/Doppler-scaling channel,
matched-filter demodulation, equivalent-channel construction, LMMSE
detection, and Monte Carlo benchmarking against OFDM, single-carrier, and
precoded single-carrier baselines.
"""

__version__ = "0.1.0"

from .waveform import (
    HfmSignalDef,
    HfmcParams,
    SubcarrierIndexMap,
    InvariantViolation,
    hfm_eval,
    subcarrier_delay,
    delay_grid,
    subcarrier_amplitude,
    subcarrier_eval,
    correlation_closed_form,
    correlation_approx,
    index_map,
    validate_params,
    truncate_transmit,
)
from .design import (
    SystemConfig,
    FeasibilityRanges,
    InfeasibleDesignError,
    a_max_from_velocity,
    epsilon_bounds,
    ct0_bounds,
    k_from_t0,
    capacity_quotient,
    max_subcarriers,
    diversity_bandwidth,
    leakage_ranges,
    design_at,
    select_parameters,
    tradeoff_sweep,
    tradeoff_coefficients,
    design_sheet,
)
from .channel import (
    ChannelStats,
    ChannelRealization,
    GuardViolation,
    NoiseSpec,
    draw_realization,
    apply_channel,
    add_awgn,
    perturb_csi,
    realization_to_text,
    realization_from_text,
)
from .modem import (
    Basis,
    EquivalentChannel,
    SymbolAlphabet,
    alphabet_from_name,
    map_bits,
    demap_symbols,
    build_basis,
    modulate,
    demodulate,
    equivalent_channel_numerical,
    equivalent_channel_analytic,
    band_occupancy,
)
from .detect import (
    BandCoverageError,
    ConditioningError,
    DetectionProblem,
    ErrorCounts,
    lmmse_equalize,
    lmmse_banded,
    count_errors,
)
from .analysis import (
    SpectrumEstimate,
    subcarrier_band,
    spectrum_stationary_phase,
    spectrum_dft,
    out_of_band_fraction,
    in_band_deviation_db,
    transmit_gram,
    gram_matrix_db,
    sir_db,
    approx_mse_db,
    orthogonality_sweep,
)
from .sim import (
    WAVEFORMS,
    ExperimentConfig,
    SimResult,
    run_ber,
)
from .output import (
    canonical_config_text,
    config_hash,
    write_csv,
    write_manifest,
)
