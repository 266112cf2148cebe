"""Monte-Carlo photon-pair source and time-tag analysis toolkit."""

__version__ = "0.1.0"

from .model import (
    ChannelLossBudget,
    ExperimentConfig,
    ResonatorParams,
    SourceParams,
    TimingParams,
    WavelengthPlan,
    analytic_car,
    analytic_heralded_g2,
    analytic_klyshko,
    brightness,
    db_to_transmittance,
    pair_generation_rate,
    resonance_derived,
)
from .sim import TagStream, merge_streams, simulate_heralded_g2, simulate_pairs, thin_stream
from .analysis import (
    Histogram,
    bell_threshold,
    build_start_stop_histogram,
    compute_car,
    count_triples,
    fit_coincidence_peak,
    fit_power_sweep,
    franson_visibility,
    heralded_g2,
    singles_modulation,
)
from .franson import DliParams, FransonConfig, franson_path_weights, simulate_franson
from .fitting import FitResult, model_eval, nlls_fit
from .config import dump_config, load_config, parse_config
