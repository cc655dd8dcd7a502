"""Exact BER analysis, link simulation and antenna placement for two-user
pinching-antenna NOMA (uplink and downlink with imperfect SIC)."""

__version__ = "0.1.0"

from .channel import (
    ComplexAmp,
    SystemGeometry,
    channel_pair,
    effective_channel,
    spherical_channel,
    ue_pa_distance,
    waveguide_loss,
)
from .constellation import alphabet, demodulate_hard, modulate, qpsk_sign_detect
from .dl_ber import (
    DlLinkConfig,
    QCoefficients,
    conditional_error_terms,
    dl_ber,
    dl_cost,
    dl_receiver_decision,
    generate_q_coefficients,
)
from .optimize import (
    DLJointOptimizer,
    EnvelopeSpec,
    FineTuneSpec,
    LowerEnvelope,
    OptimResult,
    SampledCurve,
    ULPositionOptimizer,
    fine_tune,
    minimize_envelope,
    moving_min,
    optimize_dl,
    optimize_ul,
    sample_cost,
)
from .simulate import SimResult, SimSpec, simulate_dl, simulate_ul, simulate_ul_conditional
from .ul_ber import (
    UlLinkConfig,
    ber1,
    ber1_conditional,
    ber2,
    ber2_conditional,
    ber2_shared_noise,
    q_function,
    residual_prob,
    s1hat_detection_prob,
    ul_bers,
    ul_cost,
)
from .units import dbm_to_watt, noise_sigma, watt_to_dbm
