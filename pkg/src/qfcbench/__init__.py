"""Digital twin of a polarization-preserving quantum frequency-conversion interface."""

from .analysis import (
    FidelityBudget,
    FringeFit,
    TomographyResult,
    bootstrap_sigma,
    budget,
    fidelity_from_visibility,
    fringe_fit,
    linear_inversion,
    mle_reconstruct,
)
from .channel import (
    CavitySpec,
    ChannelParams,
    apply_channel_one_qubit,
    apply_channel_to_pair,
    calibrate_noise,
    conversion_map,
    device_efficiency,
    raman_suppression,
)
from .config import RunConfig, parse_config, print_defaults
from .counts import CountRecord, DetectorParams, SourceDrive
from .qstate import basis_state, bell_phi_plus, dm_from_pure, fidelity, purity, werner_state

__version__ = "0.1.0"
