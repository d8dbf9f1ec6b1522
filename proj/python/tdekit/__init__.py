"""Stereo time delay estimation toolkit.

The heavy lifting lives in the compiled extension ``tdekit._core``:
GCC-PHAT and learned delay estimators, the room simulator, STFT features,
and the self-supervised losses.
"""

from ._core import (  # noqa: F401
    Model,
    add_noise,
    affinity,
    classic_estimate,
    cross_correlation,
    crw_loss,
    delay_to_angle,
    gcc_phat,
    ground_truth_tdoa,
    iid_direction,
    init_model,
    load_wav,
    make_mixture,
    monoclr_loss,
    resample,
    save_wav,
    simulate_scene,
    stft_features,
    zero_loss,
)

__version__ = "0.1.0"
