"""Channel-averaged convolutional Monge mapping normalization.

Designs one zero-phase filter per subject that transports the subject's
channel-averaged power spectrum onto a reference spectrum built from source
subjects (a barycenter, an l1-normalized barycenter, or the nearest source
subject in Hellinger distance).
"""

from .errors import CMMNError, DataIOError, ValidationError
from .filterbank import NormalizingFilter, apply_filter, design_filter, frequency_response
from .gaussian import (
    CirculantGaussian,
    bures_wasserstein,
    circulant_from_acf,
    inject_line_noise,
    synth_gaussian_process,
    synth_record,
)
from .pipeline import PipelineConfig, SourceModel, fit_apply_target, fit_reference
from .spectral import (
    NormalizedPsd,
    Psd,
    SignalRecord,
    WelchConfig,
    channel_average,
    l1_normalize,
    psd_matrix,
    subject_psd,
    welch_psd,
)
from .transport import (
    ReferenceSpectrum,
    barycenter_arithmetic,
    barycenter_normalized,
    barycenter_wasserstein,
    hellinger,
    match_subject,
    w2_spectral,
)

__version__ = "0.1.0"
