"""Dispersion code multiple access (DCMA) simulator.

Chebyshev dispersion codes, frequency-domain phasers, random line-of-sight
channels, waveform-level links and the Gaussian MAI / BEP analysis.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DcmaError, DomainError, GridMismatchError,  # noqa: E402
                     InsufficientTrialsError, WindowOverflowError)
from .sysconfig import FrequencyGrid, SystemParams, make_grid  # noqa: E402
from .coding import (ChebyshevCode, CodeSet, Side, all_odd_code_set,  # noqa: E402
                     cascaded_group_delay, cheb_eval, delay_swing, group_delay, phase)
from .phaser import (PhaserBank, Spectrum, Waveform, apply, cascaded_transfer,  # noqa: E402
                     impulse_response, normalize, transfer)
from .channel import (ChannelEnsembleParams, ChannelRealization, channel_transfer,  # noqa: E402
                      draw_realization, friis_amplitude, trial_rng)
from .link import (BitStream, DecodedLink, detect_bits, dook_modulate,  # noqa: E402
                   ook_dirac_train, simulate_link)
from .analysis import (BepResult, MaiStats, bep, gaussian_pdf, mai_stats,  # noqa: E402
                       normality_test, q_function, sinr, sir_analytic, sir_statistical,
                       spectral_efficiency)
from .montecarlo import bep_monte_carlo, sample_mai  # noqa: E402
