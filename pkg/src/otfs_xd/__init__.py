"""Cross-domain iterative detection for OTFS with block-wise time-domain LMMSE."""

from .analysis import run_state_evolution, se_demapper, se_posterior_time
from .channel import (BlockChannel, ChannelPath, ChannelRealization, build_block_channel,
                      build_time_channel_dense, reference_channel, sample_channel)
from .detector import (DetectorConfig, GaussianMessage, block_lmmse, brute_force_map,
                       detect_cross_domain, full_lmmse_baseline)
from .modem import get_constellation, make_frame, snr_to_n0
from .transforms import FrameGeometry, dd_to_time, time_to_dd

__version__ = "0.1.0"
