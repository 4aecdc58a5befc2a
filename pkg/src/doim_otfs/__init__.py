"""Block-wise Doppler index modulation over OTFS with a customized message-passing receiver."""

from .channel_model import ChannelRealization, sample_channel
from .cmp_detector import DetectionResult, DetectorConfig, detect
from .config import ExperimentConfig, parse_config
from .constellation import Constellation
from .effective_channel import SparseChannelMatrix, build_H, impulse_oracle, prune
from .im_codec import FrameLayout, demap_frame, map_frame, spectral_efficiency

__all__ = [
    "ChannelRealization", "Constellation", "DetectionResult", "DetectorConfig",
    "ExperimentConfig", "FrameLayout", "SparseChannelMatrix", "build_H", "demap_frame",
    "detect", "impulse_oracle", "map_frame", "parse_config", "prune", "sample_channel",
    "spectral_efficiency",
]

__version__ = "0.1.0"
