"""Vibration-to-image encodings and a compact CNN for bearing fault classification."""

from ._core import (
    Model,
    SynthConfig,
    __version__,
    bench_single,
    default_side,
    encode,
    label_for,
    metrics,
    minmax_normalize,
    rqa_summary,
    synth_signal,
)

__all__ = [
    "Model",
    "SynthConfig",
    "__version__",
    "bench_single",
    "default_side",
    "encode",
    "label_for",
    "metrics",
    "minmax_normalize",
    "rqa_summary",
    "synth_signal",
]
