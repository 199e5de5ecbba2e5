"""Two-stage sliding-window slowdown detection for minute-resolution speed data."""

from ._slowdown import (
    WINDOW_LENGTH,
    Config,
    Model,
    SlowdownError,
    detect_ml,
    detect_rule,
    fill_gaps,
    generate_corpus,
    label_window,
    match_events,
    normalize,
    run_detect,
    run_evaluate,
    run_generate,
    run_train,
    tolerance_sweep,
)

__all__ = [
    "WINDOW_LENGTH",
    "Config",
    "Model",
    "SlowdownError",
    "detect_ml",
    "detect_rule",
    "fill_gaps",
    "generate_corpus",
    "label_window",
    "match_events",
    "normalize",
    "run_detect",
    "run_evaluate",
    "run_generate",
    "run_train",
    "tolerance_sweep",
]
