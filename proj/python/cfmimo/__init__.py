"""Joint pilot-length, pilot-assignment and power optimization for
user-centric cell-free massive MIMO downlinks.

Thin wrapper around the C++ core. All heavy inputs/outputs travel as JSON
strings (configs, experiment specs, checkpoints) or nested lists (matrices),
so results round-trip bit-exactly with the `cfmimo` command-line tool.
"""

try:
    from ._core import (
        baseline,
        default_config,
        discretize,
        draw_frame,
        evaluate_checkpoint,
        generalize,
        properties,
        psi,
        sweep,
        train,
        __version__,
    )
except ImportError:  # source checkout: extension built out-of-tree by CMake
    from _core import (
        baseline,
        default_config,
        discretize,
        draw_frame,
        evaluate_checkpoint,
        generalize,
        properties,
        psi,
        sweep,
        train,
        __version__,
    )

__all__ = [
    "baseline",
    "default_config",
    "discretize",
    "draw_frame",
    "evaluate_checkpoint",
    "generalize",
    "properties",
    "psi",
    "sweep",
    "train",
    "__version__",
]
