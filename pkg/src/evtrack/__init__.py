"""evtrack: event-stream object tracking at desk scale.

Multi-density event frames feed a three-stage transformer backbone with a
sparsity-routed expert FFN and an adaptive-depth halting controller; a
center-based head decodes boxes, and SR/PR/NPR/FPS metrics score sequences.
"""

__version__ = "0.1.0"

from .accel import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
