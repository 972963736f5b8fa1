"""Edge-guided single-image super resolution.

Three separately trained stages: a residual SR network upsamples the
input, a dense-residual edge network extracts a soft edge map from the
SR output, and a merge network fuses both into the final image.  Built
on a small reverse-mode autodiff core with a compiled convolution kernel
(pure-numpy fallback selected at import, see ``edgesr.kernels``).
"""

__version__ = "0.1.0"

from .image import EdgeMap, ImageBuffer, load_png, save_png
from .tensor import Tensor, backward, no_grad

__all__ = [
    "EdgeMap",
    "ImageBuffer",
    "Tensor",
    "backward",
    "load_png",
    "no_grad",
    "save_png",
    "__version__",
]
