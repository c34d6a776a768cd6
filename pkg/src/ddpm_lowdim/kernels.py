"""Backend selection for the hot loops.

The Cython extension is used when it was built; otherwise the numpy
fallback is used. Set ``DDPM_LOWDIM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("DDPM_LOWDIM_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

greedy_net = _impl.greedy_net
propagate_block_variances = _impl.propagate_block_variances
