"""Hot pixel-loop kernels with a compiled core and a numpy fallback.

The Cython extension ``_core`` is preferred when built; set
``PROMPTSEG_KERNELS=python`` or ``=cython`` to force one implementation
(forcing cython raises if the extension is missing).
"""

import os

_forced = os.environ.get("PROMPTSEG_KERNELS", "auto").lower()
if _forced not in ("auto", "", "cython", "python"):
    raise ImportError(
        f"PROMPTSEG_KERNELS must be 'auto', 'cython' or 'python', got {_forced!r}"
    )

if _forced == "python":
    from . import _py as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _forced == "cython":
            raise
        from . import _py as _impl

implementation = _impl.implementation
confusion2 = _impl.confusion2
rle_encode = _impl.rle_encode
rle_decode = _impl.rle_decode
hsv_fire_mask = _impl.hsv_fire_mask
label4 = _impl.label4
