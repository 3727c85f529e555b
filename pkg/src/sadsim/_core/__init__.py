"""Hot simulation kernels with backend selection at import time.

The compiled Cython extension is preferred when built; the pure-Python
module is a drop-in fallback. Set SADSIM_PURE_PYTHON=1 to force the
fallback (used by the benchmark and the backend-parity tests).
"""

import os

if os.environ.get("SADSIM_PURE_PYTHON") == "1":
    from . import kernels_py as _impl
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import kernels_py as _impl

BACKEND = _impl.BACKEND

wrap_angle = _impl.wrap_angle
bicycle_step = _impl.bicycle_step
rects_overlap = _impl.rects_overlap
rect_corners = _impl.rect_corners
rect_outside_box = _impl.rect_outside_box
lane_change_ref = _impl.lane_change_ref
steer_rate_cmd = _impl.steer_rate_cmd
track_state_at = _impl.track_state_at
