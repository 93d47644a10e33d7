"""Backend selection for the closed-loop hot loops.

The compiled extension ``_ckernel`` is used when it imports; otherwise the
pure-Python ``_pykernel`` takes over.  Setting ``MIMOGFM_PURE_PYTHON=1``
forces the fallback.

Parameter vector layout (``NP = 36`` entries)::

    0-6    L_f C_f L_g R_g C_dc T_sw omega_b
    7-14   V_dcref P_ref omega_g_ref Q_ref V_ref i_0 omega_0 E_0
    15-16  omega_g V_g
    17-22  k_pv k_iv k_pi k_ii k_ffi k_ffv
    23-35  k_pdc k_idc k_12 k_14 k_15 k_21 k_22 k_24 k_31 k_32 k_34 D_p D_q
"""
import os

from . import _pykernel

NX = 17
NP = 36

PARAM_NAMES = (
    "L_f", "C_f", "L_g", "R_g", "C_dc", "T_sw", "omega_b",
    "V_dcref", "P_ref", "omega_g_ref", "Q_ref", "V_ref", "i_0", "omega_0", "E_0",
    "omega_g", "V_g",
    "k_pv", "k_iv", "k_pi", "k_ii", "k_ffi", "k_ffv",
    "k_pdc", "k_idc", "k_12", "k_14", "k_15", "k_21", "k_22", "k_24", "k_31", "k_32", "k_34",
    "D_p", "D_q",
)
PARAM_INDEX = {name: i for i, name in enumerate(PARAM_NAMES)}

_impl = _pykernel
if os.environ.get("MIMOGFM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernel as _impl
    except ImportError:  # extension not built
        pass

BACKEND = "cython" if _impl is not _pykernel else "python"

rhs = _impl.rhs
jacobian = _impl.jacobian
rk4 = _impl.rk4
