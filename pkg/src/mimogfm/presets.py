"""Operating point and gain sets of the 5 kW laboratory converter."""
from .cascade import CascadeGains
from .closedloop import Disturbance, GainSet
from .gfm import GfmGains, References
from .plant import table1_params

# The DC voltage loop of the rig was fixed hardware and its gains are not
# published; these model a stiff DC-link regulator (about 400 rad/s).
DC_LOOP_DEFAULTS = {"k_pdc": 20.0, "k_idc": 200.0}

DROOP = {"D_p": 0.01, "D_q": 0.05}

TRADITIONAL = {
    "k_pi": 0.3463, "k_ii": 4.6168, "k_ffv": 1.0, "k_pv": 0.5982, "k_iv": 1026.5, "k_ffi": 0.0,
    "k_21": 0.0, "k_22": 30.0, "k_24": 0.0, "k_31": 0.0, "k_32": 0.0, "k_34": 0.1,
    "k_12": 0.0, "k_14": 0.0, "k_15": 0.0,
    **DC_LOOP_DEFAULTS, **DROOP,
}

HINF = {
    "k_pi": 0.1371, "k_ii": 16.7853, "k_ffv": 0.1223, "k_pv": 0.7738, "k_iv": 1136.0,
    "k_ffi": -0.1481, "k_21": -0.1956, "k_22": 45.1987, "k_24": -0.0458, "k_31": -0.5115,
    "k_32": 0.0167, "k_34": 0.624,
    "k_12": 0.0, "k_14": 0.0, "k_15": 0.0,
    **DC_LOOP_DEFAULTS, **DROOP,
}


def traditional_gains():
    return GainSet.from_dict(TRADITIONAL)


def hinf_gains():
    return GainSet.from_dict(HINF)


def table1_references():
    return References(V_dcref=1.0, P_ref=0.5, omega_g_ref=1.0, Q_ref=0.0, V_ref=1.0)


def nominal_disturbance():
    return Disturbance(omega_g=1.0, V_g=1.0)


__all__ = [
    "DC_LOOP_DEFAULTS", "HINF", "TRADITIONAL", "hinf_gains", "nominal_disturbance",
    "table1_params", "table1_references", "traditional_gains",
]
