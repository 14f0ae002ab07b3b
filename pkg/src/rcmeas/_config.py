"""Process-wide numerical settings.

Tolerances and resource caps live here so that every module reads the same
values. They can be changed at runtime with the setters below or, for the
dimension cap, through the ``RCMEAS_DIM_CAP`` environment variable.
"""

import os

DEFAULT_TOL = 1e-9
NEGLIGIBLE_PROB = 1e-12
DEFAULT_DIM_CAP = 125
DEFAULT_ENUM_CAP = 10**6

_settings = {
    "tol": DEFAULT_TOL,
    "dim_cap": int(os.environ.get("RCMEAS_DIM_CAP", DEFAULT_DIM_CAP)),
    "enum_cap": DEFAULT_ENUM_CAP,
}


def get_tol() -> float:
    return _settings["tol"]


def set_tol(tol: float) -> None:
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    _settings["tol"] = float(tol)


def get_dim_cap() -> int:
    return _settings["dim_cap"]


def set_dim_cap(cap: int) -> None:
    if cap < 1:
        raise ValueError("dimension cap must be positive")
    _settings["dim_cap"] = int(cap)


def get_enum_cap() -> int:
    return _settings["enum_cap"]


def set_enum_cap(cap: int) -> None:
    if cap < 1:
        raise ValueError("enumeration cap must be positive")
    _settings["enum_cap"] = int(cap)


def resolve_tol(tol):
    return get_tol() if tol is None else float(tol)
