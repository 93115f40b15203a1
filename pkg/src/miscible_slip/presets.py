"""Named data presets: body force, initial data, reaction coefficient and source.

Each preset declares its parameters with defaults and builds a vectorized
callable ``(points, t) -> values``. Manufactured presets live on the unit
square only.
"""
from __future__ import annotations

import numpy as np

from .exceptions import ConfigError


def _zero_vec(points, t=0.0):
    return np.zeros((len(points), 2))


def _zero(points, t=0.0):
    return np.zeros(len(points))


def _stream_velocity(points, Lx, Ly, amp):
    """Curl of ``amp * [X(1-X) Y(1-Y)]^2`` with ``X = x/Lx``, ``Y = y/Ly``.

    Vanishes together with its normal derivative on the whole boundary, so
    the velocity satisfies every wall condition and is divergence free.
    """
    X, Y = points[:, 0] / Lx, points[:, 1] / Ly
    a, b = X * (1 - X), Y * (1 - Y)
    da, db = (1 - 2 * X) / Lx, (1 - 2 * Y) / Ly
    psi_x = 2 * a * da * b * b
    psi_y = 2 * b * db * a * a
    return amp * 16.0 * np.column_stack([psi_y, -psi_x])


def _mms(cfg):
    from .manufactured import manufactured_fields
    if not (cfg["Lx"] == 1.0 and cfg["Ly"] == 1.0):
        raise ConfigError("manufactured presets require the unit square (Lx = Ly = 1)")
    g = cfg["g_params"].get("value", 0.0) if cfg["g"] == "constant" else 0.0
    return manufactured_fields(cfg["nu0"], cfg["d"], cfg["k"], g, cfg["convection"])


def _force(name, p, cfg):
    Lx, Ly = cfg["Lx"], cfg["Ly"]
    if name == "zero":
        return _zero_vec
    if name == "constant":
        fx, fy = p["fx"], p["fy"]
        return lambda pts, t=0.0: np.tile([fx, fy], (len(pts), 1)).astype(float)
    if name == "shear":
        f0 = p["f0"]
        return lambda pts, t=0.0: np.column_stack(
            [f0 * (1.0 - 2.0 * pts[:, 1] / Ly), np.zeros(len(pts))])
    if name == "vortex":
        amp = p["amplitude"]
        return lambda pts, t=0.0: _stream_velocity(pts, Lx, Ly, amp)
    if name == "manufactured":
        return _mms(cfg).force
    raise AssertionError(name)


def _u0(name, p, cfg):
    if name == "zero":
        return _zero_vec
    if name == "vortex":
        amp = p["amplitude"]
        return lambda pts, t=0.0: _stream_velocity(pts, cfg["Lx"], cfg["Ly"], amp)
    if name == "manufactured":
        return _mms(cfg).velocity
    raise AssertionError(name)


def _C0(name, p, cfg):
    Lx, Ly = cfg["Lx"], cfg["Ly"]
    if name == "zero":
        return _zero
    if name == "constant":
        v = p["value"]
        return lambda pts, t=0.0: np.full(len(pts), float(v))
    if name == "cosine":
        a = p["amplitude"]
        return lambda pts, t=0.0: a * np.cos(np.pi * pts[:, 0] / Lx) * np.cos(np.pi * pts[:, 1] / Ly)
    if name == "gaussian":
        x0, y0, w, a, base = p["x0"], p["y0"], p["width"], p["amplitude"], p["base"]
        return lambda pts, t=0.0: base + a * np.exp(
            -((pts[:, 0] - x0) ** 2 + (pts[:, 1] - y0) ** 2) / (2 * w * w))
    if name == "manufactured":
        return _mms(cfg).concentration
    raise AssertionError(name)


def _g(name, p, cfg):
    if name == "zero":
        return None
    if name == "constant":
        return float(p["value"])
    raise AssertionError(name)


def _source(name, p, cfg):
    if name == "zero":
        return None
    if name == "manufactured":
        return _mms(cfg).source
    raise AssertionError(name)


# preset name -> default parameters
PRESETS = {
    "force": ({"zero": {}, "constant": {"fx": 1.0, "fy": 0.0}, "shear": {"f0": 1.0},
               "vortex": {"amplitude": 1.0}, "manufactured": {}}, _force),
    "u0": ({"zero": {}, "vortex": {"amplitude": 1.0}, "manufactured": {}}, _u0),
    "C0": ({"zero": {}, "constant": {"value": 1.0}, "cosine": {"amplitude": 1.0},
            "gaussian": {"x0": 0.5, "y0": 0.5, "width": 0.15, "amplitude": 1.0, "base": 0.0},
            "manufactured": {}}, _C0),
    "g": ({"zero": {}, "constant": {"value": 0.0}}, _g),
    "source": ({"zero": {}, "manufactured": {}}, _source),
}


def preset_defaults(kind: str, name: str) -> dict:
    table = PRESETS[kind][0]
    if name not in table:
        raise ConfigError(f"unknown {kind} preset {name!r}; choose from {sorted(table)}")
    return dict(table[name])


def build_preset(kind: str, cfg: dict):
    """Callable for preset ``cfg[kind]`` with parameters ``cfg[kind + '_params']``."""
    return PRESETS[kind][1](cfg[kind], cfg[f"{kind}_params"], cfg)
