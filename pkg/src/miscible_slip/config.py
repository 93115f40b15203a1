"""Problem configuration: TOML parsing, validation, defaults and echo.

A configuration file has the sections ``[domain]``, ``[physics]``,
``[friction]``, ``[discretization]`` and ``[output]``. Every key is
optional; omitted keys take the defaults in ``SCHEMA``. Parsed values are
fully resolved (preset and law parameters filled in, law constants ``m0``
and ``m1`` made explicit), so the echo of a parsed file parses back to an
identical configuration.
"""
from __future__ import annotations

import difflib
import inspect
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .exceptions import ConfigError, HypothesisError
from .friction import LAWS, make_law
from .geometry import SIDES
from .presets import PRESETS, build_preset, preset_defaults

# section -> key -> (type, default)
SCHEMA = {
    "domain": {
        "Lx": (float, 1.0),
        "Ly": (float, 1.0),
        "slip_sides": (list, ["bottom"]),
    },
    "physics": {
        "nu0": (float, 1.0),
        "d": (float, 1.0),
        "k": (float, 0.0),
        "T": (float, 0.1),
        "convection": (bool, True),
        "force": (str, "zero"),
        "force_params": (dict, None),
        "u0": (str, "zero"),
        "u0_params": (dict, None),
        "C0": (str, "zero"),
        "C0_params": (dict, None),
        "g": (str, "zero"),
        "g_params": (dict, None),
        "source": (str, "zero"),
        "source_params": (dict, None),
    },
    "friction": {
        "law": (str, "exp_decay"),
        "params": (dict, None),
        "m0": (float, None),
        "m1": (float, None),
        "m_reg": (int, 64),
    },
    "discretization": {
        "nx": (int, 16),
        "ny": (int, 16),
        "dt": (float, 0.01),
        "fp_tol": (float, 1e-10),
        "fp_max_iter": (int, 50),
        "lin_tol": (float, 1e-10),
    },
    "output": {
        "snapshot_every": (int, 0),
    },
}

# friction.params -> law_params; the rest keep their key names
_FIELD_OF = {("friction", "params"): "law_params"}


@dataclass
class ProblemConfig:
    """Validated, fully resolved problem description.

    Build with ``ProblemConfig.from_dict`` or ``parse_config``; use
    ``replace`` to derive variants (the result is revalidated).
    """

    Lx: float
    Ly: float
    slip_sides: list
    nu0: float
    d: float
    k: float
    T: float
    convection: bool
    force: str
    force_params: dict
    u0: str
    u0_params: dict
    C0: str
    C0_params: dict
    g: str
    g_params: dict
    source: str
    source_params: dict
    law: str
    law_params: dict
    m0: float
    m1: float
    m_reg: int
    nx: int
    ny: int
    dt: float
    fp_tol: float
    fp_max_iter: int
    lin_tol: float
    snapshot_every: int

    # -- construction ------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict | None = None) -> "ProblemConfig":
        data = {} if data is None else data
        _reject_unknown(data, SCHEMA, "section")
        flat = {}
        for section, keys in SCHEMA.items():
            sec = data.get(section, {})
            if not isinstance(sec, dict):
                raise ConfigError(f"[{section}] must be a table")
            _reject_unknown(sec, keys, f"key in [{section}]")
            for key, (typ, default) in keys.items():
                name = _FIELD_OF.get((section, key), key)
                flat[name] = _coerce(section, key, typ, sec[key]) if key in sec else _copy(default)
        return cls(**_resolve(flat))

    def to_dict(self) -> dict:
        out = {}
        for section, keys in SCHEMA.items():
            out[section] = {}
            for key in keys:
                out[section][key] = _copy(getattr(self, _FIELD_OF.get((section, key), key)))
        return out

    def replace(self, **changes) -> "ProblemConfig":
        data = self.to_dict()
        where = {_FIELD_OF.get((s, k), k): (s, k) for s, keys in SCHEMA.items() for k in keys}
        for name, value in changes.items():
            if name not in where:
                raise ConfigError(f"unknown configuration field {name!r}{_suggest(name, where)}")
            s, k = where[name]
            data[s][k] = value
            # law or preset switch: drop parameters of the previous choice
            if name == "law":
                data["friction"].pop("params", None)
                data["friction"].pop("m0", None)
                data["friction"].pop("m1", None)
            if name in PRESETS and f"{name}_params" not in changes:
                data[s].pop(f"{name}_params", None)
            if name == "law_params":
                for m in ("m0", "m1"):
                    if m not in changes:
                        data["friction"].pop(m, None)
        return ProblemConfig.from_dict(data)

    # -- derived quantities ------------------------------------------------
    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.T / self.dt - 1e-9))

    def partition(self) -> dict:
        from .geometry import partition_from_slip_sides
        return partition_from_slip_sides(self.slip_sides)

    def make_law(self):
        return make_law(self.law, **self.law_params, **({} if self.law == "zero" else
                                                       {"m0": self.m0, "m1": self.m1}))

    def preset(self, kind: str):
        return build_preset(kind, self._preset_view())

    def _preset_view(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _copy(v):
    if isinstance(v, dict):
        return {k: _copy(x) for k, x in v.items()}
    if isinstance(v, list):
        return list(v)
    return v


# descriptive names accepted only for suggestions
_ALIASES = {
    "viscosity": "nu0", "nu": "nu0", "diffusivity": "d", "diffusion": "d",
    "korteweg": "k", "horizon": "T", "final_time": "T", "time_step": "dt",
    "gamma1": "slip_sides", "slip": "slip_sides", "mollification": "m_reg",
}


def _suggest(name, options) -> str:
    options = list(options)
    close = difflib.get_close_matches(name, options, n=1)
    if not close:
        alias = difflib.get_close_matches(name.lower(), list(_ALIASES), n=1)
        close = [_ALIASES[a] for a in alias if _ALIASES[a] in options]
    return f"; did you mean {close[0]!r}?" if close else ""


def _reject_unknown(data: dict, allowed, what: str):
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown {what} {key!r}{_suggest(key, allowed)}")


def _coerce(section, key, typ, value):
    where = f"[{section}] {key}"
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where} must be finite, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where} must be a list of side names, got {value!r}")
        return list(value)
    if typ is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where} must be a table, got {value!r}")
        return _copy(value)
    raise AssertionError(typ)


def _merge_params(section: str, table: str, defaults: dict, given: dict | None) -> dict:
    given = {} if given is None else given
    _reject_unknown(given, defaults, f"parameter in [{section}] {table}")
    out = {}
    for key, default in defaults.items():
        value = given.get(key, default)
        typ = int if isinstance(default, int) and not isinstance(default, bool) else float
        out[key] = _coerce(section, f"{table}.{key}", typ, value)
    return out


def _law_defaults(law: str) -> dict:
    if law not in LAWS:
        raise ConfigError(f"unknown friction law {law!r}{_suggest(law, LAWS)}")
    sig = inspect.signature(LAWS[law])
    return {n: p.default for n, p in sig.parameters.items() if n not in ("m0", "m1")}


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _resolve(c: dict) -> dict:
    _check(c["Lx"] > 0 and c["Ly"] > 0, f"[domain] Lx, Ly must be positive, got {c['Lx']}, {c['Ly']}")
    bad = [s for s in c["slip_sides"] if s not in SIDES]
    _check(not bad, f"[domain] slip_sides: unknown side(s) {bad}; expected a subset of {list(SIDES)}")
    _check(len(set(c["slip_sides"])) == len(c["slip_sides"]), "[domain] slip_sides has duplicates")
    _check(len(c["slip_sides"]) < 4,
           "[domain] slip_sides covers the whole boundary: the no-slip part must have positive length")
    c["slip_sides"] = [s for s in SIDES if s in c["slip_sides"]]

    _check(c["nu0"] > 0, f"[physics] nu0 = {c['nu0']}: viscosity must be > 0 (positivity hypothesis on nu0, d)")
    _check(c["d"] > 0, f"[physics] d = {c['d']}: diffusivity must be > 0 (positivity hypothesis on nu0, d)")
    _check(c["k"] >= 0, f"[physics] k = {c['k']}: Korteweg coefficient must be >= 0")
    _check(c["T"] > 0, f"[physics] T = {c['T']}: horizon must be positive")

    for kind in PRESETS:
        try:
            defaults = preset_defaults(kind, c[kind])
        except ConfigError as exc:
            raise ConfigError(f"[physics] {kind}: {exc}") from None
        c[f"{kind}_params"] = _merge_params("physics", f"{kind}_params", defaults, c[f"{kind}_params"])
    if c["g"] == "constant":
        _check(c["g_params"]["value"] >= 0,
               f"[physics] g_params.value = {c['g_params']['value']}: reaction coefficient must be >= 0 "
               "(nonnegativity hypothesis on g)")

    defaults = _law_defaults(c["law"])
    c["law_params"] = _merge_params("friction", "params", defaults, c["law_params"])
    if c["law"] == "zero":
        c["m0"], c["m1"] = 1.0, 0.0
    try:
        law = make_law(c["law"], **c["law_params"],
                       **({} if c["law"] == "zero" else {"m0": c["m0"], "m1": c["m1"]}))
    except HypothesisError as exc:
        raise ConfigError(f"[friction] {exc}") from None
    c["m0"], c["m1"] = law.m0, law.m1
    _check(c["m_reg"] >= 1, f"[friction] m_reg = {c['m_reg']}: mollification index must be >= 1")

    _check(c["nx"] >= 1 and c["ny"] >= 1, f"[discretization] nx, ny must be >= 1, got {c['nx']}, {c['ny']}")
    _check(c["dt"] > 0, f"[discretization] dt = {c['dt']}: must be > 0")
    _check(c["T"] >= c["dt"] * (1 - 1e-12), f"[physics] T = {c['T']} must be >= dt = {c['dt']}")
    _check(c["fp_tol"] > 0 and c["lin_tol"] > 0, "[discretization] tolerances must be positive")
    _check(c["fp_max_iter"] >= 1, "[discretization] fp_max_iter must be >= 1")
    _check(c["snapshot_every"] >= 0, "[output] snapshot_every must be >= 0")

    # presets are built once here so parameter errors surface at parse time
    view = dict(c)
    for kind in PRESETS:
        build_preset(kind, view)
    return c


def parse_config(path) -> ProblemConfig:
    """Read and validate a TOML configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return ProblemConfig.from_dict(data)


def echo_config(config: ProblemConfig) -> str:
    """TOML text listing every effective value; parses back to ``config``."""
    return tomli_w.dumps(config.to_dict())


def sample_grid(config: ProblemConfig, n: int = 41) -> np.ndarray:
    xs = np.linspace(0, config.Lx, n)
    ys = np.linspace(0, config.Ly, n)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])
