"""Flat ``key = value`` run configuration.

One assignment per line, ``#`` starts a comment, blank lines are ignored.
Lists are comma separated. Angles may be written as multiples of ``pi``
(``pi/6``, ``0.25*pi``). Unknown keys are rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace

from anisotrap.errors import ConfigError
from anisotrap.fockspace import FockBasis
from anisotrap.trap import CouplingGeometry, alpha_for_theta, coupling_geometry, geometry_for_ratio

METHODS = ("closed", "stepped", "adiabatic")
INITIAL_STATES = ("superposition", "singlet")

_PI_RE = re.compile(r"^([-+]?)\s*((?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?$")


def parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI_RE.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse {text!r} as a number")
    sign, coef, den = m.groups()
    value = (float(coef) if coef else 1.0) * math.pi / (float(den) if den else 1.0)
    return -value if sign == "-" else value


def parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as an integer") from None


def _list(parse):
    def inner(text: str):
        items = [s.strip() for s in text.split(",")]
        return tuple(parse(s) for s in items if s)

    return inner


_PARSERS = {
    "nu_a": parse_float,
    "nu_b": parse_float,
    "dnu_over_lambda": parse_float,
    "alpha": parse_float,
    "theta": parse_float,
    "k": parse_float,
    "mass": parse_float,
    "rabi_Omega": parse_float,
    "lambda_form": str,
    "N": parse_int,
    "n_max": parse_int,
    "method": str,
    "methods": _list(str),
    "initial": str,
    "t": parse_float,
    "samples": parse_int,
    "steps": str,
    "N_list": _list(parse_int),
    "sweep_dnu_over_lambda": _list(parse_float),
    "sweep_N": _list(parse_int),
    "sweep_theta": _list(parse_float),
    "format": str,
    "out": str,
    "precision": parse_int,
}


_LIST_KEYS = {"methods", "N_list", "sweep_dnu_over_lambda", "sweep_N", "sweep_theta"}


@dataclass(frozen=True)
class RunConfig:
    nu_a: float | None = None
    nu_b: float | None = None
    dnu_over_lambda: float | None = None
    alpha: float | None = None
    theta: float | None = None
    k: float | None = None
    mass: float | None = None
    rabi_Omega: float | None = None
    lambda_form: str = "standard"
    N: int = 4
    n_max: int | None = None
    method: str = "closed"
    methods: tuple | None = None
    initial: str = "superposition"
    t: float | None = None
    samples: int = 2048
    steps: str = "auto"
    N_list: tuple | None = None
    sweep_dnu_over_lambda: tuple | None = None
    sweep_N: tuple | None = None
    sweep_theta: tuple | None = None
    format: str = "csv"
    out: str | None = None
    precision: int = 17

    @classmethod
    def from_pairs(cls, pairs: dict) -> "RunConfig":
        values = {}
        for key, text in pairs.items():
            if key not in _PARSERS:
                raise ConfigError(f"unknown config key {key!r}")
            text = text.strip()
            if not text and key not in _LIST_KEYS:
                # an empty value unsets the key, e.g. --override alpha=
                continue
            try:
                values[key] = _PARSERS[key](text)
            except ConfigError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @property
    def n_max_resolved(self) -> int:
        return self.N + 1 if self.n_max is None else self.n_max

    @property
    def step_count(self) -> int | None:
        if self.steps == "auto":
            return None
        n = parse_int(self.steps)
        if n < 1:
            raise ConfigError("steps must be 'auto' or a positive integer")
        return n

    def validate(self) -> None:
        for name in ("nu_a", "k", "mass", "rabi_Omega"):
            if getattr(self, name) is None:
                raise ConfigError(f"missing required key {name!r}")
        if (self.alpha is None) == (self.theta is None):
            raise ConfigError("give exactly one of alpha, theta")
        if (self.nu_b is None) == (self.dnu_over_lambda is None):
            raise ConfigError("give exactly one of nu_b, dnu_over_lambda")
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if self.n_max_resolved < self.N + 1:
            raise ConfigError(f"n_max = {self.n_max} must be >= N + 1 = {self.N + 1}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        for m in self.methods or ():
            if m not in METHODS:
                raise ConfigError(f"methods entries must be among {METHODS}")
        if self.initial not in INITIAL_STATES:
            raise ConfigError(f"initial must be one of {INITIAL_STATES}")
        if self.lambda_form not in ("standard", "literal"):
            raise ConfigError("lambda_form must be 'standard' or 'literal'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if not 1 <= self.precision <= 17:
            raise ConfigError("precision must lie in 1..17")
        if self.samples < 6 or self.samples % 2:
            raise ConfigError("samples must be an even integer >= 6")
        self.step_count  # noqa: B018 - parse check
        if self.sweep_N and self.n_max is not None and self.n_max < max(self.sweep_N) + 1:
            raise ConfigError("n_max is too small for the largest sweep_N")

    def geometry(self) -> CouplingGeometry:
        if self.nu_b is not None:
            alpha = self.alpha
            if alpha is None:
                alpha = alpha_for_theta(self.theta, self.nu_a, self.nu_b, self.mass)
            return coupling_geometry(self.nu_a, self.nu_b, alpha, self.k, self.rabi_Omega, self.mass, self.lambda_form)
        return geometry_for_ratio(
            self.nu_a,
            self.dnu_over_lambda,
            self.k,
            self.rabi_Omega,
            self.mass,
            theta=self.theta,
            alpha=self.alpha,
            lambda_form=self.lambda_form,
        )

    def basis(self) -> FockBasis:
        return FockBasis(self.n_max_resolved)

    def resolved_items(self) -> list[tuple[str, object]]:
        """Every physics-relevant setting, defaults filled in, in field order.

        Output-routing keys (``format``, ``out``) are left out; feeding these
        items back through :meth:`from_pairs` reproduces the run.
        """
        out = []
        for f in fields(self):
            if f.name in ("format", "out"):
                continue
            v = getattr(self, f.name)
            if f.name == "n_max":
                v = self.n_max_resolved
            if v is None:
                continue
            out.append((f.name, v))
        return out

    def point(self, dnu_over_lambda: float | None, N: int | None, theta: float | None) -> "RunConfig":
        """Single grid point of a sweep, with the sweep lists removed."""
        changes = {"sweep_dnu_over_lambda": None, "sweep_N": None, "sweep_theta": None}
        if dnu_over_lambda is not None:
            changes.update(dnu_over_lambda=dnu_over_lambda, nu_b=None)
        if theta is not None:
            changes.update(theta=theta, alpha=None)
        if N is not None:
            changes["N"] = N
            changes["n_max"] = max(self.n_max_resolved if self.n_max is not None else 0, N + 1)
        cfg = replace(self, **changes)
        cfg.validate()
        return cfg


def parse_config_text(text: str) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        pairs[key] = value
    return pairs


def parse_override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, value = (s.strip() for s in text.split("=", 1))
    return key, value


def load_config(path: str | None, overrides: list[str] = ()) -> RunConfig:
    pairs = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                pairs = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    for item in overrides:
        key, value = parse_override(item)
        pairs[key] = value
    return RunConfig.from_pairs(pairs)
