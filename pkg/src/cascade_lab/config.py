"""Experiment configuration: a flat INI-style file with one section per command group.

Example::

    [toy]
    n_modes = 6
    delta = 1e-3

    [lambda]
    n_generations = 3
    seed = 7

    [sweep]
    threads = 4

Unknown sections or keys are rejected.  Values given on the command line
override the file.  ``validate`` builds the module parameter objects so that
bad numbers fail before anything runs.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import PreconditionError

THREADS_ENV = "CASCADE_LAB_THREADS"


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).split(",") if x.strip())


# section -> key -> (parser, default)
SCHEMA = {
    "toy": {"n_modes": (int, 6), "delta": (float, 1e-3), "sigma": (float, 0.15), "nu": (float, 0.25),
            "j": (int, 3), "t_start": (float, -3.0), "t_end": (float, 3.0), "samples": (int, 601),
            "perturbation": (float, 1e-3), "seed": (int, 0)},
    "cascade": {"entry_depth": (float, 0.005), "shoot_tolerance": (float, 1e-11),
                "per_saddle_budget": (float, 60.0), "search_depth": (int, 12),
                "rel_tol": (float, 1e-11), "abs_tol": (float, 1e-13), "samples": (int, 1001)},
    "lambda": {"n_generations": (int, 3), "gen_size": (int, 4), "radius": (int, 10 ** 4), "seed": (int, 0),
               "profile": (str, "plain"), "s": (float, 1.5)},
    "galerkin": {"n_generations": (int, 5), "lambdas": (_floats, (4.0, 8.0, 16.0)), "samples": (int, 512),
                 "flow": (str, "resonant"), "seed": (int, 3), "s": (float, 1.5)},
    "nf": {"amplitudes": (_floats, (1e-2, 1e-3, 1e-4)), "seed": (int, 0)},
    "sweep": {"threads": (int, 1)},
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {s: {k: d for k, (_, d) in keys.items()}
                                                  for s, keys in SCHEMA.items()})

    def section(self, name: str) -> dict:
        return self.values[name]

    def set(self, section: str, key: str, raw):
        if section not in SCHEMA:
            raise PreconditionError(f"unknown config section [{section}]")
        if key not in SCHEMA[section]:
            raise PreconditionError(f"unknown key '{key}' in section [{section}]")
        parser = SCHEMA[section][key][0]
        try:
            self.values[section][key] = parser(raw)
        except (TypeError, ValueError) as exc:
            raise PreconditionError(f"bad value for [{section}] {key}: {raw!r}") from exc

    @classmethod
    def load(cls, path: Optional[str] = None) -> "ExperimentConfig":
        cfg = cls()
        if path is None:
            return cfg
        if not Path(path).is_file():
            raise PreconditionError(f"config file {path} not found")
        parser = configparser.ConfigParser(interpolation=None)
        parser.read(path, encoding="utf-8")
        for section in parser.sections():
            for key, raw in parser.items(section):
                cfg.set(section, key, raw)
        return cfg

    def to_text(self) -> str:
        out = []
        for s, keys in self.values.items():
            out.append(f"[{s}]")
            for k, v in keys.items():
                out.append(f"{k} = {','.join(map(str, v)) if isinstance(v, tuple) else v}")
            out.append("")
        return "\n".join(out)

    # -- builders (each validates through the module's own preconditions)
    def toy_params(self):
        from .toy import ToyParams
        t = self.values["toy"]
        return ToyParams(t["n_modes"], t["delta"], t["sigma"], t["nu"])

    def cascade_params(self):
        from .cascade import CascadeParams
        from .integrator import IntegratorConfig
        c = self.values["cascade"]
        return CascadeParams(toy=self.toy_params(), shoot_tolerance=c["shoot_tolerance"],
                             per_saddle_budget=c["per_saddle_budget"], search_depth=c["search_depth"],
                             entry_depth=c["entry_depth"],
                             integrator=IntegratorConfig(rel_tol=c["rel_tol"], abs_tol=c["abs_tol"]))

    def validate(self, command: str):
        """Check the parameters a command will use."""
        t = self.values["toy"]
        if command.startswith("toy"):
            self.toy_params()
            if not 1 <= t["j"] < t["n_modes"]:
                raise PreconditionError("toy j must satisfy 1 <= j < N")
            if t["samples"] < 2:
                raise PreconditionError("samples must be at least 2")
        if command.startswith("cascade"):
            p = self.cascade_params()
            p.check_search_preconditions()
        if command.startswith("lambda"):
            lam = self.values["lambda"]
            if lam["n_generations"] < 2 or lam["gen_size"] < 2 or lam["gen_size"] % 2:
                raise PreconditionError("lambda needs N >= 2 and an even gen_size >= 2")
            if lam["radius"] < 1 or lam["s"] < 0:
                raise PreconditionError("lambda needs radius >= 1 and s >= 0")
            if lam["profile"] not in ("plain", "spreading"):
                raise PreconditionError("profile must be 'plain' or 'spreading'")
        if command.startswith("galerkin"):
            g = self.values["galerkin"]
            if any(x <= 0 for x in g["lambdas"]):
                raise PreconditionError("rescalings must be positive")
            if g["flow"] not in ("resonant", "gauge"):
                raise PreconditionError("flow must be 'resonant' or 'gauge'")
            if g["n_generations"] < 5:
                raise PreconditionError("galerkin experiments need N >= 5")
        if command.startswith("nf"):
            if any(not 0 < a < 1 for a in self.values["nf"]["amplitudes"]):
                raise PreconditionError("amplitudes must lie in (0, 1)")


def worker_count(flag: Optional[int] = None, default: int = 1) -> int:
    """CASCADE_LAB_THREADS wins over the flag, the flag over the default."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise PreconditionError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    else:
        n = flag if flag is not None else default
    if n < 1:
        raise PreconditionError("worker count must be at least 1")
    return n
