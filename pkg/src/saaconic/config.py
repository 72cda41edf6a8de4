"""Run configuration: a small nested key/value text format.

Files use INI-style sections with typed keys, e.g.::

    [run]
    problem = regression
    method = my-path
    n_list = 8 32 128
    seeds = 0 1 2

    [gamma]
    c = 1.0
    exponent = 0.25

    [problem.regression]
    n = 64
    radius = 2.0

Unknown sections or keys are rejected, and all validation problems are
collected and reported at once, each with its ``section.key`` address.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import InputContractError
from .penalty import PenaltyPathConfig

# typed key tables: name -> (type tag, default)
_RUN_KEYS = {
    "problem": ("str", None),
    "method": ("str", "my-path"),
    "n_list": ("int_list", [16]),
    "seeds": ("int_list", None),
    "num_seeds": ("int", None),
    "n": ("int", None),
    "reference_n": ("int", None),
    "out": ("str", None),
    "format": ("str", "csv"),
    "plots": ("bool", True),
    "dump_scenarios": ("bool", False),
}
_GAMMA_KEYS = {
    "c": ("float", 1.0),
    "exponent": ("float", 0.25),
    "stages": ("float_list", None),
    "tol": ("float", 1e-8),
}
_SOLVER_KEYS = {
    "tol": ("float", 1e-6),
    "max_iter": ("int", 20000),
    "accelerate": ("bool", False),
}
_VALIDATE_KEYS = {
    "m": ("int", 4096),
    "rho": ("float", 0.0),
}
_CERTIFY_KEYS = {
    "epsilon": ("float", 0.1),
    "rho": ("float", 0.05),
    "delta": ("float", 0.1),
    "trials": ("int", 50),
    "cover_points": ("int", 2000),
    "validation_m": ("int", 100000),
    "required_n_override": ("int", None),
}
_PHI_KEYS = {
    "s": ("float", 0.0),
    "m": ("int", 10000),
    "tol": ("float", 1e-8),
}
_PROBLEM_KEYS = {
    "regression": {
        "n": "int", "radius": "float", "noise": "float",
        "target_amp": "float", "target_offset": "float",
    },
    "kantorovich": {
        "m": "int", "radius": "float", "positions": "float_list",
        "p1": "float_list", "p2": "float_list", "cost_csv": "str",
    },
    "semilinear": {
        "n": "int", "alpha": "float", "lo": "float", "hi": "float",
        "y_max": "float", "yd_amp": "float", "kappa0": "float",
        "mode_amps": "float_list", "newton_tol": "float", "newton_max_iter": "int",
    },
    "scalar": {"target": "float", "bound": "float", "box_radius": "float"},
}
_SECTIONS = {
    "run": _RUN_KEYS,
    "gamma": _GAMMA_KEYS,
    "solver": _SOLVER_KEYS,
    "validate": _VALIDATE_KEYS,
    "certify": _CERTIFY_KEYS,
    "phi": _PHI_KEYS,
}


class ConfigError(InputContractError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class RunConfig:
    """Validated configuration for all CLI subcommands."""

    problem_id: str
    method: str = "my-path"
    N_list: list[int] = field(default_factory=lambda: [16])
    seeds: list[int] = field(default_factory=lambda: [0])
    n_solve: int = 16
    reference_n: Optional[int] = None
    out_dir: Optional[str] = None
    fmt: str = "csv"
    plots: bool = True
    dump_scenarios: bool = False
    gamma: PenaltyPathConfig = field(default_factory=PenaltyPathConfig)
    tol: float = 1e-6
    max_iter: int = 20000
    accelerate: bool = False
    validate_M: int = 4096
    rho: float = 0.0
    certify_epsilon: float = 0.1
    certify_rho: float = 0.05
    certify_delta: float = 0.1
    certify_trials: int = 50
    certify_cover_points: int = 2000
    certify_validation_M: int = 100000
    certify_required_n_override: Optional[int] = None
    phi_s: float = 0.0
    phi_M: int = 10000
    phi_tol: float = 1e-8
    problem_params: dict = field(default_factory=dict)


def _parse_value(raw: str, kind: str, address: str, errors: list[str]):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "int_list":
            return [int(tok) for tok in raw.replace(",", " ").split()]
        if kind == "float_list":
            return [float(tok) for tok in raw.replace(",", " ").split()]
        return raw
    except ValueError:
        errors.append(f"{address}: cannot parse {raw!r} as {kind}")
        return None


def parse_config(path) -> RunConfig:
    """Parse and fully validate a config file; raises :class:`ConfigError`
    listing every problem found (with section.key addresses)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError([f"cannot parse {path}: {exc}"]) from exc

    errors: list[str] = []
    values: dict[str, dict] = {name: {} for name in _SECTIONS}
    problem_params: dict = {}
    problem_section_id: Optional[str] = None

    for section in parser.sections():
        if section in _SECTIONS:
            table = _SECTIONS[section]
            for key, raw in parser.items(section):
                if key not in table:
                    errors.append(f"{section}.{key}: unknown key")
                    continue
                kind, _ = table[key]
                parsed = _parse_value(raw, kind, f"{section}.{key}", errors)
                if parsed is not None:
                    values[section][key] = parsed
        elif section.startswith("problem."):
            pid = section.split(".", 1)[1]
            if pid not in _PROBLEM_KEYS:
                errors.append(f"{section}: unknown problem section")
                continue
            problem_section_id = pid
            for key, raw in parser.items(section):
                if key not in _PROBLEM_KEYS[pid]:
                    errors.append(f"{section}.{key}: unknown key")
                    continue
                parsed = _parse_value(raw, _PROBLEM_KEYS[pid][key], f"{section}.{key}", errors)
                if parsed is not None:
                    problem_params[key] = parsed
        else:
            errors.append(f"{section}: unknown section")

    run = values["run"]
    problem_id = run.get("problem")
    if problem_id is None:
        errors.append("run.problem: missing required key")
    elif problem_id not in _PROBLEM_KEYS:
        errors.append(
            f"run.problem: unknown problem {problem_id!r} "
            f"(expected one of {', '.join(sorted(_PROBLEM_KEYS))})"
        )
    if problem_section_id and problem_id and problem_section_id != problem_id:
        errors.append(
            f"problem.{problem_section_id}: section does not match run.problem "
            f"({problem_id})"
        )

    method = run.get("method", "my-path")
    if method not in ("my-path", "saa-oracle"):
        errors.append(f"run.method: must be 'my-path' or 'saa-oracle', got {method!r}")
    fmt = run.get("format", "csv")
    if fmt not in ("csv", "json"):
        errors.append(f"run.format: must be 'csv' or 'json', got {fmt!r}")

    n_list = run.get("n_list", [16])
    if not n_list or any(N < 1 for N in n_list):
        errors.append("run.n_list: sample sizes must be positive")
    elif any(b <= a for a, b in zip(n_list, n_list[1:])):
        errors.append("run.n_list: must be increasing")

    seeds = run.get("seeds")
    num_seeds = run.get("num_seeds")
    if seeds is not None and num_seeds is not None:
        errors.append("run.seeds and run.num_seeds are mutually exclusive")
    if seeds is None:
        seeds = list(range(num_seeds)) if num_seeds else [0]
    if not seeds:
        errors.append("run.seeds: must be nonempty")
    if num_seeds is not None and num_seeds < 1:
        errors.append("run.num_seeds: must be positive")

    gamma_kwargs = {}
    g = values["gamma"]
    c = g.get("c", 1.0)
    if c <= 0:
        errors.append("gamma.c: must be positive")
    exponent = g.get("exponent", 0.25)
    if not 0.0 < exponent < 1.0:
        errors.append("gamma.exponent: must lie in the open interval (0, 1)")
    stages = g.get("stages")
    if stages is not None and any(b <= a for a, b in zip(stages, stages[1:])):
        errors.append("gamma.stages: must be strictly increasing")
    if stages is not None and any(s <= 0 for s in stages):
        errors.append("gamma.stages: must be positive")
    gtol = g.get("tol", 1e-8)
    if gtol <= 0:
        errors.append("gamma.tol: must be positive")
    gamma_kwargs = dict(c_gamma=c, exponent=exponent, gamma_stages=stages,
                        tol_per_stage=gtol)

    sv = values["solver"]
    if sv.get("tol", 1e-6) <= 0:
        errors.append("solver.tol: must be positive")
    if sv.get("max_iter", 20000) < 1:
        errors.append("solver.max_iter: must be at least 1")

    va = values["validate"]
    if va.get("m", 4096) < 2:
        errors.append("validate.m: must be at least 2")
    if va.get("rho", 0.0) < 0:
        errors.append("validate.rho: must be nonnegative")

    ce = values["certify"]
    for key in ("epsilon", "delta"):
        val = ce.get(key, _CERTIFY_KEYS[key][1])
        if not 0.0 < val < 1.0:
            errors.append(f"certify.{key}: must lie in the open interval (0, 1)")
    if ce.get("rho", 0.05) <= 0:
        errors.append("certify.rho: must be positive")
    if ce.get("trials", 50) < 20:
        errors.append("certify.trials: must be at least 20")

    if values["phi"].get("m", 10000) < 2:
        errors.append("phi.m: must be at least 2")

    if errors:
        raise ConfigError(errors)

    n_solve = run.get("n")
    if n_solve is None:
        n_solve = n_list[-1]
    return RunConfig(
        problem_id=problem_id,
        method=method,
        N_list=list(n_list),
        seeds=[int(s) for s in seeds],
        n_solve=int(n_solve),
        reference_n=run.get("reference_n"),
        out_dir=run.get("out"),
        fmt=fmt,
        plots=run.get("plots", True),
        dump_scenarios=run.get("dump_scenarios", False),
        gamma=PenaltyPathConfig(**gamma_kwargs),
        tol=sv.get("tol", 1e-6),
        max_iter=sv.get("max_iter", 20000),
        accelerate=sv.get("accelerate", False),
        validate_M=va.get("m", 4096),
        rho=va.get("rho", 0.0),
        certify_epsilon=ce.get("epsilon", 0.1),
        certify_rho=ce.get("rho", 0.05),
        certify_delta=ce.get("delta", 0.1),
        certify_trials=ce.get("trials", 50),
        certify_cover_points=ce.get("cover_points", 2000),
        certify_validation_M=ce.get("validation_m", 100000),
        certify_required_n_override=ce.get("required_n_override"),
        phi_s=values["phi"].get("s", 0.0),
        phi_M=values["phi"].get("m", 10000),
        phi_tol=values["phi"].get("tol", 1e-8),
        problem_params=problem_params,
    )
