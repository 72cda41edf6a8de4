"""Built-in problem instances.

Each builder returns a fully wired :class:`~saaconic.program.StochasticProgram`;
``build_program`` dispatches on a problem id using per-app parameter
dictionaries (as produced by the config parser).
"""

from __future__ import annotations

from ..errors import InputContractError
from . import kantorovich, regression, scalar, semilinear

_BUILDERS = {
    "regression": regression.build,
    "kantorovich": kantorovich.build,
    "semilinear": semilinear.build,
    "scalar": scalar.build,
}

PROBLEM_IDS = tuple(sorted(_BUILDERS))


def build_program(problem_id: str, params: dict | None = None):
    if problem_id not in _BUILDERS:
        raise InputContractError(
            f"unknown problem {problem_id!r}; available: {', '.join(PROBLEM_IDS)}"
        )
    return _BUILDERS[problem_id](params or {})
