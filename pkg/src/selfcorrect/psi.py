"""Shape functions of the self-correcting alternative.

The intensity under the alternative is ``rate * psi(theta * (rate * t - X_t))``
with ``psi(0) = 1`` and ``psi'(0) > 0``.  The derivative at zero is supplied by
the caller; it sets ``gamma = rate * psi'(0)`` and therefore the scale of the
local parameter, so it is never obtained by numerical differentiation.

``value`` and ``local_bound`` are numba-compiled so simulation and likelihood
kernels can call them directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numba as nb
import numpy as np

from .exceptions import InvalidArgumentError


@dataclass(frozen=True)
class PsiSpec:
    """Shape function psi with the metadata the kernels need.

    ``local_bound(x_lo, x_hi)`` must return an upper bound of psi on
    ``[x_lo, x_hi]``.  ``exact_integrable`` marks the exponential family, for
    which both the simulator and the likelihood use closed forms.
    """

    value: Callable[[float], float]
    deriv_at_zero: float
    local_bound: Callable[[float, float], float]
    exact_integrable: bool = False
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.deriv_at_zero > 0:
            raise InvalidArgumentError("psi'(0) must be positive")
        if not math.isclose(float(self.value(0.0)), 1.0, rel_tol=0, abs_tol=1e-12):
            raise InvalidArgumentError(f"psi(0) must equal 1, got {self.value(0.0)!r}")

    def gamma(self, rate: float) -> float:
        return rate * self.deriv_at_zero

    def with_integrable(self, flag: bool) -> "PsiSpec":
        """Copy with the closed-form flag changed (used to force thinning)."""
        return PsiSpec(self.value, self.deriv_at_zero, self.local_bound, flag, self.name, dict(self.meta))


@nb.njit(cache=True)
def _exp_value(x):
    return np.exp(x)


@nb.njit(cache=True)
def _exp_bound(x_lo, x_hi):
    return np.exp(max(x_lo, x_hi))


def exp_psi() -> PsiSpec:
    """psi(x) = e^x, the exponential stress-release model."""
    return PsiSpec(_exp_value, 1.0, _exp_bound, exact_integrable=True, name="exp")


def monotone_psi(value, deriv_at_zero: float, name: str = "custom") -> PsiSpec:
    """Wrap a monotone shape function; the window bound is the larger endpoint value."""
    fn = value if isinstance(value, nb.core.registry.CPUDispatcher) else nb.njit(value)

    @nb.njit
    def bound(x_lo, x_hi):
        return max(fn(x_lo), fn(x_hi))

    return PsiSpec(fn, float(deriv_at_zero), bound, exact_integrable=False, name=name)


def bounded_psi(value, deriv_at_zero: float, sup: float, name: str = "custom") -> PsiSpec:
    """Shape function without monotonicity, dominated by a global constant."""
    fn = value if isinstance(value, nb.core.registry.CPUDispatcher) else nb.njit(value)
    sup = float(sup)

    @nb.njit
    def bound(x_lo, x_hi):
        return sup

    return PsiSpec(fn, float(deriv_at_zero), bound, exact_integrable=False, name=name,
                   meta={"sup": sup})


_EXPR_NAMES = {name: getattr(np, name) for name in (
    "exp", "log", "log1p", "expm1", "tanh", "arctan", "sqrt", "abs", "minimum", "maximum", "pi")}


def load_psi_file(path: str | Path) -> PsiSpec:
    """Read a shape function from a key-value text file.

    Recognised keys: ``expr`` (numpy expression in ``x``), ``deriv_at_zero``,
    ``monotone`` (``yes``/``no``, default yes) and ``sup`` (required when not
    monotone)::

        expr = 1 + tanh(x)
        deriv_at_zero = 1
    """
    conf = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise InvalidArgumentError(f"malformed psi line: {raw!r}")
        conf[key.strip()] = val.strip()
    for key in ("expr", "deriv_at_zero"):
        if key not in conf:
            raise InvalidArgumentError(f"psi file lacks {key!r}")
    expr = conf["expr"]
    if expr.replace(" ", "") in ("exp(x)", "np.exp(x)"):
        return exp_psi()
    code = compile(expr, str(path), "eval")
    for name in code.co_names:
        if name != "x" and name not in _EXPR_NAMES:
            raise InvalidArgumentError(f"unsupported name {name!r} in psi expression")
    scope = dict(_EXPR_NAMES)
    exec(f"def _psi(x):\n    return {expr}\n", scope)  # noqa: S102 - names checked above
    deriv = float(conf["deriv_at_zero"])
    if conf.get("monotone", "yes").lower() in ("yes", "true", "1"):
        return monotone_psi(scope["_psi"], deriv, name=expr)
    if "sup" not in conf:
        raise InvalidArgumentError("non-monotone psi needs a 'sup' bound")
    return bounded_psi(scope["_psi"], deriv, float(conf["sup"]), name=expr)
