"""Conjugate-gradient descent with the fixed-step halving protocol.

Both cost functionals are minimized the same way: start from zero with a
step size of 1e-4, reject any step that would increase the functional and
halve the step instead, stop once the step size falls below 1e-10.  No
line search.  Directions are Polak-Ribiere with restart to steepest
descent whenever the current direction stops being a descent direction.

Search directions are normalized to unit length, so the step size is a
displacement in the unknowns and the protocol is invariant under constant
rescalings of the functional (the Carleman weight is normalized here,
which rescales functional and gradient by a huge constant factor; an
absolute step paired with unnormalized directions would be meaningless
across that convention).

The unknowns are complex arrays; all inner products are the real inner
product on the (Re, Im) component pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CGParams", "MinimizeTrace", "minimize_cg"]


@dataclass(frozen=True)
class CGParams:
    initial_step: float = 1e-4
    step_floor: float = 1e-10
    max_iterations: int = 10000


@dataclass
class MinimizeTrace:
    """Per-accepted-iteration history of a CG run."""

    values: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    converged: bool = False
    message: str = ""

    def record(self, value: float, step: float, grad_norm: float) -> None:
        self.values.append(value)
        self.steps.append(step)
        self.grad_norms.append(grad_norm)

    def as_dict(self) -> dict:
        return {
            "values": self.values,
            "steps": self.steps,
            "grad_norms": self.grad_norms,
            "converged": self.converged,
            "message": self.message,
            "iterations": len(self.values),
        }


def _rdot(a: np.ndarray, b: np.ndarray) -> float:
    # Real inner product on complex arrays; np.sum keeps reductions
    # deterministic regardless of BLAS threading.
    return float(np.sum(a.real * b.real + a.imag * b.imag))


def minimize_cg(x0: np.ndarray, evaluate, gradient, params: CGParams) -> tuple[np.ndarray, MinimizeTrace]:
    """Minimize a functional starting from ``x0``.

    ``evaluate(x)`` returns ``(value, aux)`` where ``aux`` carries whatever
    intermediates ``gradient(x, aux)`` can reuse (pass None if there is
    nothing to share).  The gradient must be zero on constrained entries;
    iterates then never touch them.
    """
    trace = MinimizeTrace()
    x = x0.copy()
    fx, aux = evaluate(x)
    g = gradient(x, aux)
    gg = _rdot(g, g)
    if gg == 0.0:
        trace.converged = True
        trace.message = "gradient identically zero at the starting point"
        trace.record(fx, 0.0, 0.0)
        return x, trace
    d = -g
    step = params.initial_step
    accepted = 0
    while accepted < params.max_iterations:
        if step < params.step_floor:
            trace.converged = True
            trace.message = f"step size below {params.step_floor:g}"
            break
        dg = _rdot(d, g)
        if dg >= 0.0:
            d = -g  # restart: current direction is not a descent direction
        dnorm = np.sqrt(_rdot(d, d))
        if dnorm == 0.0:
            trace.converged = True
            trace.message = "search direction vanished"
            break
        x_new = x + (step / dnorm) * d
        f_new, aux_new = evaluate(x_new)
        if f_new > fx:
            step *= 0.5
            continue
        x, fx = x_new, f_new
        accepted += 1
        g_new = gradient(x, aux_new)
        gg_new = _rdot(g_new, g_new)
        trace.record(fx, step, float(np.sqrt(gg_new)))
        if gg_new == 0.0:
            trace.converged = True
            trace.message = "gradient vanished"
            break
        beta = max(0.0, _rdot(g_new, g_new - g) / gg)
        d = -g_new + beta * d
        g, gg = g_new, gg_new
    else:
        trace.message = f"iteration cap {params.max_iterations} reached"
    return x, trace
