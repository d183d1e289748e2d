"""Worst-case treatment of imperfect eavesdropper CSI.

The inner minimization over bounded channel-estimation errors has a closed
form: raise the eavesdropper's direct-link gain by epsilon and lower every
gain through which it collects interference by epsilon (floored at zero in
rate denominators, signed in the avoidance margin).  The outer problem then
runs through the ordinary alternating pipeline on those effective tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .asm import AsmOptions, SolverReport, _run
from .network import NetworkInstance
from .rates import RateModel


@dataclass(frozen=True)
class RobustView:
    """Effective eavesdropper gain bounds implied by the error budget."""

    inst: NetworkInstance
    g_plus: np.ndarray    # direct-link bound, estimate + epsilon
    g_minus: np.ndarray   # interference bound, max(estimate - epsilon, 0)

    def __post_init__(self):
        if np.any(self.g_plus < self.inst.g_eave_est - 1e-15):
            raise ValueError("g_plus must dominate the estimate")
        if np.any(self.g_minus > self.inst.g_eave_est + 1e-15):
            raise ValueError("g_minus must not exceed the estimate")
        if np.any(self.g_minus < 0):
            raise ValueError("g_minus must be nonnegative")


def build_robust_view(inst: NetworkInstance) -> RobustView:
    """Resolve the inner minimization into elementwise gain bounds."""
    eps = inst.config.epsilon
    return RobustView(
        inst=inst,
        g_plus=inst.g_eave_est + eps,
        g_minus=np.maximum(inst.g_eave_est - eps, 0.0),
    )


def solve_robust(inst: NetworkInstance,
                 options: AsmOptions | None = None) -> SolverReport:
    """Alternating solve of the worst-case surrogate problem.

    The report's main objective fields are the pessimistic surrogate values;
    ``realized_objective``/``realized_secrecy_rate`` re-score the returned
    allocation under the true eavesdropper gains.
    """
    options = options or AsmOptions()
    model = RateModel(inst, "worst_case")
    report = _run(inst, options, model, enforce_c6=True,
                  solver_name="robust")
    true_model = RateModel(inst, "true")
    report.realized_objective = float(
        true_model.epigraph_objective(report.p, report.rho))
    report.realized_secrecy_rate = float(
        true_model.secrecy_sum(report.p, report.rho))
    return report
