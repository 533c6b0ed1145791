"""Suite-wide instrumentation.

Every solver run anywhere in the tests must contract: the sup-norm residual
sequence has to satisfy r_{k+1} <= discount * r_k + 1e-12.  Rather than
trusting each test to check this, the solver entry points are wrapped here
once, before any test module imports them, so a violating run fails loudly
at the call site no matter which test triggered it.

The acceptance tests additionally push one summary line each into
ACCEPTANCE_LINES; a terminal-summary hook prints them at the end of the run
so the report survives pytest's output capturing.
"""

from __future__ import annotations

import numpy as np

import cogrelay
import cogrelay.cli
import cogrelay.solver

CONTRACTION_SLACK = 1e-12

RECORDED_RUNS: list[tuple[str, float, int]] = []
ACCEPTANCE_LINES: list[str] = []

_real_value_iteration = cogrelay.solver.value_iteration
_real_value_iteration_dense = cogrelay.solver.value_iteration_dense
_real_evaluate_policy = cogrelay.solver.evaluate_policy


def assert_contraction(residuals, discount: float, label: str) -> None:
    r = np.asarray(residuals, dtype=float)
    if r.size >= 2:
        worst = float(np.max(r[1:] - discount * r[:-1]))
        assert worst <= CONTRACTION_SLACK, (
            f"contraction violated in {label}: "
            f"max(r_k+1 - {discount} * r_k) = {worst:.3e}")
    RECORDED_RUNS.append((label, discount, int(r.size)))


def _checked_value_iteration(mdp, cfg, mode="joint", pinned=None):
    vt, pt = _real_value_iteration(mdp, cfg, mode=mode, pinned=pinned)
    assert_contraction(vt.residuals, cfg.discount, f"value_iteration[{mode}]")
    return vt, pt


def _checked_value_iteration_dense(transitions, rewards, cfg, initial=None):
    vt, actions = _real_value_iteration_dense(transitions, rewards, cfg, initial)
    assert_contraction(vt.residuals, cfg.discount, "value_iteration_dense")
    return vt, actions


def _checked_evaluate_policy(mdp, policy, cfg, reward="full"):
    vt = _real_evaluate_policy(mdp, policy, cfg, reward=reward)
    assert_contraction(vt.residuals, cfg.discount, "evaluate_policy")
    return vt


for _ns in (cogrelay, cogrelay.solver, cogrelay.cli):
    if hasattr(_ns, "value_iteration"):
        _ns.value_iteration = _checked_value_iteration
    if hasattr(_ns, "value_iteration_dense"):
        _ns.value_iteration_dense = _checked_value_iteration_dense
    if hasattr(_ns, "evaluate_policy"):
        _ns.evaluate_policy = _checked_evaluate_policy


def record_acceptance(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"contraction property checked on {len(RECORDED_RUNS)} solver runs")
