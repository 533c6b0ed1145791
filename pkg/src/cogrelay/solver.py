"""Discounted value iteration over the augmented slot model.

Two routes to the same fixed point live here.  `value_iteration` exploits
the product structure of the transition kernel (the continuation value of a
state depends on its previous-action coordinates only through the applied
action, so one backup touches each (rho_p, rho_s, P_s) block once).
`value_iteration_dense` is a plain matrix-based solver for any finite MDP
given as explicit arrays; tests hold the two against each other and against
brute-force policy enumeration on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .mdp import ControlAction, SpectrumMDP, state_from_flat

__all__ = [
    "SolverConfig",
    "ValueTable",
    "PolicyTable",
    "LookupTable",
    "value_iteration",
    "evaluate_policy",
    "evaluate_policy_exact",
    "extract_lookup_table",
    "value_iteration_dense",
    "evaluate_policy_dense",
    "materialize_dense",
]

Mode = Literal["joint", "fixed_ic", "fixed_pd"]


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule of the fixed-point iteration."""

    epsilon: float = 1e-6
    max_iters: int = 2000
    discount: float = 0.9

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")


@dataclass
class ValueTable:
    """Converged (or best-so-far) state values and the iteration record."""

    values: np.ndarray
    iterations: int
    converged: bool
    residuals: list[float] = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


@dataclass
class PolicyTable:
    """Greedy action per state, with the action-set restriction it was built under."""

    actions: np.ndarray            # flat action index per state
    mode: Mode = "joint"
    pinned_pd_idx: int | None = None
    pinned_ic_idx: int | None = None

    def pd_idx(self, n_ic: int) -> np.ndarray:
        return self.actions // n_ic

    def ic_idx(self, n_ic: int) -> np.ndarray:
        return self.actions % n_ic


def _allowed_mask(mdp: SpectrumMDP, mode: Mode, pinned: int | None) -> np.ndarray:
    n_pd = len(mdp.grids.actions.pd_levels)
    n_ic = len(mdp.grids.actions.ic_levels)
    mask = np.ones(n_pd * n_ic, dtype=bool)
    if mode == "joint":
        if pinned is not None:
            raise ValueError("joint mode takes no pinned index")
        return mask
    if pinned is None:
        raise ValueError(f"mode {mode!r} requires a pinned grid index")
    if mode == "fixed_ic":
        if not 0 <= pinned < n_ic:
            raise ValueError(f"pinned ic index {pinned} out of range")
        mask &= (np.arange(n_pd * n_ic) % n_ic) == pinned
    elif mode == "fixed_pd":
        if not 0 <= pinned < n_pd:
            raise ValueError(f"pinned pd index {pinned} out of range")
        mask &= (np.arange(n_pd * n_ic) // n_ic) == pinned
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return mask


class _FactoredBackup:
    """Iteration-independent tensors of the factored Bellman operator.

    K[mp, ms, r, u, v, a] aggregates the outcome distribution with both
    birth-death factors for a (rho_p move, rho_s move) pair, so a backup is
    nine shifted tensor contractions against the power-averaged value table.
    """

    def __init__(self, mdp: SpectrumMDP):
        self.mdp = mdp
        n_rp, n_rs, n_ps, n_pd, n_ic = mdp.grids.shape
        self.shape = (n_rp, n_rs, n_ps, n_pd * n_ic)
        lam_p = mdp.params.queues.lambda_p
        lam_s = mdp.params.queues.lambda_s

        # outcome distribution expanded over the flat action axis: (r, A, x)
        dist = np.repeat(mdp.outcome_dist, n_ic, axis=1)

        up_p = lam_p * (1.0 - mdp.srv_p)                  # (r, v, A, x)
        dn_p = mdp.srv_p * (1.0 - lam_p)
        up_s = lam_s * (1.0 - mdp.srv_s)                  # (r, u, v, A, x)
        dn_s = mdp.srv_s * (1.0 - lam_s)

        bdp = np.empty((3,) + mdp.srv_p.shape)
        bdp[0], bdp[2] = dn_p, up_p
        bdp[0][0, ...] = 0.0
        bdp[2][n_rp - 1, ...] = 0.0
        bdp[1] = 1.0 - bdp[0] - bdp[2]

        bds = np.empty((3,) + mdp.srv_s.shape)
        bds[0], bds[2] = dn_s, up_s
        bds[0][:, 0, ...] = 0.0
        bds[2][:, n_rs - 1, ...] = 0.0
        bds[1] = 1.0 - bds[0] - bds[2]

        qbp = dist[None, :, None, :, :] * bdp             # (mp, r, v, A, x)
        self.kernel = np.einsum("mrvax,nruvax->mnruva", qbp, bds)
        self.pstat = np.array(mdp.grids.states.p_s_stationary)

    def continuation(self, values: np.ndarray) -> np.ndarray:
        """E[J(next) | r, u, v, a], shape (r, u, v, A)."""
        n_rp, n_rs, n_ps, n_a = self.shape
        j = values.reshape(n_rp, n_rs, n_ps, n_a)
        w = np.einsum("v,ruva->rua", self.pstat, j)
        wp = np.zeros((n_rp + 2, n_rs + 2, n_a))
        wp[1:-1, 1:-1, :] = w
        cont = np.zeros((n_rp, n_rs, n_ps, n_a))
        for mp in range(3):
            for ms in range(3):
                shifted = wp[mp:mp + n_rp, ms:ms + n_rs, :]
                cont += self.kernel[mp, ms] * shifted[:, :, None, :]
        return cont


def _base_rewards(mdp: SpectrumMDP) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-(block, action) reward term and (for the default convention) the
    per-state throughput that is added after maximisation."""
    if mdp.reward_uses_chosen_action:
        return mdp.g_action - mdp.action_cost, None
    n_rp, n_rs, n_ps, _, _ = mdp.grids.shape
    base = np.broadcast_to(-mdp.action_cost,
                           (n_rp, n_rs, n_ps, mdp.n_actions))
    return base, mdp.g_state


def value_iteration(mdp: SpectrumMDP, cfg: SolverConfig, mode: Mode = "joint",
                    pinned: int | None = None) -> tuple[ValueTable, PolicyTable]:
    """Synchronous value iteration from the per-state reward vector.

    Stops when the sup-norm residual drops to cfg.epsilon; hitting
    cfg.max_iters first is reported through converged=False rather than an
    exception.  Ties in the maximisation resolve to the lexicographically
    lowest (pd index, ic index) pair.
    """
    backup = _FactoredBackup(mdp)
    mask = _allowed_mask(mdp, mode, pinned)
    base, g_add = _base_rewards(mdp)
    neg = np.where(mask, 0.0, -np.inf)

    values = mdp.reward_vec.copy()
    residuals: list[float] = []
    converged = False
    iterations = 0
    n_rp, n_rs, n_ps, n_a = backup.shape

    for _ in range(cfg.max_iters):
        q = base + cfg.discount * backup.continuation(values) + neg
        best = q.max(axis=-1)
        if g_add is None:
            new_values = np.broadcast_to(
                best[..., None], (n_rp, n_rs, n_ps, n_a)).reshape(-1)
        else:
            new_values = np.repeat(best.reshape(-1), n_a) + g_add
        new_values = np.ascontiguousarray(new_values)
        residual = float(np.max(np.abs(new_values - values)))
        residuals.append(residual)
        values = new_values
        iterations += 1
        if residual <= cfg.epsilon:
            converged = True
            break

    q = base + cfg.discount * backup.continuation(values) + neg
    greedy = q.argmax(axis=-1)
    actions = np.broadcast_to(greedy[..., None],
                              (n_rp, n_rs, n_ps, n_a)).reshape(-1)
    actions = np.ascontiguousarray(actions)

    vt = ValueTable(values=values, iterations=iterations,
                    converged=converged, residuals=residuals)
    pt = PolicyTable(actions=actions, mode=mode,
                     pinned_pd_idx=pinned if mode == "fixed_pd" else None,
                     pinned_ic_idx=pinned if mode == "fixed_ic" else None)
    return vt, pt


def evaluate_policy(mdp: SpectrumMDP, policy: PolicyTable | np.ndarray,
                    cfg: SolverConfig,
                    reward: Literal["full", "throughput"] = "full") -> ValueTable:
    """Fixed-point evaluation of a stationary policy.

    With reward="throughput" the control costs are dropped and the slot
    reward is the expected secondary throughput under the policy's action;
    this is what the operating-point sweeps report.
    """
    actions = policy.actions if isinstance(policy, PolicyTable) else np.asarray(policy)
    if actions.shape != (mdp.n_states,):
        raise ValueError(f"policy must assign an action to each of {mdp.n_states} states")
    if actions.min() < 0 or actions.max() >= mdp.n_actions:
        raise ValueError("policy contains out-of-range action indices")

    backup = _FactoredBackup(mdp)
    n_rp, n_rs, n_ps, n_a = backup.shape
    block_idx = np.repeat(np.arange(n_rp * n_rs * n_ps), n_a)
    ri, ui, vi = np.unravel_index(block_idx, (n_rp, n_rs, n_ps))

    if reward == "throughput":
        r_pi = mdp.g_action[ri, ui, vi, actions]
    elif reward == "full":
        if mdp.reward_uses_chosen_action:
            r_pi = mdp.g_action[ri, ui, vi, actions] - mdp.action_cost[actions]
        else:
            r_pi = mdp.g_state - mdp.action_cost[actions]
    else:
        raise ValueError(f"unknown reward selector {reward!r}")

    values = r_pi.copy()
    residuals: list[float] = []
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        cont = backup.continuation(values)
        new_values = r_pi + cfg.discount * cont[ri, ui, vi, actions]
        residual = float(np.max(np.abs(new_values - values)))
        residuals.append(residual)
        values = new_values
        iterations += 1
        if residual <= cfg.epsilon:
            converged = True
            break
    return ValueTable(values=values, iterations=iterations,
                      converged=converged, residuals=residuals)


@dataclass
class LookupTable:
    """One row per augmented state: levels, greedy action levels, value."""

    columns: tuple[str, ...]
    rows: np.ndarray               # (n_states, len(columns)) float array

    def row_for(self, flat_index: int) -> np.ndarray:
        return self.rows[flat_index]


LOOKUP_COLUMNS = ("rho_p", "rho_s", "p_s", "prev_pd", "prev_ic",
                  "opt_pd", "opt_ic", "value")


def extract_lookup_table(mdp: SpectrumMDP, value_table: ValueTable,
                         policy_table: PolicyTable) -> LookupTable:
    """Flatten values and greedy actions into a per-state operating table."""
    grids = mdp.grids
    n_states = mdp.n_states
    n_ic = len(grids.actions.ic_levels)
    sg, ag = grids.states, grids.actions

    flat = np.arange(n_states)
    rem, ic_i = np.divmod(flat, n_ic)
    rem, pd_i = np.divmod(rem, len(ag.pd_levels))
    rem, ps_i = np.divmod(rem, len(sg.p_s_levels))
    rp_i, rs_i = np.divmod(rem, len(sg.rho_s_levels))

    pd_opt = policy_table.pd_idx(n_ic)
    ic_opt = policy_table.ic_idx(n_ic)

    rows = np.column_stack([
        np.array(sg.rho_p_levels)[rp_i],
        np.array(sg.rho_s_levels)[rs_i],
        np.array(sg.p_s_levels)[ps_i],
        np.array(ag.pd_levels)[pd_i],
        np.array(ag.ic_levels)[ic_i],
        np.array(ag.pd_levels)[pd_opt],
        np.array(ag.ic_levels)[ic_opt],
        value_table.values,
    ])
    return LookupTable(columns=LOOKUP_COLUMNS, rows=rows)


# ---------------------------------------------------------------------------
# dense route for arbitrary finite MDPs


def value_iteration_dense(transitions: np.ndarray, rewards: np.ndarray,
                          cfg: SolverConfig,
                          initial: np.ndarray | None = None) -> tuple[ValueTable, np.ndarray]:
    """Plain value iteration on explicit (A, S, S) / (S, A) arrays.

    Returns the value table and the greedy action per state (first index on
    ties).  Used as the reference route against the factored solver and by
    the enumeration tests.
    """
    p = np.asarray(transitions, dtype=float)
    r = np.asarray(rewards, dtype=float)
    n_actions, n_states, _ = p.shape
    if r.shape != (n_states, n_actions):
        raise ValueError(f"rewards must have shape {(n_states, n_actions)}, got {r.shape}")

    values = r.max(axis=1) if initial is None else np.asarray(initial, dtype=float).copy()
    residuals: list[float] = []
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        q = r + cfg.discount * np.einsum("ast,t->sa", p, values)
        new_values = q.max(axis=1)
        residual = float(np.max(np.abs(new_values - values)))
        residuals.append(residual)
        values = new_values
        iterations += 1
        if residual <= cfg.epsilon:
            converged = True
            break
    q = r + cfg.discount * np.einsum("ast,t->sa", p, values)
    actions = q.argmax(axis=1)
    return ValueTable(values, iterations, converged, residuals), actions


def evaluate_policy_dense(transitions: np.ndarray, rewards: np.ndarray,
                          actions: np.ndarray, discount: float) -> np.ndarray:
    """Exact J_pi by solving the linear system (I - d P_pi) J = r_pi."""
    p = np.asarray(transitions, dtype=float)
    r = np.asarray(rewards, dtype=float)
    a = np.asarray(actions)
    n_states = p.shape[1]
    p_pi = p[a, np.arange(n_states), :]
    r_pi = r[np.arange(n_states), a]
    return np.linalg.solve(np.eye(n_states) - discount * p_pi, r_pi)


def evaluate_policy_exact(mdp: SpectrumMDP, policy: PolicyTable | np.ndarray,
                          discount: float,
                          reward: Literal["full", "throughput"] = "full") -> np.ndarray:
    """Exact J_pi via a linear solve instead of fixed-point iteration.

    Materialises the policy's S x S transition matrix, so this is only for
    small grids (the operating-point sweeps pin a single action, which keeps
    S at a few hundred).  The payoff is that J carries no iteration-tail
    error, which matters when comparing sweep points that differ by less
    than a value-iteration tolerance.
    """
    actions = policy.actions if isinstance(policy, PolicyTable) else np.asarray(policy)
    if actions.shape != (mdp.n_states,):
        raise ValueError(f"policy must assign an action to each of {mdp.n_states} states")
    n_states = mdp.n_states
    n_ic = len(mdp.grids.actions.ic_levels)

    block = np.repeat(np.arange(n_states // mdp.n_actions), mdp.n_actions)
    ri, ui, vi = np.unravel_index(block, mdp.grids.shape[:3])
    if reward == "throughput":
        r_pi = mdp.g_action[ri, ui, vi, actions]
    elif reward == "full":
        if mdp.reward_uses_chosen_action:
            r_pi = mdp.g_action[ri, ui, vi, actions] - mdp.action_cost[actions]
        else:
            r_pi = mdp.g_state - mdp.action_cost[actions]
    else:
        raise ValueError(f"unknown reward selector {reward!r}")

    p_pi = np.zeros((n_states, n_states))
    for s in range(n_states):
        a = int(actions[s])
        row = mdp.transition_row(state_from_flat(s, mdp.grids),
                                 ControlAction(a // n_ic, a % n_ic))
        for nxt, prob in zip(row.states, row.probabilities):
            p_pi[s, nxt.flat_index(mdp.grids)] += prob
    return np.linalg.solve(np.eye(n_states) - discount * p_pi, r_pi)


def materialize_dense(mdp: SpectrumMDP) -> tuple[np.ndarray, np.ndarray]:
    """Expand a (small) slot model into explicit dense arrays.

    Intended for cross-checks; the row count grows as the product of all
    five grid sizes, so keep the grids tiny.
    """
    n_states, n_actions = mdp.n_states, mdp.n_actions
    n_ic = len(mdp.grids.actions.ic_levels)
    p = np.zeros((n_actions, n_states, n_states))
    r = np.empty((n_states, n_actions))
    base, g_add = _base_rewards(mdp)
    base_flat = np.broadcast_to(
        base[..., None, :],
        mdp.grids.shape[:3] + (mdp.grids.shape[3] * mdp.grids.shape[4], n_actions),
    ).reshape(n_states, n_actions)
    r[:] = base_flat
    if g_add is not None:
        r += g_add[:, None]
    for s in range(n_states):
        state = state_from_flat(s, mdp.grids)
        for a in range(n_actions):
            action = ControlAction(a // n_ic, a % n_ic)
            row = mdp.transition_row(state, action)
            for nxt, prob in zip(row.states, row.probabilities):
                p[a, s, nxt.flat_index(mdp.grids)] += prob
    return p, r
