"""Finite controlled Markov model of the sensing/relaying slot dynamics.

State is the augmented tuple (rho_p, rho_s, P_s; Pd', Ic'): the two queue
utilisations, the secondary power state, and the action applied in the
previous slot.  Actions are (Pd, Ic) pairs on finite grids.  The PU activity
pi_1 is identified with the rho_p state level.

Slot dynamics are a product of independent factors:
  * the four-way sensing outcome drawn from the (pi_1, Pd, Pf) distribution,
  * one-step birth-death moves of rho_p and rho_s whose service
    probabilities are the per-outcome analytical throughputs,
  * an i.i.d. redraw of the power state from its stationary law,
  * the deterministic copy of the applied action into the next state.

Transmit power shapes every cut-off: a transmission radiated at power P_tx
sees an effective cut-off beta * (p_ref / P_tx), and the interference the
secondary imposes on the primary link scales with P_tx / p_ref.  Constrained
(declared-busy) transmissions therefore both survive worse and protect the
primary better when Ic is tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import ChannelParams, QueueParams, SensingTiming, success_probability
from .sensing import SensingConfig, false_alarm_from_detection

__all__ = [
    "StateGrids",
    "ActionGrids",
    "MdpGrids",
    "AugmentedState",
    "ControlAction",
    "CostModel",
    "PowerPolicy",
    "ModelParams",
    "TransitionRow",
    "Violation",
    "ValidationReport",
    "constrained_power",
    "sensing_outcome_distribution",
    "reward",
    "transition",
    "validate",
    "default_state_grids",
    "default_action_grids",
    "truncated_exponential_levels",
    "SpectrumMDP",
    "build_spectrum_mdp",
]


# ---------------------------------------------------------------------------
# grids and parameter bundles


def _as_grid(values: Sequence[float], name: str, lo: float, hi: float,
             lo_open: bool = False, hi_open: bool = False) -> tuple[float, ...]:
    grid = tuple(float(v) for v in values)
    if not grid:
        raise ValueError(f"{name} must be non-empty")
    for a, b in zip(grid, grid[1:]):
        if not a < b:
            raise ValueError(f"{name} must be strictly increasing, got {grid}")
    lo_ok = grid[0] > lo if lo_open else grid[0] >= lo
    hi_ok = grid[-1] < hi if hi_open else grid[-1] <= hi
    if not (lo_ok and hi_ok):
        raise ValueError(f"{name} must lie within ({lo}, {hi}), got {grid}")
    return grid


@dataclass(frozen=True)
class StateGrids:
    """Quantisation levels of the environment coordinates."""

    rho_p_levels: tuple[float, ...]
    rho_s_levels: tuple[float, ...]
    p_s_levels: tuple[float, ...]
    p_s_stationary: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho_p_levels", _as_grid(self.rho_p_levels, "rho_p_levels", 0.0, 1.0, hi_open=True))
        object.__setattr__(self, "rho_s_levels", _as_grid(self.rho_s_levels, "rho_s_levels", 0.0, 1.0, hi_open=True))
        object.__setattr__(self, "p_s_levels", _as_grid(self.p_s_levels, "p_s_levels", 0.0, math.inf, lo_open=True))
        probs = tuple(float(p) for p in self.p_s_stationary)
        object.__setattr__(self, "p_s_stationary", probs)
        if len(probs) != len(self.p_s_levels):
            raise ValueError("p_s_stationary must match p_s_levels in length")
        if any(p < 0.0 for p in probs):
            raise ValueError("p_s_stationary entries must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"p_s_stationary must sum to 1, got {sum(probs)}")


@dataclass(frozen=True)
class ActionGrids:
    """Control grids: detection probabilities and interference caps (watts)."""

    pd_levels: tuple[float, ...]
    ic_levels: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "pd_levels", _as_grid(self.pd_levels, "pd_levels", 0.0, 1.0))
        object.__setattr__(self, "ic_levels", _as_grid(self.ic_levels, "ic_levels", 0.0, math.inf, lo_open=True))

    @property
    def n_actions(self) -> int:
        return len(self.pd_levels) * len(self.ic_levels)


@dataclass(frozen=True)
class MdpGrids:
    states: StateGrids
    actions: ActionGrids

    @property
    def shape(self) -> tuple[int, int, int, int, int]:
        s, a = self.states, self.actions
        return (len(s.rho_p_levels), len(s.rho_s_levels), len(s.p_s_levels),
                len(a.pd_levels), len(a.ic_levels))

    @property
    def n_states(self) -> int:
        n = 1
        for dim in self.shape:
            n *= dim
        return n


@dataclass(frozen=True)
class AugmentedState:
    """Grid indices of (rho_p, rho_s, P_s; previous Pd, previous Ic)."""

    rho_p_idx: int
    rho_s_idx: int
    p_s_idx: int
    prev_pd_idx: int
    prev_ic_idx: int

    def check(self, grids: MdpGrids) -> None:
        shape = grids.shape
        idx = (self.rho_p_idx, self.rho_s_idx, self.p_s_idx, self.prev_pd_idx, self.prev_ic_idx)
        for i, (k, n) in enumerate(zip(idx, shape)):
            if not 0 <= k < n:
                raise ValueError(f"state index {idx} out of range for grid shape {shape} (axis {i})")

    def flat_index(self, grids: MdpGrids) -> int:
        _, n_rs, n_ps, n_pd, n_ic = grids.shape
        return (((self.rho_p_idx * n_rs + self.rho_s_idx) * n_ps + self.p_s_idx)
                * n_pd + self.prev_pd_idx) * n_ic + self.prev_ic_idx


def state_from_flat(index: int, grids: MdpGrids) -> AugmentedState:
    n_rp, n_rs, n_ps, n_pd, n_ic = grids.shape
    if not 0 <= index < grids.n_states:
        raise ValueError(f"flat state index {index} out of range")
    index, ic = divmod(index, n_ic)
    index, pd = divmod(index, n_pd)
    index, ps = divmod(index, n_ps)
    rp, rs = divmod(index, n_rs)
    return AugmentedState(rp, rs, ps, pd, ic)


@dataclass(frozen=True)
class ControlAction:
    pd_idx: int
    ic_idx: int

    def check(self, grids: MdpGrids) -> None:
        if not 0 <= self.pd_idx < len(grids.actions.pd_levels):
            raise ValueError(f"pd_idx {self.pd_idx} out of range")
        if not 0 <= self.ic_idx < len(grids.actions.ic_levels):
            raise ValueError(f"ic_idx {self.ic_idx} out of range")

    def flat_index(self, grids: MdpGrids) -> int:
        return self.pd_idx * len(grids.actions.ic_levels) + self.ic_idx


@dataclass(frozen=True)
class CostModel:
    """Linear per-slot control costs: s_const * Pd and c_const * Ps(1)."""

    s_const: float = 2.0
    c_const: float = 2.0

    def __post_init__(self) -> None:
        if self.s_const < 0.0 or self.c_const < 0.0:
            raise ValueError("cost constants must be non-negative")


@dataclass(frozen=True)
class PowerPolicy:
    """Average power budget and the mean gain toward the primary receiver.

    p_ref is the radiated power at which the configured cut-offs and the
    configured interference penalty hold exactly; it defaults to p_av.
    """

    p_av: float
    mean_g_sp: float = 1.0
    p_ref: float | None = None

    def __post_init__(self) -> None:
        if self.p_av <= 0.0:
            raise ValueError(f"p_av must be positive, got {self.p_av}")
        if self.mean_g_sp <= 0.0:
            raise ValueError(f"mean_g_sp must be positive, got {self.mean_g_sp}")
        if self.p_ref is not None and self.p_ref <= 0.0:
            raise ValueError(f"p_ref must be positive, got {self.p_ref}")

    @property
    def reference_power(self) -> float:
        return self.p_av if self.p_ref is None else self.p_ref


@dataclass(frozen=True)
class ModelParams:
    """All physical and queueing constants needed by the slot model."""

    channel: ChannelParams
    queues: QueueParams
    timing: SensingTiming
    sensing: SensingConfig
    power: PowerPolicy


@dataclass(frozen=True)
class TransitionRow:
    """Sparse one-step distribution: parallel lists of states and probabilities."""

    states: tuple[AugmentedState, ...]
    probabilities: tuple[float, ...]

    def total(self) -> float:
        return sum(self.probabilities)


# ---------------------------------------------------------------------------
# elementary operations


def constrained_power(pp: PowerPolicy, ic: float) -> float:
    """Transmit power allowed when the channel is declared busy.

    The interference cap ic (watts at the primary receiver) divided by the
    mean secondary-to-primary gain bounds the radiated power; the average
    budget p_av caps it from above.
    """
    if ic <= 0.0:
        raise ValueError(f"ic must be positive, got {ic}")
    return min(pp.p_av, ic / pp.mean_g_sp)


def sensing_outcome_distribution(pi1: float, pd: float, pf: float) -> np.ndarray:
    """Probabilities of the four sensing outcomes.

    Order: [false alarm, no false alarm, missed detection, detection],
    i.e. pi_0*Pf, pi_0*(1-Pf), pi_1*(1-Pd), pi_1*Pd.
    """
    for name, val in (("pi1", pi1), ("pd", pd), ("pf", pf)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must be a probability in [0, 1], got {val}")
    pi0 = 1.0 - pi1
    return np.array([pi0 * pf, pi0 * (1.0 - pf), pi1 * (1.0 - pd), pi1 * pd])


# outcome attribute tables aligned with sensing_outcome_distribution's order
_OUTCOME_BUSY = np.array([0.0, 0.0, 1.0, 1.0])
_OUTCOME_DECLARED_BUSY = np.array([1.0, 0.0, 0.0, 1.0])


def _scaled_beta(beta: float, p_ref: float, p_tx: float) -> float:
    """Effective cut-off of a transmission radiated at p_tx."""
    return beta * (p_ref / p_tx)


def _outcome_kernel(pi1: float, rho_s: float, p_s: float, pd: float, ic: float,
                    params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-outcome probabilities and queue service probabilities.

    Returns (outcome distribution, rho_p service probs, rho_s service probs),
    each a 4-vector over the canonical outcome order, for a slot that starts
    at utilisations (pi1, rho_s), power state p_s, and applies (pd, ic).
    """
    ch, q, pw = params.channel, params.queues, params.power
    pf = false_alarm_from_detection(pd, params.sensing)
    dist = sensing_outcome_distribution(pi1, pd, pf)

    p_ref = pw.reference_power
    p_s1 = constrained_power(pw, ic)
    p_tx = np.where(_OUTCOME_DECLARED_BUSY == 1.0, p_s1, p_s)
    interf = ch.gamma_ps * _OUTCOME_BUSY
    beta_su = ch.beta_s * (p_ref / p_tx)

    su_succ = np.exp(-beta_su * (1.0 + interf) / ch.gamma_s)
    sp_succ = np.exp(-beta_su * (1.0 + interf) / ch.gamma_sp)
    # Interference-constrained transmissions sit far below the power states
    # by construction, so only full-power slots degrade the primary link.
    p_seen = np.where(_OUTCOME_DECLARED_BUSY == 1.0, 0.0, p_s)
    pu_direct = np.exp(-ch.beta_p * (1.0 + ch.gamma_sp * p_seen / p_ref) / ch.gamma_p)

    no_outage = success_probability(ch.beta_p, ch.gamma_p)
    frame = params.timing.data_fraction

    srv_s = frame * dist * su_succ * rho_s * no_outage
    srv_p = pu_direct * pi1 + dist * sp_succ * q.rho_ps * (1.0 - no_outage)
    return dist, srv_p, srv_s


def _birth_death(idx: int, n_levels: int, lam: float, p_srv: float) -> tuple[float, float, float]:
    """(down, stay, up) probabilities of one quantised queue step.

    An arrival without service moves the level up, a service without arrival
    moves it down; moves off the grid fold into staying.
    """
    up = lam * (1.0 - p_srv)
    down = p_srv * (1.0 - lam)
    if idx == 0:
        down = 0.0
    if idx == n_levels - 1:
        up = 0.0
    return down, 1.0 - up - down, up


def reward(state: AugmentedState, grids: MdpGrids, params: ModelParams,
           costs: CostModel) -> float:
    """Immediate reward of an augmented state.

    Expected secondary throughput of the slot (the outcome-weighted
    closed-form branch values, with the state's rho_s as the backlog
    probability and the stored previous action fixing Pd, Pf and Ic),
    minus the detection cost s*Pd and the interference cost c*Ps(1).
    """
    state.check(grids)
    s = grids.states
    a = grids.actions
    pi1 = s.rho_p_levels[state.rho_p_idx]
    rho_s = s.rho_s_levels[state.rho_s_idx]
    p_s = s.p_s_levels[state.p_s_idx]
    pd = a.pd_levels[state.prev_pd_idx]
    ic = a.ic_levels[state.prev_ic_idx]

    _, _, srv_s = _outcome_kernel(pi1, rho_s, p_s, pd, ic, params)
    g = float(np.sum(srv_s))
    psi = costs.s_const * pd
    phi = costs.c_const * constrained_power(params.power, ic)
    return g - psi - phi


def transition(state: AugmentedState, action: ControlAction, grids: MdpGrids,
               params: ModelParams) -> TransitionRow:
    """One-step distribution over next augmented states under `action`.

    The row is the product of the sensing-outcome distribution, the two
    birth-death factors (whose service probabilities are the per-outcome
    analytical throughputs) and the stationary power redraw; the applied
    action becomes the next state's previous-action field.  Zero-probability
    branches are dropped.
    """
    state.check(grids)
    action.check(grids)
    s = grids.states
    a = grids.actions
    n_rp = len(s.rho_p_levels)
    n_rs = len(s.rho_s_levels)
    pi1 = s.rho_p_levels[state.rho_p_idx]
    rho_s = s.rho_s_levels[state.rho_s_idx]
    p_s = s.p_s_levels[state.p_s_idx]
    pd = a.pd_levels[action.pd_idx]
    ic = a.ic_levels[action.ic_idx]

    dist, srv_p, srv_s = _outcome_kernel(pi1, rho_s, p_s, pd, ic, params)

    acc: dict[tuple[int, int, int], float] = {}
    lam_p, lam_s = params.queues.lambda_p, params.queues.lambda_s
    for k in range(4):
        if dist[k] == 0.0:
            continue
        bd_p = _birth_death(state.rho_p_idx, n_rp, lam_p, float(srv_p[k]))
        bd_s = _birth_death(state.rho_s_idx, n_rs, lam_s, float(srv_s[k]))
        for dp, w_p in zip((-1, 0, 1), bd_p):
            if w_p == 0.0:
                continue
            for ds, w_s in zip((-1, 0, 1), bd_s):
                if w_s == 0.0:
                    continue
                base = dist[k] * w_p * w_s
                for ps_next, w_ps in enumerate(s.p_s_stationary):
                    if w_ps == 0.0:
                        continue
                    key = (state.rho_p_idx + dp, state.rho_s_idx + ds, ps_next)
                    acc[key] = acc.get(key, 0.0) + base * w_ps

    ordered = sorted(acc.items())
    states = tuple(
        AugmentedState(rp, rs, ps, action.pd_idx, action.ic_idx)
        for (rp, rs, ps) in (k for k, _ in ordered)
    )
    probs = tuple(p for _, p in ordered)
    return TransitionRow(states=states, probabilities=probs)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    constraint: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "all constraints satisfied"
        return "; ".join(f"[{v.constraint}] {v.message}" for v in self.violations)


def _queue_triples(q: QueueParams | Mapping[str, float]) -> Iterable[tuple[str, float, float]]:
    get = (lambda k: getattr(q, k)) if isinstance(q, QueueParams) else (lambda k: float(q[k]))
    for lam, mu in (("lambda_s", "mu_s_max"), ("lambda_p", "mu_p_max"), ("lambda_ps", "mu_ps_max")):
        yield lam, get(lam), get(mu)


def validate(params: ModelParams | None = None, grids: MdpGrids | None = None,
             q: QueueParams | Mapping[str, float] | None = None) -> ValidationReport:
    """Check the operating constraints; report violations instead of raising.

    Covers queue stability (constraint 1), the power-state range against the
    budget (constraint 2), the detection grid range (constraint 3) and the
    boundedness of the interference grid (constraint 4).  `q` overrides the
    queue parameters inside `params`, and may be a raw mapping so that
    configurations too inconsistent to construct can still be reported on.
    """
    found: list[Violation] = []
    if q is None and params is not None:
        q = params.queues
    if q is not None:
        for lam_name, lam, mu in _queue_triples(q):
            if lam >= mu:
                found.append(Violation(
                    "constraint 1 (queue stability)",
                    f"{lam_name}={lam} must be below its service capacity {mu}"))
            if not 0.0 <= lam <= 1.0:
                found.append(Violation(
                    "constraint 1 (queue stability)",
                    f"{lam_name}={lam} is not a per-slot arrival probability"))
    if grids is not None:
        if params is not None:
            p_av = params.power.p_av
            for lvl in grids.states.p_s_levels:
                if not 0.0 < lvl <= p_av:
                    found.append(Violation(
                        "constraint 2 (power range)",
                        f"power state level {lvl} outside (0, p_av={p_av}]"))
        for pd in grids.actions.pd_levels:
            if not 0.0 <= pd <= 1.0:
                found.append(Violation(
                    "constraint 3 (detection range)",
                    f"pd level {pd} outside [0, 1]"))
        ic = grids.actions.ic_levels
        if any(not math.isfinite(v) or v <= 0.0 for v in ic):
            found.append(Violation(
                "constraint 4 (interference range)",
                f"ic levels must be positive and finite, got {ic}"))
    return ValidationReport(violations=tuple(found))


# ---------------------------------------------------------------------------
# default grids


def truncated_exponential_levels(mean: float, cap: float, n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Equiprobable quantised levels of an Exp(mean) law truncated at cap.

    Returns (levels, probabilities): the conditional mean of each of the n
    equal-probability cells, which keeps the levels inside (0, cap].
    """
    if mean <= 0.0 or cap <= 0.0 or n < 1:
        raise ValueError("mean, cap and n must be positive")
    z = 1.0 - math.exp(-cap / mean)
    bounds = [-mean * math.log(1.0 - z * k / n) for k in range(n + 1)]
    levels = []
    for a, b in zip(bounds, bounds[1:]):
        # E[X ; a<X<b] / P(a<X<b) for X ~ Exp(mean)
        num = (a + mean) * math.exp(-a / mean) - (b + mean) * math.exp(-b / mean)
        den = math.exp(-a / mean) - math.exp(-b / mean)
        levels.append(num / den)
    return tuple(levels), tuple(1.0 / n for _ in range(n))


def default_state_grids(p_av: float, n_power_levels: int = 4) -> StateGrids:
    rho = tuple(i / 10.0 for i in range(10))
    levels, probs = truncated_exponential_levels(p_av, p_av, n_power_levels)
    return StateGrids(rho_p_levels=rho, rho_s_levels=rho,
                      p_s_levels=levels, p_s_stationary=probs)


def default_action_grids() -> ActionGrids:
    pd = tuple(i / 10.0 for i in range(11))
    ic = tuple(10.0 ** (db / 10.0) for db in range(-15, 6))
    return ActionGrids(pd_levels=pd, ic_levels=ic)


# ---------------------------------------------------------------------------
# compiled model for the solver


@dataclass
class SpectrumMDP:
    """Precompiled tensors of the slot model, indexed on the grid axes.

    Axis letters used in comments: r=rho_p, u=rho_s, v=P_s, a=flat action,
    x=sensing outcome, m=move (-1, 0, +1).
    """

    grids: MdpGrids
    params: ModelParams
    costs: CostModel
    reward_uses_chosen_action: bool
    pf_of_pd: np.ndarray          # (n_pd,)
    ps1_of_ic: np.ndarray         # (n_ic,)
    action_cost: np.ndarray       # (A,)
    outcome_dist: np.ndarray      # (r, n_pd, x)
    su_succ: np.ndarray           # (v, n_ic, x)
    sp_succ: np.ndarray           # (v, n_ic, x)
    pu_direct: np.ndarray         # (v, n_ic, x)
    srv_p: np.ndarray             # (r, v, A, x)
    srv_s: np.ndarray             # (r, u, v, A, x)
    g_state: np.ndarray           # (S,) throughput part of the reward at prev action
    g_action: np.ndarray          # (r, u, v, A) throughput at a hypothetical action
    reward_vec: np.ndarray        # (S,) g_state - costs at prev action
    field_order: tuple[str, ...] = field(default=(
        "rho_p", "rho_s", "p_s", "prev_pd", "prev_ic"))

    @property
    def n_states(self) -> int:
        return self.grids.n_states

    @property
    def n_actions(self) -> int:
        return self.grids.actions.n_actions

    def state_reward(self, state: AugmentedState) -> float:
        return float(self.reward_vec[state.flat_index(self.grids)])

    def transition_row(self, state: AugmentedState, action: ControlAction) -> TransitionRow:
        return transition(state, action, self.grids, self.params)


def build_spectrum_mdp(grids: MdpGrids, params: ModelParams, costs: CostModel,
                       reward_uses_chosen_action: bool = False) -> SpectrumMDP:
    """Vectorised construction of every tensor the solver needs.

    The arrays here and the scalar `transition`/`reward` operations compute
    the same quantities; tests cross-check them entry by entry.
    """
    sg, ag = grids.states, grids.actions
    n_rp, n_rs, n_ps, n_pd, n_ic = grids.shape
    ch, qp, pw = params.channel, params.queues, params.power

    rho_p = np.array(sg.rho_p_levels)
    rho_s = np.array(sg.rho_s_levels)
    p_s = np.array(sg.p_s_levels)
    pd = np.array(ag.pd_levels)
    ic = np.array(ag.ic_levels)

    pf = np.array([false_alarm_from_detection(v, params.sensing) for v in pd])
    ps1 = np.array([constrained_power(pw, v) for v in ic])

    # outcome distribution per (rho_p, pd): order FA, NFA, MD, D
    pi1 = rho_p[:, None]
    dist = np.stack([
        (1.0 - pi1) * pf[None, :],
        (1.0 - pi1) * (1.0 - pf)[None, :],
        pi1 * (1.0 - pd)[None, :],
        pi1 * pd[None, :],
    ], axis=-1)                                           # (r, n_pd, x)

    # per-outcome radiated power: declared-idle -> power state, declared-busy -> P_s^(1)
    p_ref = pw.reference_power
    p_tx = np.where(_OUTCOME_DECLARED_BUSY[None, None, :] == 1.0,
                    ps1[None, :, None], p_s[:, None, None])      # (v, n_ic, x)
    interf = 1.0 + ch.gamma_ps * _OUTCOME_BUSY[None, None, :]
    beta_su = ch.beta_s * (p_ref / p_tx)
    su_succ = np.exp(-beta_su * interf / ch.gamma_s)
    sp_succ = np.exp(-beta_su * interf / ch.gamma_sp)
    # Same clamp as the scalar kernel: declared-busy slots radiate far below
    # the power states, so only full-power slots degrade the primary link.
    p_seen = np.where(_OUTCOME_DECLARED_BUSY[None, None, :] == 1.0,
                      np.zeros_like(p_tx), p_s[:, None, None])
    pu_direct = np.exp(-ch.beta_p * (1.0 + ch.gamma_sp * p_seen / p_ref) / ch.gamma_p)

    no_outage = success_probability(ch.beta_p, ch.gamma_p)
    frame = params.timing.data_fraction

    # service probabilities per outcome, at every (state coords, action)
    dist_a = dist[:, :, None, :].repeat(n_ic, axis=2).reshape(n_rp, n_pd * n_ic, 4)
    su_a = np.tile(su_succ[:, None, :, :], (1, n_pd, 1, 1)).reshape(n_ps, n_pd * n_ic, 4)
    sp_a = np.tile(sp_succ[:, None, :, :], (1, n_pd, 1, 1)).reshape(n_ps, n_pd * n_ic, 4)
    pu_a = np.tile(pu_direct[:, None, :, :], (1, n_pd, 1, 1)).reshape(n_ps, n_pd * n_ic, 4)

    srv_p = (pu_a[None, :, :, :] * rho_p[:, None, None, None]
             + dist_a[:, None, :, :] * sp_a[None, :, :, :] * qp.rho_ps * (1.0 - no_outage))
    # (r, v, A, x)
    srv_s = (frame * dist_a[:, None, None, :, :] * su_a[None, None, :, :, :]
             * rho_s[None, :, None, None, None] * no_outage)
    # (r, u, v, A, x)

    # throughput part of the reward for any (state coords, action) combination;
    # flattened over the prev-action axes it is exactly the per-state g term
    g_action = srv_s.sum(axis=-1)                         # (r, u, v, A)
    g_state = g_action.reshape(-1)

    action_cost = (costs.s_const * np.repeat(pd, n_ic)
                   + costs.c_const * np.tile(ps1, n_pd))  # (A,)
    reward_vec = g_state - np.tile(action_cost, n_rp * n_rs * n_ps)

    return SpectrumMDP(
        grids=grids, params=params, costs=costs,
        reward_uses_chosen_action=reward_uses_chosen_action,
        pf_of_pd=pf, ps1_of_ic=ps1, action_cost=action_cost,
        outcome_dist=dist, su_succ=su_succ, sp_succ=sp_succ, pu_direct=pu_direct,
        srv_p=srv_p, srv_s=srv_s,
        g_state=np.ascontiguousarray(g_state),
        g_action=np.ascontiguousarray(g_action),
        reward_vec=np.ascontiguousarray(reward_vec),
    )
