"""Boundary points and traces of the minimum-rate SWIPT capacity regions.

The weighted-sum-rate problem over a discrete joint fading law

    max  sum_l mu(l) E_H[R_l]
    s.t. E_H[sum_l T_l(H)] <= tx_budget
         per-state rates >= min_rates (almost surely on the support)
         E_H[eta H(l) T_l(H)] >= deficits(l)

is solved by Lagrangian dual decomposition: a power price lambda for the
budget, a per-user RF-delivery reward theta(l), and an independent per-state
maximization in rate space, where the minimum-rate constraint becomes a box.
lambda is pinned by bisection (complementary slackness: spend < budget only
with lambda = 0) and each active theta(l) by a Gauss-Seidel sweep of
bisections on its delivery constraint.

Time-switching and power-splitting regions additionally couple the harvest
fractions pi_E to the policy through pi_E(l) = Delta_l / E[eta H(l) T_l];
`fixed_point_fractions` resolves that coupling with a damped fixed point.

Per-state inner solver: exact coordinate maximization.  With the users in
degradation order and z_i = exp(2 u_i) (u_i the underlying rate at position
i), powers follow the recursion T_i = (z_i - 1)(n_i + I_i),
I_{i+1} = z_i (I_i + n_i) - n_i with effective noise n_i; each coordinate's
objective is w_i u_i + a_i z_i + const with a closed-form maximizer, so a few
sweeps converge machine-tight.  A per-state cap of 100x the budget guards the
transients where the delivery reward exceeds the power price; the cap must
not be active at convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InfeasibleError, InvalidParameterError, UnboundedObjectiveError
from .fading import JointFadingDistribution
from .geometry import convex_hull, max_interior_depth
from .system import HarvestFractions, SystemConfig
from .units import nats_to_kbps

_TINY_LAMBDA = 1e-18


@dataclass(frozen=True)
class Multipliers:
    """Dual variables: power price and per-user RF-delivery rewards."""

    lam: float
    theta: np.ndarray

    def __post_init__(self):
        if self.lam < 0.0 or np.any(np.asarray(self.theta) < 0.0):
            raise InvalidParameterError("multipliers must be nonnegative")
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))


@dataclass(frozen=True)
class SolverOptions:
    budget_rtol: float = 1e-9            # |spend - budget| / budget at the pinned lambda
    delivery_atol: float = 1e-9          # delivered >= deficit - atol
    power_cap_factor: float = 100.0      # per-state total-power guard, x tx_budget
    inner_tol: float = 1e-13             # coordinate-sweep convergence on u
    inner_max_sweeps: int = 400
    bisect_max_iter: int = 120
    theta_max_sweeps: int = 30
    fixed_point_tol: float = 1e-9        # damped-step size; spec bound is 1e-6
    fixed_point_max_iter: int = 200
    fixed_point_damping: float = 0.5
    stability_window: int = 25
    stability_tol: float = 1e-8


@dataclass(frozen=True)
class PowerPolicy:
    """A per-joint-state allocation with its aggregates.

    `powers` and `rates` have shape (num_states, num_users); `rates` are the
    architecture rates (time-switching entries include the erasure scaling).
    `delivered` is E[eta H(l) T_l], the RF-delivery constraint quantity.
    """

    powers: np.ndarray
    rates: np.ndarray
    fractions: HarvestFractions
    avg_spend: float
    delivered: np.ndarray
    mean_rates: np.ndarray

    @classmethod
    def from_arrays(cls, powers, rates, fractions, probs, gains, efficiency) -> "PowerPolicy":
        powers = np.asarray(powers, dtype=float)
        rates = np.asarray(rates, dtype=float)
        avg_spend = float(probs @ powers.sum(axis=1))
        delivered = (probs[:, None] * (efficiency * gains * powers)).sum(axis=0)
        mean_rates = probs @ rates
        return cls(powers=powers, rates=rates, fractions=fractions,
                   avg_spend=avg_spend, delivered=delivered, mean_rates=mean_rates)

    def validate(self, config: SystemConfig, spend_slack: float = 1e-6,
                 rate_slack: float = 1e-9) -> None:
        if self.avg_spend > config.tx_budget + spend_slack:
            raise InvalidParameterError(
                f"policy spends {self.avg_spend} > budget {config.tx_budget}")
        if np.any(self.rates < config.min_rates[None, :] - rate_slack):
            raise InvalidParameterError("policy violates a per-state minimum rate")


@dataclass(frozen=True)
class BoundaryPoint:
    weights: np.ndarray
    rates: np.ndarray
    policy: PowerPolicy
    multipliers: Multipliers
    fractions: HarvestFractions
    diagnostics: dict = field(default_factory=dict)


@dataclass
class RegionTrace:
    """Boundary points from a weight sweep, plus any failed directions."""

    points: list
    architecture: str
    config: SystemConfig
    failures: list = field(default_factory=list)
    phis: list = field(default_factory=list)

    def rates_matrix(self) -> np.ndarray:
        return np.asarray([p.rates for p in self.points])

    def convexity_depth(self) -> float:
        """Largest distance a traced point sits inside the hull of the trace."""
        return max_interior_depth(self.rates_matrix())

    def to_csv(self, path) -> None:
        write_trace_csv(self, path)


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    failures: list
    metrics: dict

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# per-state batch engine
# ---------------------------------------------------------------------------

class _StateBatch:
    """Order-space arrays and the vectorized per-state maximizer.

    All (S, L) arrays are indexed [state, position-in-degradation-order];
    `order[s, i]` is the user at position i (strongest first).
    """

    def __init__(self, config: SystemConfig, gains: np.ndarray, probs: np.ndarray,
                 fractions: HarvestFractions, power_cap: float):
        L = config.num_users
        self.config = config
        self.gains = gains
        self.probs = probs
        self.fractions = fractions
        self.cap = power_cap

        decode = fractions.decode
        dg = np.array(gains)
        ps = config.is_power_splitting
        if ps.any():
            dg[:, ps] = dg[:, ps] * decode[ps]
        ratio = dg / config.noise_vars[None, :]
        self.order = np.argsort(-ratio, axis=1, kind="stable")
        take = lambda arr: np.take_along_axis(arr, self.order, axis=1)
        self.dg_ord = take(dg)
        self.sig_ord = config.noise_vars[self.order]
        self.n = self.sig_ord / self.dg_ord
        self.eta_h_ord = config.efficiency * take(gains)

        ts = config.is_time_switching
        ts_ord = ts[self.order]
        dec_ord = decode[self.order]
        rho_ord = config.min_rates[self.order]
        erased = ts & (decode <= 0.0) & (config.min_rates > 0.0)
        if erased.any():
            bad = int(np.nonzero(erased)[0][0])
            raise InfeasibleError(
                f"time-switching user {bad} has pi_E = 1 but a positive minimum rate")
        safe_dec = np.where(ts_ord & (dec_ord > 0.0), dec_ord, 1.0)
        self.u_min = np.where(ts_ord, rho_ord / safe_dec, rho_ord)
        self.z_min = np.exp(2.0 * self.u_min)
        self.wscale = np.where(ts_ord, dec_ord, 1.0)
        # user-space rate scaling for reported (architecture) rates
        self.rate_scale_user = np.where(ts, decode, 1.0)
        self.u = np.array(self.u_min)  # warm start across evaluations

    def maximize(self, mu: np.ndarray, lam: float, theta: np.ndarray,
                 tol: float, max_sweeps: int) -> dict:
        """Maximize every state's Lagrangian over rates >= the box.

        One and two users are solved in closed form by enumerating the
        stationary, box and cap candidates; three or more users fall back to
        coordinate sweeps with exact scalar updates.
        """
        S, L = self.n.shape
        w = mu[self.order] * self.wscale
        c = theta[self.order] * self.eta_h_ord - lam
        if L == 1:
            z = self._solve_one_user(w, c)
            sweeps = 1
        elif L == 2:
            z = self._solve_two_user(w, c)
            sweeps = 1
        else:
            z, sweeps = self._solve_sweeps(w, c, tol, max_sweeps)
        u = 0.5 * np.log(z)
        self.u = u

        # forward pass: powers in order space, then back to user space
        T_ord = np.empty((S, L))
        interf = np.zeros(S)
        for i in range(L):
            T_ord[:, i] = (z[:, i] - 1.0) * (self.n[:, i] + interf)
            interf = interf + T_ord[:, i]
        powers = np.zeros((S, L))
        np.put_along_axis(powers, self.order, T_ord, axis=1)
        u_user = np.zeros((S, L))
        np.put_along_axis(u_user, self.order, u, axis=1)
        rates = u_user * self.rate_scale_user[None, :]

        spend = float(self.probs @ interf)
        delivered = (self.probs[:, None]
                     * (self.config.efficiency * self.gains * powers)).sum(axis=0)
        primal = float(self.probs @ (rates @ mu))
        cap_mass = float(self.probs[interf >= self.cap * (1.0 - 1e-9)].sum())
        return {
            "powers": powers,
            "rates": rates,
            "spend": spend,
            "delivered": delivered,
            "primal": primal,
            "cap_mass": cap_mass,
            "sweeps": sweeps,
        }

    def _solve_one_user(self, w, c):
        n1 = self.n[:, 0]
        m1 = self.z_min[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            z_star = np.where(c[:, 0] < 0.0, w[:, 0] / (-2.0 * c[:, 0] * n1), np.inf)
        z_cap = 1.0 + self.cap / n1
        z = np.minimum(z_star, z_cap)
        z = np.maximum(z, m1)
        flat = (w[:, 0] == 0.0) & (c[:, 0] == 0.0)
        if flat.any():
            z = np.where(flat, m1, z)
        return z[:, None]

    def _solve_two_user(self, w, c):
        """Exact two-user argmax by candidate enumeration.

        In order space with z_i = exp(2 u_i) the objective is
            g = w1 u1 + w2 u2 + c1 T1 + c2 T2,
            T1 = (z1-1) n1,  T2 = (z2-1)(n2 + T1),
        whose partial stationary conditions reduce to a quadratic in z1, so
        the global maximum over {z >= box, T1+T2 <= cap} is attained at one
        of: the interior stationary points, a box edge with the other
        coordinate stationary, the box corner, or the cap boundary.
        """
        S = self.n.shape[0]
        n1, n2 = self.n[:, 0], self.n[:, 1]
        m1, m2 = self.z_min[:, 0], self.z_min[:, 1]
        w1, w2 = w[:, 0], w[:, 1]
        c1, c2 = c[:, 0], c[:, 1]
        d = n2 - n1  # >= 0 along the degradation order
        cap = self.cap
        neg_inf = np.float64(-np.inf)

        def objective(z1, z2, on_cap=False):
            with np.errstate(invalid="ignore", over="ignore"):
                T1 = (z1 - 1.0) * n1
                T2 = (z2 - 1.0) * (n2 + T1)
                g = (0.5 * w1 * np.log(z1) + 0.5 * w2 * np.log(z2)
                     + c1 * T1 + c2 * T2)
                ok = (z1 >= m1 * (1.0 - 1e-12)) & (z2 >= m2 * (1.0 - 1e-12))
                ok &= np.isfinite(g)
                if not on_cap:
                    ok &= (T1 + T2) <= cap * (1.0 + 1e-9)
            return np.where(ok, g, neg_inf)

        best_g = np.full(S, neg_inf)
        best_z1 = np.array(m1)
        best_z2 = np.array(m2)

        def consider(z1, z2, on_cap=False):
            nonlocal best_g, best_z1, best_z2
            z1 = np.maximum(z1, m1)
            z2 = np.maximum(z2, m2)
            g = objective(z1, z2, on_cap)
            better = g > best_g
            if better.any():
                best_g = np.where(better, g, best_g)
                best_z1 = np.where(better, z1, best_z1)
                best_z2 = np.where(better, z2, best_z2)

        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # box corner first so exact ties prefer the minimum-rate point
            consider(m1, m2)

            # z1 at box, z2 stationary: z2 = -w2 / (2 c2 (d + n1 z1))
            z2_s = -w2 / (2.0 * c2 * (d + n1 * m1))
            consider(m1, np.where(z2_s > 0.0, z2_s, m2))

            # z2 at box, z1 stationary
            den3 = 2.0 * n1 * (c1 - c2 + c2 * m2)
            z1_s = -w1 / den3
            consider(np.where(z1_s > 0.0, z1_s, m1), m2)

            # both interior: 2(c1-c2) n1^2 z^2 + n1 (2(c1-c2) d + w1 - w2) z + w1 d = 0
            A = 2.0 * (c1 - c2) * n1 * n1
            B = n1 * (2.0 * (c1 - c2) * d + w1 - w2)
            Cq = w1 * d
            disc = B * B - 4.0 * A * Cq
            sq = np.sqrt(np.maximum(disc, 0.0))
            qf = -0.5 * (B + np.where(B >= 0.0, sq, -sq))
            lin = np.abs(A) < 1e-300
            for root in (np.where(lin, -Cq / np.where(np.abs(B) > 0, B, np.inf), qf / A),
                         np.where(lin, np.nan, Cq / qf)):
                z1_r = np.where((disc >= 0.0) & (root > 0.0), root, np.nan)
                z2_r = -w2 / (2.0 * c2 * (d + n1 * z1_r))
                valid = np.isfinite(z1_r) & np.isfinite(z2_r) & (z2_r > 0.0)
                consider(np.where(valid, z1_r, m1), np.where(valid, z2_r, m2))

            # cap boundary T1 + T2 = cap
            T1_b1 = (m1 - 1.0) * n1
            z2_c = 1.0 + (cap - T1_b1) / (n2 + T1_b1)
            consider(m1, z2_c, on_cap=True)

            T1_b2 = (cap - (m2 - 1.0) * n2) / m2
            ok_b2 = T1_b2 >= 0.0
            consider(np.where(ok_b2, 1.0 + T1_b2 / n1, m1), m2, on_cap=True)

            # stationary along the cap: 2(c1-c2) T^2 + [w1-w2+2(c1-c2)(n1+n2)] T
            #                           + w1 n2 - w2 n1 + 2(c1-c2) n1 n2 = 0
            Ac = 2.0 * (c1 - c2)
            Bc_ = w1 - w2 + 2.0 * (c1 - c2) * (n1 + n2)
            Cc = w1 * n2 - w2 * n1 + 2.0 * (c1 - c2) * n1 * n2
            disc_c = Bc_ * Bc_ - 4.0 * Ac * Cc
            sqc = np.sqrt(np.maximum(disc_c, 0.0))
            qfc = -0.5 * (Bc_ + np.where(Bc_ >= 0.0, sqc, -sqc))
            lin_c = np.abs(Ac) < 1e-300
            for root in (np.where(lin_c, -Cc / np.where(np.abs(Bc_) > 0, Bc_, np.inf), qfc / Ac),
                         np.where(lin_c, np.nan, Cc / qfc)):
                T1_r = np.where((disc_c >= 0.0) & (root >= 0.0) & (root <= cap), root, np.nan)
                z1_r = 1.0 + T1_r / n1
                z2_r = 1.0 + (cap - T1_r) / (n2 + T1_r)
                valid = np.isfinite(z1_r) & np.isfinite(z2_r)
                consider(np.where(valid, z1_r, m1), np.where(valid, z2_r, m2),
                         on_cap=True)

        return np.stack([best_z1, best_z2], axis=1)

    def _solve_sweeps(self, w, c, tol, max_sweeps):
        """Coordinate maximization with exact scalar updates (any L)."""
        S, L = self.n.shape
        n = self.n
        u = np.maximum(self.u, self.u_min)
        z = np.exp(2.0 * u)
        sweeps = 0
        prev_delta = np.inf
        for sweeps in range(1, max_sweeps + 1):
            delta = 0.0
            interf = np.zeros(S)
            for i in range(L):
                V = np.zeros(S)
                A = np.ones(S)
                Bc = np.zeros(S)
                for j in range(L - 1, i, -1):
                    V = c[:, j] * (z[:, j] - 1.0) + z[:, j] * V
                    Bc = A * (z[:, j] - 1.0) * n[:, j] + Bc
                    A = A * z[:, j]
                a = (c[:, i] + V) * (n[:, i] + interf)
                w_i = w[:, i]
                with np.errstate(divide="ignore", invalid="ignore"):
                    z_star = np.where(a < 0.0, w_i / (-2.0 * a), np.inf)
                    z_cap = ((self.cap - Bc) / A + n[:, i]) / (interf + n[:, i])
                z_new = np.minimum(z_star, z_cap)
                z_new = np.maximum(z_new, self.z_min[:, i])
                flat = (w_i == 0.0) & (a == 0.0)
                if flat.any():
                    z_new = np.where(flat, self.z_min[:, i], z_new)
                u_new = 0.5 * np.log(z_new)
                step = np.max(np.abs(u_new - u[:, i])) if S else 0.0
                if step > delta:
                    delta = step
                u[:, i] = u_new
                z[:, i] = z_new
                interf = z_new * (interf + n[:, i]) - n[:, i]
            if delta < tol:
                break
            # stalled at floating-point noise: alternating updates can cycle
            # by an ulp-scale amount without ever dropping below tol
            if delta < 1e4 * tol and delta >= prev_delta:
                break
            prev_delta = delta
        return z, sweeps

    def rates_for_powers(self, powers: np.ndarray) -> np.ndarray:
        """Architecture rates of an arbitrary user-space allocation."""
        S, L = self.n.shape
        T_ord = np.take_along_axis(powers, self.order, axis=1)
        r_ord = np.empty((S, L))
        interf = np.zeros(S)
        for i in range(L):
            snr = self.dg_ord[:, i] * T_ord[:, i] / (self.sig_ord[:, i]
                                                     + self.dg_ord[:, i] * interf)
            r_ord[:, i] = 0.5 * np.log1p(snr)
            interf = interf + T_ord[:, i]
        u_user = np.empty((S, L))
        np.put_along_axis(u_user, self.order, r_ord, axis=1)
        return u_user * self.rate_scale_user[None, :]


def per_state_allocation(gains: np.ndarray, mu: np.ndarray, multipliers: Multipliers,
                         config: SystemConfig, fractions: HarvestFractions | None = None,
                         power_cap: float | None = None):
    """Maximize one state's Lagrangian over rates above the minimum-rate box.

    Returns (rates, powers) for the state.  Without a power cap the power
    price must strictly exceed every user's RF reward theta*eta*H, otherwise
    the objective grows without bound.
    """
    if fractions is None:
        fractions = HarvestFractions.zeros(config.num_users)
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (config.num_users,):
        raise InvalidParameterError("gains must have one entry per user")
    reward = multipliers.theta * config.efficiency * gains
    if power_cap is None:
        if multipliers.lam <= float(reward.max()):
            raise UnboundedObjectiveError(
                "power price does not exceed the RF reward; "
                f"lambda={multipliers.lam} <= max theta*eta*H={reward.max()}")
        power_cap = np.inf
    batch = _StateBatch(config, gains[None, :], np.ones(1), fractions, power_cap)
    res = batch.maximize(np.asarray(mu, dtype=float), multipliers.lam,
                         multipliers.theta, tol=1e-14, max_sweeps=600)
    return res["rates"][0], res["powers"][0]


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------

def feasibility_check(config: SystemConfig, dist: JointFadingDistribution,
                      fractions: HarvestFractions | None = None) -> FeasibilityReport:
    """Check that the operating point is reachable at all.

    (a) the minimum-rate policy fits the budget, (b) each user's deficit is
    coverable at the full-budget single-beneficiary corner, (c) equivalently
    for time-switching users, a harvest fraction <= 1 exists there.
    Evaluated at zero harvest fractions (the least-power baseline) unless
    fractions are given.
    """
    if fractions is None:
        fractions = HarvestFractions.zeros(config.num_users)
    from .rates import min_rate_powers

    S = dist.num_states
    min_powers = np.empty((S, config.num_users))
    for k in range(S):
        min_powers[k] = min_rate_powers(dist.gains[k], config, fractions)
    spend_min = float(dist.probs @ min_powers.sum(axis=1))
    delivered_min = (dist.probs[:, None]
                     * (config.efficiency * dist.gains * min_powers)).sum(axis=0)
    headroom = config.tx_budget - spend_min
    h_max = dist.gains.max(axis=0)
    max_delivered = delivered_min + config.efficiency * h_max * max(headroom, 0.0)

    failures = []
    if spend_min > config.tx_budget:
        failures.append(
            f"min-rate: minimum-rate policy needs {spend_min:.6g} > budget {config.tx_budget:.6g}")
    for l in range(config.num_users):
        if max_delivered[l] < config.deficits[l]:
            failures.append(
                f"rf-delivery: user {l} can receive at most {max_delivered[l]:.6g} "
                f"< deficit {config.deficits[l]:.6g}")
        elif config.is_time_switching[l] and config.deficits[l] > 0.0:
            # pi_E <= 1 attainable iff the deficit is deliverable at all
            pass
    metrics = {
        "min_rate_spend": spend_min,
        "budget": config.tx_budget,
        "delivered_at_min_rates": delivered_min,
        "max_delivered_single_beneficiary": max_delivered,
    }
    return FeasibilityReport(ok=not failures, failures=failures, metrics=metrics)


# ---------------------------------------------------------------------------
# boundary solve
# ---------------------------------------------------------------------------

@dataclass
class _Warm:
    """Carry-over state between related solves (neighboring weights)."""

    lam_bracket: tuple | None = None
    theta: np.ndarray | None = None
    fractions: np.ndarray | None = None


def _solve_lambda(batch: _StateBatch, mu: np.ndarray, theta: np.ndarray,
                  budget: float, opts: SolverOptions, bracket=None):
    """Pin the power price so average spend meets the budget.

    Returns (lam, result, bracket).  If spend is below budget even at a
    vanishing price, the budget constraint is slack and lambda ~ 0.
    """
    def ev(lam):
        return batch.maximize(mu, lam, theta, opts.inner_tol, opts.inner_max_sweeps)

    lo, hi = (bracket if bracket is not None else (_TINY_LAMBDA, 1.0))
    lo = max(lo, _TINY_LAMBDA)
    hi = max(hi, 2 * lo)

    res_lo = ev(lo)
    expand = 0
    while res_lo["spend"] < budget and lo > _TINY_LAMBDA and expand < 80:
        lo = max(lo / 16.0, _TINY_LAMBDA)
        res_lo = ev(lo)
        expand += 1
    if res_lo["spend"] <= budget:
        # budget slack at a vanishing price: complementary slackness with lam ~ 0
        return lo, res_lo, (lo, hi)

    res_hi = ev(hi)
    expand = 0
    while res_hi["spend"] > budget:
        hi *= 4.0
        res_hi = ev(hi)
        expand += 1
        if expand > 200:
            raise ConvergenceError("could not bracket the power price",
                                   {"lam_hi": hi, "spend": res_hi["spend"]})

    # With no delivery reward the per-state problem is concave, spend is
    # continuous in the price, and stopping once spend matches the budget is
    # safe.  With an active reward the spend can jump at a price, and the
    # delivery loop needs delivered(theta) to be a consistent function, so
    # the bracket is collapsed fully and a jump is time-shared away.
    spend_tol = opts.budget_rtol * budget
    smooth = not np.any(theta > 0.0)
    early_tol = spend_tol if smooth else 1e-12 * budget
    for _ in range(opts.bisect_max_iter):
        if budget - res_hi["spend"] <= early_tol or hi - lo <= 1e-14 * hi:
            break
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi))) if hi / lo > 4.0 \
            else 0.5 * (lo + hi)
        res_mid = ev(mid)
        if res_mid["spend"] >= budget:
            lo, res_lo = mid, res_mid
        else:
            hi, res_hi = mid, res_mid
    if budget - res_hi["spend"] > spend_tol and res_lo["spend"] > budget:
        # spend jumps across the price: time-share the adjacent policies so
        # the budget binds exactly (complementary slackness at the jump)
        beta = (budget - res_hi["spend"]) / (res_lo["spend"] - res_hi["spend"])
        res_hi = _mix_state_results(res_lo, res_hi, float(np.clip(beta, 0.0, 1.0)))
    # a slightly widened bracket re-seeds the next, nearby solve; the
    # expansion loops above recover from any miss
    return hi, res_hi, (max(lo * 0.98, _TINY_LAMBDA), hi * 1.02)


def solve_boundary(config: SystemConfig, dist: JointFadingDistribution,
                   mu: np.ndarray, fractions: HarvestFractions | None = None,
                   options: SolverOptions | None = None,
                   warm: _Warm | None = None) -> BoundaryPoint:
    """One boundary point of the region for a fixed weight vector.

    The power price is bisected to complementary slackness on the budget;
    each violated delivery constraint gets its reward bisected in turn
    (Gauss-Seidel) until every constraint holds within tolerance.

    Raises:
        ConvergenceError: multiplier loops exhausted, or the per-state power
            guard is still active at convergence (the optimum wants to
            concentrate unbounded power on a vanishing-probability state).
    """
    opts = options or SolverOptions()
    if fractions is None:
        fractions = HarvestFractions.zeros(config.num_users)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (config.num_users,) or np.any(mu < 0.0):
        raise InvalidParameterError("mu must be a nonnegative per-user vector")

    cap = opts.power_cap_factor * config.tx_budget
    batch = _StateBatch(config, dist.gains, dist.probs, fractions, cap)
    budget = config.tx_budget
    deficits = config.deficits

    theta = np.zeros(config.num_users)
    if warm is not None and warm.theta is not None:
        theta = np.array(warm.theta, dtype=float)
    bracket = warm.lam_bracket if warm is not None else None

    tax = np.zeros(config.num_users)
    try:
        lam, theta, res, bracket, obj_history, theta_sweeps = _outer_solve(
            batch, mu, budget, deficits, opts, theta, bracket)
        rates, powers = res["rates"], res["powers"]
    except _CapActive as cap_exc:
        (lam, theta, res, bracket, obj_history, theta_sweeps,
         powers, rates, tax) = _closure_solve(
            batch, config, dist, mu, deficits, opts, bracket, cap_exc)

    policy = PowerPolicy.from_arrays(powers, rates, fractions,
                                     dist.probs, dist.gains, config.efficiency)
    spend, delivered = policy.avg_spend, policy.delivered
    cs_budget = abs(lam * (budget - spend)) if spend < budget else 0.0
    primal = float(dist.probs @ (rates @ mu))
    dual = (res["primal"] + float(theta @ (res["delivered"] - deficits))
            + lam * (budget - spend))
    stability = (abs(obj_history[-1] - obj_history[0])
                 if len(obj_history) > 1 else 0.0)
    diagnostics = {
        "objective": primal,
        "dual_value": dual,
        "spend": spend,
        "delivered": delivered,
        "cs_budget": cs_budget,
        "cs_delivery": np.abs(theta * (delivered - deficits)),
        "theta_sweeps": theta_sweeps,
        "objective_history": obj_history,
        "stability": stability,
        "inner_sweeps": res["sweeps"],
        "closure_tax": tax,
    }
    if warm is not None:
        warm.lam_bracket = bracket
        warm.theta = np.array(theta)
    return BoundaryPoint(
        weights=mu,
        rates=policy.mean_rates,
        policy=policy,
        multipliers=Multipliers(lam=lam, theta=np.array(theta)),
        fractions=fractions,
        diagnostics=diagnostics,
    )


class _CapActive(Exception):
    """Internal: the per-state power guard binds at a converged solve."""

    def __init__(self, lam, theta, res):
        super().__init__("per-state power cap active")
        self.lam = lam
        self.theta = np.array(theta)
        self.res = res


def _outer_solve(batch, mu, budget, deficits, opts, theta, bracket):
    """Multiplier loop at fixed budget/deficits; raises _CapActive when the
    converged solution leans on the per-state power guard."""
    obj_history = []
    lam, res, bracket = _solve_lambda(batch, mu, theta, budget, opts, bracket)
    obj_history.append(res["primal"])
    theta_sweeps = 0
    for sweep in range(opts.theta_max_sweeps):
        viol = deficits - res["delivered"]
        if np.all(viol <= opts.delivery_atol):
            break
        theta_sweeps = sweep + 1
        for l in np.nonzero(viol > opts.delivery_atol)[0]:
            lam, res, bracket = _bisect_theta(
                batch, mu, theta, int(l), budget, deficits, opts, bracket)
        obj_history.append(res["primal"])
        if res["cap_mass"] > 0.0 and np.all(deficits - res["delivered"] <= opts.delivery_atol):
            break  # cap already binding; no point polishing further
    else:
        raise ConvergenceError(
            "delivery rewards did not settle",
            {"violations": deficits - res["delivered"], "theta": theta})

    if res["cap_mass"] > 0.0:
        raise _CapActive(lam, theta, res)
    return lam, theta, res, bracket, obj_history, theta_sweeps


def _closure_solve(batch, config, dist, mu, deficits, opts, bracket, first_exc):
    """Boundary point in the region's closure when delivery degenerates.

    When a user's RF reward reaches lambda / (eta h_max), the optimum wants
    unbounded power on its best-gain states: RF is then bought at a pure
    budget price of 1 / (eta h_max) per unit with vanishing rate impact.  The
    residual deficit is routed through that channel explicitly (a budget
    "tax" whose power is concentrated on the best-gain states) and the rest
    of the problem is re-solved on the reduced budget.
    """
    L = config.num_users
    h_max = dist.gains.max(axis=0)
    price = config.efficiency * h_max
    budget = config.tx_budget
    tax = np.zeros(L)
    conc = np.zeros(L, dtype=bool)
    exc = first_exc
    for _ in range(40):
        at_ceiling = (exc.theta * price >= exc.lam * (1.0 - 1e-4)) & (deficits > 0.0)
        conc |= at_ceiling
        if not conc.any():
            raise ConvergenceError(
                "per-state power cap active at convergence without a "
                "concentration-limited delivery constraint",
                {"lam": exc.lam, "theta": exc.theta,
                 "cap_probability_mass": exc.res["cap_mass"]})
        sub_deficits = np.where(conc, 0.0, deficits)
        sub_budget = budget - tax.sum()
        if sub_budget <= 0.0:
            raise ConvergenceError("closure taxes exhausted the budget",
                                   {"tax": tax})
        theta0 = np.where(conc, 0.0, exc.theta)
        try:
            lam, theta, res, bracket, hist, sweeps = _outer_solve(
                batch, mu, sub_budget, sub_deficits, opts, theta0, bracket)
        except _CapActive as another:
            exc = another
            continue
        residual = np.where(conc,
                            np.maximum(deficits - price * tax - res["delivered"], 0.0),
                            0.0)
        if residual.max() <= opts.delivery_atol:
            powers = np.array(res["powers"])
            for l in np.nonzero(tax > 0.0)[0]:
                mask = dist.gains[:, l] >= h_max[l] * (1.0 - 1e-12)
                pmass = float(dist.probs[mask].sum())
                powers[mask, l] += tax[l] / pmass
            rates = batch.rates_for_powers(powers)
            short = rates < config.min_rates[None, :] - 1e-9
            if short.any():
                raise ConvergenceError(
                    "closure concentration breaks another user's minimum "
                    "rate; no admissible boundary point at this weight",
                    {"tax": tax, "states": int(short.any(axis=1).sum())})
            return lam, theta, res, bracket, hist, sweeps, powers, rates, tax
        tax = tax + residual / price
    raise ConvergenceError("closure taxes did not settle", {"tax": tax})


def _bisect_theta(batch, mu, theta, l, budget, deficits, opts, bracket):
    """Raise theta[l] until user l's delivery constraint holds with equality.

    Leaves theta[l] at the feasible end of the bracket and returns the solve
    at exactly that value.
    """
    def ev(tl):
        theta[l] = tl
        return _solve_lambda(batch, mu, theta, budget, opts, bracket)

    lo = theta[l]
    lam, res, bracket = ev(lo)
    if res["delivered"][l] >= deficits[l] - opts.delivery_atol:
        return lam, res, bracket
    res_lo = res
    hi = max(2.0 * lo, 1.0)
    lam, res_hi, bracket = ev(hi)
    grow = 0
    while res_hi["delivered"][l] < deficits[l]:
        lo, res_lo = hi, res_hi
        hi *= 8.0
        lam, res_hi, bracket = ev(hi)
        grow += 1
        if grow > 100:
            raise ConvergenceError(
                f"delivery reward for user {l} did not bracket",
                {"theta_hi": hi, "delivered": res_hi["delivered"][l],
                 "deficit": deficits[l]})
    if res_hi["cap_mass"] > 0.0:
        # delivery is riding the power guard: no finite reward meets the
        # constraint off the cap, so skip the pointless narrowing and let
        # the caller switch to the closure route
        return lam, res_hi, bracket
    for _ in range(opts.bisect_max_iter):
        gap = res_hi["delivered"][l] - deficits[l]
        if gap <= opts.delivery_atol or hi - lo <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        lam, res_mid, bracket = ev(mid)
        if res_mid["delivered"][l] >= deficits[l]:
            hi, res_hi = mid, res_mid
        else:
            lo, res_lo = mid, res_mid
    lam, res_hi, bracket = ev(hi)
    if res_hi["delivered"][l] - deficits[l] > opts.delivery_atol and res_lo is not None:
        # delivered(theta) jumps across the reward (the per-state problem is
        # not concave once the RF reward is active): time-share the two
        # adjacent policies so the constraint binds with equality, which is
        # a point of the region's convex hull
        beta = ((res_hi["delivered"][l] - deficits[l])
                / (res_hi["delivered"][l] - res_lo["delivered"][l]))
        beta = float(np.clip(beta, 0.0, 1.0))
        res_hi = _mix_state_results(res_lo, res_hi, beta)
    return lam, res_hi, bracket


def _mix_state_results(res_a, res_b, beta: float) -> dict:
    """Time-share two policies: expectations mix linearly, and by concavity
    the mixed per-state rates remain achievable at the mixed powers."""
    out = {}
    for key in ("powers", "rates", "delivered"):
        out[key] = beta * res_a[key] + (1.0 - beta) * res_b[key]
    out["spend"] = beta * res_a["spend"] + (1.0 - beta) * res_b["spend"]
    out["primal"] = beta * res_a["primal"] + (1.0 - beta) * res_b["primal"]
    out["cap_mass"] = max(res_a["cap_mass"], res_b["cap_mass"])
    out["sweeps"] = max(res_a["sweeps"], res_b["sweeps"])
    out["time_shared"] = beta
    return out


# ---------------------------------------------------------------------------
# harvest-fraction fixed point
# ---------------------------------------------------------------------------

def fixed_point_fractions(config: SystemConfig, dist: JointFadingDistribution,
                          mu: np.ndarray, options: SolverOptions | None = None,
                          warm: _Warm | None = None):
    """Resolve pi_E(l) = Delta_l / E[eta H(l) T_l] jointly with the policy.

    Alternates a boundary solve at fixed fractions with a damped update of
    the fractions from the resulting delivery; ideal users stay at zero.

    Returns:
        (HarvestFractions, BoundaryPoint) at the fixed point.

    Raises:
        InvalidParameterError: no time-switching or power-splitting user.
        ConvergenceError: the iteration did not settle; carries the pi_E
            trajectory.
    """
    opts = options or SolverOptions()
    adaptive = config.is_time_switching | config.is_power_splitting
    if not adaptive.any():
        raise InvalidParameterError("fixed point requires a TS or PS user")

    if warm is None:
        warm = _Warm()
    pi = np.zeros(config.num_users)
    if warm.fractions is not None:
        pi = np.array(warm.fractions, dtype=float)
    trajectory = [np.array(pi)]
    damping = opts.fixed_point_damping
    floor = 0.02 * opts.fixed_point_damping
    flips = 0
    prev_step = None
    prev_move = np.inf
    move = np.inf
    for it in range(opts.fixed_point_max_iter):
        fractions = HarvestFractions(harvest=pi)
        point = solve_boundary(config, dist, mu, fractions, opts, warm)
        target = _fraction_targets(config, adaptive, point.policy.delivered)
        step = damping * (target - pi)
        pi_next = np.clip(pi + np.where(adaptive, step, 0.0), 0.0, 1.0)
        trajectory.append(np.array(pi_next))
        move = float(np.max(np.abs(pi_next - pi)))
        if move < opts.fixed_point_tol:
            if warm is not None:
                warm.fractions = np.array(pi)
            return point.fractions, point
        # the delivery map jumps where a fraction crossing flips a decoding
        # order, leaving the damped iteration cycling around the crossing:
        # the step alternates sign without shrinking.  Squeeze toward the
        # crossing, then settle on the over-harvesting side (feasible:
        # surplus harvest covers the deficit).
        if prev_step is not None and it > 10:
            flipped = np.any(np.sign(pi_next - pi) * np.sign(prev_step) < 0.0)
            if flipped and move >= 0.5 * prev_move:
                flips += 1
                damping = max(damping * 0.7, floor)
        prev_step = pi_next - pi
        prev_move = move
        pi = pi_next
        if flips >= 20 and damping <= floor:
            break
    if move < 1e-3:
        result = _overharvest_polish(config, dist, mu, pi, adaptive, opts, warm)
        if result is not None:
            if warm is not None:
                warm.fractions = np.array(result[0].harvest)
            return result
    raise ConvergenceError("harvest-fraction fixed point did not converge",
                           {"trajectory": trajectory})


def _fraction_targets(config, adaptive, delivered) -> np.ndarray:
    target = np.zeros(config.num_users)
    for l in range(config.num_users):
        if adaptive[l] and config.deficits[l] > 0.0:
            target[l] = min(1.0, config.deficits[l] / delivered[l])
    return target


def _overharvest_polish(config, dist, mu, pi, adaptive, opts, warm):
    """Monotone lift onto the feasible side of a fraction-map discontinuity.

    Raising a fraction to its consistency target can only raise the targets
    slightly in turn, so the lift converges; the resulting point harvests at
    least the consistent fraction everywhere and is therefore achievable.
    """
    pi = np.array(pi)
    for round_ in range(60):
        point = solve_boundary(config, dist, mu, HarvestFractions(pi), opts, warm)
        target = _fraction_targets(config, adaptive, point.policy.delivered)
        slack = 1e-12 if round_ < 20 else 1e-9
        if np.all(target <= pi + slack):
            return point.fractions, point
        # step just past the target so a knife-edge crossing cannot stall
        pi = np.clip(np.maximum(pi, target * (1.0 + 1e-9) + 1e-15), 0.0, 1.0)
    return None


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def _weight_grid(num_users: int, num_points: int) -> tuple[list, np.ndarray]:
    if num_points < 2:
        raise InvalidParameterError("num_points must be >= 2")
    if num_users == 2:
        phis = np.linspace(0.0, 0.5 * np.pi, num_points)
        return list(phis), np.stack([np.cos(phis), np.sin(phis)], axis=1)
    # simplex grid over weights for more than two users
    from itertools import combinations_with_replacement
    ticks = num_points - 1
    rows = []
    for combo in combinations_with_replacement(range(num_users), ticks):
        w = np.zeros(num_users)
        for c in combo:
            w[c] += 1.0
        rows.append(w / ticks)
    weights = np.unique(np.asarray(rows), axis=0)
    return [float("nan")] * len(weights), weights


def trace_region(config: SystemConfig, dist: JointFadingDistribution,
                 num_points: int, options: SolverOptions | None = None) -> RegionTrace:
    """Sweep weight directions and collect boundary points.

    For two users the sweep is uniform in angle over [0, pi/2], beginning and
    ending at the single-user-weight corners.  Solver failures at individual
    directions are recorded in `failures` and the sweep continues.
    """
    opts = options or SolverOptions()
    report = feasibility_check(config, dist)
    if not report.ok:
        raise InfeasibleError("; ".join(report.failures), report)

    adaptive = (config.is_time_switching | config.is_power_splitting).any()
    phis, weights = _weight_grid(config.num_users, num_points)
    archs = [a.value for a in config.architectures]
    tag = archs[0] if len(set(archs)) == 1 else "mixed:" + "+".join(archs)

    points, failures, kept_phis = [], [], []
    warm = _Warm()
    for phi, mu in zip(phis, weights):
        try:
            if adaptive:
                _, point = fixed_point_fractions(config, dist, mu, opts, warm)
            else:
                point = solve_boundary(config, dist, mu, None, opts, warm)
            points.append(point)
            kept_phis.append(phi)
        except (ConvergenceError, InfeasibleError) as exc:
            failures.append({"phi": phi, "mu": mu.tolist(), "error": str(exc)})
    return RegionTrace(points=points, architecture=tag, config=config,
                       failures=failures, phis=kept_phis)


def region_polygon(trace: RegionTrace) -> np.ndarray:
    """Convex polygon of the two-user region spanned by a trace.

    The rate floor corner (rho_1, rho_2) closes the region below the traced
    arc, so containment tests see the full achievable set rather than just
    the hull of the arc.
    """
    if trace.config.num_users != 2:
        raise InvalidParameterError("region polygon is defined for two users")
    pts = trace.rates_matrix()
    corner = trace.config.min_rates[None, :]
    return convex_hull(np.vstack([pts, corner]))


def region_contains(trace: RegionTrace, points: np.ndarray, tol: float = 1e-6) -> dict:
    """Check points against the region spanned by a boundary trace.

    Uses the supporting-hyperplane form: each traced point maximizes
    mu . R over the (convex) region, so any member point P must satisfy
    mu_k . P <= mu_k . R_k for every traced direction.  Unlike a test
    against the polygon inscribed in the trace, this stays sound where a
    checked point touches the boundary between swept directions.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray([p.weights for p in trace.points])
    support = np.einsum("kl,kl->k", weights, trace.rates_matrix())
    viol = pts @ weights.T - support[None, :]      # (num_points, num_planes)
    worst = viol.max(axis=1)
    inside = worst <= tol
    return {"all_inside": bool(inside.all()), "inside": inside,
            "max_violation": float(max(worst.max(), 0.0))}


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_trace_csv(trace: RegionTrace, path) -> None:
    """Write the trace in the declared schema.

    Columns: phi, mu1..muL, R1..RL in nats/use, R1..RL in kbps, lambda (or
    lambda1..lambda2 for the MAC), theta1..thetaL, piE1..piEL, avg_spend,
    delivered1..deliveredL.
    """
    L = trace.config.num_users
    mac = trace.points and isinstance(trace.points[0].multipliers, MacMultipliers)
    cols = ["phi"]
    cols += [f"mu{l+1}" for l in range(L)]
    cols += [f"R{l+1}_nats" for l in range(L)]
    cols += [f"R{l+1}_kbps" for l in range(L)]
    if mac:
        cols += [f"lambda{l+1}" for l in range(L)]
    else:
        cols += ["lambda"]
    cols += [f"theta{l+1}" for l in range(L)]
    cols += [f"piE{l+1}" for l in range(L)]
    cols += ["avg_spend"]
    cols += [f"delivered{l+1}" for l in range(L)]
    lines = [",".join(cols)]
    for phi, pt in zip(trace.phis, trace.points):
        row = [_fmt(phi)]
        row += [_fmt(v) for v in pt.weights]
        row += [_fmt(v) for v in pt.rates]
        row += [_fmt(nats_to_kbps(v)) for v in pt.rates]
        if mac:
            row += [_fmt(v) for v in pt.multipliers.lams]
            row += [_fmt(pt.multipliers.theta)] * L
        else:
            row += [_fmt(pt.multipliers.lam)]
            row += [_fmt(v) for v in pt.multipliers.theta]
        row += [_fmt(v) for v in pt.fractions.harvest]
        row += [_fmt(pt.policy.avg_spend)]
        row += [_fmt(v) for v in pt.policy.delivered]
        lines.append(",".join(row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class MacMultipliers:
    """Dual variables of the multiple-access solve: one price per transmitter."""

    lams: np.ndarray
    theta: float

    def __post_init__(self):
        lams = np.asarray(self.lams, dtype=float)
        if np.any(lams < 0.0) or self.theta < 0.0:
            raise InvalidParameterError("multipliers must be nonnegative")
        object.__setattr__(self, "lams", lams)
