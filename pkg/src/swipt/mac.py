"""Minimum-rate region of the dual two-transmitter fading multiple-access
channel with an RF-harvesting receiver.

Per joint fading state the achievable rates form the Gaussian MAC pentagon

    R_l <= (1/2) ln(1 + h_l T_l / sigma^2),
    R_1 + R_2 <= (1/2) ln(1 + (h_1 T_1 + h_2 T_2) / sigma^2),

with per-state floors R_l >= rho(l).  Each transmitter carries its own
average-energy budget, and the receiver's deficit Delta is covered by
E[eta (h_1 T_1 + h_2 T_2)] >= Delta.  Boundary points maximize a weighted sum
of expected rates by dual decomposition with one power price per transmitter
and a delivery reward; the per-state problem is a concave program solved
exactly by enumerating its stationary/boundary candidates.

The region is computed directly rather than mapped from the broadcast
channel; duality is used as a containment check against the broadcast trace
at the summed budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InfeasibleError, InvalidParameterError
from .fading import JointFadingDistribution
from .solver import (
    BoundaryPoint,
    MacMultipliers,
    PowerPolicy,
    RegionTrace,
    SolverOptions,
    region_contains,
)
from .system import Architecture, HarvestFractions, SystemConfig


@dataclass(frozen=True)
class MacConfig:
    """Two-transmitter MAC parameters.

    budgets: mean harvested energy per transmitter; noise_var: receiver
    noise; min_rates: per-user floors (nats/use), enforced in every state;
    deficit: receiver's average energy deficit, covered from the total
    received RF; efficiency: harvesting efficiency.
    """

    budgets: np.ndarray
    noise_var: float
    min_rates: np.ndarray
    deficit: float
    efficiency: float
    architecture: Architecture = Architecture.IDEAL

    def __post_init__(self):
        budgets = np.asarray(self.budgets, dtype=float)
        rates = np.asarray(self.min_rates, dtype=float)
        if budgets.shape != (2,) or rates.shape != (2,):
            raise InvalidParameterError("exactly two transmitters are supported")
        if np.any(budgets <= 0.0) or self.noise_var <= 0.0:
            raise InvalidParameterError("budgets and noise variance must be positive")
        if np.any(rates < 0.0) or self.deficit < 0.0:
            raise InvalidParameterError("min rates and deficit must be nonnegative")
        if not (0.0 < self.efficiency <= 1.0):
            raise InvalidParameterError("efficiency must be in (0, 1]")
        if Architecture.parse(self.architecture) is not Architecture.IDEAL:
            raise InvalidParameterError("only the ideal receiver is supported here")
        object.__setattr__(self, "budgets", budgets)
        object.__setattr__(self, "min_rates", rates)

    def bc_equivalent(self) -> SystemConfig:
        """Broadcast-channel setup at the summed budget for duality checks."""
        return SystemConfig(
            num_users=2,
            noise_vars=np.full(2, self.noise_var),
            min_rates=self.min_rates,
            deficits=np.full(2, self.deficit),
            efficiency=self.efficiency,
            tx_budget=float(self.budgets.sum()),
            architectures=(Architecture.IDEAL, Architecture.IDEAL),
        )


def _pentagon_rates(h1, h2, T1, T2, sigma2, rho, mu):
    """Rate assignment inside the pentagon for one weight ordering.

    The higher-weight user is decoded last (no interference); if the other
    user's corner rate falls below its floor the point slides along the
    sum-rate face until the floor is met.
    """
    sumcap = 0.5 * np.log1p((h1 * T1 + h2 * T2) / sigma2)
    if mu[0] >= mu[1]:
        r2 = np.maximum(rho[1], 0.5 * np.log1p(h2 * T2 / (sigma2 + h1 * T1)))
        r1 = sumcap - r2
        return np.stack([r1, r2], axis=-1)
    r1 = np.maximum(rho[0], 0.5 * np.log1p(h1 * T1 / (sigma2 + h2 * T2)))
    r2 = sumcap - r1
    return np.stack([r1, r2], axis=-1)


class _MacBatch:
    """Vectorized per-state concave maximization over transmit energies.

    With the priority user p (larger weight) decoded last, the per-state
    objective splits into two smooth concave branches separated by the curve
    where the secondary user's corner rate equals its floor; the global
    maximum is one of the closed-form candidates enumerated here.
    """

    def __init__(self, cfg: MacConfig, dist: JointFadingDistribution, power_cap: float):
        if dist.num_users != 2:
            raise InvalidParameterError("the MAC solver expects a two-user distribution")
        self.cfg = cfg
        self.gains = dist.gains
        self.probs = dist.probs
        self.cap = power_cap
        self.sigma2 = cfg.noise_var

    def maximize(self, mu: np.ndarray, lams: np.ndarray, theta: float) -> dict:
        cfg = self.cfg
        sig = self.sigma2
        rho = cfg.min_rates
        if mu[0] >= mu[1]:
            p, s = 0, 1  # priority, secondary
        else:
            p, s = 1, 0
        hp, hs = self.gains[:, p], self.gains[:, s]
        mup, mus = float(mu[p]), float(mu[s])
        rp, rs = float(rho[p]), float(rho[s])
        cp = theta * cfg.efficiency * hp - lams[p]
        cs = theta * cfg.efficiency * hs - lams[s]
        S = hp.size

        a_p = sig * math.expm1(2.0 * rp) / hp          # floors: cap_p >= rho_p
        a_s = sig * math.expm1(2.0 * rs) / hs
        s_min = sig * math.expm1(2.0 * (rp + rs))      # sum constraint on h.T
        kappa = math.expm1(2.0 * rs)                   # branch boundary slope

        neg_inf = np.float64(-np.inf)
        best_g = np.full(S, neg_inf)
        best_Tp = np.array(a_p)
        best_Ts = np.array(a_s)

        def rates_for(Tp, Ts):
            sumcap = 0.5 * np.log1p((hp * Tp + hs * Ts) / sig)
            r_s = np.maximum(rs, 0.5 * np.log1p(hs * Ts / (sig + hp * Tp)))
            return sumcap - r_s, r_s

        def consider(Tp, Ts, on_cap=False):
            nonlocal best_g, best_Tp, best_Ts
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                Tp = np.maximum(Tp, a_p)
                Ts = np.maximum(Ts, a_s)
                ok = hp * Tp + hs * Ts >= s_min * (1.0 - 1e-12)
                if not on_cap:
                    ok &= (Tp + Ts) <= self.cap * (1.0 + 1e-9)
                r_p, r_s = rates_for(Tp, Ts)
                g = mup * r_p + mus * r_s + cp * Tp + cs * Ts
                ok &= np.isfinite(g)
            g = np.where(ok, g, neg_inf)
            better = g > best_g
            if better.any():
                best_g = np.where(better, g, best_g)
                best_Tp = np.where(better, Tp, best_Tp)
                best_Ts = np.where(better, Ts, best_Ts)

        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            # floors corner and the two sum-constraint corners
            consider(a_p, a_s)
            consider(a_p, (s_min - hp * a_p) / hs)
            consider((s_min - hs * a_s) / hp, a_s)

            # branch 1 interior stationary (corner assignment, both floors slack):
            #   F* = sigma^2 + h.T from the secondary user's condition,
            #   then the priority user's own term
            F_star = mus * hs / (-2.0 * cs)
            den = -2.0 * cp - mus * hp / F_star
            x_star = (mup - mus) * hp / den  # sigma^2 + hp Tp
            Tp1 = (x_star - sig) / hp
            Ts1 = (F_star - x_star) / hs
            valid = (F_star > 0.0) & (den > 0.0) & (x_star > 0.0) & (Ts1 > 0.0)
            consider(np.where(valid, Tp1, a_p), np.where(valid, Ts1, a_s))

            # branch 2 (secondary pinned at its floor): faces at each box edge
            Tp2 = mup / (-2.0 * cp) - (sig + hs * a_s) / hp
            consider(np.where(cp < 0.0, Tp2, a_p), a_s)
            Ts2 = mup / (-2.0 * cs) - (sig + hp * a_p) / hs
            consider(a_p, np.where(cs < 0.0, Ts2, a_s))
            # secondary's own face within branch 1
            Ts3 = mus / (-2.0 * cs) - (sig + hp * a_p) / hs
            consider(a_p, np.where(cs < 0.0, Ts3, a_s))

            # branch boundary: hs Ts = kappa (sigma^2 + hp Tp)
            if kappa > 0.0:
                ctil = cp + cs * kappa * hp / hs
                Tpb = mup / (-2.0 * ctil) - sig / hp
                Tsb = kappa * (sig + hp * np.maximum(Tpb, a_p)) / hs
                valid = ctil < 0.0
                consider(np.where(valid, Tpb, a_p), np.where(valid, Tsb, a_s))
                # boundary curve clipped at the secondary floor
                Tp_edge = (hs * a_s / kappa - sig) / hp
                consider(np.where(Tp_edge > 0.0, Tp_edge, a_p), a_s)

            # priority box face within branch 1: quadratic in x = sigma^2 + hp Tp
            b = hs * a_s
            A = 2.0 * cp
            B = 2.0 * cp * b + mup * hp
            Cq = (mup - mus) * hp * b
            disc = B * B - 4.0 * A * Cq
            sq = np.sqrt(np.maximum(disc, 0.0))
            qf = -0.5 * (B + np.where(B >= 0.0, sq, -sq))
            for x_root in (qf / A, Cq / qf):
                Tp4 = (x_root - sig) / hp
                valid = (disc >= 0.0) & np.isfinite(Tp4) & (Tp4 > 0.0)
                consider(np.where(valid, Tp4, a_p), a_s)

            # cap guard for price/reward transients: pair the cap remainder
            # with a box edge or with the other user's stationary level; the
            # final solution must sit strictly below the cap
            consider(a_p, self.cap - a_p, on_cap=True)
            consider(self.cap - a_s, a_s, on_cap=True)
            Tp_int = np.clip(np.where(cp < 0.0, Tp2, a_p), a_p, self.cap)
            consider(Tp_int, self.cap - Tp_int, on_cap=True)
            Ts_int = np.clip(np.where(cs < 0.0, Ts3, a_s), a_s, self.cap)
            consider(self.cap - Ts_int, Ts_int, on_cap=True)

        rates_ps = np.empty((S, 2))
        r_p, r_s = rates_for(best_Tp, best_Ts)
        rates_ps[:, p], rates_ps[:, s] = r_p, r_s
        powers = np.empty((S, 2))
        powers[:, p], powers[:, s] = best_Tp, best_Ts

        spend = self.probs @ powers
        delivered = float(self.probs @ (self.cfg.efficiency
                                        * (self.gains * powers).sum(axis=1)))
        primal = float(self.probs @ (rates_ps @ mu))
        total = powers.sum(axis=1)
        cap_mass = float(self.probs[total >= self.cap * (1.0 - 1e-9)].sum())
        return {
            "powers": powers,
            "rates": rates_ps,
            "spend": spend,
            "delivered": delivered,
            "primal": primal,
            "cap_mass": cap_mass,
        }


def mac_feasibility(cfg: MacConfig, dist: JointFadingDistribution) -> dict:
    """Minimum spends per transmitter and the best deliverable RF.

    The per-state sum-rate floor may need power beyond the individual
    floors; its cheapest routing uses whichever transmitter has the larger
    gain in that state, and that extra is charged against pooled headroom.
    """
    sig = cfg.noise_var
    rho = cfg.min_rates
    h = dist.gains
    a1 = sig * math.expm1(2.0 * rho[0]) / h[:, 0]
    a2 = sig * math.expm1(2.0 * rho[1]) / h[:, 1]
    s_min = sig * math.expm1(2.0 * (rho[0] + rho[1]))
    short = np.maximum(s_min - h[:, 0] * a1 - h[:, 1] * a2, 0.0)
    extra_min = float(dist.probs @ (short / h.max(axis=1)))
    min1 = float(dist.probs @ a1)
    min2 = float(dist.probs @ a2)
    headroom = (cfg.budgets[0] - min1) + (cfg.budgets[1] - min2)
    ok = min1 <= cfg.budgets[0] and min2 <= cfg.budgets[1] and extra_min <= headroom
    max_delivered = (float(dist.probs @ (cfg.efficiency * (h[:, 0] * a1 + h[:, 1] * a2)))
                     + cfg.efficiency * float(h.max()) * max(headroom - extra_min, 0.0))
    return {
        "min_spend": (min1, min2),
        "sum_floor_extra": extra_min,
        "budgets": tuple(cfg.budgets),
        "max_delivered": max_delivered,
        "ok": ok and max_delivered >= cfg.deficit,
    }


def mac_boundary(cfg: MacConfig, dist: JointFadingDistribution, mu: np.ndarray,
                 options: SolverOptions | None = None,
                 warm: dict | None = None) -> BoundaryPoint:
    """One boundary point of the MAC region for a fixed weight vector.

    Per-transmitter power prices are pinned by alternating bisections (each
    budget constraint is tightened in turn until both settle); the delivery
    reward is bisected only when the RF constraint is short.
    """
    opts = options or SolverOptions()
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (2,) or np.any(mu < 0.0):
        raise InvalidParameterError("mu must be a nonnegative 2-vector")
    # budgets are per transmitter, so a weightless user still spends its own
    # energy; a vanishing weight completes the corner lexicographically
    mu_eff = np.array(mu)
    if mu.max() > 0.0 and (mu == 0.0).any():
        mu_eff = mu + (mu == 0.0) * (1e-12 * mu.max())
    cap = opts.power_cap_factor * float(cfg.budgets.max())
    batch = _MacBatch(cfg, dist, cap)

    theta = (warm or {}).get("theta", 0.0)
    brackets = (warm or {}).get("brackets", [(_TINY, 1.0), (_TINY, 1.0)])

    def settled(res, lams):
        gaps = np.abs(np.array(res["spend"]) - cfg.budgets)
        slack = np.array([res["spend"][t] < cfg.budgets[t] and lams[t] <= 4 * _TINY
                          for t in (0, 1)])
        return np.all((gaps <= opts.budget_rtol * cfg.budgets * 4.0) | slack)

    def solve_lams(theta):
        """Pin both budgets at fixed delivery reward.

        A few alternating bisections handle the smooth case exactly.  If the
        spends keep jumping (the primal optimum splits tie states between
        the transmitters, so the dual is nonsmooth at the optimum), a
        multiplicative price iteration collects the extreme solutions of its
        limit cycle and a small LP time-shares them so both budgets bind;
        that mixture is the standard ergodic-primal recovery for a
        subgradient method, realized exactly.
        """
        lams = np.array([(b[0] * b[1]) ** 0.5 for b in brackets])
        res = None
        for sweep in range(4):
            for t in (0, 1):
                lams, res, brackets[t] = _bisect_lam(batch, mu_eff, lams, t, theta,
                                                     cfg.budgets[t], opts, brackets[t])
            if settled(res, lams):
                return lams, res

        tol = opts.budget_rtol * cfg.budgets * 4.0
        atoms = [res]
        lam = np.maximum(np.array(lams), _TINY)
        gamma = 0.5
        prev_dir = None
        for it in range(300):
            r = batch.maximize(mu_eff, lam, theta)
            atoms.append(r)
            if settled(r, lam):
                for t in (0, 1):
                    brackets[t] = (lam[t] * 0.98, lam[t] * 1.02 + _TINY)
                return lam, r
            ratio = np.asarray(r["spend"]) / cfg.budgets
            if it % 10 == 9 and len(atoms) >= 3:
                # the cycle's atoms flip tie groups jointly and are often
                # collinear; single-price nudges on a ladder of sizes expose
                # off-segment extreme points that can absorb the residual
                extremes = list(atoms[-24:])
                for t in (0, 1):
                    for delta in (1e-7, 1e-5, 1e-3):
                        for sign in (-1.0, 1.0):
                            nudged = np.array(lam)
                            nudged[t] *= 1.0 + sign * delta
                            extremes.append(batch.maximize(mu_eff, nudged, theta))
                mixed = _best_feasible_mix(extremes, cfg.budgets, tol)
                if mixed is not None and settled(mixed, lam):
                    for t in (0, 1):
                        brackets[t] = (lam[t] * 0.98, lam[t] * 1.02 + _TINY)
                    return lam, mixed
            direction = np.sign(np.log(np.maximum(ratio, 1e-12)))
            if prev_dir is not None:
                if np.any(direction * prev_dir < 0.0):
                    gamma = max(gamma * 0.7, 0.02)
                else:
                    gamma = min(gamma * 1.2, 1.5)
            prev_dir = direction
            lam = lam * np.clip(np.maximum(ratio, 1e-12) ** gamma, 0.2, 5.0)
            lam = np.maximum(lam, _TINY)

        # fully tied instances: pin a common price to the pooled budget and
        # time-share its two tie-broken extremes
        total_budget = float(cfg.budgets.sum())

        def tot(lam_val):
            r = batch.maximize(mu_eff, np.array([lam_val, lam_val]), theta)
            return float(np.sum(r["spend"])), r

        lo_c, hi_c = _TINY, max(1.0, 2.0 * float(np.max(lams)))
        s_hi, r_hi = tot(hi_c)
        grow = 0
        while s_hi > total_budget and grow < 200:
            hi_c *= 4.0
            s_hi, r_hi = tot(hi_c)
            grow += 1
        for _ in range(opts.bisect_max_iter):
            if hi_c - lo_c <= 1e-14 * hi_c:
                break
            mid = math.exp(0.5 * (math.log(max(lo_c, _TINY)) + math.log(hi_c))) \
                if hi_c / max(lo_c, _TINY) > 4.0 else 0.5 * (lo_c + hi_c)
            s_mid, r_mid = tot(mid)
            if s_mid >= total_budget:
                lo_c = mid
            else:
                hi_c, r_hi = mid, r_mid
        atoms.append(r_hi)
        tie = 1e-9
        lam_pair = np.array([lo_c, lo_c])
        atoms.append(batch.maximize(mu_eff * np.array([1.0 + tie, 1.0]), lam_pair, theta))
        atoms.append(batch.maximize(mu_eff * np.array([1.0, 1.0 + tie]), lam_pair, theta))
        mixed = _best_feasible_mix(atoms[-30:], cfg.budgets, tol)
        if mixed is not None and settled(mixed, np.array([lo_c, lo_c])):
            return np.array([lo_c, lo_c]), mixed
        raise ConvergenceError("transmitter power prices did not settle",
                               {"spend": res["spend"], "budgets": cfg.budgets})

    lams, res = solve_lams(theta)
    if res["delivered"] < cfg.deficit - opts.delivery_atol:
        lo, hi = 0.0, max(1.0, 2.0 * theta)
        lams, res = solve_lams(hi)
        grow = 0
        while res["delivered"] < cfg.deficit:
            lo, hi = hi, hi * 8.0
            lams, res = solve_lams(hi)
            grow += 1
            if grow > 80:
                raise ConvergenceError("MAC delivery reward did not bracket",
                                       {"theta": hi, "delivered": res["delivered"]})
        theta = hi
        for _ in range(opts.bisect_max_iter):
            gap = res["delivered"] - cfg.deficit
            if 0.0 <= gap <= opts.delivery_atol or hi - lo <= 1e-15 * hi:
                break
            mid = 0.5 * (lo + hi)
            lams_mid, res_mid = solve_lams(mid)
            if res_mid["delivered"] >= cfg.deficit:
                hi, res, lams = mid, res_mid, lams_mid
            else:
                lo = mid
        theta = hi
        lams, res = solve_lams(theta)

    if res["cap_mass"] > 0.0:
        raise ConvergenceError("per-state power cap active at a converged MAC solve",
                               {"cap_probability_mass": res["cap_mass"]})

    fractions = HarvestFractions.zeros(2)
    policy = PowerPolicy.from_arrays(res["powers"], res["rates"], fractions,
                                     dist.probs, dist.gains, cfg.efficiency)
    spends = np.array(res["spend"])
    diagnostics = {
        "objective": res["primal"],
        "spend_per_tx": spends,
        "delivered_total": res["delivered"],
        "cs_budget": np.abs(lams * (cfg.budgets - spends)),
        "cs_delivery": abs(theta * (res["delivered"] - cfg.deficit)),
    }
    if warm is not None:
        warm["theta"] = theta
        warm["brackets"] = brackets
    return BoundaryPoint(
        weights=mu,
        rates=policy.mean_rates,
        policy=policy,
        multipliers=MacMultipliers(lams=lams, theta=theta),
        fractions=fractions,
        diagnostics=diagnostics,
    )


_TINY = 1e-18


def _bisect_lam(batch, mu, lams, t, theta, budget, opts, bracket):
    """Pin transmitter t's power price at fixed other multipliers."""
    def ev(val):
        lams[t] = val
        return batch.maximize(mu, lams, theta)

    lo, hi = bracket
    lo = max(lo, _TINY)
    hi = max(hi, 2 * lo)
    res_lo = ev(lo)
    tries = 0
    while res_lo["spend"][t] < budget and lo > _TINY and tries < 60:
        lo = max(lo / 16.0, _TINY)
        res_lo = ev(lo)
        tries += 1
    if res_lo["spend"][t] <= budget:
        lams[t] = lo
        return lams, res_lo, (lo, hi)
    res_hi = ev(hi)
    tries = 0
    while res_hi["spend"][t] > budget:
        hi *= 4.0
        res_hi = ev(hi)
        tries += 1
        if tries > 200:
            raise ConvergenceError("could not bracket a MAC power price",
                                   {"transmitter": t, "lam_hi": hi})
    spend_tol = opts.budget_rtol * budget
    res_lo = None
    for _ in range(opts.bisect_max_iter):
        if budget - res_hi["spend"][t] <= spend_tol or hi - lo <= 1e-14 * hi:
            break
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi))) if hi / lo > 4.0 \
            else 0.5 * (lo + hi)
        res_mid = ev(mid)
        if res_mid["spend"][t] >= budget:
            lo, res_lo = mid, res_mid
        else:
            hi, res_hi = mid, res_mid
    if budget - res_hi["spend"][t] > spend_tol and res_lo is not None:
        # the spend jumps across the price (a degenerate tie between the
        # transmitters at some state): time-share the two policies so the
        # budget is met with equality
        beta = (budget - res_hi["spend"][t]) / (res_lo["spend"][t] - res_hi["spend"][t])
        beta = float(np.clip(beta, 0.0, 1.0))
        res_hi = _mix_results(res_lo, res_hi, beta)
    lams[t] = hi
    return lams, res_hi, (max(lo * 0.98, _TINY), hi * 1.02)


def _mix_results(res_a, res_b, beta: float) -> dict:
    """Time-share two per-state solutions: all aggregates mix linearly, and
    by concavity the mixed rates still satisfy the pentagon at the mixed
    powers."""
    out = {}
    for key in ("powers", "rates", "delivered", "primal"):
        out[key] = beta * res_a[key] + (1.0 - beta) * res_b[key]
    out["spend"] = beta * np.asarray(res_a["spend"]) + (1.0 - beta) * np.asarray(res_b["spend"])
    out["cap_mass"] = max(res_a["cap_mass"], res_b["cap_mass"])
    out["time_shared"] = beta
    return out


def _mix_atoms(atoms, alpha) -> dict:
    out = {k: sum(w * a[k] for w, a in zip(alpha, atoms))
           for k in ("powers", "rates", "delivered", "primal")}
    out["spend"] = sum(w * np.asarray(a["spend"]) for w, a in zip(alpha, atoms))
    out["cap_mass"] = max(a["cap_mass"] for a in atoms)
    out["time_shared"] = list(np.asarray(alpha, dtype=float))
    return out


def _best_feasible_mix(atoms, budgets, tol):
    """Best time-share of candidate solutions meeting both budgets.

    Enumerates singletons, pairs (one budget tied exactly, the other within
    tolerance) and triples (both budgets tied); returns the primal-best
    feasible combination or None.
    """
    budgets = np.asarray(budgets, dtype=float)
    tol = np.asarray(tol, dtype=float)
    n = len(atoms)
    spends = np.array([a["spend"] for a in atoms], dtype=float)
    best = None
    best_val = -np.inf

    def try_alpha(idx, alpha):
        nonlocal best, best_val
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha < -1e-10):
            return
        alpha = np.clip(alpha, 0.0, None)
        s = alpha.sum()
        if s <= 0.0:
            return
        alpha = alpha / s
        keep = alpha > 1e-12
        if not keep.all():
            idx = tuple(i for i, k in zip(idx, keep) if k)
            alpha = alpha[keep]
            alpha = alpha / alpha.sum()
        spend = alpha @ spends[list(idx)]
        if np.any(spend > budgets + tol):
            return
        val = float(sum(w * atoms[i]["primal"] for w, i in zip(alpha, idx)))
        if val > best_val:
            sub = [atoms[i] for i in idx]
            best = _mix_atoms(sub, alpha)
            best_val = val

    for i in range(n):
        try_alpha((i,), [1.0])
    for i in range(n):
        for j in range(i + 1, n):
            for t in (0, 1):
                den = spends[i, t] - spends[j, t]
                if den != 0.0:
                    a = (budgets[t] - spends[j, t]) / den
                    try_alpha((i, j), [a, 1.0 - a])
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                M = np.vstack([spends[[i, j, k], 0], spends[[i, j, k], 1],
                               np.ones(3)])
                try:
                    alpha = np.linalg.solve(M, np.array([budgets[0], budgets[1], 1.0]))
                except np.linalg.LinAlgError:
                    continue
                try_alpha((i, j, k), alpha)
    return best


def mac_trace(cfg: MacConfig, dist: JointFadingDistribution, num_points: int,
              options: SolverOptions | None = None) -> RegionTrace:
    """Sweep weight directions over the quarter circle, as for the BC."""
    opts = options or SolverOptions()
    feas = mac_feasibility(cfg, dist)
    if not feas["ok"]:
        raise InfeasibleError("MAC operating point infeasible", feas)
    phis = np.linspace(0.0, 0.5 * np.pi, num_points)
    points, failures, kept = [], [], []
    warm = {}
    bc_snapshot = cfg.bc_equivalent()
    for phi in phis:
        mu = np.array([math.cos(phi), math.sin(phi)])
        try:
            points.append(mac_boundary(cfg, dist, mu, opts, warm))
            kept.append(float(phi))
        except (ConvergenceError, InfeasibleError) as exc:
            failures.append({"phi": float(phi), "mu": mu.tolist(), "error": str(exc)})
    return RegionTrace(points=points, architecture="mac",
                       config=bc_snapshot, failures=failures, phis=kept)


def duality_containment(mac_trace_: RegionTrace, bc_trace: RegionTrace,
                        tol: float = 1e-6) -> dict:
    """Check every MAC boundary point lies weakly inside the BC region.

    The BC trace at the summed budget spans the region; each MAC rate pair
    must fall inside its polygon (closed with the rate-floor corner) within
    the tolerance.  The report carries the worst violation distance.
    """
    report = region_contains(bc_trace, mac_trace_.rates_matrix(), tol=tol)
    report["num_points"] = len(mac_trace_.points)
    report["tolerance"] = tol
    return report
