"""Per-state rate, power and harvest algebra for the degraded fading GBC.

Superposition coding with successive cancellation: in every joint fading
state the receivers are ranked by effective gain-to-noise ratio, the
strongest receiver decodes everything and sees no interference, and each
weaker receiver treats the layers of strictly stronger receivers as noise.
Natural logarithms throughout, rates in nats per channel use.

Receiver architectures enter as follows:
  ideal           decode gain H(l); rate (1/2) ln(1 + SNR).
  time-switching  decode gain H(l); the slot-average rate is scaled by the
                  decode fraction (1 - pi_E), and a minimum rate r must be
                  sustained at r / (1 - pi_E) in the non-erased slots.
  power-splitting decode gain (1 - pi_E(l)) * H(l): the decoder branch sees
                  that fraction of all incoming layers, noise unchanged.

Harvesting draws on the *total* transmitted energy in a slot, scaled by the
receiver's harvest fraction (1 for ideal receivers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InvalidParameterError
from .system import HarvestFractions, SystemConfig


def _asvec(x, L: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (L,):
        raise InvalidParameterError(f"{name} must have shape ({L},)")
    return arr


def decode_gains(gains: np.ndarray, config: SystemConfig,
                 fractions: HarvestFractions) -> np.ndarray:
    """Effective gains seen by each user's decoder."""
    g = np.array(gains, dtype=float)
    ps = config.is_power_splitting
    if ps.any():
        g[ps] = g[ps] * fractions.decode[ps]
    return g


def degradation_order(gains: np.ndarray, config: SystemConfig,
                      fractions: HarvestFractions) -> np.ndarray:
    """Users sorted strongest-first by decode gain over noise variance.

    Ties are broken by ascending user index; the interference set of user l
    is exactly the users ranked before it.
    """
    gains = _asvec(gains, config.num_users, "gains")
    ratio = decode_gains(gains, config, fractions) / config.noise_vars
    return np.argsort(-ratio, kind="stable")


def per_state_rates(gains: np.ndarray, powers: np.ndarray, config: SystemConfig,
                    fractions: HarvestFractions) -> np.ndarray:
    """Slot-average rate of each user in one joint state.

    Args:
        gains: per-user channel gains in this state.
        powers: per-user transmit energies, all >= 0.
        config: system parameters.
        fractions: harvest fractions (all-zero for ideal receivers).

    Returns:
        Per-user rates in nats/use; time-switching entries already include
        the erasure scaling by the decode fraction.
    """
    L = config.num_users
    gains = _asvec(gains, L, "gains")
    powers = _asvec(powers, L, "powers")
    if np.any(powers < 0.0):
        raise InvalidParameterError("powers must be nonnegative")
    g = decode_gains(gains, config, fractions)
    order = degradation_order(gains, config, fractions)
    rates = np.zeros(L)
    interference = 0.0
    for u in order:
        snr = g[u] * powers[u] / (config.noise_vars[u] + g[u] * interference)
        rates[u] = 0.5 * np.log1p(snr)
        interference += powers[u]
    ts = config.is_time_switching
    if ts.any():
        rates[ts] = rates[ts] * fractions.decode[ts]
    return rates


def power_for_rates(gains: np.ndarray, rates: np.ndarray, config: SystemConfig,
                    fractions: HarvestFractions) -> np.ndarray:
    """Exact inverse of `per_state_rates` along the degradation order.

    Walks the order strongest-first, assigning each user the least energy
    that meets its target on top of the interference already committed.

    Raises:
        InfeasibleError: a time-switching user with pi_E = 1 cannot carry a
            positive rate (every slot is erased).
    """
    L = config.num_users
    gains = _asvec(gains, L, "gains")
    rates = _asvec(rates, L, "rates")
    if np.any(rates < 0.0):
        raise InvalidParameterError("target rates must be nonnegative")
    ts = config.is_time_switching
    targets = np.array(rates, dtype=float)
    if ts.any():
        decode = fractions.decode
        erased = ts & (decode <= 0.0)
        if np.any(erased & (targets > 0.0)):
            bad = int(np.nonzero(erased & (targets > 0.0))[0][0])
            raise InfeasibleError(
                f"time-switching user {bad} has pi_E = 1 but a positive rate target"
            )
        active = ts & (decode > 0.0)
        targets[active] = targets[active] / decode[active]
    g = decode_gains(gains, config, fractions)
    order = degradation_order(gains, config, fractions)
    powers = np.zeros(L)
    interference = 0.0
    for u in order:
        growth = np.expm1(2.0 * targets[u])
        powers[u] = growth * (config.noise_vars[u] / g[u] + interference)
        interference += powers[u]
    return powers


def min_rate_powers(gains: np.ndarray, config: SystemConfig,
                    fractions: HarvestFractions) -> np.ndarray:
    """Least per-state energies sustaining the minimum rates with zero excess."""
    return power_for_rates(gains, config.min_rates, config, fractions)


def harvested_rf(gains: np.ndarray, powers: np.ndarray, config: SystemConfig,
                 fractions: HarvestFractions) -> np.ndarray:
    """Expected RF energy harvested by each receiver in this state.

    The rectenna sees the total transmitted energy, not just the user's own
    layer; time-switching receivers harvest it with probability pi_E and
    power-splitting receivers take the pi_E fraction deterministically.
    """
    L = config.num_users
    gains = _asvec(gains, L, "gains")
    powers = _asvec(powers, L, "powers")
    total = float(powers.sum())
    scale = np.where(config.is_ideal, 1.0, fractions.harvest)
    return config.efficiency * gains * total * scale


@dataclass(frozen=True)
class EffectiveChannel2:
    """Two-user effective-channel transform for one joint state.

    Closed forms for absorbing the minimum-rate layers into the channel, as
    used to restate the boundary optimization over excess powers only.  The
    deficit shifts are kept for diagnostics; see `effective_deficit_report`
    for how they compare with the direct expectation.
    """

    effective_gains: np.ndarray
    effective_noise_vars: np.ndarray
    effective_deficits: np.ndarray
    event_prob: float
    min_rate_growth: np.ndarray  # p_l = e^{2 rho(l)} - 1
    dominant_user: int  # index with the larger H/sigma^2 in this state

    @property
    def complement_prob(self) -> float:
        return 1.0 - self.event_prob


def effective_channel_two_user(gains: np.ndarray, config: SystemConfig,
                               q: float) -> EffectiveChannel2:
    """Evaluate the two-user transform for the state's active ordering event.

    Args:
        gains: the two users' gains in this state.
        config: system parameters (num_users must be 2).
        q: probability, under the joint fading law, that user 0 is the
           stronger user (H(0)/sigma_0^2 >= H(1)/sigma_1^2).

    Returns:
        EffectiveChannel2 with the noise/gain/deficit transform oriented so
        the formulas are written for (stronger, weaker); when user 1 is the
        stronger one the indices are swapped and the event probability
        becomes 1 - q.
    """
    if config.num_users != 2:
        raise InvalidParameterError("effective_channel_two_user requires exactly 2 users")
    gains = _asvec(gains, 2, "gains")
    if not (0.0 <= q <= 1.0):
        raise InvalidParameterError("q must be a probability")
    ratio = gains / config.noise_vars
    strong = 0 if ratio[0] >= ratio[1] else 1
    weak = 1 - strong
    sig = config.noise_vars
    rho = config.min_rates
    p = np.expm1(2.0 * rho)
    p_event = q if strong == 0 else 1.0 - q
    p_comp = 1.0 - p_event

    sig_ef = np.empty(2)
    sig_ef[strong] = sig[strong]
    sig_ef[weak] = (sig[weak] - sig[strong]) * np.exp(-2.0 * rho[strong]) + sig[strong]
    h_ef = gains * np.exp(-2.0 * (rho[0] + rho[1]))
    delta_ef = np.empty(2)
    delta_ef[strong] = (config.deficits[strong] - sig[strong] * p[strong]
                        - sig[weak] * p[strong] * p[weak] * p_comp)
    delta_ef[weak] = (config.deficits[weak] - sig[weak] * p[weak]
                      - sig[strong] * p[strong] * p[weak] * p_event)
    return EffectiveChannel2(
        effective_gains=h_ef,
        effective_noise_vars=sig_ef,
        effective_deficits=delta_ef,
        event_prob=p_event,
        min_rate_growth=p,
        dominant_user=strong,
    )


def effective_deficits_direct(config: SystemConfig, dist,
                              fractions: HarvestFractions | None = None) -> np.ndarray:
    """Deficits left after the RF delivered by the minimum-rate layers.

    Computed as Delta_l - E_H[eta * H(l) * T_min,l(H)] by direct expectation
    over the joint distribution; this is the quantity the solver actually
    needs, independent of the closed-form shift above.
    """
    if fractions is None:
        fractions = HarvestFractions.zeros(config.num_users)
    delivered = np.zeros(config.num_users)
    for gains, prob in dist.states:
        powers = min_rate_powers(gains, config, fractions)
        delivered += prob * config.efficiency * gains * powers
    return config.deficits - delivered


def effective_deficit_report(config: SystemConfig, dist) -> dict:
    """Compare the closed-form deficit shift with the direct expectation.

    The closed form ignores the efficiency factor and the gain dependence of
    the minimum-rate energies, so the two generally disagree; the report
    carries both so the discrepancy is visible rather than silently chosen.
    Only defined for two users.
    """
    if config.num_users != 2:
        raise InvalidParameterError("report requires exactly 2 users")
    ratio = dist.gains / config.noise_vars[None, :]
    q = float(dist.probs[ratio[:, 0] >= ratio[:, 1]].sum())
    closed = np.zeros(2)
    for gains, prob in dist.states:
        ec = effective_channel_two_user(gains, config, q)
        closed += prob * ec.effective_deficits
    direct = effective_deficits_direct(config, dist)
    return {
        "closed_form_mean": closed,
        "direct": direct,
        "max_abs_difference": float(np.max(np.abs(closed - direct))),
        "strong_event_prob": q,
    }
