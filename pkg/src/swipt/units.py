"""Unit conversions at the tool boundary.

Rates are held internally in nats per real channel use.  The slot length is
1 microsecond, i.e. 1e6 channel uses per second, so 300 kbps corresponds to
0.3 bit/use = 0.3*ln(2) nats/use.  Powers are carried in watts with unit-slot
normalization (SNR = H*T/sigma^2).
"""

import math

CHANNEL_USES_PER_SECOND = 1.0e6


def kbps_to_nats(kbps: float) -> float:
    """Convert a rate in kbit/s to nats per channel use."""
    bits_per_use = kbps * 1e3 / CHANNEL_USES_PER_SECOND
    return bits_per_use * math.log(2.0)


def nats_to_kbps(nats: float) -> float:
    """Convert a rate in nats per channel use to kbit/s."""
    bits_per_use = nats / math.log(2.0)
    return bits_per_use * CHANNEL_USES_PER_SECOND / 1e3


def microwatt_to_watt(uw: float) -> float:
    return uw * 1e-6


def watt_to_microwatt(w: float) -> float:
    return w * 1e6
