"""Closed-form system formulas as an executable library: composite
failure probability, weight-unit throughput, attack economics,
cost-over-time comparison, and network-value scaling.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ThroughputParams:
    block_weight_limit: float = 4_000_000
    avg_tx_weight: float = 1_000
    block_time: float = 15

    def __post_init__(self):
        if self.block_weight_limit <= 0 or self.avg_tx_weight <= 0 or self.block_time <= 0:
            raise ValueError("throughput parameters must be positive")


@dataclass(frozen=True)
class CostParams:
    registration_fee: float
    annual_fee: float = 0.0
    years: int = 0

    def __post_init__(self):
        if self.registration_fee < 0 or self.annual_fee < 0:
            raise ValueError("fees must be non-negative")
        if self.years < 0:
            raise ValueError("years must be >= 0")


def failure_probability(component_probabilities) -> float:
    """1 - prod(1 - p_i): probability that any of n centralized
    components fails. Empty input yields 0."""
    survival = 1.0
    for p in component_probabilities:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
        survival *= 1.0 - p
    return 1.0 - survival


def theoretical_tps(params: ThroughputParams) -> float:
    """(block weight limit / average tx weight) / block time."""
    return (params.block_weight_limit / params.avg_tx_weight) / params.block_time


def attack_cost_exceeds_gain(mining_rewards, electricity_costs, economic_gain):
    """Return (inequality holds, margin = total attack cost - gain)."""
    if len(mining_rewards) != len(electricity_costs):
        raise ValueError("reward and electricity series must have equal length")
    total = 0.0
    for reward, electricity in zip(mining_rewards, electricity_costs):
        if reward < 0 or electricity < 0:
            raise ValueError("cost series entries must be non-negative")
        total += reward + electricity
    margin = total - economic_gain
    return margin > 0, margin


def cost_over_time(kind: str, params: CostParams) -> float:
    """Cumulative ownership cost after `years`.

    "traditional" pays the registration fee plus a recurring annual fee;
    "ddns" pays the registration fee once, constant forever.
    """
    if kind == "traditional":
        return params.registration_fee + params.years * params.annual_fee
    if kind == "ddns":
        return params.registration_fee
    raise ValueError(f"unknown cost model {kind!r}")


def network_value(n: float, k: float, alpha: float) -> float:
    """k * n^alpha; alpha > 1 means positive network effects."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if k <= 0:
        raise ValueError("k must be positive")
    return k * n ** alpha


def throughput_table() -> list:
    """The minimal/regular transaction throughput summary."""
    rows = []
    for label, weight in (("Minimal Transaction", 240), ("Regular Transaction", 1000)):
        tps = theoretical_tps(ThroughputParams(avg_tx_weight=weight))
        rows.append({"transaction_type": label, "avg_weight_wu": weight,
                     "max_tps": round(tps, 1)})
    return rows
