"""
Closed-form retransmission expectations and the pattern-flow solver.

All formulas assume independent Bernoulli losses with per-receiver rate
``omega``. The λ formulas and the primary-set accounting require the channel
sorted ascending (see ``sort_channel``).
"""
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, NamedTuple, Tuple

from ncrescue.patterns import DestinationSet, LossPattern, transition_prob
from ncrescue.types import QueueKey

# Largest receiver count the pattern-flow solver enumerates (2^(N-1)
# patterns per primary set).
MAX_FLOW_RECEIVERS = 10


@dataclass(frozen=True)
class ChannelParams:
    """ Per-receiver packet erasure probabilities, receiver R_i at i - 1."""
    omegas: Tuple[float, ...]
    sorted_ascending: bool = False

    def __post_init__(self):
        omegas = tuple(float(omega) for omega in self.omegas)
        object.__setattr__(self, 'omegas', omegas)
        if len(omegas) < 2:
            raise ValueError("at least two receivers are required")
        for omega in omegas:
            if not 0.0 <= omega < 1.0:
                raise ValueError(f"loss rate {omega} outside [0, 1)")
        if self.sorted_ascending and not _is_sorted(omegas):
            raise ValueError("loss rates flagged as sorted are not ascending")

    @classmethod
    def uniform(cls, n: int, omega: float) -> "ChannelParams":
        return cls((omega,) * n, sorted_ascending=True)

    @property
    def n(self) -> int:
        return len(self.omegas)

    def omega(self, receiver: int) -> float:
        """ Loss rate of 1-based receiver."""
        return self.omegas[receiver - 1]

    def rank(self) -> Dict[int, int]:
        """ Position of each receiver in ascending (loss rate, index) order."""
        order = sorted(range(1, self.n + 1), key=lambda r: (self.omega(r), r))
        return {receiver: position for position, receiver in enumerate(order)}


class PrimarySets(NamedTuple):
    upper: FrozenSet[QueueKey]
    lower: FrozenSet[QueueKey]
    union: FrozenSet[QueueKey]


@dataclass
class FlowLedger:
    """
    Expected queue flows of the idealised rescue process.

    ``inflow[key]`` is the number of packets that ever enter the queue,
    ``rescue[key]`` the retransmissions spent on it and ``transfers`` the
    packets moved between queues of the same primary set. ``totals`` sums the
    retransmissions per receiver primary set.
    """
    initial: Dict[QueueKey, float] = field(default_factory=dict)
    inflow: Dict[QueueKey, float] = field(default_factory=dict)
    rescue: Dict[QueueKey, float] = field(default_factory=dict)
    transfers: Dict[Tuple[QueueKey, QueueKey], float] = field(
        default_factory=dict)
    totals: Dict[int, float] = field(default_factory=dict)

    def __bool__(self):
        return bool(self.inflow)

    @property
    def total(self) -> float:
        return math.fsum(self.totals.values())

    def incoming(self, key: QueueKey) -> float:
        return math.fsum(amount for (_, target), amount
                         in self.transfers.items() if target == key)


def _is_sorted(omegas: Tuple[float, ...]) -> bool:
    return all(a <= b for a, b in zip(omegas, omegas[1:]))


def _require_sorted(channel: ChannelParams):
    if not _is_sorted(channel.omegas):
        raise ValueError("loss rates must be sorted ascending, "
                         "use sort_channel() first")


def _tail_product(channel: ChannelParams, i: int) -> float:
    """ Product of loss rates of receivers i..N (1-based)."""
    return math.prod(channel.omegas[i - 1:])


def sort_channel(channel: ChannelParams
                 ) -> Tuple[ChannelParams, Tuple[int, ...]]:
    """
    Sort loss rates ascending.

    :return: sorted channel and the original 1-based receiver index of each
        sorted position.
    """
    order = tuple(sorted(range(1, channel.n + 1),
                         key=lambda r: (channel.omega(r), r)))
    omegas = tuple(channel.omega(r) for r in order)
    return ChannelParams(omegas, sorted_ascending=True), order


def rescue_expectation(queue_size: float, zero_receivers: Iterable[int],
                       channel: ChannelParams) -> float:
    """ Expected retransmissions until a queue with this receive-state is
    rescued: every packet either delivered or moved to another pattern."""
    zero_receivers = tuple(zero_receivers)
    if not zero_receivers:
        raise ValueError("a rescued pattern has at least one zero entry")
    stay = math.prod(channel.omega(r) for r in zero_receivers)
    if stay >= 1.0:
        raise ValueError("pattern can never be rescued with loss rate 1")
    return queue_size / (1.0 - stay)


def transfer_expectation(queue_size: float, source: LossPattern,
                         target: LossPattern, dest: DestinationSet,
                         channel: ChannelParams) -> float:
    """ Expected packets moved from ``source`` queue to ``target`` queue
    while ``source`` is rescued."""
    if not queue_size:
        return 0.0
    probability = transition_prob(source, target, dest, channel.omegas)
    if not probability:
        return 0.0
    return rescue_expectation(queue_size, source.zero_receivers,
                              channel) * probability


def lambda_arq(channel: ChannelParams) -> float:
    """ Average retransmissions per packet when every loss is resent alone."""
    return math.fsum(omega / (1.0 - omega)
                     for omega in channel.omegas) / channel.n


def lambda_ncarq(channel: ChannelParams) -> float:
    """ Average retransmissions per packet with NC-ARQ (native coding)."""
    _require_sorted(channel)
    n = channel.n
    return math.fsum(_tail_product(channel, i) / (1.0 - channel.omega(i))
                     for i in range(1, n + 1)) / n


def lambda_ear(channel: ChannelParams) -> float:
    """ Average retransmissions per packet with encoded packet-assisted
    rescue."""
    _require_sorted(channel)
    n = channel.n
    total = 0.0
    for i in range(1, n + 1):
        tail = _tail_product(channel, i)
        total += tail / (1.0 - tail)
    return total / n


def analytic_gain(channel: ChannelParams) -> float:
    """ NC-ARQ over EAR retransmission ratio, 1 for a lossless channel."""
    channel, _ = sort_channel(channel)
    ear = lambda_ear(channel)
    if not ear:
        return 1.0
    return lambda_ncarq(channel) / ear


def lemma1_counts(size_a: float, size_b: float, omega_a: float,
                  omega_b: float) -> Tuple[float, float]:
    """
    Coded retransmissions and solo natives when queue ``a`` is dominated by
    queue ``b``.

    :return: (retransmissions until ``a`` is rescued riding with ``b``,
        packets of ``b`` left to be sent alone)
    """
    if size_a > size_b or omega_a > omega_b:
        raise ValueError("queue a must be no larger and no lossier than b")
    if not 0.0 <= omega_a < 1.0 or not 0.0 <= omega_b < 1.0:
        raise ValueError("loss rates must be in [0, 1)")
    coded = size_a / (1.0 - omega_a)
    solo = size_b - size_a * (1.0 - omega_b) / (1.0 - omega_a)
    return coded, solo


def _check_symmetric(packets: float, omega: float):
    if packets < 0:
        raise ValueError("packet count must not be negative")
    if not 0.0 <= omega < 1.0:
        raise ValueError(f"loss rate {omega} outside [0, 1)")


def n1_n2(packets: float, omega: float) -> Tuple[float, float]:
    """
    Queue sizes deciding whether unwanted packets appear on a symmetric
    3-receiver hop: the native pattern held by both other receivers (N1)
    and the coded pattern held by the third receiver (N2).
    """
    _check_symmetric(packets, omega)
    if not omega:
        return 0.0, 0.0
    n1 = packets * omega * (1 - omega) ** 2 / (1 - omega ** 3)
    n2 = (packets * omega ** 4 * (1 - omega) ** 2 /
          ((1 - omega ** 3) * (1 - omega ** 2)))
    return n1, n2


def unwanted_overhead(packets: float, omega: float) -> float:
    """ Expected solo deliveries of unwanted coded packets on a symmetric
    3-receiver hop; zero while ω³ + ω² - 1 <= 0."""
    _check_symmetric(packets, omega)
    excess = omega ** 3 + omega ** 2 - 1
    if excess <= 0:
        return 0.0
    return (packets * omega * (1 - omega) * excess /
            ((1 - omega ** 3) * (1 - omega ** 2)))


def initial_pattern_prob(pattern: LossPattern, dest: int,
                         channel: ChannelParams) -> float:
    """ Probability that the first transmission of a packet for ``dest``
    leaves exactly this receive-state."""
    if pattern.size != channel.n:
        raise ValueError("pattern and channel have mismatched lengths")
    if pattern.holds(dest):
        return 0.0
    probability = 1.0
    for receiver, omega in enumerate(channel.omegas, start=1):
        probability *= (1.0 - omega) if pattern.holds(receiver) else omega
    return probability


def _upper_patterns(i: int, n: int) -> Tuple[LossPattern, ...]:
    return tuple(LossPattern(mask, n) for mask in range(1 << (i - 1)))


def primary_sets(i: int, n: int) -> PrimarySets:
    """
    Primary set of receiver ``i``.

    ``upper`` holds receiver i's patterns that no receiver j >= i holds;
    ``lower`` holds patterns of receivers j < i whose highest holder is i.
    Primary sets of different receivers are disjoint and together cover every
    pattern of every receiver.
    """
    if not 1 <= i <= n:
        raise ValueError(f"receiver {i} outside [1, {n}]")
    own = DestinationSet.of(i)
    upper = frozenset((pattern, own) for pattern in _upper_patterns(i, n))
    top = 1 << (i - 1)
    lower = set()
    for j in range(1, i):
        dest = DestinationSet.of(j)
        for low in range(top):
            if low & dest.mask:
                continue
            lower.add((LossPattern(top | low, n), dest))
    lower = frozenset(lower)
    return PrimarySets(upper, lower, upper | lower)


def phi_rescue_total(i: int, packets: float, channel: ChannelParams) -> float:
    """ Expected retransmissions spent on receiver i's primary set."""
    _require_sorted(channel)
    tail = _tail_product(channel, i)
    return packets * tail / (1.0 - tail)


def pattern_flow_solve(packets: float, channel: ChannelParams) -> FlowLedger:
    """
    Numerically follow every queue of each primary set.

    Within a primary set a packet is charged until it leaves the set: its
    destination gets it or a lossier receiver overhears it. Queues are
    visited by ascending weight so every inflow is final before the queue is
    rescued.
    """
    _require_sorted(channel)
    n = channel.n
    if n > MAX_FLOW_RECEIVERS:
        raise ValueError(f"flow solver enumerates at most "
                         f"{MAX_FLOW_RECEIVERS} receivers")
    ledger = FlowLedger()
    if not packets:
        return ledger

    for i in range(1, n + 1):
        dest = DestinationSet.of(i)
        patterns = sorted(_upper_patterns(i, n),
                          key=lambda p: (p.weight, p.mask))
        incoming: Dict[LossPattern, float] = {}
        total = []
        for pattern in patterns:
            key = (pattern, dest)
            original = packets * initial_pattern_prob(pattern, i, channel)
            inflow = original + incoming.get(pattern, 0.0)
            ledger.initial[key] = original
            ledger.inflow[key] = inflow
            rescue = rescue_expectation(inflow, pattern.zero_receivers,
                                        channel)
            ledger.rescue[key] = rescue
            total.append(rescue)
            for target in patterns:
                if target == pattern or not target.covers(pattern):
                    continue
                amount = transfer_expectation(inflow, pattern, target, dest,
                                              channel)
                ledger.transfers[(key, (target, dest))] = amount
                incoming[target] = incoming.get(target, 0.0) + amount
        ledger.totals[i] = math.fsum(total)
    return ledger
