"""
Round based rescue of lost packets.

A trial sends every native packet once, then repeats rounds until all rescue
queues are empty: the scheme schedules transmissions from the queues, the
channel decides who gets each of them and the feedback tracker moves every
transmitted unit to its next queue.

ARQ resends every lost packet alone. NC-ARQ XORs native packets of different
receivers using only what receivers got in the initial phase. EAR also codes
packets that were retransmitted coded and overheard, following receive-states
reported after every round.
"""
import itertools
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import (Callable, Deque, Dict, Iterator, List, Optional, Sequence,
                    Tuple)

import numpy as np

from ncrescue.analytic import ChannelParams
from ncrescue.channel import INITIAL_ROUND, RngStream, sample_round
from ncrescue.exceptions import CodingError, RescueError, RoundCapExceeded
from ncrescue.models import Packet, ReceiverStore, RescueQueues, Transmission
from ncrescue.overhead import HeaderModel, SCHEME_A, SCHEME_B, VARIANTS, \
    header_len
from ncrescue.patterns import DestinationSet, LossPattern, can_code, \
    dominates, unique_code_group
from ncrescue.tracker import DYNAMIC, STATIC, FeedbackTracker
from ncrescue.types import QueueKey

logger = logging.getLogger(__name__)

ARQ, NCARQ, EAR = 'arq', 'ncarq', 'ear'
SCHEMES = (ARQ, NCARQ, EAR)

DEFAULT_ROUND_CAP = 10 ** 6

HEADER_MODELS = {variant: HeaderModel(variant) for variant in VARIANTS}

# Retransmission rounds in which every single-receiver queue that a coded
# queue may absorb is kept back: coded units only start to arrive once the
# first coded round has been reported.
RESERVE_ROUNDS = 2


@dataclass(frozen=True)
class Simulation:
    """ Parameters shared by all trials of one grid point."""
    packets: int
    channel: ChannelParams
    seed: int = 1
    round_cap: int = DEFAULT_ROUND_CAP

    def __post_init__(self):
        if self.packets < 1:
            raise ValueError("at least one packet per receiver is required")
        if self.round_cap < 1:
            raise ValueError("round cap must be positive")

    @property
    def receivers(self) -> int:
        return self.channel.n


@dataclass
class TrialResult:
    """ Counters of one trial of one scheme."""
    scheme: str
    trial: int
    packets: int
    receivers: int
    retransmissions: int = 0
    # transmissions sent in each retransmission round
    rounds: List[int] = field(default_factory=list)
    coded: int = 0
    coded_with_coded: int = 0
    unwanted: int = 0
    header_bytes: Dict[str, int] = field(
        default_factory=lambda: dict.fromkeys(VARIANTS, 0))

    @property
    def initial_transmissions(self) -> int:
        return self.packets * self.receivers

    @property
    def per_packet(self) -> float:
        """ Average retransmissions per native packet."""
        return self.retransmissions / self.initial_transmissions

    def mean_header_bytes(self, variant: str) -> float:
        """ Header bytes per retransmission."""
        if not self.retransmissions:
            return 0.0
        return self.header_bytes[variant] / self.retransmissions

    def record(self, transmission: Transmission, unwanted: bool):
        self.retransmissions += 1
        if transmission.is_coded:
            self.coded += 1
            if transmission.coded_units >= 2:
                self.coded_with_coded += 1
        if unwanted:
            self.unwanted += 1
        for variant, model in HEADER_MODELS.items():
            self.header_bytes[variant] += header_len(
                transmission.packet, model, self.receivers)


def _key_order(key: QueueKey) -> Tuple[int, int]:
    pattern, dest = key
    return dest.mask, pattern.mask


def _receiver_order(channel: ChannelParams) -> List[int]:
    """ Receivers in ascending (loss rate, index) order."""
    rank = channel.rank()
    return sorted(rank, key=rank.__getitem__)


def _emit(packet_id: int, units: List[Packet],
          keys: List[QueueKey]) -> Transmission:
    if not can_code(keys):
        raise CodingError(f"cannot code queues {keys!r}")
    return Transmission.coded(packet_id, units, keys)


def initial_phase(packets: int, channel: ChannelParams, stream: RngStream
                  ) -> Tuple[Tuple[ReceiverStore, ...], RescueQueues]:
    """
    Send each native packet once.

    Packet ``seq`` for receiver ``R_d`` has id ``seq * N + d - 1``. Packets
    lost by their destination are queued under their sampled receive-state.
    """
    if packets < 1:
        raise ValueError("at least one packet per receiver is required")
    n = channel.n
    total = packets * n
    deliveries = sample_round(channel, total, stream, INITIAL_ROUND)
    stores = tuple(
        ReceiverStore(receiver, np.flatnonzero(deliveries[:, receiver - 1])
                      .tolist())
        for receiver in range(1, n + 1))

    weights = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
    masks = deliveries.astype(np.uint64) @ weights
    ids = np.arange(total)
    lost = np.flatnonzero(~deliveries[ids, ids % n])

    queues = RescueQueues()
    for packet_id in lost.tolist():
        seq, index = divmod(packet_id, n)
        packet = Packet.native(seq, index + 1, n)
        key = (LossPattern(int(masks[packet_id]), n),
               DestinationSet.of(index + 1))
        queues.push(key, packet)
    logger.debug("initial phase: %d of %d packets lost", len(queues), total)
    return stores, queues


def schedule_arq(queues: RescueQueues) -> List[Transmission]:
    """ Resend every queued packet alone."""
    drained = queues.drain()
    return [Transmission.solo(unit, key)
            for key in sorted(drained, key=_key_order)
            for unit in drained[key]]


def _ncarq_group(receiver: int, pattern: LossPattern,
                 buckets: Dict[int, Dict[LossPattern, Deque[Packet]]],
                 order: List[int]) -> List[QueueKey]:
    """
    Grow a group around an anchor queue one receiver at a time.

    Candidates are the receivers holding the anchor packet. Each candidate
    adds the queue that keeps the group codeable and is held by most of the
    remaining candidates, then the lightest one.
    """
    members = [(pattern, DestinationSet.of(receiver))]
    candidates = [j for j in order
                  if pattern.holds(j) and any(buckets.get(j, {}).values())]
    for position, j in enumerate(candidates):
        rest = candidates[position + 1:]
        own = DestinationSet.of(j)
        eligible = [p for p, queue in buckets[j].items()
                    if queue and can_code(members + [(p, own)])]
        if not eligible:
            continue
        best = min(eligible, key=lambda p: (
            -sum(p.holds(k) for k in rest), p.weight, p.mask))
        members.append((best, own))
    return members


def schedule_ncarq(queues: RescueQueues, channel: ChannelParams,
                   ids: Iterator[int]) -> List[Transmission]:
    """
    XOR the largest groups of native packets with distinct destinations.

    Receivers are visited in ascending loss rate; each of their queues,
    heaviest receive-state first, is coded with partner queues as long as
    both have packets, and whatever is left goes alone.
    """
    drained = queues.drain()
    buckets: Dict[int, Dict[LossPattern, Deque[Packet]]] = defaultdict(dict)
    for (pattern, dest), queue in drained.items():
        receiver, = dest.receivers
        buckets[receiver][pattern] = queue

    order = _receiver_order(channel)
    transmissions = []
    for receiver in order:
        own = buckets.get(receiver, {})
        for pattern in sorted(own, key=lambda p: (-p.weight, p.mask)):
            queue = own[pattern]
            while queue:
                keys = _ncarq_group(receiver, pattern, buckets, order)
                if len(keys) == 1:
                    transmissions.extend(
                        Transmission.solo(unit, keys[0]) for unit in queue)
                    queue.clear()
                    break
                members = [buckets[dest.receivers[0]][p] for p, dest in keys]
                for _ in range(min(map(len, members))):
                    units = [member.popleft() for member in members]
                    transmissions.append(_emit(next(ids), units, keys))
    return transmissions


def _anchor_order(channel: ChannelParams) -> Callable[[QueueKey], tuple]:
    def order(key: QueueKey) -> tuple:
        pattern, dest = key
        return (pattern.weight, min(channel.omega(r) for r in dest),
                dest.mask, pattern.mask)
    return order


class PartnerReserve:
    """
    Native queues kept back for the coded queues that absorb them.

    A coded queue holds units for several pending receivers; its unique code
    group pairs it with single-receiver queues. Such a queue does not anchor
    a group of its own while one of its coded owners dominates it, judged on
    the units both gained in the previous round and on the worst loss rate
    of their destinations. Kept queues wait for the next round and can still
    be taken as partners. During the first ``warmup`` rounds every queue
    that could have a coded owner is kept.
    """

    def __init__(self, channel: ChannelParams, warmup: int = RESERVE_ROUNDS):
        self.channel = channel
        self.warmup = warmup
        self.round_no = 0
        # units that entered each queue in the previous round
        self.arrivals: Counter = Counter()
        self._incoming: Counter = Counter()
        self._owners: Dict[QueueKey, List[QueueKey]] = {}

    def __repr__(self):  # pragma: no cover
        return f'PartnerReserve(round={self.round_no}, warmup={self.warmup})'

    def start_round(self):
        self.round_no += 1
        self.arrivals, self._incoming = self._incoming, Counter()
        owners = defaultdict(list)
        for key in self.arrivals:
            if len(key[1]) < 2:
                continue
            for partner in unique_code_group(*key).partners:
                owners[partner].append(key)
        self._owners = owners

    def record(self, transmission: Transmission, key: QueueKey):
        """ Count a unit queued under ``key`` after ``transmission``."""
        if transmission.is_coded or key != transmission.keys[0]:
            self._incoming[key] += 1

    def _state(self, key: QueueKey) -> Tuple[int, float]:
        return self.arrivals[key], max(self.channel.omega(r) for r in key[1])

    def keeps(self, key: QueueKey) -> bool:
        pattern, dest = key
        if len(dest) != 1 or pattern.weight < 2:
            return False
        if self.round_no <= self.warmup:
            return True
        state = self._state(key)
        return any(dominates(state, self._state(owner))
                   for owner in self._owners.get(key, ()))


def _rescue(key: QueueKey, drained: Dict[QueueKey, Deque[Packet]],
            ids: Iterator[int], transmissions: List[Transmission]):
    queue = drained[key]
    while queue:
        group = unique_code_group(*key)
        partners = [m for m in group.partners if drained.get(m)]
        if not partners:
            transmissions.extend(Transmission.solo(unit, key)
                                 for unit in queue)
            queue.clear()
            return
        keys = [key] + partners
        members = [drained[k] for k in keys]
        for _ in range(min(map(len, members))):
            units = [member.popleft() for member in members]
            transmissions.append(_emit(next(ids), units, keys))


def schedule_ear(queues: RescueQueues, channel: ChannelParams,
                 ids: Iterator[int],
                 reserve: Optional[PartnerReserve] = None
                 ) -> List[Transmission]:
    """
    Rescue queues lightest receive-state first, each with its code group.

    Every anchor queue is XORed with all non-empty partner queues of its
    unique code group while all of them have packets; when a partner runs
    dry the rest keep coding as a smaller group, and the anchor's leftovers
    go alone. Coded units may be XORed with natives or other coded units.

    Queues the ``reserve`` keeps are requeued for the next round, unless
    nothing else is left to send.
    """
    drained = queues.drain()
    transmissions: List[Transmission] = []
    kept = []
    for key in sorted(drained, key=_anchor_order(channel)):
        if reserve is not None and drained[key] and reserve.keeps(key):
            kept.append(key)
            continue
        _rescue(key, drained, ids, transmissions)

    if kept and not transmissions:
        for key in kept:
            _rescue(key, drained, ids, transmissions)
    else:
        for key in kept:
            for unit in drained[key]:
                queues.push(key, unit)
        if kept:
            logger.debug("%d units kept for coded partners", len(queues))
    return transmissions


def is_unwanted(transmission: Transmission, rank: Dict[int, int]) -> bool:
    """
    Whether a transmission resends a coded unit nobody can be coded with.

    That is a solo coded unit for several receivers, each of which has a
    lossier receiver holding the unit.
    """
    if transmission.is_coded:
        return False
    unit, = transmission.units
    pattern, dest = transmission.keys[0]
    if not unit.coded or len(dest) < 2:
        return False
    return all(any(rank[h] > rank[d] for h in pattern.holders) for d in dest)


def _check_delivery(stores: Sequence[ReceiverStore], packets: int):
    n = len(stores)
    for store in stores:
        missing = sum(seq * n + store.receiver - 1 not in store
                      for seq in range(packets))
        if missing:
            raise RescueError(f"R{store.receiver} misses {missing} packets "
                              f"after the rescue process")


def run_trial(simulation: Simulation, scheme: str,
              trial: int = 0) -> TrialResult:
    """ Run one trial of a scheme until all lost packets are delivered."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    channel = simulation.channel
    n = channel.n
    stream = RngStream(simulation.seed, trial)
    stores, queues = initial_phase(simulation.packets, channel, stream)
    ids = itertools.count(simulation.packets * n)
    tracker = FeedbackTracker(n, DYNAMIC if scheme == EAR else STATIC)
    reserve = PartnerReserve(channel) if scheme == EAR else None
    rank = channel.rank()
    result = TrialResult(scheme, trial, simulation.packets, n)

    round_no = 0
    while queues:
        if round_no >= simulation.round_cap:
            raise RoundCapExceeded(scheme, trial, round_no, len(queues))
        round_no += 1
        if scheme == ARQ:
            transmissions = schedule_arq(queues)
        elif scheme == NCARQ:
            transmissions = schedule_ncarq(queues, channel, ids)
        else:
            reserve.start_round()
            transmissions = schedule_ear(queues, channel, ids, reserve)
        deliveries = sample_round(channel, len(transmissions), stream,
                                  round_no)
        for transmission, row in zip(transmissions, deliveries.tolist()):
            result.record(transmission, is_unwanted(transmission, rank))
            for unit, key in tracker.apply_feedback(transmission, row,
                                                    stores):
                if key is None:
                    continue
                queues.push(key, unit)
                if reserve is not None:
                    reserve.record(transmission, key)
        result.rounds.append(len(transmissions))
        logger.debug("%s trial %d round %d: %d sent, %d queued",
                     scheme, trial, round_no, len(transmissions), len(queues))

    _check_delivery(stores, simulation.packets)
    logger.debug("%s trial %d: %d retransmissions in %d rounds, "
                 "A=%d B=%d header bytes", scheme, trial,
                 result.retransmissions, round_no,
                 result.header_bytes[SCHEME_A], result.header_bytes[SCHEME_B])
    return result
