""" Tracking receiver feedback for retransmitted packets."""
from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ncrescue.exceptions import DecodeError, MonotonicityError
from ncrescue.models import Packet, ReceiverStore, Transmission
from ncrescue.patterns import DestinationSet, LossPattern
from ncrescue.types import Deliveries, QueueKey, UpdateUnit

# Receive-state bookkeeping variants.
#
# DYNAMIC patterns are recomputed from receiver stores after every
# transmission: clients report overheard packets, coded ones included.
# STATIC patterns keep the receive-state sampled in the initial phase:
# clients never report overheard retransmissions.
DYNAMIC, STATIC = 'dynamic', 'static'


# Constants denoting what happens with a transmitted queue unit.
#
# * When every pending receiver of a unit now holds its natives, the unit is
# RESCUED and leaves the queues.
# * When some pending receiver still lacks it and the unit keeps its queue key,
# it is STAYING.
# * When the key changes (more receivers overheard it, fewer receivers still
# wait for it, or a coded transmission replaced it), the unit is TRANSFERRED.
RESCUED, STAYING, TRANSFERRED = 1, 0, -1


class FeedbackTracker:
    """
    Applies per-receiver feedback of a transmission to receiver stores and
    decides which queue every transmitted unit goes to next.
    """

    def __init__(self, receivers: int, patterns: str = DYNAMIC):
        if patterns not in (DYNAMIC, STATIC):
            raise ValueError(f"unknown pattern bookkeeping {patterns!r}")
        self.receivers = receivers
        self.patterns = patterns
        self.modes: Dict[int, int] = Counter()
        # (old key, new key) -> moved units; conservation diagnostics
        self.transitions: Dict[Tuple[QueueKey, Optional[QueueKey]], int] = \
            Counter()

    def __repr__(self):  # pragma: no cover
        return f'FeedbackTracker({self.patterns}, N={self.receivers})'

    def apply_feedback(self, transmission: Transmission,
                       deliveries: Deliveries,
                       stores: Sequence[ReceiverStore]
                       ) -> List[UpdateUnit]:
        """
        Update stores with a transmission's feedback.

        :param transmission: packet just sent
        :param deliveries: per-receiver success flags, receiver R_i at i - 1
        :param stores: receiver stores, R_i at i - 1
        :return: each unit with its next queue key, or None when rescued.
        """
        if len(deliveries) != self.receivers or len(stores) != self.receivers:
            raise ValueError(f"feedback for {len(deliveries)} receivers, "
                             f"expected {self.receivers}")
        packet = transmission.packet
        for store, delivered in zip(stores, deliveries):
            if delivered:
                store.receive(packet)

        for receiver in transmission.pending:
            store = stores[receiver - 1]
            if deliveries[receiver - 1] and not store.has_all(
                    packet.requests[receiver]):
                raise DecodeError(f"R{receiver} cannot decode {packet!r}")

        callback = getattr(self, f'_get_{self.patterns}_updates')
        updates = callback(transmission, stores)
        for (unit, key), old_key in zip(updates, self._old_keys(
                transmission, updates)):
            self.transitions[(old_key, key)] += 1
            self.modes[self._get_mode(old_key, key)] += 1
        return updates

    @staticmethod
    def _get_mode(old_key: QueueKey, key: Optional[QueueKey]) -> int:
        if key is None:
            return RESCUED
        return STAYING if key == old_key else TRANSFERRED

    @staticmethod
    def _old_keys(transmission: Transmission, updates: List[UpdateUnit]
                  ) -> Iterable[QueueKey]:
        keys = dict(zip(transmission.units, transmission.keys))
        for unit, _ in updates:
            # a coded replacement inherits the key of the first unit
            yield keys.get(unit, transmission.keys[0])

    def pattern_of(self, packet: Packet,
                   stores: Sequence[ReceiverStore]) -> LossPattern:
        """ Entry i is set when R_i holds or can compute the packet."""
        return LossPattern.of(self.receivers, (
            store.receiver for store in stores if store.holds(packet)))

    @staticmethod
    def pending_of(packet: Packet, dest: DestinationSet,
                   stores: Sequence[ReceiverStore]
                   ) -> Optional[DestinationSet]:
        """ Receivers of ``dest`` still missing their natives, None if none."""
        mask = 0
        for receiver in dest:
            if not stores[receiver - 1].has_all(packet.requests[receiver]):
                mask |= 1 << (receiver - 1)
        return DestinationSet(mask) if mask else None

    def _get_static_updates(self, transmission: Transmission,
                            stores: Sequence[ReceiverStore]
                            ) -> List[UpdateUnit]:
        """ Natives go back to their original queue until delivered."""
        updates = []
        for unit, key in zip(transmission.units, transmission.keys):
            pending = self.pending_of(unit, key[1], stores)
            updates.append((unit, None if pending is None else key))
        return updates

    def _get_dynamic_updates(self, transmission: Transmission,
                             stores: Sequence[ReceiverStore]
                             ) -> List[UpdateUnit]:
        """ Patterns follow what receivers report, coded units included."""
        if transmission.is_coded:
            packet = transmission.packet
            pending = self.pending_of(packet, transmission.pending, stores)
            if pending is None:
                return [(unit, None) for unit in transmission.units]
            # the coded packet becomes the retransmission unit, its parts
            # leave the queues
            pattern = self.pattern_of(packet, stores)
            return [(packet.narrowed(pending), (pattern, pending))]

        unit, = transmission.units
        old_pattern, dest = transmission.keys[0]
        pending = self.pending_of(unit, dest, stores)
        if pending is None:
            return [(unit, None)]
        pattern = self.pattern_of(unit, stores)
        if not pattern.covers(old_pattern):
            raise MonotonicityError(
                f"{unit!r} lost holders: {old_pattern!r} -> {pattern!r}")
        return [(unit.narrowed(pending), (pattern, pending))]
