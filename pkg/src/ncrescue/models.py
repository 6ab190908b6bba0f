""" Packets, receiver stores and sender rescue queues."""
from collections import deque
from dataclasses import dataclass, field
from typing import (Deque, Dict, FrozenSet, Iterable, Iterator, List, Mapping,
                    Set, Tuple)

from ncrescue.patterns import DestinationSet
from ncrescue.types import QueueKey


@dataclass(frozen=True)
class Packet:
    """
    Native packet or XOR of queued packets.

    ``requests`` maps each intended receiver to the native ids it wants from
    this packet. Natives have no ``parts``; a coded packet is the XOR of its
    parts. Packets compare by ``id``.
    """
    id: int
    requests: Mapping[int, FrozenSet[int]] = field(compare=False)
    parts: Tuple["Packet", ...] = field(default=(), compare=False)

    def __repr__(self):  # pragma: no cover
        if not self.parts:
            return f"P{self.id}"
        return "(" + "+".join(map(repr, self.parts)) + ")"

    @classmethod
    def native(cls, seq: int, destination: int, receivers: int) -> "Packet":
        """ ``seq``-th packet (0-based) for 1-based ``destination``."""
        packet_id = seq * receivers + destination - 1
        return cls(packet_id, {destination: frozenset((packet_id,))})

    @classmethod
    def combine(cls, packet_id: int, parts: Iterable["Packet"]) -> "Packet":
        """ XOR packets with disjoint intended receivers."""
        parts = tuple(parts)
        if len(parts) < 2:
            raise ValueError("a coded packet needs at least two parts")
        requests: Dict[int, FrozenSet[int]] = {}
        for part in parts:
            for receiver, natives in part.requests.items():
                if receiver in requests:
                    raise ValueError(f"receiver {receiver} requests several "
                                     f"parts of one coded packet")
                requests[receiver] = natives
        return cls(packet_id, requests, parts)

    def narrowed(self, receivers: DestinationSet) -> "Packet":
        """ Same packet, requested only by the given receivers."""
        requests = {receiver: self.requests[receiver]
                    for receiver in receivers}
        return Packet(self.id, requests, self.parts)

    @property
    def coded(self) -> bool:
        return bool(self.parts)

    @property
    def constituents(self) -> FrozenSet[int]:
        """ Native packet ids XORed into this packet."""
        return frozenset().union(*self.requests.values())

    @property
    def nc_count(self) -> int:
        return len(self.constituents)

    @property
    def destinations(self) -> DestinationSet:
        return DestinationSet.of(*self.requests)


class ReceiverStore:
    """
    Packets one receiver holds or has decoded.

    Stores only grow: overheard packets are kept until the rescue process
    ends. A coded packet counts as held when all its parts are held.
    """

    def __init__(self, receiver: int, held: Iterable[int] = ()):
        self.receiver = receiver
        self.held: Set[int] = set(held)

    def __repr__(self):  # pragma: no cover
        return f"ReceiverStore(R{self.receiver}, {len(self.held)} held)"

    def __contains__(self, packet_id: int) -> bool:
        return packet_id in self.held

    def holds(self, packet: Packet) -> bool:
        if packet.id in self.held:
            return True
        return bool(packet.parts) and all(map(self.holds, packet.parts))

    def has_all(self, natives: Iterable[int]) -> bool:
        return all(native in self.held for native in natives)

    def receive(self, packet: Packet):
        """ Store a packet and decode whatever single part it reveals."""
        self.held.add(packet.id)
        self._peel(packet)

    def _peel(self, packet: Packet):
        while packet.parts:
            missing = [part for part in packet.parts if not self.holds(part)]
            if len(missing) != 1:
                # nothing new or still undecodable, keep it for later
                return
            packet = missing[0]
            self.held.add(packet.id)


class RescueQueues:
    """ Lost packets grouped by receive-state and pending receivers."""

    def __init__(self):
        self._queues: Dict[QueueKey, Deque[Packet]] = {}
        # ids of queued units
        self._ids: Set[int] = set()

    def __repr__(self):  # pragma: no cover
        return f"RescueQueues({len(self._queues)} queues, {len(self)} packets)"

    def __len__(self):
        return len(self._ids)

    def __bool__(self):
        return bool(self._ids)

    def __iter__(self) -> Iterator[QueueKey]:
        return iter(self._queues)

    def __getitem__(self, key: QueueKey) -> Tuple[Packet, ...]:
        return tuple(self._queues.get(key, ()))

    def push(self, key: QueueKey, packet: Packet):
        pattern, dest = key
        if packet.id in self._ids:
            raise ValueError(f"{packet!r} is already queued")
        if pattern.mask & dest.mask:
            raise ValueError("pending receivers already hold the packet")
        self._queues.setdefault(key, deque()).append(packet)
        self._ids.add(packet.id)

    def drain(self) -> Dict[QueueKey, Deque[Packet]]:
        """ Remove and return every queue."""
        queues, self._queues, self._ids = self._queues, {}, set()
        return queues


@dataclass(frozen=True)
class Transmission:
    """
    One retransmitted packet.

    ``packet`` is what goes on air: the single queued unit or the XOR of
    ``units``. ``keys`` are the queues the units were taken from.
    """
    packet: Packet
    units: Tuple[Packet, ...]
    keys: Tuple[QueueKey, ...]

    @classmethod
    def solo(cls, unit: Packet, key: QueueKey) -> "Transmission":
        return cls(unit, (unit,), (key,))

    @classmethod
    def coded(cls, packet_id: int, units: List[Packet],
              keys: List[QueueKey]) -> "Transmission":
        return cls(Packet.combine(packet_id, units), tuple(units), tuple(keys))

    @property
    def is_coded(self) -> bool:
        return len(self.units) > 1

    @property
    def coded_units(self) -> int:
        """ Number of already coded units mixed into this transmission."""
        return sum(unit.coded for unit in self.units)

    @property
    def pending(self) -> DestinationSet:
        mask = 0
        for _, dest in self.keys:
            mask |= dest.mask
        return DestinationSet(mask)
