""" Loss-pattern algebra: weights, codeability and code groups."""
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Tuple

MAX_RECEIVERS = 64


@dataclass(frozen=True)
class LossPattern:
    """
    Receive-state of a packet at every receiver.

    Bit ``i - 1`` of ``mask`` is set when receiver ``R_i`` holds the packet.
    Receiver indices are 1-based everywhere in the public API.
    """
    mask: int
    size: int

    def __post_init__(self):
        if not 1 <= self.size <= MAX_RECEIVERS:
            raise ValueError(f"receiver count must be in [1, {MAX_RECEIVERS}]")
        if self.mask < 0 or self.mask >> self.size:
            raise ValueError(f"mask {self.mask:#x} does not fit {self.size} "
                             f"receivers")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "LossPattern":
        mask = 0
        for index, bit in enumerate(bits):
            if bit:
                mask |= 1 << index
        return cls(mask, len(bits))

    @classmethod
    def of(cls, size: int, receivers: Iterable[int]) -> "LossPattern":
        """ Pattern where exactly the given receivers hold the packet."""
        return cls(_mask_of(receivers, size), size)

    def __repr__(self):  # pragma: no cover
        return f"LossPattern({''.join(map(str, self.bits))})"

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __len__(self):
        return self.size

    def __getitem__(self, receiver: int) -> bool:
        return self.holds(receiver)

    @property
    def bits(self) -> Tuple[int, ...]:
        return tuple((self.mask >> i) & 1 for i in range(self.size))

    @property
    def weight(self) -> int:
        return bin(self.mask).count("1")

    @property
    def holders(self) -> Tuple[int, ...]:
        """ 1-based indices of receivers holding the packet."""
        return tuple(i + 1 for i in range(self.size) if (self.mask >> i) & 1)

    @property
    def zero_receivers(self) -> Tuple[int, ...]:
        return tuple(i + 1 for i in range(self.size)
                     if not (self.mask >> i) & 1)

    def holds(self, receiver: int) -> bool:
        _check_receiver(receiver, self.size)
        return bool((self.mask >> (receiver - 1)) & 1)

    def covers(self, other: "LossPattern") -> bool:
        """ Every receiver holding ``other`` also holds this packet."""
        return other.mask & ~self.mask == 0

    def with_holders(self, added: int = 0, removed: int = 0) -> "LossPattern":
        """ Copy with the receivers in mask ``added`` set and ``removed``
        cleared."""
        return LossPattern((self.mask | added) & ~removed, self.size)


@dataclass(frozen=True)
class DestinationSet:
    """ Intended receivers of a packet (1-based), kept as a bit mask."""
    mask: int

    def __post_init__(self):
        if self.mask <= 0:
            raise ValueError("destination set must not be empty")

    @classmethod
    def of(cls, *receivers: int) -> "DestinationSet":
        return cls(_mask_of(receivers))

    def __repr__(self):  # pragma: no cover
        return f"DestinationSet{set(self.receivers)}"

    def __iter__(self) -> Iterator[int]:
        return iter(self.receivers)

    def __len__(self):
        return bin(self.mask).count("1")

    def __contains__(self, receiver: int) -> bool:
        return receiver >= 1 and bool((self.mask >> (receiver - 1)) & 1)

    @property
    def receivers(self) -> Tuple[int, ...]:
        return tuple(i + 1 for i in range(self.mask.bit_length())
                     if (self.mask >> i) & 1)

    def isdisjoint(self, other: "DestinationSet") -> bool:
        return self.mask & other.mask == 0


# A code group member: the queue's receive-state and its pending receivers.
Member = Tuple[LossPattern, DestinationSet]


@dataclass(frozen=True)
class CodeGroup:
    """
    Loss patterns whose packets can be XORed into one transmission.

    ``members[0]`` is the pattern the group was built for; a group with a
    single member means the packet has no coding partner and is sent alone.
    """
    members: Tuple[Member, ...]

    def __len__(self):
        return len(self.members)

    def __iter__(self) -> Iterator[Member]:
        return iter(self.members)

    @property
    def anchor(self) -> Member:
        return self.members[0]

    @property
    def partners(self) -> Tuple[Member, ...]:
        return self.members[1:]


def _mask_of(receivers: Iterable[int], size: int = MAX_RECEIVERS) -> int:
    mask = 0
    for receiver in receivers:
        _check_receiver(receiver, size)
        mask |= 1 << (receiver - 1)
    return mask


def _check_receiver(receiver: int, size: int):
    if not 1 <= receiver <= size:
        raise ValueError(f"receiver index {receiver} outside [1, {size}]")


def weight(pattern: LossPattern) -> int:
    """ Number of receivers holding the packet."""
    return pattern.weight


def can_code(members: Sequence[Member]) -> bool:
    """
    Check whether packets with these receive-states and destinations can be
    XORed together so that every destination decodes its own packet.

    Destination sets must be pairwise disjoint and, for each member ``i`` and
    each receiver ``j`` it is intended for, column ``j`` of the stacked pattern
    matrix has its only zero in row ``i``.
    """
    if not members:
        raise ValueError("no members to code")
    size = members[0][0].size
    if any(pattern.size != size for pattern, _ in members):
        raise ValueError("patterns have mismatched lengths")
    if not 2 <= len(members) <= size:
        raise ValueError(f"member count {len(members)} outside [2, {size}]")

    union = 0
    for _, dest in members:
        if dest.mask >> size:
            raise ValueError(f"destination {dest} outside {size} receivers")
        if union & dest.mask:
            return False
        union |= dest.mask

    for i, (pattern, dest) in enumerate(members):
        if pattern.mask & dest.mask:
            # a destination that already holds the packet cannot be helped
            return False
        for k, (other, _) in enumerate(members):
            if k != i and dest.mask & ~other.mask:
                return False
    return True


def unique_code_group(pattern: LossPattern,
                      dest: DestinationSet) -> CodeGroup:
    """
    Build the only code group containing ``(pattern, dest)`` whose columns
    outside the union of destinations are all zero.

    For each receiver ``j`` holding the packet, the partner pattern is the
    anchor with the destination entries set and entry ``j`` cleared, intended
    for ``j`` alone. The group has ``weight(pattern) + 1`` members.
    """
    if dest.mask >> pattern.size:
        raise ValueError(f"destination {dest} outside {pattern.size} "
                         f"receivers")
    if pattern.mask & dest.mask:
        raise ValueError("intended receivers already hold the packet")
    members = [(pattern, dest)]
    for holder in pattern.holders:
        bit = 1 << (holder - 1)
        partner = pattern.with_holders(added=dest.mask, removed=bit)
        members.append((partner, DestinationSet(bit)))
    return CodeGroup(tuple(members))


def dominates(qa: Tuple[int, float], qb: Tuple[int, float]) -> bool:
    """
    Whether queue ``qa`` is fully absorbed by coded transmissions with ``qb``.

    Each argument is ``(queue size, loss rate of its destination)``. Holds when
    ``qa`` is no larger and its destination loses no more often.
    """
    size_a, omega_a = qa
    size_b, omega_b = qb
    return size_a <= size_b and omega_a <= omega_b


def transition_prob(source: LossPattern, target: LossPattern,
                    dest: DestinationSet, omegas: Sequence[float]) -> float:
    """
    Probability that one transmission moves a packet from ``source`` to
    ``target`` while every intended receiver misses it.

    With ``target == source`` this is the stay probability, the product of
    loss rates over all receivers that lack the packet.
    """
    if source.size != target.size or len(omegas) != source.size:
        raise ValueError("patterns and channel have mismatched lengths")
    if not target.covers(source) or target.mask & dest.mask:
        # held packets are never forgotten; destinations must still miss it
        return 0.0
    probability = 1.0
    for i in range(source.size):
        bit = 1 << i
        if source.mask & bit:
            continue
        if target.mask & bit:
            probability *= 1.0 - omegas[i]
        else:
            probability *= omegas[i]
    return probability


def rescue_probability(dest: DestinationSet,
                       omegas: Sequence[float]) -> float:
    """ Probability that at least one intended receiver gets the packet."""
    return 1.0 - math.prod(omegas[r - 1] for r in dest)
