""" Type definitions used in ncrescue package."""
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

from ncrescue.patterns import DestinationSet, LossPattern

if TYPE_CHECKING:  # pragma: no cover
    from ncrescue.models import Packet

# Key of a rescue queue: receive-state and still pending destinations.
QueueKey = Tuple[LossPattern, DestinationSet]

# Per-receiver feedback for one transmission, receiver R_i at index i - 1.
Deliveries = Sequence[bool]

# Outcome of feedback for a packet: the packet and the queue it moves to, or
# None when all its destinations got it.
UpdateUnit = Tuple["Packet", Optional[QueueKey]]
