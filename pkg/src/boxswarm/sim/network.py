"""Ring links as FIFO byte queues, with per-agent traffic counters."""

from collections import deque
from dataclasses import dataclass

from boxswarm.protocol import WireMessage


@dataclass
class TrafficCounter:
    messages_sent: int = 0
    bytes_sent: int = 0  # framed bytes
    payload_bytes_sent: int = 0
    messages_received: int = 0


class RingNetwork:
    """Directed links between ring neighbors only; frames are delivered in send order."""

    def __init__(self, ring):
        ring = tuple(ring)
        n = len(ring)
        if n < 2 or len(set(ring)) != n:
            raise ValueError("a ring needs at least two distinct agents")
        self.ring = ring
        self.links = {}
        for k in range(n):
            a, b = ring[k], ring[(k + 1) % n]
            self.links.setdefault((a, b), deque())
            self.links.setdefault((b, a), deque())
        self.traffic = {a: TrafficCounter() for a in ring}
        self.log = []  # (src, dst, kind, framed length) in send order

    def neighbors(self, agent):
        """``(predecessor, successor)`` of ``agent`` in ring order."""
        k = self.ring.index(agent)
        return self.ring[k - 1], self.ring[(k + 1) % len(self.ring)]

    def send(self, src, dst, message):
        if (src, dst) not in self.links:
            raise ValueError(f"agents {src} and {dst} are not ring neighbors")
        data = message.encode()
        self.links[(src, dst)].append(data)
        c = self.traffic[src]
        c.messages_sent += 1
        c.bytes_sent += len(data)
        c.payload_bytes_sent += len(message.payload)
        self.log.append((src, dst, int(message.kind), len(data)))

    def recv(self, dst, src):
        """Oldest frame on the ``src -> dst`` link, decoded; ``None`` if the link is empty."""
        q = self.links.get((src, dst))
        if q is None:
            raise ValueError(f"agents {src} and {dst} are not ring neighbors")
        if not q:
            return None
        self.traffic[dst].messages_received += 1
        return WireMessage.decode(q.popleft())

    def pending(self):
        return sum(len(q) for q in self.links.values())
