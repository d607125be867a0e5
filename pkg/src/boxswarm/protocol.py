"""Binary wire format for ring messages, plus bandwidth accounting.

Every frame is ``kind (u8) | payload length (u16 LE) | payload``:

* BoxAnnounce (kind 1): ``count (u8)`` then ``count`` records of
  ``id (u8), x_min, y_min, x_max, y_max (u16 LE fixed point)``.
* HiddenState (kind 2): ``round (u8)`` then ``d_h`` float32 LE values.
* GoalClaim (kind 3): ``agent id (u8), goal id (u8)``.

Coordinates are quantized against a declared image extent:
``value = round(coord * 65535 / extent)``.
"""

import enum
import struct
from dataclasses import dataclass

import numpy as np

from boxswarm.errors import Malformed, OutOfRange, TooMany

HEADER = struct.Struct("<BH")
HEADER_SIZE = HEADER.size
RECORD = struct.Struct("<BHHHH")
RECORD_SIZE = RECORD.size  # 9
FIXED_MAX = 65535
MAX_BOXES = 255
MAX_PAYLOAD = 0xFFFF
MAX_HIDDEN = (MAX_PAYLOAD - 1) // 4  # 16383
DEFAULT_EXTENT = 4096.0


class Kind(enum.IntEnum):
    BOX_ANNOUNCE = 1
    HIDDEN_STATE = 2
    GOAL_CLAIM = 3


def quantize(coord, image_extent=DEFAULT_EXTENT):
    if not 0.0 <= coord <= image_extent:
        raise OutOfRange(f"coordinate {coord} outside [0, {image_extent}]")
    return int(round(coord * FIXED_MAX / image_extent))


def dequantize(value, image_extent=DEFAULT_EXTENT):
    return value * (image_extent / FIXED_MAX)


def encode_boxes(boxes, image_extent=DEFAULT_EXTENT):
    """BoxAnnounce payload for a :class:`~boxswarm.registration.BoxSet`.

    Each polygon is sent as its axis-aligned bounds.
    """
    n = len(boxes)
    if n > MAX_BOXES:
        raise TooMany(f"{n} boxes; at most {MAX_BOXES} fit in one announcement")
    out = bytearray([n])
    bounds = boxes.bounds() if n else ()
    for box_id, b in zip(boxes.ids, bounds):
        if not 0 <= box_id <= 255:
            raise OutOfRange(f"box id {box_id} does not fit in one byte")
        out += RECORD.pack(box_id, *(quantize(float(v), image_extent) for v in b))
    return bytes(out)


def decode_boxes(payload, image_extent=DEFAULT_EXTENT):
    from boxswarm.registration import BoxSet  # registration imports stay one-way

    if len(payload) < 1:
        raise Malformed("empty BoxAnnounce payload")
    n = payload[0]
    expected = 1 + RECORD_SIZE * n
    if len(payload) != expected:
        raise Malformed(f"BoxAnnounce with {n} boxes needs {expected} bytes, got {len(payload)}")
    corners = np.empty((n, 4, 2))
    ids = []
    for k in range(n):
        box_id, *q = RECORD.unpack_from(payload, 1 + RECORD_SIZE * k)
        x0, y0, x1, y1 = (dequantize(v, image_extent) for v in q)
        corners[k] = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
        ids.append(box_id)
    try:
        return BoxSet(corners, tuple(ids))
    except ValueError as exc:
        raise Malformed(str(exc)) from exc


def encode_hidden(round_index, h):
    h = np.asarray(h, dtype="<f4").ravel()
    if len(h) > MAX_HIDDEN:
        raise TooMany(f"hidden width {len(h)} exceeds {MAX_HIDDEN}")
    if not 0 <= round_index <= 255:
        raise OutOfRange(f"round {round_index} does not fit in one byte")
    return bytes([round_index]) + h.tobytes()


def decode_hidden(payload, d_h=None):
    """Returns ``(round, float32 array)``."""
    if len(payload) < 1 or (len(payload) - 1) % 4:
        raise Malformed(f"HiddenState payload of {len(payload)} bytes is not 1 + 4*d_h")
    width = (len(payload) - 1) // 4
    if d_h is not None and width != d_h:
        raise Malformed(f"expected d_h={d_h}, payload carries {width}")
    return payload[0], np.frombuffer(payload, dtype="<f4", offset=1).copy()


def encode_claim(agent_id, goal_id):
    if not (0 <= agent_id <= 255 and 0 <= goal_id <= 255):
        raise OutOfRange("agent and goal ids must fit in one byte")
    return bytes([agent_id, goal_id])


def decode_claim(payload):
    if len(payload) != 2:
        raise Malformed(f"GoalClaim payload must be 2 bytes, got {len(payload)}")
    return payload[0], payload[1]


def frame(kind, payload):
    if len(payload) > MAX_PAYLOAD:
        raise TooMany(f"payload of {len(payload)} bytes exceeds the length field")
    return HEADER.pack(int(kind), len(payload)) + payload


def unframe(data):
    """Split one complete frame into ``(Kind, payload)``."""
    if len(data) < HEADER_SIZE:
        raise Malformed("truncated frame header")
    kind, length = HEADER.unpack_from(data)
    try:
        kind = Kind(kind)
    except ValueError:
        raise Malformed(f"unknown message kind {kind}") from None
    if len(data) != HEADER_SIZE + length:
        raise Malformed(f"length field says {length} payload bytes, frame carries {len(data) - HEADER_SIZE}")
    return kind, bytes(data[HEADER_SIZE:])


@dataclass(frozen=True)
class WireMessage:
    kind: Kind
    payload: bytes

    @classmethod
    def boxes(cls, boxes, image_extent=DEFAULT_EXTENT):
        return cls(Kind.BOX_ANNOUNCE, encode_boxes(boxes, image_extent))

    @classmethod
    def hidden(cls, round_index, h):
        return cls(Kind.HIDDEN_STATE, encode_hidden(round_index, h))

    @classmethod
    def claim(cls, agent_id, goal_id):
        return cls(Kind.GOAL_CLAIM, encode_claim(agent_id, goal_id))

    def encode(self):
        return frame(self.kind, self.payload)

    @classmethod
    def decode(cls, data):
        """Parse and validate a frame; the payload must be well formed for its kind."""
        kind, payload = unframe(data)
        if kind is Kind.BOX_ANNOUNCE:
            if len(payload) < 1 or len(payload) != 1 + RECORD_SIZE * payload[0]:
                raise Malformed("BoxAnnounce payload size does not match its count")
        elif kind is Kind.HIDDEN_STATE:
            decode_hidden(payload)
        else:
            decode_claim(payload)
        return cls(kind, payload)

    def __len__(self):
        return HEADER_SIZE + len(self.payload)


def box_payload_size(n_w):
    return 1 + RECORD_SIZE * n_w


def hidden_payload_size(d_h):
    return 1 + 4 * d_h


@dataclass(frozen=True)
class Bandwidth:
    bytes: int  # 4*d_h + 9*N_w: hidden vector plus box records
    latency: float  # seconds at the given link rate
    frame_overhead: int  # headers, count byte and round byte of one box + one hidden frame

    @property
    def framed_bytes(self):
        return self.bytes + self.frame_overhead


def bandwidth_estimate(n_w, d_h, link_bits_per_second):
    if n_w < 0 or d_h < 0 or not link_bits_per_second > 0:
        raise ValueError("counts must be non-negative and the link rate positive")
    body = 4 * d_h + RECORD_SIZE * n_w
    overhead = 2 * HEADER_SIZE + 2
    return Bandwidth(body, 8 * body / link_bits_per_second, overhead)
