"""Packet representation with per-layer adaptive headers and a node-local tailer.

Every layer a packet traverses pushes one header consisting of a fixed
7-byte public part (kind tag, sender id, sink id, packet uid) and a
kind-specific private part.  The tailer is a small key/value store that
layers on the same node use to pass parameters to each other; it is never
serialized and never crosses to another node.

Header layouts are registered in ``HEADER_LAYOUTS``; field-by-field sizes
are documented in ``docs/header_layouts.md``.  A legacy fixed-size mode
pads every kind of a protocol to one worst-case on-air length, for
comparison against simulators that use a single shared header struct.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Any

#: MAC-level broadcast address.
BROADCAST = 0xFFFF

LAYER_ROUTING = "routing"
LAYER_MAC = "mac"
LAYER_PHY = "phy"

_LAYER_ORDER = {LAYER_ROUTING: 0, LAYER_MAC: 1, LAYER_PHY: 2}


class _Absent:
    __slots__ = ()

    def __repr__(self) -> str:  # explicit marker, never a default value
        return "ABSENT"

    def __bool__(self) -> bool:
        return False


#: Sentinel returned by tailer lookups for missing keys.
ABSENT = _Absent()


class StackViolationError(RuntimeError):
    """Header pushed/popped out of protocol-stack order."""


class TailerError(ValueError):
    """Tailer misuse (entry limit exceeded, unsupported value type)."""


class ConfigKindError(ValueError):
    """Unknown packet kind or malformed header fields."""


# Public header: kind tag u8, sender u16, sink u16, uid u16 (little-endian).
PUBLIC_FORMAT = "<BHHH"
PUBLIC_SIZE = struct.calcsize(PUBLIC_FORMAT)  # 7


@dataclass(frozen=True)
class HeaderLayout:
    kind: str
    code: int
    layer: str
    protocol: str
    private_format: str  # struct format, "" when the kind has no private header
    field_names: tuple[str, ...]

    @property
    def private_size(self) -> int:
        return struct.calcsize("<" + self.private_format) if self.private_format else 0

    @property
    def total_size(self) -> int:
        return PUBLIC_SIZE + self.private_size


_POS = "3f"  # 3D position as 3 x f32 = 12 bytes

_LAYOUT_DEFS = [
    # kind, layer, protocol, private struct format, private field names
    ("goal_req", LAYER_MAC, "goal", _POS + _POS + _POS + "dH",
     ("src_pos", "sink_pos", "fwd_pos", "send_time", "data_len")),
    ("goal_rep", LAYER_MAC, "goal", _POS + "HfBH",
     ("resp_pos", "req_uid", "grant_time", "backoff_slot", "hop_count")),
    ("goal_data", LAYER_MAC, "goal", _POS + "B", ("fwd_pos", "ttl")),
    ("goal_ack", LAYER_MAC, "goal", "H", ("data_uid",)),
    ("sfama_rts", LAYER_MAC, "sfama", "B", ("burst_slots",)),
    ("sfama_cts", LAYER_MAC, "sfama", "B", ("burst_slots",)),
    ("sfama_data", LAYER_MAC, "sfama", "", ()),
    ("sfama_ack", LAYER_MAC, "sfama", "", ()),
    ("vbf_interest", LAYER_ROUTING, "vbf", _POS + _POS, ("src_pos", "sink_pos")),
    ("vbf_ready", LAYER_ROUTING, "vbf", _POS, ("sink_pos",)),
    ("vbf_data", LAYER_ROUTING, "vbf", _POS + _POS + _POS,
     ("src_pos", "target_pos", "fwd_pos")),
    ("static_data", LAYER_ROUTING, "static", "", ()),
    ("direct_data", LAYER_ROUTING, "direct", "", ()),
    ("aloha_data", LAYER_MAC, "aloha", "", ()),
    ("phy_info", LAYER_PHY, "phy", "BffHQH",
     ("mode", "band_start_hz", "subcarrier_spacing_hz", "num_subcarriers",
      "subcarrier_mask", "guard_time_ms")),
]

HEADER_LAYOUTS: dict[str, HeaderLayout] = {}
_CODE_TO_KIND: dict[int, str] = {}
for _i, (_kind, _layer, _proto, _fmt, _names) in enumerate(_LAYOUT_DEFS):
    HEADER_LAYOUTS[_kind] = HeaderLayout(_kind, _i + 1, _layer, _proto, _fmt, _names)
    _CODE_TO_KIND[_i + 1] = _kind

#: On-air header size per protocol in the legacy fixed-size mode: every kind
#: of the protocol is padded to the sum of all its kinds' worst-case fields.
FIXED_MODE_TOTALS = {"goal": 92, "sfama": 12, "vbf": 79}


class Header:
    """One layer's (public, private) header pair."""

    __slots__ = ("kind", "sender", "sink", "uid", "fields")

    def __init__(self, kind: str, sender: int, sink: int, uid: int,
                 fields: dict[str, Any] | None = None):
        layout = HEADER_LAYOUTS.get(kind)
        if layout is None:
            raise ConfigKindError(kind)
        self.kind = kind
        self.sender = sender
        self.sink = sink
        self.uid = uid
        self.fields = dict(fields or {})
        missing = [n for n in layout.field_names if n not in self.fields]
        if missing:
            raise ConfigKindError(f"header kind {kind!r} missing fields {missing}")

    @property
    def layout(self) -> HeaderLayout:
        return HEADER_LAYOUTS[self.kind]

    @property
    def layer(self) -> str:
        return self.layout.layer

    def size(self, fixed_mode: bool = False) -> int:
        layout = self.layout
        if fixed_mode:
            return FIXED_MODE_TOTALS.get(layout.protocol, layout.total_size)
        return layout.total_size

    def _flat_private_values(self) -> list:
        flat: list = []
        for name in self.layout.field_names:
            value = self.fields[name]
            if isinstance(value, (tuple, list)):
                flat.extend(value)
            else:
                flat.append(value)
        return flat

    def to_bytes(self) -> bytes:
        layout = self.layout
        head = struct.pack(PUBLIC_FORMAT, layout.code, self.sender, self.sink, self.uid)
        if not layout.private_format:
            return head
        return head + struct.pack("<" + layout.private_format, *self._flat_private_values())

    @classmethod
    def from_bytes(cls, data: bytes) -> tuple["Header", int]:
        code, sender, sink, uid = struct.unpack_from(PUBLIC_FORMAT, data, 0)
        kind = _CODE_TO_KIND.get(code)
        if kind is None:
            raise ConfigKindError(f"unknown header code {code}")
        layout = HEADER_LAYOUTS[kind]
        fields: dict[str, Any] = {}
        if layout.private_format:
            values = list(struct.unpack_from("<" + layout.private_format, data, PUBLIC_SIZE))
            idx = 0
            for name in layout.field_names:
                # position fields occupy three consecutive f32 slots
                if name.endswith("_pos"):
                    fields[name] = tuple(values[idx:idx + 3])
                    idx += 3
                else:
                    fields[name] = values[idx]
                    idx += 1
        return cls(kind, sender, sink, uid, fields), layout.total_size


class Tailer:
    """Cross-layer key/value store; wire size is always zero.

    Readable and writable by any layer on the node currently holding the
    packet; delivery to another node yields an empty tailer.
    """

    MAX_ENTRIES = 16
    __slots__ = ("_entries",)

    def __init__(self):
        self._entries: dict[str, Any] = {}

    def put(self, key: str, value: Any) -> None:
        if not isinstance(value, (int, float)) and not (
            isinstance(value, (tuple, list))
            and all(isinstance(v, (int, float)) for v in value)
        ):
            raise TailerError(f"tailer values are scalars or numeric vectors, got {type(value)}")
        if key not in self._entries and len(self._entries) >= self.MAX_ENTRIES:
            raise TailerError(f"tailer limited to {self.MAX_ENTRIES} entries")
        self._entries[key] = value

    def get(self, key: str) -> Any:
        return self._entries.get(key, ABSENT)

    def clear(self) -> None:
        self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)


class Packet:
    """Payload descriptor plus the stack of per-layer headers.

    ``payload`` holds simulation-side metadata (application content,
    creation time); only ``payload_size`` contributes to the wire length.
    """

    __slots__ = ("uid", "payload_size", "headers", "tailer", "created_s",
                 "src", "sink", "payload", "fixed_headers")

    def __init__(self, uid: int, payload_size: int, src: int, sink: int,
                 created_s: float = 0.0, payload: dict | None = None,
                 fixed_headers: bool = False):
        self.uid = uid
        self.payload_size = payload_size
        self.headers: list[Header] = []
        self.tailer = Tailer()
        self.created_s = created_s
        self.src = src
        self.sink = sink
        self.payload = payload
        self.fixed_headers = fixed_headers

    def wire_length(self) -> int:
        """Bytes on air: payload plus all header bytes; the tailer adds none."""
        return self.payload_size + sum(h.size(self.fixed_headers) for h in self.headers)

    def push_header(self, header: Header) -> None:
        if self.headers:
            top = _LAYER_ORDER[self.headers[-1].layer]
            if _LAYER_ORDER[header.layer] < top:
                raise StackViolationError(
                    f"cannot push {header.layer} header on top of {self.headers[-1].layer}")
        self.headers.append(header)

    def pop_header(self, layer: str) -> Header:
        if not self.headers:
            raise StackViolationError(f"no headers to pop (wanted {layer})")
        if self.headers[-1].layer != layer:
            raise StackViolationError(
                f"header at top of stack is {self.headers[-1].layer}, not {layer}")
        return self.headers.pop()

    def top_header(self, layer: str | None = None) -> Header | None:
        if not self.headers:
            return None
        if layer is not None and self.headers[-1].layer != layer:
            return None
        return self.headers[-1]

    def find_header(self, kind: str) -> Header | None:
        for h in reversed(self.headers):
            if h.kind == kind:
                return h
        return None

    def clone_for_delivery(self) -> "Packet":
        """Copy handed to a receiving node: same headers, empty tailer."""
        dup = Packet(self.uid, self.payload_size, self.src, self.sink,
                     self.created_s, self.payload, self.fixed_headers)
        dup.headers = [Header(h.kind, h.sender, h.sink, h.uid, h.fields) for h in self.headers]
        return dup


def header_sizes(kind: str, fixed_mode: bool = False) -> int:
    """Total on-air header bytes for one packet kind at its own layer."""
    layout = HEADER_LAYOUTS.get(kind)
    if layout is None:
        raise ConfigKindError(kind)
    if fixed_mode:
        return FIXED_MODE_TOTALS.get(layout.protocol, layout.total_size)
    return layout.total_size
