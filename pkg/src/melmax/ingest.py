"""Standard MIDI File parsing and melodic-line extraction.

The parser reads format 0/1 files (big-endian chunk lengths, variable
length delta times, running status) and pairs note-on/note-off messages
per channel and key into :class:`NoteEvent` records with absolute tick
onsets.  A companion writer serialises events back to a fresh file, which
makes parse -> write -> parse round trips testable.

A melodic line is recovered from one track's events by collapsing
simultaneous onsets to a single pitch (highest wins) and splitting the
pitch sequence into segments wherever a rest occurs.  Consecutive pitches
inside a segment form transitions carrying the signed squared-frequency
difference eps = f_to**2 - f_from**2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

from .scales import Register, ScaleKind, epsilon, tet_frequency

__all__ = [
    "MidiError",
    "NoteEvent",
    "MidiTrack",
    "ChordPolicy",
    "Segment",
    "MelodicLine",
    "TransitionKind",
    "Transition",
    "parse_midi",
    "write_midi",
    "extract_melodic_line",
    "transitions",
]


class MidiError(ValueError):
    """Malformed or unsupported Standard MIDI File content."""


@dataclass(frozen=True, order=True)
class NoteEvent:
    track: int
    onset_ticks: int
    duration_ticks: int
    note_index: int
    velocity: int

    def __post_init__(self) -> None:
        if self.duration_ticks <= 0:
            raise ValueError("duration_ticks must be positive")
        if not 0 <= self.note_index <= 127:
            raise ValueError("note_index must be in [0, 127]")


@dataclass(frozen=True)
class MidiTrack:
    index: int
    name: str | None
    events: tuple[NoteEvent, ...]


class _Reader:
    """Byte cursor with the primitive reads the SMF format needs."""

    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def need(self, n: int, what: str) -> None:
        if self.pos + n > len(self.data):
            raise MidiError(f"truncated file: expected {what} at offset {self.pos}")

    def read(self, n: int, what: str) -> bytes:
        self.need(n, what)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str = "byte") -> int:
        return self.read(1, what)[0]

    def u16(self, what: str = "uint16") -> int:
        return struct.unpack(">H", self.read(2, what))[0]

    def u32(self, what: str = "uint32") -> int:
        return struct.unpack(">I", self.read(4, what))[0]

    def vlq(self) -> int:
        """Variable-length quantity: 7 bits per byte, high bit continues."""
        value = 0
        for _ in range(4):
            byte = self.u8("vlq byte")
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MidiError(f"variable-length quantity too long at offset {self.pos}")


def parse_midi(data: bytes) -> list[MidiTrack]:
    """Parse a format 0/1 Standard MIDI File into per-track note events.

    Note-ons are matched to note-offs first-in first-out per (channel, key);
    a note-on with velocity 0 counts as a note-off.  Meta and controller
    events are skipped, except track-name (kept as metadata) and
    end-of-track.  Events in each returned track are sorted by onset.
    """
    r = _Reader(data)
    magic = r.read(4, "header chunk id")
    if magic != b"MThd":
        raise MidiError(f"bad header chunk id {magic!r} (expected b'MThd')")
    header_len = r.u32("header length")
    if header_len < 6:
        raise MidiError(f"header chunk too short ({header_len} bytes)")
    fmt = r.u16("format")
    n_tracks = r.u16("track count")
    r.u16("division")
    r.read(header_len - 6, "header padding")
    if fmt not in (0, 1):
        raise MidiError(f"unsupported SMF format {fmt} (only 0 and 1)")

    tracks = []
    for track_index in range(n_tracks):
        chunk_id = r.read(4, f"track {track_index} chunk id")
        chunk_len = r.u32(f"track {track_index} length")
        if chunk_id != b"MTrk":
            # Unknown chunk types are skippable per the SMF spec.
            r.read(chunk_len, f"chunk {chunk_id!r} body")
            continue
        body = r.read(chunk_len, f"track {track_index} body")
        tracks.append(_parse_track(body, track_index))
    return tracks


def _parse_track(body: bytes, track_index: int) -> MidiTrack:
    r = _Reader(body)
    tick = 0
    status = None
    name: str | None = None
    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    events: list[NoteEvent] = []

    def close_note(channel: int, key: int) -> None:
        stack = open_notes.get((channel, key))
        if not stack:
            return  # stray note-off: ignore, matches common practice
        onset, vel = stack.pop(0)
        if tick <= onset:
            raise MidiError(
                f"zero-length note {key} at tick {onset} in track {track_index}"
            )
        events.append(NoteEvent(track_index, onset, tick - onset, key, vel))

    while r.pos < len(r.data):
        tick += r.vlq()
        byte = r.u8("event status")
        if byte == 0xFF:
            meta_type = r.u8("meta type")
            length = r.vlq()
            payload = r.read(length, "meta payload")
            if meta_type == 0x03 and name is None:
                name = payload.decode("latin-1")
            if meta_type == 0x2F:
                break
            status = None  # meta events cancel running status
            continue
        if byte in (0xF0, 0xF7):
            length = r.vlq()
            r.read(length, "sysex payload")
            status = None
            continue
        if byte & 0x80:
            status = byte
            data1 = r.u8("event data")
        else:
            if status is None:
                raise MidiError(
                    f"running status with no prior status at offset {r.pos} "
                    f"in track {track_index}"
                )
            data1 = byte
        kind = status >> 4
        channel = status & 0x0F
        if kind in (0x8, 0x9, 0xA, 0xB, 0xE):
            data2 = r.u8("event data")
        elif kind in (0xC, 0xD):
            data2 = 0
        else:
            raise MidiError(f"unexpected status byte {status:#x} in track {track_index}")

        if kind == 0x9 and data2 > 0:
            open_notes.setdefault((channel, data1), []).append((tick, data2))
        elif kind == 0x8 or (kind == 0x9 and data2 == 0):
            close_note(channel, data1)

    dangling = sorted(
        (onset, key) for (_, key), stack in open_notes.items() for onset, _ in stack
    )
    if dangling:
        onset, key = dangling[0]
        raise MidiError(
            f"unmatched note-on (key {key}, tick {onset}) at end of track {track_index}"
        )
    events.sort()
    return MidiTrack(track_index, name, tuple(events))


def write_midi(
    tracks: list[tuple[str | None, list[NoteEvent]]], division: int = 480
) -> bytes:
    """Serialise note events to a format-1 Standard MIDI File.

    Each track gets channel ``index % 16``.  At equal ticks note-offs are
    written before note-ons so re-parsing reproduces the same pairings.
    """
    chunks = [b"MThd" + struct.pack(">IHHH", 6, 1, len(tracks), division)]
    for index, (name, events) in enumerate(tracks):
        channel = index % 16
        messages: list[tuple[int, int, int, bytes]] = []
        for ev in events:
            on = bytes([0x90 | channel, ev.note_index, ev.velocity])
            off = bytes([0x80 | channel, ev.note_index, 0])
            messages.append((ev.onset_ticks, 1, ev.note_index, on))
            messages.append((ev.onset_ticks + ev.duration_ticks, 0, ev.note_index, off))
        messages.sort(key=lambda m: m[:3])

        body = bytearray()
        if name is not None:
            encoded = name.encode("latin-1")
            body += b"\x00\xff\x03" + _vlq(len(encoded)) + encoded
        tick = 0
        for when, _, _, msg in messages:
            body += _vlq(when - tick) + msg
            tick = when
        body += b"\x00\xff\x2f\x00"
        chunks.append(b"MTrk" + struct.pack(">I", len(body)) + bytes(body))
    return b"".join(chunks)


def _vlq(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


class ChordPolicy(Enum):
    """How simultaneous onsets collapse to a single melodic pitch."""

    HIGHEST_PITCH = "highest"


@dataclass(frozen=True)
class Segment:
    """Chronological pitches between two rests: (note_index, frequency) pairs."""

    pitches: tuple[tuple[int, float], ...]

    def __len__(self) -> int:
        return len(self.pitches)


@dataclass(frozen=True)
class MelodicLine:
    label: str
    segments: tuple[Segment, ...]
    register: Register | None

    def pitch_count(self) -> int:
        return sum(len(s) for s in self.segments)

    def transition_count(self) -> int:
        return sum(len(s) - 1 for s in self.segments)


class TransitionKind(Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"
    UNISON = "unison"


@dataclass(frozen=True)
class Transition:
    f_from: float
    f_to: float
    eps: float = field(init=False)
    kind: TransitionKind = field(init=False)

    def __post_init__(self) -> None:
        eps = epsilon(self.f_from, self.f_to)
        if eps > 0:
            kind = TransitionKind.ASCENDING
        elif eps < 0:
            kind = TransitionKind.DESCENDING
        else:
            kind = TransitionKind.UNISON
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "kind", kind)


def extract_melodic_line(
    events: list[NoteEvent] | tuple[NoteEvent, ...],
    policy: ChordPolicy = ChordPolicy.HIGHEST_PITCH,
    label: str = "",
    reference_frequency: float = 440.0,
) -> MelodicLine:
    """Reduce one track's note events to a monophonic, rest-segmented line.

    Events sharing an onset tick collapse to one pitch according to the
    chord policy; a positive gap between a note's offset and the next
    onset closes the current segment.  An empty event list yields an empty
    line.
    """
    if policy is not ChordPolicy.HIGHEST_PITCH:
        raise ValueError(f"unsupported chord policy {policy}")
    if not events:
        return MelodicLine(label, (), None)

    by_onset: dict[int, NoteEvent] = {}
    for ev in sorted(events):
        cur = by_onset.get(ev.onset_ticks)
        if cur is None or ev.note_index > cur.note_index:
            by_onset[ev.onset_ticks] = ev

    ordered = [by_onset[t] for t in sorted(by_onset)]
    register = Register(
        min(ev.note_index for ev in ordered),
        max(ev.note_index for ev in ordered),
        reference_frequency,
        ScaleKind.TET,
    )

    segments: list[Segment] = []
    current: list[tuple[int, float]] = []
    prev_offset: int | None = None
    for ev in ordered:
        if prev_offset is not None and ev.onset_ticks > prev_offset:
            segments.append(Segment(tuple(current)))
            current = []
        current.append((ev.note_index, tet_frequency(ev.note_index, register)))
        prev_offset = ev.onset_ticks + ev.duration_ticks
    segments.append(Segment(tuple(current)))
    return MelodicLine(label, tuple(segments), register)


def transitions(line: MelodicLine, bridge_rests: bool = False) -> list[Transition]:
    """Consecutive-pitch transitions of a melodic line.

    By default transitions never cross a rest, so the count is
    sum(len(segment) - 1); with ``bridge_rests`` the last pitch of each
    segment also connects to the first pitch of the next.
    """
    out: list[Transition] = []
    for seg_index, seg in enumerate(line.segments):
        for (_, f_a), (_, f_b) in zip(seg.pitches, seg.pitches[1:]):
            out.append(Transition(f_a, f_b))
        if bridge_rests and seg_index + 1 < len(line.segments):
            nxt = line.segments[seg_index + 1]
            out.append(Transition(seg.pitches[-1][1], nxt.pitches[0][1]))
    return out
