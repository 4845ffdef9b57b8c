"""Semantic document model for the pianoform subset of MusicXML.

The model keeps exactly the content that the token language round-trips,
plus a handful of values the token language reconstructs rather than
stores (pitch alterations, audible ties, divisions). Everything else is
dropped at parse time and accounted for in the parse skip log.

Durations are never stored on notes: a note's length in quarter notes is
always derived from its type, dots and time modification, using exact
rational arithmetic. Only ``Backup`` and ``Forward`` carry explicit
durations (in divisions), because they have no written type.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

# Written note values and their length in quarter notes (whole = 4).
NOTE_TYPES = (
    "maxima", "long", "breve", "whole", "half", "quarter",
    "eighth", "16th", "32nd", "64th", "128th", "256th",
)

_TYPE_QUARTERS = {name: Fraction(32, 2 ** i) for i, name in enumerate(NOTE_TYPES)}

ACCIDENTALS = ("sharp", "flat", "natural", "double-sharp", "flat-flat")

ACCIDENTAL_ALTER = {
    "sharp": 1,
    "flat": -1,
    "natural": 0,
    "double-sharp": 2,
    "flat-flat": -2,
}

STEPS = "ABCDEFG"

STEM_VALUES = ("up", "down", "none")

BEAM_VALUES = ("begin", "continue", "end", "forward-hook", "backward-hook")

ORNAMENTS = ("mordent", "inverted-mordent", "turn", "inverted-turn")

CLEF_SIGNS = ("G", "F", "C")

MAX_STAVES = 2
MAX_VOICES = 8


def type_quarters(note_type: str) -> Fraction:
    """Length of a written note value in quarter notes."""
    try:
        return _TYPE_QUARTERS[note_type]
    except KeyError:
        raise ValueError(f"unknown note type {note_type!r}") from None


def dot_factor(dots: int) -> Fraction:
    """Duration multiplier of `dots` augmentation dots: 2 - 2**-dots."""
    return 2 - Fraction(1, 2 ** dots)


def type_for_quarters(quarters: Fraction) -> Optional[tuple[str, int]]:
    """Written (type, dots) whose plain duration equals `quarters`, if any.

    Used to recover a type for notes that carry only a numeric duration.
    Tries 0, 1 and 2 dots.
    """
    for dots in (0, 1, 2):
        base = quarters / dot_factor(dots)
        for name, value in _TYPE_QUARTERS.items():
            if value == base:
                return name, dots
    return None


@dataclass(frozen=True)
class Pitch:
    step: str
    octave: int
    alter: Optional[int] = None  # semitones, in -2..2; None when unaltered

    def __post_init__(self):
        if self.step not in STEPS:
            raise ValueError(f"bad pitch step {self.step!r}")
        if not 0 <= self.octave <= 9:
            raise ValueError(f"pitch octave {self.octave} out of range 0-9")
        if self.alter is not None and self.alter not in (-2, -1, 0, 1, 2):
            raise ValueError(f"pitch alter {self.alter} out of range (microtones unsupported)")

    def token(self) -> str:
        return f"{self.step}{self.octave}"


@dataclass(frozen=True)
class TimeModification:
    actual: int  # notes played ...
    normal: int  # ... in the time of this many

    def factor(self) -> Fraction:
        """Sounding-duration multiplier (normal / actual)."""
        return Fraction(self.normal, self.actual)

    def token(self) -> str:
        return f"{self.actual}in{self.normal}"


@dataclass(frozen=True)
class TimeSignature:
    beats: int
    beat_type: int

    def measure_quarters(self) -> Fraction:
        """Nominal measure capacity in quarter notes."""
        return Fraction(self.beats * 4, self.beat_type)


@dataclass(frozen=True)
class Clef:
    staff: int
    sign: str
    line: int


@dataclass
class Note:
    rest: bool = False
    measure_rest: bool = False
    grace: bool = False
    grace_slash: bool = False
    chord: bool = False
    pitch: Optional[Pitch] = None
    note_type: Optional[str] = None
    dots: int = 0
    accidental: Optional[str] = None
    voice: int = 1
    staff: int = 1
    stem: Optional[str] = None
    beams: list[str] = field(default_factory=list)
    tie_start: bool = False
    tie_stop: bool = False
    tied_start: bool = False
    tied_stop: bool = False
    slur_starts: int = 0
    slur_stops: int = 0
    tuplet_start: bool = False
    tuplet_stop: bool = False
    time_modification: Optional[TimeModification] = None
    ornaments: frozenset[str] = frozenset()
    fermata: bool = False
    arpeggiate: bool = False
    staccato: bool = False
    accent: bool = False
    tenuto: bool = False
    trill: bool = False
    tremolo_marks: Optional[int] = None

    def quarters(self, measure_quarters: Optional[Fraction] = None) -> Fraction:
        """Sounding duration in quarter notes.

        Grace notes and chord continuations occupy no time on the voice
        cursor; measure rests span the (caller-supplied) measure capacity.
        """
        if self.grace:
            return Fraction(0)
        if self.measure_rest:
            if measure_quarters is None:
                return Fraction(4)
            return measure_quarters
        if self.note_type is None:
            return Fraction(0)
        q = type_quarters(self.note_type) * dot_factor(self.dots)
        if self.time_modification is not None:
            q *= self.time_modification.factor()
        return q


@dataclass
class Backup:
    duration_divisions: int


@dataclass
class Forward:
    duration_divisions: int
    voice: Optional[int] = None
    staff: Optional[int] = None


@dataclass
class Attributes:
    divisions: Optional[int] = None
    key_fifths: Optional[int] = None
    time: Optional[TimeSignature] = None
    staves: Optional[int] = None
    clefs: list[Clef] = field(default_factory=list)

    def is_empty(self) -> bool:
        return (self.divisions is None and self.key_fifths is None
                and self.time is None and self.staves is None and not self.clefs)


MusicElement = Union[Note, Backup, Forward, Attributes]


@dataclass
class Measure:
    elements: list[MusicElement] = field(default_factory=list)


@dataclass
class Part:
    id: str
    measures: list[Measure] = field(default_factory=list)


@dataclass
class SkipLog:
    """Accounting of source XML elements not represented in the model."""

    skipped: dict[str, int] = field(default_factory=dict)
    parsed_nodes: int = 0
    total_source_nodes: int = 0
    print_object_flags: int = 0

    def skipped_nodes(self) -> int:
        return sum(self.skipped.values())

    def discarded_fraction(self) -> float:
        if self.total_source_nodes == 0:
            return 0.0
        return self.skipped_nodes() / self.total_source_nodes

    def add(self, name: str, count: int = 1) -> None:
        self.skipped[name] = self.skipped.get(name, 0) + count


@dataclass
class ScoreDocument:
    parts: list[Part] = field(default_factory=list)
    source_divisions: dict[str, int] = field(default_factory=dict)
    skip_log: SkipLog = field(default_factory=SkipLog, compare=False, repr=False)

    def part_ids(self) -> list[str]:
        return [p.id for p in self.parts]

    def get_part(self, part_id: Optional[str] = None) -> Part:
        if part_id is None:
            if len(self.parts) != 1:
                raise ValueError(
                    "document has %d parts; a part id must be selected" % len(self.parts))
            return self.parts[0]
        for p in self.parts:
            if p.id == part_id:
                return p
        raise KeyError(f"no part with id {part_id!r}")


def validate_document(doc: ScoreDocument) -> None:
    """Raise ValueError at the first invariant violation, naming its path."""
    seen_ids = set()
    for p in doc.parts:
        if p.id in seen_ids:
            raise ValueError(f"duplicate part id {p.id!r}")
        seen_ids.add(p.id)
        for mi, measure in enumerate(p.measures):
            prev_note: Optional[Note] = None
            for ei, el in enumerate(measure.elements):
                path = f"part {p.id} measure {mi + 1} element {ei + 1}"
                if isinstance(el, Note):
                    _validate_note(el, prev_note, path)
                    prev_note = el
                elif isinstance(el, (Backup, Forward)):
                    if el.duration_divisions <= 0:
                        raise ValueError(f"{path}: non-positive duration")
                elif isinstance(el, Attributes):
                    _validate_attributes(el, path)


def _validate_note(note: Note, prev_note: Optional[Note], path: str) -> None:
    if note.rest:
        if note.pitch is not None or note.stem is not None or note.accidental is not None:
            raise ValueError(f"{path}: rest carries pitch/stem/accidental")
    elif not note.measure_rest:
        if note.pitch is None:
            raise ValueError(f"{path}: pitched note without pitch")
    if note.chord:
        if prev_note is None or prev_note.voice != note.voice:
            raise ValueError(f"{path}: chord note without a preceding same-voice note")
    if (note.tuplet_start or note.tuplet_stop) and note.time_modification is None:
        raise ValueError(f"{path}: tuplet bracket without time modification")
    if not 1 <= note.voice <= MAX_VOICES:
        raise ValueError(f"{path}: voice {note.voice} out of range 1-{MAX_VOICES}")
    if not 1 <= note.staff <= MAX_STAVES:
        raise ValueError(f"{path}: staff {note.staff} out of range 1-{MAX_STAVES}")
    if not 0 <= note.dots <= 2:
        raise ValueError(f"{path}: {note.dots} dots unsupported")
    if note.note_type is not None and note.note_type not in _TYPE_QUARTERS:
        raise ValueError(f"{path}: unknown note type {note.note_type!r}")
    if note.stem is not None and note.stem not in STEM_VALUES:
        raise ValueError(f"{path}: bad stem {note.stem!r}")
    for b in note.beams:
        if b not in BEAM_VALUES:
            raise ValueError(f"{path}: bad beam value {b!r}")
    if note.accidental is not None and note.accidental not in ACCIDENTALS:
        raise ValueError(f"{path}: bad accidental {note.accidental!r}")


def _validate_attributes(attrs: Attributes, path: str) -> None:
    if attrs.divisions is not None and attrs.divisions <= 0:
        raise ValueError(f"{path}: non-positive divisions")
    if attrs.key_fifths is not None and not -7 <= attrs.key_fifths <= 7:
        raise ValueError(f"{path}: key fifths {attrs.key_fifths} out of range")
    if attrs.time is not None:
        t = attrs.time
        if t.beats <= 0 or t.beat_type <= 0 or (t.beat_type & (t.beat_type - 1)) != 0:
            raise ValueError(f"{path}: bad time signature {t.beats}/{t.beat_type}")
    if attrs.staves is not None and not 1 <= attrs.staves <= MAX_STAVES:
        raise ValueError(f"{path}: staves {attrs.staves} out of range")
    for clef in attrs.clefs:
        if clef.sign not in CLEF_SIGNS or not 1 <= clef.line <= 5 \
                or not 1 <= clef.staff <= MAX_STAVES:
            raise ValueError(f"{path}: bad clef {clef!r}")
