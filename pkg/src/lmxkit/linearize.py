"""Canonical document -> token stream.

The emitted grammar, per measure:

    measure
    [key:fifths:N] [time:B /T] [clef:SL [staff:S]]*        (leading attributes)
    for each voice, ascending:
        voice:V
        note-like objects in order, each:
            [grace|grace:slash] [chord] (rest | rest:measure | PITCH)
            TYPE [dot]* [XinY] [accidental] [stem:*] [staff:*]
            [beam:*]* [tied:stop] [tied:start] [slur:stop]* [slur:start]*
            [tuplet:stop] [tuplet:start] [ornament tokens]
        forward TYPE* [XinY]                               (voice padding)
    backup TYPE*                                           (between voices)

``rest:measure`` replaces both the rest marker and the type token, since
whole-measure rests carry no written type. Voice, staff and stem are
state: they are re-emitted at each measure and voice change and otherwise
only when the value changes. ``beam:continue`` is never emitted; it is
re-inferred from context. A ``staff:S`` token directly after a clef token
qualifies the clef, never a note.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import DecompositionError, LinearizeError, UnsupportedFeature
from .model import (
    Attributes,
    Backup,
    Forward,
    Measure,
    Note,
    NOTE_TYPES,
    Part,
    ScoreDocument,
    TimeModification,
    TimeSignature,
    type_quarters,
)
from .vocab import ORNAMENT_TOKEN_ORDER, TIMEMOD_TOKENS, TokenSequence, vocabulary

_TYPES_LARGEST_FIRST = [(name, type_quarters(name)) for name in NOTE_TYPES]


def decompose_duration(quarters: Fraction) -> list[str]:
    """Greedy largest-first decomposition of a duration into type tokens.

    The concatenated values sum exactly to the input; the greedy binary
    expansion uses the fewest tokens reachable this way.
    """
    quarters = Fraction(quarters)
    if quarters <= 0:
        raise DecompositionError(f"duration {quarters} is not positive")
    d = quarters.denominator
    if d & (d - 1) != 0 or d > 64:
        raise DecompositionError(
            f"duration {quarters} quarters is not a finite sum of binary note values")
    tokens: list[str] = []
    remaining = quarters
    while remaining > 0:
        for name, value in _TYPES_LARGEST_FIRST:
            if value <= remaining:
                tokens.append(name)
                remaining -= value
                break
    return tokens


def decompose_with_timemod(quarters: Fraction) \
        -> tuple[list[str], Optional[TimeModification]]:
    """Decomposition for cursor moves, rescaling tuplet-time durations.

    A gap of 1/3 quarter (one triplet eighth) has no binary spelling; it
    is rescaled to its written value (eighth) plus a 3in2 modifier.
    """
    try:
        return decompose_duration(quarters), None
    except DecompositionError:
        if quarters <= 0:
            raise
    odd = quarters.denominator
    while odd % 2 == 0:
        odd //= 2
    normal = 1
    while normal * 2 <= odd:
        normal *= 2
    tm = TimeModification(actual=odd, normal=normal)
    if tm.token() not in TIMEMOD_TOKENS:
        raise UnsupportedFeature(
            f"duration {quarters} quarters needs unsupported ratio {tm.token()}")
    return decompose_duration(quarters / tm.factor()), tm


@dataclass
class LinearizerState:
    """Per-voice encoder state; forgotten at measure and voice boundaries."""
    current_voice: Optional[int] = None
    current_staff: Optional[int] = None
    current_stem: Optional[str] = None


class _Emitter:
    def __init__(self):
        self.tokens: list[str] = []
        self.provenance: list[tuple[int, int]] = []

    def emit(self, token: str, mi: int, ei: int) -> None:
        self.tokens.append(token)
        self.provenance.append((mi, ei))


def linearize(doc: ScoreDocument, part_id: Optional[str] = None) -> TokenSequence:
    """Tokenize one (canonical) part of a document.

    Raises LinearizeError on non-canonical input (partial backups,
    unordered voices) and UnsupportedFeature on nested tuplets.
    """
    part = doc.get_part(part_id)
    staves = _part_staves(part)
    emitter = _Emitter()
    divisions: Optional[int] = None
    time: Optional[TimeSignature] = None
    for mi, measure in enumerate(part.measures):
        divisions, time = _linearize_measure(measure, mi, staves, divisions,
                                             time, emitter)
    tokens = TokenSequence(tokens=emitter.tokens, provenance=emitter.provenance)
    vocab = vocabulary()
    for t in tokens.tokens:  # the inventory is closed; catch drift early
        if t not in vocab:
            raise LinearizeError(f"internal error: emitted non-vocabulary token {t!r}")
    return tokens


def _part_staves(part: Part) -> int:
    staves = 1
    for measure in part.measures:
        for el in measure.elements:
            if isinstance(el, Attributes):
                if el.staves is not None:
                    staves = max(staves, el.staves)
                for clef in el.clefs:
                    staves = max(staves, clef.staff)
            elif isinstance(el, Note):
                staves = max(staves, el.staff)
    return staves


def _linearize_measure(measure: Measure, mi: int, staves: int,
                       divisions: Optional[int], time: Optional[TimeSignature],
                       emitter: _Emitter):
    emitter.emit("measure", mi, -1)
    state = LinearizerState()
    segment_quarters = Fraction(0)
    prior_segment_quarters: Optional[Fraction] = None
    open_tuplet = False
    seen_voices: list[int] = []

    def cursor_quarters(el, ei) -> Fraction:
        if divisions is None:
            raise LinearizeError(f"measure {mi + 1}: no divisions in scope")
        return Fraction(el.duration_divisions, divisions)

    for ei, el in enumerate(measure.elements):
        if isinstance(el, Attributes):
            if el.divisions is not None:
                divisions = el.divisions
            if el.time is not None:
                time = el.time
            _emit_attributes(el, mi, ei, staves, emitter)
        elif isinstance(el, Backup):
            if prior_segment_quarters is not None \
                    and segment_quarters != prior_segment_quarters:
                raise LinearizeError(
                    f"measure {mi + 1}: voice spans differ "
                    f"({segment_quarters} vs {prior_segment_quarters}); "
                    "canonicalize the document first")
            quarters = cursor_quarters(el, ei)
            if quarters != segment_quarters:
                raise LinearizeError(
                    f"measure {mi + 1}: backup of {quarters} quarters is not a "
                    "full-measure jump; canonicalize the document first")
            if open_tuplet:
                raise LinearizeError(f"measure {mi + 1}: tuplet left open at voice end")
            emitter.emit("backup", mi, ei)
            for token in _cursor_tokens(quarters):
                emitter.emit(token, mi, ei)
            prior_segment_quarters = segment_quarters
            segment_quarters = Fraction(0)
            state = LinearizerState()
        elif isinstance(el, Forward):
            if el.voice is not None:
                _enter_voice(el.voice, state, seen_voices, mi, ei, emitter)
            quarters = cursor_quarters(el, ei)
            emitter.emit("forward", mi, ei)
            for token in _cursor_tokens(quarters):
                emitter.emit(token, mi, ei)
            segment_quarters += quarters
        elif isinstance(el, Note):
            _enter_voice(el.voice, state, seen_voices, mi, ei, emitter)
            open_tuplet = _emit_note(el, mi, ei, staves, state, open_tuplet, emitter)
            if not el.chord:
                capacity = time.measure_quarters() if time else None
                segment_quarters += el.quarters(capacity)
    if open_tuplet:
        raise LinearizeError(f"measure {mi + 1}: tuplet left open at measure end")
    if prior_segment_quarters is not None and seen_voices \
            and segment_quarters != prior_segment_quarters:
        raise LinearizeError(
            f"measure {mi + 1}: voice spans differ ({segment_quarters} vs "
            f"{prior_segment_quarters}); canonicalize the document first")
    return divisions, time


def _enter_voice(voice: int, state: LinearizerState, seen_voices: list[int],
                 mi: int, ei: int, emitter: _Emitter) -> None:
    if state.current_voice is None:
        if seen_voices and voice <= seen_voices[-1]:
            raise LinearizeError(
                f"measure {mi + 1}: voices out of ascending order; "
                "canonicalize the document first")
        seen_voices.append(voice)
        state.current_voice = voice
        emitter.emit(f"voice:{voice}", mi, ei)
    elif voice != state.current_voice:
        raise LinearizeError(
            f"measure {mi + 1}: voice change without backup; "
            "canonicalize the document first")


def _cursor_tokens(quarters: Fraction) -> list[str]:
    tokens, tm = decompose_with_timemod(quarters)
    if tm is not None:
        tokens.append(tm.token())
    return tokens


def _emit_attributes(attrs: Attributes, mi: int, ei: int, staves: int,
                     emitter: _Emitter) -> None:
    if attrs.key_fifths is not None:
        emitter.emit(f"key:fifths:{attrs.key_fifths}", mi, ei)
    if attrs.time is not None:
        emitter.emit(f"time:{attrs.time.beats}", mi, ei)
        emitter.emit(f"/{attrs.time.beat_type}", mi, ei)
    for clef in attrs.clefs:
        emitter.emit(f"clef:{clef.sign}{clef.line}", mi, ei)
        if staves > 1:
            emitter.emit(f"staff:{clef.staff}", mi, ei)


def _emit_note(note: Note, mi: int, ei: int, staves: int, state: LinearizerState,
               open_tuplet: bool, emitter: _Emitter) -> bool:
    if note.grace:
        emitter.emit("grace:slash" if note.grace_slash else "grace", mi, ei)
    if note.chord:
        emitter.emit("chord", mi, ei)
    if note.measure_rest:
        emitter.emit("rest:measure", mi, ei)
    elif note.rest:
        emitter.emit("rest", mi, ei)
    else:
        emitter.emit(note.pitch.token(), mi, ei)
    if not note.measure_rest:
        if note.note_type is None:
            raise LinearizeError(f"measure {mi + 1}: note without a written type")
        emitter.emit(note.note_type, mi, ei)
        for _ in range(note.dots):
            emitter.emit("dot", mi, ei)
    if note.time_modification is not None:
        token = note.time_modification.token()
        if token not in TIMEMOD_TOKENS:
            raise UnsupportedFeature(
                f"measure {mi + 1}: tuplet ratio {token} is outside the vocabulary")
        emitter.emit(token, mi, ei)
    if note.accidental is not None:
        emitter.emit(note.accidental, mi, ei)
    if note.stem is not None and note.stem != state.current_stem:
        emitter.emit(f"stem:{note.stem}", mi, ei)
        state.current_stem = note.stem
    if staves > 1 and note.staff != state.current_staff:
        emitter.emit(f"staff:{note.staff}", mi, ei)
        state.current_staff = note.staff
    for beam in note.beams:
        if beam != "continue":
            emitter.emit(f"beam:{beam}", mi, ei)
    if note.tied_stop:
        emitter.emit("tied:stop", mi, ei)
    if note.tied_start:
        emitter.emit("tied:start", mi, ei)
    for _ in range(note.slur_stops):
        emitter.emit("slur:stop", mi, ei)
    for _ in range(note.slur_starts):
        emitter.emit("slur:start", mi, ei)
    if note.tuplet_stop:
        if not open_tuplet:
            raise LinearizeError(f"measure {mi + 1}: tuplet stop without start")
        emitter.emit("tuplet:stop", mi, ei)
        open_tuplet = False
    if note.tuplet_start:
        if open_tuplet:
            raise UnsupportedFeature(f"measure {mi + 1}: nested tuplets are not covered")
        emitter.emit("tuplet:start", mi, ei)
        open_tuplet = True
    for token in _ornament_tokens(note):
        emitter.emit(token, mi, ei)
    return open_tuplet


def _ornament_tokens(note: Note) -> list[str]:
    present = set()
    if note.staccato:
        present.add("staccato")
    if note.accent:
        present.add("accent")
    if note.tenuto:
        present.add("tenuto")
    if note.trill:
        present.add("trill")
    present.update(note.ornaments)
    if note.fermata:
        present.add("fermata")
    if note.arpeggiate:
        present.add("arpeggiate")
    if note.tremolo_marks is not None:
        present.add(f"tremolo:{note.tremolo_marks}")
    return [t for t in ORNAMENT_TOKEN_ORDER if t in present]
