"""Token stream -> schema-valid canonical document, with error recovery.

The input may be arbitrary (model output): unknown tokens are skipped,
modifiers with no note to attach to are dropped, over-range numeric
tokens are clamped, and unterminated constructs are closed. Every
recovery produces a warning, so information loss stays auditable. The
output is always a well-formed, voice-major document: voices appear in
ascending order separated by full-measure backups, under-full voices are
padded with forwards, and all the content the tokens elide (audible
ties, pitch alterations, durations, divisions) is reconstructed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .model import (
    ACCIDENTAL_ALTER,
    Attributes,
    Backup,
    Clef,
    Forward,
    Measure,
    Note,
    Part,
    Pitch,
    ScoreDocument,
    TimeModification,
    TimeSignature,
    type_quarters,
    dot_factor,
)
from .canonicalize import minimal_divisions
from .vocab import TokenSequence, vocabulary

WARNING_KINDS = ("unknown_token", "unexpected_token", "unterminated_construct",
                 "orphan_stop", "voice_overflow", "duration_mismatch")


@dataclass
class DelinearizeWarning:
    kind: str
    token_index: int
    message: str

    def __post_init__(self):
        assert self.kind in WARNING_KINDS


# -- pitch-alteration context -----------------------------------------------

_SHARP_ORDER = "FCGDAEB"
_FLAT_ORDER = "BEADGCF"


def key_alters(fifths: int) -> dict[str, int]:
    """Per-step alteration implied by a fifths-based key signature."""
    alters: dict[str, int] = {}
    if fifths > 0:
        for step in _SHARP_ORDER[:fifths]:
            alters[step] = 1
    elif fifths < 0:
        for step in _FLAT_ORDER[:-fifths]:
            alters[step] = -1
    return alters


@dataclass
class PitchContext:
    """Alteration state consulted when a note has no explicit accidental."""

    key_alters: dict[str, int] = field(default_factory=dict)
    measure_accidentals: dict[tuple[str, int], int] = field(default_factory=dict)
    tie_carry: dict[tuple[str, int, int], int] = field(default_factory=dict)
    pending_ties: dict[tuple[str, int, int], int] = field(default_factory=dict)

    def set_key(self, fifths: int) -> None:
        self.key_alters = key_alters(fifths)

    def start_measure(self) -> None:
        self.measure_accidentals.clear()
        self.tie_carry = self.pending_ties
        self.pending_ties = {}

    def note_tied_over(self, step: str, octave: int, voice: int, alter: int) -> None:
        self.pending_ties[(step, octave, voice)] = alter


def infer_alter(pitch: tuple[str, int], accidental: Optional[str],
                ctx: PitchContext, voice: int = 1) -> int:
    """Alteration of a note under standard accidental-persistence rules.

    Explicit accidental wins and persists for the (step, octave) until the
    measure ends; a tie from the previous measure carries its alteration
    to the first note it applies to; otherwise the key signature decides.
    """
    step, octave = pitch
    if accidental is not None:
        alter = ACCIDENTAL_ALTER[accidental]
        ctx.measure_accidentals[(step, octave)] = alter
        ctx.tie_carry.pop((step, octave, voice), None)
        return alter
    if (step, octave, voice) in ctx.tie_carry:
        return ctx.tie_carry.pop((step, octave, voice))
    if (step, octave, voice) in ctx.pending_ties:
        # a tie chain continued within this measure keeps its alteration
        return ctx.pending_ties[(step, octave, voice)]
    if (step, octave) in ctx.measure_accidentals:
        return ctx.measure_accidentals[(step, octave)]
    return ctx.key_alters.get(step, 0)


# -- duration reconstruction -------------------------------------------------


def compose_duration(type_tokens: list[str], timemod: Optional[TimeModification],
                     dots: int, divisions: int,
                     warnings: Optional[list[DelinearizeWarning]] = None,
                     token_index: int = 0) -> int:
    """divisions x sum(quarters) x dot factor x normal/actual, exactly.

    A non-integral result is rounded to the nearest integer and reported
    as a duration_mismatch warning.
    """
    if divisions <= 0:
        raise ValueError("divisions must be positive")
    quarters = sum((type_quarters(t) for t in type_tokens), Fraction(0))
    quarters *= dot_factor(dots)
    if timemod is not None:
        quarters *= timemod.factor()
    exact = quarters * divisions
    if exact.denominator == 1:
        return int(exact)
    nearest = (exact.numerator * 2 + exact.denominator) // (2 * exact.denominator)
    if warnings is not None:
        warnings.append(DelinearizeWarning(
            "duration_mismatch", token_index,
            f"duration {exact} divisions is not integral; using {nearest}"))
    return int(nearest)


# -- the decoder --------------------------------------------------------------

_VOICE_RE = re.compile(r"voice:(-?\d+)$")
_STAFF_RE = re.compile(r"staff:(-?\d+)$")
_KEY_RE = re.compile(r"key:fifths:(-?\d+)$")
_TIME_RE = re.compile(r"time:(\d+)$")
_BEAT_TYPE_RE = re.compile(r"/(\d+)$")
_CLEF_RE = re.compile(r"clef:([GFC])(\d)$")
_TREMOLO_RE = re.compile(r"tremolo:(\d+)$")
_TIMEMOD_RE = re.compile(r"(\d+)in(\d+)$")

_NOTE_ROOT_CATEGORIES = {"pitch", "rest", "grace", "chord"}


@dataclass
class _PendingNote:
    """Tokens collected for one note before it is materialized."""
    note: Note
    rooted: bool = False          # type token (or rest:measure) seen
    has_head: bool = False        # pitch or rest seen
    beam_tokens: list[str] = field(default_factory=list)
    token_index: int = 0


class _VoiceBuffer:
    def __init__(self, number: int):
        self.number = number
        self.items: list = []     # Note | Forward-gap tuple | Attributes
        self.open_tuplet: Optional[Note] = None
        self.open_beams = 0
        self.last_note: Optional[Note] = None

    def quarters(self, capacity: Fraction) -> Fraction:
        total = Fraction(0)
        for item in self.items:
            if isinstance(item, Note):
                if not item.chord:
                    total += item.quarters(capacity)
            elif isinstance(item, tuple):
                total += item[1]
        return total


class _MeasureBuffer:
    def __init__(self):
        self.leading = Attributes()
        self.voices: dict[int, _VoiceBuffer] = {}
        self.order: list[int] = []
        self.capacity: Optional[Fraction] = None

    def voice(self, number: int) -> _VoiceBuffer:
        if number not in self.voices:
            self.voices[number] = _VoiceBuffer(number)
            self.order.append(number)
        return self.voices[number]


class _Decoder:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.vocab = vocabulary()
        self.warnings: list[DelinearizeWarning] = []
        self.measures: list[_MeasureBuffer] = []
        self.measure: Optional[_MeasureBuffer] = None
        self.voice_buf: Optional[_VoiceBuffer] = None
        self.pending: Optional[_PendingNote] = None
        self.collecting: Optional[list] = None   # [kind, types, timemod, index]
        self.last_clef: Optional[Clef] = None
        self.ctx = PitchContext()
        self.time: Optional[TimeSignature] = None
        self.awaiting_time: Optional[Attributes] = None
        self.staff_state: Optional[int] = None
        self.stem_state: Optional[str] = None
        self.max_staff = 1
        self.open_slurs = 0
        self.open_ties = 0

    def warn(self, kind: str, index: int, message: str) -> None:
        self.warnings.append(DelinearizeWarning(kind, index, message))

    # -- helpers ------------------------------------------------------------

    def ensure_measure(self, index: int, implicit: bool) -> _MeasureBuffer:
        if self.measure is None:
            if implicit:
                self.warn("unexpected_token", index,
                          "content before the first measure token")
            self.measure = _MeasureBuffer()
            self.measures.append(self.measure)
            self.ctx.start_measure()
        return self.measure

    def ensure_voice(self, index: int) -> _VoiceBuffer:
        measure = self.ensure_measure(index, implicit=True)
        if self.voice_buf is None:
            self.voice_buf = measure.voice(1)
            self.staff_state = None
            self.stem_state = None
        return self.voice_buf

    def close_note(self) -> None:
        if self.pending is None:
            return
        pending, self.pending = self.pending, None
        note = pending.note
        buf = self.voice_buf
        if buf is None:  # pragma: no cover - pending implies a voice buffer
            return
        if not pending.rooted:
            self.warn("unterminated_construct", pending.token_index,
                      "note dropped: no type token before the next construct")
            return
        if not note.rest and note.pitch is None:
            self.warn("unterminated_construct", pending.token_index,
                      "note dropped: type without pitch or rest")
            return
        if note.chord and buf.last_note is None:
            note.chord = False
            self.warn("unexpected_token", pending.token_index,
                      "chord flag dropped: no preceding note in this voice")
        if note.rest:
            note.pitch = None
            note.stem = None
            note.accidental = None
        elif note.stem is None and self.stem_state is not None \
                and note.note_type is not None \
                and type_quarters(note.note_type) < 4:
            # elided stem token: the voice's stem direction persists;
            # whole notes and longer are stemless
            note.stem = self.stem_state
        if (note.tuplet_start or note.tuplet_stop) and note.time_modification is None:
            note.tuplet_start = note.tuplet_stop = False
        if note.pitch is not None:
            alter = infer_alter((note.pitch.step, note.pitch.octave),
                                note.accidental, self.ctx, buf.number)
            note.pitch = Pitch(note.pitch.step, note.pitch.octave, alter or None)
            key3 = (note.pitch.step, note.pitch.octave, buf.number)
            if note.tied_stop and not note.tied_start:
                # the tie ended inside this measure; its alteration must not
                # carry over the next barline
                self.ctx.pending_ties.pop(key3, None)
            if note.tied_start:
                self.ctx.note_tied_over(note.pitch.step, note.pitch.octave,
                                        buf.number, alter)
        note.tie_start = note.tied_start
        note.tie_stop = note.tied_stop
        note.beams = self.resolve_beams(note, pending.beam_tokens, buf)
        buf.items.append(note)
        buf.last_note = note

    _BEAM_DEPTH = {"eighth": 1, "16th": 2, "32nd": 3, "64th": 4,
                   "128th": 5, "256th": 6}

    def resolve_beams(self, note: Note, beam_tokens: list[str],
                      buf: _VoiceBuffer) -> list[str]:
        """Re-infer omitted beam:continue levels from the open-beam count.

        Rests pass under beams untouched; chord continuations and grace
        notes never join the surrounding group.
        """
        if note.rest or note.chord or note.grace:
            return list(beam_tokens[:8])
        if not beam_tokens:
            if buf.open_beams == 0:
                return []
            depth = self._BEAM_DEPTH.get(note.note_type or "", 0)
            buf.open_beams = min(buf.open_beams, depth)
            return ["continue"] * buf.open_beams
        opens = buf.open_beams
        ends = min(beam_tokens.count("end"), opens)
        begins = beam_tokens.count("begin")
        hooks = [t for t in beam_tokens if t in ("forward-hook", "backward-hook")]
        surviving = opens - ends
        beams = ["continue"] * surviving
        beams += ["end"] * ends
        beams += ["begin"] * begins
        beams += hooks
        buf.open_beams = surviving + begins
        return beams[:8]

    def close_collection(self) -> None:
        if self.collecting is None:
            return
        kind, types, timemod, index = self.collecting
        self.collecting = None
        if kind == "backup":
            return  # backups are regenerated; their duration is implied
        if not types:
            self.warn("unterminated_construct", index,
                      "forward without duration tokens")
            return
        quarters = sum((type_quarters(t) for t in types), Fraction(0))
        if timemod is not None:
            quarters *= timemod.factor()
        buf = self.ensure_voice(index)
        buf.items.append(("forward", quarters))
        buf.last_note = None

    def close_tuplet(self, index: int) -> None:
        buf = self.voice_buf
        if buf is None or buf.open_tuplet is None:
            return
        start_note = buf.open_tuplet
        buf.open_tuplet = None
        last_tm = None
        for item in buf.items:
            if isinstance(item, Note) and item.time_modification is not None:
                last_tm = item
        if self.pending is not None and self.pending.note.time_modification is not None:
            last_tm = self.pending.note
        if last_tm is not None:
            last_tm.tuplet_stop = True
        else:
            start_note.tuplet_start = False
        self.warn("unterminated_construct", index, "tuplet auto-closed")

    def close_voice(self, index: int) -> None:
        self.close_note()
        self.close_collection()
        if self.voice_buf is not None:
            if self.voice_buf.open_tuplet is not None:
                self.close_tuplet(index)
            self.voice_buf.open_beams = 0
        self.voice_buf = None
        self.staff_state = None
        self.stem_state = None

    def close_measure(self, index: int) -> None:
        self.close_voice(index)
        if self.awaiting_time is not None:
            self.warn("unterminated_construct", index,
                      "time:N without a beat-type token; assuming /4")
            self.awaiting_time = None
        if self.measure is not None:
            self.measure.capacity = self.time.measure_quarters() if self.time \
                else Fraction(4)
        self.measure = None

    # -- token handlers -------------------------------------------------------

    def run(self) -> tuple[ScoreDocument, list[DelinearizeWarning]]:
        for i, token in enumerate(self.tokens):
            self.dispatch(token, i)
        self.close_measure(len(self.tokens))
        if self.open_slurs > 0:
            self.warn("unterminated_construct", len(self.tokens),
                      f"{self.open_slurs} slur(s) left open at end of input")
        if self.open_ties > 0:
            self.warn("unterminated_construct", len(self.tokens),
                      f"{self.open_ties} tie(s) left open at end of input")
        return self.materialize(), self.warnings

    def dispatch(self, token: str, i: int) -> None:
        category = self.vocab.category(token)
        if category is None:
            if not self.recover_numeric(token, i):
                self.warn("unknown_token", i, f"token {token!r} is not in the vocabulary")
            return
        if category != "staff":
            self.last_clef = None

        if token == "measure":
            self.close_measure(i)
            self.measure = _MeasureBuffer()
            self.measures.append(self.measure)
            self.ctx.start_measure()
        elif category == "key":
            self.handle_key(int(_KEY_RE.match(token).group(1)), i)
        elif category == "time":
            self.handle_time(token, i)
        elif category == "clef":
            self.handle_clef(token, i)
        elif category == "voice":
            self.handle_voice(int(_VOICE_RE.match(token).group(1)), i)
        elif category == "backup":
            self.close_voice(i)
            self.collecting = ["backup", [], None, i]
        elif category == "forward":
            self.close_note()
            self.close_collection()
            self.collecting = ["forward", [], None, i]
        elif category == "type":
            self.handle_type(token, i)
        elif category == "timemod":
            self.handle_timemod(token, i)
        elif category in _NOTE_ROOT_CATEGORIES:
            self.handle_root(token, category, i)
        else:
            self.handle_modifier(token, category, i)

    def recover_numeric(self, token: str, i: int) -> bool:
        """Clamp out-of-range numeric tokens instead of dropping them."""
        m = _VOICE_RE.match(token)
        if m:
            value = max(1, min(8, int(m.group(1))))
            self.warn("voice_overflow", i,
                      f"voice number {m.group(1)} clamped to {value}")
            self.handle_voice(value, i)
            return True
        m = _STAFF_RE.match(token)
        if m:
            value = max(1, min(2, int(m.group(1))))
            self.warn("unexpected_token", i,
                      f"staff number {m.group(1)} clamped to {value}")
            self.handle_modifier(f"staff:{value}", "staff", i)
            return True
        m = _KEY_RE.match(token)
        if m:
            value = max(-7, min(7, int(m.group(1))))
            self.warn("unexpected_token", i, f"key fifths clamped to {value}")
            self.handle_key(value, i)
            return True
        m = _TREMOLO_RE.match(token)
        if m:
            value = max(1, min(4, int(m.group(1))))
            self.warn("unexpected_token", i, f"tremolo marks clamped to {value}")
            self.handle_modifier(f"tremolo:{value}", "ornament", i)
            return True
        return False

    def target_attributes(self, i: int) -> Attributes:
        measure = self.ensure_measure(i, implicit=True)
        if self.voice_buf is None:
            return measure.leading
        inline = None
        if self.voice_buf.items and isinstance(self.voice_buf.items[-1], Attributes):
            inline = self.voice_buf.items[-1]
        if inline is None:
            inline = Attributes()
            self.voice_buf.items.append(inline)
            self.voice_buf.last_note = None
        return inline

    def handle_key(self, fifths: int, i: int) -> None:
        self.close_note()
        self.close_collection()
        self.target_attributes(i).key_fifths = fifths
        self.ctx.set_key(fifths)

    def handle_time(self, token: str, i: int) -> None:
        beats_match = _TIME_RE.match(token)
        if beats_match:
            self.close_note()
            self.close_collection()
            if self.awaiting_time is not None:
                self.warn("unterminated_construct", i,
                          "time:N without a beat-type token; assuming /4")
            attrs = self.target_attributes(i)
            attrs.time = TimeSignature(int(beats_match.group(1)), 4)
            self.time = attrs.time
            self.awaiting_time = attrs
            return
        bt = int(_BEAT_TYPE_RE.match(token).group(1))
        if bt <= 0 or bt & (bt - 1):
            self.warn("unexpected_token", i, f"beat type {bt} is not a power of two")
            return
        if self.awaiting_time is not None and self.awaiting_time.time is not None:
            self.awaiting_time.time = TimeSignature(self.awaiting_time.time.beats, bt)
            self.time = self.awaiting_time.time
            self.awaiting_time = None
        else:
            self.warn("orphan_stop", i, f"beat-type token {token!r} without time:N")

    def handle_clef(self, token: str, i: int) -> None:
        self.close_note()
        self.close_collection()
        m = _CLEF_RE.match(token)
        sign, line = m.group(1), int(m.group(2))
        attrs = self.target_attributes(i)
        staff = min(len(attrs.clefs) + 1, 2)
        clef = Clef(staff=staff, sign=sign, line=line)
        attrs.clefs.append(clef)
        self.max_staff = max(self.max_staff, staff)
        self.last_clef = clef

    def handle_voice(self, number: int, i: int) -> None:
        self.close_voice(i)
        measure = self.ensure_measure(i, implicit=True)
        self.voice_buf = measure.voice(number)
        self.staff_state = None
        self.stem_state = None

    def handle_type(self, token: str, i: int) -> None:
        if self.collecting is not None:
            self.collecting[1].append(token)
            return
        if self.pending is not None and not self.pending.rooted:
            self.pending.note.note_type = token
            self.pending.rooted = True
            return
        if self.pending is not None:
            self.warn("unexpected_token", i,
                      f"second type token {token!r} on one note")
            return
        self.warn("unexpected_token", i, f"type token {token!r} with no note open")

    def handle_timemod(self, token: str, i: int) -> None:
        m = _TIMEMOD_RE.match(token)
        tm = TimeModification(actual=int(m.group(1)), normal=int(m.group(2)))
        if self.collecting is not None:
            self.collecting[2] = tm
            return
        if self.pending is not None:
            self.pending.note.time_modification = tm
            return
        self.warn("unexpected_token", i, f"time modification {token!r} with no note open")

    def handle_root(self, token: str, category: str, i: int) -> None:
        self.close_collection()
        if self.pending is not None and (self.pending.rooted or self.pending.has_head):
            self.close_note()
        buf = self.ensure_voice(i)
        if self.pending is None:
            note = Note(voice=buf.number,
                        staff=self.staff_state or (1 if buf.number <= 4 else 2))
            self.pending = _PendingNote(note=note, token_index=i)
        note = self.pending.note
        if category == "grace":
            note.grace = True
            note.grace_slash = token == "grace:slash"
        elif category == "chord":
            note.chord = True
        elif token == "rest":
            note.rest = True
            self.pending.has_head = True
        elif token == "rest:measure":
            note.rest = True
            note.measure_rest = True
            self.pending.has_head = True
            self.pending.rooted = True
        else:  # pitch
            step, octave = token[0], int(token[1:])
            note.pitch = Pitch(step=step, octave=octave)
            self.pending.has_head = True

    def handle_modifier(self, token: str, category: str, i: int) -> None:
        if category == "staff" and self.last_clef is not None:
            attrs = self.target_attributes(i)
            staff = int(_STAFF_RE.match(token).group(1))
            if attrs.clefs and attrs.clefs[-1] is self.last_clef:
                attrs.clefs[-1] = Clef(staff=staff, sign=self.last_clef.sign,
                                       line=self.last_clef.line)
                self.max_staff = max(self.max_staff, staff)
            self.last_clef = None
            return
        if self.collecting is not None:
            self.close_collection()
        if self.pending is None or not self.pending.rooted:
            kind = "orphan_stop" if token.endswith(":stop") else "unexpected_token"
            self.warn(kind, i, f"modifier {token!r} with no open note")
            return
        note = self.pending.note
        buf = self.voice_buf
        if category == "dot":
            if note.measure_rest:
                self.warn("unexpected_token", i, "dot on a whole-measure rest")
            else:
                note.dots = min(2, note.dots + 1)
        elif category == "accidental":
            if note.rest:
                self.warn("unexpected_token", i, "accidental on a rest")
            else:
                note.accidental = token
        elif category == "stem":
            if note.rest:
                self.warn("unexpected_token", i, "stem on a rest")
            else:
                note.stem = token.split(":", 1)[1]
                self.stem_state = note.stem
        elif category == "staff":
            staff = int(_STAFF_RE.match(token).group(1))
            note.staff = staff
            self.staff_state = staff
            self.max_staff = max(self.max_staff, staff)
        elif category == "beam":
            self.pending.beam_tokens.append(token.split(":", 1)[1])
        elif category == "tied":
            if token == "tied:start":
                note.tied_start = True
                self.open_ties += 1
            else:
                note.tied_stop = True
                if self.open_ties == 0:
                    self.warn("orphan_stop", i, "tied:stop with no open tie")
                else:
                    self.open_ties -= 1
        elif category == "slur":
            if token == "slur:start":
                note.slur_starts += 1
                self.open_slurs += 1
            else:
                note.slur_stops += 1
                if self.open_slurs == 0:
                    self.warn("orphan_stop", i, "slur:stop with no open slur")
                else:
                    self.open_slurs -= 1
        elif category == "tuplet":
            if token == "tuplet:start":
                if note.time_modification is None:
                    self.warn("unexpected_token", i,
                              "tuplet:start on a note without a tuplet ratio")
                elif buf.open_tuplet is not None:
                    self.warn("unexpected_token", i, "nested tuplet start ignored")
                else:
                    note.tuplet_start = True
                    buf.open_tuplet = note
            else:
                if buf.open_tuplet is None or note.time_modification is None:
                    self.warn("orphan_stop", i, "tuplet:stop with no open tuplet")
                else:
                    note.tuplet_stop = True
                    buf.open_tuplet = None
        elif category == "ornament":
            self.apply_ornament(note, token)

    def apply_ornament(self, note: Note, token: str) -> None:
        if token == "staccato":
            note.staccato = True
        elif token == "accent":
            note.accent = True
        elif token == "tenuto":
            note.tenuto = True
        elif token == "trill":
            note.trill = True
        elif token == "fermata":
            note.fermata = True
        elif token == "arpeggiate":
            note.arpeggiate = True
        elif token.startswith("tremolo:"):
            note.tremolo_marks = int(token.split(":", 1)[1])
        else:
            note.ornaments = frozenset(note.ornaments | {token})

    # -- materialization ------------------------------------------------------

    def materialize(self) -> ScoreDocument:
        part = Part(id="P1")
        durations: list[Fraction] = []
        skeletons: list[list] = []
        for buffer in self.measures:
            skeleton = self.materialize_measure(buffer, durations)
            skeletons.append(skeleton)
        divisions = minimal_divisions(durations)

        for skeleton in skeletons:
            elements = []
            for item in skeleton:
                if isinstance(item, tuple):
                    kind, quarters, voice = item
                    dur = int(quarters * divisions)
                    if kind == "backup":
                        elements.append(Backup(duration_divisions=dur))
                    else:
                        elements.append(Forward(duration_divisions=dur, voice=voice))
                else:
                    elements.append(item)
            part.measures.append(Measure(elements=elements))

        if not part.measures:
            part.measures.append(Measure())
        first = part.measures[0]
        if first.elements and isinstance(first.elements[0], Attributes):
            head = first.elements[0]
        else:
            head = Attributes()
            first.elements.insert(0, head)
        head.divisions = divisions
        if self.max_staff > 1:
            head.staves = self.max_staff
        doc = ScoreDocument(parts=[part])
        doc.source_divisions["P1"] = divisions
        return doc

    def materialize_measure(self, buffer: _MeasureBuffer,
                            durations: list[Fraction]) -> list:
        capacity = buffer.capacity if buffer.capacity is not None else Fraction(4)
        skeleton: list = []
        if not buffer.leading.is_empty():
            skeleton.append(buffer.leading)

        voices = sorted(buffer.voices.values(), key=lambda b: b.number)
        spans = {b.number: b.quarters(capacity) for b in voices}
        span = max(spans.values(), default=Fraction(0))
        for vi, buf in enumerate(voices):
            if vi > 0:
                skeleton.append(("backup", span, None))
                durations.append(span)
            for item in buf.items:
                if isinstance(item, tuple):
                    skeleton.append(("forward", item[1], buf.number))
                    durations.append(item[1])
                elif isinstance(item, Note):
                    skeleton.append(item)
                    q = item.quarters(capacity) if not item.chord else Fraction(0)
                    if q:
                        durations.append(q)
                else:
                    skeleton.append(item)
            gap = span - spans[buf.number]
            if gap > 0:
                skeleton.append(("forward", gap, buf.number))
                durations.append(gap)
        return skeleton


def delinearize(tokens) -> tuple[ScoreDocument, list[DelinearizeWarning]]:
    """Decode a token stream; never raises, whatever the input.

    Accepts a TokenSequence, a list of tokens, or a whitespace-separated
    string.
    """
    if isinstance(tokens, TokenSequence):
        token_list = list(tokens.tokens)
    elif isinstance(tokens, str):
        token_list = tokens.split()
    else:
        token_list = [str(t) for t in tokens]
    return _Decoder(token_list).run()
