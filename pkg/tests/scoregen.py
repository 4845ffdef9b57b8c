"""Random canonical pianoform documents for round-trip and property tests.

Documents come out directly in canonical form: voice-major measures,
voices 1-4/5-8 ascending, full-measure backups, forward padding, chords
top-note-first, minimal divisions, and notation-consistent pitch
alterations (explicit accidentals, key signature and tie carry always
agree with what a reader would infer). Coverage knobs: tuplets, chords,
grace notes, ties across barlines, cross-staff notes, partial voices,
pickup measures, whole-measure rests.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Optional

from lmxkit.canonicalize import minimal_divisions
from lmxkit.delinearize import key_alters
from lmxkit.model import (
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
)

TIME_CHOICES = [(4, 4), (3, 4), (2, 4), (6, 8), (2, 2), (3, 8)]

_PLAIN_RHYTHMS = [  # (type, dots, quarters)
    ("whole", 0, Fraction(4)),
    ("half", 1, Fraction(3)),
    ("half", 0, Fraction(2)),
    ("quarter", 1, Fraction(3, 2)),
    ("quarter", 0, Fraction(1)),
    ("eighth", 1, Fraction(3, 4)),
    ("eighth", 0, Fraction(1, 2)),
    ("16th", 0, Fraction(1, 4)),
]

_STAFF_RANGES = {1: ("C", 4, "C", 6), 2: ("C", 2, "C", 4)}

_ACCIDENTAL_FOR_ALTER = {1: "sharp", -1: "flat", 0: "natural",
                         2: "double-sharp", -2: "flat-flat"}


class _AlterState:
    """Mirror of the decoder's accidental semantics, kept while generating."""

    def __init__(self, fifths: int):
        self.key = key_alters(fifths)
        self.measure: dict[tuple[str, int], int] = {}
        self.carry: dict[tuple[str, int, int], int] = {}

    def new_measure(self):
        self.measure = {}
        self.carry = {}

    def implied(self, step: str, octave: int, voice: int,
                consume_carry: bool = True) -> int:
        if (step, octave, voice) in self.carry:
            value = self.carry[(step, octave, voice)]
            if consume_carry:
                del self.carry[(step, octave, voice)]
            return value
        if (step, octave) in self.measure:
            return self.measure[(step, octave)]
        return self.key.get(step, 0)

    def apply(self, note: Note, voice: int, rng: random.Random):
        """Decide alter/accidental for a pitched note, keeping books."""
        step, octave = note.pitch.step, note.pitch.octave
        if (step, octave, voice) not in self.carry and rng.random() < 0.22:
            alter = rng.choice((-1, 0, 0, 1, 1, -1, 2, -2))
            note.accidental = _ACCIDENTAL_FOR_ALTER[alter]
            self.measure[(step, octave)] = alter
        else:
            alter = self.implied(step, octave, voice)
        note.pitch = Pitch(step, octave, alter or None)


def _random_pitch(rng: random.Random, staff: int) -> Pitch:
    lo_step, lo_oct, hi_step, hi_oct = _STAFF_RANGES[staff]
    steps = "CDEFGAB"
    lo = lo_oct * 7 + steps.index(lo_step)
    hi = hi_oct * 7 + steps.index(hi_step)
    value = rng.randint(lo, hi)
    return Pitch(step=steps[value % 7], octave=value // 7)


def _pitch_sort_key(note: Note):
    p = note.pitch
    return (note.staff, -p.octave, -"CDEFGAB".index(p.step), -(p.alter or 0))


class _VoicePlan:
    def __init__(self, number: int, staff: int):
        self.number = number
        self.staff = staff
        self.stem = "up" if number in (1, 5) else "down"


def random_document(rng: random.Random, n_measures: Optional[int] = None,
                    max_voices_per_staff: int = 2) -> ScoreDocument:
    fifths = rng.randint(-7, 7)
    beats, beat_type = rng.choice(TIME_CHOICES)
    time = TimeSignature(beats, beat_type)
    capacity = time.measure_quarters()
    n_measures = n_measures if n_measures is not None else rng.randint(2, 3)

    voices = [_VoicePlan(1, 1), _VoicePlan(5, 2)]
    for staff, extra_numbers in ((1, (2, 3, 4)), (2, (6, 7, 8))):
        chance = 0.45
        for number in extra_numbers[:max_voices_per_staff - 1]:
            if rng.random() < chance:
                voices.append(_VoicePlan(number, staff))
            chance *= 0.25
    voices.sort(key=lambda v: v.number)

    alters = _AlterState(fifths)
    measures_content: list[list[tuple[_VoicePlan, list]]] = []

    for mi in range(n_measures):
        pickup = mi == 0 and rng.random() < 0.15 and capacity >= 2
        measure_capacity = capacity / 2 if pickup else capacity
        alters.new_measure()
        tie_targets = _decide_cross_ties(rng, measures_content, voices, alters)
        content: list[tuple[_VoicePlan, list]] = []
        for plan in voices:
            items = _voice_measure(rng, plan, measure_capacity, alters,
                                   is_primary=plan.number in (1, 5),
                                   allow_measure_rest=not pickup,
                                   tie_in=tie_targets.get(plan.number))
            content.append((plan, items))
        measures_content.append(content)

    durations: list[Fraction] = []
    for content in measures_content:
        span = _measure_span(content, capacity)
        durations.append(span)
        for _, items in content:
            for item in items:
                if isinstance(item, Note):
                    if not item.chord:
                        q = item.quarters(capacity)
                        if q:
                            durations.append(q)
                else:
                    durations.append(item)
    divisions = minimal_divisions(durations)

    part = Part(id="P1")
    for mi, content in enumerate(measures_content):
        elements = []
        if mi == 0:
            clef1 = Clef(staff=1, sign="G", line=2) if rng.random() < 0.9 \
                else Clef(staff=1, sign="C", line=3)
            clef2 = Clef(staff=2, sign="F", line=4) if rng.random() < 0.9 \
                else Clef(staff=2, sign="G", line=2)
            elements.append(Attributes(divisions=divisions, key_fifths=fifths,
                                       time=time, staves=2, clefs=[clef1, clef2]))
        span = _measure_span(content, capacity)
        for vi, (plan, items) in enumerate(content):
            if vi > 0:
                elements.append(Backup(duration_divisions=int(span * divisions)))
            cursor = Fraction(0)
            for item in items:
                if isinstance(item, Note):
                    elements.append(item)
                    if not item.chord:
                        cursor += item.quarters(capacity)
                else:
                    elements.append(Forward(duration_divisions=int(item * divisions),
                                            voice=plan.number))
                    cursor += item
            if cursor < span:
                elements.append(Forward(duration_divisions=int((span - cursor)
                                                               * divisions),
                                        voice=plan.number))
        part.measures.append(Measure(elements=elements))

    doc = ScoreDocument(parts=[part])
    doc.source_divisions["P1"] = divisions
    return doc


def _measure_span(content, capacity: Fraction) -> Fraction:
    span = Fraction(0)
    for _, items in content:
        cursor = Fraction(0)
        for item in items:
            if isinstance(item, Note):
                if not item.chord:
                    cursor += item.quarters(capacity)
            else:
                cursor += item
        span = max(span, cursor)
    return span


def _decide_cross_ties(rng: random.Random, previous_measures, voices,
                       alters: _AlterState) -> dict[int, Pitch]:
    """Mark tie starts on the previous measure and return forced stop pitches."""
    targets: dict[int, Pitch] = {}
    if not previous_measures or rng.random() > 0.4:
        return targets
    prev = {plan.number: items for plan, items in previous_measures[-1]}
    for plan in voices:
        if rng.random() > 0.35:
            continue
        items = prev.get(plan.number, [])
        last = next((it for it in reversed(items) if isinstance(it, Note)
                     and not it.chord), None)
        if last is None or last.rest or last.grace \
                or last.time_modification is not None:
            continue
        last.tied_start = last.tie_start = True
        key3 = (last.pitch.step, last.pitch.octave, plan.number)
        alters.carry[key3] = last.pitch.alter or 0
        targets[plan.number] = last.pitch
    return targets


def _voice_measure(rng: random.Random, plan: _VoicePlan, capacity: Fraction,
                   alters: _AlterState, is_primary: bool,
                   allow_measure_rest: bool,
                   tie_in: Optional[Pitch] = None) -> list:
    """Items for one voice: Notes plus Fraction gaps, summing to <= capacity."""
    if tie_in is None and is_primary and allow_measure_rest and rng.random() < 0.06:
        return [Note(rest=True, measure_rest=True, voice=plan.number,
                     staff=plan.staff)]

    items: list = []
    remaining = capacity

    if tie_in is not None:
        kind, dots, q = _pick_rhythm(rng, remaining)
        alter = alters.implied(tie_in.step, tie_in.octave, plan.number)
        note = Note(pitch=Pitch(tie_in.step, tie_in.octave, alter or None),
                    note_type=kind, dots=dots, voice=plan.number,
                    staff=plan.staff,
                    stem=plan.stem if kind != "whole" else None,
                    tied_stop=True, tie_stop=True)
        items.append(note)
        remaining -= q
    elif not is_primary and rng.random() < 0.25:
        gap = Fraction(rng.choice((1, 2)), rng.choice((1, 2)))
        gap = min(gap, remaining - Fraction(1, 4))
        if gap > 0:
            items.append(gap)
            remaining -= gap
    stop_early = (not is_primary) and rng.random() < 0.25

    while remaining > 0:
        if stop_early and remaining <= capacity / 2 \
                and any(isinstance(x, Note) for x in items):
            break
        roll = rng.random()
        if roll < 0.12 and remaining >= 1:
            group, used = _tuplet_group(rng, plan, alters, remaining)
            items.extend(group)
            remaining -= used
        elif roll < 0.20:
            kind, dots, q = _pick_rhythm(rng, remaining)
            items.append(Note(rest=True, voice=plan.number, staff=plan.staff,
                              note_type=kind, dots=dots))
            remaining -= q
        else:
            kind, dots, q = _pick_rhythm(rng, remaining)
            items.extend(_note_or_chord(rng, plan, kind, dots, alters))
            remaining -= q
    _add_cross_staff(rng, items, plan)
    _add_ties_within(rng, items, plan)
    _add_beams(items)
    _add_slurs(rng, items)
    _add_ornaments(rng, items)
    return items


def _add_cross_staff(rng: random.Random, items: list, plan: _VoicePlan) -> None:
    """Send a strict minority of chord groups to the other staff."""
    heads = [i for i, it in enumerate(items)
             if isinstance(it, Note) and not it.chord]
    budget = (len(heads) - 1) // 2
    if budget <= 0 or rng.random() > 0.3:
        return
    other = 2 if plan.staff == 1 else 1
    for i in rng.sample(heads, rng.randint(1, budget)):
        head = items[i]
        if head.rest or head.grace:
            continue
        head.staff = other
        j = i + 1
        while j < len(items) and isinstance(items[j], Note) and items[j].chord:
            items[j].staff = other
            j += 1


def _pick_rhythm(rng: random.Random, remaining: Fraction):
    options = [(k, d, q) for k, d, q in _PLAIN_RHYTHMS if q <= remaining]
    weights = [3 if q in (Fraction(1), Fraction(1, 2)) else 1
               for _, _, q in options]
    return rng.choices(options, weights=weights, k=1)[0]


def _note_or_chord(rng: random.Random, plan: _VoicePlan, kind: str, dots: int,
                   alters: _AlterState) -> list[Note]:
    staff = plan.staff
    stem = plan.stem if kind != "whole" else None
    if stem and rng.random() < 0.07:
        stem = "down" if stem == "up" else "up"

    count = rng.choice((2, 2, 3)) if rng.random() < 0.18 else 1
    seen: set[tuple[str, int]] = set()
    notes: list[Note] = []
    for _ in range(count):
        pitch = _random_pitch(rng, staff)
        for _attempt in range(8):
            if (pitch.step, pitch.octave) not in seen:
                break
            pitch = _random_pitch(rng, staff)
        else:
            continue
        seen.add((pitch.step, pitch.octave))
        notes.append(Note(pitch=pitch, note_type=kind, dots=dots,
                          voice=plan.number, staff=staff, stem=stem))
    notes.sort(key=_pitch_sort_key)
    grace = None
    if rng.random() < 0.10:
        grace = Note(pitch=_random_pitch(rng, staff), note_type="eighth",
                     grace=True, grace_slash=rng.random() < 0.5,
                     voice=plan.number, staff=staff, stem="up")
        alters.apply(grace, plan.number, rng)  # alters follow emission order
    for i, note in enumerate(notes):
        note.chord = i > 0
        alters.apply(note, plan.number, rng)
    return notes if grace is None else [grace] + notes


def _tuplet_group(rng: random.Random, plan: _VoicePlan, alters: _AlterState,
                  remaining: Fraction):
    """A complete tuplet: triplet eighths, triplet quarters, or sextuplet."""
    shapes = [("eighth", 3, 2, Fraction(1)),
              ("eighth", 3, 2, Fraction(1)),
              ("quarter", 3, 2, Fraction(2)),
              ("16th", 6, 4, Fraction(1))]
    kind, actual, normal, total = rng.choice(
        [s for s in shapes if s[3] <= remaining])
    tm = TimeModification(actual=actual, normal=normal)
    notes = []
    for i in range(actual):
        rest = rng.random() < 0.1
        note = Note(rest=rest,
                    pitch=None if rest else _random_pitch(rng, plan.staff),
                    note_type=kind, voice=plan.number, staff=plan.staff,
                    stem=None if rest else plan.stem, time_modification=tm,
                    tuplet_start=i == 0, tuplet_stop=i == actual - 1)
        if not rest:
            alters.apply(note, plan.number, rng)
        notes.append(note)
    if kind in ("eighth", "16th"):
        _beam_run([n for n in notes if not n.rest])
    return notes, total


def _add_ties_within(rng: random.Random, items: list, plan: _VoicePlan) -> None:
    heads = [i for i, it in enumerate(items)
             if isinstance(it, Note) and not it.chord and not it.rest
             and not it.grace and it.time_modification is None]
    for a, b in zip(heads, heads[1:]):
        if rng.random() < 0.12:
            start, stop = items[a], items[b]
            if stop.tied_stop or stop.accidental is not None:
                # never retarget a note whose explicit accidental already
                # fed the shared alteration state
                continue
            stop.pitch = Pitch(start.pitch.step, start.pitch.octave,
                               start.pitch.alter)
            start.tied_start = start.tie_start = True
            stop.tied_stop = stop.tie_stop = True


def _beam_run(notes: list[Note]) -> None:
    if len(notes) < 2:
        return
    levels = {"eighth": 1, "16th": 2}
    depth = min(levels.get(n.note_type, 0) for n in notes)
    if depth == 0:
        return
    for i, note in enumerate(notes):
        value = "begin" if i == 0 else "end" if i == len(notes) - 1 else "continue"
        note.beams = [value] * depth


def _add_beams(items: list) -> None:
    run: list[Note] = []
    for item in items:
        beamable = (isinstance(item, Note) and not item.rest and not item.grace
                    and item.note_type in ("eighth", "16th") and item.dots == 0
                    and item.time_modification is None and not item.chord
                    and not item.beams)
        if beamable:
            run.append(item)
            if len(run) == 4:
                _beam_run(run)
                run = []
        elif not (isinstance(item, Note) and item.chord):
            _beam_run(run)
            run = []
    _beam_run(run)


def _add_slurs(rng: random.Random, items: list) -> None:
    notes = [it for it in items if isinstance(it, Note) and not it.rest
             and not it.chord]
    if len(notes) >= 3 and rng.random() < 0.25:
        a, b = sorted(rng.sample(range(len(notes)), 2))
        if a != b:
            notes[a].slur_starts += 1
            notes[b].slur_stops += 1


def _add_ornaments(rng: random.Random, items: list) -> None:
    for item in items:
        if not isinstance(item, Note) or item.grace:
            continue
        r = rng.random()
        if r < 0.04 and not item.rest:
            item.staccato = True
        elif r < 0.06 and not item.rest:
            item.accent = True
        elif r < 0.075 and not item.rest:
            item.trill = True
        elif r < 0.085 and not item.rest:
            item.ornaments = frozenset({rng.choice(("mordent", "turn",
                                                    "inverted-mordent",
                                                    "inverted-turn"))})
        elif r < 0.09:
            item.fermata = True
        elif r < 0.095 and item.chord:
            item.arpeggiate = True
        elif r < 0.10 and not item.rest and item.note_type in ("half", "quarter") \
                and not item.beams:
            item.tremolo_marks = rng.randint(1, 3)


def random_corpus(seed: int, count: int, **kwargs) -> list[ScoreDocument]:
    rng = random.Random(seed)
    return [random_document(rng, **kwargs) for _ in range(count)]
