"""Normalization of parsed scores into the canonical form the tokenizer needs.

Canonical form, per part:
  * measures are voice-major: all elements of one voice, a full-measure
    backup, then the next voice;
  * voices are numbered 1-4 on staff 1 and 5-8 on staff 2, ascending, with
    relative source order preserved;
  * chords are ordered staff-ascending then pitch-descending (top note
    first within a staff), matching MuseScore's export convention;
  * gaps inside or around a voice are explicit forwards (tagged with their
    voice number), so every voice spans the same duration;
  * divisions are the minimal positive integer making every duration
    integral, declared once in the first measure.

Canonicalization never changes musical content: the multiset of
(onset, pitch, duration, staff) per measure is preserved.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import CanonicalizationError
from .model import (
    Attributes,
    Backup,
    Forward,
    Measure,
    MusicElement,
    Note,
    Part,
    ScoreDocument,
    TimeSignature,
)


@dataclass
class CanonicalReport:
    reordered_chords: int = 0
    renumbered_voices: int = 0
    dropped_elements: dict[str, int] = field(default_factory=dict)
    divisions_rescaled: bool = False

    def drop(self, name: str, count: int = 1) -> None:
        self.dropped_elements[name] = self.dropped_elements.get(name, 0) + count


@dataclass
class _ChordGroup:
    """A note plus its chord continuations, anchored at one onset."""
    onset: Fraction
    notes: list[Note]

    def quarters(self, capacity: Optional[Fraction]) -> Fraction:
        return self.notes[0].quarters(capacity)


@dataclass
class _VoiceStream:
    source_voice: int
    order: int                    # first-appearance index in the measure
    groups: list[_ChordGroup] = field(default_factory=list)
    inline_attrs: list[tuple[Fraction, Attributes]] = field(default_factory=list)
    forward_quarters: Fraction = Fraction(0)

    def home_staff(self) -> int:
        counts = {1: 0, 2: 0}
        for g in self.groups:
            counts[min(2, max(1, g.notes[0].staff))] += 1
        return 2 if counts[2] > counts[1] else 1

    def extent(self, capacity: Optional[Fraction]) -> Fraction:
        end = Fraction(0)
        for g in self.groups:
            end = max(end, g.onset + g.quarters(capacity))
        return end

    def summed_quarters(self, capacity: Optional[Fraction]) -> Fraction:
        return sum((g.quarters(capacity) for g in self.groups),
                   self.forward_quarters)


def canonicalize(doc: ScoreDocument) -> tuple[ScoreDocument, CanonicalReport]:
    report = CanonicalReport()
    if doc.skip_log.print_object_flags:
        report.drop("print-object", doc.skip_log.print_object_flags)

    out = ScoreDocument()
    for part in doc.parts:
        out.parts.append(_canonicalize_part(copy.deepcopy(part), report,
                                            out.source_divisions))
    return out, report


def _part_staves(part: Part) -> int:
    staves = 1
    for measure in part.measures:
        for el in measure.elements:
            if isinstance(el, Note):
                staves = max(staves, el.staff)
            elif isinstance(el, Attributes):
                if el.staves is not None:
                    staves = max(staves, el.staves)
                for clef in el.clefs:
                    staves = max(staves, clef.staff)
    return staves


def _canonicalize_part(part: Part, report: CanonicalReport,
                       source_divisions: dict[str, int]) -> Part:
    new_part = Part(id=part.id)
    staves = _part_staves(part)
    divisions = 1
    time: Optional[TimeSignature] = None

    # pass 1: simulate playback and rebuild voice-major measure skeletons
    # with exact rational durations; divisions are chosen afterwards
    skeletons: list[list] = []
    all_durations: list[Fraction] = []
    for mi, measure in enumerate(part.measures):
        divisions, time, skeleton, durations = _canonicalize_measure(
            measure, mi, part.id, divisions, time, report)
        skeletons.append(skeleton)
        all_durations.extend(durations)

    new_divisions = minimal_divisions(all_durations)
    if _first_divisions(part) != new_divisions:
        report.divisions_rescaled = True

    # pass 2: materialize rational durations as integers
    for skeleton in skeletons:
        elements: list[MusicElement] = []
        for item in skeleton:
            if isinstance(item, (Attributes, Note)):
                elements.append(item)
            else:
                kind, quarters, voice = item
                dur = quarters * new_divisions
                assert dur.denominator == 1
                if kind == "backup":
                    elements.append(Backup(duration_divisions=int(dur)))
                else:
                    elements.append(Forward(duration_divisions=int(dur), voice=voice))
        new_part.measures.append(Measure(elements=elements))

    _install_divisions(new_part, new_divisions, staves)
    source_divisions[part.id] = new_divisions
    return new_part


def _first_divisions(part: Part) -> Optional[int]:
    for measure in part.measures:
        for el in measure.elements:
            if isinstance(el, Attributes) and el.divisions is not None:
                return el.divisions
    return None


def _install_divisions(part: Part, divisions: int, staves: int) -> None:
    if not part.measures:
        part.measures.append(Measure())
    first = part.measures[0]
    if first.elements and isinstance(first.elements[0], Attributes):
        head = first.elements[0]
    else:
        head = Attributes()
        first.elements.insert(0, head)
    head.divisions = divisions
    if staves > 1:
        head.staves = staves


def _canonicalize_measure(measure: Measure, mi: int, part_id: str, divisions: int,
                          time: Optional[TimeSignature], report: CanonicalReport):
    leading_attrs, streams, divisions, time = _split_voices(
        measure, mi, part_id, divisions, time)
    capacity = time.measure_quarters() if time else None

    ordered = _renumber_voices(streams, mi, part_id, report)
    for stream in ordered:
        for g in stream.groups:
            if _reorder_chord(g):
                report.reordered_chords += 1

    span = Fraction(0)
    for stream in ordered:
        extent = stream.extent(capacity)
        if capacity is not None and extent > capacity:
            raise CanonicalizationError(
                f"part {part_id} measure {mi + 1} voice {stream.source_voice}: "
                f"content spans {extent} quarters in a {capacity}-quarter measure",
                measure_index=mi, voice=stream.source_voice)
        span = max(span, extent)

    skeleton: list = []
    durations: list[Fraction] = []
    leading = _merge_attributes(leading_attrs, mi == 0, report)
    if leading is not None:
        skeleton.append(leading)

    for vi, stream in enumerate(ordered):
        voice = stream.groups[0].notes[0].voice
        if vi > 0:
            skeleton.append(("backup", span, None))
            durations.append(span)
        cursor = Fraction(0)
        pending = sorted(stream.inline_attrs, key=lambda t: t[0])
        for g in sorted(stream.groups, key=lambda g: g.onset):
            while pending and pending[0][0] <= g.onset:
                _emit_inline_attrs(pending.pop(0)[1], skeleton, leading, report)
            if g.onset > cursor:
                gap = g.onset - cursor
                skeleton.append(("forward", gap, voice))
                durations.append(gap)
                cursor = g.onset
            skeleton.extend(g.notes)
            dur = g.quarters(capacity)
            durations.append(dur)
            cursor += dur
        for _, attrs in pending:
            _emit_inline_attrs(attrs, skeleton, leading, report)
        if cursor < span:
            gap = span - cursor
            skeleton.append(("forward", gap, voice))
            durations.append(gap)
    durations = [d for d in durations if d > 0]
    return divisions, time, skeleton, durations


def _merge_attributes(attrs_list: list[Attributes], first_measure: bool,
                      report: CanonicalReport) -> Optional[Attributes]:
    """Fold a run of leading attributes into one; later values win."""
    if not attrs_list:
        return Attributes() if first_measure else None
    merged = Attributes()
    for a in attrs_list:
        if a.key_fifths is not None:
            merged.key_fifths = a.key_fifths
        if a.time is not None:
            merged.time = a.time
        if a.staves is not None:
            merged.staves = a.staves
        merged.clefs.extend(a.clefs)
    if len(attrs_list) > 1:
        report.drop("attributes", len(attrs_list) - 1)
    kept: list = []
    for clef in reversed(merged.clefs):  # last clef per staff wins
        if all(c.staff != clef.staff for c in kept):
            kept.append(clef)
    merged.clefs = list(reversed(kept))
    if merged.is_empty() and not first_measure:
        report.drop("attributes")
        return None
    return merged


def _emit_inline_attrs(attrs: Attributes, skeleton: list,
                       leading: Optional[Attributes],
                       report: CanonicalReport) -> None:
    attrs.divisions = None
    if attrs.is_empty():
        report.drop("attributes")
        return
    if skeleton and isinstance(skeleton[-1], Attributes) and skeleton[-1] is not leading:
        prev = skeleton[-1]
        if attrs.key_fifths is not None:
            prev.key_fifths = attrs.key_fifths
        if attrs.time is not None:
            prev.time = attrs.time
        if attrs.staves is not None:
            prev.staves = attrs.staves
        prev.clefs.extend(attrs.clefs)
        report.drop("attributes")
        return
    skeleton.append(attrs)


def _split_voices(measure: Measure, mi: int, part_id: str, divisions: int,
                  time: Optional[TimeSignature]):
    """Exact playback simulation: assign every note an onset and a voice."""
    leading_attrs: list[Attributes] = []
    streams: dict[int, _VoiceStream] = {}
    cursor = Fraction(0)
    current_voice: Optional[int] = None
    last_group: Optional[_ChordGroup] = None
    seen_note = False

    def stream_for(voice: int) -> _VoiceStream:
        if voice not in streams:
            streams[voice] = _VoiceStream(source_voice=voice, order=len(streams))
        return streams[voice]

    for el in measure.elements:
        if isinstance(el, Attributes):
            if el.divisions is not None:
                divisions = el.divisions
            if el.time is not None:
                time = el.time
            if not seen_note:
                leading_attrs.append(el)
            else:
                stream_for(current_voice or 1).inline_attrs.append((cursor, el))
        elif isinstance(el, Note):
            seen_note = True
            voice = el.voice if el.voice >= 1 else 1
            capacity = time.measure_quarters() if time else None
            if el.chord and last_group is not None and voice == current_voice:
                last_group.notes.append(el)
                continue
            el.chord = False  # orphan chord flags are healed
            group = _ChordGroup(onset=cursor, notes=[el])
            stream_for(voice).groups.append(group)
            last_group = group
            current_voice = voice
            cursor += el.quarters(capacity)
        elif isinstance(el, Backup):
            cursor -= Fraction(el.duration_divisions, divisions)
            if cursor < 0:
                cursor = Fraction(0)
            last_group = None
            current_voice = None
        elif isinstance(el, Forward):
            gap = Fraction(el.duration_divisions, divisions)
            voice = el.voice or current_voice or 1
            stream_for(voice).forward_quarters += gap
            cursor += gap
            last_group = None
    return leading_attrs, streams, divisions, time


def _renumber_voices(streams: dict[int, _VoiceStream], mi: int, part_id: str,
                     report: CanonicalReport) -> list[_VoiceStream]:
    by_staff: dict[int, list[_VoiceStream]] = {1: [], 2: []}
    for stream in streams.values():
        if not stream.groups:
            continue  # forward-only stream: its padding is re-derived anyway
        by_staff[stream.home_staff()].append(stream)
    ordered: list[_VoiceStream] = []
    for staff, base in ((1, 1), (2, 5)):
        group = sorted(by_staff[staff], key=lambda s: s.order)
        if len(group) > 4:
            raise CanonicalizationError(
                f"part {part_id} measure {mi + 1}: {len(group)} voices on staff "
                f"{staff} exceed the 4-voice limit",
                measure_index=mi, voice=group[4].source_voice)
        for i, stream in enumerate(group):
            new_voice = base + i
            if new_voice != stream.source_voice:
                report.renumbered_voices += 1
            for g in stream.groups:
                for note in g.notes:
                    note.voice = new_voice
            ordered.append(stream)
    return ordered


def _reorder_chord(group: _ChordGroup) -> bool:
    """Order chord notes staff-ascending, pitch-descending. True if changed."""
    if len(group.notes) < 2:
        return False

    def sort_key(note: Note):
        p = note.pitch
        pitch_rank = (-p.octave, -"CDEFGAB".index(p.step), -(p.alter or 0)) if p \
            else (0, 0, 0)
        return (note.staff, *pitch_rank)

    ordered = sorted(group.notes, key=sort_key)
    if ordered == group.notes:
        return False
    old_head, new_head = group.notes[0], ordered[0]
    if old_head is not new_head:
        # bracket-level marks ride on the first chord note
        new_head.beams, old_head.beams = old_head.beams or new_head.beams, []
        new_head.tuplet_start |= old_head.tuplet_start
        new_head.tuplet_stop |= old_head.tuplet_stop
        old_head.tuplet_start = old_head.tuplet_stop = False
        new_head.slur_starts += old_head.slur_starts
        new_head.slur_stops += old_head.slur_stops
        old_head.slur_starts = old_head.slur_stops = 0
    for i, note in enumerate(ordered):
        note.chord = i > 0
    group.notes[:] = ordered
    return True


def minimal_divisions(durations: list[Fraction]) -> int:
    """Smallest positive integer divisions making all durations integral."""
    result = 1
    for d in durations:
        result = math.lcm(result, d.denominator)
    return result


def durations_consistent(measure: Measure, time: Optional[TimeSignature],
                         divisions: int) -> bool:
    """True iff no voice's summed duration overfills the time signature.

    Pickup and incomplete final measures may under-fill; grace notes and
    chord continuations contribute nothing.
    """
    if divisions <= 0:
        raise ValueError("divisions must be positive")
    if time is None:
        return True
    capacity = time.measure_quarters()
    measure = copy.deepcopy(measure)
    _, streams, _, _ = _split_voices(measure, 0, "?", divisions, time)
    return all(s.summed_quarters(capacity) <= capacity for s in streams.values())
