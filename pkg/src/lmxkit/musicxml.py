"""MusicXML 3.x parsing and serialization for the pianoform model.

Parsing accepts partwise MusicXML 3.0/3.1/4.0 and keeps only the content
the model represents. Everything else (directions, lyrics, layout,
metadata, ...) is skipped and counted in the document's skip log, so the
discarded share of a corpus can be reported. Serialization always emits
MusicXML 3.1 partwise with the schema-defined child order and is
byte-deterministic for equal documents.
"""

from __future__ import annotations

import io
import zipfile
import xml.etree.ElementTree as ET
from fractions import Fraction
from typing import Optional

from .errors import ParseError, SerializeError, UnsupportedStructure
from .model import (
    ACCIDENTALS,
    BEAM_VALUES,
    CLEF_SIGNS,
    MAX_STAVES,
    Attributes,
    Backup,
    Clef,
    Forward,
    Measure,
    Note,
    ORNAMENTS,
    Part,
    Pitch,
    ScoreDocument,
    SkipLog,
    STEM_VALUES,
    TimeModification,
    TimeSignature,
    type_for_quarters,
    validate_document,
)

MUSICXML_DOCTYPE = (
    b'<!DOCTYPE score-partwise PUBLIC "-//Recordare//DTD MusicXML 3.1 Partwise//EN"'
    b' "http://www.musicxml.org/dtds/partwise.dtd">'
)

_ORNAMENT_TAGS = {
    "mordent": "mordent",
    "inverted-mordent": "inverted-mordent",
    "turn": "turn",
    "inverted-turn": "inverted-turn",
}


def parse_musicxml(data: bytes) -> ScoreDocument:
    """Parse a partwise MusicXML document into the semantic model.

    Unsupported elements are counted in ``doc.skip_log`` instead of
    raising; the log is exhaustive (parsed + skipped = all source
    elements).
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position if exc.position else (None, None)
        raise ParseError(f"malformed XML: {exc}", line=line, column=column) from exc

    if root.tag == "score-timewise":
        raise UnsupportedStructure("score-timewise documents are not supported; "
                                   "convert to score-partwise first")
    if root.tag != "score-partwise":
        raise UnsupportedStructure(f"unexpected root element <{root.tag}>")

    parser = _Parser(root)
    return parser.run()


def read_score(path) -> ScoreDocument:
    """Read `.musicxml` / `.xml` (raw) or `.mxl` (ZIP container) files."""
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if path.lower().endswith(".mxl") or data[:2] == b"PK":
        data = _extract_mxl(data)
    return parse_musicxml(data)


def _extract_mxl(data: bytes) -> bytes:
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise ParseError(f"not a valid .mxl container: {exc}") from exc
    try:
        container = zf.read("META-INF/container.xml")
    except KeyError:
        raise ParseError(".mxl container has no META-INF/container.xml") from None
    croot = ET.fromstring(container)
    rootfile = croot.find(".//rootfile")
    if rootfile is None or not rootfile.get("full-path"):
        raise ParseError(".mxl container.xml names no rootfile")
    return zf.read(rootfile.get("full-path"))


class _Parser:
    def __init__(self, root: ET.Element):
        self.root = root
        self.consumed: set[int] = set()
        self.log = SkipLog()

    def run(self) -> ScoreDocument:
        self.log.total_source_nodes = sum(1 for _ in self.root.iter())
        self.take(self.root)

        doc = ScoreDocument()
        for part_el in self.root.findall("part"):
            self.take(part_el)
            part_id = part_el.get("id") or f"P{len(doc.parts) + 1}"
            part = Part(id=part_id)
            divisions = None
            for m_el in part_el.findall("measure"):
                self.take(m_el)
                measure, divisions = self.parse_measure(m_el, part_id, divisions)
                part.measures.append(measure)
            if divisions is not None:
                doc.source_divisions[part_id] = divisions
            doc.parts.append(part)

        # part-list carries the part ids; the rest of it is metadata.
        part_list = self.root.find("part-list")
        if part_list is not None:
            self.take(part_list)
            for sp in part_list.findall("score-part"):
                self.take(sp)

        self.finish_accounting()
        doc.skip_log = self.log
        if not doc.parts:
            raise UnsupportedStructure("document contains no <part> elements")
        return doc

    def take(self, el: ET.Element) -> None:
        self.consumed.add(id(el))

    def take_all(self, el: ET.Element) -> None:
        for child in el.iter():
            self.consumed.add(id(child))

    def finish_accounting(self) -> None:
        for el in self.root.iter():
            if id(el) not in self.consumed:
                self.log.add(el.tag)
        self.log.parsed_nodes = self.log.total_source_nodes - self.log.skipped_nodes()

    def note_print_flag(self, el: ET.Element) -> None:
        if el.get("print-object") == "no":
            self.log.print_object_flags += 1

    # -- measure content ---------------------------------------------------

    def parse_measure(self, m_el: ET.Element, part_id: str,
                      divisions: Optional[int]) -> tuple[Measure, Optional[int]]:
        measure = Measure()
        staves_seen = 1
        for el in m_el:
            if el.tag == "note":
                note = self.parse_note(el, divisions)
                if note is not None:
                    measure.elements.append(note)
                    staves_seen = max(staves_seen, note.staff)
            elif el.tag == "backup":
                self.take_all(el)
                d = _int_text(el.find("duration"), 1)
                measure.elements.append(Backup(duration_divisions=max(1, d)))
            elif el.tag == "forward":
                self.take_all(el)
                d = _int_text(el.find("duration"), 1)
                voice = _opt_int_text(el.find("voice"))
                staff = _opt_int_text(el.find("staff"))
                measure.elements.append(
                    Forward(duration_divisions=max(1, d), voice=voice, staff=staff))
            elif el.tag == "attributes":
                attrs = self.parse_attributes(el, part_id)
                if attrs.divisions is not None:
                    divisions = attrs.divisions
                if not attrs.is_empty():
                    measure.elements.append(attrs)
            # everything else in the measure is out of scope; it stays
            # unconsumed and lands in the skip log
        if staves_seen > MAX_STAVES:
            raise UnsupportedStructure(
                f"part {part_id}: more than {MAX_STAVES} staves are not supported")
        return measure, divisions

    def parse_attributes(self, el: ET.Element, part_id: str) -> Attributes:
        self.take(el)
        attrs = Attributes()
        for child in el:
            if child.tag == "divisions":
                self.take(child)
                attrs.divisions = int(child.text.strip())
            elif child.tag == "key":
                fifths = child.find("fifths")
                if fifths is not None:
                    self.take(child)
                    self.take(fifths)
                    attrs.key_fifths = int(fifths.text.strip())
            elif child.tag == "time":
                beats = child.find("beats")
                beat_type = child.find("beat-type")
                if beats is not None and beat_type is not None:
                    self.take(child)
                    self.take(beats)
                    self.take(beat_type)
                    attrs.time = TimeSignature(int(beats.text.strip()),
                                               int(beat_type.text.strip()))
            elif child.tag == "staves":
                self.take(child)
                attrs.staves = int(child.text.strip())
                if attrs.staves > MAX_STAVES:
                    raise UnsupportedStructure(
                        f"part {part_id}: {attrs.staves} staves are not supported")
            elif child.tag == "clef":
                sign_el = child.find("sign")
                line_el = child.find("line")
                if sign_el is None:
                    continue
                sign = sign_el.text.strip()
                if sign not in CLEF_SIGNS:
                    continue  # percussion/TAB clefs stay in the skip log
                self.take(child)
                self.take(sign_el)
                line = 2 if sign == "G" else 4 if sign == "F" else 3
                if line_el is not None:
                    self.take(line_el)
                    line = int(line_el.text.strip())
                staff = int(child.get("number", "1"))
                attrs.clefs.append(Clef(staff=staff, sign=sign, line=line))
        return attrs

    def parse_note(self, el: ET.Element, divisions: Optional[int]) -> Optional[Note]:
        self.note_print_flag(el)
        if el.find("cue") is not None or el.find("unpitched") is not None:
            return None  # whole subtree goes to the skip log
        self.take(el)
        note = Note()
        duration: Optional[int] = None
        for child in el:
            tag = child.tag
            if tag == "grace":
                self.take(child)
                note.grace = True
                note.grace_slash = child.get("slash") == "yes"
            elif tag == "chord":
                self.take(child)
                note.chord = True
            elif tag == "pitch":
                self.take_all(child)
                step = child.findtext("step", "C").strip()
                octave = int(child.findtext("octave", "4").strip())
                alter_text = child.findtext("alter")
                alter = None
                if alter_text is not None:
                    value = Fraction(alter_text.strip())
                    if value.denominator != 1 or not -2 <= value <= 2:
                        raise UnsupportedStructure(
                            f"pitch alter {alter_text.strip()} unsupported (microtone?)")
                    # alter 0 and absent alter mean the same pitch
                    alter = int(value) or None
                note.pitch = Pitch(step=step, octave=octave, alter=alter)
            elif tag == "rest":
                self.take_all(child)
                note.rest = True
                note.measure_rest = child.get("measure") == "yes"
            elif tag == "duration":
                self.take(child)
                duration = int(child.text.strip())
            elif tag == "tie":
                self.take(child)
                if child.get("type") == "start":
                    note.tie_start = True
                elif child.get("type") == "stop":
                    note.tie_stop = True
            elif tag == "voice":
                self.take(child)
                note.voice = int(child.text.strip())
            elif tag == "type":
                self.take(child)
                value = child.text.strip()
                if value in ("1024th", "512th"):
                    value = "256th"
                note.note_type = value
            elif tag == "dot":
                self.take(child)
                note.dots = min(2, note.dots + 1)
            elif tag == "accidental":
                self.take(child)
                value = child.text.strip()
                if value in ACCIDENTALS:
                    note.accidental = value
                else:
                    self.log.add(f"accidental[{value}]")
            elif tag == "time-modification":
                self.take_all(child)
                actual = _int_text(child.find("actual-notes"), 1)
                normal = _int_text(child.find("normal-notes"), 1)
                note.time_modification = TimeModification(actual=actual, normal=normal)
            elif tag == "stem":
                self.take(child)
                value = child.text.strip()
                if value in STEM_VALUES:
                    note.stem = value
            elif tag == "staff":
                self.take(child)
                note.staff = int(child.text.strip())
            elif tag == "beam":
                self.take(child)
                value = child.text.strip()
                if value in BEAM_VALUES:
                    note.beams.append(value)
            elif tag == "notations":
                self.parse_notations(child, note)
        if note.rest:
            note.pitch = None
            note.stem = None
            note.accidental = None
        if not note.rest and not note.measure_rest and note.pitch is None:
            # pitched note without a pitch: out of scope, skip whole subtree
            self.consumed.discard(id(el))
            return None
        if note.note_type is None and not note.measure_rest and not note.grace:
            recovered = self._recover_type(duration, divisions, note)
            if recovered is None:
                if note.rest and duration is not None:
                    note.measure_rest = True
                else:
                    self.consumed.discard(id(el))
                    return None
            else:
                note.note_type, note.dots = recovered
        return note

    def _recover_type(self, duration: Optional[int], divisions: Optional[int],
                      note: Note) -> Optional[tuple[str, int]]:
        if duration is None or not divisions:
            return None
        q = Fraction(duration, divisions)
        if note.time_modification is not None:
            q /= note.time_modification.factor()
        return type_for_quarters(q)

    def parse_notations(self, el: ET.Element, note: Note) -> None:
        self.take(el)
        for child in el:
            tag = child.tag
            if tag == "tied":
                self.take(child)
                kind = child.get("type")
                if kind == "start":
                    note.tied_start = True
                elif kind == "stop":
                    note.tied_stop = True
            elif tag == "slur":
                self.take(child)
                kind = child.get("type")
                if kind == "start":
                    note.slur_starts += 1
                elif kind == "stop":
                    note.slur_stops += 1
            elif tag == "tuplet":
                self.take(child)
                kind = child.get("type")
                if kind == "start":
                    note.tuplet_start = True
                elif kind == "stop":
                    note.tuplet_stop = True
            elif tag == "fermata":
                self.take(child)
                note.fermata = True
            elif tag == "arpeggiate":
                self.take(child)
                note.arpeggiate = True
            elif tag == "articulations":
                self.take(child)
                for art in child:
                    if art.tag == "staccato":
                        self.take(art)
                        note.staccato = True
                    elif art.tag == "accent":
                        self.take(art)
                        note.accent = True
                    elif art.tag == "tenuto":
                        self.take(art)
                        note.tenuto = True
            elif tag == "ornaments":
                self.take(child)
                marks = set(note.ornaments)
                for orn in child:
                    if orn.tag == "trill-mark":
                        self.take(orn)
                        note.trill = True
                    elif orn.tag == "tremolo":
                        self.take(orn)
                        try:
                            note.tremolo_marks = max(1, min(4, int(orn.text.strip())))
                        except (TypeError, ValueError, AttributeError):
                            note.tremolo_marks = 1
                    elif orn.tag in _ORNAMENT_TAGS:
                        self.take(orn)
                        marks.add(orn.tag)
                note.ornaments = frozenset(marks)


def _int_text(el: Optional[ET.Element], default: int) -> int:
    if el is None or el.text is None:
        return default
    return int(el.text.strip())


def _opt_int_text(el: Optional[ET.Element]) -> Optional[int]:
    if el is None or el.text is None:
        return None
    return int(el.text.strip())


# -- serialization ---------------------------------------------------------


def serialize_musicxml(doc: ScoreDocument) -> bytes:
    """Serialize to MusicXML 3.1 partwise bytes.

    Child-element order follows the MusicXML schema; output is
    deterministic, so equal documents serialize to equal bytes.
    """
    try:
        validate_document(doc)
    except ValueError as exc:
        raise SerializeError(str(exc)) from exc

    root = ET.Element("score-partwise", {"version": "3.1"})
    part_list = ET.SubElement(root, "part-list")
    for part in doc.parts:
        sp = ET.SubElement(part_list, "score-part", {"id": part.id})
        ET.SubElement(sp, "part-name").text = part.id
    for part in doc.parts:
        _serialize_part(root, part)

    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    body = ET.tostring(root, encoding="UTF-8", xml_declaration=False)
    return (b'<?xml version="1.0" encoding="UTF-8"?>\n'
            + MUSICXML_DOCTYPE + b"\n" + body + b"\n")


def _serialize_part(root: ET.Element, part: Part) -> None:
    part_el = ET.SubElement(root, "part", {"id": part.id})
    divisions = 1
    staves = 1
    time: Optional[TimeSignature] = None
    slurs = _SlurNumbering(part.id)
    for mi, measure in enumerate(part.measures):
        m_el = ET.SubElement(part_el, "measure", {"number": str(mi + 1)})
        for ei, el in enumerate(measure.elements):
            path = f"part {part.id} measure {mi + 1} element {ei + 1}"
            if isinstance(el, Attributes):
                divisions, staves, time = _serialize_attributes(
                    m_el, el, divisions, staves, time)
            elif isinstance(el, Note):
                capacity = time.measure_quarters() if time else None
                _serialize_note(m_el, el, divisions, staves, capacity, slurs, path)
            elif isinstance(el, Backup):
                b_el = ET.SubElement(m_el, "backup")
                ET.SubElement(b_el, "duration").text = str(el.duration_divisions)
            elif isinstance(el, Forward):
                f_el = ET.SubElement(m_el, "forward")
                ET.SubElement(f_el, "duration").text = str(el.duration_divisions)
                if el.voice is not None:
                    ET.SubElement(f_el, "voice").text = str(el.voice)
                if el.staff is not None and staves > 1:
                    ET.SubElement(f_el, "staff").text = str(el.staff)


def _serialize_attributes(m_el: ET.Element, attrs: Attributes, divisions: int,
                          staves: int, time: Optional[TimeSignature]):
    a_el = ET.SubElement(m_el, "attributes")
    if attrs.divisions is not None:
        ET.SubElement(a_el, "divisions").text = str(attrs.divisions)
        divisions = attrs.divisions
    if attrs.key_fifths is not None:
        key_el = ET.SubElement(a_el, "key")
        ET.SubElement(key_el, "fifths").text = str(attrs.key_fifths)
    if attrs.time is not None:
        time = attrs.time
        t_el = ET.SubElement(a_el, "time")
        ET.SubElement(t_el, "beats").text = str(time.beats)
        ET.SubElement(t_el, "beat-type").text = str(time.beat_type)
    if attrs.staves is not None:
        ET.SubElement(a_el, "staves").text = str(attrs.staves)
        staves = attrs.staves
    for clef in attrs.clefs:
        c_attrs = {"number": str(clef.staff)} if staves > 1 else {}
        c_el = ET.SubElement(a_el, "clef", c_attrs)
        ET.SubElement(c_el, "sign").text = clef.sign
        ET.SubElement(c_el, "line").text = str(clef.line)
    return divisions, staves, time


def _serialize_note(m_el: ET.Element, note: Note, divisions: int, staves: int,
                    capacity, slurs: "_SlurNumbering", path: str) -> None:
    n_el = ET.SubElement(m_el, "note")
    if note.grace:
        g_attrs = {"slash": "yes"} if note.grace_slash else {}
        ET.SubElement(n_el, "grace", g_attrs)
    if note.chord:
        ET.SubElement(n_el, "chord")
    if note.rest:
        r_attrs = {"measure": "yes"} if note.measure_rest else {}
        ET.SubElement(n_el, "rest", r_attrs)
    else:
        p_el = ET.SubElement(n_el, "pitch")
        ET.SubElement(p_el, "step").text = note.pitch.step
        if note.pitch.alter is not None:
            ET.SubElement(p_el, "alter").text = str(note.pitch.alter)
        ET.SubElement(p_el, "octave").text = str(note.pitch.octave)
    if not note.grace:
        dur = note.quarters(capacity) * divisions
        if dur.denominator != 1 or dur <= 0:
            raise SerializeError(
                f"{path}: duration {dur} not integral at divisions={divisions}")
        ET.SubElement(n_el, "duration").text = str(int(dur))
    if note.tie_stop:
        ET.SubElement(n_el, "tie", {"type": "stop"})
    if note.tie_start:
        ET.SubElement(n_el, "tie", {"type": "start"})
    ET.SubElement(n_el, "voice").text = str(note.voice)
    if note.note_type is not None:
        ET.SubElement(n_el, "type").text = note.note_type
    for _ in range(note.dots):
        ET.SubElement(n_el, "dot")
    if note.accidental is not None:
        ET.SubElement(n_el, "accidental").text = note.accidental
    if note.time_modification is not None:
        tm_el = ET.SubElement(n_el, "time-modification")
        ET.SubElement(tm_el, "actual-notes").text = str(note.time_modification.actual)
        ET.SubElement(tm_el, "normal-notes").text = str(note.time_modification.normal)
    if note.stem is not None:
        ET.SubElement(n_el, "stem").text = note.stem
    if staves > 1:
        ET.SubElement(n_el, "staff").text = str(note.staff)
    for i, beam in enumerate(note.beams):
        ET.SubElement(n_el, "beam", {"number": str(i + 1)}).text = beam
    _serialize_notations(n_el, note, slurs, path)


def _serialize_notations(n_el: ET.Element, note: Note, slurs: "_SlurNumbering",
                         path: str) -> None:
    has_ornaments = note.trill or note.tremolo_marks is not None or note.ornaments
    has_articulations = note.staccato or note.accent or note.tenuto
    if not (note.tied_start or note.tied_stop or note.slur_starts or note.slur_stops
            or note.tuplet_start or note.tuplet_stop or has_ornaments
            or has_articulations or note.fermata or note.arpeggiate):
        return
    nt_el = ET.SubElement(n_el, "notations")
    if note.tied_stop:
        ET.SubElement(nt_el, "tied", {"type": "stop"})
    if note.tied_start:
        ET.SubElement(nt_el, "tied", {"type": "start"})
    for _ in range(note.slur_stops):
        ET.SubElement(nt_el, "slur", {"type": "stop", "number": str(slurs.stop(path))})
    for _ in range(note.slur_starts):
        ET.SubElement(nt_el, "slur", {"type": "start", "number": str(slurs.start())})
    if note.tuplet_stop:
        ET.SubElement(nt_el, "tuplet", {"type": "stop"})
    if note.tuplet_start:
        ET.SubElement(nt_el, "tuplet", {"type": "start"})
    if has_ornaments:
        o_el = ET.SubElement(nt_el, "ornaments")
        if note.trill:
            ET.SubElement(o_el, "trill-mark")
        for mark in sorted(note.ornaments, key=ORNAMENTS.index):
            ET.SubElement(o_el, mark)
        if note.tremolo_marks is not None:
            ET.SubElement(o_el, "tremolo").text = str(note.tremolo_marks)
    if has_articulations:
        a_el = ET.SubElement(nt_el, "articulations")
        if note.accent:
            ET.SubElement(a_el, "accent")
        if note.staccato:
            ET.SubElement(a_el, "staccato")
        if note.tenuto:
            ET.SubElement(a_el, "tenuto")
    if note.fermata:
        ET.SubElement(nt_el, "fermata")
    if note.arpeggiate:
        ET.SubElement(nt_el, "arpeggiate")


class _SlurNumbering:
    """FIFO slur-number allocation: stops close the oldest open slur.

    The model stores only start/stop counts, so pairing is first-in,
    first-out per part; parallel slur sets spanning several measures can
    therefore come out renumbered.
    """

    def __init__(self, part_id: str):
        self.part_id = part_id
        self.open: list[int] = []
        self.free = list(range(6, 0, -1))

    def start(self) -> int:
        number = self.free.pop() if self.free else 1
        self.open.append(number)
        return number

    def stop(self, path: str) -> int:
        if not self.open:
            return 1  # orphan stop: keep output schema-valid
        number = self.open.pop(0)
        if number not in self.free:
            self.free.append(number)
            self.free.sort(reverse=True)
        return number
