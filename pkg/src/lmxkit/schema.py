"""Structural validation of emitted MusicXML against the 3.1 content model.

A hand-rolled checker for the partwise subset this toolkit writes:
required elements, child ordering, and value ranges. It is the validity
oracle used by the tests (the full W3C XSD is not vendored); it is
deliberately strict about ordering because the MusicXML schema is.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

_NOTE_ORDER = ["grace", "chord", "pitch", "rest", "unpitched", "duration", "tie",
               "voice", "type", "dot", "accidental", "time-modification", "stem",
               "notehead", "staff", "beam", "notations", "lyric"]

_ATTRIBUTES_ORDER = ["divisions", "key", "time", "staves", "part-symbol",
                     "instruments", "clef", "staff-details", "transpose"]

_TYPE_VALUES = {"maxima", "long", "breve", "whole", "half", "quarter", "eighth",
                "16th", "32nd", "64th", "128th", "256th", "512th", "1024th"}

_ACCIDENTAL_VALUES = {"sharp", "natural", "flat", "double-sharp", "sharp-sharp",
                      "flat-flat", "natural-sharp", "natural-flat", "quarter-flat",
                      "quarter-sharp", "three-quarters-flat", "three-quarters-sharp"}

_BEAM_VALUES = {"begin", "continue", "end", "forward-hook", "backward-hook"}

_STEM_VALUES = {"up", "down", "none", "double"}

_CLEF_SIGNS = {"G", "F", "C", "percussion", "TAB", "jianpu", "none"}

_NOTATION_TAGS = {"tied", "slur", "tuplet", "glissando", "slide", "ornaments",
                  "technical", "articulations", "dynamics", "fermata", "arpeggiate",
                  "non-arpeggiate", "accidental-mark", "other-notation"}

_ORNAMENT_TAGS = {"trill-mark", "turn", "delayed-turn", "inverted-turn", "mordent",
                  "inverted-mordent", "schleifer", "tremolo", "wavy-line",
                  "other-ornament", "shake", "vertical-turn", "accidental-mark"}

_ARTICULATION_TAGS = {"accent", "strong-accent", "staccato", "tenuto",
                      "detached-legato", "staccatissimo", "spiccato", "scoop",
                      "plop", "doit", "falloff", "breath-mark", "caesura",
                      "stress", "unstress", "other-articulation"}

_MEASURE_CHILDREN = {"note", "backup", "forward", "attributes", "direction",
                     "harmony", "figured-bass", "print", "sound", "barline",
                     "grouping", "link", "bookmark"}


def validate_musicxml(data: bytes) -> list[str]:
    """Return a list of schema problems; empty means structurally valid."""
    issues: list[str] = []
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        return [f"not well-formed XML: {exc}"]
    if root.tag != "score-partwise":
        return [f"root element is <{root.tag}>, expected <score-partwise>"]

    part_list = root.find("part-list")
    declared: list[str] = []
    if part_list is None:
        issues.append("missing <part-list>")
    else:
        for sp in part_list.findall("score-part"):
            pid = sp.get("id")
            if not pid:
                issues.append("<score-part> without id")
            elif pid in declared:
                issues.append(f"duplicate score-part id {pid}")
            else:
                declared.append(pid)
            if sp.find("part-name") is None:
                issues.append(f"score-part {pid}: missing <part-name>")
        if not declared:
            issues.append("<part-list> declares no parts")

    parts = root.findall("part")
    if not parts:
        issues.append("no <part> elements")
    for part in parts:
        pid = part.get("id")
        where = f"part {pid}"
        if not pid:
            issues.append("<part> without id")
        elif declared and pid not in declared:
            issues.append(f"{where} not declared in part-list")
        for mi, measure in enumerate(part.findall("measure")):
            if not measure.get("number"):
                issues.append(f"{where} measure {mi + 1}: missing number attribute")
            _check_measure(measure, f"{where} measure {mi + 1}", issues)
    return issues


def _check_measure(measure: ET.Element, where: str, issues: list[str]) -> None:
    for el in measure:
        if el.tag not in _MEASURE_CHILDREN:
            issues.append(f"{where}: unexpected <{el.tag}> in measure")
        elif el.tag == "note":
            _check_note(el, where, issues)
        elif el.tag == "attributes":
            _check_attributes(el, where, issues)
        elif el.tag in ("backup", "forward"):
            dur = el.find("duration")
            if dur is None or not _is_positive_int(dur.text):
                issues.append(f"{where}: <{el.tag}> needs a positive <duration>")


def _check_order(el: ET.Element, order: list[str], where: str,
                 issues: list[str]) -> None:
    last = -1
    for child in el:
        if child.tag not in order:
            continue
        idx = order.index(child.tag)
        if idx < last:
            issues.append(f"{where}: <{child.tag}> out of schema order")
        last = max(last, idx)


def _check_note(note: ET.Element, where: str, issues: list[str]) -> None:
    _check_order(note, _NOTE_ORDER, f"{where} note", issues)
    grace = note.find("grace") is not None
    pitch = note.find("pitch")
    rest = note.find("rest")
    if (pitch is None) == (rest is None):
        issues.append(f"{where}: note needs exactly one of <pitch>/<rest>")
    duration = note.find("duration")
    if grace and duration is not None:
        issues.append(f"{where}: grace note must not carry <duration>")
    if not grace and (duration is None or not _is_positive_int(duration.text)):
        issues.append(f"{where}: note needs a positive <duration>")
    if pitch is not None:
        _check_pitch(pitch, where, issues)
    if rest is not None and rest.get("measure") not in (None, "yes", "no"):
        issues.append(f"{where}: bad rest measure attribute")
    ties = [t.get("type") for t in note.findall("tie")]
    if len(ties) > 2 or any(t not in ("start", "stop") for t in ties):
        issues.append(f"{where}: bad <tie> elements")
    type_el = note.find("type")
    if type_el is not None and type_el.text not in _TYPE_VALUES:
        issues.append(f"{where}: bad note type {type_el.text!r}")
    acc = note.find("accidental")
    if acc is not None and acc.text not in _ACCIDENTAL_VALUES:
        issues.append(f"{where}: bad accidental {acc.text!r}")
    tm = note.find("time-modification")
    if tm is not None:
        if not _is_positive_int(tm.findtext("actual-notes")) \
                or not _is_positive_int(tm.findtext("normal-notes")):
            issues.append(f"{where}: bad <time-modification>")
    stem = note.find("stem")
    if stem is not None and stem.text not in _STEM_VALUES:
        issues.append(f"{where}: bad stem {stem.text!r}")
    staff = note.find("staff")
    if staff is not None and not _is_positive_int(staff.text):
        issues.append(f"{where}: bad <staff>")
    voice = note.find("voice")
    if voice is not None and not (voice.text or "").strip():
        issues.append(f"{where}: empty <voice>")
    seen_beams = set()
    for beam in note.findall("beam"):
        number = beam.get("number", "1")
        if beam.text not in _BEAM_VALUES:
            issues.append(f"{where}: bad beam value {beam.text!r}")
        if not number.isdigit() or not 1 <= int(number) <= 8:
            issues.append(f"{where}: beam number {number} out of range")
        elif number in seen_beams:
            issues.append(f"{where}: duplicate beam number {number}")
        seen_beams.add(number)
    for notations in note.findall("notations"):
        _check_notations(notations, where, issues)


def _check_pitch(pitch: ET.Element, where: str, issues: list[str]) -> None:
    _check_order(pitch, ["step", "alter", "octave"], f"{where} pitch", issues)
    step = pitch.findtext("step")
    octave = pitch.findtext("octave")
    if step not in tuple("ABCDEFG"):
        issues.append(f"{where}: bad pitch step {step!r}")
    if octave is None or not octave.strip().lstrip("-").isdigit() \
            or not 0 <= int(octave) <= 9:
        issues.append(f"{where}: bad pitch octave {octave!r}")
    alter = pitch.findtext("alter")
    if alter is not None:
        try:
            float(alter)
        except ValueError:
            issues.append(f"{where}: bad pitch alter {alter!r}")


def _check_notations(notations: ET.Element, where: str, issues: list[str]) -> None:
    for el in notations:
        if el.tag not in _NOTATION_TAGS:
            issues.append(f"{where}: unexpected <{el.tag}> in notations")
        elif el.tag in ("tied", "slur", "tuplet"):
            kind = el.get("type")
            valid = ("start", "stop", "continue") if el.tag != "tuplet" \
                else ("start", "stop")
            if kind not in valid:
                issues.append(f"{where}: bad {el.tag} type {kind!r}")
            number = el.get("number")
            if number is not None and (not number.isdigit()
                                       or not 1 <= int(number) <= 6):
                issues.append(f"{where}: {el.tag} number {number} out of range")
        elif el.tag == "ornaments":
            for orn in el:
                if orn.tag not in _ORNAMENT_TAGS:
                    issues.append(f"{where}: unexpected ornament <{orn.tag}>")
                elif orn.tag == "tremolo":
                    if orn.text is None or not orn.text.strip().isdigit() \
                            or not 0 <= int(orn.text) <= 8:
                        issues.append(f"{where}: bad tremolo marks {orn.text!r}")
        elif el.tag == "articulations":
            for art in el:
                if art.tag not in _ARTICULATION_TAGS:
                    issues.append(f"{where}: unexpected articulation <{art.tag}>")


def _check_attributes(attrs: ET.Element, where: str, issues: list[str]) -> None:
    _check_order(attrs, _ATTRIBUTES_ORDER, f"{where} attributes", issues)
    divisions = attrs.find("divisions")
    if divisions is not None and not _is_positive_int(divisions.text):
        issues.append(f"{where}: bad <divisions>")
    key = attrs.find("key")
    if key is not None:
        fifths = key.findtext("fifths")
        if fifths is None or not fifths.strip().lstrip("-").isdigit():
            issues.append(f"{where}: bad key <fifths>")
    time = attrs.find("time")
    if time is not None:
        if not _is_positive_int(time.findtext("beats")) \
                or not _is_positive_int(time.findtext("beat-type")):
            issues.append(f"{where}: bad <time>")
    staves = attrs.find("staves")
    if staves is not None and not _is_positive_int(staves.text):
        issues.append(f"{where}: bad <staves>")
    for clef in attrs.findall("clef"):
        if clef.findtext("sign") not in _CLEF_SIGNS:
            issues.append(f"{where}: bad clef sign")
        line = clef.findtext("line")
        if line is not None and (not line.strip().isdigit()
                                 or not 1 <= int(line) <= 5):
            issues.append(f"{where}: bad clef line {line!r}")


def _is_positive_int(text) -> bool:
    if text is None:
        return False
    text = text.strip()
    return text.isdigit() and int(text) > 0
