"""Tree edit distance between scores, with note-aware substitution costs.

Documents are turned into ordered labeled trees that mirror the MusicXML
element structure, except that each note subtree is collapsed into a
single node labeled with its feature set. Substituting one note for
another then costs the symmetric difference of the feature sets, so a
one-property difference is cheap while naive per-element TED would charge
for the whole decomposed subtree.

Distances are computed with the Zhang-Shasha algorithm (keyroot
decomposition, O(m*n) table memory). The normalized score divides by the
total deletion cost of the reference tree, so an empty prediction scores
exactly 100%.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .canonicalize import canonicalize
from .delinearize import delinearize
from .errors import LmxError
from .linearize import linearize
from .model import Attributes, Backup, Forward, Note, Part, ScoreDocument

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoteLabel:
    features: frozenset[tuple[str, str]]

    def __repr__(self):
        inner = " ".join(f"{k}={v}" for k, v in sorted(self.features))
        return f"<note {inner}>"


Label = Union[str, NoteLabel]


class TreeNode:
    __slots__ = ("label", "children")

    def __init__(self, label: Label, children: Optional[list["TreeNode"]] = None):
        self.label = label
        self.children = children or []

    def add(self, label: Label) -> "TreeNode":
        child = TreeNode(label)
        self.children.append(child)
        return child


class LabeledTree:
    """Postorder-indexed ordered tree with leftmost-leaf and keyroot tables."""

    def __init__(self, root: Optional[TreeNode]):
        self.root = root
        self.labels: list[Label] = []
        self.lmds: list[int] = []
        self.keyroots: list[int] = []
        if root is None:
            return
        index_of: dict[int, int] = {}
        node_stack: list[tuple[TreeNode, int]] = [(root, 0)]  # iterative postorder
        while node_stack:
            node, ci = node_stack.pop()
            if ci < len(node.children):
                node_stack.append((node, ci + 1))
                node_stack.append((node.children[ci], 0))
                continue
            idx = len(self.labels)
            index_of[id(node)] = idx
            self.labels.append(node.label)
            if node.children:
                self.lmds.append(self.lmds[index_of[id(node.children[0])]])
            else:
                self.lmds.append(idx)
        keyroot_for_lmd: dict[int, int] = {}
        for i, lmd in enumerate(self.lmds):
            keyroot_for_lmd[lmd] = i
        self.keyroots = sorted(keyroot_for_lmd.values())

    def __len__(self) -> int:
        return len(self.labels)


# -- cost model ---------------------------------------------------------------


@dataclass
class CostModel:
    """Edit costs. Plain nodes: unit insert/delete, unit relabel.

    Note nodes cost the (weighted) size of their feature set to insert or
    delete, and the weighted symmetric difference to substitute; weights
    are per feature key and default to 1, which keeps all metric axioms.
    """

    plain_insert: Fraction = Fraction(1)
    plain_delete: Fraction = Fraction(1)
    plain_substitute: Fraction = Fraction(1)
    feature_weights: dict[str, Fraction] = field(default_factory=dict)

    def _weight(self, key: str) -> Fraction:
        return self.feature_weights.get(key, Fraction(1))

    def _note_size(self, label: NoteLabel):
        return sum((self._weight(k) for k, _ in label.features), Fraction(0)) \
            if self.feature_weights else len(label.features)

    def insert(self, label: Label):
        if isinstance(label, NoteLabel):
            return self._note_size(label)
        return self.plain_insert

    def delete(self, label: Label):
        if isinstance(label, NoteLabel):
            return self._note_size(label)
        return self.plain_delete

    def substitute(self, a: Label, b: Label):
        if a == b:
            return 0
        if isinstance(a, NoteLabel) and isinstance(b, NoteLabel):
            diff = a.features ^ b.features
            if not self.feature_weights:
                return len(diff)
            return sum((self._weight(k) for k, _ in diff), Fraction(0))
        if isinstance(a, NoteLabel) or isinstance(b, NoteLabel):
            return self.delete(a) + self.insert(b)
        return self.plain_substitute

    def dump(self) -> str:
        lines = [f"plain.insert = {self.plain_insert}",
                 f"plain.delete = {self.plain_delete}",
                 f"plain.substitute = {self.plain_substitute}"]
        for key in sorted(self.feature_weights):
            lines.append(f"feature.{key} = {self.feature_weights[key]}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()[:16]

    @classmethod
    def load(cls, text: str) -> "CostModel":
        """Parse the plain key-value override format (`name = value`)."""
        model = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"cost model line {lineno}: expected 'name = value'")
            name, value = (s.strip() for s in line.split("=", 1))
            try:
                cost = Fraction(value)
            except (ValueError, ZeroDivisionError):
                raise ValueError(f"cost model line {lineno}: bad value {value!r}")
            if cost < 0:
                raise ValueError(f"cost model line {lineno}: negative cost")
            if name == "plain.insert":
                model.plain_insert = cost
            elif name == "plain.delete":
                model.plain_delete = cost
            elif name == "plain.substitute":
                model.plain_substitute = cost
            elif name.startswith("feature."):
                model.feature_weights[name[len("feature."):]] = cost
            else:
                raise ValueError(f"cost model line {lineno}: unknown key {name!r}")
        return model


# -- document -> tree ----------------------------------------------------------


def note_label(note: Note) -> NoteLabel:
    feats: list[tuple[str, str]] = []
    if note.rest:
        feats.append(("rest", "measure" if note.measure_rest else "yes"))
    elif note.pitch is not None:
        feats.append(("pitch-step", note.pitch.step))
        feats.append(("pitch-octave", str(note.pitch.octave)))
        if note.pitch.alter:
            feats.append(("alter", str(note.pitch.alter)))
    if note.note_type is not None:
        feats.append(("type", note.note_type))
    if note.dots:
        feats.append(("dots", str(note.dots)))
    feats.append(("voice", str(note.voice)))
    feats.append(("staff", str(note.staff)))
    if note.stem is not None:
        feats.append(("stem", note.stem))
    if note.grace:
        feats.append(("grace", "slash" if note.grace_slash else "yes"))
    if note.chord:
        feats.append(("chord", "yes"))
    if note.accidental is not None:
        feats.append(("accidental", note.accidental))
    if note.tied_start:
        feats.append(("tied-start", "yes"))
    if note.tied_stop:
        feats.append(("tied-stop", "yes"))
    if note.beams:
        feats.append(("beam-list", ",".join(note.beams)))
    if note.time_modification is not None:
        feats.append(("timemod", note.time_modification.token()))
    for mark in ("staccato", "accent", "tenuto", "trill", "fermata", "arpeggiate"):
        if getattr(note, mark):
            feats.append((f"ornament:{mark}", "yes"))
    for mark in note.ornaments:
        feats.append((f"ornament:{mark}", "yes"))
    if note.tremolo_marks is not None:
        feats.append(("ornament:tremolo", str(note.tremolo_marks)))
    return NoteLabel(frozenset(feats))


def tree_from_musicxml(doc: Optional[ScoreDocument],
                       mode: str = "full") -> LabeledTree:
    """Labeled tree of a document's semantic content.

    ``full`` keeps everything the model retains; ``lmx-subset`` first
    projects the document through tokenization and decoding, leaving only
    content the token language can express. ``None`` yields the empty
    tree (the representation of a missing/failed prediction).
    """
    if doc is None:
        return LabeledTree(None)
    if mode not in ("full", "lmx-subset"):
        raise ValueError(f"unknown tree mode {mode!r}")
    if mode == "lmx-subset":
        doc = project_to_lmx(doc)
    root = TreeNode("score-partwise")
    for part in doc.parts:
        part_node = root.add("part")
        for measure in part.measures:
            m_node = part_node.add("measure")
            for el in measure.elements:
                _element_subtree(m_node, el)
    return LabeledTree(root)


def project_to_lmx(doc: ScoreDocument) -> ScoreDocument:
    """Round the document through tokenize/decode, part by part."""
    canonical, _ = canonicalize(doc)
    parts: list[Part] = []
    for part in canonical.parts:
        tokens = linearize(canonical, part.id)
        decoded, _ = delinearize(tokens)
        projected = decoded.parts[0]
        projected.id = part.id
        parts.append(projected)
    out = ScoreDocument(parts=parts)
    for part in parts:
        out.source_divisions[part.id] = doc.source_divisions.get(part.id, 1)
    return out


def _element_subtree(parent: TreeNode, el) -> None:
    if isinstance(el, Note):
        parent.children.append(TreeNode(note_label(el)))
    elif isinstance(el, Backup):
        node = parent.add("backup")
        node.add(f"duration={el.duration_divisions}")
    elif isinstance(el, Forward):
        node = parent.add("forward")
        node.add(f"duration={el.duration_divisions}")
        if el.voice is not None:
            node.add(f"voice={el.voice}")
        if el.staff is not None:
            node.add(f"staff={el.staff}")
    elif isinstance(el, Attributes):
        node = parent.add("attributes")
        if el.divisions is not None:
            node.add(f"divisions={el.divisions}")
        if el.key_fifths is not None:
            node.add("key").add(f"fifths={el.key_fifths}")
        if el.time is not None:
            t = node.add("time")
            t.add(f"beats={el.time.beats}")
            t.add(f"beat-type={el.time.beat_type}")
        if el.staves is not None:
            node.add(f"staves={el.staves}")
        for clef in el.clefs:
            c = node.add("clef")
            c.add(f"number={clef.staff}")
            c.add(f"sign={clef.sign}")
            c.add(f"line={clef.line}")


# -- Zhang-Shasha --------------------------------------------------------------


def zhang_shasha(a: LabeledTree, b: LabeledTree,
                 costs: Optional[CostModel] = None,
                 stats: Optional[dict] = None):
    """Exact tree edit distance; table memory stays O(m*n)."""
    costs = costs or CostModel()
    m, n = len(a), len(b)
    if stats is not None:
        stats["peak_cells"] = 0
    if m == 0 or n == 0:
        if m == 0 and n == 0:
            return 0
        side, op = (b, costs.insert) if m == 0 else (a, costs.delete)
        return sum(op(lb) for lb in side.labels)

    del_cost = [costs.delete(lb) for lb in a.labels]
    ins_cost = [costs.insert(lb) for lb in b.labels]
    sub_cost = [[costs.substitute(la, lb) for lb in b.labels] for la in a.labels]
    td = [[0] * n for _ in range(m)]
    base_cells = m * n * 2  # treedist table + substitution cache
    if stats is not None:
        stats["peak_cells"] = base_cells

    a_lmds, b_lmds = a.lmds, b.lmds

    for i in a.keyroots:
        ioff = a_lmds[i] - 1
        mm = i - a_lmds[i] + 2
        for j in b.keyroots:
            joff = b_lmds[j] - 1
            nn = j - b_lmds[j] + 2
            if stats is not None:
                stats["peak_cells"] = max(stats["peak_cells"],
                                          base_cells + mm * nn)
            fd = [[0] * nn for _ in range(mm)]
            row0 = fd[0]
            for y in range(1, nn):
                row0[y] = row0[y - 1] + ins_cost[y + joff]
            for x in range(1, mm):
                fdx = fd[x]
                fdx1 = fd[x - 1]
                xdel = del_cost[x + ioff]
                sub_x = sub_cost[x + ioff]
                fdx[0] = fdx1[0] + xdel
                a_anchor = a_lmds[x + ioff] == a_lmds[i]
                td_x = td[x + ioff]
                for y in range(1, nn):
                    ynode = y + joff
                    if a_anchor and b_lmds[ynode] == b_lmds[j]:
                        cost = min(fdx1[y] + xdel,
                                   fdx[y - 1] + ins_cost[ynode],
                                   fdx1[y - 1] + sub_x[ynode])
                        fdx[y] = cost
                        td_x[ynode] = cost
                    else:
                        p = a_lmds[x + ioff] - 1 - ioff
                        q = b_lmds[ynode] - 1 - joff
                        fdx[y] = min(fdx1[y] + xdel,
                                     fdx[y - 1] + ins_cost[ynode],
                                     fd[p][q] + td_x[ynode])
    return td[m - 1][n - 1]


def tree_size_cost(tree: LabeledTree, costs: Optional[CostModel] = None):
    """Total deletion cost of a tree (the normalizer for scoring)."""
    costs = costs or CostModel()
    return sum(costs.delete(lb) for lb in tree.labels)


# -- edit script (debugging/calibration aid) -----------------------------------


def edit_script(a: LabeledTree, b: LabeledTree,
                costs: Optional[CostModel] = None) -> list[tuple]:
    """Minimal edit script as (op, a_index, b_index) tuples.

    Ops are "delete" (a_index, None), "insert" (None, b_index), "match"
    and "relabel" (a_index, b_index), indices in postorder. Uses a
    memoized forest recursion; intended for inspection of moderate trees,
    not for corpus-scale scoring.
    """
    costs = costs or CostModel()

    def subtree_range(tree: LabeledTree, i: int) -> tuple[int, int]:
        return tree.lmds[i], i

    memo: dict = {}

    def forest(tree, lo, hi):
        # roots of the forest spanned by postorder interval [lo, hi]
        roots = []
        k = hi
        while k >= lo:
            roots.append(k)
            k = tree.lmds[k] - 1
        return tuple(reversed(roots))

    def solve(fa: tuple, fb: tuple):
        key = (fa, fb)
        if key in memo:
            return memo[key]
        if not fa and not fb:
            result = (0, [])
        elif not fa:
            cost = sum(costs.insert(b.labels[k]) for f in fb
                       for k in range(b.lmds[f], f + 1))
            ops = [("insert", None, k) for f in fb
                   for k in range(b.lmds[f], f + 1)]
            result = (cost, ops)
        elif not fb:
            cost = sum(costs.delete(a.labels[k]) for f in fa
                       for k in range(a.lmds[f], f + 1))
            ops = [("delete", k, None) for f in fa
                   for k in range(a.lmds[f], f + 1)]
            result = (cost, ops)
        else:
            v, w = fa[-1], fb[-1]
            va_children = forest(a, a.lmds[v], v - 1)
            wb_children = forest(b, b.lmds[w], w - 1)
            c_del, o_del = solve(fa[:-1] + va_children, fb)
            c_del += costs.delete(a.labels[v])
            c_ins, o_ins = solve(fa, fb[:-1] + wb_children)
            c_ins += costs.insert(b.labels[w])
            c_sub_roots, o_sub_roots = solve(fa[:-1], fb[:-1])
            c_sub_kids, o_sub_kids = solve(va_children, wb_children)
            rel = costs.substitute(a.labels[v], b.labels[w])
            c_match = c_sub_roots + c_sub_kids + rel
            best = min(c_del, c_ins, c_match)
            if best == c_match:
                tag = "match" if rel == 0 else "relabel"
                result = (c_match, o_sub_roots + o_sub_kids + [(tag, v, w)])
            elif best == c_del:
                result = (c_del, o_del + [("delete", v, None)])
            else:
                result = (c_ins, o_ins + [("insert", None, w)])
        memo[key] = result
        return result

    fa = forest(a, 0, len(a) - 1) if len(a) else ()
    fb = forest(b, 0, len(b) - 1) if len(b) else ()
    return solve(fa, fb)[1]


# -- normalized score -----------------------------------------------------------


@dataclass
class TednResult:
    distance: Fraction
    gold_size_cost: Fraction
    tedn_percent: float
    pred_failed: bool = False

    def __post_init__(self):
        if self.gold_size_cost <= 0:
            raise ValueError("reference tree has no deletion cost")


def tedn(pred: Optional[ScoreDocument], gold: ScoreDocument, mode: str = "full",
         costs: Optional[CostModel] = None) -> TednResult:
    """Normalized tree edit distance of a prediction against a reference.

    The reference must canonicalize (hard error); a prediction that fails
    to canonicalize or project is scored as an empty prediction (100%)
    with a logged warning, so corpus runs never abort on model output.
    """
    costs = costs or CostModel()
    gold_canonical, _ = canonicalize(gold)
    gold_tree = tree_from_musicxml(gold_canonical, mode)

    pred_failed = False
    pred_tree = LabeledTree(None)
    if pred is not None:
        try:
            pred_canonical, _ = canonicalize(pred)
            pred_tree = tree_from_musicxml(pred_canonical, mode)
        except LmxError as exc:
            logger.warning("prediction failed to canonicalize (%s); "
                           "scoring as empty prediction", exc)
            pred_failed = True
    else:
        pred_failed = True

    distance = zhang_shasha(pred_tree, gold_tree, costs)
    normalizer = tree_size_cost(gold_tree, costs)
    percent = float(Fraction(distance) * 100 / Fraction(normalizer))
    return TednResult(distance=Fraction(distance),
                      gold_size_cost=Fraction(normalizer),
                      tedn_percent=percent,
                      pred_failed=pred_failed)
