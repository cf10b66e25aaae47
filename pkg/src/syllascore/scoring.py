"""Quality scores and evaluation numbers from classifier outputs.

The per-fragment probability of belonging to the pre-operation class is the
quality score. Fragments aggregate to a syllable score (mean over the
syllable's fragments) and syllables to a session score (unweighted mean over
syllables, so long recordings cannot dominate). Classification accuracy uses
the fixed threshold p >= 0.5 -> class 1.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nn
from .errors import DegenerateInput, EmptySession, EmptySplit

PREDICT_THRESHOLD = 0.5


@dataclass
class ScoreReport:
    """Scores for one (patient, session): fragment, syllable, session level."""

    patient_id: str
    session_index: int
    fragment_scores: dict  # syllable_id -> list of per-fragment probabilities
    syllable_scores: dict  # syllable_id -> mean of its fragments
    session_score: float
    n_fragments: int
    n_syllables: int
    missing_syllables: list = field(default_factory=list)


@dataclass
class EvalReport:
    """Accuracy of a model over one cohort's train/test split."""

    cohort: str
    n_train: int
    n_test: int
    train_accuracy: float
    test_accuracy: float
    train_per_class: dict  # "0"/"1" -> accuracy on that class (None if absent)
    test_per_class: dict


def score_session(model, fragments_by_syllable, patient_id="", session_index=0,
                  fragment_mean=False):
    """Score one session's fragments, grouped per syllable.

    fragments_by_syllable maps syllable_id -> array (K, steps, bins); K may
    be 0 for recordings that gated away entirely, which are reported as
    missing rather than scored. With fragment_mean=True the session score is
    the mean over all fragments instead of the unweighted syllable mean.
    """
    fragment_scores = {}
    syllable_scores = {}
    missing = []
    all_scores = []
    for syllable_id in sorted(fragments_by_syllable):
        frags = np.asarray(fragments_by_syllable[syllable_id], dtype=np.float64)
        if frags.size == 0:
            missing.append(syllable_id)
            continue
        p = nn.forward_batch(model, model.standardize(frags))
        fragment_scores[syllable_id] = [float(v) for v in p]
        syllable_scores[syllable_id] = float(p.mean())
        all_scores.extend(fragment_scores[syllable_id])
    if not syllable_scores:
        raise EmptySession(f"session {session_index} of patient {patient_id} has no fragments")
    if fragment_mean:
        session = float(np.mean(all_scores))
    else:
        session = float(np.mean(list(syllable_scores.values())))
    return ScoreReport(
        patient_id=patient_id,
        session_index=session_index,
        fragment_scores=fragment_scores,
        syllable_scores=syllable_scores,
        session_score=session,
        n_fragments=len(all_scores),
        n_syllables=len(syllable_scores),
        missing_syllables=missing,
    )


def _per_class_accuracy(pred, y):
    out = {}
    for cls in (0, 1):
        mask = y == cls
        out[str(cls)] = float(np.mean(pred[mask] == cls)) if mask.any() else None
    return out


def evaluate(model, X, y, split, cohort="all"):
    """Accuracy over the train and test sides of a split assignment."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if split.test_indices.size == 0:
        raise EmptySplit("test split is empty")
    Xs = model.standardize(X)
    sides = {}
    for name, idx in (("train", split.train_indices), ("test", split.test_indices)):
        p = nn.forward_batch(model, Xs[idx])
        pred = (p >= PREDICT_THRESHOLD).astype(int)
        ys = y[idx].astype(int)
        sides[name] = (float(np.mean(pred == ys)), _per_class_accuracy(pred, ys))
    return EvalReport(
        cohort=str(cohort),
        n_train=int(split.train_indices.size),
        n_test=int(split.test_indices.size),
        train_accuracy=sides["train"][0],
        test_accuracy=sides["test"][0],
        train_per_class=sides["train"][1],
        test_per_class=sides["test"][1],
    )


def pearson(xs, ys):
    """Sample Pearson correlation coefficient.

    With a binary second argument this is the point-biserial coefficient,
    which is how continuous quality scores are compared against binary
    expert marks. Constant input is an error, not a silent zero.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if xs.size < 3:
        raise ValueError("need at least 3 observations")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("correlation is undefined for a constant sequence")
    return float(dx @ dy / np.sqrt(sxx * syy))


# --------------------------------------------------------------------------
# Report rendering: text for humans, csv/json for machines.
# --------------------------------------------------------------------------

def _trace_rows(trace):
    header = ["epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"]
    rows = [
        [e + 1, tl, ta, vl, va]
        for e, (tl, ta, vl, va) in enumerate(trace.rows())
    ]
    return header, rows


@dataclass
class ScoreGrid:
    """Scores for several sessions, plus the optional expert-mark comparison."""

    reports: list  # of ScoreReport
    expert_correlation: Optional[float] = None
    skipped_sessions: list = field(default_factory=list)  # (patient, session) with no fragments


def to_json(report):
    """Lossless JSON rendering of any report object."""
    if isinstance(report, ScoreReport):
        doc = {"kind": "score_report", **report.__dict__}
    elif isinstance(report, EvalReport):
        doc = {"kind": "eval_report", **report.__dict__}
    elif isinstance(report, nn.TrainTrace):
        doc = {
            "kind": "train_trace",
            "train_loss": report.train_loss,
            "train_accuracy": report.train_accuracy,
            "test_loss": report.test_loss,
            "test_accuracy": report.test_accuracy,
        }
    elif isinstance(report, ScoreGrid):
        doc = {
            "kind": "score_grid",
            "reports": [json.loads(to_json(r)) for r in report.reports],
            "expert_correlation": report.expert_correlation,
            "skipped_sessions": [list(pair) for pair in report.skipped_sessions],
        }
    elif isinstance(report, (list, tuple)):
        doc = {"kind": "eval_grid", "reports": [json.loads(to_json(r)) for r in report]}
    else:
        raise TypeError(f"cannot render {type(report).__name__}")
    return json.dumps(doc, indent=1)


def from_json(text):
    """Parse a document produced by to_json back into its report object."""
    doc = json.loads(text)
    kind = doc.pop("kind", None)
    if kind == "score_report":
        return ScoreReport(**doc)
    if kind == "eval_report":
        return EvalReport(**doc)
    if kind == "train_trace":
        return nn.TrainTrace(**doc)
    if kind == "eval_grid":
        return [from_json(json.dumps(r)) for r in doc["reports"]]
    if kind == "score_grid":
        return ScoreGrid(
            reports=[from_json(json.dumps(r)) for r in doc["reports"]],
            expert_correlation=doc.get("expert_correlation"),
            skipped_sessions=[tuple(pair) for pair in doc.get("skipped_sessions", [])],
        )
    raise ValueError(f"unknown report kind {kind!r}")


def to_csv(report):
    """CSV rendering; columns are documented in the README."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if isinstance(report, nn.TrainTrace):
        header, rows = _trace_rows(report)
        writer.writerow(header)
        writer.writerows([[row[0]] + [repr(v) for v in row[1:]] for row in rows])
    elif isinstance(report, ScoreReport):
        writer.writerow(["level", "patient_id", "session_index", "syllable_id", "fragment_index", "score"])
        for syllable_id, scores in report.fragment_scores.items():
            for k, p in enumerate(scores):
                writer.writerow(["fragment", report.patient_id, report.session_index, syllable_id, k, repr(p)])
        for syllable_id, score in report.syllable_scores.items():
            writer.writerow(["syllable", report.patient_id, report.session_index, syllable_id, "", repr(score)])
        writer.writerow(["session", report.patient_id, report.session_index, "", "", repr(report.session_score)])
    elif isinstance(report, EvalReport):
        writer.writerow(["cohort", "n_train", "n_test", "train_accuracy", "test_accuracy"])
        writer.writerow([report.cohort, report.n_train, report.n_test,
                         repr(report.train_accuracy), repr(report.test_accuracy)])
    elif isinstance(report, ScoreGrid):
        writer.writerow(["patient_id", "session_index", "session_score", "n_syllables", "n_fragments"])
        for r in report.reports:
            writer.writerow([r.patient_id, r.session_index, repr(r.session_score),
                             r.n_syllables, r.n_fragments])
    elif isinstance(report, (list, tuple)) and all(isinstance(r, EvalReport) for r in report):
        writer.writerow(["cohort", "n_train", "n_test", "train_accuracy", "test_accuracy"])
        for r in report:
            writer.writerow([r.cohort, r.n_train, r.n_test, repr(r.train_accuracy), repr(r.test_accuracy)])
    else:
        raise TypeError(f"cannot render {type(report).__name__}")
    return buf.getvalue()


def to_text(report):
    """Human-readable rendering."""
    if isinstance(report, ScoreReport):
        lines = [f"patient {report.patient_id}  session {report.session_index}"]
        for syllable_id, score in report.syllable_scores.items():
            n = len(report.fragment_scores[syllable_id])
            lines.append(f"  {syllable_id:<12} {score:8.4f}  ({n} fragments)")
        for syllable_id in report.missing_syllables:
            lines.append(f"  {syllable_id:<12}  missing (no fragments after gating)")
        lines.append(f"  session score Q = {report.session_score:.4f} over {report.n_syllables} syllables")
        return "\n".join(lines)
    if isinstance(report, EvalReport):
        return to_text([report])
    if isinstance(report, ScoreGrid):
        lines = [f"{'patient':<10}{'session':>8}{'score Q':>10}{'syllables':>11}{'fragments':>11}"]
        for r in report.reports:
            lines.append(f"{r.patient_id:<10}{r.session_index:>8}{r.session_score:>10.4f}"
                         f"{r.n_syllables:>11}{r.n_fragments:>11}")
        for patient_id, session_index in report.skipped_sessions:
            lines.append(f"{patient_id:<10}{session_index:>8}   missing (no fragments)")
        if report.expert_correlation is not None:
            lines.append(f"correlation with expert marks: {report.expert_correlation:.4f}")
        return "\n".join(lines)
    if isinstance(report, (list, tuple)) and all(isinstance(r, EvalReport) for r in report):
        width = max(12, *(len(r.cohort) for r in report)) + 2
        lines = [f"{'cohort':<{width}}{'train':>9}{'test':>9}{'n_train':>9}{'n_test':>8}"]
        for r in report:
            lines.append(
                f"{r.cohort:<{width}}{r.train_accuracy:>9.3f}{r.test_accuracy:>9.3f}"
                f"{r.n_train:>9}{r.n_test:>8}"
            )
        return "\n".join(lines)
    if isinstance(report, nn.TrainTrace):
        header, rows = _trace_rows(report)
        lines = [f"{header[0]:>6} {header[1]:>12} {header[2]:>15} {header[3]:>12} {header[4]:>14}"]
        for row in rows:
            lines.append(f"{row[0]:>6} {row[1]:>12.5f} {row[2]:>15.4f} {row[3]:>12.5f} {row[4]:>14.4f}")
        return "\n".join(lines)
    raise TypeError(f"cannot render {type(report).__name__}")


def render(report, fmt):
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    if fmt == "text":
        return to_text(report)
    raise ValueError(f"unknown format {fmt!r}")
