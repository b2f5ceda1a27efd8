"""Per-trial records, session summaries and their CSV/JSON forms.

Trial data are kept column-wise (one numpy array per field) because sessions
run to millions of trials; :meth:`TrialTable.records` yields row objects.

CSV files start with a ``# photon-sight <kind> v<version>`` comment line that
readers check before parsing.
"""

import csv
from dataclasses import dataclass, field
import io
import math
from typing import Optional

import numpy as np

CONDITIONS = (
    "flash",
    "stimulus_left",
    "stimulus_right",
    "superposition",
    "mixture",
    "control_blank",
    "bell_entangled",
)
SIDES = ("Left", "Right")

TRIALS_KIND = "trials"
TRIALS_VERSION = 1
POINTS_KIND = "fos-points"
POINTS_VERSION = 1
SOURCE_KIND = "source-stats"
SOURCE_VERSION = 1

TRIAL_COLUMNS = (
    "trial_id",
    "condition",
    "mean_photons",
    "photons_left",
    "photons_right",
    "truth_side",
    "response_side",
    "seen_left",
    "seen_right",
    "rating",
    "correct",
)
POINT_COLUMNS = ("mean_photons", "trials", "seen")

# integer codes; -1 marks "not applicable"
NA = -1


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    condition: str
    photons_left: int
    photons_right: int
    mean_photons: Optional[float] = None
    truth_side: Optional[str] = None
    response_side: Optional[str] = None
    seen_left: Optional[bool] = None
    seen_right: Optional[bool] = None
    rating: Optional[int] = None
    correct: Optional[bool] = None


def _codes(values, n, dtype=np.int8):
    if values is None:
        return np.full(n, NA, dtype=dtype)
    return np.asarray(values).astype(dtype)


@dataclass
class TrialTable:
    """Column store for a session's trials.

    ``condition`` holds indices into :data:`CONDITIONS`; side columns hold
    0 (Left), 1 (Right) or -1; boolean columns hold 0, 1 or -1.
    """

    condition: np.ndarray
    photons_left: np.ndarray
    photons_right: np.ndarray
    mean_photons: np.ndarray = None
    truth_side: np.ndarray = None
    response_side: np.ndarray = None
    seen_left: np.ndarray = None
    seen_right: np.ndarray = None
    rating: np.ndarray = None
    correct: np.ndarray = None

    def __post_init__(self):
        n = len(self.condition)
        self.condition = np.asarray(self.condition, dtype=np.int8)
        self.photons_left = np.asarray(self.photons_left, dtype=np.int64)
        self.photons_right = np.asarray(self.photons_right, dtype=np.int64)
        if self.mean_photons is None:
            self.mean_photons = np.full(n, np.nan)
        self.mean_photons = np.asarray(self.mean_photons, dtype=float)
        for name in ("truth_side", "response_side", "seen_left", "seen_right", "rating", "correct"):
            setattr(self, name, _codes(getattr(self, name), n))
        for name in TRIAL_COLUMNS[1:]:
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        has_side = (self.truth_side >= 0) & (self.response_side >= 0)
        if np.any((self.correct >= 0) != has_side):
            raise ValueError("correct must be set exactly when truth and response sides exist")
        blank = self.condition == CONDITIONS.index("control_blank")
        if np.any(self.photons_left[blank] + self.photons_right[blank] != 0):
            raise ValueError("control_blank trials must deliver zero photons")

    def __len__(self):
        return len(self.condition)

    @classmethod
    def concat(cls, tables):
        tables = list(tables)
        return cls(**{name: np.concatenate([getattr(t, name) for t in tables])
                      for name in TRIAL_COLUMNS[1:]})

    def take(self, index):
        return TrialTable(**{name: getattr(self, name)[index] for name in TRIAL_COLUMNS[1:]})

    def condition_mask(self, name):
        return self.condition == CONDITIONS.index(name)

    def records(self):
        for i in range(len(self)):
            yield TrialRecord(
                trial_id=i,
                condition=CONDITIONS[self.condition[i]],
                photons_left=int(self.photons_left[i]),
                photons_right=int(self.photons_right[i]),
                mean_photons=None if math.isnan(self.mean_photons[i]) else float(self.mean_photons[i]),
                truth_side=_side(self.truth_side[i]),
                response_side=_side(self.response_side[i]),
                seen_left=_flag(self.seen_left[i]),
                seen_right=_flag(self.seen_right[i]),
                rating=None if self.rating[i] < 0 else int(self.rating[i]),
                correct=_flag(self.correct[i]),
            )

    def response_labels(self):
        """Response label per trial: chosen side, else which sides were seen."""
        side = np.asarray(SIDES + ("",))[self.response_side]
        seen = np.asarray(["none", "left", "right", "both"])[
            np.clip(self.seen_left, 0, 1) + 2 * np.clip(self.seen_right, 0, 1)
        ]
        return np.where(self.response_side >= 0, side, seen)

    def condition_counts(self):
        """``{condition: {response: count}}`` with deterministic key order."""
        labels = self.response_labels()
        out = {}
        for ci, name in enumerate(CONDITIONS):
            mask = self.condition == ci
            if not mask.any():
                continue
            values, counts = np.unique(labels[mask], return_counts=True)
            out[name] = {str(v): int(c) for v, c in zip(values, counts)}
        return out


def _side(code):
    return None if code < 0 else SIDES[code]


def _flag(code):
    return None if code < 0 else bool(code)


@dataclass
class SessionResult:
    """Aggregated outcome of one protocol session.

    ``accuracy`` is ``None`` when the protocol has no scored trials.
    """

    protocol: str
    config: dict
    trials: TrialTable = field(repr=False)
    accuracy: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    @property
    def trial_count(self):
        return len(self.trials)

    @property
    def condition_counts(self):
        return self.trials.condition_counts()

    def to_dict(self):
        return {
            "protocol": self.protocol,
            "config": self.config,
            "trial_count": self.trial_count,
            "condition_counts": self.condition_counts,
            "accuracy": self.accuracy,
            **self.extra,
        }


# -- CSV ---------------------------------------------------------------------

def _version_line(kind, version):
    return f"# photon-sight {kind} v{version}"


def _check_version(line, kind, version):
    expected = _version_line(kind, version)
    if line.rstrip("\r\n") != expected:
        raise SchemaError(f"expected version line {expected!r}, got {line.rstrip()!r}")


def _fmt_code(codes, labels):
    lookup = np.asarray(list(labels) + [""], dtype=object)
    return lookup[codes]


def write_trials_csv(table, fh):
    """Write ``table`` to the text stream ``fh``."""
    fh.write(_version_line(TRIALS_KIND, TRIALS_VERSION) + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRIAL_COLUMNS)
    n = len(table)
    mean = np.where(np.isnan(table.mean_photons), "", table.mean_photons.astype(str)).astype(object)
    cols = [
        range(n),
        np.asarray(CONDITIONS, dtype=object)[table.condition],
        mean,
        table.photons_left.tolist(),
        table.photons_right.tolist(),
        _fmt_code(table.truth_side, SIDES),
        _fmt_code(table.response_side, SIDES),
        _fmt_code(table.seen_left, ("0", "1")),
        _fmt_code(table.seen_right, ("0", "1")),
        np.where(table.rating < 0, "", table.rating.astype(str)).astype(object),
        _fmt_code(table.correct, ("0", "1")),
    ]
    writer.writerows(zip(*cols))


def _parse_code(values, labels):
    table = {label: i for i, label in enumerate(labels)}
    table[""] = NA
    try:
        return np.array([table[v] for v in values], dtype=np.int8)
    except KeyError as exc:
        raise SchemaError(f"unexpected value {exc.args[0]!r}; allowed {labels}") from None


def read_trials_csv(fh):
    _check_version(fh.readline(), TRIALS_KIND, TRIALS_VERSION)
    reader = csv.reader(fh)
    header = next(reader, None)
    if tuple(header or ()) != TRIAL_COLUMNS:
        raise SchemaError(f"trials header mismatch: {header}")
    rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * len(TRIAL_COLUMNS)
    get = dict(zip(TRIAL_COLUMNS, cols))
    return TrialTable(
        condition=_parse_code(get["condition"], CONDITIONS),
        mean_photons=np.array([float(v) if v else np.nan for v in get["mean_photons"]]),
        photons_left=np.array(get["photons_left"], dtype=np.int64),
        photons_right=np.array(get["photons_right"], dtype=np.int64),
        truth_side=_parse_code(get["truth_side"], SIDES),
        response_side=_parse_code(get["response_side"], SIDES),
        seen_left=_parse_code(get["seen_left"], ("0", "1")),
        seen_right=_parse_code(get["seen_right"], ("0", "1")),
        rating=np.array([int(v) if v else NA for v in get["rating"]], dtype=np.int8),
        correct=_parse_code(get["correct"], ("0", "1")),
    )


def write_points_csv(points, fh):
    fh.write(_version_line(POINTS_KIND, POINTS_VERSION) + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(POINT_COLUMNS)
    for p in points:
        writer.writerow([repr(float(p[0])), int(p[1]), int(p[2])])


def read_points_csv(fh):
    from .inference import FoSPoint

    _check_version(fh.readline(), POINTS_KIND, POINTS_VERSION)
    reader = csv.reader(fh)
    header = next(reader, None)
    if tuple(header or ()) != POINT_COLUMNS:
        raise SchemaError(f"fos-points header mismatch: {header}")
    try:
        return [FoSPoint(float(m), int(t), int(s)) for m, t, s in reader]
    except ValueError as exc:
        raise SchemaError(f"malformed fos-points row: {exc}") from None


def points_from_trials(table):
    """Aggregate yes/no flash trials into frequency-of-seeing points."""
    from .inference import FoSPoint

    mask = table.condition_mask("flash")
    if not mask.any():
        raise SchemaError("trials file has no 'flash' trials to aggregate")
    levels = table.mean_photons[mask]
    seen = table.seen_left[mask]
    out = []
    for level in np.unique(levels):
        sel = levels == level
        out.append(FoSPoint(float(level), int(sel.sum()), int((seen[sel] == 1).sum())))
    return out


def read_any_points(fh):
    """Frequency-of-seeing points from either a points or a trials CSV."""
    first = fh.readline()
    rest = io.StringIO(first + fh.read())
    if first.startswith(f"# photon-sight {TRIALS_KIND} "):
        return points_from_trials(read_trials_csv(rest))
    return read_points_csv(rest)


def write_source_stats_csv(stats, fh):
    from .source import STATS_COLUMNS

    fh.write(_version_line(SOURCE_KIND, SOURCE_VERSION) + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(STATS_COLUMNS)
    row = stats.to_dict()
    writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in STATS_COLUMNS])
