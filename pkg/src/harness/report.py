"""
Result rows, CSV output and shrink-vs-substitute comparison.

CSV layout is fixed: the header below, seconds with 12 decimals, ratios and
percentages with 6, '\\n' line endings. The same rows always produce the
same bytes.
"""

import csv
import io
import logging
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from src.simcore.errors import ConfigError

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "P",
    "strategy",
    "failures",
    "total_s",
    "t_check_s",
    "t_pfd_s",
    "t_pfr_s",
    "t_pfx_s",
    "t_recompute_s",
    "slowdown",
    "pct_check",
    "pct_recovery",
    "pct_reconfig",
    "useful_s",
    "status",
    "problem",
)

_SECONDS = {"total_s", "t_check_s", "t_pfd_s", "t_pfr_s", "t_pfx_s", "t_recompute_s", "useful_s"}
_RATIOS = {"slowdown", "pct_check", "pct_recovery", "pct_reconfig"}
_INTS = {"P", "failures"}


@dataclass(frozen=True)
class ResultRow:
    P: int
    strategy: str
    failures: int
    total_s: float
    t_check_s: float
    t_pfd_s: float
    t_pfr_s: float
    t_pfx_s: float
    t_recompute_s: float
    slowdown: float
    pct_check: float
    pct_recovery: float
    pct_reconfig: float
    useful_s: float
    status: str
    problem: str

    @property
    def waste_s(self) -> float:
        return self.t_check_s + self.t_pfd_s + self.t_pfr_s + self.t_pfx_s + self.t_recompute_s

    @property
    def recovery_s(self) -> float:
        """Detection plus state recovery."""
        return self.t_pfd_s + self.t_pfx_s

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _format(column: str, value: Any) -> str:
    if column in _SECONDS:
        return "%.12f" % value
    if column in _RATIOS:
        return "%.6f" % value
    return str(value)


def format_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        values = row.as_dict()
        writer.writerow([_format(c, values[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit_csv(rows: Iterable[ResultRow], path: str | Path) -> Path:
    """Write rows (header only when empty); ConfigError if the path is unwritable."""
    path = Path(path)
    text = format_csv(rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, newline="")
    except OSError as e:
        raise ConfigError(f"cannot write results to {path}: {e}") from e
    logger.info("Wrote %s rows to %s", text.count("\n") - 1, path)
    return path


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header: {reader.fieldnames}")
    rows = []
    for record in reader:
        values: dict[str, Any] = {}
        for column in CSV_COLUMNS:
            raw = record[column]
            if column in _INTS:
                values[column] = int(raw)
            elif column in _SECONDS or column in _RATIOS:
                values[column] = float(raw)
            else:
                values[column] = raw
        rows.append(ResultRow(**values))
    return rows


# -----------------------------------------------------------------------------
# Strategy comparison
# -----------------------------------------------------------------------------


def _ratio(a: float, b: float) -> float:
    if b == 0.0:
        return 1.0 if a == 0.0 else float("inf")
    return a / b


@dataclass(frozen=True)
class StrategyComparison:
    """Shrink and substitute side by side at one (P, failures) point."""

    P: int
    failures: int
    problem: str
    slowdown_shrink: float
    slowdown_substitute: float
    slowdown_ratio: float
    pct_check: tuple[float, float]
    pct_recovery: tuple[float, float]
    pct_reconfig: tuple[float, float]
    check_ratio: float
    reconfig_ratio: float
    recovery_ratio: float
    recompute_ratio: float
    shrink_check_higher: bool
    shrink_reconfig_higher: bool
    shrink_recompute_higher: bool


def compare_strategies(rows: Sequence[ResultRow]) -> list[StrategyComparison]:
    """
    Pair shrink and substitute rows by (P, failures). Rows must share one
    problem, and each point needs exactly one row per strategy; baseline
    rows are ignored. Ratios are shrink / substitute.
    """
    protected = [r for r in rows if r.strategy != "none"]
    problems = {r.problem for r in protected}
    if len(problems) > 1:
        raise ConfigError(f"rows come from different problems: {sorted(problems)}")
    points: dict[tuple[int, int], dict[str, ResultRow]] = defaultdict(dict)
    for r in protected:
        slot = points[(r.P, r.failures)]
        if r.strategy in slot:
            raise ConfigError(f"two {r.strategy} rows for P={r.P}, failures={r.failures}")
        slot[r.strategy] = r

    out = []
    for (p, k), slot in sorted(points.items()):
        if set(slot) != {"shrink", "substitute"}:
            raise ConfigError(f"P={p}, failures={k} lacks a shrink/substitute pair: {sorted(slot)}")
        s, u = slot["shrink"], slot["substitute"]
        out.append(
            StrategyComparison(
                P=p,
                failures=k,
                problem=s.problem,
                slowdown_shrink=s.slowdown,
                slowdown_substitute=u.slowdown,
                slowdown_ratio=_ratio(s.slowdown, u.slowdown),
                pct_check=(s.pct_check, u.pct_check),
                pct_recovery=(s.pct_recovery, u.pct_recovery),
                pct_reconfig=(s.pct_reconfig, u.pct_reconfig),
                check_ratio=_ratio(s.t_check_s, u.t_check_s),
                reconfig_ratio=_ratio(s.t_pfr_s, u.t_pfr_s),
                recovery_ratio=_ratio(s.recovery_s, u.recovery_s),
                recompute_ratio=_ratio(s.t_recompute_s, u.t_recompute_s),
                shrink_check_higher=s.t_check_s > u.t_check_s,
                shrink_reconfig_higher=s.t_pfr_s > u.t_pfr_s,
                shrink_recompute_higher=s.t_recompute_s > u.t_recompute_s,
            )
        )
    return out
