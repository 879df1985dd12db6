"""Time-phased planned/earned/actual value with exact hierarchical rollups.

All operations are pure functions of the model plus parameters. PV follows a
linear spread across the activity's baseline window; EV defaults to 0/100 at
milestone completion; AC is the running sum of recorded costs. Cancelled
activities keep accrued EV/AC but freeze PV at the cancellation period.
"""

from __future__ import annotations

import csv
import io
import logging
from fractions import Fraction

from .errors import ValidationError
from .model import Activity, EvmSnapshot, EvTechnique, Model, PortfolioConfig
from .money import ZERO, format_index, format_money

logger = logging.getLogger(__name__)


class _ExactSum:
    """Exact rational accumulator: integer sums bucketed per denominator so
    large rollups avoid per-step gcd normalization."""

    __slots__ = ("_buckets",)

    def __init__(self) -> None:
        self._buckets: dict[int, int] = {}

    def add(self, value: Fraction) -> None:
        self._buckets[value.denominator] = self._buckets.get(value.denominator, 0) + value.numerator

    def total(self) -> Fraction:
        out = Fraction(0)
        for den, num in self._buckets.items():
            out += Fraction(num, den)
        return out


def planned_value(activity: Activity, period_index: int) -> Fraction:
    """Cumulative PV at the end of `period_index` under linear spread."""
    t = period_index
    if activity.cancelled_index is not None:
        t = min(t, activity.cancelled_index)
    seg = activity.segment_at(t)
    if t < seg.start_index:
        return ZERO
    duration = seg.end_index - seg.start_index + 1
    elapsed = min(t - seg.start_index + 1, duration)
    return seg.budget * Fraction(elapsed, duration)


def earned_value(activity: Activity, period_index: int, technique: EvTechnique) -> Fraction:
    budget = activity.segment_at(period_index).budget
    if technique == EvTechnique.MILESTONE_0_100:
        if activity.completion_index is not None and activity.completion_index <= period_index:
            return budget
        return ZERO
    # percent-complete: latest recorded fraction at or before the period
    if not activity.percent_complete:
        if activity.completion_index is not None and activity.completion_index <= period_index:
            return budget
        logger.warning(
            "activity %s uses percent_complete but has no recorded series; EV treated as 0",
            activity.id,
        )
        return ZERO
    best: Fraction | None = None
    for idx, fraction in activity.percent_complete.items():
        if idx <= period_index and (best is None or fraction > best):
            best = fraction
    if best is None:
        return ZERO
    return budget * best


def actual_cost(model: Model, activity_id: str, period_index: int) -> Fraction:
    acc = _ExactSum()
    for idx, amount in model.cost_records.get(activity_id, {}).items():
        if idx <= period_index:
            acc.add(amount)
    return acc.total()


def rollup(model: Model, node_id: str, period_index: int) -> EvmSnapshot:
    """Exact sums over all descendant activities of `node_id`."""
    horizon = model.horizon
    if not 1 <= period_index <= horizon.length:
        raise ValidationError(f"period index {period_index} outside horizon 1..{horizon.length}")
    technique = model.require_portfolio().config.ev_technique
    pv_sum, ev_sum, ac_sum = _ExactSum(), _ExactSum(), _ExactSum()
    for aid in model.descendant_activity_ids(node_id):
        activity = model.activities[aid]
        pv_sum.add(planned_value(activity, period_index))
        ev_sum.add(earned_value(activity, period_index, technique))
        for idx, amount in model.cost_records.get(aid, {}).items():
            if idx <= period_index:
                ac_sum.add(amount)
    return EvmSnapshot.build(node_id, period_index, pv_sum.total(), ev_sum.total(), ac_sum.total())


def index_series(model: Model, node_id: str, start_index: int, end_index: int) -> list[EvmSnapshot]:
    if end_index < start_index:
        raise ValidationError(f"empty period range {start_index}..{end_index}")
    return [rollup(model, node_id, idx) for idx in range(start_index, end_index + 1)]


def detect_struggling(
    model: Model, period_index: int, config: PortfolioConfig | None = None
) -> list[dict]:
    """Products whose cumulative CPI or SPI sat below threshold for at least
    `consecutive_periods_for_alert` consecutive periods ending at the given
    period. Absent indices never count as sub-threshold."""
    portfolio = model.require_portfolio()
    cfg = config or portfolio.config
    k = cfg.consecutive_periods_for_alert
    horizon = portfolio.horizon
    flags: list[dict] = []
    for pid in sorted(model.products):
        reasons: dict[str, int] = {}  # metric -> first flagged period index
        for metric, threshold in (("cpi", cfg.cpi_alert_threshold), ("spi", cfg.spi_alert_threshold)):
            streak = 0
            t = period_index
            while t >= 1:
                snap = rollup(model, pid, t)
                value = snap.cpi if metric == "cpi" else snap.spi
                if value is None or value >= threshold:
                    break
                streak += 1
                t -= 1
            if streak >= k:
                streak_start = period_index - streak + 1
                reasons[metric] = streak_start + k - 1
        if reasons:
            flags.append(
                {
                    "product_id": pid,
                    "reason": "+".join(sorted(reasons)),
                    "first_flagged_period": str(horizon.period_at(min(reasons.values()))),
                }
            )
    return flags


# ---------------------------------------------------------------------------
# CSV export

CSV_COLUMNS = ["node_id", "fy", "month", "pv", "ev", "ac", "cpi", "spi", "cv", "sv"]


def snapshot_csv_rows(model: Model, snapshots: list[EvmSnapshot]) -> list[list[str]]:
    horizon = model.horizon
    rows = []
    for snap in snapshots:
        period = horizon.period_at(snap.period_index)
        rows.append(
            [
                snap.node_id,
                str(period.fiscal_year),
                str(period.month),
                format_money(snap.pv),
                format_money(snap.ev),
                format_money(snap.ac),
                format_index(snap.cpi),
                format_index(snap.spi),
                format_money(snap.cv),
                format_money(snap.sv),
            ]
        )
    return rows


def snapshots_to_csv(model: Model, snapshots: list[EvmSnapshot]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(snapshot_csv_rows(model, snapshots))
    return buf.getvalue()


def parse_status_csv(text: str) -> list[dict]:
    """Read a status CSV back into row dicts (values stay as the printed
    strings so re-serialization is byte-stable)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_COLUMNS:
        raise ValidationError(f"unexpected CSV header {header!r}")
    return [dict(zip(CSV_COLUMNS, row)) for row in reader]
