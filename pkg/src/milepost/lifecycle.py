"""Six-phase annual lifecycle, frozen monthly snapshots, the capability
assessment report, and status exports.

Tracking is continuous snapshotting during execution rather than a phase of
its own. Snapshots and reports are pure functions of the command log, so a
replay reproduces them byte for byte.
"""

from __future__ import annotations

from .errors import DuplicateError, IllegalTransitionError, NotFoundError, PhaseError, ValidationError
from .evm import detect_struggling, rollup, snapshots_to_csv
from .kpp import portfolio_kpp_score, product_kpp_status
from .model import (
    CarDocument,
    IntegrationState,
    Model,
    MonthlySnapshot,
    Period,
    Phase,
    canonical_json,
    parse_enum,
)
from .money import format_index, format_money
from .planning import in_progress_set
from .registry import Ctx, command

PHASE_ORDER = [
    Phase.PLANNING,
    Phase.EXECUTION,
    Phase.REPORTING,
    Phase.ASSESSING,
    Phase.ADAPTING,
    Phase.CLOSED,
]


def _phase_rank(phase: Phase) -> int:
    return PHASE_ORDER.index(phase)


@command("advance_phase")
def advance_phase(model: Model, params: dict, ctx: Ctx) -> dict:
    fy = int(params["fiscal_year"])
    horizon = model.horizon
    next_phase = parse_enum(Phase, params["next_phase"], "lifecycle phase")
    lifecycle = model.lifecycle_for(fy)

    # adapting loops into the next year's planning cycle
    if next_phase is Phase.PLANNING:
        if lifecycle.phase is not Phase.ADAPTING:
            raise IllegalTransitionError(
                f"illegal transition: FY{fy} is {lifecycle.phase.value}; only adapting rolls into "
                "the next planning cycle"
            )
        next_fy = fy + 1
        if next_fy > horizon.end_fy:
            raise ValidationError(f"FY{next_fy} is beyond the horizon; nothing to roll into")
        rolled = model.lifecycle_for(next_fy)
        if rolled.phase is not Phase.PLANNING:
            raise IllegalTransitionError(f"FY{next_fy} already advanced to {rolled.phase.value}")
        rolled.history.append({"phase": Phase.PLANNING.value, "entered_at": ctx.timestamp})
        rolled.revision += 1
        return {"fiscal_year": next_fy, "phase": rolled.phase.value, "rolled_from": fy}

    if _phase_rank(next_phase) != _phase_rank(lifecycle.phase) + 1:
        raise IllegalTransitionError(
            f"illegal transition: FY{fy} cannot move {lifecycle.phase.value} -> {next_phase.value}"
        )
    if next_phase is Phase.EXECUTION and fy not in model.baselines:
        raise PhaseError(f"FY{fy} cannot enter execution before it is baselined")
    lifecycle.phase = next_phase
    lifecycle.history.append({"phase": next_phase.value, "entered_at": ctx.timestamp})
    lifecycle.revision += 1
    return {"fiscal_year": fy, "phase": lifecycle.phase.value}


@command("take_monthly_snapshot")
def take_monthly_snapshot(model: Model, params: dict, ctx: Ctx) -> dict:
    portfolio = model.require_portfolio()
    idx = model.horizon.index_of(Period.parse(params["period"]))
    if idx in model.monthly_snapshots:
        raise DuplicateError(f"period {params['period']} is already frozen")
    rows = [rollup(model, portfolio.id, idx)]
    for gid in sorted(model.groups):
        rows.append(rollup(model, gid, idx))
    for pid in sorted(model.products):
        rows.append(rollup(model, pid, idx))
    snapshot = MonthlySnapshot(
        period_index=idx,
        rows=rows,
        struggling=detect_struggling(model, idx),
        wavefront_count=len(in_progress_set(model, idx)),
        created_at=ctx.timestamp,
    )
    model.monthly_snapshots[idx] = snapshot
    return {
        "period": params["period"],
        "rows": len(rows),
        "struggling": len(snapshot.struggling),
        "wavefront_count": snapshot.wavefront_count,
    }


# ---------------------------------------------------------------------------
# Capability assessment report


def _last_model_change_timestamp(model: Model) -> str:
    """Timestamp of the newest command other than report generation, so a
    regenerated report over an unchanged model is identical."""
    for entry in reversed(model.command_log):
        if entry.operation != "generate_car":
            return entry.timestamp
    return ""


@command("generate_car")
def generate_car(model: Model, params: dict, ctx: Ctx) -> dict:
    portfolio = model.require_portfolio()
    fy = int(params["fiscal_year"])
    horizon = portfolio.horizon
    if not horizon.start_fy <= fy <= horizon.end_fy:
        raise ValidationError(f"fiscal year {fy} outside horizon")
    phase = model.phase_of(fy)
    if _phase_rank(phase) < _phase_rank(Phase.REPORTING):
        raise PhaseError(f"FY{fy} is in phase {phase.value}; the report opens at reporting")

    fy_first = horizon.index_of(Period(fy, 1))
    fy_last = horizon.index_of(Period(fy, 12))
    year_index = fy - horizon.start_fy + 1
    past_midpoint = year_index > horizon.years / 2
    struggling_ids = {flag["product_id"] for flag in detect_struggling(model, fy_last)}

    sections = []
    for pid in sorted(model.products, key=lambda p: (model.products[p].name, p)):
        product = model.products[pid]
        package = model.packages.get(product.package_ids.get(fy, ""))
        milestones = []
        for aid in sorted(model.activities):
            activity = model.activities[aid]
            if (
                activity.product_id == pid
                and activity.fiscal_year == fy
                and activity.completion_index is not None
            ):
                milestones.append(
                    {
                        "activity_id": aid,
                        "title": activity.title,
                        "completed": str(horizon.period_at(activity.completion_index)),
                    }
                )
        trend = []
        for idx in range(fy_first, fy_last + 1):
            snap = rollup(model, pid, idx)
            trend.append(
                {
                    "period": str(horizon.period_at(idx)),
                    "cpi": format_index(snap.cpi) or None,
                    "spi": format_index(snap.spi) or None,
                }
            )
        status = product_kpp_status(model, pid)
        by_state: dict[str, int] = {}
        for iid in product.integration_ids:
            state = model.integrations[iid].state.value
            by_state[state] = by_state.get(state, 0) + 1
        gaps = []
        if pid in struggling_ids:
            gaps.append("flagged struggling at fiscal year end")
        if status["approved_count"] == 0 and past_midpoint:
            gaps.append("no approved integrations past the project midpoint")
        sections.append(
            {
                "product_id": pid,
                "product_name": product.name,
                "team_name": product.team_name,
                "narrative": package.narrative if package else "",
                "milestones_completed": milestones,
                "cpi_spi_trend": trend,
                "integrations": {
                    "approved_count": status["approved_count"],
                    "goal": status["goal"],
                    "met": status["met"],
                    "by_state": {k: by_state[k] for k in sorted(by_state)},
                },
                "gaps": gaps,
            }
        )

    portfolio_snap = rollup(model, portfolio.id, fy_last)
    score = portfolio_kpp_score(model)
    total_completed_fy = sum(len(s["milestones_completed"]) for s in sections)
    completed_to_date = sum(
        1
        for a in model.activities.values()
        if a.completion_index is not None and a.completion_index <= fy_last
    )
    approved_total = sum(
        1 for i in model.integrations.values() if i.state is IntegrationState.FINALLY_APPROVED
    )
    document = CarDocument(
        fiscal_year=fy,
        generated_at=_last_model_change_timestamp(model),
        portfolio_summary={
            "portfolio": portfolio.name,
            "products": len(model.products),
            "milestones_completed_fy": total_completed_fy,
            "milestones_completed_to_date": completed_to_date,
            "integrations_approved_to_date": approved_total,
            "cpi": format_index(portfolio_snap.cpi) or None,
            "spi": format_index(portfolio_snap.spi) or None,
            "kpp_fraction_met": score["fraction_met"],
            "kpp_pass": score["pass"],
            "gap_products": sorted(
                s["product_id"] for s in sections if s["gaps"]
            ),
        },
        sections=sections,
    )
    model.car_documents[fy] = document
    return document.to_dict()


def car_text(document: CarDocument) -> str:
    """Deterministic human-readable rendering; one file per fiscal year."""
    lines = [
        "CAPABILITY ASSESSMENT REPORT",
        f"Fiscal year: FY{document.fiscal_year}",
        f"Generated at: {document.generated_at}",
        "",
        "== Portfolio summary ==",
    ]
    summary = document.portfolio_summary
    lines.append(f"Portfolio: {summary['portfolio']}")
    lines.append(f"Products: {summary['products']}")
    lines.append(f"Milestones completed this year: {summary['milestones_completed_fy']}")
    lines.append(f"Milestones completed to date: {summary['milestones_completed_to_date']}")
    lines.append(f"Integrations approved to date: {summary['integrations_approved_to_date']}")
    lines.append(f"CPI: {summary['cpi'] or 'n/a'}  SPI: {summary['spi'] or 'n/a'}")
    lines.append(
        f"KPP: fraction met {summary['kpp_fraction_met'] or 'n/a'} "
        f"({'pass' if summary['kpp_pass'] else 'fail'})"
    )
    if summary["gap_products"]:
        lines.append("Gap products: " + ", ".join(summary["gap_products"]))
    for section in document.sections:
        lines.append("")
        lines.append(f"== {section['product_name']} ({section['product_id']}) ==")
        lines.append(f"Team: {section['team_name']}")
        lines.append(f"Narrative: {section['narrative'] or '(none)'}")
        lines.append(f"Milestones completed ({len(section['milestones_completed'])}):")
        for m in section["milestones_completed"]:
            lines.append(f"  - {m['completed']}  {m['activity_id']}  {m['title']}")
        lines.append("CPI/SPI trend:")
        for t in section["cpi_spi_trend"]:
            lines.append(
                f"  {t['period']}  cpi={t['cpi'] or '-'}  spi={t['spi'] or '-'}"
            )
        integ = section["integrations"]
        lines.append(
            f"Integrations: approved {integ['approved_count']} of goal {integ['goal']} "
            f"({'met' if integ['met'] else 'not met'})"
        )
        for state in sorted(integ["by_state"]):
            lines.append(f"  {state}: {integ['by_state'][state]}")
        if section["gaps"]:
            lines.append("Gaps:")
            for gap in section["gaps"]:
                lines.append(f"  - {gap}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Status exports

EXPORT_FORMATS = ("csv", "json")


def export_status(model: Model, period_index: int, fmt: str) -> str:
    if fmt not in EXPORT_FORMATS:
        raise ValidationError(
            f"unknown format {fmt!r}; supported formats: {', '.join(EXPORT_FORMATS)}"
        )
    snapshot = model.monthly_snapshots.get(period_index)
    if snapshot is None:
        period = model.horizon.period_at(period_index)
        raise NotFoundError(f"no frozen snapshot for period {period}")
    if fmt == "csv":
        return snapshots_to_csv(model, snapshot.rows)
    return canonical_json(snapshot.to_dict()) + "\n"
