"""Planning packages, annual refinement, baselining, activity execution,
and the two-level change-management workflow.

Change requests are the only way to alter baselined scope, schedule, or
cost. Level 1 (area lead) covers within-product scope/schedule edits;
level 2 (project director) is required for any budget change or anything
crossing a product boundary. Every transition lands in the append-only
audit log.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import (
    DuplicateError,
    IllegalTransitionError,
    NotFoundError,
    PhaseError,
    RoleError,
    StaleValueError,
    ValidationError,
)
from .model import (
    Activity,
    ActivityStatus,
    BaselineSegment,
    BaselineSnapshot,
    ChangeRequest,
    ChangeTarget,
    CrLevel,
    CrState,
    DetailLevel,
    Model,
    PackageState,
    Period,
    Phase,
    PlanningPackage,
    parse_enum,
)
from .money import frac_str, parse_nonnegative_money, parse_ratio
from .registry import Ctx, command

# ---------------------------------------------------------------------------
# Planning packages


@command("create_planning_package")
def create_planning_package(model: Model, params: dict, ctx: Ctx) -> dict:
    product = model.get_product(params["product_id"])
    fy = int(params["fiscal_year"])
    horizon = model.horizon
    if not horizon.start_fy <= fy <= horizon.end_fy:
        raise ValidationError(f"fiscal year {fy} outside horizon {horizon.start_fy}..{horizon.end_fy}")
    if fy in product.package_ids:
        raise DuplicateError(f"product {product.id} already has a planning package for FY{fy}")
    budget = parse_nonnegative_money(params["annual_budget"])
    package = PlanningPackage(
        id=model.next_id("package", "pkg"),
        product_id=product.id,
        fiscal_year=fy,
        narrative=params["narrative"],
        annual_budget=budget,
    )
    model.packages[package.id] = package
    product.package_ids[fy] = package.id
    product.revision += 1
    return {"id": package.id, "state": package.state.value}


@command("update_package")
def update_package(model: Model, params: dict, ctx: Ctx) -> dict:
    """Coarse-state edits only; later states require a change request."""
    package = model.get_package(params["package_id"])
    if package.state is not PackageState.COARSE:
        raise IllegalTransitionError(
            f"package {package.id} is {package.state.value}; change request required"
        )
    if params.get("narrative") is not None:
        package.narrative = params["narrative"]
    if params.get("annual_budget") is not None:
        package.annual_budget = parse_nonnegative_money(params["annual_budget"])
    package.revision += 1
    return {"id": package.id, "state": package.state.value}


@command("refine_package")
def refine_package(model: Model, params: dict, ctx: Ctx) -> dict:
    package = model.get_package(params["package_id"])
    config = model.require_portfolio().config
    horizon = model.horizon
    if package.state is not PackageState.COARSE:
        raise IllegalTransitionError(
            f"package {package.id} is {package.state.value}; only coarse packages can be refined"
        )
    phase = model.phase_of(package.fiscal_year)
    if phase is not Phase.PLANNING:
        raise PhaseError(
            f"FY{package.fiscal_year} is in phase {phase.value}; refinement is a planning-phase operation"
        )
    specs = params["activity_specs"]
    if not specs:
        raise ValidationError("at least one activity spec is required")

    fy_range = horizon.fy_indices(package.fiscal_year)
    parsed: list[tuple[str, str, Fraction, int, int]] = []
    total = Fraction(0)
    for spec in specs:
        fraction = parse_ratio(spec["budget_fraction"])
        if not 0 <= fraction <= 1:
            raise ValidationError(f"budget_fraction must be in [0, 1], got {frac_str(fraction)}")
        start = horizon.index_of(Period.parse(spec["baseline_start"]))
        end = horizon.index_of(Period.parse(spec["baseline_end"]))
        if end < start:
            raise ValidationError(f"baseline_end {spec['baseline_end']} precedes baseline_start")
        if start not in fy_range or end not in fy_range:
            raise ValidationError(
                f"baseline window {spec['baseline_start']}..{spec['baseline_end']} "
                f"outside FY{package.fiscal_year}"
            )
        total += fraction
        parsed.append((spec["title"], spec.get("scope_text", ""), fraction, start, end))
    if total > 1:
        raise ValidationError(f"budget fractions sum to {frac_str(total)} > 1")
    if config.strict_budget_fractions and total != 1:
        raise ValidationError(f"strict mode: budget fractions must sum to exactly 1, got {frac_str(total)}")

    warnings: list[str] = []
    if not config.activities_per_package_min <= len(specs) <= config.activities_per_package_max:
        warnings.append(
            f"activity count {len(specs)} outside the advised "
            f"{config.activities_per_package_min}..{config.activities_per_package_max} range"
        )

    created: list[str] = []
    for title, scope_text, fraction, start, end in parsed:
        activity = Activity(
            id=model.next_id("activity", "act"),
            product_id=package.product_id,
            fiscal_year=package.fiscal_year,
            title=title,
            scope_text=scope_text,
            budget_fraction=fraction,
            baseline_history=[
                BaselineSegment(
                    effective_index=0,
                    start_index=start,
                    end_index=end,
                    budget=package.annual_budget * fraction,
                )
            ],
        )
        model.activities[activity.id] = activity
        package.activity_ids.append(activity.id)
        created.append(activity.id)
    package.state = PackageState.REFINED
    package.revision += 1
    reserve = 1 - total
    return {
        "package_id": package.id,
        "activity_ids": created,
        "management_reserve_fraction": frac_str(reserve),
        "warnings": warnings,
    }


@command("finalize_activity")
def finalize_activity(model: Model, params: dict, ctx: Ctx) -> dict:
    activity = model.get_activity(params["activity_id"])
    if activity.detail_level is not DetailLevel.REFINED:
        raise IllegalTransitionError(
            f"activity {activity.id} is {activity.detail_level.value}; only refined activities can be finalized"
        )
    if not params.get("completion_criteria"):
        raise ValidationError("completion_criteria must be non-empty")
    activity.completion_criteria = params["completion_criteria"]
    activity.staffing_note = params.get("staffing_note", "")
    activity.detail_level = DetailLevel.FINALIZED
    activity.revision += 1
    return {"id": activity.id, "detail_level": activity.detail_level.value}


@command("update_activity")
def update_activity(model: Model, params: dict, ctx: Ctx) -> dict:
    """Direct pre-baseline edits; baselined activities require a CR."""
    activity = model.get_activity(params["activity_id"])
    package = model.packages[model.get_product(activity.product_id).package_ids[activity.fiscal_year]]
    if package.state not in (PackageState.COARSE, PackageState.REFINED):
        raise IllegalTransitionError(
            f"activity {activity.id} is baselined; change request required"
        )
    horizon = model.horizon
    seg = activity.current_segment
    start, end = seg.start_index, seg.end_index
    if params.get("baseline_start") is not None:
        start = horizon.index_of(Period.parse(params["baseline_start"]))
    if params.get("baseline_end") is not None:
        end = horizon.index_of(Period.parse(params["baseline_end"]))
    if end < start:
        raise ValidationError("baseline_end precedes baseline_start")
    fy_range = horizon.fy_indices(activity.fiscal_year)
    if start not in fy_range or end not in fy_range:
        raise ValidationError(f"baseline window outside FY{activity.fiscal_year}")
    if params.get("title") is not None:
        activity.title = params["title"]
    if params.get("scope_text") is not None:
        activity.scope_text = params["scope_text"]
    activity.baseline_history[-1] = BaselineSegment(0, start, end, seg.budget)
    activity.revision += 1
    return {"id": activity.id}


@command("baseline")
def baseline(model: Model, params: dict, ctx: Ctx) -> dict:
    fy = int(params["fiscal_year"])
    if fy in model.baselines:
        raise DuplicateError(f"FY{fy} is already baselined; supersede via an L2 change request")
    phase = model.phase_of(fy)
    if phase is not Phase.PLANNING:
        raise PhaseError(f"FY{fy} is in phase {phase.value}; baselining is a planning-phase operation")
    packages = [p for p in model.packages.values() if p.fiscal_year == fy]
    if not packages:
        raise ValidationError(f"no planning packages exist for FY{fy}")
    for package in sorted(packages, key=lambda p: p.id):
        if package.state is not PackageState.REFINED:
            raise IllegalTransitionError(
                f"package {package.id} ({model.products[package.product_id].name}) "
                f"is {package.state.value}, not refined"
            )
    curves: dict[str, BaselineSegment] = {}
    for package in packages:
        for aid in package.activity_ids:
            seg = model.activities[aid].current_segment
            curves[aid] = BaselineSegment(seg.effective_index, seg.start_index, seg.end_index, seg.budget)
        package.state = PackageState.BASELINED
        package.revision += 1
    snapshot = BaselineSnapshot(
        id=model.next_id("baseline", "bl"),
        fiscal_year=fy,
        curves=curves,
        created_at=ctx.timestamp,
    )
    model.baselines[fy] = snapshot
    return {"id": snapshot.id, "fiscal_year": fy, "activities": len(curves)}


# ---------------------------------------------------------------------------
# Change requests

CR_EDGES = {
    (CrState.DRAFTED, CrState.UNDER_REVIEW),
    (CrState.UNDER_REVIEW, CrState.APPROVED),
    (CrState.UNDER_REVIEW, CrState.REJECTED),
    (CrState.APPROVED, CrState.APPLIED),
}

# entity kind -> fields a CR may touch
CR_FIELDS = {
    "activity": ("title", "scope_text", "baseline_start", "baseline_end", "budget", "status"),
    "package": ("narrative", "annual_budget"),
    "product": ("sdk_group",),
}


def _resolve_target_entity(model: Model, entity_id: str) -> tuple[str, object]:
    if entity_id in model.activities:
        return "activity", model.activities[entity_id]
    if entity_id in model.packages:
        return "package", model.packages[entity_id]
    if entity_id in model.products:
        return "product", model.products[entity_id]
    raise NotFoundError(f"unknown change target {entity_id!r}")


def _target_product(model: Model, kind: str, entity) -> str:
    if kind == "activity":
        return entity.product_id
    if kind == "package":
        return entity.product_id
    return entity.id


def _current_value(model: Model, kind: str, entity, field: str) -> str:
    horizon = model.horizon
    if kind == "activity":
        seg = entity.current_segment
        if field == "title":
            return entity.title
        if field == "scope_text":
            return entity.scope_text
        if field == "baseline_start":
            return str(horizon.period_at(seg.start_index))
        if field == "baseline_end":
            return str(horizon.period_at(seg.end_index))
        if field == "budget":
            return frac_str(seg.budget)
        if field == "status":
            return entity.status.value
    elif kind == "package":
        if field == "narrative":
            return entity.narrative
        if field == "annual_budget":
            return frac_str(entity.annual_budget)
    elif kind == "product":
        if field == "sdk_group":
            return entity.group_id
    raise ValidationError(f"field {field!r} is not a change-controlled field of a {kind}")


def required_level(model: Model, targets: list[ChangeTarget]) -> CrLevel:
    """Recompute the level a set of targets demands from the policy table."""
    config = model.require_portfolio().config
    products: set[str] = set()
    for target in targets:
        kind, entity = _resolve_target_entity(model, target.entity_id)
        if target.field in config.l2_fields:
            return CrLevel.L2
        products.add(_target_product(model, kind, entity))
    if config.cross_product_is_l2 and len(products) > 1:
        return CrLevel.L2
    return CrLevel.L1


def _audit(model: Model, ctx: Ctx, cr: ChangeRequest, edge: str, note: str) -> None:
    record = {
        "cr_id": cr.id,
        "edge": edge,
        "actor_role": ctx.actor_role.value,
        "timestamp": ctx.timestamp,
        "decision_note": note,
    }
    model.audit_log.append(record)
    cr.transitions.append(dict(record))


@command("propose_change")
def propose_change(model: Model, params: dict, ctx: Ctx) -> dict:
    horizon = model.horizon
    effective_index = horizon.index_of(Period.parse(params["effective_period"]))
    raw_targets = params["targets"]
    if not raw_targets:
        raise ValidationError("a change request needs at least one target")
    targets: list[ChangeTarget] = []
    seen: set[tuple[str, str]] = set()
    for raw in raw_targets:
        kind, entity = _resolve_target_entity(model, raw["entity_id"])
        field = raw["field"]
        if field not in CR_FIELDS[kind]:
            raise ValidationError(f"field {field!r} is not change-controlled on a {kind}")
        if (raw["entity_id"], field) in seen:
            raise DuplicateError(f"duplicate target ({raw['entity_id']}, {field})")
        seen.add((raw["entity_id"], field))
        old_value = _current_value(model, kind, entity, field)
        targets.append(ChangeTarget(raw["entity_id"], field, old_value, str(raw["new_value"])))
    level = parse_enum(CrLevel, params["level"], "change level")
    needed = required_level(model, targets)
    if level is CrLevel.L1 and needed is CrLevel.L2:
        raise ValidationError(
            "requires L2: targets change budget or cross a product boundary"
        )
    if not params.get("rationale"):
        raise ValidationError("rationale must be non-empty")
    cr = ChangeRequest(
        id=model.next_id("change_request", "cr"),
        level=level,
        targets=targets,
        rationale=params["rationale"],
        proposer_role=ctx.actor_role,
        effective_index=effective_index,
    )
    model.change_requests[cr.id] = cr
    _audit(model, ctx, cr, "proposed", "")
    return {"id": cr.id, "level": cr.level.value, "state": cr.state.value}


def _check_edge(cr: ChangeRequest, new_state: CrState) -> None:
    if (cr.state, new_state) not in CR_EDGES:
        raise IllegalTransitionError(
            f"illegal transition: change request {cr.id} cannot move "
            f"{cr.state.value} -> {new_state.value}"
        )


def _check_revision(entity, params: dict) -> None:
    expected = params.get("expected_revision")
    if expected is not None and int(expected) != entity.revision:
        raise StaleValueError(
            f"stale revision {expected} for {entity.id}; current is {entity.revision}"
        )


@command("submit_change")
def submit_change(model: Model, params: dict, ctx: Ctx) -> dict:
    cr = model.get_change_request(params["cr_id"])
    _check_revision(cr, params)
    _check_edge(cr, CrState.UNDER_REVIEW)
    cr.state = CrState.UNDER_REVIEW
    cr.revision += 1
    _audit(model, ctx, cr, "submitted", "")
    return {"id": cr.id, "state": cr.state.value}


@command("review_change")
def review_change(model: Model, params: dict, ctx: Ctx) -> dict:
    cr = model.get_change_request(params["cr_id"])
    _check_revision(cr, params)
    verdict = params["verdict"]
    if verdict not in ("approve", "reject"):
        raise ValidationError(f"verdict must be 'approve' or 'reject', got {verdict!r}")
    new_state = CrState.APPROVED if verdict == "approve" else CrState.REJECTED
    _check_edge(cr, new_state)
    if ctx.actor_role is not cr.approver_role:
        raise RoleError(
            f"{cr.level.value} change requests are decided by {cr.approver_role.value}, "
            f"not {ctx.actor_role.value}"
        )
    cr.state = new_state
    cr.decision_note = params.get("note", "")
    cr.revision += 1
    _audit(model, ctx, cr, verdict + "d", cr.decision_note)
    return {"id": cr.id, "state": cr.state.value}


def _apply_activity_changes(model: Model, activity: Activity, changes: dict[str, str], effective_index: int) -> None:
    horizon = model.horizon
    seg = activity.current_segment
    start, end, budget = seg.start_index, seg.end_index, seg.budget
    rebaseline = False
    if "baseline_start" in changes:
        start = horizon.index_of(Period.parse(changes["baseline_start"]))
        rebaseline = True
    if "baseline_end" in changes:
        end = horizon.index_of(Period.parse(changes["baseline_end"]))
        rebaseline = True
    if "budget" in changes:
        budget = parse_nonnegative_money(changes["budget"])
        rebaseline = True
    if end < start:
        raise ValidationError(f"change leaves activity {activity.id} with end before start")
    if "title" in changes:
        activity.title = changes["title"]
    if "scope_text" in changes:
        activity.scope_text = changes["scope_text"]
    if "status" in changes:
        if changes["status"] != ActivityStatus.CANCELLED.value:
            raise ValidationError("status changes via CR may only cancel an activity")
        if activity.status not in (ActivityStatus.PLANNED, ActivityStatus.IN_PROGRESS):
            raise IllegalTransitionError(
                f"activity {activity.id} is {activity.status.value} and cannot be cancelled"
            )
        activity.status = ActivityStatus.CANCELLED
        activity.cancelled_index = effective_index
    if rebaseline:
        # PV before the effective period keeps the old curve; from the
        # effective period forward the new curve applies
        activity.baseline_history.append(BaselineSegment(effective_index, start, end, budget))
    activity.revision += 1


@command("apply_change")
def apply_change(model: Model, params: dict, ctx: Ctx) -> dict:
    cr = model.get_change_request(params["cr_id"])
    _check_revision(cr, params)
    _check_edge(cr, CrState.APPLIED)
    # optimistic concurrency: recorded old values must still match the model
    for target in cr.targets:
        kind, entity = _resolve_target_entity(model, target.entity_id)
        live = _current_value(model, kind, entity, target.field)
        if live != target.old_value:
            cr.state = CrState.DRAFTED
            cr.revision += 1
            _audit(model, ctx, cr, "stale_reset", f"{target.entity_id}.{target.field} drifted")
            raise StaleValueError(
                f"{target.entity_id}.{target.field} is now {live!r}, "
                f"expected {target.old_value!r}; change request returned to drafted"
            )

    by_activity: dict[str, dict[str, str]] = {}
    for target in cr.targets:
        kind, entity = _resolve_target_entity(model, target.entity_id)
        if kind == "activity":
            by_activity.setdefault(target.entity_id, {})[target.field] = target.new_value
        elif kind == "package":
            if target.field == "narrative":
                entity.narrative = target.new_value
            else:
                entity.annual_budget = parse_nonnegative_money(target.new_value)
            entity.revision += 1
        elif kind == "product":
            new_group = model.get_group(target.new_value)
            old_group = model.get_group(entity.group_id)
            old_group.product_ids.remove(entity.id)
            old_group.revision += 1
            new_group.product_ids.append(entity.id)
            new_group.revision += 1
            entity.group_id = new_group.id
            entity.revision += 1
    for aid, changes in by_activity.items():
        _apply_activity_changes(model, model.activities[aid], changes, cr.effective_index)

    cr.state = CrState.APPLIED
    cr.revision += 1
    _audit(model, ctx, cr, "applied", "")
    return {"id": cr.id, "state": cr.state.value, "targets": len(cr.targets)}


# ---------------------------------------------------------------------------
# Activity execution


def _package_of(model: Model, activity: Activity):
    product = model.get_product(activity.product_id)
    return model.packages[product.package_ids[activity.fiscal_year]]


@command("start_activity")
def start_activity(model: Model, params: dict, ctx: Ctx) -> dict:
    activity = model.get_activity(params["activity_id"])
    idx = model.horizon.index_of(Period.parse(params["period"]))
    if activity.status is not ActivityStatus.PLANNED:
        raise IllegalTransitionError(
            f"illegal transition: activity {activity.id} is {activity.status.value}, not planned"
        )
    if activity.detail_level is not DetailLevel.FINALIZED:
        raise IllegalTransitionError(f"activity {activity.id} must be finalized before starting")
    if _package_of(model, activity).state is not PackageState.BASELINED:
        raise IllegalTransitionError(
            f"activity {activity.id} cannot start before FY{activity.fiscal_year} is baselined"
        )
    activity.status = ActivityStatus.IN_PROGRESS
    activity.actual_start_index = idx
    activity.revision += 1
    return {"id": activity.id, "status": activity.status.value}


@command("complete_milestone")
def complete_milestone(model: Model, params: dict, ctx: Ctx) -> dict:
    activity = model.get_activity(params["activity_id"])
    idx = model.horizon.index_of(Period.parse(params["period"]))
    if activity.status is not ActivityStatus.IN_PROGRESS:
        raise IllegalTransitionError(
            f"illegal transition: activity {activity.id} is {activity.status.value}, not in_progress"
        )
    if activity.actual_start_index is None or idx < activity.actual_start_index:
        raise ValidationError(f"completion period {params['period']} precedes the actual start")
    activity.status = ActivityStatus.MILESTONE_COMPLETE
    activity.completion_index = idx
    activity.revision += 1
    return {"id": activity.id, "status": activity.status.value, "completed": params["period"]}


@command("record_actual_cost")
def record_actual_cost(model: Model, params: dict, ctx: Ctx) -> dict:
    activity = model.get_activity(params["activity_id"])
    idx = model.horizon.index_of(Period.parse(params["period"]))
    amount = parse_nonnegative_money(params["amount"])
    if activity.status is ActivityStatus.PLANNED:
        raise IllegalTransitionError(f"activity {activity.id} has not started; no costs can accrue")
    if activity.actual_start_index is not None and idx < activity.actual_start_index:
        raise ValidationError(f"cost period {params['period']} precedes the actual start")
    if idx in model.monthly_snapshots:
        raise ValidationError(
            f"period {params['period']} is frozen by a monthly snapshot; costs there are immutable"
        )
    records = model.cost_records.setdefault(activity.id, {})
    records[idx] = amount
    activity.revision += 1
    return {"activity_id": activity.id, "period": params["period"], "amount": frac_str(amount)}


@command("record_progress")
def record_progress(model: Model, params: dict, ctx: Ctx) -> dict:
    """Percent-complete series for teams configured with that technique."""
    activity = model.get_activity(params["activity_id"])
    idx = model.horizon.index_of(Period.parse(params["period"]))
    fraction = parse_ratio(params["fraction"])
    if not 0 <= fraction <= 1:
        raise ValidationError(f"fraction must be in [0, 1], got {frac_str(fraction)}")
    if activity.status not in (ActivityStatus.IN_PROGRESS, ActivityStatus.MILESTONE_COMPLETE):
        raise IllegalTransitionError(f"activity {activity.id} has not started; no progress can accrue")
    for other_idx, other in activity.percent_complete.items():
        if other_idx <= idx and other > fraction:
            raise ValidationError("percent-complete series must be non-decreasing")
        if other_idx >= idx and other < fraction:
            raise ValidationError("percent-complete series must be non-decreasing")
    activity.percent_complete[idx] = fraction
    activity.revision += 1
    return {"activity_id": activity.id, "period": params["period"], "fraction": frac_str(fraction)}


def in_progress_set(model: Model, period_index: int) -> list[Activity]:
    """The wavefront: started at or before the period, not yet completed or
    cancelled at it."""
    out = []
    for aid in sorted(model.activities):
        activity = model.activities[aid]
        if activity.actual_start_index is None or activity.actual_start_index > period_index:
            continue
        if activity.completion_index is not None and activity.completion_index <= period_index:
            continue
        if activity.cancelled_index is not None and activity.cancelled_index <= period_index:
            continue
        out.append(activity)
    return out


def audit_log_lines(model: Model) -> list[str]:
    """Append-only audit trail, one canonical JSON record per transition."""
    from .model import canonical_json

    return [canonical_json(record) for record in model.audit_log]
