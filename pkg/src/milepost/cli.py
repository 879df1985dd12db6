"""Command-line surface.

Every public engine operation has a subcommand. Mutations append to the
store's command log and refresh the snapshot; failures print a one-line
machine-parseable error (`error: <code>: <message>`) and exit nonzero.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .engine import PortfolioEngine
from .errors import EngineError, ValidationError
from .evm import detect_struggling, index_series, rollup, snapshots_to_csv
from .fixtures import build_scale_fixture, build_struggling_fixture
from .kpp import integration_ledger_csv, portfolio_kpp_score, product_kpp_status
from .lifecycle import car_text, export_status
from .model import canonical_json, validate_hierarchy
from .planning import audit_log_lines, in_progress_set
from .stack import check_compatibility, check_policies, manifest_text


class _CliState:
    def __init__(self, store: str | None, role: str):
        self.store = Path(store) if store else None
        self.role = role
        self._engine: PortfolioEngine | None = None

    def engine(self) -> PortfolioEngine:
        if self._engine is None:
            if self.store is None:
                raise ValidationError("no store configured; pass --store or set MILEPOST_STORE")
            self._engine = PortfolioEngine.open(self.store)
        return self._engine

    def persist(self) -> None:
        if self._engine is not None and self.store is not None:
            self._engine.save()


class _Group(click.Group):
    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except EngineError as exc:
            click.echo(f"error: {exc.code}: {exc.message}", err=True)
            raise SystemExit(1) from exc


def _echo_json(payload) -> None:
    click.echo(canonical_json(payload))


def _load_json_arg(value: str):
    if value.startswith("@"):
        return json.loads(Path(value[1:]).read_text(encoding="utf-8"))
    return json.loads(value)


@click.group(cls=_Group)
@click.version_option(__version__)
@click.option("--store", envvar="MILEPOST_STORE", default=None, help="Store directory.")
@click.option("--role", default="team", show_default=True, help="Actor role for mutations.")
@click.pass_context
def cli(ctx: click.Context, store: str | None, role: str):
    """Milestone-based earned-value portfolio management."""
    ctx.obj = _CliState(store, role)


# ---------------------------------------------------------------------------
# hierarchy


@cli.command()
@click.argument("name")
@click.option("--start-fy", type=int, required=True)
@click.option("--years", type=int, required=True)
@click.pass_obj
def init(state: _CliState, name: str, start_fy: int, years: int):
    """Create the portfolio."""
    _echo_json(state.engine().create_portfolio(name, start_fy, years, actor_role=state.role))
    state.persist()


@cli.command("add-group")
@click.argument("name")
@click.pass_obj
def add_group(state: _CliState, name: str):
    _echo_json(state.engine().add_sdk_group(name, actor_role=state.role))
    state.persist()


@cli.command("add-product")
@click.argument("group_id")
@click.argument("name")
@click.option("--kpp-goal", type=click.Choice(["4", "8"]), default="4", show_default=True)
@click.option("--team", default="", help="Team name; defaults to the product name.")
@click.pass_obj
def add_product(state: _CliState, group_id: str, name: str, kpp_goal: str, team: str):
    _echo_json(
        state.engine().add_product(group_id, name, int(kpp_goal), team_name=team, actor_role=state.role)
    )
    state.persist()


@cli.command()
@click.pass_obj
def validate(state: _CliState):
    """List structural hierarchy violations (empty list means valid)."""
    _echo_json([v.to_dict() for v in validate_hierarchy(state.engine().model)])


# ---------------------------------------------------------------------------
# planning


@cli.command()
@click.argument("product_id")
@click.argument("fiscal_year", type=int)
@click.argument("narrative")
@click.argument("annual_budget")
@click.pass_obj
def plan(state: _CliState, product_id: str, fiscal_year: int, narrative: str, annual_budget: str):
    """Create the per-product planning package for a fiscal year."""
    _echo_json(
        state.engine().create_planning_package(
            product_id, fiscal_year, narrative, annual_budget, actor_role=state.role
        )
    )
    state.persist()


@cli.command()
@click.argument("package_id")
@click.option(
    "--activities-json",
    required=True,
    help="JSON list of activity specs, or @file.json.",
)
@click.pass_obj
def refine(state: _CliState, package_id: str, activities_json: str):
    """Refine a coarse package into budgeted, dated activities."""
    specs = _load_json_arg(activities_json)
    result = state.engine().refine_package(package_id, specs, actor_role=state.role)
    for warning in result.get("warnings", []):
        click.echo(f"warning: {warning}", err=True)
    _echo_json(result)
    state.persist()


@cli.command()
@click.argument("activity_id")
@click.option("--criteria", required=True, help="Completion criteria.")
@click.option("--staffing", default="")
@click.pass_obj
def finalize(state: _CliState, activity_id: str, criteria: str, staffing: str):
    _echo_json(state.engine().finalize_activity(activity_id, criteria, staffing, actor_role=state.role))
    state.persist()


@cli.command("edit-package")
@click.argument("package_id")
@click.option("--narrative", default=None)
@click.option("--budget", default=None, help="New annual budget.")
@click.pass_obj
def edit_package(state: _CliState, package_id: str, narrative: str | None, budget: str | None):
    """Edit a coarse package directly (later states require a CR)."""
    _echo_json(
        state.engine().update_package(
            package_id, narrative=narrative, annual_budget=budget, actor_role=state.role
        )
    )
    state.persist()


@cli.command("edit-activity")
@click.argument("activity_id")
@click.option("--title", default=None)
@click.option("--scope", default=None)
@click.option("--start", "baseline_start", default=None, help="New baseline start period.")
@click.option("--end", "baseline_end", default=None, help="New baseline end period.")
@click.pass_obj
def edit_activity(
    state: _CliState,
    activity_id: str,
    title: str | None,
    scope: str | None,
    baseline_start: str | None,
    baseline_end: str | None,
):
    """Edit a pre-baseline activity directly (baselined ones require a CR)."""
    _echo_json(
        state.engine().update_activity(
            activity_id,
            actor_role=state.role,
            title=title,
            scope_text=scope,
            baseline_start=baseline_start,
            baseline_end=baseline_end,
        )
    )
    state.persist()


@cli.command()
@click.argument("fiscal_year", type=int)
@click.pass_obj
def baseline(state: _CliState, fiscal_year: int):
    """Freeze PV curves for the fiscal year; edits then require a CR."""
    _echo_json(state.engine().baseline(fiscal_year, actor_role=state.role))
    state.persist()


@cli.command()
@click.argument("activity_id")
@click.argument("period")
@click.pass_obj
def start(state: _CliState, activity_id: str, period: str):
    _echo_json(state.engine().start_activity(activity_id, period, actor_role=state.role))
    state.persist()


@cli.command()
@click.argument("activity_id")
@click.argument("period")
@click.pass_obj
def complete(state: _CliState, activity_id: str, period: str):
    _echo_json(state.engine().complete_milestone(activity_id, period, actor_role=state.role))
    state.persist()


@cli.command()
@click.argument("activity_id")
@click.argument("period")
@click.argument("amount")
@click.pass_obj
def cost(state: _CliState, activity_id: str, period: str, amount: str):
    _echo_json(state.engine().record_actual_cost(activity_id, period, amount, actor_role=state.role))
    state.persist()


@cli.command()
@click.argument("activity_id")
@click.argument("period")
@click.argument("fraction")
@click.pass_obj
def progress(state: _CliState, activity_id: str, period: str, fraction: str):
    """Record a percent-complete fraction (percent_complete technique)."""
    _echo_json(state.engine().record_progress(activity_id, period, fraction, actor_role=state.role))
    state.persist()


@cli.command()
@click.argument("period")
@click.pass_obj
def wavefront(state: _CliState, period: str):
    """Activities in progress at a period."""
    engine = state.engine()
    activities = in_progress_set(engine.model, engine.period_index(period))
    _echo_json({"period": period, "count": len(activities), "activity_ids": [a.id for a in activities]})


# ---------------------------------------------------------------------------
# evm


@cli.group()
def evm():
    """CPI/SPI rollups and series."""


@evm.command("rollup")
@click.argument("node_id")
@click.argument("period")
@click.pass_obj
def evm_rollup(state: _CliState, node_id: str, period: str):
    engine = state.engine()
    snap = rollup(engine.model, node_id, engine.period_index(period))
    click.echo(snapshots_to_csv(engine.model, [snap]), nl=False)


@evm.command("series")
@click.argument("node_id")
@click.argument("start_period")
@click.argument("end_period")
@click.option("--out", type=click.Path(), default=None, help="Write CSV here instead of stdout.")
@click.pass_obj
def evm_series(state: _CliState, node_id: str, start_period: str, end_period: str, out: str | None):
    engine = state.engine()
    snaps = index_series(
        engine.model, node_id, engine.period_index(start_period), engine.period_index(end_period)
    )
    text = snapshots_to_csv(engine.model, snaps)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("period")
@click.pass_obj
def alerts(state: _CliState, period: str):
    """Struggling-team flags at a period."""
    engine = state.engine()
    _echo_json(detect_struggling(engine.model, engine.period_index(period)))


# ---------------------------------------------------------------------------
# change requests


@cli.group()
def cr():
    """Two-level change management."""


def _parse_target(raw: str) -> dict:
    head, sep, new_value = raw.partition("=")
    entity_id, sep2, field = head.partition(":")
    if not sep or not sep2:
        raise ValidationError(f"target must look like 'entity:field=new_value', got {raw!r}")
    return {"entity_id": entity_id, "field": field, "new_value": new_value}


@cr.command("propose")
@click.option("--target", "targets", multiple=True, required=True, help="entity:field=new_value")
@click.option("--rationale", required=True)
@click.option("--level", type=click.Choice(["L1", "L2"]), required=True)
@click.option("--effective", required=True, help="Effective period, e.g. 2019-06.")
@click.pass_obj
def cr_propose(state: _CliState, targets: tuple[str, ...], rationale: str, level: str, effective: str):
    parsed = [_parse_target(t) for t in targets]
    _echo_json(
        state.engine().propose_change(parsed, rationale, level, effective, actor_role=state.role)
    )
    state.persist()


@cr.command("submit")
@click.argument("cr_id")
@click.pass_obj
def cr_submit(state: _CliState, cr_id: str):
    _echo_json(state.engine().submit_change(cr_id, actor_role=state.role))
    state.persist()


@cr.command("review")
@click.argument("cr_id")
@click.argument("verdict", type=click.Choice(["approve", "reject"]))
@click.option("--note", default="")
@click.pass_obj
def cr_review(state: _CliState, cr_id: str, verdict: str, note: str):
    _echo_json(state.engine().review_change(cr_id, verdict, note, actor_role=state.role))
    state.persist()


@cr.command("apply")
@click.argument("cr_id")
@click.pass_obj
def cr_apply(state: _CliState, cr_id: str):
    _echo_json(state.engine().apply_change(cr_id, actor_role=state.role))
    state.persist()


@cr.command("list")
@click.option("--state", "cr_state", default=None, help="Filter by workflow state.")
@click.pass_obj
def cr_list(state: _CliState, cr_state: str | None):
    model = state.engine().model
    out = []
    for cr_id in sorted(model.change_requests):
        request = model.change_requests[cr_id]
        if cr_state is None or request.state.value == cr_state:
            out.append(request.to_dict())
    _echo_json(out)


@cr.command("audit")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def cr_audit(state: _CliState, out: str | None):
    """Append-only audit log, one JSON record per transition."""
    lines = audit_log_lines(state.engine().model)
    text = "\n".join(lines) + ("\n" if lines else "")
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


# ---------------------------------------------------------------------------
# integrations


@cli.group()
def integration():
    """KPP integration ledger and review workflow."""


@integration.command("record")
@click.argument("product_id")
@click.argument("capability")
@click.argument("client")
@click.option(
    "--environment",
    type=click.Choice(["pre_exascale", "exascale", "other"]),
    default="pre_exascale",
    show_default=True,
)
@click.option("--note", default="", help="Sustainability note.")
@click.pass_obj
def integration_record(
    state: _CliState, product_id: str, capability: str, client: str, environment: str, note: str
):
    _echo_json(
        state.engine().record_integration(
            product_id, capability, client, environment, note, actor_role=state.role
        )
    )
    state.persist()


@integration.command("evidence")
@click.argument("integration_id")
@click.option(
    "--kind",
    type=click.Choice(["screenshot", "client_letter", "test_output", "link"]),
    required=True,
)
@click.option("--uri", required=True, help="URI or path recorded for the artifact.")
@click.option("--file", "file_path", type=click.Path(exists=True), default=None, help="Read bytes from this file.")
@click.pass_obj
def integration_evidence(state: _CliState, integration_id: str, kind: str, uri: str, file_path: str | None):
    content = Path(file_path).read_bytes() if file_path else None
    _echo_json(
        state.engine().attach_evidence(integration_id, kind, uri, content, actor_role=state.role)
    )
    state.persist()


@integration.command("submit")
@click.argument("integration_id")
@click.pass_obj
def integration_submit(state: _CliState, integration_id: str):
    _echo_json(state.engine().submit_for_review(integration_id, actor_role=state.role))
    state.persist()


@integration.command("review")
@click.argument("integration_id")
@click.argument("verdict", type=click.Choice(["endorse", "reject"]))
@click.option("--report", required=True)
@click.pass_obj
def integration_review(state: _CliState, integration_id: str, verdict: str, report: str):
    _echo_json(
        state.engine().sme_review(integration_id, verdict, report, actor_role=state.role)
    )
    state.persist()


@integration.command("approve")
@click.argument("integration_id")
@click.pass_obj
def integration_approve(state: _CliState, integration_id: str):
    _echo_json(state.engine().final_approval(integration_id, actor_role=state.role))
    state.persist()


@integration.command("status")
@click.argument("product_id", required=False)
@click.pass_obj
def integration_status(state: _CliState, product_id: str | None):
    model = state.engine().model
    if product_id:
        _echo_json(product_kpp_status(model, product_id))
    else:
        _echo_json(portfolio_kpp_score(model))


@integration.command("ledger")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def integration_ledger(state: _CliState, out: str | None):
    text = integration_ledger_csv(state.engine().model)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


# ---------------------------------------------------------------------------
# lifecycle, snapshots, reports


@cli.group()
def lifecycle():
    """Annual lifecycle phases."""


@lifecycle.command("advance")
@click.argument("fiscal_year", type=int)
@click.argument("phase")
@click.pass_obj
def lifecycle_advance(state: _CliState, fiscal_year: int, phase: str):
    _echo_json(state.engine().advance_phase(fiscal_year, phase, actor_role=state.role))
    state.persist()


@lifecycle.command("show")
@click.pass_obj
def lifecycle_show(state: _CliState):
    model = state.engine().model
    _echo_json({str(fy): model.lifecycles[fy].to_dict() for fy in sorted(model.lifecycles)})


@cli.group()
def snapshot():
    """Frozen monthly review snapshots."""


@snapshot.command("take")
@click.argument("period")
@click.pass_obj
def snapshot_take(state: _CliState, period: str):
    _echo_json(state.engine().take_monthly_snapshot(period, actor_role=state.role))
    state.persist()


@snapshot.command("list")
@click.pass_obj
def snapshot_list(state: _CliState):
    model = state.engine().model
    horizon = model.horizon
    _echo_json([str(horizon.period_at(idx)) for idx in sorted(model.monthly_snapshots)])


@cli.command()
@click.argument("period")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def export(state: _CliState, period: str, fmt: str, out: str | None):
    """Export a frozen monthly snapshot."""
    engine = state.engine()
    text = export_status(engine.model, engine.period_index(period), fmt)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("fiscal_year", type=int)
@click.option("--out", type=click.Path(), default=None, help="Write the text report here.")
@click.option("--json-out", type=click.Path(), default=None, help="Write the JSON mirror here.")
@click.pass_obj
def car(state: _CliState, fiscal_year: int, out: str | None, json_out: str | None):
    """Generate the capability assessment report for a fiscal year."""
    engine = state.engine()
    document = engine.generate_car(fiscal_year, actor_role=state.role)
    state.persist()
    text = car_text(engine.model.car_documents[fiscal_year])
    if json_out:
        Path(json_out).write_text(canonical_json(document) + "\n", encoding="utf-8")
        click.echo(f"wrote {json_out}")
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    if not out and not json_out:
        click.echo(text, nl=False)


# ---------------------------------------------------------------------------
# stack


@cli.group()
def stack():
    """Curated stack: releases, policies, manifests."""


@stack.command("release")
@click.argument("product_id")
@click.argument("version")
@click.option(
    "--constraint",
    "constraints",
    multiple=True,
    help="OTHER_PRODUCT=[min,max) pairwise version constraint.",
)
@click.pass_obj
def stack_release(state: _CliState, product_id: str, version: str, constraints: tuple[str, ...]):
    parsed = []
    for raw in constraints:
        other, sep, allowed = raw.partition("=")
        if not sep:
            raise ValidationError(f"constraint must look like 'OTHER=[min,max)', got {raw!r}")
        parsed.append({"other_product_id": other, "allowed": allowed})
    _echo_json(state.engine().register_release(product_id, version, parsed, actor_role=state.role))
    state.persist()


@stack.command("policy")
@click.argument("product_id")
@click.option("--item", "items", multiple=True, required=True, help="POLICY_ID=status[:note]")
@click.pass_obj
def stack_policy(state: _CliState, product_id: str, items: tuple[str, ...]):
    parsed: dict[str, dict] = {}
    for raw in items:
        policy_id, sep, rest = raw.partition("=")
        if not sep:
            raise ValidationError(f"item must look like 'POLICY_ID=status[:note]', got {raw!r}")
        status, _, note = rest.partition(":")
        parsed[policy_id] = {"status": status, "note": note}
    _echo_json(state.engine().record_policy_checklist(product_id, parsed, actor_role=state.role))
    state.persist()


@stack.command("check")
@click.argument("product_id")
@click.option("--allow-waivers", is_flag=True, default=False)
@click.pass_obj
def stack_check(state: _CliState, product_id: str, allow_waivers: bool):
    _echo_json(check_policies(state.engine().model, product_id, allow_waivers=allow_waivers))


@stack.command("manifest")
@click.argument("name")
@click.argument("stack_version")
@click.option("--pin", "pins", multiple=True, required=True, help="PRODUCT=VERSION")
@click.option(
    "--rule",
    type=click.Choice(["all_policies_met", "allow_waivers"]),
    default="all_policies_met",
    show_default=True,
)
@click.option("--out", type=click.Path(), default=None, help="Write the canonical manifest file here.")
@click.pass_obj
def stack_manifest(
    state: _CliState, name: str, stack_version: str, pins: tuple[str, ...], rule: str, out: str | None
):
    parsed: dict[str, str] = {}
    for raw in pins:
        product_id, sep, version = raw.partition("=")
        if not sep:
            raise ValidationError(f"pin must look like 'PRODUCT=VERSION', got {raw!r}")
        parsed[product_id] = version
    engine = state.engine()
    result = engine.compose_manifest(name, stack_version, parsed, rule, actor_role=state.role)
    state.persist()
    if out:
        Path(out).write_text(manifest_text(engine.model.manifests[name]), encoding="utf-8")
        click.echo(f"wrote {out}")
    _echo_json(result)


@stack.command("compat")
@click.argument("name")
@click.pass_obj
def stack_compat(state: _CliState, name: str):
    _echo_json(check_compatibility(state.engine().model, name))


# ---------------------------------------------------------------------------
# service, fixtures, store


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.pass_obj
def serve(state: _CliState, host: str, port: int):
    """Run the HTTP API over the bound store."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(state.engine()), host=host, port=port)


@cli.command()
@click.argument("kind", type=click.Choice(["scale", "struggling"]))
@click.option("--seed", type=int, default=2017, show_default=True)
@click.pass_obj
def fixture(state: _CliState, kind: str, seed: int):
    """Build a seeded synthetic portfolio into the store."""
    engine = state.engine()
    if engine.model.portfolio is not None:
        raise ValidationError("store already holds a portfolio; fixtures need an empty store")
    if kind == "scale":
        _echo_json(build_scale_fixture(engine, seed=seed))
    else:
        _echo_json(build_struggling_fixture(engine))
    state.persist()


@cli.command()
@click.option("--to", "target", type=click.Path(), default=None, help="Export to this directory.")
@click.pass_obj
def save(state: _CliState, target: str | None):
    """Write a full snapshot (and optionally export the store elsewhere)."""
    path = state.engine().save(target)
    click.echo(f"saved {path}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except EngineError as exc:
        click.echo(f"error: {exc.code}: {exc.message}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
