"""Seeded synthetic portfolios at production scale.

`build_scale_fixture` reproduces the headline scale of a large multi-team
program: 35 teams, 70 products in 10 SDK groups, a six-year horizon with
300 activities per year (1,800 total), 1,700 completed milestones, and 300
finally-approved integrations. Counts are exact by construction; only
window placement, budgets, and cost factors draw from the seeded RNG.

Activity windows cycle through 21 (start, slip) slots chosen so that every
steady-state month (3..10 of each year) has at least ~126 activities in
progress, keeping the wavefront above 100.
"""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone
from fractions import Fraction

from .engine import PortfolioEngine
from .model import Period, PortfolioConfig

# months 1..2 ramp up and 11..12 drain as one year's activities hand over
# to the next; months 3..10 are the steady-state wavefront window
NON_BOUNDARY_MONTHS = range(3, 11)

SCALE = {
    "sdk_groups": 10,
    "products": 70,
    "teams": 35,
    "years": 6,
    "activities_per_year": 300,
    "activities_total": 1800,
    "completed_milestones": 1700,
    "approved_integrations": 300,
}

_CLIENTS = [
    "app-ignition",
    "app-frontline",
    "facility-ridge",
    "facility-basin",
    "vendor-silica",
    "compiler-commons",
    "language-standard",
    "workflow-hub",
]

_ENV_CYCLE = ["pre_exascale", "exascale", "pre_exascale", "other", "exascale", "pre_exascale"]


def synthetic_clock(start: str = "2016-10-01T00:00:00Z"):
    """Deterministic second-ticking clock for reproducible fixtures."""
    base = datetime.strptime(start, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    state = {"n": 0}

    def tick() -> str:
        state["n"] += 1
        return (base + timedelta(seconds=state["n"])).strftime("%Y-%m-%dT%H:%M:%SZ")

    return tick


def _slots(rng: random.Random) -> list[tuple[int, int]]:
    # start month 1..7 with a 6-month baseline window; completion slips 0..2
    slots = [(start, slip) for slip in (0, 1, 2) for start in range(1, 8)]
    rng.shuffle(slots)
    return slots


def build_scale_fixture(engine: PortfolioEngine, seed: int = 2017, start_fy: int = 2017) -> dict:
    rng = random.Random(seed)
    years = SCALE["years"]
    engine.create_portfolio("exastack", start_fy, years, PortfolioConfig())
    horizon = engine.model.horizon

    group_ids = [engine.add_sdk_group(f"sdk-{i + 1:02d}")["id"] for i in range(SCALE["sdk_groups"])]
    goal8 = set(rng.sample(range(SCALE["products"]), 10))
    product_ids: list[str] = []
    for i in range(SCALE["products"]):
        product_ids.append(
            engine.add_product(
                group_ids[i % len(group_ids)],
                name=f"lib-{i + 1:02d}",
                kpp_goal=8 if i in goal8 else 4,
                team_name=f"team-{i // 2 + 1:02d}",
            )["id"]
        )

    slots = _slots(rng)
    slot_cursor = 0
    all_activities: list[tuple[str, int, int, int]] = []  # (id, fy, start_idx, completion_idx)
    incomplete_final_year: set[str] = set()

    for year in range(years):
        fy = start_fy + year
        five_activity = set(rng.sample(range(SCALE["products"]), 20))  # 20*5 + 50*4 = 300
        year_first = horizon.index_of(Period(fy, 1))
        fy_activities: list[tuple[str, int, int]] = []  # (id, start_idx, planned_completion_idx)
        for i, pid in enumerate(product_ids):
            k = 5 if i in five_activity else 4
            annual = rng.randrange(10, 27) * 30000  # divisible by 5 and 6
            package = engine.create_planning_package(
                pid, fy, f"FY{fy} capability plan for {engine.model.products[pid].name}", annual
            )
            specs = []
            windows = []
            for _ in range(k):
                start, slip = slots[slot_cursor % len(slots)]
                slot_cursor += 1
                end = start + 5  # six-month baseline window
                windows.append((start, slip))
                specs.append(
                    {
                        "title": f"{engine.model.products[pid].name} FY{fy} activity {len(specs) + 1}",
                        "scope_text": "capability increment ending in a demonstrable milestone",
                        "budget_fraction": Fraction(1, k + 1),
                        "baseline_start": str(Period(fy, start)),
                        "baseline_end": str(Period(fy, end)),
                    }
                )
            refined = engine.refine_package(package["id"], specs)
            for aid, (start, slip) in zip(refined["activity_ids"], windows):
                engine.finalize_activity(
                    aid,
                    completion_criteria="milestone demo accepted by the client",
                    staffing_note="staffed from the standing team",
                )
                start_idx = year_first + start - 1
                completion_idx = start_idx + 5 + slip  # may cross the year boundary
                fy_activities.append((aid, start_idx, completion_idx))
        engine.baseline(fy)
        engine.advance_phase(fy, "execution")

        if fy == start_fy + years - 1:
            # exactly 100 of the final year's 300 activities stay in progress
            incomplete_final_year = {
                fy_activities[j][0] for j in rng.sample(range(len(fy_activities)), 100)
            }
        for aid, start_idx, completion_idx in fy_activities:
            completion_idx = min(completion_idx, horizon.length)
            engine.start_activity(aid, str(horizon.period_at(start_idx)))
            if aid in incomplete_final_year:
                all_activities.append((aid, fy, start_idx, 0))
                continue
            engine.complete_milestone(aid, str(horizon.period_at(completion_idx)))
            all_activities.append((aid, fy, start_idx, completion_idx))

    # actual costs: total = budget * factor, spread evenly over the active window
    for aid, fy, start_idx, completion_idx in all_activities:
        activity = engine.model.activities[aid]
        last_idx = completion_idx or horizon.index_of(Period(fy, 12))
        months = list(range(start_idx, last_idx + 1))
        factor = Fraction(rng.randrange(90, 111), 100)
        monthly = activity.budget * factor / len(months)
        for idx in months:
            engine.record_actual_cost(aid, str(horizon.period_at(idx)), monthly)

    # integrations: goal-4 products approve 4, goal-8 products approve 6 -> 300
    approved = 0
    for i, pid in enumerate(product_ids):
        product = engine.model.products[pid]
        n = 6 if product.kpp_goal == 8 else 4
        for j in range(n):
            client = _CLIENTS[(i + j) % len(_CLIENTS)]
            integration = engine.record_integration(
                pid,
                capability=f"{product.name} capability {j + 1}",
                client=client,
                environment_class=_ENV_CYCLE[j % len(_ENV_CYCLE)],
                sustainability_note="shipped in the client's production configuration",
            )
            engine.attach_evidence(
                integration["id"],
                kind="screenshot",
                uri_or_path=f"evidence/{product.name}-{j + 1}.png",
                content=f"synthetic screenshot bytes for {integration['id']}".encode(),
            )
            if j % 2 == 0:
                engine.attach_evidence(
                    integration["id"],
                    kind="client_letter",
                    uri_or_path=f"evidence/{product.name}-{j + 1}-letter.txt",
                    content=f"the {client} team confirms sustained use ({integration['id']})".encode(),
                )
            engine.submit_for_review(integration["id"])
            engine.sme_review(
                integration["id"],
                verdict="endorse",
                report="capability verified in the client environment; sustainable",
                actor_role="sme",
            )
            engine.final_approval(integration["id"], actor_role="project_director")
            approved += 1
    # a few claims still working their way through review
    pending_states = ["proposed", "evidence_attached", "under_sme_review", "sme_rejected"]
    for j, state in enumerate(pending_states * 2):
        pid = product_ids[j]
        integration = engine.record_integration(
            pid,
            capability=f"pending capability {j + 1}",
            client=_CLIENTS[j % len(_CLIENTS)],
            environment_class="pre_exascale",
            sustainability_note="under evaluation",
        )
        if state == "proposed":
            continue
        engine.attach_evidence(
            integration["id"],
            kind="test_output",
            uri_or_path=f"evidence/pending-{j + 1}.log",
            content=f"test log {j + 1}".encode(),
        )
        if state == "evidence_attached":
            continue
        engine.submit_for_review(integration["id"])
        if state == "under_sme_review":
            continue
        engine.sme_review(
            integration["id"], verdict="reject", report="evidence does not show sustained use", actor_role="sme"
        )

    # curated stack: releases, policy checklists, one pinned manifest
    for i, pid in enumerate(product_ids):
        next_pid = product_ids[(i + 1) % len(product_ids)]
        engine.register_release(pid, "1.0.0")
        engine.register_release(
            pid, "1.1.0", constraints=[{"other_product_id": next_pid, "allowed": "[1.0.0,2.0.0)"}]
        )
        waived = i % 35 == 7  # a couple of products carry a waiver
        items = {
            policy_id: {"status": "waived" if waived and policy_id == "PC5" else "met", "note": ""}
            for policy_id in engine.model.policy_set
        }
        engine.record_policy_checklist(pid, items)
    engine.compose_manifest(
        "curated-stack",
        stack_version=f"{start_fy + years - 1}.11",
        pins={pid: "1.1.0" for pid in product_ids},
        inclusion_rule="allow_waivers",
        metadata={"container_image": "registry.example/curated-stack:latest", "binary_cache": "s3://cache"},
    )

    # monthly review snapshots over the full horizon, then the annual reports
    for idx in horizon.indices():
        engine.take_monthly_snapshot(str(horizon.period_at(idx)))
    for year in range(years):
        fy = start_fy + year
        engine.advance_phase(fy, "reporting")
        engine.generate_car(fy)

    completed = sum(1 for a in engine.model.activities.values() if a.completion_index is not None)
    return {
        "portfolio_id": engine.model.portfolio.id,
        "groups": len(engine.model.groups),
        "products": len(engine.model.products),
        "teams": len({p.team_name for p in engine.model.products.values()}),
        "activities": len(engine.model.activities),
        "completed_milestones": completed,
        "approved_integrations": approved,
    }


def build_struggling_fixture(engine: PortfolioEngine, start_fy: int = 2019) -> dict:
    """70 products with exact unit CPI/SPI, plus one planted product whose
    SPI is exactly 0.7 from month 2 until its second milestone lands.

    Healthy products run one-month activities that complete on time with
    costs equal to budget, so their indices are exactly 1 whenever defined.
    The planted product finishes a 0.7-weighted milestone in month 1 and
    leaves the 0.3-weighted one unfinished, pinning SPI to 7/10.
    """
    engine.create_portfolio("planted", start_fy, 1, PortfolioConfig())
    group_ids = [engine.add_sdk_group(f"sdk-{i + 1:02d}")["id"] for i in range(10)]
    planted_id = ""
    for i in range(70):
        product = engine.add_product(
            group_ids[i % 10], f"lib-{i + 1:02d}", kpp_goal=4, team_name=f"team-{i // 2 + 1:02d}"
        )
        pid = product["id"]
        if i == 0:
            planted_id = pid
            package = engine.create_planning_package(pid, start_fy, "planted slow-burn plan", 100000)
            refined = engine.refine_package(
                package["id"],
                [
                    {
                        "title": "front-loaded milestone",
                        "budget_fraction": Fraction(7, 10),
                        "baseline_start": str(Period(start_fy, 1)),
                        "baseline_end": str(Period(start_fy, 1)),
                    },
                    {
                        "title": "stalled milestone",
                        "budget_fraction": Fraction(3, 10),
                        "baseline_start": str(Period(start_fy, 2)),
                        "baseline_end": str(Period(start_fy, 2)),
                    },
                ],
            )
        else:
            package = engine.create_planning_package(pid, start_fy, f"healthy plan {i}", 120000)
            refined = engine.refine_package(
                package["id"],
                [
                    {
                        "title": f"quarterly milestone {q + 1}",
                        "budget_fraction": Fraction(1, 4),
                        "baseline_start": str(Period(start_fy, month)),
                        "baseline_end": str(Period(start_fy, month)),
                    }
                    for q, month in enumerate((2, 5, 8, 11))
                ],
            )
        for aid in refined["activity_ids"]:
            engine.finalize_activity(aid, completion_criteria="demo")
    engine.baseline(start_fy)
    engine.advance_phase(start_fy, "execution")

    for pid, product in sorted(engine.model.products.items()):
        aids = engine.model.product_activity_ids(pid)
        if pid == planted_id:
            first, second = aids
            engine.start_activity(first, str(Period(start_fy, 1)))
            engine.complete_milestone(first, str(Period(start_fy, 1)))
            engine.record_actual_cost(first, str(Period(start_fy, 1)), 70000)
            engine.start_activity(second, str(Period(start_fy, 2)))
            continue
        for aid in aids:
            activity = engine.model.activities[aid]
            month = engine.model.horizon.period_at(activity.current_segment.start_index)
            engine.start_activity(aid, str(month))
            engine.complete_milestone(aid, str(month))
            engine.record_actual_cost(aid, str(month), activity.budget)
    return {"planted_product_id": planted_id, "products": len(engine.model.products)}
