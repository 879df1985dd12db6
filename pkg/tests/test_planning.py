import random
from fractions import Fraction

import pytest

from milepost.errors import (
    DuplicateError,
    IllegalTransitionError,
    RoleError,
    StaleValueError,
    ValidationError,
)
from milepost.evm import planned_value
from milepost.model import CrState, PackageState, Period
from milepost.planning import in_progress_set, required_level
from milepost.model import ChangeTarget

from conftest import baselined_activity, make_single_product_plan


class TestPlanningPackages:
    def test_create_is_coarse(self, engine):
        engine.create_portfolio("X", 2019, 1)
        gid = engine.add_sdk_group("g")["id"]
        pid = engine.add_product(gid, "zfp", 4)["id"]
        result = engine.create_planning_package(pid, 2019, "compression for exascale apps", 400000)
        assert result["state"] == "coarse"

    def test_duplicate_fiscal_year_rejected(self, engine):
        engine.create_portfolio("X", 2019, 1)
        gid = engine.add_sdk_group("g")["id"]
        pid = engine.add_product(gid, "zfp", 4)["id"]
        engine.create_planning_package(pid, 2019, "a", 100)
        with pytest.raises(DuplicateError):
            engine.create_planning_package(pid, 2019, "b", 100)

    def test_scale_fixture_has_420_packages_one_per_product_year(self, scale):
        eng, _ = scale
        assert len(eng.model.packages) == 420
        for product in eng.model.products.values():
            assert len(product.package_ids) == 6

    def test_coarse_edits_allowed_without_cr(self, engine):
        pid, pkg, _ = make_single_product_plan(engine)
        engine2_pkg = engine.create_planning_package(pid, 2019, "x", 1) if False else None
        # a second coarse package on another product
        gid = engine.model.products[pid].group_id
        pid2 = engine.add_product(gid, "other", 4)["id"]
        pkg2 = engine.create_planning_package(pid2, 2019, "draft", 1000)["id"]
        engine.update_package(pkg2, narrative="sharper draft", annual_budget=2000)
        assert engine.model.packages[pkg2].narrative == "sharper draft"


class TestRefinement:
    def _plan(self, engine, fractions, months=None):
        engine.create_portfolio("X", 2019, 1)
        gid = engine.add_sdk_group("g")["id"]
        pid = engine.add_product(gid, "zfp", 4)["id"]
        pkg = engine.create_planning_package(pid, 2019, "n", 100000)["id"]
        specs = []
        for i, fraction in enumerate(fractions):
            month = (months or [i + 1 for i in range(len(fractions))])[i]
            specs.append(
                {
                    "title": f"a{i}",
                    "budget_fraction": fraction,
                    "baseline_start": str(Period(2019, month)),
                    "baseline_end": str(Period(2019, month)),
                }
            )
        return engine, pkg, specs

    def test_five_even_fractions_no_warning(self, engine):
        engine, pkg, specs = self._plan(engine, [Fraction(1, 5)] * 5)
        result = engine.refine_package(pkg, specs)
        assert result["warnings"] == []
        budgets = [engine.model.activities[a].budget for a in result["activity_ids"]]
        assert sum(budgets) == 100000
        assert engine.model.packages[pkg].state is PackageState.REFINED

    def test_three_specs_warn_and_leave_reserve(self, engine):
        engine, pkg, specs = self._plan(engine, [Fraction(3, 10)] * 3)
        result = engine.refine_package(pkg, specs)
        assert len(result["warnings"]) == 1
        assert result["management_reserve_fraction"] == "1/10"

    def test_overallocation_rejected(self, engine):
        engine, pkg, specs = self._plan(engine, [Fraction(11, 40)] * 4)
        with pytest.raises(ValidationError):
            engine.refine_package(pkg, specs)

    def test_dates_outside_fiscal_year_rejected(self, engine):
        engine.create_portfolio("X", 2019, 2)
        gid = engine.add_sdk_group("g")["id"]
        pid = engine.add_product(gid, "zfp", 4)["id"]
        pkg = engine.create_planning_package(pid, 2019, "n", 1000)["id"]
        with pytest.raises(ValidationError):
            engine.refine_package(
                pkg,
                [
                    {
                        "title": "a",
                        "budget_fraction": "0.5",
                        "baseline_start": "2019-11",
                        "baseline_end": "2020-02",
                    }
                ],
            )

    def test_refining_twice_rejected(self, engine):
        engine, pkg, specs = self._plan(engine, [Fraction(1, 4)] * 4)
        engine.refine_package(pkg, specs)
        with pytest.raises(IllegalTransitionError):
            engine.refine_package(pkg, specs)

    def test_budget_conservation_exact_on_scale_fixture(self, scale):
        eng, _ = scale
        for package in eng.model.packages.values():
            total = sum(eng.model.activities[a].budget for a in package.activity_ids)
            reserve = sum(
                package.annual_budget * eng.model.activities[a].budget_fraction
                for a in package.activity_ids
            )
            fractions = sum(eng.model.activities[a].budget_fraction for a in package.activity_ids)
            assert total + package.annual_budget * (1 - fractions) == package.annual_budget


class TestFinalize:
    def test_finalize_then_start(self, engine):
        pid, pkg, aids = make_single_product_plan(engine)
        engine.finalize_activity(aids[0], "criteria text", "two staff")
        activity = engine.model.activities[aids[0]]
        assert activity.detail_level.value == "finalized"

    def test_finalize_twice_rejected(self, engine):
        pid, pkg, aids = make_single_product_plan(engine)
        engine.finalize_activity(aids[0], "c")
        with pytest.raises(IllegalTransitionError):
            engine.finalize_activity(aids[0], "c")

    def test_start_without_finalize_rejected_through_full_sequence(self, engine):
        """The legal sequence is refine -> finalize -> baseline -> start."""
        pid, pkg, aids = make_single_product_plan(engine)
        for aid in aids[1:]:
            engine.finalize_activity(aid, "c")
        engine.baseline(2019)
        with pytest.raises(IllegalTransitionError):
            engine.start_activity(aids[0], "2019-01")
        engine.finalize_activity(aids[0], "c")
        engine.start_activity(aids[0], "2019-01")


class TestBaseline:
    def test_direct_edit_after_baseline_requires_cr(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        with pytest.raises(IllegalTransitionError, match="change request required"):
            engine.update_activity(aids[0], baseline_end="2019-05")

    def test_coarse_package_blocks_baseline_and_is_named(self, engine):
        pid, pkg, aids = make_single_product_plan(engine)
        gid = engine.model.products[pid].group_id
        pid2 = engine.add_product(gid, "lagging", 4)["id"]
        pkg2 = engine.create_planning_package(pid2, 2019, "n", 1000)["id"]
        with pytest.raises(IllegalTransitionError, match=pkg2):
            engine.baseline(2019)

    def test_rebaseline_rejected(self, engine):
        baselined_activity(engine)
        with pytest.raises(DuplicateError):
            engine.baseline(2019)

    def test_no_packages_rejected(self, engine):
        engine.create_portfolio("X", 2019, 1)
        with pytest.raises(ValidationError):
            engine.baseline(2019)


class TestChangeLevelClassifier:
    def _portfolio(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        gid = engine.model.products[pid].group_id
        pid2 = engine.add_product(gid, "second", 4)["id"]
        pkg2 = engine.create_planning_package(pid2, 2019, "n", 50000)["id"]
        return pid, pid2, pkg, pkg2, aids

    def test_within_product_schedule_edit_is_l1(self, engine):
        pid, pid2, pkg, pkg2, aids = self._portfolio(engine)
        targets = [ChangeTarget(aids[0], "baseline_end", "", "2019-05")]
        assert required_level(engine.model, targets).value == "L1"

    def test_budget_field_is_l2(self, engine):
        pid, pid2, pkg, pkg2, aids = self._portfolio(engine)
        targets = [ChangeTarget(aids[0], "budget", "", "1")]
        assert required_level(engine.model, targets).value == "L2"
        targets = [ChangeTarget(pkg, "annual_budget", "", "1")]
        assert required_level(engine.model, targets).value == "L2"

    def test_cross_product_is_l2(self, engine):
        pid, pid2, pkg, pkg2, aids = self._portfolio(engine)
        targets = [
            ChangeTarget(aids[0], "scope_text", "", "x"),
            ChangeTarget(pkg2, "narrative", "", "y"),
        ]
        assert required_level(engine.model, targets).value == "L2"

    def test_product_move_is_l2(self, engine):
        pid, pid2, pkg, pkg2, aids = self._portfolio(engine)
        targets = [ChangeTarget(pid2, "sdk_group", "", "grp-0002")]
        assert required_level(engine.model, targets).value == "L2"

    def test_underleveled_proposal_rejected(self, engine):
        pid, pid2, pkg, pkg2, aids = self._portfolio(engine)
        with pytest.raises(ValidationError, match="requires L2"):
            engine.propose_change(
                targets=[
                    {"entity_id": aids[0], "field": "budget", "new_value": "40000"},
                ],
                rationale="shift funds",
                level="L1",
                effective_period="2019-06",
            )


class TestChangeWorkflow:
    def _approved_cr(self, engine, aids, level="L1", field="baseline_end", new_value="2019-05"):
        cr = engine.propose_change(
            targets=[{"entity_id": aids[0], "field": field, "new_value": new_value}],
            rationale="slip one month",
            level=level,
            effective_period="2019-04",
        )
        engine.submit_change(cr["id"])
        role = "area_lead" if level == "L1" else "project_director"
        engine.review_change(cr["id"], "approve", actor_role=role)
        return cr["id"]

    def test_l1_approved_by_area_lead_and_applied(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        cr_id = self._approved_cr(engine, aids)
        engine.apply_change(cr_id)
        cr = engine.model.change_requests[cr_id]
        assert cr.state is CrState.APPLIED
        seg = engine.model.activities[aids[0]].current_segment
        assert seg.end_index == engine.period_index("2019-05")

    def test_wrong_role_cannot_review(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        cr = engine.propose_change(
            targets=[{"entity_id": aids[0], "field": "baseline_end", "new_value": "2019-05"}],
            rationale="r",
            level="L1",
            effective_period="2019-04",
        )
        engine.submit_change(cr["id"])
        with pytest.raises(RoleError):
            engine.review_change(cr["id"], "approve", actor_role="team")
        with pytest.raises(RoleError):
            engine.review_change(cr["id"], "approve", actor_role="project_director")

    def test_l2_requires_project_director(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        cr = engine.propose_change(
            targets=[{"entity_id": aids[0], "field": "budget", "new_value": "42000"}],
            rationale="rebudget",
            level="L2",
            effective_period="2019-04",
        )
        engine.submit_change(cr["id"])
        with pytest.raises(RoleError):
            engine.review_change(cr["id"], "approve", actor_role="area_lead")
        engine.review_change(cr["id"], "approve", actor_role="project_director")

    def test_stale_old_value_resets_to_drafted(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        first = self._approved_cr(engine, aids)
        second = self._approved_cr(engine, aids, new_value="2019-06")
        engine.apply_change(first)
        with pytest.raises(StaleValueError):
            engine.apply_change(second)
        assert engine.model.change_requests[second].state is CrState.DRAFTED

    def test_apply_recomputes_pv_from_effective_period_forward(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        activity = engine.model.activities[aids[0]]
        before = [planned_value(activity, idx) for idx in range(1, 13)]
        cr = engine.propose_change(
            targets=[{"entity_id": aids[0], "field": "baseline_end", "new_value": "2019-06"}],
            rationale="stretch window",
            level="L1",
            effective_period="2019-04",
        )
        engine.submit_change(cr["id"])
        engine.review_change(cr["id"], "approve", actor_role="area_lead")
        engine.apply_change(cr["id"])
        after = [planned_value(activity, idx) for idx in range(1, 13)]
        assert after[:3] == before[:3]  # periods before the effective month keep the old curve
        assert after[3:6] != before[3:6]

    def test_rejected_cr_changes_nothing(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        activity = engine.model.activities[aids[0]]
        before = [planned_value(activity, idx) for idx in range(1, 13)]
        cr = engine.propose_change(
            targets=[{"entity_id": aids[0], "field": "baseline_end", "new_value": "2019-07"}],
            rationale="r",
            level="L1",
            effective_period="2019-04",
        )
        engine.submit_change(cr["id"])
        engine.review_change(cr["id"], "reject", note="not justified", actor_role="area_lead")
        assert [planned_value(activity, idx) for idx in range(1, 13)] == before
        with pytest.raises(IllegalTransitionError):
            engine.apply_change(cr["id"])

    def test_audit_log_has_one_record_per_transition(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        cr_id = self._approved_cr(engine, aids)
        engine.apply_change(cr_id)
        edges = [r["edge"] for r in engine.model.audit_log if r["cr_id"] == cr_id]
        assert edges == ["proposed", "submitted", "approved", "applied"]

    def test_cancellation_freezes_pv_keeps_costs(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        engine.start_activity(aids[0], "2019-01")
        engine.record_actual_cost(aids[0], "2019-01", 5000)
        cr = engine.propose_change(
            targets=[{"entity_id": aids[0], "field": "status", "new_value": "cancelled"}],
            rationale="offramp",
            level="L1",
            effective_period="2019-02",
        )
        engine.submit_change(cr["id"])
        engine.review_change(cr["id"], "approve", actor_role="area_lead")
        engine.apply_change(cr["id"])
        activity = engine.model.activities[aids[0]]
        assert activity.status.value == "cancelled"
        frozen = planned_value(activity, engine.period_index("2019-02"))
        assert planned_value(activity, engine.period_index("2019-12")) == frozen
        from milepost.evm import rollup

        assert rollup(engine.model, pid, 12).ac == 5000

    def test_audit_completeness_random_cr_sequences(self, engine):
        """Every difference between two baselined model states is explained
        by exactly one applied change request."""
        rng = random.Random(5)
        pid, pkg, aids = baselined_activity(engine)
        horizon = engine.model.horizon

        def field_state():
            out = {}
            for aid in aids:
                seg = engine.model.activities[aid].current_segment
                out[(aid, "baseline_start")] = str(horizon.period_at(seg.start_index))
                out[(aid, "baseline_end")] = str(horizon.period_at(seg.end_index))
                out[(aid, "scope_text")] = engine.model.activities[aid].scope_text
            return out

        before = field_state()
        applied_targets = []
        for i in range(12):
            aid = rng.choice(aids)
            field, value = rng.choice(
                [
                    ("baseline_end", str(Period(2019, rng.randrange(1, 13)))),
                    ("scope_text", f"scope rev {i}"),
                ]
            )
            seg = engine.model.activities[aid].current_segment
            if field == "baseline_end" and Period.parse(value).month < horizon.period_at(seg.start_index).month:
                continue
            cr = engine.propose_change(
                targets=[{"entity_id": aid, "field": field, "new_value": value}],
                rationale="r",
                level="L1",
                effective_period="2019-06",
            )
            engine.submit_change(cr["id"])
            verdict = rng.choice(["approve", "reject"])
            engine.review_change(cr["id"], verdict, actor_role="area_lead")
            if verdict == "approve":
                engine.apply_change(cr["id"])
                applied_targets.append(cr["id"])
        after = field_state()
        diffs = {key for key in before if before[key] != after[key]}
        # replay the audit trail: applied CRs must cover exactly the diffs
        explained = set()
        for cr_id in applied_targets:
            for target in engine.model.change_requests[cr_id].targets:
                if target.old_value != target.new_value:
                    explained.add((target.entity_id, target.field))
        assert diffs <= explained


class TestExecutionTransitions:
    def test_complete_before_start_rejected(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        with pytest.raises(IllegalTransitionError):
            engine.complete_milestone(aids[0], "2019-02")

    def test_completion_period_before_start_rejected(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        engine.start_activity(aids[0], "2019-03")
        with pytest.raises(ValidationError):
            engine.complete_milestone(aids[0], "2019-02")

    def test_cost_on_planned_activity_rejected(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        with pytest.raises(IllegalTransitionError):
            engine.record_actual_cost(aids[0], "2019-01", 10)

    def test_cost_on_frozen_period_rejected(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        engine.start_activity(aids[0], "2019-01")
        engine.take_monthly_snapshot("2019-01")
        with pytest.raises(ValidationError):
            engine.record_actual_cost(aids[0], "2019-01", 10)

    def test_progress_series_must_be_non_decreasing(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        engine.start_activity(aids[0], "2019-01")
        engine.record_progress(aids[0], "2019-02", "0.5")
        with pytest.raises(ValidationError):
            engine.record_progress(aids[0], "2019-03", "0.25")
        engine.record_progress(aids[0], "2019-03", "0.75")

    def test_ev_steps_at_completion_with_0_100(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        engine.start_activity(aids[0], "2019-03")
        engine.complete_milestone(aids[0], "2019-07")
        from milepost.evm import earned_value

        activity = engine.model.activities[aids[0]]
        technique = engine.model.portfolio.config.ev_technique
        assert earned_value(activity, engine.period_index("2019-06"), technique) == 0
        assert earned_value(activity, engine.period_index("2019-07"), technique) == activity.budget


class TestWavefront:
    def test_empty_portfolio(self, engine):
        engine.create_portfolio("X", 2019, 1)
        assert in_progress_set(engine.model, 1) == []

    def test_before_any_start(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        engine.start_activity(aids[0], "2019-02")
        assert in_progress_set(engine.model, 1) == []

    def test_started_not_completed_counted(self, engine):
        pid, pkg, aids = baselined_activity(engine)
        engine.start_activity(aids[0], "2019-01")
        engine.start_activity(aids[1], "2019-04") if False else None
        engine.complete_milestone(aids[0], "2019-03")
        assert [a.id for a in in_progress_set(engine.model, 2)] == [aids[0]]
        assert in_progress_set(engine.model, 3) == []  # completed at 3

    def test_scale_fixture_exceeds_100_mid_year(self, scale):
        eng, _ = scale
        idx = eng.model.horizon.index_of(Period(2019, 6))
        assert len(in_progress_set(eng.model, idx)) > 100
