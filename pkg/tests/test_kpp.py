import random
from fractions import Fraction

import pytest

from milepost.errors import (
    DuplicateError,
    IllegalTransitionError,
    RoleError,
    ValidationError,
)
from milepost.kpp import (
    integration_ledger_csv,
    portfolio_kpp_score,
    product_kpp_status,
    verify_evidence,
)
from milepost.model import PortfolioConfig

from oracles import kpp_counts


def _portfolio_with_product(engine, goal=4):
    engine.create_portfolio("X", 2019, 1)
    gid = engine.add_sdk_group("g")["id"]
    return engine.add_product(gid, "zfp", goal)["id"]


def drive_to_approved(engine, pid, capability, client, environment="pre_exascale"):
    integration = engine.record_integration(pid, capability, client, environment)
    engine.attach_evidence(integration["id"], "screenshot", f"{capability}.png", b"png")
    engine.submit_for_review(integration["id"])
    engine.sme_review(integration["id"], "endorse", "verified in client environment", actor_role="sme")
    engine.final_approval(integration["id"], actor_role="project_director")
    return integration["id"]


class TestRecording:
    def test_new_claim_is_proposed(self, engine):
        pid = _portfolio_with_product(engine)
        result = engine.record_integration(pid, "lossy compression in app X I/O", "app X", "pre_exascale")
        assert result["state"] == "proposed"

    def test_duplicate_claim_rejected(self, engine):
        pid = _portfolio_with_product(engine)
        engine.record_integration(pid, "cap", "client", "pre_exascale")
        with pytest.raises(DuplicateError, match="duplicate claim"):
            engine.record_integration(pid, "cap", "client", "exascale")

    def test_community_ecosystem_client_accepted(self, engine):
        pid = _portfolio_with_product(engine)
        result = engine.record_integration(
            pid, "parallel algorithms contribution", "C++ Language standard", "other"
        )
        assert result["state"] == "proposed"

    def test_empty_capability_or_client_rejected(self, engine):
        pid = _portfolio_with_product(engine)
        with pytest.raises(ValidationError):
            engine.record_integration(pid, "", "client", "other")
        with pytest.raises(ValidationError):
            engine.record_integration(pid, "cap", "  ", "other")


class TestWorkflow:
    def test_happy_path_counts_toward_kpp(self, engine):
        pid = _portfolio_with_product(engine)
        drive_to_approved(engine, pid, "cap", "client")
        status = product_kpp_status(engine.model, pid)
        assert status["approved_count"] == 1

    def test_submit_without_evidence_rejected(self, engine):
        pid = _portfolio_with_product(engine)
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        with pytest.raises(IllegalTransitionError):
            engine.submit_for_review(integration["id"])

    def test_rework_loop_counts_once(self, engine):
        pid = _portfolio_with_product(engine)
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        engine.attach_evidence(integration["id"], "screenshot", "a.png", b"v1")
        engine.submit_for_review(integration["id"])
        engine.sme_review(integration["id"], "reject", "insufficient evidence", actor_role="sme")
        engine.attach_evidence(integration["id"], "client_letter", "letter.txt", b"v2")
        engine.submit_for_review(integration["id"])
        engine.sme_review(integration["id"], "endorse", "now convincing", actor_role="sme")
        engine.final_approval(integration["id"], actor_role="project_director")
        assert product_kpp_status(engine.model, pid)["approved_count"] == 1

    def test_final_approval_requires_project_director(self, engine):
        pid = _portfolio_with_product(engine)
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        engine.attach_evidence(integration["id"], "screenshot", "a.png", b"x")
        engine.submit_for_review(integration["id"])
        engine.sme_review(integration["id"], "endorse", "ok", actor_role="sme")
        for role in ("team", "area_lead", "sme"):
            with pytest.raises(RoleError):
                engine.final_approval(integration["id"], actor_role=role)

    def test_sme_review_requires_sme_role(self, engine):
        pid = _portfolio_with_product(engine)
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        engine.attach_evidence(integration["id"], "screenshot", "a.png", b"x")
        engine.submit_for_review(integration["id"])
        with pytest.raises(RoleError):
            engine.sme_review(integration["id"], "endorse", "ok", actor_role="team")

    def test_approval_only_reachable_through_endorsement(self, engine):
        pid = _portfolio_with_product(engine)
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        with pytest.raises(IllegalTransitionError):
            engine.final_approval(integration["id"], actor_role="project_director")
        engine.attach_evidence(integration["id"], "screenshot", "a.png", b"x")
        with pytest.raises(IllegalTransitionError):
            engine.final_approval(integration["id"], actor_role="project_director")
        engine.submit_for_review(integration["id"])
        with pytest.raises(IllegalTransitionError):
            engine.final_approval(integration["id"], actor_role="project_director")


class TestScoring:
    def test_goal_met_at_exact_threshold(self, engine):
        pid = _portfolio_with_product(engine, goal=4)
        for i in range(4):
            drive_to_approved(engine, pid, f"cap{i}", "client")
        status = product_kpp_status(engine.model, pid)
        assert status["met"] is True and status["approved_count"] == 4

    def test_goal_8_with_7_approved_not_met(self, engine):
        pid = _portfolio_with_product(engine, goal=8)
        for i in range(7):
            drive_to_approved(engine, pid, f"cap{i}", "client")
        assert product_kpp_status(engine.model, pid)["met"] is False

    def test_extra_approvals_keep_met_monotone(self, engine):
        pid = _portfolio_with_product(engine, goal=4)
        for i in range(5):
            drive_to_approved(engine, pid, f"cap{i}", "client")
        assert product_kpp_status(engine.model, pid)["met"] is True
        drive_to_approved(engine, pid, "cap-extra", "client")
        assert product_kpp_status(engine.model, pid)["met"] is True

    def test_portfolio_score_fraction_and_boundary(self, engine):
        engine.create_portfolio("X", 2019, 1)
        gid = engine.add_sdk_group("g")["id"]
        pids = [engine.add_product(gid, f"p{i}", 4)["id"] for i in range(4)]
        for pid in pids[:2]:
            for i in range(4):
                drive_to_approved(engine, pid, f"cap{i}", "client")
        score = portfolio_kpp_score(engine.model)
        assert score["fraction_met"] == "1/2"
        assert score["pass"] is True  # >= comparison at the boundary

    def test_zero_met_fails(self, engine):
        engine.create_portfolio("X", 2019, 1)
        gid = engine.add_sdk_group("g")["id"]
        for i in range(3):
            engine.add_product(gid, f"p{i}", 4)
        score = portfolio_kpp_score(engine.model)
        assert score["pass"] is False and score["fraction_met"] == "0"

    def test_empty_portfolio_diagnostic(self, engine):
        engine.create_portfolio("X", 2019, 1)
        score = portfolio_kpp_score(engine.model)
        assert score["pass"] is False and score["fraction_met"] is None
        assert "diagnostic" in score

    def test_environment_rule_when_enabled(self, engine):
        engine.create_portfolio("X", 2019, 1, PortfolioConfig(require_exascale_integration=True))
        gid = engine.add_sdk_group("g")["id"]
        pid = engine.add_product(gid, "p", 4)["id"]
        for i in range(4):
            drive_to_approved(engine, pid, f"cap{i}", "client", environment="pre_exascale")
        assert product_kpp_status(engine.model, pid)["met"] is False
        drive_to_approved(engine, pid, "cap-exa", "client", environment="exascale")
        assert product_kpp_status(engine.model, pid)["met"] is True

    def test_scale_fixture_matches_counting_oracle(self, scale):
        eng, _ = scale
        expected = kpp_counts(eng.model)
        for pid, want in expected["per_product"].items():
            got = product_kpp_status(eng.model, pid)
            assert (got["approved_count"], got["met"]) == (want["count"], want["met"])
        score = portfolio_kpp_score(eng.model)
        met = sum(1 for s in expected["per_product"].values() if s["met"])
        assert score["fraction_met"] == (
            str(Fraction(met, 70)) if Fraction(met, 70).denominator > 1 else str(met // 70)
        )


class TestEvidence:
    def test_digests_verify(self, engine):
        pid = _portfolio_with_product(engine)
        drive_to_approved(engine, pid, "cap", "client")
        assert verify_evidence(engine.model) == []

    def test_tampered_blob_detected(self, engine):
        pid = _portfolio_with_product(engine)
        drive_to_approved(engine, pid, "cap", "client")
        digest = next(iter(engine.model.evidence_blobs))
        engine.model.evidence_blobs[digest] = b"tampered"
        assert len(verify_evidence(engine.model)) == 1

    def test_ledger_csv_shape(self, engine):
        pid = _portfolio_with_product(engine)
        drive_to_approved(engine, pid, "cap", "client")
        text = integration_ledger_csv(engine.model)
        lines = text.strip().split("\n")
        assert lines[0] == "product,capability,client,environment,state,approved_date"
        assert len(lines) == 2
        assert "finally_approved" in lines[1]


class TestRandomizedOracle:
    def test_random_ledgers_match_brute_force(self):
        from milepost.engine import PortfolioEngine

        rng = random.Random(99)
        for trial in range(20):
            eng = PortfolioEngine(clock=lambda: "2020-01-01T00:00:00Z")
            eng.create_portfolio("X", 2020, 1)
            gid = eng.add_sdk_group("g")["id"]
            pids = [
                eng.add_product(gid, f"p{i}", rng.choice([4, 8]))["id"]
                for i in range(rng.randrange(2, 6))
            ]
            for pid in pids:
                for j in range(rng.randrange(0, 10)):
                    integration = eng.record_integration(
                        pid, f"cap{j // 2}", f"client{j % 3}", rng.choice(["pre_exascale", "exascale", "other"])
                    ) if (f"cap{j // 2}", f"client{j % 3}") not in {
                        (i.capability, i.client)
                        for i in eng.model.integrations.values()
                        if i.product_id == pid
                    } else None
                    if integration is None:
                        continue
                    depth = rng.randrange(0, 6)
                    if depth >= 1:
                        eng.attach_evidence(integration["id"], "screenshot", "e.png", b"e")
                    if depth >= 2:
                        eng.submit_for_review(integration["id"])
                    if depth >= 3 and rng.random() < 0.3:
                        eng.sme_review(integration["id"], "reject", "no", actor_role="sme")
                        eng.attach_evidence(integration["id"], "client_letter", "l.txt", b"l")
                        eng.submit_for_review(integration["id"])
                    if depth >= 3:
                        eng.sme_review(integration["id"], "endorse", "yes", actor_role="sme")
                    if depth >= 4:
                        eng.final_approval(integration["id"], actor_role="project_director")
            expected = kpp_counts(eng.model)
            for pid in pids:
                got = product_kpp_status(eng.model, pid)
                want = expected["per_product"][pid]
                assert (got["approved_count"], got["goal"], got["met"]) == (
                    want["count"],
                    want["goal"],
                    want["met"],
                )
