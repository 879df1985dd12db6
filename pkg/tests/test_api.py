import threading

import pytest
from fastapi.testclient import TestClient

from milepost.api import create_app
from milepost.engine import PortfolioEngine

from conftest import baselined_activity
from test_kpp import drive_to_approved


@pytest.fixture
def api(engine):
    pid, pkg, aids = baselined_activity(engine)
    engine.start_activity(aids[0], "2019-01")
    engine.record_actual_cost(aids[0], "2019-01", 10000)
    engine.complete_milestone(aids[0], "2019-03")
    app = create_app(engine)
    with TestClient(app) as client:
        yield engine, client, pid, aids


class TestReadEndpoints:
    def test_rollup_schema(self, api):
        engine, client, pid, aids = api
        body = client.get("/evm/portfolio/2019-06").json()
        for field in ("pv", "ev", "ac", "cpi", "spi", "cv", "sv"):
            assert field in body
        # two of the four quarterly activities are fully planned by month 6
        assert body["pv"] == "60000.00"

    def test_series_endpoint(self, api):
        engine, client, pid, aids = api
        body = client.get(f"/evm/{pid}/series", params={"start": "2019-01", "end": "2019-06"}).json()
        assert len(body["series"]) == 6

    def test_alerts_endpoint(self, api):
        engine, client, pid, aids = api
        body = client.get("/alerts/2019-06").json()
        assert "flags" in body and "wavefront_count" in body

    def test_portfolio_tree(self, api):
        engine, client, pid, aids = api
        body = client.get("/portfolio").json()
        assert body["portfolio"]["name"] == "T"
        assert len(body["products"]) == 1
        assert body["violations"] == []
        assert body["config"]["cpi_alert_threshold_display"] == "0.9000"

    def test_unknown_node_404(self, api):
        engine, client, pid, aids = api
        assert client.get("/evm/nope/2019-01").status_code == 404

    def test_bad_period_400(self, api):
        engine, client, pid, aids = api
        assert client.get("/evm/portfolio/junk").status_code == 400

    def test_kpp_endpoint(self, api):
        engine, client, pid, aids = api
        drive_to_approved(engine, pid, "cap", "client")
        body = client.get("/kpp").json()
        assert body["per_product"][0]["approved_count"] == 1

    def test_car_missing_404_then_available(self, api):
        engine, client, pid, aids = api
        assert client.get("/car/2019").status_code == 404
        engine.advance_phase(2019, "execution")
        engine.advance_phase(2019, "reporting")
        engine.generate_car(2019)
        body = client.get("/car/2019").json()
        assert len(body["sections"]) == 1
        text = client.get("/car/2019", params={"format": "text"}).text
        assert text.startswith("CAPABILITY ASSESSMENT REPORT")

    def test_manifest_listing(self, api):
        engine, client, pid, aids = api
        items = {policy_id: {"status": "met", "note": ""} for policy_id in engine.model.policy_set}
        engine.record_policy_checklist(pid, items)
        engine.register_release(pid, "1.0.0")
        engine.compose_manifest("s", "1", {pid: "1.0.0"})
        body = client.get("/stack/manifests").json()
        assert len(body["manifests"]) == 1


class TestRoleEnforcement:
    def test_missing_role_header_403(self, api):
        engine, client, pid, aids = api
        response = client.post(
            "/integrations",
            json={"product_id": pid, "capability": "c", "client": "x", "environment_class": "other"},
        )
        assert response.status_code == 403

    def test_wrong_role_on_transition_403(self, api):
        engine, client, pid, aids = api
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        engine.attach_evidence(integration["id"], "screenshot", "a.png", b"x")
        engine.submit_for_review(integration["id"])
        response = client.post(
            f"/integrations/{integration['id']}/transition",
            json={"action": "endorse", "report": "r"},
            headers={"X-Actor-Role": "team"},
        )
        assert response.status_code == 403
        assert response.json()["error"] == "role_mismatch"

    def test_cr_review_role_enforced(self, api):
        engine, client, pid, aids = api
        cr = engine.propose_change(
            targets=[{"entity_id": aids[1], "field": "baseline_end", "new_value": "2019-07"}],
            rationale="r",
            level="L1",
            effective_period="2019-05",
        )
        engine.submit_change(cr["id"])
        response = client.post(
            f"/change-requests/{cr['id']}/transition",
            json={"action": "approve"},
            headers={"X-Actor-Role": "sme"},
        )
        assert response.status_code == 403


class TestWorkflowsOverHttp:
    def test_integration_full_path(self, api):
        engine, client, pid, aids = api
        created = client.post(
            "/integrations",
            json={
                "product_id": pid,
                "capability": "compression in app",
                "client": "app",
                "environment_class": "pre_exascale",
            },
            headers={"X-Actor-Role": "team"},
        ).json()
        iid = created["id"]
        steps = [
            (
                {"action": "attach_evidence", "kind": "screenshot", "uri_or_path": "s.png", "content": "pngdata"},
                "team",
            ),
            ({"action": "submit"}, "team"),
            ({"action": "endorse", "report": "verified"}, "sme"),
            ({"action": "approve"}, "project_director"),
        ]
        for body, role in steps:
            response = client.post(
                f"/integrations/{iid}/transition", json=body, headers={"X-Actor-Role": role}
            )
            assert response.status_code == 200, response.text
        assert client.get(f"/integrations/{iid}").json()["state"] == "finally_approved"

    def test_evidence_bytes_served_with_media_type(self, api):
        engine, client, pid, aids = api
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        engine.attach_evidence(integration["id"], "screenshot", "shot.png", b"png-bytes")
        digest = engine.model.evidence[
            engine.model.integrations[integration["id"]].evidence_ids[0]
        ].content_digest
        response = client.get(f"/evidence/{digest}")
        assert response.status_code == 200
        assert response.content == b"png-bytes"
        assert response.headers["content-type"] == "image/png"

    def test_cr_list_filter_and_transition(self, api):
        engine, client, pid, aids = api
        created = client.post(
            "/change-requests",
            json={
                "targets": [{"entity_id": aids[1], "field": "baseline_end", "new_value": "2019-08"}],
                "rationale": "slip",
                "level": "L1",
                "effective_period": "2019-05",
            },
            headers={"X-Actor-Role": "team"},
        )
        assert created.status_code == 201
        cr_id = created.json()["id"]
        client.post(
            f"/change-requests/{cr_id}/transition",
            json={"action": "submit"},
            headers={"X-Actor-Role": "team"},
        )
        pending = client.get("/change-requests", params={"state": "under_review"}).json()
        assert [c["id"] for c in pending["change_requests"]] == [cr_id]

    def test_unknown_integration_404(self, api):
        engine, client, pid, aids = api
        response = client.post(
            "/integrations/int-9999/transition",
            json={"action": "submit"},
            headers={"X-Actor-Role": "team"},
        )
        assert response.status_code == 404


class TestOptimisticConcurrency:
    def test_stale_revision_409(self, api):
        engine, client, pid, aids = api
        integration = engine.record_integration(pid, "cap", "client", "pre_exascale")
        response = client.post(
            f"/integrations/{integration['id']}/transition",
            json={
                "action": "attach_evidence",
                "kind": "link",
                "uri_or_path": "http://x",
                "revision": 999,
            },
            headers={"X-Actor-Role": "team"},
        )
        assert response.status_code == 409

    def test_concurrent_conflicting_applies_one_wins(self, api):
        """Two racing applies carrying the same revision: exactly one 200
        and one 409."""
        engine, client, pid, aids = api
        cr = engine.propose_change(
            targets=[{"entity_id": aids[1], "field": "baseline_end", "new_value": "2019-09"}],
            rationale="r",
            level="L1",
            effective_period="2019-05",
        )
        engine.submit_change(cr["id"])
        engine.review_change(cr["id"], "approve", actor_role="area_lead")
        revision = engine.model.change_requests[cr["id"]].revision

        statuses: list[int] = []
        barrier = threading.Barrier(2)

        def apply_once():
            barrier.wait()
            response = client.post(
                f"/change-requests/{cr['id']}/transition",
                json={"action": "apply", "revision": revision},
                headers={"X-Actor-Role": "team"},
            )
            statuses.append(response.status_code)

        threads = [threading.Thread(target=apply_once) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(statuses) == [200, 409]
