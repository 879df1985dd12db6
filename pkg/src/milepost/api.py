"""HTTP surface for the dashboard and scripts.

Reads are served from the live model under the engine lock; every mutation
funnels through the engine's command log. Mutating endpoints require an
X-Actor-Role header, and transition payloads may carry the entity revision
they were rendered from — a mismatch comes back as 409 rather than a lost
update.
"""

from __future__ import annotations

from fastapi import FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from . import __version__
from .engine import PortfolioEngine
from .errors import (
    DuplicateError,
    EngineError,
    IllegalTransitionError,
    NotFoundError,
    PhaseError,
    RoleError,
    StaleValueError,
    ValidationError,
)
from .evm import detect_struggling, index_series, rollup
from .kpp import portfolio_kpp_score
from .lifecycle import car_text
from .model import EvidenceKind, EvmSnapshot, validate_hierarchy
from .money import format_index, format_money
from .planning import in_progress_set

_STATUS_BY_ERROR = (
    (StaleValueError, 409),
    (RoleError, 403),
    (NotFoundError, 404),
    (DuplicateError, 400),
    (IllegalTransitionError, 400),
    (PhaseError, 400),
    (ValidationError, 400),
)

_EVIDENCE_MEDIA_TYPES = {
    EvidenceKind.SCREENSHOT: "image/png",
    EvidenceKind.CLIENT_LETTER: "text/plain; charset=utf-8",
    EvidenceKind.TEST_OUTPUT: "text/plain; charset=utf-8",
    EvidenceKind.LINK: "text/uri-list",
}


def _status_for(exc: EngineError) -> int:
    for cls, status in _STATUS_BY_ERROR:
        if isinstance(exc, cls):
            return status
    return 500


def snapshot_payload(engine: PortfolioEngine, snap: EvmSnapshot) -> dict:
    period = engine.model.horizon.period_at(snap.period_index)
    return {
        "node_id": snap.node_id,
        "period": str(period),
        "pv": format_money(snap.pv),
        "ev": format_money(snap.ev),
        "ac": format_money(snap.ac),
        "cpi": format_index(snap.cpi) or None,
        "spi": format_index(snap.spi) or None,
        "cv": format_money(snap.cv),
        "sv": format_money(snap.sv),
        "exact": snap.to_dict(),
    }


def _config_payload(engine: PortfolioEngine) -> dict:
    config = engine.model.require_portfolio().config
    payload = config.to_dict()
    payload["cpi_alert_threshold_display"] = format_index(config.cpi_alert_threshold)
    payload["spi_alert_threshold_display"] = format_index(config.spi_alert_threshold)
    return payload


def create_app(engine: PortfolioEngine) -> FastAPI:
    app = FastAPI(title="milepost", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        return JSONResponse(
            status_code=_status_for(exc), content={"error": exc.code, "message": exc.message}
        )

    def _require_role(value: str | None) -> str:
        if not value:
            raise RoleError("mutating requests require the X-Actor-Role header")
        return value

    # -- portfolio tree -----------------------------------------------------

    @app.get("/portfolio")
    def get_portfolio():
        with engine.lock:
            portfolio = engine.model.require_portfolio()
            return {
                "portfolio": portfolio.to_dict(),
                "config": _config_payload(engine),
                "groups": [engine.model.groups[gid].to_dict() for gid in portfolio.group_ids],
                "products": [engine.model.products[pid].to_dict() for pid in sorted(engine.model.products)],
                "violations": [v.to_dict() for v in validate_hierarchy(engine.model)],
            }

    # -- evm ----------------------------------------------------------------

    @app.get("/evm/{node_id}/series")
    def get_series(node_id: str, start: str, end: str):
        with engine.lock:
            snaps = index_series(
                engine.model, node_id, engine.period_index(start), engine.period_index(end)
            )
            return {"node_id": node_id, "series": [snapshot_payload(engine, s) for s in snaps]}

    @app.get("/evm/{node_id}/{period}")
    def get_rollup(node_id: str, period: str):
        with engine.lock:
            snap = rollup(engine.model, node_id, engine.period_index(period))
            return snapshot_payload(engine, snap)

    @app.get("/alerts/{period}")
    def get_alerts(period: str):
        with engine.lock:
            idx = engine.period_index(period)
            return {
                "period": period,
                "flags": detect_struggling(engine.model, idx),
                "wavefront_count": len(in_progress_set(engine.model, idx)),
            }

    # -- change requests ----------------------------------------------------

    @app.get("/change-requests")
    def list_change_requests(state: str | None = None):
        with engine.lock:
            out = []
            for cr_id in sorted(engine.model.change_requests):
                cr = engine.model.change_requests[cr_id]
                if state is None or cr.state.value == state:
                    payload = cr.to_dict()
                    payload["approver_role"] = cr.approver_role.value
                    out.append(payload)
            return {"change_requests": out}

    @app.post("/change-requests", status_code=201)
    def post_change_request(body: dict, x_actor_role: str | None = Header(default=None)):
        role = _require_role(x_actor_role)
        return engine.propose_change(
            targets=body.get("targets", []),
            rationale=body.get("rationale", ""),
            level=body.get("level", "L1"),
            effective_period=body.get("effective_period", ""),
            actor_role=role,
        )

    @app.post("/change-requests/{cr_id}/transition")
    def transition_change_request(
        cr_id: str, body: dict, x_actor_role: str | None = Header(default=None)
    ):
        role = _require_role(x_actor_role)
        action = body.get("action")
        revision = body.get("revision")
        if action == "submit":
            return engine.submit_change(cr_id, expected_revision=revision, actor_role=role)
        if action in ("approve", "reject"):
            return engine.review_change(
                cr_id,
                verdict=action,
                note=body.get("note", ""),
                expected_revision=revision,
                actor_role=role,
            )
        if action == "apply":
            return engine.apply_change(cr_id, expected_revision=revision, actor_role=role)
        raise ValidationError(f"unknown transition action {action!r}")

    # -- integrations -------------------------------------------------------

    def _integration_payload(iid: str) -> dict:
        integration = engine.model.integrations[iid]
        payload = integration.to_dict()
        payload["evidence"] = [
            engine.model.evidence[aid].to_dict() for aid in integration.evidence_ids
        ]
        return payload

    @app.get("/integrations")
    def list_integrations(product_id: str | None = None, state: str | None = None):
        with engine.lock:
            out = []
            for iid in sorted(engine.model.integrations):
                integration = engine.model.integrations[iid]
                if product_id is not None and integration.product_id != product_id:
                    continue
                if state is not None and integration.state.value != state:
                    continue
                out.append(_integration_payload(iid))
            return {"integrations": out}

    @app.get("/integrations/{integration_id}")
    def get_integration(integration_id: str):
        with engine.lock:
            engine.model.get_integration(integration_id)
            return _integration_payload(integration_id)

    @app.post("/integrations", status_code=201)
    def post_integration(body: dict, x_actor_role: str | None = Header(default=None)):
        role = _require_role(x_actor_role)
        return engine.record_integration(
            product_id=body.get("product_id", ""),
            capability=body.get("capability", ""),
            client=body.get("client", ""),
            environment_class=body.get("environment_class", "pre_exascale"),
            sustainability_note=body.get("sustainability_note", ""),
            actor_role=role,
        )

    @app.post("/integrations/{integration_id}/transition")
    def transition_integration(
        integration_id: str, body: dict, x_actor_role: str | None = Header(default=None)
    ):
        role = _require_role(x_actor_role)
        action = body.get("action")
        revision = body.get("revision")
        if action == "attach_evidence":
            content = body.get("content")
            return engine.attach_evidence(
                integration_id,
                kind=body.get("kind", "link"),
                uri_or_path=body.get("uri_or_path", ""),
                content=content.encode("utf-8") if isinstance(content, str) else None,
                expected_revision=revision,
                actor_role=role,
            )
        if action == "submit":
            return engine.submit_for_review(integration_id, expected_revision=revision, actor_role=role)
        if action in ("endorse", "reject"):
            return engine.sme_review(
                integration_id,
                verdict=action,
                report=body.get("report", ""),
                expected_revision=revision,
                actor_role=role,
            )
        if action == "approve":
            return engine.final_approval(integration_id, expected_revision=revision, actor_role=role)
        raise ValidationError(f"unknown transition action {action!r}")

    @app.get("/evidence/{digest}")
    def get_evidence(digest: str):
        with engine.lock:
            blob = engine.model.evidence_blobs.get(digest)
            if blob is None:
                raise NotFoundError(f"unknown evidence blob {digest}")
            media_type = "application/octet-stream"
            for artifact in engine.model.evidence.values():
                if artifact.content_digest == digest:
                    media_type = _EVIDENCE_MEDIA_TYPES[artifact.kind]
                    break
            return Response(content=blob, media_type=media_type)

    # -- kpp, reports, stack --------------------------------------------------

    @app.get("/kpp")
    def get_kpp():
        with engine.lock:
            return portfolio_kpp_score(engine.model)

    @app.get("/car/{fiscal_year}")
    def get_car(fiscal_year: int, format: str = "json"):
        with engine.lock:
            document = engine.model.car_documents.get(fiscal_year)
            if document is None:
                raise NotFoundError(f"no report generated for FY{fiscal_year}")
            if format == "text":
                return PlainTextResponse(car_text(document))
            return document.to_dict()

    @app.get("/stack/manifests")
    def get_manifests():
        with engine.lock:
            return {
                "manifests": [
                    engine.model.manifests[name].to_dict() for name in sorted(engine.model.manifests)
                ]
            }

    return app
