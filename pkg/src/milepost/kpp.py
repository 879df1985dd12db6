"""Capability-integration ledger: evidence, SME review, final approval,
and KPP scoring against per-product goals.

An integration counts toward the goal only once finally approved, and at
most once per distinct (capability, client) pair, so rework loops and
re-claims cannot inflate the score.
"""

from __future__ import annotations

import csv
import hashlib
import io
from fractions import Fraction

from .errors import (
    DuplicateError,
    IllegalTransitionError,
    RoleError,
    StaleValueError,
    ValidationError,
)
from .model import (
    EnvironmentClass,
    EvidenceArtifact,
    EvidenceKind,
    Integration,
    IntegrationState,
    Model,
    Role,
    parse_enum,
)
from .money import frac_str
from .registry import Ctx, command

INTEGRATION_EDGES = {
    (IntegrationState.PROPOSED, IntegrationState.EVIDENCE_ATTACHED),
    (IntegrationState.EVIDENCE_ATTACHED, IntegrationState.UNDER_SME_REVIEW),
    (IntegrationState.UNDER_SME_REVIEW, IntegrationState.SME_ENDORSED),
    (IntegrationState.UNDER_SME_REVIEW, IntegrationState.SME_REJECTED),
    (IntegrationState.SME_ENDORSED, IntegrationState.FINALLY_APPROVED),
    (IntegrationState.SME_REJECTED, IntegrationState.EVIDENCE_ATTACHED),  # rework
}


def _check_revision(entity, params: dict) -> None:
    expected = params.get("expected_revision")
    if expected is not None and int(expected) != entity.revision:
        raise StaleValueError(
            f"stale revision {expected} for {entity.id}; current is {entity.revision}"
        )


@command("record_integration")
def record_integration(model: Model, params: dict, ctx: Ctx) -> dict:
    product = model.get_product(params["product_id"])
    capability = (params.get("capability") or "").strip()
    client = (params.get("client") or "").strip()
    if not capability or not client:
        raise ValidationError("capability and client must be non-empty")
    for iid in product.integration_ids:
        other = model.integrations[iid]
        if other.capability == capability and other.client == client:
            raise DuplicateError(
                f"duplicate claim: ({capability!r}, {client!r}) already recorded as {other.id}"
            )
    integration = Integration(
        id=model.next_id("integration", "int"),
        product_id=product.id,
        capability=capability,
        client=client,
        environment_class=parse_enum(EnvironmentClass, params["environment_class"], "environment class"),
        sustainability_note=params.get("sustainability_note", ""),
    )
    model.integrations[integration.id] = integration
    product.integration_ids.append(integration.id)
    product.revision += 1
    return {"id": integration.id, "state": integration.state.value}


@command("attach_evidence")
def attach_evidence(model: Model, params: dict, ctx: Ctx) -> dict:
    integration = model.get_integration(params["integration_id"])
    _check_revision(integration, params)
    if integration.state not in (
        IntegrationState.PROPOSED,
        IntegrationState.EVIDENCE_ATTACHED,
        IntegrationState.SME_REJECTED,
    ):
        raise IllegalTransitionError(
            f"illegal transition: evidence cannot be attached while {integration.state.value}"
        )
    kind = parse_enum(EvidenceKind, params["kind"], "evidence kind")
    digest = params["content_digest"]
    size = int(params["size"])
    blob = model.evidence_blobs.get(digest)
    if blob is not None and hashlib.sha256(blob).hexdigest() != digest:
        raise ValidationError(f"evidence bytes do not match digest {digest}")
    artifact = EvidenceArtifact(
        id=model.next_id("evidence", "art"),
        integration_id=integration.id,
        kind=kind,
        uri_or_path=params["uri_or_path"],
        content_digest=digest,
        size=size,
        attached_at=ctx.timestamp,
    )
    model.evidence[artifact.id] = artifact
    integration.evidence_ids.append(artifact.id)
    if integration.state in (IntegrationState.PROPOSED, IntegrationState.SME_REJECTED):
        integration.state = IntegrationState.EVIDENCE_ATTACHED
    integration.revision += 1
    return {"id": artifact.id, "integration_id": integration.id, "state": integration.state.value}


@command("submit_for_review")
def submit_for_review(model: Model, params: dict, ctx: Ctx) -> dict:
    integration = model.get_integration(params["integration_id"])
    _check_revision(integration, params)
    if (integration.state, IntegrationState.UNDER_SME_REVIEW) not in INTEGRATION_EDGES:
        raise IllegalTransitionError(
            f"illegal transition: {integration.state.value} -> under_sme_review"
        )
    if not integration.evidence_ids:
        raise ValidationError(f"integration {integration.id} has no evidence attached")
    integration.state = IntegrationState.UNDER_SME_REVIEW
    integration.revision += 1
    return {"id": integration.id, "state": integration.state.value}


@command("sme_review")
def sme_review(model: Model, params: dict, ctx: Ctx) -> dict:
    integration = model.get_integration(params["integration_id"])
    _check_revision(integration, params)
    verdict = params["verdict"]
    if verdict not in ("endorse", "reject"):
        raise ValidationError(f"verdict must be 'endorse' or 'reject', got {verdict!r}")
    new_state = IntegrationState.SME_ENDORSED if verdict == "endorse" else IntegrationState.SME_REJECTED
    if (integration.state, new_state) not in INTEGRATION_EDGES:
        raise IllegalTransitionError(
            f"illegal transition: {integration.state.value} -> {new_state.value}"
        )
    if ctx.actor_role is not Role.SME:
        raise RoleError(f"SME review requires role sme, not {ctx.actor_role.value}")
    if not params.get("report"):
        raise ValidationError("an SME review requires a report")
    integration.sme_report = params["report"]
    integration.state = new_state
    integration.revision += 1
    return {"id": integration.id, "state": integration.state.value}


@command("final_approval")
def final_approval(model: Model, params: dict, ctx: Ctx) -> dict:
    integration = model.get_integration(params["integration_id"])
    _check_revision(integration, params)
    if (integration.state, IntegrationState.FINALLY_APPROVED) not in INTEGRATION_EDGES:
        raise IllegalTransitionError(
            f"illegal transition: {integration.state.value} -> finally_approved"
        )
    if ctx.actor_role is not Role.PROJECT_DIRECTOR:
        raise RoleError(
            f"final approval requires role project_director, not {ctx.actor_role.value}"
        )
    integration.state = IntegrationState.FINALLY_APPROVED
    integration.approved_at = ctx.timestamp
    integration.revision += 1
    return {"id": integration.id, "state": integration.state.value}


# ---------------------------------------------------------------------------
# Scoring (read-side)


def product_kpp_status(model: Model, product_id: str) -> dict:
    product = model.get_product(product_id)
    config = model.require_portfolio().config
    approved_pairs: set[tuple[str, str]] = set()
    environments: set[str] = set()
    for iid in product.integration_ids:
        integration = model.integrations[iid]
        if integration.state is IntegrationState.FINALLY_APPROVED:
            approved_pairs.add((integration.capability, integration.client))
            environments.add(integration.environment_class.value)
    count = len(approved_pairs)
    met = count >= product.kpp_goal
    if met and config.require_exascale_integration:
        met = EnvironmentClass.EXASCALE.value in environments
    return {
        "product_id": product.id,
        "approved_count": count,
        "goal": product.kpp_goal,
        "met": met,
        "environments_covered": sorted(environments),
    }


def portfolio_kpp_score(model: Model) -> dict:
    portfolio = model.require_portfolio()
    statuses = [product_kpp_status(model, pid) for pid in sorted(model.products)]
    total = len(statuses)
    if total == 0:
        return {
            "fraction_met": None,
            "pass": False,
            "per_product": [],
            "diagnostic": "portfolio has no products; fraction undefined",
        }
    met = sum(1 for s in statuses if s["met"])
    fraction = Fraction(met, total)
    return {
        "fraction_met": frac_str(fraction),
        "pass": fraction >= portfolio.config.kpp_portfolio_threshold,
        "per_product": statuses,
    }


def verify_evidence(model: Model) -> list[str]:
    """Digest check over every stored artifact; returns ids that fail."""
    bad = []
    for aid in sorted(model.evidence):
        artifact = model.evidence[aid]
        blob = model.evidence_blobs.get(artifact.content_digest)
        if blob is None or hashlib.sha256(blob).hexdigest() != artifact.content_digest:
            bad.append(aid)
    return bad


def integration_ledger_csv(model: Model) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["product", "capability", "client", "environment", "state", "approved_date"])
    for iid in sorted(model.integrations):
        integration = model.integrations[iid]
        approved = (integration.approved_at or "")[:10]
        writer.writerow(
            [
                model.products[integration.product_id].name,
                integration.capability,
                integration.client,
                integration.environment_class.value,
                integration.state.value,
                approved,
            ]
        )
    return buf.getvalue()
