"""Curated software-stack model: releases, community-policy checklists,
version-pinned manifests, and pairwise compatibility checking.

Compatibility is declared pairwise by version ranges; this is curation
bookkeeping, not a dependency resolver. Builds, caches, and containers are
manifest metadata only and are never executed.
"""

from __future__ import annotations

from .errors import DuplicateError, NotFoundError, ValidationError
from .model import (
    Constraint,
    InclusionRule,
    Model,
    PolicyChecklist,
    PolicyStatus,
    Release,
    StackManifest,
    Version,
    VersionRange,
    canonical_json,
    parse_enum,
)
from .registry import Ctx, command

MANIFEST_FORMAT = "milepost-manifest/1"


@command("register_release")
def register_release(model: Model, params: dict, ctx: Ctx) -> dict:
    product = model.get_product(params["product_id"])
    version = Version.parse(params["version"])
    by_version = model.releases.setdefault(product.id, {})
    if str(version) in by_version:
        raise DuplicateError(f"release {version} already registered for {product.id}")
    constraints = []
    for raw in params.get("constraints", []):
        other = model.get_product(raw["other_product_id"])
        constraints.append(Constraint(other.id, VersionRange.parse(raw["allowed"])))
    release = Release(
        product_id=product.id,
        version=version,
        released_at=ctx.timestamp,
        constraints=constraints,
    )
    by_version[str(version)] = release
    product.releases.append(str(version))
    product.revision += 1
    return {"product_id": product.id, "version": str(version)}


@command("record_policy_checklist")
def record_policy_checklist(model: Model, params: dict, ctx: Ctx) -> dict:
    product = model.get_product(params["product_id"])
    items = params["items"]
    expected = set(model.policy_set)
    got = set(items)
    if got != expected:
        missing = ", ".join(sorted(expected - got)) or "none"
        extra = ", ".join(sorted(got - expected)) or "none"
        raise ValidationError(
            f"checklist must cover each configured policy exactly once "
            f"(missing: {missing}; unknown: {extra})"
        )
    normalized = {}
    for policy_id, entry in items.items():
        status = parse_enum(PolicyStatus, entry["status"], "policy status")
        normalized[policy_id] = {"status": status.value, "note": entry.get("note", "")}
    existing = model.policy_checklists.get(product.id)
    revision = existing.revision + 1 if existing else 1
    model.policy_checklists[product.id] = PolicyChecklist(
        product_id=product.id, items=normalized, revision=revision
    )
    return {"product_id": product.id, "items": len(normalized)}


def check_policies(model: Model, product_id: str, allow_waivers: bool = False) -> dict:
    product = model.get_product(product_id)
    checklist = model.policy_checklists.get(product.id)
    if checklist is None:
        raise NotFoundError(f"no policy checklist recorded for {product.id}")
    expected = set(model.policy_set)
    got = set(checklist.items)
    if got != expected:
        raise ValidationError(
            f"checklist for {product.id} missing items: {', '.join(sorted(expected - got))}"
        )
    acceptable = {PolicyStatus.MET.value}
    if allow_waivers:
        acceptable.add(PolicyStatus.WAIVED.value)
    unmet = sorted(
        pid for pid, entry in checklist.items.items() if entry["status"] not in acceptable
    )
    return {"product_id": product.id, "compliant": not unmet, "unmet": unmet}


@command("compose_manifest")
def compose_manifest(model: Model, params: dict, ctx: Ctx) -> dict:
    name = params["name"]
    if not name:
        raise ValidationError("manifest name must be non-empty")
    if name in model.manifests:
        raise DuplicateError(f"manifest {name!r} already exists")
    rule = parse_enum(InclusionRule, params["inclusion_rule"], "inclusion rule")
    allow_waivers = rule is InclusionRule.ALLOW_WAIVERS
    pins: dict[str, str] = {}
    for product_id, version_text in params["pins"].items():
        product = model.get_product(product_id)
        version = str(Version.parse(version_text))
        if version not in model.releases.get(product.id, {}):
            raise NotFoundError(f"unknown release {version} for {product.id}")
        if product.id in pins:
            raise DuplicateError(f"product {product.id} pinned twice")
        compliance = check_policies(model, product.id, allow_waivers=allow_waivers)
        if not compliance["compliant"]:
            raise ValidationError(
                f"product {product.id} ({product.name}) violates the inclusion rule; "
                f"unmet policies: {', '.join(compliance['unmet'])}"
            )
        pins[product.id] = version
    manifest = StackManifest(
        name=name,
        stack_version=params["stack_version"],
        pins=pins,
        inclusion_rule=rule,
        created_at=ctx.timestamp,
        metadata=dict(params.get("metadata", {})),
    )
    model.manifests[name] = manifest
    return {"name": name, "stack_version": manifest.stack_version, "pins": len(pins)}


def check_compatibility(model: Model, manifest_name: str) -> list[dict]:
    """Every pinned release's constraints against every other pinned
    product; an empty list means the manifest is internally compatible."""
    manifest = model.manifests.get(manifest_name)
    if manifest is None:
        raise NotFoundError(f"unknown manifest {manifest_name!r}")
    conflicts = []
    for product_id in sorted(manifest.pins):
        release = model.releases[product_id][manifest.pins[product_id]]
        for constraint in release.constraints:
            pinned = manifest.pins.get(constraint.other_product_id)
            if pinned is None:
                continue
            if not constraint.allowed.contains(Version.parse(pinned)):
                conflicts.append(
                    {
                        "from": product_id,
                        "to": constraint.other_product_id,
                        "pinned_version": pinned,
                        "allowed_range": str(constraint.allowed),
                    }
                )
    return conflicts


# ---------------------------------------------------------------------------
# Canonical manifest file form


def manifest_text(manifest: StackManifest) -> str:
    from . import __version__

    payload = {
        "format": MANIFEST_FORMAT,
        "tool": {"name": "milepost", "version": __version__},
        "manifest": manifest.to_dict(),
    }
    return canonical_json(payload) + "\n"


def parse_manifest_text(text: str) -> StackManifest:
    import json

    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed manifest file: {exc}") from exc
    if payload.get("format") != MANIFEST_FORMAT:
        raise ValidationError(f"unsupported manifest format {payload.get('format')!r}")
    return StackManifest.from_dict(payload["manifest"])
