"""Single-writer front door for every mutation.

`PortfolioEngine.execute` validates, applies, and logs exactly one command:
handlers are deterministic functions of (model, params, context), so a
replay of the command log rebuilds the model and every derived artifact.
Failed operations raise before any mutation or disk write happens.
"""

from __future__ import annotations

import hashlib
import os
import threading
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import store as diskstore
from .errors import StoreError
from .model import (
    CommandLogEntry,
    Model,
    Period,
    PortfolioConfig,
    Role,
    canonical_json,
    parse_enum,
)
from .money import frac_str, parse_ratio
from .registry import Ctx, get_handler

# handler modules register their commands on import
from . import hierarchy as _hierarchy  # noqa: F401
from . import kpp as _kpp  # noqa: F401
from . import lifecycle as _lifecycle  # noqa: F401
from . import planning as _planning  # noqa: F401
from . import stack as _stack  # noqa: F401

CLOCK_ENV = "MILEPOST_CLOCK"


def _default_clock() -> str:
    fixed = os.environ.get(CLOCK_ENV)
    if fixed:
        return fixed
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def result_digest(result: dict) -> str:
    return hashlib.sha256(canonical_json(result).encode("utf-8")).hexdigest()


def _money_param(value) -> str:
    return frac_str(parse_ratio(value))


class PortfolioEngine:
    """Owns the model; all writes are serialized through `execute`."""

    def __init__(self, store_dir: str | Path | None = None, clock: Callable[[], str] | None = None):
        self.model = Model()
        self.lock = threading.RLock()
        self._clock = clock or _default_clock
        self._store_dir: Path | None = Path(store_dir) if store_dir else None
        if self._store_dir is not None:
            diskstore.init_store_dirs(self._store_dir)

    # -- core dispatch -------------------------------------------------------

    def _now(self) -> str:
        return self._clock()

    def execute(self, operation: str, params: dict, actor_role: str | Role = Role.TEAM) -> dict:
        handler = get_handler(operation)
        role = actor_role if isinstance(actor_role, Role) else parse_enum(Role, actor_role, "actor role")
        with self.lock:
            ctx = Ctx(
                timestamp=self._now(),
                sequence_number=len(self.model.command_log) + 1,
                actor_role=role,
            )
            result = handler(self.model, params, ctx)
            entry = CommandLogEntry(
                sequence_number=ctx.sequence_number,
                operation=operation,
                parameters=params,
                actor_role=role.value,
                timestamp=ctx.timestamp,
                result_digest=result_digest(result),
            )
            self.model.command_log.append(entry)
            if self._store_dir is not None:
                diskstore.append_log_entry(self._store_dir, entry)
                for digest, data in ctx.new_blobs:
                    diskstore.write_blob(self._store_dir, digest, data)
            return result

    def _replay_entry(self, entry: CommandLogEntry) -> None:
        handler = get_handler(entry.operation)
        ctx = Ctx(
            timestamp=entry.timestamp,
            sequence_number=entry.sequence_number,
            actor_role=parse_enum(Role, entry.actor_role, "actor role"),
        )
        result = handler(self.model, entry.parameters, ctx)
        digest = result_digest(result)
        if digest != entry.result_digest:
            raise StoreError(
                f"replay diverged at sequence {entry.sequence_number} "
                f"({entry.operation}): digest {digest} != recorded {entry.result_digest}"
            )
        self.model.command_log.append(entry)

    @classmethod
    def replay(
        cls,
        entries: list[CommandLogEntry],
        evidence_blobs: dict[str, bytes] | None = None,
        clock: Callable[[], str] | None = None,
    ) -> "PortfolioEngine":
        """Rebuild a fresh engine purely from logged commands, verifying
        every recorded result digest along the way."""
        engine = cls(clock=clock)
        for entry in entries:
            engine._replay_entry(entry)
        if evidence_blobs:
            engine.model.evidence_blobs.update(evidence_blobs)
        return engine

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path | None = None) -> Path:
        target = Path(path) if path is not None else self._store_dir
        if target is None:
            raise StoreError("no store directory bound and no path given")
        with self.lock:
            diskstore.init_store_dirs(target)
            diskstore.write_snapshot(target, self.model.to_dict())
            diskstore.rewrite_log(target, self.model.command_log)
            for digest, data in self.model.evidence_blobs.items():
                diskstore.write_blob(target, digest, data)
        return target

    @classmethod
    def load(cls, path: str | Path, clock: Callable[[], str] | None = None) -> "PortfolioEngine":
        root = Path(path)
        if not root.is_dir():
            raise StoreError(f"store directory {root} does not exist")
        snapshot = diskstore.read_snapshot(root)
        entries = diskstore.read_log_entries(root)
        blobs = diskstore.read_blobs(root)
        engine = cls(clock=clock)
        if snapshot is not None:
            engine.model = Model.from_dict(snapshot)
        known = len(engine.model.command_log)
        for entry in entries[known:]:
            engine._replay_entry(entry)
        engine.model.evidence_blobs.update(blobs)
        engine._store_dir = root
        return engine

    @classmethod
    def open(cls, path: str | Path, clock: Callable[[], str] | None = None) -> "PortfolioEngine":
        """Load an existing store or initialize an empty one at `path`."""
        root = Path(path)
        if root.is_dir() and (diskstore.snapshot_path(root).exists() or diskstore.log_path(root).exists()):
            return cls.load(root, clock=clock)
        engine = cls(store_dir=root, clock=clock)
        return engine

    def model_digest(self) -> str:
        return hashlib.sha256(canonical_json(self.model.to_dict()).encode("utf-8")).hexdigest()

    # -- calendar helpers ----------------------------------------------------

    def period_index(self, period: str | Period) -> int:
        p = period if isinstance(period, Period) else Period.parse(period)
        return self.model.horizon.index_of(p)

    # -- hierarchy -----------------------------------------------------------

    def create_portfolio(
        self,
        name: str,
        start_fy: int,
        years: int,
        config: PortfolioConfig | None = None,
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        cfg = config or PortfolioConfig()
        cfg.validate()
        return self.execute(
            "create_portfolio",
            {"name": name, "start_fy": start_fy, "years": years, "config": cfg.to_dict()},
            actor_role,
        )

    def add_sdk_group(self, name: str, actor_role: str | Role = Role.TEAM) -> dict:
        return self.execute("add_sdk_group", {"name": name}, actor_role)

    def add_product(
        self,
        group_id: str,
        name: str,
        kpp_goal: int,
        team_name: str = "",
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        return self.execute(
            "add_product",
            {"group_id": group_id, "name": name, "kpp_goal": kpp_goal, "team_name": team_name},
            actor_role,
        )

    # -- planning ------------------------------------------------------------

    def create_planning_package(
        self,
        product_id: str,
        fiscal_year: int,
        narrative: str,
        annual_budget,
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        return self.execute(
            "create_planning_package",
            {
                "product_id": product_id,
                "fiscal_year": fiscal_year,
                "narrative": narrative,
                "annual_budget": _money_param(annual_budget),
            },
            actor_role,
        )

    def update_package(
        self,
        package_id: str,
        narrative: str | None = None,
        annual_budget=None,
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        return self.execute(
            "update_package",
            {
                "package_id": package_id,
                "narrative": narrative,
                "annual_budget": _money_param(annual_budget) if annual_budget is not None else None,
            },
            actor_role,
        )

    def refine_package(
        self, package_id: str, activity_specs: list[dict], actor_role: str | Role = Role.TEAM
    ) -> dict:
        specs = []
        for spec in activity_specs:
            specs.append(
                {
                    "title": spec["title"],
                    "scope_text": spec.get("scope_text", ""),
                    "budget_fraction": frac_str(parse_ratio(spec["budget_fraction"])),
                    "baseline_start": str(spec["baseline_start"]),
                    "baseline_end": str(spec["baseline_end"]),
                }
            )
        return self.execute(
            "refine_package", {"package_id": package_id, "activity_specs": specs}, actor_role
        )

    def finalize_activity(
        self,
        activity_id: str,
        completion_criteria: str,
        staffing_note: str = "",
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        return self.execute(
            "finalize_activity",
            {
                "activity_id": activity_id,
                "completion_criteria": completion_criteria,
                "staffing_note": staffing_note,
            },
            actor_role,
        )

    def update_activity(self, activity_id: str, actor_role: str | Role = Role.TEAM, **fields) -> dict:
        params = {"activity_id": activity_id}
        params.update({k: (str(v) if v is not None else None) for k, v in fields.items()})
        return self.execute("update_activity", params, actor_role)

    def baseline(self, fiscal_year: int, actor_role: str | Role = Role.TEAM) -> dict:
        return self.execute("baseline", {"fiscal_year": fiscal_year}, actor_role)

    def propose_change(
        self,
        targets: list[dict],
        rationale: str,
        level: str,
        effective_period: str,
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        normalized = [
            {"entity_id": t["entity_id"], "field": t["field"], "new_value": str(t["new_value"])}
            for t in targets
        ]
        return self.execute(
            "propose_change",
            {
                "targets": normalized,
                "rationale": rationale,
                "level": level,
                "effective_period": str(effective_period),
            },
            actor_role,
        )

    def submit_change(
        self, cr_id: str, expected_revision: int | None = None, actor_role: str | Role = Role.TEAM
    ) -> dict:
        return self.execute(
            "submit_change", {"cr_id": cr_id, "expected_revision": expected_revision}, actor_role
        )

    def review_change(
        self,
        cr_id: str,
        verdict: str,
        note: str = "",
        expected_revision: int | None = None,
        actor_role: str | Role = Role.AREA_LEAD,
    ) -> dict:
        return self.execute(
            "review_change",
            {"cr_id": cr_id, "verdict": verdict, "note": note, "expected_revision": expected_revision},
            actor_role,
        )

    def apply_change(
        self, cr_id: str, expected_revision: int | None = None, actor_role: str | Role = Role.TEAM
    ) -> dict:
        return self.execute(
            "apply_change", {"cr_id": cr_id, "expected_revision": expected_revision}, actor_role
        )

    def start_activity(self, activity_id: str, period: str, actor_role: str | Role = Role.TEAM) -> dict:
        return self.execute(
            "start_activity", {"activity_id": activity_id, "period": str(period)}, actor_role
        )

    def complete_milestone(
        self, activity_id: str, period: str, actor_role: str | Role = Role.TEAM
    ) -> dict:
        return self.execute(
            "complete_milestone", {"activity_id": activity_id, "period": str(period)}, actor_role
        )

    def record_actual_cost(
        self, activity_id: str, period: str, amount, actor_role: str | Role = Role.TEAM
    ) -> dict:
        return self.execute(
            "record_actual_cost",
            {"activity_id": activity_id, "period": str(period), "amount": _money_param(amount)},
            actor_role,
        )

    def record_progress(
        self, activity_id: str, period: str, fraction, actor_role: str | Role = Role.TEAM
    ) -> dict:
        return self.execute(
            "record_progress",
            {"activity_id": activity_id, "period": str(period), "fraction": _money_param(fraction)},
            actor_role,
        )

    # -- kpp -----------------------------------------------------------------

    def record_integration(
        self,
        product_id: str,
        capability: str,
        client: str,
        environment_class: str,
        sustainability_note: str = "",
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        return self.execute(
            "record_integration",
            {
                "product_id": product_id,
                "capability": capability,
                "client": client,
                "environment_class": environment_class,
                "sustainability_note": sustainability_note,
            },
            actor_role,
        )

    def attach_evidence(
        self,
        integration_id: str,
        kind: str,
        uri_or_path: str,
        content: bytes | None = None,
        expected_revision: int | None = None,
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        data = content if content is not None else uri_or_path.encode("utf-8")
        digest = hashlib.sha256(data).hexdigest()
        with self.lock:
            result = self.execute(
                "attach_evidence",
                {
                    "integration_id": integration_id,
                    "kind": kind,
                    "uri_or_path": uri_or_path,
                    "content_digest": digest,
                    "size": len(data),
                    "expected_revision": expected_revision,
                },
                actor_role,
            )
            self.model.evidence_blobs.setdefault(digest, data)
            if self._store_dir is not None:
                diskstore.write_blob(self._store_dir, digest, data)
            return result

    def submit_for_review(
        self, integration_id: str, expected_revision: int | None = None, actor_role: str | Role = Role.TEAM
    ) -> dict:
        return self.execute(
            "submit_for_review",
            {"integration_id": integration_id, "expected_revision": expected_revision},
            actor_role,
        )

    def sme_review(
        self,
        integration_id: str,
        verdict: str,
        report: str,
        expected_revision: int | None = None,
        actor_role: str | Role = Role.SME,
    ) -> dict:
        return self.execute(
            "sme_review",
            {
                "integration_id": integration_id,
                "verdict": verdict,
                "report": report,
                "expected_revision": expected_revision,
            },
            actor_role,
        )

    def final_approval(
        self,
        integration_id: str,
        expected_revision: int | None = None,
        actor_role: str | Role = Role.PROJECT_DIRECTOR,
    ) -> dict:
        return self.execute(
            "final_approval",
            {"integration_id": integration_id, "expected_revision": expected_revision},
            actor_role,
        )

    # -- lifecycle -----------------------------------------------------------

    def advance_phase(self, fiscal_year: int, next_phase: str, actor_role: str | Role = Role.TEAM) -> dict:
        return self.execute(
            "advance_phase", {"fiscal_year": fiscal_year, "next_phase": next_phase}, actor_role
        )

    def take_monthly_snapshot(self, period: str, actor_role: str | Role = Role.TEAM) -> dict:
        return self.execute("take_monthly_snapshot", {"period": str(period)}, actor_role)

    def generate_car(self, fiscal_year: int, actor_role: str | Role = Role.TEAM) -> dict:
        return self.execute("generate_car", {"fiscal_year": fiscal_year}, actor_role)

    # -- stack ----------------------------------------------------------------

    def register_release(
        self,
        product_id: str,
        version: str,
        constraints: list[dict] | None = None,
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        return self.execute(
            "register_release",
            {"product_id": product_id, "version": version, "constraints": constraints or []},
            actor_role,
        )

    def record_policy_checklist(
        self, product_id: str, items: dict, actor_role: str | Role = Role.TEAM
    ) -> dict:
        return self.execute(
            "record_policy_checklist", {"product_id": product_id, "items": items}, actor_role
        )

    def compose_manifest(
        self,
        name: str,
        stack_version: str,
        pins: dict[str, str],
        inclusion_rule: str = "all_policies_met",
        metadata: dict | None = None,
        actor_role: str | Role = Role.TEAM,
    ) -> dict:
        return self.execute(
            "compose_manifest",
            {
                "name": name,
                "stack_version": stack_version,
                "pins": dict(pins),
                "inclusion_rule": inclusion_rule,
                "metadata": metadata or {},
            },
            actor_role,
        )
