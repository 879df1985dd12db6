"""Work-breakdown hierarchy, calendar, and identity model.

Three fixed tiers: portfolio -> SDK group -> product. Products own per-year
planning packages that refine into activities; every other module operates
on the `Model` container defined here. Entities are plain dataclasses with
hand-written dict round-trips so the persisted form is canonical and
diffable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any

from .errors import NotFoundError, ValidationError
from .money import frac_str, parse_ratio

MODEL_FORMAT_VERSION = 1


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Calendar


@dataclass(frozen=True)
class Period:
    """One month of one fiscal year."""

    fiscal_year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValidationError(f"month must be in 1..12, got {self.month}")

    def __str__(self) -> str:
        return f"{self.fiscal_year:04d}-{self.month:02d}"

    @classmethod
    def parse(cls, text: str) -> "Period":
        parts = str(text).strip().split("-")
        if len(parts) != 2:
            raise ValidationError(f"period must look like 'FY-MM', got {text!r}")
        try:
            fy, month = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValidationError(f"period must look like 'FY-MM', got {text!r}") from exc
        return cls(fy, month)


@dataclass(frozen=True)
class Horizon:
    """Monthly calendar over the project's fiscal years.

    Period indices run 1..length and map bijectively onto (fy, month).
    """

    start_fy: int
    years: int

    def __post_init__(self) -> None:
        if self.years < 1:
            raise ValidationError(f"horizon must cover at least one year, got {self.years}")

    @property
    def length(self) -> int:
        return self.years * 12

    @property
    def end_fy(self) -> int:
        return self.start_fy + self.years - 1

    def contains(self, period: Period) -> bool:
        return self.start_fy <= period.fiscal_year <= self.end_fy

    def index_of(self, period: Period) -> int:
        if not self.contains(period):
            raise ValidationError(f"period {period} outside horizon {self.start_fy}..{self.end_fy}")
        return (period.fiscal_year - self.start_fy) * 12 + period.month

    def period_at(self, index: int) -> Period:
        if not 1 <= index <= self.length:
            raise ValidationError(f"period index {index} outside 1..{self.length}")
        return Period(self.start_fy + (index - 1) // 12, (index - 1) % 12 + 1)

    def parse_index(self, text: str) -> int:
        return self.index_of(Period.parse(text))

    def fy_indices(self, fiscal_year: int) -> range:
        first = self.index_of(Period(fiscal_year, 1))
        return range(first, first + 12)

    def indices(self) -> range:
        return range(1, self.length + 1)


# ---------------------------------------------------------------------------
# Enums


class EvTechnique(str, Enum):
    MILESTONE_0_100 = "milestone_0_100"
    PERCENT_COMPLETE = "percent_complete"


class ActivityStatus(str, Enum):
    PLANNED = "planned"
    IN_PROGRESS = "in_progress"
    MILESTONE_COMPLETE = "milestone_complete"
    CANCELLED = "cancelled"


class DetailLevel(str, Enum):
    PACKAGE_STUB = "package_stub"
    REFINED = "refined"
    FINALIZED = "finalized"


class PackageState(str, Enum):
    COARSE = "coarse"
    REFINED = "refined"
    BASELINED = "baselined"
    CLOSED = "closed"


class CrLevel(str, Enum):
    L1 = "L1"
    L2 = "L2"


class CrState(str, Enum):
    DRAFTED = "drafted"
    UNDER_REVIEW = "under_review"
    APPROVED = "approved"
    REJECTED = "rejected"
    APPLIED = "applied"


class Role(str, Enum):
    TEAM = "team"
    AREA_LEAD = "area_lead"
    SME = "sme"
    PROJECT_DIRECTOR = "project_director"


class IntegrationState(str, Enum):
    PROPOSED = "proposed"
    EVIDENCE_ATTACHED = "evidence_attached"
    UNDER_SME_REVIEW = "under_sme_review"
    SME_ENDORSED = "sme_endorsed"
    SME_REJECTED = "sme_rejected"
    FINALLY_APPROVED = "finally_approved"


class EvidenceKind(str, Enum):
    SCREENSHOT = "screenshot"
    CLIENT_LETTER = "client_letter"
    TEST_OUTPUT = "test_output"
    LINK = "link"


class EnvironmentClass(str, Enum):
    PRE_EXASCALE = "pre_exascale"
    EXASCALE = "exascale"
    OTHER = "other"


class Phase(str, Enum):
    PLANNING = "planning"
    EXECUTION = "execution"
    REPORTING = "reporting"
    ASSESSING = "assessing"
    ADAPTING = "adapting"
    CLOSED = "closed"


class PolicyStatus(str, Enum):
    MET = "met"
    UNMET = "unmet"
    WAIVED = "waived"


class InclusionRule(str, Enum):
    ALL_POLICIES_MET = "all_policies_met"
    ALLOW_WAIVERS = "allow_waivers"


def parse_enum(enum_cls: type, value: Any, what: str) -> Any:
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ValidationError(f"unknown {what} {value!r}; expected one of: {allowed}") from None


# ---------------------------------------------------------------------------
# Configuration


DEFAULT_L2_FIELDS = ("budget", "annual_budget", "budget_fraction", "sdk_group")


@dataclass
class PortfolioConfig:
    """Tunable policy knobs; defaults are engine policy, not fixed doctrine."""

    cpi_alert_threshold: Fraction = Fraction(9, 10)
    spi_alert_threshold: Fraction = Fraction(9, 10)
    consecutive_periods_for_alert: int = 2
    kpp_portfolio_threshold: Fraction = Fraction(1, 2)
    activities_per_package_min: int = 4
    activities_per_package_max: int = 6
    ev_technique: EvTechnique = EvTechnique.MILESTONE_0_100
    strict_budget_fractions: bool = False
    require_exascale_integration: bool = False
    # change-level policy table: fields forcing L2 plus the cross-product rule
    l2_fields: tuple[str, ...] = DEFAULT_L2_FIELDS
    cross_product_is_l2: bool = True

    def validate(self) -> None:
        for name, value in (
            ("cpi_alert_threshold", self.cpi_alert_threshold),
            ("spi_alert_threshold", self.spi_alert_threshold),
            ("kpp_portfolio_threshold", self.kpp_portfolio_threshold),
        ):
            if not (0 < value <= 2):
                raise ValidationError(f"{name} must be in (0, 2], got {frac_str(value)}")
        if self.consecutive_periods_for_alert < 1:
            raise ValidationError("consecutive_periods_for_alert must be >= 1")
        if self.activities_per_package_min < 1:
            raise ValidationError("activities_per_package_min must be >= 1")
        if self.activities_per_package_max < self.activities_per_package_min:
            raise ValidationError("activities_per_package_max must be >= the minimum")

    def to_dict(self) -> dict:
        return {
            "cpi_alert_threshold": frac_str(self.cpi_alert_threshold),
            "spi_alert_threshold": frac_str(self.spi_alert_threshold),
            "consecutive_periods_for_alert": self.consecutive_periods_for_alert,
            "kpp_portfolio_threshold": frac_str(self.kpp_portfolio_threshold),
            "activities_per_package_min": self.activities_per_package_min,
            "activities_per_package_max": self.activities_per_package_max,
            "ev_technique": self.ev_technique.value,
            "strict_budget_fractions": self.strict_budget_fractions,
            "require_exascale_integration": self.require_exascale_integration,
            "l2_fields": list(self.l2_fields),
            "cross_product_is_l2": self.cross_product_is_l2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PortfolioConfig":
        cfg = cls(
            cpi_alert_threshold=parse_ratio(data["cpi_alert_threshold"]),
            spi_alert_threshold=parse_ratio(data["spi_alert_threshold"]),
            consecutive_periods_for_alert=int(data["consecutive_periods_for_alert"]),
            kpp_portfolio_threshold=parse_ratio(data["kpp_portfolio_threshold"]),
            activities_per_package_min=int(data["activities_per_package_min"]),
            activities_per_package_max=int(data["activities_per_package_max"]),
            ev_technique=parse_enum(EvTechnique, data["ev_technique"], "ev technique"),
            strict_budget_fractions=bool(data["strict_budget_fractions"]),
            require_exascale_integration=bool(data["require_exascale_integration"]),
            l2_fields=tuple(data["l2_fields"]),
            cross_product_is_l2=bool(data["cross_product_is_l2"]),
        )
        cfg.validate()
        return cfg


# ---------------------------------------------------------------------------
# Hierarchy entities


@dataclass
class Portfolio:
    id: str
    name: str
    start_fy: int
    years: int
    config: PortfolioConfig
    group_ids: list[str] = field(default_factory=list)
    revision: int = 1

    @property
    def horizon(self) -> Horizon:
        return Horizon(self.start_fy, self.years)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "start_fy": self.start_fy,
            "years": self.years,
            "config": self.config.to_dict(),
            "group_ids": list(self.group_ids),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Portfolio":
        return cls(
            id=data["id"],
            name=data["name"],
            start_fy=int(data["start_fy"]),
            years=int(data["years"]),
            config=PortfolioConfig.from_dict(data["config"]),
            group_ids=list(data["group_ids"]),
            revision=int(data["revision"]),
        )


@dataclass
class SdkGroup:
    id: str
    name: str
    product_ids: list[str] = field(default_factory=list)
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "product_ids": list(self.product_ids),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SdkGroup":
        return cls(data["id"], data["name"], list(data["product_ids"]), int(data["revision"]))


@dataclass
class Product:
    id: str
    name: str
    team_name: str
    group_id: str
    kpp_goal: int
    package_ids: dict[int, str] = field(default_factory=dict)  # fiscal year -> package id
    integration_ids: list[str] = field(default_factory=list)
    releases: list[str] = field(default_factory=list)  # registered version strings
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "team_name": self.team_name,
            "group_id": self.group_id,
            "kpp_goal": self.kpp_goal,
            "package_ids": {str(fy): pid for fy, pid in sorted(self.package_ids.items())},
            "integration_ids": list(self.integration_ids),
            "releases": list(self.releases),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Product":
        return cls(
            id=data["id"],
            name=data["name"],
            team_name=data["team_name"],
            group_id=data["group_id"],
            kpp_goal=int(data["kpp_goal"]),
            package_ids={int(fy): pid for fy, pid in data["package_ids"].items()},
            integration_ids=list(data["integration_ids"]),
            releases=list(data["releases"]),
            revision=int(data["revision"]),
        )


# ---------------------------------------------------------------------------
# Planning entities


@dataclass
class BaselineSegment:
    """One version of an activity's baseline. The segment with the largest
    effective_index <= t defines the PV curve and budget at period t."""

    effective_index: int  # 0 on creation so the original curve always applies
    start_index: int
    end_index: int
    budget: Fraction

    def to_dict(self) -> dict:
        return {
            "effective_index": self.effective_index,
            "start_index": self.start_index,
            "end_index": self.end_index,
            "budget": frac_str(self.budget),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BaselineSegment":
        return cls(
            int(data["effective_index"]),
            int(data["start_index"]),
            int(data["end_index"]),
            parse_ratio(data["budget"]),
        )


@dataclass
class Activity:
    id: str
    product_id: str
    fiscal_year: int
    title: str
    scope_text: str
    budget_fraction: Fraction
    baseline_history: list[BaselineSegment]
    status: ActivityStatus = ActivityStatus.PLANNED
    detail_level: DetailLevel = DetailLevel.REFINED
    actual_start_index: int | None = None
    completion_index: int | None = None
    cancelled_index: int | None = None
    percent_complete: dict[int, Fraction] = field(default_factory=dict)
    completion_criteria: str = ""
    staffing_note: str = ""
    revision: int = 1

    def segment_at(self, index: int) -> BaselineSegment:
        chosen = self.baseline_history[0]
        for seg in self.baseline_history[1:]:
            if seg.effective_index <= index:
                chosen = seg
        return chosen

    @property
    def current_segment(self) -> BaselineSegment:
        return self.baseline_history[-1]

    @property
    def budget(self) -> Fraction:
        return self.current_segment.budget

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "product_id": self.product_id,
            "fiscal_year": self.fiscal_year,
            "title": self.title,
            "scope_text": self.scope_text,
            "budget_fraction": frac_str(self.budget_fraction),
            "baseline_history": [seg.to_dict() for seg in self.baseline_history],
            "status": self.status.value,
            "detail_level": self.detail_level.value,
            "actual_start_index": self.actual_start_index,
            "completion_index": self.completion_index,
            "cancelled_index": self.cancelled_index,
            "percent_complete": {str(k): frac_str(v) for k, v in sorted(self.percent_complete.items())},
            "completion_criteria": self.completion_criteria,
            "staffing_note": self.staffing_note,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Activity":
        return cls(
            id=data["id"],
            product_id=data["product_id"],
            fiscal_year=int(data["fiscal_year"]),
            title=data["title"],
            scope_text=data["scope_text"],
            budget_fraction=parse_ratio(data["budget_fraction"]),
            baseline_history=[BaselineSegment.from_dict(s) for s in data["baseline_history"]],
            status=parse_enum(ActivityStatus, data["status"], "activity status"),
            detail_level=parse_enum(DetailLevel, data["detail_level"], "detail level"),
            actual_start_index=data["actual_start_index"],
            completion_index=data["completion_index"],
            cancelled_index=data["cancelled_index"],
            percent_complete={int(k): parse_ratio(v) for k, v in data["percent_complete"].items()},
            completion_criteria=data["completion_criteria"],
            staffing_note=data["staffing_note"],
            revision=int(data["revision"]),
        )


@dataclass
class PlanningPackage:
    id: str
    product_id: str
    fiscal_year: int
    narrative: str
    annual_budget: Fraction
    state: PackageState = PackageState.COARSE
    activity_ids: list[str] = field(default_factory=list)
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "product_id": self.product_id,
            "fiscal_year": self.fiscal_year,
            "narrative": self.narrative,
            "annual_budget": frac_str(self.annual_budget),
            "state": self.state.value,
            "activity_ids": list(self.activity_ids),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlanningPackage":
        return cls(
            id=data["id"],
            product_id=data["product_id"],
            fiscal_year=int(data["fiscal_year"]),
            narrative=data["narrative"],
            annual_budget=parse_ratio(data["annual_budget"]),
            state=parse_enum(PackageState, data["state"], "package state"),
            activity_ids=list(data["activity_ids"]),
            revision=int(data["revision"]),
        )


@dataclass
class ChangeTarget:
    entity_id: str
    field: str
    old_value: str
    new_value: str

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "field": self.field,
            "old_value": self.old_value,
            "new_value": self.new_value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChangeTarget":
        return cls(data["entity_id"], data["field"], data["old_value"], data["new_value"])


@dataclass
class ChangeRequest:
    id: str
    level: CrLevel
    targets: list[ChangeTarget]
    rationale: str
    proposer_role: Role
    effective_index: int
    state: CrState = CrState.DRAFTED
    decision_note: str = ""
    transitions: list[dict] = field(default_factory=list)  # {edge, actor_role, timestamp, note}
    revision: int = 1

    @property
    def approver_role(self) -> Role:
        return Role.AREA_LEAD if self.level == CrLevel.L1 else Role.PROJECT_DIRECTOR

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level": self.level.value,
            "targets": [t.to_dict() for t in self.targets],
            "rationale": self.rationale,
            "proposer_role": self.proposer_role.value,
            "effective_index": self.effective_index,
            "state": self.state.value,
            "decision_note": self.decision_note,
            "transitions": list(self.transitions),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChangeRequest":
        return cls(
            id=data["id"],
            level=parse_enum(CrLevel, data["level"], "change level"),
            targets=[ChangeTarget.from_dict(t) for t in data["targets"]],
            rationale=data["rationale"],
            proposer_role=parse_enum(Role, data["proposer_role"], "role"),
            effective_index=int(data["effective_index"]),
            state=parse_enum(CrState, data["state"], "change state"),
            decision_note=data["decision_note"],
            transitions=list(data["transitions"]),
            revision=int(data["revision"]),
        )


@dataclass
class BaselineSnapshot:
    """Frozen per-activity PV curve parameters for one fiscal year."""

    id: str
    fiscal_year: int
    curves: dict[str, BaselineSegment]  # activity id -> frozen curve
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "fiscal_year": self.fiscal_year,
            "curves": {aid: seg.to_dict() for aid, seg in sorted(self.curves.items())},
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BaselineSnapshot":
        return cls(
            id=data["id"],
            fiscal_year=int(data["fiscal_year"]),
            curves={aid: BaselineSegment.from_dict(seg) for aid, seg in data["curves"].items()},
            created_at=data["created_at"],
        )


# ---------------------------------------------------------------------------
# KPP entities


@dataclass
class EvidenceArtifact:
    id: str
    integration_id: str
    kind: EvidenceKind
    uri_or_path: str
    content_digest: str  # sha256 hex over the stored bytes
    size: int
    attached_at: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "integration_id": self.integration_id,
            "kind": self.kind.value,
            "uri_or_path": self.uri_or_path,
            "content_digest": self.content_digest,
            "size": self.size,
            "attached_at": self.attached_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvidenceArtifact":
        return cls(
            id=data["id"],
            integration_id=data["integration_id"],
            kind=parse_enum(EvidenceKind, data["kind"], "evidence kind"),
            uri_or_path=data["uri_or_path"],
            content_digest=data["content_digest"],
            size=int(data["size"]),
            attached_at=data["attached_at"],
        )


@dataclass
class Integration:
    id: str
    product_id: str
    capability: str
    client: str
    environment_class: EnvironmentClass
    sustainability_note: str
    state: IntegrationState = IntegrationState.PROPOSED
    evidence_ids: list[str] = field(default_factory=list)
    sme_report: str | None = None
    approved_at: str | None = None
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "product_id": self.product_id,
            "capability": self.capability,
            "client": self.client,
            "environment_class": self.environment_class.value,
            "sustainability_note": self.sustainability_note,
            "state": self.state.value,
            "evidence_ids": list(self.evidence_ids),
            "sme_report": self.sme_report,
            "approved_at": self.approved_at,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Integration":
        return cls(
            id=data["id"],
            product_id=data["product_id"],
            capability=data["capability"],
            client=data["client"],
            environment_class=parse_enum(EnvironmentClass, data["environment_class"], "environment class"),
            sustainability_note=data["sustainability_note"],
            state=parse_enum(IntegrationState, data["state"], "integration state"),
            evidence_ids=list(data["evidence_ids"]),
            sme_report=data["sme_report"],
            approved_at=data["approved_at"],
            revision=int(data["revision"]),
        )


# ---------------------------------------------------------------------------
# Lifecycle entities


@dataclass
class FiscalYearLifecycle:
    fiscal_year: int
    phase: Phase = Phase.PLANNING
    history: list[dict] = field(default_factory=list)  # {phase, entered_at}
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "fiscal_year": self.fiscal_year,
            "phase": self.phase.value,
            "history": list(self.history),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FiscalYearLifecycle":
        return cls(
            fiscal_year=int(data["fiscal_year"]),
            phase=parse_enum(Phase, data["phase"], "lifecycle phase"),
            history=list(data["history"]),
            revision=int(data["revision"]),
        )


@dataclass
class EvmSnapshot:
    """Cumulative-to-date earned-value figures for one node at one period."""

    node_id: str
    period_index: int
    pv: Fraction
    ev: Fraction
    ac: Fraction
    cpi: Fraction | None
    spi: Fraction | None
    cv: Fraction
    sv: Fraction

    @classmethod
    def build(cls, node_id: str, period_index: int, pv: Fraction, ev: Fraction, ac: Fraction) -> "EvmSnapshot":
        return cls(
            node_id=node_id,
            period_index=period_index,
            pv=pv,
            ev=ev,
            ac=ac,
            cpi=(ev / ac) if ac > 0 else None,
            spi=(ev / pv) if pv > 0 else None,
            cv=ev - ac,
            sv=ev - pv,
        )

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "period_index": self.period_index,
            "pv": frac_str(self.pv),
            "ev": frac_str(self.ev),
            "ac": frac_str(self.ac),
            "cpi": frac_str(self.cpi) if self.cpi is not None else None,
            "spi": frac_str(self.spi) if self.spi is not None else None,
            "cv": frac_str(self.cv),
            "sv": frac_str(self.sv),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvmSnapshot":
        return cls(
            node_id=data["node_id"],
            period_index=int(data["period_index"]),
            pv=parse_ratio(data["pv"]),
            ev=parse_ratio(data["ev"]),
            ac=parse_ratio(data["ac"]),
            cpi=parse_ratio(data["cpi"]) if data["cpi"] is not None else None,
            spi=parse_ratio(data["spi"]) if data["spi"] is not None else None,
            cv=parse_ratio(data["cv"]),
            sv=parse_ratio(data["sv"]),
        )


@dataclass
class MonthlySnapshot:
    """Immutable monthly freeze of the aggregate nodes (portfolio, SDK
    groups, products), struggling flags, and the in-progress count."""

    period_index: int
    rows: list[EvmSnapshot]
    struggling: list[dict]  # {product_id, reason, first_flagged_period}
    wavefront_count: int
    created_at: str

    def to_dict(self) -> dict:
        return {
            "period_index": self.period_index,
            "rows": [r.to_dict() for r in self.rows],
            "struggling": list(self.struggling),
            "wavefront_count": self.wavefront_count,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MonthlySnapshot":
        return cls(
            period_index=int(data["period_index"]),
            rows=[EvmSnapshot.from_dict(r) for r in data["rows"]],
            struggling=list(data["struggling"]),
            wavefront_count=int(data["wavefront_count"]),
            created_at=data["created_at"],
        )


@dataclass
class CarDocument:
    """Per-year capability assessment: one section per product plus a
    portfolio summary. Content is plain JSON-native data."""

    fiscal_year: int
    generated_at: str
    portfolio_summary: dict
    sections: list[dict]  # sorted by product name

    def to_dict(self) -> dict:
        return {
            "fiscal_year": self.fiscal_year,
            "generated_at": self.generated_at,
            "portfolio_summary": self.portfolio_summary,
            "sections": list(self.sections),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CarDocument":
        return cls(
            fiscal_year=int(data["fiscal_year"]),
            generated_at=data["generated_at"],
            portfolio_summary=data["portfolio_summary"],
            sections=list(data["sections"]),
        )


# ---------------------------------------------------------------------------
# Stack entities


@dataclass(frozen=True)
class Version:
    """Ordered version triple with an optional pre-release tag.

    Tagged versions sort before the untagged version with the same triple.
    """

    major: int
    minor: int
    patch: int
    tag: str = ""

    def __str__(self) -> str:
        base = f"{self.major}.{self.minor}.{self.patch}"
        return f"{base}-{self.tag}" if self.tag else base

    @classmethod
    def parse(cls, text: str) -> "Version":
        raw = str(text).strip()
        body, _, tag = raw.partition("-")
        parts = body.split(".")
        if len(parts) > 3 or not parts or not all(p.isdigit() for p in parts):
            raise ValidationError(f"malformed version {text!r}; expected MAJOR.MINOR.PATCH[-tag]")
        nums = [int(p) for p in parts] + [0] * (3 - len(parts))
        return cls(nums[0], nums[1], nums[2], tag)

    def sort_key(self) -> tuple:
        # untagged ranks above any tagged build of the same triple
        return (self.major, self.minor, self.patch, self.tag == "", self.tag)

    def __lt__(self, other: "Version") -> bool:
        return self.sort_key() < other.sort_key()

    def __le__(self, other: "Version") -> bool:
        return self.sort_key() <= other.sort_key()


@dataclass(frozen=True)
class VersionRange:
    """Interval of versions with per-bound inclusivity, e.g. "[2.0.0,3.0.0)"."""

    min_version: Version
    max_version: Version
    include_min: bool = True
    include_max: bool = False

    def __post_init__(self) -> None:
        if self.max_version < self.min_version:
            raise ValidationError(
                f"malformed range: min {self.min_version} > max {self.max_version}"
            )

    def contains(self, version: Version) -> bool:
        if version < self.min_version or (version == self.min_version and not self.include_min):
            return False
        if self.max_version < version or (version == self.max_version and not self.include_max):
            return False
        return True

    def __str__(self) -> str:
        lo = "[" if self.include_min else "("
        hi = "]" if self.include_max else ")"
        return f"{lo}{self.min_version},{self.max_version}{hi}"

    @classmethod
    def parse(cls, text: str) -> "VersionRange":
        raw = str(text).strip()
        if len(raw) < 5 or raw[0] not in "[(" or raw[-1] not in "])" or "," not in raw:
            raise ValidationError(f"malformed range {text!r}; expected like '[1.0.0,2.0.0)'")
        lo, hi = raw[1:-1].split(",", 1)
        return cls(
            min_version=Version.parse(lo),
            max_version=Version.parse(hi),
            include_min=raw[0] == "[",
            include_max=raw[-1] == "]",
        )


@dataclass
class Constraint:
    other_product_id: str
    allowed: VersionRange

    def to_dict(self) -> dict:
        return {"other_product_id": self.other_product_id, "allowed": str(self.allowed)}

    @classmethod
    def from_dict(cls, data: dict) -> "Constraint":
        return cls(data["other_product_id"], VersionRange.parse(data["allowed"]))


@dataclass
class Release:
    product_id: str
    version: Version
    released_at: str
    constraints: list[Constraint] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "product_id": self.product_id,
            "version": str(self.version),
            "released_at": self.released_at,
            "constraints": [c.to_dict() for c in self.constraints],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Release":
        return cls(
            product_id=data["product_id"],
            version=Version.parse(data["version"]),
            released_at=data["released_at"],
            constraints=[Constraint.from_dict(c) for c in data["constraints"]],
        )


@dataclass
class PolicyChecklist:
    product_id: str
    items: dict[str, dict]  # policy id -> {"status": ..., "note": ...}
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "product_id": self.product_id,
            "items": {pid: dict(entry) for pid, entry in sorted(self.items.items())},
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyChecklist":
        return cls(
            product_id=data["product_id"],
            items={pid: dict(entry) for pid, entry in data["items"].items()},
            revision=int(data["revision"]),
        )


@dataclass
class StackManifest:
    name: str
    stack_version: str
    pins: dict[str, str]  # product id -> version string
    inclusion_rule: InclusionRule
    created_at: str
    # build/cache/container surfaces are metadata only, never executed
    metadata: dict = field(default_factory=dict)
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "stack_version": self.stack_version,
            "pins": {pid: v for pid, v in sorted(self.pins.items())},
            "inclusion_rule": self.inclusion_rule.value,
            "created_at": self.created_at,
            "metadata": dict(self.metadata),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StackManifest":
        return cls(
            name=data["name"],
            stack_version=data["stack_version"],
            pins=dict(data["pins"]),
            inclusion_rule=parse_enum(InclusionRule, data["inclusion_rule"], "inclusion rule"),
            created_at=data["created_at"],
            metadata=dict(data["metadata"]),
            revision=int(data["revision"]),
        )


# ---------------------------------------------------------------------------
# Command log and audit trail


@dataclass
class CommandLogEntry:
    sequence_number: int
    operation: str
    parameters: dict
    actor_role: str
    timestamp: str
    result_digest: str

    def to_dict(self) -> dict:
        return {
            "sequence_number": self.sequence_number,
            "operation": self.operation,
            "parameters": self.parameters,
            "actor_role": self.actor_role,
            "timestamp": self.timestamp,
            "result_digest": self.result_digest,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CommandLogEntry":
        return cls(
            sequence_number=int(data["sequence_number"]),
            operation=data["operation"],
            parameters=dict(data["parameters"]),
            actor_role=data["actor_role"],
            timestamp=data["timestamp"],
            result_digest=data["result_digest"],
        )


# ---------------------------------------------------------------------------
# Default community policy set (identifier + theme description)

DEFAULT_POLICY_SET: dict[str, str] = {
    "PC1": "builds from source with a documented, scriptable procedure",
    "PC2": "provides an automated test suite runnable by outsiders",
    "PC3": "publishes user-facing documentation",
    "PC4": "carries an open-source license",
    "PC5": "names a public channel for user support",
}


# ---------------------------------------------------------------------------
# Model container


@dataclass
class Model:
    """Whole-program state. Mutated only through the engine's command
    dispatch; reads treat it as a consistent snapshot."""

    portfolio: Portfolio | None = None
    groups: dict[str, SdkGroup] = field(default_factory=dict)
    products: dict[str, Product] = field(default_factory=dict)
    packages: dict[str, PlanningPackage] = field(default_factory=dict)
    activities: dict[str, Activity] = field(default_factory=dict)
    cost_records: dict[str, dict[int, Fraction]] = field(default_factory=dict)
    baselines: dict[int, BaselineSnapshot] = field(default_factory=dict)
    change_requests: dict[str, ChangeRequest] = field(default_factory=dict)
    audit_log: list[dict] = field(default_factory=list)
    integrations: dict[str, Integration] = field(default_factory=dict)
    evidence: dict[str, EvidenceArtifact] = field(default_factory=dict)
    evidence_blobs: dict[str, bytes] = field(default_factory=dict)
    lifecycles: dict[int, FiscalYearLifecycle] = field(default_factory=dict)
    monthly_snapshots: dict[int, MonthlySnapshot] = field(default_factory=dict)
    car_documents: dict[int, CarDocument] = field(default_factory=dict)
    releases: dict[str, dict[str, Release]] = field(default_factory=dict)  # product -> version -> release
    policy_checklists: dict[str, PolicyChecklist] = field(default_factory=dict)
    manifests: dict[str, StackManifest] = field(default_factory=dict)
    policy_set: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_POLICY_SET))
    command_log: list[CommandLogEntry] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)

    # -- identity -----------------------------------------------------------

    def next_id(self, kind: str, prefix: str) -> str:
        n = self.counters.get(kind, 0) + 1
        self.counters[kind] = n
        return f"{prefix}-{n:04d}"

    # -- lookup helpers (raise NotFoundError with the offending id) ---------

    def require_portfolio(self) -> Portfolio:
        if self.portfolio is None:
            raise NotFoundError("no portfolio exists yet; create one first")
        return self.portfolio

    @property
    def horizon(self) -> Horizon:
        return self.require_portfolio().horizon

    def get_group(self, group_id: str) -> SdkGroup:
        try:
            return self.groups[group_id]
        except KeyError:
            raise NotFoundError(f"unknown SDK group {group_id!r}") from None

    def get_product(self, product_id: str) -> Product:
        try:
            return self.products[product_id]
        except KeyError:
            raise NotFoundError(f"unknown product {product_id!r}") from None

    def get_package(self, package_id: str) -> PlanningPackage:
        try:
            return self.packages[package_id]
        except KeyError:
            raise NotFoundError(f"unknown planning package {package_id!r}") from None

    def get_activity(self, activity_id: str) -> Activity:
        try:
            return self.activities[activity_id]
        except KeyError:
            raise NotFoundError(f"unknown activity {activity_id!r}") from None

    def get_change_request(self, cr_id: str) -> ChangeRequest:
        try:
            return self.change_requests[cr_id]
        except KeyError:
            raise NotFoundError(f"unknown change request {cr_id!r}") from None

    def get_integration(self, integration_id: str) -> Integration:
        try:
            return self.integrations[integration_id]
        except KeyError:
            raise NotFoundError(f"unknown integration {integration_id!r}") from None

    def lifecycle_for(self, fiscal_year: int) -> FiscalYearLifecycle:
        """Lifecycles start implicitly in planning; created lazily."""
        if fiscal_year not in self.lifecycles:
            self.lifecycles[fiscal_year] = FiscalYearLifecycle(fiscal_year=fiscal_year)
        return self.lifecycles[fiscal_year]

    def phase_of(self, fiscal_year: int) -> Phase:
        lifecycle = self.lifecycles.get(fiscal_year)
        return lifecycle.phase if lifecycle else Phase.PLANNING

    def product_activity_ids(self, product_id: str) -> list[str]:
        product = self.get_product(product_id)
        out: list[str] = []
        for fy in sorted(product.package_ids):
            out.extend(self.packages[product.package_ids[fy]].activity_ids)
        return out

    def descendant_activity_ids(self, node_id: str) -> list[str]:
        """Activities under a node; the node may be the portfolio, a group,
        a product, or an activity itself."""
        if self.portfolio is not None and node_id in (self.portfolio.id, "portfolio"):
            out: list[str] = []
            for gid in self.portfolio.group_ids:
                out.extend(self.descendant_activity_ids(gid))
            return out
        if node_id in self.groups:
            out = []
            for pid in self.groups[node_id].product_ids:
                out.extend(self.product_activity_ids(pid))
            return out
        if node_id in self.products:
            return self.product_activity_ids(node_id)
        if node_id in self.activities:
            return [node_id]
        raise NotFoundError(f"unknown node {node_id!r}")

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "portfolio": self.portfolio.to_dict() if self.portfolio else None,
            "groups": {k: v.to_dict() for k, v in sorted(self.groups.items())},
            "products": {k: v.to_dict() for k, v in sorted(self.products.items())},
            "packages": {k: v.to_dict() for k, v in sorted(self.packages.items())},
            "activities": {k: v.to_dict() for k, v in sorted(self.activities.items())},
            "cost_records": {
                aid: {str(idx): frac_str(amount) for idx, amount in sorted(records.items())}
                for aid, records in sorted(self.cost_records.items())
            },
            "baselines": {str(fy): b.to_dict() for fy, b in sorted(self.baselines.items())},
            "change_requests": {k: v.to_dict() for k, v in sorted(self.change_requests.items())},
            "audit_log": list(self.audit_log),
            "integrations": {k: v.to_dict() for k, v in sorted(self.integrations.items())},
            "evidence": {k: v.to_dict() for k, v in sorted(self.evidence.items())},
            "evidence_digests": sorted(self.evidence_blobs),
            "lifecycles": {str(fy): lc.to_dict() for fy, lc in sorted(self.lifecycles.items())},
            "monthly_snapshots": {str(i): s.to_dict() for i, s in sorted(self.monthly_snapshots.items())},
            "car_documents": {str(fy): c.to_dict() for fy, c in sorted(self.car_documents.items())},
            "releases": {
                pid: {v: r.to_dict() for v, r in sorted(by_version.items())}
                for pid, by_version in sorted(self.releases.items())
            },
            "policy_checklists": {k: v.to_dict() for k, v in sorted(self.policy_checklists.items())},
            "manifests": {k: v.to_dict() for k, v in sorted(self.manifests.items())},
            "policy_set": {k: v for k, v in sorted(self.policy_set.items())},
            "command_log": [e.to_dict() for e in self.command_log],
            "counters": {k: v for k, v in sorted(self.counters.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Model":
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValidationError(
                f"unsupported store format version {data.get('format_version')!r}; "
                f"this build reads version {MODEL_FORMAT_VERSION}"
            )
        model = cls(
            portfolio=Portfolio.from_dict(data["portfolio"]) if data["portfolio"] else None,
            groups={k: SdkGroup.from_dict(v) for k, v in data["groups"].items()},
            products={k: Product.from_dict(v) for k, v in data["products"].items()},
            packages={k: PlanningPackage.from_dict(v) for k, v in data["packages"].items()},
            activities={k: Activity.from_dict(v) for k, v in data["activities"].items()},
            cost_records={
                aid: {int(idx): parse_ratio(amount) for idx, amount in records.items()}
                for aid, records in data["cost_records"].items()
            },
            baselines={int(fy): BaselineSnapshot.from_dict(b) for fy, b in data["baselines"].items()},
            change_requests={k: ChangeRequest.from_dict(v) for k, v in data["change_requests"].items()},
            audit_log=list(data["audit_log"]),
            integrations={k: Integration.from_dict(v) for k, v in data["integrations"].items()},
            evidence={k: EvidenceArtifact.from_dict(v) for k, v in data["evidence"].items()},
            lifecycles={int(fy): FiscalYearLifecycle.from_dict(v) for fy, v in data["lifecycles"].items()},
            monthly_snapshots={int(i): MonthlySnapshot.from_dict(s) for i, s in data["monthly_snapshots"].items()},
            car_documents={int(fy): CarDocument.from_dict(c) for fy, c in data["car_documents"].items()},
            releases={
                pid: {v: Release.from_dict(r) for v, r in by_version.items()}
                for pid, by_version in data["releases"].items()
            },
            policy_checklists={k: PolicyChecklist.from_dict(v) for k, v in data["policy_checklists"].items()},
            manifests={k: StackManifest.from_dict(v) for k, v in data["manifests"].items()},
            policy_set=dict(data["policy_set"]),
            command_log=[CommandLogEntry.from_dict(e) for e in data["command_log"]],
            counters={k: int(v) for k, v in data["counters"].items()},
        )
        return model


# ---------------------------------------------------------------------------
# Structural validation


@dataclass
class Violation:
    code: str
    message: str
    subjects: list[str]

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "subjects": list(self.subjects)}


def validate_hierarchy(model: Model) -> list[Violation]:
    """Every structural invariant violation; empty list means the hierarchy
    is a well-formed three-tier tree."""
    violations: list[Violation] = []
    if model.portfolio is None:
        return violations
    portfolio = model.portfolio

    for gid in portfolio.group_ids:
        if gid not in model.groups:
            violations.append(Violation("missing_group", f"portfolio references unknown group {gid}", [gid]))

    seen_products: dict[str, str] = {}
    for gid, group in sorted(model.groups.items()):
        if gid not in portfolio.group_ids:
            violations.append(Violation("orphan_group", f"group {gid} not attached to the portfolio", [gid]))
        if not group.product_ids:
            violations.append(Violation("empty_group", f"group {gid} ({group.name}) has no products", [gid]))
        for pid in group.product_ids:
            if pid not in model.products:
                violations.append(Violation("missing_product", f"group {gid} references unknown product {pid}", [gid, pid]))
                continue
            if pid in seen_products:
                violations.append(
                    Violation(
                        "product_in_two_groups",
                        f"product {pid} appears in groups {seen_products[pid]} and {gid}",
                        [pid, seen_products[pid], gid],
                    )
                )
            else:
                seen_products[pid] = gid

    for pid, product in sorted(model.products.items()):
        owner = seen_products.get(pid)
        if owner is None:
            violations.append(Violation("orphan_product", f"product {pid} not in any group", [pid]))
        elif product.group_id != owner:
            violations.append(
                Violation(
                    "group_id_mismatch",
                    f"product {pid} records group {product.group_id} but lives in {owner}",
                    [pid, product.group_id, owner],
                )
            )

    names_by_group: dict[str, set[str]] = {}
    for pid, product in sorted(model.products.items()):
        bucket = names_by_group.setdefault(product.group_id, set())
        if product.name in bucket:
            violations.append(
                Violation("duplicate_name", f"duplicate product name {product.name!r} in group {product.group_id}", [pid])
            )
        bucket.add(product.name)

    return violations
