from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

import pytest

from milepost.engine import PortfolioEngine
from milepost.fixtures import build_scale_fixture, build_struggling_fixture, synthetic_clock
from milepost.model import Period


@pytest.fixture
def engine() -> PortfolioEngine:
    return PortfolioEngine(clock=lambda: "2019-10-01T00:00:00Z")


@pytest.fixture
def store_engine(tmp_path: Path) -> PortfolioEngine:
    return PortfolioEngine(store_dir=tmp_path / "store", clock=lambda: "2019-10-01T00:00:00Z")


@pytest.fixture(scope="session")
def scale() -> tuple[PortfolioEngine, dict]:
    """The 70-product, six-year, 1,800-activity corpus. Session-scoped and
    treated as read-only by every test that uses it."""
    eng = PortfolioEngine(clock=synthetic_clock())
    summary = build_scale_fixture(eng, seed=2017)
    return eng, summary


@pytest.fixture(scope="session")
def planted() -> tuple[PortfolioEngine, dict]:
    eng = PortfolioEngine(clock=synthetic_clock("2018-10-01T00:00:00Z"))
    info = build_struggling_fixture(eng, start_fy=2019)
    return eng, info


def make_single_product_plan(
    eng: PortfolioEngine,
    fy: int = 2019,
    years: int = 1,
    annual_budget: int = 120000,
    specs: list[dict] | None = None,
):
    """Portfolio with one group/product/package, refined and ready to
    finalize. Returns (product_id, package_id, activity_ids)."""
    eng.create_portfolio("T", fy, years)
    gid = eng.add_sdk_group("g")["id"]
    pid = eng.add_product(gid, "zfp", 4)["id"]
    pkg = eng.create_planning_package(pid, fy, "plan", annual_budget)["id"]
    if specs is None:
        specs = [
            {
                "title": f"a{i + 1}",
                "budget_fraction": Fraction(1, 4),
                "baseline_start": str(Period(fy, 3 * i + 1)),
                "baseline_end": str(Period(fy, 3 * i + 3)),
            }
            for i in range(4)
        ]
    result = eng.refine_package(pkg, specs)
    return pid, pkg, result["activity_ids"]


def baselined_activity(eng: PortfolioEngine, fy: int = 2019):
    """One finalized activity inside a baselined year; ready to start."""
    pid, pkg, aids = make_single_product_plan(eng, fy=fy)
    for aid in aids:
        eng.finalize_activity(aid, "demo accepted")
    eng.baseline(fy)
    return pid, pkg, aids


def random_small_portfolio(rng: random.Random) -> tuple[PortfolioEngine, int]:
    """Small random portfolio driven through the real engine: random
    windows, completions, and costs. Returns (engine, horizon length)."""
    eng = PortfolioEngine(clock=lambda: "2020-01-01T00:00:00Z")
    years = rng.choice([1, 2])
    eng.create_portfolio("R", 2020, years)
    horizon = eng.model.horizon
    n_groups = rng.choice([1, 2])
    gids = [eng.add_sdk_group(f"g{i}")["id"] for i in range(n_groups)]
    pids = [
        eng.add_product(rng.choice(gids), f"p{p}", rng.choice([4, 8]))["id"]
        for p in range(rng.choice([1, 2, 3]))
    ]
    for year in range(years):
        fy = 2020 + year
        made: list[str] = []
        for pid in pids:
            if rng.random() < 0.2:
                continue
            pkg = eng.create_planning_package(pid, fy, "n", rng.randrange(1, 30) * 12000)["id"]
            k = rng.randrange(1, 5)
            specs = []
            for i in range(k):
                start = rng.randrange(1, 12)
                end = rng.randrange(start, 13)
                specs.append(
                    {
                        "title": f"a{i}",
                        "budget_fraction": Fraction(1, k + rng.choice([0, 1])),
                        "baseline_start": str(Period(fy, start)),
                        "baseline_end": str(Period(fy, end)),
                    }
                )
            aids = eng.refine_package(pkg, specs)["activity_ids"]
            for aid in aids:
                eng.finalize_activity(aid, "c")
            made.extend(aids)
        if not made:
            continue
        eng.baseline(fy)
        for aid in made:
            activity = eng.model.activities[aid]
            if rng.random() < 0.15:
                continue
            start_idx = activity.current_segment.start_index
            start_idx = min(start_idx + rng.choice([0, 0, 1]), horizon.length)
            eng.start_activity(aid, str(horizon.period_at(start_idx)))
            for idx in range(start_idx, min(start_idx + rng.randrange(0, 4), horizon.length) + 1):
                if rng.random() < 0.7:
                    eng.record_actual_cost(aid, str(horizon.period_at(idx)), rng.randrange(0, 5000))
            if rng.random() < 0.7:
                done_idx = min(start_idx + rng.randrange(0, 5), horizon.length)
                eng.complete_milestone(aid, str(horizon.period_at(done_idx)))
    return eng, horizon.length
