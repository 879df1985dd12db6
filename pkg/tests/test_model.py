import random

import pytest

from milepost.errors import DuplicateError, ValidationError
from milepost.model import Horizon, Period, PortfolioConfig, validate_hierarchy


class TestPeriod:
    def test_parse_and_format_roundtrip(self):
        p = Period.parse("2019-06")
        assert (p.fiscal_year, p.month) == (2019, 6)
        assert str(p) == "2019-06"

    @pytest.mark.parametrize("bad", ["2019", "2019-00", "2019-13", "x-y", "2019-6-1"])
    def test_malformed_periods_rejected(self, bad):
        with pytest.raises(ValidationError):
            Period.parse(bad)

    def test_index_bijection_over_full_horizon(self):
        horizon = Horizon(2017, 6)
        assert horizon.length == 72
        for idx in horizon.indices():
            assert horizon.index_of(horizon.period_at(idx)) == idx

    def test_index_bijection_random_periods(self):
        rng = random.Random(7)
        horizon = Horizon(2017, 6)
        for _ in range(200):
            p = Period(rng.randrange(2017, 2023), rng.randrange(1, 13))
            assert horizon.period_at(horizon.index_of(p)) == p

    def test_out_of_horizon_rejected(self):
        horizon = Horizon(2017, 6)
        with pytest.raises(ValidationError):
            horizon.index_of(Period(2023, 1))
        with pytest.raises(ValidationError):
            horizon.period_at(73)


class TestPortfolioCreation:
    def test_six_year_horizon_has_72_periods(self, engine):
        result = engine.create_portfolio("exastack", 2017, 6)
        assert result["periods"] == 72

    def test_one_year_horizon(self, engine):
        assert engine.create_portfolio("X", 2024, 1)["periods"] == 12

    def test_zero_years_rejected(self, engine):
        with pytest.raises(ValidationError):
            engine.create_portfolio("X", 2024, 0)

    def test_second_portfolio_rejected(self, engine):
        engine.create_portfolio("X", 2024, 1)
        with pytest.raises(DuplicateError):
            engine.create_portfolio("Y", 2024, 1)


class TestProducts:
    def test_goals_4_and_8_accepted(self, engine):
        engine.create_portfolio("X", 2024, 1)
        gid = engine.add_sdk_group("g")["id"]
        assert engine.add_product(gid, "zfp", 4)["kpp_goal"] == 4
        assert engine.add_product(gid, "tools-x", 8)["kpp_goal"] == 8

    def test_other_goals_rejected(self, engine):
        engine.create_portfolio("X", 2024, 1)
        gid = engine.add_sdk_group("g")["id"]
        for goal in (0, 5, 6, -4):
            with pytest.raises(ValidationError):
                engine.add_product(gid, "p", goal)

    def test_duplicate_name_in_group_rejected(self, engine):
        engine.create_portfolio("X", 2024, 1)
        gid = engine.add_sdk_group("g")["id"]
        engine.add_product(gid, "zfp", 4)
        with pytest.raises(DuplicateError):
            engine.add_product(gid, "zfp", 4)

    def test_duplicate_group_name_rejected(self, engine):
        engine.create_portfolio("X", 2024, 1)
        engine.add_sdk_group("g")
        with pytest.raises(DuplicateError):
            engine.add_sdk_group("g")

    def test_ids_are_stable_and_unique(self, engine):
        engine.create_portfolio("X", 2024, 1)
        gid = engine.add_sdk_group("g")["id"]
        ids = {engine.add_product(gid, f"p{i}", 4)["id"] for i in range(10)}
        assert len(ids) == 10


class TestHierarchyValidation:
    def test_well_formed_portfolio_is_valid(self, engine):
        engine.create_portfolio("X", 2024, 1)
        gid = engine.add_sdk_group("g")["id"]
        engine.add_product(gid, "a", 4)
        engine.add_product(gid, "b", 8)
        assert validate_hierarchy(engine.model) == []

    def test_product_in_two_groups_names_both(self, engine):
        engine.create_portfolio("X", 2024, 1)
        g1 = engine.add_sdk_group("g1")["id"]
        g2 = engine.add_sdk_group("g2")["id"]
        pid = engine.add_product(g1, "a", 4)["id"]
        engine.add_product(g2, "b", 4)
        engine.model.groups[g2].product_ids.append(pid)  # simulated corruption
        violations = [v for v in validate_hierarchy(engine.model) if v.code == "product_in_two_groups"]
        assert len(violations) == 1
        assert g1 in violations[0].subjects and g2 in violations[0].subjects

    def test_empty_group_is_a_violation(self, engine):
        engine.create_portfolio("X", 2024, 1)
        engine.add_sdk_group("g")
        codes = {v.code for v in validate_hierarchy(engine.model)}
        assert "empty_group" in codes

    def test_orphan_product_is_a_violation(self, engine):
        engine.create_portfolio("X", 2024, 1)
        gid = engine.add_sdk_group("g")["id"]
        pid = engine.add_product(gid, "a", 4)["id"]
        engine.model.groups[gid].product_ids.remove(pid)  # simulated corruption
        codes = {v.code for v in validate_hierarchy(engine.model)}
        assert "orphan_product" in codes

    def test_scale_fixture_is_valid(self, scale):
        eng, summary = scale
        assert validate_hierarchy(eng.model) == []
        assert summary["teams"] == 35
        assert summary["products"] == 70


class TestConfig:
    def test_defaults_validate(self):
        PortfolioConfig().validate()

    def test_threshold_bounds(self):
        with pytest.raises(ValidationError):
            PortfolioConfig(cpi_alert_threshold=0).validate()
        with pytest.raises(ValidationError):
            PortfolioConfig(spi_alert_threshold=3).validate()
        with pytest.raises(ValidationError):
            PortfolioConfig(consecutive_periods_for_alert=0).validate()
        with pytest.raises(ValidationError):
            PortfolioConfig(activities_per_package_min=0).validate()

    def test_roundtrip_through_dict(self):
        cfg = PortfolioConfig()
        assert PortfolioConfig.from_dict(cfg.to_dict()) == cfg
