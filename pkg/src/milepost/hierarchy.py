"""Portfolio / SDK group / product creation and structural checks."""

from __future__ import annotations

from .errors import DuplicateError, ValidationError
from .model import Model, Portfolio, PortfolioConfig, Product, SdkGroup
from .registry import Ctx, command

ALLOWED_KPP_GOALS = (4, 8)


@command("create_portfolio")
def create_portfolio(model: Model, params: dict, ctx: Ctx) -> dict:
    if model.portfolio is not None:
        raise DuplicateError(f"portfolio {model.portfolio.id} already exists in this store")
    years = int(params["years"])
    if years < 1:
        raise ValidationError(f"invalid horizon: years must be >= 1, got {years}")
    config = PortfolioConfig.from_dict(params["config"])
    portfolio = Portfolio(
        id=model.next_id("portfolio", "prt"),
        name=params["name"],
        start_fy=int(params["start_fy"]),
        years=years,
        config=config,
    )
    model.portfolio = portfolio
    return {"id": portfolio.id, "name": portfolio.name, "periods": portfolio.horizon.length}


@command("add_sdk_group")
def add_sdk_group(model: Model, params: dict, ctx: Ctx) -> dict:
    portfolio = model.require_portfolio()
    name = params["name"]
    if not name:
        raise ValidationError("group name must be non-empty")
    if any(model.groups[gid].name == name for gid in portfolio.group_ids):
        raise DuplicateError(f"SDK group named {name!r} already exists")
    group = SdkGroup(id=model.next_id("group", "grp"), name=name)
    model.groups[group.id] = group
    portfolio.group_ids.append(group.id)
    portfolio.revision += 1
    return {"id": group.id, "name": group.name}


@command("add_product")
def add_product(model: Model, params: dict, ctx: Ctx) -> dict:
    group = model.get_group(params["group_id"])
    name = params["name"]
    if not name:
        raise ValidationError("product name must be non-empty")
    kpp_goal = int(params["kpp_goal"])
    if kpp_goal not in ALLOWED_KPP_GOALS:
        raise ValidationError(f"kpp_goal must be one of {ALLOWED_KPP_GOALS}, got {kpp_goal}")
    for pid in group.product_ids:
        if model.products[pid].name == name:
            raise DuplicateError(f"product named {name!r} already exists in group {group.id}")
    product = Product(
        id=model.next_id("product", "prd"),
        name=name,
        team_name=params.get("team_name") or name,
        group_id=group.id,
        kpp_goal=kpp_goal,
    )
    model.products[product.id] = product
    group.product_ids.append(product.id)
    group.revision += 1
    return {"id": product.id, "name": product.name, "kpp_goal": product.kpp_goal}
