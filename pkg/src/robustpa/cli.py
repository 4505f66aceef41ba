"""Command-line entry point: validated JSON configs in, JSON envelopes and CSV tables out.

Every command reads one config file whose schema is fixed per command; unknown
fields are rejected. Extended reals travel as the literals "inf", "-inf" and, for
intensities only, "zero-limit". Exit codes: 0 on success, 2 when the analysis
returns an infeasibility verdict, 1 on any input or runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from robustpa import dynamic_contract as dc
from robustpa import extensions as ext
from robustpa import interventions as iv
from robustpa import longrun as lr
from robustpa.dynamics_state import DynamicPrimitives, binary_capacity, trap_check
from robustpa.entropic import Roadmap
from robustpa.errors import DomainError, InfeasibleError, PreconditionError
from robustpa.static_contract import ActionSpec, StaticScenario, solve_static
from robustpa.wagemap import WageMap, no_intertemporal_arbitrage

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

Intensity = Union[float, Literal["inf", "zero-limit"]]
Extended = Union[float, Literal["inf", "-inf"]]


def intensity_value(v: Intensity) -> float:
    if v == "inf":
        return math.inf
    if v == "zero-limit":
        return 0.0
    return float(v)


def encode_intensity(lam: float) -> Any:
    if lam == 0.0:
        return "zero-limit"
    return to_jsonable(lam)


# --- schemas -------------------------------------------------------------------------------------


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WageMapConfig(Strict):
    kind: Literal["exp-plus-linear", "exponential"] = "exp-plus-linear"
    slope: float = 1.0
    scale: float = 1.0

    def build(self) -> WageMap:
        return WageMap(self.kind, self.slope, self.scale)


class Base(Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    kind: str


class PrimitivesConfig(Base):
    p: float
    theta_L: float
    theta_H: float
    m: float
    k: float
    gamma: Extended
    A: float = 1.0
    delta: float = 1.0
    U0: float = 0.0
    lambda1: Intensity = 0.1
    wage_map: WageMapConfig = Field(default_factory=WageMapConfig)

    def primitives(self) -> DynamicPrimitives:
        return DynamicPrimitives(
            p=self.p,
            theta_L=self.theta_L,
            theta_H=self.theta_H,
            m=self.m,
            k=self.k,
            gamma=math.inf if self.gamma == "inf" else float(self.gamma),
            A=self.A,
            delta=self.delta,
            U0=self.U0,
            lambda1=intensity_value(self.lambda1),
            wage_map=self.wage_map.build(),
        )


class ActionConfig(Strict):
    name: str
    models: list[list[float]]
    prior: list[float] | None = None
    cost: float = 0.0


class StaticConfig(Base):
    kind: Literal["static-solve"] = "static-solve"
    outcomes: list[str] | None = None
    actions: list[ActionConfig]
    target: str
    lam: Intensity
    U0: float = 0.0
    wage_map: WageMapConfig = Field(default_factory=WageMapConfig)


class DynamicSolveConfig(PrimitivesConfig):
    kind: Literal["dynamic-solve"] = "dynamic-solve"
    plan: list[int] | None = None


class CapacityConfig(Base):
    kind: Literal["capacity"] = "capacity"
    p: float
    thetas: list[float]
    weights: list[float]
    lam: Intensity


class TrapConfig(PrimitivesConfig):
    kind: Literal["trap-check"] = "trap-check"


class FeedbackConfig(PrimitivesConfig):
    kind: Literal["feedback"] = "feedback"
    r: float | None = None


class ContractConfig(Strict):
    x1: list[float]
    x2: list[list[float]]

    def build(self) -> dc.DynamicContract:
        return dc.DynamicContract(np.asarray(self.x1, dtype=float), np.asarray(self.x2, dtype=float))


class ScreenConfig(PrimitivesConfig):
    kind: Literal["screen"] = "screen"
    E: ContractConfig
    I: ContractConfig
    gamma_lo: float
    gamma_hi: float


class TurnoverConfig(PrimitivesConfig):
    kind: Literal["turnover"] = "turnover"
    phi: float = 0.0


class SimulateConfig(PrimitivesConfig):
    kind: Literal["simulate"] = "simulate"
    p_star_safe: float | None = None
    p_star_innov: float
    rule: Literal["sophisticated", "lenient", "demanding"] = "sophisticated"
    policy: Literal["safe", "innovate", "gated"] = "gated"
    T: int = 1000
    seeds: list[int] = Field(default_factory=lambda: [0])
    record_stride: int = 1
    llr_actions: list[int] | None = None


class SpeedLimitConfig(PrimitivesConfig):
    kind: Literal["speed-limit"] = "speed-limit"
    p_star_innov: float
    T: int | None = None
    seeds: list[int] = Field(default_factory=lambda: list(range(32)))
    slack: float = 0.05


class BridgeConfig(PrimitivesConfig):
    kind: Literal["bridge-check"] = "bridge-check"
    p_star_innov: float
    contract: list[float]
    discount: float = 0.9
    roots: list[int] = Field(default_factory=lambda: [100, 1000, 10000])
    seeds: list[int] = Field(default_factory=lambda: list(range(16)))
    horizon: int = 10
    depth: int = 5


class DesignConfig(Base):
    kind: Literal["design-roadmap"] = "design-roadmap"
    Q2: list[list[float]]
    mu0: list[float]
    rho: float
    lam: float
    k: float
    U0: float = 0.0
    q1: list[float]
    wage_map: WageMapConfig = Field(default_factory=WageMapConfig)


class MilestoneConfig(Base):
    kind: Literal["milestones"] = "milestones"
    p: float
    psi: float
    theta_L: float
    theta_H: float
    eps_L: float
    eps_H: float
    k: float = 1.0
    gamma: float = 1.0
    mu: list[float]
    lam: Intensity


class ShirkConfig(Base):
    kind: Literal["shirking"] = "shirking"
    p0: float
    p: float
    thetas: list[float]
    k1: float
    k: float
    mu: list[float]
    lam: Intensity


# --- serialization -------------------------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types with extended reals as string literals."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else ",".join(map(str, k)): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def canonical(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_digest(command: str, config: BaseModel, seed: int | None) -> str:
    blob = canonical({"command": command, "config": config.model_dump(mode="json"), "seed": seed})
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclasses.dataclass
class Outcome:
    payload: dict
    table: list[dict] | None = None
    warnings: list[str] = dataclasses.field(default_factory=list)
    infeasible: bool = False


# --- commands ------------------------------------------------------------------------------------


def run_static(cfg: StaticConfig, seed: int) -> Outcome:
    acts = tuple(
        ActionSpec(a.name, Roadmap(a.models, a.prior if a.prior is not None else [1.0 / len(a.models)] * len(a.models)), a.cost)
        for a in cfg.actions
    )
    s = StaticScenario(acts, intensity_value(cfg.lam), cfg.U0, cfg.wage_map.build(), tuple(cfg.outcomes) if cfg.outcomes else None)
    sol = solve_static(s, cfg.target, seed=seed)
    return Outcome(
        {
            "x": sol.x,
            "wage_bill": sol.wage_bill,
            "ir_slack": sol.ir_slack,
            "ic_slacks": sol.ic_slacks,
            "binding_set": sol.binding_set,
            "multipliers": sol.multipliers,
            "solver_trace": sol.solver_trace,
        }
    )


def _plan_payload(sol: dc.PlanSolution) -> dict:
    return {
        "plan": sol.plan.label,
        "x1": sol.contract.x1,
        "x2": sol.contract.x2,
        "profit": sol.profit,
        "v1": sol.v1,
        "wage_bill": sol.wage_bill,
        "first_period_gap": sol.first_period_gap,
        "nodes": [
            {"y1": n.y1, "m": n.state.m, "lambda": encode_intensity(n.state.lam), "action": n.action, "spread": n.spread, "gap": n.gap}
            for n in sol.node_reports
        ],
    }


def run_dynamic(cfg: DynamicSolveConfig, seed: int) -> Outcome:
    prims = cfg.primitives()
    warnings = []
    if not no_intertemporal_arbitrage(prims.wage_map, prims.delta):
        warnings.append("wage map admits intertemporal arbitrage at this discount")
    if cfg.plan is not None:
        if len(cfg.plan) != 3:
            raise DomainError("plan must be [a1, sigma2(0), sigma2(1)]")
        sol = dc.solve_plan(prims, dc.ActionPlan(cfg.plan[0], (cfg.plan[1], cfg.plan[2])))
        return Outcome({"solution": _plan_payload(sol)}, warnings=warnings)
    solved = dc.enumerate_plans(prims)
    rows = []
    for plan, res in solved:
        if isinstance(res, InfeasibleError):
            rows.append({"plan": plan.label, "feasible": False, "profit": None, "certificate": res.certificate})
        else:
            rows.append({"plan": plan.label, "feasible": True, "profit": res.profit, "certificate": None})
    best = dc.best_plan(prims, solved)
    table = [{"plan": r["plan"], "feasible": r["feasible"], "profit": to_jsonable(r["profit"])} for r in rows]
    return Outcome({"best": _plan_payload(best), "plans": rows}, table, warnings)


def run_capacity(cfg: CapacityConfig, seed: int) -> Outcome:
    lam = intensity_value(cfg.lam)
    cap = binary_capacity(cfg.thetas, cfg.weights, cfg.p, lam)
    return Outcome(
        {
            "lambda": encode_intensity(lam),
            "capacity": cap.value,
            "attained": cap.attained,
            "argmax_spread": cap.argmax_spread,
            "limit_plus": cap.limit_plus,
            "limit_minus": cap.limit_minus,
        }
    )


def run_trap(cfg: TrapConfig, seed: int) -> Outcome:
    rep = trap_check(cfg.primitives())
    return Outcome(
        {
            "trap": rep.trap,
            "verdict": rep.verdict,
            "lambda_star": rep.lambda_star,
            "lambda2_success": rep.lambda2_success,
            "posterior_success": rep.posterior_success,
            "capacity": rep.capacity.value,
            "capacity_attained": rep.capacity.attained,
            "closed_form": rep.closed_form,
            "forms_agree": rep.forms_agree,
            "theta_L_bar": rep.theta_L_bar,
        }
    )


def run_feedback(cfg: FeedbackConfig, seed: int) -> Outcome:
    prims = cfg.primitives()
    r_star = iv.optimal_coarsening(prims)
    r = r_star if cfg.r is None else cfg.r
    state = iv.feedback_state(prims, r)
    cap = iv.feedback_capacity(prims, r)
    return Outcome(
        {
            "r_star": r_star,
            "r": r,
            "posterior": state.m,
            "lambda": encode_intensity(state.lam),
            "capacity": cap.value,
            "implementable": cap.value > prims.k or (cap.value == prims.k and cap.attained),
        }
    )


def run_screen(cfg: ScreenConfig, seed: int) -> Outcome:
    prims = cfg.primitives()
    menu = iv.HiringMenu(cfg.E.build(), cfg.I.build())
    cut = iv.screening_cutoff(prims, menu, cfg.gamma_lo, cfg.gamma_hi)
    grid = np.linspace(cfg.gamma_lo, cfg.gamma_hi, 10)
    table = []
    for g in grid:
        v_e, v_i = iv.track_values(prims, menu, float(g))
        table.append({"gamma": float(g), "V_E": v_e, "V_I": v_i, "D": v_i - v_e})
    return Outcome({"cutoff": cut, "D_at_cutoff": iv.screening_diff(prims, menu, cut), "grid": table}, table)


def run_turnover(cfg: TurnoverConfig, seed: int) -> Outcome:
    rep = iv.turnover_analysis(cfg.primitives(), cfg.phi)
    payload = {
        "verdict": rep.verdict,
        "sandwich": rep.sandwich,
        "capacity_incumbent": rep.capacity_incumbent,
        "capacity_fresh": rep.capacity_fresh,
        "slope": rep.slope,
        "intercept": rep.intercept,
        "keep_profit": rep.keep_profit,
        "A_bar": rep.A_bar,
    }
    if rep.contract is not None:
        payload["contract"] = {"x1": rep.contract.x1, "x2": rep.contract.x2, "new_agent_x2": rep.new_agent_x2}
    return Outcome(payload)


def _true_process(cfg) -> lr.TrueProcess:
    p_safe = getattr(cfg, "p_star_safe", None)
    return lr.TrueProcess.binary(cfg.p if p_safe is None else p_safe, cfg.p_star_innov)


def run_simulate(cfg: SimulateConfig, seed: int) -> Outcome:
    prims = cfg.primitives()
    models = lr.GlobalModelSet.from_primitives(prims)
    policy = {"safe": lr.constant_policy(lr.SAFE), "innovate": lr.constant_policy(lr.INNOVATE)}.get(cfg.policy)
    if policy is None:
        policy = lr.CapacityGate(models)
    seeds = cfg.seeds if seed is None else [seed]
    batch = lr.simulate_paths(
        models, _true_process(cfg), lr.LambdaRule(cfg.rule, prims.gamma), cfg.T, seeds, policy, cfg.record_stride, llr_actions=cfg.llr_actions
    )
    table = []
    for j, s in enumerate(batch.seeds):
        for i, t in enumerate(batch.dates):
            table.append(
                {
                    "seed": s,
                    "t": int(t),
                    "action": int(batch.actions[i, j]),
                    "outcome": int(batch.outcomes[i, j]),
                    "posterior_qH": float(batch.posterior[i, j, 1]),
                    "lambda": float(batch.lam[i, j]),
                    "alpha_T": float(batch.alpha[i, j]),
                }
            )
    final = {
        str(s): {
            "innovations": int(batch.final_counts[j, 1].sum()),
            "safe": int(batch.final_counts[j, 0].sum()),
            "posterior_qH": float(lr.posterior_from_counts(models, batch.final_counts[j])[1]),
            "lambda": float(lr.LambdaRule(cfg.rule, prims.gamma)(float(lr.llr_from_counts(models, batch.final_counts[j], cfg.llr_actions)), cfg.T + 1)),
        }
        for j, s in enumerate(batch.seeds)
    }
    label = "capacity-gated stand-in policy" if cfg.policy == "gated" else f"constant {cfg.policy} policy"
    return Outcome({"policy": label, "T": cfg.T, "final": final}, table)


def run_speed_limit(cfg: SpeedLimitConfig, seed: int) -> Outcome:
    prims = cfg.primitives()
    rep = lr.speed_limit(prims, _true_process(cfg))
    payload = {
        "D_star": rep.D_star,
        "best_fit": rep.best_fit,
        "lambda_bar_H": rep.lambda_bar_H,
        "lambda_bar_L": rep.lambda_bar_L,
        "alpha_star": rep.alpha_star,
        "correctly_specified": rep.correctly_specified,
    }
    table = None
    if cfg.T is not None:
        seeds = cfg.seeds if seed is None else [seed]
        cyc = lr.cycle_experiment(prims, _true_process(cfg), cfg.T, seeds, cfg.slack)
        payload["probe"] = {
            "label": "capacity-gated property probe, not an equilibrium computation",
            "max_alpha_T": cyc.max_alpha,
            "within_limit": cyc.within_limit,
            "final_alpha": cyc.final_alpha,
            "n_innovate": cyc.n_innovate,
            "n_safe": cyc.n_safe,
        }
        table = [
            {"seed": s, "alpha_T": float(a), "innovations": int(ni), "safe": int(ns)}
            for s, a, ni, ns in zip(seeds, cyc.final_alpha, cyc.n_innovate, cyc.n_safe)
        ]
    return Outcome(payload, table)


def run_bridge(cfg: BridgeConfig, seed: int) -> Outcome:
    prims = cfg.primitives()
    contract = lr.InfiniteContract.stationary(cfg.contract)
    seeds = cfg.seeds if seed is None else [seed]
    roots = lr.bridge_check(prims, _true_process(cfg), contract, cfg.discount, cfg.roots, seeds, cfg.horizon, cfg.depth)
    table = [
        {
            "t": r.t,
            "mean_gap": r.mean_gap,
            "max_mu_deviation": max(d.mu_deviation for d in r.deviations),
            "mu_bound_holds": all(d.mu_deviation <= d.mu_bound + 1e-12 for d in r.deviations),
            "max_llr_deviation": max(d.llr_deviation for d in r.deviations),
            "llr_bound_holds": all(d.llr_deviation <= d.llr_bound for d in r.deviations),
        }
        for r in roots
    ]
    gaps = [r.mean_gap for r in roots]
    return Outcome({"roots": table, "decreasing": all(b < a for a, b in zip(gaps, gaps[1:]))}, table)


def run_design(cfg: DesignConfig, seed: int) -> Outcome:
    prob = ext.RoadmapDesignProblem(cfg.Q2, cfg.mu0, cfg.rho, cfg.lam, cfg.k, cfg.U0, cfg.q1, cfg.wage_map.build())
    r = ext.design_roadmap(prob, seed=seed or 0)
    warnings = [] if r.converged else ["fixed-point iteration stopped before the tolerance; last iterate reported"]
    return Outcome(
        {
            "x": r.x,
            "mu": r.mu,
            "eta": r.eta,
            "beta": r.beta,
            "objective": r.objective,
            "iterations": r.iterations,
            "converged": r.converged,
            "kkt_residuals": r.kkt_residuals,
        },
        [{"iteration": i, "objective": v} for i, v in enumerate(r.objective_history)],
        warnings,
    )


def run_milestones(cfg: MilestoneConfig, seed: int) -> Outcome:
    p3 = ext.ThreeOutcomePrimitives(cfg.p, cfg.psi, cfg.theta_L, cfg.theta_H, cfg.eps_L, cfg.eps_H, k=cfg.k, gamma=cfg.gamma)
    lam = intensity_value(cfg.lam)
    cap = ext.milestone_capacity(p3, cfg.mu, lam)
    diag = ext.diagnostic_condition(p3, cfg.mu, lam) if 0 < lam < math.inf else None
    return Outcome(
        {
            "capacity": cap.value,
            "attained": cap.attained,
            "faces": cap.faces,
            "implementable": cap.value >= cfg.k,
            "diagnostic": diag,
        }
    )


def run_shirking(cfg: ShirkConfig, seed: int) -> Outcome:
    sp = ext.ShirkPrimitives(cfg.p0, cfg.p, tuple(cfg.thetas), cfg.k1, cfg.k)
    res = ext.shirking_capacity(sp, cfg.mu, intensity_value(cfg.lam))
    return Outcome(
        {
            "capacity": res.value,
            "implementable": res.verdict,
            "argmax_spread": res.argmax_spread,
            "two_action_capacity": res.two_action_capacity,
            "tightening_bound": res.two_action_capacity - (cfg.k - cfg.k1),
        }
    )


COMMANDS: dict[str, tuple[type[BaseModel], Callable[[Any, int | None], Outcome]]] = {
    "static-solve": (StaticConfig, run_static),
    "dynamic-solve": (DynamicSolveConfig, run_dynamic),
    "capacity": (CapacityConfig, run_capacity),
    "trap-check": (TrapConfig, run_trap),
    "feedback": (FeedbackConfig, run_feedback),
    "screen": (ScreenConfig, run_screen),
    "turnover": (TurnoverConfig, run_turnover),
    "simulate": (SimulateConfig, run_simulate),
    "speed-limit": (SpeedLimitConfig, run_speed_limit),
    "bridge-check": (BridgeConfig, run_bridge),
    "design-roadmap": (DesignConfig, run_design),
    "milestones": (MilestoneConfig, run_milestones),
    "shirking": (ShirkConfig, run_shirking),
}


# --- grids and output ----------------------------------------------------------------------------


def parse_grid(spec: str) -> tuple[str, np.ndarray]:
    """``field=start:stop:num`` (inclusive linspace) or ``field=v1,v2,...``."""
    if "=" not in spec:
        raise DomainError(f"grid spec {spec!r} must look like field=start:stop:num or field=v1,v2")
    name, rhs = spec.split("=", 1)
    if ":" in rhs:
        parts = rhs.split(":")
        if len(parts) != 3:
            raise DomainError(f"grid range {rhs!r} must be start:stop:num")
        return name.strip(), np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    return name.strip(), np.array([float(v) for v in rhs.split(",")])


def _scalars(payload: dict, prefix: str = "") -> dict:
    row = {}
    for k, v in payload.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            row.update(_scalars(v, key + "."))
        elif not isinstance(v, list):
            row[key] = v
    return row


def tables_to_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({c: to_jsonable(r.get(c)) for c in cols})
    return buf.getvalue()


def execute(command: str, raw: dict, seed: int | None = None, grid: str | None = None) -> tuple[int, dict, list[dict] | None]:
    """Validate, run and wrap one command. Returns (exit code, envelope, table rows)."""
    schema, fn = COMMANDS[command]
    raw = dict(raw)
    raw.setdefault("kind", command)
    cfg = schema.model_validate(raw)
    digest = config_digest(command, cfg, seed)
    warnings: list[str] = []
    code = EXIT_OK
    if grid is not None:
        field, values = parse_grid(grid)
        if field not in type(cfg).model_fields:
            raise DomainError(f"grid field {field!r} is not a field of the {command} config")
        rows = []
        for v in values:
            sub = schema.model_validate({**cfg.model_dump(), field: float(v)})
            try:
                out = fn(sub, seed)
                rows.append({field: float(v), "status": "ok", **_scalars(to_jsonable(out.payload))})
                warnings += out.warnings
            except InfeasibleError as exc:
                rows.append({field: float(v), "status": "infeasible", "message": str(exc)})
        payload: dict = {"grid_field": field, "rows": rows}
        table = rows
    else:
        try:
            out = fn(cfg, seed)
            payload, table, warnings = out.payload, out.table, out.warnings
            if out.infeasible:
                code = EXIT_INFEASIBLE
        except InfeasibleError as exc:
            payload = {"infeasible": True, "message": str(exc), "certificate": exc.certificate}
            table = None
            code = EXIT_INFEASIBLE
    envelope = {
        "command": command,
        "config_digest": digest,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "result": to_jsonable(payload),
        "warnings": warnings,
    }
    return code, envelope, table


def _field_path(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustpa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", type=Path, default=None)
        sp.add_argument("--grid", type=str, default=None)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = json.loads(args.config.read_text())
        if not isinstance(raw, dict):
            raise DomainError("config must be a JSON object")
        code, envelope, table = execute(args.command, raw, args.seed, args.grid)
    except ValidationError as exc:
        print(f"error: invalid config: {_field_path(exc)}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, json.JSONDecodeError, DomainError, PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = json.dumps(envelope, sort_keys=True, indent=2)
    csv_text = tables_to_csv(table) if table else None
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"{args.command}.json").write_text(text + "\n")
        if csv_text is not None:
            (args.out / f"{args.command}.csv").write_text(csv_text)
    if args.format == "csv":
        if csv_text is None:
            print(f"error: {args.command} produced no table", file=sys.stderr)
            return EXIT_ERROR
        sys.stdout.write(csv_text)
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
