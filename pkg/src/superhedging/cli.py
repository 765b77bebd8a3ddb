"""Command-line front end.

    python3 -m superhedging <command> --config run.json --out DIR [flags]

Commands: cone, decompose, tree, superhedge, eps, price, verify. Model data
comes from one JSON file; flags only select mode, seed, output directory and
the eps grid. Artifacts are written as sorted, indented JSON (rationals as
``"p/q"`` strings) and CSV, so identical inputs give identical bytes.

Exit codes: 0 success, 1 configuration or domain error, 2 a verification
failure or any other internal invariant breach. Errors are printed as
``{"error": ..., "invariant": ..., "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, SuperhedgingError
from .market import Claim, MarketModel, PiecewiseConstant, build_tree, claim_payoff, simulate_paths, write_paths_csv
from .portfolio import simulate_value
from .pricing import (
    find_consistent_Z,
    girsanov_reweight_check,
    mc_consistent_Z,
    mc_supermartingale_check,
    root_Z,
    supermartingale_check,
)
from .rational import rat, rat_str, vec
from .solvency import ExchangeMatrix, apply_transfers, build_cone, decompose, physical_cone
from .superhedge import EpsQuery, EpsSolver, SuperhedgeOracle, backward_sets, dpp_check, mc_eps_success
from .verify import random_khat, random_tree_strategy, run_all

CONFIG_KEYS = {
    "mu", "s0", "r", "b", "sigma", "T", "periods", "claim", "eps", "seed",
    "n_paths", "n_steps", "alpha", "prices", "queries", "v0",
}  # fmt: skip
DEFAULT_SEED = 0
DEFAULT_EPS = (0.05, 0.1, 0.2, 0.4)


class InternalError(SuperhedgingError):
    invariant = "internal consistency"


@dataclass
class RunConfig:
    data: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    eps: tuple[float, ...] = DEFAULT_EPS
    mode: str = "tree"
    allow_degenerate: bool = False

    @classmethod
    def load(cls, path: str | None, args) -> "RunConfig":
        data = {}
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    data = json.load(fh)
            except OSError as e:
                raise ConfigError(f"cannot read config: {e}") from None
            except json.JSONDecodeError as e:
                raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        seed = args.seed if args.seed is not None else data.get("seed", DEFAULT_SEED)
        if not isinstance(seed, int) or not (0 <= seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.eps is not None:
            eps = args.eps
        else:
            eps = tuple(float(e) for e in data.get("eps", DEFAULT_EPS))
        if any(not (0 < e <= 1) for e in eps):
            raise ConfigError("every eps must lie in (0, 1]")
        cfg = cls(data, seed, tuple(eps), args.mode, args.allow_degenerate)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Build every object the config describes, so bad input fails before
        any computation."""
        if "mu" in self.data:
            self.exchange()
        if "s0" in self.data:
            m = self.model()
            if "claim" in self.data:
                self.claim().check_dim(m.d)
        elif "claim" in self.data:
            self.claim()
        if "periods" in self.data:
            self.periods()

    def require(self, key: str):
        if key not in self.data:
            raise ConfigError(f"config key {key!r} is required for this command")
        return self.data[key]

    def exchange(self) -> ExchangeMatrix:
        mu = self.require("mu")
        try:
            rows = [[rat(x) for x in row] for row in mu]
        except (TypeError, ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"mu must be a matrix of decimal strings: {e}") from None
        return ExchangeMatrix.from_rows(rows, self.allow_degenerate)

    def model(self) -> MarketModel:
        try:
            return MarketModel(
                tuple(float(x) for x in self.require("s0")),
                PiecewiseConstant.from_config(self.require("r")),
                PiecewiseConstant.from_config(self.require("b")),
                PiecewiseConstant.from_config(self.require("sigma")),
                float(self.require("T")),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"malformed market data: {e}") from None

    def claim(self) -> Claim:
        c = self.require("claim")
        if not isinstance(c, dict):
            raise ConfigError("claim must be an object")
        return Claim.from_config(c)

    def periods(self) -> int:
        p = self.require("periods")
        if not isinstance(p, int) or p < 1:
            raise ConfigError("periods must be a positive integer")
        return p

    def int_key(self, key: str, default: int) -> int:
        v = self.data.get(key, default)
        if not isinstance(v, int) or v < 1:
            raise ConfigError(f"{key} must be a positive integer")
        return v


# ---------------------------------------------------------------------------
# output helpers


def _enc(x):
    if isinstance(x, Fraction):
        return rat_str(x)
    if isinstance(x, (list, tuple)):
        return [_enc(y) for y in x]
    if isinstance(x, dict):
        return {str(k): _enc(v) for k, v in x.items()}
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_json(out: Path, name: str, obj) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(json.dumps(_enc(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


# ---------------------------------------------------------------------------
# commands


def cmd_cone(cfg: RunConfig, out: Path) -> dict:
    ex = cfg.exchange()
    spec = build_cone(ex)
    result = {
        "mu": ex.to_json(),
        "pi": [[rat_str(x) for x in row] for row in ex.pi],
        "pair_generators": list(spec.generators.rays),
        "extreme_rays": list(spec.extreme_rays),
        "dual_generators": list(spec.dual_generators),
        "cone": spec.cone.to_dict(),
    }
    if "prices" in cfg.data:
        y = vec(cfg.data["prices"])
        result["physical"] = {"prices": list(y), "cone": physical_cone(spec, y).to_dict()}
    _write_json(out, "cone.json", result)
    return {"extreme_rays": len(spec.extreme_rays), "dual_generators": len(spec.dual_generators)}


def cmd_decompose(cfg: RunConfig, out: Path) -> dict:
    spec = build_cone(cfg.exchange())
    alpha = vec(cfg.require("alpha"))
    B = decompose(spec, alpha)
    back = apply_transfers(spec.exchange, B)
    if back != alpha:
        raise InternalError("decomposition does not reproduce alpha")
    _write_json(out, "decompose.json", {"alpha": list(alpha), "B": [list(r) for r in B], "reconstructed": list(back)})
    return {"total_transfer": rat_str(sum((x for r in B for x in r), Fraction(0)))}


def cmd_tree(cfg: RunConfig, out: Path) -> dict:
    model = cfg.model()
    if cfg.mode == "mc":
        n_paths = cfg.int_key("n_paths", 1000)
        n_steps = cfg.int_key("n_steps", cfg.data.get("periods", 16))
        paths = simulate_paths(model, n_paths, n_steps, cfg.seed)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "paths.csv", "w", encoding="utf-8", newline="") as fh:
            write_paths_csv(paths, fh)
        return {"paths": n_paths, "steps": n_steps}
    tree = build_tree(model, cfg.periods())
    _write_json(out, "tree.json", tree.to_dict())
    return {"nodes": len(tree.nodes), "leaves": len(tree.levels[-1])}


def cmd_superhedge(cfg: RunConfig, out: Path) -> dict:
    spec = build_cone(cfg.exchange())
    tree = build_tree(cfg.model(), cfg.periods())
    claim = cfg.claim()
    res = backward_sets(tree, spec, claim)
    dpp = {u: dpp_check(res, u) for u in range(1, tree.periods)}
    oracle = SuperhedgeOracle(tree, spec, claim)
    spot = []
    delta = Fraction(1, 1000)
    for v in res.root.vertices:
        spot.append({"xi": list(v), "expected": True, "oracle": oracle.member(v)})
        below = tuple(x - delta for x in v)
        spot.append({"xi": list(below), "expected": False, "oracle": oracle.member(below)})
    payload = res.to_dict()
    payload["root"] = res.root.to_dict()
    payload["dpp"] = dpp
    payload["oracle_spot_checks"] = spot
    payload["trace"] = res.trace
    _write_json(out, "superhedge.json", payload)
    with open(out / "root_vertices.csv", "w", encoding="utf-8", newline="") as fh:
        res.write_root_vertices_csv(fh)
    if not all(dpp.values()):
        raise InternalError("dynamic programming check failed", "dpp_check: exact equality")
    if any(s["oracle"] != s["expected"] for s in spot):
        raise InternalError("oracle disagrees with the recursion", "oracle equivalence")
    return {"root_vertices": len(res.root.vertices), "root_rays": len(res.root.rays), "dpp": all(dpp.values())}


def _queries(cfg: RunConfig, root_vertex) -> list[tuple[float, ...]]:
    if "queries" in cfg.data:
        return [tuple(float(x) for x in q) for q in cfg.data["queries"]]
    return [tuple(float(x) - off for x in root_vertex) for off in (0.0, 0.05, 0.1, 0.2, 0.4)]


def cmd_eps(cfg: RunConfig, out: Path) -> dict:
    spec = build_cone(cfg.exchange())
    model = cfg.model()
    claim = cfg.claim()
    L = float(claim.lipschitz)
    rows = []
    if cfg.mode == "mc":
        n_paths = cfg.int_key("n_paths", 2000)
        n_steps = cfg.int_key("n_steps", cfg.data.get("periods", 16))
        paths = simulate_paths(model, n_paths, n_steps, cfg.seed)
        vertex = [float(x) for x in claim_payoff(claim, tuple(float(s) for s in paths.S[:, -1, :].max(axis=0)))]
        for qi, xi in enumerate(_queries(cfg, vertex)):
            for e in cfg.eps:
                rate = mc_eps_success(paths, spec, claim, EpsQuery(xi, e, L))
                rows.append({"query": qi, "xi": list(xi), "eps": e, "success_rate": rate, "accepted": rate >= 1 - e})
    else:
        tree = build_tree(model, cfg.periods())
        root = backward_sets(tree, spec, claim).root
        solvers = {e: EpsSolver(tree, spec, claim, e) for e in cfg.eps}
        for qi, xi in enumerate(_queries(cfg, root.vertices[0])):
            for e in cfg.eps:
                rows.append({"query": qi, "xi": list(xi), "eps": e, "accepted": solvers[e].member(EpsQuery(xi, e, L))})
    _write_json(out, "eps.json", {"mode": cfg.mode, "L": L, "rows": rows})
    with open(out / "eps.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("query,eps,accepted\n")
        for r in rows:
            fh.write(f"{r['query']},{r['eps']!r},{int(r['accepted'])}\n")
    return {"queries": len({r["query"] for r in rows}), "accepted": sum(r["accepted"] for r in rows), "total": len(rows)}


def cmd_price(cfg: RunConfig, out: Path) -> dict:
    spec = build_cone(cfg.exchange())
    model = cfg.model()
    rng = np.random.default_rng(cfg.seed)
    if cfg.mode == "mc":
        n_paths = cfg.int_key("n_paths", 10_000)
        n_steps = cfg.int_key("n_steps", cfg.data.get("periods", 16))
        paths = simulate_paths(model, n_paths, n_steps, cfg.seed)
        v0 = [float(x) for x in cfg.data.get("v0", [1] * model.d)]
        vp = simulate_value(model, random_khat(rng, spec, paths.S), v0, paths)
        z0 = [float(x) for x in root_Z(spec, [Fraction(x) for x in model.s0])]
        Z = mc_consistent_Z(model, paths, z0)
        rep = mc_supermartingale_check(Z, vp.Vhat, spec, paths.S)
        payload = {"mode": "mc", "z0": z0, "supermartingale": rep.to_dict()}
        if "claim" in cfg.data:
            claim = cfg.claim()

            def payoff(S):
                return np.array([sum(x * s for x, s in zip(claim_payoff(claim, tuple(row)), row)) / row[0] for row in S])

            g = girsanov_reweight_check(model, payoff, n_paths, n_steps, cfg.seed)
            payload["reweighting"] = {"ok": g.ok, "reweighted": g.reweighted, "direct": g.direct, "se": g.se}
        _write_json(out, "price.json", payload)
        if not rep.ok:
            raise InternalError("Monte Carlo supermartingale check failed", "Z.Vhat supermartingale")
        return {"mean": rep.mean, "bound": rep.bound}
    tree = build_tree(model, cfg.periods())
    cpp = find_consistent_Z(tree, spec)
    cpp.validate(tree, spec)
    strategy = random_tree_strategy(rng, tree, spec)
    v0 = vec(cfg.data.get("v0", [0] * model.d))
    rep = supermartingale_check(tree, cpp, strategy, v0, spec)
    _write_json(
        out,
        "price.json",
        {
            "mode": "tree",
            "tree": tree.to_dict(Z=cpp.Z),
            "strategy": {str(k): list(v) for k, v in strategy.items()},
            "supermartingale": rep.to_dict(),
        },
    )
    if not rep.ok:
        raise InternalError("exact supermartingale check failed", "Z.Vhat supermartingale")
    return {"nodes": len(tree.nodes), "violations": rep.violations}


def cmd_verify(cfg: RunConfig, out: Path, quick: bool) -> dict:
    results = run_all(quick=quick)
    for r in results:
        print(r.line(), file=sys.stderr)
    _write_json(out, "verify.json", {"quick": quick, "results": [r.to_dict() for r in results]})
    if not all(r.ok for r in results):
        failed = [r.number for r in results if not r.ok]
        raise InternalError(f"criteria {failed} failed", "property suite")
    return {"passed": len(results)}


COMMANDS = ("cone", "decompose", "tree", "superhedge", "eps", "price", "verify")


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superhedging", description="Superhedging under proportional transaction costs.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    p.add_argument("--eps", type=_eps_list, help="comma-separated eps grid, e.g. 0.05,0.1")
    p.add_argument("--allow-degenerate", action="store_true", help="accept zero round-trip costs")
    p.add_argument("--mode", choices=("tree", "mc"), default="tree")
    p.add_argument("--quick", action="store_true", help="verify: reduced sample counts")
    return p


def _error(e: Exception, invariant: str) -> str:
    return json.dumps({"error": type(e).__name__, "invariant": invariant, "message": str(e)}, sort_keys=True)


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = RunConfig.load(args.config, args)
        if args.command == "verify":
            summary = cmd_verify(cfg, out, args.quick)
        else:
            summary = globals()[f"cmd_{args.command}"](cfg, out)
    except InternalError as e:
        print(_error(e, e.invariant))
        return 2
    except SuperhedgingError as e:
        print(_error(e, e.invariant))
        return 1
    except (ValueError, TypeError, KeyError) as e:
        print(_error(e, "RunConfig: known keys, valid sub-invariants"))
        return 1
    except Exception as e:  # noqa: BLE001 - last-resort report
        print(_error(e, "internal consistency"))
        return 2
    print(json.dumps({"command": args.command, "ok": True, **_enc(summary)}, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run())
