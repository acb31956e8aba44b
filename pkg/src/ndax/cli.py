"""Command-line entry point: ``ndax {check,synth,refine,monitor,simulate,bisim}``.

Exit codes: 0 success or passing verdict, 1 failing verdict (violations
found, objective infeasible, trace not covered), 2 usage or input error,
3 capacity limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

from . import congolog as cg
from .errors import AmbiguityError, CapacityError, CoverageError, NdaxError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _default_max_configs() -> int:
    raw = os.environ.get("NDAX_MAX_CONFIGS")
    if raw is None:
        return cg.DEFAULT_MAX_CONFIGS
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"NDAX_MAX_CONFIGS must be an integer, got {raw!r}") from None


# ------------------------------------------------------------- loading


def _theory(path):
    from .lang import load_theory

    return load_theory(Path(path))


def _pair(args):
    from .lang import load_mapping

    for flag in ("hl", "ll", "map"):
        if not getattr(args, flag):
            raise UsageError(f"--{flag} is required for {args.command}")
    hl = _theory(args.hl)
    ll = _theory(args.ll)
    return hl, ll, load_mapping(Path(args.map), hl, ll)


_CALL = re.compile(r"^\s*([A-Za-z_][\w]*)\s*\(([^()]*)\)\s*$")


def _program(text: str, theory, defs_paths) -> cg.Program:
    """Program text; items of a top-level ``;`` list may call named definitions."""
    from .lang import load_program, parse_program

    defs = {}
    for p in defs_paths or ():
        d = load_program(Path(p), theory)
        defs[d.name] = d
    if defs:
        parts = []
        for item in text.split(";"):
            mt = _CALL.match(item)
            if mt and mt.group(1) in defs:
                call_args = [a.strip() for a in mt.group(2).split(",") if a.strip()]
                parts.append(defs[mt.group(1)].instantiate(*call_args))
            else:
                parts.append(parse_program(item, theory))
        return cg.seq(*parts)
    return parse_program(text, theory)


def _objective(args, theory):
    from .lang import parse_formula

    if args.goal and args.program:
        raise UsageError("give either --goal or --program, not both")
    if args.goal:
        return parse_formula(args.goal, theory)
    if args.program:
        return _program(args.program, theory, args.defs)
    raise UsageError("an objective is required: --goal FORMULA or --program PROGRAM")


# ------------------------------------------------------------- output


class _Out:
    def __init__(self, args):
        self.fmt = args.format
        self.path = getattr(args, "out", None)
        self.lines: list = []

    def text(self, line: str = "") -> None:
        self.lines.append(line)

    def emit(self, payload: dict | None) -> None:
        if self.fmt == "json":
            body = json.dumps(payload, indent=2) + "\n"
        else:
            body = "\n".join(self.lines) + ("\n" if self.lines else "")
        if self.path:
            Path(self.path).write_text(body, encoding="utf-8")
        else:
            sys.stdout.write(body)


def _validation_json(th, rep) -> dict:
    return {
        "theory": th.name,
        "status": "pass" if rep.ok else "fail",
        "states_checked": rep.states_checked,
        "violations": [
            {
                "kind": v.kind,
                "state": th.describe(v.state),
                "action": str(v.action),
                **({"reaction": str(v.reaction)} if v.reaction is not None else {}),
            }
            for v in rep.violations
        ],
    }


# ------------------------------------------------------------- commands


def cmd_check(args) -> int:
    from .abstraction import check_abstraction
    from .theory import validate_ndbat

    out = _Out(args)
    theories = []
    if args.theory:
        theories = [_theory(p) for p in args.theory]
        m = None
    else:
        hl, ll, m = _pair(args)
        theories = [hl, ll]
    payload = {"command": "check", "validation": [], "checks": []}
    ok = True
    for th in theories:
        rep = validate_ndbat(th, args.depth if args.bounded else None)
        ok &= rep.ok
        payload["validation"].append(_validation_json(th, rep))
        out.text(f"validate {th.name}: {'pass' if rep.ok else 'FAIL'} ({rep.states_checked} states)")
        for v in rep.violations[:5]:
            out.text(f"  {v.kind}: {v.action} at {{{', '.join(th.describe(v.state, True))}}}")
    if m is not None:
        checks = ["proper", "inev_term", "agt_exec", "env_exec", "sound", "complete"]
        if args.checks:
            checks = [c.strip() for c in args.checks.split(",") if c.strip()]
        elif args.all:
            checks.append("sd")
        try:
            report = check_abstraction(theories[0], theories[1], m, checks, args.max_configs)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        ok &= report.ok
        payload["checks"] = report.to_json()["checks"]
        out.text(report.render())
    payload["ok"] = bool(ok)
    out.text(f"verdict: {'pass' if ok else 'FAIL'}")
    out.emit(payload)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_synth(args) -> int:
    from .strategic import solve_goal_game, solve_program_game, weak_plan

    if not args.theory or len(args.theory) != 1:
        raise UsageError("synth needs exactly one --theory")
    th = _theory(args.theory[0])
    obj = _objective(args, th)
    s0 = th.initial_state
    out = _Out(args)
    mode = args.mode or ("program" if isinstance(obj, cg.Program) else "strong")
    if mode == "program" and not isinstance(obj, cg.Program):
        raise UsageError("--mode program needs --program")
    if mode in ("weak", "strong") and isinstance(obj, cg.Program):
        raise UsageError(f"--mode {mode} needs --goal")
    if mode == "weak":
        r = weak_plan(th, s0, obj, bound=args.depth)
        payload = {"command": "synth", "mode": "weak", "found": r.found, "plan": [str(a) for a in r.plan], "trace": [str(a) for a in r.trace]}
        out.text(f"weak plan: {'found' if r else 'none'} (bound {args.depth})")
        for a in r.plan:
            out.text(f"  {a}")
        out.emit(payload)
        return EXIT_OK if r else EXIT_FAIL
    if mode == "strong":
        r = solve_goal_game(th, s0, obj, args.max_configs)
    else:
        sd = bool(cg.check_situation_determined(th, obj, s0, args.max_configs))
        r = solve_program_game(th, obj, s0, allow_non_sd=not sd, limit=args.max_configs)
    payload = {
        "command": "synth",
        "mode": mode,
        "agent_wins": r.agent_wins,
        "objective": r.objective,
        "explored": r.explored,
        "strategy": r.strategy.to_json() if r.strategy is not None else None,
    }
    out.text(f"{r.objective}: {'agent wins' if r else 'agent loses'} ({r.explored} nodes)")
    if args.out:
        # a strategy file holds just the strategy, loadable by simulate --strategy
        if r.strategy is not None:
            Path(args.out).write_text(r.strategy.dumps(), encoding="utf-8")
        out.path = None
        out.text(f"strategy written to {args.out}" if r.strategy is not None else "no strategy written")
    elif r.strategy is not None:
        for e in r.strategy.to_json()["decisions"]:
            where = e.get("program")
            out.text(f"  {{{', '.join(th.describe(th.state_from_atoms(e['key']), True))}}}{' @ ' + where if where else ''} -> {e['action']}")
    out.emit(payload)
    return EXIT_OK if r else EXIT_FAIL


def cmd_refine(args) -> int:
    from .pipeline import synthesize_and_refine

    hl, ll, m = _pair(args)
    obj = _objective(args, hl)
    rs = synthesize_and_refine(hl, ll, m, obj, limit=args.max_configs)
    out = _Out(args)
    payload = rs.to_json()
    out.text(f"{rs.hl_result.objective}: {'refined' if rs else 'infeasible at the high level'}")
    for e in payload["ll_decisions"]:
        out.text(f"  {{{', '.join(ll.describe(ll.state_from_atoms(e['key']), True))}}} -> {e['action']}")
    if args.format == "text" and args.out:
        out.fmt = "json"  # a strategy file is always JSON
    out.emit(payload)
    return EXIT_OK if rs else EXIT_FAIL


def _explanation_text(res) -> list:
    lines = [f"lp = {res.lp} of {res.length}"]
    lines.append("hl_sequence: " + ("; ".join(map(str, res.hl_sequence)) or "(empty)"))
    for r in res.residual:
        lines.append(f"  in progress: {r.action} with {', '.join(map(str, r.reactions))}")
    if not res.covered:
        lines.append("  the trace leaves every refinement (not covered)")
    return lines


def cmd_monitor(args) -> int:
    from .lang import parse_action, parse_formula
    from .monitoring import advance_tracker, explain, hl_query, load_trace, next_possible_hl_actions, start_tracker

    hl, ll, m = _pair(args)
    out = _Out(args)
    if args.follow:
        fr = start_tracker(m)
        for i, line in enumerate(sys.stdin, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a = load_trace([json.loads(line)], ll)[0] if line.startswith("{") else parse_action(line, ll)
            try:
                fr = advance_tracker(fr, a)
            except CoverageError as exc:
                msg = {"step": len(fr.trace) + 1, "action": str(a), "covered": False}
                print(json.dumps(msg) if args.format == "json" else f"[{msg['step']}] {a}: {exc}", flush=True)
                return EXIT_FAIL
            lp = max(k for k, seqs in enumerate(fr.completed) if seqs)
            seqs = fr.completed[lp]
            rec = {"step": len(fr.trace), "action": str(a), "lp": lp, "hl_sequences": [[str(x) for x in s] for s in seqs]}
            if args.format == "json":
                print(json.dumps(rec), flush=True)
            else:
                shown = " | ".join("; ".join(map(str, s)) or "(empty)" for s in seqs)
                print(f"[{rec['step']}] {a}: lp={lp} {shown}", flush=True)
        return EXIT_OK
    if not args.trace:
        raise UsageError("monitor needs --trace FILE or --follow")
    trace = load_trace(Path(args.trace), ll)
    try:
        res = explain(m, trace)
    except AmbiguityError as exc:
        out.text(f"ambiguous: {exc}")
        out.emit({"command": "monitor", "error": "ambiguous", "parses": [[str(a) for a in s] for s in exc.parses]})
        return EXIT_FAIL
    payload = res.to_json()
    for line in _explanation_text(res):
        out.text(line)
    if args.query:
        f = parse_formula(args.query, hl)
        sat = hl_query(hl, res.hl_sequence, f, "satisfiable")
        ent = hl_query(hl, res.hl_sequence, f, "entailed")
        payload["query"] = {"formula": args.query, "satisfiable": sat, "entailed": ent}
        out.text(f"query {args.query}: satisfiable={sat} entailed={ent}")
    if args.next:
        nxt = [(a, s, e) for a, s, e in next_possible_hl_actions(hl, res.hl_sequence) if s]
        payload["next"] = [{"action": str(a), "satisfiable": s, "entailed": e} for a, s, e in nxt]
        out.text("possible next HL actions:")
        for a, s, e in nxt:
            out.text(f"  {a}{' (certainly possible)' if e else ''}")
    out.emit(payload)
    return EXIT_OK if res.covered else EXIT_FAIL


def _adversary(args):
    from .pipeline import prefer

    spec = args.adversary
    if spec is None:
        return args.seed if args.seed is not None else "exhaustive"
    if spec == "exhaustive":
        return "exhaustive"
    if spec == "random":
        return args.seed if args.seed is not None else 0
    if spec.startswith("prefer:"):
        return prefer(*[x.strip() for x in spec[len("prefer:"):].split(",") if x.strip()])
    raise UsageError(f"unknown adversary {spec!r}; use exhaustive, random or prefer:R1,R2")


def cmd_simulate(args) -> int:
    from .abstraction import map_fluent_formula
    from .lang import parse_formula
    from .pipeline import simulate, synthesize_and_refine
    from .strategic import load_strategy

    out = _Out(args)
    if args.strategy:
        paths = args.theory or ([args.ll] if args.ll else [])
        if len(paths) != 1:
            raise UsageError("simulate --strategy needs exactly one --theory (or --ll for a refined strategy)")
        th = _theory(paths[0])
        strategy = load_strategy(Path(args.strategy), th)
        goal = parse_formula(args.goal, th) if args.goal else None
    else:
        hl, ll, m = _pair(args)
        if not args.goal:
            raise UsageError("simulate without --strategy needs --goal (an HL goal to refine)")
        hl_goal = parse_formula(args.goal, hl)
        strategy = synthesize_and_refine(hl, ll, m, hl_goal, limit=args.max_configs)
        if not strategy:
            out.text("infeasible at the high level")
            out.emit({"command": "simulate", "feasible": False, "outcomes": []})
            return EXIT_FAIL
        th, goal = ll, map_fluent_formula(m, hl_goal)
    adv = _adversary(args)
    res = simulate(th, strategy, goal, adv, limit=args.steps)
    outcomes = res if isinstance(res, list) else [res]
    ok = all(o.met for o in outcomes)
    for i, o in enumerate(outcomes, 1):
        out.text(f"run {i}: {'goal met' if o.met else 'goal NOT met'} after {o.steps} steps ({o.reason}; {o.adversary})")
        for a in o.trace:
            out.text(f"  {a}")
    out.text(f"verdict: {'pass' if ok else 'FAIL'} ({len(outcomes)} runs)")
    out.emit({"command": "simulate", "ok": ok, "outcomes": [o.to_json() for o in outcomes]})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bisim(args) -> int:
    from .abstraction import Analysis, compute_m_bisimulation

    hl, ll, m = _pair(args)
    l0 = ll.initial_state
    h0 = Analysis.of(m, args.max_configs).image(l0) if args.hl_state is None else hl.state_from_atoms(args.hl_state.split(";"))
    rel = compute_m_bisimulation((hl, h0), (ll, l0), m, args.max_configs)
    out = _Out(args)
    if rel is None:
        out.text("no m-bisimulation contains the initial pair")
        out.emit({"command": "bisim", "found": False, "pairs": []})
        return EXIT_FAIL
    pairs = sorted(rel.pairs, key=lambda p: (ll.describe(p[1]), hl.describe(p[0])))
    out.text(f"m-bisimulation with {len(pairs)} pairs (initial pair included)")
    for h, s in pairs:
        out.text(f"  {{{', '.join(hl.describe(h, True))}}} ~ {{{', '.join(ll.describe(s, True))}}}")
    out.emit(
        {
            "command": "bisim",
            "found": True,
            "initial": {"hl": hl.describe(h0), "ll": ll.describe(l0)},
            "pairs": [{"hl": hl.describe(h), "ll": ll.describe(s)} for h, s in pairs],
        }
    )
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "synth": cmd_synth,
    "refine": cmd_refine,
    "monitor": cmd_monitor,
    "simulate": cmd_simulate,
    "bisim": cmd_bisim,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ndax", description="Abstraction, synthesis and monitoring for nondeterministic action theories.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, pair=True):
        if pair:
            sp.add_argument("--hl", help="high-level theory (.ndt)")
            sp.add_argument("--ll", help="low-level theory (.ndt)")
            sp.add_argument("--map", help="refinement mapping (.ndm)")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--max-configs", type=int, default=None, help="configuration/state limit (default 100000, env NDAX_MAX_CONFIGS)")
        sp.add_argument("--out", help="write the report here instead of stdout")

    def objective(sp):
        sp.add_argument("--goal", help="goal formula")
        sp.add_argument("--program", help="agent program text; ';'-separated calls may name --defs programs")
        sp.add_argument("--defs", action="append", help="program definition file (.ndp), repeatable")

    c = sub.add_parser("check", help="validate theories and check a refinement mapping")
    common(c)
    c.add_argument("--theory", action="append", help="validate this theory only (repeatable)")
    c.add_argument("--all", action="store_true", help="also report situation-determinacy of the mapped programs")
    c.add_argument("--checks", help="comma list from proper,inev_term,agt_exec,env_exec,sound,complete,sd")
    c.add_argument("--depth", type=int, default=6, help="reachability bound with --bounded (default 6)")
    c.add_argument("--bounded", action="store_true", help="validate only states within --depth steps")

    s = sub.add_parser("synth", help="weak plan, strong plan or program strategy for one theory")
    common(s, pair=False)
    s.add_argument("--theory", action="append")
    objective(s)
    s.add_argument("--mode", choices=("weak", "strong", "program"))
    s.add_argument("--depth", type=int, default=6, help="weak-plan length bound (default 6)")

    r = sub.add_parser("refine", help="synthesize at the high level and refine to the low level")
    common(r)
    objective(r)

    mo = sub.add_parser("monitor", help="explain a low-level trace in high-level terms")
    common(mo)
    mo.add_argument("--trace", help="JSON trace file")
    mo.add_argument("--follow", action="store_true", help="read actions from stdin, one per line")
    mo.add_argument("--query", help="HL formula to evaluate after the explanation")
    mo.add_argument("--next", action="store_true", help="list HL actions that may occur next")

    si = sub.add_parser("simulate", help="run a strategy against an adversary")
    common(si)
    si.add_argument("--theory", action="append")
    si.add_argument("--strategy", help="strategy file (rules, decision table or refined strategy)")
    si.add_argument("--goal")
    si.add_argument("--adversary", help="exhaustive (default), random, or prefer:R1,R2")
    si.add_argument("--seed", type=int)
    si.add_argument("--steps", type=int, default=100, help="step limit per run (default 100)")

    b = sub.add_parser("bisim", help="compute the m-bisimulation between initial states")
    common(b)
    b.add_argument("--hl-state", help="';'-separated HL atoms for the initial HL state (default: image of the LL one)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        if args.max_configs is None:
            args.max_configs = _default_max_configs()
        return COMMANDS[args.command](args)
    except CapacityError as exc:
        print(f"ndax: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (UsageError, NdaxError, OSError, json.JSONDecodeError) as exc:
        print(f"ndax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
