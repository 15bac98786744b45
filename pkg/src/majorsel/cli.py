"""Command-line front end.

Every subcommand prints a JSON report (``"schema": 1``) on stdout and a short
table on stderr.  The exit code is 0 only when nothing failed validation and
no checked guarantee was violated.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from majorsel.core import (
    SCHEMA_VERSION,
    ValidationError,
    dump_number,
    dump_policy,
    instance_from_doc,
    policy_from_doc,
    validate_policy,
)
from majorsel.evaluate import (
    BudgetExceeded,
    UtilityModel,
    audit_alpha,
    evaluate_exact,
    evaluate_mc,
    prefix_ratios,
    sorted_prefixes,
)
from majorsel.flowmajor import load_network, prefix_sum_oracle
from majorsel.fullrev import build_bernoulli_policy, build_fullrev_twomaj_policy, fullrev_flow
from majorsel.lowerbound import (
    R,
    build_sk_policy,
    make_lb_instance,
    sk_prefix_closed_form,
    sk_utilities_closed_form,
    sk_x,
    universal_floor,
)
from majorsel.posterior import ReceiverModel
from majorsel.singlemean import DEFAULT_EPSILON, build_singlemean_policy, singlemean_certificate


class CliError(Exception):
    pass


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return dump_number(x)


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliError(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: parse failure: {exc}") from exc


def _load_instance(path: str, mode: str):
    doc = _read_json(path)
    if mode != "auto":
        doc = dict(doc, mode=mode)
    return instance_from_doc(doc)


def _load_policy(path: str, instance):
    doc = _read_json(path)
    if instance.mode == "float":
        doc = dict(doc, mode="float")
    policy = policy_from_doc(doc)
    problems = validate_policy(instance, policy)
    if problems:
        raise CliError("invalid policy: " + "; ".join(problems))
    return policy


def _epsilon(raw: str) -> Fraction:
    try:
        eps = Fraction(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise CliError(f"bad epsilon {raw!r}") from exc
    if eps <= 0:
        raise CliError("epsilon must be positive")
    return eps


def _table(rows: list, header: list) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _show(f) -> str:
    if isinstance(f, Fraction):
        return f"{f} (~{float(f):.6g})" if f.denominator != 1 else str(f)
    return f"{f:.6g}"


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_build(args) -> tuple[dict, str, bool]:
    inst = _load_instance(args.instance, args.mode)
    utility = UtilityModel(args.utility)
    report = {"command": "build", "kind": args.kind, "mode": inst.mode, "utility": utility.value}
    if args.kind == "bernoulli":
        policy = build_bernoulli_policy(inst)
    elif args.kind == "fullrev2":
        policy = build_fullrev_twomaj_policy(inst, utility)
        _, _, point = fullrev_flow(inst, utility)
        report["flow_utilities"] = [dump_number(u) for u in point.f]
    else:
        eps = _epsilon(args.epsilon)
        policy, plan = build_singlemean_policy(inst, eps, utility)
        report["epsilon"] = str(eps)
        report["plan"] = plan.to_doc()
    text = dump_policy(policy)
    if args.output:
        Path(args.output).write_text(text + "\n")
        report["policy_path"] = args.output
    else:
        report["policy"] = json.loads(text)
    report["components"] = len(policy.components)
    table = f"built {args.kind} policy with {len(policy.components)} component(s)"
    return report, table, True


def cmd_evaluate(args) -> tuple[dict, str, bool]:
    inst = _load_instance(args.instance, args.mode)
    policy = _load_policy(args.policy, inst)
    receiver = ReceiverModel.parse(args.receiver)
    utility = UtilityModel(args.utility)
    if args.mc is not None:
        rep = evaluate_mc(inst, policy, receiver, utility, samples=args.mc, seed=args.seed)
    else:
        rep = evaluate_exact(inst, policy, receiver, utility)
    report = dict(rep.to_doc(), command="evaluate")
    rows = []
    for i, u in enumerate(rep.utilities):
        row = [i, _show(u)]
        if rep.stderr is not None:
            row.append(f"{rep.stderr[i]:.3g}")
        rows.append(row)
    header = ["agent", "utility"] + (["stderr"] if rep.stderr is not None else [])
    table = _table(rows, header) + f"\ntotal {_show(rep.total)}  welfare_opt {_show(rep.welfare_opt)}"
    return report, table, True


def cmd_audit(args) -> tuple[dict, str, bool]:
    inst = _load_instance(args.instance, args.mode)
    policy = _load_policy(args.policy, inst)
    receiver = ReceiverModel.parse(args.receiver)
    utility = UtilityModel(args.utility)
    u = evaluate_exact(inst, policy, receiver, utility).utilities
    if args.against == "flow":
        _, _, point = fullrev_flow(inst, utility)
        ref = point.f
        source = "full-revelation flow optimum"
    else:
        other = _load_policy(args.against, inst)
        ref = evaluate_exact(inst, other, receiver, utility).utilities
        source = args.against
    ratios = prefix_ratios(u, ref)
    alpha = audit_alpha(u, ref)
    ok = args.max_alpha is None or alpha <= Fraction(args.max_alpha)
    report = {
        "command": "audit",
        "against": source,
        "utilities": [dump_number(x) for x in u],
        "reference": [dump_number(x) for x in ref],
        "prefix": [dump_number(x) for x in sorted_prefixes(u)],
        "reference_prefix": [dump_number(x) for x in sorted_prefixes(ref)],
        "ratios": [_num(r) for r in ratios],
        "alpha": _num(alpha),
        "ok": ok,
    }
    rows = [
        [k + 1, _show(a), _show(b), "inf" if r == math.inf else _show(r)]
        for k, (a, b, r) in enumerate(zip(sorted_prefixes(u), sorted_prefixes(ref), ratios))
    ]
    table = _table(rows, ["k", "prefix", "reference", "ratio"]) + f"\nalpha {_show(alpha) if alpha != math.inf else 'inf'}"
    return report, table, ok


def cmd_lowerbound(args) -> tuple[dict, str, bool]:
    n = args.n
    floor = universal_floor(n)
    report = {"command": "lowerbound", "n": n, "floor": floor}
    ok = True
    if args.k is not None:
        k = args.k
        closed = sk_utilities_closed_form(n, k)
        report.update(
            k=k,
            x={str(i): dump_number(x) for i, x in sk_x(n, k).items()},
            utilities=[dump_number(u) for u in closed],
            prefix=dump_number(sk_prefix_closed_form(n, k)),
            R=dump_number(R(n, k)),
        )
        if args.verify:
            got = evaluate_exact(make_lb_instance(n), build_sk_policy(n, k)).utilities
            report["verified"] = got == closed
            ok = got == closed
        rows = [[j, _show(u)] for j, u in enumerate(closed)]
        table = _table(rows, ["agent", "utility"]) + f"\nfloor {floor:.6g}"
    else:
        rows, bounds = [], []
        for k in range(1, n + 1):
            bounds.append({"k": k, "prefix": dump_number(sk_prefix_closed_form(n, k)), "R": dump_number(R(n, k))})
            rows.append([k, _show(sk_prefix_closed_form(n, k)), _show(R(n, k))])
        report["bounds"] = bounds
        table = _table(rows, ["k", "S_k prefix", "R_k"]) + f"\nfloor {floor:.6g}"
    return report, table, ok


def cmd_oracle(args) -> tuple[dict, str, bool]:
    p = Path(args.instance)
    if not p.exists():
        raise CliError(f"no such file: {args.instance}")
    net = load_network(p.read_text())
    value = prefix_sum_oracle(net, args.k)
    report = {"command": "oracle prefix-sum", "k": args.k, "value": dump_number(value)}
    return report, f"max sum of {args.k} smallest inflows: {_show(value)}", True


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="majorsel", description=__doc__.splitlines()[0])
    ap.add_argument("--mode", choices=["auto", "exact", "float"], default="auto",
                    help="numeric mode for loaded instances")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct a policy")
    b.add_argument("kind", choices=["bernoulli", "fullrev2", "singlemean"])
    b.add_argument("-i", "--instance", required=True)
    b.add_argument("-e", "--epsilon", default=str(DEFAULT_EPSILON))
    b.add_argument("--utility", choices=["value", "selection"], default="value")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_build)

    e = sub.add_parser("evaluate", help="per-agent expected utilities")
    e.add_argument("-i", "--instance", required=True)
    e.add_argument("-p", "--policy", required=True)
    e.add_argument("--receiver", default="exact", help="exact | approx:EPS")
    e.add_argument("--utility", choices=["value", "selection"], default="value")
    e.add_argument("--mc", type=int, help="Monte Carlo samples instead of exact")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("audit", help="prefix-sum comparison and alpha")
    a.add_argument("-i", "--instance", required=True)
    a.add_argument("-p", "--policy", required=True)
    a.add_argument("--against", required=True, help="flow | path to a policy")
    a.add_argument("--receiver", default="exact")
    a.add_argument("--utility", choices=["value", "selection"], default="value")
    a.add_argument("--max-alpha", help="fail when alpha exceeds this")
    a.set_defaults(func=cmd_audit)

    lb = sub.add_parser("lowerbound", help="hard family closed forms")
    lb.add_argument("--n", type=int, required=True)
    lb.add_argument("--k", type=int)
    lb.add_argument("--verify", action="store_true", help="also evaluate S_k exactly")
    lb.set_defaults(func=cmd_lowerbound)

    o = sub.add_parser("oracle", help="certificate oracles")
    osub = o.add_subparsers(dest="oracle", required=True)
    ps = osub.add_parser("prefix-sum")
    ps.add_argument("-i", "--instance", required=True, help="network JSON")
    ps.add_argument("-k", type=int, required=True)
    ps.set_defaults(func=cmd_oracle)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, table, ok = args.func(args)
    except (CliError, ValidationError, BudgetExceeded) as exc:
        print(json.dumps({"schema": SCHEMA_VERSION, "error": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = {"schema": SCHEMA_VERSION, **report}
    print(json.dumps(report, indent=2))
    print(table, file=sys.stderr)
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())
