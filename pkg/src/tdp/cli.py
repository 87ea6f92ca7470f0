"""``tdp`` command line: parameter solving, protocol demo, attack tests, simulation and reports."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .trust import NoPositiveRoot, damping_cutoff, solve_cg, solve_cw, third_derivative_residual

log = logging.getLogger("tdp")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, seed=None, outputs=()) -> Path:
    """Resolved config, seed, version and output hashes; enough to rerun the command."""
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "artifact_version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "outputs": {name: _sha256(out_dir / name) for name in sorted(outputs)},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _emit(args, command: str, config: dict, seed, payload: dict, name: str) -> None:
    if args.output_dir is None:
        return
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_manifest(out, command, config, seed, [name])


# -- solve-params ---------------------------------------------------------------

def cmd_solve_params(args) -> int:
    t = time.perf_counter()
    try:
        c_g = solve_cg(args.sigma_bar, args.positive_prob, args.avg_delta)
    except NoPositiveRoot as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    c_w = solve_cw()
    x_star = args.sigma_bar * args.positive_prob * args.avg_delta
    res = {
        "sigma_bar": args.sigma_bar,
        "x_star": x_star,
        "c_g": c_g,
        "c_w": c_w,
        "cutoff": damping_cutoff(c_w, args.sigma_bar),
        "g3_residual": abs(third_derivative_residual(x_star, c_g)),
    }
    res["seconds"] = time.perf_counter() - t
    if args.json:
        print(json.dumps(res, sort_keys=True))
    else:
        print(f"c_g={c_g:.6f}  c_w={c_w:g}  cutoff={res['cutoff']}  x*={x_star:g}  g'''(x*) residual={res['g3_residual']:.3e}")
    cfg = {k: getattr(args, k) for k in ("sigma_bar", "positive_prob", "avg_delta")}
    _emit(args, "solve-params", cfg, None, {k: v for k, v in res.items() if k != "seconds"}, "params.json")
    return EXIT_OK


# -- demo-pairing ----------------------------------------------------------------

def cmd_demo_pairing(args) -> int:
    from .backend import BackendServer
    from .pairing import PairingSession, Role, decode_message, encode_message
    from .receipts import generate_receipt
    from .trust import TransactionType, TrustParams

    rng = random.Random(f"{args.seed}:demo")
    tp = TrustParams()
    bs = BackendServer.setup(tp, rng)
    ca, cb = bs.register("alice"), bs.register("bob")
    group = bs.params.group
    a = PairingSession(bs.params, ca, Role.INITIATOR, rng)
    b = PairingSession(bs.params, cb, Role.RESPONDER, rng)

    def wire(msg, label):
        data = encode_message(msg, group)
        print(f"  {label:<22} {len(data):4d} bytes")
        return decode_message(data, group)

    print("pairing alice -> bob")
    b.accept_key_share(wire(a.key_share(), "KeyShare(alice)"))
    a.accept_key_share(wire(b.key_share(), "KeyShare(bob)"))
    resp = b.answer_challenge(wire(a.make_challenge(), "Challenge"))
    conf = a.verify_response(wire(resp, "Response"))
    b.verify_confirm(wire(conf, "Confirm"))
    same = a.k == b.k
    print(f"  states: alice={a.state.name} bob={b.state.name}  keys equal={same}")

    lam = TransactionType(0, 0.5, tp.n_types)
    receipts = [generate_receipt(a, 0.9, 0.8, 1, lam, 0.0, 0, rng), generate_receipt(b, 0.9, 0.8, 1, lam, 0.0, 0, rng)]
    before = {d: bs.trust_of(d) for d in ("alice", "bob")}
    touched, rejected = bs.process_receipts(receipts, 0.0)
    for d in ("alice", "bob"):
        print(f"  trust {d}: {['%.5f' % v for v in before[d]]} -> {['%.5f' % v for v in bs.trust_of(d)]}")
    ok = same and a.confirmed and b.confirmed and not rejected
    payload = {"keys_equal": same, "confirmed": [a.confirmed, b.confirmed], "rejected": rejected,
               "trust": {d: bs.trust_of(d) for d in ("alice", "bob")}}
    _emit(args, "demo-pairing", {"trust": tp.to_dict()}, args.seed, payload, "demo.json")
    return EXIT_OK if ok else EXIT_FAIL


# -- attack-test -----------------------------------------------------------------

def cmd_attack_test(args) -> int:
    from .adversary import run_scenario

    seeds = range(args.seed, args.seed + args.seeds)
    result = run_scenario(args.scenario, trials=args.trials, seed=args.seed, seeds=seeds)
    print(result.line())
    if args.verbose:
        print(json.dumps(result.details, indent=2, sort_keys=True, default=str))
    cfg = {"scenario": args.scenario, "trials": args.trials, "seeds": args.seeds}
    _emit(args, "attack-test", cfg, args.seed, result.to_dict(), f"attack_{args.scenario}.json")
    return EXIT_OK if result.passed else EXIT_FAIL


# -- sim ---------------------------------------------------------------------------

_OVERRIDES = ("seed", "attacker_model", "attacker_selection", "attacker_pct", "attack_intensity",
              "duration", "trace_path", "n_devices", "qos_model")


def resolve_config(args):
    from .sim.config import SimConfig

    cfg = SimConfig.load(args.config) if args.config else SimConfig()
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    return cfg.replace(**changes) if changes else cfg


def run_sim(config_dict: dict, out_dir: str) -> dict:
    """Run one simulation and write its metrics and manifest to ``out_dir``."""
    from .sim.config import SimConfig
    from .sim.engine import run
    from .sim.metrics import collect_metrics

    cfg = SimConfig.from_dict(config_dict)
    record = run(cfg)
    out = Path(out_dir)
    files = collect_metrics(record, out)
    write_manifest(out, "sim", cfg.to_dict(), cfg.seed, files)
    return json.loads(files["summary.json"])


def cmd_sim(args) -> int:
    base = resolve_config(args)
    seeds = [base.seed] if args.seeds is None else list(range(base.seed, base.seed + args.seeds))
    out = Path(args.output_dir or "runs/sim")
    jobs = []
    for seed in seeds:
        cfg = base.replace(seed=seed)
        jobs.append((cfg.to_dict(), str(out if len(seeds) == 1 else out / f"seed-{seed}")))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(run_sim, *zip(*jobs)))
    else:
        summaries = [run_sim(c, d) for c, d in jobs]
    for (cfg, d), s in zip(jobs, summaries):
        atk = s["mean_trust_attacker"]
        print(f"{d}: seed={cfg['seed']} model={cfg['attacker_model']} transactions={s['transactions']} "
              f"benign={s['mean_trust_benign']:.4f} attacker={'n/a' if atk is None else f'{atk:.4f}'} "
              f"false_positives={s['false_positives']}")
    return EXIT_OK


# -- report ------------------------------------------------------------------------

def cmd_report(args) -> int:
    from .sim.metrics import compare_dirs

    try:
        rep = compare_dirs(args.baseline_dir, args.attack_dir)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for line in rep["lines"]:
        print(line)
    out = Path(args.output_dir or args.attack_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "attack_report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    cfg = {"baseline_dir": str(args.baseline_dir), "attack_dir": str(args.attack_dir)}
    if args.output_dir is not None:
        write_manifest(out, "report", cfg, None, ["attack_report.json"])
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdp", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve-params", help="solve c_g and c_w for an average transaction count")
    s.add_argument("--sigma-bar", type=float, default=50.0)
    s.add_argument("--positive-prob", type=float, default=0.5)
    s.add_argument("--avg-delta", type=float, default=0.125)
    s.add_argument("--json", action="store_true")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_solve_params)

    s = sub.add_parser("demo-pairing", help="register two devices, pair them and upload receipts")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_demo_pairing)

    s = sub.add_parser("attack-test", help="run one adversarial scenario; exit 0 iff it is defeated")
    s.add_argument("scenario", choices=["co1", "co2", "co3", "to1", "to2", "to3"])
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--seeds", type=int, default=1, help="number of simulation seeds (to2)")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_attack_test)

    s = sub.add_parser("sim", help="run the trace-driven simulator")
    s.add_argument("--config", help="YAML/JSON config or a previous manifest.json")
    s.add_argument("--output-dir")
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", type=int, help="run this many consecutive seeds from --seed")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--attacker-model", choices=["none", "TO1", "TO2", "TO3"])
    s.add_argument("--attacker-selection", choices=["random", "topTV", "topTC"])
    s.add_argument("--attacker-pct", type=float)
    s.add_argument("--attack-intensity", type=float)
    s.add_argument("--duration", type=float)
    s.add_argument("--n-devices", type=int)
    s.add_argument("--trace", dest="trace_path")
    s.add_argument("--qos-model", choices=["contact_duration", "data_volume", "constant"])
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("report", help="compare an attack run with its baseline")
    s.add_argument("baseline_dir")
    s.add_argument("attack_dir")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .sim.config import ConfigError

    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
