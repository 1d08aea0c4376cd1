"""Command-line interface.

Subcommands: gen, detect, bounds, classify, sweep, phase-diagram, verify.
Exit codes: 0 success, 1 suite/assertion failure, 2 usage error,
3 capability/budget error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import detectors as det
from . import lab
from . import models as mod
from . import theory as th
from .errors import CapabilityError, CirclabError, ConfigError

_MODEL_CHOICES = list(th.MODELS)
_DETECTOR_CHOICES = ["interval", "coherence", "rayleigh", "variance",
                     "known-theta"]


def _add_model_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=_MODEL_CHOICES)
    parser.add_argument("--N", type=int)
    parser.add_argument("--K", type=int)
    parser.add_argument("--n", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--kappa", type=float)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="circlab",
        description="Planted circular-structure detection laboratory")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset file")
    _add_model_params(p)
    p.add_argument("--h1", action="store_true", help="plant the alternative")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--reveal-truth", action="store_true")

    p = sub.add_parser("detect", help="run one detector on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True, choices=_DETECTOR_CHOICES)
    p.add_argument("--tau", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--policy", default=None)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=0.5)

    p = sub.add_parser("bounds", help="evaluate analytic error bounds")
    _add_model_params(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--c-n", dest="c_n", type=float)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--B", type=int, default=8)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--detector", choices=_DETECTOR_CHOICES, default="interval")

    p = sub.add_parser("classify", help="classify a parameter point")
    _add_model_params(p)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--eps-n", dest="eps_n", type=float)
    p.add_argument("--slack", type=float)

    for name in ("sweep", "phase-diagram"):
        p = sub.add_parser(name, help=f"run a parameter {name}")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out")
        if name == "phase-diagram":
            p.add_argument("--svg", action="store_true")

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=list(lab.VERIFY_SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=lab.DEFAULT_VERIFY_SEED)
    p.add_argument("--threads", type=int)
    return top


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError(f"missing required flags: {', '.join('--' + m for m in missing)}")


def _cmd_gen(args) -> int:
    _require(args, "model")
    if args.model.startswith("flat"):
        _require(args, "N", "K")
    else:
        _require(args, "n", "k")
    if args.model.endswith("hard"):
        _require(args, "tau")
        signal = mod.HardCluster(tau=args.tau)
    else:
        _require(args, "kappa")
        signal = mod.VonMises(kappa=args.kappa)
    rng = mod.rng_for(args.seed, 7)
    if args.model.startswith("flat"):
        sample = mod.gen_flat(args.N, args.K, signal, args.h1, rng)
        subset_size = args.K
    else:
        sample = mod.gen_community(args.n, args.k, signal, args.h1, rng)
        subset_size = args.k
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        mod.write_dataset(fh, sample, signal=signal, seed=args.seed,
                          K=subset_size if args.model.startswith("flat") else None,
                          k=subset_size if args.model.startswith("comm") else None,
                          reveal_truth=args.reveal_truth)
    print(f"wrote {args.out}")
    return 0


def _report_line(report: det.TestReport) -> str:
    theta = "none" if report.witness_theta is None else "%.17g" % report.witness_theta
    subset = "none" if report.witness_subset is None \
        else ",".join(str(i) for i in report.witness_subset)
    return (f"statistic={report.statistic:.17g} threshold={report.threshold:.17g} "
            f"decision={report.decision.value} witness_theta={theta} "
            f"witness_subset={subset}")


def _cmd_detect(args) -> int:
    try:
        with open(args.data, "r", encoding="utf-8") as fh:
            sample, meta = mod.read_dataset(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {args.data!r}: {exc}") from exc
    is_flat = isinstance(sample, mod.FlatSample)
    k = args.k if args.k is not None else \
        (int(meta["k"]) if "k" in meta else None)
    K = int(meta["K"]) if "K" in meta else k
    if args.test in ("interval", "known-theta") and args.tau is None:
        raise ConfigError("--tau is required for interval and known-theta tests")
    if args.test == "interval":
        if is_flat:
            policy_spec = args.policy or ("fixed:%g" % args.gamma
                                          if args.gamma is not None else "a1")
            if policy_spec == "a1":
                if K is None:
                    raise ConfigError("policy a1 needs --k or a K header")
                policy: det.ThresholdPolicy = det.Fixed(value=float(K))
            elif policy_spec == "a2":
                policy = det.FlatHardA2()
            elif policy_spec == "vm":
                policy = det.FlatVM()
            elif policy_spec.startswith(("fixed:", "custom:")):
                kind, _, val = policy_spec.partition(":")
                cls = det.Fixed if kind == "fixed" else det.Custom
                policy = cls(value=float(val))
            else:
                raise ConfigError(f"unknown policy {policy_spec!r}")
            report = det.interval_test_flat(sample, args.tau, policy, K=K,
                                            kappa=args.kappa)
        else:
            if k is None:
                raise ConfigError("community interval test needs --k")
            report = det.interval_test_community(sample, k, args.tau)
    elif args.test == "known-theta":
        if args.gamma is None:
            raise ConfigError("known-theta test needs --gamma")
        report = det.known_theta_test_flat(sample, args.tau, args.gamma,
                                           theta=args.theta)
    elif args.test == "coherence":
        _require(args, "kappa")
        if k is None:
            raise ConfigError("coherence test needs --k")
        report = det.coherence_test(sample, k, args.kappa, epsilon=args.epsilon)
    elif args.test == "rayleigh":
        _require(args, "kappa")
        if k is None:
            raise ConfigError("rayleigh test needs --k")
        report = det.rayleigh_test(sample, k, args.kappa)
    else:
        if args.sigma2 is None:
            raise ConfigError("variance test needs --sigma2")
        if k is None:
            raise ConfigError("variance test needs --k")
        report = det.variance_test(sample, k, args.sigma2)
    print(_report_line(report))
    return 0


def _print_bound(prefix: str, name: str, bound: th.BoundValue) -> None:
    print(f"{prefix}{name}={bound.value:.17g} applicable="
          f"{str(bound.applicable).lower()}")


def _cmd_bounds(args) -> int:
    _require(args, "model")
    model = args.model
    if model == "flat-hard":
        _require(args, "N", "K", "tau")
        if args.detector == "known-theta":
            gamma = args.gamma if args.gamma is not None else \
                det.resolve_flat_threshold(det.FlatHardA2(c_n=args.c_n),
                                           args.N, args.tau, K=args.K)[0]
            bounds = th.known_theta_bounds(args.N, args.K, args.tau, gamma)
        else:
            gamma = args.gamma if args.gamma is not None else float(args.K)
            bounds = th.flat_hard_bounds(args.N, args.K, args.tau, gamma)
            print(f"gamma={gamma:.17g}")
    elif model == "flat-vm":
        _require(args, "N", "K", "tau", "kappa")
        bounds = th.flat_vm_bounds(args.N, args.K, args.kappa, args.tau,
                                   c_n=args.c_n, gamma=args.gamma)
    elif model == "comm-hard":
        _require(args, "n", "k", "tau")
        if args.detector == "variance":
            _require(args, "sigma2")
            bounds = th.comm_variance_bounds(args.n, args.k, args.sigma2,
                                             tau=args.tau, B=args.B)
        else:
            bounds = th.comm_interval_bounds(args.n, args.k, args.tau)
    else:
        _require(args, "n", "k", "kappa")
        if args.detector == "coherence":
            bounds = th.comm_coherence_bounds(args.n, args.k, args.kappa,
                                              args.epsilon, B=args.B)
        elif args.detector == "rayleigh":
            bounds = th.rayleigh_bounds(args.n, args.k, args.kappa)
        elif args.detector == "variance":
            _require(args, "sigma2")
            bounds = th.comm_variance_bounds(args.n, args.k, args.sigma2,
                                             kappa=args.kappa, B=args.B)
        else:
            _require(args, "tau")
            bounds = th.comm_interval_bounds(args.n, args.k, args.tau,
                                             kappa=args.kappa)
    for name, bound in bounds.items():
        _print_bound("", name, bound)
    params = {}
    for key in ("N", "K", "n", "k", "tau", "kappa"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    try:
        fns = th.impossibility_functionals(model, **{
            key: params[key] for key in params
            if key in ("N", "K", "n", "k", "tau", "kappa")
            and (key != "tau" or model.endswith("hard"))
            and (key != "kappa" or model.endswith("vm"))})
        for name, bound in fns.items():
            _print_bound("impossibility_", name, bound)
    except CirclabError:
        pass
    return 0


def _cmd_classify(args) -> int:
    _require(args, "model")
    model = args.model
    params = {}
    if model.startswith("flat"):
        _require(args, "N", "K")
        params.update(N=args.N, K=args.K)
    else:
        _require(args, "n", "k")
        params.update(n=args.n, k=args.k)
    if model.endswith("hard"):
        _require(args, "tau")
        params["tau"] = args.tau
    else:
        _require(args, "kappa")
        params["kappa"] = args.kappa
    tun = th.RegimeTunables(eps=args.eps, eps_n=args.eps_n, slack=args.slack)
    verdict = th.regime_classify(model, params, tun)
    for key, value in sorted(verdict.condition_values.items()):
        if isinstance(value, float):
            print(f"{key}={value:.17g}")
        else:
            print(f"{key}={value}")
    print(f"citation={verdict.citation or 'none'}")
    print(f"verdict={verdict.verdict}")
    return 0


def _load_sweep_config(args):
    data = lab.parse_config_file(args.config)
    axes = data.pop("sweep_axes", [])
    threads = data.pop("threads", None)
    svg = data.pop("svg", False)
    tun_kwargs = {k: data.pop(k) for k in ("eps", "eps_n", "slack")
                  if k in data}
    tunables = th.RegimeTunables(**tun_kwargs) if tun_kwargs else None
    config = lab.config_from_dict(data)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.threads is not None:
        threads = args.threads
    if threads is None:
        threads = os.cpu_count() or 1
    out = args.out or data.get("out")
    return config, axes, threads, out, svg, tunables


def _cmd_sweep(args) -> int:
    config, axes, threads, out, _, tunables = _load_sweep_config(args)
    if out is None:
        raise ConfigError("sweep needs --out or an out= config key")
    points = lab.sweep(axes, config, threads=threads, out=out,
                       tunables=tunables)
    failed = sum(1 for p in points if p.failed is not None)
    print(f"wrote {out}: {len(points)} cells, {failed} failed")
    return 0


def _cmd_phase_diagram(args) -> int:
    config, axes, threads, out, svg_cfg, tunables = _load_sweep_config(args)
    if out is None:
        raise ConfigError("phase-diagram needs --out or an out= config key")
    svg = bool(getattr(args, "svg", False) or svg_cfg)
    lab.phase_diagram(axes, config, out, threads=threads, svg=svg,
                      tunables=tunables)
    print(f"wrote {out}.csv and {out}_boundary.csv"
          + (f" and {out}.svg" if svg else ""))
    return 0


def _cmd_verify(args) -> int:
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    reports = lab.verify(args.suite, seed=args.seed, threads=threads)
    ok = True
    for rep in reports:
        for line in rep.lines():
            print(line)
        ok = ok and rep.passed
    print(f"verify={'pass' if ok else 'fail'}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen": _cmd_gen,
        "detect": _cmd_detect,
        "bounds": _cmd_bounds,
        "classify": _cmd_classify,
        "sweep": _cmd_sweep,
        "phase-diagram": _cmd_phase_diagram,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CirclabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
