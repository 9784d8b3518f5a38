"""Command-line interface.

Exit codes: 0 pass, 2 usage error, 3 violation candidate, 4 diagnostic or resource failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import cascade, channels, fock, lindblad, optimizer
from .channels import ChannelSpec
from .errors import CutoffTooSmallError, GmoeError, GridError, ResourceError, StepError
from .sampling import sample_fixed_entropy_state

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_DIAGNOSTIC = 0, 2, 3, 4
_SHORT = {"att": "C_att", "amp": "C_amp", "b2": "B2", "noise": "B2", "d": "D",
          "a1": "A1", "a2": "A2", "b1": "B1"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    channel: dict | None = None
    S0: float | None = None
    N0: float | None = None
    cutoff: int | None = None
    env_cutoff: int | None = None
    seed: int = 0
    restarts: int | None = None
    samples: int | None = None
    tolerance: float = 1e-4
    out: str | None = None
    format: str = "json"

    def resolve_entropy(self, required: bool = True) -> None:
        if self.S0 is not None and self.N0 is not None:
            raise UsageError("give exactly one of --S0 / --N0")
        if self.S0 is None and self.N0 is None:
            if required:
                raise UsageError("one of --S0 / --N0 is required")
            return
        if self.N0 is not None:
            self.S0 = fock.g_function(self.N0)
        else:
            self.N0 = fock.g_inverse(self.S0)

    def check_cutoff(self) -> None:
        if self.cutoff is not None and self.cutoff < 8:
            raise UsageError("--cutoff must be >= 8")


def parse_channel(text: str) -> ChannelSpec:
    """JSON object, or shorthand ``CLASS[,key=value...]`` (e.g. ``C_att,eta=0.5,N=1``)."""
    text = text.strip()
    if text.startswith("{"):
        return ChannelSpec.from_json(text)
    head, *rest = [t.strip() for t in text.split(",") if t.strip()]
    kind = _SHORT.get(head.lower(), head)
    obj = {"class": kind}
    for item in rest:
        if "=" not in item:
            raise UsageError(f"bad channel parameter {item!r}; expected key=value")
        k, v = item.split("=", 1)
        try:
            obj[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"channel parameter {k} is not a number: {v!r}") from None
    return ChannelSpec.from_dict(obj)


def _emit(report: dict, cfg: RunConfig, csv_text: str | None = None) -> None:
    text = csv_text if (cfg.format == "csv" and csv_text is not None) else json.dumps(
        report, indent=2, default=_json_default)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _finite(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def _wrap(cfg: RunConfig, result: dict, status: str) -> dict:
    return {"schema": SCHEMA, "config": asdict(cfg), "status": status, "result": result}


def _input_state(kind: str, cfg: RunConfig, d: int):
    if kind == "gibbs":
        return fock.gibbs_state(cfg.N0 or 0.0, d)
    if kind == "vacuum":
        return fock.vacuum(d)
    if kind.startswith("fock:"):
        return fock.fock_state(int(kind.split(":", 1)[1]), d)
    if kind == "random":
        return sample_fixed_entropy_state(cfg.S0 or 0.0, d, cfg.seed,
                                          support=optimizer.default_support(cfg.S0 or 0.0))
    raise UsageError(f"unknown state {kind!r}")


# ---------------------------------------------------------------- commands


def cmd_entropy(args, cfg: RunConfig) -> int:
    cfg.resolve_entropy()
    d = cfg.cutoff or optimizer._gibbs_cutoff(cfg.N0)
    g = fock.gibbs_populations(cfg.N0, d)
    result = {"S0": cfg.S0, "N0": cfg.N0, "gibbs_spectrum_head": g[:8].tolist()}
    _emit(_wrap(cfg, result, "pass"), cfg)
    return EXIT_OK


def cmd_apply(args, cfg: RunConfig) -> int:
    ch = parse_channel(args.channel)
    cfg.resolve_entropy(required=args.state in ("gibbs", "random"))
    cfg.check_cutoff()
    d = cfg.cutoff or 40
    rho = _input_state(args.state, cfg, d)
    out = channels.apply_channel(ch, rho, cutoff=d, env_cutoff=cfg.env_cutoff)
    result = {
        "channel": ch.to_dict(),
        "input_entropy": fock.von_neumann_entropy(rho),
        "output_entropy": fock.von_neumann_entropy(out),
        "mean_photon_in": fock.mean_photon(rho),
        "mean_photon_out": fock.mean_photon(out),
        "predicted_mean_photon_out": ch.predicted_mean_photon(rho),
        "kappa2": _finite(ch.kappa2_eff),
        "c": _finite(ch.c_eff),
        "output_tail_mass": out.tail_mass,
    }
    if ch.kind in ("C_att", "A1", "A2", "B1", "B2"):
        grid = [x + 1j * y for x in (-1.0, 0.0, 1.0) for y in (-1.0, 0.0, 1.0)]
        result["chi_residual"] = channels.verify_char_relation(rho, ch, grid, d, cfg.env_cutoff)
    _emit(_wrap(cfg, result, "pass"), cfg)
    return EXIT_OK


def cmd_verify_theorem(args, cfg: RunConfig) -> int:
    if args.k not in (2, 3, 4):
        raise UsageError("k must be 2, 3 or 4 (k = 1 is trivial)")
    cfg.resolve_entropy()
    d = cfg.cutoff or cascade.DEFAULT_CUTOFF[args.k]
    n = cfg.samples if cfg.samples is not None else 10
    rng = np.random.default_rng(cfg.seed)
    support = optimizer.default_support(cfg.S0, 0.2)
    reports, ok = [], True
    for _ in range(n):
        rho = sample_fixed_entropy_state(cfg.S0, support, rng, margin=0.0)
        rep = cascade.run_cascade(rho, args.k, cfg.N0, d)
        ok &= rep.passed(tol_bound=cfg.tolerance if cfg.tolerance < 1e-5 else 1e-5)
        reports.append(rep.to_dict())
    status = "pass" if ok else "violation-candidate"
    _emit(_wrap(cfg, {"k": args.k, "cutoff": d, "reports": reports}, status), cfg)
    return EXIT_OK if ok else EXIT_VIOLATION


def _report_exit(rep) -> int:
    return EXIT_VIOLATION if rep.violations else EXIT_OK


def cmd_optimize(args, cfg: RunConfig) -> int:
    ch = parse_channel(args.channel)
    cfg.resolve_entropy()
    cfg.check_cutoff()
    oc = optimizer.OptimizerConfig(restarts=cfg.restarts or 5, iterations=args.iterations,
                                   seed=cfg.seed, support=args.support, tol=cfg.tolerance)
    rep = optimizer.minimize_output_entropy(ch, cfg.S0, cfg.cutoff or 24, oc)
    status = "violation-candidate" if rep.violations else "pass"
    _emit(_wrap(cfg, rep.to_dict(), status), cfg, rep.to_csv())
    return _report_exit(rep)


def cmd_scan(args, cfg: RunConfig) -> int:
    ch = parse_channel(args.channel)
    cfg.resolve_entropy()
    cfg.check_cutoff()
    rep = optimizer.conjecture_v2_scan(ch, cfg.S0, cfg.samples if cfg.samples is not None else 20,
                                       cfg.seed, cfg.cutoff or 32, args.support, cfg.tolerance)
    status = "violation-candidate" if rep.violations else "pass"
    _emit(_wrap(cfg, rep.to_dict(), status), cfg, rep.to_csv())
    return _report_exit(rep)


def cmd_lindblad(args, cfg: RunConfig) -> int:
    cfg.resolve_entropy()
    cfg.check_cutoff()
    if args.family == "attenuator":
        gen = lindblad.LindbladGenerator.attenuator(args.N)
    elif args.family == "amplifier":
        gen = lindblad.LindbladGenerator.amplifier(args.N)
    elif args.family == "noise":
        gen = lindblad.LindbladGenerator.additive_noise()
    else:
        gen = lindblad.LindbladGenerator(args.gamma_plus, args.gamma_minus)
    d = cfg.cutoff or 40
    rate = lindblad.entropy_rate(gen, fock.gibbs_state(cfg.N0, d))
    rep = lindblad.infinitesimal_conjecture_check(
        gen, cfg.S0, cfg.samples if cfg.samples is not None else 10, cfg.seed, d=d,
        tol=cfg.tolerance)
    result = {"generator": gen.to_dict(), "gibbs_rate": rate,
              "conjectured_rate": gen.gibbs_rate(cfg.N0), "check": rep.to_dict()}
    status = "violation-candidate" if rep.violations else "pass"
    _emit(_wrap(cfg, result, status), cfg)
    return EXIT_VIOLATION if rep.violations else EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmoe", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, channel=False):
        if channel:
            sp.add_argument("--channel", required=True,
                            help='JSON object or shorthand, e.g. "C_att,eta=0.5,N=1"')
        sp.add_argument("--S0", type=float)
        sp.add_argument("--N0", type=float)
        sp.add_argument("--cutoff", type=int)
        sp.add_argument("--env-cutoff", type=int)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int)
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--tol", type=float, default=1e-4)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    common(sub.add_parser("entropy", help="g(N0) and its inverse"))
    sp = sub.add_parser("apply", help="apply a channel to a standard input state")
    common(sp, channel=True)
    sp.add_argument("--state", default="gibbs", help="gibbs | vacuum | fock:n | random")
    sp = sub.add_parser("verify-theorem", help="beam-splitter cascade at eta = 1/k")
    common(sp)
    sp.add_argument("--k", type=int, default=2)
    sp = sub.add_parser("optimize", help="multi-start descent on the fixed-entropy shell")
    common(sp, channel=True)
    sp.add_argument("--iterations", type=int, default=30)
    sp.add_argument("--support", type=int)
    sp = sub.add_parser("scan", help="random sampling of the fixed-entropy shell")
    common(sp, channel=True)
    sp.add_argument("--support", type=int)
    sp = sub.add_parser("lindblad", help="entropy production rates of a Lindblad generator")
    common(sp)
    sp.add_argument("--family", choices=("attenuator", "amplifier", "noise", "custom"),
                    default="attenuator")
    sp.add_argument("--N", type=float, default=0.0)
    sp.add_argument("--gamma-plus", type=float, default=0.0)
    sp.add_argument("--gamma-minus", type=float, default=1.0)
    return p


COMMANDS = {"entropy": cmd_entropy, "apply": cmd_apply, "verify-theorem": cmd_verify_theorem,
            "optimize": cmd_optimize, "scan": cmd_scan, "lindblad": cmd_lindblad}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig(command=args.command, S0=args.S0, N0=args.N0, cutoff=args.cutoff,
                    env_cutoff=args.env_cutoff, seed=args.seed, restarts=args.restarts,
                    samples=args.samples, tolerance=args.tol, out=args.out, format=args.format)
    if getattr(args, "channel", None):
        cfg.channel = {"raw": args.channel}
    try:
        return COMMANDS[args.command](args, cfg)
    except (CutoffTooSmallError, ResourceError, GridError, StepError) as exc:
        print(f"gmoe: diagnostic failure: {exc}", file=sys.stderr)
        if isinstance(exc, CutoffTooSmallError):
            print("gmoe: hint: increase --cutoff (or --env-cutoff)", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    except (UsageError, ValueError, GmoeError) as exc:
        print(f"gmoe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
