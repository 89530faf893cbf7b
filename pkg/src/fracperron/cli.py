"""Command-line front end.

Subcommands ``classify``, ``solve``, ``bounded``, ``verify`` and ``witness``.
Exit codes: 0 success, 2 parse error, 3 failed precondition, 4 numerical
failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import _json
from .asymptotics import run_verification, witness_resonant, witness_trivial
from .bounded import (
    DEFAULT_HORIZON,
    DEFAULT_SAMPLES,
    NotHyperbolic,
    bounded_set,
    certify_boundedness,
    decay_check,
)
from .errors import (
    DomainError,
    FracPerronError,
    IllConditionedError,
    MissingSupNormError,
    NotHyperbolicError,
    ParseError,
    PrecisionError,
    PreconditionError,
    SectorError,
)
from .solver import DEFAULT_TOL, solve_ivp
from .spectral import analyze
from .system import SystemSpec, load_spec

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4
EXIT_VERIFY = 5

THREADS_ENV = "FRAC_PERRON_THREADS"


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _need_spec(args) -> SystemSpec:
    if args.spec is None:
        raise ParseError("this command needs --spec", "--spec")
    return load_spec(args.spec)


def _tol(args, spec: SystemSpec | None, default=DEFAULT_TOL) -> float:
    if args.tol is not None:
        return args.tol
    return spec.tol("tol", default) if spec is not None else default


def parse_complex(text: str) -> complex:
    """Accept ``1``, ``-0.5+2j``, ``1-1i`` or ``re,im``."""
    s = text.strip().replace(" ", "")
    try:
        if "," in s:
            re, im = s.split(",")
            return complex(float(re), float(im))
        return complex(s.replace("i", "j"))
    except ValueError:
        raise ParseError(f"not a complex number: {text!r}") from None


def _analysis_kw(spec: SystemSpec) -> dict:
    kw = {}
    for key in ("ang_tol", "mag_tol", "cond_max"):
        if key in spec.tolerances:
            kw[key] = spec.tolerances[key]
    return kw


def cmd_classify(args) -> int:
    spec = _need_spec(args)
    report = analyze(spec.matrix, spec.alpha, jordan_blocks=spec.jordan_blocks, **_analysis_kw(spec))
    _emit(_json.dumps(report.to_dict()), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = _need_spec(args)
    if spec.initial is None:
        raise PreconditionError("solve needs an 'initial' vector in the spec file")
    if not spec.alpha < 1:
        raise DomainError("the solver needs 0 < alpha < 1")
    grid = spec.times(args.horizon)
    if grid is None:
        raise PreconditionError("give a grid in the spec file or --horizon")
    traj = solve_ivp(spec.matrix, spec.alpha, spec.forcing, spec.initial, grid, _tol(args, spec), spec.jordan_blocks)
    _emit(traj.to_csv(), args.out)
    return EXIT_OK


def cmd_bounded(args) -> int:
    spec = _need_spec(args)
    opts = spec.sections.get("bounded", {})
    kw = _analysis_kw(spec)
    result = bounded_set(
        spec.matrix,
        spec.alpha,
        spec.forcing,
        tol=_tol(args, spec),
        tail_tol=spec.tol("tail_tol", 1e-12),
        jordan_blocks=spec.jordan_blocks,
        witness=bool(args.witness or opts.get("witness", False)),
        **kw,
    )
    if isinstance(result, NotHyperbolic):
        _emit(_json.dumps(result.to_dict()), args.out)
        return EXIT_OK
    horizon = args.horizon if args.horizon is not None else float(opts.get("horizon", DEFAULT_HORIZON))
    seed = args.seed if args.seed is not None else int(opts.get("seed", 0))
    samples = int(opts.get("samples", DEFAULT_SAMPLES))
    radius = float(opts.get("radius", 1.0))
    if args.certify or opts.get("certify", False):
        cert = {"boundedness": certify_boundedness(result, samples, horizon, seed, radius).to_dict()}
        if all(f.decays_to_zero for f in result.forcing):
            cert["decay"] = decay_check(result, samples=samples, horizon=horizon, seed=seed, radius=radius).to_dict()
        result.certification = cert
    _emit(_json.dumps(result.to_dict()), args.out)
    members = args.members if args.members is not None else int(opts.get("members", 0))
    if members:
        if args.out is None:
            raise PreconditionError("member CSVs are written next to --out; give an output path")
        out = Path(args.out)
        for k, y0s in enumerate(result.sample_stable_data(members, seed, radius)):
            traj = result.member(y0s, horizon=horizon)
            (out.parent / f"{out.stem}_member{k}.csv").write_text(traj.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_verify(args) -> int:
    opts = {}
    alpha = args.alpha
    if args.spec is not None:
        spec = load_spec(args.spec)
        opts = dict(spec.sections.get("verify", {}))
        alpha = spec.alpha if alpha is None else alpha
    lemma = args.lemma or opts.get("lemma")
    if lemma is None:
        raise ParseError("give --lemma or a 'verify.lemma' entry", "lemma")
    if alpha is None:
        raise ParseError("give --alpha or a spec", "alpha")
    if args.lam is not None:
        lam = parse_complex(args.lam)
    elif "lambda" in opts:
        lam = _json.decode_complex(opts["lambda"], "verify.lambda")
    else:
        raise ParseError("give --lambda or a 'verify.lambda' entry", "lambda")
    t_max = args.horizon if args.horizon is not None else opts.get("t_max")
    part = args.part or opts.get("part")
    report = run_verification(lemma, alpha, lam, t_max=t_max, g=opts.get("g"), part=part)
    _emit(_json.dumps(report.to_dict()), args.out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_witness(args) -> int:
    opts = {}
    alpha = args.alpha
    if args.spec is not None:
        spec = load_spec(args.spec)
        opts = dict(spec.sections.get("witness", {}))
        alpha = spec.alpha if alpha is None else alpha
    kind = args.kind or opts.get("kind")
    if kind not in ("trivial", "resonant"):
        raise ParseError("witness kind must be 'trivial' or 'resonant'", "kind")
    if alpha is None:
        raise ParseError("give --alpha or a spec", "alpha")
    x0 = parse_complex(args.x0) if args.x0 is not None else _json.decode_complex(opts.get("x0", 0.0), "witness.x0")
    kw = {}
    t_end = args.horizon if args.horizon is not None else opts.get("t_end")
    if t_end is not None:
        kw["t_end"] = float(t_end)
    if kind == "trivial":
        rep = witness_trivial(alpha, x0, **kw)
    else:
        r = args.r if args.r is not None else float(opts.get("r", 1.0))
        rep = witness_resonant(alpha, r, x0, **kw)
    _emit(_json.dumps(rep.to_dict()), args.out)
    if args.csv:
        Path(args.csv).write_text(rep.trajectory.to_csv(), encoding="utf-8")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracperron", description="Linear Caputo systems: spectra, solutions, bounded solutions.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec_required=False):
        sp.add_argument("--spec", required=spec_required, help="JSON system description")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--tol", type=float, help="accuracy target")
        sp.add_argument("--horizon", type=float, help="final time")
        sp.add_argument("--seed", type=int, help="seed for sampled members")

    sp = sub.add_parser("classify", help="sector labels and hyperbolicity verdict")
    common(sp, True)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("solve", help="trajectory CSV for the initial value problem")
    common(sp, True)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("bounded", help="bounded-solution set or a non-hyperbolic verdict")
    common(sp, True)
    sp.add_argument("--certify", action="store_true", help="simulate sampled members and record the outcome")
    sp.add_argument("--members", type=int, help="write this many member trajectories next to --out")
    sp.add_argument("--witness", action="store_true", help="emit a witness forcing when not hyperbolic")
    sp.set_defaults(func=cmd_bounded)

    sp = sub.add_parser("verify", help="numerical check of an estimate")
    common(sp)
    sp.add_argument("--lemma", help="lemma3, lemma4, limit, or an identifier such as L3ii")
    sp.add_argument("--part", help="i, i_Ealphaalpha, ii, i_a or i_b")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lambda", dest="lam", help="eigenvalue, e.g. -1 or 0.5+1j")
    sp.add_argument("--csv", help="also write (t, measured) samples here")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("witness", help="unbounded solutions for a non-hyperbolic system")
    common(sp)
    sp.add_argument("kind", nargs="?", choices=("trivial", "resonant"))
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--r", type=float, help="modulus of the boundary eigenvalue")
    sp.add_argument("--x0", help="initial value")
    sp.add_argument("--csv", help="also write the trajectory here")
    sp.set_defaults(func=cmd_witness)
    return p


def _check_threads():
    v = os.environ.get(THREADS_ENV)
    if v is not None and not (v.isdigit() and int(v) >= 1):
        raise ParseError(f"must be a positive integer, got {v!r}", THREADS_ENV)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _check_threads()
        return args.func(args)
    except ParseError as e:
        code, e_ = EXIT_PARSE, e
    except (PreconditionError, SectorError, NotHyperbolicError, MissingSupNormError, DomainError) as e:
        code, e_ = EXIT_PRECONDITION, e
    except (PrecisionError, IllConditionedError, FracPerronError, ArithmeticError) as e:
        code, e_ = EXIT_NUMERICAL, e
    except (ValueError, OSError) as e:
        code, e_ = EXIT_PRECONDITION, e
    print(f"fracperron {args.command}: {type(e_).__name__}: {e_}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
