"""Command-line front end.

    python -m babenko solve --steepness 0.1366035499 --modes 8192 --out w1.json
    python -m babenko branch --to 0.138 --out run1
    python -m babenko jordan --wave run1/critical_1.json
    python -m babenko spectrum --wave w.json --sigma 0.02,0 --num 4
    python -m babenko normalform --critical 0.1366035499 --eps-list -3.93e-5,3.75e-5

Results go to stdout, diagnostics to stderr.  Exit status is 0 on success,
1 for usage errors and 2 for numerical failures.
"""
import argparse
import csv
import io
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import grid as g
from .errors import NumericalFailure, StepFailure, StoreError

WORKSPACE_ENV = "BABENKO_WORKSPACE"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("babenko")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _modes(text):
    n = int(text)
    if not g.is_power_of_two(n) or n < 4:
        raise argparse.ArgumentTypeError("must be a power of two >= 4")
    return n


def _complex_pair(text):
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError("expected 're' or 're,im'")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers")


def build_parser():
    p = _Parser(prog="babenko", description="Stokes waves, spectra and normal forms.")
    p.add_argument("--workspace", help=f"output root (default ${WORKSPACE_ENV} or the current directory)")
    p.add_argument("--threads", type=_positive_int, help="cap on FFT worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one wave")
    which = s.add_mutually_exclusive_group(required=True)
    which.add_argument("--steepness", type=float)
    which.add_argument("--speed", type=float)
    s.add_argument("--modes", type=_modes, help="grid size of the returned wave")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out", default="wave.json")

    b = sub.add_parser("branch", help="continue the branch and report momentum extrema")
    b.add_argument("--to", dest="s_max", type=float, required=True)
    b.add_argument("--mode", choices=["steepness", "speed", "arclength"], default="steepness")
    b.add_argument("--step", type=float, default=0.01)
    b.add_argument("--tol", type=float, default=1e-12)
    b.add_argument("--max-modes", type=_modes, default=16384)
    b.add_argument("--out", default="branch")
    b.add_argument("--no-refine", action="store_true", help="skip re-fitting extrema on fresh waves")

    j = sub.add_parser("jordan", help="Jordan chain and normal-form coefficient at a wave")
    j.add_argument("--wave", required=True)
    j.add_argument("--branch", help="branch CSV for a finite-difference check of D")
    j.add_argument("--refine", action="store_true", help="move the wave onto D = 0 first")
    j.add_argument("--out", help="report path (default: next to the wave file)")

    sp = sub.add_parser("spectrum", help="eigenvalues nearest a shift")
    sp.add_argument("--wave", required=True)
    sp.add_argument("--sigma", type=_complex_pair, default=0j)
    sp.add_argument("--num", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="report path (default: next to the wave file)")

    nf = sub.add_parser("normalform", help="measured versus predicted eigenvalue splitting")
    nf.add_argument("--critical", type=float, required=True, help="steepness of the momentum extremum")
    nf.add_argument("--branch", help="branch directory holding wave files near the extremum")
    nf.add_argument("--eps-list", type=_float_list, required=True)
    nf.add_argument("--modes", type=_modes)
    nf.add_argument("--out", default="normalform.csv")
    return p


def _workspace(args):
    root = Path(args.workspace or os.environ.get(WORKSPACE_ENV) or ".")
    root.mkdir(parents=True, exist_ok=True)
    return root


def _resolve(root, path):
    p = Path(path)
    return p if p.is_absolute() else root / p


def _emit(line):
    print(line, flush=True)


def cmd_solve(args, root):
    from .conserved import wave_energy, wave_momentum
    from .solver import LIMITING_STEEPNESS, ContinuationConfig, wave_at_speed, wave_at_steepness
    from .store import ArtifactIndex, save_wave

    if args.tol < 1e-14:
        raise UsageError("--tol below 1e-14 is not attainable")
    modes = args.modes
    cfg = ContinuationConfig(tol=args.tol, max_modes=max(modes or 16384, 256),
                             start_modes=min(256, modes or 256))
    if args.steepness is not None:
        if args.steepness < 0:
            raise UsageError("--steepness must be non-negative")
        if args.steepness >= LIMITING_STEEPNESS:
            raise NumericalFailure(f"no Stokes wave has steepness {args.steepness} "
                                   f"(limiting value {LIMITING_STEEPNESS})")
        wave = wave_at_steepness(args.steepness, cfg, modes)
    else:
        wave = wave_at_speed(args.speed, cfg, modes)
    out = _resolve(root, args.out)
    checksum = save_wave(wave, out)
    idx = ArtifactIndex.open(root)
    idx.add("wave", out, checksum, wave.s, wave.c, wave.N)
    idx.save()
    _emit(f"s={wave.s:.12g} c={wave.c:.12g} residual={wave.residual_norm:.3e} N={wave.N} "
          f"H={wave_energy(wave):.12g} P={wave_momentum(wave):.12g}")
    return EXIT_OK


def cmd_branch(args, root):
    from .conserved import find_momentum_extrema, refine_momentum_extremum
    from .solver import LIMITING_STEEPNESS, ContinuationConfig, continue_branch, solve_steepness
    from .store import ArtifactIndex, save_branch, save_json, save_wave

    if not 0 <= args.s_max < LIMITING_STEEPNESS:
        raise UsageError(f"--to must lie in [0, {LIMITING_STEEPNESS})")
    cfg = ContinuationConfig(mode=args.mode, step=args.step, tol=args.tol, max_modes=args.max_modes)
    out = _resolve(root, args.out)
    out.mkdir(parents=True, exist_ok=True)
    idx = ArtifactIndex.open(root)
    try:
        branch = continue_branch(cfg, args.s_max)
    except StepFailure as exc:
        lp = exc.last_point
        if lp is not None:
            print(f"last good point: s={lp.s:.12g} c={lp.c:.12g} N={lp.N}", file=sys.stderr)
        raise
    for i, w in enumerate(branch.waves):
        path = out / f"wave_{i:04d}.json"
        idx.add("wave", path, save_wave(w, path), w.s, w.c, w.N)
    csv_path = out / "branch.csv"
    idx.add("branch", csv_path, save_branch(branch, csv_path), args.s_max, float("nan"), 0)

    extrema = find_momentum_extrema(branch)
    for k, ext in enumerate(extrema, start=1):
        if not args.no_refine:
            near = min(branch.waves, key=lambda w: abs(w.s - ext.s_star))
            ext = refine_momentum_extremum(
                lambda s: solve_steepness(near.eta.samples, near.c, s, tol=args.tol), ext)
            wave = solve_steepness(near.eta.samples, near.c, ext.s_star, tol=args.tol)
            path = out / f"critical_{k}.json"
            idx.add("wave", path, save_wave(wave, path), wave.s, wave.c, wave.N)
        path = out / f"extremum_{k}.json"
        idx.add("chain", path, save_json(ext.to_json(), path), ext.s_star, ext.c_star, 0)
        _emit(f"extremum {k}: s*={ext.s_star:.11g} c*={ext.c_star:.10g} P={ext.P:.11g} "
              f"H={ext.H:.11g} d2P/dc2={ext.d2P_dc2:.6g}")
    if not extrema:
        _emit("no momentum extrema on this branch")
    idx.save()
    _emit(f"branch: {len(branch)} points, s_max={branch.points[-1].s:.12g}, csv={csv_path}")
    return EXIT_OK


def cmd_jordan(args, root):
    from .conserved import momentum_slope_from_table
    from .jordan import (build_chain, chain_report, generalized_kernel_dimension, normal_form,
                         refine_critical_point, D_direct)
    from .store import ArtifactIndex, load_branch, load_wave, save_field, save_json

    wave_path = _resolve(root, args.wave)
    if not wave_path.exists():
        raise UsageError(f"wave file {wave_path} not found")
    wave = load_wave(wave_path)
    if not np.any(wave.eta.samples):
        raise UsageError("the flat state has no Jordan chain to build")
    if args.refine:
        wave, _ = refine_critical_point(wave, tol=max(wave.tol, 1e-12))
    D = D_direct(wave)
    if args.branch:
        fd = momentum_slope_from_table(load_branch(_resolve(root, args.branch)), wave.s)
        if fd is None:
            print("branch too short for a finite-difference check of D", file=sys.stderr)
        else:
            _emit(f"D from branch table: {fd:.10g}")
    chain = build_chain(wave)
    dim, lengths = generalized_kernel_dimension(wave, chain=chain)
    out = _resolve(root, args.out) if args.out else wave_path.with_name(wave_path.stem + "_chain.json")
    idx = ArtifactIndex.open(root)
    if dim == 4:
        _emit(f"D={D:.10g}")
        _emit("no extremum: chain terminates at length 2")
        doc = {"s0": wave.s, "c0": wave.c, "D": D, "chain_lengths": lengths}
        idx.add("chain", out, save_json(doc, out), wave.s, wave.c, wave.N)
        idx.save()
        return EXIT_OK
    pred, _ = normal_form(wave, chain=chain, tol=max(wave.tol, 1e-12))
    idx.add("chain", out, save_json(chain_report(pred, chain), out), wave.s, wave.c, wave.N)
    for name in ("v1", "w1", "v2_tilde", "w2_tilde", "v3_tilde", "w3_tilde"):
        fp = out.with_name(f"{out.stem}_{name}.json")
        idx.add("field", fp, save_field(getattr(chain, name), fp, name, {"s": wave.s, "c": wave.c}),
                wave.s, wave.c, wave.N)
    idx.save()
    _emit(f"D={chain.D:.10g} alpha={chain.alpha:.10g} B={chain.B_coeff:.10g} "
          f"lambda1_sq={pred.slope:.10g} P2={pred.P2:.10g} kernel_dim={dim}")
    return EXIT_OK


def cmd_spectrum(args, root):
    from .spectrum import PencilOperators, eigen_near
    from .store import ArtifactIndex, load_wave, save_json

    if args.num < 1:
        raise UsageError("--num must be at least 1")
    wave_path = _resolve(root, args.wave)
    if not wave_path.exists():
        raise UsageError(f"wave file {wave_path} not found")
    wave = load_wave(wave_path)
    if not np.any(wave.eta.samples) and args.sigma == 0:
        raise UsageError("the flat state needs a nonzero --sigma")
    res = eigen_near(PencilOperators(wave), args.sigma, k=args.num, seed=args.seed)
    lam, resid, cons = res.eigenvalues, res.residuals, res.constraint_residuals
    doc = res.to_json(s=wave.s, c=wave.c)
    out = _resolve(root, args.out) if args.out else wave_path.with_name(wave_path.stem + "_spectrum.json")
    idx = ArtifactIndex.open(root)
    idx.add("spectrum", out, save_json(doc, out), wave.s, wave.c, wave.N)
    idx.save()
    for l, r, (c1, c2) in zip(lam, resid, cons):
        _emit(f"{l.real:+.12e} {l.imag:+.12e}i residual={r:.2e} "
              f"constraints=({abs(c1):.1e}, {abs(c2):.1e})")
    return EXIT_OK


def cmd_normalform(args, root):
    from .jordan import normal_form, predict_splitting, refine_critical_point
    from .solver import ContinuationConfig, d_eta_dc, newton_solve, solve_steepness, wave_at_steepness
    from .spectrum import PencilOperators, eigen_near
    from .store import ArtifactIndex, load_wave, save_text

    near = None
    if args.branch:
        bdir = _resolve(root, args.branch)
        waves = [load_wave(p) for p in sorted(bdir.glob("*.json"))
                 if re.fullmatch(r"(wave_\d+|critical_\d+)\.json", p.name)]
        waves = [w for w in waves if np.any(w.eta.samples)]
        if waves:
            near = min(waves, key=lambda w: abs(w.s - args.critical))
    if near is None:
        near = wave_at_steepness(args.critical, ContinuationConfig(), args.modes)
    wave = solve_steepness(near.eta.samples, near.c, args.critical, tol=1e-12)
    if args.modes and wave.N != args.modes:
        wave = solve_steepness(g.resample(wave.eta.samples, args.modes), wave.c, args.critical, tol=1e-12)
    wave, _ = refine_critical_point(wave)
    pred, _ = normal_form(wave)
    dc = d_eta_dc(wave).samples
    rows = []
    for eps in args.eps_list:
        predicted = predict_splitting(pred, eps)
        if eps == 0:
            rows.append((0.0, 0.0, 0.0, None))
            continue
        w = newton_solve(wave.eta.samples + eps * dc, wave.c + eps, tol=1e-12)
        lam = eigen_near(PencilOperators(w), 0.0, k=4).eigenvalues[0]
        measured = float((lam * lam).real)
        rows.append((eps, measured, predicted, abs(measured - predicted) / abs(predicted)))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["eps", "lambda_sq_measured", "lambda_sq_predicted", "relative_error"])
    for eps, m, p, r in rows:
        wr.writerow(["%.17g" % eps, "%.17g" % m, "%.17g" % p, "—" if r is None else "%.6g" % r])
    out = _resolve(root, args.out)
    idx = ArtifactIndex.open(root)
    idx.add("table", out, save_text(buf.getvalue(), out), wave.s, wave.c, wave.N)
    idx.save()
    sys.stdout.write(buf.getvalue())
    e = np.array([r[0] for r in rows if r[0] != 0])
    m = np.array([r[1] for r in rows if r[0] != 0])
    if e.size:
        slope = float(e @ m / (e @ e))
        _emit(f"# s0={wave.s:.11g} c0={wave.c:.10g} B={pred.B_coeff:.8g} P2={pred.P2:.8g} "
              f"predicted_slope={pred.slope:.8g} measured_slope={slope:.8g}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "branch": cmd_branch, "jordan": cmd_jordan,
            "spectrum": cmd_spectrum, "normalform": cmd_normalform}


_LIST_FLAGS = ("--eps-list", "--sigma")


def _attach_values(argv):
    """Join list-valued flags to values that start with '-' (argparse takes them for options)."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _LIST_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and not argv[i + 1].startswith("--"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
            continue
        out.append(argv[i])
        i += 1
    return out


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(_attach_values(list(sys.argv[1:] if argv is None else argv)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        g.set_fft_workers(args.threads)
    try:
        root = _workspace(args)
        return COMMANDS[args.command](args, root)
    except UsageError as exc:
        print(f"babenko {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, StoreError, ValueError) as exc:
        print(f"babenko {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
