"""``cusp-limits`` command line: gamma | fbm | limits | table | estimate.

Every subcommand also takes ``--config FILE`` (flat ``key = value`` lines,
keys named like the long options) and echoes its resolved settings into the
output directory as ``run_config.txt``.  Flags given on the command line win
over the file.

Exit codes: 0 ok, 2 configuration error, 3 numerical or generation failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

from . import io
from .analysis import kde, ks_distance
from .cusp import CuspParams, gamma_alpha_sq_closed, gamma_alpha_sq_quad
from .errors import ConfigError, CuspLimitsError, NumericalError, ReplicateError
from .fgn import GridSpec, two_sided_fbm, write_path_csv
from .limits import default_grid, run_limits_mc
from .modelsim import ModelConfig, run_model_mc
from .numerics import RngStream, resolve_threads

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _hurst_list(text: str):
    items = [s for s in (p.strip() for p in text.split(",")) if s]
    if not items:
        raise argparse.ArgumentTypeError("empty H list")
    try:
        return [float(s) for s in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _add_common(p, out=True):
    p.add_argument("--config", metavar="FILE", help="flat key = value file of option defaults")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $CUSP_LIMITS_THREADS or 1)")
    if out:
        p.add_argument("--out", metavar="DIR", required=True, help="output directory")


def _add_grid(p):
    p.add_argument("--m", type=int, default=None, help="half-grid size (default depends on H)")
    p.add_argument("--span", type=float, default=None, help="half-span T (default depends on H)")
    p.add_argument("--reps", type=int, default=10000, help="Monte Carlo replicates")
    p.add_argument("--seed", type=int, default=2024, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cusp-limits", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gamma", help="closed-form and quadrature Gamma_alpha^2")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    _add_common(p, out=False)
    p.add_argument("--out", metavar="DIR", default=None, help="optional directory for run_config.txt")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("fbm", help="dump one two-sided fBm path as CSV")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--span", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--replicate", type=int, default=0, help="stream index of the path")
    _add_common(p)
    p.set_defaults(func=cmd_fbm)

    p = sub.add_parser("limits", help="Monte Carlo of the two limit laws at one H")
    p.add_argument("--hurst", type=float, required=True)
    _add_grid(p)
    p.add_argument("--raw", action="store_true", help="write raw.csv with every replicate")
    p.add_argument("--density", action="store_true", help="write KDE curves (and a figure)")
    p.add_argument("--no-plot", action="store_true", help="skip PNG figures")
    _add_common(p)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("table", help="summary rows over a list of H plus variance-panel data")
    p.add_argument("--hurst-list", type=_hurst_list, required=True, metavar="H1,H2,...")
    _add_grid(p)
    p.add_argument("--density", action="store_true", help="write KDE curves for each H")
    p.add_argument("--no-plot", action="store_true", help="skip PNG figures")
    _add_common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("estimate", help="MLE and Pitman estimators in the cusp signal model")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--theta1", type=float, required=True)
    p.add_argument("--theta2", type=float, required=True)
    p.add_argument("--tobs", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--nt", type=int, default=2**14, help="time cells")
    p.add_argument("--nu", type=int, default=2**12, help="parameter grid cells")
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--ref", metavar="DIR", default=None,
                   help="limits output directory (with raw.csv) to compare against")
    _add_common(p)
    p.set_defaults(func=cmd_estimate)
    return ap


def _config_defaults(sub: argparse.ArgumentParser, path: str) -> dict:
    actions = {a.dest: a for a in sub._actions
               if a.dest not in ("help", "config", "func")}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw = io.parse_config_text(text, list(actions) + ["command"])
    cmd = raw.pop("command", None)
    if cmd is not None and cmd != sub.prog.split()[-1]:
        raise ConfigError(f"config is for subcommand {cmd!r}, not {sub.prog.split()[-1]!r}")
    out = {}
    for key, value in raw.items():
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            out[key] = _parse_bool(value)
            continue
        conv = act.type or str
        try:
            out[key] = conv(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
    return out


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    path = _config_path(argv)
    choices = ap._subparsers._group_actions[0].choices
    command = next((t for t in argv if t in choices), None)
    if path is not None and command is not None:
        sub = choices[command]
        defaults = _config_defaults(sub, path)
        for act in sub._actions:
            if act.dest in defaults:
                act.required = False  # supplied by the file
        sub.set_defaults(**defaults)
    return ap.parse_args(argv)


def _resolved(args, **extra) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("func", "config") and v is not None}
    d.update(extra)
    return d


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _grid(args, H) -> GridSpec:
    g = default_grid(H)
    return GridSpec(args.m if args.m is not None else g.m,
                    args.span if args.span is not None else g.T)


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def cmd_gamma(args) -> int:
    p = CuspParams(args.alpha, args.a, args.b)
    closed = gamma_alpha_sq_closed(p)
    quad = gamma_alpha_sq_quad(p)
    if closed == 0:
        rel = abs(quad)
    else:
        rel = abs(quad - closed) / abs(closed)
    print(f"closed_form:       {closed:.17g}")
    print(f"quadrature:        {quad:.17g}")
    print(f"relative_diff:     {rel:.3e}")
    if p.degenerate:
        _warn("degenerate: no location information")
    elif p.one_sided:
        _warn("one-sided cusp (a*b = 0)")
    if args.out:
        io.write_run_config(os.path.join(_ensure_dir(args.out), "run_config.txt"), _resolved(args))
    return EXIT_OK


def cmd_fbm(args) -> int:
    spec = GridSpec(args.m, args.span)
    path = two_sided_fbm(args.hurst, spec, RngStream(args.seed, args.replicate))
    out = _ensure_dir(args.out)
    with open(os.path.join(out, "path.csv"), "w", newline="") as fh:
        write_path_csv(path, fh)
    io.write_run_config(os.path.join(out, "run_config.txt"), _resolved(args))
    return EXIT_OK


def _limits_one(args, H, out, raw=False, density=False, plot=True, tag=""):
    spec = _grid(args, H)
    threads = resolve_threads(args.threads)
    raw_fh = open(os.path.join(out, f"raw{tag}.csv"), "w", newline="") if raw else None
    try:
        if raw_fh is not None:
            raw_fh.write(io.LIMITS_RAW_HEADER + "\n")

            def sink(start, zs, xs):
                for k in range(zs.size):
                    raw_fh.write(io.row(start + k, zs[k], xs[k]))
        else:
            sink = None
        run = run_limits_mc(H, spec, args.reps, args.seed, threads=threads,
                            keep_samples=density, on_chunk=sink)
    finally:
        if raw_fh is not None:
            raw_fh.close()
    if density:
        kz, kx = kde(run.zeta), kde(run.xi)
        io.write_density(os.path.join(out, f"density_zeta{tag}.csv"), kz)
        io.write_density(os.path.join(out, f"density_xi{tag}.csv"), kx)
        if kz.degenerate or kx.degenerate:
            _warn(f"H={H:g}: near-degenerate sample, bandwidth floored")
        if plot:
            from .plotting import plot_densities

            plot_densities(H, kz, kx, os.path.join(out, f"fig2{tag}.png"))
    return run.summary, spec, threads


def cmd_limits(args) -> int:
    out = _ensure_dir(args.out)
    summary, spec, threads = _limits_one(args, args.hurst, out, raw=args.raw,
                                         density=args.density, plot=not args.no_plot)
    io.write_limits_summary(os.path.join(out, "summary.csv"), [summary])
    io.write_run_config(os.path.join(out, "run_config.txt"),
                        _resolved(args, m=spec.m, span=spec.T, threads=threads))
    print(io.LIMITS_SUMMARY_HEADER)
    print(io.limits_summary_row(summary), end="")
    return EXIT_OK


def cmd_table(args) -> int:
    out = _ensure_dir(args.out)
    for H in args.hurst_list:
        if not 0 < H <= 1:
            raise ConfigError(f"H must lie in (0, 1], got {H}")
    summaries, failures = [], []
    for H in args.hurst_list:
        try:
            s, _, _ = _limits_one(args, H, out, density=args.density,
                                  plot=not args.no_plot, tag=f"_H{H:g}")
        except (NumericalError, ConfigError) as exc:
            failures.append((H, exc))
            print(f"H={H:g}: failed: {_describe(exc)}", file=sys.stderr)
            continue
        summaries.append(s)
        print(io.limits_summary_row(s), end="", flush=True)
    io.write_limits_summary(os.path.join(out, "summary.csv"), summaries)
    io.write_fig1(out, summaries)
    fail_path = os.path.join(out, "failures.txt")
    if failures:
        with open(fail_path, "w") as fh:
            for H, exc in failures:
                fh.write(f"{H:g}: {_describe(exc)}\n")
    elif os.path.exists(fail_path):
        os.remove(fail_path)
    if summaries and not args.no_plot:
        from .plotting import plot_variance_panels

        plot_variance_panels(summaries, os.path.join(out, "fig1.png"))
    io.write_run_config(os.path.join(out, "run_config.txt"),
                        _resolved(args, threads=resolve_threads(args.threads)))
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_estimate(args) -> int:
    cfg = ModelConfig(CuspParams(args.alpha, args.a, args.b), args.theta, args.theta1,
                      args.theta2, args.tobs, args.eps, n_t=args.nt, n_u=args.nu)
    ref = None
    if args.ref:
        ref = io.read_limits_raw(os.path.join(args.ref, "raw.csv"))
    out = _ensure_dir(args.out)
    threads = resolve_threads(args.threads)
    msg = cfg.resolution_warning()
    if msg:
        _warn(msg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # already reported above
        run = run_model_mc(cfg, args.reps, args.seed, threads=threads)
    with open(os.path.join(out, "raw.csv"), "w", newline="") as fh:
        fh.write(io.MODEL_RAW_HEADER + "\n")
        for i in range(args.reps):
            fh.write(io.row(i, run.mle[i], run.pitman[i],
                            run.normalized_mle[i], run.normalized_pitman[i]))
    io.write_model_summary(os.path.join(out, "summary.csv"), run.summary)
    print(io.MODEL_SUMMARY_HEADER)
    s = run.summary
    print(io.row(s.H, s.N, s.eps, s.n_t, s.n_u, s.var_pitman, s.se_var_pitman,
                 s.var_mle, s.se_var_mle, s.mean_pitman, s.mean_mle), end="")
    print(f"phi_eps = {io.fmt(cfg.phi_eps)}")
    if ref is not None:
        zeta, xi = ref
        lines = [
            f"reference = {os.path.join(args.ref, 'raw.csv')}",
            f"ks_mle_vs_xi = {io.fmt(ks_distance(run.normalized_mle, xi))}",
            f"ks_pitman_vs_zeta = {io.fmt(ks_distance(run.normalized_pitman, zeta))}",
        ]
        with open(os.path.join(out, "comparison.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print("\n".join(lines))
    io.write_run_config(os.path.join(out, "run_config.txt"),
                        _resolved(args, threads=threads))
    return EXIT_OK


def _describe(exc) -> str:
    if isinstance(exc, ReplicateError):
        return f"replicate {exc.index}: {exc.cause}"
    return str(exc)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors carry code 2
        return int(exc.code) if exc.code is not None else EXIT_OK
    warnings.showwarning = lambda msg, *a, **k: _warn(msg)
    try:
        return args.func(args)
    except ReplicateError as exc:
        print(f"error: generation failed at {_describe(exc)}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CuspLimitsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
