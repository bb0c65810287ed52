"""Command-line front end.

    ibcdof rate-curve --K 4 --Nr 3 --scheme max-sinr --schedule fixed:10 --snr 0:5:40
    ibcdof dof-slope  --K 4 --Nr 3 --scheme min-inr --schedule powerlaw:1:0.5 --snr 20:5:40 --window 5
    ibcdof validate-bounds --K 4 --Nr 3 --N-list 10,100,1000 --trials 2000

CSV goes to standard output, preceded by ``#`` comment lines that record the
package version and the fully resolved configuration.  Exit codes: 0 success,
2 usage or configuration error, 3 user-count cap exceeded.
"""

import argparse
import io
import sys

import numpy as np

from . import __version__
from .errors import CapExceededError, DimensionError, DomainError
from .experiments import (
    DEFAULT_BOUND_SNR_DB,
    DEFAULT_CAP,
    DEFAULT_LAMBDAS,
    ExperimentConfig,
    RateCurve,
    dof_slope,
    run_rate_curve,
    validate_bounds,
)

EXIT_OK, EXIT_USAGE, EXIT_CAP = 0, 2, 3

RATE_COLUMNS = (
    "snr_db",
    "users",
    "rate_mean",
    "rate_stderr",
    "rate_gain_mean",
    "rate_loss_mean",
    "scheme",
    "trials",
    "seed",
)
BOUND_COLUMNS = ("N", "lambda", "empirical_cdf", "bound_cdf", "empirical_min_mean", "bound_mean", "pass")
_INT_COLUMNS = {"users", "trials", "seed", "N"}
_STR_COLUMNS = {"scheme", "pass"}


class UsageError(Exception):
    pass


def fmt_number(x):
    """Nine significant digits; integers print without a fraction."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".9g")


def _fmt_cell(col, x):
    if col in _STR_COLUMNS:
        return x if isinstance(x, str) else ("true" if x else "false")
    return fmt_number(x)


def write_csv(out, columns, rows, comments=()):
    for c in comments:
        out.write(f"# {c}\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(_fmt_cell(c, x) for c, x in zip(columns, row)) + "\n")


def read_csv(text):
    """Parse output of ``write_csv``: returns (comments, columns, typed rows)."""
    comments, columns, rows = [], None, []
    for line in text.splitlines():
        if line.startswith("#"):
            comments.append(line[2:] if line.startswith("# ") else line[1:])
            continue
        cells = line.split(",")
        if columns is None:
            columns = tuple(cells)
            continue
        row = []
        for c, x in zip(columns, cells):
            if c in _STR_COLUMNS:
                row.append(x)
            elif c in _INT_COLUMNS:
                row.append(int(x))
            else:
                row.append(float(x))
        rows.append(tuple(row))
    return comments, columns, rows


def parse_snr_grid(text):
    """``start:step:stop`` in dB (stop inclusive) or a comma list."""
    try:
        if ":" in text:
            start, step, stop = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise UsageError(f"bad SNR grid {text!r}")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(start + i * step) for i in range(count))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad SNR grid {text!r}") from None


def _grid_text(grid):
    return ",".join(fmt_number(x) for x in grid)


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment; later keys win."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_").lower()] = value
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# option name -> (config key, converter)
_OPTIONS = {
    "K": ("k", int),
    "Nr": ("nr", int),
    "Nt": ("nt", int),
    "scheme": ("scheme", str),
    "schedule": ("schedule", str),
    "snr": ("snr", parse_snr_grid),
    "trials": ("trials", int),
    "seed": ("seed", int),
    "threads": ("threads", int),
    "cap": ("cap", int),
    "window": ("window", int),
    "N_list": ("n_list", _int_list),
    "lambdas": ("lambdas", lambda s: tuple(float(x) for x in s.split(","))),
    "loss_snr": ("loss_snr", parse_snr_grid),
}

_DEFAULTS = {
    "nt": 1,
    "scheme": "max-sinr",
    "schedule": "fixed:10",
    "snr": "0:5:40",
    "trials": 2000,
    "seed": 0,
    "threads": 1,
    "cap": DEFAULT_CAP,
    "window": 3,
    "lambdas": ",".join(fmt_number(x) for x in DEFAULT_LAMBDAS),
    "loss_snr": _grid_text(DEFAULT_BOUND_SNR_DB),
}


def _build_parser():
    p = _Parser(prog="ibcdof", description="Opportunistic user selection in interfering broadcast channels.")
    p.add_argument("--version", action="version", version=f"ibcdof {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, curve=True):
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--K", dest="K", type=str)
        sp.add_argument("--Nr", dest="Nr", type=str)
        sp.add_argument("--trials", type=str)
        sp.add_argument("--seed", type=str)
        sp.add_argument("--threads", type=str, help="worker threads; never changes results")
        if curve:
            sp.add_argument("--Nt", dest="Nt", type=str)
            sp.add_argument("--scheme", type=str, help="max-snr|min-inr|max-sinr|min-iam|random|two-stage:n1:n2|tdma1|tdma2")
            sp.add_argument("--schedule", type=str, help="fixed:N | powerlaw:a:b | exppower:a:b:c")
            sp.add_argument("--snr", type=str, help="start:step:stop in dB")
            sp.add_argument("--cap", type=str, help="largest admissible group size")

    rc = sub.add_parser("rate-curve", help="mean rate per transmitter over an SNR grid")
    common(rc)
    ds = sub.add_parser("dof-slope", help="high-SNR slope of the rate curve")
    common(ds)
    ds.add_argument("--window", type=str, help="number of top-SNR points in the fit")
    ds.add_argument("--self-test", action="store_true", help="fit a flat synthetic curve instead")
    vb = sub.add_parser("validate-bounds", help="empirical checks of the alignment-measure bounds")
    common(vb, curve=False)
    vb.add_argument("--N-list", dest="N_list", type=str, help="comma-separated group sizes")
    vb.add_argument("--lambdas", type=str)
    vb.add_argument("--loss-snr", dest="loss_snr", type=str)
    return p


def _resolve(args):
    """Merge defaults, the config file and flags (in increasing priority)."""
    raw = dict(_DEFAULTS)
    if args.config:
        raw.update(read_config_file(args.config))
    for name, (key, _) in _OPTIONS.items():
        val = getattr(args, name, None)
        if val is not None:
            raw[key] = val
    out = {}
    for name, (key, conv) in _OPTIONS.items():
        if key in raw:
            try:
                out[key] = conv(raw[key]) if isinstance(raw[key], str) else raw[key]
            except ValueError:
                raise UsageError(f"bad value {raw[key]!r} for {name}") from None
    unknown = set(raw) - {k for k, _ in _OPTIONS.values()}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for req in ("k", "nr"):
        if req not in out:
            raise UsageError(f"missing required option --{'K' if req == 'k' else 'Nr'}")
    return out


def _experiment(cfg):
    return ExperimentConfig(
        K=cfg["k"],
        n_r=cfg["nr"],
        n_t=cfg["nt"],
        scheme=cfg["scheme"],
        schedule=cfg["schedule"],
        snr_db=cfg["snr"],
        trials=cfg["trials"],
        seed=cfg["seed"],
        cap=cfg["cap"],
        threads=cfg["threads"],
    )


def _echo(command, exp, extra=()):
    d = exp.resolved()
    items = [
        ("K", d["K"]),
        ("Nr", d["n_r"]),
        ("Nt", d["n_t"]),
        ("scheme", d["scheme"]),
        ("schedule", d["schedule"]),
        ("snr", _grid_text(d["snr_db"])),
        ("trials", d["trials"]),
        ("seed", d["seed"]),
        ("cap", d["cap"]),
    ] + list(extra)
    return [f"ibcdof {__version__} {command}", "config " + " ".join(f"{k}={v}" for k, v in items)]


def cmd_rate_curve(cfg, out):
    exp = _experiment(cfg)
    curve = run_rate_curve(exp)
    write_csv(out, RATE_COLUMNS, curve_rows(curve), [f"seed={exp.seed}"] + _echo("rate-curve", exp))
    return EXIT_OK


def curve_rows(curve):
    return [
        (
            curve.snr_db[i],
            int(curve.users[i]),
            curve.rate_mean[i],
            curve.rate_stderr[i],
            curve.rate_gain_mean[i],
            curve.rate_loss_mean[i],
            curve.scheme,
            curve.trials,
            curve.config.seed,
        )
        for i in range(curve.snr_db.size)
    ]


def cmd_dof_slope(cfg, out, self_test=False):
    exp = _experiment(cfg)
    window = cfg["window"]
    if self_test:
        flat = np.full(len(exp.snr_db), 1.0)
        curve = RateCurve(
            np.array(exp.snr_db), np.ones(len(flat), dtype=np.int64), flat, 0 * flat, flat, 0 * flat, 1, "self-test", exp
        )
    else:
        curve = run_rate_curve(exp)
    slope = dof_slope(curve, window)
    if self_test:
        slope = abs(slope)  # prints 0 rather than -0
    echo = _echo("dof-slope", exp, [("window", window), ("self_test", int(self_test))])
    out.write(f"slope={fmt_number(slope)} {echo[1][len('config '):]} version={__version__}\n")
    return EXIT_OK


def cmd_validate_bounds(cfg, out, err):
    if "n_list" not in cfg:
        raise UsageError("missing required option --N-list")
    K, n_r = cfg["k"], cfg["nr"]
    if K <= n_r:
        raise UsageError(f"validate-bounds needs K > Nr (got K={K}, Nr={n_r})")
    rep = validate_bounds(
        K, n_r, cfg["n_list"], cfg["trials"], cfg["seed"], cfg["lambdas"], cfg["loss_snr"], cfg["threads"]
    )
    rows = [
        (r.N, r.lam, r.empirical_cdf, r.bound_cdf, r.empirical_min_mean, r.bound_mean, r.passed) for r in rep.rows
    ]
    echo = (
        f"config K={K} Nr={n_r} N_list={','.join(map(str, cfg['n_list']))} trials={cfg['trials']} "
        f"seed={cfg['seed']} lambdas={','.join(fmt_number(x) for x in cfg['lambdas'])} "
        f"loss_snr={_grid_text(cfg['loss_snr'])}"
    )
    write_csv(out, BOUND_COLUMNS, rows, [f"seed={cfg['seed']}", f"ibcdof {__version__} validate-bounds", echo])
    for r in rep.loss_rows:
        err.write(
            f"rate-loss N={r.N} snr_db={fmt_number(r.snr_db)} empirical={fmt_number(r.empirical_loss)} "
            f"stderr={fmt_number(r.stderr)} bound={fmt_number(r.bound)} pass={'true' if r.passed else 'false'}\n"
        )
    # only 0, 2 and 3 are valid exit codes; a failed check reports as 2
    return EXIT_OK if rep.all_pass else EXIT_USAGE


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = _build_parser().parse_args(argv)
        cfg = _resolve(args)
        buf = io.StringIO()
        if args.command == "rate-curve":
            code = cmd_rate_curve(cfg, buf)
        elif args.command == "dof-slope":
            code = cmd_dof_slope(cfg, buf, args.self_test)
        else:
            code = cmd_validate_bounds(cfg, buf, err)
        out.write(buf.getvalue())
        return code
    except UsageError as exc:
        err.write(f"ibcdof: error: {exc}\n")
        return EXIT_USAGE
    except CapExceededError as exc:
        err.write(f"ibcdof: cap exceeded: {exc}\n")
        return EXIT_CAP
    except (DomainError, DimensionError) as exc:
        err.write(f"ibcdof: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
