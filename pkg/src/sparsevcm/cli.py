"""Command-line front end: ``fit``, ``experiment``, ``bounds`` and ``diagnose``.

Runs are described by an INI file with the sections below (every key is
optional and falls back to the default shown by ``--help``); command-line
flags override file values.  Each output directory receives ``manifest.txt``
holding the fully resolved configuration, which parses back to the same plan.

Exit codes: 0 success, 1 usage or input error, 2 solver non-convergence.
"""
import argparse
import configparser
import io
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from ._io import atomic_write_text, csv_text
from .basis import BasisSpec
from .design import Dataset, cone_condition_probe, read_dataset_csv, restricted_eigs, write_dataset_csv
from .experiments import (
    ExperimentPlan,
    PenaltyOverrides,
    basis_size_for,
    bounds_rows,
    replicate_seed,
    run_plan,
    truth_seed,
    write_aggregate_csv,
    write_bounds_csv,
    write_results_csv,
)
from .model import BlockLayout, TruthSpec, generate_truth, write_coefficients_csv
from .solver import PenaltyConfig, SolverSettings, delta_hat, estimate_omega_max_1, fit, write_fit
from .synth import DictionarySpec, NoiseSpec, generate_dataset, sample_dictionary, sample_times

__all__ = ["Config", "ConfigError", "load_config", "parse_config", "config_to_ini", "build_plan", "main"]


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in str(text).replace(",", " ").split())


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    t = str(text).strip().lower()
    return None if t in ("", "auto", "none") else int(t)


def _opt_float(text):
    t = str(text).strip().lower()
    return None if t in ("", "none") else float(t)


def _join(values):
    return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in values)


# section -> key -> (attribute, parser)
SCHEMA = {
    "experiment": {
        "name": ("name", str),
        "n_grid": ("n_grid", _ints),
        "replicates": ("replicates", int),
        "master_seed": ("seed", int),
        "threads": ("threads", int),
        "l_plus_1": ("L_plus_1", _opt_int),
        "time_epsilon": ("time_epsilon", float),
    },
    "basis": {"kind": ("basis", str)},
    "dictionary": {"kind": ("dictionary", str), "p": ("p", int)},
    "truth": {
        "s": ("s", int),
        "s0": ("s0", int),
        "nu": ("nu", _floats),
        "r": ("r", _floats),
        "c_a": ("C_a", float),
    },
    "noise": {"kind": ("noise", str), "sigma": ("sigma", _opt_float), "k": ("K", float)},
    "penalty": {
        "mu": ("mu", float),
        "h": ("h", float),
        "c_omega": ("C_omega", float),
        "phi_max": ("phi_max", float),
        "delta_multiplier": ("delta_multiplier", float),
    },
    "solver": {
        "max_iters": ("max_iters", int),
        "rel_tol": ("rel_tol", float),
        "step_backtrack_factor": ("step_backtrack_factor", float),
        "restart": ("restart", _bool),
        "check_every": ("check_every", int),
        "power_iters": ("power_iters", int),
    },
    "diagnose": {
        "n": ("diag_n", int),
        "aleph": ("aleph", int),
        "draws": ("draws", int),
        "cone_probes": ("cone_probes", int),
    },
    "bounds": {"kappa": ("kappa", float), "c_const": ("C_const", float), "c_b": ("C_B", float)},
}
RUN_KEYS = ("command", "version", "data")


@dataclass(frozen=True)
class Config:
    name: str = "experiment"
    n_grid: tuple = (512, 1024, 2048, 4096, 8192)
    replicates: int = 50
    seed: int = 0
    threads: int = 1
    L_plus_1: int = None
    time_epsilon: float = 0.0
    basis: str = "fourier"
    dictionary: str = "gaussian"
    p: int = 100
    s: int = 2
    s0: int = 2
    nu: tuple = (2.0,)
    r: tuple = (2.0,)
    C_a: float = 1.0
    noise: str = "gaussian"
    sigma: float = None
    K: float = 1.0
    mu: float = 2.0
    h: float = 0.5
    C_omega: float = 1.0
    phi_max: float = 1.0
    delta_multiplier: float = 1.0
    max_iters: int = 5000
    rel_tol: float = 1e-8
    step_backtrack_factor: float = 0.5
    restart: bool = True
    check_every: int = 10
    power_iters: int = 20
    diag_n: int = 5000
    aleph: int = 5
    draws: int = 100
    cone_probes: int = 0
    kappa: float = 0.1
    C_const: float = 1.0
    C_B: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)


def parse_config(text, source="<config>"):
    """Parse INI text into a :class:`Config`; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values, run = {}, {}
    for section in cp.sections():
        sec = section.strip().lower()
        if sec == "run":
            for key, raw in cp.items(section):
                if key not in RUN_KEYS:
                    raise ConfigError(f"{source}: unknown key '{key}' in section [run]")
                run[key] = raw
            continue
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            spec = SCHEMA[sec].get(key.lower())
            if spec is None:
                raise ConfigError(f"{source}: unknown key '{key}' in section [{section}]")
            attr, conv = spec
            try:
                values[attr] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for '{key}' in [{section}]: {exc}") from None
    return Config(**values, extra=run)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=path)


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return _join(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_ini(cfg, run=None):
    """Resolved configuration as INI text; ``run`` adds a [run] section."""
    out = io.StringIO()
    values = asdict(cfg)
    for section, keys in SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (attr, _) in keys.items():
            v = values[attr]
            text = ("auto" if attr == "L_plus_1" else "none") if v is None else _format_value(v)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    if run:
        out.write("[run]\n")
        for k in RUN_KEYS:
            if k in run:
                out.write(f"{k} = {run[k]}\n")
    return out.getvalue()


def _require_sigma(cfg):
    if cfg.sigma is None:
        raise ConfigError("missing required value: sigma (use --sigma or [noise] sigma)")
    if not (math.isfinite(cfg.sigma) and cfg.sigma >= 0):
        raise ConfigError("sigma must be a finite nonnegative number")
    return cfg.sigma


def build_plan(cfg):
    """ExperimentPlan described by a configuration."""
    sigma = _require_sigma(cfg)
    try:
        truth = TruthSpec.leading(cfg.p, cfg.s, cfg.s0, cfg.nu if len(cfg.nu) != 1 else cfg.nu[0],
                                  cfg.r if len(cfg.r) != 1 else cfg.r[0], cfg.C_a)
        return ExperimentPlan(
            name=cfg.name,
            dictionary=DictionarySpec(cfg.dictionary, cfg.p),
            truth=truth,
            noise=NoiseSpec(cfg.noise, cfg.K),
            sigma=sigma,
            n_grid=cfg.n_grid,
            replicates=cfg.replicates,
            master_seed=cfg.seed,
            penalty=PenaltyOverrides(cfg.mu, cfg.h, cfg.C_omega, cfg.phi_max, cfg.delta_multiplier),
            solver=_settings(cfg),
            basis_kind=cfg.basis,
            L_plus_1=cfg.L_plus_1,
            time_epsilon=cfg.time_epsilon,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _settings(cfg):
    return SolverSettings(cfg.max_iters, cfg.rel_tol, cfg.step_backtrack_factor, cfg.restart,
                          cfg.check_every, cfg.power_iters)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(sp):
    sp.add_argument("--config", "--plan", dest="config", help="INI configuration file")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--basis", choices=["fourier", "haar"])
    sp.add_argument("--L", type=int, help="highest basis index (L + 1 functions)")
    sp.add_argument("--sigma", type=float, help="noise level")
    sp.add_argument("--mu", type=float)
    sp.add_argument("--h", type=float)
    sp.add_argument("--c-omega", dest="c_omega", type=float)
    sp.add_argument("--delta-multiplier", dest="delta_multiplier", type=float)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--seed", type=int)


def make_parser():
    parser = _Parser(prog="sparsevcm", description="Sparse varying coefficient regression.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = sub.add_parser("fit", help="fit the block-LASSO estimator")
    _common(sp)
    sp.add_argument("--data", help="dataset CSV with columns i,t,Y,W_1..W_p")
    sp = sub.add_parser("experiment", help="run a Monte Carlo plan")
    _common(sp)
    sp = sub.add_parser("bounds", help="evaluate theoretical risk bounds over the plan grid")
    _common(sp)
    sp = sub.add_parser("diagnose", help="restricted eigenvalues of the Gram matrix")
    _common(sp)
    sp.add_argument("--data", help="dataset CSV; synthetic covariates are drawn when absent")
    sp.add_argument("--aleph", type=int)
    sp.add_argument("--draws", type=int)
    return parser


def _resolve(args):
    cfg = load_config(args.config) if args.config else Config()
    over = {}
    for flag, attr in (("basis", "basis"), ("sigma", "sigma"), ("mu", "mu"), ("h", "h"),
                       ("c_omega", "C_omega"), ("delta_multiplier", "delta_multiplier"),
                       ("threads", "threads"), ("seed", "seed"), ("aleph", "aleph"), ("draws", "draws")):
        v = getattr(args, flag, None)
        if v is not None:
            over[attr] = v
    if args.L is not None:
        if args.L < 0:
            raise ConfigError("--L must be nonnegative")
        over["L_plus_1"] = args.L + 1
    cfg = replace(cfg, **over)
    if cfg.threads < 1:
        raise ConfigError("threads must be at least 1")
    return cfg


def _manifest(out, cfg, command, data=None):
    run = {"command": command, "version": __version__}
    if data:
        run["data"] = os.path.abspath(data)
    atomic_write_text(os.path.join(out, "manifest.txt"), config_to_ini(cfg, run))


def _out_dir(args, default):
    out = args.out or default
    os.makedirs(out, exist_ok=True)
    return out


def _penalty(cfg, data):
    pc = PenaltyConfig(data.sigma, data.n, data.p, K=cfg.K, mu=cfg.mu, h=cfg.h, C_omega=cfg.C_omega,
                       phi_max=cfg.phi_max, omega_max_1=estimate_omega_max_1(data))
    return cfg.delta_multiplier * delta_hat(pc)


def cmd_fit(args):
    cfg = _resolve(args)
    sigma = _require_sigma(cfg)
    if args.data:
        if not os.path.isfile(args.data):
            raise ConfigError(f"dataset not found: {args.data}")
        data = read_dataset_csv(args.data, sigma)
        truth = None
    else:
        plan = build_plan(cfg)
        n = plan.n_grid[-1]
        Lp1 = basis_size_for(n, plan)
        truth = generate_truth(plan.truth, BlockLayout.for_sample_size(Lp1, n), truth_seed(cfg.seed, n))
        data = generate_dataset(truth, cfg.basis, plan.dictionary, plan.noise, sigma, n,
                                replicate_seed(cfg.seed, n, 0), cfg.time_epsilon)
    n = data.n
    Lp1 = cfg.L_plus_1 if cfg.L_plus_1 is not None else basis_size_for(n)
    spec = BasisSpec(cfg.basis, Lp1)
    layout = BlockLayout.for_sample_size(Lp1, n)
    delta = _penalty(cfg, data)
    res = fit(data, spec, layout, delta, _settings(cfg))
    out = _out_dir(args, "fit_out")
    write_fit(res, out, seed=cfg.seed, settings=_settings(cfg),
              extra={"basis": cfg.basis, "L_plus_1": Lp1, "n": n, "p": data.p, "sigma": repr(sigma)})
    if truth is not None:
        tmp = os.path.join(out, ".truth.csv")
        write_coefficients_csv(truth, tmp)
        os.replace(tmp, os.path.join(out, "truth.csv"))
        tmp = os.path.join(out, ".dataset.csv")
        write_dataset_csv(data, tmp)
        os.replace(tmp, os.path.join(out, "dataset.csv"))
    _manifest(out, replace(cfg, L_plus_1=Lp1), "fit", args.data)
    status = "converged" if res.converged else "NOT converged"
    print(f"fit: n={n} p={data.p} L+1={Lp1} delta={delta:.6g} iterations={res.iterations} "
          f"kkt={res.kkt_residual:.3g} {status}; wrote {out}")
    return 0 if res.converged else 2


def cmd_experiment(args):
    cfg = _resolve(args)
    plan = build_plan(cfg)
    result = run_plan(plan, threads=cfg.threads)
    out = _out_dir(args, f"{cfg.name}_out")
    write_results_csv(result, os.path.join(out, "results.csv"))
    write_aggregate_csv(result, os.path.join(out, "aggregate.csv"))
    write_bounds_csv(bounds_rows(plan, cfg.kappa, cfg.C_const, cfg.C_B), os.path.join(out, "bounds.csv"))
    _manifest(out, cfg, "experiment")
    for n in plan.n_grid:
        print(f"n={n:6d} median_risk={result.median_risk[n]:.6g}")
    print(f"slope={result.slope:.4f} (theory {result.theory_slope:.4f}) "
          f"non-converged={result.n_nonconverged}; wrote {out}")
    return 0 if result.n_nonconverged == 0 else 2


def cmd_bounds(args):
    cfg = _resolve(args)
    plan = build_plan(cfg)
    rows = bounds_rows(plan, cfg.kappa, cfg.C_const, cfg.C_B)
    out = _out_dir(args, f"{cfg.name}_bounds")
    write_bounds_csv(rows, os.path.join(out, "bounds.csv"))
    _manifest(out, cfg, "bounds")
    for row in rows:
        print(" ".join(f"{x:.6g}" for x in row))
    return 0


def cmd_diagnose(args):
    cfg = _resolve(args)
    if args.data:
        if not os.path.isfile(args.data):
            raise ConfigError(f"dataset not found: {args.data}")
        data = read_dataset_csv(args.data, cfg.sigma if cfg.sigma is not None else 0.0)
    else:
        try:
            dic = DictionarySpec(cfg.dictionary, cfg.p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        ss_w, ss_t = np.random.SeedSequence(cfg.seed).spawn(2)
        W = sample_dictionary(dic, cfg.diag_n, ss_w)
        t = sample_times(cfg.diag_n, np.random.default_rng(ss_t), cfg.time_epsilon)
        data = Dataset(W, t, np.zeros(cfg.diag_n), cfg.sigma if cfg.sigma is not None else 0.0)
    Lp1 = cfg.L_plus_1 if cfg.L_plus_1 is not None else basis_size_for(data.n)
    spec = BasisSpec(cfg.basis, Lp1)
    if not 1 <= cfg.aleph <= data.p:
        raise ConfigError(f"aleph must lie in 1..{data.p}")
    eigs = restricted_eigs(data, spec, cfg.aleph, cfg.draws, cfg.seed, threads=cfg.threads)
    out = _out_dir(args, "diagnose_out")
    rows = [[k, " ".join(str(j + 1) for j in sub), repr(lo), repr(hi)] for k, (sub, lo, hi) in enumerate(eigs)]
    atomic_write_text(os.path.join(out, "restricted_eigs.csv"),
                      csv_text(("draw", "subset", "lambda_min", "lambda_max"), rows))
    lo = np.array([e[1] for e in eigs])
    hi = np.array([e[2] for e in eigs])
    inside = int(np.sum((lo >= 1 - cfg.h) & (hi <= 1 + cfg.h)))
    print(f"restricted eigenvalues: n={data.n} p={data.p} L+1={Lp1} aleph={cfg.aleph} draws={cfg.draws}")
    print(f"lambda_min in [{lo.min():.4f}, {lo.max():.4f}], lambda_max in [{hi.min():.4f}, {hi.max():.4f}]")
    print(f"draws within [1-h, 1+h] = [{1 - cfg.h:g}, {1 + cfg.h:g}]: {inside}/{cfg.draws}")
    if cfg.cone_probes > 0:
        layout = BlockLayout.for_sample_size(Lp1, data.n)
        support = [(j, 0) for j in range(min(cfg.aleph, data.p))]
        val = cone_condition_probe(data, spec, layout, support, cfg.cone_probes, cfg.seed)
        print(f"cone probe minimum ||Bv||^2/(n||v||^2) = {val:.6g}")
    _manifest(out, replace(cfg, L_plus_1=Lp1), "diagnose", args.data)
    return 0


COMMANDS = {"fit": cmd_fit, "experiment": cmd_experiment, "bounds": cmd_bounds, "diagnose": cmd_diagnose}


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"sparsevcm {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"sparsevcm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
