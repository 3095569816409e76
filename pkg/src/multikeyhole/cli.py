"""Command-line experiment runner.

``multikeyhole <experiment> CONFIG.yaml [--seed N] [--trials N] [--out DIR]
[--bits] [--workers N] [--set key=value ...]`` writes a CSV of curve data and
a JSON summary.  Exit status: 0 ok, 1 numeric/domain error, 2 config error.
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np
from scipy import stats

from . import asymptotics as asy
from . import measure
from .capacity import capacity_samples, ks_distance
from .channel import ChannelSpec, EquivalentRayleighSpec, check_gains, equal_gains
from .config import EXPERIMENTS, ConfigError, config_digest, load_config
from .convergence import active_antenna_sweep, antenna_sweep, keyhole_sweep
from .corr_models import check_corr, make_corr
from .errors import DomainError
from .multiuser import FeedbackSpec, feedback_bits, max_gaussian_oracle, relay_throughput, scheduled_throughput

__all__ = ["main", "run", "build_parser"]

LN2 = math.log(2.0)
DEFAULT_SEED = 0
DEFAULT_TRIALS = 10_000


# ---- config -> objects

def _complex(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _corr_matrix(c, n, name):
    if "matrix" in c:
        R = np.array([[_complex(x) for x in row] for row in c["matrix"]], dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise DomainError(f"{name}.matrix must be square")
        if n is not None and R.shape[0] != n:
            raise DomainError(f"{name}.matrix is {R.shape[0]}x{R.shape[0]}, expected {n}x{n}")
        return check_corr(R, name)
    size = c.get("n", n)
    if size is None:
        raise DomainError(f"{name}: size 'n' is required here")
    if n is not None and size != n:
        raise DomainError(f"{name}.n = {size} conflicts with antenna count {n}")
    return make_corr(c["kind"], size, _complex(c.get("r", 0.0)))


def _corr_stack(cfg, key, n, M):
    """Correlation for one side: explicit ``key``, else the shared ``corr``, else identity."""
    c = cfg.get(key, cfg.get("corr"))
    if c is None:
        return np.eye(n, dtype=complex)
    if isinstance(c, list):
        if len(c) != M:
            raise DomainError(f"{key} lists {len(c)} matrices for M = {M} keyholes")
        return np.stack([_corr_matrix(x, n, f"{key}[{i}]") for i, x in enumerate(c)])
    return _corr_matrix(c, n, key)


def _gains(cfg):
    if "gains" in cfg:
        g = check_gains([_complex(x) for x in cfg["gains"]])
        if "M" in cfg and isinstance(cfg["M"], int) and cfg["M"] != g.size:
            raise DomainError(f"M = {cfg['M']} but {g.size} gains were given")
        return g
    return equal_gains(cfg.get("M", 1))


def _channel(cfg, n_t):
    g = _gains(cfg)
    M = g.size
    return ChannelSpec(
        n_t, cfg["n_r"], g,
        _corr_stack(cfg, "tx_corr", n_t, M),
        _corr_stack(cfg, "rx_corr", cfg["n_r"], M),
        cfg["snr"],
    )


def _psi_list(stack, M):
    stack = np.asarray(stack)
    if stack.ndim == 2:
        return np.full(M, measure.psi(stack))
    return np.array([measure.psi(R) for R in stack])


def _grid(cfg, samples):
    g = cfg.get("rate_grid")
    if g is not None:
        return np.linspace(g["start"], g["stop"], g["num"])
    hi = max(float(np.max(s)) for s in samples)
    return np.linspace(0.0, hi, 201)


# ---- experiments; each returns (header, rows, summary)

def _exp_sample(cfg, seed, n_trials, workers):
    spec = _channel(cfg, cfg["n_t"])
    method = cfg.get("method", "direct")
    s = capacity_samples(spec, n_trials, seed, workers=workers, method=method)
    rows = [[t, v] for t, v in enumerate(s.values)]
    summary = {
        "empirical": {"mean_nats": s.mean(), "stderr_nats": s.stderr()},
        "spec_digest": s.spec_digest,
        "method": method,
    }
    return ["trial", "capacity_nats"], rows, summary


def _exp_outage(cfg, seed, n_trials, workers):
    n_ts = cfg["n_t"] if isinstance(cfg["n_t"], list) else [cfg["n_t"]]
    g = _gains(cfg)
    R_r = _corr_stack(cfg, "rx_corr", cfg["n_r"], g.size)
    ref = capacity_samples(
        EquivalentRayleighSpec(cfg["n_r"], g, R_r, cfg["snr"]), n_trials, seed, tag="equivalent", workers=workers
    )
    curves, emp = {}, {}
    for n_t in n_ts:
        s = capacity_samples(_channel(cfg, n_t), n_trials, seed, tag="keyhole", workers=workers)
        curves[n_t] = s
        emp[f"ks_nt{n_t}"] = ks_distance(s, ref)
        emp[f"mean_nt{n_t}_nats"] = s.mean()
    emp["mean_equivalent_nats"] = ref.mean()
    grid = _grid(cfg, [s.values for s in curves.values()] + [ref.values])
    header = ["rate_nats"] + [f"cdf_nt{n}" for n in n_ts] + ["cdf_equivalent"]
    cols = [curves[n].cdf()(grid) for n in n_ts] + [ref.cdf()(grid)]
    rows = [[x] + [c[i] for c in cols] for i, x in enumerate(grid)]
    summary = {
        "empirical": emp,
        "reference": "Rayleigh channel with Rx correlation of each keyhole and Tx covariance diag(|a_k|^2)",
    }
    return header, rows, summary


def _exp_approx(cfg, seed, n_trials, workers):
    spec = _channel(cfg, cfg["n_t"])
    cls = cfg.get("channel_class", "FRMK" if spec.is_full_rank else "RDMK")
    analytic = {}
    if cls == "FRMK":
        if spec._tx_root is None or spec._rx_root is None:
            raise DomainError("channel_class FRMK needs one tx_corr and one rx_corr shared by all keyholes")
        exact = asy.frmk_moments(spec.tx_corr[0], spec.rx_corr[0], spec.snr, "exact")
        low = asy.frmk_moments(spec.tx_corr[0], spec.rx_corr[0], spec.snr, "low_snr")
    else:
        pt, pr = _psi_list(spec.tx_corr, spec.M), _psi_list(spec.rx_corr, spec.M)
        ap = cfg.get("as_printed", False)
        exact = asy.rdmk_moments(spec.gains, pt, pr, spec.snr, "exact", ap)
        low = asy.rdmk_moments(spec.gains, pt, pr, spec.snr, "low_snr", ap)
        if np.all(spec.gains != 0) and spec.snr > 0:
            high = asy.rdmk_moments(spec.gains, pt, pr, spec.snr, "high_snr", ap)
            analytic["rdmk_high_snr_mu_nats"] = high.mu
            analytic["rdmk_high_snr_sigma2_nats2"] = high.sigma2
    tag = cls.lower()
    analytic[f"{tag}_mu_nats"] = exact.mu
    analytic[f"{tag}_sigma2_nats2"] = exact.sigma2
    analytic[f"{tag}_low_snr_mu_nats"] = low.mu
    analytic[f"{tag}_low_snr_sigma2_nats2"] = low.sigma2
    if "epsilon" in cfg:
        analytic[f"{tag}_outage_capacity_nats"] = asy.outage_capacity_eps(exact, cfg["epsilon"])

    s = capacity_samples(spec, n_trials, seed, workers=workers, method=cfg.get("method", "direct"))
    emp = {"mean_nats": s.mean(), "var_nats2": float(np.var(s.values, ddof=1))}
    if exact.sigma2 > 0:
        gauss = stats.norm(exact.mu, exact.sigma).cdf
        emp["ks_gaussian"] = ks_distance(s, gauss)
    else:
        gauss = lambda x: (np.asarray(x) >= exact.mu).astype(float)  # noqa: E731
    if "epsilon" in cfg:
        emp["outage_capacity_nats"] = float(s.cdf().quantile(cfg["epsilon"]))
    grid = _grid(cfg, [s.values])
    F, G = s.cdf()(grid), gauss(grid)
    rows = [[x, F[i], G[i]] for i, x in enumerate(grid)]
    summary = {"channel_class": cls, "analytic": analytic, "empirical": emp}
    return ["rate_nats", "cdf_empirical", f"cdf_{tag}_gaussian"], rows, summary


def _measure_rows(d, label):
    rows = []
    for name, (lo, v, hi) in d.bounds().items():
        rows.append([label, name, v, lo, hi, int(lo - 1e-12 <= v <= hi + 1e-12)])
    return rows


def _exp_measure(cfg, seed, n_trials, workers):
    R = _corr_matrix(cfg["corr"], None, "corr")
    d = measure.decompose(R)
    rows = _measure_rows(d, "corr")
    analytic = {
        "r_norm": d.r_norm,
        "k_norm": d.k_norm,
        "p_norm": d.p_norm,
        "bounds_ok": d.bounds_ok(),
        "orthogonality_gap": abs(d.r_norm ** 2 - d.k_norm ** 2 - d.p_norm ** 2),
    }
    c = cfg["corr"]
    if c.get("kind") == "exponential":
        n = R.shape[0]
        analytic["exp_model_asymptotic_measure"] = measure.exp_model_asymptotic_measure(n, _complex(c.get("r", 0)))
        analytic["exp_model_exact_measure"] = measure.exp_model_exact_measure(n, _complex(c.get("r", 0)))
    if "compare" in cfg:
        R2 = _corr_matrix(cfg["compare"], R.shape[0], "compare")
        rows += _measure_rows(measure.decompose(R2), "compare")
        analytic["more_correlated"] = measure.more_correlated(R, R2)
        analytic["more_imbalanced"] = measure.more_imbalanced(R, R2)
        analytic["majorizes"] = measure.majorizes(R, R2)
    header = ["matrix", "quantity", "value", "lower_bound", "upper_bound", "within_bounds"]
    return header, rows, {"analytic": analytic}


def _exp_converge(cfg, seed, n_trials, workers):
    g_M = cfg.get("M", 1)
    if cfg["mode"] == "antenna":
        if not isinstance(cfg["n_t"], list) or isinstance(g_M, list):
            raise DomainError("mode antenna needs a list n_t and a single M")
        g = _gains(cfg)
        c = cfg.get("corr", {"kind": "identity"})
        if "kind" not in c:
            raise DomainError("mode antenna needs corr given by a model kind")
        res = antenna_sweep(cfg["n_t"], cfg["n_r"], g, cfg["snr"], n_trials, seed, c["kind"],
                            _complex(c.get("r", 0.0)), workers)
        header = ["n_t", "ks", "ks_std", "dominance_gap", "mean_nats", "ref_mean_nats"]
        rows = [[v, k, m["ks_std"], m["dominance_gap"], m["mean"], m["ref_mean"]]
                for v, k, m in zip(res.values, res.metric, res.meta)]
    else:
        if isinstance(cfg["n_t"], list) or not isinstance(g_M, list):
            raise DomainError("mode keyhole needs a single n_t and a list M")
        R_t = _corr_stack(cfg, "tx_corr", cfg["n_t"], 1)
        R_r = _corr_stack(cfg, "rx_corr", cfg["n_r"], 1)
        res = keyhole_sweep(cfg["n_t"], cfg["n_r"], g_M, cfg["snr"], n_trials, seed, R_t, R_r, workers)
        header = ["M", "ks", "ks_std", "cube_sum", "ks_over_cube_sum"]
        rows = [[v, k, m["ks_std"], m["cube_sum"], m["ks_over_cube_sum"]]
                for v, k, m in zip(res.values, res.metric, res.meta)]
    summary = {"empirical": {"ks": [float(x) for x in res.metric], "strictly_decreasing": res.strictly_decreasing()}}
    return header, rows, summary


def _exp_telatar(cfg, seed, n_trials, workers):
    n_t = cfg["n_t"]
    g = _gains(cfg)
    R_r = _corr_stack(cfg, "rx_corr", cfg["n_r"], g.size)
    if R_r.ndim == 3:
        raise DomainError("telatar experiment needs one rx_corr shared by all keyholes")
    ks = cfg.get("k", [k for k in (1, 2, 4, 8, 16, 32, 64) if k <= n_t])
    res = active_antenna_sweep(n_t, cfg["n_r"], g, cfg["snr"], ks, n_trials, seed,
                               rate=cfg.get("rate"), eps=cfg.get("epsilon", 0.1), rx_corr=R_r, workers=workers)
    rows = [[k, p, m["stderr"], m["tx_measure"]] for k, p, m in zip(res.values, res.metric, res.meta)]
    summary = {
        "analytic": {"tx_measure_by_k": {str(k): 1 / math.sqrt(k) for k in ks}},
        "empirical": {"rate_nats": res.extra["rate"], "argmin_k": res.extra["argmin_k"]},
    }
    return ["k", "p_out", "stderr", "tx_measure"], rows, summary


def _exp_schedule(cfg, seed, n_trials, workers):
    Ks = cfg["K"]
    analytic, emp = {}, {}
    relay = cfg.get("relay")
    if relay is not None:
        g = _gains(relay)
        M = g.size
        pt = _psi_list(_corr_stack(relay, "tx_corr", relay["n_t"], M), M)
        pr = _psi_list(_corr_stack(relay, "rx_corr", relay["n_r"], M), M)
        approx = asy.rdmk_moments(g, pt, pr, M * relay["relay_snr"], relay.get("regime", "exact"))
        mu, sigma = approx.mu, approx.sigma
        analytic["relay_throughput_nats"] = {
            str(K): relay_throughput(g, pt, pr, relay["relay_snr"], K, relay.get("regime", "exact")).mean for K in Ks
        }
    elif "mu" in cfg and "sigma" in cfg:
        mu, sigma = float(cfg["mu"]), float(cfg["sigma"])
    else:
        raise DomainError("schedule needs either mu and sigma or a relay block")
    analytic["mu_nats"], analytic["sigma_nats"] = mu, sigma
    reps = cfg.get("oracle_reps", 0)
    rows = []
    for K in Ks:
        t = scheduled_throughput(mu, sigma, K)
        row = [K, t.mean, t.gain]
        if reps:
            m, se = max_gaussian_oracle(mu, sigma, K, reps, seed)
            row += [m, se, abs(t.mean - m) / m if m else float("nan")]
        rows.append(row)
    header = ["K", "throughput_nats", "gain_nats"]
    if reps:
        header += ["oracle_mean_nats", "oracle_stderr_nats", "relative_error"]
    if "feedback" in cfg:
        fb = cfg["feedback"]
        analytic["feedback_nats"] = feedback_bits(mu, sigma, FeedbackSpec(fb["granularity"], fb["outage_target"]))
    return header, rows, {"analytic": analytic, "empirical": emp}


_RUNNERS = {
    "sample": _exp_sample,
    "outage": _exp_outage,
    "approx": _exp_approx,
    "measure": _exp_measure,
    "converge": _exp_converge,
    "telatar": _exp_telatar,
    "schedule": _exp_schedule,
}


# ---- output

def _to_bits_name(name):
    return name.replace("_nats2", "_bits2").replace("_nats", "_bits")


def _convert(obj, bits, key=""):
    if isinstance(obj, dict):
        return {(_to_bits_name(k) if bits else k): _convert(v, bits, k) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_convert(v, bits, key) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if bits and key.endswith("_nats2"):
            v /= LN2 ** 2
        elif bits and key.endswith("_nats"):
            v /= LN2
        return v
    return obj


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".16e")
    return str(v)


def _csv_text(header, rows, bits):
    scale = [1 / LN2 if bits and h.endswith("_nats") else None for h in header]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow([_to_bits_name(h) if bits else h for h in header])
    for row in rows:
        w.writerow([_fmt(v * s if s else v) for v, s in zip(row, scale)])
    return out.getvalue()


def run(kind, cfg, seed=None, n_trials=None, out_dir=".", bits=False, workers=None):
    """Run one validated experiment and write its CSV and JSON summary.

    Returns the two output paths.
    """
    seed = cfg.get("seed", DEFAULT_SEED) if seed is None else seed
    n_trials = cfg.get("n_trials", DEFAULT_TRIALS) if n_trials is None else n_trials
    workers = cfg.get("workers", 1) if workers is None else workers
    effective = {**cfg, "seed": seed, "n_trials": n_trials}
    header, rows, summary = _RUNNERS[kind](effective, seed, n_trials, workers)
    outputs = cfg.get("output", {})
    csv_path = os.path.join(out_dir, outputs.get("csv", f"{kind}.csv"))
    summary_path = os.path.join(out_dir, outputs.get("summary", f"{kind}.summary.json"))
    doc = {
        "experiment": kind,
        "config_digest": config_digest(effective),
        "seed": seed,
        "n_trials": n_trials,
        "units": "bits" if bits else "nats",
        "config": {k: v for k, v in effective.items() if k not in ("workers", "output")},
        **summary,
    }
    for path in (csv_path, summary_path):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(header, rows, bits))
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(_convert(doc, bits), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, summary_path


def build_parser():
    p = argparse.ArgumentParser(prog="multikeyhole", description="Multi-keyhole MIMO channel experiments.")
    sub = p.add_subparsers(dest="experiment", required=True)
    for kind in EXPERIMENTS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("config", help="YAML experiment config")
        s.add_argument("--seed", type=int, help="master seed (overrides config)")
        s.add_argument("--trials", type=int, help="Monte Carlo trials (overrides config n_trials)")
        s.add_argument("--out", default=".", help="output directory (default: current)")
        s.add_argument("--bits", action="store_true", help="report capacities in bits instead of nats")
        s.add_argument("--workers", type=int, help="worker processes (does not change results)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. --set snr=10 (repeatable)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment, args.set)
        if args.trials is not None and args.trials < 1:
            raise ConfigError(f"--trials must be >= 1, got {args.trials}")
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run(args.experiment, cfg, args.seed, args.trials, args.out, args.bits, args.workers)
    except (DomainError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
