"""Experiment configs, sweep runners and artifact writers behind the ``genlab`` command."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np
from scipy.stats import spearmanr

from . import bounds
from .datagen import corrupt_labels, gen_gaussian_mixture, load_mnist_subset
from .linalg import make_rng
from .network import forward, init_mlp, margins, predict
from .plot import plot_svg
from .training import TrainConfig, interpolate_error, make_run_pair, sgd_train, zero_one_error
from .ucfail import HypersphereParams, ucfail_report

EXPERIMENTS = ("norms-vs-m", "bound-vs-depth", "margin-gap", "interp", "ucfail-linear",
               "ucfail-hypersphere", "ucfail-exp", "gde-scatter")

_STOP = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["margin", "loss", "accuracy", "epochs"]},
        "margin_frac": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "margin": {"type": "number"},
        "loss": {"type": "number"},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "seeds": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "plot": {"type": "boolean"},
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["mnist", "mixture"]},
                "root": {"type": "string"},
                "n_train": {"type": "integer", "minimum": 2},
                "n_test": {"type": "integer", "minimum": 1},
                "dim": {"type": "integer", "minimum": 1},
                "classes": {"type": "integer", "minimum": 2},
                "spread": {"type": "number", "minimum": 0},
                "label_noise": {"type": "number", "minimum": 0, "maximum": 1},
                "split_seed": {"type": "integer", "minimum": 0},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "depth": {"type": "integer", "minimum": 1},
                "width": {"type": "integer", "minimum": 1},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lr": {"type": "number", "minimum": 0},
                "momentum": {"type": "number", "minimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "loss_kind": {"enum": ["xent", "squared", "ascent"]},
                "stop": _STOP,
                "max_epochs": {"type": "integer", "minimum": 0},
                "lr_decay_factor": {"type": ["number", "null"]},
                "lr_decay_every": {"type": ["integer", "null"], "minimum": 1},
                "init_scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "params": {"type": "object"},
        "assert": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["metric", "op", "value"],
                "additionalProperties": False,
                "properties": {
                    "metric": {"type": "string"},
                    "op": {"enum": ["<", "<=", ">", ">=", "=="]},
                    "value": {"type": ["number", "boolean"]},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """Bad or unreadable config; the message carries file/line/field diagnostics."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    seeds: int = 1
    output_dir: str = "genlab_out"
    plot: bool = True
    data: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    params: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["assert"] = d.pop("assertions")
        return d

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def validate_config(raw: dict, source: str = "<config>") -> list[str]:
    v = jsonschema.Draft7Validator(SCHEMA)
    errs = []
    for e in sorted(v.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path))):
        where = "/".join(str(p) for p in e.absolute_path) or "(top level)"
        errs.append(f"{source}: field {where}: {e.message}")
    return errs


def config_from_dict(raw: dict, source: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    errs = validate_config(raw, source)
    if errs:
        raise ConfigError("\n".join(errs))
    raw = dict(raw)
    assertions = raw.pop("assert", [])
    data = dict(raw.get("data", {}))
    if "root" in data:
        root = Path(data["root"])
        if not root.is_absolute() and base_dir is not None:
            root = base_dir / root
        if not root.is_dir():
            raise ConfigError(f"{source}: field data/root: directory {root} does not exist")
        data["root"] = str(root)
    raw["data"] = data
    try:
        return ExperimentConfig(assertions=assertions, **raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{source}: {e}") from e


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw, str(path), path.parent)


# ---------------------------------------------------------------- data and models

def _derived_seed(*key) -> int:
    return int(make_rng(tuple(int(k) for k in key)).integers(0, 2**31 - 1))


def _data_pool(cfg: ExperimentConfig, n_pool: int):
    """(train pool of n_pool points, fixed test set, n_classes)."""
    d = cfg.data
    source = d.get("source", "mixture")
    n_test = d.get("n_test", 1000)
    if source == "mnist":
        pool, rest = load_mnist_subset(n_pool, seed=d.get("split_seed", 0), root=d.get("root"))
        if len(rest) == 0:
            raise ConfigError(f"MNIST subset has no points left for a test set after {n_pool} training points")
        return pool, rest.subset(np.arange(min(n_test, len(rest)))), 10
    K = d.get("classes", 2)
    dim = d.get("dim", 20)
    spread = d.get("spread", 1.0)
    pool = gen_gaussian_mixture(n_pool, dim, K, (cfg.seed, 1), spread)
    test = gen_gaussian_mixture(n_test, dim, K, (cfg.seed, 2), spread)
    return pool, test, K


def _train_subset(cfg, pool, m, K, key):
    idx = make_rng((cfg.seed, 11) + key).permutation(len(pool))[:m]
    S = pool.subset(np.sort(idx))
    noise = cfg.data.get("label_noise", 0.0)
    if noise:
        S = corrupt_labels(S, noise, K, (cfg.seed, 13) + key)
    return S


def _widths(cfg, dim, K, depth=None):
    depth = depth if depth is not None else cfg.model.get("depth", 2)
    width = cfg.model.get("width", 64)
    return [dim] + [width] * (depth - 1) + [K]


def _train_net(cfg, widths, S, key):
    tc = replace(cfg.train, seed_init=_derived_seed(cfg.seed, 21, *key),
                 seed_order=_derived_seed(cfg.seed, 22, *key))
    net = init_mlp(widths, tc.seed_init, tc.init_scale)
    rep = sgd_train(net, S.inputs, S.labels, tc)
    return net, rep


def _finite(x: float) -> float:
    return float(x) if math.isfinite(x) else math.inf


def _spearman(x, y) -> float:
    if len(set(x)) < 2 or len(set(y)) < 2:
        return float("nan")
    return float(spearmanr(x, y)[0])


def _means_by(rows, key, col):
    groups: dict = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r[col])
    ks = sorted(groups)
    return ks, [float(np.mean(groups[k])) for k in ks]


# ---------------------------------------------------------------- sweep points

def _norms_point(cfg: ExperimentConfig, point):
    m, s = point
    ms = cfg.params.get("ms", [256, 512])
    pool, test, K = _data_pool(cfg, max(ms))
    S = _train_subset(cfg, pool, m, K, (s,))
    widths = _widths(cfg, pool.dim, K)
    net, rep = _train_net(cfg, widths, S, (m, s))
    D, H = net.depth, max(widths[1:-1] or widths[1:])
    mg = margins(forward(net, S.inputs), S.labels)
    q = cfg.params.get("gamma_quantile", 0.0)
    gamma = float(np.quantile(mg, q)) if q else float(np.min(mg))
    B = float(np.max(np.linalg.norm(S.inputs, axis=1)))
    dist, per_layer = bounds.distance_from_init(net)
    spec = [float(np.linalg.norm(W, 2)) for W in net.weights]
    row = {
        "m": m, "seed": s, "epochs": rep.epochs, "train_acc": rep.train_acc,
        "test_error": zero_one_error(net, test.inputs, test.labels),
        "distance_from_init": dist, "prod_spectral": float(np.prod(spec)), "gamma": gamma,
    }
    for d, (v, sn) in enumerate(zip(per_layer, spec), start=1):
        row[f"dist_layer{d}"] = v
        row[f"spec_layer{d}"] = sn
    if gamma > 0:
        row["neyshabur18"] = bounds.neyshabur18_bound(net, gamma, m, B, H, D)
        row["bartlett17"] = bounds.bartlett17_bound(net, gamma, m, B, H, D)
    else:
        row["neyshabur18"] = row["bartlett17"] = math.inf
    if cfg.params.get("thesis_bound", False):
        row["thesis_bound"] = _finite(bounds.thesis_bound(net, S.inputs, S.labels, cfg.params.get("delta", 0.01),
                                                          gamma_class=None).bound_value)
    return [row]


def _norms_summary(cfg, rows):
    out = {}
    for col in ("distance_from_init", "prod_spectral", "test_error", "neyshabur18", "bartlett17"):
        ms, means = _means_by(rows, "m", col)
        out[f"mean_{col}"] = dict(zip(map(str, ms), means))
        out[f"spearman_{col}"] = _spearman(ms, means)
    return out


def _depth_point(cfg: ExperimentConfig, point):
    D, s = point
    n = cfg.data.get("n_train", 2000)
    pool, test, K = _data_pool(cfg, n)
    S = _train_subset(cfg, pool, n, K, (s,))
    widths = _widths(cfg, pool.dim, K, depth=D)
    net, rep = _train_net(cfg, widths, S, (D, s))
    delta = cfg.params.get("delta", 0.01)
    gc = cfg.params.get("gamma_class")
    norms = bounds.train_norm_profile(net, S.inputs, S.labels, gamma_class=gc)
    main = bounds.bound_from_norms(net, S.inputs, S.labels, norms, delta)
    cheap = bounds.bound_from_norms(net, S.inputs, S.labels, norms, delta, "cheap")
    p = cfg.params.get("pct", 0.05)
    pct = bounds.thesis_bound_preact(net, S.inputs, S.labels, delta, "pct", p, norms=norms)
    med = bounds.thesis_bound_preact(net, S.inputs, S.labels, delta, "median", norms=norms)
    H = cfg.model.get("width", 64)
    g = norms.gamma_class
    row = {
        "depth": D, "seed": s, "epochs": rep.epochs, "train_acc": rep.train_acc,
        "test_error": zero_one_error(net, test.inputs, test.labels), "gamma_class": g,
        "B_layer": main.B_layer_l2, "B_preact": main.B_preact, "B_jac_row": main.B_jac_row_l2,
        "B_jac_spec": main.B_jac_spec, "B_output": main.B_output, "sigma_star": main.sigma_star,
        "kl": main.kl_term, "bound_main": main.bound_value, "bound_cheap": cheap.bound_value,
        "bound_pct": pct.bound_value, "bound_median": med.bound_value,
        "neyshabur18": bounds.neyshabur18_bound(net, g, n, norms.B, H, D) if g > 0 else math.inf,
        "bartlett17": bounds.bartlett17_bound(net, g, n, norms.B, H, D) if g > 0 else math.inf,
    }
    return [row]


def _depth_summary(cfg, rows):
    fin = [r for r in rows if math.isfinite(r["bound_main"]) and r["bound_main"] > 0]
    slope = float("nan")
    if len({r["depth"] for r in fin}) >= 2:
        slope = float(np.polyfit([r["depth"] for r in fin], [math.log(r["bound_main"]) for r in fin], 1)[0])
    ok = all(r["bound_pct"] <= r["bound_main"] and r["bound_median"] <= r["bound_main"] for r in fin)
    ds, means = _means_by(fin, "depth", "bound_main") if fin else ([], [])
    return {
        "log_bound_slope": slope,
        "variants_le_main": ok,
        "finite_main": len(fin),
        "mean_bound_main": dict(zip(map(str, ds), means)),
    }


def _margin_point(cfg: ExperimentConfig, point):
    m, s = point
    ms = cfg.params.get("ms", [256, 512])
    pool, test, K = _data_pool(cfg, max(ms))
    S = _train_subset(cfg, pool, m, K, (s,))
    net, rep = _train_net(cfg, _widths(cfg, pool.dim, K), S, (m, s))
    tr = margins(forward(net, S.inputs), S.labels)
    te = margins(forward(net, test.inputs), test.labels)
    return [{"m": m, "seed": s, "train_acc": rep.train_acc, "mean_train_margin": float(np.mean(tr)),
             "mean_test_margin": float(np.mean(te)), "gap": float(np.mean(tr) - np.mean(te)),
             "test_error": float(np.mean(te <= 0))}]


def _margin_summary(cfg, rows):
    ms, gaps = _means_by(rows, "m", "gap")
    return {"mean_gap": dict(zip(map(str, ms), gaps)), "spearman_gap": _spearman(ms, gaps),
            "min_gap": float(min(r["gap"] for r in rows))}


def _interp_point(cfg: ExperimentConfig, point):
    mode, s = point
    n = cfg.data.get("n_train", 500)
    pool, test, K = _data_pool(cfg, n)
    S = _train_subset(cfg, pool, n, K, (s,))
    tc = replace(cfg.train, seed_init=_derived_seed(cfg.seed, 31, s), seed_order=_derived_seed(cfg.seed, 32, s))
    pair = make_run_pair(_widths(cfg, pool.dim, K), S.inputs, S.labels, tc, mode)
    steps = cfg.params.get("steps", 11)
    tr = interpolate_error(pair.net1, pair.net2, S.inputs, S.labels, steps)
    te = interpolate_error(pair.net1, pair.net2, test.inputs, test.labels, steps)
    return [{"mode": mode, "seed": s, "t": t, "train_error": a, "test_error": b}
            for (t, a), (_, b) in zip(tr, te)]


def _interp_summary(cfg, rows):
    out = {}
    for mode in sorted({r["mode"] for r in rows}):
        barriers = []
        for s in sorted({r["seed"] for r in rows if r["mode"] == mode}):
            cur = [r for r in rows if r["mode"] == mode and r["seed"] == s]
            e0, e1 = cur[0]["test_error"], cur[-1]["test_error"]
            barriers.append(max(r["test_error"] - ((1 - r["t"]) * e0 + r["t"] * e1) for r in cur))
        out[f"mean_barrier_{mode}"] = float(np.mean(barriers))
    return out


def _ucfail_point(cfg: ExperimentConfig, point):
    (m,) = point
    scenario = cfg.experiment.split("-", 1)[1]
    p = dict(cfg.params)
    eps, delta = p.pop("epsilon", 0.05), p.pop("delta", 0.05)
    trials, n_test = p.pop("trials", 5), p.pop("n_test", 10_000)
    p.pop("ms", None)
    if scenario == "hypersphere":
        tc = p.pop("train", None)
        hp = HypersphereParams(**p)
        if tc is not None:
            hp.train = TrainConfig(**{**asdict(hp.train), **tc})
        p = hp
    rep = ucfail_report(scenario, m, p, eps, delta, trials, (cfg.seed, m), n_test)
    return [{"m": m, "conditions_met": rep.conditions_met, **asdict(r)} for r in rep.rows]


def _ucfail_summary(cfg, rows):
    out = {}
    for m in sorted({r["m"] for r in rows}):
        cur = [r for r in rows if r["m"] == m]
        out[str(m)] = {
            "mean_test_error": float(np.mean([r["test_error"] for r in cur])),
            "max_train_error": float(max(r["train_error"] for r in cur)),
            "frac_bad_fully_wrong": float(np.mean([r["bad_error"] == 1.0 for r in cur])),
            "eps_unif_alg_lower": float(np.mean([r["bad_error"] - r["test_error"] for r in cur])),
            "frac_bad_ge_3x_test": float(np.mean([r["bad_error"] >= 3 * r["test_error"] for r in cur])),
            "conditions_met": bool(cur[0]["conditions_met"]),
        }
    return out


def _gde_point(cfg: ExperimentConfig, point):
    mode, s = point
    n = cfg.data.get("n_train", 200)
    pool, test, K = _data_pool(cfg, n)
    S = _train_subset(cfg, pool, n, K, ())
    tc = replace(cfg.train, seed_init=_derived_seed(cfg.seed, 41, s), seed_order=_derived_seed(cfg.seed, 42, s))
    pair = make_run_pair(_widths(cfg, pool.dim, K), S.inputs, S.labels, tc, mode)
    p1, p2 = predict(pair.net1, test.inputs), predict(pair.net2, test.inputs)
    return [{"mode": mode, "pair": s, "disagreement": float(np.mean(p1 != p2)),
             "test_error": float(np.mean(p1 != test.labels)), "test_error_2": float(np.mean(p2 != test.labels)),
             "train_acc_1": pair.report1.train_acc, "train_acc_2": pair.report2.train_acc}]


def _gde_summary(cfg, rows):
    band = cfg.params.get("band", 0.3)
    out = {}
    for mode in sorted({r["mode"] for r in rows}):
        cur = [r for r in rows if r["mode"] == mode]
        inside = [abs(r["test_error"] - r["disagreement"]) < band * r["disagreement"] for r in cur]
        out[mode] = {"pairs": len(cur), "in_band": int(sum(inside)),
                     "mean_disagreement": float(np.mean([r["disagreement"] for r in cur])),
                     "mean_test_error": float(np.mean([r["test_error"] for r in cur]))}
    return out


def _points(cfg: ExperimentConfig):
    p, seeds = cfg.params, range(cfg.seeds)
    kind = cfg.experiment
    if kind in ("norms-vs-m", "margin-gap"):
        return [(m, s) for m in p.get("ms", [256, 512]) for s in seeds]
    if kind == "bound-vs-depth":
        return [(D, s) for D in p.get("depths", [3, 5, 8]) for s in seeds]
    if kind == "interp":
        return [(mode, s) for mode in p.get("modes", ["DiffInit"]) for s in seeds]
    if kind == "gde-scatter":
        return [(mode, s) for mode in p.get("modes", ["DiffInit"]) for s in range(p.get("pairs", cfg.seeds))]
    return [(m,) for m in p.get("ms", [p.get("m", 100)])]


_RUNNERS = {
    "norms-vs-m": (_norms_point, _norms_summary),
    "bound-vs-depth": (_depth_point, _depth_summary),
    "margin-gap": (_margin_point, _margin_summary),
    "interp": (_interp_point, _interp_summary),
    "ucfail-linear": (_ucfail_point, _ucfail_summary),
    "ucfail-hypersphere": (_ucfail_point, _ucfail_summary),
    "ucfail-exp": (_ucfail_point, _ucfail_summary),
    "gde-scatter": (_gde_point, _gde_summary),
}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict]
    summary: dict
    assertions: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)


def _call(args):
    fn, cfg, point = args
    return fn(cfg, point)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run every sweep point, serially or in a process pool; rows come back in point order either way."""
    point_fn, summary_fn = _RUNNERS[cfg.experiment]
    pts = _points(cfg)
    if threads > 1 and len(pts) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = dict(zip(range(len(pts)), ex.map(_call, [(point_fn, cfg, p) for p in pts])))
    else:
        results = {i: point_fn(cfg, p) for i, p in enumerate(pts)}
    rows = [r for i in sorted(results) for r in results[i]]
    res = ExperimentResult(cfg, rows, summary_fn(cfg, rows))
    res.assertions = check_assertions(res.summary, cfg.assertions)
    return res


_OPS = {"<": lambda a, b: a < b, "<=": lambda a, b: a <= b, ">": lambda a, b: a > b,
        ">=": lambda a, b: a >= b, "==": lambda a, b: a == b}


def lookup(summary: dict, dotted: str):
    cur = summary
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise KeyError(dotted)
        cur = cur[part]
    return cur


def check_assertions(summary: dict, assertions: list) -> list[dict]:
    out = []
    for a in assertions:
        try:
            got = lookup(summary, a["metric"])
            ok = bool(_OPS[a["op"]](got, a["value"]))
        except KeyError:
            got, ok = None, False
        out.append({**a, "observed": got, "passed": ok})
    return out


# ---------------------------------------------------------------- artifacts

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def rows_to_csv(rows: list[dict], config_hash: str, seed: int) -> str:
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in cols])
    buf.write(f"# config_hash={config_hash} seed={seed}\n")
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _plots(res: ExperimentResult):
    cfg, rows = res.config, res.rows
    kind = cfg.experiment
    if kind == "gde-scatter":
        pts = [{"x": r["disagreement"], "y": r["test_error"], "series": r["mode"]} for r in rows]
        yield "gde_scatter", plot_svg(pts, "gde", title="test error vs disagreement",
                                      xlabel="disagreement", ylabel="test error")
    elif kind in ("norms-vs-m", "margin-gap"):
        col = "distance_from_init" if kind == "norms-vs-m" else "gap"
        ms, means = _means_by(rows, "m", col)
        pts = [{"x": math.log2(m), "y": v, "series": col} for m, v in zip(ms, means)]
        yield kind, plot_svg(pts, "line", title=f"{col} vs m", xlabel="log2 m", ylabel=col)
    elif kind == "bound-vs-depth":
        pts = [{"x": r["depth"], "y": math.log10(r[c]), "series": c} for r in rows
               for c in ("bound_main", "bound_pct", "bound_median") if math.isfinite(r[c]) and r[c] > 0]
        yield kind, plot_svg(pts, "scatter", title="bound vs depth", xlabel="depth", ylabel="log10 bound")
    elif kind == "interp":
        pts = [{"x": r["t"], "y": r["test_error"], "series": f'{r["mode"]}/{r["seed"]}'} for r in rows]
        yield kind, plot_svg(pts, "line", title="interpolation", xlabel="t", ylabel="test error")
    else:
        pts = [{"x": r["test_error"], "y": r["bad_error"], "series": f'm={r["m"]}'} for r in rows]
        yield kind, plot_svg(pts, "scatter", title="error on S' vs test error", xlabel="test error",
                             ylabel="error on S'")


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get("GENLAB_OUT") or cfg.output_dir)


def write_artifacts(res: ExperimentResult, out: Path | None = None) -> list[Path]:
    cfg = res.config
    out = Path(out) if out is not None else output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "results.csv"
    p.write_text(rows_to_csv(res.rows, cfg.config_hash, cfg.seed))
    written.append(p)
    if cfg.plot:
        for name, svg in _plots(res):
            p = out / f"{name}.svg"
            p.write_text(svg)
            written.append(p)
    report = {
        "experiment": cfg.experiment,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "summary": res.summary,
        "assertions": res.assertions,
        "passed": res.passed,
        "artifacts": sorted(q.name for q in written) + ["report.json"],
    }
    p = out / "report.json"
    p.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    written.append(p)
    return written
