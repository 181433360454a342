"""Experiment configuration and batch orchestration.

An experiment is one analysis kind applied to one input (a CSV panel or a
simulated system). :func:`run_experiment` validates everything up front,
computes all results in memory, then writes every output file atomically
together with a JSON manifest from which the run can be repeated.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .decomp import (
    DEFAULT_DEAD_BAND,
    SubsetSearchPolicy,
    decompose,
    dtau_scan,
    net_effect,
)
from .discrete import theorem1_curve, uniform_grid
from .dynsys import DynSysConfig, TimeSeriesPanel, paper_system, simulate, theorem2_config
from .errors import InputError, ParseError
from .io import (
    _bool,
    atomic_write_text,
    load_csv,
    parse_cond_lags,
    parse_int_range,
    parse_list,
    panel_to_csv,
    read_config,
    records_to_csv,
    system_from_dict,
    system_from_parser,
    system_to_dict,
)
from .knn import DEFAULT_K
from .te import ConditioningSet, EmbeddingSpec, transfer_entropy

KINDS = ("simulate", "theorem1", "theorem2-check", "te", "decomp", "dtau", "pairwise-syn-map")

THEOREM1_COLUMNS = ["p", "I_AB_given_C", "I_AB", "I_AB_given_D", "H_A"]

_EMBED = {"dim": (int, 2), "lag": (int, 1), "horizon": (int, 1), "normalize": (_bool, False)}
_POLICY = {
    "lags": (parse_int_range, list(range(1, 9))),
    "max_size": (int, 3),
    "mode": (str, "exhaustive"),
    "exhaustive_limit": (int, 12),
    "bias_matched": (_bool, True),
    "T": (str, "auto"),
}

# kind -> {param: (converter, default)}; a default of ... marks a required key.
PARAMS = {
    "simulate": {},
    "theorem1": {"grid": (int, 101)},
    "theorem2-check": {
        "alpha": (float, 0.05),
        "c": (float, 1.0),
        "seeds": (int, 20),
        "n": (int, 10_000),
        "d_s": (int, 2),
        **_EMBED,
        "normalize": (_bool, True),
    },
    "te": {
        "source": (str, ...),
        "target": (str, ...),
        "cond": (parse_list, []),
        "cond_lags": (parse_cond_lags, {}),
        **_EMBED,
    },
    "decomp": {
        "source": (str, ...),
        "target": (str, ...),
        "cond": (parse_list, []),
        "s": (str, ...),
        "dead_band": (float, DEFAULT_DEAD_BAND),
        **_POLICY,
        **_EMBED,
    },
    "dtau": {
        "pairs": (parse_list, ...),
        "cond_set": (parse_list, ...),
        "tau": (parse_int_range, ...),
        **_EMBED,
    },
    "pairwise-syn-map": {
        "conditioner_a": (str, ...),
        "conditioner_b": (str, ...),
        "channels": (parse_list, ...),
        **_POLICY,
        **_EMBED,
    },
}

# Default output file names per kind.
OUTPUTS = {
    "simulate": {"panel": "panel.csv"},
    "theorem1": {"curve": "curve.csv"},
    "theorem2-check": {"per_seed": "theorem2.csv", "summary": "theorem2_summary.csv"},
    "te": {"record": "te.csv"},
    "decomp": {"summary": "decomp.csv", "subsets": "decomp_subsets.csv"},
    "dtau": {"table": "dtau.csv"},
    "pairwise-syn-map": {"table": "pairwise_syn.csv", "summary": "pairwise_syn_summary.csv"},
}


def _convert(kind: str, raw: dict) -> dict:
    schema = PARAMS[kind]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ParseError(f"unknown parameter(s) for {kind}: {unknown}")
    out = {}
    for key, (conv, default) in schema.items():
        if key in raw and raw[key] is not None:
            value = raw[key]
            if isinstance(value, str):
                try:
                    value = conv(value)
                except (ValueError, InputError) as exc:
                    raise ParseError(f"bad value for {key!r}: {value!r} ({exc})") from None
            out[key] = value
        elif default is ...:
            raise ParseError(f"missing required parameter {key!r} for {kind}")
        else:
            out[key] = default
    return out


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    k: int = DEFAULT_K
    threads: int = 1
    input_csv: Optional[str] = None
    system: Optional[DynSysConfig] = None
    out_dir: str = "."
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParseError(f"unknown experiment kind {self.kind!r}; choose from {list(KINDS)}")
        self.params = _convert(self.kind, dict(self.params))
        if self.k < 1:
            raise InputError("k must be >= 1")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        needs_input = self.kind in ("te", "decomp", "dtau", "pairwise-syn-map")
        if self.input_csv is not None and self.system is not None:
            raise InputError("give exactly one input source: csv or system, not both")
        if needs_input and self.input_csv is None and self.system is None:
            raise InputError(f"{self.kind} needs an input source (csv or system)")
        if self.kind == "simulate" and self.system is None:
            raise InputError("simulate needs a system definition")
        if self.kind == "theorem1" and (self.input_csv or self.system):
            raise InputError("theorem1 takes no input data")
        outs = dict(OUTPUTS[self.kind])
        unknown = sorted(set(self.outputs) - set(outs))
        if unknown:
            raise ParseError(f"unknown output name(s) for {self.kind}: {unknown}")
        outs.update(self.outputs)
        self.outputs = outs

    def to_dict(self) -> dict:
        params = {}
        for key, value in self.params.items():
            params[key] = value
        return {
            "kind": self.kind,
            "params": params,
            "seed": self.seed,
            "k": self.k,
            "threads": self.threads,
            "input_csv": self.input_csv,
            "system": system_to_dict(self.system) if self.system else None,
            "out_dir": self.out_dir,
            "outputs": dict(self.outputs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        system = d.pop("system", None)
        return cls(system=system_from_dict(system) if system else None, **d)

    def hash(self) -> str:
        # threads and out_dir never change results
        d = self.to_dict()
        d.pop("threads")
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_experiment_config(path) -> ExperimentConfig:
    """Read an experiment from a sectioned ``.cfg`` file or a run manifest (``.json``)."""
    path = Path(path)
    if path.suffix == ".json":
        try:
            manifest = json.loads(path.read_text())
            return ExperimentConfig.from_dict(manifest["config"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"cannot use {path} as a manifest: {exc}") from None
    parser = read_config(path)
    if "experiment" not in parser:
        raise ParseError("config has no [experiment] section")
    exp = parser["experiment"]
    try:
        kind = exp.get("kind")
        seed = int(exp.get("seed", "0"))
        k = int(exp.get("k", str(DEFAULT_K)))
        threads = int(exp.get("threads", "1"))
    except ValueError as exc:
        raise ParseError(f"bad value in [experiment]: {exc}") from None
    out_dir = exp.get("out_dir", ".")
    if not Path(out_dir).is_absolute():
        out_dir = str(path.parent / out_dir)
    input_csv = None
    system = None
    if "input" in parser:
        inp = parser["input"]
        if "csv" in inp:
            input_csv = inp["csv"]
            if not Path(input_csv).is_absolute():
                input_csv = str(path.parent / input_csv)
        if "system" in inp:
            sys_path = Path(inp["system"])
            if not sys_path.is_absolute():
                sys_path = path.parent / sys_path
            system = system_from_parser(read_config(sys_path))
    if "system" in parser:
        if system is not None:
            raise InputError("give exactly one input source: csv or system, not both")
        system = system_from_parser(parser)
    params = dict(parser["params"]) if "params" in parser else {}
    outputs = dict(parser["outputs"]) if "outputs" in parser else {}
    return ExperimentConfig(kind, params, seed, k, threads, input_csv, system, out_dir, outputs)


# -- analyses ----------------------------------------------------------------

def _spec(params) -> EmbeddingSpec:
    return EmbeddingSpec(params["dim"], params["lag"], params["horizon"])


def _policy(params) -> SubsetSearchPolicy:
    return SubsetSearchPolicy(
        tuple(params["lags"]), params["mode"], params["max_size"], params["exhaustive_limit"]
    )


def _late_offset(params):
    T = params["T"]
    if T in (None, "auto"):
        return None
    try:
        return int(T)
    except ValueError:
        raise ParseError(f"T must be an integer or 'auto', got {T!r}") from None


@dataclass
class PairwiseSynMap:
    channels: list
    syn_a: list
    syn_b: list
    conditioner_a: str
    conditioner_b: str

    @property
    def difference(self) -> list:
        return [a - b for a, b in zip(self.syn_a, self.syn_b)]

    @property
    def mean_difference(self) -> float:
        return float(np.mean(self.difference))

    def rows(self) -> list[dict]:
        return [
            {"channel": ch, "syn_a": a, "syn_b": b, "difference": d}
            for ch, a, b, d in zip(self.channels, self.syn_a, self.syn_b, self.difference)
        ]


def pairwise_syn_map(
    panel: TimeSeriesPanel,
    conditioner_a: str,
    conditioner_b: str,
    channel_set,
    policy: SubsetSearchPolicy = SubsetSearchPolicy(),
    spec: EmbeddingSpec = EmbeddingSpec(),
    k: int = DEFAULT_K,
    seed: int = 0,
    normalize: bool = False,
    bias_matched: bool = False,
    T: Optional[int] = None,
    threads: int = 1,
) -> PairwiseSynMap:
    """Synergy due to A (with B fixed) versus synergy due to B (with A fixed), per channel.

    For each source channel ``i`` the synergy measure is averaged over all
    single-channel targets in ``channel_set`` other than ``i``.
    """
    channels = list(dict.fromkeys(channel_set))
    if len(channels) < 2:
        raise InputError("channel set needs at least two channels")
    if conditioner_a in channels or conditioner_b in channels:
        raise InputError("conditioners must not be in the channel set")
    panel.require(conditioner_a, conditioner_b, *channels)
    same = conditioner_a == conditioner_b

    tasks = []
    for i in channels:
        for j in channels:
            if i != j:
                tasks.append(("a", i, j, conditioner_a, conditioner_b))
                tasks.append(("b", i, j, conditioner_b, conditioner_a))

    def syn(task):
        _, i, j, s, z = task
        return decompose(
            panel, i, j, [] if same else [z], s, policy, spec, k, seed=seed,
            normalize=normalize, bias_matched=bias_matched, T=T, sides=("syn",),
        ).i_syn_hat

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(syn, tasks))
    else:
        values = [syn(t) for t in tasks]

    per = {"a": {ch: [] for ch in channels}, "b": {ch: [] for ch in channels}}
    for (side, i, *_), v in zip(tasks, values):
        per[side][i].append(v)
    per_a, per_b = per["a"], per["b"]
    return PairwiseSynMap(
        channels,
        [float(np.mean(per_a[c])) for c in channels],
        [float(np.mean(per_b[c])) for c in channels],
        conditioner_a,
        conditioner_b,
    )


def theorem2_seed(alpha, c, seed, n, d_s=2, spec=EmbeddingSpec(), k=DEFAULT_K,
                  normalize=True, base: Optional[DynSysConfig] = None) -> dict:
    """One seed of the early-past / late-past ordering check on the X, Y, Z, S system."""
    if base is None:
        base = paper_system(n, seed)
    else:
        base = base.with_(n_samples=n, seed=seed)
    panel = simulate(theorem2_config(alpha, c, base))
    block = list(range(2, 2 + d_s))
    history = max(block)
    kw = dict(spec=spec, k=k, seed=seed, normalize=normalize, min_history=history)
    early = transfer_entropy(panel, "Z", "X", {"Y": None, "S": [1]}, **kw).value
    plain = transfer_entropy(panel, "Z", "X", {"Y": None}, **kw).value
    late = transfer_entropy(panel, "Z", "X", {"Y": None, "S": block}, **kw).value
    return {
        "seed": seed,
        "te_early": early,
        "te_plain": plain,
        "te_late": late,
        "early_gt_plain": early > plain,
        "plain_gt_late": plain > late,
    }


def summarize_theorem2(rows: list[dict]) -> dict:
    r = np.array([[row["te_early"], row["te_plain"], row["te_late"]] for row in rows])
    m = len(r)
    mean = r.mean(axis=0)
    se = r.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.full(3, np.nan)
    d1 = r[:, 0] - r[:, 1]
    d2 = r[:, 1] - r[:, 2]
    se_d1 = d1.std(ddof=1) / np.sqrt(m) if m > 1 else np.nan
    se_d2 = d2.std(ddof=1) / np.sqrt(m) if m > 1 else np.nan
    gap1, gap2 = float(d1.mean()), float(d2.mean())
    return {
        "n_seeds": m,
        "mean_te_early": float(mean[0]),
        "mean_te_plain": float(mean[1]),
        "mean_te_late": float(mean[2]),
        "se_te_early": float(se[0]),
        "se_te_plain": float(se[1]),
        "se_te_late": float(se[2]),
        "gap_early_plain": gap1,
        "gap_plain_late": gap2,
        "se_gap_early_plain": float(se_d1),
        "se_gap_plain_late": float(se_d2),
        "ordering_in_mean": bool(mean[0] > mean[1] > mean[2]),
        "gaps_exceed_2se": bool(gap1 > 2 * se_d1 and gap2 > 2 * se_d2),
        "seeds_with_ordering": int(sum(a and b for a, b in zip(r[:, 0] > r[:, 1], r[:, 1] > r[:, 2]))),
    }


# -- running -----------------------------------------------------------------

@dataclass
class RunReport:
    outputs: dict
    manifest: Path
    summary: dict


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_input(config: ExperimentConfig) -> Optional[TimeSeriesPanel]:
    if config.input_csv is not None:
        return load_csv(config.input_csv)
    if config.system is not None and config.kind != "theorem2-check":
        return simulate(config.system)
    return None


def _check_channels(config: ExperimentConfig, panel: TimeSeriesPanel) -> None:
    p = config.params
    names = []
    if config.kind == "te":
        names = [p["source"], p["target"], *p["cond"], *p["cond_lags"]]
    elif config.kind == "decomp":
        names = [p["source"], p["target"], p["s"], *p["cond"]]
    elif config.kind == "dtau":
        names = [*p["pairs"], *p["cond_set"]]
    elif config.kind == "pairwise-syn-map":
        names = [p["conditioner_a"], p["conditioner_b"], *p["channels"]]
    panel.require(*names)


def _restrict(config: ExperimentConfig, panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Keep only the declared channels, so nothing else can leak into estimates."""
    p = config.params
    if config.kind == "te":
        names = [p["source"], p["target"], *p["cond"], *p["cond_lags"]]
    elif config.kind == "decomp":
        names = [p["source"], p["target"], p["s"], *p["cond"]]
    elif config.kind == "dtau":
        names = [*p["pairs"], *p["cond_set"]]
    elif config.kind == "pairwise-syn-map":
        names = [p["conditioner_a"], p["conditioner_b"], *p["channels"]]
    else:
        return panel
    return panel.select(list(dict.fromkeys(names)))


def compute(config: ExperimentConfig, panel: Optional[TimeSeriesPanel]):
    """Run the analysis; returns ``(texts, summary, estimates)`` with texts keyed by output name."""
    p = config.params
    kind = config.kind
    if kind == "simulate":
        return {"panel": panel_to_csv(panel)}, {"n": panel.n, "channels": list(panel.channels)}, []

    if kind == "theorem1":
        points = theorem1_curve(uniform_grid(p["grid"]))
        rows = [dict(zip(THEOREM1_COLUMNS, (q.p, q.i_ab_given_c, q.i_ab, q.i_ab_given_d, q.h_a)))
                for q in points]
        return {"curve": records_to_csv(rows, THEOREM1_COLUMNS)}, {"rows": len(rows)}, []

    if kind == "theorem2-check":
        spec = _spec(p)
        seeds = [config.seed + j for j in range(p["seeds"])]

        def one(seed):
            return theorem2_seed(p["alpha"], p["c"], seed, p["n"], p["d_s"], spec, config.k,
                                 p["normalize"], base=config.system)

        if config.threads > 1:
            with ThreadPoolExecutor(config.threads) as pool:
                rows = list(pool.map(one, seeds))
        else:
            rows = [one(s) for s in seeds]
        summary = summarize_theorem2(rows)
        texts = {
            "per_seed": records_to_csv(rows),
            "summary": records_to_csv([summary]),
        }
        return texts, summary, [{"embedding": spec.label(), "k": config.k,
                                 "normalized": p["normalize"], "variant": "ksg1-frenzel-pompe"}]

    panel = _restrict(config, panel)
    spec = _spec(p)
    if kind == "te":
        cond = ConditioningSet([(c, None) for c in p["cond"]] + list(p["cond_lags"].items()))
        est = transfer_entropy(panel, p["source"], p["target"], cond, spec, config.k,
                               seed=config.seed, normalize=p["normalize"])
        record = est.as_record()
        return {"record": records_to_csv([record])}, record, [record]

    if kind == "decomp":
        result = decompose(
            panel, p["source"], p["target"], p["cond"], p["s"], _policy(p), spec, config.k,
            seed=config.seed, normalize=p["normalize"], bias_matched=p["bias_matched"],
            T=_late_offset(p), threads=config.threads,
        )
        net, label = net_effect(result, dead_band=p["dead_band"])
        summary = {
            "i_syn_hat": result.i_syn_hat,
            "i_red_hat": result.i_red_hat,
            "net": net,
            "label": label,
            "best_syn_subset": result.best_syn_subset,
            "best_red_subset": result.best_red_subset,
            "te_baseline": result.te_baseline,
            "bias_matched": result.bias_matched,
            "T": result.late_past_offset,
            **result.meta,
        }
        texts = {
            "summary": records_to_csv([summary]),
            "subsets": records_to_csv(result.per_subset,
                                      ["subset", "te", "reference", "syn_score", "red_score"]),
        }
        return texts, summary, [result.meta]

    if kind == "dtau":
        rows = dtau_scan(panel, p["pairs"], p["cond_set"], p["tau"], spec, config.k,
                         seed=config.seed, normalize=p["normalize"], threads=config.threads)
        records = [asdict(r) for r in rows]
        return ({"table": records_to_csv(records)}, {"rows": len(records)},
                [{"embedding": spec.label(), "k": config.k, "normalized": p["normalize"]}])

    if kind == "pairwise-syn-map":
        result = pairwise_syn_map(
            panel, p["conditioner_a"], p["conditioner_b"], p["channels"], _policy(p), spec,
            config.k, seed=config.seed, normalize=p["normalize"],
            bias_matched=p["bias_matched"], T=_late_offset(p), threads=config.threads,
        )
        summary = {
            "conditioner_a": result.conditioner_a,
            "conditioner_b": result.conditioner_b,
            "mean_difference": result.mean_difference,
            "n_channels": len(result.channels),
            "target_treatment": "mean over single-channel targets",
        }
        texts = {"table": records_to_csv(result.rows()), "summary": records_to_csv([summary])}
        return texts, summary, [{"embedding": spec.label(), "k": config.k,
                                 "normalized": p["normalize"], "policy": _policy(p).label()}]
    raise ParseError(f"unknown kind {kind!r}")  # pragma: no cover


def validate(config: ExperimentConfig) -> Optional[TimeSeriesPanel]:
    """Load inputs and check every referenced channel; raises before anything is written."""
    panel = _load_input(config)
    if panel is not None:
        _check_channels(config, panel)
    if config.kind in ("decomp", "pairwise-syn-map"):
        _policy(config.params)
        _late_offset(config.params)
    if config.kind != "theorem1" and config.kind != "simulate":
        _spec(config.params)
    return panel


def run_experiment(config: ExperimentConfig) -> RunReport:
    panel = validate(config)
    texts, summary, estimates = compute(config, panel)
    out_dir = Path(config.out_dir)
    written = {}
    files = {}
    for name, text in texts.items():
        path = out_dir / config.outputs[name]
        atomic_write_text(path, text)
        written[name] = path
        files[name] = {"file": config.outputs[name], "sha256": _sha256_file(path)}
    manifest = {
        "tool": "tedecomp",
        "version": __version__,
        "kind": config.kind,
        "seed": config.seed,
        "config_sha256": config.hash(),
        "config": config.to_dict(),
        "input_sha256": _sha256_file(config.input_csv) if config.input_csv else None,
        "estimator": estimates,
        "summary": summary,
        "outputs": files,
    }
    stem = Path(config.outputs[next(iter(texts))]).stem
    manifest_path = out_dir / f"{stem}.manifest.json"
    atomic_write_text(manifest_path, json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return RunReport(written, manifest_path, summary)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
