"""Command-line front end: ``train``, ``ablate``, ``noise-sweep``, ``gen-sbm``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 input or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import metrics as M
from .config import VARIANTS, RunConfig, load_config
from .errors import ConfigError, DatasetError, RagcError
from .graphio import Graph, generate_sbm, load_dataset, save_dataset
from .objective import train

log = logging.getLogger("ragc")

DEFAULT_SIGMAS = (0.1, 0.2, 0.3)


@dataclass
class SeedRun:
    seed: int
    scores: dict[str, float]
    loss_history: list[float]
    z: np.ndarray
    labels: np.ndarray
    x_aug_checksum: str


@dataclass
class ExperimentResult:
    config: RunConfig
    report: M.MetricReport
    seconds: float
    loss_histories: dict[int, list[float]]
    outputs: dict[str, str] = field(default_factory=dict)
    runs: list[SeedRun] = field(default_factory=list, repr=False)

    def to_dict(self, command: str, dataset: str) -> dict:
        out = {
            "kind": "experiment",
            "command": command,
            "dataset": dataset,
            "variant": self.config.variant,
            "config": self.config.to_text(),
            "wall_clock_seconds": self.seconds,
            "final_loss": {str(s): h[-1] for s, h in self.loss_histories.items()},
            "outputs": dict(self.outputs),
        }
        out.update(self.report.to_dict())
        return out


def parse_seeds(text: str) -> list[int]:
    """``"0..9"`` (inclusive), ``"0,3,5"`` or ``"4"``."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            elif part:
                seeds.append(int(part))
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


def parse_sigmas(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse sigmas {text!r}") from None


def worker_count(requested: int) -> int:
    cap = os.environ.get("RAGC_THREADS")
    n = max(1, requested)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"RAGC_THREADS must be an integer, got {cap!r}") from None
    return n


def run_seed(g: Graph, cfg: RunConfig) -> SeedRun:
    result = train(g, cfg)
    scores = M.evaluate(result.labels, g.labels) if g.labels is not None else {m: float("nan") for m in M.METRICS}
    checksum = hashlib.sha256(result.x_aug.tobytes()).hexdigest()[:16]
    return SeedRun(cfg.seed, scores, result.loss_history, result.z, result.labels, checksum)


def run_seeds(g: Graph, cfg: RunConfig, seeds: list[int], workers: int = 1) -> ExperimentResult:
    if g.labels is None:
        raise DatasetError("metrics need labels.csv")
    start = time.perf_counter()
    cfgs = [cfg.replace(seed=s) for s in seeds]
    n = worker_count(workers)
    if n > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            runs = list(pool.map(run_seed, [g] * len(cfgs), cfgs))
    else:
        runs = [run_seed(g, c) for c in cfgs]
    seconds = time.perf_counter() - start
    report = M.aggregate([r.scores for r in runs], seeds)
    return ExperimentResult(cfg, report, seconds, {r.seed: r.loss_history for r in runs}, runs=runs)


def _write_matrix(path: Path, mat: np.ndarray) -> None:
    np.savetxt(path, mat, delimiter=",", fmt="%.17g")


def write_experiment(result: ExperimentResult, out: Path, dataset: str, command: str = "train") -> dict:
    out.mkdir(parents=True, exist_ok=True)
    seeds = result.report.seeds
    files = {
        "metrics_json": out / "metrics.json",
        "metrics_txt": out / "metrics.txt",
        "loss_history": out / "loss_history.csv",
        "embeddings": out / "embeddings.csv",
        "predictions": out / "predictions.csv",
        "config_snapshot": out / "config_snapshot.txt",
    }
    files["config_snapshot"].write_text(result.config.to_text(), encoding="utf-8")
    epochs = len(next(iter(result.loss_histories.values())))
    with open(files["loss_history"], "w", encoding="utf-8") as fh:
        fh.write("epoch," + ",".join(f"seed_{s}" for s in seeds) + "\n")
        for e in range(epochs):
            fh.write(f"{e}," + ",".join(repr(result.loss_histories[s][e]) for s in seeds) + "\n")
    # embeddings.csv holds the first seed; every seed also gets its own file
    _write_matrix(files["embeddings"], result.runs[0].z)
    for run in result.runs:
        _write_matrix(out / f"embeddings_seed{run.seed}.csv", run.z)
    with open(files["predictions"], "w", encoding="utf-8") as fh:
        fh.write(",".join(f"seed_{s}" for s in seeds) + "\n")
        for row in np.stack([r.labels for r in result.runs], axis=1):
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    result.outputs = {k: str(v) for k, v in files.items()}
    files["metrics_txt"].write_text(
        M.format_table([(result.config.variant, result.report)], label="variant"), encoding="utf-8"
    )
    payload = result.to_dict(command, dataset)
    files["metrics_json"].write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    return payload


def cmd_train(cfg: RunConfig, data: Path, out: Path, seeds: list[int], workers: int = 1) -> ExperimentResult:
    g = load_dataset(data)
    result = run_seeds(g, cfg, seeds, workers)
    write_experiment(result, out, str(data))
    return result


def ablation_ratios(results: dict[str, ExperimentResult]) -> dict[str, dict[str, float]]:
    """Best-over-seeds score of each variant divided by that of the full model."""
    full = results["full"].report
    ratios = {}
    for name, res in results.items():
        ratios[name] = {}
        for m in M.METRICS:
            base = full.best(m)
            ratios[name][m] = res.report.best(m) / base if base != 0 else float("nan")
    return ratios


def cmd_ablate(cfg: RunConfig, data: Path, out: Path, seeds: list[int], workers: int = 1) -> dict[str, ExperimentResult]:
    g = load_dataset(data)
    results: dict[str, ExperimentResult] = {}
    for variant in VARIANTS:
        res = run_seeds(g, cfg.replace(variant=variant), seeds, workers)
        write_experiment(res, out / variant, str(data), command="ablate")
        results[variant] = res
    ratios = ablation_ratios(results)
    rows = [(v, results[v].report) for v in VARIANTS]
    table = M.format_table(rows, label="variant")
    ratio_lines = ["", "ratio of best score to full model"]
    header = ["variant"] + [m.upper() for m in M.METRICS]
    ratio_lines.append("  ".join(f"{h:<15}" for h in header).rstrip())
    for v in VARIANTS:
        cells = [v] + [f"{ratios[v][m]:.4f}" for m in M.METRICS]
        ratio_lines.append("  ".join(f"{c:<15}" for c in cells).rstrip())
    (out / "ablation.txt").write_text(table + "\n".join(ratio_lines) + "\n", encoding="utf-8")
    payload = {
        "kind": "ablation",
        "dataset": str(data),
        "seeds": seeds,
        "variants": [
            {"variant": v, "summary": results[v].report.to_dict()["metrics"], "ratio_to_full": ratios[v],
             "x_aug_checksums": {str(r.seed): r.x_aug_checksum for r in results[v].runs}}
            for v in VARIANTS
        ],
    }
    (out / "ablation.json").write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    return results


def degradation(baseline: float, value: float) -> float:
    """Percentage change relative to the noiseless score; negative means worse."""
    if baseline == 0:
        return 0.0 if value == 0 else float("nan")
    return 100.0 * (value - baseline) / baseline


def noise_sweep_rows(reports: dict[float, M.MetricReport]) -> list[dict]:
    """One row per sigma with mean metrics and percentage change against sigma 0."""
    if 0.0 not in reports:
        raise ValueError("noise sweep needs a sigma = 0 baseline")
    base = reports[0.0]
    rows = []
    for sigma in sorted(reports):
        rep = reports[sigma]
        rows.append(
            {
                "sigma": sigma,
                "mean": {m: rep.mean(m) for m in M.METRICS},
                "std": {m: rep.std(m) for m in M.METRICS},
                "degradation_pct": {m: degradation(base.mean(m), rep.mean(m)) for m in M.METRICS},
            }
        )
    for row in rows:
        row["average_degradation_pct"] = float(np.mean(list(row["degradation_pct"].values())))
    return rows


def format_noise_table(rows: list[dict]) -> str:
    header = ["sigma"] + [m.upper() for m in M.METRICS] + ["avg"]
    body = []
    for row in rows:
        cells = [f"{row['sigma']:g}"]
        cells += [f"{100 * row['mean'][m]:.2f} ({row['degradation_pct'][m]:+.2f})" for m in M.METRICS]
        cells.append(f"{row['average_degradation_pct']:+.2f}")
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header] + body) + "\n"


def add_feature_noise(g: Graph, sigma: float, seed: int) -> Graph:
    if sigma == 0:
        return g
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    x = g.x + rng.normal(0.0, sigma, size=g.x.shape)
    return Graph(x, g.a, labels=g.labels, label_values=g.label_values)


def sweep_reports(
    g: Graph,
    cfg: RunConfig,
    seeds: list[int],
    sigmas: list[float],
    runner: Callable[[Graph, RunConfig], dict[str, float]] | None = None,
) -> dict[float, M.MetricReport]:
    """Metric reports per noise level, sigma 0 always included.

    ``runner`` maps (noisy graph, config) to a score dict; it defaults to a
    full training run.
    """
    runner = runner or (lambda graph, c: run_seed(graph, c).scores)
    reports = {}
    for sigma in sorted({0.0, *map(float, sigmas)}):
        if sigma < 0:
            raise ConfigError(f"noise level must be non-negative, got {sigma}")
        scores = [runner(add_feature_noise(g, sigma, s), cfg.replace(seed=s)) for s in seeds]
        reports[sigma] = M.aggregate(scores, seeds)
    return reports


def cmd_noise_sweep(cfg, data: Path, out: Path, seeds: list[int], sigmas=DEFAULT_SIGMAS, runner=None) -> list[dict]:
    g = load_dataset(data)
    if g.labels is None:
        raise DatasetError("noise sweep needs labels.csv")
    rows = noise_sweep_rows(sweep_reports(g, cfg, seeds, list(sigmas), runner))
    out.mkdir(parents=True, exist_ok=True)
    (out / "noise_sweep.txt").write_text(format_noise_table(rows), encoding="utf-8")
    (out / "config_snapshot.txt").write_text(cfg.to_text(), encoding="utf-8")
    payload = {"kind": "noise_sweep", "dataset": str(data), "seeds": seeds, "rows": rows}
    (out / "noise_sweep.json").write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    return rows


SBM_KEYS = {
    "blocks": int,
    "per_block": int,
    "p_in": float,
    "p_out": float,
    "feature_dim": int,
    "feature_shift": float,
    "seed": int,
}
SBM_DEFAULTS = dict(blocks=3, per_block=50, p_in=0.3, p_out=0.02, feature_dim=16, feature_shift=1.5, seed=0)


def parse_sbm_config(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, raw = (p.strip() for p in body.partition("="))
        if not sep or key not in SBM_KEYS:
            raise ConfigError(f"{source}: line {lineno}: expected one of {', '.join(SBM_KEYS)} as 'key = value'")
        try:
            values[key] = SBM_KEYS[key](raw)
        except ValueError:
            raise ConfigError(f"{source}: line {lineno}: bad value {raw!r} for {key}") from None
    return values


def cmd_gen_sbm(params: dict, out: Path) -> Graph:
    g = generate_sbm(**params)
    save_dataset(g, out)
    return g


def _common(p: argparse.ArgumentParser, data_required: bool = True) -> None:
    p.add_argument("--config", help="key=value config file or bundled name (e.g. bat)")
    p.add_argument("--data", required=data_required, type=Path, help="dataset directory")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--seeds", default="0", help="e.g. 0..9 or 0,1,2")


def _overrides(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config overrides")
    g.add_argument("--epochs", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--sigma-n", dest="sigma_n", type=float)
    g.add_argument("--mask-ratio", dest="mask_ratio", type=float)
    g.add_argument("--t-n", dest="t_n", type=int)
    g.add_argument("--t-m", dest="t_m", type=int)
    g.add_argument("--embed-dim", dest="embed_dim", type=int)
    g.add_argument("--tau-start", dest="tau_start", type=float)
    g.add_argument("--tau-end", dest="tau_end", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--variant", choices=VARIANTS)
    g.add_argument("--workers", type=int, default=1, help="parallel seed runs (capped by RAGC_THREADS)")


OVERRIDE_KEYS = ("epochs", "lr", "beta", "gamma", "sigma_n", "mask_ratio", "t_n", "t_m",
                 "embed_dim", "tau_start", "tau_end", "k", "variant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragc", description="Contrastive attributed-graph clustering.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train over seeds and report metrics")
    _common(p)
    _overrides(p)

    p = sub.add_parser("ablate", help="run the full model and its three ablations")
    _common(p)
    _overrides(p)

    p = sub.add_parser("noise-sweep", help="metrics under Gaussian feature noise")
    _common(p)
    _overrides(p)
    p.add_argument("--sigmas", default=",".join(str(s) for s in DEFAULT_SIGMAS))

    p = sub.add_parser("gen-sbm", help="write a synthetic stochastic-block-model dataset")
    _common(p, data_required=False)
    for key, kind in SBM_KEYS.items():
        if key != "seed":
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=kind)
    return parser


def _run(args) -> int:
    if args.command == "gen-sbm":
        params = dict(SBM_DEFAULTS)
        if args.config:
            path = Path(args.config)
            if not path.is_file():
                raise ConfigError(f"config file {args.config!r} not found")
            params.update(parse_sbm_config(path.read_text(encoding="utf-8"), str(path)))
        params.update({k: getattr(args, k) for k in SBM_KEYS if k != "seed" and getattr(args, k) is not None})
        params["seed"] = parse_seeds(args.seeds)[0]
        g = cmd_gen_sbm(params, args.out)
        print(f"wrote {g.n} nodes, {int(g.a.sum() // 2)} edges, {g.k} blocks to {args.out}")
        return 0

    cfg = load_config(args.config, {k: getattr(args, k) for k in OVERRIDE_KEYS})
    seeds = parse_seeds(args.seeds)
    if args.command == "train":
        result = cmd_train(cfg, args.data, args.out, seeds, args.workers)
        print(M.format_table([(cfg.variant, result.report)], label="variant"), end="")
    elif args.command == "ablate":
        cmd_ablate(cfg, args.data, args.out, seeds, args.workers)
        print((args.out / "ablation.txt").read_text(encoding="utf-8"), end="")
    elif args.command == "noise-sweep":
        rows = cmd_noise_sweep(cfg, args.data, args.out, seeds, parse_sigmas(args.sigmas))
        print(format_noise_table(rows), end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    # argparse itself exits with status 2 on bad arguments
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except (ConfigError, DatasetError) as exc:
        print(f"ragc: error: {exc}", file=sys.stderr)
        return 2
    except (RagcError, ArithmeticError, ValueError) as exc:
        print(f"ragc: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
