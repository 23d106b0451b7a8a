"""End-to-end orchestration: source -> sort/sample -> slice -> optimize ->
execute -> analyze, with deterministic seeding and file-based resume.

Stages communicate only through files in the output directory:

    sorted.txt            sorted corpus (file sources only)
    config.json           the resolved run configuration
    manifest.jsonl        one line per slice: id, size, order mode, seed
    slices/slice_<i>.txt  the slice's traces (lexicographic)
    campaigns/campaign_<i>.txt
    results/result_<i>.json
    results/progress_<i>.json   (atomically replaced while executing)
    report.csv, progress.csv

A master seed derives per-slice seeds by stable hashing, so changing the
slice count never perturbs another slice's verification order.  Slice
tasks that already have a result file are skipped, which makes reruns
both resumable and byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

from .engine import (
    CostModel,
    estimate_seconds_from_counts,
    execute,
    read_cost_file,
    reference_model,
)
from .generator import GeneratorTable, read_constraint_file, sample_indices
from .metrics import (
    completion_time,
    memory_efficiency,
    omission_probability,
    speedup,
    write_progress_csv,
    write_report_csv,
)
from .optimizer import optimize_slice, write_campaign_file
from .slicing import external_sort, order_slice, slice_ranges
from .traces import (
    Alphabet,
    InputTrace,
    TraceCorpus,
    read_trace_file,
    write_trace_file,
)
from .tree import build_tree

DEFAULT_COSTS = CostModel(load=0.0, store=0.0, free=0.0, out=0.0, run_per_q=1.0)
DEFAULT_F_GRID = (1.0,)

SIGMA_CHOICES_DOC = "a positive integer, 'capacity', or 'unlimited'"


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; the message names the stage and slice."""


@dataclass(slots=True)
class RunConfig:
    source: str
    out_dir: str
    slices: int = 1
    sigma: str = "capacity"
    order_mode: str = "random"
    seed: int = 0
    fraction: float = 1.0
    quantum: float = 1.0
    workers: int = 1
    dedupe: bool = False
    sort_budget: int = 10**6
    model_seed: int | None = None

    def __post_init__(self) -> None:
        if self.slices < 1:
            raise ValueError("slice count must be >= 1")
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        parse_sigma(self.sigma)


def parse_sigma(text: str) -> int | None:
    """Validate a sigma spec; 'capacity' resolves per slice, 'unlimited' is None."""
    if text in ("capacity", "unlimited"):
        return None
    try:
        k = int(text)
    except ValueError:
        raise ValueError(f"sigma must be {SIGMA_CHOICES_DOC}") from None
    if k < 1:
        raise ValueError(f"sigma must be {SIGMA_CHOICES_DOC}")
    return k


def slice_seed(master: int, slice_id: int) -> int:
    digest = hashlib.sha256(f"simcamp:{master}:{slice_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def write_json_atomic(obj: object, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _is_constraint_file(path: str) -> bool:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    return first.startswith("alphabet=")


def _materialize_source(config: RunConfig) -> tuple[Alphabet, float, list[InputTrace]]:
    """Produce the sorted, sampled corpus the slices are cut from."""
    if _is_constraint_file(config.source):
        spec = read_constraint_file(config.source)
        table = GeneratorTable(spec)
        total = table.count()
        if total == 0:
            raise PipelineStageError("source stage: constraint spec accepts no traces")
        indices = sample_indices(total, config.fraction, config.seed)
        if not indices:
            raise PipelineStageError("source stage: sampled zero traces")
        return spec.alphabet, config.quantum, [table.get(j) for j in indices]

    sorted_path = os.path.join(config.out_dir, "sorted.txt")
    if not os.path.exists(sorted_path):
        external_sort(
            config.source, sorted_path, config.sort_budget, dedupe=config.dedupe
        )
    corpus = read_trace_file(sorted_path)
    if not corpus.traces:
        raise PipelineStageError("source stage: empty corpus")
    traces = corpus.traces
    if config.fraction < 1.0:
        keep = sample_indices(len(traces), config.fraction, config.seed)
        traces = [traces[j] for j in keep]
    return corpus.alphabet, corpus.quantum, traces


@dataclass(slots=True)
class _SliceTask:
    slice_id: int
    slice_path: str
    campaign_path: str
    result_path: str
    progress_path: str
    sigma: str
    order_mode: str
    order_seed: int
    model_seed: int


def _campaign_summary(campaign) -> dict:
    return {
        "length_q": campaign.length_quanta,
        "peak_stored": campaign.peak_stored,
        "counts": campaign.command_counts(),
    }


def _run_slice_task(task: _SliceTask) -> dict:
    corpus = read_trace_file(task.slice_path)
    ordered = order_slice(corpus.traces, task.order_mode, task.order_seed)
    by_symbols = sorted(corpus.traces, key=lambda t: t.symbols)

    stats_tree = build_tree(by_symbols)
    capacity = stats_tree.capacity
    shared = stats_tree.shared_prefix_count
    resolved = capacity if task.sigma == "capacity" else parse_sigma(task.sigma)

    def campaign_at(cap):
        return optimize_slice(
            ordered, build_tree(by_symbols), cap, corpus.quantum, task.slice_id
        )

    requested = campaign_at(resolved)
    baseline = campaign_at(1)
    unlimited = campaign_at(None)
    write_campaign_file(requested, task.campaign_path)

    n = len(ordered)
    write_json_atomic({"slice": task.slice_id, "j": 0, "n": n}, task.progress_path)

    def on_out(done: int) -> None:
        if done % 100 == 0:
            write_json_atomic(
                {"slice": task.slice_id, "j": done, "n": n}, task.progress_path
            )

    model = reference_model(corpus.alphabet, task.model_seed)
    result = execute(requested, model, progress=on_out)
    write_json_atomic(
        {"slice": task.slice_id, "j": len(result.observations), "n": n},
        task.progress_path,
    )

    payload = {
        "slice": task.slice_id,
        "n": n,
        "order": task.order_mode,
        "order_seed": task.order_seed,
        "capacity": capacity,
        "shared_prefixes": shared,
        "sigma_requested": task.sigma,
        "sigma_resolved": resolved,
        "requested": _campaign_summary(requested),
        "baseline": _campaign_summary(baseline),
        "unlimited": _campaign_summary(unlimited),
        "execution": {
            "executable": result.executable,
            "outs": len(result.observations),
            "length_q": result.length_quanta,
            "peak_memory": result.peak_memory,
            "error": result.error,
            "first_tokens": [obs.token for obs in result.observations[:4]],
        },
    }
    write_json_atomic(payload, task.result_path)
    return payload


def prepare_slices(config: RunConfig) -> list[_SliceTask]:
    """Source + slice stages: produce slice files, the manifest, config.json.

    Returns the per-slice task descriptions for the later stages.
    """
    out = config.out_dir
    for sub in ("slices", "campaigns", "results"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)

    try:
        alphabet, quantum, traces = _materialize_source(config)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(f"source stage failed: {exc}") from exc

    if config.slices > len(traces):
        raise PipelineStageError(
            f"slice stage: {config.slices} slices for {len(traces)} traces"
        )
    ranges = slice_ranges(len(traces), config.slices)

    manifest_path = os.path.join(out, "manifest.jsonl")
    tasks: list[_SliceTask] = []
    with open(manifest_path, "w", encoding="utf-8") as manifest:
        for i, (start, stop) in enumerate(ranges):
            slice_path = os.path.join(out, "slices", f"slice_{i}.txt")
            if not os.path.exists(slice_path):
                write_trace_file(
                    TraceCorpus(alphabet, quantum, traces[start:stop]), slice_path
                )
            seed_i = slice_seed(config.seed, i)
            manifest.write(
                json.dumps(
                    {
                        "slice": i,
                        "size": stop - start,
                        "order": config.order_mode,
                        "seed": seed_i,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            tasks.append(
                _SliceTask(
                    slice_id=i,
                    slice_path=slice_path,
                    campaign_path=os.path.join(out, "campaigns", f"campaign_{i}.txt"),
                    result_path=os.path.join(out, "results", f"result_{i}.json"),
                    progress_path=os.path.join(out, "results", f"progress_{i}.json"),
                    sigma=config.sigma,
                    order_mode=config.order_mode,
                    order_seed=seed_i,
                    model_seed=(
                        config.model_seed if config.model_seed is not None else config.seed
                    ),
                )
            )

    write_json_atomic(
        {
            "n_total": len(traces),
            "alphabet": list(alphabet.tokens),
            "quantum": quantum,
            **asdict(config),
        },
        os.path.join(out, "config.json"),
    )
    return tasks


def run_pipeline(
    config: RunConfig,
    cost: CostModel = DEFAULT_COSTS,
    f_grid: Sequence[float] = DEFAULT_F_GRID,
) -> dict:
    """Run every stage; returns a summary dict (also persisted on disk)."""
    out = config.out_dir
    tasks = prepare_slices(config)
    todo = [t for t in tasks if not os.path.exists(t.result_path)]
    if todo:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = {pool.submit(_run_slice_task, t): t for t in todo}
                for future, task in futures.items():
                    try:
                        future.result()
                    except Exception as exc:
                        raise PipelineStageError(
                            f"slice stage failed for slice {task.slice_id}: {exc}"
                        ) from exc
        else:
            for task in todo:
                try:
                    _run_slice_task(task)
                except Exception as exc:
                    raise PipelineStageError(
                        f"slice stage failed for slice {task.slice_id}: {exc}"
                    ) from exc

    report_rows, progress_rows = analyze_runs([out], cost, f_grid)
    write_report_csv(report_rows, os.path.join(out, "report.csv"))
    write_progress_csv(progress_rows, os.path.join(out, "progress.csv"))
    with open(os.path.join(out, "config.json"), "r", encoding="utf-8") as fh:
        n_total = json.load(fh)["n_total"]
    return {
        "out_dir": out,
        "slices": config.slices,
        "traces": n_total,
        "report_rows": len(report_rows),
    }


def _load_run(run_dir: str) -> tuple[dict, list[dict]]:
    config_path = os.path.join(run_dir, "config.json")
    with open(config_path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    results = []
    for i in range(config["slices"]):
        path = os.path.join(run_dir, "results", f"result_{i}.json")
        if not os.path.exists(path):
            raise PipelineStageError(f"analyze stage: missing result for slice {i}")
        with open(path, "r", encoding="utf-8") as fh:
            results.append(json.load(fh))
    return config, results


def _rows_for_run(
    run_dir: str, cost: CostModel, f_grid: Sequence[float]
) -> list[dict]:
    config, results = _load_run(run_dir)
    n_total = config["n_total"]
    slices = config["slices"]
    seed = config["seed"]

    def times(kind: str, f: float) -> float:
        inflated = cost.with_inflation(f)
        return completion_time(
            estimate_seconds_from_counts(
                r[kind]["counts"], r[kind]["length_q"], inflated
            )
            for r in results
        )

    length_of = {
        kind: max(r[kind]["length_q"] for r in results)
        for kind in ("requested", "baseline", "unlimited")
    }
    peak_of = {
        kind: max(r[kind]["peak_stored"] for r in results)
        for kind in ("requested", "baseline", "unlimited")
    }
    sigma_label = {
        "requested": str(config["sigma"]),
        "baseline": "1",
        "unlimited": "unlimited",
    }

    rows = []
    for f in f_grid:
        base_time = times("baseline", f)
        full_time = times("unlimited", f)
        for kind in ("requested", "baseline", "unlimited"):
            t = times(kind, f)
            rows.append(
                {
                    "N": n_total,
                    "D": slices,
                    "sigma": sigma_label[kind],
                    "seed": seed,
                    "f": f,
                    "length_q": length_of[kind],
                    "peak_mem": peak_of[kind],
                    "est_seconds": t,
                    "speedup": speedup(base_time, t),
                    "par_eff": 1.0,
                    "mem_eff": memory_efficiency(full_time, t),
                }
            )
    return rows


def read_progress(run_dir: str) -> list[tuple[int, int, int]]:
    """Per-slice (slice, verified, size) from the progress files."""
    entries = []
    results_dir = os.path.join(run_dir, "results")
    if not os.path.isdir(results_dir):
        raise PipelineStageError(f"no results directory under {run_dir}")
    names = sorted(
        n for n in os.listdir(results_dir)
        if n.startswith("progress_") and n.endswith(".json")
    )
    if not names:
        raise PipelineStageError(f"no progress files under {results_dir}")
    for name in names:
        with open(os.path.join(results_dir, name), "r", encoding="utf-8") as fh:
            data = json.load(fh)
        entries.append((data["slice"], data["j"], data["n"]))
    return sorted(entries)


def _progress_rows(run_dir: str) -> list[dict]:
    rows = []
    for slice_id, done, size in read_progress(run_dir):
        rows.append(
            {
                "slice": slice_id,
                "j": done,
                "n": size,
                "op_bound": omission_probability([(done, size)]),
            }
        )
    return rows


def analyze_runs(
    run_dirs: Sequence[str],
    cost: CostModel = DEFAULT_COSTS,
    f_grid: Sequence[float] = DEFAULT_F_GRID,
) -> tuple[list[dict], list[dict]]:
    """Report and progress rows for one or more pipeline output directories.

    With several directories (e.g. the same study at different master
    seeds), per-seed rows are followed by seed="mean" aggregates grouped
    by (N, D, sigma, f).
    """
    report_rows: list[dict] = []
    for run_dir in run_dirs:
        report_rows.extend(_rows_for_run(run_dir, cost, f_grid))
    if len(run_dirs) > 1:
        groups: dict[tuple, list[dict]] = {}
        for row in report_rows:
            groups.setdefault(
                (row["N"], row["D"], row["sigma"], row["f"]), []
            ).append(row)
        for (n, d, sigma, f), rows in groups.items():
            def mean(key: str, rows: list[dict] = rows) -> float:
                return sum(r[key] for r in rows) / len(rows)

            report_rows.append(
                {
                    "N": n,
                    "D": d,
                    "sigma": sigma,
                    "seed": "mean",
                    "f": f,
                    "length_q": mean("length_q"),
                    "peak_mem": mean("peak_mem"),
                    "est_seconds": mean("est_seconds"),
                    "speedup": mean("speedup"),
                    "par_eff": mean("par_eff"),
                    "mem_eff": mean("mem_eff"),
                }
            )
    progress_rows: list[dict] = []
    for run_dir in run_dirs:
        progress_rows.extend(_progress_rows(run_dir))
    return report_rows, progress_rows


def overall_omission_bound(run_dir: str) -> float:
    """The any-time omission bound from the run's current progress files."""
    return omission_probability(
        [(done, size) for _slice, done, size in read_progress(run_dir)]
    )


def read_cost_or_default(path: str | None) -> CostModel:
    if path is None:
        return DEFAULT_COSTS
    return read_cost_file(path)
