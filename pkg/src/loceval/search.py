"""Fixed-budget random hyperparameter search around an external trainer.

The harness samples trial hyperparameters, writes them to a flat text file,
invokes a user-supplied command once per trial, scores each converged
trial's validation scorepack with the configured metric, selects the best
trial, and only then evaluates that single trial on the held-out test
split. The trainer contract is process-level: command template with
``{trial_dir}`` and ``{hparams_file}`` placeholders, a ``NONCONVERGENT``
sentinel file to signal divergence, and one scorepack per split
(``scoremaps_val.wsep``, ``scoremaps_test.wsep``) in the trial directory.
"""
from __future__ import annotations

import json
import math
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ._parallel import map_consume
from .boxes import Box
from .dataset_io import (
    SplitManifest,
    read_boxes,
    read_manifest,
    read_masks,
)
from .engine import EvalConfig, evaluate_boxes, evaluate_masks, pack_stream_factory
from .errors import (
    AllTrialsNonConvergent,
    CyclicDependency,
    DegenerateAllTies,
    InvalidSpace,
    LengthMismatch,
    LocevalError,
    MissingScorepack,
    SearchError,
    TrainerSpawnFailure,
)
from .maskmetrics import TernaryMask
from .report import search_report

SENTINEL_NAME = "NONCONVERGENT"
VAL_PACK_NAME = "scoremaps_val.wsep"
TEST_PACK_NAME = "scoremaps_test.wsep"
HPARAMS_NAME = "hparams.txt"

DIMENSION_KINDS = (
    "log_uniform",
    "uniform",
    "uniform_conditional",
    "categorical",
    "reciprocal_shift",
)


@dataclass
class Dimension:
    """One sampled hyperparameter.

    kinds:
      log_uniform(lo, hi)          exp of a uniform draw on [ln lo, ln hi]
      uniform(lo, hi)              uniform on [lo, hi]
      uniform_conditional(parent, hi)  uniform on [value(parent), hi]
      categorical(values)          uniform over a finite set
      reciprocal_shift             1/u - 1/2 with u uniform on (0, 2]
    """

    name: str
    kind: str
    lo: Optional[float] = None
    hi: Optional[float] = None
    parent: Optional[str] = None
    values: Optional[list] = None


class HyperparameterSpace:
    def __init__(self, dimensions: Sequence[Dimension]):
        names = [d.name for d in dimensions]
        if len(set(names)) != len(names):
            raise InvalidSpace("dimension names must be unique")
        for d in dimensions:
            if d.kind not in DIMENSION_KINDS:
                raise InvalidSpace(f"{d.name}: unknown kind {d.kind!r}")
            if d.kind in ("log_uniform", "uniform"):
                if d.lo is None or d.hi is None or not d.lo < d.hi:
                    raise InvalidSpace(f"{d.name}: requires lo < hi")
                if d.kind == "log_uniform" and d.lo <= 0:
                    raise InvalidSpace(f"{d.name}: log_uniform requires lo > 0")
            elif d.kind == "uniform_conditional":
                if d.parent is None:
                    raise InvalidSpace(f"{d.name}: conditional requires a parent")
                if d.parent not in names:
                    raise InvalidSpace(f"{d.name}: unknown parent {d.parent!r}")
                if d.hi is None:
                    raise InvalidSpace(f"{d.name}: conditional requires hi")
            elif d.kind == "categorical":
                if not d.values:
                    raise InvalidSpace(f"{d.name}: categorical requires values")
        self.dimensions = list(dimensions)
        self._order = self._topological_order()

    def _topological_order(self) -> List[Dimension]:
        """Stable topological sort so parents are drawn before conditionals;
        ties keep definition order, making the RNG stream reproducible."""
        by_name = {d.name: d for d in self.dimensions}
        placed: Dict[str, int] = {}
        ordered: List[Dimension] = []
        remaining = list(self.dimensions)
        while remaining:
            progressed = False
            still: List[Dimension] = []
            for d in remaining:
                if d.kind != "uniform_conditional" or d.parent in placed:
                    placed[d.name] = len(ordered)
                    ordered.append(d)
                    progressed = True
                else:
                    still.append(d)
            if not progressed:
                cycle = ", ".join(d.name for d in still)
                raise CyclicDependency(f"conditional dimensions form a cycle: {cycle}")
            remaining = still
        del by_name
        return ordered

    @classmethod
    def from_dict(cls, data: dict) -> "HyperparameterSpace":
        dims = []
        for item in data.get("dimensions", []):
            if "name" not in item or "kind" not in item:
                raise InvalidSpace(f"dimension entry missing name/kind: {item!r}")
            dims.append(
                Dimension(
                    name=item["name"],
                    kind=item["kind"],
                    lo=item.get("lo"),
                    hi=item.get("hi"),
                    parent=item.get("parent"),
                    values=item.get("values"),
                )
            )
        if not dims:
            raise InvalidSpace("search space has no dimensions")
        return cls(dims)

    @classmethod
    def from_json(cls, path) -> "HyperparameterSpace":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def sample(
    space: HyperparameterSpace,
    rng_seed: Union[int, Sequence[int], np.random.Generator],
) -> Dict[str, object]:
    """Draw one value per dimension; deterministic given the seed."""
    if isinstance(rng_seed, np.random.Generator):
        rng = rng_seed
    else:
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    out: Dict[str, object] = {}
    for d in space._order:
        if d.kind == "log_uniform":
            out[d.name] = float(np.exp(rng.uniform(math.log(d.lo), math.log(d.hi))))
        elif d.kind == "uniform":
            out[d.name] = float(rng.uniform(d.lo, d.hi))
        elif d.kind == "uniform_conditional":
            out[d.name] = float(rng.uniform(out[d.parent], d.hi))
        elif d.kind == "categorical":
            out[d.name] = d.values[int(rng.integers(len(d.values)))]
        else:  # reciprocal_shift: u uniform on (0, 2], value = 1/u - 1/2
            u = 2.0 * (1.0 - rng.random())
            out[d.name] = 1.0 / u - 0.5
    return {d.name: out[d.name] for d in space.dimensions}


def format_hparams(values: Dict[str, object]) -> str:
    """Flat ``name=value`` lines; floats carry 17 significant digits so
    float64 values round-trip exactly."""
    lines = []
    for name, value in values.items():
        if isinstance(value, float):
            lines.append(f"{name}={value:.17g}")
        else:
            lines.append(f"{name}={value}")
    return "\n".join(lines) + "\n"


def proxy_manifest(
    manifest: SplitManifest, fraction: float = 0.10, seed: int = 0
) -> SplitManifest:
    """Stratified subsample: ceil(fraction * n) images per category,
    without replacement, deterministic given the seed."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    by_cat: Dict[str, List[int]] = {}
    for idx, e in enumerate(manifest.entries):
        by_cat.setdefault(e.category_id, []).append(idx)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    keep: set = set()
    for cat in sorted(by_cat):
        indices = by_cat[cat]
        k = math.ceil(fraction * len(indices))
        chosen = rng.choice(len(indices), size=k, replace=False)
        keep.update(indices[int(i)] for i in chosen)
    entries = [e for idx, e in enumerate(manifest.entries) if idx in keep]
    return SplitManifest(entries, manifest.split_name)


def kendall_tau(scores_a: Sequence[float], scores_b: Sequence[float]) -> float:
    """Tie-corrected rank correlation (tau-b) between two score sequences.

    Computed from exact integer pair counts so perfectly aligned or
    reversed rankings give exactly +1.0 / -1.0. Quadratic in the number of
    scores, which is small here (trial counts, report sets).
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"score sequences differ in shape: {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise LengthMismatch(f"need at least 2 scores, got {len(a)}")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateAllTies("rank correlation undefined when one input is all ties")
    iu = np.triu_indices(len(a), k=1)
    sign_a = np.sign((a[:, None] - a[None, :])[iu])
    sign_b = np.sign((b[:, None] - b[None, :])[iu])
    product = sign_a * sign_b
    concordant = int(np.count_nonzero(product > 0))
    discordant = int(np.count_nonzero(product < 0))
    tied_only_a = int(np.count_nonzero((sign_a == 0) & (sign_b != 0)))
    tied_only_b = int(np.count_nonzero((sign_b == 0) & (sign_a != 0)))
    # (pairs untied in b) * (pairs untied in a); both nonzero because the
    # all-ties cases were rejected above
    denom = math.sqrt(
        (concordant + discordant + tied_only_a)
        * (concordant + discordant + tied_only_b)
    )
    return (concordant - discordant) / denom


@dataclass
class SearchSettings:
    """Search-level configuration beyond the metric itself."""

    task: str
    val_manifest_path: Path
    val_gt_path: Path
    test_manifest_path: Path
    test_gt_path: Path
    eval_config: EvalConfig
    n_trials: int = 30
    seed: int = 0
    jobs: int = 1


def _trial_seed(root_seed: int, trial_id: int) -> Tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence([root_seed, trial_id])
    recorded = int(ss.generate_state(1, dtype=np.uint64)[0] & 0x7FFFFFFFFFFFFFFF)
    return np.random.default_rng(ss), recorded


def _substitute(template: str, trial_dir: Path, hparams_file: Path) -> List[str]:
    if "{trial_dir}" not in template or "{hparams_file}" not in template:
        raise SearchError(
            "trainer template must contain both {trial_dir} and {hparams_file}"
        )
    argv = []
    for token in shlex.split(template):
        token = token.replace("{trial_dir}", str(trial_dir))
        token = token.replace("{hparams_file}", str(hparams_file))
        argv.append(token)
    return argv


def _evaluate_pack(
    pack_path: Path,
    manifest: SplitManifest,
    gt: Union[Dict[str, List[Box]], Dict[str, TernaryMask]],
    cfg: EvalConfig,
) -> float:
    maps = pack_stream_factory(pack_path)
    if cfg.task == "boxes":
        return evaluate_boxes(maps, gt, manifest, cfg).score
    return evaluate_masks(maps, gt, manifest, cfg).mean_ap


def run_search(
    space: HyperparameterSpace,
    trainer: str,
    settings: SearchSettings,
    workdir,
) -> dict:
    """Run the full search protocol and return the report dict.

    Per trial: write ``hparams.txt``, invoke the trainer command, then
    classify the outcome. A nonzero exit or a ``NONCONVERGENT`` sentinel
    marks the trial non-convergent; a scoring error marks it failed; both
    are excluded from selection. The test split is evaluated exactly once,
    for the selected trial.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    val_manifest = read_manifest(settings.val_manifest_path, "train-fullsup")
    test_manifest = read_manifest(settings.test_manifest_path, "test-fullsup")
    val_cfg = settings.eval_config
    test_annotation_loads = 0

    def load_gt(manifest: SplitManifest, gt_path: Path):
        if settings.task == "boxes":
            return read_boxes(gt_path, manifest)
        return read_masks(gt_path, manifest)

    val_gt = load_gt(val_manifest, settings.val_gt_path)

    # Sample every trial up front from per-trial RNG streams so values are
    # independent of execution order and job count.
    drawn = []
    for trial_id in range(settings.n_trials):
        rng, recorded_seed = _trial_seed(settings.seed, trial_id)
        drawn.append((recorded_seed, sample(space, rng)))

    def run_trial(trial_id: int) -> dict:
        recorded_seed, values = drawn[trial_id]
        trial_dir = workdir / f"trial_{trial_id:05d}"
        trial_dir.mkdir(parents=True, exist_ok=True)
        hparams_file = trial_dir / HPARAMS_NAME
        hparams_file.write_text(format_hparams(values), encoding="utf-8")
        argv = _substitute(trainer, trial_dir, hparams_file)
        try:
            proc = subprocess.run(argv, capture_output=True)
        except OSError as exc:
            raise TrainerSpawnFailure(f"cannot run {argv[0]!r}: {exc}") from exc

        trial = {
            "trial_id": trial_id,
            "seed": recorded_seed,
            "values": values,
            "outcome": "converged",
            "val_score": None,
            "test_score": None,
        }
        if proc.returncode != 0 or (trial_dir / SENTINEL_NAME).exists():
            trial["outcome"] = "non-convergent"
            return trial

        pack = trial_dir / VAL_PACK_NAME
        if not pack.exists():
            raise MissingScorepack(
                f"trial {trial_id}: trainer exited 0 without {VAL_PACK_NAME}"
            )
        try:
            trial["val_score"] = _evaluate_pack(pack, val_manifest, val_gt, val_cfg)
        except LocevalError as exc:
            trial["outcome"] = "failed"
            trial["message"] = str(exc)
        return trial

    trials: List[Optional[dict]] = [None] * settings.n_trials

    def consume(trial: dict) -> None:
        trials[trial["trial_id"]] = trial

    map_consume(range(settings.n_trials), run_trial, consume, settings.jobs)

    best_id: Optional[int] = None
    best_score = -1.0
    for trial in trials:
        if trial["outcome"] == "converged" and trial["val_score"] is not None:
            if trial["val_score"] > best_score:  # strict: ties keep lower id
                best_score = trial["val_score"]
                best_id = trial["trial_id"]
    if best_id is None:
        n_converged = sum(1 for t in trials if t["outcome"] == "converged")
        ratio = (settings.n_trials - n_converged) / settings.n_trials
        raise AllTrialsNonConvergent(
            f"none of the {settings.n_trials} trials produced a scorable "
            f"model (non-convergence ratio {ratio:.2f})"
        )

    test_gt = load_gt(test_manifest, settings.test_gt_path)
    test_annotation_loads += 1
    test_pack = workdir / f"trial_{best_id:05d}" / TEST_PACK_NAME
    if not test_pack.exists():
        raise MissingScorepack(
            f"selected trial {best_id}: missing {TEST_PACK_NAME}"
        )
    test_score = _evaluate_pack(test_pack, test_manifest, test_gt, settings.eval_config)
    trials[best_id]["test_score"] = test_score

    n_converged = sum(1 for t in trials if t["outcome"] == "converged")
    n_noncvg = sum(1 for t in trials if t["outcome"] == "non-convergent")
    n_failed = sum(1 for t in trials if t["outcome"] == "failed")
    counts = {
        "n_converged": n_converged,
        "n_non_convergent": n_noncvg,
        "n_failed": n_failed,
        "non_convergence_ratio": (settings.n_trials - n_converged) / settings.n_trials,
        "test_annotation_loads": test_annotation_loads,
    }
    config = {
        "n_trials": settings.n_trials,
        "seed": settings.seed,
        "metric_task": settings.task,
        "metric": settings.eval_config.config_echo(),
        "trainer_template": trainer,
    }
    return search_report(
        config=config,
        trials=trials,
        selected_trial_id=best_id,
        test_score=test_score,
        counts=counts,
    )
