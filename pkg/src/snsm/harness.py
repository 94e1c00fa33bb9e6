"""Experiment runner: optimizer x objective x noise, with CSV/JSON output."""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .analysis import momentum_bound
from .noise_models import MLP2, NoiseModel, Quadratic, stoch_grad
from .optim import (
    NonFiniteGradientError,
    Optimizer,
    lr_at,
    make_preset,
)


# ---------------------------------------------------------------------------
# configuration and records

@dataclass(frozen=True)
class ExperimentConfig:
    objective: object  # Quadratic / Logistic / MLP2 instance
    noise: NoiseModel
    preset: str
    T: int
    seeds: tuple
    lr: float = 1e-3
    delta1: float | None = None  # Quadratic only: scale x1 so f(x1) = delta1
    param_shape: tuple | None = None  # view of the flat parameter; default (d,)
    record_every: int = 1
    rank: int = 4
    refresh_gap: int = 200
    frame_kind: str = "svd"
    subset_rule: str = "heuristic2d"
    subset_size: int | None = None
    clip_norm: float | None = None
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        shape = self.param_shape
        if shape is not None and int(np.prod(shape)) != self.objective.d:
            raise ValueError("param_shape must have objective.d elements")


RECORD_FIELDS = ("step", "seed", "loss", "grad_norm_sq", "lr", "state_elems")


@dataclass(frozen=True)
class RunRecord:
    step: int
    seed: int
    loss: float
    grad_norm_sq: float
    lr: float
    state_elems: int


@dataclass(frozen=True)
class SeedSummary:
    seed: int
    mean_grad_norm_sq: float  # (1/T) sum_t ||grad f(x_t)||^2, full resolution
    final_loss: float
    diverged: bool


@dataclass(frozen=True)
class RunResult:
    records: list
    summaries: list  # one SeedSummary per seed

    @property
    def any_diverged(self) -> bool:
        return any(s.diverged for s in self.summaries)


def _make_optimizer(config: ExperimentConfig, shape: tuple) -> Optimizer:
    spec = make_preset(
        config.preset, lr=config.lr, rank=config.rank,
        refresh_gap=config.refresh_gap, frame_kind=config.frame_kind,
        subset_rule=config.subset_rule, subset_size=config.subset_size,
        clip_norm=config.clip_norm, weight_decay=config.weight_decay,
    )
    return Optimizer(spec, [shape], tags=["linear"], total_steps=config.T)


def _init_x1(config: ExperimentConfig, seed: int) -> np.ndarray:
    obj = config.objective
    if isinstance(obj, Quadratic):
        delta1 = 1.0 if config.delta1 is None else config.delta1
        lam_sum = float(obj.lam.sum())
        if lam_sum <= 0:
            raise ValueError("quadratic needs a positive curvature sum")
        # f(s * ones) = 0.5 s^2 sum(lam) = delta1
        return np.full(obj.d, math.sqrt(2.0 * delta1 / lam_sum))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    scale = 1.0 / math.sqrt(obj.d_in if isinstance(obj, MLP2) else obj.d)
    return rng.uniform(-scale, scale, obj.d)


def run(config: ExperimentConfig) -> RunResult:
    """Run every seed of the config; one strictly sequential loop per seed."""
    obj = config.objective
    shape = config.param_shape or (obj.d,)
    records: list[RunRecord] = []
    summaries: list[SeedSummary] = []
    for seed in config.seeds:
        opt = _make_optimizer(config, shape)
        x = _init_x1(config, seed)
        grad_sq_sum = 0.0
        steps_done = 0
        final_loss = math.nan
        diverged = False
        for t in range(1, config.T + 1):
            # overflow here is how divergence manifests; detected just below
            with np.errstate(over="ignore", invalid="ignore"):
                loss = obj.value(x)
                g_true = obj.grad(x)
                gsq = float(g_true @ g_true)
            if not (math.isfinite(loss) and math.isfinite(gsq)):
                diverged = True
                break
            lr = lr_at(opt.spec.schedule, opt.spec.base_lr, t, config.T)
            if t % config.record_every == 0 or t == config.T:
                records.append(RunRecord(
                    step=t, seed=seed, loss=loss, grad_norm_sq=gsq, lr=lr,
                    state_elems=opt.state_size().total))
            grad_sq_sum += gsq
            steps_done += 1
            final_loss = loss
            g = stoch_grad(obj, config.noise, x, seed, t)
            try:
                x = opt.step([x.reshape(shape)], [g.reshape(shape)], t)[0].reshape(-1)
            except NonFiniteGradientError:
                diverged = True
                break
        mean_gsq = grad_sq_sum / steps_done if steps_done else math.nan
        summaries.append(SeedSummary(seed=seed, mean_grad_norm_sq=mean_gsq,
                                     final_loss=final_loss, diverged=diverged))
    return RunResult(records=records, summaries=summaries)


# ---------------------------------------------------------------------------
# beta sweep

@dataclass(frozen=True)
class SweepRow:
    beta: float
    optimizer: str
    subset_size: int  # 1 = coordinate-wise, d = single global subset
    mean_metric: float  # mean over seeds of (1/T) sum ||grad||^2
    stderr: float


def sweep_beta(betas, d: int, T: int, seeds, subset_sizes=(),
               include=("AdaGradNorm", "AdaGrad", "AdaGradSN"),
               alpha: float = 1.0, lr: float = 0.1, delta1: float = 1.0
               ) -> list:
    """Compare step-size families under d^beta-dense coordinate noise."""
    for k in subset_sizes:
        if d % k != 0:
            raise ValueError(f"subset size {k} does not divide d={d}")
    obj = Quadratic(np.ones(d))
    rows: list[SweepRow] = []
    for beta in betas:
        noise = NoiseModel(density_beta=float(beta), density_alpha=alpha)
        jobs: list[tuple[str, int, dict]] = []
        if "AdaGradNorm" in include:
            jobs.append(("AdaGradNorm", d, {}))
        if "AdaGrad" in include:
            jobs.append(("AdaGrad", 1, {}))
        if "AdaGradSN" in include:
            for k in subset_sizes:
                jobs.append(("AdaGradSN", k,
                             dict(subset_rule="equip", subset_size=k)))
        for name, k, extra in jobs:
            config = ExperimentConfig(
                objective=obj, noise=noise, preset=name, T=T,
                seeds=tuple(seeds), lr=lr, delta1=delta1, record_every=T,
                **extra)
            result = run(config)
            metrics = np.array([s.mean_grad_norm_sq for s in result.summaries])
            rows.append(SweepRow(
                beta=float(beta), optimizer=name, subset_size=k,
                mean_metric=float(metrics.mean()),
                stderr=float(metrics.std(ddof=1) / math.sqrt(metrics.size))))
    return rows


def sweep_verdict(row_a: SweepRow, row_b: SweepRow) -> str:
    """'a_better' / 'b_better' when the +-1 stderr intervals do not overlap."""
    if row_a.mean_metric + row_a.stderr < row_b.mean_metric - row_b.stderr:
        return "a_better"
    if row_b.mean_metric + row_b.stderr < row_a.mean_metric - row_a.stderr:
        return "b_better"
    return "inconclusive"


# ---------------------------------------------------------------------------
# high-probability bound verification

@dataclass(frozen=True)
class BoundCheck:
    bound: float
    eta_star: float
    metrics: tuple  # per-seed (1/T) sum ||grad||^2
    violations: int
    fraction: float
    threshold: float
    passed: bool


def verify_thm2(d: int, sigma: float, delta1: float, T: int, fail_prob: float,
                n_seeds: int, rank: int, frame_kind: str = "gaussian_ortho",
                param_shape: tuple | None = None, beta1: float = 0.9,
                seed_base: int = 0) -> BoundCheck:
    """Monte-Carlo check of the momentum convergence bound on a quadratic.

    The quadratic has identity curvature (L = 1). Per-coordinate noise is
    sigma/sqrt(d) Gaussian so the noise vector norm is sigma-sub-gaussian.
    """
    L = 1.0
    mb = momentum_bound(delta1, L, sigma, T, beta1, fail_prob)
    obj = Quadratic(np.ones(d))
    noise = NoiseModel(sigma=sigma / math.sqrt(d))
    config = ExperimentConfig(
        objective=obj, noise=noise, preset="SGD-SM", T=T,
        seeds=tuple(range(seed_base, seed_base + n_seeds)), lr=mb.eta_star,
        delta1=delta1, param_shape=param_shape, record_every=T,
        rank=rank, refresh_gap=0, frame_kind=frame_kind)
    result = run(config)
    metrics = tuple(s.mean_grad_norm_sq for s in result.summaries)
    violations = sum(m > mb.total for m in metrics)
    fraction = violations / n_seeds
    threshold = fail_prob + 2.0 * math.sqrt(fail_prob * (1.0 - fail_prob) / n_seeds)
    return BoundCheck(bound=mb.total, eta_star=mb.eta_star, metrics=metrics,
                      violations=violations, fraction=fraction,
                      threshold=threshold, passed=fraction <= threshold)


# ---------------------------------------------------------------------------
# shape manifests

@dataclass(frozen=True)
class ManifestEntry:
    name: str
    tag: str  # linear | embedding | norm | ...
    shape: tuple


@dataclass(frozen=True)
class ShapeManifest:
    entries: tuple

    @property
    def shapes(self):
        return [e.shape for e in self.entries]

    @property
    def tags(self):
        return [e.tag for e in self.entries]


def parse_manifest(text: str) -> ShapeManifest:
    """One parameter per line: ``name<TAB>class<TAB>dim1xdim2`` (or a single
    dim for 1D parameters). Blank lines and ``#`` comments are skipped."""
    entries = []
    names = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"manifest line {lineno}: expected 3 tab-separated "
                             f"fields, got {len(parts)}")
        name, tag, dims = (p.strip() for p in parts)
        if name in names:
            raise ValueError(f"manifest line {lineno}: duplicate name {name!r}")
        names.add(name)
        try:
            shape = tuple(int(s) for s in dims.lower().split("x"))
        except ValueError:
            raise ValueError(f"manifest line {lineno}: bad shape {dims!r}") from None
        if any(s < 1 for s in shape):
            raise ValueError(f"manifest line {lineno}: non-positive dim in {dims!r}")
        entries.append(ManifestEntry(name=name, tag=tag, shape=shape))
    return ShapeManifest(entries=tuple(entries))


def load_manifest(path) -> ShapeManifest:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def mem_report(manifest: ShapeManifest, preset: str, rank: int = 4,
               subset_rule: str = "heuristic2d", subset_size: int | None = None
               ) -> dict:
    """Persistent optimizer-state elements for a preset over a manifest."""
    spec = make_preset(preset, rank=rank, subset_rule=subset_rule,
                       subset_size=subset_size)
    opt = Optimizer(spec, manifest.shapes, tags=manifest.tags, total_steps=1)
    size = opt.state_size()
    per_entry = []
    for entry, slot in zip(manifest.entries, opt.slots):
        elems = slot.state_elements()
        frame = elems.pop("frame", 0)
        per_entry.append(dict(name=entry.name, tag=entry.tag,
                              shape="x".join(map(str, entry.shape)),
                              state_elems=sum(elems.values()),
                              frame_elems=frame))
    return dict(preset=preset, total=size.total, breakdown=size.breakdown,
                frame_elements=size.frame_elements, entries=per_entry)


# ---------------------------------------------------------------------------
# output formatting

def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def records_to_csv(records) -> str:
    """UTF-8 CSV text with \\n line endings and a fixed header row."""
    buf = io.StringIO()
    buf.write(",".join(RECORD_FIELDS) + "\n")
    for r in records:
        buf.write(",".join(_fmt(getattr(r, f)) for f in RECORD_FIELDS) + "\n")
    return buf.getvalue()


def rows_to_csv(rows, fields) -> str:
    buf = io.StringIO()
    buf.write(",".join(fields) + "\n")
    for r in rows:
        d = r if isinstance(r, dict) else asdict(r)
        buf.write(",".join(_fmt(d[f]) for f in fields) + "\n")
    return buf.getvalue()


def rows_to_json(rows) -> str:
    out = [r if isinstance(r, dict) else asdict(r) for r in rows]
    return json.dumps(out, indent=2) + "\n"
