"""Composable first-order optimizer: momentum choice x adaptive-step choice.

The update per parameter is

    x' = x - lr_t * direction / denominator - lr_t * wd * x

where the momentum component supplies ``direction`` (plain gradient, EMA
momentum, or subspace momentum with SGD residual), the adaptive component
supplies ``denominator`` (ones, per-coordinate EMA/cumulative second moments,
or shared subset-norm denominators), and an optional global-norm clip runs
over the whole gradient list first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import partition as part
from . import subsetnorm as sn
from .linalg import FrameKind
from .subspace import (
    GaloreState,
    SubspaceMomentumState,
    galore_direction,
    galore_init,
    galore_maybe_refresh,
    sm_direction,
    sm_init,
    sm_maybe_refresh,
)


class NonFiniteGradientError(ValueError):
    """Raised when a step receives NaN/Inf gradients; the step is rejected."""


# ---------------------------------------------------------------------------
# spec components

@dataclass(frozen=True)
class NoMomentum:
    pass


@dataclass(frozen=True)
class EMAMomentum:
    beta1: float = 0.9
    dampening: bool = True


@dataclass(frozen=True)
class SubspaceMomentum:
    frame_kind: FrameKind = FrameKind.SVD
    rank: int = 4
    refresh_gap: int = 200
    beta1: float = 0.9
    dampening: bool = True


@dataclass(frozen=True)
class GaloreMomentum:
    """Joint compression baseline; subsumes the adaptive component."""

    frame_kind: FrameKind = FrameKind.SVD
    rank: int = 4
    refresh_gap: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class NoAdaptive:
    pass


@dataclass(frozen=True)
class EMACoordinate:
    beta2: float = 0.999
    eps: float = 1e-8
    bias_correction: bool = True


@dataclass(frozen=True)
class EMASubsetNorm:
    partition_rule: str = "heuristic2d"  # heuristic2d | equip | norm | coord
    subset_size: int | None = None  # for the equip rule
    beta2: float = 0.999
    eps: float = 1e-8
    bias_correction: bool = True


@dataclass(frozen=True)
class AdaGradCoordinate:
    b0: float = 1e-6


@dataclass(frozen=True)
class AdaGradSubsetNorm:
    partition_rule: str = "heuristic2d"
    subset_size: int | None = None
    b0: float = 1e-6


@dataclass(frozen=True)
class AdaGradNorm:
    b0: float = 1e-6


@dataclass(frozen=True)
class ConstantSchedule:
    pass


@dataclass(frozen=True)
class CosineWarmup:
    warmup_frac: float = 0.1
    floor_frac: float = 0.1


@dataclass(frozen=True)
class OptimizerSpec:
    momentum: object = field(default_factory=NoMomentum)
    adaptive: object = field(default_factory=NoAdaptive)
    base_lr: float = 1e-3
    schedule: object = field(default_factory=ConstantSchedule)
    weight_decay: float = 0.0
    clip_norm: float | None = None


def lr_at(schedule, base_lr: float, t: int, T_total: int) -> float:
    """Learning rate at step t in [1, T_total]."""
    if not 1 <= t <= T_total:
        raise ValueError(f"t={t} out of range [1, {T_total}]")
    if isinstance(schedule, ConstantSchedule):
        return base_lr
    warmup_steps = int(round(schedule.warmup_frac * T_total))
    if t <= warmup_steps and warmup_steps > 0:
        return base_lr * t / warmup_steps
    floor = schedule.floor_frac * base_lr
    if T_total == warmup_steps:
        return base_lr
    progress = (t - warmup_steps) / (T_total - warmup_steps)
    return floor + 0.5 * (base_lr - floor) * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# presets (Table "update rules" grid)

def make_preset(name: str, lr: float = 1e-3, rank: int = 4, refresh_gap: int = 200,
                frame_kind: FrameKind | str = FrameKind.SVD,
                subset_rule: str = "heuristic2d", subset_size: int | None = None,
                **kwargs) -> OptimizerSpec:
    frame_kind = FrameKind(frame_kind)
    key = name.replace("-", "").replace("_", "").lower()
    sub = dict(partition_rule=subset_rule, subset_size=subset_size)
    specs = {
        "sgd": OptimizerSpec(NoMomentum(), NoAdaptive()),
        "sgdm": OptimizerSpec(EMAMomentum(), NoAdaptive()),
        "sgdsm": OptimizerSpec(
            SubspaceMomentum(frame_kind, rank, refresh_gap), NoAdaptive()),
        "rmsprop": OptimizerSpec(NoMomentum(), EMACoordinate()),
        "rmspropsn": OptimizerSpec(NoMomentum(), EMASubsetNorm(**sub)),
        "adam": OptimizerSpec(EMAMomentum(), EMACoordinate()),
        "adamsn": OptimizerSpec(EMAMomentum(), EMASubsetNorm(**sub)),
        "adamsnsm": OptimizerSpec(
            SubspaceMomentum(frame_kind, rank, refresh_gap), EMASubsetNorm(**sub)),
        "adagrad": OptimizerSpec(NoMomentum(), AdaGradCoordinate()),
        "adagradnorm": OptimizerSpec(NoMomentum(), AdaGradNorm()),
        "adagradsn": OptimizerSpec(NoMomentum(), AdaGradSubsetNorm(**sub)),
        "adagradsnsm": OptimizerSpec(
            SubspaceMomentum(frame_kind, rank, refresh_gap), AdaGradSubsetNorm(**sub)),
        "adagradm": OptimizerSpec(EMAMomentum(), AdaGradCoordinate()),
        "galore": OptimizerSpec(GaloreMomentum(frame_kind, rank, refresh_gap),
                                NoAdaptive()),
    }
    if key not in specs:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(specs)}")
    return replace(specs[key], base_lr=lr, **kwargs)


PRESET_NAMES = (
    "SGD", "SGDm", "SGD-SM", "RMSProp", "RMSPropSN", "Adam", "AdamSN",
    "AdamSNSM", "AdaGrad", "AdaGradNorm", "AdaGradSN", "AdaGradSNSM",
    "AdaGradm", "GaLore",
)


# ---------------------------------------------------------------------------
# per-parameter state

def _build_partition(rule: str, subset_size, shape) -> part.Partition:
    d = int(np.prod(shape))
    if rule == "heuristic2d":
        if len(shape) == 2:
            return part.heuristic_2d(shape[0], shape[1])
        return part.sqrt_heuristic(d)
    if rule == "equip":
        if subset_size is None:
            raise ValueError("equip rule requires subset_size")
        return part.equipartition(d, subset_size)
    if rule == "norm":
        return part.singleton(d)
    if rule == "coord":
        return part.coordinatewise(d)
    raise ValueError(f"unknown partition rule {rule!r}")


class _ParamSlot:
    """All optimizer state attached to one parameter tensor."""

    def __init__(self, spec: OptimizerSpec, shape: tuple, tag: str, seed: int):
        self.shape = tuple(shape)
        self.tag = tag
        self.d = int(np.prod(shape))
        momentum, adaptive = spec.momentum, spec.adaptive
        # SN/SM only apply to linear-tagged parameters; everything else
        # falls back to the coordinate-wise analog of the same family.
        compressible = tag == "linear"
        if not compressible:
            if isinstance(momentum, (SubspaceMomentum, GaloreMomentum)):
                momentum = EMAMomentum(beta1=momentum.beta1)
            if isinstance(adaptive, EMASubsetNorm):
                adaptive = EMACoordinate(adaptive.beta2, adaptive.eps,
                                         adaptive.bias_correction)
            elif isinstance(adaptive, AdaGradSubsetNorm):
                adaptive = AdaGradCoordinate(adaptive.b0)
            if isinstance(spec.momentum, GaloreMomentum):
                adaptive = EMACoordinate(spec.momentum.beta2, spec.momentum.eps)
        self.momentum_cfg = momentum
        self.adaptive_cfg = adaptive
        # orientation: frames act on the larger dimension of a 2D parameter
        self.transposed = len(self.shape) == 2 and self.shape[0] < self.shape[1]
        m, n = self._oriented_shape()

        self.m_buf = None
        self.sm_state: SubspaceMomentumState | None = None
        self.galore_state: GaloreState | None = None
        if isinstance(momentum, EMAMomentum):
            self.m_buf = np.zeros(self.shape)
        elif isinstance(momentum, SubspaceMomentum):
            self.sm_state = sm_init(
                momentum.frame_kind, m, n, momentum.rank, beta1=momentum.beta1,
                refresh_gap=momentum.refresh_gap, seed=seed,
                reference_grad=self._initial_reference(momentum.frame_kind, m, n, seed),
                dampening=momentum.dampening,
            )
        elif isinstance(momentum, GaloreMomentum):
            self.galore_state = galore_init(
                momentum.frame_kind, m, n, momentum.rank, beta1=momentum.beta1,
                beta2=momentum.beta2, eps=momentum.eps,
                refresh_gap=momentum.refresh_gap, seed=seed,
                reference_grad=self._initial_reference(momentum.frame_kind, m, n, seed),
            )

        self.sn_state: sn.SubsetNormState | None = None
        self.v_buf = None
        self.step = 0
        if isinstance(adaptive, (EMASubsetNorm, AdaGradSubsetNorm)):
            p = _build_partition(adaptive.partition_rule, adaptive.subset_size,
                                 self.shape)
            if isinstance(adaptive, EMASubsetNorm):
                self.sn_state = sn.sn_init(p, sn.AccumMode.EMA, beta2=adaptive.beta2,
                                           bias_correction=adaptive.bias_correction)
            else:
                self.sn_state = sn.sn_init(p, sn.AccumMode.CUMULATIVE, b0=adaptive.b0)
        elif isinstance(adaptive, EMACoordinate):
            self.v_buf = np.zeros(self.shape)
        elif isinstance(adaptive, AdaGradCoordinate):
            self.v_buf = np.full(self.shape, adaptive.b0 ** 2)
        elif isinstance(adaptive, AdaGradNorm):
            self.v_buf = np.full((1,), adaptive.b0 ** 2)

    def _oriented_shape(self):
        if len(self.shape) == 2:
            m, n = self.shape
            return (n, m) if self.transposed else (m, n)
        return (self.d, 1)

    def _initial_reference(self, kind, m, n, seed):
        # gradient-dependent kinds need some matrix before the first step;
        # a seeded Gaussian stands in until the first refresh
        if kind in (FrameKind.SVD, FrameKind.APPROX_SVD, FrameKind.TOP_K_ROWS):
            return np.random.default_rng(seed).standard_normal((m, n))
        return None

    def _orient(self, G: np.ndarray) -> np.ndarray:
        G = G.reshape(self._oriented_shape() if len(self.shape) != 2 else self.shape)
        return G.T if self.transposed else G

    def _deorient(self, G: np.ndarray) -> np.ndarray:
        out = G.T if self.transposed else G
        return out.reshape(self.shape)

    # -- direction (momentum) ------------------------------------------------

    def direction(self, g: np.ndarray, t: int) -> np.ndarray:
        cfg = self.momentum_cfg
        if isinstance(cfg, NoMomentum):
            return g
        if isinstance(cfg, EMAMomentum):
            scale = (1.0 - cfg.beta1) if cfg.dampening else 1.0
            self.m_buf = cfg.beta1 * self.m_buf + scale * g
            return self.m_buf
        if isinstance(cfg, SubspaceMomentum):
            G = self._orient(g)
            sm_maybe_refresh(self.sm_state, G, t)
            return self._deorient(sm_direction(self.sm_state, G))
        raise AssertionError("galore handled in update()")

    # -- denominator (adaptive step size) ------------------------------------

    def denominator(self, g: np.ndarray) -> np.ndarray | float:
        cfg = self.adaptive_cfg
        self.step += 1
        if isinstance(cfg, NoAdaptive):
            return 1.0
        if isinstance(cfg, EMACoordinate):
            self.v_buf = cfg.beta2 * self.v_buf + (1.0 - cfg.beta2) * g * g
            v = self.v_buf
            if cfg.bias_correction:
                v = v / (1.0 - cfg.beta2 ** self.step)
            return np.sqrt(v) + cfg.eps
        if isinstance(cfg, AdaGradCoordinate):
            self.v_buf = self.v_buf + g * g
            return np.sqrt(self.v_buf)
        if isinstance(cfg, AdaGradNorm):
            self.v_buf = self.v_buf + np.sum(g * g)
            return float(np.sqrt(self.v_buf[0]))
        # subset-norm families
        sq = part.subset_sqnorms(self.sn_state.partition, g.reshape(-1))
        sn.sn_accumulate(self.sn_state, sq)
        eps = cfg.eps if isinstance(cfg, EMASubsetNorm) else 0.0
        denoms = sn.sn_denominators(self.sn_state, eps=eps)
        return denoms[self.sn_state.partition.assignment].reshape(self.shape)

    def update(self, x: np.ndarray, g: np.ndarray, t: int, lr: float,
               weight_decay: float) -> np.ndarray:
        if isinstance(self.momentum_cfg, GaloreMomentum):
            G = self._orient(g)
            galore_maybe_refresh(self.galore_state, G, t)
            step_dir = self._deorient(galore_direction(self.galore_state, G))
            x_new = x - lr * step_dir
        else:
            direction = self.direction(g, t)
            denom = self.denominator(g)
            x_new = x - lr * direction / denom
        if weight_decay > 0.0:
            x_new = x_new - lr * weight_decay * x
        return x_new

    # -- accounting ----------------------------------------------------------

    def state_elements(self) -> dict[str, int]:
        out: dict[str, int] = {}
        if self.m_buf is not None:
            out["momentum"] = self.m_buf.size
        if self.sm_state is not None:
            out["momentum"] = self.sm_state.m_buf.size
            out["frame"] = self.sm_state.frame.storage_elements()
        if self.galore_state is not None:
            out["momentum"] = self.galore_state.m_buf.size
            out["second_moment"] = self.galore_state.v_buf.size
            out["frame"] = self.galore_state.frame.storage_elements()
        if self.v_buf is not None and self.v_buf.size > 1:
            out["second_moment"] = self.v_buf.size
        if self.sn_state is not None and self.sn_state.acc.size > 1:
            out["second_moment"] = self.sn_state.acc.size
        return {k: v for k, v in out.items() if v > 1 or (k == "frame" and v > 0)}


@dataclass(frozen=True)
class StateSize:
    total: int  # persistent state elements, singletons excluded
    breakdown: dict
    frame_elements: int  # reported separately, not part of total


class Optimizer:
    """Optimizer built from a spec against a fixed list of parameter shapes."""

    def __init__(self, spec: OptimizerSpec, shapes: list[tuple],
                 tags: list[str] | None = None, total_steps: int = 1,
                 seed: int = 0):
        if tags is None:
            tags = ["linear"] * len(shapes)
        if len(tags) != len(shapes):
            raise ValueError("tags and shapes must align")
        self.spec = spec
        self.total_steps = total_steps
        self.slots = [
            _ParamSlot(spec, shape, tag, seed + 7919 * i)
            for i, (shape, tag) in enumerate(zip(shapes, tags))
        ]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray],
             t: int) -> list[np.ndarray]:
        if len(params) != len(self.slots) or len(grads) != len(self.slots):
            raise ValueError("params/grads count does not match the optimizer")
        for p, g, slot in zip(params, grads, self.slots):
            if np.asarray(p).shape != slot.shape or np.asarray(g).shape != slot.shape:
                raise ValueError("parameter/gradient shape mismatch")
        grads = [np.asarray(g, dtype=np.float64) for g in grads]
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(
                    f"non-finite gradient at step t={t}; step rejected"
                )
        if self.spec.clip_norm is not None:
            total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if total > self.spec.clip_norm:
                scale = self.spec.clip_norm / total
                grads = [g * scale for g in grads]
        lr = lr_at(self.spec.schedule, self.spec.base_lr, t, self.total_steps)
        return [
            slot.update(np.asarray(p, dtype=np.float64), g, t, lr,
                        self.spec.weight_decay)
            for p, g, slot in zip(params, grads, self.slots)
        ]

    def state_size(self) -> StateSize:
        breakdown: dict[str, int] = {}
        for slot in self.slots:
            for key, val in slot.state_elements().items():
                breakdown[key] = breakdown.get(key, 0) + val
        frame = breakdown.pop("frame", 0)
        return StateSize(total=sum(breakdown.values()), breakdown=breakdown,
                         frame_elements=frame)
