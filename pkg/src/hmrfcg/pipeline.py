"""End-to-end segmentation runs: load, optimize the class means, classify, evaluate.

Reports are plain ``key=value`` lines.  Keys are stable; floats are written
with ``repr`` so they parse back exactly.  Lines whose key starts with
``timing.`` carry wall-clock measurements and are the only nondeterministic
content of a report.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import io
from .evaluation import DiceReport, match_and_report
from .grid import DEFAULT_ORDER, LatticeShape, NeighborhoodSpec
from .model import ImageVolume, Labeling, ModelParams, Objective, classify
from .optim import CgConfig, FiniteDiffScheme, OptimTrace, minimize

__all__ = [
    "PRESETS",
    "Preset",
    "RunConfig",
    "ValidationError",
    "SegmentationResult",
    "SegmentationReport",
    "segment",
    "run",
    "parse_report",
    "auto_init",
]

REPORT_FORMAT = "hmrfcg-report/1"


@dataclass(frozen=True)
class Preset:
    beta: float
    temperature: float
    init: tuple


PRESETS = {
    "ibsr": Preset(1.0, 10.0, (1.0, 5.0, 140.0, 190.0)),
    "brainweb1": Preset(1.0, 10.0, (1.0, 45.0, 110.0, 150.0)),
    "brainweb2": Preset(1.0, 4.0, (1.0, 45.0, 110.0, 150.0)),
    "brainweb3": Preset(1.0, 1.0, (1.0, 45.0, 110.0, 150.0)),
}


class ValidationError(ValueError):
    """Invalid run configuration; ``field`` names the offending setting."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def auto_init(k: int) -> tuple:
    """K evenly spaced means over [0, 255] (a convenience, not a tuned start)."""
    if k == 1:
        return (127.5,)
    return tuple(float(v) for v in np.linspace(0.0, 255.0, k))


@dataclass(frozen=True)
class RunConfig:
    """Settings for one segmentation run.

    Fields left as ``None`` are filled from ``preset``.  ``init`` may be a
    sequence of means or the string ``"auto"``.
    """

    input: str
    output: str
    report: str
    truth: Optional[str] = None
    k: Optional[int] = None
    beta: Optional[float] = None
    temperature: Optional[float] = None
    init: Union[Sequence[float], str, None] = None
    preset: Optional[str] = None
    order: int = DEFAULT_ORDER
    fd: str = "centered"
    eps: float = 0.01
    max_iter: int = 200
    grad_tol: float = 1e-3
    threads: int = 1
    slices: bool = False

    def resolved(self) -> "RunConfig":
        """Apply the preset and check every field, raising ValidationError."""
        cfg = self
        if cfg.preset is not None:
            if cfg.preset not in PRESETS:
                raise ValidationError("preset", f"unknown preset {cfg.preset!r}; choose from {sorted(PRESETS)}")
            p = PRESETS[cfg.preset]
            cfg = replace(
                cfg,
                beta=p.beta if cfg.beta is None else cfg.beta,
                temperature=p.temperature if cfg.temperature is None else cfg.temperature,
                init=p.init if cfg.init is None else cfg.init,
            )
        if cfg.k is None:
            if cfg.init is None or isinstance(cfg.init, str):
                raise ValidationError("k", "number of classes is required")
            cfg = replace(cfg, k=len(cfg.init))
        if cfg.k < 1 or cfg.k > 255:
            raise ValidationError("k", f"must be in 1..255, got {cfg.k}")
        if cfg.init is None or (isinstance(cfg.init, str) and cfg.init == "auto"):
            cfg = replace(cfg, init=auto_init(cfg.k))
        elif isinstance(cfg.init, str):
            raise ValidationError("init", f"expected a list of means or 'auto', got {cfg.init!r}")
        init = tuple(float(v) for v in cfg.init)
        if len(init) != cfg.k:
            raise ValidationError("init", f"expected {cfg.k} means, got {len(init)}")
        if any(not (0.0 <= v <= 255.0) for v in init):
            raise ValidationError("init", f"means must lie in [0, 255], got {init}")
        cfg = replace(cfg, init=init, beta=1.0 if cfg.beta is None else float(cfg.beta),
                      temperature=1.0 if cfg.temperature is None else float(cfg.temperature))
        if not cfg.beta >= 0:
            raise ValidationError("beta", f"must be >= 0, got {cfg.beta}")
        if not cfg.temperature > 0:
            raise ValidationError("temperature", f"must be > 0, got {cfg.temperature}")
        if cfg.order < 1:
            raise ValidationError("neighborhood", f"must be a positive integer, got {cfg.order}")
        if cfg.fd not in ("centered", "forward", "backward"):
            raise ValidationError("fd", f"unknown scheme {cfg.fd!r}")
        if not cfg.eps > 0:
            raise ValidationError("eps", f"must be > 0, got {cfg.eps}")
        if cfg.max_iter < 1:
            raise ValidationError("max_iter", f"must be >= 1, got {cfg.max_iter}")
        if not cfg.grad_tol > 0:
            raise ValidationError("grad_tol", f"must be > 0, got {cfg.grad_tol}")
        if cfg.threads < 1:
            raise ValidationError("threads", f"must be >= 1, got {cfg.threads}")
        return cfg

    def cg_config(self) -> CgConfig:
        return CgConfig(
            scheme=FiniteDiffScheme(self.fd, self.eps),
            max_iterations=self.max_iter,
            gradient_tolerance=self.grad_tol,
        )


@dataclass
class SegmentationResult:
    mu: np.ndarray
    labeling: Labeling
    trace: OptimTrace


def segment(image: ImageVolume, params: ModelParams, init, config: CgConfig = CgConfig(),
            threads: int = 1) -> SegmentationResult:
    """Minimize the energy over class means from ``init`` and classify with the result."""
    objective = Objective(image, params, threads)
    mu, trace = minimize(objective, init, config)
    return SegmentationResult(mu, classify(image, mu), trace)


@dataclass
class SegmentationReport:
    config: RunConfig
    mu: list
    traces: list
    dice: Optional[DiceReport] = None
    timings: dict = field(default_factory=dict)

    @property
    def initial_energy(self) -> float:
        return math.fsum(t.records[0].value for t in self.traces)

    @property
    def final_energy(self) -> float:
        return math.fsum(t.records[-1].value for t in self.traces)

    def lines(self) -> list:
        c = self.config
        out = [
            ("format", REPORT_FORMAT),
            ("config.input", c.input),
            ("config.output", c.output),
            ("config.preset", c.preset or ""),
            ("config.k", c.k),
            ("config.beta", repr(c.beta)),
            ("config.temperature", repr(c.temperature)),
            ("config.init", _floats(c.init)),
            ("config.neighborhood", c.order),
            ("config.fd", c.fd),
            ("config.eps", repr(c.eps)),
            ("config.max_iter", c.max_iter),
            ("config.grad_tol", repr(c.grad_tol)),
            ("config.threads", c.threads),
            ("config.slices", int(c.slices)),
            ("energy.initial", repr(self.initial_energy)),
            ("energy.final", repr(self.final_energy)),
            ("energy.iterations", sum(t.iterations for t in self.traces)),
            ("energy.evaluations", sum(t.evaluations for t in self.traces)),
            ("energy.termination", ",".join(t.termination for t in self.traces)),
        ]
        for part, (mu, trace) in enumerate(zip(self.mu, self.traces)):
            prefix = f"slice.{part}." if c.slices else ""
            out.append((f"{prefix}result.mu", _floats(mu)))
            for r in trace.records:
                out.append((
                    f"{prefix}trace.{r.iteration:04d}",
                    f"{r.value!r} {r.gradient_norm!r} {r.step!r} {int(r.restart)} {_floats(r.mu)}",
                ))
        if self.dice is not None:
            out.append(("metrics.truth", c.truth))
            out.append(("metrics.mean_dice", repr(self.dice.mean)))
            for tc, score in self.dice.per_class.items():
                cnt = self.dice.counts[tc]
                out.append((f"metrics.dice.{tc}", repr(score)))
                out.append((f"metrics.counts.{tc}", f"{cnt.tp} {cnt.fp} {cnt.fn}"))
            for pc, tc in self.dice.matching.items():
                out.append((f"metrics.match.{pc}", tc))
        for name, seconds in self.timings.items():
            out.append((f"timing.{name}", f"{seconds:.6f}"))
        return [f"{k}={v}" for k, v in out]

    def write(self, path):
        Path(path).write_text("\n".join(self.lines()) + "\n")


def _floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def parse_report(path) -> dict:
    """Read a report into a ``{key: value-string}`` dict."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if line:
            key, _, value = line.partition("=")
            out[key] = value
    return out


def run(config: RunConfig) -> SegmentationReport:
    """Execute a configured run and write the label image and report."""
    cfg = config.resolved()
    timings = {}
    t0 = time.perf_counter()
    image = io.load_image(cfg.input)
    truth = io.load_labeling(cfg.truth) if cfg.truth else None
    if truth is not None and truth.shape.dims != image.shape.dims:
        raise ValidationError("truth", f"shape {truth.shape.dims} differs from input {image.shape.dims}")
    timings["load"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    cg = cfg.cg_config()
    if cfg.slices and image.shape.ndim == 3:
        vol = image.as_array()
        plane = LatticeShape(image.shape.dims[1:], image.shape.spacing[1:])
        parts = [ImageVolume(plane, vol[z]) for z in range(vol.shape[0])]
    else:
        cfg = replace(cfg, slices=False)
        parts = [image]
    results = []
    for part in parts:
        params = ModelParams(cfg.beta, cfg.temperature, cfg.k, NeighborhoodSpec(cfg.order, part.shape))
        results.append(segment(part, params, cfg.init, cg, cfg.threads))
    labels = np.concatenate([r.labeling.labels for r in results])
    labeling = Labeling(image.shape, labels, cfg.k)
    timings["optimize"] = time.perf_counter() - t1

    io.save_labeling(labeling, cfg.output)

    dice = None
    if truth is not None:
        t2 = time.perf_counter()
        dice = match_and_report(labeling, truth)
        timings["evaluate"] = time.perf_counter() - t2
    timings["total"] = time.perf_counter() - t0

    report = SegmentationReport(cfg, [r.mu.tolist() for r in results], [r.trace for r in results], dice, timings)
    report.write(cfg.report)
    return report
