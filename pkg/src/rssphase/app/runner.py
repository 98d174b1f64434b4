"""Time loops around the single-step schemes, with snapshot and history output."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import schemes as sch
from ..diagnostics import RunHistory, record
from ..errors import ConfigError, NonFiniteError, RSSError
from ..models import DoubleWell, InpaintingProblem, SegmentationProblem, f_prime
from ..operators import operator_pair
from ..schemes import Scheme, SchemeConfig
from .config import ExperimentConfig, Problem, config_dict
from .images import field_to_image, image_to_field, load_pgm, save_pgm
from .presets import PRESETS, builtin_initial_conditions, heat_exact, heat_source

__all__ = ["RunResult", "run_experiment", "scheme_config", "snapshot_name", "FAILURE_MARKER"]

FAILURE_MARKER = "FAILED"


@dataclass
class RunResult:
    final: np.ndarray
    history: RunHistory
    snapshots: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    heat_errors: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def scheme_config(cfg: ExperimentConfig) -> SchemeConfig:
    return SchemeConfig(
        dt=cfg.dt,
        tau=cfg.tau,
        epsilon=cfg.epsilon,
        scheme=cfg.scheme,
        max_fixed_point_iters=cfg.max_fixed_point_iters,
        fixed_point_tol=cfg.fixed_point_tol,
        C0=cfg.C0,
        lambda0=cfg.lambda0,
        lam=cfg.lam,
        project_mean=bool(cfg.project_mean),
    )


def snapshot_name(cfg: ExperimentConfig, t: float) -> str:
    return f"{cfg.problem.value}_{cfg.scheme.value}_t{t:g}"


def _load_image_field(path: str, n: int, target):
    try:
        image = load_pgm(path)
    except OSError as exc:
        raise ConfigError(f"cannot read image {path}: {exc.strerror}") from None
    if image.width != n or image.height != n:
        raise ConfigError(f"image {path} is {image.width}x{image.height}, expected {n}x{n}")
    return image_to_field(image, target)


def _initial_field(cfg: ExperimentConfig, A, target=(-1.0, 1.0)) -> np.ndarray:
    ic = cfg.initial_condition
    if ic.strip().lower() in PRESETS:
        try:
            return builtin_initial_conditions(ic, cfg.n, cfg.dim, A.centering)
        except RSSError as exc:
            raise ConfigError(str(exc)) from None
    if cfg.dim != 2:
        raise ConfigError(f"image initial condition {ic!r} needs dim = 2")
    return _load_image_field(ic, cfg.n, target)


class _Stepper:
    """Uniform interface over the schemes: ``state`` is whatever the scheme
    carries; ``field(state)`` extracts the primary unknown."""

    def __init__(self, cfg: ExperimentConfig, A, B, overrides=None):
        self.cfg = cfg
        self.A, self.B = A, B
        self.sc = scheme_config(cfg)
        self.well = DoubleWell(cfg.epsilon)
        self.overrides = overrides or {}
        self.source = None
        self.prev = None
        scheme = cfg.scheme
        self.energy_kind = {
            Problem.HEAT: "dirichlet",
            Problem.ALLEN_CAHN: "ac",
            Problem.SEGMENT: "ac",
        }.get(cfg.problem, "ch")
        u0 = self.overrides.get("u0")
        if u0 is None:
            target = (0.0, 1.0) if cfg.problem is Problem.SEGMENT else (-1.0, 1.0)
            u0 = _initial_field(cfg, A, target)
        if cfg.problem is Problem.HEAT and cfg.initial_condition.strip().lower() == "heat":
            coords = A.nodes()
            self.source = lambda t: heat_source(coords, t)
            self.exact = lambda t: heat_exact(coords, t)
        else:
            self.exact = None
        if cfg.problem is Problem.INPAINT:
            mask = self.overrides.get("mask")
            if mask is None:
                if cfg.mask_path is None:
                    raise ConfigError("inpainting needs mask_path")
                mask = (_load_image_field(cfg.mask_path, cfg.n, (0.0, 1.0)) >= 0.5).astype(float)
            self.problem = InpaintingProblem(u0, mask, cfg.lambda0)
            self.state = sch.CHState(u0, cfg.epsilon * A(u0) + f_prime(u0) / cfg.epsilon)
        elif cfg.problem is Problem.SEGMENT:
            self.problem = SegmentationProblem(u0, cfg.lam, cfg.epsilon)
            self.state = 2.0 * u0 - 1.0
        elif scheme is Scheme.CH_SAV:
            self.state = sch.sav_initial_state(u0, A, self.sc)
        elif cfg.problem is Problem.CAHN_HILLIARD:
            self.state = sch.ch_initial_state(u0, A, self.sc)
        else:
            self.state = u0

    def field(self, state) -> np.ndarray:
        return state if isinstance(state, np.ndarray) else state.u

    def step(self, t: float):
        A, B, sc, s = self.A, self.B, self.sc, self.cfg.scheme
        state = self.state
        src = self.source(t) if self.source is not None else None
        if s is Scheme.HEAT_RSS_EULER:
            new = sch.heat_rss_euler_step(state, A, B, sc, src)
        elif s is Scheme.HEAT_RSS_CN:
            new = sch.heat_rss_cn_step(state, A, B, sc, src)
        elif s is Scheme.HEAT_RSS_GEAR:
            if self.prev is None:
                new = sch.heat_rss_euler_step(state, A, B, sc, src)
            else:
                new = sch.heat_rss_gear_step(self.prev, state, A, B, sc, src)
            self.prev = state
        elif s is Scheme.HEAT_RSS_ADI:
            new = sch.heat_rss_adi_step(state, A, B, sc, source=src)
        elif s is Scheme.HEAT_RSS_STRANG:
            new = sch.heat_rss_adi_step(state, A, B, sc, strang=True, source=src)
        elif s is Scheme.AC_IMEX:
            new = sch.ac_imex_step(state, A, B, sc)
        elif s is Scheme.AC_RSS_IMEX:
            new = sch.ac_rss_imex_step(state, A, B, sc)
        elif s is Scheme.AC_DF:
            new = sch.ac_df_step(state, A, B, sc)
        elif s is Scheme.AC_CONVEX_SPLIT:
            new = sch.ac_convex_split_step(state, A, B, sc)
        elif s is Scheme.AC_SPLITTING:
            new = sch.ac_splitting_step(state, A, B, sc)
        elif s is Scheme.CH_RSS_IMEX:
            new = sch.ch_rss_imex_step(state, A, B, sc)
        elif s is Scheme.CH_NLRSS:
            new = sch.ch_nlrss_step(state, A, B, sc)
        elif s is Scheme.CH_SAV:
            new = sch.ch_rss_sav_step(state, A, B, sc)
        elif s is Scheme.CH_INPAINT:
            new = sch.ch_inpainting_step(state, A, B, self.problem, sc)
        elif s is Scheme.AC_SEGMENT:
            new = sch.ac_segmentation_step(state, A, B, self.problem, sc)
        else:  # pragma: no cover - config validation rejects this
            raise ConfigError(f"scheme {s.value} is not runnable")
        if not np.all(np.isfinite(self.field(new))):
            raise NonFiniteError(f"non-finite values after the step ending at t={t + self.cfg.dt:g}")
        self.state = new
        return new


def _write_snapshot(out_dir: str, name: str, u: np.ndarray) -> list:
    pgm = os.path.join(out_dir, name + ".pgm")
    save_pgm(field_to_image(u), pgm)
    csv_path = os.path.join(out_dir, name + ".csv")
    data = u if u.ndim < 3 else u[:, :, u.shape[2] // 2]
    np.savetxt(csv_path, np.atleast_2d(data), delimiter=",", fmt="%.17g")
    return [pgm, csv_path]


def run_experiment(cfg: ExperimentConfig, overrides=None, write: bool = True) -> RunResult:
    """Run ``cfg`` from t = 0 to ``t_max`` and write outputs under ``output_dir``.

    ``overrides`` may supply ``u0`` and ``mask`` arrays directly instead of
    presets or image files.  On a numerical failure the partial history and
    a ``FAILED`` marker file are written before the error propagates.
    """
    cfg = cfg.resolved()
    A, B = operator_pair(cfg.operator_kind, cfg.n, cfg.dim)
    stepper = _Stepper(cfg, A, B, overrides)
    steps = int(round(cfg.t_max / cfg.dt))
    # nearest completed step for every requested snapshot time
    snap_steps = {}
    for t in cfg.snapshot_times:
        snap_steps.setdefault(int(round(t / cfg.dt)), []).append(t)

    out_dir = cfg.output_dir
    if write:
        os.makedirs(out_dir, exist_ok=True)
        marker = os.path.join(out_dir, FAILURE_MARKER)
        if os.path.exists(marker):
            os.remove(marker)
    history = RunHistory()
    result = RunResult(final=stepper.field(stepper.state), history=history)

    def observe(k: int):
        u = stepper.field(stepper.state)
        t = k * cfg.dt
        record(history, t, u, A, stepper.well, stepper.energy_kind)
        if stepper.exact is not None:
            err = float(np.sqrt(np.sum((u - stepper.exact(t)) ** 2) * A.h**A.dim))
            result.heat_errors.append(err)
        for requested in snap_steps.get(k, []):
            if write:
                result.snapshots += _write_snapshot(out_dir, snapshot_name(cfg, requested), u)

    status = "ok"
    message = ""
    started = time.perf_counter()
    try:
        observe(0)
        for k in range(steps):
            tic = time.perf_counter()
            stepper.step(k * cfg.dt)
            result.step_times.append(time.perf_counter() - tic)
            observe(k + 1)
    except RSSError as exc:
        status = "failed"
        message = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        result.final = stepper.field(stepper.state)
        times = np.array(result.step_times)
        result.summary = {
            "status": status,
            "message": message,
            "steps_completed": len(result.step_times),
            "steps_requested": steps,
            "wall_time_s": time.perf_counter() - started,
            "step_time_median_s": float(np.median(times)) if times.size else 0.0,
            "step_time_mean_s": float(times.mean()) if times.size else 0.0,
            "final_energy": history.energies[-1] if len(history) else None,
            "mass_drift": (history.masses[-1] - history.masses[0]) if len(history) else None,
            "max_abs": max(history.max_abs) if len(history) else None,
            "config": config_dict(cfg),
        }
        if result.heat_errors:
            result.summary["final_l2_error"] = result.heat_errors[-1]
        if write:
            base = f"{cfg.problem.value}_{cfg.scheme.value}"
            history.to_csv(os.path.join(out_dir, base + "_history.csv"))
            with open(os.path.join(out_dir, "summary.json"), "w") as fh:
                json.dump(result.summary, fh, indent=2, sort_keys=True)
            if status != "ok":
                with open(os.path.join(out_dir, FAILURE_MARKER), "w") as fh:
                    fh.write(message + "\n")
    return result
