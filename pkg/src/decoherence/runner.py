"""Dispatch of validated run configs to the numerical modules, sweeps and figure recipes."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .config import RunConfig, make_config, sweep_points
from .errors import DecoherenceError, NumericalError, ValidationError
from .gaussian import entropy_from_area, free_thermal_area
from .io import SeriesOutput, read_csv
from .kadanoff_baym import evolve_kb, late_time_area
from .kernels import build_kernels
from .oscillators import model_from_config, run_qm
from .rates import extract_rate
from .selfmass import (
    QftParams,
    SelfMassSpectrum,
    decay_rate_closed_form,
    im_retarded_selfmass,
    solve_stationary,
    tabulate_selfmass,
)

Sink = Callable[[int, SeriesOutput], None]


class StageError(DecoherenceError):
    """Wraps a module error with the pipeline stage it came from."""

    def __init__(self, stage: str, error: DecoherenceError):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error


def _stage(name: str, fn: Callable[[], Any]) -> Any:
    try:
        return fn()
    except StageError:
        raise
    except DecoherenceError as exc:
        raise StageError(name, exc) from exc


def qft_params(model: dict[str, Any]) -> QftParams:
    return QftParams(m_phi=float(model["m_phi"]), h=float(model["h"]), beta=float(model["beta"]), k=float(model["k"]))


def _run_qm(cfg: RunConfig) -> SeriesOutput:
    m, n = cfg.model, cfg.numerics
    model = _stage("model", lambda: model_from_config(m))
    times = np.linspace(0.0, float(n["t_max"]), int(n["n_times"]))
    series = _stage("evolution", lambda: run_qm(model, times, rtol=float(n["rtol"]), tol=float(n["heisenberg_tol"])))
    thermal = float(entropy_from_area(free_thermal_area(model.beta, model.omega0)))
    summary = {
        "S_S_final": float(series.s_system[-1]),
        "S_S_max": float(series.s_system.max()),
        "S_master_final": float(series.s_master[-1]),
        "S_thermal": thermal,
        "S_total_spread": float(np.ptp(series.s_total)),
        "spectrum_drift": series.total_spectrum_drift,
    }
    return SeriesOutput.from_columns(cfg, series.columns(), summary=summary)


def _stationary_summary(p: QftParams, n_points: int, cutoff_factor: float) -> tuple[Any, dict[str, Any]]:
    sol = _stage("stationary", lambda: solve_stationary(p, n_points, cutoff_factor))
    summary = {
        "Delta_ms": sol.delta_ms,
        "S_ms": sol.s_ms,
        "sum_rule": sol.sum_rule,
        "S_free": float(entropy_from_area(free_thermal_area(p.beta, p.omega))),
    }
    if p.h > 0 and p.omega > p.k:
        summary["gamma_closed_form"] = decay_rate_closed_form(p)
        summary["gamma_quadrature"] = _stage(
            "on-shell self-mass", lambda: -im_retarded_selfmass(p, p.omega) / p.omega
        )
    return sol, summary


def _run_stationary(cfg: RunConfig) -> SeriesOutput:
    n = cfg.numerics
    p = _stage("parameters", lambda: qft_params(cfg.model))
    n_points, factor = int(n["n_points"]), float(n["cutoff_factor"])
    if n["h_values"] is not None:
        rows = []
        for h in n["h_values"]:
            ph = QftParams(p.m_phi, float(h), p.beta, p.k)
            sol, _ = _stationary_summary(ph, n_points, factor)
            rows.append((float(h), sol.delta_ms, sol.s_ms))
        cols = {name: [r[i] for r in rows] for i, name in enumerate(("h", "Delta_ms", "S_ms"))}
        summary = {"S_free": float(entropy_from_area(free_thermal_area(p.beta, p.omega))), "n_points": len(rows)}
        return SeriesOutput.from_columns(cfg, cols, summary=summary)
    sol, summary = _stationary_summary(p, n_points, factor)
    if p.h == 0:
        cols = {"k0": [], "ReM": [], "ImM": [], "rho": [], "F": []}
    else:
        spec = _stage("self-mass", lambda: tabulate_selfmass(p, n_points, factor))
        k0, re, im = spec.symmetric()
        rho = np.r_[-sol.rho[::-1], sol.rho]
        F = np.r_[sol.F[::-1], sol.F]
        cols = {"k0": k0, "ReM": re, "ImM": im, "rho": rho, "F": F}
    return SeriesOutput.from_columns(cfg, cols, summary=summary)


def load_spectrum(path: str, params: QftParams) -> SelfMassSpectrum:
    """Self-mass table from a single-point qft-stationary output.

    Only the positive-frequency half is kept; the quadrature weights are not
    stored in the dump and are left empty (the kernel transform does not use them).
    """
    table = read_csv(path)
    src = table.config
    if src.mode != "qft-stationary" or src.numerics["h_values"] is not None:
        raise ValidationError(f"{path} is not a single-point qft-stationary output")
    if qft_params(src.model) != params:
        raise ValidationError(f"{path} was tabulated for different parameters")
    k0 = table.column("k0")
    if k0.size == 0:
        raise ValidationError(f"{path} holds no self-mass table")
    pos = k0 > 0
    return SelfMassSpectrum(
        params,
        k0[pos],
        np.zeros(int(pos.sum())),
        table.column("ReM")[pos],
        table.column("ImM")[pos],
        float(k0.max()),
        math.nan,
        math.nan,
    )


def _run_evolve(cfg: RunConfig) -> SeriesOutput:
    n = cfg.numerics
    p = _stage("parameters", lambda: qft_params(cfg.model))
    t_mem = 10.0 * p.beta if n["t_mem"] == "default" else n["t_mem"]
    source = n["kernel_source"]
    spectrum = None
    if source == "spectrum":
        spectrum = _stage("self-mass", lambda: tabulate_selfmass(p))
    elif source != "closed":
        spectrum = load_spectrum(source, p)
    kernels = _stage(
        "kernels",
        lambda: build_kernels(
            p,
            spectrum,
            dt=float(n["dt"]),
            t_mem=None if t_mem is None else float(t_mem),
            n_steps=int(n["n_t"]),
            taper_fraction=float(n["taper_fraction"]),
            decay_tol=float(n["decay_tol"]),
        ),
    )
    grid = _stage(
        "two-time evolution",
        lambda: evolve_kb(p, kernels, int(n["n_t"]), prehistory=n["prehistory"], backend=n["backend"]),
    )
    series = _stage("equal-time moments", grid.equal_time)
    summary = {
        "S_final": float(series.entropy[-1]),
        "Delta_late": late_time_area(series),
        "Delta_min": float(series.delta.min()),
        "commutator_residual": grid.commutator_residual(),
        "symmetry_defect": grid.symmetry_defect(),
        "t_mem": t_mem,
        "backend": grid.backend,
    }
    return SeriesOutput.from_columns(cfg, {"t": series.t, "Delta": series.delta, "S": series.entropy}, summary=summary)


def _run_rate_fit(cfg: RunConfig) -> SeriesOutput:
    n = cfg.numerics
    table = read_csv(cfg.model["input"])
    src = table.config
    if src.mode != "qft-evolve":
        raise ValidationError(f"rate-fit needs a qft-evolve output, got {src.mode}")
    p = qft_params(src.model)
    t, delta = table.column("t"), table.column("Delta")
    t_lo = 5.0 / p.m_phi if n["t_lo"] is None else float(n["t_lo"])
    fit = _stage(
        "rate fit",
        lambda: extract_rate(
            t,
            delta,
            n["delta_ms"],
            t_lo=t_lo,
            t_hi=n["t_hi"],
            floor_rel=float(n["floor_rel"]),
            min_efolds=float(n["min_efolds"]),
            residual_tol=float(n["residual_tol"]),
        ),
    )
    with np.errstate(divide="ignore"):
        log_dev = np.log(np.abs(fit.delta_ms_used - delta))
    summary = {
        "gamma_dec": fit.gamma_dec,
        "delta_ms_used": fit.delta_ms_used,
        "fit_window": list(fit.fit_window),
        "residual": fit.residual,
        "method": fit.method,
    }
    if p.h > 0 and p.omega > p.k:
        summary["gamma_closed_form"] = decay_rate_closed_form(p)
    return SeriesOutput.from_columns(cfg, {"t": t, "ln_abs_dDelta": log_dev}, summary=summary)


def _run_sweep(cfg: RunConfig, sink: Sink | None) -> SeriesOutput:
    points = [make_config(raw) for raw in sweep_points(cfg)]
    keys = sorted(cfg.model["grid"])
    results: list[tuple[SeriesOutput | None, int, str]] = [(None, 0, "")] * len(points)

    def work(i: int) -> tuple[int, SeriesOutput | None, int, str]:
        try:
            return i, run(points[i]), 0, ""
        except DecoherenceError as exc:
            code = 2 if isinstance(_root(exc), ValidationError) else 3
            return i, None, code, str(exc)

    with ThreadPoolExecutor(max_workers=int(cfg.numerics["workers"])) as pool:
        for fut in as_completed([pool.submit(work, i) for i in range(len(points))]):
            i, out, code, msg = fut.result()
            results[i] = (out, code, msg)
            if out is not None and sink is not None:
                sink(i, out)

    scalar_keys = sorted(
        set.intersection(
            *(
                {k for k, v in out.summary.items() if isinstance(v, (int, float)) and not isinstance(v, bool)}
                for out, _, _ in results
                if out is not None
            )
        )
        if any(out is not None for out, _, _ in results)
        else set()
    )
    cols: dict[str, list[float]] = {"point": [], **{k.replace("numerics.", ""): [] for k in keys}, "status": []}
    for k in scalar_keys:
        cols[k] = []
    failures = {}
    for i, (pt, (out, code, msg)) in enumerate(zip(points, results)):
        cols["point"].append(i)
        for k in keys:
            section, name = ("numerics", k.split(".", 1)[1]) if "." in k else ("model", k)
            v = getattr(pt, section)[name]
            cols[k.replace("numerics.", "")].append(float(v) if isinstance(v, (int, float)) else math.nan)
        cols["status"].append(code)
        for k in scalar_keys:
            cols[k].append(float(out.summary[k]) if out is not None else math.nan)
        if code:
            failures[str(i)] = msg
    summary = {"n_points": len(points), "n_failed": len(failures), "failures": failures}
    return SeriesOutput.from_columns(cfg, cols, summary=summary)


def _root(exc: BaseException) -> BaseException:
    while isinstance(exc, StageError):
        exc = exc.error
    return exc


def run(cfg: RunConfig, sink: Sink | None = None) -> SeriesOutput:
    """Execute one validated config and return its table.

    Module errors are re-raised as :class:`StageError` naming the failing
    stage. For sweeps, ``sink(index, output)`` is called as each point finishes.
    """
    start = time.perf_counter()
    handler = {
        "qm-run": _run_qm,
        "qft-stationary": _run_stationary,
        "qft-evolve": _run_evolve,
        "rate-fit": _run_rate_fit,
    }.get(cfg.mode)
    out = _run_sweep(cfg, sink) if cfg.mode == "sweep" else handler(cfg)
    return SeriesOutput(out.config, out.columns, out.data, out.summary, time.perf_counter() - start)


def exit_code(exc: BaseException) -> int:
    """0 ok, 2 validation, 3 numerical; anything else is a crash (1)."""
    root = _root(exc)
    if isinstance(root, ValidationError):
        return 2
    if isinstance(root, (NumericalError, ArithmeticError)):
        return 3
    return 1


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


FIGURES = ("fig1", "fig2", "fig3", "fig4")


def figure_config(figure: str) -> RunConfig:
    """Canned config for a figure recipe."""
    if figure == "fig1":
        return make_config({"mode": "qm-run", "output": "fig1.csv"})
    if figure == "fig2":
        return make_config({"mode": "qft-evolve", "output": "fig2.csv"})
    if figure == "fig3":
        return make_config(
            {"mode": "qft-stationary", "numerics": {"h_values": [0.01, 0.5, 1.0, 2.0, 3.0, 4.0]}, "output": "fig3.csv"}
        )
    if figure == "fig4":
        return make_config({"mode": "qft-evolve", "output": "fig4_evolve.csv"})
    raise ValidationError(f"figure must be one of {FIGURES}, got {figure!r}")


def _checks_fig1(out: SeriesOutput) -> list[Check]:
    t, s, sm = out.column("t"), out.column("S_S"), out.column("S_master")
    thermal = out.summary["S_thermal"]
    early = t <= 5.0
    gap = float(np.max(np.abs(sm[early] - s[early])))
    tail = sm[-max(len(sm) // 50, 2) :]
    corr_ok = bool(np.all(out.column("S_SE")[s > 0.02] < 0))
    return [
        Check("exact entropy starts pure", s[0] == 0.0, f"S_S(0) = {s[0]:.3g}"),
        Check("imperfect decoherence", bool(s.max() < thermal), f"max S_S = {s.max():.6f} < S_thermal = {thermal:.6f}"),
        Check("early master agreement", gap < 0.05, f"max |S_master - S_S| on t <= 5 is {gap:.4f} (limit 0.05)"),
        Check(
            "secular growth",
            bool(sm[-1] > thermal and np.all(np.diff(tail) > 0)),
            f"S_master(t_end) = {sm[-1]:.4g} > {thermal:.4f}, increasing over the last {tail.size} samples",
        ),
        Check("symplectic spectrum conserved", out.summary["spectrum_drift"] < 1e-8, f"drift {out.summary['spectrum_drift']:.2e}"),
        Check("total entropy constant", out.summary["S_total_spread"] < 1e-8, f"spread {out.summary['S_total_spread']:.2e}"),
        Check("correlation entropy negative", corr_ok, "S_SE < 0 wherever S_S > 0.02"),
    ]


def _checks_fig2(out: SeriesOutput, stationary: dict[str, Any]) -> list[Check]:
    s_final, s_ms = out.summary["S_final"], stationary["S_ms"]
    rel = abs(s_final - s_ms) / s_ms
    d_rel = abs(out.summary["Delta_late"] - stationary["Delta_ms"]) / stationary["Delta_ms"]
    return [
        Check("settles to S_ms", rel < 0.02, f"S(t_end) = {s_final:.6f}, S_ms = {s_ms:.6f}, rel {rel:.2e} (limit 0.02)"),
        Check("late area matches Delta_ms", d_rel < 0.02, f"rel {d_rel:.2e} (limit 0.02)"),
        Check(
            "commutator preserved",
            out.summary["commutator_residual"] < 1e-4,
            f"residual {out.summary['commutator_residual']:.2e}",
        ),
        Check("Heisenberg bound", out.summary["Delta_min"] >= 1 - 1e-6, f"min Delta = {out.summary['Delta_min']:.9f}"),
    ]


def _checks_fig3(out: SeriesOutput) -> list[Check]:
    h, d, s = out.column("h"), out.column("Delta_ms"), out.column("S_ms")
    target = 1.0 / math.tanh(math.sqrt(2.0) / 4.0)
    s_free = out.summary["S_free"]
    i0 = int(np.argmin(h))
    rising = s[h >= 0.5]
    return [
        Check("free limit area", abs(d[i0] - target) < 1e-3, f"Delta_ms(h={h[i0]:g}) = {d[i0]:.6f}, coth(sqrt2/4) = {target:.6f}"),
        Check("free limit entropy", abs(s[i0] - s_free) < 1e-3, f"S_ms = {s[i0]:.6f}, S_free = {s_free:.6f}"),
        Check("S_ms increasing in h", bool(np.all(np.diff(rising) > 0)), "S_ms = " + ", ".join(f"{v:.4f}" for v in rising)),
    ]


def _checks_fig4(fit: SeriesOutput) -> list[Check]:
    g, G = fit.summary["gamma_dec"], fit.summary["gamma_closed_form"]
    rel = abs(g - G) / G
    return [Check("decoherence rate near decay rate", rel < 0.25, f"gamma_dec = {g:.4f}, Gamma = {G:.4f}, rel {rel:.3f} (limit 0.25)")]


def reproduce(figure: str, writer: Callable[[SeriesOutput], Any] | None = None) -> tuple[list[SeriesOutput], list[Check]]:
    """Run a figure recipe; ``writer`` is called on every table produced."""
    cfg = figure_config(figure)
    out = run(cfg)
    outputs = [out]
    path = writer(out) if writer else None
    if figure == "fig1":
        checks = _checks_fig1(out)
    elif figure == "fig2":
        _, stationary = _stationary_summary(qft_params(cfg.model), 4096, 40.0)
        checks = _checks_fig2(out, stationary)
    elif figure == "fig3":
        checks = _checks_fig3(out)
    else:
        if path is None:
            raise ValidationError("fig4 needs a writer: the rate fit reads the evolution file")
        fit = run(make_config({"mode": "rate-fit", "model": {"input": str(path)}, "output": "fig4.csv"}))
        writer(fit)
        outputs.append(fit)
        checks = _checks_fig4(fit)
    return outputs, checks


__all__ = ["Check", "FIGURES", "StageError", "exit_code", "figure_config", "qft_params", "reproduce", "run"]
