"""Scenario presets, comparison driver, and deterministic output writers.

A scenario fixes the two media, the fluid pair, the block dimension, the
fracture-saturation trajectory driving the block walls, and the report
grid.  run_comparison evaluates the matrix-fracture exchange for any mix
of methods: resolved nonlinear blocks ("nlin"), the two linearizations
("clin", "vlin"), and the two effective convolution sources
("effective-I", "effective-II").  Block series carry their delta and are
compared per delta; effective series are already the delta -> 0 limit.

All CSV output formats floats with repr(), so repeated runs of the same
configuration produce byte-identical files.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.integrate import trapezoid

from . import constitutive as con
from . import effective as eff
from . import fvsolver as fv
from .imbibition import (EXCHANGE_METHODS, BlockProblem, ExchangeSeries,
                         exchange_from_flux, exchange_from_volume,
                         run_trajectory)
from .linearized import run_constant_linearized, run_variable_linearized
from .timegrid import midpoints, uniform_times

DAY = 86400.0

DEFAULT_DELTAS = (0.3, 0.2, 0.1, 0.05, 0.01, 0.001)


@dataclass(frozen=True)
class ScenarioConfig:
    """Block-exchange comparison scenario (SI units, times in days)."""

    name: str
    matrix_pr: float = 1.0e5
    matrix_n: float = 2.0
    matrix_porosity: float = 0.35
    matrix_permeability: float = 1.0e-13
    fracture_pr: float = 1.0e4
    fracture_n: float = 2.0
    fracture_porosity: float = 0.2
    fracture_permeability: float = 1.0e-13
    mu_w: float = 1.0e-3
    mu_n: float = 2.0e-3
    dimension: int = 2
    deltas: tuple = DEFAULT_DELTAS
    trajectory: str = "ramp"
    trajectory_args: dict = field(default_factory=dict)
    t_end_days: float = 10.0
    n_steps: int = 200
    mesh_cells: int = 64
    methods: tuple = EXCHANGE_METHODS

    def cset(self) -> con.ConstitutiveSet:
        return con.ConstitutiveSet(
            matrix=con.MediumProps(
                porosity=self.matrix_porosity,
                permeability=self.matrix_permeability,
                vg=con.VanGenuchtenParams(p_r=self.matrix_pr,
                                          n=self.matrix_n)),
            fracture=con.MediumProps(
                porosity=self.fracture_porosity,
                permeability=self.fracture_permeability,
                vg=con.VanGenuchtenParams(p_r=self.fracture_pr,
                                          n=self.fracture_n)),
            fluids=con.FluidPair(mu_w=self.mu_w, mu_n=self.mu_n))

    def times(self) -> np.ndarray:
        return uniform_times(self.t_end_days * DAY, self.n_steps)

    def boundary(self):
        return make_trajectory(self.trajectory, **self.trajectory_args)

    def block_problem(self, delta: float) -> BlockProblem:
        return BlockProblem(delta=delta, dimension=self.dimension,
                            cset=self.cset(), boundary=self.boundary(),
                            times=self.times(),
                            mesh_cells=self.mesh_cells)


def make_trajectory(kind: str, **args):
    """Fracture-saturation drive S_f(t), t in seconds.

    "ramp": start + min(slope_per_day * t_days, cap), a linear fill that
    plateaus once the increment reaches cap.  "sine": mean + amp *
    sin(2 pi t_days / period_days), unclamped (endpoint saturations are
    handled by the constitutive clipping).  "step": jump at t = 0+.
    """
    if kind == "ramp":
        start = args.get("start", 0.05)
        slope = args.get("slope_per_day", 0.1)
        cap = args.get("cap", 0.9)

        def ramp(t):
            return start + min(slope * t / DAY, cap)
        return ramp
    if kind == "sine":
        mean = args.get("mean", 0.5)
        amp = args.get("amp", 0.5)
        period_days = args.get("period_days", 10.0)

        def sine(t):
            return mean + amp * float(np.sin(2.0 * np.pi * t
                                             / (period_days * DAY)))
        return sine
    if kind == "step":
        s0 = args.get("s_before", 0.05)
        s1 = args.get("s_after", 0.95)

        def step(t):
            return s1 if t > 0.0 else s0
        return step
    raise ValueError(f"unknown trajectory kind {kind!r}")


_RAMP_ARGS = {"start": 0.05, "slope_per_day": 0.1, "cap": 0.9}
_SINE_ARGS = {"mean": 0.5, "amp": 0.5, "period_days": 10.0}

PRESETS = {
    "sim1": ScenarioConfig(name="sim1", trajectory_args=_RAMP_ARGS),
    "strong-contrast": ScenarioConfig(name="strong-contrast",
                                      matrix_pr=1.0e6,
                                      trajectory_args=_RAMP_ARGS),
    "equal-pc": ScenarioConfig(name="equal-pc", fracture_pr=1.0e5,
                               trajectory_args=_RAMP_ARGS),
    "nonmonotone": ScenarioConfig(name="nonmonotone", trajectory="sine",
                                  trajectory_args=_SINE_ARGS),
}


def list_presets() -> list:
    return sorted(PRESETS)


def get_preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: "
                         f"{', '.join(list_presets())}") from None


def load_config(path: str) -> ScenarioConfig:
    """Build a scenario from a YAML file; a "preset" key selects the base
    configuration and the remaining keys override its fields."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    base = PRESETS[raw.pop("preset")] if "preset" in raw else \
        ScenarioConfig(name=raw.get("name", "custom"))
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("deltas", "methods"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return dataclasses.replace(base, **raw)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["deltas"] = list(cfg.deltas)
    out["methods"] = list(cfg.methods)
    return out


# ---------------------------------------------------------------------------
# method evaluation

def _effective_series(cfg: ScenarioConfig, method: str) -> ExchangeSeries:
    cset = cfg.cset()
    times = cfg.times()
    boundary = cfg.boundary()
    wall = np.array([float(cset.transfer(boundary(t))) for t in times])
    phi_m = cset.matrix.porosity
    k_m = cset.matrix.permeability
    if method == "effective-I":
        c = eff.fixed_kernel_constant(cfg.dimension, phi_m, k_m,
                                      cset.alpha_bar())
        values = eff.exchange_fixed_kernel(wall, times, c)
    else:
        c = eff.warped_kernel_constant(cfg.dimension, phi_m, k_m)
        alpha = eff.running_range_alpha(wall, cset.matrix.vg, cset.fluids,
                                        cset.matrix_table())
        values = eff.exchange_warped_kernel(wall, alpha, times, c)
    return ExchangeSeries(midpoints(times), values, method, 0.0,
                          divided_by_delta=True)


def run_method(cfg: ScenarioConfig, method: str, delta: float | None = None,
               use_flux: bool = False) -> ExchangeSeries:
    """Exchange series for one method; block methods need a delta.

    Block series use the volume form of the exchange by default (the flux
    form agrees to solver tolerance and is available via use_flux).
    """
    if method in ("effective-I", "effective-II"):
        return _effective_series(cfg, method)
    if delta is None:
        raise ValueError(f"method {method!r} needs a block delta")
    problem = cfg.block_problem(delta)
    if method == "nlin":
        sol = run_trajectory(problem)
    elif method == "clin":
        sol = run_constant_linearized(problem)
    elif method == "vlin":
        sol, _ = run_variable_linearized(problem)
    else:
        raise ValueError(f"unknown method {method!r}")
    make = exchange_from_flux if use_flux else exchange_from_volume
    return make(sol, problem, method=method)


def run_comparison(cfg: ScenarioConfig, methods: tuple | None = None,
                   deltas: tuple | None = None) -> dict:
    """Evaluate methods x deltas; returns {(method, delta): series} with
    effective methods keyed once under delta = 0.0."""
    methods = cfg.methods if methods is None else methods
    deltas = cfg.deltas if deltas is None else deltas
    if not methods:
        raise ValueError("no methods requested")
    unknown = set(methods) - set(EXCHANGE_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; choose from "
                         f"{', '.join(EXCHANGE_METHODS)}")
    if not deltas and not set(methods) <= {"effective-I", "effective-II"}:
        raise ValueError("block methods need at least one delta")
    out: dict = {}
    for method in methods:
        if method in ("effective-I", "effective-II"):
            out[(method, 0.0)] = run_method(cfg, method)
            continue
        for delta in deltas:
            out[(method, delta)] = run_method(cfg, method, delta)
    return out


def compare_series(a: ExchangeSeries, b: ExchangeSeries,
                   t_lo: float | None = None, t_hi: float | None = None,
                   norm: str = "l2") -> float:
    """Relative deviation of a from the reference b on the window overlap.

    Series are compared per delta (block series are divided by their
    delta first), with a interpolated onto b's samples; "l2" integrates
    with trapezoid weights, "sup" takes the max ratio.
    """
    av, bv = a.per_delta(), b.per_delta()
    lo = max(av.times[0], bv.times[0], -np.inf if t_lo is None else t_lo)
    hi = min(av.times[-1], bv.times[-1], np.inf if t_hi is None else t_hi)
    bw = bv.restricted(lo, hi)
    if len(bw.times) < 2:
        raise ValueError("comparison window holds fewer than two samples")
    ai = np.interp(bw.times, av.times, av.values)
    diff = ai - bw.values
    if norm == "sup":
        return float(np.abs(diff).max() / np.abs(bw.values).max())
    if norm != "l2":
        raise ValueError("norm must be 'l2' or 'sup'")
    num = trapezoid(diff ** 2, bw.times)
    den = trapezoid(bw.values ** 2, bw.times)
    return float(np.sqrt(num / den))


def comparison_rows(results: dict, t_lo: float, t_hi: float,
                    norms: tuple = ("l2", "sup")) -> list:
    """Report rows for a run_comparison result over window [t_lo, t_hi] (s).

    Three row families: every non-reference series against the resolved
    blocks at the same delta, every series against the fixed-kernel
    effective source, and the delta sweep within each block method
    (consecutive deltas, coarser measured against finer).
    """
    rows = []

    def add(a_key, b_key):
        for norm in norms:
            rows.append({
                "method": a_key[0], "delta": float(a_key[1]),
                "reference": b_key[0], "ref_delta": float(b_key[1]),
                "t_lo_days": t_lo / DAY, "t_hi_days": t_hi / DAY,
                "norm": norm,
                "value": compare_series(results[a_key], results[b_key],
                                        t_lo, t_hi, norm)})

    keys = sorted(results)
    for key in keys:
        ref = (("nlin", key[1]))
        if key[0] != "nlin" and key[1] > 0.0 and ref in results:
            add(key, ref)
    eff_key = ("effective-I", 0.0)
    if eff_key in results:
        for key in keys:
            if key != eff_key:
                add(key, eff_key)
    for method in sorted({m for m, d in keys if d > 0.0}):
        ds = sorted((d for m, d in keys if m == method and d > 0.0),
                    reverse=True)
        for coarse, fine in zip(ds, ds[1:]):
            add((method, coarse), (method, fine))
    return rows


# ---------------------------------------------------------------------------
# effective fracture-system flood scenario

@dataclass(frozen=True)
class FloodConfig:
    """Water flood of the effective fracture continuum (2D square)."""

    name: str = "flood"
    scenario: str = "sim1"            # media preset for the two media
    nx: int = 32
    ny: int = 32
    lx: float = 10.0
    ly: float = 10.0
    source_model: str = "fixed"       # "fixed" | "warped" | "none"
    inflow_rate: float = 1.5e-6       # wetting rate on xmin [m/s]
    outlet_saturation: float = 0.05
    outlet_pressure_n: float = 1.0e6
    s_init: float = 0.05
    pn_init: float = 1.0e6
    t_end_days: float = 10.0
    n_steps: int = 200
    snapshot_days: tuple = (2.5, 5.0, 10.0)


def build_flood(cfg: FloodConfig):
    """(solver, times, snapshot_times) for a flood configuration."""
    scen = get_preset(cfg.scenario)
    cset = scen.cset()
    grid = fv.build_grid(cfg.nx, cfg.ny, cfg.lx, cfg.ly)
    if cfg.source_model == "none":
        source = fv.SourceSpec(model="none")
    elif cfg.source_model == "fixed":
        source = fv.SourceSpec(model="fixed", constant=eff.fixed_kernel_constant(
            grid.dimension, cset.matrix.porosity,
            cset.matrix.permeability, cset.alpha_bar()))
    else:
        source = fv.SourceSpec(model="warped", constant=eff.warped_kernel_constant(
            grid.dimension, cset.matrix.porosity, cset.matrix.permeability))
    params = fv.FlowParams(
        cset=cset, phi_f=cset.fracture.porosity,
        k_star=fv.effective_permeability(cset.fracture.permeability,
                                         grid.dimension),
        source=source)
    bcs = {"xmin": fv.BoundarySpec(kind="inflow",
                                   wetting_rate=cfg.inflow_rate),
           "xmax": fv.BoundarySpec(kind="dirichlet",
                                   saturation=cfg.outlet_saturation,
                                   pressure_n=cfg.outlet_pressure_n)}
    solver = fv.FractureFlowSolver(grid, params, bcs)
    times = uniform_times(cfg.t_end_days * DAY, cfg.n_steps)
    snap_days = sorted({d for d in cfg.snapshot_days
                        if d <= cfg.t_end_days} | {cfg.t_end_days})
    return solver, times, tuple(d * DAY for d in snap_days)


def load_flood_config(path: str) -> FloodConfig:
    """Build a flood configuration from a YAML file of FloodConfig keys."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    known = {f.name for f in dataclasses.fields(FloodConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown flood config keys: {sorted(unknown)}")
    if "snapshot_days" in raw:
        raw["snapshot_days"] = tuple(raw["snapshot_days"])
    return dataclasses.replace(FloodConfig(), **raw)


def run_flood(cfg: FloodConfig, record_sources: bool = False) -> fv.FlowResult:
    solver, times, snaps = build_flood(cfg)
    return solver.run(cfg.s_init, cfg.pn_init, times,
                      record_sources=record_sources, snapshot_times=snaps)


# ---------------------------------------------------------------------------
# deterministic writers (floats via repr for byte-stable output)

def _fmt(x) -> str:
    return repr(float(x))


def write_exchange_csv(path: str, series_list) -> None:
    """Samples of all series, one row each, per-delta normalization:
    time_days,q_w_per_delta,method,delta."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time_days,q_w_per_delta,method,delta\n")
        for series in series_list:
            sd = series.per_delta()
            for t, v in zip(sd.times, sd.values):
                fh.write(f"{_fmt(t / DAY)},{_fmt(v)},{series.method},"
                         f"{_fmt(series.delta)}\n")


def read_exchange_csv(path: str) -> list:
    """Parse an exchange CSV back into ExchangeSeries (one per method,
    delta pair, in file order)."""
    groups: dict = {}
    order: list = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != ["time_days", "q_w_per_delta", "method", "delta"]:
            raise ValueError(f"{path} is not an exchange CSV")
        for line in fh:
            t, q, method, delta = line.strip().split(",")
            key = (method, float(delta))
            if key not in groups:
                groups[key] = ([], [])
                order.append(key)
            groups[key][0].append(float(t) * DAY)
            groups[key][1].append(float(q))
    return [ExchangeSeries(np.array(groups[k][0]), np.array(groups[k][1]),
                           k[0], k[1], divided_by_delta=True)
            for k in order]


def write_comparison_csv(path: str, rows) -> None:
    """Comparison metrics: one row per (series, reference) pair."""
    cols = ("method", "delta", "reference", "ref_delta", "t_lo_days",
            "t_hi_days", "norm", "value")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(
                _fmt(row[c]) if isinstance(row[c], float) else str(row[c])
                for c in cols) + "\n")


def write_field_csv(path: str, grid: fv.StructuredGrid, saturation,
                    pressure_w, pressure_n) -> None:
    """Cell fields: cell,x,y,saturation,pressure_w,pressure_n."""
    centers = grid.centers
    y = centers[:, 1] if grid.dimension == 2 else np.zeros(len(centers))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("cell,x,y,saturation,pressure_w,pressure_n\n")
        for c in range(grid.n_cells):
            fh.write(f"{c},{_fmt(centers[c, 0])},{_fmt(y[c])},"
                     f"{_fmt(saturation[c])},{_fmt(pressure_w[c])},"
                     f"{_fmt(pressure_n[c])}\n")


def write_mass_balance_csv(path: str, steps) -> None:
    """Per-step balance log of a flood run."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,time_days,dt_days,newton_iters,water_accum,"
                 "water_source,water_boundary,nonwetting_boundary,"
                 "water_defect,volume_defect,clamped\n")
        for i, st in enumerate(steps):
            fh.write(f"{i},{_fmt(st.t / DAY)},{_fmt(st.dt / DAY)},"
                     f"{st.newton_iters},{_fmt(st.water_accum)},"
                     f"{_fmt(st.water_source)},{_fmt(st.water_boundary)},"
                     f"{_fmt(st.nonwetting_boundary)},"
                     f"{_fmt(st.water_defect)},{_fmt(st.volume_defect)},"
                     f"{int(st.clamped)}\n")


def write_manifest(path: str, config: dict, outputs: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump({"config": config, "outputs": sorted(outputs)}, fh,
                       sort_keys=True)
