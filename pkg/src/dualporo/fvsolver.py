"""Finite-volume solver for the effective fracture-system two-phase flow.

Cell-centered two-point flux scheme on a uniform structured grid (1D/2D)
for

    phi_f dS/dt - div(k* lam_w(S) grad P_w) = Q_w,
   -phi_f dS/dt - div(k* lam_n(S) grad P_n) = -Q_w,
    P_w = P_n - Pc_f(S),      k* = k_f (d-1)/d,

implicit Euler in time with Newton on the per-cell unknowns (S, P_n).
The wetting pressure is eliminated through the capillary relation, so the
capillary closure holds exactly by construction.  Face mobilities are
upwinded phase by phase on the sign of the phase-pressure difference
(ties take the lower cell index; the flux vanishes there anyway), and the
Jacobian is analytic with the upwind choice held fixed per iteration.

The matrix-exchange source Q_w is the sqrt-kernel convolution of the
cell's own wall-value history p^k = transfer(S^k).  Writing the quadrature
with the newest term separated gives

    Q_w = -(impl / dt) (p(S_new) - p^0) + expl,

where for the fixed kernel impl = 2 C sqrt(dt) and expl collects the
history through the difference weights D^n_k, while for the time-warped
kernel impl = 2 C sqrt(alpha_hat dt) with alpha_hat frozen at its
beginning-of-step value (running extrema of the wall history), which
keeps the Newton system well defined; the frozen value is committed to
the history once the step is accepted.  Histories live on the realized
(possibly substepped) time grid, so step halving stays consistent with
the convolution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import constitutive as con
from .constitutive import ConstitutiveSet
from .effective import QuadratureTable
from .imbibition import NewtonFailure


def effective_permeability(k_f: float, dimension: int) -> float:
    """k* = k_f (d-1)/d from the fracture-sheet volume fraction."""
    return k_f * (dimension - 1) / dimension


@dataclass(frozen=True)
class StructuredGrid:
    """Uniform cell-centered grid; unit thickness in suppressed directions.

    Cells are numbered x-fastest-last: flat index = ix * ny + iy.  Interior
    faces store (lower cell, higher cell, area / center distance); each
    boundary side stores its cell row, the half-cell transmissibility
    area / (h/2), and the per-cell face area.
    """

    dimension: int
    shape: tuple
    lengths: tuple
    cell_volume: float
    centers: np.ndarray
    face_left: np.ndarray
    face_right: np.ndarray
    face_trans: np.ndarray
    boundary: dict

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))


def build_grid(nx: int, ny: int = 1, lx: float = 1.0,
               ly: float = 1.0) -> StructuredGrid:
    dimension = 1 if ny == 1 else 2
    if nx < 1 or ny < 1:
        raise ValueError("grid must have at least one cell per direction")
    if dimension == 1:
        ly = 1.0
    hx, hy = lx / nx, ly / ny
    idx = np.arange(nx * ny).reshape(nx, ny)

    fl, fr, ft = [], [], []
    if nx > 1:                                   # faces normal to x
        fl.append(idx[:-1, :].reshape(-1))
        fr.append(idx[1:, :].reshape(-1))
        ft.append(np.full((nx - 1) * ny, hy / hx))
    if ny > 1:                                   # faces normal to y
        fl.append(idx[:, :-1].reshape(-1))
        fr.append(idx[:, 1:].reshape(-1))
        ft.append(np.full(nx * (ny - 1), hx / hy))
    empty_i = np.empty(0, dtype=int)
    face_left = np.concatenate(fl) if fl else empty_i
    face_right = np.concatenate(fr) if fr else empty_i
    face_trans = np.concatenate(ft) if ft else np.empty(0)

    boundary = {
        "xmin": (idx[0, :].copy(), 2.0 * hy / hx, hy),
        "xmax": (idx[-1, :].copy(), 2.0 * hy / hx, hy),
    }
    if ny > 1:
        boundary["ymin"] = (idx[:, 0].copy(), 2.0 * hx / hy, hx)
        boundary["ymax"] = (idx[:, -1].copy(), 2.0 * hx / hy, hx)

    xc = (np.arange(nx) + 0.5) * hx
    yc = (np.arange(ny) + 0.5) * hy
    gx, gy = np.meshgrid(xc, yc, indexing="ij")
    centers = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1)
    if dimension == 1:
        centers = centers[:, :1]
    return StructuredGrid(dimension=dimension, shape=(nx, ny),
                          lengths=(lx, ly), cell_volume=hx * hy,
                          centers=centers, face_left=face_left,
                          face_right=face_right, face_trans=face_trans,
                          boundary=boundary)


@dataclass(frozen=True)
class BoundarySpec:
    """One side's condition.

    "noflow" (default), "dirichlet" with ghost values (saturation,
    pressure_n), or "inflow" with a wetting volumetric rate per unit
    boundary area [m/s], positive into the domain, no nonwetting flux.
    """

    kind: str = "noflow"
    saturation: float = 0.0
    pressure_n: float = 0.0
    wetting_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("noflow", "dirichlet", "inflow"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")


@dataclass(frozen=True)
class SourceSpec:
    """Matrix-exchange source: "fixed" / "warped" sqrt kernel or "none".

    The constant is the kernel prefactor C; build it with
    effective.fixed_kernel_constant or effective.warped_kernel_constant.
    """

    model: str = "fixed"
    constant: float = 0.0

    def __post_init__(self) -> None:
        if self.model not in ("fixed", "warped", "none"):
            raise ValueError(f"unknown source model {self.model!r}")


@dataclass(frozen=True)
class FlowParams:
    cset: ConstitutiveSet
    phi_f: float
    k_star: float
    source: SourceSpec = SourceSpec(model="none")
    newton_rtol: float = 1.0e-10
    newton_max_iter: int = 30
    max_halvings: int = 10
    max_ds: float = 0.2           # damping cap on saturation updates
    s_clamp: float = con.SAT_EPS


@dataclass
class FlowState:
    """Current fields plus per-cell histories on the realized time grid."""

    t: float
    saturation: np.ndarray
    pressure_n: np.ndarray
    times_hist: list = field(default_factory=list)
    wall_hist: list = field(default_factory=list)    # p^k = transfer(S^k)
    alpha_hist: list = field(default_factory=list)   # committed alpha-hat^k
    run_min: np.ndarray | None = None                # extrema of wall values
    run_max: np.ndarray | None = None


def upwind_phase_mobility(p_left, p_right, lam_left, lam_right):
    """Face mobility by phase-pressure upwinding.

    Returns (lam_face, from_left); ties take the left (lower-index) cell.
    """
    from_left = p_left >= p_right
    return np.where(from_left, lam_left, lam_right), from_left


@dataclass(frozen=True)
class _DirichletGhost:
    pw: float
    pn: float
    lam_w: float
    lam_n: float


class _Assembler:
    """Residuals and analytic Jacobian for one implicit step."""

    def __init__(self, grid: StructuredGrid, params: FlowParams, bcs: dict):
        unknown = set(bcs) - set(grid.boundary)
        if unknown:
            raise ValueError(f"boundary sides not on this grid: {unknown}")
        self.grid = grid
        self.params = params
        self.bcs = {side: bcs.get(side, BoundarySpec())
                    for side in grid.boundary}
        vg = params.cset.fracture.vg
        self.ghosts = {}
        for side, bc in self.bcs.items():
            if bc.kind == "dirichlet":
                pc_b = float(con.capillary_pressure(bc.saturation, vg))
                lw, ln, _ = con.mobilities(bc.saturation, vg,
                                           params.cset.fluids)
                self.ghosts[side] = _DirichletGhost(
                    pw=bc.pressure_n - pc_b, pn=bc.pressure_n,
                    lam_w=float(lw), lam_n=float(ln))

    def assemble(self, s, pn, s_old, dt, impl, expl, wall_ref):
        """Residual vector (R_w, R_n) and Jacobian at the iterate (s, pn).

        The source enters as Q_w = -(impl/dt) (transfer(s) - wall_ref)
        + expl, all per-cell arrays.
        """
        g = self.grid
        par = self.params
        m = g.n_cells
        vol = g.cell_volume
        kst = par.k_star
        cset = par.cset
        vg = cset.fracture.vg

        pc = np.asarray(con.capillary_pressure(s, vg))
        dpc = np.asarray(con.capillary_slope(s, vg))
        pw = pn - pc
        lam_w, lam_n, _ = con.mobilities(s, vg, cset.fluids)
        dlam_w, dlam_n = con.mobility_slopes(s, vg, cset.fluids)

        p_wall = np.asarray(cset.transfer(s))
        dp_wall = np.asarray(con.transfer_slope(s, cset.matrix.vg, vg))
        q_w = -(impl / dt) * (p_wall - wall_ref) + expl
        dq_w = -(impl / dt) * dp_wall

        acc = par.phi_f * vol / dt
        r_w = acc * (s - s_old) - vol * q_w
        r_n = -acc * (s - s_old) + vol * q_w

        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(np.asarray(r, dtype=int).ravel())
            cols.append(np.asarray(c, dtype=int).ravel())
            vals.append(np.asarray(v, dtype=float).ravel())

        cells = np.arange(m)
        add(cells, cells, np.full(m, acc) - vol * dq_w)       # dR_w/dS
        add(cells + m, cells, np.full(m, -acc) + vol * dq_w)  # dR_n/dS

        kl, kr = g.face_left, g.face_right
        if len(kl):
            tk = kst * g.face_trans
            for roff, pres, lam, dlam, with_pc in (
                    (0, pw, lam_w, dlam_w, True),
                    (m, pn, lam_n, dlam_n, False)):
                lam_f, from_left = upwind_phase_mobility(
                    pres[kl], pres[kr], lam[kl], lam[kr])
                up = np.where(from_left, kl, kr)
                dp = pres[kr] - pres[kl]
                flux = tk * lam_f * dp                # into the lower cell
                r_ph = r_w if roff == 0 else r_n
                np.add.at(r_ph, kl, -flux)
                np.add.at(r_ph, kr, flux)
                # pressure coupling (dP_w/dP_n = dP_n/dP_n = 1)
                add(kl + roff, kr + m, -tk * lam_f)
                add(kl + roff, kl + m, tk * lam_f)
                add(kr + roff, kl + m, -tk * lam_f)
                add(kr + roff, kr + m, tk * lam_f)
                # upwind mobility
                add(kl + roff, up, -tk * dlam[up] * dp)
                add(kr + roff, up, tk * dlam[up] * dp)
                if with_pc:                            # dP_w/dS = -Pc'
                    add(kl + roff, kr, tk * lam_f * dpc[kr])
                    add(kl + roff, kl, -tk * lam_f * dpc[kl])
                    add(kr + roff, kl, tk * lam_f * dpc[kl])
                    add(kr + roff, kr, -tk * lam_f * dpc[kr])

        for side, (bcells, btr, area) in g.boundary.items():
            bc = self.bcs[side]
            if bc.kind == "noflow":
                continue
            if bc.kind == "inflow":
                r_w[bcells] -= bc.wetting_rate * area
                continue
            ghost = self.ghosts[side]
            tk = kst * btr
            for roff, pres, lam, dlam, lam_b, p_b, with_pc in (
                    (0, pw, lam_w, dlam_w, ghost.lam_w, ghost.pw, True),
                    (m, pn, lam_n, dlam_n, ghost.lam_n, ghost.pn, False)):
                lam_f, cell_up = upwind_phase_mobility(
                    pres[bcells], p_b, lam[bcells],
                    np.full(len(bcells), lam_b))
                dp = p_b - pres[bcells]
                flux = tk * lam_f * dp                 # into the cell
                r_ph = r_w if roff == 0 else r_n
                np.add.at(r_ph, bcells, -flux)
                add(bcells + roff, bcells + m, tk * lam_f)
                add(bcells + roff, bcells,
                    -tk * np.where(cell_up, dlam[bcells], 0.0) * dp)
                if with_pc:
                    add(bcells + roff, bcells, -tk * lam_f * dpc[bcells])

        jac = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows),
                                    np.concatenate(cols))),
            shape=(2 * m, 2 * m)).tocsc()
        return np.concatenate((r_w, r_n)), jac

    def boundary_rates(self, s, pn):
        """Into-domain volumetric boundary rates (wetting, nonwetting),
        evaluated with the same formulas the residual uses."""
        g = self.grid
        par = self.params
        vg = par.cset.fracture.vg
        pw = pn - np.asarray(con.capillary_pressure(s, vg))
        lam_w, lam_n, _ = con.mobilities(s, vg, par.cset.fluids)
        rate_w = rate_n = 0.0
        for side, (bcells, btr, area) in g.boundary.items():
            bc = self.bcs[side]
            if bc.kind == "noflow":
                continue
            if bc.kind == "inflow":
                rate_w += bc.wetting_rate * area * len(bcells)
                continue
            ghost = self.ghosts[side]
            tk = par.k_star * btr
            for pres, lam, lam_b, p_b, is_w in (
                    (pw, lam_w, ghost.lam_w, ghost.pw, True),
                    (pn, lam_n, ghost.lam_n, ghost.pn, False)):
                lam_f, _ = upwind_phase_mobility(
                    pres[bcells], p_b, lam[bcells],
                    np.full(len(bcells), lam_b))
                total = float((tk * lam_f * (p_b - pres[bcells])).sum())
                if is_w:
                    rate_w += total
                else:
                    rate_n += total
        return rate_w, rate_n


@dataclass
class StepReport:
    """Per accepted (sub)step diagnostics; volumes in m^3 over the step.

    water_defect = accum - source - boundary and volume_defect =
    water_boundary + nonwetting_boundary both vanish with the Newton
    residual (bounded by newton_rtol times the total pore volume).
    """

    t: float
    dt: float
    newton_iters: int
    residual: float
    clamped: bool
    water_accum: float
    water_source: float
    water_boundary: float
    nonwetting_boundary: float
    water_defect: float
    volume_defect: float


@dataclass
class FlowResult:
    times: np.ndarray             # requested report grid
    times_hist: np.ndarray        # realized (possibly substepped) grid
    saturation: np.ndarray        # final fields
    pressure_n: np.ndarray
    pressure_w: np.ndarray
    steps: list
    pore_volume: float
    saturation_history: np.ndarray        # (n_hist+1, m)
    wall_history: np.ndarray              # (n_hist+1, m) transfer(S)
    alpha_history: np.ndarray             # (n_hist+1, m) committed alpha-hat
    source_history: np.ndarray | None     # (n_hist, m) realized Q_w [1/s]
    snapshots: dict               # time -> (S, P_w, P_n)

    def max_defects(self):
        """Max per-step |water_defect| and |volume_defect| relative to the
        total fracture pore volume."""
        dw = max((abs(st.water_defect) for st in self.steps), default=0.0)
        dv = max((abs(st.volume_defect) for st in self.steps), default=0.0)
        return dw / self.pore_volume, dv / self.pore_volume


class FractureFlowSolver:
    def __init__(self, grid: StructuredGrid, params: FlowParams,
                 bcs: dict | None = None):
        self.grid = grid
        self.params = params
        self.assembler = _Assembler(grid, params, bcs or {})
        self.bcs = self.assembler.bcs

    def _source_terms(self, state: FlowState, dt: float):
        """(impl, expl, wall_ref, alpha_new) such that the step's source is
        Q_w = -(impl/dt) (transfer(S_new) - wall_ref) + expl."""
        par = self.params
        m = self.grid.n_cells
        src = par.source
        zeros = np.zeros(m)
        if src.model == "none":
            return zeros, zeros, zeros, None
        times = np.array(state.times_hist + [state.t + dt])
        n = len(times) - 2                     # completed steps
        p_hist = np.stack(state.wall_hist)     # (n+1, m)
        p0 = p_hist[0]
        if src.model == "fixed":
            impl = np.full(m, 2.0 * src.constant * np.sqrt(dt))
            if n == 0:
                return impl, zeros, p0, None
            d = QuadratureTable(times, src.constant).d_row(n)
            expl = np.tensordot(d, p_hist - p0[None, :], axes=(0, 0)) / dt
            return impl, expl, p0, None

        # warped kernel: freeze alpha-hat at beginning-of-step extrema
        a_new = np.asarray(con.range_diffusivity(
            state.run_min, state.run_max, par.cset.matrix.vg,
            par.cset.fluids, par.cset.matrix_table()), dtype=float)
        impl = 2.0 * src.constant * np.sqrt(a_new * dt)
        if n == 0:
            return impl, zeros, p0, a_new
        alpha = np.stack(state.alpha_hist + [a_new])     # (n+2, m)
        dts = np.diff(times)
        w = alpha[1:] * dts[:, None]                     # w_l, l = 1..n+1
        dnum = w[:n] * (p_hist[1:] - p0[None, :])        # k = 1..n
        u_next = np.vstack((np.cumsum(w[::-1], axis=0)[::-1],
                            np.zeros((1, m))))           # U^{n+1}_k
        u_prev = np.vstack((np.cumsum(w[:n][::-1], axis=0)[::-1],
                            np.zeros((1, m))))           # U^n_k
        den_next = np.sqrt(u_next[:n]) + np.sqrt(u_next[1:n + 1])
        den_prev = np.sqrt(u_prev[:n]) + np.sqrt(u_prev[1:n + 1])
        term_next = np.divide(dnum, den_next, out=np.zeros_like(dnum),
                              where=den_next > 0.0).sum(axis=0)
        term_prev = np.divide(dnum, den_prev, out=np.zeros_like(dnum),
                              where=den_prev > 0.0).sum(axis=0)
        expl = -2.0 * src.constant * (term_next - term_prev) / dt
        return impl, expl, p0, a_new

    def _try_step(self, state: FlowState, dt: float):
        par = self.params
        m = self.grid.n_cells
        impl, expl, wall_ref, alpha_new = self._source_terms(state, dt)

        s = state.saturation.copy()
        pn = state.pressure_n.copy()
        s_old = state.saturation
        scale = par.phi_f * self.grid.cell_volume / dt
        clamped = False
        res = np.inf
        for it in range(par.newton_max_iter + 1):
            r, jac = self.assembler.assemble(s, pn, s_old, dt, impl, expl,
                                             wall_ref)
            res = float(np.abs(r).max()) / scale
            if res <= par.newton_rtol:
                return (s, pn, it, res, clamped, impl, expl, wall_ref,
                        alpha_new)
            if it == par.newton_max_iter:
                break
            try:
                dx = splu(jac).solve(-r)
            except RuntimeError as exc:        # singular factorization
                raise NewtonFailure(str(exc)) from exc
            if not np.isfinite(dx).all():
                raise NewtonFailure("non-finite Newton update")
            ds = dx[:m]
            fac = min(1.0, par.max_ds / max(float(np.abs(ds).max()), 1e-300))
            s_new = s + fac * ds
            lo, hi = par.s_clamp, 1.0 - par.s_clamp
            clamped = bool((s_new < lo).any() or (s_new > hi).any())
            s = np.clip(s_new, lo, hi)
            pn = pn + fac * dx[m:]
        raise NewtonFailure(
            f"no convergence in {par.newton_max_iter} Newton iterations "
            f"(scaled residual {res:.3e})")

    def run(self, s_init, pn_init, times, record_sources: bool = False,
            snapshot_times: tuple = ()) -> FlowResult:
        g = self.grid
        par = self.params
        m = g.n_cells
        s = (np.full(m, float(s_init)) if np.isscalar(s_init)
             else np.array(s_init, dtype=float))
        pn = (np.full(m, float(pn_init)) if np.isscalar(pn_init)
              else np.array(pn_init, dtype=float))
        times = np.asarray(times, dtype=float)
        if s.shape != (m,) or pn.shape != (m,):
            raise ValueError("initial fields must match the cell count")

        p_wall = np.asarray(par.cset.transfer(s))
        a0 = np.asarray(par.cset.matrix_alpha(p_wall), dtype=float)
        state = FlowState(
            t=float(times[0]), saturation=s, pressure_n=pn,
            times_hist=[float(times[0])], wall_hist=[p_wall],
            alpha_hist=[a0 * np.ones(m)],
            run_min=p_wall.copy(), run_max=p_wall.copy())

        steps: list = []
        s_hist = [s.copy()]
        sources: list | None = [] if record_sources else None
        snapshots: dict = {}
        snap_left = sorted(snapshot_times)

        for k in range(len(times) - 1):
            t_target = float(times[k + 1])
            dt_plan = t_target - state.t
            min_dt = dt_plan / 2 ** par.max_halvings
            while t_target - state.t > 1e-9 * dt_plan:
                dt_try = min(dt_plan, t_target - state.t)
                try:
                    accepted = self._try_step(state, dt_try)
                except NewtonFailure:
                    if dt_try / 2 < min_dt:
                        raise
                    dt_plan = dt_try / 2
                    continue
                self._commit(state, dt_try, accepted, steps, s_hist, sources)
                dt_plan = 2 * dt_try
            state.t = t_target                 # snap off rounding drift
            state.times_hist[-1] = t_target
            while snap_left and state.t >= snap_left[0] * (1 - 1e-12):
                epoch = snap_left.pop(0)
                snapshots[epoch] = self._fields(state)

        s_fin, pw_fin, pn_fin = self._fields(state)
        return FlowResult(
            times=times.copy(), times_hist=np.array(state.times_hist),
            saturation=s_fin, pressure_n=pn_fin, pressure_w=pw_fin,
            steps=steps, pore_volume=par.phi_f * g.cell_volume * m,
            saturation_history=np.stack(s_hist),
            wall_history=np.stack(state.wall_hist),
            alpha_history=np.stack(state.alpha_hist),
            source_history=(np.stack(sources) if sources else None),
            snapshots=snapshots)

    def _fields(self, state: FlowState):
        vg = self.params.cset.fracture.vg
        pw = state.pressure_n - np.asarray(
            con.capillary_pressure(state.saturation, vg))
        return state.saturation.copy(), pw, state.pressure_n.copy()

    def _commit(self, state: FlowState, dt: float, accepted, steps,
                s_hist, sources) -> None:
        (s_new, pn_new, iters, res, clamped, impl, expl, wall_ref,
         alpha_new) = accepted
        par = self.params
        g = self.grid
        p_wall = np.asarray(par.cset.transfer(s_new))
        q_w = -(impl / dt) * (p_wall - wall_ref) + expl

        water_accum = float(par.phi_f * g.cell_volume
                            * (s_new - state.saturation).sum())
        water_source = float(dt * g.cell_volume * q_w.sum())
        rate_w, rate_n = self.assembler.boundary_rates(s_new, pn_new)
        water_bdry = rate_w * dt
        nonwet_bdry = rate_n * dt

        steps.append(StepReport(
            t=state.t + dt, dt=dt, newton_iters=iters, residual=res,
            clamped=clamped, water_accum=water_accum,
            water_source=water_source, water_boundary=water_bdry,
            nonwetting_boundary=nonwet_bdry,
            water_defect=water_accum - water_source - water_bdry,
            volume_defect=water_bdry + nonwet_bdry))
        if sources is not None:
            sources.append(q_w)
        s_hist.append(s_new.copy())

        state.t += dt
        state.saturation = s_new
        state.pressure_n = pn_new
        state.times_hist.append(state.t)
        state.wall_hist.append(p_wall)
        state.alpha_hist.append(
            alpha_new if alpha_new is not None else state.alpha_hist[-1])
        state.run_min = np.minimum(state.run_min, p_wall)
        state.run_max = np.maximum(state.run_max, p_wall)
