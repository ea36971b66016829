"""Finite-difference reference solver for the three-sector air preheater.

Nondimensional model on each sector's unit (phi, z) square, j = 1, 2, 3:

    metal:  dTm_j/dphi = NTU_j (T_j - Tm_j) + (1/Pe_j) d2Tm_j/dz2
    fluid:  dT_j/dz    = NTU_j (Tm_j - T_j)

with fluid inlets T_j(phi, 0) = T_in,j, insulated metal ends dTm_j/dz = 0 at
z = 0, 1, and rotor continuity

    Tm_1(0, z) = Tm_3(1, 1 - z)
    Tm_2(0, z) = Tm_1(1, 1 - z)
    Tm_3(0, z) = Tm_2(1, z)

Each sector is marched in phi with backward Euler, solving metal and fluid on
the new phi line together (central second differences for conduction,
implicit upwind in z for the fluid, second-order one-sided stencils for the
insulated ends).  Sectors are swept in rotor order until the start line of
sector 1 stops changing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve


class AphConvergenceError(RuntimeError):
    def __init__(self, sweeps: int, residual: float):
        super().__init__(f"no convergence after {sweeps} sweeps (last change {residual:.3e})")
        self.sweeps = sweeps
        self.residual = residual


@dataclass(frozen=True)
class AphConfig:
    ntu: tuple[float, float, float] = (5.0, 5.0, 5.0)
    pe: tuple[float, float, float] = (50.0, 50.0, 50.0)
    inlet_temps: tuple[float, float, float] = (1.0, 0.0, 0.0)
    grid: tuple[int, int] = (101, 101)  # (n_phi, n_z)
    tol: float = 1e-8
    max_sweeps: int = 10_000

    def __post_init__(self):
        for name in ("ntu", "pe", "inlet_temps"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 3:
                raise ValueError(f"{name} needs one value per sector")
            object.__setattr__(self, name, vals)
        if not all(v > 0 for v in self.ntu + self.pe):
            raise ValueError("NTU and Pe values must be positive")
        # a zero inlet temperature is the usual nondimensional cold stream
        if not all(v >= 0 for v in self.inlet_temps):
            raise ValueError("inlet temperatures must be non-negative")
        n_phi, n_z = self.grid
        if n_phi < 16 or n_z < 16:
            raise ValueError("grid must be at least 16 x 16")
        object.__setattr__(self, "grid", (int(n_phi), int(n_z)))


@dataclass
class AphSolution:
    phi: np.ndarray
    z: np.ndarray
    fluid: list[np.ndarray]  # T_j, shape (n_phi, n_z)
    metal: list[np.ndarray]  # Tm_j, shape (n_phi, n_z)
    sweeps: int
    residual: float
    history: list[float] = field(default_factory=list, repr=False)


def _line_matrix(ntu: float, pe: float, n: int, dphi: float, dz: float) -> np.ndarray:
    """System for one phi line; unknowns are [Tm_0..Tm_{n-1}, T_0..T_{n-1}]."""
    a = np.zeros((2 * n, 2 * n))
    r = 1.0 / (pe * dz * dz)
    a[0, 0:3] = (-3.0, 4.0, -1.0)
    a[n - 1, n - 3 : n] = (1.0, -4.0, 3.0)
    for k in range(1, n - 1):
        a[k, k] = 1.0 / dphi + ntu + 2.0 * r
        a[k, k - 1] = -r
        a[k, k + 1] = -r
        a[k, n + k] = -ntu
    a[n, n] = 1.0
    for k in range(1, n):
        a[n + k, n + k] = 1.0 / dz + ntu
        a[n + k, n + k - 1] = -1.0 / dz
        a[n + k, k] = -ntu
    return a


def _fluid_march(metal_line: np.ndarray, ntu: float, t_in: float, dz: float) -> np.ndarray:
    t = np.empty_like(metal_line)
    t[0] = t_in
    for k in range(1, t.size):
        t[k] = (t[k - 1] / dz + ntu * metal_line[k]) / (1.0 / dz + ntu)
    return t


class _Sector:
    def __init__(self, ntu, pe, t_in, n_phi, n_z):
        self.ntu, self.t_in = ntu, t_in
        self.n_phi, self.n_z = n_phi, n_z
        self.dphi = 1.0 / (n_phi - 1)
        self.dz = 1.0 / (n_z - 1)
        self.lu = lu_factor(_line_matrix(ntu, pe, n_z, self.dphi, self.dz))

    def march(self, start: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_z
        metal = np.empty((self.n_phi, n))
        fluid = np.empty((self.n_phi, n))
        metal[0] = start
        fluid[0] = _fluid_march(start, self.ntu, self.t_in, self.dz)
        rhs = np.zeros(2 * n)
        for i in range(1, self.n_phi):
            rhs[1 : n - 1] = metal[i - 1, 1 : n - 1] / self.dphi
            rhs[n] = self.t_in
            sol = lu_solve(self.lu, rhs)
            metal[i] = sol[:n]
            fluid[i] = sol[n:]
            fluid[i, 0] = self.t_in  # exact, not merely to solver round-off
        return metal, fluid


def aph_fd_solve(config: AphConfig = AphConfig(), initial_metal: np.ndarray | None = None) -> AphSolution:
    n_phi, n_z = config.grid
    sectors = [
        _Sector(config.ntu[j], config.pe[j], config.inlet_temps[j], n_phi, n_z) for j in range(3)
    ]
    start = np.zeros(n_z) if initial_metal is None else np.array(initial_metal, dtype=np.float64)
    history: list[float] = []
    change = np.inf
    for sweep in range(1, config.max_sweeps + 1):
        m1, f1 = sectors[0].march(start)
        m2, f2 = sectors[1].march(m1[-1][::-1].copy())
        m3, f3 = sectors[2].march(m2[-1].copy())
        new_start = m3[-1][::-1].copy()
        change = float(np.max(np.abs(new_start - start)))
        history.append(change)
        start = new_start
        if change < config.tol:
            break
    else:
        raise AphConvergenceError(config.max_sweeps, change)
    # one more march from the converged start line so all fields are consistent
    m1, f1 = sectors[0].march(start)
    m2, f2 = sectors[1].march(m1[-1][::-1].copy())
    m3, f3 = sectors[2].march(m2[-1].copy())
    return AphSolution(
        phi=np.linspace(0.0, 1.0, n_phi),
        z=np.linspace(0.0, 1.0, n_z),
        fluid=[f1, f2, f3],
        metal=[m1, m2, m3],
        sweeps=sweep,
        residual=change,
        history=history,
    )


def interface_residuals(sol: AphSolution, config: AphConfig) -> dict[str, float]:
    """Max-norm residuals of the inlet, continuity and insulated-end conditions."""
    m1, m2, m3 = sol.metal
    dz = sol.z[1] - sol.z[0]
    out = {
        "inlet": float(
            max(np.max(np.abs(f[:, 0] - t)) for f, t in zip(sol.fluid, config.inlet_temps))
        ),
        "rotor_1_3": float(np.max(np.abs(m1[0] - m3[-1][::-1]))),
        "rotor_2_1": float(np.max(np.abs(m2[0] - m1[-1][::-1]))),
        "rotor_3_2": float(np.max(np.abs(m3[0] - m2[-1]))),
    }
    grads = []
    for m in sol.metal:
        grads.append(np.max(np.abs((-3 * m[:, 0] + 4 * m[:, 1] - m[:, 2]) / (2 * dz))))
        grads.append(np.max(np.abs((3 * m[:, -1] - 4 * m[:, -2] + m[:, -3]) / (2 * dz))))
    out["insulated_ends"] = float(max(grads))
    return out
