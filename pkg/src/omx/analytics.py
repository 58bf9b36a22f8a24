"""Closed-form predictions for the resonant two-mode optomechanical system,
each one backed elsewhere in the package by an exact-numerics counterpart.

The weak-drive photon statistics come from solving the stationary amplitude
equations on the six-state manifold that a weak antisymmetric-mode drive
explores within one mechanical Fock sector: with d = Delta_a - i kappa and

    X_n = 4 d^2 - g0^2 (n + 1),

the occupation probabilities are

    p_{1,0,n} = |4 Omega_a d / X_n|^2,
    p_{2,0,n} = 8 |Omega_a^2 (8 d^2 - g0^2) / (X_n (2 X_n - g0^2))|^2,

which reduce at g0 = 0 to the driven-cavity values Omega^2/|d|^2 and
nbar^2/2. The poles of X_n and 2 X_n - g0^2 sit at the one- and two-photon
dressed resonances Delta_a = +-(g0/2) sqrt(n+1) and
+-g0 sqrt((2n+3)/8), consistent with the (g0/2) sqrt(n_a (n_s+1)(n_m+1))
transition ladder. Thermal averaging uses geometric weights zeta_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import models
from .dynamics import liouvillian
from .hilbert import thermal_dim, thermal_weights
from .params import SystemParams
from .scan import ScanResult

POLE_ATOL = 1e-12


@dataclass
class SixStateResult:
    """Weak-drive occupation probabilities and g2 for one detuning point."""

    delta_a: float
    d: complex
    X_n: np.ndarray
    zeta_n: np.ndarray
    p10n: np.ndarray
    p20n: np.ndarray
    mean_na: float
    g2_zero: float


def six_state_g2(params: SystemParams, n_max: int | None = None) -> SixStateResult:
    """Thermally averaged <n_a> and g2(0) to leading order in the drive.

    n_max defaults to the truncation keeping the zeta_n tail below 1e-6.
    Omega_a rescaling cancels exactly in g2 (the probabilities use
    params.Omega_a, falling back to the weak-drive default 0.01 kappa).
    Raises near the kappa = 0 poles of X_n or 2 X_n - g0^2.
    """
    params.require("Delta_a")
    g0, kappa, nth = params.g0, params.kappa, params.N_th
    omega = params.Omega_a if params.Omega_a else 1e-2 * kappa
    if n_max is None:
        n_max = thermal_dim(nth) - 1
    zeta = thermal_weights(nth, n_max + 1)
    ns = np.arange(n_max + 1)
    d = params.Delta_a - 1j * kappa
    x = 4 * d * d - g0**2 * (ns + 1)
    two_x = 2 * x - g0**2
    if np.abs(x).min() < POLE_ATOL or np.abs(two_x).min() < POLE_ATOL:
        raise ZeroDivisionError(
            f"dressed-resonance pole at Delta_a = {params.Delta_a} (kappa = 0)")
    p1 = np.abs(4 * omega * d / x) ** 2
    p2 = 8 * np.abs(omega**2 * (8 * d * d - g0**2) / (x * two_x)) ** 2
    mean_na = float(zeta @ p1)
    g2 = 2 * float(zeta @ p2) / mean_na**2
    return SixStateResult(params.Delta_a, d, x, zeta, p1, p2, mean_na, g2)


def min_g2_scan(params: SystemParams, g0_grid, nth_list,
                delta_grid=None) -> ScanResult:
    """Minimum of g2(0) over probe detuning, per coupling and temperature.

    The detuning grid must resolve kappa/20 (enforced); ties in the minimum
    go to the smaller |Delta_a|. g2 is even in Delta_a, so only the
    non-negative half axis is scanned and the reported argmin is >= 0.
    """
    g0_grid = np.asarray(g0_grid, dtype=float)
    nth_list = np.asarray(nth_list, dtype=float)
    min_g2 = np.empty(len(g0_grid) * len(nth_list))
    argmin = np.empty_like(min_g2)
    row = 0
    for g0 in g0_grid:
        if delta_grid is None:
            grid = np.arange(0.0, g0 + params.kappa, params.kappa / 20)
        else:
            grid = np.asarray(delta_grid, dtype=float)
            if len(grid) > 1 and np.abs(np.diff(grid)).max() > params.kappa / 20 + 1e-12:
                raise ValueError("detuning grid coarser than kappa/20")
        for nth in nth_list:
            p = params.replace(g0=float(g0), N_th=float(nth), T=None)
            vals = np.array([six_state_g2(p.replace(Delta_a=float(da))).g2_zero
                             for da in grid])
            k = int(np.argmin(vals))
            min_g2[row] = vals[k]
            argmin[row] = grid[k]
            row += 1
    return ScanResult(
        axes=[("g0", g0_grid), ("N_th", nth_list)],
        columns={"min_g2": min_g2, "argmin_delta_a": argmin},
        metadata={"kappa": params.kappa, "grid_step": params.kappa / 20})


@dataclass
class GateBudget:
    """Error budgets for the photon-phonon transistor and the phonon gate."""

    Gamma_m: float | None = None
    epsilon: float | None = None          # entangled-state preparation error
    tau_opt: float | None = None
    tau_p: float | None = None
    Lambda: float | None = None           # induced Kerr strength
    Gamma_phi: float | None = None        # induced dephasing
    gamma_prime: float | None = None      # optical-leakage decay
    Lambda0: float | None = None          # g0^4 / (16 |Delta_s| delta^2)
    t_g: float | None = None              # pi / (2 |Lambda|)
    epsilon_g: float | None = None        # conditional-phase gate error
    delta_s_opt: float | None = None
    clamped: bool = False
    Lambda_n: np.ndarray | None = None
    Gamma_phi_n: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def transistor_error(params: SystemParams, tau_p: float | None = None) -> GateBudget:
    """Error budget for mapping a phonon qubit onto a routed photon.

    epsilon(tau) = 4 kappa^2/g0^2 + 1/(tau kappa)^2 + tau Gamma_m, from
    imperfect reflection contrast, finite pulse bandwidth, and mechanical
    decoherence at Gamma_m = (gamma/2)(3 N_th + 1/2). The optimum pulse
    duration is tau_opt = (kappa^2 Gamma_m)^(-1/3). Values above 1 are
    clamped (flagged), since the budget is perturbative.
    """
    if params.g0 <= 0:
        raise ValueError("transistor_error needs g0 > 0")
    gm = params.Gamma_m
    tau_opt = (params.kappa**2 * gm) ** (-1.0 / 3.0) if gm > 0 else math.inf
    tau = tau_p if tau_p is not None else (params.tau_p if params.tau_p is not None
                                           else tau_opt)
    eps = 4 * params.kappa**2 / params.g0**2
    if math.isfinite(tau):
        eps += 1.0 / (tau * params.kappa) ** 2 + tau * gm
    clamped = eps > 1.0
    return GateBudget(Gamma_m=gm, epsilon=min(eps, 1.0), tau_opt=tau_opt,
                      tau_p=tau, clamped=clamped)


def phonon_nonlinearity(params: SystemParams, corrected: bool = False,
                        n_max: int = 8) -> GateBudget:
    """Optically induced phonon Kerr strength, dephasing, and leakage decay.

    Flat (small-mixing-angle) values:
        Lambda     = g0^4 |alpha|^2 Delta_s / (16 delta^2 (Delta_s^2 + kappa^2)),
        Gamma_phi  = g0^4 |alpha|^2 kappa   / (16 delta^2 (Delta_s^2 + kappa^2)),
        gamma'     = kappa |alpha|^2 g0^2 / (2 delta^2),
    so Lambda/Gamma_phi = Delta_s/kappa identically. With corrected=True the
    returned arrays Lambda_n, Gamma_phi_n evaluate the cavity response at
    the occupation-shifted frequencies -n Delta_B with the exact mixing
    angle, for n = 0..n_max.
    """
    params.require("Delta_s")
    alpha2 = abs(models._alpha(params)) ** 2
    delta = params.hybrid_delta
    ds, kap, g0 = params.Delta_s, params.kappa, params.g0
    denom = 16 * delta**2 * (ds**2 + kap**2)
    budget = GateBudget(
        Lambda=g0**4 * alpha2 * ds / denom,
        Gamma_phi=g0**4 * alpha2 * kap / denom,
        gamma_prime=kap * alpha2 * g0**2 / (2 * delta**2),
        Lambda0=g0**4 / (16 * abs(ds) * delta**2),
        Gamma_m=params.Gamma_m if params.gamma is not None else None,
    )
    if budget.Lambda:
        budget.t_g = math.pi / (2 * abs(budget.Lambda))
    if corrected:
        frame = models.hybridize(params)
        s = np.array([models.coupling_spectrum(params, -n * models.fock_shift(params))
                      for n in range(n_max + 1)])
        budget.Lambda_n = s.imag.copy()
        budget.Gamma_phi_n = s.real.copy()
        budget.gamma_prime = frame.gamma_prime
    return budget


def eigenvalue_prediction(params: SystemParams, n: int) -> complex:
    """Predicted complex eigenvalue of the n-th hybridized-phonon level.

    Re lambda_n = n tilde_omega_m + n^2 Lambda(n);
    |Im lambda_n| = (gamma/2) N_th + n [(gamma/2)(2 N_th + 1) + gamma'/2]
                    + n^2 Gamma_phi(n).
    Returned with the decaying sign convention (Im <= 0).
    """
    params.require("omega_m", "Delta_s")
    frame = models.hybridize(params)
    s_n = models.coupling_spectrum(params, -n * models.fock_shift(params))
    gamma = params.gamma or 0.0
    re = n * frame.tilde_omega_m + n**2 * s_n.imag
    im = (0.5 * gamma * params.N_th
          + n * (0.5 * gamma * (2 * params.N_th + 1) + 0.5 * frame.gamma_prime)
          + n**2 * s_n.real)
    return complex(re, -im)


def _qubit_superposition(dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[0] = v[1] = 1.0 / math.sqrt(2)
    return v


def phase_gate_error(params: SystemParams, delta_s_grid=None,
                     exact: bool = False, dim: int = 4) -> GateBudget:
    """Conditional-phase gate error between two phonon qubits.

    The Kerr cross term acts for t_g = pi/(2|Lambda|); during that time the
    state decoheres at Gamma_decoh = 2 Gamma_m + Gamma_phi + gamma'/2. The
    analytic estimate is eps_g ~= 1 - exp(-Gamma_decoh t_g), minimized over
    Delta_s on a grid (default 60 points over (0, 1.5 g0], negative branch).
    With exact=True the error at the optimum is recomputed by evolving the
    eliminated two-mode master equation from (|0> + |1>)(|0> + |1>)/2 and
    projecting onto the coherently evolved target state, so that the
    decoherence-free limit gives exactly zero error.
    """
    if params.g0 <= 0:
        raise ValueError("phase_gate_error needs g0 > 0")
    params.require("gamma")
    if delta_s_grid is None:
        delta_s_grid = -np.linspace(0.025, 1.5, 60) * params.g0
    grid = np.asarray(delta_s_grid, dtype=float)
    best = None
    for ds in grid:
        p = params.replace(Delta_s=float(ds))
        b = phonon_nonlinearity(p)
        if b.Lambda == 0:
            continue
        gdecoh = 2 * b.Gamma_m + b.Gamma_phi + 0.5 * b.gamma_prime
        eps = 1.0 - math.exp(-gdecoh * b.t_g)
        if best is None or eps < best.epsilon_g:
            best = b
            best.epsilon_g = eps
            best.delta_s_opt = float(ds)
            best.extras["Gamma_decoh"] = gdecoh
    if best is None:
        raise ValueError("no gate: Lambda vanishes on the whole grid")
    if exact:
        p = params.replace(Delta_s=best.delta_s_opt)
        best.extras["epsilon_g_estimate"] = best.epsilon_g
        best.epsilon_g = _exact_gate_error(p, best.t_g, dim)
    best.clamped = best.epsilon_g > 1.0
    best.epsilon_g = min(max(best.epsilon_g, 0.0), 1.0)
    return best


def _exact_gate_error(params: SystemParams, t_g: float, dim: int) -> float:
    model = models.build_effective_phonon(params, truncations=(dim, dim),
                                          two_resonators=True)
    n = model.space.total_dim
    psi0 = np.kron(_qubit_superposition(dim), _qubit_superposition(dim))
    rho0 = np.outer(psi0, psi0.conj())
    gen = liouvillian(model).toarray()
    rho = (sla.expm(gen * t_g) @ rho0.reshape(-1)).reshape(n, n)
    target = sla.expm(-1j * model.hamiltonian.to_dense() * t_g) @ psi0
    fidelity = float(np.real(target.conj() @ rho @ target))
    return 1.0 - fidelity
