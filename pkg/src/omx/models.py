"""Model builders: two tunnel-coupled optical cavities with radiation-pressure
coupling to one or two mechanical modes, in the lab frame, the two-mode
rotating-wave frame, the displaced (classical-drive-eliminated) frame, the
hybridized-mode frame, and the adiabatically eliminated phonon-only frame.

Mode label conventions:
    build_full          ("c1", "c2", "b1"[, "b2"])
    build_rwa           ("a", "s", "m")      antisymmetric, symmetric, mechanical
    build_displaced     ("a", "s", "m") or ("a", "s", "m1", "m2")
    build_effective_... ("B",) or ("B1", "B2")
    build_transistor    ("s", "ap")          probe mode and phonon-shifted partner

All builders are pure functions of a SystemParams record; outputs are
immutable and safe to share across threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import LindbladModel
from .hilbert import ModeSpace, Operator, annihilator
from .params import SystemParams

RESONANCE_ATOL = 1e-9


def default_truncations(params: SystemParams, labels) -> dict[str, int]:
    """Default Fock truncations: optical dims 4, mechanical max(6, 6 N_th)."""
    mech = max(6, int(math.ceil(6 * params.N_th)))
    out = {}
    for lbl in labels:
        out[lbl] = mech if lbl.startswith(("b", "m", "B")) else 4
    return out


def _resolve_truncations(params, labels, truncations) -> ModeSpace:
    if truncations is None:
        dims = default_truncations(params, labels)
    elif isinstance(truncations, dict):
        dims = dict(default_truncations(params, labels))
        dims.update(truncations)
    else:
        if len(truncations) != len(labels):
            raise ValueError(f"need {len(labels)} truncations for modes {labels}")
        dims = dict(zip(labels, truncations))
    return ModeSpace([(lbl, dims[lbl]) for lbl in labels])


def _thermal_collapses(b: Operator, gamma: float, n_th: float):
    cols = []
    if gamma and gamma > 0:
        cols.append((b, 0.5 * gamma * (n_th + 1.0)))
        if n_th > 0:
            cols.append((b.dag(), 0.5 * gamma * n_th))
    return cols


def build_full(params: SystemParams, truncations=None,
               mechanical_sites=(1,)) -> LindbladModel:
    """Two tunnel-coupled cavities in the frame rotating at the drive.

    H = -Delta_c (n1 + n2) + sum_i [omega_m^i b_i'b_i + g0 n_i (b_i + b_i')]
        - J (c1'c2 + c2'c1) + sum_i Omega_i (c_i + c_i'),
    with Delta_c = (Delta_s + Delta_a)/2 the detuning from the bare cavity
    frequency, and local drive amplitudes Omega_{1,2} = (Omega_s +-
    Omega_a)/sqrt(2). Dissipation: kappa D[c_i] per cavity and thermal
    contact on each mechanical mode.
    """
    params.require("omega_m", "J")
    if params.Delta_s is None or params.Delta_a is None:
        raise ValueError("build_full needs Delta_s and Delta_a (or one of them plus J)")
    sites = tuple(sorted(mechanical_sites))
    if not sites or any(s not in (1, 2) for s in sites):
        raise ValueError("mechanical_sites must be a subset of {1, 2}")
    labels = ["c1", "c2"] + [f"b{i}" for i in sites]
    space = _resolve_truncations(params, labels, truncations)

    c1, c2 = annihilator(space, "c1"), annihilator(space, "c2")
    delta_c = 0.5 * (params.Delta_s + params.Delta_a)
    h = (-delta_c * ((c1.dag() @ c1) + (c2.dag() @ c2))
         - params.J * ((c1.dag() @ c2) + (c1 @ c2.dag())))
    om1 = (params.Omega_s + params.Omega_a) / math.sqrt(2)
    om2 = (params.Omega_s - params.Omega_a) / math.sqrt(2)
    for amp, c in ((om1, c1), (om2, c2)):
        if amp:
            h = h + amp * (c + c.dag())
    omegas = {1: params.omega_m, 2: params.omega_m2 if params.omega_m2 is not None
              else params.omega_m}
    cols = [(c1, params.kappa), (c2, params.kappa)]
    for i in sites:
        b = annihilator(space, f"b{i}")
        x = b + b.dag()
        ci = c1 if i == 1 else c2
        h = h + omegas[i] * (b.dag() @ b) + params.g0 * ((ci.dag() @ ci) @ x)
        cols += _thermal_collapses(b, params.gamma or 0.0, params.N_th)
    ham = Operator(space, h.matrix, hermitian_hint=True)
    return LindbladModel(ham, cols, space, meta={"frame": "full", "sites": sites})


def build_rwa(params: SystemParams, truncations=None) -> LindbladModel:
    """Two-mode model after the rotating-wave approximation in omega_m ~ 2J.

    H = -Delta_s n_s - Delta_a n_a + omega_m b'b
        + (g0/2)(c_a c_s' b' + c_a' c_s b) + Omega_a (c_a + c_a')
        + Omega_s (c_s + c_s').
    The matrix element <0_a 1_s 1_m|H|1_a 0_s 0_m> equals g0/2, and the
    general transition amplitude scales as (g0/2) sqrt(n_a (n_s+1)(n_m+1)).
    meta["resonant"] flags Delta_s - Delta_a - omega_m = 0.
    """
    params.require("omega_m")
    if params.Delta_s is None or params.Delta_a is None:
        raise ValueError("build_rwa needs Delta_s and Delta_a")
    labels = ["a", "s", "m"]
    space = _resolve_truncations(params, labels, truncations)
    a, s, b = (annihilator(space, l) for l in labels)
    h = (-params.Delta_s * (s.dag() @ s) - params.Delta_a * (a.dag() @ a)
         + params.omega_m * (b.dag() @ b)
         + 0.5 * params.g0 * ((a @ s.dag() @ b.dag()) + (a.dag() @ s @ b)))
    if params.Omega_a:
        h = h + params.Omega_a * (a + a.dag())
    if params.Omega_s:
        h = h + params.Omega_s * (s + s.dag())
    cols = [(a, params.kappa), (s, params.kappa)]
    cols += _thermal_collapses(b, params.gamma or 0.0, params.N_th)
    resonant = abs(params.Delta_s - params.Delta_a - params.omega_m) < RESONANCE_ATOL
    ham = Operator(space, h.matrix, hermitian_hint=True)
    return LindbladModel(ham, cols, space, meta={"frame": "rwa", "resonant": resonant})


def _alpha(params: SystemParams) -> complex:
    return params.alpha if params.alpha is not None else params.steady_alpha()


def build_displaced(params: SystemParams, truncations=None,
                    two_resonators: bool = False) -> LindbladModel:
    """Frame with the classical drive removed by displacing c_s by alpha.

    The drive term disappears and the linear Hamiltonian picks up a
    beam-splitter coupling G c_a b' + G* c_a' b with G = g0 alpha / 2
    (for two resonators: sqrt(2) G c_a b_a' + h.c. with
    b_a = (b1 - b2)/sqrt(2)); the three-wave coupling is unchanged.
    alpha is taken from params or from the steady drive balance.
    """
    params.require("omega_m")
    if params.Delta_s is None or params.Delta_a is None:
        raise ValueError("build_displaced needs Delta_s and Delta_a")
    alpha = _alpha(params)
    g = 0.5 * params.g0 * alpha
    labels = ["a", "s"] + (["m1", "m2"] if two_resonators else ["m"])
    space = _resolve_truncations(params, labels, truncations)
    a, s = annihilator(space, "a"), annihilator(space, "s")
    h = -params.Delta_s * (s.dag() @ s) - params.Delta_a * (a.dag() @ a)
    cols = [(a, params.kappa), (s, params.kappa)]
    if two_resonators:
        om2 = params.omega_m2 if params.omega_m2 is not None else (
            params.omega_m + 2 * params.hybrid_delta)
        b1, b2 = annihilator(space, "m1"), annihilator(space, "m2")
        h = h + params.omega_m * (b1.dag() @ b1) + om2 * (b2.dag() @ b2)
        bdiff = b1 - b2
        h = h + (g * (a @ bdiff.dag()) + np.conj(g) * (a.dag() @ bdiff))
        h = h + 0.5 * params.g0 * ((a @ s.dag() @ bdiff.dag()) + (a.dag() @ s @ bdiff))
        for b in (b1, b2):
            cols += _thermal_collapses(b, params.gamma or 0.0, params.N_th)
    else:
        b = annihilator(space, "m")
        h = h + params.omega_m * (b.dag() @ b)
        h = h + (g * (a @ b.dag()) + np.conj(g) * (a.dag() @ b))
        h = h + 0.5 * params.g0 * ((a @ s.dag() @ b.dag()) + (a.dag() @ s @ b))
        cols += _thermal_collapses(b, params.gamma or 0.0, params.N_th)
    ham = Operator(space, h.matrix, hermitian_hint=True)
    return LindbladModel(ham, cols, space,
                         meta={"frame": "displaced", "alpha": alpha,
                               "two_resonators": two_resonators})


@dataclass
class HybridFrame:
    """Mixing angles and shifted frequencies of the optical-mechanical
    hybridization induced by the classical field.

    Single resonator: tan(2 theta) = -2|G|/delta, where delta is the
    beam-splitter detuning -(Delta_a + omega_m); the hybrid modes are
    B = cos(theta) b + sin(theta) c_a and C = cos(theta) c_a - sin(theta) b
    at frequencies
        tilde_omega_m = omega_m + (delta - sqrt(delta^2 + 4|G|^2))/2,
        -tilde_Delta_a = -Delta_a - (delta - sqrt(delta^2 + 4|G|^2))/2,
    and the B mode acquires the optical decay gamma_prime =
    2 kappa sin^2(theta).

    Two resonators at symmetric detuning: tan(2 Theta) = -sqrt(2)|G|/delta,
    gamma_prime = kappa sin^2(2 Theta), and the hybrid frequencies split by
    2 sqrt(delta^2 + 2|G|^2) around -Delta_a while the C mode is unshifted.
    """

    G: complex
    delta: float
    theta: float | None = None
    Theta: float | None = None
    tilde_omega_m: float | None = None
    tilde_omega_m2: float | None = None
    tilde_Delta_a: float | None = None
    gamma_prime: float = 0.0


def hybridize(params: SystemParams, two_resonators: bool = False) -> HybridFrame:
    """Mixing angles, shifted frequencies, and induced optical decay."""
    delta = params.hybrid_delta
    if abs(delta) < RESONANCE_ATOL:
        raise ValueError("resonant configuration (delta = 0): hybridization is singular")
    g = abs(0.5 * params.g0 * _alpha(params))
    if two_resonators:
        big_theta = 0.5 * math.atan2(-math.sqrt(2) * g, delta)
        root = math.sqrt(delta**2 + 2 * g**2)
        frame = HybridFrame(G=g, delta=delta, Theta=big_theta,
                            gamma_prime=params.kappa * math.sin(2 * big_theta) ** 2)
        if params.omega_m is not None:
            om2 = params.omega_m2 if params.omega_m2 is not None else params.omega_m + 2 * delta
            frame.tilde_omega_m = params.omega_m + (delta - root)
            frame.tilde_omega_m2 = om2 - (delta - root)
        if params.Delta_a is not None:
            frame.tilde_Delta_a = params.Delta_a
        _warn_cross_terms(params.kappa, root)
        return frame
    theta = 0.5 * math.atan2(-2 * g, delta)
    root = math.sqrt(delta**2 + 4 * g**2)
    frame = HybridFrame(G=g, delta=delta, theta=theta,
                        gamma_prime=2 * params.kappa * math.sin(theta) ** 2)
    if params.omega_m is not None:
        frame.tilde_omega_m = params.omega_m + 0.5 * (delta - root)
    if params.Delta_a is not None:
        frame.tilde_Delta_a = params.Delta_a + 0.5 * (delta - root)
    _warn_cross_terms(params.kappa, root)
    return frame


def _warn_cross_terms(kappa: float, splitting: float):
    # dissipator cross-terms between the hybrid modes are dropped; only safe
    # when kappa is small against their splitting
    if kappa > 0.1 * splitting:
        warnings.warn(
            f"kappa = {kappa:.3g} is not small against the hybrid-mode splitting "
            f"{splitting:.3g}; neglected dissipator cross-terms may matter",
            stacklevel=3)


def hybrid_rotation(params: SystemParams, space: ModeSpace,
                    two_resonators: bool = False) -> Operator:
    """Unitary mapping bare (b, c_a) operators onto the hybrid (B, C) pair.

    U b U' = B and U c_a U' = C; conjugating the three-wave coupling with
    U' reproduces the rotated-frame decomposition exactly.
    """
    frame = hybridize(params, two_resonators)
    a = annihilator(space, "a").matrix
    if two_resonators:
        b1 = annihilator(space, "m1").matrix
        b2 = annihilator(space, "m2").matrix
        bs = (b1 + b2) / math.sqrt(2)
        gen = 2 * frame.Theta * (a.conj().T @ bs - bs.conj().T @ a)
    else:
        b = annihilator(space, "m").matrix
        gen = frame.theta * (a.conj().T @ b - b.conj().T @ a)
    u = spla.expm(gen.tocsc())
    return Operator(space, u.tocsr())


def build_hybrid_decomposition(params: SystemParams, truncations=None,
                               two_resonators: bool = False):
    """Three-wave coupling split into hybrid-frame pieces (H1, H2, Hres).

    The pieces are expressed in the rotated frame, where the bare lowering
    operators stand for the hybrid modes (b -> B, c_a -> C). H1 couples the
    c_s quadrature to the B occupation, H2 is the sin^2(theta) three-mode
    correction (zero for two resonators), and Hres collects the remaining
    off-resonant couplings, which matter only when c_s or C are excited.
    Their sum equals the rotated original coupling to machine precision.
    """
    labels = ["a", "s"] + (["m1", "m2"] if two_resonators else ["m"])
    space = _resolve_truncations(params, labels, truncations)
    frame = hybridize(params, two_resonators)
    a, s = annihilator(space, "a"), annihilator(space, "s")
    xs = s + s.dag()
    g0 = params.g0
    if two_resonators:
        th2 = 2 * frame.Theta
        b1, b2 = annihilator(space, "m1"), annihilator(space, "m2")
        dn = (b1.dag() @ b1) - (b2.dag() @ b2)
        h1 = (g0 / math.sqrt(8)) * math.sin(th2) * (xs @ dn)
        h2 = Operator(space, sp.csr_matrix((space.total_dim, space.total_dim), dtype=complex))
        bdiff = b1 - b2
        hres = (0.5 * g0 * math.cos(th2) * ((a @ s.dag() @ bdiff.dag())
                                            + (a.dag() @ s @ bdiff))
                + (g0 * math.sin(th2) / (2 * math.sqrt(2)))
                * ((s.dag() - s) @ ((b1.dag() @ b2) - (b2.dag() @ b1))))
        return h1, h2, hres
    th = frame.theta
    b = annihilator(space, "m")
    h1 = 0.25 * g0 * math.sin(2 * th) * (xs @ (b.dag() @ b))
    h2 = -0.5 * g0 * math.sin(th) ** 2 * ((b @ s.dag() @ a.dag()) + (b.dag() @ s @ a))
    hres = (0.5 * g0 * math.cos(th) ** 2 * ((a @ s.dag() @ b.dag()) + (a.dag() @ s @ b))
            - 0.25 * g0 * math.sin(2 * th) * (xs @ (a.dag() @ a)))
    return h1, h2, hres


def coupling_spectrum(params: SystemParams, omega: float) -> complex:
    """Cavity response S(omega) = g~^2 / (-i(Delta_s + omega) + kappa) of the
    c_s quadrature coupled to the B occupation, with g~ = g0 sin(2 theta)/4.

    Im S gives the induced Kerr strength, Re S the induced dephasing.
    """
    frame = hybridize(params)
    gt = 0.25 * params.g0 * math.sin(2 * frame.theta)
    return gt**2 / (-1j * (params.Delta_s + omega) + params.kappa)


def fock_shift(params: SystemParams) -> float:
    """Occupation-dependent detuning shift of the driven mode,
    Delta_B = g0^2 cos^4(theta) / (4 (tilde_Delta_a + tilde_omega_m - Delta_s)).

    The denominator reduces to -(delta + sqrt(delta^2 + 4|G|^2)) - Delta_s,
    so no absolute mode frequencies are needed.
    """
    frame = hybridize(params)
    g = abs(frame.G)
    denom = -(frame.delta + math.sqrt(frame.delta**2 + 4 * g**2)) - params.Delta_s
    return params.g0**2 * math.cos(frame.theta) ** 4 / (4 * denom)


def _fock_rates(params: SystemParams, n: int) -> complex:
    return coupling_spectrum(params, -n * fock_shift(params))


def build_effective_phonon(params: SystemParams, truncations=None,
                           corrected: bool = False,
                           two_resonators: bool = False) -> LindbladModel:
    """Mechanical-only master equation after eliminating the cavity modes.

    Single mode: H = tilde_omega_m B'B + Lambda (B'B)^2 with dephasing
    Gamma_phi D[B'B], optical leakage (gamma'/2) D[B], and the bare thermal
    contact. Two modes: the Kerr term becomes Lambda (B1'B1 - B2'B2)^2,
    whose expansion carries the cross term -2 Lambda n1 n2 that generates a
    conditional phase between phonon qubits.

    corrected=True replaces the flat Lambda, Gamma_phi with occupation-
    resolved values Lambda(n), Gamma_phi(n) from the cavity response
    evaluated at the shifted frequency -n Delta_B, applied on the
    eigenprojectors of the coupling operator.

    Validity requires |alpha| = O(1) and g0^2 |alpha| / (4 delta) small
    against |Delta_s + i kappa|; a warning is issued otherwise.
    """
    if params.Delta_s is None:
        raise ValueError("build_effective_phonon needs Delta_s")
    frame = hybridize(params, two_resonators)
    alpha = _alpha(params)
    drive_scale = params.g0**2 * abs(alpha) / (4 * abs(frame.delta))
    if drive_scale > 0.1 * abs(params.Delta_s + 1j * params.kappa):
        warnings.warn(
            f"adiabatic elimination marginal: g0^2|alpha|/(4 delta) = {drive_scale:.3g} "
            f"vs |Delta_s + i kappa| = {abs(params.Delta_s + 1j * params.kappa):.3g}")
    s0 = coupling_spectrum(params, 0.0) if not two_resonators else _two_res_spectrum(params, 0.0)
    lam, gph = s0.imag, s0.real
    gamma_p = frame.gamma_prime
    omega_m = params.omega_m if params.omega_m is not None else 0.0

    labels = ["B1", "B2"] if two_resonators else ["B"]
    space = _resolve_truncations(params, labels, truncations)
    if two_resonators:
        b1, b2 = annihilator(space, "B1"), annihilator(space, "B2")
        om1 = frame.tilde_omega_m if frame.tilde_omega_m is not None else 0.0
        om2 = frame.tilde_omega_m2 if frame.tilde_omega_m2 is not None else 0.0
        coupling_op = (b1.dag() @ b1) - (b2.dag() @ b2)
        h = om1 * (b1.dag() @ b1) + om2 * (b2.dag() @ b2)
        cols = [(b1, gamma_p / 2), (b2, gamma_p / 2)]
        for b in (b1, b2):
            cols += _thermal_collapses(b, params.gamma or 0.0, params.N_th)
    else:
        b = annihilator(space, "B")
        om1 = frame.tilde_omega_m if frame.tilde_omega_m is not None else omega_m
        coupling_op = b.dag() @ b
        h = om1 * coupling_op
        cols = [(b, gamma_p / 2)]
        cols += _thermal_collapses(b, params.gamma or 0.0, params.N_th)

    if corrected:
        dvals = np.rint(np.real(coupling_op.matrix.diagonal())).astype(int)
        for k in sorted(set(dvals.tolist())):
            if k == 0:
                continue
            sk = (coupling_spectrum(params, -k * fock_shift(params)) if not two_resonators
                  else _two_res_spectrum(params, -k * fock_shift(params)))
            proj = sp.diags((dvals == k).astype(complex)).tocsr()
            h = h + (k**2 * sk.imag) * Operator(space, proj)
            if sk.real > 0:
                cols.append((Operator(space, proj), k**2 * sk.real))
    else:
        h = h + lam * (coupling_op @ coupling_op)
        if gph > 0:
            cols.append((Operator(space, coupling_op.matrix, hermitian_hint=True), gph))

    ham = Operator(space, h.matrix, hermitian_hint=True)
    return LindbladModel(ham, cols, space, meta={
        "frame": "effective-phonon", "Lambda": lam, "Gamma_phi": gph,
        "gamma_prime": gamma_p, "corrected": corrected,
        "two_resonators": two_resonators})


def _two_res_spectrum(params: SystemParams, omega: float) -> complex:
    frame = hybridize(params, two_resonators=True)
    gt = params.g0 * math.sin(2 * frame.Theta) / math.sqrt(8)
    return gt**2 / (-1j * (params.Delta_s + omega) + params.kappa)


def build_nonhermitian(params: SystemParams, truncations=None) -> Operator:
    """Displaced-frame Hamiltonian with decay folded in as -i rates.

    H~ = H_lin + H_g - i kappa (n_s + n_a)
         - i (gamma/2)(N_th + 1) b'b - i (gamma/2) N_th b b'.
    Its low-lying eigenvalues track the Fock ladder of the hybridized B
    mode; meta carries the B lowering operator for eigenvector matching.
    """
    model = build_displaced(params, truncations)
    space = model.space
    a, s, b = (annihilator(space, l) for l in ("a", "s", "m"))
    gamma = params.gamma or 0.0
    h = (model.hamiltonian
         - 1j * params.kappa * ((s.dag() @ s) + (a.dag() @ a))
         - 1j * 0.5 * gamma * (params.N_th + 1) * (b.dag() @ b)
         - 1j * 0.5 * gamma * params.N_th * (b @ b.dag()))
    frame = hybridize(params)
    b_mode = math.cos(frame.theta) * b + math.sin(frame.theta) * a
    out = Operator(space, h.matrix)
    out.meta["b_mode"] = b_mode
    out.meta["frame"] = frame
    return out


def build_transistor(params: SystemParams, n_m: int, truncations=(4, 4)) -> LindbladModel:
    """Probe-facing model with the mechanical mode pinned to Fock state n_m.

    Within the weak-probe single-photon manifold the mechanical occupation
    enters only through an effective hopping (g0/2) sqrt(n_m) between the
    probed symmetric mode and the phonon-shifted antisymmetric partner
    ("ap", offset by delta = 2J - omega_m). Both modes decay at kappa; the
    mechanical damping is set to zero by the pinning assumption
    (Gamma_m << kappa). Feed the result to dynamics.reflection_spectrum.
    """
    if n_m < 0:
        raise ValueError("n_m must be a non-negative integer")
    delta = params.delta if params.delta is not None else 0.0
    space = _resolve_truncations(params, ["s", "ap"], truncations)
    s, ap = annihilator(space, "s"), annihilator(space, "ap")
    geff = 0.5 * params.g0 * math.sqrt(n_m)
    h = delta * (ap.dag() @ ap) + geff * ((s @ ap.dag()) + (s.dag() @ ap))
    ham = Operator(space, h.matrix, hermitian_hint=True)
    cols = [(s, params.kappa), (ap, params.kappa)]
    return LindbladModel(ham, cols, space, meta={
        "frame": "transistor-pinned", "n_m": n_m, "kappa": params.kappa,
        "g_eff": geff})


def asymmetric_phonon_coupling(params: SystemParams, space: ModeSpace,
                               labels=("m1", "m2")) -> Operator:
    """General two-resonator phonon operator entering the dispersive coupling,

        N_b = xi1 n1 + xi2 n2 - (xi1 + xi2)(b1'b2 + b2'b1)/2,

    with xi_i = g0 / (2J - omega_m^i). Experimental: quantitative results
    in this package assume the symmetric detuning omega_m^{1,2} = 2J -+ delta
    where N_b reduces to (g0/delta)(n1 - n2).
    """
    warnings.warn("asymmetric phonon coupling is experimental; quantitative "
                  "results assume symmetric detuning", stacklevel=2)
    params.require("J", "omega_m")
    om2 = params.omega_m2 if params.omega_m2 is not None else params.omega_m
    xi1 = params.g0 / (2 * params.J - params.omega_m)
    xi2 = params.g0 / (2 * params.J - om2)
    b1, b2 = annihilator(space, labels[0]), annihilator(space, labels[1])
    op = (xi1 * (b1.dag() @ b1) + xi2 * (b2.dag() @ b2)
          - 0.5 * (xi1 + xi2) * ((b1.dag() @ b2) + (b2.dag() @ b1)))
    return Operator(space, op.matrix, hermitian_hint=True)
