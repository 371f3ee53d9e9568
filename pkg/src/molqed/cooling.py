"""Cavity-assisted sideband cooling of one motional mode.

System: two-level rotational qubit (|1> = g, |2> = e) x resonator mode x
harmonic motion, in the frame rotating at the drive frequency:

    H = -delta_d s+s- + (delta_c - delta_d) a+a + omega_t b+b
        + g0 (1 - eta x) (a+ s- + s+ a) + (Omega/2) (1 - eta x) (s+ + s-)
        + delta_omega_t s+s- b+b,          x = b + b+

with delta_d = omega_drive - omega_0 (red sideband: -omega_t) and
delta_c = omega_cavity - omega_0. The drive is delivered through the
resonator, so it shares the coupling gradient. Cavity loss with thermal
occupation n_th enters through the dissipators a and a+.

``kappa`` is a decay rate whose meaning is set by ``decay_convention``:
"amplitude" (field decays as exp(-kappa t), photon number as exp(-2 kappa t);
this makes the adiabatically eliminated emission rate exactly 2 g^2/kappa) or
"energy" (photon number decays as exp(-kappa t)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize
from scipy.integrate import solve_ivp

from .units import CONSTANTS

__all__ = [
    "CoolingModel",
    "CoolingTrajectory",
    "AnalyticCoolingRates",
    "TruncationError",
    "IntegrationError",
    "build_cooling_model",
    "thermal_state",
    "initial_state",
    "hamiltonian",
    "collapse_operators",
    "liouvillian",
    "evolve",
    "steady_state",
    "steady_state_occupations",
    "expectation",
    "fit_decay_rate",
    "cooling_rate_analytic",
    "energy_removal_rate",
    "thermal_occupation",
    "final_temperature",
]


class TruncationError(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoolingModel:
    g0: float
    eta: float
    omega_t: float
    kappa: float
    Omega_drive: float = 0.0
    drive_detuning: float | None = None
    cavity_detuning: float = 0.0
    n_thermal: float = 0.0
    N_fock: int = 5
    N_motion: int = 15
    decay_convention: str = "amplitude"
    delta_omega_t: float = 0.0

    def __post_init__(self):
        if self.N_fock < 2 or self.N_motion < 2:
            raise TruncationError(f"Fock truncation too small (N_fock={self.N_fock}, N_motion={self.N_motion}); need >= 2")
        if self.decay_convention not in ("amplitude", "energy"):
            raise ValueError("decay_convention must be 'amplitude' or 'energy'")
        for key in ("g0", "kappa", "omega_t", "n_thermal", "eta", "Omega_drive"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be non-negative")
        if self.drive_detuning is None:
            object.__setattr__(self, "drive_detuning", -self.omega_t)

    @property
    def dim(self) -> int:
        return 2 * self.N_fock * self.N_motion

    @property
    def strong_coupling(self) -> bool:
        return self.g0 > self.kappa

    @property
    def photon_decay_rate(self) -> float:
        """Rate at which the mean photon number decays (1/s)."""
        return 2 * self.kappa if self.decay_convention == "amplitude" else self.kappa


@dataclass
class CoolingTrajectory:
    times: np.ndarray
    mean_n_motion: np.ndarray
    mean_n_cavity: np.ndarray
    excited_population: np.ndarray
    trace_error: np.ndarray
    min_eigenvalue: np.ndarray
    excitation_number: np.ndarray
    final_state: np.ndarray = field(repr=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_us", "n_motion", "n_cavity", "pop_excited"])
            w.writerow(["us", "1", "1", "1"])
            for row in zip(self.times * 1e6, self.mean_n_motion, self.mean_n_cavity, self.excited_population):
                w.writerow([f"{v:.17e}" for v in row])


def build_cooling_model(coupling, res, omega_t: float, Omega_drive: float, n_thermal: float = 0.0,
                        **kw) -> CoolingModel:
    """Model from a :class:`CouplingResult` (g, eta) and a :class:`ResonatorSpec` (kappa)."""
    if not math.isfinite(coupling.eta):
        raise ValueError("coupling has no Lamb-Dicke parameter; pass omega_t to vacuum_rabi")
    return CoolingModel(g0=coupling.g, eta=coupling.eta, omega_t=omega_t, kappa=res.kappa,
                        Omega_drive=Omega_drive, n_thermal=n_thermal, **kw)


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def _operators(model: CoolingModel):
    nf, nm = model.N_fock, model.N_motion
    i2, i_f, i_m = np.eye(2), np.eye(nf), np.eye(nm)
    sm = np.array([[0.0, 1.0], [0.0, 0.0]])  # basis (g, e): s- |e> = |g>
    a = _ladder(nf)
    b = _ladder(nm)
    kron = lambda q, c, m: np.kron(np.kron(q, c), m)  # noqa: E731
    return {
        "sm": kron(sm, i_f, i_m),
        "a": kron(i2, a, i_m),
        "b": kron(i2, i_f, b),
        "x": kron(i2, i_f, b + b.T),
        "I": np.eye(model.dim),
    }


def hamiltonian(model: CoolingModel) -> np.ndarray:
    """Drive-frame Hamiltonian in rad/s (hbar = 1)."""
    op = _operators(model)
    sm, a, b, x, I = op["sm"], op["a"], op["b"], op["x"], op["I"]
    sp, ad = sm.T, a.T
    ee = sp @ sm
    grad = I - model.eta * x
    H = (
        -model.drive_detuning * ee
        + (model.cavity_detuning - model.drive_detuning) * (ad @ a)
        + model.omega_t * (b.T @ b)
        + model.g0 * grad @ (ad @ sm + sp @ a)
        + 0.5 * model.Omega_drive * grad @ (sp + sm)
        + model.delta_omega_t * ee @ (b.T @ b)
    )
    return 0.5 * (H + H.T)


def collapse_operators(model: CoolingModel) -> list[np.ndarray]:
    a = _operators(model)["a"]
    rate = model.photon_decay_rate
    ops = []
    if rate > 0:
        ops.append(math.sqrt(rate * (model.n_thermal + 1)) * a)
        if model.n_thermal > 0:
            ops.append(math.sqrt(rate * model.n_thermal) * a.T)
    return ops


def liouvillian(model: CoolingModel) -> np.ndarray:
    """Superoperator on row-major vec(rho): vec(A rho B) = (A kron B^T) vec(rho)."""
    H = hamiltonian(model)
    I = np.eye(model.dim)
    L = -1j * (np.kron(H, I) - np.kron(I, H.T))
    for C in collapse_operators(model):
        CdC = C.conj().T @ C
        L = L + np.kron(C, C.conj()) - 0.5 * np.kron(CdC, I) - 0.5 * np.kron(I, CdC.T)
    return L


def _rhs(H: np.ndarray, cops: list[np.ndarray]):
    Heff = H - 0.5j * sum((C.conj().T @ C for C in cops), np.zeros_like(H, dtype=complex))
    d = H.shape[0]

    def f(_t, y):
        rho = y.reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        out = -1j * (Heff @ rho - rho @ Heff.conj().T)
        for C in cops:
            out += C @ rho @ C.conj().T
        return out.ravel()

    return f


def thermal_state(n_mean: float, N: int) -> np.ndarray:
    """Truncated, renormalised thermal distribution as a diagonal density matrix."""
    if n_mean <= 0:
        p = np.zeros(N)
        p[0] = 1.0
    else:
        p = (n_mean / (1 + n_mean)) ** np.arange(N)
        p /= p.sum()
    return np.diag(p)


def initial_state(model: CoolingModel, n_motion: float = 1.0, motion: str = "fock",
                  cavity_thermal: bool = True, excited: bool = False) -> np.ndarray:
    """Product state: qubit g (or e), cavity thermal (or vacuum), motion Fock/thermal."""
    q = np.diag([0.0, 1.0]) if excited else np.diag([1.0, 0.0])
    c = thermal_state(model.n_thermal if cavity_thermal else 0.0, model.N_fock)
    if motion == "fock":
        k = int(round(n_motion))
        if k >= model.N_motion:
            raise TruncationError(f"Fock state {k} outside motional truncation {model.N_motion}")
        m = np.zeros((model.N_motion, model.N_motion))
        m[k, k] = 1.0
    elif motion == "thermal":
        m = thermal_state(n_motion, model.N_motion)
    else:
        raise ValueError("motion must be 'fock' or 'thermal'")
    return np.kron(np.kron(q, c), m).astype(complex)


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ op)))


def _check_state(rho0: np.ndarray, d: int) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValueError(f"rho0 must be {d}x{d}")
    if not np.allclose(rho0, rho0.conj().T, atol=1e-12):
        raise ValueError("rho0 is not Hermitian")
    if abs(np.trace(rho0).real - 1) > 1e-9 or np.linalg.eigvalsh(rho0).min() < -1e-9:
        raise ValueError("rho0 must be positive semidefinite with unit trace")
    return rho0


def evolve(model: CoolingModel, rho0: np.ndarray, t_final: float, dt_control: float | None = None,
           n_out: int = 201, method: str = "adaptive", rtol: float = 1e-8, atol: float = 1e-10) -> CoolingTrajectory:
    """Integrate the master equation and sample observables on a uniform grid.

    ``method="adaptive"`` uses an explicit Runge-Kutta integrator (DOP853) with
    step control; ``dt_control`` caps its step. ``method="expm"`` propagates
    with the exact dense propagator exp(L dt) between output points, which is
    far cheaper when omega_t is much larger than the dissipative rates.
    """
    d = model.dim
    rho0 = _check_state(rho0, d)
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    times = np.linspace(0.0, t_final, n_out)
    op = _operators(model)
    n_b = op["b"].T @ op["b"]
    n_a = op["a"].T @ op["a"]
    ee = op["sm"].T @ op["sm"]

    states = []
    if method == "adaptive":
        f = _rhs(hamiltonian(model), collapse_operators(model))
        kw = {"max_step": dt_control} if dt_control else {}
        sol = solve_ivp(f, (0.0, t_final), rho0.ravel(), method="DOP853", t_eval=times, rtol=rtol, atol=atol, **kw)
        if sol.status != 0:
            raise IntegrationError(f"integration failed: {sol.message}")
        states = [sol.y[:, k].reshape(d, d) for k in range(len(times))]
    elif method == "expm":
        P = linalg.expm(liouvillian(model) * (times[1] - times[0]))
        v = rho0.ravel()
        for _ in times:
            states.append(v.reshape(d, d))
            v = P @ v
            rho = v.reshape(d, d)
            v = (0.5 * (rho + rho.conj().T)).ravel()
    else:
        raise ValueError("method must be 'adaptive' or 'expm'")

    out = {k: np.empty(len(times)) for k in ("nb", "na", "ee", "tr", "mn", "ex")}
    for k, rho in enumerate(states):
        rho = 0.5 * (rho + rho.conj().T)
        out["nb"][k] = expectation(rho, n_b)
        out["na"][k] = expectation(rho, n_a)
        out["ee"][k] = expectation(rho, ee)
        out["tr"][k] = abs(np.trace(rho).real - 1.0)
        out["mn"][k] = np.linalg.eigvalsh(rho).min()
        out["ex"][k] = out["na"][k] + out["ee"][k]
        if out["nb"][k] > model.N_motion - 2 or out["na"][k] > model.N_fock - 2:
            raise TruncationError(
                f"truncation breach at t={times[k]:.4g} s: <n_motion>={out['nb'][k]:.3f} "
                f"(N={model.N_motion}), <n_cavity>={out['na'][k]:.3f} (N={model.N_fock})"
            )
    final = 0.5 * (states[-1] + states[-1].conj().T)
    return CoolingTrajectory(times, out["nb"], out["na"], out["ee"], out["tr"], out["mn"], out["ex"], final)


def steady_state(model: CoolingModel) -> np.ndarray:
    """Null vector of the Liouvillian normalised to unit trace."""
    d = model.dim
    L = liouvillian(model)
    # replace one equation by the trace condition
    A = L.copy()
    A[0, :] = np.eye(d).ravel()
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    rho = linalg.solve(A, rhs).reshape(d, d)
    return 0.5 * (rho + rho.conj().T)


def steady_state_occupations(model: CoolingModel) -> tuple[float, float]:
    """(<n_motion>, <n_cavity>) in the steady state."""
    rho = steady_state(model)
    op = _operators(model)
    return expectation(rho, op["b"].T @ op["b"]), expectation(rho, op["a"].T @ op["a"])


def fit_decay_rate(times, values) -> tuple[float, float, float]:
    """Fit A exp(-G t) + C; returns (G, A, C)."""
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    span = t[-1] - t[0]
    G0 = 1.0 / span
    popt, _ = optimize.curve_fit(lambda tt, G, A, C: A * np.exp(-G * tt) + C, t, y,
                                 p0=(G0, y[0] - y[-1], y[-1]), maxfev=20000)
    return float(popt[0]), float(popt[1]), float(popt[2])


class AnalyticCoolingRates(NamedTuple):
    gamma_sp: float
    R: float
    weak_drive: float
    strong_drive: float
    saturated: float


def cooling_rate_analytic(g: float, kappa: float, eta: float, Omega: float) -> AnalyticCoolingRates:
    """Sideband cooling rates after eliminating the cavity (omega_t >> kappa >> g).

    gamma_sp = 2 g^2/kappa, R = eta^2 Omega^2/gamma_sp,
    weak_drive = gamma_sp R/(2R + gamma_sp) -> strong_drive = gamma_sp/2,
    saturated = min(g^2/kappa, kappa/2) caps the rate once g reaches kappa.
    """
    if g <= 0 or kappa <= 0 or eta < 0 or Omega < 0:
        raise ValueError("rates must be positive")
    gamma_sp = 2 * g * g / kappa
    R = eta**2 * Omega**2 / gamma_sp
    weak = gamma_sp * R / (2 * R + gamma_sp)
    return AnalyticCoolingRates(gamma_sp, R, weak, gamma_sp / 2, min(g * g / kappa, kappa / 2))


def energy_removal_rate(omega_t: float, gamma_c: float) -> float:
    """hbar omega_t Gamma_c / k_B in K/s."""
    return CONSTANTS.hbar * omega_t * gamma_c / CONSTANTS.k_B


def thermal_occupation(omega: float, T: float) -> float:
    if T <= 0:
        return 0.0
    return 1.0 / math.expm1(CONSTANTS.hbar * omega / (CONSTANTS.k_B * T))


def final_temperature(omega_t: float, omega: float, T_resonator: float) -> tuple[float, float]:
    """Motional temperature reached when n_motion equals the resonator's thermal photon number.

    Returns (T_trap in K, omega_t/omega).
    """
    if min(omega_t, omega, T_resonator) <= 0:
        raise ValueError("inputs must be positive")
    n = thermal_occupation(omega, T_resonator)
    T_trap = CONSTANTS.hbar * omega_t / (CONSTANTS.k_B * math.log1p(1.0 / n))
    return T_trap, omega_t / omega
