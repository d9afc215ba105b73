"""Closed-form device physics and Gaussian two-mode statistics.

Everything here is a pure function of immutable inputs. Field moments use the
normal-ordered convention (vacuum has zero occupancy); quadratures are
``x = (a + a†)/√2``, ``p = (a − a†)/(i√2)`` so the vacuum covariance is ``I/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar

from .errors import DomainError, UndefinedCorrelationError, UnphysicalStateError

#: Tolerance on the smallest symplectic eigenvalue (vacuum value is 1/2).
PHYSICALITY_TOL = 1e-9

#: Gain-bandwidth product of the reference device in Hz. Quoted, not derived.
GAIN_BANDWIDTH_PRODUCT_HZ = 59e6

NOMINAL_KERR = 2 * math.pi * 110e3
NOMINAL_F0 = 7.359e9
NOMINAL_PUMP_DETUNING = 2 * math.pi * 57e6


def kerr_nonlinearity(L_k0, I_star, I_zpf):
    """Single-photon Kerr coefficient ``K = (6/ħ)(L_k0/I*²) I_zpf⁴`` in rad/s."""
    for name, value in (("L_k0", L_k0), ("I_star", I_star), ("I_zpf", I_zpf)):
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value!r}")
    return 6.0 / hbar * L_k0 / I_star**2 * I_zpf**4


@dataclass(frozen=True)
class DeviceParams:
    """Resonator constants. Loss rates and K are angular (rad/s).

    The loss rates default to illustrative values; only ``f0`` and ``kerr_K``
    are the reference device's reported numbers.
    """

    f0: float = NOMINAL_F0
    kappa_ex: float = 2 * math.pi * 20e6
    kappa_in: float = 2 * math.pi * 2e6
    kerr_K: float = NOMINAL_KERR
    L_k0: float | None = None
    I_star: float | None = None
    I_zpf: float | None = None

    def __post_init__(self):
        if not self.kappa_ex > 0:
            raise DomainError("kappa_ex must be positive")
        if self.kappa_in < 0:
            raise DomainError("kappa_in must be non-negative")
        if not self.kerr_K > 0:
            raise DomainError("kerr_K must be positive")
        circuit = (self.L_k0, self.I_star, self.I_zpf)
        if all(v is not None for v in circuit):
            expected = kerr_nonlinearity(*circuit)
            if abs(self.kerr_K - expected) > 1e-12 * expected:
                raise DomainError(
                    f"kerr_K={self.kerr_K} inconsistent with circuit values ({expected})"
                )

    @classmethod
    def from_circuit(cls, L_k0, I_star, I_zpf, **kwargs):
        return cls(
            kerr_K=kerr_nonlinearity(L_k0, I_star, I_zpf),
            L_k0=L_k0,
            I_star=I_star,
            I_zpf=I_zpf,
            **kwargs,
        )

    @property
    def kappa(self):
        return self.kappa_ex + self.kappa_in


@dataclass(frozen=True)
class PumpDrive:
    """Two-tone pump, given either as intracavity amplitudes or as a power."""

    A1: float = 0.0
    A2: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    Delta: float = NOMINAL_PUMP_DETUNING
    power: float = 0.0

    def __post_init__(self):
        if self.A1 < 0 or self.A2 < 0:
            raise DomainError("pump amplitudes must be non-negative")
        if self.power < 0:
            raise DomainError("pump power must be non-negative")
        if self.A1 * self.A2 > 0 and self.power > 0:
            raise DomainError("give either amplitudes or power, not both")

    def epsilon(self, params: DeviceParams) -> complex:
        """Complex down-conversion strength for this drive on ``params``."""
        if self.power > 0:
            mag = pdc_strength_from_power(params, self.power, self.Delta)
            return mag * np.exp(1j * (self.phi1 + self.phi2))
        return pdc_strength(params.kerr_K, self)


def pdc_strength(K, drive: PumpDrive) -> complex:
    """``ε = K A₁ A₂ e^{i(φ₁+φ₂)}`` in rad/s."""
    if not K > 0:
        raise DomainError("K must be positive")
    return complex(K * drive.A1 * drive.A2 * np.exp(1j * (drive.phi1 + drive.phi2)))


def pdc_strength_from_power(params: DeviceParams, power, Delta):
    """``|ε| = K P κ_ex² / (ħ ω_s (Δ² + κ²))`` with ``ω_s = 2π f0``.

    Transcribed as published; the expression is not dimensionally closed, so
    treat ``power`` as a calibrated drive parameter rather than SI watts.
    """
    if power < 0:
        raise DomainError("power must be non-negative")
    omega_s = 2 * math.pi * params.f0
    return (
        params.kerr_K * power * params.kappa_ex**2
        / (hbar * omega_s * (Delta**2 + params.kappa**2))
    )


def nkpa_gain(epsilon, kappa):
    """Parametric gain ``cosh²(ε/κ)``."""
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    if epsilon < 0:
        raise DomainError("epsilon magnitude must be non-negative")
    return math.cosh(epsilon / kappa) ** 2


def squeeze_from_gain(gain):
    """Inverse of the gain map: ``r = arcosh(√G)``."""
    if gain < 1:
        raise DomainError("gain must be >= 1")
    return math.acosh(math.sqrt(gain))


@dataclass(frozen=True)
class SqueezeParams:
    epsilon: complex
    r: float
    gain: float

    def __post_init__(self):
        if self.r < 0:
            raise DomainError("r must be non-negative")
        expected = math.cosh(self.r) ** 2
        if abs(self.gain - expected) > 1e-12 * expected:
            raise DomainError("gain must equal cosh(r)^2")

    @classmethod
    def from_drive(cls, params: DeviceParams, drive: PumpDrive):
        eps = drive.epsilon(params)
        r = abs(eps) / params.kappa
        return cls(epsilon=eps, r=r, gain=math.cosh(r) ** 2)

    @classmethod
    def from_gain(cls, gain, kappa=1.0):
        r = squeeze_from_gain(gain)
        return cls(epsilon=complex(r * kappa), r=r, gain=math.cosh(r) ** 2)


@dataclass(frozen=True)
class GaussianTwoModeMoments:
    """Second moments of a zero-mean two-mode Gaussian state.

    ``m_ab = ⟨ab⟩`` and ``c_ab = ⟨a†b⟩``; no single-mode squeezing is modeled.
    """

    n_a: float
    n_b: float
    m_ab: complex = 0j
    c_ab: complex = 0j

    def __post_init__(self):
        if self.n_a < 0 or self.n_b < 0:
            raise DomainError("occupancies must be non-negative")

    def covariance(self):
        """Symmetrized quadrature covariance, ordering ``(x_a, p_a, x_b, p_b)``."""
        m, c = complex(self.m_ab), complex(self.c_ab)
        va = self.n_a + 0.5
        vb = self.n_b + 0.5
        xx = m.real + c.real
        pp = c.real - m.real
        xp = m.imag + c.imag
        px = m.imag - c.imag
        return np.array(
            [
                [va, 0.0, xx, xp],
                [0.0, va, px, pp],
                [xx, px, vb, 0.0],
                [xp, pp, 0.0, vb],
            ]
        )

    def symplectic_eigenvalues(self):
        omega = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
        ev = np.linalg.eigvals(1j * omega @ self.covariance())
        return np.sort(np.abs(ev.real))[::2]

    def is_physical(self, tol=PHYSICALITY_TOL):
        return bool(self.symplectic_eigenvalues()[0] >= 0.5 - tol)

    def check_physical(self, tol=PHYSICALITY_TOL):
        nu = self.symplectic_eigenvalues()[0]
        if nu < 0.5 - tol:
            raise UnphysicalStateError(f"smallest symplectic eigenvalue {nu:.6g} < 1/2")
        return self

    def without_correlation(self):
        return GaussianTwoModeMoments(self.n_a, self.n_b)


@dataclass(frozen=True)
class CorrelationTriple:
    g2_aa: float
    g2_bb: float
    g2_ab: float
    sigma_aa: float = 0.0
    sigma_bb: float = 0.0
    sigma_ab: float = 0.0


def tms_fock_probs(r, n_max):
    """Pair-number distribution ``p_n = (1 − λ) λⁿ``, ``λ = tanh² r``, for n ≤ n_max."""
    if r < 0:
        raise DomainError("r must be non-negative")
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    lam = math.tanh(r) ** 2
    return (1.0 - lam) * lam ** np.arange(n_max + 1)


def fock_g2_cross(r):
    """Cross g² from the Fock expansion: ``⟨n²⟩/⟨n⟩² = (1 + λ)/λ``."""
    lam = math.tanh(r) ** 2
    if lam == 0:
        raise UndefinedCorrelationError("vacuum has no pair correlation")
    return (1.0 + lam) / lam


def tms_moments(r, n_thermal, phase=0.0):
    """Output moments of the amplifier acting on symmetric thermal inputs.

    ``a = √G a_in + √(G−1) b_in†`` with ``⟨a_in†a_in⟩ = ⟨b_in†b_in⟩ = n_thermal``.
    """
    if r < 0:
        raise DomainError("r must be non-negative")
    if n_thermal < 0:
        raise DomainError("n_thermal must be non-negative")
    G = math.cosh(r) ** 2
    n_out = G * n_thermal + (G - 1.0) * (n_thermal + 1.0)
    m = math.sqrt(G * (G - 1.0)) * (2.0 * n_thermal + 1.0) * np.exp(1j * phase)
    return GaussianTwoModeMoments(n_a=n_out, n_b=n_out, m_ab=complex(m), c_ab=0j)


def tms_vacuum_moments(n_mean):
    """Pure two-mode squeezed vacuum with mean occupancy ``n_mean`` per mode."""
    return tms_moments(math.asinh(math.sqrt(n_mean)), 0.0)


def wick_g2(m: GaussianTwoModeMoments) -> CorrelationTriple:
    """Zero-delay g² triple of a zero-mean Gaussian state via Isserlis' theorem."""
    m.check_physical()
    if m.n_a == 0 or m.n_b == 0:
        raise UndefinedCorrelationError("g2 undefined for a mode in vacuum")
    cross = 1.0 + (abs(m.c_ab) ** 2 + abs(m.m_ab) ** 2) / (m.n_a * m.n_b)
    return CorrelationTriple(g2_aa=2.0, g2_bb=2.0, g2_ab=cross)


def classical_bound_margin(t: CorrelationTriple):
    """``g2_ab − (g2_aa + g2_bb)/2``; positive values violate the classical bound."""
    return t.g2_ab - 0.5 * (t.g2_aa + t.g2_bb)


def classical_bound_sigma(t: CorrelationTriple):
    return math.sqrt(t.sigma_ab**2 + 0.25 * (t.sigma_aa**2 + t.sigma_bb**2))


def g2_model_gain(gain, eta):
    """Phenomenological cross correlation ``2 + η / (2(G − 1))``."""
    if not gain > 1:
        raise DomainError("gain must exceed 1")
    if not 0 < eta <= 1:
        raise DomainError("eta must lie in (0, 1]")
    return 2.0 + eta / (2.0 * (gain - 1.0))


def gain_from_g2_model(g2, eta):
    """Invert :func:`g2_model_gain` for the gain."""
    if not g2 > 2:
        raise DomainError("model g2 must exceed 2")
    return 1.0 + eta / (2.0 * (g2 - 2.0))


def eta_nrf(n_thermal):
    """Return ``(η, NRF)`` for symmetric input occupancy ``n_thermal``."""
    if n_thermal < 0:
        raise DomainError("n_thermal must be non-negative")
    eta = 1.0 / (1.0 + 2.0 * n_thermal)
    return eta, 1.0 - eta / 2.0


def occupancy_from_eta(eta):
    if not 0 < eta <= 1:
        raise DomainError("eta must lie in (0, 1]")
    return (1.0 / eta - 1.0) / 2.0
