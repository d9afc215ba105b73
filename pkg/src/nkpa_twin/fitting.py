"""Fits and bookkeeping on measured correlation curves.

Both models are fitted with a small Levenberg-Marquardt loop using analytic
Jacobians; scipy's generic optimizers are deliberately not used so that the
iteration cap and stopping rule are explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, DomainError, FitError
from .quantum import g2_model_gain

MAX_ITER = 200
STEP_TOL = 1e-10


def _levenberg_marquardt(resid_jac, p0, max_iter=MAX_ITER, step_tol=STEP_TOL, bounds_ok=None):
    """Minimize ``‖r(p)‖²`` given ``resid_jac(p) -> (r, J)``.

    Returns ``(p, J, cost, iterations)``; raises :class:`FitError` if the
    relative step never falls below ``step_tol``.
    """
    p = np.asarray(p0, dtype=np.float64)
    r, J = resid_jac(p)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        while True:
            try:
                step = -np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10
                if lam > 1e16:
                    raise FitError("singular normal equations", {"iterations": it, "p": p.tolist()})
                continue
            trial = p + step
            if bounds_ok is not None and not bounds_ok(trial):
                lam *= 10
            else:
                r_t, J_t = resid_jac(trial)
                cost_t = float(r_t @ r_t)
                if cost_t <= cost:
                    break
                lam *= 10
            if lam > 1e16:
                # no downhill step exists at machine precision: converged
                return p, J, cost, it
        small = np.all(np.abs(step) <= step_tol * np.maximum(np.abs(p), 1e-300))
        p, r, J, cost = trial, r_t, J_t, cost_t
        lam = max(lam / 10, 1e-12)
        if small:
            return p, J, cost, it
    raise FitError(
        f"no convergence in {max_iter} iterations",
        {"iterations": max_iter, "p": p.tolist(), "cost": cost, "last_step": step.tolist()},
    )


@dataclass(frozen=True)
class DecayFit:
    """``g²(τ) = 1 + γc/(2R) · e^{−γc|τ|}``; ``gamma_c`` in 1/s, ``pair_rate_R`` in pairs/s."""

    gamma_c: float
    pair_rate_R: float
    ratio: float
    residual_norm: float
    covariance: np.ndarray
    iterations: int = 0

    @property
    def gamma_c_hz(self):
        """``γc`` expressed as an ordinary frequency, ``γc / 2π``."""
        return self.gamma_c / (2 * math.pi)

    @property
    def sigma_gamma_c(self):
        return math.sqrt(self.covariance[0, 0])

    @property
    def sigma_R(self):
        return math.sqrt(self.covariance[1, 1])

    def model(self, lags):
        return decay_model(lags, self.gamma_c, self.pair_rate_R)

    def report(self):
        lines = [
            f"gamma_c_per_s = {self.gamma_c!r}",
            f"gamma_c_hz = {self.gamma_c_hz!r}",
            f"pair_rate_R = {self.pair_rate_R!r}",
            f"ratio = {self.ratio!r}",
            f"sigma_gamma_c = {self.sigma_gamma_c!r}",
            f"sigma_R = {self.sigma_R!r}",
            f"residual_norm = {self.residual_norm!r}",
            f"iterations = {self.iterations}",
        ]
        return "\n".join(lines) + "\n"


def decay_model(lags, gamma_c, R):
    return 1.0 + gamma_c / (2.0 * R) * np.exp(-gamma_c * np.abs(lags))


def _decay_start(tau, y, w):
    """Log-linear start: slope of ``log(g² − 1)`` over the first decade of the peak."""
    a = np.abs(tau)
    ex = y - 1.0
    peak = np.max(ex[a == a.min()]) if np.any(ex > 0) else 0.0
    if not peak > 0:
        raise DegenerateModelError("no excess correlation above 1")
    use = (ex > 0.1 * peak) & (ex > 0)
    if np.count_nonzero(np.unique(a[use])) < 1:
        use = ex > 0
    if len(np.unique(a[use])) < 2:
        raise DegenerateModelError("excess correlation confined to a single lag")
    slope, icpt = np.polyfit(a[use], np.log(ex[use]), 1, w=np.sqrt(w[use]) * ex[use])
    gamma = -slope
    if not gamma > 0:
        raise DegenerateModelError("excess correlation does not decay")
    amp = math.exp(icpt)
    return gamma, gamma / (2.0 * amp)


def fit_decay(lags, g2, sigmas, angular=True, max_decays=None):
    """Weighted least-squares fit of the pair-correlation decay.

    With ``angular=False`` the optimizer works on the ordinary frequency
    ``f_c = γc / 2π`` instead; the returned physical parameters are the same.
    ``max_decays`` restricts the fit to ``|τ| ≤ max_decays / γc_start``, which
    keeps the fitted region commensurate across curves of different widths.
    """
    tau = np.asarray(lags, dtype=np.float64)
    y = np.asarray(g2, dtype=np.float64)
    s = np.asarray(sigmas, dtype=np.float64)
    if not (tau.shape == y.shape == s.shape):
        raise DomainError("lags, g2 and sigmas must have equal shapes")
    if np.any(~(s > 0)):
        raise DomainError("sigmas must be positive")
    if len(tau) < 5:
        raise DomainError("need at least 5 lag points")
    w = 1.0 / s**2
    if np.allclose(y, 1.0, rtol=0, atol=1e-12):
        raise DegenerateModelError("curve is identically 1")
    gamma0, R0 = _decay_start(tau, y, w)
    if max_decays is not None:
        keep = np.abs(tau) <= max_decays / gamma0
        if np.count_nonzero(keep) < 5:
            raise DomainError("fit window holds fewer than 5 lags")
        tau, y, s = tau[keep], y[keep], s[keep]
    a = np.abs(tau)
    # fit in (γc, R) or (f_c, R); q holds parameters scaled by their starts
    unit = 1.0 if angular else 2 * math.pi
    p0 = np.array([gamma0 / unit, R0])

    def resid_jac(q):
        gamma = q[0] * p0[0] * unit
        R = q[1] * p0[1]
        e = np.exp(-gamma * a)
        amp = gamma / (2.0 * R)
        r = (1.0 + amp * e - y) / s
        d_gamma = e * (1.0 / (2.0 * R) - amp * a)
        d_R = -amp / R * e
        J = np.column_stack([d_gamma * unit * p0[0], d_R * p0[1]]) / s[:, None]
        return r, J

    q, J, cost, it = _levenberg_marquardt(resid_jac, [1.0, 1.0], bounds_ok=lambda q: np.all(q > 0))
    gamma, R = float(q[0] * p0[0] * unit), float(q[1] * p0[1])
    try:
        cov_q = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError as exc:
        raise DegenerateModelError("parameters not identifiable") from exc
    D = np.diag([p0[0] * unit, p0[1]])
    cov = D @ cov_q @ D
    return DecayFit(gamma, R, gamma / (2.0 * R), math.sqrt(cost), cov, it)


@dataclass(frozen=True)
class EtaFit:
    eta: float
    implied_occupancy: float
    nrf: float
    residual_norm: float
    sigma_eta: float = 0.0

    def report(self):
        return (
            f"eta = {self.eta!r}\n"
            f"sigma_eta = {self.sigma_eta!r}\n"
            f"implied_occupancy = {self.implied_occupancy!r}\n"
            f"nrf = {self.nrf!r}\n"
            f"residual_norm = {self.residual_norm!r}\n"
        )


def fit_eta(gains, g2ab0, sigmas):
    """Fit ``g² = 2 + η / (2(G − 1))`` for the single parameter η."""
    G = np.asarray(gains, dtype=np.float64)
    y = np.asarray(g2ab0, dtype=np.float64)
    s = np.asarray(sigmas, dtype=np.float64)
    if len(G) < 2:
        raise DomainError("need at least 2 points")
    if np.any(G <= 1):
        raise DomainError("all gains must exceed 1")
    if np.any(~(s > 0)):
        raise DomainError("sigmas must be positive")
    x = 1.0 / (2.0 * (G - 1.0))

    def resid_jac(p):
        return (2.0 + p[0] * x - y) / s, (x / s)[:, None]

    # linear in η, so LM lands on the closed-form optimum in one step
    start = float(np.sum(x * (y - 2.0) / s**2) / np.sum(x * x / s**2))
    p, J, cost, _ = _levenberg_marquardt(resid_jac, [start if start > 0 else 0.5])
    eta = float(p[0])
    if not 0 < eta:
        raise FitError("fitted eta is not positive", {"eta": eta})
    n = (1.0 / eta - 1.0) / 2.0
    return EtaFit(eta, n, 1.0 - eta / 2.0, math.sqrt(cost), math.sqrt(1.0 / float(J[:, 0] @ J[:, 0])))


def quantization_snr(bits):
    """Ideal quantizer SNR in dB for a full-scale sine: ``6.08·bits + 1.76``."""
    if bits < 1:
        raise DomainError("bits must be >= 1")
    return 6.08 * bits + 1.76


@dataclass(frozen=True)
class BandwidthReport:
    bandwidths: tuple
    rates: tuple
    ratios: tuple
    rate_ratio: float
    bandwidth_ratio: float
    relative_deviation: float
    ratio_spread: float

    def report(self):
        return (
            f"rate_ratio = {self.rate_ratio!r}\n"
            f"bandwidth_ratio = {self.bandwidth_ratio!r}\n"
            f"relative_deviation = {self.relative_deviation!r}\n"
            f"ratio_spread = {self.ratio_spread!r}\n"
        )


def bandwidth_consistency(fits):
    """Compare pair rates against measurement bandwidths for ``[(bandwidth, fit), ...]``.

    ``fit`` may be a :class:`DecayFit` or a ``(gamma_c, R)`` pair. Rates are
    compared between the widest and narrowest bandwidth; ``ratio_spread`` is
    ``(max − min)/mean`` of the γc/(2R) values.
    """
    fits = list(fits)
    if len(fits) < 2:
        raise DomainError("need at least two fits")
    bws, rates, ratios = [], [], []
    for bw, f in fits:
        if isinstance(f, DecayFit):
            g, R = f.gamma_c, f.pair_rate_R
        else:
            g, R = f
        bws.append(float(bw))
        rates.append(float(R))
        ratios.append(g / (2.0 * R))
    i, j = int(np.argmax(bws)), int(np.argmin(bws))
    rate_ratio = rates[i] / rates[j]
    bw_ratio = bws[i] / bws[j]
    return BandwidthReport(
        tuple(bws), tuple(rates), tuple(ratios), rate_ratio, bw_ratio,
        rate_ratio / bw_ratio - 1.0,
        (max(ratios) - min(ratios)) / float(np.mean(ratios)),
    )


def detuning_sweep_model(delta, base_gain, eta, kappa):
    """Model g²_ab(0) versus signal detuning ``delta`` (Hz).

    The excess gain ``G − 1`` is scaled by the cavity Lorentzian
    ``|(κ/2) / (κ/2 + i 2πδ)|²`` and fed to :func:`g2_model_gain`. This is an
    extrapolation, not a fitted relation.
    """
    if not base_gain > 1:
        raise DomainError("base_gain must exceed 1")
    d = np.atleast_1d(np.asarray(delta, dtype=np.float64))
    half = kappa / 2.0
    lor = half**2 / (half**2 + (2 * np.pi * d) ** 2)
    return np.array([g2_model_gain(1.0 + (base_gain - 1.0) * l, eta) for l in lor])


def effective_gain(delta, base_gain, kappa):
    half = kappa / 2.0
    lor = half**2 / (half**2 + (2 * math.pi * delta) ** 2)
    return 1.0 + (base_gain - 1.0) * lor
