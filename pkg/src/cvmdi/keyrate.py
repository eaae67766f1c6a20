"""
Secret key rates under reverse reconciliation.

The asymptotic rate is ``beta_R * I(A:B) - chi(B:E)``. The finite-size rate
replaces ``chi`` with its value on a worst-case covariance matrix built from
confidence bounds on the per-link transmittance and noise, subtracts the
privacy-amplification penalty ``Delta(n)``, and rescales by ``n / N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import EstimationError, ValidationError
from .gaussian import diag_block_covariance, holevo_bound_rr, mutual_information, symplectic_eigenvalues
from .protocol import Scenario, scenario_covariance


@dataclass(frozen=True)
class KeyRateResult:
    I_AB: float
    chi_BE: float
    K: float
    K_raw: float
    regime: str = "asymptotic"
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def no_key(self) -> bool:
        return self.K_raw <= 0


@dataclass(frozen=True)
class FiniteSizeParams:
    """
    Block length and security parameters of the finite-size analysis.

    ``m`` defaults to half the block. ``tb_denominator`` selects which bound
    on Bob's amplitude transmittance enters the worst-case transmittance:
    ``"min"`` divides by the lower bound, ``"max"`` by the upper (conservative) one.
    The noise bound uses the opposite choice.
    """

    N: float = 1e8
    m: float | None = None
    eps_bar: float = 1e-10
    eps_PA: float = 1e-10
    eps_PE: float = 1e-10
    dim_HX: int = 2
    tb_denominator: str = "min"

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", self.N / 2)
        if not 0 < self.m < self.N:
            raise ValidationError(f"need 0 < m < N, got m={self.m}, N={self.N}")
        for name in ("eps_bar", "eps_PA", "eps_PE"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValidationError(f"{name} must lie in (0, 1), got {v}")
        if self.dim_HX < 1:
            raise ValidationError("dim_HX must be positive")
        if self.tb_denominator not in ("min", "max"):
            raise ValidationError("tb_denominator must be 'min' or 'max'")

    @property
    def n(self) -> float:
        return self.N - self.m

    @property
    def z(self) -> float:
        """Two-sided Gaussian quantile for the estimation failure probability."""
        return float(norm.isf(self.eps_PE / 2.0))


@dataclass(frozen=True)
class FiniteSizeEstimates:
    tA_min: float
    tB_min: float
    tB_max: float
    sigmaA2_max: float
    sigmaB2_max: float
    t_min: tuple[float, float]
    tmin_epsmax: tuple[float, float]
    gamma_f: np.ndarray = field(repr=False)


def asymptotic_key_rate(scenario: Scenario) -> KeyRateResult:
    gamma, eq = scenario_covariance(scenario)
    I_ab = mutual_information(gamma)
    chi = holevo_bound_rr(gamma)
    raw = scenario.protocol.beta_R * I_ab - chi
    diag = {
        "T_x": eq.T_x,
        "T_p": eq.T_p,
        "eps_x": eq.eps_x,
        "eps_p": eq.eps_p,
        "nu_AB": symplectic_eigenvalues(gamma),
        "gamma": gamma,
    }
    return KeyRateResult(I_ab, chi, max(0.0, raw), raw, "asymptotic", diag)


def finite_size_delta(n: float, params: FiniteSizeParams | None = None) -> float:
    """Privacy-amplification penalty in bits per key-generation symbol."""
    params = params or FiniteSizeParams()
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return (2 * params.dim_HX + 3) * math.sqrt(math.log2(2.0 / params.eps_bar) / n) + (
        2.0 / n
    ) * math.log2(1.0 / params.eps_PA)


def worst_case_estimates(scenario: Scenario, fs: FiniteSizeParams) -> FiniteSizeEstimates:
    """
    Worst-case covariance matrix from confidence bounds on both links.

    Each link is modelled as ``y = t x + z`` with ``t = sqrt(eta)`` and
    ``Var z = 1 + eta * eps``. With ``m`` estimation symbols and modulation
    variance ``V - 1`` the bounds are::

        t_min = t - z_pe * sqrt(sigma^2 / (m (V - 1)))
        sigma^2_max = sigma^2 (1 + z_pe * sqrt(2 / m))

    The displacement gain is assumed optimal.
    """
    ch, mm, pr = scenario.channel, scenario.matching, scenario.protocol
    m, z = fs.m, fs.z
    sA2 = 1.0 + ch.eta_A * ch.eps_A
    sB2 = 1.0 + ch.eta_B * ch.eps_B
    tA_min = math.sqrt(ch.eta_A) - z * math.sqrt(sA2 / (m * (pr.V_A - 1.0)))
    half_b = z * math.sqrt(sB2 / (m * (pr.V_B - 1.0)))
    tB_min = math.sqrt(ch.eta_B) - half_b
    tB_max = math.sqrt(ch.eta_B) + half_b
    if tA_min <= 0 or tB_min <= 0:
        raise EstimationError(
            f"transmittance bound crossed zero (tA_min={tA_min:.3e}, tB_min={tB_min:.3e}); increase m"
        )
    sA2_max = sA2 * (1.0 + z * math.sqrt(2.0 / m))
    sB2_max = sB2 * (1.0 + z * math.sqrt(2.0 / m))
    if fs.tb_denominator == "min":
        tB_trans, tB_noise = tB_min, tB_max
    else:
        tB_trans, tB_noise = tB_max, tB_min

    V_A, V_B = pr.V_A, pr.V_B
    t_min, noise, offdiag, diag = [], [], [], []
    for eta_mA, eta_mB in ((mm.eta_A1, mm.eta_B1), (mm.eta_A2, mm.eta_B2)):
        r = (V_B - 1.0) / ((V_B + 1.0) * eta_mB)
        T = (tA_min / tB_trans) ** 2 * r
        Teps = r * (sA2_max + sB2_max - 2.0 * eta_mB * tB_noise**2) / tB_noise**2
        if T <= 0:
            raise EstimationError("worst-case transmittance is not positive")
        t_min.append(T)
        noise.append(Teps)
        offdiag.append(math.sqrt(T * eta_mA * (V_A**2 - 1.0)))
        diag.append(T * eta_mA * (V_A - 1.0) + 1.0 + Teps)
    gamma_f = diag_block_covariance(V_A, offdiag[0], -offdiag[1], diag[0], diag[1])
    return FiniteSizeEstimates(
        tA_min=tA_min,
        tB_min=tB_min,
        tB_max=tB_max,
        sigmaA2_max=sA2_max,
        sigmaB2_max=sB2_max,
        t_min=(t_min[0], t_min[1]),
        tmin_epsmax=(noise[0], noise[1]),
        gamma_f=gamma_f,
    )


def finite_size_key_rate(scenario: Scenario, fs: FiniteSizeParams) -> KeyRateResult:
    gamma, eq = scenario_covariance(scenario)
    I_ab = mutual_information(gamma)
    est = worst_case_estimates(scenario, fs)
    chi = holevo_bound_rr(est.gamma_f)
    delta = finite_size_delta(fs.n, fs)
    raw = (fs.n / fs.N) * (scenario.protocol.beta_R * I_ab - chi - delta)
    diag = {
        "T_x": eq.T_x,
        "T_p": eq.T_p,
        "eps_x": eq.eps_x,
        "eps_p": eq.eps_p,
        "delta": delta,
        "estimates": est,
        "nu_f": symplectic_eigenvalues(est.gamma_f),
    }
    return KeyRateResult(I_ab, chi, max(0.0, raw), raw, "finite-size", diag)
