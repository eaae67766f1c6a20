"""
CV-MDI topology mapped onto its equivalent one-way channel.

Alice and Bob each send one arm of a TMSV state to an untrusted relay
(Charlie) that interferes the two arms on a balanced beam splitter and
homodynes x of one output and p of the other. Each sender's temporal mode
overlaps each detector's mode with its own coefficient, giving four matching
coefficients. Bob displaces his retained mode by the announced outcomes,
scaled by gains ``g_x`` and ``g_p``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergentGainError, UnphysicalStateError, ValidationError
from .gaussian import diag_block_covariance, symplectic_eigenvalues


def transmittance(alpha: float, length: float) -> float:
    """Fiber power transmittance ``10**(-alpha * L / 10)`` for loss in dB/km and length in km."""
    if length < 0:
        raise ValidationError(f"distance must be non-negative, got {length}")
    if alpha <= 0:
        raise ValidationError(f"fiber loss must be positive, got {alpha}")
    return 10.0 ** (-alpha * length / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Two fiber links (Alice-Charlie, Bob-Charlie) with input-referred excess noise in SNU."""

    L_AC: float = 0.0
    L_BC: float = 0.0
    eps_A: float = 0.002
    eps_B: float = 0.002
    alpha: float = 0.2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValidationError(f"alpha must be positive, got {self.alpha}")
        if self.L_AC < 0 or self.L_BC < 0:
            raise ValidationError(f"distances must be non-negative, got ({self.L_AC}, {self.L_BC})")
        if self.eps_A < 0 or self.eps_B < 0:
            raise ValidationError("excess noise must be non-negative")

    @property
    def eta_A(self) -> float:
        return transmittance(self.alpha, self.L_AC)

    @property
    def eta_B(self) -> float:
        return transmittance(self.alpha, self.L_BC)

    @property
    def chi_A(self) -> float:
        return (1.0 - self.eta_A) / self.eta_A + self.eps_A

    @property
    def chi_B(self) -> float:
        return (1.0 - self.eta_B) / self.eta_B + self.eps_B


@dataclass(frozen=True)
class ModeMatchingSet:
    """
    Overlaps between each sender's mode and each relay detector's mode.

    ``eta_A1``/``eta_B1`` refer to the x-measuring detector, ``eta_A2``/``eta_B2``
    to the p-measuring one.
    """

    eta_A1: float = 1.0
    eta_A2: float = 1.0
    eta_B1: float = 1.0
    eta_B2: float = 1.0

    def __post_init__(self):
        for name in ("eta_A1", "eta_A2", "eta_B1", "eta_B2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def symmetric(cls, eta_A: float = 1.0, eta_B: float = 1.0) -> "ModeMatchingSet":
        """Both detectors see the same overlap with a given sender."""
        return cls(eta_A, eta_A, eta_B, eta_B)

    def swapped(self) -> "ModeMatchingSet":
        """Exchange the roles of the two detectors."""
        return ModeMatchingSet(self.eta_A2, self.eta_A1, self.eta_B2, self.eta_B1)


@dataclass(frozen=True)
class ProtocolParams:
    V_A: float = 40.0
    V_B: float = 40.0
    beta_R: float = 1.0

    def __post_init__(self):
        if not (self.V_A > 1 and self.V_B > 1):
            raise ValidationError(f"variances must exceed 1 SNU, got ({self.V_A}, {self.V_B})")
        if not 0 < self.beta_R <= 1:
            raise ValidationError(f"beta_R must lie in (0, 1], got {self.beta_R}")


@dataclass(frozen=True)
class GainSettings:
    """Displacement gains applied to the x and p outcomes. Zero disables the displacement."""

    g_x: float
    g_p: float

    def __post_init__(self):
        for name in ("g_x", "g_p"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class EquivalentOneWay:
    """
    Equivalent one-way channel seen by Alice's retained mode and Bob's displaced mode.

    ``T_x``/``T_p`` include Alice's mode-matching factor. ``relay_x``/``relay_p``
    are the same transmittances without it (``eta_A * g**2 / 2``); the excess
    noises ``eps_x``/``eps_p`` are referred to the latter.
    """

    T_x: float
    T_p: float
    eps_x: float
    eps_p: float
    relay_x: float
    relay_p: float


@dataclass(frozen=True)
class Scenario:
    """One fully specified operating point."""

    channel: ChannelParams = field(default_factory=ChannelParams)
    matching: ModeMatchingSet = field(default_factory=ModeMatchingSet)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    gains: GainSettings | None = None

    def resolved_gains(self) -> GainSettings:
        if self.gains is not None:
            return self.gains
        return optimal_gains(self.channel, self.matching, self.protocol)

    def with_distances(self, L_AC: float, L_BC: float) -> "Scenario":
        return replace(self, channel=replace(self.channel, L_AC=L_AC, L_BC=L_BC))


def optimal_gains(channel: ChannelParams, matching: ModeMatchingSet,
                  protocol: ProtocolParams) -> GainSettings:
    """Gains that minimise the equivalent excess noise in each quadrature."""
    eta_B = channel.eta_B
    V_B = protocol.V_B
    gains = []
    for label, eta_m in (("eta_B1", matching.eta_B1), ("eta_B2", matching.eta_B2)):
        if eta_m <= 0:
            raise DivergentGainError(f"optimal gain diverges for {label} = 0")
        gains.append(math.sqrt(2.0 * (V_B - 1.0) / (eta_m * eta_B * (V_B + 1.0))))
    return GainSettings(*gains)


def displacement_k(eta_B: float, eta_m_B: float) -> float:
    """Prepare-and-measure correction gain that maximises the key rate."""
    if eta_B <= 0 or eta_m_B <= 0:
        raise DivergentGainError("correction gain diverges for zero transmittance or matching")
    return math.sqrt(2.0 / (eta_B * eta_m_B))


def pm_eb_gain(k_B: float, V_B: float) -> float:
    """Entanglement-based displacement gain equivalent to the PM correction gain ``k_B``."""
    if V_B <= 1:
        raise ValidationError(f"V_B must exceed 1, got {V_B}")
    return k_B * math.sqrt((V_B - 1.0) / (V_B + 1.0))


def _excess_noise(eta_A, eta_B, chi_A, chi_B, eta_m_B, g, V_B) -> float:
    if g <= 0:
        raise ValidationError("the equivalent excess noise is undefined for a zero gain")
    mismatch = math.sqrt(2.0) / g * math.sqrt(V_B - 1.0) - math.sqrt(eta_m_B * eta_B * (V_B + 1.0))
    return (
        1.0
        + (eta_B * (chi_B + 1.0 - 2.0 * eta_m_B) + eta_A * chi_A) / eta_A
        + mismatch**2 / eta_A
    )


def optimal_excess_noise(channel: ChannelParams, eta_m_B: float) -> float:
    """Equivalent excess noise at the optimal gain: ``eps_A + [eta_B (eps_B - 2 eta_mB) + 2] / eta_A``."""
    eta_A, eta_B = channel.eta_A, channel.eta_B
    return channel.eps_A + (eta_B * (channel.eps_B - 2.0 * eta_m_B) + 2.0) / eta_A


def _clamp_noise(value: float, label: str) -> float:
    if value < 0:
        if value < -1e-9:
            warnings.warn(f"{label} = {value:.3e} < 0 clamped to 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return value


def equivalent_channel(channel: ChannelParams, matching: ModeMatchingSet,
                       protocol: ProtocolParams, gains: GainSettings | None = None) -> EquivalentOneWay:
    """
    Transmittance and excess noise of the equivalent one-way channel, per quadrature.

    Works for arbitrary gains; with the optimal gains the noise reduces to
    :func:`optimal_excess_noise`.
    """
    eta_A, eta_B = channel.eta_A, channel.eta_B
    if eta_A <= 0:
        raise ValidationError("Alice's channel transmittance is zero")
    if gains is None:
        gains = optimal_gains(channel, matching, protocol)
    chi_A, chi_B = channel.chi_A, channel.chi_B
    relay_x = eta_A / 2.0 * gains.g_x**2
    relay_p = eta_A / 2.0 * gains.g_p**2
    eps_x = _excess_noise(eta_A, eta_B, chi_A, chi_B, matching.eta_B1, gains.g_x, protocol.V_B)
    eps_p = _excess_noise(eta_A, eta_B, chi_A, chi_B, matching.eta_B2, gains.g_p, protocol.V_B)
    return EquivalentOneWay(
        T_x=matching.eta_A1 * relay_x,
        T_p=matching.eta_A2 * relay_p,
        eps_x=_clamp_noise(eps_x, "eps_x"),
        eps_p=_clamp_noise(eps_p, "eps_p"),
        relay_x=relay_x,
        relay_p=relay_p,
    )


def covariance_matrix(channel: ChannelParams, matching: ModeMatchingSet,
                      protocol: ProtocolParams, eq: EquivalentOneWay | None = None) -> np.ndarray:
    """
    Covariance matrix of Alice's retained mode and Bob's displaced mode.

    Alice's mismatch acts as an extra beam splitter in front of the relay, so
    it scales the correlated signal (``T_x``) but not the noise that enters
    after her projection (``relay_x * eps_x``).
    """
    if eq is None:
        eq = equivalent_channel(channel, matching, protocol)
    V_A = protocol.V_A
    a = math.sqrt(eq.T_x * (V_A**2 - 1.0))
    b = -math.sqrt(eq.T_p * (V_A**2 - 1.0))
    c = eq.T_x * (V_A - 1.0) + 1.0 + eq.relay_x * eq.eps_x
    d = eq.T_p * (V_A - 1.0) + 1.0 + eq.relay_p * eq.eps_p
    gamma = diag_block_covariance(V_A, a, b, c, d)
    try:
        symplectic_eigenvalues(gamma)
    except UnphysicalStateError as exc:
        raise UnphysicalStateError(f"{exc} for {channel}, {matching}, {protocol}, {eq}") from None
    return gamma


def scenario_covariance(scenario: Scenario) -> tuple[np.ndarray, EquivalentOneWay]:
    eq = equivalent_channel(scenario.channel, scenario.matching, scenario.protocol,
                            scenario.resolved_gains())
    return covariance_matrix(scenario.channel, scenario.matching, scenario.protocol, eq), eq
