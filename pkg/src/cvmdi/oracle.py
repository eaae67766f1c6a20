"""
Monte-Carlo check of the analytic covariance matrix.

Every mode is propagated shot by shot through the relay in the Heisenberg
picture: TMSV sources, channel loss with excess noise, projection onto the
detector modes, the balanced beam splitter, and Bob's displacement. All maps
are linear, so sampling Gaussian quadratures is exact.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .gaussian import condition_on_heterodyne, tmsv_covariance
from .protocol import GainSettings, Scenario, scenario_covariance

MIN_SHOTS = 10_000
CHUNK = 1 << 17
Z_FAIL = 4.0
LABELS = ("x_A", "p_A", "x_B", "p_B")


@dataclass(frozen=True)
class QuadratureSample:
    """Per-shot quadratures. Each attribute is an ``(shots, 2)`` array of (x, p)."""

    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    E2: np.ndarray
    E5: np.ndarray
    A2_perp: np.ndarray
    B2_perp: np.ndarray
    A_prime: np.ndarray
    B_prime: np.ndarray
    C: np.ndarray
    D: np.ndarray
    B1_prime: np.ndarray

    def retained(self) -> np.ndarray:
        """``(shots, 4)`` samples of (x_A1, p_A1, x_B1', p_B1')."""
        return np.hstack([self.A1, self.B1_prime])


@dataclass(frozen=True)
class CovarianceEstimate:
    cov: np.ndarray
    stderr: np.ndarray
    shots: int
    seed: int


@dataclass(frozen=True)
class OracleReport:
    z: np.ndarray = field(repr=False)
    max_abs_z: float
    worst_entry: str
    passed: bool
    seed: int
    shots: int
    threshold: float = Z_FAIL

    def failing_entries(self) -> list[str]:
        out = []
        for i in range(4):
            for j in range(i, 4):
                if abs(self.z[i, j]) > self.threshold:
                    out.append(f"{LABELS[i]},{LABELS[j]}")
        return out

    def to_text(self) -> str:
        lines = [
            f"status: {'PASS' if self.passed else 'FAIL'}",
            f"seed: {self.seed}",
            f"shots: {self.shots}",
            f"threshold_z: {self.threshold:g}",
            f"max_abs_z: {self.max_abs_z:.4f}",
            f"worst_entry: {self.worst_entry}",
        ]
        for i in range(4):
            for j in range(i, 4):
                lines.append(f"z[{LABELS[i]},{LABELS[j]}]: {self.z[i, j]:+.4f}")
        fails = self.failing_entries()
        if fails:
            lines.append("failing: " + ";".join(fails))
        return "\n".join(lines) + "\n"


def _tmsv_pairs(rng, v: float, shots: int) -> tuple[np.ndarray, np.ndarray]:
    L = np.linalg.cholesky(tmsv_covariance(v))
    s = rng.standard_normal((shots, 4)) @ L.T
    return s[:, :2], s[:, 2:]


def sample_quadratures(scenario: Scenario, shots: int, rng: np.random.Generator,
                       gains: GainSettings | None = None) -> QuadratureSample:
    ch, mm, pr = scenario.channel, scenario.matching, scenario.protocol
    gains = gains if gains is not None else scenario.resolved_gains()
    eta_A, eta_B = ch.eta_A, ch.eta_B
    A1, A2 = _tmsv_pairs(rng, pr.V_A, shots)
    B1, B2 = _tmsv_pairs(rng, pr.V_B, shots)
    E2 = rng.standard_normal((shots, 2))
    E5 = rng.standard_normal((shots, 2))
    A_perp = rng.standard_normal((shots, 2))
    B_perp = rng.standard_normal((shots, 2))
    noise_A = rng.standard_normal((shots, 2)) * math.sqrt(eta_A * ch.eps_A)
    noise_B = rng.standard_normal((shots, 2)) * math.sqrt(eta_B * ch.eps_B)

    # column 0 is projected on the x detector's mode, column 1 on the p detector's
    mA = np.array([mm.eta_A1, mm.eta_A2])
    mB = np.array([mm.eta_B1, mm.eta_B2])
    A_prime = (
        math.sqrt(eta_A) * (np.sqrt(mA) * A2 + np.sqrt(1.0 - mA) * A_perp)
        + math.sqrt(1.0 - eta_A) * E2
        + noise_A
    )
    B_prime = (
        math.sqrt(eta_B) * (np.sqrt(mB) * B2 + np.sqrt(1.0 - mB) * B_perp)
        + math.sqrt(1.0 - eta_B) * E5
        + noise_B
    )
    C = (A_prime - B_prime) / math.sqrt(2.0)
    D = (A_prime + B_prime) / math.sqrt(2.0)
    B1_prime = np.column_stack([B1[:, 0] + gains.g_x * C[:, 0], B1[:, 1] + gains.g_p * D[:, 1]])
    return QuadratureSample(A1, A2, B1, B2, E2, E5, A_perp, B_perp, A_prime, B_prime, C, D, B1_prime)


def _chunk_moments(scenario, gains, shots, seed_seq):
    rng = np.random.default_rng(seed_seq)
    x = sample_quadratures(scenario, shots, rng, gains).retained()
    return x.sum(axis=0), x.T @ x


def propagate(scenario: Scenario, shots: int = 1_000_000, seed: int = 0,
              gains: GainSettings | None = None, workers: int = 1) -> CovarianceEstimate:
    """
    Sample covariance of (x_A1, p_A1, x_B1', p_B1') with Gaussian standard errors.

    Shots are split into fixed-size chunks with independent seeds spawned from
    ``seed``; moments are merged in chunk order, so the result does not depend
    on ``workers``.
    """
    shots = int(shots)
    if shots < MIN_SHOTS:
        raise ValidationError(f"need at least {MIN_SHOTS} shots, got {shots}")
    gains = gains if gains is not None else scenario.resolved_gains()
    sizes = [CHUNK] * (shots // CHUNK)
    if shots % CHUNK:
        sizes.append(shots % CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, seqs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: _chunk_moments(scenario, gains, *j), jobs))
    else:
        parts = [_chunk_moments(scenario, gains, *j) for j in jobs]
    s1 = np.zeros(4)
    s2 = np.zeros((4, 4))
    for a, b in parts:
        s1 += a
        s2 += b
    mean = s1 / shots
    cov = (s2 - shots * np.outer(mean, mean)) / (shots - 1)
    cov = 0.5 * (cov + cov.T)
    var = np.diag(cov)
    stderr = np.sqrt((np.outer(var, var) + cov**2) / shots)
    return CovarianceEstimate(cov, stderr, shots, seed)


def oracle_report(analytic, estimate: CovarianceEstimate, threshold: float = Z_FAIL) -> OracleReport:
    """Per-entry z-scores of the analytic matrix against the Monte-Carlo estimate."""
    analytic = np.asarray(analytic, dtype=float)
    diff = analytic - estimate.cov
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(estimate.stderr > 0, diff / estimate.stderr, np.where(diff == 0, 0.0, np.inf))
    iu = np.triu_indices(4)
    k = int(np.argmax(np.abs(z[iu])))
    i, j = iu[0][k], iu[1][k]
    max_z = float(abs(z[i, j]))
    return OracleReport(
        z=z,
        max_abs_z=max_z,
        worst_entry=f"{LABELS[i]},{LABELS[j]}",
        passed=bool(max_z <= threshold),
        seed=estimate.seed,
        shots=estimate.shots,
        threshold=threshold,
    )


def heterodyne_regression(scenario: Scenario, shots: int = 1_000_000, seed: int = 0) -> tuple[float, float, float]:
    """
    Regress x_A1 on Bob's simulated heterodyne outcome of x_B1'.

    Returns ``(residual_variance, standard_error, prediction)`` where the
    prediction is the x-entry of the heterodyne-conditioned covariance
    computed from the analytic matrix.
    """
    rng = np.random.default_rng(seed)
    s = sample_quadratures(scenario, shots, rng)
    het = (s.B1_prime[:, 0] + rng.standard_normal(shots)) / math.sqrt(2.0)
    y = s.A1[:, 0]
    X = np.column_stack([np.ones(shots), het])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rv = float(resid.var(ddof=2))
    gamma, _ = scenario_covariance(scenario)
    pred = float(condition_on_heterodyne(gamma, "B")[0, 0])
    return rv, rv * math.sqrt(2.0 / shots), pred
