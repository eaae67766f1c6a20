"""
Gaussian-state linear algebra for two-mode covariance matrices.

Conventions
-----------
Quadratures are ordered ``(x_A, p_A, x_B, p_B)`` and measured in shot-noise
units (vacuum variance 1). The symplectic form is the direct sum of
``[[0, 1], [-1, 0]]`` blocks, one per mode.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NumericalError, UnphysicalStateError, ValidationError

# Symplectic eigenvalues this close to 1 are treated as exactly 1 by the entropy.
CLAMP_TOL = 1e-9
# Anything further below 1 than this is reported as an unphysical state.
PHYSICAL_TOL = 1e-6
SYMMETRY_RTOL = 1e-12

_OMEGA1 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), _OMEGA1)


def _as_covariance(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
        raise ValidationError(f"covariance matrix must be square with even size, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValidationError("covariance matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > SYMMETRY_RTOL * scale:
        raise ValidationError("covariance matrix is not symmetric")
    return g


def symplectic_eigenvalues(gamma) -> np.ndarray:
    """
    Symplectic spectrum of a one- or two-mode covariance matrix.

    Parameters
    ----------
    gamma : array_like
        ``2n x 2n`` symmetric covariance matrix, ``n`` in {1, 2}.

    Returns
    -------
    numpy.ndarray
        One value per mode, sorted in descending order.

    Raises
    ------
    ValidationError
        If ``gamma`` is not square, symmetric and finite.
    UnphysicalStateError
        If ``gamma`` is not positive definite or any symplectic eigenvalue
        is below ``1 - 1e-6``.
    """
    g = _as_covariance(gamma)
    n = g.shape[0] // 2
    if n == 1:
        det = float(np.linalg.det(g))
        if det < 0:
            raise UnphysicalStateError(f"one-mode covariance has negative determinant {det:.3e}")
        nu = np.array([np.sqrt(det)])
    else:
        # Williamson's spectrum is only meaningful for positive-definite matrices
        lam = float(np.linalg.eigvalsh(g).min())
        if lam <= 0:
            raise UnphysicalStateError(f"covariance matrix is not positive definite (eigenvalue {lam:.6g})")
        ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ g))
        # eigenvalues of i*Omega*gamma come in +/- pairs
        nu = np.sort(ev)[::-1][::2].copy()
    low = nu[nu < 1.0 - PHYSICAL_TOL]
    if low.size:
        raise UnphysicalStateError(f"symplectic eigenvalue {low.min():.12g} < 1")
    return nu


def entropy_g(nu: float) -> float:
    """Von Neumann entropy (bits) of a thermal mode with symplectic eigenvalue ``nu``."""
    nu = float(nu)
    if not np.isfinite(nu) or nu < 1.0 - CLAMP_TOL:
        raise DomainError(f"entropy_g requires nu >= 1, got {nu!r}")
    if nu <= 1.0:
        return 0.0
    hi = (nu + 1.0) / 2.0
    lo = (nu - 1.0) / 2.0
    return float(hi * np.log2(hi) - lo * np.log2(lo))


def _blocks(g: np.ndarray):
    return g[:2, :2], g[2:, 2:], g[:2, 2:]


def condition_on_heterodyne(gamma, measured_party: str = "B") -> np.ndarray:
    """
    Covariance of the unmeasured mode after a heterodyne detection on the other.

    ``measured_party`` names the mode that is measured (``"A"`` or ``"B"``);
    the returned ``2 x 2`` matrix is ``gamma_rest - C (gamma_meas + I)^-1 C^T``.
    """
    g = _as_covariance(gamma)
    if g.shape != (4, 4):
        raise ValidationError("heterodyne conditioning needs a two-mode (4x4) matrix")
    a_blk, b_blk, c_blk = _blocks(g)
    if measured_party == "B":
        rest, meas, cross = a_blk, b_blk, c_blk
    elif measured_party == "A":
        rest, meas, cross = b_blk, a_blk, c_blk.T
    else:
        raise ValidationError(f"measured_party must be 'A' or 'B', got {measured_party!r}")
    m = meas + np.eye(2)
    det = float(np.linalg.det(m))
    if det <= 1e-300:
        raise NumericalError(f"singular heterodyne kernel (det={det:.3e})")
    out = rest - cross @ np.linalg.solve(m, cross.T)
    return 0.5 * (out + out.T)


def mutual_information(gamma) -> float:
    """
    Shannon mutual information between heterodyne outcomes on both modes.

    The two quadrature pairs are independent for the diagonal-block matrices
    produced by the protocol model, so the result is a sum of two terms of the
    form ``1/2 log2[(V_A+1) / (V_A+1 - a^2/(c+1))]``.
    """
    g = _as_covariance(gamma)
    if g.shape != (4, 4):
        raise ValidationError("mutual information needs a two-mode (4x4) matrix")
    total = 0.0
    for q in (0, 1):
        va, cab, vb = g[q, q], g[q, 2 + q], g[2 + q, 2 + q]
        denom = va + 1.0 - cab * cab / (vb + 1.0)
        if denom <= 0 or vb + 1.0 <= 0:
            raise UnphysicalStateError(
                f"correlation {cab:.6g} too strong for variances ({va:.6g}, {vb:.6g})"
            )
        total += 0.5 * np.log2((va + 1.0) / denom)
    return max(0.0, float(total))


def holevo_bound_rr(gamma) -> float:
    """
    Holevo information between Bob's heterodyne outcome and Eve (reverse reconciliation).

    Eve is assumed to purify the Alice-Bob state, so
    ``chi = S(AB) - S(A | b)``.
    """
    g = _as_covariance(gamma)
    s_ab = sum(entropy_g(v) for v in symplectic_eigenvalues(g))
    cond = condition_on_heterodyne(g, "B")
    s_cond = sum(entropy_g(v) for v in symplectic_eigenvalues(cond))
    return max(0.0, s_ab - s_cond)


def tmsv_covariance(v: float) -> np.ndarray:
    """Two-mode squeezed vacuum with per-mode variance ``v``."""
    if v < 1:
        raise ValidationError(f"TMSV variance must be >= 1, got {v}")
    c = np.sqrt(v * v - 1.0)
    z = np.diag([1.0, -1.0])
    return np.block([[v * np.eye(2), c * z], [c * z, v * np.eye(2)]])


def diag_block_covariance(v_a: float, a: float, b: float, c: float, d: float) -> np.ndarray:
    """Assemble ``[[V_A I, diag(a, b)], [diag(a, b), diag(c, d)]]``."""
    return np.array(
        [
            [v_a, 0.0, a, 0.0],
            [0.0, v_a, 0.0, b],
            [a, 0.0, c, 0.0],
            [0.0, b, 0.0, d],
        ]
    )
