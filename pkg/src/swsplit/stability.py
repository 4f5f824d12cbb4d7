"""Convergence analysis of the explicit source update.

The source half of the splitting advances the velocities with a frozen
drag rate D = g|u| / (k1^2 H).  On a spatially uniform field the update
reduces to a 2x2 damping/rotation recursion with coefficients

    alpha = -tau^2 k0^2 / 2 - tau D + tau^2 D^2 / 2
    beta  =  tau k0 - tau^2 D

and the full three-field amplification matrix is block triangular, so
convergence is governed by the modulus sqrt((1+alpha)^2 + beta^2) of the
velocity eigenpair alone.  Two verdicts are exposed:

* the cubic criterion: a tau^3 - b tau^2 + c tau - d < 0 with the
  closed-form coefficients below, whose real root is the critical step
  tau_c (this is the stricter bound and the one the simulator gate uses);
* the modulus criterion: (1+alpha)^2 + beta^2 < 1 evaluated directly.

The two disagree slightly because the cubic is not the exact expansion
of the modulus condition; both are reported.  With the Chezy drag off
(D = 0) the recursion has modulus >= 1 for every tau, so neither verdict
can ever pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import DEFAULT_H_MIN


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the model."""

    g: float = 9.81          # gravity, m/s^2
    k0: float = 1e-4         # Coriolis coefficient, 1/s
    k1: float = 40.0         # Chezy coefficient, m^(1/2)/s
    xi: float = 3.2e-6       # wind drag coefficient, dimensionless
    h_min: float = DEFAULT_H_MIN  # depth clamp, m

    def __post_init__(self):
        if not (self.g > 0 and self.k1 > 0):
            raise ValueError("g and k1 must be positive")
        if self.k0 < 0 or self.xi < 0 or self.h_min <= 0:
            raise ValueError("k0, xi must be >= 0 and h_min > 0")


@dataclass(frozen=True)
class StabilityReport:
    """All quantities of one stability evaluation."""

    tau: float
    speed: float
    depth: float
    drag: float                       # D, 1/s
    alpha: float
    beta: float
    modulus: float                    # |velocity eigenpair| of the update
    cubic: tuple                      # (a, b, c, d)
    tau_c_cubic: float                # nan when D == 0 (never convergent)
    tau_c_modulus: float
    convergent_cubic: bool
    convergent_modulus: bool


def drag_coefficient(speed, H, params: PhysicalParams):
    """Linearized Chezy drag rate D = g|u| / (k1^2 H), 1/s."""
    return params.g * speed / (params.k1 ** 2 * H)


def step_coefficients(tau, k0, D):
    """Damping/rotation pair (alpha, beta) used by the convergence analysis."""
    alpha = -tau ** 2 * k0 ** 2 / 2.0 - tau * D + tau ** 2 * D ** 2 / 2.0
    beta = tau * k0 - tau ** 2 * D
    return alpha, beta


def source_update_matrix(tau, k0, D):
    """Exact velocity map of one explicit sub-step on a uniform field.

    With the drag rate frozen the source term is linear, R(u) = G u with
    G = [[-D, k0], [-k0, -D]], and the two-stage update applies exactly

        I + tau G + tau^2/2 G^2.

    The diagonal reproduces ``step_coefficients``' alpha; the rotation
    entry is tau*k0 - tau^2*D*k0, which the analysis pair approximates by
    tau*k0 - tau^2*D.  This matrix is the oracle the uniform-field
    equivalence tests compare the assembled solver against.
    """
    # G^2 = [[D^2 - k0^2, -2 D k0], [2 D k0, D^2 - k0^2]]; the polynomial
    # keeps the scaled-rotation form [[p, q], [-q, p]] exactly
    p = 1.0 - tau * D + 0.5 * tau ** 2 * (D * D - k0 * k0)
    q = tau * k0 - tau ** 2 * D * k0
    return np.array([[p, q], [-q, p]])


def source_amplification_matrix(alpha, beta):
    """3x3 update matrix of the source sub-step on (eta, u1, u2)."""
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0 + alpha, beta],
        [0.0, -beta, 1.0 + alpha],
    ])


def coupled_amplification_matrix(alpha, beta, tau_tilde, theta1, grad_h):
    """Amplification matrix with the elevation row coupled to a bed slope.

    ``grad_h`` is the local bed gradient (dH/dx1, dH/dx2).  The velocity
    block is identical to :func:`source_amplification_matrix`, so the
    eigenvalue moduli do not depend on tau_tilde, theta1 or the slope.
    """
    hx, hy = grad_h
    row0 = [
        1.0,
        -tau_tilde * (hx + hy * theta1 * alpha - hy * theta1 * beta),
        -tau_tilde * (hy + hx * theta1 * beta - hy * theta1 * alpha),
    ]
    J = source_amplification_matrix(alpha, beta)
    J[0, :] = row0
    return J


def velocity_mode_modulus(alpha, beta):
    """Modulus of the velocity eigenpair (1 + alpha) +/- i beta."""
    return math.hypot(1.0 + alpha, beta)


def cubic_coefficients(k0, D):
    """Coefficients (a, b, c, d) of the convergence cubic a t^3 - b t^2 + c t - d."""
    a = k0 ** 4 + D ** 2 * (4.0 - k0 ** 2) + 4.0 * D ** 2
    b = 4.0 * D * (D ** 2 + 2.0 * k0 - k0 ** 2)
    c = 8.0 * D ** 2
    d = 8.0 * D
    return a, b, c, d


def modulus_cubic_coefficients(k0, D):
    """Exact-expansion variant of the cubic; only the t^3 coefficient differs.

    Expanding (1+alpha)^2 + beta^2 < 1 and dividing by tau gives the same
    b, c, d as :func:`cubic_coefficients` with leading coefficient
    (D^2 - k0^2)^2 + 4 D^2.
    """
    a = (D ** 2 - k0 ** 2) ** 2 + 4.0 * D ** 2
    _, b, c, d = cubic_coefficients(k0, D)
    return a, b, c, d


def _real_cbrt(x):
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _bisect_cubic(a, b, c, d, lo=0.0, hi=1e6):
    f = lambda t: ((a * t - b) * t + c) * t - d
    if not (f(lo) < 0.0 < f(hi)):
        raise ValueError("cubic has no sign change on the bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_time_step(a, b, c, d):
    """Real positive root of a t^3 - b t^2 + c t - d = 0 in closed form.

    Uses the Cardano resolvent

        q = 2 b^3 - 9 a b c + 27 a^2 d + sqrt(4 (-b^2 + 3 a c)^3 + (...)^2)
        tau_c = b/(3a) - 2^(1/3) (-b^2 + 3 a c) / (3 a q^(1/3))
                + q^(1/3) / (2^(1/3) 3 a)

    with real cube roots.  A negative discriminant (three real roots) or a
    vanishing resolvent falls back to bisection; the triple-root case
    q = 0, -b^2 + 3ac = 0 returns b/(3a) directly.

    Raises ``ValueError`` when d <= 0 (D = 0 regime: no positive root, the
    scheme is never convergent).
    """
    if a <= 0.0 or d <= 0.0:
        raise ValueError("no positive root: requires a > 0 and d > 0 (D != 0)")
    p0 = -b * b + 3.0 * a * c
    p1 = 2.0 * b ** 3 - 9.0 * a * b * c + 27.0 * a * a * d
    disc = 4.0 * p0 ** 3 + p1 * p1
    if disc < 0.0:
        return _bisect_cubic(a, b, c, d)
    q = p1 + math.sqrt(disc)
    if q == 0.0:
        if p0 == 0.0:
            return b / (3.0 * a)
        return _bisect_cubic(a, b, c, d)
    cr = _real_cbrt(q)
    cbrt2 = 2.0 ** (1.0 / 3.0)
    tau_c = b / (3.0 * a) - cbrt2 * p0 / (3.0 * a * cr) + cr / (cbrt2 * 3.0 * a)
    residual = ((a * tau_c - b) * tau_c + c) * tau_c - d
    if not (tau_c > 0.0 and abs(residual) < 1e-9 * d):
        return _bisect_cubic(a, b, c, d)
    return tau_c


def is_convergent_cubic(tau, k0, D):
    """Cubic criterion verdict: a tau^3 - b tau^2 + c tau - d < 0 (strict)."""
    a, b, c, d = cubic_coefficients(k0, D)
    return ((a * tau - b) * tau + c) * tau - d < 0.0


def is_convergent_modulus(tau, k0, D):
    """Exact modulus verdict: (1 + alpha)^2 + beta^2 < 1 (strict)."""
    alpha, beta = step_coefficients(tau, k0, D)
    return (1.0 + alpha) ** 2 + beta ** 2 < 1.0


def critical_time_step_for_drag(k0, D):
    """tau_c of the cubic criterion, nan when D == 0."""
    if D == 0.0:
        return math.nan
    return critical_time_step(*cubic_coefficients(k0, D))


def build_report(tau, speed, depth, params: PhysicalParams) -> StabilityReport:
    """Evaluate every analysis quantity for one (tau, |u|, H) operating point."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if depth <= 0.0:
        raise ValueError("depth must be positive")
    if speed < 0.0:
        raise ValueError("speed must be >= 0")
    D = drag_coefficient(speed, depth, params)
    alpha, beta = step_coefficients(tau, params.k0, D)
    cubic = cubic_coefficients(params.k0, D)
    if D == 0.0:
        tau_c_cubic = math.nan
        tau_c_modulus = math.nan
    else:
        tau_c_cubic = critical_time_step(*cubic)
        tau_c_modulus = critical_time_step(*modulus_cubic_coefficients(params.k0, D))
    modulus = velocity_mode_modulus(alpha, beta)
    return StabilityReport(
        tau=tau,
        speed=speed,
        depth=depth,
        drag=D,
        alpha=alpha,
        beta=beta,
        modulus=modulus,
        cubic=cubic,
        tau_c_cubic=tau_c_cubic,
        tau_c_modulus=tau_c_modulus,
        convergent_cubic=is_convergent_cubic(tau, params.k0, D),
        convergent_modulus=modulus < 1.0,
    )
