"""Decaying step sequences and the admissibility checkers for each regime.

gamma_t = gamma0 / (t+1)^u damps the consensus coupling; lambda_t =
lambda0 / (t+1)^v is the gradient stepsize. Each convergence regime places
conditions on (u, v, gamma0, lambda0) relative to the weight-matrix spectrum
and the problem constants; the checkers evaluate those conditions verbatim
and emit a rate certificate with the predicted decay exponents.

The parameter-free regimes do not constrain gamma0/lambda0; instead a switch
time is computed after which the constrained-regime inequalities hold on
their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

REGIMES = ("theorem1", "theorem2", "theorem3", "theorem4", "ablation_constant_gamma")

# Assumption-4 margin below which a configuration is flagged as near-boundary.
BOUNDARY_MARGIN = 0.02


@dataclass(frozen=True)
class Schedules:
    gamma0: float
    u: float
    lambda0: float
    v: float
    regime: str = "theorem1"

    def __post_init__(self):
        if self.gamma0 <= 0 or self.lambda0 <= 0:
            raise ValueError("gamma0 and lambda0 must be positive")
        if not (0 <= self.u < 1 and 0 < self.v < 1):
            raise ValueError("exponents must lie in [0,1) / (0,1)")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")

    def gamma(self, t: int) -> float:
        if self.regime == "ablation_constant_gamma":
            return self.gamma0
        return self.gamma0 / (t + 1) ** self.u

    def lam(self, t: int) -> float:
        return self.lambda0 / (t + 1) ** self.v


@dataclass(frozen=True)
class RateCertificate:
    """Predicted decay exponents plus the evaluated theorem constants."""

    beta: float
    beta_regret: float
    t0: int = 0
    constants: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    violations: tuple
    warnings: tuple
    certificate: RateCertificate

    def as_dict(self):
        return {
            "ok": self.ok,
            "violations": list(self.violations),
            "warnings": list(self.warnings),
            "beta": self.certificate.beta,
            "beta_regret": self.certificate.beta_regret,
            "t0": self.certificate.t0,
            "constants": self.certificate.constants,
        }


def _noise_exponent(noise_schedules) -> float:
    return max(ns.varsigma for ns in noise_schedules)


def _sigma_plus(noise_schedules) -> float:
    return max(ns.sigma for ns in noise_schedules)


def _check_assumption4(sched, noise_schedules, violations, warnings):
    vmax = _noise_exponent(noise_schedules)
    for ns in noise_schedules:
        if not 0 < ns.varsigma < 0.5:
            violations.append(
                f"noise growth exponent {ns.varsigma} outside (0, 1/2)")
            break
    if not vmax + 0.5 < sched.u:
        violations.append(
            f"noise condition violated: max varsigma + 1/2 = {vmax + 0.5:.4g}"
            f" not < u = {sched.u:.4g}")
    elif sched.u - (vmax + 0.5) < BOUNDARY_MARGIN:
        warnings.append(
            f"noise condition nearly tight: margin {sched.u - vmax - 0.5:.4g}")


def _theorem1_constants(spec, sched, noise_schedules, m, domain_diameter):
    mu, L = spec.mu, spec.lipschitz
    kd = spec.kappa_sq + spec.grad_bound ** 2
    lam0, gam0, u, v = sched.lambda0, sched.gamma0, sched.u, sched.v
    varsig = _noise_exponent(noise_schedules)
    sig_plus = _sigma_plus(noise_schedules)
    e0 = m * domain_diameter ** 2  # bound on E||theta_0 - theta_0*||^2
    c1 = 32.0 * kd * (2.0 / mu ** 2 + 1.0 / L ** 2)
    c2 = 8.0 * c1 / (3.0 * mu * lam0 * (1.0 - v) * 2.0 ** (v - 1.0))
    c3 = max(32.0 * (1.0 - v) ** 2 * 2.0 ** (1.0 - v) / (mu * lam0), 1.0)
    bracket = (
        c1 * (1.0 + (8.0 * (1.0 - v) + 8.0) / (3.0 * lam0 * mu * (1.0 - v)))
        + 3.0 * m * sig_plus ** 2 * (1.0 + 3.0 * lam0 * mu / 16.0)
        * (gam0 ** 2 + gam0 ** 2 / (2.0 * u - 2.0 * varsig - 1.0))
        + 6.0 * m * kd * (1.0 + 3.0 * lam0 * mu / 16.0)
        * (lam0 ** 2 + lam0 ** 2 / (2.0 * v - 1.0))
    )
    c4 = 32.0 * (1.0 - v) ** 2 / (3.0 * mu * lam0) * e0 + c3 * bracket
    c5 = (3.0 * m * sig_plus ** 2 * (1.0 + 3.0 * lam0 * mu / 16.0)
          * gam0 ** 2 / (2.0 ** (1.0 - 2.0 * u + 2.0 * varsig)
                         * (2.0 * u - 2.0 * varsig - 1.0)))
    c6 = (6.0 * m * kd * (1.0 + 3.0 * lam0 * mu / 16.0)
          * lam0 ** 2 / (2.0 ** (1.0 - 2.0 * v) * (2.0 * v - 1.0)))
    return {"c1": c1, "c2": c2, "c3": c3, "c4": c4, "c5": c5, "c6": c6}


def check_theorem1(spec, W, sched: Schedules, noise_schedules,
                   domain_diameter: float = None) -> CheckResult:
    """Strongly convex constrained regime: 1/2 < u < v < 1 plus spectrum bounds."""
    violations, warnings = [], []
    if spec.mu <= 0:
        violations.append("requires mu > 0")
    if not 0.5 < sched.u:
        violations.append(f"u = {sched.u} not > 1/2")
    if not sched.u < sched.v:
        violations.append(f"u = {sched.u} not < v = {sched.v}")
    if not sched.v < 1:
        violations.append(f"v = {sched.v} not < 1")
    gamma_cap = 1.0 / (-3.0 * W.deltaN) if W.deltaN < 0 else math.inf
    if not sched.gamma0 <= gamma_cap:
        violations.append(f"gamma0 = {sched.gamma0:.6g} exceeds 1/(-3 deltaN) = {gamma_cap:.6g}")
    if spec.mu > 0:
        lam_cap = (-sched.gamma0 * W.delta2 * spec.mu
                   / (spec.mu ** 2 + 8.0 * spec.lipschitz ** 2))
        if not sched.lambda0 <= lam_cap:
            violations.append(f"lambda0 = {sched.lambda0:.6g} exceeds bound {lam_cap:.6g}")
    _check_assumption4(sched, noise_schedules, violations, warnings)
    if sched.regime == "ablation_constant_gamma":
        violations.append("ablation regime uses constant gamma; theorem does not apply")

    varsig = _noise_exponent(noise_schedules)
    beta = min(1.0 - sched.v, 2.0 * sched.u - 2.0 * varsig - 1.0)
    constants = {}
    if spec.mu > 0 and not violations:
        d0 = domain_diameter if domain_diameter is not None else (
            spec.domain.diameter if spec.domain is not None else 1.0)
        constants = _theorem1_constants(spec, sched, noise_schedules, W.m, d0)
    cert = RateCertificate(beta=beta, beta_regret=beta / 2.0, constants=constants)
    return CheckResult(not violations, tuple(violations), tuple(warnings), cert)


def check_theorem2(spec, W, sched: Schedules, noise_schedules,
                   domain_diameter: float = None) -> CheckResult:
    """General convex regime: (1+2u)/3 < v < 1 with its own lambda0 bound."""
    violations, warnings = [], []
    lo = (1.0 + 2.0 * sched.u) / 3.0
    if not lo > 2.0 / 3.0:
        violations.append(f"(1+2u)/3 = {lo:.4g} not > 2/3 (needs u > 1/2)")
    # strict inequality, robust to rounding of the composite bound
    if not sched.v > lo + 1e-12:
        violations.append(f"v = {sched.v} not > (1+2u)/3 = {lo:.4g}")
    if not sched.v < 1:
        violations.append(f"v = {sched.v} not < 1")
    gamma_cap = 1.0 / (-3.0 * W.deltaN) if W.deltaN < 0 else math.inf
    if not sched.gamma0 <= gamma_cap:
        violations.append(f"gamma0 = {sched.gamma0:.6g} exceeds 1/(-3 deltaN) = {gamma_cap:.6g}")
    kd = spec.kappa_sq + spec.grad_bound ** 2
    lam_cap = -W.delta2 * sched.gamma0 / (spec.lipschitz ** 2 + 2.0 * kd)
    if not sched.lambda0 <= lam_cap:
        violations.append(f"lambda0 = {sched.lambda0:.6g} exceeds bound {lam_cap:.6g}")
    _check_assumption4(sched, noise_schedules, violations, warnings)
    if sched.regime == "ablation_constant_gamma":
        violations.append("ablation regime uses constant gamma; theorem does not apply")

    v = sched.v
    constants = {}
    if not violations:
        d0 = domain_diameter if domain_diameter is not None else (
            spec.domain.diameter if spec.domain is not None else 1.0)
        varsig = _noise_exponent(noise_schedules)
        sig_plus = _sigma_plus(noise_schedules)
        m, u, lam0, gam0 = W.m, sched.u, sched.lambda0, sched.gamma0
        denom = 1.0 - 1.0 / 2.0 ** (1.0 - v)
        cbar1 = (2.0 * (3.0 * d0 ** 3 + 1.0) / (2.0 * denom)
                 + 8.0 * kd * (1.0 - v ** 2) / (2.0 * v * denom))
        cbar2 = ((1.0 - v) / (2.0 * lam0 * denom)) * (
            3.0 * m * sig_plus ** 2 * gam0 ** 2 * (2.0 * u - 2.0 * varsig)
            / (2.0 * u - 2.0 * varsig - 1.0)
            + 12.0 * m * kd * lam0 ** 2 * v / (2.0 * v - 1.0)
            + (1.0 + lam0) * d0 ** 2
        )
        cbar3 = d0 ** 2 * (1.0 - v) / (2.0 * denom)
        constants = {"cbar1": cbar1, "cbar2": cbar2, "cbar3": cbar3}
    cert = RateCertificate(beta=(1.0 - v) / 2.0, beta_regret=(1.0 - v) / 2.0,
                           constants=constants)
    return CheckResult(not violations, tuple(violations), tuple(warnings), cert)


def _pow_total(base: float, exponent: float):
    """base ** exponent for base > 0, exact past float range (big-int result)."""
    log_val = exponent * math.log(base)
    if log_val < 700.0:
        return base ** exponent
    from decimal import Decimal, localcontext
    with localcontext() as ctx:
        ctx.prec = 60
        return int((Decimal(base).ln() * Decimal(exponent)).exp()) + 1


def compute_t0(spec, W, sched: Schedules) -> int:
    """Switch time for the parameter-free strongly convex regime (0 < u < v < 1/2).

    After t0 the constrained-regime inequalities on gamma_t and lambda_t/gamma_t
    hold for free, regardless of gamma0 and lambda0.
    """
    if spec.mu <= 0:
        raise ValueError("requires mu > 0")
    if not 0 < sched.u < sched.v < 0.5:
        raise ValueError(f"requires 0 < u < v < 1/2, got u={sched.u}, v={sched.v}")
    a = _pow_total(-3.0 * W.deltaN * sched.gamma0, 1.0 / sched.u) - 1
    ratio = ((spec.mu ** 2 + 8.0 * spec.lipschitz ** 2) * sched.lambda0
             / (-W.delta2 * spec.mu * sched.gamma0))
    b = _pow_total(ratio, 1.0 / (sched.v - sched.u)) - 1
    return max(0, math.ceil(max(a, b)))


def compute_t0_tilde(spec, W, sched: Schedules) -> int:
    """Switch time for the parameter-free convex regime ((2u+1)/3 < v < 1)."""
    lo = (2.0 * sched.u + 1.0) / 3.0
    if not (sched.v > lo + 1e-12 and sched.v < 1.0):
        raise ValueError(f"requires (2u+1)/3 < v < 1, got u={sched.u}, v={sched.v}")
    a = _pow_total(-3.0 * W.deltaN * sched.gamma0, 1.0 / sched.u) - 1
    kd = spec.kappa_sq + spec.grad_bound ** 2
    ratio = ((spec.lipschitz ** 2 + 2.0 * kd) * sched.lambda0
             / (-W.delta2 * sched.gamma0))
    expo = (3.0 * sched.v - 1.0) / 2.0 - sched.u
    b = _pow_total(ratio, 1.0 / expo) - 1
    return max(0, math.ceil(max(a, b)))


def t0_tilde_constants(spec, sched: Schedules, noise_schedules, m,
                       domain_diameter, t0_tilde: int) -> dict:
    """Evaluated regret constants for the parameter-free convex regime."""
    v, u = sched.v, sched.u
    lam0, gam0 = sched.lambda0, sched.gamma0
    kd = spec.kappa_sq + spec.grad_bound ** 2
    d0 = domain_diameter
    varsig = _noise_exponent(noise_schedules)
    sig_plus = _sigma_plus(noise_schedules)
    shrink = 1.0 - ((t0_tilde + 1.0) / (t0_tilde + 2.0)) ** (1.0 - v)
    ct1 = d0 ** 2 * (1.0 - v) / (2.0 * shrink)
    ct2 = ((1.0 - v) / (shrink * 2.0 * lam0)) * (
        (1.0 + lam0 / (t0_tilde + 1.0) ** ((v + 1.0) / 2.0)) * d0 ** 2
        + 3.0 * m * sig_plus ** 2 * gam0 ** 2 * (2.0 * u - 2.0 * varsig)
        / (2.0 * u - 2.0 * varsig - 1.0)
        + 12.0 * m * kd * lam0 ** 2 * v / (2.0 * v - 1.0)
    )
    ct3 = (2.0 * (3.0 * d0 ** 3 + 1.0) / (2.0 * shrink)
           + 8.0 * kd * (1.0 - v ** 2) / (2.0 * v * shrink))
    return {"ct1": ct1, "ct2": ct2, "ct3": ct3}
