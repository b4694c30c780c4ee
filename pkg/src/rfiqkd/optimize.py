"""Protocol-parameter optimization of the finite-key rate.

At each distance the free parameters are the key-basis bias, the two decoy
intensity probabilities and the two nonzero intensities,

    (pr_z_a, p_mu, p_nu, mu, nu),      omega = 0 fixed,

optimized by derivative-free simplex descent (Nelder-Mead) over
(mu, nu, pr_z_a) from a 3x3x3 multi-start grid, with the probability pair
scanned on a refined grid inside every objective evaluation.  Iterates are
projected back onto the feasible box/simplex after every move, so every
evaluated vector is feasible.  The procedure uses no randomness: identical
inputs give identical outputs, and ties between starts break
lexicographically on the parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from rfiqkd import channel, finitekey, keyrates

MU_BOUNDS = (0.05, 1.2)
NU_GAP = 0.02  # enforced mu - nu separation and nu floor
PRZ_BOUNDS = {"default": (0.05, 0.98), "three_state": (0.55, 0.98)}
P_FLOOR = 0.02  # minimum probability for each intensity level

NM_ITERATIONS = 200
NM_NO_IMPROVE_BREAK = 25


@dataclass(frozen=True)
class ParameterVector:
    pr_z_a: float
    p_mu: float
    p_nu: float
    mu: float
    nu: float

    @property
    def p_omega(self) -> float:
        return 1.0 - self.p_mu - self.p_nu

    def validate(self):
        if not self.mu > self.nu > 0.0:
            raise ValueError(f"need mu > nu > 0, got {self.mu}, {self.nu}")
        if not 0.0 < self.pr_z_a < 1.0:
            raise ValueError(f"pr_z_a out of (0, 1): {self.pr_z_a}")
        for p in (self.p_mu, self.p_nu, self.p_omega):
            if p <= 0.0:
                raise ValueError(f"intensity probabilities must be positive: {self}")
        return self

    def source(self, n_pulses: float) -> channel.SourceParams:
        return channel.SourceParams(
            mu=self.mu,
            nu=self.nu,
            omega=0.0,
            p_mu=self.p_mu,
            p_nu=self.p_nu,
            p_omega=self.p_omega,
            pr_z_a=self.pr_z_a,
            n_pulses=n_pulses,
        )


def _prz_bounds(variant: str) -> tuple:
    if variant in ("three_state", "bb84_three_state"):
        return PRZ_BOUNDS["three_state"]
    return PRZ_BOUNDS["default"]


def _project(x: np.ndarray, variant: str) -> np.ndarray:
    """Clip (mu, nu, pr_z_a) into the feasible box with mu > nu separation."""
    mu = float(np.clip(x[0], *MU_BOUNDS))
    nu = float(np.clip(x[1], NU_GAP / 2.0, mu - NU_GAP))
    prz = float(np.clip(x[2], *_prz_bounds(variant)))
    return np.array([mu, nu, prz])


def _probability_grid(center=None, width=1.0):
    """Feasible (p_mu, p_nu) candidates, optionally zoomed around a center."""
    if center is None:
        base = [0.2, 0.4, 0.6, 0.8]
        pairs = [(a, b) for a in base for b in base]
    else:
        c_mu, c_nu = center
        offs = np.array([-0.12, 0.0, 0.12]) * width
        pairs = [(c_mu + da, c_nu + db) for da in offs for db in offs]
    out = []
    for p_mu, p_nu in pairs:
        p_mu = min(max(p_mu, P_FLOOR), 1.0 - 2.0 * P_FLOOR)
        p_nu = min(max(p_nu, P_FLOOR), 1.0 - p_mu - P_FLOOR)
        if p_nu < P_FLOOR:
            continue
        out.append((round(p_mu, 6), round(p_nu, 6)))
    return sorted(set(out))


class _RateObjective:
    """Finite-key rate as a function of (mu, nu, pr_z_a), maximized over p's."""

    def __init__(self, variant, params, security, n_pulses):
        self.variant = variant
        self.params = params
        self.security = security
        self.n_pulses = n_pulses
        self.cache: dict = {}
        self.obs_cache: dict = {}
        self.overlaps = channel.overlap_table(variant, params)
        self.evaluations = 0

    def _observables(self, mu: float, nu: float) -> dict:
        # gains depend on the intensities only; share them across the
        # probability grid and the simplex moves that keep (mu, nu)
        key = (round(mu, 6), round(nu, 6))
        if key not in self.obs_cache:
            probe = channel.SourceParams(mu=mu, nu=nu, omega=0.0)
            self.obs_cache[key] = channel.wcs_observables(
                self.variant, self.params, probe, overlaps=self.overlaps
            )
        return self.obs_cache[key]

    def rate(self, vec: ParameterVector) -> float:
        try:
            src = vec.source(self.n_pulses)
        except ValueError:
            return 0.0
        try:
            report = keyrates.wcs_finite_key(
                self.variant,
                self.params,
                src,
                self.security,
                "finite",
                cache=self.cache,
                observables=self._observables(vec.mu, vec.nu),
            )
        except ValueError:
            return 0.0
        self.evaluations += 1
        return report.rate

    def best_over_probs(self, x: np.ndarray) -> tuple:
        mu, nu, prz = x
        best = (-1.0, None)
        for p_mu, p_nu in _probability_grid():
            vec = ParameterVector(prz, p_mu, p_nu, mu, nu)
            r = self.rate(vec)
            if r > best[0]:
                best = (r, vec)
        center = (best[1].p_mu, best[1].p_nu)
        for p_mu, p_nu in _probability_grid(center, width=0.35):
            vec = ParameterVector(prz, p_mu, p_nu, mu, nu)
            r = self.rate(vec)
            if r > best[0]:
                best = (r, vec)
        return best


def _nelder_mead(objective, x0, variant, iterations=NM_ITERATIONS):
    """Simplex descent on -rate over (mu, nu, pr_z_a), projection after each move."""
    step = np.array([0.08, 0.04, 0.06])
    pts = [_project(x0, variant)]
    for i in range(3):
        x = x0.copy()
        x[i] += step[i]
        pts.append(_project(x, variant))
    evals = [objective.best_over_probs(p) for p in pts]
    best_seen = max(zip((e[0] for e in evals), range(4)))
    no_improve = 0
    best_rate = best_seen[0]
    for _ in range(iterations):
        order = sorted(range(4), key=lambda i: -evals[i][0])
        pts = [pts[i] for i in order]
        evals = [evals[i] for i in order]
        if evals[0][0] > best_rate + 1e-12:
            best_rate = evals[0][0]
            no_improve = 0
        else:
            no_improve += 1
            if no_improve >= NM_NO_IMPROVE_BREAK:
                break
        centroid = np.mean(pts[:3], axis=0)
        worst = pts[3]
        refl = _project(centroid + (centroid - worst), variant)
        r_refl = objective.best_over_probs(refl)
        if r_refl[0] > evals[0][0]:
            expa = _project(centroid + 2.0 * (centroid - worst), variant)
            r_expa = objective.best_over_probs(expa)
            pts[3], evals[3] = (expa, r_expa) if r_expa[0] > r_refl[0] else (refl, r_refl)
            continue
        if r_refl[0] > evals[2][0]:
            pts[3], evals[3] = refl, r_refl
            continue
        contr = _project(centroid + 0.5 * (worst - centroid), variant)
        r_contr = objective.best_over_probs(contr)
        if r_contr[0] > evals[3][0]:
            pts[3], evals[3] = contr, r_contr
            continue
        for i in range(1, 4):  # shrink toward the best vertex
            pts[i] = _project(pts[0] + 0.5 * (pts[i] - pts[0]), variant)
            evals[i] = objective.best_over_probs(pts[i])
    order = sorted(range(4), key=lambda i: -evals[i][0])
    return evals[order[0]]


def optimize_rate(
    distance_km: float,
    variant: str,
    params: channel.ChannelParams,
    security: finitekey.SecurityParams,
    n_pulses: float = 1e10,
) -> tuple[ParameterVector, float]:
    """Maximize the finite-key rate over the free protocol parameters.

    Returns (best parameter vector, rate); the rate is 0 (with the best
    vector found) when no positive rate exists at this distance.  The
    multi-start grid and simplex descent are fully deterministic.
    """
    ch = replace(params, distance_km=distance_km)
    objective = _RateObjective(variant, ch, security, n_pulses)
    prz_lo, prz_hi = _prz_bounds(variant)
    starts = [
        np.array([mu, nu_frac * mu, prz])
        for mu in (0.3, 0.55, 0.8)
        for nu_frac in (0.15, 0.35, 0.55)
        for prz in np.linspace(prz_lo + 0.05, prz_hi - 0.05, 3)
    ]
    best = (-1.0, None)
    for x0 in starts:
        r, vec = _nelder_mead(objective, _project(x0, variant), variant)
        if r > best[0] + 1e-15 or (
            r == best[0]
            and vec is not None
            and best[1] is not None
            and _vec_key(vec) < _vec_key(best[1])
        ):
            best = (r, vec)
    rate, vec = best
    if vec is None:
        vec = ParameterVector(0.5 * (prz_lo + prz_hi), 0.4, 0.4, 0.5, 0.1)
    # report the exact (uncached) rate at the winning vector
    exact = keyrates.wcs_finite_key(
        variant, ch, vec.source(n_pulses), security, "finite"
    ).rate
    return vec.validate(), max(exact, 0.0)


def _vec_key(vec: ParameterVector):
    return (vec.pr_z_a, vec.p_mu, vec.p_nu, vec.mu, vec.nu)
