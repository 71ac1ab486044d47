"""Heaviside staircases and their piecewise-linear regularizations.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ThresholdLadder:
    """Thresholds ``mu``, intensity ``lam`` and inner boundary level ``M``."""

    mu: tuple
    lam: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(np.asarray(self.mu, dtype=float)))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "M", float(self.M))
        if not self.M > 0:
            raise ValidationError("M must be positive")
        if self.lam < 0:
            raise ValidationError("lambda must be nonnegative")
        bounds = (0.0,) + mu + (self.M,)
        if any(not a < b for a, b in zip(bounds[:-1], bounds[1:])):
            raise ValidationError("thresholds must satisfy 0 < mu_1 < ... < mu_n < M")

    @property
    def n(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class RegularizationSchedule:
    """Ramp widths plus the geometric continuation parameters."""

    eps: tuple
    decay: float = 0.5
    floor: float = 1e-4

    def __post_init__(self):
        eps = tuple(float(e) for e in np.atleast_1d(np.asarray(self.eps, dtype=float)))
        object.__setattr__(self, "eps", eps)
        if not 0.0 < self.decay < 1.0:
            raise ValidationError("decay must lie in (0, 1)")
        if not self.floor > 0:
            raise ValidationError("floor must be positive")

    def validate(self, ladder: ThresholdLadder) -> None:
        if len(self.eps) != ladder.n:
            raise ValidationError(
                f"schedule has {len(self.eps)} widths for {ladder.n} thresholds")
        upper = np.diff(np.append(ladder.mu, ladder.M))
        for i, (e, gap) in enumerate(zip(self.eps, upper), start=1):
            if not 0.0 < e < gap:
                raise ValidationError(
                    f"eps_{i}={e} violates 0 < eps_i < mu_(i+1) - mu_i = {gap}")

    def scaled(self, factor: float) -> "RegularizationSchedule":
        return RegularizationSchedule(tuple(e * factor for e in self.eps),
                                      self.decay, self.floor)

    def stages(self):
        """Yield the widths of every continuation stage, coarsest first."""
        eps = np.asarray(self.eps, dtype=float)
        yield tuple(eps)
        while np.any(eps > self.floor):
            eps = eps * self.decay
            yield tuple(eps)


def heaviside(t):
    """Closed Heaviside step: 1 for ``t >= 0``, else 0."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0.0, 1.0, 0.0)
    return out if out.ndim else float(out)


def staircase(t, ladder: ThresholdLadder):
    """``lam * #{i : t >= mu_i}``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for mu in ladder.mu:
        out += t >= mu
    out = ladder.lam * out
    return out if out.ndim else float(out)


def _ramps(t, mu, eps):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for m, e in zip(mu, eps):
        out += np.clip((t - m) / e, 0.0, 1.0)
    return out


def staircase_reg(t, ladder: ThresholdLadder, eps):
    """Continuous ramp staircase ``lam * H_{eps,mu}(t)``.

    ``eps`` is either a :class:`RegularizationSchedule` or a sequence of widths.
    Between consecutive thresholds each ramp rises linearly from ``i-1`` to
    ``i`` on ``[mu_i, mu_i + eps_i]``; the ramps never overlap because
    ``eps_i < mu_(i+1) - mu_i``.
    """
    eps = _widths(eps, ladder)
    out = ladder.lam * _ramps(t, ladder.mu, eps)
    return out if np.ndim(out) else float(out)


def staircase_reg_slope(t, ladder: ThresholdLadder, eps):
    """Derivative of :func:`staircase_reg`, taking the right slope at ``mu_i``
    and the left slope at ``mu_i + eps_i``."""
    eps = _widths(eps, ladder)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for m, e in zip(ladder.mu, eps):
        out += np.where((t >= m) & (t < m + e), 1.0 / e, 0.0)
    return ladder.lam * out


def lipschitz_bound(ladder: ThresholdLadder, eps) -> float:
    eps = _widths(eps, ladder)
    if not eps:
        return 0.0
    return ladder.lam * max(1.0 / e for e in eps)


def obstacle_ramp(t, f0: float, mu: float, eps: float):
    """Continuous ramp from ``f0`` (below ``mu``) to 1 (above ``mu + eps``)."""
    t = np.asarray(t, dtype=float)
    out = f0 + (1.0 - f0) * np.clip((t - mu) / eps, 0.0, 1.0)
    return out if out.ndim else float(out)


def obstacle_ramp_slope(t, f0: float, mu: float, eps: float):
    t = np.asarray(t, dtype=float)
    return np.where((t >= mu) & (t < mu + eps), (1.0 - f0) / eps, 0.0)


def obstacle_step(t, f0: float, mu: float):
    """The discontinuous load ``f0 + (1 - f0) H(t - mu)``."""
    return f0 + (1.0 - f0) * heaviside(np.asarray(t, dtype=float) - mu)


def _widths(eps, ladder):
    if isinstance(eps, RegularizationSchedule):
        eps = eps.eps
    eps = tuple(float(e) for e in np.atleast_1d(np.asarray(eps, dtype=float)))
    if len(eps) != ladder.n:
        raise ValidationError(
            f"schedule has {len(eps)} widths for {ladder.n} thresholds")
    return eps
