"""Noise/signal models, two-group mixtures, and detectability diagnostics.

The observation model is the two-group mixture ``Q_n = (1-eps_n) P_0 +
eps_n mu_n`` with ``eps_n = n^{-beta}``.  Signal strength follows one of
three conventions, fixed per family:

* ``theta_n = sqrt(2 r log n)`` — normal location (sparse),
* ``theta_n = n^r``             — exponential-family tilts, sparse regime,
* ``theta_n = n^{-r}``          — exponential-family tilts, dense regime.

Exponential families are tilts ``dP_theta/dP_0 = C(theta) exp(theta T(x))``
of a base noise distribution; registered instances carry closed-form Laplace
transforms and tilted laws, everything else falls back to quadrature plus
bisection.

The diagnostics H_n, H~_n (curves over v) and the exponents h_n(t), h~_n(x)
quantify detectability; they are exact formula evaluations, no simulation.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from ._rand import uniform_open, replicate_rng
from .divergence import SortedPValueSample
from .errors import DomainError, IntegrationError

__all__ = [
    "Distribution",
    "Uniform",
    "Normal",
    "Exponential",
    "Gumbel",
    "Frechet",
    "ExponentialFamily",
    "laplace_transform",
    "var_T",
    "fitted_tail_exponent",
    "scale_exponential_family",
    "location_gumbel_family",
    "scale_frechet_family",
    "MixtureFamily",
    "MixtureSpec",
    "normal_location_mixture",
    "heteroscedastic_normal_mixture",
    "scale_exponential_mixture",
    "location_gumbel_mixture",
    "scale_frechet_mixture",
    "expfam_mixture",
    "mixture_family",
    "MIXTURE_FAMILY_NAMES",
    "sample_mixture",
    "to_pvalues",
    "signal_cdf_transformed",
    "CurveKind",
    "DiagnosticCurve",
    "diagnostic_H",
    "diagnostic_H_sparse",
    "h_exponent",
    "h_exponent_normal",
]

# p-values are kept strictly inside (0,1): in-support observations whose cdf
# saturates in double precision are clamped to the open interval instead of
# being rejected (exact 0/1 can only arise from out-of-support data, which
# *is* rejected).
_P_FLOOR = 1e-300
_P_CEIL = float(np.nextafter(1.0, 0.0))


class Distribution:
    """Continuous scalar distribution: cdf, quantile, sampling.

    ``support`` is the open interval carrying the density; cdf/quantile are
    vectorised.  Sampling draws open-interval uniforms and applies the
    quantile, so samples never sit exactly on the support boundary.
    """

    name = "distribution"
    support: tuple[float, float] = (-math.inf, math.inf)

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def quantile_upper(self, eps):
        """Upper-tail quantile Q(1 - eps), stable for tiny eps."""
        return self.quantile(1.0 - np.asarray(eps, dtype=np.float64))

    def sample(self, n: int, rng) -> np.ndarray:
        return self.quantile(uniform_open(rng, n))

    def log_density_ratio_vs(self, noise: "Distribution") -> Callable:
        """Return x -> log(dself/dnoise)(x); implemented per closed-form pair."""
        raise NotImplementedError(
            f"no closed-form density ratio between {self.name} and {noise.name}"
        )


def _check_unit_open(u, what: str = "probability") -> np.ndarray:
    ua = np.asarray(u, dtype=np.float64)
    if np.any(~((ua > 0.0) & (ua < 1.0))):
        raise DomainError(f"{what} must lie strictly inside (0, 1)")
    return ua


@dataclass(frozen=True)
class Uniform(Distribution):
    """Uniform on (0,1) — the identity model on the p-value scale."""

    name = "uniform"
    support = (0.0, 1.0)

    def cdf(self, x):
        return np.asarray(x, dtype=np.float64)

    def quantile(self, u):
        return _check_unit_open(u)

    def quantile_upper(self, eps):
        # the value scale *is* the probability scale, so 1 - eps rounding to
        # 1.0 means the requested quantile has no open-interval representation
        out = 1.0 - _check_unit_open(eps)
        if np.any(out >= 1.0):
            raise DomainError(
                "upper-tail weight is below the floating-point resolution of "
                "the uniform upper endpoint"
            )
        return out

    def log_density_ratio_vs(self, noise):
        if isinstance(noise, Uniform):
            return lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))
        return super().log_density_ratio_vs(noise)


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float = 0.0
    sigma: float = 1.0

    name = "normal"

    def __post_init__(self):
        if not (self.sigma > 0.0 and math.isfinite(self.sigma) and math.isfinite(self.mu)):
            raise DomainError("normal model needs finite mu and sigma > 0")

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=np.float64) - self.mu) / self.sigma)

    def quantile(self, u):
        return self.mu + self.sigma * ndtri(_check_unit_open(u))

    def quantile_upper(self, eps):
        return self.mu - self.sigma * ndtri(_check_unit_open(eps))

    def log_density_ratio_vs(self, noise):
        if isinstance(noise, Normal):
            m0, s0, m1, s1 = noise.mu, noise.sigma, self.mu, self.sigma

            def ratio(x):
                xa = np.asarray(x, dtype=np.float64)
                return (
                    math.log(s0 / s1)
                    + 0.5 * ((xa - m0) / s0) ** 2
                    - 0.5 * ((xa - m1) / s1) ** 2
                )

            return ratio
        return super().log_density_ratio_vs(noise)


@dataclass(frozen=True)
class Exponential(Distribution):
    """Exponential with mean ``scale`` (rate 1/scale), support (0, inf)."""

    scale: float = 1.0

    name = "exponential"
    support = (0.0, math.inf)

    def __post_init__(self):
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise DomainError("exponential model needs scale > 0")

    def cdf(self, x):
        return -np.expm1(-np.asarray(x, dtype=np.float64) / self.scale)

    def quantile(self, u):
        return -self.scale * np.log1p(-_check_unit_open(u))

    def quantile_upper(self, eps):
        return -self.scale * np.log(_check_unit_open(eps))

    def log_density_ratio_vs(self, noise):
        if isinstance(noise, Exponential):
            b0, b1 = noise.scale, self.scale

            def ratio(x):
                return math.log(b0 / b1) + np.asarray(x, dtype=np.float64) * (1.0 / b0 - 1.0 / b1)

            return ratio
        return super().log_density_ratio_vs(noise)


@dataclass(frozen=True)
class Gumbel(Distribution):
    """Standard Gumbel location family: cdf exp(-exp(-(x - loc)))."""

    loc: float = 0.0

    name = "gumbel"

    def __post_init__(self):
        if not math.isfinite(self.loc):
            raise DomainError("gumbel model needs finite loc")

    def cdf(self, x):
        return np.exp(-np.exp(-(np.asarray(x, dtype=np.float64) - self.loc)))

    def quantile(self, u):
        return self.loc - np.log(-np.log(_check_unit_open(u)))

    def quantile_upper(self, eps):
        return self.loc - np.log(-np.log1p(-_check_unit_open(eps)))

    def log_density_ratio_vs(self, noise):
        if isinstance(noise, Gumbel):
            m0, m1 = noise.loc, self.loc

            def ratio(x):
                xa = np.asarray(x, dtype=np.float64)
                return (m1 - m0) + np.exp(-xa) * (math.exp(m0) - math.exp(m1))

            return ratio
        return super().log_density_ratio_vs(noise)


@dataclass(frozen=True)
class Frechet(Distribution):
    """Frechet with shape a and scale sigma: cdf exp(-(x/sigma)^-a) on (0, inf)."""

    shape: float
    scale: float = 1.0

    name = "frechet"
    support = (0.0, math.inf)

    def __post_init__(self):
        if not (self.shape > 0.0 and self.scale > 0.0):
            raise DomainError("frechet model needs shape > 0 and scale > 0")

    def cdf(self, x):
        xa = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(xa)
        pos = xa > 0.0
        out = np.where(pos, np.exp(-(np.where(pos, xa, 1.0) / self.scale) ** (-self.shape)), 0.0)
        return out

    def quantile(self, u):
        return self.scale * (-np.log(_check_unit_open(u))) ** (-1.0 / self.shape)

    def quantile_upper(self, eps):
        return self.scale * (-np.log1p(-_check_unit_open(eps))) ** (-1.0 / self.shape)

    def log_density_ratio_vs(self, noise):
        if isinstance(noise, Frechet) and noise.shape == self.shape:
            a = self.shape
            s0a, s1a = noise.scale**a, self.scale**a

            def ratio(x):
                xa = np.asarray(x, dtype=np.float64)
                return a * math.log(self.scale / noise.scale) + (s0a - s1a) * xa ** (-a)

            return ratio
        return super().log_density_ratio_vs(noise)


# --------------------------------------------------------------------------
# exponential families


def _quad_unit(f: Callable, what: str) -> float:
    """Adaptive quadrature of f over the unit interval (p-scale substitution
    of the half-line/real-line integral), rel tol 1e-8, divergence -> error."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, 0.0, 1.0, epsabs=1e-12, epsrel=1e-8, limit=200)
        except integrate.IntegrationWarning as exc:
            raise IntegrationError(f"{what}: quadrature did not converge ({exc})") from exc
    if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
        raise IntegrationError(f"{what}: integral diverges or error too large (value={val}, err={err})")
    return val


class ExponentialFamily:
    """Tilted family dP_theta/dP_0 = C(theta) exp(theta T(x)).

    Parameters
    ----------
    base:
        The noise law P_0.
    statistic:
        Vectorised natural statistic T.
    laplace:
        Optional closed form for omega(theta) = E_0 exp(theta T); quadrature
        on the p-scale otherwise.
    tilted:
        Optional closed-form constructor theta -> Distribution for P_theta;
        a numeric tilt (quadrature cdf + bisection quantile) otherwise.
    theta_domain:
        Open interval on which omega is finite.
    tail_exponent:
        The regularity exponent p of T near its essential supremum
        (T_sup - T(Q_0(u near signal tail)) ~ u^{1/p} * slowly varying),
        when known.
    signal_tail:
        'lower' or 'upper': which tail of the base carries the tilted mass.
    """

    def __init__(
        self,
        base: Distribution,
        statistic: Callable,
        *,
        name: str = "expfam",
        laplace: Callable | None = None,
        tilted: Callable | None = None,
        theta_domain: tuple[float, float] = (-math.inf, math.inf),
        tail_exponent: float | None = None,
        signal_tail: str = "lower",
    ):
        if signal_tail not in ("lower", "upper"):
            raise DomainError("signal_tail must be 'lower' or 'upper'")
        self.base = base
        self.T = statistic
        self.name = name
        self._laplace = laplace
        self._tilted = tilted
        self.theta_domain = theta_domain
        self.tail_exponent = tail_exponent
        self.signal_tail = signal_tail

    def _check_theta(self, theta: float) -> float:
        theta = float(theta)
        lo, hi = self.theta_domain
        if not (lo < theta < hi):
            raise DomainError(
                f"theta={theta} outside the finite-Laplace domain ({lo}, {hi}) of {self.name}"
            )
        return theta

    def laplace_transform(self, theta: float) -> float:
        """omega(theta) = integral of exp(theta*T) dP_0 (= 1/C(theta))."""
        theta = self._check_theta(theta)
        if self._laplace is not None:
            return float(self._laplace(theta))
        T, Q = self.T, self.base.quantile
        return _quad_unit(lambda w: math.exp(theta * float(T(Q(w)))), f"omega({theta})")

    def C(self, theta: float) -> float:
        return 1.0 / self.laplace_transform(theta)

    def log_ratio(self, theta: float) -> Callable:
        """x -> log(dP_theta/dP_0)(x) = log C(theta) + theta*T(x)."""
        theta = self._check_theta(theta)
        log_c = math.log(self.C(theta))
        T = self.T

        def ratio(x):
            return log_c + theta * np.asarray(T(np.asarray(x, dtype=np.float64)))

        return ratio

    def tilted(self, theta: float) -> Distribution:
        """The law P_theta."""
        theta = self._check_theta(theta)
        if self._tilted is not None:
            return self._tilted(theta)
        return _NumericTilt(self, theta)

    def var_T(self) -> float:
        """Var_{P_0}(T), by quadrature of T and T^2 on the p-scale."""
        T, Q = self.T, self.base.quantile
        m1 = _quad_unit(lambda w: float(T(Q(w))), "E[T]")
        m2 = _quad_unit(lambda w: float(T(Q(w))) ** 2, "E[T^2]")
        return m2 - m1 * m1


def laplace_transform(model: ExponentialFamily, theta: float) -> float:
    return model.laplace_transform(theta)


def var_T(model: ExponentialFamily) -> float:
    return model.var_T()


def fitted_tail_exponent(family: ExponentialFamily, u_grid=None) -> float:
    """Numeric check of the tail regularity: slope fit of log D(u) vs log u.

    D(u) = T_sup - T(Q_0(u)) (or at Q_0(1-u) for upper signal tails); if
    D(u) = u^{1/p} * slowly-varying, the fitted slope estimates 1/p and the
    return value is its reciprocal.
    """
    if u_grid is None:
        u_grid = np.logspace(-7, -3, 9)
    u = np.asarray(u_grid, dtype=np.float64)
    if family.signal_tail == "lower":
        x = family.base.quantile(u)
    else:
        x = family.base.quantile_upper(u)
    t_vals = np.asarray(family.T(x), dtype=np.float64)
    # essential sup of T along the signal tail, taken as the limit value
    t_sup = np.asarray(
        family.T(
            family.base.quantile(np.array([1e-13]))
            if family.signal_tail == "lower"
            else family.base.quantile_upper(np.array([1e-13]))
        ),
        dtype=np.float64,
    )[0]
    d = t_sup - t_vals
    if np.any(d <= 0.0):
        raise DomainError("tail gap is not positive; statistic not regular at its sup")
    slope = np.polyfit(np.log(u), np.log(d), 1)[0]
    return 1.0 / slope


def scale_exponential_family() -> ExponentialFamily:
    """Exp(1) base tilted by T(x) = -x: P_theta = Exp(rate 1+theta), p = 1."""
    return ExponentialFamily(
        Exponential(1.0),
        lambda x: -np.asarray(x, dtype=np.float64),
        name="scale-exponential",
        laplace=lambda th: 1.0 / (1.0 + th),
        tilted=lambda th: Exponential(1.0 / (1.0 + th)),
        theta_domain=(-1.0, math.inf),
        tail_exponent=1.0,
        signal_tail="lower",
    )


def location_gumbel_family() -> ExponentialFamily:
    """Gumbel base tilted by T(x) = -exp(-x): P_theta = Gumbel(log(1+theta)), p = 1."""
    return ExponentialFamily(
        Gumbel(0.0),
        lambda x: -np.exp(-np.asarray(x, dtype=np.float64)),
        name="location-gumbel",
        laplace=lambda th: 1.0 / (1.0 + th),
        tilted=lambda th: Gumbel(math.log1p(th)),
        theta_domain=(-1.0, math.inf),
        tail_exponent=1.0,
        signal_tail="upper",
    )


def scale_frechet_family(shape: float = 1.0) -> ExponentialFamily:
    """Frechet(shape) base tilted by T(x) = -x^{-shape}: scale (1+theta)^{1/shape}, p = 1."""
    if not shape > 0.0:
        raise DomainError("frechet shape must be positive")
    a = float(shape)
    return ExponentialFamily(
        Frechet(a, 1.0),
        lambda x: -np.asarray(x, dtype=np.float64) ** (-a),
        name=f"scale-frechet(shape={a:g})",
        laplace=lambda th: 1.0 / (1.0 + th),
        tilted=lambda th: Frechet(a, (1.0 + th) ** (1.0 / a)),
        theta_domain=(-1.0, math.inf),
        tail_exponent=1.0,
        signal_tail="upper",
    )


class _NumericTilt(Distribution):
    """P_theta for families without a closed-form tilt.

    cdf by adaptive quadrature of the density ratio on the p-scale, quantile
    by bisection on the base-p scale to 1e-12 absolute.  Not meant for inner
    loops.
    """

    name = "numeric-tilt"

    def __init__(self, family: ExponentialFamily, theta: float):
        self._family = family
        self._theta = theta
        self._log_c = math.log(family.C(theta))
        self.support = family.base.support
        T, Q = family.T, family.base.quantile
        self._g = lambda w: math.exp(self._log_c + theta * float(T(Q(w))))

    def _cdf_on_p_scale(self, v: float) -> float:
        if v <= 0.0:
            return 0.0
        if v >= 1.0:
            return 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(self._g, 0.0, v, epsabs=1e-12, epsrel=1e-10, limit=200)
        return min(max(val, 0.0), 1.0)

    def cdf(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=np.float64))
        base_p = self._family.base.cdf(xa)
        out = np.array([self._cdf_on_p_scale(float(v)) for v in base_p])
        return float(out[0]) if np.ndim(x) == 0 else out

    def quantile(self, u):
        ua = np.atleast_1d(_check_unit_open(u))
        vs = np.empty_like(ua)
        for i, target in enumerate(ua):
            lo, hi = 0.0, 1.0
            while hi - lo > 1e-12:
                mid = 0.5 * (lo + hi)
                if self._cdf_on_p_scale(mid) < target:
                    lo = mid
                else:
                    hi = mid
            vs[i] = 0.5 * (lo + hi)
        out = self._family.base.quantile(np.clip(vs, 1e-15, 1.0 - 1e-15))
        return float(out[0]) if np.ndim(u) == 0 else out

    def log_density_ratio_vs(self, noise):
        if noise is self._family.base or noise == self._family.base:
            return self._family.log_ratio(self._theta)
        return super().log_density_ratio_vs(noise)


# --------------------------------------------------------------------------
# mixtures


class _ThetaRule(enum.Enum):
    SPARSE_POWER = "n^r"
    DENSE_INVERSE_POWER = "n^-r"
    NORMAL_LOCATION = "sqrt(2 r log n)"


@dataclass(frozen=True)
class MixtureFamily:
    """A named mixture construction: noise law + signal law as a function of theta."""

    name: str
    regime: str  # 'sparse' or 'dense'
    noise: Distribution
    theta_rule: _ThetaRule
    signal_of: Callable[[float], Distribution]
    log_ratio_of: Callable[[float], Callable] | None = None
    boundary_kind: str | None = None  # key into boundary.classify, when known
    tail_exponent: float | None = None

    def theta(self, r: float, n: int) -> float:
        if self.theta_rule is _ThetaRule.SPARSE_POWER:
            return float(n) ** r
        if self.theta_rule is _ThetaRule.DENSE_INVERSE_POWER:
            return float(n) ** (-r)
        return math.sqrt(2.0 * r * math.log(n))


@dataclass(frozen=True)
class MixtureSpec:
    """(family, beta, r, n): the full mixture parametrisation.

    eps_n = n^{-beta} (overridable for degenerate/null studies); theta_n per
    the family's rule.  The sparse regime tag requires beta in (1/2, 1], the
    dense tag beta in (0, 1/2); beta = 1/2 belongs to neither.
    """

    family: MixtureFamily
    beta: float
    r: float
    n: int
    epsilon_override: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("mixture needs n >= 1")
        if self.r < 0.0 or not math.isfinite(self.r):
            raise DomainError("signal strength exponent r must be >= 0")
        if self.family.regime == "sparse":
            if not 0.5 < self.beta <= 1.0:
                raise DomainError(
                    f"sparse families need beta in (1/2, 1], got beta={self.beta}"
                )
        elif self.family.regime == "dense":
            if not 0.0 < self.beta < 0.5:
                raise DomainError(
                    f"dense families need beta in (0, 1/2), got beta={self.beta}"
                )
        else:
            raise DomainError(f"unknown regime tag {self.family.regime!r}")
        eps = self.epsilon
        if not 0.0 <= eps <= 1.0:
            raise DomainError(f"mixture weight eps={eps} outside [0, 1]")

    @property
    def epsilon(self) -> float:
        if self.epsilon_override is not None:
            return float(self.epsilon_override)
        return float(self.n) ** (-self.beta)

    @property
    def theta(self) -> float:
        return self.family.theta(self.r, self.n)

    @property
    def noise(self) -> Distribution:
        return self.family.noise

    @property
    def signal(self) -> Distribution:
        return self.family.signal_of(self.theta)

    def log_ratio(self) -> Callable:
        """x -> log(d mu_n / d P_0)(x), if the family exposes one."""
        if self.family.log_ratio_of is None:
            raise DomainError(f"family {self.family.name!r} has no density ratio")
        return self.family.log_ratio_of(self.theta)


def normal_location_mixture() -> MixtureFamily:
    """N(0,1) noise vs N(theta_n, 1) signal, theta_n = sqrt(2 r log n)."""

    def ratio_of(theta: float) -> Callable:
        def ratio(x):
            return theta * np.asarray(x, dtype=np.float64) - 0.5 * theta * theta

        return ratio

    return MixtureFamily(
        name="normal",
        regime="sparse",
        noise=Normal(),
        theta_rule=_ThetaRule.NORMAL_LOCATION,
        signal_of=lambda th: Normal(mu=th),
        log_ratio_of=ratio_of,
        boundary_kind="normal-sparse",
    )


def heteroscedastic_normal_mixture(sigma0: float) -> MixtureFamily:
    """N(0,1) noise vs N(theta_n, sigma0^2) signal; no closed boundary wired."""
    if not sigma0 > 0.0:
        raise DomainError("sigma0 must be positive")

    def ratio_of(theta: float) -> Callable:
        def ratio(x):
            xa = np.asarray(x, dtype=np.float64)
            return -math.log(sigma0) + 0.5 * xa**2 - 0.5 * ((xa - theta) / sigma0) ** 2

        return ratio

    return MixtureFamily(
        name=f"heteroscedastic-normal(sigma0={sigma0:g})",
        regime="sparse",
        noise=Normal(),
        theta_rule=_ThetaRule.NORMAL_LOCATION,
        signal_of=lambda th: Normal(mu=th, sigma=sigma0),
        log_ratio_of=ratio_of,
        boundary_kind=None,
    )


def expfam_mixture(family: ExponentialFamily, regime: str, name: str | None = None) -> MixtureFamily:
    """Mixture whose signal is the exponential-family tilt P_(theta_n)."""
    if regime not in ("sparse", "dense"):
        raise DomainError("regime must be 'sparse' or 'dense'")
    rule = _ThetaRule.SPARSE_POWER if regime == "sparse" else _ThetaRule.DENSE_INVERSE_POWER
    kind = "expfam-sparse" if regime == "sparse" else "expfam-dense"
    return MixtureFamily(
        name=name or f"{family.name}[{regime}]",
        regime=regime,
        noise=family.base,
        theta_rule=rule,
        signal_of=family.tilted,
        log_ratio_of=family.log_ratio,
        boundary_kind=kind,
        tail_exponent=family.tail_exponent,
    )


def scale_exponential_mixture(regime: str = "dense") -> MixtureFamily:
    return expfam_mixture(scale_exponential_family(), regime, name="scale-exponential")


def location_gumbel_mixture(regime: str = "sparse") -> MixtureFamily:
    return expfam_mixture(location_gumbel_family(), regime, name="location-gumbel")


def scale_frechet_mixture(shape: float = 1.0, regime: str = "sparse") -> MixtureFamily:
    return expfam_mixture(scale_frechet_family(shape), regime, name="scale-frechet")


def mixture_family(name: str, *, regime: str | None = None, **params) -> MixtureFamily:
    """Look up a registered mixture family by CLI-facing name."""
    key = name.strip().lower()
    if key == "normal":
        return normal_location_mixture()
    if key == "heteroscedastic-normal":
        return heteroscedastic_normal_mixture(float(params.get("sigma0", 1.0)))
    if key == "scale-exponential":
        return scale_exponential_mixture(regime or "dense")
    if key == "location-gumbel":
        return location_gumbel_mixture(regime or "sparse")
    if key == "scale-frechet":
        return scale_frechet_mixture(float(params.get("shape", 1.0)), regime or "sparse")
    raise DomainError(f"unknown mixture family {name!r}; known: {', '.join(MIXTURE_FAMILY_NAMES)}")


MIXTURE_FAMILY_NAMES = (
    "normal",
    "heteroscedastic-normal",
    "scale-exponential",
    "location-gumbel",
    "scale-frechet",
)


def sample_mixture(spec: MixtureSpec, seed) -> tuple[np.ndarray, int]:
    """Draw n observations from Q_n = (1-eps) P_0 + eps mu_n.

    ``seed`` is either an integer (replicate 0 of its stream is used) or a
    ``numpy.random.Generator``.  Returns (data, signal_count); the latent
    count is for diagnostics only and must never feed a test statistic.
    Membership is i.i.d. per observation; data is ordered noise-positions
    then signal-positions drawn via one shared uniform mask, so the joint law
    is the exact mixture.
    """
    rng = seed if isinstance(seed, np.random.Generator) else replicate_rng(int(seed), 0)
    n, eps = spec.n, spec.epsilon
    mask = rng.random(n) < eps
    k = int(mask.sum())
    data = np.empty(n, dtype=np.float64)
    data[~mask] = spec.noise.sample(n - k, rng)
    data[mask] = spec.signal.sample(k, rng) if k else np.empty(0)
    return data, k


def to_pvalues(data, noise: Distribution) -> SortedPValueSample:
    """Probability-integral transform: sorted F_0(x_i), strictly inside (0,1).

    Observations outside the open support of the noise law are rejected (the
    transform would be exactly 0 or 1 there); in-support values whose cdf
    saturates in double precision are clamped to the open interval.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("data must be a nonempty 1-d array")
    lo, hi = noise.support
    ok = (x > lo) & (x < hi)
    if not np.all(ok):
        i = int(np.flatnonzero(~ok)[0])
        raise DomainError(
            f"observation {i} = {float(x[i])!r} outside the open support ({lo}, {hi}) "
            f"of {noise.name}: its p-value would be exactly 0 or 1"
        )
    p = np.clip(noise.cdf(x), _P_FLOOR, _P_CEIL)
    return SortedPValueSample(np.sort(p))


def signal_cdf_transformed(spec: MixtureSpec, v):
    """mu_n^{F_0}((0, v]) = signal cdf at the noise quantile of v."""
    va = _check_unit_open(v, "v")
    out = spec.signal.cdf(spec.noise.quantile(va))
    return float(out) if np.ndim(v) == 0 else out


class CurveKind(enum.Enum):
    FULL = "full"
    SPARSE_SIMPLIFIED = "sparse-simplified"


@dataclass(frozen=True, eq=False)
class DiagnosticCurve:
    v: np.ndarray
    values: np.ndarray
    kind: CurveKind

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape != vals.shape:
            raise DomainError("grid and values must be matching 1-d arrays")
        if np.any(np.diff(v) <= 0.0):
            raise DomainError("v grid must be strictly increasing")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "values", vals)


def _check_half_open_grid(v_grid) -> np.ndarray:
    v = np.asarray(v_grid, dtype=np.float64)
    if np.any(~((v > 0.0) & (v < 0.5))):
        raise DomainError("diagnostic grid must lie inside (0, 1/2)")
    return v


def diagnostic_H(spec: MixtureSpec, v_grid) -> DiagnosticCurve:
    """H_n(v) = (sqrt(n) eps_n / sqrt(v)) * (|mu(0,v] - v| + |mu[1-v,1) - v|)."""
    v = _check_half_open_grid(v_grid)
    lower = signal_cdf_transformed(spec, v)
    upper = 1.0 - signal_cdf_transformed(spec, 1.0 - v)
    scale = math.sqrt(spec.n) * spec.epsilon / np.sqrt(v)
    return DiagnosticCurve(v, scale * (np.abs(lower - v) + np.abs(upper - v)), CurveKind.FULL)


def diagnostic_H_sparse(spec: MixtureSpec, v_grid) -> DiagnosticCurve:
    """Sparse simplification: drops the centering, H~ = scale * (mu(0,v] + mu[1-v,1))."""
    v = _check_half_open_grid(v_grid)
    lower = signal_cdf_transformed(spec, v)
    upper = 1.0 - signal_cdf_transformed(spec, 1.0 - v)
    scale = math.sqrt(spec.n) * spec.epsilon / np.sqrt(v)
    return DiagnosticCurve(v, scale * (lower + upper), CurveKind.SPARSE_SIMPLIFIED)


def h_exponent(spec: MixtureSpec, t):
    """h_n(t) = max of the signal log-density-ratio at the two n^{-t} tail quantiles.

    h_{n,1} evaluates log(d mu_n/d P_0) at F_0^{-1}(n^{-t}), h_{n,2} at
    F_0^{-1}(1 - n^{-t}); the deep upper quantile is computed through the
    stable upper-tail inverse.  Requires t >= log 2 / log n so n^{-t} <= 1/2.
    """
    ratio = spec.log_ratio()
    ta = np.asarray(t, dtype=np.float64)
    t_min = math.log(2.0) / math.log(spec.n)
    if np.any(ta < t_min):
        raise DomainError(f"t must be >= log2/log n = {t_min:.6g}")
    w = np.exp(-ta * math.log(spec.n))
    h1 = ratio(spec.noise.quantile(w))
    h2 = ratio(spec.noise.quantile_upper(w))
    out = np.maximum(h1, h2)
    return float(out) if np.ndim(t) == 0 else out


def h_exponent_normal(spec: MixtureSpec, x):
    """h~_n(x): the signal log-density-ratio at x * sqrt(2 log n)."""
    ratio = spec.log_ratio()
    xa = np.asarray(x, dtype=np.float64)
    out = np.asarray(ratio(xa * math.sqrt(2.0 * math.log(spec.n))))
    return float(out) if np.ndim(x) == 0 else out
