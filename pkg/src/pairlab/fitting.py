"""Weighted nonlinear least squares with a small catalog of analytic models.

Every model in :data:`MODELS` provides its value and its analytic Jacobian.
The catalog, with ``x`` the independent variable:

==================  ==================================================  ==========================================
name                closed form                                         parameters
==================  ==================================================  ==========================================
``gaussian``        ``amp * exp(-(x-c)^2 / 2s^2) + floor``              amplitude, center, sigma, floor
``triple_gaussian`` ``sum_k area_k * N(x; c + k*sep, s) + floor``       area_left, area_center, area_right,
                    with k = -1, 0, +1 and N the unit-area normal pdf   center, separation, sigma, floor
``sinusoid``        ``A * (1 + V cos(2 pi x / period + phase))``        offset, visibility, period, phase
``quadratic``       ``R * x^2``                                         coefficient
``power_law``       ``k * x^n``                                         scale, exponent
``sigmoid``         ``a x^2 / (1 + a x^2)``                             a
==================  ==================================================  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

_SQRT_2PI = np.sqrt(2.0 * np.pi)
FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


class UnknownModelError(KeyError):
    pass


@dataclass(frozen=True)
class Model:
    name: str
    param_names: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray]


def _gaussian(p, x):
    a, c, s, f = p
    return a * np.exp(-0.5 * ((x - c) / s) ** 2) + f


def _gaussian_jac(p, x):
    a, c, s, _ = p
    u = (x - c) / s
    e = np.exp(-0.5 * u * u)
    return np.column_stack([e, a * e * u / s, a * e * u * u / s, np.ones_like(x)])


def _triple(p, x):
    al, ac, ar, c, d, s, f = p
    out = np.full_like(x, f, dtype=float)
    for area, mu in ((al, c - d), (ac, c), (ar, c + d)):
        u = (x - mu) / s
        out += area * np.exp(-0.5 * u * u) / (s * _SQRT_2PI)
    return out


def _triple_jac(p, x):
    al, ac, ar, c, d, s, _ = p
    J = np.zeros((x.size, 7))
    for k, (area, shift) in enumerate(((al, -1.0), (ac, 0.0), (ar, 1.0))):
        u = (x - c - shift * d) / s
        g = np.exp(-0.5 * u * u) / (s * _SQRT_2PI)
        J[:, k] = g
        dmu = area * g * u / s
        J[:, 3] += dmu
        J[:, 4] += shift * dmu
        J[:, 5] += area * g * (u * u - 1.0) / s
    J[:, 6] = 1.0
    return J


def _sinusoid(p, x):
    A, V, T, ph = p
    return A * (1.0 + V * np.cos(2.0 * np.pi * x / T + ph))


def _sinusoid_jac(p, x):
    A, V, T, ph = p
    arg = 2.0 * np.pi * x / T + ph
    c, s = np.cos(arg), np.sin(arg)
    return np.column_stack(
        [1.0 + V * c, A * c, A * V * s * 2.0 * np.pi * x / T**2, -A * V * s]
    )


def _quadratic(p, x):
    return p[0] * x * x


def _quadratic_jac(p, x):
    return (x * x)[:, None]


def _power_law(p, x):
    return p[0] * x ** p[1]


def _power_law_jac(p, x):
    xn = x ** p[1]
    return np.column_stack([xn, p[0] * xn * np.log(x)])


def _sigmoid(p, x):
    u = p[0] * x * x
    return u / (1.0 + u)


def _sigmoid_jac(p, x):
    x2 = x * x
    return (x2 / (1.0 + p[0] * x2) ** 2)[:, None]


MODELS: dict[str, Model] = {
    m.name: m
    for m in (
        Model("gaussian", ("amplitude", "center", "sigma", "floor"), _gaussian, _gaussian_jac),
        Model(
            "triple_gaussian",
            ("area_left", "area_center", "area_right", "center", "separation", "sigma", "floor"),
            _triple,
            _triple_jac,
        ),
        Model("sinusoid", ("offset", "visibility", "period", "phase"), _sinusoid, _sinusoid_jac),
        Model("quadratic", ("coefficient",), _quadratic, _quadratic_jac),
        Model("power_law", ("scale", "exponent"), _power_law, _power_law_jac),
        Model("sigmoid", ("a",), _sigmoid, _sigmoid_jac),
    )
}


def get_model(model: str | Model) -> Model:
    if isinstance(model, Model):
        return model
    try:
        return MODELS[model]
    except KeyError:
        raise UnknownModelError(f"unknown model {model!r}; known: {sorted(MODELS)}") from None


def _as_vector(m: Model, params) -> np.ndarray:
    if isinstance(params, Mapping):
        missing = set(m.param_names) - set(params)
        if missing:
            raise ValueError(f"missing parameters for {m.name}: {sorted(missing)}")
        return np.array([float(params[k]) for k in m.param_names])
    p = np.asarray(params, dtype=float).ravel()
    if p.size != len(m.param_names):
        raise ValueError(f"{m.name} takes {len(m.param_names)} parameters, got {p.size}")
    return p


def model_eval(model: str | Model, params, x) -> tuple[np.ndarray, np.ndarray]:
    """Value and Jacobian (shape ``(len(x), n_params)``) of a catalog model."""
    m = get_model(model)
    p = _as_vector(m, params)
    x = np.asarray(x, dtype=float)
    return m.func(p, x), m.jac(p, x)


@dataclass
class FitResult:
    model: str
    param_names: tuple[str, ...]
    values: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""
    fixed: tuple[str, ...] = field(default_factory=tuple)

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.param_names, map(float, self.values)))

    @property
    def std_errs(self) -> dict[str, float]:
        d = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(self.param_names, map(float, d)))

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def err(self, name: str) -> float:
        return self.std_errs[name]

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def predict(self, x) -> np.ndarray:
        return model_eval(self.model, self.values, x)[0]


def nlls_fit(
    model: str | Model,
    x,
    y,
    sigma,
    init,
    *,
    fixed: Sequence[str] = (),
    max_iter: int = 200,
    xtol: float = 1e-10,
    gtol: float = 1e-12,
    absolute_sigma: bool = False,
) -> FitResult:
    """Minimize ``sum(((y - f(x; p)) / sigma)**2)`` by damped Gauss-Newton.

    Each iteration first tries the undamped Gauss-Newton step while the damping
    is at its floor and accepts it when the gain ratio exceeds 0.75; otherwise
    Marquardt damping ``lambda * diag(JtJ)`` is used, starting at 1e-3, raised
    x10 after a rejected step and lowered x0.3 after an accepted one.

    The covariance is the inverse weighted normal matrix at the optimum, scaled
    by chi2/dof unless ``absolute_sigma`` is set.
    """
    m = get_model(model)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape).ravel()
    p = _as_vector(m, init).copy()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    for arr, name in ((x, "x"), (y, "y"), (sigma, "sigma"), (p, "init")):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values in {name}")
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    unknown = set(fixed) - set(m.param_names)
    if unknown:
        raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
    free = np.array([k not in fixed for k in m.param_names])
    nfree = int(free.sum())
    if y.size < nfree:
        raise ValueError(f"need at least {nfree} points, got {y.size}")

    w = 1.0 / sigma

    def evaluate(q):
        with np.errstate(all="ignore"):
            f, J = m.func(q, x), m.jac(q, x)
        r = (y - f) * w
        return f, r, J[:, free] * w[:, None]

    f, r, Jw = evaluate(p)
    chi2 = float(r @ r)
    lam, lam_floor = 1e-3, 1e-3
    converged, message, it = False, "max iterations reached", 0
    for it in range(1, max_iter + 1):
        g = Jw.T @ r
        A = Jw.T @ Jw
        if not (np.all(np.isfinite(A)) and np.isfinite(chi2)):
            message = "non-finite model evaluation"
            break
        if np.max(np.abs(g), initial=0.0) <= gtol * max(1.0, chi2):
            converged, message = True, "gradient below tolerance"
            break
        diag = np.diag(A).copy()
        if np.any(diag <= 0):
            message = "singular normal matrix: parameter has no influence on the model"
            break
        accepted = False
        if lam <= lam_floor:
            try:
                step = np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                q = p.copy()
                q[free] += step
                f_new, r_new, J_new = evaluate(q)
                chi2_new = float(r_new @ r_new)
                predicted = float(step @ g)
                if np.isfinite(chi2_new) and predicted > 0 and (chi2 - chi2_new) > 0.75 * predicted:
                    accepted = True
        while not accepted:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                lam *= 10.0
            else:
                q = p.copy()
                q[free] += step
                f_new, r_new, J_new = evaluate(q)
                chi2_new = float(r_new @ r_new)
                if np.isfinite(chi2_new) and chi2_new <= chi2:
                    accepted = True
                    lam = max(lam * 0.3, lam_floor)
                    break
                lam *= 10.0
            if lam > 1e16:
                break
        if not accepted:
            # no downhill step even at tiny step length: minimum to machine precision
            converged, message = True, "no further reduction possible"
            break
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(p[free]) + xtol)
        p, f, r, Jw, chi2 = q, f_new, r_new, J_new, chi2_new
        if small_step or chi2 == 0.0:
            converged, message = True, "relative parameter change below tolerance"
            break

    n = len(m.param_names)
    cov = np.zeros((n, n))
    A = Jw.T @ Jw
    try:
        inv = np.linalg.inv(A)
        if not np.all(np.isfinite(inv)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        inv = np.full_like(A, np.nan)
        converged = False
        message = "singular normal matrix at optimum"
    dof = y.size - nfree
    if not absolute_sigma:
        with np.errstate(over="ignore", invalid="ignore"):
            inv = inv * (chi2 / dof if dof > 0 else np.inf if chi2 > 0 else 0.0)
    idx = np.flatnonzero(free)
    cov[np.ix_(idx, idx)] = inv
    return FitResult(
        model=m.name,
        param_names=m.param_names,
        values=p,
        covariance=0.5 * (cov + cov.T),
        chi2=chi2,
        dof=dof,
        residual_norm=float(np.linalg.norm(y - f)),
        converged=bool(converged),
        iterations=it,
        message=message,
        fixed=tuple(fixed),
    )


def poisson_sigma(counts) -> np.ndarray:
    """Per-bin standard deviation for count data; empty bins get 1."""
    return np.sqrt(np.maximum(np.asarray(counts, dtype=float), 1.0))
