"""Bilevel problem oracles and synthetic families with analytic ground truth.

A problem bundles per-node upper losses f_i(x, y) and lower losses g_i(x, y)
together with their derivative oracles. Upper objective:

    Phi(x) = (1/N) sum_i f_i(x, y*(x)),   y*(x) = argmin_y (1/N) sum_i g_i(x, y)

Derivative oracles are matrix-free: Hessian/Jacobian information is exposed
only through vector products, matching the structure of the iteration engine.
Dense matrices appear only inside the verification helpers (``lower_solve``,
``z_star``, ``hypergradient_exact``), which assemble the p x p lower Hessian
from basis products at desk scale.

Stochastic oracles take an explicit sample object drawn from a caller-owned
numpy Generator, so runs are reproducible and common-random-number
comparisons across algorithm variants are exact.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

# Half-width of the uniform feature distribution in the regression family.
FEATURE_HALF_WIDTH = 2.0 * 1.5 ** (1.0 / 3.0)
# Per-coordinate population variance of those features: (2b)^2 / 12 = b^2 / 3.
FEATURE_VAR = FEATURE_HALF_WIDTH**2 / 3.0

LOWER_SOLVE_TOL = 1e-10


class ProblemError(RuntimeError):
    pass


class LowerSolveDiverged(ProblemError):
    pass


class SingularHessian(ProblemError):
    pass


class BilevelProblem(abc.ABC):
    """Per-node deterministic and stochastic oracle bundle."""

    def __init__(
        self,
        n_nodes: int,
        dim_x: int,
        dim_y: int,
        mu_g: float,
        sigma: float = 0.0,
        l_f: float | None = None,
    ):
        self.n_nodes = n_nodes
        self.dim_x = dim_x
        self.dim_y = dim_y
        self.mu_g = mu_g
        self.sigma = sigma
        self.l_f = l_f

    # -- values ---------------------------------------------------------
    @abc.abstractmethod
    def f_value(self, i: int, x: np.ndarray, y: np.ndarray) -> float: ...

    @abc.abstractmethod
    def g_value(self, i: int, x: np.ndarray, y: np.ndarray) -> float: ...

    # -- deterministic first-order oracles ------------------------------
    @abc.abstractmethod
    def grad_x_f(self, i: int, x, y) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_y_f(self, i: int, x, y) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_x_g(self, i: int, x, y) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_y_g(self, i: int, x, y) -> np.ndarray: ...

    # -- deterministic second-order vector products ---------------------
    @abc.abstractmethod
    def hess_yy_g(self, i: int, x, y, v) -> np.ndarray:
        """(d^2 g_i / dy dy) v, a dim_y vector."""

    @abc.abstractmethod
    def cross_xy_g(self, i: int, x, y, v) -> np.ndarray:
        """(d^2 g_i / dx dy) v, a dim_x vector."""

    # -- stochastic oracles ---------------------------------------------
    # Defaults make every deterministic problem a valid sigma = 0
    # stochastic problem.
    def draw_f_sample(self, i: int, rng: np.random.Generator):
        return None

    def draw_g_sample(self, i: int, rng: np.random.Generator):
        return None

    def sgrad_x_f(self, i, x, y, xi) -> np.ndarray:
        return self.grad_x_f(i, x, y)

    def sgrad_y_f(self, i, x, y, xi) -> np.ndarray:
        return self.grad_y_f(i, x, y)

    def sgrad_x_g(self, i, x, y, zeta) -> np.ndarray:
        return self.grad_x_g(i, x, y)

    def sgrad_y_g(self, i, x, y, zeta) -> np.ndarray:
        return self.grad_y_g(i, x, y)

    def shess_yy_g(self, i, x, y, v, zeta) -> np.ndarray:
        return self.hess_yy_g(i, x, y, v)

    def scross_xy_g(self, i, x, y, v, zeta) -> np.ndarray:
        return self.cross_xy_g(i, x, y, v)

    # -- analytic ground truth (when available) -------------------------
    def y_star(self, x: np.ndarray) -> np.ndarray | None:
        return None

    def phi_star(self) -> float | None:
        return None

    # -- network means --------------------------------------------------
    def mean_grad_x_f(self, x, y):
        return _node_mean(self, "grad_x_f", x, y)

    def mean_grad_y_f(self, x, y):
        return _node_mean(self, "grad_y_f", x, y)

    def mean_grad_y_g(self, x, y):
        return _node_mean(self, "grad_y_g", x, y)

    def mean_f_value(self, x, y) -> float:
        return float(np.mean([self.f_value(i, x, y) for i in range(self.n_nodes)]))

    def mean_g_value(self, x, y) -> float:
        return float(np.mean([self.g_value(i, x, y) for i in range(self.n_nodes)]))

    def mean_hess_yy_g(self, x, y, v):
        out = self.hess_yy_g(0, x, y, v)
        for i in range(1, self.n_nodes):
            out = out + self.hess_yy_g(i, x, y, v)
        return out / self.n_nodes

    def mean_cross_xy_g(self, x, y, v):
        out = self.cross_xy_g(0, x, y, v)
        for i in range(1, self.n_nodes):
            out = out + self.cross_xy_g(i, x, y, v)
        return out / self.n_nodes


def _node_mean(problem, name, x, y):
    fn = getattr(problem, name)
    out = fn(0, x, y)
    for i in range(1, problem.n_nodes):
        out = out + fn(i, x, y)
    return out / problem.n_nodes


def dense_lower_hessian(problem: BilevelProblem, x, y) -> np.ndarray:
    """Assemble the network-mean lower Hessian from basis vector products."""
    p = problem.dim_y
    H = np.empty((p, p))
    eye = np.eye(p)
    for k in range(p):
        H[:, k] = problem.mean_hess_yy_g(x, y, eye[k])
    return H


def lower_solve(
    problem: BilevelProblem,
    x: np.ndarray,
    tol: float = LOWER_SOLVE_TOL,
    max_iter: int = 100,
) -> np.ndarray:
    """Minimize the mean lower loss g(x, .) to gradient norm <= tol.

    Uses the family's closed form when one exists, otherwise damped Newton
    with the densely assembled mean Hessian (desk-scale p).
    """
    x = np.asarray(x, dtype=float)
    y = problem.y_star(x)
    if y is None:
        y = np.zeros(problem.dim_y)
        for _ in range(max_iter):
            grad = problem.mean_grad_y_g(x, y)
            if np.linalg.norm(grad) <= tol * max(1.0, float(np.linalg.norm(y))):
                return y
            H = dense_lower_hessian(problem, x, y)
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError as exc:
                raise SingularHessian("lower Hessian solve failed") from exc
            # Backtrack on the gradient norm, the quantity the stopping
            # rule measures; plain value backtracking can stall on
            # rounding once g differences drop below float resolution.
            gn = np.linalg.norm(grad)
            t = 1.0
            while t > 1e-8:
                cand = y - t * step
                if np.linalg.norm(problem.mean_grad_y_g(x, cand)) < gn:
                    break
                t *= 0.5
            y = y - t * step
    residual = float(np.linalg.norm(problem.mean_grad_y_g(x, y)))
    if residual > tol * max(1.0, float(np.linalg.norm(y))):
        raise LowerSolveDiverged(
            f"lower-level residual {residual:.3e} above tolerance {tol:.1e}"
        )
    return y


def z_star(problem: BilevelProblem, x: np.ndarray, tol: float = LOWER_SOLVE_TOL) -> np.ndarray:
    """Solve (mean lower Hessian at y*(x)) z = mean grad_y f(x, y*(x))."""
    x = np.asarray(x, dtype=float)
    y = lower_solve(problem, x, tol=tol)
    H = dense_lower_hessian(problem, x, y)
    rhs = problem.mean_grad_y_f(x, y)
    try:
        z = np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularHessian("lower Hessian is singular") from exc
    residual = float(np.linalg.norm(H @ z - rhs))
    if not np.all(np.isfinite(z)) or residual > tol * max(1.0, float(np.linalg.norm(rhs))):
        raise SingularHessian(f"linear system residual {residual:.3e}")
    return z


def hypergradient_exact(problem: BilevelProblem, x: np.ndarray) -> np.ndarray:
    """Implicit-differentiation gradient of Phi at x.

    grad Phi(x) = mean grad_x f(x, y*) - (mean d^2 g / dx dy) z*(x).
    """
    x = np.asarray(x, dtype=float)
    y = lower_solve(problem, x)
    z = z_star(problem, x)
    return problem.mean_grad_x_f(x, y) - problem.mean_cross_xy_g(x, y, z)


def phi_value(problem: BilevelProblem, x: np.ndarray) -> float:
    """Upper objective at the lower-level minimizer: mean_i f_i(x, y*(x))."""
    x = np.asarray(x, dtype=float)
    y = lower_solve(problem, x)
    return problem.mean_f_value(x, y)


# ---------------------------------------------------------------------------
# Quadratic verification family
# ---------------------------------------------------------------------------


@dataclass
class QuadraticBilevelSpec:
    """Per-node quadratics; admits closed forms for y*, z*, and grad Phi.

    f_i(x, y) = 1/2 y'P_i y + y'(Q_i x + q_i) + 1/2 x'R_i x
    g_i(x, y) = 1/2 y'A_i y + y'(B_i x + c_i)
    """

    P: np.ndarray  # (n, p, p), symmetric
    Q: np.ndarray  # (n, p, d)
    q: np.ndarray  # (n, p)
    R: np.ndarray  # (n, d, d), symmetric
    A: np.ndarray  # (n, p, p), symmetric, mean positive definite
    B: np.ndarray  # (n, p, d)
    c: np.ndarray  # (n, p)


class QuadraticBilevel(BilevelProblem):
    def __init__(self, spec: QuadraticBilevelSpec, noise_scale: float = 0.0):
        n, p, d = spec.A.shape[0], spec.A.shape[1], spec.B.shape[2]
        self.spec = spec
        self.A_bar = spec.A.mean(axis=0)
        self.B_bar = spec.B.mean(axis=0)
        self.c_bar = spec.c.mean(axis=0)
        self.P_bar = spec.P.mean(axis=0)
        self.Q_bar = spec.Q.mean(axis=0)
        self.q_bar = spec.q.mean(axis=0)
        self.R_bar = spec.R.mean(axis=0)
        mu = float(min(np.linalg.eigvalsh(spec.A[i]).min() for i in range(n)))
        if mu <= 0:
            raise ValueError("every A_i must be positive definite")
        super().__init__(n, d, p, mu_g=mu, sigma=noise_scale)
        # Truncated identity coupling the stochastic cross term; unit
        # spectral norm keeps the Hessian-product noise within sigma^2 |z|^2.
        self._J = np.eye(p, d)
        self._a1, self._a2, self._a3 = 0.5, 0.4, 0.4

    # deterministic ------------------------------------------------------
    def f_value(self, i, x, y):
        s = self.spec
        return float(
            0.5 * y @ s.P[i] @ y + y @ (s.Q[i] @ x + s.q[i]) + 0.5 * x @ s.R[i] @ x
        )

    def g_value(self, i, x, y):
        s = self.spec
        return float(0.5 * y @ s.A[i] @ y + y @ (s.B[i] @ x + s.c[i]))

    def grad_x_f(self, i, x, y):
        s = self.spec
        return s.Q[i].T @ y + s.R[i] @ x

    def grad_y_f(self, i, x, y):
        s = self.spec
        return s.P[i] @ y + s.Q[i] @ x + s.q[i]

    def grad_x_g(self, i, x, y):
        return self.spec.B[i].T @ y

    def grad_y_g(self, i, x, y):
        s = self.spec
        return s.A[i] @ y + s.B[i] @ x + s.c[i]

    def hess_yy_g(self, i, x, y, v):
        return self.spec.A[i] @ v

    def cross_xy_g(self, i, x, y, v):
        return self.spec.B[i].T @ v

    # stochastic ---------------------------------------------------------
    # One f-sample is a pair of unit-variance direction noises; one
    # g-sample additionally carries scalar Hessian/Jacobian noises, so
    # perturbed-point gradients of the same sample stay consistent.
    def draw_f_sample(self, i, rng):
        return (rng.standard_normal(self.dim_y), rng.standard_normal(self.dim_x))

    def draw_g_sample(self, i, rng):
        return (
            rng.standard_normal(self.dim_y),
            rng.standard_normal(self.dim_x),
            rng.standard_normal(),
            rng.standard_normal(),
        )

    def sgrad_x_f(self, i, x, y, xi):
        e_y, e_x = xi
        return self.grad_x_f(i, x, y) + self.sigma * self._a1 * e_x / np.sqrt(self.dim_x)

    def sgrad_y_f(self, i, x, y, xi):
        e_y, e_x = xi
        return self.grad_y_f(i, x, y) + self.sigma * self._a1 * e_y / np.sqrt(self.dim_y)

    def sgrad_y_g(self, i, x, y, zeta):
        e_y, e_x, s, s2 = zeta
        noise = (
            self._a1 * e_y / np.sqrt(self.dim_y)
            + self._a2 * s * y
            + self._a3 * s2 * (self._J @ x)
        )
        return self.grad_y_g(i, x, y) + self.sigma * noise

    def sgrad_x_g(self, i, x, y, zeta):
        e_y, e_x, s, s2 = zeta
        noise = self._a1 * e_x / np.sqrt(self.dim_x) + self._a3 * s2 * (self._J.T @ y)
        return self.grad_x_g(i, x, y) + self.sigma * noise

    def shess_yy_g(self, i, x, y, v, zeta):
        _, _, s, _ = zeta
        return self.hess_yy_g(i, x, y, v) + self.sigma * self._a2 * s * v

    def scross_xy_g(self, i, x, y, v, zeta):
        _, _, _, s2 = zeta
        return self.cross_xy_g(i, x, y, v) + self.sigma * self._a3 * s2 * (self._J.T @ v)

    # analytic -----------------------------------------------------------
    def y_star(self, x):
        return np.linalg.solve(self.A_bar, -(self.B_bar @ x + self.c_bar))

    def x_opt(self) -> np.ndarray:
        """Minimizer of Phi for this family (dense closed form).

        Phi is quadratic in x; solve grad Phi(x) = 0 by assembling its
        linear map column by column.
        """
        d = self.dim_x
        g0 = hypergradient_exact(self, np.zeros(d))
        M = np.empty((d, d))
        eye = np.eye(d)
        for k in range(d):
            M[:, k] = hypergradient_exact(self, eye[k]) - g0
        return np.linalg.solve(M, -g0)

    def phi_star(self):
        return phi_value(self, self.x_opt())


def make_quadratic(
    seed: int,
    n_nodes: int,
    d: int,
    p: int,
    conditioning: float = 10.0,
    heterogeneity: float = 0.0,
    noise_scale: float = 0.0,
) -> QuadraticBilevel:
    """Seeded random quadratic instance with certified mu_g.

    ``heterogeneity`` scales zero-mean node-to-node perturbations of
    (A_i, B_i, P_i, Q_i) around shared base matrices; the construction
    shifts all A_i by a common multiple of the identity if needed so each
    node's lower level stays strongly convex.
    """
    if d < 1 or p < 1:
        raise ValueError("d and p must be >= 1")
    if conditioning < 1:
        raise ValueError("conditioning must be >= 1")
    rng = np.random.default_rng(seed)

    def rand_sym(dim, scale=1.0):
        M = rng.standard_normal((dim, dim))
        return scale * (M + M.T) / 2.0

    def centered(shape):
        E = rng.standard_normal((n_nodes,) + shape)
        return E - E.mean(axis=0)

    # Shared lower Hessian with eigenvalues in [1, conditioning].
    U = np.linalg.qr(rng.standard_normal((p, p)))[0]
    eigs = np.linspace(1.0, conditioning, p)
    A0 = U @ np.diag(eigs) @ U.T
    A = A0[None, :, :] + heterogeneity * np.array(
        [(E + E.T) / 2.0 for E in centered((p, p))]
    )
    min_eig = min(np.linalg.eigvalsh(A[i]).min() for i in range(n_nodes))
    if min_eig < 0.1:
        A = A + (0.1 - min_eig) * np.eye(p)[None, :, :]

    B = rng.standard_normal((p, d))[None, :, :] + heterogeneity * centered((p, d))
    P = rand_sym(p)[None, :, :] + heterogeneity * np.array(
        [(E + E.T) / 2.0 for E in centered((p, p))]
    )
    Q = rng.standard_normal((p, d))[None, :, :] + heterogeneity * centered((p, d))
    R0 = rand_sym(d)
    R0 = R0 @ R0.T + np.eye(d)  # positive definite upper-level curvature
    spec = QuadraticBilevelSpec(
        P=np.broadcast_to(P, (n_nodes, p, p)).copy() if P.shape[0] == 1 else P,
        Q=np.broadcast_to(Q, (n_nodes, p, d)).copy() if Q.shape[0] == 1 else Q,
        q=np.tile(rng.standard_normal(p), (n_nodes, 1)),
        R=np.tile(R0, (n_nodes, 1, 1)),
        A=np.broadcast_to(A, (n_nodes, p, p)).copy() if A.shape[0] == 1 else A,
        B=np.broadcast_to(B, (n_nodes, p, d)).copy() if B.shape[0] == 1 else B,
        c=np.tile(rng.standard_normal(p), (n_nodes, 1)),
    )
    return QuadraticBilevel(spec, noise_scale=noise_scale)


def trivial_quadratic(dim: int = 1, n_nodes: int = 1) -> QuadraticBilevel:
    """f_i = 1/2 |y|^2, g_i = 1/2 |y - x|^2: y*(x) = x, grad Phi(x) = x."""
    eye = np.tile(np.eye(dim), (n_nodes, 1, 1))
    zeros_m = np.zeros((n_nodes, dim, dim))
    zeros_v = np.zeros((n_nodes, dim))
    spec = QuadraticBilevelSpec(
        P=eye.copy(), Q=zeros_m.copy(), q=zeros_v.copy(), R=zeros_m.copy(),
        A=eye.copy(), B=-eye.copy(), c=zeros_v.copy(),
    )
    return QuadraticBilevel(spec)


# ---------------------------------------------------------------------------
# Regularization-tuning regression family (streaming data)
# ---------------------------------------------------------------------------


@dataclass
class RidgeTuningSpec:
    """Scalar ridge-weight tuning for per-node linear regression.

    Each node i streams pairs (features, label) with
    features ~ U(-2 * 1.5^(1/3), 2 * 1.5^(1/3))^p and
    label = features . w_i + N(0, 1), where w_i = w + eps_i,
    eps_i ~ N(0, sigma_omega^2 I). The upper loss is the validation
    square error; the lower loss adds the ridge term |x| |y|^2.
    """

    dim_p: int
    sigma_omega: float  # 0.5 mild, 2.0 severe


class RidgeTuning(BilevelProblem):
    def __init__(self, omega: np.ndarray, spec: RidgeTuningSpec):
        n, p = omega.shape
        self.spec = spec
        self.omega = omega
        self.omega_bar = omega.mean(axis=0)
        self.spread = float(np.mean(np.sum((omega - self.omega_bar) ** 2, axis=1)))
        self.feat_var = FEATURE_VAR
        # g's lower curvature is 2 * feat_var + 2|x| >= 2 * feat_var.
        super().__init__(n, 1, p, mu_g=2.0 * FEATURE_VAR)

    # deterministic (population expectations; noise-free metrics) --------
    def f_value(self, i, x, y):
        diff = y - self.omega[i]
        return float(self.feat_var * diff @ diff + 1.0)

    def g_value(self, i, x, y):
        return self.f_value(i, x, y) + float(abs(x[0]) * (y @ y))

    def grad_x_f(self, i, x, y):
        return np.zeros(1)

    def grad_y_f(self, i, x, y):
        return 2.0 * self.feat_var * (y - self.omega[i])

    def grad_x_g(self, i, x, y):
        return np.array([np.sign(x[0]) * float(y @ y)])

    def grad_y_g(self, i, x, y):
        return 2.0 * self.feat_var * (y - self.omega[i]) + 2.0 * abs(x[0]) * y

    def hess_yy_g(self, i, x, y, v):
        return 2.0 * (self.feat_var + abs(x[0])) * v

    def cross_xy_g(self, i, x, y, v):
        return np.array([2.0 * np.sign(x[0]) * float(y @ v)])

    # stochastic (fresh streaming sample per call) -----------------------
    def _draw_pair(self, i, rng):
        feats = rng.uniform(-FEATURE_HALF_WIDTH, FEATURE_HALF_WIDTH, self.dim_y)
        label = float(feats @ self.omega[i]) + float(rng.standard_normal())
        return feats, label

    def draw_f_sample(self, i, rng):
        return self._draw_pair(i, rng)

    def draw_g_sample(self, i, rng):
        return self._draw_pair(i, rng)

    def sgrad_x_f(self, i, x, y, xi):
        return np.zeros(1)

    def sgrad_y_f(self, i, x, y, xi):
        feats, label = xi
        return 2.0 * (float(feats @ y) - label) * feats

    def sgrad_x_g(self, i, x, y, zeta):
        return np.array([np.sign(x[0]) * float(y @ y)])

    def sgrad_y_g(self, i, x, y, zeta):
        feats, label = zeta
        return 2.0 * (float(feats @ y) - label) * feats + 2.0 * abs(x[0]) * y

    def shess_yy_g(self, i, x, y, v, zeta):
        feats, _ = zeta
        return 2.0 * float(feats @ v) * feats + 2.0 * abs(x[0]) * v

    def scross_xy_g(self, i, x, y, v, zeta):
        return np.array([2.0 * np.sign(x[0]) * float(y @ v)])

    # analytic -----------------------------------------------------------
    def y_star(self, x):
        return self.feat_var / (self.feat_var + abs(x[0])) * self.omega_bar

    def phi_star(self):
        # Phi(x) increases with |x|; the population optimum is x = 0.
        return self.feat_var * self.spread + 1.0


def make_ridge_tuning(seed: int, spec: RidgeTuningSpec, n_nodes: int) -> RidgeTuning:
    """Seeded instance: base weights from U(0, 10), Gaussian node offsets."""
    if spec.dim_p < 1 or n_nodes < 1:
        raise ValueError("dim_p and n_nodes must be >= 1")
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, 10.0, spec.dim_p)
    eps = spec.sigma_omega * rng.standard_normal((n_nodes, spec.dim_p))
    return RidgeTuning(base[None, :] + eps, spec)


# ---------------------------------------------------------------------------
# Smooth non-quadratic family (finite-difference bias checks)
# ---------------------------------------------------------------------------


class LogCoshBilevel(BilevelProblem):
    """Strongly convex non-quadratic lower level with bounded third derivative.

    g_i(x, y) = 1/2 |y|^2 + lam * sum_j logcosh(y_j) + y'B_i x
    f_i(x, y) = 1/2 |y - r_i|^2 + 1/2 |x|^2

    The Hessian-Lipschitz constant of g is lam * max |d/du (1 - tanh(u)^2)|
    = lam * 4 / (3 sqrt 3), attained at u = +/- artanh(1/sqrt 3).
    """

    def __init__(self, B: np.ndarray, r: np.ndarray, lam: float = 1.0):
        n, p, d = B.shape
        self.B = B
        self.r = r
        self.lam = lam
        super().__init__(n, d, p, mu_g=1.0)

    @property
    def hessian_lipschitz(self) -> float:
        return self.lam * 4.0 / (3.0 * np.sqrt(3.0))

    def f_value(self, i, x, y):
        diff = y - self.r[i]
        return float(0.5 * diff @ diff + 0.5 * x @ x)

    def g_value(self, i, x, y):
        return float(
            0.5 * y @ y
            + self.lam * np.sum(np.logaddexp(y, -y) - np.log(2.0))
            + y @ (self.B[i] @ x)
        )

    def grad_x_f(self, i, x, y):
        return x.astype(float).copy()

    def grad_y_f(self, i, x, y):
        return y - self.r[i]

    def grad_x_g(self, i, x, y):
        return self.B[i].T @ y

    def grad_y_g(self, i, x, y):
        return y + self.lam * np.tanh(y) + self.B[i] @ x

    def hess_yy_g(self, i, x, y, v):
        return v + self.lam * (1.0 - np.tanh(y) ** 2) * v

    def cross_xy_g(self, i, x, y, v):
        return self.B[i].T @ v


def make_logcosh(
    seed: int, n_nodes: int, d: int, p: int, coupling: float = 0.3, lam: float = 1.0
) -> LogCoshBilevel:
    rng = np.random.default_rng(seed)
    B = coupling * rng.standard_normal((n_nodes, p, d))
    r = rng.standard_normal((n_nodes, p))
    return LogCoshBilevel(B, r, lam=lam)
