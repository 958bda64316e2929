"""Discretised least-squares losses of the noisy Hawkes mixture and their gradients.

For each type ``i`` the mean-field loss reads::

    T (H1 mu_i^2 + H0 mut_i^2)
    + 2 delta H1 mu_i  sum_j <phi_ij, Phi_j>
    + delta H1 sum_jk phi_ij' Psi_jk phi_ik
    + delta sum_j <phi_ij^2, Xi_j>
    - 2 (mut_i S0_i + mu_i S1_i + sum_j <phi_ij, PhiEv_ij>)

where ``phi_ij`` is the kernel sampled at lags ``1..L`` and the statistics
``Phi``, ``Psi``, ``Xi``, ``PhiEv``, ``S0``, ``S1`` depend only on the events and
the mixture weights. The hard-label loss is the same expression evaluated at
binary weights, for which ``Xi`` vanishes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .grid import DiscretizedSequence, dense, weighted_vector
from .kernel import grid_size
from .marks import MarkModel


@dataclass(frozen=True)
class ModelParams:
    """Baselines ``mu`` (structured) and ``mu_tilde`` (noise) per type, a D x D
    grid of kernels and the mark model they refer to."""

    mu: np.ndarray
    mu_tilde: np.ndarray
    kernels: tuple
    mark_model: MarkModel

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).reshape(-1))
        object.__setattr__(self, "mu_tilde", np.asarray(self.mu_tilde, dtype=float).reshape(-1))
        object.__setattr__(self, "kernels", tuple(tuple(row) for row in self.kernels))
        D = len(self.mu)
        if len(self.mu_tilde) != D or len(self.kernels) != D or any(len(r) != D for r in self.kernels):
            raise DataError("ModelParams: mu, mu_tilde and kernels must agree on the number of types")

    @property
    def D(self) -> int:
        return len(self.mu)

    @property
    def W(self) -> float:
        return self.kernels[0][0].W

    @property
    def family(self) -> str:
        return self.kernels[0][0].family

    def to_vector(self) -> np.ndarray:
        parts = [self.mu, self.mu_tilde]
        parts += [k.params() for row in self.kernels for k in row]
        return np.concatenate(parts)

    def from_vector(self, vec) -> "ModelParams":
        """Inverse of :meth:`to_vector`; the result is projected on the feasible set."""
        vec = np.asarray(vec, dtype=float)
        D = self.D
        mu = np.maximum(vec[:D], 0.0)
        mut = np.maximum(vec[D:2 * D], 0.0)
        pos = 2 * D
        rows = []
        for row in self.kernels:
            new_row = []
            for k in row:
                n = len(k.param_names)
                new_row.append(k.with_params(vec[pos:pos + n]))
                pos += n
            rows.append(tuple(new_row))
        return replace(self, mu=mu, mu_tilde=mut, kernels=tuple(rows))

    def as_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "mu_tilde": self.mu_tilde.tolist(),
            "kernels": [[k.as_dict() for k in row] for row in self.kernels],
            "mark_model": self.mark_model.as_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict, mark_model: MarkModel | None = None) -> "ModelParams":
        from .kernel import kernel_from_dict
        from .marks import mark_model_from_dict

        mm = mark_model if mark_model is not None else mark_model_from_dict(data["mark_model"])
        kernels = tuple(tuple(kernel_from_dict(k) for k in row) for row in data["kernels"])
        return cls(np.asarray(data["mu"], dtype=float), np.asarray(data["mu_tilde"], dtype=float),
                   kernels, mm)


@dataclass
class MixtureAssignment:
    """Relaxed labels ``rho`` in [0, 1], one array per type aligned with the
    pseudo-events of a :class:`DiscretizedSequence`."""

    rho: list

    def __post_init__(self):
        self.rho = [np.clip(np.asarray(r, dtype=float), 0.0, 1.0) for r in self.rho]

    @classmethod
    def constant(cls, dseq: DiscretizedSequence, value: float) -> "MixtureAssignment":
        return cls([np.full(n, float(value)) for n in dseq.n_pseudo])

    @property
    def hard(self) -> list:
        return [(r > 0.5).astype(int) for r in self.rho]

    def binarized(self) -> "MixtureAssignment":
        return MixtureAssignment([h.astype(float) for h in self.hard])

    def copy(self) -> "MixtureAssignment":
        return MixtureAssignment([r.copy() for r in self.rho])


@dataclass(frozen=True)
class Precomputations:
    """Sufficient statistics of the loss for fixed events and mixture weights.

    Lag arrays are indexed ``tau - 1`` for ``tau = 1..L``.
    """

    Phi: np.ndarray        # (D, L)
    Psi: np.ndarray        # (D, D, L, L)
    Xi: np.ndarray         # (D, L)
    PhiEvents: np.ndarray  # (D, D, L), [i, j]: events of type i, excitation from type j
    S0: np.ndarray         # (D,) sum of f0 (1 - rho) at events
    S1: np.ndarray         # (D,) sum of f1 rho at events
    L: int
    rho_snapshot: tuple = field(repr=False, compare=False, default=())


def _tail_cumsum(x: np.ndarray, G: int, L: int) -> np.ndarray:
    """``out[tau - 1] = sum_{u=0}^{G - tau} x[u]`` for ``tau = 1..L``."""
    c = np.cumsum(x)
    return c[G - np.arange(1, L + 1)]


def _psi(a: np.ndarray, b: np.ndarray, G: int, L: int) -> np.ndarray:
    """``out[tau-1, tau'-1] = sum_{s=1}^{G} a[s - tau] b[s - tau']`` with
    vectors zero outside ``[0, G]``."""
    out = np.zeros((L, L))
    taus = np.arange(1, L + 1)
    # only u in (G - L, G] is ever cut off by the upper limit u <= G - tau
    b_pad = np.concatenate([np.zeros(L), b, np.zeros(L)])
    u_tail = np.arange(G - L + 1, G + 1)
    a_tail = a[u_tail]
    for d in range(-(L - 1), L):
        if d >= 0:
            total = float(np.dot(a[:G + 1 - d], b[d:]))
        else:
            total = float(np.dot(a[-d:], b[:G + 1 + d]))
        prod_tail = a_tail * b_pad[u_tail + d + L]
        cut = np.cumsum(prod_tail[::-1])      # cut[tau-1] = sum over the last tau nodes
        t = taus[(taus - d >= 1) & (taus - d <= L)]
        out[t - 1, t - d - 1] = total - cut[t - 1]
    return out


def precompute(dseq: DiscretizedSequence, rho, L: int) -> Precomputations:
    """Statistics of the loss for the current mixture weights ``rho``."""
    D, G = dseq.D, dseq.G
    if L > G:
        raise DataError(f"kernel grid size L={L} exceeds event grid size G={G}")
    rho = getattr(rho, "rho", rho)
    zt = [weighted_vector(dseq, rho, j) for j in range(D)]
    Phi = np.stack([_tail_cumsum(zt[j], G, L) for j in range(D)])
    Xi = np.empty((D, L))
    for j in range(D):
        g = dseq.types[j]
        r = np.asarray(rho[j], dtype=float)
        zz = dense(dseq, g.weights ** 2 * r, j) - zt[j] ** 2
        Xi[j] = _tail_cumsum(zz, G, L)
    Psi = np.empty((D, D, L, L))
    for j in range(D):
        for k in range(D):
            Psi[j, k] = _psi(zt[j], zt[k], G, L)
    PhiEvents = np.zeros((D, D, L))
    S0 = np.empty(D)
    S1 = np.empty(D)
    lags = np.arange(1, L + 1)
    for i in range(D):
        g = dseq.types[i]
        r = np.asarray(rho[i], dtype=float)
        w = g.f1 * r
        S0[i] = float(np.sum(g.f0 * (1.0 - r)))
        S1[i] = float(np.sum(w))
        idx = g.bins[:, None] - lags[None, :]
        valid = idx >= 0
        idx = np.where(valid, idx, 0)
        for j in range(D):
            PhiEvents[i, j] = w @ np.where(valid, zt[j][idx], 0.0)
    snapshot = tuple(np.array(r, dtype=float, copy=True) for r in rho)
    return Precomputations(Phi, Psi, Xi, PhiEvents, S0, S1, L, snapshot)


def discretized_kernels(params: ModelParams, delta: float):
    """Per-pair kernel lags ``(D, D, L)`` and their parameter gradients."""
    D = params.D
    disc = [[k.discretize(delta) for k in row] for row in params.kernels]
    phi = np.stack([np.stack([d.lags for d in row]) for row in disc])
    grads = [[{name: g[1:] for name, g in d.grads.items()} for d in row] for row in disc]
    return phi, grads


def _check_consistent(pre: Precomputations, rho) -> None:
    rho = getattr(rho, "rho", rho)
    if len(rho) != len(pre.rho_snapshot) or not all(
            np.array_equal(np.asarray(a, dtype=float), b) for a, b in zip(rho, pre.rho_snapshot)):
        raise DataError("precomputations were built for different mixture weights")


def _loss_from_pre(params: ModelParams, pre: Precomputations, dseq: DiscretizedSequence,
                   with_noise: bool = True, phi=None) -> float:
    mm = params.mark_model
    H1, H0, T, delta = mm.H1, mm.H0, dseq.T, dseq.delta
    if phi is None:
        phi, _ = discretized_kernels(params, delta)
    total = 0.0
    for i in range(params.D):
        mu, mut = params.mu[i], params.mu_tilde[i]
        lin = sum(phi[i, j] @ pre.Phi[j] for j in range(params.D))
        quad = sum(phi[i, j] @ pre.Psi[j, k] @ phi[i, k]
                   for j in range(params.D) for k in range(params.D))
        xi = sum((phi[i, j] ** 2) @ pre.Xi[j] for j in range(params.D))
        ev = sum(phi[i, j] @ pre.PhiEvents[i, j] for j in range(params.D))
        total += (T * H1 * mu ** 2 + 2 * delta * H1 * mu * lin + delta * H1 * quad
                  + delta * xi - 2 * (mu * pre.S1[i] + ev))
        if with_noise:
            total += T * H0 * mut ** 2 - 2 * mut * pre.S0[i]
    return float(total)


def loss_meanfield(params: ModelParams, rho, dseq: DiscretizedSequence,
                   pre: Precomputations | None = None, check: bool = False) -> float:
    """Mean-field relaxed loss at mixture weights ``rho``."""
    L = grid_size(params.W, dseq.delta)
    if pre is None:
        pre = precompute(dseq, rho, L)
    elif check:
        _check_consistent(pre, rho)
    return _loss_from_pre(params, pre, dseq)


def loss_hard(params: ModelParams, labels, dseq: DiscretizedSequence,
              pre: Precomputations | None = None, with_noise: bool = True) -> float:
    """Loss for binary labels ``labels`` (one 0/1 array per type).

    ``with_noise=False`` drops the noise-process terms, giving the plain
    marked least-squares Hawkes loss on the events labelled 1.
    """
    labels = [np.asarray(y, dtype=float) for y in labels]
    if any(np.any((y != 0) & (y != 1)) for y in labels):
        raise DataError("loss_hard expects binary labels")
    if pre is None:
        pre = precompute(dseq, labels, grid_size(params.W, dseq.delta))
    return _loss_from_pre(params, pre, dseq, with_noise=with_noise)


@dataclass(frozen=True)
class ThetaGradient:
    mu: np.ndarray          # (D,)
    mu_tilde: np.ndarray    # (D,)
    eta: list               # eta[m][l]: gradient vector over kernel.param_names
    eta_curvature: list     # Gauss-Newton diagonal for the same entries

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.mu, self.mu_tilde] + [g for row in self.eta for g in row])

    def curvature_vector(self, T: float, mm: MarkModel) -> np.ndarray:
        D = len(self.mu)
        return np.concatenate([np.full(D, 2 * T * mm.H1), np.full(D, 2 * T * mm.H0)]
                              + [c for row in self.eta_curvature for c in row])


def theta_gradient(params: ModelParams, pre: Precomputations, dseq: DiscretizedSequence,
                   disc=None) -> ThetaGradient:
    """Analytic gradients with respect to ``mu``, ``mu_tilde`` and every kernel parameter."""
    mm = params.mark_model
    H1, H0, T, delta = mm.H1, mm.H0, dseq.T, dseq.delta
    D = params.D
    phi, dphi = disc if disc is not None else discretized_kernels(params, delta)
    g_mu = np.empty(D)
    g_mut = np.empty(D)
    g_eta = []
    c_eta = []
    for m in range(D):
        lin = sum(phi[m, j] @ pre.Phi[j] for j in range(D))
        g_mu[m] = 2 * T * H1 * params.mu[m] + 2 * delta * H1 * lin - 2 * pre.S1[m]
        g_mut[m] = 2 * T * H0 * params.mu_tilde[m] - 2 * pre.S0[m]
        row, crow = [], []
        for l in range(D):
            dl_dphi = (2 * delta * H1 * params.mu[m] * pre.Phi[l]
                       + 2 * delta * H1 * sum(pre.Psi[l, k] @ phi[m, k] for k in range(D))
                       + 2 * delta * phi[m, l] * pre.Xi[l]
                       - 2 * pre.PhiEvents[m, l])
            names = params.kernels[m][l].param_names
            row.append(np.array([dphi[m][l][n] @ dl_dphi for n in names]))
            crow.append(np.array([
                2 * delta * H1 * (dphi[m][l][n] @ pre.Psi[l, l] @ dphi[m][l][n])
                + 2 * delta * (dphi[m][l][n] ** 2) @ np.maximum(pre.Xi[l], 0.0)
                for n in names]))
        g_eta.append(row)
        c_eta.append(crow)
    return ThetaGradient(g_mu, g_mut, g_eta, c_eta)


def gauss_newton(params: ModelParams, pre: Precomputations, dseq: DiscretizedSequence,
                 disc=None) -> np.ndarray:
    """Gauss-Newton matrix of the loss in the :meth:`ModelParams.to_vector` layout.

    The loss is a sum over target types, so the matrix is block diagonal over
    ``(mu[m], kernels[m][*])`` plus a diagonal for ``mu_tilde``.
    """
    mm = params.mark_model
    H1, H0, T, delta = mm.H1, mm.H0, dseq.T, dseq.delta
    D = params.D
    _, dphi = disc if disc is not None else discretized_kernels(params, delta)
    sizes = [[len(k.param_names) for k in row] for row in params.kernels]
    n = 2 * D + sum(map(sum, sizes))
    H = np.zeros((n, n))
    xi = np.maximum(pre.Xi, 0.0)
    pos = 2 * D
    for m in range(D):
        H[m, m] = 2 * T * H1
        H[D + m, D + m] = 2 * T * H0
        names = params.kernels[m][0].param_names
        J = [np.stack([dphi[m][l][nm] for nm in names], axis=1) for l in range(D)]   # (L, P)
        P = len(names)
        for l in range(D):
            a = pos + l * P
            H[m, a:a + P] = H[a:a + P, m] = 2 * delta * H1 * (pre.Phi[l] @ J[l])
            for k in range(D):
                b = pos + k * P
                H[a:a + P, b:b + P] = 2 * delta * H1 * (J[l].T @ pre.Psi[l, k] @ J[k])
            H[a:a + P, a:a + P] += 2 * delta * (J[l].T * xi[l]) @ J[l]
        pos += D * P
    return H


def objective(params: ModelParams, pre: Precomputations, dseq: DiscretizedSequence,
              with_noise: bool = True, curvature: bool = False) -> tuple:
    """Loss and theta-gradient sharing one kernel discretisation.

    Without the noise terms the ``mu_tilde`` gradient is reported as zero.
    With ``curvature`` the Gauss-Newton matrix is appended to the result.
    """
    disc = discretized_kernels(params, dseq.delta)
    loss = _loss_from_pre(params, pre, dseq, with_noise=with_noise, phi=disc[0])
    grad = theta_gradient(params, pre, dseq, disc=disc)
    if not with_noise:
        grad = replace(grad, mu_tilde=np.zeros_like(grad.mu_tilde))
    if curvature:
        return loss, grad, gauss_newton(params, pre, dseq, disc=disc)
    return loss, grad


def grad_mu(params, rho, dseq, pre=None) -> np.ndarray:
    pre = pre if pre is not None else precompute(dseq, rho, grid_size(params.W, dseq.delta))
    return theta_gradient(params, pre, dseq).mu


def grad_mu_tilde(params, rho, dseq, pre=None) -> np.ndarray:
    pre = pre if pre is not None else precompute(dseq, rho, grid_size(params.W, dseq.delta))
    return theta_gradient(params, pre, dseq).mu_tilde


def grad_eta(params, rho, dseq, pre=None) -> list:
    pre = pre if pre is not None else precompute(dseq, rho, grid_size(params.W, dseq.delta))
    return theta_gradient(params, pre, dseq).eta


def _lagged(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``out[b] = sum_{tau=1}^{L} k[tau-1] x[b + tau]`` with ``x`` zero past its end."""
    L = len(k)
    padded = np.concatenate([x[1:], np.zeros(L)])
    return np.correlate(padded, k, mode="valid")[:len(x)]


def excitation(phi: np.ndarray, zt: list, G: int) -> np.ndarray:
    """``e[i, s] = sum_j sum_{tau=1}^{L} phi[i, j, tau-1] zt_j[s - tau]``."""
    D = phi.shape[0]
    out = np.zeros((D, G + 1))
    for i in range(D):
        for j in range(D):
            kern = np.concatenate([[0.0], phi[i, j]])
            out[i] += np.convolve(zt[j], kern)[:G + 1]
    return out


def grad_rho(params: ModelParams, rho, dseq: DiscretizedSequence) -> list:
    """Gradient of the mean-field loss with respect to each pseudo-event weight."""
    rho = getattr(rho, "rho", rho)
    mm = params.mark_model
    H1, delta, G, D = mm.H1, dseq.delta, dseq.G, params.D
    phi, _ = discretized_kernels(params, delta)
    zt = [weighted_vector(dseq, rho, j) for j in range(D)]
    e = excitation(phi, zt, G)
    # r_i[s] = 2 delta H1 (mu_i + e_i[s]) on s = 1..G; q_i[s] = f1 rho at events
    r = 2 * delta * H1 * (params.mu[:, None] + e)
    r[:, 0] = 0.0
    q = np.stack([dense(dseq, dseq.types[i].f1 * np.asarray(rho[i], dtype=float), i) for i in range(D)])
    ones = np.ones(G + 1)
    out = []
    for m in range(D):
        g = dseq.types[m]
        rm = np.asarray(rho[m], dtype=float)
        future = np.zeros(G + 1)
        var = np.zeros(G + 1)
        for i in range(D):
            future += _lagged(r[i], phi[i, m]) - 2 * _lagged(q[i], phi[i, m])
            var += delta * _lagged(ones, phi[i, m] ** 2)
        b = g.bins
        z = g.weights
        grad = (z * future[b]
                + z ** 2 * (1 - 2 * rm) * var[b]
                + 2 * params.mu_tilde[m] * g.f0
                - 2 * g.f1 * (params.mu[m] + e[m, b]))
        out.append(grad)
    return out
