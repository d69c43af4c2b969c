"""Multi-view MMV inverse problem, SBL-EM with a Kronecker Gamma x Psi prior,
and LS / OMP / ISTA / LASSO baselines."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import Scene
from .waveform import ObservationSet, TransmitPlan


class SblError(ValueError):
    pass


# ---------------------------------------------------------------------------
# problem assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MmvProblem:
    """Per-subcarrier stacked measurements y_n = Phi_n rho_n + n_n."""

    phis: tuple  # tuple of (l_n, Q) complex
    ys: tuple  # tuple of (l_n,) complex
    sigma2: float

    def __post_init__(self):
        q = self.phis[0].shape[1]
        for phi, y in zip(self.phis, self.ys):
            if phi.shape != (len(y), q):
                raise SblError("Phi_n rows must match y_n position-wise")

    @property
    def q(self) -> int:
        return self.phis[0].shape[1]

    @property
    def n_subcarriers(self) -> int:
        return len(self.phis)

    @property
    def lengths(self) -> tuple:
        return tuple(len(y) for y in self.ys)

    @property
    def l_max(self) -> int:
        return max(self.lengths)

    @property
    def l_all(self) -> int:
        return sum(self.lengths)


def build_problem(scene: Scene, channels: dict, plan: TransmitPlan,
                  observations: ObservationSet) -> MmvProblem:
    """Assemble Phi_n = stack over (slot, receiver) of
    sum_tx H_r diag(H_t^H x) * cell measure, and y_n from the observations.

    `channels` must hold ChannelTensors over all Q grid cells (not just the
    occupied ones) so the columns span the full candidate grid.
    """
    any_ct = next(iter(channels.values()))
    n = any_ct.gains.shape[2]
    if plan.n_subcarriers != n:
        raise SblError("transmit plan subcarrier count mismatch")
    phis = [[] for _ in range(n)]
    ys = [[] for _ in range(n)]
    for slot, (tx_ids, rx_ids) in enumerate(plan.schedule):
        if not rx_ids:
            raise SblError(f"slot {slot}: empty receiver set")
        for rx in rx_ids:
            h_r = channels[rx].gains
            for i in range(n):
                block = np.zeros((h_r.shape[0], h_r.shape[1]), dtype=complex)
                for tx in tx_ids:
                    h_t = channels[tx].gains
                    s_q = h_t[:, :, i].conj().T @ plan.pilots[tx][slot, i]
                    block += h_r[:, :, i] * s_q[None, :]
                phis[i].append(scene.measure * block)
                ys[i].append(observations.vector(rx, slot)[:, i])
    return MmvProblem(tuple(np.concatenate(p, axis=0) for p in phis),
                      tuple(np.concatenate(y) for y in ys),
                      observations.sigma2)


def _stacked(problem: MmvProblem):
    """Zero-pad/selection joint stacking: rows ordered antenna-row-major,
    subcarrier-minor, padding rows discarded; columns voxel-outer,
    subcarrier-inner. Returns (y_tilde, P) with P[r, i, n] = Phi_tilde[r, iN+n]."""
    n = problem.n_subcarriers
    q = problem.q
    rows = [(m, i) for m in range(problem.l_max) for i in range(n)
            if m < problem.lengths[i]]
    l_all = len(rows)
    y = np.empty(l_all, dtype=complex)
    p = np.zeros((l_all, q, n), dtype=complex)
    for r, (m, i) in enumerate(rows):
        y[r] = problem.ys[i][m]
        p[r, :, i] = problem.phis[i][m]
    return y, p


# ---------------------------------------------------------------------------
# posterior and EM
# ---------------------------------------------------------------------------

def _covariance_factor(problem, gamma, psi, p):
    """Cholesky factor of Sigma_y = sigma^2 I + Phi (Gamma x Psi) Phi^H."""
    l_all = p.shape[0]
    c = np.einsum("rin,i,nm->rim", p, gamma, psi, optimize=True)
    sig_y = c.reshape(l_all, -1) @ p.conj().reshape(l_all, -1).T
    sig_y += problem.sigma2 * np.eye(l_all)
    try:
        return scipy.linalg.cho_factor(sig_y, lower=True), c
    except np.linalg.LinAlgError as exc:
        raise SblError("sigma^2 I + Phi Gamma Phi^H is singular; "
                       "increase sigma2 or regularize gamma") from exc


def posterior_update(problem: MmvProblem, gamma: np.ndarray, psi: np.ndarray,
                     stacked=None):
    """Woodbury-form posterior. Returns mu (Q, N) with mu[i] = mean of u_i,
    and the Q diagonal blocks Sigma_i (Q, N, N)."""
    if np.any(gamma <= 0):
        raise SblError("gamma must be positive")
    y, p = _stacked(problem) if stacked is None else stacked
    n = problem.n_subcarriers
    factor, c = _covariance_factor(problem, gamma, psi, p)
    a = scipy.linalg.cho_solve(factor, y)
    mu = np.einsum("rin,r->in", c.conj(), a)
    w = scipy.linalg.cho_solve(factor, c.reshape(p.shape[0], -1))
    w = w.reshape(p.shape)
    quad = np.einsum("rin,rim->inm", c.conj(), w)
    sigma = gamma[:, None, None] * psi[None, :, :] - quad
    sigma = 0.5 * (sigma + sigma.conj().transpose(0, 2, 1))
    return mu, sigma


def posterior_update_direct(problem: MmvProblem, gamma: np.ndarray,
                            psi: np.ndarray):
    """First-form posterior (Gamma_inv + Phi^H Phi / sigma^2)^-1 for small
    problems; materializes the full NQ x NQ covariance."""
    y, p = _stacked(problem)
    n = problem.n_subcarriers
    q = problem.q
    phi = p.reshape(p.shape[0], q * n)
    gamma_inv = np.kron(np.diag(1.0 / gamma), np.linalg.inv(psi))
    prec = gamma_inv + phi.conj().T @ phi / problem.sigma2
    cov = np.linalg.inv(prec)
    mu = (cov @ (phi.conj().T @ y)) / problem.sigma2
    blocks = np.array([cov[i * n:(i + 1) * n, i * n:(i + 1) * n] for i in range(q)])
    return mu.reshape(q, n), blocks


def cost_function(problem: MmvProblem, gamma: np.ndarray, psi: np.ndarray,
                  stacked=None) -> float:
    """Minus log-likelihood up to constants: logdet(Sigma_y) + y^H Sigma_y^-1 y."""
    y, p = _stacked(problem) if stacked is None else stacked
    factor, _ = _covariance_factor(problem, gamma, psi, p)
    logdet = 2.0 * np.sum(np.log(np.real(np.diag(factor[0]))))
    quad = np.real(np.vdot(y, scipy.linalg.cho_solve(factor, y)))
    return float(logdet + quad)


@dataclass(frozen=True)
class SblState:
    gamma: np.ndarray  # (Q,) positive
    psi: np.ndarray  # (N, N) Hermitian positive-definite
    mu: np.ndarray  # (Q, N) posterior mean
    sigma_blocks: np.ndarray  # (Q, N, N)
    iteration: int
    cost_trace: tuple


GAMMA_FLOOR_REL = 1e-12
PSI_JITTER_REL = 1e-10


def em_step(problem: MmvProblem, state: SblState, stacked=None) -> SblState:
    """One E/M pass: posterior, then gamma (Eq. 49 order), then Psi with the
    fresh gamma; Psi is hermitized, jittered, and diag-normalized with the
    scale folded into gamma."""
    n = problem.n_subcarriers
    mu, sigma = posterior_update(problem, state.gamma, state.psi, stacked=stacked)
    r = np.einsum("in,im->inm", mu, mu.conj()) + sigma
    psi_inv = np.linalg.inv(state.psi)
    gamma = np.real(np.einsum("inm,mn->i", r, psi_inv)) / n
    gamma = np.maximum(gamma, GAMMA_FLOOR_REL * np.max(gamma))
    psi = np.einsum("i,inm->nm", 1.0 / gamma, r) / problem.q
    psi = 0.5 * (psi + psi.conj().T)
    psi += PSI_JITTER_REL * np.real(np.trace(psi)) / n * np.eye(n)
    scale = np.real(np.trace(psi)) / n
    psi = psi / scale
    gamma = gamma * scale
    cost = cost_function(problem, gamma, psi, stacked=stacked)
    return SblState(gamma, psi, mu, sigma, state.iteration + 1,
                    state.cost_trace + (cost,))


@dataclass(frozen=True)
class ReflectivityEstimate:
    rho: np.ndarray  # (Q, N): column n is rho_hat_n
    support: np.ndarray  # (Q,) bool
    gamma: np.ndarray = None

    def rho_n(self, n) -> np.ndarray:
        return self.rho[:, n]


SUPPORT_THRESHOLD_REL = 0.01


def initial_state(problem: MmvProblem) -> SblState:
    n = problem.n_subcarriers
    return SblState(np.ones(problem.q), np.eye(n, dtype=complex),
                    np.zeros((problem.q, n), dtype=complex),
                    np.tile(np.eye(n, dtype=complex), (problem.q, 1, 1)),
                    0, ())


def sbl_em(problem: MmvProblem, max_iters: int = 200, eps: float = 1e-4,
           update_psi: bool = True, return_state: bool = False):
    """Algorithm: init gamma = 1, Psi = I; iterate EM until
    ||gamma' - gamma|| / ||gamma|| < eps or max_iters."""
    if max_iters < 1 or eps <= 0:
        raise SblError("need max_iters >= 1 and eps > 0")
    stacked = _stacked(problem)
    state = initial_state(problem)
    for _ in range(max_iters):
        prev = state.gamma
        nxt = em_step(problem, state, stacked=stacked)
        state = nxt if update_psi else SblState(
            nxt.gamma, state.psi, nxt.mu, nxt.sigma_blocks,
            nxt.iteration, nxt.cost_trace)
        if np.linalg.norm(state.gamma - prev) / np.linalg.norm(prev) < eps:
            break
    mu, _ = posterior_update(problem, state.gamma, state.psi, stacked=stacked)
    est = ReflectivityEstimate(
        rho=mu, support=state.gamma >= SUPPORT_THRESHOLD_REL * state.gamma.max(),
        gamma=state.gamma)
    return (est, state) if return_state else est


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def ls(problem: MmvProblem) -> ReflectivityEstimate:
    """Minimum-norm least squares per subcarrier via regularized normal
    equations."""
    rho = np.zeros((problem.q, problem.n_subcarriers), dtype=complex)
    for i, (phi, y) in enumerate(zip(problem.phis, problem.ys)):
        l_n, q = phi.shape
        if l_n <= q:
            gram = phi @ phi.conj().T
            reg = 1e-10 * max(np.real(np.trace(gram)) / l_n, 1e-300)
            rho[:, i] = phi.conj().T @ np.linalg.solve(gram + reg * np.eye(l_n), y)
        else:
            gram = phi.conj().T @ phi
            reg = 1e-10 * max(np.real(np.trace(gram)) / q, 1e-300)
            rho[:, i] = np.linalg.solve(gram + reg * np.eye(q), phi.conj().T @ y)
    return ReflectivityEstimate(rho, np.ones(problem.q, dtype=bool))


def omp(problem: MmvProblem, k: int) -> ReflectivityEstimate:
    """Greedy orthogonal matching pursuit with k atoms per subcarrier."""
    if k > problem.q:
        raise SblError("k exceeds the number of grid cells")
    rho = np.zeros((problem.q, problem.n_subcarriers), dtype=complex)
    support = np.zeros(problem.q, dtype=bool)
    for i, (phi, y) in enumerate(zip(problem.phis, problem.ys)):
        norms = np.linalg.norm(phi, axis=0)
        norms[norms == 0] = 1.0
        picked = []
        resid = y.copy()
        for _ in range(k):
            scores = np.abs(phi.conj().T @ resid) / norms
            scores[picked] = -1.0
            picked.append(int(np.argmax(scores)))
            sub = phi[:, picked]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            resid = y - sub @ coef
        rho[picked, i] = coef
        support[picked] = True
    return ReflectivityEstimate(rho, support)


def ista(problem: MmvProblem, lam: float = 2e-4, iters: int = 500) -> ReflectivityEstimate:
    """Iterative soft thresholding with step 1 / L-hat per subcarrier."""
    rho = np.zeros((problem.q, problem.n_subcarriers), dtype=complex)
    for i, (phi, y) in enumerate(zip(problem.phis, problem.ys)):
        lip = np.linalg.norm(phi, 2) ** 2
        if lip == 0:
            continue
        step = 1.0 / lip
        x = np.zeros(problem.q, dtype=complex)
        for _ in range(iters):
            v = x + step * (phi.conj().T @ (y - phi @ x))
            mag = np.abs(v)
            x = np.where(mag > 0, v / np.maximum(mag, 1e-300), 0.0) \
                * np.maximum(mag - lam * step, 0.0)
        rho[:, i] = x
    return ReflectivityEstimate(rho, np.any(rho != 0, axis=1))


def lasso(problem: MmvProblem, lam: float = 2e-4, iters: int = 500) -> ReflectivityEstimate:
    """Identical objective to ISTA; provided under the conventional name."""
    return ista(problem, lam=lam, iters=iters)
