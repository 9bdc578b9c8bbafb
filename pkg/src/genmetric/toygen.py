"""Adam optimizer implemented from scratch, plus a closed-form trainable
generator (diagonal Gaussian fitted by moment matching) so the full
monitor / tune / early-stop pipeline runs end to end without any networks.

Sampling uses a named counter-based RNG so that (seed, draw index) always
reproduces the same output: Philox4x64-10 keyed by the seed, uniform doubles
taken as (next_uint64 >> 11) * 2^-53, turned into normals via Box-Muller
(u1 is drawn as 1 - u to keep it in (0, 1]). Draw order is one (n, d) block
of u1 followed by one (n, d) block of u2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import ActivationSet
from .errors import NumericalError, ValidationError

_SIGMA_FLOOR = 1e-12  # keeps log-domain parameters out of overflow


@dataclass(frozen=True)
class AdamConfig:
    """Step size and moment decay rates."""

    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValidationError("alpha must be > 0")
        if not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1):
            raise ValidationError("beta1 and beta2 must lie in [0, 1)")
        if not (self.eps > 0):
            raise ValidationError("eps must be > 0")


@dataclass(frozen=True)
class AdamState:
    """First/second moment vectors, step counter, and current parameters."""

    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta, dtype=np.float64).reshape(-1)
        m = np.ascontiguousarray(self.m, dtype=np.float64).reshape(-1)
        v = np.ascontiguousarray(self.v, dtype=np.float64).reshape(-1)
        if not (theta.shape == m.shape == v.shape):
            raise ValidationError("theta, m, v must share one length")
        if np.any(v < 0):
            raise ValidationError("second-moment entries must be >= 0")
        if self.t < 0:
            raise ValidationError("step counter must be >= 0")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "v", v)

    @classmethod
    def fresh(cls, theta) -> "AdamState":
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        return cls(theta=theta, m=np.zeros_like(theta), v=np.zeros_like(theta))


def adam_step(state: AdamState, grad, config: AdamConfig = AdamConfig()) -> AdamState:
    """One Adam update: moment EMAs, bias correction, parameter step.

        m_t = b1 m_{t-1} + (1 - b1) g
        v_t = b2 v_{t-1} + (1 - b2) g^2
        m^ = m_t / (1 - b1^t),  v^ = v_t / (1 - b2^t)
        theta_{t+1} = theta_t - alpha * m^ / (sqrt(v^) + eps)
    """
    grad = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    if grad.shape != state.theta.shape:
        raise ValidationError(
            f"gradient length {grad.shape[0]} != parameter length {state.theta.shape[0]}"
        )
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient")
    t = state.t + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1**t)
    v_hat = v / (1.0 - config.beta2**t)
    theta = state.theta - config.alpha * m_hat / (np.sqrt(v_hat) + config.eps)
    return AdamState(theta=theta, m=m, v=v, t=t)


@dataclass(frozen=True)
class ToyGenerator:
    """Diagonal-Gaussian sampler with trainable mean and log-sigma."""

    mu: np.ndarray
    log_sigma: np.ndarray
    seed: int = 0

    def __post_init__(self):
        mu = np.ascontiguousarray(self.mu, dtype=np.float64).reshape(-1)
        log_sigma = np.ascontiguousarray(self.log_sigma, dtype=np.float64).reshape(-1)
        if mu.shape != log_sigma.shape:
            raise ValidationError("mu and log_sigma must share one length")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(log_sigma)):
            raise ValidationError("generator parameters must be finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_sigma", log_sigma)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def _standard_normal(seed: int, n: int, d: int) -> np.ndarray:
    """Box-Muller normals over Philox4x64-10 counter-based uniforms."""
    gen = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    u1 = 1.0 - gen.random((n, d))
    u2 = gen.random((n, d))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def sample_toy(gen: ToyGenerator, n: int, seed: int | None = None) -> ActivationSet:
    """Draw n i.i.d. rows from Normal(mu, diag(sigma^2)); same seed, same bits."""
    if n < 1:
        raise ValidationError("need n >= 1 samples")
    use_seed = gen.seed if seed is None else int(seed)
    sigma = np.maximum(np.exp(gen.log_sigma), _SIGMA_FLOOR)
    z = _standard_normal(use_seed, n, gen.dim)
    return ActivationSet(
        data=gen.mu + sigma * z, layer_tag="toy", source_tag="generated"
    )


def _moment_targets(data: ActivationSet) -> tuple[np.ndarray, np.ndarray]:
    mu = data.data.mean(axis=0)
    sigma = data.data.std(axis=0, ddof=1)
    return mu, sigma


def moment_loss(mu, log_sigma, target_mu, target_sigma) -> float:
    """||mu - mu_data||^2 + ||exp(log_sigma) - sigma_data||^2."""
    sigma = np.exp(log_sigma)
    return float(np.sum((mu - target_mu) ** 2) + np.sum((sigma - target_sigma) ** 2))


def fit_toy_generator(
    data: ActivationSet,
    steps: int,
    config: AdamConfig = AdamConfig(),
    seed: int = 0,
    init_mu=None,
    init_log_sigma=None,
) -> tuple[ToyGenerator, list[float]]:
    """Fit the generator to the data's sample moments with analytic gradients.

    Returns the fitted generator (carrying `seed` for sampling) and the loss
    history, one entry per step, evaluated before each update.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    if data.n_samples < 2:
        raise ValidationError("need N >= 2 rows to fit moments")
    target_mu, target_sigma = _moment_targets(data)
    d = data.dim
    mu0 = np.zeros(d) if init_mu is None else np.asarray(init_mu, dtype=np.float64)
    ls0 = (
        np.zeros(d)
        if init_log_sigma is None
        else np.asarray(init_log_sigma, dtype=np.float64)
    )
    if mu0.shape != (d,) or ls0.shape != (d,):
        raise ValidationError("initial parameters must match the data dimension")

    state = AdamState.fresh(np.concatenate([mu0, ls0]))
    history: list[float] = []
    for _ in range(steps):
        mu, log_sigma = state.theta[:d], state.theta[d:]
        sigma = np.exp(log_sigma)
        history.append(moment_loss(mu, log_sigma, target_mu, target_sigma))
        grad_mu = 2.0 * (mu - target_mu)
        grad_ls = 2.0 * (sigma - target_sigma) * sigma
        state = adam_step(state, np.concatenate([grad_mu, grad_ls]), config)
    gen = ToyGenerator(mu=state.theta[:d], log_sigma=state.theta[d:], seed=seed)
    return gen, history
