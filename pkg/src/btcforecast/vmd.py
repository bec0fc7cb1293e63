"""Variational mode decomposition.

Splits a real signal into ``K`` band-limited modes by alternating
Wiener-filter mode updates, spectral-centroid frequency updates and dual
ascent on the reconstruction constraint, all on the one-sided spectrum of a
mirror-extended copy of the input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

INIT_SCHEMES = ("zeros", "uniform", "random")


@dataclass(frozen=True)
class VmdConfig:
    """Decomposition settings.

    ``alpha`` is the bandwidth penalty: larger values give narrower modes.
    ``tau = 0`` disables dual ascent, so the modes need not sum exactly to
    the input (noise slack).
    """

    K: int = 11
    alpha: float = 5000.0
    tau: float = 0.0
    dc_mode: bool = False
    init: str = "uniform"
    tol: float = 1e-7
    max_iter: int = 500
    seed: int | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError("K must be >= 1")
        if not self.alpha > 0:
            raise ValidationError("alpha must be > 0")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.init not in INIT_SCHEMES:
            raise ValidationError(f"init must be one of {INIT_SCHEMES}")


@dataclass(frozen=True, eq=False)
class VmdResult:
    modes: np.ndarray  # (K, N), rows ordered by ascending omega
    omegas: np.ndarray  # cycles/sample
    iterations: int
    final_residual: float
    converged: bool = field(default=True)

    @property
    def K(self) -> int:
        return self.modes.shape[0]

    def mode_names(self, prefix: str = "M") -> list[str]:
        return [f"{prefix}{k}" for k in range(self.K)]

    def as_columns(self, prefix: str = "M") -> dict[str, np.ndarray]:
        return dict(zip(self.mode_names(prefix), self.modes))


def _mirror(signal: np.ndarray) -> np.ndarray:
    n = signal.size
    left = signal[: n // 2][::-1]
    right = signal[n // 2 :][::-1]
    return np.concatenate([left, signal, right])


def _initial_omegas(config: VmdConfig, n: int) -> np.ndarray:
    K = config.K
    if config.init == "uniform":
        omega = 0.5 / K * np.arange(K)
    elif config.init == "random":
        rng = np.random.default_rng(config.seed)
        fs = 1.0 / n
        omega = np.sort(np.exp(np.log(fs) + (np.log(0.5) - np.log(fs)) * rng.random(K)))
    else:
        omega = np.zeros(K)
    if config.dc_mode:
        omega[0] = 0.0
    return omega


def decompose(signal, config: VmdConfig | None = None) -> VmdResult:
    """Decompose ``signal`` into ``config.K`` modes.

    Iterates until the summed relative change of the mode spectra drops
    below ``tol`` or ``max_iter`` is reached; in the latter case the result
    carries ``converged=False`` and the last residual.
    """
    config = config or VmdConfig()
    f = np.asarray(signal, dtype=np.float64)
    if f.ndim != 1:
        raise ValidationError("signal must be 1-D")
    if f.size < 2 * config.K:
        raise ValidationError(f"signal of length {f.size} is too short for K={config.K}")
    if not np.all(np.isfinite(f)):
        raise ValidationError("signal contains non-finite values")

    N = f.size
    T = 2 * N
    f_hat = np.fft.rfft(_mirror(f))
    freqs = np.arange(f_hat.size) / T  # 0 .. 0.5

    K = config.K
    two_alpha = 2.0 * config.alpha
    omega = _initial_omegas(config, N)
    u_hat = np.zeros((K, f_hat.size), dtype=complex)
    lam = np.zeros_like(f_hat)
    total = np.zeros_like(f_hat)

    residual = np.inf
    n_iter = 0
    while n_iter < config.max_iter:
        n_iter += 1
        change = 0.0
        for k in range(K):
            old = u_hat[k]
            others = total - old
            new = (f_hat - others + lam / 2.0) / (1.0 + two_alpha * (freqs - omega[k]) ** 2)
            power = new.real**2 + new.imag**2
            if not (config.dc_mode and k == 0):
                p_sum = power.sum()
                if p_sum > 0:
                    omega[k] = float(freqs @ power / p_sum)
            old_norm = float(np.vdot(old, old).real)
            diff = new - old
            diff_norm = float(np.vdot(diff, diff).real)
            if old_norm > 0:
                change += diff_norm / old_norm
            elif diff_norm > 0:
                change = np.inf
            u_hat[k] = new
            total = others + new
        if config.tau:
            lam = lam + config.tau * (f_hat - total)
        residual = change
        if residual < config.tol:
            break

    modes_full = np.fft.irfft(u_hat, n=T, axis=1)
    modes = modes_full[:, N // 2 : N // 2 + N]
    order = np.argsort(omega, kind="stable")
    return VmdResult(
        modes=np.ascontiguousarray(modes[order]),
        omegas=omega[order].copy(),
        iterations=n_iter,
        final_residual=float(residual),
        converged=bool(residual < config.tol),
    )


def decompose_causal(signal, n_train: int, config: VmdConfig | None = None) -> np.ndarray:
    """Modes that never look past the day they describe.

    Rows before ``n_train`` come from one decomposition of the training
    prefix; each later day ``t`` is the last sample of a decomposition of
    ``signal[: t + 1]``. Returns a ``(K, N)`` array.
    """
    config = config or VmdConfig()
    f = np.asarray(signal, dtype=np.float64)
    if not 0 < n_train <= f.size:
        raise ValidationError("n_train must be within the signal")
    out = np.empty((config.K, f.size))
    out[:, :n_train] = decompose(f[:n_train], config).modes
    for t in range(n_train, f.size):
        out[:, t] = decompose(f[: t + 1], config).modes[:, -1]
    return out


def write_modes_csv(path, dates, modes: np.ndarray, prefix: str = "M") -> None:
    """CSV with columns ``date, M0 .. M{K-1}``."""
    modes = np.asarray(modes)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + [f"{prefix}{k}" for k in range(modes.shape[0])])
        for i, d in enumerate(np.asarray(dates, dtype="datetime64[D]")):
            w.writerow([str(d)] + [repr(float(v)) for v in modes[:, i]])


def plot_modes(path, dates, result: VmdResult, signal=None) -> None:
    """Stacked panels, lowest-frequency mode on top. Needs matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = result.K + (signal is not None)
    fig, axes = plt.subplots(rows, 1, figsize=(8, 1.2 * rows), sharex=True)
    axes = np.atleast_1d(axes)
    x = np.asarray(dates, dtype="datetime64[D]")
    i = 0
    if signal is not None:
        axes[0].plot(x, signal, lw=0.6, color="k")
        axes[0].set_ylabel("input", fontsize=7)
        i = 1
    for k, mode in enumerate(result.modes):
        axes[i + k].plot(x, mode, lw=0.6)
        axes[i + k].set_ylabel(f"M{k}", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
