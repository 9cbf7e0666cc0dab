"""Channel main-diagonal estimation from received pilots.

Two families: the standard LMMSE estimator, which least-squares fits the
pilot observations on a truncated delay-Doppler reconstruction grid, and the
smoothness-regularized estimator (SRH), which interpolates the CMD directly
in the TF domain by minimizing the energy of a weighted discrete Hessian
subject to relaxed pilot fidelity.

SRH variants: "srh" (isotropic weights), "srh-na" (noise-aware fidelity
weight derived from noise plus self-interference power), "srh-ma"
(mode-aware anisotropic weights from the channel spread ratio), "srh-mna"
(both).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .piloting import PilotPlacement, PilotSequence

SRH_VARIANTS = ("srh", "srh-na", "srh-ma", "srh-mna")
VARIANTS = ("lmmse",) + SRH_VARIANTS

OMEGA_CAP = 1e8


class SolverError(RuntimeError):
    """Iterative solver failed to reach the requested residual."""


@dataclass(frozen=True)
class ReconstructionGrid:
    """Delay-Doppler support for the LMMSE fit.

    Doppler bins run -Q..Q; delay bins run -Wn..W (cyclic). With the symplectic
    kernel used here a scatterer at positive delay k0/(M F) concentrates at
    delay bin -k0, so Wn must cover the delay spread while W guards the
    smearing tail on the opposite side.
    """

    Q: int
    W: int
    Wn: int

    def __post_init__(self):
        if self.Q < 0 or self.W < 0 or self.Wn < 0:
            raise ValueError("reconstruction grid extents must be nonnegative")

    def validate(self, M: int, N: int):
        if self.Q > N // 2:
            raise ValueError(f"Q = {self.Q} exceeds N/2 = {N // 2}")
        if self.W + self.Wn > M:
            raise ValueError(f"W + Wn = {self.W + self.Wn} exceeds M = {M}")

    def cells(self):
        """(doppler, delay) bin pairs in a fixed enumeration order."""
        return [(l, k) for l in range(-self.Q, self.Q + 1)
                for k in range(-self.Wn, self.W + 1)]


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator selection and parameters.

    sigma2 / sigma_z2 are the per-symbol noise and self-interference powers.
    alpha and beta weight the frequency- and time-curvature channels for the
    mode-aware variants; feed them normalized to alpha*beta = 1 so omega keeps
    a stable meaning (the objective is invariant under (alpha, beta, omega) ->
    (c alpha, c beta, c^4 omega)). omega is the fidelity weight for the
    non-noise-aware variants (default 1/P).
    """

    variant: str
    sigma2: float = 0.0
    sigma_z2: float = 0.0
    alpha: float | None = None
    beta: float | None = None
    omega: float | None = None
    grid_k: ReconstructionGrid | None = None
    solver: str = "auto"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown estimator variant {self.variant!r}")
        if self.sigma2 < 0 or self.sigma_z2 < 0:
            raise ValueError("noise powers must be nonnegative")
        for name in ("alpha", "beta", "omega"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive when given")
        if self.solver not in ("auto", "direct", "cg"):
            raise ValueError("solver must be auto, direct or cg")


@dataclass(frozen=True)
class CMDEstimate:
    """Estimated channel main diagonal and the pilot-fidelity residual at it.

    h_extended carries the full (M+2) x (N+2) optimization variable of the
    smoothness estimator (None for LMMSE); h_tilde is its interior block.
    """

    h_tilde: np.ndarray
    residual: float
    h_extended: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.h_tilde)):
            raise SolverError("estimate contains non-finite entries")


def partial_cmd(q: np.ndarray, pilots: PilotSequence) -> np.ndarray:
    """Per-pilot raw CMD samples h_pilot = q / p."""
    p = np.asarray(pilots.symbols)
    if np.any(np.abs(p) == 0):
        raise ValueError("pilot symbols must be nonzero")
    q = np.asarray(q)
    if q.shape != p.shape:
        raise ValueError("received pilot vector length does not match the sequence")
    return q / p


def relaxation_delta(sigma2: float, sigma_z2: float, pilots: PilotSequence) -> float:
    """Expected pilot-fidelity error (sigma_z^2 + sigma^2) * sum_s |p_s|^-2."""
    p = np.asarray(pilots.symbols)
    return float((sigma2 + sigma_z2) * np.sum(np.abs(p) ** -2.0))


def _dd_atoms(pl: PilotPlacement, cells, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Symplectic-DFT atoms (1/sqrt(NM)) e^{-2j pi (n l / N - m k / M)} at the given TF cells."""
    M, N = pl.M, pl.N
    ls = np.array([c[0] for c in cells])
    ks = np.array([c[1] for c in cells])
    phase = -2j * np.pi * (np.outer(cols, ls) / N - np.outer(rows, ks) / M)
    return np.exp(phase) / np.sqrt(N * M)


def lmmse_estimate(h_pilot: np.ndarray, pl: PilotPlacement,
                   cfg: EstimatorConfig) -> CMDEstimate:
    """Ridge-regularized least-squares fit on the delay-Doppler reconstruction grid.

    Solves (C^H C + sigma2 I) H = C^H h_pilot for the grid coefficients and
    maps them back to the TF domain.
    """
    if cfg.grid_k is None:
        raise ValueError("lmmse requires a reconstruction grid (grid_k)")
    cfg.grid_k.validate(pl.M, pl.N)
    cells = cfg.grid_k.cells()
    if len(cells) > pl.P:
        warnings.warn(
            f"reconstruction grid has {len(cells)} cells but only {pl.P} pilots; "
            "the fit is underdetermined and relies on the ridge term",
            stacklevel=2,
        )
    pr, pc = pl.pilot_array_indices()
    C = _dd_atoms(pl, cells, pr, pc)
    G = C.conj().T @ C + cfg.sigma2 * np.eye(len(cells))
    H = np.linalg.solve(G, C.conj().T @ np.asarray(h_pilot))
    mm, nn = np.meshgrid(np.arange(pl.M), np.arange(pl.N), indexing="ij")
    C_full = _dd_atoms(pl, cells, mm.reshape(-1), nn.reshape(-1))
    h_tilde = (C_full @ H).reshape(pl.M, pl.N)
    residual = float(np.sum(np.abs(np.asarray(h_pilot) - C @ H) ** 2))
    return CMDEstimate(h_tilde=h_tilde, residual=residual)


def hessian_kernels() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Second-difference stencils (time, frequency, mixed) for the discrete Hessian."""
    phi_tt = np.array([[0, 0, 0], [-1, 2, -1], [0, 0, 0]], dtype=float)
    phi_ff = np.array([[0, -1, 0], [0, 2, 0], [0, -1, 0]], dtype=float)
    phi_tf = np.array([[-1, 1, 0], [1, -1, 0], [0, 0, 0]], dtype=float)
    return phi_tt, phi_ff, phi_tf


def valid_convolve(ext: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid part of the 2D convolution of an (M+2) x (N+2) array with a 3x3 kernel.

    out[m, n] = sum_{i,j} kernel[i, j] * ext[m - i + 2, n - j + 2], yielding M x N.
    """
    ext = np.asarray(ext)
    M, N = ext.shape[0] - 2, ext.shape[1] - 2
    out = np.zeros((M, N), dtype=ext.dtype)
    for i in range(3):
        for j in range(3):
            if kernel[i, j]:
                out += kernel[i, j] * ext[2 - i:2 - i + M, 2 - j:2 - j + N]
    return out


def weighted_hessian_energy(h_ex: np.ndarray, alpha: float, beta: float) -> float:
    """Total squared Frobenius norm of the weighted discrete Hessian.

    The per-cell Hessian has diagonal alpha^2 * (ff term), beta^2 * (tt term)
    and off-diagonal alpha*beta * (tf term), counted twice.
    """
    phi_tt, phi_ff, phi_tf = hessian_kernels()
    c_ff = valid_convolve(h_ex, phi_ff)
    c_tt = valid_convolve(h_ex, phi_tt)
    c_tf = valid_convolve(h_ex, phi_tf)
    return float(alpha**4 * np.sum(np.abs(c_ff) ** 2)
                 + beta**4 * np.sum(np.abs(c_tt) ** 2)
                 + 2 * alpha**2 * beta**2 * np.sum(np.abs(c_tf) ** 2))


def srh_objective(h_ex: np.ndarray, h_pilot: np.ndarray, pl: PilotPlacement,
                  alpha: float, beta: float, omega: float) -> float:
    """Smoothness energy plus omega-weighted pilot fidelity on the extended array."""
    pr, pc = pl.pilot_array_indices()
    fid = np.sum(np.abs(np.asarray(h_pilot) - h_ex[pr + 1, pc + 1]) ** 2)
    return weighted_hessian_energy(h_ex, alpha, beta) + omega * float(fid)


def _conv_operator(kernel: np.ndarray, M: int, N: int) -> sp.csr_matrix:
    """Sparse matrix of the valid convolution, mapping (M+2)(N+2) -> M*N."""
    ncols = N + 2
    mm, nn = np.meshgrid(np.arange(M), np.arange(N), indexing="ij")
    out_idx = (mm * N + nn).reshape(-1)
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            if kernel[i, j]:
                src = ((mm + 2 - i) * ncols + (nn + 2 - j)).reshape(-1)
                rows.append(out_idx)
                cols.append(src)
                vals.append(np.full(out_idx.shape, kernel[i, j]))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(M * N, (M + 2) * (N + 2)),
    )


def _resolve_srh_params(pl: PilotPlacement, cfg: EstimatorConfig):
    if cfg.variant in ("srh-ma", "srh-mna"):
        if cfg.alpha is None or cfg.beta is None:
            raise ValueError("mode-aware variants require alpha and beta")
        alpha, beta = cfg.alpha, cfg.beta
    else:
        alpha = beta = 1.0
    if cfg.variant in ("srh-na", "srh-mna"):
        # unit-energy pilots: sum |p_s|^-2 = P
        delta = (cfg.sigma2 + cfg.sigma_z2) * pl.P
        omega = OMEGA_CAP if delta < 1.0 / OMEGA_CAP else min(1.0 / delta, OMEGA_CAP)
    else:
        omega = cfg.omega if cfg.omega is not None else 1.0 / max(pl.P, 1)
    return alpha, beta, omega


def srh_estimate(h_pilot: np.ndarray, pl: PilotPlacement,
                 cfg: EstimatorConfig) -> CMDEstimate:
    """Smoothness-regularized CMD estimate in the TF domain.

    Minimizes weighted_hessian_energy(h_ex) + omega * sum_s |h_pilot_s -
    h_ex[pilot_s]|^2 over the (M+2) x (N+2) extension of the frame; the
    one-cell border consists of free variables rather than padding, and the
    returned estimate is the interior M x N block.
    """
    h_pilot = np.asarray(h_pilot, dtype=complex)
    if h_pilot.shape != (pl.P,):
        raise ValueError("pilot sample vector does not match the placement")
    alpha, beta, omega = _resolve_srh_params(pl, cfg)
    M, N = pl.M, pl.N
    nvar = (M + 2) * (N + 2)

    phi_tt, phi_ff, phi_tf = hessian_kernels()
    A = sp.csr_matrix((nvar, nvar))
    for kern, w in ((phi_ff, alpha**4), (phi_tt, beta**4), (phi_tf, 2 * alpha**2 * beta**2)):
        D = _conv_operator(kern, M, N)
        A = A + w * (D.T @ D)

    pr, pc = pl.pilot_array_indices()
    pvar = (pr + 1) * (N + 2) + (pc + 1)
    fid = sp.csr_matrix((np.full(pl.P, omega), (pvar, pvar)), shape=(nvar, nvar))
    A = (A + fid).tocsc()
    rhs = np.zeros(nvar, dtype=complex)
    np.add.at(rhs, pvar, omega * h_pilot)

    # border cells untouched by any stencil or pilot carry no information;
    # drop them so the reduced system is positive definite
    active = A.diagonal() > 0
    A_red = A[active][:, active]
    rhs_red = rhs[active]

    if cfg.solver == "direct" or (cfg.solver == "auto" and nvar < 66 * 66):
        lu = spla.splu(A_red.tocsc())
        sol_red = lu.solve(rhs_red.real) + 1j * lu.solve(rhs_red.imag)
    else:
        sol_red = _cg_solve(A_red, rhs_red, nvar)

    sol = np.zeros(nvar, dtype=complex)
    sol[active] = sol_red
    h_ex = sol.reshape(M + 2, N + 2)
    h_tilde = h_ex[1:M + 1, 1:N + 1]
    residual = float(np.sum(np.abs(h_pilot - h_ex[pr + 1, pc + 1]) ** 2))
    return CMDEstimate(h_tilde=h_tilde.copy(), residual=residual, h_extended=h_ex)


def _cg_solve(A: sp.spmatrix, rhs: np.ndarray, nvar: int) -> np.ndarray:
    """Diagonally preconditioned CG on the real and imaginary parts."""
    diag = A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda v: v / diag)
    maxiter = 10 * nvar
    parts = []
    for part in (rhs.real, rhs.imag):
        sol, info = spla.cg(A, part, rtol=1e-8, atol=0.0, maxiter=maxiter, M=precond)
        if info != 0:
            res = np.linalg.norm(A @ sol - part) / max(np.linalg.norm(part), 1e-300)
            raise SolverError(
                f"conjugate gradient did not converge after {maxiter} iterations "
                f"(relative residual {res:.3e})"
            )
        parts.append(sol)
    return parts[0] + 1j * parts[1]


def estimate(h_pilot: np.ndarray, pl: PilotPlacement,
             cfg: EstimatorConfig) -> CMDEstimate:
    """Dispatch to the configured estimator variant."""
    if cfg.variant == "lmmse":
        return lmmse_estimate(h_pilot, pl, cfg)
    return srh_estimate(h_pilot, pl, cfg)
