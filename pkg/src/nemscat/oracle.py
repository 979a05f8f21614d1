"""Brute-force Lindblad integration on a truncated two-mode Fock space.

The dispersive Hamiltonian is diagonal in the qubit's sigma_z basis and the
damping only touches the modes, so the four qubit sectors rho_{ss'} of the
joint density matrix evolve independently:

    d rho_{ss'}/dt = -i (H_s rho - rho H_s') + gamma_a D[a] rho + gamma_b D[b] rho,
    H_+- = +-(chi a^dag a + Omega b^dag b + kappa (a b^dag + a^dag b)).

Blocks are held as tensors ``rho[i, j, k, l]`` with row index (i, j) and
column index (k, l); mode ``a`` is the slower-varying factor of the product
basis. Integration is classic fixed-step RK4 with a step-doubling gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numba import njit
from scipy.special import factorial, gammainc

from .coherent import InitialAmplitudes
from .dissipative import DampingParams, damped_amplitudes_closed, decoherence_f, p_minus_dissipative
from .errors import CutoffError, DomainError, StepGateError
from .params import EffectiveModel

LEAKAGE_TOL = 1e-8
VECTOR_LEAKAGE_TOL = 1e-6
STEP_GATE_TOL = 1e-6
SECTORS = ("pp", "mm", "pm", "mp")
_SIGNS = {"pp": (1.0, 1.0), "mm": (-1.0, -1.0), "pm": (1.0, -1.0), "mp": (-1.0, 1.0)}


def truncation_leakage(amp: complex, n: int) -> float:
    """Population of a coherent state above Fock level n-1: P(Poisson(|amp|^2) >= n)."""
    mu = abs(amp) ** 2
    if mu == 0.0:
        return 0.0
    return float(gammainc(n, mu))


@dataclass(frozen=True)
class FockTruncation:
    n_a: int
    n_b: int

    def __post_init__(self):
        if self.n_a < 2 or self.n_b < 2:
            raise DomainError("Fock cutoffs must be >= 2")

    @property
    def dim(self) -> int:
        return self.n_a * self.n_b

    def check(self, max_amp: float, tol: float = LEAKAGE_TOL) -> None:
        for name, n in (("n_a", self.n_a), ("n_b", self.n_b)):
            leak = truncation_leakage(max_amp, n)
            if leak >= tol:
                raise CutoffError(
                    f"{name}={n} leaks {leak:.3g} of a coherent state with |amp|={max_amp:.4g} "
                    f"(tolerance {tol:g}); increase the cutoff"
                )

    @classmethod
    def for_amplitude(cls, max_amp: float, tol: float = LEAKAGE_TOL) -> "FockTruncation":
        n = 2
        while truncation_leakage(max_amp, n) >= tol:
            n += 1
        return cls(n, n)


@dataclass(frozen=True)
class ModeOperators:
    a: np.ndarray
    b: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    exchange: np.ndarray


def destroy(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def mode_operators(trunc: FockTruncation) -> ModeOperators:
    """Full-space a, b, a^dag a, b^dag b and a b^dag + a^dag b (a is the first tensor factor)."""
    a1, b1 = destroy(trunc.n_a), destroy(trunc.n_b)
    ia, ib = np.eye(trunc.n_a), np.eye(trunc.n_b)
    a = np.kron(a1, ib)
    b = np.kron(ia, b1)
    ad, bd = a.conj().T, b.conj().T
    return ModeOperators(a=a, b=b, n_a=ad @ a, n_b=bd @ b, exchange=a @ bd + ad @ b)


def coherent_vector(amp: complex, n: int) -> tuple[np.ndarray, float]:
    """Truncated, renormalized coherent state and its norm before renormalization."""
    leak = truncation_leakage(amp, n)
    if leak > VECTOR_LEAKAGE_TOL:
        raise CutoffError(f"cutoff {n} too small for |amp|={abs(amp):.4g} (leakage {leak:.3g})")
    k = np.arange(n)
    vec = np.exp(-0.5 * abs(amp) ** 2) * np.power(complex(amp), k) / np.sqrt(factorial(k))
    norm = float(np.linalg.norm(vec))
    return vec / norm, norm


def product_state(alpha: complex, beta: complex, trunc: FockTruncation) -> np.ndarray:
    va, _ = coherent_vector(alpha, trunc.n_a)
    vb, _ = coherent_vector(beta, trunc.n_b)
    return np.kron(va, vb)


@dataclass
class LindbladBlocks:
    """The four qubit-sector blocks as (dim, dim) matrices."""

    pp: np.ndarray
    mm: np.ndarray
    pm: np.ndarray
    mp: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {s: getattr(self, s) for s in SECTORS}


@njit(cache=True)
def _sector_rhs(rho, out, diag, kl, kr, w_ab, jump_a, jump_b):
    """out = L_sector(rho); one branch-free loop nest per term, fixed order."""
    na, nb = rho.shape[0], rho.shape[1]
    for i in range(na):
        for j in range(nb):
            for k in range(na):
                for l in range(nb):
                    out[i, j, k, l] = diag[i, j, k, l] * rho[i, j, k, l]
    if kl != 0:
        # a b^dag and a^dag b acting on the row index
        for i in range(na - 1):
            for j in range(1, nb):
                c = kl * w_ab[i, j - 1]
                for k in range(na):
                    for l in range(nb):
                        out[i, j, k, l] += c * rho[i + 1, j - 1, k, l]
        for i in range(1, na):
            for j in range(nb - 1):
                c = kl * w_ab[i - 1, j]
                for k in range(na):
                    for l in range(nb):
                        out[i, j, k, l] += c * rho[i - 1, j + 1, k, l]
        # and on the column index
        for i in range(na):
            for j in range(nb):
                for k in range(na - 1):
                    for l in range(1, nb):
                        out[i, j, k, l] += kr * w_ab[k, l - 1] * rho[i, j, k + 1, l - 1]
                for k in range(1, na):
                    for l in range(nb - 1):
                        out[i, j, k, l] += kr * w_ab[k - 1, l] * rho[i, j, k - 1, l + 1]
    for i in range(na - 1):
        for j in range(nb):
            for k in range(na - 1):
                c = jump_a[i, k]
                if c != 0:
                    for l in range(nb):
                        out[i, j, k, l] += c * rho[i + 1, j, k + 1, l]
    for i in range(na):
        for j in range(nb - 1):
            for k in range(na):
                for l in range(nb - 1):
                    out[i, j, k, l] += jump_b[j, l] * rho[i, j + 1, k, l + 1]


@njit(cache=True)
def _rk4_steps(rho, h, n, diag, kl, kr, w_ab, jump_a, jump_b):
    k1 = np.empty_like(rho)
    k2 = np.empty_like(rho)
    k3 = np.empty_like(rho)
    k4 = np.empty_like(rho)
    tmp = np.empty_like(rho)
    y = rho.copy()
    for _ in range(n):
        _sector_rhs(y, k1, diag, kl, kr, w_ab, jump_a, jump_b)
        tmp[:] = y + (0.5 * h) * k1
        _sector_rhs(tmp, k2, diag, kl, kr, w_ab, jump_a, jump_b)
        tmp[:] = y + (0.5 * h) * k2
        _sector_rhs(tmp, k3, diag, kl, kr, w_ab, jump_a, jump_b)
        tmp[:] = y + h * k3
        _sector_rhs(tmp, k4, diag, kl, kr, w_ab, jump_a, jump_b)
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


class _BlockGenerator:
    """Lindblad right-hand side for one qubit sector, acting on 4-index tensors.

    Every operator is a weighted index shift; the kernel accumulates the terms
    of each output element in a fixed order.
    """

    def __init__(self, model: EffectiveModel, damping: DampingParams, trunc: FockTruncation):
        ia = np.arange(trunc.n_a, dtype=float)
        ib = np.arange(trunc.n_b, dtype=float)
        h = model.chi * ia[:, None] + model.Omega * ib[None, :]
        loss = 0.5 * (damping.gamma_a * ia[:, None] + damping.gamma_b * ib[None, :])
        self.diag = {}
        for sec, (s, sp) in _SIGNS.items():
            self.diag[sec] = np.ascontiguousarray(
                -1j * (s * h[:, :, None, None] - sp * h[None, None, :, :])
                - loss[:, :, None, None]
                - loss[None, None, :, :]
            )
        self.kappa = model.kappa
        # <i, j| a b^dag |i+1, j-1> = sqrt(i+1) sqrt(j), stored at [i, j-1]
        self.w_ab = np.ascontiguousarray(np.sqrt(ia + 1)[:, None] * np.sqrt(ib + 1)[None, :])
        self.jump_a = damping.gamma_a * np.sqrt(ia + 1)[:, None] * np.sqrt(ia + 1)[None, :]
        self.jump_b = damping.gamma_b * np.sqrt(ib + 1)[:, None] * np.sqrt(ib + 1)[None, :]

    def _args(self, sector: str):
        s, sp = _SIGNS[sector]
        kl = complex(-1j * s * self.kappa)
        kr = complex(1j * sp * self.kappa)
        return self.diag[sector], kl, kr, self.w_ab, self.jump_a, self.jump_b

    def __call__(self, rho: np.ndarray, sector: str) -> np.ndarray:
        out = np.empty_like(rho)
        _sector_rhs(np.ascontiguousarray(rho), out, *self._args(sector))
        return out

    def rk4(self, rho: np.ndarray, sector: str, h: float, n: int) -> np.ndarray:
        return _rk4_steps(np.ascontiguousarray(rho), h, n, *self._args(sector))


def lindblad_rhs_dense(rho, sector: str, model: EffectiveModel, damping: DampingParams, ops: ModeOperators):
    """Dense-matrix form of the sector generator; reference for the tensor path."""
    s, sp = _SIGNS[sector]
    H = model.chi * ops.n_a + model.Omega * ops.n_b + model.kappa * ops.exchange
    out = -1j * (s * H @ rho - sp * rho @ H)
    for gamma, c in ((damping.gamma_a, ops.a), (damping.gamma_b, ops.b)):
        cd = c.conj().T
        out = out + gamma * (c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c))
    return out


def _advance(gen, tensors: dict, span: float, dt: float) -> dict:
    if span <= 0.0:
        return dict(tensors)
    n = max(1, math.ceil(span / dt - 1e-12))
    h = span / n
    return {sec: gen.rk4(tensors[sec], sec, h, n) for sec in SECTORS}


def evolve_blocks(
    init: InitialAmplitudes,
    model: EffectiveModel,
    damping: DampingParams,
    trunc: FockTruncation,
    t_grid,
    dt: float,
    gate_tol: float = STEP_GATE_TOL,
) -> Iterator[tuple[float, LindbladBlocks]]:
    """Yield (t, blocks) at every grid time, starting from the pure product state.

    Before integrating, the first grid interval is run with ``dt`` and ``dt/2``;
    if the blocks differ by more than ``gate_tol`` a StepGateError is raised.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be non-negative and strictly increasing")
    if not dt > 0:
        raise DomainError("dt must be positive")
    trunc.check(math.sqrt(init.energy))
    gen = _BlockGenerator(model, damping, trunc)
    psi0 = product_state(init.alpha0, init.beta0, trunc)
    proj = np.outer(psi0, psi0.conj()).reshape(trunc.n_a, trunc.n_b, trunc.n_a, trunc.n_b)
    tensors = {sec: proj.copy() for sec in SECTORS}

    start = _advance(gen, tensors, float(t_grid[0]), dt)
    probe_end = float(t_grid[1]) if t_grid.size > 1 else float(t_grid[0]) + dt
    span = probe_end - float(t_grid[0])
    coarse = _advance(gen, start, span, dt)
    fine = _advance(gen, start, span, dt / 2)
    err = max(float(np.max(np.abs(coarse[s] - fine[s]))) for s in SECTORS)
    if err > gate_tol:
        suggested = 0.8 * dt * (gate_tol / err) ** 0.25 / 2
        raise StepGateError(
            f"step-doubling gate failed: halving dt={dt:g} changed blocks by {err:.3g} > {gate_tol:g}; "
            f"try dt <= {suggested:.3g}",
            suggested_dt=suggested,
        )

    def to_blocks(tens):
        d = trunc.dim
        return LindbladBlocks(**{s: tens[s].reshape(d, d) for s in SECTORS})

    current = start
    t_prev = float(t_grid[0])
    yield t_prev, to_blocks(current)
    for t in t_grid[1:]:
        current = _advance(gen, current, float(t) - t_prev, dt)
        t_prev = float(t)
        yield t_prev, to_blocks(current)


def extract_f(blocks: LindbladBlocks, psi_minus: np.ndarray, psi_plus: np.ndarray) -> complex:
    """<psi_-| rho_{-+} |psi_+> with unit-normalized predicted coherent kets."""
    return complex(psi_minus.conj() @ blocks.mp @ psi_plus)


def p_minus_numeric(blocks: LindbladBlocks) -> float:
    return 0.5 * (1.0 + float(np.real(np.trace(blocks.mp))))


@dataclass
class OracleReport:
    t: np.ndarray
    f_numeric: np.ndarray
    p_minus_numeric: np.ndarray
    ansatz_fidelity_pp: np.ndarray
    ansatz_fidelity_mm: np.ndarray
    f_closed: np.ndarray
    p_minus_closed: np.ndarray
    trace_drift: float
    hermiticity_drift: float
    adjoint_drift: float
    min_eigenvalue: float

    @property
    def abs_err_f(self) -> np.ndarray:
        return np.abs(self.f_numeric - self.f_closed)


def run_oracle(
    init: InitialAmplitudes,
    model: EffectiveModel,
    damping: DampingParams,
    trunc: FockTruncation,
    t_grid,
    dt: float,
    eig_every: int = 10,
) -> OracleReport:
    """Integrate the blocks and compare them against the coherent-state ansatz."""
    t_grid = np.asarray(t_grid, dtype=float)
    am, bm = damped_amplitudes_closed(init, model, damping, t_grid, "minus")
    ap, bp = damped_amplitudes_closed(init, model, damping, t_grid, "plus")
    f_closed = decoherence_f(t_grid, init, model, damping).f
    pm_closed = p_minus_dissipative(t_grid, init, model, damping)

    n = t_grid.size
    f_num = np.empty(n, dtype=complex)
    p_num = np.empty(n)
    fid_pp = np.empty(n)
    fid_mm = np.empty(n)
    trace_drift = herm_drift = adj_drift = 0.0
    min_eig = math.inf
    for k, (_, blk) in enumerate(evolve_blocks(init, model, damping, trunc, t_grid, dt)):
        psi_p = product_state(ap[k], bp[k], trunc)
        psi_m = product_state(am[k], bm[k], trunc)
        # the qubit-coherence decay factor multiplies only the off-diagonal block
        decay = math.exp(-damping.gamma_qubit * t_grid[k])
        f_num[k] = decay * extract_f(blk, psi_m, psi_p)
        p_num[k] = 0.5 * (1.0 + decay * (2 * p_minus_numeric(blk) - 1.0))
        fid_pp[k] = float(np.real(psi_p.conj() @ blk.pp @ psi_p))
        fid_mm[k] = float(np.real(psi_m.conj() @ blk.mm @ psi_m))
        for diag in (blk.pp, blk.mm):
            trace_drift = max(trace_drift, abs(np.trace(diag) - 1.0))
            herm_drift = max(herm_drift, float(np.max(np.abs(diag - diag.conj().T))))
        adj_drift = max(adj_drift, float(np.max(np.abs(blk.mp - blk.pm.conj().T))))
        if k % eig_every == 0 or k == n - 1:
            for diag in (blk.pp, blk.mm):
                hermitian = 0.5 * (diag + diag.conj().T)
                min_eig = min(min_eig, float(np.linalg.eigvalsh(hermitian)[0]))
    return OracleReport(
        t=t_grid,
        f_numeric=f_num,
        p_minus_numeric=p_num,
        ansatz_fidelity_pp=fid_pp,
        ansatz_fidelity_mm=fid_mm,
        f_closed=f_closed,
        p_minus_closed=pm_closed,
        trace_drift=float(trace_drift),
        hermiticity_drift=herm_drift,
        adjoint_drift=adj_drift,
        min_eigenvalue=min_eig,
    )
