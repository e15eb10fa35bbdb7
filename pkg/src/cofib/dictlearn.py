"""Per-cluster dictionary learning: batch OMP sparse coding and K-SVD."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

DICT_MAGIC = b"COFD"
DICT_VERSION = 1


@dataclass(frozen=True)
class Dictionary:
    """R x M matrix of unit-norm atoms (columns)."""

    atoms: np.ndarray
    objective_history: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.atoms, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("atoms must be a 2-D (R, M) array")
        a.setflags(write=False)
        object.__setattr__(self, "atoms", a)

    @property
    def atom_dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def from_matrix(cls, matrix) -> Dictionary:
        """Build a dictionary by normalizing the columns of ``matrix``."""
        m = np.asarray(matrix, dtype=np.float64)
        norms = np.linalg.norm(m, axis=0)
        if np.any(norms == 0):
            raise ValueError("dictionary columns must be nonzero")
        return cls(m / norms)


def save_dictionary(d: Dictionary, path) -> None:
    header = DICT_MAGIC + struct.pack("<3i", DICT_VERSION, d.atom_dim, d.num_atoms)
    body = np.asarray(d.atoms, dtype="<f8").tobytes(order="F")
    with open(path, "wb") as f:
        f.write(header + body)


def load_dictionary(path) -> Dictionary:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 or data[:4] != DICT_MAGIC:
        raise ValueError(f"{path}: not a dictionary file")
    version, r, m = struct.unpack("<3i", data[4:16])
    if version != DICT_VERSION or r <= 0 or m <= 0:
        raise ValueError(f"{path}: unsupported header (version={version}, R={r}, M={m})")
    if len(data) != 16 + 8 * r * m:
        raise ValueError(f"{path}: expected {r * m} coefficients")
    atoms = np.frombuffer(data, dtype="<f8", offset=16).reshape((r, m), order="F")
    return Dictionary(atoms)


def _solve_normal(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(gram, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return (np.linalg.pinv(gram) @ rhs[..., None])[..., 0]


def omp_batch(d: Dictionary | np.ndarray, signals: np.ndarray, max_sparsity: int,
              residual_tol: float = 0.0) -> np.ndarray:
    """Orthogonal matching pursuit for each row of ``signals``; returns (N, M) codes."""
    D = d.atoms if isinstance(d, Dictionary) else np.asarray(d, dtype=np.float64)
    Y = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if Y.shape[1] != D.shape[0]:
        raise ValueError(f"signal length {Y.shape[1]} does not match atom dimension {D.shape[0]}")
    if not 0 <= max_sparsity <= D.shape[0]:
        raise ValueError(f"max_sparsity must lie in [0, {D.shape[0]}]")
    if residual_tol < 0:
        raise ValueError("residual_tol must be non-negative")
    N, M = len(Y), D.shape[1]
    codes = np.zeros((N, M))
    if max_sparsity == 0 or N == 0:
        return codes

    support = np.zeros((N, max_sparsity), dtype=np.int64)
    coef = np.zeros((N, 0))
    chosen = np.zeros((N, M), dtype=bool)
    active = np.ones(N, dtype=bool)
    count = np.zeros(N, dtype=np.int64)
    resid = Y.copy()
    floor = 1e-12 * np.linalg.norm(Y, axis=1)
    for k in range(max_sparsity):
        active &= np.linalg.norm(resid, axis=1) > residual_tol
        corr = resid @ D
        corr[chosen] = 0.0
        best = np.argmax(np.abs(corr), axis=1)
        active &= np.abs(corr[np.arange(N), best]) > floor
        if not active.any():
            break
        idx = np.flatnonzero(active)
        support[idx, k] = best[idx]
        chosen[idx, best[idx]] = True
        count[idx] = k + 1
        Ds = D[:, support[idx, :k + 1]].transpose(1, 0, 2)  # (n, R, k+1)
        gram = Ds.transpose(0, 2, 1) @ Ds
        rhs = np.einsum("nrk,nr->nk", Ds, Y[idx])
        new_coef = np.zeros((N, k + 1))
        new_coef[:, :k] = coef
        new_coef[idx] = _solve_normal(gram, rhs)
        coef = new_coef
        resid[idx] = Y[idx] - np.einsum("nrk,nk->nr", Ds, coef[idx])

    steps = coef.shape[1]
    used = np.arange(steps)[None, :] < count[:, None]
    rows = np.broadcast_to(np.arange(N)[:, None], used.shape)
    codes[rows[used], support[:, :steps][used]] = coef[used]
    return codes


def omp(d: Dictionary, signal, max_sparsity: int, residual_tol: float = 0.0) -> np.ndarray:
    """Sparse code of a single signal; see :func:`omp_batch`."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (d.atom_dim,):
        raise ValueError(f"signal length {signal.shape} does not match atom dimension {d.atom_dim}")
    return omp_batch(d, signal[None, :], max_sparsity, residual_tol)[0]


def _fix_sign(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nz = np.flatnonzero(np.abs(u) > 1e-15)
    if len(nz) and u[nz[0]] < 0:
        return -u, -v
    return u, v


def rank1_power(E: np.ndarray, start: np.ndarray, tol: float = 1e-10,
                max_steps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Leading left singular vector ``u`` of ``E`` and the row ``E.T @ u``.

    Power iteration on E E^T warm-started at ``start``.
    """
    C = E @ E.T
    u = start / np.linalg.norm(start)
    for _ in range(max_steps):
        w = C @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        w /= nw
        done = np.linalg.norm(w - u) < tol
        u = w
        if done:
            break
    return _fix_sign(u, E.T @ u)


def _errors(Y, D, A):
    R = Y - A @ D.T
    return (R * R).sum(1)


def ksvd_train(signals, num_atoms: int, sparsity: int = 4, iterations: int = 20,
               seed: int = 0) -> Dictionary:
    """Learn a dictionary for the rows of ``signals`` with K-SVD.

    Each iteration codes every signal with OMP (a signal keeps its previous
    code if OMP does worse), then refits atoms one at a time as the rank-1
    approximation of their restricted residual. Unused atoms are replaced by
    the worst-represented signal. The returned dictionary carries the total
    squared representation error after initialization and after each
    iteration in ``objective_history``.
    """
    Y = np.asarray(signals, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("signals must be a 2-D (N, R) array")
    N, R = Y.shape
    M = int(num_atoms)
    if M < 1 or N < M:
        raise ValueError(f"need at least {M} signals, got {N}")
    if sparsity < 1 or iterations < 1:
        raise ValueError("sparsity and iterations must be >= 1")
    sparsity = min(sparsity, R)

    nonzero = np.flatnonzero(np.linalg.norm(Y, axis=1) > 0)
    _, first = np.unique(Y[nonzero], axis=0, return_index=True)
    distinct = nonzero[np.sort(first)]
    if len(distinct) < M:
        raise ValueError(f"only {len(distinct)} distinct nonzero signals for {M} atoms")

    rng = np.random.default_rng(seed)
    pick = rng.choice(distinct, size=M, replace=False)
    D = Y[pick].T / np.linalg.norm(Y[pick], axis=1)
    A = omp_batch(D, Y, sparsity)
    history = [float(_errors(Y, D, A).sum())]

    for _ in range(iterations):
        trial = omp_batch(D, Y, sparsity)
        better = _errors(Y, D, trial) < _errors(Y, D, A)
        A[better] = trial[better]

        resid = Y - A @ D.T
        replaced = set()
        for j in range(M):
            users = np.flatnonzero(A[:, j])
            if len(users) == 0:
                err = (resid * resid).sum(1)
                err[list(replaced)] = -1.0
                worst = int(np.argmax(err))
                if err[worst] <= 0:
                    continue
                replaced.add(worst)
                D[:, j] = Y[worst] / np.linalg.norm(Y[worst])
                continue
            E = resid[users] + np.outer(A[users, j], D[:, j])  # (n, R)
            u, row = rank1_power(E.T, D[:, j])
            resid[users] = E - np.outer(row, u)
            D[:, j] = u
            A[users, j] = row
        history.append(float((resid * resid).sum()))

    return Dictionary(D, tuple(history))
