"""Truncated bosonic Fock-space algebra: modes, operators, states.

All operators live on a fixed tensor-product space described by a ModeSpace.
The basis ordering is row major: for modes (m0, m1, ...) with dims
(d0, d1, ...), the basis index of occupations (n0, n1, ...) is
n0*d1*d2*... + n1*d2*... + ..., i.e. the first mode is the most significant
factor (numpy kron convention).

Sparse matrices are kept in CSR form with sorted indices and explicit zeros
pruned, so repeated builds are bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-10
POSITIVITY_ATOL = 1e-8
TAIL_MASS = 1e-6


def _canonical(m: sp.spmatrix) -> sp.csr_matrix:
    out = sp.csr_matrix(m)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


@dataclass(frozen=True)
class ModeSpace:
    """Ordered collection of bosonic modes with Fock truncations."""

    modes: tuple[tuple[str, int], ...]

    def __init__(self, modes):
        modes = tuple((str(lbl), int(dim)) for lbl, dim in modes)
        labels = [lbl for lbl, _ in modes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate mode labels in {labels}")
        for lbl, dim in modes:
            if dim < 2:
                raise ValueError(f"mode {lbl!r}: dim must be >= 2, got {dim}")
        object.__setattr__(self, "modes", modes)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.modes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.modes)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown mode label {label!r}; have {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def basis_index(self, occupations) -> int:
        """Flat index of the product Fock state with the given occupations."""
        occs = tuple(int(n) for n in occupations)
        if len(occs) != len(self.modes):
            raise ValueError("occupation list length does not match mode count")
        idx = 0
        for (lbl, dim), n in zip(self.modes, occs):
            if not 0 <= n < dim:
                raise ValueError(f"occupation {n} outside truncation of mode {lbl!r} (dim {dim})")
            idx = idx * dim + n
        return idx


@dataclass
class Operator:
    """Sparse operator on a ModeSpace, optionally tagged Hermitian.

    With hermitian_hint=True, construction verifies max|A - A^dag| <= 1e-12.
    """

    space: ModeSpace
    matrix: sp.csr_matrix
    hermitian_hint: bool = False
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.matrix = _canonical(self.matrix.astype(complex))
        n = self.space.total_dim
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match total_dim {n}")
        if self.hermitian_hint:
            dev = self.matrix - self.matrix.conj().T
            err = np.abs(dev.data).max() if dev.nnz else 0.0
            if err > HERMITIAN_ATOL:
                raise ValueError(f"hermitian_hint set but max|A - A^dag| = {err:.2e}")

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, self.hermitian_hint)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    # minimal algebra; results never inherit the hermitian tag
    def __add__(self, other):
        return Operator(self.space, self.matrix + _mat(other, self.space))

    __radd__ = __add__

    def __sub__(self, other):
        return Operator(self.space, self.matrix - _mat(other, self.space))

    def __mul__(self, scalar):
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __matmul__(self, other):
        return Operator(self.space, self.matrix @ _mat(other, self.space))


def _mat(op, space: ModeSpace) -> sp.csr_matrix:
    if isinstance(op, Operator):
        if op.space is not space and op.space != space:
            raise ValueError("operators act on different spaces")
        return op.matrix
    return op


@dataclass
class FockState:
    """Product Fock state |n0, n1, ...> with per-mode occupations."""

    space: ModeSpace
    occupations: tuple[int, ...]

    def __post_init__(self):
        self.occupations = tuple(int(n) for n in self.occupations)
        self.space.basis_index(self.occupations)  # validates range

    def vector(self) -> np.ndarray:
        v = np.zeros(self.space.total_dim, dtype=complex)
        v[self.space.basis_index(self.occupations)] = 1.0
        return v


@dataclass
class DensityMatrix:
    """Dense density matrix with trace/Hermiticity/positivity validation."""

    space: ModeSpace
    matrix: np.ndarray
    validate: bool = True

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.space.total_dim
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match total_dim {n}")
        if self.validate:
            tr = np.trace(self.matrix)
            if abs(tr - 1.0) > TRACE_ATOL:
                raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.2e}")
            herm = np.abs(self.matrix - self.matrix.conj().T).max()
            if herm > TRACE_ATOL:
                raise ValueError(f"not Hermitian: max deviation {herm:.2e}")
            wmin = float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())
            if wmin < -POSITIVITY_ATOL:
                raise ValueError(f"negative eigenvalue {wmin:.2e}")

    def expect(self, op) -> complex:
        m = op.matrix if isinstance(op, Operator) else op
        return complex(np.sum(m.multiply(self.matrix.T)) if sp.issparse(m)
                       else np.trace(m @ self.matrix))

    def ptrace_population(self, label: str, n: int) -> float:
        """Population of Fock level n of one mode (diagonal partial trace)."""
        space = self.space
        k = space.index(label)
        diag = np.real(np.diag(self.matrix)).reshape(space.dims)
        return float(diag.sum(axis=tuple(i for i in range(len(space.dims)) if i != k))[n])


def destroy_matrix(dim: int) -> sp.csr_matrix:
    """Single-mode lowering operator, <n-1|a|n> = sqrt(n)."""
    return _canonical(sp.diags(np.sqrt(np.arange(1, dim)), 1, shape=(dim, dim), format="csr"))


def tensor_embed(op, space: ModeSpace, label: str) -> Operator:
    """Embed a single-mode operator into the full tensor space at `label`."""
    k = space.index(label)
    m = op.matrix if isinstance(op, Operator) else sp.csr_matrix(op)
    if m.shape != (space.dims[k], space.dims[k]):
        raise ValueError(f"operator dim {m.shape} does not match mode {label!r} dim {space.dims[k]}")
    out = None
    for i, d in enumerate(space.dims):
        f = m if i == k else sp.identity(d, dtype=complex, format="csr")
        out = f if out is None else sp.kron(out, f, format="csr")
    return Operator(space, out)


def annihilator(space: ModeSpace, label: str) -> Operator:
    """Lowering operator of one mode, embedded in the full space."""
    return tensor_embed(destroy_matrix(space.dim(label)), space, label)


def number_op(space: ModeSpace, label: str) -> Operator:
    # built directly so the integer spectrum is exact
    dim = space.dim(label)
    n = sp.diags(np.arange(dim, dtype=float), format="csr")
    return Operator(space, tensor_embed(n, space, label).matrix, hermitian_hint=True)


def identity(space: ModeSpace) -> Operator:
    return Operator(space, sp.identity(space.total_dim, dtype=complex, format="csr"),
                    hermitian_hint=True)


def thermal_dim(n_th: float, tail: float = TAIL_MASS) -> int:
    """Smallest truncation whose neglected thermal tail mass is < tail.

    For occupation n_th the Fock distribution is geometric with ratio
    q = n_th/(n_th+1); the mass beyond dim levels is q**dim.
    """
    if n_th <= 0:
        return 2
    q = n_th / (n_th + 1.0)
    return max(2, int(np.ceil(np.log(tail) / np.log(q))))


def coherent_dim(alpha: complex, tail: float = TAIL_MASS) -> int:
    """Smallest truncation with Poissonian tail mass < tail for amplitude alpha."""
    nbar = abs(alpha) ** 2
    if nbar == 0:
        return 2
    dim = max(2, int(np.ceil(nbar)))
    # Poisson tail by direct summation; nbar is O(1) in every use here
    while True:
        n = np.arange(dim)
        logp = n * np.log(nbar) - nbar - np.cumsum(np.concatenate([[0.0], np.log(np.arange(1, dim))]))
        if 1.0 - np.exp(logp).sum() < tail:
            return dim
        dim += 1


def thermal_weights(n_th: float, dim: int, tail: float = TAIL_MASS) -> np.ndarray:
    """Renormalized geometric weights zeta_n over a truncated ladder.

    Raises if the truncation drops more than `tail` probability mass.
    """
    if n_th < 0:
        raise ValueError("n_th must be >= 0")
    if n_th == 0:
        w = np.zeros(dim)
        w[0] = 1.0
        return w
    q = n_th / (n_th + 1.0)
    if q**dim > tail:
        raise ValueError(
            f"truncation dim={dim} keeps only {1 - q**dim:.8f} of the thermal "
            f"distribution for n_th={n_th}; need dim >= {thermal_dim(n_th, tail)}")
    w = (1 - q) * q ** np.arange(dim)
    return w / w.sum()


def thermal_state(space: ModeSpace, n_th) -> DensityMatrix:
    """Product thermal state; n_th is a scalar or a {label: n_th} mapping."""
    if not isinstance(n_th, dict):
        n_th = {lbl: n_th for lbl in space.labels}
    rho = None
    for lbl, dim in space.modes:
        w = thermal_weights(float(n_th.get(lbl, 0.0)), dim)
        block = np.diag(w.astype(complex))
        rho = block if rho is None else np.kron(rho, block)
    return DensityMatrix(space, rho)


def fock_density(state: FockState) -> DensityMatrix:
    v = state.vector()
    return DensityMatrix(state.space, np.outer(v, v.conj()))
