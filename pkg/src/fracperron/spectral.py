r"""Spectral classification against the fractional stability sectors.

For an order :math:`0 < \alpha \le 1` the complex plane minus the origin
splits into the *unstable* sector :math:`|\arg\lambda| < \alpha\pi/2` and the
*stable* sector :math:`|\arg\lambda| > \alpha\pi/2`. A matrix is hyperbolic
when no eigenvalue is zero or sits on one of the two boundary rays.

:func:`analyze` brings ``A`` to block-diagonal Jordan form
``T^{-1} A T = diag(A_1, ..., A_n)`` over the complex numbers (real inputs
are embedded) and orders the blocks stable first, then unstable, then the
non-hyperbolic leftovers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import orth

from . import _json
from .errors import DefectiveMatrixError, IllConditionedError, NotHyperbolicError

ANG_TOL = 1e-9
MAG_RTOL = 1e-12
COND_MAX = 1e7
RANK_RTOL = 1e-10
CLUSTER_RTOL = 1e-6


class SectorClass(str, enum.Enum):
    UNSTABLE = "Unstable"
    STABLE = "Stable"
    BOUNDARY_PLUS = "BoundaryPlus"
    BOUNDARY_MINUS = "BoundaryMinus"
    ZERO = "Zero"

    @property
    def hyperbolic(self) -> bool:
        return self in (SectorClass.UNSTABLE, SectorClass.STABLE)


_ORDER = {
    SectorClass.STABLE: 0,
    SectorClass.UNSTABLE: 1,
    SectorClass.BOUNDARY_MINUS: 2,
    SectorClass.BOUNDARY_PLUS: 2,
    SectorClass.ZERO: 3,
}


def classify_eigenvalue(alpha: float, lam: complex, ang_tol: float = ANG_TOL, mag_tol: float = MAG_RTOL) -> SectorClass:
    """Sector of ``lam`` for order ``alpha``; zero wins over the boundary rays."""
    lam = complex(lam)
    if abs(lam) <= mag_tol:
        return SectorClass.ZERO
    arg = math.atan2(lam.imag, lam.real)
    edge = alpha * math.pi / 2
    if abs(arg - edge) <= ang_tol:
        return SectorClass.BOUNDARY_PLUS
    if abs(arg + edge) <= ang_tol:
        return SectorClass.BOUNDARY_MINUS
    return SectorClass.UNSTABLE if abs(arg) < edge else SectorClass.STABLE


def exponential_rate(alpha: float, lam: complex) -> float:
    r"""Growth rate :math:`\rho = |\lambda|^{1/\alpha}\cos(\arg\lambda/\alpha)` of :math:`E_\alpha(\lambda t^\alpha)`."""
    lam = complex(lam)
    return abs(lam) ** (1 / alpha) * math.cos(math.atan2(lam.imag, lam.real) / alpha)


# {{{ Jordan decomposition


@dataclass(frozen=True, eq=False)
class JordanDecomposition:
    T: np.ndarray
    T_inv: np.ndarray
    blocks: tuple  # of (eigenvalue, size)
    condition_number: float

    def slices(self):
        out, start = [], 0
        for _, size in self.blocks:
            out.append(slice(start, start + size))
            start += size
        return out

    def jordan_matrix(self) -> np.ndarray:
        d = sum(size for _, size in self.blocks)
        B = np.zeros((d, d), dtype=complex)
        for (lam, size), sl in zip(self.blocks, self.slices()):
            i = np.arange(sl.start, sl.stop)
            B[i, i] = lam
            B[i[:-1], i[1:]] = 1.0
        return B

    def permuted(self, order) -> "JordanDecomposition":
        cols = np.concatenate([np.arange(s.start, s.stop) for s in (self.slices()[i] for i in order)])
        return JordanDecomposition(
            self.T[:, cols], self.T_inv[cols, :], tuple(self.blocks[i] for i in order), self.condition_number
        )


def _read_jordan_form(A):
    """Blocks of ``A`` if it is already an upper bidiagonal Jordan matrix, else None."""
    d = A.shape[0]
    off = A - np.diag(np.diag(A)) - np.diag(np.diag(A, 1), 1)
    if np.any(off != 0):
        return None
    sup = np.diag(A, 1)
    if np.any((sup != 0) & (sup != 1)):
        return None
    diag = np.diag(A)
    blocks, start = [], 0
    for i in range(d):
        if i == d - 1 or sup[i] == 0:
            lam = diag[start]
            if np.any(diag[start : i + 1] != lam):
                return None
            blocks.append((complex(lam), i + 1 - start))
            start = i + 1
    return blocks


def _null(M, tol):
    # absolute threshold: a nilpotent power is numerically zero, so a relative cut-off would see full rank
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def _chains_from_blocks(A, blocks):
    d = A.shape[0]
    if sum(m for _, m in blocks) != d:
        raise DefectiveMatrixError(f"supplied Jordan block sizes sum to {sum(m for _, m in blocks)}, expected {d}")
    scale = max(1.0, np.linalg.norm(A, 2))
    cols = [None] * len(blocks)
    groups: dict[int, list[int]] = {}
    reps: list[complex] = []
    for i, (lam, _) in enumerate(blocks):
        for g, rep in enumerate(reps):
            if abs(lam - rep) <= 1e-12 * scale:
                groups[g].append(i)
                break
        else:
            reps.append(lam)
            groups[len(reps) - 1] = [i]
    eye = np.eye(d, dtype=complex)
    for g, members in groups.items():
        N = A - reps[g] * eye
        chosen = np.zeros((d, 0), dtype=complex)
        for i in sorted(members, key=lambda i: -blocks[i][1]):
            m = blocks[i][1]
            Nm = np.linalg.matrix_power(N, m)
            Km = _null(Nm, 1e-9 * scale**m)
            avoid = chosen
            if m > 1:
                avoid = np.hstack([avoid, _null(np.linalg.matrix_power(N, m - 1), 1e-9 * scale ** (m - 1))])
            P = Km
            if avoid.shape[1]:
                Q = orth(avoid)
                P = Km - Q @ (Q.conj().T @ Km)
            if Km.shape[1] == 0:
                raise DefectiveMatrixError(f"no Jordan chain of length {m} for eigenvalue {reps[g]}")
            _, s, vh = np.linalg.svd(P)
            if s.size == 0 or s[0] < 1e-8:
                raise DefectiveMatrixError(f"supplied Jordan structure inconsistent at eigenvalue {reps[g]}")
            v = Km @ vh[0].conj()
            chain = [v]
            for _ in range(m - 1):
                chain.append(N @ chain[-1])
            chain = np.column_stack(chain[::-1])
            chain /= np.linalg.norm(chain[:, 0])
            cols[i] = chain
            chosen = np.hstack([chosen, chain])
    return np.hstack(cols)


def jordan_decomposition(A, jordan_blocks=None, cond_max: float = COND_MAX) -> JordanDecomposition:
    """Complex Jordan data ``(T, T^{-1}, blocks)`` of a square matrix.

    ``jordan_blocks`` (a list of ``(eigenvalue, size)``) declares the exact
    structure of a defective matrix; without it a defective matrix raises
    :class:`DefectiveMatrixError`, and an ill-conditioned eigenbasis raises
    :class:`IllConditionedError`.
    """
    A = np.asarray(A, dtype=complex)
    d = A.shape[0]
    if A.ndim != 2 or A.shape[1] != d:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")

    read = _read_jordan_form(A)
    if read is not None:
        eye = np.eye(d, dtype=complex)
        return JordanDecomposition(eye, eye.copy(), tuple(read), 1.0)

    if jordan_blocks is not None:
        blocks = [(complex(lam), int(m)) for lam, m in jordan_blocks]
        T = _chains_from_blocks(A, blocks)
        cond = float(np.linalg.cond(T))
        if cond > cond_max:
            raise IllConditionedError(f"Jordan basis condition number {cond:.3g} exceeds {cond_max:.3g}")
        T_inv = np.linalg.inv(T)
        jd = JordanDecomposition(T, T_inv, tuple(blocks), cond)
        resid = np.linalg.norm(T @ jd.jordan_matrix() @ T_inv - A, 2)
        if resid > 1e-8 * max(1.0, np.linalg.norm(A, 2)):
            raise DefectiveMatrixError(f"supplied Jordan structure does not reproduce the matrix (residual {resid:.3g})")
        return jd

    w, V = np.linalg.eig(A)
    normA = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    # rank drops of A - lambda I inside eigenvalue clusters reveal defectiveness
    visited = np.zeros(d, dtype=bool)
    for i in range(d):
        if visited[i]:
            continue
        cluster = np.flatnonzero(np.abs(w - w[i]) <= CLUSTER_RTOL * max(1.0, normA))
        visited[cluster] = True
        if cluster.size > 1:
            lam = w[cluster].mean()
            s = np.linalg.svd(A - lam * np.eye(d), compute_uv=False)
            geometric = int(np.sum(s <= d * normA * RANK_RTOL))
            if geometric < cluster.size:
                raise DefectiveMatrixError(
                    f"eigenvalue {lam:.6g} has algebraic multiplicity {cluster.size} but only "
                    f"{geometric} eigenvector(s); supply the block structure (jordan_blocks)"
                )
    cond = float(np.linalg.cond(V))
    if not math.isfinite(cond) or cond > cond_max:
        raise IllConditionedError(
            f"eigenvector condition number {cond:.3g} exceeds {cond_max:.3g}; supply the block structure (jordan_blocks)"
        )
    return JordanDecomposition(V, np.linalg.inv(V), tuple((complex(x), 1) for x in w), cond)


# }}}


@dataclass(frozen=True)
class Eigenvalue:
    value: complex
    multiplicity: int
    sector: SectorClass


@dataclass(frozen=True)
class Block:
    eigenvalue: complex
    size: int
    sector: SectorClass

    @property
    def nilpotent(self) -> bool:
        """True when the block carries a nilpotent part (size > 1)."""
        return self.size > 1


@dataclass(eq=False)
class SpectralReport:
    """Eigen-structure of ``A`` relative to the sectors of order ``alpha``."""

    alpha: float
    eigenvalues: list[Eigenvalue]
    blocks: list[Block]
    T: np.ndarray
    T_inv: np.ndarray
    hyperbolic: bool
    condition_number: float
    is_real: bool = False
    tolerances: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return sum(b.size for b in self.blocks)

    def block_slices(self):
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.size))
            start += b.size
        return out

    def indices(self, sector: SectorClass) -> np.ndarray:
        return np.concatenate(
            [np.arange(s.start, s.stop) for b, s in zip(self.blocks, self.block_slices()) if b.sector is sector]
            or [np.zeros(0, dtype=int)]
        ).astype(int)

    @property
    def stable_indices(self) -> np.ndarray:
        return self.indices(SectorClass.STABLE)

    @property
    def unstable_indices(self) -> np.ndarray:
        return self.indices(SectorClass.UNSTABLE)

    def jordan_matrix(self) -> np.ndarray:
        B = np.zeros((self.dim, self.dim), dtype=complex)
        for b, sl in zip(self.blocks, self.block_slices()):
            i = np.arange(sl.start, sl.stop)
            B[i, i] = b.eigenvalue
            B[i[:-1], i[1:]] = 1.0
        return B

    def reconstruct(self) -> np.ndarray:
        A = self.T @ self.jordan_matrix() @ self.T_inv
        return A.real if self.is_real else A

    @property
    def offending(self) -> list[Eigenvalue]:
        return [e for e in self.eigenvalues if not e.sector.hyperbolic]

    @property
    def verdict(self) -> str:
        if self.hyperbolic:
            return "bounded solution exists for every bounded continuous forcing"
        return "some bounded continuous forcing admits no bounded solution"

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "eigenvalues": [
                {"value": _json.encode_complex(e.value), "multiplicity": e.multiplicity, "class": e.sector.value}
                for e in self.eigenvalues
            ],
            "blocks": [
                {
                    "eigenvalue": _json.encode_complex(b.eigenvalue),
                    "size": b.size,
                    "nilpotent": b.nilpotent,
                    "class": b.sector.value,
                }
                for b in self.blocks
            ],
            "transform": {"T": _json.encode_matrix(self.T), "T_inv": _json.encode_matrix(self.T_inv)},
            "hyperbolic": self.hyperbolic,
            "condition_number": self.condition_number,
            "is_real": self.is_real,
            "tolerances": dict(self.tolerances),
            "perron_verdict": self.verdict,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralReport":
        return cls(
            alpha=float(d["alpha"]),
            eigenvalues=[
                Eigenvalue(_json.decode_complex(e["value"]), int(e["multiplicity"]), SectorClass(e["class"]))
                for e in d["eigenvalues"]
            ],
            blocks=[
                Block(_json.decode_complex(b["eigenvalue"]), int(b["size"]), SectorClass(b["class"]))
                for b in d["blocks"]
            ],
            T=_json.decode_matrix(d["transform"]["T"]),
            T_inv=_json.decode_matrix(d["transform"]["T_inv"]),
            hyperbolic=bool(d["hyperbolic"]),
            condition_number=float(d["condition_number"]),
            is_real=bool(d.get("is_real", False)),
            tolerances=dict(d.get("tolerances", {})),
        )

    def __eq__(self, other):
        if not isinstance(other, SpectralReport):
            return NotImplemented
        return (
            self.alpha == other.alpha
            and self.eigenvalues == other.eigenvalues
            and self.blocks == other.blocks
            and np.array_equal(self.T, other.T)
            and np.array_equal(self.T_inv, other.T_inv)
            and self.hyperbolic == other.hyperbolic
            and self.condition_number == other.condition_number
            and self.is_real == other.is_real
            and self.tolerances == other.tolerances
        )


def analyze(
    A,
    alpha: float,
    ang_tol: float = ANG_TOL,
    mag_tol: float | None = None,
    jordan_blocks=None,
    cond_max: float = COND_MAX,
) -> SpectralReport:
    """Spectrum, sector labels, Jordan transform and hyperbolicity verdict of ``A``."""
    A_in = np.asarray(A)
    is_real = not np.iscomplexobj(A_in) or bool(np.all(np.imag(A_in) == 0))
    A = A_in.astype(complex)
    if mag_tol is None:
        mag_tol = MAG_RTOL * max(np.linalg.norm(A, 2), 1.0) if A.size else MAG_RTOL
    jd = jordan_decomposition(A, jordan_blocks=jordan_blocks, cond_max=cond_max)
    sectors = [classify_eigenvalue(alpha, lam, ang_tol, mag_tol) for lam, _ in jd.blocks]
    order = sorted(
        range(len(jd.blocks)),
        key=lambda i: (_ORDER[sectors[i]], jd.blocks[i][0].real, jd.blocks[i][0].imag, i),
    )
    jd = jd.permuted(order)
    sectors = [sectors[i] for i in order]
    blocks = [Block(lam, size, sec) for (lam, size), sec in zip(jd.blocks, sectors)]

    eigs: list[Eigenvalue] = []
    scale = max(1.0, np.linalg.norm(A, 2))
    for b in blocks:
        for i, e in enumerate(eigs):
            if e.sector is b.sector and abs(e.value - b.eigenvalue) <= CLUSTER_RTOL * scale:
                eigs[i] = Eigenvalue(e.value, e.multiplicity + b.size, e.sector)
                break
        else:
            eigs.append(Eigenvalue(b.eigenvalue, b.size, b.sector))

    return SpectralReport(
        alpha=float(alpha),
        eigenvalues=eigs,
        blocks=blocks,
        T=jd.T,
        T_inv=jd.T_inv,
        hyperbolic=all(b.sector.hyperbolic for b in blocks),
        condition_number=jd.condition_number,
        is_real=is_real,
        tolerances={"ang_tol": ang_tol, "mag_tol": float(mag_tol)},
    )


@dataclass(frozen=True)
class SplitSystem:
    """Forcing in Jordan coordinates plus the stable/unstable coordinate ranges."""

    g: list
    stable: np.ndarray
    unstable: np.ndarray


def split_system(report: SpectralReport, forcing) -> SplitSystem:
    """Transformed forcing ``g = T^{-1} f`` for a hyperbolic report."""
    from .forcing import linear_image

    if not report.hyperbolic:
        bad = ", ".join(f"{e.value:.6g} ({e.sector.value})" for e in report.offending)
        raise NotHyperbolicError(f"spectrum is not hyperbolic: {bad}")
    if len(forcing) != report.dim:
        raise ValueError(f"forcing has {len(forcing)} components, expected {report.dim}")
    return SplitSystem(linear_image(report.T_inv, forcing), report.stable_indices, report.unstable_indices)
