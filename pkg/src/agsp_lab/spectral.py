"""Dense spectral machinery: exact diagonalization, truncation and projectors.

Everything here is the desk-scale oracle layer.  Operators are dense
Hermitian matrices wrapped in :class:`HermitianOperator`; decompositions are
cached on the wrapper so repeated queries (windows, projectors, truncations)
reuse one eigensolve.  Real-symmetric inputs take the float64 LAPACK path.

Spectral truncation replaces every eigenvalue above ``t`` by ``t`` while
keeping the eigenvectors: ``A_trunc = P A P + t (1 - P)`` with ``P`` the
projector onto eigenvalues <= t.  Truncating the two end blocks of a
segmented chain yields the bounded-norm operator ``H_t`` used by the
ground-space filters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .chain import SegmentedHamiltonian, embed_operator, hermiticity_deviation

DENSE_EIGH_LIMIT = 2**12
DEGENERACY_TOL = 1e-8


class SpectralError(ValueError):
    """Invalid operator, threshold or state handed to a spectral routine."""


class DegenerateGroundStateError(SpectralError):
    """Ground state is (numerically) degenerate; filter flows require uniqueness."""


class HermitianOperator:
    """Dense Hermitian operator with provenance tags and a cached eigensolve."""

    def __init__(self, entries, tags: tuple[str, ...] = ()):
        m = np.asarray(entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SpectralError(f"operator must be square, got {m.shape}")
        dev = hermiticity_deviation(m)
        if dev > 1e-12:
            raise SpectralError(f"operator not Hermitian (relative deviation {dev:.2e})")
        if np.iscomplexobj(m) and np.abs(m.imag).max() <= 1e-15 * max(np.abs(m).max(), 1.0):
            m = np.ascontiguousarray(m.real)
        m.setflags(write=False)
        self.entries = m
        self.tags = tuple(tags)
        self._decomposition: SpectralDecomposition | None = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.entries @ v

    def norm_bound(self) -> float:
        """Max |eigenvalue| (exact once decomposed, else a cheap upper bound)."""
        if self._decomposition is not None:
            w = self._decomposition.eigenvalues
            return float(max(abs(w[0]), abs(w[-1])))
        return float(np.linalg.norm(self.entries, np.inf))

    def decomposition(self, validate: bool | None = None) -> "SpectralDecomposition":
        if self._decomposition is None:
            self._decomposition = eigendecompose(self, validate=validate)
        return self._decomposition


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full eigensystem, eigenvalues ascending, eigenvectors in columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degenerate: bool
    residual_max: float | None = None

    @property
    def eps0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def eps1(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def gap(self) -> float:
        return self.eps1 - self.eps0

    @property
    def u(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def to_report(self) -> dict:
        return {
            "epsilon0": self.eps0,
            "epsilon1": self.eps1,
            "gap": self.gap,
            "u": self.u,
            "degenerate": bool(self.degenerate),
            "residual_max": self.residual_max,
        }


def eigendecompose(
    H: HermitianOperator,
    degeneracy_tol: float = DEGENERACY_TOL,
    validate: bool | None = None,
    dense_limit: int = DENSE_EIGH_LIMIT,
) -> SpectralDecomposition:
    """Full dense eigendecomposition with a near-degeneracy flag.

    The ground state is flagged degenerate when ``eps1 - eps0`` falls below
    ``degeneracy_tol * max|eigenvalue|``.  Residuals ``|Hv - lambda v|`` are
    verified when ``validate`` is set (default: only below dim 1025, where
    the extra matmul is cheap).
    """
    if H.dim > dense_limit:
        raise SpectralError(f"dim {H.dim} exceeds dense eigendecomposition limit {dense_limit}")
    w, v = np.linalg.eigh(H.entries)
    scale = max(abs(w[0]), abs(w[-1]), 1e-300)
    degenerate = bool(H.dim >= 2 and (w[1] - w[0]) < degeneracy_tol * scale)
    if validate is None:
        validate = H.dim <= 1024
    residual = None
    if validate:
        residual = float(np.linalg.norm(H.entries @ v - v * w, axis=0).max())
        if residual > 1e-9 * scale:
            raise SpectralError(f"eigensolver residual {residual:.2e} exceeds 1e-9 * |H|")
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v, degenerate=degenerate, residual_max=residual)


@dataclass(frozen=True)
class ExtremalSpectrum:
    """Window data (ground pair and top) from an iterative or dense solve."""

    eps0: float
    eps1: float
    u: float
    ground_state: np.ndarray
    degenerate: bool

    @property
    def gap(self) -> float:
        return self.eps1 - self.eps0


def extremal_spectrum(H: HermitianOperator, seed: int = 0, degeneracy_tol: float = DEGENERACY_TOL) -> ExtremalSpectrum:
    """(eps0, eps1, u) plus the ground vector; Lanczos above the dense-eigh limit."""
    if H._decomposition is not None or H.dim <= 512:
        dec = H.decomposition()
        return ExtremalSpectrum(dec.eps0, dec.eps1, dec.u, dec.ground_state, dec.degenerate)
    v0 = np.random.default_rng(seed).normal(size=H.dim)
    lo, vecs = spla.eigsh(H.entries, k=2, which="SA", v0=v0)
    order = np.argsort(lo)
    lo = lo[order]
    vecs = vecs[:, order]
    hi = spla.eigsh(H.entries, k=1, which="LA", v0=v0, return_eigenvectors=False)
    scale = max(abs(lo[0]), abs(float(hi[0])), 1e-300)
    degenerate = bool((lo[1] - lo[0]) < degeneracy_tol * scale)
    return ExtremalSpectrum(float(lo[0]), float(lo[1]), float(hi[0]), vecs[:, 0], degenerate)


def truncate_operator(H: HermitianOperator, t: float) -> HermitianOperator:
    """Cap eigenvalues at ``t`` keeping eigenvectors: min(lambda, t) spectrum."""
    if not np.isfinite(t):
        raise SpectralError(f"truncation threshold must be finite, got {t}")
    dec = H.decomposition()
    if dec.eigenvalues[-1] <= t:
        return HermitianOperator(H.entries, tags=H.tags + (f"trunc<={t:g}",))
    w = np.minimum(dec.eigenvalues, t)
    v = dec.eigenvectors
    out = (v * w) @ v.conj().T
    out = (out + out.conj().T) / 2.0
    return HermitianOperator(out, tags=H.tags + (f"trunc<={t:g}",))


def build_truncated_hamiltonian(seg: SegmentedHamiltonian, t: float, check: bool = False) -> HermitianOperator:
    """Assemble H_t: both end blocks (with their adjacent segment term folded
    in) spectrally truncated at ``t``, interior segment terms untouched.

    The left end is ``(H_L + H_1)`` on sites ``1..m+2``, the right end is
    ``(H_s + H_R)`` on sites ``m+s..n``.  For ``t >= 0`` the result obeys
    ``H_t <= H`` and ``|H_t| <= 2t + s``; ``check`` verifies both against
    the dense oracle.
    """
    if t < 0:
        raise SpectralError(f"truncation threshold must be >= 0, got {t}")
    n, d, m, s = seg.n, seg.d, seg.m, seg.s
    if s < 2:
        raise SpectralError("need at least two segment terms to fold the ends")

    left_sites = m + 2
    left = embed_operator(seg.h_left, 0, left_sites, d) + embed_operator(seg.terms[0], m, left_sites, d)
    left_t = truncate_operator(HermitianOperator(left), t).entries

    right_sites = n - m - s + 1
    right = embed_operator(seg.terms[s - 1], 0, right_sites, d) + embed_operator(seg.h_right, 1, right_sites, d)
    right_t = truncate_operator(HermitianOperator(right), t).entries

    dtype = np.result_type(left_t.dtype, right_t.dtype, *[x.dtype for x in seg.terms])
    out = np.zeros((seg.dim, seg.dim), dtype=dtype)
    out += embed_operator(left_t, 0, n, d)
    for i in range(1, s - 1):
        out += embed_operator(seg.terms[i], m + i, n, d)
    out += embed_operator(right_t, m + s - 1, n, d)
    ht = HermitianOperator(out, tags=(seg.label, f"H_t(t={t:g})"))

    if check:
        diff = HermitianOperator(seg.assemble_dense() - ht.entries)
        low = float(np.linalg.eigvalsh(diff.entries)[0])
        if low < -1e-9:
            raise SpectralError(f"H_t exceeds H: min eig of H - H_t = {low:.2e}")
        top = float(np.linalg.eigvalsh(ht.entries)[-1])
        if top > 2 * t + s + 1e-9:
            raise SpectralError(f"|H_t| = {top:.6g} exceeds 2t + s = {2 * t + s:.6g}")
    return ht


@dataclass(frozen=True)
class SpectralProjector:
    """Orthonormal basis of the eigenspaces with eigenvalue <= threshold.

    Eigenvalues within ``1e-10 * max(1, |H|)`` of the threshold count as
    inside (inclusive tie-breaking).
    """

    threshold: float
    basis: np.ndarray
    source: tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.conj().T @ v)

    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


def spectral_projector(H: HermitianOperator, t: float) -> SpectralProjector:
    """Projector onto the eigenspaces of ``H`` with eigenvalue <= t."""
    dec = H.decomposition()
    scale = max(abs(dec.eps0), abs(dec.u), 1.0)
    mask = dec.eigenvalues <= t + 1e-10 * scale
    return SpectralProjector(threshold=t, basis=dec.eigenvectors[:, mask], source=H.tags)


def tail_weight(P: SpectralProjector, state: np.ndarray) -> float:
    """|(1 - P) state| for a unit vector; 0 inside the range, 1 orthogonal to it."""
    state = np.asarray(state)
    nrm = np.linalg.norm(state)
    if abs(nrm - 1.0) > 1e-10:
        raise SpectralError(f"state must be normalized, got |state| = {nrm:.12g}")
    tail = state - P.apply(state)
    return float(min(np.linalg.norm(tail), 1.0))


def spectral_norm(M: np.ndarray) -> float:
    """Largest singular value; iterative for big matrices, exact below 1024."""
    if M.size == 0:
        return 0.0
    if min(M.shape) <= 1:
        return float(np.linalg.norm(M))
    if max(M.shape) <= 1024:
        return float(np.linalg.norm(M, 2))
    sv = spla.svds(M, k=1, return_singular_vectors=False, random_state=0)
    return float(sv[0])


def offdiag_mixing_norm(A: HermitianOperator, H_minus_A: HermitianOperator, t: float, u: float) -> float:
    """|(1 - P_t) A P_u| with both projectors taken for ``H - A``.

    Measures how strongly ``A`` couples the low (<= u) and high (> t)
    spectral subspaces of ``H - A``; requires ``t >= u``.
    """
    if t < u:
        raise SpectralError(f"need t >= u, got t={t}, u={u}")
    if A.dim != H_minus_A.dim:
        raise SpectralError("A and H - A must share a dimension")
    dec = H_minus_A.decomposition()
    scale = max(abs(dec.eps0), abs(dec.u), 1.0)
    hi = dec.eigenvalues > t + 1e-10 * scale
    lo = dec.eigenvalues <= u + 1e-10 * scale
    if not hi.any() or not lo.any():
        return 0.0
    a_eig = dec.eigenvectors.conj().T @ A.entries @ dec.eigenvectors
    return spectral_norm(a_eig[np.ix_(hi, lo)])


def markov_closeness_bound(delta: float, gap: float) -> float:
    """Distance-squared bound 2 delta / gap for a state with energy eps0 + delta."""
    if gap <= 0:
        raise SpectralError(f"need a positive gap, got {gap}")
    if delta < 0:
        raise SpectralError(f"need delta >= 0, got {delta}")
    return 2.0 * delta / gap


def end_coupling_split(seg: SegmentedHamiltonian) -> tuple[HermitianOperator, HermitianOperator]:
    """Split H = A + (H - A), A being segment terms 2 and s-1.

    ``A`` is the pair of bonds coupling the (folded) end blocks to the
    interior; ``H - A`` factorizes over three disjoint site ranges, so its
    eigenbasis is the natural frame for tail and mixing diagnostics.
    """
    if seg.s < 4:
        raise SpectralError(f"need s >= 4 for the end-coupling split, got s={seg.s}")
    n, d, m, s = seg.n, seg.d, seg.m, seg.s
    a = embed_operator(seg.terms[1], m + 1, n, d) + embed_operator(seg.terms[s - 2], m + s - 2, n, d)
    h = seg.assemble_dense()
    return (
        HermitianOperator(a, tags=(seg.label, "end-coupling A")),
        HermitianOperator(h - a, tags=(seg.label, "H minus A")),
    )


def aligned_distance_sq(a: np.ndarray, b: np.ndarray) -> float:
    """|a - b|^2 minimized over a global phase: 2 (1 - |<a|b>|) for unit vectors."""
    ov = abs(np.vdot(a, b))
    return float(max(0.0, 2.0 * (1.0 - min(ov, 1.0))))
