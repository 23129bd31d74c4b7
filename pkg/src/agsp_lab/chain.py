"""Nearest-neighbor spin chains: model builders, dense assembly and segmentation.

A chain of ``n`` spins of local dimension ``d`` is specified by ``n - 1``
Hermitian bond matrices, term ``i`` acting on sites ``(i, i+1)`` (1-based).
All shipped models are normalized at construction so every bond term
satisfies ``0 <= H_i <= 1``; the affine constants are recorded so physical
energies stay recoverable.

A :class:`SegmentedHamiltonian` splits the sum around a distinguished cut:
a dense left block ``H_L`` (bonds ``1..m``), ``s`` explicit segment terms
``H_1..H_s`` (bonds ``m+1..m+s``) and a dense right block ``H_R``
(bonds ``m+s+1..n-1``).  The middle cut ``s/2`` separates sites
``m + s/2`` and ``m + s/2 + 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

DENSE_LIMIT = 2**14

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

MODEL_NAMES = ("tfim", "heisenberg", "random_bond")

_MODEL_PARAMS = {
    "tfim": {"J": 1.0, "h": 1.0},
    "heisenberg": {"J": 1.0, "jz": None},  # jz defaults to J (isotropic)
    "random_bond": {"scale": 1.0},
}


class ChainError(ValueError):
    """Invalid chain construction or segmentation request."""


def _as_square(mat) -> np.ndarray:
    m = np.asarray(mat)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ChainError(f"bond term must be square, got shape {m.shape}")
    return m


def _realify(m: np.ndarray) -> np.ndarray:
    """Drop a negligible imaginary part so real models stay in float64."""
    if np.iscomplexobj(m):
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m.imag).max() <= 1e-15 * scale:
            return np.ascontiguousarray(m.real)
    return m


def hermiticity_deviation(m: np.ndarray) -> float:
    """Max-entry deviation from Hermiticity, relative to the max entry."""
    scale = max(np.abs(m).max(), 1.0)
    return float(np.abs(m - m.conj().T).max() / scale)


def embed_operator(op: np.ndarray, start: int, n: int, d: int) -> np.ndarray:
    """Embed ``op`` acting on sites ``start..start+w-1`` (0-based) into d^n.

    Kron ordering puts site 0 on the slowest index, matching
    ``vec.reshape((d,) * n)``.
    """
    op = np.asarray(op)
    w = round(np.log(op.shape[0]) / np.log(d))
    if d**w != op.shape[0]:
        raise ChainError(f"operator dim {op.shape[0]} is not a power of d={d}")
    if start < 0 or start + w > n:
        raise ChainError(f"operator on sites {start}..{start + w - 1} outside chain of {n}")
    left = d**start
    right = d ** (n - start - w)
    out = op
    if left > 1:
        out = np.kron(np.eye(left, dtype=out.dtype), out)
    if right > 1:
        out = np.kron(out, np.eye(right, dtype=out.dtype))
    return out


@dataclass(frozen=True)
class ShiftRecord:
    """Affine normalization bookkeeping: ``H_phys = scale * H_norm + sum(offsets)``."""

    scale: float = 1.0
    offsets: tuple[float, ...] = ()

    @property
    def total_offset(self) -> float:
        return float(sum(self.offsets))

    def physical_energy(self, normalized_energy: float) -> float:
        return self.scale * normalized_energy + self.total_offset

    def to_dict(self) -> dict:
        return {"scale": self.scale, "offsets": list(self.offsets)}

    @classmethod
    def from_dict(cls, d: dict) -> "ShiftRecord":
        return cls(scale=float(d["scale"]), offsets=tuple(float(x) for x in d["offsets"]))


@dataclass(frozen=True)
class ChainSpec:
    """A 1D nearest-neighbor Hamiltonian: n sites, one bond term per link.

    Terms are stored as ``d^2 x d^2`` matrices; term ``i`` (0-based index
    ``i`` in ``terms``) acts on sites ``(i, i+1)``.  Construction checks
    shapes and Hermiticity; the ``0 <= H_i <= 1`` window is reported by
    :func:`validate_terms` and guaranteed for chains produced by
    :func:`build_standard_model`.
    """

    n: int
    d: int
    terms: tuple[np.ndarray, ...]
    label: str = "custom"
    params: dict = field(default_factory=dict)
    seed: int = 0
    shift: ShiftRecord = field(default_factory=ShiftRecord)

    def __post_init__(self):
        if self.n < 2:
            raise ChainError(f"need n >= 2 sites, got {self.n}")
        if self.d < 2:
            raise ChainError(f"need local dimension d >= 2, got {self.d}")
        if len(self.terms) != self.n - 1:
            raise ChainError(f"expected {self.n - 1} bond terms, got {len(self.terms)}")
        terms = []
        for i, t in enumerate(self.terms):
            t = _as_square(t)
            if t.shape[0] != self.d**2:
                raise ChainError(f"term {i} has dim {t.shape[0]}, expected {self.d**2}")
            if hermiticity_deviation(t) > 1e-12:
                raise ChainError(f"term {i} is not Hermitian (deviation {hermiticity_deviation(t):.2e})")
            t = _realify(t)
            t.setflags(write=False)
            terms.append(t)
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def dim(self) -> int:
        return self.d**self.n


def _default_params(name: str, params: dict | None) -> dict:
    defaults = dict(_MODEL_PARAMS[name])
    given = dict(params or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ChainError(f"unknown parameter(s) {sorted(unknown)} for model '{name}'")
    defaults.update(given)
    for k, v in defaults.items():
        if v is not None and not np.isfinite(v):
            raise ChainError(f"parameter '{k}' is not finite: {v}")
    return defaults


def _normalize_terms(raw_terms: list[np.ndarray]) -> tuple[list[np.ndarray], ShiftRecord]:
    """Shift each term by its lowest eigenvalue, rescale all by a common factor."""
    mins, maxs = [], []
    for t in raw_terms:
        w = np.linalg.eigvalsh(t)
        mins.append(w[0])
        maxs.append(w[-1])
    spans = [hi - lo for lo, hi in zip(mins, maxs)]
    scale = max(max(spans), 0.0)
    if scale <= 1e-14:
        scale = 1.0
    normalized = [(t - lo * np.eye(t.shape[0])) / scale for t, lo in zip(raw_terms, mins)]
    return normalized, ShiftRecord(scale=scale, offsets=tuple(float(lo) for lo in mins))


def _tfim_terms(n: int, J: float, h: float) -> list[np.ndarray]:
    """H = -J sum Z_i Z_{i+1} - h sum X_i, fields split across adjacent bonds."""
    terms = []
    eye = np.eye(2)
    for i in range(n - 1):
        wl = 1.0 if i == 0 else 0.5
        wr = 1.0 if i == n - 2 else 0.5
        t = -J * np.kron(PAULI_Z, PAULI_Z)
        t -= h * (wl * np.kron(PAULI_X, eye) + wr * np.kron(eye, PAULI_X))
        terms.append(t)
    return terms


def _heisenberg_terms(n: int, J: float, jz: float) -> list[np.ndarray]:
    """H = sum J (X_i X_{i+1} + Y_i Y_{i+1}) + jz Z_i Z_{i+1} (Pauli convention)."""
    bond = (
        J * (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y)).real
        + jz * np.kron(PAULI_Z, PAULI_Z)
    )
    return [bond.copy() for _ in range(n - 1)]


def _random_bond_terms(n: int, d: int, scale: float, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(n - 1):
        r = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
        terms.append(scale * (r + r.conj().T) / 2.0)
    return terms


def build_standard_model(name: str, n: int, d: int = 2, params: dict | None = None, seed: int = 0) -> ChainSpec:
    """Build a validated, normalized test-bed chain.

    Supported models: ``tfim`` (transverse-field Ising, gapped for h != 1),
    ``heisenberg`` (XXX, jz overrides the ZZ coupling) and ``random_bond``
    (seeded Hermitian bond matrices).  Terms come out satisfying
    ``0 <= H_i <= 1`` with the affine constants in ``chain.shift``.
    """
    if name not in MODEL_NAMES:
        raise ChainError(f"unknown model '{name}', expected one of {MODEL_NAMES}")
    if n < 2:
        raise ChainError(f"need n >= 2, got {n}")
    p = _default_params(name, params)
    if name == "tfim":
        if d != 2:
            raise ChainError("tfim requires d = 2")
        raw = _tfim_terms(n, p["J"], p["h"])
    elif name == "heisenberg":
        if d != 2:
            raise ChainError("heisenberg requires d = 2")
        jz = p["J"] if p["jz"] is None else p["jz"]
        p = {"J": p["J"], "jz": jz}
        raw = _heisenberg_terms(n, p["J"], jz)
    else:
        raw = _random_bond_terms(n, d, p["scale"], seed)
    normalized, shift = _normalize_terms(raw)
    return ChainSpec(n=n, d=d, terms=tuple(normalized), label=name, params=p, seed=seed, shift=shift)


def assemble_dense(chain: ChainSpec, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense ``d^n x d^n`` matrix ``sum_i 1 x .. x H_i x .. x 1``."""
    if chain.dim > dense_limit:
        raise ChainError(f"dense dimension {chain.dim} exceeds limit {dense_limit}")
    dtype = np.result_type(*[t.dtype for t in chain.terms])
    out = np.zeros((chain.dim, chain.dim), dtype=dtype)
    for i, t in enumerate(chain.terms):
        out += embed_operator(t, i, chain.n, chain.d)
    return out


def assemble_sparse(chain: ChainSpec) -> sp.csr_matrix:
    """Sparse assembly, for extremal eigensolves past the dense-eigh scale."""
    dim = chain.dim
    dtype = np.result_type(*[t.dtype for t in chain.terms])
    out = sp.csr_matrix((dim, dim), dtype=dtype)
    for i, t in enumerate(chain.terms):
        left = sp.identity(chain.d**i, format="csr", dtype=dtype)
        right = sp.identity(chain.d ** (chain.n - i - 2), format="csr", dtype=dtype)
        out = out + sp.kron(sp.kron(left, sp.csr_matrix(t)), right, format="csr")
    return out


@dataclass(frozen=True)
class TermReport:
    index: int
    hermiticity: float
    eig_min: float
    eig_max: float
    ok: bool


@dataclass(frozen=True)
class ValidationReport:
    reports: tuple[TermReport, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "terms": [
                {
                    "index": r.index,
                    "hermiticity": r.hermiticity,
                    "eig_min": r.eig_min,
                    "eig_max": r.eig_max,
                    "ok": r.ok,
                }
                for r in self.reports
            ],
        }


def validate_terms(chain: ChainSpec, tol: float = 1e-12) -> ValidationReport:
    """Report per-term Hermiticity deviation and eigenvalue range.

    Flags any term whose spectrum leaves ``[0, 1]`` by more than ``tol``.
    Report-only; never raises.
    """
    reports = []
    for i, t in enumerate(chain.terms):
        herm = hermiticity_deviation(t)
        w = np.linalg.eigvalsh(t)
        ok = herm <= tol and w[0] >= -tol and w[-1] <= 1.0 + tol
        reports.append(TermReport(i, herm, float(w[0]), float(w[-1]), bool(ok)))
    return ValidationReport(tuple(reports), all(r.ok for r in reports))


@dataclass(frozen=True)
class SegmentedHamiltonian:
    """H = H_L + H_1 + ... + H_s + H_R around the middle cut of the segment.

    ``h_left`` collects bonds ``1..m`` dense on sites ``1..m+1``; segment
    term ``H_i`` is chain bond ``m+i`` acting on sites ``(m+i, m+i+1)``;
    ``h_right`` collects bonds ``m+s+1..n-1`` dense on sites ``m+s+1..n``
    (all 1-based).  ``identity_shift`` records the multiple of identity by
    which the reassembled sum differs from the source chain:
    ``assembled = chain_sum + identity_shift * 1``.
    """

    n: int
    d: int
    m: int
    s: int
    h_left: np.ndarray
    terms: tuple[np.ndarray, ...]
    h_right: np.ndarray
    label: str = "custom"
    shift: ShiftRecord = field(default_factory=ShiftRecord)
    identity_shift: float = 0.0
    block_energies: tuple[float, float, float] | None = None  # (E0 left, E0 right, E0 interior) pre-shift

    def __post_init__(self):
        if len(self.terms) != self.s:
            raise ChainError(f"expected {self.s} segment terms, got {len(self.terms)}")
        for name, block, sites in (
            ("h_left", self.h_left, self.left_sites),
            ("h_right", self.h_right, self.right_sites),
        ):
            if block.shape != (self.d**sites, self.d**sites):
                raise ChainError(f"{name} has shape {block.shape}, expected dim {self.d ** sites}")

    @property
    def cut(self) -> int:
        """Middle cut index within the segment (cut i sits after segment term i)."""
        return self.s // 2

    @property
    def cut_sites_left(self) -> int:
        """Number of chain sites left of the middle cut."""
        return self.m + self.s // 2

    @property
    def left_sites(self) -> int:
        return self.m + 1

    @property
    def right_sites(self) -> int:
        return self.n - self.m - self.s

    @property
    def dim(self) -> int:
        return self.d**self.n

    def placed_terms(self) -> list[tuple[int, np.ndarray]]:
        """All parts as (0-based start site, matrix) pairs, zero blocks skipped."""
        placed = []
        if np.abs(self.h_left).max() > 0:
            placed.append((0, self.h_left))
        for i, t in enumerate(self.terms):
            placed.append((self.m + i, t))
        if np.abs(self.h_right).max() > 0:
            placed.append((self.m + self.s, self.h_right))
        return placed

    def assemble_dense(self, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
        if self.dim > dense_limit:
            raise ChainError(f"dense dimension {self.dim} exceeds limit {dense_limit}")
        dtype = np.result_type(self.h_left.dtype, self.h_right.dtype, *[t.dtype for t in self.terms])
        out = np.zeros((self.dim, self.dim), dtype=dtype)
        out += embed_operator(self.h_left, 0, self.n, self.d)
        for i, t in enumerate(self.terms):
            out += embed_operator(t, self.m + i, self.n, self.d)
        out += embed_operator(self.h_right, self.m + self.s, self.n, self.d)
        return out


def segment(chain: ChainSpec, m: int, s: int) -> SegmentedHamiltonian:
    """Split a chain into H_L + H_1..H_s + H_R around the segment's middle cut.

    Requires ``1 <= m``, ``m + s + 1 <= n`` and even ``s``.  Bond ``m+i``
    becomes segment term ``H_i``; bonds at or below ``m`` fold into the left
    block, bonds above ``m+s`` into the right block.
    """
    if m < 1:
        raise ChainError(f"need m >= 1, got {m}")
    if s < 2 or s % 2 != 0:
        raise ChainError(f"segment length s must be even and >= 2, got {s}")
    if m + s + 1 > chain.n:
        raise ChainError(f"segment (m={m}, s={s}) does not fit in n={chain.n}")
    d = chain.d
    left_sites = m + 1
    right_sites = chain.n - m - s
    dtype = np.result_type(*[t.dtype for t in chain.terms])

    h_left = np.zeros((d**left_sites, d**left_sites), dtype=dtype)
    for bond in range(m):  # 0-based bonds 0..m-1 = 1-based 1..m
        h_left += embed_operator(chain.terms[bond], bond, left_sites, d)

    terms = tuple(chain.terms[m + i] for i in range(s))  # 1-based bonds m+1..m+s

    h_right = np.zeros((d**right_sites, d**right_sites), dtype=dtype)
    for bond in range(m + s, chain.n - 1):  # 1-based bonds m+s+1..n-1
        h_right += embed_operator(chain.terms[bond], bond - (m + s), right_sites, d)

    return SegmentedHamiltonian(
        n=chain.n, d=d, m=m, s=s, h_left=h_left, terms=terms, h_right=h_right,
        label=chain.label, shift=chain.shift,
    )


def _ground_energy_dense(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(mat)[0])


def frustrated_shift(seg: SegmentedHamiltonian, check: bool = True) -> SegmentedHamiltonian:
    """Shift blocks so H_L, H_R and the interior segment sum have ground energy 0.

    The end blocks drop their own ground energies; the interior terms
    ``H_4..H_{s-3}`` share the interior-sum ground energy uniformly.  The six
    terms ``H_1, H_2, H_3, H_{s-2}, H_{s-1}, H_s`` are untouched, so the
    shifted total keeps ground energy <= 6 (verified against the eigensolver
    oracle when ``check`` is set).  Requires ``s >= 8``.
    """
    if seg.s < 8:
        raise ChainError(f"frustrated shift needs s >= 8, got s={seg.s}")
    d = seg.d
    c_left = _ground_energy_dense(seg.h_left)
    c_right = _ground_energy_dense(seg.h_right) if np.abs(seg.h_right).max() > 0 else 0.0

    interior = list(range(3, seg.s - 3))  # 0-based: segment terms H_4..H_{s-3}
    width = seg.s - 5  # their union of sites, m+4..m+s-2 (1-based)
    dtype = np.result_type(*[seg.terms[i].dtype for i in interior])
    block = np.zeros((d**width, d**width), dtype=dtype)
    for k, i in enumerate(interior):
        block += embed_operator(seg.terms[i], k, width, d)
    g_interior = _ground_energy_dense(block)

    per_term = g_interior / len(interior)
    eye2 = np.eye(d * d)
    new_terms = list(seg.terms)
    for i in interior:
        new_terms[i] = seg.terms[i] - per_term * eye2

    new_left = seg.h_left - c_left * np.eye(seg.h_left.shape[0])
    new_right = seg.h_right - c_right * np.eye(seg.h_right.shape[0])
    total_shift = c_left + c_right + g_interior

    shifted = replace(
        seg,
        h_left=new_left,
        h_right=new_right,
        terms=tuple(new_terms),
        identity_shift=seg.identity_shift - total_shift,
        block_energies=(c_left, c_right, g_interior),
    )
    if check:
        e0 = _segment_ground_energy(shifted)
        if e0 > 6.0 + 1e-9:
            raise ChainError(f"shifted ground energy {e0:.6g} exceeds 6")
    return shifted


def _segment_ground_energy(seg: SegmentedHamiltonian) -> float:
    """Ground energy of the assembled segment, iterative above the dense-eigh scale."""
    if seg.dim <= 2**12:
        return _ground_energy_dense(seg.assemble_dense())
    from scipy.sparse.linalg import eigsh

    placed = seg.placed_terms()
    mats = [(start, np.asarray(mat)) for start, mat in placed]

    def matvec(v):
        acc = np.zeros_like(v, dtype=np.result_type(v.dtype, *[m.dtype for _, m in mats]))
        t = v.reshape((seg.d,) * seg.n)
        for start, mat in mats:
            w = round(np.log(mat.shape[0]) / np.log(seg.d))
            moved = np.moveaxis(t, tuple(range(start, start + w)), tuple(range(w)))
            shaped = moved.reshape(mat.shape[0], -1)
            res = (mat @ shaped).reshape((seg.d,) * w + moved.shape[w:])
            acc += np.moveaxis(res, tuple(range(w)), tuple(range(start, start + w))).reshape(v.shape)
        return acc

    from scipy.sparse.linalg import LinearOperator

    op = LinearOperator((seg.dim, seg.dim), matvec=matvec, dtype=np.float64)
    v0 = np.random.default_rng(7).normal(size=seg.dim)
    w = eigsh(op, k=1, which="SA", v0=v0, return_eigenvectors=False)
    return float(w[0])


# --- serialization -----------------------------------------------------------

CHAIN_FORMAT = 1


def _matrix_to_pair(m: np.ndarray) -> dict:
    c = np.asarray(m, dtype=np.complex128)
    return {"re": c.real.tolist(), "im": c.imag.tolist()}


def _matrix_from_pair(p: dict) -> np.ndarray:
    m = np.array(p["re"], dtype=float) + 1j * np.array(p["im"], dtype=float)
    return _realify(m)


def chain_to_json(chain: ChainSpec) -> str:
    doc = {
        "format": CHAIN_FORMAT,
        "label": chain.label,
        "n": chain.n,
        "d": chain.d,
        "params": chain.params,
        "seed": chain.seed,
        "shift_record": chain.shift.to_dict(),
        "terms": [_matrix_to_pair(t) for t in chain.terms],
    }
    return json.dumps(doc, sort_keys=True)


def chain_from_json(text: str) -> ChainSpec:
    doc = json.loads(text)
    if doc.get("format") != CHAIN_FORMAT:
        raise ChainError(f"unsupported chain format {doc.get('format')!r}")
    return ChainSpec(
        n=int(doc["n"]),
        d=int(doc["d"]),
        terms=tuple(_matrix_from_pair(p) for p in doc["terms"]),
        label=doc["label"],
        params=dict(doc["params"]),
        seed=int(doc["seed"]),
        shift=ShiftRecord.from_dict(doc["shift_record"]),
    )
