"""Dense Hamiltonian builders: bare polaritons, truncated polariton-phonon
problem and the effective quasiperiodic model.

Basis of the truncated problem (0-based ``m``, ``p``): index ``m`` is
``|e_m; vac>``, index ``N + m*N + p`` is ``|e_m; 1_p>`` with one phonon on site p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionOverflow, ParseError, ValidationError
from .lattice import ArrayParams

DEFAULT_DIM_CAP = 20_000


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("entries", f"matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("entries", "matrix has non-finite entries")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T))) if self.dim else 0.0


@dataclass(frozen=True)
class PolaritonPhononBasis:
    n_sites: int

    @property
    def dim(self) -> int:
        return self.n_sites + self.n_sites**2

    def index(self, m: int, phonon: int | None = None) -> int:
        """Index of ``|e_m; vac>`` (phonon None) or ``|e_m; 1_phonon>``; sites are 1-based."""
        n = self.n_sites
        if not (1 <= m <= n):
            raise ValueError(f"site {m} outside 1..{n}")
        if phonon is None:
            return m - 1
        if not (1 <= phonon <= n):
            raise ValueError(f"phonon site {phonon} outside 1..{n}")
        return n + (m - 1) * n + (phonon - 1)

    def label(self, index: int) -> tuple[int, int | None]:
        n = self.n_sites
        if index < n:
            return index + 1, None
        m, p = divmod(index - n, n)
        return m + 1, p + 1


@dataclass(frozen=True)
class Modulation:
    v: complex
    beta: float
    theta: float

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValidationError("beta", f"must lie in (0, 1), got {self.beta!r}")
        object.__setattr__(self, "v", complex(self.v))
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))


@dataclass(frozen=True)
class TruncationPolicy:
    max_phonons: int = 1
    include_second_order: bool = True

    def __post_init__(self):
        if self.max_phonons not in (0, 1):
            raise ValidationError("max_phonons", f"must be 0 or 1, got {self.max_phonons!r}")


def _distance(n: int) -> np.ndarray:
    m = np.arange(n)
    return np.abs(m[:, None] - m[None, :])


def h0_entries(params: ArrayParams) -> np.ndarray:
    return -0.5j * params.gamma0 * np.exp(1j * params.phi * _distance(params.n_sites))


def site_coupling(params: ArrayParams, eta: float | None = None) -> np.ndarray:
    """``(eta Gamma0/2) sign(m-n) e^{i phi |m-n|}``: the first-order emitter-phonon kernel."""
    eta = params.eta if eta is None else eta
    m = np.arange(params.n_sites)
    diff = m[:, None] - m[None, :]
    return 0.5 * eta * params.gamma0 * np.sign(diff) * np.exp(1j * params.phi * np.abs(diff))


def build_h0(params: ArrayParams) -> ComplexMatrix:
    return ComplexMatrix(h0_entries(params), f"h0 N={params.n_sites}")


def build_full(
    params: ArrayParams,
    policy: TruncationPolicy = TruncationPolicy(),
    dim_cap: int = DEFAULT_DIM_CAP,
) -> ComplexMatrix:
    n = params.n_sites
    h0 = h0_entries(params)
    if policy.max_phonons == 0:
        return ComplexMatrix(h0, f"full N={n} phonons<=0")
    dim = n + n * n
    if dim > dim_cap:
        raise DimensionOverflow(f"dimension {dim} exceeds cap {dim_cap}")
    eta2 = params.eta**2
    eye = np.eye(n)
    offdiag = 1.0 - eye
    out = np.zeros((dim, dim), dtype=complex)
    out[:n, :n] = h0 * (1 - eta2 * offdiag) if policy.include_second_order else h0

    # <e_m;1_p|H|e_n;vac> = C[m,n] (delta_pm - delta_pn), rows ordered (m, p)
    c = site_coupling(params)
    emit = c[:, None, :] * (eye[:, :, None] - eye[None, :, :])
    emit = emit.reshape(n * n, n)
    out[n:, :n] = emit
    out[:n, n:] = emit.T

    # one-phonon block, tensor indices [m, p, n, p']
    block = np.zeros((n, n, n, n), dtype=complex)
    block += (h0 + params.omega * eye)[:, None, :, None] * eye[None, :, None, :]
    if policy.include_second_order:
        # -(eta^2/2) x H0 element x (x_m - x_n)^2; same sign that gives the (1 - eta^2) vacuum factor
        pref = 0.25j * eta2 * params.gamma0 * np.exp(1j * params.phi * _distance(n)) * offdiag
        d_pp = eye[None, :, None, :]
        d_pm = eye[:, :, None, None]  # delta_{p m}, indexed [m, p]
        d_pn = eye.T[None, :, :, None]  # delta_{p n}, indexed [p, n]
        d_p2n = eye[None, None, :, :]  # delta_{p' n}
        d_p2m = eye[:, None, None, :]  # delta_{p' m}
        factor = d_pp * (1 + d_pm + d_pn) - (d_pm * d_p2n + d_pn * d_p2m)
        block += 2 * pref[:, None, :, None] * factor
    out[n:, n:] = block.reshape(n * n, n * n)
    kind = "with HI2" if policy.include_second_order else "first order"
    return ComplexMatrix(out, f"full N={n} phonons<=1 {kind}")


def build_heff(params: ArrayParams, mod: Modulation) -> ComplexMatrix:
    m = np.arange(1, params.n_sites + 1)
    entries = h0_entries(params)
    entries[np.diag_indices(params.n_sites)] += mod.v * np.cos(2 * np.pi * mod.beta * m + mod.theta)
    return ComplexMatrix(entries, f"heff N={params.n_sites} beta={mod.beta!r} theta={mod.theta!r}")


def physical_thetas(params: ArrayParams, beta: float) -> tuple[float, float]:
    """Mirror-symmetric phases ``n pi - pi beta (N+1)`` reduced mod 2pi (two values)."""
    if not (0.0 < beta < 1.0):
        raise ValidationError("beta", f"must lie in (0, 1), got {beta!r}")
    base = (-math.pi * beta * (params.n_sites + 1)) % math.pi
    return base, base + math.pi


def dump_matrix(matrix: ComplexMatrix, path) -> None:
    """Text dump: ``dim <N> <label>`` then one ``re im`` line per entry, row-major."""
    label = matrix.label.replace("\n", " ")
    lines = [f"dim {matrix.dim} {label}".rstrip()]
    for z in matrix.entries.ravel():
        lines.append(f"{float(z.real)!r} {float(z.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_matrix(path) -> ComplexMatrix:
    path = Path(path)
    text = path.read_text(encoding="utf-8").split("\n")
    head = text[0].split(" ", 2)
    if len(head) < 2 or head[0] != "dim" or not head[1].isdigit():
        raise ParseError(str(path), 1, 1, "expected header 'dim <N> <label>'")
    n = int(head[1])
    label = head[2] if len(head) > 2 else ""
    body = text[1 : 1 + n * n]
    if len(body) < n * n:
        raise ParseError(str(path), len(text), 1, f"expected {n * n} entries, found {len(body)}")
    values = np.empty(n * n, dtype=complex)
    for i, line in enumerate(body):
        parts = line.split()
        try:
            values[i] = complex(float(parts[0]), float(parts[1]))
        except (IndexError, ValueError):
            raise ParseError(str(path), i + 2, 1, f"bad entry {line!r}") from None
    return ComplexMatrix(values.reshape(n, n), label)
