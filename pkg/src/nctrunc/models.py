"""Concrete spectral triples presented in the eigenbasis of |D|.

Every model enumerates its modes as (lattice label, inner index) pairs and
orders them globally by (lambda, label lexicographically, inner index).  A
spectral projection ``P_lambda`` is then always a prefix of that order, and
so is the projection ``Q_n`` onto the first ``n + 1`` eigenvectors.
"""

import math
import threading
from dataclasses import dataclass
from itertools import product as _cartesian

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, ResourceLimit
from .oracles import Diagonal, Explicit, Identity, MatrixOracle

DEFAULT_MODE_CAP = 20_000_000
_KEY_RTOL = 1e-12

_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


@dataclass(frozen=True)
class ModeTable:
    """First ``len(self)`` modes in global order."""

    labels: np.ndarray  # (n, lattice_dim) int64
    inner: np.ndarray  # (n,) int64
    lam2: np.ndarray  # (n,) squared |D| eigenvalue
    point: np.ndarray  # (n,) index into the model's lattice point list

    def __len__(self):
        return int(self.lam2.size)

    @property
    def lam(self):
        return np.sqrt(self.lam2)

    def prefix(self, n):
        return ModeTable(self.labels[:n], self.inner[:n], self.lam2[:n], self.point[:n])


class SpherePolynomial:
    """Polynomial in the coordinates ``x_1 .. x_d`` of the unit sphere."""

    def __init__(self, dim, terms=None):
        self.dim = int(dim)
        self.terms = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim or min(exps, default=0) < 0:
                raise InvalidArgument("bad exponent tuple for sphere polynomial")
            if c != 0:
                self.terms[exps] = self.terms.get(exps, 0) + complex(c)

    @classmethod
    def constant(cls, dim, c):
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def coordinate(cls, dim, i):
        if not 0 <= i < dim:
            raise InvalidArgument(f"coordinate x{i + 1} outside dimension {dim}")
        exps = [0] * dim
        exps[i] = 1
        return cls(dim, {tuple(exps): 1.0})

    def __add__(self, other):
        out = SpherePolynomial(self.dim, self.terms)
        for e, c in other.terms.items():
            out.terms[e] = out.terms.get(e, 0) + c
        out.terms = {e: c for e, c in out.terms.items() if c != 0}
        return out

    def scale(self, s):
        return SpherePolynomial(self.dim, {e: c * s for e, c in self.terms.items()})

    def __mul__(self, other):
        out = {}
        for (e1, c1), (e2, c2) in _cartesian(self.terms.items(), other.terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
        return SpherePolynomial(self.dim, out)

    def power(self, p):
        out = SpherePolynomial.constant(self.dim, 1.0)
        for _ in range(int(p)):
            out = out * self
        return out

    @property
    def is_real(self):
        return all(complex(c).imag == 0 for c in self.terms.values())

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[0], dtype=np.complex128)
        for exps, c in self.terms.items():
            term = np.full(x.shape[0], c, dtype=np.complex128)
            for i, e in enumerate(exps):
                if e:
                    term *= x[:, i] ** e
            out += term
        return out

    def __eq__(self, other):
        return isinstance(other, SpherePolynomial) and (self.dim, self.terms) == (
            other.dim,
            other.terms,
        )

    def __repr__(self):
        return f"SpherePolynomial({self.dim}, {self.terms})"


def _odd_coefficients(coeffs):
    c = np.atleast_1d(np.asarray(coeffs, dtype=np.complex128))
    if c.ndim != 1 or c.size % 2 == 0:
        raise InvalidArgument(
            "Fourier coefficient lists have odd length c_{-m}, ..., c_0, ..., c_m"
        )
    m = c.size // 2
    return [(s, c[s + m]) for s in range(-m, m + 1) if c[s + m] != 0]


def _fourier_hermitian(shifts):
    table = dict(shifts)
    return all(np.isclose(table.get(-s, 0), np.conj(c), rtol=0, atol=0) for s, c in shifts)


class SpectralModel:
    """Base class for a spectral triple enumerated in the eigenbasis of |D|."""

    name = "abstract"
    lattice_dim = 1
    inner_size = 1
    dimension = 1.0

    def __init__(self, max_modes=DEFAULT_MODE_CAP):
        self.max_modes = int(max_modes)
        self._lock = threading.RLock()
        self._radius = -1.0
        self._table = None
        self._points = None

    # -- hooks -----------------------------------------------------------

    def _lattice_points(self, radius):
        raise NotImplementedError

    def _mode_keys(self, points):
        """Squared eigenvalue for every (point, inner index), shape (K, inner)."""
        raise NotImplementedError

    def _prepare_points(self, points):
        """Per-point data (e.g. block eigenvectors) computed once per table."""

    def weyl_estimate(self, lam):
        """Upper estimate of N(lambda) used for budgets and resource checks."""
        raise NotImplementedError

    def descriptor(self):
        return {"name": self.name}

    # -- enumeration -----------------------------------------------------

    def _box(self, radius, nonneg=False):
        r = int(math.floor(radius + 1e-9))
        axis = np.arange(0 if nonneg else -r, r + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * self.lattice_dim), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        norm2 = np.sum(pts.astype(np.float64) ** 2, axis=1)
        return pts[norm2 <= radius * radius * (1 + _KEY_RTOL) + 1e-12]

    def _ensure_radius(self, radius):
        if radius <= self._radius:
            return
        with self._lock:
            if radius <= self._radius:
                return
            requested = float(radius)
            if self.weyl_estimate(requested) > self.max_modes:
                raise ResourceLimit(
                    f"{self.name}: enumerating lambda <= {requested:.4g} needs about "
                    f"{self.weyl_estimate(requested):.3g} modes, cap is {self.max_modes}"
                )
            # grow geometrically so repeated small requests rebuild rarely
            target = max(requested, 1.25 * self._radius, 1.0)
            if self.weyl_estimate(target) > self.max_modes:
                target = requested
            self._build(target)

    def _build(self, radius):
        pts = self._lattice_points(radius)
        keys = self._mode_keys(pts)
        K, inner_size = keys.shape
        lam2 = keys.ravel()
        point = np.repeat(np.arange(K, dtype=np.int64), inner_size)
        inner = np.tile(np.arange(inner_size, dtype=np.int64), K)
        keep = lam2 <= radius * radius * (1 + _KEY_RTOL) + 1e-12
        lam2, point, inner = lam2[keep], point[keep], inner[keep]
        labels = pts[point]
        sort_keys = [inner] + [labels[:, i] for i in reversed(range(self.lattice_dim))]
        order = np.lexsort(tuple(sort_keys) + (lam2,))
        lam2, point, inner, labels = lam2[order], point[order], inner[order], labels[order]
        lam2 = _snap_keys(lam2)

        offset = int(math.floor(radius + 1e-9)) + 2
        base = 2 * offset + 1
        if base ** self.lattice_dim * inner_size >= 2**62:
            raise ResourceLimit("mode labels too large to index")
        self._offset, self._base = offset, base
        codes = self._codes(labels, inner)
        self._code_order = np.argsort(codes, kind="stable")
        self._codes_sorted = codes[self._code_order]
        pcodes = self._point_codes(pts)
        self._pcode_order = np.argsort(pcodes, kind="stable")
        self._pcodes_sorted = pcodes[self._pcode_order]

        self._points = pts
        self._prepare_points(pts)
        self._table = ModeTable(labels, inner, lam2, point)
        self._radius = float(radius)

    def _point_codes(self, labels):
        shifted = labels + self._offset
        code = np.zeros(labels.shape[0], dtype=np.int64)
        for i in reversed(range(self.lattice_dim)):
            code = code * self._base + shifted[:, i]
        return code

    def _codes(self, labels, inner):
        return self._point_codes(labels) * self.inner_size + inner

    def _in_box(self, labels):
        return np.all(np.abs(labels) < self._offset, axis=1)

    def lookup(self, labels, inner):
        """Global mode index of each (label, inner) pair, -1 if not enumerated."""
        labels = np.asarray(labels, dtype=np.int64).reshape(-1, self.lattice_dim)
        inner = np.broadcast_to(np.asarray(inner, dtype=np.int64), (labels.shape[0],))
        out = np.full(labels.shape[0], -1, dtype=np.int64)
        ok = self._in_box(labels)
        if not np.any(ok):
            return out
        codes = self._codes(labels[ok], inner[ok])
        pos = np.searchsorted(self._codes_sorted, codes)
        pos_c = np.minimum(pos, self._codes_sorted.size - 1)
        found = self._codes_sorted[pos_c] == codes
        idx = np.where(found, self._code_order[pos_c], -1)
        out[ok] = idx
        return out

    def lookup_point(self, labels):
        labels = np.asarray(labels, dtype=np.int64).reshape(-1, self.lattice_dim)
        out = np.full(labels.shape[0], -1, dtype=np.int64)
        ok = self._in_box(labels)
        if not np.any(ok):
            return out
        codes = self._point_codes(labels[ok])
        pos = np.minimum(np.searchsorted(self._pcodes_sorted, codes), self._pcodes_sorted.size - 1)
        found = self._pcodes_sorted[pos] == codes
        out[ok] = np.where(found, self._pcode_order[pos], -1)
        return out

    def enumerate(self, lam):
        """All modes with eigenvalue <= ``lam``."""
        return self.modes(self.counting(lam))

    def modes(self, n):
        """The first ``n`` modes in global order."""
        n = int(n)
        if n < 0:
            raise InvalidArgument("mode count must be non-negative")
        if self._table is None or len(self._table) < n:
            if n > self.max_modes:
                raise ResourceLimit(f"{n} modes requested, cap is {self.max_modes}")
            radius = max(self._radius, 1.0)
            while self.weyl_estimate(radius) < n:
                radius *= 1.25
            self._ensure_radius(radius)
            while len(self._table) < n:
                self._ensure_radius(self._radius * 1.25)
        return self._table.prefix(n)

    def counting(self, lam):
        """``N(lambda) = #{k : lambda_k <= lambda}``."""
        lam = float(lam)
        if lam < 0:
            return 0
        self._ensure_radius(lam)
        bound = lam * lam * (1 + _KEY_RTOL) + 1e-12
        return int(np.searchsorted(self._table.lam2, bound, side="right"))

    def lam_at(self, index):
        """Eigenvalue of the mode with global index ``index``."""
        return float(math.sqrt(self.modes(index + 1).lam2[index]))

    def eigenvalues(self, n):
        return self.modes(n).lam

    def distinct_eigenvalues(self, lam):
        """Eigenvalues ``r_0 < r_1 < ...`` up to ``lam``, without multiplicity."""
        return np.sqrt(np.unique(self.enumerate(lam).lam2))

    def snap(self, lam):
        """Largest distinct eigenvalue not exceeding ``lam``."""
        r = self.distinct_eigenvalues(lam)
        if r.size == 0:
            raise InvalidArgument(f"no eigenvalue below cutoff {lam}")
        return float(r[-1])

    @staticmethod
    def angle_bracket(lam):
        return np.sqrt(1.0 + np.asarray(lam, dtype=np.float64) ** 2)

    # -- generators shared by every model -------------------------------

    def identity(self):
        return Identity(self)

    def bracket(self, s):
        """Diagonal operator ``<D>^s``; bounded only for ``s <= 0``."""
        s = float(np.real(s))
        return Diagonal(
            self, lambda t: (1.0 + t.lam2) ** (0.5 * s), f"bracket({s!r})"
        )

    def explicit(self, matrix, label="explicit"):
        return Explicit(self, matrix, label=label)

    GENERATORS = {"id": (0, 0), "bracket": (1, 1)}

    def generator(self, name, args=()):
        """Build generator ``name`` from parsed arguments (complex scalars
        or :class:`SpherePolynomial`)."""
        spec = self.GENERATORS.get(name)
        if spec is None:
            raise InvalidArgument(f"model {self.name} has no generator {name!r}")
        lo, hi = spec
        if not (lo <= len(args) and (hi is None or len(args) <= hi)):
            want = f"{lo}" if lo == hi else f"{lo}..{'' if hi is None else hi}"
            raise InvalidArgument(
                f"generator {name} takes {want} arguments, got {len(args)}"
            )
        return self._make(name, list(args))

    def _make(self, name, args):
        if name == "id":
            return self.identity()
        if name == "bracket":
            return self.bracket(_real(args[0]))
        raise InvalidArgument(f"model {self.name} has no generator {name!r}")


def _real(z):
    if isinstance(z, SpherePolynomial):
        raise InvalidArgument("expected a number, got a polynomial")
    z = complex(z)
    if z.imag != 0:
        raise InvalidArgument(f"expected a real number, got {z}")
    return z.real


def _integer(z):
    r = _real(z)
    if r != int(r):
        raise InvalidArgument(f"expected an integer, got {r}")
    return int(r)


def _numbers(args):
    for a in args:
        if isinstance(a, SpherePolynomial):
            raise InvalidArgument("expected numbers, got a polynomial")
    return [complex(a) for a in args]


def _snap_keys(lam2):
    if lam2.size < 2:
        return lam2
    tol = _KEY_RTOL * np.maximum(lam2[1:], 1.0)
    new_group = np.concatenate([[True], np.diff(lam2) > tol])
    first = np.flatnonzero(new_group)
    return lam2[first][np.cumsum(new_group) - 1]


class Shift(MatrixOracle):
    """Weighted lattice shifts: ``A e_(k,s) = sum_m c_m phase(m,k) e_(k+m,s)``."""

    def __init__(self, model, shifts, label, phase=None, hermitian=None):
        shifts = [(np.atleast_1d(np.asarray(m, dtype=np.int64)), complex(c)) for m, c in shifts]
        band = max((float(np.linalg.norm(m)) for m, _ in shifts), default=0.0)
        if hermitian is None:
            hermitian = False
        super().__init__(model, band, hermitian, label)
        self.shifts = shifts
        self.phase = phase
        self.key = label

    def diagonal(self, n):
        out = np.zeros(n, dtype=np.complex128)
        for m, c in self.shifts:
            if not np.any(m):
                out += c
        return out

    def _build(self, n_rows, n_cols):
        table = self.model.modes(max(n_rows, n_cols))
        labels = table.labels[:n_cols]
        inner = table.inner[:n_cols]
        cols_all = np.arange(n_cols, dtype=np.int64)
        rows, cols, vals = [np.zeros(0, np.int64)], [np.zeros(0, np.int64)], [np.zeros(0, complex)]
        for m, c in self.shifts:
            tgt = self.model.lookup(labels + m, inner)
            keep = (tgt >= 0) & (tgt < n_rows)
            v = np.full(int(keep.sum()), c, dtype=np.complex128)
            if self.phase is not None:
                v = v * self.phase(m, labels[keep])
            rows.append(tgt[keep])
            cols.append(cols_all[keep])
            vals.append(v)
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_rows, n_cols),
        )


def _sphere_values(g, g0, labels):
    labels = labels.astype(np.float64)
    norm = np.linalg.norm(labels, axis=1)
    out = np.full(labels.shape[0], complex(g0), dtype=np.complex128)
    nz = norm > 0
    if np.any(nz):
        out[nz] = g(labels[nz] / norm[nz, None])
    return out


# ---------------------------------------------------------------- circle


class CircleModel(SpectralModel):
    """Fourier modes ``n`` in Z on the circle, ``D = -i d/dtheta``, lambda = |n|."""

    name = "circle"
    lattice_dim = 1
    inner_size = 1
    dimension = 1.0

    GENERATORS = dict(
        SpectralModel.GENERATORS, mult=(1, None), sign_symbol=(3, 3), proj_pos=(0, 0)
    )

    def _lattice_points(self, radius):
        return self._box(radius)

    def _mode_keys(self, points):
        return points.astype(np.float64) ** 2

    def weyl_estimate(self, lam):
        return 2.0 * math.floor(lam) + 1.0

    def mult(self, coeffs):
        """Multiplication by ``f = sum_m c_m e^{i m theta}``; entry ``c_{j-k}``."""
        shifts = _odd_coefficients(coeffs)
        return Shift(
            self,
            shifts,
            f"mult({', '.join(str(c) for c in np.atleast_1d(coeffs))})",
            hermitian=_fourier_hermitian(shifts),
        )

    def sign_symbol(self, g_minus, g_zero, g_plus):
        vals = np.array([g_minus, g_zero, g_plus], dtype=np.complex128)
        return Diagonal(
            self,
            lambda t: vals[np.sign(t.labels[:, 0]) + 1],
            f"sign_symbol({g_minus}, {g_zero}, {g_plus})",
            hermitian=bool(np.all(vals.imag == 0)),
        )

    def proj_pos(self):
        """Spectral projection of D onto [0, inf)."""
        return Diagonal(self, lambda t: (t.labels[:, 0] >= 0).astype(float), "proj_pos")

    def _make(self, name, args):
        if name == "mult":
            return self.mult(_numbers(args))
        if name == "sign_symbol":
            return self.sign_symbol(*_numbers(args))
        if name == "proj_pos":
            return self.proj_pos()
        return super()._make(name, args)


# ---------------------------------------------------------------- Toeplitz


class ToeplitzModel(SpectralModel):
    """``l2(N)`` with ``D e_j = j e_j``; the algebra is generated by the shift."""

    name = "toeplitz"
    lattice_dim = 1
    inner_size = 1
    dimension = 1.0

    GENERATORS = dict(SpectralModel.GENERATORS, toeplitz=(1, None), finite_rank=(1, None))

    def _lattice_points(self, radius):
        return self._box(radius, nonneg=True)

    def _mode_keys(self, points):
        return points.astype(np.float64) ** 2

    def weyl_estimate(self, lam):
        return math.floor(lam) + 1.0

    def toeplitz(self, coeffs):
        """Toeplitz operator with symbol coefficients ``c_{-m}..c_m``."""
        shifts = _odd_coefficients(coeffs)
        return Shift(
            self,
            shifts,
            f"toeplitz({', '.join(str(c) for c in np.atleast_1d(coeffs))})",
            hermitian=_fourier_hermitian(shifts),
        )

    def finite_rank(self, matrix):
        mat = np.asarray(matrix, dtype=np.complex128)
        if mat.ndim == 1:
            m = int(round(math.sqrt(mat.size)))
            if m * m != mat.size:
                raise InvalidArgument("finite_rank needs m*m entries (row-major)")
            mat = mat.reshape(m, m)
        m = mat.shape[0]
        return Explicit(self, mat, label="finite_rank", band=float(max(m - 1, 0)))

    def _make(self, name, args):
        if name == "toeplitz":
            return self.toeplitz(_numbers(args))
        if name == "finite_rank":
            return self.finite_rank(_numbers(args))
        return super()._make(name, args)


# ---------------------------------------------------------------- NC torus


def _ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


class NCTorusModel(SpectralModel):
    """Noncommutative torus: modes ``(k, s)``, ``k`` in Z^d, spinor ``s < N_d``.

    ``theta = 0`` is the flat commutative torus.
    """

    name = "nc_torus"

    GENERATORS = dict(SpectralModel.GENERATORS, u=(1, None), angular=(1, 1))

    def __init__(self, d=2, theta=None, max_modes=DEFAULT_MODE_CAP):
        super().__init__(max_modes)
        d = int(d)
        if d < 2:
            raise InvalidArgument("noncommutative torus needs d >= 2")
        theta = np.zeros((d, d)) if theta is None else np.asarray(theta, dtype=np.float64)
        if theta.ndim == 0 and d == 2:
            theta = np.array([[0.0, float(theta)], [-float(theta), 0.0]])
        if theta.shape != (d, d):
            raise InvalidArgument(f"theta must be a {d}x{d} matrix")
        if not np.array_equal(theta, -theta.T):
            raise InvalidArgument("theta must be antisymmetric")
        self.d = d
        self.theta = theta
        self.GENERATORS = dict(type(self).GENERATORS, u=(d, d))
        self.lattice_dim = d
        self.spinor_dim = 2 ** (d // 2)
        self.inner_size = self.spinor_dim
        self.dimension = float(d)

    def descriptor(self):
        return {"name": self.name, "d": self.d, "theta": self.theta.tolist()}

    def _lattice_points(self, radius):
        return self._box(radius)

    def _mode_keys(self, points):
        n2 = np.sum(points.astype(np.float64) ** 2, axis=1)
        return np.repeat(n2[:, None], self.inner_size, axis=1)

    def weyl_estimate(self, lam):
        return self.inner_size * _ball_volume(self.d) * (lam + math.sqrt(self.d)) ** self.d

    def u(self, *m):
        """Unitary ``u_m``: ``u_m e_k = exp(i/2 <m, theta k>) e_{m+k}``."""
        if len(m) == 1 and np.ndim(m[0]) == 1:
            m = tuple(m[0])
        if len(m) != self.d:
            raise InvalidArgument(f"u needs {self.d} integer arguments, got {len(m)}")
        m = np.array([int(v) for v in m], dtype=np.int64)
        theta = self.theta

        def phase(shift, labels):
            return np.exp(0.5j * (labels.astype(np.float64) @ (theta.T @ shift)))

        return Shift(
            self,
            [(m, 1.0)],
            f"u({', '.join(str(v) for v in m)})",
            phase=None if not np.any(theta) else phase,
            hermitian=not np.any(m),
        )

    def angular(self, g, g0=0.0, hermitian=None):
        """Diagonal ``g(k/|k|)``; ``g0`` is used at ``k = 0``."""
        if isinstance(g, SpherePolynomial):
            if g.dim != self.d:
                raise InvalidArgument("polynomial dimension does not match the torus")
            hermitian = g.is_real if hermitian is None else hermitian
        return Diagonal(
            self,
            lambda t: _sphere_values(g, g0, t.labels),
            f"angular({g!r})" if g0 == 0 else f"angular({g!r}, g0={g0!r})",
            hermitian=bool(hermitian),
        )

    def _make(self, name, args):
        if name == "u":
            return self.u(*[_integer(a) for a in args])
        if name == "angular":
            if not isinstance(args[0], SpherePolynomial):
                raise InvalidArgument("angular expects a polynomial in x1..xd")
            return self.angular(args[0])
        return super()._make(name, args)


# ---------------------------------------------------------------- almost-commutative


class AlmostCommutativeModel(SpectralModel):
    """Flat 2-torus times a finite triple: ``D = D_M (x) 1 + gamma_M (x) D_F``.

    Per momentum ``k`` the block ``(k_1 s_1 + k_2 s_2) (x) 1 + s_3 (x) D_F``
    is diagonalised numerically; modes are (k, block eigen-index).
    """

    name = "almost_commutative"
    lattice_dim = 2
    dimension = 2.0

    GENERATORS = dict(
        SpectralModel.GENERATORS, u=(2, 2), internal=(1, None), angular=(1, 1), proj_pos=(0, 0)
    )

    def __init__(self, dirac_f, max_modes=DEFAULT_MODE_CAP):
        super().__init__(max_modes)
        df = np.atleast_2d(np.asarray(dirac_f, dtype=np.complex128))
        if df.ndim != 2 or df.shape[0] != df.shape[1]:
            raise InvalidArgument("D_F must be a square matrix")
        if not np.allclose(df, df.conj().T, rtol=0, atol=1e-13):
            raise InvalidArgument("D_F must be hermitian")
        self.dirac_f = df
        self.m = df.shape[0]
        self.inner_size = 2 * self.m
        self.internal_eigenvalues = np.linalg.eigvalsh(df)
        mu = np.sort(self.internal_eigenvalues**2)
        self._mu_levels = np.unique(mu)
        self._mu2 = np.sort(np.concatenate([mu, mu]))
        self._max_internal = float(np.sqrt(mu.max())) if mu.size else 0.0
        self._block_lock = threading.Lock()

    def descriptor(self):
        return {
            "name": self.name,
            "dirac_f": {"re": self.dirac_f.real.tolist(), "im": self.dirac_f.imag.tolist()},
        }

    def _lattice_points(self, radius):
        return self._box(radius)

    def _mode_keys(self, points):
        n2 = np.sum(points.astype(np.float64) ** 2, axis=1)
        return n2[:, None] + self._mu2[None, :]

    def weyl_estimate(self, lam):
        return self.inner_size * math.pi * (lam + 1.5) ** 2

    def blocks(self, points):
        """Block matrices ``B_k`` for an array of momenta, shape (K, 2m, 2m)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        eye = np.eye(self.m)
        s1, s2 = np.kron(_SIGMA[0], eye), np.kron(_SIGMA[1], eye)
        s3 = np.kron(_SIGMA[2], self.dirac_f)
        return pts[:, 0, None, None] * s1 + pts[:, 1, None, None] * s2 + s3

    def _prepare_points(self, points):
        with self._block_lock:
            evals, evecs = np.linalg.eigh(self.blocks(points))
            n2 = np.sum(points.astype(np.float64) ** 2, axis=1)
            shifted = evals**2 - n2[:, None]
            level = np.argmin(np.abs(shifted[..., None] - self._mu_levels), axis=-1)
            err = np.abs(shifted - self._mu_levels[level])
            if np.any(err > 1e-8 * (1.0 + n2[:, None])):
                raise RuntimeError("block spectrum disagrees with |k|^2 + eig(D_F^2)")
            key = 2 * level + (evals > 0)
            order = np.argsort(key, axis=1, kind="stable")
            self.block_eigenvalues = np.take_along_axis(evals, order, axis=1)
            self.block_vectors = np.take_along_axis(evecs, order[:, None, :], axis=2)

    def signed_eigenvalues(self, n):
        t = self.modes(n)
        return self.block_eigenvalues[t.point, t.inner]

    def _block_operator(self, shift, op, label, hermitian, band):
        model = self

        class _Block(MatrixOracle):
            def _build(inner_self, n_rows, n_cols):
                table = model.modes(max(n_rows, n_cols))
                labels = table.labels[:n_cols]
                p = table.point[:n_cols]
                b = table.inner[:n_cols]
                q = model.lookup_point(labels + shift)
                ok = q >= 0
                cols = np.arange(n_cols, dtype=np.int64)[ok]
                vcol = model.block_vectors[p[ok], :, b[ok]]
                if op is not None:
                    vcol = vcol @ op.T
                vals = np.einsum("nab,na->nb", model.block_vectors[q[ok]].conj(), vcol)
                tgt_labels = labels[ok] + shift
                rows = np.stack(
                    [model.lookup(tgt_labels, bb) for bb in range(model.inner_size)], axis=1
                )
                keep = (rows >= 0) & (rows < n_rows)
                return sp.coo_matrix(
                    (vals[keep], (rows[keep], np.broadcast_to(cols[:, None], rows.shape)[keep])),
                    shape=(n_rows, n_cols),
                )

        return _Block(self, band, hermitian, label)

    def u(self, m1, m2):
        """Torus unitary ``u_m (x) 1`` in the block eigenbasis (theta = 0)."""
        shift = np.array([int(m1), int(m2)], dtype=np.int64)
        band = float(np.linalg.norm(shift)) + self._max_internal
        op = self._block_operator(
            shift, None, f"u({int(m1)}, {int(m2)})", not np.any(shift), band
        )
        op.key = op.label
        return op

    def internal(self, a_f):
        """``1 (x) a_F`` expressed in the block eigenbasis."""
        a = np.asarray(a_f, dtype=np.complex128)
        if a.ndim == 1:
            if a.size != self.m * self.m:
                raise InvalidArgument(f"internal needs {self.m * self.m} entries (row-major)")
            a = a.reshape(self.m, self.m)
        if a.shape != (self.m, self.m):
            raise InvalidArgument(f"internal needs an {self.m}x{self.m} matrix")
        op = np.kron(np.eye(2), a)
        herm = bool(np.allclose(a, a.conj().T, rtol=0, atol=0))
        out = self._block_operator(
            np.zeros(2, dtype=np.int64), op, "internal", herm, self._max_internal
        )
        out.key = ("internal", a.tobytes())
        return out

    def angular(self, g, g0=0.0, hermitian=None):
        if isinstance(g, SpherePolynomial):
            if g.dim != 2:
                raise InvalidArgument("polynomial dimension must be 2")
            hermitian = g.is_real if hermitian is None else hermitian
        return Diagonal(
            self, lambda t: _sphere_values(g, g0, t.labels), f"angular({g!r})" if g0 == 0 else f"angular({g!r}, g0={g0!r})", bool(hermitian)
        )

    def proj_pos(self):
        return Diagonal(
            self,
            lambda t: (self.block_eigenvalues[t.point, t.inner] >= -1e-12).astype(float),
            "proj_pos",
        )

    def _make(self, name, args):
        if name == "u":
            return self.u(*[_integer(a) for a in args])
        if name == "internal":
            return self.internal(_numbers(args))
        if name == "angular":
            if not isinstance(args[0], SpherePolynomial):
                raise InvalidArgument("angular expects a polynomial in x1, x2")
            return self.angular(args[0])
        if name == "proj_pos":
            return self.proj_pos()
        return super()._make(name, args)


# ---------------------------------------------------------------- factories


def circle_model(max_modes=DEFAULT_MODE_CAP):
    return CircleModel(max_modes=max_modes)


def toeplitz_model(max_modes=DEFAULT_MODE_CAP):
    return ToeplitzModel(max_modes=max_modes)


def nc_torus_model(d=2, theta=None, max_modes=DEFAULT_MODE_CAP):
    return NCTorusModel(d, theta, max_modes=max_modes)


def almost_commutative_model(dirac_f, base=None, max_modes=DEFAULT_MODE_CAP):
    """Almost-commutative product over the flat 2-torus.

    ``base``, if given, must be the flat two-dimensional torus model.
    """
    if base is not None:
        if not isinstance(base, NCTorusModel) or base.d != 2 or np.any(base.theta):
            raise InvalidArgument("almost-commutative base must be the flat 2-torus")
    return AlmostCommutativeModel(dirac_f, max_modes=max_modes)


def model_from_descriptor(desc):
    """Inverse of ``model.descriptor()``."""
    if isinstance(desc, str):
        desc = {"name": desc}
    name = desc.get("name")
    cap = desc.get("max_modes", DEFAULT_MODE_CAP)
    if name == "circle":
        return circle_model(cap)
    if name == "toeplitz":
        return toeplitz_model(cap)
    if name in ("nc_torus", "torus"):
        return nc_torus_model(desc.get("d", 2), desc.get("theta"), cap)
    if name in ("almost_commutative", "ac"):
        df = desc.get("dirac_f")
        if df is None:
            raise InvalidArgument("almost_commutative descriptor needs dirac_f")
        if isinstance(df, dict):
            df = np.asarray(df["re"], dtype=float) + 1j * np.asarray(df.get("im", 0.0), dtype=float)
        return almost_commutative_model(df, max_modes=cap)
    raise InvalidArgument(f"unknown model {name!r}")


def commutator_norm_check(model, A, lam):
    """Operator norm of ``P_lambda [|D|, A] P_lambda``."""
    n = model.counting(lam)
    if n == 0:
        return 0.0
    lam_k = model.modes(n).lam
    mat = A.matrix(n, n).tocoo()
    vals = (lam_k[mat.row] - lam_k[mat.col]) * mat.data
    comm = sp.coo_matrix((vals, (mat.row, mat.col)), shape=(n, n)).toarray()
    return float(np.linalg.norm(comm, 2))


def commutator_ladder(model, A, ladder, growth_tol=0.1):
    """Commutator norms over a cutoff ladder and whether they stay bounded.

    ``bounded`` is False when the last norm exceeds the first nonzero one by
    more than ``growth_tol`` relative.
    """
    norms = [commutator_norm_check(model, A, lam) for lam in ladder]
    ref = next((v for v in norms if v > 0), 0.0)
    bounded = ref == 0.0 or norms[-1] <= ref * (1 + growth_tol)
    return norms, bool(bounded)
