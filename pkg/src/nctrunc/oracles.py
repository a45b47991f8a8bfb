"""Matrix-entry oracles for bounded operators in the eigenbasis of |D|.

An oracle knows the matrix entries ``<e_j, A e_k>`` where ``e_j`` runs over
the model's global mode order.  Entries are materialised as sparse blocks
over prefixes of that order, so ``matrix(n, n)`` is exactly ``Q_n A Q_n``.

``band`` is a *spectral* bandwidth: ``<e_j, A e_k> = 0`` whenever
``|lambda_j - lambda_k| > band``.  It bounds the intermediate modes a
product needs, which keeps compositions exact under truncation.
"""

from collections import Counter

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, UnsupportedOperator

# slack added when turning a spectral band into a mode count
_BAND_SLACK = 1e-9


class MatrixOracle:
    """Base class; subclasses implement :meth:`_build`."""

    def __init__(self, model, band, hermitian, label):
        self.model = model
        self.band = None if band is None else float(band)
        self.hermitian = bool(hermitian)
        self.label = label
        # structural identity for generators; lets sums detect adjoint pairs
        self.key = None
        self._cache = {}

    def __repr__(self):
        return f"<{type(self).__name__} {self.label} band={self.band}>"

    # -- materialisation -------------------------------------------------

    def _build(self, n_rows, n_cols):
        raise NotImplementedError

    def matrix(self, n_rows, n_cols=None):
        """Sparse CSR block of rows ``< n_rows`` and columns ``< n_cols``."""
        n_cols = n_rows if n_cols is None else n_cols
        n_rows, n_cols = int(n_rows), int(n_cols)
        if n_rows < 0 or n_cols < 0:
            raise InvalidArgument("block sizes must be non-negative")
        key = (n_rows, n_cols)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if n_rows == 0 or n_cols == 0:
            out = sp.csr_matrix((n_rows, n_cols), dtype=np.complex128)
        else:
            out = sp.csr_matrix(self._build(n_rows, n_cols), dtype=np.complex128)
            out.sum_duplicates()
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = out
        return out

    def dense(self, n_rows, n_cols=None):
        return self.matrix(n_rows, n_cols).toarray()

    def diagonal(self, n):
        """Diagonal entries ``<e_k, A e_k>`` for ``k < n``."""
        return np.asarray(self.matrix(n, n).diagonal(), dtype=np.complex128)

    def entries(self, rows, cols):
        """Vectorised entry lookup for index arrays ``rows``, ``cols``."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size == 0:
            return np.zeros(rows.shape, dtype=np.complex128)
        block = self.matrix(int(rows.max()) + 1, int(cols.max()) + 1)
        return np.asarray(block[rows.ravel(), cols.ravel()]).reshape(rows.shape)

    def entry(self, j, k):
        return complex(self.entries(np.array([j]), np.array([k]))[0])

    def reach(self, n):
        """Number of leading modes that can couple to the first ``n`` modes."""
        if self.band is None:
            raise UnsupportedOperator(f"operator {self.label} has no finite band")
        if n == 0:
            return 0
        top = self.model.lam_at(n - 1)
        return max(n, self.model.counting(top + self.band + _BAND_SLACK))

    # -- algebra ---------------------------------------------------------

    def __add__(self, other):
        return Sum.of(self.model, [(1.0, self), (1.0, _coerce(self.model, other))])

    def __radd__(self, other):
        return Sum.of(self.model, [(1.0, _coerce(self.model, other)), (1.0, self)])

    def __sub__(self, other):
        return Sum.of(self.model, [(1.0, self), (-1.0, _coerce(self.model, other))])

    def __rsub__(self, other):
        return Sum.of(self.model, [(1.0, _coerce(self.model, other)), (-1.0, self)])

    def __neg__(self):
        return Sum.of(self.model, [(-1.0, self)])

    def __mul__(self, other):
        if np.isscalar(other):
            return Sum.of(self.model, [(complex(other), self)])
        return Product(self, other)

    def __rmul__(self, other):
        if np.isscalar(other):
            return Sum.of(self.model, [(complex(other), self)])
        return Product(other, self)

    def adjoint(self):
        if self.hermitian:
            return self
        return Adjoint(self)

    def power(self, p):
        p = int(p)
        if p < 0:
            raise InvalidArgument("operator powers must be non-negative")
        if p == 0:
            return Identity(self.model)
        if p == 1:
            return self
        out = self
        for _ in range(p - 1):
            out = Product(out, self)
        out.hermitian = self.hermitian
        out.label = f"pow({self.label},{p})"
        return out


def _coerce(model, other):
    if isinstance(other, MatrixOracle):
        if other.model is not model:
            raise InvalidArgument("operators belong to different models")
        return other
    if np.isscalar(other):
        return Sum.of(model, [(complex(other), Identity(model))])
    raise InvalidArgument(f"cannot combine operator with {type(other).__name__}")


class Diagonal(MatrixOracle):
    """Operator diagonal in the eigenbasis, values computed from the mode table."""

    def __init__(self, model, values_fn, label, hermitian=True):
        super().__init__(model, 0.0, hermitian, label)
        # labels of diagonal generators spell out all their parameters
        self.key = label
        self._values_fn = values_fn

    def diagonal(self, n):
        table = self.model.modes(n)
        return np.asarray(self._values_fn(table), dtype=np.complex128)

    def _build(self, n_rows, n_cols):
        n = min(n_rows, n_cols)
        return sp.dia_matrix(
            (self.diagonal(n)[None, :], [0]), shape=(n_rows, n_cols)
        )


class Identity(Diagonal):
    def __init__(self, model):
        super().__init__(model, lambda t: np.ones(len(t)), "id", hermitian=True)


def _adjoint_key(op):
    if op.key is None:
        return None
    if op.hermitian:
        return op.key
    if isinstance(op.key, tuple) and op.key[0] == "adj":
        return op.key[1]
    return ("adj", op.key)


def _self_adjoint_terms(terms):
    if all(t.hermitian and complex(c).imag == 0 for c, t in terms):
        return True
    if any(t.key is None for _, t in terms):
        return False
    mine = Counter((complex(c), t.key) for c, t in terms)
    flipped = Counter((complex(c).conjugate(), _adjoint_key(t)) for c, t in terms)
    return mine == flipped


class Sum(MatrixOracle):
    """Linear combination ``sum_i c_i A_i``."""

    def __init__(self, model, terms):
        bands = [t.band for _, t in terms]
        band = None if any(b is None for b in bands) else max(bands, default=0.0)
        herm = _self_adjoint_terms(terms)
        label = " + ".join(f"{complex(c)}*{t.label}" for c, t in terms)
        super().__init__(model, band, herm, label)
        self.terms = [(complex(c), t) for c, t in terms]

    @classmethod
    def of(cls, model, terms):
        flat = []
        for c, t in terms:
            if isinstance(t, Sum):
                flat.extend((c * c2, t2) for c2, t2 in t.terms)
            else:
                flat.append((c, t))
        return cls(model, flat)

    def diagonal(self, n):
        out = np.zeros(n, dtype=np.complex128)
        for c, t in self.terms:
            out += c * t.diagonal(n)
        return out

    def _build(self, n_rows, n_cols):
        out = sp.csr_matrix((n_rows, n_cols), dtype=np.complex128)
        for c, t in self.terms:
            out = out + c * t.matrix(n_rows, n_cols)
        return out


class Product(MatrixOracle):
    """Composition ``A B`` evaluated exactly through band-limited intermediates."""

    def __init__(self, left, right):
        if left.model is not right.model:
            raise InvalidArgument("operators belong to different models")
        band = None if left.band is None or right.band is None else left.band + right.band
        herm = isinstance(right, Adjoint) and right.base is left
        herm = herm or (isinstance(left, Adjoint) and left.base is right)
        herm = herm or (left is right and left.hermitian)
        super().__init__(left.model, band, herm, f"{left.label}*{right.label}")
        self.left = left
        self.right = right

    def _mid(self, n_rows, n_cols):
        lb, rb = self.left.band, self.right.band
        if lb is None and rb is None:
            raise UnsupportedOperator(
                f"product {self.label} of two unbanded operators cannot be truncated exactly"
            )
        bounds = []
        if lb is not None:
            bounds.append(self.model.lam_at(n_rows - 1) + lb)
        if rb is not None:
            bounds.append(self.model.lam_at(n_cols - 1) + rb)
        return self.model.counting(min(bounds) + _BAND_SLACK)

    def _build(self, n_rows, n_cols):
        mid = self._mid(n_rows, n_cols)
        return self.left.matrix(n_rows, mid) @ self.right.matrix(mid, n_cols)

    def diagonal(self, n):
        if n == 0:
            return np.zeros(0, dtype=np.complex128)
        mid = self._mid(n, n)
        a = self.left.matrix(n, mid)
        b = self.right.matrix(mid, n)
        return np.asarray(a.multiply(b.T.tocsr()).sum(axis=1)).ravel().astype(np.complex128)


class Adjoint(MatrixOracle):
    def __init__(self, base):
        super().__init__(base.model, base.band, base.hermitian, f"adj({base.label})")
        self.base = base
        if base.key is not None:
            self.key = _adjoint_key(base)

    def adjoint(self):
        return self.base

    def diagonal(self, n):
        return np.conj(self.base.diagonal(n))

    def _build(self, n_rows, n_cols):
        return self.base.matrix(n_cols, n_rows).conj().T


class Explicit(MatrixOracle):
    """Operator given by a finite matrix on the first ``size`` modes.

    Outside that block every entry is zero; no band is claimed unless given.
    """

    def __init__(self, model, matrix, label="explicit", band=None, hermitian=None):
        mat = np.asarray(matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidArgument("explicit operator needs a square matrix")
        if hermitian is None:
            hermitian = bool(np.allclose(mat, mat.conj().T, rtol=0, atol=1e-14))
        super().__init__(model, band, hermitian, label)
        self._mat = mat

    @property
    def size(self):
        return self._mat.shape[0]

    def _build(self, n_rows, n_cols):
        out = np.zeros((n_rows, n_cols), dtype=np.complex128)
        r, c = min(n_rows, self.size), min(n_cols, self.size)
        out[:r, :c] = self._mat[:r, :c]
        return sp.csr_matrix(out)
