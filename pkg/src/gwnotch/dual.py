"""Forward-mode dual numbers over numpy arrays.

A :class:`Dual` holds a value array ``val`` and a stack of directional
derivatives ``der`` whose leading axis indexes the direction, so
``der.shape == (nd,) + val.shape``.  With ``nd == 0`` the class degrades to
plain value arithmetic, which is how the forward pass runs when no Jacobian
is requested.

Only the operations the simulator needs are provided.  Linear solves reuse
one LU factorization for the value and all derivative directions.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

__all__ = [
    "Dual",
    "DualScalar",
    "lift",
    "value",
    "derivative",
    "solve",
    "inv",
    "bsolve",
    "binv",
    "lyap",
    "stack",
    "block",
    "apply_linear",
    "exp",
    "sqrt",
    "sin",
    "cos",
    "log",
    "absolute",
]


class Dual:
    """Value plus ``nd`` directional derivatives.

    Parameters
    ----------
    val : array_like
        The primal value.
    der : array_like, optional
        Derivatives, shape ``(nd,) + val.shape``.  Defaults to zero
        derivatives in ``nd`` directions.
    nd : int, optional
        Number of directions when ``der`` is omitted.
    """

    __array_priority__ = 1000  # make ndarray defer to our reflected ops

    def __init__(self, val, der=None, nd: int = 0):
        val = np.asarray(val)
        if der is None:
            der = np.zeros((nd,) + val.shape, dtype=val.dtype)
        else:
            der = np.asarray(der)
            if der.shape[1:] != val.shape:
                der = np.broadcast_to(der, (der.shape[0],) + val.shape).copy()
        self.val = val
        self.der = der

    # -- basic protocol --------------------------------------------------
    @property
    def nd(self) -> int:
        return self.der.shape[0]

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def dtype(self):
        return np.result_type(self.val, self.der)

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Dual(val={self.val!r}, der={self.der!r})"

    def copy(self) -> "Dual":
        return Dual(self.val.copy(), self.der.copy())

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Dual(self.val[key], self.der[(slice(None),) + key])

    def __setitem__(self, key, other):
        if not isinstance(key, tuple):
            key = (key,)
        o = lift(other, self.nd)
        self._promote(o.dtype)
        if not self.der.flags.writeable:
            self.der = self.der.copy()
        self.val[key] = o.val
        self.der[(slice(None),) + key] = o.der

    def _promote(self, dtype):
        dt = np.result_type(self.val.dtype, dtype)
        if dt != self.val.dtype:
            self.val = self.val.astype(dt)
            self.der = self.der.astype(dt)

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            val = self.val + other.val
            return Dual(val, _bd(self, val.ndim) + _bd(other, val.ndim))
        other = np.asarray(other)
        val = self.val + other
        return Dual(val, np.broadcast_to(_bd(self, val.ndim), (self.nd,) + val.shape))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Dual) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            nd_ = len(np.broadcast_shapes(self.shape, other.shape))
            return Dual(self.val * other.val, _bd(self, nd_) * other.val + self.val * _bd(other, nd_))
        other = np.asarray(other)
        val = self.val * other
        return Dual(val, _bd(self, val.ndim) * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            return Dual(q, (_bd(self, q.ndim) - q * _bd(other, q.ndim)) / other.val)
        other = np.asarray(other)
        val = self.val / other
        return Dual(val, _bd(self, val.ndim) / other)

    def __rtruediv__(self, other):
        other = np.asarray(other)
        q = other / self.val
        return Dual(q, -q * _bd(self, q.ndim) / self.val)

    def __pow__(self, n):
        if isinstance(n, Dual):
            return exp(n * log(self))
        n = float(n) if np.isscalar(n) else np.asarray(n)
        return Dual(self.val**n, n * self.val ** (n - 1) * self.der)

    def __rpow__(self, base):
        return exp(self * np.log(base))

    def __matmul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val @ other.val, _mm_der(self.der, other.val) + _mm_left(self.val, other.der))
        other = np.asarray(other)
        return Dual(self.val @ other, _mm_der(self.der, other))

    def __rmatmul__(self, other):
        other = np.asarray(other)
        return Dual(other @ self.val, _mm_left(other, self.der))

    # -- structural ------------------------------------------------------
    @property
    def T(self) -> "Dual":
        if self.ndim < 2:
            return self
        return Dual(np.swapaxes(self.val, -1, -2), np.swapaxes(self.der, -1, -2))

    def conj(self) -> "Dual":
        return Dual(np.conj(self.val), np.conj(self.der))

    @property
    def H(self) -> "Dual":
        return self.T.conj()

    @property
    def real(self) -> "Dual":
        return Dual(self.val.real, self.der.real)

    @property
    def imag(self) -> "Dual":
        return Dual(self.val.imag, self.der.imag)

    def reshape(self, *shape) -> "Dual":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        v = self.val.reshape(shape)
        return Dual(v, self.der.reshape((self.nd,) + v.shape))

    def sum(self, axis=None) -> "Dual":
        if axis is None:
            return Dual(self.val.sum(), self.der.reshape(self.nd, -1).sum(axis=1))
        ax = axis if axis < 0 else axis + 1
        return Dual(self.val.sum(axis=axis), self.der.sum(axis=ax))

    def astype(self, dtype) -> "Dual":
        return Dual(self.val.astype(dtype), self.der.astype(dtype))

    def drop(self) -> "Dual":
        """Same value, no derivative directions."""
        return Dual(self.val, np.zeros((0,) + self.val.shape, dtype=self.val.dtype))


DualScalar = Dual  # a Dual whose value is 0-d


def _bd(x: Dual, ndim: int):
    # derivative stack with value axes left-padded to ``ndim`` for broadcasting
    pad = ndim - x.ndim
    if pad <= 0:
        return x.der
    return x.der.reshape((x.nd,) + (1,) * pad + x.shape)


def _mm_der(der, b):
    # der: (nd, ..., m) or (nd, m);  b: (m,) or (m, k)
    return der @ b


def _mm_left(a, der):
    # a @ der for each direction, with a 1-D right operand handled explicitly
    if der.ndim == 2:  # right operand was a vector
        if np.ndim(a) == 1:
            return der @ a
        return (a @ der[..., None])[..., 0]
    return a @ der


# ---------------------------------------------------------------------------
# helpers


def lift(x, nd: int = 0) -> Dual:
    """Wrap a constant as a Dual with zero derivatives."""
    if isinstance(x, Dual):
        return x
    return Dual(np.asarray(x), nd=nd)


def value(x):
    return x.val if isinstance(x, Dual) else np.asarray(x)


def derivative(x, nd: int):
    if isinstance(x, Dual):
        return x.der
    x = np.asarray(x)
    return np.zeros((nd,) + x.shape, dtype=x.dtype)


def _nd_of(*xs) -> int:
    nds = {x.nd for x in xs if isinstance(x, Dual)}
    if len(nds) > 1:
        raise ValueError(f"mismatched derivative directions {sorted(nds)}")
    return nds.pop() if nds else 0


def apply_linear(fn, x):
    """Apply a linear map ``fn`` (acting on trailing axes) to value and derivatives."""
    if not isinstance(x, Dual):
        return fn(np.asarray(x))
    v = fn(x.val)
    if x.nd == 0:
        return Dual(v, np.zeros((0,) + v.shape, dtype=v.dtype))
    return Dual(v, np.stack([fn(d) for d in x.der]))


def stack(items, axis: int = 0) -> Dual:
    nd = _nd_of(*items)
    items = [lift(i, nd) for i in items]
    ax = axis if axis < 0 else axis + 1
    return Dual(np.stack([i.val for i in items], axis=axis), np.stack([i.der for i in items], axis=ax))


def block(rows) -> Dual:
    """Dual analogue of ``np.block`` for a 2-D list of 2-D blocks."""
    nd = _nd_of(*(b for r in rows for b in r))
    rows = [[lift(b, nd) for b in r] for r in rows]
    val = np.block([[b.val for b in r] for r in rows])
    if nd == 0:
        return Dual(val, np.zeros((0,) + val.shape, dtype=val.dtype))
    der = np.stack([np.block([[b.der[k] for b in r] for r in rows]) for k in range(nd)])
    return Dual(val, der)


def exp(x):
    if not isinstance(x, Dual):
        return np.exp(x)
    e = np.exp(x.val)
    return Dual(e, e * x.der)


def log(x):
    if not isinstance(x, Dual):
        return np.log(x)
    return Dual(np.log(x.val), x.der / x.val)


def sqrt(x):
    if not isinstance(x, Dual):
        return np.sqrt(x)
    r = np.sqrt(x.val)
    return Dual(r, x.der / (2 * r))


def sin(x):
    if not isinstance(x, Dual):
        return np.sin(x)
    return Dual(np.sin(x.val), np.cos(x.val) * x.der)


def cos(x):
    if not isinstance(x, Dual):
        return np.cos(x)
    return Dual(np.cos(x.val), -np.sin(x.val) * x.der)


def absolute(x, floor: float = 0.0):
    """Modulus of a (complex) Dual; derivative ``Re(conj(a) a') / |a|``.

    Entries with ``|a| <= floor`` get a zero derivative.
    """
    if not isinstance(x, Dual):
        return np.abs(x)
    m = np.abs(x.val)
    safe = m > floor
    denom = np.where(safe, m, 1.0)
    d = np.real(np.conj(x.val) * x.der) / denom
    return Dual(m, np.where(safe, d, 0.0))


def solve(a, b):
    """Solve ``a @ x = b`` with one factorization for every direction."""
    nd = _nd_of(a, b)
    av, bv = value(a), value(b)
    lu = sla.lu_factor(av, check_finite=False)
    x = sla.lu_solve(lu, bv, check_finite=False)
    if nd == 0:
        return Dual(x, np.zeros((0,) + x.shape, dtype=x.dtype)) if isinstance(a, Dual) or isinstance(b, Dual) else x
    rhs = derivative(b, nd).astype(np.result_type(x, derivative(b, nd)), copy=True)
    if isinstance(a, Dual):
        rhs = rhs - a.der @ x if x.ndim == 2 else rhs - (a.der @ x)
    dx = np.stack([sla.lu_solve(lu, r, check_finite=False) for r in rhs])
    return Dual(x, dx)


def inv(a):
    n = value(a).shape[0]
    return solve(a, np.eye(n))


def bsolve(a, b):
    """Batched ``solve`` over leading axes (``a``: ``(..., n, n)``, ``b``: ``(..., n, k)``)."""
    nd = _nd_of(a, b)
    av, bv = value(a), value(b)
    x = np.linalg.solve(av, bv)
    if nd == 0:
        return Dual(x, np.zeros((0,) + x.shape, dtype=x.dtype))
    rhs = derivative(b, nd) - (a.der @ x if isinstance(a, Dual) else 0)
    k = x.shape[-1]
    # stack the directions as extra right-hand-side columns
    r = np.moveaxis(rhs, 0, -2).reshape(x.shape[:-1] + (nd * k,))
    dx = np.linalg.solve(av, r).reshape(x.shape[:-1] + (nd, k))
    return Dual(x, np.moveaxis(dx, -2, 0))


def binv(a):
    """Batched inverse; derivative ``-X da X``."""
    av = value(a)
    x = np.linalg.inv(av)
    if not isinstance(a, Dual):
        return x
    return Dual(x, -(x @ a.der @ x))


def lyap(a, q):
    """Solve ``a x + x a^T = q`` (real or complex, transpose not adjoint).

    The value comes from the Bartels-Stewart solver in scipy; the
    derivatives solve the same equation with right-hand side
    ``dq - da x - x da^T``.
    """
    nd = _nd_of(a, q)
    av, qv = value(a), value(q)
    x = _lyap_value(av, qv)
    if nd == 0:
        if isinstance(a, Dual) or isinstance(q, Dual):
            return Dual(x, np.zeros((0,) + x.shape, dtype=x.dtype))
        return x
    dq = derivative(q, nd)
    da = derivative(a, nd)
    dx = np.stack([_lyap_value(av, dq[k] - da[k] @ x - x @ da[k].T) for k in range(nd)])
    return Dual(x, dx)


def _lyap_value(a, q):
    # scipy's solver uses a^H; for real a the two coincide
    if np.iscomplexobj(a):
        return sla.solve_sylvester(a, a.T, q)
    return sla.solve_continuous_lyapunov(a, q)
