"""Pure-Python secp256k1 kernel.

Same surface as the compiled ``_ecext`` module. Points cross the boundary
as affine ``(x, y)`` int tuples, the identity as ``None``.
"""

P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

BACKEND = "pure"

_WINDOW = 4
_DIGITS = 256 // _WINDOW
_JINF = (0, 1, 0)


def _dbl(X1, Y1, Z1):
    if Z1 == 0 or Y1 == 0:
        return _JINF
    YY = Y1 * Y1 % P
    S = 4 * X1 * YY % P
    M = 3 * X1 * X1 % P
    X3 = (M * M - 2 * S) % P
    Y3 = (M * (S - X3) - 8 * YY * YY) % P
    Z3 = 2 * Y1 * Z1 % P
    return X3, Y3, Z3


def _add_mixed(X1, Y1, Z1, x2, y2):
    if Z1 == 0:
        return x2, y2, 1
    Z1Z1 = Z1 * Z1 % P
    U2 = x2 * Z1Z1 % P
    S2 = y2 * Z1 * Z1Z1 % P
    H = (U2 - X1) % P
    R = (S2 - Y1) % P
    if H == 0:
        if R == 0:
            return _dbl(X1, Y1, Z1)
        return _JINF
    HH = H * H % P
    HHH = H * HH % P
    V = X1 * HH % P
    X3 = (R * R - HHH - 2 * V) % P
    Y3 = (R * (V - X3) - Y1 * HHH) % P
    Z3 = Z1 * H % P
    return X3, Y3, Z3


def _to_affine(X, Y, Z):
    if Z == 0:
        return None
    zi = pow(Z, -1, P)
    zi2 = zi * zi % P
    return X * zi2 % P, Y * zi2 * zi % P


def _batch_affine(points):
    """Normalize Jacobian points (none at infinity) with one inversion."""
    acc = [1] * len(points)
    run = 1
    for i, (_, _, Z) in enumerate(points):
        acc[i] = run
        run = run * Z % P
    inv = pow(run, -1, P)
    out = [None] * len(points)
    for i in range(len(points) - 1, -1, -1):
        X, Y, Z = points[i]
        zi = inv * acc[i] % P
        inv = inv * Z % P
        zi2 = zi * zi % P
        out[i] = (X * zi2 % P, Y * zi2 * zi % P)
    return out


def _window_table(x, y):
    # [1..15]*A in affine form; A must have order N so no entry is infinity.
    pts = [(x, y, 1)]
    for _ in range(2, 1 << _WINDOW):
        X, Y, Z = pts[-1]
        pts.append(_add_mixed(X, Y, Z, x, y))
    return _batch_affine(pts)


_base_table = None


def _get_base_table():
    global _base_table
    if _base_table is None:
        rows = []
        bx, by = GX, GY
        for _ in range(_DIGITS):
            row = _window_table(bx, by)
            rows.append(row)
            X, Y, Z = bx, by, 1
            for _ in range(_WINDOW):
                X, Y, Z = _dbl(X, Y, Z)
            bx, by = _to_affine(X, Y, Z)
        _base_table = rows
    return _base_table


def on_curve(x, y):
    return 0 <= x < P and 0 <= y < P and (y * y - x * x * x - 7) % P == 0


def mul_base(k):
    k %= N
    if k == 0:
        return None
    table = _get_base_table()
    X, Y, Z = _JINF
    i = 0
    while k:
        d = k & 15
        if d:
            x2, y2 = table[i][d - 1]
            X, Y, Z = _add_mixed(X, Y, Z, x2, y2)
        k >>= _WINDOW
        i += 1
    return _to_affine(X, Y, Z)


def mul(k, pt):
    if pt is None:
        return None
    k %= N
    if k == 0:
        return None
    x, y = pt
    if x == GX and y == GY:
        return mul_base(k)
    table = _window_table(x, y)
    X, Y, Z = _JINF
    for shift in range(252, -1, -_WINDOW):
        if Z:
            for _ in range(_WINDOW):
                X, Y, Z = _dbl(X, Y, Z)
        d = (k >> shift) & 15
        if d:
            x2, y2 = table[d - 1]
            X, Y, Z = _add_mixed(X, Y, Z, x2, y2)
    return _to_affine(X, Y, Z)


def add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    X, Y, Z = _add_mixed(a[0], a[1], 1, b[0], b[1])
    return _to_affine(X, Y, Z)
