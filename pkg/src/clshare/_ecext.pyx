# cython: language_level=3, boundscheck=False, wraparound=False
"""GMP-backed secp256k1 kernel; mirrors ``_ecpure`` exactly."""

from libc.stdlib cimport malloc, free

cdef extern from "gmp.h":
    ctypedef struct __mpz_struct:
        pass
    ctypedef __mpz_struct mpz_t[1]
    ctypedef __mpz_struct *mpz_ptr
    void mpz_init(mpz_t)
    void mpz_clear(mpz_t)
    void mpz_set(mpz_t, const mpz_t)
    void mpz_set_ui(mpz_t, unsigned long)
    void mpz_add(mpz_t, const mpz_t, const mpz_t)
    void mpz_sub(mpz_t, const mpz_t, const mpz_t)
    void mpz_mul(mpz_t, const mpz_t, const mpz_t)
    void mpz_mul_ui(mpz_t, const mpz_t, unsigned long)
    void mpz_mod(mpz_t, const mpz_t, const mpz_t)
    int mpz_invert(mpz_t, const mpz_t, const mpz_t)
    int mpz_sgn(const mpz_t)
    int mpz_cmp(const mpz_t, const mpz_t)
    void mpz_import(mpz_t, size_t, int, size_t, int, size_t, const void *)
    void *mpz_export(void *, size_t *, int, size_t, int, size_t, const mpz_t)

from clshare._ecpure import P as _P, N as _N, GX as _GX, GY as _GY

BACKEND = "gmp"
P = _P
N = _N
GX = _GX
GY = _GY

cdef enum:
    WINDOW = 4
    DIGITS = 64
    TSIZE = 15

cdef mpz_t FP
cdef mpz_t t0, t1, t2, t3, t4, t5, t6, t7

# Jacobian point
cdef struct jpt:
    __mpz_struct X
    __mpz_struct Y
    __mpz_struct Z


cdef inline void _from_int(mpz_ptr z, object v):
    cdef bytes b = int(v).to_bytes(32, "big")
    mpz_import(z, 32, 1, 1, 1, 0, <const char *>b)


cdef object _to_int(mpz_ptr z):
    cdef unsigned char buf[32]
    cdef size_t count = 0
    cdef int i
    for i in range(32):
        buf[i] = 0
    if mpz_sgn(z) == 0:
        return 0
    mpz_export(buf, &count, 1, 1, 1, 0, z)
    return int.from_bytes((<char *>buf)[:count], "big")


cdef inline void jinit(jpt *a):
    mpz_init(&a.X)
    mpz_init(&a.Y)
    mpz_init(&a.Z)


cdef inline void jclear(jpt *a):
    mpz_clear(&a.X)
    mpz_clear(&a.Y)
    mpz_clear(&a.Z)


cdef inline void jset_inf(jpt *a):
    mpz_set_ui(&a.X, 0)
    mpz_set_ui(&a.Y, 1)
    mpz_set_ui(&a.Z, 0)


cdef inline void mulmod(mpz_ptr r, mpz_ptr a, mpz_ptr b):
    mpz_mul(r, a, b)
    mpz_mod(r, r, FP)


cdef void jdbl(jpt *a):
    # in place; a=0 curve
    if mpz_sgn(&a.Z) == 0 or mpz_sgn(&a.Y) == 0:
        jset_inf(a)
        return
    mulmod(t0, &a.Y, &a.Y)              # YY
    mulmod(t1, &a.X, t0)                # X*YY
    mpz_mul_ui(t1, t1, 4)
    mpz_mod(t1, t1, FP)                 # S
    mulmod(t2, &a.X, &a.X)
    mpz_mul_ui(t2, t2, 3)
    mpz_mod(t2, t2, FP)                 # M
    mulmod(t3, t2, t2)
    mpz_sub(t3, t3, t1)
    mpz_sub(t3, t3, t1)
    mpz_mod(t3, t3, FP)                 # X3
    mulmod(t4, t0, t0)
    mpz_mul_ui(t4, t4, 8)               # 8*YY^2
    mpz_sub(t5, t1, t3)
    mpz_mul(t5, t2, t5)
    mpz_sub(t5, t5, t4)
    mpz_mod(t5, t5, FP)                 # Y3
    mulmod(t6, &a.Y, &a.Z)
    mpz_mul_ui(t6, t6, 2)
    mpz_mod(&a.Z, t6, FP)
    mpz_set(&a.X, t3)
    mpz_set(&a.Y, t5)


cdef void jadd_mixed(jpt *a, mpz_ptr x2, mpz_ptr y2):
    # in place: a += (x2, y2)
    if mpz_sgn(&a.Z) == 0:
        mpz_set(&a.X, x2)
        mpz_set(&a.Y, y2)
        mpz_set_ui(&a.Z, 1)
        return
    mulmod(t0, &a.Z, &a.Z)              # Z1Z1
    mulmod(t1, x2, t0)                  # U2
    mulmod(t2, &a.Z, t0)
    mulmod(t2, y2, t2)                  # S2
    mpz_sub(t3, t1, &a.X)
    mpz_mod(t3, t3, FP)                 # H
    mpz_sub(t4, t2, &a.Y)
    mpz_mod(t4, t4, FP)                 # R
    if mpz_sgn(t3) == 0:
        if mpz_sgn(t4) == 0:
            jdbl(a)
        else:
            jset_inf(a)
        return
    mulmod(t5, t3, t3)                  # HH
    mulmod(t6, t3, t5)                  # HHH
    mulmod(t7, &a.X, t5)                # V
    mulmod(t0, t4, t4)
    mpz_sub(t0, t0, t6)
    mpz_sub(t0, t0, t7)
    mpz_sub(t0, t0, t7)
    mpz_mod(t0, t0, FP)                 # X3
    mpz_sub(t1, t7, t0)
    mpz_mul(t1, t4, t1)
    mpz_mul(t2, &a.Y, t6)
    mpz_sub(t1, t1, t2)
    mpz_mod(&a.Y, t1, FP)               # Y3
    mulmod(&a.Z, &a.Z, t3)
    mpz_set(&a.X, t0)


cdef object jto_affine(jpt *a):
    if mpz_sgn(&a.Z) == 0:
        return None
    mpz_invert(t0, &a.Z, FP)
    mulmod(t1, t0, t0)
    mulmod(t2, &a.X, t1)
    mulmod(t1, t1, t0)
    mulmod(t3, &a.Y, t1)
    return (_to_int(t2), _to_int(t3))


cdef void jnormalize(jpt *a):
    # affine in place (Z := 1); a must not be infinity
    mpz_invert(t0, &a.Z, FP)
    mulmod(t1, t0, t0)
    mulmod(&a.X, &a.X, t1)
    mulmod(t1, t1, t0)
    mulmod(&a.Y, &a.Y, t1)
    mpz_set_ui(&a.Z, 1)


cdef void build_row(jpt *row, mpz_ptr x, mpz_ptr y):
    # row[j] = (j+1)*(x, y), affine
    cdef int j
    mpz_set(&row[0].X, x)
    mpz_set(&row[0].Y, y)
    mpz_set_ui(&row[0].Z, 1)
    for j in range(1, TSIZE):
        mpz_set(&row[j].X, &row[j - 1].X)
        mpz_set(&row[j].Y, &row[j - 1].Y)
        mpz_set(&row[j].Z, &row[j - 1].Z)
        jadd_mixed(&row[j], x, y)
        jnormalize(&row[j])


cdef jpt *BASE = NULL
cdef jpt VTAB[TSIZE]
cdef jpt ACC
cdef mpz_t KX, KY


cdef void _init_module():
    global BASE
    cdef int i, j
    mpz_init(FP)
    mpz_init(t0); mpz_init(t1); mpz_init(t2); mpz_init(t3)
    mpz_init(t4); mpz_init(t5); mpz_init(t6); mpz_init(t7)
    mpz_init(KX); mpz_init(KY)
    _from_int(FP, _P)
    jinit(&ACC)
    for j in range(TSIZE):
        jinit(&VTAB[j])
    BASE = <jpt *>malloc(DIGITS * TSIZE * sizeof(jpt))
    for i in range(DIGITS * TSIZE):
        jinit(&BASE[i])
    _from_int(KX, _GX)
    _from_int(KY, _GY)
    for i in range(DIGITS):
        build_row(&BASE[i * TSIZE], KX, KY)
        mpz_set(&ACC.X, KX)
        mpz_set(&ACC.Y, KY)
        mpz_set_ui(&ACC.Z, 1)
        for j in range(WINDOW):
            jdbl(&ACC)
        jnormalize(&ACC)
        mpz_set(KX, &ACC.X)
        mpz_set(KY, &ACC.Y)


_init_module()


def on_curve(x, y):
    return 0 <= x < _P and 0 <= y < _P and (y * y - x * x * x - 7) % _P == 0


def mul_base(k):
    cdef int i = 0, d
    k %= _N
    if k == 0:
        return None
    jset_inf(&ACC)
    while k:
        d = k & 15
        if d:
            jadd_mixed(&ACC, &BASE[i * TSIZE + d - 1].X, &BASE[i * TSIZE + d - 1].Y)
        k >>= WINDOW
        i += 1
    return jto_affine(&ACC)


def mul(k, pt):
    cdef int shift, j, d
    if pt is None:
        return None
    k %= _N
    if k == 0:
        return None
    x, y = pt
    if x == _GX and y == _GY:
        return mul_base(k)
    _from_int(KX, x)
    _from_int(KY, y)
    build_row(VTAB, KX, KY)
    cdef bytes kb = int(k).to_bytes(32, "big")
    cdef const unsigned char *kp = kb
    jset_inf(&ACC)
    for shift in range(64):
        if mpz_sgn(&ACC.Z) != 0:
            for j in range(WINDOW):
                jdbl(&ACC)
        if shift & 1:
            d = kp[shift >> 1] & 15
        else:
            d = kp[shift >> 1] >> 4
        if d:
            jadd_mixed(&ACC, &VTAB[d - 1].X, &VTAB[d - 1].Y)
    return jto_affine(&ACC)


def add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    _from_int(&ACC.X, a[0])
    _from_int(&ACC.Y, a[1])
    mpz_set_ui(&ACC.Z, 1)
    _from_int(KX, b[0])
    _from_int(KY, b[1])
    jadd_mixed(&ACC, KX, KY)
    return jto_affine(&ACC)
