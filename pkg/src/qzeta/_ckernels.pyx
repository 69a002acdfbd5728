# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""MPFR implementations of the reduction loops in ``_pykernels``.

Numbers cross the boundary as exact ``(mantissa, exponent)`` integer pairs,
so no precision is lost and the loops run without the GIL.
"""

from libc.stdlib cimport malloc, free

cdef extern from "gmp.h":
    ctypedef struct __mpz_struct:
        pass
    ctypedef __mpz_struct mpz_t[1]
    void mpz_init(mpz_t)
    void mpz_clear(mpz_t)
    int mpz_set_str(mpz_t, const char *, int)
    char *mpz_get_str(char *, int, mpz_t)
    size_t mpz_sizeinbase(mpz_t, int)

cdef extern from "mpfr.h":
    ctypedef long mpfr_prec_t
    ctypedef long mpfr_exp_t
    ctypedef enum mpfr_rnd_t:
        MPFR_RNDN
    ctypedef struct __mpfr_struct:
        pass
    ctypedef __mpfr_struct *mpfr_ptr
    void mpfr_init2(mpfr_ptr, mpfr_prec_t)
    void mpfr_clear(mpfr_ptr)
    int mpfr_set_z_2exp(mpfr_ptr, mpz_t, mpfr_exp_t, mpfr_rnd_t)
    mpfr_exp_t mpfr_get_z_2exp(mpz_t, mpfr_ptr)
    int mpfr_set_zero(mpfr_ptr, int)
    int mpfr_set(mpfr_ptr, mpfr_ptr, mpfr_rnd_t) nogil
    int mpfr_mul(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t) nogil
    int mpfr_add(mpfr_ptr, mpfr_ptr, mpfr_ptr, mpfr_rnd_t) nogil
    int mpfr_abs(mpfr_ptr, mpfr_ptr, mpfr_rnd_t) nogil
    int mpfr_zero_p(mpfr_ptr)


cdef class _Vec:
    """A contiguous block of mpfr_t values at one precision."""

    cdef __mpfr_struct *data
    cdef Py_ssize_t n

    def __cinit__(self, Py_ssize_t n, mpfr_prec_t prec):
        cdef Py_ssize_t i
        self.n = n
        self.data = <__mpfr_struct *> malloc(max(n, 1) * sizeof(__mpfr_struct))
        if self.data == NULL:
            raise MemoryError()
        for i in range(n):
            mpfr_init2(&self.data[i], prec)
            mpfr_set_zero(&self.data[i], 1)

    def __dealloc__(self):
        cdef Py_ssize_t i
        if self.data != NULL:
            for i in range(self.n):
                mpfr_clear(&self.data[i])
            free(self.data)


cdef void _load(__mpfr_struct *dst, object pair) except *:
    cdef mpz_t z
    m, e = pair
    text = format(m, "x").encode("ascii")
    mpz_init(z)
    try:
        if mpz_set_str(z, text, 16) != 0:
            raise ValueError("bad mantissa")
        mpfr_set_z_2exp(dst, z, <mpfr_exp_t> e, MPFR_RNDN)
    finally:
        mpz_clear(z)


cdef object _dump(__mpfr_struct *src):
    cdef mpz_t z
    cdef char *buf
    cdef mpfr_exp_t e
    if mpfr_zero_p(src):
        return (0, 0)
    mpz_init(z)
    try:
        e = mpfr_get_z_2exp(z, src)
        buf = mpz_get_str(NULL, 16, z)
        try:
            m = int(buf.decode("ascii"), 16)
        finally:
            free(buf)
    finally:
        mpz_clear(z)
    return (m, e)


cdef _Vec _vec(list values, mpfr_prec_t prec):
    cdef Py_ssize_t i
    cdef _Vec v = _Vec(len(values), prec)
    for i in range(len(values)):
        _load(&v.data[i], values[i])
    return v


def correlate(list f, list g, list gabs, Py_ssize_t n_out, long prec):
    cdef _Vec vf = _vec(f, prec)
    cdef _Vec vg = _vec(g, prec)
    cdef _Vec vga = _vec(gabs, prec)
    cdef _Vec fa = _Vec(vf.n, prec)
    cdef _Vec out = _Vec(n_out, prec)
    cdef _Vec out_abs = _Vec(n_out, prec)
    cdef _Vec tmp = _Vec(1, prec)
    cdef Py_ssize_t n, i, nf = vf.n
    if n_out + nf > vg.n or n_out + nf > vga.n:
        raise ValueError("g is too short for the requested correlation")
    with nogil:
        for i in range(nf):
            mpfr_abs(&fa.data[i], &vf.data[i], MPFR_RNDN)
        for n in range(n_out):
            for i in range(nf):
                mpfr_mul(&tmp.data[0], &vf.data[i], &vg.data[n + i + 1], MPFR_RNDN)
                mpfr_add(&out.data[n], &out.data[n], &tmp.data[0], MPFR_RNDN)
                mpfr_mul(&tmp.data[0], &fa.data[i], &vga.data[n + i + 1], MPFR_RNDN)
                mpfr_add(&out_abs.data[n], &out_abs.data[n], &tmp.data[0], MPFR_RNDN)
    return ([_dump(&out.data[n]) for n in range(n_out)],
            [_dump(&out_abs.data[n]) for n in range(n_out)])


def naive_triangle(list a, list b, bint strict, long prec):
    cdef _Vec va = _vec(a, prec)
    cdef _Vec vb = _vec(b, prec)
    cdef _Vec acc = _Vec(2, prec)
    cdef Py_ssize_t k1, k2, top, n = va.n - 1
    if vb.n < va.n:
        raise ValueError("b must be at least as long as a")
    with nogil:
        for k1 in range(1, n + 1):
            top = k1 if strict else k1 + 1
            for k2 in range(1, top):
                mpfr_mul(&acc.data[1], &va.data[k1], &vb.data[k2], MPFR_RNDN)
                mpfr_add(&acc.data[0], &acc.data[0], &acc.data[1], MPFR_RNDN)
    return _dump(&acc.data[0])


def naive_box(list factors, list total, long prec):
    cdef Py_ssize_t r = len(factors)
    cdef list vecs = [_vec(fac, prec) for fac in factors]
    cdef _Vec vt = _vec(total, prec)
    cdef _Vec prefix = _Vec(r, prec)
    cdef _Vec acc = _Vec(2, prec)
    cdef Py_ssize_t *idx = <Py_ssize_t *> malloc(r * sizeof(Py_ssize_t))
    cdef Py_ssize_t *lens = <Py_ssize_t *> malloc(r * sizeof(Py_ssize_t))
    cdef __mpfr_struct **fp = <__mpfr_struct **> malloc(r * sizeof(__mpfr_struct *))
    cdef Py_ssize_t level, j, offset
    cdef _Vec v
    if idx == NULL or lens == NULL or fp == NULL:
        free(idx); free(lens); free(fp)
        raise MemoryError()
    try:
        offset = 0
        for j in range(r):
            v = vecs[j]
            fp[j] = v.data
            lens[j] = v.n - 1
            offset += lens[j]
            if lens[j] < 1:
                return (0, 0)
        if vt.n <= offset:
            raise ValueError("total is too short for the box")
        with nogil:
            # odometer over the box in lexicographic order, prefix products cached
            for j in range(r):
                idx[j] = 1
            level = 0
            while True:
                for j in range(level, r):
                    if j == 0:
                        mpfr_set(&prefix.data[0], &fp[0][idx[0]], MPFR_RNDN)
                    else:
                        mpfr_mul(&prefix.data[j], &prefix.data[j - 1], &fp[j][idx[j]], MPFR_RNDN)
                offset = 0
                for j in range(r):
                    offset += idx[j]
                mpfr_mul(&acc.data[1], &prefix.data[r - 1], &vt.data[offset], MPFR_RNDN)
                mpfr_add(&acc.data[0], &acc.data[0], &acc.data[1], MPFR_RNDN)
                level = r - 1
                while level >= 0:
                    idx[level] += 1
                    if idx[level] <= lens[level]:
                        break
                    idx[level] = 1
                    level -= 1
                if level < 0:
                    break
        return _dump(&acc.data[0])
    finally:
        free(idx)
        free(lens)
        free(fp)
