# cython: language_level=3
"""Compiled Monte Carlo kernels: Philox4x32-10 stream, AS241 inverse normal.

Same counter layout and bit mapping as ``_fallback``; see that module.
All loops release the GIL so worker threads overlap.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint64_t M0 = 0xD2511F53
cdef uint64_t M1 = 0xCD9E8D57
cdef uint32_t W0 = 0x9E3779B9
cdef uint32_t W1 = 0xBB67AE85
cdef double TWO_M52 = 2.220446049250313e-16


cdef inline void philox_block(uint32_t* ctr, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3]
    cdef int r
    for r in range(10):
        p0 = M0 * <uint64_t>c0
        p1 = M1 * <uint64_t>c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + W0
        k1 = k1 + W1
    ctr[0] = c0
    ctr[1] = c1
    ctr[2] = c2
    ctr[3] = c3


cdef inline double to_unit(uint32_t a, uint32_t b) noexcept nogil:
    cdef uint64_t k = ((<uint64_t>(a >> 6)) << 26) | <uint64_t>(b >> 6)
    return (<double>k + 0.5) * TWO_M52


cdef inline double horner(const double* c, double r) noexcept nogil:
    cdef double acc = c[7]
    cdef int i
    for i in range(6, -1, -1):
        acc = acc * r + c[i]
    return acc


cdef double A[8]
cdef double B[8]
cdef double C[8]
cdef double D[8]
cdef double E[8]
cdef double F[8]
A[:] = [3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
        1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
        3.3430575583588128105e4, 2.5090809287301226727e3]
B[:] = [1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
        2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
        5.2264952788528545610e3]
C[:] = [1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
        3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
        2.27238449892691845833e-2, 7.74545014278341407640e-4]
D[:] = [1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
        1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
        1.05075007164441684324e-9]
E[:] = [6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
        2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
        2.71155556874348757815e-5, 2.01033439929228813265e-7]
F[:] = [1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
        7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
        2.04426310338993978564e-15]


cdef inline double ndtri_scalar(double p) noexcept nogil:
    cdef double q = p - 0.5
    cdef double r, val
    if q <= 0.425 and q >= -0.425:
        r = 0.180625 - q * q
        return q * horner(A, r) / horner(B, r)
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        val = horner(C, r) / horner(D, r)
    else:
        r = r - 5.0
        val = horner(E, r) / horner(F, r)
    if q < 0.0:
        return -val
    return val


cdef void fill_uniforms(double[:, ::1] out, uint64_t seed, uint64_t stream_id,
                        uint64_t start) noexcept nogil:
    cdef Py_ssize_t count = out.shape[0], dim = out.shape[1]
    cdef Py_ssize_t i, j, blk
    cdef uint32_t ctr[4]
    cdef uint32_t k0 = <uint32_t>seed, k1 = <uint32_t>(seed >> 32)
    for i in range(count):
        blk = 0
        j = 0
        while j < dim:
            ctr[0] = <uint32_t>blk
            ctr[1] = <uint32_t>(start + i)
            ctr[2] = <uint32_t>stream_id
            ctr[3] = <uint32_t>(stream_id >> 32)
            philox_block(ctr, k0, k1)
            out[i, j] = to_unit(ctr[0], ctr[1])
            if j + 1 < dim:
                out[i, j + 1] = to_unit(ctr[2], ctr[3])
            j += 2
            blk += 1


def raw_blocks(uint64_t seed, uint64_t stream_id, uint64_t start, Py_ssize_t count,
               Py_ssize_t nblocks):
    cdef cnp.ndarray[cnp.uint32_t, ndim=3] out = np.empty((count, nblocks, 4), dtype=np.uint32)
    cdef uint32_t[:, :, ::1] view = out
    cdef uint32_t ctr[4]
    cdef uint32_t k0 = <uint32_t>seed, k1 = <uint32_t>(seed >> 32)
    cdef Py_ssize_t i, b
    with nogil:
        for i in range(count):
            for b in range(nblocks):
                ctr[0] = <uint32_t>b
                ctr[1] = <uint32_t>(start + i)
                ctr[2] = <uint32_t>stream_id
                ctr[3] = <uint32_t>(stream_id >> 32)
                philox_block(ctr, k0, k1)
                view[i, b, 0] = ctr[0]
                view[i, b, 1] = ctr[1]
                view[i, b, 2] = ctr[2]
                view[i, b, 3] = ctr[3]
    return out


def uniforms(uint64_t seed, uint64_t stream_id, uint64_t start, Py_ssize_t count,
             Py_ssize_t dim):
    out = np.empty((count, dim), dtype=np.float64)
    cdef double[:, ::1] view = out
    with nogil:
        fill_uniforms(view, seed, stream_id, start)
    return out


def normals(uint64_t seed, uint64_t stream_id, uint64_t start, Py_ssize_t count,
            Py_ssize_t dim):
    out = np.empty((count, dim), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef Py_ssize_t i, j
    with nogil:
        fill_uniforms(view, seed, stream_id, start)
        for i in range(count):
            for j in range(dim):
                view[i, j] = ndtri_scalar(view[i, j])
    return out


def laplaces(uint64_t seed, uint64_t stream_id, uint64_t start, Py_ssize_t count,
             Py_ssize_t dim):
    out = np.empty((count, dim), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef Py_ssize_t i, j
    cdef double u
    with nogil:
        fill_uniforms(view, seed, stream_id, start)
        for i in range(count):
            for j in range(dim):
                u = view[i, j]
                if u < 0.5:
                    view[i, j] = log(2.0 * u)
                else:
                    view[i, j] = -log(2.0 * (1.0 - u))
    return out


def ndtri(p):
    arr = np.ascontiguousarray(p, dtype=np.float64)
    out = np.empty_like(arr)
    cdef double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t i, n = src.shape[0]
    with nogil:
        for i in range(n):
            dst[i] = ndtri_scalar(src[i])
    return out
