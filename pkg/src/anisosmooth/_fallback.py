"""Pure numpy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` exactly for the integer stream. Float transforms
agree with the compiled path to within a few ulp (libm vs numpy ``log``).

Counter layout for one Philox4x32-10 block::

    key     = (seed & 0xffffffff, seed >> 32)
    counter = (block, sample_index, stream_id & 0xffffffff, stream_id >> 32)

Each sample index owns ``ceil(dim / 2)`` blocks; every block yields two
52-bit uniforms.
"""
import numpy as np

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)

TWO_M52 = 2.0**-52


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Vectorised Philox4x32; counters are uint32-valued uint64 arrays."""
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    k0 = int(k0) & 0xFFFFFFFF
    k1 = int(k1) & 0xFFFFFFFF
    for _ in range(rounds):
        p0 = c0 * PHILOX_M0
        p1 = c2 * PHILOX_M1
        hi0, lo0 = p0 >> SHIFT32, p0 & MASK32
        hi1, lo1 = p1 >> SHIFT32, p1 & MASK32
        c0, c1, c2, c3 = (
            hi1 ^ c1 ^ np.uint64(k0),
            lo1,
            hi0 ^ c3 ^ np.uint64(k1),
            lo0,
        )
        k0 = (k0 + PHILOX_W0) & 0xFFFFFFFF
        k1 = (k1 + PHILOX_W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def raw_blocks(seed, stream_id, start, count, nblocks):
    """uint32 output words, shape (count, nblocks, 4)."""
    samples = np.arange(start, start + count, dtype=np.uint64)
    blocks = np.arange(nblocks, dtype=np.uint64)
    c0 = np.broadcast_to(blocks[None, :], (count, nblocks))
    c1 = np.broadcast_to(samples[:, None], (count, nblocks))
    c2 = np.full((count, nblocks), stream_id & 0xFFFFFFFF, dtype=np.uint64)
    c3 = np.full((count, nblocks), stream_id >> 32, dtype=np.uint64)
    out = philox4x32(c0, c1, c2, c3, seed & 0xFFFFFFFF, seed >> 32)
    return np.stack(out, axis=-1).astype(np.uint32)


def uniforms(seed, stream_id, start, count, dim):
    """Open-interval uniforms on (0, 1), shape (count, dim)."""
    nblocks = (dim + 1) // 2
    w = raw_blocks(seed, stream_id, start, count, nblocks).astype(np.uint64)
    # 26 high bits of each word pair -> 52-bit integer
    k_a = ((w[..., 0] >> np.uint64(6)) << np.uint64(26)) | (w[..., 1] >> np.uint64(6))
    k_b = ((w[..., 2] >> np.uint64(6)) << np.uint64(26)) | (w[..., 3] >> np.uint64(6))
    k = np.stack([k_a, k_b], axis=-1).reshape(count, 2 * nblocks)[:, :dim]
    return (k.astype(np.float64) + 0.5) * TWO_M52


_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _horner(coef, r):
    acc = np.full_like(r, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * r + c
    return acc


def ndtri(p):
    """Inverse standard normal CDF (Wichura AS241, PPND16) for p in (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _horner(_E, rf) / _horner(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def normals(seed, stream_id, start, count, dim):
    return ndtri(uniforms(seed, stream_id, start, count, dim))


def laplaces(seed, stream_id, start, count, dim):
    """Unit-diversity Laplace draws by inverse CDF."""
    u = uniforms(seed, stream_id, start, count, dim)
    lower = u < 0.5
    out = np.empty_like(u)
    out[lower] = np.log(2.0 * u[lower])
    out[~lower] = -np.log(2.0 * (1.0 - u[~lower]))
    return out
