# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled OUM / NGSP solve loops for the elliptic built-in speeds.

Mirrors ngsp.engine, ngsp.oum and ngsp.neighbor_gradient operation for
operation (same expression order, same tie-breaking) so both backends
produce the same fields.
"""

from libc.math cimport sqrt, sin, cos, floor, fabs, ceil, INFINITY
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memset
from posix.time cimport clock_gettime, timespec, CLOCK_MONOTONIC

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF BLOCK = 8
DEF FAR = 0
DEF CONS = 1
DEF ACC = 2

cdef int KIND_CONST = 0
cdef int KIND_HJB2 = 1
cdef int KIND_HJB3 = 2
cdef int KIND_HJB4 = 3
cdef int KIND_HJB5 = 4

cdef double LAMBDA_EPS = 1e-12
cdef double AXIS_EPS = 1e-12

cdef int DI[8]
cdef int DJ[8]
DI[:] = [-1, 1, 0, 0, -1, -1, 1, 1]
DJ[:] = [0, 0, -1, 1, -1, 1, -1, 1]


cdef struct Heap:
    double *key
    long *idx
    long size
    long cap


cdef struct Solver:
    int nx
    int ny
    long m
    double x0
    double y0
    double dx
    int kind
    double p[8]
    double radius
    int nsteps
    unsigned char *lab
    double *u
    double *v
    double *gx
    double *gy
    int *nonacc
    int *bcount
    int nbx
    int nby
    long *order
    long accept_count
    Heap heap
    long update_calls
    long oum_updates
    long ngsp_updates
    long segment_evals
    long point_evals
    long ray_steps
    int failed


cdef inline double now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + 1e-9 * ts.tv_nsec


# --- heap ordered by (key, idx) --------------------------------------------------

cdef inline bint less(Heap *h, long a, long b) noexcept nogil:
    return h.key[a] < h.key[b] or (h.key[a] == h.key[b] and h.idx[a] < h.idx[b])


cdef inline void hswap(Heap *h, long a, long b) noexcept nogil:
    cdef double tk = h.key[a]
    cdef long ti = h.idx[a]
    h.key[a] = h.key[b]
    h.idx[a] = h.idx[b]
    h.key[b] = tk
    h.idx[b] = ti


cdef int heap_push(Heap *h, double key, long idx) noexcept nogil:
    cdef long c, p
    cdef double *nk
    cdef long *ni
    if h.size == h.cap:
        nk = <double *> realloc(h.key, 2 * h.cap * sizeof(double))
        if nk == NULL:
            return -1
        h.key = nk
        ni = <long *> realloc(h.idx, 2 * h.cap * sizeof(long))
        if ni == NULL:
            return -1
        h.idx = ni
        h.cap *= 2
    c = h.size
    h.key[c] = key
    h.idx[c] = idx
    h.size += 1
    while c > 0:
        p = (c - 1) // 2
        if less(h, c, p):
            hswap(h, c, p)
            c = p
        else:
            break
    return 0


cdef void heap_pop(Heap *h, double *key, long *idx) noexcept nogil:
    cdef long c, l, r, s
    key[0] = h.key[0]
    idx[0] = h.idx[0]
    h.size -= 1
    h.key[0] = h.key[h.size]
    h.idx[0] = h.idx[h.size]
    c = 0
    while True:
        l = 2 * c + 1
        r = l + 1
        s = c
        if l < h.size and less(h, l, s):
            s = l
        if r < h.size and less(h, r, s):
            s = r
        if s == c:
            break
        hswap(h, c, s)
        c = s


# --- speed coefficients -------------------------------------------------------

cdef inline void coeffs(Solver *st, double x, double y, double *s, double *w1, double *w2) noexcept nogil:
    cdef double c, lo, hi, m, base
    cdef double *p = st.p
    if st.kind == KIND_CONST:
        s[0] = p[0]
        w1[0] = p[1]
        w2[0] = p[2]
    elif st.kind == KIND_HJB2:
        s[0] = p[0]
        w1[0] = p[1] * p[2] * cos(p[2] * x) * sin(p[2] * y)
        w2[0] = p[1] * p[2] * sin(p[2] * x) * cos(p[2] * y)
    elif st.kind == KIND_HJB3:
        base = 1.0 + x + y
        if base < p[3]:
            base = p[3]
        s[0] = p[0] * base
        w1[0] = p[1]
        w2[0] = p[2]
    else:
        # p = (scale, c1, k, c4); C(x) = c1 sin(k x + c4)
        c = p[1] * sin(p[2] * x + p[3])
        if st.kind == KIND_HJB4:
            if y >= c:
                lo = 0.5
                hi = 1.0
            else:
                lo = 2.0
                hi = 3.0
        else:
            if y > c + 0.25 or y <= c - 0.25:
                lo = 0.2
                hi = 0.8
            elif c < y and y <= c + 0.25:
                lo = 1.0
                hi = 3.0
            else:
                lo = 1.0
                hi = 1.0
        m = hi / lo
        s[0] = p[0] * hi
        w1[0] = m * (p[1] * p[2] * cos(p[2] * x + p[3]))
        w2[0] = -m


cdef inline double travel(double ddx, double ddy, double s, double w1, double w2) noexcept nogil:
    cdef double t = w1 * ddx + w2 * ddy
    return sqrt(ddx * ddx + ddy * ddy + t * t) / s


cdef double segment_min(double d0x, double d0y, double ex, double ey, double ua, double ub,
                        double s, double w1, double w2) noexcept nogil:
    cdef double we = w1 * ex + w2 * ey
    cdef double wd = w1 * d0x + w2 * d0y
    cdef double alpha = ex * ex + ey * ey + we * we
    cdef double beta = ex * d0x + ey * d0y + we * wd
    cdef double gamma = d0x * d0x + d0y * d0y + wd * wd
    cdef double delta = ua - ub
    cdef double best = sqrt(gamma) / s + ub
    cdef double v1 = sqrt(alpha + 2.0 * beta + gamma) / s + ua
    cdef double disc, k, t, lam, q, val
    if v1 < best:
        best = v1
    disc = alpha * gamma - beta * beta
    k = -delta * s / sqrt(alpha)
    if disc > 0.0 and -1.0 < k and k < 1.0:
        t = k * sqrt(disc / (1.0 - k * k))
        lam = (t - beta) / alpha
        if 0.0 < lam and lam < 1.0:
            q = (alpha * lam + 2.0 * beta) * lam + gamma
            if q > 0.0:
                val = sqrt(q) / s + ub + lam * delta
                if val < best:
                    best = val
    return best


# --- state ----------------------------------------------------------------------

cdef inline int block_of(Solver *st, long k) noexcept nogil:
    return <int> ((k // st.nx) // BLOCK) * st.nbx + <int> ((k % st.nx) // BLOCK)


cdef inline bint is_aff(Solver *st, long k) noexcept nogil:
    return st.lab[k] == ACC and st.nonacc[k] > 0


cdef void accept(Solver *st, long k, double value) noexcept nogil:
    cdef int d, i, j, ni, nj
    cdef long n
    if st.lab[k] == ACC:
        st.failed = 1
        return
    st.lab[k] = ACC
    st.u[k] = value
    st.order[st.accept_count] = k
    st.accept_count += 1
    i = k % st.nx
    j = k // st.nx
    for d in range(8):
        ni = i + DI[d]
        nj = j + DJ[d]
        if ni < 0 or ni >= st.nx or nj < 0 or nj >= st.ny:
            continue
        n = nj * st.nx + ni
        st.nonacc[n] -= 1
        if st.lab[n] == ACC and st.nonacc[n] == 0:
            st.bcount[block_of(st, n)] -= 1
    if st.nonacc[k] > 0:
        st.bcount[block_of(st, k)] += 1


cdef inline void push(Solver *st, long k, double value) noexcept nogil:
    if value < st.v[k]:
        st.v[k] = value
        st.lab[k] = CONS
        if heap_push(&st.heap, value, k) != 0:
            st.failed = 2


cdef long pop_min(Solver *st) noexcept nogil:
    cdef double key
    cdef long k
    while st.heap.size > 0:
        heap_pop(&st.heap, &key, &k)
        if st.lab[k] == CONS and key == st.v[k]:
            return k
    return -1


# --- OUM ------------------------------------------------------------------------------

cdef inline double seg_dist(int i, int j, int ni, int nj, bint horizontal) noexcept nogil:
    cdef int ox, oy
    if horizontal:
        ox = 0
        if ni - i > ox:
            ox = ni - i
        if i - ni - 1 > ox:
            ox = i - ni - 1
        oy = nj - j
    else:
        ox = ni - i
        oy = 0
        if nj - j > oy:
            oy = nj - j
        if j - nj - 1 > oy:
            oy = j - nj - 1
    return sqrt(<double> (ox * ox + oy * oy))


cdef double oum_update(Solver *st, long k) noexcept nogil:
    cdef int nx = st.nx, ny = st.ny
    cdef double dx = st.dx
    cdef int i = k % nx, j = k // nx
    cdef int r = <int> (st.radius / dx) + 1
    cdef int i0 = i - r, i1 = i + r, j0 = j - r, j1 = j + r
    cdef int bi, bj, ci, cj, ca, cb, ra, rb, d, ni, nj
    cdef long n, a, b
    cdef double s, w1, w2, val, best = INFINITY
    cdef long nsegs = 0
    if i0 < 0:
        i0 = 0
    if j0 < 0:
        j0 = 0
    if i1 > nx - 1:
        i1 = nx - 1
    if j1 > ny - 1:
        j1 = ny - 1
    coeffs(st, st.x0 + i * dx, st.y0 + j * dx, &s, &w1, &w2)
    st.update_calls += 1
    st.oum_updates += 1
    for bj in range(j0 // BLOCK, j1 // BLOCK + 1):
        for bi in range(i0 // BLOCK, i1 // BLOCK + 1):
            if st.bcount[bj * st.nbx + bi] == 0:
                continue
            ra = bj * BLOCK
            rb = ra + BLOCK - 1
            if ra < j0:
                ra = j0
            if rb > j1:
                rb = j1
            ca = bi * BLOCK
            cb = ca + BLOCK - 1
            if ca < i0:
                ca = i0
            if cb > i1:
                cb = i1
            for cj in range(ra, rb + 1):
                for ci in range(ca, cb + 1):
                    a = cj * nx + ci
                    if not is_aff(st, a):
                        continue
                    # segments owned by a: towards +x and +y
                    if ci + 1 < nx and is_aff(st, a + 1):
                        if seg_dist(i, j, ci, cj, True) * dx < st.radius:
                            b = a + 1
                            val = segment_min((ci + 1 - i) * dx, (cj - j) * dx,
                                              (ci - (ci + 1)) * dx, 0 * dx,
                                              st.u[a], st.u[b], s, w1, w2)
                            nsegs += 1
                            if val < best:
                                best = val
                    if cj + 1 < ny and is_aff(st, a + nx):
                        if seg_dist(i, j, ci, cj, False) * dx < st.radius:
                            b = a + nx
                            val = segment_min((ci - i) * dx, (cj + 1 - j) * dx,
                                              0 * dx, (cj - (cj + 1)) * dx,
                                              st.u[a], st.u[b], s, w1, w2)
                            nsegs += 1
                            if val < best:
                                best = val
    st.segment_evals += nsegs
    if nsegs > 0:
        return best
    for d in range(8):
        ni = i + DI[d]
        nj = j + DJ[d]
        if ni < 0 or ni >= nx or nj < 0 or nj >= ny:
            continue
        n = nj * nx + ni
        if st.lab[n] == ACC:
            st.point_evals += 1
            val = travel((ni - i) * dx, (nj - j) * dx, s, w1, w2) + st.u[n]
            if val < best:
                best = val
    return best


cdef void relax_oum(Solver *st, long k) noexcept nogil:
    cdef int i = k % st.nx, j = k // st.nx, d, ni, nj
    cdef long n
    for d in range(8):
        ni = i + DI[d]
        nj = j + DJ[d]
        if ni < 0 or ni >= st.nx or nj < 0 or nj >= st.ny:
            continue
        n = nj * st.nx + ni
        if st.lab[n] != ACC:
            push(st, n, oum_update(st, n))


# --- NGSP -----------------------------------------------------------------------------

cdef void refresh_gradient(Solver *st, long k) noexcept nogil:
    cdef int nx = st.nx, ny = st.ny
    cdef int i = k % nx, j = k // nx
    cdef double dx = st.dx
    cdef bint left = i > 0 and st.lab[k - 1] == ACC
    cdef bint right = i < nx - 1 and st.lab[k + 1] == ACC
    cdef bint down = j > 0 and st.lab[k - nx] == ACC
    cdef bint up = j < ny - 1 and st.lab[k + nx] == ACC
    cdef double *u = st.u
    if left and right:
        st.gx[k] = (u[k + 1] - u[k - 1]) / (2.0 * dx)
    elif left:
        st.gx[k] = (u[k] - u[k - 1]) / dx
    elif right:
        st.gx[k] = (u[k + 1] - u[k]) / dx
    else:
        st.gx[k] = 0.0
    if down and up:
        st.gy[k] = (u[k + nx] - u[k - nx]) / (2.0 * dx)
    elif down:
        st.gy[k] = (u[k] - u[k - nx]) / dx
    elif up:
        st.gy[k] = (u[k + nx] - u[k]) / dx
    else:
        st.gy[k] = 0.0


cdef inline void minimizer(double gx, double gy, double s, double w1, double w2,
                           double *a1, double *a2) noexcept nogil:
    cdef double c, px, py, r
    if gx == 0.0 and gy == 0.0:
        a1[0] = -1.0
        a2[0] = 0.0
        return
    c = (w1 * gx + w2 * gy) / (1.0 + w1 * w1 + w2 * w2)
    px = gx - c * w1
    py = gy - c * w2
    r = sqrt(px * px + py * py)
    a1[0] = -px / r
    a2[0] = -py / r


cdef bint walk_family(Solver *st, int i, int j, double along, double across, bint horizontal_lines,
                      int *n_out, long *a_out, long *b_out, double *lam_out) noexcept nogil:
    cdef int nx = st.nx, ny = st.ny
    cdef int sgn = 1 if along > 0 else -1
    cdef double inv = 1.0 / fabs(along)
    cdef int lim, base, fixed0, linemax, n, line
    cdef long a, step
    cdef double c, cf, fr
    if horizontal_lines:
        lim = nx - 1
        base = i
        fixed0 = j
        linemax = ny - 1
        step = 1
    else:
        lim = ny - 1
        base = j
        fixed0 = i
        linemax = nx - 1
        step = nx
    for n in range(1, st.nsteps + 1):
        line = fixed0 + sgn * n
        if line < 0 or line > linemax:
            return False
        st.ray_steps += 1
        c = base + across * n * inv
        if c < -LAMBDA_EPS or c > lim + LAMBDA_EPS:
            return False
        cf = floor(c)
        fr = c - cf
        if horizontal_lines:
            a = <long> line * nx + <long> cf
        else:
            a = <long> cf * nx + line
        if fr < LAMBDA_EPS:
            if st.lab[a] == ACC:
                n_out[0] = n
                a_out[0] = a
                b_out[0] = a
                lam_out[0] = 1.0
                return True
        elif fr > 1.0 - LAMBDA_EPS:
            if st.lab[a + step] == ACC:
                n_out[0] = n
                a_out[0] = a + step
                b_out[0] = a + step
                lam_out[0] = 1.0
                return True
        elif st.lab[a] == ACC and st.lab[a + step] == ACC:
            n_out[0] = n
            a_out[0] = a
            b_out[0] = a + step
            lam_out[0] = 1.0 - fr
            return True
    return False


cdef bint ray_hit(Solver *st, long k, double a1, double a2,
                  double *t_out, long *a_out, long *b_out, double *lam_out) noexcept nogil:
    cdef int i = k % st.nx, j = k // st.nx
    cdef int n
    cdef long a, b
    cdef double lam, t
    cdef bint found = False
    if fabs(a1) >= AXIS_EPS:
        if walk_family(st, i, j, a1, a2, False, &n, &a, &b, &lam):
            found = True
            t_out[0] = n * st.dx / fabs(a1)
            a_out[0] = a
            b_out[0] = b
            lam_out[0] = lam
    if fabs(a2) >= AXIS_EPS:
        if walk_family(st, i, j, a2, a1, True, &n, &a, &b, &lam):
            t = n * st.dx / fabs(a2)
            if not found or t < t_out[0]:
                found = True
                t_out[0] = t
                a_out[0] = a
                b_out[0] = b
                lam_out[0] = lam
    if not found or not t_out[0] < st.radius:
        return False
    return True


cdef double ngsp_update(Solver *st, long k) noexcept nogil:
    cdef int nx = st.nx, ny = st.ny
    cdef double dx = st.dx
    cdef int i = k % nx, j = k // nx, d, e, ni, nj, nseen = 0
    cdef long n, na, nb
    cdef double s, w1, w2, val, best = INFINITY, gxn, gyn, a1, a2, t, lam, interp
    cdef double seen_x[8]
    cdef double seen_y[8]
    cdef bint dup
    coeffs(st, st.x0 + i * dx, st.y0 + j * dx, &s, &w1, &w2)
    st.update_calls += 1
    st.ngsp_updates += 1
    for d in range(8):
        ni = i + DI[d]
        nj = j + DJ[d]
        if ni < 0 or ni >= nx or nj < 0 or nj >= ny:
            continue
        n = nj * nx + ni
        if st.lab[n] != ACC:
            continue
        st.point_evals += 1
        val = travel((ni - i) * dx, (nj - j) * dx, s, w1, w2) + st.u[n]
        if val < best:
            best = val
        gxn = st.gx[n]
        gyn = st.gy[n]
        dup = False
        for e in range(nseen):
            if seen_x[e] == gxn and seen_y[e] == gyn:
                dup = True
                break
        if dup:
            continue
        seen_x[nseen] = gxn
        seen_y[nseen] = gyn
        nseen += 1
        minimizer(gxn, gyn, s, w1, w2, &a1, &a2)
        if not ray_hit(st, k, a1, a2, &t, &na, &nb, &lam):
            continue
        st.point_evals += 1
        if lam == 1.0:
            interp = st.u[na]
        else:
            interp = lam * st.u[na] + (1.0 - lam) * st.u[nb]
        val = travel(t * a1, t * a2, s, w1, w2) + interp
        if val < best:
            best = val
    return best


cdef void accept_and_relax(Solver *st, long k) noexcept nogil:
    cdef int i = k % st.nx, j = k // st.nx, d, ni, nj
    cdef long n
    accept(st, k, st.v[k])
    refresh_gradient(st, k)
    for d in range(8):
        ni = i + DI[d]
        nj = j + DJ[d]
        if ni < 0 or ni >= st.nx or nj < 0 or nj >= st.ny:
            continue
        n = nj * st.nx + ni
        if st.lab[n] == ACC:
            refresh_gradient(st, n)
    for d in range(8):
        ni = i + DI[d]
        nj = j + DJ[d]
        if ni < 0 or ni >= st.nx or nj < 0 or nj >= st.ny:
            continue
        n = nj * st.nx + ni
        if st.lab[n] != ACC:
            push(st, n, ngsp_update(st, n))


# --- driver ----------------------------------------------------------------------------------

def solve(int kind, params, int nx, int ny, double x0, double y0, double dx,
          targets, str method, double bootstrap_fraction, double upsilon):
    """Run a full solve. ``targets`` are linear indices, already deduplicated.

    Returns (u, order, stats) with u and order as numpy arrays.
    """
    cdef Solver st
    cdef long m = <long> nx * ny
    cdef long k, t, n, stop_at, ntargets, ring, boot = 0
    cdef int d, i, j, ni, nj, pidx
    cdef double t0, t1, t2
    cdef bint ngsp = method == "ngsp"
    cdef long[::1] tg = np.ascontiguousarray(targets, dtype=np.int64).astype(np.dtype("l"))
    cnp_u = np.empty(m, dtype=np.float64)
    cnp_order = np.empty(m, dtype=np.dtype("l"))
    cdef double[::1] u_view = cnp_u
    cdef long[::1] order_view = cnp_order
    cdef unsigned char *mark

    memset(&st, 0, sizeof(Solver))
    st.nx = nx
    st.ny = ny
    st.m = m
    st.x0 = x0
    st.y0 = y0
    st.dx = dx
    st.kind = kind
    for pidx in range(len(params)):
        st.p[pidx] = params[pidx]
    st.radius = sqrt(2.0) * dx * upsilon
    st.nsteps = <int> ceil(upsilon - 1e-9)
    if st.nsteps < 1:
        st.nsteps = 1
    st.nbx = (nx + BLOCK - 1) // BLOCK
    st.nby = (ny + BLOCK - 1) // BLOCK
    st.u = &u_view[0]
    st.order = &order_view[0]
    st.lab = <unsigned char *> malloc(m)
    st.v = <double *> malloc(m * sizeof(double))
    st.gx = <double *> malloc(m * sizeof(double))
    st.gy = <double *> malloc(m * sizeof(double))
    st.nonacc = <int *> malloc(m * sizeof(int))
    st.bcount = <int *> malloc(st.nbx * st.nby * sizeof(int))
    mark = <unsigned char *> malloc(m)
    st.heap.cap = 16 * m + 16
    st.heap.key = <double *> malloc(st.heap.cap * sizeof(double))
    st.heap.idx = <long *> malloc(st.heap.cap * sizeof(long))
    try:
        if (st.lab == NULL or st.v == NULL or st.gx == NULL or st.gy == NULL or st.nonacc == NULL
                or st.bcount == NULL or mark == NULL or st.heap.key == NULL or st.heap.idx == NULL):
            raise MemoryError()
        ntargets = tg.shape[0]
        with nogil:
            memset(st.lab, FAR, m)
            memset(mark, 0, m)
            memset(st.bcount, 0, st.nbx * st.nby * sizeof(int))
            for k in range(m):
                st.u[k] = INFINITY
                st.v[k] = INFINITY
                st.gx[k] = 0.0
                st.gy[k] = 0.0
                i = k % nx
                j = k // nx
                st.nonacc[k] = 0
                for d in range(8):
                    ni = i + DI[d]
                    nj = j + DJ[d]
                    if 0 <= ni < nx and 0 <= nj < ny:
                        st.nonacc[k] += 1
            for t in range(ntargets):
                st.v[tg[t]] = 0.0
                accept(&st, tg[t], 0.0)
                mark[tg[t]] = 1
            ring = 0
            for t in range(ntargets):
                i = tg[t] % nx
                j = tg[t] // nx
                for d in range(8):
                    ni = i + DI[d]
                    nj = j + DJ[d]
                    if 0 <= ni < nx and 0 <= nj < ny:
                        n = nj * nx + ni
                        if mark[n] == 0:
                            mark[n] = 1
                            ring += 1
            if ngsp:
                stop_at = <long> ceil(bootstrap_fraction * m)
                if st.accept_count + ring > stop_at:
                    stop_at = st.accept_count + ring
            else:
                stop_at = m + 1

            t0 = now()
            for t in range(ntargets):
                relax_oum(&st, tg[t])
            while st.accept_count < stop_at:
                k = pop_min(&st)
                if k < 0:
                    break
                accept(&st, k, st.v[k])
                relax_oum(&st, k)
            t1 = now()
            boot = st.accept_count
            if ngsp:
                for t in range(st.accept_count):
                    refresh_gradient(&st, st.order[t])
                while True:
                    k = pop_min(&st)
                    if k < 0:
                        break
                    accept_and_relax(&st, k)
            t2 = now()
        if st.failed:
            raise RuntimeError(f"solver failure code {st.failed}")
        stats = {
            "update_calls": st.update_calls,
            "oum_updates": st.oum_updates,
            "ngsp_updates": st.ngsp_updates,
            "segment_evals": st.segment_evals,
            "point_evals": st.point_evals,
            "ray_steps": st.ray_steps,
            "accept_count": st.accept_count,
            "phase_seconds": {"oum": t1 - t0, "ngsp": t2 - t1},
        }
        if ngsp:
            stats["bootstrap_accepted"] = boot
        return cnp_u, cnp_order[:st.accept_count].astype(np.int64), stats, t2 - t0
    finally:
        free(st.lab)
        free(st.v)
        free(st.gx)
        free(st.gy)
        free(st.nonacc)
        free(st.bcount)
        free(mark)
        free(st.heap.key)
        free(st.heap.idx)
