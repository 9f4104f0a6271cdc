"""Numba batch kernels for table interpolation.

Hot path for full-cloud embedding: points are located, counting-sorted
by cell so consecutive iterations reuse the same 8 table rows, then
accumulated channel-by-channel.  Pure-numpy fallbacks live in ``luti``;
these kernels must match them to float rounding (same corner order,
fused multiply-adds allowed).
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _sort_by_cell(cell, ncell):
    n = cell.shape[0]
    if ncell <= 16 * n:
        count = np.zeros(ncell + 1, dtype=np.int64)
        for i in range(n):
            count[cell[i] + 1] += 1
        for c in range(ncell):
            count[c + 1] += count[c]
        order = np.empty(n, dtype=np.int64)
        fill = count[:-1].copy()
        for i in range(n):
            order[fill[cell[i]]] = i
            fill[cell[i]] += 1
        return order
    return np.argsort(cell)


@njit(cache=True, fastmath=True)
def embed_uniform(tbl, pts, d, lox, loy, loz, ihx, ihy, ihz, out):
    n = pts.shape[0]
    k = tbl.shape[1]
    nc = d - 1
    node0 = np.empty(n, dtype=np.int64)
    w8 = np.empty((n, 8))
    cell = np.empty(n, dtype=np.int64)
    for i in range(n):
        qx = (pts[i, 0] - lox) * ihx
        qy = (pts[i, 1] - loy) * ihy
        qz = (pts[i, 2] - loz) * ihz
        if qx < 0.0: qx = 0.0
        elif qx > nc: qx = float(nc)
        if qy < 0.0: qy = 0.0
        elif qy > nc: qy = float(nc)
        if qz < 0.0: qz = 0.0
        elif qz > nc: qz = float(nc)
        bx = min(int(qx), nc - 1)
        by = min(int(qy), nc - 1)
        bz = min(int(qz), nc - 1)
        ux = qx - bx; uy = qy - by; uz = qz - bz
        node0[i] = (bx * d + by) * d + bz
        cell[i] = (bx * nc + by) * nc + bz
        w8[i, 0] = (1-ux)*(1-uy)*(1-uz); w8[i, 1] = (1-ux)*(1-uy)*uz
        w8[i, 2] = (1-ux)*uy*(1-uz);     w8[i, 3] = (1-ux)*uy*uz
        w8[i, 4] = ux*(1-uy)*(1-uz);     w8[i, 5] = ux*(1-uy)*uz
        w8[i, 6] = ux*uy*(1-uz);         w8[i, 7] = ux*uy*uz
    order = _sort_by_cell(cell, nc * nc * nc)
    for ii in range(n):
        i = order[ii]
        n000 = node0[i]
        r0 = tbl[n000]
        r1 = tbl[n000 + 1]
        r2 = tbl[n000 + d]
        r3 = tbl[n000 + d + 1]
        r4 = tbl[n000 + d * d]
        r5 = tbl[n000 + d * d + 1]
        r6 = tbl[n000 + d * d + d]
        r7 = tbl[n000 + d * d + d + 1]
        w0 = w8[i, 0]; w1 = w8[i, 1]; w2 = w8[i, 2]; w3 = w8[i, 3]
        w4 = w8[i, 4]; w5 = w8[i, 5]; w6 = w8[i, 6]; w7 = w8[i, 7]
        o = out[i]
        for c in range(k):
            o[c] = (w0*r0[c] + w1*r1[c] + w2*r2[c] + w3*r3[c]
                    + w4*r4[c] + w5*r5[c] + w6*r6[c] + w7*r7[c])


@njit(cache=True, fastmath=True)
def embed_irregular(tbl, pts, d, lox, loy, loz, ihx, ihy, ihz, out):
    # uniform interpolation into a scratch row, then min with its
    # channel reversal
    n = pts.shape[0]
    k = tbl.shape[1]
    nc = d - 1
    node0 = np.empty(n, dtype=np.int64)
    w8 = np.empty((n, 8))
    cell = np.empty(n, dtype=np.int64)
    for i in range(n):
        qx = (pts[i, 0] - lox) * ihx
        qy = (pts[i, 1] - loy) * ihy
        qz = (pts[i, 2] - loz) * ihz
        if qx < 0.0: qx = 0.0
        elif qx > nc: qx = float(nc)
        if qy < 0.0: qy = 0.0
        elif qy > nc: qy = float(nc)
        if qz < 0.0: qz = 0.0
        elif qz > nc: qz = float(nc)
        bx = min(int(qx), nc - 1)
        by = min(int(qy), nc - 1)
        bz = min(int(qz), nc - 1)
        ux = qx - bx; uy = qy - by; uz = qz - bz
        node0[i] = (bx * d + by) * d + bz
        cell[i] = (bx * nc + by) * nc + bz
        w8[i, 0] = (1-ux)*(1-uy)*(1-uz); w8[i, 1] = (1-ux)*(1-uy)*uz
        w8[i, 2] = (1-ux)*uy*(1-uz);     w8[i, 3] = (1-ux)*uy*uz
        w8[i, 4] = ux*(1-uy)*(1-uz);     w8[i, 5] = ux*(1-uy)*uz
        w8[i, 6] = ux*uy*(1-uz);         w8[i, 7] = ux*uy*uz
    order = _sort_by_cell(cell, nc * nc * nc)
    tmp = np.empty(k)
    for ii in range(n):
        i = order[ii]
        n000 = node0[i]
        r0 = tbl[n000]
        r1 = tbl[n000 + 1]
        r2 = tbl[n000 + d]
        r3 = tbl[n000 + d + 1]
        r4 = tbl[n000 + d * d]
        r5 = tbl[n000 + d * d + 1]
        r6 = tbl[n000 + d * d + d]
        r7 = tbl[n000 + d * d + d + 1]
        w0 = w8[i, 0]; w1 = w8[i, 1]; w2 = w8[i, 2]; w3 = w8[i, 3]
        w4 = w8[i, 4]; w5 = w8[i, 5]; w6 = w8[i, 6]; w7 = w8[i, 7]
        for c in range(k):
            tmp[c] = (w0*r0[c] + w1*r1[c] + w2*r2[c] + w3*r3[c]
                      + w4*r4[c] + w5*r5[c] + w6*r6[c] + w7*r7[c])
        o = out[i]
        for c in range(k):
            rc = tmp[k - 1 - c]
            tc = tmp[c]
            o[c] = tc if tc < rc else rc
    return


@njit(cache=True)
def embed_nearest(tbl, pts, d, lox, loy, loz, ihx, ihy, ihz, out):
    n = pts.shape[0]
    k = tbl.shape[1]
    for i in range(n):
        qx = (pts[i, 0] - lox) * ihx
        qy = (pts[i, 1] - loy) * ihy
        qz = (pts[i, 2] - loz) * ihz
        ix = int(np.floor(qx + 0.5))
        iy = int(np.floor(qy + 0.5))
        iz = int(np.floor(qz + 0.5))
        if ix < 0: ix = 0
        elif ix > d - 1: ix = d - 1
        if iy < 0: iy = 0
        elif iy > d - 1: iy = d - 1
        if iz < 0: iz = 0
        elif iz > d - 1: iz = d - 1
        row = tbl[(ix * d + iy) * d + iz]
        o = out[i]
        for c in range(k):
            o[c] = row[c]


# Fused interpolate-and-max variants: same blends as above, reduced
# into a single (K,) running max instead of an (N, K) matrix.  They
# back the finite-difference pose Jacobian, where only the pooled
# feature of each warped cloud is needed.

@njit(cache=True, fastmath=True)
def embed_max_uniform(tbl, pts, d, lox, loy, loz, ihx, ihy, ihz, out):
    n = pts.shape[0]
    k = tbl.shape[1]
    nc = d - 1
    for i in range(n):
        qx = (pts[i, 0] - lox) * ihx
        qy = (pts[i, 1] - loy) * ihy
        qz = (pts[i, 2] - loz) * ihz
        if qx < 0.0: qx = 0.0
        elif qx > nc: qx = float(nc)
        if qy < 0.0: qy = 0.0
        elif qy > nc: qy = float(nc)
        if qz < 0.0: qz = 0.0
        elif qz > nc: qz = float(nc)
        bx = min(int(qx), nc - 1)
        by = min(int(qy), nc - 1)
        bz = min(int(qz), nc - 1)
        ux = qx - bx; uy = qy - by; uz = qz - bz
        n000 = (bx * d + by) * d + bz
        r0 = tbl[n000]
        r1 = tbl[n000 + 1]
        r2 = tbl[n000 + d]
        r3 = tbl[n000 + d + 1]
        r4 = tbl[n000 + d * d]
        r5 = tbl[n000 + d * d + 1]
        r6 = tbl[n000 + d * d + d]
        r7 = tbl[n000 + d * d + d + 1]
        w0 = (1-ux)*(1-uy)*(1-uz); w1 = (1-ux)*(1-uy)*uz
        w2 = (1-ux)*uy*(1-uz);     w3 = (1-ux)*uy*uz
        w4 = ux*(1-uy)*(1-uz);     w5 = ux*(1-uy)*uz
        w6 = ux*uy*(1-uz);         w7 = ux*uy*uz
        for c in range(k):
            v = (w0*r0[c] + w1*r1[c] + w2*r2[c] + w3*r3[c]
                 + w4*r4[c] + w5*r5[c] + w6*r6[c] + w7*r7[c])
            if v > out[c]:
                out[c] = v


@njit(cache=True, fastmath=True)
def embed_max_irregular(tbl, pts, d, lox, loy, loz, ihx, ihy, ihz, out):
    n = pts.shape[0]
    k = tbl.shape[1]
    nc = d - 1
    tmp = np.empty(k)
    for i in range(n):
        qx = (pts[i, 0] - lox) * ihx
        qy = (pts[i, 1] - loy) * ihy
        qz = (pts[i, 2] - loz) * ihz
        if qx < 0.0: qx = 0.0
        elif qx > nc: qx = float(nc)
        if qy < 0.0: qy = 0.0
        elif qy > nc: qy = float(nc)
        if qz < 0.0: qz = 0.0
        elif qz > nc: qz = float(nc)
        bx = min(int(qx), nc - 1)
        by = min(int(qy), nc - 1)
        bz = min(int(qz), nc - 1)
        ux = qx - bx; uy = qy - by; uz = qz - bz
        n000 = (bx * d + by) * d + bz
        r0 = tbl[n000]
        r1 = tbl[n000 + 1]
        r2 = tbl[n000 + d]
        r3 = tbl[n000 + d + 1]
        r4 = tbl[n000 + d * d]
        r5 = tbl[n000 + d * d + 1]
        r6 = tbl[n000 + d * d + d]
        r7 = tbl[n000 + d * d + d + 1]
        w0 = (1-ux)*(1-uy)*(1-uz); w1 = (1-ux)*(1-uy)*uz
        w2 = (1-ux)*uy*(1-uz);     w3 = (1-ux)*uy*uz
        w4 = ux*(1-uy)*(1-uz);     w5 = ux*(1-uy)*uz
        w6 = ux*uy*(1-uz);         w7 = ux*uy*uz
        for c in range(k):
            tmp[c] = (w0*r0[c] + w1*r1[c] + w2*r2[c] + w3*r3[c]
                      + w4*r4[c] + w5*r5[c] + w6*r6[c] + w7*r7[c])
        for c in range(k):
            rc = tmp[k - 1 - c]
            tc = tmp[c]
            v = tc if tc < rc else rc
            if v > out[c]:
                out[c] = v


@njit(cache=True)
def embed_max_nearest(tbl, pts, d, lox, loy, loz, ihx, ihy, ihz, out):
    n = pts.shape[0]
    k = tbl.shape[1]
    for i in range(n):
        qx = (pts[i, 0] - lox) * ihx
        qy = (pts[i, 1] - loy) * ihy
        qz = (pts[i, 2] - loz) * ihz
        ix = int(np.floor(qx + 0.5))
        iy = int(np.floor(qy + 0.5))
        iz = int(np.floor(qz + 0.5))
        if ix < 0: ix = 0
        elif ix > d - 1: ix = d - 1
        if iy < 0: iy = 0
        elif iy > d - 1: iy = d - 1
        if iz < 0: iz = 0
        elif iz > d - 1: iz = d - 1
        row = tbl[(ix * d + iy) * d + iz]
        for c in range(k):
            if row[c] > out[c]:
                out[c] = row[c]
