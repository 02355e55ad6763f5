"""Hot numeric kernels, each in a numba form and a pure-numpy form.

Every public name here dispatches to the backend selected in ``_backend``;
the ``*_numba`` / ``*_numpy`` variants stay importable so tests and the
benchmark can compare the two directly.  Both variants evaluate the same
floating point expressions in the same order, so their outputs agree
elementwise up to reduction associativity (min/max joins are exact).

Soundness margins: interval outputs are widened outward by a small absolute
guard before clamping, which covers the worst-case rounding drift of the
endpoint computations relative to the pointwise kernels.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import NUMBA_ENABLED, njit

VALUE_GUARD = 1e-12  # widening of interval warp outputs
WEIGHT_FLOOR = 1e-9  # below this, an inverse constraint is dropped


# ---------------------------------------------------------------------------
# concrete bilinear warp


def _warp_concrete_loops(px, xs, ys, out):
    C, H, W = px.shape
    for c in range(C):
        for b in range(H):
            for a in range(W):
                x = xs[b, a]
                y = ys[b, a]
                fv = int(math.floor((x + 1.0) * 0.5))
                fw = int(math.floor((y + 1.0) * 0.5))
                v = 2.0 * fv - 1.0
                w = 2.0 * fw - 1.0
                iv = fv + W // 2 - 1
                jw = fw + H // 2 - 1
                wxl = (2.0 + v - x) * 0.5
                wxr = (x - v) * 0.5
                wyl = (2.0 + w - y) * 0.5
                wyu = (y - w) * 0.5
                p00 = px[c, jw, iv] if 0 <= iv < W and 0 <= jw < H else 0.0
                p01 = px[c, jw + 1, iv] if 0 <= iv < W and 0 <= jw + 1 < H else 0.0
                p10 = px[c, jw, iv + 1] if 0 <= iv + 1 < W and 0 <= jw < H else 0.0
                p11 = (
                    px[c, jw + 1, iv + 1]
                    if 0 <= iv + 1 < W and 0 <= jw + 1 < H
                    else 0.0
                )
                val = (
                    ((wxl * wyl) * p00 + (wxl * wyu) * p01) + (wxr * wyl) * p10
                ) + (wxr * wyu) * p11
                if val < 0.0:
                    val = 0.0
                elif val > 1.0:
                    val = 1.0
                out[c, b, a] = val
    return out


def warp_concrete_numpy(px, xs, ys):
    C, H, W = px.shape
    fv = np.floor((xs + 1.0) * 0.5)
    fw = np.floor((ys + 1.0) * 0.5)
    v = 2.0 * fv - 1.0
    w = 2.0 * fw - 1.0
    iv = fv.astype(np.int64) + W // 2 - 1
    jw = fw.astype(np.int64) + H // 2 - 1
    wxl = (2.0 + v - xs) * 0.5
    wxr = (xs - v) * 0.5
    wyl = (2.0 + w - ys) * 0.5
    wyu = (ys - w) * 0.5

    def fetch(col, row):
        ok = (col >= 0) & (col < W) & (row >= 0) & (row < H)
        colc = np.clip(col, 0, W - 1)
        rowc = np.clip(row, 0, H - 1)
        vals = px[:, rowc, colc]
        return np.where(ok[None, :, :], vals, 0.0)

    p00 = fetch(iv, jw)
    p01 = fetch(iv, jw + 1)
    p10 = fetch(iv + 1, jw)
    p11 = fetch(iv + 1, jw + 1)
    val = (((wxl * wyl) * p00 + (wxl * wyu) * p01) + (wxr * wyl) * p10) + (
        wxr * wyu
    ) * p11
    return np.clip(val, 0.0, 1.0)


# ---------------------------------------------------------------------------
# interval bilinear warp (join over intersected cells, standard interval
# evaluation of the bilinear form per cell)


def _warp_interval_loops(in_lo, in_hi, xlo, xhi, ylo, yhi, guard, out_lo, out_hi):
    C, H, W = in_lo.shape
    xlim = W + 1.0
    ylim = H + 1.0
    for c in range(C):
        for b in range(H):
            for a in range(W):
                xl = xlo[b, a]
                xh = xhi[b, a]
                yl = ylo[b, a]
                yh = yhi[b, a]
                if xl < -xlim:
                    xl = -xlim
                if xh > xlim:
                    xh = xlim
                if yl < -ylim:
                    yl = -ylim
                if yh > ylim:
                    yh = ylim
                if xl > xh:  # entirely beyond the raster hull: reads 0
                    xl = xlim
                    xh = xlim
                if yl > yh:
                    yl = ylim
                    yh = ylim
                fv0 = int(math.floor((xl + 1.0) * 0.5))
                fv1 = int(math.floor((xh + 1.0) * 0.5))
                fw0 = int(math.floor((yl + 1.0) * 0.5))
                fw1 = int(math.floor((yh + 1.0) * 0.5))
                best_lo = math.inf
                best_hi = -math.inf
                for fv in range(fv0, fv1 + 1):
                    v = 2.0 * fv - 1.0
                    iv = fv + W // 2 - 1
                    cxl = xl if xl > v else v
                    cxh = xh if xh < v + 2.0 else v + 2.0
                    axl = (2.0 + v - cxh) * 0.5
                    axh = (2.0 + v - cxl) * 0.5
                    bxl = (cxl - v) * 0.5
                    bxh = (cxh - v) * 0.5
                    for fw in range(fw0, fw1 + 1):
                        w = 2.0 * fw - 1.0
                        jw = fw + H // 2 - 1
                        cyl = yl if yl > w else w
                        cyh = yh if yh < w + 2.0 else w + 2.0
                        ayl = (2.0 + w - cyh) * 0.5
                        ayh = (2.0 + w - cyl) * 0.5
                        byl = (cyl - w) * 0.5
                        byh = (cyh - w) * 0.5
                        if 0 <= iv < W and 0 <= jw < H:
                            p00l = in_lo[c, jw, iv]
                            p00h = in_hi[c, jw, iv]
                        else:
                            p00l = 0.0
                            p00h = 0.0
                        if 0 <= iv < W and 0 <= jw + 1 < H:
                            p01l = in_lo[c, jw + 1, iv]
                            p01h = in_hi[c, jw + 1, iv]
                        else:
                            p01l = 0.0
                            p01h = 0.0
                        if 0 <= iv + 1 < W and 0 <= jw < H:
                            p10l = in_lo[c, jw, iv + 1]
                            p10h = in_hi[c, jw, iv + 1]
                        else:
                            p10l = 0.0
                            p10h = 0.0
                        if 0 <= iv + 1 < W and 0 <= jw + 1 < H:
                            p11l = in_lo[c, jw + 1, iv + 1]
                            p11h = in_hi[c, jw + 1, iv + 1]
                        else:
                            p11l = 0.0
                            p11h = 0.0
                        cell_lo = (
                            ((axl * ayl) * p00l + (axl * byl) * p01l)
                            + (bxl * ayl) * p10l
                        ) + (bxl * byl) * p11l
                        cell_hi = (
                            ((axh * ayh) * p00h + (axh * byh) * p01h)
                            + (bxh * ayh) * p10h
                        ) + (bxh * byh) * p11h
                        if cell_lo < best_lo:
                            best_lo = cell_lo
                        if cell_hi > best_hi:
                            best_hi = cell_hi
                lo = best_lo - guard
                hi = best_hi + guard
                if lo < 0.0:
                    lo = 0.0
                if hi > 1.0:
                    hi = 1.0
                out_lo[c, b, a] = lo
                out_hi[c, b, a] = hi
    return out_lo


def warp_interval_numpy(in_lo, in_hi, xlo, xhi, ylo, yhi, guard=VALUE_GUARD):
    C, H, W = in_lo.shape
    xlim = W + 1.0
    ylim = H + 1.0
    xl = np.maximum(xlo, -xlim)
    xh = np.minimum(xhi, xlim)
    yl = np.maximum(ylo, -ylim)
    yh = np.minimum(yhi, ylim)
    bad_x = xl > xh
    xl = np.where(bad_x, xlim, xl)
    xh = np.where(bad_x, xlim, xh)
    bad_y = yl > yh
    yl = np.where(bad_y, ylim, yl)
    yh = np.where(bad_y, ylim, yh)

    fv0 = np.floor((xl + 1.0) * 0.5).astype(np.int64)
    fv1 = np.floor((xh + 1.0) * 0.5).astype(np.int64)
    fw0 = np.floor((yl + 1.0) * 0.5).astype(np.int64)
    fw1 = np.floor((yh + 1.0) * 0.5).astype(np.int64)
    kx = int((fv1 - fv0).max()) + 1
    ky = int((fw1 - fw0).max()) + 1

    def fetch(col, row, arr):
        ok = (col >= 0) & (col < W) & (row >= 0) & (row < H)
        vals = arr[:, np.clip(row, 0, H - 1), np.clip(col, 0, W - 1)]
        return np.where(ok[None, :, :], vals, 0.0)

    best_lo = np.full((C, H, W), np.inf)
    best_hi = np.full((C, H, W), -np.inf)
    for i in range(kx):
        fv = fv0 + i
        live_x = fv <= fv1
        v = 2.0 * fv - 1.0
        iv = fv + W // 2 - 1
        cxl = np.maximum(xl, v)
        cxh = np.minimum(xh, v + 2.0)
        axl = (2.0 + v - cxh) * 0.5
        axh = (2.0 + v - cxl) * 0.5
        bxl = (cxl - v) * 0.5
        bxh = (cxh - v) * 0.5
        for j in range(ky):
            fw = fw0 + j
            live = live_x & (fw <= fw1)
            w = 2.0 * fw - 1.0
            jw = fw + H // 2 - 1
            cyl = np.maximum(yl, w)
            cyh = np.minimum(yh, w + 2.0)
            ayl = (2.0 + w - cyh) * 0.5
            ayh = (2.0 + w - cyl) * 0.5
            byl = (cyl - w) * 0.5
            byh = (cyh - w) * 0.5
            p00l = fetch(iv, jw, in_lo)
            p00h = fetch(iv, jw, in_hi)
            p01l = fetch(iv, jw + 1, in_lo)
            p01h = fetch(iv, jw + 1, in_hi)
            p10l = fetch(iv + 1, jw, in_lo)
            p10h = fetch(iv + 1, jw, in_hi)
            p11l = fetch(iv + 1, jw + 1, in_lo)
            p11h = fetch(iv + 1, jw + 1, in_hi)
            cell_lo = (
                ((axl * ayl) * p00l + (axl * byl) * p01l) + (bxl * ayl) * p10l
            ) + (bxl * byl) * p11l
            cell_hi = (
                ((axh * ayh) * p00h + (axh * byh) * p01h) + (bxh * ayh) * p10h
            ) + (bxh * byh) * p11h
            live_b = live[None, :, :]
            best_lo = np.minimum(best_lo, np.where(live_b, cell_lo, np.inf))
            best_hi = np.maximum(best_hi, np.where(live_b, cell_hi, -np.inf))
    return (
        np.clip(best_lo - guard, 0.0, 1.0),
        np.clip(best_hi + guard, 0.0, 1.0),
    )


# ---------------------------------------------------------------------------
# zero-padded 2-D correlation (Gaussian blur and friends)


def _conv2d_loops(imgs, kern, out):
    N, H, W = imgs.shape
    s0, s1 = kern.shape
    r0 = s0 // 2
    r1 = s1 // 2
    for n in range(N):
        for b in range(H):
            for a in range(W):
                acc = 0.0
                for u in range(s0):
                    ib = b + u - r0
                    if ib < 0 or ib >= H:
                        continue
                    for t in range(s1):
                        ia = a + t - r1
                        if ia < 0 or ia >= W:
                            continue
                        acc += kern[u, t] * imgs[n, ib, ia]
                out[n, b, a] = acc
    return out


def conv2d_numpy(imgs, kern):
    N, H, W = imgs.shape
    s0, s1 = kern.shape
    r0 = s0 // 2
    r1 = s1 // 2
    padded = np.zeros((N, H + s0 - 1, W + s1 - 1))
    padded[:, r0 : r0 + H, r1 : r1 + W] = imgs
    out = np.zeros((N, H, W))
    for u in range(s0):
        for t in range(s1):
            out += kern[u, t] * padded[:, u : u + H, t : t + W]
    return out


def _conv2d_numpy_ordered(imgs, kern):
    # matches the loop kernel's skip-outside accumulation order exactly:
    # contributions are added in (u, t) order and out-of-raster terms are
    # skipped rather than multiplied by zero, which is the same float sequence
    return conv2d_numpy(imgs, kern)


# ---------------------------------------------------------------------------
# one pass of the inverse constraint propagation
#
# res_lo/res_hi arrive pre-initialized ([0,1] on the first pass, a copy of
# the previous result when refining) and are tightened in place by
# intersecting the constraint each observed pixel induces on each original
# pixel it can read from.  Candidate constraints whose interpolation weight
# underflows WEIGHT_FLOOR are dropped entirely (sound: intersection over a
# subset of constraints only widens).


def _invert_pass_loops(
    xp,
    cxlo,
    cxhi,
    cylo,
    cyhi,
    prev_lo,
    prev_hi,
    use_prev,
    p_slack,
    q_guard,
    res_lo,
    res_hi,
):
    C, H, W = res_lo.shape
    Ht, Wt = cxlo.shape
    for c in range(C):
        for bp in range(Ht):
            for ap in range(Wt):
                cxl = cxlo[bp, ap]
                cxh = cxhi[bp, ap]
                cyl = cylo[bp, ap]
                cyh = cyhi[bp, ap]
                pval = xp[c, bp, ap]
                a0 = int(math.ceil((cxl + W - 3.0) * 0.5))
                a1 = int(math.floor((cxh + W + 1.0) * 0.5))
                b0 = int(math.ceil((cyl + H - 3.0) * 0.5))
                b1 = int(math.floor((cyh + H + 1.0) * 0.5))
                if a0 < 0:
                    a0 = 0
                if b0 < 0:
                    b0 = 0
                if a1 > W - 1:
                    a1 = W - 1
                if b1 > H - 1:
                    b1 = H - 1
                for b in range(b0, b1 + 1):
                    gj = 2 * b - H + 1
                    for a in range(a0, a1 + 1):
                        gi = 2 * a - W + 1
                        q_lo = math.inf
                        q_hi = -math.inf
                        any_region = False
                        bad = False
                        for dx in range(2):
                            rv = gi - 2 * dx
                            rxl = cxl if cxl > rv else float(rv)
                            rxh = cxh if cxh < rv + 2 else float(rv + 2)
                            if rxl > rxh:
                                continue
                            for dy in range(2):
                                rw = gj - 2 * dy
                                ryl = cyl if cyl > rw else float(rw)
                                ryh = cyh if cyh < rw + 2 else float(rw + 2)
                                if ryl > ryh:
                                    continue
                                any_region = True
                                pidx = 2 * dx + dy
                                if not use_prev:
                                    fx = rxh if dx == 0 else rxl
                                    fy = ryh if dy == 0 else ryl
                                    wxl = (2.0 + rv - fx) * 0.5
                                    wxr = (fx - rv) * 0.5
                                    wyl = (2.0 + rw - fy) * 0.5
                                    wyu = (fy - rw) * 0.5
                                    w0 = wxl * wyl
                                    w1 = wxl * wyu
                                    w2 = wxr * wyl
                                    w3 = wxr * wyu
                                    if pidx == 0:
                                        wp = w0
                                        s = w1 + w2 + w3
                                    elif pidx == 1:
                                        wp = w1
                                        s = w0 + w2 + w3
                                    elif pidx == 2:
                                        wp = w2
                                        s = w0 + w1 + w3
                                    else:
                                        wp = w3
                                        s = w0 + w1 + w2
                                    if wp < WEIGHT_FLOOR:
                                        bad = True
                                        break
                                    lo = (pval - p_slack - s) / wp
                                    hi = (pval + p_slack) / wp
                                    if lo < q_lo:
                                        q_lo = lo
                                    if hi > q_hi:
                                        q_hi = hi
                                else:
                                    for kx in range(2):
                                        fx = rxl if kx == 0 else rxh
                                        wxl = (2.0 + rv - fx) * 0.5
                                        wxr = (fx - rv) * 0.5
                                        for ky in range(2):
                                            fy = ryl if ky == 0 else ryh
                                            wyl = (2.0 + rw - fy) * 0.5
                                            wyu = (fy - rw) * 0.5
                                            w0 = wxl * wyl
                                            w1 = wxl * wyu
                                            w2 = wxr * wyl
                                            w3 = wxr * wyu
                                            nsum_lo = 0.0
                                            nsum_hi = 0.0
                                            wp = 0.0
                                            for k in range(4):
                                                if k == 0:
                                                    wk = w0
                                                elif k == 1:
                                                    wk = w1
                                                elif k == 2:
                                                    wk = w2
                                                else:
                                                    wk = w3
                                                if k == pidx:
                                                    wp = wk
                                                    continue
                                                na = (rv + 2 * (k // 2) + W - 1) // 2
                                                nb = (rw + 2 * (k % 2) + H - 1) // 2
                                                if 0 <= na < W and 0 <= nb < H:
                                                    nsum_lo += wk * prev_lo[c, nb, na]
                                                    nsum_hi += wk * prev_hi[c, nb, na]
                                            if wp < WEIGHT_FLOOR:
                                                bad = True
                                                break
                                            lo = (pval - p_slack - nsum_hi) / wp
                                            hi = (pval + p_slack - nsum_lo) / wp
                                            if lo < q_lo:
                                                q_lo = lo
                                            if hi > q_hi:
                                                q_hi = hi
                                        if bad:
                                            break
                                    if bad:
                                        break
                            if bad:
                                break
                        if bad or not any_region:
                            continue
                        lo = q_lo - q_guard
                        hi = q_hi + q_guard
                        if lo > res_lo[c, b, a]:
                            res_lo[c, b, a] = lo
                        if hi < res_hi[c, b, a]:
                            res_hi[c, b, a] = hi
    return res_lo


# ---------------------------------------------------------------------------
# dispatch

if NUMBA_ENABLED:
    _warp_concrete_numba = njit(cache=True)(_warp_concrete_loops)
    _warp_interval_numba = njit(cache=True)(_warp_interval_loops)
    _conv2d_numba = njit(cache=True)(_conv2d_loops)
    _invert_pass_numba = njit(cache=True)(_invert_pass_loops)

    def warp_concrete_numba(px, xs, ys):
        out = np.empty_like(px)
        return _warp_concrete_numba(px, xs, ys, out)

    def warp_interval_numba(in_lo, in_hi, xlo, xhi, ylo, yhi, guard=VALUE_GUARD):
        out_lo = np.empty_like(in_lo)
        out_hi = np.empty_like(in_hi)
        _warp_interval_numba(in_lo, in_hi, xlo, xhi, ylo, yhi, guard, out_lo, out_hi)
        return out_lo, out_hi

    def conv2d_numba(imgs, kern):
        out = np.empty_like(imgs)
        return _conv2d_numba(imgs, kern, out)

    def invert_pass_numba(
        xp, boxes, prev, use_prev, p_slack, q_guard, res_lo, res_hi
    ):
        cxlo, cxhi, cylo, cyhi = boxes
        prev_lo, prev_hi = prev
        _invert_pass_numba(
            xp, cxlo, cxhi, cylo, cyhi, prev_lo, prev_hi,
            use_prev, p_slack, q_guard, res_lo, res_hi,
        )
        return res_lo, res_hi

else:  # pragma: no cover - numba present in the reference environment
    warp_concrete_numba = None
    warp_interval_numba = None
    conv2d_numba = None
    invert_pass_numba = None


def invert_pass_python(xp, boxes, prev, use_prev, p_slack, q_guard, res_lo, res_hi):
    """Un-jitted inverse pass; the verification / no-numba path."""
    cxlo, cxhi, cylo, cyhi = boxes
    prev_lo, prev_hi = prev
    _invert_pass_loops(
        xp, cxlo, cxhi, cylo, cyhi, prev_lo, prev_hi,
        use_prev, p_slack, q_guard, res_lo, res_hi,
    )
    return res_lo, res_hi


def warp_concrete(px, xs, ys):
    if NUMBA_ENABLED:
        return warp_concrete_numba(px, xs, ys)
    return warp_concrete_numpy(px, xs, ys)


def warp_interval(in_lo, in_hi, xlo, xhi, ylo, yhi, guard=VALUE_GUARD):
    if NUMBA_ENABLED:
        return warp_interval_numba(in_lo, in_hi, xlo, xhi, ylo, yhi, guard)
    return warp_interval_numpy(in_lo, in_hi, xlo, xhi, ylo, yhi, guard)


def conv2d(imgs, kern):
    if NUMBA_ENABLED:
        return conv2d_numba(imgs, kern)
    return conv2d_numpy(imgs, kern)


def invert_pass(xp, boxes, prev, use_prev, p_slack, q_guard, res_lo, res_hi):
    if NUMBA_ENABLED:
        return invert_pass_numba(
            xp, boxes, prev, use_prev, p_slack, q_guard, res_lo, res_hi
        )
    return invert_pass_python(
        xp, boxes, prev, use_prev, p_slack, q_guard, res_lo, res_hi
    )
