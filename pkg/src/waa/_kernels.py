"""Compiled inner loops for convex clipping and power cells.

Everything here works on raw float64/int64 arrays. Edge labels travel with
the vertices: the label stored at vertex t names the edge from vertex t to
vertex t+1. Labels >= 0 are edges of the clipping domain; cut edges created by
a half-plane get the label passed to the clip call (negative for bisectors).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def clip_halfplane(px, py, lab, cnt, nx, ny, off, cut_label, eps, ox, oy, olab):
    """Clip polygon (px, py)[:cnt] to {p : nx*x + ny*y <= off}.

    Writes into (ox, oy, olab) and returns the new vertex count. A count
    below 3 means the intersection is empty.
    """
    if cnt == 0:
        return 0
    n_out = 0
    n_in = 0
    for t in range(cnt):
        s = nx * px[t] + ny * py[t] - off
        if s > eps:
            n_out += 1
        else:
            n_in += 1
    if n_out == 0:
        for t in range(cnt):
            ox[t] = px[t]
            oy[t] = py[t]
            olab[t] = lab[t]
        return cnt
    if n_in == 0:
        return 0

    m = 0
    for t in range(cnt):
        u = t + 1
        if u == cnt:
            u = 0
        s0 = nx * px[t] + ny * py[t] - off
        s1 = nx * px[u] + ny * py[u] - off
        in0 = s0 <= eps
        in1 = s1 <= eps
        if in0:
            ox[m] = px[t]
            oy[m] = py[t]
            if in1:
                olab[m] = lab[t]
                m += 1
            else:
                olab[m] = lab[t]
                m += 1
                lam = s0 / (s0 - s1)
                if lam < 0.0:
                    lam = 0.0
                elif lam > 1.0:
                    lam = 1.0
                ox[m] = px[t] + lam * (px[u] - px[t])
                oy[m] = py[t] + lam * (py[u] - py[t])
                olab[m] = cut_label
                m += 1
        elif in1:
            lam = s0 / (s0 - s1)
            if lam < 0.0:
                lam = 0.0
            elif lam > 1.0:
                lam = 1.0
            ox[m] = px[t] + lam * (px[u] - px[t])
            oy[m] = py[t] + lam * (py[u] - py[t])
            olab[m] = lab[t]
            m += 1

    # drop the earlier of two coincident consecutive vertices
    k = 0
    for t in range(m):
        u = t + 1
        if u == m:
            u = 0
        dx = ox[u] - ox[t]
        dy = oy[u] - oy[t]
        if dx * dx + dy * dy <= eps * eps:
            continue
        ox[k] = ox[t]
        oy[k] = oy[t]
        olab[k] = olab[t]
        k += 1
    if k < 3:
        return 0
    return k


@njit(cache=True)
def polygon_moments(px, py, cnt):
    """Area, centroid and polar second moment about the centroid.

    The second moment is accumulated over the fan of triangles from the
    centroid using the closed-form triangle integral
    ``int |y|^2 = A/6 (|p|^2 + p.q + |q|^2)`` for a triangle (0, p, q).
    """
    if cnt < 3:
        return 0.0, 0.0, 0.0, 0.0
    # shift by the first vertex for conditioning
    x0 = px[0]
    y0 = py[0]
    a2 = 0.0
    cx = 0.0
    cy = 0.0
    for t in range(cnt):
        u = t + 1
        if u == cnt:
            u = 0
        xa = px[t] - x0
        ya = py[t] - y0
        xb = px[u] - x0
        yb = py[u] - y0
        cr = xa * yb - xb * ya
        a2 += cr
        cx += (xa + xb) * cr
        cy += (ya + yb) * cr
    if a2 == 0.0:
        return 0.0, px[0], py[0], 0.0
    area = 0.5 * a2
    gx = cx / (3.0 * a2) + x0
    gy = cy / (3.0 * a2) + y0
    polar = 0.0
    for t in range(cnt):
        u = t + 1
        if u == cnt:
            u = 0
        xa = px[t] - gx
        ya = py[t] - gy
        xb = px[u] - gx
        yb = py[u] - gy
        tri = 0.5 * (xa * yb - xb * ya)
        polar += tri / 6.0 * (xa * xa + ya * ya + xa * xb + ya * yb + xb * xb + yb * yb)
    return area, gx, gy, polar


@njit(cache=True)
def neighbor_order(sx, sy):
    n = sx.size
    order = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        d2 = (sx - sx[i]) ** 2 + (sy - sy[i]) ** 2
        order[i, :] = np.argsort(d2, kind="mergesort")
    return order


@njit(cache=True)
def power_cells(sx, sy, phi, wx, wy, order, eps, area_floor):
    """Cells of the power diagram of the sites clipped to the window polygon.

    Cell i is the window clipped by every half-plane
    ``|y - x_i|^2 - phi_i <= |y - x_j|^2 - phi_j``. Work happens in
    coordinates centred at x_i; neighbours are visited in increasing distance
    and the scan stops once no remaining bisector can reach the cell.

    Returns flat vertex arrays (absolute coordinates), labels, per-cell
    offsets, areas and ``int_cell |y - x_i|^2 dy``.
    """
    n = sx.size
    k = wx.size
    cap = k + n + 4
    bx = np.empty(cap)
    by = np.empty(cap)
    bl = np.empty(cap, dtype=np.int64)
    tx = np.empty(cap)
    ty = np.empty(cap)
    tl = np.empty(cap, dtype=np.int64)

    out_cap = n * (k + 8) + 16
    vx = np.empty(out_cap)
    vy = np.empty(out_cap)
    vl = np.empty(out_cap, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    areas = np.zeros(n)
    quad = np.zeros(n)
    have_order = order.shape[0] == n

    phimax = phi[0]
    for i in range(n):
        if phi[i] > phimax:
            phimax = phi[i]

    for i in range(n):
        xi = sx[i]
        yi = sy[i]
        cnt = k
        for t in range(k):
            bx[t] = wx[t] - xi
            by[t] = wy[t] - yi
            bl[t] = t
        R2 = 0.0
        for t in range(cnt):
            r2 = bx[t] * bx[t] + by[t] * by[t]
            if r2 > R2:
                R2 = r2
        R = np.sqrt(R2)
        c = phimax - phi[i]

        if have_order:
            row = order[i]
        else:
            d2all = (sx - xi) ** 2 + (sy - yi) ** 2
            row = np.argsort(d2all, kind="mergesort")

        for idx in range(n):
            j = row[idx]
            if j == i:
                continue
            dx = sx[j] - xi
            dy = sy[j] - yi
            dd2 = dx * dx + dy * dy
            dist = np.sqrt(dd2)
            if dist <= eps:
                # coincident site: the larger weight (then lower index) wins
                if phi[j] > phi[i] or (phi[j] == phi[i] and j < i):
                    cnt = 0
                    break
                continue
            # lower bound of every remaining bisector distance from x_i
            if (dd2 - c) / (2.0 * dist) > R + eps:
                break
            tj = (dd2 + phi[i] - phi[j]) / (2.0 * dist)
            if tj > R + eps:
                continue
            ux = dx / dist
            uy = dy / dist
            smax = -np.inf
            for t in range(cnt):
                s = ux * bx[t] + uy * by[t]
                if s > smax:
                    smax = s
            if smax <= tj + eps:
                continue
            cnt = clip_halfplane(bx, by, bl, cnt, ux, uy, tj, -1 - j, eps, tx, ty, tl)
            if cnt < 3:
                cnt = 0
                break
            for t in range(cnt):
                bx[t] = tx[t]
                by[t] = ty[t]
                bl[t] = tl[t]
            R2 = 0.0
            for t in range(cnt):
                r2 = bx[t] * bx[t] + by[t] * by[t]
                if r2 > R2:
                    R2 = r2
            R = np.sqrt(R2)

        if cnt >= 3:
            area, gx, gy, polar = polygon_moments(bx, by, cnt)
            if area < area_floor:
                cnt = 0
            else:
                areas[i] = area
                quad[i] = polar + area * (gx * gx + gy * gy)

        start = offsets[i]
        if start + cnt > out_cap:
            new_cap = 2 * out_cap + cnt
            nvx = np.empty(new_cap)
            nvy = np.empty(new_cap)
            nvl = np.empty(new_cap, dtype=np.int64)
            nvx[:start] = vx[:start]
            nvy[:start] = vy[:start]
            nvl[:start] = vl[:start]
            vx = nvx
            vy = nvy
            vl = nvl
            out_cap = new_cap
        for t in range(cnt):
            vx[start + t] = bx[t] + xi
            vy[start + t] = by[t] + yi
            vl[start + t] = bl[t]
        offsets[i + 1] = start + cnt

    total = offsets[n]
    return vx[:total].copy(), vy[:total].copy(), vl[:total].copy(), offsets, areas, quad
