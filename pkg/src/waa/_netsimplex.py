"""Primal network simplex for the dense transportation problem.

Nodes ``0..n-1`` are sources, ``n..n+m-1`` sinks and ``n+m`` is an artificial
root joined to every node by a big-M arc. Real arc ``e`` goes from source
``e // m`` to sink ``n + e % m``. Leaving arcs follow Cunningham's rule so
the basis stays strongly feasible (no cycling under degeneracy).

The spanning tree is kept only as parent pointers. Tree paths alternate
sources and sinks, so they are short when there are few sources; node
potentials are recomputed lazily by walking to the root (memoised per pivot)
instead of being relabelled over whole subtrees.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _tail(e, n, m, nm, supply):
    if e < nm:
        return e // m
    v = e - nm
    if supply[v] > 0.0:
        return v
    return n + m


@njit(cache=True)
def _head(e, n, m, nm, supply):
    if e < nm:
        return n + e % m
    v = e - nm
    if supply[v] > 0.0:
        return n + m
    return v


@njit(cache=True)
def _potential(v, stamp_now, stamp, pi, parent, parc, n, m, nm, supply, C, art_cost, buf):
    """Potential of node v with pi[root] = 0 and pi[head] = pi[tail] + cost on tree arcs."""
    k = 0
    w = v
    while parent[w] >= 0 and stamp[w] != stamp_now:
        buf[k] = w
        k += 1
        w = parent[w]
    if parent[w] < 0:
        pi[w] = 0.0
        stamp[w] = stamp_now
    for t in range(k - 1, -1, -1):
        w = buf[t]
        e = parc[w]
        c = C[e // m, e % m] if e < nm else art_cost
        if _head(e, n, m, nm, supply) == w:
            pi[w] = pi[parent[w]] + c
        else:
            pi[w] = pi[parent[w]] - c
        stamp[w] = stamp_now
    return pi[v]


@njit(cache=True)
def transport_simplex(a, b, C, max_pivots):
    """Minimise <C, P> over couplings P of (a, b).

    Returns (flows as an (n, m) array, cost, pivots, status) with status 0 for
    optimal and 1 when the pivot budget ran out.
    """
    n = a.size
    m = b.size
    nm = n * m
    N = n + m + 1
    root = n + m
    supply = np.empty(n + m)
    supply[:n] = a
    supply[n:] = -b

    cmax = 0.0
    for i in range(n):
        for j in range(m):
            if abs(C[i, j]) > cmax:
                cmax = abs(C[i, j])
    art_cost = (cmax + 1.0) * N
    eps = 1e-12 * (cmax + 1.0)

    flow = np.zeros(nm + n + m)
    parent = np.empty(N, dtype=np.int64)
    parc = np.empty(N, dtype=np.int64)
    for v in range(n + m):
        parent[v] = root
        parc[v] = nm + v
        flow[nm + v] = abs(supply[v])
    parent[root] = -1
    parc[root] = -1

    pi = np.zeros(N)
    stamp = -np.ones(N, dtype=np.int64)
    mark = -np.ones(N, dtype=np.int64)
    buf = np.empty(N, dtype=np.int64)
    upath = np.empty(N, dtype=np.int64)
    vpath = np.empty(N, dtype=np.int64)
    src_pi = np.empty(n)

    block = max(int(np.sqrt(nm)), 16)
    if block > nm:
        block = nm
    next_arc = 0
    status = 1
    pivots = 0

    while pivots < max_pivots:
        for i in range(n):
            src_pi[i] = _potential(i, pivots, stamp, pi, parent, parc, n, m, nm,
                                   supply, C, art_cost, buf)
        # block search pricing; a sink's parent is a source or the root
        best = -eps
        enter = -1
        scanned = 0
        in_block = 0
        e = next_arc
        while scanned < nm:
            i = e // m
            j = e % m
            p = parent[n + j]
            if p == root:
                pj = art_cost
            elif parc[n + j] < nm:
                pj = src_pi[p] + C[p, j]
            else:
                pj = _potential(n + j, pivots, stamp, pi, parent, parc, n, m, nm,
                                supply, C, art_cost, buf)
            rc = C[i, j] + src_pi[i] - pj
            if rc < best:
                best = rc
                enter = e
            scanned += 1
            in_block += 1
            e += 1
            if e == nm:
                e = 0
            if in_block == block:
                if enter >= 0:
                    break
                in_block = 0
        next_arc = e
        if enter < 0:
            status = 0
            break

        u = enter // m
        v = n + enter % m
        # join node: mark ancestors of u, climb from v until a mark
        w = u
        while w >= 0:
            mark[w] = pivots
            w = parent[w]
        nv = 0
        y = v
        while mark[y] != pivots:
            vpath[nv] = y
            nv += 1
            y = parent[y]
        join = y
        nu = 0
        x = u
        while x != join:
            upath[nu] = x
            nu += 1
            x = parent[x]

        theta = np.inf
        for t in range(nv):
            w = vpath[t]
            arc = parc[w]
            if _tail(arc, n, m, nm, supply) != w and flow[arc] < theta:
                theta = flow[arc]
        for t in range(nu):
            w = upath[t]
            arc = parc[w]
            if _head(arc, n, m, nm, supply) != w and flow[arc] < theta:
                theta = flow[arc]

        # Cunningham: last blocking arc walking join -> u -> v -> join
        leave = -1
        cut_at = -1
        on_v_side = False
        for t in range(nv):
            w = vpath[t]
            arc = parc[w]
            if _tail(arc, n, m, nm, supply) != w and flow[arc] == theta:
                leave = arc
                cut_at = t
                on_v_side = True
        if leave < 0:
            for t in range(nu):
                w = upath[t]
                arc = parc[w]
                if _head(arc, n, m, nm, supply) != w and flow[arc] == theta:
                    leave = arc
                    cut_at = t
                    break

        for t in range(nv):
            w = vpath[t]
            arc = parc[w]
            if _tail(arc, n, m, nm, supply) == w:
                flow[arc] += theta
            else:
                flow[arc] -= theta
        for t in range(nu):
            w = upath[t]
            arc = parc[w]
            if _head(arc, n, m, nm, supply) == w:
                flow[arc] += theta
            else:
                flow[arc] -= theta
        flow[enter] = theta
        flow[leave] = 0.0

        # re-hang the cut-off subtree: reverse parents from the entering
        # endpoint up to the node below the leaving arc
        if on_v_side:
            path = vpath
            outer = u
        else:
            path = upath
            outer = v
        prev_node = outer
        prev_arc = enter
        for t in range(cut_at + 1):
            w = path[t]
            old_arc = parc[w]
            parent[w] = prev_node
            parc[w] = prev_arc
            prev_node = w
            prev_arc = old_arc
        pivots += 1

    P = flow[:nm].reshape((n, m)).copy()
    cost = 0.0
    for i in range(n):
        for j in range(m):
            cost += P[i, j] * C[i, j]
    return P, cost, pivots, status
