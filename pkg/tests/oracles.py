"""Independent reference implementations used to check the package.

Everything in here is written as plainly as possible: explicit index
loops, brute-force search, no shared helpers with the package. Slow on
purpose; the tests keep the inputs small.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np


# ---------------------------------------------------------------------------
# attention


def attention_forward_loops(a, wk, wq, wv, alpha):
    """Per-index evaluation of the region attention step.

    a is (c, n) column features, the w* are (c, c). Returns (b, w) where
    row j of w is the distribution with which output column j draws from
    every column i: b[:, j] = alpha * sum_i w[j, i] v[:, i] + a[:, j].
    """
    a = np.asarray(a, dtype=np.float64)
    c, n = a.shape
    k = np.zeros((c, n))
    q = np.zeros((c, n))
    v = np.zeros((c, n))
    for i in range(c):
        for j in range(n):
            for t in range(c):
                k[i, j] += wk[i][t] * a[t, j]
                q[i, j] += wq[i][t] * a[t, j]
                v[i, j] += wv[i][t] * a[t, j]
    logits = np.zeros((n, n))
    for j in range(n):
        for i in range(n):
            for t in range(c):
                logits[j, i] += k[t, j] * q[t, i]
    w = np.zeros((n, n))
    for j in range(n):
        m = max(logits[j])
        exps = [math.exp(logits[j, i] - m) for i in range(n)]
        s = sum(exps)
        for i in range(n):
            w[j, i] = exps[i] / s
    b = np.zeros((c, n))
    for t in range(c):
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += w[j, i] * v[t, i]
            b[t, j] = alpha * acc + a[t, j]
    return b, w


# ---------------------------------------------------------------------------
# losses (scalar, math.log only)


def ce_scalar_oracle(p, y, clamp=1e-12):
    p = min(max(p, clamp), 1.0 - clamp)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def l1_oracle(pred, target):
    return sum(abs(a - b) for a, b in zip(pred, target))


def bce_mean_oracle(preds, targets, clamp=1e-12):
    total = 0.0
    for p, y in zip(preds, targets):
        total += ce_scalar_oracle(p, y, clamp)
    return total / len(preds)


def grid_ce_oracle(q, y, clamp=1e-12):
    """Mean over rows of -sum_c y log q."""
    q = np.asarray(q, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rows, cols = q.shape
    total = 0.0
    for r in range(rows):
        for c in range(cols):
            if y[r, c] != 0.0:
                total -= y[r, c] * math.log(max(q[r, c], clamp))
    return total / rows


def grid_kl_oracle(q, y, clamp=1e-12):
    """Mean over rows of sum_c y (log y - log q), 0 log 0 = 0."""
    q = np.asarray(q, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rows, cols = q.shape
    total = 0.0
    for r in range(rows):
        for c in range(cols):
            if y[r, c] > 0.0:
                total += y[r, c] * (
                    math.log(y[r, c]) - math.log(max(q[r, c], clamp))
                )
    return total / rows


# ---------------------------------------------------------------------------
# distance transform and the weighted F-measure


def edt_bruteforce(mask):
    """Squared Euclidean distance to the nearest true cell, all-pairs."""
    mask = np.asarray(mask, dtype=bool)
    h, wdt = mask.shape
    sites = [(i, j) for i in range(h) for j in range(wdt) if mask[i, j]]
    out = np.full((h, wdt), np.inf)
    for i in range(h):
        for j in range(wdt):
            for si, sj in sites:
                d = (i - si) ** 2 + (j - sj) ** 2
                if d < out[i, j]:
                    out[i, j] = d
    return out


def wfb_oracle(pred, gt, beta=1.0, sigma=5.0, alpha=math.log(0.5) / 5.0):
    """Dense double-loop weighted F-measure.

    Foreground errors may borrow the Gaussian-window average of the
    foreground errors around them when that average is lower; background
    errors are discounted by distance to the region. Returns
    (precision, recall, f).
    """
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    h, wdt = gt.shape
    fg = gt > 0.5
    nfg = int(fg.sum())
    if nfg == 0:
        return 0.0, 0.0, 0.0

    e = np.abs(gt - pred)
    radius = math.ceil(3.0 * sigma)

    ew = np.zeros((h, wdt))
    for i in range(h):
        for j in range(wdt):
            if fg[i, j]:
                num = 0.0
                den = 0.0
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        yy, xx = i + dy, j + dx
                        if 0 <= yy < h and 0 <= xx < wdt and fg[yy, xx]:
                            kker = math.exp(
                                -(dy * dy + dx * dx) / (2.0 * sigma * sigma)
                            )
                            num += kker * e[yy, xx]
                            den += kker
                ea = num / den
                ew[i, j] = min(e[i, j], ea)
            else:
                best = math.inf
                for si in range(h):
                    for sj in range(wdt):
                        if fg[si, sj]:
                            d = (i - si) ** 2 + (j - sj) ** 2
                            if d < best:
                                best = d
                dist = math.sqrt(best)
                ew[i, j] = e[i, j] * (2.0 - math.exp(alpha * dist))

    tp = sum(
        1.0 - ew[i, j] for i in range(h) for j in range(wdt) if fg[i, j]
    )
    fp = sum(ew[i, j] for i in range(h) for j in range(wdt) if not fg[i, j])
    fn = sum(ew[i, j] for i in range(h) for j in range(wdt) if fg[i, j])

    pr = tp / (tp + fp) if tp + fp > 0 else 0.0
    rc = tp / (tp + fn) if tp + fn > 0 else 0.0
    pr = min(max(pr, 0.0), 1.0)
    rc = min(max(rc, 0.0), 1.0)
    den = beta * beta * pr + rc
    f = 0.0 if den == 0 else (1.0 + beta * beta) * pr * rc / den
    return pr, rc, f


# ---------------------------------------------------------------------------
# planning: independent grounding and breadth-first search


def _type_ok(dom, obj_type, want):
    t = obj_type
    while True:
        if t == want:
            return True
        t = dom.types.get(t)
        if t is None:
            return False


def _bind(literal, env):
    return (literal.pred,) + tuple(env.get(a, a) for a in literal.args)


def enumerate_ground_actions(domain, problem, prune_static=True):
    """All type-correct bindings of every schema, via itertools.product.

    With prune_static, bindings whose never-changed preconditions fail in
    the initial state are dropped, mirroring what a grounder should do.
    Returns a list of (name, pre_pos, pre_neg, add, delete) with atom sets.
    """
    changed = set()
    for schema in domain.actions.values():
        for lit in schema.add + schema.delete:
            changed.add(lit.pred)

    out = []
    for schema in domain.actions.values():
        pools = []
        for param in schema.params:
            pool = [
                name
                for name, t in problem.objects.items()
                if _type_ok(domain, t, param.type)
            ]
            pools.append(pool)
        for combo in itertools.product(*pools):
            env = {p.name: o for p, o in zip(schema.params, combo)}
            pre_pos, pre_neg = set(), set()
            ok = True
            for lit in schema.precondition:
                atom = _bind(lit, env)
                if prune_static and lit.pred not in changed:
                    holds = atom in problem.init
                    if holds == lit.negated:
                        ok = False
                        break
                    continue
                (pre_neg if lit.negated else pre_pos).add(atom)
            if not ok:
                continue
            name = "(" + " ".join((schema.name,) + combo) + ")"
            out.append(
                (
                    name,
                    frozenset(pre_pos),
                    frozenset(pre_neg),
                    frozenset(_bind(lit, env) for lit in schema.add),
                    frozenset(_bind(lit, env) for lit in schema.delete),
                )
            )
    return out


def bfs_sets(actions, init, goal_pos, goal_neg, max_states=200000):
    """Shortest plan by breadth-first search over frozenset states.

    actions: iterable of (name, pre_pos, pre_neg, add, delete) atom sets.
    Returns a tuple of action names, or None when no plan exists within
    the state budget.
    """
    goal_pos = set(goal_pos)
    goal_neg = set(goal_neg)

    def satisfied(state):
        return goal_pos <= state and not (goal_neg & state)

    start = frozenset(init)
    if satisfied(start):
        return ()
    seen = {start}
    queue = deque([(start, ())])
    while queue:
        if len(seen) > max_states:
            raise RuntimeError("state budget exhausted")
        state, steps = queue.popleft()
        for name, pos, neg, add, dele in actions:
            if not (pos <= state) or (neg & state):
                continue
            nxt = frozenset((state - dele) | add)
            if nxt in seen:
                continue
            if satisfied(nxt):
                return steps + (name,)
            seen.add(nxt)
            queue.append((nxt, steps + (name,)))
    return None


def bfs_plan_oracle(domain, problem, max_states=200000):
    """Shortest plan for a parsed domain/problem pair."""
    return bfs_sets(
        enumerate_ground_actions(domain, problem, prune_static=False),
        problem.init,
        {lit.atom() for lit in problem.goal if not lit.negated},
        {lit.atom() for lit in problem.goal if lit.negated},
        max_states,
    )


def all_optimal_plans(domain, problem, max_states=200000):
    """Every distinct shortest plan, by layered breadth-first search."""
    actions = enumerate_ground_actions(domain, problem, prune_static=False)
    goal_pos = {lit.atom() for lit in problem.goal if not lit.negated}
    goal_neg = {lit.atom() for lit in problem.goal if lit.negated}

    def satisfied(state):
        return goal_pos <= state and not (goal_neg & state)

    start = frozenset(problem.init)
    if satisfied(start):
        return [()]
    frontier = [(start, ())]
    depth_seen = {start}
    explored = 0
    while frontier:
        nxt_frontier = []
        winners = []
        reached = set()
        for state, steps in frontier:
            for name, pos, neg, add, dele in actions:
                if not (pos <= state) or (neg & state):
                    continue
                nxt = frozenset((state - dele) | add)
                explored += 1
                if explored > max_states:
                    raise RuntimeError("state budget exhausted")
                if satisfied(nxt):
                    winners.append(steps + (name,))
                elif nxt not in depth_seen:
                    reached.add(nxt)
                    nxt_frontier.append((nxt, steps + (name,)))
        if winners:
            return winners
        depth_seen |= reached
        frontier = nxt_frontier
    return []


def apply_plan_oracle(domain, problem, step_names):
    """Replay named steps over the full (unpruned) ground action set.

    Returns the final frozenset of atoms, or the 0-based index of the
    first step whose preconditions fail.
    """
    actions = {
        a[0]: a for a in enumerate_ground_actions(domain, problem, False)
    }
    state = frozenset(problem.init)
    for idx, name in enumerate(step_names):
        if name not in actions:
            return idx
        _, pos, neg, add, dele = actions[name]
        if not (pos <= state) or (neg & state):
            return idx
        state = frozenset((state - dele) | add)
    return state


# ---------------------------------------------------------------------------
# grasp direction


def tls_direction_oracle(points):
    """Dominant direction of 2-d points via the covariance eigenvector.

    Returns an angle in [0, pi). Degenerate (isotropic) clouds return 0.
    """
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    if abs(cov[0, 1]) < 1e-12 and abs(cov[0, 0] - cov[1, 1]) < 1e-12:
        return 0.0
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, int(np.argmax(vals))]
    ang = math.atan2(v[1], v[0])
    if ang < 0:
        ang += math.pi
    if ang >= math.pi:
        ang -= math.pi
    return ang
