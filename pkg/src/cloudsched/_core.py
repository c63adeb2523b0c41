"""Compiled numerical core: per-server argmax solvers, queue transitions, run loops.

Everything here is nopython-compiled and operates on plain int64/float64
arrays. The pure-Python modules wrap these primitives; the run kernels at the
bottom execute whole simulations. All randomness flows through the module's
seeded MT19937 helpers so the fast kernels and the reference engine consume
identical streams.

Accumulator layout (float64 array passed to run kernels):
  0 slots counted post-warmup     8..15 quarter sums/counts of total queue
  1 sum total queue length        16 final total queue length
  2 sum weighted backlog          17 final weighted backlog
  3 sum server running cost
  4 sum active servers
  5 sum migrated jobs
  6 sum migration cost
  7 (reserved)

Violation counters (int64 array):
  0 realize precondition   3 job conservation      6 offline workload identity
  1 C2 identity            4 binary-cost==active   7 age composition mismatch
  2 cond-1                 5 negative queue        8 migration-interval bound
  9 slot of the first violation (0 if clean)
"""

import numpy as np
from numba import njit

ACC_LEN = 18
A_SLOTS, A_QLEN, A_WBL, A_SCOST, A_ACTIVE, A_MIGN, A_MIGC = 0, 1, 2, 3, 4, 5, 6
A_Q1 = 8  # quarters: sums at 8..11, counts at 12..15
A_FINAL_Q, A_FINAL_W = 16, 17

VIOL_LEN = 10
V_PRE, V_C2ID, V_COND1, V_CONSERVE, V_BINACT, V_NEGQ, V_WLID, V_COMP, V_MIGINT = range(9)
V_FIRST_SLOT = 9


@njit(cache=True)
def _stamp_first_violation(viol, t):
    if viol[V_FIRST_SLOT] == 0:
        total = 0
        for i in range(V_FIRST_SLOT):
            total += viol[i]
        if total > 0:
            viol[V_FIRST_SLOT] = t


# ---------------------------------------------------------------------------
# seeded randomness
# ---------------------------------------------------------------------------

@njit(cache=True)
def rng_seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def log_weight(total_jobs):
    return np.log(1.0 + total_jobs)


@njit(cache=True)
def bias_value(wbl, alpha):
    f = float(wbl) ** alpha
    return f if f > 1.0 else 1.0


@njit(cache=True)
def draw_arrivals(rates, a_max, out):
    """Fill out (M,S) with Binomial(a_max, rate/a_max) draws, row-major order."""
    M, S = rates.shape
    for m in range(M):
        for s in range(S):
            p = rates[m, s] / a_max
            if p > 0.0:
                out[m, s] = np.random.binomial(a_max, p)
            else:
                out[m, s] = 0


@njit(cache=True)
def draw_served_sizes(comp_row, k, out):
    """Uniform k-subset of an urn with comp_row[i] balls of color i (exact)."""
    n = comp_row.shape[0]
    tot = 0
    for i in range(n):
        out[i] = 0
        tot += comp_row[i]
    rem = np.empty(n, np.int64)
    for i in range(n):
        rem[i] = comp_row[i]
    for _ in range(k):
        u = np.random.random() * tot
        acc = 0.0
        pick = n - 1
        for i in range(n):
            acc += rem[i]
            if u < acc:
                pick = i
                break
        out[pick] += 1
        rem[pick] -= 1
        tot -= 1


@njit(cache=True)
def draw_hypergeometric(ngood, nbad, k):
    """Number of 'good' draws in a uniform k-subset of the urn (exact walk)."""
    good = ngood
    bad = nbad
    cnt = 0
    for _ in range(k):
        u = np.random.random() * (good + bad)
        if u < good:
            cnt += 1
            good -= 1
        else:
            bad -= 1
    return cnt


# ---------------------------------------------------------------------------
# per-type allocation of an aggregate over size/age cells
# ---------------------------------------------------------------------------

@njit(cache=True)
def _alloc_type(w, qrow, crow, out):
    """Distribute w units over cells, migration-minimal, maximizing sum q*N.

    If w covers the continuation demand crow entirely, cover it and put the
    surplus on the first highest-q cell; otherwise fill cells greedily by
    queue weight without exceeding any cell's demand (any unit beyond a
    demand cell would forfeit one covered continuation). Returns the
    tie-break value sum_s qrow[s]*out[s].
    """
    S = qrow.shape[0]
    C = 0
    for s in range(S):
        out[s] = 0
        C += crow[s]
    tie = 0
    if w >= C:
        for s in range(S):
            out[s] = crow[s]
            tie += qrow[s] * crow[s]
        best = 0
        for s in range(1, S):
            if qrow[s] > qrow[best]:
                best = s
        out[best] += w - C
        tie += (w - C) * qrow[best]
    else:
        rem = w
        while rem > 0:
            best = -1
            for s in range(S):
                if out[s] < crow[s] and (best == -1 or qrow[s] > qrow[best]):
                    best = s
            take = crow[best] - out[best]
            if take > rem:
                take = rem
            out[best] += take
            tie += take * qrow[best]
            rem -= take
    return tie


@njit(cache=True)
def _alloc_free(w, qrow, out):
    """All w units on the first highest-q cell; returns the tie value."""
    S = qrow.shape[0]
    best = 0
    for s in range(S):
        out[s] = 0
        if qrow[s] > qrow[best]:
            best = s
    out[best] = w
    return w * qrow[best]


# ---------------------------------------------------------------------------
# per-server argmax solvers
# ---------------------------------------------------------------------------

@njit(cache=True)
def dpp_server(W, ncfg, q, Jw, cover, cost_obj, V, U, out):
    """Drift-plus-penalty choice for one server.

    Maximizes sum_m Jw[m]*W_m - V*C1(W) - U*sum_m (cont_m - W_m)^+ over the
    feasible aggregates, then maximizes sum q*N among optimal allocations
    (first optimum in lex order wins remaining ties). With U = 0 the
    allocation is unconstrained; otherwise only migration-minimal ones are
    optimal. Fills out (M,S) and returns the chosen aggregate index.
    """
    M, S = q.shape
    covtot = np.empty(M, np.int64)
    for m in range(M):
        t = 0
        for s in range(S):
            t += cover[m, s]
        covtot[m] = t
    tmp = np.empty(S, np.int64)
    best_c = -1
    best_score = 0.0
    best_tie = np.int64(0)
    for c in range(ncfg):
        lin = 0.0
        mig = 0
        for m in range(M):
            lin += Jw[m] * W[c, m]
            d = covtot[m] - W[c, m]
            if d > 0:
                mig += d
        score = lin - V * cost_obj[c] - U * mig
        if best_c == -1 or score >= best_score:
            tie = np.int64(0)
            for m in range(M):
                if U > 0.0:
                    tie += _alloc_type(W[c, m], q[m], cover[m], tmp)
                else:
                    tie += _alloc_free(W[c, m], q[m], tmp)
            if best_c == -1 or score > best_score or tie > best_tie:
                best_c = c
                best_score = score
                best_tie = tie
    for m in range(M):
        if U > 0.0:
            _alloc_type(W[best_c, m], q[m], cover[m], out[m])
        else:
            _alloc_free(W[best_c, m], q[m], out[m])
    return best_c


@njit(cache=True)
def refined_server(W, ncfg, q, Jw, cover, cost_obj, V, alpha, out):
    """Migration-penalized max-weight: subtracts (sum_m mig_m*Jw[m])^(1-alpha).

    For a fixed aggregate the penalty argument is minimized componentwise at
    mig_m = (cont_m - W_m)^+, so aggregates suffice; allocation as dpp_server.
    """
    M, S = q.shape
    covtot = np.empty(M, np.int64)
    for m in range(M):
        t = 0
        for s in range(S):
            t += cover[m, s]
        covtot[m] = t
    tmp = np.empty(S, np.int64)
    best_c = -1
    best_score = 0.0
    best_tie = np.int64(0)
    for c in range(ncfg):
        lin = 0.0
        migj = 0.0
        for m in range(M):
            lin += Jw[m] * W[c, m]
            d = covtot[m] - W[c, m]
            if d > 0:
                migj += d * Jw[m]
        pen = migj ** (1.0 - alpha) if migj > 0.0 else 0.0
        score = lin - V * cost_obj[c] - pen
        if best_c == -1 or score > best_score:
            tie = np.int64(0)
            for m in range(M):
                tie += _alloc_type(W[c, m], q[m], cover[m], tmp)
            best_c = c
            best_score = score
            best_tie = tie
        elif score == best_score:
            tie = np.int64(0)
            for m in range(M):
                tie += _alloc_type(W[c, m], q[m], cover[m], tmp)
            if tie > best_tie:
                best_c = c
                best_tie = tie
    for m in range(M):
        _alloc_type(W[best_c, m], q[m], cover[m], out[m])
    return best_c


@njit(cache=True)
def _uncover_tie(wagg, q, cover, tmp):
    """Best tie value over allocations that drop at least one carried-over job.

    Builds the per-type free optimum; if that happens to keep every
    carried-over job, the tie-cheapest single-cell sacrifice is priced.
    Returns (tie, m0, s0, cap): m0 < 0 means the free allocation already
    violates; otherwise type m0 caps cell s0 at cap and routes its surplus to
    the best other cell.
    """
    M, S = q.shape
    total_free = np.int64(0)
    free_tie = np.empty(M, np.int64)
    covered = True
    for m in range(M):
        free_tie[m] = _alloc_free(wagg[m], q[m], tmp)
        total_free += free_tie[m]
        for s in range(S):
            if tmp[s] < cover[m, s]:
                covered = False
    if not covered:
        return total_free, -1, -1, np.int64(0)
    # every positive-demand cell is covered by the free optimum: pick the
    # cheapest violation (m0, s0) with cover > 0
    best_tie = np.int64(-1)
    best_m = -1
    best_s = -1
    best_cap = np.int64(0)
    for m in range(M):
        w = wagg[m]
        for s0 in range(S):
            if cover[m, s0] <= 0:
                continue
            other = np.int64(-1)
            for s in range(S):
                if s != s0 and (other == -1 or q[m, s] > other):
                    other = q[m, s]
            cap = cover[m, s0] - 1
            if cap > w:
                cap = w
            alt_a = w * other                              # skip s0 entirely
            alt_b = cap * q[m, s0] + (w - cap) * other     # fill s0 to cap
            alt = alt_a if alt_a >= alt_b else alt_b
            cand = total_free - free_tie[m] + alt
            if cand > best_tie:
                best_tie = cand
                best_m = m
                best_s = s0
                best_cap = cap if alt_b > alt_a else np.int64(0)
    return best_tie, best_m, best_s, best_cap


@njit(cache=True)
def _build_uncover(wagg, q, cover, m0, s0, cap, out):
    """Materialize the allocation priced by _uncover_tie."""
    M, S = q.shape
    for m in range(M):
        _alloc_free(wagg[m], q[m], out[m])
    if m0 >= 0:
        for s in range(S):
            out[m0, s] = 0
        out[m0, s0] = cap
        other = -1
        for s in range(S):
            if s != s0 and (other == -1 or q[m0, s] > q[m0, other]):
                other = s
        out[m0, other] += wagg[m0] - cap


@njit(cache=True)
def qbmw_server(W, ncfg, q, Jw, cover, cost_obj, V, F, first_slot, out):
    """Queue-biased max-weight choice for one server.

    Configurations that keep every carried-over job in place score
    (1 + 1/F) * [sum_m Jw[m]*W_m - V*C1(W)]; all others score the bare
    bracket. On the very first slot no configuration gets the bias. Fills
    out (M,S); returns 1 if the chosen configuration migrates nothing.
    """
    M, S = q.shape
    covtot = np.empty(M, np.int64)
    ctot = 0
    for m in range(M):
        t = 0
        for s in range(S):
            t += cover[m, s]
        covtot[m] = t
        ctot += t
    tmp = np.empty(S, np.int64)
    best_c = -1
    best_score = 0.0
    best_tie = np.int64(0)
    best_member = 0
    best_m0 = -1
    best_s0 = -1
    best_cap = np.int64(0)
    for c in range(ncfg):
        bracket = 0.0
        can_cover = True
        for m in range(M):
            bracket += Jw[m] * W[c, m]
            if W[c, m] < covtot[m]:
                can_cover = False
        bracket -= V * cost_obj[c]
        if first_slot == 0 and (can_cover or ctot == 0):
            score = (1.0 + 1.0 / F) * bracket
            tie = np.int64(0)
            for m in range(M):
                tie += _alloc_type(W[c, m], q[m], cover[m], tmp)
            if best_c == -1 or score > best_score or (score == best_score and tie > best_tie):
                best_c = c
                best_score = score
                best_tie = tie
                best_member = 1
        if first_slot == 1 or ctot > 0:
            score = bracket
            tie, m0, s0, cap = _uncover_tie(W[c], q, cover, tmp)
            if first_slot == 1:
                # the no-migration set starts empty: allocation unconstrained
                tie = np.int64(0)
                for m in range(M):
                    tie += _alloc_free(W[c, m], q[m], tmp)
                m0 = -1
                s0 = -1
                cap = np.int64(0)
            if best_c == -1 or score > best_score or (score == best_score and tie > best_tie):
                best_c = c
                best_score = score
                best_tie = tie
                best_member = 0
                best_m0 = m0
                best_s0 = s0
                best_cap = cap
    if best_member == 1:
        for m in range(M):
            _alloc_type(W[best_c, m], q[m], cover[m], out[m])
    else:
        _build_uncover(W[best_c], q, cover, best_m0, best_s0, best_cap, out)
    return best_member


@njit(cache=True)
def nonpre_admit(W, ncfg, avail, n_prev_l, Jw, slots_left, out):
    """Frame-based no-preemption schedule for one server.

    Keeps every running job, then greedily admits whole VMs for the
    highest-backlog type whose queue holds a job short enough to finish
    within the frame. Consumes from the shared avail pool in place.
    """
    M, S = out.shape
    wcur = np.empty(M, np.int64)
    for m in range(M):
        t = 0
        for s in range(S):
            c = n_prev_l[m, s + 1] if s + 1 < S else 0
            out[m, s] = c
            t += c
        wcur[m] = t
    while True:
        best_m = -1
        for m in range(M):
            if best_m != -1 and Jw[m] <= Jw[best_m]:
                continue
            # a job must exist with residual size within the frame remainder
            has_job = False
            lim = slots_left if slots_left < S else S
            for s in range(lim):
                if avail[m, s] > 0:
                    has_job = True
                    break
            if not has_job:
                continue
            # one more type-m VM must still be dominated by a feasible aggregate
            ok = False
            for c in range(ncfg):
                fits = True
                for mm in range(M):
                    need = wcur[mm] + (1 if mm == m else 0)
                    if W[c, mm] < need:
                        fits = False
                        break
                if fits:
                    ok = True
                    break
            if ok:
                best_m = m
        if best_m == -1:
            return
        # admit the largest job that fits in the frame remainder
        lim = slots_left if slots_left < S else S
        pick = -1
        for s in range(lim - 1, -1, -1):
            if avail[best_m, s] > 0:
                pick = s
                break
        avail[best_m, pick] -= 1
        out[best_m, pick] += 1
        wcur[best_m] += 1


# ---------------------------------------------------------------------------
# queue transitions
# ---------------------------------------------------------------------------

@njit(cache=True)
def realize_core(Q, n_prev, N_bar, out, reserve_all):
    """Turn prescribed configs into actual ones against the shared queues.

    Each server first keeps min(N_bar, carried-over) jobs from its previous
    slot, then servers in ascending order draw the remainder of their
    prescription from the leftover queue. reserve_all=1 additionally removes
    dropped carried-over jobs from the pool for this slot (offline model:
    they are in their one-slot migration and unservable). Returns 0, or 1 if
    carried-over jobs exceed a queue (internal inconsistency).
    """
    L, M, S = n_prev.shape
    err = 0
    for m in range(M):
        for s in range(S):
            cont_tot = 0
            kept_tot = 0
            for l in range(L):
                cont = n_prev[l, m, s + 1] if s + 1 < S else 0
                kept = N_bar[l, m, s] if N_bar[l, m, s] < cont else cont
                out[l, m, s] = kept
                cont_tot += cont
                kept_tot += kept
            if cont_tot > Q[m, s]:
                err = 1
            rem = Q[m, s] - (cont_tot if reserve_all == 1 else kept_tot)
            if rem < 0:
                rem = 0
            for l in range(L):
                want = N_bar[l, m, s] - out[l, m, s]
                take = want if want < rem else rem
                out[l, m, s] += take
                rem -= take
    return err


@njit(cache=True)
def realize_age_core(Qt, n_prev, z_prev, N_tilde, out):
    """Age-model realization: carried-over base is served-minus-departed."""
    L, M, S = n_prev.shape
    err = 0
    for m in range(M):
        for a in range(S):
            base_tot = 0
            kept_tot = 0
            for l in range(L):
                base = (n_prev[l, m, a - 1] - z_prev[l, m, a - 1]) if a >= 1 else 0
                if base < 0:
                    err = 1
                    base = 0
                kept = N_tilde[l, m, a] if N_tilde[l, m, a] < base else base
                out[l, m, a] = kept
                base_tot += base
                kept_tot += kept
            if base_tot > Qt[m, a]:
                err = 1
            rem = Qt[m, a] - kept_tot
            if rem < 0:
                rem = 0
            for l in range(L):
                want = N_tilde[l, m, a] - out[l, m, a]
                take = want if want < rem else rem
                out[l, m, a] += take
                rem -= take
    return err


@njit(cache=True)
def advance_known_core(Q, nbar_tot, A, out):
    """(Q - prescribed)^+ + arrivals + served-above inflow."""
    M, S = Q.shape
    for m in range(M):
        for s in range(S):
            v = Q[m, s] - nbar_tot[m, s]
            if v < 0:
                v = 0
            v += A[m, s]
            if s + 1 < S:
                inflow = nbar_tot[m, s + 1]
                if inflow > Q[m, s + 1]:
                    inflow = Q[m, s + 1]
                v += inflow
            out[m, s] = v


@njit(cache=True)
def advance_age_core(Qt, ntld_tot, Z_tot, A_type, out):
    """Age-queue step; age 0 absorbs all arrivals. Returns 1 on negative count."""
    M, S = Qt.shape
    err = 0
    for m in range(M):
        v = Qt[m, 0] - ntld_tot[m, 0]
        if v < 0:
            v = 0
        out[m, 0] = v + A_type[m]
        for a in range(1, S):
            v = Qt[m, a] - ntld_tot[m, a]
            if v < 0:
                v = 0
            served_prev = ntld_tot[m, a - 1]
            if served_prev > Qt[m, a - 1]:
                served_prev = Qt[m, a - 1]
            v += served_prev - Z_tot[m, a - 1]
            if v < 0:
                err = 1
                v = 0
            out[m, a] = v
    return err


@njit(cache=True)
def advance_offline_core(Q, N, N_prev, A, out):
    """Migration-delay queue step: dropped carried-over jobs regain one slot.

    N and N_prev are actual per-server configs at t and t-1. Returns 1 on a
    negative count (internal inconsistency).
    """
    L, M, S = N.shape
    err = 0
    for m in range(M):
        for s in range(S):
            v = Q[m, s] + A[m, s]
            for l in range(L):
                v -= N[l, m, s]
                if s + 1 < S:
                    v += N[l, m, s + 1]
                    d = N_prev[l, m, s + 1] - N[l, m, s]
                    if d > 0:
                        v -= d
                if s >= 1:
                    d = N_prev[l, m, s] - N[l, m, s - 1]
                    if d > 0:
                        v += d
            if v < 0:
                err = 1
                v = 0
            out[m, s] = v
    return err


@njit(cache=True)
def c2_pair(n_prev_l, nxt_l):
    """Migration cost between consecutive configs at one server."""
    M, S = n_prev_l.shape
    tot = 0
    for m in range(M):
        for s in range(1, S):
            d = n_prev_l[m, s] - nxt_l[m, s - 1]
            if d > 0:
                tot += d
    return tot


@njit(cache=True)
def c2_age(n_prev_l, z_prev_l, nxt_l):
    """Age-model migration cost between consecutive configs at one server."""
    M, S = n_prev_l.shape
    tot = 0
    for m in range(M):
        for a in range(S - 1):
            d = n_prev_l[m, a] - z_prev_l[m, a] - nxt_l[m, a + 1]
            if d > 0:
                tot += d
    return tot


# ---------------------------------------------------------------------------
# run kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _server_cost_actual(N_l, cvec, c0, is_binary):
    M, S = N_l.shape
    tot = 0
    dyn = 0.0
    for m in range(M):
        agg = 0
        for s in range(S):
            agg += N_l[m, s]
        tot += agg
        dyn += cvec[m] * agg
    if tot == 0:
        return 0.0, 0
    if is_binary == 1:
        return c0, 1
    return c0 + dyn, 1


@njit(cache=True)
def _record(acc, t, T, warmup, qlen, wbl, scost, active, mign, migc):
    qi = (t - 1) * 4 // T
    acc[A_Q1 + qi] += qlen
    acc[A_Q1 + 4 + qi] += 1.0
    if t > warmup:
        acc[A_SLOTS] += 1.0
        acc[A_QLEN] += qlen
        acc[A_WBL] += wbl
        acc[A_SCOST] += scost
        acc[A_ACTIVE] += active
        acc[A_MIGN] += mign
        acc[A_MIGC] += migc


@njit(cache=True)
def run_known(seed, T, warmup, rates, a_max, W, ncfg, cost_obj, cvec, c0,
              is_binary, U, V, sched_code, frame_len, acc, viol, Q_out):
    """Online-migration loop, residual-size queues.

    sched_code 0: size-aware drift-plus-penalty argmax (cost-blind baseline is
    the U=V=0 special case). sched_code 1: frame-based no-preemption baseline.
    """
    L = W.shape[0]
    M, S = rates.shape
    Q = np.zeros((M, S), np.int64)
    Qn = np.zeros((M, S), np.int64)
    n_prev = np.zeros((L, M, S), np.int64)
    N_bar = np.zeros((L, M, S), np.int64)
    N = np.zeros((L, M, S), np.int64)
    A = np.zeros((M, S), np.int64)
    cover = np.zeros((M, S), np.int64)
    nbar_tot = np.zeros((M, S), np.int64)
    avail = np.zeros((M, S), np.int64)
    Jw = np.zeros(M, np.float64)

    rng_seed(seed)
    draw_arrivals(rates, a_max, A)
    for m in range(M):
        for s in range(S):
            Q[m, s] = A[m, s]

    for t in range(1, T + 1):
        # weights
        qlen = 0
        wbl = 0
        for m in range(M):
            jm = 0
            for s in range(S):
                qlen += Q[m, s]
                jm += (s + 1) * Q[m, s]
            wbl += jm
            Jw[m] = jm

        # decide
        if sched_code == 1:
            for m in range(M):
                for s in range(S):
                    cont_all = 0
                    for l in range(L):
                        cont_all += n_prev[l, m, s + 1] if s + 1 < S else 0
                    avail[m, s] = Q[m, s] - cont_all
                    if avail[m, s] < 0:
                        avail[m, s] = 0
            slots_left = frame_len - (t - 1) % frame_len
            for l in range(L):
                nonpre_admit(W[l], ncfg[l], avail, n_prev[l], Jw, slots_left, N_bar[l])
        else:
            for l in range(L):
                for m in range(M):
                    for s in range(S):
                        cover[m, s] = n_prev[l, m, s + 1] if s + 1 < S else 0
                dpp_server(W[l], ncfg[l], Q, Jw, cover, cost_obj[l], V, U, N_bar[l])

        # realize and cost
        if realize_core(Q, n_prev, N_bar, N, 0) != 0:
            viol[V_PRE] += 1
        scost = 0.0
        active = 0
        migc = 0
        migc_act = 0
        for l in range(L):
            c, on = _server_cost_actual(N[l], cvec, c0, is_binary)
            scost += c
            active += on
            migc += c2_pair(n_prev[l], N_bar[l])
            migc_act += c2_pair(n_prev[l], N[l])
            for m in range(M):
                for s in range(S):
                    cont = n_prev[l, m, s + 1] if s + 1 < S else 0
                    floor = N_bar[l, m, s] if N_bar[l, m, s] < cont else cont
                    if N[l, m, s] < floor:
                        viol[V_COND1] += 1
        if migc != migc_act:
            viol[V_C2ID] += 1
        if is_binary == 1 and scost != c0 * active:
            viol[V_BINACT] += 1

        _record(acc, t, T, warmup, qlen, wbl, scost, active, migc, migc)

        # advance
        draw_arrivals(rates, a_max, A)
        for m in range(M):
            for s in range(S):
                tot = 0
                for l in range(L):
                    tot += N_bar[l, m, s]
                nbar_tot[m, s] = tot
        advance_known_core(Q, nbar_tot, A, Qn)
        completions = 0
        total_new = 0
        total_old = 0
        total_a = 0
        for m in range(M):
            for l in range(L):
                completions += N[l, m, 0]
            for s in range(S):
                total_new += Qn[m, s]
                total_old += Q[m, s]
                total_a += A[m, s]
        if total_new != total_old + total_a - completions:
            viol[V_CONSERVE] += 1
        for m in range(M):
            for s in range(S):
                Q[m, s] = Qn[m, s]
        for l in range(L):
            for m in range(M):
                for s in range(S):
                    n_prev[l, m, s] = N[l, m, s]
        _stamp_first_violation(viol, t)

    fq = 0
    fw = 0
    for m in range(M):
        for s in range(S):
            fq += Q[m, s]
            fw += (s + 1) * Q[m, s]
            Q_out[m, s] = Q[m, s]
    acc[A_FINAL_Q] = fq
    acc[A_FINAL_W] = fw


@njit(cache=True)
def run_offline(seed, T, warmup, rates, a_max, W, ncfg, cost_obj, cvec, c0,
                is_binary, V, alpha, sched_code, k0, acc, viol, Q_out):
    """Offline-migration loop (one-slot downtime as regained work).

    sched_code 0: queue-biased max-weight with stored bias denominators and
    migration-interval tracking. sched_code 1: migration-penalized variant.
    """
    L = W.shape[0]
    M, S = rates.shape
    Q = np.zeros((M, S), np.int64)
    Qn = np.zeros((M, S), np.int64)
    n_prev = np.zeros((L, M, S), np.int64)
    N_bar = np.zeros((L, M, S), np.int64)
    N = np.zeros((L, M, S), np.int64)
    A = np.zeros((M, S), np.int64)
    cover = np.zeros((M, S), np.int64)
    Jw = np.zeros(M, np.float64)
    stored_F = np.ones(L, np.float64)
    epoch_t = np.zeros(L, np.int64)
    epoch_wbl = np.zeros(L, np.int64)

    rng_seed(seed)
    draw_arrivals(rates, a_max, A)
    for m in range(M):
        for s in range(S):
            Q[m, s] = A[m, s]

    for t in range(1, T + 1):
        qlen = 0
        wbl = 0
        for m in range(M):
            jm = 0
            for s in range(S):
                qlen += Q[m, s]
                jm += (s + 1) * Q[m, s]
            wbl += jm
            Jw[m] = jm

        for l in range(L):
            for m in range(M):
                for s in range(S):
                    cover[m, s] = n_prev[l, m, s + 1] if s + 1 < S else 0
            if sched_code == 0:
                member = qbmw_server(W[l], ncfg[l], Q, Jw, cover, cost_obj[l], V,
                                     stored_F[l], 1 if t == 1 else 0, N_bar[l])
                if member == 0:
                    # migration epoch: check the interval bound, refresh the bias
                    if epoch_t[l] > 0:
                        interval = t - epoch_t[l]
                        base = float(epoch_wbl[l]) - 2.0 * V
                        bound = 1.0
                        if base > 0.0:
                            b = k0 * base ** (1.0 - alpha)
                            if b > bound:
                                bound = b
                        if interval + 1e-9 < bound:
                            viol[V_MIGINT] += 1
                    epoch_t[l] = t
                    epoch_wbl[l] = wbl
                    stored_F[l] = bias_value(wbl, alpha)
            else:
                refined_server(W[l], ncfg[l], Q, Jw, cover, cost_obj[l], V, alpha, N_bar[l])

        if realize_core(Q, n_prev, N_bar, N, 1) != 0:
            viol[V_PRE] += 1
        scost = 0.0
        active = 0
        mign = 0
        mign_bar = 0
        for l in range(L):
            c, on = _server_cost_actual(N[l], cvec, c0, is_binary)
            scost += c
            active += on
            mign += c2_pair(n_prev[l], N[l])
            mign_bar += c2_pair(n_prev[l], N_bar[l])
            for m in range(M):
                for s in range(S):
                    cont = n_prev[l, m, s + 1] if s + 1 < S else 0
                    floor = N_bar[l, m, s] if N_bar[l, m, s] < cont else cont
                    if N[l, m, s] < floor:
                        viol[V_COND1] += 1
        if mign != mign_bar:
            viol[V_C2ID] += 1
        if is_binary == 1 and scost != c0 * active:
            viol[V_BINACT] += 1

        _record(acc, t, T, warmup, qlen, wbl, scost, active, mign, mign)

        draw_arrivals(rates, a_max, A)
        if advance_offline_core(Q, N, n_prev, A, Qn) != 0:
            viol[V_NEGQ] += 1
        # per-type workload identity: regained work equals migrated jobs
        for m in range(M):
            new_w = 0
            old_w = 0
            a_w = 0
            served = 0
            mig_m = 0
            for s in range(S):
                new_w += (s + 1) * Qn[m, s]
                old_w += (s + 1) * Q[m, s]
                a_w += (s + 1) * A[m, s]
                for l in range(L):
                    served += N[l, m, s]
                    if s >= 1:
                        d = n_prev[l, m, s] - N[l, m, s - 1]
                        if d > 0:
                            mig_m += d
            if new_w != old_w - served + a_w + mig_m:
                viol[V_WLID] += 1
        completions = 0
        total_new = 0
        total_old = 0
        total_a = 0
        for m in range(M):
            for l in range(L):
                completions += N[l, m, 0]
            for s in range(S):
                total_new += Qn[m, s]
                total_old += Q[m, s]
                total_a += A[m, s]
        if total_new != total_old + total_a - completions:
            viol[V_CONSERVE] += 1
        for m in range(M):
            for s in range(S):
                Q[m, s] = Qn[m, s]
        for l in range(L):
            for m in range(M):
                for s in range(S):
                    n_prev[l, m, s] = N[l, m, s]
        _stamp_first_violation(viol, t)

    fq = 0
    fw = 0
    for m in range(M):
        for s in range(S):
            fq += Q[m, s]
            fw += (s + 1) * Q[m, s]
            Q_out[m, s] = Q[m, s]
    acc[A_FINAL_Q] = fq
    acc[A_FINAL_W] = fw


@njit(cache=True)
def run_age(seed, T, warmup, rates, a_max, W, ncfg, cost_obj, cvec, c0,
            is_binary, U, V, acc, viol, Q_out):
    """Unknown-size loop: age-indexed queues with a hidden size composition.

    comp[m, a, i] counts type-m jobs of age a whose true size is i+1; served
    jobs are a uniform random subset of their class, departures are the
    served jobs whose size equals age+1.
    """
    L = W.shape[0]
    M, S = rates.shape
    Qt = np.zeros((M, S), np.int64)
    Qn = np.zeros((M, S), np.int64)
    comp = np.zeros((M, S, S), np.int64)
    n_prev = np.zeros((L, M, S), np.int64)
    z_prev = np.zeros((L, M, S), np.int64)
    N_tld = np.zeros((L, M, S), np.int64)
    N = np.zeros((L, M, S), np.int64)
    Z = np.zeros((L, M, S), np.int64)
    A = np.zeros((M, S), np.int64)
    cover = np.zeros((M, S), np.int64)
    ntld_tot = np.zeros((M, S), np.int64)
    Z_tot = np.zeros((M, S), np.int64)
    A_type = np.zeros(M, np.int64)
    drawn = np.zeros(S, np.int64)
    Jw = np.zeros(M, np.float64)

    rng_seed(seed)
    draw_arrivals(rates, a_max, A)
    for m in range(M):
        for s in range(S):
            Qt[m, 0] += A[m, s]
            comp[m, 0, s] += A[m, s]

    for t in range(1, T + 1):
        qlen = 0
        wbl = 0
        for m in range(M):
            tot = 0
            for a in range(S):
                tot += Qt[m, a]
                for i in range(S):
                    wbl += (i + 1 - a) * comp[m, a, i]
            qlen += tot
            Jw[m] = log_weight(tot)

        for l in range(L):
            for m in range(M):
                cover[m, 0] = 0
                for a in range(1, S):
                    cover[m, a] = n_prev[l, m, a - 1] - z_prev[l, m, a - 1]
            dpp_server(W[l], ncfg[l], Qt, Jw, cover, cost_obj[l], V, U, N_tld[l])

        if realize_age_core(Qt, n_prev, z_prev, N_tld, N) != 0:
            viol[V_PRE] += 1

        # departures: uniform subsets per class, oldest classes first
        completions = 0
        for m in range(M):
            for a in range(S - 1, -1, -1):
                ktot = 0
                for l in range(L):
                    ktot += N[l, m, a]
                    Z[l, m, a] = 0
                if ktot == 0:
                    continue
                draw_served_sizes(comp[m, a], ktot, drawn)
                d = drawn[a]
                completions += d
                rem_d = d
                rem_k = ktot
                for l in range(L):
                    z = draw_hypergeometric(rem_d, rem_k - rem_d, N[l, m, a])
                    Z[l, m, a] = z
                    rem_d -= z
                    rem_k -= N[l, m, a]
                for i in range(S):
                    comp[m, a, i] -= drawn[i]
                    if i > a:
                        comp[m, a + 1, i] += drawn[i]

        scost = 0.0
        active = 0
        migc = 0
        migc_act = 0
        for l in range(L):
            c, on = _server_cost_actual(N[l], cvec, c0, is_binary)
            scost += c
            active += on
            migc += c2_age(n_prev[l], z_prev[l], N_tld[l])
            migc_act += c2_age(n_prev[l], z_prev[l], N[l])
        if migc != migc_act:
            viol[V_C2ID] += 1
        if is_binary == 1 and scost != c0 * active:
            viol[V_BINACT] += 1

        _record(acc, t, T, warmup, qlen, wbl, scost, active, migc, migc)

        draw_arrivals(rates, a_max, A)
        for m in range(M):
            at = 0
            for a in range(S):
                tot1 = 0
                tot2 = 0
                for l in range(L):
                    tot1 += N_tld[l, m, a]
                    tot2 += Z[l, m, a]
                ntld_tot[m, a] = tot1
                Z_tot[m, a] = tot2
                at += A[m, a]
            A_type[m] = at
        if advance_age_core(Qt, ntld_tot, Z_tot, A_type, Qn) != 0:
            viol[V_NEGQ] += 1
        total_new = 0
        total_old = 0
        total_a = 0
        for m in range(M):
            for a in range(S):
                total_new += Qn[m, a]
                total_old += Qt[m, a]
                total_a += A[m, a]
        if total_new != total_old + total_a - completions:
            viol[V_CONSERVE] += 1
        for m in range(M):
            for s in range(S):
                comp[m, 0, s] += A[m, s]
        # the hidden composition must tile the visible queues exactly
        for m in range(M):
            for a in range(S):
                tot = 0
                for i in range(S):
                    if i < a and comp[m, a, i] != 0:
                        viol[V_COMP] += 1
                    tot += comp[m, a, i]
                if tot != Qn[m, a]:
                    viol[V_COMP] += 1
        for m in range(M):
            for a in range(S):
                Qt[m, a] = Qn[m, a]
        for l in range(L):
            for m in range(M):
                for a in range(S):
                    n_prev[l, m, a] = N[l, m, a]
                    z_prev[l, m, a] = Z[l, m, a]
        _stamp_first_violation(viol, t)

    fq = 0
    fw = 0
    for m in range(M):
        for a in range(S):
            fq += Qt[m, a]
            Q_out[m, a] = Qt[m, a]
            for i in range(S):
                fw += (i + 1 - a) * comp[m, a, i]
    acc[A_FINAL_Q] = fq
    acc[A_FINAL_W] = fw
