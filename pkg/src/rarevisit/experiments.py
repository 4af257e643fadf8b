"""Verification experiments: each returns a ResultRecord with a pass flag.

Every experiment is a pure function of its parameters and seed.  Trial t of
an experiment uses the Philox stream ``stream0 + t``; experiments with several
cases give each case its own block of streams.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np

from . import conditioned as cond
from . import gw as gwm
from . import oracle
from .excursion import WEAK, k_increments, nk_decrease_indicators, sample_segment, sample_skeleton
from .localtime import dd_visit_histogram, dyadic_checkpoints, f_trace
from .rng import RandomStream
from .stats import ResultRecord, proportion, record_from, summarize
from .walk import escape_frequency, hit_upper_batch

RUIN_TRIPLES = [
    (0, 10, 3), (0, 10, 7), (-5, 5, 0), (0, 2, 1), (0, 100, 1),
    (0, 100, 50), (-20, 3, -10), (0, 7, 6), (10, 60, 45), (-1, 30, 0),
]

Progress = Callable[[str], None]


def _quiet(msg: str) -> None:
    pass


def _composite(name: str, params: dict, trials: int, seed: int, passed: bool, **details) -> ResultRecord:
    return ResultRecord(name, params, None, None, None, trials, seed, bool(passed), details)


def _z(est, se, truth):
    if se == 0:
        return 0.0 if est == truth else math.inf
    return (est - truth) / se


# --- closed-form probabilities ----------------------------------------------------


def verify_ruin(seed: int = 7, trials: int = 100_000, progress: Progress = _quiet, **_) -> ResultRecord:
    """Exit-at-top frequency and the banded Dirichlet solve against (start - lower) / (upper - lower)."""
    cases = []
    ok = True
    for k, (lo, hi, s) in enumerate(RUIN_TRIPLES):
        progress(f"ruin {k + 1}/{len(RUIN_TRIPLES)}: ({lo}, {hi}, {s})")
        truth = cond.ruin_probability(lo, hi, s)
        solved = oracle.hitting_solve(lo, hi, s)
        u = oracle.hitting_vector(lo, hi)
        hits = hit_upper_batch(s, lo, hi, trials, seed, stream0=k * trials)
        res = proportion(int(hits.sum()), trials, seed)
        z = res.z(truth)
        good = abs(z) <= 3 and abs(solved - truth) <= 1e-12 and oracle.dirichlet_residual(u) <= 1e-12
        ok &= good
        cases.append({"triple": [lo, hi, s], "truth": truth, "estimate": res.estimate, "stderr": res.stderr,
                      "z": z, "oracle": solved, "oracle_error": abs(solved - truth), "pass": good})
    return _composite("ruin", {"trials": trials}, trials, seed, ok, cases=cases)


def verify_geometric(seed: int = 11, trials: int = 1_000_000, r_values=range(2, 9), cap: int = 32,
                     progress: Progress = _quiet, **_) -> ResultRecord:
    """Visits to the base by a walk conditioned never to go below it: P(>= r) = 2^-(r-1)."""
    progress(f"geometric: {trials} conditioned walks")
    visits = cond.base_visit_counts(trials, seed, cap=cap)
    cases = []
    ok = True
    for r in r_values:
        truth = cond.visit_min_probability(math.inf, r)
        res = proportion(int((visits >= r).sum()), trials, seed)
        good = res.within(truth)
        ok &= good
        cases.append({"r": r, "truth": truth, "estimate": res.estimate, "stderr": res.stderr,
                      "z": res.z(truth), "pass": good})
    return _composite("geometric", {"trials": trials, "cap": cap}, trials, seed, ok, cases=cases)


def verify_event_b(seed: int = 13, trials: int = 1_000_000, width: int = 50, r_values=(2, 3, 4),
                   progress: Progress = _quiet, **_) -> ResultRecord:
    """Visits to a fresh segment minimum at width w: P(>= r) = ((1/2) w / (w + 1))^(r-1)."""
    progress(f"eventB: {trials} accepted segment tails at width {width}")
    visits, attempts = cond.min_visit_counts(width, trials, seed)
    cases = []
    ok = True
    for r in r_values:
        truth = cond.visit_min_probability(width, r)
        weak = ((width - 1) / (2 * width)) ** (r - 1)
        res = proportion(int((visits >= r).sum()), trials, seed)
        good = res.within(truth)
        ok &= good
        cases.append({"r": r, "truth": truth, "estimate": res.estimate, "stderr": res.stderr,
                      "z": res.z(truth), "weak_convention_value": weak, "pass": good})
    acc = trials / attempts
    return _composite("eventB", {"trials": trials, "width": width}, trials, seed, ok, cases=cases,
                      attempts=attempts, acceptance=acc, acceptance_truth=1 / (width + 2))


def interior_instances(count: int = 50, max_width: int = 64) -> list:
    """Deterministic spread of (a, b, r) with a + b <= max_width."""
    out = []
    k = 0
    while len(out) < count:
        a = 1 + (7 * k) % (max_width // 2)
        b = 1 + (11 * k + 3) % (max_width // 2)
        r = 1 + (5 * k) % 9
        out.append((a, b, r))
        k += 1
    return out


MC_INTERIOR = [(1, 1, 2), (2, 3, 3), (5, 5, 2), (10, 3, 4), (3, 10, 4), (8, 8, 5), (20, 20, 3),
               (1, 30, 2), (15, 4, 6), (6, 25, 8)]


def verify_interior(seed: int = 17, trials: int = 100_000, progress: Progress = _quiet, **_) -> ResultRecord:
    """Visits to a site before leaving (site - b, site + a): P(>= r) = (1 - (a+b)/(2ab))^(r-1)."""
    exact_cases = []
    ok = True
    for a, b, r in interior_instances():
        exact = oracle.visit_tail(a + b, b, r)
        formula = cond.interior_visit_probability(a, b, r)
        closed = (1 - Fraction(a + b, 2 * a * b)) ** (r - 1)
        err = abs(float(exact) - formula)
        good = err <= 1e-12 and exact == closed
        ok &= good
        exact_cases.append({"a": a, "b": b, "r": r, "oracle": float(exact), "formula": formula,
                            "error": err, "pass": good})
    mc_cases = []
    for k, (a, b, r) in enumerate(MC_INTERIOR):
        progress(f"interior MC {k + 1}/{len(MC_INTERIOR)}")
        truth = cond.interior_visit_probability(a, b, r)
        v = cond.interior_visit_counts(a, b, trials, seed, stream0=k * trials)
        res = proportion(int((v >= r).sum()), trials, seed)
        good = res.within(truth)
        ok &= good
        mc_cases.append({"a": a, "b": b, "r": r, "truth": truth, "estimate": res.estimate,
                         "stderr": res.stderr, "z": res.z(truth), "pass": good})
    return _composite("interior", {"trials": trials}, trials, seed, ok, oracle_cases=exact_cases, mc_cases=mc_cases)


def verify_late_return(seed: int = 19, trials: int = 100_000, W: int = 100, L: int = 16, i_max: int = 10_000,
                       progress: Progress = _quiet, **_) -> ResultRecord:
    """E[1/o' | o = i] = 1/i for the walk conditioned to stay above its base, and
    P(return to offset L after reaching W) = L / W."""
    progress(f"late-return: identity for i = 2..{i_max}")
    bad = [i for i in range(2, i_max + 1) if cond.y_martingale_mean(i) != Fraction(1, i)]
    at_one = cond.y_martingale_mean(1)
    progress(f"late-return: {trials} walks at W={W}, L={L}")
    ind = cond.late_return_indicators(W, L, trials, seed)
    res = proportion(int(ind.sum()), trials, seed)
    truth = cond.late_return_probability(W, L)
    good_mc = res.within(truth)
    ok = not bad and good_mc
    return record_from(res, "late-return", {"W": W, "L": L, "trials": trials, "i_max": i_max}, ok,
                       truth=truth, z=res.z(truth), identity_failures=bad[:20],
                       identity_checked=[2, i_max], value_at_1=str(at_one))


# --- exact enumeration -----------------------------------------------------------


def verify_g1(seed: int = 0, steps: int = 16, threads: int = 1, progress: Progress = _quiet, **_) -> ResultRecord:
    """E g_1(n) = 2 for n = 1..steps by enumerating all 2^n paths; f(3) law."""
    means = {}
    for n in range(1, steps + 1):
        progress(f"g1: n={n}")
        means[n] = oracle.enumerate_g1_mean(n, threads)
    f3 = oracle.enumerate_f(3, threads).as_dict()
    ok = all(m == 2 for m in means.values()) and f3 == {1: Fraction(3, 4), 2: Fraction(1, 4)}
    return _composite("g1", {"steps": steps}, 1 << steps, seed, ok,
                      means={n: str(m) for n, m in means.items()}, f3={k: str(v) for k, v in f3.items()})


# --- laws of large numbers ---------------------------------------------------------


def verify_lln_k(seed: int = 23, trials: int = 1000, jmax: int = 200, convention: str = WEAK,
                 progress: Progress = _quiet, **_) -> ResultRecord:
    """mean K_j / j at j = jmax in [1.8, 2.2]; mean K'_j - K_j over j in [jmax/4, jmax] in [0.9, 1.1]."""
    ratios = np.empty(trials)
    incs = []
    for t in range(trials):
        if t % 100 == 0:
            progress(f"lln-k: trial {t}/{trials}")
        recs = sample_skeleton(jmax, RandomStream(seed, t), convention=convention)
        ratios[t] = recs[jmax].K / jmax
        pairs, _ = k_increments(recs[jmax // 4 :])
        incs.extend(p[0] for p in pairs)
    res = summarize(ratios, seed)
    inc = summarize(np.asarray(incs), seed)
    ok = 1.8 <= res.estimate <= 2.2 and 0.9 <= inc.estimate <= 1.1
    return record_from(res, "lln-k", {"trials": trials, "jmax": jmax, "convention": convention}, ok,
                       band=[1.8, 2.2], increment_mean=inc.estimate, increment_stderr=inc.stderr,
                       increment_band=[0.9, 1.1])


def verify_lln_logt(seed: int = 29, trials: int = 1000, jmax: int = 25, convention: str = WEAK,
                    progress: Progress = _quiet, **_) -> ResultRecord:
    """mean log T_j / j at j = jmax in [3.5, 4.5]."""
    vals = np.empty(trials)
    for t in range(trials):
        if t % 100 == 0:
            progress(f"lln-logT: trial {t}/{trials}")
        recs = sample_skeleton(jmax, RandomStream(seed, t), convention=convention, with_times=True)
        vals[t] = math.log(recs[jmax].T) / jmax
    res = summarize(vals, seed)
    ok = 3.5 <= res.estimate <= 4.5
    return record_from(res, "lln-logT", {"trials": trials, "jmax": jmax, "convention": convention}, ok,
                       band=[3.5, 4.5])


def verify_nk(seed: int = 31, trials: int = 10_000, jmax: int = 3, steps: int = 100_000,
              progress: Progress = _quiet, **_) -> ResultRecord:
    """Frequency of N_{j+1} < N_j against 1 - 1/(M_j - N_j + 1), pooled over recorded j >= 1."""
    progress(f"nk-strict: {trials} walks")
    widths, hits = nk_decrease_indicators(trials, seed, j_max=jmax, budget=steps)
    p = 1.0 - 1.0 / (widths + 1.0)
    obs = int(hits.sum())
    exp = float(p.sum())
    sd = float(np.sqrt((p * (1 - p)).sum()))
    z = (obs - exp) / sd
    n = hits.shape[0]
    by_width = {}
    for lo, hi in ((1, 2), (3, 5), (6, 15), (16, 63), (64, 1 << 62)):
        m = (widths >= lo) & (widths <= hi)
        if m.any():
            by_width[f"{lo}-{hi}"] = {"n": int(m.sum()), "observed": int(hits[m].sum()), "expected": float(p[m].sum())}
    return ResultRecord("nk-strict", {"trials": trials, "jmax": jmax, "steps": steps}, obs / n,
                        sd / n, [obs / n - 3 * sd / n, obs / n + 3 * sd / n], n, seed, abs(z) <= 3,
                        {"expected_frequency": exp / n, "z": z, "by_width": by_width})


# --- events on segments -------------------------------------------------------------


def verify_event_a(seed: int = 37, trials: int = 2000, r: int = 3, width: int | None = None,
                   max_width: int | None = None, progress: Progress = _quiet, **_) -> ResultRecord:
    """On segments of width >= r^5 (drop = width), conditional frequencies of A1, A2, A given B."""
    drop = r**5 if width is None else width
    max_width = 4 * drop if max_width is None else max_width
    got = []
    skipped = 0
    t = 0
    while len(got) < trials:
        if t % 500 == 0:
            progress(f"eventA: {len(got)}/{trials} segments")
        seg = sample_segment(drop, RandomStream(seed, t), max_width=max_width)
        t += 1
        if seg is None:
            skipped += 1
            continue
        got.append(seg.flags(r))
    B = [f for f in got if f.B_holds]
    nb_ = len(B)
    if nb_ < 2:
        return _composite("eventA", {"r": r, "trials": trials}, trials, seed, False, reason="too few B segments")
    a1 = proportion(sum(f.A1_holds for f in B), nb_, seed)
    a2 = proportion(sum(f.A2_holds for f in B), nb_, seed)
    a = proportion(sum(f.A_holds for f in B), nb_, seed)
    bound = 1 - 3 / r**2
    ok = a1.estimate >= bound - 3 * a1.stderr and a.estimate > 0
    return record_from(a1, "eventA", {"r": r, "trials": trials, "drop": drop, "max_width": max_width}, ok,
                       B_segments=nb_, B_frequency=nb_ / len(got), A1_bound=bound, A2_given_B=a2.estimate,
                       A_given_B=a.estimate, A_given_B_stderr=a.stderr, C=a.estimate * r**2,
                       skipped_wide=skipped)


# --- branching process -------------------------------------------------------------


def verify_gw(seed: int = 41, trials: int = 100_000, r: int = 4, r_values=(3, 4, 5),
              progress: Progress = _quiet, **_) -> ResultRecord:
    """W_j supermartingale drift <= 3 sigma at every j < r^4; P(tau < r^4) decreasing in r."""
    progress(f"gw: supermartingale trace r={r}")
    tr = gwm.supermartingale_trace(r, trials, seed)
    worst = tr.worst_z()
    taus = {}
    for k, rr in enumerate(r_values):
        progress(f"gw: tau at r={rr}")
        t_r = tr if rr == r else gwm.supermartingale_trace(rr, trials, seed, stream0=(k + 1) * trials)
        p = t_r.p_tau_before(rr**4)
        taus[rr] = {"p": p, "stderr": math.sqrt(p * (1 - p) / trials)}
    ps = [taus[rr]["p"] for rr in r_values]
    decreasing = all(x > y for x, y in zip(ps, ps[1:]))
    ok = worst <= 3 and decreasing
    return _composite("gw", {"r": r, "trials": trials}, trials, seed, ok, worst_z=worst,
                      max_mean_increment=float(tr.mean_increment.max()), p_tau_before_r4=taus,
                      decreasing=decreasing)


def verify_raylight(seed: int = 43, trials: int = 100_000, r: int = 4, width: int = 10_000, edges=(1, 2, 3),
                    progress: Progress = _quiet, **_) -> ResultRecord:
    """Edge upcrossings v_i -> v_{i+1} of the three conditioned pieces against gw_step."""
    progress(f"raylight: {trials} coupled samples, r={r}, width={width}")
    sample = gwm.coupled_edge_local_times(r, width, trials, seed)
    rep = gwm.comparison_report(sample, edges=edges)
    first = rep["tests"].get("1")
    ok = first is not None and first["decision"] == "accept" and rep["d_within_bound"]
    return _composite("raylight", {"r": r, "width": width, "trials": trials}, trials, seed, ok, report=rep)


# --- long trajectories ------------------------------------------------------------


def verify_ftrace(seed: int = 3, steps: int = 10**9, trials: int = 1000, tau_budget: int = 10**6,
                  progress: Progress = _quiet, **_) -> ResultRecord:
    """Running max of f(n) along one long walk (nondecreasing, reaches >= 3) and
    tau_1 < tau_2 < tau_3 on every trial that reaches each level."""
    progress(f"ftrace: {steps} steps")
    tr = f_trace(steps, seed, checkpoints=dyadic_checkpoints(steps))
    n = tr.rows[:, 0]
    f = tr.rows[:, 1]
    taus = [int(t) for t in tr.taus if t >= 0]
    # f(0) = 1; afterwards the running max is the number of levels already hit
    run_max = np.array([max(1, sum(1 for t in taus if t <= m)) for m in n])
    nondecreasing = bool(np.all(np.diff(run_max) >= 0)) and bool(np.all(run_max >= f))
    reaches = tr.running_max >= 3
    progress(f"ftrace: tau_r on {trials} walks")
    violations = 0
    tau3 = []
    for t in range(trials):
        tt = f_trace(tau_budget, seed, stream=1 + t, checkpoints=np.empty(0, np.int64), r_max=3, stop_r=3).taus
        reached = [x for x in tt if x >= 0]
        if any(a >= b for a, b in zip(reached, reached[1:])) or (tt[1] < 0 <= tt[2]):
            violations += 1
        tau3.append(tt[2] if tt[2] >= 0 else tau_budget + 1)
    ok = nondecreasing and reaches and violations == 0
    return _composite("ftrace", {"steps": steps, "trials": trials, "tau_budget": tau_budget}, trials, seed, ok,
                      running_max=tr.running_max, taus=taus, tau_violations=violations,
                      median_tau3=float(np.median(tau3)),
                      tau3_censored=int(sum(1 for x in tau3 if x > tau_budget)))


def verify_qk(seed: int = 47, trials: int = 4000, steps: int = 10**6, walks: int = 20, dim: int = 3,
              progress: Progress = _quiet, **_) -> ResultRecord:
    """Q_{k+1}(n) / Q_k(n) against 1 - gamma_hat, gamma_hat from the escape frequency."""
    progress(f"qk: escape frequency over {trials} walks of {steps} steps")
    gamma, g_se = escape_frequency(dim, steps, trials, seed)
    ratios = np.empty((walks, 3))
    for w in range(walks):
        progress(f"qk: occupation walk {w + 1}/{walks}")
        h = dd_visit_histogram(dim, steps, seed + 1, stream=w)
        for k in (1, 2, 3):
            ratios[w, k - 1] = h.get(k + 1, 0) / h[k]
    cases = []
    ok = True
    for k in (1, 2, 3):
        r = summarize(ratios[:, k - 1], seed)
        se = math.hypot(r.stderr, g_se)
        z = _z(r.estimate, se, 1 - gamma)
        good = abs(z) <= 3
        ok &= good
        cases.append({"k": k, "ratio": r.estimate, "ratio_stderr": r.stderr, "target": 1 - gamma,
                      "z": z, "pass": good})
    return _composite("qk", {"trials": trials, "steps": steps, "walks": walks, "dim": dim}, trials, seed, ok,
                      gamma_hat=gamma, gamma_stderr=g_se, cases=cases)


EXPERIMENTS: dict[str, Callable[..., ResultRecord]] = {
    "ruin": verify_ruin,
    "geometric": verify_geometric,
    "interior": verify_interior,
    "late-return": verify_late_return,
    "gw": verify_gw,
    "raylight": verify_raylight,
    "lln-k": verify_lln_k,
    "lln-logT": verify_lln_logt,
    "g1": verify_g1,
    "qk": verify_qk,
    "eventA": verify_event_a,
    "eventB": verify_event_b,
    "nk-strict": verify_nk,
    "ftrace": verify_ftrace,
}


def run_experiment(name: str, **params) -> ResultRecord:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}") from None
    return fn(**params)


__all__ = [
    "EXPERIMENTS",
    "RUIN_TRIPLES",
    "interior_instances",
    "run_experiment",
    "verify_event_a",
    "verify_event_b",
    "verify_ftrace",
    "verify_g1",
    "verify_geometric",
    "verify_gw",
    "verify_interior",
    "verify_late_return",
    "verify_lln_k",
    "verify_lln_logt",
    "verify_nk",
    "verify_qk",
    "verify_raylight",
    "verify_ruin",
]
