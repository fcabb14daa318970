//! Best responses of one advertiser against fixed competitors.
//!
//! Every solver works on the advertiser's partition tables, one per incident
//! edge, and returns how many queries to buy on each.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::partition::PartitionTable;
use crate::rational::{self, from_u64, lcm_of_denoms, Ext, Rational};

/// Default limit on DP table cells.
pub const DEFAULT_SCALE_CAP: u64 = 1_000_000_000;

/// Limit on the number of query vectors the brute-force oracle visits.
pub const ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Greedy,
    Dp,
    Fptas,
    Brute,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Dp => "dp",
            Method::Fptas => "fptas",
            Method::Brute => "brute",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "greedy" => Ok(Method::Greedy),
            "dp" => Ok(Method::Dp),
            "fptas" => Ok(Method::Fptas),
            "brute" => Ok(Method::Brute),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

/// Instrumentation of the greedy solver.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GreedyTrace {
    /// Unstable edges right after the allocation phase.
    pub unstable_after_allocation: usize,
    pub readjust_steps: usize,
    /// Hit the iteration guard instead of stabilising.
    pub guard_hit: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseResult {
    pub method: Method,
    /// Keyword index of each table, in table order.
    pub keywords: Vec<usize>,
    pub queries: Vec<u64>,
    pub budgets: Vec<Rational>,
    pub payoff: Rational,
    pub cost: Rational,
    /// Certified fraction of the optimum, when the method has one.
    pub guarantee: Option<Rational>,
    pub trace: Option<GreedyTrace>,
}

impl ResponseResult {
    fn from_queries(method: Method, tables: &[PartitionTable], queries: Vec<u64>) -> ResponseResult {
        let mut payoff = Rational::zero();
        let mut cost = Rational::zero();
        let mut budgets = Vec::with_capacity(tables.len());
        for (t, &x) in tables.iter().zip(&queries) {
            let (u, c) = t.prefix(x);
            payoff += u;
            cost += &c;
            budgets.push(c);
        }
        ResponseResult {
            method,
            keywords: tables.iter().map(|t| t.kw).collect(),
            queries,
            budgets,
            payoff,
            cost,
            guarantee: None,
            trace: None,
        }
    }
}

fn check_eps(eps: &Rational, allow_one: bool) -> Result<()> {
    let ok = eps.is_positive() && (eps < &Rational::one() || (allow_one && eps == &Rational::one()));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon {} out of range", rational::fmt(eps))))
    }
}

fn ensure_budget(budget: &Rational) -> Result<()> {
    if budget.is_negative() {
        return Err(Error::InvalidArgument("budget must be nonnegative".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Greedy local best response

struct GreedyState<'a> {
    tables: &'a [PartitionTable],
    x: Vec<u64>,
}

impl GreedyState<'_> {
    fn minus(&self, j: usize) -> Option<Ext> {
        (self.x[j] > 0).then(|| self.tables[j].pi_at(self.x[j]))
    }

    fn plus(&self, j: usize) -> Option<Ext> {
        (self.x[j] < self.tables[j].volume()).then(|| self.tables[j].pi_at(self.x[j] + 1))
    }

    fn spent(&self) -> Rational {
        self.tables.iter().zip(&self.x).map(|(t, &x)| t.prefix_cost(x)).fold(Rational::zero(), |a, b| a + b)
    }

    fn unstable(&self) -> Vec<usize> {
        (0..self.x.len())
            .filter(|&l| match self.plus(l) {
                None => false,
                Some(p) => (0..self.x.len()).any(|j| j != l && self.minus(j).is_some_and(|m| p > m)),
            })
            .collect()
    }
}

/// Local best response: buy segments in descending bang-per-buck, then move
/// budget towards the (at most one) edge left unstable.
pub fn greedy_local_best_response(tables: &[PartitionTable], budget: &Rational) -> Result<ResponseResult> {
    ensure_budget(budget)?;
    let m = tables.len();
    let mut st = GreedyState { tables, x: vec![0; m] };
    let mut next = vec![0usize; m];
    let mut open: Vec<usize> = (0..m).filter(|&j| tables[j].volume() > 0).collect();
    let mut spent = Rational::zero();
    let mut exit_edge = None;
    let mut last_bought = None;

    while !open.is_empty() {
        let mut best = open[0];
        for &j in &open[1..] {
            if tables[j].pi(next[j]) > tables[best].pi(next[best]) {
                best = j;
            }
        }
        let t = &tables[best];
        let seg = next[best];
        let len = t.z[seg + 1] - t.z[seg];
        let c = &t.cost[seg];
        let need = rational::times(c, len);
        if rational::add(&spent, &need) > *budget {
            let y = rational::floor_div_u64(&(budget - &spent), c);
            st.x[best] += y;
            exit_edge = Some(best);
            break;
        }
        st.x[best] += len;
        spent = rational::add(&spent, &need);
        last_bought = Some(best);
        next[best] += 1;
        if next[best] == t.len() {
            open.retain(|&j| j != best);
        }
    }

    let mut trace = GreedyTrace { unstable_after_allocation: st.unstable().len(), ..Default::default() };
    let total_segments: usize = tables.iter().map(|t| t.len()).sum();
    let guard = 4 * total_segments + 10;
    let mut target = None;
    loop {
        let unstable = st.unstable();
        if unstable.is_empty() {
            break;
        }
        if trace.readjust_steps >= guard {
            trace.guard_hit = true;
            break;
        }
        trace.readjust_steps += 1;
        let mut l = unstable[0];
        for &k in &unstable[1..] {
            if st.plus(k) > st.plus(l) {
                l = k;
            }
        }
        target = Some(l);
        let tl = &tables[l];
        let seg_l = tl.segment_of(st.x[l] + 1);
        let end_l = tl.z[seg_l + 1];
        let room = end_l - st.x[l];
        let c_l = tl.cost[seg_l].clone();
        if c_l.is_zero() {
            st.x[l] = end_l;
            continue;
        }
        let mut donor: Option<usize> = None;
        for j in 0..m {
            if j == l || st.x[j] == 0 {
                continue;
            }
            if donor.is_none_or(|d| st.minus(j) < st.minus(d)) {
                donor = Some(j);
            }
        }
        let j = donor.expect("an unstable edge has a donor");
        let tj = &tables[j];
        let seg_j = tj.segment_of(st.x[j]);
        let start_j = tj.z[seg_j];
        let c_j = tj.cost[seg_j].clone();
        let pool = budget - st.spent();
        let freed = rational::times(&c_j, st.x[j] - start_j);
        let want = rational::times(&c_l, room);
        if &pool + &freed < want {
            st.x[j] = start_j;
            st.x[l] += rational::floor_div_u64(&(&pool + &freed), &c_l);
        } else {
            let short = &want - &pool;
            let give = if short.is_positive() { rational::ceil_div_u64(&short, &c_j) } else { 0 };
            st.x[j] -= give;
            st.x[l] = end_l;
        }
    }

    let mut res = ResponseResult::from_queries(Method::Greedy, tables, st.x);
    let leftover = budget - &res.cost;
    if m > 0 && leftover.is_positive() {
        let k = target.or(exit_edge).or(last_bought).unwrap_or(0);
        res.budgets[k] += leftover;
    }
    res.trace = Some(trace);
    Ok(res)
}

// ---------------------------------------------------------------------------
// Integer knapsack machinery shared by the DP solvers

/// Candidate query counts of one keyword with integer-scaled payoff and cost.
struct Items {
    x: Vec<u64>,
    u: Vec<i128>,
    c: Vec<i128>,
}

fn to_i128(v: &BigInt, what: &str) -> Result<i128> {
    v.to_i128().ok_or_else(|| Error::ScaleCap {
        what: what.into(),
        needed: v.to_string(),
        cap: i128::MAX as u64,
    })
}

/// Scaled integer form of `r * scale`, exact because `scale` clears denominators.
fn scaled(r: &Rational, scale: &BigInt, what: &str) -> Result<i128> {
    let v = r.numer() * (scale / r.denom());
    to_i128(&v, what)
}

fn cost_scale(tables: &[PartitionTable], budget: &Rational) -> BigInt {
    lcm_of_denoms(tables.iter().flat_map(|t| t.cost.iter()).chain(std::iter::once(budget)))
}

/// Min-cost knapsack over "payoff at least p". Returns the chosen candidate of
/// each keyword and the best reachable `p`.
fn knapsack(items: &[Items], budget: i128) -> (Vec<usize>, i128) {
    let p_max: usize = items.iter().map(|it| it.u.iter().copied().max().unwrap_or(0) as usize).sum();
    const INF: i128 = i128::MAX;
    let mut a = vec![INF; p_max + 1];
    a[0] = 0;
    let mut choices: Vec<Vec<u32>> = Vec::with_capacity(items.len());
    for it in items {
        let mut next = vec![INF; p_max + 1];
        let mut ch = vec![0u32; p_max + 1];
        for p in 0..=p_max {
            let mut best = INF;
            let mut arg = 0u32;
            for k in 0..it.x.len() {
                let back = (p as i128 - it.u[k]).max(0) as usize;
                let prev = a[back];
                if prev == INF {
                    continue;
                }
                let v = prev + it.c[k];
                if v < best {
                    best = v;
                    arg = k as u32;
                }
            }
            next[p] = best;
            ch[p] = arg;
        }
        a = next;
        choices.push(ch);
    }
    let best_p = (0..=p_max).rev().find(|&p| a[p] <= budget).unwrap_or(0);
    let mut pick = vec![0usize; items.len()];
    let mut p = best_p;
    for j in (0..items.len()).rev() {
        let k = choices[j][p] as usize;
        pick[j] = k;
        p = (p as i128 - items[j].u[k]).max(0) as usize;
    }
    (pick, best_p as i128)
}

/// Per-query integer terms of every segment of `t`.
fn segment_ints(t: &PartitionTable, us: &BigInt, cs: &BigInt) -> Result<(Vec<i128>, Vec<i128>)> {
    let u = t.payoff.iter().map(|v| scaled(v, us, "scaled payoff")).collect::<Result<Vec<_>>>()?;
    let c = t.cost.iter().map(|v| scaled(v, cs, "scaled cost")).collect::<Result<Vec<_>>>()?;
    Ok((u, c))
}

/// Largest `x` the advertiser could buy on each table alone with `budget`.
fn caps(tables: &[PartitionTable], budget: &Rational) -> Vec<u64> {
    tables.iter().map(|t| t.max_affordable(budget)).collect()
}

/// Exact best response by dynamic programming over total scaled payoff.
pub fn exact_best_response_dp(tables: &[PartitionTable], budget: &Rational, scale_cap: u64) -> Result<ResponseResult> {
    ensure_budget(budget)?;
    let us = lcm_of_denoms(tables.iter().flat_map(|t| t.payoff.iter()));
    let cs = cost_scale(tables, budget);
    let x_max = caps(tables, budget);
    let mut p_total = BigInt::zero();
    let mut cand = BigInt::zero();
    for (t, &x) in tables.iter().zip(&x_max) {
        p_total += (t.prefix_payoff(x) * Rational::from_integer(us.clone())).to_integer();
        cand += BigInt::from(x) + 1;
    }
    let cells: BigInt = &cand * (&p_total + BigInt::one());
    if cells > BigInt::from(scale_cap) {
        return Err(Error::ScaleCap { what: "DP table cells".into(), needed: cells.to_string(), cap: scale_cap });
    }
    let mut items = Vec::with_capacity(tables.len());
    for (t, &xm) in tables.iter().zip(&x_max) {
        let (su, sc) = segment_ints(t, &us, &cs)?;
        let mut it = Items { x: Vec::new(), u: Vec::new(), c: Vec::new() };
        let (mut u, mut c) = (0i128, 0i128);
        it.x.push(0);
        it.u.push(0);
        it.c.push(0);
        let mut seg = 0;
        for x in 1..=xm {
            while t.z[seg + 1] < x {
                seg += 1;
            }
            u += su[seg];
            c += sc[seg];
            it.x.push(x);
            it.u.push(u);
            it.c.push(c);
        }
        items.push(it);
    }
    let b = scaled(budget, &cs, "scaled budget")?;
    let (pick, _) = knapsack(&items, b);
    let x = pick.iter().zip(&items).map(|(&k, it)| it.x[k]).collect();
    let mut res = ResponseResult::from_queries(Method::Dp, tables, x);
    res.guarantee = Some(Rational::one());
    Ok(res)
}

/// Query counts worth trying on each table: sub-segment boundaries of the
/// table cut at what the budget alone affords.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubpartitionGrid {
    pub points: Vec<Vec<u64>>,
}

/// Cuts every segment into `ceil(M / eps^2)` blocks of `a` queries followed by
/// `b` single queries, where the segment length is `a * ceil(M / eps^2) + b`.
pub fn build_subpartition(tables: &[PartitionTable], eps: &Rational) -> Result<SubpartitionGrid> {
    check_eps(eps, true)?;
    let m = tables.len().max(1);
    let blocks = rational::ceil_div_u64(&from_u64(m as u64), &(eps * eps)).max(1);
    let points = tables
        .iter()
        .map(|t| {
            let mut pts = vec![0u64];
            for seg in 0..t.len() {
                let (lo, hi) = (t.z[seg], t.z[seg + 1]);
                let len = hi - lo;
                let (a, b) = (len / blocks, len % blocks);
                let mut at = lo;
                if a >= 1 {
                    for _ in 0..blocks {
                        at += a;
                        pts.push(at);
                    }
                }
                for _ in 0..b {
                    at += 1;
                    pts.push(at);
                }
                debug_assert_eq!(at, hi);
            }
            pts.dedup();
            pts
        })
        .collect();
    Ok(SubpartitionGrid { points })
}

/// DP on payoffs rounded down to multiples of `eps * P / M`, where `P` is the
/// best single-keyword payoff over the candidates.
pub fn rounded_dp_as1(tables: &[PartitionTable], budget: &Rational, eps: &Rational, candidates: Option<&SubpartitionGrid>) -> Result<ResponseResult> {
    check_eps(eps, false)?;
    ensure_budget(budget)?;
    let x_max = caps(tables, budget);
    let cand: Vec<Vec<u64>> = match candidates {
        Some(g) => g
            .points
            .iter()
            .zip(&x_max)
            .map(|(pts, &xm)| {
                let mut v: Vec<u64> = pts.iter().copied().filter(|&x| x <= xm).collect();
                if v.last() != Some(&xm) {
                    v.push(xm);
                }
                v
            })
            .collect(),
        None => x_max.iter().map(|&xm| (0..=xm).collect()).collect(),
    };
    let values: Vec<Vec<(Rational, Rational)>> =
        tables.iter().zip(&cand).map(|(t, xs)| xs.iter().map(|&x| t.prefix(x)).collect()).collect();
    let p = values.iter().flatten().map(|(u, _)| u).max().cloned().unwrap_or_else(Rational::zero);
    if p.is_zero() {
        let mut res = ResponseResult::from_queries(Method::Dp, tables, vec![0; tables.len()]);
        res.guarantee = Some(Rational::one() - eps);
        return Ok(res);
    }
    let step = eps * &p / from_u64(tables.len() as u64);
    let cs = cost_scale(tables, budget);
    let mut items = Vec::with_capacity(tables.len());
    for (xs, vals) in cand.iter().zip(&values) {
        let mut it = Items { x: xs.clone(), u: Vec::new(), c: Vec::new() };
        for (u, c) in vals {
            it.u.push(to_i128(&rational::floor_div(u, &step), "rounded payoff")?);
            it.c.push(scaled(c, &cs, "scaled cost")?);
        }
        items.push(it);
    }
    let b = scaled(budget, &cs, "scaled budget")?;
    let (pick, _) = knapsack(&items, b);
    let x = pick.iter().zip(&items).map(|(&k, it)| it.x[k]).collect();
    let mut res = ResponseResult::from_queries(Method::Dp, tables, x);
    res.guarantee = Some(Rational::one() - eps);
    Ok(res)
}

/// Approximation scheme: rounded DP with `eps / (1 + eps)` over the
/// sub-partition grid of the budget-truncated tables.
pub fn fptas_as2(tables: &[PartitionTable], budget: &Rational, eps: &Rational) -> Result<ResponseResult> {
    check_eps(eps, false)?;
    ensure_budget(budget)?;
    let cut: Vec<PartitionTable> = tables.iter().map(|t| t.truncated(t.max_affordable(budget))).collect();
    let grid = build_subpartition(&cut, eps)?;
    let inner = eps / (Rational::one() + eps);
    let picked = rounded_dp_as1(tables, budget, &inner, Some(&grid))?;
    let mut res = ResponseResult::from_queries(Method::Fptas, tables, picked.queries);
    res.guarantee = Some(Rational::one() - eps);
    Ok(res)
}

/// Exhaustive search over every affordable query vector.
pub fn brute_force_oracle(tables: &[PartitionTable], budget: &Rational) -> Result<ResponseResult> {
    ensure_budget(budget)?;
    let x_max = caps(tables, budget);
    let mut count: u64 = 1;
    for &x in &x_max {
        count = count.saturating_mul(x + 1);
        if count > ENUMERATION_CAP {
            return Err(Error::EnumerationCap(format!("more than {ENUMERATION_CAP} query vectors")));
        }
    }
    let us = lcm_of_denoms(tables.iter().flat_map(|t| t.payoff.iter()));
    let cs = cost_scale(tables, budget);
    let b = scaled(budget, &cs, "scaled budget")?;
    let mut vals: Vec<Vec<(i128, i128)>> = Vec::new();
    for (t, &xm) in tables.iter().zip(&x_max) {
        let mut v = Vec::with_capacity(xm as usize + 1);
        for x in 0..=xm {
            let (u, c) = t.prefix(x);
            v.push((scaled(&u, &us, "scaled payoff")?, scaled(&c, &cs, "scaled cost")?));
        }
        vals.push(v);
    }
    fn dfs(vals: &[Vec<(i128, i128)>], j: usize, u: i128, c: i128, b: i128, cur: &mut Vec<u64>, best: &mut (i128, Vec<u64>)) {
        if j == vals.len() {
            if u > best.0 {
                *best = (u, cur.clone());
            }
            return;
        }
        for (x, &(du, dc)) in vals[j].iter().enumerate() {
            if c + dc > b {
                break;
            }
            cur.push(x as u64);
            dfs(vals, j + 1, u + du, c + dc, b, cur, best);
            cur.pop();
        }
    }
    let mut best = (-1i128, vec![0; tables.len()]);
    dfs(&vals, 0, 0, 0, b, &mut Vec::new(), &mut best);
    let mut res = ResponseResult::from_queries(Method::Brute, tables, best.1);
    res.guarantee = Some(Rational::one());
    Ok(res)
}

/// Dispatches to the solver named by `method`. `eps` is used by the FPTAS.
pub fn best_response(tables: &[PartitionTable], budget: &Rational, method: Method, eps: &Rational, scale_cap: u64) -> Result<ResponseResult> {
    match method {
        Method::Greedy => greedy_local_best_response(tables, budget),
        Method::Dp => exact_best_response_dp(tables, budget, scale_cap),
        Method::Fptas => fptas_as2(tables, budget, eps),
        Method::Brute => brute_force_oracle(tables, budget),
    }
}
