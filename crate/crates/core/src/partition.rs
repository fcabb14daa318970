//! Constant-cost query segments.
//!
//! A [`PartitionTable`] describes what one advertiser would pay and earn on
//! each query of a keyword if she took part in every query, with the others'
//! commitments fixed. [`GlobalPartition`] is the same segmentation for a whole
//! schedule, with every participant's terms.

use num_traits::Zero;

use crate::acbm::has_excess;
use crate::auction::Slate;
use crate::error::{Error, Result};
use crate::model::{Allocation, Entry, Instance, Schedule};
use crate::rational::{self, Ext, Rational};
use crate::simulate::{run_keyword, simulate_day, DayOutcome, Participation, Segment};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTable {
    pub kw: usize,
    pub adv: usize,
    /// `z[0] = 0 < z[1] < ... < z[len] = V`.
    pub z: Vec<u64>,
    pub cost: Vec<Rational>,
    pub payoff: Vec<Rational>,
    /// Advertisers present in each segment, by index.
    pub active: Vec<Vec<usize>>,
    cum_cost: Vec<Rational>,
    cum_payoff: Vec<Rational>,
}

impl PartitionTable {
    /// Builds a table directly from segment lengths and per-query terms.
    pub fn from_segments(kw: usize, adv: usize, lens: &[u64], cost: Vec<Rational>, payoff: Vec<Rational>) -> Result<Self> {
        if lens.is_empty() || lens.len() != cost.len() || lens.len() != payoff.len() {
            return Err(Error::InvalidArgument("segment lengths, costs and payoffs must align".into()));
        }
        if lens.iter().any(|&l| l == 0) {
            return Err(Error::InvalidArgument("segments must be nonempty".into()));
        }
        if cost.iter().chain(&payoff).any(|v| v < &Rational::zero()) {
            return Err(Error::InvalidArgument("costs and payoffs must be nonnegative".into()));
        }
        let mut z = vec![0u64];
        for l in lens {
            z.push(z.last().unwrap() + l);
        }
        let active = vec![vec![adv]; lens.len()];
        Ok(Self::assemble(kw, adv, z, cost, payoff, active))
    }

    fn assemble(kw: usize, adv: usize, z: Vec<u64>, cost: Vec<Rational>, payoff: Vec<Rational>, active: Vec<Vec<usize>>) -> Self {
        let mut cum_cost = vec![Rational::zero()];
        let mut cum_payoff = vec![Rational::zero()];
        for k in 0..cost.len() {
            let n = z[k + 1] - z[k];
            cum_cost.push(rational::add(&cum_cost[k], &rational::times(&cost[k], n)));
            cum_payoff.push(rational::add(&cum_payoff[k], &rational::times(&payoff[k], n)));
        }
        PartitionTable { kw, adv, z, cost, payoff, active, cum_cost, cum_payoff }
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn volume(&self) -> u64 {
        *self.z.last().unwrap()
    }

    /// Segment holding 1-based query `l`.
    pub fn segment_of(&self, l: u64) -> usize {
        debug_assert!(l >= 1 && l <= self.volume());
        self.z.partition_point(|&b| b < l) - 1
    }

    pub fn cost_at(&self, l: u64) -> &Rational {
        &self.cost[self.segment_of(l)]
    }

    pub fn payoff_at(&self, l: u64) -> &Rational {
        &self.payoff[self.segment_of(l)]
    }

    /// Marginal payoff of a segment, infinite when it is free.
    pub fn pi(&self, seg: usize) -> Ext {
        Ext::quotient(&self.payoff[seg], &self.cost[seg])
    }

    pub fn pi_at(&self, l: u64) -> Ext {
        self.pi(self.segment_of(l))
    }

    /// `(U~(l), C~(l))`, the payoff and cost of the first `l` queries.
    pub fn prefix(&self, l: u64) -> (Rational, Rational) {
        let l = l.min(self.volume());
        let seg = self.z.partition_point(|&b| b < l).saturating_sub(1).min(self.len() - 1);
        let extra = l - self.z[seg];
        (
            rational::add(&self.cum_payoff[seg], &rational::times(&self.payoff[seg], extra)),
            rational::add(&self.cum_cost[seg], &rational::times(&self.cost[seg], extra)),
        )
    }

    pub fn prefix_totals(&self, l: u64) -> Result<(Rational, Rational)> {
        if l > self.volume() {
            return Err(Error::InvalidArgument(format!("query count {l} exceeds volume {}", self.volume())));
        }
        Ok(self.prefix(l))
    }

    pub fn prefix_cost(&self, l: u64) -> Rational {
        self.prefix(l).1
    }

    pub fn prefix_payoff(&self, l: u64) -> Rational {
        self.prefix(l).0
    }

    /// Largest `l` with `C~(l) <= budget`.
    pub fn max_affordable(&self, budget: &Rational) -> u64 {
        let seg = self.cum_cost[1..].partition_point(|c| c <= budget);
        if seg == self.len() {
            return self.volume();
        }
        // cost of `seg` is positive, otherwise its cumulative would not exceed
        let room = budget - &self.cum_cost[seg];
        let n = crate::rational::floor_div_u64(&room, &self.cost[seg]);
        self.z[seg] + n.min(self.z[seg + 1] - self.z[seg])
    }

    /// The first `x` queries only.
    pub fn truncated(&self, x: u64) -> PartitionTable {
        let x = x.min(self.volume());
        if x == 0 {
            return Self::assemble(self.kw, self.adv, vec![0, 0], vec![Rational::zero()], vec![Rational::zero()], vec![vec![]]);
        }
        let keep = self.segment_of(x) + 1;
        let mut z = self.z[..=keep].to_vec();
        z[keep] = x;
        Self::assemble(
            self.kw,
            self.adv,
            z,
            self.cost[..keep].to_vec(),
            self.payoff[..keep].to_vec(),
            self.active[..keep].to_vec(),
        )
    }
}

/// Segments `kw` for `adv`, who is assumed present in every query with an
/// unlimited budget while the `others` keep their commitments.
pub fn query_partition(inst: &Instance, kw: usize, adv: usize, others: &[Entry], reserve: &Rational) -> Result<PartitionTable> {
    if inst.edge(adv, kw).is_none() {
        return Err(Error::Domain(format!(
            "no edge ({}, {})",
            inst.advertisers[adv].id, inst.keywords[kw].id
        )));
    }
    let mut parts = vec![Participation { adv, start: 1, budget: None, cap: None }];
    parts.extend(others.iter().filter(|e| e.adv != adv && e.kw == kw).map(Participation::from));
    let run = run_keyword(inst, kw, &parts, reserve)?;
    let mut z = vec![0];
    let mut cost = Vec::new();
    let mut payoff = Vec::new();
    let mut active = Vec::new();
    for seg in &run.segments {
        let (c, u) = seg.slate.terms(adv).expect("the advertiser is always present");
        z.push(seg.to);
        cost.push(c.clone());
        payoff.push(u.clone());
        active.push(seg.slate.members());
    }
    Ok(PartitionTable::assemble(kw, adv, z, cost, payoff, active))
}

/// Tables for every edge of `adv`, against the rest of `plan`.
pub fn tables_for(inst: &Instance, plan: &Schedule, adv: usize, reserve: &Rational) -> Result<Vec<PartitionTable>> {
    inst.keywords_of(adv)
        .into_iter()
        .map(|kw| query_partition(inst, kw, adv, &plan.for_keyword(kw), reserve))
        .collect()
}

/// Budget needed by `adv` to buy `queries[kw]` queries on each listed keyword,
/// given the others' commitments in `others`.
pub fn split_of_queries(
    inst: &Instance,
    adv: usize,
    queries: &[(usize, u64)],
    others: &Schedule,
    reserve: &Rational,
) -> Result<Vec<Allocation>> {
    let mut rows = Vec::new();
    let mut total = Rational::zero();
    for &(kw, q) in queries {
        if q > inst.keywords[kw].volume {
            return Err(Error::InvalidArgument(format!(
                "{q} queries exceed the volume of keyword {}",
                inst.keywords[kw].id
            )));
        }
        let table = query_partition(inst, kw, adv, &others.for_keyword(kw), reserve)?;
        let budget = table.prefix_cost(q);
        total += &budget;
        rows.push(Allocation { adv, kw, queries: q, budget });
    }
    let limit = &inst.advertisers[adv].budget;
    if &total > limit {
        return Err(Error::Infeasible(format!(
            "advertiser {} needs {} but has budget {}",
            inst.advertisers[adv].id,
            crate::rational::fmt(&total),
            crate::rational::fmt(limit)
        )));
    }
    rows.sort_by_key(|r| r.kw);
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordPartition {
    pub kw: usize,
    pub segments: Vec<Segment>,
    /// Advertisers with a base edge to this keyword and an excess budget.
    pub excess_holders: Vec<usize>,
}

impl KeywordPartition {
    pub fn z(&self) -> Vec<u64> {
        std::iter::once(0).chain(self.segments.iter().map(|s| s.to)).collect()
    }

    pub fn active(&self, seg: usize) -> Vec<usize> {
        self.segments[seg].slate.members()
    }

    pub fn last_active(&self) -> Vec<usize> {
        self.segments.last().map(|s| s.slate.members()).unwrap_or_default()
    }

    pub fn slate(&self, seg: usize) -> &Slate {
        &self.segments[seg].slate
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalPartition {
    pub keywords: Vec<KeywordPartition>,
    pub outcome: DayOutcome,
}

impl GlobalPartition {
    /// Union of the excess holders over all keywords.
    pub fn excess_set(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.keywords.iter().flat_map(|k| k.excess_holders.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Segments every keyword under `plan`, including mid-stream entries.
pub fn global_partition(inst: &Instance, plan: &Schedule, reserve: &Rational) -> Result<GlobalPartition> {
    let outcome = simulate_day(inst, plan, reserve)?;
    let base = inst.base();
    let keywords = outcome
        .keywords
        .iter()
        .map(|run| {
            let excess_holders = base
                .advertisers_of(run.kw)
                .into_iter()
                .filter(|&a| has_excess(&base, a, &outcome.advertisers[a].leftover))
                .collect();
            KeywordPartition { kw: run.kw, segments: run.segments.clone(), excess_holders }
        })
        .collect();
    Ok(GlobalPartition { keywords, outcome })
}
