//! Auctioneer-controlled broad match.
//!
//! Budget left unspent on the base graph is placed along the extension's new
//! edges by the auctioneer, who also chooses the first query of each entry.

use std::collections::HashSet;

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::Result;
use crate::model::{check_extension, Entry, Instance, Schedule};
use crate::rational::Rational;
use crate::simulate::{run_keyword, simulate_day, simulate_day_par, DayOutcome, KeywordRun, Participation};

/// Whether `leftover` covers the advertiser's best score on `base`.
pub fn has_excess(base: &Instance, adv: usize, leftover: &Rational) -> bool {
    match base.max_score(adv) {
        Some(s) => leftover.is_positive() && &s <= leftover,
        None => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcessEntry {
    pub adv: usize,
    pub leftover: Rational,
    /// Best base score, zero without base edges.
    pub max_score: Rational,
    pub has_excess: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcessProfile {
    pub advertisers: Vec<ExcessEntry>,
    /// Per keyword, holders with a base edge to it.
    pub holders: Vec<Vec<usize>>,
}

impl ExcessProfile {
    pub fn set(&self) -> Vec<usize> {
        self.advertisers.iter().filter(|e| e.has_excess).map(|e| e.adv).collect()
    }
}

pub fn excess_budgets(base: &Instance, outcome: &DayOutcome) -> ExcessProfile {
    let base = base.base();
    let advertisers: Vec<ExcessEntry> = outcome
        .advertisers
        .iter()
        .enumerate()
        .map(|(adv, day)| ExcessEntry {
            adv,
            leftover: day.leftover.clone(),
            max_score: base.max_score(adv).unwrap_or_else(Rational::zero),
            has_excess: has_excess(&base, adv, &day.leftover),
        })
        .collect();
    let holders = (0..base.m())
        .map(|kw| base.advertisers_of(kw).into_iter().filter(|&a| advertisers[a].has_excess).collect())
        .collect();
    ExcessProfile { advertisers, holders }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Condition {
    A,
    B,
    C,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::A => "a",
            Condition::B => "b",
            Condition::C => "c",
        }
    }
}

/// A new edge `(adv, kw)` on which bringing `adv` into the last segment pays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObrevWitness {
    pub condition: Condition,
    pub adv: usize,
    pub kw: usize,
    /// Active set of the keyword's last segment.
    pub last_set: Vec<usize>,
    pub holders: Vec<usize>,
    /// The keyword's last segment is unsold.
    pub dark: bool,
    /// Advertisers counted by the condition's inequality.
    pub counted: Vec<usize>,
}

/// Lists every (advertiser, new edge, condition) that guarantees a revenue
/// improvement, given the base day `outcome`.
pub fn obrev_check(base: &Instance, ext: &Instance, outcome: &DayOutcome, reserve: &Rational) -> Result<Vec<ObrevWitness>> {
    let report = check_extension(base, ext)?;
    let profile = excess_budgets(base, outcome);
    let excess = profile.set();
    let k = ext.slots.count();
    let mut out = Vec::new();
    for (a_id, k_id) in &report.new_edges {
        let i = ext.adv_index(a_id).expect("validated");
        let j = ext.kw_index(k_id).expect("validated");
        if !excess.contains(&i) {
            continue;
        }
        let s_ij = ext.score(i, j).expect("new edge");
        let last = outcome.keywords[j].segments.last().map(|s| s.slate.members()).unwrap_or_default();
        let holders = profile.holders[j].clone();
        let dark = last.is_empty();
        let score = |l: usize| ext.score(l, j).expect("edge").clone();
        let mut found = |condition, counted: Vec<usize>| {
            out.push(ObrevWitness {
                condition,
                adv: i,
                kw: j,
                last_set: last.clone(),
                holders: holders.clone(),
                dark,
                counted,
            })
        };
        if dark {
            let gamma = ext.advertisers_of(j);
            let counted: Vec<usize> = gamma
                .iter()
                .copied()
                .filter(|&l| {
                    let s = score(l);
                    (excess.contains(&l) && &s == s_ij) || &s < s_ij
                })
                .collect();
            if counted.len() > 1 || reserve.is_positive() {
                found(Condition::B, counted);
            }
        } else if last == holders {
            let above: Vec<usize> = last.iter().copied().filter(|&m| &score(m) > s_ij).collect();
            if above.len() < k {
                found(Condition::A, above);
            }
        } else {
            let rest: Vec<usize> = last.iter().copied().filter(|m| !holders.contains(m)).collect();
            if rest.iter().all(|&l| s_ij > &score(l)) {
                found(Condition::C, rest);
            }
        }
    }
    Ok(out)
}

/// One committed placement of excess budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub entry: Entry,
    pub delta_revenue: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationResult {
    pub schedule: Schedule,
    pub base_outcome: DayOutcome,
    pub outcome: DayOutcome,
    pub moves: Vec<Move>,
    pub delta_revenue: Rational,
    pub delta_welfare: Rational,
}

#[derive(Clone, Debug, Default)]
pub struct AllocatorOptions {
    /// Also try per-query starts near the best segment start.
    pub fine: bool,
    /// Number of per-query starts tried when `fine` is set.
    pub window: u64,
    pub parallel: bool,
}

impl AllocatorOptions {
    pub fn new(fine: bool) -> Self {
        AllocatorOptions { fine, window: 64, parallel: false }
    }
}

fn keyword_parts(plan: &Schedule, kw: usize) -> Vec<Participation> {
    plan.for_keyword(kw).iter().map(Participation::from).collect()
}

struct Candidate {
    entry: Entry,
    gain: Rational,
}

/// Best entry of `adv` on `kw` starting at `start`, spending at most `cap_money`.
fn probe(inst: &Instance, plan: &Schedule, adv: usize, kw: usize, start: u64, cap_money: &Rational, reserve: &Rational, current: &Rational) -> Result<Option<Candidate>> {
    let volume = inst.keywords[kw].volume;
    if start > volume {
        return Ok(None);
    }
    let parts = keyword_parts(plan, kw);
    let run_with = |n: u64| -> Result<KeywordRun> {
        let mut p = parts.clone();
        p.push(Participation { adv, start, budget: None, cap: Some(n) });
        run_keyword(inst, kw, &p, reserve)
    };
    let spend = |run: &KeywordRun| run.tallies.get(&adv).map(|t| t.spend.clone()).unwrap_or_default();
    let (mut lo, mut hi) = (0u64, volume - start + 1);
    let mut best: Option<KeywordRun> = None;
    // largest n whose spend fits; spend is nondecreasing in n
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        let run = run_with(mid)?;
        if &spend(&run) <= cap_money {
            lo = mid;
            best = Some(run);
        } else {
            hi = mid - 1;
        }
    }
    let Some(probe_run) = best.filter(|_| lo > 0) else {
        return Ok(None);
    };
    // Rerun with the entry as it would be committed: a budget that runs out at
    // a breakpoint leaves with everyone else who does.
    let entry = Entry { adv, kw, start, budget: spend(&probe_run), cap: Some(lo) };
    let mut p = parts;
    p.push(Participation::from(&entry));
    let run = run_keyword(inst, kw, &p, reserve)?;
    let gain = &run.revenue - current;
    Ok(Some(Candidate { entry, gain }))
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    a.gain > b.gain || (a.gain == b.gain && (a.entry.adv, a.entry.kw, a.entry.start) < (b.entry.adv, b.entry.kw, b.entry.start))
}

/// Greedy placement of excess budgets along new edges. `plan` is the base
/// day's commitments; base budgets are only ever reduced to what they spent.
pub fn allocate_excess(base: &Instance, ext: &Instance, plan: &Schedule, reserve: &Rational, opts: &AllocatorOptions) -> Result<AllocationResult> {
    let report = check_extension(base, ext)?;
    let base_outcome = simulate_day(ext, plan, reserve)?;
    let profile = excess_budgets(base, &base_outcome);
    let mut remaining: Vec<Rational> = profile
        .advertisers
        .iter()
        .map(|e| if e.has_excess { e.leftover.clone() } else { Rational::zero() })
        .collect();
    let new_edges: Vec<(usize, usize)> = report
        .new_edges
        .iter()
        .map(|(a, k)| (ext.adv_index(a).unwrap(), ext.kw_index(k).unwrap()))
        .collect();
    let mut schedule = plan.clone();
    let mut outcome = base_outcome.clone();
    let mut moves = Vec::new();
    let mut pinned = vec![false; ext.n()];
    let mut banned: HashSet<(usize, usize)> = HashSet::new();
    loop {
        let mut jobs = Vec::new();
        for &(i, j) in &new_edges {
            if !remaining[i].is_positive() || schedule.get(i, j).is_some() || banned.contains(&(i, j)) {
                continue;
            }
            for seg in &outcome.keywords[j].segments {
                jobs.push((i, j, seg.from + 1));
            }
        }
        let eval = |&(i, j, q): &(usize, usize, u64)| {
            probe(ext, &schedule, i, j, q, &remaining[i], reserve, &outcome.keywords[j].revenue)
        };
        let found: Vec<Option<Candidate>> = if opts.parallel {
            jobs.par_iter().map(eval).collect::<Result<_>>()?
        } else {
            jobs.iter().map(eval).collect::<Result<_>>()?
        };
        let mut best: Option<Candidate> = None;
        for c in found.into_iter().flatten() {
            if c.gain.is_positive() && best.as_ref().is_none_or(|b| better(&c, b)) {
                best = Some(c);
            }
        }
        let Some(mut pick) = best else { break };
        let (i, j) = (pick.entry.adv, pick.entry.kw);
        if opts.fine {
            let seg = outcome.keywords[j]
                .segments
                .iter()
                .find(|s| s.from + 1 == pick.entry.start)
                .expect("candidate starts at a segment start");
            let last = seg.to.min(seg.from + opts.window);
            for q in seg.from + 2..=last {
                if let Some(c) = probe(ext, &schedule, i, j, q, &remaining[i], reserve, &outcome.keywords[j].revenue)? {
                    if better(&c, &pick) {
                        pick = c;
                    }
                }
            }
        }
        let mut trial = schedule.clone();
        if !pinned[i] {
            // freeze the base commitments at what they bought
            for e in schedule.entries.iter().filter(|e| e.adv == i) {
                let t = outcome.tally(i, e.kw);
                trial.upsert(Entry { budget: t.spend, cap: Some(t.queries), ..e.clone() });
            }
        }
        trial.upsert(pick.entry.clone());
        let next = if opts.parallel { simulate_day_par(ext, &trial, reserve)? } else { simulate_day(ext, &trial, reserve)? };
        // Freezing can move other keywords too; keep the move only if the whole day gains.
        if next.revenue <= outcome.revenue {
            banned.insert((i, j));
            continue;
        }
        pinned[i] = true;
        remaining[i] -= &pick.entry.budget;
        let delta = &next.revenue - &outcome.revenue;
        schedule = trial;
        outcome = next;
        moves.push(Move { entry: pick.entry, delta_revenue: delta });
    }
    let delta_revenue = &outcome.revenue - &base_outcome.revenue;
    let delta_welfare = &outcome.welfare - &base_outcome.welfare;
    Ok(AllocationResult { schedule, base_outcome, outcome, moves, delta_revenue, delta_welfare })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    const FIG10: &str = r#"{"slots":{"count":2,"clickability":["1","0.7"]},
        "keywords":[{"id":"k1","volume":100},{"id":"k2","volume":100}],
        "advertisers":[{"id":"1","budget":"45"},{"id":"2","budget":"37"},
                       {"id":"3","budget":"40"},{"id":"4","budget":"20"}],
        "edges":[{"advertiser":"1","keyword":"k1","score":"5"},
                 {"advertiser":"2","keyword":"k1","score":"3"},
                 {"advertiser":"3","keyword":"k1","score":"2","tag":"extension"},
                 {"advertiser":"3","keyword":"k2","score":"1.5"},
                 {"advertiser":"4","keyword":"k2","score":"1"}]}"#;

    fn natural() -> Schedule {
        let e = |adv, kw, b: i64, q| Entry { adv, kw, start: 1, budget: int(b), cap: Some(q) };
        Schedule::new(vec![e(0, 0, 45, 50), e(1, 0, 37, 100), e(2, 1, 40, 100), e(3, 1, 20, 100)])
    }

    #[test]
    fn excess_of_the_base_day() {
        let ext = Instance::from_json(FIG10).unwrap();
        let base = ext.base();
        let day = simulate_day(&base, &natural(), &int(0)).unwrap();
        let p = excess_budgets(&base, &day);
        assert_eq!(p.advertisers[2].leftover, int(10));
        assert_eq!(p.advertisers[2].max_score, ratio(3, 2));
        assert!(p.advertisers[2].has_excess);
        assert!(!p.advertisers[0].has_excess);
    }

    #[test]
    fn boundary_counts_as_excess() {
        let ext = Instance::from_json(FIG10).unwrap();
        assert!(has_excess(&ext.base(), 2, &ratio(3, 2)));
        assert!(!has_excess(&ext.base(), 2, &ratio(149, 100)));
    }

    #[test]
    fn fig10_witness() {
        let ext = Instance::from_json(FIG10).unwrap();
        let base = ext.base();
        let day = simulate_day(&base, &natural(), &int(0)).unwrap();
        let w = obrev_check(&base, &ext, &day, &int(0)).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].adv, w[0].kw, w[0].condition), (2, 0, Condition::A));
        assert_eq!(w[0].last_set, vec![1]);
    }

    #[test]
    fn allocator_improves_revenue() {
        let ext = Instance::from_json(FIG10).unwrap();
        let base = ext.base();
        let r = allocate_excess(&base, &ext, &natural(), &int(0), &AllocatorOptions::new(false)).unwrap();
        assert!(r.delta_revenue.is_positive());
        assert_eq!(r.moves.len(), 1);
        let spent: Rational = r.moves.iter().map(|m| m.entry.budget.clone()).sum();
        assert!(spent <= int(10));
    }

    #[test]
    fn no_new_edges_is_identity() {
        let ext = Instance::from_json(FIG10).unwrap();
        let base = ext.base();
        let r = allocate_excess(&base, &base, &natural(), &int(0), &AllocatorOptions::new(true)).unwrap();
        assert!(r.moves.is_empty());
        assert_eq!(r.delta_revenue, int(0));
        assert_eq!(r.schedule, natural());
    }
}
