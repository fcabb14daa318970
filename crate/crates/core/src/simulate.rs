//! Event-driven simulation of a day.
//!
//! A keyword's query stream is cut into segments during which the active set
//! does not change. Each segment is priced once, so the cost of a run depends
//! on the number of participants and entries, not on the volume.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::auction::{price_query, Bidder, Slate};
use crate::error::{Error, Result};
use crate::model::{Entry, Instance, Schedule};
use crate::rational::{self, Rational};

/// One participant on a keyword, as seen by the engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Participation {
    pub adv: usize,
    /// 1-based first query.
    pub start: u64,
    /// `None` means the participant never runs out of money.
    pub budget: Option<Rational>,
    pub cap: Option<u64>,
}

impl From<&Entry> for Participation {
    fn from(e: &Entry) -> Self {
        Participation { adv: e.adv, start: e.start, budget: Some(e.budget.clone()), cap: e.cap }
    }
}

/// Queries `from+1 ..= to` share `slate`. An empty slate marks unsold queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub from: u64,
    pub to: u64,
    pub slate: Slate,
}

impl Segment {
    pub fn len(&self) -> u64 {
        self.to - self.from
    }

    pub fn is_empty(&self) -> bool {
        self.to == self.from
    }

    pub fn is_dark(&self) -> bool {
        self.slate.ranking.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub queries: u64,
    pub spend: Rational,
    pub payoff: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordRun {
    pub kw: usize,
    pub segments: Vec<Segment>,
    /// Keyed by advertiser index.
    pub tallies: BTreeMap<usize, Tally>,
    pub revenue: Rational,
    pub welfare: Rational,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Status {
    Pending,
    Active,
    Gone,
}

struct Seat {
    adv: usize,
    score: Rational,
    start: u64,
    remaining: Option<Rational>,
    cap: Option<u64>,
    bought: u64,
    status: Status,
}

impl Seat {
    /// Whether the seat can take the next query at per-impression `cost`.
    fn affordable(&self, cost: &Rational) -> bool {
        if let Some(c) = self.cap {
            if self.bought >= c {
                return false;
            }
        }
        match &self.remaining {
            None => true,
            Some(r) if cost.is_zero() => self.cap.is_some() || r.is_positive(),
            Some(r) => r >= cost,
        }
    }
}

/// Runs one keyword from the first to the last query.
///
/// Before each query, participants who cannot afford their current price or
/// have used up their query cap leave (all at once, then prices are
/// recomputed). Nobody re-enters after leaving.
pub fn run_keyword(inst: &Instance, kw: usize, parts: &[Participation], reserve: &Rational) -> Result<KeywordRun> {
    let volume = inst.keywords[kw].volume;
    let mut seats = Vec::with_capacity(parts.len());
    for p in parts {
        let score = inst.score(p.adv, kw).ok_or_else(|| {
            Error::Domain(format!("no edge ({}, {})", inst.advertisers[p.adv].id, inst.keywords[kw].id))
        })?;
        let dead = p.cap == Some(0) || p.start > volume || p.start == 0;
        seats.push(Seat {
            adv: p.adv,
            score: score.clone(),
            start: p.start,
            remaining: p.budget.clone(),
            cap: p.cap,
            bought: 0,
            status: if dead { Status::Gone } else { Status::Pending },
        });
    }
    let mut tallies: BTreeMap<usize, Tally> = BTreeMap::new();
    for p in parts {
        tallies.entry(p.adv).or_default();
    }
    let mut segments = Vec::new();
    let mut revenue = Rational::zero();
    let mut welfare = Rational::zero();
    let mut pos = 0u64;
    while pos < volume {
        for s in seats.iter_mut() {
            if s.status == Status::Pending && s.start <= pos + 1 {
                s.status = Status::Active;
            }
        }
        let slate = loop {
            let active: Vec<Bidder> = seats
                .iter()
                .filter(|s| s.status == Status::Active)
                .map(|s| Bidder { adv: s.adv, score: s.score.clone() })
                .collect();
            let slate = if active.is_empty() { Slate::empty() } else { price_query(&active, &inst.slots, reserve) };
            let mut dropped = false;
            for s in seats.iter_mut().filter(|s| s.status == Status::Active) {
                let (c, _) = slate.terms(s.adv).expect("active seat is ranked");
                if !s.affordable(c) {
                    s.status = Status::Gone;
                    dropped = true;
                }
            }
            if !dropped {
                break slate;
            }
        };
        let next_entry = seats
            .iter()
            .filter(|s| s.status == Status::Pending)
            .map(|s| s.start - 1)
            .min();
        let mut y = volume - pos;
        if let Some(e) = next_entry {
            y = y.min(e - pos);
        }
        if slate.ranking.is_empty() {
            segments.push(Segment { from: pos, to: pos + y, slate });
            pos += y;
            continue;
        }
        for s in seats.iter().filter(|s| s.status == Status::Active) {
            if let Some(c) = s.cap {
                y = y.min(c - s.bought);
            }
            let (c, _) = slate.terms(s.adv).unwrap();
            if let (Some(r), false) = (&s.remaining, c.is_zero()) {
                y = y.min(rational::floor_div_u64(r, c));
            }
        }
        debug_assert!(y >= 1);
        for s in seats.iter_mut().filter(|s| s.status == Status::Active) {
            let (c, u) = slate.terms(s.adv).unwrap();
            let spent = rational::times(c, y);
            if let Some(r) = s.remaining.as_mut() {
                *r = rational::sub(r, &spent);
            }
            s.bought += y;
            let t = tallies.get_mut(&s.adv).unwrap();
            t.queries += y;
            t.spend = rational::add(&t.spend, &spent);
            t.payoff = rational::add(&t.payoff, &rational::times(u, y));
        }
        revenue = rational::add(&revenue, &rational::times(&slate.revenue, y));
        welfare = rational::add(&welfare, &rational::times(&slate.welfare, y));
        segments.push(Segment { from: pos, to: pos + y, slate });
        pos += y;
    }
    Ok(KeywordRun { kw, segments, tallies, revenue, welfare })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdvertiserDay {
    pub spend: Rational,
    pub payoff: Rational,
    /// Budget minus spend.
    pub leftover: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DayOutcome {
    pub keywords: Vec<KeywordRun>,
    pub advertisers: Vec<AdvertiserDay>,
    pub revenue: Rational,
    pub welfare: Rational,
}

impl DayOutcome {
    pub fn tally(&self, adv: usize, kw: usize) -> Tally {
        self.keywords[kw].tallies.get(&adv).cloned().unwrap_or_default()
    }
}

fn keyword_parts(schedule: &Schedule, kw: usize) -> Vec<Participation> {
    schedule.entries.iter().filter(|e| e.kw == kw).map(Participation::from).collect()
}

/// Simulates every keyword of `inst` under `schedule`.
pub fn simulate_day(inst: &Instance, schedule: &Schedule, reserve: &Rational) -> Result<DayOutcome> {
    let runs = (0..inst.m())
        .map(|kw| run_keyword(inst, kw, &keyword_parts(schedule, kw), reserve))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_runs(inst, runs))
}

/// Same as [`simulate_day`], with keywords simulated on the rayon pool.
pub fn simulate_day_par(inst: &Instance, schedule: &Schedule, reserve: &Rational) -> Result<DayOutcome> {
    let runs = (0..inst.m())
        .into_par_iter()
        .map(|kw| run_keyword(inst, kw, &keyword_parts(schedule, kw), reserve))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_runs(inst, runs))
}

/// Totals of per-keyword runs listed in keyword order.
pub fn assemble_runs(inst: &Instance, runs: Vec<KeywordRun>) -> DayOutcome {
    let mut advertisers: Vec<AdvertiserDay> = inst
        .advertisers
        .iter()
        .map(|a| AdvertiserDay { spend: Rational::zero(), payoff: Rational::zero(), leftover: a.budget.clone() })
        .collect();
    let mut revenue = Rational::zero();
    let mut welfare = Rational::zero();
    for run in &runs {
        revenue += &run.revenue;
        welfare += &run.welfare;
        for (adv, t) in &run.tallies {
            let a = &mut advertisers[*adv];
            a.spend += &t.spend;
            a.payoff += &t.payoff;
            a.leftover -= &t.spend;
        }
    }
    DayOutcome { keywords: runs, advertisers, revenue, welfare }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeDelta {
    pub revenue: Rational,
    pub welfare: Rational,
    pub payoff: Vec<Rational>,
    pub keyword_revenue: Vec<Rational>,
    pub keyword_welfare: Vec<Rational>,
    pub revenue_improving: bool,
}

/// `b - a` for every reported quantity.
pub fn compare_outcomes(a: &DayOutcome, b: &DayOutcome) -> Result<OutcomeDelta> {
    if a.keywords.len() != b.keywords.len() || a.advertisers.len() != b.advertisers.len() {
        return Err(Error::Domain("outcomes cover different keyword or advertiser sets".into()));
    }
    if a.keywords.iter().zip(&b.keywords).any(|(x, y)| x.kw != y.kw) {
        return Err(Error::Domain("outcomes cover different keyword sets".into()));
    }
    let revenue = &b.revenue - &a.revenue;
    Ok(OutcomeDelta {
        welfare: &b.welfare - &a.welfare,
        payoff: a.advertisers.iter().zip(&b.advertisers).map(|(x, y)| &y.payoff - &x.payoff).collect(),
        keyword_revenue: a.keywords.iter().zip(&b.keywords).map(|(x, y)| &y.revenue - &x.revenue).collect(),
        keyword_welfare: a.keywords.iter().zip(&b.keywords).map(|(x, y)| &y.welfare - &x.welfare).collect(),
        revenue_improving: revenue.is_positive(),
        revenue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn inst() -> Instance {
        Instance::from_json(
            r#"{"slots":{"count":2,"clickability":["1","0.7"]},
            "keywords":[{"id":"k1","volume":100}],
            "advertisers":[{"id":"1","budget":"45"},{"id":"2","budget":"37"},{"id":"3","budget":"10"}],
            "edges":[{"advertiser":"1","keyword":"k1","score":"5"},
                     {"advertiser":"2","keyword":"k1","score":"3"},
                     {"advertiser":"3","keyword":"k1","score":"2"}]}"#,
        )
        .unwrap()
    }

    fn part(adv: usize, start: u64, budget: i64) -> Participation {
        Participation { adv, start, budget: Some(int(budget)), cap: None }
    }

    #[test]
    fn drop_outs_cut_segments() {
        let g = inst();
        let run = run_keyword(&g, 0, &[part(0, 1, 45), part(1, 1, 37), part(2, 1, 10)], &int(0)).unwrap();
        let bounds: Vec<(u64, u64)> = run.segments.iter().map(|s| (s.from, s.to)).collect();
        assert_eq!(bounds, vec![(0, 19), (19, 36), (36, 100)]);
        assert_eq!(run.revenue, ratio(805, 10));
        assert_eq!(run.welfare, ratio(3377, 10));
        assert_eq!(run.tallies[&0].spend, ratio(437, 10));
        assert_eq!(run.tallies[&1].spend, ratio(368, 10));
    }

    #[test]
    fn late_entry_creates_a_breakpoint() {
        let g = inst();
        let run = run_keyword(&g, 0, &[part(0, 1, 45), part(1, 1, 37), part(2, 51, 10)], &int(0)).unwrap();
        assert_eq!(run.segments[0].to, 50);
        assert_eq!(run.segments[1].slate.members(), vec![1, 2]);
        assert_eq!(run.revenue, int(75));
        assert_eq!(run.welfare, int(575));
    }

    #[test]
    fn caps_end_participation() {
        let g = inst();
        let mut p = part(0, 1, 45);
        p.cap = Some(10);
        let run = run_keyword(&g, 0, &[p, part(1, 1, 37)], &int(0)).unwrap();
        assert_eq!(run.tallies[&0].queries, 10);
        assert_eq!(run.tallies[&0].spend, int(9));
        assert_eq!(run.tallies[&1].queries, 100);
    }

    #[test]
    fn empty_keyword_is_dark() {
        let g = inst();
        let run = run_keyword(&g, 0, &[part(2, 40, 10)], &int(0)).unwrap();
        assert!(run.segments[0].is_dark());
        assert_eq!((run.segments[0].from, run.segments[0].to), (0, 39));
        assert_eq!(run.tallies[&2].queries, 61);
        assert_eq!(run.revenue, int(0));
    }

    #[test]
    fn zero_budget_without_cap_never_enters() {
        let g = inst();
        let run = run_keyword(&g, 0, &[part(0, 1, 45), part(1, 1, 0)], &int(0)).unwrap();
        assert_eq!(run.tallies[&1].queries, 0);
        assert_eq!(run.revenue, int(0));
    }
}
