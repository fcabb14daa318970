//! Equilibrium checks, best-response dynamics and revenue comparisons.

use std::collections::HashMap;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bestresp::{self, Method};
use crate::error::{Error, Result};
use crate::model::{all_in_schedule, Allocation, BudgetSplit, Instance};
use crate::partition::{query_partition, PartitionTable};
use crate::rational::{ratio, Ext, Rational};
use crate::simulate::simulate_day;

/// Bang-per-buck of the last bought and the next query on one edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarginalPair {
    pub kw: usize,
    pub queries: u64,
    /// Undefined when nothing is bought.
    pub minus: Option<Ext>,
    /// Undefined when the edge is query-saturated.
    pub plus: Option<Ext>,
}

/// Tables of every edge of `adv` against the rest of `split`.
pub fn split_tables(inst: &Instance, split: &BudgetSplit, adv: usize, reserve: &Rational) -> Result<Vec<PartitionTable>> {
    inst.keywords_of(adv)
        .into_iter()
        .map(|kw| query_partition(inst, kw, adv, &split.others_entries(adv, kw), reserve))
        .collect()
}

fn pairs_from(tables: &[PartitionTable], split: &BudgetSplit, adv: usize) -> Vec<MarginalPair> {
    let queries: Vec<u64> = tables.iter().map(|t| split.queries(adv, t.kw)).collect();
    table_pairs(tables, &queries)
}

/// Marginal pairs of tables bought up to `queries[k]` on `tables[k]`.
pub fn table_pairs(tables: &[PartitionTable], queries: &[u64]) -> Vec<MarginalPair> {
    tables
        .iter()
        .zip(queries)
        .map(|(t, &v)| MarginalPair {
            kw: t.kw,
            queries: v,
            minus: (v > 0).then(|| t.pi_at(v)),
            plus: (v < t.volume()).then(|| t.pi_at(v + 1)),
        })
        .collect()
}

pub fn marginal_payoffs(inst: &Instance, split: &BudgetSplit, adv: usize, reserve: &Rational) -> Result<Vec<MarginalPair>> {
    let tables = split_tables(inst, split, adv, reserve)?;
    Ok(pairs_from(&tables, split, adv))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Moving one query's budget from `from` to `to` pays.
    Local { adv: usize, from: usize, to: usize, minus: Ext, plus: Ext },
    /// Budget left over while some edge could still buy.
    Unspent { adv: usize, leftover: Rational, kw: usize, next_cost: Rational },
    /// Committed budget below the cost of the committed queries.
    Inconsistent { adv: usize, kw: usize, budget: Rational, needed: Rational },
    /// Payoff below the required fraction of the best response.
    Approximation { adv: usize, payoff: Rational, bound: Rational },
}

/// ε-NE standing of one advertiser.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsEntry {
    pub adv: usize,
    pub payoff: Rational,
    /// Exact optimum (dp) or the approximate solver's value (fptas).
    pub reference: Rational,
    /// Certified upper bound on the optimum.
    pub opt_upper: Rational,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquilibriumReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub advertisers: Vec<EpsEntry>,
}

fn current_payoff(tables: &[PartitionTable], split: &BudgetSplit, adv: usize) -> Rational {
    tables.iter().map(|t| t.prefix_payoff(split.queries(adv, t.kw))).fold(Rational::zero(), |a, b| a + b)
}

/// Checks the local conditions of one advertiser.
pub fn bme_violations_of(inst: &Instance, split: &BudgetSplit, adv: usize, reserve: &Rational) -> Result<Vec<Violation>> {
    let tables = split_tables(inst, split, adv, reserve)?;
    let queries: Vec<u64> = tables.iter().map(|t| split.queries(adv, t.kw)).collect();
    let budgets: Vec<Rational> = tables.iter().map(|t| split.budget(adv, t.kw)).collect();
    Ok(table_violations(adv, &tables, &queries, &budgets, &inst.advertisers[adv].budget))
}

/// Local conditions for a row given as per-table queries and budgets.
pub fn table_violations(adv: usize, tables: &[PartitionTable], queries: &[u64], budgets: &[Rational], total: &Rational) -> Vec<Violation> {
    let pairs = table_pairs(tables, queries);
    let mut out = Vec::new();
    for p in &pairs {
        for q in &pairs {
            if p.kw == q.kw {
                continue;
            }
            if let (Some(minus), Some(plus)) = (&p.minus, &q.plus) {
                if plus > minus {
                    out.push(Violation::Local { adv, from: p.kw, to: q.kw, minus: minus.clone(), plus: plus.clone() });
                }
            }
        }
    }
    let mut committed = Rational::zero();
    let mut spent = Rational::zero();
    for ((t, &v), b) in tables.iter().zip(queries).zip(budgets) {
        let need = t.prefix_cost(v);
        if b < &need {
            out.push(Violation::Inconsistent { adv, kw: t.kw, budget: b.clone(), needed: need.clone() });
        }
        committed += b;
        spent += need;
    }
    if &committed != total {
        let leftover = total - &spent;
        for (t, &v) in tables.iter().zip(queries) {
            if v == t.volume() {
                continue;
            }
            let next = t.cost_at(v + 1).clone();
            if leftover >= next {
                out.push(Violation::Unspent { adv, leftover: leftover.clone(), kw: t.kw, next_cost: next });
            }
        }
    }
    out
}

pub fn verify_bme(inst: &Instance, split: &BudgetSplit, reserve: &Rational) -> Result<EquilibriumReport> {
    let mut violations = Vec::new();
    for adv in 0..inst.n() {
        violations.extend(bme_violations_of(inst, split, adv, reserve)?);
    }
    let verdict = if violations.is_empty() { Verdict::Holds } else { Verdict::Violated };
    Ok(EquilibriumReport { verdict, violations, advertisers: Vec::new() })
}

pub fn verify_eps_ne(
    inst: &Instance,
    split: &BudgetSplit,
    eps: &Rational,
    method: Method,
    reserve: &Rational,
    scale_cap: u64,
) -> Result<EquilibriumReport> {
    if eps < &Rational::zero() || eps >= &Rational::one() {
        return Err(Error::InvalidArgument("epsilon must lie in [0, 1)".into()));
    }
    let keep = Rational::one() - eps;
    let mut advertisers = Vec::new();
    let mut violations = Vec::new();
    for adv in 0..inst.n() {
        let tables = split_tables(inst, split, adv, reserve)?;
        let payoff = current_payoff(&tables, split, adv);
        let budget = &inst.advertisers[adv].budget;
        let entry = match method {
            Method::Dp | Method::Brute => {
                let opt = if method == Method::Dp {
                    bestresp::exact_best_response_dp(&tables, budget, scale_cap)?
                } else {
                    bestresp::brute_force_oracle(&tables, budget)?
                };
                let verdict = if payoff >= &keep * &opt.payoff { Verdict::Holds } else { Verdict::Violated };
                EpsEntry { adv, payoff, reference: opt.payoff.clone(), opt_upper: opt.payoff, verdict }
            }
            Method::Fptas => {
                let delta = if eps.is_zero() { ratio(1, 20) } else { eps / Rational::from_integer(2.into()) };
                let alg = bestresp::fptas_as2(&tables, budget, &delta)?;
                let upper = &alg.payoff / (Rational::one() - &delta);
                let verdict = if payoff >= &keep * &upper {
                    Verdict::Holds
                } else if payoff < &keep * &alg.payoff {
                    Verdict::Violated
                } else {
                    Verdict::Inconclusive
                };
                EpsEntry { adv, payoff, reference: alg.payoff, opt_upper: upper, verdict }
            }
            Method::Greedy => return Err(Error::InvalidArgument("ε-NE checks use --method dp or fptas".into())),
        };
        if entry.verdict == Verdict::Violated {
            violations.push(Violation::Approximation {
                adv,
                payoff: entry.payoff.clone(),
                bound: &keep * &entry.reference,
            });
        }
        advertisers.push(entry);
    }
    let verdict = if advertisers.iter().any(|e| e.verdict == Verdict::Violated) {
        Verdict::Violated
    } else if advertisers.iter().any(|e| e.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    Ok(EquilibriumReport { verdict, violations, advertisers })
}

/// Every advertiser commits her whole budget to her best-score edge.
pub fn all_in_split(inst: &Instance) -> BudgetSplit {
    BudgetSplit::new(
        all_in_schedule(inst)
            .entries
            .iter()
            .map(|e| Allocation { adv: e.adv, kw: e.kw, queries: inst.keywords[e.kw].volume, budget: e.budget.clone() })
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicsStatus {
    FixedPoint,
    CycleDetected,
    RoundCap,
}

impl DynamicsStatus {
    pub fn name(self) -> &'static str {
        match self {
            DynamicsStatus::FixedPoint => "fixed-point",
            DynamicsStatus::CycleDetected => "cycle-detected",
            DynamicsStatus::RoundCap => "round-cap",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicsResult {
    pub split: BudgetSplit,
    pub status: DynamicsStatus,
    pub rounds: usize,
    /// Round whose starting state reappeared, for cycles.
    pub cycle_from: Option<usize>,
    pub order: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DynamicsConfig {
    pub method: Method,
    pub max_rounds: usize,
    pub shuffle_seed: Option<u64>,
    pub eps: Rational,
    pub reserve: Rational,
    pub scale_cap: u64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            method: Method::Greedy,
            max_rounds: 100,
            shuffle_seed: None,
            eps: ratio(1, 10),
            reserve: Rational::zero(),
            scale_cap: bestresp::DEFAULT_SCALE_CAP,
        }
    }
}

/// Rows of `adv` after she best-responds to `split`.
pub fn respond(inst: &Instance, split: &BudgetSplit, adv: usize, cfg: &DynamicsConfig) -> Result<Vec<Allocation>> {
    let tables = split_tables(inst, split, adv, &cfg.reserve)?;
    let res = bestresp::best_response(&tables, &inst.advertisers[adv].budget, cfg.method, &cfg.eps, cfg.scale_cap)?;
    Ok(res
        .keywords
        .iter()
        .zip(res.queries.iter().zip(&res.budgets))
        .filter(|(_, (&q, b))| q > 0 || !b.is_zero())
        .map(|(&kw, (&queries, budget))| Allocation { adv, kw, queries, budget: budget.clone() })
        .collect())
}

/// Sequential best responses until nothing changes over a full round.
pub fn best_response_dynamics(inst: &Instance, init: BudgetSplit, cfg: &DynamicsConfig) -> Result<DynamicsResult> {
    let mut order: Vec<usize> = (0..inst.n()).collect();
    if let Some(seed) = cfg.shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut split = init;
    let mut seen: HashMap<BudgetSplit, usize> = HashMap::new();
    for round in 0..cfg.max_rounds {
        if let Some(&from) = seen.get(&split) {
            return Ok(DynamicsResult { split, status: DynamicsStatus::CycleDetected, rounds: round, cycle_from: Some(from), order });
        }
        seen.insert(split.clone(), round);
        let start = split.clone();
        for &adv in &order {
            let rows = respond(inst, &split, adv, cfg)?;
            split.set_row(adv, rows);
        }
        if split == start {
            return Ok(DynamicsResult { split, status: DynamicsStatus::FixedPoint, rounds: round + 1, cycle_from: None, order });
        }
    }
    Ok(DynamicsResult { split, status: DynamicsStatus::RoundCap, rounds: cfg.max_rounds, cycle_from: None, order })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileOutcome {
    pub revenue: Rational,
    pub welfare: Rational,
    pub delta_revenue: Rational,
    pub delta_welfare: Rational,
    pub violations: Vec<Violation>,
}

impl ProfileOutcome {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DilemmaReport {
    pub base_split: BudgetSplit,
    pub base_status: Option<DynamicsStatus>,
    pub base_revenue: Rational,
    pub base_welfare: Rational,
    pub profiles: Vec<ProfileOutcome>,
}

impl DilemmaReport {
    /// Some accepted profile gains revenue and another loses it.
    pub fn is_dilemma(&self) -> bool {
        let acc = || self.profiles.iter().filter(|p| p.accepted());
        acc().any(|p| p.delta_revenue > Rational::zero()) && acc().any(|p| p.delta_revenue < Rational::zero())
    }
}

/// Revenue and welfare of extension equilibria against a base equilibrium.
///
/// Without `base_split`, the base equilibrium is found by greedy dynamics from
/// the all-in split.
pub fn dilemma_report(
    base: &Instance,
    ext: &Instance,
    base_split: Option<BudgetSplit>,
    profiles: &[BudgetSplit],
    reserve: &Rational,
) -> Result<DilemmaReport> {
    crate::model::check_extension(base, ext)?;
    let (base_split, base_status) = match base_split {
        Some(s) => (s, None),
        None => {
            let cfg = DynamicsConfig { reserve: reserve.clone(), ..Default::default() };
            let run = best_response_dynamics(base, all_in_split(base), &cfg)?;
            (run.split, Some(run.status))
        }
    };
    let b = simulate_day(base, &base_split.to_schedule(), reserve)?;
    let mut out = Vec::new();
    for p in profiles {
        let report = verify_bme(ext, p, reserve)?;
        let day = simulate_day(ext, &p.to_schedule(), reserve)?;
        out.push(ProfileOutcome {
            delta_revenue: &day.revenue - &b.revenue,
            delta_welfare: &day.welfare - &b.welfare,
            revenue: day.revenue,
            welfare: day.welfare,
            violations: report.violations,
        });
    }
    Ok(DilemmaReport { base_split, base_status, base_revenue: b.revenue, base_welfare: b.welfare, profiles: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    const ONE_KW: &str = r#"{"slots":{"count":2,"clickability":["1","0.7"]},
        "keywords":[{"id":"k1","volume":10},{"id":"k2","volume":10}],
        "advertisers":[{"id":"1","budget":"5"},{"id":"2","budget":"3"}],
        "edges":[{"advertiser":"1","keyword":"k1","score":"2"},
                 {"advertiser":"2","keyword":"k2","score":"1"}]}"#;

    #[test]
    fn lone_edges_are_a_fixed_point() {
        let g = Instance::from_json(ONE_KW).unwrap();
        let init = BudgetSplit::new(vec![
            Allocation { adv: 0, kw: 0, queries: 10, budget: int(5) },
            Allocation { adv: 1, kw: 1, queries: 10, budget: int(3) },
        ]);
        let run = best_response_dynamics(&g, init.clone(), &DynamicsConfig::default()).unwrap();
        assert_eq!(run.status, DynamicsStatus::FixedPoint);
        assert_eq!(run.split, init);
        assert_eq!(verify_bme(&g, &init, &int(0)).unwrap().verdict, Verdict::Holds);
        let pairs = marginal_payoffs(&g, &init, 0, &int(0)).unwrap();
        assert_eq!(pairs[0].minus, Some(Ext::Infinite));
        assert_eq!(pairs[0].plus, None);
    }

    #[test]
    fn uncommitted_budget_breaks_e2() {
        let g = Instance::from_json(ONE_KW).unwrap();
        let split = BudgetSplit::new(vec![Allocation { adv: 0, kw: 0, queries: 4, budget: int(0) }]);
        let r = verify_bme(&g, &split, &int(0)).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Unspent { adv: 0, .. })));
    }

    #[test]
    fn eps_checks_compare_with_the_optimum() {
        let g = Instance::from_json(ONE_KW).unwrap();
        let split = BudgetSplit::default();
        let r = verify_eps_ne(&g, &split, &ratio(999, 1000), Method::Dp, &int(0), bestresp::DEFAULT_SCALE_CAP).unwrap();
        // both advertisers are alone, so their best payoff is positive
        assert_eq!(r.verdict, Verdict::Violated);
        let full = all_in_split(&g);
        let r = verify_eps_ne(&g, &full, &int(0), Method::Dp, &int(0), bestresp::DEFAULT_SCALE_CAP).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
    }
}
