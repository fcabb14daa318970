#![allow(dead_code)]

use broadmatch::model::{Entry, Instance, Schedule};
use broadmatch::rational::{fmt, ratio, Rational};
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const SCORES: [(i64, i64); 8] = [(1, 1), (3, 2), (2, 1), (5, 2), (3, 1), (7, 2), (4, 1), (5, 1)];
pub const GAMMAS: [(i64, i64); 3] = [(1, 1), (7, 10), (2, 5)];

pub fn score_from(rng: &mut ChaCha8Rng) -> Rational {
    let (p, q) = SCORES[rng.gen_range(0..SCORES.len())];
    ratio(p, q)
}

/// Random instance with `n <= 5`, `m <= 4`, volumes up to `vmax`; extension
/// edges are added with probability `p_ext` when given.
pub fn random_instance(rng: &mut ChaCha8Rng, vmax: u64, p_ext: Option<f64>) -> Instance {
    let n = rng.gen_range(1..=5usize);
    let m = rng.gen_range(1..=4usize);
    let k = rng.gen_range(1..=3usize);
    let gammas: Vec<String> = GAMMAS[..k].iter().map(|&(p, q)| fmt(&ratio(p, q))).collect();
    let keywords: Vec<_> = (0..m).map(|j| json!({"id": format!("k{}", j + 1), "volume": rng.gen_range(1..=vmax)})).collect();
    let advertisers: Vec<_> =
        (0..n).map(|i| json!({"id": format!("{}", i + 1), "budget": fmt(&ratio(rng.gen_range(0..=80), 4))})).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        let forced = rng.gen_range(0..m);
        for j in 0..m {
            let tag = if j == forced || rng.gen_bool(0.5) {
                "base"
            } else if p_ext.map(|p| rng.gen_bool(p)).unwrap_or(false) {
                "extension"
            } else {
                continue;
            };
            edges.push(json!({
                "advertiser": format!("{}", i + 1),
                "keyword": format!("k{}", j + 1),
                "score": fmt(&score_from(rng)),
                "tag": tag,
            }));
        }
    }
    let doc = json!({"slots": {"count": k, "clickability": gammas}, "keywords": keywords, "advertisers": advertisers, "edges": edges});
    Instance::from_json(&doc.to_string()).expect("random instance is valid")
}

/// Random commitments on base edges: budgets split from each advertiser's total,
/// random start queries and optional caps.
pub fn random_schedule(rng: &mut ChaCha8Rng, inst: &Instance) -> Schedule {
    let mut entries = Vec::new();
    for adv in 0..inst.n() {
        let mut left = inst.advertisers[adv].budget.clone();
        for e in inst.edges.iter().filter(|e| e.adv == adv && e.tag == broadmatch::model::Tag::Base) {
            if rng.gen_bool(0.2) {
                continue;
            }
            let share = ratio(rng.gen_range(0..=4), 4);
            let budget = &left * &share;
            left -= &budget;
            let v = inst.keywords[e.kw].volume;
            let start = if rng.gen_bool(0.6) { 1 } else { rng.gen_range(1..=v) };
            let cap = if rng.gen_bool(0.4) { Some(rng.gen_range(0..=v)) } else { None };
            entries.push(Entry { adv, kw: e.kw, start, budget, cap });
        }
    }
    Schedule::new(entries)
}

/// Per-impression price of each slotted position, computed from the ranked scores.
pub fn naive_prices(scores: &[Rational], gamma: &[Rational], reserve: &Rational) -> Vec<Rational> {
    let k = gamma.len().min(scores.len());
    let g = |j: usize| if j < gamma.len() { gamma[j].clone() } else { Rational::zero() };
    let s = |j: usize| if j < scores.len() { scores[j].clone() } else { reserve.clone() };
    (0..k)
        .map(|i| {
            let mut p = Rational::zero();
            for j in i..k {
                p += (g(j) - g(j + 1)) * s(j + 1);
            }
            p
        })
        .collect()
}

/// Per-keyword revenue, welfare and per-advertiser (queries, spend, payoff),
/// computed one query at a time.
pub struct NaiveDay {
    pub keyword_revenue: Vec<Rational>,
    pub keyword_welfare: Vec<Rational>,
    pub per_adv: Vec<(u64, Rational, Rational)>,
}

pub fn naive_day(inst: &Instance, plan: &Schedule, reserve: &Rational) -> NaiveDay {
    let gamma = inst.slots.gamma.clone();
    let mut per_adv = vec![(0u64, Rational::zero(), Rational::zero()); inst.n()];
    let mut keyword_revenue = Vec::new();
    let mut keyword_welfare = Vec::new();
    for kw in 0..inst.m() {
        struct P {
            adv: usize,
            score: Rational,
            start: u64,
            budget: Rational,
            cap: Option<u64>,
            bought: u64,
            gone: bool,
        }
        let mut ps: Vec<P> = plan
            .for_keyword(kw)
            .iter()
            .map(|e| P {
                adv: e.adv,
                score: inst.score(e.adv, kw).unwrap().clone(),
                start: e.start,
                budget: e.budget.clone(),
                cap: e.cap,
                bought: 0,
                gone: e.cap == Some(0),
            })
            .collect();
        let mut rev = Rational::zero();
        let mut wel = Rational::zero();
        for query in 1..=inst.keywords[kw].volume {
            loop {
                let mut idx: Vec<usize> = (0..ps.len()).filter(|&i| !ps[i].gone && ps[i].start <= query).collect();
                idx.sort_by(|&a, &b| ps[b].score.cmp(&ps[a].score).then(ps[a].adv.cmp(&ps[b].adv)));
                let scores: Vec<Rational> = idx.iter().map(|&i| ps[i].score.clone()).collect();
                let prices = naive_prices(&scores, &gamma, reserve);
                let mut leave = Vec::new();
                for (r, &i) in idx.iter().enumerate() {
                    let cost = prices.get(r).cloned().unwrap_or_else(Rational::zero);
                    let p = &ps[i];
                    let capped_out = p.cap.map(|c| p.bought >= c).unwrap_or(false);
                    let broke = if cost.is_zero() { p.cap.is_none() && p.budget.is_zero() } else { p.budget < cost };
                    if capped_out || broke {
                        leave.push(i);
                    }
                }
                if leave.is_empty() {
                    for (r, &i) in idx.iter().enumerate() {
                        if r >= prices.len() {
                            continue;
                        }
                        let click = &gamma[r] * &ps[i].score;
                        let cost = prices[r].clone();
                        rev += &cost;
                        wel += &click;
                        let a = ps[i].adv;
                        per_adv[a].1 += &cost;
                        per_adv[a].2 += &click - &cost;
                    }
                    for &i in &idx {
                        let r = idx.iter().position(|&x| x == i).unwrap();
                        let cost = prices.get(r).cloned().unwrap_or_else(Rational::zero);
                        ps[i].budget -= cost;
                        ps[i].bought += 1;
                        per_adv[ps[i].adv].0 += 1;
                    }
                    break;
                }
                for i in leave {
                    ps[i].gone = true;
                }
            }
        }
        keyword_revenue.push(rev);
        keyword_welfare.push(wel);
    }
    NaiveDay { keyword_revenue, keyword_welfare, per_adv }
}

/// Largest payoff reachable within `budget`, by enumerating every query vector.
pub fn enumerate_best(tables: &[broadmatch::partition::PartitionTable], budget: &Rational) -> Rational {
    fn go(tables: &[broadmatch::partition::PartitionTable], k: usize, left: &Rational, acc: &Rational, best: &mut Rational) {
        if k == tables.len() {
            if acc > best {
                *best = acc.clone();
            }
            return;
        }
        let t = &tables[k];
        let mut cost = Rational::zero();
        let mut pay = Rational::zero();
        for x in 0..=t.volume() {
            if x > 0 {
                cost += t.cost_at(x);
                pay += t.payoff_at(x);
            }
            if &cost > left {
                break;
            }
            go(tables, k + 1, &(left - &cost), &(acc + &pay), best);
        }
    }
    let mut best = Rational::zero();
    go(tables, 0, budget, &Rational::zero(), &mut best);
    best
}

pub fn one() -> Rational {
    Rational::one()
}
