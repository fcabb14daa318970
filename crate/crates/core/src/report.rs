//! JSON and text rendering of engine results.
//!
//! Objects are `serde_json` maps, which keep keys sorted, so equal inputs give
//! byte-identical reports. Rationals render as `{"exact": "p/q", "decimal": ...}`.

use std::fmt::Write as _;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::acbm::{AllocationResult, ExcessProfile, ObrevWitness};
use crate::auction::Slate;
use crate::bestresp::ResponseResult;
use crate::equilibrium::{DilemmaReport, DynamicsResult, EquilibriumReport, MarginalPair, Violation};
use crate::error::Error;
use crate::fixtures::TableFixture;
use crate::model::{BudgetSplit, Entry, Instance, Schedule};
use crate::partition::{GlobalPartition, PartitionTable};
use crate::rational::{self, Ext, Rational};
use crate::simulate::{DayOutcome, OutcomeDelta};

/// Display ids for advertiser and keyword indices.
#[derive(Clone, Debug)]
pub struct Names {
    pub advertisers: Vec<String>,
    pub keywords: Vec<String>,
}

impl Names {
    pub fn of(inst: &Instance) -> Names {
        Names {
            advertisers: inst.advertisers.iter().map(|a| a.id.clone()).collect(),
            keywords: inst.keywords.iter().map(|k| k.id.clone()).collect(),
        }
    }

    pub fn of_tables(f: &TableFixture) -> Names {
        Names { advertisers: vec![f.advertiser.clone()], keywords: f.keywords.clone() }
    }

    pub fn adv(&self, i: usize) -> &str {
        &self.advertisers[i]
    }

    pub fn kw(&self, j: usize) -> &str {
        &self.keywords[j]
    }
}

pub fn q(r: &Rational) -> Value {
    json!({"exact": rational::fmt(r), "decimal": rational::decimal6(r)})
}

pub fn ext(e: &Ext) -> Value {
    json!({"exact": e.text(), "decimal": e.decimal()})
}

fn opt_ext(e: &Option<Ext>) -> Value {
    e.as_ref().map(ext).unwrap_or(Value::Null)
}

/// `sha256:` hex digest of a canonical document.
pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    let mut s = String::from("sha256:");
    for b in hash.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn envelope(args: &[String], digest: Option<&str>, result: Value, exit_code: i32) -> Value {
    json!({
        "command": args,
        "instance_digest": digest,
        "result": result,
        "exit_code": exit_code,
    })
}

pub fn error(e: &Error) -> Value {
    let mut v = json!({"kind": e.kind(), "message": e.to_string()});
    if let Error::Schema { path, .. } = e {
        v["path"] = json!(path);
    }
    json!({"error": v})
}

pub fn slate(n: &Names, s: &Slate) -> Value {
    let rows: Vec<Value> = s
        .ranking
        .iter()
        .enumerate()
        .map(|(r, b)| {
            json!({
                "position": r + 1,
                "advertiser": n.adv(b.adv),
                "score": q(&b.score),
                "cost": q(&s.cost[r]),
                "payoff": q(&s.payoff[r]),
                "slotted": r < s.prices.len(),
            })
        })
        .collect();
    json!({"ranking": rows, "revenue": q(&s.revenue), "welfare": q(&s.welfare)})
}

pub fn outcome(n: &Names, o: &DayOutcome) -> Value {
    let keywords: Vec<Value> = o
        .keywords
        .iter()
        .map(|run| {
            let segments: Vec<Value> = run
                .segments
                .iter()
                .map(|seg| json!({"first_query": seg.from + 1, "last_query": seg.to, "slate": slate(n, &seg.slate)}))
                .collect();
            let tallies: Vec<Value> = run
                .tallies
                .iter()
                .map(|(&a, t)| {
                    json!({"advertiser": n.adv(a), "queries": t.queries, "spend": q(&t.spend), "payoff": q(&t.payoff)})
                })
                .collect();
            json!({
                "keyword": n.kw(run.kw),
                "segments": segments,
                "tallies": tallies,
                "revenue": q(&run.revenue),
                "welfare": q(&run.welfare),
            })
        })
        .collect();
    let advertisers: Vec<Value> = o
        .advertisers
        .iter()
        .enumerate()
        .map(|(a, d)| {
            json!({"advertiser": n.adv(a), "spend": q(&d.spend), "payoff": q(&d.payoff), "leftover": q(&d.leftover)})
        })
        .collect();
    json!({"keywords": keywords, "advertisers": advertisers, "revenue": q(&o.revenue), "welfare": q(&o.welfare)})
}

pub fn outcome_table(n: &Names, o: &DayOutcome) -> String {
    let mut s = String::new();
    for run in &o.keywords {
        let _ = writeln!(s, "keyword {}", n.kw(run.kw));
        let _ = writeln!(s, "  {:>8}  {:>8}  {:<24}  {:>14}  {:>14}", "first", "last", "ranking", "revenue/query", "welfare/query");
        for seg in &run.segments {
            let ranking: Vec<&str> = seg.slate.ranking.iter().map(|b| n.adv(b.adv)).collect();
            let label = if seg.is_dark() { "(dark)".to_string() } else { ranking.join(" > ") };
            let _ = writeln!(
                s,
                "  {:>8}  {:>8}  {:<24}  {:>14}  {:>14}",
                seg.from + 1,
                seg.to,
                label,
                rational::fmt(&seg.slate.revenue),
                rational::fmt(&seg.slate.welfare)
            );
        }
        let _ = writeln!(
            s,
            "  R = {} ({}), E = {} ({})",
            rational::fmt(&run.revenue),
            rational::decimal6(&run.revenue),
            rational::fmt(&run.welfare),
            rational::decimal6(&run.welfare)
        );
    }
    let _ = writeln!(s, "{:<12} {:>14} {:>14} {:>14}", "advertiser", "spend", "payoff", "leftover");
    for (a, d) in o.advertisers.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<12} {:>14} {:>14} {:>14}",
            n.adv(a),
            rational::fmt(&d.spend),
            rational::fmt(&d.payoff),
            rational::fmt(&d.leftover)
        );
    }
    let _ = writeln!(s, "total R = {} ({}), E = {} ({})", rational::fmt(&o.revenue), rational::decimal6(&o.revenue), rational::fmt(&o.welfare), rational::decimal6(&o.welfare));
    s
}

pub fn partition_table(n: &Names, t: &PartitionTable) -> Value {
    let segments: Vec<Value> = (0..t.len())
        .map(|s| {
            let (u, c) = t.prefix(t.z[s + 1]);
            json!({
                "first_query": t.z[s] + 1,
                "last_query": t.z[s + 1],
                "active": t.active.get(s).map(|a| a.iter().map(|&i| n.adv(i).to_string()).collect::<Vec<_>>()),
                "cost": q(&t.cost[s]),
                "payoff": q(&t.payoff[s]),
                "pi": ext(&t.pi(s)),
                "cumulative_cost": q(&c),
                "cumulative_payoff": q(&u),
            })
        })
        .collect();
    json!({"keyword": n.kw(t.kw), "advertiser": n.adv(t.adv), "segments": segments})
}

pub fn partition_text(n: &Names, t: &PartitionTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "advertiser {} on keyword {}", n.adv(t.adv), n.kw(t.kw));
    let _ = writeln!(s, "  {:>8}  {:>8}  {:<16}  {:>10}  {:>10}  {:>10}", "first", "last", "active", "C", "U", "pi");
    for seg in 0..t.len() {
        let active = t.active.get(seg).map(|a| a.iter().map(|&i| n.adv(i)).collect::<Vec<_>>().join(",")).unwrap_or_default();
        let _ = writeln!(
            s,
            "  {:>8}  {:>8}  {:<16}  {:>10}  {:>10}  {:>10}",
            t.z[seg] + 1,
            t.z[seg + 1],
            active,
            rational::fmt(&t.cost[seg]),
            rational::fmt(&t.payoff[seg]),
            t.pi(seg).text()
        );
    }
    s
}

pub fn global_partition(n: &Names, g: &GlobalPartition) -> Value {
    let keywords: Vec<Value> = g
        .keywords
        .iter()
        .map(|k| {
            let segments: Vec<Value> = k
                .segments
                .iter()
                .map(|seg| {
                    json!({
                        "first_query": seg.from + 1,
                        "last_query": seg.to,
                        "active": seg.slate.members().iter().map(|&i| n.adv(i).to_string()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({
                "keyword": n.kw(k.kw),
                "segments": segments,
                "excess_holders": k.excess_holders.iter().map(|&i| n.adv(i).to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "keywords": keywords,
        "excess_set": g.excess_set().iter().map(|&i| n.adv(i).to_string()).collect::<Vec<_>>(),
        "outcome": outcome(n, &g.outcome),
    })
}

pub fn response(n: &Names, r: &ResponseResult) -> Value {
    let allocations: Vec<Value> = r
        .keywords
        .iter()
        .zip(&r.queries)
        .zip(&r.budgets)
        .map(|((&k, &x), b)| json!({"keyword": n.kw(k), "queries": x, "budget": q(b)}))
        .collect();
    json!({
        "method": r.method.name(),
        "allocations": allocations,
        "payoff": q(&r.payoff),
        "cost": q(&r.cost),
        "guarantee": r.guarantee.as_ref().map(q),
        "trace": r.trace.as_ref().map(|t| json!({
            "unstable_after_allocation": t.unstable_after_allocation,
            "readjust_steps": t.readjust_steps,
            "guard_hit": t.guard_hit,
        })),
    })
}

pub fn response_text(n: &Names, r: &ResponseResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method {}", r.method.name());
    let _ = writeln!(s, "  {:<12} {:>10} {:>14}", "keyword", "queries", "budget");
    for ((&k, &x), b) in r.keywords.iter().zip(&r.queries).zip(&r.budgets) {
        let _ = writeln!(s, "  {:<12} {:>10} {:>14}", n.kw(k), x, rational::fmt(b));
    }
    let _ = writeln!(s, "payoff {} ({}), cost {}", rational::fmt(&r.payoff), rational::decimal6(&r.payoff), rational::fmt(&r.cost));
    s
}

pub fn marginals(n: &Names, adv: usize, pairs: &[MarginalPair]) -> Value {
    json!({
        "advertiser": n.adv(adv),
        "edges": pairs.iter().map(|p| json!({
            "keyword": n.kw(p.kw),
            "queries": p.queries,
            "mp_minus": opt_ext(&p.minus),
            "mp_plus": opt_ext(&p.plus),
        })).collect::<Vec<_>>(),
    })
}

pub fn violation(n: &Names, v: &Violation) -> Value {
    match v {
        Violation::Local { adv, from, to, minus, plus } => json!({
            "kind": "local",
            "advertiser": n.adv(*adv),
            "from": n.kw(*from),
            "to": n.kw(*to),
            "mp_minus": ext(minus),
            "mp_plus": ext(plus),
        }),
        Violation::Unspent { adv, leftover, kw, next_cost } => json!({
            "kind": "unspent",
            "advertiser": n.adv(*adv),
            "leftover": q(leftover),
            "keyword": n.kw(*kw),
            "next_cost": q(next_cost),
        }),
        Violation::Inconsistent { adv, kw, budget, needed } => json!({
            "kind": "inconsistent",
            "advertiser": n.adv(*adv),
            "keyword": n.kw(*kw),
            "budget": q(budget),
            "needed": q(needed),
        }),
        Violation::Approximation { adv, payoff, bound } => json!({
            "kind": "approximation",
            "advertiser": n.adv(*adv),
            "payoff": q(payoff),
            "bound": q(bound),
        }),
    }
}

pub fn violation_text(n: &Names, v: &Violation) -> String {
    match v {
        Violation::Local { adv, from, to, minus, plus } => format!(
            "advertiser {}: MP+ on {} is {} > MP- on {} is {}",
            n.adv(*adv),
            n.kw(*to),
            plus.text(),
            n.kw(*from),
            minus.text()
        ),
        Violation::Unspent { adv, leftover, kw, next_cost } => format!(
            "advertiser {}: leftover {} covers the next query on {} at {}",
            n.adv(*adv),
            rational::fmt(leftover),
            n.kw(*kw),
            rational::fmt(next_cost)
        ),
        Violation::Inconsistent { adv, kw, budget, needed } => format!(
            "advertiser {}: budget {} on {} is below the cost {} of its queries",
            n.adv(*adv),
            rational::fmt(budget),
            n.kw(*kw),
            rational::fmt(needed)
        ),
        Violation::Approximation { adv, payoff, bound } => format!(
            "advertiser {}: payoff {} below the bound {}",
            n.adv(*adv),
            rational::fmt(payoff),
            rational::fmt(bound)
        ),
    }
}

pub fn equilibrium(n: &Names, r: &EquilibriumReport) -> Value {
    json!({
        "verdict": r.verdict.name(),
        "violations": r.violations.iter().map(|v| violation(n, v)).collect::<Vec<_>>(),
        "advertisers": r.advertisers.iter().map(|e| json!({
            "advertiser": n.adv(e.adv),
            "payoff": q(&e.payoff),
            "reference": q(&e.reference),
            "opt_upper": q(&e.opt_upper),
            "verdict": e.verdict.name(),
        })).collect::<Vec<_>>(),
    })
}

pub fn equilibrium_text(n: &Names, r: &EquilibriumReport) -> String {
    let mut s = format!("verdict: {}\n", r.verdict.name());
    for e in &r.advertisers {
        let _ = writeln!(
            s,
            "  advertiser {}: payoff {} vs reference {} ({})",
            n.adv(e.adv),
            rational::decimal6(&e.payoff),
            rational::decimal6(&e.reference),
            e.verdict.name()
        );
    }
    for v in &r.violations {
        let _ = writeln!(s, "  {}", violation_text(n, v));
    }
    s
}

pub fn split(inst: &Instance, sp: &BudgetSplit) -> Value {
    serde_json::from_str(&sp.to_json(inst)).expect("split json")
}

pub fn schedule(inst: &Instance, sc: &Schedule) -> Value {
    serde_json::from_str(&sc.to_json(inst)).expect("schedule json")
}

pub fn dynamics(inst: &Instance, d: &DynamicsResult) -> Value {
    let n = Names::of(inst);
    json!({
        "status": d.status.name(),
        "rounds": d.rounds,
        "cycle_from": d.cycle_from,
        "order": d.order.iter().map(|&a| n.adv(a).to_string()).collect::<Vec<_>>(),
        "split": split(inst, &d.split),
    })
}

pub fn dilemma(ext_inst: &Instance, base_inst: &Instance, d: &DilemmaReport) -> Value {
    let n = Names::of(ext_inst);
    json!({
        "base_split": split(base_inst, &d.base_split),
        "base_status": d.base_status.map(|s| s.name()),
        "base_revenue": q(&d.base_revenue),
        "base_welfare": q(&d.base_welfare),
        "profiles": d.profiles.iter().map(|p| json!({
            "revenue": q(&p.revenue),
            "welfare": q(&p.welfare),
            "delta_revenue": q(&p.delta_revenue),
            "delta_welfare": q(&p.delta_welfare),
            "is_bme": p.accepted(),
            "violations": p.violations.iter().map(|v| violation(&n, v)).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "dilemma": d.is_dilemma(),
    })
}

pub fn dilemma_text(d: &DilemmaReport) -> String {
    let mut s = format!("base R = {} ({})\n", rational::fmt(&d.base_revenue), rational::decimal6(&d.base_revenue));
    for (k, p) in d.profiles.iter().enumerate() {
        let _ = writeln!(
            s,
            "profile {}: bme {}, R = {}, dR = {} ({}), dE = {}",
            k + 1,
            if p.accepted() { "yes" } else { "no" },
            rational::fmt(&p.revenue),
            rational::fmt(&p.delta_revenue),
            rational::decimal6(&p.delta_revenue),
            rational::fmt(&p.delta_welfare)
        );
    }
    let _ = writeln!(s, "dilemma: {}", if d.is_dilemma() { "yes" } else { "no" });
    s
}

pub fn excess(n: &Names, e: &ExcessProfile) -> Value {
    json!({
        "advertisers": e.advertisers.iter().map(|x| json!({
            "advertiser": n.adv(x.adv),
            "leftover": q(&x.leftover),
            "max_score": q(&x.max_score),
            "has_excess": x.has_excess,
        })).collect::<Vec<_>>(),
        "holders": e.holders.iter().enumerate().map(|(k, h)| json!({
            "keyword": n.kw(k),
            "advertisers": h.iter().map(|&i| n.adv(i).to_string()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

pub fn witnesses(n: &Names, ws: &[ObrevWitness]) -> Value {
    let ids = |v: &[usize]| v.iter().map(|&i| n.adv(i).to_string()).collect::<Vec<_>>();
    Value::Array(
        ws.iter()
            .map(|w| {
                json!({
                    "condition": w.condition.name(),
                    "advertiser": n.adv(w.adv),
                    "keyword": n.kw(w.kw),
                    "last_set": ids(&w.last_set),
                    "holders": ids(&w.holders),
                    "dark": w.dark,
                    "counted": ids(&w.counted),
                })
            })
            .collect(),
    )
}

fn entry(n: &Names, e: &Entry) -> Value {
    json!({
        "advertiser": n.adv(e.adv),
        "keyword": n.kw(e.kw),
        "start_query": e.start,
        "budget": q(&e.budget),
        "queries": e.cap,
    })
}

pub fn delta(n: &Names, d: &OutcomeDelta) -> Value {
    json!({
        "revenue": q(&d.revenue),
        "welfare": q(&d.welfare),
        "revenue_improving": d.revenue_improving,
        "payoff": d.payoff.iter().enumerate().map(|(a, p)| json!({"advertiser": n.adv(a), "delta": q(p)})).collect::<Vec<_>>(),
        "keywords": d.keyword_revenue.iter().zip(&d.keyword_welfare).enumerate().map(|(k, (r, e))| json!({
            "keyword": n.kw(k),
            "revenue": q(r),
            "welfare": q(e),
        })).collect::<Vec<_>>(),
    })
}

pub fn allocation(ext_inst: &Instance, r: &AllocationResult) -> Value {
    let n = Names::of(ext_inst);
    json!({
        "schedule": schedule(ext_inst, &r.schedule),
        "moves": r.moves.iter().map(|m| json!({"entry": entry(&n, &m.entry), "delta_revenue": q(&m.delta_revenue)})).collect::<Vec<_>>(),
        "before": {"revenue": q(&r.base_outcome.revenue), "welfare": q(&r.base_outcome.welfare)},
        "after": {"revenue": q(&r.outcome.revenue), "welfare": q(&r.outcome.welfare)},
        "delta_revenue": q(&r.delta_revenue),
        "delta_welfare": q(&r.delta_welfare),
    })
}

pub fn comparison_table(n: &Names, before: &DayOutcome, after: &DayOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>16} {:>16} {:>16} {:>16}", "keyword", "R before", "R after", "E before", "E after");
    for (b, a) in before.keywords.iter().zip(&after.keywords) {
        let _ = writeln!(
            s,
            "{:<12} {:>16} {:>16} {:>16} {:>16}",
            n.kw(b.kw),
            rational::decimal6(&b.revenue),
            rational::decimal6(&a.revenue),
            rational::decimal6(&b.welfare),
            rational::decimal6(&a.welfare)
        );
    }
    let _ = writeln!(
        s,
        "{:<12} {:>16} {:>16} {:>16} {:>16}",
        "total",
        rational::decimal6(&before.revenue),
        rational::decimal6(&after.revenue),
        rational::decimal6(&before.welfare),
        rational::decimal6(&after.welfare)
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn rationals_render_exact_and_decimal() {
        assert_eq!(q(&ratio(161, 2)), json!({"exact": "161/2", "decimal": "80.500000"}));
        assert_eq!(ext(&Ext::Infinite)["exact"], "inf");
    }

    #[test]
    fn keys_come_out_sorted() {
        let text = render(&envelope(&["x".into()], None, json!({"b": 1, "a": 2}), 0));
        let a = text.find("\"a\"").unwrap();
        let b = text.find("\"b\"").unwrap();
        assert!(a < b);
        assert!(text.find("\"command\"").unwrap() < text.find("\"exit_code\"").unwrap());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest("abc"), "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
