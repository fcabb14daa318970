//! Worked examples as instances, splits and schedules.
//!
//! Builders are the source of truth; the files under `fixtures/` at the
//! repository root are their output and are checked against them in tests.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{BudgetSplit, Instance, Schedule};
use crate::partition::PartitionTable;
use crate::rational::{self, from_u64, int, ratio, Rational};

fn instance(volumes: &[(&str, u64)], budgets: &[(&str, Rational)], edges: &[(&str, &str, &str, bool)]) -> Instance {
    let doc = json!({
        "slots": {"count": 2, "clickability": ["1", "7/10"]},
        "keywords": volumes.iter().map(|(id, v)| json!({"id": id, "volume": v})).collect::<Vec<_>>(),
        "advertisers": budgets.iter().map(|(id, b)| json!({"id": id, "budget": rational::fmt(b)})).collect::<Vec<_>>(),
        "edges": edges.iter().map(|(a, k, s, ext)| json!({
            "advertiser": a, "keyword": k, "score": s,
            "tag": if *ext { "extension" } else { "base" },
        })).collect::<Vec<_>>(),
    });
    Instance::from_json(&doc.to_string()).expect("fixture instance is valid")
}

fn split(inst: &Instance, rows: &[(&str, &str, u64, Rational)]) -> BudgetSplit {
    let doc = json!({"allocations": rows.iter().map(|(a, k, q, b)| json!({
        "advertiser": a, "keyword": k, "queries": q, "budget": rational::fmt(b),
    })).collect::<Vec<_>>()});
    BudgetSplit::from_json(inst, &doc.to_string()).expect("fixture split is valid")
}

fn schedule(inst: &Instance, rows: &[(&str, &str, u64, Rational, Option<u64>)]) -> Schedule {
    let doc = json!({"allocations": rows.iter().map(|(a, k, q0, b, cap)| {
        let mut e = json!({"advertiser": a, "keyword": k, "start_query": q0, "budget": rational::fmt(b)});
        if let Some(c) = cap {
            e["queries"] = json!(c);
        }
        e
    }).collect::<Vec<_>>()});
    Schedule::from_json(inst, &doc.to_string()).expect("fixture schedule is valid")
}

/// The two-keyword example with a cheap second bidder on `k1`.
///
/// `eps` is the share of `k1` advertiser 2 can pay for at the three-bidder price.
pub struct Fig1 {
    pub base: Instance,
    pub ext: Instance,
    pub base_split: BudgetSplit,
    /// Advertiser 3 also commits her excess on the new edge from query 1.
    pub adbm: BudgetSplit,
    /// Advertiser 3 enters the new edge at query `floor((1 - eps) V1) + 1`.
    pub acbm: Schedule,
    pub entry_query: u64,
}

pub fn fig1(v1: u64, v2: u64, eps: &Rational) -> Fig1 {
    let v1r = from_u64(v1);
    let v2r = from_u64(v2);
    let b1 = ratio(9, 10) * &v1r + ratio(14, 10) * eps * &v1r;
    let b2 = ratio(14, 10) * eps * &v1r;
    let b3 = ratio(6, 10) * &v2r + int(4);
    let b4 = int(10);
    let budgets = [("1", b1.clone()), ("2", b2.clone()), ("3", b3.clone()), ("4", b4.clone())];
    let kws = [("k1", v1), ("k2", v2)];
    let mut edges = vec![("1", "k1", "5", false), ("2", "k1", "3", false), ("3", "k2", "4", false), ("4", "k2", "2", false)];
    let base = instance(&kws, &budgets, &edges);
    edges.push(("3", "k1", "2", true));
    let ext = instance(&kws, &budgets, &edges);
    let spend3 = ratio(6, 10) * &v2r;
    let base_split = split(
        &base,
        &[("1", "k1", v1, b1.clone()), ("2", "k1", v1, b2.clone()), ("3", "k2", v2, b3.clone()), ("4", "k2", v2, b4.clone())],
    );
    let adbm = split(
        &ext,
        &[
            ("1", "k1", v1, b1.clone()),
            ("2", "k1", v1, b2.clone()),
            ("3", "k1", v1, &b3 - &spend3),
            ("3", "k2", v2, spend3.clone()),
            ("4", "k2", v2, b4.clone()),
        ],
    );
    let entry_query = ((Rational::from_integer(1.into()) - eps) * &v1r).floor().to_integer().try_into().unwrap_or(0u64) + 1;
    let acbm = schedule(
        &ext,
        &[
            ("1", "k1", 1, b1, Some(v1)),
            ("2", "k1", 1, b2, Some(v1)),
            ("3", "k1", entry_query, &b3 - &spend3, None),
            ("3", "k2", 1, spend3, Some(v2)),
            ("4", "k2", 1, b4, Some(v2)),
        ],
    );
    Fig1 { base, ext, base_split, adbm, acbm, entry_query }
}

/// Six advertisers on three keywords with two extension equilibria.
pub struct Fig5 {
    pub base: Instance,
    pub ext: Instance,
    pub fig6: BudgetSplit,
    pub fig7: BudgetSplit,
}

/// `v3` must be a multiple of 7 and `v2 >= 4 v3 / 7`.
pub fn fig5(v1: u64, v2: u64, v3: u64) -> Fig5 {
    assert!(v3 % 7 == 0 && 7 * v2 >= 4 * v3, "fig5 needs 7 | V3 and V2 >= 4 V3 / 7");
    let (r1, r2, r3) = (from_u64(v1), from_u64(v2), from_u64(v3));
    let b1 = ratio(23, 10) * &r1;
    let b2 = ratio(6, 10) * &r3;
    let b3 = ratio(225, 100) * &r2;
    let b5 = ratio(6, 10) * &r3;
    let (b4, b6) = (int(10), int(10));
    let budgets = [("1", b1.clone()), ("2", b2.clone()), ("3", b3.clone()), ("4", b4), ("5", b5.clone()), ("6", b6.clone())];
    let kws = [("k1", v1), ("k2", v2), ("k3", v3)];
    let mut edges = vec![
        ("1", "k1", "5", false),
        ("2", "k1", "3", false),
        ("3", "k2", "5", false),
        ("4", "k2", "1.5", false),
        ("5", "k3", "3", false),
        ("6", "k3", "2", false),
    ];
    let base = instance(&kws, &budgets, &edges);
    edges.extend([("2", "k3", "3.4", true), ("4", "k1", "2", true), ("5", "k2", "4", true)]);
    let ext = instance(&kws, &budgets, &edges);
    let shared = |mut rows: Vec<(&'static str, &'static str, u64, Rational)>| {
        rows.extend([
            ("1", "k1", v1, b1.clone()),
            ("3", "k2", v2, b3.clone()),
            ("4", "k1", v1, int(5)),
            ("4", "k2", v2, int(5)),
            ("6", "k3", v3, b6.clone()),
        ]);
        rows
    };
    let fig6 = split(&ext, &shared(vec![("2", "k3", v3, b2.clone()), ("5", "k2", 4 * v3 / 7, b5.clone())]));
    let fig7 = split(&ext, &shared(vec![("2", "k1", 3 * v3 / 7, b2), ("5", "k3", v3, b5)]));
    Fig5 { base, ext, fig6, fig7 }
}

/// Two advertisers per keyword; the new edge (3, k1) has score `s31`.
pub struct Fig8 {
    pub base: Instance,
    pub ext: Instance,
    pub base_split: BudgetSplit,
    pub ext_split: BudgetSplit,
}

/// `s31 = "4"` leaves the equilibrium in place; `s31 = "25"` moves it.
pub fn fig8(v1: u64, v2: u64, eps: &Rational, s31: &str) -> Fig8 {
    let (r1, r2) = (from_u64(v1), from_u64(v2));
    let b1 = ratio(21, 10) * &r1;
    let b2 = ratio(14, 10) * eps * &r1;
    let b3 = ratio(6, 10) * &r2;
    let b4 = int(10);
    let budgets = [("1", b1.clone()), ("2", b2.clone()), ("3", b3.clone()), ("4", b4.clone())];
    let kws = [("k1", v1), ("k2", v2)];
    let mut edges = vec![("1", "k1", "5", false), ("2", "k1", "3", false), ("3", "k2", "4", false), ("4", "k2", "2", false)];
    let base = instance(&kws, &budgets, &edges);
    edges.push(("3", "k1", s31, true));
    let ext = instance(&kws, &budgets, &edges);
    let base_rows = [("1", "k1", v1, b1.clone()), ("2", "k1", v1, b2.clone()), ("3", "k2", v2, b3.clone()), ("4", "k2", v2, b4.clone())];
    let base_split = split(&base, &base_rows);
    let ext_split = if s31 == "25" {
        assert!(v2 % 6 == 0, "fig9 needs 6 | V2");
        split(&ext, &[("1", "k1", v1, b1), ("2", "k1", v1, b2), ("3", "k1", v2 / 6, b3), ("4", "k2", v2, b4)])
    } else {
        split(&ext, &base_rows)
    };
    Fig8 { base, ext, base_split, ext_split }
}

pub struct Fig10 {
    pub base: Instance,
    pub ext: Instance,
    pub natural: BudgetSplit,
    /// Advertiser 3 spends her excess of 10 on `k1` from query 1, 51 and 4.
    pub case_a: Schedule,
    pub case_b: Schedule,
    pub case_c: Schedule,
}

pub fn fig10() -> Fig10 {
    let budgets = [("1", int(45)), ("2", int(37)), ("3", int(40)), ("4", int(20))];
    let kws = [("k1", 100), ("k2", 100)];
    let mut edges = vec![("1", "k1", "5", false), ("2", "k1", "3", false), ("3", "k2", "1.5", false), ("4", "k2", "1", false)];
    let base = instance(&kws, &budgets, &edges);
    edges.push(("3", "k1", "2", true));
    let ext = instance(&kws, &budgets, &edges);
    let natural = split(&base, &[("1", "k1", 50, int(45)), ("2", "k1", 100, int(37)), ("3", "k2", 100, int(40)), ("4", "k2", 100, int(20))]);
    let case = |start: u64| {
        schedule(
            &ext,
            &[
                ("1", "k1", 1, int(45), Some(50)),
                ("2", "k1", 1, int(37), Some(100)),
                ("3", "k1", start, int(10), None),
                ("3", "k2", 1, int(30), Some(100)),
                ("4", "k2", 1, int(20), Some(100)),
            ],
        )
    };
    let (case_a, case_b, case_c) = (case(1), case(51), case(4));
    Fig10 { base, ext, natural, case_a, case_b, case_c }
}

/// Partition tables of a single advertiser, given directly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableFixture {
    pub advertiser: String,
    pub budget: Rational,
    pub keywords: Vec<String>,
    pub tables: Vec<PartitionTable>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDoc {
    queries: u64,
    cost: String,
    payoff: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    keyword: String,
    segments: Vec<SegmentDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFixtureDoc {
    advertiser: String,
    budget: String,
    tables: Vec<TableDoc>,
}

fn num(text: &str, path: String) -> Result<Rational> {
    rational::parse(text).map_err(|m| Error::schema(path, m))
}

impl TableFixture {
    pub fn from_json(text: &str) -> Result<TableFixture> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: TableFixtureDoc =
            serde_path_to_error::deserialize(de).map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))?;
        let budget = num(&doc.budget, "budget".into())?;
        let mut keywords = Vec::new();
        let mut tables = Vec::new();
        for (k, t) in doc.tables.iter().enumerate() {
            if keywords.contains(&t.keyword) {
                return Err(Error::schema(format!("tables[{k}].keyword"), "duplicate keyword"));
            }
            let mut lens = Vec::new();
            let mut cost = Vec::new();
            let mut payoff = Vec::new();
            for (s, seg) in t.segments.iter().enumerate() {
                lens.push(seg.queries);
                cost.push(num(&seg.cost, format!("tables[{k}].segments[{s}].cost"))?);
                payoff.push(num(&seg.payoff, format!("tables[{k}].segments[{s}].payoff"))?);
            }
            let table = PartitionTable::from_segments(k, 0, &lens, cost, payoff)
                .map_err(|e| Error::schema(format!("tables[{k}]"), e.to_string()))?;
            keywords.push(t.keyword.clone());
            tables.push(table);
        }
        Ok(TableFixture { advertiser: doc.advertiser, budget, keywords, tables })
    }

    pub fn to_json(&self) -> String {
        let doc = json!({
            "advertiser": self.advertiser,
            "budget": rational::fmt(&self.budget),
            "tables": self.tables.iter().zip(&self.keywords).map(|(t, k)| json!({
                "keyword": k,
                "segments": (0..t.len()).map(|s| json!({
                    "queries": t.z[s + 1] - t.z[s],
                    "cost": rational::fmt(&t.cost[s]),
                    "payoff": rational::fmt(&t.payoff[s]),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        pretty(&doc)
    }

    /// Reads a split over this fixture's keywords as `(queries, budgets)` in table order.
    pub fn read_split(&self, text: &str) -> Result<(Vec<u64>, Vec<Rational>)> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Row {
            advertiser: String,
            keyword: String,
            queries: u64,
            budget: String,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            allocations: Vec<Row>,
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Doc =
            serde_path_to_error::deserialize(de).map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))?;
        let mut queries = vec![0; self.tables.len()];
        let mut budgets = vec![Rational::from_integer(0.into()); self.tables.len()];
        for (r, row) in doc.allocations.iter().enumerate() {
            if row.advertiser != self.advertiser {
                return Err(Error::schema(format!("allocations[{r}].advertiser"), "unknown advertiser"));
            }
            let k = self
                .keywords
                .iter()
                .position(|k| k == &row.keyword)
                .ok_or_else(|| Error::schema(format!("allocations[{r}].keyword"), "unknown keyword"))?;
            if row.queries > self.tables[k].volume() {
                return Err(Error::schema(format!("allocations[{r}].queries"), "queries exceed keyword volume"));
            }
            queries[k] = row.queries;
            budgets[k] = num(&row.budget, format!("allocations[{r}].budget"))?;
        }
        Ok((queries, budgets))
    }
}

fn table_fixture(budget: Rational, tables: &[(&str, &[(u64, Rational, Rational)])]) -> TableFixture {
    let mut keywords = Vec::new();
    let mut out = Vec::new();
    for (k, (id, segs)) in tables.iter().enumerate() {
        let lens: Vec<u64> = segs.iter().map(|s| s.0).collect();
        let t = PartitionTable::from_segments(k, 0, &lens, segs.iter().map(|s| s.1.clone()).collect(), segs.iter().map(|s| s.2.clone()).collect())
            .expect("fixture table is valid");
        keywords.push(id.to_string());
        out.push(t);
    }
    TableFixture { advertiser: "i".into(), budget, keywords, tables: out }
}

/// Bang-per-buck rises on the second keyword, defeating the greedy.
pub fn fig3(v1: u64, v2: u64) -> TableFixture {
    assert!(v2 >= 2 * v1 - 1, "fig3 needs V2 >= 2 V1 - 2 and a second segment");
    table_fixture(
        int(2 * v1 as i64 - 2),
        &[
            ("k1", &[(v1, int(2), int(4))]),
            ("k2", &[(v1 + 1, int(1), ratio(3, 2)), (v2 - v1 - 1, int(1), int(3))]),
        ],
    )
}

pub fn fig4() -> TableFixture {
    table_fixture(
        int(12),
        &[
            ("k1", &[(20, ratio(8, 10), ratio(336, 100))]),
            ("k2", &[(10, ratio(4, 10), int(2)), (20, ratio(8, 10), ratio(32, 10))]),
        ],
    )
}

/// The fractional-knapsack pick on the fourth example: everything on `k2`.
pub fn fig4_all_k2() -> String {
    pretty(&json!({"allocations": [{"advertiser": "i", "keyword": "k2", "queries": 20, "budget": "12"}]}))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Parameters the bundled files are built with.
pub const FIG1_V1: u64 = 1000;
pub const FIG1_V2: u64 = 500;
pub const FIG5_SMALL: (u64, u64, u64) = (14, 14, 14);
pub const FIG5_DILEMMA: (u64, u64, u64) = (3500, 700, 700);
pub const FIG8_V: u64 = 600;

pub fn fig1_eps() -> Rational {
    ratio(1, 31)
}

pub fn fig8_eps() -> Rational {
    ratio(1, 10)
}

/// Every bundled file by name, rendered from the builders.
pub fn bundle() -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    let f1 = fig1(FIG1_V1, FIG1_V2, &fig1_eps());
    m.insert("FIG1-base.json", f1.base.to_json());
    m.insert("FIG1-ext.json", f1.ext.to_json());
    m.insert("FIG1-base.split.json", f1.base_split.to_json(&f1.base));
    m.insert("FIG1-adbm.split.json", f1.adbm.to_json(&f1.ext));
    m.insert("FIG1-acbm.schedule.json", f1.acbm.to_json(&f1.ext));
    m.insert("FIG3.tables.json", fig3(10, 30).to_json());
    m.insert("FIG4.tables.json", fig4().to_json());
    m.insert("FIG4-all-k2.split.json", fig4_all_k2());
    let (a, b, c) = FIG5_SMALL;
    let f5 = fig5(a, b, c);
    m.insert("FIG5-base.json", f5.base.to_json());
    m.insert("FIG5-ext.json", f5.ext.to_json());
    m.insert("FIG6.split.json", f5.fig6.to_json(&f5.ext));
    m.insert("FIG7.split.json", f5.fig7.to_json(&f5.ext));
    let (a, b, c) = FIG5_DILEMMA;
    let f5 = fig5(a, b, c);
    m.insert("FIG5-base-3500.json", f5.base.to_json());
    m.insert("FIG5-ext-3500.json", f5.ext.to_json());
    m.insert("FIG6-3500.split.json", f5.fig6.to_json(&f5.ext));
    m.insert("FIG7-3500.split.json", f5.fig7.to_json(&f5.ext));
    let f8 = fig8(FIG8_V, FIG8_V, &fig8_eps(), "4");
    m.insert("FIG8-base.json", f8.base.to_json());
    m.insert("FIG8-base.split.json", f8.base_split.to_json(&f8.base));
    m.insert("FIG8-ext.json", f8.ext.to_json());
    m.insert("FIG8.split.json", f8.ext_split.to_json(&f8.ext));
    let f9 = fig8(FIG8_V, FIG8_V, &fig8_eps(), "25");
    m.insert("FIG9-ext.json", f9.ext.to_json());
    m.insert("FIG9.split.json", f9.ext_split.to_json(&f9.ext));
    let f10 = fig10();
    m.insert("FIG10-base.json", f10.base.to_json());
    m.insert("FIG10-ext.json", f10.ext.to_json());
    m.insert("FIG10-natural.split.json", f10.natural.to_json(&f10.base));
    m.insert("FIG10-case-a.schedule.json", f10.case_a.to_json(&f10.ext));
    m.insert("FIG10-case-b.schedule.json", f10.case_b.to_json(&f10.ext));
    m.insert("FIG10-case-c.schedule.json", f10.case_c.to_json(&f10.ext));
    m
}
