//! Broad match graphs, budget splits and entry schedules.
//!
//! Advertisers and keywords are kept sorted by id (numeric ids compare
//! numerically), so an index doubles as the tie-break rank everywhere else.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotParams {
    pub gamma: Vec<Rational>,
}

impl SlotParams {
    pub fn new(gamma: Vec<Rational>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::schema("slots.count", "at least one slot is required"));
        }
        for (k, g) in gamma.iter().enumerate() {
            if !g.is_positive() {
                return Err(Error::schema(format!("slots.clickability[{k}]"), "clickability must be positive"));
            }
        }
        for k in 1..gamma.len() {
            if gamma[k] >= gamma[k - 1] {
                return Err(Error::schema(
                    format!("slots.clickability[{k}]"),
                    "clickability not strictly decreasing",
                ));
            }
        }
        Ok(SlotParams { gamma })
    }

    pub fn count(&self) -> usize {
        self.gamma.len()
    }

    /// Clickability of 1-based slot `k`; zero beyond the last slot.
    pub fn gamma(&self, k: usize) -> Rational {
        if k >= 1 && k <= self.gamma.len() {
            self.gamma[k - 1].clone()
        } else {
            Rational::zero()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Base,
    Extension,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Advertiser {
    pub id: String,
    pub budget: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Keyword {
    pub id: String,
    pub volume: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub adv: usize,
    pub kw: usize,
    pub score: Rational,
    pub tag: Tag,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub slots: SlotParams,
    pub advertisers: Vec<Advertiser>,
    pub keywords: Vec<Keyword>,
    /// Sorted by (advertiser, keyword).
    pub edges: Vec<Edge>,
}

/// Numeric ids sort numerically and before non-numeric ones.
pub fn id_cmp(a: &str, b: &str) -> Ordering {
    let na = a.parse::<u128>().ok();
    let nb = b.parse::<u128>().ok();
    match (na, nb) {
        (Some(x), Some(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotsDoc {
    count: usize,
    clickability: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeywordDoc {
    id: String,
    volume: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvertiserDoc {
    id: String,
    budget: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    advertiser: String,
    keyword: String,
    score: String,
    #[serde(default = "default_tag")]
    tag: Tag,
}

fn default_tag() -> Tag {
    Tag::Base
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    slots: SlotsDoc,
    keywords: Vec<KeywordDoc>,
    advertisers: Vec<AdvertiserDoc>,
    edges: Vec<EdgeDoc>,
}

fn parse_doc<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let path = if path == "." { "$".to_string() } else { path };
        Error::schema(path, inner.to_string())
    })
}

fn num(text: &str, path: String) -> Result<Rational> {
    rational::parse(text).map_err(|m| Error::schema(path, m))
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Instance> {
        let doc: InstanceDoc = parse_doc(text)?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: InstanceDoc) -> Result<Instance> {
        if doc.slots.count != doc.slots.clickability.len() {
            return Err(Error::schema("slots.count", "count does not match clickability length"));
        }
        let gamma = doc
            .slots
            .clickability
            .iter()
            .enumerate()
            .map(|(k, g)| num(g, format!("slots.clickability[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let slots = SlotParams::new(gamma)?;

        let mut keywords = Vec::new();
        let mut seen = BTreeSet::new();
        for (k, kd) in doc.keywords.iter().enumerate() {
            if !seen.insert(kd.id.clone()) {
                return Err(Error::schema(format!("keywords[{k}].id"), format!("duplicate keyword id {:?}", kd.id)));
            }
            if kd.volume < 1 {
                return Err(Error::schema(format!("keywords[{k}].volume"), "volume must be a positive integer"));
            }
            keywords.push(Keyword { id: kd.id.clone(), volume: kd.volume });
        }
        let mut advertisers = Vec::new();
        let mut seen = BTreeSet::new();
        for (k, ad) in doc.advertisers.iter().enumerate() {
            if !seen.insert(ad.id.clone()) {
                return Err(Error::schema(format!("advertisers[{k}].id"), format!("duplicate advertiser id {:?}", ad.id)));
            }
            let budget = num(&ad.budget, format!("advertisers[{k}].budget"))?;
            if budget.is_negative() {
                return Err(Error::schema(format!("advertisers[{k}].budget"), "budget must be nonnegative"));
            }
            advertisers.push(Advertiser { id: ad.id.clone(), budget });
        }
        keywords.sort_by(|a, b| id_cmp(&a.id, &b.id));
        advertisers.sort_by(|a, b| id_cmp(&a.id, &b.id));
        let kw_index: HashMap<&str, usize> = keywords.iter().enumerate().map(|(i, k)| (k.id.as_str(), i)).collect();
        let adv_index: HashMap<&str, usize> =
            advertisers.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();

        let mut edges = Vec::new();
        let mut pairs = BTreeSet::new();
        for (k, ed) in doc.edges.iter().enumerate() {
            let adv = *adv_index
                .get(ed.advertiser.as_str())
                .ok_or_else(|| Error::schema(format!("edges[{k}].advertiser"), format!("unknown advertiser {:?}", ed.advertiser)))?;
            let kw = *kw_index
                .get(ed.keyword.as_str())
                .ok_or_else(|| Error::schema(format!("edges[{k}].keyword"), format!("unknown keyword {:?}", ed.keyword)))?;
            let score = num(&ed.score, format!("edges[{k}].score"))?;
            if !score.is_positive() {
                return Err(Error::schema(format!("edges[{k}].score"), "score must be positive"));
            }
            if !pairs.insert((adv, kw)) {
                return Err(Error::schema(
                    format!("edges[{k}]"),
                    format!("duplicate edge ({}, {})", ed.advertiser, ed.keyword),
                ));
            }
            edges.push(Edge { adv, kw, score, tag: ed.tag });
        }
        edges.sort_by_key(|e| (e.adv, e.kw));
        Ok(Instance { slots, advertisers, keywords, edges })
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            slots: SlotsDoc { count: self.slots.count(), clickability: self.slots.gamma.iter().map(rational::fmt).collect() },
            keywords: self.keywords.iter().map(|k| KeywordDoc { id: k.id.clone(), volume: k.volume }).collect(),
            advertisers: self
                .advertisers
                .iter()
                .map(|a| AdvertiserDoc { id: a.id.clone(), budget: rational::fmt(&a.budget) })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    advertiser: self.advertisers[e.adv].id.clone(),
                    keyword: self.keywords[e.kw].id.clone(),
                    score: rational::fmt(&e.score),
                    tag: e.tag,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn n(&self) -> usize {
        self.advertisers.len()
    }

    pub fn m(&self) -> usize {
        self.keywords.len()
    }

    pub fn edge(&self, adv: usize, kw: usize) -> Option<&Edge> {
        self.edges
            .binary_search_by_key(&(adv, kw), |e| (e.adv, e.kw))
            .ok()
            .map(|k| &self.edges[k])
    }

    pub fn score(&self, adv: usize, kw: usize) -> Option<&Rational> {
        self.edge(adv, kw).map(|e| &e.score)
    }

    /// Keywords incident to `adv`, ascending.
    pub fn keywords_of(&self, adv: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.adv == adv).map(|e| e.kw).collect()
    }

    /// Advertisers incident to `kw`, ascending.
    pub fn advertisers_of(&self, kw: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.kw == kw).map(|e| e.adv).collect()
    }

    pub fn adv_index(&self, id: &str) -> Option<usize> {
        self.advertisers.iter().position(|a| a.id == id)
    }

    pub fn kw_index(&self, id: &str) -> Option<usize> {
        self.keywords.iter().position(|k| k.id == id)
    }

    /// The graph restricted to edges tagged `base`.
    pub fn base(&self) -> Instance {
        let mut g = self.clone();
        g.edges.retain(|e| e.tag == Tag::Base);
        g
    }

    pub fn has_extension_edges(&self) -> bool {
        self.edges.iter().any(|e| e.tag == Tag::Extension)
    }

    /// Same instance with every keyword volume multiplied by `factor`.
    pub fn scale_volumes(&self, factor: u64) -> Instance {
        let mut g = self.clone();
        for k in &mut g.keywords {
            k.volume *= factor;
        }
        g
    }

    /// Largest score among `adv`'s edges, if any.
    pub fn max_score(&self, adv: usize) -> Option<Rational> {
        self.edges.iter().filter(|e| e.adv == adv).map(|e| e.score.clone()).max()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionReport {
    pub new_edges: Vec<(String, String)>,
}

/// Confirms that `ext` keeps everything of `base` and only adds edges.
pub fn check_extension(base: &Instance, ext: &Instance) -> Result<ExtensionReport> {
    if base.slots != ext.slots {
        return Err(Error::NotExtension("slot parameters differ".into()));
    }
    if base.advertisers.len() != ext.advertisers.len() {
        return Err(Error::NotExtension("advertiser count differs".into()));
    }
    for (a, b) in base.advertisers.iter().zip(&ext.advertisers) {
        if a.id != b.id {
            return Err(Error::NotExtension(format!("advertiser set differs at {:?}", a.id)));
        }
        if a.budget != b.budget {
            return Err(Error::NotExtension(format!("budget changed for advertiser {}", a.id)));
        }
    }
    if base.keywords.len() != ext.keywords.len() {
        return Err(Error::NotExtension("keyword count differs".into()));
    }
    for (a, b) in base.keywords.iter().zip(&ext.keywords) {
        if a.id != b.id {
            return Err(Error::NotExtension(format!("keyword set differs at {:?}", a.id)));
        }
        if a.volume != b.volume {
            return Err(Error::NotExtension(format!("volume changed for keyword {}", a.id)));
        }
    }
    for e in &base.edges {
        match ext.edge(e.adv, e.kw) {
            None => {
                return Err(Error::NotExtension(format!(
                    "edge ({}, {}) missing from extension",
                    base.advertisers[e.adv].id, base.keywords[e.kw].id
                )))
            }
            Some(f) if f.score != e.score => {
                return Err(Error::NotExtension(format!(
                    "score changed on shared edge ({}, {})",
                    base.advertisers[e.adv].id, base.keywords[e.kw].id
                )))
            }
            Some(_) => {}
        }
    }
    let new_edges = ext
        .edges
        .iter()
        .filter(|e| base.edge(e.adv, e.kw).is_none())
        .map(|e| (ext.advertisers[e.adv].id.clone(), ext.keywords[e.kw].id.clone()))
        .collect();
    Ok(ExtensionReport { new_edges })
}

/// One row of a budget split: `queries` queries bought with `budget` committed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation {
    pub adv: usize,
    pub kw: usize,
    pub queries: u64,
    pub budget: Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BudgetSplit {
    /// Sorted by (advertiser, keyword), at most one row per pair.
    pub allocations: Vec<Allocation>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationDoc {
    advertiser: String,
    keyword: String,
    queries: u64,
    budget: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitDoc {
    allocations: Vec<AllocationDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    advertiser: String,
    keyword: String,
    start_query: u64,
    budget: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    queries: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    allocations: Vec<EntryDoc>,
}

fn lookup_pair(inst: &Instance, a: &str, k: &str, path: &str) -> Result<(usize, usize)> {
    let adv = inst
        .adv_index(a)
        .ok_or_else(|| Error::schema(format!("{path}.advertiser"), format!("unknown advertiser {a:?}")))?;
    let kw = inst
        .kw_index(k)
        .ok_or_else(|| Error::schema(format!("{path}.keyword"), format!("unknown keyword {k:?}")))?;
    if inst.edge(adv, kw).is_none() {
        return Err(Error::schema(path.to_string(), format!("no edge ({a}, {k}) in the instance")));
    }
    Ok((adv, kw))
}

fn check_budget_totals<'a>(inst: &Instance, rows: impl Iterator<Item = (usize, &'a Rational)>) -> Result<()> {
    let mut totals: BTreeMap<usize, Rational> = BTreeMap::new();
    for (adv, b) in rows {
        *totals.entry(adv).or_insert_with(Rational::zero) += b;
    }
    for (adv, total) in totals {
        if total > inst.advertisers[adv].budget {
            return Err(Error::Infeasible(format!(
                "advertiser {} commits {} but has budget {}",
                inst.advertisers[adv].id,
                rational::fmt(&total),
                rational::fmt(&inst.advertisers[adv].budget)
            )));
        }
    }
    Ok(())
}

impl BudgetSplit {
    pub fn new(mut allocations: Vec<Allocation>) -> BudgetSplit {
        allocations.sort_by_key(|a| (a.adv, a.kw));
        BudgetSplit { allocations }
    }

    pub fn from_json(inst: &Instance, text: &str) -> Result<BudgetSplit> {
        let doc: SplitDoc = parse_doc(text)?;
        let mut rows = Vec::new();
        let mut seen = BTreeSet::new();
        for (k, a) in doc.allocations.iter().enumerate() {
            let path = format!("allocations[{k}]");
            let (adv, kw) = lookup_pair(inst, &a.advertiser, &a.keyword, &path)?;
            if !seen.insert((adv, kw)) {
                return Err(Error::schema(path, "duplicate allocation for this edge"));
            }
            if a.queries > inst.keywords[kw].volume {
                return Err(Error::schema(format!("{path}.queries"), "queries exceed keyword volume"));
            }
            let budget = num(&a.budget, format!("{path}.budget"))?;
            if budget.is_negative() {
                return Err(Error::schema(format!("{path}.budget"), "budget must be nonnegative"));
            }
            rows.push(Allocation { adv, kw, queries: a.queries, budget });
        }
        check_budget_totals(inst, rows.iter().map(|r| (r.adv, &r.budget)))?;
        Ok(BudgetSplit::new(rows))
    }

    pub fn to_json(&self, inst: &Instance) -> String {
        let doc = SplitDoc {
            allocations: self
                .allocations
                .iter()
                .map(|a| AllocationDoc {
                    advertiser: inst.advertisers[a.adv].id.clone(),
                    keyword: inst.keywords[a.kw].id.clone(),
                    queries: a.queries,
                    budget: rational::fmt(&a.budget),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn get(&self, adv: usize, kw: usize) -> Option<&Allocation> {
        self.allocations
            .binary_search_by_key(&(adv, kw), |a| (a.adv, a.kw))
            .ok()
            .map(|k| &self.allocations[k])
    }

    pub fn queries(&self, adv: usize, kw: usize) -> u64 {
        self.get(adv, kw).map_or(0, |a| a.queries)
    }

    pub fn budget(&self, adv: usize, kw: usize) -> Rational {
        self.get(adv, kw).map_or_else(Rational::zero, |a| a.budget.clone())
    }

    pub fn row(&self, adv: usize) -> Vec<Allocation> {
        self.allocations.iter().filter(|a| a.adv == adv).cloned().collect()
    }

    /// Replaces every row of `adv` with `rows`.
    pub fn set_row(&mut self, adv: usize, rows: Vec<Allocation>) {
        self.allocations.retain(|a| a.adv != adv);
        self.allocations.extend(rows.into_iter().filter(|r| r.adv == adv));
        self.allocations.sort_by_key(|a| (a.adv, a.kw));
    }

    /// Rows of everyone except `adv`, as entries starting at the first query.
    pub fn others_entries(&self, adv: usize, kw: usize) -> Vec<Entry> {
        self.allocations
            .iter()
            .filter(|a| a.adv != adv && a.kw == kw)
            .map(Entry::from_allocation)
            .collect()
    }

    /// Lifts the split to a schedule in which every row starts at query 1.
    pub fn to_schedule(&self) -> Schedule {
        Schedule::new(self.allocations.iter().map(Entry::from_allocation).collect())
    }
}

/// A participation commitment on one keyword.
///
/// The advertiser joins at `start` (1-based) and stays while she can afford
/// the current price out of `budget`, for at most `cap` queries when set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Entry {
    pub adv: usize,
    pub kw: usize,
    pub start: u64,
    pub budget: Rational,
    pub cap: Option<u64>,
}

impl Entry {
    pub fn from_allocation(a: &Allocation) -> Entry {
        Entry { adv: a.adv, kw: a.kw, start: 1, budget: a.budget.clone(), cap: Some(a.queries) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schedule {
    /// Sorted by (advertiser, keyword).
    pub entries: Vec<Entry>,
}

impl Schedule {
    pub fn new(mut entries: Vec<Entry>) -> Schedule {
        entries.sort_by_key(|e| (e.adv, e.kw));
        Schedule { entries }
    }

    pub fn from_json(inst: &Instance, text: &str) -> Result<Schedule> {
        let doc: ScheduleDoc = parse_doc(text)?;
        let mut rows = Vec::new();
        let mut seen = BTreeSet::new();
        for (k, e) in doc.allocations.iter().enumerate() {
            let path = format!("allocations[{k}]");
            let (adv, kw) = lookup_pair(inst, &e.advertiser, &e.keyword, &path)?;
            if !seen.insert((adv, kw)) {
                return Err(Error::schema(path, "duplicate entry for this edge"));
            }
            let volume = inst.keywords[kw].volume;
            if e.start_query < 1 || e.start_query > volume {
                return Err(Error::schema(format!("{path}.start_query"), "start_query must lie in 1..=volume"));
            }
            if let Some(q) = e.queries {
                if q > volume {
                    return Err(Error::schema(format!("{path}.queries"), "queries exceed keyword volume"));
                }
            }
            let budget = num(&e.budget, format!("{path}.budget"))?;
            if budget.is_negative() {
                return Err(Error::schema(format!("{path}.budget"), "budget must be nonnegative"));
            }
            rows.push(Entry { adv, kw, start: e.start_query, budget, cap: e.queries });
        }
        check_budget_totals(inst, rows.iter().map(|r| (r.adv, &r.budget)))?;
        Ok(Schedule::new(rows))
    }

    pub fn to_json(&self, inst: &Instance) -> String {
        let doc = ScheduleDoc {
            allocations: self
                .entries
                .iter()
                .map(|e| EntryDoc {
                    advertiser: inst.advertisers[e.adv].id.clone(),
                    keyword: inst.keywords[e.kw].id.clone(),
                    start_query: e.start,
                    budget: rational::fmt(&e.budget),
                    queries: e.cap,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn for_keyword(&self, kw: usize) -> Vec<Entry> {
        self.entries.iter().filter(|e| e.kw == kw).cloned().collect()
    }

    pub fn get(&self, adv: usize, kw: usize) -> Option<&Entry> {
        self.entries.iter().find(|e| e.adv == adv && e.kw == kw)
    }

    pub fn upsert(&mut self, entry: Entry) {
        self.entries.retain(|e| !(e.adv == entry.adv && e.kw == entry.kw));
        self.entries.push(entry);
        self.entries.sort_by_key(|e| (e.adv, e.kw));
    }
}

/// Reads either a split (no `start_query`) or a schedule document.
pub fn load_plan(inst: &Instance, text: &str) -> Result<Schedule> {
    let probe: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
    let has_start = probe
        .get("allocations")
        .and_then(|a| a.as_array())
        .map(|rows| rows.iter().any(|r| r.get("start_query").is_some()))
        .unwrap_or(false);
    if has_start {
        Schedule::from_json(inst, text)
    } else {
        Ok(BudgetSplit::from_json(inst, text)?.to_schedule())
    }
}

/// "All-in" split: each advertiser commits her whole budget to her
/// highest-score edge (lowest keyword index on ties), without a query cap.
pub fn all_in_schedule(inst: &Instance) -> Schedule {
    let mut entries = Vec::new();
    for adv in 0..inst.n() {
        let best = inst
            .edges
            .iter()
            .filter(|e| e.adv == adv)
            .fold(None::<&Edge>, |acc, e| match acc {
                Some(b) if b.score >= e.score => Some(b),
                _ => Some(e),
            });
        if let Some(e) = best {
            entries.push(Entry { adv, kw: e.kw, start: 1, budget: inst.advertisers[adv].budget.clone(), cap: None });
        }
    }
    Schedule::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    const MINIMAL: &str = r#"{"slots":{"count":1,"clickability":["1"]},
        "keywords":[{"id":"k","volume":3}],
        "advertisers":[{"id":"a","budget":"2"}],
        "edges":[{"advertiser":"a","keyword":"k","score":"1.5","tag":"base"}]}"#;

    #[test]
    fn minimal_instance_loads() {
        let g = Instance::from_json(MINIMAL).unwrap();
        assert_eq!((g.n(), g.m()), (1, 1));
        assert_eq!(g.score(0, 0), Some(&ratio(3, 2)));
    }

    #[test]
    fn increasing_clickability_is_rejected() {
        let text = MINIMAL.replace(r#""count":1,"clickability":["1"]"#, r#""count":2,"clickability":["0.7","1"]"#);
        let err = Instance::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("clickability not strictly decreasing"), "{err}");
        assert!(err.to_string().contains("slots.clickability[1]"), "{err}");
    }

    #[test]
    fn schema_errors_name_the_path() {
        let text = MINIMAL.replace(r#""volume":3"#, r#""volume":"x""#);
        let err = Instance::from_json(&text).unwrap_err();
        assert!(matches!(&err, Error::Schema { path, .. } if path.contains("keywords[0].volume")), "{err}");
        let text = MINIMAL.replace(r#""score":"1.5""#, r#""score":"0""#);
        assert!(Instance::from_json(&text).unwrap_err().to_string().contains("edges[0].score"));
    }

    #[test]
    fn duplicate_edges_are_rejected() {
        let text = MINIMAL.replace(
            r#""edges":[{"advertiser":"a","keyword":"k","score":"1.5","tag":"base"}]"#,
            r#""edges":[{"advertiser":"a","keyword":"k","score":"1.5"},{"advertiser":"a","keyword":"k","score":"2"}]"#,
        );
        assert!(Instance::from_json(&text).unwrap_err().to_string().contains("duplicate edge"));
    }

    #[test]
    fn numeric_ids_sort_numerically() {
        let mut ids = vec!["10", "2", "b", "1"];
        ids.sort_by(|a, b| id_cmp(a, b));
        assert_eq!(ids, vec!["1", "2", "10", "b"]);
    }

    #[test]
    fn round_trip_is_identity_on_canonical_text() {
        let g = Instance::from_json(MINIMAL).unwrap();
        let text = g.to_json();
        let h = Instance::from_json(&text).unwrap();
        assert_eq!(g, h);
        assert_eq!(text, h.to_json());
    }

    #[test]
    fn over_committed_split_is_infeasible() {
        let g = Instance::from_json(MINIMAL).unwrap();
        let s = r#"{"allocations":[{"advertiser":"a","keyword":"k","queries":1,"budget":"3"}]}"#;
        assert!(matches!(BudgetSplit::from_json(&g, s), Err(Error::Infeasible(_))));
        let s = r#"{"allocations":[{"advertiser":"a","keyword":"k","queries":1,"budget":"2"}]}"#;
        let split = BudgetSplit::from_json(&g, s).unwrap();
        assert_eq!(split.budget(0, 0), int(2));
        assert_eq!(BudgetSplit::from_json(&g, &split.to_json(&g)).unwrap(), split);
    }

    #[test]
    fn plan_loader_distinguishes_schedules() {
        let g = Instance::from_json(MINIMAL).unwrap();
        let s = r#"{"allocations":[{"advertiser":"a","keyword":"k","start_query":2,"budget":"1"}]}"#;
        let plan = load_plan(&g, s).unwrap();
        assert_eq!(plan.entries[0].start, 2);
        assert_eq!(plan.entries[0].cap, None);
        let bad = r#"{"allocations":[{"advertiser":"a","keyword":"k","start_query":9,"budget":"1"}]}"#;
        assert!(load_plan(&g, bad).is_err());
    }
}
