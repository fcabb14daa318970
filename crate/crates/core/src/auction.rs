//! Minimum-SNE GSP pricing of a single query.

use num_traits::Zero;

use crate::model::SlotParams;
use crate::rational::{int, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bidder {
    pub adv: usize,
    pub score: Rational,
}

/// Priced outcome of one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slate {
    /// Descending score, ties by ascending advertiser index.
    pub ranking: Vec<Bidder>,
    /// Per-impression price of each occupied slot.
    pub prices: Vec<Rational>,
    /// Cost per impression for every ranked bidder (zero when unslotted).
    pub cost: Vec<Rational>,
    /// Payoff per impression for every ranked bidder (zero when unslotted).
    pub payoff: Vec<Rational>,
    pub revenue: Rational,
    pub welfare: Rational,
}

impl Slate {
    pub fn empty() -> Slate {
        Slate {
            ranking: Vec::new(),
            prices: Vec::new(),
            cost: Vec::new(),
            payoff: Vec::new(),
            revenue: Rational::zero(),
            welfare: Rational::zero(),
        }
    }

    pub fn rank_of(&self, adv: usize) -> Option<usize> {
        self.ranking.iter().position(|b| b.adv == adv)
    }

    /// `(cost, payoff)` per impression for `adv`, if she takes part.
    pub fn terms(&self, adv: usize) -> Option<(&Rational, &Rational)> {
        self.rank_of(adv).map(|r| (&self.cost[r], &self.payoff[r]))
    }

    pub fn members(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.ranking.iter().map(|b| b.adv).collect();
        v.sort_unstable();
        v
    }
}

pub fn rank(active: &[Bidder]) -> Vec<Bidder> {
    let mut ranking = active.to_vec();
    ranking.sort_by(|a, b| b.score.cmp(&a.score).then(a.adv.cmp(&b.adv)));
    ranking
}

/// Prices one query for `active` at the minimum SNE.
///
/// The occupant of slot `i` pays `sum_{j=i..K} (g_j - g_{j+1}) * s_{j+1}`, where
/// `s_{L+1}` is `reserve` and scores past that are zero.
pub fn price_query(active: &[Bidder], slots: &SlotParams, reserve: &Rational) -> Slate {
    let ranking = rank(active);
    let l = ranking.len();
    let k = slots.count();
    let occupied = k.min(l);
    let score_at = |r: usize| -> Rational {
        // 1-based rank
        if r <= l {
            ranking[r - 1].score.clone()
        } else if r == l + 1 {
            reserve.clone()
        } else {
            Rational::zero()
        }
    };
    let mut prices = vec![Rational::zero(); occupied];
    let mut acc = Rational::zero();
    for j in (1..=k).rev() {
        acc += (slots.gamma(j) - slots.gamma(j + 1)) * score_at(j + 1);
        if j <= occupied {
            prices[j - 1] = acc.clone();
        }
    }
    let mut cost = vec![Rational::zero(); l];
    let mut payoff = vec![Rational::zero(); l];
    let mut welfare = Rational::zero();
    for r in 0..occupied {
        let value = slots.gamma(r + 1) * &ranking[r].score;
        payoff[r] = &value - &prices[r];
        cost[r] = prices[r].clone();
        welfare += value;
    }
    let revenue = prices.iter().fold(Rational::zero(), |a, p| a + p);
    Slate { ranking, prices, cost, payoff, revenue, welfare }
}

/// Revenue through the rank-weighted form `sum_j (g_j - g_{j+1}) * j * s_{j+1}`.
///
/// Panics if it disagrees with the sum of slot prices.
pub fn revenue_identity_check(slate: &Slate, slots: &SlotParams, reserve: &Rational) -> Rational {
    let l = slate.ranking.len();
    let mut total = Rational::zero();
    for j in 1..=slots.count() {
        let s = if j + 1 <= l {
            slate.ranking[j].score.clone()
        } else if j == l {
            reserve.clone()
        } else {
            continue;
        };
        total += (slots.gamma(j) - slots.gamma(j + 1)) * int(j as i64) * s;
    }
    assert_eq!(total, slate.revenue, "rank-weighted revenue disagrees with price sum");
    total
}
