//! Frequent-pattern growth over object-id transactions, and association
//! rules derived from the frequent itemsets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ObjectId;

use super::MinerConfig;

const ROOT: usize = 0;

struct Node {
    item: usize,
    count: u64,
    parent: usize,
    children: Vec<(usize, usize)>,
}

/// Prefix tree over items ranked by descending support.
struct FpTree {
    nodes: Vec<Node>,
    /// Node indices per item rank.
    header: Vec<Vec<usize>>,
}

impl FpTree {
    fn new(n_items: usize) -> Self {
        Self {
            nodes: vec![Node { item: usize::MAX, count: 0, parent: ROOT, children: Vec::new() }],
            header: vec![Vec::new(); n_items],
        }
    }

    /// Inserts a path of item ranks, which must be sorted ascending.
    fn insert(&mut self, path: &[usize], count: u64) {
        let mut cur = ROOT;
        for &item in path {
            let next = match self.nodes[cur].children.iter().find(|(i, _)| *i == item) {
                Some(&(_, child)) => child,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(Node { item, count: 0, parent: cur, children: Vec::new() });
                    self.nodes[cur].children.push((item, idx));
                    self.header[item].push(idx);
                    idx
                }
            };
            self.nodes[next].count += count;
            cur = next;
        }
    }

    fn prefix(&self, mut node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        node = self.nodes[node].parent;
        while node != ROOT {
            path.push(self.nodes[node].item);
            node = self.nodes[node].parent;
        }
        path.reverse();
        path
    }
}

/// Builds a tree from weighted transactions over arbitrary item keys: the
/// first scan counts supports and prunes infrequent items, the second
/// inserts each transaction in support order.
fn build<K: Ord + Copy>(transactions: &[(Vec<K>, u64)], min_support: u64) -> (FpTree, Vec<K>) {
    let mut support: BTreeMap<K, u64> = BTreeMap::new();
    for (items, w) in transactions {
        for &it in items {
            *support.entry(it).or_default() += w;
        }
    }
    let mut frequent: Vec<(K, u64)> = support.into_iter().filter(|(_, s)| *s >= min_support).collect();
    frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let rank: BTreeMap<K, usize> = frequent.iter().enumerate().map(|(i, (k, _))| (*k, i)).collect();
    let mut tree = FpTree::new(frequent.len());
    for (items, w) in transactions {
        let mut path: Vec<usize> = items.iter().filter_map(|k| rank.get(k).copied()).collect();
        path.sort_unstable();
        path.dedup();
        if !path.is_empty() {
            tree.insert(&path, *w);
        }
    }
    (tree, frequent.into_iter().map(|(k, _)| k).collect())
}

fn grow(
    tree: &FpTree,
    keys: &[ObjectId],
    suffix: &[ObjectId],
    min_support: u64,
    out: &mut BTreeMap<Vec<ObjectId>, u64>,
) {
    // least frequent first
    for rank in (0..keys.len()).rev() {
        let nodes = &tree.header[rank];
        let support: u64 = nodes.iter().map(|&n| tree.nodes[n].count).sum();
        if support < min_support {
            continue;
        }
        let mut pattern = suffix.to_vec();
        pattern.push(keys[rank]);
        let mut sorted = pattern.clone();
        sorted.sort_unstable();
        out.insert(sorted, support);

        let base: Vec<(Vec<ObjectId>, u64)> = nodes
            .iter()
            .map(|&n| {
                let path = tree.prefix(n).into_iter().map(|r| keys[r]).collect();
                (path, tree.nodes[n].count)
            })
            .filter(|(p, _): &(Vec<ObjectId>, u64)| !p.is_empty())
            .collect();
        if base.is_empty() {
            continue;
        }
        let (cond, cond_keys) = build(&base, min_support);
        if !cond_keys.is_empty() {
            grow(&cond, &cond_keys, &pattern, min_support, out);
        }
    }
}

/// All itemsets with support of at least `min_support`, keyed by their
/// sorted item list.
pub fn frequent_itemsets(transactions: &[Vec<ObjectId>], min_support: u64) -> BTreeMap<Vec<ObjectId>, u64> {
    let weighted: Vec<(Vec<ObjectId>, u64)> = transactions
        .iter()
        .map(|t| {
            let set: BTreeSet<ObjectId> = t.iter().copied().collect();
            (set.into_iter().collect(), 1)
        })
        .collect();
    let min_support = min_support.max(1);
    let (tree, keys) = build(&weighted, min_support);
    let mut out = BTreeMap::new();
    grow(&tree, &keys, &[], min_support, &mut out);
    out
}

/// `antecedent -> consequent` with the support of their union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: Vec<ObjectId>,
    pub consequent: ObjectId,
    pub support: u64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    pub itemsets: BTreeMap<Vec<ObjectId>, u64>,
    pub rules: Vec<Rule>,
    /// Rule indices keyed by the smallest antecedent item.
    by_first: BTreeMap<ObjectId, Vec<usize>>,
}

impl RuleSet {
    /// Wraps externally produced rules; itemset supports are left empty.
    pub fn from_rules(rules: Vec<Rule>) -> Self {
        let mut by_first: BTreeMap<ObjectId, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            if let Some(first) = r.antecedent.iter().min() {
                by_first.entry(*first).or_default().push(i);
            }
        }
        Self { itemsets: BTreeMap::new(), rules, by_first }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn support(&self, items: &[ObjectId]) -> Option<u64> {
        self.itemsets.get(items).copied()
    }

    /// Rules whose antecedent is contained in `context`.
    pub fn matching<'a>(&'a self, context: &'a BTreeSet<ObjectId>) -> impl Iterator<Item = &'a Rule> + 'a {
        context
            .iter()
            .filter_map(|o| self.by_first.get(o))
            .flatten()
            .map(|&i| &self.rules[i])
            .filter(|r| r.antecedent.iter().all(|a| context.contains(a)))
    }
}

/// Mines frequent itemsets and single-consequent rules meeting both
/// thresholds. Rules are ordered by confidence, then support, then items.
pub fn mine_rules(transactions: &[Vec<ObjectId>], cfg: &MinerConfig) -> RuleSet {
    let itemsets = frequent_itemsets(transactions, cfg.min_support);
    let mut rules = Vec::new();
    for (items, &support) in itemsets.iter().filter(|(k, _)| k.len() >= 2) {
        for (i, &consequent) in items.iter().enumerate() {
            let antecedent: Vec<ObjectId> =
                items.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, o)| *o).collect();
            // every subset of a frequent itemset is frequent
            let base = itemsets[&antecedent];
            let confidence = support as f64 / base as f64;
            if confidence >= cfg.min_confidence {
                rules.push(Rule { antecedent, consequent, support, confidence });
            }
        }
    }
    rules.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.support.cmp(&a.support))
            .then(a.consequent.cmp(&b.consequent))
            .then(a.antecedent.cmp(&b.antecedent))
    });
    RuleSet { itemsets, ..RuleSet::from_rules(rules) }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: ObjectId = ObjectId(0);
    const B: ObjectId = ObjectId(1);
    const C: ObjectId = ObjectId(2);

    fn cfg(min_support: u64) -> MinerConfig {
        MinerConfig { min_support, ..Default::default() }
    }

    #[test]
    fn three_transaction_example() {
        let tx = vec![vec![A, B], vec![A, B], vec![A, C]];
        let rs = mine_rules(&tx, &cfg(2));
        let expected: BTreeMap<Vec<ObjectId>, u64> =
            [(vec![A], 3), (vec![B], 2), (vec![A, B], 2)].into_iter().collect();
        assert_eq!(rs.itemsets, expected);
        assert_eq!(rs.rules.len(), 2);
        assert_eq!((rs.rules[0].antecedent.as_slice(), rs.rules[0].consequent), (&[B][..], A));
        assert_eq!(rs.rules[0].confidence, 1.0);
        assert_eq!((rs.rules[1].antecedent.as_slice(), rs.rules[1].consequent), (&[A][..], B));
        assert!((rs.rules[1].confidence - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn support_above_transaction_count_yields_nothing() {
        let rs = mine_rules(&[vec![A, B]], &cfg(2));
        assert!(rs.itemsets.is_empty() && rs.rules.is_empty());
    }

    #[test]
    fn single_item_has_no_rules() {
        let rs = mine_rules(&[vec![A]], &cfg(1));
        assert_eq!(rs.itemsets.len(), 1);
        assert_eq!(rs.support(&[A]), Some(1));
        assert!(rs.rules.is_empty());
    }

    #[test]
    fn duplicate_items_count_once_per_transaction() {
        let sets = frequent_itemsets(&[vec![A, A, B], vec![B, A]], 2);
        assert_eq!(sets.get(&vec![A]), Some(&2));
        assert_eq!(sets.get(&vec![A, B]), Some(&2));
    }

    #[test]
    fn matching_requires_full_antecedent() {
        let tx = vec![vec![A, B, C]; 3];
        let rs = mine_rules(&tx, &cfg(3));
        let ctx: BTreeSet<ObjectId> = [A].into_iter().collect();
        assert!(rs.matching(&ctx).all(|r| r.antecedent == vec![A]));
        assert_eq!(rs.matching(&ctx).count(), 2);
    }
}
