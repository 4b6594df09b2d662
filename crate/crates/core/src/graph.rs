//! The knowledge network graph: a directed weighted graph over items whose
//! edge weights come from file-set overlap.
//!
//! For items `x` and `y` the forward weight is `|F_x ∩ F_y| / |F_y|` and the
//! backward weight `|F_x ∩ F_y| / |F_x|`. Only weights at or above the
//! threshold `t_e` are stored; zero-overlap pairs never carry an edge, and
//! self-edges are never stored.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{FileId, Item, ItemId};

pub type ItemStore = BTreeMap<ItemId, Item>;

/// Exact integer quantities behind a pair of edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCounts {
    pub shared: usize,
    pub size_x: usize,
    pub size_y: usize,
}

impl EdgeCounts {
    pub fn forward(&self) -> f64 {
        self.shared as f64 / self.size_y as f64
    }

    pub fn backward(&self) -> f64 {
        self.shared as f64 / self.size_x as f64
    }
}

fn shared_files(a: &BTreeSet<FileId>, b: &BTreeSet<FileId>) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter(|f| large.contains(f)).count()
}

pub fn edge_counts(x: &Item, y: &Item) -> Result<EdgeCounts> {
    if x.files.is_empty() || y.files.is_empty() {
        return Err(invalid("edge weight undefined for an item with no files"));
    }
    Ok(EdgeCounts {
        shared: shared_files(&x.files, &y.files),
        size_x: x.files.len(),
        size_y: y.files.len(),
    })
}

/// Returns `(e_xy, e_yx)`.
pub fn edge_weights(x: &Item, y: &Item) -> Result<(f64, f64)> {
    let c = edge_counts(x, y)?;
    Ok((c.forward(), c.backward()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HierarchyOrder {
    XAboveY,
    YAboveX,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnsGraph {
    t_e: f64,
    nodes: BTreeSet<ItemId>,
    out: BTreeMap<ItemId, BTreeMap<ItemId, f64>>,
    inc: BTreeMap<ItemId, BTreeSet<ItemId>>,
}

impl KnsGraph {
    pub fn new(t_e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t_e) {
            return Err(invalid(format!("edge threshold {t_e} outside [0, 1]")));
        }
        Ok(KnsGraph {
            t_e,
            nodes: BTreeSet::new(),
            out: BTreeMap::new(),
            inc: BTreeMap::new(),
        })
    }

    /// Builds the graph from scratch over every pair of items.
    pub fn rebuild(items: &ItemStore, t_e: f64) -> Result<Self> {
        let mut g = KnsGraph::new(t_e)?;
        g.nodes.extend(items.keys().copied());
        let all: Vec<&Item> = items.values().collect();
        for (i, x) in all.iter().enumerate() {
            for y in &all[i + 1..] {
                let c = edge_counts(x, y)?;
                g.set_edge(x.id, y.id, c.shared, c.forward());
                g.set_edge(y.id, x.id, c.shared, c.backward());
            }
        }
        Ok(g)
    }

    pub fn threshold(&self) -> f64 {
        self.t_e
    }

    pub fn add_node(&mut self, id: ItemId) {
        self.nodes.insert(id);
    }

    pub fn contains(&self, id: ItemId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeMap::len).sum()
    }

    /// Stored weight of the edge `x -> y`, if above threshold.
    pub fn weight(&self, x: ItemId, y: ItemId) -> Option<f64> {
        self.out.get(&x).and_then(|m| m.get(&y)).copied()
    }

    pub fn out_edges(&self, x: ItemId) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.out
            .get(&x)
            .into_iter()
            .flat_map(|m| m.iter().map(|(y, w)| (*y, *w)))
    }

    /// All stored edges in `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = (ItemId, ItemId, f64)> + '_ {
        self.out
            .iter()
            .flat_map(|(x, m)| m.iter().map(move |(y, w)| (*x, *y, *w)))
    }

    fn set_edge(&mut self, x: ItemId, y: ItemId, shared: usize, w: f64) -> bool {
        let keep = shared > 0 && w >= self.t_e;
        if keep {
            let prev = self.out.entry(x).or_default().insert(y, w);
            self.inc.entry(y).or_default().insert(x);
            prev != Some(w)
        } else {
            self.remove_edge(x, y)
        }
    }

    fn remove_edge(&mut self, x: ItemId, y: ItemId) -> bool {
        let Some(m) = self.out.get_mut(&x) else {
            return false;
        };
        let removed = m.remove(&y).is_some();
        if m.is_empty() {
            self.out.remove(&x);
        }
        if let Some(s) = self.inc.get_mut(&y) {
            s.remove(&x);
            if s.is_empty() {
                self.inc.remove(&y);
            }
        }
        removed
    }

    /// Recomputes both directions between `changed` and every other node.
    /// Returns the number of stored edges that were added, altered or removed.
    pub fn refresh_edges(&mut self, changed: ItemId, items: &ItemStore) -> Result<usize> {
        let item = items
            .get(&changed)
            .ok_or_else(|| invalid(format!("unknown item {changed}")))?;
        self.nodes.insert(changed);
        let mut updates = 0;
        for other in self.nodes.iter().copied().collect::<Vec<_>>() {
            if other == changed {
                continue;
            }
            let y = items
                .get(&other)
                .ok_or_else(|| invalid(format!("graph node {other} has no item")))?;
            let c = edge_counts(item, y)?;
            updates += self.set_edge(changed, other, c.shared, c.forward()) as usize;
            updates += self.set_edge(other, changed, c.shared, c.backward()) as usize;
        }
        Ok(updates)
    }

    /// Like [`refresh_edges`](Self::refresh_edges), but only visits items
    /// that share a file with `changed` (found through `file_items`) or that
    /// currently hold an edge to or from it. Every other pair has zero
    /// overlap and therefore no edge, so the result is identical.
    pub fn refresh_edges_indexed(
        &mut self,
        changed: ItemId,
        items: &ItemStore,
        file_items: &BTreeMap<FileId, Vec<ItemId>>,
    ) -> Result<usize> {
        let item = items
            .get(&changed)
            .ok_or_else(|| invalid(format!("unknown item {changed}")))?;
        self.nodes.insert(changed);
        let mut shared: BTreeMap<ItemId, usize> = BTreeMap::new();
        for f in &item.files {
            for &other in file_items.get(f).map(Vec::as_slice).unwrap_or(&[]) {
                if other != changed {
                    *shared.entry(other).or_default() += 1;
                }
            }
        }
        let mut touched: BTreeSet<ItemId> = shared.keys().copied().collect();
        touched.extend(self.out.get(&changed).into_iter().flat_map(|m| m.keys()));
        touched.extend(self.inc.get(&changed).into_iter().flatten());

        let mut updates = 0;
        for other in touched {
            let y = items
                .get(&other)
                .ok_or_else(|| invalid(format!("graph node {other} has no item")))?;
            let s = shared.get(&other).copied().unwrap_or(0);
            let c = EdgeCounts {
                shared: s,
                size_x: item.files.len(),
                size_y: y.files.len(),
            };
            updates += self.set_edge(changed, other, s, c.forward()) as usize;
            updates += self.set_edge(other, changed, s, c.backward()) as usize;
        }
        Ok(updates)
    }

    fn pair<'a>(&self, items: &'a ItemStore, x: ItemId, y: ItemId) -> Result<(&'a Item, &'a Item)> {
        let get = |id: ItemId| {
            if !self.contains(id) {
                return Err(invalid(format!("unknown node {id}")));
            }
            items
                .get(&id)
                .ok_or_else(|| invalid(format!("unknown item {id}")))
        };
        Ok((get(x)?, get(y)?))
    }

    /// `½(e_xy + e_yx)` from unthresholded weights.
    pub fn similarity(&self, items: &ItemStore, x: ItemId, y: ItemId) -> Result<f64> {
        let (a, b) = self.pair(items, x, y)?;
        let c = edge_counts(a, b)?;
        Ok(0.5 * (c.forward() + c.backward()))
    }

    pub fn hierarchy_order(&self, items: &ItemStore, x: ItemId, y: ItemId) -> Result<HierarchyOrder> {
        let (a, b) = self.pair(items, x, y)?;
        let c = edge_counts(a, b)?;
        if c.shared == 0 {
            return Ok(HierarchyOrder::Incomparable);
        }
        // e_xy > e_yx  <=>  shared/|y| > shared/|x|  <=>  |x| > |y|
        Ok(match c.size_x.cmp(&c.size_y) {
            std::cmp::Ordering::Greater => HierarchyOrder::XAboveY,
            std::cmp::Ordering::Less => HierarchyOrder::YAboveX,
            std::cmp::Ordering::Equal => HierarchyOrder::Incomparable,
        })
    }

    /// Average-linkage agglomeration over pairwise similarity.
    pub fn mine_hierarchy(&self, items: &ItemStore) -> Result<HierarchyReport> {
        let leaves: Vec<ItemId> = self.nodes.iter().copied().collect();
        let n = leaves.len();
        if n == 0 {
            return Ok(HierarchyReport::default());
        }
        let members: Vec<&Item> = leaves
            .iter()
            .map(|id| items.get(id).ok_or_else(|| invalid(format!("unknown item {id}"))))
            .collect::<Result<_>>()?;

        let mut sim = vec![vec![0.0f64; n]; n];
        let mut similarities = Vec::new();
        let mut dominance = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = edge_counts(members[i], members[j])?;
                if c.shared == 0 {
                    continue;
                }
                let s = 0.5 * (c.forward() + c.backward());
                sim[i][j] = s;
                sim[j][i] = s;
                similarities.push(PairSimilarity {
                    x: leaves[i],
                    y: leaves[j],
                    similarity: s,
                });
                match c.size_x.cmp(&c.size_y) {
                    std::cmp::Ordering::Greater => dominance.push((leaves[i], leaves[j])),
                    std::cmp::Ordering::Less => dominance.push((leaves[j], leaves[i])),
                    std::cmp::Ordering::Equal => {}
                }
            }
        }

        // Slot i holds a live cluster; `sum[i][j]` is the total pairwise
        // similarity between the leaves of slots i and j.
        let mut sum = sim;
        let mut label: Vec<usize> = (0..n).collect();
        let mut size = vec![1usize; n];
        let mut alive = vec![true; n];
        let mut merges = Vec::with_capacity(n - 1);
        for step in 0..n - 1 {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..n {
                if !alive[a] {
                    continue;
                }
                for b in a + 1..n {
                    if !alive[b] {
                        continue;
                    }
                    let avg = sum[a][b] / (size[a] * size[b]) as f64;
                    // slots are ordered by their smallest item id, so the
                    // first pair found at a given value is the tie winner
                    if best.is_none_or(|(s, _, _)| avg > s) {
                        best = Some((avg, a, b));
                    }
                }
            }
            let (s, a, b) = best.expect("at least two live clusters");
            merges.push(Merge {
                left: label[a],
                right: label[b],
                similarity: s,
                size: size[a] + size[b],
            });
            for c in 0..n {
                if alive[c] && c != a && c != b {
                    sum[a][c] += sum[b][c];
                    sum[c][a] = sum[a][c];
                }
            }
            size[a] += size[b];
            alive[b] = false;
            label[a] = n + step;
        }

        Ok(HierarchyReport {
            leaves,
            merges,
            similarities,
            dominance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSimilarity {
    pub x: ItemId,
    pub y: ItemId,
    pub similarity: f64,
}

/// One agglomeration step. Cluster labels below `leaves.len()` are leaves;
/// label `leaves.len() + i` is the cluster formed by merge `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub similarity: f64,
    pub size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    /// Leaf order, ascending item id.
    pub leaves: Vec<ItemId>,
    pub merges: Vec<Merge>,
    /// Pairs with nonzero overlap; every other pair has similarity 0.
    pub similarities: Vec<PairSimilarity>,
    /// `(above, below)` pairs.
    pub dominance: Vec<(ItemId, ItemId)>,
}
