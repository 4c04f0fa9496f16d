//! Binary single- and multi-view networks over a shared node set.
//!
//! Every view is stored as a dense `N x N` matrix of links plus an
//! observation mask. Unobserved dyads carry a stored `0` and are skipped by
//! every likelihood sum. Undirected views keep both ordered entries set so
//! that all downstream code can sum over ordered pairs `i != j`.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateNodeLabel(label.clone()));
            }
        }
        if labels.len() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "a network needs at least 2 nodes, got {}",
                labels.len()
            )));
        }
        Ok(NodeSet { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// One binary relation over `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyView {
    n: usize,
    directed: bool,
    links: Vec<bool>,
    observed: Vec<bool>,
    label: String,
}

impl AdjacencyView {
    /// Fully observed empty view.
    pub fn empty(n: usize, directed: bool, label: impl Into<String>) -> Self {
        let mut observed = vec![true; n * n];
        for i in 0..n {
            observed[i * n + i] = false;
        }
        AdjacencyView {
            n,
            directed,
            links: vec![false; n * n],
            observed,
            label: label.into(),
        }
    }

    /// Builds a fully observed view from a row-major 0/1 matrix.
    pub fn from_matrix(
        entries: &[Vec<u8>],
        directed: bool,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = entries.len();
        let mut view = Self::empty(n, directed, label);
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 if i == j => return Err(Error::NonzeroDiagonal(i)),
                    1 => view.links[i * n + j] = true,
                    _ => return Err(Error::NonBinaryEntry { row: i, col: j }),
                }
            }
        }
        if !directed {
            for i in 0..n {
                for j in (i + 1)..n {
                    if view.links[i * n + j] != view.links[j * n + i] {
                        return Err(Error::Asymmetric { row: i, col: j });
                    }
                }
            }
        }
        Ok(view)
    }

    /// Builds a fully observed view from an edge list of index pairs.
    /// Duplicate edges collapse; undirected edges are mirrored.
    pub fn from_edges(
        n: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize)>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut view = Self::empty(n, directed, label);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::NonzeroDiagonal(i));
            }
            view.links[i * n + j] = true;
            if !directed {
                view.links[j * n + i] = true;
            }
        }
        Ok(view)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    /// `y_ij`, with unobserved dyads reading as 0.
    #[inline]
    pub fn link(&self, i: usize, j: usize) -> bool {
        self.links[i * self.n + j]
    }

    #[inline]
    pub fn y(&self, i: usize, j: usize) -> f64 {
        if self.links[i * self.n + j] {
            1.0
        } else {
            0.0
        }
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.n + j]
    }

    /// Hides the dyad `(i, j)` (and `(j, i)` for undirected views). The stored
    /// entry becomes 0.
    pub fn mask_dyad(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        let n = self.n;
        self.observed[i * n + j] = false;
        self.links[i * n + j] = false;
        if !self.directed {
            self.observed[j * n + i] = false;
            self.links[j * n + i] = false;
        }
    }

    /// Hides every dyad incident to node `i`.
    pub fn mask_node(&mut self, i: usize) {
        for j in 0..self.n {
            if j != i {
                self.mask_dyad(i, j);
                self.mask_dyad(j, i);
            }
        }
    }

    /// `sum_{i != j} y_ij` over observed ordered dyads.
    pub fn link_sum(&self) -> f64 {
        self.links.iter().filter(|&&l| l).count() as f64
    }

    /// Number of links: ordered for directed views, unordered pairs otherwise.
    pub fn link_count(&self) -> usize {
        let ordered = self.links.iter().filter(|&&l| l).count();
        if self.directed {
            ordered
        } else {
            ordered / 2
        }
    }

    /// `sum_{j != i} (y_ji + y_ij)` over observed dyads.
    pub fn degree_weight(&self, i: usize) -> f64 {
        (0..self.n)
            .filter(|&j| j != i)
            .map(|j| self.y(i, j) + self.y(j, i))
            .sum()
    }

    /// Dyads that are the unit of observation: ordered pairs for directed
    /// views and `i < j` pairs for undirected views.
    pub fn dyads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        let directed = self.directed;
        (0..n).flat_map(move |i| {
            (0..n).filter_map(move |j| {
                if i == j || (!directed && j < i) {
                    None
                } else {
                    Some((i, j))
                }
            })
        })
    }

    /// Observed dyads in the same convention as [`AdjacencyView::dyads`].
    pub fn observed_dyads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.dyads().filter(|&(i, j)| self.is_observed(i, j))
    }

    /// Links as `(i, j)` pairs, in [`AdjacencyView::dyads`] order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.dyads().filter(|&(i, j)| self.link(i, j))
    }

    pub fn is_fully_observed(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.is_observed(i, j)))
    }
}

/// Reported density under both conventions in use for undirected views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    /// Links over observed dyads, counting each undirected pair once.
    pub per_dyad: f64,
    /// Link count over observed ordered pairs `N(N-1)`; equals `per_dyad`
    /// for directed views and is half of it for undirected views.
    pub per_ordered_pair: f64,
}

pub fn density(view: &AdjacencyView) -> Density {
    let n = view.n();
    let mut ordered_obs = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && view.is_observed(i, j) {
                ordered_obs += 1;
            }
        }
    }
    if ordered_obs == 0 {
        return Density {
            per_dyad: 0.0,
            per_ordered_pair: 0.0,
        };
    }
    let links = view.link_count() as f64;
    let dyads = if view.is_directed() {
        ordered_obs as f64
    } else {
        (ordered_obs / 2) as f64
    };
    Density {
        per_dyad: links / dyads,
        per_ordered_pair: links / ordered_obs as f64,
    }
}

/// Histogram of total degree (in + out for directed views). Counts sum to N.
pub fn degree_distribution(view: &AdjacencyView) -> BTreeMap<usize, usize> {
    let n = view.n();
    let mut hist = BTreeMap::new();
    for i in 0..n {
        let deg = if view.is_directed() {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| view.link(i, j) as usize + view.link(j, i) as usize)
                .sum()
        } else {
            (0..n).filter(|&j| j != i && view.link(i, j)).count()
        };
        *hist.entry(deg).or_insert(0) += 1;
    }
    hist
}

#[derive(Debug, Clone)]
pub struct MultiplexNetwork {
    nodes: NodeSet,
    views: Vec<AdjacencyView>,
}

pub fn build_multiplex(nodes: NodeSet, views: Vec<AdjacencyView>) -> Result<MultiplexNetwork> {
    if views.is_empty() {
        return Err(Error::DimensionMismatch(
            "a multiplex network needs at least one view".into(),
        ));
    }
    for (k, view) in views.iter().enumerate() {
        if view.n() != nodes.len() {
            return Err(Error::DimensionMismatch(format!(
                "view {k} has {} nodes, node set has {}",
                view.n(),
                nodes.len()
            )));
        }
    }
    Ok(MultiplexNetwork { nodes, views })
}

impl MultiplexNetwork {
    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn views(&self) -> &[AdjacencyView] {
        &self.views
    }

    pub fn view(&self, k: usize) -> &AdjacencyView {
        &self.views[k]
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn k(&self) -> usize {
        self.views.len()
    }

    /// Same node set with the views replaced, e.g. masked copies for
    /// cross-validation.
    pub fn with_views(&self, views: Vec<AdjacencyView>) -> Result<MultiplexNetwork> {
        build_multiplex(self.nodes.clone(), views)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> NodeSet {
        NodeSet::new((0..n).map(|i| format!("v{i}"))).unwrap()
    }

    #[test]
    fn rejects_duplicate_labels() {
        assert!(matches!(
            NodeSet::new(["a", "b", "a"]),
            Err(Error::DuplicateNodeLabel(l)) if l == "a"
        ));
    }

    #[test]
    fn rejects_single_node() {
        assert!(NodeSet::new(["a"]).is_err());
    }

    #[test]
    fn two_node_empty_view_has_zero_density() {
        let mp = build_multiplex(labels(2), vec![AdjacencyView::empty(2, false, "v")]).unwrap();
        assert_eq!(mp.k(), 1);
        let d = density(mp.view(0));
        assert_eq!(d.per_dyad, 0.0);
        assert_eq!(d.per_ordered_pair, 0.0);
    }

    #[test]
    fn dimension_mismatch_between_views() {
        let views = vec![
            AdjacencyView::empty(50, true, "a"),
            AdjacencyView::empty(49, true, "b"),
        ];
        assert!(matches!(
            build_multiplex(labels(50), views),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn fifty_nodes_three_directed_views() {
        let views = (0..3)
            .map(|k| AdjacencyView::empty(50, true, format!("w{k}")))
            .collect();
        let mp = build_multiplex(labels(50), views).unwrap();
        assert_eq!((mp.n(), mp.k()), (50, 3));
    }

    #[test]
    fn matrix_validation() {
        assert!(matches!(
            AdjacencyView::from_matrix(&[vec![0, 2], vec![0, 0]], true, "x"),
            Err(Error::NonBinaryEntry { row: 0, col: 1 })
        ));
        assert!(matches!(
            AdjacencyView::from_matrix(&[vec![1, 0], vec![0, 0]], true, "x"),
            Err(Error::NonzeroDiagonal(0))
        ));
        assert!(matches!(
            AdjacencyView::from_matrix(&[vec![0, 1], vec![0, 0]], false, "x"),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn star_graph_degrees() {
        let v = AdjacencyView::from_edges(4, false, [(0, 1), (0, 2), (0, 3)], "star").unwrap();
        let hist = degree_distribution(&v);
        assert_eq!(hist, BTreeMap::from([(1, 3), (3, 1)]));
    }

    #[test]
    fn complete_graph_degrees_and_density() {
        let v = AdjacencyView::from_edges(3, false, [(0, 1), (0, 2), (1, 2)], "k3").unwrap();
        assert_eq!(degree_distribution(&v), BTreeMap::from([(2, 3)]));
        assert_eq!(density(&v).per_dyad, 1.0);
        let d = AdjacencyView::from_edges(
            3,
            true,
            [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)],
            "k3",
        )
        .unwrap();
        assert_eq!(density(&d).per_dyad, 1.0);
    }

    #[test]
    fn undirected_density_conventions() {
        // 294 links on 67 nodes: 294/2211 per pair, 294/4422 per ordered pair
        let n = 67;
        let edges: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .take(294)
            .collect();
        let v = AdjacencyView::from_edges(n, false, edges, "g").unwrap();
        let d = density(&v);
        assert!((d.per_dyad - 294.0 / 2211.0).abs() < 1e-15);
        assert!((d.per_ordered_pair - 294.0 / 4422.0).abs() < 1e-15);
        assert_eq!(format!("{:.3}", d.per_ordered_pair), "0.066");
    }

    #[test]
    fn masking_keeps_symmetry_and_zero_entries() {
        let mut v = AdjacencyView::from_edges(4, false, [(0, 1), (1, 2)], "p").unwrap();
        v.mask_dyad(1, 0);
        assert!(!v.is_observed(0, 1) && !v.is_observed(1, 0));
        assert!(!v.link(0, 1) && !v.link(1, 0));
        v.mask_node(2);
        for j in 0..4 {
            assert!(!v.is_observed(2, j) && !v.is_observed(j, 2));
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(v.link(i, j), v.link(j, i));
                assert_eq!(v.is_observed(i, j), v.is_observed(j, i));
            }
        }
        assert_eq!(density(&v).per_dyad, 0.0);
    }

    #[test]
    fn degree_weight_counts_both_directions() {
        let v = AdjacencyView::from_edges(3, true, [(0, 1), (1, 0), (2, 0)], "d").unwrap();
        assert_eq!(v.degree_weight(0), 3.0);
        assert_eq!(v.link_sum(), 3.0);
        let hist = degree_distribution(&v);
        assert_eq!(hist.values().sum::<usize>(), 3);
        // total edge mass: sum of in+out degrees is twice the link count
        let mass: usize = hist.iter().map(|(d, c)| d * c).sum();
        assert_eq!(mass, 2 * v.link_count());
    }
}
