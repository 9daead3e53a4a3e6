//! HDBSCAN over the SCU embeddings of one document.
//!
//! Pipeline: distances → core distances → mutual reachability → minimum
//! spanning tree → single-linkage hierarchy → condensed tree →
//! excess-of-mass selection → epsilon merge → labels → noise promotion.
//!
//! The root cluster is eligible for selection, so a document whose SCUs all
//! agree forms one cluster. When the root is selected, a point belongs to
//! it only if it falls out of the hierarchy at a distance within
//! `cluster_selection_epsilon` (with epsilon 0: at the root's last merge
//! level); the rest are noise.

mod tree;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use tree::{
    lambda_of, mst, sort_edges, CondensedCluster, CondensedTree, Dendrogram, Edge, MIN_WEIGHT,
};

use crate::cache::Cache;
use crate::corpus::ScuRecord;
use crate::embedding::{encode_batch, pairwise_distances, Encoder, Metric};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SelectionMethod {
    #[default]
    ExcessOfMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub cluster_selection_epsilon: f64,
    pub selection_method: SelectionMethod,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            min_samples: 2,
            cluster_selection_epsilon: 0.15,
            selection_method: SelectionMethod::ExcessOfMass,
        }
    }
}

impl HdbscanParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Config("min_cluster_size must be >= 2".into()));
        }
        if self.min_samples < 1 {
            return Err(Error::Config("min_samples must be >= 1".into()));
        }
        if !(self.cluster_selection_epsilon >= 0.0) {
            return Err(Error::Config(
                "cluster_selection_epsilon must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Distance from each point to its `k`-th nearest other point. Points with
/// fewer than `k` others use their largest distance (0 when alone).
pub fn core_distances(dist: &SquareMatrix, k: usize) -> Vec<f64> {
    let n = dist.len();
    (0..n)
        .map(|p| {
            let mut others: Vec<f64> = (0..n).filter(|&q| q != p).map(|q| dist.get(p, q)).collect();
            if others.is_empty() {
                return 0.0;
            }
            others.sort_by(f64::total_cmp);
            if k == 0 {
                0.0
            } else {
                others[k.min(others.len()) - 1]
            }
        })
        .collect()
}

pub fn mutual_reachability(dist: &SquareMatrix, core: &[f64]) -> SquareMatrix {
    assert_eq!(
        dist.len(),
        core.len(),
        "core distances must match matrix size"
    );
    SquareMatrix::symmetric_from_fn(dist.len(), |a, b| core[a].max(core[b]).max(dist.get(a, b)))
}

/// Flat clustering before noise promotion; `None` marks noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    pub labels: Vec<Option<usize>>,
}

impl Clustering {
    pub fn noise(&self) -> BTreeSet<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.is_none().then_some(i))
            .collect()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().flatten().collect::<BTreeSet<_>>().len()
    }
}

/// Labels selected clusters `0..k` in order of their smallest member.
fn label_points(tree: &CondensedTree, selected: &[usize], epsilon: f64) -> Clustering {
    let root_selected = selected.contains(&0);
    let root_threshold = if epsilon > 0.0 {
        1.0 / epsilon
    } else {
        tree.clusters[0].lambda_death
    };
    let mut raw: Vec<Option<usize>> = tree
        .point_exits()
        .into_iter()
        .map(|(cluster, lambda)| {
            if root_selected {
                return (lambda >= root_threshold).then_some(0);
            }
            selected
                .iter()
                .copied()
                .find(|&s| tree.is_ancestor_or_self(s, cluster))
        })
        .collect();
    let mut renumber = BTreeMap::new();
    for l in raw.iter_mut().flatten() {
        let next = renumber.len();
        *l = *renumber.entry(*l).or_insert(next);
    }
    Clustering { labels: raw }
}

/// Condensed tree and flat clustering of an already computed MST.
pub fn condense_and_select(
    n_points: usize,
    mst_edges: &[Edge],
    params: &HdbscanParams,
) -> (Clustering, CondensedTree) {
    let mut edges = mst_edges.to_vec();
    sort_edges(&mut edges);
    let dendrogram = Dendrogram::from_sorted_edges(n_points, &edges);
    let tree = CondensedTree::build(&dendrogram, params.min_cluster_size);
    if n_points < params.min_cluster_size {
        return (
            Clustering {
                labels: vec![None; n_points],
            },
            tree,
        );
    }
    let selected = tree.select_eom();
    let selected = tree.apply_epsilon(&selected, params.cluster_selection_epsilon);
    (
        label_points(&tree, &selected, params.cluster_selection_epsilon),
        tree,
    )
}

/// Full HDBSCAN on a distance matrix.
pub fn hdbscan(dist: &SquareMatrix, params: &HdbscanParams) -> Result<(Clustering, CondensedTree)> {
    params.validate()?;
    let core = core_distances(dist, params.min_samples);
    let mr = mutual_reachability(dist, &core);
    let edges = mst(&mr);
    Ok(condense_and_select(dist.len(), &edges, params))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub cluster_sizes: BTreeMap<usize, usize>,
    /// Points labelled noise before promotion.
    pub raw_noise: BTreeSet<usize>,
}

impl ClusterAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn size_of_point(&self, point: usize) -> Option<usize> {
        self.labels
            .get(point)
            .and_then(|l| self.cluster_sizes.get(l))
            .copied()
    }

    /// Partition as a set of member sets, for label-free comparison.
    pub fn partition(&self) -> BTreeSet<BTreeSet<usize>> {
        let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (p, &l) in self.labels.iter().enumerate() {
            groups.entry(l).or_default().insert(p);
        }
        groups.into_values().collect()
    }
}

/// Turns each noise point into its own fresh singleton cluster, numbered
/// after the existing clusters in point order.
pub fn promote_noise(clustering: &Clustering) -> ClusterAssignment {
    let mut next = clustering
        .labels
        .iter()
        .flatten()
        .max()
        .map_or(0, |m| m + 1);
    let mut raw_noise = BTreeSet::new();
    let labels: Vec<usize> = clustering
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.unwrap_or_else(|| {
                raw_noise.insert(i);
                next += 1;
                next - 1
            })
        })
        .collect();
    let mut cluster_sizes = BTreeMap::new();
    for &l in &labels {
        *cluster_sizes.entry(l).or_insert(0) += 1;
    }
    ClusterAssignment {
        labels,
        cluster_sizes,
        raw_noise,
    }
}

/// Everything needed to cluster one document's SCUs.
pub struct ClusterContext<'a> {
    pub encoder: &'a dyn Encoder,
    pub normalize: bool,
    pub metric: Metric,
    pub params: HdbscanParams,
    pub cache: Option<&'a Cache>,
}

/// Debug view of one document's clustering.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterDump {
    pub doc_id: String,
    pub labels: Vec<usize>,
    pub raw_noise: Vec<usize>,
    pub tree: CondensedTree,
}

pub fn cluster_scus(
    scus: &[ScuRecord],
    ctx: &ClusterContext<'_>,
) -> Result<(ClusterAssignment, CondensedTree)> {
    let doc = scus.first().map(|s| s.doc_id.clone()).unwrap_or_default();
    let run = || -> Result<_> {
        if scus.is_empty() {
            return Err(Error::Validation("no SCUs to cluster".into()));
        }
        let texts: Vec<String> = scus.iter().map(|s| s.text.clone()).collect();
        let vectors = encode_batch(&texts, ctx.encoder, ctx.normalize, ctx.cache)?;
        let dist = pairwise_distances(&vectors, ctx.metric)?;
        let (clustering, tree) = hdbscan(&dist, &ctx.params)?;
        Ok((promote_noise(&clustering), tree))
    };
    run().map_err(|e| e.in_document(&doc))
}
