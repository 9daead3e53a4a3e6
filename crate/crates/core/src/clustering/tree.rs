//! Spanning tree, single-linkage hierarchy and condensed cluster tree.

use serde::Serialize;

use crate::matrix::SquareMatrix;

/// Lower bound applied to edge weights before inverting them into λ.
pub const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl Edge {
    fn key(&self) -> (f64, usize, usize) {
        (self.weight, self.a.min(self.b), self.a.max(self.b))
    }
}

pub fn lambda_of(weight: f64) -> f64 {
    1.0 / weight.max(MIN_WEIGHT)
}

/// Prim's algorithm on a dense symmetric weight matrix.
///
/// Returns `n - 1` edges sorted by `(weight, smaller endpoint, larger endpoint)`.
pub fn mst(weights: &SquareMatrix) -> Vec<Edge> {
    let n = weights.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut via = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);

    in_tree[0] = true;
    for j in 1..n {
        best[j] = weights.get(0, j);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push(Edge {
            a: via[next].min(next),
            b: via[next].max(next),
            weight: best[next],
        });
        for j in 0..n {
            if !in_tree[j] {
                let w = weights.get(next, j);
                if w < best[j] {
                    best[j] = w;
                    via[j] = next;
                }
            }
        }
    }
    sort_edges(&mut edges);
    edges
}

pub fn sort_edges(edges: &mut [Edge]) {
    edges.sort_by(|x, y| {
        x.key()
            .partial_cmp(&y.key())
            .expect("edge weights are not NaN")
    });
}

/// Binary merge tree. Nodes `0..n` are points; node `n + i` is the i-th merge.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    pub n_points: usize,
    pub merges: Vec<Merge>,
}

#[derive(Debug, Clone, Copy)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub weight: f64,
    pub size: usize,
}

impl Dendrogram {
    pub fn from_sorted_edges(n_points: usize, edges: &[Edge]) -> Self {
        let mut parent: Vec<usize> = (0..2 * n_points).collect();
        let mut size = vec![1usize; 2 * n_points];
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut merges = Vec::with_capacity(n_points.saturating_sub(1));
        for e in edges {
            let ra = find(&mut parent, e.a);
            let rb = find(&mut parent, e.b);
            debug_assert_ne!(ra, rb, "spanning tree edges never close a cycle");
            let node = n_points + merges.len();
            let s = size[ra] + size[rb];
            parent[ra] = node;
            parent[rb] = node;
            size[node] = s;
            merges.push(Merge {
                left: ra,
                right: rb,
                weight: e.weight,
                size: s,
            });
        }
        Self { n_points, merges }
    }

    fn size_of(&self, node: usize) -> usize {
        if node < self.n_points {
            1
        } else {
            self.merges[node - self.n_points].size
        }
    }

    /// The subtrees joined at `node` by merges of exactly `weight`. Equal
    /// weights form one multi-way merge, so the result does not depend on the
    /// order ties were processed in.
    fn components_at(&self, node: usize, weight: f64) -> Vec<usize> {
        let mut parts = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match x.checked_sub(self.n_points).map(|i| &self.merges[i]) {
                Some(m) if m.weight == weight => {
                    stack.push(m.right);
                    stack.push(m.left);
                }
                _ => parts.push(x),
            }
        }
        parts
    }

    fn leaves_under(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n_points {
                out.push(x);
            } else {
                let m = &self.merges[x - self.n_points];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensedCluster {
    pub id: usize,
    pub parent: Option<usize>,
    pub lambda_birth: f64,
    /// Largest λ at which a point or child cluster leaves this cluster.
    pub lambda_death: f64,
    pub size: usize,
    pub stability: f64,
    pub children: Vec<usize>,
    /// Points that fall out of this cluster directly, with their λ.
    pub points: Vec<(usize, f64)>,
}

impl CondensedCluster {
    fn new(id: usize, parent: Option<usize>, lambda_birth: f64, size: usize) -> Self {
        Self {
            id,
            parent,
            lambda_birth,
            lambda_death: lambda_birth,
            size,
            stability: 0.0,
            children: Vec::new(),
            points: Vec::new(),
        }
    }

    /// Distance at which the cluster split off its parent; infinite for the root.
    pub fn birth_distance(&self) -> f64 {
        if self.lambda_birth == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.lambda_birth
        }
    }
}

/// Condensed tree; cluster 0 is the root and ids increase with depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensedTree {
    pub n_points: usize,
    pub clusters: Vec<CondensedCluster>,
}

impl CondensedTree {
    /// Walks the dendrogram from the top. A split whose sides both reach
    /// `min_cluster_size` creates two child clusters; a smaller side's points
    /// fall out of the current cluster at the split λ.
    pub fn build(dendrogram: &Dendrogram, min_cluster_size: usize) -> Self {
        let n = dendrogram.n_points;
        let mut clusters = vec![CondensedCluster::new(0, None, 0.0, n)];
        if n == 1 {
            clusters[0].points.push((0, f64::INFINITY));
            clusters[0].lambda_death = f64::INFINITY;
            return Self {
                n_points: n,
                clusters,
            };
        }
        if n == 0 {
            return Self {
                n_points: 0,
                clusters,
            };
        }
        let top = n + dendrogram.merges.len() - 1;
        let mut stack = vec![(top, 0usize)];
        let mut buf = Vec::new();
        while let Some((node, cid)) = stack.pop() {
            let weight = dendrogram.merges[node - n].weight;
            let lambda = lambda_of(weight);
            let parts = dendrogram.components_at(node, weight);
            let big: Vec<usize> = parts
                .iter()
                .copied()
                .filter(|&p| dendrogram.size_of(p) >= min_cluster_size)
                .collect();
            for &part in &parts {
                if dendrogram.size_of(part) < min_cluster_size {
                    buf.clear();
                    dendrogram.leaves_under(part, &mut buf);
                    for &p in &buf {
                        clusters[cid].points.push((p, lambda));
                    }
                }
            }
            if big.len() >= 2 {
                for &child in &big {
                    let id = clusters.len();
                    let size = dendrogram.size_of(child);
                    clusters.push(CondensedCluster::new(id, Some(cid), lambda, size));
                    clusters[cid].children.push(id);
                    stack.push((child, id));
                }
            } else if let Some(&only) = big.first() {
                debug_assert!(only >= n, "min_cluster_size >= 2 keeps single points small");
                stack.push((only, cid));
            }
            clusters[cid].lambda_death = clusters[cid].lambda_death.max(lambda);
        }
        for c in &mut clusters {
            c.points.sort_by_key(|&(p, _)| p);
        }
        let mut tree = Self {
            n_points: n,
            clusters,
        };
        tree.compute_stability();
        tree
    }

    fn compute_stability(&mut self) {
        for i in 0..self.clusters.len() {
            let birth = self.clusters[i].lambda_birth;
            let mut s: f64 = self.clusters[i]
                .points
                .iter()
                .map(|&(_, l)| l - birth)
                .sum();
            for &c in &self.clusters[i].children {
                let child = &self.clusters[c];
                s += child.size as f64 * (child.lambda_birth - birth);
            }
            self.clusters[i].stability = s;
        }
    }

    /// For each point, the cluster it falls out of and the λ at which it does.
    pub fn point_exits(&self) -> Vec<(usize, f64)> {
        let mut out = vec![(0usize, 0.0); self.n_points];
        for c in &self.clusters {
            for &(p, l) in &c.points {
                out[p] = (c.id, l);
            }
        }
        out
    }

    pub fn is_ancestor_or_self(&self, ancestor: usize, mut node: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.clusters[node].parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    /// Excess-of-mass selection over all clusters, root included. A parent is
    /// kept when its stability is at least the summed stability of the
    /// clusters selected beneath it.
    pub fn select_eom(&self) -> Vec<usize> {
        let k = self.clusters.len();
        let mut selected = vec![false; k];
        let mut value = vec![0.0; k];
        for id in (0..k).rev() {
            let c = &self.clusters[id];
            if c.children.is_empty() {
                selected[id] = true;
                value[id] = c.stability;
                continue;
            }
            let below: f64 = c.children.iter().map(|&ch| value[ch]).sum();
            if c.stability >= below {
                selected[id] = true;
                value[id] = c.stability;
                let mut stack = c.children.clone();
                while let Some(x) = stack.pop() {
                    selected[x] = false;
                    stack.extend(&self.clusters[x].children);
                }
            } else {
                value[id] = below;
            }
        }
        (0..k).filter(|&i| selected[i]).collect()
    }

    /// Replaces each selected cluster born below `epsilon` by its nearest
    /// ancestor born at or above `epsilon`, then drops clusters that have a
    /// selected ancestor.
    pub fn apply_epsilon(&self, selected: &[usize], epsilon: f64) -> Vec<usize> {
        if epsilon <= 0.0 {
            return selected.to_vec();
        }
        let mut lifted: Vec<usize> = selected
            .iter()
            .map(|&c| {
                let mut cur = c;
                while self.clusters[cur].birth_distance() < epsilon {
                    cur = self.clusters[cur].parent.expect("root is born at infinity");
                }
                cur
            })
            .collect();
        lifted.sort_unstable();
        lifted.dedup();
        let keep: Vec<usize> = lifted
            .iter()
            .copied()
            .filter(|&c| {
                !lifted
                    .iter()
                    .any(|&other| other != c && self.is_ancestor_or_self(other, c))
            })
            .collect();
        keep
    }
}
