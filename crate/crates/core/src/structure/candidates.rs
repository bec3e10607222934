use std::collections::VecDeque;
use std::rc::Rc;

use ndarray::Array2;

/// Per-node candidate neighbour lists in flattened (CSR-like) form.
///
/// Lists never contain the node itself. Pair `k` of the flattened view is
/// `(sources[k], targets[k])`, and node `i` owns the pairs
/// `offsets[i]..offsets[i + 1]`.
#[derive(Debug, Clone)]
pub struct CandidateEdgeSet {
    lists: Vec<Vec<usize>>,
    offsets: Rc<[usize]>,
    sources: Rc<[usize]>,
    targets: Rc<[usize]>,
    pairs: Rc<[(usize, usize)]>,
}

impl PartialEq for CandidateEdgeSet {
    fn eq(&self, other: &Self) -> bool {
        self.lists == other.lists
    }
}

impl CandidateEdgeSet {
    pub fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        for (i, list) in lists.iter().enumerate() {
            assert!(
                !list.contains(&i),
                "candidate list of node {i} contains itself"
            );
        }
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        offsets.push(0);
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                sources.push(i);
                targets.push(j);
            }
            offsets.push(sources.len());
        }
        let pairs: Vec<(usize, usize)> = sources
            .iter()
            .copied()
            .zip(targets.iter().copied())
            .collect();
        CandidateEdgeSet {
            lists,
            offsets: offsets.into(),
            sources: sources.into(),
            targets: targets.into(),
            pairs: pairs.into(),
        }
    }

    /// Nodes reachable within `hops` steps, in ascending index order.
    pub fn within_hops(adjacency: &Array2<f64>, hops: usize) -> Self {
        let n = adjacency.nrows();
        let neighbours: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && adjacency[[i, j]] > 0.0)
                    .collect()
            })
            .collect();
        let lists = (0..n)
            .map(|src| {
                let mut dist = vec![usize::MAX; n];
                dist[src] = 0;
                let mut queue = VecDeque::from([src]);
                while let Some(u) = queue.pop_front() {
                    if dist[u] == hops {
                        continue;
                    }
                    for &v in &neighbours[u] {
                        if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                (0..n)
                    .filter(|&j| j != src && dist[j] != usize::MAX)
                    .collect()
            })
            .collect();
        CandidateEdgeSet::from_lists(lists)
    }

    /// The `k` largest positive off-diagonal entries per row, largest first,
    /// ties toward the lower column.
    pub fn top_k(matrix: &Array2<f64>, k: usize) -> Self {
        let n = matrix.nrows();
        let lists = (0..n)
            .map(|i| crate::augment::top_k_row_positive(matrix, i, k))
            .collect();
        CandidateEdgeSet::from_lists(lists)
    }

    pub fn node_count(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, node: usize) -> &[usize] {
        &self.lists[node]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    /// Total number of candidate pairs.
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn offsets(&self) -> Rc<[usize]> {
        Rc::clone(&self.offsets)
    }

    pub fn sources(&self) -> Rc<[usize]> {
        Rc::clone(&self.sources)
    }

    pub fn targets(&self) -> Rc<[usize]> {
        Rc::clone(&self.targets)
    }

    pub fn pairs(&self) -> Rc<[(usize, usize)]> {
        Rc::clone(&self.pairs)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.lists[i].contains(&j)
    }

    /// Adjacency-list dump, one `node: c1 c2 ...` line per node.
    pub fn to_adjacency_list(&self) -> String {
        let mut out = String::new();
        for (i, list) in self.lists.iter().enumerate() {
            let cells: Vec<String> = list.iter().map(usize::to_string).collect();
            out.push_str(&format!("{i}: {}\n", cells.join(" ")));
        }
        out
    }
}
