//! Configuration-model multigraphs.
//!
//! Adjacency is stored in compressed rows with one entry per stub, so a
//! uniformly random out-neighbour (counted with multiplicity) is a single
//! index into the row. Multi-edges and self-loops are kept as generated.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::degrees::DegreeSequence;
use crate::error::{invalid, Error, Result};
use crate::rng::{self, Rng, LAYER_GRAPH};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    entries: Vec<u32>,
}

impl Csr {
    fn from_pairs(n: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (x, _) in pairs.clone() {
            offsets[x as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut entries = vec![0u32; offsets[n]];
        for (x, y) in pairs {
            entries[fill[x as usize]] = y;
            fill[x as usize] += 1;
        }
        Csr { offsets, entries }
    }

    #[inline]
    fn row(&self, x: usize) -> &[u32] {
        &self.entries[self.offsets[x]..self.offsets[x + 1]]
    }
}

/// Vertex-indexed multigraph with integer edge multiplicities `A(x, y)`.
///
/// Undirected graphs store each edge once logically; both endpoints list each
/// other, and a self-loop contributes two entries to its vertex's row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiDigraph {
    n: usize,
    directed: bool,
    out: Csr,
    // None for undirected graphs, where in-rows equal out-rows.
    inc: Option<Csr>,
    edges: usize,
}

impl MultiDigraph {
    /// Build from an edge list; each entry adds one unit of multiplicity.
    pub fn from_edges(n: usize, directed: bool, edges: &[(u32, u32)]) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph must have at least one vertex"));
        }
        if n > u32::MAX as usize {
            return Err(Error::TooLarge { what: "vertex index", n, limit: u32::MAX as usize });
        }
        if let Some(&(x, y)) = edges.iter().find(|&&(x, y)| x as usize >= n || y as usize >= n) {
            return Err(invalid(format!("edge ({x}, {y}) out of range for n = {n}")));
        }
        if directed {
            let out = Csr::from_pairs(n, edges.iter().copied());
            let inc = Csr::from_pairs(n, edges.iter().map(|&(x, y)| (y, x)));
            Ok(MultiDigraph { n, directed, out, inc: Some(inc), edges: edges.len() })
        } else {
            let both = edges.iter().flat_map(|&(x, y)| [(x, y), (y, x)]);
            let out = Csr::from_pairs(n, both);
            Ok(MultiDigraph { n, directed, out, inc: None, edges: edges.len() })
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of edges counted with multiplicity (`m` directed, `ℓ` undirected).
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Stubs out of `x` (the undirected degree counts a self-loop twice).
    #[inline]
    pub fn out_degree(&self, x: usize) -> usize {
        self.out.offsets[x + 1] - self.out.offsets[x]
    }

    #[inline]
    pub fn in_degree(&self, x: usize) -> usize {
        match &self.inc {
            Some(c) => c.offsets[x + 1] - c.offsets[x],
            None => self.out_degree(x),
        }
    }

    /// Out-neighbours of `x`, repeated by multiplicity.
    #[inline]
    pub fn out_neighbors(&self, x: usize) -> &[u32] {
        self.out.row(x)
    }

    /// In-neighbours of `x`, repeated by multiplicity.
    #[inline]
    pub fn in_neighbors(&self, x: usize) -> &[u32] {
        match &self.inc {
            Some(c) => c.row(x),
            None => self.out.row(x),
        }
    }

    /// Row entries of `x` pointing back to `x`.
    pub fn loop_stubs(&self, x: usize) -> usize {
        self.out_neighbors(x).iter().filter(|&&y| y as usize == x).count()
    }

    pub fn multiplicity(&self, x: usize, y: usize) -> usize {
        let c = self.out_neighbors(x).iter().filter(|&&z| z as usize == y).count();
        if !self.directed && x == y {
            c / 2
        } else {
            c
        }
    }

    pub fn min_out_degree(&self) -> usize {
        (0..self.n).map(|x| self.out_degree(x)).min().unwrap_or(0)
    }

    /// Edges with multiplicity, sorted; undirected edges reported once with `src <= dst`.
    pub fn edge_multiplicities(&self) -> Vec<(u32, u32, usize)> {
        let mut out = Vec::new();
        for x in 0..self.n {
            let mut row: Vec<u32> = self.out_neighbors(x).to_vec();
            row.sort_unstable();
            let mut i = 0;
            while i < row.len() {
                let y = row[i];
                let mut j = i;
                while j < row.len() && row[j] == y {
                    j += 1;
                }
                let count = j - i;
                if self.directed || (x as u32) < y {
                    out.push((x as u32, y, count));
                } else if x as u32 == y {
                    out.push((y, y, count / 2));
                }
                i = j;
            }
        }
        out
    }

    /// Per-vertex degrees reconstructed from the adjacency.
    pub fn degree_sequence(&self) -> DegreeSequence {
        let out: Vec<u64> = (0..self.n).map(|x| self.out_degree(x) as u64).collect();
        if self.directed {
            let inn = (0..self.n).map(|x| self.in_degree(x) as u64).collect();
            DegreeSequence::directed(inn, out).expect("edge-derived degrees are balanced")
        } else {
            DegreeSequence::undirected(out).expect("edge-derived degrees are even")
        }
    }

    pub fn is_eulerian(&self) -> bool {
        !self.directed || (0..self.n).all(|x| self.in_degree(x) == self.out_degree(x))
    }

    /// Subgraph induced by `vertices`, relabelled `0..k` in the given order.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<MultiDigraph> {
        let mut index = vec![u32::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i as u32;
        }
        let mut edges = Vec::new();
        for (i, &x) in vertices.iter().enumerate() {
            for &y in self.out_neighbors(x) {
                let j = index[y as usize];
                if j == u32::MAX {
                    continue;
                }
                // undirected rows list each edge from both ends; keep i <= j
                if self.directed || (i as u32) <= j {
                    edges.push((i as u32, j));
                }
            }
        }
        if !self.directed {
            // halve the self-loop entries collected above
            let mut loops_seen = vec![false; vertices.len()];
            edges.retain(|&(a, b)| {
                if a != b {
                    return true;
                }
                loops_seen[a as usize] = !loops_seen[a as usize];
                loops_seen[a as usize]
            });
        }
        MultiDigraph::from_edges(vertices.len(), self.directed, &edges)
    }
}

fn check_stub_budget(total: u64) -> Result<()> {
    let limit = u32::MAX as u64;
    if total > limit {
        return Err(Error::TooLarge { what: "stub count", n: total as usize, limit: limit as usize });
    }
    Ok(())
}

/// Uniform configuration model: a uniform perfect matching of the stubs.
pub fn build_cm(degrees: &DegreeSequence, seed: u64) -> Result<MultiDigraph> {
    build_cm_with(degrees, &mut rng::stream(seed, &[LAYER_GRAPH]))
}

pub fn build_cm_with(degrees: &DegreeSequence, rng: &mut Rng) -> Result<MultiDigraph> {
    if degrees.is_directed() {
        return Err(invalid("build_cm needs an undirected degree sequence"));
    }
    let total = degrees.total_stubs();
    if total % 2 == 1 {
        return Err(Error::NotGraphical(format!("odd stub sum {total}")));
    }
    check_stub_budget(total)?;
    let mut stubs: Vec<u32> = Vec::with_capacity(total as usize);
    for (x, &d) in degrees.deg().iter().enumerate() {
        stubs.extend(std::iter::repeat_n(x as u32, d as usize));
    }
    stubs.shuffle(rng);
    let edges: Vec<(u32, u32)> = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    MultiDigraph::from_edges(degrees.n(), false, &edges)
}

/// Directed configuration model: tails matched to heads by a uniform bijection.
pub fn build_dcm(degrees: &DegreeSequence, seed: u64) -> Result<MultiDigraph> {
    build_dcm_with(degrees, &mut rng::stream(seed, &[LAYER_GRAPH]))
}

pub fn build_dcm_with(degrees: &DegreeSequence, rng: &mut Rng) -> Result<MultiDigraph> {
    if !degrees.is_directed() {
        return Err(invalid("build_dcm needs a directed degree sequence"));
    }
    let total_in: u64 = degrees.in_deg().iter().sum();
    let total_out: u64 = degrees.out_deg().iter().sum();
    if total_in != total_out {
        return Err(Error::NotGraphical(format!("in {total_in} != out {total_out}")));
    }
    check_stub_budget(total_in)?;
    let mut heads: Vec<u32> = Vec::with_capacity(total_in as usize);
    for (x, &d) in degrees.in_deg().iter().enumerate() {
        heads.extend(std::iter::repeat_n(x as u32, d as usize));
    }
    heads.shuffle(rng);
    let tails = degrees.out_deg().iter().enumerate().flat_map(|(x, &d)| std::iter::repeat_n(x as u32, d as usize));
    let edges: Vec<(u32, u32)> = tails.zip(heads).collect();
    MultiDigraph::from_edges(degrees.n(), true, &edges)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentLabeling {
    /// Component id per vertex; ids are ordered by each component's smallest vertex.
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Id of the largest component (smallest id on ties).
    pub largest: usize,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn largest_size(&self) -> usize {
        self.sizes[self.largest]
    }

    pub fn is_connected(&self) -> bool {
        self.sizes.len() == 1
    }

    pub fn vertices_of(&self, component: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&v| self.labels[v] == component).collect()
    }

    pub fn largest_vertices(&self) -> Vec<usize> {
        self.vertices_of(self.largest)
    }

    /// Induced subgraph on the largest component.
    pub fn extract_largest(&self, g: &MultiDigraph) -> Result<MultiDigraph> {
        g.induced_subgraph(&self.largest_vertices())
    }
}

/// Strongly connected components (connected components for undirected graphs).
pub fn strongly_connected_components(g: &MultiDigraph) -> ComponentLabeling {
    let mut pg: DiGraph<(), ()> = DiGraph::with_capacity(g.n(), g.edge_count());
    for _ in 0..g.n() {
        pg.add_node(());
    }
    for x in 0..g.n() {
        for &y in g.out_neighbors(x) {
            // undirected rows already hold both directions
            pg.add_edge(NodeIndex::new(x), NodeIndex::new(y as usize), ());
        }
    }
    let mut comps: Vec<Vec<usize>> =
        tarjan_scc(&pg).into_iter().map(|c| c.into_iter().map(|v| v.index()).collect()).collect();
    for c in &mut comps {
        c.sort_unstable();
    }
    comps.sort_unstable_by_key(|c| c[0]);
    let mut labels = vec![0usize; g.n()];
    for (id, c) in comps.iter().enumerate() {
        for &v in c {
            labels[v] = id;
        }
    }
    let sizes: Vec<usize> = comps.iter().map(Vec::len).collect();
    let largest = (0..sizes.len()).fold(0, |best, i| if sizes[i] > sizes[best] { i } else { best });
    ComponentLabeling { labels, sizes, largest }
}

/// Fail unless `g` is strongly connected.
pub fn require_strongly_connected(g: &MultiDigraph) -> Result<()> {
    let c = strongly_connected_components(g);
    if c.is_connected() {
        Ok(())
    } else {
        Err(Error::NotStronglyConnected { components: c.count() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dseq(inn: &[u64], out: &[u64]) -> DegreeSequence {
        DegreeSequence::directed(inn.to_vec(), out.to_vec()).unwrap()
    }

    #[test]
    fn cm_unique_matchings() {
        let g = build_cm(&DegreeSequence::undirected(vec![1, 1]).unwrap(), 1).unwrap();
        assert_eq!(g.edge_multiplicities(), vec![(0, 1, 1)]);
        let g = build_cm(&DegreeSequence::undirected(vec![2]).unwrap(), 1).unwrap();
        assert_eq!(g.edge_multiplicities(), vec![(0, 0, 1)]);
        assert_eq!(g.out_degree(0), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn cm_four_stub_matching_is_uniform() {
        // three perfect matchings of four single stubs
        let d = DegreeSequence::undirected(vec![1, 1, 1, 1]).unwrap();
        let trials = 30_000;
        let hits = (0..trials)
            .filter(|&s| {
                let g = build_cm(&d, s).unwrap();
                g.multiplicity(0, 1) == 1 && g.multiplicity(2, 3) == 1
            })
            .count();
        let p = hits as f64 / trials as f64;
        assert!((p - 1.0 / 3.0).abs() < 0.015, "p = {p}");
    }

    #[test]
    fn dcm_forced_edges() {
        let g = build_dcm(&dseq(&[0, 1], &[1, 0]), 3).unwrap();
        assert_eq!(g.edge_multiplicities(), vec![(0, 1, 1)]);
        let g = build_dcm(&dseq(&[1], &[1]), 3).unwrap();
        assert_eq!(g.edge_multiplicities(), vec![(0, 0, 1)]);
    }

    #[test]
    fn builders_reject_bad_input() {
        assert!(build_dcm(&DegreeSequence::undirected(vec![1, 1]).unwrap(), 0).is_err());
        assert!(build_cm(&dseq(&[1], &[1]), 0).is_err());
    }

    #[test]
    fn scc_examples() {
        let cycle = MultiDigraph::from_edges(4, true, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(strongly_connected_components(&cycle).sizes, vec![4]);
        let path = MultiDigraph::from_edges(3, true, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(strongly_connected_components(&path).sizes, vec![1, 1, 1]);
        let g = MultiDigraph::from_edges(3, true, &[(0, 1), (1, 0), (1, 2)]).unwrap();
        let c = strongly_connected_components(&g);
        assert_eq!(c.labels, vec![0, 0, 1]);
        assert_eq!(c.largest_vertices(), vec![0, 1]);
        let sub = c.extract_largest(&g).unwrap();
        assert_eq!(sub.edge_multiplicities(), vec![(0, 1, 1), (1, 0, 1)]);
    }

    #[test]
    fn undirected_components_and_loops() {
        let g = MultiDigraph::from_edges(4, false, &[(0, 1), (2, 2), (2, 3), (2, 2)]).unwrap();
        let c = strongly_connected_components(&g);
        assert_eq!(c.sizes, vec![2, 2]);
        assert_eq!(g.out_degree(2), 5);
        assert_eq!(g.multiplicity(2, 2), 2);
        let sub = g.induced_subgraph(&[2, 3]).unwrap();
        assert_eq!(sub.edge_multiplicities(), vec![(0, 0, 2), (0, 1, 1)]);
        assert_eq!(sub.out_degree(0), 5);
    }
}
