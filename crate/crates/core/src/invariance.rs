//! Strongly connected components, the non-leaving set `I⁺(G)` and graph
//! products.
//!
//! A component is nontrivial when it has at least two vertices or a self-loop.
//! `I⁺(G)` holds the vertices of nontrivial components together with every
//! vertex that can reach one of them, i.e. the start points of infinite paths.

use alloc::vec::Vec;

use crate::cellset::CellSet;
use crate::error::{Error, Result};
use crate::grid::CellGrid;
use crate::symbolic_image::{Csr, SymbolicImage};

const UNVISITED: u32 = u32::MAX;

/// SCC labelling of a graph. Components are numbered in the order Tarjan's
/// method completes them, which is a reverse topological order.
#[derive(Clone, Debug)]
pub struct SccDecomposition {
    labels: Vec<u32>,
    nontrivial: Vec<bool>,
}

impl SccDecomposition {
    pub fn count(&self) -> usize {
        self.nontrivial.len()
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.labels[v] as usize
    }

    pub fn is_nontrivial(&self, component: usize) -> bool {
        self.nontrivial[component]
    }

    /// Members of every component, each sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.count()];
        for (v, &c) in self.labels.iter().enumerate() {
            out[c as usize].push(v);
        }
        out
    }

    pub fn nontrivial_components(&self) -> Vec<Vec<usize>> {
        self.components()
            .into_iter()
            .enumerate()
            .filter(|(c, _)| self.nontrivial[*c])
            .map(|(_, m)| m)
            .collect()
    }

    /// Vertices lying in nontrivial components.
    pub fn nontrivial_vertices(&self) -> CellSet {
        let mut s = CellSet::new(self.labels.len());
        for (v, &c) in self.labels.iter().enumerate() {
            if self.nontrivial[c as usize] {
                s.insert(v);
            }
        }
        s
    }
}

pub fn scc(g: &SymbolicImage) -> SccDecomposition {
    scc_csr(g.csr())
}

/// Iterative Tarjan: one pass, explicit call stack, linear in `V + E`.
pub fn scc_csr(g: &Csr) -> SccDecomposition {
    let n = g.num_vertices();
    let mut index = alloc::vec![UNVISITED; n];
    let mut low = alloc::vec![0u32; n];
    let mut labels = alloc::vec![UNVISITED; n];
    let mut on_stack = CellSet::new(n);
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, u32)> = Vec::new();
    let mut sizes: Vec<u32> = Vec::new();
    let mut next = 0u32;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root as u32);
        on_stack.insert(root);
        call.push((root as u32, 0));
        while let Some(frame) = call.last_mut() {
            let v = frame.0 as usize;
            let succ = g.successors(v);
            if (frame.1 as usize) < succ.len() {
                let w = succ[frame.1 as usize] as usize;
                frame.1 += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w as u32);
                    on_stack.insert(w);
                    call.push((w as u32, 0));
                } else if on_stack.contains(w) {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(p, _)) = call.last() {
                let p = p as usize;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                let c = sizes.len() as u32;
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("tarjan stack underflow") as usize;
                    on_stack.remove(w);
                    labels[w] = c;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                sizes.push(size);
            }
        }
    }

    let mut nontrivial: Vec<bool> = sizes.iter().map(|&s| s >= 2).collect();
    for (v, &l) in labels.iter().enumerate() {
        let c = l as usize;
        if !nontrivial[c] && g.has_edge(v, v) {
            nontrivial[c] = true;
        }
    }
    SccDecomposition { labels, nontrivial }
}

/// Vertices that reach `seeds` (including the seeds), by breadth-first
/// search over the reverse adjacency.
pub fn backward_reachable(reverse: &Csr, seeds: &CellSet) -> CellSet {
    let mut seen = seeds.clone();
    let mut queue: Vec<u32> = seeds.iter().map(|v| v as u32).collect();
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head] as usize;
        head += 1;
        for &p in reverse.successors(v) {
            if seen.insert(p as usize) {
                queue.push(p);
            }
        }
    }
    seen
}

/// Non-leaving cells `I⁺(G)`.
pub fn i_plus(g: &SymbolicImage) -> CellSet {
    match g.reverse() {
        Some(rev) => i_plus_with_reverse(g.csr(), rev),
        None => i_plus_csr(g.csr()),
    }
}

pub fn i_plus_csr(g: &Csr) -> CellSet {
    i_plus_with_reverse(g, &g.transpose())
}

fn i_plus_with_reverse(g: &Csr, reverse: &Csr) -> CellSet {
    let seeds = scc_csr(g).nontrivial_vertices();
    backward_reachable(reverse, &seeds)
}

fn product_grid(g1: &CellGrid, g2: &CellGrid) -> Result<CellGrid> {
    let mut divisions = g1.divisions().to_vec();
    divisions.extend_from_slice(g2.divisions());
    CellGrid::new(g1.domain().product(g2.domain()), divisions)
}

fn check_product_size(g1: &Csr, g2: &Csr, edges: u128) -> Result<()> {
    let limit = u32::MAX as u128;
    let vertices = g1.num_vertices() as u128 * g2.num_vertices() as u128;
    let requested = vertices.max(edges);
    if requested > limit || requested > usize::MAX as u128 {
        return Err(Error::GridTooLarge { requested, limit });
    }
    Ok(())
}

/// Cartesian product `G₁ □ G₂`: one coordinate moves along its own edge while
/// the other stays put. Vertex `(a, b)` is `a·|V₂| + b`, the row-major index on
/// the concatenated grid.
pub fn cartesian_product(g1: &SymbolicImage, g2: &SymbolicImage) -> Result<SymbolicImage> {
    let (c1, c2) = (g1.csr(), g2.csr());
    let edges = c1.num_vertices() as u128 * c2.num_edges() as u128 + c2.num_vertices() as u128 * c1.num_edges() as u128;
    check_product_size(c1, c2, edges)?;
    let grid = product_grid(g1.grid(), g2.grid())?;
    let n2 = c2.num_vertices();
    let mut list = Vec::with_capacity(edges as usize);
    for a in 0..c1.num_vertices() {
        for b in 0..n2 {
            let s = a * n2 + b;
            for &bb in c2.successors(b) {
                list.push((s, a * n2 + bb as usize));
            }
            for &aa in c1.successors(a) {
                list.push((s, aa as usize * n2 + b));
            }
        }
    }
    SymbolicImage::new(grid, Csr::from_edges(c1.num_vertices() * n2, &list))
}

/// Tensor product `G₁ × G₂`: both coordinates move at once. For a decoupled
/// system on a product grid this is exactly the centralized symbolic image.
pub fn tensor_product(g1: &SymbolicImage, g2: &SymbolicImage) -> Result<SymbolicImage> {
    let (c1, c2) = (g1.csr(), g2.csr());
    let edges = c1.num_edges() as u128 * c2.num_edges() as u128;
    check_product_size(c1, c2, edges)?;
    let grid = product_grid(g1.grid(), g2.grid())?;
    let n2 = c2.num_vertices();
    let mut list = Vec::with_capacity(edges as usize);
    for (a, aa) in c1.edges() {
        for (b, bb) in c2.edges() {
            list.push((a * n2 + b, aa * n2 + bb));
        }
    }
    SymbolicImage::new(grid, Csr::from_edges(c1.num_vertices() * n2, &list))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::quantize;
    use crate::interval::IntervalBox;
    use alloc::vec;

    fn graph(n: usize, edges: &[(usize, usize)]) -> SymbolicImage {
        let grid = quantize(&IntervalBox::cube(1, 0.0, n as f64), &[n]).unwrap();
        SymbolicImage::from_edges(grid, edges).unwrap()
    }

    #[test]
    fn components_and_nontrivial() {
        // vertices 1..3 of the textbook example mapped to 0..2
        let g = graph(3, &[(0, 1), (1, 0), (2, 0)]);
        let s = scc(&g);
        let mut comps = s.components();
        comps.sort();
        assert_eq!(comps, vec![vec![0, 1], vec![2]]);
        assert_eq!(s.nontrivial_components(), vec![vec![0, 1]]);

        let g = graph(1, &[(0, 0)]);
        assert_eq!(scc(&g).nontrivial_components(), vec![vec![0]]);

        let g = graph(4, &[]);
        assert!(scc(&g).nontrivial_components().is_empty());
        assert!(i_plus(&g).is_empty());
    }

    #[test]
    fn i_plus_examples() {
        let g = graph(5, &[(0, 1), (1, 0), (2, 0), (3, 4)]);
        assert_eq!(i_plus(&g).to_vec(), vec![0, 1, 2]);
        let g = graph(4, &[(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(i_plus(&g).len(), 4);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.push((n - 1, n - 2));
        let g = graph(n, &edges);
        assert_eq!(i_plus(&g).len(), n);
        assert_eq!(scc(&g).count(), n - 1);
    }

    #[test]
    fn self_loop_product() {
        let a = graph(1, &[(0, 0)]);
        let b = graph(1, &[(0, 0)]);
        let p = cartesian_product(&a, &b).unwrap();
        assert_eq!(p.num_vertices(), 1);
        assert_eq!(p.csr().edges().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn cartesian_edge_count() {
        let a = graph(3, &[(0, 1), (1, 2), (2, 2)]);
        let b = graph(4, &[(0, 1), (3, 0)]);
        let p = cartesian_product(&a, &b).unwrap();
        assert_eq!(p.num_edges(), 3 * 2 + 4 * 3);
        assert_eq!(p.grid().dim(), 2);
    }
}
