//! Oriented circuit graph, spanning tree / cotree selection and the
//! fundamental cut-set and loop matrices.
//!
//! Generalized coordinates are the tree-branch fluxes (cut-set fluxes) and
//! the link charges (loop charges). Every branch flux is `Qᵀ Φ_tree` and
//! every branch charge is `Bᵀ q_link`, so both Kirchhoff laws hold for any
//! coordinate values and no multiplier unknowns are needed.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{Circuit, ElementKind};
use crate::error::TopologyError;

/// Nodes × branches graph; node 0 is ground whenever the circuit has one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedGraph {
    pub nodes: Vec<String>,
    /// `(from, to)` node indices per branch, one branch per element.
    pub branches: Vec<(usize, usize)>,
}

impl OrientedGraph {
    /// Incidence matrix, `+1` where a branch leaves a node and `-1` where
    /// it enters.
    pub fn incidence(&self) -> Vec<Vec<i64>> {
        let mut a = vec![vec![0i64; self.branches.len()]; self.nodes.len()];
        for (b, &(from, to)) in self.branches.iter().enumerate() {
            a[from][b] = 1;
            a[to][b] = -1;
        }
        a
    }

    fn adjacency(&self, keep: impl Fn(usize) -> bool) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (b, &(from, to)) in self.branches.iter().enumerate() {
            if keep(b) {
                adj[from].push((to, b));
                adj[to].push((from, b));
            }
        }
        adj
    }
}

pub fn build_graph(circuit: &Circuit) -> OrientedGraph {
    let nodes: Vec<String> = circuit.nodes().to_vec();
    let index = |name: &str| nodes.iter().position(|n| n == name).unwrap();
    let branches = circuit
        .elements()
        .iter()
        .map(|e| (index(&e.n_plus), index(&e.n_minus)))
        .collect();
    OrientedGraph { nodes, branches }
}

/// Nodes that cannot reach ground through elements accepted by `keep`
/// (voltage sources always count as connections).
pub(crate) fn unreachable_nodes(
    circuit: &Circuit,
    keep: impl Fn(&ElementKind) -> bool,
) -> Vec<String> {
    if !circuit.has_ground() {
        return circuit.nodes().to_vec();
    }
    let graph = build_graph(circuit);
    let elements = circuit.elements();
    let adj = graph.adjacency(|b| {
        matches!(elements[b].kind, ElementKind::VoltageSource(_)) || keep(&elements[b].kind)
    });
    let mut seen = vec![false; graph.nodes.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(n) = queue.pop_front() {
        for &(m, _) in &adj[n] {
            if !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    graph
        .nodes
        .iter()
        .zip(seen)
        .filter(|(_, s)| !s)
        .map(|(n, _)| n.clone())
        .collect()
}

/// Tree selection priority; lower enters the tree first.
fn priority(kind: &ElementKind) -> u8 {
    match kind {
        ElementKind::VoltageSource(_) => 0,
        ElementKind::Capacitor(_) | ElementKind::OutputCapacitor { .. } => 1,
        ElementKind::Resistor { .. } => 2,
        ElementKind::FracMemristor { .. } => 3,
        ElementKind::Inductor(_) => 4,
        ElementKind::CurrentSource(_) => 5,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeCotree {
    /// Tree branch indices, ascending.
    pub tree: Vec<usize>,
    /// Link branch indices, ascending.
    pub cotree: Vec<usize>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Kruskal over branches sorted by element priority, ties broken by
/// declaration order.
pub fn select_tree(graph: &OrientedGraph, circuit: &Circuit) -> Result<TreeCotree, TopologyError> {
    if !circuit.has_ground() {
        return Err(TopologyError::NoGround);
    }
    let elements = circuit.elements();
    let mut order: Vec<usize> = (0..graph.branches.len()).collect();
    order.sort_by_key(|&b| (priority(&elements[b].kind), b));
    let mut sets = DisjointSet::new(graph.nodes.len());
    let mut in_tree = vec![false; graph.branches.len()];
    for b in order {
        let (from, to) = graph.branches[b];
        if sets.union(from, to) {
            in_tree[b] = true;
        }
    }
    let tree: Vec<usize> = (0..in_tree.len()).filter(|&b| in_tree[b]).collect();
    let cotree: Vec<usize> = (0..in_tree.len()).filter(|&b| !in_tree[b]).collect();
    if tree.len() + 1 != graph.nodes.len() {
        let root = sets.find(0);
        let floating = (0..graph.nodes.len())
            .filter(|&n| sets.find(n) != root)
            .map(|n| graph.nodes[n].clone())
            .collect();
        return Err(TopologyError::Floating(floating));
    }
    let partition = TreeCotree { tree, cotree };
    let loops = fundamental_loops(graph, &partition);
    let name = |b: usize| elements[b].name.clone();
    for (row, &link) in partition.cotree.iter().enumerate() {
        if matches!(elements[link].kind, ElementKind::VoltageSource(_)) {
            // every tree branch in this loop outranks or ties a source
            let members = (0..graph.branches.len())
                .filter(|&b| loops[row][b] != 0)
                .map(name)
                .collect();
            return Err(TopologyError::VoltageLoop(members));
        }
    }
    for (k, &tb) in partition.tree.iter().enumerate() {
        if matches!(elements[tb].kind, ElementKind::CurrentSource(_)) {
            let mut members = vec![name(tb)];
            for (row, &link) in partition.cotree.iter().enumerate() {
                if loops[row][partition.tree[k]] != 0 {
                    members.push(name(link));
                }
            }
            return Err(TopologyError::CurrentCutset(members));
        }
    }
    Ok(partition)
}

/// Fundamental loop matrix rows, one per link, oriented along the link.
fn fundamental_loops(graph: &OrientedGraph, partition: &TreeCotree) -> Vec<Vec<i64>> {
    let n = graph.nodes.len();
    let mut is_tree = vec![false; graph.branches.len()];
    for &b in &partition.tree {
        is_tree[b] = true;
    }
    let adj = graph.adjacency(|b| is_tree[b]);
    // BFS from ground: parent node and parent branch.
    let mut parent = vec![usize::MAX; n];
    let mut parent_branch = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &(v, b) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = u;
                parent_branch[v] = b;
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let nb = graph.branches.len();
    partition
        .cotree
        .iter()
        .map(|&link| {
            let mut row = vec![0i64; nb];
            row[link] = 1;
            let (from, to) = graph.branches[link];
            // close the loop by walking the tree from `to` back to `from`
            let mut a = to;
            let mut z = from;
            let mut tail: Vec<(usize, i64)> = Vec::new();
            while a != z {
                if depth[a] >= depth[z] {
                    // traverse a -> parent[a]
                    let b = parent_branch[a];
                    let sign = if graph.branches[b].0 == a { 1 } else { -1 };
                    row[b] += sign;
                    a = parent[a];
                } else {
                    // traverse parent[z] -> z, recorded in reverse
                    let b = parent_branch[z];
                    let sign = if graph.branches[b].1 == z { 1 } else { -1 };
                    tail.push((b, sign));
                    z = parent[z];
                }
            }
            for (b, sign) in tail {
                row[b] += sign;
            }
            row
        })
        .collect()
}

/// Fundamental cut-set matrix `Q` and loop matrix `B`, exact integers,
/// columns indexed by branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KirchhoffMatrices {
    /// One row per tree branch (in `TreeCotree::tree` order).
    pub q: Vec<Vec<i64>>,
    /// One row per link (in `TreeCotree::cotree` order).
    pub b: Vec<Vec<i64>>,
}

impl KirchhoffMatrices {
    /// `Q · Bᵀ`, which vanishes identically.
    pub fn orthogonality(&self) -> Vec<Vec<i64>> {
        self.q
            .iter()
            .map(|qr| {
                self.b
                    .iter()
                    .map(|br| qr.iter().zip(br).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect()
    }
}

pub fn kirchhoff_matrices(graph: &OrientedGraph, partition: &TreeCotree) -> KirchhoffMatrices {
    let b = fundamental_loops(graph, partition);
    let nb = graph.branches.len();
    let q = partition
        .tree
        .iter()
        .map(|&tb| {
            let mut row = vec![0i64; nb];
            row[tb] = 1;
            for (l, &link) in partition.cotree.iter().enumerate() {
                row[link] = -b[l][tb];
            }
            row
        })
        .collect();
    KirchhoffMatrices { q, b }
}

/// Linear map from generalized coordinates to branch quantities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateMap {
    /// Branch index behind each cut-set flux coordinate.
    pub cutset_flux_coords: Vec<usize>,
    /// Branch index behind each loop charge coordinate.
    pub loop_charge_coords: Vec<usize>,
    /// Per branch: `(cut-set coordinate, coefficient)` terms of its flux.
    pub flux_terms: Vec<Vec<(usize, i64)>>,
    /// Per branch: `(loop coordinate, coefficient)` terms of its charge.
    pub charge_terms: Vec<Vec<(usize, i64)>>,
    pub matrices: KirchhoffMatrices,
}

impl CoordinateMap {
    pub fn branch_count(&self) -> usize {
        self.flux_terms.len()
    }

    pub fn coordinate_count(&self) -> usize {
        self.cutset_flux_coords.len() + self.loop_charge_coords.len()
    }

    /// Branch fluxes (or voltages) from cut-set coordinate values.
    pub fn branch_fluxes(&self, cutset: &[f64]) -> Vec<f64> {
        self.flux_terms
            .iter()
            .map(|terms| terms.iter().map(|&(k, c)| c as f64 * cutset[k]).sum())
            .collect()
    }

    /// Branch charges (or currents) from loop coordinate values.
    pub fn branch_charges(&self, loops: &[f64]) -> Vec<f64> {
        self.charge_terms
            .iter()
            .map(|terms| terms.iter().map(|&(l, c)| c as f64 * loops[l]).sum())
            .collect()
    }

    /// `B · v`: one KVL residual per loop.
    pub fn kvl_residual(&self, branch_voltages: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrices.b, branch_voltages)
    }

    /// `Q · i`: one KCL residual per cut-set.
    pub fn kcl_residual(&self, branch_currents: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrices.q, branch_currents)
    }

    /// Cut-set coordinate index for a tree branch.
    pub fn cutset_of(&self, branch: usize) -> Option<usize> {
        self.cutset_flux_coords.iter().position(|&b| b == branch)
    }

    /// Loop coordinate index for a link.
    pub fn loop_of(&self, branch: usize) -> Option<usize> {
        self.loop_charge_coords.iter().position(|&b| b == branch)
    }
}

fn mat_vec(m: &[Vec<i64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(&c, &v)| c as f64 * v).sum())
        .collect()
}

pub fn coordinate_map(partition: &TreeCotree, matrices: &KirchhoffMatrices) -> CoordinateMap {
    let nb = partition.tree.len() + partition.cotree.len();
    let column = |m: &[Vec<i64>], b: usize| -> Vec<(usize, i64)> {
        m.iter()
            .enumerate()
            .filter(|(_, row)| row[b] != 0)
            .map(|(k, row)| (k, row[b]))
            .collect()
    };
    CoordinateMap {
        cutset_flux_coords: partition.tree.clone(),
        loop_charge_coords: partition.cotree.clone(),
        flux_terms: (0..nb).map(|b| column(&matrices.q, b)).collect(),
        charge_terms: (0..nb).map(|b| column(&matrices.b, b)).collect(),
        matrices: matrices.clone(),
    }
}

/// Graph, partition and coordinate map of one circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub graph: OrientedGraph,
    pub partition: TreeCotree,
    pub coords: CoordinateMap,
}

impl Topology {
    pub fn analyze(circuit: &Circuit) -> Result<Self, TopologyError> {
        let graph = build_graph(circuit);
        let partition = select_tree(&graph, circuit)?;
        let matrices = kirchhoff_matrices(&graph, &partition);
        let coords = coordinate_map(&partition, &matrices);
        Ok(Self {
            graph,
            partition,
            coords,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ConstitutiveSpec, Element, LossCoupling, Waveform};
    use alloc::string::ToString;

    fn res(name: &str, a: &str, b: &str) -> Element {
        Element::new(
            name,
            a,
            b,
            ElementKind::Resistor {
                conductance: 1.0,
                trainable: false,
            },
        )
    }

    fn cap(name: &str, a: &str, b: &str) -> Element {
        Element::new(
            name,
            a,
            b,
            ElementKind::Capacitor(ConstitutiveSpec::linear(1.0).unwrap()),
        )
    }

    fn vsrc(name: &str, a: &str, b: &str) -> Element {
        Element::new(name, a, b, ElementKind::VoltageSource(Waveform::Const(1.0)))
    }

    fn circuit(e: Vec<Element>) -> Circuit {
        Circuit::new(e, LossCoupling::default()).unwrap()
    }

    fn series_rc() -> Circuit {
        circuit(vec![vsrc("v", "1", "0"), res("r", "1", "2"), cap("c", "2", "0")])
    }

    #[test]
    fn single_resistor_graph() {
        let c = circuit(vec![res("r", "a", "0")]);
        let g = build_graph(&c);
        assert_eq!(g.nodes.len(), 2);
        // ground is node 0, `a` is node 1
        assert_eq!(g.incidence(), vec![vec![-1], vec![1]]);
        let p = select_tree(&g, &c).unwrap();
        assert_eq!(p.tree, vec![0]);
        assert!(p.cotree.is_empty());
    }

    #[test]
    fn series_rc_partition_and_loop() {
        let c = series_rc();
        let g = build_graph(&c);
        assert_eq!((g.nodes.len(), g.branches.len()), (3, 3));
        let p = select_tree(&g, &c).unwrap();
        assert_eq!(p.tree, vec![0, 2]);
        assert_eq!(p.cotree, vec![1]);
        let m = kirchhoff_matrices(&g, &p);
        // loop through v (against), r, c
        assert_eq!(m.b, vec![vec![-1, 1, 1]]);
        assert!(m.orthogonality().iter().flatten().all(|&x| x == 0));
        let cm = coordinate_map(&p, &m);
        let charges = cm.branch_charges(&[0.7]);
        assert_eq!(charges, vec![-0.7, 0.7, 0.7]);
    }

    #[test]
    fn star_has_no_loops() {
        let c = circuit(vec![res("a", "x", "0"), res("b", "x", "y")]);
        let t = Topology::analyze(&c).unwrap();
        assert_eq!(t.coords.matrices.q.len(), 2);
        assert!(t.coords.matrices.b.is_empty());
        assert!(t.coords.loop_charge_coords.is_empty());
        assert_eq!(t.coords.branch_fluxes(&[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn voltage_loop_is_degenerate() {
        let c = circuit(vec![vsrc("v1", "1", "0"), vsrc("v2", "1", "0")]);
        let g = build_graph(&c);
        assert_eq!(
            select_tree(&g, &c),
            Err(TopologyError::VoltageLoop(vec!["v1".to_string(), "v2".to_string()]))
        );
    }

    #[test]
    fn current_cutset_is_degenerate() {
        let c = circuit(vec![
            res("r", "1", "0"),
            Element::new("i", "1", "2", ElementKind::CurrentSource(Waveform::Const(1.0))),
        ]);
        let g = build_graph(&c);
        assert!(matches!(
            select_tree(&g, &c),
            Err(TopologyError::CurrentCutset(_))
        ));
    }

    #[test]
    fn kvl_holds_for_any_coordinates() {
        let c = circuit(vec![
            vsrc("v", "1", "0"),
            res("a", "1", "2"),
            res("b", "2", "0"),
            cap("c", "2", "3"),
            res("d", "3", "0"),
            res("e", "1", "3"),
        ]);
        let t = Topology::analyze(&c).unwrap();
        let cut: Vec<f64> = (0..t.coords.cutset_flux_coords.len())
            .map(|k| 0.3 * k as f64 - 1.1)
            .collect();
        let v = t.coords.branch_fluxes(&cut);
        assert!(t.coords.kvl_residual(&v).iter().all(|r| r.abs() < 1e-14));
        let lp: Vec<f64> = (0..t.coords.loop_charge_coords.len())
            .map(|k| 0.7 - k as f64)
            .collect();
        let i = t.coords.branch_charges(&lp);
        assert!(t.coords.kcl_residual(&i).iter().all(|r| r.abs() < 1e-14));
        assert_eq!(t.coords.coordinate_count(), c.elements().len());
    }

    #[test]
    fn selection_is_deterministic() {
        let c = series_rc();
        assert_eq!(Topology::analyze(&c), Topology::analyze(&c));
    }
}
