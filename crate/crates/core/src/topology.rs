//! Undirected sensor-network graphs: random geometric generation, edge-list
//! I/O and the Laplacian matrices consumed downstream.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numkit::{self, Matrix};

/// Default cap on resampling attempts in [`Topology::random_geometric`].
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("no connected graph with J={sensors}, r={range} after {attempts} attempts")]
    GenerationFailed { sensors: usize, range: f64, attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, TopologyError>;

/// A connected, undirected graph over sensors `0..J`.
///
/// Neighborhoods are sorted ascending by sensor id; that order fixes the
/// slot index of every directed link used by the estimators and by the
/// link-noise selection matrices in the analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Option<Vec<[f64; 2]>>,
    neighbors: Vec<Vec<usize>>,
    /// `reverse_slot[j][k]` is the position of `j` inside the neighborhood of
    /// its `k`-th neighbor.
    reverse_slot: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from an undirected edge list. Edge orientation is
    /// irrelevant; self-loops, duplicates and out-of-range ids are errors, as
    /// is a disconnected graph.
    pub fn from_edges(sensors: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::build(sensors, edges, None)
    }

    fn build(sensors: usize, edges: &[(usize, usize)], positions: Option<Vec<[f64; 2]>>) -> Result<Self> {
        let topo = Self::build_unchecked(sensors, edges, positions)?;
        if !topo.is_connected() {
            return Err(TopologyError::InvalidGraph(format!("graph over {sensors} sensors is not connected")));
        }
        Ok(topo)
    }

    fn build_unchecked(sensors: usize, edges: &[(usize, usize)], positions: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if sensors == 0 {
            return Err(TopologyError::InvalidParameter("a network needs at least one sensor".into()));
        }
        let mut neighbors = vec![Vec::new(); sensors];
        for &(a, b) in edges {
            if a >= sensors || b >= sensors {
                return Err(TopologyError::InvalidGraph(format!("edge ({a}, {b}) references a sensor >= {sensors}")));
            }
            if a == b {
                return Err(TopologyError::InvalidGraph(format!("self-loop at sensor {a}")));
            }
            if neighbors[a].contains(&b) {
                return Err(TopologyError::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        let reverse_slot = neighbors
            .iter()
            .enumerate()
            .map(|(j, nj)| {
                nj.iter()
                    .map(|&k| neighbors[k].binary_search(&j).expect("links are symmetric"))
                    .collect()
            })
            .collect();
        Ok(Self { positions, neighbors, reverse_slot })
    }

    /// Draws `sensors` points uniformly on the unit square and links every
    /// pair within Euclidean distance `range`, resampling until the graph is
    /// connected.
    pub fn random_geometric(sensors: usize, range: f64, seed: u64, max_attempts: usize) -> Result<Self> {
        if sensors == 0 {
            return Err(TopologyError::InvalidParameter("a network needs at least one sensor".into()));
        }
        if !(range > 0.0) {
            return Err(TopologyError::InvalidParameter(format!("communication range must be positive, got {range}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..max_attempts {
            let points: Vec<[f64; 2]> = (0..sensors).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
            let topo = Self::geometric_from_positions_unchecked(points, range)?;
            if topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(TopologyError::GenerationFailed { sensors, range, attempts: max_attempts })
    }

    /// Geometric graph over fixed positions; fails if it is not connected.
    pub fn geometric_from_positions(positions: Vec<[f64; 2]>, range: f64) -> Result<Self> {
        let topo = Self::geometric_from_positions_unchecked(positions, range)?;
        if !topo.is_connected() {
            return Err(TopologyError::InvalidGraph("geometric graph is not connected".into()));
        }
        Ok(topo)
    }

    fn geometric_from_positions_unchecked(positions: Vec<[f64; 2]>, range: f64) -> Result<Self> {
        let n = positions.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                if (dx * dx + dy * dy).sqrt() <= range {
                    edges.push((i, j));
                }
            }
        }
        Self::build_unchecked(n, &edges, Some(positions))
    }

    pub fn complete(sensors: usize) -> Result<Self> {
        let edges: Vec<_> = (0..sensors).flat_map(|i| (i + 1..sensors).map(move |j| (i, j))).collect();
        Self::from_edges(sensors, &edges)
    }

    pub fn path(sensors: usize) -> Result<Self> {
        let edges: Vec<_> = (1..sensors).map(|i| (i - 1, i)).collect();
        Self::from_edges(sensors, &edges)
    }

    pub fn ring(sensors: usize) -> Result<Self> {
        if sensors < 3 {
            return Self::path(sensors);
        }
        let edges: Vec<_> = (0..sensors).map(|i| (i.min((i + 1) % sensors), i.max((i + 1) % sensors))).collect();
        Self::from_edges(sensors, &edges)
    }

    pub fn sensor_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// Sorted neighborhood `N_j`.
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.neighbors[j].len()
    }

    /// Position of `j` inside the neighborhood of `neighbors(j)[slot]`.
    pub fn reverse_slot(&self, j: usize, slot: usize) -> usize {
        self.reverse_slot[j][slot]
    }

    /// Total number of directed links, `Σ_j |N_j|`.
    pub fn directed_link_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Undirected edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    pub fn adjacency(&self) -> Matrix {
        let n = self.sensor_count();
        let mut a = Matrix::zeros(n, n);
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                a[(i, j)] = 1.0;
            }
        }
        a
    }

    /// Graph Laplacian `D − A`.
    pub fn laplacian(&self) -> Matrix {
        let mut l = -self.adjacency();
        for j in 0..self.sensor_count() {
            l[(j, j)] = self.degree(j) as f64;
        }
        l
    }

    /// Second-smallest Laplacian eigenvalue (zero for `J = 1`).
    pub fn algebraic_connectivity(&self) -> f64 {
        if self.sensor_count() < 2 {
            return 0.0;
        }
        numkit::symmetric_eigenvalues(&self.laplacian()).expect("Laplacian is finite and square")[1]
    }

    pub fn is_connected(&self) -> bool {
        let n = self.sensor_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(j) = queue.pop_front() {
            for &k in &self.neighbors[j] {
                if !seen[k] {
                    seen[k] = true;
                    count += 1;
                    queue.push_back(k);
                }
            }
        }
        count == n
    }

    /// `(c/2) L ⊗ I_p`.
    pub fn scaled_laplacian(&self, c: f64, p: usize) -> Result<ScaledLaplacian> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(TopologyError::InvalidParameter(format!("penalty coefficient must be positive, got {c}")));
        }
        if p == 0 {
            return Err(TopologyError::InvalidParameter("parameter dimension must be at least 1".into()));
        }
        let matrix = numkit::kron(&self.laplacian(), &Matrix::identity(p, p)) * (c / 2.0);
        Ok(ScaledLaplacian { c, p, matrix })
    }

    /// Serialises to the edge-list text format: a first line holding `J`,
    /// then one `i j` pair (0-based, `i < j`) per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.sensor_count());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses the edge-list text format. Blank lines and `#` comments are
    /// ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (first_line, header) = lines.next().ok_or(TopologyError::Parse { line: 1, msg: "empty edge list".into() })?;
        let sensors: usize = header.parse().map_err(|_| TopologyError::Parse {
            line: first_line,
            msg: format!("expected sensor count, found {header:?}"),
        })?;
        // Keeps a hostile header from requesting an absurd allocation.
        if sensors > 1_000_000 {
            return Err(TopologyError::Parse { line: first_line, msg: format!("sensor count {sensors} is too large") });
        }
        let mut edges = Vec::new();
        for (line, content) in lines {
            let mut parts = content.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                let tok = tok.ok_or(TopologyError::Parse { line, msg: "expected two sensor ids".into() })?;
                tok.parse().map_err(|_| TopologyError::Parse { line, msg: format!("invalid sensor id {tok:?}") })
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(TopologyError::Parse { line, msg: "trailing tokens after edge".into() });
            }
            if i >= j {
                return Err(TopologyError::Parse { line, msg: format!("edge ({i}, {j}) must satisfy i < j") });
            }
            edges.push((i, j));
        }
        Self::from_edges(sensors, &edges)
    }
}

/// `(c/2) L ⊗ I_p`, together with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLaplacian {
    pub c: f64,
    pub p: usize,
    pub matrix: Matrix,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::from_row_major;

    #[test]
    fn two_forced_positions_give_one_edge() {
        let t = Topology::geometric_from_positions(vec![[0.0, 0.0], [0.1, 0.0]], 0.3).unwrap();
        assert_eq!(t.edges(), vec![(0, 1)]);
        assert!(t.is_connected());
    }

    #[test]
    fn single_sensor_is_trivially_connected() {
        let t = Topology::random_geometric(1, 0.3, 0, 1).unwrap();
        assert!(t.neighbors(0).is_empty());
        assert_eq!(t.laplacian(), Matrix::zeros(1, 1));
    }

    #[test]
    fn fifteen_sensor_geometric_graph() {
        let t = Topology::random_geometric(15, 0.3, 2010, DEFAULT_MAX_ATTEMPTS).unwrap();
        let l = t.laplacian();
        let ones = crate::numkit::Vector::from_element(15, 1.0);
        assert!((&l * ones).norm() < 1e-14);
        assert!(t.algebraic_connectivity() > 1e-12);
        assert_eq!(t.positions().unwrap().len(), 15);
    }

    #[test]
    fn generation_failure_names_parameters() {
        let err = Topology::random_geometric(30, 0.01, 1, 5).unwrap_err();
        assert_eq!(err, TopologyError::GenerationFailed { sensors: 30, range: 0.01, attempts: 5 });
        assert!(err.to_string().contains("J=30"));
    }

    #[test]
    fn path_laplacian() {
        let l = Topology::path(3).unwrap().laplacian();
        let expect = from_row_major(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]).unwrap();
        assert_eq!(l, expect);
    }

    #[test]
    fn complete_graph_spectrum() {
        let eig = numkit::symmetric_eigenvalues(&Topology::complete(3).unwrap().laplacian()).unwrap();
        assert!(eig[0].abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12 && (eig[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exactly_one_zero_eigenvalue() {
        for seed in 0..5 {
            let t = Topology::random_geometric(8, 0.5, seed, DEFAULT_MAX_ATTEMPTS).unwrap();
            let eig = numkit::symmetric_eigenvalues(&t.laplacian()).unwrap();
            assert_eq!(eig.iter().filter(|x| x.abs() < 1e-10).count(), 1);
        }
    }

    #[test]
    fn scaled_laplacian_cases() {
        let k2 = Topology::complete(2).unwrap().scaled_laplacian(2.0, 1).unwrap();
        assert_eq!(k2.matrix, from_row_major(2, 2, &[1.0, -1.0, -1.0, 1.0]).unwrap());

        let path = Topology::path(3).unwrap();
        let lc = path.scaled_laplacian(0.1, 2).unwrap();
        // independent Kronecker evaluation: entry (2i+a, 2j+b) = 0.05 L_ij δ_ab
        let l = path.laplacian();
        for r in 0..6 {
            for c in 0..6 {
                let expect = if r % 2 == c % 2 { 0.05 * l[(r / 2, c / 2)] } else { 0.0 };
                assert!((lc.matrix[(r, c)] - expect).abs() < 1e-15);
            }
        }
        assert!(path.scaled_laplacian(0.0, 2).is_err());
        assert!(path.scaled_laplacian(-1.0, 2).is_err());
    }

    #[test]
    fn scaled_laplacian_nullspace_dimension() {
        let t = Topology::random_geometric(6, 0.6, 9, DEFAULT_MAX_ATTEMPTS).unwrap();
        for p in 1..=3 {
            let lc = t.scaled_laplacian(0.7, p).unwrap();
            let eig = numkit::symmetric_eigenvalues(&lc.matrix).unwrap();
            assert_eq!(eig.iter().filter(|x| x.abs() < 1e-10).count(), p);
        }
    }

    #[test]
    fn edge_list_roundtrip_and_errors() {
        let t = Topology::random_geometric(10, 0.45, 4, DEFAULT_MAX_ATTEMPTS).unwrap();
        let text = t.to_edge_list();
        let back = Topology::parse_edge_list(&text).unwrap();
        assert_eq!(back.edges(), t.edges());

        assert!(matches!(Topology::parse_edge_list(""), Err(TopologyError::Parse { .. })));
        assert!(matches!(Topology::parse_edge_list("3\n0 1\n1 1\n"), Err(TopologyError::Parse { line: 3, .. })));
        assert!(matches!(Topology::parse_edge_list("3\n0 1\n"), Err(TopologyError::InvalidGraph(_))));
        assert!(matches!(Topology::parse_edge_list("2\n0 x\n"), Err(TopologyError::Parse { line: 2, .. })));
        assert!(matches!(Topology::parse_edge_list("2\n0 1\n0 1\n"), Err(TopologyError::InvalidGraph(_))));
        assert!(Topology::parse_edge_list("# header\n2\n\n0 1   # link\n").is_ok());
    }

    #[test]
    fn reverse_slots_point_back() {
        let t = Topology::random_geometric(12, 0.4, 17, DEFAULT_MAX_ATTEMPTS).unwrap();
        for j in 0..12 {
            for (k, &nb) in t.neighbors(j).iter().enumerate() {
                assert_eq!(t.neighbors(nb)[t.reverse_slot(j, k)], j);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn generated_graphs_are_well_formed(sensors in 1usize..20, range in 0.35f64..0.9, seed in any::<u64>()) {
                let t = Topology::random_geometric(sensors, range, seed, DEFAULT_MAX_ATTEMPTS).unwrap();
                let a = t.adjacency();
                prop_assert_eq!(&a, &a.transpose());
                for j in 0..sensors {
                    prop_assert_eq!(a[(j, j)], 0.0);
                    prop_assert!(t.neighbors(j).windows(2).all(|w| w[0] < w[1]));
                    for &k in t.neighbors(j) {
                        prop_assert!(t.neighbors(k).contains(&j));
                    }
                }
                let l = t.laplacian();
                for r in 0..sensors {
                    prop_assert!(l.row(r).sum().abs() < 1e-14);
                }
                if sensors > 1 {
                    prop_assert!(t.algebraic_connectivity() > 1e-12);
                }
                prop_assert_eq!(t.directed_link_count(), 2 * t.edges().len());
                let again = Topology::random_geometric(sensors, range, seed, DEFAULT_MAX_ATTEMPTS).unwrap();
                prop_assert_eq!(again, t);
            }
        }
    }
}
