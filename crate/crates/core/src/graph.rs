//! Directed communication graphs, their Laplacians and the spectral
//! certificates the adaptive protocols are analysed with.
//!
//! An edge `i → j` means node `j` listens to node `i`, so `a_ji = 1` and
//! `l_ji = −1`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, symmetric_eigen, DenseMatrix, Lu};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    leader: bool,
}

impl DirectedGraph {
    /// Build a graph on `n` nodes. With `leader` set, node 0 is the leader
    /// and may not have incoming edges.
    pub fn new(n: usize, edges: &[(usize, usize)], leader: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Input(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if i == j {
                return Err(Error::Input(format!("self-loop at node {i}")));
            }
            if leader && j == 0 {
                return Err(Error::GraphClass(format!(
                    "edge ({i}, 0) points into the leader"
                )));
            }
            set.insert((i, j));
        }
        Ok(Self { n, edges: set, leader })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn has_leader(&self) -> bool {
        self.leader
    }

    /// Number of agents running the protocol (all nodes but the leader).
    pub fn follower_count(&self) -> usize {
        if self.leader {
            self.n - 1
        } else {
            self.n
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes `j` with `a_ij = 1`.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == i).map(|e| e.0).collect()
    }

    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == i).map(|e| e.1).collect()
    }

    /// Adjacency `a_ij ∈ {0, 1}`.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.n]; self.n];
        for &(i, j) in &self.edges {
            a[j][i] = 1;
        }
        a
    }

    /// The same graph with all nodes renumbered by `perm` (`old → perm[old]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        Self::new(self.n, &edges, self.leader)
    }

    pub fn laplacian(&self) -> LaplacianBundle {
        let a = self.adjacency();
        let n = self.n;
        // integer row sums, so L·1 = 0 holds exactly after conversion
        let l = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                a[i].iter().map(|&v| v as i64).sum::<i64>() as f64
            } else if a[i][j] == 0 {
                0.0
            } else {
                -(a[i][j] as f64)
            }
        });
        let (l1, l2) = if self.leader {
            (
                Some(l.submatrix(1, 1, n - 1, n - 1)),
                Some((1..n).map(|i| l[(i, 0)]).collect()),
            )
        } else {
            (None, None)
        };
        LaplacianBundle { l, l1, l2 }
    }

    /// Strongly connected components (Kosaraju), as a component id per node.
    pub fn strongly_connected_components(&self) -> Vec<usize> {
        let n = self.n;
        let fwd: Vec<Vec<usize>> = (0..n).map(|i| self.out_neighbors(i)).collect();
        let rev: Vec<Vec<usize>> = (0..n).map(|i| self.in_neighbors(i)).collect();
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![(s, 0usize)];
            while let Some((u, k)) = stack.pop() {
                if k < fwd[u].len() {
                    stack.push((u, k + 1));
                    let v = fwd[u][k];
                    if !seen[v] {
                        seen[v] = true;
                        stack.push((v, 0));
                    }
                } else {
                    order.push(u);
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &rev[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        comp
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected_components().iter().all(|&c| c == 0)
    }

    /// Whether every node is reachable from `root` along edge directions.
    pub fn has_spanning_tree_rooted_at(&self, root: usize) -> bool {
        if root >= self.n {
            return false;
        }
        let mut seen = vec![false; self.n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in self.out_neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn has_spanning_tree(&self) -> bool {
        (0..self.n).any(|r| self.has_spanning_tree_rooted_at(r))
    }

    /// Parse the edge-list format:
    ///
    /// ```text
    /// N 6 leader
    /// 0 1
    /// 1 2
    /// ```
    ///
    /// `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut header: Option<(usize, bool)> = None;
        let mut edges = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            match header {
                None => {
                    if tok[0] != "N" || !(2..=3).contains(&tok.len()) {
                        return Err(parse_err(k + 1, "expected `N <count> [leader]`".into()));
                    }
                    let n = tok[1]
                        .parse()
                        .map_err(|_| parse_err(k + 1, format!("bad node count `{}`", tok[1])))?;
                    let leader = match tok.get(2) {
                        None => false,
                        Some(&"leader") => true,
                        Some(t) => return Err(parse_err(k + 1, format!("unknown flag `{t}`"))),
                    };
                    header = Some((n, leader));
                }
                Some(_) => {
                    if tok.len() != 2 {
                        return Err(parse_err(k + 1, "expected `i j`".into()));
                    }
                    let i = tok[0]
                        .parse()
                        .map_err(|_| parse_err(k + 1, format!("bad node `{}`", tok[0])))?;
                    let j = tok[1]
                        .parse()
                        .map_err(|_| parse_err(k + 1, format!("bad node `{}`", tok[1])))?;
                    edges.push((i, j));
                }
            }
        }
        let (n, leader) = header.ok_or_else(|| parse_err(0, "missing header".into()))?;
        Self::new(n, &edges, leader)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("N {}{}\n", self.n, if self.leader { " leader" } else { "" });
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }
}

/// `L` and, for leader graphs, the follower blocks of
/// `L = [[0, 0], [L̂₂, L̂₁]]`.
#[derive(Debug, Clone)]
pub struct LaplacianBundle {
    pub l: DenseMatrix,
    pub l1: Option<DenseMatrix>,
    pub l2: Option<Vec<f64>>,
}

impl LaplacianBundle {
    /// The matrix the protocol's neighbourhood sums run over: `L` for
    /// leaderless graphs, `L̂₁` otherwise.
    pub fn agent_block(&self) -> &DenseMatrix {
        self.l1.as_ref().unwrap_or(&self.l)
    }
}

/// Positive left null vector `r` of a Laplacian with a simple zero
/// eigenvalue, normalized to `Σ rᵢ = 1`.
///
/// Solves the bordered system `[[Lᵀ, 1], [1ᵀ, 0]] [r; μ] = [0; 1]`.
pub fn left_null_vector(l: &DenseMatrix) -> Result<Vec<f64>> {
    let n = l.rows();
    if !l.is_square() {
        return Err(Error::Dimension("Laplacian must be square".into()));
    }
    let mut bordered = DenseMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            bordered[(i, j)] = l[(j, i)];
        }
        bordered[(i, n)] = 1.0;
        bordered[(n, i)] = 1.0;
    }
    let lu = Lu::new(&bordered, "bordered Laplacian").map_err(|_| {
        Error::Rank("zero eigenvalue of the Laplacian is not simple".into())
    })?;
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let sol = lu.solve(&rhs);
    let r = sol[..n].to_vec();
    if r.iter().any(|&v| v <= 1e-14) {
        return Err(Error::GraphClass(
            "left null vector is not positive; graph is not strongly connected".into(),
        ));
    }
    Ok(r)
}

/// `L̂ = RL + LᵀR` with `R = diag(r)`, and its smallest nonzero eigenvalue.
pub fn lambda2_lhat(l: &DenseMatrix, r: &[f64]) -> Result<(DenseMatrix, f64)> {
    let n = l.rows();
    if n < 2 {
        return Err(Error::GraphClass("λ₂ needs at least two nodes".into()));
    }
    let rl = DenseMatrix::from_fn(n, n, |i, j| r[i] * l[(i, j)]);
    let lhat = (&rl + &rl.transpose()).symmetric_part();
    let eig = symmetric_eigen(&lhat)?;
    let top = eig.values[n - 1].abs().max(f64::MIN_POSITIVE);
    let zeros = eig.values.iter().filter(|v| v.abs() <= 1e-8 * top).count();
    if zeros != 1 {
        return Err(Error::GraphClass(format!(
            "L̂ has {zeros} near-zero eigenvalues, expected exactly one"
        )));
    }
    Ok((lhat, eig.values[1]))
}

/// Off-diagonals nonpositive and spectrum in the open right half plane.
pub fn is_nonsingular_m_matrix(m: &DenseMatrix) -> Result<bool> {
    let n = m.rows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] > 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(eigenvalues(m)?.eigenvalues().iter().all(|z| z.re > 0.0))
}

/// Diagonal `G ≻ 0` with `GL̂₁ + L̂₁ᵀG ≻ 0`, and `λ₀ = λ_min(GL̂₁ + L̂₁ᵀG)`.
///
/// Tries `G = diag(1/q)` with `q = L̂₁⁻¹1` first, then `G = diag(p/q)` with
/// `p = L̂₁⁻ᵀ1`, then doubles single entries of `G` guided by the
/// eigenvector of the smallest eigenvalue.
pub fn mmatrix_scaling(l1: &DenseMatrix) -> Result<(Vec<f64>, f64)> {
    if !is_nonsingular_m_matrix(l1)? {
        return Err(Error::GraphClass(
            "follower block is not a nonsingular M-matrix (leader is not a spanning-tree root)"
                .into(),
        ));
    }
    let n = l1.rows();
    let ones = vec![1.0; n];
    let q = l1.solve(&ones)?;
    let p = l1.transpose().solve(&ones)?;
    let candidates = [
        q.iter().map(|v| 1.0 / v).collect::<Vec<_>>(),
        p.iter().zip(&q).map(|(a, b)| a / b).collect(),
    ];
    for g in &candidates {
        if g.iter().all(|v| v.is_finite() && *v > 0.0) {
            let lam = lambda0(l1, g)?;
            if lam > 0.0 {
                return Ok((g.clone(), lam));
            }
        }
    }
    let mut g = vec![1.0; n];
    for _ in 0..60 {
        let sym = scaled_symmetric(l1, &g);
        let eig = symmetric_eigen(&sym)?;
        if eig.values[0] > 0.0 {
            return Ok((g, eig.values[0]));
        }
        let worst = (0..n)
            .min_by(|&a, &b| eig.vectors[(a, 0)].total_cmp(&eig.vectors[(b, 0)]))
            .unwrap_or(0);
        g[worst] *= 2.0;
    }
    Err(Error::Synthesis("no diagonal scaling found for the follower block".into()))
}

fn scaled_symmetric(l1: &DenseMatrix, g: &[f64]) -> DenseMatrix {
    let gl = DenseMatrix::from_fn(l1.rows(), l1.cols(), |i, j| g[i] * l1[(i, j)]);
    (&gl + &gl.transpose()).symmetric_part()
}

/// `λ_min(GL̂₁ + L̂₁ᵀG)`.
pub fn lambda0(l1: &DenseMatrix, g: &[f64]) -> Result<f64> {
    Ok(symmetric_eigen(&scaled_symmetric(l1, g))?.values[0])
}

/// Certificate for a leaderless strongly connected graph.
#[derive(Debug, Clone)]
pub struct LeaderlessCertificate {
    pub r: Vec<f64>,
    pub lhat: DenseMatrix,
    pub lambda2: f64,
}

/// Certificate for a leader graph: `G` and `λ₀`.
#[derive(Debug, Clone)]
pub struct LeaderCertificate {
    pub g: Vec<f64>,
    pub lambda0: f64,
}

#[derive(Debug, Clone)]
pub enum SpectralCertificate {
    Leaderless(LeaderlessCertificate),
    Leader(LeaderCertificate),
}

impl SpectralCertificate {
    /// Verify the graph class and compute the matching certificate.
    pub fn for_graph(g: &DirectedGraph) -> Result<Self> {
        let bundle = g.laplacian();
        if g.has_leader() {
            if !g.has_spanning_tree_rooted_at(0) {
                return Err(Error::GraphClass(
                    "leader graph has no spanning tree rooted at the leader".into(),
                ));
            }
            let l1 = bundle.l1.as_ref().expect("leader graph has L̂₁");
            let (gv, lambda0) = mmatrix_scaling(l1)?;
            Ok(Self::Leader(LeaderCertificate { g: gv, lambda0 }))
        } else {
            if !g.is_strongly_connected() {
                return Err(Error::GraphClass("graph is not strongly connected".into()));
            }
            let r = left_null_vector(&bundle.l)?;
            let (lhat, lambda2) = lambda2_lhat(&bundle.l, &r)?;
            Ok(Self::Leaderless(LeaderlessCertificate { r, lhat, lambda2 }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cycle(n: usize) -> DirectedGraph {
        let e: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        DirectedGraph::new(n, &e, false).unwrap()
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> DirectedGraph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(p) {
                    e.push((i, j));
                }
            }
        }
        DirectedGraph::new(n, &e, false).unwrap()
    }

    fn reach_closure(g: &DirectedGraph) -> Vec<Vec<bool>> {
        let n = g.node_count();
        let mut r = vec![vec![false; n]; n];
        for i in 0..n {
            r[i][i] = true;
        }
        for (i, j) in g.edges() {
            r[i][j] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        r
    }

    #[test]
    fn single_edge_laplacian() {
        let g = DirectedGraph::new(2, &[(0, 1)], false).unwrap();
        let l = g.laplacian().l;
        assert_eq!(l.as_slice(), &[0.0, 0.0, -1.0, 1.0]);
    }

    #[test]
    fn cycle_is_circulant() {
        let l = cycle(3).laplacian().l;
        for i in 0..3 {
            assert_eq!(l[(i, i)], 1.0);
            assert_eq!(l[((i + 1) % 3, i)], -1.0);
        }
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(DirectedGraph::new(2, &[(0, 0)], false).is_err());
        assert!(DirectedGraph::new(2, &[(0, 2)], false).is_err());
        assert!(matches!(
            DirectedGraph::new(2, &[(1, 0)], true),
            Err(Error::GraphClass(_))
        ));
    }

    #[test]
    fn connectivity_basics() {
        assert!(cycle(3).is_strongly_connected());
        let chain = DirectedGraph::new(3, &[(0, 1), (1, 2)], false).unwrap();
        assert!(!chain.is_strongly_connected());
        assert!(chain.has_spanning_tree_rooted_at(0));
        assert!(!chain.has_spanning_tree_rooted_at(1));
        let star = DirectedGraph::new(4, &[(0, 1), (0, 2), (0, 3)], false).unwrap();
        assert!(star.has_spanning_tree_rooted_at(0));
        let isolated = DirectedGraph::new(3, &[(0, 1)], false).unwrap();
        assert!(!isolated.has_spanning_tree());
    }

    #[test]
    fn scc_matches_floyd_warshall() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=8);
            let p = rng.gen_range(0.1..0.6);
            let g = random_graph(&mut rng, n, p);
            let r = reach_closure(&g);
            let oracle = (0..n).all(|i| (0..n).all(|j| r[i][j]));
            assert_eq!(g.is_strongly_connected(), oracle, "{}", g.to_text());
            for root in 0..n {
                assert_eq!(g.has_spanning_tree_rooted_at(root), r[root].iter().all(|&b| b));
            }
            let comp = g.strongly_connected_components();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(comp[i] == comp[j], r[i][j] && r[j][i]);
                }
            }
        }
    }

    #[test]
    fn rows_sum_to_zero_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = random_graph(&mut rng, 7, 0.4);
            let l = g.laplacian().l;
            for i in 0..7 {
                assert_eq!(l.row_slice(i).iter().sum::<f64>(), 0.0);
            }
        }
    }

    #[test]
    fn null_vector_of_cycle_and_balanced_graph() {
        let r = left_null_vector(&cycle(3).laplacian().l).unwrap();
        for v in &r {
            assert!((v - 1.0 / 3.0).abs() < 1e-14);
        }
        let balanced =
            DirectedGraph::new(4, &[(0, 1), (1, 0), (1, 2), (2, 3), (3, 1)], false).unwrap();
        let r = left_null_vector(&balanced.laplacian().l).unwrap();
        for v in &r {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn null_vector_rejects_chain() {
        let chain = DirectedGraph::new(3, &[(0, 1), (1, 2)], false).unwrap();
        assert!(left_null_vector(&chain.laplacian().l).is_err());
    }

    fn sym3_eigs(m: &DenseMatrix) -> [f64; 3] {
        // closed-form trigonometric solution of the characteristic cubic
        let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
        let q = m.trace() / 3.0;
        let p2 = (0..3).map(|i| (m[(i, i)] - q).powi(2)).sum::<f64>() + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            return [q; 3];
        }
        let b = DenseMatrix::from_fn(3, 3, |i, j| {
            (m[(i, j)] - if i == j { q } else { 0.0 }) / p
        });
        let det = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [lo, 3.0 * q - hi - lo, hi]
    }

    #[test]
    fn lambda2_of_cycle_and_complete_graph() {
        let l = cycle(3).laplacian().l;
        let r = left_null_vector(&l).unwrap();
        let (lhat, lam2) = lambda2_lhat(&l, &r).unwrap();
        let e = sym3_eigs(&lhat);
        assert!((lam2 - e[1]).abs() < 1e-9);
        let complete = DirectedGraph::new(
            3,
            &[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)],
            false,
        )
        .unwrap();
        let l = complete.laplacian().l;
        let r = left_null_vector(&l).unwrap();
        let (lhat, lam2) = lambda2_lhat(&l, &r).unwrap();
        let e = sym3_eigs(&lhat);
        assert!((lam2 - e[1]).abs() < 1e-9);
        assert!((lam2 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_multiplicity_matches_spanning_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(2..=8);
            let p = rng.gen_range(0.05..0.5);
            let g = random_graph(&mut rng, n, p);
            let spec = eigenvalues(&g.laplacian().l).unwrap();
            let simple = spec.count_near_zero(1e-7) == 1;
            assert_eq!(simple, g.has_spanning_tree(), "{}", g.to_text());
        }
    }

    #[test]
    fn projected_laplacian_quotient_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 20 {
            let n = rng.gen_range(2..=7);
            let g = random_graph(&mut rng, n, 0.45);
            if !g.is_strongly_connected() {
                continue;
            }
            checked += 1;
            let l = g.laplacian().l;
            let r = left_null_vector(&l).unwrap();
            let res = l.transpose().matvec(&r);
            assert!(res.iter().all(|v| v.abs() <= 1e-10));
            let (lhat, lam2) = lambda2_lhat(&l, &r).unwrap();
            assert!(lam2 > 0.0);
            let rr: f64 = r.iter().map(|v| v * v).sum();
            for _ in 0..100 {
                let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert!(lhat.quad_form(&x) >= -1e-12);
                let c: f64 = x.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / rr;
                x.iter_mut().zip(&r).for_each(|(v, ri)| *v -= c * ri);
                let xx: f64 = x.iter().map(|v| v * v).sum();
                if xx < 1e-12 {
                    continue;
                }
                assert!(lhat.quad_form(&x) / xx > lam2 / n as f64);
            }
        }
    }

    #[test]
    fn scaling_examples() {
        let l1 = DenseMatrix::from_rows(&[&[1.0, 0.0], &[-1.0, 2.0]]).unwrap();
        let (g, lam) = mmatrix_scaling(&l1).unwrap();
        assert_eq!(g, vec![1.0, 1.0]);
        // [[2, -1], [-1, 4]]: 3 - sqrt(2)
        assert!((lam - (3.0 - 2f64.sqrt())).abs() < 1e-12);
        let (g, lam) = mmatrix_scaling(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(g, vec![1.0; 3]);
        assert!((lam - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_rejects_non_m_matrix() {
        let m = DenseMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(mmatrix_scaling(&m), Err(Error::GraphClass(_))));
        let singular = DenseMatrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).unwrap();
        assert!(mmatrix_scaling(&singular).is_err());
    }

    #[test]
    fn leader_partition() {
        let g = DirectedGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 1)], true).unwrap();
        let b = g.laplacian();
        let l1 = b.l1.unwrap();
        assert_eq!(l1.shape(), (3, 3));
        assert_eq!(b.l2.unwrap(), vec![-1.0, 0.0, 0.0]);
        assert_eq!(l1[(0, 0)], 2.0);
        match SpectralCertificate::for_graph(&g).unwrap() {
            SpectralCertificate::Leader(c) => assert!(c.lambda0 > 0.0),
            _ => panic!("expected leader certificate"),
        }
    }

    #[test]
    fn text_round_trip() {
        let g = DirectedGraph::new(3, &[(0, 1), (0, 2), (1, 2)], true).unwrap();
        let back = DirectedGraph::parse(&g.to_text(), "mem").unwrap();
        assert_eq!(g, back);
        let err = DirectedGraph::parse("N 3\n0 x\n", "g.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
