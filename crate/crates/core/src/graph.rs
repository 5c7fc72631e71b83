//! Directed graphs on `0..n` and the structural predicates used to gate the
//! solvers: strong connectivity, aperiodicity, and (full) indecomposability
//! of a nonnegative matrix's zero pattern.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;

/// Directed graph with vertices `0..n`. Self-loops are allowed; duplicate edges are not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    out: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        let mut out = vec![Vec::new(); n];
        let mut list = Vec::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            out[i].push(j);
            list.push((i, j));
        }
        for (i, nbrs) in out.iter_mut().enumerate() {
            nbrs.sort_unstable();
            if let Some(w) = nbrs.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {})", w[0])));
            }
        }
        list.sort_unstable();
        Ok(Self { n, edges: list, out })
    }

    /// Graph whose edges are the nonzero entries of `m`.
    pub fn from_pattern(m: &NonnegMatrix) -> Self {
        let n = m.dim();
        let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j)));
        let edges: Vec<_> = edges.filter(|&(i, j)| !m.is_zero(i, j)).collect();
        Self::new(n, edges).expect("pattern edges are in range and unique")
    }

    /// Complete digraph, with or without self-loops.
    pub fn complete(n: usize, self_loops: bool) -> Result<Self> {
        let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j)));
        Self::new(n, edges.filter(|(i, j)| self_loops || i != j))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out[i].binary_search(&j).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(i, j)| self.has_edge(j, i))
    }

    fn reversed(&self) -> Self {
        Self::new(self.n, self.edges.iter().map(|&(i, j)| (j, i))).expect("reversal preserves validity")
    }

    /// BFS distances from `source`; `None` for unreachable vertices.
    fn bfs_levels(&self, source: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.n];
        level[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let next = level[u].map(|l| l + 1);
            for &v in &self.out[u] {
                if level[v].is_none() {
                    level[v] = next;
                    queue.push_back(v);
                }
            }
        }
        level
    }
}

/// 0/1 adjacency matrix of `g`.
pub fn adjacency(g: &Graph) -> NonnegMatrix {
    let n = g.n();
    let mut data = vec![0.0; n * n];
    for &(i, j) in g.edges() {
        data[i * n + j] = 1.0;
    }
    NonnegMatrix::from_raw(n, data)
}

pub fn is_strongly_connected(g: &Graph) -> bool {
    g.bfs_levels(0).iter().all(Option::is_some) && g.reversed().bfs_levels(0).iter().all(Option::is_some)
}

/// Gcd of the lengths of all directed cycles, computed from BFS levels:
/// every edge (u, v) closes a walk whose length differs from a cycle length
/// combination by `level(u) + 1 - level(v)`.
pub fn period(g: &Graph) -> Result<usize> {
    if !is_strongly_connected(g) {
        return Err(Error::NotStronglyConnected);
    }
    let level: Vec<usize> = g.bfs_levels(0).into_iter().map(|l| l.expect("strongly connected")).collect();
    let d = g
        .edges()
        .iter()
        .map(|&(u, v)| (level[u] + 1).abs_diff(level[v]))
        .fold(0, gcd);
    // 0 when there are no cycles at all (single vertex, no self-loop)
    Ok(d)
}

pub fn is_aperiodic(g: &Graph) -> Result<bool> {
    Ok(period(g)? == 1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// No simultaneous permutation exposes a block-triangular zero structure;
/// equivalently, the digraph of the nonzero pattern is strongly connected.
pub fn is_indecomposable(m: &NonnegMatrix) -> bool {
    is_strongly_connected(&Graph::from_pattern(m))
}

/// Row-to-column perfect matching on the nonzero pattern (Hopcroft-Karp),
/// skipping `skip_row` / `skip_col` when given. Returns `match_of_row`, or
/// `None` when no perfect matching of the remaining rows exists.
pub(crate) fn perfect_matching(
    m: &NonnegMatrix,
    skip_row: Option<usize>,
    skip_col: Option<usize>,
) -> Option<Vec<Option<usize>>> {
    let n = m.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            if Some(i) == skip_row {
                return Vec::new();
            }
            (0..n).filter(|&j| Some(j) != skip_col && !m.is_zero(i, j)).collect()
        })
        .collect();
    let rows: Vec<usize> = (0..n).filter(|&i| Some(i) != skip_row).collect();

    let mut row_match: Vec<Option<usize>> = vec![None; n];
    let mut col_match: Vec<Option<usize>> = vec![None; n];
    let mut dist = vec![usize::MAX; n];
    let mut matched = 0;

    loop {
        // BFS layering from free rows.
        let mut queue = VecDeque::new();
        for &i in &rows {
            if row_match[i].is_none() {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                match col_match[j] {
                    None => found = true,
                    Some(k) if dist[k] == usize::MAX => {
                        dist[k] = dist[i] + 1;
                        queue.push_back(k);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut progressed = false;
        for &i in &rows {
            if row_match[i].is_none() && augment(i, &adj, &mut row_match, &mut col_match, &mut dist) {
                matched += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    (matched == rows.len()).then_some(row_match)
}

fn augment(
    i: usize,
    adj: &[Vec<usize>],
    row_match: &mut [Option<usize>],
    col_match: &mut [Option<usize>],
    dist: &mut [usize],
) -> bool {
    // iterative DFS along the BFS layers
    let mut stack: Vec<(usize, usize)> = vec![(i, 0)];
    let mut path: Vec<(usize, usize)> = Vec::new();
    while let Some(top) = stack.last_mut() {
        let u = top.0;
        if top.1 >= adj[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            path.pop();
            continue;
        }
        let j = adj[u][top.1];
        top.1 += 1;
        match col_match[j] {
            None => {
                path.push((u, j));
                for &(r, c) in &path {
                    row_match[r] = Some(c);
                    col_match[c] = Some(r);
                }
                return true;
            }
            Some(k) if dist[k] == dist[u].wrapping_add(1) => {
                path.push((u, j));
                stack.push((k, 0));
            }
            Some(_) => {}
        }
    }
    false
}

/// True iff deleting row `row` and column `col` leaves a pattern with a
/// perfect matching, i.e. the corresponding first-order subpermanent is positive.
pub fn minor_has_perfect_matching(m: &NonnegMatrix, row: usize, col: usize) -> bool {
    perfect_matching(m, Some(row), Some(col)).is_some()
}

/// No pair of permutations `P, Q` brings `m` to the form `P [A11 0; A21 A22] Q`
/// with square nonvacuous diagonal blocks.
///
/// Equivalent to every first-order subpermanent being positive. Rather than
/// running one matching per deleted (row, column) pair, one perfect matching
/// `σ` is computed and the digraph `r -> r'` for `m[r][σ(r')] != 0` is tested
/// for strong connectivity: the minor without row `i` and column `σ(r)` has a
/// perfect matching exactly when that digraph has a path from `r` to `i`.
/// For `n = 1` the single entry must be positive.
pub fn is_fully_indecomposable(m: &NonnegMatrix) -> bool {
    let n = m.dim();
    if n == 1 {
        return m.get(0, 0) > 0.0;
    }
    let Some(matching) = perfect_matching(m, None, None) else {
        return false;
    };
    let sigma: Vec<usize> = matching.into_iter().map(|c| c.expect("perfect")).collect();
    let mut row_of_col = vec![0; n];
    for (r, &c) in sigma.iter().enumerate() {
        row_of_col[c] = r;
    }
    let edges = (0..n).flat_map(|r| {
        let row_of_col = &row_of_col;
        (0..n).filter(move |&c| !m.is_zero(r, c)).map(move |c| (r, row_of_col[c]))
    });
    let d = Graph::new(n, edges).expect("one edge per nonzero entry");
    is_strongly_connected(&d)
}

/// Largest coupling supported on the nonzero pattern of `support` whose row
/// and column sums stay below `rows` and `cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFlow {
    /// Total mass moved.
    pub value: f64,
    /// The coupling `Γ`, zero off the pattern.
    pub coupling: NonnegMatrix,
}

/// Residual network for Dinic's algorithm; edge `e ^ 1` is the reverse of `e`.
struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new() }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: f64) -> usize {
        let e = self.to.len();
        self.adj[u].push(e);
        self.to.push(v);
        self.cap.push(cap);
        self.adj[v].push(e + 1);
        self.to.push(u);
        self.cap.push(0.0);
        e
    }

    fn levels(&self, s: usize, eps: f64) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > eps && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    /// One augmenting path in the level graph, advancing the current-arc
    /// pointers `next` past dead ends.
    fn find_path(&self, s: usize, t: usize, level: &mut [usize], next: &mut [usize], eps: f64) -> Option<Vec<usize>> {
        let mut path = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                return Some(path);
            }
            let mut advanced = false;
            while next[u] < self.adj[u].len() {
                let e = self.adj[u][next[u]];
                let v = self.to[e];
                if self.cap[e] > eps && level[v] == level[u] + 1 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                if u == s {
                    return None;
                }
                level[u] = usize::MAX;
                let e = path.pop().expect("non-source node has an incoming path edge");
                u = self.to[e ^ 1];
                next[u] += 1;
            }
        }
    }

    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let mut total = 0.0;
        loop {
            let mut level = self.levels(s, eps);
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0; self.adj.len()];
            while let Some(path) = self.find_path(s, t, &mut level, &mut next, eps) {
                let push = path.iter().map(|&e| self.cap[e]).fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.cap[e] -= push;
                    self.cap[e ^ 1] += push;
                }
                total += push;
            }
        }
    }
}

/// Maximum flow from row masses `rows` to column masses `cols` through the
/// nonzero entries of `support` (Dinic's algorithm).
pub fn max_coupling(support: &NonnegMatrix, rows: &[f64], cols: &[f64]) -> Result<CouplingFlow> {
    let n = support.dim();
    for v in [rows, cols] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
    }
    let (s, t) = (2 * n, 2 * n + 1);
    let mut net = FlowNetwork::new(2 * n + 2);
    for i in 0..n {
        net.add_edge(s, i, rows[i]);
        net.add_edge(n + i, t, cols[i]);
    }
    let mut inner = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| !support.is_zero(i, j)) {
            inner.push((i, j, net.add_edge(i, n + j, f64::INFINITY)));
        }
    }
    let scale = rows.iter().chain(cols).fold(0.0, |a: f64, &b| a.max(b));
    let value = net.max_flow(s, t, scale * 1e-15);
    let mut data = vec![0.0; n * n];
    for (i, j, e) in inner {
        data[i * n + j] = net.cap[e ^ 1];
    }
    Ok(CouplingFlow { value, coupling: NonnegMatrix::from_row_major(n, data)? })
}

/// Whether some coupling supported on the nonzero pattern of `support` has
/// row sums `rows` and column sums `cols` (both of equal total mass), up to a
/// relative mass deficit of `1e-9`.
pub fn coupling_exists(support: &NonnegMatrix, rows: &[f64], cols: &[f64]) -> Result<bool> {
    let total: f64 = rows.iter().sum();
    let flow = max_coupling(support, rows, cols)?;
    Ok(flow.value >= total * (1.0 - 1e-9))
}
