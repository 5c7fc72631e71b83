//! Random instance generators and brute-force oracles shared by the
//! integration tests. Nothing here calls into the solvers.

#![allow(dead_code)]

pub mod grid;

use bridgeflow_core::{Distribution, NonnegMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(rows: Vec<Vec<f64>>) -> NonnegMatrix {
    NonnegMatrix::from_rows(rows).unwrap()
}

/// Nonnegative weights in `(0.05, 1]`, each zeroed with probability `zero_prob`;
/// every row keeps at least one positive entry.
pub fn random_nonneg(rng: &mut impl Rng, n: usize, zero_prob: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(zero_prob) { 0.0 } else { rng.gen_range(0.05..=1.0) })
                .collect();
            if row.iter().all(|&v| v == 0.0) {
                row[rng.gen_range(0..n)] = rng.gen_range(0.05..=1.0);
            }
            row
        })
        .collect()
}

pub fn normalize_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn random_stochastic(rng: &mut impl Rng, n: usize, zero_prob: f64) -> Vec<Vec<f64>> {
    normalize_rows(random_nonneg(rng, n, zero_prob))
}

/// Strictly positive probability vector with entries bounded away from zero.
pub fn random_positive_probability(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..=1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Probability vector that may contain zeros (at least one positive entry).
pub fn random_probability(rng: &mut impl Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(zero_prob) { 0.0 } else { rng.gen_range(0.05..=1.0) })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn random_pattern(rng: &mut impl Rng, n: usize, density: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..n).map(|_| if rng.gen_bool(density) { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                extend(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Full indecomposability by exhaustive permutation search: every entry
/// `(i, j)` lies on some permutation whose other entries are all nonzero,
/// i.e. every minor of order `n − 1` has a positive permanent.
pub fn brute_fully_indecomposable(rows: &[Vec<f64>]) -> bool {
    let n = rows.len();
    if n == 1 {
        return rows[0][0] > 0.0;
    }
    let perms = permutations(n);
    (0..n).all(|i| {
        (0..n).all(|j| {
            perms
                .iter()
                .any(|p| p[i] == j && (0..n).all(|k| k == i || rows[k][p[k]] != 0.0))
        })
    })
}

/// Full indecomposability by the forbidden-block definition: no `r × (n − r)`
/// zero submatrix for `1 ≤ r ≤ n − 1`.
pub fn brute_no_zero_block(rows: &[Vec<f64>]) -> bool {
    let n = rows.len();
    if n == 1 {
        return rows[0][0] > 0.0;
    }
    for rmask in 1u32..(1 << n) - 1 {
        let r = rmask.count_ones() as usize;
        for cmask in 1u32..(1 << n) {
            if cmask.count_ones() as usize != n - r {
                continue;
            }
            let zero = (0..n)
                .filter(|i| rmask >> i & 1 == 1)
                .all(|i| (0..n).filter(|j| cmask >> j & 1 == 1).all(|j| rows[i][j] == 0.0));
            if zero {
                return false;
            }
        }
    }
    true
}

/// Strong connectivity of the digraph `i → j` for `rows[i][j] ≠ 0`, by
/// Warshall transitive closure.
pub fn brute_strongly_connected(rows: &[Vec<f64>]) -> bool {
    let n = rows.len();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i == j || rows[i][j] != 0.0).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach.iter().all(|r| r.iter().all(|&b| b))
}

/// `Σ p log(p/q)` with `0 log 0 = 0` and `+∞` for mass where `q` vanishes.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// Probability of one path under an initial law and a kernel sequence.
pub fn path_probability(initial: &[f64], kernels: &[Vec<Vec<f64>>], path: &[usize]) -> f64 {
    let mut w = initial[path[0]];
    for (t, k) in kernels.iter().enumerate() {
        w *= k[path[t]][path[t + 1]];
    }
    w
}

/// Every path of length `horizon + 1` over `n` states.
pub fn all_paths(n: usize, horizon: usize) -> Vec<Vec<usize>> {
    let len = horizon + 1;
    let total = n.pow(len as u32);
    (0..total)
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let s = code % n;
                    code /= n;
                    s
                })
                .collect()
        })
        .collect()
}

/// Path-space divergence summed over every path.
pub fn brute_path_divergence(
    p0: &[f64],
    pk: &[Vec<Vec<f64>>],
    m0: &[f64],
    mk: &[Vec<Vec<f64>>],
) -> f64 {
    let paths = all_paths(p0.len(), pk.len());
    let p: Vec<f64> = paths.iter().map(|x| path_probability(p0, pk, x)).collect();
    let m: Vec<f64> = paths.iter().map(|x| path_probability(m0, mk, x)).collect();
    kl(&p, &m)
}

/// `Σ_t Σ_x p_t(x) D(π_x·(t) ‖ m_x·(t))` for a policy started from `nu0`.
pub fn policy_cost(nu0: &[f64], policy: &[Vec<Vec<f64>>], prior: &[Vec<Vec<f64>>]) -> f64 {
    let mut p = nu0.to_vec();
    let mut cost = 0.0;
    for (pi, m) in policy.iter().zip(prior) {
        for x in 0..p.len() {
            if p[x] > 0.0 {
                cost += p[x] * kl(&pi[x], &m[x]);
            }
        }
        p = propagate(&p, pi);
    }
    cost
}

/// `p' = p Π`.
pub fn propagate(p: &[f64], pi: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    (0..n).map(|j| (0..n).map(|i| p[i] * pi[i][j]).sum()).collect()
}

pub fn mat_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn dist(w: &[f64]) -> Distribution {
    Distribution::probability(w.to_vec()).unwrap()
}

/// Coordinate pattern search from `x0`, halving the step down to `min_step`.
/// `f` returns `+∞` outside the feasible set.
pub fn pattern_search(f: impl Fn(&[f64]) -> f64, x0: Vec<f64>, step: f64, min_step: f64) -> (Vec<f64>, f64) {
    let mut x = x0;
    let mut best = f(&x);
    let mut h = step;
    while h >= min_step {
        let mut improved = false;
        for k in 0..x.len() {
            for dir in [-1.0, 1.0] {
                let mut y = x.clone();
                y[k] += dir * h;
                let v = f(&y);
                if v < best {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    (x, best)
}

/// Minimizer of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Hall-type condition for a transport plan on the nonzero pattern of `rows`:
/// every set of sources `I` must fit into the targets it reaches,
/// `Σ_{i∈I} r_i ≤ Σ_{j∈N(I)} c_j`. Exhaustive over subsets.
pub fn brute_coupling_exists(pattern: &[Vec<f64>], r: &[f64], c: &[f64]) -> bool {
    let n = pattern.len();
    (1u32..1 << n).all(|set| {
        let sources: f64 = (0..n).filter(|i| set >> i & 1 == 1).map(|i| r[i]).sum();
        let reached: f64 = (0..n)
            .filter(|&j| (0..n).any(|i| set >> i & 1 == 1 && pattern[i][j] != 0.0))
            .map(|j| c[j])
            .sum();
        sources <= reached + 1e-12
    })
}
