//! Grid-search oracles for the finite and stationary bridge objectives.

use super::{kl, mat_product, pattern_search, policy_cost};

fn row2(a: f64) -> Vec<f64> {
    vec![a, 1.0 - a]
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn grid(step: f64, hi: f64) -> impl Iterator<Item = f64> + Clone {
    let k = (hi / step + 1e-9).floor() as usize;
    (0..=k).map(move |i| i as f64 * step)
}

/// Cost of the two-state dynamic problem over its free transition parameters.
///
/// `N = 1`: `x = [a]` with `π(0) = [[a, 1−a], [b, 1−b]]` and `b` fixed by the
/// final marginal. `N = 2`: `x = [a, b, c]` with the last row of `π(1)` fixed
/// by the final marginal.
fn two_state_cost(x: &[f64], prior: &[Vec<Vec<f64>>], nu0: &[f64], nun: &[f64]) -> f64 {
    if !x.iter().all(|&v| in_unit(v)) {
        return f64::INFINITY;
    }
    match prior.len() {
        1 => {
            let a = x[0];
            let b = (nun[0] - nu0[0] * a) / nu0[1];
            if !in_unit(b) {
                return f64::INFINITY;
            }
            policy_cost(nu0, &[vec![row2(a), row2(b)]], prior)
        }
        2 => {
            let first = vec![row2(x[0]), row2(x[1])];
            let p1 = [nu0[0] * x[0] + nu0[1] * x[1], nu0[0] * (1.0 - x[0]) + nu0[1] * (1.0 - x[1])];
            if p1[1] <= 1e-12 {
                return f64::INFINITY;
            }
            let d = (nun[0] - p1[0] * x[2]) / p1[1];
            if !in_unit(d) {
                return f64::INFINITY;
            }
            policy_cost(nu0, &[first, vec![row2(x[2]), row2(d)]], prior)
        }
        _ => unreachable!("two-state oracle covers N = 1, 2"),
    }
}

/// Grid minimum at resolution 0.01 over the transition parameters of a
/// two-state problem with `N ∈ {1, 2}`, followed by one local refinement pass.
pub fn two_state_dynamic_minimum(prior: &[Vec<Vec<f64>>], nu0: &[f64], nun: &[f64]) -> f64 {
    let dims = if prior.len() == 1 { 1 } else { 3 };
    let f = |x: &[f64]| two_state_cost(x, prior, nu0, nun);
    let mut best = (vec![0.0; dims], f64::INFINITY);
    let mut x = vec![0.0; dims];
    let steps: Vec<f64> = grid(0.01, 1.0).collect();
    let total = steps.len().pow(dims as u32);
    for code in 0..total {
        let mut c = code;
        for xi in x.iter_mut() {
            *xi = steps[c % steps.len()];
            c /= steps.len();
        }
        let v = f(&x);
        if v < best.1 {
            best = (x.clone(), v);
        }
    }
    pattern_search(f, best.0, 0.01, 1e-10).1
}

/// Static coupling cost `Σ Γ_ij log(Γ_ij / (ν_0(i) G_ij))` for a three-state
/// coupling parameterized by its upper-left 2×2 block.
fn coupling_cost(x: &[f64], reference: &[Vec<f64>], nu0: &[f64], nun: &[f64]) -> f64 {
    let g02 = nu0[0] - x[0] - x[1];
    let g12 = nu0[1] - x[2] - x[3];
    let g20 = nun[0] - x[0] - x[2];
    let g21 = nun[1] - x[1] - x[3];
    let g22 = nu0[2] - g20 - g21;
    let gamma = [x[0], x[1], g02, x[2], x[3], g12, g20, g21, g22];
    if gamma.iter().any(|&v| v < 0.0) {
        return f64::INFINITY;
    }
    let r: Vec<f64> = reference.iter().flatten().copied().collect();
    kl(&gamma, &r)
}

/// Minimum of the three-state problem over endpoint couplings `Γ` with the
/// prescribed marginals, against the reference `ν_0(i) (M(0)···M(N−1))_ij`.
///
/// Coarse grid at 0.05, then a 0.01 grid around the coarse winner, then one
/// local refinement pass.
pub fn three_state_coupling_minimum(prior: &[Vec<Vec<f64>>], nu0: &[f64], nun: &[f64]) -> f64 {
    let g = prior[1..].iter().fold(prior[0].clone(), |acc, m| mat_product(&acc, m));
    let reference: Vec<Vec<f64>> = (0..3).map(|i| g[i].iter().map(|v| nu0[i] * v).collect()).collect();
    let f = |x: &[f64]| coupling_cost(x, &reference, nu0, nun);
    let bound = |i: usize, j: usize| nu0[i].min(nun[j]);
    let search = |centre: Option<&[f64]>, step: f64| {
        let axis = |k: usize, hi: f64| -> Vec<f64> {
            match centre {
                None => grid(step, hi).collect(),
                Some(c) => (-5..=5).map(|d| c[k] + d as f64 * step).filter(|v| (0.0..=hi).contains(v)).collect(),
            }
        };
        let (a0, a1, a2, a3) = (axis(0, bound(0, 0)), axis(1, bound(0, 1)), axis(2, bound(1, 0)), axis(3, bound(1, 1)));
        let mut best = (vec![0.0; 4], f64::INFINITY);
        for &x0 in &a0 {
            for &x1 in &a1 {
                for &x2 in &a2 {
                    for &x3 in &a3 {
                        let x = [x0, x1, x2, x3];
                        let v = f(&x);
                        if v < best.1 {
                            best = (x.to_vec(), v);
                        }
                    }
                }
            }
        }
        best
    };
    let coarse = search(None, 0.05);
    let fine = search(Some(&coarse.0), 0.01);
    let start = if fine.1 <= coarse.1 { fine.0 } else { coarse.0 };
    pattern_search(f, start, 0.01, 1e-10).1
}

/// Two-state stationary optimum: the kernel `[[a, 1−a], [b, 1−b]]` with
/// `π_0 (1−a) = π_1 b`, minimizing `Σ_i π_i D(Π_i·‖m_i·)` over `a` by a 0.001
/// grid and golden-section refinement.
pub fn two_state_stationary_optimum(m: &[Vec<f64>], pi: &[f64]) -> [[f64; 2]; 2] {
    let b_of = |a: f64| pi[0] * (1.0 - a) / pi[1];
    let f = |a: f64| {
        let b = b_of(a);
        if !in_unit(a) || !in_unit(b) {
            return f64::INFINITY;
        }
        pi[0] * kl(&row2(a), &m[0]) + pi[1] * kl(&row2(b), &m[1])
    };
    let lo = (1.0 - pi[1] / pi[0]).max(0.0);
    let mut best = (lo, f(lo));
    let mut a = lo;
    while a <= 1.0 {
        let v = f(a);
        if v < best.1 {
            best = (a, v);
        }
        a += 0.001;
    }
    let a = super::golden_section(f, (best.0 - 0.001).max(lo), (best.0 + 0.001).min(1.0), 1e-14);
    let b = b_of(a);
    [[a, 1.0 - a], [b, 1.0 - b]]
}
