//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code, clippy::needless_range_loop)]

use ltae::linalg::Matrix;
use ltae::nn::{forward, init_weights, Activation, LayerSpec, NetworkSpec, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Eigenvalues of a symmetric matrix, descending, by classical cyclic Jacobi
/// rotations on a dense copy.
pub fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m: Vec<Vec<f64>> = (0..n).map(|r| a.row(r).to_vec()).collect();
    let scale: f64 = m
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Singular values of `a` (descending, `min(m, n)` of them) from the
/// eigenvalues of the symmetric embedding `[[0, A], [Aᵀ, 0]]`, whose spectrum
/// is `±σᵢ` padded with zeros.
pub fn singular_values_oracle(a: &Matrix) -> Vec<f64> {
    let (m, n) = a.shape();
    let k = m.min(n);
    let big = Matrix::from_fn(m + n, m + n, |r, c| match (r < m, c < m) {
        (true, false) => a[(r, c - m)],
        (false, true) => a[(c, r - m)],
        _ => 0.0,
    });
    sym_eigenvalues(&big)
        .into_iter()
        .take(k)
        .map(|x| x.max(0.0))
        .collect()
}

/// Mean squared error of the best rank-`k` approximation of `x`: the tail of
/// the spectrum of `XᵀX` divided by the number of entries.
pub fn optimal_rank_k_mse(x: &Matrix, k: usize) -> f64 {
    let gram = x.transpose().matmul(x);
    let ev = sym_eigenvalues(&gram);
    ev[k..].iter().map(|e| e.max(0.0)).sum::<f64>() / (x.rows() * x.cols()) as f64
}

/// Centered median of every sample over a window truncated at the edges;
/// an even number of values yields the mean of the two middle ones.
pub fn brute_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            let mut w = values[lo..hi].to_vec();
            w.sort_by(f64::total_cmp);
            let len = w.len();
            if len % 2 == 1 {
                w[len / 2]
            } else {
                (w[len / 2 - 1] + w[len / 2]) / 2.0
            }
        })
        .collect()
}

/// Seeded random walk with impulsive outliers, `n × 3`.
pub fn noisy_walk(n: usize, seed: u64) -> Matrix {
    let mut rng = rng(seed);
    let mut pos = [0.0f64; 3];
    Matrix::from_fn(n, 3, |_, c| {
        let step: f64 = StandardNormal.sample(&mut rng);
        pos[c] += 0.1 * step;
        if rng.random_bool(0.02) {
            pos[c] + rng.random_range(-5.0..5.0)
        } else {
            pos[c]
        }
    })
}

/// Small autoencoder with ReLU and Identity layers and nonzero biases.
pub fn toy_spec() -> NetworkSpec {
    let l = |i, o, a| LayerSpec {
        in_dim: i,
        out_dim: o,
        activation: a,
    };
    use Activation::{Identity, Relu};
    NetworkSpec::custom(
        vec![
            l(4, 6, Relu),
            l(6, 5, Identity),
            l(5, 3, Identity),
            l(3, 5, Identity),
            l(5, 6, Relu),
            l(6, 4, Identity),
        ],
        2,
        true,
    )
    .unwrap()
}

/// Seeded (weights, batch) whose ReLU pre-activations all lie at least
/// `margin` away from the kink.
pub fn toy_instance(spec: &NetworkSpec, seed: u64, margin: f64) -> (Weights, Matrix) {
    for attempt in 0.. {
        let s = seed.wrapping_mul(7919).wrapping_add(attempt);
        let mut w = init_weights(spec, s);
        let mut r = rng(s ^ 0x5eed);
        for layer in &mut w.layers {
            for b in &mut layer.bias {
                *b = r.random_range(-0.5..0.5);
            }
        }
        let batch = gaussian_matrix(8, spec.input_dim, &mut r);
        let clear = batch.row_iter().all(|x| {
            let t = forward(spec, &w, x).unwrap();
            spec.layers
                .iter()
                .zip(&t.pre)
                .filter(|(l, _)| l.activation == Activation::Relu)
                .all(|(_, pre)| pre.iter().all(|v| v.abs() >= margin))
        });
        if clear {
            return (w, batch);
        }
    }
    unreachable!()
}

/// Largest per-coordinate relative difference, with `floor` guarding
/// coordinates where both values are essentially zero.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
