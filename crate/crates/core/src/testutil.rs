#![allow(clippy::needless_range_loop)]

//! Test-only helpers: random instances and a Jacobi eigenvalue oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{ComplexMatrix, C64};

/// i.i.d. CN(0, 1) entries.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
    })
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Works on the real symmetric embedding `[[Re, -Im], [Im, Re]]` with cyclic
/// Jacobi rotations; every eigenvalue shows up twice there, so every other
/// one is kept.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows();
    let size = 2 * n;
    let mut s = vec![vec![0.0f64; size]; size];
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            s[i][j] = z.re;
            s[i + n][j + n] = z.re;
            s[i][j + n] = -z.im;
            s[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..size)
            .flat_map(|i| (0..size).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i][j] * s[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..size {
            for q in p + 1..size {
                if s[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..size {
                    let skp = s[k][p];
                    let skq = s[k][q];
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..size {
                    let spk = s[p][k];
                    let sqk = s[q][k];
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..size).map(|i| s[i][i]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.into_iter().step_by(2).collect()
}

#[test]
fn eigen_oracle_on_known_matrix() {
    // [[2, j], [-j, 2]] has eigenvalues 1 and 3
    let a = ComplexMatrix::from_rows(&[
        [C64::new(2.0, 0.0), C64::new(0.0, 1.0)],
        [C64::new(0.0, -1.0), C64::new(2.0, 0.0)],
    ])
    .unwrap();
    let ev = hermitian_eigenvalues(&a);
    assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
}
