use crate::rational::{to_f64, Rational};
use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};

pub type Matrix = Vec<Vec<Rational>>;

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![Rational::zero(); m]; n];
    for i in 0..n {
        for (k, aik) in a[i].iter().enumerate() {
            if aik.is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * &b[k][j];
            }
        }
    }
    out
}

pub fn mat_pow(p: &Matrix, mut g: u64) -> Matrix {
    let mut result = identity(p.len());
    let mut base = p.clone();
    while g > 0 {
        if g & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        g >>= 1;
        if g > 0 {
            base = mat_mul(&base, &base);
        }
    }
    result
}

/// Row vector times matrix.
pub fn vec_mul(v: &[Rational], p: &Matrix) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); p[0].len()];
    for (i, vi) in v.iter().enumerate() {
        if vi.is_zero() {
            continue;
        }
        for (j, pij) in p[i].iter().enumerate() {
            out[j] += vi * pij;
        }
    }
    out
}

/// Exact solution of `π P = π`, `Σ π = 1`; `None` if the system is singular.
pub fn stationary(p: &Matrix) -> Option<Vec<Rational>> {
    let n = p.len();
    // Rows of (P^T - I), last row replaced by the normalization.
    let mut a: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row: Vec<Rational> = (0..n)
                .map(|j| {
                    let v = p[j][i].clone();
                    if i == j {
                        v - Rational::one()
                    } else {
                        v
                    }
                })
                .collect();
            row.push(Rational::zero());
            row
        })
        .collect();
    a[n - 1] = vec![Rational::one(); n + 1];
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..=n {
                    let sub = &factor * &a[col][c];
                    a[r][c] -= sub;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n].clone()).collect())
}

/// Smallest `k <= n^2` with `P^k` entrywise positive.
pub fn positive_power(p: &Matrix) -> Option<usize> {
    let n = p.len();
    let base: Vec<Vec<bool>> = p.iter().map(|r| r.iter().map(|v| v.is_positive()).collect()).collect();
    let mut cur = base.clone();
    for k in 1..=n * n {
        if cur.iter().all(|r| r.iter().all(|&b| b)) {
            return Some(k);
        }
        cur = (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|m| cur[i][m] && base[m][j])).collect())
            .collect();
    }
    None
}

/// Dobrushin contraction coefficient `½ max_{s,s'} Σ_k |M_sk - M_s'k|`.
pub fn dobrushin(m: &Matrix) -> Rational {
    let two = Rational::from_integer(2.into());
    let mut best = Rational::zero();
    for a in 0..m.len() {
        for b in a + 1..m.len() {
            let d: Rational = m[a].iter().zip(&m[b]).map(|(x, y)| (x - y).abs()).sum();
            if d > best {
                best = d;
            }
        }
    }
    best / two
}

/// Second-largest eigenvalue modulus.
pub fn second_eigen_modulus(p: &Matrix) -> f64 {
    let n = p.len();
    if n < 2 {
        return 0.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| to_f64(&p[i][j]));
    let mut moduli: Vec<f64> = match m.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect::<Vec<_>>() {
        v if v.len() == n => v,
        _ => return power_iteration_rate(&m),
    };
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let rho = moduli[1];
    if rho < 1e-12 {
        0.0
    } else {
        rho.min(1.0)
    }
}

/// Fallback rate estimate from `‖P^k - P^{k+1}‖^{1/k}`.
fn power_iteration_rate(m: &DMatrix<f64>) -> f64 {
    let mut pk = m.clone();
    for _ in 0..6 {
        pk = &pk * &pk;
    }
    let diff = (&pk * m - &pk).abs().max();
    if diff <= 0.0 {
        0.0
    } else {
        diff.powf(1.0 / 64.0)
    }
}

/// Floating-point powers `P^(2^j)` with renormalized rows.
#[derive(Clone, Debug)]
pub struct FloatPowers {
    powers: Vec<Vec<Vec<f64>>>,
}

impl FloatPowers {
    pub fn new(p: &Matrix) -> Self {
        let mut cur: Vec<Vec<f64>> = p.iter().map(|r| r.iter().map(to_f64).collect()).collect();
        let mut powers = Vec::with_capacity(64);
        for _ in 0..64 {
            normalize_rows(&mut cur);
            powers.push(cur.clone());
            cur = square(&cur);
        }
        FloatPowers { powers }
    }

    pub fn power(&self, j: usize) -> &[Vec<f64>] {
        &self.powers[j]
    }

    /// Distribution after `gap` steps from `state`, written into `out`.
    pub fn advance(&self, state: usize, gap: u64, scratch: &mut Vec<f64>, out: &mut Vec<f64>) {
        let n = self.powers[0].len();
        out.clear();
        out.resize(n, 0.0);
        out[state] = 1.0;
        let mut g = gap;
        let mut j = 0;
        while g > 0 {
            if g & 1 == 1 {
                let pj = &self.powers[j];
                scratch.clear();
                scratch.resize(n, 0.0);
                for (i, &vi) in out.iter().enumerate() {
                    if vi != 0.0 {
                        for (k, &pik) in pj[i].iter().enumerate() {
                            scratch[k] += vi * pik;
                        }
                    }
                }
                let total: f64 = scratch.iter().sum();
                for (o, s) in out.iter_mut().zip(scratch.iter()) {
                    *o = s / total;
                }
            }
            g >>= 1;
            j += 1;
        }
    }
}

fn normalize_rows(m: &mut [Vec<f64>]) {
    for row in m.iter_mut() {
        let total: f64 = row.iter().sum();
        debug_assert!((total - 1.0).abs() < 1e-12 || total > 0.0);
        for v in row.iter_mut() {
            *v /= total;
        }
    }
}

fn square(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| m[i][k] * m[k][j]).sum()).collect())
        .collect()
}
