//! Conjugate gradient for symmetric positive-definite matrix-vector
//! products.

/// Approximately solve `matvec(x) = b`, starting from zero. Iteration stops
/// after `max_iters` products or once the squared residual norm drops below
/// `tol`; the iterate with the smallest residual seen is returned.
pub fn conjugate_gradient(
    mut matvec: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    max_iters: usize,
    tol: f64,
) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rdotr: f64 = dot(&r, &r);
    let mut best = (x.clone(), rdotr);

    for _ in 0..max_iters {
        if rdotr < tol {
            break;
        }
        let ap = matvec(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            break;
        }
        let alpha = rdotr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rdotr_new = dot(&r, &r);
        if rdotr_new < best.1 {
            best = (x.clone(), rdotr_new);
        }
        let beta = rdotr_new / rdotr;
        rdotr = rdotr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    best.0
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_solves_in_one_iteration() {
        let b = vec![3.0, -1.0, 2.0];
        let x = conjugate_gradient(|v| v.to_vec(), &b, 1, 1e-10);
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_system_reference() {
        // diag(1, 2) x = (1, 2) -> x = (1, 1).
        let x = conjugate_gradient(|v| vec![v[0], 2.0 * v[1]], &[1.0, 2.0], 10, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-10);
        assert!((x[1] - 1.0).abs() < 1e-10);
    }

    /// Dense Gaussian-elimination solve, the test oracle.
    fn direct_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                .unwrap();
            m.swap(col, pivot);
            rhs.swap(col, pivot);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut s = rhs[row];
            for k in row + 1..n {
                s -= m[row][k] * x[k];
            }
            x[row] = s / m[row][row];
        }
        x
    }

    #[test]
    fn random_spd_system_matches_direct_solve() {
        use crate::bamdp::{derive_stream, stream};
        use rand::Rng;
        let mut rng = derive_stream(0, stream::INIT, 0, 0);
        let n = 5;
        // A = G G^T + I is symmetric positive definite.
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>();
            }
            a[i][i] += 1.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let matvec = |v: &[f64]| -> Vec<f64> {
            a.iter().map(|row| dot(row, v)).collect()
        };
        let x = conjugate_gradient(matvec, &b, 5, 1e-14);
        // Residual against the dense solve.
        let oracle = direct_solve(&a, &b);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-8, "cg {xi} vs direct {oi}");
        }
        let residual: f64 = a
            .iter()
            .zip(&b)
            .map(|(row, bi)| (dot(row, &x) - bi).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(residual < 1e-8, "residual {residual}");
    }
}
