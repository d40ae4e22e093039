//! Just enough dense 3x3 algebra for the conic fit.

use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;

pub(crate) type Mat3 = [[f64; 3]; 3];
pub(crate) type Vec3 = [f64; 3];

pub(crate) fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub(crate) fn mul_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub(crate) fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub(crate) fn det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Inverse by adjugate; `None` when the determinant is negligible relative
/// to the matrix scale.
pub(crate) fn inverse(a: &Mat3) -> Option<Mat3> {
    let d = det(a);
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || d.abs() <= 1e-14 * scale * scale * scale {
        return None;
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = adj[i][j] / d;
        }
    }
    Some(inv)
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Real roots of x³ + p x² + q x + r, each polished by Newton steps.
fn cubic_roots(p: f64, q: f64, r: f64) -> Vec<f64> {
    let shift = p / 3.0;
    let a = q - p * p / 3.0;
    let b = 2.0 * p * p * p / 27.0 - p * q / 3.0 + r;
    let disc = b * b / 4.0 + a * a * a / 27.0;
    let mut roots = Vec::with_capacity(3);
    if a < 0.0 && disc <= 0.0 {
        let m = 2.0 * (-a / 3.0).sqrt();
        let arg = (3.0 * b / (a * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            roots.push(m * (theta - TAU * k as f64 / 3.0).cos() - shift);
        }
    } else {
        let s = disc.max(0.0).sqrt();
        let u = (-b / 2.0 + s).cbrt();
        let v = (-b / 2.0 - s).cbrt();
        roots.push(u + v - shift);
    }
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((*x + p) * *x + q) * *x + r;
            let df = (3.0 * *x + 2.0 * p) * *x + q;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *x -= step;
        }
    }
    roots
}

/// Real eigenpairs of a general 3x3 matrix, eigenvectors of unit length.
pub(crate) fn real_eigenpairs(m: &Mat3) -> Vec<(f64, Vec3)> {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = (m[0][0] * m[1][1] - m[0][1] * m[1][0])
        + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
        + (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
    let roots = cubic_roots(-tr, minors, -det(m));
    let mut out = Vec::with_capacity(roots.len());
    for lambda in roots {
        let mut s = *m;
        for (i, row) in s.iter_mut().enumerate() {
            row[i] -= lambda;
        }
        let candidates = [cross(&s[0], &s[1]), cross(&s[0], &s[2]), cross(&s[1], &s[2])];
        let best = candidates.iter().copied().max_by(|a, b| norm(a).total_cmp(&norm(b))).unwrap_or([0.0; 3]);
        let n = norm(&best);
        if n > 0.0 && n.is_finite() {
            out.push((lambda, [best[0] / n, best[1] / n, best[2] / n]));
        }
    }
    out
}

/// Solves the dense `n x n` system `a x = b` (row-major `a`) by Gaussian
/// elimination with partial pivoting. `None` if a pivot vanishes.
pub(crate) fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col] == 0.0 || !a[pivot * n + col].is_finite() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inverse(&a).unwrap();
        let id = mul(&a, &inv);
        for (i, row) in id.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-14);
            }
        }
        assert!(inverse(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]).is_none());
    }

    #[test]
    fn dense_solve() {
        let a = alloc::vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = solve(a, alloc::vec![5.0, 3.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(solve(alloc::vec![1.0, 2.0, 2.0, 4.0], alloc::vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn eigenpairs_of_nonsymmetric_matrix() {
        // similarity transform of diag(3, -1, 0.5)
        let p = [[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]];
        let d = [[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.5]];
        let m = mul(&mul(&p, &d), &inverse(&p).unwrap());
        let mut pairs = real_eigenpairs(&m);
        assert_eq!(pairs.len(), 3);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (want, (got, v)) in [-1.0, 0.5, 3.0].iter().zip(&pairs) {
            assert!((want - got).abs() < 1e-12);
            let mv = mul_vec(&m, v);
            for i in 0..3 {
                assert!((mv[i] - got * v[i]).abs() < 1e-11);
            }
        }
        let _ = transpose(&m);
    }
}
