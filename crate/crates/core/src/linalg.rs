//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

/// Eigenvalues of a real 3×3 matrix, sorted by decreasing real part
/// (ties broken by decreasing imaginary part).
pub fn eigenvalues3(m: &Matrix3<f64>) -> [Complex64; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    sort_by_real_desc(&mut out);
    out
}

pub fn sort_by_real_desc(v: &mut [Complex64]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

pub fn max_real_part(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// A null vector of `m - lambda I` for a simple eigenvalue `lambda`,
/// normalized to unit 2-norm.
pub fn eigenvector3(m: &Matrix3<f64>, lambda: Complex64) -> Vector3<Complex64> {
    let mc: Matrix3<Complex64> = m.map(|v| Complex64::new(v, 0.0)) - Matrix3::identity() * lambda;
    let rows = [
        mc.row(0).transpose(),
        mc.row(1).transpose(),
        mc.row(2).transpose(),
    ];
    // Bilinear cross products of row pairs are annihilated by both rows;
    // pick the best-conditioned pair.
    let mut best = Vector3::zeros();
    let mut best_norm = -1.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (r, s) = (&rows[i], &rows[j]);
        let c = Vector3::new(
            r[1] * s[2] - r[2] * s[1],
            r[2] * s[0] - r[0] * s[2],
            r[0] * s[1] - r[1] * s[0],
        );
        let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > best_norm {
            best_norm = n;
            best = c;
        }
    }
    if best_norm > 0.0 {
        best / Complex64::new(best_norm, 0.0)
    } else {
        best
    }
}
