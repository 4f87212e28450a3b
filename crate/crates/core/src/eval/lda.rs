use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{from_nalgebra, to_nalgebra, Matrix};

/// Fisher LDA projection: `y = (x - mean) · projection`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaProjection {
    pub mean: Vec<f64>,
    /// `input_dim × out_dim`; columns sorted by decreasing eigenvalue and
    /// scaled so the projected within-class scatter is the identity.
    pub projection: Matrix,
    pub eigenvalues: Vec<f64>,
}

impl LdaProjection {
    pub fn out_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        x.sub_row_vector(&self.mean)?.matmul(&self.projection)
    }
}

/// Within- and between-class scatter (both normalized by N) and the global mean.
pub(crate) fn scatter(x: &Matrix, labels: &[usize]) -> Result<(Matrix, Matrix, Vec<f64>, usize)> {
    if labels.len() != x.rows() {
        return Err(Error::dims("lda labels", x.rows(), labels.len()));
    }
    let n_labels = labels.iter().map(|l| l + 1).max().unwrap_or(0);
    let d = x.cols();
    let mut sums = Matrix::zeros(n_labels, d);
    let mut counts = alloc::vec![0usize; n_labels];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    let n_classes = counts.iter().filter(|&&c| c > 0).count();
    let mean = x.column_means();
    let mut class_means = sums;
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            class_means.row_mut(c).iter_mut().for_each(|v| *v /= count as f64);
        }
    }
    let mut within_dev = x.clone();
    for (i, &l) in labels.iter().enumerate() {
        let m = class_means.row(l).to_vec();
        for (v, mm) in within_dev.row_mut(i).iter_mut().zip(&m) {
            *v -= mm;
        }
    }
    let n = x.rows() as f64;
    let mut sw = within_dev.t_matmul(&within_dev)?;
    sw.scale(1.0 / n);
    // Between-class deviations weighted by sqrt(count).
    let mut between_dev = Matrix::zeros(n_labels, d);
    for c in 0..n_labels {
        if counts[c] == 0 {
            continue;
        }
        let w = libm::sqrt(counts[c] as f64);
        for ((dst, cm), gm) in between_dev.row_mut(c).iter_mut().zip(class_means.row(c)).zip(&mean) {
            *dst = w * (cm - gm);
        }
    }
    let mut sb = between_dev.t_matmul(&between_dev)?;
    sb.scale(1.0 / n);
    Ok((sw, sb, mean, n_classes))
}

/// Solves `Sb v = λ Sw v` and keeps the `out_dim` leading directions.
///
/// `ridge` adds `ridge · trace(Sw) / dim` to the diagonal of `Sw`; with
/// `ridge == 0` a singular within-class scatter is an error.
pub fn lda_fit(x: &Matrix, labels: &[usize], out_dim: usize, ridge: f64) -> Result<LdaProjection> {
    let d = x.cols();
    let (sw, sb, mean, n_classes) = scatter(x, labels)?;
    if out_dim == 0 || out_dim >= n_classes || out_dim > d {
        return Err(Error::Input(format!(
            "LDA output dimension {out_dim} must be in 1..={} (fewer than {n_classes} classes, at most input dim {d})",
            (n_classes.saturating_sub(1)).min(d)
        )));
    }
    let mut sw = to_nalgebra(&sw);
    if ridge > 0.0 {
        let bump = ridge * sw.trace() / d as f64;
        for i in 0..d {
            sw[(i, i)] += bump;
        }
    }
    let chol = sw.cholesky().ok_or_else(|| {
        Error::Numeric(
            "within-class scatter is singular; use a positive ridge (e.g. 1e-6) or reduce the input dimension".into(),
        )
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("Cholesky factor of the within-class scatter is not invertible".into()))?;
    let sb = to_nalgebra(&sb);
    let c = &l_inv * sb * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l_inv_t = l_inv.transpose();
    let mut proj = DMatrix::<f64>::zeros(d, out_dim);
    let mut eigenvalues = Vec::with_capacity(out_dim);
    for (k, &idx) in order.iter().take(out_dim).enumerate() {
        let mut col = &l_inv_t * eig.eigenvectors.column(idx);
        // Fix the sign: largest-magnitude entry positive.
        let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        proj.set_column(k, &col);
        eigenvalues.push(eig.eigenvalues[idx]);
    }
    Ok(LdaProjection {
        mean,
        projection: from_nalgebra(&proj),
        eigenvalues,
    })
}
