use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{from_nalgebra, to_nalgebra, Matrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Ridge, relative to `trace / dim`, added to an ill-conditioned covariance.
const RIDGE: f64 = 1e-6;

/// Two-covariance PLDA: `x = mean + y + e`, `y ~ N(0, between)`, `e ~ N(0, within)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PldaModel {
    pub mean: Vec<f64>,
    pub between: Matrix,
    pub within: Matrix,
}

/// Result of [`plda_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct PldaFit {
    pub model: PldaModel,
    /// Total-data log-likelihood of the initial estimate and after every EM iteration.
    pub log_likelihoods: Vec<f64>,
    /// Number of times a ridge had to be added to keep a covariance invertible.
    pub regularizations: usize,
}

/// Sufficient statistics of a labelled dataset.
#[derive(Debug, Clone)]
pub struct PldaStats {
    dim: usize,
    n: usize,
    /// Per speaker: item count and sum of its vectors.
    speakers: Vec<(usize, DVector<f64>)>,
    /// `Σ x xᵀ` over all items.
    scatter: DMatrix<f64>,
}

impl PldaStats {
    pub fn new(x: &Matrix, labels: &[usize]) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::dims("plda labels", x.rows(), labels.len()));
        }
        let dim = x.cols();
        let n_labels = labels.iter().map(|l| l + 1).max().unwrap_or(0);
        let mut sums = alloc::vec![(0usize, DVector::<f64>::zeros(dim)); n_labels];
        for (i, &l) in labels.iter().enumerate() {
            sums[l].0 += 1;
            for (s, v) in sums[l].1.iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let speakers: Vec<_> = sums.into_iter().filter(|(c, _)| *c > 0).collect();
        Ok(Self {
            dim,
            n: x.rows(),
            speakers,
            scatter: to_nalgebra(&x.t_matmul(x)?),
        })
    }

    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    /// Marginal log-likelihood of all data, speakers integrated out.
    pub fn log_likelihood(&self, model: &PldaModel) -> Result<f64> {
        let d = self.dim as f64;
        let b = to_nalgebra(&model.between);
        let w = to_nalgebra(&model.within);
        let mu = DVector::from_column_slice(&model.mean);
        let (b_inv, logdet_b) = inverse_logdet(&b, "between-class covariance")?;
        let (w_inv, logdet_w) = inverse_logdet(&w, "within-class covariance")?;
        let b_inv_mu = &b_inv * &mu;
        let mu_b_mu = mu.dot(&b_inv_mu);
        let mut ll = -0.5 * (w_inv.component_mul(&self.scatter)).sum();
        for (count, sum) in &self.speakers {
            let n = *count as f64;
            let precision = &b_inv + &w_inv * n;
            let (cov, logdet_precision) = inverse_logdet(&precision, "speaker posterior precision")?;
            let rhs = &b_inv_mu + &w_inv * sum;
            ll += -0.5 * n * d * LN_2PI - 0.5 * n * logdet_w - 0.5 * logdet_b - 0.5 * logdet_precision
                - 0.5 * mu_b_mu
                + 0.5 * rhs.dot(&(&cov * &rhs));
        }
        Ok(ll)
    }

    /// One EM iteration. Returns the new model and whether a ridge was added.
    pub fn em_step(&self, model: &PldaModel) -> Result<(PldaModel, bool)> {
        let b = to_nalgebra(&model.between);
        let w = to_nalgebra(&model.within);
        let mu = DVector::from_column_slice(&model.mean);
        let (b_inv, _) = inverse_logdet(&b, "between-class covariance")?;
        let (w_inv, _) = inverse_logdet(&w, "within-class covariance")?;
        let b_inv_mu = &b_inv * &mu;
        let s = self.speakers.len() as f64;
        let mut mean_acc = DVector::<f64>::zeros(self.dim);
        let mut second_acc = DMatrix::<f64>::zeros(self.dim, self.dim);
        let mut within_acc = self.scatter.clone();
        for (count, sum) in &self.speakers {
            let n = *count as f64;
            let precision = &b_inv + &w_inv * n;
            let (cov, _) = inverse_logdet(&precision, "speaker posterior precision")?;
            let y = &cov * (&b_inv_mu + &w_inv * sum);
            let second = &cov + &y * y.transpose();
            let cross = &y * sum.transpose();
            within_acc -= &cross + cross.transpose();
            within_acc += &second * n;
            mean_acc += &y;
            second_acc += second;
        }
        let new_mu = mean_acc / s;
        let mut new_b = second_acc / s - &new_mu * new_mu.transpose();
        let mut new_w = within_acc / self.n as f64;
        symmetrize(&mut new_b);
        symmetrize(&mut new_w);
        let reg_b = regularize(&mut new_b, None);
        let reg_w = regularize(&mut new_w, Some(&new_b));
        Ok((
            PldaModel {
                mean: new_mu.iter().copied().collect(),
                between: from_nalgebra(&new_b),
                within: from_nalgebra(&new_w),
            },
            reg_b || reg_w,
        ))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Adds `RIDGE · trace / dim` to the diagonal when the smallest eigenvalue is
/// negligible. Falls back to the trace of `fallback + m` when `m` is ~0.
fn regularize(m: &mut DMatrix<f64>, fallback: Option<&DMatrix<f64>>) -> bool {
    let d = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 1e-10 * max && max > 0.0 {
        return false;
    }
    let mut scale = m.trace() / d as f64;
    if let Some(f) = fallback {
        if scale <= 1e-300 {
            scale = (f.trace() + m.trace()) / d as f64;
        }
    }
    if !(scale > 1e-300) {
        scale = 1.0;
    }
    let bump = RIDGE * scale - min.min(0.0);
    for i in 0..d {
        m[(i, i)] += bump;
    }
    true
}

fn inverse_logdet(m: &DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric(format!("{what} is not positive definite")))?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| libm::log(*v)).sum::<f64>();
    Ok((chol.inverse(), logdet))
}

/// EM fit of a two-covariance model, started from the sample mean, the
/// covariance of the speaker means and the pooled within-speaker covariance.
pub fn plda_fit(x: &Matrix, labels: &[usize], em_iters: usize) -> Result<PldaFit> {
    let stats = PldaStats::new(x, labels)?;
    if stats.n_speakers() < 2 {
        return Err(Error::Input("PLDA needs at least two speakers".into()));
    }
    if !stats.speakers.iter().any(|(c, _)| *c >= 2) {
        return Err(Error::Input("PLDA needs a speaker with at least two sessions".into()));
    }
    let d = stats.dim;
    let mean = x.column_means();
    let mu = DVector::from_column_slice(&mean);
    let mut between = DMatrix::<f64>::zeros(d, d);
    let mut within = stats.scatter.clone();
    for (count, sum) in &stats.speakers {
        let m = sum / *count as f64;
        let dev = &m - &mu;
        between += &dev * dev.transpose();
        within -= &m * sum.transpose();
    }
    between /= stats.n_speakers() as f64;
    within /= stats.n as f64;
    symmetrize(&mut between);
    symmetrize(&mut within);
    let mut regularizations = 0;
    regularizations += usize::from(regularize(&mut between, None));
    regularizations += usize::from(regularize(&mut within, Some(&between)));
    let mut model = PldaModel {
        mean,
        between: from_nalgebra(&between),
        within: from_nalgebra(&within),
    };
    let mut log_likelihoods = alloc::vec![stats.log_likelihood(&model)?];
    for _ in 0..em_iters {
        let (next, reg) = stats.em_step(&model)?;
        regularizations += usize::from(reg);
        model = next;
        log_likelihoods.push(stats.log_likelihood(&model)?);
    }
    Ok(PldaFit {
        model,
        log_likelihoods,
        regularizations,
    })
}

/// Precomputed quadratic form for fast pairwise scoring:
/// `llr = ½ aᵀQa + ½ bᵀQb + aᵀPb + c` on mean-centered inputs.
#[derive(Debug, Clone)]
pub struct PldaScorer {
    mean: Vec<f64>,
    q: DMatrix<f64>,
    p: DMatrix<f64>,
    constant: f64,
}

impl PldaScorer {
    pub fn new(model: &PldaModel) -> Result<Self> {
        let b = to_nalgebra(&model.between);
        let t = &b + to_nalgebra(&model.within);
        let (t_inv, logdet_t) = inverse_logdet(&t, "total covariance")?;
        let schur = &t - &b * &t_inv * &b;
        let (schur_inv, logdet_schur) = inverse_logdet(&schur, "same-speaker Schur complement")?;
        let q = &t_inv - &schur_inv;
        let mut p = &schur_inv * &b * &t_inv;
        symmetrize(&mut p);
        Ok(Self {
            mean: model.mean.clone(),
            q,
            p,
            constant: 0.5 * logdet_t - 0.5 * logdet_schur,
        })
    }

    /// Log-likelihood ratio of "same speaker" against "different speakers".
    pub fn score(&self, enroll: &[f64], test: &[f64]) -> Result<f64> {
        let d = self.mean.len();
        if enroll.len() != d || test.len() != d {
            return Err(Error::dims("plda score", d, if enroll.len() != d { enroll.len() } else { test.len() }));
        }
        let a = DVector::from_iterator(d, enroll.iter().zip(&self.mean).map(|(x, m)| x - m));
        let b = DVector::from_iterator(d, test.iter().zip(&self.mean).map(|(x, m)| x - m));
        let qa = a.dot(&(&self.q * &a));
        let qb = b.dot(&(&self.q * &b));
        let cross = 0.5 * (a.dot(&(&self.p * &b)) + b.dot(&(&self.p * &a)));
        Ok(0.5 * (qa + qb) + cross + self.constant)
    }
}

impl PldaModel {
    pub fn score(&self, enroll: &[f64], test: &[f64]) -> Result<f64> {
        PldaScorer::new(self)?.score(enroll, test)
    }
}

/// Scales every row to Euclidean norm `sqrt(dim)`. Zero rows stay zero.
pub fn length_normalize(x: &Matrix) -> Matrix {
    let target = libm::sqrt(x.cols() as f64);
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
        if norm > 0.0 {
            let s = target / norm;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
    out
}
