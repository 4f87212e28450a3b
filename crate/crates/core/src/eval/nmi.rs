use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::ClusterAssignment;

fn counts(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for &l in labels {
        *out.entry(l).or_insert(0) += 1;
    }
    out
}

/// Sums in sorted order so the result does not depend on label names.
fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Shannon entropy (nats) of a labelling.
pub fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    canonical_sum(
        counts(labels)
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * libm::log(p)
            })
            .collect(),
    )
}

/// Mutual information (nats) between two labellings of the same items.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims("mutual_information", a.len(), b.len()));
    }
    let n = a.len() as f64;
    let ca = counts(a);
    let cb = counts(b);
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    Ok(canonical_sum(
        joint
            .iter()
            .map(|(&(x, y), &c)| {
                let pxy = c as f64 / n;
                pxy * libm::log(c as f64 * n / (ca[&x] as f64 * cb[&y] as f64))
            })
            .collect(),
    ))
}

/// NMI with arithmetic-mean normalization, `MI / ((H(a) + H(b)) / 2)`.
/// Two single-cluster partitions give 0.
pub fn nmi(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<f64> {
    if a.labels.len() != b.labels.len() {
        return Err(Error::dims("nmi", a.labels.len(), b.labels.len()));
    }
    let ha = entropy(&a.labels);
    let hb = entropy(&b.labels);
    let denom = (ha + hb) / 2.0;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    let mi = mutual_information(&a.labels, &b.labels)?;
    Ok((mi / denom).clamp(0.0, 1.0))
}
