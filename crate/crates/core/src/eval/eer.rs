use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One point on the DET curve. A trial is accepted when `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub false_accept: f64,
    pub false_reject: f64,
}

/// Operating points for every distinct score, from the highest threshold
/// (`+inf`, nothing accepted) down to the lowest score (everything accepted).
/// Tied scores form a single step.
pub fn det_points(scores: &[f64], is_target: &[bool]) -> Result<Vec<OperatingPoint>> {
    if scores.len() != is_target.len() {
        return Err(Error::dims("eer labels", scores.len(), is_target.len()));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Input(alloc::format!("score {bad} is not a number")));
    }
    let n_target = is_target.iter().filter(|&&t| t).count();
    let n_nontarget = is_target.len() - n_target;
    if n_target == 0 || n_nontarget == 0 {
        return Err(Error::Input(
            "need at least one target and one nontarget trial".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push(OperatingPoint {
        threshold: f64::INFINITY,
        false_accept: 0.0,
        false_reject: 1.0,
    });
    let (mut accepted_targets, mut accepted_nontargets) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if is_target[order[i]] {
                accepted_targets += 1;
            } else {
                accepted_nontargets += 1;
            }
            i += 1;
        }
        points.push(OperatingPoint {
            threshold,
            false_accept: accepted_nontargets as f64 / n_nontarget as f64,
            false_reject: (n_target - accepted_targets) as f64 / n_target as f64,
        });
    }
    Ok(points)
}

/// Equal error rate: where the piecewise-linear DET curve crosses
/// `false_accept == false_reject`, interpolating between the two bracketing
/// operating points.
pub fn eer(scores: &[f64], is_target: &[bool]) -> Result<f64> {
    let points = det_points(scores, is_target)?;
    let gap = |p: &OperatingPoint| p.false_reject - p.false_accept;
    // gap starts at 1 and ends at -1, decreasing monotonically.
    let idx = points
        .iter()
        .position(|p| gap(p) <= 0.0)
        .expect("last point accepts everything");
    let cur = points[idx];
    if gap(&cur) == 0.0 {
        return Ok(cur.false_accept);
    }
    let prev = points[idx - 1];
    let lambda = gap(&prev) / (gap(&prev) - gap(&cur));
    Ok(prev.false_accept + lambda * (cur.false_accept - prev.false_accept))
}
