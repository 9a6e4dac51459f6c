use crate::error::{Error, Result};

/// Equal-error operating point of a distance used as a similarity test
/// (`similar` iff `distance <= threshold`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eer {
    /// `max(FPR, FNR)` at the best threshold.
    pub rate: f64,
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
}

/// Sweeps every distinct distance (plus a threshold below all of them) and
/// returns the point minimizing `max(FPR, FNR)`; ties keep the smallest
/// threshold.
pub fn equal_error_rate(positive: &[f64], negative: &[f64]) -> Result<Eer> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::EmptyInput("positive or negative distances"));
    }
    if positive.iter().chain(negative).any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN distance".into()));
    }
    let mut events: Vec<(f64, bool)> = positive
        .iter()
        .map(|&d| (d, true))
        .chain(negative.iter().map(|&d| (d, false)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (np, nn) = (positive.len() as f64, negative.len() as f64);

    let lowest = events[0].0;
    let below = if lowest.is_finite() {
        lowest - 1.0
    } else {
        f64::NEG_INFINITY
    };
    let mut best = Eer {
        rate: 1.0,
        threshold: below,
        false_positive_rate: 0.0,
        false_negative_rate: 1.0,
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            if events[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let fpr = fp as f64 / nn;
        let fnr = (np - tp as f64) / np;
        let rate = fpr.max(fnr);
        if rate < best.rate {
            best = Eer {
                rate,
                threshold: t,
                false_positive_rate: fpr,
                false_negative_rate: fnr,
            };
        }
    }
    Ok(best)
}
