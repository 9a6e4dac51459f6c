use nalgebra::DMatrix;

use super::eigen::{top_generalized, KrylovParams};
use super::roc::{equal_error_rate, Eer};
use super::MetricModel;
use crate::error::{Error, Result};

/// Labelled nucleotide pairs: positives are transformation-related, negatives
/// unrelated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub positives: Vec<(Vec<f32>, Vec<f32>)>,
    pub negatives: Vec<(Vec<f32>, Vec<f32>)>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Common nucleotide dimension.
    pub fn dim(&self) -> Result<usize> {
        let mut all = self.positives.iter().chain(&self.negatives);
        let d = all
            .next()
            .map(|p| p.0.len())
            .ok_or(Error::EmptyInput("training pairs"))?;
        for (a, b) in self.positives.iter().chain(&self.negatives) {
            for v in [a, b] {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
            }
        }
        Ok(d)
    }

    /// Pairs in the order used by weight vectors: positives, then negatives.
    fn pairs(&self) -> impl Iterator<Item = (&(Vec<f32>, Vec<f32>), bool)> {
        self.positives
            .iter()
            .map(|p| (p, true))
            .chain(self.negatives.iter().map(|p| (p, false)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Bits to learn.
    pub bits: usize,
    /// Hamming threshold; `None` means `bits / 2`.
    pub threshold: Option<f32>,
    pub subspace_size: usize,
    /// Relative regularization: `eps = regularization * trace(C) / d`.
    pub regularization: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            bits: 64,
            threshold: None,
            subspace_size: 10,
            regularization: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.subspace_size == 0 {
            return Err(Error::InvalidParameter(
                "bits and subspace_size must be at least 1".into(),
            ));
        }
        if !(self.regularization > 0.0 && self.regularization.is_finite()) {
            return Err(Error::InvalidParameter("regularization must be > 0".into()));
        }
        Ok(())
    }
}

/// One learned bit: `h(x, x') = +1` iff `x` and `x'` fall on the same side of
/// the hyperplane `row . v + offset = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakClassifier {
    pub row: Vec<f32>,
    pub offset: f32,
    /// Weighted exponential loss of the 1-bit classifier.
    pub loss: f64,
    /// Weighted classification error (normalized weights).
    pub error: f64,
    /// Index of the chosen eigenvector within the candidate subspace.
    pub candidate: usize,
    /// Generalized eigenvalue of the chosen direction.
    pub eigenvalue: f64,
    /// Best loss reached by each candidate direction.
    pub candidate_losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundStats {
    pub error: f64,
    pub alpha: f64,
    /// `2 sqrt(L_P L_N)` after the round, where `L_c = sum_{k in c} w0_k
    /// exp(-y_k F(x_k))`; it shrinks by at least `2 sqrt(err (1 - err))`
    /// per round.
    pub boost_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub rounds: Vec<RoundStats>,
    pub requested_bits: usize,
    /// True when boosting stopped early because a round could not beat chance.
    pub truncated: bool,
}

pub(crate) fn dot(row: &[f32], x: &[f32]) -> f64 {
    row.iter().zip(x).map(|(&a, &v)| a as f64 * v as f64).sum()
}

fn difference_matrix<'a>(
    pairs: impl Iterator<Item = &'a (Vec<f32>, Vec<f32>)>,
    rows: usize,
    d: usize,
) -> DMatrix<f64> {
    // Stored transposed (d x m) so each difference is a contiguous column.
    let mut m = DMatrix::zeros(d, rows);
    for (k, (a, b)) in pairs.enumerate() {
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            m[(i, k)] = *x as f64 - *y as f64;
        }
    }
    m
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter().map(|v| v / s).collect()
    } else {
        vec![1.0 / w.len() as f64; w.len()]
    }
}

fn weighted_trace(dt: &DMatrix<f64>, w: &[f64]) -> f64 {
    dt.column_iter()
        .zip(w)
        .map(|(c, &wk)| wk * c.norm_squared())
        .sum()
}

/// Best split threshold for projected pairs.
///
/// A pair is split by `t` when `lo < t <= hi`. Returns `(t, loss)`.
fn best_threshold(proj: &[(f64, f64)], labels: &[bool], w: &[f64]) -> (f64, f64) {
    let e = std::f64::consts::E;
    let ie = 1.0 / e;
    let mut loss: f64 = labels
        .iter()
        .zip(w)
        .map(|(&pos, &wk)| wk * if pos { ie } else { e })
        .sum();
    let lowest = proj
        .iter()
        .map(|p| p.0.min(p.1))
        .fold(f64::INFINITY, f64::min);
    let mut best = (lowest - 1.0, loss);

    // Entering the split region costs (e - 1/e) for positives and saves it
    // for negatives.
    let delta = |k: usize| {
        if labels[k] {
            w[k] * (e - ie)
        } else {
            -w[k] * (e - ie)
        }
    };
    let mut events: Vec<(f64, usize, bool)> = Vec::with_capacity(proj.len() * 2);
    for (k, &(a, b)) in proj.iter().enumerate() {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        events.push((lo, k, true));
        events.push((hi, k, false));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut i = 0;
    while i < events.len() {
        let v = events[i].0;
        while i < events.len() && events[i].0 == v {
            let (_, k, enter) = events[i];
            loss += if enter { delta(k) } else { -delta(k) };
            i += 1;
        }
        if i < events.len() {
            let t = 0.5 * (v + events[i].0);
            if loss < best.1 {
                best = (t, loss);
            }
        }
    }
    best
}

/// Fits one bit under the given pair weights (positives first, then
/// negatives).
pub fn weak_learner(
    set: &TrainingSet,
    weights: &[f64],
    config: &TrainConfig,
) -> Result<WeakClassifier> {
    config.validate()?;
    if set.positives.is_empty() || set.negatives.is_empty() {
        return Err(Error::EmptyInput("positive and negative pairs"));
    }
    let diffs = Differences::new(set)?;
    weak_learner_seeded(set, &diffs, weights, config, config.seed)
}

/// Pair differences, one column per pair, for each class.
struct Differences {
    positive: DMatrix<f64>,
    negative: DMatrix<f64>,
}

impl Differences {
    fn new(set: &TrainingSet) -> Result<Self> {
        let d = set.dim()?;
        Ok(Differences {
            positive: difference_matrix(set.positives.iter(), set.positives.len(), d),
            negative: difference_matrix(set.negatives.iter(), set.negatives.len(), d),
        })
    }
}

fn weak_learner_seeded(
    set: &TrainingSet,
    diffs: &Differences,
    weights: &[f64],
    config: &TrainConfig,
    seed: u64,
) -> Result<WeakClassifier> {
    if weights.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(
            "pair weights must be finite and >= 0".into(),
        ));
    }
    let (dp, dn) = (&diffs.positive, &diffs.negative);
    let d = dp.nrows();
    let np = set.positives.len();
    let wp = normalized(&weights[..np]);
    let wn = normalized(&weights[np..]);

    let (tp, tn) = (weighted_trace(dp, &wp), weighted_trace(dn, &wn));
    let eps_for = |t: f64| {
        let t = if t > 0.0 { t } else { 0.5 * (tp + tn) };
        config.regularization * t / d as f64
    };
    let (eps_p, eps_n) = (eps_for(tp), eps_for(tn));
    if !(eps_p > 0.0 && eps_n > 0.0) {
        return Err(Error::SingularCovariance);
    }

    let mut scaled = dp.clone();
    for (mut c, &wk) in scaled.column_iter_mut().zip(&wp) {
        c *= wk;
    }
    let mut cp = &scaled * dp.transpose();
    for i in 0..d {
        cp[(i, i)] += eps_p;
    }
    let apply_cn = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let mut y = dn.tr_mul(x);
        for (mut r, &wk) in y.row_iter_mut().zip(&wn) {
            r *= wk;
        }
        let mut out = dn * y;
        out += x * eps_n;
        out
    };
    let k = config.subspace_size.min(d);
    let eig = top_generalized(
        &cp,
        apply_cn,
        k,
        &KrylovParams {
            block: (k + 6).max(16),
            iterations: 6,
            seed,
        },
    )?;

    let labels: Vec<bool> = set.pairs().map(|(_, pos)| pos).collect();
    let w = normalized(weights);
    let mut best: Option<WeakClassifier> = None;
    let mut candidate_losses = Vec::with_capacity(eig.vectors.len());
    for (c, v) in eig.vectors.iter().enumerate() {
        if v.iter().any(|x| !x.is_finite()) {
            continue;
        }
        let mut row: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        let n = row.iter().map(|&a| a as f64 * a as f64).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        row.iter_mut().for_each(|a| *a = (*a as f64 / n) as f32);
        let proj: Vec<(f64, f64)> = set
            .pairs()
            .map(|((a, b), _)| (dot(&row, a), dot(&row, b)))
            .collect();
        let (t, _) = best_threshold(&proj, &labels, &w);
        let offset = (-t) as f32;
        let (loss, error) = evaluate(&proj, &labels, &w, offset);
        candidate_losses.push(loss);
        if best.as_ref().is_none_or(|b| loss < b.loss) {
            best = Some(WeakClassifier {
                row,
                offset,
                loss,
                error,
                candidate: c,
                eigenvalue: eig.values[c],
                candidate_losses: Vec::new(),
            });
        }
    }
    let mut best = best.ok_or(Error::SingularCovariance)?;
    best.candidate_losses = candidate_losses;
    Ok(best)
}

/// Loss and error of the bit with the given offset, using the same sign test
/// as inference.
fn evaluate(proj: &[(f64, f64)], labels: &[bool], w: &[f64], offset: f32) -> (f64, f64) {
    let e = std::f64::consts::E;
    let (mut loss, mut err) = (0.0, 0.0);
    for ((&(a, b), &pos), &wk) in proj.iter().zip(labels).zip(w) {
        let same = (a + offset as f64 >= 0.0) == (b + offset as f64 >= 0.0);
        let correct = same == pos;
        loss += wk * if correct { 1.0 / e } else { e };
        if !correct {
            err += wk;
        }
    }
    (loss, err)
}

/// Boosts `config.bits` weak classifiers into a metric model.
pub fn train_metric(set: &TrainingSet, config: &TrainConfig) -> Result<MetricModel> {
    train_metric_traced(set, config).map(|(m, _)| m)
}

pub fn train_metric_traced(
    set: &TrainingSet,
    config: &TrainConfig,
) -> Result<(MetricModel, TrainReport)> {
    config.validate()?;
    if set.positives.is_empty() || set.negatives.is_empty() {
        return Err(Error::EmptyInput("positive and negative pairs"));
    }
    let d = set.dim()?;
    let np = set.positives.len() as f64;
    let nn = set.negatives.len() as f64;
    let labels: Vec<bool> = set.pairs().map(|(_, pos)| pos).collect();
    let w0: Vec<f64> = labels
        .iter()
        .map(|&pos| if pos { 0.5 / np } else { 0.5 / nn })
        .collect();
    let diffs = Differences::new(set)?;
    let positives = set.positives.len();
    let mut w = w0.clone();
    let mut margin = vec![0.0f64; labels.len()];
    let mut rows = Vec::new();
    let mut offsets = Vec::new();
    let mut rounds = Vec::new();
    let mut truncated = false;

    for round in 0..config.bits {
        let seed = config.seed.wrapping_add(round as u64);
        let weak = weak_learner_seeded(set, &diffs, &w, config, seed)?;
        if weak.error >= 0.5 {
            if rows.is_empty() {
                return Err(Error::WeakLearnerFailure {
                    round,
                    error: weak.error,
                });
            }
            truncated = true;
            break;
        }
        let err = weak.error.max(1e-12);
        let alpha = 0.5 * ((1.0 - err) / err).ln();
        for (k, ((a, b), pos)) in set.pairs().enumerate() {
            let same = (dot(&weak.row, a) + weak.offset as f64 >= 0.0)
                == (dot(&weak.row, b) + weak.offset as f64 >= 0.0);
            let yh = if same == pos { 1.0 } else { -1.0 };
            margin[k] += alpha * yh;
            w[k] *= (-alpha * yh).exp();
        }
        // Each class keeps half of the total weight.
        let (wp, wn) = w.split_at_mut(positives);
        for class in [wp, wn] {
            let s: f64 = class.iter().sum();
            class.iter_mut().for_each(|v| *v *= 0.5 / s);
        }
        let class_loss = |r: std::ops::Range<usize>| -> f64 {
            w0[r.clone()]
                .iter()
                .zip(&margin[r])
                .map(|(a, m)| a * (-m).exp())
                .sum()
        };
        let boost_loss = 2.0 * (class_loss(0..positives) * class_loss(positives..w.len())).sqrt();
        rounds.push(RoundStats {
            error: weak.error,
            alpha,
            boost_loss,
        });
        rows.push(weak.row);
        offsets.push(weak.offset);
    }
    debug_assert!(rows.iter().all(|r| r.len() == d));
    let bits = rows.len();
    let threshold = config
        .threshold
        .unwrap_or(bits as f32 / 2.0)
        .min(bits as f32);
    let model = MetricModel::new(rows, offsets, threshold)?;
    Ok((
        model,
        TrainReport {
            rounds,
            requested_bits: config.bits,
            truncated,
        },
    ))
}

/// Sets the model threshold to the equal-error point on validation pairs.
pub fn calibrate_threshold(
    model: MetricModel,
    validation: &TrainingSet,
) -> Result<(MetricModel, Eer)> {
    let dist = |pairs: &[(Vec<f32>, Vec<f32>)]| -> Result<Vec<f64>> {
        pairs
            .iter()
            .map(|(a, b)| model.distance(a, b).map(f64::from))
            .collect()
    };
    let eer = equal_error_rate(&dist(&validation.positives)?, &dist(&validation.negatives)?)?;
    let d0 = (eer.threshold + 0.5).clamp(0.0, model.bits() as f64) as f32;
    Ok((model.with_threshold(d0)?, eer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(bits: usize) -> TrainConfig {
        TrainConfig {
            bits,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn identical_positives_axis_negatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = 6;
        let mut set = TrainingSet::default();
        for _ in 0..30 {
            let x: Vec<f32> = (0..d).map(|_| rng.random::<f32>()).collect();
            set.positives.push((x.clone(), x));
            let a: Vec<f32> = (0..d).map(|_| rng.random::<f32>()).collect();
            let mut b = a.clone();
            b[0] += if rng.random::<bool>() { 1.0 } else { -1.0 } * (0.5 + rng.random::<f32>());
            set.negatives.push((a, b));
        }
        let w = vec![1.0; set.len()];
        let mut c = cfg(1);
        c.subspace_size = 1;
        let weak = weak_learner(&set, &w, &c).unwrap();
        let cos = weak.row[0].abs() as f64;
        let angle = cos.min(1.0).acos();
        assert!(angle < 1e-6, "angle {angle}");
    }

    #[test]
    fn isotropic_case_returns_best_candidate() {
        let d = 3;
        let mut set = TrainingSet::default();
        let e = |i: usize, s: f32| {
            let mut v = vec![0f32; d];
            v[i] = s;
            v
        };
        for i in 0..d {
            for s in [1.0, -1.0] {
                set.positives.push((e(i, s), vec![0.0; d]));
                set.negatives.push((e(i, s), vec![0.0; d]));
            }
        }
        let w = vec![1.0; set.len()];
        let weak = weak_learner(&set, &w, &cfg(1)).unwrap();
        let min = weak
            .candidate_losses
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(weak.loss, min);
    }

    fn separable_2d(seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = TrainingSet::default();
        for _ in 0..40 {
            let c = if rng.random::<bool>() { -2.0 } else { 2.0 };
            let a = vec![c + rng.random::<f32>() * 0.5, rng.random::<f32>()];
            let b = vec![c + rng.random::<f32>() * 0.5, rng.random::<f32>()];
            set.positives.push((a, b));
            let a = vec![-2.0 + rng.random::<f32>() * 0.5, rng.random::<f32>()];
            let b = vec![2.0 + rng.random::<f32>() * 0.5, rng.random::<f32>()];
            set.negatives.push((a, b));
        }
        set
    }

    #[test]
    fn separable_2d_beats_chance() {
        let set = separable_2d(3);
        let w = vec![1.0; set.len()];
        let weak = weak_learner(&set, &w, &cfg(1)).unwrap();
        assert!(weak.error < 0.5);
        // Exhaustive oracle over every midpoint of the chosen direction.
        let labels: Vec<bool> = set.pairs().map(|(_, p)| p).collect();
        let wn = normalized(&w);
        let proj: Vec<(f64, f64)> = set
            .pairs()
            .map(|((a, b), _)| (dot(&weak.row, a), dot(&weak.row, b)))
            .collect();
        let mut vals: Vec<f64> = proj.iter().flat_map(|p| [p.0, p.1]).collect();
        vals.sort_by(f64::total_cmp);
        let mut best = f64::INFINITY;
        for win in vals.windows(2) {
            let t = 0.5 * (win[0] + win[1]);
            best = best.min(evaluate(&proj, &labels, &wn, (-t) as f32).0);
        }
        assert!(weak.loss <= best + 1e-12);
    }

    #[test]
    fn separable_1d_single_bit() {
        let mut set = TrainingSet::default();
        for i in 0..10 {
            let v = i as f32 * 0.1;
            set.positives.push((vec![v], vec![v + 0.05]));
            set.negatives.push((vec![-1.0 - v], vec![1.0 + v]));
        }
        let mut c = cfg(1);
        c.threshold = Some(0.5);
        let m = train_metric(&set, &c).unwrap();
        for (a, b) in &set.positives {
            assert_eq!(m.distance(a, b).unwrap(), 0);
        }
        for (a, b) in &set.negatives {
            assert_eq!(m.distance(a, b).unwrap(), 1);
        }
    }

    #[test]
    fn boosting_loss_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 8;
        let mut set = TrainingSet::default();
        for _ in 0..80 {
            let a: Vec<f32> = (0..d).map(|_| rng.random::<f32>()).collect();
            let b: Vec<f32> = a
                .iter()
                .map(|v| v + 0.2 * (rng.random::<f32>() - 0.5))
                .collect();
            set.positives.push((a, b));
            let a: Vec<f32> = (0..d).map(|_| rng.random::<f32>()).collect();
            let b: Vec<f32> = (0..d).map(|_| rng.random::<f32>()).collect();
            set.negatives.push((a, b));
        }
        let (m, report) = train_metric_traced(&set, &cfg(12)).unwrap();
        assert_eq!(m.bits(), report.rounds.len());
        assert!(report.rounds.iter().all(|r| r.error < 0.5));
        for w in report.rounds.windows(2) {
            assert!(w[1].boost_loss <= w[0].boost_loss * (1.0 + 1e-12));
        }
    }

    #[test]
    fn calibration_moves_threshold() {
        let set = separable_2d(4);
        let m = train_metric(&set, &cfg(4)).unwrap();
        let (m, eer) = calibrate_threshold(m, &set).unwrap();
        assert!(eer.rate < 0.5);
        assert!(m.threshold() >= 0.0 && m.threshold() <= 4.0);
    }

    #[test]
    fn empty_sets_rejected() {
        let set = TrainingSet::default();
        assert!(matches!(
            train_metric(&set, &cfg(1)),
            Err(Error::EmptyInput(_))
        ));
    }
}
