//! The alignment recursion shared by local, banded and global variants.
//!
//! Scores are filled row by row. Small tables are kept whole for the
//! traceback; larger ones keep only every K-th row (K ~ sqrt(rows)) and
//! recompute one block of rows at a time while tracing back, which yields the
//! same cell values and therefore the same path.

use super::{AlignKind, AlignOptions, Alignment, Band, Step};

struct Table<'a, F> {
    m: usize,
    n: usize,
    sigma: &'a F,
    gap: f64,
    kind: AlignKind,
    band: Option<Band>,
    /// Rows `0, K, 2K, ...`.
    checkpoint_every: usize,
    checkpoints: Vec<Vec<f64>>,
    /// Rows `bK+1 ..= bK+K-1` of the cached block `b`.
    block: Vec<Vec<f64>>,
    block_id: Option<usize>,
}

impl<F: Fn(usize, usize) -> f64> Table<'_, F> {
    fn first_row(&self) -> Vec<f64> {
        let mut row = vec![0.0; self.n + 1];
        if self.kind == AlignKind::Global {
            for j in 1..=self.n {
                row[j] = row[j - 1] + self.gap;
            }
        }
        row
    }

    fn fill_row(&self, i: usize, prev: &[f64], cur: &mut [f64]) {
        let local = self.kind == AlignKind::Local;
        cur[0] = if local { 0.0 } else { prev[0] + self.gap };
        let (lo, hi) = match (self.band, local) {
            (Some(b), true) => {
                cur[1..].fill(0.0);
                let lo = (i as i64 + b.center - b.halfwidth as i64).max(1);
                let hi = (i as i64 + b.center + b.halfwidth as i64).min(self.n as i64);
                if lo > hi {
                    return;
                }
                (lo as usize, hi as usize)
            }
            _ => (1, self.n),
        };
        for j in lo..=hi {
            let diag = prev[j - 1] + (self.sigma)(i - 1, j - 1);
            let up = prev[j] + self.gap;
            let left = cur[j - 1] + self.gap;
            let mut v = diag.max(up).max(left);
            if local {
                v = v.max(0.0);
            }
            cur[j] = v;
        }
    }

    fn load_block(&mut self, b: usize) {
        let start = b * self.checkpoint_every;
        let end = (start + self.checkpoint_every - 1).min(self.m);
        let mut rows: Vec<Vec<f64>> = std::mem::take(&mut self.block);
        rows.resize(end - start, Vec::new());
        for (k, i) in (start + 1..=end).enumerate() {
            let mut cur = std::mem::take(&mut rows[k]);
            cur.resize(self.n + 1, 0.0);
            {
                let prev: &[f64] = if k == 0 {
                    &self.checkpoints[b]
                } else {
                    &rows[k - 1]
                };
                self.fill_row(i, prev, &mut cur);
            }
            rows[k] = cur;
        }
        self.block = rows;
        self.block_id = Some(b);
    }

    fn get(&mut self, i: usize, j: usize) -> f64 {
        let k = self.checkpoint_every;
        if i.is_multiple_of(k) {
            return self.checkpoints[i / k][j];
        }
        let b = i / k;
        if self.block_id != Some(b) {
            self.load_block(b);
        }
        self.block[i - b * k - 1][j]
    }
}

pub(super) fn run<F: Fn(usize, usize) -> f64>(
    m: usize,
    n: usize,
    sigma: &F,
    gap: f64,
    opts: &AlignOptions,
) -> Alignment {
    let band = if opts.kind == AlignKind::Local {
        opts.band
    } else {
        None
    };
    let whole = (m + 1).saturating_mul(n + 1) <= opts.table_limit;
    let checkpoint_every = if whole {
        m + 1
    } else {
        ((m + 1) as f64).sqrt().ceil().max(2.0) as usize
    };
    let mut t = Table {
        m,
        n,
        sigma,
        gap,
        kind: opts.kind,
        band,
        checkpoint_every,
        checkpoints: Vec::new(),
        block: Vec::new(),
        block_id: None,
    };

    let mut prev = t.first_row();
    t.checkpoints.push(prev.clone());
    let mut best = (0.0f64, 0usize, 0usize);
    let mut cur = vec![0.0; n + 1];
    for i in 1..=m {
        t.fill_row(i, &prev, &mut cur);
        if t.kind == AlignKind::Local {
            for (j, &v) in cur.iter().enumerate().skip(1) {
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
        if i % checkpoint_every == 0 {
            t.checkpoints.push(cur.clone());
        } else if whole {
            t.block.push(cur.clone());
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    if whole {
        t.block_id = Some(0);
    }

    let (score, mut i, mut j) = match t.kind {
        AlignKind::Local => best,
        AlignKind::Global => (prev[n], m, n),
    };
    let (end_i, end_j) = (i, j);
    let mut steps = Vec::new();
    while i > 0 && j > 0 {
        let v = t.get(i, j);
        if t.kind == AlignKind::Local && v == 0.0 {
            break;
        }
        if v == t.get(i - 1, j - 1) + sigma(i - 1, j - 1) {
            steps.push(Step::Match(i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if v == t.get(i - 1, j) + gap {
            steps.push(Step::GapY(i - 1));
            i -= 1;
        } else {
            debug_assert_eq!(v, t.get(i, j - 1) + gap);
            steps.push(Step::GapX(j - 1));
            j -= 1;
        }
    }
    if t.kind == AlignKind::Global {
        while i > 0 {
            steps.push(Step::GapY(i - 1));
            i -= 1;
        }
        while j > 0 {
            steps.push(Step::GapX(j - 1));
            j -= 1;
        }
    }
    steps.reverse();
    let (x_span, y_span) = if steps.is_empty() {
        (0..0, 0..0)
    } else {
        (i..end_i, j..end_j)
    };
    Alignment {
        score,
        steps,
        x_span,
        y_span,
    }
}
