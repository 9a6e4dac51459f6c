//! Leading generalized eigenvectors of a symmetric-definite pencil
//! `C_N v = lambda C_P v`.
//!
//! The pencil is reduced to a standard symmetric problem with the Cholesky
//! factor of `C_P = L L^T`: `M = L^-1 C_N L^-T`, `v = L^-T y`. Small problems
//! form `M` and solve it densely; large ones only apply `M` to blocks of
//! vectors and extract Ritz pairs from a block Krylov subspace.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dimension up to which `M` is formed explicitly.
pub(crate) const DENSE_LIMIT: usize = 320;

#[derive(Clone, Debug)]
pub(crate) struct KrylovParams {
    pub block: usize,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub(crate) struct GeneralizedEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Matching generalized eigenvectors, each of unit Euclidean norm.
    pub vectors: Vec<DVector<f64>>,
}

/// Computes the `k` largest generalized eigenpairs.
///
/// `apply_cn` multiplies `C_N` (regularization included) by a `d x b` block.
pub(crate) fn top_generalized<F>(
    cp: &DMatrix<f64>,
    apply_cn: F,
    k: usize,
    krylov: &KrylovParams,
) -> Result<GeneralizedEigen>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let d = cp.nrows();
    let chol = cp.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let l = chol.l();
    let lt = l.transpose();

    let whitened = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let u = lt.solve_upper_triangular(x).expect("non-singular factor");
        let v = apply_cn(&u);
        l.solve_lower_triangular(&v).expect("non-singular factor")
    };

    let (values, ys) = if d <= DENSE_LIMIT {
        let m = whitened(&DMatrix::identity(d, d));
        let m = (&m + m.transpose()) * 0.5;
        ritz_top(&m, None, k)
    } else {
        block_krylov(&whitened, d, k, krylov)
    };

    let vectors = ys
        .iter()
        .map(|y| {
            let v = lt
                .solve_upper_triangular(&DMatrix::from_column_slice(d, 1, y.as_slice()))
                .expect("non-singular factor");
            let v = DVector::from_column_slice(v.as_slice());
            let n = v.norm();
            if n > 0.0 {
                v / n
            } else {
                v
            }
        })
        .collect();
    Ok(GeneralizedEigen { values, vectors })
}

/// Top-`k` eigenpairs of symmetric `t`; when `basis` is given the Ritz
/// vectors are mapped back through it.
fn ritz_top(
    t: &DMatrix<f64>,
    basis: Option<&DMatrix<f64>>,
    k: usize,
) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = t.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let u = eig.eigenvectors.column(i).into_owned();
            match basis {
                Some(q) => q * u,
                None => u,
            }
        })
        .collect();
    (values, vectors)
}

fn orthonormal_columns(mut z: DMatrix<f64>, previous: &[DMatrix<f64>]) -> DMatrix<f64> {
    // Two passes of block Gram-Schmidt against the existing basis, then
    // modified Gram-Schmidt within the block; dependent columns are dropped.
    for _ in 0..2 {
        for q in previous {
            let proj = q.transpose() * &z;
            z -= q * proj;
        }
    }
    let scale = z.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for c in z.column_iter() {
        let mut v = c.into_owned();
        for _ in 0..2 {
            for k in &kept {
                let p = k.dot(&v);
                v.axpy(-p, k, 1.0);
            }
            for q in previous {
                let p = q.transpose() * &v;
                v -= q * p;
            }
        }
        let n = v.norm();
        if n > 1e-10 * scale.max(f64::MIN_POSITIVE) && n > 1e-300 {
            kept.push(v / n);
        }
    }
    if kept.is_empty() {
        DMatrix::zeros(z.nrows(), 0)
    } else {
        DMatrix::from_columns(&kept)
    }
}

fn block_krylov<F>(
    apply: &F,
    d: usize,
    k: usize,
    params: &KrylovParams,
) -> (Vec<f64>, Vec<DVector<f64>>)
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let b = params.block.max(k).min(d);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let start = DMatrix::from_fn(d, b, |_, _| rng.random::<f64>() - 0.5);
    let mut blocks: Vec<DMatrix<f64>> = vec![orthonormal_columns(start, &[])];
    let mut images: Vec<DMatrix<f64>> = Vec::new();
    for _ in 0..params.iterations {
        let last = blocks.last().unwrap();
        if last.ncols() == 0 {
            break;
        }
        let img = apply(last);
        let next = orthonormal_columns(img.clone(), &blocks);
        images.push(img);
        if blocks.iter().map(|q| q.ncols()).sum::<usize>() >= d {
            break;
        }
        blocks.push(next);
    }
    while images.len() < blocks.len() {
        let img = apply(&blocks[images.len()]);
        images.push(img);
    }
    let pairs: Vec<(&DMatrix<f64>, &DMatrix<f64>)> = blocks
        .iter()
        .zip(&images)
        .filter(|(q, _)| q.ncols() > 0)
        .collect();
    let q = DMatrix::from_columns(
        &pairs
            .iter()
            .flat_map(|(q, _)| q.column_iter().map(|c| c.into_owned()))
            .collect::<Vec<_>>(),
    );
    let mq = DMatrix::from_columns(
        &pairs
            .iter()
            .flat_map(|(_, m)| m.column_iter().map(|c| c.into_owned()))
            .collect::<Vec<_>>(),
    );
    let t = q.transpose() * mq;
    let t = (&t + t.transpose()) * 0.5;
    ritz_top(&t, Some(&q), k)
}
