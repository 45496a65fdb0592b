//! Comparison selectors: uniform sampling, pivoted QR and recursive feature
//! elimination. All return plain column indices (unit weights).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::svm::{solve_dense, SolverConfig};

/// `r` distinct columns out of `d`, uniformly without replacement.
pub fn uniform_select(d: usize, r: usize, seed: u64) -> Result<Vec<usize>> {
    if r > d {
        return Err(invalid(format!(
            "cannot draw {r} distinct columns out of {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, d, r).into_vec())
}

/// Column order produced by Householder QR with greedy max-residual pivoting.
#[derive(Debug, Clone, Serialize)]
pub struct PivotedQr {
    /// All d columns: the `rank` pivots first, then the rest by index.
    pub order: Vec<usize>,
    pub rank: usize,
    /// `|R_kk|` for the first `rank` pivots.
    pub r_diagonal: Vec<f64>,
}

/// Residual norms at or below this fraction of the largest column norm end
/// the factorization.
pub const RRQR_RANK_TOL: f64 = 1e-10;

pub fn pivoted_qr(x: &DMatrix<f64>) -> PivotedQr {
    let (n, d) = x.shape();
    let mut a = x.clone();
    let mut perm: Vec<usize> = (0..d).collect();
    let mut r_diagonal = Vec::new();
    let mut scale = 0.0_f64;

    for k in 0..n.min(d) {
        // Exact residual norms of the trailing block.
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..d {
            let norm = a.view((k, j), (n - k, 1)).norm();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if k == 0 {
            scale = best_norm;
        }
        if best_norm <= RRQR_RANK_TOL * scale || best_norm == 0.0 {
            break;
        }
        a.swap_columns(k, best);
        perm.swap(k, best);

        let mut v: Vec<f64> = (k..n).map(|i| a[(i, k)]).collect();
        let alpha = if v[0] >= 0.0 { -best_norm } else { best_norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for j in k..d {
                let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * a[(k + t, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                for (t, vi) in v.iter().enumerate() {
                    a[(k + t, j)] -= f * vi;
                }
            }
        }
        r_diagonal.push(a[(k, k)].abs());
    }

    let rank = r_diagonal.len();
    let mut tail = perm[rank..].to_vec();
    tail.sort_unstable();
    let mut order = perm[..rank].to_vec();
    order.extend(tail);
    PivotedQr {
        order,
        rank,
        r_diagonal,
    }
}

/// Leading pivots of the column-pivoted QR; at most `rank(X)` of them, since
/// pivots past the numerical rank carry no information.
pub fn rrqr_select(x: &DMatrix<f64>, r: usize) -> Result<Vec<usize>> {
    if r > x.ncols() {
        return Err(invalid(format!(
            "r = {r} exceeds the {} available columns",
            x.ncols()
        )));
    }
    let qr = pivoted_qr(x);
    Ok(qr.order[..r.min(qr.rank)].to_vec())
}

#[derive(Debug, Clone, Serialize)]
pub struct RfeOutcome {
    /// Surviving columns, largest `|wⱼ|` first.
    pub selected: Vec<usize>,
    /// Columns in elimination order.
    pub eliminated: Vec<usize>,
    pub rounds: usize,
}

/// Recursive feature elimination: repeatedly train and drop the
/// `max(1, ⌈chunk_fraction · remaining⌉)` columns with smallest `|wⱼ|`.
pub fn rfe_select(
    data: &LabeledDataset,
    r: usize,
    solver: &SolverConfig,
    chunk_fraction: f64,
) -> Result<RfeOutcome> {
    let d = data.d();
    if r == 0 || r >= d {
        return Err(invalid(format!(
            "elimination needs 0 < r < d, got r = {r}, d = {d}"
        )));
    }
    if !(0.0..1.0).contains(&chunk_fraction) {
        return Err(invalid(format!(
            "chunk fraction must be in [0, 1), got {chunk_fraction}"
        )));
    }
    data.require_both_labels()?;
    let x = data.x().to_dense();
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut eliminated = Vec::with_capacity(d - r);
    let mut rounds = 0;

    let solve = |cols: &[usize], rounds: usize, eliminated: &[usize]| {
        solve_dense(&x.select_columns(cols), data.y(), solver).map_err(|e| {
            Error::Numerical(format!(
                "feature elimination aborted in round {rounds} after removing {} columns {:?}: {e}",
                eliminated.len(),
                eliminated
            ))
        })
    };

    while remaining.len() > r {
        let model = solve(&remaining, rounds, &eliminated)?;
        let excess = remaining.len() - r;
        let chunk = ((chunk_fraction * remaining.len() as f64).ceil() as usize).clamp(1, excess);
        let mut by_weight: Vec<usize> = (0..remaining.len()).collect();
        by_weight.sort_by(|&a, &b| {
            model.w[a]
                .abs()
                .total_cmp(&model.w[b].abs())
                .then(a.cmp(&b))
        });
        let mut drop: Vec<usize> = by_weight[..chunk].to_vec();
        eliminated.extend(drop.iter().map(|&p| remaining[p]));
        drop.sort_unstable();
        for p in drop.into_iter().rev() {
            remaining.remove(p);
        }
        rounds += 1;
    }

    let model = solve(&remaining, rounds, &eliminated)?;
    let mut order: Vec<usize> = (0..remaining.len()).collect();
    order.sort_by(|&a, &b| {
        model.w[b]
            .abs()
            .total_cmp(&model.w[a].abs())
            .then(a.cmp(&b))
    });
    Ok(RfeOutcome {
        selected: order.into_iter().map(|p| remaining[p]).collect(),
        eliminated,
        rounds,
    })
}
