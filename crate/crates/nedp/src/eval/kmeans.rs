//! Lloyd's algorithm with k-means++ seeding and restarts.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::util::mix_seed;

pub const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITER: usize = 100;

fn sq_dist(a: &ArrayView1<'_, f64>, b: &ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Clusters the rows of `points` into `k` groups. Runs 20 seeded restarts
/// and keeps the assignment with the lowest inertia; deterministic per seed.
pub fn kmeans(points: &ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::validation("k must be positive"));
    }
    if k > n {
        return Err(Error::validation(format!(
            "k = {k} exceeds the number of points ({n})"
        )));
    }

    let runs = par::map_indexed(KMEANS_RESTARTS, |restart| {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 100 + restart as u64));
        lloyd(points, k, &mut rng)
    });
    let best = runs
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite inertia"))
        .expect("at least one restart");
    Ok(best.1)
}

/// One restart: k-means++ init then Lloyd iterations. Returns (inertia,
/// assignment).
fn lloyd(points: &ArrayView2<'_, f64>, k: usize, rng: &mut impl Rng) -> (f64, Vec<usize>) {
    let n = points.nrows();
    let dim = points.ncols();

    // k-means++ seeding
    let mut centers = Array2::zeros((k, dim));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut min_dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(&points.row(i), &centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = min_dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for i in 0..n {
            let d = sq_dist(&points.row(i), &centers.row(c));
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(&points.row(i), &centers.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            sums.row_mut(assignment[i]).scaled_add(1.0, &points.row(i));
            counts[assignment[i]] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed the empty cluster at the point farthest from its
                // current center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points.row(a), &centers.row(assignment[a]));
                        let db = sq_dist(&points.row(b), &centers.row(assignment[b]));
                        da.partial_cmp(&db).expect("finite distances")
                    })
                    .expect("nonempty point set");
                centers.row_mut(c).assign(&points.row(far));
                assignment[far] = c;
                changed = true;
            } else {
                let mut row = centers.row_mut(c);
                row.assign(&sums.row(c));
                row /= counts[c] as f64;
            }
        }

        if !changed {
            break;
        }
    }

    let inertia: f64 = (0..n)
        .map(|i| sq_dist(&points.row(i), &centers.row(assignment[i])))
        .sum();
    (inertia, assignment)
}
