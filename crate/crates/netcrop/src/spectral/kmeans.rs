//! Lloyd k-means with k-means++ restarts, plus a Weiszfeld k-median backend
//! for spherical clustering.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{NetcropError, Result};

#[derive(Debug, Clone)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 100,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centers: DMatrix<f64>,
    pub cost: f64,
    /// Objective value after the initial assignment and after each sweep.
    pub cost_history: Vec<f64>,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    let d = points.ncols();
    let mut acc = 0.0;
    for t in 0..d {
        let diff = points[(i, t)] - centers[(c, t)];
        acc += diff * diff;
    }
    acc
}

/// Nearest center by squared distance; ties toward the lower index.
fn assign(points: &DMatrix<f64>, centers: &DMatrix<f64>, labels: &mut [usize]) -> f64 {
    let k = centers.nrows();
    let mut cost = 0.0;
    for i in 0..points.nrows() {
        let mut best = 0;
        let mut best_d = sq_dist(points, i, centers, 0);
        for c in 1..k {
            let d = sq_dist(points, i, centers, c);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        cost += best_d;
    }
    cost
}

fn kmeanspp_init(points: &DMatrix<f64>, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let m = points.nrows();
    let d = points.ncols();
    let mut centers = DMatrix::zeros(k, d);
    let first = rng.gen_range(0..m);
    centers.row_mut(0).copy_from(&points.row(first));
    let mut dists: Vec<f64> = (0..m).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = dists.iter().sum();
        let pick = if total <= 0.0 {
            rng.gen_range(0..m)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &w) in dists.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.row_mut(c).copy_from(&points.row(pick));
        for i in 0..m {
            let d = sq_dist(points, i, &centers, c);
            if d < dists[i] {
                dists[i] = d;
            }
        }
    }
    centers
}

fn lloyd(
    points: &DMatrix<f64>,
    mut centers: DMatrix<f64>,
    opts: &KmeansOptions,
) -> Clustering {
    let m = points.nrows();
    let k = centers.nrows();
    let d = points.ncols();
    let mut labels = vec![0usize; m];
    let mut prev_cost = f64::INFINITY;
    let mut cost = assign(points, &centers, &mut labels);
    let mut cost_history = vec![cost];
    for _ in 0..opts.max_iters {
        // update step
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..m {
            counts[labels[i]] += 1;
            for t in 0..d {
                sums[(labels[i], t)] += points[(i, t)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for t in 0..d {
                    centers[(c, t)] = sums[(c, t)] / counts[c] as f64;
                }
            } else {
                // re-seed an empty cluster at the farthest point
                let far = (0..m)
                    .max_by(|&a, &b| {
                        sq_dist(points, a, &centers, labels[a])
                            .partial_cmp(&sq_dist(points, b, &centers, labels[b]))
                            .unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).copy_from(&points.row(far));
            }
        }
        prev_cost = cost;
        cost = assign(points, &centers, &mut labels);
        cost_history.push(cost);
        debug_assert!(cost <= prev_cost + 1e-9 * prev_cost.abs().max(1.0));
        if prev_cost - cost <= opts.rel_tol * prev_cost.abs().max(1e-300) {
            break;
        }
    }
    let _ = prev_cost;
    Clustering {
        labels,
        centers,
        cost,
        cost_history,
    }
}

/// Best Lloyd fixed point over `opts.restarts` k-means++ initializations.
pub fn kmeans(
    points: &DMatrix<f64>,
    k: usize,
    opts: &KmeansOptions,
    rng: &mut impl Rng,
) -> Result<Clustering> {
    let m = points.nrows();
    if k == 0 || m < k {
        return Err(NetcropError::Domain(format!(
            "kmeans needs m >= K >= 1, got m = {m}, K = {k}"
        )));
    }
    let mut best: Option<Clustering> = None;
    for _ in 0..opts.restarts.max(1) {
        let init = kmeanspp_init(points, k, rng);
        let fit = lloyd(points, init, opts);
        if best.as_ref().map_or(true, |b| fit.cost < b.cost) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

/// k-median with Weiszfeld center updates on the (2,1)-norm objective.
pub fn kmedian(
    points: &DMatrix<f64>,
    k: usize,
    opts: &KmeansOptions,
    rng: &mut impl Rng,
) -> Result<Clustering> {
    let m = points.nrows();
    if k == 0 || m < k {
        return Err(NetcropError::Domain(format!(
            "kmedian needs m >= K >= 1, got m = {m}, K = {k}"
        )));
    }
    let d = points.ncols();
    let l1_cost = |centers: &DMatrix<f64>, labels: &mut [usize]| -> f64 {
        let mut cost = 0.0;
        for i in 0..m {
            let mut best = 0;
            let mut best_d = sq_dist(points, i, centers, 0);
            for c in 1..k {
                let dd = sq_dist(points, i, centers, c);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            labels[i] = best;
            cost += best_d.sqrt();
        }
        cost
    };
    let mut best: Option<Clustering> = None;
    for _ in 0..opts.restarts.max(1) {
        let mut centers = kmeanspp_init(points, k, rng);
        let mut labels = vec![0usize; m];
        let mut cost = l1_cost(&centers, &mut labels);
        let mut cost_history = vec![cost];
        for _ in 0..opts.max_iters {
            // Weiszfeld update per cluster
            for c in 0..k {
                let members: Vec<usize> = (0..m).filter(|&i| labels[i] == c).collect();
                if members.is_empty() {
                    continue;
                }
                for _ in 0..20 {
                    let mut num = vec![0.0; d];
                    let mut den = 0.0;
                    for &i in &members {
                        let dist = sq_dist(points, i, &centers, c).sqrt().max(1e-12);
                        let w = 1.0 / dist;
                        for t in 0..d {
                            num[t] += w * points[(i, t)];
                        }
                        den += w;
                    }
                    let mut moved = 0.0;
                    for t in 0..d {
                        let new = num[t] / den;
                        moved += (new - centers[(c, t)]).powi(2);
                        centers[(c, t)] = new;
                    }
                    if moved.sqrt() < 1e-9 {
                        break;
                    }
                }
            }
            let prev = cost;
            cost = l1_cost(&centers, &mut labels);
            cost_history.push(cost);
            if prev - cost <= opts.rel_tol * prev.abs().max(1e-300) {
                break;
            }
        }
        if best.as_ref().map_or(true, |b| cost < b.cost) {
            best = Some(Clustering {
                labels,
                centers: centers.clone(),
                cost,
                cost_history,
            });
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn well_separated_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        for _ in 0..10 {
            rows.push([rng.gen::<f64>() * 0.1, rng.gen::<f64>() * 0.1]);
        }
        for _ in 0..10 {
            rows.push([100.0 + rng.gen::<f64>() * 0.1, rng.gen::<f64>() * 0.1]);
        }
        let points = DMatrix::from_fn(20, 2, |i, j| rows[i][j]);
        let fit = kmeans(&points, 2, &KmeansOptions::default(), &mut rng).unwrap();
        let first = fit.labels[0];
        assert!(fit.labels[..10].iter().all(|&l| l == first));
        assert!(fit.labels[10..].iter().all(|&l| l != first));
    }

    #[test]
    fn k_equals_m_zero_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points = DMatrix::from_fn(5, 2, |i, j| (i * 2 + j) as f64);
        let fit = kmeans(&points, 5, &KmeansOptions::default(), &mut rng).unwrap();
        assert!(fit.cost < 1e-12);
        let mut sorted = fit.labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn within_factor_of_brute_force_optimum() {
        // 12 random points in 2-D, K=2, exhaustive 2-partition oracle
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points = DMatrix::from_fn(12, 2, |_, _| rng.gen::<f64>());
        let fit = kmeans(&points, 2, &KmeansOptions::default(), &mut rng).unwrap();

        // brute force over all assignments with both sides nonempty
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 12) - 1 {
            let mut cost = 0.0;
            for side in 0..2 {
                let members: Vec<usize> = (0..12)
                    .filter(|&i| ((mask >> i) & 1) as usize == side)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let mut center = [0.0, 0.0];
                for &i in &members {
                    center[0] += points[(i, 0)];
                    center[1] += points[(i, 1)];
                }
                center[0] /= members.len() as f64;
                center[1] /= members.len() as f64;
                for &i in &members {
                    cost += (points[(i, 0)] - center[0]).powi(2)
                        + (points[(i, 1)] - center[1]).powi(2);
                }
            }
            if cost < best {
                best = cost;
            }
        }
        assert!(fit.cost <= best * 1.05, "cost {} vs oracle {}", fit.cost, best);
    }

    #[test]
    fn kmedian_separates_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        for _ in 0..8 {
            rows.push([rng.gen::<f64>() * 0.05, 0.0]);
        }
        for _ in 0..8 {
            rows.push([10.0 + rng.gen::<f64>() * 0.05, 0.0]);
        }
        let points = DMatrix::from_fn(16, 2, |i, j| rows[i][j]);
        let fit = kmedian(&points, 2, &KmeansOptions::default(), &mut rng).unwrap();
        let first = fit.labels[0];
        assert!(fit.labels[..8].iter().all(|&l| l == first));
        assert!(fit.labels[8..].iter().all(|&l| l != first));
    }
}
