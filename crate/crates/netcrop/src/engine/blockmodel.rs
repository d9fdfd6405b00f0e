//! Blockmodel selection: SBM vs DCBM over K = 1..k_max, with plug-in
//! estimators fitted on overlapping subnetworks and stitched by label
//! matching on the overlap.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Instant;

use crate::alignment::{match_bf, match_greedy};
use crate::error::{NetcropError, Result};
use crate::graph::AdjacencyMatrix;
use crate::spectral::eigen::{top_eigenpairs, EigenBasis, OrderingMode};
use crate::spectral::{cluster_rows, spherical_cluster_rows, FitOptions};

use super::report::{CandidateLoss, ConfigEcho, RepetitionOutcome, SelectionReport, Timings};
use super::{
    accumulate_block_loss, argmin_loss, majority_vote, position_map, rng_for, CandidateModel,
    CvConfig, LossAcc, SplitPlan,
};

/// DCBM plug-in estimator variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcbmEstimator {
    /// Poisson-likelihood estimator from predicted blocks and degrees.
    Poisson,
    /// Eigenvector row-norm estimator.
    Eigen,
}

impl DcbmEstimator {
    pub fn id(&self) -> &'static str {
        match self {
            DcbmEstimator::Poisson => "poisson",
            DcbmEstimator::Eigen => "eigen",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(DcbmEstimator::Poisson),
            "eigen" => Ok(DcbmEstimator::Eigen),
            other => Err(NetcropError::Domain(format!(
                "unknown DCBM estimator {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockmodelOptions {
    pub k_max: usize,
    pub estimator: DcbmEstimator,
    pub fit: FitOptions,
}

impl Default for BlockmodelOptions {
    fn default() -> Self {
        Self {
            k_max: 6,
            estimator: DcbmEstimator::Poisson,
            fit: FitOptions::default(),
        }
    }
}

/// Exhaustive label matching up to this K; greedy beyond.
pub const STITCH_BF_LIMIT: usize = 6;

/// Relabels every subnetwork's communities into subnetwork 0's label space
/// using the shared overlap rows (the leading `o` entries of each vector).
pub fn stitch_labels(labels: &mut [Vec<usize>], o: usize, k: usize) -> Result<()> {
    if labels.is_empty() {
        return Ok(());
    }
    let reference: Vec<usize> = labels[0][..o].to_vec();
    for q in 1..labels.len() {
        let ov = &labels[q][..o];
        let perm = if k <= STITCH_BF_LIMIT {
            match_bf(ov, &reference, k)?
        } else {
            match_greedy(ov, &reference, k)?
        };
        perm.apply(&mut labels[q]);
    }
    Ok(())
}

/// Undirected edge counts between label classes: `e[(k, l)]` for k != l is
/// the number of edges with one endpoint in each, `e[(k, k)]` the number of
/// within-class edges. Also returns class sizes.
fn class_edge_counts(
    sub: &AdjacencyMatrix,
    labels: &[usize],
    k: usize,
) -> (DMatrix<f64>, Vec<usize>) {
    let mut e = DMatrix::zeros(k, k);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    for i in 0..sub.n() {
        for &j in sub.neighbors(i) {
            let j = j as usize;
            if j <= i {
                continue;
            }
            let (a, b) = (labels[i], labels[j]);
            if a == b {
                e[(a, a)] += 1.0;
            } else {
                e[(a, b)] += 1.0;
                e[(b, a)] += 1.0;
            }
        }
    }
    (e, sizes)
}

/// Averaged SBM connectivity estimate over subnetworks. Cells that are
/// empty in every subnetwork fall back to the mean subnetwork density.
pub fn estimate_sbm(
    subnets: &[AdjacencyMatrix],
    labels: &[Vec<usize>],
    k: usize,
) -> (DMatrix<f64>, Vec<String>) {
    let mut sum = DMatrix::<f64>::zeros(k, k);
    let mut count = DMatrix::<f64>::zeros(k, k);
    for (sub, lab) in subnets.iter().zip(labels) {
        let (e, sizes) = class_edge_counts(sub, lab, k);
        for a in 0..k {
            for b in 0..k {
                let pairs = if a == b {
                    sizes[a] as f64 * (sizes[a] as f64 - 1.0) / 2.0
                } else {
                    sizes[a] as f64 * sizes[b] as f64
                };
                if pairs > 0.0 {
                    sum[(a, b)] += e[(a, b)] / pairs;
                    count[(a, b)] += 1.0;
                }
            }
        }
    }
    let fallback =
        subnets.iter().map(|s| s.density()).sum::<f64>() / subnets.len().max(1) as f64;
    let mut warnings = Vec::new();
    let b_hat = DMatrix::from_fn(k, k, |a, b| {
        if count[(a, b)] > 0.0 {
            sum[(a, b)] / count[(a, b)]
        } else {
            fallback
        }
    });
    if (0..k).any(|a| (0..k).any(|b| count[(a, b)] == 0.0)) {
        warnings.push(format!(
            "K={k}: connectivity cells empty in all subnetworks; using mean density fallback"
        ));
    }
    (b_hat, warnings)
}

/// Poisson-style DCBM estimate: block interaction totals (within-class
/// diagonal doubled) averaged over subnetworks, and per-node propensities
/// normalized by their class's total degree.
pub struct DcbmPoissonFit {
    pub o_hat: DMatrix<f64>,
    /// psi[q][i] for local node i of subnetwork q.
    pub psi: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

pub fn estimate_dcbm_poisson(
    subnets: &[AdjacencyMatrix],
    labels: &[Vec<usize>],
    k: usize,
) -> DcbmPoissonFit {
    let mut o_sum = DMatrix::zeros(k, k);
    let mut psi = Vec::with_capacity(subnets.len());
    let mut warnings = Vec::new();
    let mut warned_zero = false;
    for (sub, lab) in subnets.iter().zip(labels) {
        let (e, _) = class_edge_counts(sub, lab, k);
        let mut o_q = e;
        for a in 0..k {
            o_q[(a, a)] *= 2.0;
        }
        let kappa: Vec<f64> = (0..k).map(|a| o_q.row(a).sum()).collect();
        let mut psi_q = Vec::with_capacity(sub.n());
        for i in 0..sub.n() {
            let denom = kappa[lab[i]];
            if denom > 0.0 {
                psi_q.push(sub.degree(i) as f64 / denom);
            } else {
                psi_q.push(0.0);
                if !warned_zero {
                    warnings.push(format!(
                        "K={k}: isolated class encountered; zero propensity assigned"
                    ));
                    warned_zero = true;
                }
            }
        }
        o_sum += o_q;
        psi.push(psi_q);
    }
    let o_hat = o_sum / subnets.len().max(1) as f64;
    DcbmPoissonFit {
        o_hat,
        psi,
        warnings,
    }
}

/// Eigenvector-based DCBM estimate: propensities are row norms of the
/// leading-K eigenvector block; the connectivity matrix is a ratio of
/// observed edges to propensity products, averaged over subnetworks.
pub struct DcbmEigenFit {
    pub b_hat: DMatrix<f64>,
    pub psi: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

pub fn estimate_dcbm_eigen(
    subnets: &[AdjacencyMatrix],
    bases: &[EigenBasis],
    labels: &[Vec<usize>],
    k: usize,
) -> DcbmEigenFit {
    let mut sum = DMatrix::<f64>::zeros(k, k);
    let mut count = DMatrix::<f64>::zeros(k, k);
    let mut psi = Vec::with_capacity(subnets.len());
    for ((sub, basis), lab) in subnets.iter().zip(bases).zip(labels) {
        let n_q = sub.n();
        let mut psi_q = Vec::with_capacity(n_q);
        for i in 0..n_q {
            let mut sq = 0.0;
            for c in 0..k {
                sq += basis.vectors[(i, c)] * basis.vectors[(i, c)];
            }
            psi_q.push(sq.sqrt());
        }
        let (e, _) = class_edge_counts(sub, lab, k);
        let mut s_psi = vec![0.0; k];
        let mut s_psi2 = vec![0.0; k];
        for i in 0..n_q {
            s_psi[lab[i]] += psi_q[i];
            s_psi2[lab[i]] += psi_q[i] * psi_q[i];
        }
        for a in 0..k {
            for b in 0..k {
                let denom = if a == b {
                    (s_psi[a] * s_psi[a] - s_psi2[a]) / 2.0
                } else {
                    s_psi[a] * s_psi[b]
                };
                if denom > 1e-12 {
                    sum[(a, b)] += e[(a, b)] / denom;
                    count[(a, b)] += 1.0;
                }
            }
        }
        psi.push(psi_q);
    }
    let mean_psi = {
        let total: f64 = psi.iter().flat_map(|p| p.iter()).sum();
        let cnt: usize = psi.iter().map(|p| p.len()).sum();
        if cnt > 0 {
            total / cnt as f64
        } else {
            0.0
        }
    };
    let density =
        subnets.iter().map(|s| s.density()).sum::<f64>() / subnets.len().max(1) as f64;
    let fallback = if mean_psi > 1e-12 {
        density / (mean_psi * mean_psi)
    } else {
        density
    };
    let mut warnings = Vec::new();
    let b_hat = DMatrix::from_fn(k, k, |a, b| {
        if count[(a, b)] > 0.0 {
            sum[(a, b)] / count[(a, b)]
        } else {
            fallback
        }
    });
    if (0..k).any(|a| (0..k).any(|b| count[(a, b)] == 0.0)) {
        warnings.push(format!(
            "K={k}: eigen-estimator cells empty in all subnetworks; density fallback used"
        ));
    }
    DcbmEigenFit {
        b_hat,
        psi,
        warnings,
    }
}

// seed tags: phase 0 = split, 1 = SC clustering, 2 = SSC clustering
pub(crate) fn tag(rep: usize, phase: u64, q: usize, k: usize) -> u64 {
    ((rep as u64) << 40) | (phase << 32) | ((q as u64) << 16) | k as u64
}

fn push_unique(warnings: &mut Vec<String>, msg: String) {
    if !warnings.contains(&msg) {
        warnings.push(msg);
    }
}

/// Test-block loss with a per-node-pair prediction closure over part-local
/// indices.
pub(crate) fn blockwise_loss(
    a: &AdjacencyMatrix,
    plan: &SplitPlan,
    pos_in_part: &[Vec<u32>],
    loss: super::Loss,
    mut predict: impl FnMut(usize, usize, usize, usize) -> f64,
) -> f64 {
    let s = plan.s();
    let mut acc = LossAcc::new(loss);
    for p in 0..s {
        for q in p + 1..s {
            accumulate_block_loss(
                a,
                &plan.parts[p],
                &plan.parts[q],
                &pos_in_part[q],
                |r, c| predict(p, q, r, c),
                &mut acc,
            );
        }
    }
    acc.finish()
}

/// Full blockmodel selection across SBM and DCBM candidates K = 1..k_max.
pub fn select_blockmodel(
    a: &AdjacencyMatrix,
    config: &CvConfig,
    opts: &BlockmodelOptions,
) -> Result<SelectionReport> {
    if opts.k_max == 0 {
        return Err(NetcropError::Domain("k_max must be >= 1".into()));
    }
    let t_total = Instant::now();
    let candidates: Vec<CandidateModel> = (1..=opts.k_max)
        .flat_map(|k| {
            [
                CandidateModel::Blockmodel {
                    k,
                    degree_corrected: false,
                },
                CandidateModel::Blockmodel {
                    k,
                    degree_corrected: true,
                },
            ]
        })
        .collect();
    let mut timings = Timings::default();
    let mut warnings: Vec<String> = Vec::new();
    let mut outcomes = Vec::with_capacity(config.reps);
    let mut winners = Vec::with_capacity(config.reps);

    for rep in 0..config.reps {
        let t = Instant::now();
        let mut rng = rng_for(config.seed, tag(rep, 0, 0, 0));
        let plan = super::make_split(config.n, config.o, config.s, &mut rng)?;
        let subnets: Vec<AdjacencyMatrix> = plan
            .training
            .iter()
            .map(|t| a.induced_subnetwork(t))
            .collect::<Result<_>>()?;
        let pos_in_part: Vec<Vec<u32>> = plan
            .parts
            .iter()
            .map(|p| position_map(p, config.n))
            .collect();
        timings.split_ms += t.elapsed().as_millis() as u64;

        let t = Instant::now();
        let bases: Vec<EigenBasis> = subnets
            .par_iter()
            .map(|sub| top_eigenpairs(sub, opts.k_max, OrderingMode::AbsoluteDesc, &opts.fit.eigen))
            .collect::<Result<_>>()?;
        timings.fit_ms += t.elapsed().as_millis() as u64;

        let o = config.o;
        let mut losses = vec![f64::INFINITY; candidates.len()];
        let mut degenerate = vec![false; candidates.len()];

        for k in 1..=opts.k_max {
            let t = Instant::now();
            let cols: Vec<DMatrix<f64>> = bases
                .iter()
                .map(|b| b.vectors.columns(0, k).clone_owned())
                .collect();
            let sc: Vec<Result<Vec<usize>>> = cols
                .par_iter()
                .enumerate()
                .map(|(q, c)| {
                    let mut rng = rng_for(config.seed, tag(rep, 1, q, k));
                    cluster_rows(c, k, &opts.fit, &mut rng).map(|f| f.labels)
                })
                .collect();
            let ssc: Vec<Result<Vec<usize>>> = cols
                .par_iter()
                .enumerate()
                .map(|(q, c)| {
                    let mut rng = rng_for(config.seed, tag(rep, 2, q, k));
                    spherical_cluster_rows(c, k, &opts.fit, &mut rng).map(|f| f.labels)
                })
                .collect();
            timings.fit_ms += t.elapsed().as_millis() as u64;

            let sbm_idx = 2 * (k - 1);
            let dcbm_idx = sbm_idx + 1;

            let t = Instant::now();
            let stitched = |raw: Vec<Result<Vec<usize>>>,
                                variant: &str,
                                warnings: &mut Vec<String>|
             -> Option<Vec<Vec<usize>>> {
                match raw.into_iter().collect::<Result<Vec<Vec<usize>>>>() {
                    Ok(mut labels) => match stitch_labels(&mut labels, o, k) {
                        Ok(()) => Some(labels),
                        Err(e) => {
                            push_unique(warnings, format!("K={k} {variant} stitch failed: {e}"));
                            None
                        }
                    },
                    Err(e) => {
                        push_unique(warnings, format!("K={k} {variant} clustering failed: {e}"));
                        None
                    }
                }
            };
            let sc_labels = stitched(sc, "SC", &mut warnings);
            let ssc_labels = stitched(ssc, "SSC", &mut warnings);
            timings.stitch_ms += t.elapsed().as_millis() as u64;

            let t = Instant::now();
            if let Some(labels) = &sc_labels {
                let (b_hat, w) = estimate_sbm(&subnets, labels, k);
                for msg in w {
                    push_unique(&mut warnings, msg);
                }
                let part_labels: Vec<&[usize]> = labels.iter().map(|l| &l[o..]).collect();
                losses[sbm_idx] = blockwise_loss(a, &plan, &pos_in_part, config.loss, |p, q, r, c| {
                    b_hat[(part_labels[p][r], part_labels[q][c])]
                });
            } else {
                degenerate[sbm_idx] = true;
            }
            if let Some(labels) = &ssc_labels {
                let part_labels: Vec<&[usize]> = labels.iter().map(|l| &l[o..]).collect();
                match opts.estimator {
                    DcbmEstimator::Poisson => {
                        let fit = estimate_dcbm_poisson(&subnets, labels, k);
                        for msg in fit.warnings {
                            push_unique(&mut warnings, msg);
                        }
                        let part_psi: Vec<&[f64]> = fit.psi.iter().map(|p| &p[o..]).collect();
                        losses[dcbm_idx] =
                            blockwise_loss(a, &plan, &pos_in_part, config.loss, |p, q, r, c| {
                                fit.o_hat[(part_labels[p][r], part_labels[q][c])]
                                    * part_psi[p][r]
                                    * part_psi[q][c]
                            });
                    }
                    DcbmEstimator::Eigen => {
                        let fit = estimate_dcbm_eigen(&subnets, &bases, labels, k);
                        for msg in fit.warnings {
                            push_unique(&mut warnings, msg);
                        }
                        let part_psi: Vec<&[f64]> = fit.psi.iter().map(|p| &p[o..]).collect();
                        losses[dcbm_idx] =
                            blockwise_loss(a, &plan, &pos_in_part, config.loss, |p, q, r, c| {
                                fit.b_hat[(part_labels[p][r], part_labels[q][c])]
                                    * part_psi[p][r]
                                    * part_psi[q][c]
                            });
                    }
                }
            } else {
                degenerate[dcbm_idx] = true;
            }
            timings.predict_ms += t.elapsed().as_millis() as u64;
        }

        let w_idx = argmin_loss(&losses);
        winners.push(candidates[w_idx].clone());
        outcomes.push(RepetitionOutcome {
            winner: candidates[w_idx].id(),
            losses: candidates
                .iter()
                .zip(&losses)
                .zip(&degenerate)
                .map(|((cand, &l), &deg)| CandidateLoss {
                    candidate: cand.id(),
                    loss: if deg || !l.is_finite() { None } else { Some(l) },
                })
                .collect(),
        });
    }

    let final_winner = majority_vote(&winners)?;
    timings.total_ms = t_total.elapsed().as_millis() as u64;
    Ok(SelectionReport {
        config: ConfigEcho {
            task: "select-blockmodel".into(),
            n: config.n,
            o: config.o,
            s: config.s,
            m: config.m,
            reps: config.reps,
            loss: config.loss.id().into(),
            seed: config.seed,
            threads: config.threads,
            candidates: candidates.iter().map(|c| c.id()).collect(),
            extra: BTreeMap::from([
                ("k_max".into(), opts.k_max.to_string()),
                ("dcbm_estimator".into(), opts.estimator.id().into()),
            ]),
        },
        repetitions: outcomes,
        final_winner: final_winner.id(),
        timings_ms: timings,
        warnings,
    })
}
