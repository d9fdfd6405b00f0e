//! Regularizer tuning for regularized spectral clustering over a tau grid,
//! scored by held-out block prediction through the degree-corrected plug-in.

use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::{NetcropError, Result};
use crate::graph::AdjacencyMatrix;
use crate::spectral::{rsc_basis, spherical_cluster_rows, FitOptions};

use super::blockmodel::{blockwise_loss, estimate_dcbm_poisson, stitch_labels, tag};
use super::report::{CandidateLoss, ConfigEcho, RepetitionOutcome, SelectionReport, Timings};
use super::{argmin_loss, majority_vote, position_map, rng_for, CandidateModel, CvConfig};

#[derive(Debug, Clone)]
pub struct RscOptions {
    pub k: usize,
    pub tau_grid: Vec<f64>,
    pub fit: FitOptions,
}

impl RscOptions {
    pub fn new(k: usize, tau_grid: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(NetcropError::Domain("K must be >= 1".into()));
        }
        if tau_grid.is_empty() {
            return Err(NetcropError::Domain("empty tau grid".into()));
        }
        if tau_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(NetcropError::Domain("tau values must be >= 0".into()));
        }
        Ok(Self {
            k,
            tau_grid,
            fit: FitOptions::default(),
        })
    }
}

/// Selection report plus the stitched full-graph community labels at the
/// winning tau.
pub struct RscOutcome {
    pub report: SelectionReport,
    pub best_tau: f64,
    pub labels: Vec<usize>,
}

pub fn tune_rsc(a: &AdjacencyMatrix, config: &CvConfig, opts: &RscOptions) -> Result<RscOutcome> {
    let t_total = Instant::now();
    let candidates: Vec<CandidateModel> = opts
        .tau_grid
        .iter()
        .enumerate()
        .map(|(index, &tau)| CandidateModel::RscTau { index, tau })
        .collect();
    let mut timings = Timings::default();
    let mut warnings: Vec<String> = Vec::new();
    let mut outcomes = Vec::with_capacity(config.reps);
    let mut winners = Vec::with_capacity(config.reps);
    // full-graph labels assembled at each repetition's winning tau
    let mut rep_labels: Vec<Vec<usize>> = Vec::with_capacity(config.reps);

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

        let o = config.o;
        let mut losses = vec![f64::INFINITY; candidates.len()];
        let mut degenerate = vec![false; candidates.len()];
        let mut labels_per_tau: Vec<Option<Vec<Vec<usize>>>> =
            vec![None; opts.tau_grid.len()];

        for (ti, &tau) in opts.tau_grid.iter().enumerate() {
            let t = Instant::now();
            let fitted: Vec<Result<Vec<usize>>> = subnets
                .par_iter()
                .enumerate()
                .map(|(q, sub)| {
                    let basis = rsc_basis(sub, opts.k, tau, &opts.fit.eigen)?;
                    let mut rng = rng_for(config.seed, tag(rep, 3, q, ti));
                    spherical_cluster_rows(&basis.vectors, opts.k, &opts.fit, &mut rng)
                        .map(|f| f.labels)
                })
                .collect();
            timings.fit_ms += t.elapsed().as_millis() as u64;

            let t = Instant::now();
            let mut labels = match fitted.into_iter().collect::<Result<Vec<_>>>() {
                Ok(l) => l,
                Err(e) => {
                    let msg = format!("tau={tau}: clustering failed: {e}");
                    if !warnings.contains(&msg) {
                        warnings.push(msg);
                    }
                    degenerate[ti] = true;
                    continue;
                }
            };
            stitch_labels(&mut labels, o, opts.k)?;
            timings.stitch_ms += t.elapsed().as_millis() as u64;

            let t = Instant::now();
            let fit = estimate_dcbm_poisson(&subnets, &labels, opts.k);
            for msg in fit.warnings {
                if !warnings.contains(&msg) {
                    warnings.push(msg);
                }
            }
            let part_labels: Vec<&[usize]> = labels.iter().map(|l| &l[o..]).collect();
            let part_psi: Vec<&[f64]> = fit.psi.iter().map(|p| &p[o..]).collect();
            losses[ti] = blockwise_loss(a, &plan, &pos_in_part, config.loss, |p, q, r, c| {
                fit.o_hat[(part_labels[p][r], part_labels[q][c])] * part_psi[p][r] * part_psi[q][c]
            });
            timings.predict_ms += t.elapsed().as_millis() as u64;
            labels_per_tau[ti] = Some(labels);
        }

        let w_idx = argmin_loss(&losses);
        winners.push(candidates[w_idx].clone());
        // assemble full-graph labels at this repetition's winner: overlap
        // nodes from subnetwork 0, part nodes from their own subnetwork
        let mut full = vec![0usize; config.n];
        if let Some(labels) = &labels_per_tau[w_idx] {
            for (pos, &node) in plan.overlap.indices().iter().enumerate() {
                full[node] = labels[0][pos];
            }
            for (q, part) in plan.parts.iter().enumerate() {
                for (pos, &node) in part.indices().iter().enumerate() {
                    full[node] = labels[q][o + pos];
                }
            }
        }
        rep_labels.push(full);
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
    let best_tau = match final_winner {
        CandidateModel::RscTau { tau, .. } => tau,
        _ => unreachable!(),
    };
    let labels = winners
        .iter()
        .position(|w| *w == final_winner)
        .map(|i| rep_labels[i].clone())
        .unwrap_or_default();
    timings.total_ms = t_total.elapsed().as_millis() as u64;
    Ok(RscOutcome {
        report: SelectionReport {
            config: ConfigEcho {
                task: "tune-rsc".into(),
                n: config.n,
                o: config.o,
                s: config.s,
                m: config.m,
                reps: config.reps,
                loss: config.loss.id().into(),
                seed: config.seed,
                threads: config.threads,
                candidates: candidates.iter().map(|c| c.id()).collect(),
                extra: BTreeMap::from([("k".into(), opts.k.to_string())]),
            },
            repetitions: outcomes,
            final_winner: final_winner.id(),
            timings_ms: timings,
            warnings,
        },
        best_tau,
        labels,
    })
}
