//! Latent dimension selection for dot-product graphs: spectral embeddings at
//! d_max, orthogonally aligned on the overlap, truncated per candidate.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Instant;

use crate::alignment::align_embeddings;
use crate::error::{NetcropError, Result};
use crate::graph::AdjacencyMatrix;
use crate::spectral::eigen::{top_eigenpairs, OrderingMode};
use crate::spectral::{ase_from_basis, EigenOptions, Embedding};

use super::blockmodel::{blockwise_loss, tag};
use super::report::{CandidateLoss, ConfigEcho, RepetitionOutcome, SelectionReport, Timings};
use super::{argmin_loss, majority_vote, position_map, rng_for, CandidateModel, CvConfig};

#[derive(Debug, Clone)]
pub struct RdpgOptions {
    pub d_max: usize,
    pub eigen: EigenOptions,
}

impl Default for RdpgOptions {
    fn default() -> Self {
        Self {
            d_max: 8,
            eigen: EigenOptions::default(),
        }
    }
}

/// Selects the embedding dimension d in 1..=d_max.
pub fn select_rdpg_dim(
    a: &AdjacencyMatrix,
    config: &CvConfig,
    opts: &RdpgOptions,
) -> Result<SelectionReport> {
    if opts.d_max == 0 {
        return Err(NetcropError::Domain("d_max must be >= 1".into()));
    }
    let t_total = Instant::now();
    let candidates: Vec<CandidateModel> =
        (1..=opts.d_max).map(CandidateModel::RdpgDim).collect();
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
        let embeddings: Vec<Embedding> = subnets
            .par_iter()
            .map(|sub| {
                let basis =
                    top_eigenpairs(sub, opts.d_max, OrderingMode::AlgebraicDesc, &opts.eigen)?;
                ase_from_basis(&basis, opts.d_max)
            })
            .collect::<Result<_>>()?;
        timings.fit_ms += t.elapsed().as_millis() as u64;

        let t = Instant::now();
        let aligned = align_embeddings(&embeddings, config.o)?;
        for w in &aligned.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        timings.stitch_ms += t.elapsed().as_millis() as u64;

        let t = Instant::now();
        let o = config.o;
        let part_coords: Vec<&DMatrix<f64>> =
            aligned.embeddings.iter().map(|e| &e.coords).collect();
        let losses: Vec<f64> = (1..=opts.d_max)
            .map(|d| {
                blockwise_loss(a, &plan, &pos_in_part, config.loss, |p, q, r, c| {
                    let xp = part_coords[p];
                    let xq = part_coords[q];
                    let mut dot = 0.0;
                    for t in 0..d {
                        dot += xp[(o + r, t)] * xq[(o + c, t)];
                    }
                    dot
                })
            })
            .collect();
        timings.predict_ms += t.elapsed().as_millis() as u64;

        let w_idx = argmin_loss(&losses);
        winners.push(candidates[w_idx].clone());
        outcomes.push(RepetitionOutcome {
            winner: candidates[w_idx].id(),
            losses: candidates
                .iter()
                .zip(&losses)
                .map(|(cand, &l)| CandidateLoss {
                    candidate: cand.id(),
                    loss: l.is_finite().then_some(l),
                })
                .collect(),
        });
    }

    let final_winner = majority_vote(&winners)?;
    timings.total_ms = t_total.elapsed().as_millis() as u64;
    Ok(SelectionReport {
        config: ConfigEcho {
            task: "select-rdpg".into(),
            n: config.n,
            o: config.o,
            s: config.s,
            m: config.m,
            reps: config.reps,
            loss: config.loss.id().into(),
            seed: config.seed,
            threads: config.threads,
            candidates: candidates.iter().map(|c| c.id()).collect(),
            extra: BTreeMap::from([("d_max".into(), opts.d_max.to_string())]),
        },
        repetitions: outcomes,
        final_winner: final_winner.id(),
        timings_ms: timings,
        warnings,
    })
}
