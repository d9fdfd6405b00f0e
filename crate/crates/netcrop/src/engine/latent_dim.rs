//! Latent-space dimension selection: per-subnetwork maximum-likelihood fits
//! aligned by generalized Procrustes on the overlap.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Instant;

use crate::alignment::align_latent;
use crate::error::{NetcropError, Result};
use crate::generators::logistic;
use crate::graph::AdjacencyMatrix;
use crate::latent::{fit_latent, LatentFit, LatentFitSettings};
use crate::spectral::Embedding;

use super::blockmodel::{blockwise_loss, tag};
use super::report::{CandidateLoss, ConfigEcho, RepetitionOutcome, SelectionReport, Timings};
use super::{argmin_loss, majority_vote, position_map, rng_for, CandidateModel, CvConfig};

#[derive(Debug, Clone)]
pub struct LatentOptions {
    pub d_max: usize,
    pub settings: LatentFitSettings,
}

impl Default for LatentOptions {
    fn default() -> Self {
        Self {
            d_max: 4,
            settings: LatentFitSettings::default(),
        }
    }
}

/// Selects the latent dimension d in 1..=d_max.
pub fn select_latent_dim(
    a: &AdjacencyMatrix,
    config: &CvConfig,
    opts: &LatentOptions,
) -> Result<SelectionReport> {
    if opts.d_max == 0 {
        return Err(NetcropError::Domain("d_max must be >= 1".into()));
    }
    let t_total = Instant::now();
    let candidates: Vec<CandidateModel> =
        (1..=opts.d_max).map(CandidateModel::LatentDim).collect();
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

        let o = config.o;
        let mut losses = vec![f64::INFINITY; candidates.len()];
        let mut degenerate = vec![false; candidates.len()];

        for d in 1..=opts.d_max {
            let t = Instant::now();
            let fits: Vec<Result<LatentFit>> = subnets
                .par_iter()
                .map(|sub| fit_latent(sub, d, &opts.settings))
                .collect();
            timings.fit_ms += t.elapsed().as_millis() as u64;

            let fits: Vec<LatentFit> = match fits.into_iter().collect::<Result<Vec<_>>>() {
                Ok(f) => f,
                Err(e) => {
                    let msg = format!("d={d}: latent fit failed: {e}");
                    if !warnings.contains(&msg) {
                        warnings.push(msg);
                    }
                    degenerate[d - 1] = true;
                    continue;
                }
            };
            for (q, fit) in fits.iter().enumerate() {
                if !fit.converged {
                    let msg =
                        format!("d={d}: fit for subnetwork {q} stopped before convergence");
                    if !warnings.contains(&msg) {
                        warnings.push(msg);
                    }
                }
            }

            let t = Instant::now();
            let embeddings: Vec<Embedding> = fits
                .iter()
                .map(|f| Embedding {
                    coords: f.z.clone(),
                })
                .collect();
            let aligned = align_latent(&embeddings, o)?;
            for w in &aligned.warnings {
                if !warnings.contains(w) {
                    warnings.push(w.clone());
                }
            }
            timings.stitch_ms += t.elapsed().as_millis() as u64;

            let t = Instant::now();
            let coords: Vec<&DMatrix<f64>> =
                aligned.embeddings.iter().map(|e| &e.coords).collect();
            let alphas: Vec<f64> = fits.iter().map(|f| f.alpha).collect();
            losses[d - 1] = blockwise_loss(a, &plan, &pos_in_part, config.loss, |p, q, r, c| {
                let zp = coords[p].row(o + r);
                let zq = coords[q].row(o + c);
                let mut dist2 = 0.0;
                for td in 0..d {
                    let diff = zp[td] - zq[td];
                    dist2 += diff * diff;
                }
                logistic(0.5 * (alphas[p] + alphas[q]) - dist2)
            });
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
            task: "select-latent".into(),
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
                ("d_max".into(), opts.d_max.to_string()),
                ("max_iters".into(), opts.settings.max_iters.to_string()),
            ]),
        },
        repetitions: outcomes,
        final_winner: final_winner.id(),
        timings_ms: timings,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Loss;
    use crate::generators::{sample_latent, LatentSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_planted_latent_dimension() {
        let spec = LatentSpec::new(300, 2, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (a, _, _) = sample_latent(&spec, &mut rng).unwrap();
        let config = CvConfig::explicit(300, 120, 3, 3, Loss::Deviance, 13).unwrap();
        let opts = LatentOptions {
            d_max: 3,
            ..Default::default()
        };
        let report = select_latent_dim(&a, &config, &opts).unwrap();
        assert_eq!(
            report.final_winner, "latent-d2",
            "report: {}",
            report.to_json()
        );
    }

    #[test]
    fn deterministic_and_well_formed() {
        let spec = LatentSpec::new(120, 1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, _, _) = sample_latent(&spec, &mut rng).unwrap();
        let config = CvConfig::explicit(120, 40, 2, 2, Loss::Squared, 99).unwrap();
        let opts = LatentOptions {
            d_max: 2,
            ..Default::default()
        };
        let mut r1 = select_latent_dim(&a, &config, &opts).unwrap();
        let mut r2 = select_latent_dim(&a, &config, &opts).unwrap();
        assert_eq!(r1.config.candidates, vec!["latent-d1", "latent-d2"]);
        r1.timings_ms.redact();
        r2.timings_ms.redact();
        assert_eq!(r1.to_json(), r2.to_json());
    }
}
