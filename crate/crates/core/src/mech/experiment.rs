//! Repeated GA design runs over several candidate datasets.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::assembly::AssemblyProblem;
use super::ga::{ga_design, DesignContext, GaConfig};
use super::MechError;
use crate::cell2d::UnitCell2D;

/// A named subset of the ground set, given by indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSubset {
    pub name: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub subset: String,
    pub seed: u64,
    pub mse: f64,
    pub r_dc: f64,
    pub n_dc: usize,
    pub generations: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub subset: String,
    pub runs: usize,
    pub feasible_runs: usize,
    pub mean_mse: f64,
    pub min_mse: f64,
    pub mean_r_dc: f64,
    pub min_r_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SubsetSummary>,
}

impl ExperimentReport {
    /// `subset,seed,mse,r_dc,n_dc,generations,wall_ms` rows.
    pub fn runs_csv(&self) -> String {
        let mut s = String::from("subset,seed,mse,r_dc,n_dc,generations,wall_ms\n");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{},{},{:e},{:.6},{},{},{}",
                r.subset, r.seed, r.mse, r.r_dc, r.n_dc, r.generations, r.wall_ms
            );
        }
        s
    }

    /// One row per subset with mean and best MSE and `r_dc`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("subset,runs,feasible_runs,mean_mse,min_mse,mean_r_dc,min_r_dc\n");
        for r in &self.summary {
            let _ = writeln!(
                s,
                "{},{},{},{:.4e},{:.4e},{:.4},{:.4}",
                r.subset, r.runs, r.feasible_runs, r.mean_mse, r.min_mse, r.mean_r_dc, r.min_r_dc
            );
        }
        s
    }

    pub fn runs_of<'a>(&'a self, subset: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs.iter().filter(move |r| r.subset == subset)
    }
}

/// Runs the GA once per `(subset, seed)`. Runs that end without a feasible
/// assembly are recorded with the best penalized individual. When
/// `record_time` is false, `wall_ms` is written as 0 so reports are
/// reproducible byte for byte.
pub fn experiment_mbb(
    problem: &AssemblyProblem,
    ground: &[UnitCell2D],
    subsets: &[NamedSubset],
    seeds: &[u64],
    cfg: &GaConfig,
    record_time: bool,
) -> Result<ExperimentReport, MechError> {
    let mut runs = Vec::new();
    let mut summary = Vec::new();
    for subset in subsets {
        if let Some(&i) = subset.indices.iter().find(|&&i| i >= ground.len()) {
            return Err(MechError::Invalid(format!("subset {} references cell {i} outside the ground set", subset.name)));
        }
        let cells: Vec<&UnitCell2D> = subset.indices.iter().map(|&i| &ground[i]).collect();
        let ctx = DesignContext::new(problem, &cells, cfg.penalty_scale)?;
        let mut recs = Vec::new();
        for &seed in seeds {
            let start = Instant::now();
            let run_cfg = GaConfig { seed, ..cfg.clone() };
            let (best, generations, r_dc) = match ga_design(&ctx, &run_cfg, &[]) {
                Ok(out) => (out.best, out.history.len() - 1, out.r_dc),
                Err(MechError::NoFeasible(best)) => {
                    let r = ctx.r_dc(&best.genes);
                    (*best, cfg.generations, r)
                }
                Err(e) => return Err(e),
            };
            recs.push(RunRecord {
                subset: subset.name.clone(),
                seed,
                mse: best.eval.mse,
                r_dc,
                n_dc: best.eval.n_dc,
                generations,
                wall_ms: if record_time { start.elapsed().as_millis() as u64 } else { 0 },
            });
        }
        let k = recs.len().max(1) as f64;
        summary.push(SubsetSummary {
            subset: subset.name.clone(),
            runs: recs.len(),
            feasible_runs: recs.iter().filter(|r| r.n_dc == 0).count(),
            mean_mse: recs.iter().map(|r| r.mse).sum::<f64>() / k,
            min_mse: recs.iter().map(|r| r.mse).fold(f64::INFINITY, f64::min),
            mean_r_dc: recs.iter().map(|r| r.r_dc).sum::<f64>() / k,
            min_r_dc: recs.iter().map(|r| r.r_dc).fold(f64::INFINITY, f64::min),
        });
        runs.extend(recs);
    }
    Ok(ExperimentReport { runs, summary })
}
