//! Genetic algorithm for assigning dataset cells to an assembly grid.
//!
//! Fitness is `MSE(u(l), u_t) + lambda * N_dc(l)`: the displacement-profile
//! error plus a static penalty on cells detached from the main structure.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::assembly::{mse, AssemblyProblem, AssemblySolver};
use super::connectivity::InterfaceTable;
use super::homogenize::{homogenize2d, ElasticTensor2D};
use super::MechError;
use crate::cell2d::UnitCell2D;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means `1 / N_f`.
    pub mutation_rate: Option<f64>,
    pub elitism: usize,
    pub generations: usize,
    /// Multiplier of `mean(u_t^2)` giving the penalty weight.
    pub penalty_scale: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            tournament: 2,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism: 2,
            generations: 200,
            penalty_scale: 1e6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mse: f64,
    pub n_dc: usize,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<usize>,
    pub eval: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    /// Best individual with `N_dc = 0`.
    pub best: Chromosome,
    /// Best fitness of each generation, starting with the initial population.
    pub history: Vec<f64>,
    pub r_dc: f64,
    /// Distinct assignments solved.
    pub evaluations: usize,
}

/// Everything needed to score assignments of one dataset on one problem.
#[derive(Debug, Clone)]
pub struct DesignContext {
    solver: AssemblySolver,
    table: InterfaceTable,
    target: Vec<f64>,
    penalty: f64,
}

impl DesignContext {
    /// Uses stored cell properties when present, otherwise homogenizes.
    pub fn new(problem: &AssemblyProblem, cells: &[&UnitCell2D], penalty_scale: f64) -> Result<Self, MechError> {
        let tensors = cells
            .iter()
            .map(|c| match c.properties.as_deref().and_then(ElasticTensor2D::from_property_vector) {
                Some(t) => Ok(t),
                None => homogenize2d(c),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(problem, &tensors, InterfaceTable::new(cells)?, penalty_scale)
    }

    pub fn from_parts(
        problem: &AssemblyProblem,
        tensors: &[ElasticTensor2D],
        table: InterfaceTable,
        penalty_scale: f64,
    ) -> Result<Self, MechError> {
        let solver = AssemblySolver::new(problem, tensors)?;
        if problem.target_profile.len() != problem.centerline_len() {
            return Err(MechError::Invalid("problem has no target profile".into()));
        }
        if table.len() != tensors.len() {
            return Err(MechError::Invalid("interface table and tensors differ in size".into()));
        }
        let target = problem.target_profile.clone();
        let scale = target.iter().map(|v| v * v).sum::<f64>() / target.len() as f64;
        let penalty = penalty_scale * if scale > 0.0 { scale } else { 1.0 };
        Ok(Self {
            solver,
            table,
            target,
            penalty,
        })
    }

    pub fn problem(&self) -> &AssemblyProblem {
        self.solver.problem()
    }

    pub fn dataset_len(&self) -> usize {
        self.solver.dataset_len()
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn evaluate(&self, l: &[usize]) -> Result<Evaluation, MechError> {
        let p = self.problem();
        let u = self.solver.centerline(l)?;
        let e = mse(&u, &self.target);
        let n_dc = self.table.n_disconnected(p.rows(), p.cols(), l);
        Ok(Evaluation {
            mse: e,
            n_dc,
            fitness: e + self.penalty * n_dc as f64,
        })
    }

    pub fn r_dc(&self, l: &[usize]) -> f64 {
        let p = self.problem();
        self.table.r_disconnected(p.rows(), p.cols(), l)
    }

    pub fn centerline(&self, l: &[usize]) -> Result<Vec<f64>, MechError> {
        self.solver.centerline(l)
    }
}

struct Memo<'a> {
    ctx: &'a DesignContext,
    seen: HashMap<Vec<usize>, Evaluation>,
}

impl Memo<'_> {
    /// Evaluates a population, solving each distinct new assignment once.
    fn evaluate(&mut self, pop: &[Vec<usize>]) -> Result<Vec<Evaluation>, MechError> {
        let mut fresh: Vec<&Vec<usize>> = Vec::new();
        for g in pop {
            if !self.seen.contains_key(g) && !fresh.contains(&g) {
                fresh.push(g);
            }
        }
        #[cfg(feature = "parallel")]
        let evals: Vec<_> = {
            use rayon::prelude::*;
            fresh.par_iter().map(|g| self.ctx.evaluate(g)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let evals: Vec<_> = fresh.iter().map(|g| self.ctx.evaluate(g)).collect();
        for (g, e) in fresh.into_iter().zip(evals) {
            self.seen.insert(g.clone(), e?);
        }
        Ok(pop.iter().map(|g| self.seen[g]).collect())
    }
}

fn tournament(rng: &mut impl Rng, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] < fitness[best] {
            best = c;
        }
    }
    best
}

/// Seeded GA over assignments of `ctx.dataset_len()` cells to the grid.
/// `initial` individuals (if any) replace the first random ones.
pub fn ga_design(ctx: &DesignContext, cfg: &GaConfig, initial: &[Vec<usize>]) -> Result<GaOutcome, MechError> {
    let nf = ctx.problem().cells();
    let nm = ctx.dataset_len();
    if cfg.population < 2 || cfg.elitism >= cfg.population || cfg.tournament == 0 {
        return Err(MechError::Invalid("population must exceed elitism and hold at least 2".into()));
    }
    if let Some(g) = initial.iter().find(|g| g.len() != nf || g.iter().any(|&x| x >= nm)) {
        return Err(MechError::Invalid(format!("initial individual {g:?} is not a valid assignment")));
    }
    let mut memo = Memo {
        ctx,
        seen: HashMap::new(),
    };
    if nm == 1 {
        let genes = vec![0; nf];
        let eval = memo.evaluate(std::slice::from_ref(&genes))?[0];
        let best = Chromosome { genes, eval };
        if eval.n_dc > 0 {
            return Err(MechError::NoFeasible(Box::new(best)));
        }
        return Ok(GaOutcome {
            r_dc: ctx.r_dc(&best.genes),
            best,
            history: vec![eval.fitness],
            evaluations: 1,
        });
    }
    let pm = cfg.mutation_rate.unwrap_or(1.0 / nf as f64);
    let mut rng = seed::rng(cfg.seed, "ga", 0);
    let mut pop: Vec<Vec<usize>> = initial.iter().take(cfg.population).cloned().collect();
    while pop.len() < cfg.population {
        pop.push((0..nf).map(|_| rng.gen_range(0..nm)).collect());
    }
    let mut evals = memo.evaluate(&pop)?;
    let mut best_feasible: Option<Chromosome> = None;
    let mut best_any: Option<Chromosome> = None;
    let mut track = |pop: &[Vec<usize>], evals: &[Evaluation]| {
        for (g, e) in pop.iter().zip(evals) {
            if best_any.as_ref().is_none_or(|b| e.fitness < b.eval.fitness) {
                best_any = Some(Chromosome { genes: g.clone(), eval: *e });
            }
            if e.n_dc == 0 && best_feasible.as_ref().is_none_or(|b| e.fitness < b.eval.fitness) {
                best_feasible = Some(Chromosome { genes: g.clone(), eval: *e });
            }
        }
    };
    track(&pop, &evals);
    let min_fitness = |e: &[Evaluation]| e.iter().map(|x| x.fitness).fold(f64::INFINITY, f64::min);
    let mut history = vec![min_fitness(&evals)];
    for _ in 0..cfg.generations {
        let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let mut next: Vec<Vec<usize>> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < cfg.population {
            let a = &pop[tournament(&mut rng, &fitness, cfg.tournament)];
            let b = &pop[tournament(&mut rng, &fitness, cfg.tournament)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if rng.gen::<f64>() < cfg.crossover_rate {
                for i in 0..nf {
                    if rng.gen::<bool>() {
                        std::mem::swap(&mut c1[i], &mut c2[i]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                for gene in child.iter_mut() {
                    if rng.gen::<f64>() < pm {
                        *gene = rng.gen_range(0..nm);
                    }
                }
            }
            next.push(c1);
            if next.len() < cfg.population {
                next.push(c2);
            }
        }
        pop = next;
        evals = memo.evaluate(&pop)?;
        track(&pop, &evals);
        history.push(min_fitness(&evals));
    }
    let evaluations = memo.seen.len();
    match best_feasible {
        Some(best) => Ok(GaOutcome {
            r_dc: ctx.r_dc(&best.genes),
            best,
            history,
            evaluations,
        }),
        None => Err(MechError::NoFeasible(Box::new(best_any.expect("population is not empty")))),
    }
}
