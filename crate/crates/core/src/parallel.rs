//! Distributed search: independent worker populations that exchange their
//! black holes every `aggregate_every` generations and at the final
//! generation. Workers run as in-process threads joined at each exchange,
//! so the schedule is a barrier and results do not depend on physical
//! scheduling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbha::{Cbha, CbhaError, WorkerState};
use crate::model::{PlannerConfig, Route};

/// Odd constant spreading worker seeds across the seed space.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum ParallelError {
    #[error("worker plan needs at least one worker")]
    NoWorkers,
    #[error("worker seeds must be pairwise distinct")]
    DuplicateSeeds,
    #[error("worker {worker} failed: {source}")]
    WorkerFailed {
        worker: usize,
        #[source]
        source: CbhaError,
    },
    #[error("worker {worker} panicked")]
    WorkerPanicked { worker: usize },
    #[error(transparent)]
    Search(#[from] CbhaError),
}

/// How a parallel run is split: worker count, per-worker population,
/// exchange period, and one RNG seed per worker.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkerPlan {
    pub worker_count: usize,
    pub per_worker_population: usize,
    pub aggregate_every: usize,
    pub per_worker_seeds: Vec<u64>,
}

impl WorkerPlan {
    /// Splits the configured population evenly across `worker_count` workers
    /// and derives per-worker seeds as `master + index × stride`.
    pub fn from_master_seed(worker_count: usize, config: &PlannerConfig) -> Self {
        let worker_count = worker_count.max(1);
        WorkerPlan {
            worker_count,
            per_worker_population: config.population.div_ceil(worker_count),
            aggregate_every: config.aggregate_every,
            per_worker_seeds: (0..worker_count)
                .map(|i| config.rng_seed.wrapping_add((i as u64).wrapping_mul(SEED_STRIDE)))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ParallelError> {
        if self.worker_count == 0 || self.per_worker_seeds.len() != self.worker_count {
            return Err(ParallelError::NoWorkers);
        }
        let mut seeds = self.per_worker_seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.worker_count {
            return Err(ParallelError::DuplicateSeeds);
        }
        Ok(())
    }
}

/// Black-hole metrics observed at one exchange point.
#[derive(Clone, Debug)]
pub struct AggregationPoint {
    pub generation: usize,
    pub worker_metrics: Vec<f64>,
    pub winner: usize,
    pub winner_metric: f64,
}

#[derive(Clone, Debug)]
pub struct ParallelRun {
    pub route: Route,
    pub fitness: f64,
    pub aggregations: Vec<AggregationPoint>,
}

/// Arg-max of the gathered black holes by metric; ties go to the lowest
/// worker id.
pub fn aggregate(black_holes: &[(f64, Route)]) -> (f64, Route, usize) {
    assert!(!black_holes.is_empty(), "aggregate over no workers");
    let mut best = 0;
    for (i, (metric, _)) in black_holes.iter().enumerate().skip(1) {
        if *metric > black_holes[best].0 {
            best = i;
        }
    }
    (black_holes[best].0, black_holes[best].1.clone(), best)
}

/// Runs the distributed search and returns the final global black hole.
pub fn evolve_parallel(
    initial: &Route,
    cbha: &Cbha<'_>,
    config: &PlannerConfig,
    plan: &WorkerPlan,
) -> Result<Route, ParallelError> {
    Ok(evolve_parallel_traced(initial, cbha, config, plan)?.route)
}

pub fn evolve_parallel_traced(
    initial: &Route,
    cbha: &Cbha<'_>,
    config: &PlannerConfig,
    plan: &WorkerPlan,
) -> Result<ParallelRun, ParallelError> {
    plan.validate()?;
    if config.generations == 0 {
        let fitness = cbha.solution_fitness(initial)?;
        return Ok(ParallelRun { route: initial.clone(), fitness, aggregations: Vec::new() });
    }

    let mut workers: Vec<WorkerState> = plan
        .per_worker_seeds
        .iter()
        .map(|&seed| WorkerState::init(cbha, initial, plan.per_worker_population, seed))
        .collect::<Result<_, _>>()?;

    let mut aggregations = Vec::new();
    let mut generation = 0;
    while generation < config.generations {
        let window = plan
            .aggregate_every
            .min(config.generations - generation)
            .max(1);

        if workers.len() == 1 {
            for _ in 0..window {
                workers[0].run_generation()?;
            }
        } else {
            std::thread::scope(|scope| -> Result<(), ParallelError> {
                let handles: Vec<_> = workers
                    .iter_mut()
                    .map(|w| {
                        scope.spawn(move || -> Result<(), CbhaError> {
                            for _ in 0..window {
                                w.run_generation()?;
                            }
                            Ok(())
                        })
                    })
                    .collect();
                for (id, handle) in handles.into_iter().enumerate() {
                    match handle.join() {
                        Err(_) => return Err(ParallelError::WorkerPanicked { worker: id }),
                        Ok(Err(source)) => {
                            return Err(ParallelError::WorkerFailed { worker: id, source })
                        }
                        Ok(Ok(())) => {}
                    }
                }
                Ok(())
            })?;
        }
        generation += window;

        // Exchange: gather, pick the winner, broadcast it to everyone.
        let gathered: Vec<(f64, Route)> =
            workers.iter().map(|w| (w.black_hole_metric(), w.black_hole_route())).collect();
        let worker_metrics: Vec<f64> = gathered.iter().map(|g| g.0).collect();
        let (winner_metric, winner_route, winner) = aggregate(&gathered);
        for w in workers.iter_mut() {
            w.adopt(&winner_route, winner_metric)?;
        }
        aggregations.push(AggregationPoint { generation, worker_metrics, winner, winner_metric });
    }

    let last = aggregations.last().expect("at least one aggregation");
    Ok(ParallelRun {
        route: workers[last.winner].black_hole_route(),
        fitness: last.winner_metric,
        aggregations,
    })
}
