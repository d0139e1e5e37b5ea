//! Thread-parallel versions of the independent simulations behind one
//! gradient estimate and the finite-difference oracle. Results are
//! identical to the sequential ones; only the scheduling differs.

use std::num::NonZeroUsize;
use std::thread;

use fracprop_core::circuit::Circuit;
use fracprop_core::dynamics::{simulate, DriveSet, SimConfig};
use fracprop_core::eqprop::{estimate_from_trajectories, fd_circuits, free_loss, GradientEstimate, SIGN_CONVENTION};
use fracprop_core::error::{EqpropError, Phase};

pub fn default_jobs() -> usize {
    thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1)
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
pub fn map_ordered<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Free and nudged phases on two threads.
pub fn estimate_gradient(
    circuit: &Circuit,
    drive: &DriveSet,
    beta: f64,
    cfg: &SimConfig,
    jobs: usize,
) -> Result<GradientEstimate, EqpropError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(EqpropError::NonPositiveBeta(beta));
    }
    let phases = [(0.0, Phase::Free), (beta, Phase::Nudged)];
    let mut runs = map_ordered(&phases, jobs.min(2), |&(b, phase)| {
        simulate(circuit, drive, b, cfg).map_err(|source| EqpropError::Simulation { phase, source })
    })
    .into_iter();
    let free = runs.next().expect("two phases")?;
    let nudged = runs.next().expect("two phases")?;
    estimate_from_trajectories(circuit, &free, &nudged, cfg, SIGN_CONVENTION)
}

pub fn fd_gradient(
    circuit: &Circuit,
    drive: &DriveSet,
    eps: f64,
    cfg: &SimConfig,
    jobs: usize,
) -> Result<Vec<f64>, EqpropError> {
    let points: Vec<(Circuit, Phase)> = fd_circuits(circuit, eps)?
        .into_iter()
        .flat_map(|(_, p, m)| [(p, Phase::Plus), (m, Phase::Minus)])
        .collect();
    let losses = map_ordered(&points, jobs, |(c, phase)| free_loss(c, drive, cfg, *phase));
    let losses: Vec<f64> = losses.into_iter().collect::<Result<_, _>>()?;
    Ok(losses.chunks(2).map(|pm| (pm[0] - pm[1]) / (2.0 * eps)).collect())
}
