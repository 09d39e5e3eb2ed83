//! Parallel-update stepping of the particle system.

use serde::Serialize;

use crate::error::{Error, Result};

use super::rng::RngStream;
use super::stationary::gap_law_table;
use super::table::{Gap, TableCache, DEFAULT_TAIL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InitialCondition {
    /// `X_k(0) = -k`
    Step,
    /// Leader at 0, i.i.d. gaps from the stationary gap law with parameter `alpha`.
    Stationary { alpha: f64 },
}

/// Positions of labels `1..=n`, stored as the leader position and the gaps
/// `gaps[k] = X_{k+1} - X_{k+2} - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParticleState {
    pub time: u64,
    pub x1: i64,
    pub gaps: Vec<u64>,
    /// Largest label that can move in the next step. Labels beyond it sit in
    /// the frozen step wedge.
    pub active_front: usize,
}

impl ParticleState {
    pub fn step_ic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("need at least one particle".into()));
        }
        Ok(Self { time: 0, x1: -1, gaps: vec![0; n - 1], active_front: 1 })
    }

    pub fn stationary_ic(cache: &TableCache, n: usize, alpha: f64, rng: &mut RngStream) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("need at least one particle".into()));
        }
        let law = gap_law_table(cache.params(), alpha, DEFAULT_TAIL_TOL)?;
        let gaps = (1..n).map(|_| law.sample(rng).0).collect();
        Ok(Self { time: 0, x1: 0, gaps, active_front: n })
    }

    pub fn from_positions(time: u64, positions: &[i64]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Domain("need at least one particle".into()));
        }
        let mut gaps = Vec::with_capacity(positions.len() - 1);
        for w in positions.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::Invariant(format!("positions not strictly decreasing: {} then {}", w[0], w[1])));
            }
            gaps.push((w[0] - w[1] - 1) as u64);
        }
        Ok(Self { time, x1: positions[0], gaps, active_front: positions.len() })
    }

    pub fn n_particles(&self) -> usize {
        self.gaps.len() + 1
    }

    /// `X_label` for `label` in `1..=n`.
    pub fn position(&self, label: usize) -> i64 {
        let behind: u64 = self.gaps[..label - 1].iter().map(|g| g + 1).sum();
        self.x1 - behind as i64
    }

    pub fn positions(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.n_particles());
        let mut x = self.x1;
        out.push(x);
        for g in &self.gaps {
            x -= *g as i64 + 1;
            out.push(x);
        }
        out
    }

    /// One parallel update: every movable particle draws its jump from the
    /// law of its pre-step gap, in label order, and all jumps are applied at
    /// once. Labels with zero gap consume no randomness.
    pub fn step(&mut self, cache: &TableCache, rng: &mut RngStream, tail_hits: &mut u64) -> Result<()> {
        let n = self.n_particles();
        let front = self.active_front.min(n);
        let mut prev = cache.sample(Gap::Infinite, rng, tail_hits);
        self.x1 += prev as i64;
        let sampler = cache.gap_sampler();
        for g in &mut self.gaps[..front - 1] {
            let m = *g;
            let j = sampler.sample(m, rng, tail_hits);
            if j > m {
                return Err(Error::Invariant(format!("jump {j} exceeds gap {m}")));
            }
            *g = m - j + prev;
            prev = j;
        }
        if front < n {
            self.gaps[front - 1] += prev;
            if prev > 0 {
                self.active_front = front + 1;
                // the front advances by at most one label per step
                if self.active_front as u64 > self.time + 2 {
                    return Err(Error::Invariant(format!(
                        "label {} active at time {}",
                        self.active_front,
                        self.time + 1
                    )));
                }
            }
        }
        self.time += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub x_n: i64,
    pub state: ParticleState,
    /// Simulated particles that crossed the bond `(-1, 0)`.
    pub crossings: u64,
    /// Draws beyond the truncated support of the infinite jump table.
    pub tail_hits: u64,
    /// Random words consumed.
    pub counter: u128,
}

fn initial_state(cache: &TableCache, n: usize, ic: InitialCondition, rng: &mut RngStream) -> Result<ParticleState> {
    match ic {
        InitialCondition::Step => ParticleState::step_ic(n),
        InitialCondition::Stationary { alpha } => ParticleState::stationary_ic(cache, n, alpha, rng),
    }
}

fn count_nonneg(state: &ParticleState) -> u64 {
    state.positions().iter().filter(|&&x| x >= 0).count() as u64
}

/// Runs labels `1..=n` for `tau_steps` steps. Labels above `n` are behind
/// particle `n` and never influence it, so they are not simulated.
pub fn simulate(
    cache: &TableCache,
    n: usize,
    tau_steps: u64,
    ic: InitialCondition,
    seed: u64,
    replica: u64,
) -> Result<SimulationResult> {
    let mut rng = RngStream::new(seed, replica);
    let mut state = initial_state(cache, n, ic, &mut rng)?;
    let before = count_nonneg(&state);
    let mut tail_hits = 0;
    for _ in 0..tau_steps {
        state.step(cache, &mut rng, &mut tail_hits)?;
    }
    Ok(SimulationResult {
        x_n: state.position(n),
        crossings: count_nonneg(&state) - before,
        state,
        tail_hits,
        counter: rng.counter(),
    })
}

/// Positions `X_label(time)` read off a single trajectory of `n` particles
/// for each requested `(label, time)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointRun {
    pub positions: Vec<i64>,
    pub tail_hits: u64,
}

pub fn simulate_checkpoints(
    cache: &TableCache,
    n: usize,
    ic: InitialCondition,
    checkpoints: &[(usize, u64)],
    seed: u64,
    replica: u64,
) -> Result<CheckpointRun> {
    if checkpoints.iter().any(|&(label, _)| label == 0 || label > n) {
        return Err(Error::Domain(format!("checkpoint labels must lie in 1..={n}")));
    }
    let mut order: Vec<usize> = (0..checkpoints.len()).collect();
    order.sort_by_key(|&i| checkpoints[i].1);
    let mut rng = RngStream::new(seed, replica);
    let mut state = initial_state(cache, n, ic, &mut rng)?;
    let mut positions = vec![0; checkpoints.len()];
    let mut tail_hits = 0;
    for i in order {
        let (label, time) = checkpoints[i];
        while state.time < time {
            state.step(cache, &mut rng, &mut tail_hits)?;
        }
        positions[i] = state.position(label);
    }
    Ok(CheckpointRun { positions, tail_hits })
}
