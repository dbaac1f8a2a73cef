//! Swap-based and sorting-based monotonization of sampled couplings.
//!
//! Both algorithms start from a coupling given as a list of (x, y, z)
//! triples and only ever exchange coordinates between two triples, so the
//! three per-axis value multisets are preserved exactly. The general
//! version removes pairwise swap violations of c-monotonicity for an
//! arbitrary cost `C(xyz)`; the faster sorting version encodes the
//! equivalent condition for the cost `xyz` itself: sorted along one axis,
//! the products of the two remaining coordinates must be descending.

use crate::dual::CostProfile;
use crate::error::{Error, Result};
use crate::support::Axis;
use rand::Rng;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

/// Violations smaller than this are treated as ties, not witnesses.
const WITNESS_TOL: f64 = 1e-12;

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// No run has been performed yet.
    Pending,
    /// A full verification pass found no remaining violation.
    Converged,
    /// The iteration budget ran out first.
    BudgetExhausted,
    /// The sorting pass revisited an earlier state.
    CycleDetected,
}

/// A coupling given by equal-weight triples, plus run bookkeeping.
#[derive(Debug, Clone)]
pub struct CouplingState {
    pub triples: Vec<[f64; 3]>,
    /// Completed sweeps (general version) or full axis cycles (sorting).
    pub pass_count: u64,
    /// Applied coordinate swaps (general version only).
    pub swap_count: u64,
    pub status: RunStatus,
}

impl CouplingState {
    pub fn new(triples: Vec<[f64; 3]>) -> Self {
        CouplingState {
            triples,
            pass_count: 0,
            swap_count: 0,
            status: RunStatus::Pending,
        }
    }

    /// Zips three independently sampled marginals into a coupling.
    pub fn from_marginals(xs: &[f64], ys: &[f64], zs: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch(xs.len(), ys.len()));
        }
        if xs.len() != zs.len() {
            return Err(Error::LengthMismatch(xs.len(), zs.len()));
        }
        Ok(CouplingState::new(
            xs.iter()
                .zip(ys)
                .zip(zs)
                .map(|((&x, &y), &z)| [x, y, z])
                .collect(),
        ))
    }

    pub fn is_converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn total_cost(&self, cost: &CostProfile) -> f64 {
        self.triples.iter().map(|&t| cost.cost(t)).sum()
    }
}

fn swapped(a: [f64; 3], b: [f64; 3], axis: Axis) -> ([f64; 3], [f64; 3]) {
    let mut a2 = a;
    let mut b2 = b;
    let idx = match axis {
        Axis::X => 0,
        Axis::Y => 1,
        Axis::Z => 2,
    };
    a2[idx] = b[idx];
    b2[idx] = a[idx];
    (a2, b2)
}

/// Cost decrease achieved by exchanging the `axis` coordinates of `a`
/// and `b`; positive means the swap strictly improves.
fn swap_gain(a: [f64; 3], b: [f64; 3], axis: Axis, cost: &CostProfile) -> f64 {
    let (a2, b2) = swapped(a, b, axis);
    (cost.cost(a) + cost.cost(b)) - (cost.cost(a2) + cost.cost(b2))
}

/// First pair and axis violating one of the three pairwise swap
/// inequalities by more than 1e-12, scanning pairs in index order and axes
/// in x, y, z order. `None` means the coupling is pairwise c-monotone.
pub fn monotonicity_witness(
    state: &CouplingState,
    cost: &CostProfile,
) -> Option<(usize, usize, Axis)> {
    let n = state.triples.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for axis in Axis::ALL {
                if swap_gain(state.triples[i], state.triples[j], axis, cost) > WITNESS_TOL {
                    return Some((i, j, axis));
                }
            }
        }
    }
    None
}

/// Random-pair descent: repeatedly samples pairs (uniformly, with
/// replacement) and applies the first improving coordinate swap. After a
/// full sweep of n^2 samples with no improvement, a deterministic O(n^2)
/// audit either certifies convergence or supplies the witness the random
/// sweep missed. Total cost never increases.
pub fn run_general<R: Rng>(
    mut state: CouplingState,
    cost: &CostProfile,
    max_swaps: u64,
    rng: &mut R,
) -> CouplingState {
    let n = state.triples.len();
    if n < 2 {
        state.status = RunStatus::Converged;
        return state;
    }

    loop {
        let mut improved = false;
        for _ in 0..n * n {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            for axis in Axis::ALL {
                let gain = swap_gain(state.triples[i], state.triples[j], axis, cost);
                if gain > WITNESS_TOL {
                    if state.swap_count >= max_swaps {
                        state.status = RunStatus::BudgetExhausted;
                        return state;
                    }
                    debug_assert!(gain > 0.0);
                    let (a2, b2) = swapped(state.triples[i], state.triples[j], axis);
                    state.triples[i] = a2;
                    state.triples[j] = b2;
                    state.swap_count += 1;
                    improved = true;
                    break;
                }
            }
        }
        state.pass_count += 1;

        if !improved {
            match monotonicity_witness(&state, cost) {
                None => {
                    state.status = RunStatus::Converged;
                    return state;
                }
                Some((i, j, axis)) => {
                    if state.swap_count >= max_swaps {
                        state.status = RunStatus::BudgetExhausted;
                        return state;
                    }
                    let (a2, b2) = swapped(state.triples[i], state.triples[j], axis);
                    state.triples[i] = a2;
                    state.triples[j] = b2;
                    state.swap_count += 1;
                }
            }
        }
    }
}

fn axis_split(axis: Axis) -> (usize, usize, usize) {
    match axis {
        Axis::X => (0, 1, 2),
        Axis::Y => (1, 0, 2),
        Axis::Z => (2, 0, 1),
    }
}

/// One sorting step: order by `axis` ascending, then reattach the other two
/// coordinates (kept together as pairs) so their products are descending.
/// Ties between equal products break by the pair's first coordinate,
/// descending, and the sorts are stable, so the step is deterministic.
fn sort_step(triples: &mut [[f64; 3]], axis: Axis) {
    let (key, first, second) = axis_split(axis);
    triples.sort_by(|a, b| a[key].total_cmp(&b[key]));
    let mut pairs: Vec<(f64, f64)> = triples.iter().map(|t| (t[first], t[second])).collect();
    pairs.sort_by(|a, b| {
        (b.0 * b.1)
            .total_cmp(&(a.0 * a.1))
            .then(b.0.total_cmp(&a.0))
    });
    for (t, pair) in triples.iter_mut().zip(pairs) {
        t[first] = pair.0;
        t[second] = pair.1;
    }
}

fn canonical_hash(triples: &[[f64; 3]]) -> u64 {
    let mut sorted: Vec<[u64; 3]> = triples.iter().map(|t| t.map(f64::to_bits)).collect();
    sorted.sort_unstable();
    let mut hasher = DefaultHasher::new();
    sorted.hash(&mut hasher);
    hasher.finish()
}

/// Sorting-based monotonization for the cost `xyz`: cycles the sorting step
/// through the three axes until a full cycle changes nothing (fixpoint),
/// a state repeats (cycle), or the pass budget runs out. Convergence is
/// not guaranteed in general, hence the cycle detection.
pub fn run_sorting(mut state: CouplingState, max_passes: u64) -> CouplingState {
    if state.triples.len() <= 1 {
        state.status = RunStatus::Converged;
        return state;
    }
    let mut seen = HashSet::new();
    seen.insert(canonical_hash(&state.triples));

    for _ in 0..max_passes {
        let before = canonical_hash(&state.triples);
        for axis in Axis::ALL {
            sort_step(&mut state.triples, axis);
        }
        state.pass_count += 1;
        let after = canonical_hash(&state.triples);
        if after == before {
            state.status = RunStatus::Converged;
            return state;
        }
        if !seen.insert(after) {
            state.status = RunStatus::CycleDetected;
            return state;
        }
    }
    state.status = RunStatus::BudgetExhausted;
    state
}

/// Full O(n^2) audit of the product-form monotonicity condition
/// (`z_i < z_j` implies `x_i y_i >= x_j y_j`, and its two permutations).
pub fn weak_monotonicity_holds(triples: &[[f64; 3]], tol: f64) -> bool {
    let n = triples.len();
    for i in 0..n {
        for j in 0..n {
            let a = triples[i];
            let b = triples[j];
            if a[2] < b[2] && a[0] * a[1] < b[0] * b[1] - tol {
                return false;
            }
            if a[1] < b[1] && a[0] * a[2] < b[0] * b[2] - tol {
                return false;
            }
            if a[0] < b[0] && a[1] * a[2] < b[1] * b[2] - tol {
                return false;
            }
        }
    }
    true
}

/// A one-dimensional marginal for the heuristics.
#[derive(Debug, Clone)]
pub enum MarginalSpec {
    /// Lebesgue measure on [0, 1].
    Uniform01,
    /// The two-level density on [0, 5]: 1/15 on [0,1] u [2,3] u [4,5],
    /// 2/5 on (1,2) u (3,4).
    Sf,
    /// Arbitrary piecewise-constant density.
    Table(PiecewiseDensity),
}

/// Piecewise-constant density: `densities[i]` on `[breaks[i], breaks[i+1])`.
#[derive(Debug, Clone)]
pub struct PiecewiseDensity {
    pub breaks: Vec<f64>,
    pub densities: Vec<f64>,
}

impl PiecewiseDensity {
    pub fn new(breaks: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if breaks.len() != densities.len() + 1 {
            return Err(Error::InvalidTable(format!(
                "{} breakpoints need {} densities, got {}",
                breaks.len(),
                breaks.len() - 1,
                densities.len()
            )));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if let Some(d) = densities.iter().find(|&&d| d < 0.0) {
            return Err(Error::InvalidTable(format!("negative density {d}")));
        }
        let total: f64 = breaks
            .windows(2)
            .zip(&densities)
            .map(|(w, d)| d * (w[1] - w[0]))
            .sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTable(format!(
                "density integrates to {total}, not 1"
            )));
        }
        Ok(PiecewiseDensity { breaks, densities })
    }

    fn uniform01() -> Self {
        PiecewiseDensity {
            breaks: vec![0.0, 1.0],
            densities: vec![1.0],
        }
    }

    fn sf() -> Self {
        PiecewiseDensity {
            breaks: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            densities: vec![1.0 / 15.0, 2.0 / 5.0, 1.0 / 15.0, 2.0 / 5.0, 1.0 / 15.0],
        }
    }

    /// Inverse CDF of the piecewise-constant density at `u` in [0, 1).
    fn quantile(&self, u: f64, cumulative: &[f64]) -> f64 {
        let idx = cumulative[1..]
            .partition_point(|&c| c <= u)
            .min(self.densities.len() - 1);
        let d = self.densities[idx];
        if d == 0.0 {
            self.breaks[idx]
        } else {
            self.breaks[idx] + (u - cumulative[idx]) / d
        }
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.breaks.len());
        cum.push(0.0);
        for (w, d) in self.breaks.windows(2).zip(&self.densities) {
            cum.push(cum.last().unwrap() + d * (w[1] - w[0]));
        }
        let total = *cum.last().unwrap();
        for c in &mut cum {
            *c /= total;
        }
        cum
    }
}

/// Draws `n` i.i.d. samples from the marginal via inverse-CDF.
pub fn sample_marginal(spec: &MarginalSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    use rand::SeedableRng;
    let table = match spec {
        MarginalSpec::Uniform01 => PiecewiseDensity::uniform01(),
        MarginalSpec::Sf => PiecewiseDensity::sf(),
        MarginalSpec::Table(t) => {
            // Re-validate in case the table was constructed by hand.
            PiecewiseDensity::new(t.breaks.clone(), t.densities.clone())?
        }
    };
    let cumulative = table.cumulative();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| table.quantile(rng.random(), &cumulative))
        .collect())
}
