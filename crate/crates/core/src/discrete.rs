//! The integer triple-partition problem and its link to the continuous
//! transport optimum.
//!
//! Three copies of {1..n} are divided into n triples (a, b, c); the goal is
//! to minimize the sum of the products abc. The minimum grows like the
//! optimal transport cost times n^4, and a near-optimal partition can be
//! assembled constructively from the continuous solution: estimate the
//! solution's mass in every cell of an n^3 grid, round the masses to
//! integer multiples of 1/(nm) with exact fiber sums, and expand each cell
//! into consecutive integer labels.

use crate::constants::ModelConstants;
use crate::error::{Error, Result};
use crate::heuristic::{run_sorting, CouplingState};
use crate::primal::sample_primal;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Largest size accepted by the exhaustive enumeration ((7!)^2 ~ 2.5e7).
pub const BRUTE_FORCE_LIMIT: usize = 7;

/// A partition of three copies of {1..n} into n integer triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePartition {
    pub n: usize,
    pub triples: Vec<[u32; 3]>,
}

impl TriplePartition {
    pub fn new(n: usize, triples: Vec<[u32; 3]>) -> Result<Self> {
        let p = TriplePartition { n, triples };
        p.validate()?;
        Ok(p)
    }

    /// Checks that each axis uses every value of {1..n} exactly once.
    pub fn validate(&self) -> Result<()> {
        if self.triples.len() != self.n {
            return Err(Error::InvalidPartition(format!(
                "{} triples for n = {}",
                self.triples.len(),
                self.n
            )));
        }
        for axis in 0..3 {
            let mut seen = vec![false; self.n];
            for t in &self.triples {
                let v = t[axis] as usize;
                if v < 1 || v > self.n || seen[v - 1] {
                    return Err(Error::InvalidPartition(format!(
                        "axis {axis} does not form the set 1..={} (offender {v})",
                        self.n
                    )));
                }
                seen[v - 1] = true;
            }
        }
        Ok(())
    }

    /// Total cost: the sum of the products abc over the triples.
    pub fn cost(&self) -> Result<u64> {
        self.validate()?;
        Ok(self
            .triples
            .iter()
            .map(|t| t[0] as u64 * t[1] as u64 * t[2] as u64)
            .sum())
    }
}

/// Spec-level alias for [`TriplePartition::cost`].
pub fn partition_cost(p: &TriplePartition) -> Result<u64> {
    p.cost()
}

fn lexicographic_permutations(n: usize) -> Vec<Vec<u32>> {
    let mut current: Vec<u32> = (1..=n as u32).collect();
    let mut out = vec![current.clone()];
    // Standard next-permutation loop; emits in lexicographic order.
    while let Some(i) = (0..n.saturating_sub(1))
        .rev()
        .find(|&i| current[i] < current[i + 1])
    {
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
        out.push(current.clone());
    }
    out
}

/// Exact minimum over all partitions, by enumerating the second and third
/// axes over all (n!)^2 permutation pairs with the first axis fixed to
/// identity (partition cost is invariant under reordering the triples).
/// Ties resolve to the lexicographically smallest permutation pair.
pub fn brute_force_min(n: usize) -> Result<(u64, TriplePartition)> {
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            value: 0.0,
            domain: "[1, 7]",
        });
    }
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            requested: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let perms = lexicographic_permutations(n);
    let best = (0..perms.len())
        .into_par_iter()
        .map(|si| {
            let sigma = &perms[si];
            let mut local = (u64::MAX, 0usize, 0usize);
            for (ti, tau) in perms.iter().enumerate() {
                let cost: u64 = (0..n)
                    .map(|i| (i as u64 + 1) * sigma[i] as u64 * tau[i] as u64)
                    .sum();
                if cost < local.0 {
                    local = (cost, si, ti);
                }
            }
            local
        })
        .reduce(|| (u64::MAX, 0, 0), std::cmp::min);

    let (cost, si, ti) = best;
    let triples: Vec<[u32; 3]> = (0..n)
        .map(|i| [i as u32 + 1, perms[si][i], perms[ti][i]])
        .collect();
    Ok((cost, TriplePartition::new(n, triples)?))
}

/// Sorting-heuristic minimum: starts from three independent random
/// permutations of {1..n} and monotonizes with the sorting pass, keeping
/// the best result over `restarts` restarts.
pub fn heuristic_min(n: usize, restarts: usize, seed: u64) -> Result<(u64, TriplePartition)> {
    if n == 0 || restarts == 0 {
        return Err(Error::Domain {
            name: if n == 0 { "n" } else { "restarts" },
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut best: Option<(u64, TriplePartition)> = None;
    for _ in 0..restarts {
        let mut axes: [Vec<u32>; 3] = Default::default();
        for axis in &mut axes {
            let mut vals: Vec<u32> = (1..=n as u32).collect();
            vals.shuffle(&mut rng);
            *axis = vals;
        }
        let triples: Vec<[f64; 3]> = (0..n)
            .map(|i| [axes[0][i] as f64, axes[1][i] as f64, axes[2][i] as f64])
            .collect();
        let out = run_sorting(CouplingState::new(triples), 400);
        let ints: Vec<[u32; 3]> = out
            .triples
            .iter()
            .map(|t| [t[0] as u32, t[1] as u32, t[2] as u32])
            .collect();
        let partition = TriplePartition::new(n, ints)?;
        let cost = partition.cost()?;
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, partition));
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Monte Carlo cell masses of the explicit coupling on an n^3 grid.
#[derive(Debug, Clone)]
pub struct BoxMasses {
    pub n: usize,
    /// Row-major (i, j, k), all zero-based; sums to 1 exactly.
    pub rho: Vec<f64>,
}

impl BoxMasses {
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.rho[self.idx(i, j, k)]
    }

    /// Sum over the fiber with the `axis`-th index fixed to `index`.
    pub fn fiber_sum(&self, axis: usize, index: usize) -> f64 {
        let mut sum = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                let (i, j, k) = match axis {
                    0 => (index, a, b),
                    1 => (a, index, b),
                    _ => (a, b, index),
                };
                sum += self.get(i, j, k);
            }
        }
        sum
    }
}

fn grid_bin(x: f64, n: usize) -> usize {
    ((x * n as f64).ceil() as usize).clamp(1, n) - 1
}

/// Estimates the coupling's mass in each half-open grid cell
/// ((i-1)/n, i/n] x ... from `samples` draws of the sampler.
pub fn box_masses(n: usize, samples: usize, seed: u64, k: &ModelConstants) -> Result<BoxMasses> {
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    if samples < 10_000 {
        return Err(Error::Domain {
            name: "samples",
            value: samples as f64,
            domain: "[1e4, inf)",
        });
    }
    let cloud = sample_primal(samples, seed, k)?;
    let mut counts = vec![0u64; n * n * n];
    for p in &cloud.points {
        let i = grid_bin(p[0], n);
        let j = grid_bin(p[1], n);
        let kk = grid_bin(p[2], n);
        counts[(i * n + j) * n + kk] += 1;
    }
    let total = samples as f64;
    Ok(BoxMasses {
        n,
        rho: counts.iter().map(|&c| c as f64 / total).collect(),
    })
}

/// Nonnegative integer cell counts with every axis fiber summing to `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxCounts {
    pub n: usize,
    pub m: usize,
    /// Row-major (i, j, k), zero-based.
    pub counts: Vec<u32>,
}

impl BoxCounts {
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u32 {
        self.counts[self.idx(i, j, k)]
    }

    pub fn fiber_sum(&self, axis: usize, index: usize) -> u64 {
        let mut sum = 0u64;
        for a in 0..self.n {
            for b in 0..self.n {
                let (i, j, k) = match axis {
                    0 => (index, a, b),
                    1 => (a, index, b),
                    _ => (a, b, index),
                };
                sum += self.get(i, j, k) as u64;
            }
        }
        sum
    }

    /// Verifies all 3n fiber constraints.
    pub fn validate_fibers(&self) -> Result<()> {
        for axis in 0..3 {
            for index in 0..self.n {
                let got = self.fiber_sum(axis, index);
                if got != self.m as u64 {
                    return Err(Error::FiberRepair {
                        axis,
                        index,
                        got: got as i64,
                        want: self.m as i64,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Rounds cell masses to integer counts `t` with every axis fiber summing
/// exactly to `m`, heuristically minimizing the total deviation
/// `sum |t/(nm) - rho|`.
///
/// Proportional fiber scaling first pushes every fiber mass to 1/n, so
/// flooring `nm * rho` can never overfill a fiber; the missing units are
/// then granted one at a time to the cell with the largest remaining
/// fractional residual among cells whose three fibers still have room.
/// Deterministic: ties break lexicographically.
pub fn integerize(masses: &BoxMasses, m: usize) -> Result<BoxCounts> {
    if m == 0 {
        return Err(Error::Domain {
            name: "m",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let n = masses.n;
    let cells = n * n * n;
    if masses.rho.len() != cells {
        return Err(Error::InvalidTable(format!(
            "expected {cells} cells, got {}",
            masses.rho.len()
        )));
    }
    if masses.rho.iter().any(|&r| !r.is_finite() || r < 0.0) {
        return Err(Error::InvalidTable(
            "cell masses must be finite and >= 0".into(),
        ));
    }
    let total: f64 = masses.rho.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidTable("total mass is zero".into()));
    }

    let mut work: Vec<f64> = masses.rho.iter().map(|&r| r / total).collect();
    let flat = |i: usize, j: usize, k: usize| (i * n + j) * n + k;

    // Iterative proportional scaling of the three fiber families.
    let target = 1.0 / n as f64;
    for _ in 0..200 {
        let mut worst = 0.0f64;
        for axis in 0..3 {
            for index in 0..n {
                let mut sum = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let (i, j, k) = match axis {
                            0 => (index, a, b),
                            1 => (a, index, b),
                            _ => (a, b, index),
                        };
                        sum += work[flat(i, j, k)];
                    }
                }
                if sum > 0.0 {
                    let scale = target / sum;
                    worst = worst.max((scale - 1.0).abs());
                    for a in 0..n {
                        for b in 0..n {
                            let (i, j, k) = match axis {
                                0 => (index, a, b),
                                1 => (a, index, b),
                                _ => (a, b, index),
                            };
                            work[flat(i, j, k)] *= scale;
                        }
                    }
                }
            }
        }
        if worst < 1e-13 {
            break;
        }
    }

    let nm = (n * m) as f64;
    let mut t: Vec<i64> = work.iter().map(|&w| (nm * w).floor() as i64).collect();

    let fiber_cells = |axis: usize, index: usize| -> Vec<usize> {
        let mut v = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let (i, j, k) = match axis {
                    0 => (index, a, b),
                    1 => (a, index, b),
                    _ => (a, b, index),
                };
                v.push(flat(i, j, k));
            }
        }
        v
    };

    // Trim overfull fibers (only reachable with degenerate inputs the
    // scaling could not balance), within a bounded budget.
    let mut budget = 10 * n * m + 100;
    loop {
        let mut overfull = None;
        'search: for axis in 0..3 {
            for index in 0..n {
                let sum: i64 = fiber_cells(axis, index).iter().map(|&c| t[c]).sum();
                if sum > m as i64 {
                    overfull = Some((axis, index, sum));
                    break 'search;
                }
            }
        }
        let Some((axis, index, sum)) = overfull else {
            break;
        };
        if budget == 0 {
            return Err(Error::FiberRepair {
                axis,
                index,
                got: sum,
                want: m as i64,
            });
        }
        budget -= 1;
        // Remove a unit from the cell that keeps the most of its mass.
        let cell = fiber_cells(axis, index)
            .into_iter()
            .filter(|&c| t[c] > 0)
            .min_by(|&a, &b| {
                let ra = nm * work[a] - t[a] as f64;
                let rb = nm * work[b] - t[b] as f64;
                ra.total_cmp(&rb).then(a.cmp(&b))
            })
            .expect("overfull fiber has a positive cell");
        t[cell] -= 1;
    }

    // Grant the missing units to the largest residuals among cells whose
    // three fibers still have room. A cell with all three fibers open
    // always exists while units remain.
    let mut rem = [vec![0i64; n], vec![0i64; n], vec![0i64; n]];
    for (axis, rem_axis) in rem.iter_mut().enumerate() {
        for (index, slot) in rem_axis.iter_mut().enumerate() {
            let sum: i64 = fiber_cells(axis, index).iter().map(|&c| t[c]).sum();
            *slot = m as i64 - sum;
        }
    }
    let assigned: i64 = t.iter().sum();
    let mut units = (n * m) as i64 - assigned;
    while units > 0 {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if rem[0][i] <= 0 {
                continue;
            }
            for j in 0..n {
                if rem[1][j] <= 0 {
                    continue;
                }
                for k in 0..n {
                    if rem[2][k] <= 0 {
                        continue;
                    }
                    let cell = flat(i, j, k);
                    let residual = nm * work[cell] - t[cell] as f64;
                    if best.is_none_or(|(r, _)| residual > r) {
                        best = Some((residual, cell));
                    }
                }
            }
        }
        let Some((_, cell)) = best else {
            return Err(Error::FiberRepair {
                axis: 0,
                index: 0,
                got: assigned,
                want: (n * m) as i64,
            });
        };
        t[cell] += 1;
        let i = cell / (n * n);
        let j = (cell / n) % n;
        let k = cell % n;
        rem[0][i] -= 1;
        rem[1][j] -= 1;
        rem[2][k] -= 1;
        units -= 1;
    }

    let out = BoxCounts {
        n,
        m,
        counts: t.iter().map(|&v| v as u32).collect(),
    };
    out.validate_fibers()?;
    Ok(out)
}

/// Expands integer cell counts into a partition of {1..nm}: on every axis,
/// block `i` owns the labels (i*m, (i+1)*m], handed out to the cells
/// (i, j, k) in lexicographic order of the remaining indices; the three
/// per-cell label lists are then zipped into triples.
///
/// Every triple built from cell (i, j, k) therefore satisfies
/// `ceil(a/m) = i+1`, `ceil(b/m) = j+1`, `ceil(c/m) = k+1`.
pub fn build_partition(counts: &BoxCounts) -> Result<TriplePartition> {
    counts.validate_fibers()?;
    let n = counts.n;
    let m = counts.m;
    let cells = n * n * n;
    let mut labels = [
        vec![Vec::<u32>::new(); cells],
        vec![Vec::<u32>::new(); cells],
        vec![Vec::<u32>::new(); cells],
    ];

    for (axis, store) in labels.iter_mut().enumerate() {
        for block in 0..n {
            let mut next = (block * m) as u32 + 1;
            for a in 0..n {
                for b in 0..n {
                    let (i, j, k) = match axis {
                        0 => (block, a, b),
                        1 => (a, block, b),
                        _ => (a, b, block),
                    };
                    let cell = counts.idx(i, j, k);
                    for _ in 0..counts.get(i, j, k) {
                        store[cell].push(next);
                        next += 1;
                    }
                }
            }
        }
    }

    let mut triples = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let cell = counts.idx(i, j, k);
                for t in 0..counts.get(i, j, k) as usize {
                    triples.push([labels[0][cell][t], labels[1][cell][t], labels[2][cell][t]]);
                }
            }
        }
    }
    TriplePartition::new(n * m, triples)
}

/// Checks the generalized rearrangement inequality on one instance:
/// with every sequence sorted ascending, aligning them identically can
/// only increase the sum of products relative to any other alignment.
/// Returns whether `V(identity) >= V(perms)`; `false` would be a
/// counterexample.
pub fn rearrangement_check(sequences: &[Vec<f64>], perms: &[Vec<usize>]) -> Result<bool> {
    if sequences.len() != perms.len() {
        return Err(Error::LengthMismatch(sequences.len(), perms.len()));
    }
    let s = sequences.len();
    if s == 0 {
        return Ok(true);
    }
    let n = sequences[0].len();
    for seq in sequences {
        if seq.len() != n {
            return Err(Error::LengthMismatch(n, seq.len()));
        }
        debug_assert!(
            seq.windows(2).all(|w| w[0] <= w[1]),
            "sequences must be sorted ascending"
        );
    }
    for perm in perms {
        if perm.len() != n {
            return Err(Error::LengthMismatch(n, perm.len()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidTable(format!("not a permutation of 0..{n}")));
            }
            seen[p] = true;
        }
    }

    let identity: f64 = (0..n)
        .map(|k| sequences.iter().map(|seq| seq[k]).product::<f64>())
        .sum();
    let permuted: f64 = (0..n)
        .map(|k| {
            sequences
                .iter()
                .zip(perms)
                .map(|(seq, perm)| seq[perm[k]])
                .product::<f64>()
        })
        .sum();
    Ok(identity >= permuted - 1e-12 * identity.abs().max(1.0))
}
