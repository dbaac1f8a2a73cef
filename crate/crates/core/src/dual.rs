//! Dual potentials and optimality certification.
//!
//! For any cost of the form `C(xyz)` with `t C'(t)` strictly increasing on
//! [0, 1], the common shape of the dual potential is
//!
//! ```text
//! fhat(s) = \int_0^s partner_product(t) * C'(t * partner_product(t)) dt
//! ```
//!
//! and any offsets `(C_x, C_y, C_z)` summing to `C(0) - 2 fhat(1)` make
//! `(fhat + C_x, fhat + C_y, fhat + C_z)` feasible for the dual problem,
//! with equality exactly on the support. For the cost `xyz` itself the
//! potential also has a piecewise closed form, [`explicit_potential`],
//! which the quadrature route is checked against.
//!
//! The primal value generalizes along the same decomposition that gives the
//! closed form for cost `xyz`: the segments contribute
//! `3 \int_0^l C(t (1-2t)^2) dt` and the surface contributes `C(c)(r - l)`.

use crate::constants::ModelConstants;
use crate::error::{Error, Result};
use crate::quad;
use crate::support::partner_product;

/// A cost profile `C` with its derivative, defining the cost `C(xyz)`.
pub struct CostProfile {
    name: String,
    eval: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    deriv: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CostProfile {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CostProfile {
            name: name.into(),
            eval: Box::new(eval),
            deriv: Box::new(deriv),
        }
    }

    /// `C(t) = t`, the cost `xyz` itself.
    pub fn identity() -> Self {
        CostProfile::new("identity", |t| t, |_| 1.0)
    }

    /// `C(t) = t^2`; admissible since `t C' = 2t^2` strictly increases.
    pub fn square() -> Self {
        CostProfile::new("square", |t| t * t, |t| 2.0 * t)
    }

    /// `C(t) = e^t`; admissible since `t e^t` strictly increases on [0, 1].
    pub fn exp() -> Self {
        CostProfile::new("exp", f64::exp, f64::exp)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::identity()),
            "square" => Some(Self::square()),
            "exp" => Some(Self::exp()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.deriv)(t)
    }

    /// Cost of a cube point: `C(xyz)`.
    pub fn cost(&self, p: [f64; 3]) -> f64 {
        self.evaluate(p[0] * p[1] * p[2])
    }
}

/// Checks the admissibility conditions on a grid: `t C'(t)` strictly
/// increasing on [0, 1], and the stated derivative consistent with central
/// finite differences of `C`. Reports the first violation found.
pub fn validate_cost_profile(cost: &CostProfile) -> Result<()> {
    let grid = 1000;
    let mut prev_t = 0.0;
    let mut prev_u = 0.0 * cost.derivative(0.0);
    for i in 1..=grid {
        let t = i as f64 / grid as f64;
        let u = t * cost.derivative(t);
        if u <= prev_u {
            return Err(Error::InvalidCost(format!(
                "t*C'(t) is not strictly increasing: u({prev_t}) = {prev_u}, u({t}) = {u}"
            )));
        }
        prev_t = t;
        prev_u = u;
    }

    let h = 1e-6;
    for i in 1..grid {
        let t = i as f64 / grid as f64;
        let fd = (cost.evaluate(t + h) - cost.evaluate(t - h)) / (2.0 * h);
        let stated = cost.derivative(t);
        if (fd - stated).abs() > 1e-6 * stated.abs().max(1.0) {
            return Err(Error::InvalidCost(format!(
                "derivative mismatch at t = {t}: finite difference {fd}, stated {stated}"
            )));
        }
    }
    Ok(())
}

fn potential_integrand(t: f64, cost: &CostProfile, k: &ModelConstants) -> f64 {
    let lam = partner_product(t, k).expect("integration stays inside [0, 1]");
    lam * cost.derivative(t * lam)
}

/// The common potential shape `fhat(s)` by adaptive quadrature, with panel
/// breaks forced at the kinks `l` and `r` of the profile.
pub fn potential(s: f64, cost: &CostProfile, k: &ModelConstants) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain {
            name: "s",
            value: s,
            domain: "[0, 1]",
        });
    }
    quad::integrate_with_breakpoints(
        |t| potential_integrand(t, cost, k),
        0.0,
        s,
        &[k.l, k.r],
        1e-10,
    )
}

/// Piecewise closed form of the dual potential for the cost `xyz`,
/// continuously differentiable with derivative equal to
/// [`partner_product`]. Normalized so that `f(0) + 2 f(1) = 0`.
pub fn explicit_potential(x: f64, k: &ModelConstants) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    let c = k.c;
    let shift = (c * c.ln() - c) / 3.0;
    Ok(if x <= k.l {
        let cube = |v: f64| v * v * v;
        c * k.l.ln() - shift + (cube(2.0 * x - 1.0) - cube(2.0 * k.l - 1.0)) / 6.0
    } else if x <= k.r {
        c * x.ln() - shift
    } else {
        c * k.r.ln() - shift + (x * x - k.r * k.r) / 4.0 - (x * x * x - k.r * k.r * k.r) / 6.0
    })
}

/// Dense cumulative representation of `fhat`, so that pointwise evaluations
/// cost one Gauss-Kronrod panel instead of a full adaptive integration.
struct PotentialTable {
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

const TABLE_STEPS_PER_PIECE: usize = 512;

impl PotentialTable {
    fn build(cost: &CostProfile, k: &ModelConstants) -> Result<Self> {
        let mut knots = Vec::new();
        for piece in [(0.0, k.l), (k.l, k.r), (k.r, 1.0)] {
            for i in 0..TABLE_STEPS_PER_PIECE {
                let t = piece.0 + (piece.1 - piece.0) * i as f64 / TABLE_STEPS_PER_PIECE as f64;
                knots.push(t);
            }
        }
        knots.push(1.0);

        let mut cumulative = Vec::with_capacity(knots.len());
        cumulative.push(0.0);
        for w in knots.windows(2) {
            let inc = quad::integrate(|t| potential_integrand(t, cost, k), w[0], w[1], 1e-14)?;
            let prev = *cumulative.last().unwrap();
            cumulative.push(prev + inc);
        }
        Ok(PotentialTable { knots, cumulative })
    }

    fn eval(&self, s: f64, cost: &CostProfile, k: &ModelConstants) -> f64 {
        let idx = self.knots.partition_point(|&t| t <= s).saturating_sub(1);
        let base = self.cumulative[idx];
        let a = self.knots[idx];
        if a == s {
            return base;
        }
        // One non-adaptive panel over the short remainder, which never
        // straddles a kink because l and r are knots.
        base + quad::integrate(|t| potential_integrand(t, cost, k), a, s, 1.0)
            .expect("single panel cannot fail")
    }

    fn at_one(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }
}

/// How the constant `C(0) - 2 fhat(1)` is split between the three axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetSplit {
    /// Equal thirds on every axis (the canonical choice).
    Symmetric,
    /// Explicit offsets; their sum is validated at construction.
    Explicit([f64; 3]),
}

/// A feasible dual triple: the common potential shape plus per-axis
/// offsets summing to `C(0) - 2 fhat(1)`.
pub struct DualTriple {
    cost: CostProfile,
    k: ModelConstants,
    table: PotentialTable,
    offsets: [f64; 3],
    dual_value: f64,
}

impl DualTriple {
    pub fn new(cost: CostProfile, k: &ModelConstants, split: OffsetSplit) -> Result<Self> {
        validate_cost_profile(&cost)?;
        let table = PotentialTable::build(&cost, k)?;
        let offset_sum = cost.evaluate(0.0) - 2.0 * table.at_one();
        let offsets = match split {
            OffsetSplit::Symmetric => [offset_sum / 3.0; 3],
            OffsetSplit::Explicit(offs) => {
                let got: f64 = offs.iter().sum();
                if (got - offset_sum).abs() > 1e-9 {
                    return Err(Error::InvalidCost(format!(
                        "offsets sum to {got}, expected {offset_sum}"
                    )));
                }
                offs
            }
        };

        // Dual objective 3 \int_0^1 fhat + sum of offsets, collapsed by
        // Fubini to a single integral of (1 - 3u) * fhat'(u).
        let dual_value = quad::integrate_with_breakpoints(
            |u| (1.0 - 3.0 * u) * potential_integrand(u, &cost, k),
            0.0,
            1.0,
            &[k.l, k.r],
            1e-12,
        )? + cost.evaluate(0.0);

        Ok(DualTriple {
            cost,
            k: *k,
            table,
            offsets,
            dual_value,
        })
    }

    pub fn symmetric(cost: CostProfile, k: &ModelConstants) -> Result<Self> {
        Self::new(cost, k, OffsetSplit::Symmetric)
    }

    pub fn cost_profile(&self) -> &CostProfile {
        &self.cost
    }

    pub fn offsets(&self) -> [f64; 3] {
        self.offsets
    }

    /// The common shape `fhat(s)`, via the dense table.
    pub fn potential(&self, s: f64) -> f64 {
        self.table.eval(s, &self.cost, &self.k)
    }

    /// Value of the dual objective `3 \int fhat + (C_x + C_y + C_z)`.
    pub fn value(&self) -> f64 {
        self.dual_value
    }

    /// Slack of the dual constraint at a cube point:
    /// `C(xyz) - sum_i (fhat(x_i) + C_i)`. Nonnegative everywhere (up to
    /// roundoff -1e-10), and at most 1e-8 on the support.
    pub fn feasibility_margin(&self, x: f64, y: f64, z: f64) -> f64 {
        let potentials = self.potential(x) + self.potential(y) + self.potential(z);
        self.cost.evaluate(x * y * z) - (potentials + self.offsets.iter().sum::<f64>())
    }
}

/// Primal transport cost of the explicit coupling under profile `C`:
/// segment part by quadrature, surface part `C(c) (r - l)` exactly.
pub fn primal_cost(cost: &CostProfile, k: &ModelConstants) -> Result<f64> {
    let seg = quad::integrate(
        |t| cost.evaluate(t * (1.0 - 2.0 * t) * (1.0 - 2.0 * t)),
        0.0,
        k.l,
        1e-12,
    )?;
    Ok(3.0 * seg + cost.evaluate(k.c) * (k.r - k.l))
}

/// Value of the dual objective for `cost` with any valid offset split.
pub fn dual_value(cost: CostProfile, k: &ModelConstants) -> Result<f64> {
    Ok(DualTriple::symmetric(cost, k)?.value())
}

/// Absolute difference between the primal cost and the dual objective;
/// both certify optimality when it vanishes.
pub fn duality_gap(cost: CostProfile, k: &ModelConstants) -> Result<f64> {
    let primal = primal_cost(&cost, k)?;
    let dual = dual_value(cost, k)?;
    Ok((primal - dual).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::solve_constants;
    use crate::primal::{estimate_cost, sample_primal};
    use crate::support::{ascend_to_support, segment_point, support_residual, surface_point, Axis};
    use rand::Rng;
    use rand::SeedableRng;

    fn k() -> ModelConstants {
        solve_constants(1e-14).unwrap()
    }

    #[test]
    fn potential_vanishes_at_zero() {
        let k = k();
        assert_eq!(potential(0.0, &CostProfile::identity(), &k).unwrap(), 0.0);
    }

    #[test]
    fn potential_matches_explicit_form_for_identity_cost() {
        let k = k();
        let cost = CostProfile::identity();
        let base = explicit_potential(0.0, &k).unwrap();
        let full = potential(1.0, &cost, &k).unwrap();
        let explicit_span = explicit_potential(1.0, &k).unwrap() - base;
        assert!((full - explicit_span).abs() < 1e-8);
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let via_quad = potential(s, &cost, &k).unwrap();
            let via_explicit = explicit_potential(s, &k).unwrap() - base;
            assert!(
                (via_quad - via_explicit).abs() < 1e-8,
                "s = {s}: {via_quad} vs {via_explicit}"
            );
        }
    }

    #[test]
    fn potential_nondecreasing_for_nonnegative_derivative_costs() {
        let k = k();
        for cost in [CostProfile::identity(), CostProfile::exp()] {
            let mut prev = 0.0;
            for i in 1..=50 {
                let s = i as f64 / 50.0;
                let v = potential(s, &cost, &k).unwrap();
                assert!(v >= prev - 1e-12, "{} decreasing at {s}", cost.name());
                prev = v;
            }
        }
    }

    #[test]
    fn explicit_potential_is_continuous_at_breakpoints() {
        let k = k();
        for bp in [k.l, k.r] {
            let left = explicit_potential(bp - 1e-13, &k).unwrap();
            let at = explicit_potential(bp, &k).unwrap();
            let right = explicit_potential(bp + 1e-13, &k).unwrap();
            assert!((left - at).abs() < 1e-12);
            assert!((right - at).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_potential_derivative_is_support_profile() {
        let k = k();
        let h = 1e-6;
        for i in 1..1000 {
            let x = i as f64 / 1000.0;
            if (x - k.l).abs() < 1e-4 || (x - k.r).abs() < 1e-4 || x + h > 1.0 {
                continue;
            }
            let fd = (explicit_potential(x + h, &k).unwrap()
                - explicit_potential(x - h, &k).unwrap())
                / (2.0 * h);
            let lam = partner_product(x, &k).unwrap();
            assert!((fd - lam).abs() < 1e-6, "x = {x}: {fd} vs {lam}");
        }
    }

    #[test]
    fn explicit_potential_normalization() {
        // f(0) + 2 f(1) = 0: the equality of the dual constraint at the
        // support point (0, 1, 1).
        let k = k();
        let f0 = explicit_potential(0.0, &k).unwrap();
        let f1 = explicit_potential(1.0, &k).unwrap();
        assert!((f0 + 2.0 * f1).abs() < 1e-10, "{:e}", f0 + 2.0 * f1);
    }

    #[test]
    fn dual_triple_offsets_sum_to_the_required_constant() {
        let k = k();
        let triple = DualTriple::symmetric(CostProfile::identity(), &k).unwrap();
        let expected = -2.0 * potential(1.0, &CostProfile::identity(), &k).unwrap();
        let got: f64 = triple.offsets().iter().sum();
        assert!((got - expected).abs() < 1e-9);

        // An explicit split with the right sum is accepted, a wrong one is
        // rejected.
        let offs = [expected, 0.0, 0.0];
        assert!(DualTriple::new(CostProfile::identity(), &k, OffsetSplit::Explicit(offs)).is_ok());
        assert!(DualTriple::new(
            CostProfile::identity(),
            &k,
            OffsetSplit::Explicit([0.1, 0.0, 0.0])
        )
        .is_err());
    }

    #[test]
    fn margin_zero_at_corner_support_point() {
        let k = k();
        let triple = DualTriple::symmetric(CostProfile::identity(), &k).unwrap();
        let m = triple.feasibility_margin(0.0, 1.0, 1.0);
        assert!(m.abs() < 1e-10, "margin {m:e}");
    }

    #[test]
    fn margin_positive_off_support() {
        let k = k();
        let triple = DualTriple::symmetric(CostProfile::identity(), &k).unwrap();
        assert!(triple.feasibility_margin(1.0, 1.0, 1.0) > 1e-3);
    }

    #[test]
    fn margin_nonnegative_on_random_sweep() {
        let k = k();
        let triple = DualTriple::symmetric(CostProfile::identity(), &k).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut min_margin = f64::MAX;
        for _ in 0..20_000 {
            let m = triple.feasibility_margin(rng.random(), rng.random(), rng.random());
            min_margin = min_margin.min(m);
        }
        assert!(min_margin >= -1e-10, "min margin {min_margin:e}");
    }

    #[test]
    fn margin_vanishes_on_support_points() {
        let k = k();
        let triple = DualTriple::symmetric(CostProfile::identity(), &k).unwrap();
        for i in 0..=500 {
            let t = k.l * i as f64 / 500.0;
            for axis in Axis::ALL {
                let p = segment_point(axis, t, &k).unwrap();
                let m = triple.feasibility_margin(p[0], p[1], p[2]);
                assert!(m.abs() <= 1e-8, "segment {axis:?} t={t}: {m:e}");
            }
        }
        for i in 0..=30 {
            for j in 0..=30 {
                let x = k.l + (k.r - k.l) * i as f64 / 30.0;
                let y = k.l + (k.r - k.l) * j as f64 / 30.0;
                if let Some(p) = surface_point(x, y, &k) {
                    let m = triple.feasibility_margin(p[0], p[1], p[2]);
                    assert!(m.abs() <= 1e-8, "surface ({x}, {y}): {m:e}");
                }
            }
        }
    }

    #[test]
    fn duality_gap_closes_for_admissible_costs() {
        let k = k();
        assert!(duality_gap(CostProfile::identity(), &k).unwrap() < 1e-8);
        assert!(duality_gap(CostProfile::square(), &k).unwrap() < 1e-8);
        assert!(duality_gap(CostProfile::exp(), &k).unwrap() < 1e-8);
    }

    #[test]
    fn dual_value_for_identity_is_the_primal_constant() {
        let k = k();
        let dv = dual_value(CostProfile::identity(), &k).unwrap();
        assert!(
            (dv - k.primal_value).abs() < 1e-8,
            "{dv} vs {}",
            k.primal_value
        );
    }

    #[test]
    fn validation_accepts_and_rejects() {
        assert!(validate_cost_profile(&CostProfile::identity()).is_ok());
        assert!(validate_cost_profile(&CostProfile::exp()).is_ok());
        let bad = CostProfile::new("negated", |t| -t, |_| -1.0);
        assert!(validate_cost_profile(&bad).is_err());
        let lying = CostProfile::new("lying-derivative", |t| t, |_| 2.0);
        assert!(validate_cost_profile(&lying).is_err());
    }

    #[test]
    fn weak_duality_sandwich_against_sampled_cloud() {
        let k = k();
        let cloud = sample_primal(20_000, 99, &k).unwrap();
        let (mean, se) = estimate_cost(&cloud).unwrap();
        let dv = dual_value(CostProfile::identity(), &k).unwrap();
        assert!(mean >= dv - 3.0 * se, "mean {mean}, dual {dv}, se {se}");
    }

    #[test]
    fn maximizing_the_dual_slack_lands_on_support() {
        // Stationary points of fhat(x) + fhat(y) + fhat(z) - C(xyz) satisfy
        // the support equalities for every admissible cost at once, so the
        // coordinate ascent is cost-independent.
        let k = k();
        let triple = DualTriple::symmetric(CostProfile::identity(), &k).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        for _ in 0..50 {
            let start = [rng.random(), rng.random(), rng.random()];
            let end = ascend_to_support(start, &k, 500);
            let res = support_residual(end[0], end[1], end[2], &k).unwrap();
            assert!(res.max_residual <= 1e-6, "start {start:?} -> {end:?}");
            let objective = |p: [f64; 3]| -triple.feasibility_margin(p[0], p[1], p[2]);
            assert!(objective(end) >= objective(start) - 1e-12);
        }
    }
}
