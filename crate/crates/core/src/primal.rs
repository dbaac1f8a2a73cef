//! The explicit measure whose three axis projections are all uniform and
//! whose support is the set described in [`crate::support`].
//!
//! The measure has three parts:
//!
//! * three segment components of mass `l` each, uniform along the segments;
//! * a "layered" component on the triangle `u + v + w = 2` whose density
//!   depends only on the distance to the nearest side, generated by a
//!   one-dimensional density `p` on [0, 1/3];
//! * a "median" component on the three segments joining the triangle's
//!   vertices to its center, generated by a density `q` on [0, 2/3].
//!
//! Triangle coordinates map to the cube through `x = l * alpha^u`, which
//! turns the exponential projection density `f(u) = s * alpha^u` (with
//! `s = l ln alpha`) into the uniform density on `[l, r]`.
//!
//! `p` is the solution of the first-order linear ODE
//! `4(f(2x) - 2P(x)) = f(1-x) - (1-3x) p(x) - 2P(x)`, `P = \int_0^x p`,
//! which makes the layered and median projections sum to `f` exactly. All
//! integrals are evaluated in closed form (the integrands are polynomials
//! times exponentials); near the removable singularity at `x = 1/3` both
//! `p` and `P` switch to a truncated power series.

use crate::constants::ModelConstants;
use crate::error::{Error, Result};
use crate::quad;
use crate::support::{segment_point, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Half-width of the series window around the pole at 1/3.
const SERIES_BAND: f64 = 1e-2;
/// Number of retained series terms (degree in `t = x - 1/3`).
const SERIES_TERMS: usize = 11;

/// The one-dimensional densities generating the triangle components.
#[derive(Debug, Clone)]
pub struct TriangleDensities {
    k: ModelConstants,
    /// Scale of the projection density: `s = l ln alpha`.
    scale: f64,
    /// `ln alpha`.
    log_alpha: f64,
    /// `alpha^(2/3)`.
    alpha_two_thirds: f64,
    /// Closed-form value of `N(1/3)`, where
    /// `N(x) = \int_0^x (1-3t)(f(1-t) - 4f(2t)) dt`. Vanishes exactly when
    /// `alpha` satisfies the balance equation; with a solved root it is of
    /// order 1e-16 and is subtracted so that the singularity of
    /// `P = N / (1-3x)^2` at `x = 1/3` stays removable in floating point.
    n_at_third: f64,
    /// Power-series coefficients of the generator around `x = 1/3`.
    series: [f64; SERIES_TERMS],
    segment_mass: f64,
    layered_mass: f64,
    median_mass: f64,
}

impl TriangleDensities {
    pub fn new(k: &ModelConstants) -> Result<Self> {
        let log_alpha = k.alpha.ln();
        let scale = k.l * log_alpha;
        let alpha_two_thirds = (2.0 * log_alpha / 3.0).exp();

        // c_j = L^j ((-1)^j - 2^(j+2)) / j!   from expanding
        // f(1-x) - 4 f(2x) around x = 1/3.
        let mut series = [0.0; SERIES_TERMS];
        let mut factorial = 1.0;
        let mut sign = 1.0;
        let mut pow_l = 1.0;
        let mut pow_2 = 4.0;
        for (j, slot) in series.iter_mut().enumerate() {
            if j > 0 {
                factorial *= j as f64;
                sign = -sign;
                pow_l *= log_alpha;
                pow_2 *= 2.0;
            }
            *slot = pow_l * (sign - pow_2) / factorial;
        }

        let mut dens = TriangleDensities {
            k: *k,
            scale,
            log_alpha,
            alpha_two_thirds,
            n_at_third: 0.0,
            series,
            segment_mass: 3.0 * k.l,
            layered_mass: 0.0,
            median_mass: 0.0,
        };
        dens.n_at_third = dens.integral_closed(1.0 / 3.0);

        // Median mass by quadrature of q; the layered part gets the exact
        // complement so the three parts add to total mass 1.
        let q_total = quad::integrate(|t| dens.median(t).unwrap(), 0.0, 2.0 / 3.0, 1e-13)?;
        dens.median_mass = 3.0 * q_total;
        dens.layered_mass = (k.r - k.l) - dens.median_mass;
        Ok(dens)
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.k
    }

    /// `s = l ln alpha`, the scale making the triangle projection uniform
    /// after the exponential change of variables.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Projection target on the triangle: `f(u) = s * alpha^u`.
    pub fn axis_density(&self, u: f64) -> f64 {
        self.scale * (self.log_alpha * u).exp()
    }

    /// Derivative of the projection target, `f'(u) = ln(alpha) f(u)`.
    pub fn axis_density_derivative(&self, u: f64) -> f64 {
        self.log_alpha * self.axis_density(u)
    }

    /// Closed form of `N(x) = \int_0^x (1-3t)(f(1-t) - 4 f(2t)) dt`.
    fn integral_closed(&self, x: f64) -> f64 {
        let ll = self.log_alpha;
        let one_minus_3x = 1.0 - 3.0 * x;
        // \int_0^x (1-3t) e^{-L t} dt
        let a = (-ll * x).exp() * (-one_minus_3x / ll + 3.0 / (ll * ll))
            - (-1.0 / ll + 3.0 / (ll * ll));
        // \int_0^x (1-3t) e^{2L t} dt
        let b = (2.0 * ll * x).exp() * (one_minus_3x / (2.0 * ll) + 3.0 / (4.0 * ll * ll))
            - (1.0 / (2.0 * ll) + 3.0 / (4.0 * ll * ll));
        self.scale * (self.k.alpha * a - 4.0 * b)
    }

    /// Generator of the layered component on [0, 1/3].
    pub fn layered(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0 / 3.0 + 1e-12).contains(&x) {
            return Err(Error::Domain {
                name: "x",
                value: x,
                domain: "[0, 1/3]",
            });
        }
        let t = x - 1.0 / 3.0;
        if t.abs() < SERIES_BAND {
            let mut acc = 0.0;
            for j in (1..SERIES_TERMS).rev() {
                acc = acc * t + j as f64 * self.series[j] / (j as f64 + 2.0);
            }
            return Ok(-self.scale * self.alpha_two_thirds / 3.0 * acc);
        }
        let one_minus_3x = 1.0 - 3.0 * x;
        let g = self.axis_density(1.0 - x) - 4.0 * self.axis_density(2.0 * x);
        let n_reg = self.integral_closed(x) - self.n_at_third;
        Ok((one_minus_3x * one_minus_3x * g + 6.0 * n_reg) / one_minus_3x.powi(3))
    }

    /// Running integral of the layered generator, `P(x) = \int_0^x p`.
    pub fn layered_integral(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0 / 3.0 + 1e-12).contains(&x) {
            return Err(Error::Domain {
                name: "x",
                value: x,
                domain: "[0, 1/3]",
            });
        }
        let t = x - 1.0 / 3.0;
        if t.abs() < SERIES_BAND {
            let mut acc = 0.0;
            for j in (0..SERIES_TERMS).rev() {
                acc = acc * t + self.series[j] / (j as f64 + 2.0);
            }
            return Ok(-self.scale * self.alpha_two_thirds / 3.0 * acc);
        }
        let one_minus_3x = 1.0 - 3.0 * x;
        Ok((self.integral_closed(x) - self.n_at_third) / (one_minus_3x * one_minus_3x))
    }

    /// Generator of the median component on [0, 2/3]. Clamps float-level
    /// negatives at the vanishing endpoint `s = 2/3`.
    pub fn median(&self, s: f64) -> Result<f64> {
        if !(0.0..=2.0 / 3.0 + 1e-12).contains(&s) {
            return Err(Error::Domain {
                name: "s",
                value: s,
                domain: "[0, 2/3]",
            });
        }
        let raw = self.axis_density(s) - 2.0 * self.layered_integral(s / 2.0)?;
        if raw < 0.0 && raw > -1e-12 {
            return Ok(0.0);
        }
        Ok(raw)
    }

    /// Residual of the defining ODE at `x`; the construction is correct iff
    /// this vanishes identically on [0, 1/3).
    pub fn ode_residual(&self, x: f64) -> Result<f64> {
        let p = self.layered(x)?;
        let big_p = self.layered_integral(x)?;
        let lhs = 4.0 * (self.axis_density(2.0 * x) - 2.0 * big_p);
        let rhs = self.axis_density(1.0 - x) - (1.0 - 3.0 * x) * p - 2.0 * big_p;
        Ok(lhs - rhs)
    }

    /// Projection of the layered component onto one triangle coordinate.
    pub fn layered_projection(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0 + 1e-12).contains(&x) {
            return Err(Error::Domain {
                name: "x",
                value: x,
                domain: "[0, 1]",
            });
        }
        if x <= 2.0 / 3.0 {
            Ok(2.0 * self.layered_integral(x / 2.0)?)
        } else {
            let y = 1.0 - x;
            Ok((3.0 * x - 2.0) * self.layered(y)? + 2.0 * self.layered_integral(y)?)
        }
    }

    /// Projection of the median component onto one triangle coordinate.
    pub fn median_projection(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0 + 1e-12).contains(&x) {
            return Err(Error::Domain {
                name: "x",
                value: x,
                domain: "[0, 1]",
            });
        }
        if x <= 2.0 / 3.0 {
            self.median(x)
        } else {
            Ok(4.0 * self.median(2.0 - 2.0 * x)?)
        }
    }

    /// Mass of the three segment components together: `3l`.
    pub fn segment_mass(&self) -> f64 {
        self.segment_mass
    }

    /// Mass of the layered component.
    pub fn layered_mass(&self) -> f64 {
        self.layered_mass
    }

    /// Mass of the median component.
    pub fn median_mass(&self) -> f64 {
        self.median_mass
    }
}

/// Maps triangle coordinates `(u, v, w)` with `u + v + w = 2` to the cube:
/// `(l alpha^u, l alpha^v, l alpha^w)`. The image lies on the support
/// surface `xyz = c`.
pub fn triangle_to_cube(u: f64, v: f64, w: f64, k: &ModelConstants) -> Result<[f64; 3]> {
    let deviation = (u + v + w - 2.0).abs();
    if deviation >= 1e-9 {
        return Err(Error::BarycentricConstraint(deviation));
    }
    let log_alpha = k.alpha.ln();
    Ok([
        k.l * (log_alpha * u).exp(),
        k.l * (log_alpha * v).exp(),
        k.l * (log_alpha * w).exp(),
    ])
}

/// Which part of the measure a sample was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    SegmentX,
    SegmentY,
    SegmentZ,
    Layered,
    Median,
}

impl Component {
    pub fn label(&self) -> &'static str {
        match self {
            Component::SegmentX => "segment_x",
            Component::SegmentY => "segment_y",
            Component::SegmentZ => "segment_z",
            Component::Layered => "layered",
            Component::Median => "median",
        }
    }
}

/// Equal-weight samples of the measure, with per-point component tags.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub components: Vec<Component>,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Common weight of every sample.
    pub fn weight(&self) -> f64 {
        1.0 / self.points.len() as f64
    }
}

/// Seedable sampler of the measure. Builds its lookup tables once; sampling
/// afterwards is pure with respect to the passed seed.
pub struct PrimalSampler {
    dens: TriangleDensities,
    /// Rejection envelope: sup of the layered generator over [0, 1/3].
    layered_sup: f64,
    /// Cumulative distribution of the median generator on an equispaced
    /// knot grid over [0, 2/3], normalized to end at 1.
    median_cdf: Vec<f64>,
}

/// Number of knots of the median inverse-CDF table.
const MEDIAN_KNOTS: usize = 10_000;

impl PrimalSampler {
    pub fn new(k: &ModelConstants) -> Result<Self> {
        let dens = TriangleDensities::new(k)?;

        // Envelope: coarse grid scan, then golden-section refinement around
        // the best bracket, then a small safety factor.
        let grid = 10_000usize;
        let mut best_i = 0usize;
        let mut best = f64::MIN;
        for i in 0..=grid {
            let x = (i as f64 / grid as f64) / 3.0;
            let v = dens.layered(x)?;
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let lo = ((best_i.saturating_sub(1)) as f64 / grid as f64) / 3.0;
        let hi = ((best_i + 1).min(grid) as f64 / grid as f64) / 3.0;
        let refined = golden_section_max(|x| dens.layered(x).unwrap(), lo, hi);
        let layered_sup = best.max(refined) * (1.0 + 1e-9);

        // Median CDF knots: per-interval Simpson is far below the table's
        // own interpolation error.
        let mut median_cdf = Vec::with_capacity(MEDIAN_KNOTS + 1);
        median_cdf.push(0.0);
        let h = (2.0 / 3.0) / MEDIAN_KNOTS as f64;
        let mut acc = 0.0;
        let mut q_left = dens.median(0.0)?;
        for i in 0..MEDIAN_KNOTS {
            let a = i as f64 * h;
            let b = a + h;
            let q_mid = dens.median(a + 0.5 * h)?;
            let q_right = dens.median(b.min(2.0 / 3.0))?;
            acc += h / 6.0 * (q_left + 4.0 * q_mid + q_right);
            median_cdf.push(acc);
            q_left = q_right;
        }
        let total = *median_cdf.last().unwrap();
        for v in &mut median_cdf {
            *v /= total;
        }

        Ok(PrimalSampler {
            dens,
            layered_sup,
            median_cdf,
        })
    }

    pub fn densities(&self) -> &TriangleDensities {
        &self.dens
    }

    /// Draws `n` i.i.d. samples of the measure.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        if n == 0 {
            return Err(Error::Domain {
                name: "n",
                value: 0.0,
                domain: "[1, inf)",
            });
        }
        let k = &self.dens.k;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n);
        let mut components = Vec::with_capacity(n);

        let seg_cut = self.dens.segment_mass();
        let layered_cut = seg_cut + self.dens.layered_mass();

        let mut proposals: u64 = 0;
        let mut accepts: u64 = 0;

        for _ in 0..n {
            let pick: f64 = rng.random();
            if pick < seg_cut {
                let axis = match rng.random_range(0..3u8) {
                    0 => Axis::X,
                    1 => Axis::Y,
                    _ => Axis::Z,
                };
                let t = rng.random::<f64>() * k.l;
                points.push(segment_point(axis, t, k)?);
                components.push(match axis {
                    Axis::X => Component::SegmentX,
                    Axis::Y => Component::SegmentY,
                    Axis::Z => Component::SegmentZ,
                });
            } else if pick < layered_cut {
                // Rejection on the projected triangle u + v >= 1 with
                // density p(min(1-u, 1-v, u+v-1)).
                let (u, v) = loop {
                    proposals += 1;
                    if proposals.is_multiple_of(100_000) {
                        let rate = accepts as f64 / proposals as f64;
                        if rate < 1e-4 {
                            return Err(Error::RejectionStall { rate, proposals });
                        }
                    }
                    let mut u: f64 = rng.random();
                    let mut v: f64 = rng.random();
                    if u + v < 1.0 {
                        u = 1.0 - u;
                        v = 1.0 - v;
                    }
                    let m = (1.0 - u).min(1.0 - v).min(u + v - 1.0);
                    if rng.random::<f64>() * self.layered_sup <= self.dens.layered(m)? {
                        accepts += 1;
                        break (u, v);
                    }
                };
                let w = 2.0 - u - v;
                points.push(triangle_to_cube(u, v, w, k)?);
                components.push(Component::Layered);
            } else {
                let segment = rng.random_range(0..3u8);
                let s = self.draw_median(rng.random());
                let far = 1.0 - 0.5 * s;
                let (u, v, w) = match segment {
                    0 => (s, far, far),
                    1 => (far, s, far),
                    _ => (far, far, s),
                };
                points.push(triangle_to_cube(u, v, w, k)?);
                components.push(Component::Median);
            }
        }

        Ok(PointCloud {
            points,
            components,
            seed,
        })
    }

    /// Inverse-CDF draw from the median generator via the knot table.
    fn draw_median(&self, unit: f64) -> f64 {
        let cdf = &self.median_cdf;
        let idx = cdf.partition_point(|&c| c < unit).clamp(1, MEDIAN_KNOTS);
        let c0 = cdf[idx - 1];
        let c1 = cdf[idx];
        let frac = if c1 > c0 {
            (unit - c0) / (c1 - c0)
        } else {
            0.0
        };
        let h = (2.0 / 3.0) / MEDIAN_KNOTS as f64;
        ((idx - 1) as f64 + frac) * h
    }
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Convenience wrapper: builds a sampler and draws `n` samples.
pub fn sample_primal(n: usize, seed: u64, k: &ModelConstants) -> Result<PointCloud> {
    PrimalSampler::new(k)?.sample(n, seed)
}

/// Sample mean and standard error of the product `xyz` over a cloud.
pub fn estimate_cost(cloud: &PointCloud) -> Result<(f64, f64)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = cloud.len() as f64;
    let mean = cloud.points.iter().map(|p| p[0] * p[1] * p[2]).sum::<f64>() / n;
    if cloud.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = cloud
        .points
        .iter()
        .map(|p| {
            let d = p[0] * p[1] * p[2] - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::solve_constants;
    use crate::ks;
    use crate::support::support_residual;

    fn dens() -> TriangleDensities {
        TriangleDensities::new(&solve_constants(1e-14).unwrap()).unwrap()
    }

    #[test]
    fn axis_density_total_mass_is_triangle_mass() {
        let d = dens();
        let k = *d.constants();
        // \int_0^1 s alpha^u du = l (alpha - 1) = r - l.
        let total = quad::integrate(|u| d.axis_density(u), 0.0, 1.0, 1e-13).unwrap();
        assert!((total - (k.r - k.l)).abs() < 1e-12);
    }

    #[test]
    fn axis_density_is_balanced_on_the_triangle() {
        // \int_0^1 (t - 2/3) f(t) dt = 0: the necessary condition for a
        // measure on the triangle to have projection f on all three axes.
        let d = dens();
        let moment =
            quad::integrate(|t| (t - 2.0 / 3.0) * d.axis_density(t), 0.0, 1.0, 1e-13).unwrap();
        assert!(moment.abs() < 1e-10, "moment {moment:e}");
    }

    #[test]
    fn layered_at_zero_matches_both_closed_forms() {
        let d = dens();
        let k = *d.constants();
        let ll = k.alpha.ln();
        let s = d.scale();
        // Direct substitution in the simplified three-term expression.
        let three_term =
            s * ((k.alpha - 4.0) - 6.0 * (2.0 + k.alpha) / ll - 18.0 * (1.0 - k.alpha) / (ll * ll));
        // The unsimplified form at 0 degenerates to f(1) - 4 f(0).
        let unsimplified = d.axis_density(1.0) - 4.0 * d.axis_density(0.0);
        let got = d.layered(0.0).unwrap();
        assert!((got - three_term).abs() < 1e-11, "{got} vs {three_term}");
        assert!((got - unsimplified).abs() < 1e-11);
    }

    #[test]
    fn layered_limit_at_one_third_is_projection_slope() {
        let d = dens();
        let expected = d.axis_density_derivative(2.0 / 3.0);
        let at_pole = d.layered(1.0 / 3.0).unwrap();
        assert!(
            (at_pole - expected).abs() < 1e-12,
            "{at_pole} vs {expected}"
        );
        let near = d.layered(1.0 / 3.0 - 1e-7).unwrap();
        assert!((near - expected).abs() < 1e-5);
    }

    #[test]
    fn layered_nonnegative_on_grid() {
        let d = dens();
        for i in 0..=10_000 {
            let x = (i as f64 / 10_000.0) / 3.0;
            assert!(d.layered(x).unwrap() >= 0.0, "p({x}) < 0");
        }
    }

    #[test]
    fn layered_series_and_direct_agree_at_band_edges() {
        let d = dens();
        for offset in [1.0001e-2, 0.9999e-2] {
            for sign in [-1.0, 1.0] {
                let x = 1.0 / 3.0 + sign * offset;
                if !(0.0..=1.0 / 3.0).contains(&x) {
                    continue;
                }
                // Points straddling the band switch representations; they
                // must agree to far better than the residual contracts.
                let here = d.layered(x).unwrap();
                let shifted = d.layered(x + 1e-9).unwrap_or(here);
                assert!((here - shifted).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn integral_starts_at_zero_and_differentiates_to_generator() {
        let d = dens();
        assert!(d.layered_integral(0.0).unwrap().abs() < 1e-13);
        let h = 1e-5;
        for i in 1..100 {
            let x = (i as f64 / 100.0) / 3.0 - h;
            if x - h < 0.0 || x + h > 1.0 / 3.0 {
                continue;
            }
            let fd = (d.layered_integral(x + h).unwrap() - d.layered_integral(x - h).unwrap())
                / (2.0 * h);
            let p = d.layered(x).unwrap();
            assert!((fd - p).abs() < 1e-6, "x = {x}: {fd} vs {p}");
        }
    }

    #[test]
    fn integral_matches_quadrature_oracle() {
        let d = dens();
        let x = 0.2;
        let integrand =
            |t: f64| (1.0 - 3.0 * t) * (d.axis_density(1.0 - t) - 4.0 * d.axis_density(2.0 * t));
        let oracle = quad::integrate(integrand, 0.0, x, 1e-12).unwrap()
            / ((1.0 - 3.0 * x) * (1.0 - 3.0 * x));
        let got = d.layered_integral(x).unwrap();
        assert!((got - oracle).abs() < 1e-11, "{got} vs {oracle}");
    }

    #[test]
    fn median_endpoint_values() {
        let d = dens();
        assert!((d.median(0.0).unwrap() - d.scale()).abs() < 1e-14);
        // At 2/3 the generator vanishes: f(2/3) = 2 P(1/3).
        let end = d.median(2.0 / 3.0).unwrap();
        assert!(end.abs() < 1e-10, "q(2/3) = {end:e}");
        let p_end = d.layered_integral(1.0 / 3.0).unwrap();
        assert!((d.axis_density(2.0 / 3.0) - 2.0 * p_end).abs() < 1e-10);
    }

    #[test]
    fn median_nonnegative_on_grid() {
        let d = dens();
        for i in 0..=10_000 {
            let s = (i as f64 / 10_000.0) * 2.0 / 3.0;
            assert!(d.median(s).unwrap() >= 0.0, "q({s}) < 0");
        }
    }

    #[test]
    fn ode_residual_small_everywhere() {
        let d = dens();
        assert!(d.ode_residual(0.0).unwrap().abs() < 1e-10);
        assert!(d.ode_residual(0.3).unwrap().abs() < 1e-8);
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let x = (i as f64 / 1000.0) * (1.0 / 3.0 - 1e-6);
            worst = worst.max(d.ode_residual(x).unwrap().abs());
        }
        assert!(worst < 1e-8, "max residual {worst:e}");
    }

    #[test]
    fn layered_projection_branches() {
        let d = dens();
        assert!(d.layered_projection(0.0).unwrap().abs() < 1e-13);
        let left = 2.0 * d.layered_integral(1.0 / 3.0).unwrap();
        let right = d.layered_projection(2.0 / 3.0 + 1e-12).unwrap();
        assert!((left - right).abs() < 1e-9);
        let at_one = d.layered_projection(1.0).unwrap();
        let p0 = d.layered(0.0).unwrap();
        assert!((at_one - p0).abs() < 1e-12);
    }

    #[test]
    fn median_projection_branches() {
        let d = dens();
        let q13 = d.median(1.0 / 3.0).unwrap();
        assert_eq!(d.median_projection(1.0 / 3.0).unwrap(), q13);
        let at_56 = d.median_projection(5.0 / 6.0).unwrap();
        assert!((at_56 - 4.0 * q13).abs() < 1e-13);
    }

    #[test]
    fn median_projection_scaling_identity() {
        // 4 q*(2x) = q*(1 - x) on [0, 1/3].
        let d = dens();
        for i in 0..=1000 {
            let x = (i as f64 / 1000.0) / 3.0;
            let lhs = 4.0 * d.median_projection(2.0 * x).unwrap();
            let rhs = d.median_projection(1.0 - x).unwrap();
            assert!((lhs - rhs).abs() < 1e-8, "x = {x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn projections_sum_to_axis_density() {
        let d = dens();
        for i in 0..=2000 {
            let x = i as f64 / 2000.0;
            let sum = d.layered_projection(x).unwrap() + d.median_projection(x).unwrap();
            let f = d.axis_density(x);
            assert!((sum - f).abs() < 1e-8, "x = {x}: {sum} vs {f}");
        }
    }

    #[test]
    fn masses_budget() {
        let d = dens();
        let k = *d.constants();
        let total = d.segment_mass() + d.layered_mass() + d.median_mass();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((d.segment_mass() - 3.0 * k.l).abs() < 1e-15);
        assert!(d.layered_mass() > 0.0 && d.median_mass() > 0.0);

        // Each triangle mass against the quadrature of its own projection.
        let lp = quad::integrate_with_breakpoints(
            |x| d.layered_projection(x).unwrap(),
            0.0,
            1.0,
            &[2.0 / 3.0],
            1e-11,
        )
        .unwrap();
        assert!((lp - d.layered_mass()).abs() < 1e-9);
        let mp = quad::integrate_with_breakpoints(
            |x| d.median_projection(x).unwrap(),
            0.0,
            1.0,
            &[2.0 / 3.0],
            1e-11,
        )
        .unwrap();
        assert!((mp - d.median_mass()).abs() < 1e-9);
    }

    #[test]
    fn triangle_map_known_points() {
        let k = solve_constants(1e-14).unwrap();
        let p = triangle_to_cube(1.0, 1.0, 0.0, &k).unwrap();
        assert!((p[0] - k.r).abs() < 1e-14);
        assert!((p[1] - k.r).abs() < 1e-14);
        assert!((p[2] - k.l).abs() < 1e-14);

        let center = triangle_to_cube(2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, &k).unwrap();
        let cbrt_c = k.c.cbrt();
        for coord in center {
            assert!((coord - cbrt_c).abs() < 1e-12);
        }

        assert!(matches!(
            triangle_to_cube(1.0, 1.0, 0.5, &k),
            Err(Error::BarycentricConstraint(_))
        ));
    }

    #[test]
    fn triangle_map_lands_on_support() {
        let k = solve_constants(1e-14).unwrap();
        for i in 0..200 {
            let u = i as f64 / 199.0;
            for j in 0..5 {
                let v = (1.0 - u).max(0.0) + (u.min(1.0)) * j as f64 / 4.0;
                let v = v.clamp(0.0, 1.0);
                let w = 2.0 - u - v;
                if !(0.0..=1.0).contains(&w) {
                    continue;
                }
                let p = triangle_to_cube(u, v, w, &k).unwrap();
                let res = support_residual(p[0], p[1], p[2], &k).unwrap();
                assert!(res.max_residual < 1e-10, "u {u} v {v}");
                assert!((p[0] * p[1] * p[2] - k.c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sampler_smoke_marginals_and_support() {
        let k = solve_constants(1e-14).unwrap();
        let sampler = PrimalSampler::new(&k).unwrap();
        let n = 20_000;
        let cloud = sampler.sample(n, 20240601).unwrap();
        assert_eq!(cloud.len(), n);

        // Marginal uniformity on each axis.
        for axis in 0..3 {
            let vals: Vec<f64> = cloud.points.iter().map(|p| p[axis]).collect();
            let stat = ks::uniform_ks_statistic(&vals);
            assert!(
                stat < ks::ks_threshold(n),
                "axis {axis}: D = {stat}, threshold {}",
                ks::ks_threshold(n)
            );
        }

        // Every sample sits on the support.
        for p in &cloud.points {
            let res = support_residual(p[0], p[1], p[2], &k).unwrap();
            assert!(res.max_residual <= 1e-8, "{p:?}");
        }

        // Component proportions near their masses (4-sigma binomial bands).
        let d = sampler.densities();
        let expect = [
            (Component::Layered, d.layered_mass()),
            (Component::Median, d.median_mass()),
            (Component::SegmentX, k.l),
            (Component::SegmentY, k.l),
            (Component::SegmentZ, k.l),
        ];
        for (tag, mass) in expect {
            let count = cloud.components.iter().filter(|&&c| c == tag).count();
            let sigma = (mass * (1.0 - mass) * n as f64).sqrt();
            assert!(
                ((count as f64) - mass * n as f64).abs() < 4.0 * sigma + 1.0,
                "{tag:?}: {count} vs {}",
                mass * n as f64
            );
        }

        // Monte Carlo cost against the closed form.
        let (mean, se) = estimate_cost(&cloud).unwrap();
        assert!(
            (mean - k.primal_value).abs() <= 3.0 * se,
            "mean {mean}, closed form {}, se {se}",
            k.primal_value
        );
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let k = solve_constants(1e-14).unwrap();
        let sampler = PrimalSampler::new(&k).unwrap();
        let a = sampler.sample(500, 7).unwrap();
        let b = sampler.sample(500, 7).unwrap();
        assert_eq!(a.points, b.points);
        let c = sampler.sample(500, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn estimate_cost_degenerate_clouds() {
        let single = PointCloud {
            points: vec![[0.0, 1.0, 1.0]],
            components: vec![Component::SegmentX],
            seed: 0,
        };
        assert_eq!(estimate_cost(&single).unwrap(), (0.0, 0.0));
        let single = PointCloud {
            points: vec![[1.0, 1.0, 1.0]],
            components: vec![Component::SegmentX],
            seed: 0,
        };
        assert_eq!(estimate_cost(&single).unwrap(), (1.0, 0.0));
        let empty = PointCloud {
            points: vec![],
            components: vec![],
            seed: 0,
        };
        assert!(matches!(estimate_cost(&empty), Err(Error::EmptyCloud)));
    }

    #[test]
    fn sample_rejects_zero_count() {
        let k = solve_constants(1e-14).unwrap();
        assert!(sample_primal(0, 1, &k).is_err());
    }

    #[test]
    fn rejection_stall_is_reported() {
        let k = solve_constants(1e-14).unwrap();
        let mut sampler = PrimalSampler::new(&k).unwrap();
        // Simulate an envelope bug: the acceptance rate collapses and the
        // sampler must refuse to spin forever.
        sampler.layered_sup *= 1e6;
        let err = sampler.sample(200, 1).unwrap_err();
        assert!(matches!(err, Error::RejectionStall { .. }), "{err:?}");
    }
}
