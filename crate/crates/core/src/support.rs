//! Geometry of the support set that carries every primal solution.
//!
//! The support is the union of three segments and one surface:
//!
//! * segments from (0,1,1), (1,0,1), (1,1,0) to (l,r,r), (r,l,r), (r,r,l),
//!   parametrized as permutations of (t, 1-2t, 1-2t) for t in [0, l];
//! * the surface {xyz = c, l <= x,y,z <= r}.
//!
//! Membership has an equivalent pointwise description: (x, y, z) lies on the
//! support iff each coordinate's [`partner_product`] equals the product of
//! the other two coordinates. [`support_residual`] measures the deviation
//! from those three equalities.

use crate::constants::ModelConstants;
use crate::error::{Error, Result};

/// One of the three coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// The piecewise profile whose graph relations cut out the support: for a
/// support point with first coordinate `x`, the product of the other two
/// coordinates equals `partner_product(x)`.
///
/// Branches (left-closed): `(1-2x)^2` on `[0, l)`, `c/x` on `[l, r)`,
/// `x(1-x)/2` on `[r, 1]`. Continuous and strictly decreasing from 1 to 0.
pub fn partner_product(x: f64, k: &ModelConstants) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(if x < k.l {
        (1.0 - 2.0 * x) * (1.0 - 2.0 * x)
    } else if x < k.r {
        k.c / x
    } else {
        0.5 * x * (1.0 - x)
    })
}

/// `x * partner_product(x)`: the full product xyz of any support point with
/// first coordinate `x`. Strictly increasing on [0, l], constant `c` on
/// [l, r], strictly decreasing on [r, 1].
pub fn triple_product(x: f64, k: &ModelConstants) -> Result<f64> {
    Ok(x * partner_product(x, k)?)
}

/// Inverse of [`partner_product`] on [0, 1]; `v` outside [0, 1] is clamped.
pub fn partner_product_inv(v: f64, k: &ModelConstants) -> f64 {
    let v = v.clamp(0.0, 1.0);
    let at_l = k.r * k.r; // partner_product(l) = (1-2l)^2 = r^2
    let at_r = k.l * k.r; // partner_product(r) = c/r = l r
    if v >= at_l {
        // (1-2x)^2 = v on [0, l]
        0.5 * (1.0 - v.sqrt())
    } else if v > at_r {
        // c/x = v on [l, r]
        k.c / v
    } else {
        // x(1-x)/2 = v on [r, 1]; the root >= 1/2 branch.
        0.5 * (1.0 + (1.0 - 8.0 * v).max(0.0).sqrt())
    }
}

/// Pointwise deviation of `(x, y, z)` from the three support equalities.
#[derive(Debug, Clone, Copy)]
pub struct SupportResidual {
    /// `|partner_product(x) - yz|`
    pub rx: f64,
    /// `|partner_product(y) - xz|`
    pub ry: f64,
    /// `|partner_product(z) - xy|`
    pub rz: f64,
    pub max_residual: f64,
}

impl SupportResidual {
    /// Membership verdict at a caller-supplied tolerance. The support has
    /// measure zero, so exact membership of floating-point samples is
    /// meaningless without one; 1e-9 is the conventional default.
    pub fn is_on_support(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// Evaluates the three membership residuals at a point of the closed cube.
pub fn support_residual(x: f64, y: f64, z: f64, k: &ModelConstants) -> Result<SupportResidual> {
    let rx = (partner_product(x, k)? - y * z).abs();
    let ry = (partner_product(y, k)? - x * z).abs();
    let rz = (partner_product(z, k)? - x * y).abs();
    Ok(SupportResidual {
        rx,
        ry,
        rz,
        max_residual: rx.max(ry).max(rz),
    })
}

/// Point of the one-dimensional support segment attached to `axis`:
/// the coordinate on `axis` is `t`, the other two are `1 - 2t`.
pub fn segment_point(axis: Axis, t: f64, k: &ModelConstants) -> Result<[f64; 3]> {
    if !(0.0..=k.l).contains(&t) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            domain: "[0, l]",
        });
    }
    let o = 1.0 - 2.0 * t;
    Ok(match axis {
        Axis::X => [t, o, o],
        Axis::Y => [o, t, o],
        Axis::Z => [o, o, t],
    })
}

/// Point of the two-dimensional support surface over `(x, y)`, when it
/// exists: `z = c/(xy)` must land in `[l, r]`, otherwise `None`.
pub fn surface_point(x: f64, y: f64, k: &ModelConstants) -> Option<[f64; 3]> {
    // Tolerate one-ulp spill at the box boundary, then clamp.
    const EDGE: f64 = 1e-12;
    if !(k.l - EDGE..=k.r + EDGE).contains(&x) || !(k.l - EDGE..=k.r + EDGE).contains(&y) {
        return None;
    }
    let z = k.c / (x * y);
    if (k.l - EDGE..=k.r + EDGE).contains(&z) {
        Some([x.clamp(k.l, k.r), y.clamp(k.l, k.r), z.clamp(k.l, k.r)])
    } else {
        None
    }
}

/// Signature report of the quadratic form used for the dimension bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InertiaReport {
    pub positive_index: u32,
    pub negative_index: u32,
    pub zero_index: u32,
    /// `3 - positive_index`: an upper bound on the local dimension of any
    /// set on which the form stays nonnegative.
    pub dimension_bound: u32,
}

/// Builds the symmetric 3x3 form with zero diagonal and off-diagonal entries
/// `(a+b)z`, `(a+g)y`, `(b+g)x`, and computes its inertia signature.
///
/// Eigenvalues of the 3x3 symmetric matrix come from the closed-form
/// trigonometric solution of the characteristic cubic; the zero threshold is
/// `1e-12` times the matrix max-norm.
pub fn inertia_index(x: f64, y: f64, z: f64, a: f64, b: f64, g: f64) -> InertiaReport {
    let m01 = (a + b) * z;
    let m02 = (a + g) * y;
    let m12 = (b + g) * x;
    let eigs = symmetric3_eigenvalues(0.0, 0.0, 0.0, m01, m02, m12);
    let scale = m01.abs().max(m02.abs()).max(m12.abs());
    let threshold = 1e-12 * scale;

    let mut positive = 0;
    let mut negative = 0;
    let mut zero = 0;
    for e in eigs {
        if e > threshold {
            positive += 1;
        } else if e < -threshold {
            negative += 1;
        } else {
            zero += 1;
        }
    }
    InertiaReport {
        positive_index: positive,
        negative_index: negative,
        zero_index: zero,
        dimension_bound: 3 - positive,
    }
}

/// Eigenvalues of a symmetric 3x3 matrix with diagonal `(d0, d1, d2)` and
/// off-diagonal entries `m01, m02, m12`, via the trigonometric solution of
/// the characteristic polynomial.
fn symmetric3_eigenvalues(d0: f64, d1: f64, d2: f64, m01: f64, m02: f64, m12: f64) -> [f64; 3] {
    let p1 = m01 * m01 + m02 * m02 + m12 * m12;
    if p1 == 0.0 {
        return [d0, d1, d2];
    }
    let q = (d0 + d1 + d2) / 3.0;
    let p2 = (d0 - q) * (d0 - q) + (d1 - q) * (d1 - q) + (d2 - q) * (d2 - q) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();

    // r = det(B)/2 with B = (A - qI)/p, clamped against roundoff.
    let b00 = (d0 - q) / p;
    let b11 = (d1 - q) / p;
    let b22 = (d2 - q) / p;
    let b01 = m01 / p;
    let b02 = m02 / p;
    let b12 = m12 / p;
    let det_b = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);

    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

/// Coordinate-ascent toward the support: repeatedly replaces each coordinate
/// by the unique stationary value `partner_product_inv` of the product of
/// the other two. Converges to a point satisfying the three support
/// equalities for every admissible cost at once.
pub fn ascend_to_support(start: [f64; 3], k: &ModelConstants, max_iter: usize) -> [f64; 3] {
    let [mut x, mut y, mut z] = [
        start[0].clamp(0.0, 1.0),
        start[1].clamp(0.0, 1.0),
        start[2].clamp(0.0, 1.0),
    ];
    for _ in 0..max_iter {
        let nx = partner_product_inv(y * z, k);
        let ny = partner_product_inv(nx * z, k);
        let nz = partner_product_inv(nx * ny, k);
        let moved = (nx - x).abs() + (ny - y).abs() + (nz - z).abs();
        x = nx;
        y = ny;
        z = nz;
        if moved < 1e-15 {
            break;
        }
    }
    [x, y, z]
}
