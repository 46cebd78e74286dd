//! Geometry of the time-symmetric Reissner-Nordström slice
//! `g = V⁻² dr² + r² dS²`, `V² = 1 − 2m/r + Q²/r²`, with radial electric
//! field of magnitude `|Q|/r²`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, QlError, Result};
use crate::numerics::{bisect, deriv_nonuniform, logspace};

/// Mass and charge of a reference manifold, in geometric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RNParams {
    pub mbar: f64,
    pub qbar: f64,
}

impl RNParams {
    pub fn new(mbar: f64, qbar: f64) -> Result<Self> {
        if !mbar.is_finite() || !qbar.is_finite() {
            return Err(QlError::Domain("non-finite reference parameters".into()));
        }
        if mbar < 0.0 {
            return Err(QlError::Domain(format!("negative mass {mbar}")));
        }
        if mbar > 0.0 && mbar < qbar.abs() {
            return Err(QlError::Domain(format!(
                "super-extremal parameters m = {mbar}, Q = {qbar}"
            )));
        }
        Ok(Self { mbar, qbar })
    }

    pub fn schwarzschild(mbar: f64) -> Result<Self> {
        Self::new(mbar, 0.0)
    }

    pub fn is_zero_mass(&self) -> bool {
        self.mbar == 0.0
    }

    /// `V²`, defined for every `r > 0` (negative between the horizons).
    pub fn potential_sq(&self, r: f64) -> f64 {
        1.0 - 2.0 * self.mbar / r + self.qbar * self.qbar / (r * r)
    }

    pub fn potential(&self, r: f64) -> f64 {
        self.potential_sq(r).max(0.0).sqrt()
    }

    /// `dV/dr`.
    pub fn potential_dr(&self, r: f64) -> f64 {
        let q2 = self.qbar * self.qbar;
        (self.mbar / (r * r) - q2 / (r * r * r)) / self.potential(r)
    }

    /// Radial metric factor `a = 1/V` and its derivative `da/dr`.
    pub fn radial_factor(&self, r: f64) -> (f64, f64) {
        let v = self.potential(r);
        (1.0 / v, -self.potential_dr(r) / (v * v))
    }

    /// Sectional curvature of planes containing the radial direction.
    pub fn sectional_radial(&self, r: f64) -> f64 {
        -self.mbar / r.powi(3) + self.qbar * self.qbar / r.powi(4)
    }

    /// Sectional curvature of the plane tangent to the round spheres.
    pub fn sectional_tangential(&self, r: f64) -> f64 {
        2.0 * self.mbar / r.powi(3) - self.qbar * self.qbar / r.powi(4)
    }

    pub fn scalar_curvature(&self, r: f64) -> f64 {
        2.0 * self.qbar * self.qbar / r.powi(4)
    }

    pub fn field_magnitude(&self, r: f64) -> f64 {
        self.qbar.abs() / (r * r)
    }
}

/// Pointwise fields of the reference slice at areal radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RNPointData {
    pub r: f64,
    pub v: f64,
    pub dv_dr: f64,
    pub g_rr: f64,
    pub rbar: f64,
    pub ric_nn: f64,
    pub e_mag: f64,
    pub phi_sphere: f64,
}

/// Evaluate the reference fields at `r`, which must lie outside the horizon.
pub fn rn_point(params: &RNParams, r: f64) -> Result<RNPointData> {
    if let Some(rh) = horizon_radius(params) {
        if r < rh {
            return Err(QlError::Domain(format!(
                "r = {r} lies inside the horizon r+ = {rh}"
            )));
        }
    }
    rn_point_unchecked(params, r)
}

/// Like [`rn_point`] but permits interior values (where `V²` may be negative,
/// in which case `v` is reported as 0 and `g_rr` as infinite).
pub fn rn_point_unchecked(params: &RNParams, r: f64) -> Result<RNPointData> {
    if !(r > 0.0) {
        return Err(QlError::Domain(format!("areal radius must be positive, got {r}")));
    }
    let v2 = params.potential_sq(r);
    let v = v2.max(0.0).sqrt();
    let q2 = params.qbar * params.qbar;
    let dv_dr = if v > 0.0 {
        (params.mbar / (r * r) - q2 / r.powi(3)) / v
    } else {
        f64::INFINITY
    };
    let data = RNPointData {
        r,
        v: check_finite("V", v)?,
        dv_dr,
        g_rr: 1.0 / v2,
        rbar: params.scalar_curvature(r),
        ric_nn: 2.0 * q2 / r.powi(4) - 2.0 * params.mbar / r.powi(3),
        e_mag: params.field_magnitude(r),
        phi_sphere: params.qbar / (r * r),
    };
    check_finite("Rbar", data.rbar)?;
    Ok(data)
}

/// Outermost root of `V(r) = 0`, i.e. `m + √(m² − Q²)`; `None` for zero mass.
pub fn horizon_radius(params: &RNParams) -> Option<f64> {
    if params.mbar <= 0.0 {
        return None;
    }
    let m = params.mbar;
    let q2 = params.qbar * params.qbar;
    // r² V² = r² − 2 m r + Q² is a polynomial in r; its larger root is >= m.
    let poly = |r: f64| r * r - 2.0 * m * r + q2;
    if poly(m) >= 0.0 {
        return Some(m);
    }
    let hi = 2.0 * m + params.qbar.abs() + 1.0;
    bisect(poly, m, hi, 1e-15).ok()
}

/// Isotropic description of the zero-mass slice,
/// `g = (1 − Q²/4ρ²)² (dρ² + ρ² dS²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsotropicChart {
    pub rho: f64,
    pub r_of_rho: f64,
    pub conf: f64,
    pub speed_f: f64,
}

pub fn isotropic_chart(params: &RNParams, rho: f64) -> Result<IsotropicChart> {
    if !params.is_zero_mass() {
        return Err(QlError::Variant("isotropic chart requires zero mass".into()));
    }
    let q = params.qbar.abs();
    if !(rho > 0.5 * q) {
        return Err(QlError::Domain(format!(
            "isotropic radius {rho} must exceed |Q|/2 = {}",
            0.5 * q
        )));
    }
    let q2 = q * q;
    let conf = 1.0 - q2 / (4.0 * rho * rho);
    Ok(IsotropicChart {
        rho,
        r_of_rho: rho - q2 / (4.0 * rho),
        conf,
        speed_f: 1.0 / conf,
    })
}

/// Inverse of `r(ρ) = ρ − Q²/(4ρ)` on the branch `ρ > |Q|/2`.
pub fn rho_of_r(qbar: f64, r: f64) -> f64 {
    0.5 * (r + (r * r + qbar * qbar).sqrt())
}

/// Flow speed `F(ρ)` and its first two radial derivatives.
pub fn flow_speed_derivatives(qbar: f64, rho: f64) -> (f64, f64, f64) {
    let q2 = qbar * qbar;
    let c = 1.0 - q2 / (4.0 * rho * rho);
    let c1 = q2 / (2.0 * rho.powi(3));
    let c2 = -1.5 * q2 / rho.powi(4);
    let f = 1.0 / c;
    let f1 = -c1 / (c * c);
    let f2 = -c2 / (c * c) + 2.0 * c1 * c1 / c.powi(3);
    (f, f1, f2)
}

/// Sampled constants `(c3, c4)` with `|D_a D_b F| <= c3/ρ⁴` in every tangent
/// direction and `0 >= ∂_ν F >= −c4/ρ³` for `ρ >= rho_min`.
pub fn flow_speed_bounds(params: &RNParams, rho_min: f64) -> Result<(f64, f64)> {
    if !params.is_zero_mass() {
        return Err(QlError::Variant("flow speed bounds require zero mass".into()));
    }
    let q = params.qbar.abs();
    if !(rho_min > q) {
        return Err(QlError::Domain(format!(
            "rho_min = {rho_min} must exceed |Q| = {q}"
        )));
    }
    if q == 0.0 {
        return Ok((0.0, 0.0));
    }
    let rhos = logspace(rho_min, rho_min * 1e6, 20_000);
    let n_dir = 33;
    let (mut c3, mut c4) = (0.0f64, 0.0f64);
    for &rho in &rhos {
        let (_, f1, f2) = flow_speed_derivatives(q, rho);
        // Ambient Euclidean Hessian of a radial function: eigenvalues F'' and
        // F'/ρ; sample tangent directions at angle alpha from radial.
        for k in 0..n_dir {
            let alpha = 0.5 * std::f64::consts::PI * k as f64 / (n_dir - 1) as f64;
            let hess = f2 * alpha.cos().powi(2) + f1 / rho * alpha.sin().powi(2);
            c3 = c3.max(rho.powi(4) * hess.abs());
        }
        c4 = c4.max(rho.powi(3) * (-f1).max(0.0));
    }
    Ok((1.01 * c3, 1.01 * c4))
}

/// Convexity constants for the extension hypotheses. All values are caller
/// configuration; the defaults are a reproducible shipped profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_big: f64,
    pub c_prime: f64,
    pub delta_angle: f64,
}

impl Default for FlowConstants {
    fn default() -> Self {
        let c1 = 10.0;
        let c_big = 100.0;
        Self {
            c1,
            c2: 100.0,
            c3: 1.0,
            c4: 1.0,
            c_big,
            c_prime: 2.0 * c1 / c_big,
            delta_angle: 0.5,
        }
    }
}

impl FlowConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.c1, self.c2, self.c3, self.c4, self.c_big, self.c_prime, self.delta_angle];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(QlError::Domain("flow constants must be finite and positive".into()));
        }
        Ok(())
    }

    /// Replace `c3`, `c4` by sampled flow-speed bounds.
    pub fn with_flow_bounds(mut self, params: &RNParams, rho_min: f64) -> Result<Self> {
        let (c3, c4) = flow_speed_bounds(params, rho_min)?;
        self.c3 = c3.max(f64::MIN_POSITIVE);
        self.c4 = c4.max(f64::MIN_POSITIVE);
        Ok(self)
    }
}

/// Samples of a rotationally symmetric metric `a(x)² dx² + b(x)² dS²` with
/// enclosed charge `q(x)` (so the unit-normal flux is `q/b²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Closed-form RN slice sampled in the areal coordinate on a log grid.
    pub fn reissner_nordstrom(params: &RNParams, r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if let Some(rh) = horizon_radius(params) {
            if r_min <= rh {
                return Err(QlError::Domain(format!("r_min = {r_min} not outside r+ = {rh}")));
            }
        }
        let x = logspace(r_min, r_max, n);
        let a = x.iter().map(|&r| 1.0 / params.potential(r)).collect();
        let q = vec![params.qbar; n];
        Ok(Self { b: x.clone(), x, a, q })
    }

    pub fn flat(r_min: f64, r_max: f64, n: usize) -> Self {
        let x = logspace(r_min, r_max, n);
        Self {
            b: x.clone(),
            a: vec![1.0; n],
            q: vec![0.0; n],
            x,
        }
    }

    /// Sub-profile on the index range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            x: self.x[range.clone()].to_vec(),
            a: self.a[range.clone()].to_vec(),
            b: self.b[range.clone()].to_vec(),
            q: self.q[range].to_vec(),
        }
    }
}

/// Scalar curvature and unit-radial Ricci curvature of `a(x)²dx² + b(x)²dS²`
/// at `x` by second-order central differences of step `h`.
///
/// With `σ` the radial arc length, `R = −4 b_σσ/b + 2(1 − b_σ²)/b²` and
/// `Ric(∂_σ, ∂_σ) = −2 b_σσ/b`.
pub fn profile_curvature_fd<A: Fn(f64) -> f64, B: Fn(f64) -> f64>(a: A, b: B, x: f64, h: f64) -> (f64, f64) {
    let (am, a0, ap) = (a(x - h), a(x), a(x + h));
    let (bm, b0, bp) = (b(x - h), b(x), b(x + h));
    let (da, db) = ((ap - am) / (2.0 * h), (bp - bm) / (2.0 * h));
    let ddb = (bp - 2.0 * b0 + bm) / (h * h);
    let b_s = db / a0;
    let b_ss = ddb / (a0 * a0) - da * db / a0.powi(3);
    let scalar = -4.0 * b_ss / b0 + 2.0 * (1.0 - b_s * b_s) / (b0 * b0);
    (scalar, -2.0 * b_ss / b0)
}

/// Finite-difference `(R̄, Ric(ν_r, ν_r))` of the RN slice at areal radius `r`.
pub fn rn_curvature_fd(params: &RNParams, r: f64, h: f64) -> (f64, f64) {
    profile_curvature_fd(|x| 1.0 / params.potential(x), |x| x, r, h)
}

/// ADM mass (Richardson-extrapolated surface integral) and total charge of
/// an asymptotically flat rotationally symmetric profile.
///
/// On a coordinate sphere of areal radius `b` the ADM integrand
/// `(∂_i g_ij − ∂_j g_ii) ν^j` integrates to `(b/2)(A − 1)` with
/// `A = a²/b'²` the areal radial metric coefficient.
pub fn adm_mass_and_charge(profile: &RadialProfile) -> Result<(f64, f64)> {
    let n = profile.len();
    if n < 8 {
        return Err(QlError::Resolution("profile needs at least 8 samples".into()));
    }
    let db = deriv_nonuniform(&profile.x, &profile.b, 1, 5);
    let slope: Vec<f64> = (0..n).map(|i| db[i] / profile.a[i]).collect();
    let m_adm = adm_mass_from_slope(&profile.b, &slope)?;
    let outer = n - 1;
    let q_inf = profile.q[outer];
    Ok((m_adm, q_inf))
}

/// ADM mass from the areal radius `b` and its slope in arc length
/// (`db/dσ`), which must be supplied exactly where finite differences would
/// limit the accuracy. Uses the outermost sample and the one nearest half
/// its radius, eliminating the `1/r` correction of `(r/2)(b_σ⁻² − 1)`.
pub fn adm_mass_from_slope(b: &[f64], slope: &[f64]) -> Result<f64> {
    let n = b.len();
    if n < 8 || slope.len() != n {
        return Err(QlError::Resolution("profile needs at least 8 samples".into()));
    }
    let areal_excess = |i: usize| slope[i].powi(-2) - 1.0;
    let outer = n - 1;
    let r_out = b[outer];
    let half = 0.5 * r_out;
    let inner = (0..outer)
        .min_by(|&i, &j| (b[i] - half).abs().partial_cmp(&(b[j] - half).abs()).unwrap())
        .unwrap();
    let r_in = b[inner];
    if !(r_in < r_out) {
        return Err(QlError::Resolution("profile is not outward increasing".into()));
    }
    let (e_out, e_in) = (areal_excess(outer), areal_excess(inner));
    let scale = e_out.abs().max(e_in.abs());
    if scale > 1e-13 {
        let decay = (e_out.abs().max(1e-300) / e_in.abs().max(1e-300)).ln() / (r_out / r_in).ln();
        if !(decay <= -0.5 + 0.05) {
            return Err(QlError::InsufficientDecay { slope: decay });
        }
    }
    let m_out = 0.5 * r_out * e_out;
    let m_in = 0.5 * r_in * e_in;
    check_finite("ADM mass", (r_out * m_out - r_in * m_in) / (r_out - r_in))
}
