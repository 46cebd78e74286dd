//! Axisymmetric closed surfaces `r = f(t)` (t the polar angle) inside a
//! reference slice, with their induced geometry, reference electric data and
//! the convexity checks used by the extension.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{QlError, Result};
use crate::numerics::{clenshaw_curtis, d1_polar, d2_polar, Parity};
use crate::reference::{horizon_radius, rho_of_r, FlowConstants, RNParams};

/// A graph over the round sphere sampled at `t_i = iπ/grid_n`, `i = 0..=grid_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisymSurface {
    pub params: RNParams,
    pub profile: Vec<f64>,
    /// Number of polar intervals (even).
    pub grid_n: usize,
}

/// Minimum relative clearance from the horizon.
const HORIZON_MARGIN: f64 = 1e-9;

impl AxisymSurface {
    pub fn new(params: RNParams, profile: Vec<f64>) -> Result<Self> {
        let grid_n = profile.len().saturating_sub(1);
        if grid_n < 4 || grid_n % 2 != 0 {
            return Err(QlError::Resolution(format!(
                "polar grid needs an even number (>= 4) of intervals, got {grid_n}"
            )));
        }
        if profile.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(QlError::Domain("profile must be finite and positive".into()));
        }
        if let Some(rh) = horizon_radius(&params) {
            let fmin = profile.iter().cloned().fold(f64::INFINITY, f64::min);
            if fmin <= rh * (1.0 + HORIZON_MARGIN) {
                return Err(QlError::Domain(format!(
                    "surface reaches r = {fmin}, not outside the horizon r+ = {rh}"
                )));
            }
        }
        Ok(Self { params, profile, grid_n })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(params: RNParams, grid_n: usize, f: F) -> Result<Self> {
        let h = PI / grid_n as f64;
        Self::new(params, (0..=grid_n).map(|i| f(i as f64 * h)).collect())
    }

    pub fn polar_step(&self) -> f64 {
        PI / self.grid_n as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        let h = self.polar_step();
        (0..=self.grid_n).map(|i| i as f64 * h).collect()
    }

    pub fn min_radius(&self) -> f64 {
        self.profile.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius(&self) -> f64 {
        self.profile.iter().cloned().fold(0.0, f64::max)
    }
}

/// Constant profile `f ≡ r0` on a default 64-interval grid.
pub fn round_sphere(params: &RNParams, r0: f64) -> Result<AxisymSurface> {
    round_sphere_n(params, r0, 64)
}

pub fn round_sphere_n(params: &RNParams, r0: f64, grid_n: usize) -> Result<AxisymSurface> {
    AxisymSurface::new(*params, vec![r0; grid_n + 1])
}

/// Round sphere specified by its isotropic radius (zero-mass references).
pub fn round_sphere_isotropic(params: &RNParams, rho: f64, grid_n: usize) -> Result<AxisymSurface> {
    let chart = crate::reference::isotropic_chart(params, rho)?;
    round_sphere_n(params, chart.r_of_rho, grid_n)
}

/// Pointwise extrinsic data of a graph in a metric `a(r)² dr² + r² dS²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphGeometry {
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub h: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    pub nu_r: Vec<f64>,
    pub nu_t: Vec<f64>,
    pub sigma_tt: Vec<f64>,
    /// Area density per `dt dφ`.
    pub density: Vec<f64>,
    /// Area density divided by `sin t` (smooth through the poles).
    pub density_reduced: Vec<f64>,
    /// Tangential velocity of fixed-angle points under the unit normal flow,
    /// as a multiple of `∂_t` along the surface.
    pub shift: Vec<f64>,
    /// Normal speed factor `|∇(r − f)|`, which is `∂_s f` for the unit flow.
    pub normal_speed: Vec<f64>,
}

/// Extrinsic geometry of the graph `f` (uniform polar grid) in the metric
/// whose radial factor and its derivative are `metric(r) = (a, da/dr)`.
pub fn graph_geometry<M: Fn(f64) -> (f64, f64)>(f: &[f64], metric: M) -> GraphGeometry {
    let n = f.len() - 1;
    let h = PI / n as f64;
    let f1 = d1_polar(f, h, Parity::Even);
    let f2 = d2_polar(f, h, Parity::Even);
    let mut g = GraphGeometry {
        kappa1: vec![0.0; n + 1],
        kappa2: vec![0.0; n + 1],
        h: vec![0.0; n + 1],
        cos_theta: vec![0.0; n + 1],
        sin_theta: vec![0.0; n + 1],
        nu_r: vec![0.0; n + 1],
        nu_t: vec![0.0; n + 1],
        sigma_tt: vec![0.0; n + 1],
        density: vec![0.0; n + 1],
        density_reduced: vec![0.0; n + 1],
        shift: vec![0.0; n + 1],
        normal_speed: vec![0.0; n + 1],
    };
    for i in 0..=n {
        let t = i as f64 * h;
        let r = f[i];
        let (fp, fpp) = if i == 0 || i == n { (0.0, f2[i]) } else { (f1[i], f2[i]) };
        let (a, da) = metric(r);
        let nn = (1.0 / (a * a) + fp * fp / (r * r)).sqrt();
        let p = 1.0 / (a * nn);
        let dn_dr = (-da / a.powi(3) - fp * fp / r.powi(3)) / nn;
        let dp_dr = -(da * nn + a * dn_dr) / (a * nn).powi(2);
        // f' cot t, with its pole limit f''.
        let x = if i == 0 || i == n { fpp } else { fp * t.cos() / t.sin() };
        let hm = (2.0 * r * p + r * r * dp_dr) / (a * r * r)
            - (x / nn + fpp / nn - fp * fp * fpp / (r * r * nn.powi(3))) / (r * r);
        let k2 = 1.0 / (a * a * nn * r) - x / (r * r * nn);
        g.h[i] = hm;
        g.kappa2[i] = k2;
        g.kappa1[i] = hm - k2;
        g.cos_theta[i] = 1.0 / (a * nn);
        g.sin_theta[i] = fp.abs() / (r * nn);
        g.nu_r[i] = 1.0 / (a * a * nn);
        g.nu_t[i] = -fp / (r * r * nn);
        g.sigma_tt[i] = a * a * fp * fp + r * r;
        g.density_reduced[i] = g.sigma_tt[i].sqrt() * r;
        g.density[i] = g.density_reduced[i] * t.sin();
        g.shift[i] = fp / (r * r * nn);
        g.normal_speed[i] = nn;
    }
    g
}

/// Induced geometry and reference electric data of a surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGeometry {
    pub params: RNParams,
    pub r: Vec<f64>,
    /// `σ_tt` and `σ_φφ`.
    pub sigma_tt: Vec<f64>,
    pub sigma_pp: Vec<f64>,
    /// Area density per `dt` (already integrated over φ).
    pub area_element: Vec<f64>,
    /// Quadrature weights: `∫ w dΣ ≈ Σ_i w_i quad_weights_i`.
    pub quad_weights: Vec<f64>,
    /// Second fundamental form components `A_tt`, `A_φφ` (diagonal basis).
    pub a0_tt: Vec<f64>,
    pub a0_pp: Vec<f64>,
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub h_o: Vec<f64>,
    pub gauss_k: Vec<f64>,
    pub nu_r: Vec<f64>,
    pub nu_t: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    pub t_field: Vec<f64>,
    pub phi_bar: Vec<f64>,
    pub e_s: Vec<f64>,
    pub e_t_mag: Vec<f64>,
    pub e_mag: Vec<f64>,
    pub rbar: Vec<f64>,
    pub ric_nn: Vec<f64>,
    pub v: Vec<f64>,
    pub dv_dnu: Vec<f64>,
    pub shift: Vec<f64>,
    pub normal_speed: Vec<f64>,
    pub total_area: f64,
    pub charge: f64,
    pub polar_step: f64,
}

impl SurfaceGeometry {
    /// `∫ w dΣ` by Clenshaw–Curtis quadrature in `cos t`.
    pub fn integrate(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.quad_weights).map(|(a, b)| a * b).sum()
    }

    pub fn det_a0(&self) -> Vec<f64> {
        self.kappa1.iter().zip(&self.kappa2).map(|(a, b)| a * b).collect()
    }

    /// Solvability monitor `det A₀ − Ric(ν,ν) + T/2`.
    pub fn solvability_monitor(&self) -> Vec<f64> {
        (0..self.r.len())
            .map(|i| self.kappa1[i] * self.kappa2[i] - self.ric_nn[i] + 0.5 * self.t_field[i])
            .collect()
    }

    /// Monotonicity monitor `det A₀ − T/2 + (∂V/∂ν) H_o / V`.
    pub fn monotonicity_monitor(&self) -> Vec<f64> {
        (0..self.r.len())
            .map(|i| {
                self.kappa1[i] * self.kappa2[i] - 0.5 * self.t_field[i]
                    + self.dv_dnu[i] * self.h_o[i] / self.v[i]
            })
            .collect()
    }

    /// `K − Φ̄²`, equal to the solvability monitor by the Gauss equation.
    pub fn gauss_flux_margin(&self) -> Vec<f64> {
        self.gauss_k
            .iter()
            .zip(&self.phi_bar)
            .map(|(k, p)| k - p * p)
            .collect()
    }
}

/// Induced geometry, checked for convergence against the half-resolution grid.
pub fn induced_geometry(surface: &AxisymSurface) -> Result<SurfaceGeometry> {
    let geom = induced_geometry_unchecked(surface);
    check_resolution(surface, &geom)?;
    Ok(geom)
}

fn check_resolution(surface: &AxisymSurface, geom: &SurfaceGeometry) -> Result<()> {
    let n = surface.grid_n;
    if n < 8 {
        return Ok(());
    }
    let coarse: Vec<f64> = surface.profile.iter().step_by(2).cloned().collect();
    let params = surface.params;
    let cg = graph_geometry(&coarse, |r| params.radial_factor(r));
    let scale = geom.h_o.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let worst = cg
        .h
        .iter()
        .enumerate()
        .map(|(i, hc)| (hc - geom.h_o[2 * i]).abs())
        .fold(0.0f64, f64::max);
    if worst > 1e-3 * scale {
        return Err(QlError::Resolution(format!(
            "mean curvature changes by {:.2e} (relative) under grid halving",
            worst / scale
        )));
    }
    Ok(())
}

/// Induced geometry without the refinement check (used on flow leaves).
pub fn induced_geometry_unchecked(surface: &AxisymSurface) -> SurfaceGeometry {
    let params = surface.params;
    let f = &surface.profile;
    let n = surface.grid_n;
    let hstep = surface.polar_step();
    let g = graph_geometry(f, |r| params.radial_factor(r));
    let mut out = SurfaceGeometry {
        params,
        r: f.clone(),
        sigma_tt: g.sigma_tt.clone(),
        sigma_pp: vec![0.0; n + 1],
        area_element: g.density.iter().map(|d| 2.0 * PI * d).collect(),
        quad_weights: clenshaw_curtis(n)
            .iter()
            .zip(&g.density_reduced)
            .map(|(w, d)| 2.0 * PI * w * d)
            .collect(),
        a0_tt: vec![0.0; n + 1],
        a0_pp: vec![0.0; n + 1],
        kappa1: g.kappa1.clone(),
        kappa2: g.kappa2.clone(),
        h_o: g.h.clone(),
        gauss_k: vec![0.0; n + 1],
        nu_r: g.nu_r.clone(),
        nu_t: g.nu_t.clone(),
        cos_theta: g.cos_theta.clone(),
        sin_theta: g.sin_theta.clone(),
        t_field: vec![0.0; n + 1],
        phi_bar: vec![0.0; n + 1],
        e_s: vec![0.0; n + 1],
        e_t_mag: vec![0.0; n + 1],
        e_mag: vec![0.0; n + 1],
        rbar: vec![0.0; n + 1],
        ric_nn: vec![0.0; n + 1],
        v: vec![0.0; n + 1],
        dv_dnu: vec![0.0; n + 1],
        shift: g.shift.clone(),
        normal_speed: g.normal_speed.clone(),
        total_area: 0.0,
        charge: 0.0,
        polar_step: hstep,
    };
    for i in 0..=n {
        let r = f[i];
        let t = i as f64 * hstep;
        let (c, s) = (g.cos_theta[i], g.sin_theta[i]);
        out.sigma_pp[i] = (r * t.sin()).powi(2);
        out.a0_tt[i] = g.kappa1[i] * g.sigma_tt[i];
        out.a0_pp[i] = g.kappa2[i] * out.sigma_pp[i];
        let k_rad = params.sectional_radial(r);
        let k_tan = params.sectional_tangential(r);
        let plane = k_tan * c * c + k_rad * s * s;
        out.gauss_k[i] = g.kappa1[i] * g.kappa2[i] + plane;
        out.ric_nn[i] = 2.0 * k_rad * c * c + (k_rad + k_tan) * s * s;
        out.rbar[i] = params.scalar_curvature(r);
        let v = params.potential(r);
        out.v[i] = v;
        out.dv_dnu[i] = params.potential_dr(r) * g.nu_r[i];
        electric_point(&mut out, i, params.qbar, r, c, s);
    }
    out.total_area = out.quad_weights.iter().sum();
    out.charge = out.integrate(&out.phi_bar) / (4.0 * PI);
    out
}

fn electric_point(out: &mut SurfaceGeometry, i: usize, q: f64, r: f64, c: f64, s: f64) {
    let e = q.abs() / (r * r);
    out.e_mag[i] = e;
    out.phi_bar[i] = q / (r * r) * c;
    out.e_s[i] = out.phi_bar[i];
    out.e_t_mag[i] = e * s;
    out.t_field[i] = 2.0 * s * s * e * e;
}

/// Flux decomposition of the reference field on a surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElectricData {
    pub phi_bar: Vec<f64>,
    pub e_s: Vec<f64>,
    pub e_t_mag: Vec<f64>,
    pub t_field: Vec<f64>,
    pub charge: f64,
}

/// Normal/tangential decomposition of the reference field and the enclosed charge.
pub fn electric_data(surface: &AxisymSurface) -> Result<ElectricData> {
    let g = induced_geometry(surface)?;
    Ok(ElectricData {
        phi_bar: g.phi_bar,
        e_s: g.e_s,
        e_t_mag: g.e_t_mag,
        t_field: g.t_field,
        charge: g.charge,
    })
}

/// Pass/fail of one inequality with its worst-case margin over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margin {
    pub pass: bool,
    pub worst: f64,
}

impl Margin {
    /// Strict positivity of every value.
    pub fn positive<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let worst = values.into_iter().fold(f64::INFINITY, f64::min);
        Self { pass: worst > 0.0, worst }
    }

    pub fn of(value: f64) -> Self {
        Self { pass: value > 0.0, worst: value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DaggerReport {
    pub ric_negative: Margin,
    pub curvature: Margin,
    pub radius: Margin,
    pub pass: bool,
}

/// Condition (†): `Ric(ν,ν) < 0`, `min κ > C₁/r²`, `r > C₂` pointwise.
pub fn check_dagger(geom: &SurfaceGeometry, consts: &FlowConstants) -> Result<DaggerReport> {
    if geom.params.is_zero_mass() {
        return Err(QlError::Variant(
            "condition (†) needs a positive-mass reference; use (††)".into(),
        ));
    }
    let n = geom.r.len();
    let ric_negative = Margin::positive(geom.ric_nn.iter().map(|v| -v));
    let curvature = Margin::positive(
        (0..n).map(|i| geom.kappa1[i].min(geom.kappa2[i]) - consts.c1 / geom.r[i].powi(2)),
    );
    let radius = Margin::positive(geom.r.iter().map(|r| r - consts.c2));
    Ok(DaggerReport {
        pass: ric_negative.pass && curvature.pass && radius.pass,
        ric_negative,
        curvature,
        radius,
    })
}

/// Image of a zero-mass surface in the flat isotropic chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatChartGeometry {
    pub rho: Vec<f64>,
    pub conf: Vec<f64>,
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub h: Vec<f64>,
    pub cos_theta: Vec<f64>,
}

impl FlatChartGeometry {
    pub fn det(&self) -> Vec<f64> {
        self.kappa1.iter().zip(&self.kappa2).map(|(a, b)| a * b).collect()
    }
}

pub fn flat_chart_geometry(surface: &AxisymSurface) -> Result<FlatChartGeometry> {
    let params = surface.params;
    if !params.is_zero_mass() {
        return Err(QlError::Variant("flat chart requires a zero-mass reference".into()));
    }
    let q = params.qbar;
    let rho: Vec<f64> = surface.profile.iter().map(|&r| rho_of_r(q, r)).collect();
    if rho.iter().any(|p| !(*p > 0.5 * q.abs())) {
        return Err(QlError::Domain("surface leaves the isotropic chart".into()));
    }
    let g = graph_geometry(&rho, |_| (1.0, 0.0));
    let conf = rho.iter().map(|p| 1.0 - q * q / (4.0 * p * p)).collect();
    Ok(FlatChartGeometry {
        rho,
        conf,
        kappa1: g.kappa1,
        kappa2: g.kappa2,
        h: g.h,
        cos_theta: g.cos_theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoubleDaggerReport {
    pub cos_theta: Margin,
    pub rho: Margin,
    pub rho2_kappa: Margin,
    pub gauss_flux: Margin,
    pub pass: bool,
}

/// Condition (††) on the flat-chart image: `cos θ > δ`, `ρ > C`, `ρ²κ̃ > C′`,
/// together with `K > Φ̄²` on the surface itself.
pub fn check_double_dagger(surface: &AxisymSurface, consts: &FlowConstants) -> Result<DoubleDaggerReport> {
    let flat = flat_chart_geometry(surface)?;
    let geom = induced_geometry_unchecked(surface);
    let n = flat.rho.len();
    let cos_theta = Margin::positive(flat.cos_theta.iter().map(|c| c - consts.delta_angle));
    let rho = Margin::positive(flat.rho.iter().map(|p| p - consts.c_big));
    let rho2_kappa = Margin::positive(
        (0..n).map(|i| flat.rho[i].powi(2) * flat.kappa1[i].min(flat.kappa2[i]) - consts.c_prime),
    );
    let gauss_flux = Margin::positive(geom.gauss_flux_margin());
    Ok(DoubleDaggerReport {
        pass: cos_theta.pass && rho.pass && rho2_kappa.pass && gauss_flux.pass,
        cos_theta,
        rho,
        rho2_kappa,
        gauss_flux,
    })
}
