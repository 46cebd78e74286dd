//! Exterior extension of a surface: the unit normal foliation of the
//! reference slice, the warp field `u` solving the prescribed scalar
//! curvature equation, the warped metric `g̃ = u²ds² + σ_s` with its electric
//! field `Ẽ`, and the monotone quasi-local mass trace.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QlError, Result};
use crate::numerics::{d1_polar, d1_polar2, deriv_nonuniform, dopri45, polar_derivative, solve_tridiagonal, Parity};
use crate::reference::{adm_mass_and_charge, FlowConstants, RNParams, RadialProfile};
use crate::surface::{flat_chart_geometry, induced_geometry, induced_geometry_unchecked, AxisymSurface, SurfaceGeometry};

/// Which theorem variant a computation targets: A (charged matter, enhanced
/// energy condition), B (electrovacuum-type, `Q̄ ≤ Q_∞`), C (`|Q̄| = |Q_∞|`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    C,
}

impl std::str::FromStr for Variant {
    type Err = QlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Variant::A),
            "B" => Ok(Variant::B),
            "C" => Ok(Variant::C),
            other => Err(QlError::Variant(format!("unknown variant `{other}` (expected A, B or C)"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Foliation

/// Controls for the unit normal flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Initial flow step (length). Later steps scale with the leaf's minimum
    /// areal radius, so the step count grows only logarithmically in `s_max`.
    pub step: f64,
    /// Stop once `s` reaches this value.
    pub s_max: f64,
    /// Also stop once the minimum areal radius reaches this multiple of the
    /// initial one.
    pub areal_factor: Option<f64>,
    pub max_leaves: usize,
    /// Constants for the zero-mass persistence monitors.
    pub consts: FlowConstants,
}

impl FlowOptions {
    /// Flow until the areal radius has grown by `factor`, with relative step
    /// `step_ratio · r_min`.
    pub fn to_areal_factor(start: &AxisymSurface, step_ratio: f64, factor: f64) -> Self {
        Self {
            step: step_ratio * start.min_radius(),
            s_max: f64::INFINITY,
            areal_factor: Some(factor),
            max_leaves: 200_000,
            consts: FlowConstants::default(),
        }
    }
}

/// Convexity monitors of a leaf (minimum over the leaf).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monitors {
    /// `det A₀ − Ric(ν,ν) + T/2` (solvability of the warp equation).
    pub solvability: f64,
    /// `det A₀ − T/2 + (∂V/∂ν) H_o/V` (monotonicity of the mass trace).
    pub monotonicity: f64,
    pub zero_mass: Option<ZeroMassMonitors>,
}

/// Flat-chart monitors for zero-mass references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroMassMonitors {
    pub cos_theta_min: f64,
    /// `min ρ³H̃_o − 2C₁`.
    pub rho3_h_margin: f64,
    /// `min ρ⁴ det Ã − C′²`.
    pub rho4_det_margin: f64,
    pub rho4_det_min: f64,
    pub h_tilde_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoliationState {
    pub s: f64,
    pub leaf: AxisymSurface,
    pub geom: SurfaceGeometry,
    /// Minimum isotropic radius on the leaf (zero-mass references only).
    pub rho_min: Option<f64>,
    pub monitors: Monitors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Foliation {
    pub params: RNParams,
    pub states: Vec<FoliationState>,
}

impl Foliation {
    pub fn s(&self) -> Vec<f64> {
        self.states.iter().map(|st| st.s).collect()
    }

    pub fn grid_n(&self) -> usize {
        self.states[0].leaf.grid_n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn leaf_monitors(leaf: &AxisymSurface, geom: &SurfaceGeometry, consts: &FlowConstants) -> Result<(Monitors, Option<f64>)> {
    let min = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);
    let solvability = min(geom.solvability_monitor());
    let monotonicity = min(geom.monotonicity_monitor());
    if !leaf.params.is_zero_mass() {
        return Ok((Monitors { solvability, monotonicity, zero_mass: None }, None));
    }
    let flat = flat_chart_geometry(leaf)?;
    let n = flat.rho.len();
    let det = flat.det();
    let zm = ZeroMassMonitors {
        cos_theta_min: flat.cos_theta.iter().cloned().fold(f64::INFINITY, f64::min),
        rho3_h_margin: (0..n).map(|i| flat.rho[i].powi(3) * flat.h[i] - 2.0 * consts.c1).fold(f64::INFINITY, f64::min),
        rho4_det_margin: (0..n)
            .map(|i| flat.rho[i].powi(4) * det[i] - consts.c_prime * consts.c_prime)
            .fold(f64::INFINITY, f64::min),
        rho4_det_min: (0..n).map(|i| flat.rho[i].powi(4) * det[i]).fold(f64::INFINITY, f64::min),
        h_tilde_max: flat.h.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };
    let rho_min = flat.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((Monitors { solvability, monotonicity, zero_mass: Some(zm) }, Some(rho_min)))
}

fn check_monitors(m: &Monitors, s: f64) -> Result<()> {
    if !(m.solvability > 0.0) {
        return Err(QlError::MonitorViolation { monitor: "solvability", s, value: m.solvability });
    }
    if let Some(z) = m.zero_mass {
        if !(z.rho3_h_margin > 0.0) {
            return Err(QlError::MonitorViolation { monitor: "rho3_mean_curvature", s, value: z.rho3_h_margin });
        }
        if !(z.rho4_det_margin > 0.0) {
            return Err(QlError::MonitorViolation { monitor: "rho4_det", s, value: z.rho4_det_margin });
        }
    }
    Ok(())
}

/// Normal speed `∂_s f = √(V² + f_t²/f²)` of the graph under the unit normal flow.
fn flow_rhs(params: &RNParams, f: &[f64], h: f64) -> Result<Vec<f64>> {
    let ft = d1_polar(f, h, Parity::Even);
    f.iter()
        .zip(&ft)
        .map(|(&r, &d)| {
            let v2 = params.potential_sq(r);
            if !(v2 > 0.0) || !r.is_finite() {
                return Err(QlError::Domain(format!("flow left the exterior region (r = {r})")));
            }
            Ok((v2 + d * d / (r * r)).sqrt())
        })
        .collect()
}

fn max_second_fundamental_form(geom: &SurfaceGeometry) -> f64 {
    geom.kappa1
        .iter()
        .zip(&geom.kappa2)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .fold(0.0, f64::max)
}

/// Unit normal flow of `start`, sampled leaf by leaf with RK4 in `s`.
///
/// The flow halts with a monitor violation if the solvability monitor (or,
/// for zero-mass references, a flat-chart persistence monitor) is not
/// positive on a leaf. The monotonicity monitor is recorded but not enforced.
pub fn flow_foliation(start: &AxisymSurface, opts: &FlowOptions) -> Result<Foliation> {
    if !(opts.step > 0.0) {
        return Err(QlError::Domain("flow step must be positive".into()));
    }
    let params = start.params;
    let h = start.polar_step();
    let geom0 = induced_geometry(start)?;
    let r0 = start.min_radius();
    let mut states = Vec::new();
    let push = |states: &mut Vec<FoliationState>, s: f64, leaf: AxisymSurface, geom: SurfaceGeometry| -> Result<()> {
        let (monitors, rho_min) = leaf_monitors(&leaf, &geom, &opts.consts)?;
        check_monitors(&monitors, s)?;
        states.push(FoliationState { s, leaf, geom, rho_min, monitors });
        Ok(())
    };
    push(&mut states, 0.0, start.clone(), geom0)?;
    let r_stop = opts.areal_factor.map(|k| k * r0);
    loop {
        let last = states.last().unwrap();
        let s = last.s;
        if s >= opts.s_max || r_stop.is_some_and(|rs| last.leaf.min_radius() >= rs) {
            break;
        }
        if states.len() >= opts.max_leaves {
            return Err(QlError::Resolution(format!("flow exceeded {} leaves", opts.max_leaves)));
        }
        let mut ds = opts.step * last.leaf.min_radius() / r0;
        if s + ds > opts.s_max {
            ds = opts.s_max - s;
        }
        let amax = max_second_fundamental_form(&last.geom);
        if ds * amax >= 0.1 {
            return Err(QlError::Stability(format!(
                "step {ds:.3e} times max|A| {amax:.3e} = {:.3e} >= 0.1",
                ds * amax
            )));
        }
        let f = &last.leaf.profile;
        let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
        let k1 = flow_rhs(&params, f, h)?;
        let k2 = flow_rhs(&params, &add(f, &k1, 0.5 * ds), h)?;
        let k3 = flow_rhs(&params, &add(f, &k2, 0.5 * ds), h)?;
        let k4 = flow_rhs(&params, &add(f, &k3, ds), h)?;
        let next: Vec<f64> = (0..f.len())
            .map(|i| f[i] + ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let leaf = AxisymSurface::new(params, next)?;
        let geom = induced_geometry_unchecked(&leaf);
        push(&mut states, s + ds, leaf, geom)?;
    }
    Ok(Foliation { params, states })
}

// ---------------------------------------------------------------------------
// Warp equation
//
// With ν = ∂_s − c ∂_t the unit normal of the leaves, the metric
// g̃ = u²ds² + σ_s has R(g̃) = R̄ + (u⁻² − 1)T exactly when
//     H̄ ν(u) = u² Δ_σ u − (u³ − u)(K − Φ̄²).

/// Per-leaf coefficients of the warp equation on the polar grid.
#[derive(Debug, Clone, PartialEq)]
struct WarpCoeffs {
    hbar: Vec<f64>,
    lambda: Vec<f64>,
    shift: Vec<f64>,
    /// Finite-volume cell measure per node (per 2π).
    vol: Vec<f64>,
    /// Face coefficients `w/√E` at half nodes.
    face: Vec<f64>,
    h: f64,
}

impl WarpCoeffs {
    fn from_geometry(g: &SurfaceGeometry) -> Self {
        let n = g.r.len() - 1;
        let h = g.polar_step;
        let sqrt_e: Vec<f64> = g.sigma_tt.iter().map(|v| v.sqrt()).collect();
        let nodal: Vec<f64> = (0..=n).map(|i| g.r[i] * (i as f64 * h).sin() / sqrt_e[i]).collect();
        let nodal = {
            let mut v = nodal;
            v[0] = 0.0;
            v[n] = 0.0;
            v
        };
        let face = (0..n).map(|i| 0.5 * (nodal[i] + nodal[i + 1])).collect();
        let vol = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    sqrt_e[i] * g.r[i] * h * h / 8.0
                } else {
                    sqrt_e[i] * g.r[i] * (i as f64 * h).sin() * h
                }
            })
            .collect();
        Self {
            hbar: g.h_o.clone(),
            lambda: g.gauss_flux_margin(),
            shift: g.shift.clone(),
            vol,
            face,
            h,
        }
    }

    fn combine(parts: &[(f64, &WarpCoeffs)]) -> Self {
        let mix = |sel: &dyn Fn(&WarpCoeffs) -> &Vec<f64>| -> Vec<f64> {
            let len = sel(parts[0].1).len();
            (0..len).map(|i| parts.iter().map(|(w, c)| w * sel(c)[i]).sum()).collect()
        };
        Self {
            hbar: mix(&|c| &c.hbar),
            lambda: mix(&|c| &c.lambda),
            shift: mix(&|c| &c.shift),
            vol: mix(&|c| &c.vol),
            face: mix(&|c| &c.face),
            h: parts[0].1.h,
        }
    }

    fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len() - 1;
        (0..=n)
            .map(|i| {
                let right = if i < n { self.face[i] * (u[i + 1] - u[i]) } else { 0.0 };
                let left = if i > 0 { self.face[i - 1] * (u[i] - u[i - 1]) } else { 0.0 };
                (right - left) / (self.h * self.vol[i])
            })
            .collect()
    }

    /// `∂_s u |_t = [u²Δu − (u³ − u)Λ]/H̄ + c ∂_t u`.
    fn rate(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len() - 1;
        let lap = self.laplacian(u);
        (0..=n)
            .map(|i| {
                let adv = if i == 0 || i == n { 0.0 } else { self.shift[i] * (u[i + 1] - u[i - 1]) / (2.0 * self.h) };
                (u[i] * u[i] * lap[i] - (u[i].powi(3) - u[i]) * self.lambda[i]) / self.hbar[i] + adv
            })
            .collect()
    }

    /// Tridiagonal Jacobian of `rate` as (lower, diag, upper).
    fn jacobian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = u.len() - 1;
        let lap = self.laplacian(u);
        let mut lo = vec![0.0; n + 1];
        let mut di = vec![0.0; n + 1];
        let mut up = vec![0.0; n + 1];
        for i in 0..=n {
            let cv = 1.0 / (self.h * self.vol[i]);
            let fr = if i < n { self.face[i] * cv } else { 0.0 };
            let fl = if i > 0 { self.face[i - 1] * cv } else { 0.0 };
            let u2 = u[i] * u[i];
            let inv_h = 1.0 / self.hbar[i];
            di[i] = (2.0 * u[i] * lap[i] - u2 * (fr + fl) - (3.0 * u2 - 1.0) * self.lambda[i]) * inv_h;
            let adv = if i == 0 || i == n { 0.0 } else { self.shift[i] / (2.0 * self.h) };
            if i < n {
                up[i] = u2 * fr * inv_h + adv;
            }
            if i > 0 {
                lo[i] = u2 * fl * inv_h - adv;
            }
        }
        (lo, di, up)
    }
}

/// Controls for the warp solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpOptions {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl Default for WarpOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-13, max_newton: 30, max_halvings: 12 }
    }
}

/// Warp field sampled on the foliation (`u[k]` lives on leaf `k`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpField {
    pub s: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    /// Number of step halvings needed for Newton convergence.
    pub halvings: usize,
}

struct CoeffTable {
    s: Vec<f64>,
    leaves: Vec<WarpCoeffs>,
}

impl CoeffTable {
    /// Cubic Lagrange interpolation of the leaf coefficients at `s`.
    fn at(&self, s: f64) -> WarpCoeffs {
        let m = self.s.len();
        let k = match self.s.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(k) => return self.leaves[k].clone(),
            Err(k) => k.clamp(1, m - 1) - 1,
        };
        if m < 4 {
            let w = (s - self.s[k]) / (self.s[k + 1] - self.s[k]);
            return WarpCoeffs::combine(&[(1.0 - w, &self.leaves[k]), (w, &self.leaves[k + 1])]);
        }
        let lo = k.saturating_sub(1).min(m - 4);
        let idx: Vec<usize> = (lo..lo + 4).collect();
        let parts: Vec<(f64, &WarpCoeffs)> = idx
            .iter()
            .map(|&j| {
                let w: f64 = idx
                    .iter()
                    .filter(|&&l| l != j)
                    .map(|&l| (s - self.s[l]) / (self.s[j] - self.s[l]))
                    .product();
                (w, &self.leaves[j])
            })
            .collect();
        WarpCoeffs::combine(&parts)
    }
}

/// One implicit Euler step `v = u + ds·G_b(v)` solved by Newton.
fn implicit_euler(b: &WarpCoeffs, u: &[f64], ds: f64, opts: &WarpOptions) -> Option<Vec<f64>> {
    let n = u.len();
    let mut v = u.to_vec();
    for _ in 0..opts.max_newton {
        let gb = b.rate(&v);
        let res: Vec<f64> = (0..n).map(|i| -(v[i] - u[i] - ds * gb[i])).collect();
        let (lo, di, up) = b.jacobian(&v);
        let lo: Vec<f64> = lo.iter().map(|x| -ds * x).collect();
        let up: Vec<f64> = up.iter().map(|x| -ds * x).collect();
        let di: Vec<f64> = di.iter().map(|x| 1.0 - ds * x).collect();
        let delta = solve_tridiagonal(&lo, &di, &up, &res).ok()?;
        let mut change = 0.0f64;
        for i in 0..n {
            v[i] += delta[i];
            change = change.max(delta[i].abs() / v[i].abs().max(1.0));
        }
        if !change.is_finite() || v.iter().any(|x| !(*x > 0.0)) {
            return None;
        }
        if change < opts.newton_tol {
            return Some(v);
        }
    }
    None
}

/// Step-number sequence of the extrapolated implicit Euler scheme; with
/// four levels the extrapolated step is fourth order and damps stiff
/// (grid-scale angular) modes instead of amplifying them.
const EXTRAPOLATION_LEVELS: [usize; 4] = [1, 2, 3, 4];

/// One extrapolated implicit Euler step over `[sa, sb]`, halving on failure.
fn warp_step(
    table: &CoeffTable,
    sa: f64,
    sb: f64,
    u: &[f64],
    opts: &WarpOptions,
    depth: usize,
    halvings: &mut usize,
) -> Result<Vec<f64>> {
    let ds = sb - sa;
    let attempt = || -> Option<Vec<f64>> {
        let mut tableau: Vec<Vec<Vec<f64>>> = Vec::new();
        for (j, &nj) in EXTRAPOLATION_LEVELS.iter().enumerate() {
            let h = ds / nj as f64;
            let mut v = u.to_vec();
            for step in 1..=nj {
                let s = if step == nj { sb } else { sa + step as f64 * h };
                v = implicit_euler(&table.at(s), &v, h, opts)?;
            }
            let mut row = vec![v];
            for k in 1..=j {
                let ratio = nj as f64 / EXTRAPOLATION_LEVELS[j - k] as f64 - 1.0;
                let prev = &tableau[j - 1][k - 1];
                let cur = &row[k - 1];
                row.push(cur.iter().zip(prev).map(|(c, p)| c + (c - p) / ratio).collect());
            }
            tableau.push(row);
        }
        let out = tableau.pop()?.pop()?;
        out.iter().all(|x| *x > 0.0).then_some(out)
    };
    if let Some(v) = attempt() {
        return Ok(v);
    }
    if depth >= opts.max_halvings {
        // Distinguish a genuine collapse of u from plain non-convergence.
        let predictor: Vec<f64> = table.at(sa).rate(u).iter().zip(u).map(|(g, x)| x + ds * g).collect();
        if predictor.iter().any(|x| *x <= 0.0) {
            return Err(QlError::BlowUp { s: sb });
        }
        return Err(QlError::Solver(format!("Newton failed on [{sa:.6e}, {sb:.6e}] after {depth} halvings")));
    }
    *halvings += 1;
    let sm = 0.5 * (sa + sb);
    let mid = warp_step(table, sa, sm, u, opts, depth + 1, halvings)?;
    warp_step(table, sm, sb, &mid, opts, depth + 1, halvings)
}

/// March the warp equation outward from the boundary values `u0`.
pub fn solve_prescribed_curvature(foliation: &Foliation, u0: &[f64], opts: &WarpOptions) -> Result<WarpField> {
    let n = foliation.grid_n();
    if u0.len() != n + 1 {
        return Err(QlError::Domain(format!("u0 has {} samples, leaves have {}", u0.len(), n + 1)));
    }
    if u0.iter().any(|x| !(*x > 0.0)) {
        return Err(QlError::Domain("boundary warp must be positive".into()));
    }
    for st in &foliation.states {
        if !(st.monitors.solvability > 0.0) {
            return Err(QlError::MonitorViolation { monitor: "solvability", s: st.s, value: st.monitors.solvability });
        }
    }
    let table = CoeffTable {
        s: foliation.s(),
        leaves: foliation.states.iter().map(|st| WarpCoeffs::from_geometry(&st.geom)).collect(),
    };
    let mut u = vec![u0.to_vec()];
    let mut halvings = 0;
    for k in 1..table.s.len() {
        let next = warp_step(&table, table.s[k - 1], table.s[k], &u[k - 1], opts, 0, &mut halvings)?;
        u.push(next);
    }
    Ok(WarpField { s: table.s, u, halvings })
}

/// Closed-form spherical warp: `1 − u⁻² = (1 − u₀⁻²)·r₀V₀²/(rV²)`.
pub fn spherical_warp_closed_form(params: &RNParams, r0: f64, u0: f64, r: f64) -> f64 {
    let c = (1.0 - u0.powi(-2)) * r0 * params.potential_sq(r0);
    (1.0 - c / (r * params.potential_sq(r))).powf(-0.5)
}

/// Spherical reduction of the warp equation integrated in the areal radius
/// with an adaptive Dormand–Prince scheme (independent oracle).
pub fn spherical_warp_ode(params: &RNParams, r0: f64, u0: f64, radii: &[f64]) -> Result<Vec<f64>> {
    let p = *params;
    let rhs = move |r: f64, y: &[f64]| -> Vec<f64> {
        let u = y[0];
        let lambda = 1.0 / (r * r) - p.qbar * p.qbar / r.powi(4);
        vec![-(u.powi(3) - u) * lambda * r / (2.0 * p.potential_sq(r))]
    };
    let out = dopri45(rhs, r0, &[u0], radii, 1e-12, 1e-14)?;
    Ok(out.into_iter().map(|y| y[0]).collect())
}

/// Boundary warp matching the interior mean curvature: `u₀ = H_o/(H − 2|Φ̄ − Φ|)`
/// for variant A and `u₀ = H_o/H` for variants B/C.
pub fn boundary_warp_from_interior(h_o: &[f64], h: &[f64], phi_bar: &[f64], phi: &[f64], variant: Variant) -> Result<Vec<f64>> {
    (0..h_o.len())
        .map(|i| {
            if !(h_o[i] > 0.0) {
                return Err(QlError::Hypothesis(format!("H_o = {} is not positive at grid point {i}", h_o[i])));
            }
            let denom = match variant {
                Variant::A => h[i] - 2.0 * (phi_bar[i] - phi[i]).abs(),
                Variant::B | Variant::C => h[i],
            };
            if !(denom > 0.0) {
                let what = match variant {
                    Variant::A => format!("H = {} <= 2|Φ̄ − Φ| = {}", h[i], 2.0 * (phi_bar[i] - phi[i]).abs()),
                    _ => format!("H = {} is not positive", h[i]),
                };
                return Err(QlError::Hypothesis(format!("{what} at grid point {i}")));
            }
            Ok(h_o[i] / denom)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Finite-difference curvature oracle

/// Components of `g̃` in the `(s, t)` chart plus the axial warp `w` (with
/// `g̃ = g_ss ds² + 2 g_st ds dt + g_tt dt² + w² dφ²`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartMetric {
    pub g_ss: Vec<f64>,
    pub g_st: Vec<f64>,
    pub g_tt: Vec<f64>,
    pub w: Vec<f64>,
}

fn chart_metric(state: &FoliationState, u: &[f64]) -> ChartMetric {
    let f = &state.leaf.profile;
    let n = f.len() - 1;
    let h = state.leaf.polar_step();
    let ft = polar_derivative(f, h, Parity::Even, 1, ORACLE_HALF_WIDTH);
    let mut m = ChartMetric { g_ss: vec![0.0; n + 1], g_st: vec![0.0; n + 1], g_tt: vec![0.0; n + 1], w: vec![0.0; n + 1] };
    for i in 0..=n {
        let (a, _) = state.leaf.params.radial_factor(f[i]);
        let fs = state.geom.normal_speed[i];
        let fti = if i == 0 || i == n { 0.0 } else { ft[i] };
        m.g_ss[i] = a * a * fs * fs + u[i] * u[i] - 1.0;
        m.g_st[i] = a * a * fs * fti;
        m.g_tt[i] = a * a * fti * fti + f[i] * f[i];
        m.w[i] = f[i] * (i as f64 * h).sin();
    }
    m
}

/// Scalar curvature samples at interior leaves and interior polar nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSamples {
    pub leaf_indices: Vec<usize>,
    pub t_indices: Vec<usize>,
    /// `values[j][k]` at leaf `leaf_indices[j]`, angle `t_indices[k]`.
    pub values: Vec<Vec<f64>>,
}

type Grid = Vec<Vec<f64>>;

fn ds_grid(s: &[f64], y: &Grid, order: usize) -> Grid {
    let m = y.len();
    let n = y[0].len();
    let mut out = vec![vec![0.0; n]; m];
    for i in 0..n {
        let col: Vec<f64> = y.iter().map(|row| row[i]).collect();
        let d = deriv_nonuniform(s, &col, order, 5);
        for k in 0..m {
            out[k][i] = d[k];
        }
    }
    out
}

/// Angular stencil half-width of the curvature oracle (10th order).
const ORACLE_HALF_WIDTH: usize = 5;

fn dt_grid(y: &Grid, h: f64, parity: Parity, second: bool) -> Grid {
    y.iter()
        .map(|row| polar_derivative(row, h, parity, if second { 2 } else { 1 }, ORACLE_HALF_WIDTH))
        .collect()
}

/// Independent finite-difference scalar curvature of `g̃` (Brioschi formula
/// for the `(s,t)` block plus the axial warp term `−2Δw/w`).
pub fn warped_scalar_curvature_oracle(foliation: &Foliation, u: &[Vec<f64>]) -> Result<CurvatureSamples> {
    let m = foliation.len();
    let n = foliation.grid_n();
    if m < 9 || n < 8 {
        return Err(QlError::Resolution(format!("oracle needs >= 9 leaves and grid_n >= 8 (got {m}, {n})")));
    }
    if u.len() != m {
        return Err(QlError::Domain("warp field does not match the foliation".into()));
    }
    let s = foliation.s();
    let h = foliation.states[0].leaf.polar_step();
    let metrics: Vec<ChartMetric> = foliation.states.iter().zip(u).map(|(st, uk)| chart_metric(st, uk)).collect();
    let grab = |sel: &dyn Fn(&ChartMetric) -> &Vec<f64>| -> Grid { metrics.iter().map(|c| sel(c).clone()).collect() };
    let (e, f, g, w) = (grab(&|c| &c.g_ss), grab(&|c| &c.g_st), grab(&|c| &c.g_tt), grab(&|c| &c.w));
    let (e_s, f_s, g_s, w_s) = (ds_grid(&s, &e, 1), ds_grid(&s, &f, 1), ds_grid(&s, &g, 1), ds_grid(&s, &w, 1));
    let g_ss = ds_grid(&s, &g, 2);
    let e_t = dt_grid(&e, h, Parity::Even, false);
    let e_tt = dt_grid(&e, h, Parity::Even, true);
    let f_t = dt_grid(&f, h, Parity::Odd, false);
    let f_st = ds_grid(&s, &f_t, 1);
    let g_t = dt_grid(&g, h, Parity::Even, false);
    let w_t = dt_grid(&w, h, Parity::Odd, false);
    // Axial Laplacian flux components.
    let mut vs = vec![vec![0.0; n + 1]; m];
    let mut vt = vec![vec![0.0; n + 1]; m];
    for k in 0..m {
        for i in 0..=n {
            let det = e[k][i] * g[k][i] - f[k][i] * f[k][i];
            let sq = det.sqrt();
            let (hss, hst, htt) = (g[k][i] / det, -f[k][i] / det, e[k][i] / det);
            vs[k][i] = sq * (hss * w_s[k][i] + hst * w_t[k][i]);
            vt[k][i] = sq * (hst * w_s[k][i] + htt * w_t[k][i]);
        }
    }
    let vs_s = ds_grid(&s, &vs, 1);
    let vt_t = dt_grid(&vt, h, Parity::Even, false);
    // Nested s-derivatives inherit one-sided stencils two leaves deep.
    let leaf_indices: Vec<usize> = (3..m - 3).collect();
    let t_indices: Vec<usize> = (1..n).collect();
    let values = leaf_indices
        .iter()
        .map(|&k| {
            t_indices
                .iter()
                .map(|&i| {
                    let (ee, ff, gg) = (e[k][i], f[k][i], g[k][i]);
                    let det = ee * gg - ff * ff;
                    let m1 = [
                        [-0.5 * e_tt[k][i] + f_st[k][i] - 0.5 * g_ss[k][i], 0.5 * e_s[k][i], f_s[k][i] - 0.5 * e_t[k][i]],
                        [f_t[k][i] - 0.5 * g_s[k][i], ee, ff],
                        [0.5 * g_t[k][i], ff, gg],
                    ];
                    let m2 = [[0.0, 0.5 * e_t[k][i], 0.5 * g_s[k][i]], [0.5 * e_t[k][i], ee, ff], [0.5 * g_s[k][i], ff, gg]];
                    let kh = (det3(&m1) - det3(&m2)) / (det * det);
                    let lap_w = (vs_s[k][i] + vt_t[k][i]) / det.sqrt();
                    2.0 * kh - 2.0 * lap_w / w[k][i]
                })
                .collect()
        })
        .collect();
    Ok(CurvatureSamples { leaf_indices, t_indices, values })
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Prescribed value `R̄ + (u⁻² − 1)T` on the oracle's sample points.
pub fn prescribed_curvature(foliation: &Foliation, u: &[Vec<f64>], samples: &CurvatureSamples) -> Vec<Vec<f64>> {
    samples
        .leaf_indices
        .iter()
        .map(|&k| {
            let g = &foliation.states[k].geom;
            samples
                .t_indices
                .iter()
                .map(|&i| g.rbar[i] + (u[k][i].powi(-2) - 1.0) * g.t_field[i])
                .collect()
        })
        .collect()
}

/// Worst `|R(g̃) − R̄ − (u⁻²−1)T| / (1 + |R̄|)` over the oracle samples.
pub fn curvature_residual(foliation: &Foliation, u: &[Vec<f64>]) -> Result<f64> {
    let samples = warped_scalar_curvature_oracle(foliation, u)?;
    let target = prescribed_curvature(foliation, u, &samples);
    let mut worst = 0.0f64;
    for (j, &k) in samples.leaf_indices.iter().enumerate() {
        for (l, &i) in samples.t_indices.iter().enumerate() {
            let rbar = foliation.states[k].geom.rbar[i];
            worst = worst.max((samples.values[j][l] - target[j][l]).abs() / (1.0 + rbar.abs()));
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Assembly

/// The extension field `Ẽ = (1/u)(Ē^s ∂_s + Ē^T)` in `(s, t)` components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedField {
    pub e_s: Vec<f64>,
    pub e_t: Vec<f64>,
    /// `|Ẽ|²_g̃ = Φ̄² + |Ē^T|²/u²`.
    pub norm2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionResult {
    pub params: RNParams,
    pub s: Vec<f64>,
    /// Areal radius `√(|Σ_s|/4π)` of each leaf.
    pub areal_radius: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub g_tilde: Vec<ChartMetric>,
    pub e_tilde: Vec<ExtendedField>,
    /// `H̃ = H_o/u` on the inner boundary.
    pub h_tilde_boundary: Vec<f64>,
    /// `m_QL(s) = (1/8π)∫ V H_o (1 − 1/u) dΣ_s`.
    pub mass_trace: Vec<f64>,
    /// The same integral without the `1/8π` factor.
    pub mass_trace_raw: Vec<f64>,
    /// Monotonicity monitor per leaf.
    pub monitor: Vec<f64>,
    /// Charge of `Ẽ` through each leaf.
    pub charge: Vec<f64>,
    pub m_adm: f64,
    pub q_inf: f64,
    pub mbar: f64,
    /// Worst `|2|Ẽ|² − R̄ − (u⁻²−1)T|` (exact identity).
    pub identity_residual: f64,
    /// Worst `|∇·Ẽ|` away from the poles and the two end leaves.
    pub divergence_max: f64,
    /// Fitted exponent `p` in `max|u − 1| ~ r^p` over the outer decade.
    pub tail_exponent: Option<f64>,
}

/// Divergence of `Ẽ` in `g̃` (second-order differences), on leaves
/// `1..m−1` and polar nodes `1..n−1`.
pub fn extension_divergence(foliation: &Foliation, u: &[Vec<f64>], field: &[ExtendedField]) -> Vec<Vec<f64>> {
    let m = foliation.len();
    let n = foliation.grid_n();
    let s = foliation.s();
    let h = foliation.states[0].leaf.polar_step();
    let mut xs = vec![vec![0.0; n + 1]; m];
    let mut xt = vec![vec![0.0; n + 1]; m];
    let mut vol = vec![vec![0.0; n + 1]; m];
    for k in 0..m {
        let cm = chart_metric(&foliation.states[k], &u[k]);
        for i in 0..=n {
            let d = (cm.g_ss[i] * cm.g_tt[i] - cm.g_st[i] * cm.g_st[i]).sqrt() * cm.w[i];
            vol[k][i] = d;
            xs[k][i] = d * field[k].e_s[i];
            xt[k][i] = d * field[k].e_t[i];
        }
    }
    let dxs = ds_grid3(&s, &xs);
    (1..m - 1)
        .map(|k| {
            let dxt = d1_polar2(&xt[k], h, Parity::Even);
            (1..n).map(|i| (dxs[k][i] + dxt[i]) / vol[k][i]).collect()
        })
        .collect()
}

/// Three-point (second-order) first derivative in `s` on a nonuniform grid.
fn ds_grid3(s: &[f64], y: &Grid) -> Grid {
    let n = y[0].len();
    let m = y.len();
    let mut out = vec![vec![0.0; n]; m];
    for i in 0..n {
        let col: Vec<f64> = y.iter().map(|row| row[i]).collect();
        let d = deriv_nonuniform(s, &col, 1, 3);
        for k in 0..m {
            out[k][i] = d[k];
        }
    }
    out
}

fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, v)| **v > 1e-14).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Assemble `(g̃, Ẽ)`, verify the exact field identity, and compute the
/// mass trace and the ADM mass of the extension.
pub fn assemble_charged_extension(foliation: &Foliation, warp: &WarpField) -> Result<ExtensionResult> {
    let m = foliation.len();
    let u = &warp.u;
    if u.len() != m {
        return Err(QlError::Domain("warp field does not match the foliation".into()));
    }
    let params = foliation.params;
    let mut e_tilde = Vec::with_capacity(m);
    let mut g_tilde = Vec::with_capacity(m);
    let mut identity_residual = 0.0f64;
    let mut mass_trace_raw = Vec::with_capacity(m);
    let mut profile = RadialProfile { x: vec![], a: vec![], b: vec![], q: vec![] };
    let mut charge = Vec::with_capacity(m);
    for (k, st) in foliation.states.iter().enumerate() {
        let g = &st.geom;
        let uk = &u[k];
        if uk.iter().any(|x| !(*x > 0.0)) {
            return Err(QlError::BlowUp { s: st.s });
        }
        let n = g.r.len() - 1;
        let h = g.polar_step;
        let ft = d1_polar(&st.leaf.profile, h, Parity::Even);
        let mut field = ExtendedField { e_s: vec![0.0; n + 1], e_t: vec![0.0; n + 1], norm2: vec![0.0; n + 1] };
        for i in 0..=n {
            let (a, _) = params.radial_factor(g.r[i]);
            let fti = if i == 0 || i == n { 0.0 } else { ft[i] };
            let tangential = params.qbar * a * fti / (g.r[i] * g.r[i] * g.sigma_tt[i]);
            field.e_s[i] = g.phi_bar[i] / uk[i];
            field.e_t[i] = (tangential - g.phi_bar[i] * g.shift[i]) / uk[i];
            field.norm2[i] = g.phi_bar[i].powi(2) + (g.e_t_mag[i] / uk[i]).powi(2);
            let target = g.rbar[i] + (uk[i].powi(-2) - 1.0) * g.t_field[i];
            identity_residual = identity_residual.max((2.0 * field.norm2[i] - target).abs() / (1.0 + target.abs()));
        }
        let integrand: Vec<f64> = (0..=n).map(|i| g.v[i] * g.h_o[i] * (1.0 - 1.0 / uk[i])).collect();
        mass_trace_raw.push(g.integrate(&integrand));
        let ubar = g.integrate(uk) / g.total_area;
        profile.x.push(st.s);
        profile.a.push(ubar);
        profile.b.push((g.total_area / (4.0 * PI)).sqrt());
        profile.q.push(g.charge);
        charge.push(g.charge);
        e_tilde.push(field);
        g_tilde.push(chart_metric(st, uk));
    }
    if identity_residual > 1e-10 {
        return Err(QlError::IdentityFault(format!("2|Ẽ|² − R̄ − (u⁻²−1)T reached {identity_residual:.3e}")));
    }
    let divergence_max = if m >= 3 {
        extension_divergence(foliation, u, &e_tilde)
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    } else {
        0.0
    };
    let (m_adm, q_inf) = adm_mass_and_charge(&profile)?;
    let b_out = *profile.b.last().unwrap();
    let (rx, ry): (Vec<f64>, Vec<f64>) = (0..m)
        .filter(|&k| profile.b[k] >= 0.1 * b_out)
        .map(|k| (profile.b[k], u[k].iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max)))
        .unzip();
    let g0 = &foliation.states[0].geom;
    Ok(ExtensionResult {
        params,
        s: foliation.s(),
        areal_radius: profile.b.clone(),
        u: u.clone(),
        g_tilde,
        e_tilde,
        h_tilde_boundary: g0.h_o.iter().zip(&u[0]).map(|(h, x)| h / x).collect(),
        mass_trace: mass_trace_raw.iter().map(|v| v / (8.0 * PI)).collect(),
        mass_trace_raw,
        monitor: foliation.states.iter().map(|st| st.monitors.monotonicity).collect(),
        charge,
        m_adm,
        q_inf,
        mbar: params.mbar,
        identity_residual,
        divergence_max,
        tail_exponent: log_slope(&rx, &ry),
    })
}

/// One sample of the mass trace with the monotonicity monitor on its leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub s: f64,
    pub value: f64,
    pub monitor: f64,
}

pub fn monotone_mass_trace(ext: &ExtensionResult) -> Vec<TracePoint> {
    (0..ext.s.len())
        .map(|k| TracePoint { s: ext.s[k], value: ext.mass_trace[k], monitor: ext.monitor[k] })
        .collect()
}

/// Indices `k` where the trace increases from `k` to `k+1` by more than
/// `slack·scale` although the monitor is positive on both leaves.
pub fn trace_violations(trace: &[TracePoint], slack: f64) -> Vec<usize> {
    let scale = trace.iter().fold(0.0f64, |m, p| m.max(p.value.abs())).max(1e-300);
    (0..trace.len().saturating_sub(1))
        .filter(|&k| {
            trace[k].monitor > 0.0 && trace[k + 1].monitor > 0.0 && trace[k + 1].value - trace[k].value > slack * scale
        })
        .collect()
}

/// Flow, solve and assemble in one call.
pub fn build_extension(start: &AxisymSurface, u0: &[f64], flow: &FlowOptions, warp: &WarpOptions) -> Result<(Foliation, ExtensionResult)> {
    let foliation = flow_foliation(start, flow).map_err(|e| e.at_stage("flow"))?;
    let field = solve_prescribed_curvature(&foliation, u0, warp).map_err(|e| e.at_stage("warp"))?;
    let ext = assemble_charged_extension(&foliation, &field).map_err(|e| e.at_stage("assemble"))?;
    Ok((foliation, ext))
}
