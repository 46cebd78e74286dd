//! Scenario construction and end-to-end verification of the quasi-local
//! charged Penrose inequalities on rotationally symmetric data.
//!
//! A [`Scenario`] describes a compact region `Ω` between a minimal sphere
//! `Σ_H` and an outer sphere `Σ`, a reference RN manifold and a variant.
//! [`evaluate_inequality`] checks the hypotheses and evaluates both sides;
//! [`pipeline_verify`] additionally runs the constructive chain (extension,
//! corner smoothing, repairs, ADM mass) and checks it link by link.
//!
//! Charges are handled in a fixed orientation: if `Q̄ < 0` every charge and
//! flux is flipped before evaluation (see [`Scenario::orientation`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::corner::{
    check_corner_conditions, conformal_repair_with_field, divergence_repair, inner_scale, profile_scalar_curvature, smooth_corner,
    ChargedCornerData, CollarSide, CornerConditionReport,
};
use crate::error::{QlError, Result};
use crate::extension::{
    boundary_warp_from_interior, build_extension, monotone_mass_trace, spherical_warp_closed_form, FlowOptions,
    TracePoint, Variant, WarpOptions,
};
use crate::numerics::{dopri45, linspace};
use crate::reference::{horizon_radius, FlowConstants, RNParams};
use crate::surface::{check_dagger, check_double_dagger, flat_chart_geometry, induced_geometry, round_sphere_n, SurfaceGeometry};

// ---------------------------------------------------------------------------
// Scenario description

/// The compact region `Ω`. Radii are areal radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteriorSpec {
    /// RN(mass, charge) between its outer horizon and the outer sphere.
    /// Missing mass/charge default to the reference values. Give exactly one
    /// of `r_b` and `r_b_factor` (outer radius in units of the horizon radius).
    Rn {
        #[serde(default)]
        mass: Option<f64>,
        #[serde(default)]
        charge: Option<f64>,
        #[serde(default)]
        r_b: Option<f64>,
        #[serde(default)]
        r_b_factor: Option<f64>,
    },
    /// Charged dust shell: the enclosed charge moves from `q_h` to `q_b`
    /// across `[shell_inner, shell_outer]` (quintic smoothstep in `r`) and
    /// the metric solves the radial Hamiltonian constraint with energy
    /// density `2|E|² + 4|∇·E| + density·sin²(π t)` on the shell.
    DustShell {
        r_h: f64,
        q_h: f64,
        q_b: f64,
        shell_inner: f64,
        shell_outer: f64,
        density: f64,
        r_b: f64,
    },
}

/// Discretisation and tolerance settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Polar intervals on `Σ` and the leaves (even, ≥ 8).
    pub grid_n: usize,
    /// Samples of the interior profile.
    pub side_samples: usize,
    /// Flow step relative to the leaf radius.
    pub step_ratio: f64,
    /// Flow until the areal radius grows by this factor...
    pub areal_factor: f64,
    /// ...or until this flow parameter, if given.
    pub s_max: Option<f64>,
    /// Areal radius where the glued manifold is truncated for the ADM mass.
    pub collar_radius: f64,
    /// Smoothing scales, coarse to fine.
    pub deltas: Vec<f64>,
    /// Field damping `ε` of the conformal repair.
    pub eps: f64,
    /// Absolute tolerance floor for every inequality check.
    pub tol: f64,
    /// Relative slack for trace monotonicity.
    pub trace_slack: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            grid_n: 32,
            side_samples: 2000,
            step_ratio: 0.02,
            areal_factor: 1000.0,
            s_max: None,
            collar_radius: 1e5,
            deltas: vec![1e-1, 1e-2, 1e-3],
            eps: 1e-3,
            tol: 1e-8,
            trace_slack: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub variant: Variant,
    pub reference: RNParams,
    pub interior: InteriorSpec,
    /// Constant boundary warp overriding the variant's choice.
    #[serde(default)]
    pub u0: Option<f64>,
    #[serde(default)]
    pub constants: FlowConstants,
    #[serde(default)]
    pub numerics: Numerics,
}

/// Fully resolved interior parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ResolvedInterior {
    Rn { params: RNParams, r_b: f64 },
    DustShell { r_h: f64, q_h: f64, q_b: f64, shell_inner: f64, shell_outer: f64, density: f64, r_b: f64 },
}

impl ResolvedInterior {
    pub fn boundary_radius(&self) -> f64 {
        match *self {
            ResolvedInterior::Rn { r_b, .. } | ResolvedInterior::DustShell { r_b, .. } => r_b,
        }
    }

    fn flipped(self, sign: f64) -> Self {
        match self {
            ResolvedInterior::Rn { params, r_b } => {
                ResolvedInterior::Rn { params: RNParams { qbar: sign * params.qbar, ..params }, r_b }
            }
            ResolvedInterior::DustShell { r_h, q_h, q_b, shell_inner, shell_outer, density, r_b } => {
                ResolvedInterior::DustShell { r_h, q_h: sign * q_h, q_b: sign * q_b, shell_inner, shell_outer, density, r_b }
            }
        }
    }
}

fn positive(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(QlError::Domain(format!("{what} must be finite and positive, got {v}")))
    }
}

impl Scenario {
    /// Check all fields without building anything.
    pub fn validate(&self) -> Result<()> {
        RNParams::new(self.reference.mbar, self.reference.qbar)?;
        self.constants.validate()?;
        let n = &self.numerics;
        if n.grid_n < 8 || n.grid_n % 2 != 0 {
            return Err(QlError::Domain(format!("grid_n must be even and >= 8, got {}", n.grid_n)));
        }
        if n.side_samples < 64 {
            return Err(QlError::Domain(format!("side_samples must be >= 64, got {}", n.side_samples)));
        }
        positive("step_ratio", n.step_ratio)?;
        if !(n.areal_factor > 1.0) {
            return Err(QlError::Domain(format!("areal_factor must exceed 1, got {}", n.areal_factor)));
        }
        if let Some(s) = n.s_max {
            positive("s_max", s)?;
        }
        positive("collar_radius", n.collar_radius)?;
        if n.deltas.is_empty() {
            return Err(QlError::Domain("the smoothing schedule `deltas` is empty".into()));
        }
        for &d in &n.deltas {
            positive("delta", d)?;
        }
        if !(n.eps > 0.0 && n.eps < 1.0) {
            return Err(QlError::Domain(format!("eps must lie in (0, 1), got {}", n.eps)));
        }
        positive("tol", n.tol)?;
        positive("trace_slack", n.trace_slack)?;
        if let Some(u0) = self.u0 {
            positive("u0", u0)?;
        }
        self.resolve_interior().map(|_| ())
    }

    /// `−1` if the reference charge is negative (all charges get flipped),
    /// else `+1`.
    pub fn orientation(&self) -> f64 {
        if self.reference.qbar < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn resolve_interior(&self) -> Result<ResolvedInterior> {
        match self.interior {
            InteriorSpec::Rn { mass, charge, r_b, r_b_factor } => {
                let params = RNParams::new(mass.unwrap_or(self.reference.mbar), charge.unwrap_or(self.reference.qbar))?;
                let rp = horizon_radius(&params)
                    .ok_or_else(|| QlError::Domain(format!("interior RN({}, {}) has no horizon", params.mbar, params.qbar)))?;
                let r_b = match (r_b, r_b_factor) {
                    (Some(r), None) => r,
                    (None, Some(f)) => f * rp,
                    _ => return Err(QlError::Domain("give exactly one of interior.r_b and interior.r_b_factor".into())),
                };
                if !(r_b > rp) {
                    return Err(QlError::Domain(format!("outer radius {r_b} is not outside the interior horizon {rp}")));
                }
                Ok(ResolvedInterior::Rn { params, r_b })
            }
            InteriorSpec::DustShell { r_h, q_h, q_b, shell_inner, shell_outer, density, r_b } => {
                positive("r_h", r_h)?;
                if !(r_h < shell_inner && shell_inner < shell_outer && shell_outer <= r_b) {
                    return Err(QlError::Domain(format!(
                        "need r_h < shell_inner < shell_outer <= r_b, got {r_h}, {shell_inner}, {shell_outer}, {r_b}"
                    )));
                }
                if ![q_h, q_b, density].iter().all(|v| v.is_finite()) {
                    return Err(QlError::Domain("non-finite dust-shell parameters".into()));
                }
                Ok(ResolvedInterior::DustShell { r_h, q_h, q_b, shell_inner, shell_outer, density, r_b })
            }
        }
    }

    /// Set a scalar parameter by name (used by sweeps).
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let bad = || QlError::Domain(format!("parameter `{name}` does not apply to this scenario"));
        match name {
            "mbar" => self.reference.mbar = value,
            "qbar" => self.reference.qbar = value,
            "u0" => self.u0 = Some(value),
            "delta" => self.numerics.deltas = vec![value],
            "eps" => self.numerics.eps = value,
            "tol" => self.numerics.tol = value,
            "grid_n" => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(QlError::Domain(format!("grid_n must be a whole number, got {value}")));
                }
                self.numerics.grid_n = value as usize
            }
            "areal_factor" => self.numerics.areal_factor = value,
            "r_b" => match &mut self.interior {
                InteriorSpec::Rn { r_b, r_b_factor, .. } => {
                    *r_b = Some(value);
                    *r_b_factor = None;
                }
                InteriorSpec::DustShell { r_b, .. } => *r_b = value,
            },
            "r_b_factor" => match &mut self.interior {
                InteriorSpec::Rn { r_b, r_b_factor, .. } => {
                    *r_b = None;
                    *r_b_factor = Some(value);
                }
                _ => return Err(bad()),
            },
            "mass" | "interior.mass" => match &mut self.interior {
                InteriorSpec::Rn { mass, .. } => *mass = Some(value),
                _ => return Err(bad()),
            },
            "charge" | "interior.charge" => match &mut self.interior {
                InteriorSpec::Rn { charge, .. } => *charge = Some(value),
                _ => return Err(bad()),
            },
            "r_h" | "q_h" | "q_b" | "shell_inner" | "shell_outer" | "density" => match &mut self.interior {
                InteriorSpec::DustShell { r_h, q_h, q_b, shell_inner, shell_outer, density, .. } => {
                    let slot = match name {
                        "r_h" => r_h,
                        "q_h" => q_h,
                        "q_b" => q_b,
                        "shell_inner" => shell_inner,
                        "shell_outer" => shell_outer,
                        _ => density,
                    };
                    *slot = value;
                }
                _ => return Err(bad()),
            },
            _ => return Err(QlError::Domain(format!("unknown sweep parameter `{name}`"))),
        }
        Ok(())
    }
}

/// Names accepted by [`Scenario::set_param`].
pub const SWEEP_PARAMETERS: &[&str] = &[
    "mbar", "qbar", "u0", "delta", "eps", "tol", "grid_n", "areal_factor", "r_b", "r_b_factor", "mass", "charge", "r_h",
    "q_h", "q_b", "shell_inner", "shell_outer", "density",
];

// ---------------------------------------------------------------------------
// Interior construction

/// A value together with where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Located {
    pub value: f64,
    pub s: f64,
    pub r: f64,
}

/// Pointwise energy-condition margins of `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    /// `R − 2|E|²`.
    pub basic: Vec<f64>,
    /// `R − 2|E|² − 4|∇·E|`.
    pub enhanced: Vec<f64>,
    /// `∇·E`.
    pub divergence: Vec<f64>,
    pub worst_basic: Located,
    pub worst_enhanced: Located,
    pub div_max: f64,
    pub div_min: f64,
    /// Scale used for the energy tolerances (`max |R|`, `max 2|E|²`, `max 1/r²`).
    pub scale: f64,
}

impl EnergyReport {
    fn from_side(side: &CollarSide) -> Self {
        let n = side.len();
        let mut basic = Vec::with_capacity(n);
        let mut enhanced = Vec::with_capacity(n);
        let mut divergence = Vec::with_capacity(n);
        let mut scale = 0.0f64;
        for k in 0..n {
            let (b, b_s, b_ss, q, q_s) = (side.b[k], side.b_s[k], side.b_ss[k], side.q[k], side.q_s[k]);
            let r = profile_scalar_curvature(b, b_s, b_ss);
            let e2 = 2.0 * (q / (b * b)).powi(2);
            let div = q_s / (b * b);
            basic.push(r - e2);
            enhanced.push(r - e2 - 4.0 * div.abs());
            divergence.push(div);
            scale = scale.max(r.abs()).max(e2).max(1.0 / (b * b));
        }
        let worst = |v: &[f64]| {
            let k = (0..n).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap_or(0);
            Located { value: v[k], s: side.s[k], r: side.b[k] }
        };
        Self {
            worst_basic: worst(&basic),
            worst_enhanced: worst(&enhanced),
            div_max: divergence.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            div_min: divergence.iter().copied().fold(f64::INFINITY, f64::min),
            s: side.s.clone(),
            r: side.b.clone(),
            basic,
            enhanced,
            divergence,
            scale,
        }
    }

    /// Absolute tolerance for the pointwise energy margins.
    pub fn tolerance(&self) -> f64 {
        1e-10 * self.scale.max(1e-300)
    }
}

/// The region `Ω` as a collar side (`s ∈ [s_H, 0]`, `Σ` at `s = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interior {
    pub side: CollarSide,
    pub horizon_radius: f64,
    pub horizon_area: f64,
    /// Mean curvature of `Σ_H` (should vanish).
    pub horizon_mean_curvature: f64,
    pub boundary_radius: f64,
    /// Mean curvature `H` of `Σ` in `Ω`.
    pub mean_curvature: f64,
    /// Outward flux `Φ = Q(Σ)/r_b²`.
    pub flux: f64,
    pub charge_horizon: f64,
    pub charge_boundary: f64,
    /// Smallest `b_s` strictly inside `Ω` (positive iff no further minimal
    /// sphere).
    pub min_interior_slope: f64,
    pub energy: EnergyReport,
}

fn smoothstep(t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, 1.0);
    (t * t * t * (10.0 - 15.0 * t + 6.0 * t * t), 30.0 * t * t * (1.0 - t) * (1.0 - t))
}

/// Build the interior region, rejecting data that violates `R ≥ 2|E|²` or
/// contains a second minimal sphere.
pub fn build_interior(spec: &ResolvedInterior, samples: usize) -> Result<Interior> {
    let side = match *spec {
        ResolvedInterior::Rn { params, r_b } => CollarSide::rn_inner(&params, r_b, samples)?,
        ResolvedInterior::DustShell { r_h, q_h, q_b, shell_inner, shell_outer, density, r_b } => {
            dust_shell_side(r_h, q_h, q_b, shell_inner, shell_outer, density, r_b, samples)?
        }
    };
    let interior = interior_from_side(side)?;
    let tol = interior.energy.tolerance();
    let w = interior.energy.worst_basic;
    if w.value < -tol {
        return Err(QlError::InteriorRejected(format!(
            "R − 2|E|² = {:.3e} < 0 at r = {:.6} (s = {:.6})",
            w.value, w.r, w.s
        )));
    }
    Ok(interior)
}

fn interior_from_side(side: CollarSide) -> Result<Interior> {
    let n = side.len();
    let first = side.eval(side.s_min());
    let last = side.eval(0.0);
    let min_interior_slope = side.b_s[1..].iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_interior_slope > 0.0) {
        let k = (1..n).find(|&k| !(side.b_s[k] > 0.0)).unwrap_or(n - 1);
        return Err(QlError::InteriorRejected(format!(
            "second minimal sphere inside Ω at r = {:.6} (s = {:.6}); Σ_H is not outermost",
            side.b[k], side.s[k]
        )));
    }
    let energy = EnergyReport::from_side(&side);
    Ok(Interior {
        horizon_radius: first.b,
        horizon_area: 4.0 * PI * first.b * first.b,
        horizon_mean_curvature: first.mean_curvature(),
        boundary_radius: last.b,
        mean_curvature: last.mean_curvature(),
        flux: last.q / (last.b * last.b),
        charge_horizon: first.q,
        charge_boundary: last.q,
        min_interior_slope,
        energy,
        side,
    })
}

/// Integrate the radial Hamiltonian constraint for the dust shell.
///
/// With `W = 1 − 2M/r`, `R = 4M'/r²` and the prescribed density the mass
/// function obeys `M' = Q²/(2r²) + √W|Q'| + r²ρ/4`. The horizon `W = 0` is
/// regularised by `r = r_h + x²`; the state is `(Z = r − 2M, s)`.
#[allow(clippy::too_many_arguments)]
fn dust_shell_side(
    r_h: f64,
    q_h: f64,
    q_b: f64,
    r1: f64,
    r2: f64,
    density: f64,
    r_b: f64,
    samples: usize,
) -> Result<CollarSide> {
    let width = r2 - r1;
    let charge = move |r: f64| {
        let (s, ds) = smoothstep((r - r1) / width);
        (q_h + (q_b - q_h) * s, (q_b - q_h) * ds / width)
    };
    let rho = move |r: f64| {
        if r > r1 && r < r2 {
            density * (PI * (r - r1) / width).sin().powi(2)
        } else {
            0.0
        }
    };
    let mass_slope = move |r: f64, w: f64| {
        let (q, dq) = charge(r);
        q * q / (2.0 * r * r) + w.max(0.0).sqrt() * dq.abs() + r * r * rho(r) / 4.0
    };
    let slope_h = 1.0 - 2.0 * mass_slope(r_h, 0.0);
    if !(slope_h > 0.0) {
        return Err(QlError::InteriorRejected(format!(
            "degenerate horizon: 1 − 2M'(r_h) = {slope_h:.3e} <= 0 (|Q_H| too large for r_h)"
        )));
    }
    let x_max = (r_b - r_h).sqrt();
    let xs = linspace(0.0, x_max, samples);
    let rhs = move |x: f64, y: &[f64]| -> Vec<f64> {
        let r = r_h + x * x;
        let w = y[0] / r;
        let dz = 2.0 * x * (1.0 - 2.0 * mass_slope(r, w));
        let ds = if x < 1e-7 || !(w > 0.0) {
            2.0 * (r_h / slope_h).sqrt()
        } else {
            2.0 * x / w.sqrt()
        };
        vec![dz, ds]
    };
    let sol = dopri45(rhs, 0.0, &[0.0, 0.0], &xs, 1e-12, 1e-14)?;
    let s_end = sol.last().unwrap()[1];
    let mut cols: [Vec<f64>; 6] = Default::default();
    for (k, (&x, y)) in xs.iter().zip(&sol).enumerate() {
        let r = r_h + x * x;
        let w = if k == 0 { 0.0 } else { y[0] / r };
        if k > 0 && !(w > 0.0) {
            return Err(QlError::InteriorRejected(format!(
                "second minimal sphere inside Ω at r = {r:.6}; Σ_H is not outermost"
            )));
        }
        let m = 0.5 * (r - if k == 0 { 0.0 } else { y[0] });
        let dm = mass_slope(r, w);
        let (q, dq) = charge(r);
        let sq = w.sqrt();
        cols[0].push(y[1] - s_end);
        cols[1].push(r);
        cols[2].push(sq);
        cols[3].push(m / (r * r) - dm / r);
        cols[4].push(q);
        cols[5].push(dq * sq);
    }
    cols[0][samples - 1] = 0.0;
    let [s, b, b_s, b_ss, q, q_s] = cols;
    CollarSide::from_samples(s, b, b_s, b_ss, q, q_s)
}

// ---------------------------------------------------------------------------
// Hypotheses

/// One named hypothesis with its margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisItem {
    pub name: String,
    /// Signed margin: the hypothesis holds iff `margin > 0` (strict) or
    /// `margin ≥ −tol` (non-strict).
    pub margin: f64,
    pub tol: f64,
    pub strict: bool,
    pub pass: bool,
    /// Advisory items are reported but do not gate the verdict.
    pub advisory: bool,
    pub detail: String,
}

impl HypothesisItem {
    fn new(name: &str, margin: f64, tol: f64, strict: bool, detail: String) -> Self {
        let pass = if strict { margin > 0.0 } else { margin >= -tol };
        Self { name: name.into(), margin, tol, strict, pass, advisory: false, detail }
    }

    fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checklist {
    pub items: Vec<HypothesisItem>,
    /// All non-advisory items pass.
    pub all_pass: bool,
    /// `|r_b − √(|Σ₀|/4π)|`: induced radius of the reference image vs `Σ`.
    pub embedding_error: f64,
}

impl Checklist {
    pub fn get(&self, name: &str) -> Option<&HypothesisItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.items.iter().filter(|i| !i.advisory && !i.pass).map(|i| i.name.as_str()).collect()
    }
}

/// Boundary data on `Σ` and its reference image `Σ₀` (per polar node).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryData {
    pub r_b: f64,
    pub h: f64,
    pub phi: f64,
    pub h_o: Vec<f64>,
    pub phi_bar: Vec<f64>,
    pub v: Vec<f64>,
}

/// Everything derived from a scenario before any inequality is evaluated.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    /// Orientation-fixed reference.
    pub reference: RNParams,
    pub orientation: f64,
    pub interior: Interior,
    /// Image of `Σ` in the reference (absent if `r_b` is not outside `r̄₊`).
    pub geometry: Option<SurfaceGeometry>,
    pub checklist: Checklist,
}

/// Build the interior and evaluate every hypothesis of the scenario's
/// variant. Hypothesis failures are recorded, not thrown.
pub fn prepare(scenario: &Scenario) -> Result<Prepared> {
    scenario.validate()?;
    let sign = scenario.orientation();
    let reference = RNParams { qbar: sign * scenario.reference.qbar, ..scenario.reference };
    let spec = scenario.resolve_interior()?.flipped(sign);
    let interior = build_interior(&spec, scenario.numerics.side_samples)?;
    let geometry = round_sphere_n(&reference, interior.boundary_radius, scenario.numerics.grid_n)
        .and_then(|s| induced_geometry(&s))
        .ok();
    let checklist = hypothesis_check(scenario, &reference, &interior, geometry.as_ref());
    Ok(Prepared { scenario: scenario.clone(), reference, orientation: sign, interior, geometry, checklist })
}

fn min_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::INFINITY, f64::min)
}

/// The hypothesis checklist for `scenario` (already oriented).
pub fn hypothesis_check(
    scenario: &Scenario,
    reference: &RNParams,
    interior: &Interior,
    geometry: Option<&SurfaceGeometry>,
) -> Checklist {
    let variant = scenario.variant;
    let tol = scenario.numerics.tol;
    let mut items = Vec::new();
    let h = interior.mean_curvature;
    let phi = interior.flux;

    items.push(HypothesisItem::new(
        "horizon_minimal",
        -interior.horizon_mean_curvature.abs(),
        tol,
        false,
        format!("H(Σ_H) = {:.3e} at r = {:.6}", interior.horizon_mean_curvature, interior.horizon_radius),
    ));
    items.push(HypothesisItem::new(
        "horizon_outermost",
        interior.min_interior_slope,
        0.0,
        true,
        "smallest ∂_s(areal radius) strictly inside Ω".into(),
    ));
    items.push(HypothesisItem::new("outer_mean_convex", h, 0.0, true, format!("H(Σ) = {h:.6e}")));

    let e = &interior.energy;
    let etol = e.tolerance();
    match variant {
        Variant::A => items.push(HypothesisItem::new(
            "energy_enhanced",
            e.worst_enhanced.value,
            etol,
            false,
            format!("min R − 2|E|² − 4|∇·E| at r = {:.6}", e.worst_enhanced.r),
        )),
        Variant::B | Variant::C => items.push(HypothesisItem::new(
            "energy",
            e.worst_basic.value,
            etol,
            false,
            format!("min R − 2|E|² at r = {:.6}", e.worst_basic.r),
        )),
    }
    let dtol = 1e-12 * e.divergence.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    match variant {
        Variant::A => {}
        Variant::B => items.push(HypothesisItem::new(
            "divergence_nonpositive",
            -e.div_max,
            dtol,
            false,
            format!("max ∇·E = {:.3e}", e.div_max),
        )),
        Variant::C => items.push(HypothesisItem::new(
            "divergence_nonnegative",
            e.div_min,
            dtol,
            false,
            format!("min ∇·E = {:.3e}", e.div_min),
        )),
    }

    let q_hat = match variant {
        Variant::C => interior.charge_horizon,
        _ => reference.qbar,
    };
    let area_charge = interior.horizon_area / (4.0 * PI) - q_hat * q_hat;
    let ac = HypothesisItem::new(
        "area_charge",
        area_charge,
        1e-12 * interior.horizon_area,
        false,
        format!("|Σ_H|/4π − Q̂² with Q̂ = {q_hat:.6}"),
    );
    items.push(if variant == Variant::A { ac } else { ac.advisory() });
    match variant {
        Variant::B => items.push(HypothesisItem::new(
            "reference_charge_nonnegative",
            reference.qbar,
            0.0,
            false,
            "Q̄ in the fixed orientation".into(),
        )),
        Variant::C => items.push(HypothesisItem::new(
            "horizon_charge_nonnegative",
            interior.charge_horizon,
            0.0,
            false,
            format!("Q(Σ_H) = {:.6}", interior.charge_horizon),
        )),
        Variant::A => {}
    }

    let r_b = interior.boundary_radius;
    let embedding_error;
    match geometry {
        None => {
            embedding_error = f64::NAN;
            let rp = horizon_radius(reference).unwrap_or(0.0);
            items.push(HypothesisItem::new(
                "embedding",
                r_b - rp,
                0.0,
                true,
                format!("Σ (r = {r_b}) does not embed outside the reference horizon r̄₊ = {rp:.6}"),
            ));
        }
        Some(geom) => {
            embedding_error = (r_b - (geom.total_area / (4.0 * PI)).sqrt()).abs();
            let rp = horizon_radius(reference).unwrap_or(0.0);
            items.push(HypothesisItem::new("embedding", r_b - rp, 0.0, true, format!("r_b − r̄₊, induced-radius error {embedding_error:.1e}")));
            let ftol = 1e-12 * phi.abs().max(geom.phi_bar.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1e-300);
            match variant {
                Variant::A => items.push(HypothesisItem::new(
                    "flux_mean_curvature",
                    min_of(geom.phi_bar.iter().map(|pb| h - 2.0 * (pb - phi).abs())),
                    0.0,
                    true,
                    "min H − 2|Φ̄ − Φ|".into(),
                )),
                Variant::B => items.push(HypothesisItem::new(
                    "flux_below",
                    min_of(geom.phi_bar.iter().map(|pb| phi - pb)),
                    ftol,
                    false,
                    "min Φ − Φ̄".into(),
                )),
                Variant::C => items.push(HypothesisItem::new(
                    "flux_above",
                    min_of(geom.phi_bar.iter().map(|pb| pb - phi)),
                    ftol,
                    false,
                    "min Φ̄ − Φ".into(),
                )),
            }
            convexity_items(&mut items, reference, geom, &scenario.constants, scenario.numerics.grid_n);
        }
    }
    let all_pass = items.iter().all(|i| i.advisory || i.pass);
    Checklist { items, all_pass, embedding_error }
}

/// Convexity hypotheses. Both conditions ask for the *existence* of
/// constants; for a given surface that reduces to the sign conditions
/// below, and the sharpest admissible constants are reported. The
/// configured constants are checked as an advisory item.
fn convexity_items(items: &mut Vec<HypothesisItem>, reference: &RNParams, geom: &SurfaceGeometry, consts: &FlowConstants, grid_n: usize) {
    let n = geom.r.len();
    if !reference.is_zero_mass() {
        let kappa_r2 = min_of((0..n).map(|i| geom.kappa1[i].min(geom.kappa2[i]) * geom.r[i].powi(2)));
        let r_min = min_of(geom.r.iter().copied());
        items.push(HypothesisItem::new(
            "convexity_ricci",
            min_of(geom.ric_nn.iter().map(|v| -v)),
            0.0,
            true,
            "min −Ric(ν, ν)".into(),
        ));
        items.push(HypothesisItem::new(
            "convexity_curvature",
            kappa_r2,
            0.0,
            true,
            format!("min κ·r²; sharpest constants C₁ < {kappa_r2:.4}, C₂ < {r_min:.4}"),
        ));
        if let Ok(rep) = check_dagger(geom, consts) {
            let worst = rep.ric_negative.worst.min(rep.curvature.worst).min(rep.radius.worst);
            items.push(
                HypothesisItem::new("convexity_configured_constants", worst, 0.0, true, format!("C₁ = {}, C₂ = {}", consts.c1, consts.c2))
                    .advisory(),
            );
        }
    } else {
        let surface = match round_sphere_n(reference, (geom.total_area / (4.0 * PI)).sqrt(), grid_n) {
            Ok(s) => s,
            Err(_) => return,
        };
        match flat_chart_geometry(&surface) {
            Ok(flat) => {
                items.push(HypothesisItem::new("convexity_angle", min_of(flat.cos_theta.iter().copied()), 0.0, true, "min cos θ in the flat chart".into()));
                let rk = min_of((0..flat.rho.len()).map(|i| flat.rho[i].powi(2) * flat.kappa1[i].min(flat.kappa2[i])));
                items.push(HypothesisItem::new("convexity_curvature", rk, 0.0, true, "min ρ²κ̃ in the flat chart".into()));
            }
            Err(e) => items.push(HypothesisItem::new("convexity_angle", f64::NEG_INFINITY, 0.0, true, e.to_string())),
        }
        items.push(HypothesisItem::new("gauss_flux", min_of(geom.gauss_flux_margin()), 0.0, true, "min K − Φ̄²".into()));
        if let Ok(rep) = check_double_dagger(&surface, consts) {
            let worst = rep.cos_theta.worst.min(rep.rho.worst).min(rep.rho2_kappa.worst).min(rep.gauss_flux.worst);
            items.push(
                HypothesisItem::new(
                    "convexity_configured_constants",
                    worst,
                    0.0,
                    true,
                    format!("δ = {}, C = {}, C′ = {}", consts.delta_angle, consts.c_big, consts.c_prime),
                )
                .advisory(),
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Inequality

/// `√(A/16π)(1 + 4πQ²/A) − m̄`.
pub fn penrose_rhs(area: f64, q: f64, mbar: f64) -> f64 {
    (area / (16.0 * PI)).sqrt() * (1.0 + 4.0 * PI * q * q / area) - mbar
}

/// `∂ rhs/∂A = (A − 4πQ²)/(2√(16π) A^{3/2})`.
pub fn penrose_rhs_area_derivative(area: f64, q: f64) -> f64 {
    (area - 4.0 * PI * q * q) / (2.0 * (16.0 * PI).sqrt() * area.powf(1.5))
}

/// Verdict of a run, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Ok,
    HypothesisFail,
    /// Hypotheses hold but an inequality fails beyond tolerance.
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub scenario: String,
    pub variant: Variant,
    /// `−1` if charges were flipped to fix the orientation.
    pub orientation: f64,
    pub lhs: f64,
    pub lhs_tol: f64,
    pub rhs: f64,
    pub rhs_tol: f64,
    pub gap: f64,
    pub gap_tol: f64,
    pub q_used: f64,
    pub horizon_area: f64,
    pub horizon_radius: f64,
    pub checklist: Checklist,
    pub boundary: Option<BoundaryData>,
    pub m_adm_pipeline: Option<f64>,
    pub m_adm_pipeline_tol: Option<f64>,
    pub status: Status,
}

fn lhs_on(reference: &RNParams, r_b: f64, grid_n: usize, h: f64, phi: f64, variant: Variant) -> Result<(f64, SurfaceGeometry)> {
    let geom = induced_geometry(&round_sphere_n(reference, r_b, grid_n)?)?;
    let w: Vec<f64> = (0..geom.r.len())
        .map(|i| {
            let extra = match variant {
                Variant::A => 2.0 * (geom.phi_bar[i] - phi).abs(),
                _ => 0.0,
            };
            geom.v[i] * (geom.h_o[i] - h + extra)
        })
        .collect();
    Ok((geom.integrate(&w) / (8.0 * PI), geom))
}

fn coarse_grid(n: usize) -> usize {
    let half = n / 2;
    (half + half % 2).max(4)
}

fn report_from(prep: &Prepared) -> InequalityReport {
    let sc = &prep.scenario;
    let int = &prep.interior;
    let variant = sc.variant;
    let q_used = match variant {
        Variant::C => int.charge_horizon,
        _ => prep.reference.qbar,
    };
    let rhs = penrose_rhs(int.horizon_area, q_used, prep.reference.mbar);
    let rhs_tol = 1e-13 * (1.0 + rhs.abs() + prep.reference.mbar);
    let (lhs, lhs_tol, boundary) = match prep.geometry {
        Some(ref geom) => {
            let fine = lhs_on(&prep.reference, int.boundary_radius, sc.numerics.grid_n, int.mean_curvature, int.flux, variant);
            let coarse = lhs_on(&prep.reference, int.boundary_radius, coarse_grid(sc.numerics.grid_n), int.mean_curvature, int.flux, variant);
            match (fine, coarse) {
                (Ok((l, _)), Ok((lc, _))) => {
                    let bd = BoundaryData {
                        r_b: int.boundary_radius,
                        h: int.mean_curvature,
                        phi: int.flux,
                        h_o: geom.h_o.clone(),
                        phi_bar: geom.phi_bar.clone(),
                        v: geom.v.clone(),
                    };
                    (l, (l - lc).abs() + 1e-13 * (1.0 + l.abs()), Some(bd))
                }
                _ => (f64::NAN, f64::NAN, None),
            }
        }
        None => (f64::NAN, f64::NAN, None),
    };
    let gap = lhs - rhs;
    let gap_tol = lhs_tol + rhs_tol;
    let status = if !prep.checklist.all_pass {
        Status::HypothesisFail
    } else if !(gap >= -(gap_tol + sc.numerics.tol)) {
        Status::Critical
    } else {
        Status::Ok
    };
    InequalityReport {
        scenario: sc.name.clone(),
        variant,
        orientation: prep.orientation,
        lhs,
        lhs_tol,
        rhs,
        rhs_tol,
        gap,
        gap_tol,
        q_used,
        horizon_area: int.horizon_area,
        horizon_radius: int.horizon_radius,
        checklist: prep.checklist.clone(),
        boundary,
        m_adm_pipeline: None,
        m_adm_pipeline_tol: None,
        status,
    }
}

/// Hypotheses, both sides of the inequality and the gap. Interior
/// rejections and invalid scenarios are errors; hypothesis failures are not.
pub fn evaluate_inequality(scenario: &Scenario) -> Result<InequalityReport> {
    let prep = prepare(scenario)?;
    Ok(report_from(&prep))
}

// ---------------------------------------------------------------------------
// Full pipeline

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionSummary {
    pub u_boundary: f64,
    pub leaves: usize,
    pub s_max: f64,
    pub areal_radius_max: f64,
    pub m_adm: f64,
    /// `m̄ + C/2` from the closed-form spherical warp.
    pub m_adm_closed_form: f64,
    /// Largest `|u − u_closed|` over the leaves.
    pub warp_closed_form_error: f64,
    /// Largest `|u − 1|` over the extension.
    pub warp_max_deviation: f64,
    pub identity_residual: f64,
    pub divergence_max: f64,
    /// `|trace(s_max)|` difference between the grid and its half.
    pub trace_tol: f64,
}

/// One δ of the smoothing schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub delta_requested: f64,
    /// δ actually used (halved while the conformal factor was too large).
    pub delta: f64,
    pub m_adm: f64,
    pub max_deviation: f64,
    pub worst_margin: f64,
    pub worst_margin_eps_zero: f64,
    pub energy_pass: bool,
    pub horizon_area_drift: f64,
    pub q_inf: f64,
    /// `|Q_∞(Ê) − Q_∞(E)|` after the divergence repair (B, C).
    pub q_drift: Option<f64>,
    /// `‖∇f_δ‖_{L²}` of the divergence repair (B, C).
    pub grad_l2: Option<f64>,
    /// Repaired divergence has the variant's sign.
    pub divergence_sign_ok: bool,
}

/// One link of the proof chain `lhs = trace(0) ≥ trace(s) ≥ m_ADM − m̄ ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainLink {
    pub name: String,
    pub margin: f64,
    pub tol: f64,
    /// `margin ≥ −tol`.
    pub holds: bool,
    /// `margin > tol`.
    pub strict: bool,
}

impl ChainLink {
    fn new(name: &str, margin: f64, tol: f64) -> Self {
        Self { name: name.into(), margin, tol, holds: margin >= -tol, strict: margin > tol }
    }

    /// An exact identity: holds when `|margin| ≤ tol`, never strict.
    fn identity(name: &str, margin: f64, tol: f64) -> Self {
        Self { name: name.into(), margin, tol, holds: margin.abs() <= tol, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub report: InequalityReport,
    pub extension: ExtensionSummary,
    pub trace: Vec<TracePoint>,
    pub corner: CornerConditionReport,
    pub schedule: Vec<ScheduleRow>,
    /// Largest `|u_δ − 1|` of the conformal repair at the finest δ.
    pub conformal_max_deviation: f64,
    pub chain: Vec<ChainLink>,
    pub chain_holds: bool,
}

const MAX_HALVINGS: usize = 8;

fn fmt_margin(m: Option<f64>) -> String {
    m.map_or_else(|| "n/a".into(), |v| format!("{v:.3e}"))
}

fn repair_once(corner: &ChargedCornerData, variant: Variant, delta_requested: f64, eps: f64) -> Result<(ScheduleRow, f64)> {
    let mut delta = delta_requested;
    for _ in 0..=MAX_HALVINGS {
        let data = smooth_corner(corner, delta).map_err(|e| e.at_stage("smooth"))?;
        let (phi, div, q_drift, grad_l2, sign_ok) = match variant {
            Variant::A => (data.field.phi.clone(), data.field.div_spike.clone(), None, None, true),
            Variant::B | Variant::C => {
                let dr = divergence_repair(&data).map_err(|e| e.at_stage("divergence_repair"))?;
                // Sign check up to roundoff: differencing Φ on collar cells of
                // width ~η/50 leaves noise of order ε·|Φ|/η.
                let spike = data.field.div_spike.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let phi_max = data.field.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let scale = 1e-12 * spike + 1e4 * f64::EPSILON * phi_max / inner_scale(delta);
                let ok = match variant {
                    Variant::B => dr.div_hat_max <= scale,
                    _ => dr.div_hat_min >= -scale,
                };
                (dr.phi_hat, dr.div_hat, Some(dr.q_drift.abs()), Some(dr.grad_l2), ok)
            }
        };
        match conformal_repair_with_field(&data, &phi, &div, variant, eps) {
            Ok(c) => {
                let row = ScheduleRow {
                    delta_requested,
                    delta,
                    m_adm: c.m_adm,
                    max_deviation: c.max_deviation,
                    worst_margin: c.worst_margin,
                    worst_margin_eps_zero: c.worst_margin_eps_zero,
                    energy_pass: c.energy_pass,
                    horizon_area_drift: c.horizon_area_drift,
                    q_inf: c.q_inf,
                    q_drift,
                    grad_l2,
                    divergence_sign_ok: sign_ok,
                };
                return Ok((row, c.m_adm_tol));
            }
            Err(QlError::ShrinkDelta { .. }) => delta *= 0.5,
            Err(e) => return Err(e.at_stage("conformal_repair")),
        }
    }
    Err(QlError::ShrinkDelta { deviation: f64::NAN, eps }.at_stage("conformal_repair"))
}

/// Run the constructive chain and verify it link by link.
pub fn pipeline_verify(scenario: &Scenario) -> Result<PipelineReport> {
    let prep = prepare(scenario)?;
    let mut report = report_from(&prep);
    if !prep.checklist.all_pass {
        return Err(QlError::Hypothesis(format!(
            "pipeline needs every hypothesis; failing: {}",
            prep.checklist.failures().join(", ")
        )));
    }
    let sc = &prep.scenario;
    let num = &sc.numerics;
    let variant = sc.variant;
    let reference = prep.reference;
    let int = &prep.interior;
    if report.boundary.is_none() {
        return Err(QlError::Hypothesis("Σ does not embed in the reference".into()));
    }
    let r_b = int.boundary_radius;

    // Boundary warp and extension at two resolutions.
    let run_extension = |grid_n: usize| -> Result<(f64, crate::extension::ExtensionResult)> {
        let start = round_sphere_n(&reference, r_b, grid_n)?;
        let geom = induced_geometry(&start)?;
        let np = geom.r.len();
        let u0 = match sc.u0 {
            Some(u) => vec![u; np],
            None => boundary_warp_from_interior(&geom.h_o, &vec![int.mean_curvature; np], &geom.phi_bar, &vec![int.flux; np], variant)
                .map_err(|e| e.at_stage("boundary_warp"))?,
        };
        let mut flow = FlowOptions::to_areal_factor(&start, num.step_ratio, num.areal_factor);
        flow.consts = sc.constants;
        if let Some(s) = num.s_max {
            flow.s_max = s;
            flow.areal_factor = None;
        }
        let (_, ext) = build_extension(&start, &u0, &flow, &WarpOptions::default())?;
        Ok((u0.iter().sum::<f64>() / np as f64, ext))
    };
    let (u_b, ext) = run_extension(num.grid_n)?;
    let (_, ext_coarse) = run_extension(coarse_grid(num.grid_n))?;
    let trace = monotone_mass_trace(&ext);
    let trace_end = ext.mass_trace.last().copied().unwrap_or(f64::NAN);
    let trace_tol = (trace_end - ext_coarse.mass_trace.last().copied().unwrap_or(f64::NAN)).abs() + 1e-12;

    let c_const = (1.0 - u_b.powi(-2)) * r_b * reference.potential_sq(r_b);
    let mut warp_err = 0.0f64;
    let mut warp_dev = 0.0f64;
    for (k, row) in ext.u.iter().enumerate() {
        let closed = spherical_warp_closed_form(&reference, r_b, u_b, ext.areal_radius[k]);
        for &u in row {
            warp_err = warp_err.max((u - closed).abs());
            warp_dev = warp_dev.max((u - 1.0).abs());
        }
    }
    let extension = ExtensionSummary {
        u_boundary: u_b,
        leaves: ext.s.len(),
        s_max: ext.s.last().copied().unwrap_or(0.0),
        areal_radius_max: ext.areal_radius.last().copied().unwrap_or(r_b),
        m_adm: ext.m_adm,
        m_adm_closed_form: reference.mbar + 0.5 * c_const,
        warp_closed_form_error: warp_err,
        warp_max_deviation: warp_dev,
        identity_residual: ext.identity_residual,
        divergence_max: ext.divergence_max,
        trace_tol,
    };

    // Glue. In spherical symmetry the warped extension is the RN slice of
    // mass m̄ + C/2 and charge Q̄; its closed form feeds the corner.
    let outer_params = RNParams { mbar: reference.mbar + 0.5 * c_const, qbar: reference.qbar };
    let r_max = num.collar_radius.max(100.0 * r_b);
    let outer = CollarSide::rn_outer(&outer_params, r_b, r_max, num.side_samples).map_err(|e| e.at_stage("corner"))?;
    let corner = ChargedCornerData::new(int.side.clone(), outer).map_err(|e| e.at_stage("corner"))?;
    let cond = check_corner_conditions(&corner, variant);
    if !cond.pass {
        return Err(QlError::Hypothesis(format!(
            "corner conditions fail: mean-curvature margin {:.3e}, flux margin {}, area–charge margin {}",
            cond.mean_curvature,
            fmt_margin(cond.flux),
            fmt_margin(cond.area_charge)
        ))
        .at_stage("corner"));
    }

    // Smoothing schedule (sequential: each pipeline is one worker).
    let mut schedule = Vec::with_capacity(num.deltas.len());
    let mut adm_tol = f64::INFINITY;
    for &d in &num.deltas {
        let (row, tol) = repair_once(&corner, variant, d, num.eps)?;
        schedule.push(row);
        adm_tol = tol;
    }
    let m_pipe = schedule.last().expect("non-empty schedule").m_adm;
    let schedule_tol = match schedule.len() {
        0 | 1 => 0.0,
        k => (schedule[k - 1].m_adm - schedule[k - 2].m_adm).abs(),
    };
    let m_tol = adm_tol + schedule_tol + 1e-12;
    let conformal_max_deviation = schedule.last().map(|r| r.max_deviation).unwrap_or(0.0);

    // Chain.
    // Mass scale for the monotonicity slack: the trace itself may vanish
    // (equality case), so fall back on r_b/2.
    let scale = trace.iter().fold(0.5 * r_b, |m, p| m.max(p.value.abs()));
    // Largest step-to-step increase where the monitor is positive; negative
    // when the trace decreases strictly.
    let mut worst_increase = f64::NEG_INFINITY;
    for w in trace.windows(2) {
        if w[0].monitor > 0.0 && w[1].monitor > 0.0 {
            worst_increase = worst_increase.max(w[1].value - w[0].value);
        }
    }
    if worst_increase == f64::NEG_INFINITY {
        worst_increase = 0.0;
    }
    // trace(0) = lhs identically (u₀ = H_o/H on Σ), so the inequality link is
    // measured over the leaves s > 0 and the identity is its own link.
    let trace_0 = trace.first().map_or(f64::NAN, |p| p.value);
    let trace_max = trace.iter().skip(1).map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let trace_min = trace.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let identity_tol = 1e-10 * (1.0 + report.lhs.abs()) + num.tol;
    let chain = vec![
        ChainLink::identity("lhs = trace(0)", report.lhs - trace_0, identity_tol),
        ChainLink::new("lhs >= trace(s), s > 0", report.lhs - trace_max, report.lhs_tol + trace_tol + num.tol),
        ChainLink::new("trace non-increasing", -worst_increase, num.trace_slack * scale),
        ChainLink::new("trace(s) >= m_adm - mbar", trace_min - (m_pipe - reference.mbar), trace_tol + m_tol + num.tol),
        ChainLink::new("m_adm - mbar >= rhs", m_pipe - reference.mbar - report.rhs, m_tol + report.rhs_tol + num.tol),
    ];
    let chain_holds = chain.iter().all(|l| l.holds) && schedule.iter().all(|r| r.divergence_sign_ok);
    report.m_adm_pipeline = Some(m_pipe);
    report.m_adm_pipeline_tol = Some(m_tol);
    if !chain_holds {
        report.status = Status::Critical;
    }
    Ok(PipelineReport {
        report,
        extension,
        trace,
        corner: cond,
        schedule,
        conformal_max_deviation,
        chain,
        chain_holds,
    })
}

// ---------------------------------------------------------------------------
// Shipped scenarios

fn numerics_default() -> Numerics {
    Numerics::default()
}

impl Scenario {
    /// Interior equal to the reference RN truncation at `r_b` (variant B).
    pub fn equality(mbar: f64, qbar: f64, r_b: f64) -> Self {
        Self {
            name: "equality".into(),
            description: "interior equals the reference truncation; every inequality saturates".into(),
            variant: Variant::B,
            reference: RNParams { mbar, qbar },
            interior: InteriorSpec::Rn { mass: None, charge: None, r_b: Some(r_b), r_b_factor: None },
            u0: None,
            constants: FlowConstants::default(),
            numerics: numerics_default(),
        }
    }

    /// Interior RN(1.2, 0.5), reference RN(1.0, 0.5), `Σ` at `r_b = 4`.
    pub fn rn_regression() -> Self {
        Self {
            name: "rn-regression".into(),
            description: "interior RN(1.2, 0.5) inside reference RN(1.0, 0.5)".into(),
            variant: Variant::B,
            reference: RNParams { mbar: 1.0, qbar: 0.5 },
            interior: InteriorSpec::Rn { mass: Some(1.2), charge: Some(0.5), r_b: Some(4.0), r_b_factor: None },
            u0: None,
            constants: FlowConstants::default(),
            numerics: numerics_default(),
        }
    }

    /// Charged dust shell with decreasing charge 0.8 → 0.6 (variant B).
    pub fn dust_shell_b() -> Self {
        Self {
            name: "dust-shell-b".into(),
            description: "charged dust shell, Q decreasing 0.8 → 0.6, reference RN(1.0, 0.5)".into(),
            variant: Variant::B,
            reference: RNParams { mbar: 1.0, qbar: 0.5 },
            interior: InteriorSpec::DustShell {
                r_h: 2.0,
                q_h: 0.8,
                q_b: 0.6,
                shell_inner: 2.5,
                shell_outer: 3.5,
                density: 0.01,
                r_b: 4.0,
            },
            u0: None,
            constants: FlowConstants::default(),
            numerics: numerics_default(),
        }
    }

    /// Zero-mass reference RN(0, 0.5) around interior RN(1, 0.5).
    pub fn zero_mass() -> Self {
        Self {
            name: "zero-mass".into(),
            description: "interior RN(1, 0.5) measured against the zero-mass reference RN(0, 0.5)".into(),
            variant: Variant::B,
            reference: RNParams { mbar: 0.0, qbar: 0.5 },
            interior: InteriorSpec::Rn { mass: Some(1.0), charge: Some(0.5), r_b: Some(150.0), r_b_factor: None },
            u0: None,
            constants: FlowConstants::default(),
            numerics: numerics_default(),
        }
    }
}
