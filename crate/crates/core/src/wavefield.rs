//! Radial free waves in odd dimension `d` evaluated from their radiation
//! profile `G`:
//!
//! ```text
//! u(r, t) = r^{-(d-1)/2} \int_{t-r}^{t+r} G(s) P_{(d-3)/2}((s - t) / r) ds
//! ```
//!
//! `G` is the piecewise-linear interpolant of a [`SampledProfile`], and the
//! integral is evaluated exactly for it: short ranges cell by cell with Gauss
//! rules, long ranges from cumulative moments of `G`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::spherical_jn_sc;
use crate::error::{Error, Result};
use crate::legendre::{legendre_poly, poly_compose_affine, poly_eval, LegendreKernel};
use crate::profile::{hnorm_squared, SampledProfile, SobolevOrder};
use crate::quadrature::{gauss8, sphere_area};

/// Anything that can be evaluated at a radius `r > 0` and time `t`.
pub trait RadialField: Sync {
    fn value(&self, r: f64, t: f64) -> f64;

    /// Some(rho) when the field is known to vanish wherever r - |t| > rho.
    fn exterior_support_radius(&self) -> Option<f64> {
        None
    }
}

impl<F> RadialField for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn value(&self, r: f64, t: f64) -> f64 {
        self(r, t)
    }
}

/// Sum of fields.
#[derive(Default)]
pub struct Superposition {
    parts: Vec<Box<dyn RadialField + Send>>,
}

impl Superposition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push<F: RadialField + Send + 'static>(&mut self, f: F) {
        self.parts.push(Box::new(f));
    }

    pub fn with<F: RadialField + Send + 'static>(mut self, f: F) -> Self {
        self.push(f);
        self
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl RadialField for Superposition {
    fn value(&self, r: f64, t: f64) -> f64 {
        self.parts.iter().map(|p| p.value(r, t)).sum()
    }

    fn exterior_support_radius(&self) -> Option<f64> {
        self.parts
            .iter()
            .try_fold(0.0f64, |acc, p| p.exterior_support_radius().map(|x| acc.max(x)))
    }
}

/// Checks that `d` is an odd dimension in the supported range.
pub fn check_dimension(d: usize, max: usize) -> Result<()> {
    if d.is_multiple_of(2) || d < 3 || d > max {
        Err(Error::Domain(format!("dimension must be odd and in [3, {max}], got {d}")))
    } else {
        Ok(())
    }
}

/// Ranges spanning at most this many cells are integrated cell by cell.
const DIRECT_CELLS: usize = 48;

/// Cumulative moments `\int_{s_0}^{s_i} G(s) x^k ds` with `x = (s - center) / scale`.
#[derive(Debug, Clone)]
struct MomentTable {
    center: f64,
    scale: f64,
    order: usize,
    cumulative: Vec<f64>,
}

impl MomentTable {
    fn new(g: &SampledProfile, order: usize) -> Self {
        let (center, scale) = match g.support() {
            Some((lo, hi)) => (0.5 * (lo + hi), 0.5 * (hi - lo)),
            None => (0.0, 1.0),
        };
        let stride = order + 1;
        let mut cumulative = vec![0.0; g.len() * stride];
        let h = g.spacing();
        let samples = g.samples();
        let mut buf = vec![0.0; stride];
        for i in 0..g.len() - 1 {
            let (a, b) = (g.node(i), g.node(i + 1));
            buf.iter_mut().for_each(|v| *v = 0.0);
            if samples[i] != 0.0 || samples[i + 1] != 0.0 {
                for (s, w) in gauss8().on(a, b) {
                    let gv = samples[i] + (samples[i + 1] - samples[i]) * (s - a) / h;
                    let x = (s - center) / scale;
                    let mut p = w * gv;
                    for v in buf.iter_mut() {
                        *v += p;
                        p *= x;
                    }
                }
            }
            for k in 0..stride {
                cumulative[(i + 1) * stride + k] = cumulative[i * stride + k] + buf[k];
            }
        }
        Self { center, scale, order, cumulative }
    }

    /// Moments of G over [s_0, b].
    fn at(&self, g: &SampledProfile, b: f64, out: &mut [f64]) {
        let stride = self.order + 1;
        let h = g.spacing();
        let x = ((b - g.origin()) / h).clamp(0.0, (g.len() - 1) as f64);
        let i = (x.floor() as usize).min(g.len() - 2);
        out.copy_from_slice(&self.cumulative[i * stride..(i + 1) * stride]);
        let a = g.node(i);
        if b > a {
            let s = g.samples();
            for (sn, w) in gauss8().on(a, b) {
                let gv = s[i] + (s[i + 1] - s[i]) * (sn - a) / h;
                let xx = (sn - self.center) / self.scale;
                let mut p = w * gv;
                for v in out.iter_mut() {
                    *v += p;
                    p *= xx;
                }
            }
        }
    }
}

/// `\int_a^b G(s) q((s - t) / r) ds` for the interpolant of `g`, with [a, b]
/// inside the grid. Exact up to round-off when deg q <= 6.
fn profile_integral(g: &SampledProfile, table: &MomentTable, a: f64, b: f64, q: &[f64], t: f64, r: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let h = g.spacing();
    let ia = ((a - g.origin()) / h).floor().max(0.0) as usize;
    let ib = (((b - g.origin()) / h).floor() as usize).min(g.len() - 2);
    if ib - ia.min(ib) <= DIRECT_CELLS || q.len() > table.order + 1 {
        let s = g.samples();
        let mut acc = 0.0;
        for i in ia..=ib {
            let lo = g.node(i).max(a);
            let hi = g.node(i + 1).min(b);
            if hi <= lo || (s[i] == 0.0 && s[i + 1] == 0.0) {
                continue;
            }
            let base = g.node(i);
            for (sn, w) in gauss8().on(lo, hi) {
                let gv = s[i] + (s[i + 1] - s[i]) * (sn - base) / h;
                acc += w * gv * poly_eval(q, (sn - t) / r);
            }
        }
        acc
    } else {
        let e = poly_compose_affine(q, table.scale / r, (table.center - t) / r);
        let mut mb = [0.0; 8];
        let mut ma = [0.0; 8];
        let k = table.order + 1;
        table.at(g, b, &mut mb[..k]);
        table.at(g, a, &mut ma[..k]);
        e.iter().zip(mb.iter().zip(&ma)).map(|(c, (x, y))| c * (x - y)).sum()
    }
}

/// Radial free wave determined by its radiation profile.
#[derive(Debug, Clone)]
pub struct RadialFreeWave {
    profile: SampledProfile,
    kernel: LegendreKernel,
    kernel_derivative: Vec<f64>,
    moments: MomentTable,
    support: Option<(f64, f64)>,
}

impl RadialFreeWave {
    pub fn new(profile: SampledProfile, d: usize) -> Result<Self> {
        let kernel = legendre_poly(d)?;
        let kernel_derivative = kernel.derivative();
        let moments = MomentTable::new(&profile, kernel.degree());
        let support = profile.support();
        Ok(Self { profile, kernel, kernel_derivative, moments, support })
    }

    pub fn profile(&self) -> &SampledProfile {
        &self.profile
    }

    pub fn dimension(&self) -> usize {
        self.kernel.dimension()
    }

    pub fn kernel(&self) -> &LegendreKernel {
        &self.kernel
    }

    fn mu(&self) -> f64 {
        (self.dimension() as f64 - 1.0) / 2.0
    }

    fn clip(&self, r: f64, t: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.support?;
        let a = (t - r).max(lo);
        let b = (t + r).min(hi);
        (b > a).then_some((a, b))
    }

    /// u(r, t); exactly zero when [t - r, t + r] misses the support of G.
    pub fn evaluate(&self, r: f64, t: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        Ok(self.eval_unchecked(r, t))
    }

    fn eval_unchecked(&self, r: f64, t: f64) -> f64 {
        match self.clip(r, t) {
            None => 0.0,
            Some((a, b)) => {
                let integral = profile_integral(&self.profile, &self.moments, a, b, self.kernel.coeffs(), t, r);
                r.powf(-self.mu()) * integral
            }
        }
    }

    /// Analytic time derivative of u at (r, t).
    pub fn time_derivative(&self, r: f64, t: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        let Some((a, b)) = self.clip(r, t) else {
            return Ok(0.0);
        };
        let p_plus = self.kernel.eval(1.0);
        let p_minus = self.kernel.eval(-1.0);
        let g = &self.profile;
        let boundary = g.value_at(t + r) * p_plus - g.value_at(t - r) * p_minus;
        let integral = profile_integral(g, &self.moments, a, b, &self.kernel_derivative, t, r);
        Ok(r.powf(-self.mu()) * (boundary - integral / r))
    }
}

impl RadialField for RadialFreeWave {
    fn value(&self, r: f64, t: f64) -> f64 {
        if r > 0.0 {
            self.eval_unchecked(r, t)
        } else {
            f64::NAN
        }
    }

    /// Known only when the low moments of G vanish, so that the wave is zero
    /// once [t - r, t + r] swallows the support.
    fn exterior_support_radius(&self) -> Option<f64> {
        let (lo, hi) = self.support?;
        let reach = lo.abs().max(hi.abs());
        let n = self.kernel.degree();
        let moments = profile_moments(&self.profile, n);
        let mass: f64 = self.profile.samples().iter().map(|v| v.abs()).sum::<f64>() * self.profile.spacing();
        let vanish = moments
            .iter()
            .enumerate()
            .all(|(k, m)| m.abs() <= 1e-11 * mass * reach.powi(k as i32));
        vanish.then_some(reach)
    }
}

/// Radial function sampled at `origin + i * spacing`, linear in between,
/// constant on `[0, origin)` and zero past the last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSamples {
    pub origin: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl RadialSamples {
    pub fn new(origin: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if !(origin >= 0.0 && spacing > 0.0) {
            return Err(Error::Domain(format!(
                "radial grid needs origin >= 0 and spacing > 0, got {origin}, {spacing}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("radial samples must be finite".into()));
        }
        Ok(Self { origin, spacing, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(origin: f64, spacing: f64, len: usize, f: F) -> Result<Self> {
        Self::new(origin, spacing, (0..len).map(|i| f(origin + i as f64 * spacing)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn value_at(&self, r: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        if r < self.origin {
            return self.values[0];
        }
        let x = (r - self.origin) / self.spacing;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return if i + 1 == self.values.len() && x == i as f64 { self.values[i] } else { 0.0 };
        }
        let f = x - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Radius beyond which the interpolant vanishes.
    pub fn outer_radius(&self) -> Option<f64> {
        let last = self.values.iter().rposition(|&v| v != 0.0)?;
        Some(self.node((last + 1).min(self.values.len() - 1)).max(self.node(last)))
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            origin: self.origin,
            spacing: self.spacing,
            values: self.values.iter().enumerate().map(|(i, &v)| f(self.node(i), v)).collect(),
        }
    }
}

/// Initial data (u0, u1) of a radial wave on a shared positive radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataPair {
    pub d: usize,
    pub u0: RadialSamples,
    pub u1: RadialSamples,
}

impl InitialDataPair {
    pub fn new(d: usize, u0: RadialSamples, u1: RadialSamples) -> Result<Self> {
        check_dimension(d, 13)?;
        if u0.origin != u1.origin || u0.spacing != u1.spacing || u0.len() != u1.len() {
            return Err(Error::InvalidInput("u0 and u1 must share one radial grid".into()));
        }
        if !(u0.origin > 0.0) {
            return Err(Error::Domain("the radial grid must be strictly positive".into()));
        }
        Ok(Self { d, u0, u1 })
    }

    pub fn zero(d: usize, origin: f64, spacing: f64, len: usize) -> Result<Self> {
        let z = RadialSamples::new(origin, spacing, vec![0.0; len])?;
        Self::new(d, z.clone(), z)
    }

    /// Area of the unit sphere S^{d-1}.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d - 1)
    }

    pub fn is_zero(&self) -> bool {
        self.u0.is_zero() && self.u1.is_zero()
    }

    /// Paired CSV with header `r,u0,u1`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "u0", "u1"])?;
        for i in 0..self.u0.len() {
            w.write_record([
                format!("{:.17e}", self.u0.node(i)),
                format!("{:.17e}", self.u0.values[i]),
                format!("{:.17e}", self.u1.values[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, d: usize) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rs = Vec::new();
        let mut u0 = Vec::new();
        let mut u1 = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec[k].trim().parse().map_err(|e| Error::InvalidInput(format!("bad number {:?}: {e}", &rec[k])))
            };
            rs.push(parse(0)?);
            u0.push(parse(1)?);
            u1.push(parse(2)?);
        }
        if rs.len() < 2 {
            return Err(Error::InvalidInput("need at least two radial samples".into()));
        }
        let spacing = rs[1] - rs[0];
        let origin = rs[0];
        for (i, &r) in rs.iter().enumerate() {
            if ((origin + i as f64 * spacing) - r).abs() > 1e-9 * spacing.max(r.abs()) {
                return Err(Error::InvalidInput("radial grid is not uniform".into()));
            }
        }
        Self::new(d, RadialSamples::new(origin, spacing, u0)?, RadialSamples::new(origin, spacing, u1)?)
    }
}

/// u(., 0) and the analytic u_t(., 0) of a free wave on the grid
/// `origin + i * spacing`, `i < len`.
pub fn initial_data(w: &RadialFreeWave, origin: f64, spacing: f64, len: usize) -> Result<InitialDataPair> {
    if !(origin > 0.0 && spacing > 0.0) {
        return Err(Error::Domain("radial grid must be positive".into()));
    }
    let rs: Vec<f64> = (0..len).map(|i| origin + i as f64 * spacing).collect();
    let u0 = rs.iter().map(|&r| w.eval_unchecked(r, 0.0)).collect();
    let u1 = rs.iter().map(|&r| w.time_derivative(r, 0.0)).collect::<Result<Vec<_>>>()?;
    InitialDataPair::new(
        w.dimension(),
        RadialSamples::new(origin, spacing, u0)?,
        RadialSamples::new(origin, spacing, u1)?,
    )
}

/// Squared homogeneous Sobolev norm of order `s` of a radial function on R^d,
/// through the radial Fourier transform
/// `fhat(rho) = sqrt(2/pi) rho^{(3-d)/2} \int f(r) j_n(rho r) r^{(d+1)/2} dr`, n = (d-3)/2.
pub fn radial_hnorm_squared(f: &RadialSamples, s: f64, d: usize) -> Result<f64> {
    check_dimension(d, 13)?;
    let Some(outer) = f.outer_radius() else {
        return Ok(0.0);
    };
    let n = (d - 3) / 2;
    let dr = f.spacing;
    let rho_max = PI / dr;
    let drho = PI / (8.0 * outer);
    let m = (rho_max / drho).ceil() as usize;
    let last = f.values.iter().rposition(|&v| v != 0.0).unwrap_or(0);
    let weights: Vec<(f64, f64)> = (0..=last)
        .filter(|&i| f.values[i] != 0.0)
        .map(|i| {
            let r = f.node(i);
            (r, f.values[i] * r.powf((d as f64 + 1.0) / 2.0) * dr)
        })
        .collect();
    let pref = (2.0 / PI).sqrt();
    let total: f64 = (0..m)
        .into_par_iter()
        .map(|k| {
            let rho = (k as f64 + 0.5) * drho;
            let mut acc = 0.0;
            for &(r, w) in &weights {
                let x = rho * r;
                let (sx, cx) = x.sin_cos();
                acc += w * spherical_jn_sc(n, x, sx, cx);
            }
            let fhat = pref * rho.powf((3.0 - d as f64) / 2.0) * acc;
            rho.powf(2.0 * s + d as f64 - 1.0) * fhat * fhat
        })
        .sum();
    Ok(sphere_area(d - 1) * total * drho)
}

/// ||(u0, u1)|| in the homogeneous space H^beta x H^{beta-1} of R^d.
pub fn radial_sobolev_norm(data: &InitialDataPair, beta: f64) -> Result<f64> {
    if !(beta > 0.5 && beta < 1.5) {
        return Err(Error::Domain(format!("beta = {beta} is outside (1/2, 3/2)")));
    }
    let a = radial_hnorm_squared(&data.u0, beta, data.d)?;
    let b = radial_hnorm_squared(&data.u1, beta - 1.0, data.d)?;
    Ok((a + b).sqrt())
}

/// Radial grid that carries the initial data of `w` at spacing `dr`.
///
/// The data are compactly supported only when the moments of G up to degree
/// (d-3)/2 vanish; otherwise this returns a precondition error.
pub fn data_grid(w: &RadialFreeWave, dr: f64) -> Result<(f64, f64, usize)> {
    let (lo, hi) = w
        .profile()
        .support()
        .ok_or_else(|| Error::UndefinedRatio("zero profile".into()))?;
    let outer = lo.abs().max(hi.abs());
    let len = (outer / dr).ceil() as usize + 3;
    let origin = 0.5 * dr;
    // the data must vanish past the profile support
    let probe = [outer * 1.25 + dr, outer * 2.0 + dr, outer * 4.0 + dr];
    let inner_scale = (0..len)
        .map(|i| origin + i as f64 * dr)
        .map(|r| w.eval_unchecked(r, 0.0).abs() * r.powf(w.mu()))
        .fold(0.0, f64::max);
    for &r in &probe {
        let tail = w.eval_unchecked(r, 0.0).abs() * r.powf(w.mu());
        if tail > 1e-8 * inner_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(format!(
                "initial data are not compactly supported (relative tail {:.2e} at r = {r}); \
                 the low moments of the profile must vanish",
                tail / inner_scale
            )));
        }
    }
    Ok((origin, dr, len))
}

/// Relative defect of the isometry
/// `||(u0,u1)||^2_{H^beta x H^{beta-1}} = 2 sigma_{d-1} ||G||^2_{H^{beta-1}}`
/// with the data sampled at spacing `dr`.
pub fn isometry_defect_at(w: &RadialFreeWave, beta: f64, dr: f64) -> Result<f64> {
    let order = SobolevOrder::from_beta(beta)?;
    if w.profile().is_zero() {
        return Err(Error::UndefinedRatio("zero profile has zero data norm".into()));
    }
    let (origin, spacing, len) = data_grid(w, dr)?;
    let data = initial_data(w, origin, spacing, len)?;
    let lhs = radial_sobolev_norm(&data, beta)?.powi(2);
    let rhs = 2.0 * sphere_area(w.dimension() - 1) * hnorm_squared(w.profile(), order)?;
    if lhs == 0.0 {
        return Err(Error::UndefinedRatio("data norm vanished".into()));
    }
    Ok((lhs - rhs).abs() / lhs)
}

/// [`isometry_defect_at`] with the data sampled at the profile spacing.
pub fn isometry_defect(w: &RadialFreeWave, beta: f64) -> Result<f64> {
    isometry_defect_at(w, beta, w.profile().spacing())
}

/// L^2_r distance between `r^{(d-1)/2} u_t(r, -T)` and `G(r - T)`, the
/// negative-time radiation limit, over the window `[T + lo, T + hi + diam]`
/// where (lo, hi) is the support of G.
pub fn radiation_limit_defect(w: &RadialFreeWave, time: f64) -> Result<f64> {
    let Some((lo, hi)) = w.profile().support() else {
        return Ok(0.0);
    };
    let diam = hi - lo;
    if !(time > diam) {
        return Err(Error::Window(format!("T = {time} must exceed the support diameter {diam}")));
    }
    let h = w.profile().spacing();
    let start = time + lo;
    let end = time + hi + diam;
    let cells = ((end - start) / h).ceil() as usize;
    let mu = w.mu();
    let g = w.profile();
    let total: f64 = (0..cells)
        .into_par_iter()
        .map(|i| {
            let a = start + i as f64 * h;
            let b = (a + h).min(end);
            let mut acc = 0.0;
            if b > 0.0 {
                for (r, wt) in gauss8().on(a.max(0.0), b) {
                    if r <= 0.0 {
                        continue;
                    }
                    let ut = w.time_derivative(r, -time).unwrap_or(0.0);
                    let diff = r.powf(mu) * ut - g.value_at(r - time);
                    acc += wt * diff * diff;
                }
            }
            acc
        })
        .sum();
    Ok(total.sqrt())
}

/// Writes `r,t,value` rows for the tensor grid `rs x ts`.
pub fn write_field_csv<F: RadialField + ?Sized>(path: &Path, field: &F, rs: &[f64], ts: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "t", "value"])?;
    for &t in ts {
        for &r in rs {
            w.write_record([format!("{r:.17e}"), format!("{t:.17e}"), format!("{:.17e}", field.value(r, t))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Exact moments `\int G(s) s^k ds`, k = 0..=degree, of the interpolant.
pub fn profile_moments(g: &SampledProfile, degree: usize) -> Vec<f64> {
    let mut out = vec![0.0; degree + 1];
    let h = g.spacing();
    let s = g.samples();
    for i in 0..g.len() - 1 {
        if s[i] == 0.0 && s[i + 1] == 0.0 {
            continue;
        }
        let a = g.node(i);
        for (x, w) in gauss8().on(a, a + h) {
            let gv = s[i] + (s[i + 1] - s[i]) * (x - a) / h;
            let mut p = w * gv;
            for v in out.iter_mut() {
                *v += p;
                p *= x;
            }
        }
    }
    out
}

/// Subtracts a combination of smooth bumps times monomials so that the
/// moments of degree <= `degree` vanish; the resulting free wave has
/// compactly supported initial data.
pub fn remove_low_moments(g: &SampledProfile, degree: usize) -> Result<SampledProfile> {
    let Some((lo, hi)) = g.support() else {
        return Ok(g.clone());
    };
    let c = 0.5 * (lo + hi);
    let l = 0.5 * (hi - lo);
    let basis: Vec<SampledProfile> = (0..=degree)
        .map(|j| {
            let samples = (0..g.len())
                .map(|i| {
                    let x = (g.node(i) - c) / l;
                    if x.abs() >= 1.0 {
                        0.0
                    } else {
                        (1.0 - x * x).powi(4) * x.powi(j as i32)
                    }
                })
                .collect();
            SampledProfile::new(samples, g.spacing(), g.origin())
        })
        .collect::<Result<_>>()?;
    // moments about c, scaled, to keep the system well conditioned
    let shifted = |p: &SampledProfile| -> Vec<f64> {
        let shifted = SampledProfile::new(p.samples().to_vec(), p.spacing() / l, (p.origin() - c) / l).unwrap();
        profile_moments(&shifted, degree)
    };
    let n = degree + 1;
    let mut mat = vec![vec![0.0; n + 1]; n];
    for (j, b) in basis.iter().enumerate() {
        for (k, v) in shifted(b).into_iter().enumerate() {
            mat[k][j] = v;
        }
    }
    for (k, v) in shifted(g).into_iter().enumerate() {
        mat[k][n] = v;
    }
    let coef = solve_dense(mat)?;
    let mut samples = g.samples().to_vec();
    for (cj, b) in coef.iter().zip(&basis) {
        for (s, v) in samples.iter_mut().zip(b.samples()) {
            *s -= cj * v;
        }
    }
    SampledProfile::new(samples, g.spacing(), g.origin())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub(crate) fn solve_dense(mut m: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-300 {
            return Err(Error::InvalidInput("singular linear system".into()));
        }
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::GridSpec;

    fn smooth_profile(h: f64, lo: f64, hi: f64) -> SampledProfile {
        let grid = GridSpec::covering(lo - 0.5, hi + 0.5, h).unwrap();
        SampledProfile::from_fn(grid, |s| {
            if s <= lo || s >= hi {
                0.0
            } else {
                let x = (2.0 * s - lo - hi) / (hi - lo);
                (1.0 - x * x).powi(6) * (1.0 + 0.5 * (3.0 * s).sin())
            }
        })
        .unwrap()
    }

    /// Cell-by-cell Gauss quadrature of the explicit formula, independent of the moment table.
    fn direct(w: &RadialFreeWave, r: f64, t: f64) -> f64 {
        let g = w.profile();
        let mu = (w.dimension() as f64 - 1.0) / 2.0;
        let mut acc = 0.0;
        for i in 0..g.len() - 1 {
            let a = g.node(i).max(t - r);
            let b = g.node(i + 1).min(t + r);
            if b > a {
                for (s, wt) in gauss8().on(a, b) {
                    acc += wt * g.value_at(s) * w.kernel().eval((s - t) / r);
                }
            }
        }
        r.powf(-mu) * acc
    }

    #[test]
    fn zero_profile_gives_zero_wave() {
        let g = SampledProfile::zeros(GridSpec::new(0.1, -1.0, 21).unwrap());
        let w = RadialFreeWave::new(g, 5).unwrap();
        assert_eq!(w.evaluate(1.0, 0.3).unwrap(), 0.0);
        assert_eq!(w.time_derivative(1.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn indicator_profile_in_three_dimensions() {
        // G = chi_[-1,1] sampled so that the interpolant is 1 on [-1, 1]
        // apart from one ramp cell on each side.
        let h = 1e-3;
        let grid = GridSpec::covering(-1.5, 1.5, h).unwrap();
        let g = SampledProfile::from_fn(grid, |s| if s.abs() <= 1.0 + 1e-12 { 1.0 } else { 0.0 }).unwrap();
        let w = RadialFreeWave::new(g, 3).unwrap();
        let v = w.evaluate(2.0, 0.0).unwrap();
        // (1/2) * |[-2, 2] cap [-1, 1]| plus the two half-cell ramps
        assert!((v - (1.0 + h / 2.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let w = RadialFreeWave::new(smooth_profile(0.01, 1.0, 2.0), 3).unwrap();
        assert!(matches!(w.evaluate(0.0, 1.0), Err(Error::Domain(_))));
        assert!(w.value(-1.0, 0.0).is_nan());
    }

    #[test]
    fn moment_path_matches_direct_quadrature() {
        let g = smooth_profile(1.0 / 256.0, -3.0, 2.0);
        for d in [3, 5, 7, 9] {
            let w = RadialFreeWave::new(g.clone(), d).unwrap();
            for &(r, t) in &[(0.01, 0.3), (0.5, -1.0), (2.0, 0.7), (4.0, 0.0), (6.0, -5.0), (30.0, 31.0)] {
                let a = w.evaluate(r, t).unwrap();
                let b = direct(&w, r, t);
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-6), "d={d} r={r} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn time_symmetry_is_exact() {
        let g = smooth_profile(1.0 / 128.0, -1.0, 2.5);
        let gr = g.reflected();
        for d in [3, 5, 7] {
            let w = RadialFreeWave::new(g.clone(), d).unwrap();
            let wr = RadialFreeWave::new(gr.clone(), d).unwrap();
            for &(r, t) in &[(0.3, 0.2), (1.5, -0.7), (3.0, 2.0)] {
                let a = w.evaluate(r, t).unwrap();
                let sign = if ((d - 3) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let b = sign * wr.evaluate(r, -t).unwrap();
                assert!((a - b).abs() <= 1e-11 * a.abs().max(1e-8), "d={d}");
            }
        }
    }

    #[test]
    fn time_derivative_matches_centered_difference() {
        let g = smooth_profile(1.0 / 512.0, 0.5, 2.0);
        for d in [3, 5, 7] {
            let w = RadialFreeWave::new(g.clone(), d).unwrap();
            for &(r, t) in &[(1.0, 0.0), (1.7, 0.3), (2.5, -0.4)] {
                let h = 1e-4;
                let fd = (w.evaluate(r, t + h).unwrap() - w.evaluate(r, t - h).unwrap()) / (2.0 * h);
                let an = w.time_derivative(r, t).unwrap();
                assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "d={d} r={r} t={t}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn three_dimensional_u1_formula() {
        let g = smooth_profile(1.0 / 256.0, -2.0, 1.5);
        let w = RadialFreeWave::new(g.clone(), 3).unwrap();
        let data = initial_data(&w, 0.05, 0.05, 60).unwrap();
        for i in 0..data.u1.len() {
            let r = data.u1.node(i);
            let expected = (g.value_at(r) - g.value_at(-r)) / r;
            assert!((data.u1.values[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_removal() {
        let g = smooth_profile(1.0 / 128.0, 0.5, 3.0);
        for deg in 0..4 {
            let clean = remove_low_moments(&g, deg).unwrap();
            let m = profile_moments(&clean, deg);
            let scale = profile_moments(&g, 0)[0].abs();
            assert!(m.iter().all(|v| v.abs() < 1e-12 * scale * 3f64.powi(deg as i32)), "{m:?}");
        }
    }

    #[test]
    fn data_with_tails_are_rejected() {
        let g = smooth_profile(1.0 / 64.0, 0.5, 2.0);
        let w = RadialFreeWave::new(g, 3).unwrap();
        assert!(matches!(isometry_defect(&w, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn gradient_norm_in_three_dimensions() {
        // u0 = (1 - r^2)^4 on r < 1: ||u0||^2_{H^1} = 4 pi \int u0'(r)^2 r^2 dr.
        let dr = 1.0 / 400.0;
        let u0 = RadialSamples::from_fn(0.5 * dr, dr, 420, |r| if r < 1.0 { (1.0 - r * r).powi(4) } else { 0.0 })
            .unwrap();
        let spectral = radial_hnorm_squared(&u0, 1.0, 3).unwrap();
        let exact = 4.0 * PI * crate::quadrature::gauss16().integrate(0.0, 1.0, |r| {
            let du = -8.0 * r * (1.0 - r * r).powi(3);
            du * du * r * r
        });
        assert!((spectral - exact).abs() < 1e-3 * exact, "{spectral} vs {exact}");
    }

    #[test]
    fn sobolev_norm_scaling() {
        let dr = 1.0 / 200.0;
        let f = |r: f64| if r < 1.0 { (1.0 - r * r).powi(5) } else { 0.0 };
        let beta = 0.8;
        let d = 5;
        let data = InitialDataPair::new(
            d,
            RadialSamples::from_fn(0.5 * dr, dr, 220, f).unwrap(),
            RadialSamples::from_fn(0.5 * dr, dr, 220, |r| f(r) * (3.0 * r).cos()).unwrap(),
        )
        .unwrap();
        let lambda: f64 = 2.0;
        let scaled = InitialDataPair::new(
            d,
            RadialSamples::new(lambda * 0.5 * dr, lambda * dr, data.u0.values.iter().map(|v| v * lambda.powf(-(d as f64) / 2.0 + beta)).collect()).unwrap(),
            RadialSamples::new(lambda * 0.5 * dr, lambda * dr, data.u1.values.iter().map(|v| v * lambda.powf(-(d as f64) / 2.0 - 1.0 + beta)).collect()).unwrap(),
        )
        .unwrap();
        let a = radial_sobolev_norm(&data, beta).unwrap();
        let b = radial_sobolev_norm(&scaled, beta).unwrap();
        assert!((a - b).abs() < 1e-6 * a);
        assert_eq!(radial_sobolev_norm(&InitialDataPair::zero(3, 0.1, 0.1, 10).unwrap(), 1.0).unwrap(), 0.0);
        assert!(radial_sobolev_norm(&data, 1.5).is_err());
    }
}
