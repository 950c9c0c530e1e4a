//! Exterior solutions of `u_tt - Delta u = F(u)`, `F(u) = ±|u|^{4/(d-2)} u`,
//! on `Omega_R = {r >= R + |t|}` by Picard iteration of
//! `u = S(t)(u0, u1) + Duhamel(chi_R F(u))`, with Y/Z norms measured over
//! the exterior channels.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_vector_pq, y_exponents, ChannelNormVector, ChannelQuadrature, TimeWindow};
use crate::error::{Error, Result};
use crate::propagator::{Axis, DuhamelField, ForcingField, FreeEvolution};
use crate::wavefield::{check_dimension, write_field_csv, InitialDataPair, RadialField, RadialSamples};

/// Free Y-norms at which the measured contraction factor of
/// [`calibration_family`] reaches 1/2 (d = 3 and d = 5).
pub const CALIBRATED_DELTA_D3: f64 = 1.61;
pub const CALIBRATED_DELTA_D5: f64 = 5.26;

/// Amplitudes, in units of the unit-amplitude free Y-norm, scanned by the calibration.
pub const CALIBRATION_NORMS: [f64; 8] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Data for the calibration: `amp * (1 - (r - 2.5)^2)^4` on |r - 2.5| < 1, zero velocity.
pub fn bump_data(d: usize, amp: f64) -> Result<InitialDataPair> {
    let h = 1.0 / 64.0;
    let u0 = RadialSamples::from_fn(0.5 * h, h, 320, |r| {
        let x = r - 2.5;
        if x.abs() < 1.0 {
            amp * (1.0 - x * x).powi(4)
        } else {
            0.0
        }
    })?;
    let u1 = u0.map(|_, _| 0.0);
    InitialDataPair::new(d, u0, u1)
}

/// Unit bump, R = 1, I = [-2, 2], defocusing.
pub fn calibration_family(d: usize) -> Result<ExteriorProblem> {
    ExteriorProblem::new(bump_data(d, 1.0)?, 1.0, -1.0, TimeWindow::new(-2.0, 2.0))
}

/// Runs [`calibrate_threshold`] on [`calibration_family`].
pub fn calibrate_dimension(d: usize, opts: &PicardOptions) -> Result<Calibration> {
    let base = calibration_family(d)?;
    let unit = free_exterior_norm(&base, opts)?;
    let amps: Vec<f64> = CALIBRATION_NORMS.iter().map(|a| a / unit).collect();
    calibrate_threshold(&base, &amps, opts)
}

#[derive(Debug, Clone)]
pub struct ExteriorProblem {
    pub data: InitialDataPair,
    pub radius: f64,
    /// +1 focusing, -1 defocusing.
    pub sign: f64,
    pub window: TimeWindow,
    pub c_f: f64,
}

impl ExteriorProblem {
    pub fn new(data: InitialDataPair, radius: f64, sign: f64, window: TimeWindow) -> Result<Self> {
        check_dimension(data.d, 9)?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {radius}")));
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidInput(format!("sign must be +1 or -1, got {sign}")));
        }
        if !(window.lo <= 0.0 && window.hi >= 0.0 && window.lo.is_finite() && window.hi.is_finite() && window.lo < window.hi)
        {
            return Err(Error::InvalidInput("the time interval must be bounded and contain 0".into()));
        }
        Ok(Self { data, radius, sign, window, c_f: 1.0 })
    }

    pub fn d(&self) -> usize {
        self.data.d
    }

    /// (d + 2) / (d - 2).
    pub fn power(&self) -> f64 {
        let d = self.d() as f64;
        (d + 2.0) / (d - 2.0)
    }

    pub fn nonlinearity(&self, u: f64) -> f64 {
        self.c_f * self.sign * u.abs().powf(self.power() - 1.0) * u
    }

    pub fn in_exterior(&self, r: f64, t: f64) -> bool {
        r >= self.radius + t.abs()
    }

    /// Same problem with the data multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.u0 = out.data.u0.map(|_, v| factor * v);
        out.data.u1 = out.data.u1.map(|_, v| factor * v);
        out
    }
}

/// Field sampled on a uniform (r, t) grid, bilinear in between; zero past the
/// last radius, constant below the first, NaN outside the time range.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub r_axis: Axis,
    pub t_axis: Axis,
    /// `values[it * r_axis.len + ir]`
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(r_axis: Axis, t_axis: Axis, f: F) -> Self {
        let nr = r_axis.len;
        let values = (0..nr * t_axis.len)
            .into_par_iter()
            .map(|n| f(r_axis.node(n % nr), t_axis.node(n / nr)))
            .collect();
        Self { r_axis, t_axis, values }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.r_axis != other.r_axis || self.t_axis != other.t_axis {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self { r_axis: self.r_axis, t_axis: self.t_axis, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rs: Vec<f64> = (0..self.r_axis.len).map(|i| self.r_axis.node(i)).collect();
        let ts: Vec<f64> = (0..self.t_axis.len).map(|i| self.t_axis.node(i)).collect();
        write_field_csv(path, self, &rs, &ts)
    }
}

impl RadialField for SampledField {
    fn value(&self, r: f64, t: f64) -> f64 {
        if !self.t_axis.contains(t) {
            return f64::NAN;
        }
        let (ra, ta) = (self.r_axis, self.t_axis);
        let x = (r - ra.origin) / ra.spacing;
        if x > (ra.len - 1) as f64 {
            return 0.0;
        }
        let x = x.max(0.0);
        let y = ((t - ta.origin) / ta.spacing).clamp(0.0, (ta.len - 1) as f64);
        let i = (x.floor() as usize).min(ra.len - 2);
        let k = (y.floor() as usize).min(ta.len - 2);
        let (wx, wy) = (x - i as f64, y - k as f64);
        let v = |i: usize, k: usize| self.values[k * ra.len + i];
        (1.0 - wy) * ((1.0 - wx) * v(i, k) + wx * v(i + 1, k)) + wy * ((1.0 - wx) * v(i, k + 1) + wx * v(i + 1, k + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Stop once the Y-norm of the successive difference drops below this.
    pub tol: f64,
    /// Smallness threshold on the free Y-norm.
    pub threshold: f64,
    /// Grid spacing in r and t.
    pub spacing: f64,
    pub quadrature: ChannelQuadrature,
}

impl PicardOptions {
    /// Calibrated threshold for d = 3 and d = 5; others must be configured.
    pub fn for_dimension(d: usize) -> Result<Self> {
        let threshold = match d {
            3 => CALIBRATED_DELTA_D3,
            5 => CALIBRATED_DELTA_D5,
            _ => return Err(Error::Config(format!("no calibrated smallness threshold for d = {d}"))),
        };
        Ok(Self { max_iter: 12, tol: 1e-8, threshold, spacing: 1.0 / 16.0, quadrature: ChannelQuadrature::default() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace {
    pub free_norm: f64,
    pub threshold: f64,
    pub tol: f64,
    /// Y-norms of u^(0) = S(t)(data), u^(1), ...
    pub norms: Vec<f64>,
    /// `||u^(n+1) - u^(n)||_Y`.
    pub differences: Vec<f64>,
    /// Ratios of successive differences.
    pub contraction: Vec<f64>,
    /// `||chi_R F(u^(n))||_Z` and `C_F ||u^(n)||_Y^{(d+2)/(d-2)}` on the same quadrature.
    pub z_norms: Vec<f64>,
    pub z_bounds: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `||u - (S(t) data + Duhamel(chi_R F(u)))||_Y` for the returned u.
    pub residual: f64,
}

impl PicardTrace {
    pub fn nonlinear_bound_holds(&self) -> bool {
        self.z_norms.iter().zip(&self.z_bounds).all(|(z, b)| *z <= b * (1.0 + 1e-9) + 1e-300)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Solution of the exterior problem on its grid.
#[derive(Debug, Clone)]
pub struct ExteriorSolution {
    pub field: SampledField,
    pub free: SampledField,
    pub radius: f64,
    pub window: TimeWindow,
}

impl RadialField for ExteriorSolution {
    /// Meaningful on `Omega_R` within the window.
    fn value(&self, r: f64, t: f64) -> f64 {
        self.field.value(r, t)
    }
}

fn data_reach(prob: &ExteriorProblem) -> Option<f64> {
    match (prob.data.u0.outer_radius(), prob.data.u1.outer_radius()) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

struct Solver<'a> {
    prob: &'a ExteriorProblem,
    opts: &'a PicardOptions,
    r_axis: Axis,
    t_axis: Axis,
    jmin: i32,
    jmax: i32,
}

impl<'a> Solver<'a> {
    fn new(prob: &'a ExteriorProblem, opts: &'a PicardOptions) -> Result<Self> {
        Self::with_reach(prob, opts, data_reach(prob))
    }

    fn with_reach(prob: &'a ExteriorProblem, opts: &'a PicardOptions, reach: Option<f64>) -> Result<Self> {
        let h = opts.spacing;
        if !(h > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        let w = prob.window;
        let reach = reach.unwrap_or(prob.radius + h);
        let outer = reach.max(prob.radius + h) + w.lo.abs().max(w.hi) + 2.0 * h;
        let r0 = if prob.radius > 0.0 { prob.radius } else { 0.5 * h };
        let r_axis = Axis::covering(r0, outer, h)?;
        let lo = (w.lo / h).floor() * h;
        let t_axis = Axis::covering(lo, w.hi, h)?;
        let jmin = if prob.radius > 0.0 { prob.radius.log2().floor() as i32 } else { h.log2().floor() as i32 - 2 };
        let jmax = (outer - prob.radius).max(h).log2().ceil() as i32;
        Ok(Self { prob, opts, r_axis, t_axis, jmin, jmax })
    }

    fn quad(&self) -> ChannelQuadrature {
        self.opts.quadrature.with_exterior(self.prob.radius)
    }

    fn y_vector<F: RadialField + ?Sized>(&self, f: &F) -> Result<ChannelNormVector> {
        let (p, q) = y_exponents(self.prob.d());
        channel_vector_pq(f, self.prob.d(), p, q, self.jmin, self.jmax, self.prob.window, &self.quad())
    }

    fn y_norm<F: RadialField + ?Sized>(&self, f: &F) -> Result<f64> {
        Ok(self.y_vector(f)?.completed())
    }

    fn free(&self) -> Result<SampledField> {
        if self.prob.data.is_zero() {
            return Ok(SampledField::from_fn(self.r_axis, self.t_axis, |_, _| 0.0));
        }
        let free = FreeEvolution::new(&self.prob.data)?;
        Ok(SampledField::from_fn(self.r_axis, self.t_axis, |r, t| free.value(r, t)))
    }

    /// S(t) data + Duhamel(chi_R F(u)) on the grid.
    fn apply(&self, free: &SampledField, u: &SampledField) -> Result<SampledField> {
        let nr = self.r_axis.len;
        let prob = self.prob;
        let forcing: Vec<f64> = u
            .values
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                let (r, t) = (self.r_axis.node(n % nr), self.t_axis.node(n / nr));
                if prob.in_exterior(r, t) {
                    prob.nonlinearity(v)
                } else {
                    0.0
                }
            })
            .collect();
        if forcing.iter().all(|v| *v == 0.0) {
            return Ok(free.clone());
        }
        let f = ForcingField::new(prob.d(), self.r_axis, self.t_axis, forcing, None)?;
        let duh = DuhamelField::new(f)?;
        let mut out = SampledField::from_fn(self.r_axis, self.t_axis, |r, t| duh.value(r, t));
        for (o, v) in out.values.iter_mut().zip(&free.values) {
            *o += v;
        }
        Ok(out)
    }

    /// (Z-norm of chi_R F(u), C_F Y(u)^{(d+2)/(d-2)}) with window aggregates on shared nodes.
    fn nonlinear_pair(&self, u: &SampledField) -> Result<(f64, f64)> {
        let prob = self.prob;
        let fu = |r: f64, t: f64| if prob.in_exterior(r, t) { prob.nonlinearity(u.value(r, t)) } else { 0.0 };
        let z = channel_vector_pq(&fu, prob.d(), 1.0, 2.0, self.jmin, self.jmax, prob.window, &self.quad())?.aggregate;
        let y = self.y_vector(u)?.aggregate;
        Ok((z, prob.c_f * y.powf(prob.power())))
    }
}

/// Picard iteration from u^(0) = S(t)(u0, u1). Fails with `NotSmall` when the
/// free Y-norm is not below `opts.threshold`; a run that exhausts
/// `max_iter` returns its trace with `converged = false`.
pub fn picard_solve(prob: &ExteriorProblem, opts: &PicardOptions) -> Result<(ExteriorSolution, PicardTrace)> {
    solve_on(&Solver::new(prob, opts)?)
}

fn solve_on(s: &Solver) -> Result<(ExteriorSolution, PicardTrace)> {
    let (prob, opts) = (s.prob, s.opts);
    let free = s.free()?;
    let free_norm = s.y_norm(&free)?;
    if !(free_norm < opts.threshold) {
        return Err(Error::NotSmall { norm: free_norm, threshold: opts.threshold });
    }
    let mut trace = PicardTrace {
        free_norm,
        threshold: opts.threshold,
        tol: opts.tol,
        norms: vec![free_norm],
        differences: Vec::new(),
        contraction: Vec::new(),
        z_norms: Vec::new(),
        z_bounds: Vec::new(),
        converged: false,
        iterations: 0,
        residual: f64::NAN,
    };
    let mut u = free.clone();
    for _ in 0..opts.max_iter.max(1) {
        let (z, bound) = s.nonlinear_pair(&u)?;
        trace.z_norms.push(z);
        trace.z_bounds.push(bound);
        let next = s.apply(&free, &u)?;
        if next.values.iter().any(|v| !prob.nonlinearity(*v).is_finite()) {
            // diverged
            return Ok((ExteriorSolution { field: u, free, radius: prob.radius, window: prob.window }, trace));
        }
        let diff = s.y_norm(&next.zip_map(&u, |a, b| a - b)?)?;
        if let Some(&prev) = trace.differences.last() {
            trace.contraction.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        trace.differences.push(diff);
        trace.norms.push(s.y_norm(&next)?);
        trace.iterations += 1;
        u = next;
        if diff < opts.tol {
            trace.converged = true;
            break;
        }
    }
    let again = s.apply(&free, &u)?;
    trace.residual = s.y_norm(&again.zip_map(&u, |a, b| a - b)?)?;
    Ok((ExteriorSolution { field: u, free, radius: prob.radius, window: prob.window }, trace))
}

/// `||chi_R S(t)(data)||_{Y(I)}` on the solver's grid.
pub fn free_exterior_norm(prob: &ExteriorProblem, opts: &PicardOptions) -> Result<f64> {
    let s = Solver::new(prob, opts)?;
    s.y_norm(&s.free()?)
}

/// `||u - v||_{Y(I)} / ||chi_R S(t)(u0 - v0, u1 - v1)||_{Y(I)}` for two
/// problems sharing R, I and the data grid.
pub fn lipschitz_check(a: &ExteriorProblem, b: &ExteriorProblem, opts: &PicardOptions) -> Result<f64> {
    if a.radius != b.radius || a.window != b.window || a.d() != b.d() {
        return Err(Error::InvalidInput("problems must share R, I and d".into()));
    }
    if a.data.u0.origin != b.data.u0.origin || a.data.u0.spacing != b.data.u0.spacing {
        return Err(Error::InvalidInput("problems must share the data grid".into()));
    }
    let reach = match (data_reach(a), data_reach(b)) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    let s = Solver::with_reach(a, opts, reach)?;
    let (ua, _) = solve_on(&s)?;
    let (ub, _) = solve_on(&Solver::with_reach(b, opts, reach)?)?;
    let free_diff = ua.free.zip_map(&ub.free, |x, y| x - y)?;
    let den = s.y_norm(&free_diff)?;
    if den == 0.0 {
        return Err(Error::UndefinedRatio("the two problems have the same free exterior solution".into()));
    }
    let num = s.y_norm(&ua.field.zip_map(&ub.field, |x, y| x - y)?)?;
    Ok(num / den)
}

/// Measured contraction against the free Y-norm over a family of amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// (free Y-norm, largest ratio of successive differences), worse sign
    pub samples: Vec<(f64, f64)>,
    /// c in `factor = c * norm^{4/(d-2)}`, fitted on the samples.
    pub constant: f64,
    /// Free norm at which the measured factor reaches 1/2.
    pub delta: f64,
}

/// Perturbation directions probed by the calibration.
pub const CALIBRATION_DIRECTIONS: usize = 6;

/// Contraction factor of the Picard map at the fixed point of `base` scaled
/// by `a`: the largest of the successive-difference ratios and of
/// `||Phi(u + w) - Phi(u)||_Y / ||w||_Y` for small free waves w of the
/// perturbation family, over both signs. None if either run fails to converge.
fn contraction_at(base: &ExteriorProblem, a: f64, run: &PicardOptions) -> Result<(f64, Option<f64>)> {
    let zero = base.scaled(0.0);
    let dirs = (0..CALIBRATION_DIRECTIONS).map(|i| perturbed(&zero, i, 1.0)).collect::<Result<Vec<_>>>()?;
    let reach = dirs.iter().chain(std::iter::once(base)).filter_map(data_reach).reduce(f64::max);
    let mut norm = 0.0;
    let mut worst = 0.0f64;
    for sign in [1.0, -1.0] {
        let prob = ExteriorProblem { sign, ..base.scaled(a) };
        let s = Solver::with_reach(&prob, run, reach)?;
        let (sol, trace) = solve_on(&s)?;
        norm = trace.free_norm;
        let mut factor = trace.contraction.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
        if !trace.converged || !(factor < 1.0) {
            return Ok((norm, None));
        }
        let u = &sol.field;
        let phi_u = s.apply(&sol.free, u)?;
        let size = s.y_norm(u)?.max(f64::MIN_POSITIVE);
        for dir in &dirs {
            let w = Solver::with_reach(dir, run, reach)?.free()?;
            let nw = s.y_norm(&w)?;
            if nw == 0.0 {
                continue;
            }
            let eps = 1e-3 * size / nw;
            let phi_v = s.apply(&sol.free, &u.zip_map(&w, |x, y| x + eps * y)?)?;
            factor = factor.max(s.y_norm(&phi_v.zip_map(&phi_u, |x, y| x - y)?)? / (eps * nw));
        }
        worst = worst.max(factor);
    }
    Ok((norm, Some(worst)))
}

/// Runs Picard to convergence on `base` scaled by each amplitude (both
/// signs), measures the contraction factor of the map there, fits
/// `factor = c * y^{4/(d-2)}`, then bisects in amplitude for the free norm
/// where the measured factor equals 1/2.
pub fn calibrate_threshold(base: &ExteriorProblem, amplitudes: &[f64], opts: &PicardOptions) -> Result<Calibration> {
    let run = PicardOptions { threshold: f64::INFINITY, tol: 1e-9, max_iter: 40, ..*opts };
    let expo = base.power() - 1.0;
    let mut amps = amplitudes.to_vec();
    amps.sort_by(f64::total_cmp);
    let mut samples = Vec::new();
    let (mut below, mut above) = (None, None);
    for &a in &amps {
        let (norm, factor) = contraction_at(base, a, &run)?;
        match factor {
            Some(k) if k > 0.0 => {
                samples.push((norm, k));
                if k < 0.5 {
                    below = Some(a);
                } else if above.is_none() {
                    above = Some(a);
                }
            }
            Some(_) => {}
            None => {
                above = above.or(Some(a));
                break;
            }
        }
        if above.is_some() {
            break;
        }
    }
    if samples.is_empty() {
        return Err(Error::InsufficientRange("no calibration run produced a contraction factor".into()));
    }
    let log_c = samples.iter().map(|(y, k)| k.ln() - expo * y.ln()).sum::<f64>() / samples.len() as f64;
    let constant = log_c.exp();
    let (Some(mut lo), Some(mut hi)) = (below, above) else {
        return Err(Error::InsufficientRange("the amplitudes do not bracket a contraction factor of 1/2".into()));
    };
    for _ in 0..8 {
        let mid = (lo * hi).sqrt();
        match contraction_at(base, mid, &run)?.1 {
            Some(k) if k < 0.5 => lo = mid,
            _ => hi = mid,
        }
    }
    let delta = contraction_at(base, lo, &run)?.0;
    Ok(Calibration { samples, constant, delta })
}

/// Member `i` of a deterministic perturbation family: `base` with a bump of
/// height `amplitude * (1 + i % 3)` added to u0, centred in [1.8, 3.3] with
/// width in [0.3, 0.75].
pub fn perturbed(base: &ExteriorProblem, i: usize, amplitude: f64) -> Result<ExteriorProblem> {
    let c = 1.8 + 0.15 * (i % 11) as f64;
    let w = 0.3 + 0.05 * (i % 10) as f64;
    let height = amplitude * (1 + i % 3) as f64;
    let u0 = base.data.u0.map(|r, v| {
        let x = (r - c) / w;
        v + if x.abs() < 1.0 { height * (1.0 - x * x).powi(4) } else { 0.0 }
    });
    let data = InitialDataPair::new(base.d(), u0, base.data.u1.clone())?;
    Ok(ExteriorProblem { data, ..base.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSearch {
    pub quadrature: ChannelQuadrature,
    /// Smallest and largest exponent m of the candidates R = 2^m.
    pub m_range: (i32, i32),
}

/// Smallest R in {0} U {2^m} with `||chi_R S(t)(data)||_{Y(R)} < target`.
pub fn radius_for_global(data: &InitialDataPair, target: f64, search: &RadiusSearch) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Config(format!("target smallness must be positive, got {target}")));
    }
    if data.is_zero() {
        return Ok(0.0);
    }
    let d = data.d;
    let free = FreeEvolution::new(data)?;
    let (p, q) = y_exponents(d);
    let outer = free.data_radius();
    let jmax = outer.log2().ceil() as i32 + 1;
    let candidates = std::iter::once(0.0).chain((search.m_range.0..=search.m_range.1).map(|m| 2f64.powi(m)));
    for radius in candidates {
        if radius >= outer {
            return Ok(radius);
        }
        let jmin = if radius > 0.0 { radius.log2().floor() as i32 } else { data.u0.spacing.log2().floor() as i32 - 2 };
        let quad = search.quadrature.with_exterior(radius);
        let y = channel_vector_pq(&free, d, p, q, jmin, jmax.max(jmin), TimeWindow::all(), &quad)?.completed();
        if y < target {
            return Ok(radius);
        }
    }
    Err(Error::Range(format!(
        "no R up to 2^{} makes the exterior free norm smaller than {target}",
        search.m_range.1
    )))
}
