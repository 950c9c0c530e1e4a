//! Channel geometry `Omega_j = {|t| + 2^j <= r < |t| + 2^{j+1}}` and
//! channel-localized `L^p_t L^q_x` norms (time exponent p outside, space
//! exponent q inside).
//!
//! All channels of one computation share a time rule built from dyadic
//! panels `[2^m, 2^{m+1}]`, and each channel's radial integral runs over
//! `rho = r - |t|` in `[2^j, 2^{j+1}]` with panels that scale with `2^j`.
//! Rescaling a field by `lambda = 2^m` therefore maps quadrature nodes onto
//! quadrature nodes.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss8, sphere_area};
use crate::wavefield::{check_dimension, RadialField};

/// Norm convention recorded in every report.
pub const NORM_CONVENTION: &str = "L^p_t L^q_x: (int (int |u|^q dx)^{p/q} dt)^{1/p}";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub d: usize,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub p_tilde: f64,
    pub q_tilde: f64,
}

impl ExponentSet {
    pub fn new(d: usize, beta: f64, p: f64, q: f64, p_tilde: f64, q_tilde: f64) -> Self {
        Self { d, beta, p, q, p_tilde, q_tilde }
    }

    /// The diagonal choice `1/p = 2 (d/2 - beta) / (d + 2)`, `1/q = (d/2 - beta) / (d + 2)`
    /// with forcing exponents `(1, d / (d/2 - beta + 1))`. At beta = 1 this is
    /// the energy-critical pair ((d+2)/(d-2), 2(d+2)/(d-2)) and L^1 L^2.
    pub fn standard(d: usize, beta: f64) -> Result<Self> {
        check_dimension(d, 13)?;
        if !(beta > 0.5 && beta < 1.5) {
            return Err(Error::Domain(format!("beta = {beta} is outside (1/2, 3/2)")));
        }
        let s = d as f64 / 2.0 - beta;
        let e = Self::new(d, beta, (d as f64 + 2.0) / (2.0 * s), (d as f64 + 2.0) / s, 1.0, d as f64 / (s + 1.0));
        debug_assert!(validate_exponents(&e));
        Ok(e)
    }

    /// Solves `1/p + d/q = d/2 - beta` for q.
    pub fn q_for(d: usize, beta: f64, p: f64) -> f64 {
        d as f64 / (d as f64 / 2.0 - beta - 1.0 / p)
    }
}

/// Both rescaling identities to 1e-12 and all ranges respected.
pub fn validate_exponents(e: &ExponentSet) -> bool {
    let d = e.d as f64;
    let finite = [e.p, e.q, e.p_tilde, e.q_tilde].iter().all(|x| x.is_finite() && *x >= 1.0);
    finite
        && e.d % 2 == 1
        && e.d >= 3
        && e.beta > 0.5
        && e.beta < 1.5
        && (1.0 / e.p + d / e.q - (d / 2.0 - e.beta)).abs() <= 1e-12
        && (1.0 / e.p_tilde + d / e.q_tilde - (d / 2.0 - e.beta + 2.0)).abs() <= 1e-12
}

/// `c_n = 2^{(1/2 - beta) n}` for n >= -1 and `2^{n/q}` for n <= -2.
pub fn c_sequence(n: i32, e: &ExponentSet) -> f64 {
    if n >= -1 {
        2f64.powf((0.5 - e.beta) * n as f64)
    } else {
        2f64.powf(n as f64 / e.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRegion {
    pub j: i32,
}

impl ChannelRegion {
    pub fn new(j: i32) -> Self {
        Self { j }
    }

    pub fn inner(&self, t: f64) -> f64 {
        t.abs() + 2f64.powi(self.j)
    }

    pub fn outer(&self, t: f64) -> f64 {
        t.abs() + 2f64.powi(self.j + 1)
    }

    pub fn contains(&self, r: f64, t: f64) -> bool {
        r >= self.inner(t) && r < self.outer(t)
    }

    /// The channel index of (r, t) with r > |t|.
    pub fn locate(r: f64, t: f64) -> Option<i32> {
        let rho = r - t.abs();
        if rho > 0.0 {
            let mut j = rho.log2().floor() as i32;
            // guard against rounding at exact powers of two
            if 2f64.powi(j) > rho {
                j -= 1;
            } else if 2f64.powi(j + 1) <= rho {
                j += 1;
            }
            Some(j)
        } else {
            None
        }
    }
}

/// Closed time interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub lo: f64,
    pub hi: f64,
}

impl TimeWindow {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn all() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { lo: self.lo * lambda, hi: self.hi * lambda }
    }
}

/// Resolution of the space-time quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelQuadrature {
    /// Gauss panels across each channel's radial width.
    pub r_panels: usize,
    /// Gauss panels per time octave [2^m, 2^{m+1}].
    pub t_panels: usize,
    /// Octaves below 2^{jmin} where geometric time panels start.
    pub head_octaves: i32,
    /// Octaves above 2^{jmax + 1} where an unbounded window is cut.
    pub tail_octaves: i32,
    /// Restrict to the exterior r >= R + |t|.
    pub exterior: f64,
}

impl Default for ChannelQuadrature {
    fn default() -> Self {
        Self { r_panels: 2, t_panels: 2, head_octaves: 3, tail_octaves: 16, exterior: 0.0 }
    }
}

impl ChannelQuadrature {
    /// Multiplies both panel counts.
    pub fn refined(&self, factor: usize) -> Self {
        Self { r_panels: self.r_panels * factor, t_panels: self.t_panels * factor, ..*self }
    }

    pub fn with_exterior(&self, radius: f64) -> Self {
        Self { exterior: radius, ..*self }
    }

    /// Time nodes and weights for `window` with panels anchored at powers of two.
    pub fn time_rule(&self, window: TimeWindow, jmin: i32, jmax: i32) -> Vec<(f64, f64)> {
        let m_lo = jmin - self.head_octaves;
        let m_hi = jmax + 1 + self.tail_octaves;
        let cap = 2f64.powi(m_hi);
        let mut panels: Vec<(f64, f64)> = Vec::new();
        let first = 2f64.powi(m_lo);
        let n0 = self.t_panels.max(1);
        for i in 0..n0 {
            panels.push((first * i as f64 / n0 as f64, first * (i + 1) as f64 / n0 as f64));
        }
        for m in m_lo..m_hi {
            let a = 2f64.powi(m);
            let w = a / self.t_panels.max(1) as f64;
            for i in 0..self.t_panels.max(1) {
                panels.push((a + w * i as f64, a + w * (i + 1) as f64));
            }
        }
        let mut out = Vec::new();
        let rule = gauss8();
        for sign in [-1.0, 1.0] {
            // the part of the window on this side, as a range of |t|
            let (alo, ahi) = if sign > 0.0 {
                (window.lo.max(0.0), window.hi.min(cap))
            } else {
                ((-window.hi).max(0.0), (-window.lo).min(cap))
            };
            if !(ahi > alo) {
                continue;
            }
            for &(a, b) in &panels {
                let lo = a.max(alo);
                let hi = b.min(ahi);
                if hi > lo {
                    for (x, w) in rule.on(lo, hi) {
                        out.push((sign * x, w));
                    }
                }
            }
        }
        out
    }

    /// Radial nodes and weights (with the r^{d-1} sigma_{d-1} measure) for channel j at time t.
    fn radial_rule(&self, j: i32, t: f64, d: usize) -> Vec<(f64, f64)> {
        let lo = 2f64.powi(j);
        let hi = 2f64.powi(j + 1);
        let w = (hi - lo) / self.r_panels.max(1) as f64;
        let floor = self.exterior;
        let area = sphere_area(d - 1);
        let mut out = Vec::with_capacity(self.r_panels * 8);
        for i in 0..self.r_panels.max(1) {
            let a = (lo + w * i as f64).max(floor);
            let b = (lo + w * (i + 1) as f64).max(floor);
            if b > a {
                for (rho, wt) in gauss8().on(a, b) {
                    let r = t.abs() + rho;
                    out.push((r, area * wt * r.powi(d as i32 - 1)));
                }
            }
        }
        out
    }
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q.is_finite()) {
        return Err(Error::Domain("infinite exponents are not supported".into()));
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::Domain(format!("exponents must be >= 1, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// Space integrals `a_j(t) = int_{Omega_j(t)} |u|^q dx` on a shared time rule.
#[derive(Debug, Clone)]
pub struct ChannelSlices {
    pub jmin: i32,
    pub jmax: i32,
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    /// `slices[j - jmin][i]` is a_j(times[i]).
    pub slices: Vec<Vec<f64>>,
    /// Channels skipped as identically zero.
    pub skipped: Vec<bool>,
}

impl ChannelSlices {
    /// `(sum_i w_i a_j(t_i)^{p/q})^{1/p}` for each channel.
    pub fn norms(&self, p: f64, q: f64) -> Vec<f64> {
        self.slices
            .iter()
            .map(|a| {
                let s: f64 = a.iter().zip(&self.weights).map(|(v, w)| w * v.powf(p / q)).sum();
                s.powf(1.0 / p)
            })
            .collect()
    }

    /// Norm over the union of the channels, on the same nodes.
    pub fn union_norm(&self, p: f64, q: f64) -> f64 {
        let mut s = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let total: f64 = self.slices.iter().map(|a| a[i]).sum();
            s += w * total.powf(p / q);
        }
        s.powf(1.0 / p)
    }
}

/// Computes the slices of every channel in [jmin, jmax].
pub fn channel_slices<F: RadialField + ?Sized>(
    u: &F,
    d: usize,
    q: f64,
    jmin: i32,
    jmax: i32,
    window: TimeWindow,
    quad: &ChannelQuadrature,
) -> Result<ChannelSlices> {
    check_dimension(d, 13)?;
    check_exponents(1.0, q)?;
    if jmin > jmax {
        return Err(Error::InvalidInput(format!("jmin = {jmin} exceeds jmax = {jmax}")));
    }
    let count = (jmax - jmin + 1) as usize;
    let reach = u.exterior_support_radius();
    let skipped: Vec<bool> = (jmin..=jmax)
        .map(|j| {
            let inner = 2f64.powi(j).max(quad.exterior);
            reach.is_some_and(|rho| inner >= rho) || quad.exterior >= 2f64.powi(j + 1)
        })
        .collect();
    if window.is_empty() {
        return Ok(ChannelSlices { jmin, jmax, times: vec![], weights: vec![], slices: vec![vec![]; count], skipped });
    }
    let rule = quad.time_rule(window, jmin, jmax);
    let columns: Vec<Vec<f64>> = rule
        .par_iter()
        .map(|&(t, _)| {
            (jmin..=jmax)
                .zip(&skipped)
                .map(|(j, &skip)| {
                    if skip {
                        return 0.0;
                    }
                    quad.radial_rule(j, t, d)
                        .into_iter()
                        .map(|(r, w)| {
                            let v = u.value(r, t);
                            if v.is_finite() {
                                w * v.abs().powf(q)
                            } else {
                                f64::NAN
                            }
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    if columns.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Window("field is not defined on the whole channel window".into()));
    }
    let slices = (0..count).map(|c| columns.iter().map(|col| col[c]).collect()).collect();
    Ok(ChannelSlices {
        jmin,
        jmax,
        times: rule.iter().map(|x| x.0).collect(),
        weights: rule.iter().map(|x| x.1).collect(),
        slices,
        skipped,
    })
}

/// `||chi_j u||_{L^p_t L^q_x}` over `window`.
pub fn channel_norm<F: RadialField + ?Sized>(
    u: &F,
    j: i32,
    p: f64,
    q: f64,
    d: usize,
    window: TimeWindow,
    quad: &ChannelQuadrature,
) -> Result<f64> {
    check_exponents(p, q)?;
    let s = channel_slices(u, d, q, j, j, window, quad)?;
    Ok(s.norms(p, q)[0])
}

/// `(sum |v|^s)^{1/s}`.
pub fn lp_aggregate(values: &[f64], s: f64) -> f64 {
    values.iter().map(|v| v.abs().powf(s)).sum::<f64>().powf(1.0 / s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelNormVector {
    pub jmin: i32,
    pub jmax: i32,
    pub values: Vec<f64>,
    pub aggregate: f64,
    pub p: f64,
    pub q: f64,
    pub d: usize,
    /// Norm over the union of the channels with the same quadrature.
    pub union_norm: f64,
    pub skipped: Vec<bool>,
    /// Geometric extrapolation of the l^2 mass below jmin.
    pub lower_tail: f64,
    /// Geometric extrapolation of the l^2 mass above jmax; 0 when those channels vanish.
    pub upper_tail: f64,
}

#[derive(Serialize)]
struct VectorSidecar<'a> {
    aggregate: f64,
    jmin: i32,
    jmax: i32,
    exponents: (f64, f64),
    d: usize,
    union_norm: f64,
    convention: &'a str,
}

impl ChannelNormVector {
    pub fn get(&self, j: i32) -> Option<f64> {
        if j < self.jmin || j > self.jmax {
            None
        } else {
            Some(self.values[(j - self.jmin) as usize])
        }
    }

    pub fn lp(&self, s: f64) -> f64 {
        lp_aggregate(&self.values, s)
    }

    /// l^2 aggregate including both tail estimates.
    pub fn completed(&self) -> f64 {
        (self.aggregate.powi(2) + self.lower_tail.powi(2) + self.upper_tail.powi(2)).sqrt()
    }

    /// Writes `j,norm` rows to `path` and the JSON summary to `path.json`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["j", "norm"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([(self.jmin + i as i32).to_string(), format!("{v:.17e}")])?;
        }
        w.flush()?;
        let side = VectorSidecar {
            aggregate: self.aggregate,
            jmin: self.jmin,
            jmax: self.jmax,
            exponents: (self.p, self.q),
            d: self.d,
            union_norm: self.union_norm,
            convention: NORM_CONVENTION,
        };
        let mut js = path.as_os_str().to_owned();
        js.push(".json");
        std::fs::write(std::path::PathBuf::from(js), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }
}

/// `(sum_{i >= 1} (edge x^i)^2)^{1/2}` with x the measured ratio edge / inner,
/// or `fallback` when that ratio does not decay.
fn geometric_tail(edge: f64, inner: f64, fallback: f64) -> f64 {
    if edge == 0.0 {
        return 0.0;
    }
    let mut x = if inner > 0.0 { edge / inner } else { f64::INFINITY };
    if !(x < 1.0) {
        x = fallback;
    }
    if !(x < 1.0) {
        return f64::INFINITY;
    }
    edge * x / (1.0 - x * x).sqrt()
}

/// Tail below the window for norms that approach `v_j ~ a rho^{-j} (1 + b 2^j)`
/// with `rho = 2^{-1/q}`; `b` is fitted on the two lowest channels. Plain
/// geometric extrapolation when they already decay faster than `rho`.
fn lower_tail(edge: f64, inner: f64, rho: f64) -> f64 {
    if edge == 0.0 {
        return 0.0;
    }
    if !(inner > 0.0) || edge / inner <= rho {
        return geometric_tail(edge, inner, rho);
    }
    let y = rho * inner / edge;
    let b = (y - 1.0) / (2.0 - y);
    let a = edge / (1.0 + b);
    let s = |x: f64| x / (1.0 - x);
    let r2 = rho * rho;
    a * (s(r2) + 2.0 * b * s(r2 / 2.0) + b * b * s(r2 / 4.0)).max(0.0).sqrt()
}

/// Channel norms for j in [jmin, jmax] with exponents (p, q) and their l^2 aggregate.
#[allow(clippy::too_many_arguments)]
pub fn channel_vector_pq<F: RadialField + ?Sized>(
    u: &F,
    d: usize,
    p: f64,
    q: f64,
    jmin: i32,
    jmax: i32,
    window: TimeWindow,
    quad: &ChannelQuadrature,
) -> Result<ChannelNormVector> {
    check_exponents(p, q)?;
    let s = channel_slices(u, d, q, jmin, jmax, window, quad)?;
    let values = s.norms(p, q);
    let n = values.len();
    let lower_tail = if quad.exterior >= 2f64.powi(jmin) {
        // channels below jmin lie inside the excluded region
        0.0
    } else if n < 2 {
        f64::NAN
    } else {
        lower_tail(values[0], values[1], 2f64.powf(-1.0 / q))
    };
    let upper_tail = if s.skipped[n - 1] {
        0.0
    } else if n < 2 {
        f64::NAN
    } else {
        geometric_tail(values[n - 1], values[n - 2], f64::INFINITY)
    };
    Ok(ChannelNormVector {
        jmin,
        jmax,
        lower_tail,
        upper_tail,
        aggregate: lp_aggregate(&values, 2.0),
        union_norm: s.union_norm(p, q),
        values,
        p,
        q,
        d,
        skipped: s.skipped,
    })
}

/// [`channel_vector_pq`] with the solution exponents of `e`.
pub fn channel_vector<F: RadialField + ?Sized>(
    u: &F,
    e: &ExponentSet,
    jmin: i32,
    jmax: i32,
    window: TimeWindow,
    quad: &ChannelQuadrature,
) -> Result<ChannelNormVector> {
    channel_vector_pq(u, e.d, e.p, e.q, jmin, jmax, window, quad)
}

/// Exponents of the Y norm: ((d+2)/(d-2), 2(d+2)/(d-2)).
pub fn y_exponents(d: usize) -> (f64, f64) {
    let d = d as f64;
    ((d + 2.0) / (d - 2.0), 2.0 * (d + 2.0) / (d - 2.0))
}

/// l^2 over channels of the L^{(d+2)/(d-2)} L^{2(d+2)/(d-2)} norms.
pub fn y_norm<F: RadialField + ?Sized>(
    u: &F,
    d: usize,
    jmin: i32,
    jmax: i32,
    window: TimeWindow,
    quad: &ChannelQuadrature,
) -> Result<ChannelNormVector> {
    let (p, q) = y_exponents(d);
    channel_vector_pq(u, d, p, q, jmin, jmax, window, quad)
}

/// l^2 over channels of the L^1 L^2 norms.
pub fn z_norm<F: RadialField + ?Sized>(
    f: &F,
    d: usize,
    jmin: i32,
    jmax: i32,
    window: TimeWindow,
    quad: &ChannelQuadrature,
) -> Result<ChannelNormVector> {
    channel_vector_pq(f, d, 1.0, 2.0, jmin, jmax, window, quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exponent_validation() {
        assert!(validate_exponents(&ExponentSet::new(3, 1.0, 5.0, 10.0, 1.0, 2.0)));
        assert!(!validate_exponents(&ExponentSet::new(3, 1.0, 4.0, 10.0, 1.0, 2.0)));
        let q = ExponentSet::q_for(5, 1.0, 7.0 / 3.0);
        let e = ExponentSet::new(5, 1.0, 7.0 / 3.0, q, 1.0, 2.0);
        assert!(validate_exponents(&e), "q = {q}");
        assert!(!validate_exponents(&ExponentSet::new(3, 1.5, 5.0, 10.0, 1.0, 2.0)));
        for beta in [0.75, 1.0, 1.25] {
            for d in [3, 5, 7] {
                assert!(validate_exponents(&ExponentSet::standard(d, beta).unwrap()));
            }
        }
        let s = ExponentSet::standard(3, 1.0).unwrap();
        assert!((s.p - 5.0).abs() < 1e-12 && (s.q - 10.0).abs() < 1e-12);
        assert!((s.q_tilde - 2.0).abs() < 1e-12);
    }

    #[test]
    fn c_sequence_values() {
        let e = ExponentSet::new(3, 1.0, 5.0, 10.0, 1.0, 2.0);
        assert_eq!(c_sequence(0, &e), 1.0);
        assert!((c_sequence(2, &e) - 0.5).abs() < 1e-15);
        assert!((c_sequence(-2, &e) - 0.870_550_563_296_123).abs() < 1e-12);
    }

    #[test]
    fn locate_channels() {
        assert_eq!(ChannelRegion::locate(3.0, 1.0), Some(1));
        assert_eq!(ChannelRegion::locate(1.5, -1.0), Some(-1));
        assert_eq!(ChannelRegion::locate(1.0, 1.0), None);
        assert!(ChannelRegion::new(1).contains(3.0, 1.0));
        assert!(!ChannelRegion::new(1).contains(5.0, 1.0));
    }

    #[test]
    fn zero_field_and_empty_window() {
        let z = |_r: f64, _t: f64| 0.0;
        let q = ChannelQuadrature::default();
        assert_eq!(channel_norm(&z, 0, 5.0, 10.0, 3, TimeWindow::all(), &q).unwrap(), 0.0);
        let one = |_r: f64, _t: f64| 1.0;
        assert_eq!(channel_norm(&one, 0, 2.0, 2.0, 3, TimeWindow::new(1.0, 1.0), &q).unwrap(), 0.0);
        assert!(channel_norm(&one, 0, f64::INFINITY, 2.0, 3, TimeWindow::new(0.0, 1.0), &q).is_err());
    }

    #[test]
    fn constant_slab() {
        // u = 1 on [0, T] in d = 3: int_0^T 4 pi/3 ((t + 2)^3 - (t + 1)^3) dt
        let one = |_r: f64, _t: f64| 1.0;
        let tt = 3.0;
        let v = channel_norm(&one, 0, 2.0, 2.0, 3, TimeWindow::new(0.0, tt), &ChannelQuadrature::default()).unwrap();
        let prim = |t: f64| 4.0 * PI / 3.0 * ((t + 2.0).powi(4) - (t + 1.0).powi(4)) / 4.0;
        let exact = (prim(tt) - prim(0.0)).sqrt();
        assert!((v - exact).abs() < 1e-6 * exact, "{v} vs {exact}");
    }

    #[test]
    fn rescaling_is_an_index_shift() {
        let d = 3;
        let beta = 1.0;
        let e = ExponentSet::standard(d, beta).unwrap();
        let u = |r: f64, t: f64| (-(r - t - 1.3).powi(2)).exp() / r * (1.0 + 0.2 * t.sin());
        let lambda: f64 = 2.0;
        let ul = move |r: f64, t: f64| lambda.powf(-(d as f64) / 2.0 + beta) * u(r / lambda, t / lambda);
        let quad = ChannelQuadrature::default();
        let w = TimeWindow::new(-4.0, 6.0);
        let a = channel_vector(&u, &e, -2, 3, w, &quad).unwrap();
        let b = channel_vector(&ul, &e, -1, 4, w.scaled(lambda), &quad).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }

    #[test]
    fn sandwich_and_monotonicity() {
        let u = |r: f64, t: f64| (-(r - t.abs() - 2.0).powi(2) / 3.0).exp() * (1.0 + r).recip() * (0.3 * t).cos();
        let quad = ChannelQuadrature::default();
        let v = channel_vector_pq(&u, 3, 5.0, 10.0, -3, 4, TimeWindow::new(-8.0, 8.0), &quad).unwrap();
        assert!(v.lp(10.0) <= v.union_norm * (1.0 + 1e-12));
        assert!(v.union_norm <= v.lp(5.0) * (1.0 + 1e-12));
        assert!(v.union_norm <= v.aggregate * (1.0 + 1e-12));
        let wider = channel_vector_pq(&u, 3, 5.0, 10.0, -3, 4, TimeWindow::new(-9.0, 10.0), &quad).unwrap();
        for (a, b) in v.values.iter().zip(&wider.values) {
            assert!(b >= a);
        }
    }

    #[test]
    fn vector_export() {
        let u = |r: f64, t: f64| (-(r - t).powi(2)).exp();
        let v = channel_vector_pq(&u, 3, 2.0, 2.0, 0, 2, TimeWindow::new(0.0, 2.0), &ChannelQuadrature::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        v.write(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("j,norm\n0,"));
        let js: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.csv.json")).unwrap()).unwrap();
        assert_eq!(js["jmax"], 2);
    }
}
