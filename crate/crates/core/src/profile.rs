//! One-dimensional radiation profiles on a uniform grid.
//!
//! A [`SampledProfile`] holds samples `g(origin + i * spacing)` of a compactly
//! supported function; between samples it is the piecewise-linear interpolant.
//! The homogeneous Sobolev norm
//!
//! ```text
//! ||g||_{H^gamma}^2 = \int |xi|^{2 gamma} |ghat(xi)|^2 dxi,   ghat(xi) = (2 pi)^{-1/2} \int g(s) e^{-i s xi} ds
//! ```
//!
//! is evaluated with a zero-padded FFT. Each frequency bin carries the average
//! of `|xi|^{2 gamma}` over its cell, which keeps the `xi = 0` bin finite for
//! negative `gamma` and makes the `gamma = 0` case reduce exactly to the
//! discrete Parseval identity.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum zero-padding factor applied before the FFT.
pub const HNORM_PADDING: usize = 16;

/// Uniform grid description; also the JSON sidecar of the profile CSV format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spacing: f64,
    pub origin: f64,
    pub length: usize,
}

impl GridSpec {
    pub fn new(spacing: f64, origin: f64, length: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {spacing}")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        if length < 3 {
            return Err(Error::InvalidInput(format!("grid needs at least 3 points, got {length}")));
        }
        Ok(Self { spacing, origin, length })
    }

    /// Smallest grid with the given spacing whose nodes sit on integer
    /// multiples of `spacing` and cover `[lo, hi]` with one spare node per side.
    pub fn covering(lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidInput(format!("empty range [{lo}, {hi}]")));
        }
        let first = (lo / spacing).floor() as i64 - 1;
        let last = (hi / spacing).ceil() as i64 + 1;
        Self::new(spacing, first as f64 * spacing, (last - first + 1) as usize)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.node(self.length - 1)
    }
}

/// Closed interval with possibly infinite endpoints. `lo > hi` is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn everything() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Sobolev order `gamma` of a profile norm, restricted to (-1/2, 1/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevOrder(f64);

impl SobolevOrder {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > -0.5 && gamma < 0.5 {
            Ok(Self(gamma))
        } else {
            Err(Error::Domain(format!("gamma = {gamma} is outside (-1/2, 1/2)")))
        }
    }

    /// Profile order `beta - 1` for a data order `beta` in (1/2, 3/2).
    pub fn from_beta(beta: f64) -> Result<Self> {
        if beta > 0.5 && beta < 1.5 {
            Self::new(beta - 1.0)
        } else {
            Err(Error::Domain(format!("beta = {beta} is outside (1/2, 3/2)")))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.0
    }

    pub fn beta(&self) -> f64 {
        self.0 + 1.0
    }
}

/// Compactly supported profile sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    samples: Vec<f64>,
    spacing: f64,
    origin: f64,
}

impl SampledProfile {
    /// Validates finiteness, positive spacing and vanishing end samples.
    pub fn new(samples: Vec<f64>, spacing: f64, origin: f64) -> Result<Self> {
        GridSpec::new(spacing, origin, samples.len())?;
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {i} is not finite")));
        }
        if samples[0] != 0.0 || samples[samples.len() - 1] != 0.0 {
            return Err(Error::InvalidInput(
                "samples must vanish at both ends of the grid (compact support)".into(),
            ));
        }
        Ok(Self { samples, spacing, origin })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { samples: vec![0.0; grid.length], spacing: grid.spacing, origin: grid.origin }
    }

    /// Samples `f` on `grid`; the end samples must come out as zero.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: GridSpec, f: F) -> Result<Self> {
        let samples = (0..grid.length).map(|i| f(grid.node(i))).collect();
        Self::new(samples, grid.spacing, grid.origin)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { spacing: self.spacing, origin: self.origin, length: self.samples.len() }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    /// Index range `[first, last]` of nonzero samples.
    pub fn nonzero_range(&self) -> Option<(usize, usize)> {
        let first = self.samples.iter().position(|&v| v != 0.0)?;
        let last = self.samples.iter().rposition(|&v| v != 0.0)?;
        Some((first, last))
    }

    /// Open interval outside of which the interpolant vanishes identically.
    pub fn support(&self) -> Option<(f64, f64)> {
        let (first, last) = self.nonzero_range()?;
        Some((self.node(first - 1), self.node(last + 1)))
    }

    /// Piecewise-linear interpolant; zero outside the grid.
    pub fn value_at(&self, s: f64) -> f64 {
        let x = (s - self.origin) / self.spacing;
        if !(x >= 0.0) {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i + 1 >= self.samples.len() {
            return if i + 1 == self.samples.len() && x == i as f64 { self.samples[i] } else { 0.0 };
        }
        let frac = x - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest forward difference quotient, the grid stand-in for sup |g'|.
    pub fn sup_derivative(&self) -> f64 {
        self.samples
            .windows(2)
            .fold(0.0, |m, w| m.max(((w[1] - w[0]) / self.spacing).abs()))
    }

    /// Exact L^2 norm of the piecewise-linear interpolant.
    pub fn l2_norm(&self) -> f64 {
        let h = self.spacing;
        self.samples
            .windows(2)
            .map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
            .sum::<f64>()
            .sqrt()
    }

    /// Trapezoid L^2 norm, sqrt(h * sum g_i^2); the discrete Parseval partner of [`hnorm`] at gamma = 0.
    pub fn l2_norm_discrete(&self) -> f64 {
        (self.spacing * self.samples.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Same samples on a grid stretched by `lambda`: g(s / lambda).
    pub fn dilated(&self, lambda: f64) -> Self {
        Self { samples: self.samples.clone(), spacing: self.spacing * lambda, origin: self.origin * lambda }
    }

    /// Reflection s -> -s.
    pub fn reflected(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self { samples, spacing: self.spacing, origin: -self.node(self.len() - 1) }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            spacing: self.spacing,
            origin: self.origin,
        }
    }

    /// Pointwise sum with a profile on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::InvalidInput("profiles live on different grids".into()));
        }
        Ok(Self {
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
            spacing: self.spacing,
            origin: self.origin,
        })
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.samples.len() == other.samples.len()
            && self.spacing == other.spacing
            && self.origin == other.origin
    }

    /// Shrinks the grid to the support plus one zero sample on each side.
    pub fn trimmed(&self) -> Self {
        match self.nonzero_range() {
            None => Self { samples: vec![0.0; 3], spacing: self.spacing, origin: self.origin },
            Some((first, last)) => Self {
                samples: self.samples[first - 1..=last + 1].to_vec(),
                spacing: self.spacing,
                origin: self.node(first - 1),
            },
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "value"])?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([format!("{:.17e}", self.node(i)), format!("{v:.17e}")])?;
        }
        w.flush()?;
        let sidecar = path.with_extension("json");
        std::fs::write(sidecar, serde_json::to_string_pretty(&self.grid())?)?;
        Ok(())
    }

    /// Reads the `s,value` CSV; the grid comes from the JSON sidecar next to it.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let grid: GridSpec = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["s", "value"] {
            return Err(Error::InvalidInput(format!("expected header s,value, got {headers:?}")));
        }
        let mut samples = Vec::with_capacity(grid.length);
        for rec in r.records() {
            let rec = rec?;
            let v: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad sample {:?}: {e}", &rec[1])))?;
            samples.push(v);
        }
        if samples.len() != grid.length {
            return Err(Error::InvalidInput(format!(
                "sidecar says {} samples, CSV has {}",
                grid.length,
                samples.len()
            )));
        }
        Self::new(samples, grid.spacing, grid.origin)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// Average of |xi|^{2 gamma} over the frequency cell of bin `m` (|m| taken).
fn cell_weight(m: usize, dxi: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 1.0;
    }
    let a = 2.0 * gamma + 1.0;
    let mf = m as f64;
    let scale = dxi.powf(2.0 * gamma);
    if m == 0 {
        scale * 2.0 * 0.5f64.powf(a) / a
    } else {
        scale * ((mf + 0.5).powf(a) - (mf - 0.5).powf(a)) / a
    }
}

/// Homogeneous Sobolev norm of order `gamma` (unitary Fourier convention).
pub fn hnorm(g: &SampledProfile, gamma: SobolevOrder) -> Result<f64> {
    Ok(hnorm_squared(g, gamma)?.sqrt())
}

pub fn hnorm_squared(g: &SampledProfile, gamma: SobolevOrder) -> Result<f64> {
    let gamma = gamma.gamma();
    let Some((first, last)) = g.nonzero_range() else {
        return Ok(0.0);
    };
    let span = last - first + 1;
    let n = (HNORM_PADDING * span).next_power_of_two();
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for (slot, &v) in buf.iter_mut().zip(&g.samples()[first..=last]) {
        slot.re = v;
    }
    forward_fft(n).process(&mut buf);
    let h = g.spacing();
    let dxi = 2.0 * PI / (n as f64 * h);
    let mut acc = 0.0;
    for (m, c) in buf.iter().enumerate() {
        let k = m.min(n - m);
        acc += cell_weight(k, dxi, gamma) * c.norm_sqr();
    }
    let value = acc * h / n as f64;
    if !value.is_finite() {
        return Err(Error::InvalidInput("non-finite Sobolev norm".into()));
    }
    Ok(value)
}

/// chi_J g on the same grid, with the endpoints of J snapped to the nearest node.
pub fn sharp_cutoff(g: &SampledProfile, interval: Interval) -> SampledProfile {
    if interval.is_empty() {
        return SampledProfile::zeros(g.grid());
    }
    let h = g.spacing();
    let to_index = |s: f64| -> f64 {
        if s.is_infinite() {
            s
        } else {
            ((s - g.origin()) / h).round()
        }
    };
    let lo = to_index(interval.lo);
    let hi = to_index(interval.hi);
    let samples = g
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = i as f64;
            if x >= lo && x <= hi {
                v
            } else {
                0.0
            }
        })
        .collect();
    SampledProfile { samples, spacing: g.spacing(), origin: g.origin() }
}

/// Dyadic index set J_k = [-2^{k+1}, -2^k] U [2^k, 2^{k+1}].
pub fn dyadic_shell(k: i32) -> (f64, f64) {
    (2f64.powi(k), 2f64.powi(k + 1))
}

/// Index k with |s| in [2^k, 2^{k+1}); `None` inside the cell around s = 0.
pub fn dyadic_index(s: f64, spacing: f64) -> Option<i32> {
    let a = s.abs();
    if a < 0.5 * spacing {
        return None;
    }
    Some(a.log2().floor() as i32)
}

/// Sharp restriction of a profile to J_k.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPiece {
    pub k: i32,
    pub piece: SampledProfile,
}

/// Splits `g` into its sharp restrictions to the sets J_k.
///
/// Every sample except the one in the cell around `s = 0` lands in exactly one
/// piece, so the pieces sum back to `g` away from that cell. Pieces that are
/// identically zero are dropped.
pub fn dyadic_decompose(g: &SampledProfile) -> Vec<DyadicPiece> {
    let mut pieces: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (i, &v) in g.samples().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some(k) = dyadic_index(g.node(i), g.spacing()) {
            pieces.entry(k).or_insert_with(|| vec![0.0; g.len()])[i] = v;
        }
    }
    pieces
        .into_iter()
        .map(|(k, samples)| DyadicPiece {
            k,
            piece: SampledProfile { samples, spacing: g.spacing(), origin: g.origin() },
        })
        .collect()
}

/// The piecewise-linear bump phi_k: 1 on [2^k, 2^{k+1}], linear ramps on
/// [2^{k-1}, 2^k] and [2^{k+1}, 3 * 2^k], zero elsewhere (including x <= 0).
pub fn phi(k: i32, x: f64) -> f64 {
    let p = 2f64.powi(k);
    if x <= 0.5 * p || x >= 3.0 * p {
        0.0
    } else if x < p {
        2.0 * x / p - 1.0
    } else if x <= 2.0 * p {
        1.0
    } else {
        3.0 - x / p
    }
}

/// phi_k sampled on `grid`.
pub fn smooth_bump(k: i32, grid: GridSpec) -> Result<SampledProfile> {
    let p = 2f64.powi(k);
    let inside = (2.5 * p / grid.spacing).floor() as usize + 1;
    if inside < 8 {
        return Err(Error::Resolution(format!(
            "only {inside} samples across [2^{}, 3*2^{k}] at spacing {}",
            k - 1,
            grid.spacing
        )));
    }
    if grid.origin > 0.5 * p || grid.end() < 3.0 * p {
        return Err(Error::Resolution(format!("grid does not cover the support of phi_{k}")));
    }
    SampledProfile::from_fn(grid, |x| phi(k, x))
}

/// Products phi_k(|s|) * f(s) for every k whose bump meets the support of `f`.
pub fn smooth_decompose(f: &SampledProfile) -> Vec<(i32, SampledProfile)> {
    let Some((lo, hi)) = f.support() else {
        return Vec::new();
    };
    let amax = lo.abs().max(hi.abs());
    let kmin = (0.5 * f.spacing()).log2().floor() as i32 - 1;
    let kmax = amax.log2().ceil() as i32 + 1;
    (kmin..=kmax)
        .filter_map(|k| {
            let samples: Vec<f64> = f
                .samples()
                .iter()
                .enumerate()
                .map(|(i, &v)| if v == 0.0 { 0.0 } else { v * phi(k, f.node(i).abs()) })
                .collect();
            if samples.iter().all(|&v| v == 0.0) {
                return None;
            }
            Some((k, SampledProfile { samples, spacing: f.spacing(), origin: f.origin() }))
        })
        .collect()
}

/// hnorm(g) divided by the interval bound for a profile supported in `interval`:
/// `|J|^{1/2-gamma} sup|g|` when gamma <= 0 and
/// `|J|^{1/2-gamma} (sup|g| + |J| sup|g'|)` when gamma > 0. The zero profile gives 0.
pub fn hgamma_lemma_ratio(g: &SampledProfile, interval: Interval, gamma: SobolevOrder) -> Result<f64> {
    if interval.is_empty() || !interval.lo.is_finite() || !interval.hi.is_finite() {
        return Err(Error::Precondition("the interval must be finite and nonempty".into()));
    }
    if let Some((lo, hi)) = g.support() {
        let h = g.spacing();
        if lo < interval.lo - h * (1.0 + 1e-9) || hi > interval.hi + h * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "profile support ({lo}, {hi}) is not inside [{}, {}]",
                interval.lo, interval.hi
            )));
        }
    } else {
        return Ok(0.0);
    }
    let len = interval.length();
    let gam = gamma.gamma();
    let amplitude = if gam <= 0.0 { g.sup_abs() } else { g.sup_abs() + len * g.sup_derivative() };
    let bound = len.powf(0.5 - gam) * amplitude;
    Ok(hnorm(g, gamma)? / bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(grid: GridSpec, a: f64, b: f64) -> SampledProfile {
        SampledProfile::from_fn(grid, |s| {
            if s <= a || s >= b {
                0.0
            } else {
                let x = (2.0 * s - a - b) / (b - a);
                (-1.0 / (1.0 - x * x)).exp() * std::f64::consts::E
            }
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(SampledProfile::new(vec![0.0, 1.0, 0.0], 0.0, 0.0).is_err());
        assert!(SampledProfile::new(vec![0.0, f64::NAN, 0.0], 1.0, 0.0).is_err());
        assert!(SampledProfile::new(vec![1.0, 1.0, 0.0], 1.0, 0.0).is_err());
        assert!(SampledProfile::new(vec![0.0, 1.0, 0.0], 1.0, 0.0).is_ok());
    }

    #[test]
    fn sobolev_order_domain() {
        assert!(SobolevOrder::new(0.5).is_err());
        assert!(SobolevOrder::new(-0.5).is_err());
        assert!(SobolevOrder::from_beta(1.5).is_err());
        assert_eq!(SobolevOrder::from_beta(1.25).unwrap().gamma(), 0.25);
    }

    #[test]
    fn zero_profile_has_zero_norm() {
        let g = SampledProfile::zeros(GridSpec::new(0.01, -1.0, 201).unwrap());
        for gam in [-0.4, 0.0, 0.3] {
            assert_eq!(hnorm(&g, SobolevOrder::new(gam).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn parseval_at_gamma_zero() {
        let grid = GridSpec::covering(-3.0, 3.0, 1.0 / 128.0).unwrap();
        let g = SampledProfile::from_fn(grid, |s| {
            if s.abs() >= 2.5 {
                0.0
            } else {
                (3.0 * s).sin() * (1.0 - (s / 2.5).powi(2)).powi(3) + 0.2
                    * (1.0 - (s / 2.5).powi(2)).powi(4)
            }
        })
        .unwrap();
        let spectral = hnorm(&g, SobolevOrder::new(0.0).unwrap()).unwrap();
        let direct = g.l2_norm_discrete();
        assert!((spectral - direct).abs() <= 1e-8 * direct, "{spectral} vs {direct}");
        // The trapezoid and exact interpolant norms agree to O(h^2).
        assert!((g.l2_norm() - direct).abs() < 1e-4 * direct);
    }

    #[test]
    fn gaussian_norm_matches_closed_form() {
        // g = exp(-s^2/2): |ghat|^2 = exp(-xi^2), so ||g||^2 = Gamma(gamma + 1/2).
        let grid = GridSpec::covering(-12.0, 12.0, 1.0 / 64.0).unwrap();
        let g = SampledProfile::from_fn(grid, |s| if s.abs() >= 12.0 { 0.0 } else { (-0.5 * s * s).exp() })
            .unwrap();
        for gam in [-0.25, 0.0, 0.25, 0.45] {
            let got = hnorm_squared(&g, SobolevOrder::new(gam).unwrap()).unwrap();
            let exact = statrs::function::gamma::gamma(gam + 0.5);
            assert!((got - exact).abs() < 2e-4 * exact, "gamma={gam}: {got} vs {exact}");
        }
    }

    #[test]
    fn dilation_scaling_law_is_exact() {
        let grid = GridSpec::covering(0.5, 2.5, 1.0 / 100.0).unwrap();
        let g = bump(grid, 1.0, 2.0);
        for gam in [-0.3, 0.1, 0.4] {
            let order = SobolevOrder::new(gam).unwrap();
            let base = hnorm(&g, order).unwrap();
            for lambda in [0.25, 2.0, 8.0] {
                let scaled = hnorm(&g.dilated(lambda), order).unwrap();
                let expected = lambda.powf(0.5 - gam) * base;
                assert!((scaled - expected).abs() < 1e-10 * expected);
            }
        }
    }

    #[test]
    fn cutoff_identity_and_disjoint_cases() {
        let grid = GridSpec::covering(0.0, 3.0, 0.01).unwrap();
        let g = bump(grid, 1.0, 2.0);
        assert_eq!(sharp_cutoff(&g, Interval::new(0.5, 2.5)), g);
        assert_eq!(sharp_cutoff(&g, Interval::everything()), g);
        assert!(sharp_cutoff(&g, Interval::new(2.2, 5.0)).is_zero());
        assert!(sharp_cutoff(&g, Interval::new(2.0, 1.0)).is_zero());
        let half = sharp_cutoff(&g, Interval::new(f64::NEG_INFINITY, 1.5));
        assert_eq!(half.value_at(1.4), g.value_at(1.4));
        assert_eq!(half.value_at(1.6), 0.0);
    }

    #[test]
    fn decomposition_reassembles() {
        let grid = GridSpec::covering(-5.0, 5.0, 1.0 / 32.0).unwrap();
        let g = SampledProfile::from_fn(grid, |s| if s.abs() >= 4.9 { 0.0 } else { (1.3 * s).cos() + 0.5 })
            .unwrap();
        let pieces = dyadic_decompose(&g);
        assert!(pieces.windows(2).all(|w| w[0].k < w[1].k));
        let mut sum = vec![0.0; g.len()];
        for p in &pieces {
            let (a, b) = dyadic_shell(p.k);
            for (i, &v) in p.piece.samples().iter().enumerate() {
                if v != 0.0 {
                    let s = g.node(i).abs();
                    assert!(s >= a && s <= b);
                }
                sum[i] += v;
            }
        }
        for (i, (&a, &b)) in sum.iter().zip(g.samples()).enumerate() {
            if g.node(i).abs() >= 0.5 * g.spacing() {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn decomposition_of_single_shell_and_zero() {
        let grid = GridSpec::covering(0.0, 5.0, 1.0 / 64.0).unwrap();
        let g = bump(grid, 2.1, 3.9);
        let pieces = dyadic_decompose(&g);
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].k, 1);
        assert_eq!(pieces[0].piece, g);
        assert!(dyadic_decompose(&SampledProfile::zeros(grid)).is_empty());
    }

    #[test]
    fn phi_values() {
        for k in [-2, 0, 3] {
            let p = 2f64.powi(k);
            assert_eq!(phi(k, 1.5 * p), 1.0);
            assert_eq!(phi(k, 0.5 * p), 0.0);
            assert_eq!(phi(k, 3.0 * p), 0.0);
            assert_eq!(phi(k, -p), 0.0);
        }
        // At x = 1.5: phi_0 sits on its plateau, phi_1 is halfway up its
        // ramp and phi_{-1} has just reached zero.
        let total: f64 = (-3..=3).map(|k| phi(k, 1.5)).sum();
        assert_eq!(total, 1.5);
        assert_eq!(phi(1, 1.5), 0.5);
        assert_eq!(phi(-1, 1.5), 0.0);
    }

    #[test]
    fn smooth_bump_resolution() {
        let coarse = GridSpec::covering(0.0, 4.0, 0.5).unwrap();
        assert!(matches!(smooth_bump(0, coarse), Err(Error::Resolution(_))));
        let fine = GridSpec::covering(0.0, 4.0, 0.05).unwrap();
        let b = smooth_bump(0, fine).unwrap();
        assert!((b.value_at(1.5) - 1.0).abs() < 1e-12);
        assert!(b.value_at(0.5).abs() < 1e-12 && b.value_at(3.0).abs() < 1e-12);
    }

    #[test]
    fn lemma_ratio_edge_cases() {
        let grid = GridSpec::covering(0.0, 1.0, 0.01).unwrap();
        let zero = SampledProfile::zeros(grid);
        let j = Interval::new(0.0, 1.0);
        assert_eq!(hgamma_lemma_ratio(&zero, j, SobolevOrder::new(0.2).unwrap()).unwrap(), 0.0);
        let g = bump(grid, 0.0, 1.0);
        assert!(hgamma_lemma_ratio(&g, Interval::new(0.2, 0.8), SobolevOrder::new(0.0).unwrap()).is_err());
        assert!(SobolevOrder::new(0.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        let grid = GridSpec::covering(0.0, 3.0, 0.01).unwrap();
        let g = bump(grid, 1.0, 2.0);
        g.write_csv(&path).unwrap();
        let back = SampledProfile::read_csv(&path).unwrap();
        assert_eq!(back, g);
    }
}
