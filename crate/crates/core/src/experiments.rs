//! Seeded ensemble experiments: single-channel decay, forcing decay, the
//! main-inequality constant and the profile/shell lemma sweeps.
//!
//! Every experiment returns an [`ExperimentReport`] whose summary is a pure
//! function of its rows and of the fit/metric specifications it stores.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::channel::{
    channel_vector, channel_vector_pq, ChannelQuadrature, ExponentSet, TimeWindow, NORM_CONVENTION,
};
use crate::error::{Error, Result};
use crate::fd::{convergence_order, fd_solve, relative_l2, ConvergenceOrder, FdGrid};
use crate::profile::{
    dyadic_decompose, hgamma_lemma_ratio, hnorm, hnorm_squared, sharp_cutoff, smooth_decompose, GridSpec, Interval,
    SampledProfile, SobolevOrder,
};
use crate::propagator::{build_kernel, pointwise_bound_ratio, Axis, DuhamelField, ForcingField};
use crate::quadrature::sphere_area;
use crate::wavefield::{check_dimension, radial_sobolev_norm, InitialDataPair, RadialFreeWave, RadialSamples, Superposition};

// ---------------------------------------------------------------------------
// reports

/// One measured instance. `ratio` is `None` when it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub group: String,
    pub param: f64,
    pub hash: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
}

impl ReportRow {
    pub fn new(index: usize, group: &str, param: f64, hash: String, lhs: f64, rhs: f64) -> Self {
        let ratio = if rhs > 0.0 && lhs.is_finite() && rhs.is_finite() { Some(lhs / rhs) } else { None };
        Self { index, group: group.to_string(), param, hash, lhs, rhs, ratio }
    }
}

/// Least-squares fit of `log2(ratio)` against `param` over one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub name: String,
    pub group: String,
    pub lo: f64,
    pub hi: f64,
    pub predicted: f64,
    pub tolerance: f64,
    /// Use log2 of the parameter as abscissa.
    #[serde(default)]
    pub log_param: bool,
    /// Fit `log2(lhs)` instead of `log2(ratio)`.
    #[serde(default)]
    pub use_lhs: bool,
}

/// Relative change `|max(b) / max(a) - 1|` of two group maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    pub base: String,
    pub other: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width from the residuals.
    pub half_width: f64,
    pub points: usize,
    pub predicted: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    pub count: usize,
    pub defined: usize,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub q50: Option<f64>,
    pub q90: Option<f64>,
    pub q99: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupStats>,
    pub fits: Vec<SlopeFit>,
    pub metrics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub seed: Option<u64>,
    pub exponents: Option<ExponentSet>,
    pub norm_convention: String,
    pub grid: serde_json::Value,
    pub fit_specs: Vec<FitSpec>,
    pub metric_specs: Vec<MetricSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn build(rows: Vec<ReportRow>, provenance: Provenance) -> Result<Self> {
        let summary = summarize(&rows, &provenance.fit_specs, &provenance.metric_specs)?;
        Ok(Self { rows, summary, provenance })
    }

    pub fn group(&self, name: &str) -> impl Iterator<Item = &ReportRow> {
        let name = name.to_string();
        self.rows.iter().filter(move |r| r.group == name)
    }

    pub fn stats(&self, name: &str) -> Option<&GroupStats> {
        self.summary.groups.iter().find(|g| g.group == name)
    }

    pub fn fit(&self, name: &str) -> Option<&SlopeFit> {
        self.summary.fits.iter().find(|f| f.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.summary.metrics.get(name).copied()
    }

    /// True when the stored summary is exactly what the rows produce.
    pub fn is_consistent(&self) -> bool {
        summarize(&self.rows, &self.provenance.fit_specs, &self.provenance.metric_specs)
            .is_ok_and(|s| s == self.summary)
    }

    /// Appends another report's rows, specs and flags (grid and seed are kept).
    pub fn merge(mut self, other: ExperimentReport) -> Result<Self> {
        let offset = self.rows.len();
        self.rows.extend(other.rows.into_iter().map(|mut r| {
            r.index += offset;
            r
        }));
        self.provenance.fit_specs.extend(other.provenance.fit_specs);
        self.provenance.metric_specs.extend(other.provenance.metric_specs);
        let mut flags = self.summary.flags.clone();
        flags.extend(other.summary.flags);
        let mut merged = Self::build(self.rows, self.provenance)?;
        for f in flags {
            if !merged.summary.flags.contains(&f) {
                merged.summary.flags.push(f);
            }
        }
        Ok(merged)
    }

    pub fn write_rows_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "group", "param", "hash", "lhs", "rhs", "ratio"])?;
        for r in &self.rows {
            w.write_record([
                r.index.to_string(),
                r.group.clone(),
                format!("{:.17e}", r.param),
                r.hash.clone(),
                format!("{:.17e}", r.lhs),
                format!("{:.17e}", r.rhs),
                r.ratio.map(|x| format!("{x:.17e}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One gnuplot-readable file `fig_<group>.dat` per group.
    pub fn write_dat_files(&self, dir: &Path) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for g in &self.summary.groups {
            let name = format!("fig_{}.dat", sanitize(&g.group));
            let mut text = format!("# {}\n# param lhs rhs ratio\n", g.group);
            for r in self.group(&g.group) {
                let ratio = r.ratio.map(|x| format!("{x:.10e}")).unwrap_or_else(|| "nan".into());
                text.push_str(&format!("{:.10e} {:.10e} {:.10e} {ratio}\n", r.param, r.lhs, r.rhs));
            }
            std::fs::write(dir.join(&name), text)?;
            names.push(name);
        }
        Ok(names)
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // nearest rank
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Group statistics, slope fits and metrics of a row set.
pub fn summarize(rows: &[ReportRow], fits: &[FitSpec], metrics: &[MetricSpec]) -> Result<Summary> {
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        if !order.contains(&r.group) {
            order.push(r.group.clone());
        }
    }
    let mut flags = Vec::new();
    let groups: Vec<GroupStats> = order
        .iter()
        .map(|g| {
            let members: Vec<&ReportRow> = rows.iter().filter(|r| &r.group == g).collect();
            let mut vals: Vec<f64> = members.iter().filter_map(|r| r.ratio).collect();
            vals.sort_by(f64::total_cmp);
            if vals.is_empty() {
                flags.push(format!("group {g} has no defined ratios"));
            }
            let (max, mean, q50, q90, q99) = if vals.is_empty() {
                (None, None, None, None, None)
            } else {
                (
                    vals.last().copied(),
                    Some(vals.iter().sum::<f64>() / vals.len() as f64),
                    Some(quantile(&vals, 0.5)),
                    Some(quantile(&vals, 0.9)),
                    Some(quantile(&vals, 0.99)),
                )
            };
            GroupStats { group: g.clone(), count: members.len(), defined: vals.len(), max, mean, q50, q90, q99 }
        })
        .collect();
    let mut out_fits = Vec::new();
    for spec in fits {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.group == spec.group && r.param >= spec.lo && r.param <= spec.hi)
            .filter_map(|r| {
                let x = if spec.log_param { r.param.log2() } else { r.param };
                let y = if spec.use_lhs { Some(r.lhs) } else { r.ratio };
                y.filter(|v| *v > 0.0).map(|v| (x, v.log2()))
            })
            .unzip();
        let f = fit_line(&xs, &ys)?;
        out_fits.push(SlopeFit {
            name: spec.name.clone(),
            slope: f.0,
            intercept: f.1,
            half_width: f.2,
            points: xs.len(),
            predicted: spec.predicted,
            tolerance: spec.tolerance,
            pass: (f.0 - spec.predicted).abs() <= spec.tolerance,
        });
    }
    let mut out_metrics = BTreeMap::new();
    for m in metrics {
        let get = |name: &str| groups.iter().find(|g| g.group == name).and_then(|g| g.max);
        let v = match (get(&m.base), get(&m.other)) {
            (Some(a), Some(b)) if a > 0.0 => (b / a - 1.0).abs(),
            _ => f64::NAN,
        };
        out_metrics.insert(m.name.clone(), v);
    }
    Ok(Summary { groups, fits: out_fits, metrics: out_metrics, flags })
}

/// Least squares `y = a + b x`: returns (b, a, 95% half-width of b).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 4 {
        return Err(Error::InsufficientRange(format!("{n} points, need at least 4")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientRange("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = (ssr / (nf - 2.0) / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((b, a, tq * se))
}

/// Hex SHA-256 prefix of a serializable value.
pub fn input_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).unwrap_or_default();
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn profile_hash(g: &SampledProfile) -> String {
    let bits: Vec<u64> = g.samples().iter().map(|v| v.to_bits()).collect();
    input_hash(&(g.spacing().to_bits(), g.origin().to_bits(), bits))
}

fn forcing_hash(f: &ForcingField) -> String {
    let bits: Vec<u64> = f.values().iter().map(|v| v.to_bits()).collect();
    input_hash(&(f.r_axis(), f.t_axis(), bits))
}

// ---------------------------------------------------------------------------
// profile and forcing families

/// `(1 - x^2)^4` on (-1, 1).
pub fn bump_shape(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - x * x).powi(4)
    }
}

/// Profile grid covering [-2^{kmax+1}, 2^{kmax+1}] with `resolution` samples per 2^{kmin}.
pub fn profile_grid(kmin: i32, kmax: i32, resolution: usize) -> Result<GridSpec> {
    let h = 2f64.powi(kmin) / resolution.max(1) as f64;
    let reach = 2f64.powi(kmax + 1) + 2.0 * h;
    GridSpec::covering(-reach, reach, h)
}

/// The fixed bump on [2^k, 2^{k+1}] (mirrored to [-2^{k+1}, -2^k] when `side < 0`).
pub fn dyadic_bump(k: i32, side: f64, amplitude: f64, grid: GridSpec) -> Result<SampledProfile> {
    let c = 1.5 * 2f64.powi(k) * side.signum();
    let w = 0.5 * 2f64.powi(k);
    SampledProfile::from_fn(grid, |s| amplitude * bump_shape((s - c) / w))
}

/// Random band-limited profile on a random subinterval of [-L, L]: a
/// trigonometric sum with frequencies below `band` times a smooth window.
pub fn band_limited_profile<R: Rng>(rng: &mut R, half_width: f64, band: f64, grid: GridSpec) -> Result<SampledProfile> {
    let a = rng.gen_range(-half_width..0.5 * half_width);
    let len = rng.gen_range(0.25 * half_width..(half_width - a).min(1.5 * half_width));
    let b = a + len;
    let modes = rng.gen_range(2..6);
    let terms: Vec<(f64, f64, f64)> =
        (0..modes).map(|_| (rng.gen_range(0.0..band), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))).collect();
    let mid = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    SampledProfile::from_fn(grid, |s| {
        let win = bump_shape((s - mid) / hw);
        if win == 0.0 {
            return 0.0;
        }
        win * (0.3 + terms.iter().map(|(w, c, ph)| c * (w * s + ph).cos()).sum::<f64>())
    })
}

/// Forcing supported in Omega_k for tau in [0, 2^{k+1}]:
/// `A bump((r - tau) / 2^k - 3/2) / 0.4) sin^2(pi tau / 2^{k+1})`.
pub fn channel_forcing(d: usize, k: i32, amplitude: f64, resolution: usize) -> Result<ForcingField> {
    let s = 2f64.powi(k);
    let h = s / resolution.max(4) as f64;
    let r_axis = Axis::covering(0.5 * h, 4.0 * s + 2.0 * h, h)?;
    let t_axis = Axis::covering(0.0, 2.0 * s, h)?;
    let f = ForcingField::from_fn(d, r_axis, t_axis, |r, t| {
        let env = (PI * t / (2.0 * s)).sin().powi(2);
        amplitude * env * bump_shape(((r - t) / s - 1.5) / 0.4)
    })?;
    f.restrict_to_channel(k)
}

// ---------------------------------------------------------------------------
// ensembles

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileFamily {
    DyadicBump,
    BandLimited,
    MultiScaleSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub seed: u64,
    pub count: usize,
    pub family: ProfileFamily,
    pub k_range: (i32, i32),
    pub exponents: ExponentSet,
    /// Samples per 2^{kmin} on the profile and forcing grids.
    pub resolution: usize,
    pub quadrature: ChannelQuadrature,
    /// Channels measured beyond the data's dyadic range on each side.
    pub channel_margin: (i32, i32),
    /// Overall amplitude; 0 gives the zero ensemble.
    pub amplitude: f64,
    /// Largest number of forcing pieces per multi-scale instance.
    pub max_forcings: usize,
}

impl EnsembleSpec {
    pub fn new(seed: u64, count: usize, family: ProfileFamily, d: usize, beta: f64) -> Result<Self> {
        Ok(Self {
            seed,
            count,
            family,
            k_range: (-1, 2),
            exponents: ExponentSet::standard(d, beta)?,
            resolution: 16,
            quadrature: ChannelQuadrature::default(),
            channel_margin: (6, 4),
            amplitude: 1.0,
            max_forcings: 2,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(Error::Config("ensemble count must be at least 1".into()));
        }
        if self.k_range.0 > self.k_range.1 {
            return Err(Error::Config("empty scale range".into()));
        }
        if !crate::channel::validate_exponents(&self.exponents) {
            return Err(Error::Config("exponent set violates the rescaling identities".into()));
        }
        Ok(())
    }

    /// Same ensemble with every resolution parameter doubled.
    pub fn refined(&self) -> Self {
        Self { resolution: self.resolution * 2, quadrature: self.quadrature.refined(2), ..self.clone() }
    }
}

/// Free profile plus forcing pieces of one ensemble member.
#[derive(Debug, Clone)]
pub struct Instance {
    pub profile: SampledProfile,
    pub forcings: Vec<ForcingField>,
}

impl Instance {
    pub fn is_zero(&self) -> bool {
        self.profile.is_zero() && self.forcings.iter().all(|f| f.is_zero())
    }

    pub fn hash(&self) -> String {
        let mut parts = vec![profile_hash(&self.profile)];
        parts.extend(self.forcings.iter().map(forcing_hash));
        input_hash(&parts)
    }
}

/// Instance `index` of `spec`; instance streams are independent, so the first
/// n instances do not depend on `spec.count`.
pub fn generate_instance(spec: &EnsembleSpec, index: usize) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let (kmin, kmax) = spec.k_range;
    let e = &spec.exponents;
    let gamma = e.beta - 1.0;
    let grid = profile_grid(kmin, kmax, spec.resolution)?;
    let mut profile = SampledProfile::zeros(grid);
    let mut forcings = Vec::new();
    let bump = |rng: &mut ChaCha8Rng| -> Result<SampledProfile> {
        let k = rng.gen_range(kmin..=kmax);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let amp = sign * rng.gen_range(0.5..1.5) * 2f64.powf(-(0.5 - gamma) * k as f64);
        dyadic_bump(k, side, amp, grid)
    };
    match spec.family {
        ProfileFamily::DyadicBump => profile = bump(&mut rng)?,
        ProfileFamily::BandLimited => {
            let half = 2f64.powi(kmax + 1);
            let band = 4.0 * PI / 2f64.powi(kmin);
            profile = band_limited_profile(&mut rng, half, band, grid)?;
        }
        ProfileFamily::MultiScaleSum => {
            let pieces = rng.gen_range(3..=8);
            for _ in 0..pieces {
                profile = profile.add(&bump(&mut rng)?)?;
            }
            let nf = rng.gen_range(0..=spec.max_forcings);
            let mut used: Vec<i32> = Vec::new();
            for _ in 0..nf {
                let k = rng.gen_range(kmin..=kmax);
                let amp = rng.gen_range(0.5..1.5) * 2f64.powf(-(e.d as f64 / 2.0 - e.beta + 2.0) * k as f64);
                if used.contains(&k) {
                    continue;
                }
                used.push(k);
                forcings.push(channel_forcing(e.d, k, amp, spec.resolution.max(8))?);
            }
        }
    }
    if spec.amplitude != 1.0 {
        profile = profile.scaled(spec.amplitude);
        forcings = forcings.into_iter().map(|f| f.map(|_, _, v| spec.amplitude * v)).collect::<Result<_>>()?;
    }
    Ok(Instance { profile, forcings })
}

// ---------------------------------------------------------------------------
// measurements

/// Ratio of the solution's channel aggregate to the size of its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainRatio {
    /// l^2 aggregate over the measured channels.
    pub lhs_window: f64,
    /// Window aggregate completed with the geometric tail estimates.
    pub lhs: f64,
    pub data_norm: f64,
    pub forcing_norm: f64,
    pub channel_norms: Vec<f64>,
    pub jmin: i32,
    pub jmax: i32,
}

impl MainRatio {
    pub fn rhs(&self) -> f64 {
        self.data_norm + self.forcing_norm
    }

    pub fn ratio(&self) -> Result<f64> {
        let rhs = self.rhs();
        if !(rhs > 0.0) {
            return Err(Error::UndefinedRatio("the data and the forcing vanish".into()));
        }
        Ok(self.lhs / rhs)
    }
}

/// Initial data of a main-inequality instance.
pub enum FreeData<'a> {
    /// Radiation profile; its data norm is `sqrt(2 sigma_{d-1}) ||G||_{H^{beta-1}}`.
    Profile(&'a SampledProfile),
    Data(&'a InitialDataPair),
}

/// Channel aggregate of u = S(data) + sum of Duhamel(F_i) over [jmin, jmax]
/// against the data norm plus the l^2 of the forcing channel norms.
pub fn main_inequality_ratio(
    data: FreeData<'_>,
    forcings: &[ForcingField],
    e: &ExponentSet,
    window: TimeWindow,
    (jmin, jmax): (i32, i32),
    quad: &ChannelQuadrature,
) -> Result<MainRatio> {
    if !crate::channel::validate_exponents(e) {
        return Err(Error::InvalidInput("exponent set violates the rescaling identities".into()));
    }
    let d = e.d;
    let mut u = Superposition::new();
    let data_norm = match data {
        FreeData::Profile(g) => {
            if !g.is_zero() {
                u.push(RadialFreeWave::new(g.clone(), d)?);
            }
            (2.0 * sphere_area(d - 1)).sqrt() * hnorm(g, SobolevOrder::from_beta(e.beta)?)?
        }
        FreeData::Data(pair) => {
            if pair.d != d {
                return Err(Error::InvalidInput("data dimension differs from the exponent set".into()));
            }
            if !pair.is_zero() {
                u.push(crate::propagator::FreeEvolution::new(pair)?);
            }
            radial_sobolev_norm(pair, e.beta)?
        }
    };
    let mut forcing_sum = Superposition::new();
    let mut fk: Option<(i32, i32)> = None;
    for f in forcings.iter().filter(|f| !f.is_zero()) {
        if f.dimension() != d {
            return Err(Error::InvalidInput("forcing dimension differs from the exponent set".into()));
        }
        let (lo, hi) = f.cone_offset().map(forcing_channels).unwrap_or((jmin, jmax));
        fk = Some(fk.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
        u.push(DuhamelField::new(f.clone())?);
        forcing_sum.push(f.clone());
    }
    let forcing_norm = match fk {
        None => 0.0,
        Some((lo, hi)) => {
            let fw = forcing_window(forcings);
            channel_vector_pq(&forcing_sum, d, e.p_tilde, e.q_tilde, lo - 2, hi, fw, quad)?.aggregate
        }
    };
    if u.is_empty() {
        return Ok(MainRatio {
            lhs_window: 0.0,
            lhs: 0.0,
            data_norm,
            forcing_norm,
            channel_norms: vec![0.0; (jmax - jmin + 1).max(0) as usize],
            jmin,
            jmax,
        });
    }
    let v = channel_vector(&u, e, jmin, jmax, window, quad)?;
    Ok(MainRatio { lhs_window: v.aggregate, lhs: v.completed(), data_norm, forcing_norm, channel_norms: v.values, jmin, jmax })
}

fn forcing_channels(offset: f64) -> (i32, i32) {
    let hi = offset.max(f64::MIN_POSITIVE).log2().ceil() as i32;
    (hi - 3, hi)
}

fn forcing_window(forcings: &[ForcingField]) -> TimeWindow {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in forcings.iter().filter_map(|f| f.time_support()) {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    if lo < hi {
        TimeWindow::new(lo, hi)
    } else {
        TimeWindow::new(0.0, 0.0)
    }
}

fn provenance(experiment: &str, seed: Option<u64>, e: Option<ExponentSet>, grid: serde_json::Value) -> Provenance {
    Provenance {
        experiment: experiment.to_string(),
        seed,
        exponents: e,
        norm_convention: NORM_CONVENTION.to_string(),
        grid,
        fit_specs: Vec::new(),
        metric_specs: Vec::new(),
    }
}

/// Options shared by the decay experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    /// Samples per 2^k on the profile or forcing grid.
    pub resolution: usize,
    pub quadrature: ChannelQuadrature,
    pub upper_tolerance: f64,
    pub lower_tolerance: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { resolution: 32, quadrature: ChannelQuadrature::default(), upper_tolerance: 0.10, lower_tolerance: 0.05 }
    }
}

/// The fixed single-bump profile used by [`single_channel_decay`].
pub fn decay_profile(k: i32, resolution: usize) -> Result<SampledProfile> {
    let grid = profile_grid(k, k, resolution)?;
    dyadic_bump(k, 1.0, 1.0, grid)
}

/// `||chi_j u||_{L^p L^q} / ||G||_{H^{beta-1}}` for j - k over `offsets`, with
/// log2-slope fits on j - k >= 1 (predicted -(beta - 1/2)) and j - k <= -2
/// (predicted 1/q). When only one regime is measured its fit uses every
/// requested offset.
pub fn single_channel_decay(e: &ExponentSet, k: i32, offsets: (i32, i32), opts: &DecayOptions) -> Result<ExperimentReport> {
    let g = decay_profile(k, opts.resolution)?;
    single_channel_decay_for(&g, e, k, offsets, opts)
}

pub fn single_channel_decay_for(
    g: &SampledProfile,
    e: &ExponentSet,
    k: i32,
    (lo, hi): (i32, i32),
    opts: &DecayOptions,
) -> Result<ExperimentReport> {
    if lo > hi {
        return Err(Error::InvalidInput("empty offset range".into()));
    }
    let mut prov = provenance(
        "single-channel-decay",
        None,
        Some(*e),
        serde_json::json!({"k": k, "offsets": [lo, hi], "spacing": g.spacing(), "options": opts}),
    );
    let gnorm = hnorm(g, SobolevOrder::from_beta(e.beta)?)?;
    let hash = profile_hash(g);
    let values = if g.is_zero() {
        vec![0.0; (hi - lo + 1) as usize]
    } else {
        let w = RadialFreeWave::new(g.clone(), e.d)?;
        channel_vector(&w, e, k + lo, k + hi, TimeWindow::all(), &opts.quadrature)?.values
    };
    let rows: Vec<ReportRow> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| ReportRow::new(i, "channel", (lo + i as i32) as f64, hash.clone(), v, gnorm))
        .collect();
    if !g.is_zero() {
        let both = lo <= -2 && hi >= 1;
        let upper = if both { (1, hi) } else { (lo.max(-1), hi) };
        let lower = if both { (lo, -2) } else { (lo, hi.min(-2)) };
        let mut any = false;
        if upper.1 >= upper.0 && hi >= -1 {
            prov.fit_specs.push(FitSpec {
                name: "upper".into(),
                group: "channel".into(),
                lo: upper.0 as f64,
                hi: upper.1 as f64,
                predicted: 0.5 - e.beta,
                tolerance: opts.upper_tolerance,
                log_param: false,
                use_lhs: false,
            });
            any = true;
        }
        if lower.1 >= lower.0 && lo <= -2 {
            prov.fit_specs.push(FitSpec {
                name: "lower".into(),
                group: "channel".into(),
                lo: lower.0 as f64,
                hi: lower.1 as f64,
                predicted: 1.0 / e.q,
                tolerance: opts.lower_tolerance,
                log_param: false,
                use_lhs: false,
            });
            any = true;
        }
        debug_assert!(any);
    }
    ExperimentReport::build(rows, prov)
}

/// `||chi_j u_k||_{L^p L^q} / ||F_k||_{L^pt L^qt}` for j - k over `offsets`
/// (both <= 0), where u_k is the Duhamel solution of the channel forcing F_k.
pub fn forcing_decay(e: &ExponentSet, k: i32, offsets: (i32, i32), opts: &DecayOptions) -> Result<ExperimentReport> {
    let f = channel_forcing(e.d, k, 1.0, opts.resolution)?;
    forcing_decay_for(&f, e, k, offsets, opts)
}

pub fn forcing_decay_for(
    f: &ForcingField,
    e: &ExponentSet,
    k: i32,
    (lo, hi): (i32, i32),
    opts: &DecayOptions,
) -> Result<ExperimentReport> {
    if hi > 0 {
        return Err(Error::Precondition(format!(
            "channels j > k vanish by finite speed; requested j - k up to {hi}"
        )));
    }
    if lo > hi {
        return Err(Error::InvalidInput("empty offset range".into()));
    }
    let mut prov = provenance(
        "forcing-decay",
        None,
        Some(*e),
        serde_json::json!({"k": k, "offsets": [lo, hi], "r_axis": f.r_axis(), "t_axis": f.t_axis(), "options": opts}),
    );
    let hash = forcing_hash(f);
    let (values, fnorm) = if f.is_zero() {
        (vec![0.0; (hi - lo + 1) as usize], 0.0)
    } else {
        let fnorm = channel_vector_pq(f, e.d, e.p_tilde, e.q_tilde, k - 2, k + 1, forcing_window(std::slice::from_ref(f)), &opts.quadrature)?
            .union_norm;
        let u = DuhamelField::new(f.clone())?;
        let v = channel_vector(&u, e, k + lo, k + hi, TimeWindow::all(), &opts.quadrature)?.values;
        (v, fnorm)
    };
    let rows: Vec<ReportRow> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| ReportRow::new(i, "channel", (lo + i as i32) as f64, hash.clone(), v, fnorm))
        .collect();
    if !f.is_zero() && hi - lo >= 3 {
        let top = if hi == 0 && lo < -1 { -1 } else { hi };
        prov.fit_specs.push(FitSpec {
            name: "lower".into(),
            group: "channel".into(),
            lo: lo as f64,
            hi: top as f64,
            predicted: 1.0 / e.q,
            tolerance: 0.15,
            log_param: false,
            use_lhs: false,
        });
    }
    ExperimentReport::build(rows, prov)
}

/// Main-inequality ratio of one ensemble member over its default channel window.
pub fn instance_ratio(spec: &EnsembleSpec, inst: &Instance) -> Result<MainRatio> {
    let (kmin, kmax) = spec.k_range;
    let jr = (kmin - spec.channel_margin.0, kmax + spec.channel_margin.1);
    main_inequality_ratio(
        FreeData::Profile(&inst.profile),
        &inst.forcings,
        &spec.exponents,
        TimeWindow::all(),
        jr,
        &spec.quadrature,
    )
}

fn ensemble_rows(spec: &EnsembleSpec, range: std::ops::Range<usize>, group: &str) -> Result<Vec<ReportRow>> {
    let rows: Vec<Result<ReportRow>> = range
        .into_par_iter()
        .map(|i| {
            let inst = generate_instance(spec, i)?;
            let hash = inst.hash();
            if inst.is_zero() {
                return Ok(ReportRow::new(i, group, i as f64, hash, 0.0, 0.0));
            }
            let m = instance_ratio(spec, &inst)?;
            Ok(ReportRow::new(i, group, i as f64, hash, m.lhs, m.rhs()))
        })
        .collect();
    rows.into_iter().collect()
}

/// Max and quantiles of the main-inequality ratio over the ensemble, plus the
/// relative change of the max when the ensemble doubles (`count_doubling`)
/// and when every resolution parameter doubles (`resolution_doubling`).
pub fn estimate_constant(spec: &EnsembleSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let n = spec.count;
    let mut rows = ensemble_rows(spec, 0..n, "base")?;
    let mut extra = ensemble_rows(spec, n..2 * n, "extension")?;
    let both: Vec<ReportRow> = rows
        .iter()
        .chain(extra.iter())
        .map(|r| ReportRow { group: "doubled".into(), ..r.clone() })
        .collect();
    let fine = ensemble_rows(&spec.refined(), 0..n, "refined")?;
    rows.append(&mut extra);
    rows.extend(both);
    rows.extend(fine);
    for (i, r) in rows.iter_mut().enumerate() {
        r.index = i;
    }
    let mut prov = provenance("main-constant", Some(spec.seed), Some(spec.exponents), serde_json::to_value(spec)?);
    prov.metric_specs = vec![
        MetricSpec { name: "count_doubling".into(), base: "base".into(), other: "doubled".into() },
        MetricSpec { name: "resolution_doubling".into(), base: "base".into(), other: "refined".into() },
    ];
    ExperimentReport::build(rows, prov)
}

/// Options of [`lemma_sweeps`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub seed: u64,
    /// Random profiles per family and gamma.
    pub profiles: usize,
    /// Random shells per (d, q).
    pub shells: usize,
    /// Samples per unit length at base resolution.
    pub resolution: usize,
    pub gammas: Vec<f64>,
    /// Random cutoff intervals in the base family (the enlarged family has twice as many).
    pub intervals: usize,
    /// Sample-grid size per axis for the shell sweep.
    pub shell_samples: usize,
    /// Scale everything by this amplitude; 0 gives the zero sweep.
    pub amplitude: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            profiles: 100,
            shells: 50,
            resolution: 32,
            gammas: vec![-0.25, 0.0, 0.25],
            intervals: 100,
            shell_samples: 48,
            amplitude: 1.0,
        }
    }
}

fn sweep_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sweep_profile(opts: &SweepOptions, i: usize, resolution: usize) -> Result<SampledProfile> {
    let mut rng = sweep_rng(opts.seed, 1_000_000 + i as u64);
    let h = 1.0 / resolution as f64;
    let grid = GridSpec::covering(-4.0 - 2.0 * h, 4.0 + 2.0 * h, h)?;
    Ok(band_limited_profile(&mut rng, 4.0, 6.0 * PI, grid)?.scaled(opts.amplitude))
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Lemma-type sweeps over random profiles and shells:
///
/// * `sharp/<gamma>/<res>`: `sum_k ||G_k||^2 / ||G||^2` for the sharp dyadic pieces;
/// * `smooth/<gamma>/<res>`: the same with the bumps phi_k;
/// * `cutoff/<gamma>/<n>`: `||chi_J f|| / ||f||` over n random intervals;
/// * `scale/<shape>/<gamma>`: `||g_J||` and the interval bound against |J| for fixed shapes;
/// * `shell/d<d>/q<q>/<n>`: the pointwise bound ratio of random shells on n x n samples.
///
/// Zero inputs are recorded with ratio 0.
pub fn lemma_sweeps(opts: &SweepOptions) -> Result<ExperimentReport> {
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut prov = provenance("lemma-sweeps", Some(opts.seed), None, serde_json::to_value(opts)?);
    let res = [opts.resolution, 2 * opts.resolution];
    // dyadic decompositions
    for &gamma in &opts.gammas {
        let order = SobolevOrder::new(gamma)?;
        for (level, &r) in res.iter().enumerate() {
            let batch: Vec<Result<(ReportRow, ReportRow)>> = (0..opts.profiles)
                .into_par_iter()
                .map(|i| {
                    let g = sweep_profile(opts, i, r)?;
                    let hash = profile_hash(&g);
                    let total = hnorm_squared(&g, order)?;
                    let sharp: f64 = dyadic_decompose(&g)
                        .iter()
                        .map(|p| hnorm_squared(&p.piece, order))
                        .sum::<Result<f64>>()?;
                    let smooth: f64 = smooth_decompose(&g)
                        .iter()
                        .map(|(_, p)| hnorm_squared(p, order))
                        .sum::<Result<f64>>()?;
                    let mk = |kind: &str, num: f64| {
                        let mut row = ReportRow::new(i, &format!("{kind}/{gamma}/{level}"), i as f64, hash.clone(), num, total);
                        if total == 0.0 {
                            row.ratio = Some(0.0);
                        }
                        row
                    };
                    Ok((mk("sharp", sharp), mk("smooth", smooth)))
                })
                .collect();
            let mut sharp = Vec::new();
            let mut smooth = Vec::new();
            for b in batch {
                let (a, c) = b?;
                sharp.push(a);
                smooth.push(c);
            }
            rows.extend(sharp);
            rows.extend(smooth);
        }
        for kind in ["sharp", "smooth"] {
            prov.metric_specs.push(MetricSpec {
                name: format!("{kind}/{gamma}/resolution_doubling"),
                base: format!("{kind}/{gamma}/0"),
                other: format!("{kind}/{gamma}/1"),
            });
        }
    }
    // sharp cutoffs over random intervals
    for &gamma in &opts.gammas {
        let order = SobolevOrder::new(gamma)?;
        for (level, n) in [opts.intervals, 2 * opts.intervals].into_iter().enumerate() {
            let batch: Vec<Result<ReportRow>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let g = sweep_profile(opts, i % opts.profiles.max(1), opts.resolution)?;
                    let mut rng = sweep_rng(opts.seed, 2_000_000 + i as u64);
                    let a = rng.gen_range(-5.0..4.0);
                    let b = rng.gen_range(a..5.0);
                    let cut = sharp_cutoff(&g, Interval::new(a, b));
                    let num = hnorm(&cut, order)?;
                    let den = hnorm(&g, order)?;
                    let mut row = ReportRow::new(i, &format!("cutoff/{gamma}/{level}"), i as f64, profile_hash(&g), num, den);
                    row.ratio = Some(ratio_or_zero(num, den));
                    Ok(row)
                })
                .collect();
            rows.extend(batch.into_iter().collect::<Result<Vec<_>>>()?);
        }
        prov.metric_specs.push(MetricSpec {
            name: format!("cutoff/{gamma}/enlarged"),
            base: format!("cutoff/{gamma}/0"),
            other: format!("cutoff/{gamma}/1"),
        });
    }
    // scale sweep for fixed shapes, 4 decades of |J|
    for shape in ["bump", "tent"] {
        for gamma in [-0.25, 0.25] {
            let order = SobolevOrder::new(gamma)?;
            let group = format!("scale/{shape}/{gamma}");
            let lens: Vec<f64> = (0..=14).map(|i| 2f64.powf(-3.0 + i as f64 * 13.5 / 14.0)).collect();
            let batch: Vec<Result<ReportRow>> = lens
                .par_iter()
                .enumerate()
                .map(|(i, &len)| {
                    let h = (len / 64.0).min(1.0 / 64.0);
                    let grid = GridSpec::covering(-2.0 * h, len + 2.0 * h, h)?;
                    let g = SampledProfile::from_fn(grid, |s| {
                        let x = s / len;
                        opts.amplitude
                            * match shape {
                                "bump" => bump_shape(2.0 * x - 1.0),
                                _ => (1.0 - (2.0 * x - 1.0).abs()).max(0.0),
                            }
                    })?;
                    let lhs = hnorm(&g, order)?;
                    let lemma = hgamma_lemma_ratio(&g, Interval::new(0.0, len), order)?;
                    let bound = if lemma > 0.0 { lhs / lemma } else { 0.0 };
                    let mut row = ReportRow::new(i, &group, len, profile_hash(&g), lhs, bound);
                    row.ratio = Some(lemma);
                    Ok(row)
                })
                .collect();
            rows.extend(batch.into_iter().collect::<Result<Vec<_>>>()?);
            if opts.amplitude != 0.0 {
                prov.fit_specs.push(FitSpec {
                    name: group.clone(),
                    group: group.clone(),
                    lo: 0.0,
                    hi: f64::INFINITY,
                    predicted: 0.5 - gamma,
                    tolerance: 0.1,
                    log_param: true,
                    use_lhs: true,
                });
                // the lemma ratio itself is scale invariant
                prov.fit_specs.push(FitSpec {
                    name: format!("{group}/ratio"),
                    group,
                    lo: 0.0,
                    hi: f64::INFINITY,
                    predicted: 0.0,
                    tolerance: 0.1,
                    log_param: true,
                    use_lhs: false,
                });
            }
        }
    }
    // pointwise bound on random shells
    for d in [3usize, 5] {
        let kernel = build_kernel(d)?;
        for q in [2.0f64, 4.0] {
            for (level, n) in [opts.shell_samples, 2 * opts.shell_samples].into_iter().enumerate() {
                let group = format!("shell/d{d}/q{q}/{level}");
                let batch: Vec<Result<ReportRow>> = (0..opts.shells)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = sweep_rng(opts.seed, 3_000_000 + (d as u64) * 1000 + i as u64);
                        let a = 2f64.powf(rng.gen_range(-2.0..2.0));
                        let b = a * rng.gen_range(1.2..2.0);
                        let u1 = random_shell(&mut rng, a, b, opts.amplitude)?;
                        let samples = shell_samples(b, n);
                        let ratio = pointwise_bound_ratio(&u1, (a, b), &kernel, q, &samples)?;
                        let bits: Vec<u64> = u1.values.iter().map(|v| v.to_bits()).collect();
                        let mut row = ReportRow::new(i, &group, a, input_hash(&(a.to_bits(), b.to_bits(), bits)), ratio, 1.0);
                        row.ratio = Some(ratio);
                        Ok(row)
                    })
                    .collect();
                rows.extend(batch.into_iter().collect::<Result<Vec<_>>>()?);
            }
            prov.metric_specs.push(MetricSpec {
                name: format!("shell/d{d}/q{q}/refinement"),
                base: format!("shell/d{d}/q{q}/0"),
                other: format!("shell/d{d}/q{q}/1"),
            });
        }
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r.index = i;
    }
    ExperimentReport::build(rows, prov)
}

/// Random smooth nonnegative-or-signed profile on the shell (a, b).
fn random_shell<R: Rng>(rng: &mut R, a: f64, b: f64, amplitude: f64) -> Result<RadialSamples> {
    let h = (b - a) / 64.0;
    let len = (b / h).ceil() as usize + 4;
    let w = rng.gen_range(1.0..4.0);
    let ph = rng.gen_range(0.0..2.0 * PI);
    let c = rng.gen_range(0.0..1.0);
    RadialSamples::from_fn(0.5 * h, h, len, |r| {
        let x = 2.0 * (r - a) / (b - a) - 1.0;
        amplitude * bump_shape(x) * (c + (w * PI * x + ph).cos())
    })
}

/// n x n points (r, t) with t in (0, 4b] and r - t in (0, 4b].
fn shell_samples(b: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n * n);
    for i in 1..=n {
        let t = 4.0 * b * i as f64 / n as f64;
        for j in 1..=n {
            let rho = 4.0 * b * j as f64 / n as f64;
            out.push((t + rho, t));
        }
    }
    out
}

/// Relative isometry defects over `count` band-limited profiles with their
/// low moments removed so that the data are compactly supported.
pub fn isometry_sweep(d: usize, beta: f64, count: usize, seed: u64, resolution: usize) -> Result<ExperimentReport> {
    check_dimension(d, 13)?;
    let n = (d - 3) / 2;
    let batch: Vec<Result<ReportRow>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sweep_rng(seed, 4_000_000 + i as u64);
            let h = 1.0 / resolution as f64;
            let grid = GridSpec::covering(-2.0 - 2.0 * h, 2.0 + 2.0 * h, h)?;
            let raw = band_limited_profile(&mut rng, 2.0, 4.0 * PI, grid)?;
            let g = crate::wavefield::remove_low_moments(&raw, n)?;
            let w = RadialFreeWave::new(g.clone(), d)?;
            let defect = crate::wavefield::isometry_defect(&w, beta)?;
            let mut row = ReportRow::new(i, &format!("isometry/d{d}/{beta}"), i as f64, profile_hash(&g), defect, 1.0);
            row.ratio = Some(defect);
            Ok(row)
        })
        .collect();
    let rows = batch.into_iter().collect::<Result<Vec<_>>>()?;
    let prov = provenance(
        "isometry",
        Some(seed),
        ExponentSet::standard(d, beta).ok(),
        serde_json::json!({"d": d, "beta": beta, "resolution": resolution}),
    );
    ExperimentReport::build(rows, prov)
}

// ---------------------------------------------------------------------------
// finite-difference cross-check

/// Exact evaluator against the finite-difference oracle on nested grids.
#[derive(Debug, Clone, Serialize)]
pub struct OracleStudy {
    pub d: usize,
    pub t_final: f64,
    pub cells: Vec<usize>,
    pub order: ConvergenceOrder,
    pub energy_drift: f64,
    pub seconds: Vec<f64>,
}

/// Smooth bump profile with the low moments removed for dimension d.
pub fn oracle_profile(d: usize, resolution: usize) -> Result<SampledProfile> {
    check_dimension(d, 13)?;
    let grid = GridSpec::covering(-0.5, 3.0, 1.0 / resolution as f64)?;
    let g = SampledProfile::from_fn(grid, |s| {
        let x = s - 1.5;
        if x.abs() < 1.0 {
            (1.0 - x * x).powi(6) * (1.0 + 0.3 * s)
        } else {
            0.0
        }
    })?;
    crate::wavefield::remove_low_moments(&g, (d - 3) / 2)
}

/// Relative weighted L^2 error of the leapfrog solution at `t_final` on
/// `[0, 6]` with each cell count in `cells`.
pub fn oracle_study(d: usize, cells: &[usize], t_final: f64) -> Result<(ExperimentReport, OracleStudy)> {
    let w = RadialFreeWave::new(oracle_profile(d, 2048)?, d)?;
    let mut errors = Vec::new();
    let mut seconds = Vec::new();
    let mut drift = 0.0f64;
    let mut rows = Vec::new();
    for (i, &nr) in cells.iter().enumerate() {
        let start = std::time::Instant::now();
        let grid = FdGrid::for_horizon(6.0, nr, 0.5, t_final, d)?;
        let u0 = |r: f64| w.evaluate(r.max(1e-12), 0.0).unwrap_or(f64::NAN);
        let u1 = |r: f64| w.time_derivative(r.max(1e-12), 0.0).unwrap_or(f64::NAN);
        let s = fd_solve(&u0, &u1, None, grid, grid.nt.max(1))?;
        let last = s.snapshots.len() - 1;
        let t = s.snapshot_time(last);
        let rs: Vec<f64> = (1..nr).map(|i| grid.node(i)).collect();
        let exact: Vec<f64> = rs.par_iter().map(|&r| w.evaluate(r, t)).collect::<Result<_>>()?;
        let weights: Vec<f64> = rs.iter().map(|r| r.powi(d as i32 - 1)).collect();
        let err = relative_l2(&s.snapshots[last][1..], &exact, &weights);
        errors.push(err);
        drift = drift.max(s.energy_drift());
        seconds.push(start.elapsed().as_secs_f64());
        let mut row = ReportRow::new(i, &format!("oracle/d{d}"), nr as f64, input_hash(&(d, nr, t.to_bits())), err, 1.0);
        row.ratio = Some(err);
        rows.push(row);
    }
    let order = convergence_order(&errors)?;
    let prov = provenance("oracle-validate", None, None, serde_json::json!({"d": d, "cells": cells, "t_final": t_final, "rmax": 6.0}));
    let report = ExperimentReport::build(rows, prov)?;
    Ok((report, OracleStudy { d, t_final, cells: cells.to_vec(), order, energy_drift: drift, seconds }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_and_degenerate_ranges() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.5 * x).collect();
        let (b, a, hw) = fit_line(&xs, &ys).unwrap();
        assert!((b + 0.5).abs() < 1e-14 && (a - 1.0).abs() < 1e-14 && hw < 1e-12);
        assert!(matches!(fit_line(&xs[..3], &ys[..3]), Err(Error::InsufficientRange(_))));
        let noisy = [1.0, 0.4, 0.1, -0.6, -1.0];
        let (_, _, hw) = fit_line(&xs, &noisy).unwrap();
        assert!(hw > 0.0);
    }

    #[test]
    fn summary_is_a_function_of_rows() {
        let rows: Vec<ReportRow> =
            (0..6).map(|i| ReportRow::new(i, "g", i as f64, String::new(), 2f64.powf(0.3 * i as f64), 1.0)).collect();
        let mut prov = provenance("t", Some(3), None, serde_json::Value::Null);
        prov.fit_specs.push(FitSpec {
            name: "all".into(),
            group: "g".into(),
            lo: 0.0,
            hi: 10.0,
            predicted: 0.3,
            tolerance: 1e-9,
            log_param: false,
            use_lhs: false,
        });
        let rep = ExperimentReport::build(rows, prov).unwrap();
        assert!(rep.is_consistent());
        assert!(rep.fit("all").unwrap().pass);
        assert_eq!(rep.stats("g").unwrap().count, 6);
    }

    #[test]
    fn undefined_ratios_are_not_zero() {
        let r = ReportRow::new(0, "g", 0.0, String::new(), 0.0, 0.0);
        assert_eq!(r.ratio, None);
        let m = MainRatio {
            lhs_window: 0.0,
            lhs: 0.0,
            data_norm: 0.0,
            forcing_norm: 0.0,
            channel_norms: vec![],
            jmin: 0,
            jmax: 0,
        };
        assert!(matches!(m.ratio(), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn instances_are_prefix_stable() {
        let spec = EnsembleSpec::new(7, 4, ProfileFamily::MultiScaleSum, 3, 1.0).unwrap();
        let a = generate_instance(&spec, 2).unwrap();
        let b = generate_instance(&EnsembleSpec { count: 50, ..spec.clone() }, 2).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), generate_instance(&spec, 3).unwrap().hash());
    }

    #[test]
    fn channel_forcing_lives_in_its_channel() {
        let f = channel_forcing(3, 0, 1.0, 16).unwrap();
        assert_eq!(f.channel(), Some(0));
        assert!(f.cone_offset().unwrap() <= 2.0 + 1e-9);
        assert!(f.value_at(1.5, 0.5) == 0.0 && f.value_at(2.0, 0.5) > 0.0);
    }
}
