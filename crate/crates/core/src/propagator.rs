//! Radial wave propagator from the spherical-means formula
//!
//! ```text
//! S(t)(0, f)(r) = K_d r^{-(d-2)} sum_m a_m t^{m-(d-3)} \int_{|r-t|}^{r+t} rho f(rho) d_t^m P(r, t, rho) drho
//! P(r, t, rho)  = [(r+t+rho)(r+t-rho)(rho+r-t)(rho-r+t)]^{(d-3)/2}
//! ```
//!
//! with `K_d = sigma_{d-2} / (1*3*...*(d-2) * sigma_{d-1} * 4^{(d-3)/2})`, and the
//! Duhamel integral for forcings sampled on an (r, t) grid.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss8, sphere_area};
use crate::wavefield::{check_dimension, InitialDataPair, RadialField, RadialSamples};

/// Monomial `coef * rho^i t^j r^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monomial {
    pub coef: f64,
    pub rho: u32,
    pub t: u32,
    pub r: u32,
}

type Poly3 = BTreeMap<(u32, u32, u32), i128>;

fn poly3_mul(a: &Poly3, b: &Poly3) -> Poly3 {
    let mut out = Poly3::new();
    for (&(i, j, k), &c) in a {
        for (&(p, q, s), &e) in b {
            *out.entry((i + p, j + q, k + s)).or_insert(0) += c * e;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

fn poly3_dt(a: &Poly3) -> Poly3 {
    let mut out = Poly3::new();
    for (&(i, j, k), &c) in a {
        if j > 0 {
            *out.entry((i, j - 1, k)).or_insert(0) += c * j as i128;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Expansion data of the spherical-means propagator in odd dimension d.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetricKernel {
    d: usize,
    exponent: usize,
    am_constants: Vec<f64>,
    t_deriv_coeffs: Vec<Vec<Monomial>>,
    normalization: f64,
}

/// Builds the kernel for odd `d` in 3..=9.
pub fn build_kernel(d: usize) -> Result<SymmetricKernel> {
    check_dimension(d, 9)?;
    let n = (d - 3) / 2;
    // (t^{-1} d_t)^n = sum_m a_m t^{m - 2n} d_t^m
    let mut am = vec![1.0];
    for k in 0..n {
        let mut next = vec![0.0; am.len() + 1];
        for (m, &a) in am.iter().enumerate() {
            next[m] += (m as f64 - 2.0 * k as f64) * a;
            next[m + 1] += a;
        }
        am = next;
    }
    // A = (r+t)^2 - rho^2, B = rho^2 - (r-t)^2 as (rho, t, r) exponents
    let a: Poly3 = [((0, 0, 2), 1), ((0, 1, 1), 2), ((0, 2, 0), 1), ((2, 0, 0), -1)].into_iter().collect();
    let b: Poly3 = [((2, 0, 0), 1), ((0, 0, 2), -1), ((0, 1, 1), 2), ((0, 2, 0), -1)].into_iter().collect();
    let ab = poly3_mul(&a, &b);
    let mut p: Poly3 = [((0, 0, 0), 1)].into_iter().collect();
    for _ in 0..n {
        p = poly3_mul(&p, &ab);
    }
    let mut t_deriv_coeffs = Vec::with_capacity(n + 2);
    let mut cur = p;
    for _ in 0..=n + 1 {
        t_deriv_coeffs.push(
            cur.iter()
                .map(|(&(i, j, k), &c)| Monomial { coef: c as f64, rho: i, t: j, r: k })
                .collect(),
        );
        cur = poly3_dt(&cur);
    }
    let gamma: f64 = (0..=n).map(|i| (2 * i + 1) as f64).product();
    let normalization = sphere_area(d - 2) / (gamma * sphere_area(d - 1) * 4f64.powi(n as i32));
    Ok(SymmetricKernel { d, exponent: n, am_constants: am, t_deriv_coeffs, normalization })
}

impl SymmetricKernel {
    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn exponent(&self) -> usize {
        self.exponent
    }

    /// a_m with `(t^{-1} d_t)^n = sum_m a_m t^{m-2n} d_t^m`.
    pub fn am_constants(&self) -> &[f64] {
        &self.am_constants
    }

    /// Overall constant K_d in front of the m-sum.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Monomial expansion of `d_t^m P`, m = 0..=n+1.
    pub fn t_deriv_coeffs(&self) -> &[Vec<Monomial>] {
        &self.t_deriv_coeffs
    }

    /// `d_t^m P(r, t, rho)` from the stored monomial expansion.
    pub fn eval_expanded(&self, m: usize, r: f64, t: f64, rho: f64) -> f64 {
        self.t_deriv_coeffs[m]
            .iter()
            .map(|c| c.coef * rho.powi(c.rho as i32) * t.powi(c.t as i32) * r.powi(c.r as i32))
            .sum()
    }

    /// P(r, t, rho) as the product of its four linear factors.
    pub fn eval_product(&self, r: f64, t: f64, rho: f64) -> f64 {
        ((rho + t + r) * (rho + t - r) * (r + rho - t) * (r + t - rho)).powi(self.exponent as i32)
    }

    /// `out[m] = d_t^m P(r, t, rho)` for m = 0..=n+1, from the factored
    /// Taylor expansion in t (no cancellation between monomials).
    #[inline]
    pub fn t_derivatives(&self, r: f64, t: f64, rho: f64, out: &mut [f64]) {
        let n = self.exponent;
        let a = [(r + t - rho) * (r + t + rho), 2.0 * (r + t), 1.0];
        let b = [(rho - r + t) * (rho + r - t), 2.0 * (r - t), -1.0];
        let mut ab = [0.0; 5];
        for i in 0..3 {
            for j in 0..3 {
                ab[i + j] += a[i] * b[j];
            }
        }
        let len = n + 2;
        let mut acc = [0.0; 8];
        acc[0] = 1.0;
        for _ in 0..n {
            let mut next = [0.0; 8];
            for i in 0..len {
                if acc[i] == 0.0 {
                    continue;
                }
                for j in 0..5.min(len - i) {
                    next[i + j] += acc[i] * ab[j];
                }
            }
            acc = next;
        }
        let mut fact = 1.0;
        for m in 0..len {
            if m > 0 {
                fact *= m as f64;
            }
            out[m] = fact * acc[m];
        }
    }
}

/// View of a radial function on `origin + i * spacing`: linear between
/// nodes, constant on [0, origin), zero past the last node.
#[derive(Debug, Clone, Copy)]
struct RadialView<'a> {
    origin: f64,
    spacing: f64,
    values: &'a [f64],
}

impl RadialView<'_> {
    fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    /// Calls `visit(rho, weight * rho * f(rho))` at Gauss nodes covering [lo, hi].
    fn for_each_node(&self, lo: f64, hi: f64, mut visit: impl FnMut(f64, f64)) {
        if !(hi > lo) || self.values.is_empty() {
            return;
        }
        if lo < self.origin {
            let f0 = self.values[0];
            if f0 != 0.0 {
                for (x, w) in gauss8().on(lo, hi.min(self.origin)) {
                    visit(x, w * x * f0);
                }
            }
        }
        let n = self.values.len();
        if n < 2 {
            return;
        }
        let first = (((lo - self.origin) / self.spacing).floor().max(0.0)) as usize;
        let last = ((((hi - self.origin) / self.spacing).floor().max(0.0)) as usize).min(n - 2);
        for i in first..=last {
            let (f0, f1) = (self.values[i], self.values[i + 1]);
            if f0 == 0.0 && f1 == 0.0 {
                continue;
            }
            let base = self.node(i);
            let a = base.max(lo);
            let b = self.node(i + 1).min(hi);
            if b <= a {
                continue;
            }
            for (x, w) in gauss8().on(a, b) {
                visit(x, w * x * (f0 + (f1 - f0) * (x - base) / self.spacing));
            }
        }
    }

    fn value_at(&self, r: f64) -> f64 {
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

    /// Radii between which the interpolant can be nonzero.
    fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|&v| v != 0.0)?;
        let last = self.values.iter().rposition(|&v| v != 0.0)?;
        let lo = if first == 0 { 0.0 } else { self.node(first - 1) };
        let hi = self.node((last + 1).min(self.values.len() - 1)).max(self.node(last));
        Some((lo, hi))
    }

    /// Cumulative `\int_0^{r_i} rho f(rho) drho` at the nodes.
    fn prefix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        if self.values.is_empty() {
            return out;
        }
        let mut acc = 0.5 * self.values[0] * self.origin * self.origin;
        out.push(acc);
        for i in 0..self.values.len() - 1 {
            acc += cell_moment(self.node(i), self.values[i], self.values[i + 1], self.spacing, self.spacing);
            out.push(acc);
        }
        out
    }

    /// `\int_0^x rho f(rho) drho` from a prefix table.
    fn primitive(&self, prefix: &[f64], x: f64) -> f64 {
        if x <= self.origin {
            let f0 = self.values.first().copied().unwrap_or(0.0);
            return 0.5 * f0 * x * x;
        }
        let n = self.values.len();
        let pos = (x - self.origin) / self.spacing;
        let i = pos.floor() as usize;
        if i >= n - 1 {
            return prefix[n - 1];
        }
        let u = x - self.node(i);
        prefix[i] + cell_moment(self.node(i), self.values[i], self.values[i + 1], self.spacing, u)
    }
}

/// `\int_a^{a+u} rho (f0 + (f1 - f0)(rho - a)/h) drho`.
#[inline]
fn cell_moment(a: f64, f0: f64, f1: f64, h: f64, u: f64) -> f64 {
    let m = (f1 - f0) / h;
    a * f0 * u + (a * m + f0) * u * u / 2.0 + m * u * u * u / 3.0
}

/// Precomputed data for repeated propagation of one radial function.
#[derive(Debug, Clone)]
struct Prepared {
    origin: f64,
    spacing: f64,
    values: Vec<f64>,
    prefix: Option<Vec<f64>>,
    support: Option<(f64, f64)>,
}

impl Prepared {
    fn new(f: &RadialSamples, d: usize) -> Self {
        let view = RadialView { origin: f.origin, spacing: f.spacing, values: &f.values };
        Self {
            origin: f.origin,
            spacing: f.spacing,
            values: f.values.clone(),
            prefix: (d == 3).then(|| view.prefix()),
            support: view.support(),
        }
    }

    fn view(&self) -> RadialView<'_> {
        RadialView { origin: self.origin, spacing: self.spacing, values: &self.values }
    }
}

/// Integrals `I_m = \int rho f d_t^m P` over the part of [|r-t|, r+t] meeting the support.
#[allow(clippy::too_many_arguments)]
fn kernel_integrals(kernel: &SymmetricKernel, view: RadialView<'_>, lo: f64, hi: f64, r: f64, t: f64, upto: usize, out: &mut [f64]) {
    let mut buf = [0.0; 8];
    out[..=upto].iter_mut().for_each(|v| *v = 0.0);
    view.for_each_node(lo, hi, |rho, w| {
        kernel.t_derivatives(r, t, rho, &mut buf);
        for m in 0..=upto {
            out[m] += w * buf[m];
        }
    });
}

fn clip(support: Option<(f64, f64)>, r: f64, t: f64) -> Option<(f64, f64)> {
    let (slo, shi) = support?;
    let lo = (r - t).abs().max(slo);
    let hi = (r + t).min(shi);
    (hi > lo).then_some((lo, hi))
}

/// S(t)(0, f)(r) for t > 0 on prepared data.
fn sine_part(kernel: &SymmetricKernel, f: &Prepared, r: f64, t: f64) -> f64 {
    let Some((lo, hi)) = clip(f.support, r, t) else {
        return 0.0;
    };
    let view = f.view();
    if let Some(prefix) = &f.prefix {
        let s = view.primitive(prefix, r + t) - view.primitive(prefix, (r - t).abs());
        return 0.5 * s / r;
    }
    let n = kernel.exponent;
    let mut integrals = [0.0; 8];
    kernel_integrals(kernel, view, lo, hi, r, t, n, &mut integrals);
    let mut acc = 0.0;
    for m in 0..=n {
        acc += kernel.am_constants[m] * t.powi(m as i32 - 2 * n as i32) * integrals[m];
    }
    kernel.normalization * acc / r.powi(2 * n as i32 + 1)
}

/// d_t S(t)(0, f)(r) for t > 0 on prepared data.
fn cosine_part(kernel: &SymmetricKernel, f: &Prepared, r: f64, t: f64) -> f64 {
    let view = f.view();
    let n = kernel.exponent;
    let mut fact = 1.0;
    for k in 1..=n {
        fact *= k as f64;
    }
    let boundary = fact
        * (8.0 * r).powi(n as i32)
        * ((r + t).powi(n as i32 + 1) * view.value_at(r + t) + (r - t).powi(n as i32 + 1) * view.value_at((r - t).abs()));
    let mut acc = boundary;
    if let Some((lo, hi)) = clip(f.support, r, t) {
        let mut integrals = [0.0; 8];
        kernel_integrals(kernel, view, lo, hi, r, t, n + 1, &mut integrals);
        for m in 0..=n {
            let a = kernel.am_constants[m];
            let p = m as i32 - 2 * n as i32;
            acc += a * (p as f64 * t.powi(p - 1) * integrals[m] + t.powi(p) * integrals[m + 1]);
        }
    }
    kernel.normalization * acc / r.powi(2 * n as i32 + 1)
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be positive, got {r}")))
    }
}

/// S(t)(0, u1)(r): the solution with data (0, u1), odd in t.
pub fn half_wave(u1: &RadialSamples, kernel: &SymmetricKernel, r: f64, t: f64) -> Result<f64> {
    check_radius(r)?;
    let prepared = Prepared::new(u1, kernel.d);
    Ok(signed_sine(kernel, &prepared, r, t))
}

fn signed_sine(kernel: &SymmetricKernel, f: &Prepared, r: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if t > 0.0 {
        sine_part(kernel, f, r, t)
    } else {
        -sine_part(kernel, f, r, -t)
    }
}

fn even_cosine(kernel: &SymmetricKernel, f: &Prepared, r: f64, t: f64) -> f64 {
    if t == 0.0 {
        f.view().value_at(r)
    } else {
        cosine_part(kernel, f, r, t.abs())
    }
}

/// d_t S(t)(0, u0)(r): the solution with data (u0, 0), even in t.
pub fn half_wave_dt(u0: &RadialSamples, kernel: &SymmetricKernel, r: f64, t: f64) -> Result<f64> {
    check_radius(r)?;
    let prepared = Prepared::new(u0, kernel.d);
    Ok(even_cosine(kernel, &prepared, r, t))
}

/// Free evolution of sampled initial data, evaluable anywhere with r > 0.
#[derive(Debug, Clone)]
pub struct FreeEvolution {
    kernel: SymmetricKernel,
    u0: Prepared,
    u1: Prepared,
}

impl FreeEvolution {
    pub fn new(data: &InitialDataPair) -> Result<Self> {
        let kernel = build_kernel(data.d)?;
        Ok(Self { u0: Prepared::new(&data.u0, data.d), u1: Prepared::new(&data.u1, data.d), kernel })
    }

    pub fn kernel(&self) -> &SymmetricKernel {
        &self.kernel
    }

    pub fn evaluate(&self, r: f64, t: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.value(r, t))
    }

    /// Radius beyond which the data vanish.
    pub fn data_radius(&self) -> f64 {
        let a = self.u0.support.map_or(0.0, |s| s.1);
        let b = self.u1.support.map_or(0.0, |s| s.1);
        a.max(b)
    }
}

impl RadialField for FreeEvolution {
    fn value(&self, r: f64, t: f64) -> f64 {
        if !(r > 0.0) {
            return f64::NAN;
        }
        even_cosine(&self.kernel, &self.u0, r, t) + signed_sine(&self.kernel, &self.u1, r, t)
    }

    fn exterior_support_radius(&self) -> Option<f64> {
        Some(self.data_radius())
    }
}

/// Uniform one-dimensional axis `origin + i * spacing`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(origin: f64, spacing: f64, len: usize) -> Result<Self> {
        if !(spacing > 0.0 && origin.is_finite() && len >= 2) {
            return Err(Error::InvalidInput(format!(
                "axis needs spacing > 0 and at least two nodes, got spacing {spacing}, len {len}"
            )));
        }
        Ok(Self { origin, spacing, len })
    }

    /// Axis with nodes on `lo + i * spacing` covering [lo, hi].
    pub fn covering(lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        Self::new(lo, spacing, ((hi - lo) / spacing - 1e-9).ceil().max(1.0) as usize + 1)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-9 * self.spacing;
        x >= self.origin - tol && x <= self.end() + tol
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ForcingSidecar {
    d: usize,
    r: Axis,
    t: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<i32>,
}

/// Forcing F(r, t) sampled on a uniform (r, t) grid, bilinear in between.
#[derive(Debug, Clone)]
pub struct ForcingField {
    d: usize,
    r_axis: Axis,
    t_axis: Axis,
    values: Vec<f64>,
    channel: Option<i32>,
    slices: Vec<Prepared>,
}

impl ForcingField {
    /// `values[it * r_axis.len + ir]` is F(r_ir, t_it).
    pub fn new(d: usize, r_axis: Axis, t_axis: Axis, values: Vec<f64>, channel: Option<i32>) -> Result<Self> {
        check_dimension(d, 9)?;
        if !(r_axis.origin > 0.0) {
            return Err(Error::Domain("forcing r-grid must be strictly positive".into()));
        }
        if values.len() != r_axis.len * t_axis.len {
            return Err(Error::InvalidInput(format!(
                "expected {} forcing samples, got {}",
                r_axis.len * t_axis.len,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("forcing samples must be finite".into()));
        }
        if let Some(k) = channel {
            let (w0, w1) = (2f64.powi(k), 2f64.powi(k + 1));
            let slack = r_axis.spacing + t_axis.spacing;
            for it in 0..t_axis.len {
                let t = t_axis.node(it).abs();
                for ir in 0..r_axis.len {
                    let r = r_axis.node(ir);
                    if values[it * r_axis.len + ir] != 0.0 && (r < t + w0 - slack || r > t + w1 + slack) {
                        return Err(Error::InvalidInput(format!(
                            "forcing tagged with channel {k} is nonzero at (r, t) = ({r}, {t})"
                        )));
                    }
                }
            }
        }
        let slices = (0..t_axis.len)
            .map(|it| {
                let row = values[it * r_axis.len..(it + 1) * r_axis.len].to_vec();
                Prepared::new(&RadialSamples { origin: r_axis.origin, spacing: r_axis.spacing, values: row }, d)
            })
            .collect();
        Ok(Self { d, r_axis, t_axis, values, channel, slices })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(d: usize, r_axis: Axis, t_axis: Axis, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(r_axis.len * t_axis.len);
        for it in 0..t_axis.len {
            for ir in 0..r_axis.len {
                values.push(f(r_axis.node(ir), t_axis.node(it)));
            }
        }
        Self::new(d, r_axis, t_axis, values, None)
    }

    pub fn zero(d: usize, r_axis: Axis, t_axis: Axis) -> Result<Self> {
        Self::new(d, r_axis, t_axis, vec![0.0; r_axis.len * t_axis.len], None)
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn r_axis(&self) -> Axis {
        self.r_axis
    }

    pub fn t_axis(&self) -> Axis {
        self.t_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self) -> Option<i32> {
        self.channel
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn sample(&self, ir: usize, it: usize) -> f64 {
        self.values[it * self.r_axis.len + ir]
    }

    /// Sample-wise restriction to the channel {|t| + 2^k <= r < |t| + 2^{k+1}}.
    pub fn restrict_to_channel(&self, k: i32) -> Result<Self> {
        let (w0, w1) = (2f64.powi(k), 2f64.powi(k + 1));
        let mut values = self.values.clone();
        for it in 0..self.t_axis.len {
            let t = self.t_axis.node(it).abs();
            for ir in 0..self.r_axis.len {
                let r = self.r_axis.node(ir);
                if !(r >= t + w0 && r < t + w1) {
                    values[it * self.r_axis.len + ir] = 0.0;
                }
            }
        }
        Self::new(self.d, self.r_axis, self.t_axis, values, Some(k))
    }

    /// Same samples multiplied pointwise by `f(r, t, value)`.
    pub fn map(&self, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let mut values = self.values.clone();
        for it in 0..self.t_axis.len {
            for ir in 0..self.r_axis.len {
                let idx = it * self.r_axis.len + ir;
                values[idx] = f(self.r_axis.node(ir), self.t_axis.node(it), values[idx]);
            }
        }
        Self::new(self.d, self.r_axis, self.t_axis, values, None)
    }

    /// Bilinear interpolant; zero outside the grid.
    pub fn value_at(&self, r: f64, t: f64) -> f64 {
        if !self.t_axis.contains(t) {
            return 0.0;
        }
        let x = ((t - self.t_axis.origin) / self.t_axis.spacing).clamp(0.0, (self.t_axis.len - 1) as f64);
        let i = (x.floor() as usize).min(self.t_axis.len - 2);
        let f = x - i as f64;
        let a = self.slices[i].view().value_at(r);
        let b = self.slices[i + 1].view().value_at(r);
        a * (1.0 - f) + b * f
    }

    /// Writes `r,t,value` rows and the JSON grid sidecar at `path.json`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "t", "value"])?;
        for it in 0..self.t_axis.len {
            for ir in 0..self.r_axis.len {
                w.write_record([
                    format!("{:.17e}", self.r_axis.node(ir)),
                    format!("{:.17e}", self.t_axis.node(it)),
                    format!("{:.17e}", self.sample(ir, it)),
                ])?;
            }
        }
        w.flush()?;
        let side = ForcingSidecar { d: self.d, r: self.r_axis, t: self.t_axis, k: self.channel };
        std::fs::write(sidecar(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let side: ForcingSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar(path))?)?;
        let mut r = csv::Reader::from_path(path)?;
        let mut values = Vec::with_capacity(side.r.len * side.t.len);
        for rec in r.records() {
            let rec = rec?;
            let v: f64 = rec
                .get(2)
                .ok_or_else(|| Error::InvalidInput("forcing rows need three columns".into()))?
                .trim()
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad forcing value: {e}")))?;
            values.push(v);
        }
        Self::new(side.d, side.r, side.t, values, side.k)
    }

    /// Time nodes carrying a nonzero slice.
    fn active(&self, it: usize) -> bool {
        self.slices[it].support.is_some()
    }

    /// Radial extent of the forcing's support over all times.
    pub fn radial_support(&self) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for s in &self.slices {
            if let Some((lo, hi)) = s.support {
                out = Some(out.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
            }
        }
        out
    }

    /// Largest r - |t| over the support of the interpolant, if any.
    pub fn cone_offset(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (it, s) in self.slices.iter().enumerate() {
            if let Some((_, hi)) = s.support {
                let t = self.t_axis.node(it).abs();
                let reach = (self.t_axis.spacing).min(t);
                let v = hi - t + reach;
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        best
    }

    /// Times between which the forcing can be nonzero.
    pub fn time_support(&self) -> Option<(f64, f64)> {
        let first = (0..self.t_axis.len).find(|&i| self.active(i))?;
        let last = (0..self.t_axis.len).rev().find(|&i| self.active(i))?;
        Some((
            self.t_axis.node(first.saturating_sub(1)),
            self.t_axis.node((last + 1).min(self.t_axis.len - 1)),
        ))
    }
}

impl RadialField for ForcingField {
    fn value(&self, r: f64, t: f64) -> f64 {
        self.value_at(r, t)
    }
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Duhamel integral `\int_0^t S(t - tau)(0, F(., tau))(r) dtau`, trapezoid
/// in tau on the forcing's time nodes.
pub fn duhamel(f: &ForcingField, kernel: &SymmetricKernel, r: f64, t: f64) -> Result<f64> {
    check_radius(r)?;
    if kernel.d != f.d {
        return Err(Error::InvalidInput("kernel and forcing dimensions differ".into()));
    }
    let (lo, hi) = if t >= 0.0 { (0.0, t) } else { (t, 0.0) };
    if !(f.t_axis.contains(lo) && f.t_axis.contains(hi)) {
        return Err(Error::Window(format!(
            "t = {t} needs forcing on [{lo}, {hi}], grid covers [{}, {}]",
            f.t_axis.origin,
            f.t_axis.end()
        )));
    }
    Ok(duhamel_unchecked(f, kernel, r, t))
}

fn duhamel_unchecked(f: &ForcingField, kernel: &SymmetricKernel, r: f64, t: f64) -> f64 {
    match f.time_support() {
        Some(support) => duhamel_core(f, kernel, support, r, t),
        None => 0.0,
    }
}

fn duhamel_core(f: &ForcingField, kernel: &SymmetricKernel, (tlo, thi): (f64, f64), r: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let ax = f.t_axis;
    let (lo, hi) = if t > 0.0 { (0.0, t) } else { (t, 0.0) };
    // the integrand vanishes outside [tlo, thi]
    let (a, b) = (lo.max(tlo), hi.min(thi));
    if !(a < b) {
        return 0.0;
    }
    // integrand at tau: S(t - tau)(0, F(., tau))(r), linear in the two bracketing slices
    let eval = |tau: f64| -> f64 {
        if tau == t {
            return 0.0;
        }
        let x = ((tau - ax.origin) / ax.spacing).clamp(0.0, (ax.len - 1) as f64);
        let i = (x.floor() as usize).min(ax.len - 2);
        let w = x - i as f64;
        let elapsed = t - tau;
        let mut acc = 0.0;
        if w < 1.0 - 1e-12 && f.active(i) {
            acc += (1.0 - w) * signed_sine(kernel, &f.slices[i], r, elapsed);
        }
        if w > 1e-12 && f.active(i + 1) {
            acc += w * signed_sine(kernel, &f.slices[i + 1], r, elapsed);
        }
        acc
    };
    let mut nodes = vec![a];
    let first = ((a - ax.origin) / ax.spacing).floor() as i64 + 1;
    let mut i = first.max(0);
    while (i as usize) < ax.len {
        let tau = ax.node(i as usize);
        if tau >= b - 1e-12 * ax.spacing {
            break;
        }
        if tau > a + 1e-12 * ax.spacing {
            nodes.push(tau);
        }
        i += 1;
    }
    nodes.push(b);
    let mut acc = 0.0;
    let mut prev = eval(a);
    for k in 0..nodes.len() - 1 {
        let next = eval(nodes[k + 1]);
        acc += 0.5 * (nodes[k + 1] - nodes[k]) * (prev + next);
        prev = next;
    }
    if t > 0.0 {
        acc
    } else {
        -acc
    }
}

/// Duhamel solution as a field; evaluates to 0 outside the forcing's time grid.
#[derive(Debug, Clone)]
pub struct DuhamelField {
    kernel: SymmetricKernel,
    forcing: ForcingField,
    support: Option<(f64, f64)>,
    offset: f64,
}

impl DuhamelField {
    pub fn new(forcing: ForcingField) -> Result<Self> {
        let support = forcing.time_support();
        let offset = forcing.cone_offset().unwrap_or(0.0);
        Ok(Self { kernel: build_kernel(forcing.d)?, forcing, support, offset })
    }

    pub fn forcing(&self) -> &ForcingField {
        &self.forcing
    }

    pub fn evaluate(&self, r: f64, t: f64) -> Result<f64> {
        duhamel(&self.forcing, &self.kernel, r, t)
    }
}

impl RadialField for DuhamelField {
    /// The forcing is taken to vanish outside its time grid.
    fn value(&self, r: f64, t: f64) -> f64 {
        if !(r > 0.0) {
            return f64::NAN;
        }
        match self.support {
            // finite speed
            Some(support) if r - t.abs() <= self.offset => duhamel_core(&self.forcing, &self.kernel, support, r, t),
            _ => 0.0,
        }
    }

    fn exterior_support_radius(&self) -> Option<f64> {
        Some(self.offset)
    }
}

/// `(sigma_{d-1} \int |f|^q r^{d-1} dr)^{1/q}`.
pub fn radial_lq_norm(f: &RadialSamples, q: f64, d: usize) -> f64 {
    let view = RadialView { origin: f.origin, spacing: f.spacing, values: &f.values };
    let Some((lo, hi)) = view.support() else {
        return 0.0;
    };
    let mut total = 0.0;
    let n = f.values.len();
    let cells = (0..n.saturating_sub(1)).map(|i| (f.node(i), f.node(i + 1)));
    for (a, b) in std::iter::once((0.0, f.origin)).chain(cells) {
        if b <= a || b <= lo || a >= hi {
            continue;
        }
        for (x, w) in gauss8().on(a, b) {
            total += w * view.value_at(x).abs().powf(q) * x.powi(d as i32 - 1);
        }
    }
    (sphere_area(d - 1) * total).powf(1.0 / q)
}

/// Largest value over `samples` of
/// `|S(t)(0,u1)(r)| r^{(d-1)/2} / (a^{(d-1)(1/2-1/q)} (b-a)^{1-1/q} ||u1||_{L^q})`
/// for u1 supported in the shell a < r < b.
pub fn pointwise_bound_ratio(
    u1: &RadialSamples,
    shell: (f64, f64),
    kernel: &SymmetricKernel,
    q: f64,
    samples: &[(f64, f64)],
) -> Result<f64> {
    let (a, b) = shell;
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidInput(format!("invalid shell ({a}, {b})")));
    }
    if b / a > 2.0 + 1e-12 {
        return Err(Error::Precondition(format!("shell ratio b/a = {} exceeds 2", b / a)));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::Domain(format!("q must lie in [1, inf), got {q}")));
    }
    let d = kernel.d;
    let norm = radial_lq_norm(u1, q, d);
    if norm == 0.0 {
        return Ok(0.0);
    }
    if let Some(&(r, t)) = samples.iter().find(|&&(r, t)| !(r > t.abs() && t != 0.0)) {
        return Err(Error::InvalidInput(format!("sample (r, t) = ({r}, {t}) violates r > |t| > 0")));
    }
    let prepared = Prepared::new(u1, d);
    let denom = a.powf((d as f64 - 1.0) * (0.5 - 1.0 / q)) * (b - a).powf(1.0 - 1.0 / q) * norm;
    let mu = (d as f64 - 1.0) / 2.0;
    let best = samples
        .iter()
        .map(|&(r, t)| signed_sine(kernel, &prepared, r, t).abs() * r.powf(mu))
        .fold(0.0, f64::max);
    Ok(best / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump(r: f64, a: f64, b: f64) -> f64 {
        if r <= a || r >= b {
            0.0
        } else {
            let x = (2.0 * r - a - b) / (b - a);
            (1.0 - x * x).powi(4)
        }
    }

    #[test]
    fn am_constants_and_normalization() {
        let k3 = build_kernel(3).unwrap();
        assert_eq!(k3.am_constants(), &[1.0]);
        assert!((k3.normalization() - 0.5).abs() < 1e-15);
        assert_eq!(build_kernel(5).unwrap().am_constants(), &[0.0, 1.0]);
        assert_eq!(build_kernel(7).unwrap().am_constants(), &[0.0, -1.0, 1.0]);
        assert_eq!(build_kernel(9).unwrap().am_constants(), &[0.0, 3.0, -3.0, 1.0]);
        assert!(build_kernel(11).is_err());
        assert!(build_kernel(4).is_err());
    }

    #[test]
    fn expansion_matches_product_and_taylor_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [3, 5, 7, 9] {
            let k = build_kernel(d).unwrap();
            for _ in 0..20 {
                let r: f64 = rng.gen_range(0.5..3.0);
                let t: f64 = rng.gen_range(0.1..3.0);
                let rho: f64 = rng.gen_range((r - t).abs()..r + t);
                let prod = k.eval_product(r, t, rho);
                let expd = k.eval_expanded(0, r, t, rho);
                assert!((prod - expd).abs() <= 1e-10 * prod.abs().max(1e-300) + 1e-12, "d={d}");
                // symmetry in r <-> rho
                assert!((prod - k.eval_product(rho, t, r)).abs() <= 1e-12 * prod.abs().max(1.0));
                let mut out = [0.0; 8];
                k.t_derivatives(r, t, rho, &mut out);
                for m in 0..=k.exponent() + 1 {
                    let e = k.eval_expanded(m, r, t, rho);
                    assert!((out[m] - e).abs() <= 1e-9 * (1.0 + e.abs()), "d={d} m={m}: {} vs {e}", out[m]);
                }
            }
        }
    }

    #[test]
    fn three_dimensional_closed_form() {
        // u1 = chi_[1,2](s) / s: \int s u1 ds over [lo, hi] is the length of the overlap
        let dr = 1.0 / 1024.0;
        let u1 = RadialSamples::from_fn(dr, dr, 3000, |s| if (1.0..=2.0).contains(&s) { 1.0 / s } else { 0.0 }).unwrap();
        let k = build_kernel(3).unwrap();
        for &(r, t) in &[(1.5f64, 0.2f64), (0.8, 0.5), (3.0, 1.4), (0.3, 1.5)] {
            let lo = (r - t).abs().max(1.0);
            let hi = (r + t).min(2.0);
            let exact = 0.5 * (hi - lo).max(0.0) / r;
            let got = half_wave(&u1, &k, r, t).unwrap();
            // the interpolant differs from the indicator on one cell at each edge
            assert!((got - exact).abs() < 2.0 * dr / r, "r={r} t={t}: {got} vs {exact}");
        }
    }

    #[test]
    fn general_path_agrees_with_prefix_path_in_three_dimensions() {
        let dr = 0.01;
        let u1 = RadialSamples::from_fn(dr, dr, 400, |s| bump(s, 1.0, 2.5) * (1.0 + s)).unwrap();
        let k = build_kernel(3).unwrap();
        let prepared = Prepared::new(&u1, 3);
        let mut general = prepared.clone();
        general.prefix = None;
        for &(r, t) in &[(1.5, 0.2), (0.8, 0.5), (3.0, 1.4), (0.3, 1.5)] {
            let a = sine_part(&k, &prepared, r, t);
            let b = sine_part(&k, &general, r, t);
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn odd_in_time_and_zero_at_zero() {
        let dr = 0.01;
        let u1 = RadialSamples::from_fn(dr, dr, 400, |s| bump(s, 1.0, 2.0)).unwrap();
        for d in [3, 5, 7, 9] {
            let k = build_kernel(d).unwrap();
            assert_eq!(half_wave(&u1, &k, 1.3, 0.0).unwrap(), 0.0);
            let a = half_wave(&u1, &k, 1.3, 0.4).unwrap();
            let b = half_wave(&u1, &k, 1.3, -0.4).unwrap();
            assert_eq!(a, -b);
            assert!(a != 0.0);
            // outside the influence region
            assert_eq!(half_wave(&u1, &k, 3.0, 0.5).unwrap(), 0.0);
            assert_eq!(half_wave(&u1, &k, 0.2, 0.3).unwrap(), 0.0);
        }
        assert!(half_wave(&u1, &build_kernel(3).unwrap(), 0.0, 1.0).is_err());
    }

    #[test]
    fn cosine_part_is_time_derivative_of_sine_part() {
        let dr = 1.0 / 400.0;
        let u = RadialSamples::from_fn(dr, dr, 1400, |s| bump(s, 1.0, 2.5) * (2.0 - s.sin())).unwrap();
        for d in [3, 5, 7, 9] {
            let k = build_kernel(d).unwrap();
            for &(r, t) in &[(1.6, 0.3), (0.7, 0.9), (2.2, 1.7), (1.0, 0.05)] {
                let h = 1e-4;
                let fd = (half_wave(&u, &k, r, t + h).unwrap() - half_wave(&u, &k, r, t - h).unwrap()) / (2.0 * h);
                let an = half_wave_dt(&u, &k, r, t).unwrap();
                assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "d={d} r={r} t={t}: {fd} vs {an}");
            }
            // initial data are recovered at t = 0+
            let s = half_wave_dt(&u, &k, 1.7, 1e-7).unwrap();
            assert!((s - u.value_at(1.7)).abs() < 1e-4, "d={d}");
        }
    }

    #[test]
    fn duhamel_is_linear_in_separable_forcing() {
        let rx = Axis::new(0.02, 0.02, 200).unwrap();
        let tx = Axis::new(-1.0, 0.05, 81).unwrap();
        let a = |t: f64| (1.0 + t).max(0.0) * (3.0 - t);
        let b = |r: f64| bump(r, 1.0, 2.0);
        let f = ForcingField::from_fn(3, rx, tx, |r, t| a(t) * b(r)).unwrap();
        let k = build_kernel(3).unwrap();
        let u1 = RadialSamples::from_fn(rx.origin, rx.spacing, rx.len, b).unwrap();
        for &(r, t) in &[(1.5, 0.7), (2.2, 1.33), (0.9, -0.45)] {
            let got = duhamel(&f, &k, r, t).unwrap();
            let (lo, hi) = if t > 0.0 { (0.0, t) } else { (t, 0.0) };
            let mut nodes = vec![lo];
            for i in 0..tx.len {
                let tau = tx.node(i);
                if tau > lo + 1e-12 && tau < hi - 1e-12 {
                    nodes.push(tau);
                }
            }
            nodes.push(hi);
            let vals: Vec<f64> = nodes
                .iter()
                .map(|&tau| {
                    let x = (tau - tx.origin) / tx.spacing;
                    let i = x.floor() as usize;
                    let w = x - i as f64;
                    let amp = (1.0 - w) * a(tx.node(i)) + w * a(tx.node(i + 1));
                    amp * half_wave(&u1, &k, r, t - tau).unwrap()
                })
                .collect();
            let mut expected = 0.0;
            for i in 0..nodes.len() - 1 {
                expected += 0.5 * (nodes[i + 1] - nodes[i]) * (vals[i] + vals[i + 1]);
            }
            if t < 0.0 {
                expected = -expected;
            }
            assert!((got - expected).abs() < 1e-8 * (1.0 + expected.abs()), "{got} vs {expected}");
        }
        assert!(matches!(duhamel(&f, &k, 1.0, 3.5), Err(Error::Window(_))));
        let z = ForcingField::zero(3, rx, tx).unwrap();
        assert_eq!(duhamel(&z, &k, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn channel_forcing_respects_finite_speed() {
        let rx = Axis::new(0.01, 0.01, 600).unwrap();
        let tx = Axis::new(0.0, 0.02, 151).unwrap();
        let k = 0;
        let f = ForcingField::from_fn(3, rx, tx, |r, t| bump(r - t, 1.0, 2.0) * (1.0 + t)).unwrap();
        let fk = f.restrict_to_channel(k).unwrap();
        let kernel = build_kernel(3).unwrap();
        for &(t, dr) in &[(1.0, 0.05), (2.5, 0.01), (3.0, 0.3)] {
            let r = t + 2.0 + dr + rx.spacing;
            assert_eq!(duhamel(&fk, &kernel, r, t).unwrap(), 0.0);
        }
        assert!(ForcingField::new(3, rx, tx, f.values().to_vec(), Some(3)).is_err());
    }

    #[test]
    fn forcing_csv_round_trip() {
        let rx = Axis::new(0.1, 0.1, 5).unwrap();
        let tx = Axis::new(0.0, 0.5, 3).unwrap();
        let f = ForcingField::from_fn(5, rx, tx, |r, t| r * (t + 1.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        f.write_csv(&p).unwrap();
        let g = ForcingField::read_csv(&p).unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.r_axis(), rx);
        assert_eq!(g.dimension(), 5);
    }

    #[test]
    fn lemma_ratio_edge_cases() {
        let k = build_kernel(3).unwrap();
        let z = RadialSamples::new(0.01, 0.01, vec![0.0; 300]).unwrap();
        assert_eq!(pointwise_bound_ratio(&z, (1.0, 2.0), &k, 2.0, &[(1.5, 0.5)]).unwrap(), 0.0);
        let u = RadialSamples::from_fn(0.01, 0.01, 300, |r| bump(r, 1.0, 2.0)).unwrap();
        assert!(matches!(pointwise_bound_ratio(&u, (1.0, 2.5), &k, 2.0, &[(1.5, 0.5)]), Err(Error::Precondition(_))));
        assert!(pointwise_bound_ratio(&u, (1.0, 2.0), &k, 2.0, &[(1.5, 0.5)]).unwrap() > 0.0);
    }

    #[test]
    fn lq_norm_of_constant_shell() {
        let dr = 1e-3;
        let u = RadialSamples::from_fn(dr, dr, 3000, |r| if (1.0..=2.0).contains(&r) { 1.0 } else { 0.0 }).unwrap();
        let exact = (4.0 * std::f64::consts::PI * (8.0 - 1.0) / 3.0).sqrt();
        assert!((radial_lq_norm(&u, 2.0, 3) - exact).abs() < 1e-2 * exact);
    }
}
