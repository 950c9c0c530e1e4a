//! Finite-difference oracle for `u_tt = u_rr + (d-1)/r u_r + F`.
//!
//! Finite volumes on `r_i = i * dr`: cell i spans `[r_{i-1/2}, r_{i+1/2}]`
//! with measure `(r_{i+1/2}^d - r_{i-1/2}^d) / d`, the axis cell is
//! `[0, dr/2]`, and `u = 0` at `rmax`. Leapfrog in time.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::sphere_area;
use crate::wavefield::{check_dimension, RadialField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdGrid {
    pub rmax: f64,
    pub nr: usize,
    pub dt: f64,
    pub nt: usize,
    pub d: usize,
}

impl FdGrid {
    pub fn new(rmax: f64, nr: usize, dt: f64, nt: usize, d: usize) -> Result<Self> {
        check_dimension(d, 13)?;
        if !(rmax > 0.0 && dt > 0.0) {
            return Err(Error::Config("rmax and dt must be positive".into()));
        }
        if nr < 64 {
            return Err(Error::Config(format!("need at least 64 radial cells, got {nr}")));
        }
        let dr = rmax / nr as f64;
        if dt > 0.5 * dr * (1.0 + 1e-12) {
            return Err(Error::Config(format!("CFL violated: dt = {dt} > dr/2 = {}", 0.5 * dr)));
        }
        let stable = stable_dt(dr, d);
        if dt > stable {
            return Err(Error::Config(format!("leapfrog unstable in d = {d}: dt = {dt} > {stable}")));
        }
        Ok(Self { rmax, nr, dt, nt, d })
    }

    /// Grid reaching `t_final` with `dt = cfl * dr`, reduced to the stability limit when needed.
    pub fn for_horizon(rmax: f64, nr: usize, cfl: f64, t_final: f64, d: usize) -> Result<Self> {
        let dr = rmax / nr as f64;
        let step = (cfl * dr).min(stable_dt(dr, d));
        let nt = (t_final / step).ceil().max(1.0) as usize;
        Self::new(rmax, nr, t_final / nt as f64, nt, d)
    }

    pub fn dr(&self) -> f64 {
        self.rmax / self.nr as f64
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.nt as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dr()
    }
}

/// Largest leapfrog step for the radial operator at spacing `dr`, with a 2% margin.
///
/// The spectral radius scales like 1/dr^2 and its largest modes sit at the
/// axis, so it is computed once by power iteration on a unit-spacing grid.
pub fn stable_dt(dr: f64, d: usize) -> f64 {
    let grid = FdGrid { rmax: 256.0, nr: 256, dt: 0.1, nt: 1, d };
    let op = Operator::new(&grid);
    // symmetric form S = M^{-1/2} A M^{-1/2}
    let n = grid.nr;
    let sq: Vec<f64> = op.volume.iter().map(|v| v.sqrt()).collect();
    let mut x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (1.0 + i as f64)).collect();
    let mut lu = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..400 {
        let y: Vec<f64> = x.iter().zip(&sq).map(|(a, s)| a / s).collect();
        op.apply(&y, &mut lu);
        let z: Vec<f64> = lu.iter().zip(&op.volume).zip(&sq).map(|((l, v), s)| -l * v / s).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        lambda = norm / xn;
        x = z.iter().map(|v| v / norm).collect();
    }
    0.98 * 2.0 / lambda.sqrt() * dr
}

/// Stored solution; `snapshots[n][i]` is u(r_i, n * dt * stride).
#[derive(Debug, Clone)]
pub struct FdSolution {
    pub grid: FdGrid,
    pub stride: usize,
    pub snapshots: Vec<Vec<f64>>,
    /// Discrete energy at each half step, one entry per stored snapshot after the first.
    pub energy: Vec<f64>,
}

impl FdSolution {
    pub fn times(&self) -> Vec<f64> {
        (0..self.snapshots.len()).map(|n| (n * self.stride) as f64 * self.grid.dt).collect()
    }

    pub fn snapshot_time(&self, n: usize) -> f64 {
        (n * self.stride) as f64 * self.grid.dt
    }

    /// Largest relative deviation of the discrete energy from its first value.
    pub fn energy_drift(&self) -> f64 {
        let Some(&e0) = self.energy.first() else {
            return 0.0;
        };
        if e0 == 0.0 {
            return 0.0;
        }
        self.energy.iter().map(|e| (e - e0).abs() / e0.abs()).fold(0.0, f64::max)
    }
}

impl RadialField for FdSolution {
    /// Linear interpolation in r and t; NaN outside the computed range.
    fn value(&self, r: f64, t: f64) -> f64 {
        let g = &self.grid;
        let tau = g.dt * self.stride as f64;
        let x = t / tau;
        let last = self.snapshots.len() - 1;
        if !(x >= -1e-9 && x <= last as f64 + 1e-9) || !(r >= 0.0) {
            return f64::NAN;
        }
        let x = x.clamp(0.0, last as f64);
        let n = (x.floor() as usize).min(last.saturating_sub(1));
        let w = x - n as f64;
        let y = r / g.dr();
        if y >= g.nr as f64 {
            return 0.0;
        }
        let i = y.floor() as usize;
        let f = y - i as f64;
        let at = |s: &Vec<f64>| {
            let a = s[i];
            let b = if i + 1 < s.len() { s[i + 1] } else { 0.0 };
            a * (1.0 - f) + b * f
        };
        if last == 0 {
            return at(&self.snapshots[0]);
        }
        at(&self.snapshots[n]) * (1.0 - w) + at(&self.snapshots[n + 1]) * w
    }
}

/// Cell measures and face weights of the radial operator.
struct Operator {
    /// (r_{i+1/2}^d - r_{i-1/2}^d) / d
    volume: Vec<f64>,
    /// r_{i+1/2}^{d-1} / dr
    face: Vec<f64>,
}

impl Operator {
    fn new(grid: &FdGrid) -> Self {
        let dr = grid.dr();
        let d = grid.d as i32;
        let n = grid.nr;
        let half = |i: usize| (i as f64 + 0.5) * dr;
        let volume = (0..n)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { half(i - 1) };
                (half(i).powi(d) - lo.powi(d)) / d as f64
            })
            .collect();
        let face = (0..n).map(|i| half(i).powi(d - 1) / dr).collect();
        Self { volume, face }
    }

    /// out_i = (L u)_i with u_nr = 0.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            let mut flux = self.face[i] * (right - u[i]);
            if i > 0 {
                flux -= self.face[i - 1] * (u[i] - u[i - 1]);
            }
            out[i] = flux / self.volume[i];
        }
    }

    /// Staggered energy `1/2 |v|_M^2 + 1/2 <K u_new, K u_old>`, without sigma.
    fn energy(&self, old: &[f64], new: &[f64], dt: f64) -> f64 {
        let n = old.len();
        let mut kin = 0.0;
        let mut pot = 0.0;
        for i in 0..n {
            let v = (new[i] - old[i]) / dt;
            kin += self.volume[i] * v * v;
            let gn = if i + 1 < n { new[i + 1] } else { 0.0 } - new[i];
            let go = if i + 1 < n { old[i + 1] } else { 0.0 } - old[i];
            pot += self.face[i] * gn * go;
        }
        0.5 * (kin + pot)
    }
}

/// Leapfrog solve from data (u0, u1) with optional forcing; every
/// `stride`-th step is stored.
pub fn fd_solve(
    u0: &dyn Fn(f64) -> f64,
    u1: &dyn Fn(f64) -> f64,
    forcing: Option<&dyn RadialField>,
    grid: FdGrid,
    stride: usize,
) -> Result<FdSolution> {
    let grid = FdGrid::new(grid.rmax, grid.nr, grid.dt, grid.nt, grid.d)?;
    let stride = stride.max(1);
    let n = grid.nr;
    let dt = grid.dt;
    let op = Operator::new(&grid);
    let rs: Vec<f64> = (0..n).map(|i| grid.node(i)).collect();
    let force = |t: f64, out: &mut [f64]| {
        if let Some(f) = forcing {
            for (o, &r) in out.iter_mut().zip(&rs) {
                let v = f.value(r, t);
                *o = if v.is_finite() { v } else { 0.0 };
            }
        }
    };
    let mut prev: Vec<f64> = rs.iter().map(|&r| u0(r)).collect();
    let vel: Vec<f64> = rs.iter().map(|&r| u1(r)).collect();
    if prev.iter().chain(&vel).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial data must be finite".into()));
    }
    let mut lu = vec![0.0; n];
    let mut lv = vec![0.0; n];
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    op.apply(&prev, &mut lu);
    op.apply(&vel, &mut lv);
    force(0.0, &mut f0);
    force(dt, &mut f1);
    // Taylor start: u(dt) = u0 + dt u1 + dt^2/2 (L u0 + F) + dt^3/6 (L u1 + F_t)
    let mut cur: Vec<f64> = (0..n)
        .map(|i| {
            prev[i]
                + dt * vel[i]
                + 0.5 * dt * dt * (lu[i] + f0[i])
                + dt * dt * dt / 6.0 * (lv[i] + (f1[i] - f0[i]) / dt)
        })
        .collect();
    let mut snapshots = vec![prev.clone()];
    let mut energy = vec![op.energy(&prev, &cur, dt)];
    if stride == 1 && grid.nt >= 1 {
        snapshots.push(cur.clone());
    }
    let mut next = vec![0.0; n];
    for step in 1..grid.nt {
        op.apply(&cur, &mut lu);
        force(step as f64 * dt, &mut f0);
        for i in 0..n {
            next[i] = 2.0 * cur[i] - prev[i] + dt * dt * (lu[i] + f0[i]);
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        if (step + 1) % stride == 0 {
            snapshots.push(cur.clone());
            energy.push(op.energy(&prev, &cur, dt));
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("finite-difference solution blew up".into()));
        }
    }
    let area = sphere_area(grid.d - 1);
    energy.iter_mut().for_each(|e| *e *= area);
    Ok(FdSolution { grid, stride, snapshots, energy })
}

/// Estimated convergence order from errors on successively halved grids.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceOrder {
    pub errors: Vec<f64>,
    /// log2(e_k / e_{k+1}) for each consecutive pair.
    pub pairwise: Vec<f64>,
    /// Order from the finest pair; NaN when flagged.
    pub order: f64,
    pub flagged: bool,
    pub warning: Option<String>,
}

/// Orders from at least three errors measured at spacings h, h/2, h/4, ...
pub fn convergence_order(errors: &[f64]) -> Result<ConvergenceOrder> {
    if errors.len() < 3 {
        return Err(Error::InsufficientRange("need errors on three nested grids".into()));
    }
    let pairwise: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]) && errors.iter().all(|e| e.is_finite() && *e > 0.0);
    let (order, flagged, warning) = if monotone {
        (*pairwise.last().unwrap(), false, None)
    } else {
        (f64::NAN, true, Some(format!("errors are not monotonically decreasing: {errors:?}")))
    };
    Ok(ConvergenceOrder { errors: errors.to_vec(), pairwise, order, flagged, warning })
}

/// Relative discrete L^2 difference `|a - b| / |b|` with weights.
pub fn relative_l2(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((x, y), w) in a.iter().zip(b).zip(weights) {
        num += w * (x - y) * (x - y);
        den += w * y * y;
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(r: f64, a: f64, b: f64) -> f64 {
        if r <= a || r >= b {
            0.0
        } else {
            let x = (2.0 * r - a - b) / (b - a);
            (1.0 - x * x).powi(5)
        }
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(FdGrid::new(4.0, 32, 0.01, 10, 3), Err(Error::Config(_))));
        assert!(matches!(FdGrid::new(4.0, 100, 0.03, 10, 3), Err(Error::Config(_))));
        assert!(FdGrid::new(4.0, 100, 0.02, 10, 3).is_ok());
        assert!(FdGrid::new(4.0, 100, 0.02, 10, 4).is_err());
    }

    #[test]
    fn zero_data_stay_zero() {
        let g = FdGrid::new(4.0, 64, 0.02, 50, 5).unwrap();
        let s = fd_solve(&|_| 0.0, &|_| 0.0, None, g, 1).unwrap();
        assert!(s.snapshots.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    /// d = 3 with v = r u: v solves the 1D wave equation with odd reflection.
    fn dalembert(r: f64, t: f64) -> f64 {
        let v0 = |s: f64| s * bump(s.abs(), 1.0, 2.0);
        0.5 * (v0(r + t) + v0(r - t)) / r
    }

    #[test]
    fn three_dimensional_dalembert_and_order() {
        let t_final = 2.5;
        let mut errors = Vec::new();
        for &nr in &[400usize, 800, 1600] {
            let g = FdGrid::for_horizon(6.0, nr, 0.5, t_final, 3).unwrap();
            let s = fd_solve(&|r| bump(r, 1.0, 2.0), &|_| 0.0, None, g, 1).unwrap();
            let last = s.snapshots.len() - 1;
            let rs: Vec<f64> = (1..nr).map(|i| g.node(i)).collect();
            let num: Vec<f64> = (1..nr).map(|i| s.snapshots[last][i]).collect();
            let exact: Vec<f64> = rs.iter().map(|&r| dalembert(r, s.snapshot_time(last))).collect();
            let w: Vec<f64> = rs.iter().map(|r| r * r).collect();
            errors.push(relative_l2(&num, &exact, &w));
            assert!(s.energy_drift() < 1e-10, "{}", s.energy_drift());
        }
        assert!(errors[2] < 1e-3, "{errors:?}");
        let ord = convergence_order(&errors).unwrap();
        assert!(ord.order > 1.8 && ord.order < 2.2, "{ord:?}");
    }

    #[test]
    fn stable_at_half_cfl_in_higher_dimensions() {
        for d in [5, 7, 9] {
            let g = FdGrid::for_horizon(6.0, 256, 0.5, 3.0, d).unwrap();
            let s = fd_solve(&|r| (-4.0 * r * r).exp(), &|_| 0.0, None, g, 8).unwrap();
            assert!(s.snapshots.last().unwrap().iter().all(|v| v.abs() < 10.0), "d={d}");
            assert!(s.energy_drift() < 1e-10);
        }
    }

    #[test]
    fn flags_non_monotone_errors() {
        let o = convergence_order(&[1e-2, 2.5e-3, 3e-3]).unwrap();
        assert!(o.flagged && o.order.is_nan());
        let o = convergence_order(&[1.6e-2, 4e-3, 1e-3]).unwrap();
        assert!((o.order - 2.0).abs() < 1e-12);
        assert!(convergence_order(&[1.0, 0.5]).is_err());
    }

    #[test]
    fn finite_speed_to_one_cell() {
        let g = FdGrid::for_horizon(8.0, 800, 0.5, 2.0, 3).unwrap();
        let s = fd_solve(&|r| bump(r, 1.0, 2.0), &|_| 0.0, None, g, 1).unwrap();
        let last = s.snapshots.len() - 1;
        let front = 2.0 + s.snapshot_time(last);
        let dr = g.dr();
        let peak = s.snapshots[last].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..g.nr {
            if g.node(i) > front + 6.0 * dr {
                assert!(s.snapshots[last][i].abs() < 1e-6 * peak, "r = {}", g.node(i));
            }
        }
    }
}
