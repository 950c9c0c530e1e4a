use channelwave::channel::*;
use channelwave::experiments::*;
use channelwave::exterior::*;
use channelwave::fd::*;
use channelwave::profile::*;
use channelwave::propagator::*;
use channelwave::quadrature::*;
use channelwave::wavefield::*;

fn panels(lo: f64, hi: f64, n: usize, q: &GaussLegendre, f: impl Fn(f64) -> f64) -> f64 {
    (0..n)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
            q.integrate(a, b, &f)
        })
        .sum()
}

/// Brute-force Gagliardo seminorm of a profile supported in [lo, hi], up to a constant.
fn gagliardo(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, zmax: f64, gamma: f64) -> f64 {
    let q = GaussLegendre::new(24);
    let a = |z: f64| panels(lo - z, hi, 200, &q, |y| (g(y + z) - g(y)).powi(2));
    let l2 = panels(lo, hi, 200, &q, |y| g(y) * g(y));
    let mut inner = 0.0;
    let mut b = zmax;
    for _ in 0..60 {
        inner += q.integrate(b / 2.0, b, |z| a(z) * z.powf(-1.0 - 2.0 * gamma));
        b /= 2.0;
    }
    2.0 * inner + 4.0 * l2 * zmax.powf(-2.0 * gamma) / (2.0 * gamma)
}

#[test]
fn fractional_norm_matches_brute_force_double_integral() {
    let gamma = 0.25;
    let h = 1.0 / 256.0;
    let order = SobolevOrder::new(gamma).unwrap();
    let gauss = |x: f64| if x.abs() < 9.0 { (-x * x).exp() } else { 0.0 };
    let gg = SampledProfile::from_fn(GridSpec::covering(-10.0, 10.0, h).unwrap(), gauss).unwrap();
    let c = hnorm_squared(&gg, order).unwrap() / gagliardo(&gauss, -9.0, 9.0, 18.0, gamma);
    assert!((c - 0.0997359).abs() < 1e-5, "{c}");
    let bump = |x: f64| if x > 1.0 && x < 2.0 { bump_shape(2.0 * x - 3.0) } else { 0.0 };
    let gb = SampledProfile::from_fn(GridSpec::covering(0.0, 3.0, h).unwrap(), bump).unwrap();
    let ratio = hnorm_squared(&gb, order).unwrap() / (c * gagliardo(&bump, 1.0, 2.0, 1.0, gamma));
    assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
}

#[test]
fn tent_lemma_ratio_is_frozen() {
    let h = 1.0 / 64.0;
    let grid = GridSpec::covering(-2.0 * h, 1.0 + 2.0 * h, h).unwrap();
    let tent = SampledProfile::from_fn(grid, |x| (1.0 - (2.0 * x - 1.0).abs()).max(0.0)).unwrap();
    let r = hgamma_lemma_ratio(&tent, Interval::new(0.0, 1.0), SobolevOrder::new(-0.25).unwrap()).unwrap();
    assert!((r - 0.560707464314).abs() < 1e-9, "{r}");
}

#[test]
fn radiation_field_is_exact_past_the_support() {
    let g = oracle_profile(3, 256).unwrap();
    let w = RadialFreeWave::new(g.clone(), 3).unwrap();
    let (lo, hi) = g.support().unwrap();
    let diam = hi - lo;
    for t in [1.25 * diam, 2.5 * diam, 5.0 * diam, 8.0 * diam] {
        let rel = radiation_limit_defect(&w, t).unwrap() / g.l2_norm();
        assert!(rel < 1e-12, "T = {t}: {rel:e}");
    }
}

#[test]
fn diagonal_forcing_ratio_is_frozen() {
    let e = ExponentSet::standard(3, 1.0).unwrap();
    let r = forcing_decay(&e, 0, (0, 0), &DecayOptions::default()).unwrap();
    let v = r.rows[0].ratio.unwrap();
    assert!((v - 0.047137138134).abs() < 1e-9, "{v}");
}

#[test]
fn global_radius_is_monotone_in_the_target() {
    let data = bump_data(3, 1.0).unwrap();
    let en = radial_sobolev_norm(&data, 1.0).unwrap();
    let nd = InitialDataPair::new(3, data.u0.map(|_, v| v / en), data.u1.clone()).unwrap();
    let s = RadiusSearch { quadrature: ChannelQuadrature::default(), m_range: (-4, 4) };
    let radii: Vec<f64> = [0.01, 0.1, 0.3, 1.0].iter().map(|&t| radius_for_global(&nd, t, &s).unwrap()).collect();
    assert_eq!(radii[1], 1.0);
    assert!(radii.windows(2).all(|w| w[1] <= w[0]), "{radii:?}");
    assert!(radius_for_global(&nd, 0.0, &s).is_err());
}

#[test]
fn duhamel_agrees_with_finite_differences_in_five_dimensions() {
    let d = 5;
    let rx = Axis::new(0.01, 0.01, 600).unwrap();
    let tx = Axis::new(0.0, 0.01, 201).unwrap();
    let f = ForcingField::from_fn(d, rx, tx, |r, t| {
        let x = (r - 1.5 - 0.3 * t) / 0.6;
        if x.abs() < 1.0 {
            (1.0 - x * x).powi(4) * (1.0 + t)
        } else {
            0.0
        }
    })
    .unwrap();
    let du = DuhamelField::new(f.clone()).unwrap();
    let mut errs = Vec::new();
    for nr in [400usize, 800, 1600] {
        let g = FdGrid::for_horizon(6.0, nr, 0.5, 2.0, d).unwrap();
        let s = fd_solve(&|_| 0.0, &|_| 0.0, Some(&f), g, g.nt).unwrap();
        let last = s.snapshots.len() - 1;
        let t = s.snapshot_time(last);
        let idx: Vec<usize> = (1..nr).step_by(nr / 200).collect();
        let num: Vec<f64> = idx.iter().map(|&i| s.snapshots[last][i]).collect();
        let ex: Vec<f64> = idx.iter().map(|&i| du.value(g.node(i), t)).collect();
        let wts: Vec<f64> = idx.iter().map(|&i| g.node(i).powi(d as i32 - 1)).collect();
        errs.push(relative_l2(&num, &ex, &wts));
    }
    assert!(errs.iter().all(|&e| e < 3e-4), "{errs:?}");
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

fn free_wave(d: usize) -> RadialFreeWave {
    RadialFreeWave::new(oracle_profile(d, 128).unwrap(), d).unwrap()
}

#[test]
fn widening_the_channel_range_barely_moves_the_aggregate() {
    let e = ExponentSet::standard(3, 1.0).unwrap();
    let w = free_wave(3);
    let q = ChannelQuadrature::default();
    let narrow = channel_vector(&w, &e, -6, 6, TimeWindow::all(), &q).unwrap();
    let wide = channel_vector(&w, &e, -10, 10, TimeWindow::all(), &q).unwrap();
    let rel = (narrow.completed() - wide.completed()).abs() / wide.completed();
    assert!(rel < 1e-3, "{rel:e}");
    for j in -6..=6 {
        let (a, b) = (narrow.get(j).unwrap(), wide.get(j).unwrap());
        assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "channel {j}: {a} vs {b}");
    }
}

#[test]
fn channel_norms_are_finite_across_beta() {
    for beta in [0.6, 0.75, 1.0, 1.25, 1.4] {
        let e = ExponentSet::standard(5, beta).unwrap();
        let v = channel_vector(&free_wave(5), &e, -4, 4, TimeWindow::all(), &ChannelQuadrature::default()).unwrap();
        assert!(v.aggregate.is_finite() && v.aggregate > 0.0, "beta {beta}");
    }
}

fn unit_problem(d: usize, norm: f64, sign: f64) -> (ExteriorProblem, PicardOptions) {
    let opts = PicardOptions::for_dimension(d).unwrap();
    let base = ExteriorProblem { sign, ..calibration_family(d).unwrap() };
    let unit = free_exterior_norm(&base, &opts).unwrap();
    (base.scaled(norm / unit), opts)
}

#[test]
fn tiny_data_contract_fast() {
    for sign in [-1.0, 1.0] {
        let (p, opts) = unit_problem(3, 1e-2, sign);
        let (_, trace) = picard_solve(&p, &opts).unwrap();
        assert!(trace.converged && trace.iterations <= 4, "{trace:?}");
        assert!(trace.contraction.iter().all(|&k| k < 0.5), "{:?}", trace.contraction);
        assert!((trace.free_norm - 1e-2).abs() < 1e-12);
    }
}

#[test]
fn lipschitz_ratio_is_bounded_and_stable() {
    for sign in [-1.0, 1.0] {
        let (p, opts) = unit_problem(3, 0.9 * CALIBRATED_DELTA_D3, sign);
        let zero = p.scaled(0.0);
        let to_zero = lipschitz_check(&zero, &p, &opts).unwrap();
        assert!(to_zero <= 2.2, "{to_zero}");
        let full = lipschitz_check(&p, &perturbed(&p, 0, 0.02).unwrap(), &opts).unwrap();
        let half = lipschitz_check(&p, &perturbed(&p, 0, 0.01).unwrap(), &opts).unwrap();
        assert!(full <= 2.2 && (half / full - 1.0).abs() < 0.1, "{full} {half}");
    }
}

#[test]
fn exterior_solution_ignores_data_inside_the_obstacle() {
    let (p, opts) = unit_problem(3, 1.0, -1.0);
    let mut q = p.clone();
    q.data.u0 = p.data.u0.map(|r, v| {
        let x = (r - 0.5) / 0.3;
        v + if x.abs() < 1.0 { 5.0 * (1.0 - x * x).powi(4) } else { 0.0 }
    });
    let (a, _) = picard_solve(&p, &opts).unwrap();
    let (b, _) = picard_solve(&q, &opts).unwrap();
    let diff = a.field.zip_map(&b.field, |x, y| x - y).unwrap();
    let mut worst = 0.0f64;
    for i in 0..diff.r_axis.len {
        for k in 0..diff.t_axis.len {
            let (r, t) = (diff.r_axis.node(i), diff.t_axis.node(k));
            if p.in_exterior(r, t) && p.window.lo <= t && t <= p.window.hi {
                worst = worst.max(diff.value(r, t).abs());
            }
        }
    }
    assert_eq!(worst, 0.0);
}

#[test]
fn calibration_reproduces_the_three_dimensional_threshold() {
    let cal = calibrate_dimension(3, &PicardOptions::for_dimension(3).unwrap()).unwrap();
    assert!((cal.delta - CALIBRATED_DELTA_D3).abs() / CALIBRATED_DELTA_D3 < 0.01, "{cal:?}");
    assert!(cal.constant > 0.0);
}
