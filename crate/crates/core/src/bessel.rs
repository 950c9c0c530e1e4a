//! Spherical Bessel functions j_n in closed form.
//!
//! For odd dimension d the radial Fourier kernel is J_{d/2-1}, a half-integer
//! order Bessel function, i.e. a spherical Bessel function j_{(d-3)/2} up to a
//! power of the argument. Those are finite combinations of sin, cos and powers.

/// j_n(x) for x >= 0.
pub fn spherical_jn(n: usize, x: f64) -> f64 {
    if x < n as f64 + 1.0 {
        series(n, x)
    } else {
        let (s, c) = x.sin_cos();
        upward(n, x, s, c)
    }
}

/// j_n(x) when sin x and cos x are already known (x >= n + 1 uses them).
#[inline]
pub fn spherical_jn_sc(n: usize, x: f64, sin_x: f64, cos_x: f64) -> f64 {
    if x < n as f64 + 1.0 {
        series(n, x)
    } else {
        upward(n, x, sin_x, cos_x)
    }
}

#[inline]
fn upward(n: usize, x: f64, s: f64, c: f64) -> f64 {
    let inv = 1.0 / x;
    let j0 = s * inv;
    if n == 0 {
        return j0;
    }
    let mut jm = j0;
    let mut j = (s * inv - c) * inv;
    for l in 1..n {
        let next = (2 * l + 1) as f64 * inv * j - jm;
        jm = j;
        j = next;
    }
    j
}

fn series(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let mut dfact = 1.0;
    for k in 0..=n {
        dfact *= (2 * k + 1) as f64;
    }
    let lead = x.powi(n as i32) / dfact;
    let y = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= y / (k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}
