//! Adaptive Simpson quadrature with an absolute error target.

const MAX_DEPTH: u32 = 48;

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, abs_tol);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, abs_tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || m <= a || m >= b {
        return left + right + delta / 15.0;
    }
    step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_are_exact() {
        assert_abs_diff_eq!(integrate(|x| x * x * x, 0.0, 2.0, 1e-12), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_function() {
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-10);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn step_function() {
        let v = integrate(|x| if x <= 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(v, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn reversed_limits() {
        assert_abs_diff_eq!(integrate(|_| 1.0, 1.0, 0.0, 1e-12), -1.0, epsilon = 1e-12);
    }
}
