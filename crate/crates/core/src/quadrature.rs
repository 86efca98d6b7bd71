//! Adaptive Simpson quadrature.

/// Result of a quadrature: the value, the accumulated error estimate and
/// whether every subinterval met its share of the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `f` is only sampled at interior points and at the two endpoints; callers
/// with an integrable endpoint singularity must handle it analytically.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Quadrature
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    if a > b {
        let q = adaptive_simpson(f, b, a, tol);
        return Quadrature { value: -q.value, ..q };
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut acc = Quadrature {
        value: 0.0,
        error: 0.0,
        converged: true,
    };
    recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut acc);
    acc
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32, acc: &mut Quadrature)
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol || depth == 0 || m <= a || m >= b {
        if diff.abs() > 15.0 * tol {
            acc.converged = false;
        }
        acc.value += left + right + diff / 15.0;
        acc.error += diff.abs() / 15.0;
        return;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc);
    recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc);
}
