//! Derivative-free minimizers: Nelder-Mead for the strategy search and a
//! scanned golden-section search for the profiled 1-D fits.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder-Mead with the standard coefficients (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2).
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Initial simplex offset along each coordinate.
    pub step: Vec<f64>,
    /// Stop once the spread of simplex values drops below this.
    pub ftol: f64,
}

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        assert_eq!(self.step.len(), n, "one step per coordinate");
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0, &mut evals);
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            if evals >= self.max_evals {
                break;
            }
            let mut x = x0.to_vec();
            x[i] += self.step[i];
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        if simplex.len() < n + 1 {
            let best = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            return Minimum {
                x: best.0,
                value: best.1,
                evals,
                converged: false,
            };
        }

        let mut converged = false;
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (fbest, fworst) = (simplex[0].1, simplex[n].1);
            if (fworst - fbest).abs() <= self.ftol {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                if evals >= self.max_evals {
                    simplex[n] = (xr, fr);
                    break;
                }
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                if evals >= self.max_evals {
                    break;
                }
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for p in simplex.iter_mut().skip(1) {
                        if evals >= self.max_evals {
                            break;
                        }
                        for (xj, bj) in p.0.iter_mut().zip(&best) {
                            *xj = bj + 0.5 * (*xj - bj);
                        }
                        p.1 = eval(&p.0, &mut evals);
                    }
                }
            }
        }
        let best = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        Minimum {
            x: best.0,
            value: best.1,
            evals,
            converged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[lo, hi]` for a unimodal `f`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> LineMinimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while (b - a).abs() > tol && iterations < max_iter {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    // the bracket ends themselves may be better when the minimum sits on a bound
    let (fa, fb) = (f(lo), f(hi));
    let (x, value) = [(x, value), (lo, fa), (hi, fb)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap();
    LineMinimum {
        x,
        value,
        iterations,
        converged: (b - a).abs() <= tol,
    }
}

/// Scans `n_grid` equally spaced points, then refines around the best one
/// by golden section. Guards against the multiple local minima a pure
/// golden-section search could lock onto.
pub fn scan_then_golden<F>(mut f: F, lo: f64, hi: f64, n_grid: usize, tol: f64, max_iter: usize) -> LineMinimum
where
    F: FnMut(f64) -> f64,
{
    let n = n_grid.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let (mut best_i, mut best_v) = (0, f64::INFINITY);
    for i in 0..n {
        let v = f(lo + h * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = lo + h * best_i.saturating_sub(1) as f64;
    let b = (lo + h * (best_i + 1) as f64).min(hi);
    let mut m = golden_section(&mut f, a, b, tol, max_iter);
    m.iterations += n;
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_rosenbrock() {
        let nm = NelderMead {
            max_evals: 5000,
            step: vec![0.5, 0.5],
            ftol: 1e-14,
        };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.evals <= 5000);
    }

    #[test]
    fn nelder_mead_respects_budget() {
        let nm = NelderMead {
            max_evals: 17,
            step: vec![1.0; 3],
            ftol: 0.0,
        };
        let mut count = 0;
        let m = nm.minimize(
            |x| {
                count += 1;
                x.iter().map(|v| v * v).sum()
            },
            &[3.0, -2.0, 1.0],
        );
        assert_eq!(count, m.evals);
        assert!(m.evals <= 17);
        assert!(!m.converged);
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let m = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-10, 200);
        assert!(m.converged);
        assert!((m.x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn golden_boundary_minimum() {
        let m = golden_section(|x| -x, 0.0, 1.0, 1e-10, 200);
        assert_eq!(m.x, 1.0);
    }

    #[test]
    fn scan_escapes_local_minimum() {
        // local minimum near 0.2, global near 0.8
        let f = |x: f64| (x - 0.2).powi(2) * (x - 0.8).powi(2) - 0.05 * x;
        let m = scan_then_golden(f, 0.0, 1.0, 21, 1e-10, 200);
        assert!(m.x > 0.7, "{}", m.x);
    }
}
