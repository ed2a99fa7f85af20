//! Nelder-Mead minimization on the unit box `[0, 1]^d`. Trial points are
//! clamped onto the box.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Stop when `f_worst − f_best ≤ rel_tol · |f_best|`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
    pub max_evals: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-5,
            abs_tol: 1e-12,
            x_tol: 1e-9,
            max_evals: 1000,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Minimizes `f` from `start`. Every call of `f` counts against
/// `max_evals`.
pub fn minimize<F>(mut f: F, start: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let d = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    if d == 0 || opts.max_evals == 0 {
        let fx = if opts.max_evals > 0 {
            eval(start, &mut evals)
        } else {
            f64::INFINITY
        };
        return SimplexResult {
            x: start.to_vec(),
            f: fx,
            evals,
            converged: d == 0,
        };
    }

    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..d {
        if evals >= opts.max_evals {
            break;
        }
        let mut x = x0.clone();
        x[i] = if x0[i] + opts.initial_step <= 1.0 {
            x0[i] + opts.initial_step
        } else {
            x0[i] - opts.initial_step
        };
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    if simplex.len() < d + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, f) = simplex.swap_remove(0);
        return SimplexResult {
            x,
            f,
            evals,
            converged: false,
        };
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if worst - best <= opts.rel_tol * best.abs() + opts.abs_tol || diameter <= opts.x_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|(x, _)| x[i]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut x);
            x
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            if evals >= opts.max_evals {
                simplex[d] = (xr, fr);
                continue;
            }
            let xe = along(gamma);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        if evals >= opts.max_evals {
            if fr < simplex[d].1 {
                simplex[d] = (xr, fr);
            }
            continue;
        }
        let (xc, fc) = if fr < simplex[d].1 {
            let xc = along(rho * alpha);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[d].1.min(fr) {
            simplex[d] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let bx = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if evals >= opts.max_evals {
                break;
            }
            let mut x: Vec<f64> = bx
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            clamp(&mut x);
            let fx = eval(&x, &mut evals);
            *vertex = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    SimplexResult {
        x,
        f,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            |x| (x[0] - 0.3).powi(2) + 4.0 * (x[1] - 0.7).powi(2) + 1.0,
            &[0.9, 0.1],
            &SimplexOptions {
                rel_tol: 1e-14,
                ..Default::default()
            },
        );
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-5 && (r.x[1] - 0.7).abs() < 1e-5);
    }

    #[test]
    fn optimum_on_boundary() {
        let r = minimize(
            |x| (x[0] + 0.5).powi(2) + (x[1] - 0.5).powi(2),
            &[0.5, 0.5],
            &SimplexOptions {
                rel_tol: 1e-12,
                ..Default::default()
            },
        );
        assert!(r.x[0] < 1e-6);
        assert!((r.x[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn rosenbrock_in_box() {
        let r = minimize(
            |x| {
                let (a, b) = (2.0 * x[0], 2.0 * x[1]);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[0.1, 0.9],
            &SimplexOptions {
                rel_tol: 0.0,
                abs_tol: 1e-16,
                max_evals: 5000,
                ..Default::default()
            },
        );
        assert!((r.x[0] - 0.5).abs() < 1e-3 && (r.x[1] - 0.5).abs() < 1e-3, "{:?}", r);
    }

    #[test]
    fn budget_respected() {
        let mut calls = 0;
        let r = minimize(
            |x| {
                calls += 1;
                (x[0] - 0.3).powi(2) + (x[1] - 0.6).powi(2) + (x[2] - 0.45).powi(2)
            },
            &[0.5, 0.5, 0.5],
            &SimplexOptions {
                rel_tol: 0.0,
                abs_tol: 0.0,
                x_tol: 0.0,
                max_evals: 37,
                ..Default::default()
            },
        );
        assert_eq!(calls, r.evals);
        assert!(r.evals <= 37);
        assert!(!r.converged);
    }

    #[test]
    fn zero_dimensions() {
        let r = minimize(|_| 2.5, &[], &SimplexOptions::default());
        assert_eq!((r.f, r.evals, r.converged), (2.5, 1, true));
    }
}
