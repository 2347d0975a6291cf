/// Smooth objective for [`bfgs`].
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-Newton minimization with an inverse-Hessian BFGS update and an
/// Armijo backtracking line search.
///
/// Stops when the objective drops below `f_target`, the largest gradient
/// component drops below `grad_tol`, the line search stalls, or after
/// `max_iter` iterations. `converged` is true for the first two.
pub fn bfgs<O: Objective + ?Sized>(obj: &mut O, x0: &[f64], max_iter: usize, grad_tol: f64, f_target: f64) -> BfgsOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>, scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    reset(&mut h, 1.0);
    let mut scaled = false;
    let mut flat_steps = 0;

    for it in 0..max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if f <= f_target || gmax < grad_tol {
            return BfgsOutcome {
                x,
                f,
                iterations: it,
                converged: true,
            };
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            reset(&mut h, 1.0);
            scaled = false;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            let ft = obj.value(&xt);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some((xt, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            return BfgsOutcome {
                x,
                f,
                iterations: it + 1,
                converged: false,
            };
        };

        let g_new = obj.gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if !scaled {
                reset(&mut h, sy / dot(&y, &y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }

        if (f - f_new).abs() <= 1e-15 * f.abs().max(1e-300) {
            flat_steps += 1;
        } else {
            flat_steps = 0;
        }
        x = x_new;
        f = f_new;
        g = g_new;
        if flat_steps >= 5 {
            return BfgsOutcome {
                x,
                f,
                iterations: it + 1,
                converged: false,
            };
        }
    }
    BfgsOutcome {
        x,
        f,
        iterations: max_iter,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&mut self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }

        fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let out = bfgs(&mut Rosenbrock, &[-1.2, 1.0], 500, 1e-10, 0.0);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    struct Quadratic(Vec<f64>);

    impl Objective for Quadratic {
        fn value(&mut self, x: &[f64]) -> f64 {
            x.iter().zip(&self.0).map(|(v, w)| w * v * v).sum()
        }

        fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
            x.iter().zip(&self.0).map(|(v, w)| 2.0 * w * v).collect()
        }
    }

    #[test]
    fn stops_at_target_value() {
        let out = bfgs(&mut Quadratic(vec![1.0, 10.0, 100.0]), &[1.0, 1.0, 1.0], 100, 0.0, 1e-6);
        assert!(out.converged && out.f <= 1e-6);
    }
}
