//! Explicit Runge–Kutta stepping for complex-valued linear ODE systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dormand–Prince 5(4) with embedded error control.
    AdaptiveRk,
    /// Classical fourth-order Runge–Kutta with step `max_step`.
    FixedRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step (adaptive) or the step itself (RK4), seconds.
    pub max_step: f64,
    /// Step budget per evolution, accepted and rejected steps combined.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::AdaptiveRk,
            rtol: 1e-8,
            atol: 1e-10,
            max_step: 1e-7,
            max_steps: 20_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_rk4(step: f64) -> Self {
        IntegratorConfig {
            method: Method::FixedRk4,
            max_step: step,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::invalid("integrator tolerances must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("step budget must be positive"));
        }
        Ok(())
    }
}

pub(crate) trait System {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]);

    /// Hook applied to every accepted state.
    fn accept(&mut self, _y: &mut [C64]) {}
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

pub(crate) struct Stepper {
    cfg: IntegratorConfig,
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    y_new: Vec<C64>,
    /// Step size carried across intervals of the same evolution.
    h: Option<f64>,
    pub stats: StepStats,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Stepper {
    pub fn new(cfg: IntegratorConfig, len: usize) -> Self {
        Stepper {
            cfg,
            k: vec![vec![C64::new(0.0, 0.0); len]; 7],
            tmp: vec![C64::new(0.0, 0.0); len],
            y_new: vec![C64::new(0.0, 0.0); len],
            h: None,
            stats: StepStats::default(),
        }
    }

    pub fn integrate<S: System>(&mut self, sys: &mut S, y: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        match self.cfg.method {
            Method::FixedRk4 => self.rk4(sys, y, t0, t1),
            Method::AdaptiveRk => self.dopri(sys, y, t0, t1),
        }
    }

    fn combine(&mut self, y: &[C64], h: f64, terms: &[(usize, f64)]) {
        for (i, out) in self.tmp.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(s, w) in terms {
                acc += self.k[s][i] * w;
            }
            *out = y[i] + acc * h;
        }
    }

    fn eval<S: System>(&mut self, sys: &mut S, t: f64, stage: usize) {
        let (tmp, k) = (&self.tmp, &mut self.k[stage]);
        sys.rhs(t, tmp, k);
        self.stats.rhs_evaluations += 1;
    }

    fn rk4<S: System>(&mut self, sys: &mut S, y: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let n_steps = ((t1 - t0) / self.cfg.max_step).ceil().max(1.0) as usize;
        if self.stats.accepted + n_steps > self.cfg.max_steps {
            return Err(Error::Integrator(format!(
                "fixed step needs {n_steps} steps, budget {}",
                self.cfg.max_steps
            )));
        }
        let h = (t1 - t0) / n_steps as f64;
        for step in 0..n_steps {
            let t = t0 + step as f64 * h;
            self.tmp.copy_from_slice(y);
            self.eval(sys, t, 0);
            self.combine(y, h, &[(0, 0.5)]);
            self.eval(sys, t + 0.5 * h, 1);
            self.combine(y, h, &[(1, 0.5)]);
            self.eval(sys, t + 0.5 * h, 2);
            self.combine(y, h, &[(2, 1.0)]);
            self.eval(sys, t + h, 3);
            for (i, v) in y.iter_mut().enumerate() {
                *v += (self.k[0][i] + (self.k[1][i] + self.k[2][i]) * 2.0 + self.k[3][i]) * (h / 6.0);
            }
            sys.accept(y);
            self.stats.accepted += 1;
        }
        Ok(())
    }

    fn error_norm(&self, y: &[C64], h: f64) -> f64 {
        let (rtol, atol) = (self.cfg.rtol, self.cfg.atol);
        let mut s = 0.0;
        for i in 0..y.len() {
            let mut e = C64::new(0.0, 0.0);
            for (stage, w) in [(0, E1), (2, E3), (3, E4), (4, E5), (5, E6), (6, E7)] {
                e += self.k[stage][i] * w;
            }
            let scale = atol + rtol * y[i].norm().max(self.y_new[i].norm());
            s += (e * h).norm_sqr() / (scale * scale);
        }
        (s / y.len() as f64).sqrt()
    }

    fn dopri<S: System>(&mut self, sys: &mut S, y: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let span = t1 - t0;
        let mut t = t0;
        self.tmp.copy_from_slice(y);
        self.eval(sys, t, 0);
        let mut h = self.h.unwrap_or_else(|| {
            // Initial guess from the size of the derivative.
            let ny = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            let nf = self.k[0].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if nf > 0.0 {
                0.01 * ny / nf
            } else {
                span
            }
        });
        h = h.min(self.cfg.max_step).min(span);

        while t < t1 {
            if self.stats.accepted + self.stats.rejected >= self.cfg.max_steps {
                return Err(Error::Integrator(format!(
                    "step budget {} exhausted at t = {t:.6e} s",
                    self.cfg.max_steps
                )));
            }
            let last = t + h >= t1 - 1e-12 * span;
            if last {
                h = t1 - t;
            }
            self.combine(y, h, &[(0, A21)]);
            self.eval(sys, t + C2 * h, 1);
            self.combine(y, h, &[(0, A31), (1, A32)]);
            self.eval(sys, t + C3 * h, 2);
            self.combine(y, h, &[(0, A41), (1, A42), (2, A43)]);
            self.eval(sys, t + C4 * h, 3);
            self.combine(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            self.eval(sys, t + C5 * h, 4);
            self.combine(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            self.eval(sys, t + h, 5);
            self.combine(y, h, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
            self.y_new.copy_from_slice(&self.tmp);
            self.eval(sys, t + h, 6);
            let err = self.error_norm(y, h);
            if !err.is_finite() {
                return Err(Error::Integrator(format!("non-finite error estimate at t = {t:.6e} s")));
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.y_new);
                sys.accept(y);
                // First-same-as-last: the final stage is the next first stage.
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = Some((h * factor).min(self.cfg.max_step));
                if !last {
                    h = (h * factor).min(self.cfg.max_step);
                }
            } else {
                self.stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * span.max(1e-300) {
                    return Err(Error::Integrator(format!("step size underflow at t = {t:.6e} s")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y' = iωy, exact solution e^{iωt}.
    struct Rotation(f64);

    impl System for Rotation {
        fn rhs(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
            for (o, v) in dy.iter_mut().zip(y) {
                *o = C64::new(0.0, self.0) * v;
            }
        }
    }

    #[test]
    fn adaptive_matches_exact_rotation() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let cfg = IntegratorConfig {
            max_step: 1.0,
            ..Default::default()
        };
        let mut st = Stepper::new(cfg, 1);
        st.integrate(&mut Rotation(3.0), &mut y, 0.0, 2.0).unwrap();
        let exact = C64::from_polar(1.0, 6.0);
        assert!((y[0] - exact).norm() < 1e-7, "{:?}", y[0]);
        assert!(st.stats.accepted > 5);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let err = |h: f64| {
            let mut y = vec![C64::new(1.0, 0.0)];
            let mut st = Stepper::new(IntegratorConfig::fixed_rk4(h), 1);
            st.integrate(&mut Rotation(1.0), &mut y, 0.0, 1.0).unwrap();
            (y[0] - C64::from_polar(1.0, 1.0)).norm()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn step_budget_is_enforced() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            max_step: 1e-3,
            ..Default::default()
        };
        let mut st = Stepper::new(cfg, 1);
        let mut y = vec![C64::new(1.0, 0.0)];
        assert!(st.integrate(&mut Rotation(1.0), &mut y, 0.0, 1.0).is_err());
    }
}
