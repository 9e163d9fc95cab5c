//! Nelder–Mead downhill simplex minimisation with box-projected vertices.

/// Reflection, expansion, contraction and shrink coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub reflect: f64,
    pub expand: f64,
    pub contract: f64,
    pub shrink: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            reflect: 1.0,
            expand: 2.0,
            contract: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead<const N: usize> {
    pub coefficients: Coefficients,
    /// Stop once `max f - min f` over the simplex falls below this.
    pub f_tol: f64,
    pub max_iter: usize,
    pub lower: [f64; N],
    pub upper: [f64; N],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl<const N: usize> NelderMead<N> {
    pub fn new(f_tol: f64, max_iter: usize) -> Self {
        Self {
            coefficients: Coefficients::default(),
            f_tol,
            max_iter,
            lower: [f64::NEG_INFINITY; N],
            upper: [f64::INFINITY; N],
        }
    }

    pub fn with_bounds(mut self, lower: [f64; N], upper: [f64; N]) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    fn project(&self, mut x: [f64; N]) -> [f64; N] {
        for i in 0..N {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
        x
    }

    /// Minimises `f` from a simplex spanned by `x0` and `x0 + step_i e_i`.
    /// NaN objective values are treated as `+∞`.
    pub fn minimize<F>(&self, mut f: F, x0: [f64; N], step: [f64; N]) -> Minimum<N>
    where
        F: FnMut(&[f64; N]) -> f64,
    {
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64; N]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let c = self.coefficients;

        let x0 = self.project(x0);
        let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
        let f0 = eval(&x0);
        simplex.push((x0, f0));
        for i in 0..N {
            let mut x = x0;
            x[i] += step[i];
            let mut x = self.project(x);
            if x[i] == x0[i] {
                // Stepped into a bound: go the other way.
                x[i] = x0[i] - step[i];
                x = self.project(x);
            }
            let fx = eval(&x);
            simplex.push((x, fx));
        }

        let mut iterations = 0;
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[N].1;
            if worst - best < self.f_tol || (best == worst && best.is_finite()) {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            let mut centroid = [0.0; N];
            for (x, _) in &simplex[..N] {
                for i in 0..N {
                    centroid[i] += x[i];
                }
            }
            for v in &mut centroid {
                *v /= N as f64;
            }
            let along = |t: f64, from: &[f64; N]| {
                let mut out = [0.0; N];
                for i in 0..N {
                    out[i] = centroid[i] + t * (from[i] - centroid[i]);
                }
                self.project(out)
            };

            let xw = simplex[N].0;
            let xr = along(-c.reflect, &xw);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(-c.reflect * c.expand, &xw);
                let fe = eval(&xe);
                simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[N - 1].1 {
                simplex[N] = (xr, fr);
                continue;
            }
            let (xc, fc, accept) = if fr < simplex[N].1 {
                let xc = along(-c.reflect * c.contract, &xw);
                let fc = eval(&xc);
                (xc, fc, fc <= fr)
            } else {
                let xc = along(c.contract, &xw);
                let fc = eval(&xc);
                (xc, fc, fc < simplex[N].1)
            };
            if accept {
                simplex[N] = (xc, fc);
                continue;
            }
            let xb = simplex[0].0;
            for vertex in simplex.iter_mut().skip(1) {
                let mut x = [0.0; N];
                for i in 0..N {
                    x[i] = xb[i] + c.shrink * (vertex.0[i] - xb[i]);
                }
                let x = self.project(x);
                *vertex = (x, eval(&x));
            }
        }

        let (x, fx) = simplex[0];
        Minimum {
            x,
            f: fx,
            iterations,
            evaluations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead::<2>::new(1e-14, 5000);
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            [-1.2, 1.0],
            [0.5, 0.5],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        let nm = NelderMead::<2>::new(1e-12, 1000).with_bounds([0.5, -1.0], [2.0, 1.0]);
        let m = nm.minimize(|x| x[0] * x[0] + (x[1] - 3.0).powi(2), [1.0, 0.0], [0.3, 0.3]);
        assert!((m.x[0] - 0.5).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn nan_is_rejected() {
        let nm = NelderMead::<1>::new(1e-12, 500);
        let m = nm.minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.25).powi(2) },
            [1.0],
            [0.5],
        );
        assert!((m.x[0] - 0.25).abs() < 1e-5);
    }

    #[test]
    fn iteration_cap_reported() {
        let nm = NelderMead::<2>::new(0.0, 3);
        let m = nm.minimize(|x| x[0] * x[0] + x[1] * x[1], [5.0, 5.0], [1.0, 1.0]);
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }
}
