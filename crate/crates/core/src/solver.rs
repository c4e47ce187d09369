//! BFGS with a strong-Wolfe line search, specialised to three parameters.

use alloc::vec::Vec;

pub type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop once `‖∇f‖∞` falls below this.
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_steps: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            gradient_tolerance: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_steps: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsReport {
    pub x: Vec3,
    pub value: f64,
    pub gradient: Vec3,
    pub iterations: usize,
    /// Gradient tolerance reached.
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

#[inline]
fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn axpy(x: &Vec3, alpha: f64, p: &Vec3) -> Vec3 {
    [x[0] + alpha * p[0], x[1] + alpha * p[1], x[2] + alpha * p[2]]
}

fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

fn identity(scale: f64) -> Mat3 {
    [[scale, 0.0, 0.0], [0.0, scale, 0.0], [0.0, 0.0, scale]]
}

fn inf_norm(v: &Vec3) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Minimizes `objective`, which returns the value and gradient at a point.
pub fn minimize_bfgs<F>(mut objective: F, x0: Vec3, options: &BfgsOptions) -> BfgsReport
where
    F: FnMut(&Vec3) -> (f64, Vec3),
{
    let (mut f, mut g) = objective(&x0);
    let mut x = x0;
    let mut h = identity(1.0);
    let mut first_step = true;
    let mut history = Vec::with_capacity(options.max_iterations + 1);
    history.push(f);
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < options.gradient_tolerance;

    while !converged && iterations < options.max_iterations {
        let mut p = mat_vec(&h, &g).map(|v| -v);
        if dot(&p, &g) >= 0.0 {
            h = identity(1.0);
            p = g.map(|v| -v);
        }
        let Some(step) = line_search(&mut objective, &x, f, &g, &p, options) else {
            break;
        };
        iterations += 1;
        let s = [step.alpha * p[0], step.alpha * p[1], step.alpha * p[2]];
        let y = [step.g[0] - g[0], step.g[1] - g[1], step.g[2] - g[2]];
        x = step.x;
        f = step.f;
        g = step.g;
        history.push(f);
        converged = inf_norm(&g) < options.gradient_tolerance;

        let sy = dot(&s, &y);
        if sy > 1e-16 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) && sy > 0.0 {
            if first_step {
                h = identity(sy / dot(&y, &y));
                first_step = false;
            }
            h = bfgs_update(&h, &s, &y, 1.0 / sy);
        }
    }

    BfgsReport {
        x,
        value: f,
        gradient: g,
        iterations,
        converged,
        history,
    }
}

// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
fn bfgs_update(h: &Mat3, s: &Vec3, y: &Vec3, rho: f64) -> Mat3 {
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let mut out = *h;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
    out
}

struct Step {
    alpha: f64,
    x: Vec3,
    f: f64,
    g: Vec3,
}

// Strong-Wolfe bracketing and zoom. Only ever returns a point with f below f0.
fn line_search<F>(objective: &mut F, x: &Vec3, f0: f64, g0: &Vec3, p: &Vec3, options: &BfgsOptions) -> Option<Step>
where
    F: FnMut(&Vec3) -> (f64, Vec3),
{
    let d0 = dot(g0, p);
    if !(d0 < 0.0) {
        return None;
    }
    let eval = |objective: &mut F, alpha: f64| {
        let xa = axpy(x, alpha, p);
        let (f, g) = objective(&xa);
        Step { alpha, x: xa, f, g }
    };
    let armijo = |s: &Step| s.f <= f0 + options.c1 * s.alpha * d0;
    let curvature = |s: &Step| dot(&s.g, p).abs() <= -options.c2 * d0;

    let mut prev = Step {
        alpha: 0.0,
        x: *x,
        f: f0,
        g: *g0,
    };
    let mut alpha = 1.0;
    let mut steps = 0;
    while steps < options.max_line_search_steps {
        steps += 1;
        let cur = eval(objective, alpha);
        if !cur.f.is_finite() || !armijo(&cur) || (prev.alpha > 0.0 && cur.f >= prev.f) {
            return zoom(objective, &eval, prev, cur, f0, d0, p, options, steps);
        }
        if curvature(&cur) {
            return accept(cur, f0);
        }
        if dot(&cur.g, p) >= 0.0 {
            return zoom(objective, &eval, cur, prev, f0, d0, p, options, steps);
        }
        prev = cur;
        alpha *= 2.0;
    }
    accept(prev, f0)
}

fn accept(step: Step, f0: f64) -> Option<Step> {
    (step.alpha > 0.0 && step.f < f0).then_some(step)
}

#[allow(clippy::too_many_arguments)]
fn zoom<F, E>(
    objective: &mut F,
    eval: &E,
    mut lo: Step,
    mut hi: Step,
    f0: f64,
    d0: f64,
    p: &Vec3,
    options: &BfgsOptions,
    mut steps: usize,
) -> Option<Step>
where
    F: FnMut(&Vec3) -> (f64, Vec3),
    E: Fn(&mut F, f64) -> Step,
{
    while steps < options.max_line_search_steps {
        steps += 1;
        let (a_lo, a_hi) = (lo.alpha, hi.alpha);
        let width = a_hi - a_lo;
        if width.abs() < 1e-16 * a_lo.abs().max(1.0) {
            break;
        }
        // minimizer of the quadratic through f(lo), f'(lo), f(hi); bisect if it lands near an end
        let d_lo = dot(&lo.g, p);
        let denom = 2.0 * (hi.f - lo.f - d_lo * width);
        let mut alpha = if denom > 0.0 && hi.f.is_finite() {
            a_lo - d_lo * width * width / denom
        } else {
            a_lo + 0.5 * width
        };
        let (left, right) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
        let margin = 0.1 * (right - left);
        if !(alpha > left + margin && alpha < right - margin) {
            alpha = a_lo + 0.5 * width;
        }
        let cur = eval(objective, alpha);
        if !cur.f.is_finite() || cur.f > f0 + options.c1 * alpha * d0 || cur.f >= lo.f {
            hi = cur;
        } else {
            let dc = dot(&cur.g, p);
            if dc.abs() <= -options.c2 * d0 {
                return accept(cur, f0);
            }
            if dc * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    accept(lo, f0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_anisotropic_quadratic() {
        let target = [1.0, -2.0, 0.5];
        let w = [1.0, 100.0, 0.01];
        let report = minimize_bfgs(
            |x| {
                let d = [x[0] - target[0], x[1] - target[1], x[2] - target[2]];
                let f = 0.5 * (w[0] * d[0] * d[0] + w[1] * d[1] * d[1] + w[2] * d[2] * d[2]);
                (f, [w[0] * d[0], w[1] * d[1], w[2] * d[2]])
            },
            [0.0; 3],
            &BfgsOptions::default(),
        );
        assert!(report.converged, "{report:?}");
        for i in 0..3 {
            assert!((report.x[i] - target[i]).abs() < 1e-6);
        }
        assert!(report.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn solves_rosenbrock_slice() {
        // Rosenbrock in (x0, x1) plus a decoupled quadratic in x2
        let report = minimize_bfgs(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2) + x[2] * x[2];
                let g = [
                    -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                    200.0 * (b - a * a),
                    2.0 * x[2],
                ];
                (f, g)
            },
            [-1.2, 1.0, 3.0],
            &BfgsOptions {
                max_iterations: 200,
                ..BfgsOptions::default()
            },
        );
        assert!((report.x[0] - 1.0).abs() < 1e-5 && (report.x[1] - 1.0).abs() < 1e-5);
        assert!(report.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stationary_start_does_nothing() {
        let report = minimize_bfgs(|x| (dot(x, x), x.map(|v| 2.0 * v)), [0.0; 3], &BfgsOptions::default());
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.x, [0.0; 3]);
    }
}
