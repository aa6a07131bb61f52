//! Composite Gauss-Legendre quadrature on an interval.

use std::sync::OnceLock;

const ORDER: usize = 8;
const INITIAL_PANELS: usize = 64;
const MAX_PANELS: usize = 1 << 16;

/// Nodes and weights of the `ORDER`-point rule on `[-1, 1]`.
fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// Newton iteration on the Legendre polynomial roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn composite(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = rule();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            acc += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * acc;
    }
    total
}

/// Integral of `f` over `[a, b]`, doubling the panel count from 64 until two
/// successive estimates agree to `rel_tol` (relative, with an absolute floor
/// of `rel_tol` scaled by the integral of `|f|`).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut panels = INITIAL_PANELS;
    let mut prev = composite(&f, a, b, panels);
    let scale = composite(&|t| f(t).abs(), a, b, panels).max(f64::MIN_POSITIVE);
    loop {
        panels *= 2;
        let next = composite(&f, a, b, panels);
        if (next - prev).abs() <= rel_tol * next.abs().max(scale * 1e-3) || panels >= MAX_PANELS {
            return next;
        }
        prev = next;
    }
}
