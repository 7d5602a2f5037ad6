//! Geometric constants of the event balls.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss-Legendre order used by [`gamma_r`]. The integrands are polynomials
/// in the substituted variables (d = 1) or trigonometric polynomials (d = 2),
/// so this order is far beyond what double precision can resolve.
const QUADRATURE_ORDER: usize = 48;

/// Volume of a ball of radius `radius` in dimension `dimension`.
pub fn v_r(radius: f64, dimension: usize) -> Result<f64> {
    check(radius, dimension)?;
    Ok(match dimension {
        1 => 2.0 * radius,
        _ => PI * radius * radius,
    })
}

/// `Γ_R = (1/V_R) ∫_{B(0,R)} ∫_{B(x,R)} z₁² dz dx`, by nested quadrature.
pub fn gamma_r(radius: f64, dimension: usize) -> Result<f64> {
    check(radius, dimension)?;
    let rule = GaussLegendre::new(QUADRATURE_ORDER);
    let integral = match dimension {
        1 => rule.integrate(-radius, radius, |x| {
            rule.integrate(x - radius, x + radius, |z| z * z)
        }),
        _ => ball_integral_2d(&rule, radius, [0.0, 0.0], |x| {
            ball_integral_2d(&rule, radius, x, |z| z[0] * z[0])
        }),
    };
    Ok(integral / v_r(radius, dimension)?)
}

fn check(radius: f64, dimension: usize) -> Result<()> {
    if !(1..=2).contains(&dimension) {
        return Err(Error::config(format!(
            "only dimensions 1 and 2 are supported, got {dimension}"
        )));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::config(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

/// `∫_{B(centre, R)} f` over a disc, with `z₁ = c₁ + R sin θ` to remove the
/// square-root endpoint singularity of the chord length.
fn ball_integral_2d<F: Fn([f64; 2]) -> f64>(
    rule: &GaussLegendre,
    radius: f64,
    centre: [f64; 2],
    f: F,
) -> f64 {
    rule.integrate(-0.5 * PI, 0.5 * PI, |theta| {
        let (s, c) = theta.sin_cos();
        let half_chord = radius * c;
        let z1 = centre[0] + radius * s;
        radius * c
            * rule.integrate(centre[1] - half_chord, centre[1] + half_chord, |z2| f([z1, z2]))
    })
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub(crate) struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub(crate) fn new(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (p, dp) = legendre(order, x);
                derivative = dp;
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(order, x);
            derivative = if dp != 0.0 { dp } else { derivative };
            let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub(crate) fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
