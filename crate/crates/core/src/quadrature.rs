//! Adaptive Gauss-Kronrod quadrature for vector-valued complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::C64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureResult {
    pub value: Vec<C64>,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<C64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn kronrod<F>(f: &mut F, a: f64, b: f64, dim: usize, evals: &mut usize) -> Result<Segment>
where
    F: FnMut(f64) -> Result<Vec<C64>>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut k = vec![C64::new(0.0, 0.0); dim];
    let mut g = vec![C64::new(0.0, 0.0); dim];
    let mut accumulate = |x: f64, wk: f64, wg: f64, k: &mut [C64], g: &mut [C64]| -> Result<()> {
        let v = f(x)?;
        *evals += 1;
        if v.len() != dim {
            return Err(Error::Quadrature(format!(
                "integrand returned {} components, expected {dim}",
                v.len()
            )));
        }
        for i in 0..dim {
            if !(v[i].re.is_finite() && v[i].im.is_finite()) {
                return Err(Error::Quadrature(format!("non-finite integrand at {x}")));
            }
            k[i] += v[i] * wk;
            g[i] += v[i] * wg;
        }
        Ok(())
    };
    accumulate(center, WGK[7], WG[3], &mut k, &mut g)?;
    for j in 0..7 {
        let dx = half * XGK[j];
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        accumulate(center - dx, WGK[j], wg, &mut k, &mut g)?;
        accumulate(center + dx, WGK[j], wg, &mut k, &mut g)?;
    }
    let diff: Vec<C64> = k.iter().zip(&g).map(|(a, b)| (a - b) * half).collect();
    let value: Vec<C64> = k.into_iter().map(|v| v * half).collect();
    Ok(Segment {
        a,
        b,
        value,
        error: norm(&diff),
    })
}

/// Integrates `f` over `[a, b]` with global adaptive bisection.
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    dim: usize,
    options: &QuadratureOptions,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<Vec<C64>>,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
    }
    let mut evals = 0;
    let first = kronrod(&mut f, a, b, dim, &mut evals)?;
    let mut total = first.value.clone();
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    loop {
        let target = options.abs_tol.max(options.rel_tol * norm(&total));
        if error <= target {
            break;
        }
        if heap.len() >= options.max_intervals {
            return Err(Error::Quadrature(format!(
                "{} intervals exhausted, error estimate {error:.3e} above target {target:.3e}",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature(format!(
                "interval [{}, {}] cannot be bisected",
                worst.a, worst.b
            )));
        }
        let left = kronrod(&mut f, worst.a, mid, dim, &mut evals)?;
        let right = kronrod(&mut f, mid, worst.b, dim, &mut evals)?;
        for i in 0..dim {
            total[i] += left.value[i] + right.value[i] - worst.value[i];
        }
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // re-sum to shed accumulated cancellation in the running total
    let mut value = vec![C64::new(0.0, 0.0); dim];
    let mut segments: Vec<Segment> = heap.into_vec();
    segments.sort_by(|p, q| p.a.total_cmp(&q.a));
    for s in &segments {
        for i in 0..dim {
            value[i] += s.value[i];
        }
    }
    let error = segments.iter().map(|s| s.error).sum();
    Ok(QuadratureResult {
        value,
        error,
        intervals: segments.len(),
        evaluations: evals,
    })
}

/// Integrates over `[0, ∞)` through `t = scale·u/(1−u)`.
pub fn integrate_semi_infinite<F>(
    mut f: F,
    scale: f64,
    dim: usize,
    options: &QuadratureOptions,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<Vec<C64>>,
{
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let mapped = |u: f64| -> Result<Vec<C64>> {
        let one_minus = 1.0 - u;
        let t = scale * u / one_minus;
        let jac = scale / (one_minus * one_minus);
        let mut v = f(t)?;
        for c in v.iter_mut() {
            *c *= jac;
        }
        Ok(v)
    };
    integrate(mapped, 0.0, 1.0, dim, options)
}
