//! Gauss–Legendre rules, the spectral integration matrix built on them, and
//! an adaptive Gauss–Kronrod integrator for non-polynomial integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Values of P_0..=P_n at `x` via the Bonnet recurrence.
pub(crate) fn legendre_table(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(x);
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * x * out[j] - jf * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// An n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of P_n, found by Newton iteration from the
    /// Tricomi initial guesses; ascending order.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    dp = legendre_with_derivative(n, x).1;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let sum: f64 = self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum();
        half * sum
    }

    /// Matrix `M` with `(M f)_i = ∫_{-1}^{x_i} f(y) dy` for every polynomial
    /// `f` of degree below `n`, given its values at the nodes. Row-major.
    ///
    /// Built from the Legendre expansion of `f` and
    /// `∫_{-1}^x P_m = (P_{m+1}(x) - P_{m-1}(x)) / (2m + 1)`.
    pub fn integration_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let tables: Vec<Vec<f64>> = self.nodes.iter().map(|&x| legendre_table(n, x)).collect();
        // antiderivative values A[i][m] = ∫_{-1}^{x_i} P_m
        let mut anti = vec![0.0; n * n];
        for (i, p) in tables.iter().enumerate() {
            anti[i * n] = p[1] + 1.0;
            for m in 1..n {
                anti[i * n + m] = (p[m + 1] - p[m - 1]) / (2 * m + 1) as f64;
            }
        }
        // analysis B[m][q] = (2m+1)/2 · w_q · P_m(x_q)
        let mut analysis = vec![0.0; n * n];
        for (q, p) in tables.iter().enumerate() {
            for m in 0..n {
                analysis[m * n + q] = 0.5 * (2 * m + 1) as f64 * self.weights[q] * p[m];
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for m in 0..n {
                let a = anti[i * n + m];
                if a == 0.0 {
                    continue;
                }
                let brow = &analysis[m * n..(m + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// P_n(x) and P'_n(x).
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// QUADPACK G7-K15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &wk)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let s = f(center - half * x) + f(center + half * x);
        kronrod += wk * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
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
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive G7-K15 integration to an absolute tolerance.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_SEGMENTS: usize = 20_000;
    let (value, err) = kronrod15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total_err = err;
    while total_err > abs_tol {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Capacity {
                message: "adaptive quadrature did not reach tolerance".into(),
                p: heap.len(),
                achieved: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = kronrod15(&f, worst.a, mid);
        let (v2, e2) = kronrod15(&f, mid, worst.b);
        total_err += e1 + e2 - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, err: e2 });
        // re-sum occasionally to stop drift in the running error
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nodes_are_roots_and_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64, 257, 900] {
            let rule = GaussLegendre::new(n);
            let total: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
            for &x in rule.nodes() {
                let (p, d) = legendre_with_derivative(n, x);
                assert!((p / d).abs() < 1e-15, "n={n} x={x}");
            }
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let rule = GaussLegendre::new(10);
        // degree 19 is the limit
        let v = rule.integrate(0.0, 1.0, |x| x.powi(19));
        assert_abs_diff_eq!(v, 1.0 / 20.0, epsilon = 1e-15);
    }

    #[test]
    fn integration_matrix_reproduces_antiderivatives() {
        let rule = GaussLegendre::new(24);
        let m = rule.integration_matrix();
        let n = rule.len();
        let f: Vec<f64> = rule.nodes().iter().map(|x| 3.0 * x * x - x.powi(7)).collect();
        for i in 0..n {
            let x = rule.nodes()[i];
            let got: f64 = (0..n).map(|q| m[i * n + q] * f[q]).sum();
            let exact = (x.powi(3) - x.powi(8) / 8.0) - (-1.0 - 1.0 / 8.0);
            assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_oscillation_and_kinks() {
        let v = adaptive_integrate(|x: f64| (40.0 * x).sin() * x, 0.0, 2.0, 1e-12).unwrap();
        let exact = |x: f64| (40.0 * x).sin() / 1600.0 - x * (40.0 * x).cos() / 40.0;
        assert_abs_diff_eq!(v, exact(2.0) - exact(0.0), epsilon = 1e-12);
        let kink = adaptive_integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(kink, 0.5 * 0.09 + 0.5 * 0.49, epsilon = 1e-12);
    }
}
