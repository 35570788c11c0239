//! Complete orthonormal systems on `[t, T]` and weighted primitives of their
//! members.
//!
//! Two systems are provided: shifted, normalised Legendre polynomials
//!
//! ```text
//! φ_j(θ) = sqrt((2j + 1) / (T - t)) · P_j(z(θ)),   z(θ) = (2θ - T - t) / (T - t)
//! ```
//!
//! and the trigonometric system `1`, `√2 sin(2πr(θ-t)/(T-t))` (odd `j = 2r-1`),
//! `√2 cos(2πr(θ-t)/(T-t))` (even `j = 2r`), all scaled by `1/sqrt(T-t)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{adaptive_integrate, legendre_table};

/// Maximum polynomial degree accepted for a weight function.
pub const MAX_WEIGHT_DEGREE: usize = 16;

/// The closed interval `[t, T]` of integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationInterval {
    t: f64,
    #[serde(rename = "T")]
    end: f64,
}

impl IntegrationInterval {
    pub fn new(t: f64, end: f64) -> Result<Self> {
        if !(t.is_finite() && end.is_finite()) || t >= end {
            return domain(format!("interval requires finite t < T, got [{t}, {end}]"));
        }
        Ok(Self { t, end })
    }

    /// `[0, 1]`.
    pub fn unit() -> Self {
        Self { t: 0.0, end: 1.0 }
    }

    pub fn start(&self) -> f64 {
        self.t
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.t
    }

    /// Affine map `[t, T] -> [-1, 1]`.
    pub fn to_reference(&self, theta: f64) -> f64 {
        ((theta - self.t) * 2.0 / self.length() - 1.0).clamp(-1.0, 1.0)
    }

    /// Affine map `[-1, 1] -> [t, T]`.
    pub fn from_reference(&self, y: f64) -> f64 {
        0.5 * self.length() * y + 0.5 * (self.end + self.t)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.t && theta <= self.end
    }

    pub(crate) fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            domain(format!("{theta} lies outside [{}, {}]", self.t, self.end))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Legendre,
    #[serde(alias = "trig")]
    Trigonometric,
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisKind::Legendre => f.write_str("legendre"),
            BasisKind::Trigonometric => f.write_str("trigonometric"),
        }
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legendre" => Ok(BasisKind::Legendre),
            "trig" | "trigonometric" => Ok(BasisKind::Trigonometric),
            other => Err(Error::Domain(format!("unknown basis '{other}'"))),
        }
    }
}

/// One of the two supported complete orthonormal systems on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    pub kind: BasisKind,
    pub interval: IntegrationInterval,
}

impl OrthonormalBasis {
    pub fn new(kind: BasisKind, interval: IntegrationInterval) -> Self {
        Self { kind, interval }
    }

    pub fn legendre(interval: IntegrationInterval) -> Self {
        Self::new(BasisKind::Legendre, interval)
    }

    pub fn trigonometric(interval: IntegrationInterval) -> Self {
        Self::new(BasisKind::Trigonometric, interval)
    }

    /// `φ_j(θ)`, rejecting `θ` outside the interval.
    pub fn eval(&self, j: usize, theta: f64) -> Result<f64> {
        self.interval.check(theta)?;
        Ok(self.eval_unchecked(j, theta))
    }

    pub(crate) fn eval_unchecked(&self, j: usize, theta: f64) -> f64 {
        let len = self.interval.length();
        match self.kind {
            BasisKind::Legendre => {
                let z = self.interval.to_reference(theta);
                ((2 * j + 1) as f64 / len).sqrt() * legendre_unchecked(j, z)
            }
            BasisKind::Trigonometric => {
                if j == 0 {
                    return 1.0 / len.sqrt();
                }
                let r = j.div_ceil(2) as f64;
                let arg = 2.0 * PI * r * (theta - self.interval.start()) / len;
                let scale = (2.0 / len).sqrt();
                if j % 2 == 1 {
                    scale * arg.sin()
                } else {
                    scale * arg.cos()
                }
            }
        }
    }

    /// `φ_0(θ), …, φ_p(θ)` in one pass.
    pub fn eval_all(&self, p: usize, theta: f64) -> Vec<f64> {
        let len = self.interval.length();
        match self.kind {
            BasisKind::Legendre => {
                let z = self.interval.to_reference(theta);
                legendre_table(p, z)
                    .into_iter()
                    .enumerate()
                    .map(|(j, pj)| ((2 * j + 1) as f64 / len).sqrt() * pj)
                    .collect()
            }
            BasisKind::Trigonometric => (0..=p).map(|j| self.eval_unchecked(j, theta)).collect(),
        }
    }

    /// `∫_t^T φ_j(s) ds`.
    pub fn integral(&self, j: usize) -> f64 {
        if j == 0 {
            self.interval.length().sqrt()
        } else {
            0.0
        }
    }
}

/// `P_j(x)` for `x ∈ [-1, 1]`.
pub fn legendre_eval(j: usize, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return domain(format!("Legendre argument {x} outside [-1, 1]"));
    }
    Ok(legendre_unchecked(j, x))
}

pub(crate) fn legendre_unchecked(j: usize, x: f64) -> f64 {
    if x == 1.0 {
        return 1.0;
    }
    if x == -1.0 {
        return if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    }
    let (mut p0, mut p1) = (1.0, x);
    if j == 0 {
        return p0;
    }
    for n in 1..j {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P'_j(x)` for `x` in the open interval, from `(1 - x²) P'_j = j (P_{j-1} - x P_j)`.
pub fn legendre_derivative(j: usize, x: f64) -> Result<f64> {
    if !(-1.0 < x && x < 1.0) {
        return domain(format!("derivative formula needs |x| < 1, got {x}"));
    }
    if j == 0 {
        return Ok(0.0);
    }
    let p = legendre_table(j, x);
    Ok(j as f64 * (p[j - 1] - x * p[j]) / (1.0 - x * x))
}

/// A nonrandom weight `ψ(τ)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    #[default]
    ConstantOne,
    /// Monomial coefficients in `τ`, lowest degree first.
    Polynomial { coefficients: Vec<f64> },
}

impl WeightFunction {
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        let w = WeightFunction::Polynomial { coefficients };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if let WeightFunction::Polynomial { coefficients } = self {
            if coefficients.is_empty() {
                return domain("polynomial weight needs at least one coefficient");
            }
            if coefficients.len() > MAX_WEIGHT_DEGREE + 1 {
                return domain(format!("weight degree {} exceeds {MAX_WEIGHT_DEGREE}", coefficients.len() - 1));
            }
            if coefficients.iter().any(|c| !c.is_finite()) {
                return domain("weight coefficients must be finite");
            }
        }
        Ok(())
    }

    pub fn is_constant_one(&self) -> bool {
        match self {
            WeightFunction::ConstantOne => true,
            WeightFunction::Polynomial { coefficients } => {
                coefficients.first() == Some(&1.0) && coefficients[1..].iter().all(|&c| c == 0.0)
            }
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            WeightFunction::ConstantOne => vec![1.0],
            WeightFunction::Polynomial { coefficients } => coefficients.clone(),
        }
    }

    /// Degree after trimming trailing zeros; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        let c = self.coefficients();
        c.iter().rposition(|&x| x != 0.0).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients().iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            WeightFunction::ConstantOne => 1.0,
            WeightFunction::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, &c| acc * tau + c),
        }
    }

    pub fn derivative(&self) -> WeightFunction {
        let c = self.coefficients();
        let d: Vec<f64> =
            if c.len() <= 1 { vec![0.0] } else { c.iter().enumerate().skip(1).map(|(i, &x)| i as f64 * x).collect() };
        WeightFunction::Polynomial { coefficients: d }
    }

    /// `ψ(τ)²` as a polynomial.
    pub(crate) fn squared(&self) -> WeightFunction {
        if let WeightFunction::ConstantOne = self {
            return WeightFunction::ConstantOne;
        }
        let c = self.coefficients();
        let mut out = vec![0.0; 2 * c.len() - 1];
        for (i, a) in c.iter().enumerate() {
            for (j, b) in c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        WeightFunction::Polynomial { coefficients: out }
    }

    fn antiderivative_eval(&self, tau: f64) -> f64 {
        self.coefficients().iter().enumerate().rev().fold(0.0, |acc, (i, &c)| acc * tau + c / (i + 1) as f64) * tau
    }
}

/// `∫_v^x φ_j(θ) ψ(θ) dθ` for `t ≤ v ≤ x ≤ T`, in closed form.
///
/// Legendre: repeated integration by parts with
/// `(2j+1) P_j = P'_{j+1} - P'_{j-1}`; terminates because `ψ` is polynomial.
/// Trigonometric: the sine/cosine integration-by-parts chain.
pub fn weighted_primitive(basis: &OrthonormalBasis, j: usize, psi: &WeightFunction, v: f64, x: f64) -> Result<f64> {
    psi.validate()?;
    check_limits(basis, v, x)?;
    if v == x {
        return Ok(0.0);
    }
    Ok(match basis.kind {
        BasisKind::Legendre => legendre_primitive(basis, j, psi, v, x),
        BasisKind::Trigonometric => trig_primitive(basis, j, psi, v, x),
    })
}

/// `∫_v^x φ_j(θ) f(θ) dθ` for an arbitrary integrand weight, by adaptive
/// Gauss–Kronrod quadrature to absolute tolerance `tol`.
pub fn weighted_primitive_fn<F: Fn(f64) -> f64>(
    basis: &OrthonormalBasis,
    j: usize,
    f: F,
    v: f64,
    x: f64,
    tol: f64,
) -> Result<f64> {
    check_limits(basis, v, x)?;
    if v == x {
        return Ok(0.0);
    }
    adaptive_integrate(|s| basis.eval_unchecked(j, s) * f(s), v, x, tol)
}

fn check_limits(basis: &OrthonormalBasis, v: f64, x: f64) -> Result<()> {
    basis.interval.check(v)?;
    basis.interval.check(x)?;
    if v > x {
        return domain(format!("lower limit {v} exceeds upper limit {x}"));
    }
    Ok(())
}

fn legendre_primitive(basis: &OrthonormalBasis, j: usize, psi: &WeightFunction, v: f64, x: f64) -> f64 {
    let iv = basis.interval;
    let half = 0.5 * iv.length();
    let (a, b) = (iv.to_reference(v), iv.to_reference(x));
    let deg = psi.degree();
    let top = j + deg + 2;
    let pa = legendre_table(top, a);
    let pb = legendre_table(top, b);

    // derivs[d] = d-th derivative of y -> ψ(u(y)), as a function of θ
    let mut derivs = vec![psi.clone()];
    for _ in 0..deg {
        let next = derivs.last().unwrap().derivative();
        derivs.push(next);
    }

    // q[i] = P_{i+1} - P_{i-1} (with P_{-1} := 0) evaluated at an endpoint
    let antideriv = |p: &[f64], i: usize| {
        if i == 0 {
            p[1]
        } else {
            (p[i + 1] - p[i - 1]) / (2 * i + 1) as f64
        }
    };

    // level[d][i] = ∫_a^b P_i(y) g^{(d)}(y) dy for i in 0..=j+d
    let mut upper: Vec<f64> = Vec::new();
    for d in (0..=deg).rev() {
        let scale = half.powi(d as i32);
        let gb = scale * derivs[d].eval(x);
        let ga = scale * derivs[d].eval(v);
        let width = j + d;
        let mut level = vec![0.0; width + 1];
        for (i, slot) in level.iter_mut().enumerate() {
            let boundary = antideriv(&pb, i) * gb - antideriv(&pa, i) * ga;
            let inner = if d == deg {
                0.0
            } else if i == 0 {
                upper[1]
            } else {
                (upper[i + 1] - upper[i - 1]) / (2 * i + 1) as f64
            };
            *slot = boundary - inner;
        }
        upper = level;
    }
    (iv.length()).sqrt() * ((2 * j + 1) as f64).sqrt() / 2.0 * upper[j]
}

fn trig_primitive(basis: &OrthonormalBasis, j: usize, psi: &WeightFunction, v: f64, x: f64) -> f64 {
    let len = basis.interval.length();
    let t = basis.interval.start();
    if j == 0 {
        return (psi.antiderivative_eval(x) - psi.antiderivative_eval(v)) / len.sqrt();
    }
    let r = j.div_ceil(2) as f64;
    let omega = 2.0 * PI * r / len;
    let (sx, cx) = (omega * (x - t)).sin_cos();
    let (sv, cv) = (omega * (v - t)).sin_cos();

    // ∫ sin(ωs) h = -[cos h]/ω + ∫ cos h' / ω ;  ∫ cos(ωs) h = [sin h]/ω - ∫ sin h' / ω
    fn chain(
        sine: bool,
        h: &WeightFunction,
        omega: f64,
        (x, sx, cx): (f64, f64, f64),
        (v, sv, cv): (f64, f64, f64),
    ) -> f64 {
        if h.is_zero() {
            return 0.0;
        }
        let hd = h.derivative();
        if sine {
            -(cx * h.eval(x) - cv * h.eval(v)) / omega + chain(false, &hd, omega, (x, sx, cx), (v, sv, cv)) / omega
        } else {
            (sx * h.eval(x) - sv * h.eval(v)) / omega - chain(true, &hd, omega, (x, sx, cx), (v, sv, cv)) / omega
        }
    }

    (2.0 / len).sqrt() * chain(j % 2 == 1, psi, omega, (x, sx, cx), (v, sv, cv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use approx::assert_abs_diff_eq;

    fn unit_legendre() -> OrthonormalBasis {
        OrthonormalBasis::legendre(IntegrationInterval::unit())
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre_eval(0, 0.37).unwrap(), 1.0);
        assert_abs_diff_eq!(legendre_eval(2, 0.5).unwrap(), -0.125, epsilon = 1e-16);
        assert_eq!(legendre_eval(5, 1.0).unwrap(), 1.0);
        assert_eq!(legendre_eval(7, -1.0).unwrap(), -1.0);
        assert!(matches!(legendre_eval(1, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn basis_values() {
        let unit = IntegrationInterval::unit();
        assert_abs_diff_eq!(unit_legendre().eval(0, 0.7).unwrap(), 1.0);
        let trig = OrthonormalBasis::trigonometric(unit);
        assert_abs_diff_eq!(trig.eval(0, 0.3).unwrap(), 1.0);
        assert_eq!(trig.eval(1, 0.0).unwrap(), 0.0);
        assert!(matches!(trig.eval(1, 1.2), Err(Error::Domain(_))));
        assert!(IntegrationInterval::new(1.0, 1.0).is_err());
    }

    #[test]
    fn eval_all_matches_pointwise() {
        let iv = IntegrationInterval::new(0.5, 2.0).unwrap();
        for basis in [OrthonormalBasis::legendre(iv), OrthonormalBasis::trigonometric(iv)] {
            let all = basis.eval_all(12, 1.3);
            for (j, v) in all.iter().enumerate() {
                assert_abs_diff_eq!(*v, basis.eval(j, 1.3).unwrap(), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let iv = IntegrationInterval::new(-0.4, 1.1).unwrap();
        let rule = GaussLegendre::new(160);
        for basis in [OrthonormalBasis::legendre(iv), OrthonormalBasis::trigonometric(iv)] {
            for i in 0..=30 {
                for j in 0..=30 {
                    let g = rule
                        .integrate(iv.start(), iv.end(), |s| basis.eval_unchecked(i, s) * basis.eval_unchecked(j, s));
                    let delta = if i == j { 1.0 } else { 0.0 };
                    assert!((g - delta).abs() <= 1e-10, "{:?} ({i},{j}) -> {g}", basis.kind);
                }
            }
        }
    }

    #[test]
    fn derivative_identity() {
        for j in 1..=20 {
            for step in 1..40 {
                let x = -1.0 + step as f64 / 20.0;
                let lhs = legendre_derivative(j + 1, x).unwrap() - legendre_derivative(j - 1, x).unwrap();
                let rhs = (2 * j + 1) as f64 * legendre_eval(j, x).unwrap();
                assert!((lhs - rhs).abs() <= 1e-9, "j={j} x={x}");
            }
        }
    }

    #[test]
    fn primitive_examples() {
        let b = unit_legendre();
        let one = WeightFunction::ConstantOne;
        assert_abs_diff_eq!(weighted_primitive(&b, 0, &one, 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(weighted_primitive(&b, 3, &one, 0.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        // independent adaptive quadrature oracle at 1e-12
        let oracle = adaptive_integrate(|s| b.eval_unchecked(2, s), 0.0, 0.5, 1e-12).unwrap();
        let got = weighted_primitive(&b, 2, &one, 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        assert!(matches!(weighted_primitive(&b, 1, &one, 0.6, 0.2), Err(Error::Domain(_))));
        assert_eq!(weighted_primitive(&b, 4, &one, 0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_match_quadrature_for_polynomial_weights() {
        let iv = IntegrationInterval::new(0.25, 1.75).unwrap();
        let psi = WeightFunction::polynomial(vec![0.3, -1.2, 0.5, 2.0]).unwrap();
        for basis in [OrthonormalBasis::legendre(iv), OrthonormalBasis::trigonometric(iv)] {
            for j in [0, 1, 2, 5, 9, 20] {
                for (v, x) in [(0.25, 1.75), (0.4, 1.1), (1.0, 1.7)] {
                    let exact = weighted_primitive(&basis, j, &psi, v, x).unwrap();
                    let quad = weighted_primitive_fn(&basis, j, |s| psi.eval(s), v, x, 1e-13).unwrap();
                    assert!((exact - quad).abs() < 1e-11, "{:?} j={j} [{v},{x}]", basis.kind);
                }
            }
        }
    }

    #[test]
    fn primitives_decay_like_inverse_j() {
        let iv = IntegrationInterval::unit();
        let psi = WeightFunction::polynomial(vec![1.0, -0.5, 0.25, 1.0]).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for basis in [OrthonormalBasis::legendre(iv), OrthonormalBasis::trigonometric(iv)] {
            let scaled = |j: usize| {
                let mut worst: f64 = 0.0;
                for (a, &v) in grid.iter().enumerate() {
                    for &x in &grid[a..] {
                        let w = weighted_primitive(&basis, j, &psi, v, x).unwrap();
                        worst = worst.max(w * w * (j * j) as f64);
                    }
                }
                worst
            };
            let early = (1..=20).map(scaled).fold(0.0, f64::max);
            let late = (180..=200).map(scaled).fold(0.0, f64::max);
            assert!(late <= 2.0 * early, "{:?}: {late} vs {early}", basis.kind);
        }
    }

    #[test]
    fn weight_helpers() {
        let w = WeightFunction::polynomial(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.eval(2.0), 17.0);
        assert_eq!(w.derivative().coefficients(), vec![2.0, 6.0]);
        assert_eq!(w.squared().eval(2.0), 289.0);
        assert!(WeightFunction::polynomial(vec![0.0; 18]).is_err());
        assert!(WeightFunction::polynomial(vec![1.0, 0.0]).unwrap().is_constant_one());
    }
}
