//! Exact Legendre coefficients for k ≤ 3 with polynomial weights.
//!
//! In the reference variable `z ∈ [-1, 1]` the coefficient factors as
//!
//! ```text
//! C_{j_k…j_1} = C̄ · sqrt(Π(2j_l + 1)) / 2^k · (T − t)^{k/2}
//! C̄ = ∫_{-1}^1 P_{j_k} ψ̃_k ∫_{-1}^{z_k} … ∫_{-1}^{z_2} P_{j_1} ψ̃_1 dz_1 … dz_k
//! ```
//!
//! where `ψ̃_l(z) = ψ_l(u(z))`. `C̄` is rational whenever the weights, `t`
//! and `T` are (every finite `f64` is), so it is computed with big rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, IntegrationInterval, OrthonormalBasis, WeightFunction};
use crate::coefficients::MultiDegree;
use crate::error::{Error, Result};

/// Dense polynomial with rational monomial coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<BigRational>);

impl Poly {
    fn constant(c: BigRational) -> Self {
        Poly(vec![c])
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![BigRational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn add_scaled(&mut self, other: &Poly, s: &BigRational) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), BigRational::zero());
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b * s;
        }
    }

    fn eval(&self, x: &BigRational) -> BigRational {
        self.0.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c)
    }

    /// `F(z) = ∫_{-1}^z self`.
    fn primitive_from_minus_one(&self) -> Poly {
        let mut out = vec![BigRational::zero(); self.0.len() + 1];
        for (i, c) in self.0.iter().enumerate() {
            out[i + 1] = c / BigRational::from_integer(BigInt::from(i + 1));
        }
        let mut f = Poly(out);
        let at = f.eval(&-BigRational::one());
        f.0[0] -= at;
        f
    }

    fn integral_over_reference(&self) -> BigRational {
        self.primitive_from_minus_one().eval(&BigRational::one())
    }
}

/// Legendre polynomials P_0..=P_n in monomial form.
fn legendre_polys(n: usize) -> Vec<Poly> {
    let int = |v: i64| BigRational::from_integer(BigInt::from(v));
    let mut out = vec![Poly::constant(int(1))];
    if n == 0 {
        return out;
    }
    out.push(Poly(vec![int(0), int(1)]));
    for j in 1..n {
        // (j+1) P_{j+1} = (2j+1) z P_j − j P_{j−1}
        let mut shifted = vec![int(0)];
        shifted.extend(out[j].0.iter().cloned());
        let mut next = Poly(shifted);
        for c in next.0.iter_mut() {
            *c *= int(2 * j as i64 + 1);
        }
        next.add_scaled(&out[j - 1], &int(-(j as i64)));
        let d = int(j as i64 + 1);
        for c in next.0.iter_mut() {
            *c /= d.clone();
        }
        out.push(next);
    }
    out
}

fn exact(x: f64, what: &str) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Unsupported(format!("{what} {x} is not finite")))
}

/// `ψ(u(z))` with `u(z) = (T−t)/2 · z + (T+t)/2`, exactly.
fn weight_in_reference(w: &WeightFunction, interval: &IntegrationInterval) -> Result<Poly> {
    let t = exact(interval.start(), "interval start")?;
    let big_t = exact(interval.end(), "interval end")?;
    let two = BigRational::from_integer(BigInt::from(2));
    let u = Poly(vec![(&big_t + &t) / &two, (&big_t - &t) / &two]);
    let mut acc = Poly::constant(BigRational::zero());
    for c in w.coefficients().iter().rev() {
        acc = acc.mul(&u);
        acc.0[0] += exact(*c, "weight coefficient")?;
    }
    Ok(acc)
}

/// Exact coefficient in the factored form above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalCoefficient {
    pub jtuple: MultiDegree,
    /// Reduced rational `C̄`, serialized as `"num/den"`.
    #[serde(with = "ratio_string")]
    pub bar: BigRational,
    /// Exponent of `(T − t)`.
    pub scale_exp: f64,
    /// `Π (2j_l + 1)`.
    pub radicand: u64,
}

impl RationalCoefficient {
    pub fn k(&self) -> usize {
        self.jtuple.k()
    }

    pub fn to_f64(&self, interval: &IntegrationInterval) -> f64 {
        let bar = self.bar.to_f64().unwrap_or(f64::NAN);
        bar * (self.radicand as f64).sqrt() / 2f64.powi(self.k() as i32) * interval.length().powf(self.scale_exp)
    }

    pub fn ratio_string(&self) -> String {
        format!("{}/{}", self.bar.numer(), self.bar.denom())
    }
}

mod ratio_string {
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_ratio(&text).ok_or_else(|| D::Error::custom(format!("bad rational {text:?}")))
    }
}

/// Parses `"num/den"` or a bare integer.
pub fn parse_ratio(text: &str) -> Option<BigRational> {
    let (n, d) = match text.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (text.trim().parse::<BigInt>().ok()?, BigInt::one()),
    };
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

fn check_supported(basis: &OrthonormalBasis, k: usize) -> Result<()> {
    if basis.kind != BasisKind::Legendre {
        return Err(Error::Unsupported("exact coefficients exist only for the Legendre basis".into()));
    }
    if k == 0 || k > 3 {
        return Err(Error::Unsupported(format!("exact coefficients need 1 <= k <= 3, got {k}")));
    }
    Ok(())
}

fn radicand(j: &[usize]) -> u64 {
    j.iter().map(|&x| 2 * x as u64 + 1).product()
}

/// Exact `C̄` for a single multi-degree.
pub fn exact_coefficient_rational(
    basis: &OrthonormalBasis,
    jtuple: &MultiDegree,
    weights: &[WeightFunction],
) -> Result<RationalCoefficient> {
    let k = jtuple.k();
    check_supported(basis, k)?;
    if weights.len() != k {
        return Err(Error::Contract(format!("{} weights for a {k}-index coefficient", weights.len())));
    }
    let legendre = legendre_polys(jtuple.max());
    let mut g = Poly::constant(BigRational::one());
    for (s, (&j, w)) in jtuple.0.iter().zip(weights).enumerate() {
        let h = legendre[j].mul(&weight_in_reference(w, &basis.interval)?).mul(&g);
        if s + 1 == k {
            return Ok(RationalCoefficient {
                jtuple: jtuple.clone(),
                bar: h.integral_over_reference(),
                scale_exp: k as f64 / 2.0,
                radicand: radicand(&jtuple.0),
            });
        }
        g = h.primitive_from_minus_one();
    }
    unreachable!("k >= 1 was checked")
}

/// Every exact coefficient up to truncation `p`, in table order (`j_1` most
/// significant). Inner primitives are shared across entries.
pub fn exact_table_rational(
    basis: &OrthonormalBasis,
    weights: &[WeightFunction],
    p: usize,
) -> Result<Vec<RationalCoefficient>> {
    let k = weights.len();
    check_supported(basis, k)?;
    let legendre = legendre_polys(p);
    let psi: Vec<Poly> = weights.iter().map(|w| weight_in_reference(w, &basis.interval)).collect::<Result<_>>()?;
    let scaled: Vec<Vec<Poly>> = psi.iter().map(|w| legendre.iter().map(|l| l.mul(w)).collect()).collect();
    let mut out = Vec::with_capacity((p + 1).pow(k as u32));
    let mut prefix = Vec::with_capacity(k);
    collect(&scaled, &Poly::constant(BigRational::one()), &mut prefix, &mut out);
    Ok(out)
}

fn collect(scaled: &[Vec<Poly>], g: &Poly, prefix: &mut Vec<usize>, out: &mut Vec<RationalCoefficient>) {
    let level = prefix.len();
    let k = scaled.len();
    for (j, f) in scaled[level].iter().enumerate() {
        prefix.push(j);
        let h = f.mul(g);
        if level + 1 == k {
            out.push(RationalCoefficient {
                jtuple: MultiDegree(prefix.clone()),
                bar: h.integral_over_reference(),
                scale_exp: k as f64 / 2.0,
                radicand: radicand(prefix),
            });
        } else {
            collect(scaled, &h.primitive_from_minus_one(), prefix, out);
        }
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{coefficient, CoefficientTable};

    fn legendre_unit() -> OrthonormalBasis {
        OrthonormalBasis::legendre(IntegrationInterval::unit())
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn documented_values() {
        let b = legendre_unit();
        let one = vec![WeightFunction::ConstantOne; 3];
        let c000 = exact_coefficient_rational(&b, &MultiDegree(vec![0, 0, 0]), &one).unwrap();
        assert_eq!(c000.bar, r(4, 3));
        assert!((c000.to_f64(&b.interval) - 1.0 / 6.0).abs() < 1e-16);
        let c00 = exact_coefficient_rational(&b, &MultiDegree(vec![0, 0]), &one[..2]).unwrap();
        assert_eq!(c00.bar, r(2, 1));
        assert_eq!(c00.ratio_string(), "2/1");
    }

    #[test]
    fn reversal_parity() {
        // (x, y, z) -> (-z, -y, -x) maps the simplex to itself
        let b = legendre_unit();
        let one = vec![WeightFunction::ConstantOne; 3];
        let table = exact_table_rational(&b, &one, 9).unwrap();
        for entry in &table {
            let j = &entry.jtuple.0;
            let rev = (j[2] * 100) + j[1] * 10 + j[0];
            let mirrored = &table[rev];
            let sign = if j.iter().sum::<usize>() % 2 == 0 { 1 } else { -1 };
            assert_eq!(mirrored.bar, &entry.bar * BigRational::from_integer(BigInt::from(sign)));
            if sign < 0 && j[0] == j[2] {
                assert!(entry.bar.is_zero(), "{j:?}");
            }
        }
    }

    #[test]
    fn agrees_with_floating_tables() {
        let b = OrthonormalBasis::legendre(IntegrationInterval::new(0.25, 2.0).unwrap());
        let weights = [
            WeightFunction::polynomial(vec![0.5, -1.0, 0.25]).unwrap(),
            WeightFunction::ConstantOne,
            WeightFunction::polynomial(vec![0.0, 1.0]).unwrap(),
        ];
        for k in 1..=3 {
            let w = &weights[..k];
            let exact = exact_table_rational(&b, w, 8).unwrap();
            let table = CoefficientTable::compute(b, w.to_vec(), 8).unwrap();
            for (e, v) in exact.iter().zip(table.values()) {
                assert!((e.to_f64(&b.interval) - v).abs() <= 1e-12, "{:?}", e.jtuple);
            }
            let single = exact_coefficient_rational(&b, &exact[7].jtuple, w).unwrap();
            assert_eq!(single, exact[7]);
            let direct = coefficient(&b, w, &exact[7].jtuple).unwrap();
            assert!((single.to_f64(&b.interval) - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn unsupported_inputs() {
        let trig = OrthonormalBasis::trigonometric(IntegrationInterval::unit());
        let one = vec![WeightFunction::ConstantOne; 4];
        assert!(matches!(exact_table_rational(&trig, &one[..2], 2), Err(Error::Unsupported(_))));
        assert!(matches!(exact_table_rational(&legendre_unit(), &one, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn serde_round_trip() {
        let b = legendre_unit();
        let c = exact_coefficient_rational(
            &b,
            &MultiDegree(vec![0, 1]),
            &[WeightFunction::ConstantOne, WeightFunction::ConstantOne],
        )
        .unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"2/3\""), "{text}");
        let back: RationalCoefficient = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(parse_ratio("-6/4"), Some(r(-3, 2)));
        assert_eq!(parse_ratio("1/0"), None);
    }
}
