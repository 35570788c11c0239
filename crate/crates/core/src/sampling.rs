//! Reproducible Gaussian inputs ζ_j^{(i)} of the expansion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{IntegrationInterval, OrthonormalBasis};
use crate::error::{Error, Result};

/// Master seed plus stream id; each pair names an independent ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// A fresh seed derived from this one, for an unrelated family of streams.
    pub fn derive(self, salt: u64) -> Self {
        let mut z = self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Self { seed: z ^ (z >> 31), stream: self.stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `ζ_j^{(i)}` for `i = 0..=m`, `j = 0..=p`. Row 0 is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaMatrix {
    p: usize,
    rows: Vec<Vec<f64>>,
}

impl ZetaMatrix {
    /// Builds a matrix from a time row and `m` random rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = match rows.first() {
            Some(r) if !r.is_empty() => r.len() - 1,
            _ => return Err(Error::Contract("zeta matrix needs a non-empty time row".into())),
        };
        if rows.iter().any(|r| r.len() != p + 1) {
            return Err(Error::Contract("zeta rows must share one length".into()));
        }
        Ok(Self { p, rows })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of Wiener components.
    pub fn m(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// `∫_t^T φ_j(s) ds` for `j = 0..=p`.
pub fn zeta_time_row(basis: &OrthonormalBasis, p: usize) -> Vec<f64> {
    (0..=p).map(|j| basis.integral(j)).collect()
}

/// Draws `ζ_j^{(i)}`, `i = 1..=m`, `j = 0..=p`, row by row from one stream.
pub fn draw_zeta(seed: SeedSpec, basis: &OrthonormalBasis, m: usize, p: usize) -> Result<ZetaMatrix> {
    if m == 0 {
        return Err(Error::Domain("need at least one Wiener component".into()));
    }
    let mut rng = seed.rng();
    let mut rows = Vec::with_capacity(m + 1);
    rows.push(zeta_time_row(basis, p));
    for _ in 0..m {
        rows.push((0..=p).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    Ok(ZetaMatrix { p, rows })
}

/// Warning text when a time component is used on an interval of length ≥ 1,
/// where the mean-square estimate is not asserted.
pub fn time_component_warning(interval: &IntegrationInterval, components: &[usize]) -> Option<String> {
    if components.contains(&0) && interval.length() >= 1.0 {
        let msg = format!(
            "component 0 used with T - t = {} >= 1; the mean-square error estimate is stated only for T - t < 1",
            interval.length()
        );
        log::warn!("{msg}");
        Some(msg)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;

    #[test]
    fn time_rows() {
        let leg = OrthonormalBasis::legendre(IntegrationInterval::unit());
        assert_eq!(zeta_time_row(&leg, 3), vec![1.0, 0.0, 0.0, 0.0]);
        let leg4 = OrthonormalBasis::legendre(IntegrationInterval::new(0.0, 4.0).unwrap());
        assert_eq!(zeta_time_row(&leg4, 1), vec![2.0, 0.0]);
        let trig = OrthonormalBasis::new(BasisKind::Trigonometric, IntegrationInterval::unit());
        assert_eq!(zeta_time_row(&trig, 2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn draws_are_reproducible_and_stream_separated() {
        let b = OrthonormalBasis::legendre(IntegrationInterval::unit());
        let a = draw_zeta(SeedSpec::new(7, 3), &b, 2, 5).unwrap();
        let again = draw_zeta(SeedSpec::new(7, 3), &b, 2, 5).unwrap();
        assert_eq!(a, again);
        let other = draw_zeta(SeedSpec::new(7, 4), &b, 2, 5).unwrap();
        assert_ne!(a.row(1), other.row(1));
        assert_eq!(a.m(), 2);
        assert_eq!(a.p(), 5);
        assert!(draw_zeta(SeedSpec::new(1, 1), &b, 0, 2).is_err());
    }

    #[test]
    fn warning_only_for_long_time_intervals() {
        let unit = IntegrationInterval::unit();
        assert!(time_component_warning(&unit, &[0, 1]).is_some());
        assert!(time_component_warning(&unit, &[1, 2]).is_none());
        let short = IntegrationInterval::new(0.0, 0.5).unwrap();
        assert!(time_component_warning(&short, &[0, 1]).is_none());
    }
}
