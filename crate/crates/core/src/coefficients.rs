//! Fourier coefficients of the simplex kernel
//!
//! ```text
//! K(t_1, …, t_k) = ψ_1(t_1) ⋯ ψ_k(t_k)  on  t_1 < … < t_k,  0 elsewhere
//! ```
//!
//! with respect to products of basis functions. Every coefficient is an
//! iterated integral
//!
//! ```text
//! C_{j_k…j_1} = ∫_t^T φ_{j_k}ψ_k ∫_t^{t_k} … ∫_t^{t_2} φ_{j_1}ψ_1 dt_1 … dt_k
//! ```
//!
//! and is computed by applying the weighted-primitive operator level by
//! level. Intermediate functions `C_{j_s…j_1}(τ)` are held as values at
//! Gauss–Legendre nodes and integrated with the Legendre-series integration
//! matrix, which is exact for polynomials below the node count. For the
//! Legendre system with polynomial weights every intermediate function is a
//! polynomial, so the recursion is exact up to rounding; trigonometric
//! members are entire and the node count is sized past their bandwidth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, IntegrationInterval, OrthonormalBasis, WeightFunction};
use crate::error::{domain, Error, Result};
use crate::quadrature::GaussLegendre;

/// Largest truncation stored densely for multiplicity `k`.
pub fn max_dense_truncation(k: usize) -> usize {
    match k {
        0 => 0,
        1 | 2 => 256,
        3 => 64,
        4 | 5 => 16,
        6 => 8,
        _ => 4,
    }
}

/// Residuals below this are reported as zero.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Basis indices `(j_1, …, j_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiDegree(pub Vec<usize>);

impl MultiDegree {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return domain("a multi-degree needs at least one index");
        }
        Ok(Self(indices))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    fn flat(&self, p: usize) -> usize {
        self.0.iter().fold(0, |acc, &j| acc * (p + 1) + j)
    }

    fn from_flat(mut idx: usize, k: usize, p: usize) -> Self {
        let mut out = vec![0; k];
        for slot in out.iter_mut().rev() {
            *slot = idx % (p + 1);
            idx /= p + 1;
        }
        Self(out)
    }
}

/// Dense tensor of coefficients for all `(j_1, …, j_k) ∈ {0..=p}^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    k: usize,
    p: usize,
    basis: OrthonormalBasis,
    weights: Vec<WeightFunction>,
    values: Vec<f64>,
    norm: f64,
}

impl CoefficientTable {
    /// Computes every coefficient up to truncation `p`.
    pub fn compute(basis: OrthonormalBasis, weights: Vec<WeightFunction>, p: usize) -> Result<Self> {
        let k = weights.len();
        validate_weights(&weights)?;
        check_capacity(k, p)?;
        let engine = NodalEngine::new(basis, &weights, p);
        let mut values = vec![0.0; (p + 1).pow(k as u32)];
        engine.fill(&mut values, None);
        let norm = parseval_norm(&weights, k, basis.interval)?;
        Ok(Self { k, p, basis, weights, values, norm })
    }

    /// Convenience constructor for `ψ_1 = … = ψ_k ≡ 1`.
    pub fn unit_weights(basis: OrthonormalBasis, k: usize, p: usize) -> Result<Self> {
        if k == 0 {
            return domain("multiplicity must be at least 1");
        }
        Self::compute(basis, vec![WeightFunction::ConstantOne; k], p)
    }

    /// Grows the table to truncation `p_new`, computing only the entries with
    /// some index above the current truncation.
    pub fn extend_to(&self, p_new: usize) -> Result<Self> {
        if p_new <= self.p {
            return Ok(self.clone());
        }
        check_capacity(self.k, p_new)?;
        let engine = NodalEngine::new(self.basis, &self.weights, p_new);
        let mut values = vec![0.0; (p_new + 1).pow(self.k as u32)];
        engine.fill(&mut values, Some(self.p));
        for (old_idx, &v) in self.values.iter().enumerate() {
            let md = MultiDegree::from_flat(old_idx, self.k, self.p);
            values[md.flat(p_new)] = v;
        }
        Ok(Self { p: p_new, values, ..self.clone() })
    }

    /// Rebuilds a table from stored values, e.g. after deserialization.
    pub fn from_parts(
        basis: OrthonormalBasis,
        weights: Vec<WeightFunction>,
        p: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        validate_weights(&weights)?;
        if values.len() != (p + 1).pow(k as u32) {
            return Err(Error::Contract(format!(
                "expected {} values for k = {k}, p = {p}, got {}",
                (p + 1).pow(k as u32),
                values.len()
            )));
        }
        let norm = parseval_norm(&weights, k, basis.interval)?;
        Ok(Self { k, p, basis, weights, values, norm })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[WeightFunction] {
        &self.weights
    }

    /// Values in row-major order with `j_1` most significant.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn parseval_norm(&self) -> f64 {
        self.norm
    }

    pub fn get(&self, j: &[usize]) -> Option<f64> {
        if j.len() != self.k || j.iter().any(|&x| x > self.p) {
            return None;
        }
        Some(self.values[j.iter().fold(0, |acc, &x| acc * (self.p + 1) + x)])
    }

    pub fn entries(&self) -> impl Iterator<Item = (MultiDegree, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (MultiDegree::from_flat(i, self.k, self.p), v))
    }

    /// `‖K‖² − Σ C²` over the full table.
    pub fn residual(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|c| c * c).sum();
        clamp_residual(self.norm - sum)
    }

    /// Residual of the sub-table truncated at `q ≤ p`.
    pub fn residual_at(&self, q: usize) -> Result<f64> {
        if q > self.p {
            return domain(format!("truncation {q} exceeds table truncation {}", self.p));
        }
        let shells = self.shell_sums();
        let captured: f64 = shells[..=q].iter().sum();
        Ok(clamp_residual(self.norm - captured))
    }

    /// `shell[m]` = Σ C² over entries whose largest index is exactly `m`.
    pub fn shell_sums(&self) -> Vec<f64> {
        let mut shells = vec![0.0; self.p + 1];
        for (i, &c) in self.values.iter().enumerate() {
            let mut idx = i;
            let mut top = 0;
            for _ in 0..self.k {
                top = top.max(idx % (self.p + 1));
                idx /= self.p + 1;
            }
            shells[top] += c * c;
        }
        shells
    }

    /// Sub-table truncated at `q ≤ p`, copying stored values.
    pub fn truncated(&self, q: usize) -> Result<Self> {
        if q > self.p {
            return domain(format!("truncation {q} exceeds table truncation {}", self.p));
        }
        let mut values = Vec::with_capacity((q + 1).pow(self.k as u32));
        for i in 0..(q + 1).pow(self.k as u32) {
            let md = MultiDegree::from_flat(i, self.k, q);
            values.push(self.values[md.flat(self.p)]);
        }
        Ok(Self { p: q, values, ..self.clone() })
    }
}

fn clamp_residual(r: f64) -> f64 {
    debug_assert!(r > -1e-10, "negative residual {r}");
    if r < RESIDUAL_FLOOR {
        0.0
    } else {
        r
    }
}

fn validate_weights(weights: &[WeightFunction]) -> Result<()> {
    if weights.is_empty() {
        return domain("multiplicity must be at least 1");
    }
    weights.iter().try_for_each(|w| w.validate())
}

fn check_capacity(k: usize, p: usize) -> Result<()> {
    let cap = max_dense_truncation(k);
    if p > cap {
        return Err(Error::Capacity {
            message: format!("dense table for k = {k} is limited to p <= {cap}"),
            p,
            achieved: f64::NAN,
        });
    }
    Ok(())
}

/// Single coefficient `C_{j_k…j_1}` for `jtuple = (j_1, …, j_k)`.
pub fn coefficient(basis: &OrthonormalBasis, weights: &[WeightFunction], jtuple: &MultiDegree) -> Result<f64> {
    validate_weights(weights)?;
    if weights.len() != jtuple.k() {
        return Err(Error::Contract(format!("{} weights for a {}-index coefficient", weights.len(), jtuple.k())));
    }
    let engine = NodalEngine::new(*basis, weights, jtuple.max());
    Ok(engine.single(&jtuple.0))
}

/// `∫_{[t,T]^k} K² = ∫_{simplex} ψ_1² ⋯ ψ_k²`.
pub fn parseval_norm(weights: &[WeightFunction], k: usize, interval: IntegrationInterval) -> Result<f64> {
    if k == 0 || weights.len() != k {
        return domain(format!("need k >= 1 weights, got k = {k} with {} weights", weights.len()));
    }
    let len = interval.length();
    if weights.iter().all(|w| w.is_constant_one()) {
        let factorial: f64 = (1..=k).map(|i| i as f64).product();
        return Ok(len.powi(k as i32) / factorial);
    }
    let squares: Vec<WeightFunction> = weights.iter().map(|w| w.squared()).collect();
    let degree: usize = squares.iter().map(|w| w.degree()).sum::<usize>() + k;
    let rule = GaussLegendre::new(degree + 2);
    let nodes = node_times(&rule, interval);
    let mut running = vec![1.0; rule.len()];
    if k > 1 {
        let m = rule.integration_matrix();
        for w in &squares[..k - 1] {
            let h: Vec<f64> = running.iter().zip(&nodes).map(|(g, &s)| g * w.eval(s)).collect();
            running = apply_primitive(&m, &h, 0.5 * len);
        }
    }
    let last = &squares[k - 1];
    let total: f64 = rule.weights().iter().zip(&nodes).zip(&running).map(|((w, &s), g)| w * last.eval(s) * g).sum();
    Ok(0.5 * len * total)
}

fn node_times(rule: &GaussLegendre, interval: IntegrationInterval) -> Vec<f64> {
    rule.nodes().iter().map(|&y| interval.from_reference(y)).collect()
}

fn apply_primitive(matrix: &[f64], h: &[f64], scale: f64) -> Vec<f64> {
    let n = h.len();
    matrix.chunks_exact(n).map(|row| scale * row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()).collect()
}

/// Number of Gauss nodes needed so every intermediate function is resolved.
fn node_count(kind: BasisKind, weights: &[WeightFunction], p: usize) -> usize {
    let k = weights.len();
    let wdeg: usize = weights.iter().map(|w| w.degree()).sum();
    match kind {
        BasisKind::Legendre => {
            // intermediate: (k-1)p + Σ_{l<k} deg ψ_l + k - 2 < n;
            // final: k p + Σ deg ψ + k - 1 ≤ 2n - 1
            let inner = (k - 1) * p + wdeg + k;
            let outer = (k * p + wdeg + k).div_ceil(2) + 1;
            inner.max(outer).max(2)
        }
        BasisKind::Trigonometric => {
            let r = p.div_ceil(2) as f64;
            let band = std::f64::consts::PI * r;
            let resolve = |b: f64| b + 10.0 * b.cbrt() + 24.0;
            let inner = resolve(band * (k - 1) as f64) + (wdeg + k) as f64;
            let outer = resolve(band * k as f64) / 2.0 + (wdeg + k) as f64;
            inner.max(outer).ceil() as usize
        }
    }
}

struct NodalEngine {
    k: usize,
    p: usize,
    half_len: f64,
    /// integration matrix on the reference interval, row-major n×n
    matrix: Vec<f64>,
    /// `phi_psi[s][j]` = φ_j(θ_i) ψ_{s+1}(θ_i) at each node, for levels below k
    phi_psi: Vec<Vec<Vec<f64>>>,
    /// `final_rows[j]` = (T−t)/2 · w_i φ_j(θ_i) ψ_k(θ_i)
    final_rows: Vec<Vec<f64>>,
}

impl NodalEngine {
    fn new(basis: OrthonormalBasis, weights: &[WeightFunction], p: usize) -> Self {
        let k = weights.len();
        let n = node_count(basis.kind, weights, p);
        let rule = GaussLegendre::new(n);
        let nodes = node_times(&rule, basis.interval);
        let phi: Vec<Vec<f64>> = {
            let per_node: Vec<Vec<f64>> = nodes.iter().map(|&s| basis.eval_all(p, s)).collect();
            (0..=p).map(|j| per_node.iter().map(|row| row[j]).collect()).collect()
        };
        let half_len = 0.5 * basis.interval.length();
        let psi_at = |w: &WeightFunction| nodes.iter().map(|&s| w.eval(s)).collect::<Vec<f64>>();
        let phi_psi = weights[..k - 1]
            .iter()
            .map(|w| {
                let psi = psi_at(w);
                phi.iter().map(|row| row.iter().zip(&psi).map(|(a, b)| a * b).collect()).collect()
            })
            .collect();
        let last = psi_at(&weights[k - 1]);
        let final_rows = phi
            .iter()
            .map(|row| row.iter().zip(&last).zip(rule.weights()).map(|((f, g), w)| half_len * w * f * g).collect())
            .collect();
        let matrix = if k > 1 { rule.integration_matrix() } else { Vec::new() };
        Self { k, p, half_len, matrix, phi_psi, final_rows }
    }

    fn n(&self) -> usize {
        self.final_rows[0].len()
    }

    fn primitive(&self, h: &[f64]) -> Vec<f64> {
        apply_primitive(&self.matrix, h, self.half_len)
    }

    fn single(&self, j: &[usize]) -> f64 {
        let mut g = vec![1.0; self.n()];
        for (s, &js) in j[..self.k - 1].iter().enumerate() {
            let h: Vec<f64> = self.phi_psi[s][js].iter().zip(&g).map(|(a, b)| a * b).collect();
            g = self.primitive(&h);
        }
        dot(&self.final_rows[j[self.k - 1]], &g)
    }

    /// Fills `out` (row-major, `j_1` most significant). With `skip_below =
    /// Some(q)`, entries whose indices are all ≤ q are left untouched.
    fn fill(&self, out: &mut [f64], skip_below: Option<usize>) {
        let ones = vec![1.0; self.n()];
        let block = (self.p + 1).pow(self.k as u32 - 1);
        out.par_chunks_mut(block).enumerate().for_each(|(j1, chunk)| {
            if self.k == 1 {
                let fresh = skip_below.is_none_or(|q| j1 > q);
                if fresh {
                    chunk[0] = dot(&self.final_rows[j1], &ones);
                }
                return;
            }
            let h: Vec<f64> = self.phi_psi[0][j1].iter().zip(&ones).map(|(a, b)| a * b).collect();
            let g = self.primitive(&h);
            let fresh = skip_below.is_none_or(|q| j1 > q);
            self.descend(1, &g, chunk, fresh, skip_below);
        });
    }

    fn descend(&self, level: usize, g: &[f64], out: &mut [f64], fresh: bool, skip: Option<usize>) {
        if level == self.k - 1 {
            for (jk, slot) in out.iter_mut().enumerate() {
                if fresh || skip.is_none_or(|q| jk > q) {
                    *slot = dot(&self.final_rows[jk], g);
                }
            }
            return;
        }
        let block = out.len() / (self.p + 1);
        for (js, chunk) in out.chunks_mut(block).enumerate() {
            let h: Vec<f64> = self.phi_psi[level][js].iter().zip(g).map(|(a, b)| a * b).collect();
            let next = self.primitive(&h);
            let fresh_here = fresh || skip.is_none_or(|q| js > q);
            self.descend(level + 1, &next, chunk, fresh_here, skip);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(kind: BasisKind) -> OrthonormalBasis {
        OrthonormalBasis::new(kind, IntegrationInterval::unit())
    }

    #[test]
    fn low_order_legendre_values() {
        let b = unit(BasisKind::Legendre);
        let one = |k| vec![WeightFunction::ConstantOne; k];
        let c = |j: Vec<usize>| coefficient(&b, &one(j.len()), &MultiDegree(j)).unwrap();
        assert_abs_diff_eq!(c(vec![0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c(vec![3]), 0.0, epsilon = 1e-15);
        let s = 1.0 / (2.0 * 3f64.sqrt());
        assert_abs_diff_eq!(c(vec![0, 1]), s, epsilon = 1e-15);
        assert_abs_diff_eq!(c(vec![1, 0]), -s, epsilon = 1e-15);
        assert_abs_diff_eq!(c(vec![0, 0, 0]), 1.0 / 6.0, epsilon = 1e-15);
        assert!(matches!(coefficient(&b, &[], &MultiDegree(vec![])), Err(Error::Domain(_))));
    }

    #[test]
    fn table_matches_single_coefficients() {
        for kind in [BasisKind::Legendre, BasisKind::Trigonometric] {
            let basis = OrthonormalBasis::new(kind, IntegrationInterval::new(0.2, 1.7).unwrap());
            let weights = vec![
                WeightFunction::polynomial(vec![1.0, 0.5]).unwrap(),
                WeightFunction::ConstantOne,
                WeightFunction::polynomial(vec![0.0, 0.0, 1.0]).unwrap(),
            ];
            let table = CoefficientTable::compute(basis, weights.clone(), 5).unwrap();
            for (md, v) in table.entries() {
                let single = coefficient(&basis, &weights, &md).unwrap();
                assert!((v - single).abs() < 1e-13, "{kind:?} {md:?}: {v} vs {single}");
            }
        }
    }

    /// Nested Gauss quadrature over the closed-form innermost primitive.
    fn nested_oracle(b: &OrthonormalBasis, w: &[WeightFunction], j: &[usize]) -> f64 {
        use crate::basis::weighted_primitive;
        let rule = GaussLegendre::new(160);
        let t = b.interval.start();
        let inner = |s: f64| weighted_primitive(b, j[0], &w[0], t, s).unwrap();
        let level2 = |s: f64| rule.integrate(t, s, |u| b.eval(j[1], u).unwrap() * w[1].eval(u) * inner(u));
        match j.len() {
            2 => rule.integrate(t, b.interval.end(), |s| b.eval(j[1], s).unwrap() * w[1].eval(s) * inner(s)),
            3 => rule.integrate(t, b.interval.end(), |s| b.eval(j[2], s).unwrap() * w[2].eval(s) * level2(s)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn engine_matches_nested_quadrature_oracle() {
        for kind in [BasisKind::Trigonometric, BasisKind::Legendre] {
            let b = OrthonormalBasis::new(kind, IntegrationInterval::new(-0.5, 1.5).unwrap());
            let w = vec![
                WeightFunction::polynomial(vec![1.0, -0.3, 0.2]).unwrap(),
                WeightFunction::polynomial(vec![0.0, 1.0]).unwrap(),
                WeightFunction::ConstantOne,
            ];
            let t2 = CoefficientTable::compute(b, w[..2].to_vec(), 64).unwrap();
            for j in [[0, 0], [1, 2], [63, 64], [64, 1], [17, 40], [2, 64]] {
                let oracle = nested_oracle(&b, &w, &j);
                let got = t2.get(&j).unwrap();
                assert!((got - oracle).abs() < 1e-12, "{kind:?} {j:?}: {got} vs {oracle}");
            }
            let t3 = CoefficientTable::compute(b, w.clone(), 24).unwrap();
            for j in [[0, 0, 0], [24, 23, 24], [3, 19, 7], [24, 0, 1]] {
                let oracle = nested_oracle(&b, &w, &j);
                let got = t3.get(&j).unwrap();
                assert!((got - oracle).abs() < 1e-12, "{kind:?} {j:?}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn parseval_examples() {
        let unit_iv = IntegrationInterval::unit();
        let one = WeightFunction::ConstantOne;
        assert_abs_diff_eq!(parseval_norm(&[one.clone(), one.clone()], 2, unit_iv).unwrap(), 0.5);
        assert_abs_diff_eq!(parseval_norm(&vec![one.clone(); 3], 3, unit_iv).unwrap(), 1.0 / 6.0, epsilon = 1e-16);
        let tau = WeightFunction::polynomial(vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(parseval_norm(std::slice::from_ref(&tau), 1, unit_iv).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // ∫∫_{s<u} s² u² = ∫ u² u³/3 = 1/18
        assert_abs_diff_eq!(parseval_norm(&[tau.clone(), tau], 2, unit_iv).unwrap(), 1.0 / 18.0, epsilon = 1e-15);
    }

    #[test]
    fn residual_examples() {
        let b = unit(BasisKind::Legendre);
        let t1 = CoefficientTable::unit_weights(b, 2, 1).unwrap();
        assert_abs_diff_eq!(t1.residual(), 1.0 / 12.0, epsilon = 1e-14);
        let t5 = CoefficientTable::unit_weights(b, 2, 5).unwrap();
        assert_abs_diff_eq!(t5.residual(), 1.0 / 44.0, epsilon = 1e-14);
        for p in [0, 3, 9] {
            assert_eq!(CoefficientTable::unit_weights(b, 1, p).unwrap().residual(), 0.0);
        }
    }

    #[test]
    fn extension_reuses_and_matches_fresh_table() {
        for kind in [BasisKind::Legendre, BasisKind::Trigonometric] {
            let b = unit(kind);
            let small = CoefficientTable::unit_weights(b, 3, 3).unwrap();
            let grown = small.extend_to(7).unwrap();
            let fresh = CoefficientTable::unit_weights(b, 3, 7).unwrap();
            for (a, c) in grown.values().iter().zip(fresh.values()) {
                assert!((a - c).abs() < 1e-14);
            }
            for (md, v) in small.entries() {
                assert_eq!(grown.get(&md.0), Some(v));
            }
            let back = grown.truncated(3).unwrap();
            assert_eq!(back.values(), small.values());
        }
    }

    #[test]
    fn residual_at_agrees_with_truncated_tables() {
        let b = unit(BasisKind::Trigonometric);
        let t = CoefficientTable::unit_weights(b, 2, 12).unwrap();
        for q in 0..=12 {
            let direct = t.truncated(q).unwrap().residual();
            assert_abs_diff_eq!(t.residual_at(q).unwrap(), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let b = unit(BasisKind::Legendre);
        assert!(matches!(CoefficientTable::unit_weights(b, 4, 17), Err(Error::Capacity { .. })));
    }
}
