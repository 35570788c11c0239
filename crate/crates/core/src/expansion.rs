//! Truncated expansion of `J[ψ^{(k)}]` with its pairing corrections
//!
//! ```text
//! J^p = Σ_{j ≤ p} C_{j_k…j_1} ( Π_l ζ_{j_l}^{(i_l)}
//!         + Σ_{r=1}^{⌊k/2⌋} (−1)^r Σ_{partitions} Π_pairs 1{i_a = i_b ≠ 0} 1{j_a = j_b} Π_free ζ )
//! ```
//!
//! plus direct evaluation of the low-order Legendre formulas.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::basis::{IntegrationInterval, OrthonormalBasis, WeightFunction};
use crate::coefficients::CoefficientTable;
use crate::error::{domain, Error, Result};
use crate::rational::exact_table_rational;
use crate::sampling::ZetaMatrix;

/// Component tuple `(i_1, …, i_k)`; 0 is the time component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentIndex {
    indices: Vec<usize>,
    m: usize,
}

impl ComponentIndex {
    pub fn new(indices: Vec<usize>, m: usize) -> Result<Self> {
        if indices.is_empty() {
            return domain("component tuple needs at least one entry");
        }
        if let Some(&bad) = indices.iter().find(|&&i| i > m) {
            return domain(format!("component {bad} exceeds m = {m}"));
        }
        Ok(Self { indices, m })
    }

    /// Uses the largest entry (at least 1) as `m`.
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        let m = indices.iter().copied().max().unwrap_or(0).max(1);
        Self::new(indices, m)
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn pairwise_distinct(&self) -> bool {
        let k = self.indices.len();
        (0..k).all(|a| (a + 1..k).all(|b| self.indices[a] != self.indices[b]))
    }

    pub fn has_time_component(&self) -> bool {
        self.indices.contains(&0)
    }
}

impl fmt::Display for ComponentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// `r` disjoint unordered pairs of positions plus the ordered free positions.
/// Positions are 0-based (`0..k`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairPartition {
    pub pairs: Vec<(usize, usize)>,
    pub free: Vec<usize>,
}

type PartitionCache = Mutex<HashMap<(usize, usize), Arc<Vec<PairPartition>>>>;

fn partition_cache() -> &'static PartitionCache {
    static CACHE: OnceLock<PartitionCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// All ways to pick `r` disjoint pairs from `k` positions, in lexicographic
/// order of the sorted pair list. Cached per `(k, r)`.
pub fn enumerate_pair_partitions(k: usize, r: usize) -> Result<Arc<Vec<PairPartition>>> {
    if r == 0 || 2 * r > k {
        return domain(format!("need 1 <= r <= k/2, got k = {k}, r = {r}"));
    }
    let mut cache = partition_cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(hit) = cache.get(&(k, r)) {
        return Ok(hit.clone());
    }
    let mut out = Vec::new();
    let mut used = vec![false; k];
    let mut pairs = Vec::with_capacity(r);
    build_partitions(k, r, 0, &mut used, &mut pairs, &mut out);
    let out = Arc::new(out);
    cache.insert((k, r), out.clone());
    Ok(out)
}

fn build_partitions(
    k: usize,
    r: usize,
    start: usize,
    used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
    out: &mut Vec<PairPartition>,
) {
    if pairs.len() == r {
        let free = (0..k).filter(|&l| !used[l]).collect();
        out.push(PairPartition { pairs: pairs.clone(), free });
        return;
    }
    for a in start..k {
        if used[a] {
            continue;
        }
        used[a] = true;
        for b in a + 1..k {
            if used[b] {
                continue;
            }
            used[b] = true;
            pairs.push((a, b));
            build_partitions(k, r, a + 1, used, pairs, out);
            pairs.pop();
            used[b] = false;
        }
        used[a] = false;
    }
}

/// `C(k, 2r) · (2r − 1)!!`.
pub fn pair_partition_count(k: usize, r: usize) -> u128 {
    if 2 * r > k {
        return 0;
    }
    let mut binom: u128 = 1;
    for i in 0..(2 * r) as u128 {
        binom = binom * (k as u128 - i) / (i + 1);
    }
    let double_fact: u128 = (1..=r as u128).map(|s| 2 * s - 1).product();
    binom * double_fact
}

/// Correction term with its sign, restricted to pairings whose components match.
struct Correction {
    sign: f64,
    pairs: Vec<(usize, usize)>,
    free: Vec<usize>,
}

fn active_corrections(icomp: &[usize]) -> Result<Vec<Correction>> {
    let k = icomp.len();
    let mut out = Vec::new();
    for r in 1..=k / 2 {
        let sign = if r % 2 == 1 { -1.0 } else { 1.0 };
        for part in enumerate_pair_partitions(k, r)?.iter() {
            if part.pairs.iter().all(|&(a, b)| icomp[a] == icomp[b] && icomp[a] != 0) {
                out.push(Correction { sign, pairs: part.pairs.clone(), free: part.free.clone() });
            }
        }
    }
    Ok(out)
}

/// Evaluates the truncated expansion at the given ζ.
pub fn evaluate_expansion(table: &CoefficientTable, icomp: &ComponentIndex, zeta: &ZetaMatrix) -> Result<f64> {
    let k = table.k();
    if k != icomp.k() {
        return Err(Error::Contract(format!("table multiplicity {k} does not match {} components", icomp.k())));
    }
    if let Some(&bad) = icomp.indices().iter().find(|&&i| i > zeta.m()) {
        return domain(format!("component {bad} exceeds the {} sampled components", zeta.m()));
    }
    let p = table.p();
    if zeta.p() < p {
        return Err(Error::Contract(format!("zeta truncation {} below table truncation {p}", zeta.p())));
    }
    let rows: Vec<&[f64]> = icomp.indices().iter().map(|&i| &zeta.row(i)[..=p]).collect();
    let corrections = active_corrections(icomp.indices())?;
    let mut j = vec![0usize; k];
    let mut total = 0.0;
    for &c in table.values() {
        if c != 0.0 {
            let mut term: f64 = (0..k).map(|l| rows[l][j[l]]).product();
            for corr in &corrections {
                if corr.pairs.iter().all(|&(a, b)| j[a] == j[b]) {
                    term += corr.sign * corr.free.iter().map(|&l| rows[l][j[l]]).product::<f64>();
                }
            }
            total += c * term;
        }
        // odometer with j_k fastest, matching table order
        for l in (0..k).rev() {
            j[l] += 1;
            if j[l] <= p {
                break;
            }
            j[l] = 0;
        }
    }
    Ok(total)
}

/// Low-order integrals with displayed Legendre closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LowOrderCase {
    J1,
    J01,
    J10,
    J11,
    J111,
}

impl LowOrderCase {
    pub const ALL: [LowOrderCase; 5] =
        [LowOrderCase::J1, LowOrderCase::J01, LowOrderCase::J10, LowOrderCase::J11, LowOrderCase::J111];

    /// Multiplicity of the integral.
    pub fn k(self) -> usize {
        match self {
            LowOrderCase::J1 => 1,
            LowOrderCase::J01 | LowOrderCase::J10 | LowOrderCase::J11 => 2,
            LowOrderCase::J111 => 3,
        }
    }

    /// Full component tuple for the expansion given the Wiener components.
    pub fn expansion_components(self, icomp: &[usize]) -> Vec<usize> {
        match self {
            LowOrderCase::J01 => vec![0, icomp[0]],
            LowOrderCase::J10 => vec![icomp[0], 0],
            _ => icomp.to_vec(),
        }
    }

    fn wiener_components(self) -> usize {
        match self {
            LowOrderCase::J1 | LowOrderCase::J01 | LowOrderCase::J10 => 1,
            LowOrderCase::J11 => 2,
            LowOrderCase::J111 => 3,
        }
    }
}

impl FromStr for LowOrderCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "J1" => Ok(LowOrderCase::J1),
            "J01" => Ok(LowOrderCase::J01),
            "J10" => Ok(LowOrderCase::J10),
            "J11" => Ok(LowOrderCase::J11),
            "J111" => Ok(LowOrderCase::J111),
            other => domain(format!("no closed form named {other:?}")),
        }
    }
}

/// `C̄_{j_3 j_2 j_1}` (ψ ≡ 1) as doubles, cached per truncation.
fn triple_bar(q: usize) -> Result<Arc<Vec<f64>>> {
    type Cache = Mutex<HashMap<usize, Arc<Vec<f64>>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&q) {
        return Ok(hit.clone());
    }
    let basis = OrthonormalBasis::legendre(IntegrationInterval::unit());
    let ones = vec![WeightFunction::ConstantOne; 3];
    let bars: Vec<f64> =
        exact_table_rational(&basis, &ones, q)?.iter().map(|c| c.bar.to_f64().unwrap_or(f64::NAN)).collect();
    let bars = Arc::new(bars);
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(q, bars.clone());
    Ok(bars)
}

/// Direct evaluation of the displayed low-order formulas.
///
/// `icomp` lists only the Wiener components (one for J1/J01/J10, two for J11,
/// three for J111); `truncation` is `q` for J11 and `p` for J111.
pub fn closed_form_low_order(
    case: LowOrderCase,
    icomp: &[usize],
    zeta: &ZetaMatrix,
    interval: &IntegrationInterval,
    truncation: usize,
) -> Result<f64> {
    if icomp.len() != case.wiener_components() {
        return Err(Error::Contract(format!("{case:?} takes {} components", case.wiener_components())));
    }
    if let Some(&bad) = icomp.iter().find(|&&i| i > zeta.m() || i == 0) {
        return domain(format!("component {bad} is not a sampled Wiener component"));
    }
    let needed = match case {
        LowOrderCase::J1 => 0,
        LowOrderCase::J01 | LowOrderCase::J10 => 1,
        _ => truncation,
    };
    if zeta.p() < needed {
        return Err(Error::Contract(format!("zeta truncation {} below {needed}", zeta.p())));
    }
    let len = interval.length();
    let z = |i: usize, j: usize| zeta.get(i, j);
    let value = match case {
        LowOrderCase::J1 => len.sqrt() * z(icomp[0], 0),
        LowOrderCase::J01 => len.powf(1.5) / 2.0 * (z(icomp[0], 0) + z(icomp[0], 1) / 3f64.sqrt()),
        LowOrderCase::J10 => len.powf(1.5) / 2.0 * (z(icomp[0], 0) - z(icomp[0], 1) / 3f64.sqrt()),
        LowOrderCase::J11 => {
            let (a, b) = (icomp[0], icomp[1]);
            let mut s = z(a, 0) * z(b, 0);
            for i in 1..=truncation {
                let fi = i as f64;
                s += (z(a, i - 1) * z(b, i) - z(a, i) * z(b, i - 1)) / (4.0 * fi * fi - 1.0).sqrt();
            }
            if a == b {
                s -= 1.0;
            }
            len / 2.0 * s
        }
        LowOrderCase::J111 => {
            let bars = triple_bar(truncation)?;
            let (i1, i2, i3) = (icomp[0], icomp[1], icomp[2]);
            let n = truncation + 1;
            let mut s = 0.0;
            for j1 in 0..n {
                for j2 in 0..n {
                    for j3 in 0..n {
                        let bar = bars[(j1 * n + j2) * n + j3];
                        if bar == 0.0 {
                            continue;
                        }
                        let norm = (((2 * j1 + 1) * (2 * j2 + 1) * (2 * j3 + 1)) as f64).sqrt();
                        let c = norm * len.powf(1.5) / 8.0 * bar;
                        let mut term = z(i1, j1) * z(i2, j2) * z(i3, j3);
                        if i1 == i2 && j1 == j2 {
                            term -= z(i3, j3);
                        }
                        if i2 == i3 && j2 == j3 {
                            term -= z(i1, j1);
                        }
                        if i1 == i3 && j1 == j3 {
                            term -= z(i2, j2);
                        }
                        s += c * term;
                    }
                }
            }
            s
        }
    };
    Ok(value)
}
