//! JSON form of a coefficient table.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, IntegrationInterval, OrthonormalBasis, WeightFunction};
use crate::coefficients::CoefficientTable;
use crate::error::{Error, Result};
use crate::rational::{parse_ratio, RationalCoefficient};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub j: Vec<usize>,
    pub value: f64,
    /// Exact `C̄` as `"num/den"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rational: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_exp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radicand: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub basis: BasisKind,
    pub interval: IntegrationInterval,
    pub k: usize,
    pub p: usize,
    pub weights: Vec<WeightFunction>,
    pub parseval_norm: f64,
    pub residual: f64,
    pub entries: Vec<TableEntry>,
}

impl TableDocument {
    /// Entries in table order; `rationals`, when given, must be in the same order.
    pub fn from_table(table: &CoefficientTable, rationals: Option<&[RationalCoefficient]>) -> Result<Self> {
        if let Some(r) = rationals {
            if r.len() != table.values().len() {
                return Err(Error::Contract("rational list does not match the table".into()));
            }
        }
        let entries = table
            .entries()
            .enumerate()
            .map(|(idx, (md, value))| {
                let exact = rationals.map(|r| &r[idx]);
                TableEntry {
                    j: md.0,
                    value,
                    rational: exact.map(|r| r.ratio_string()),
                    scale_exp: exact.map(|r| r.scale_exp),
                    radicand: exact.map(|r| r.radicand),
                }
            })
            .collect();
        Ok(Self {
            basis: table.basis().kind,
            interval: table.basis().interval,
            k: table.k(),
            p: table.p(),
            weights: table.weights().to_vec(),
            parseval_norm: table.parseval_norm(),
            residual: table.residual(),
            entries,
        })
    }

    /// Rebuilds the table from stored values, without recomputation.
    pub fn into_table(self) -> Result<CoefficientTable> {
        let interval = IntegrationInterval::new(self.interval.start(), self.interval.end())?;
        if self.weights.len() != self.k {
            return Err(Error::Format(format!("{} weights for k = {}", self.weights.len(), self.k)));
        }
        let expected = (self.p + 1).pow(self.k as u32);
        if self.entries.len() != expected {
            return Err(Error::Format(format!("expected {expected} entries, found {}", self.entries.len())));
        }
        let mut values = vec![f64::NAN; expected];
        for e in &self.entries {
            if e.j.len() != self.k || e.j.iter().any(|&x| x > self.p) {
                return Err(Error::Format(format!("entry index {:?} outside the table", e.j)));
            }
            if let Some(r) = &e.rational {
                parse_ratio(r).ok_or_else(|| Error::Format(format!("bad rational {r:?}")))?;
            }
            let idx = e.j.iter().fold(0, |acc, &x| acc * (self.p + 1) + x);
            values[idx] = e.value;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Format("table has missing or duplicate entries".into()));
        }
        CoefficientTable::from_parts(OrthonormalBasis::new(self.basis, interval), self.weights, self.p, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::exact_table_rational;

    #[test]
    fn round_trip_is_bit_identical() {
        let b = OrthonormalBasis::legendre(IntegrationInterval::new(0.1, 0.9).unwrap());
        let w = vec![WeightFunction::polynomial(vec![1.0, 2.0]).unwrap(), WeightFunction::ConstantOne];
        let table = CoefficientTable::compute(b, w.clone(), 4).unwrap();
        let exact = exact_table_rational(&b, &w, 4).unwrap();
        let doc = TableDocument::from_table(&table, Some(&exact)).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let back: TableDocument = serde_json::from_str(&text).unwrap();
        let again = back.into_table().unwrap();
        assert_eq!(again.values(), table.values());
        assert_eq!(again.residual().to_bits(), table.residual().to_bits());
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let b = OrthonormalBasis::trigonometric(IntegrationInterval::unit());
        let table = CoefficientTable::unit_weights(b, 2, 2).unwrap();
        let mut doc = TableDocument::from_table(&table, None).unwrap();
        doc.entries.pop();
        assert!(matches!(doc.clone().into_table(), Err(Error::Format(_))));
        let mut dup = TableDocument::from_table(&table, None).unwrap();
        dup.entries[1].j = vec![0, 0];
        assert!(dup.into_table().is_err());
    }
}
