use std::collections::HashMap;

use crate::text;

/// Smoothed inverse document frequency over per-turn lexical units.
///
/// `idf(w) = ln((1 + N) / (1 + df(w))) + 1`; units never seen get
/// `ln(N + 1) + 1`, the value of a unit with document frequency zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    weights: HashMap<String, f64>,
    default: f64,
    n_docs: usize,
}

impl IdfTable {
    pub fn build<'a>(documents: impl IntoIterator<Item = &'a str>) -> Self {
        Self::from_unit_sets(documents.into_iter().map(text::lexical_units))
    }

    pub fn from_unit_sets<I, S>(documents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = String>,
    {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n = 0usize;
        for doc in documents {
            n += 1;
            for u in doc {
                *df.entry(u).or_insert(0) += 1;
            }
        }
        let nf = n as f64;
        let weights = df
            .into_iter()
            .map(|(u, d)| (u, ((1.0 + nf) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        IdfTable {
            weights,
            default: (nf + 1.0).ln() + 1.0,
            n_docs: n,
        }
    }

    pub fn weight(&self, unit: &str) -> f64 {
        self.weights.get(unit).copied().unwrap_or(self.default)
    }

    pub fn default_weight(&self) -> f64 {
        self.default
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_in_every_document_has_weight_one() {
        let t = IdfTable::build(["cache miss", "cache hit", "cache"]);
        assert_eq!(t.weight("cache"), 1.0);
    }

    #[test]
    fn unit_in_one_of_nine() {
        let mut docs = vec!["rare token"];
        docs.extend(std::iter::repeat("common").take(8));
        let t = IdfTable::build(docs);
        assert_eq!(t.n_docs(), 9);
        let expected = (10.0f64 / 2.0).ln() + 1.0;
        assert_eq!(t.weight("rare"), expected);
        assert!((t.weight("rare") - 2.609).abs() < 1e-3);
    }

    #[test]
    fn unseen_default() {
        let t = IdfTable::build(["a1 b1", "c1"]);
        assert_eq!(t.weight("never"), 3f64.ln() + 1.0);
        assert_eq!(t.default_weight(), 3f64.ln() + 1.0);
    }
}
