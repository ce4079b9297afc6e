use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::math::RunningStats;

/// Mean and population standard deviation over defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Number of defined (non-null) values.
    pub n: usize,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let stats: RunningStats = values.into_iter().flatten().collect();
        Aggregate {
            mean: stats.mean(),
            std: stats.std(),
            n: stats.count(),
        }
    }
}

/// Aggregates per metric over a set of per-conversation metric maps.
pub fn aggregate_metrics<'a>(
    rows: impl IntoIterator<Item = &'a BTreeMap<String, Option<f64>>> + Clone,
) -> BTreeMap<String, Aggregate> {
    let mut columns: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for row in rows {
        for (metric, v) in row {
            columns.entry(metric.as_str()).or_default().push(*v);
        }
    }
    columns
        .into_iter()
        .map(|(m, vs)| (m.to_owned(), Aggregate::of(vs)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nulls_are_excluded_not_zeroed() {
        let a = Aggregate::of([Some(1.0), None, Some(3.0)]);
        assert_eq!(a.n, 2);
        assert_eq!(a.mean, Some(2.0));
        assert_eq!(a.std, Some(1.0));
        let empty = Aggregate::of([None, None]);
        assert_eq!(empty, Aggregate { mean: None, std: None, n: 0 });
    }

    #[test]
    fn population_std() {
        let a = Aggregate::of([2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0].map(Some));
        assert_eq!(a.mean, Some(5.0));
        assert_eq!(a.std, Some(2.0));
    }
}
