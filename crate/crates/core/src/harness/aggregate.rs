use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunRecord};

/// Field used to split records into rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    /// Font category or geometry.
    Group,
    Task,
    Strategy,
}

impl GroupKey {
    fn key(self, record: &RunRecord) -> String {
        match self {
            GroupKey::Group => record.group.clone().unwrap_or_else(|| "(none)".into()),
            GroupKey::Task => record.task.as_str().into(),
            GroupKey::Strategy => record.strategy.as_str().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: String,
    pub n: usize,
    pub n_correct: usize,
    /// Percent, rounded half up to one decimal.
    pub accuracy: f64,
}

impl AggregateRow {
    fn new(key: String, n: usize, n_correct: usize) -> Self {
        Self {
            key,
            n,
            n_correct,
            accuracy: percent_1dp(n_correct, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
    pub overall: AggregateRow,
}

/// `100 * num / den` rounded half up to one decimal, in exact integer
/// arithmetic.
pub fn percent_1dp(num: usize, den: usize) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let (num, den) = (num as u128, den as u128);
    let tenths = (2000 * num + den) / (2 * den);
    tenths as f64 / 10.0
}

/// Accuracy per group (sorted by key) plus the overall row. Without a key
/// the table has the overall row only.
pub fn aggregate(records: &[RunRecord], group: Option<GroupKey>) -> Result<AggregateTable, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    let overall = AggregateRow::new("overall".into(), records.len(), correct);
    let rows = match group {
        None => Vec::new(),
        Some(key) => {
            let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
            for r in records {
                let entry = counts.entry(key.key(r)).or_default();
                entry.0 += 1;
                entry.1 += usize::from(r.correct);
            }
            counts
                .into_iter()
                .map(|(k, (n, c))| AggregateRow::new(k, n, c))
                .collect()
        }
    };
    Ok(AggregateTable { rows, overall })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::test_support::record;

    #[test]
    fn rounding() {
        assert_eq!(percent_1dp(2, 4), 50.0);
        assert_eq!(percent_1dp(1, 3), 33.3);
        assert_eq!(percent_1dp(2, 3), 66.7);
        assert_eq!(percent_1dp(1, 8), 12.5);
        assert_eq!(percent_1dp(1, 16), 6.3);
        assert_eq!(percent_1dp(0, 0), 0.0);
    }

    #[test]
    fn grouped_rows_sum_to_overall() {
        let mut records = Vec::new();
        for (i, (group, ok)) in [("bubble", true), ("bubble", false), ("doh", true), ("three_d", false)]
            .into_iter()
            .enumerate()
        {
            let mut r = record(&format!("i{i}"), ok);
            r.group = Some(group.into());
            records.push(r);
        }
        let t = aggregate(&records, Some(GroupKey::Group)).unwrap();
        assert_eq!(t.overall.accuracy, 50.0);
        assert_eq!(t.rows.iter().map(|r| r.n).sum::<usize>(), t.overall.n);
        assert_eq!(t.rows.iter().map(|r| r.n_correct).sum::<usize>(), t.overall.n_correct);
        assert_eq!(t.rows[0].key, "bubble");
        assert!(aggregate(&records, None).unwrap().rows.is_empty());
        assert!(matches!(aggregate(&[], None), Err(HarnessError::EmptyRecords)));
    }
}
