use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::{read_json, write_json_atomic, StoreError};
use super::{Job, ResponseSet};
use crate::facts::FactSet;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("duplicate entry for {bug_id} {effective}")]
    Duplicate { bug_id: String, effective: FactSet },
    #[error("{bug_id} {effective}: {message}")]
    BadCounts {
        bug_id: String,
        effective: FactSet,
        message: String,
    },
    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseCounts {
    pub n: usize,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub job: Job,
    pub pass_at_1: f64,
    pub response_counts: ResponseCounts,
}

impl DatasetEntry {
    pub fn new(job: Job, n: usize, successes: usize) -> Result<DatasetEntry, DatasetError> {
        if n == 0 || successes > n {
            return Err(DatasetError::BadCounts {
                bug_id: job.bug_id,
                effective: job.effective,
                message: format!("{successes} successes out of {n}"),
            });
        }
        Ok(DatasetEntry {
            job,
            pass_at_1: successes as f64 / n as f64,
            response_counts: ResponseCounts { n, successes },
        })
    }

    pub fn bug_id(&self) -> &str {
        &self.job.bug_id
    }

    pub fn effective(&self) -> FactSet {
        self.job.effective
    }
}

/// (job, pass@1) pairs keyed uniquely by (bug, effective set).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    bug_id: String,
    bitvector: FactSet,
    n: usize,
    successes: usize,
    pass_at_1: f64,
}

impl Dataset {
    pub fn new(entries: Vec<DatasetEntry>) -> Result<Dataset, DatasetError> {
        let dataset = Dataset { entries };
        dataset.check()?;
        Ok(dataset)
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert((e.bug_id(), e.effective())) {
                return Err(DatasetError::Duplicate {
                    bug_id: e.job.bug_id.clone(),
                    effective: e.effective(),
                });
            }
            let ResponseCounts { n, successes } = e.response_counts;
            if n == 0 || successes > n || (e.pass_at_1 - successes as f64 / n as f64).abs() > 1e-12 {
                return Err(DatasetError::BadCounts {
                    bug_id: e.job.bug_id.clone(),
                    effective: e.effective(),
                    message: format!("pass_at_1 {} inconsistent with {successes}/{n}", e.pass_at_1),
                });
            }
        }
        Ok(())
    }

    /// Build from response sets. Only canonically ordered sets contribute;
    /// repeated (bug, effective) pairs are pooled.
    pub fn from_response_sets(sets: &[ResponseSet]) -> Result<Dataset, DatasetError> {
        let mut pooled: BTreeMap<(String, FactSet), (Job, usize, usize)> = BTreeMap::new();
        for rs in sets.iter().filter(|rs| rs.fact_order.is_none()) {
            let slot = pooled
                .entry((rs.job.bug_id.clone(), rs.job.effective))
                .or_insert_with(|| (rs.job.clone(), 0, 0));
            slot.1 += rs.responses.len();
            slot.2 += rs.successes();
        }
        let entries = pooled
            .into_values()
            .map(|(job, n, c)| DatasetEntry::new(job, n, c))
            .collect::<Result<_, _>>()?;
        Dataset::new(entries)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries grouped by bug, bugs in id order.
    pub fn by_bug(&self) -> BTreeMap<&str, Vec<&DatasetEntry>> {
        let mut map: BTreeMap<&str, Vec<&DatasetEntry>> = BTreeMap::new();
        for e in &self.entries {
            map.entry(e.bug_id()).or_default().push(e);
        }
        map
    }

    pub fn bug_ids(&self) -> Vec<&str> {
        self.by_bug().into_keys().collect()
    }

    pub fn lookup(&self, bug_id: &str, effective: FactSet) -> Option<&DatasetEntry> {
        self.entries
            .iter()
            .find(|e| e.bug_id() == bug_id && e.effective() == effective)
    }

    /// Keep entries whose bug satisfies `keep`.
    pub fn filter_bugs(&self, mut keep: impl FnMut(&str) -> bool) -> Dataset {
        Dataset {
            entries: self.entries.iter().filter(|e| keep(e.bug_id())).cloned().collect(),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<(), DatasetError> {
        Ok(write_json_atomic(path, self)?)
    }

    pub fn load_json(path: &Path) -> Result<Dataset, DatasetError> {
        let dataset: Dataset = read_json(path)?;
        dataset.check()?;
        Ok(dataset)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(CsvRow {
                bug_id: e.job.bug_id.clone(),
                bitvector: e.effective(),
                n: e.response_counts.n,
                successes: e.response_counts.successes,
                pass_at_1: e.pass_at_1,
            })
            .map_err(|err| DatasetError::Csv {
                row: 0,
                message: err.to_string(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read the CSV form. The requested set is not part of the schema, so
    /// it is taken to equal the effective set.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Dataset, DatasetError> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries = Vec::new();
        for (i, row) in r.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|err| DatasetError::Csv {
                row: i + 1,
                message: err.to_string(),
            })?;
            let job = Job {
                bug_id: row.bug_id,
                requested: row.bitvector,
                effective: row.bitvector,
            };
            let entry = DatasetEntry::new(job, row.n, row.successes)?;
            if (entry.pass_at_1 - row.pass_at_1).abs() > 1e-12 {
                return Err(DatasetError::Csv {
                    row: i + 1,
                    message: format!("pass_at_1 {} does not match {}/{}", row.pass_at_1, row.successes, row.n),
                });
            }
            entries.push(entry);
        }
        Dataset::new(entries)
    }

    /// Load from `.csv` or JSON depending on the extension.
    pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
        if path.extension().is_some_and(|e| e == "csv") {
            Dataset::read_csv(std::fs::File::open(path)?)
        } else {
            Dataset::load_json(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ResponseRecord, SampleParams, Verdict};
    use proptest::prelude::*;

    fn job(bug: &str, bits: &str) -> Job {
        let s: FactSet = bits.parse().unwrap();
        Job {
            bug_id: bug.into(),
            requested: s,
            effective: s,
        }
    }

    fn rs(bug: &str, bits: &str, verdicts: &[bool], order: Option<&str>) -> ResponseSet {
        ResponseSet {
            job: job(bug, bits),
            model_id: "m".into(),
            params: SampleParams {
                temperature: 1.0,
                seed: None,
                n: verdicts.len(),
            },
            fact_order: order.map(str::to_string),
            responses: verdicts
                .iter()
                .map(|ok| ResponseRecord {
                    raw_text: String::new(),
                    patch: ok.then(|| "def f(): pass".to_string()),
                    verdict: if *ok { Verdict::Plausible } else { Verdict::TestFail },
                })
                .collect(),
        }
    }

    #[test]
    fn from_response_sets_counts() {
        let sets = vec![
            rs("a:1", "0000000", &[true, false, false], None),
            rs("a:1", "0000001", &[true, true, false], None),
            rs("a:1", "0000001", &[true, true, true], Some("o2")),
        ];
        let d = Dataset::from_response_sets(&sets).unwrap();
        assert_eq!(d.len(), 2);
        let e = d.lookup("a:1", "0000001".parse().unwrap()).unwrap();
        assert_eq!(e.response_counts, ResponseCounts { n: 3, successes: 2 });
        assert!((e.pass_at_1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn duplicates_rejected() {
        let e = DatasetEntry::new(job("a:1", "0000000"), 5, 1).unwrap();
        assert!(matches!(Dataset::new(vec![e.clone(), e]), Err(DatasetError::Duplicate { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(vec![
            DatasetEntry::new(job("a:1", "0101010"), 15, 7).unwrap(),
            DatasetEntry::new(job("b:2", "0000000"), 15, 0).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bug_id,bitvector,n,successes,pass_at_1\n"));
        assert!(text.contains("a:1,0101010,15,7,"));
        assert_eq!(Dataset::read_csv(&buf[..]).unwrap(), d);
    }

    #[test]
    fn json_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.json");
        let d = Dataset::new(vec![DatasetEntry::new(job("a:1", "1000000"), 15, 12).unwrap()]).unwrap();
        d.save_json(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), d);
    }

    proptest! {
        #[test]
        fn pass_at_1_is_ratio(n in 1usize..60, c in 0usize..60) {
            prop_assume!(c <= n);
            let e = DatasetEntry::new(job("a:1", "0000000"), n, c).unwrap();
            prop_assert!((e.pass_at_1 * n as f64 - c as f64).abs() <= 1e-12 * n as f64);
        }
    }
}
