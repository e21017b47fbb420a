//! Tab-separated counts file:
//!
//! ```text
//! XMCT v1 N=<n>
//! C\t<cluster>\t<count>
//! J\t<word>\t<cluster>\t<count>
//! END\t<records>
//! ```
//!
//! Only non-zero counts are written. A vocabulary word without any non-zero
//! count is kept with a single `J\t<word>\t0\t0` line. The trailer counts
//! the C and J records, so a truncated file never parses.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::CooccurrenceTable;

#[derive(Debug, Error)]
pub enum CountsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("word {0:?} contains a tab or newline and cannot be stored")]
    UnstorableWord(String),
    #[error("count({word}, {cluster}) = {joint} exceeds count({cluster}) = {cluster_count}")]
    Inconsistent {
        word: String,
        cluster: usize,
        joint: u64,
        cluster_count: u64,
    },
}

pub fn render_counts(table: &CooccurrenceTable) -> Result<String, CountsError> {
    let (clusters, joint) = table.raw_parts();
    let mut out = format!("XMCT v1 N={}\n", table.n_clusters());
    let mut records = 0usize;
    for (c, &n) in clusters.iter().enumerate() {
        if n > 0 {
            writeln!(out, "C\t{c}\t{n}").unwrap();
            records += 1;
        }
    }
    for (word, row) in joint {
        if word.contains(['\t', '\n', '\r']) {
            return Err(CountsError::UnstorableWord(word.clone()));
        }
        let mut any = false;
        for (c, &n) in row.iter().enumerate() {
            if n > 0 {
                writeln!(out, "J\t{word}\t{c}\t{n}").unwrap();
                records += 1;
                any = true;
            }
        }
        if !any {
            writeln!(out, "J\t{word}\t0\t0").unwrap();
            records += 1;
        }
    }
    writeln!(out, "END\t{records}").unwrap();
    Ok(out)
}

pub fn parse_counts(text: &str) -> Result<CooccurrenceTable, CountsError> {
    let malformed = |line: usize, reason: String| CountsError::Malformed { line, reason };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "missing header".into()))?;
    let n: usize = header
        .strip_prefix("XMCT v1 N=")
        .and_then(|rest| rest.parse().ok())
        .ok_or_else(|| malformed(1, format!("bad header {header:?}, expected \"XMCT v1 N=<n>\"")))?;
    if n == 0 {
        return Err(malformed(1, "N must be positive".into()));
    }

    let mut clusters = vec![0u64; n];
    let mut seen_clusters = vec![false; n];
    let mut joint: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut seen_joint = std::collections::BTreeSet::new();

    let count = |line: usize, s: &str| {
        s.parse::<u64>()
            .map_err(|_| malformed(line, format!("count {s:?} is not a non-negative integer")))
    };
    let cluster = |line: usize, s: &str| match s.parse::<usize>() {
        Ok(c) if c < n => Ok(c),
        _ => Err(malformed(line, format!("cluster {s:?} not in 0..{n}"))),
    };

    let mut records = 0usize;
    let mut trailer = None;
    for (line, text) in lines {
        if trailer.is_some() {
            return Err(malformed(line, "content after the END trailer".into()));
        }
        let fields: Vec<&str> = text.split('\t').collect();
        if !matches!(fields.as_slice(), ["END", _]) {
            records += 1;
        }
        match fields.as_slice() {
            ["C", c, k] => {
                let c = cluster(line, c)?;
                if std::mem::replace(&mut seen_clusters[c], true) {
                    return Err(malformed(line, format!("duplicate count for cluster {c}")));
                }
                clusters[c] = count(line, k)?;
            }
            ["J", w, c, k] => {
                if w.is_empty() {
                    return Err(malformed(line, "empty word".into()));
                }
                let c = cluster(line, c)?;
                let k = count(line, k)?;
                let row = joint.entry(w.to_string()).or_insert_with(|| vec![0; n]);
                if k > 0 {
                    if !seen_joint.insert((w.to_string(), c)) {
                        return Err(malformed(line, format!("duplicate count for ({w}, {c})")));
                    }
                    row[c] = k;
                }
            }
            ["END", k] => {
                let k = count(line, k)?;
                if k != records as u64 {
                    return Err(malformed(
                        line,
                        format!("trailer promises {k} records, file has {records}"),
                    ));
                }
                trailer = Some(line);
            }
            _ => return Err(malformed(line, format!("unrecognised record {text:?}"))),
        }
    }
    let last = text.lines().count();
    if trailer.is_none() || !text.ends_with('\n') {
        return Err(malformed(last, "missing END trailer; the file is truncated".into()));
    }

    for (word, row) in &joint {
        for (c, &k) in row.iter().enumerate() {
            if k > clusters[c] {
                return Err(CountsError::Inconsistent {
                    word: word.clone(),
                    cluster: c,
                    joint: k,
                    cluster_count: clusters[c],
                });
            }
        }
    }
    Ok(CooccurrenceTable::from_raw_parts(clusters, joint))
}

pub fn save_counts(table: &CooccurrenceTable, path: &Path) -> Result<(), CountsError> {
    let text = render_counts(table)?;
    fs::write(path, text).map_err(|source| CountsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_counts(path: &Path) -> Result<CooccurrenceTable, CountsError> {
    let text = fs::read_to_string(path).map_err(|source| CountsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_counts(&text)
}
