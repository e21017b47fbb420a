use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::world::WorldSpec;
use super::{io_err, DatasetError, Result};

pub const TAXONOMY_FILE: &str = "taxonomy.tsv";
pub const ASSOCIATIONS_FILE: &str = "assoc.tsv";
pub const CONCRETENESS_FILE: &str = "concreteness.tsv";

/// Evaluation-only annotations: word categories, directed association
/// strengths and concreteness ratings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldResources {
    pub taxonomy: BTreeMap<String, String>,
    pub associations: BTreeMap<(String, String), u64>,
    pub concreteness: BTreeMap<String, f64>,
}

impl GoldResources {
    /// Gold for the shapes world. Categories are the shapes. Associations
    /// cover every ordered pair of content words (class and context words)
    /// with the number of training captions containing both; pairs that
    /// never co-occur are listed with strength 0. Ratings are 1.0 for class
    /// words, 0.3 for context words and 0.0 for grammatical words.
    pub fn for_world(spec: &WorldSpec, train_captions: &[Vec<String>]) -> Self {
        let taxonomy = spec
            .classes()
            .map(|c| (c.word(), c.shape.name().to_string()))
            .collect();
        let mut content = spec.class_words();
        content.extend(spec.context_words());
        let associations = association_table(&content, train_captions);
        let mut concreteness = BTreeMap::new();
        for w in spec.grammatical_words() {
            concreteness.insert(w, 0.0);
        }
        for w in spec.context_words() {
            concreteness.insert(w, 0.3);
        }
        for w in spec.class_words() {
            concreteness.insert(w, 1.0);
        }
        Self {
            taxonomy,
            associations,
            concreteness,
        }
    }
}

/// Caption-level co-occurrence counts for every ordered pair of distinct
/// `words`.
pub fn association_table(words: &[String], captions: &[Vec<String>]) -> BTreeMap<(String, String), u64> {
    let mut table = BTreeMap::new();
    for x in words {
        for y in words {
            if x != y {
                table.insert((x.clone(), y.clone()), 0);
            }
        }
    }
    for caption in captions {
        let present: BTreeSet<&String> = caption.iter().filter(|w| words.contains(w)).collect();
        for &x in &present {
            for &y in &present {
                if x != y {
                    *table.get_mut(&(x.clone(), y.clone())).expect("pair listed") += 1;
                }
            }
        }
    }
    table
}

/// Write the three gold files into `dir`; returns their paths in the order
/// taxonomy, associations, concreteness.
pub fn save_gold(dir: &Path, gold: &GoldResources) -> Result<[PathBuf; 3]> {
    let mut taxonomy = String::new();
    for (w, c) in &gold.taxonomy {
        taxonomy.push_str(&format!("{w}\t{c}\n"));
    }
    let mut assoc = String::new();
    for ((x, y), s) in &gold.associations {
        assoc.push_str(&format!("{x}\t{y}\t{s}\n"));
    }
    let mut conc = String::new();
    for (w, r) in &gold.concreteness {
        conc.push_str(&format!("{w}\t{r}\n"));
    }
    let paths = [
        dir.join(TAXONOMY_FILE),
        dir.join(ASSOCIATIONS_FILE),
        dir.join(CONCRETENESS_FILE),
    ];
    for (path, text) in paths.iter().zip([taxonomy, assoc, conc]) {
        fs::write(path, text).map_err(io_err(path))?;
    }
    Ok(paths)
}

fn records(path: &Path, arity: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != arity || fields.iter().any(String::is_empty) {
            return Err(DatasetError::Gold {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected {arity} non-empty tab-separated fields"),
            });
        }
        out.push((i + 1, fields));
    }
    Ok(out)
}

fn duplicate(path: &Path, line: usize, key: &str) -> DatasetError {
    DatasetError::Gold {
        path: path.to_path_buf(),
        line,
        reason: format!("duplicate entry {key}"),
    }
}

/// `word\tcategory` lines.
pub fn load_taxonomy(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (line, mut f) in records(path, 2)? {
        let category = f.pop().expect("arity");
        let word = f.pop().expect("arity");
        if map.insert(word.clone(), category).is_some() {
            return Err(duplicate(path, line, &word));
        }
    }
    Ok(map)
}

/// `cue\tresponse\tstrength` lines with non-negative integer strengths.
pub fn load_associations(path: &Path) -> Result<BTreeMap<(String, String), u64>> {
    let mut map = BTreeMap::new();
    for (line, f) in records(path, 3)? {
        let strength: u64 = f[2].parse().map_err(|_| DatasetError::Gold {
            path: path.to_path_buf(),
            line,
            reason: format!("strength {:?} is not a non-negative integer", f[2]),
        })?;
        if map.insert((f[0].clone(), f[1].clone()), strength).is_some() {
            return Err(duplicate(path, line, &format!("{} {}", f[0], f[1])));
        }
    }
    Ok(map)
}

/// `word\trating` lines with finite ratings.
pub fn load_concreteness(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for (line, f) in records(path, 2)? {
        let rating: f64 = f[1]
            .parse()
            .ok()
            .filter(|r: &f64| r.is_finite())
            .ok_or_else(|| DatasetError::Gold {
                path: path.to_path_buf(),
                line,
                reason: format!("rating {:?} is not a finite number", f[1]),
            })?;
        if map.insert(f[0].clone(), rating).is_some() {
            return Err(duplicate(path, line, &f[0]));
        }
    }
    Ok(map)
}
