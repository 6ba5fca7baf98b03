//! Rating data: loading, dense re-indexing, train/validation/test splits and
//! mini-batch sampling.
//!
//! Datasets are immutable once built. Splitting returns a new dataset that
//! shares nothing mutable with the original, so one loaded file can back any
//! number of concurrent runs.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "valid" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

/// One observed entry. `depth` is set only for third-order data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatingRecord {
    pub row: usize,
    pub col: usize,
    pub depth: Option<usize>,
    pub value: f64,
}

impl RatingRecord {
    pub fn matrix(row: usize, col: usize, value: f64) -> Self {
        RatingRecord {
            row,
            col,
            depth: None,
            value,
        }
    }

    pub fn tensor(row: usize, col: usize, depth: usize, value: f64) -> Self {
        RatingRecord {
            row,
            col,
            depth: Some(depth),
            value,
        }
    }

    /// Embedding-table index for each mode, in mode order.
    #[inline]
    pub fn index(&self, mode: usize) -> usize {
        match mode {
            0 => self.row,
            1 => self.col,
            _ => self.depth.expect("record has no third index"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<usize>,
}

impl Dims {
    pub fn matrix(rows: usize, cols: usize) -> Self {
        Dims {
            rows,
            cols,
            depths: None,
        }
    }

    pub fn tensor(rows: usize, cols: usize, depths: usize) -> Self {
        Dims {
            rows,
            cols,
            depths: Some(depths),
        }
    }

    /// 2 for matrices, 3 for third-order tensors.
    pub fn order(&self) -> usize {
        if self.depths.is_some() {
            3
        } else {
            2
        }
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.rows, self.cols];
        if let Some(d) = self.depths {
            sizes.push(d);
        }
        sizes
    }
}

/// Bijection between raw identifiers found in a file and dense 0-based indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    raw: Vec<String>,
    dense: HashMap<String, usize>,
}

impl From<Vec<String>> for IdMap {
    fn from(raw: Vec<String>) -> Self {
        let dense = raw.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        IdMap { raw, dense }
    }
}

impl From<IdMap> for Vec<String> {
    fn from(map: IdMap) -> Self {
        map.raw
    }
}

impl IdMap {
    /// Builds a map over the distinct ids, ordered numerically when every id
    /// parses as an integer and lexicographically otherwise.
    pub fn from_ids<'a, I: IntoIterator<Item = &'a str>>(ids: I) -> Self {
        let mut raw: Vec<String> = ids.into_iter().map(str::to_owned).collect();
        raw.sort_by(|a, b| match (a.parse::<i64>(), b.parse::<i64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.cmp(b),
        });
        raw.dedup();
        IdMap::from(raw)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn dense(&self, raw: &str) -> Option<usize> {
        self.dense.get(raw).copied()
    }

    pub fn raw(&self, dense: usize) -> Option<&str> {
        self.raw.get(dense).map(String::as_str)
    }
}

/// Raw-id maps for users and items, present when the data came from a file
/// with sparse raw identifiers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Reindex {
    pub users: IdMap,
    pub items: IdMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// MovieLens-100K `u.data`: `user<TAB>item<TAB>rating<TAB>timestamp`.
    Tab,
    /// MovieLens-1M `ratings.dat`: `user::item::rating::timestamp`.
    DoubleColon,
}

impl MatrixFormat {
    /// Guesses the format from the file extension and first line.
    pub fn detect(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        let mut first = String::new();
        BufReader::new(file).read_line(&mut first)?;
        Ok(if first.contains("::") {
            MatrixFormat::DoubleColon
        } else {
            MatrixFormat::Tab
        })
    }

    fn fields<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            MatrixFormat::Tab => line.split_whitespace().collect(),
            MatrixFormat::DoubleColon => line.split("::").map(str::trim).collect(),
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tab" | "tsv" | "u.data" => Ok(MatrixFormat::Tab),
            "dcolon" | "::" | "ratings.dat" => Ok(MatrixFormat::DoubleColon),
            other => Err(Error::Config(format!("unknown matrix format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RatingDataset {
    records: Vec<RatingRecord>,
    dims: Dims,
    assignment: Vec<Split>,
    reindex: Option<Reindex>,
}

impl RatingDataset {
    /// Wraps records with every entry assigned to the training split.
    pub fn new(records: Vec<RatingRecord>, dims: Dims) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            let in_range = r.row < dims.rows
                && r.col < dims.cols
                && match (r.depth, dims.depths) {
                    (None, None) => true,
                    (Some(l), Some(d)) => l < d,
                    _ => false,
                };
            if !in_range {
                return Err(Error::IndexOutOfRange(format!(
                    "record {i} ({r:?}) outside dims {dims:?}"
                )));
            }
            if !r.value.is_finite() {
                return Err(Error::Config(format!("record {i} has non-finite value")));
            }
        }
        let assignment = vec![Split::Train; records.len()];
        Ok(RatingDataset {
            records,
            dims,
            assignment,
            reindex: None,
        })
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn record(&self, idx: usize) -> &RatingRecord {
        &self.records[idx]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn reindex(&self) -> Option<&Reindex> {
        self.reindex.as_ref()
    }

    pub fn split_of(&self, idx: usize) -> Split {
        self.assignment[idx]
    }

    pub fn assignment(&self) -> &[Split] {
        &self.assignment
    }

    /// Record indices belonging to `split`, in file order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.assignment.iter().filter(|s| **s == split).count()
    }

    /// Replaces the split labels wholesale.
    pub fn with_assignment(mut self, assignment: Vec<Split>) -> Result<Self> {
        if assignment.len() != self.records.len() {
            return Err(Error::LengthMismatch {
                expected: self.records.len(),
                got: assignment.len(),
            });
        }
        self.assignment = assignment;
        Ok(self)
    }

    /// Writes the split manifest: one `record-index,split-label` line per record.
    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        for (i, s) in self.assignment.iter().enumerate() {
            writeln!(out, "{i},{s}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Restores split labels from a manifest written by [`write_manifest`](Self::write_manifest).
    pub fn apply_manifest(self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut assignment = vec![None; self.records.len()];
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                msg: msg.to_owned(),
            };
            let (idx, label) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected 'index,label'"))?;
            let idx: usize = idx.trim().parse().map_err(|_| parse_err("bad index"))?;
            let split: Split = label.trim().parse().map_err(|_| parse_err("bad label"))?;
            let slot = assignment
                .get_mut(idx)
                .ok_or_else(|| parse_err("index beyond dataset"))?;
            *slot = Some(split);
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| Error::Config(format!("manifest does not label record {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_assignment(assignment)
    }
}

fn parse_value(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        path: path.to_owned(),
        line,
        msg: format!("cannot parse rating '{field}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_owned(),
            line,
            msg: "rating is not finite".into(),
        });
    }
    Ok(v)
}

/// Loads a user-item rating file, densely re-indexing raw user and item ids.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<RatingDataset> {
    let text = fs::read_to_string(path)?;
    let mut raw: Vec<(&str, &str, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = format.fields(line);
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                msg: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
        }
        let value = parse_value(path, lineno + 1, fields[2])?;
        raw.push((fields[0], fields[1], value));
    }
    if raw.is_empty() {
        return Err(Error::EmptyFile(path.to_owned()));
    }

    let users = IdMap::from_ids(raw.iter().map(|r| r.0));
    let items = IdMap::from_ids(raw.iter().map(|r| r.1));
    let records = raw
        .iter()
        .map(|(u, i, v)| {
            RatingRecord::matrix(users.dense(u).unwrap(), items.dense(i).unwrap(), *v)
        })
        .collect();
    let dims = Dims::matrix(users.len(), items.len());
    let mut ds = RatingDataset::new(records, dims)?;
    ds.reindex = Some(Reindex { users, items });
    Ok(ds)
}

/// Loads `row col depth value` quads separated by commas or tabs. Indices are
/// taken as already 0-based. A leading `# dims R C D` comment fixes the
/// dimensions; otherwise each is inferred as max index + 1.
pub fn load_tensor(path: &Path) -> Result<RatingDataset> {
    let text = fs::read_to_string(path)?;
    let mut header: Option<Dims> = None;
    let mut records = Vec::new();
    let mut max = [0usize; 3];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            msg,
        };
        if let Some(comment) = line.strip_prefix('#') {
            let parts: Vec<&str> = comment.split_whitespace().collect();
            if parts.first() == Some(&"dims") {
                let nums = parts[1..]
                    .iter()
                    .map(|p| p.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err("bad dims header".into()))?;
                if nums.len() != 3 {
                    return Err(err("dims header needs three sizes".into()));
                }
                header = Some(Dims::tensor(nums[0], nums[1], nums[2]));
            }
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 4 {
            return Err(err(format!(
                "expected 'row col depth value', found {} fields",
                fields.len()
            )));
        }
        let mut idx = [0usize; 3];
        for (m, f) in fields[..3].iter().enumerate() {
            idx[m] = f
                .parse()
                .map_err(|_| err(format!("cannot parse index '{f}'")))?;
            max[m] = max[m].max(idx[m]);
        }
        let value = parse_value(path, lineno + 1, fields[3])?;
        records.push(RatingRecord::tensor(idx[0], idx[1], idx[2], value));
    }
    if records.is_empty() {
        return Err(Error::EmptyFile(path.to_owned()));
    }
    let dims = header.unwrap_or(Dims::tensor(max[0] + 1, max[1] + 1, max[2] + 1));
    RatingDataset::new(records, dims)
}

/// Writes a tensor dataset in the format [`load_tensor`] reads, with a dims header.
pub fn write_tensor(ds: &RatingDataset, path: &Path) -> Result<()> {
    let dims = ds.dims();
    let depths = dims
        .depths
        .ok_or_else(|| Error::Config("dataset is not third-order".into()))?;
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# dims {} {} {}", dims.rows, dims.cols, depths)?;
    for r in ds.records() {
        writeln!(out, "{},{},{},{}", r.row, r.col, r.depth.unwrap(), r.value)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a matrix dataset as tab-separated `user item rating 0` lines with
/// 1-based ids, readable by [`load_matrix`].
pub fn write_matrix(ds: &RatingDataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for r in ds.records() {
        writeln!(out, "{}\t{}\t{}\t0", r.row + 1, r.col + 1, r.value)?;
    }
    out.flush()?;
    Ok(())
}

/// Split sizes for `n` records: train and validation rounded to nearest, test
/// takes the remainder.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = ratios;
    for r in [a, b, c] {
        if !(0.0..=1.0).contains(&r) || !r.is_finite() {
            return Err(Error::InvalidRatios(format!("ratio {r} outside [0, 1]")));
        }
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRatios(format!(
            "ratios sum to {}, not 1",
            a + b + c
        )));
    }
    let train = ((n as f64) * a).round() as usize;
    let train = train.min(n);
    let valid = (((n as f64) * b).round() as usize).min(n - train);
    Ok((train, valid, n - train - valid))
}

/// Uniform random by-record split, deterministic in `seed`.
pub fn split(dataset: &RatingDataset, ratios: (f64, f64, f64), seed: u64) -> Result<RatingDataset> {
    let n = dataset.len();
    let (n_train, n_valid, _) = split_sizes(n, ratios)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![Split::Test; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_valid {
            Split::Validation
        } else {
            Split::Test
        };
    }
    dataset.clone().with_assignment(assignment)
}

/// A mini-batch: indices into the dataset's records, all from one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub split: Split,
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn records<'a>(&'a self, ds: &'a RatingDataset) -> impl Iterator<Item = &'a RatingRecord> + 'a {
        self.indices.iter().map(move |&i| ds.record(i))
    }

    /// Errors unless the batch came from `expected`.
    pub fn require(&self, expected: Split) -> Result<()> {
        if self.split == expected {
            Ok(())
        } else {
            Err(Error::WrongSplit {
                expected: expected.as_str(),
                got: self.split.as_str(),
            })
        }
    }
}

/// Cycles through a split in shuffled epochs. Each epoch is a fresh
/// permutation; the last batch of an epoch may be short.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    split: Split,
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl BatchSampler {
    pub fn new(dataset: &RatingDataset, split: Split, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let order = dataset.split_indices(split);
        if order.is_empty() {
            return Err(Error::EmptySplit(split.as_str()));
        }
        Ok(BatchSampler {
            split,
            order,
            cursor: 0,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: 0,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_batch(&mut self) -> Batch {
        if self.cursor == 0 {
            self.order.shuffle(&mut self.rng);
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let indices = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        if self.cursor == self.order.len() {
            self.cursor = 0;
            self.epoch += 1;
        }
        Batch {
            split: self.split,
            indices,
        }
    }
}

/// One-shot sample: the next batch of a sampler seeded from `rng`.
pub fn sample_batch<R: rand::Rng>(
    dataset: &RatingDataset,
    split: Split,
    size: usize,
    rng: &mut R,
) -> Result<Batch> {
    let mut sampler = BatchSampler::new(dataset, split, size, rng.random())?;
    Ok(sampler.next_batch())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn toy(n: usize) -> RatingDataset {
        let recs = (0..n).map(|i| RatingRecord::matrix(i % 7, i % 5, 1.0 + (i % 5) as f64)).collect();
        RatingDataset::new(recs, Dims::matrix(7, 5)).unwrap()
    }

    #[test]
    fn smallest_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u.data", "1\t1\t5\t0\n");
        let ds = load_matrix(&p, MatrixFormat::Tab).unwrap();
        assert_eq!(ds.dims(), Dims::matrix(1, 1));
        assert_eq!(ds.records(), &[RatingRecord::matrix(0, 0, 5.0)]);
    }

    #[test]
    fn sparse_ids_are_reindexed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u.data", "7\t10\t4\t0\n3\t10\t2\t0\n");
        let ds = load_matrix(&p, MatrixFormat::Tab).unwrap();
        assert_eq!(ds.dims().rows, 2);
        let map = &ds.reindex().unwrap().users;
        assert_eq!(map.dense("3"), Some(0));
        assert_eq!(map.dense("7"), Some(1));
        assert_eq!(map.raw(1), Some("7"));
        assert_eq!(ds.record(0).row, 1);
    }

    #[test]
    fn double_colon_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "ratings.dat", "1::1193::5::978300760\n2::1193::3::978300761\n");
        assert_eq!(MatrixFormat::detect(&p).unwrap(), MatrixFormat::DoubleColon);
        let ds = load_matrix(&p, MatrixFormat::DoubleColon).unwrap();
        assert_eq!(ds.dims(), Dims::matrix(2, 1));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u.data", "1\t1\t5\t0\n1\t2\n");
        match load_matrix(&p, MatrixFormat::Tab) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(&dir, "bad.data", "1\t1\tfive\t0\n");
        assert!(matches!(load_matrix(&p, MatrixFormat::Tab), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_file_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u.data", "");
        assert!(matches!(load_matrix(&p, MatrixFormat::Tab), Err(Error::EmptyFile(_))));
        assert!(matches!(load_tensor(&p), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn tensor_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "0,0,0,1.0\n");
        let ds = load_tensor(&p).unwrap();
        assert_eq!(ds.dims(), Dims::tensor(1, 1, 1));
        assert_eq!(ds.len(), 1);

        let p = write(&dir, "t.tsv", "# dims 4 5 6\n1\t2\t3\t0.5\n");
        assert_eq!(load_tensor(&p).unwrap().dims(), Dims::tensor(4, 5, 6));

        let p = write(&dir, "bad.csv", "0,0,1.0\n");
        assert!(matches!(load_tensor(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn split_sizes_small() {
        assert_eq!(split_sizes(4, (0.5, 0.25, 0.25)).unwrap(), (2, 1, 1));
        assert_eq!(split_sizes(100_000, (0.5, 0.25, 0.25)).unwrap(), (50_000, 25_000, 25_000));
        assert!(split_sizes(10, (1.5, -0.25, -0.25)).is_err());
        assert!(split_sizes(10, (0.5, 0.5, 0.5)).is_err());
    }

    #[test]
    fn split_partitions_and_is_deterministic() {
        let ds = toy(103);
        let a = split(&ds, (0.5, 0.25, 0.25), 1).unwrap();
        let b = split(&ds, (0.5, 0.25, 0.25), 1).unwrap();
        let c = split(&ds, (0.5, 0.25, 0.25), 2).unwrap();
        assert_eq!(a.assignment(), b.assignment());
        assert_ne!(a.assignment(), c.assignment());
        let total = a.split_len(Split::Train) + a.split_len(Split::Validation) + a.split_len(Split::Test);
        assert_eq!(total, 103);
        assert!((a.split_len(Split::Train) as f64 - 51.5).abs() <= 1.0);
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = split(&toy(30), (0.5, 0.25, 0.25), 9).unwrap();
        let p = dir.path().join("split.csv");
        ds.write_manifest(&p).unwrap();
        let restored = toy(30).apply_manifest(&p).unwrap();
        assert_eq!(restored.assignment(), ds.assignment());
    }

    #[test]
    fn epoch_batches() {
        let ds = toy(10);
        let mut s = BatchSampler::new(&ds, Split::Train, 4, 3).unwrap();
        assert_eq!(s.batches_per_epoch(), 3);
        let sizes: Vec<usize> = (0..3).map(|_| s.next_batch().len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        assert_eq!(s.epoch(), 1);

        let mut whole = BatchSampler::new(&ds, Split::Train, 50, 3).unwrap();
        assert_eq!(whole.next_batch().len(), 10);
    }

    #[test]
    fn epoch_visits_every_record_once() {
        let ds = split(&toy(57), (0.6, 0.2, 0.2), 4).unwrap();
        let mut s = BatchSampler::new(&ds, Split::Train, 8, 11).unwrap();
        let mut seen = Vec::new();
        for _ in 0..s.batches_per_epoch() {
            let b = s.next_batch();
            assert!(b.indices.iter().all(|&i| ds.split_of(i) == Split::Train));
            seen.extend(b.indices);
        }
        let set: HashSet<usize> = seen.iter().copied().collect();
        assert_eq!(set.len(), seen.len());
        assert_eq!(set, ds.split_indices(Split::Train).into_iter().collect());
    }

    #[test]
    fn sampler_reproducible_and_rejects_empty() {
        let ds = toy(20);
        let mut a = BatchSampler::new(&ds, Split::Train, 3, 5).unwrap();
        let mut b = BatchSampler::new(&ds, Split::Train, 3, 5).unwrap();
        for _ in 0..10 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
        assert!(matches!(
            BatchSampler::new(&ds, Split::Test, 3, 5),
            Err(Error::EmptySplit("test"))
        ));
    }
}
