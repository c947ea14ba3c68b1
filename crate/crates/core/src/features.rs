//! Dense node-feature matrices, label files, and train/val/test splits.
//!
//! On-disk feature files come in two shapes: whitespace text (one node per
//! line) and the `RMF1` binary layout (magic, u64 rows, u64 cols, then f32
//! entries row-major, all little-endian). In memory everything is f64.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"RMF1";

/// Row-major dense matrix of node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix { rows: n, cols: d, data })
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copies the given rows (in the order given) into a new matrix.
    pub fn gather_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::zeros(indices.len(), self.cols);
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// Side-by-side concatenation; all inputs must share the row count.
    pub fn hstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let rows = parts
            .first()
            .ok_or_else(|| Error::Param("hstack of zero matrices".into()))?
            .rows;
        if let Some(bad) = parts.iter().find(|m| m.rows != rows) {
            return Err(Error::Shape(format!(
                "hstack row mismatch: {} vs {rows}",
                bad.rows
            )));
        }
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out = FeatureMatrix::zeros(rows, cols);
        for i in 0..rows {
            let dst = out.row_mut(i);
            let mut at = 0usize;
            for m in parts {
                dst[at..at + m.cols].copy_from_slice(m.row(i));
                at += m.cols;
            }
        }
        Ok(out)
    }

    /// Writes the `RMF1` binary layout; entries are narrowed to f32.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf =
            Vec::with_capacity(FEATURE_MAGIC.len() + 16 + self.data.len() * 4);
        buf.extend_from_slice(FEATURE_MAGIC);
        buf.extend_from_slice(&(self.rows as u64).to_le_bytes());
        buf.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

fn read_binary_features(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix> {
    let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    if bytes.len() < 20 {
        return Err(bad("truncated binary feature file"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let need = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(20))
        .ok_or_else(|| bad("dimension overflow"))?;
    if bytes.len() != need {
        return Err(bad(&format!(
            "expected {need} bytes for {rows}x{cols}, found {}",
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in bytes[20..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(bad("non-finite feature entry"));
        }
        data.push(v as f64);
    }
    FeatureMatrix::from_vec(rows, cols, data)
}

fn read_text_features(path: &Path, text: &str) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("invalid number `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "{}:{line_no}: non-finite feature entry",
                    path.display()
                )));
            }
            row.push(v);
        }
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Shape(format!(
                    "{}:{line_no}: row has {} entries, expected {c}",
                    path.display(),
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "{}: empty feature file",
            path.display()
        )));
    }
    FeatureMatrix::from_rows(rows)
}

/// Loads features from either format, sniffing the `RMF1` magic.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(FEATURE_MAGIC) {
        read_binary_features(path, &bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Data(format!("{}: not UTF-8 text", path.display())))?;
        read_text_features(path, &text)
    }
}

/// Node labels plus disjoint train/val/test node-index sets.
///
/// Split vectors are kept sorted ascending; all downstream iteration orders
/// derive from that canonical order, not from file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSplit {
    labels: Vec<usize>,
    num_classes: usize,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

impl LabeledSplit {
    pub fn new(
        labels: Vec<usize>,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Data("empty label vector".into()));
        }
        let num_classes = labels.iter().max().unwrap() + 1;
        let n = labels.len();
        let canon = |name: &str, mut ixs: Vec<usize>| -> Result<Vec<usize>> {
            ixs.sort_unstable();
            for w in ixs.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::Split(format!(
                        "duplicate index {} in {name} set",
                        w[0]
                    )));
                }
            }
            if let Some(&ix) = ixs.iter().find(|&&ix| ix >= n) {
                return Err(Error::Split(format!(
                    "{name} index {ix} out of range for {n} labeled nodes"
                )));
            }
            Ok(ixs)
        };
        let train = canon("train", train)?;
        let val = canon("val", val)?;
        let test = canon("test", test)?;
        let mut seen = vec![0u8; n];
        for (name, set) in [("train", &train), ("val", &val), ("test", &test)] {
            for &ix in set.iter() {
                if seen[ix] != 0 {
                    return Err(Error::Split(format!(
                        "node {ix} appears in more than one split (second: {name})"
                    )));
                }
                seen[ix] = 1;
            }
        }
        Ok(LabeledSplit {
            labels,
            num_classes,
            train,
            val,
            test,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn val(&self) -> &[usize] {
        &self.val
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// Replaces the train set (used by label-budget thinning).
    pub fn with_train(&self, train: Vec<usize>) -> Result<Self> {
        LabeledSplit::new(
            self.labels.clone(),
            train,
            self.val.clone(),
            self.test.clone(),
        )
    }

    pub fn write_labels(&self, path: impl AsRef<Path>) -> Result<()> {
        write_index_lines(path, &self.labels)
    }
}

fn write_index_lines(path: impl AsRef<Path>, values: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes one node index per line, sorted order preserved from the slice.
pub fn write_index_file(path: impl AsRef<Path>, values: &[usize]) -> Result<()> {
    write_index_lines(path, values)
}

fn load_index_lines(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: usize = line
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("invalid index `{line}`")))?;
        out.push(v);
    }
    Ok(out)
}

/// Loads one label per line; `expected_n` must match the line count.
pub fn load_labels(path: impl AsRef<Path>, expected_n: usize) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let labels = load_index_lines(path)?;
    if labels.len() != expected_n {
        return Err(Error::Shape(format!(
            "{}: {} labels for {expected_n} nodes",
            path.display(),
            labels.len()
        )));
    }
    Ok(labels)
}

/// Loads labels plus the three split index files and validates them together.
pub fn load_labeled_split(
    labels_path: impl AsRef<Path>,
    train_path: impl AsRef<Path>,
    val_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
    expected_n: usize,
) -> Result<LabeledSplit> {
    let labels = load_labels(labels_path, expected_n)?;
    let train = load_index_lines(train_path.as_ref())?;
    let val = load_index_lines(val_path.as_ref())?;
    let test = load_index_lines(test_path.as_ref())?;
    LabeledSplit::new(labels, train, val, test)
}
