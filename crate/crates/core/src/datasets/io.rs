use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::Dataset;
use crate::numerics::Tensor;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"LTDS";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Header `f0,...,f{D-1},label`, one row per sample.
    Csv,
    /// `LTDS`, u16 version, u32 K/N/D, u32 counts, f64 features, u32 labels; all little-endian.
    Packed,
}

impl DataFormat {
    /// `.csv` means CSV, anything else the packed format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Packed,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "bin" | "packed" | "packed-binary" => Ok(DataFormat::Packed),
            other => Err(Error::InvalidConfig(format!("unknown data format `{other}`"))),
        }
    }
}

/// Load a dataset. For CSV input the class count is `num_classes` when
/// given (labels must be below it), otherwise one more than the largest label.
pub fn load_dataset(path: &Path, format: DataFormat, num_classes: Option<usize>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        DataFormat::Csv => read_csv(BufReader::new(file), num_classes),
        DataFormat::Packed => {
            let mut bytes = Vec::new();
            BufReader::new(file)
                .read_to_end(&mut bytes)
                .map_err(|e| Error::io(path, e))?;
            let d = read_packed(&bytes)?;
            if let Some(k) = num_classes {
                if k != d.num_classes() {
                    return Err(Error::InvalidDataset(format!(
                        "file declares {} classes, expected {k}",
                        d.num_classes()
                    )));
                }
            }
            Ok(d)
        }
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        DataFormat::Csv => write_csv(dataset, &mut w),
        DataFormat::Packed => write_packed(dataset, &mut w),
    }
    .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Floats are written with Rust's shortest round-trip formatting, so a
/// save/load cycle is bit-exact.
pub fn write_csv<W: Write>(dataset: &Dataset, w: &mut W) -> std::io::Result<()> {
    let header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
    writeln!(w, "{},label", header.join(","))?;
    for i in 0..dataset.len() {
        for v in dataset.features().row(i) {
            write!(w, "{v},")?;
        }
        writeln!(w, "{}", dataset.labels()[i])?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(reader: R, num_classes: Option<usize>) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let dim = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?;
            let cols: Vec<&str> = line.trim().split(',').map(str::trim).collect();
            let expected: Vec<String> = (0..cols.len().saturating_sub(1)).map(|j| format!("f{j}")).collect();
            if cols.len() < 2 || cols.last() != Some(&"label") || cols[..cols.len() - 1] != expected[..] {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `f0,...,f{{D-1}},label`, got `{line}`"),
                });
            }
            cols.len() - 1
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    };

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != dim + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} columns, found {}", dim + 1, cols.len()),
            });
        }
        for c in &cols[..dim] {
            let v: f64 = c.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("`{c}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite feature `{c}`"),
                });
            }
            features.push(v);
        }
        let label: usize = cols[dim].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("label `{}` is not a non-negative integer", cols[dim]),
        })?;
        if let Some(k) = num_classes {
            if label >= k {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("label {label} out of range for {k} classes"),
                });
            }
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Dataset::new(Tensor::new(vec![labels.len(), dim], features)?, labels, k)
}

fn u32_of(v: usize, what: &str) -> std::io::Result<u32> {
    u32::try_from(v).map_err(|_| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("{what} exceeds u32"))
    })
}

pub fn write_packed<W: Write>(dataset: &Dataset, w: &mut W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32_of(dataset.num_classes(), "class count")?.to_le_bytes())?;
    w.write_all(&u32_of(dataset.len(), "sample count")?.to_le_bytes())?;
    w.write_all(&u32_of(dataset.dim(), "dimension")?.to_le_bytes())?;
    for &c in dataset.class_counts() {
        w.write_all(&u32_of(c, "class size")?.to_le_bytes())?;
    }
    for v in dataset.features().data() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &y in dataset.labels() {
        w.write_all(&u32_of(y, "label")?.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!("truncated while reading {what}"))),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_packed(bytes: &[u8]) -> Result<Dataset> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected LTDS".into()));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let k = c.u32("class count")?;
    let n = c.u32("sample count")?;
    let d = c.u32("dimension")?;
    if n == 0 || d == 0 {
        return Err(Error::Format("empty dataset".into()));
    }
    let counts = (0..k).map(|_| c.u32("class counts")).collect::<Result<Vec<_>>>()?;
    let features = (0..n * d).map(|_| c.f64("features")).collect::<Result<Vec<_>>>()?;
    let labels = (0..n).map(|_| c.u32("labels")).collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let ds = Dataset::new(Tensor::new(vec![n, d], features)?, labels, k)
        .map_err(|e| Error::Format(e.to_string()))?;
    if ds.class_counts() != counts.as_slice() {
        return Err(Error::Format("stored class counts disagree with labels".into()));
    }
    Ok(ds)
}
