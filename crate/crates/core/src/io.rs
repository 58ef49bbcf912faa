//! File formats: grid-function CSV with a JSON sidecar, and JSON reports.
//!
//! The CSV carries one row per grid point with header `i1,...,id,value` (plus
//! an optional `weight` column), indices 0-based. The sidecar carries the box,
//! the breakpoints, and optionally a signature. Doubles are serialized with 17
//! significant digits in both formats, which round-trips IEEE-754 exactly.
//! Files are written atomically (temp file + rename) and deterministically:
//! rows in row-major order, JSON keys in fixed order.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cuboid, GridFunction, GridSpec};
use crate::lattice;
use crate::order::Signature;

/// Formats a double with 17 significant digits; parsing the result recovers
/// the original bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Fmt17;

impl serde_json::ser::Formatter for Fmt17 {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes any value to JSON with 17-significant-digit floats and a
/// trailing newline. Struct key order is declaration order, so output is
/// deterministic.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fmt17);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Writes bytes to `path` via a temp file in the same directory plus rename,
/// so readers never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp_path)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp_path, path)?;
    if let Some(d) = dir {
        // Persist the rename itself where the platform permits.
        if let Ok(dh) = fs::File::open(d) {
            let _ = dh.sync_all();
        }
    }
    Ok(())
}

/// Sidecar schema: geometry of the grid plus an optional signature, so a CSV
/// of indexed values is self-describing.
#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(rename = "box")]
    pub domain: BoxSpec,
    pub breakpoints: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Sidecar {
    pub fn from_grid(grid: &GridSpec, sig: Option<&Signature>) -> Self {
        Sidecar {
            domain: BoxSpec {
                lo: grid.domain().lo().to_vec(),
                hi: grid.domain().hi().to_vec(),
            },
            breakpoints: grid.breakpoints().to_vec(),
            signature: sig.map(|s| s.to_string()),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let domain = Cuboid::new(self.domain.lo.clone(), self.domain.hi.clone())?;
        GridSpec::from_breakpoints(domain, self.breakpoints.clone())
    }

    pub fn parsed_signature(&self) -> Result<Option<Signature>> {
        self.signature.as_deref().map(Signature::parse).transpose()
    }
}

pub fn write_sidecar(path: &Path, grid: &GridSpec, sig: Option<&Signature>) -> Result<()> {
    let text = to_json_string(&Sidecar::from_grid(grid, sig))?;
    atomic_write(path, text.as_bytes())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes one row per grid point, row-major, header `i1,...,id,value` with an
/// optional trailing `weight` column.
pub fn write_grid_csv(
    path: &Path,
    f: &GridFunction,
    w: Option<&GridFunction>,
) -> Result<()> {
    if let Some(wf) = w {
        f.same_grid(wf)?;
    }
    let grid = f.grid();
    let shape = grid.shape();
    let mut text = String::new();
    for axis in 0..grid.dim() {
        let _ = write!(text, "i{},", axis + 1);
    }
    text.push_str("value");
    if w.is_some() {
        text.push_str(",weight");
    }
    text.push('\n');
    let mut flat = 0usize;
    lattice::for_each_index(&shape, |idx| {
        for &k in idx {
            let _ = write!(text, "{k},");
        }
        text.push_str(&fmt_f64(f.values()[flat]));
        if let Some(wf) = w {
            text.push(',');
            text.push_str(&fmt_f64(wf.values()[flat]));
        }
        text.push('\n');
        flat += 1;
    });
    atomic_write(path, text.as_bytes())
}

/// A parsed grid-function file: values, optional weights, optional signature.
#[derive(Debug)]
pub struct GridData {
    pub f: GridFunction,
    pub w: Option<GridFunction>,
    pub signature: Option<Signature>,
}

/// Reads a CSV against its sidecar. Rows may come in any order but every grid
/// point must appear exactly once; failures carry the offending line number.
pub fn read_grid_data(csv_path: &Path, sidecar_path: &Path) -> Result<GridData> {
    let sidecar = read_sidecar(sidecar_path)?;
    let grid = sidecar.grid()?;
    let signature = sidecar.parsed_signature()?;
    let text = fs::read_to_string(csv_path)?;
    let (values, weights) = parse_csv(&text, &grid)?;
    let f = GridFunction::new(grid.clone(), values)?;
    let w = weights.map(|v| GridFunction::new(grid, v)).transpose()?;
    Ok(GridData { f, w, signature })
}

fn parse_csv(text: &str, grid: &GridSpec) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let dim = grid.dim();
    let n = grid.num_points();
    let shape = grid.shape();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::CsvFormat {
        line: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let expected_idx: Vec<String> = (1..=dim).map(|i| format!("i{i}")).collect();
    let has_weight = match cols.len() {
        l if l == dim + 1 => false,
        l if l == dim + 2 => true,
        _ => {
            return Err(Error::CsvFormat {
                line: 1,
                msg: format!(
                    "expected header `{},value[,weight]`, got `{header}`",
                    expected_idx.join(",")
                ),
            })
        }
    };
    for (col, want) in cols.iter().zip(&expected_idx) {
        if col != want {
            return Err(Error::CsvFormat {
                line: 1,
                msg: format!("expected index column `{want}`, got `{col}`"),
            });
        }
    }
    if cols[dim] != "value" || (has_weight && cols[dim + 1] != "weight") {
        return Err(Error::CsvFormat {
            line: 1,
            msg: format!("expected `value[,weight]` after index columns, got `{header}`"),
        });
    }

    let mut values = vec![0.0f64; n];
    let mut weights = if has_weight { Some(vec![0.0f64; n]) } else { None };
    let mut seen = vec![false; n];
    let mut idx = vec![0usize; dim];
    for (lineno0, row) in lines {
        let line = lineno0 + 1;
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::CsvFormat {
                line,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        for axis in 0..dim {
            let k: usize = fields[axis].parse().map_err(|_| Error::CsvFormat {
                line,
                msg: format!("index `{}` is not a nonnegative integer", fields[axis]),
            })?;
            if k >= shape[axis] {
                return Err(Error::CsvFormat {
                    line,
                    msg: format!(
                        "index {k} out of range on axis {} (grid has {} cells)",
                        axis + 1,
                        shape[axis]
                    ),
                });
            }
            idx[axis] = k;
        }
        let flat = grid.flat_index(&idx);
        if seen[flat] {
            return Err(Error::CsvFormat {
                line,
                msg: format!("duplicate row for grid point {idx:?}"),
            });
        }
        seen[flat] = true;
        values[flat] = parse_float(fields[dim], line)?;
        if let Some(w) = weights.as_mut() {
            w[flat] = parse_float(fields[dim + 1], line)?;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::CsvFormat {
            line: text.lines().count(),
            msg: format!(
                "grid point {:?} has no row ({} of {} points covered)",
                grid.multi_index(missing),
                seen.iter().filter(|&&s| s).count(),
                n
            ),
        });
    }
    Ok((values, weights))
}

fn parse_float(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::CsvFormat {
        line,
        msg: format!("`{field}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::CsvFormat {
            line,
            msg: format!("`{field}` is not finite"),
        });
    }
    Ok(v)
}
