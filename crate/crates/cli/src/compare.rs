//! Numeric diffing of two run directories.
//!
//! Text reports are compared token by token (numeric tokens within the
//! tolerance, everything else exactly). Field files on the same grid
//! compare by sup distance; across resolutions the finer grid is
//! subsampled onto the coarser nodes when they nest, so a resolution
//! ladder diffs down to its convergence error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use kslab_core::field::ScalarField;

use crate::runner::read_manifest;

#[derive(Debug, Clone)]
pub enum FileDiff {
    /// Byte-identical.
    Equal,
    /// Numerically compared: largest difference and count beyond tolerance.
    Numeric { max_diff: f64, beyond_tol: usize },
    /// Shapes do not line up (different token layout, non-nesting grids).
    Incomparable(String),
}

#[derive(Debug, Default)]
pub struct DiffSummary {
    pub files: Vec<(String, FileDiff)>,
    /// Files present on only one side.
    pub missing: Vec<String>,
    pub tol: f64,
}

impl DiffSummary {
    /// True when every file matched within tolerance.
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
            && self.files.iter().all(|(_, d)| match d {
                FileDiff::Equal => true,
                FileDiff::Numeric { beyond_tol, .. } => *beyond_tol == 0,
                FileDiff::Incomparable(_) => false,
            })
    }

    pub fn render(&self) -> String {
        let identical = self.missing.is_empty()
            && self.files.iter().all(|(_, d)| {
                matches!(d, FileDiff::Equal)
                    || matches!(
                        d,
                        FileDiff::Numeric {
                            max_diff: 0.0,
                            beyond_tol: 0
                        }
                    )
            });
        if identical {
            return "no differences\n".to_string();
        }
        let mut out = String::new();
        for m in &self.missing {
            let _ = writeln!(out, "missing on one side: {m}");
        }
        for (path, diff) in &self.files {
            match diff {
                FileDiff::Equal => {}
                FileDiff::Numeric {
                    max_diff,
                    beyond_tol,
                } if *beyond_tol > 0 => {
                    let _ = writeln!(
                        out,
                        "{path}: {beyond_tol} value(s) beyond tol {:.3e}, max diff {max_diff:.6e}",
                        self.tol
                    );
                }
                FileDiff::Numeric { max_diff, .. } => {
                    if *max_diff > 0.0 {
                        let _ = writeln!(out, "{path}: within tol, max diff {max_diff:.6e}");
                    }
                }
                FileDiff::Incomparable(why) => {
                    let _ = writeln!(out, "{path}: incomparable ({why})");
                }
            }
        }
        if out.is_empty() {
            out = format!("all differences within tol {:.3e}\n", self.tol);
        }
        out
    }
}

fn list_relative(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fn walk(dir: &Path, base: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, base, out)?;
            } else {
                out.push(path.strip_prefix(base).expect("under base").to_path_buf());
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    Ok(files)
}

fn tokens(line: &str) -> Vec<&str> {
    line.split([',', ' ', '\t'])
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Token-wise text diff: numeric tokens within `tol`, others exactly.
fn diff_text(a: &str, b: &str, tol: f64) -> FileDiff {
    let lines_a: Vec<&str> = a.lines().collect();
    let lines_b: Vec<&str> = b.lines().collect();
    if lines_a.len() != lines_b.len() {
        return FileDiff::Incomparable(format!("{} vs {} lines", lines_a.len(), lines_b.len()));
    }
    let mut max_diff = 0.0_f64;
    let mut beyond = 0usize;
    for (ra, rb) in lines_a.iter().zip(&lines_b) {
        let ta = tokens(ra);
        let tb = tokens(rb);
        if ta.len() != tb.len() {
            return FileDiff::Incomparable("token layout differs".into());
        }
        for (ca, cb) in ta.iter().zip(&tb) {
            match (ca.parse::<f64>(), cb.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    let d = (x - y).abs();
                    max_diff = max_diff.max(d);
                    if d > tol {
                        beyond += 1;
                    }
                }
                _ => {
                    if ca != cb {
                        beyond += 1;
                        max_diff = f64::INFINITY;
                    }
                }
            }
        }
    }
    FileDiff::Numeric {
        max_diff,
        beyond_tol: beyond,
    }
}

/// Restrict the finer of two nesting grids onto the coarser one.
fn subsample_to(coarse: &ScalarField, fine: &ScalarField) -> Option<ScalarField> {
    let (gc, gf) = (coarse.grid(), fine.grid());
    if gc.dim != gf.dim || (gc.half_length - gf.half_length).abs() > 1e-12 || gf.n[0] % gc.n[0] != 0
    {
        return None;
    }
    let stride = gf.n[0] / gc.n[0];
    let mut values = Vec::with_capacity(gc.len());
    for iy in 0..gc.n[1] {
        for ix in 0..gc.n[0] {
            values.push(fine.as_slice()[(iy * stride) * gf.n[0] + ix * stride]);
        }
    }
    ScalarField::from_values(*gc, values).ok()
}

fn diff_fields(a: &ScalarField, b: &ScalarField, tol: f64) -> FileDiff {
    let (fa, fb) = if a.grid().len() <= b.grid().len() {
        (a.clone(), b)
    } else {
        (b.clone(), a)
    };
    let fb_on_a = if fa.grid() == fb.grid() {
        fb.clone()
    } else {
        match subsample_to(&fa, fb) {
            Some(f) => f,
            None => return FileDiff::Incomparable("grids do not nest".into()),
        }
    };
    match fa.sup_distance(&fb_on_a) {
        Ok(d) => FileDiff::Numeric {
            max_diff: d,
            beyond_tol: usize::from(d > tol),
        },
        Err(_) => FileDiff::Incomparable("grid mismatch".into()),
    }
}

/// Compare two run directories report by report. Errors when the manifests
/// describe different experiment kinds.
pub fn compare_dirs(dir1: &Path, dir2: &Path, tol: f64) -> anyhow::Result<DiffSummary> {
    let m1 = read_manifest(dir1)?;
    let m2 = read_manifest(dir2)?;
    if m1.kind != m2.kind {
        bail!("incompatible experiment kinds: {} vs {}", m1.kind, m2.kind);
    }
    let mut summary = DiffSummary {
        tol,
        ..Default::default()
    };
    let files1 = list_relative(dir1)?;
    let files2 = list_relative(dir2)?;
    for f in files1.iter().filter(|f| !files2.contains(f)) {
        summary
            .missing
            .push(format!("{} (only in {})", f.display(), dir1.display()));
    }
    for f in files2.iter().filter(|f| !files1.contains(f)) {
        summary
            .missing
            .push(format!("{} (only in {})", f.display(), dir2.display()));
    }
    for rel in files1.iter().filter(|f| files2.contains(f)) {
        if rel == Path::new("manifest.json") {
            continue;
        }
        let p1 = dir1.join(rel);
        let p2 = dir2.join(rel);
        let name = rel.to_string_lossy().into_owned();
        let raw1 = std::fs::read(&p1).with_context(|| name.clone())?;
        let raw2 = std::fs::read(&p2).with_context(|| name.clone())?;
        if raw1 == raw2 {
            summary.files.push((name, FileDiff::Equal));
            continue;
        }
        let diff = match rel.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") | Some("json") => {
                let a = String::from_utf8_lossy(&raw1);
                let b = String::from_utf8_lossy(&raw2);
                diff_text(&a, &b, tol)
            }
            Some("bin") => {
                match (
                    ScalarField::read_binary(&mut raw1.as_slice()),
                    ScalarField::read_binary(&mut raw2.as_slice()),
                ) {
                    (Ok(fa), Ok(fb)) => diff_fields(&fa, &fb, tol),
                    _ => FileDiff::Incomparable("unreadable field file".into()),
                }
            }
            _ => FileDiff::Incomparable("binary contents differ".into()),
        };
        summary.files.push((name, diff));
    }
    Ok(summary)
}
