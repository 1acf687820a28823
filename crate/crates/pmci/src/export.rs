//! Output files of a run.
//!
//! | file | content |
//! |---|---|
//! | `field.csv` | `s,t,v,phi,v_s,v_t,phi_t` on the seed lattice |
//! | `patches.json` | `{"generations": [...]}` with lattice, diamond templates and blocks |
//! | `defects.json` | one report per density step |
//! | `diagnostics.json` | items (a) to (f) and the residual battery |
//! | `curves.dat` | gnuplot blocks of `sigma`, `sigma*` and the sections of `K` and `U` |

use crate::density::{DefectReport, GenerationRecord, PatchedField};
use crate::engine::Diagnostics;
use crate::error::{Error, Result};
use crate::geometry::section_polylines;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const FIELD_FILE: &str = "field.csv";
pub const PATCH_FILE: &str = "patches.json";
pub const DEFECT_FILE: &str = "defects.json";
pub const DIAGNOSTIC_FILE: &str = "diagnostics.json";
pub const CURVE_FILE: &str = "curves.dat";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchFile {
    pub generations: Vec<GenerationRecord>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path.display().to_string(), e))?;
    finish(path, w)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_field(path: &Path, field: &PatchedField) -> Result<()> {
    let seed = &field.seed;
    let rows: Vec<Vec<String>> = (0..=seed.nt)
        .into_par_iter()
        .map(|j| {
            (0..=seed.ns)
                .map(|i| {
                    let (s, t) = (seed.s_node(i), seed.t_node(j));
                    let fp = field.sample(s, t)?;
                    let g = fp.grad;
                    Ok(format!("{s:e},{t:e},{:e},{:e},{:e},{:e},{:e}", fp.v, fp.phi, g.p, g.l, g.q_prime))
                })
                .collect::<Result<Vec<String>>>()
        })
        .collect::<Result<_>>()?;
    let mut w = create(path)?;
    let io = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "s,t,v,phi,v_s,v_t,phi_t").map_err(io)?;
    for line in rows.iter().flatten() {
        writeln!(w, "{line}").map_err(io)?;
    }
    finish(path, w)
}

pub fn write_patches(path: &Path, field: &PatchedField) -> Result<()> {
    let file = PatchFile {
        generations: field.generations.iter().map(|g| g.record()).collect(),
    };
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &file)?;
    writeln!(w).map_err(|e| Error::io(path.display().to_string(), e))?;
    finish(path, w)
}

pub fn write_curves(path: &Path, field: &PatchedField) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path.display().to_string(), e);
    let star = &field.sigma_star;
    let spec = &field.spec;
    let top = 1.5 * spec.lambda;
    writeln!(w, "# sigma: p sigma(p) sigma*(p)").map_err(io)?;
    for k in 0..=600 {
        let p = -top + 2.0 * top * k as f64 / 600.0;
        writeln!(w, "{p:e} {:e} {:e}", spec.flux.sigma(p), star.eval(p)).map_err(io)?;
    }
    let seed = &field.seed;
    for s in [seed.delta0, 0.5 * seed.radius, seed.radius - seed.delta0] {
        for (name, line) in section_polylines(spec, s, 400) {
            writeln!(w, "\n\n# {name} s={s:e}").map_err(io)?;
            for (p, q) in line {
                writeln!(w, "{p:e} {q:e}").map_err(io)?;
            }
        }
    }
    finish(path, w)
}

/// Writes the five output files into `dir` and returns their paths.
pub fn export_all(
    dir: &Path,
    field: &PatchedField,
    reports: &[DefectReport],
    diagnostics: &Diagnostics,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let paths: Vec<PathBuf> = [FIELD_FILE, PATCH_FILE, DEFECT_FILE, DIAGNOSTIC_FILE, CURVE_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_field(&paths[0], field)?;
    write_patches(&paths[1], field)?;
    write_json(&paths[2], &reports)?;
    write_json(&paths[3], diagnostics)?;
    write_curves(&paths[4], field)?;
    Ok(paths)
}

pub fn write_reports(path: &Path, reports: &[DefectReport]) -> Result<()> {
    write_json(path, &reports)
}

pub fn write_diagnostics(path: &Path, diagnostics: &Diagnostics) -> Result<()> {
    write_json(path, diagnostics)
}
