//! Phase-diagram sweeps over `(J2/|J1|, h/J2)`.
//!
//! Grid points run on a rayon pool and stream their rows to one writer
//! thread, which appends them to a JSON-lines checkpoint. A restarted sweep
//! reloads the checkpoint and only computes the missing points; every point
//! is seeded from its grid index, so the final table does not depend on how
//! often the sweep was interrupted.
//!
//! Zero-field points are diagonal in the sz basis and are solved by
//! enumeration, which also resolves their full degenerate ground manifold.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use super::classical::classical_ground_states;
use super::lanczos::{lanczos_ground_with, LanczosOptions};
use super::model::{build_spin_model, Tail};
use super::observables::{structure_factor, ZDistribution};
use super::EdError;

/// Fixed parameters shared by every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTemplate {
    pub j1: f64,
    pub n_spins: usize,
    pub r_max: usize,
    pub tail: Tail,
    /// Eigenpairs requested per point.
    pub k: usize,
    pub seed: u64,
    pub momenta: Vec<f64>,
}

impl Default for SweepTemplate {
    fn default() -> Self {
        SweepTemplate {
            j1: -1.0,
            n_spins: 16,
            r_max: 4,
            tail: Tail::Dipolar,
            k: 1,
            seed: 0,
            momenta: default_momenta(),
        }
    }
}

pub fn default_momenta() -> Vec<f64> {
    vec![0.0, PI / 4.0, PI / 2.0, PI]
}

/// Rectangular grid; point `index = i * h_over_j2.len() + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub j2_over_j1: Vec<f64>,
    pub h_over_j2: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl SweepGrid {
    pub fn linspace(ratio: (f64, f64, usize), field: (f64, f64, usize)) -> Self {
        SweepGrid { j2_over_j1: linspace(ratio.0, ratio.1, ratio.2), h_over_j2: linspace(field.0, field.1, field.2) }
    }

    pub fn len(&self) -> usize {
        self.j2_over_j1.len() * self.h_over_j2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, index: usize) -> (f64, f64) {
        let nh = self.h_over_j2.len();
        (self.j2_over_j1[index / nh], self.h_over_j2[index % nh])
    }
}

/// One grid point. Failed points keep `NaN` observables and the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub j2_over_j1: f64,
    pub h_over_j2: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub ground_energy: f64,
    pub degeneracy: usize,
    #[serde(deserialize_with = "nans_from_nulls")]
    pub structure: Vec<f64>,
    pub error: Option<String>,
}

// JSON has no NaN; serde_json writes it as null
fn nan_from_null<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nans_from_nulls<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    pub checkpoint: Option<PathBuf>,
}

fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Ground energy, degeneracy and raw structure factor at one point, with
/// `J2 = ratio |J1|` and `h = h_over_j2 J2`.
pub fn sweep_point(template: &SweepTemplate, ratio: f64, h_over_j2: f64, seed: u64) -> Result<(f64, usize, Vec<f64>), EdError> {
    let j2 = ratio * template.j1.abs();
    let h = h_over_j2 * j2;
    let model = build_spin_model(template.j1, j2, h, template.n_spins, template.r_max, template.tail)?;
    let (e0, degeneracy, dist) = if h == 0.0 {
        let (e0, states) = classical_ground_states(&model);
        (e0, states.len(), ZDistribution::uniform(model.n_spins(), &states))
    } else {
        let options = LanczosOptions { seed, ..LanczosOptions::default() };
        let result = lanczos_ground_with(&model, template.k, &options)?;
        (result.ground_energy(), result.ground_degeneracy(), ZDistribution::ground(&result))
    };
    Ok((e0, degeneracy, structure_factor(&dist, &template.momenta).raw))
}

fn compute_row(grid: &SweepGrid, template: &SweepTemplate, index: usize) -> SweepRow {
    let (ratio, field) = grid.point(index);
    let mut row = SweepRow {
        index,
        j2_over_j1: ratio,
        h_over_j2: field,
        ground_energy: f64::NAN,
        degeneracy: 0,
        structure: vec![f64::NAN; template.momenta.len()],
        error: None,
    };
    match sweep_point(template, ratio, field, point_seed(template.seed, index)) {
        Ok((e0, degeneracy, structure)) => {
            row.ground_energy = e0;
            row.degeneracy = degeneracy;
            row.structure = structure;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn io_error(e: impl std::fmt::Display) -> EdError {
    EdError::Io(e.to_string())
}

/// Rows already present in a checkpoint. A torn trailing line is dropped and
/// the file rewritten so later appends start on a clean line.
fn load_checkpoint(path: &Path, grid: &SweepGrid) -> Result<BTreeMap<usize, SweepRow>, EdError> {
    let mut rows = BTreeMap::new();
    if !path.exists() {
        return Ok(rows);
    }
    let text = fs::read_to_string(path).map_err(io_error)?;
    let mut torn = !text.is_empty() && !text.ends_with('\n');
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SweepRow>(line) {
            Ok(row) => {
                if row.index >= grid.len() || grid.point(row.index) != (row.j2_over_j1, row.h_over_j2) {
                    return Err(EdError::InvalidParameter(format!(
                        "checkpoint {} does not belong to this grid",
                        path.display()
                    )));
                }
                rows.insert(row.index, row);
            }
            Err(_) => torn = true,
        }
    }
    if torn {
        let mut text = String::new();
        for row in rows.values() {
            text.push_str(&serde_json::to_string(row).map_err(io_error)?);
            text.push('\n');
        }
        fs::write(path, text).map_err(io_error)?;
    }
    Ok(rows)
}

/// Runs every grid point not yet in the checkpoint and returns all rows
/// sorted by index. Per-point failures are recorded in their rows.
pub fn run_sweep(grid: &SweepGrid, template: &SweepTemplate, options: &SweepOptions) -> Result<Vec<SweepRow>, EdError> {
    let mut done = match &options.checkpoint {
        Some(path) => load_checkpoint(path, grid)?,
        None => BTreeMap::new(),
    };
    let pending: Vec<usize> = (0..grid.len()).filter(|i| !done.contains_key(i)).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(options.workers).build().map_err(io_error)?;
    let mut sink = match &options.checkpoint {
        Some(path) => Some(OpenOptions::new().create(true).append(true).open(path).map_err(io_error)?),
        None => None,
    };

    let (tx, rx) = mpsc::channel::<SweepRow>();
    let fresh = std::thread::scope(|scope| {
        let writer = scope.spawn(move || -> Result<Vec<SweepRow>, EdError> {
            let mut rows = Vec::new();
            for row in rx {
                if let Some(file) = sink.as_mut() {
                    let line = serde_json::to_string(&row).map_err(io_error)?;
                    writeln!(file, "{line}").and_then(|_| file.flush()).map_err(io_error)?;
                }
                rows.push(row);
            }
            Ok(rows)
        });
        pool.install(|| {
            pending.par_iter().for_each_with(tx, |tx, &index| {
                // a closed channel means the writer failed; its error is reported below
                let _ = tx.send(compute_row(grid, template, index));
            })
        });
        writer.join().expect("sweep writer panicked")
    })?;

    for row in fresh {
        done.insert(row.index, row);
    }
    Ok(done.into_values().collect())
}

/// Column label for a structure-factor momentum.
pub fn momentum_label(q: f64) -> String {
    if q.abs() < 1e-12 {
        return "S_q0".into();
    }
    let m = PI / q;
    if (m - m.round()).abs() < 1e-9 {
        match m.round() as i64 {
            1 => "S_qpi".into(),
            d => format!("S_qpi{d}"),
        }
    } else {
        format!("S_q{q:.6}")
    }
}

/// CSV table with 17 significant digits per number.
pub fn to_csv(rows: &[SweepRow], momenta: &[f64]) -> String {
    let mut out = String::from("j2_over_j1,h_over_j2,E0,degeneracy");
    for &q in momenta {
        out.push(',');
        out.push_str(&momentum_label(q));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e},{}", row.j2_over_j1, row.h_over_j2, row.ground_energy, row.degeneracy));
        for s in &row.structure {
            out.push_str(&format!(",{s:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// Sidecar describing how the table was produced.
pub fn metadata(grid: &SweepGrid, template: &SweepTemplate, rows: &[SweepRow]) -> serde_json::Value {
    let failures: Vec<_> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| serde_json::json!({ "index": r.index, "error": e })))
        .collect();
    serde_json::json!({
        "hamiltonian": "H = sum_j sum_{d=1}^{r_max} J(d) sz_j sz_{j+d} - h sum_j sx_j on a periodic ring",
        "axes": { "j2_over_j1": "J2 / |J1|", "h_over_j2": "h / J2" },
        "structure_factor": "raw S(q) = sum_{j,k} <sz_j sz_k> cos(q (j - k)), averaged over the ground cluster",
        "zero_field_points": "classical enumeration of the sz ground manifold",
        "template": template,
        "grid": grid,
        "lanczos": {
            "residual_tolerance": LanczosOptions::default().tolerance,
            "cluster_threshold": LanczosOptions::default().cluster_threshold,
        },
        "failures": failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_template() -> SweepTemplate {
        SweepTemplate { n_spins: 8, r_max: 4, ..SweepTemplate::default() }
    }

    #[test]
    fn labels() {
        let names: Vec<String> = default_momenta().into_iter().map(momentum_label).collect();
        assert_eq!(names, ["S_q0", "S_qpi4", "S_qpi2", "S_qpi"]);
    }

    #[test]
    fn single_point_matches_direct_call() {
        let grid = SweepGrid { j2_over_j1: vec![0.7], h_over_j2: vec![0.4] };
        let template = small_template();
        let rows = run_sweep(&grid, &template, &SweepOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        let (e0, g, s) = sweep_point(&template, 0.7, 0.4, point_seed(template.seed, 0)).unwrap();
        assert_eq!(rows[0].ground_energy, e0);
        assert_eq!(rows[0].degeneracy, g);
        assert_eq!(rows[0].structure, s);
    }

    #[test]
    fn resumed_sweep_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SweepGrid::linspace((0.2, 1.0, 3), (0.0, 1.0, 3));
        let template = small_template();
        let full = run_sweep(&grid, &template, &SweepOptions::default()).unwrap();

        let path = dir.path().join("points.jsonl");
        let options = SweepOptions { workers: 2, checkpoint: Some(path.clone()) };
        run_sweep(&grid, &template, &options).unwrap();
        // keep four complete rows plus half of a fifth, as if killed mid-write
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let mut partial = lines[..4].join("\n");
        partial.push('\n');
        partial.push_str(&lines[4][..lines[4].len() / 2]);
        fs::write(&path, partial).unwrap();

        let resumed = run_sweep(&grid, &template, &options).unwrap();
        assert_eq!(to_csv(&resumed, &template.momenta), to_csv(&full, &template.momenta));
        let reloaded = load_checkpoint(&path, &grid).unwrap();
        assert_eq!(reloaded.len(), grid.len());
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let grid = SweepGrid { j2_over_j1: vec![0.5], h_over_j2: vec![0.0, 1.0] };
        let template = SweepTemplate { n_spins: 7, ..small_template() };
        let rows = run_sweep(&grid, &template, &SweepOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error.is_some() && r.ground_energy.is_nan()));
        let line = serde_json::to_string(&rows[0]).unwrap();
        let back: SweepRow = serde_json::from_str(&line).unwrap();
        assert!(back.ground_energy.is_nan() && back.structure.iter().all(|s| s.is_nan()));
    }
}
