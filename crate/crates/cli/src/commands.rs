//! One function per subcommand. Each writes its files into the output
//! directory and returns their names.

use std::fmt::Write as _;
use std::path::Path;

use ionladder::ed::sweep::{self, run_sweep, SweepOptions, SweepTemplate};
use ionladder::ed::{
    build_spin_model, geometry_model, lanczos_ground_with, local_observables, structure_factor, LanczosOptions,
    SpinModel, ZDistribution,
};
use ionladder::lightforce::{commensurate_kx, dipolar_couplings, dipolar_strength, exact_couplings, validity_check};
use ionladder::phonons::branch_report;
use ionladder::spinphonon::{evolve_effective, evolve_full_with, FullOptions, SpinConfig, TruncatedHilbertSpace};
use ionladder::{find_equilibrium, normal_modes, CouplingMatrix, IonCrystal, LaserConfig, PhononSpectrum};
use serde_json::json;

use crate::config::{ModelKind, RunConfig};
use crate::CliError;

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn file(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        self.file(name, &(serde_json::to_string_pretty(value).expect("json serializes") + "\n"))
    }
}

/// Full double precision, as everywhere in CSV output.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn dispatch(command: &str, config: &RunConfig, dir: &Path, workers: usize) -> Result<Vec<String>, CliError> {
    let mut w = Writer { dir, written: Vec::new() };
    match command {
        "crystal" => crystal(config, &mut w)?,
        "modes" => modes(config, &mut w)?,
        "couplings" => couplings(config, &mut w)?,
        "validate" => validate(config, &mut w)?,
        "dynamics" => dynamics(config, &mut w)?,
        "ed" => ed(config, &mut w)?,
        "sweep" => sweep_command(config, &mut w, workers)?,
        other => return Err(CliError::Config(format!("unknown command `{other}`"))),
    }
    Ok(w.written)
}

fn build_crystal(config: &RunConfig) -> Result<IonCrystal, CliError> {
    Ok(find_equilibrium(&config.trap()?, config.seed)?)
}

fn build_laser(config: &RunConfig, crystal: &IonCrystal) -> Result<LaserConfig, CliError> {
    let section = config.laser_section()?;
    let kx = match (section.kx, section.kx_pair) {
        (Some(kx), _) => kx,
        (None, Some(pair)) => commensurate_kx(crystal, pair, 1)? * section.kx_harmonic,
        (None, None) => unreachable!("validated"),
    };
    Ok(section.resolve(kx))
}

fn setup(config: &RunConfig) -> Result<(IonCrystal, PhononSpectrum, LaserConfig), CliError> {
    let crystal = build_crystal(config)?;
    let spectrum = normal_modes(&crystal)?;
    let laser = build_laser(config, &crystal)?;
    Ok((crystal, spectrum, laser))
}

fn crystal(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let crystal = build_crystal(config)?;
    let mut csv = String::from("ion,x,y,z\n");
    for (j, r) in crystal.positions().iter().enumerate() {
        writeln!(csv, "{},{},{},{}", j + 1, num(r.x), num(r.y), num(r.z)).unwrap();
    }
    w.file("positions.csv", &csv)?;
    w.json(
        "crystal.json",
        &json!({
            "trap": crystal.trap(),
            "structure": crystal.structure(),
            "energy": crystal.energy(),
            "residual_gradient_norm": crystal.residual_gradient_norm(),
        }),
    )?;
    println!("{:?} crystal of {} ions, energy {:.12}", crystal.structure(), crystal.n_ions(), crystal.energy());
    Ok(())
}

fn modes(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let spectrum = normal_modes(&build_crystal(config)?)?;
    let mut freq = String::from("mode,branch,frequency\n");
    let mut amp = String::from("mode,ion,x,y,z\n");
    for (m, (f, b)) in spectrum.frequencies.iter().zip(&spectrum.branches).enumerate() {
        writeln!(freq, "{m},{b:?},{}", num(*f)).unwrap();
        for j in 0..spectrum.n_ions() {
            let a = |axis| num(spectrum.amplitude(j, axis, m));
            writeln!(amp, "{m},{},{},{},{}", j + 1, a(0), a(1), a(2)).unwrap();
        }
    }
    w.file("frequencies.csv", &freq)?;
    w.file("amplitudes.csv", &amp)?;
    println!("{} modes written", spectrum.n_modes());
    Ok(())
}

fn matrix_rows(c: &CouplingMatrix) -> Vec<Vec<f64>> {
    c.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn couplings(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let (crystal, spectrum, laser) = setup(config)?;
    let exact = exact_couplings(&crystal, &spectrum, &laser)?;
    let dipolar = dipolar_couplings(&crystal, &laser)?;
    let n = crystal.n_ions();
    let mut pairs = String::from("j,k,exact,dipolar\n");
    for j in 0..n {
        for k in (j + 1)..n {
            writeln!(pairs, "{},{},{},{}", j + 1, k + 1, num(exact.get(j, k)), num(dipolar.get(j, k))).unwrap();
        }
    }
    w.file("couplings.csv", &pairs)?;
    // central ion j0 = N/2, counted from one
    let centre = (n / 2).saturating_sub(1);
    let mut neighbours = String::from("k,d,exact,dipolar\n");
    for k in (0..n).filter(|&k| k != centre) {
        let d = k as i64 - centre as i64;
        writeln!(neighbours, "{},{d},{},{}", k + 1, num(exact.get(centre, k)), num(dipolar.get(centre, k))).unwrap();
    }
    w.file("neighbours.csv", &neighbours)?;
    w.json(
        "couplings.json",
        &json!({
            "laser": laser,
            "central_ion": centre + 1,
            "j_eff": dipolar_strength(&laser, crystal.trap().alpha_y)?,
            "exact": matrix_rows(&exact),
            "dipolar": matrix_rows(&dipolar),
        }),
    )?;
    println!("max |J| exact {:.6e}, dipolar {:.6e}", exact.max_abs(), dipolar.max_abs());
    Ok(())
}

fn validate(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let (_, spectrum, laser) = setup(config)?;
    let report = validity_check(&spectrum, &laser);
    let branches = branch_report(&spectrum, laser.beat);
    for (name, m) in [("carrier", report.carrier), ("planar", report.planar), ("perturbative", report.perturbative)] {
        println!("{} {name}: ratio {:.6e}", if m.passed { "PASS" } else { "FAIL" }, m.ratio);
    }
    w.json("validity.json", &json!({ "laser": laser, "report": report, "branches": branches }))?;
    Ok(())
}

fn dynamics(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let (crystal, spectrum, laser) = setup(config)?;
    let section = config.dynamics()?;
    let initial: SpinConfig = section.initial.parse()?;
    let j_eff = dipolar_strength(&laser, crystal.trap().alpha_y)?;
    let t_max = section.t_max.unwrap_or(5.0 / j_eff);
    let space = TruncatedHilbertSpace::new(&spectrum, &laser, section.max_total_phonons)?;
    let options = FullOptions { propagator: section.propagator, ..FullOptions::default() };
    let full = evolve_full_with(&space, &initial.0, t_max, section.dt_out, &options)?;
    w.file("full.csv", &full.to_csv())?;
    let mut summary = json!({
        "laser": laser,
        "j_eff": j_eff,
        "t_max": t_max,
        "dimension": space.dimension(),
        "leakage": full.leakage,
        "norm_drift": full.norm_drift(),
    });
    if section.compare_effective {
        let couplings = exact_couplings(&crystal, &spectrum, &laser)?;
        let effective = evolve_effective(&couplings, 0.0, &initial.0, t_max, section.dt_out)?;
        w.file("effective.csv", &effective.to_csv())?;
        let deviation = full.max_deviation(&effective);
        summary["max_deviation"] = json!(deviation);
        summary["couplings"] = json!(matrix_rows(&couplings));
        println!("max |full - effective| = {deviation:.6}");
    }
    w.json("dynamics.json", &summary)?;
    println!("{} output times up to t = {t_max:.6e}", full.times.len());
    Ok(())
}

fn spin_model(config: &RunConfig) -> Result<SpinModel, CliError> {
    let ed = config.ed()?;
    Ok(match ed.model {
        ModelKind::Parametric => build_spin_model(ed.j1, ed.j2, ed.h, ed.n_spins, ed.r_max, ed.tail)?,
        ModelKind::Geometry => {
            let (crystal, spectrum, laser) = setup(config)?;
            geometry_model(&exact_couplings(&crystal, &spectrum, &laser)?, ed.h, ed.n_spins, ed.r_max)?
        }
    })
}

fn ed(config: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let section = config.ed()?;
    let model = spin_model(config)?;
    let options = LanczosOptions { seed: config.seed, ..LanczosOptions::default() };
    let result = lanczos_ground_with(&model, section.k, &options)?;
    let dist = ZDistribution::from(&result);
    let local = local_observables(&dist);
    let sf = structure_factor(&dist, &section.momenta);

    let mut spectrum = String::from("index,energy,residual\n");
    for (i, (e, r)) in result.values.iter().zip(&result.residuals).enumerate() {
        writeln!(spectrum, "{i},{},{}", num(*e), num(*r)).unwrap();
    }
    w.file("spectrum.csv", &spectrum)?;
    let mut obs = String::from("site,m_z,p_excited\n");
    for (j, (m, p)) in local.magnetization.iter().zip(&local.excitation_probability).enumerate() {
        writeln!(obs, "{},{},{}", j + 1, num(*m), num(*p)).unwrap();
    }
    w.file("observables.csv", &obs)?;
    let mut corr = String::from("j,k,czz\n");
    let n = model.n_spins();
    for j in 0..n {
        for k in 0..n {
            writeln!(corr, "{},{},{}", j + 1, k + 1, num(local.correlations[(j, k)])).unwrap();
        }
    }
    w.file("correlations.csv", &corr)?;
    let mut structure = String::from("q,raw,normalized\n");
    for ((q, r), s) in sf.momenta.iter().zip(&sf.raw).zip(&sf.normalized) {
        writeln!(structure, "{},{},{}", num(*q), num(*r), num(*s)).unwrap();
    }
    w.file("structure.csv", &structure)?;
    w.json(
        "ed.json",
        &json!({
            "n_spins": n,
            "coupling_table": model.coupling_table(),
            "field": model.field(),
            "source": format!("{:?}", model.source()),
            "ground_energy": result.ground_energy(),
            "degeneracy": result.ground_degeneracy(),
        }),
    )?;
    println!("E0 = {:.12}, degeneracy {}", result.ground_energy(), result.ground_degeneracy());
    Ok(())
}

fn sweep_command(config: &RunConfig, w: &mut Writer, workers: usize) -> Result<(), CliError> {
    let ed = config.ed()?;
    let grid = config.sweep()?.grid();
    let template = SweepTemplate {
        j1: ed.j1,
        n_spins: ed.n_spins,
        r_max: ed.r_max,
        tail: ed.tail,
        k: ed.k,
        seed: config.seed,
        momenta: ed.momenta.clone(),
    };
    let checkpoint = w.dir.join("sweep.jsonl");
    let options = SweepOptions { workers, checkpoint: Some(checkpoint) };
    let rows = run_sweep(&grid, &template, &options)?;
    w.written.push("sweep.jsonl".into());
    w.file("sweep.csv", &sweep::to_csv(&rows, &template.momenta))?;
    w.json("sweep.json", &sweep::metadata(&grid, &template, &rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} points, {failed} failed", rows.len());
    Ok(())
}
