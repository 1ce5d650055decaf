use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde_json::json;
use tcadetect::analytic::{GaussianPart, Gx2Params, Gx2Term};
use tcadetect::detectors::DetectorSpec;
use tcadetect::experiments::{analytic_roc, distribution_overlay, theta_sweep, write_roc_csv, Overlay, OverlayOptions};
use tcadetect::signalmodel::Hypothesis;

use crate::args::{Gx2Args, RunArgs, ValidateArgs};
use crate::config::{load_scenario, ExperimentKind, Scenario};
use crate::error::{CliError, CliResult};
use crate::plot::{Plot, Series};

const DEFAULT_OUTPUT: &str = "out";

/// Seed of the H0 or H1 simulation of a run (splitmix64 of the run seed).
pub fn hypothesis_seed(seed: u64, hypothesis: Hypothesis) -> u64 {
    let mut z = seed.wrapping_add(match hypothesis {
        Hypothesis::H0 => 0x9e37_79b9_7f4a_7c15,
        Hypothesis::H1 => 0x3c6e_f372_fe94_f82a,
    });
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::invalid(format!("cannot create output directory '{}': {e}", dir.display())))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path)
            .map_err(|e| CliError::invalid(format!("cannot write '{}': {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_str(&mut self, name: &str, text: &str) -> CliResult<()> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }
}

fn with_context(e: tcadetect::Error, context: &str) -> CliError {
    let mut err = CliError::from(e);
    err.message = if err.code == 2 {
        format!("numerical failure ({context}): {}", err.message)
    } else {
        format!("{context}: {}", err.message)
    };
    err
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::invalid(format!("cannot start worker pool: {e}")))
}

fn prepare(args: &RunArgs, expected: ExperimentKind) -> CliResult<(Scenario, Outputs)> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let scenario = load_scenario(&args.config, &overrides)?;
    if scenario.kind != expected {
        return Err(CliError::invalid(format!(
            "experiment.kind: config describes a '{}' experiment, not '{}'",
            scenario.kind.name(),
            expected.name()
        )));
    }
    let dir = args
        .out
        .clone()
        .or_else(|| scenario.config.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    Ok((scenario, Outputs::new(dir)?))
}

fn write_manifest(out: &mut Outputs, command: &str, args: &RunArgs, scenario: &Scenario) -> CliResult<()> {
    let mut files = out.files.clone();
    files.sort();
    let manifest = json!({
        "tool": "tcadetect",
        "cli_version": env!("CARGO_PKG_VERSION"),
        "library_version": tcadetect::VERSION,
        "command": command,
        "config_path": args.config.display().to_string(),
        "overrides": args.overrides,
        "seed": scenario.seed(),
        "workers": args.workers,
        "plots": !args.no_plots,
        "config": scenario.config,
        "outputs": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::invalid(e.to_string()))?;
    out.write_str("manifest.json", &(text + "\n"))
}

pub fn run_dist(args: &RunArgs) -> CliResult<()> {
    let (scenario, mut out) = prepare(args, ExperimentKind::Dist)?;
    let signal = scenario
        .setup
        .synthesize(&scenario.covset)
        .map_err(|e| with_context(e, "signal"))?;
    let workers = pool(args.workers)?;
    let mut summary = Vec::new();
    for &kind in &scenario.detectors {
        let spec =
            DetectorSpec::prepare(kind, &scenario.covset, Some(&signal)).map_err(|e| with_context(e, &kind.label()))?;
        let mut overlays: Vec<Overlay> = Vec::new();
        for hyp in [Hypothesis::H0, Hypothesis::H1] {
            let opts = OverlayOptions {
                n_trials: scenario.trials(),
                seed: hypothesis_seed(scenario.seed(), hyp),
                workers: args.workers,
                grid_points: scenario.grid_points(),
            };
            let overlay = workers
                .install(|| distribution_overlay(&spec, &scenario.covset, Some(&signal), hyp, &opts))
                .map_err(|e| with_context(e, &format!("detector {kind}, {hyp}")))?;
            let stem = format!("overlay-{kind}-{hyp}");
            out.write(&format!("{stem}.csv"), |w| Ok(overlay.write_csv(w)?))?;
            if scenario.config.experiment.dump_samples {
                out.write(&format!("samples-{kind}-{hyp}.csv"), |w| {
                    Ok(overlay.empirical.write_csv(w)?)
                })?;
            }
            println!("{kind} {hyp} ks={:.5} trials={}", overlay.ks, overlay.empirical.len());
            summary.push((kind.label(), hyp, overlay.ks, overlay.empirical.len()));
            overlays.push(overlay);
        }
        if !args.no_plots {
            let mut series = Vec::new();
            for o in &overlays {
                let pts = |v: &[f64]| o.x.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
                series.push(Series::line(format!("{} analytic", o.hypothesis), pts(&o.analytic_cdf)));
                let mut emp = Series::line(format!("{} simulated", o.hypothesis), pts(&o.empirical_cdf));
                emp.dashed = true;
                series.push(emp);
            }
            let plot = Plot {
                title: format!("{kind}: CDF under H0 and H1"),
                x_label: "statistic".into(),
                y_label: "CDF".into(),
                log_x: false,
                series,
            };
            out.write_str(&format!("overlay-{kind}.svg"), &plot.to_svg())?;
        }
    }
    out.write("ks.csv", |w| {
        writeln!(w, "detector,hypothesis,ks,n_trials")?;
        for (d, h, ks, n) in &summary {
            writeln!(w, "{d},{h},{ks},{n}")?;
        }
        Ok(())
    })?;
    write_manifest(&mut out, "dist", args, &scenario)
}

pub fn run_roc(args: &RunArgs) -> CliResult<()> {
    let (scenario, mut out) = prepare(args, ExperimentKind::Roc)?;
    let signal = scenario
        .setup
        .synthesize(&scenario.covset)
        .map_err(|e| with_context(e, "signal"))?;
    let grid = scenario.pfa_grid();
    let workers = pool(args.workers)?;
    let mut curves = Vec::new();
    for &kind in &scenario.detectors {
        let spec =
            DetectorSpec::prepare(kind, &scenario.covset, Some(&signal)).map_err(|e| with_context(e, &kind.label()))?;
        let curve = workers
            .install(|| analytic_roc(&spec, &scenario.covset, Some(&signal), &grid, &scenario.label))
            .map_err(|e| with_context(e, &format!("ROC of {kind}")))?;
        curves.push(curve);
    }
    out.write("roc.csv", |w| Ok(write_roc_csv(w, &curves)?))?;
    for c in &curves {
        let last = c.points.last().map(|p| p.pd).unwrap_or(f64::NAN);
        println!("{} pd@pfa={:e}: {:.6}", c.detector, grid[0], c.points[0].pd);
        println!("{} pd@pfa={}: {:.6}", c.detector, grid[grid.len() - 1], last);
    }
    if !args.no_plots {
        let plot = Plot {
            title: format!("ROC ({})", scenario.label),
            x_label: "probability of false alarm".into(),
            y_label: "probability of detection".into(),
            log_x: true,
            series: curves
                .iter()
                .map(|c| {
                    let mut s = Series::line(c.detector.clone(), c.points.iter().map(|p| (p.pfa, p.pd)).collect());
                    s.markers = true;
                    s
                })
                .collect(),
        };
        out.write_str("roc.svg", &plot.to_svg())?;
    }
    write_manifest(&mut out, "roc", args, &scenario)
}

pub fn run_sweep(args: &RunArgs) -> CliResult<()> {
    let (scenario, mut out) = prepare(args, ExperimentKind::Sweep)?;
    let thetas = scenario.theta_grid();
    let result = pool(args.workers)?
        .install(|| {
            theta_sweep(
                &scenario.detectors,
                &scenario.covset,
                &scenario.setup,
                &thetas,
                scenario.fixed_pfa(),
            )
        })
        .map_err(|e| with_context(e, "theta_k sweep"))?;
    out.write("sweep.csv", |w| Ok(result.write_csv(w)?))?;
    for c in &result.curves {
        println!(
            "{} pd@theta_k={}: {:.6}  pd@theta_k={}: {:.6}",
            c.detector,
            thetas[0],
            c.pd[0],
            thetas[thetas.len() - 1],
            c.pd[c.pd.len() - 1]
        );
    }
    if !args.no_plots {
        let plot = Plot {
            title: format!("pd at pfa = {:e} ({})", result.fixed_pfa, scenario.label),
            x_label: "theta_k (rad per frequency bin)".into(),
            y_label: "probability of detection".into(),
            log_x: false,
            series: result
                .curves
                .iter()
                .map(|c| {
                    let mut s = Series::line(
                        c.detector.clone(),
                        thetas.iter().copied().zip(c.pd.iter().copied()).collect(),
                    );
                    s.markers = true;
                    s
                })
                .collect(),
        };
        out.write_str("sweep.svg", &plot.to_svg())?;
    }
    write_manifest(&mut out, "sweep", args, &scenario)
}

pub fn run_validate(args: &ValidateArgs) -> CliResult<()> {
    let s = load_scenario(&args.config, &args.overrides)?;
    let g = s.covset.grid();
    println!(
        "{}: ok ({} experiment, K={} T={} N_R={}, {} detector(s), scenario '{}')",
        args.config.display(),
        s.kind.name(),
        g.freq_bins(),
        g.time_samples(),
        g.antennas(),
        s.detectors.len(),
        s.label
    );
    Ok(())
}

/// Build the law described by `gx2` arguments. Missing dofs default to 1 and
/// missing non-centralities to 0.
pub fn gx2_params(args: &Gx2Args) -> CliResult<Gx2Params> {
    let n = args.weights.len();
    if !args.dofs.is_empty() && args.dofs.len() != n {
        return Err(CliError::invalid(format!(
            "--dofs has {} entries, --weights has {n}",
            args.dofs.len()
        )));
    }
    if !args.noncentralities.is_empty() && args.noncentralities.len() != n {
        return Err(CliError::invalid(format!(
            "--noncentralities has {} entries, --weights has {n}",
            args.noncentralities.len()
        )));
    }
    let terms = (0..n)
        .map(|i| Gx2Term {
            weight: args.weights[i],
            dof: args.dofs.get(i).copied().unwrap_or(1),
            noncentrality: args.noncentralities.get(i).copied().unwrap_or(0.0),
        })
        .collect();
    Ok(Gx2Params::new(
        terms,
        GaussianPart {
            mean: args.normal_mean,
            variance: args.normal_variance,
        },
    )?)
}

pub fn run_gx2(args: &Gx2Args, out: &mut dyn Write) -> CliResult<()> {
    let params = gx2_params(args)?;
    if args.x.is_empty() && args.p.is_empty() {
        return Err(CliError::invalid("gx2: give --x and/or --p"));
    }
    if !args.x.is_empty() {
        writeln!(out, "x,cdf")?;
        for &x in &args.x {
            writeln!(out, "{x},{}", params.cdf(x)?)?;
        }
    }
    if !args.p.is_empty() {
        writeln!(out, "p,quantile")?;
        for &p in &args.p {
            writeln!(out, "{p},{}", params.quantile(p)?)?;
        }
    }
    Ok(())
}
