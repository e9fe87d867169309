use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use nalgebra::DMatrix;

use bispectral::analysis::{
    correlation_field, cross_correlation_field, estimate_pdf, total_sobol_functional, Observable,
};
use bispectral::flow::QoiLabel;
use bispectral::output_kle::compute_output_kle;
use bispectral::pipeline::{
    assign_split, build_surrogate, check_failure_budget, derive_seed, generate_samples, new_store,
    run_ensemble, screen_qoi, surrogate_error, EnsembleStore, PipelineConfig, PipelineManifest, Profile,
    SampleStatus, SurrogateChoice, SurrogateSnapshot,
};
use bispectral::quadrature::trapezoid_weights;
use bispectral::screening::ReducedSet;
use bispectral::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Parser)]
#[command(name = "bispectral", version, about = "Bispectral surrogates of a 1D hydrogen migration model")]
struct Cli {
    /// TOML file overriding the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ensemble store file.
    #[arg(long, global = true, default_value = "ensemble.bin")]
    store: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: ProfileArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the input samples and create the store.
    GenerateSamples {
        /// Replace an existing store.
        #[arg(long)]
        force: bool,
    },
    /// Run the forward solver on every pending sample.
    Simulate,
    /// Screen parameters for one output.
    Screen {
        #[arg(long)]
        qoi: String,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Output KLE spectrum of one output on the training samples.
    Kle {
        #[arg(long)]
        qoi: String,
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate and fit a surrogate.
    BuildSurrogate {
        #[arg(long)]
        qoi: String,
        /// Reduced set written by `screen`.
        #[arg(long)]
        kr: PathBuf,
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Candidate polynomial orders (default: config grid).
        #[arg(long, num_args = 1..)]
        nord: Vec<usize>,
        /// Candidate L1 budgets (default: config grid).
        #[arg(long, num_args = 1..)]
        tau: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistics of a surrogate.
    Analyze {
        #[arg(long)]
        surrogate: PathBuf,
        #[arg(long)]
        corr: bool,
        /// Second surrogate for cross-correlation.
        #[arg(long)]
        cross: Option<PathBuf>,
        #[arg(long)]
        sobol: bool,
        /// Observable: max, rise-time or first-above:<fraction>.
        #[arg(long)]
        pdf: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a surrogate at given parameters or on the validation split.
    Predict {
        #[arg(long)]
        surrogate: PathBuf,
        /// Whitespace-separated parameter vectors, one per line (full or reduced length).
        #[arg(long)]
        xi: Option<PathBuf>,
        /// Report the relative error on the store's validation samples.
        #[arg(long)]
        validate: bool,
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the store and manifest.
    Report {
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SolverFailureBudget { .. } => 3,
        Error::Io(_)
        | Error::EigenSolve(_)
        | Error::NonConvergence { .. }
        | Error::NonFiniteResidual { .. }
        | Error::TimeStepUnderflow { .. }
        | Error::CapillarySingularity(_)
        | Error::RegressionNonConvergence { .. } => 1,
        _ => 2,
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let profile = match cli.profile {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Paper => Profile::Paper,
    };
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_toml(profile, &fs::read_to_string(p)?)?,
        None => PipelineConfig::for_profile(profile),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `<store>.<label>.<suffix>` next to the store.
fn artifact(store: &Path, label: QoiLabel, suffix: &str) -> PathBuf {
    let mut s = store.as_os_str().to_owned();
    s.push(format!(".{}.{suffix}", label.name().replace('@', "_at_")));
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_reduced_set(path: &Path, set: &ReducedSet) -> Result<()> {
    let idx: Vec<String> = set.indices.iter().map(|j| (j + 1).to_string()).collect();
    write_text(path, &format!("# n_full {}\n{}\n", set.n_full, idx.join(" ")))
}

fn read_reduced_set(path: &Path) -> Result<ReducedSet> {
    let text = fs::read_to_string(path)?;
    let mut n_full = None;
    let mut indices = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix("# n_full") {
            n_full = Some(rest.trim().parse::<usize>().map_err(|_| Error::Format("bad n_full line".into()))?);
        } else if !line.trim_start().starts_with('#') {
            for tok in line.split_whitespace() {
                let j: usize = tok.parse().map_err(|_| Error::Format(format!("bad index '{tok}'")))?;
                if j == 0 {
                    return Err(Error::Format("reduced set indices are one-based".into()));
                }
                indices.push(j - 1);
            }
        }
    }
    let n_full = n_full.ok_or_else(|| Error::Format("reduced set file lacks '# n_full'".into()))?;
    indices.sort_unstable();
    indices.dedup();
    if indices.is_empty() || indices.last().is_some_and(|&j| j >= n_full) {
        return Err(Error::Format("reduced set is empty or out of range".into()));
    }
    Ok(ReducedSet { indices, n_full })
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{t}'"))))
                .collect()
        })
        .collect()
}

fn store_path(cli: &Cli, ensemble: &Option<PathBuf>) -> PathBuf {
    ensemble.clone().unwrap_or_else(|| cli.store.clone())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::GenerateSamples { force } => {
            let path = &cli.store;
            let mpath = PipelineManifest::path_for(path);
            if path.exists() && !force {
                let existing = EnsembleStore::read(path)?;
                let manifest = PipelineManifest::load_or_new(&mpath, &cfg.hash())?;
                if manifest.config_hash != cfg.hash() {
                    return Err(Error::Config(format!(
                        "{} was generated with a different config; use --force to replace it",
                        path.display()
                    )));
                }
                println!("{} already holds {} samples", path.display(), existing.n_samples());
                return Ok(());
            }
            let store = new_store(&cfg)?;
            store.write(path)?;
            let mut manifest = PipelineManifest {
                config_hash: cfg.hash(),
                ..Default::default()
            };
            manifest.record_stage("generate-samples", &[path.as_path()], format!("{} samples", store.n_samples()), || {
                let back = EnsembleStore::read(path)?;
                (back == store).then_some(()).ok_or_else(|| Error::Format("store read-back differs".into()))
            })?;
            manifest.save(&mpath)?;
            println!("wrote {} samples of {} parameters to {}", store.n_samples(), store.n_params, path.display());
        }
        Command::Simulate => {
            let path = &cli.store;
            let mpath = PipelineManifest::path_for(path);
            let mut store = EnsembleStore::read(path)?;
            let mut manifest = PipelineManifest::load_or_new(&mpath, &cfg.hash())?;
            let summary = run_ensemble(&mut store, &cfg)?;
            if store.split.is_none() {
                let split = assign_split(&mut store, &cfg)?;
                info!("split {} train / {} validate", split.train.len(), split.validate.len());
            }
            store.write(path)?;
            let budget = check_failure_budget(&store, cfg.ensemble.max_failure_fraction);
            let detail = format!(
                "{} completed, {} failed",
                store.count(SampleStatus::Completed),
                store.count(SampleStatus::Failed)
            );
            let checked = manifest.record_stage("simulate", &[path.as_path()], detail.clone(), || {
                budget?;
                let back = EnsembleStore::read(path)?;
                if back.count(SampleStatus::Pending) > 0 {
                    return Err(Error::Format("pending samples remain".into()));
                }
                Ok(())
            });
            manifest.save(&mpath)?;
            checked?;
            println!("solved {} samples this run ({} failed); store: {detail}", summary.attempted, summary.failed);
        }
        Command::Screen { qoi, tol, ensemble, out } => {
            let path = store_path(cli, ensemble);
            let label = QoiLabel::parse(qoi)?;
            let store = EnsembleStore::read(&path)?;
            let tol = tol.or(cfg.surrogate.screening_tol).unwrap_or(label.default_screening_tol());
            let report = screen_qoi(&store, label, tol)?;
            let out = out.clone().unwrap_or_else(|| artifact(&path, label, "screening.txt"));
            let kr = artifact(&path, label, "kr.txt");
            write_text(&out, &report.to_text())?;
            write_reduced_set(&kr, &report.reduced_set)?;
            let mpath = PipelineManifest::path_for(&path);
            let mut manifest = PipelineManifest::load_or_new(&mpath, &cfg.hash())?;
            let expect = report.reduced_set.clone();
            manifest.record_stage(&format!("screen:{}", label.name()), &[out.as_path(), kr.as_path()], format!("tol {tol}"), || {
                (read_reduced_set(&kr)? == expect).then_some(()).ok_or_else(|| Error::Format("reduced set read-back differs".into()))
            })?;
            manifest.save(&mpath)?;
            let one_based: Vec<usize> = report.reduced_set.indices.iter().map(|j| j + 1).collect();
            println!("{}: {} of {} parameters kept at tol {tol}: {:?}", label.name(), one_based.len(), store.n_params, one_based);
            println!("reduced set written to {}", kr.display());
        }
        Command::Kle { qoi, ensemble, out } => {
            let path = store_path(cli, ensemble);
            let label = QoiLabel::parse(qoi)?;
            let store = EnsembleStore::read(&path)?;
            let train = store
                .split
                .as_ref()
                .ok_or_else(|| Error::invalid("store has no split; run simulate first"))?
                .train
                .clone();
            let data = store.qoi_data(label, &train)?;
            let kle = compute_output_kle(&data.values, &trapezoid_weights(&data.abscissae), cfg.surrogate.truncation())?;
            let out = out.clone().unwrap_or_else(|| artifact(&path, label, "spectrum.txt"));
            write_text(&out, &kle.spectrum_text())?;
            let r5 = kle.rank_fractions.get(4).copied().unwrap_or(f64::NAN);
            println!("{}: N_qoi = {}, r_5 = {r5:.5}; spectrum written to {}", label.name(), kle.n_qoi, out.display());
        }
        Command::BuildSurrogate { qoi, kr, ensemble, nord, tau, out } => {
            let path = store_path(cli, ensemble);
            let label = QoiLabel::parse(qoi)?;
            let store = EnsembleStore::read(&path)?;
            let reduced = read_reduced_set(kr)?;
            let mut cfg = cfg.clone();
            if !nord.is_empty() {
                cfg.surrogate.orders = nord.clone();
            }
            if !tau.is_empty() {
                cfg.surrogate.taus = tau.clone();
            }
            cfg.validate()?;
            let (sur, cv) = build_surrogate(&store, label, &reduced, &cfg)?;
            let validate = store.split.as_ref().map(|s| s.validate.clone()).unwrap_or_default();
            let e_val = if validate.is_empty() {
                None
            } else {
                Some(surrogate_error(&store, label, &sur, &validate)?)
            };
            let out = out.clone().unwrap_or_else(|| artifact(&path, label, "surrogate.bin"));
            let snap = SurrogateSnapshot { label, surrogate: sur };
            snap.write(&out)?;
            let cv_path = artifact(&path, label, "cv.txt");
            write_text(&cv_path, &cv.to_text())?;
            let mpath = PipelineManifest::path_for(&path);
            let mut manifest = PipelineManifest::load_or_new(&mpath, &cfg.hash())?;
            let cv_error = cv.table.iter().map(|c| c.e_rel).fold(f64::INFINITY, f64::min);
            manifest.record_stage(&format!("build-surrogate:{}", label.name()), &[out.as_path(), cv_path.as_path()], "", || {
                (SurrogateSnapshot::read(&out)? == snap).then_some(()).ok_or_else(|| Error::Format("surrogate read-back differs".into()))
            })?;
            manifest.surrogates.insert(
                label.name(),
                SurrogateChoice {
                    screening_tol: cfg.surrogate.screening_tol.unwrap_or(label.default_screening_tol()),
                    reduced_set: reduced.indices.iter().map(|j| j + 1).collect(),
                    n_qoi: snap.surrogate.n_qoi(),
                    n_ord: cv.n_ord,
                    tau: cv.tau,
                    cv_error,
                    validation_error: e_val,
                },
            );
            manifest.save(&mpath)?;
            println!(
                "{}: N_qoi = {}, n_p = {}, N_ord = {}, tau = {}, CV e_rel = {cv_error:.4e}{}",
                label.name(),
                snap.surrogate.n_qoi(),
                reduced.len(),
                cv.n_ord,
                cv.tau,
                e_val.map(|e| format!(", validation e_rel = {e:.4e}")).unwrap_or_default()
            );
            println!("surrogate written to {}", out.display());
        }
        Command::Analyze { surrogate, corr, cross, sobol, pdf, out } => {
            if !corr && cross.is_none() && !sobol && pdf.is_none() {
                return Err(Error::invalid("choose at least one of --corr, --cross, --sobol, --pdf"));
            }
            let snap = SurrogateSnapshot::read(surrogate)?;
            let s = &snap.surrogate;
            fs::create_dir_all(out)?;
            let stem = snap.label.name().replace('@', "_at_");
            if *corr {
                let p = out.join(format!("{stem}.correlation.txt"));
                write_text(&p, &correlation_field(s).to_text())?;
                println!("correlation written to {}", p.display());
            }
            if let Some(other) = cross {
                let g = SurrogateSnapshot::read(other)?;
                let set = s.reduced_set.union(&g.surrogate.reduced_set)?;
                let order = s.basis.max_degree.max(g.surrogate.basis.max_degree);
                let field = cross_correlation_field(&s.lift(&set, order)?, &g.surrogate.lift(&set, order)?)?;
                let p = out.join(format!("{stem}.cross.{}.txt", g.label.name().replace('@', "_at_")));
                write_text(&p, &field.to_text())?;
                println!("cross-correlation written to {}", p.display());
            }
            if *sobol {
                let rep = total_sobol_functional(s, cfg.analysis.sobol_samples, derive_seed(cfg.seed, "sobol"))?;
                let p = out.join(format!("{stem}.sobol.txt"));
                write_text(&p, &rep.to_text(&s.reduced_set.indices))?;
                println!("total Sobol indices written to {}", p.display());
            }
            if let Some(name) = pdf {
                let obs: Observable = name.parse()?;
                let n = cfg.analysis.pdf_samples;
                let xi = generate_samples(derive_seed(cfg.seed, "pdf"), n, s.n_reduced());
                let mut values = Vec::with_capacity(n);
                for start in (0..n).step_by(10_000) {
                    let rows = 10_000.min(n - start);
                    let y = s.evaluate_many(&xi.rows(start, rows).into_owned())?;
                    for j in 0..rows {
                        if let Some(v) = obs.extract(&s.abscissae, y.column(j).as_slice()) {
                            values.push(v);
                        }
                    }
                }
                if values.len() < n {
                    warn!("observable undefined for {} of {n} draws", n - values.len());
                }
                let d = estimate_pdf(&values)?;
                let p = out.join(format!("{stem}.pdf.{}.txt", name.replace(':', "_")));
                write_text(&p, &d.to_text())?;
                println!("density of {name} written to {}", p.display());
            }
        }
        Command::Predict { surrogate, xi, validate, ensemble, out } => {
            let snap = SurrogateSnapshot::read(surrogate)?;
            let s = &snap.surrogate;
            if *validate {
                let path = store_path(cli, ensemble);
                let store = EnsembleStore::read(&path)?;
                let idx = store.split.as_ref().map(|sp| sp.validate.clone()).unwrap_or_default();
                if idx.is_empty() {
                    return Err(Error::invalid("store has no validation samples"));
                }
                let e = surrogate_error(&store, snap.label, s, &idx)?;
                println!("{}: e_rel = {e:.6e} over {} validation samples", snap.label.name(), idx.len());
            }
            if let Some(file) = xi {
                let rows = read_matrix(file)?;
                let mut reduced = DMatrix::zeros(rows.len(), s.n_reduced());
                for (r, v) in rows.iter().enumerate() {
                    let xr = if v.len() == s.reduced_set.n_full {
                        s.reduced_set.project(v)?
                    } else if v.len() == s.n_reduced() {
                        v.clone()
                    } else {
                        return Err(Error::DimensionMismatch {
                            expected: s.reduced_set.n_full,
                            actual: v.len(),
                        });
                    };
                    for (c, x) in xr.iter().enumerate() {
                        reduced[(r, c)] = *x;
                    }
                }
                let y = s.evaluate_many(&reduced)?;
                let mut text = String::from("# abscissa then one column per input row\n");
                for k in 0..s.n_abscissae() {
                    let row: Vec<String> = std::iter::once(s.abscissae[k])
                        .chain(y.row(k).iter().copied())
                        .map(|v| format!("{v:.10e}"))
                        .collect();
                    text.push_str(&row.join(" "));
                    text.push('\n');
                }
                match out {
                    Some(p) => write_text(p, &text)?,
                    None => print!("{text}"),
                }
            } else if !validate {
                return Err(Error::invalid("give --xi and/or --validate"));
            }
        }
        Command::Report { ensemble } => {
            let path = store_path(cli, ensemble);
            let store = EnsembleStore::read(&path)?;
            println!("store {}", path.display());
            println!(
                "  samples {} (N_p = {}), completed {}, failed {}, pending {}",
                store.n_samples(),
                store.n_params,
                store.count(SampleStatus::Completed),
                store.count(SampleStatus::Failed),
                store.count(SampleStatus::Pending)
            );
            if let Some(s) = &store.split {
                println!("  split {} train / {} validate", s.train.len(), s.validate.len());
            }
            let ok = store.indices_with(SampleStatus::Completed);
            if !ok.is_empty() {
                let worst = ok.iter().map(|&j| store.records[j].diagnostics.mass_balance_error.abs()).fold(0.0, f64::max);
                let secs: f64 = ok.iter().map(|&j| store.records[j].diagnostics.wall_seconds).sum();
                println!("  worst mass balance error {worst:.3e}, mean solve time {:.3} s", secs / ok.len() as f64);
            }
            for (j, r) in store.records.iter().enumerate().filter(|(_, r)| r.status == SampleStatus::Failed).take(10) {
                println!("  failed sample {j}: {}", r.diagnostics.message);
            }
            let mpath = PipelineManifest::path_for(&path);
            if mpath.exists() {
                let m = PipelineManifest::load(&mpath)?;
                if m.config_hash != cfg.hash() {
                    println!("  note: manifest was written under a different config");
                }
                print!("{}", m.to_text());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

