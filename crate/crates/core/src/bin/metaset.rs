//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metaset::expr::{read_catalog, LevelSetExpr};
use metaset::formats::{self, Manifest};
use metaset::mech::{experiment_mbb, gen2d_dataset, GaConfig, Gen2dConfig, NamedSubset};
use metaset::metrics::{KernelKind, SimilarityKernel};
use metaset::pipeline::{
    at, generate_families, load_planar_cells, manifest_kernel, read_problem, run_pipeline, score_csv, score_report,
    select_weighted, write_dataset, write_planar_dataset, ArtifactWriter, ErrorClass, KernelSpace, PipelineConfig,
    PipelineError, SelectionRecord,
};
use metaset::isogen::FamilyConfig;
use metaset::seed;

#[derive(Parser)]
#[command(name = "metaset", version, about = "Diverse subset selection for metamaterial unit cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and evaluate level-set expressions.
    #[command(subcommand)]
    Expr(ExprCmd),
    /// Generate unit-cell datasets.
    #[command(subcommand)]
    Isogen(IsogenCmd),
    /// Build similarity kernels.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Greedy diverse subset selection on a joint kernel.
    Select(SelectCmd),
    /// Aperiodic assembly design.
    #[command(subcommand)]
    Design(DesignCmd),
    /// Run every stage from a JSON configuration.
    Pipeline(PipelineArgs),
    /// Score selections against random subsets.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum ExprCmd {
    /// Evaluate an expression at a point of the unit cell.
    Eval {
        /// Expression over X, Y, Z, e.g. "cos(X)+cos(Y)+cos(Z)".
        #[arg(long)]
        expr: String,
        /// Cell coordinates in [0, 1), comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum IsogenCmd {
    /// Screen and sample 3D families, writing cells, clouds and a manifest.
    Build {
        /// Catalog file with `family_id | expression | form` lines.
        #[arg(long)]
        catalog: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Samples per retained family.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Surface points per sample.
        #[arg(long, default_value_t = 4096)]
        points: usize,
        /// Voxels per axis.
        #[arg(long, default_value_t = 64)]
        res: usize,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate synthetic 2D cells with homogenized tensors.
    Planar {
        /// 2D catalog file.
        #[arg(long)]
        catalog: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of cells.
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Pixels per side.
        #[arg(long, default_value_t = 50)]
        res: usize,
        /// Minimum volume fraction.
        #[arg(long, default_value_t = 0.70)]
        vf_min: f64,
        /// Maximum volume fraction.
        #[arg(long, default_value_t = 0.95)]
        vf_max: f64,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Kernel over all manifest entries.
    Kernel {
        /// Dataset manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// shape2d, hausdorff, embed or property.
        #[arg(long)]
        space: KernelSpace,
        /// Output kernel (.kmat); a .csv mirror is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Also write the distance matrix here (.kmat).
        #[arg(long)]
        distance_out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct SelectCmd {
    #[command(subcommand)]
    sweep: Option<SelectSub>,
    #[command(flatten)]
    args: SelectArgs,
}

#[derive(Subcommand)]
enum SelectSub {
    /// Select once per weight and write all records as a JSON array.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct KernelPair {
    /// Property kernel (.kmat).
    #[arg(long)]
    lp: PathBuf,
    /// Shape kernel (.kmat).
    #[arg(long)]
    ls: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    kernels: Option<KernelPair>,
    /// Shape weight in [0, 1].
    #[arg(long, required = true)]
    w: Option<f64>,
    /// Subset size.
    #[arg(long, required = true)]
    k: Option<usize>,
    /// Output selection JSON.
    #[arg(long, required = true)]
    out: Option<PathBuf>,
    /// Seed recorded in the output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    kernels: KernelPair,
    /// Comma separated shape weights.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    weights: Vec<f64>,
    /// Subset size.
    #[arg(long)]
    k: usize,
    /// Output JSON array of selections.
    #[arg(long)]
    out: PathBuf,
    /// Trade-off CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed recorded in the output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum DesignCmd {
    /// Run the genetic algorithm on one subset of a 2D dataset.
    Ga {
        /// Assembly problem JSON.
        #[arg(long)]
        problem: PathBuf,
        /// 2D dataset manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Selection JSON whose indices pick the dataset cells.
        #[arg(long)]
        subset: PathBuf,
        /// Independent runs.
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Master seed; run seeds are derived from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generations per run.
        #[arg(long, default_value_t = 200)]
        generations: usize,
        /// Population size.
        #[arg(long, default_value_t = 100)]
        population: usize,
        /// Report CSV; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock time per run (makes the report non-reproducible).
        #[arg(long)]
        time: bool,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Selection JSON files.
    #[arg(long = "selection", required = true)]
    selections: Vec<PathBuf>,
    #[command(flatten)]
    kernels: KernelPair,
    /// Random subsets per baseline.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Baseline seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class.exit_code() as u8)
        }
    }
}

fn configure_threads() -> Result<(), PipelineError> {
    let Ok(v) = std::env::var("METASET_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PipelineError::validation("config", format!("METASET_THREADS={v:?} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::validation("config", e))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    formats::write_file(path, bytes).map_err(at("write", path.to_str()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_kernel(path: &Path) -> Result<SimilarityKernel, PipelineError> {
    let (m, kind) = formats::read_kmat(path).map_err(at("load", path.to_str()))?;
    if kind == KernelKind::Distance {
        return Err(PipelineError::new(
            "load",
            path.to_str(),
            ErrorClass::Validation,
            "file holds a distance matrix, not a kernel",
        ));
    }
    Ok(SimilarityKernel::new(m, kind))
}

fn read_pair(p: &KernelPair) -> Result<(SimilarityKernel, SimilarityKernel), PipelineError> {
    Ok((read_kernel(&p.lp)?, read_kernel(&p.ls)?))
}

fn run(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::Expr(ExprCmd::Eval { expr, point }) => {
            let e = LevelSetExpr::parse(&expr).map_err(|e| PipelineError::validation("expr", e))?;
            if point.len() != e.dims() || point.iter().any(|v| !v.is_finite()) {
                return Err(PipelineError::validation(
                    "expr",
                    format!("expected {} finite coordinates, got {}", e.dims(), point.len()),
                ));
            }
            println!("{:?}", e.evaluate(&point));
            Ok(())
        }
        Command::Isogen(IsogenCmd::Build {
            catalog,
            out,
            samples,
            points,
            res,
            seed,
        }) => {
            let entries = read_catalog(&catalog, 3).map_err(at("isogen", catalog.to_str()))?;
            let cfg = FamilyConfig {
                resolution: res,
                samples,
                points,
                seed,
                ..FamilyConfig::default()
            };
            let families = generate_families(&entries, &cfg)?;
            let mut w = ArtifactWriter::new(&out);
            let manifest = write_dataset(&families, &mut w)?;
            let retained = families.iter().filter(|f| f.is_retained()).count();
            eprintln!(
                "{} of {} families retained, {} cells written to {}",
                retained,
                families.len(),
                manifest.len(),
                out.display()
            );
            Ok(())
        }
        Command::Isogen(IsogenCmd::Planar {
            catalog,
            out,
            count,
            res,
            vf_min,
            vf_max,
            seed,
        }) => {
            let entries = read_catalog(&catalog, 2).map_err(at("isogen", catalog.to_str()))?;
            let cfg = Gen2dConfig {
                count,
                vf_min,
                vf_max,
                n: res,
                seed,
                ..Gen2dConfig::default()
            };
            let cells = gen2d_dataset(&entries, &cfg).map_err(at("isogen", None))?;
            let mut w = ArtifactWriter::new(&out);
            write_planar_dataset(&cells, &mut w)?;
            eprintln!("{} cells written to {}", cells.len(), out.display());
            Ok(())
        }
        Command::Metrics(MetricsCmd::Kernel {
            manifest,
            space,
            out,
            distance_out,
        }) => {
            let m = Manifest::read(&manifest).map_err(at("metrics", manifest.to_str()))?;
            let built = manifest_kernel(&m, space)?;
            write(&out, &formats::encode_kmat(&built.kernel.matrix, built.kernel.kind))?;
            write(&out.with_extension("csv"), formats::matrix_csv(&built.kernel.matrix).as_bytes())?;
            if let Some(p) = distance_out {
                let d = built.distance.as_ref().ok_or_else(|| {
                    PipelineError::validation("metrics", "this space has no distance matrix")
                })?;
                write(&p, &formats::encode_kmat(&d.0, KernelKind::Distance))?;
            }
            if built.repair.repaired {
                eprintln!(
                    "kernel repaired: min eigenvalue {:e} -> {:e}",
                    built.repair.min_eigenvalue_before, built.repair.min_eigenvalue_after
                );
            }
            Ok(())
        }
        Command::Select(SelectCmd {
            sweep: Some(SelectSub::Sweep(a)),
            ..
        }) => {
            let (lp, ls) = read_pair(&a.kernels)?;
            let mut recs = Vec::new();
            let mut csv = String::from("k,w,score,score_shape,score_property,indices\n");
            for &w in &a.weights {
                let rec = select_weighted(&lp, &ls, w, a.k, a.seed)?.0;
                let idx: Vec<String> = rec.indices.iter().map(usize::to_string).collect();
                csv.push_str(&format!(
                    "{},{},{:?},{:?},{:?},{}\n",
                    a.k,
                    w,
                    rec.score,
                    rec.score_shape,
                    rec.score_property,
                    idx.join(" ")
                ));
                recs.push(rec);
            }
            let json = serde_json::to_string_pretty(&recs).expect("selections serialize") + "\n";
            write(&a.out, json.as_bytes())?;
            if let Some(p) = a.csv {
                write(&p, csv.as_bytes())?;
            }
            Ok(())
        }
        Command::Select(SelectCmd { sweep: None, args }) => {
            let kernels = args
                .kernels
                .ok_or_else(|| PipelineError::validation("select", "--lp and --ls are required"))?;
            let (lp, ls) = read_pair(&kernels)?;
            let (w, k, out) = (args.w.unwrap(), args.k.unwrap(), args.out.unwrap());
            let rec = select_weighted(&lp, &ls, w, k, args.seed)?.0;
            write(&out, rec.to_json().as_bytes())
        }
        Command::Design(DesignCmd::Ga {
            problem,
            manifest,
            subset,
            runs,
            seed,
            generations,
            population,
            out,
            time,
        }) => {
            let problem = read_problem(&problem)?;
            let m = Manifest::read(&manifest).map_err(at("design", manifest.to_str()))?;
            let cells = load_planar_cells(&m)?;
            let sel = SelectionRecord::read(&subset).map_err(at("design", subset.to_str()))?;
            let name = subset
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("subset")
                .to_string();
            let named = [NamedSubset {
                name,
                indices: sel.indices,
            }];
            let cfg = GaConfig {
                generations,
                population,
                ..GaConfig::default()
            };
            let seeds: Vec<u64> = (0..runs as u64).map(|r| seed::derive(seed, "design", r)).collect();
            let report = experiment_mbb(&problem, &cells, &named, &seeds, &cfg, time).map_err(at("design", None))?;
            emit(out.as_deref(), &report.runs_csv())?;
            eprint!("{}", report.summary_csv());
            Ok(())
        }
        Command::Pipeline(a) => {
            let mut cfg = PipelineConfig::load(&a.config)?;
            if let Some(o) = a.out {
                cfg.out = o;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let summary = run_pipeline(&cfg)?;
            eprintln!(
                "{} families retained, {} selections, {} artifacts in {}",
                summary.families_retained.len(),
                summary.selections,
                summary.artifacts.len(),
                cfg.out.display()
            );
            Ok(())
        }
        Command::Report(a) => {
            let (lp, ls) = read_pair(&a.kernels)?;
            let mut sels = Vec::new();
            for p in &a.selections {
                let r = SelectionRecord::read(p).map_err(at("report", p.to_str()))?;
                let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("selection").to_string();
                sels.push((name, r.w, r.indices));
            }
            let rows = score_report(&sels, &ls, &lp, a.trials, a.seed)?;
            emit(a.out.as_deref(), &score_csv(&rows))
        }
    }
}
