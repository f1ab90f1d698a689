use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skewclust::em::{stratified_known_labels, Family, FitConfig, InitStrategy};
use skewclust::grid::{run_classification_grid, run_grid, Execution, GridSpec, ModelPreset, THREADS_ENV};
use skewclust::io::{ingest_csv, scale_columns, CsvOptions, Dataset, LabelColumn};
use skewclust::report::{
    evaluate_responsibilities, partition_from_strings, read_label_file, write_labels_file, RunReport, Task,
};
use skewclust::select::{ari, merge_by_hand, MAX_HAND_MERGE};
use skewclust::simgen::{builtin_design, generate, SimDesign};
use skewclust::{Error, Result};

#[derive(Parser)]
#[command(name = "skewclust", version, about = "Parsimonious skew-normal and skew-t mixture models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV file over a grid of families, scale models and g.
    Fit(FitArgs),
    /// Semi-supervised classification with partially known labels.
    Classify(ClassifyArgs),
    /// Draw a dataset from a built-in or JSON-described design.
    Simulate(SimulateArgs),
    /// ARI and merging of predicted labels against true labels.
    Evaluate(EvaluateArgs),
    /// Print a saved run report.
    Report(ReportArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV file.
    data: PathBuf,
    /// Field delimiter (a single character; `\t` for tab).
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
    /// Name (or 1-based index with --no-header) of the label column.
    #[arg(long)]
    label_column: Option<String>,
    /// Label value marking an unknown label.
    #[arg(long)]
    missing_token: Option<String>,
    /// Fit the raw columns instead of standardized ones.
    #[arg(long)]
    no_scale: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Comma-separated families: gaussian, t, skew-normal, skew-t.
    #[arg(long, default_value = "skew-t")]
    family: String,
    /// `mclust` (10 models), `all` (14) or a comma-separated list such as EEE,VVV.
    #[arg(long, default_value = "mclust")]
    models: String,
    /// Random starts per cell.
    #[arg(long, default_value_t = 10)]
    starts: usize,
    /// Initialization: kmeans, random or uniform.
    #[arg(long)]
    init: Option<String>,
    /// Aitken stopping tolerance.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Share one ν across components.
    #[arg(long)]
    equal_dof: bool,
    /// Worker threads for the grid.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Run grid cells one after another.
    #[arg(long)]
    sequential: bool,
    /// Report file (JSON).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// MAP labels CSV.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Range of component counts, `lo..hi` or a single value.
    #[arg(long, short, default_value = "1..9")]
    g: String,
    /// Refit up to this g when the top of the range is selected.
    #[arg(long, default_value_t = 12)]
    extend_to: usize,
    /// Never extend the g range.
    #[arg(long)]
    no_extend: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Hide labels so that this fraction of each class stays known.
    #[arg(long)]
    known_fraction: Option<f64>,
    /// Seed for the known-label subset.
    #[arg(long, default_value_t = 1)]
    subset_seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// sim1, sim2, sim3, or a JSON design file.
    #[arg(long)]
    design: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; stdout if absent. The last column is the 1-based source component.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted labels CSV (as written by --labels-out).
    #[arg(long, conflicts_with = "report", required_unless_present = "report")]
    pred: Option<PathBuf>,
    /// Column of the predicted labels file; the last column by default.
    #[arg(long)]
    pred_column: Option<String>,
    /// A run report; enables entropy merging from its responsibilities.
    #[arg(long)]
    report: Option<PathBuf>,
    /// True labels CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Column of the truth file; the last column by default.
    #[arg(long)]
    truth_column: Option<String>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    report: PathBuf,
    /// Print the full JSON instead of a summary.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skewclust: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn load(input: &InputArgs) -> Result<Dataset> {
    let delimiter = match input.delimiter.as_str() {
        "\\t" | "tab" => b'\t',
        d if d.len() == 1 => d.as_bytes()[0],
        d => return Err(Error::Input(format!("delimiter must be one character, got '{d}'"))),
    };
    let label = input.label_column.as_ref().map(|c| match c.parse::<usize>() {
        Ok(i) if input.no_header && i > 0 => LabelColumn::Index(i - 1),
        _ => LabelColumn::Name(c.clone()),
    });
    let options = CsvOptions {
        delimiter,
        has_header: !input.no_header,
        label,
        missing_label: input.missing_token.clone(),
    };
    let ds = ingest_csv(&input.data, &options)?;
    if input.no_scale {
        Ok(ds)
    } else {
        scale_columns(&ds)
    }
}

fn grid_spec(a: &GridArgs) -> Result<GridSpec> {
    let families = a
        .family
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<Family>>>()?;
    let init = match a.init.as_deref() {
        None | Some("kmeans") => InitStrategy::KMeans,
        Some("random") => InitStrategy::RandomPosterior,
        Some("uniform") => InitStrategy::Uniform,
        Some(other) => return Err(Error::Input(format!("unknown init '{other}'"))),
    };
    Ok(GridSpec {
        families,
        models: ModelPreset::parse(&a.models)?.models(),
        config: FitConfig {
            n_starts: a.starts,
            init,
            tol: a.tol,
            max_iter: a.max_iter,
            seed: a.seed,
            constrain_dof_equal: a.equal_dof,
            ..FitConfig::default()
        },
        execution: if a.sequential { Execution::Sequential } else { Execution::Parallel },
        threads: a.threads,
        ..GridSpec::default()
    })
}

fn parse_g_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Input(format!("invalid g range '{s}' (expected e.g. 1..9 or 3)"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (parse(lo)?, parse(hi.trim_start_matches('='))?),
        None => {
            let g = parse(s)?;
            (g, g)
        }
    };
    if lo == 0 || hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn emit(report: &RunReport, grid: &GridArgs) -> Result<()> {
    if let Some(path) = &grid.out {
        report.write(path)?;
    }
    if let Some(path) = &grid.labels_out {
        write_labels_file(path, &report.labels)?;
    }
    if grid.out.is_none() && grid.labels_out.is_none() {
        println!("{}", report.to_json()?);
    } else {
        print!("{}", report.summary());
    }
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let ds = load(&a.input)?;
    let (g_min, g_max) = parse_g_range(&a.g)?;
    let spec = GridSpec {
        g_min,
        g_max,
        extend_to: (!a.no_extend).then_some(a.extend_to),
        ..grid_spec(&a.grid)?
    };
    let outcome = run_grid(&ds.matrix, &spec)?;
    let truth = ds.truth();
    let source = Some(a.input.data.display().to_string());
    let report = RunReport::new(&ds, source, &spec, Task::Cluster, &outcome, truth.as_ref(), None)?;
    emit(&report, &a.grid)
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    if a.input.label_column.is_none() {
        return Err(Error::Input("classify needs --label-column".into()));
    }
    let ds = load(&a.input)?;
    let all = ds.known_labels().expect("label column requested");
    let truth = ds.truth();
    let known = match a.known_fraction {
        None => all.clone(),
        Some(f) => {
            let full = truth
                .as_ref()
                .ok_or_else(|| Error::Input("--known-fraction needs every label present".into()))?;
            stratified_known_labels(full.labels(), f, a.subset_seed)?
        }
    };
    if known.iter().all(Option::is_some) {
        return Err(Error::Input("every label is known; nothing to classify".into()));
    }
    let g = ds.classes().len();
    let spec = GridSpec {
        g_min: g,
        g_max: g,
        extend_to: None,
        ..grid_spec(&a.grid)?
    };
    let spec = if a.grid.init.is_none() {
        GridSpec {
            config: FitConfig {
                init: InitStrategy::Uniform,
                ..spec.config
            },
            ..spec
        }
    } else {
        spec
    };
    let outcome = run_classification_grid(&ds.matrix, &known, &spec)?;
    let hidden: Vec<bool> = known.iter().map(Option::is_none).collect();
    let source = Some(a.input.data.display().to_string());
    let report = RunReport::new(&ds, source, &spec, Task::Classify, &outcome, truth.as_ref(), Some(&hidden))?;
    emit(&report, &a.grid)
}

fn load_design(name: &str, seed: u64) -> Result<SimDesign> {
    if Path::new(name).is_file() {
        let text = fs::read_to_string(name).map_err(|e| Error::Io(format!("{name}: {e}")))?;
        let mut design: SimDesign = serde_json::from_str(&text)?;
        design.seed = seed;
        Ok(design)
    } else {
        builtin_design(name, seed)
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let design = load_design(&a.design, a.seed)?;
    let (data, truth) = generate(&design)?;
    let mut text = String::new();
    let header: Vec<String> = (1..=data.ncols()).map(|k| format!("x{k}")).collect();
    text += &header.join(",");
    text += ",component\n";
    for (j, row) in data.row_iter().enumerate() {
        for v in row.iter() {
            text += &format!("{v},");
        }
        text += &format!("{}\n", truth.labels()[j] + 1);
    }
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = partition_from_strings(&read_label_file(&a.truth, a.truth_column.as_deref())?);
    let value = if let Some(path) = &a.report {
        let report = RunReport::read(path)?;
        serde_json::to_value(evaluate_responsibilities(&report.responsibilities(), &truth, None)?)?
    } else {
        let path = a.pred.as_ref().expect("clap requires --pred or --report");
        let pred = partition_from_strings(&read_label_file(path, a.pred_column.as_deref())?);
        let overall = ari(&pred, &truth)?;
        let hand = if pred.k() <= MAX_HAND_MERGE {
            let (merged, a) = merge_by_hand(&pred, &truth)?;
            Some(serde_json::json!({
                "labels": merged.labels().iter().map(|l| l + 1).collect::<Vec<_>>(),
                "ari": a,
            }))
        } else {
            None
        };
        serde_json::json!({ "ari": overall, "hand_merge": hand })
    };
    let text = serde_json::to_string_pretty(&value)? + "\n";
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let report = RunReport::read(&a.report)?;
    if a.json {
        println!("{}", report.to_json()?);
    } else {
        print!("{}", report.summary());
        if let Some(path) = &report.data.source {
            println!("data: {path} ({} × {})", report.data.n, report.data.p);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_range_forms() {
        assert_eq!(parse_g_range("1..9").unwrap(), (1, 9));
        assert_eq!(parse_g_range("2..=4").unwrap(), (2, 4));
        assert_eq!(parse_g_range("3").unwrap(), (3, 3));
        assert!(parse_g_range("0..3").is_err());
        assert!(parse_g_range("5..2").is_err());
    }
}
