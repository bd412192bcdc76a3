use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use osc_color::matrices::{eigendecompose, matrix_to_csv, predicted_mu, DEFAULT_EPS_EIG};
use osc_color::pipeline::DEFAULT_CYCLES;
use osc_color::{
    build_system, parse_dimacs, prototypical_inverse, run_pipeline, sparsify, verify_eig_relation,
    ColoringReport, Error, Graph, GraphSpec, OscParams, PipelineConfig, PipelineRun, SimMode,
};

const THREADS_ENV: &str = "OSC_COLOR_THREADS";

#[derive(Parser)]
#[command(
    name = "osc-color",
    version,
    about = "Graph coloring with coupled relaxation oscillators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Color a graph and write the report plus phase data.
    Color(RunArgs),
    /// Dump the coefficient matrix and check its spectrum.
    Spectra(RunArgs),
    /// Write phase plot data and a cluster summary.
    Phases(RunArgs),
    /// Sweep sparsification levels and seeds of a generator.
    Bench(BenchArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// DIMACS (.col) or JSON graph file.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Generator spec, e.g. `partite:5,5,5;keep=0.8;seed=1`.
    #[arg(long = "gen")]
    gen_spec: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SimArgs {
    /// JSON file with parameter overrides (c_i, c_c, g_i, g_s, v_l, v_h).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value = "exact", value_parser = parse_mode)]
    mode: SimMode,
    /// Simulated time; defaults to a fixed number of nominal periods.
    #[arg(long)]
    t_end: Option<f64>,
    /// Seed of the initial state.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step budget of the simulation.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Generator spec; only its class sizes are used.
    #[arg(long = "gen")]
    gen_spec: String,
    /// Comma separated keep fractions; an empty list gives an empty sweep.
    #[arg(long, default_value = "1.0,0.8,0.6,0.4")]
    keep: String,
    /// Number of seeds per keep fraction.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[command(flatten)]
    sim: SimArgs,
}

fn parse_mode(s: &str) -> std::result::Result<SimMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_params(path: Option<&Path>) -> Result<OscParams> {
    let p = match path {
        None => OscParams::default(),
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
    };
    p.validate()?;
    Ok(p)
}

fn load_graph(source: &Source) -> Result<(Graph, String)> {
    if let Some(spec) = &source.gen_spec {
        let g = spec.parse::<GraphSpec>()?.build()?;
        return Ok((g, spec.clone()));
    }
    let path = source.graph.as_ref().expect("clap enforces one source");
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let g = if is_json {
        Graph::from_json(&text)
    } else {
        parse_dimacs(&text)
    }
    .with_context(|| format!("{}", path.display()))?;
    let id = path.file_name().map_or_else(
        || path.display().to_string(),
        |f| f.to_string_lossy().into_owned(),
    );
    Ok((g, id))
}

fn pipeline_config(g: &Graph, p: &OscParams, sim: &SimArgs, seed: u64) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::for_graph(g, p, DEFAULT_CYCLES, seed);
    cfg.sim.mode = sim.mode;
    if let Some(t) = sim.t_end {
        cfg.sim.t_end = t;
    }
    if let Some(m) = sim.max_steps {
        cfg.sim.max_steps = m;
    }
    cfg.sim.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn run(args: &RunArgs) -> Result<(Graph, String, OscParams, PipelineRun)> {
    let (g, id) = load_graph(&args.source)?;
    let p = load_params(args.sim.params.as_deref())?;
    let cfg = pipeline_config(&g, &p, &args.sim, args.sim.seed)?;
    let mut run = run_pipeline(&g, &p, &cfg)?;
    run.report.graph_id.clone_from(&id);
    Ok((g, id, p, run))
}

fn report_csv(r: &ColoringReport) -> String {
    let mut pos = vec![0; r.n];
    for (i, &v) in r.order.iter().enumerate() {
        pos[v] = i;
    }
    let mut out = String::from("node,color,period,order_position\n");
    for (v, (color, period)) in r.colors.iter().zip(&r.periods).enumerate() {
        let _ = writeln!(out, "{v},{color},{period:.14e},{}", pos[v]);
    }
    out
}

fn cmd_color(args: &RunArgs) -> Result<()> {
    let (_, id, _, run) = run(args)?;
    let r = &run.report;
    if !r.proper {
        bail!("internal error: emitted coloring is not proper");
    }
    match args.sim.format {
        Format::Json => write(&args.sim.out, "report.json", &to_json(r)?)?,
        Format::Csv => write(&args.sim.out, "report.csv", &report_csv(r))?,
    }
    let phases = run
        .phases
        .as_ref()
        .map_or_else(|| "node,n,n_dt,phi\n".to_string(), |pt| pt.to_csv());
    write(&args.sim.out, "phases.csv", &phases)?;
    println!(
        "{id}: {} colors, sync={}, fallback={}",
        r.num_colors, r.sync, r.fallback
    );
    Ok(())
}

#[derive(Serialize)]
struct SpectraSummary {
    graph_id: String,
    n: usize,
    params: OscParams,
    max_mu: f64,
    max_rel_error: f64,
    max_principal_angle: f64,
    all_negative: bool,
    relation_holds: bool,
    /// Infinity norm between the closed-form and numeric inverse, for
    /// complete multipartite graphs with equal classes.
    closed_form_residual: Option<f64>,
}

/// `(k, m)` if `g` is the complete `k`-partite graph with classes of size
/// `m` laid out class by class.
fn prototypical_shape(g: &Graph) -> Option<(usize, usize)> {
    let classes = g.planted_classes()?;
    let m = classes.first()?.len();
    let k = classes.len();
    let class_major = classes
        .iter()
        .enumerate()
        .all(|(c, cl)| cl.len() == m && cl.iter().enumerate().all(|(i, &v)| v == c * m + i));
    let complete = g.num_edges() == k * (k - 1) / 2 * m * m;
    (k >= 2 && class_major && complete).then_some((k, m))
}

fn cmd_spectra(args: &RunArgs) -> Result<()> {
    let (g, id) = load_graph(&args.source)?;
    let p = load_params(args.sim.params.as_deref())?;
    let sys = build_system(&g, &p)?;
    let n = g.n();
    let sa = eigendecompose(&sys.adjacency, DEFAULT_EPS_EIG)?;
    let sb = eigendecompose(&sys.b, DEFAULT_EPS_EIG)?;
    let rep = verify_eig_relation(&sa, &sb, &p, n)?;
    let residual = match prototypical_shape(&g) {
        Some((k, m)) => {
            let diff = prototypical_inverse(k, m, &p)? + &sys.b;
            Some(
                diff.row_iter()
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max),
            )
        }
        None => None,
    };

    let mut table = String::from("index,lambda,mu,mu_predicted\n");
    for i in 0..n {
        let lambda = sa.eigenvalues[i];
        let _ = writeln!(
            table,
            "{i},{lambda:.16e},{:.16e},{:.16e}",
            sb.eigenvalues[n - 1 - i],
            predicted_mu(lambda, &p, n)
        );
    }
    write(&args.sim.out, "spectrum.csv", &table)?;
    write(&args.sim.out, "b_matrix.csv", &matrix_to_csv(&sys.b))?;

    let summary = SpectraSummary {
        graph_id: id.clone(),
        n,
        params: p,
        max_mu: rep.max_mu,
        max_rel_error: rep.max_rel_error,
        max_principal_angle: rep.max_principal_angle,
        all_negative: rep.all_negative,
        relation_holds: rep.holds(1e-9, 1e-6),
        closed_form_residual: residual,
    };
    match args.sim.format {
        Format::Json => write(&args.sim.out, "spectra.json", &to_json(&summary)?)?,
        Format::Csv => {
            let mut s = String::from("key,value\n");
            let _ = writeln!(s, "graph_id,{id}");
            let _ = writeln!(s, "n,{n}");
            let _ = writeln!(s, "max_mu,{:.16e}", summary.max_mu);
            let _ = writeln!(s, "max_rel_error,{:.16e}", summary.max_rel_error);
            let _ = writeln!(
                s,
                "max_principal_angle,{:.16e}",
                summary.max_principal_angle
            );
            let _ = writeln!(s, "all_negative,{}", summary.all_negative);
            let _ = writeln!(s, "relation_holds,{}", summary.relation_holds);
            if let Some(r) = residual {
                let _ = writeln!(s, "closed_form_residual,{r:.16e}");
            }
            write(&args.sim.out, "spectra.csv", &s)?;
        }
    }
    println!(
        "{id}: max mu {:.6e}, max rel error {:.2e}{}",
        rep.max_mu,
        rep.max_rel_error,
        residual.map_or(String::new(), |r| format!(", closed-form residual {r:.2e}"))
    );
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary {
    graph_id: String,
    sync: bool,
    periods: Vec<f64>,
    common_period: Option<f64>,
    order: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    num_clusters: usize,
    /// Clusters coincide with the planted classes, when those are known.
    planted_match: Option<bool>,
}

fn cmd_phases(args: &RunArgs) -> Result<()> {
    let (g, id, _, run) = run(args)?;
    let r = &run.report;
    let planted_match = g.planted_labels().map(|labels| {
        let classes = g.planted_classes().map_or(0, <[_]>::len);
        r.clusters.len() == classes
            && r.clusters
                .iter()
                .all(|c| c.iter().all(|&v| labels[v] == labels[c[0]]))
    });
    let summary = ClusterSummary {
        graph_id: id.clone(),
        sync: r.sync,
        periods: r.periods.clone(),
        common_period: run.phases.as_ref().and_then(|pt| pt.common_period),
        order: r.order.clone(),
        clusters: r.clusters.clone(),
        num_clusters: r.clusters.len(),
        planted_match,
    };
    let phases = run
        .phases
        .as_ref()
        .map_or_else(|| "node,n,n_dt,phi\n".to_string(), |pt| pt.to_csv());
    write(&args.sim.out, "phases.csv", &phases)?;
    match args.sim.format {
        Format::Json => write(&args.sim.out, "clusters.json", &to_json(&summary)?)?,
        Format::Csv => {
            let mut s = String::from("node,cluster\n");
            let mut rows: Vec<(usize, usize)> = summary
                .clusters
                .iter()
                .enumerate()
                .flat_map(|(c, cl)| cl.iter().map(move |&v| (v, c)))
                .collect();
            rows.sort_unstable();
            for (v, c) in rows {
                let _ = writeln!(s, "{v},{c}");
            }
            write(&args.sim.out, "clusters.csv", &s)?;
        }
    }
    println!(
        "{id}: sync={}, {} clusters",
        summary.sync, summary.num_clusters
    );
    Ok(())
}

struct BenchRow {
    keep: f64,
    seed: u64,
    num_colors: usize,
    sync: bool,
    proper: bool,
    wall_time_ms: f64,
}

fn parse_keep_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let k: f64 = t
                .parse()
                .with_context(|| format!("bad keep fraction '{t}'"))?;
            if !(k > 0.0 && k <= 1.0) {
                bail!("keep fraction {k} outside (0, 1]");
            }
            Ok(k)
        })
        .collect()
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[usize], q: f64) -> usize {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    Ok(builder.build()?)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let spec: GraphSpec = args.gen_spec.parse()?;
    let base = osc_color::complete_partite(&spec.class_sizes)?;
    let keeps = parse_keep_list(&args.keep)?;
    let p = load_params(args.sim.params.as_deref())?;
    let jobs: Vec<(f64, u64)> = keeps
        .iter()
        .flat_map(|&k| (args.first_seed..args.first_seed + args.seeds).map(move |s| (k, s)))
        .collect();

    let pool = thread_pool()?;
    let results: Vec<Result<BenchRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(keep, seed)| {
                let g = if keep < 1.0 {
                    sparsify(&base, keep, seed)?
                } else {
                    base.clone()
                };
                let cfg = pipeline_config(&g, &p, &args.sim, seed)?;
                let r = osc_color::color_graph(&g, &p, &cfg)?;
                Ok(BenchRow {
                    keep,
                    seed,
                    num_colors: r.num_colors,
                    sync: r.sync,
                    proper: r.proper,
                    wall_time_ms: r.wall_time_ms,
                })
            })
            .collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.keep.total_cmp(&a.keep).then(a.seed.cmp(&b.seed)));

    let mut csv = String::from("keep_fraction,seed,num_colors,sync,proper,wall_time_ms\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.3}",
            r.keep, r.seed, r.num_colors, r.sync, r.proper, r.wall_time_ms
        );
    }
    write(&args.sim.out, "bench.csv", &csv)?;

    let mut summary =
        String::from("keep_fraction,runs,colors_min,colors_q25,colors_median,colors_q75,colors_max,sync_rate,all_proper\n");
    for chunk in rows.chunk_by(|a, b| a.keep == b.keep) {
        let mut colors: Vec<usize> = chunk.iter().map(|r| r.num_colors).collect();
        colors.sort_unstable();
        let sync = chunk.iter().filter(|r| r.sync).count() as f64 / chunk.len() as f64;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{sync},{}",
            chunk[0].keep,
            chunk.len(),
            colors[0],
            quantile(&colors, 0.25),
            quantile(&colors, 0.5),
            quantile(&colors, 0.75),
            colors[colors.len() - 1],
            chunk.iter().all(|r| r.proper)
        );
    }
    write(&args.sim.out, "bench_summary.csv", &summary)?;
    println!(
        "{} runs written to {}",
        rows.len(),
        args.sim.out.join("bench.csv").display()
    );
    if rows.iter().any(|r| !r.proper) {
        bail!("internal error: an emitted coloring is not proper");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let budget = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::Budget { .. })));
    if budget {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors are input errors (exit 1); code 2 is kept for budget failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.cmd {
        Command::Color(a) => cmd_color(a),
        Command::Spectra(a) => cmd_spectra(a),
        Command::Phases(a) => cmd_phases(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
