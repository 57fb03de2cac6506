use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use relconvex::bodies::BodySpec;
use relconvex::exact_oracles::{
    ball_volume, grid_gauge_distance, planar_parallel_area, planar_parallel_perimeter, polygon_area,
    polygon_area_measure, polygon_perimeter, OracleMethod, OracleReport,
};
use relconvex::gauge_metric::{e_distance, DEFAULT_TOL};
use relconvex::mixed_volumes::{af_chain, default_t_nodes, steiner_fit, tangential_detect, DEFAULT_TANGENTIAL_TOL};
use relconvex::numeric::chebyshev_nodes;
use relconvex::parallel_measures::{
    fit_area_measures, fit_support_measures, proportionality_test, SamplingOptions, ShellNodes, SpatialGrid,
};
use relconvex::sampling::with_workers;
use relconvex::smooth_relgeo::{integrate_area_measures_smooth, DEFAULT_ORDER};
use relconvex::sphere_cells::SphereCells;
use relconvex::{ConvexBody, Error, GaugeBody, Vector};

/// Anisotropic convex geometry: E-distances, area and support measures,
/// mixed volumes.
#[derive(Parser, Debug)]
#[command(name = "relconvex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    cfg: RunConfig,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// E-distance, projection and relative normal for each point of --points.
    Dist,
    /// Area measures S_0 .. S_{n-1} from shell samples.
    Measures,
    /// Support measures on a spatial grid times the boundary cells.
    Supportmeasures,
    /// Mixed volumes V_0 .. V_n from a Steiner fit.
    Mixedvol,
    /// Proportionality of S_k to S_{n-1} together with the mixed-volume chain.
    TheoremCheck,
    /// Area measures of a smooth pair by surface quadrature.
    Relgeo,
    /// Exact reference values for simple bodies.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    /// Per-cell ratio S_k / S_{n-1}, for plotting.
    Ratio,
}

#[derive(clap::Args, Debug)]
struct RunConfig {
    /// JSON description of K.
    #[arg(long, global = true)]
    body: Option<PathBuf>,
    /// JSON description of the gauge body E.
    #[arg(long, global = true)]
    gauge: Option<PathBuf>,
    /// Seed of the sampling streams; required.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    samples: usize,
    /// Boundary cells: arcs for n = 2, 8 * 4^L for n = 3.
    #[arg(long, global = true)]
    cells: Option<usize>,
    /// Shell radii as `a,b,count`, Chebyshev spaced.
    #[arg(long, global = true)]
    rho_grid: Option<String>,
    /// Steiner parameters as `a,b,count`, Chebyshev spaced.
    #[arg(long, global = true)]
    t_grid: Option<String>,
    /// Shell thickness.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Solver tolerance, or the tolerance of a verdict.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Measure index for `theorem-check` and ratio output.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 keeps the default pool.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Query points, one per line, comma separated.
    #[arg(long, global = true)]
    points: Option<PathBuf>,
    /// Spatial boxes per axis for support measures.
    #[arg(long, global = true, default_value_t = 2)]
    grid: usize,
    /// Gauss-Legendre order per cell for `relgeo`.
    #[arg(long, global = true, default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// Grid resolution per axis for the brute-force distance oracle.
    #[arg(long, global = true, default_value_t = 2000)]
    resolution: usize,
}

impl RunConfig {
    fn seed(&self) -> Result<u64> {
        self.seed.context("--seed is required")
    }

    fn sampling(&self) -> Result<SamplingOptions> {
        if self.samples == 0 {
            bail!(Error::InvalidSpec("--samples must be positive".into()));
        }
        Ok(SamplingOptions::new(self.samples, self.seed()?))
    }

    fn body(&self) -> Result<ConvexBody> {
        let path = self.body.as_ref().context("--body is required")?;
        Ok(read_spec(path)?.to_body()?)
    }

    fn gauge(&self) -> Result<GaugeBody> {
        let path = self.gauge.as_ref().context("--gauge is required")?;
        Ok(read_spec(path)?.to_gauge()?)
    }

    fn pair(&self) -> Result<(ConvexBody, GaugeBody)> {
        let (k, e) = (self.body()?, self.gauge()?);
        if k.dim() != e.dim() {
            bail!(Error::DimensionMismatch {
                expected: k.dim(),
                got: e.dim()
            });
        }
        Ok((k, e))
    }

    fn cells(&self, n: usize) -> Result<SphereCells> {
        Ok(match self.cells {
            Some(m) => SphereCells::with_count(n, m)?,
            None => SphereCells::default_for(n)?,
        })
    }

    fn nodes(&self, k: &ConvexBody) -> Result<ShellNodes> {
        let positive = |x: f64, name: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(Error::InvalidSpec(format!("{name} must be positive")))
            }
        };
        if let Some(d) = self.delta {
            positive(d, "--delta")?;
        }
        Ok(match &self.rho_grid {
            Some(g) => ShellNodes::new(parse_grid(g)?, self.delta)?,
            None => {
                let d = ShellNodes::default_for(k);
                ShellNodes::new(d.rho, self.delta)?
            }
        })
    }

    fn t_nodes(&self, n: usize) -> Result<Vec<f64>> {
        match &self.t_grid {
            Some(g) => parse_grid(g),
            None => Ok(default_t_nodes(n)),
        }
    }

    fn tol(&self, default: f64) -> Result<f64> {
        match self.tol {
            Some(t) if !(t > 0.0) => bail!(Error::InvalidSpec("--tol must be positive".into())),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    }
}

fn read_spec(path: &Path) -> Result<BodySpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BodySpec::from_json(&text)?)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::InvalidSpec(format!("grid `{text}` must read a,b,count"));
    let [a, b, count] = parts[..] else {
        bail!(bad());
    };
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    let count: usize = count.parse().map_err(|_| bad())?;
    if !(a > 0.0 && b > a && count >= 1) {
        bail!(bad());
    }
    Ok(chebyshev_nodes(a, b, count))
}

fn read_points(path: &Path, dim: usize) -> Result<Vec<Vector>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let xs: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidSpec(format!("line {}: not a point", i + 1)))?;
        if xs.len() != dim {
            bail!(Error::DimensionMismatch {
                expected: dim,
                got: xs.len()
            });
        }
        out.push(Vector::from_slice(&xs));
    }
    Ok(out)
}

fn to_json(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn coords(out: &mut String, v: Option<&Vector>, n: usize) {
    for i in 0..n {
        match v {
            Some(v) => write!(out, ",{:.17e}", v[i]).unwrap(),
            None => out.push(','),
        }
    }
}

fn dist(cfg: &RunConfig) -> Result<String> {
    let (k, e) = cfg.pair()?;
    let n = k.dim();
    let path = cfg.points.as_ref().context("--points is required")?;
    let tol = cfg.tol(DEFAULT_TOL)?;
    let results = read_points(path, n)?
        .into_iter()
        .map(|x| Ok((x, e_distance(&k, &e, &x, tol)?)))
        .collect::<Result<Vec<_>>>()?;
    if cfg.format == Format::Json {
        let rows: Vec<_> = results.iter().map(|(x, r)| json!({ "x": x, "result": r })).collect();
        return to_json(&rows);
    }
    let mut out = String::new();
    for (prefix, _) in [("x", 0), ("p", 1), ("y", 2), ("u", 3)] {
        for i in 0..n {
            write!(out, "{prefix}{i},").unwrap();
        }
        if prefix == "x" {
            out.push_str("d,");
        }
    }
    out.push_str("gap,iterations\n");
    for (x, r) in &results {
        let mut row = String::new();
        coords(&mut row, Some(x), n);
        write!(row, ",{:.17e}", r.d).unwrap();
        coords(&mut row, Some(&r.p), n);
        coords(&mut row, r.y.as_ref(), n);
        coords(&mut row, r.u.as_ref().map(|u| u.as_vector()), n);
        writeln!(row, ",{:.17e},{}", r.gap, r.iterations).unwrap();
        out.push_str(&row[1..]);
    }
    Ok(out)
}

fn measures(cfg: &RunConfig) -> Result<String> {
    let (k, e) = cfg.pair()?;
    let p = fit_area_measures(&k, &e, &cfg.cells(k.dim())?, &cfg.nodes(&k)?, &cfg.sampling()?)?;
    match cfg.format {
        Format::Csv => Ok(p.csv()),
        Format::Json => to_json(&p),
        Format::Ratio => Ok(p.ratio_csv(cfg.k.unwrap_or(0).min(p.dim - 1))),
    }
}

fn supportmeasures(cfg: &RunConfig) -> Result<String> {
    let (k, e) = cfg.pair()?;
    let n = k.dim();
    let grid = SpatialGrid::over(&k, cfg.grid)?;
    let est = fit_support_measures(&k, &e, &grid, &cfg.cells(n)?, &cfg.nodes(&k)?, &cfg.sampling()?)?;
    if cfg.format == Format::Json {
        return to_json(&est);
    }
    let mut out = String::from("box,cell_id");
    for j in 0..n {
        write!(out, ",S{j}").unwrap();
    }
    for j in 0..n {
        write!(out, ",stderr{j}").unwrap();
    }
    out.push('\n');
    for s in 0..grid.count() {
        for c in 0..est.cells.count() {
            let i = est.index(s, c);
            write!(out, "{s},{c}").unwrap();
            for m in &est.measures {
                write!(out, ",{:.17e}", m.masses[i]).unwrap();
            }
            for m in &est.measures {
                write!(out, ",{:.17e}", m.stderr[i]).unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

fn mixedvol(cfg: &RunConfig) -> Result<String> {
    let (k, e) = cfg.pair()?;
    let table = steiner_fit(&k, &e, &cfg.t_nodes(k.dim())?, &cfg.sampling()?)?;
    if cfg.format != Format::Json {
        return Ok(table.csv());
    }
    let chain = match af_chain(&table) {
        Ok(c) => json!(c),
        Err(err) => json!({ "error": err.to_string() }),
    };
    to_json(&json!({ "table": table, "af_chain": chain }))
}

fn theorem_check(cfg: &RunConfig) -> Result<String> {
    let (k, e) = cfg.pair()?;
    let n = k.dim();
    let order = cfg.k.context("--k is required")?;
    let tol = cfg.tol(0.05)?;
    let opts = cfg.sampling()?;
    let profile = fit_area_measures(&k, &e, &cfg.cells(n)?, &cfg.nodes(&k)?, &opts)?;
    let report = proportionality_test(&profile, order, tol)?;
    // independent samples for the mixed volumes
    let mv_opts = SamplingOptions::new(opts.samples, opts.seed.wrapping_add(1));
    let table = steiner_fit(&k, &e, &cfg.t_nodes(n)?, &mv_opts)?;
    let tangential = tangential_detect(&table, DEFAULT_TANGENTIAL_TOL)?;
    let chain_holds = tangential.k.is_some_and(|d| d <= order);
    let verdict = if report.proportional { "proportional" } else { "not proportional" };
    to_json(&json!({
        "k": order,
        "verdict": verdict,
        "c": report.c,
        "measures": report,
        "mixed_volumes": {
            "v": table.v,
            "stderr": table.stderr,
            "tangential": tangential,
            "chain_equal_from_k": chain_holds,
        },
        "samples": opts.samples,
        "seed": opts.seed,
    }))
}

fn relgeo(cfg: &RunConfig) -> Result<String> {
    let (k, e) = cfg.pair()?;
    let p = integrate_area_measures_smooth(&k, &e, &cfg.cells(k.dim())?, cfg.order)?;
    match cfg.format {
        Format::Csv => Ok(p.csv()),
        Format::Json => to_json(&p),
        Format::Ratio => Ok(p.ratio_csv(cfg.k.unwrap_or(0).min(p.dim - 1))),
    }
}

fn oracle(cfg: &RunConfig) -> Result<String> {
    let k = cfg.body()?;
    let n = k.dim();
    let mut reports = Vec::new();
    if let (Some(p), 2) = (k.as_polytope(), n) {
        let v = p.vertices();
        reports.push(OracleReport::new("area", polygon_area(v)?, OracleMethod::Triangulation));
        reports.push(OracleReport::new("perimeter", polygon_perimeter(v)?, OracleMethod::ClosedForm));
        if let Some(rho) = cfg.delta {
            reports.push(OracleReport::new(format!("parallel_area({rho})"), planar_parallel_area(p, rho)?, OracleMethod::ClosedForm));
            reports.push(OracleReport::new(
                format!("parallel_perimeter({rho})"),
                planar_parallel_perimeter(p, rho)?,
                OracleMethod::ClosedForm,
            ));
        }
        let cells = cfg.cells(2)?;
        for (c, m) in polygon_area_measure(p, &cells)?.masses.iter().enumerate() {
            if *m > 0.0 {
                reports.push(OracleReport::new(format!("S1[{c}]"), *m, OracleMethod::ClosedForm));
            }
        }
    } else if let relconvex::bodies::BodyKind::Ball { radius, .. } = k.kind() {
        reports.push(OracleReport::new("volume", ball_volume(n, *radius)?, OracleMethod::ClosedForm));
    }
    if let Some(path) = &cfg.points {
        let e = cfg.gauge()?;
        for x in read_points(path, n)? {
            let d = grid_gauge_distance(&k, &e, &x, cfg.resolution)?;
            let label = x.as_slice().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
            reports.push(OracleReport::new(format!("grid_distance({label})"), d, OracleMethod::GridBruteForce));
        }
    }
    if reports.is_empty() {
        bail!(Error::Unsupported("no exact references for this body".into()));
    }
    to_json(&reports)
}

fn run(command: Command, cfg: &RunConfig) -> Result<String> {
    // the seed is part of every run's configuration
    cfg.seed()?;
    match command {
        Command::Dist => dist(cfg),
        Command::Measures => measures(cfg),
        Command::Supportmeasures => supportmeasures(cfg),
        Command::Mixedvol => mixedvol(cfg),
        Command::TheoremCheck => theorem_check(cfg),
        Command::Relgeo => relgeo(cfg),
        Command::Oracle => oracle(cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NoConvergence { .. } | Error::IllConditioned { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    // usage errors count as bad input, like a malformed spec
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let cfg = &cli.cfg;
    let result = with_workers(cfg.workers, || run(cli.command, cfg)).and_then(|text| {
        match &cfg.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("relconvex: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
