use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use flatmod::angles::{leaf_label, parse_angle_list, AngleDatum, RationalAngle};
use flatmod::chyp::{chd_distance, PhChart, ProjectivePoint, SignatureOneNForm};
use flatmod::metrics::metric_report;
use flatmod::strata::{dim1_cusps, leaf_report, table1_csv, table1_search, LeafReport};
use flatmod::surface::{build_from_polygon, PolygonFile, PolygonalModel, SurfaceFile};
use flatmod::surgery::{
    apply, reverse_thurston, shortest_connection, stratum_cone_angle, Reversal, SurgeryKind, SurgeryResult,
    SurgerySpec,
};
use flatmod::veech::HermitianForm;
use flatmod::{Error, FlatSurface, C64};

/// Print to stdout, propagating write errors (a closed pipe ends the run quietly).
macro_rules! outln {
    ($($t:tt)*) => { writeln!(std::io::stdout().lock(), $($t)*)? };
}

/// Version of every JSON document written to stdout.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "flatmod", version, about = "Flat surfaces with cone points and their moduli")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Numerical tolerance for geometric checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for randomised steps. No current command draws random numbers;
    /// the flag is accepted so scripts stay stable.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel enumerations and quadrature.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build, check and measure surfaces.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Strata of a leaf F_θ(M), the lattice table and one-dimensional counts.
    Strata(StrataArgs),
    /// Surgeries on a surface file.
    #[command(subcommand)]
    Surgery(SurgeryCmd),
    /// Complex hyperbolic distances and volumes.
    #[command(subcommand)]
    Chyp(ChypCmd),
}

#[derive(Subcommand)]
enum SurfaceCmd {
    /// Glue a polygonal model and write the surface file at area one.
    Build {
        polygon: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validate gluings and Gauss-Bonnet.
    Check { surface: PathBuf },
    /// Systoles and diameters at area one.
    Invariants {
        surface: PathBuf,
        /// Subdivision depth of the diameter sampling.
        #[arg(long, default_value_t = 2)]
        depth: u32,
    },
}

#[derive(Args)]
struct StrataArgs {
    /// Cone angles as fractions of 2π, e.g. 3/2,1/2.
    #[arg(long)]
    angles: Option<String>,
    #[arg(long = "M")]
    big_m: Option<u64>,
    /// Genus; inferred from Gauss-Bonnet when omitted.
    #[arg(long)]
    genus: Option<u32>,
    /// Emit the arithmetic lattice table.
    #[arg(long)]
    table1: bool,
    /// Emit cone point, cusp and puncture counts of F_(3π,π)(M).
    #[arg(long)]
    y1: bool,
    #[arg(long = "max-M", default_value_t = 50)]
    max_m: u64,
}

#[derive(Subcommand)]
enum SurgeryCmd {
    /// Apply a surgery spec to a surface file.
    Apply {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        surface: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Undo S1/S2 along the shortest connection between two labelled points.
    Reverse {
        #[arg(long)]
        surface: PathBuf,
        /// Label of the point of angle θ″ (where the kite apex was).
        #[arg(long)]
        from: u32,
        /// Label of the point of angle θ′.
        #[arg(long)]
        to: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChypCmd {
    /// Distance between two positive vectors, as JSON arrays of [re, im].
    Distance {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Row-major Hermitian matrix of [re, im] entries; defaults to diag(1, -1, ..., -1).
        #[arg(long)]
        form: Option<String>,
    },
    /// Volume of U_{K,λ} truncated at u ≤ umax, standard chart.
    Volume {
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 8.0)]
        umax: f64,
        /// Complex dimension.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Relative tolerance of the grid refinement.
        #[arg(long = "rel-tol", default_value_t = 1e-2)]
        rel_tol: f64,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_surface(path: &Path, tol: f64) -> anyhow::Result<FlatSurface> {
    Ok(SurfaceFile::from_json(&read(path)?)?.to_surface(tol.max(1e-12))?)
}

fn write_surface(path: &Path, s: &FlatSurface) -> anyhow::Result<()> {
    fs::write(path, SurfaceFile::from_surface(s).to_json()).with_context(|| format!("writing {}", path.display()))
}

fn emit(kind: &str, data: impl Serialize) -> anyhow::Result<()> {
    let doc = json!({ "schema": format!("flatmod/{kind}"), "version": SCHEMA_VERSION, "data": data });
    outln!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn table(rows: &[(String, String)]) -> anyhow::Result<()> {
    let w = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    for (k, v) in rows {
        outln!("{k:<w$}  {v}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SurfaceSummary {
    genus: u32,
    area: f64,
    marked_points: usize,
    cone_angles: Vec<Value>,
    gauss_bonnet_residual: f64,
}

fn summary(s: &FlatSurface) -> anyhow::Result<SurfaceSummary> {
    Ok(SurfaceSummary {
        genus: s.genus()?,
        area: s.area(),
        marked_points: s.marked_count(),
        cone_angles: s
            .cone_angles()
            .iter()
            .map(|c| json!({ "label": c.label, "angle": c.angle, "turns": c.angle / std::f64::consts::TAU }))
            .collect(),
        gauss_bonnet_residual: s.gauss_bonnet_residual(),
    })
}

fn surface_cmd(g: &Global, cmd: SurfaceCmd) -> anyhow::Result<()> {
    match cmd {
        SurfaceCmd::Build { polygon, output } => {
            let file: PolygonFile =
                serde_json::from_str(&read(&polygon)?).map_err(|e| Error::Input(format!("polygon file: {e}")))?;
            let model = PolygonalModel::from_file(&file)?;
            let s = build_from_polygon(&model)?.normalized();
            s.check(g.tol.max(1e-12))?;
            info!("built a surface with {} triangles", s.triangle_count());
            match output {
                Some(p) => {
                    write_surface(&p, &s)?;
                    emit("surface-build", summary(&s)?)
                }
                None => {
                    outln!("{}", SurfaceFile::from_surface(&s).to_json());
                    Ok(())
                }
            }
        }
        SurfaceCmd::Check { surface } => {
            let s = load_surface(&surface, g.tol)?;
            let sum = summary(&s)?;
            if sum.gauss_bonnet_residual.abs() > 1e-9_f64.max(g.tol) {
                return Err(Error::Precondition(format!("Gauss-Bonnet residual {}", sum.gauss_bonnet_residual)).into());
            }
            if g.format == Format::Table {
                table(&[
                    ("genus".into(), sum.genus.to_string()),
                    ("area".into(), format!("{:.12}", sum.area)),
                    ("marked points".into(), sum.marked_points.to_string()),
                    ("Gauss-Bonnet residual".into(), format!("{:.3e}", sum.gauss_bonnet_residual)),
                ])?;
                return Ok(());
            }
            emit("surface-check", json!({ "ok": true, "surface": sum }))
        }
        SurfaceCmd::Invariants { surface, depth } => {
            let s = load_surface(&surface, g.tol)?;
            let r = metric_report(&s, depth, g.tol)?;
            if g.format == Format::Table {
                let f = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
                table(&[
                    ("systole".into(), f(r.systole)),
                    ("relative systole".into(), f(r.relative_systole)),
                    ("diameter (lower)".into(), format!("{:.6}", r.diameter)),
                    ("diameter (upper)".into(), format!("{:.6}", r.diameter_upper)),
                    ("relative diameter".into(), format!("{:.6}", r.relative_diameter)),
                ])?;
                return Ok(());
            }
            emit("metric-report", r)
        }
    }
}

#[derive(Serialize)]
struct Y1Row {
    #[serde(rename = "M")]
    big_m: u64,
    cone_points: u64,
    cusps: u64,
    punctures: u64,
}

fn y1_rows(max_m: u64) -> anyhow::Result<Vec<Y1Row>> {
    let datum = AngleDatum::new(1, vec![RationalAngle::new(3, 2)?, RationalAngle::new(1, 2)?]);
    (2..=max_m)
        .map(|big_m| {
            let r = leaf_report(&leaf_label(datum.clone(), big_m)?)?;
            let cone = r.cone_points.as_ref().map(|c| c.iter().map(|x| x.count).sum()).unwrap_or(0);
            let cusps = r.cusps.unwrap_or(0);
            Ok(Y1Row { big_m, cone_points: cone, cusps, punctures: cone + cusps })
        })
        .collect()
}

fn leaf_table(r: &LeafReport) -> anyhow::Result<()> {
    let angles: Vec<String> = r.label.datum.angles.iter().map(|a| format!("{}/{}", a.num(), a.den())).collect();
    let mut rows = vec![
        ("angles (turns)".into(), angles.join(", ")),
        ("M".into(), r.label.big_m.to_string()),
        ("m".into(), r.m.to_string()),
        ("holonomy order".into(), r.q.to_string()),
        ("P-strata".into(), r.p_strata.len().to_string()),
        ("C-strata".into(), r.c_strata.len().to_string()),
        ("K-strata".into(), r.k_strata.len().to_string()),
    ];
    if let (Some(cp), Some(cu), Some(pu)) = (&r.cone_points, r.cusps, r.punctures) {
        rows.push(("cone points".into(), cp.iter().map(|c| c.count).sum::<u64>().to_string()));
        rows.push(("cusps".into(), cu.to_string()));
        rows.push(("punctures".into(), pu.to_string()));
    }
    rows.push(("arithmetic lattice".into(), r.arithmetic_lattice.to_string()));
    table(&rows)
}

fn strata_cmd(g: &Global, a: StrataArgs) -> anyhow::Result<()> {
    if a.table1 {
        let rows = table1_search();
        if g.format == Format::Json {
            return emit("table1", rows);
        }
        write!(std::io::stdout().lock(), "{}", table1_csv(&rows))?;
        return Ok(());
    }
    if a.y1 {
        let rows = y1_rows(a.max_m)?;
        if g.format == Format::Json {
            return emit("y1-counts", rows);
        }
        let mut w = csv::Writer::from_writer(std::io::stdout());
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        return Ok(());
    }
    let angles = a.angles.ok_or_else(|| Error::Input("--angles is required".into()))?;
    let angles = parse_angle_list(&angles)?;
    let genus = match a.genus {
        Some(g) => g,
        None => flatmod::angles::implied_genus(&angles)
            .ok_or_else(|| Error::Precondition("angles fail Gauss-Bonnet for every genus".into()))?,
    };
    let big_m = a.big_m.ok_or_else(|| Error::Input("--M is required".into()))?;
    let label = leaf_label(AngleDatum::new(genus, angles), big_m)?;
    let report = leaf_report(&label)?;
    debug!("{} P-strata, {} C-strata", report.p_strata.len(), report.c_strata.len());
    match g.format {
        Format::Table => leaf_table(&report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(["kind", "angle", "multiplicity"])?;
            for r in report.p_strata.iter().chain(&report.c_strata).chain(&report.k_strata) {
                w.write_record([
                    format!("{:?}", r.kind),
                    format!("{}/{}", r.angle.num(), r.angle.den()),
                    r.multiplicity.to_string(),
                ])?;
            }
            w.flush()?;
            if label.n() == 2 {
                debug!("{} cusps", dim1_cusps(&label)?);
            }
            Ok(())
        }
        Format::Json => emit("leaf-report", report),
    }
}

fn result_json(res: &SurgeryResult, stratum: Option<RationalAngle>) -> Value {
    json!({
        "kind": res.kind,
        "width": res.width,
        "defect": res.defect,
        "mu": res.mu,
        "z0": [res.z0.re, res.z0.im],
        "new_labels": res.new_labels,
        "stratum_cone_angle": stratum,
        "witness": res.witness,
        "cone_angles": res.surface.cone_angles(),
        "area": res.surface.area(),
    })
}

fn surgery_cmd(g: &Global, cmd: SurgeryCmd) -> anyhow::Result<()> {
    match cmd {
        SurgeryCmd::Apply { spec, surface, output } => {
            let spec = SurgerySpec::from_json(&read(&spec)?)?;
            let s = load_surface(&surface, g.tol)?;
            let res = apply(&s, &spec)?;
            let stratum = match (spec.kind, spec.split.as_slice()) {
                (SurgeryKind::S1 | SurgeryKind::S2, [a, b]) => {
                    let t1 = RationalAngle::from_turns(a.turns() + b.turns() - 1);
                    stratum_cone_angle(spec.kind, &[t1]).ok()
                }
                (SurgeryKind::S3, [_, _]) | (SurgeryKind::S4, _) => stratum_cone_angle(spec.kind, &spec.split).ok(),
                _ => None,
            };
            if let Some(p) = output {
                write_surface(&p, &res.surface)?;
            }
            emit("surgery-result", result_json(&res, stratum))
        }
        SurgeryCmd::Reverse { surface, from, to, output } => {
            let s = load_surface(&surface, g.tol)?;
            let sc = shortest_connection(&s, from, to)?;
            match reverse_thurston(&s, &sc)? {
                Reversal::Reversed(res) => {
                    if let Some(p) = output {
                        write_surface(&p, &res.surface)?;
                    }
                    emit("surgery-reverse", json!({ "reversed": true, "result": result_json(&res, None) }))
                }
                Reversal::Blocked { kite } => emit(
                    "surgery-reverse",
                    json!({ "reversed": false, "blocked": true, "cone_point_at_kite_vertex": kite }),
                ),
            }
        }
    }
}

fn parse_vector(s: &str) -> anyhow::Result<Vec<C64>> {
    let v: Vec<[f64; 2]> = serde_json::from_str(s).map_err(|e| Error::Input(format!("complex array: {e}")))?;
    Ok(v.into_iter().map(|[a, b]| C64::new(a, b)).collect())
}

fn chyp_cmd(cmd: ChypCmd) -> anyhow::Result<()> {
    match cmd {
        ChypCmd::Distance { x, y, form } => {
            let (x, y) = (parse_vector(&x)?, parse_vector(&y)?);
            let f = match form {
                None => SignatureOneNForm::standard(x.len().saturating_sub(1)),
                Some(text) => {
                    let rows: Vec<Vec<[f64; 2]>> =
                        serde_json::from_str(&text).map_err(|e| Error::Input(format!("form: {e}")))?;
                    let d = rows.len();
                    if rows.iter().any(|r| r.len() != d) {
                        return Err(Error::Input("form must be square".into()).into());
                    }
                    let m = nalgebra_matrix(d, &rows);
                    SignatureOneNForm::new(HermitianForm::new(m)?)?
                }
            };
            let px = ProjectivePoint::new(DVector::from_vec(x), &f)?;
            let py = ProjectivePoint::new(DVector::from_vec(y), &f)?;
            let alpha = chd_distance(&px, &py, &f)?;
            emit("chyp-distance", json!({ "distance": alpha, "cosh2_half": (alpha / 2.0).cosh().powi(2) }))
        }
        ChypCmd::Volume { k, lambda, umax, n, rel_tol } => {
            if n == 0 {
                return Err(Error::Input("--n must be at least 1".into()).into());
            }
            let v = PhChart::standard(n).region_volume(k, lambda, umax, rel_tol)?;
            emit("chyp-volume", json!({ "K": k, "lambda": lambda, "umax": umax, "n": n, "volume": v }))
        }
    }
}

fn nalgebra_matrix(d: usize, rows: &[Vec<[f64; 2]>]) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    // Anything that is not a library error (unreadable files, bad output
    // paths, serialisation) is an input problem.
    e.downcast_ref::<Error>().map_or(2, |err| err.exit_code() as u8)
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>().is_some_and(|e| matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe))
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(j) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    debug!("seed {}", cli.global.seed);
    match cli.cmd {
        Cmd::Surface(c) => surface_cmd(&cli.global, c),
        Cmd::Strata(a) => strata_cmd(&cli.global, a),
        Cmd::Surgery(c) => surgery_cmd(&cli.global, c),
        Cmd::Chyp(c) => chyp_cmd(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FLATMOD_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
