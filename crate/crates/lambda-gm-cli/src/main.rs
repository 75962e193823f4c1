use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lambda_gm::asymp::{eta13, eta_fit, linspace, survival13};
use lambda_gm::atomic::semigraphoid_audit;
use lambda_gm::grid::{ci_check, hc_check, plain_hc_check};
use lambda_gm::io::{self, Names};
use lambda_gm::rays::{MarkovLevel, PathMode};
use lambda_gm::sampling::sample_maxlinear;
use lambda_gm::{Error, UndirectedGraph};
use serde_json::{json, Value};

/// Conditional independence checks and graphical models for exponent measures.
///
/// Reports go to stdout as JSON. Exit status: 0 when a verdict was computed,
/// 1 on input errors, 2 when an enumeration or quadrature guard tripped.
#[derive(Parser)]
#[command(name = "lambda-gm", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact CI oracle for a finite atomic measure.
    CiAtomic(CiArgs),
    /// L1–L4 sweep over all disjoint set tuples of an atomic measure.
    AuditSemigraphoid {
        #[arg(long)]
        measure: PathBuf,
    },
    /// Charged faces of an atomic measure, optionally checked against a graph.
    Faces {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    #[command(subcommand)]
    /// Homogeneous ray measures: CI oracle and extremal correlation.
    Rays(RaysCmd),
    #[command(subcommand)]
    /// Recursive max-linear models on a DAG.
    Maxlinear(MaxLinearCmd),
    #[command(subcommand)]
    /// Densities tabulated on product grids.
    Grid(GridCmd),
    #[command(subcommand)]
    /// Hüsler–Reiss forests.
    Hr(HrCmd),
    /// Residual tail coefficient of the trivariate Gaussian-type chain.
    Eta {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 2.0)]
        umin: f64,
        #[arg(long, default_value_t = 4.0)]
        umax: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
    },
    #[command(subcommand)]
    /// Graph utilities.
    Graph(GraphCmd),
}

#[derive(Args)]
struct CiArgs {
    #[arg(long)]
    measure: PathBuf,
    /// Comma-separated vertex names.
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long, default_value = "")]
    c: String,
}

#[derive(Subcommand)]
enum RaysCmd {
    /// Exact CI oracle for a finite ray measure.
    Ci(CiArgs),
    /// Extremal correlation matrix after margin standardization.
    Chi {
        #[arg(long)]
        measure: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Max,
    Sum,
}

#[derive(Subcommand)]
enum MaxLinearCmd {
    /// Directed local (or global) Markov property via the ray oracle.
    VerifyMarkov {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        global: bool,
        #[arg(long, value_enum, default_value_t = Mode::Max)]
        mode: Mode,
    },
    /// Samples as CSV; parameters echoed to stdout and to `<out>.json`.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GridCmd {
    /// Modified-density factorization check of A ⊥ B | C.
    CiCheck {
        #[command(flatten)]
        ci: CiArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Clique/separator factorization for a decomposable graph.
    HcCheck {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Ordinary density factorization on the positive orthant instead.
        #[arg(long)]
        plain: bool,
    },
}

#[derive(Subcommand)]
enum HrCmd {
    /// χ matrix in closed form, or by quadrature with --numeric.
    Chi {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        numeric: bool,
    },
    /// Grid measure of the forest on a shared geometric axis.
    Build {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        lo: f64,
        #[arg(long, default_value_t = 16.0)]
        hi: f64,
        #[arg(long, default_value_t = 8)]
        nodes: usize,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Number of nonempty vertex sets inducing connected subgraphs.
    CountSubgraphs {
        #[arg(long)]
        graph: PathBuf,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Re-indexes `g` by the names of a measure.
fn align(gn: &Names, g: &UndirectedGraph, names: &Names) -> anyhow::Result<UndirectedGraph> {
    if gn.len() != names.len() {
        return Err(anyhow!("graph has {} vertices, measure has {}", gn.len(), names.len()));
    }
    let map: Vec<usize> = gn.as_slice().iter().map(|n| names.index(n)).collect::<Result<_, _>>()?;
    let edges: Vec<(usize, usize)> = g.edges().into_iter().map(|(u, v)| (map[u], map[v])).collect();
    Ok(UndirectedGraph::from_edges(names.len(), &edges)?)
}

fn graph_for(path: &Path, names: &Names) -> anyhow::Result<UndirectedGraph> {
    let (gn, g) = io::read_graph(&read(path)?)?;
    align(&gn, &g, names)
}

fn run(cmd: Cmd) -> anyhow::Result<Value> {
    Ok(match cmd {
        Cmd::CiAtomic(a) => {
            let (names, m) = io::read_atomic(&read(&a.measure)?)?;
            let r = m.ci_oracle(names.parse_list(&a.a)?, names.parse_list(&a.b)?, names.parse_list(&a.c)?)?;
            io::ci_report_json(&r, &names)
        }
        Cmd::AuditSemigraphoid { measure } => {
            let (names, m) = io::read_atomic(&read(&measure)?)?;
            io::audit_json(&semigraphoid_audit(&m)?, &names)
        }
        Cmd::Faces { measure, graph } => {
            let (names, m) = io::read_atomic(&read(&measure)?)?;
            let faces: Vec<Vec<String>> = m.charged_faces().into_iter().map(|f| names.of_set(f)).collect();
            let mut out = json!({ "faces": faces });
            if let Some(g) = graph {
                let g = graph_for(&g, &names)?;
                out["face_bound"] = io::face_bound_json(&m.face_bound_check(&g)?, &names);
            }
            out
        }
        Cmd::Rays(RaysCmd::Ci(a)) => {
            let (names, m) = io::read_rays(&read(&a.measure)?)?;
            let r = m.ci_oracle(names.parse_list(&a.a)?, names.parse_list(&a.b)?, names.parse_list(&a.c)?)?;
            io::ci_report_json(&r, &names)
        }
        Cmd::Rays(RaysCmd::Chi { measure }) => {
            let (names, m) = io::read_rays(&read(&measure)?)?;
            let s = m.standardize_margins()?;
            let d = s.d();
            let chi = (0..d).map(|i| (0..d).map(|j| s.chi(i, j)).collect()).collect::<Result<Vec<Vec<f64>>, _>>()?;
            io::matrix_json(&chi, &names)
        }
        Cmd::Maxlinear(MaxLinearCmd::VerifyMarkov { spec, global, mode }) => {
            let (names, s) = io::read_maxlinear(&read(&spec)?)?;
            let level = if global { MarkovLevel::Global } else { MarkovLevel::Local };
            let mode = match mode {
                Mode::Max => PathMode::Max,
                Mode::Sum => PathMode::Sum,
            };
            io::audit_json(&s.verify_directed_markov_mode(level, mode)?, &names)
        }
        Cmd::Maxlinear(MaxLinearCmd::Simulate { spec, n, seed, out }) => {
            let text = read(&spec)?;
            let (names, s) = io::read_maxlinear(&text)?;
            let samples = sample_maxlinear(&s, n, seed)?;
            let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
            w.write_record(names.as_slice())?;
            for row in samples.rows() {
                w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
            }
            w.flush()?;
            let sidecar = json!({
                "samples": out.display().to_string(),
                "spec": spec.display().to_string(),
                "n": n,
                "seed": seed,
                "vertices": names.as_slice(),
                "model": serde_json::from_str::<Value>(&text)?,
            });
            let mut side = out.clone().into_os_string();
            side.push(".json");
            fs::write(&side, io::to_json_string(&sidecar) + "\n")?;
            sidecar
        }
        Cmd::Grid(GridCmd::CiCheck { ci, tol }) => {
            let (names, m) = io::read_grid(&read(&ci.measure)?)?;
            let r = ci_check(&m, names.parse_list(&ci.a)?, names.parse_list(&ci.b)?, names.parse_list(&ci.c)?, tol)?;
            io::ci_report_json(&r, &names)
        }
        Cmd::Grid(GridCmd::HcCheck { measure, graph, tol, plain }) => {
            let (names, m) = io::read_grid(&read(&measure)?)?;
            let g = graph_for(&graph, &names)?;
            let audit = if plain { plain_hc_check(&m, &g, tol)? } else { hc_check(&m, &g, tol)? };
            io::audit_json(&audit, &names)
        }
        Cmd::Hr(HrCmd::Chi { spec, numeric }) => {
            let (names, f) = io::read_forest(&read(&spec)?)?;
            let chi = if numeric {
                let d = f.d();
                let mut m = vec![vec![1.0; d]; d];
                for i in 0..d {
                    for j in i + 1..d {
                        m[i][j] = f.chi_quadrature(i, j)?;
                        m[j][i] = m[i][j];
                    }
                }
                m
            } else {
                f.chi_forest()
            };
            let mut out = io::matrix_json(&chi, &names);
            out["method"] = json!(if numeric { "quadrature" } else { "closed_form" });
            out
        }
        Cmd::Hr(HrCmd::Build { spec, lo, hi, nodes }) => {
            let (names, f) = io::read_forest(&read(&spec)?)?;
            let axis = lambda_gm::grid::AxisGrid::geometric(lo, hi, nodes)?;
            let m = f.build_grid(vec![axis; f.d()])?;
            io::grid_json(&m, &names)
        }
        Cmd::Eta { a, b, umin, umax, points } => {
            if !(umax > umin) {
                return Err(anyhow!("--umax must exceed --umin"));
            }
            let u = linspace(umin, umax, points);
            let s: Vec<f64> = u.iter().map(|&x| survival13(a, b, x)).collect::<Result<_, _>>()?;
            let lookup = |x: f64| u.iter().position(|&v| v == x).map_or(f64::NAN, |k| s[k]);
            json!({
                "a": a,
                "b": b,
                "u": u,
                "survival": s,
                "eta_fit": eta_fit(lookup, &u)?,
                "eta_closed_form": eta13(a, b)?,
            })
        }
        Cmd::Graph(GraphCmd::CountSubgraphs { graph }) => {
            let (_, g) = io::read_graph(&read(&graph)?)?;
            json!({ "count": g.count_connected_subgraphs()? })
        }
    })
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LAMBDA_GM_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow!("LAMBDA_GM_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            return Err(anyhow!("LAMBDA_GM_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = configure_threads().and_then(|()| run(cli.cmd));
    match result {
        Ok(v) => {
            println!("{}", io::to_json_string(&v));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let guard = e.downcast_ref::<Error>().is_some_and(Error::is_resource_guard);
            ExitCode::from(if guard { 2 } else { 1 })
        }
    }
}
