//! `cgd`: command-line front end for the conflict graph design toolkit.

use cgd_core::design::{ConflictGraphDesign, DesignDraw, Desired, OrderingKind, DEFAULT_R};
use cgd_core::estimand::{build_conflict_graph, Contrast, Estimand};
use cgd_core::estimator::{lambda_v_cached, EstimateReport, OutcomeTable};
use cgd_core::graph::{
    clique, largest_eigenvalue, read_edge_list, write_edge_list, Graph, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use cgd_core::oracle::run_battery;
use cgd_core::sim::{run_simulation, GraphSpec, SimConfig};
use cgd_core::Error;
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "cgd", version, about = "Conflict graph design for network experiments")]
struct Cli {
    /// Seed for every random stream (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format; each subcommand documents its default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Generator {
    PreferentialAttachment,
    ErdosRenyi,
    Star,
    Path,
    Clique,
    HubCliques,
    CliqueOfCliques,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderingArg {
    Eigenvector,
    SequentialDegree,
}

impl From<OrderingArg> for OrderingKind {
    fn from(o: OrderingArg) -> Self {
        match o {
            OrderingArg::Eigenvector => OrderingKind::Eigenvector,
            OrderingArg::SequentialDegree => OrderingKind::SequentialDegree,
        }
    }
}

#[derive(clap::Args, Debug)]
struct DesignArgs {
    /// Interference graph as an edge list (`n <count>` header, then `i j` lines).
    #[arg(long)]
    graph: PathBuf,

    /// `direct`, `gate`, inline estimand JSON, or a path to an estimand JSON file.
    #[arg(long, default_value = "direct")]
    estimand: String,

    /// Sampling parameter r >= 1.
    #[arg(long, default_value_t = DEFAULT_R)]
    r: f64,

    /// Importance ordering of the conflict graph.
    #[arg(long, value_enum, default_value = "eigenvector")]
    ordering: OrderingArg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a graph and print it as an edge list.
    GenGraph {
        #[arg(long, value_enum)]
        generator: Generator,
        /// Number of vertices (block vertices for hub-cliques).
        #[arg(long)]
        n: usize,
        /// Edges per arriving vertex (preferential attachment).
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// Attachment exponent (preferential attachment).
        #[arg(long, default_value_t = 1.0)]
        r_exp: f64,
        /// Edge probability (Erdos-Renyi).
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the conflict graph (edge list by default; json or csv on request).
    ConflictGraph {
        #[arg(long)]
        graph: PathBuf,
        /// `direct`, `gate`, inline estimand JSON, or a path to an estimand JSON file.
        #[arg(long, default_value = "direct")]
        estimand: String,
    },
    /// Print the importance ordering, most important first (JSON array by default).
    Ordering {
        #[arg(long)]
        graph: PathBuf,
        /// `direct`, `gate`, inline estimand JSON, or a path to an estimand JSON file.
        #[arg(long, default_value = "direct")]
        estimand: String,
        #[arg(long, value_enum, default_value = "eigenvector")]
        kind: OrderingArg,
    },
    /// Print the largest eigenvalue of the conflict graph.
    Lambda {
        #[arg(long)]
        graph: PathBuf,
        /// `direct`, `gate`, inline estimand JSON, or a path to an estimand JSON file.
        #[arg(long, default_value = "direct")]
        estimand: String,
    },
    /// Draw from the design; one `U Z` line per draw by default.
    Sample {
        #[command(flatten)]
        design: DesignArgs,
        /// Number of draws.
        #[arg(long, default_value_t = 1)]
        draws: usize,
    },
    /// Print Pr[E_(i,k)], or with --other-unit the joint probability and covariance.
    Probs {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        unit: usize,
        /// 1 for e1, 0 for e0.
        #[arg(long, default_value_t = 1)]
        contrast: u8,
        #[arg(long)]
        other_unit: Option<usize>,
        /// 1 for e1, 0 for e0.
        #[arg(long, default_value_t = 1)]
        other_contrast: u8,
    },
    /// Estimate from `U Z` draw lines and an outcomes CSV; JSON lines by default.
    Estimate {
        #[command(flatten)]
        design: DesignArgs,
        /// File of draws as printed by `sample`; `-` reads stdin.
        #[arg(long)]
        draws: PathBuf,
        /// Outcomes CSV with columns unit,y1,y0.
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also report the exact variance of the estimator.
        #[arg(long)]
        exact: bool,
    },
    /// Run a simulation from a JSON config; CSV by default.
    Simulate {
        /// Simulation config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the exact-enumeration invariant battery; exit 1 if any check fails.
    OracleCheck,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Battery,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Battery) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_estimand(arg: &str) -> std::result::Result<Estimand, Failure> {
    match arg {
        "direct" => Ok(Estimand::DirectEffect),
        "gate" => Ok(Estimand::Gate),
        s if s.trim_start().starts_with('{') => Ok(Estimand::from_json(s)?),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read estimand file `{path}`: {e}")))?;
            Ok(Estimand::from_json(&text)?)
        }
    }
}

fn load_graph(path: &Path) -> std::result::Result<Graph, Failure> {
    read_edge_list(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn contrast(k: u8) -> std::result::Result<Contrast, Failure> {
    Ok(Contrast::from_index(k)?)
}

fn build_design(args: &DesignArgs) -> std::result::Result<ConflictGraphDesign, Failure> {
    let g = load_graph(&args.graph)?;
    let est = load_estimand(&args.estimand)?;
    Ok(ConflictGraphDesign::new(g, &est, args.r, args.ordering.into())?)
}

/// Snaps values within power-iteration noise of a 1e-6 grid point.
fn tidy(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if (r - x).abs() <= 1e-10 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

fn run(cli: &Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match &cli.command {
        Command::GenGraph { generator, n, m, r_exp, p, out } => {
            let g = match generator {
                Generator::PreferentialAttachment => {
                    GraphSpec::PreferentialAttachment { n: *n, m: *m, r_exp: *r_exp }.build(&mut rng)?
                }
                Generator::ErdosRenyi => GraphSpec::ErdosRenyi { n: *n, p: *p }.build(&mut rng)?,
                Generator::Star => GraphSpec::Star { n: *n }.build(&mut rng)?,
                Generator::Path => GraphSpec::Path { n: *n }.build(&mut rng)?,
                Generator::Clique => clique(*n),
                Generator::HubCliques => GraphSpec::HubCliques { n: *n }.build(&mut rng)?,
                Generator::CliqueOfCliques => GraphSpec::CliqueOfCliques { n: *n }.build(&mut rng)?,
            };
            let text = write_edge_list(&g);
            match out {
                Some(path) => {
                    std::fs::write(path, text)?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::ConflictGraph { graph, estimand } => {
            let g = load_graph(graph)?;
            let h = build_conflict_graph(&g, &load_estimand(estimand)?)?;
            let edges: Vec<(usize, usize)> = h.edges().filter(|(i, j)| i != j).collect();
            Ok(match cli.format {
                None => write_edge_list(&h),
                Some(Format::Json) => {
                    let lambda = largest_eigenvalue(&h, DEFAULT_TOL, DEFAULT_MAX_ITER)?.lambda;
                    let v = serde_json::json!({ "n": h.n(), "lambda": tidy(lambda), "edges": edges });
                    format!("{v}\n")
                }
                Some(Format::Csv) => {
                    let mut s = String::from("i,j\n");
                    for (i, j) in edges {
                        writeln!(s, "{i},{j}").unwrap();
                    }
                    s
                }
            })
        }
        Command::Ordering { graph, estimand, kind } => {
            let g = load_graph(graph)?;
            let d = ConflictGraphDesign::new(g, &load_estimand(estimand)?, DEFAULT_R, (*kind).into())?;
            Ok(match cli.format {
                Some(Format::Csv) => {
                    let mut s = String::from("position,unit\n");
                    for (pos, u) in d.ord.order().iter().enumerate() {
                        writeln!(s, "{},{u}", pos + 1).unwrap();
                    }
                    s
                }
                _ => format!("{}\n", serde_json::to_string(d.ord.order())?),
            })
        }
        Command::Lambda { graph, estimand } => {
            let g = load_graph(graph)?;
            let h = build_conflict_graph(&g, &load_estimand(estimand)?)?;
            let s = largest_eigenvalue(&h, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let lambda = tidy(s.lambda);
            Ok(match cli.format {
                None => format!("{lambda:?}\n"),
                Some(Format::Json) => {
                    let v = serde_json::json!({ "lambda": lambda, "iterations": s.iterations, "residual": s.residual });
                    format!("{v}\n")
                }
                Some(Format::Csv) => {
                    format!("lambda,iterations,residual\n{lambda:?},{},{:?}\n", s.iterations, s.residual)
                }
            })
        }
        Command::Sample { design, draws } => {
            let d = build_design(design)?;
            let mut s = String::new();
            if cli.format == Some(Format::Csv) {
                s.push_str("u,z\n");
            }
            for _ in 0..*draws {
                let draw = d.sample(&mut rng);
                match cli.format {
                    None => writeln!(s, "{draw}").unwrap(),
                    Some(Format::Json) => {
                        let v = serde_json::json!({ "u": draw.u_string(), "z": draw.z_string() });
                        writeln!(s, "{v}").unwrap();
                    }
                    Some(Format::Csv) => writeln!(s, "{},{}", draw.u_string(), draw.z_string()).unwrap(),
                }
            }
            Ok(s)
        }
        Command::Probs { design, unit, contrast: k, other_unit, other_contrast } => {
            let d = build_design(design)?;
            d.g.check_vertex(*unit)?;
            let k = contrast(*k)?;
            let (prob, cov) = match other_unit {
                None => (d.prob_single(*unit), None),
                Some(j) => {
                    d.g.check_vertex(*j)?;
                    let l = contrast(*other_contrast)?;
                    (d.prob_pair(*unit, k, *j, l), Some(d.covariance_entry(*unit, k, *j, l)))
                }
            };
            Ok(match (cli.format, cov) {
                (None, None) => format!("{prob:?}\n"),
                (None, Some(c)) => format!("{prob:?} {c:?}\n"),
                (Some(Format::Json), _) => format!("{}\n", serde_json::json!({ "prob": prob, "covariance": cov })),
                (Some(Format::Csv), _) => {
                    format!("prob,covariance\n{prob:?},{}\n", cov.map(|c| format!("{c:?}")).unwrap_or_default())
                }
            })
        }
        Command::Estimate { design, draws, outcomes, alpha, exact } => {
            let d = build_design(design)?;
            let o = OutcomeTable::read_csv(outcomes)?;
            if o.n() != d.n() {
                return Err(Error::Dimension { expected: d.n(), got: o.n() }.into());
            }
            let text = if draws.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin())?
            } else {
                std::fs::read_to_string(draws)?
            };
            let lam_v = lambda_v_cached(&d.h, &d.ord, &d.params)?;
            let mut s = String::new();
            if cli.format == Some(Format::Csv) {
                s.push_str("tau_hat,vb,vb_hat,var_exact,alpha,cheb_lo,cheb_hi,wald_lo,wald_hi\n");
            }
            for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let draw = parse_draw(line, &d).map_err(|m| Failure::Usage(format!("draw line {}: {m}", idx + 1)))?;
                let rep = EstimateReport::new(&d, &o, &draw, lam_v, *alpha, *exact)?;
                match cli.format {
                    Some(Format::Csv) => writeln!(
                        s,
                        "{:?},{:?},{:?},{},{:?},{:?},{:?},{:?},{:?}",
                        rep.tau_hat,
                        rep.vb,
                        rep.vb_hat,
                        rep.var_exact.map(|v| format!("{v:?}")).unwrap_or_default(),
                        rep.alpha,
                        rep.ci_cheb.0,
                        rep.ci_cheb.1,
                        rep.ci_wald.0,
                        rep.ci_wald.1
                    )
                    .unwrap(),
                    _ => writeln!(s, "{}", serde_json::to_string(&rep)?).unwrap(),
                }
            }
            Ok(s)
        }
        Command::Simulate { config, out } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| Failure::Usage(format!("cannot read config `{}`: {e}", config.display())))?;
            let mut cfg: SimConfig = serde_json::from_str(&text)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let report = run_simulation(&cfg)?;
            let body = match cli.format {
                Some(Format::Json) => report.to_json()? + "\n",
                _ => report.to_csv()?,
            };
            match out {
                Some(path) => {
                    std::fs::write(path, body)?;
                    Ok(String::new())
                }
                None => Ok(body),
            }
        }
        Command::OracleCheck => {
            let report = run_battery()?;
            let body = match cli.format {
                Some(Format::Csv) => {
                    let mut s = String::from("check,max_deviation,tolerance,fixtures,passed\n");
                    for c in &report.checks {
                        writeln!(s, "{},{:e},{:e},{},{}", c.name, c.max_deviation, c.tolerance, c.fixtures, c.passed)
                            .unwrap();
                    }
                    s
                }
                _ => serde_json::to_string_pretty(&report)? + "\n",
            };
            if report.passed {
                Ok(body)
            } else {
                print!("{body}");
                Err(Failure::Battery)
            }
        }
    }
}

/// Parses a `U Z` line; `Z` must be the realization of `U`.
fn parse_draw(line: &str, d: &ConflictGraphDesign) -> std::result::Result<DesignDraw, String> {
    let mut parts = line.split_whitespace();
    let u_text = parts.next().ok_or("empty line")?;
    let u: Vec<Desired> =
        u_text.chars().map(Desired::from_symbol).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if u.len() != d.n() {
        return Err(format!("U has {} symbols, graph has {} units", u.len(), d.n()));
    }
    let z = d.realize(&u);
    if let Some(z_text) = parts.next() {
        let given: Vec<bool> = z_text
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(format!("Z must be a bitstring, found `{c}`")),
            })
            .collect::<Result<_, _>>()?;
        if given != z {
            return Err("Z is not the realization of U under this design".into());
        }
    }
    Ok(DesignDraw { u, z })
}
