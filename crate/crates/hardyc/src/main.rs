//! Command-line surface: evaluate the potential, run verification suites,
//! print bound tables, estimate μ, and sweep R.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/input error.

use clap::{Parser, Subcommand};
use hardyc::geometry::{reduced_coords, LatticeConfig, ReducedCoords};
use hardyc::report::{
    bounds_record, potential_record, run_allegretto, run_identities, run_local,
    run_supersolution, run_thm35, suite_report, Check, RunManifest, SCHEMA,
};
use hardyc::spectral::{estimate_mu, sweep_r, Grid2D, GridPolicy, MuReport};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "hardyc", version, about = "Hardy-constant toolkit for the multipolar lattice potential")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the potential at one point (closed form, series, or both).
    Potential {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Cartesian point, comma-separated, d entries.
        #[arg(long)]
        point: Option<String>,
        /// Reduced point "a,rho".
        #[arg(long)]
        reduced: Option<String>,
        #[arg(long, default_value = "both")]
        method: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid "NsxNr" (sandwich suite).
        #[arg(long, default_value = "64x32")]
        grid: String,
        /// Pole-exclusion radius as a multiple of h.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Print the analytic constants (lower, upper, C1, alpha_opt).
    Bounds {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: f64,
    },
    /// Estimate μ(C_R) on a grid or a nested ladder.
    Mu {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value = "64x32")]
        grid: String,
        /// Comma-separated ladder "32x16,64x32,...", each step doubling.
        #[arg(long)]
        ladder: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Per-R bound table over a strictly decreasing R list.
    Sweep {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, value_name = "R1,R2,...")]
        r_list: String,
        #[arg(long, default_value = "csv")]
        out: String,
        /// Output file (stdout when omitted).
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        grid_ns: usize,
        #[arg(long, default_value_t = 32)]
        grid_nr: usize,
        #[arg(long, default_value_t = 1)]
        refinements: usize,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
}

/// Failure carrying the process exit code (1 check failure, 2 usage).
struct Failure {
    code: u8,
    message: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, message: msg.into() }
}

fn runtime(msg: impl Into<String>) -> Failure {
    Failure { code: 1, message: msg.into() }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HARDYC_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: HARDYC_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("malformed {what}: {t:?} is not a number")))
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<(usize, usize), Failure> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| usage(format!("malformed grid {s:?}, expected NsxNr")))?;
    let ns = a.parse().map_err(|_| usage(format!("malformed grid {s:?}")))?;
    let nr = b.parse().map_err(|_| usage(format!("malformed grid {s:?}")))?;
    Ok((ns, nr))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let started = Instant::now();
    match cli.cmd {
        Cmd::Potential { d, r, point, reduced, method, tol } => {
            let cfg = LatticeConfig::normalized(d, r).map_err(|e| usage(e.to_string()))?;
            let c = match (point, reduced) {
                (Some(p), None) => {
                    let coords = parse_floats(&p, "point")?;
                    reduced_coords(&coords, &cfg).map_err(|e| usage(e.to_string()))?
                }
                (None, Some(q)) => {
                    let v = parse_floats(&q, "reduced point")?;
                    if v.len() != 2 {
                        return Err(usage("reduced point must be \"a,rho\""));
                    }
                    ReducedCoords::new(v[0], v[1]).map_err(|e| usage(e.to_string()))?
                }
                _ => return Err(usage("provide exactly one of --point or --reduced")),
            };
            if !["closed", "series", "both"].contains(&method.as_str()) {
                return Err(usage(format!("unknown method {method:?}")));
            }
            let config = serde_json::json!({
                "d": d, "R": r, "a": c.a, "rho": c.rho, "method": method, "tol": tol,
            });
            let manifest = RunManifest::new("potential", config, 0, started);
            let rec = potential_record(c, &cfg, &method, tol, manifest)
                .map_err(|e| usage(e.to_string()))?;
            print_json(&rec);
            Ok(0)
        }
        Cmd::Verify { suite, d, r, samples, seed, grid, delta } => {
            let cfg = LatticeConfig::normalized(d, r).map_err(|e| usage(e.to_string()))?;
            let config = serde_json::json!({
                "d": d, "R": r, "samples": samples, "grid": grid, "delta": delta,
            });
            let checks = match suite.as_str() {
                "identities" => run_identities(&cfg, samples, seed),
                "supersolution" => run_supersolution(&cfg, samples, seed),
                "allegretto" => run_allegretto(&cfg, samples.min(20).max(2), seed),
                "local" => run_local(&cfg, samples, seed),
                "thm35" => run_thm35(&cfg, samples.min(50).max(3), seed),
                "sandwich" => {
                    let (ns, nr) = parse_grid(&grid)?;
                    let g = Grid2D::graded(ns, nr, &cfg, delta * cfg.h)
                        .map_err(|e| usage(e.to_string()))?;
                    let rep =
                        estimate_mu(&cfg, &[g]).map_err(|e| runtime(e.to_string()))?;
                    let mu = rep.estimates.last().unwrap().mu_hat;
                    Ok(vec![
                        Check {
                            name: "mu_hat >= lambda_lower - 1e-6".into(),
                            pass: rep.lower_ok,
                            margin: mu - rep.lower + 1e-6,
                            detail: format!("mu_hat = {mu}, lower = {}", rep.lower),
                        },
                        Check {
                            name: "mu_hat <= 1.05 * upper".into(),
                            pass: rep.upper_ok,
                            margin: 1.05 * rep.upper - mu,
                            detail: format!("mu_hat = {mu}, upper = {}", rep.upper),
                        },
                    ])
                }
                other => return Err(usage(format!("unknown suite {other:?}"))),
            }
            .map_err(|e| runtime(e.to_string()))?;
            let manifest = RunManifest::new("verify", config, seed, started);
            let rep = suite_report(&suite, checks, manifest);
            let ok = rep.pass;
            print_json(&rep);
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Bounds { d, r } => {
            let config = serde_json::json!({ "d": d, "R": r });
            let manifest = RunManifest::new("bounds", config, 0, started);
            let rec = bounds_record(d, r, manifest).map_err(|e| usage(e.to_string()))?;
            print_json(&rec);
            Ok(0)
        }
        Cmd::Mu { d, r, grid, ladder, delta } => {
            let cfg = LatticeConfig::normalized(d, r).map_err(|e| usage(e.to_string()))?;
            let grids: Vec<Grid2D> = match &ladder {
                Some(spec) => {
                    let sizes: Vec<(usize, usize)> = spec
                        .split(',')
                        .map(parse_grid)
                        .collect::<Result<_, _>>()?;
                    let base = Grid2D::graded(sizes[0].0, sizes[0].1, &cfg, delta * cfg.h)
                        .map_err(|e| usage(e.to_string()))?;
                    let mut grids = vec![base];
                    for &(ns, nr) in &sizes[1..] {
                        let next = grids.last().unwrap().refine();
                        if (next.n_s, next.n_r) != (ns, nr) {
                            return Err(usage(format!(
                                "ladder step {ns}x{nr} does not double {}",
                                grids.last().unwrap().label()
                            )));
                        }
                        grids.push(next);
                    }
                    grids
                }
                None => {
                    let (ns, nr) = parse_grid(&grid)?;
                    vec![Grid2D::graded(ns, nr, &cfg, delta * cfg.h)
                        .map_err(|e| usage(e.to_string()))?]
                }
            };
            let rep: MuReport =
                estimate_mu(&cfg, &grids).map_err(|e| runtime(e.to_string()))?;
            let config = serde_json::json!({
                "d": d, "R": r, "grids": grids.iter().map(|g| g.label()).collect::<Vec<_>>(),
                "delta": delta,
            });
            #[derive(Serialize)]
            struct MuRecord {
                schema: String,
                report: MuReport,
                manifest: RunManifest,
            }
            let pass = rep.sandwich_pass();
            print_json(&MuRecord {
                schema: SCHEMA.to_string(),
                report: rep,
                manifest: RunManifest::new("mu", config, 0, started),
            });
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Sweep { d, r_list, out, path, grid_ns, grid_nr, refinements, delta } => {
            let radii = parse_floats(&r_list, "R list")?;
            let policy = GridPolicy {
                base_n_s: grid_ns,
                base_n_r: grid_nr,
                refinements,
                delta_over_h: delta,
            };
            let rows = sweep_r(d, &radii, &policy).map_err(|e| match e {
                hardyc::Error::InvalidParameter(_) => usage(e.to_string()),
                other => runtime(other.to_string()),
            })?;
            let body = match out.as_str() {
                "csv" => hardyc::report::sweep_csv(&rows),
                "json" => {
                    let config = serde_json::json!({
                        "d": d, "R_list": radii, "policy": policy,
                    });
                    #[derive(Serialize)]
                    struct SweepRecord {
                        schema: String,
                        rows: Vec<hardyc::spectral::SweepRow>,
                        manifest: RunManifest,
                    }
                    let rec = SweepRecord {
                        schema: SCHEMA.to_string(),
                        rows,
                        manifest: RunManifest::new("sweep", config, 0, started),
                    };
                    serde_json::to_string_pretty(&rec).expect("serializable") + "\n"
                }
                other => return Err(usage(format!("unknown output format {other:?}"))),
            };
            match path {
                Some(p) => std::fs::write(&p, body)
                    .map_err(|e| runtime(format!("writing {}: {e}", p.display())))?,
                None => print!("{body}"),
            }
            Ok(0)
        }
    }
}
