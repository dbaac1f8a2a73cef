//! Command-line front end: every operation of the solver behind one binary
//! with reproducible, seed-addressed outputs.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure (quadrature or
//! root finding), 3 invariant violation detected at runtime.

use clap::{Parser, Subcommand};
use mmot::discrete;
use mmot::dual::{self, CostProfile, DualTriple};
use mmot::heuristic::{self, CouplingState, MarginalSpec, RunStatus};
use mmot::ks;
use mmot::primal::{PrimalSampler, TriangleDensities};
use mmot::support;
use mmot::{Error, ModelConstants};
use rand::SeedableRng;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mmot",
    version,
    about = "Explicit solutions of the cube transport problem with cost xyz"
)]
struct Cli {
    /// Bound on internal parallelism (default: machine parallelism).
    /// Numeric output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the transcendental equation and print the model constants.
    Constants {
        /// Residual tolerance for the root solve.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Emit a JSON object instead of text lines.
        #[arg(long)]
        json: bool,
    },
    /// Membership residuals of a cube point against the support set.
    CheckM {
        x: f64,
        y: f64,
        z: f64,
        /// Membership tolerance for the ON/OFF verdict.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Histogram of positive inertia indices over random inputs.
    Inertia {
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Tabulate the one-dimensional densities to CSV.
    Densities {
        /// Number of grid points on [0, 1].
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw samples of the explicit optimal coupling to CSV.
    SamplePrimal {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kolmogorov-Smirnov uniformity test of the sampler's marginals.
    MarginalTest {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Tabulate the dual potential and diagonal feasibility margins.
    Dual {
        /// Cost profile: identity, square or exp.
        #[arg(long)]
        cost: String,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print primal value, dual value and their gap for a cost profile.
    DualityGap {
        #[arg(long)]
        cost: String,
    },
    /// Monotonize a random coupling and write the final cloud to CSV.
    Heuristic {
        /// Algorithm: general or sorting.
        #[arg(long)]
        algo: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Marginal law: uniform or sf.
        #[arg(long, default_value = "uniform")]
        marginal: String,
        /// Swap budget (general) or pass budget (sorting).
        #[arg(long, default_value_t = 1_000_000)]
        max_iters: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimize the triple-partition cost, exhaustively or heuristically.
    Discrete {
        #[arg(long)]
        n: usize,
        /// Exhaustive enumeration (n <= 7) instead of the heuristic.
        #[arg(long)]
        brute: bool,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// Required unless --brute is set.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the integer partition from the discretized coupling.
    Partition {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Lossless float formatting for CSV cells (17 significant digits).
fn csv(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Domain { .. }
        | Error::SizeLimit { .. }
        | Error::InvalidTable(_)
        | Error::InvalidCost(_) => 1,
        Error::Bracket { .. } | Error::Quadrature { .. } | Error::RejectionStall { .. } => 2,
        Error::EmptyCloud
        | Error::InvalidPartition(_)
        | Error::FiberRepair { .. }
        | Error::LengthMismatch(_, _)
        | Error::BarycentricConstraint(_) => 3,
    }
}

fn solve(tol: f64) -> Result<ModelConstants, Error> {
    mmot::solve_constants(tol)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };

    if let Some(t) = cli.threads {
        if t == 0 {
            return usage_error("--threads must be at least 1");
        }
        // Ignore the error if a pool already exists; the bound still holds
        // for the pool built first.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }

    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Constants { tol, json } => {
            let k = solve(tol)?;
            if json {
                let obj = serde_json::json!({
                    "l": k.l,
                    "r": k.r,
                    "alpha": k.alpha,
                    "c": k.c,
                    "primal_value": k.primal_value,
                });
                println!("{obj}");
            } else {
                println!("l            = {:.15}", k.l);
                println!("r            = {:.15}", k.r);
                println!("alpha        = {:.15}", k.alpha);
                println!("c            = {:.15}", k.c);
                println!("primal_value = {:.15}", k.primal_value);
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::CheckM { x, y, z, tol } => {
            let k = solve(1e-12)?;
            let res = support::support_residual(x, y, z, &k)?;
            println!("rx  = {:.6e}", res.rx);
            println!("ry  = {:.6e}", res.ry);
            println!("rz  = {:.6e}", res.rz);
            println!("max = {:.6e}", res.max_residual);
            let verdict = if res.is_on_support(tol) { "ON" } else { "OFF" };
            println!("verdict: {verdict} (tolerance {tol:e})");
            Ok(ExitCode::SUCCESS)
        }

        Command::Inertia { samples, seed } => {
            use rand::Rng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let mut histogram = [0u64; 4];
            for _ in 0..samples {
                let rep = support::inertia_index(
                    rng.random(),
                    rng.random(),
                    rng.random(),
                    rng.random(),
                    rng.random(),
                    rng.random(),
                );
                histogram[rep.positive_index as usize] += 1;
            }
            println!("positive-index histogram over {samples} samples (seed {seed}):");
            for (index, count) in histogram.iter().enumerate() {
                println!("  {index}: {count}");
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Densities { grid, out } => {
            if grid < 2 {
                return Err(Error::Domain {
                    name: "grid",
                    value: grid as f64,
                    domain: "[2, inf)",
                });
            }
            let k = solve(1e-12)?;
            let d = TriangleDensities::new(&k)?;
            let mut w = BufWriter::new(File::create(&out).map_err(io_err)?);
            writeln!(w, "t,p,P,q,f,p_star,q_star").map_err(io_err)?;
            for i in 0..grid {
                let t = i as f64 / (grid - 1) as f64;
                let p = if t <= 1.0 / 3.0 {
                    d.layered(t)?
                } else {
                    f64::NAN
                };
                let big_p = if t <= 1.0 / 3.0 {
                    d.layered_integral(t)?
                } else {
                    f64::NAN
                };
                let q = if t <= 2.0 / 3.0 {
                    d.median(t)?
                } else {
                    f64::NAN
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    csv(t),
                    csv(p),
                    csv(big_p),
                    csv(q),
                    csv(d.axis_density(t)),
                    csv(d.layered_projection(t)?),
                    csv(d.median_projection(t)?)
                )
                .map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            println!("wrote {} density rows to {}", grid, out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::SamplePrimal { n, seed, out } => {
            if n == 0 {
                return Err(Error::Domain {
                    name: "n",
                    value: 0.0,
                    domain: "[1, inf)",
                });
            }
            let k = solve(1e-12)?;
            let cloud = PrimalSampler::new(&k)?.sample(n, seed)?;
            let mut w = BufWriter::new(File::create(&out).map_err(io_err)?);
            writeln!(w, "x,y,z,component,residual").map_err(io_err)?;
            for (p, tag) in cloud.points.iter().zip(&cloud.components) {
                let res = support::support_residual(p[0], p[1], p[2], &k)?;
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    csv(p[0]),
                    csv(p[1]),
                    csv(p[2]),
                    tag.label(),
                    csv(res.max_residual)
                )
                .map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            println!("wrote {n} samples (seed {seed}) to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::MarginalTest { n, seed } => {
            if n == 0 {
                return Err(Error::Domain {
                    name: "n",
                    value: 0.0,
                    domain: "[1, inf)",
                });
            }
            let k = solve(1e-12)?;
            let cloud = PrimalSampler::new(&k)?.sample(n, seed)?;
            let threshold = ks::ks_threshold(n);
            let mut all_pass = true;
            for (axis, name) in ["x", "y", "z"].iter().enumerate() {
                let vals: Vec<f64> = cloud.points.iter().map(|p| p[axis]).collect();
                let stat = ks::uniform_ks_statistic(&vals);
                let pass = stat < threshold;
                all_pass &= pass;
                println!(
                    "axis {name}: D = {stat:.6e}, threshold = {threshold:.6e} -> {}",
                    if pass { "PASS" } else { "FAIL" }
                );
            }
            if all_pass {
                println!("marginals: PASS");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("marginals: FAIL");
                Ok(ExitCode::from(3))
            }
        }

        Command::Dual { cost, grid, out } => {
            if grid < 2 {
                return Err(Error::Domain {
                    name: "grid",
                    value: grid as f64,
                    domain: "[2, inf)",
                });
            }
            let profile = CostProfile::by_name(&cost).ok_or_else(|| {
                Error::InvalidCost(format!("unknown cost '{cost}' (identity, square, exp)"))
            })?;
            let k = solve(1e-12)?;
            let triple = DualTriple::symmetric(profile, &k)?;
            let mut w = BufWriter::new(File::create(&out).map_err(io_err)?);
            writeln!(w, "t,f_hat,margin").map_err(io_err)?;
            for i in 0..grid {
                let t = i as f64 / (grid - 1) as f64;
                writeln!(
                    w,
                    "{},{},{}",
                    csv(t),
                    csv(triple.potential(t)),
                    csv(triple.feasibility_margin(t, t, t))
                )
                .map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            println!("wrote {} potential rows to {}", grid, out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::DualityGap { cost } => {
            let profile = CostProfile::by_name(&cost).ok_or_else(|| {
                Error::InvalidCost(format!("unknown cost '{cost}' (identity, square, exp)"))
            })?;
            let k = solve(1e-12)?;
            let primal = dual::primal_cost(&profile, &k)?;
            let dual_value = dual::dual_value(profile, &k)?;
            println!("primal value = {primal:.15}");
            println!("dual value   = {dual_value:.15}");
            println!("gap          = {:.6e}", (primal - dual_value).abs());
            Ok(ExitCode::SUCCESS)
        }

        Command::Heuristic {
            algo,
            n,
            seed,
            marginal,
            max_iters,
            out,
        } => {
            if n == 0 {
                return Err(Error::Domain {
                    name: "n",
                    value: 0.0,
                    domain: "[1, inf)",
                });
            }
            let spec = match marginal.as_str() {
                "uniform" => MarginalSpec::Uniform01,
                "sf" => MarginalSpec::Sf,
                other => {
                    return Err(Error::InvalidTable(format!(
                        "unknown marginal '{other}' (uniform, sf)"
                    )))
                }
            };
            let k = solve(1e-12)?;
            let xs = heuristic::sample_marginal(&spec, n, seed)?;
            let ys = heuristic::sample_marginal(&spec, n, seed.wrapping_add(1))?;
            let zs = heuristic::sample_marginal(&spec, n, seed.wrapping_add(2))?;
            let state = CouplingState::from_marginals(&xs, &ys, &zs)?;

            let cost = CostProfile::identity();
            let out_state = match algo.as_str() {
                "general" => {
                    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed.wrapping_add(3));
                    heuristic::run_general(state, &cost, max_iters, &mut rng)
                }
                "sorting" => heuristic::run_sorting(state, max_iters),
                other => {
                    return Err(Error::InvalidTable(format!(
                        "unknown algorithm '{other}' (general, sorting)"
                    )))
                }
            };

            let mut w = BufWriter::new(File::create(&out).map_err(io_err)?);
            writeln!(w, "x,y,z,component,residual").map_err(io_err)?;
            let unit_cube = out_state
                .triples
                .iter()
                .all(|t| t.iter().all(|&v| (0.0..=1.0).contains(&v)));
            for t in &out_state.triples {
                let residual = if unit_cube {
                    support::support_residual(t[0], t[1], t[2], &k)?.max_residual
                } else {
                    f64::NAN
                };
                writeln!(
                    w,
                    "{},{},{},heuristic,{}",
                    csv(t[0]),
                    csv(t[1]),
                    csv(t[2]),
                    csv(residual)
                )
                .map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;

            let status = match out_state.status {
                RunStatus::Converged => "converged",
                RunStatus::BudgetExhausted => "budget exhausted",
                RunStatus::CycleDetected => "cycle detected",
                RunStatus::Pending => "pending",
            };
            println!("passes      = {}", out_state.pass_count);
            if algo == "general" {
                println!("swaps       = {}", out_state.swap_count);
            }
            println!("final cost  = {:.15}", out_state.total_cost(&cost));
            println!("status      = {status}");
            println!("wrote {n} triples to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Discrete {
            n,
            brute,
            restarts,
            seed,
        } => {
            let k = solve(1e-12)?;
            let (cost, method) = if brute {
                let (cost, _) = discrete::brute_force_min(n)?;
                (cost, "exhaustive".to_string())
            } else {
                let Some(seed) = seed else {
                    return Err(Error::Domain {
                        name: "seed",
                        value: f64::NAN,
                        domain: "a required u64 for stochastic runs (only --brute may omit it)",
                    });
                };
                let (cost, _) = discrete::heuristic_min(n, restarts, seed)?;
                (
                    cost,
                    format!("heuristic ({restarts} restarts, seed {seed})"),
                )
            };
            let rate = cost as f64 / (n as f64).powi(4);
            println!("method     = {method}");
            println!("min cost   = {cost}");
            println!("cost / n^4 = {rate:.15}");
            println!("C_P        = {:.15}", k.primal_value);
            Ok(ExitCode::SUCCESS)
        }

        Command::Partition {
            n,
            m,
            samples,
            seed,
            out,
        } => {
            let k = solve(1e-12)?;
            let masses = discrete::box_masses(n, samples, seed, &k)?;
            let counts = discrete::integerize(&masses, m)?;
            let partition = discrete::build_partition(&counts)?;
            let cost = partition.cost()?;
            let mut w = BufWriter::new(File::create(&out).map_err(io_err)?);
            writeln!(w, "a,b,c").map_err(io_err)?;
            for t in &partition.triples {
                writeln!(w, "{},{},{}", t[0], t[1], t[2]).map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            let nm = (n * m) as f64;
            println!("partition size  = {}", n * m);
            println!("cost            = {cost}");
            println!("cost / (nm)^4   = {:.15}", cost as f64 / nm.powi(4));
            println!("C_P             = {:.15}", k.primal_value);
            println!("wrote {} triples to {}", n * m, out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn io_err(err: std::io::Error) -> Error {
    Error::InvalidTable(format!("io error: {err}"))
}
