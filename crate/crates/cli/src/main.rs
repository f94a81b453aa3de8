use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdp_product::format::{
    emit_program, parse_game, parse_graph, parse_program, parse_sign_matrix,
};
use sdp_product::library::{
    counterexample_program, fl_sigma_bar_prime_program, fl_sigma_program, gamma2inf_program,
    theta_program,
};
use sdp_product::structure::{check_conditions, TheoremRule};
use sdp_product::suite::{render, run_suite, suite_config};
use sdp_product::{product, Error, SdpProgram, SolverConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_OPTIMAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sdpprod",
    version,
    about = "Solve, check and multiply structured semidefinite programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a program file and print values, status and residuals.
    Solve {
        path: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Report which product theorem's hypotheses a program satisfies.
    Check { path: PathBuf },
    /// Write the tensor product of two program files.
    Product {
        left: PathBuf,
        right: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Build one of the library programs.
    Generate {
        kind: Kind,
        /// Graph, sign matrix or game file (not used by `counterexample`).
        input: Option<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every example check and print a pass/fail table.
    Suite {
        #[command(flatten)]
        tol: Tolerances,
    },
}

#[derive(Args)]
struct Tolerances {
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    feas_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl Tolerances {
    fn apply(&self, mut cfg: SolverConfig) -> SolverConfig {
        if let Some(v) = self.gap_tol {
            cfg.gap_tol = v;
        }
        if let Some(v) = self.feas_tol {
            cfg.feas_tol = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        cfg
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Theta,
    Gamma2inf,
    Counterexample,
    FlSigma,
    FlSigmaBar,
}

/// Error with the exit code it maps to.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. }
            | Error::Io(_)
            | Error::InvalidInput(_)
            | Error::InvalidProgram(_) => EXIT_INPUT,
            _ => EXIT_FAILURE,
        };
        Failure(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<SdpProgram, Failure> {
    let text = read(path)?;
    let p = parse_program(&text)
        .map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    p.ensure_valid()?;
    Ok(p)
}

fn write(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure(EXIT_FAILURE, format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(path: &Path, tol: &Tolerances) -> Result<u8, Failure> {
    let p = load(path)?;
    let cfg = tol.apply(SolverConfig::default());
    cfg.validate()?;
    let report = sdp_product::solve(&p, &cfg)?;
    let sol = &report.solution;
    let r = &sol.residuals;
    println!("status {}", report.status);
    println!("iterations {}", report.iterations);
    println!("primal {:.6}", sol.primal_value);
    println!("dual {:.6}", sol.dual_value);
    println!("gap {:.3e}", (sol.primal_value - sol.dual_value).abs());
    let worst = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
    println!("residual constraints {:.3e}", worst(&r.constraints));
    println!("residual nonneg {:.3e}", worst(&r.nonneg));
    println!("residual primal-psd {:.3e}", r.primal_psd);
    println!("residual dual-psd {:.3e}", r.dual_psd);
    println!("residual dual-sign {:.3e}", r.dual_sign);
    Ok(if report.is_optimal() {
        0
    } else {
        EXIT_NOT_OPTIMAL
    })
}

fn index_set(ix: &[usize]) -> String {
    let parts: Vec<String> = ix.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

fn cmd_check(path: &Path) -> Result<u8, Failure> {
    let p = load(path)?;
    let rep = check_conditions(&p)?;
    let witness = rep.span_witness.as_ref().map(|w| {
        if w.u.iter().all(|x| (x - 1.0).abs() <= 1e-12) {
            "all-ones".to_string()
        } else {
            let parts: Vec<String> = w.u.iter().map(|x| format!("{x}")).collect();
            format!("[{}]", parts.join(", "))
        }
    });
    let headline = match rep.theorem_applies {
        TheoremRule::Ms1 => "MS-1 applies (J PSD)".to_string(),
        TheoremRule::Ms2 => "MS-2 applies (bipartite, no non-negativity rows)".to_string(),
        TheoremRule::Main => format!("Main applies; u = {}", witness.clone().unwrap_or_default()),
        TheoremRule::None => {
            let why = match (&rep.bipartite, &rep.span_witness) {
                (None, _) => "no bipartite partition",
                (Some(_), None) => "bipartite, but J is not in the non-negative span of B",
                (Some(_), Some(_)) => "hypotheses not met",
            };
            format!("None ({why})")
        }
    };
    println!("{headline}");
    println!(
        "J psd: {}",
        if rep.cond1_psd_objective { "yes" } else { "no" }
    );
    match &rep.bipartite {
        Some(part) => println!(
            "partition: left {} right {}",
            index_set(&part.left()),
            index_set(&part.right())
        ),
        None => println!("partition: none"),
    }
    match (&rep.span_witness, witness) {
        (Some(w), Some(text)) => println!("span witness: u = {text} (residual {:.1e})", w.residual),
        _ => println!("span witness: none"),
    }
    Ok(0)
}

fn cmd_product(left: &Path, right: &Path, out: &Path) -> Result<u8, Failure> {
    let p = product(&load(left)?, &load(right)?)?;
    write(Some(out), &emit_program(&p))?;
    Ok(0)
}

fn cmd_generate(kind: Kind, input: Option<&Path>, out: Option<&Path>) -> Result<u8, Failure> {
    let need = |what: &str| {
        input.ok_or_else(|| {
            Failure(
                EXIT_INPUT,
                format!("this kind needs a {what} file as input"),
            )
        })
    };
    let wrap = |path: &Path, e: Error| Failure(EXIT_INPUT, format!("{}: {e}", path.display()));
    let p = match kind {
        Kind::Counterexample => counterexample_program(),
        Kind::Theta => {
            let path = need("graph")?;
            theta_program(&parse_graph(&read(path)?).map_err(|e| wrap(path, e))?)
        }
        Kind::Gamma2inf => {
            let path = need("sign matrix")?;
            gamma2inf_program(&parse_sign_matrix(&read(path)?).map_err(|e| wrap(path, e))?)
        }
        Kind::FlSigma => {
            let path = need("game")?;
            fl_sigma_program(&parse_game(&read(path)?).map_err(|e| wrap(path, e))?)
        }
        Kind::FlSigmaBar => {
            let path = need("game")?;
            fl_sigma_bar_prime_program(&parse_game(&read(path)?).map_err(|e| wrap(path, e))?)?
        }
    };
    write(out, &emit_program(&p))?;
    Ok(0)
}

fn cmd_suite(tol: &Tolerances) -> Result<u8, Failure> {
    let cfg = tol.apply(suite_config());
    cfg.validate()?;
    let rows = run_suite(&cfg)?;
    print!("{}", render(&rows));
    Ok(if rows.iter().all(|r| r.pass) {
        0
    } else {
        EXIT_FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { path, tol } => cmd_solve(path, tol),
        Command::Check { path } => cmd_check(path),
        Command::Product { left, right, out } => cmd_product(left, right, out),
        Command::Generate { kind, input, out } => {
            cmd_generate(*kind, input.as_deref(), out.as_deref())
        }
        Command::Suite { tol } => cmd_suite(tol),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
