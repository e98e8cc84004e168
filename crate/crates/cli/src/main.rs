//! Command-line front end: parse atlas/bundle/splitting/series files,
//! dispatch the requested computation, and print canonical reports.
//!
//! Exit codes: 0 on PASS/success, 1 on FAIL or an unsolvable/non-invertible
//! outcome, 2 on input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use z2n_core::{
    build_splitting_iso, linearize, parse_file_with_convention, verify_splitting, Error,
    ParsedFile, SignRule, SolveOrder, SplittingIso,
};

#[derive(Parser)]
#[command(
    name = "z2n",
    version,
    about = "Symbolic engine for Z2^n-graded algebra and supergeometry"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the cocycle condition on every declared triple (and mutual
    /// inverses where both orientations exist)
    CheckCocycle {
        /// Atlas file
        input: PathBuf,
        /// Truncation order for the comparison
        #[arg(long, default_value_t = 4)]
        k: u32,
        /// Override the convention named in the file (zsp, parity, comm)
        #[arg(long)]
        convention: Option<String>,
    },
    /// Reinterpret commutative transition data over graded variables
    Superize {
        /// Atlas file with convention=comm
        input: PathBuf,
        /// Target convention (zsp or parity)
        #[arg(long)]
        convention: String,
        /// Write the superized atlas here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Double an arity-1 atlas into its tangent atlas with bidegrees
    /// (0,0), (0,1), (1,0), (1,1)
    TangentLift {
        /// Atlas file with n=1
        input: PathBuf,
        /// Write the lifted atlas here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract the linear skeleton of an atlas as a graded vector bundle
    Linearize {
        /// Atlas file
        input: PathBuf,
        /// Write the bundle file here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and verify a splitting isomorphism onto the split model of the
    /// atlas's linearization
    Split {
        /// Atlas file
        input: PathBuf,
        /// Splitting order (mod J^{k+1})
        #[arg(long)]
        k: u32,
        /// Degree bound for base-polynomial coefficients in the solves
        #[arg(long = "D", default_value_t = 3)]
        degree_bound: u32,
        /// Write the isomorphism (a splitting file) here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a splitting file against its atlas
    Verify {
        /// Atlas file
        atlas: PathBuf,
        /// Splitting file with the chart-wise morphisms
        morphisms: PathBuf,
        /// Verification order (defaults to the order in the file)
        #[arg(long)]
        k: Option<u32>,
    },
    /// Print the canonical form of every expression in a series file
    Eval {
        /// Series file
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::UnsolvableAtBound { .. }
                | Error::NonInvertibleLinearPart(_)
                | Error::CocyclePrecondition(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Syntax {
        line: 0,
        col: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })
}

fn write_out(out: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Syntax {
            line: 0,
            col: 0,
            msg: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_atlas(path: &Path, convention: Option<SignRule>) -> Result<z2n_core::Atlas, Error> {
    match parse_file_with_convention(&read(path)?, convention)? {
        ParsedFile::Atlas(a) => Ok(a),
        _ => Err(Error::MalformedAtlas(format!(
            "{} is not an atlas file",
            path.display()
        ))),
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, Error> {
    match cmd {
        Cmd::CheckCocycle {
            input,
            k,
            convention,
        } => {
            let conv = convention.as_deref().map(SignRule::parse).transpose()?;
            let atlas = load_atlas(&input, conv)?;
            let report = atlas.check_cocycle(k)?;
            print!("{}", report.to_text());
            Ok(exit_pass(report.pass()))
        }
        Cmd::Superize {
            input,
            convention,
            out,
        } => {
            let rule = SignRule::parse(&convention)?;
            let atlas = load_atlas(&input, None)?;
            let superized = atlas.superize(rule)?;
            write_out(out.as_ref(), &superized.to_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::TangentLift { input, out } => {
            let atlas = load_atlas(&input, None)?;
            let lifted = atlas.tangent_lift()?;
            write_out(out.as_ref(), &lifted.to_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Linearize { input, out } => {
            let atlas = load_atlas(&input, None)?;
            let bundle = linearize(&atlas)?;
            write_out(out.as_ref(), &bundle.to_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Split {
            input,
            k,
            degree_bound,
            out,
        } => {
            if k < 1 {
                return Err(Error::MalformedAtlas("--k must be at least 1".into()));
            }
            let atlas = load_atlas(&input, None)?;
            let iso = build_splitting_iso(&atlas, k, degree_bound, SolveOrder::Declared)?;
            let report = verify_splitting(&atlas, &iso, k)?;
            write_out(out.as_ref(), &iso.to_text(&atlas))?;
            if out.is_some() {
                print!("{}", report.to_text());
            } else {
                eprint!("{}", report.to_text());
            }
            Ok(exit_pass(report.pass()))
        }
        Cmd::Verify {
            atlas,
            morphisms,
            k,
        } => {
            let atlas = load_atlas(&atlas, None)?;
            let spec = match parse_file_with_convention(&read(&morphisms)?, None)? {
                ParsedFile::Splitting(s) => s,
                _ => {
                    return Err(Error::MalformedAtlas(format!(
                        "{} is not a splitting file",
                        morphisms.display()
                    )))
                }
            };
            let order = k.unwrap_or(spec.order);
            let iso = SplittingIso::from_spec(&spec, &atlas)?;
            let report = verify_splitting(&atlas, &iso, order)?;
            print!("{}", report.to_text());
            Ok(exit_pass(report.pass()))
        }
        Cmd::Eval { input } => {
            let file = match parse_file_with_convention(&read(&input)?, None)? {
                ParsedFile::Series(f) => f,
                _ => {
                    return Err(Error::MalformedAtlas(format!(
                        "{} is not a series file",
                        input.display()
                    )))
                }
            };
            for s in &file.exprs {
                println!("{s}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_pass(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
