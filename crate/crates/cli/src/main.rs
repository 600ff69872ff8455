use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stackpolicy::cwpds::SolverOptions;
use stackpolicy::model::{parse_model, ProgramModel};
use stackpolicy::oracle::{oracle_policy, DEFAULT_BOUND};
use stackpolicy::permgen::{checkpoints, generate_permissions, Permission, PermissionSet};
use stackpolicy::policygen::{
    check_policy, emit_policy, encode, generate_policy, parse_table_policy, Policy, PolicyFormat,
};
use stackpolicy::weights::DEFAULT_TUPLE_CAP;
use stackpolicy::MethodId;

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_FAIL: u8 = 2;
const EXIT_LIMIT: u8 = 3;

/// Infers least-privilege stack-inspection policies from a program model.
#[derive(Parser)]
#[command(name = "stackpolicy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the access-control policy for a model.
    Analyze {
        model: PathBuf,
        /// Write the policy here instead of standard output.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[arg(long, default_value_t = PolicyFormat::Table)]
        format: PolicyFormat,
        /// Largest weight the solver may build.
        #[arg(long, default_value_t = DEFAULT_TUPLE_CAP)]
        tuple_cap: usize,
    },
    /// Check a table-format policy against the generated one.
    Check {
        model: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TUPLE_CAP)]
        tuple_cap: usize,
    },
    /// Compute the policy by path enumeration.
    Oracle {
        model: PathBuf,
        /// How many times a path may reuse one call edge.
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: usize,
        /// Also run the solver and fail on any difference.
        #[arg(long)]
        compare: bool,
        #[arg(long, default_value_t = DEFAULT_TUPLE_CAP)]
        tuple_cap: usize,
    },
    /// Print the rule system, calling contexts and checkpoints.
    Dump { model: PathBuf },
}

/// A failed command: message for standard error and the exit status.
struct Failure(u8, String);

impl From<stackpolicy::Error> for Failure {
    fn from(e: stackpolicy::Error) -> Self {
        let code = if e.is_resource_limit() { EXIT_LIMIT } else { EXIT_INPUT };
        Failure(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    let outcome = match cli.command {
        Command::Analyze {
            model,
            emit,
            format,
            tuple_cap,
        } => analyze(&model, emit.as_deref(), format, tuple_cap),
        Command::Check {
            model,
            policy,
            tuple_cap,
        } => check(&model, &policy, tuple_cap),
        Command::Oracle {
            model,
            bound,
            compare,
            tuple_cap,
        } => oracle(&model, bound, compare, tuple_cap),
        Command::Dump { model } => dump(&model),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ProgramModel, Failure> {
    let model = parse_model(&read(path)?)
        .map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    for lint in model.lints() {
        eprintln!("{lint}");
    }
    Ok(model)
}

fn permissions(model: &ProgramModel) -> Result<PermissionSet, Failure> {
    let perms = generate_permissions(model).map_err(stackpolicy::Error::from)?;
    for d in &perms.diagnostics {
        eprintln!("note: {d}");
    }
    for p in &perms.perms {
        let ctx = perms.contexts(p);
        if ctx.len() <= 8 {
            eprintln!("permission {p} under {ctx}");
        } else {
            eprintln!("permission {p} under {} contexts", ctx.len());
        }
    }
    Ok(perms)
}

fn solve(model: &ProgramModel, perms: &PermissionSet, tuple_cap: usize) -> Result<Policy, Failure> {
    let opts = SolverOptions {
        tuple_cap,
        ..SolverOptions::default()
    };
    let (policy, weight) = generate_policy(model, perms, opts).map_err(stackpolicy::Error::from)?;
    eprintln!("tuples: {}", weight.len());
    Ok(policy)
}

fn analyze(path: &Path, emit: Option<&Path>, format: PolicyFormat, tuple_cap: usize) -> Result<u8, Failure> {
    let model = load(path)?;
    let perms = permissions(&model)?;
    let policy = solve(&model, &perms, tuple_cap)?;
    let text = emit_policy(&policy, format);
    match emit {
        Some(out) => fs::write(out, text)
            .map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", out.display())))?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn check(path: &Path, policy_path: &Path, tuple_cap: usize) -> Result<u8, Failure> {
    let model = load(path)?;
    let given = parse_table_policy(&read(policy_path)?)
        .map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", policy_path.display())))?;
    let perms = permissions(&model)?;
    let generated = solve(&model, &perms, tuple_cap)?;
    let report = check_policy(&given, &generated);
    let extra: usize = report.over_granted.values().map(|s| s.len()).sum();
    if extra > 0 {
        eprintln!("note: {extra} grant(s) exceed what the analysis requires");
    }
    if report.passed() {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        print!("FAIL\n{report}");
        Ok(EXIT_FAIL)
    }
}

fn oracle(path: &Path, bound: usize, compare: bool, tuple_cap: usize) -> Result<u8, Failure> {
    if bound == 0 {
        return Err(Failure(EXIT_INPUT, "--bound must be at least 1".into()));
    }
    let model = load(path)?;
    let perms = permissions(&model)?;
    let reference = oracle_policy(&model, &perms, bound);
    print!("{}", emit_policy(&reference, PolicyFormat::Table));
    if !compare {
        return Ok(EXIT_OK);
    }
    let engine = solve(&model, &perms, tuple_cap)?;
    let methods: BTreeSet<&MethodId> = reference.grants.keys().chain(engine.grants.keys()).collect();
    for m in methods {
        let (want, got) = (reference.permissions_of(m), engine.permissions_of(m));
        if want != got {
            let show = |ps: &BTreeSet<Permission>| {
                ps.iter().map(Permission::to_string).collect::<Vec<_>>().join(", ")
            };
            eprintln!("differs at method {m}: oracle {{{}}} engine {{{}}}", show(&want), show(&got));
            return Ok(EXIT_FAIL);
        }
    }
    eprintln!("oracle and engine agree");
    Ok(EXIT_OK)
}

fn dump(path: &Path) -> Result<u8, Failure> {
    let model = load(path)?;
    let sys = encode(&model).map_err(stackpolicy::Error::from)?;
    print!("{}", sys.dump());
    println!("[contexts]");
    for (m, fam) in model.phi_meth() {
        println!("{m}: {fam}");
    }
    println!("[checkpoints]");
    for site in checkpoints(&model) {
        println!("{site}");
    }
    Ok(EXIT_OK)
}
