//! Front end for the `persuade` binary. Every command returns an [`Output`]
//! (report text, files to write, exit code) so it can be tested in-process.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use persuasion_core::concavify::{
    check_unique_optimal, commitment_solve, concave_closure, credibility_frontier,
    CommitmentSolution,
};
use persuasion_core::equilibrium::{
    construct_credible_eq, construct_full_disclosure_eq, construct_near_commitment_eq,
    repeated_test_equilibrium,
};
use persuasion_core::model::{
    check_strict_optimality, full_disclosure_payoff, indirect_utility_max, is_monotone,
};
use persuasion_core::profile::StrategyProfile;
use persuasion_core::rational::{fmt_dec, fmt_q};
use persuasion_core::scenario::{builtin, parse_scenario, Scenario, BUILTIN};
use persuasion_core::verifier::{
    approximation_constants, check_pebe, ex_ante_payoff, game_for_profile,
    in_uniform_neighborhood, reveal_threshold, simulate, EquilibriumCertificate, TruncatedGame,
};
use persuasion_core::{Belief, Error, Q};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAIL: u8 = 1;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

/// Header of the `classify` CSV.
pub const FRONTIER_HEADER: &str =
    "p,p_dec,indirect_utility,indirect_utility_dec,concave_closure,concave_closure_dec,credible,witness,boundary";

#[derive(Debug, Parser)]
#[command(name = "persuade", version, about = "Persuasion with private additional experiments")]
pub struct Cli {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Directory for report, profile and certificate files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Node budget for truncated games.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Grid size for frontiers and constrained LPs.
    #[arg(long, global = true)]
    pub grid: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Commitment value, full-disclosure value, optimal experiment and
    /// assumption checks.
    Solve,
    /// Credibility frontier and concave closure on a grid (two states).
    Classify,
    /// Builds an equilibrium profile and verifies it.
    Construct {
        #[arg(value_enum)]
        which: Construction,
        /// Perturbation size for the near-commitment construction ("p/q").
        #[arg(long)]
        eps: Option<String>,
    },
    /// Checks a profile and writes its certificate.
    Verify {
        /// Profile file; defaults to the scenario's profile.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Print the worst deviation as a plan.
        #[arg(long)]
        explain: bool,
    },
    /// Type-count thresholds and neighborhood membership.
    Bounds {
        #[arg(long)]
        theta: Option<usize>,
        /// Non-credible belief as the probability of the second state ("p/q").
        #[arg(long)]
        low: Option<String>,
        /// Ball radius around the non-credible belief ("p/q").
        #[arg(long)]
        radius: Option<String>,
    },
    /// Monte Carlo estimate of a profile's payoff against the exact value.
    Simulate {
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Build the profile instead of reading one.
        #[arg(long, value_enum)]
        construct: Option<Construction>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Construction {
    Credible,
    NearCommitment,
    FullDisclosure,
    RepeatedTest,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    /// `(file name, contents)` for the `--out` directory.
    pub files: Vec<(String, String)>,
    pub code: u8,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        _ => EXIT_PRECONDITION,
    }
}

fn failure(e: &Error) -> Output {
    Output {
        stderr: format!("error: {e}\n"),
        code: exit_code(e),
        ..Output::default()
    }
}

fn both(v: &Q) -> String {
    format!("{} ({})", fmt_q(v), fmt_dec(v))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn parse_rational(flag: &str, text: &str) -> Result<Q, Error> {
    persuasion_core::rational::parse_q(text)
        .map_err(|e| Error::InvalidInput(format!("--{flag}: {e}")))
}

/// Loads a scenario from a file, or by built-in name. Returns the scenario
/// and the directory that relative profile paths are resolved against.
pub fn load_scenario(arg: &str) -> Result<(Scenario, PathBuf), Error> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {arg}: {e}")))?;
        let scenario = parse_scenario(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((scenario, dir));
    }
    builtin(arg).map(|s| (s, PathBuf::from("."))).ok_or_else(|| {
        Error::InvalidInput(format!(
            "no scenario file {arg:?} and no built-in with that name (built-ins: {})",
            BUILTIN.join(", ")
        ))
    })
}

fn read_profile(path: &Path) -> Result<StrategyProfile, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Scenario {
        field: "profile".into(),
        line: e.line(),
        message: e.to_string(),
    })
}

struct Context {
    scenario: Scenario,
    dir: PathBuf,
}

impl Context {
    fn profile_path(&self, flag: Option<&PathBuf>) -> Result<PathBuf, Error> {
        match (flag, &self.scenario.profile) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(p)) => Ok(self.dir.join(p)),
            (None, None) => Err(Error::InvalidInput(
                "no profile: pass --profile or set `profile` in the scenario".into(),
            )),
        }
    }

    fn game(&self, profile: &StrategyProfile, cap: u64) -> Result<TruncatedGame, Error> {
        let s = &self.scenario;
        game_for_profile(&s.environment, &s.types, profile, cap, s.options.budget)
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Output {
    let Some(arg) = &cli.scenario else {
        return failure(&Error::InvalidInput("--scenario is required".into()));
    };
    let (mut scenario, dir) = match load_scenario(arg) {
        Ok(x) => x,
        Err(e) => return failure(&e),
    };
    if let Some(s) = cli.seed {
        scenario.options.seed = s;
    }
    if let Some(b) = cli.budget {
        scenario.options.budget = b;
    }
    if let Some(g) = cli.grid {
        scenario.options.grid = g;
    }
    let ctx = Context { scenario, dir };
    let result = match &cli.command {
        Command::Solve => cmd_solve(&ctx),
        Command::Classify => cmd_classify(&ctx),
        Command::Construct { which, eps } => cmd_construct(&ctx, *which, eps.as_deref()),
        Command::Verify { profile, explain } => cmd_verify(&ctx, profile.as_ref(), *explain),
        Command::Bounds { theta, low, radius } => {
            cmd_bounds(&ctx, *theta, low.as_deref(), radius.as_deref())
        }
        Command::Simulate {
            profile,
            construct,
            samples,
        } => cmd_simulate(&ctx, profile.as_ref(), *construct, *samples),
    };
    result.unwrap_or_else(|e| failure(&e))
}

/// Writes `files` into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in files {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn write_solution(out: &mut String, env: &persuasion_core::PayoffEnvironment, sol: &CommitmentSolution) {
    for ((belief, w), a) in sol.experiment.support.iter().zip(&sol.actions) {
        let _ = writeln!(
            out,
            "  posterior {} weight {} action {} value {}",
            belief.display(),
            both(w),
            a,
            both(&indirect_utility_max(env, belief))
        );
    }
}

pub fn cmd_solve_report(scenario: &Scenario) -> Result<(CommitmentSolution, Output), Error> {
    let env = &scenario.environment;
    let sol = commitment_solve(env)?;
    let low = full_disclosure_payoff(env)?;
    let uniqueness = check_unique_optimal(env, &sol);
    let strict = check_strict_optimality(env);
    let monotone = match is_monotone(env) {
        Ok(Some(_)) => "yes",
        Ok(None) => "no",
        Err(_) => "unknown (search budget exceeded)",
    };
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", scenario.name);
    let _ = writeln!(out, "prior: {}", env.prior.display());
    let _ = writeln!(out, "commitment value: {}", both(&sol.value));
    let _ = writeln!(out, "full-disclosure value: {}", both(&low));
    let _ = writeln!(out, "optimal experiment:");
    write_solution(&mut out, env, &sol);
    let _ = writeln!(out, "uniqueness: {uniqueness:?}");
    let _ = writeln!(out, "strict optimality: {}", if strict.holds { "holds" } else { "fails" });
    for (a, support) in &strict.witnesses {
        let _ = writeln!(out, "  action {a} never strictly optimal on states {support:?}");
    }
    let _ = writeln!(out, "monotone: {monotone}");
    let code = if strict.holds { EXIT_OK } else { EXIT_PRECONDITION };
    let files = vec![("solution.json".to_string(), to_json(&sol))];
    Ok((
        sol,
        Output {
            stdout: out,
            files,
            code,
            ..Output::default()
        },
    ))
}

fn cmd_solve(ctx: &Context) -> Result<Output, Error> {
    cmd_solve_report(&ctx.scenario).map(|(_, o)| o)
}

/// CSV rows of the credibility frontier and the concave closure.
pub fn frontier_csv(scenario: &Scenario) -> Result<String, Error> {
    let env = &scenario.environment;
    let points = credibility_frontier(env, scenario.options.grid)?;
    let mut csv = String::from(FRONTIER_HEADER);
    csv.push('\n');
    for pt in points {
        let belief = Belief::two(pt.p.clone());
        let ubar = indirect_utility_max(env, &belief);
        let closure = concave_closure(env, &belief);
        let witness = pt.verdict.witness.map(|w| w.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            fmt_q(&pt.p),
            fmt_dec(&pt.p),
            fmt_q(&ubar),
            fmt_dec(&ubar),
            fmt_q(&closure),
            fmt_dec(&closure),
            pt.verdict.credible,
            witness,
            pt.boundary
        );
    }
    Ok(csv)
}

fn cmd_classify(ctx: &Context) -> Result<Output, Error> {
    let csv = frontier_csv(&ctx.scenario)?;
    Ok(Output {
        files: vec![("frontier.csv".into(), csv.clone())],
        stdout: csv,
        ..Output::default()
    })
}

/// A constructed profile with the type cap to verify it at and notes for
/// the report.
pub struct Built {
    pub profile: StrategyProfile,
    pub cap: u64,
    pub notes: Vec<String>,
}

pub fn build(scenario: &Scenario, which: Construction, eps: Option<&Q>) -> Result<Built, Error> {
    let env = &scenario.environment;
    let p = &scenario.types;
    let cap = scenario.type_cap();
    match which {
        Construction::Credible => {
            let sol = commitment_solve(env)?;
            let profile = construct_credible_eq(env, &sol)?;
            Ok(Built {
                profile,
                cap,
                notes: vec![format!("commitment value: {}", both(&sol.value))],
            })
        }
        Construction::NearCommitment => {
            let eps = eps.unwrap_or(&scenario.options.eps);
            let nc = construct_near_commitment_eq(env, p, eps)?;
            Ok(Built {
                notes: vec![
                    format!("eps: {}", fmt_q(eps)),
                    format!("dominant type: {}", nc.top_type),
                    format!("commitment value: {}", both(&nc.commitment_value)),
                    format!("payoff: {}", both(&nc.payoff)),
                    format!("gap: {}", both(&nc.gap)),
                    format!("gap bound: {}", both(&nc.delta)),
                ],
                cap: nc.cap,
                profile: nc.profile,
            })
        }
        Construction::FullDisclosure => {
            let (profile, value) = construct_full_disclosure_eq(env, p)?;
            Ok(Built {
                profile,
                cap,
                notes: vec![format!("full-disclosure value: {}", both(&value))],
            })
        }
        Construction::RepeatedTest => {
            let r = repeated_test_equilibrium(env, p, cap)?;
            Ok(Built {
                profile: r.profile,
                cap,
                notes: vec![
                    format!("disclosure posterior: {}", fmt_q(&r.disclosure_posterior)),
                    format!("silence posterior: {}", fmt_q(&r.silence_posterior)),
                ],
            })
        }
    }
}

fn certificate_lines(out: &mut String, cert: &EquilibriumCertificate, game: &TruncatedGame, explain: bool) {
    let _ = writeln!(out, "verdict: {:?}", cert.verdict);
    let _ = writeln!(out, "scope: {}", cert.scope);
    let _ = writeln!(out, "type cap: {} (tail mass {})", cert.type_cap, fmt_q(&cert.tail_mass));
    let _ = writeln!(out, "nodes: {}", cert.node_count);
    let _ = writeln!(out, "ex-ante payoff: {}", both(&cert.ex_ante_payoff));
    if let Some(m) = cert.min_sender_margin() {
        let _ = writeln!(out, "min sender margin: {}", fmt_q(m));
    }
    if let Some(m) = cert.min_receiver_margin() {
        let _ = writeln!(out, "min receiver margin: {}", fmt_q(m));
    }
    for v in &cert.violations {
        let _ = writeln!(out, "violation: {v}");
    }
    if let Some(d) = &cert.worst_deviation {
        let _ = writeln!(out, "worst deviation gain: {}", fmt_q(&d.gain));
    }
    if explain {
        out.push_str(&cert.explain(game));
    }
}

fn verified(ctx: &Context, profile: &StrategyProfile, cap: u64, explain: bool, out: &mut String) -> Result<(EquilibriumCertificate, u8), Error> {
    let game = ctx.game(profile, cap)?;
    if game.is_truncated() {
        let _ = writeln!(
            out,
            "truncated at type {}: tail mass {} folded into tolerances",
            game.cap,
            fmt_q(&game.tail_mass)
        );
    }
    let cert = check_pebe(&game, profile)?;
    certificate_lines(out, &cert, &game, explain);
    let code = if cert.passed() { EXIT_OK } else { EXIT_VERIFY_FAIL };
    Ok((cert, code))
}

fn cmd_construct(ctx: &Context, which: Construction, eps: Option<&str>) -> Result<Output, Error> {
    let eps = eps.map(|t| parse_rational("eps", t)).transpose()?;
    let built = build(&ctx.scenario, which, eps.as_ref())?;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", ctx.scenario.name);
    let _ = writeln!(out, "construction: {which:?}");
    for n in &built.notes {
        let _ = writeln!(out, "{n}");
    }
    let (cert, code) = verified(ctx, &built.profile, built.cap, false, &mut out)?;
    Ok(Output {
        stdout: out,
        files: vec![
            ("profile.json".into(), to_json(&built.profile)),
            ("certificate.json".into(), to_json(&cert)),
        ],
        code,
        ..Output::default()
    })
}

fn cmd_verify(ctx: &Context, profile: Option<&PathBuf>, explain: bool) -> Result<Output, Error> {
    let profile = read_profile(&ctx.profile_path(profile)?)?;
    let mut out = String::new();
    let (cert, code) = verified(ctx, &profile, ctx.scenario.type_cap(), explain, &mut out)?;
    Ok(Output {
        stdout: out,
        files: vec![("certificate.json".into(), to_json(&cert))],
        code,
        ..Output::default()
    })
}

fn cmd_bounds(
    ctx: &Context,
    theta: Option<usize>,
    low: Option<&str>,
    radius: Option<&str>,
) -> Result<Output, Error> {
    let s = &ctx.scenario;
    let env = &s.environment;
    let theta = theta.or(s.options.theta).unwrap_or(env.n_states() - 1);
    let low = match low {
        Some(t) => Some(Belief::two(parse_rational("low", t)?)),
        None => s.options.low_belief.clone(),
    };
    let radius = match radius {
        Some(t) => Some(parse_rational("radius", t)?),
        None => s.options.radius.clone(),
    };
    let sol = commitment_solve(env)?;
    let mut out = String::new();
    let mut report = serde_json::Map::new();
    let _ = writeln!(out, "scenario: {}", s.name);
    let _ = writeln!(out, "commitment value: {}", both(&sol.value));
    let mut code = EXIT_OK;
    match reveal_threshold(env, &sol, theta) {
        Ok(threshold) => {
            let _ = writeln!(out, "reveal threshold for state {theta}: n = {}", threshold.n);
            let _ = writeln!(out, "  reveal gap: {}", fmt_q(&threshold.reveal_gap));
            let _ = writeln!(
                out,
                "  payoff range: [{}, {}]",
                fmt_q(&threshold.v_min),
                fmt_q(&threshold.v_max)
            );
            let _ = writeln!(out, "  scale constant: {}", threshold.lambda);
            let _ = writeln!(
                out,
                "  type distribution in the uniform neighborhood: {}",
                in_uniform_neighborhood(&s.types, threshold.n)
            );
            report.insert("reveal_threshold".into(), serde_json::to_value(&threshold).unwrap());
        }
        Err(e @ (Error::HypothesisFail { .. } | Error::PreconditionViolation(_))) => {
            let _ = writeln!(out, "reveal threshold for state {theta}: {e}");
            report.insert("reveal_threshold".into(), e.to_string().into());
            code = EXIT_PRECONDITION;
        }
        Err(e) => return Err(e),
    }
    if let (Some(low), Some(r)) = (low, radius) {
        let c = approximation_constants(env, &sol, &low, &r, s.options.grid)?;
        let _ = writeln!(out, "approximation constants around {} radius {}:", low.display(), fmt_q(&r));
        let _ = writeln!(out, "  witness state: {}", c.theta);
        let _ = writeln!(out, "  ball mass m: {}", fmt_q(&c.m));
        let _ = writeln!(
            out,
            "  constrained value: grid {} exact {}",
            fmt_q(&c.constrained_lower),
            fmt_q(&c.constrained_upper)
        );
        let _ = writeln!(out, "  eta: {}", fmt_q(&c.eta));
        let _ = writeln!(out, "  eps: {}", fmt_q(&c.eps));
        let _ = writeln!(out, "  type count N: {}", c.n);
        let _ = writeln!(out, "  revealing beats the ball: {}", c.reveal_beats_ball);
        report.insert("approximation_constants".into(), serde_json::to_value(&c).unwrap());
    }
    Ok(Output {
        stdout: out,
        files: vec![("bounds.json".into(), to_json(&report))],
        code,
        ..Output::default()
    })
}

fn cmd_simulate(
    ctx: &Context,
    profile: Option<&PathBuf>,
    construct: Option<Construction>,
    samples: Option<usize>,
) -> Result<Output, Error> {
    let s = &ctx.scenario;
    let (profile, cap) = match construct {
        Some(which) => {
            let b = build(s, which, None)?;
            (b.profile, b.cap)
        }
        None => (read_profile(&ctx.profile_path(profile)?)?, s.type_cap()),
    };
    let game = ctx.game(&profile, cap)?;
    let exact = ex_ante_payoff(&game, &profile)?;
    let samples = samples.unwrap_or(s.options.samples);
    let report = simulate(&game, &profile, samples, s.options.seed)?;
    let agrees = report.agrees_with(&exact, 3.0);
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", s.name);
    let _ = writeln!(out, "samples: {} seed: {}", report.samples, report.seed);
    let _ = writeln!(out, "mean: {:.6} standard error: {:.6}", report.mean, report.std_error);
    let _ = writeln!(out, "exact: {}", both(&exact));
    let _ = writeln!(out, "within 3 standard errors: {agrees}");
    Ok(Output {
        stdout: out,
        files: vec![("simulation.json".into(), to_json(&report))],
        code: if agrees { EXIT_OK } else { EXIT_VERIFY_FAIL },
        ..Output::default()
    })
}
