use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use co_mdp::affine::AffineScheme;
use co_mdp::decode::{decoded_solution, greedy_decode};
use co_mdp::exact::{solve, tau_distance, value_iteration, TauWeights, ValueFunction};
use co_mdp::harness::report::{
    self, read_run_rows, run_rows, table1_row, table2_row, write_csv_file, write_slack_histogram, RunMetadata,
};
use co_mdp::harness::{
    prepare_fvi, run_contraction_experiment, run_fvi_reps, run_on_models, FviStudySpec, ScenarioSpec,
};
use co_mdp::mdp::{build_mdp, validate_mdp, Mdp};
use co_mdp::problems::{evaluate, generate, Instance, ProblemKind};

#[derive(Parser)]
#[command(name = "co-mdp", version, about = "Combinatorial optimization problems as undiscounted MDPs")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance as JSON.
    Gen {
        #[arg(long)]
        kind: ProblemKind,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "inst.json")]
        out: PathBuf,
    },
    /// Build the MDP of an instance and run the structural checks.
    Build {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "mdp.bin")]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Exact value iteration.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Sweep budget; depth + 2 when omitted.
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, default_value = "vstar.json")]
        out: PathBuf,
    },
    /// Greedy decode of a value function.
    Decode {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        value: PathBuf,
        /// Evaluates the decoded solution on the instance when given.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value = "transcript.json")]
        out: PathBuf,
    },
    /// Projected value iteration over random (σ, Φ, τ, θ₀) draws.
    Pvi {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long = "K")]
        k: usize,
        #[arg(long, default_value_t = 50)]
        scenarios: usize,
        #[arg(long, default_value_t = 50)]
        triplets: usize,
        #[arg(long = "T", default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        /// One indicator feature per state instead of random features.
        #[arg(long)]
        identity: bool,
        #[arg(long, default_value = "runs.csv")]
        out: PathBuf,
    },
    /// Fitted value iteration under the planned schedule.
    Fvi(FviArgs),
    /// χ summary per (problem, d, K) over a batch of random instances.
    Table1 {
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long = "K", value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, default_value = "table1.csv")]
        out: PathBuf,
    },
    /// Probability of superiority of a higher over a lower K.
    Table2 {
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long)]
        k_low: usize,
        #[arg(long)]
        k_high: usize,
        #[arg(long, default_value = "table2.csv")]
        out: PathBuf,
    },
    /// Slack histogram of contractive runs from one or more runs files.
    SlackHist {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "slack")]
        title: String,
        #[arg(long, default_value = "slack.svg")]
        out: PathBuf,
    },
}

#[derive(Args, Serialize)]
struct FviArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0.2)]
    eps0: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value = "fvi.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    kind: ProblemKind,
    #[arg(long)]
    d: usize,
    /// 50 × 50 × 50 instead of the 10 × 10 × 20 desk batch.
    #[arg(long)]
    full: bool,
    #[arg(long = "T", default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
}

impl BatchArgs {
    fn spec(&self, k: usize, seed: u64) -> ScenarioSpec {
        let base = if self.full {
            ScenarioSpec::full(self.kind, self.d, k, seed)
        } else {
            ScenarioSpec::desk(self.kind, self.d, k, seed)
        };
        ScenarioSpec { iterations: self.iterations, eps: self.eps, ..base }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let out = |p: &Path| cli.out_dir.join(p);
    let started = Instant::now();
    let seed = cli.seed;

    match &cli.command {
        Command::Gen { kind, d, out: path } => {
            let inst = generate(*kind, *d, seed)?;
            std::fs::write(out(path), inst.to_json()? + "\n")?;
        }
        Command::Build { input, out: path, report } => {
            let inst = read_instance(input)?;
            let mdp = build_mdp(&inst)?;
            let checks = validate_mdp(&mdp);
            mdp.write_binary(BufWriter::new(File::create(out(path))?))?;
            if let Some(r) = report {
                std::fs::write(out(r), serde_json::to_string_pretty(&checks)? + "\n")?;
            }
            println!("{} states, {} actions, depth {}", mdp.state_count(), mdp.action_count(), mdp.depth());
            for c in &checks.checks {
                println!("{:<14} {} {}", c.name, if c.pass { "ok  " } else { "FAIL" }, c.detail);
            }
            if !checks.pass() {
                bail!("MDP failed structural checks");
            }
        }
        Command::Solve { mdp, tol, max_iter, out: path } => {
            let mdp = read_mdp(mdp)?;
            let tau = TauWeights::default_for(&mdp);
            let budget = max_iter.unwrap_or(mdp.depth() + 2);
            let vi = value_iteration(&mdp, &ValueFunction::zeros(&mdp), &tau, *tol, budget)?;
            std::fs::write(out(path), serde_json::to_string(&vi.values)? + "\n")?;
            println!("V*(s_e) = {} after {} sweeps", vi.values[mdp.initial()], vi.iterations);
        }
        Command::Decode { mdp, value, instance, out: path } => {
            let mdp = read_mdp(mdp)?;
            let text = std::fs::read_to_string(value).with_context(|| format!("reading {}", value.display()))?;
            let v = ValueFunction::new(&mdp, serde_json::from_str(&text)?)?;
            let transcript = greedy_decode(&mdp, &v);
            let feasible = transcript.feasible(&mdp);
            let (solution, objective) = match instance {
                Some(p) => {
                    let inst = read_instance(p)?;
                    let x = decoded_solution(&inst, &transcript.tokens);
                    let g = evaluate(&inst, &x)?;
                    (Some(x), g)
                }
                None => (None, None),
            };
            #[derive(Serialize)]
            struct Decoded<'a> {
                #[serde(flatten)]
                transcript: &'a co_mdp::decode::DecodeTranscript,
                feasible: bool,
                collected: f64,
                solution: Option<Vec<usize>>,
                objective: Option<f64>,
            }
            let doc = Decoded { transcript: &transcript, feasible, collected: transcript.collected(), solution, objective };
            std::fs::write(out(path), serde_json::to_string_pretty(&doc)? + "\n")?;
            println!("tokens {:?} feasible {} collected {}", transcript.tokens, feasible, transcript.collected());
        }
        Command::Pvi { mdp, k, scenarios, triplets, iterations, eps, identity, out: path } => {
            let mdp = read_mdp(mdp)?;
            let vstar = solve(&mdp)?;
            let spec = ScenarioSpec {
                kind: mdp.kind(),
                d: mdp.depth(),
                k: *k,
                instance_count: 1,
                sigma_per_instance: *scenarios,
                triplets_per_scenario: *triplets,
                iterations: *iterations,
                eps: *eps,
                seed,
                identity_embedding: *identity,
            };
            let result = run_on_models(&spec, &[(mdp, vstar)])?;
            write_csv_file(&out(path), &run_rows(&result))?;
            let chi: Vec<String> = result.scenarios.iter().map(|s| format!("{:.2}", s.chi())).collect();
            println!("mean χ {:.4} over {} scenarios [{}]", result.mean_chi(), result.scenarios.len(), chi.join(" "));
            metadata("pvi", &spec, started, &out(&path.with_extension("json")))?;
        }
        Command::Fvi(args) => {
            let mdp = read_mdp(&args.mdp)?;
            let spec = FviStudySpec { k: args.k, eps: args.eps, eps0: args.eps0, delta: args.delta, reps: args.reps, seed };
            let setup = prepare_fvi(&mdp, &spec)?;
            let traces = run_fvi_reps(&mdp, &setup, &spec)?;
            let rows = fvi_rows(&mdp, &setup.scheme, &setup.tau, &setup.limit, &traces);
            write_csv_file(&out(&args.out), &rows)?;
            let finals: Vec<f64> = rows.iter().filter(|r| r.t == setup.schedule.iterations).map(|r| r.tau_err_to_pvi_limit).collect();
            let mean = finals.iter().sum::<f64>() / finals.len() as f64;
            println!(
                "T = {}, γ = {:.4}, mean ‖V_T − Ṽ*‖_τ = {mean:.3e}, bound = {:.3e}",
                setup.schedule.iterations, setup.constants.gamma, setup.bound
            );
            #[derive(Serialize)]
            struct FviSummary<'a> {
                args: &'a FviArgs,
                constants: &'a co_mdp::fvi::FviConstants,
                schedule: &'a co_mdp::fvi::ScheduleParams,
                rho: f64,
                bound: f64,
                #[serde(rename = "meanFinalError")]
                mean_final_error: f64,
            }
            let summary = FviSummary {
                args,
                constants: &setup.constants,
                schedule: &setup.schedule,
                rho: setup.rho,
                bound: setup.bound,
                mean_final_error: mean,
            };
            metadata("fvi", &summary, started, &out(&args.out.with_extension("json")))?;
        }
        Command::Table1 { batch, k, out: path } => {
            warn_full(batch);
            let mut rows = Vec::new();
            let mut specs = Vec::new();
            for &k in k {
                let spec = batch.spec(k, seed);
                let result = run_contraction_experiment(&spec)?;
                let name = format!("runs-{}-K{k}.csv", report::tag(batch.kind, batch.d));
                write_csv_file(&out(Path::new(&name)), &run_rows(&result))?;
                rows.push(table1_row(&result)?);
                specs.push(spec);
            }
            write_csv_file(&out(path), &rows)?;
            for r in &rows {
                println!("{} d={} K={}: mean χ {:.4} min {:.2}", r.cop, r.d, r.k, r.mean, r.min);
            }
            metadata("table1", &specs, started, &out(&path.with_extension("json")))?;
        }
        Command::Table2 { batch, k_low, k_high, out: path } => {
            warn_full(batch);
            let low = run_contraction_experiment(&batch.spec(*k_low, seed))?;
            let high = run_contraction_experiment(&batch.spec(*k_high, seed))?;
            let row = table2_row(&low, &high)?;
            write_csv_file(&out(path), std::slice::from_ref(&row))?;
            println!("PS = {:?} over {} / {} contractive runs", row.ps, row.n_low, row.n_high);
            metadata("table2", &[&low.spec, &high.spec], started, &out(&path.with_extension("json")))?;
        }
        Command::SlackHist { runs, title, out: path } => {
            let mut slacks = Vec::new();
            for p in runs {
                slacks.extend(read_run_rows(p)?.into_iter().filter(|r| r.contractive).filter_map(|r| r.slack));
            }
            if write_slack_histogram(&out(path), slacks.iter().copied(), title)? {
                println!("{} slack values, histogram at {}", slacks.len(), out(path).display());
            }
        }
    }
    Ok(())
}

fn warn_full(batch: &BatchArgs) {
    if batch.full {
        log::warn!("full-scale batch: 125000 PVI runs per K; this takes a while");
    }
}

fn metadata<S: Serialize>(command: &str, spec: S, started: Instant, path: &Path) -> Result<()> {
    RunMetadata::new(command, spec, started.elapsed().as_secs_f64()).write(path)?;
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::from_json(&text)?)
}

fn read_mdp(path: &Path) -> Result<Mdp> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Mdp::read_binary(BufReader::new(file))?)
}

#[derive(Serialize)]
struct FviRow {
    rep: usize,
    t: usize,
    /// Empty for `θ̃_0`.
    n_t: Option<f64>,
    c_t: Option<u64>,
    loss: Option<f64>,
    #[serde(rename = "tauErrToVstar")]
    tau_err_to_vstar: f64,
    #[serde(rename = "tauErrToPviLimit")]
    tau_err_to_pvi_limit: f64,
}

fn fvi_rows(
    mdp: &Mdp,
    scheme: &AffineScheme,
    tau: &TauWeights,
    limit: &[f64],
    traces: &[co_mdp::fvi::FviTrace],
) -> Vec<FviRow> {
    let mut rows = Vec::new();
    for (rep, trace) in traces.iter().enumerate() {
        for (t, theta) in trace.thetas.iter().enumerate() {
            let record = t.checked_sub(1).map(|i| &trace.iterations[i]);
            rows.push(FviRow {
                rep,
                t,
                n_t: record.map(|r| r.samples),
                c_t: record.map(|r| r.step_budget),
                loss: record.map(|r| r.loss),
                tau_err_to_vstar: trace.tau_err[t],
                tau_err_to_pvi_limit: tau_distance(scheme.value(mdp, theta).values(), limit, tau, mdp),
            });
        }
    }
    rows
}
