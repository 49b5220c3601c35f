use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rta_core::baseline::CheckSet;
use rta_core::eval::{evaluate, EvalOptions, RtaTag};
use rta_core::fixtures;
use rta_core::lookahead::{lookahead_policy, recoverable_set, safe_set_lookahead};
use rta_core::plant::{stationary_policy_value, StationaryPolicy};
use rta_core::plant_file::{LoadedModel, PlantDescription, PlantSpec};
use rta_core::qlearning::{train, QTable};
use rta_core::scenario::{Env, ScenarioConfig};
use rta_core::shaping::SafetyVerdict;
use rta_core::solver::{synthesize_safe_optimal, synthesize_safe_optimal_mdp, PolicyFile};
use rta_core::{Error, Result};

/// Runtime-assurance switching: synthesis on discrete plants, training and
/// evaluation on continuous scenarios.
#[derive(Parser)]
#[command(name = "rta", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shape, solve and certify a discrete plant; writes the policy as JSON.
    Synthesize {
        /// Plant description file, or a built-in fixture name.
        #[arg(long)]
        plant: String,
        /// Overrides the plant's discount factor.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the largest recoverable set of a deterministic plant.
    Recoverable {
        #[arg(long)]
        plant: String,
    },
    /// Q-learn a switching table on a scenario.
    Train {
        /// Scenario config file, or a built-in name such as `acc-var1`.
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 20_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-episode training curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run randomized episodes under a decider and write a JSON report.
    Evaluate {
        #[arg(long)]
        config: String,
        #[arg(long, value_enum)]
        rta: Rta,
        /// Q-table file for `--rta qtable`.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum)]
        check_set: Option<Check>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        /// Writes one trajectory CSV per episode.
        #[arg(long)]
        export_dir: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Walk through one of the built-in counterexample plants.
    Demo {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(fixtures::NAMES))]
        fixture: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rta {
    Sim,
    Reach,
    Qtable,
    AlwaysS,
    AlwaysU,
}

impl From<Rta> for RtaTag {
    fn from(r: Rta) -> Self {
        match r {
            Rta::Sim => RtaTag::Sim,
            Rta::Reach => RtaTag::Reach,
            Rta::Qtable => RtaTag::Qtable,
            Rta::AlwaysS => RtaTag::AlwaysS,
            Rta::AlwaysU => RtaTag::AlwaysU,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Safe,
    Recoverable,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synthesize { plant, gamma, out } => synthesize(&plant, gamma, &out),
        Command::Recoverable { plant } => recoverable(&plant),
        Command::Train {
            config,
            episodes,
            seed,
            out,
            curve,
        } => train_cmd(&config, episodes, seed, &out, curve.as_deref()),
        Command::Evaluate {
            config,
            rta,
            table,
            check_set,
            episodes,
            seed,
            report,
            export_dir,
            threads,
        } => {
            let env = Env::new(ScenarioConfig::load(&config)?)?;
            let table = table.map(QTable::load).transpose()?;
            let opts = EvalOptions {
                check_set: check_set.map(|c| match c {
                    Check::Safe => CheckSet::Safe,
                    Check::Recoverable => CheckSet::Recoverable,
                }),
                export_dir,
                threads,
                ..EvalOptions::new(rta.into(), episodes, seed)
            };
            let r = evaluate(&env, &opts, table.as_ref())?;
            write(&report, &r.to_json())?;
            let a = &r.aggregates;
            println!(
                "{} on {}-var{}: {} episodes, RT {:.4} ms, TTC {:.3} s (min {:.3}), U% {:.2}, mean dist {:.2} m, Fail% {:.1}",
                r.rta.name(),
                env.kind().name(),
                env.config().variation,
                r.episodes.len(),
                a.rt_ms,
                a.ttc_s,
                a.min_ttc_s,
                a.u_pct,
                a.mean_dist,
                a.fail_pct
            );
            Ok(())
        }
        Command::Demo { fixture } => demo(&fixture),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_plant(arg: &str) -> Result<PlantDescription> {
    if !Path::new(arg).exists() && fixtures::NAMES.contains(&arg) {
        return Ok(fixtures::by_name(arg)?.describe());
    }
    PlantDescription::load(arg)
}

fn synthesize(plant: &str, gamma: Option<f64>, out: &Path) -> Result<()> {
    let mut desc = load_plant(plant)?;
    if let Some(g) = gamma {
        desc.gamma = g;
    }
    let file = match desc.build::<f64>()? {
        LoadedModel::Deterministic(spec) => {
            let r = synthesize_safe_optimal(&spec.plant, &spec.reward, &spec.unsafe_set)?;
            PolicyFile::new(
                spec.plant.state_names(),
                spec.plant.action_names(),
                &r.policy,
                r.verdict,
                r.unshaped_value,
                r.shaped_value,
                desc.gamma,
                r.penalty,
            )
        }
        LoadedModel::Probabilistic(spec) => {
            let r = synthesize_safe_optimal_mdp(&spec.mdp, &spec.reward, &spec.unsafe_set, None)?;
            PolicyFile::new(
                spec.mdp.state_names(),
                spec.mdp.action_names(),
                &r.policy,
                r.verdict,
                r.unshaped_value,
                r.shaped_value,
                desc.gamma,
                r.penalty,
            )
        }
    };
    write(out, &file.to_json())?;
    let verdict = match file.verdict {
        SafetyVerdict::SafeExists => "safe policy exists",
        SafetyVerdict::NoSafePolicy => "no safe policy",
    };
    println!("{verdict}; value {} (shaped {}, penalty {})", file.value, file.shaped_value, file.penalty);
    for (q, a) in &file.policy {
        println!("  {q} -> {a}");
    }
    Ok(())
}

fn deterministic(desc: &PlantDescription) -> Result<PlantSpec<f64>> {
    match desc.build::<f64>()? {
        LoadedModel::Deterministic(spec) => Ok(spec),
        LoadedModel::Probabilistic(_) => Err(Error::Precondition(
            "the recoverable set is defined for deterministic plants".into(),
        )),
    }
}

fn recoverable(plant: &str) -> Result<()> {
    let spec = deterministic(&load_plant(plant)?)?;
    let r = recoverable_set(&spec.plant, &spec.unsafe_set)?;
    let names: Vec<&str> = r.members.iter().map(|&q| spec.plant.state_name(q)).collect();
    println!("recoverable set: {{{}}}", names.join(", "));
    println!("iterations to fixpoint: {}", r.iterations_to_fixpoint);
    Ok(())
}

fn train_cmd(config: &str, episodes: usize, seed: u64, out: &Path, curve: Option<&Path>) -> Result<()> {
    let env = Env::new(ScenarioConfig::load(config)?)?;
    let t = train(&env, episodes, seed)?;
    t.table.save(out)?;
    if let Some(path) = curve {
        let mut csv = String::from("episode,return,violation\n");
        for (i, e) in t.curve.iter().enumerate() {
            csv.push_str(&format!("{i},{:.17e},{}\n", e.episode_return, e.violation as u8));
        }
        write(path, &csv)?;
    }
    for c in &t.checkpoints {
        println!("checkpoint {:>7}: mean return {:.3}, violations {}", c.episode, c.mean_return, c.violations);
    }
    match t.selected {
        Some(i) => println!("selected checkpoint at episode {}", t.checkpoints[i].episode),
        None => println!("no violation-free checkpoint; wrote the final table"),
    }
    Ok(())
}

fn demo(name: &str) -> Result<()> {
    let fx = fixtures::by_name(name)?;
    let p = &fx.plant;
    let gamma = fixtures::GAMMA;
    let show = |pol: &StationaryPolicy, steps: usize| p.unroll(pol, steps).display_with(p.state_names(), p.action_names());
    let value = |pol: &StationaryPolicy| -> f64 { stationary_policy_value(p, pol, &fx.reward) };
    let synth = synthesize_safe_optimal(p, &fx.reward, &fx.unsafe_set)?;
    let u = p.untrusted_action().unwrap_or(1);
    println!("fixture {name}, gamma = {gamma}");
    match name {
        "fig2-left" => {
            let la = safe_set_lookahead(p, &fx.unsafe_set)?;
            let run = p.unroll(&la, 2);
            let bad = run.states().iter().position(|&q| fx.unsafe_set.contains(q));
            println!("safe-set lookahead run: {}", show(&la, 2));
            if let Some(k) = bad {
                println!("  enters the unsafe set at step {k}: U at q0 looked safe but leaves no safe move");
            }
            let r = recoverable_set(p, &fx.unsafe_set)?;
            let rp = lookahead_policy(p, &r.members)?;
            println!("recoverable-set lookahead run: {} (value {})", show(&rp, 4), value(&rp));
        }
        "fig2-right" => {
            let r = recoverable_set(p, &fx.unsafe_set)?;
            let names: Vec<&str> = r.members.iter().map(|&q| p.state_name(q)).collect();
            println!("largest recoverable set: {{{}}}", names.join(", "));
            let rp = lookahead_policy(p, &r.members)?;
            println!("recoverable-set lookahead: {} with value {}", show(&rp, 4), value(&rp));
            let all_u = StationaryPolicy::constant(p.num_states(), u);
            println!("always U: {} with value {} = 1/(1-gamma), and safe", show(&all_u, 4), value(&all_u));
        }
        _ => {
            let variant = fixtures::sec6_goal_untrusted_use();
            println!("goal qg must be reached; the sup of the reward is not attained:");
            for k in 1..=5 {
                let run = fixtures::goal_detour_run(p, k, 400);
                let r: f64 = rta_core::plant::run_reward(&run, &variant.reward);
                println!(
                    "  U x{} then S then U forever: {r:.12} (1/(1-gamma) - gamma^{} = {:.12})",
                    2 * k,
                    2 * k,
                    1.0 / (1.0 - gamma) - gamma.powi(2 * k as i32)
                );
            }
            println!("  (reward for using U; a later detour earns more, so no run reaches 1/(1-gamma))");
            let n = p.num_states();
            let mut seen = Vec::new();
            for idx in 0..(2u64.pow(n as u32)) {
                let pol = StationaryPolicy::from_index(idx, n, p.num_actions());
                let reaches = p.unroll(&pol, 2 * n).states().contains(&fixtures::goal::QG);
                let shown = show(&pol, 4);
                if reaches && !seen.contains(&shown) {
                    println!("  goal-reaching stationary {shown}: reward {}", value(&pol));
                    seen.push(shown);
                }
            }
        }
    }
    println!(
        "synthesized: {} -> value {} ({:?})",
        show(&synth.policy, 4),
        synth.unshaped_value,
        synth.verdict
    );
    Ok(())
}
