use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gplr_core::env::{FruitRooms, IcyTrack};
use gplr_core::harness::config::{EnvKind, ExperimentConfig, Method, Overrides, Precision};
use gplr_core::harness::oracle::{
    fruit_choice_instance, icy_instance, indifference_point, indifference_scan, network_policy_value, value_iteration,
};
use gplr_core::harness::plots::{emit_plots, find_runs};
use gplr_core::harness::trainer::{evaluate_checkpoint, CHECKPOINT_FILE, EVAL_FILE};
use gplr_core::harness::{run_experiment, Domain};
use gplr_core::learner::checkpoint;
use gplr_core::Error;

#[derive(Parser)]
#[command(name = "gplr", version, about = "Curriculum RL with grounded level replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed; each seed writes to `<out>/seed_<n>`.
    Train(Common),
    /// Evaluate a saved policy on every evaluation condition.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/checkpoint.bin`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Solve the small exact instances and optionally score a checkpoint on them.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Aggregate every run below `--out` into CSV tables in `<out>/plots`.
    Plots {
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
}

impl Common {
    fn resolve(&self) -> gplr_core::Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
            None => None,
        };
        let o = Overrides {
            method: self.method,
            env: self.env,
            seed: self.seed,
            out_dir: self.out.as_ref().map(|p| p.display().to_string()),
            total_steps: self.steps,
        };
        ExperimentConfig::resolve(text.as_deref(), &o)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Divergence { .. } => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> gplr_core::Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = c.resolve()?;
            for &seed in &cfg.seeds {
                let dir = Path::new(&cfg.out_dir).join(format!("seed_{seed}"));
                log::info!("training {} on {} seed {seed} into {}", cfg.method, cfg.env, dir.display());
                let s = run_experiment(&cfg, seed, &dir)?;
                let gt = &s.final_evals[0];
                println!(
                    "{} {} seed {seed}: {} steps, {} episodes, ground-truth return {:.4} ± {:.4}",
                    cfg.method, cfg.env, s.env_steps, s.episodes, gt.mean_return, gt.stderr
                );
            }
            Ok(())
        }
        Command::Eval { common, checkpoint } => {
            let cfg = common.resolve()?;
            let out = PathBuf::from(&cfg.out_dir);
            let ckpt = checkpoint.unwrap_or_else(|| out.join(CHECKPOINT_FILE));
            let seed = cfg.seeds[0];
            let reports = evaluate_checkpoint(&cfg, seed, &ckpt)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join(EVAL_FILE), serde_json::to_string_pretty(&reports)?)?;
            for r in &reports {
                println!("{:<14} return {:>9.4} ± {:.4}  solved {:.3}", r.condition, r.mean_return, r.stderr, r.solve_rate);
            }
            Ok(())
        }
        Command::Oracle { common, checkpoint } => {
            let cfg = common.resolve()?;
            let report = oracle(&cfg, checkpoint.as_deref())?;
            let out = PathBuf::from(&cfg.out_dir);
            std::fs::create_dir_all(&out)?;
            let text = serde_json::to_string_pretty(&report)?;
            std::fs::write(out.join("oracle.json"), &text)?;
            println!("{text}");
            Ok(())
        }
        Command::Plots { out } => {
            let runs = find_runs(&out)?;
            let written = emit_plots(&runs, &out.join("plots"))?;
            for (name, path) in written {
                println!("{name}: {}", path.display());
            }
            Ok(())
        }
    }
}

fn oracle(cfg: &ExperimentConfig, ckpt: Option<&Path>) -> gplr_core::Result<serde_json::Value> {
    let policy = |env_value: &dyn Fn(&gplr_core::learner::ActorCritic<f64>) -> f64| -> gplr_core::Result<Option<f64>> {
        match ckpt {
            None => Ok(None),
            Some(p) => {
                let net = match cfg.precision {
                    Precision::F64 => checkpoint::load::<f64>(p)?.net,
                    Precision::F32 => {
                        let n = checkpoint::load::<f32>(p)?.net;
                        gplr_core::learner::ActorCritic::from_params(
                            n.shape,
                            n.value_scale as f64,
                            n.params.iter().map(|&x| x as f64).collect(),
                        )
                    }
                };
                Ok(Some(env_value(&net)))
            }
        }
    };
    match cfg.env {
        EnvKind::FruitRooms => {
            let env = FruitRooms::from_config(cfg);
            let mut qs = cfg.eval_q.clone();
            qs.push(cfg.apple_prob);
            let scan = indifference_scan(&qs, cfg.reward_apple, cfg.reward_banana)?;
            let mdp = fruit_choice_instance(&env, &FruitRooms::prior(cfg), 0..8)?;
            let vi = value_iteration(&mdp, 1.0)?;
            let pv = policy(&|net| network_policy_value(&env, &mdp, net, 1.0, false))?;
            Ok(json!({
                "env": "fruitrooms",
                "indifference_point": indifference_point(cfg.reward_apple, cfg.reward_banana),
                "scan": scan,
                "choice_instance": { "states": vi.states, "v_star": vi.v_star, "residual": vi.residual, "policy_value": pv },
            }))
        }
        EnvKind::IcyTrack => {
            let env = IcyTrack::from_config(cfg);
            let length = cfg.track_min;
            let layout = cfg.layout_seed.unwrap_or(0);
            let mdp = icy_instance(&env, &IcyTrack::prior(cfg), length, layout)?;
            let vi = value_iteration(&mdp, 1.0)?;
            let pv = policy(&|net| network_policy_value(&env, &mdp, net, 1.0, false))?;
            Ok(json!({
                "env": "icytrack",
                "length": length,
                "layout_seed": layout,
                "states": vi.states,
                "v_star": vi.v_star,
                "residual": vi.residual,
                "policy_value": pv,
            }))
        }
    }
}
