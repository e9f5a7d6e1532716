use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rslaq::action_space::{enumerate_actions, SchedulerKind};
use rslaq::agent::checkpoint;
use rslaq::harness::plot::{reliability_curve, reward_curve};
use rslaq::harness::report::{save_run, save_training, write_summary};
use rslaq::harness::{compare, run_eval, run_training, Controller, ControllerKind, RunReport, Scenario};
use rslaq::policy::parse_a1_policy;
use rslaq::{Error, Result};

#[derive(Parser)]
#[command(name = "rslaq", version, about = "SLA-aware RAN slicing controller and simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a controller and write its checkpoint, log and trace.
    Train {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Train the SLA-unaware optimiser instead of RSLAQ.
        #[arg(long, default_value = "rslaq", value_parser = learned_controller)]
        controller: ControllerKind,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
    },
    /// Evaluate one controller with greedy actions.
    Eval {
        #[arg(long, value_parser = controller_kind)]
        controller: ControllerKind,
        /// Required for rslaq and opt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: bool,
    },
    /// Train both learned controllers and evaluate all five.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: bool,
    },
    /// Print the action table.
    Actions {
        #[arg(long, default_value_t = 3)]
        slices: usize,
    },
    /// Parse an A1 policy document and print its slices.
    ValidatePolicy { file: PathBuf },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name: low_traffic, normal, congestion, stressed, insufficient_resources.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let sc = match (&self.scenario, &self.config) {
            (_, Some(path)) => Scenario::from_json(&fs::read_to_string(path)?)?,
            (Some(name), None) => Scenario::preset(name)?,
            (None, None) => Scenario::preset("normal")?,
        };
        Ok(match self.seed {
            Some(s) => sc.with_seed(s),
            None => sc,
        })
    }
}

fn controller_kind(s: &str) -> std::result::Result<ControllerKind, String> {
    ControllerKind::from_label(s).ok_or_else(|| format!("unknown controller `{s}` (rslaq, opt, rr, pf, bcqi)"))
}

fn learned_controller(s: &str) -> std::result::Result<ControllerKind, String> {
    match controller_kind(s)? {
        k if k.is_learned() => Ok(k),
        _ => Err(format!("`{s}` is not a trained controller (rslaq, opt)")),
    }
}

fn slice_names(sc: &Scenario) -> Vec<String> {
    sc.policy().slices().iter().map(|s| s.name.clone()).collect()
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, svg)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn train(sc: &Scenario, kind: ControllerKind, out: &Path, plot: bool) -> Result<()> {
    let agent = run_training(sc, kind)?;
    save_training(&agent, &slice_names(sc), out)?;
    if plot {
        write_svg(&out.join("train_reward.svg"), &reward_curve(&agent))?;
    }
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record(["scenario", "controller", "seed", "steps", "last50_mean_reward", "alarms", "wall_clock_s"])?;
    w.write_record([
        sc.name().to_string(),
        kind.label().to_string(),
        sc.seed().to_string(),
        agent.log.len().to_string(),
        agent.tail_mean(50).map(|m| m.to_string()).unwrap_or_default(),
        agent.alarms.len().to_string(),
        format!("{:.3}", agent.wall_clock_s),
    ])?;
    w.flush()?;
    Ok(())
}

fn eval(
    sc: &Scenario,
    kind: ControllerKind,
    ckpt: Option<&Path>,
    frames: usize,
    out: Option<&Path>,
    plot: bool,
) -> Result<()> {
    let controller = match (kind.is_learned(), ckpt) {
        (true, Some(p)) => Controller::agent(kind, checkpoint::load(p)?)?,
        (true, None) => return Err(Error::Validation(format!("{} needs --checkpoint", kind.label()))),
        (false, _) => Controller::fixed(kind)?,
    };
    let report = run_eval(sc, &controller, frames)?;
    emit_reports(sc, std::slice::from_ref(&report), out, plot)
}

fn emit_reports(sc: &Scenario, reports: &[RunReport], out: Option<&Path>, plot: bool) -> Result<()> {
    let names = slice_names(sc);
    if let Some(dir) = out {
        for r in reports {
            save_run(r, &names, dir, r.controller.label())?;
        }
        write_summary(reports, io::BufWriter::new(fs::File::create(dir.join("summary.csv"))?))?;
    }
    if plot {
        let dir = out.unwrap_or(Path::new("."));
        for r in reports {
            write_svg(&dir.join(format!("{}_reliability.svg", r.controller.label())), &reliability_curve(r))?;
        }
    }
    write_summary(reports, io::stdout())
}

/// One row per controller with the per-slice reliabilities side by side.
fn write_comparison<W: Write>(sc: &Scenario, reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["controller".to_string(), "scenario".into(), "mean_reward".into()];
    header.extend(slice_names(sc).iter().map(|n| format!("reliability_{n}")));
    header.push("alarms".into());
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![
            r.controller.label().to_string(),
            r.scenario.clone(),
            r.mean_reward.map(|m| m.to_string()).unwrap_or_default(),
        ];
        row.extend(r.slices.iter().map(|s| s.reliability.map(|x| x.to_string()).unwrap_or_default()));
        row.push(r.alarms.len().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Train {
            scenario,
            controller,
            out,
            plot,
        } => train(&scenario.load()?, controller, &out, plot),
        Command::Eval {
            controller,
            checkpoint,
            frames,
            scenario,
            out,
            plot,
        } => {
            let sc = scenario.load()?;
            let frames = frames.unwrap_or(sc.harness().eval_frames);
            eval(&sc, controller, checkpoint.as_deref(), frames, out.as_deref(), plot)
        }
        Command::Compare {
            scenario,
            frames,
            out,
            plot,
        } => {
            let sc = scenario.load()?;
            let frames = frames.unwrap_or(sc.harness().eval_frames);
            let cmp = compare(&sc, frames)?;
            if let Some(dir) = out.as_deref() {
                let names = slice_names(&sc);
                for r in &cmp.reports {
                    save_run(r, &names, dir, r.controller.label())?;
                }
                for t in &cmp.trained {
                    let sub = dir.join(format!("train_{}", t.kind.label()));
                    save_training(t, &names, &sub)?;
                    if plot {
                        write_svg(&sub.join("train_reward.svg"), &reward_curve(t))?;
                    }
                }
                write_summary(&cmp.reports, io::BufWriter::new(fs::File::create(dir.join("summary.csv"))?))?;
            }
            if plot {
                let dir = out.as_deref().unwrap_or(Path::new("."));
                for r in &cmp.reports {
                    write_svg(&dir.join(format!("{}_reliability.svg", r.controller.label())), &reliability_curve(r))?;
                }
            }
            write_comparison(&sc, &cmp.reports, io::stdout())
        }
        Command::Actions { slices } => enumerate_actions(slices, &SchedulerKind::ALL)?.write_csv(io::stdout()),
        Command::ValidatePolicy { file } => {
            let policy = parse_a1_policy(&fs::read_to_string(&file)?)?;
            let mut w = csv::Writer::from_writer(io::stdout());
            w.write_record(["slice", "weight", "reliability", "outage_kpis", "soft_kpis", "ignored_kpis"])?;
            for s in policy.slices() {
                let join = |ks: &[rslaq::policy::KpiPredicate]| ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("; ");
                let rel = s.sla.as_ref().map(|sla| sla.reliability.to_string()).unwrap_or_default();
                let ignored: Vec<&str> = s.ignored_kpis.iter().map(|k| k.text.as_str()).collect();
                w.write_record([
                    s.name.clone(),
                    s.weight.to_string(),
                    rel,
                    join(s.outage_kpis()),
                    join(s.soft_kpis()),
                    ignored.join("; "),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
