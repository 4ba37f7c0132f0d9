use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use realm_sim::harness::area::{area_estimate, AreaParams};
use realm_sim::harness::export::{write_csv, write_trace};
use realm_sim::harness::{presets, run_scenario, run_sweep, MetricsReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "realm-sim", version, about = "Cycle-level AXI4 crossbar simulator with ingress regulation and egress guarding")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunOpts {
    /// Preset name or path to a scenario TOML file.
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Cycle limit.
    #[arg(long)]
    cycles: Option<u64>,
    /// Output directory for CSV and trace files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the base configuration of a scenario, without its sweep.
    Run {
        #[command(flatten)]
        opts: RunOpts,
        /// Write the metrics CSV.
        #[arg(long)]
        csv: bool,
        /// Write the per-cycle handshake trace.
        #[arg(long)]
        trace: bool,
    },
    /// Run every point of a scenario's sweep; prints the metrics CSV.
    Sweep {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Area estimate from a parameter file (or `area_hermes`).
    Area { params: String },
    /// List built-in scenarios.
    ListScenarios,
    /// Print a built-in scenario as TOML.
    Show { scenario: String },
}

fn load(name: &str) -> Result<ScenarioConfig, String> {
    if let Some(c) = presets::scenario(name) {
        return Ok(c);
    }
    let text = fs::read_to_string(name).map_err(|e| format!("{name}: {e}"))?;
    ScenarioConfig::from_toml(&text).map_err(|e| format!("{name}: {e}"))
}

fn configure(opts: &RunOpts) -> Result<ScenarioConfig, String> {
    let mut cfg = load(&opts.scenario)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(c) = opts.cycles {
        cfg.max_cycles = c;
    }
    Ok(cfg)
}

fn out_file(dir: &Path, name: &str) -> Result<fs::File, String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let p = dir.join(name);
    fs::File::create(&p).map_err(|e| format!("{}: {e}", p.display()))
}

fn summary(r: &MetricsReport) {
    println!("{} [{}]: {} cycles{}", r.scenario, r.sweep_label, r.cycles, if r.complete { "" } else { " (incomplete)" });
    for m in &r.managers {
        let frac = m.frac_isolated.map_or("-".into(), |f| format!("{f:.3}"));
        println!(
            "  {:<8} bytes {:>9}  mean lat {:>8.2}  max lat {:>6}  bw {:.3} beats/cycle  frac_isolated {frac}",
            m.name, m.bytes, m.mean_lat, m.max_lat, m.bandwidth
        );
    }
    for u in &r.regions {
        println!("  region {}.r{}: mean use {:.1}% of budget over {} periods", u.manager, u.region, 100.0 * u.mean_fraction(), u.usage.len());
    }
    for f in &r.faults {
        let rec = &f.record;
        println!("  fault {} at cycle {}: {} tid {} stage {}", f.unit, rec.detected_at, rec.cause.as_str(), rec.tid, rec.stage.map_or("-", |s| s.as_str()));
    }
    for t in &r.timelines {
        let show = |v: Option<u64>| v.map_or("-".to_string(), |x| x.to_string());
        println!(
            "  timeline {}: fault {} detect {} reset {} notified {} (fault->detect {}, detect->reset {}, fault->notified {})",
            t.subordinate,
            show(t.fault_at),
            show(t.detected_at),
            show(t.reset_at),
            show(t.notified_at),
            show(t.fault_to_detect()),
            show(t.detect_to_reset()),
            show(t.fault_to_notified())
        );
    }
}

fn run(opts: &RunOpts, csv: bool, trace: bool) -> Result<ExitCode, String> {
    let mut cfg = configure(opts)?;
    cfg.sweep = None;
    let out = run_scenario(&cfg, trace).map_err(|e| e.to_string())?;
    summary(&out.report);
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    if csv {
        let f = out_file(&dir, &format!("{}.csv", cfg.name))?;
        write_csv(f, std::slice::from_ref(&out.report)).map_err(|e| e.to_string())?;
    }
    if trace {
        let f = out_file(&dir, &format!("{}.trace.csv", cfg.name))?;
        write_trace(f, &out.trace).map_err(|e| e.to_string())?;
    }
    Ok(if out.report.complete { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn sweep(opts: &RunOpts) -> Result<ExitCode, String> {
    if opts.scenario == "area_hermes" {
        return area("area_hermes");
    }
    let cfg = configure(opts)?;
    let reports = run_sweep(&cfg).map_err(|e| e.to_string())?;
    write_csv(std::io::stdout(), &reports).map_err(|e| e.to_string())?;
    if let Some(dir) = &opts.out {
        write_csv(out_file(dir, &format!("{}.csv", cfg.name))?, &reports).map_err(|e| e.to_string())?;
    }
    Ok(if reports.iter().all(|r| r.complete) { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn area(params: &str) -> Result<ExitCode, String> {
    let p = if params == "area_hermes" {
        presets::area_hermes()
    } else {
        let text = fs::read_to_string(params).map_err(|e| format!("{params}: {e}"))?;
        toml::from_str::<AreaParams>(&text).map_err(|e| format!("{params}: {e}"))?
    };
    let r = area_estimate(&p);
    println!("{:<22} {:>10} {:>5} {:>12}", "block", "each_ge", "n", "total_ge");
    for b in r.blocks.iter().filter(|b| b.instances > 0) {
        println!("{:<22} {:>10.1} {:>5} {:>12.1}", b.name, b.each_ge, b.instances, b.total_ge);
    }
    println!("irealm {:.1} kGE, erealm {:.1} kGE, shared {:.1} kGE, total {:.1} kGE", r.irealm_ge / 1e3, r.erealm_ge / 1e3, r.shared_ge / 1e3, r.total_ge / 1e3);
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run { opts, csv, trace } => run(opts, *csv, *trace),
        Cmd::Sweep { opts } => sweep(opts),
        Cmd::Area { params } => area(params),
        Cmd::ListScenarios => {
            for (n, d) in presets::NAMES {
                println!("{n:<14} {d}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Show { scenario } => presets::scenario(scenario)
            .map(|c| {
                print!("{}", c.to_toml());
                ExitCode::SUCCESS
            })
            .ok_or_else(|| format!("no built-in scenario {scenario:?}")),
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
