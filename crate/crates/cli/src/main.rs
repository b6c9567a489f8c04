// kerr-jcm: run the two-photon Kerr Jaynes–Cummings engines from the shell.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical convergence failure,
// 1 anything else (I/O and the like).

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{EngineArg, ScenarioArgs};
use kerr_jcm::scenario::{self, CompareReport, Deviation, Engine, RunConfig, RunOutput, RunSummary};

const OUT_DIR_ENV: &str = "KERR_JCM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "kerr-jcm",
    version,
    about = "Two-photon Jaynes-Cummings model in a Kerr medium",
    long_about = "Two-photon Jaynes-Cummings model in a Kerr medium.\n\n\
        Units: energies and frequencies are in units of |γ| (default |γ| = 1) and \
        time in units of 1/|γ|. The coupling envelope defaults to T(t) = 1."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its CSV series
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output CSV file [default: $KERR_JCM_OUT_DIR/simulation.csv]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario with two engines and report deviations
    Compare {
        #[command(flatten)]
        common: Common,
        /// The two engines to compare, e.g. oracle,hierarchy
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["oracle", "series"])]
        engines: Vec<EngineArg>,
    },
    /// Run a scenario for several Kerr strengths χ1 = χ2 = χ
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 1.0])]
        chi: Vec<f64>,
        /// Output directory [default: $KERR_JCM_OUT_DIR]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List or run the figure parameter sets
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    List,
    Run {
        /// fig1, fig2 or fig3
        name: String,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        /// Output directory [default: $KERR_JCM_OUT_DIR]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML file with scenario keys; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => ScenarioArgs::load(path)?,
            None => ScenarioArgs::default(),
        };
        base.overlay(&self.scenario).to_run_config()
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    program: &'static str,
    version: &'static str,
    label: &'a str,
    config: &'a RunConfig,
    summary: &'a RunSummary,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    csv.with_file_name(name)
}

fn write_outputs(path: &Path, label: &str, config: &RunConfig, out: &RunOutput) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    out.series.write_csv(std::io::BufWriter::new(file))?;
    let meta = Sidecar {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        label,
        config,
        summary: &out.summary,
    };
    let text = toml::to_string(&meta).context("serializing metadata")?;
    fs::write(sidecar_path(path), text)?;
    Ok(())
}

fn print_summary(label: &str, path: &Path, s: &RunSummary) {
    let mut o = std::io::stdout().lock();
    let _ = writeln!(o, "{label}: {} -> {}", s.engine.name(), path.display());
    if let Some(t) = s.truncation {
        let _ = writeln!(o, "  truncation        {} x {}", t.nmax1, t.nmax2);
    }
    if let Some(k) = s.cutoff {
        let _ = writeln!(o, "  hierarchy cutoff  {k}");
    }
    let _ = writeln!(o, "  norm residual     {:.3e}", s.max_residual_norm);
    let _ = writeln!(o, "  charge residual   {:.3e}", s.max_residual_charge);
    if let Some(e) = s.energy_drift {
        let _ = writeln!(o, "  energy drift      {e:.3e} (relative)");
    }
    if let Some(c) = s.cut_weight {
        let _ = writeln!(o, "  edge cut weight   {c:.3e}");
    }
    if let Some(c) = s.closure_error {
        let _ = writeln!(o, "  closure error     {c:.3e}");
    }
    if let Some(n) = s.ode_steps {
        let _ = writeln!(o, "  integrator steps  {n}");
    }
}

fn print_compare(r: &CompareReport) {
    let mut o = std::io::stdout().lock();
    let _ = writeln!(o, "{} vs {}", r.engines.0.name(), r.engines.1.name());
    let _ = writeln!(o, "  {:<8} {:>12} {:>12}", "", "max |d|", "mean |d|");
    let rows: [(&str, &Deviation); 5] = [
        ("pop_e", &r.pop_e),
        ("pop_g", &r.pop_g),
        ("n1", &r.n1),
        ("n2", &r.n2),
        ("g2_12", &r.g2_12),
    ];
    for (name, d) in rows {
        let _ = writeln!(o, "  {name:<8} {:>12.4e} {:>12.4e}", d.max_abs, d.mean_abs);
    }
}

fn run_labelled(jobs: Vec<(String, RunConfig)>, dir: &Path) -> Result<()> {
    let configs: Vec<RunConfig> = jobs.iter().map(|(_, c)| c.clone()).collect();
    for ((label, config), result) in jobs.iter().zip(scenario::run_all(&configs)) {
        let out = result?;
        let path = dir.join(format!("{label}.csv"));
        write_outputs(&path, label, config, &out)?;
        print_summary(label, &path, &out.summary);
    }
    Ok(())
}

fn chi_label(chi: f64) -> String {
    format!("chi{chi}")
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, out } => {
            let config = common.run_config()?;
            let path = out.unwrap_or_else(|| default_out_dir().join("simulation.csv"));
            let result = scenario::run(&config)?;
            write_outputs(&path, "simulation", &config, &result)?;
            print_summary("simulation", &path, &result.summary);
        }
        Command::Compare { common, engines } => {
            if engines.len() != 2 {
                return Err(kerr_jcm::Error::InvalidParameter(format!(
                    "--engines takes exactly two engines, got {}",
                    engines.len()
                ))
                .into());
            }
            let config = common.run_config()?;
            let pair: (Engine, Engine) = (engines[0].into(), engines[1].into());
            print_compare(&scenario::compare(&config, pair)?);
        }
        Command::Sweep { common, chi, out } => {
            let config = common.run_config()?;
            let dir = out.unwrap_or_else(default_out_dir);
            let jobs = chi
                .iter()
                .map(|&x| {
                    let mut c = config.clone();
                    c.params.chi1 = x;
                    c.params.chi2 = x;
                    (chi_label(x), c)
                })
                .collect();
            run_labelled(jobs, &dir)?;
        }
        Command::Presets { action: PresetAction::List } => {
            for name in scenario::PRESET_NAMES {
                let field = scenario::preset_field(name)?;
                println!("{name}: {:?}, chi in {:?}, t in [0, 25], 500 samples", field.field, scenario::PRESET_CHIS);
            }
        }
        Command::Presets { action: PresetAction::Run { name, engine, out } } => {
            let mut jobs = scenario::preset(&name)?;
            if let Some(e) = engine {
                for (_, c) in &mut jobs {
                    c.engine = e.into();
                }
            }
            run_labelled(jobs, &out.unwrap_or_else(default_out_dir))?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<kerr_jcm::Error>() {
        Some(e) if e.is_convergence_failure() => 3,
        Some(kerr_jcm::Error::Csv(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
