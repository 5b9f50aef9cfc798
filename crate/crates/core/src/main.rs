use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use prodflow::flowchain::propagate_chain;
use prodflow::identify::{fit_fdp, fit_productivity, FitConfig};
use prodflow::model::format_model;
use prodflow::report::ingest::{format_run_csv, ingest_chain, ingest_sample, read_model, write_text};
use prodflow::report::{build_report, emit_step_plot, format_report_csv, ingest_cases, ingest_run};
use prodflow::spc::{sample_metrics, SpecLimits};
use prodflow::transient::{
    classify_steadiness, percentile_reaction_time, settling_time, step_response, BandMode, SettlingConfig,
};
use prodflow::{Result, TimeSeries};

#[derive(Parser)]
#[command(name = "prodflow", version, about = "Transient and flow-variability analysis of production processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Band {
    Amplitude,
    Final,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the unit-step response of a model.
    Step {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        dt: f64,
        /// Also draw the response as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Output CSV (t,u,y).
        #[arg(long)]
        out: PathBuf,
    },
    /// Settling time of a model's step response.
    Settle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = Band::Amplitude)]
        band: Band,
        /// Total process time; adds reaction time and steadiness.
        #[arg(long)]
        total_time: Option<f64>,
    },
    /// Capability and variability metrics of an output sample.
    Metrics {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, requires = "lsl", allow_hyphen_values = true)]
        usl: Option<f64>,
        #[arg(long, requires = "usl", allow_hyphen_values = true)]
        lsl: Option<f64>,
    },
    /// Propagate departure variability along a chain of stations.
    Chain {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        ca0: f64,
    },
    /// Fit a productivity function to a recorded run.
    Fit {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 2)]
        max_modes: usize,
        #[arg(long)]
        no_impulse: bool,
        #[arg(long)]
        stable_only: bool,
        /// Fitted model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Table of settling and reaction times for a directory of cases.
    Report {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Step responses of every case as SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values always serialize"));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Step { model, horizon, dt, svg, out } => {
            let pf = read_model(&model)?;
            let response = step_response(&pf, horizon, dt)?;
            let input = TimeSeries::new(response.times().to_vec(), vec![1.0; response.len()])?;
            write_text(&out, &format_run_csv(&input, &response)?)?;
            if let Some(svg) = svg {
                let name = model.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
                emit_step_plot(&[(name, response)], &svg)?;
            }
        }
        Command::Settle { model, epsilon, band, total_time } => {
            let pf = read_model(&model)?;
            let mode = match band {
                Band::Amplitude => BandMode::AmplitudeRelative,
                Band::Final => BandMode::FinalValueRelative,
            };
            let result = settling_time(&pf, &SettlingConfig::new(epsilon, mode, 0.0)?)?;
            let mut out = json!({
                "settling_time": result.settling_time,
                "steady_state_value": result.steady_state_value,
                "band": result.band,
                "stable": pf.is_stable(),
            });
            if let Some(tt) = total_time {
                let fraction = percentile_reaction_time(result.settling_time, tt)?;
                out["total_time"] = json!(tt);
                out["reaction_pct"] = json!(format!("{:.2}", 100.0 * fraction));
                out["steadiness"] = json!(classify_steadiness(result.settling_time, tt, pf.is_stable()).as_str());
            }
            print_json(&out);
        }
        Command::Metrics { sample, usl, lsl } => {
            let sample = ingest_sample(&sample)?;
            let limits = match (usl, lsl) {
                (Some(u), Some(l)) => Some(SpecLimits::new(u, l)?),
                _ => None,
            };
            let m = sample_metrics(&sample, limits.as_ref())?;
            print_json(&serde_json::to_value(m).expect("metrics serialize"));
        }
        Command::Chain { spec, ca0 } => {
            let nodes = ingest_chain(&spec)?;
            let result = propagate_chain(ca0, &nodes)?;
            println!("node,u,ce,ca,cd");
            for (i, node) in nodes.iter().enumerate() {
                println!(
                    "{},{},{},{},{}",
                    i + 1,
                    node.utilization(),
                    node.cv_effective(),
                    result.arrivals[i],
                    result.departures[i]
                );
            }
        }
        Command::Fit { run, max_modes, no_impulse, stable_only, out } => {
            let recorded = ingest_run(&run)?;
            let cfg = FitConfig {
                max_modes,
                allow_impulse: !no_impulse,
                allow_unstable: !stable_only,
                ..FitConfig::default()
            };
            let fdp = fit_fdp(&recorded)?;
            let fit = fit_productivity(&recorded, &cfg)?;
            write_text(&out, &format_model(&fit.model))?;
            let mut summary = fit.summary_json();
            summary["fdp_alpha"] = json!(fdp.alpha);
            summary["fdp_gof"] = json!(fdp.gof);
            print_json(&summary);
        }
        Command::Report { cases, out, plot } => {
            let records = ingest_cases(&cases)?;
            let rows = build_report(&records, &SettlingConfig::default())?;
            write_text(&out, &format_report_csv(&rows))?;
            if let Some(plot) = plot {
                let longest = rows.iter().filter_map(|r| r.ts).fold(0.0f64, f64::max);
                let horizon = if longest > 0.0 { 1.25 * longest } else { 1.0 };
                let dt = horizon / 2000.0;
                let curves = rows
                    .iter()
                    .map(|row| {
                        let case = records.iter().find(|c| c.name == row.name).expect("row comes from a case");
                        Ok((row.name.clone(), step_response(&case.model, horizon, dt)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                emit_step_plot(&curves, &plot)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
    }
}
