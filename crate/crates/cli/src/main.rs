//! `beamrx` — command-line surface over the array-receiver library. Every
//! subcommand reads one scenario (file + `--set` overrides), writes its
//! outputs into a single directory, and finishes with a `manifest.json`
//! naming each file and its hash.
//!
//! Exit codes: 0 success, 2 input/configuration error, 3 a stated
//! requirement failed.

mod emit;
mod overrides;

use std::env;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beamrx::array::{
    angle_grid, array_factor, default_grid, element_pattern_elevation, taper_amplitudes, TaperSpec,
};
use beamrx::backend::BeamWeights;
use beamrx::budget::{ofdm_data_rate_bps, required_snr_db, BudgetReport};
use beamrx::io::write_iq_binary;
use beamrx::ofdm::ber_test;
use beamrx::scenario::{
    frontend_capture, mix_seed, run_beam_sweep, run_budget, run_calibrate, run_constellation,
    Scenario,
};
use beamrx::{Error, Result};
use emit::Out;

#[derive(Parser)]
#[command(
    name = "beamrx",
    version,
    about = "Digital array receiver toolkit: link budgets, array patterns, \
             full-pipeline beam sweeps, and OFDM link runs"
)]
struct Cli {
    /// Scenario JSON file; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,

    /// Output directory (default: $BEAMRX_OUT, else ./beamrx-out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Dotted-path scenario override, repeatable:
    /// --set frontend.chain.vga_setting_db=-15
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Evaluation grid as start:stop:step (degrees for pattern/sweep,
    /// dB Eb/N0 for link).
    #[arg(
        long,
        global = true,
        value_name = "START:STOP:STEP",
        allow_hyphen_values = true
    )]
    grid: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cascade analysis and link budget with pass/fail against requirements.
    Budget,
    /// Closed-form array pattern with sidelobe and beamwidth metrics.
    Pattern {
        /// Analyze the 8-element elevation sub-array cut instead of the
        /// azimuth array.
        #[arg(long)]
        elevation: bool,
        /// Taper override: "uniform" or a pedestal level in dB (e.g. -6).
        #[arg(long, allow_hyphen_values = true)]
        taper: Option<String>,
    },
    /// Replay the stimulus from every grid angle through the full pipeline
    /// and compare against the analytic pattern.
    Sweep,
    /// Bit-error-rate and EVM curve over Eb/N0 for the scenario numerology.
    Link,
    /// Estimate per-channel calibration constants from a broadside capture.
    Calibrate,
    /// End-to-end constellation run: wavefront, front ends, converter,
    /// calibration, beamforming, demodulation.
    Run {
        /// Also dump the raw front-end channel captures as
        /// channel_<k>.iq (f32 I/Q pairs + JSON sidecar).
        #[arg(long)]
        dump_iq: bool,
    },
}

fn main() -> ExitCode {
    // Die quietly when a pipe reader (head, less, ...) closes stdout instead
    // of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Requirement(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    let scenario = load_scenario(cli)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| env::var_os("BEAMRX_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("beamrx-out"));
    let out = Out::new(&dir)?;
    match &cli.command {
        Command::Budget => cmd_budget(&scenario, out),
        Command::Pattern { elevation, taper } => {
            cmd_pattern(cli, &scenario, out, *elevation, taper.as_deref())
        }
        Command::Sweep => cmd_sweep(cli, &scenario, out),
        Command::Link => cmd_link(cli, &scenario, out),
        Command::Calibrate => cmd_calibrate(&scenario, out),
        Command::Run { dump_iq } => cmd_run(&scenario, out, *dump_iq),
    }
}

/// Scenario = file (or `{}`) + `--set` overrides + `--seed`, resolved so all
/// seed-drawn pieces are explicit before anything runs. The file is expanded
/// through the defaults first so `--set` paths always land on a fully
/// populated structure, even when the file is sparse.
fn load_scenario(cli: &Cli) -> Result<Scenario> {
    let from_file: Scenario = match &cli.scenario {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => Scenario::default(),
    };
    let mut value = serde_json::to_value(&from_file)
        .map_err(|e| Error::Config(format!("scenario encode: {e}")))?;
    for spec in &cli.set {
        overrides::apply(&mut value, spec)?;
    }
    if let Some(seed) = cli.seed {
        overrides::apply(&mut value, &format!("seed={seed}"))?;
    }
    let sc: Scenario = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("scenario does not parse: {e}")))?;
    // Unknown keys are dropped on deserialization; an override that vanished
    // was a typo'd path, not a request.
    let echo =
        serde_json::to_value(&sc).map_err(|e| Error::Config(format!("scenario encode: {e}")))?;
    for spec in &cli.set {
        if !overrides::survives(&echo, spec) {
            let path = spec.split('=').next().unwrap_or(spec);
            return Err(Error::Config(format!("--set {path}: scenario has no such field")));
        }
    }
    sc.resolve()
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::invalid(format!("grid '{spec}' is not START:STOP:STEP")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| Error::invalid(format!("bad grid number '{p}'"))))
        .collect::<Result<_>>()?;
    angle_grid(nums[0], nums[1], nums[2])
}

fn to_json(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Config(format!("encode: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn print_budget_table(sc: &Scenario, report: &BudgetReport) -> Result<()> {
    let chain = sc.frontend.effective_chain();
    let mid = chain.mid_band_hz();
    println!("{:<16} {:>9} {:>8} {:>10}", "stage", "gain dB", "NF dB", "OIP3 dBm");
    for s in chain.resolve(mid)? {
        let oip3 = s.oip3_dbm.map_or("-".to_string(), |o| format!("{o:.1}"));
        println!("{:<16} {:>9.2} {:>8.2} {:>10}", s.name, s.gain_db, s.nf_db, oip3);
    }
    let c = &report.cascade_mid;
    let oip3 = c.oip3_dbm.map_or("-".to_string(), |o| format!("{o:.1}"));
    println!(
        "{:<16} {:>9.2} {:>8.2} {:>10}   (at {:.0} MHz IF)",
        "cascade",
        c.gain_db,
        c.nf_db,
        oip3,
        mid / 1e6
    );
    println!(
        "band-edge gain   {:.2} / {:.2} dB",
        report.cascade_band_start.gain_db, report.cascade_band_end.gain_db
    );
    println!("data rate        {:.4} Gbps", report.data_rate_bps / 1e9);
    println!(
        "required SNR     {:.2} dB at Eb/N0 {:.1} dB over {:.1} MHz",
        report.required_snr_db,
        report.ebn0_db,
        report.occupied_bandwidth_hz / 1e6
    );
    println!(
        "sensitivity      {:.2} dBm (assumed input {:.1} dBm, element gain {:.1} dB)",
        report.sensitivity_dbm, report.input_level_dbm, report.element_gain_db
    );
    println!(
        "noise figure     {:.2} ≤ {:.1} dB: {}",
        c.nf_db,
        report.nf_max_db,
        if report.nf_pass { "ok" } else { "FAIL" }
    );
    println!(
        "gain             {:.2} ≥ {:.1} dB: {}",
        c.gain_db,
        report.gain_min_db,
        if report.gain_pass { "ok" } else { "FAIL" }
    );
    println!("overall          {}", if report.pass { "PASS" } else { "FAIL" });
    Ok(())
}

fn cmd_budget(sc: &Scenario, mut out: Out) -> Result<ExitCode> {
    let report = run_budget(sc)?;
    print_budget_table(sc, &report)?;
    out.write("budget.json", &to_json(&report)?)?;
    let manifest = out.finish("budget", sc)?;
    println!("wrote {}", manifest.display());
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn parse_taper(spec: &str) -> Result<TaperSpec> {
    if spec.eq_ignore_ascii_case("uniform") {
        return Ok(TaperSpec::Uniform);
    }
    spec.parse::<f64>()
        .map(|pedestal_db| TaperSpec::LinearPedestal { pedestal_db })
        .map_err(|_| Error::invalid(format!("taper '{spec}' is neither 'uniform' nor a dB value")))
}

#[derive(serde::Serialize)]
struct PatternMetrics {
    n_elements: usize,
    taper: TaperSpec,
    peak_angle_deg: f64,
    sidelobe_level_db: Option<f64>,
    beamwidth_3db_deg: Option<f64>,
}

fn cmd_pattern(
    cli: &Cli,
    sc: &Scenario,
    mut out: Out,
    elevation: bool,
    taper: Option<&str>,
) -> Result<ExitCode> {
    let grid = match &cli.grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(),
    };
    let (pattern, taper_used, n_elements) = if elevation {
        let taper = taper.map(parse_taper).transpose()?.unwrap_or(sc.elevation_taper);
        (element_pattern_elevation(&taper, &grid)?, taper, 8)
    } else {
        let taper = taper.map(parse_taper).transpose()?.unwrap_or(sc.taper);
        let amps = taper_amplitudes(sc.geometry.n_elements, &taper)?;
        let w = BeamWeights::steer(
            &sc.geometry,
            sc.weights.target_angle_deg,
            sc.geometry.design_freq_hz,
        )?;
        (
            array_factor(&sc.geometry, &amps, &w.weights, &grid, sc.geometry.design_freq_hz)?,
            taper,
            sc.geometry.n_elements,
        )
    };
    let (peak_angle_deg, _) = pattern.peak();
    let metrics = PatternMetrics {
        n_elements,
        taper: taper_used,
        peak_angle_deg,
        sidelobe_level_db: pattern.sidelobe_level_db(),
        beamwidth_3db_deg: pattern.beamwidth_3db_deg().ok(),
    };
    match metrics.sidelobe_level_db {
        Some(sll) => println!("peak {:.2}°, first sidelobe {:.2} dB", peak_angle_deg, sll),
        None => println!("peak {:.2}°, sidelobes: none", peak_angle_deg),
    }
    out.write("pattern.csv", pattern.to_csv().as_bytes())?;
    out.write("pattern_metrics.json", &to_json(&metrics)?)?;
    let manifest = out.finish("pattern", sc)?;
    println!("wrote {}", manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(cli: &Cli, sc: &Scenario, mut out: Out) -> Result<ExitCode> {
    let grid = match &cli.grid {
        Some(g) => parse_grid(g)?,
        None => angle_grid(-90.0, 90.0, 0.5)?,
    };
    let r = run_beam_sweep(sc, &grid)?;
    let mut csv = String::from("doa_deg,measured_db,analytic_db\n");
    for ((a, m), x) in r
        .measured
        .angles_deg
        .iter()
        .zip(&r.measured.magnitude_db)
        .zip(&r.analytic.magnitude_db)
    {
        csv.push_str(&format!("{a:.4},{m:.6},{x:.6}\n"));
    }
    out.write("sweep.csv", csv.as_bytes())?;
    #[derive(serde::Serialize)]
    struct SweepMetrics<'a> {
        peak_angle_deg: f64,
        peak_error_deg: f64,
        max_abs_deviation_db: f64,
        notes: &'a [String],
    }
    let metrics = SweepMetrics {
        peak_angle_deg: r.peak_angle_deg,
        peak_error_deg: r.peak_error_deg,
        max_abs_deviation_db: r.max_abs_deviation_db,
        notes: &r.notes,
    };
    out.write("sweep_metrics.json", &to_json(&metrics)?)?;
    println!(
        "peak {:.2}° (target {:.2}°), worst |measured-analytic| {:.3} dB",
        r.peak_angle_deg, sc.weights.target_angle_deg, r.max_abs_deviation_db
    );
    let manifest = out.finish("sweep", sc)?;
    println!("wrote {}", manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_link(cli: &Cli, sc: &Scenario, mut out: Out) -> Result<ExitCode> {
    let ebn0_grid = match &cli.grid {
        Some(g) => parse_grid(g)?,
        None => angle_grid(8.0, 18.0, 1.0)?,
    };
    let mut csv = String::from("ebn0_db,ber,evm\n");
    for &ebn0 in &ebn0_grid {
        let r = ber_test(&sc.ofdm, ebn0, sc.ber_bits, mix_seed(sc.seed, ebn0.to_bits()))?;
        csv.push_str(&format!("{:.2},{:.6e},{:.6}\n", ebn0, r.ber, r.evm_rms));
        println!("Eb/N0 {:>5.1} dB: BER {:.3e}  EVM {:.2}%", ebn0, r.ber, 100.0 * r.evm_rms);
    }
    out.write("ber.csv", csv.as_bytes())?;
    #[derive(serde::Serialize)]
    struct LinkMetrics {
        modulation_order: usize,
        data_rate_bps: f64,
        required_snr_db: f64,
        requirement_ebn0_db: f64,
        bits_per_point: usize,
    }
    let metrics = LinkMetrics {
        modulation_order: sc.ofdm.modulation_order,
        data_rate_bps: ofdm_data_rate_bps(&sc.ofdm)?,
        required_snr_db: required_snr_db(&sc.ofdm, sc.requirement.ebn0_db)?,
        requirement_ebn0_db: sc.requirement.ebn0_db,
        bits_per_point: sc.ber_bits,
    };
    out.write("link_metrics.json", &to_json(&metrics)?)?;
    let manifest = out.finish("link", sc)?;
    println!("wrote {}", manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_calibrate(sc: &Scenario, mut out: Out) -> Result<ExitCode> {
    let outcome = run_calibrate(sc)?;
    println!(
        "residual {:.3e}, coherent gain {:.2} dB over channel {}",
        outcome.residual, outcome.coherent_gain_db, outcome.set.reference_index
    );
    out.write("calibration.json", &to_json(&outcome)?)?;
    let manifest = out.finish("calibrate", sc)?;
    println!("wrote {}", manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(sc: &Scenario, mut out: Out, dump_iq: bool) -> Result<ExitCode> {
    let report = run_constellation(sc)?;
    let mut csv = String::from("re,im,decided\n");
    for p in &report.constellation {
        csv.push_str(&format!("{:.8},{:.8},{}\n", p.re, p.im, p.decided));
    }
    out.write("constellation.csv", csv.as_bytes())?;
    // The points live in the CSV; keep the JSON report compact.
    let mut slim = report.clone();
    slim.constellation = Vec::new();
    out.write("report.json", &to_json(&slim)?)?;
    if dump_iq {
        let channels = frontend_capture(sc)?;
        for (k, stream) in channels.streams.iter().enumerate() {
            let name = format!("channel_{k}.iq");
            write_iq_binary(&out.path(&name), stream)?;
            out.record(&name)?;
            out.record(&format!("{name}.json"))?;
        }
    }
    println!(
        "{} symbols, {} symbol errors, EVM {:.3}% (effective SNR {:.2} dB), margin {:.2} dB",
        report.n_symbols,
        report.symbol_errors,
        100.0 * report.evm_rms,
        report.effective_snr_db,
        report.margin_db
    );
    let manifest = out.finish("run", sc)?;
    println!("wrote {}", manifest.display());
    Ok(ExitCode::SUCCESS)
}
