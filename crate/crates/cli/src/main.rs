mod grid;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvlaser_core::config_io::{emit_table, format_float, json_document, load_scenario, atomic_write, Cell, Format, Scenario, Table};
use nvlaser_core::nv_levels::contrast_map;
use nvlaser_core::optimize::{optimize, sweep, OptimizationProblem, Param, SweepSpec};
use nvlaser_core::sensing::{feasibility_map, sensitivity, spontaneous_emission_study, threshold_contrast_to_spectrum, Region};
use nvlaser_core::{Error, ErrorCategory};

use grid::{GridSpec, VarySpec};

#[derive(Parser)]
#[command(name = "nvlaser", version, about = "Laser-threshold NV-diamond magnetometry simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Preset name (D1, D2, D3, experimental) or scenario file
    #[arg(long, default_value = "D3")]
    scenario: String,

    /// Output file; defaults to <subcommand>.<format>
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, default_value = "csv")]
    format: Format,

    /// Differential gain override (m²)
    #[arg(long)]
    a: Option<f64>,

    /// Confinement factor override
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Absorption contrast over Rabi frequency and pump intensity
    ContrastMap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "1e4:1e7:64:log")]
        rabi: GridSpec,
        #[arg(long, default_value = "1e2:1e8:64:log")]
        intensity: GridSpec,
    },
    /// Off- and on-resonance threshold currents over (a, Γ)
    ThresholdMap {
        #[command(flatten)]
        common: Common,
        #[arg(long = "a-grid", default_value = "1e-22:1e-19:31:log")]
        a_grid: GridSpec,
        #[arg(long = "gamma-grid", default_value = "0.01:0.1:21")]
        gamma_grid: GridSpec,
    },
    /// Laser output versus microwave frequency
    Odmr {
        #[command(flatten)]
        common: Common,
        /// Drive current (A); defaults to the scenario setting
        #[arg(long)]
        drive_current: Option<f64>,
    },
    /// Noise-limited field sensitivity for each noise model of the scenario
    Sensitivity {
        #[command(flatten)]
        common: Common,
    },
    /// Region A/B/C classification and sensitivities over (a, Γ)
    Regions {
        #[command(flatten)]
        common: Common,
        #[arg(long = "a-grid", default_value = "1e-22:1e-19:31:log")]
        a_grid: GridSpec,
        #[arg(long = "gamma-grid", default_value = "0.01:0.1:21")]
        gamma_grid: GridSpec,
    },
    /// P–I curves and sensitivity versus spontaneous emission factor
    BetaStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,1e-5,1e-4,1e-3,1e-2")]
        betas: Vec<f64>,
    },
    /// Multi-start search for the best optical-shot-limited sensitivity
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pin T₂* (s) instead of optimising it
        #[arg(long)]
        t2_star: Option<f64>,
        #[arg(long, default_value_t = 16)]
        starts: usize,
    },
    /// Grid sweep over named parameters
    Sweep {
        #[command(flatten)]
        common: Common,
        /// name=start:stop:count[:log], repeatable; the last varies fastest
        #[arg(long = "vary", required = true)]
        vary: Vec<VarySpec>,
        /// Refuse sweeps with more cells than this
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        /// Resume file; finished cells are appended as they complete
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Input => 10,
        ErrorCategory::Config => 20,
        ErrorCategory::Model => 30,
        ErrorCategory::Solver => 40,
        ErrorCategory::Sensing => 50,
        ErrorCategory::Optimize => 60,
    }
}

fn category_name(category: ErrorCategory) -> &'static str {
    match category {
        ErrorCategory::Input => "input",
        ErrorCategory::Config => "config",
        ErrorCategory::Model => "model",
        ErrorCategory::Solver => "solver",
        ErrorCategory::Sensing => "sensing",
        ErrorCategory::Optimize => "optimize",
    }
}

fn f(v: f64) -> String {
    format_float(v)
}

struct Prepared {
    scenario: Scenario,
    out: PathBuf,
    format: Format,
}

fn prepare(common: &Common, kind: &str) -> Result<Prepared, Error> {
    let mut scenario = load_scenario(&common.scenario)?;
    if let Some(a) = common.a {
        scenario.diode.a = a;
    }
    if let Some(g) = common.gamma {
        scenario.diode.gamma = g;
    }
    scenario.validate()?;
    let ext = match common.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    Ok(Prepared {
        out: common.out.clone().unwrap_or_else(|| PathBuf::from(format!("{kind}.{ext}"))),
        format: common.format,
        scenario,
    })
}

fn emit(p: &Prepared, table: &Table, kind: &str) -> Result<(), Error> {
    emit_table(table, p.format, kind, &p.scenario.hash(), &p.out)
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::ContrastMap { common, rabi, intensity } => {
            let p = prepare(&common, "contrast-map")?;
            let map = contrast_map(&p.scenario.nv, &rabi.values(), &intensity.values())?;
            let mut t = Table::new(["rabi_frequency_hz", "intensity_w_m2", "contrast", "triplet_ground", "nv0", "singlet"]);
            for (r, &rv) in map.rabi.iter().enumerate() {
                for (c, &iv) in map.intensity.iter().enumerate() {
                    let k = r * map.intensity.len() + c;
                    t.push(vec![
                        rv.into(),
                        iv.into(),
                        map.contrast[k].into(),
                        map.triplet_ground[k].into(),
                        map.nv0[k].into(),
                        map.singlet[k].into(),
                    ])?;
                }
            }
            emit(&p, &t, "contrast-map")?;
            Ok(format!(
                "contrast-map scenario={} cells={} max_contrast={} out={}",
                p.scenario.name,
                map.contrast.len(),
                f(map.max_contrast()),
                p.out.display()
            ))
        }
        Command::ThresholdMap { common, a_grid, gamma_grid } => {
            let p = prepare(&common, "threshold-map")?;
            let chain = p.scenario.chain();
            let diamond = chain.diamond_response()?;
            let mut t = Table::new(["a_m2", "gamma", "i_th_off_a", "i_th_on_a", "delta_i_th_a", "eta_o_off"]);
            let mut min_ith = f64::INFINITY;
            for a in a_grid.values() {
                for g in gamma_grid.values() {
                    let mut c = chain.clone();
                    c.diode.a = a;
                    c.diode.gamma = g;
                    let pair = c.thresholds(&diamond)?;
                    min_ith = min_ith.min(pair.off.i_th);
                    t.push(vec![
                        a.into(),
                        g.into(),
                        pair.off.i_th.into(),
                        pair.on.i_th.into(),
                        pair.delta().into(),
                        pair.off.eta_o.into(),
                    ])?;
                }
            }
            emit(&p, &t, "threshold-map")?;
            Ok(format!(
                "threshold-map scenario={} cells={} contrast={} min_i_th_off={} out={}",
                p.scenario.name,
                t.rows.len(),
                f(diamond.contrast),
                f(min_ith),
                p.out.display()
            ))
        }
        Command::Odmr { common, drive_current } => {
            let p = prepare(&common, "odmr")?;
            let mut config = p.scenario.odmr_config()?;
            if drive_current.is_some() {
                config.drive_current = drive_current;
            }
            let spectrum = threshold_contrast_to_spectrum(&p.scenario.chain(), &config)?;
            let mut t = Table::new(["frequency_hz", "power_w", "threshold_current_a"]);
            for k in 0..spectrum.frequencies.len() {
                t.push(vec![
                    spectrum.frequencies[k].into(),
                    spectrum.powers[k].into(),
                    spectrum.threshold_currents[k].into(),
                ])?;
            }
            emit(&p, &t, "odmr")?;
            let m = &spectrum.metadata;
            Ok(format!(
                "odmr scenario={} i_th_off={} i_th_on={} contrast={} peak_power={} out={}",
                p.scenario.name,
                f(m.i_th_off),
                f(m.i_th_on),
                f(m.contrast),
                f(spectrum.peak_power()),
                p.out.display()
            ))
        }
        Command::Sensitivity { common } => {
            let p = prepare(&common, "sensitivity")?;
            let spectrum = threshold_contrast_to_spectrum(&p.scenario.chain(), &p.scenario.odmr_config()?)?;
            let mut t = Table::new([
                "noise",
                "bandwidth_hz",
                "sensitivity_t",
                "slope_max",
                "operating_frequency_hz",
                "operating_power_w",
                "drive_current_a",
                "noise_amplitude",
            ]);
            let mut parts = Vec::new();
            for noise in &p.scenario.noise {
                let r = sensitivity(&spectrum, noise, p.scenario.diode.wavelength)?;
                parts.push(format!("{}={}", noise.name(), f(r.sensitivity)));
                t.push(vec![
                    noise.name().into(),
                    noise.bandwidth.into(),
                    r.sensitivity.into(),
                    r.slope_max.into(),
                    r.operating_frequency.into(),
                    r.operating_power.into(),
                    r.drive_current.into(),
                    r.noise_amplitude.into(),
                ])?;
            }
            emit(&p, &t, "sensitivity")?;
            Ok(format!(
                "sensitivity scenario={} i_th_off={} contrast={} {} out={}",
                p.scenario.name,
                f(spectrum.metadata.i_th_off),
                f(spectrum.metadata.contrast),
                parts.join(" "),
                p.out.display()
            ))
        }
        Command::Regions { common, a_grid, gamma_grid } => {
            let p = prepare(&common, "regions")?;
            let map = feasibility_map(&p.scenario.chain(), &p.scenario.limits, &a_grid.values(), &gamma_grid.values())?;
            let mut t = Table::new([
                "a_m2",
                "gamma",
                "region",
                "i_th_off_a",
                "delta_i_th_a",
                "sensitivity_current_t",
                "sensitivity_optical_t",
            ]);
            for (r, &a) in map.a_grid.iter().enumerate() {
                for (c, &g) in map.gamma_grid.iter().enumerate() {
                    let k = map.index(r, c);
                    t.push(vec![
                        a.into(),
                        g.into(),
                        map.regions[k].label().into(),
                        map.i_th_off[k].into(),
                        map.delta_i_th[k].into(),
                        map.sensitivity_current[k].into(),
                        map.sensitivity_optical[k].into(),
                    ])?;
                }
            }
            emit(&p, &t, "regions")?;
            let best = |v: &[f64]| map.best_viable(v).map_or("none".to_string(), |(_, s)| f(s));
            Ok(format!(
                "regions scenario={} contrast={} A={} B={} C={} best_current_shot={} best_optical_shot={} out={}",
                p.scenario.name,
                f(map.diamond.contrast),
                map.count(Region::A),
                map.count(Region::B),
                map.count(Region::C),
                best(&map.sensitivity_current),
                best(&map.sensitivity_optical),
                p.out.display()
            ))
        }
        Command::BetaStudy { common, betas } => {
            let p = prepare(&common, "beta-study")?;
            let bandwidth = p.scenario.limits.bandwidth;
            let entries = spontaneous_emission_study(&p.scenario.chain(), &p.scenario.odmr_config()?, &betas, bandwidth)?;
            let mut t = Table::new(["beta", "current_a", "power_w", "sensitivity_t", "kink"]);
            let mut parts = Vec::new();
            for e in &entries {
                parts.push(format!("beta{}={}", e.beta, f(e.report.sensitivity)));
                for (i, pw) in e.currents.iter().zip(&e.powers) {
                    t.push(vec![
                        e.beta.into(),
                        (*i).into(),
                        (*pw).into(),
                        e.report.sensitivity.into(),
                        e.kink.to_string().into(),
                    ])?;
                }
            }
            emit(&p, &t, "beta-study")?;
            Ok(format!("beta-study scenario={} {} out={}", p.scenario.name, parts.join(" "), p.out.display()))
        }
        Command::Optimize { common, seed, t2_star, starts } => {
            let p = prepare(&common, "optimize")?;
            let mut problem = OptimizationProblem::global_search(p.scenario.chain(), p.scenario.limits);
            problem.starts = starts;
            if let Some(t2) = t2_star {
                problem.fix(Param::T2Star, t2);
            }
            let r = optimize(&problem, seed)?;
            match p.format {
                Format::Json => atomic_write(&p.out, json_document("optimize", &p.scenario.hash(), &r)?.as_bytes())?,
                Format::Csv => {
                    let mut t = Table::new(["quantity", "value"]);
                    for (param, v) in &r.best {
                        t.push(vec![param.name().into(), (*v).into()])?;
                    }
                    t.push(vec!["sensitivity_t".into(), r.sensitivity.into()])?;
                    t.push(vec!["i_th_off_a".into(), r.evaluation.pair.off.i_th.into()])?;
                    t.push(vec!["delta_i_th_a".into(), r.evaluation.pair.delta().into()])?;
                    t.push(vec!["contrast".into(), r.evaluation.contrast.into()])?;
                    emit(&p, &t, "optimize")?;
                }
            }
            let best: Vec<String> = r.best.iter().map(|(k, v)| format!("{}={}", k.name(), f(*v))).collect();
            Ok(format!(
                "optimize scenario={} seed={} sensitivity={} i_th_off={} {} out={}",
                p.scenario.name,
                seed,
                f(r.sensitivity),
                f(r.evaluation.pair.off.i_th),
                best.join(" "),
                p.out.display()
            ))
        }
        Command::Sweep { common, vary, budget, checkpoint } => {
            let p = prepare(&common, "sweep")?;
            let variables = vary
                .iter()
                .map(|v| Ok((Param::from_name(&v.name)?, v.grid.values())))
                .collect::<Result<Vec<_>, Error>>()?;
            let spec = SweepSpec { variables, budget };
            let t = sweep(&p.scenario.chain(), &p.scenario.limits, &spec, checkpoint.as_deref())?;
            emit(&p, &t, "sweep")?;
            let failed = t
                .column("error")
                .map_or(0, |k| t.rows.iter().filter(|r| !matches!(&r[k], Cell::Text(s) if s.is_empty())).count());
            Ok(format!(
                "sweep scenario={} cells={} failed={} out={}",
                p.scenario.name,
                t.rows.len(),
                failed,
                p.out.display()
            ))
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let cat = e.category();
            eprintln!(
                "error category={} code={} message={}",
                category_name(cat),
                exit_code(cat),
                quote(&e.to_string())
            );
            ExitCode::from(exit_code(cat))
        }
    }
}
