//! Executing a scenario and writing its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use togglemem::adiabatic::{
    capacitor_energy_delta, conventional_dynamic_power, fit_series_resistance, loglog_slope, predicted_recovery_energy,
    ramp_charging_current, ramp_resistor_energy, ramp_resistor_power, step_charge_energies, LumpedParams,
};
use togglemem::machine::{
    energy_report, format_program, invert_program, parallel_speedup, run_program, EnergyModelParams, EnergySource,
};
use togglemem::toggle::{toggle_until_exhausted, trigger_margin, BusState, CellState};
use togglemem::transient::{
    improvement_ratio, run_step_baseline, run_two_cycle_protocol, sweep_driver_width, sweep_frequency,
    write_frequency_csv, write_width_csv, BusNetwork, Improvement,
};
use togglemem::{MachineError, ModelError, SimError};

use crate::generator::{random_machine, random_reversible_program, rng};
use crate::scenario::{AnalyticParams, MachineScenario, Scenario, ScenarioError, ScenarioKind, ToggleScenario};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("machine: {0}")]
    Machine(#[from] MachineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) | RunError::Scenario(_) => 2,
            RunError::Model(_) | RunError::Sim(_) => 3,
            RunError::Machine(_) => 4,
            RunError::Io { .. } => 5,
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// Worst energy-balance error over every simulated trace, as a fraction
    /// of that trace's peak supply energy. `None` when nothing was simulated.
    pub balance_error: Option<f64>,
    /// Whether forward-then-inverse execution restored the machine.
    pub restored: Option<bool>,
}

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<(PathBuf, Vec<u8>)>,
    balance: Option<f64>,
}

impl Artifacts<'_> {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((self.dir.join(name), bytes));
    }

    fn balance(&mut self, e: f64) {
        self.balance = Some(self.balance.map_or(e, |b| b.max(e)));
    }
}

fn csv<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(f: F) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

/// Run `s`, writing artifacts under `out_dir`. Files are written only after
/// every computation has succeeded.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunReport, RunError> {
    let mut art = Artifacts { dir: out_dir, files: Vec::new(), balance: None };
    let mut summary = String::new();
    writeln!(summary, "scenario: {}", s.name).unwrap();
    writeln!(summary, "kind: {}", s.kind.name()).unwrap();
    writeln!(summary, "seed: {}", s.seed).unwrap();
    let mut restored = None;
    match &s.kind {
        ScenarioKind::Analytic(p) => run_analytic(p, &mut art, &mut summary)?,
        ScenarioKind::Transient { network, frequency, cases } => {
            for bit in cases.bits() {
                let run = run_two_cycle_protocol(network, bit, *frequency)?;
                let name = if cases.bits().len() == 1 { "trace.csv".to_string() } else { format!("trace_{bit}.csv") };
                art.add(&name, csv(|w| run.trace.write_csv(w)));
                let balance = run.trace.max_balance_error();
                art.balance(balance);
                writeln!(summary, "case toggle_output={bit}").unwrap();
                let half = 0.5 / frequency;
                for (k, e) in run.half_cycle_energies.iter().enumerate() {
                    writeln!(summary, "  net_energy_J at t={:e}: {:e}", (k + 1) as f64 * half, e).unwrap();
                }
                writeln!(summary, "  net_two_cycle_J: {:e}", run.net_two_cycle()).unwrap();
                writeln!(summary, "  peak_first_cycle_J: {:e}", run.peak_charge_energy).unwrap();
                writeln!(summary, "  balance_error: {:e}", balance).unwrap();
            }
            let baseline = run_step_baseline(network, *frequency)?;
            art.balance(baseline.max_balance_error());
            let imp = improvement_ratio(network, *frequency)?;
            write_improvement(&mut summary, &imp);
        }
        ScenarioKind::SweepFrequency { network, frequencies, toggle_output } => {
            let points = sweep_frequency(network, *toggle_output, frequencies)?;
            art.add("sweep_freq.csv", csv(|w| write_frequency_csv(&points, w)));
            for p in &points {
                art.balance(p.balance_error);
                writeln!(summary, "e_two_cycle_J at f={:e}: {:e}", p.frequency, p.energy_two_cycle).unwrap();
            }
            if let [.., a, b] = points.as_slice() {
                let slope = loglog_slope((a.frequency, a.energy_two_cycle), (b.frequency, b.energy_two_cycle))?;
                writeln!(summary, "loglog_slope {:e}->{:e} Hz: {:e}", a.frequency, b.frequency, slope).unwrap();
            }
            if let (Some(a), Some(b)) = (points.first(), points.last()) {
                if points.len() > 2 {
                    let slope = loglog_slope((a.frequency, a.energy_two_cycle), (b.frequency, b.energy_two_cycle))?;
                    writeln!(summary, "loglog_slope {:e}->{:e} Hz: {:e}", a.frequency, b.frequency, slope).unwrap();
                }
                let r = fit_series_resistance(
                    a.frequency,
                    a.energy_two_cycle,
                    network.capacitance(),
                    network.supply().v_high(),
                )?;
                writeln!(summary, "fitted_R_ser_ohm at f={:e}: {:e}", a.frequency, r).unwrap();
            }
            if !toggle_output {
                for p in &points {
                    let baseline = run_step_baseline(network, p.frequency)?;
                    art.balance(baseline.max_balance_error());
                    let base = baseline.last().e_dissipated;
                    writeln!(summary, "improvement_ratio at f={:e}: {:e}", p.frequency, base / p.energy_two_cycle)
                        .unwrap();
                }
            }
        }
        ScenarioKind::SweepWidth { network, widths_um, frequency } => {
            let points = sweep_driver_width(network, widths_um, *frequency)?;
            art.add("sweep_width.csv", csv(|w| write_width_csv(&points, w)));
            for p in &points {
                art.balance(p.balance_error);
                writeln!(summary, "e_cycle_J at W_um={:e} (R_on={:e}): {:e}", p.width_um, p.r_on, p.energy_cycle)
                    .unwrap();
            }
            let decreasing = points.windows(2).all(|w| w[1].energy_cycle < w[0].energy_cycle);
            writeln!(summary, "strictly_decreasing: {}", if decreasing { "yes" } else { "no" }).unwrap();
        }
        ScenarioKind::Machine(m) => restored = Some(run_machine(m, s.seed, &mut art, &mut summary)?),
        ScenarioKind::Toggle(t) => run_toggle(t, &mut art, &mut summary)?,
    }
    match art.balance {
        Some(b) => writeln!(summary, "max_balance_error: {b:e}").unwrap(),
        None => writeln!(summary, "max_balance_error: n/a").unwrap(),
    }
    art.add("summary.txt", summary.clone().into_bytes());

    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    for (path, bytes) in art.files {
        fs::write(&path, bytes).map_err(|source| RunError::Io { path: path.clone(), source })?;
        files.push(path);
    }
    Ok(RunReport { files, summary, balance_error: art.balance, restored })
}

fn write_improvement(summary: &mut String, imp: &Improvement) {
    writeln!(summary, "baseline_two_cycle_J: {:e}", imp.baseline_energy).unwrap();
    writeln!(summary, "recovery_two_cycle_J: {:e}", imp.recovery_energy).unwrap();
    writeln!(summary, "improvement_ratio at f={:e}: {:e}", imp.frequency, imp.ratio).unwrap();
}

/// Conventional two-cycle dissipation over the charge-recovery net energy
/// at the scenario frequency.
pub fn compare_to_baseline(s: &Scenario) -> Result<Improvement, RunError> {
    let (network, frequency): (&BusNetwork, f64) = match &s.kind {
        ScenarioKind::Transient { network, frequency, .. } | ScenarioKind::SweepWidth { network, frequency, .. } => {
            (network, *frequency)
        }
        other => {
            return Err(RunError::Usage(format!(
                "baseline comparison needs a transient scenario, not `{}`",
                other.name()
            )))
        }
    };
    Ok(improvement_ratio(network, frequency)?)
}

fn run_analytic(p: &AnalyticParams, art: &mut Artifacts, summary: &mut String) -> Result<(), RunError> {
    let lp = LumpedParams::new(p.resistance, p.capacitance, None, p.swing)?;
    let step = step_charge_energies(p.capacitance, p.swing);
    let speedup = parallel_speedup(p.processors, p.slowdown)?;
    let rows: Vec<(&str, f64)> = vec![
        ("ramp_current_A", ramp_charging_current(&lp, p.rise_time)?),
        ("ramp_resistor_power_W", ramp_resistor_power(&lp, p.rise_time)?),
        ("ramp_resistor_energy_J", ramp_resistor_energy(&lp, p.rise_time)?),
        ("capacitor_energy_delta_J", capacitor_energy_delta(p.capacitance, p.v0, p.swing)),
        ("step_from_supply_J", step.from_supply),
        ("step_in_capacitor_J", step.in_capacitor),
        ("step_in_resistor_J", step.in_resistor),
        ("conventional_power_W", conventional_dynamic_power(p.clock_frequency, p.capacitance, p.swing)),
        ("recovery_two_cycle_J", predicted_recovery_energy(p.frequency, p.resistance, p.capacitance, p.swing)),
        ("fitted_R_ser_ohm", fit_series_resistance(p.fit_frequency, p.fit_energy, p.capacitance, p.swing)?),
        ("loglog_slope", loglog_slope(p.slope_points[0], p.slope_points[1])?),
        ("parallel_speedup", speedup.ratio),
    ];
    let mut text = String::from("quantity,value\n");
    for (name, value) in &rows {
        writeln!(text, "{name},{value:e}").unwrap();
        writeln!(summary, "{name}: {value:e}").unwrap();
    }
    if speedup.not_beneficial {
        writeln!(summary, "parallel_speedup_note: not beneficial").unwrap();
    }
    art.add("analytic.csv", text.into_bytes());
    Ok(())
}

fn run_machine(m: &MachineScenario, seed: u64, art: &mut Artifacts, summary: &mut String) -> Result<bool, RunError> {
    let params = match (m.energy.source, &m.network) {
        (EnergySource::Calibrated, Some(net)) => {
            EnergyModelParams::calibrated(net, m.energy.frequency, m.energy.bus_mode)?
        }
        (EnergySource::Calibrated, None) => {
            return Err(RunError::Usage("calibrated energy needs a [network] section".into()))
        }
        (EnergySource::Analytic, _) => m.energy,
    };
    let mut r = rng(seed);
    let initial = random_machine(&mut r, m.width, m.words);
    let program = random_reversible_program(&mut r, m.width, m.length);
    let inverse = invert_program(&program)?;

    let mut work = initial.clone();
    let mut ledger = run_program(&mut work, &program, &params)?;
    let after_forward = work.clone();
    ledger.extend(run_program(&mut work, &inverse, &params)?);
    let restored = work.same_bits(&initial);
    let report = energy_report(&ledger);

    art.add("machine_initial.txt", initial.to_text().into_bytes());
    art.add("program.txt", format_program(&program).into_bytes());
    art.add("machine_final.txt", after_forward.to_text().into_bytes());
    art.add("ledger.csv", csv(|w| ledger.write_csv(w)));

    writeln!(summary, "words: {}", m.words).unwrap();
    writeln!(summary, "width: {}", m.width).unwrap();
    writeln!(summary, "instructions: {} forward + {} inverse", program.len(), inverse.len()).unwrap();
    writeln!(summary, "energy_source: {:?}", params.source).unwrap();
    writeln!(summary, "bus_mode: {:?}", params.bus_mode).unwrap();
    writeln!(summary, "e_hold_two_cycle_J: {:e}", params.e_hold_two_cycle).unwrap();
    writeln!(summary, "e_cycle_two_cycle_J: {:e}", params.e_cycle_two_cycle).unwrap();
    writeln!(summary, "total_energy_J: {:e}", report.total).unwrap();
    writeln!(summary, "matched_words: {}", report.matched_words).unwrap();
    writeln!(summary, "unmatched_words: {}", report.unmatched_words).unwrap();
    if let Some(ratio) = report.matched_to_unmatched_ratio {
        writeln!(summary, "matched_to_unmatched_ratio: {ratio:e}").unwrap();
    }
    writeln!(summary, "note: matchline energy only; broadcasting the toggle signal is not counted").unwrap();
    writeln!(summary, "RESTORED: {}", if restored { "yes" } else { "no" }).unwrap();
    Ok(restored)
}

fn run_toggle(t: &ToggleScenario, art: &mut Artifacts, summary: &mut String) -> Result<(), RunError> {
    let bus = BusState::new(t.bus_start, t.capacitance, t.v_dd)?;
    let steps = toggle_until_exhausted(CellState::new(t.bit), bus, t.pulse_width, &t.trigger, t.max_pulses);
    let mut text = String::from("pulse,v_bus_before_V,bit_after,toggled\n");
    let mut before = bus.voltage();
    for (k, r) in steps.iter().enumerate() {
        writeln!(text, "{},{:e},{},{}", k + 1, before, r.cell.bit as u8, r.toggled() as u8).unwrap();
        before = r.bus.voltage();
    }
    art.add("toggle.csv", text.into_bytes());
    let toggles = steps.iter().filter(|r| r.toggled()).count();
    writeln!(summary, "toggles: {toggles}").unwrap();
    if let Some(last) = steps.last().filter(|r| !r.toggled()) {
        writeln!(summary, "stopped: {:?} at bus {:e} V", last.outcome, last.bus.voltage()).unwrap();
    }
    writeln!(summary, "threshold_V: {:e}", t.trigger.threshold_voltage(t.v_dd)).unwrap();
    let margin = trigger_margin(t.r_kohm, t.w_um)?;
    writeln!(summary, "trigger_R_kohm_W_um: {:e} ({})", margin.product, if margin.ok { "ok" } else { "too small" })
        .unwrap();
    Ok(())
}
