//! Scenario documents.
//!
//! A scenario is a flat INI-style file: `[section]` headers, `key = value`
//! lines, `#` comments. Quantities are SI with an optional scale suffix
//! (`1p`, `10M`, `5k`). Every kind reads the `[scenario]` section plus the
//! sections it needs:
//!
//! | kind          | sections                      |
//! |---------------|-------------------------------|
//! | `analytic`    | `analytic`                    |
//! | `transient`   | `network`, `protocol`         |
//! | `sweep-freq`  | `network`, `sweep`            |
//! | `sweep-width` | `network`, `sweep`            |
//! | `machine`     | `machine`, optional `network` |
//! | `toggle`      | `toggle`                      |

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use togglemem::adiabatic::SupplyWaveform;
use togglemem::machine::{BusMode, EnergyModelParams, EnergySource};
use togglemem::toggle::TriggerParams;
use togglemem::transient::BusNetwork;

use crate::units::parse_quantity;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub message: String,
}

impl ScenarioError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn missing(section: &str, key: &str) -> Self {
        Self { line: None, message: format!("missing required key `{key}` in [{section}]") }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// Which of the two stored-bit cases a transient scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cases {
    False,
    True,
    Both,
}

impl Cases {
    pub fn bits(&self) -> Vec<bool> {
        match self {
            Cases::False => vec![false],
            Cases::True => vec![true],
            Cases::Both => vec![false, true],
        }
    }
}

/// Inputs of the closed-form evaluation. Defaults are the 1 pF, 1 V,
/// 5 kΩ bus.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticParams {
    pub resistance: f64,
    pub capacitance: f64,
    pub swing: f64,
    pub rise_time: f64,
    pub v0: f64,
    pub frequency: f64,
    pub clock_frequency: f64,
    pub fit_frequency: f64,
    pub fit_energy: f64,
    pub slope_points: [(f64, f64); 2],
    pub processors: u64,
    pub slowdown: f64,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        Self {
            resistance: 5e3,
            capacitance: 1e-12,
            swing: 1.0,
            rise_time: 50e-9,
            v0: 0.5,
            frequency: 10e6,
            clock_frequency: 100e6,
            fit_frequency: 1e6,
            fit_energy: 10e-15,
            slope_points: [(10e6, 77e-15), (20e6, 136e-15)],
            processors: 1_000_000,
            slowdown: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineScenario {
    pub words: usize,
    pub width: usize,
    pub length: usize,
    pub energy: EnergyModelParams,
    /// Network used to calibrate energies when `energy.source` is calibrated.
    pub network: Option<BusNetwork>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToggleScenario {
    pub capacitance: f64,
    pub v_dd: f64,
    pub bus_start: f64,
    pub bit: bool,
    pub pulse_width: f64,
    pub max_pulses: usize,
    pub trigger: TriggerParams,
    pub r_kohm: f64,
    pub w_um: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    Analytic(AnalyticParams),
    Transient { network: BusNetwork, frequency: f64, cases: Cases },
    SweepFrequency { network: BusNetwork, frequencies: Vec<f64>, toggle_output: bool },
    SweepWidth { network: BusNetwork, widths_um: Vec<f64>, frequency: f64 },
    Machine(MachineScenario),
    Toggle(ToggleScenario),
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Analytic(_) => "analytic",
            ScenarioKind::Transient { .. } => "transient",
            ScenarioKind::SweepFrequency { .. } => "sweep-freq",
            ScenarioKind::SweepWidth { .. } => "sweep-width",
            ScenarioKind::Machine(_) => "machine",
            ScenarioKind::Toggle(_) => "toggle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    /// Seed for anything randomized; 0 when not given.
    pub seed: u64,
    pub output: Option<PathBuf>,
}

type Entries = BTreeMap<String, (String, usize)>;
/// Sections by name, plus the line each header appeared on.
type Document = (BTreeMap<String, Entries>, BTreeMap<String, usize>);

/// Keys of one section, consumed as they are read so that leftovers can be
/// reported as unknown.
struct Section<'a> {
    name: &'a str,
    entries: Entries,
}

impl<'a> Section<'a> {
    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn str_or(&mut self, key: &str, default: &str) -> (String, usize) {
        self.take_raw(key).unwrap_or_else(|| (default.to_string(), 0))
    }

    fn quantity(&mut self, key: &str) -> Result<Option<(f64, usize)>, ScenarioError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((v, line)) => parse_quantity(&v)
                .map(|q| Some((q, line)))
                .map_err(|e| ScenarioError::at(line, format!("`{key}`: {e}"))),
        }
    }

    fn quantity_or(&mut self, key: &str, default: f64) -> Result<(f64, usize), ScenarioError> {
        Ok(self.quantity(key)?.unwrap_or((default, 0)))
    }

    fn required(&mut self, key: &str) -> Result<(f64, usize), ScenarioError> {
        self.quantity(key)?.ok_or_else(|| ScenarioError::missing(self.name, key))
    }

    fn count_or(&mut self, key: &str, default: usize) -> Result<usize, ScenarioError> {
        match self.take_raw(key) {
            None => Ok(default),
            Some((v, line)) => {
                v.trim().parse().map_err(|_| ScenarioError::at(line, format!("`{key}`: expected a count, got {v:?}")))
            }
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ScenarioError> {
        match self.take_raw(key) {
            None => Ok(default),
            Some((v, line)) => match v.trim() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(ScenarioError::at(line, format!("`{key}`: expected true or false, got {other:?}"))),
            },
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<(Vec<f64>, usize)>, ScenarioError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                let items = v
                    .split(',')
                    .map(|x| parse_quantity(x).map_err(|e| ScenarioError::at(line, format!("`{key}`: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Some((items, line)))
            }
        }
    }

    fn finish(self) -> Result<(), ScenarioError> {
        match self.entries.into_iter().min_by_key(|(_, (_, line))| *line) {
            Some((key, (_, line))) => Err(ScenarioError::at(line, format!("unknown key `{key}` in [{}]", self.name))),
            None => Ok(()),
        }
    }
}

fn check<T, E: fmt::Display>(r: Result<T, E>, line: usize) -> Result<T, ScenarioError> {
    r.map_err(|e| ScenarioError { line: (line > 0).then_some(line), message: e.to_string() })
}

fn split_sections(text: &str) -> Result<Document, ScenarioError> {
    let mut sections: BTreeMap<String, Entries> = BTreeMap::new();
    let mut header_lines = BTreeMap::new();
    let mut current: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::at(line, "unterminated section header"))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(ScenarioError::at(line, format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), Entries::new());
            header_lines.insert(name.clone(), line);
            current = Some(name);
            continue;
        }
        let section = current.as_ref().ok_or_else(|| ScenarioError::at(line, "key outside of any section"))?;
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ScenarioError::at(line, format!("expected `key = value`, got {content:?}")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(ScenarioError::at(line, "empty key"));
        }
        let entries = sections.get_mut(section).expect("section exists");
        if entries.insert(key.clone(), (value.trim().to_string(), line)).is_some() {
            return Err(ScenarioError::at(line, format!("duplicate key `{key}`")));
        }
    }
    Ok((sections, header_lines))
}

fn parse_network(s: &mut Section) -> Result<(BusNetwork, f64), ScenarioError> {
    let (c, c_line) = s.required("C")?;
    let (r_on, r_line) = s.quantity_or("R_on", 5e3)?;
    let (v_low, lo_line) = s.quantity_or("v_low", 0.5)?;
    let (v_high, hi_line) = s.quantity_or("v_high", 1.0)?;
    let (f, f_line) = s.quantity_or("f", 10e6)?;
    let supply = check(SupplyWaveform::half_sinusoid(v_low, v_high, f), lo_line.max(hi_line).max(f_line))?;
    let mut net = check(BusNetwork::new(c, r_on, supply), c_line.max(r_line))?;
    if let Some((r, line)) = s.quantity("R_ground")? {
        net = check(net.with_ground_resistance(r), line)?;
    }
    match s.take_raw("R_stray") {
        None => {}
        Some((v, _)) if v.trim() == "none" => {}
        Some((v, line)) => {
            let r = parse_quantity(&v).map_err(|e| ScenarioError::at(line, format!("`R_stray`: {e}")))?;
            net = check(net.with_stray(Some(r)), line)?;
        }
    }
    if let Some((v, line)) = s.quantity("v_init")? {
        net = check(net.with_v_init(v), line)?;
    }
    Ok((net, f))
}

fn parse_analytic(s: &mut Section) -> Result<AnalyticParams, ScenarioError> {
    let d = AnalyticParams::default();
    let mut p = AnalyticParams {
        resistance: s.quantity_or("R", d.resistance)?.0,
        capacitance: s.quantity_or("C", d.capacitance)?.0,
        swing: s.quantity_or("V1", d.swing)?.0,
        rise_time: s.quantity_or("T", d.rise_time)?.0,
        v0: s.quantity_or("v0", d.v0)?.0,
        frequency: s.quantity_or("f", d.frequency)?.0,
        clock_frequency: s.quantity_or("f_clock", d.clock_frequency)?.0,
        fit_frequency: s.quantity_or("fit_f", d.fit_frequency)?.0,
        fit_energy: s.quantity_or("fit_E", d.fit_energy)?.0,
        slope_points: d.slope_points,
        processors: s.count_or("processors", d.processors as usize)? as u64,
        slowdown: s.quantity_or("slowdown", d.slowdown)?.0,
    };
    for (k, key) in ["slope_a", "slope_b"].iter().enumerate() {
        if let Some((pt, line)) = s.list(key)? {
            if pt.len() != 2 {
                return Err(ScenarioError::at(line, format!("`{key}` needs `frequency, energy`")));
            }
            p.slope_points[k] = (pt[0], pt[1]);
        }
    }
    check(togglemem::adiabatic::LumpedParams::new(p.resistance, p.capacitance, None, p.swing), 0)?;
    Ok(p)
}

fn parse_machine(
    s: &mut Section,
    network: Option<BusNetwork>,
    f: Option<f64>,
) -> Result<MachineScenario, ScenarioError> {
    let words = s.count_or("words", 256)?;
    let width = s.count_or("width", 32)?;
    let length = s.count_or("length", 100)?;
    if width == 0 {
        return Err(ScenarioError { line: None, message: "`width` must be at least 1".into() });
    }
    let d = EnergyModelParams::default();
    let (mode, mode_line) = s.str_or("bus_mode", "recovery");
    let bus_mode = match mode.as_str() {
        "recovery" => BusMode::Recovery,
        "irreversible" => BusMode::Irreversible,
        other => {
            return Err(ScenarioError::at(
                mode_line,
                format!("`bus_mode`: expected recovery or irreversible, got {other:?}"),
            ))
        }
    };
    let (source, source_line) = s.str_or("energy", "analytic");
    let source = match source.as_str() {
        "analytic" => EnergySource::Analytic,
        "calibrated" => EnergySource::Calibrated,
        other => {
            return Err(ScenarioError::at(
                source_line,
                format!("`energy`: expected analytic or calibrated, got {other:?}"),
            ))
        }
    };
    if source == EnergySource::Calibrated && network.is_none() {
        return Err(ScenarioError::at(source_line, "calibrated energy needs a [network] section"));
    }
    let energy = EnergyModelParams {
        source,
        bus_mode,
        frequency: f.unwrap_or(d.frequency),
        e_hold_two_cycle: s.quantity_or("e_hold", d.e_hold_two_cycle)?.0,
        e_cycle_two_cycle: s.quantity_or("e_cycle", d.e_cycle_two_cycle)?.0,
        e_irreversible: s.quantity_or("e_irreversible", d.e_irreversible)?.0,
    };
    check(energy.validate(), 0)?;
    Ok(MachineScenario { words, width, length, energy, network })
}

fn parse_toggle(s: &mut Section) -> Result<ToggleScenario, ScenarioError> {
    let d = TriggerParams::default();
    let capacitance = s.quantity_or("C", 1e-12)?.0;
    let v_dd = s.quantity_or("v_dd", 1.0)?.0;
    let (bus_start, bus_line) = s.quantity_or("bus_start", v_dd)?;
    let bit = s.bool_or("bit", false)?;
    let pulse_width = s.quantity_or("pulse", 5e-9)?.0;
    let max_pulses = s.count_or("max_pulses", 20)?;
    let (threshold, t_line) = s.quantity_or("threshold", d.threshold_fraction)?;
    let min_pulse = s.quantity_or("min_pulse", d.min_pulse)?.0;
    let max_pulse = s.quantity_or("max_pulse", d.max_pulse)?.0;
    let droop = s.quantity_or("droop", d.droop_per_toggle)?.0;
    let trigger = check(TriggerParams::new(threshold, min_pulse, max_pulse, droop), t_line)?;
    check(togglemem::toggle::BusState::new(bus_start, capacitance, v_dd), bus_line)?;
    let r_kohm = s.quantity_or("r_kohm", 12.0)?.0;
    let w_um = s.quantity_or("w_um", 1.0)?.0;
    check(togglemem::toggle::trigger_margin(r_kohm, w_um), 0)?;
    Ok(ToggleScenario { capacitance, v_dd, bus_start, bit, pulse_width, max_pulses, trigger, r_kohm, w_um })
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let (mut sections, header_lines) = split_sections(text)?;
    let mut take = |name: &'static str| sections.remove(name).map(|entries| Section { name, entries });

    let mut head =
        take("scenario").ok_or_else(|| ScenarioError { line: None, message: "missing [scenario] section".into() })?;
    let (kind, kind_line) = head.take_raw("kind").ok_or_else(|| ScenarioError::missing("scenario", "kind"))?;
    let name = head.str_or("name", "scenario").0;
    let seed = head.count_or("seed", 0)? as u64;
    let output = head.take_raw("out").map(|(v, _)| PathBuf::from(v));
    head.finish()?;

    let need = |s: Option<Section<'static>>, name: &str| {
        s.ok_or_else(|| ScenarioError::at(kind_line, format!("kind `{kind}` needs a [{name}] section")))
    };

    let mut used: Vec<Section> = Vec::new();
    let kind = match kind.as_str() {
        "analytic" => {
            let mut s = take("analytic").unwrap_or(Section { name: "analytic", entries: Entries::new() });
            let p = parse_analytic(&mut s)?;
            used.push(s);
            ScenarioKind::Analytic(p)
        }
        "transient" => {
            let mut n = need(take("network"), "network")?;
            let (network, frequency) = parse_network(&mut n)?;
            used.push(n);
            let mut p = take("protocol").unwrap_or(Section { name: "protocol", entries: Entries::new() });
            let (cases, line) = p.str_or("toggle_output", "false");
            let cases = match cases.as_str() {
                "false" => Cases::False,
                "true" => Cases::True,
                "both" => Cases::Both,
                other => {
                    return Err(ScenarioError::at(
                        line,
                        format!("`toggle_output`: expected false, true or both, got {other:?}"),
                    ))
                }
            };
            used.push(p);
            ScenarioKind::Transient { network, frequency, cases }
        }
        "sweep-freq" => {
            let mut n = need(take("network"), "network")?;
            let (network, _) = parse_network(&mut n)?;
            used.push(n);
            let mut s = need(take("sweep"), "sweep")?;
            let (frequencies, line) =
                s.list("frequencies")?.ok_or_else(|| ScenarioError::missing("sweep", "frequencies"))?;
            if frequencies.iter().any(|f| *f <= 0.0) || frequencies.windows(2).any(|w| w[1] < w[0]) {
                return Err(ScenarioError::at(line, "`frequencies` must be positive and ascending"));
            }
            let toggle_output = s.bool_or("toggle_output", false)?;
            used.push(s);
            ScenarioKind::SweepFrequency { network, frequencies, toggle_output }
        }
        "sweep-width" => {
            let mut n = need(take("network"), "network")?;
            let (network, frequency) = parse_network(&mut n)?;
            used.push(n);
            let mut s = need(take("sweep"), "sweep")?;
            let (widths_um, line) = s.list("widths_um")?.ok_or_else(|| ScenarioError::missing("sweep", "widths_um"))?;
            if widths_um.iter().any(|w| *w <= 0.0) {
                return Err(ScenarioError::at(line, "`widths_um` must be positive"));
            }
            used.push(s);
            ScenarioKind::SweepWidth { network, widths_um, frequency }
        }
        "machine" => {
            let (network, f) = match take("network") {
                Some(mut n) => {
                    let (net, f) = parse_network(&mut n)?;
                    used.push(n);
                    (Some(net), Some(f))
                }
                None => (None, None),
            };
            let mut m = need(take("machine"), "machine")?;
            let p = parse_machine(&mut m, network, f)?;
            used.push(m);
            ScenarioKind::Machine(p)
        }
        "toggle" => {
            let mut t = need(take("toggle"), "toggle")?;
            let p = parse_toggle(&mut t)?;
            used.push(t);
            ScenarioKind::Toggle(p)
        }
        other => {
            return Err(ScenarioError::at(
                kind_line,
                format!(
                    "unknown kind {other:?} (expected analytic, transient, sweep-freq, sweep-width, machine or toggle)"
                ),
            ))
        }
    };
    for s in used {
        s.finish()?;
    }
    if let Some((name, _)) = sections.iter().next() {
        return Err(ScenarioError::at(
            header_lines[name],
            format!("section [{name}] is not used by kind `{}`", kind.name()),
        ));
    }
    Ok(Scenario { name, kind, seed, output })
}
