//! Transient simulation of a lumped matchline.
//!
//! The bus is a single node with capacitance `C` to ground. Three resistive
//! paths can load it:
//!
//! - the driver, an ideal switch in series with `r_on`, to the supply;
//! - the evaluation (discharge) path, a switch in series with `r_ground`, to
//!   ground;
//! - an optional always-present stray resistance to ground.
//!
//! The node equation
//!
//! ```text
//! C·dv/dt = g_drv·(v_sup − v) − (g_gnd + g_stray)·v
//! ```
//!
//! is integrated with the trapezoidal rule on a fixed grid. Supply and
//! dissipated energy are accumulated by trapezoidal quadrature of `v·i` and
//! `i²R` on the same grid, so the energy columns of a trace are computed
//! independently of each other.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::adiabatic::{capacitor_energy_delta, require_positive, SupplyWaveform};
use crate::error::SimError;
use crate::toggle::matchline_gate;

/// Driver on-resistance times gate width. Anchors a 2.5 µm driver at 5 kΩ.
pub const DRIVER_RESISTANCE_WIDTH_PRODUCT: f64 = 12.5e3;

/// Integration steps per smallest time scale (RC or half-period).
pub const STEPS_PER_TIME_CONSTANT: f64 = 200.0;

/// Output samples per protocol run. A multiple of four so that every
/// half-cycle boundary lands on a sample.
const PROTOCOL_SAMPLES: usize = 200;

/// Lumped matchline with its driver and supply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusNetwork {
    capacitance: f64,
    r_on: f64,
    r_ground: f64,
    r_stray: Option<f64>,
    supply: SupplyWaveform,
    v_init: f64,
}

impl BusNetwork {
    /// Network with the discharge path sized like the driver, no stray
    /// leakage, and the bus precharged to half the supply peak.
    pub fn new(capacitance: f64, r_on: f64, supply: SupplyWaveform) -> Result<Self, SimError> {
        require_positive("capacitance", capacitance)?;
        require_positive("r_on", r_on)?;
        Ok(Self { capacitance, r_on, r_ground: r_on, r_stray: None, supply, v_init: 0.5 * supply.v_high() })
    }

    /// 1 pF bus, 5 kΩ driver, 0.5–1.0 V sinusoidal supply at 10 MHz.
    pub fn reference() -> Self {
        let supply = SupplyWaveform::half_sinusoid(0.5, 1.0, 10e6).expect("valid reference supply");
        Self::new(1e-12, 5e3, supply).expect("valid reference network")
    }

    pub fn with_stray(mut self, r_stray: Option<f64>) -> Result<Self, SimError> {
        if let Some(r) = r_stray {
            require_positive("r_stray", r)?;
        }
        self.r_stray = r_stray;
        Ok(self)
    }

    pub fn with_ground_resistance(mut self, r_ground: f64) -> Result<Self, SimError> {
        self.r_ground = require_positive("r_ground", r_ground)?;
        Ok(self)
    }

    pub fn with_r_on(mut self, r_on: f64) -> Result<Self, SimError> {
        self.r_on = require_positive("r_on", r_on)?;
        Ok(self)
    }

    pub fn with_v_init(mut self, v_init: f64) -> Result<Self, SimError> {
        if !(v_init >= 0.0 && v_init <= self.supply.v_high()) {
            return Err(SimError::Network(format!("v_init {v_init} V outside [0, {}] V", self.supply.v_high())));
        }
        self.v_init = v_init;
        Ok(self)
    }

    /// Replace the supply. A precharge above the new peak is clamped to it.
    pub fn with_supply(mut self, supply: SupplyWaveform) -> Self {
        self.supply = supply;
        self.v_init = self.v_init.min(supply.v_high());
        self
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn r_on(&self) -> f64 {
        self.r_on
    }

    pub fn r_ground(&self) -> f64 {
        self.r_ground
    }

    pub fn r_stray(&self) -> Option<f64> {
        self.r_stray
    }

    pub fn supply(&self) -> &SupplyWaveform {
        &self.supply
    }

    pub fn v_init(&self) -> f64 {
        self.v_init
    }

    /// Same bus driven by a sinusoid at `frequency` between the current
    /// supply's levels.
    fn sinusoidal(&self, frequency: f64) -> Result<Self, SimError> {
        let supply = SupplyWaveform::half_sinusoid(self.supply.v_low(), self.supply.v_high(), frequency)?;
        Ok(self.with_supply(supply))
    }
}

/// Switch states over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchInterval {
    pub start: f64,
    pub end: f64,
    pub driver_on: bool,
    pub ground_on: bool,
}

/// Ordered, non-overlapping switch intervals. Both switches are open
/// outside every interval.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwitchSchedule {
    intervals: Vec<SwitchInterval>,
}

impl SwitchSchedule {
    pub fn new(intervals: Vec<SwitchInterval>) -> Result<Self, SimError> {
        let mut prev_end = 0.0;
        for (k, iv) in intervals.iter().enumerate() {
            if !(iv.start.is_finite() && iv.end.is_finite()) || iv.start < 0.0 || iv.end <= iv.start {
                return Err(SimError::Schedule(format!(
                    "interval {k} [{:e}, {:e}) is empty or negative",
                    iv.start, iv.end
                )));
            }
            if iv.start < prev_end {
                return Err(SimError::Schedule(format!("interval {k} overlaps or is out of order")));
            }
            prev_end = iv.end;
        }
        Ok(Self { intervals })
    }

    /// Driver conducting over `[0, horizon)`.
    pub fn driver_always_on(horizon: f64) -> Result<Self, SimError> {
        Self::new(vec![SwitchInterval { start: 0.0, end: horizon, driver_on: true, ground_on: false }])
    }

    pub fn intervals(&self) -> &[SwitchInterval] {
        &self.intervals
    }

    pub fn end(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.end)
    }

    /// `(driver_on, ground_on)` at time `t`.
    pub fn state_at(&self, t: f64) -> (bool, bool) {
        let k = self.intervals.partition_point(|iv| iv.end <= t);
        match self.intervals.get(k) {
            Some(iv) if iv.start <= t => (iv.driver_on, iv.ground_on),
            _ => (false, false),
        }
    }

    fn drives(&self) -> bool {
        self.intervals.iter().any(|iv| iv.driver_on)
    }

    fn grounds(&self) -> bool {
        self.intervals.iter().any(|iv| iv.ground_on)
    }
}

/// Fixed integration grid and output decimation. `horizon` is a whole
/// number of `print_step`s and `print_step` a whole number of `dt`s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    dt: f64,
    horizon: f64,
    print_step: f64,
    steps_per_print: usize,
    prints: usize,
}

fn whole_multiple(ratio: f64) -> Option<usize> {
    let n = ratio.round();
    (n >= 1.0 && (ratio - n).abs() <= 1e-6 * n).then_some(n as usize)
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, print_step: f64) -> Result<Self, SimError> {
        for (name, v) in [("dt", dt), ("horizon", horizon), ("print_step", print_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::Config(format!("{name} must be positive, got {v:e}")));
            }
        }
        if dt > print_step || print_step > horizon {
            return Err(SimError::Config(format!(
                "need dt <= print_step <= horizon (dt = {dt:e}, print_step = {print_step:e}, horizon = {horizon:e})"
            )));
        }
        let prints = whole_multiple(horizon / print_step)
            .ok_or_else(|| SimError::Config("horizon is not a whole number of print steps".into()))?;
        if prints < 100 {
            return Err(SimError::Config(format!("print_step must be at most horizon/100 (got horizon/{prints})")));
        }
        let steps_per_print = whole_multiple(print_step / dt)
            .ok_or_else(|| SimError::Config("print_step is not a whole number of time steps".into()))?;
        Ok(Self { dt, horizon, print_step, steps_per_print, prints })
    }

    /// Grid with `prints` output samples and a step no larger than `dt_max`.
    pub fn fitted(dt_max: f64, horizon: f64, prints: usize) -> Result<Self, SimError> {
        if !(dt_max.is_finite() && dt_max > 0.0) {
            return Err(SimError::Config(format!("dt_max must be positive, got {dt_max:e}")));
        }
        let print_step = horizon / prints as f64;
        let per = (print_step / dt_max).ceil().max(1.0);
        Self::new(print_step / per, horizon, print_step)
    }

    /// Grid following the default step rule: `min(edge time, RC) / 200`
    /// over the time constants the schedule can activate.
    pub fn for_network(
        net: &BusNetwork,
        sched: &SwitchSchedule,
        horizon: f64,
        prints: usize,
    ) -> Result<Self, SimError> {
        let mut scale = smallest_time_constant(net, sched).unwrap_or(horizon);
        if let Some(edge) = net.supply.edge_time() {
            scale = scale.min(edge);
        }
        Self::fitted(scale.min(horizon) / STEPS_PER_TIME_CONSTANT, horizon, prints)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn print_step(&self) -> f64 {
        self.print_step
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_print * self.prints
    }

    /// The same grid with the time step halved.
    pub fn refined(&self) -> Self {
        Self { dt: 0.5 * self.dt, steps_per_print: 2 * self.steps_per_print, ..*self }
    }
}

fn smallest_time_constant(net: &BusNetwork, sched: &SwitchSchedule) -> Option<f64> {
    let mut tau: Option<f64> = None;
    let mut take = |r: f64| {
        let t = r * net.capacitance;
        tau = Some(tau.map_or(t, |old: f64| old.min(t)));
    };
    if sched.drives() {
        take(net.r_on);
    }
    if sched.grounds() {
        take(net.r_ground);
    }
    if let Some(r) = net.r_stray {
        take(r);
    }
    tau
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub v_bus: f64,
    pub v_supply: f64,
    /// Current out of the supply into the bus; negative while charge is
    /// returned.
    pub i_supply: f64,
    /// Cumulative energy delivered by the supply.
    pub e_supply: f64,
    /// Cumulative energy burned in all resistances.
    pub e_dissipated: f64,
}

pub const TRACE_CSV_HEADER: &str = "t_s,v_bus_V,v_supply_V,i_A,e_supply_J,e_diss_J";

/// Sampled result of a transient run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientTrace {
    capacitance: f64,
    v_init: f64,
    samples: Vec<Sample>,
}

impl TransientTrace {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn v_init(&self) -> f64 {
        self.v_init
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    fn interpolate(&self, t: f64, field: impl Fn(&Sample) -> f64) -> Result<f64, SimError> {
        let (start, end) = (self.start(), self.end());
        let tol = 1e-9 * (end - start);
        if !(t >= start - tol && t <= end + tol) {
            return Err(SimError::OutsideTrace { t, start, end });
        }
        let k = self.samples.partition_point(|s| s.t < t);
        if k == 0 {
            return Ok(field(&self.samples[0]));
        }
        if k == self.samples.len() {
            return Ok(field(self.last()));
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        let x = (t - a.t) / (b.t - a.t);
        Ok(field(a) + x * (field(b) - field(a)))
    }

    pub fn energy_from_supply(&self, t: f64) -> Result<f64, SimError> {
        self.interpolate(t, |s| s.e_supply)
    }

    pub fn dissipated_energy(&self, t: f64) -> Result<f64, SimError> {
        self.interpolate(t, |s| s.e_dissipated)
    }

    pub fn bus_voltage(&self, t: f64) -> Result<f64, SimError> {
        self.interpolate(t, |s| s.v_bus)
    }

    /// Largest cumulative supply energy in the trace.
    pub fn peak_supply_energy(&self) -> f64 {
        self.samples.iter().map(|s| s.e_supply).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|e_supply − ΔE_cap − e_dissipated|` over all samples, as a
    /// fraction of the peak supply energy.
    pub fn max_balance_error(&self) -> f64 {
        let peak = self.samples.iter().map(|s| s.e_supply.abs()).fold(0.0, f64::max);
        let worst = self
            .samples
            .iter()
            .map(|s| {
                let stored = capacitor_energy_delta(self.capacitance, self.v_init, s.v_bus);
                (s.e_supply - stored - s.e_dissipated).abs()
            })
            .fold(0.0, f64::max);
        if peak > 0.0 {
            worst / peak
        } else {
            worst
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                s.t, s.v_bus, s.v_supply, s.i_supply, s.e_supply, s.e_dissipated
            )?;
        }
        Ok(())
    }
}

/// Cumulative supply energy of `trace` at time `t`.
pub fn energy_from_supply(trace: &TransientTrace, t: f64) -> Result<f64, SimError> {
    trace.energy_from_supply(t)
}

/// Cumulative resistive dissipation of `trace` at time `t`.
pub fn dissipated_energy(trace: &TransientTrace, t: f64) -> Result<f64, SimError> {
    trace.dissipated_energy(t)
}

/// Integrate the bus node over `cfg.horizon`.
pub fn simulate(net: &BusNetwork, sched: &SwitchSchedule, cfg: &SimConfig) -> Result<TransientTrace, SimError> {
    if sched.end() > cfg.horizon * (1.0 + 1e-9) {
        return Err(SimError::Schedule(format!(
            "schedule ends at {:e} s, past the horizon {:e} s",
            sched.end(),
            cfg.horizon
        )));
    }
    if let Some(tau) = smallest_time_constant(net, sched) {
        if cfg.dt > tau / 10.0 {
            return Err(SimError::StepTooLarge { dt: cfg.dt, tau });
        }
    }

    let c = net.capacitance;
    let g_drv = 1.0 / net.r_on;
    let g_gnd = 1.0 / net.r_ground;
    let g_stray = net.r_stray.map_or(0.0, |r| 1.0 / r);
    let dt = cfg.dt;
    let c_dt = c / dt;

    let mut v = net.v_init;
    let mut vs0 = net.supply.eval(0.0);
    let mut e_supply = 0.0;
    let mut e_diss = 0.0;

    let (drv0, _) = sched.state_at(0.5 * dt);
    let mut samples = Vec::with_capacity(cfg.prints + 1);
    samples.push(Sample {
        t: 0.0,
        v_bus: v,
        v_supply: vs0,
        i_supply: if drv0 { g_drv * (vs0 - v) } else { 0.0 },
        e_supply: 0.0,
        e_dissipated: 0.0,
    });

    let total = cfg.total_steps();
    for n in 0..total {
        let t0 = n as f64 * dt;
        let t1 = (n + 1) as f64 * dt;
        let (drv, gnd) = sched.state_at(t0 + 0.5 * dt);
        let gd = if drv { g_drv } else { 0.0 };
        let gl = if gnd { g_gnd } else { 0.0 } + g_stray;
        let vs1 = net.supply.eval(t1);

        let i0 = gd * (vs0 - v);
        let v1 = (c_dt * v + 0.5 * (i0 - gl * v + gd * vs1)) / (c_dt + 0.5 * (gd + gl));
        let i1 = gd * (vs1 - v1);

        e_supply += 0.5 * dt * (vs0 * i0 + vs1 * i1);
        let p0 = if drv { net.r_on * i0 * i0 } else { 0.0 } + gl * v * v;
        let p1 = if drv { net.r_on * i1 * i1 } else { 0.0 } + gl * v1 * v1;
        e_diss += 0.5 * dt * (p0 + p1);

        v = v1;
        vs0 = vs1;
        if (n + 1) % cfg.steps_per_print == 0 {
            samples.push(Sample { t: t1, v_bus: v, v_supply: vs1, i_supply: i1, e_supply, e_dissipated: e_diss });
        }
    }

    Ok(TransientTrace { capacitance: c, v_init: net.v_init, samples })
}

/// Result of the two-cycle matchline protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoCycleRun {
    pub frequency: f64,
    pub toggle_output: bool,
    pub trace: TransientTrace,
    /// Net supply energy at the end of each of the four half-cycles.
    pub half_cycle_energies: Vec<f64>,
    /// Largest net supply energy during the first cycle.
    pub peak_charge_energy: f64,
}

impl TwoCycleRun {
    /// Net supply energy after both cycles.
    pub fn net_two_cycle(&self) -> f64 {
        self.half_cycle_energies[3]
    }
}

/// Pre-charge control level in each of the four half-cycles.
const PRECHARGE_SEQUENCE: [bool; 4] = [true, false, false, true];

/// Driver schedule for the two-cycle protocol, derived from the control
/// gate with the match signal asserted throughout.
pub fn two_cycle_schedule(toggle_output: bool, frequency: f64) -> Result<SwitchSchedule, SimError> {
    require_positive("frequency", frequency)?;
    let half = 0.5 / frequency;
    let mut intervals: Vec<SwitchInterval> = Vec::new();
    for (k, &v_pre) in PRECHARGE_SEQUENCE.iter().enumerate() {
        if !matchline_gate(true, v_pre, toggle_output) {
            continue;
        }
        let (start, end) = (k as f64 * half, (k + 1) as f64 * half);
        match intervals.last_mut() {
            Some(prev) if prev.end == start => prev.end = end,
            _ => intervals.push(SwitchInterval { start, end, driver_on: true, ground_on: false }),
        }
    }
    SwitchSchedule::new(intervals)
}

/// Run two supply cycles at `frequency` with the driver gated by the
/// stored bit. With the bit false the driver conducts throughout and the
/// bus follows the supply up and down twice. With the bit true the bus is
/// charged in the first half-cycle, held through the middle two, and
/// returns its charge in the last.
pub fn run_two_cycle_protocol(net: &BusNetwork, toggle_output: bool, frequency: f64) -> Result<TwoCycleRun, SimError> {
    let net = net.sinusoidal(frequency)?;
    let sched = two_cycle_schedule(toggle_output, frequency)?;
    let horizon = 2.0 / frequency;
    let cfg = SimConfig::for_network(&net, &sched, horizon, PROTOCOL_SAMPLES)?;
    run_protocol_on(&net, &sched, &cfg, toggle_output, frequency)
}

fn run_protocol_on(
    net: &BusNetwork,
    sched: &SwitchSchedule,
    cfg: &SimConfig,
    toggle_output: bool,
    frequency: f64,
) -> Result<TwoCycleRun, SimError> {
    let trace = simulate(net, sched, cfg)?;
    let per_half = trace.samples.len() / 4;
    let half_cycle_energies = (1..=4).map(|k| trace.samples[k * per_half].e_supply).collect();
    let peak_charge_energy =
        trace.samples[..=2 * per_half].iter().map(|s| s.e_supply).fold(f64::NEG_INFINITY, f64::max);
    Ok(TwoCycleRun { frequency, toggle_output, trace, half_cycle_energies, peak_charge_energy })
}

/// The protocol on a grid with half the default time step.
pub fn run_two_cycle_protocol_refined(
    net: &BusNetwork,
    toggle_output: bool,
    frequency: f64,
) -> Result<TwoCycleRun, SimError> {
    let net = net.sinusoidal(frequency)?;
    let sched = two_cycle_schedule(toggle_output, frequency)?;
    let cfg = SimConfig::for_network(&net, &sched, 2.0 / frequency, PROTOCOL_SAMPLES)?.refined();
    run_protocol_on(&net, &sched, &cfg, toggle_output, frequency)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPoint {
    pub frequency: f64,
    pub energy_two_cycle: f64,
    /// Worst energy-balance error of the underlying run, as a fraction of
    /// its peak supply energy.
    pub balance_error: f64,
}

pub const FREQUENCY_CSV_HEADER: &str = "f_Hz,e_two_cycle_J";

/// Net two-cycle energy at each frequency, in input order.
pub fn sweep_frequency(net: &BusNetwork, toggle_output: bool, freqs: &[f64]) -> Result<Vec<FrequencyPoint>, SimError> {
    if freqs.is_empty() {
        return Err(SimError::Sweep("no frequencies".into()));
    }
    for f in freqs {
        require_positive("frequency", *f)?;
    }
    if freqs.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::Sweep("frequencies must be sorted ascending".into()));
    }
    freqs
        .par_iter()
        .map(|&f| {
            let run = run_two_cycle_protocol(net, toggle_output, f)?;
            Ok(FrequencyPoint {
                frequency: f,
                energy_two_cycle: run.net_two_cycle(),
                balance_error: run.trace.max_balance_error(),
            })
        })
        .collect()
}

pub fn write_frequency_csv<W: Write>(points: &[FrequencyPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "{FREQUENCY_CSV_HEADER}")?;
    for p in points {
        writeln!(w, "{:e},{:e}", p.frequency, p.energy_two_cycle)?;
    }
    Ok(())
}

/// Driver on-resistance of a gate `width_um` micrometres wide.
pub fn driver_resistance_for_width(width_um: f64) -> Result<f64, SimError> {
    require_positive("width_um", width_um)?;
    Ok(DRIVER_RESISTANCE_WIDTH_PRODUCT / width_um)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthPoint {
    pub width_um: f64,
    pub r_on: f64,
    pub energy_cycle: f64,
    pub balance_error: f64,
}

pub const WIDTH_CSV_HEADER: &str = "W_um,e_cycle_J";

/// Net supply energy over one charge/discharge cycle at `frequency` for
/// each driver width.
pub fn sweep_driver_width(
    net_base: &BusNetwork,
    widths_um: &[f64],
    frequency: f64,
) -> Result<Vec<WidthPoint>, SimError> {
    if widths_um.is_empty() {
        return Err(SimError::Sweep("no widths".into()));
    }
    let base = net_base.sinusoidal(frequency)?;
    let horizon = 1.0 / frequency;
    widths_um
        .par_iter()
        .map(|&w| {
            let r_on = driver_resistance_for_width(w)?;
            let net = base.with_r_on(r_on)?;
            let sched = SwitchSchedule::driver_always_on(horizon)?;
            let cfg = SimConfig::for_network(&net, &sched, horizon, PROTOCOL_SAMPLES)?;
            let trace = simulate(&net, &sched, &cfg)?;
            Ok(WidthPoint {
                width_um: w,
                r_on,
                energy_cycle: trace.last().e_supply,
                balance_error: trace.max_balance_error(),
            })
        })
        .collect()
}

pub fn write_width_csv<W: Write>(points: &[WidthPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "{WIDTH_CSV_HEADER}")?;
    for p in points {
        writeln!(w, "{:e},{:e}", p.width_um, p.energy_cycle)?;
    }
    Ok(())
}

/// Conventional matchline run for comparison: a DC supply at the peak
/// level charges the bus from 0 V through the driver in the first half of
/// each cycle, and the discharge path dumps it to ground in the second.
pub fn run_step_baseline(net: &BusNetwork, frequency: f64) -> Result<TransientTrace, SimError> {
    require_positive("frequency", frequency)?;
    let supply = SupplyWaveform::step(0.0, net.supply.v_high())?;
    let net = net.with_supply(supply).with_v_init(0.0)?;
    let half = 0.5 / frequency;
    let intervals = (0..4)
        .map(|k| SwitchInterval {
            start: k as f64 * half,
            end: (k + 1) as f64 * half,
            driver_on: k % 2 == 0,
            ground_on: k % 2 == 1,
        })
        .collect();
    let sched = SwitchSchedule::new(intervals)?;
    let cfg = SimConfig::for_network(&net, &sched, 2.0 / frequency, PROTOCOL_SAMPLES)?;
    simulate(&net, &sched, &cfg)
}

/// Conventional versus charge-recovering dissipation over two cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub frequency: f64,
    pub baseline_energy: f64,
    pub recovery_energy: f64,
    pub ratio: f64,
}

/// Ratio of conventional two-cycle dissipation to the net two-cycle energy
/// of the charge-recovery protocol with the stored bit false, the case in
/// which the bus cycles both times.
pub fn improvement_ratio(net: &BusNetwork, frequency: f64) -> Result<Improvement, SimError> {
    let baseline_energy = run_step_baseline(net, frequency)?.last().e_dissipated;
    let recovery_energy = run_two_cycle_protocol(net, false, frequency)?.net_two_cycle();
    Ok(Improvement { frequency, baseline_energy, recovery_energy, ratio: baseline_energy / recovery_energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn step_net(r: f64) -> BusNetwork {
        BusNetwork::new(1e-12, r, SupplyWaveform::step(0.0, 1.0).unwrap()).unwrap().with_v_init(0.0).unwrap()
    }

    #[test]
    fn schedule_validation() {
        let iv = |s: f64, e: f64| SwitchInterval { start: s, end: e, driver_on: true, ground_on: false };
        assert!(SwitchSchedule::new(vec![iv(0.0, 1.0), iv(1.0, 2.0)]).is_ok());
        assert!(SwitchSchedule::new(vec![iv(0.0, 1.0), iv(0.5, 2.0)]).is_err());
        assert!(SwitchSchedule::new(vec![iv(1.0, 1.0)]).is_err());
        assert!(SwitchSchedule::new(vec![iv(-1.0, 1.0)]).is_err());
        let s = SwitchSchedule::new(vec![iv(1.0, 2.0)]).unwrap();
        assert_eq!(s.state_at(0.5), (false, false));
        assert_eq!(s.state_at(1.5), (true, false));
        assert_eq!(s.state_at(2.0), (false, false));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(1e-12, 100e-9, 1e-9).is_ok());
        assert!(SimConfig::new(2e-9, 100e-9, 1e-9).is_err());
        assert!(SimConfig::new(1e-12, 100e-9, 2e-9).is_err());
        assert!(SimConfig::new(0.3e-12, 100e-9, 1e-9).is_err());
        assert!(SimConfig::new(0.0, 100e-9, 1e-9).is_err());
    }

    #[test]
    fn rejects_coarse_step_and_late_schedule() {
        let net = step_net(5e3);
        let sched = SwitchSchedule::driver_always_on(100e-9).unwrap();
        let coarse = SimConfig::new(1e-9, 100e-9, 1e-9).unwrap();
        assert!(matches!(simulate(&net, &sched, &coarse), Err(SimError::StepTooLarge { .. })));
        let late = SwitchSchedule::driver_always_on(200e-9).unwrap();
        let cfg = SimConfig::new(10e-12, 100e-9, 1e-9).unwrap();
        assert!(matches!(simulate(&net, &late, &cfg), Err(SimError::Schedule(_))));
    }

    #[test]
    fn isolated_bus_holds() {
        let net = BusNetwork::reference();
        let sched = SwitchSchedule::default();
        let cfg = SimConfig::new(1e-10, 1e-6, 1e-8).unwrap();
        let tr = simulate(&net, &sched, &cfg).unwrap();
        assert!(tr.samples().iter().all(|s| s.v_bus == 0.5 && s.e_supply == 0.0 && s.e_dissipated == 0.0));
    }

    #[test]
    fn outside_trace_is_an_error() {
        let net = step_net(5e3);
        let sched = SwitchSchedule::driver_always_on(50e-9).unwrap();
        let cfg = SimConfig::for_network(&net, &sched, 50e-9, 100).unwrap();
        let tr = simulate(&net, &sched, &cfg).unwrap();
        assert_eq!(tr.energy_from_supply(0.0).unwrap(), 0.0);
        assert!(matches!(energy_from_supply(&tr, 60e-9), Err(SimError::OutsideTrace { .. })));
        assert!(dissipated_energy(&tr, -1e-9).is_err());
    }

    #[test]
    fn protocol_schedules_follow_gate() {
        let f = 10e6;
        let falsy = two_cycle_schedule(false, f).unwrap();
        assert_eq!(falsy.intervals().len(), 1);
        assert_relative_eq!(falsy.end(), 200e-9, max_relative = 1e-12);
        let truthy = two_cycle_schedule(true, f).unwrap();
        assert_eq!(truthy.intervals().len(), 2);
        assert_eq!(truthy.state_at(75e-9), (false, false));
        assert_eq!(truthy.state_at(175e-9), (true, false));
    }

    #[test]
    fn width_law() {
        assert_relative_eq!(driver_resistance_for_width(2.5).unwrap(), 5e3, max_relative = 1e-12);
        assert!(driver_resistance_for_width(0.0).is_err());
        assert!(sweep_driver_width(&BusNetwork::reference(), &[1.0, -1.0], 10e6).is_err());
    }

    #[test]
    fn sweep_rejects_unsorted() {
        assert!(sweep_frequency(&BusNetwork::reference(), false, &[2e6, 1e6]).is_err());
        assert!(sweep_frequency(&BusNetwork::reference(), false, &[]).is_err());
        assert!(sweep_frequency(&BusNetwork::reference(), false, &[0.0]).is_err());
    }

    #[test]
    fn csv_header_and_format() {
        let pts = [FrequencyPoint { frequency: 1e6, energy_two_cycle: 1.25e-14, balance_error: 0.0 }];
        let mut buf = Vec::new();
        write_frequency_csv(&pts, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "f_Hz,e_two_cycle_J\n1e6,1.25e-14\n");
    }
}
