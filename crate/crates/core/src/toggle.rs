//! Behavioral model of a single conditional-toggle cell and the gate that
//! controls the matchline driver.
//!
//! The analog trigger network is reduced to three observable facts: it only
//! fires while the matchline sits above a fixed fraction of V_DD, the trigger
//! pulse must fall inside a width window, and each trigger pulse pulls the
//! matchline down a little.

use crate::adiabatic::{predicted_recovery_energy, require_positive};
use crate::error::ModelError;

/// Comparator resolution as a fraction of V_DD. A bus has to be above the
/// threshold by more than this to fire, so rounding noise on a bus sitting
/// exactly at threshold never triggers.
const COMPARATOR_RESOLUTION: f64 = 1e-9;

/// Flip-flop output V11. The complementary node is implied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CellState {
    pub bit: bool,
}

impl CellState {
    pub fn new(bit: bool) -> Self {
        Self { bit }
    }
}

/// Matchline voltage and load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusState {
    voltage: f64,
    capacitance: f64,
    v_dd: f64,
}

impl BusState {
    pub fn new(voltage: f64, capacitance: f64, v_dd: f64) -> Result<Self, ModelError> {
        require_positive("capacitance", capacitance)?;
        require_positive("v_dd", v_dd)?;
        if !(0.0..=v_dd).contains(&voltage) {
            return Err(ModelError::SupplyLevels { v_low: voltage, v_high: v_dd });
        }
        Ok(Self { voltage, capacitance, v_dd })
    }

    /// Bus precharged to half the supply.
    pub fn precharged(capacitance: f64, v_dd: f64) -> Result<Self, ModelError> {
        Self::new(0.5 * v_dd, capacitance, v_dd)
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn v_dd(&self) -> f64 {
        self.v_dd
    }

    pub fn with_voltage(self, voltage: f64) -> Self {
        Self { voltage: voltage.clamp(0.0, self.v_dd), ..self }
    }

    pub fn stored_energy(&self) -> f64 {
        0.5 * self.capacitance * self.voltage * self.voltage
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerParams {
    pub threshold_fraction: f64,
    pub min_pulse: f64,
    pub max_pulse: f64,
    /// Bus voltage lost per trigger pulse. Not characterized numerically;
    /// the default is a placeholder that needs calibration.
    pub droop_per_toggle: f64,
}

impl Default for TriggerParams {
    fn default() -> Self {
        Self { threshold_fraction: 0.70, min_pulse: 2e-9, max_pulse: 20e-9, droop_per_toggle: 0.05 }
    }
}

impl TriggerParams {
    pub fn new(
        threshold_fraction: f64,
        min_pulse: f64,
        max_pulse: f64,
        droop_per_toggle: f64,
    ) -> Result<Self, ModelError> {
        if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
            return Err(ModelError::NonPositive { name: "threshold_fraction in (0, 1)", value: threshold_fraction });
        }
        require_positive("min_pulse", min_pulse)?;
        require_positive("max_pulse", max_pulse)?;
        if max_pulse <= min_pulse {
            return Err(ModelError::NonPositive { name: "max_pulse - min_pulse", value: max_pulse - min_pulse });
        }
        crate::adiabatic::require_non_negative("droop_per_toggle", droop_per_toggle)?;
        Ok(Self { threshold_fraction, min_pulse, max_pulse, droop_per_toggle })
    }

    pub fn threshold_voltage(&self, v_dd: f64) -> f64 {
        self.threshold_fraction * v_dd
    }
}

/// Broadcast control lines. `true` means asserted; the physical pulses are
/// active low.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ControlState {
    pub v_fm: bool,
    pub v_pre: bool,
    pub v_to: bool,
}

impl ControlState {
    pub fn driver_conducts(&self, v11: bool) -> bool {
        matchline_gate(self.v_fm, self.v_pre, v11)
    }
}

/// Gate level of the P-channel driver: `G = ¬FM + ¬PRE·V11`.
pub fn driver_gate_level(v_fm: bool, v_pre: bool, v11: bool) -> bool {
    !v_fm || (!v_pre && v11)
}

/// Whether the matchline driver conducts. It is a P-switch, so it conducts
/// while its gate is low.
pub fn matchline_gate(v_fm: bool, v_pre: bool, v11: bool) -> bool {
    !driver_gate_level(v_fm, v_pre, v11)
}

/// How a failed bit test disposes of the matchline charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestMode {
    /// Discharged to ground; all stored energy is lost.
    Irreversible,
    /// Returned to the sinusoidal supply down to half V_DD.
    Recovery { frequency: f64, r_series: f64 },
}

impl TestMode {
    /// Recovery at 10 MHz through 5 kΩ.
    pub fn default_recovery() -> Self {
        TestMode::Recovery { frequency: 10e6, r_series: 5e3 }
    }
}

/// Test one cell against the matchline. A stored `true` leaves the bus
/// alone; a stored `false` empties it according to `mode`. Returns the new
/// bus and the energy lost.
pub fn bit_test(cell: CellState, bus: BusState, mode: TestMode) -> (BusState, f64) {
    if cell.bit {
        return (bus, 0.0);
    }
    match mode {
        TestMode::Irreversible => (bus.with_voltage(0.0), bus.stored_energy()),
        TestMode::Recovery { frequency, r_series } => {
            let lost = predicted_recovery_energy(frequency, r_series, bus.capacitance, bus.v_dd);
            (bus.with_voltage(0.5 * bus.v_dd), lost)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToggleOutcome {
    Toggled,
    BusBelowThreshold,
    PulseTooShort,
    PulseTooLong,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToggleResult {
    pub cell: CellState,
    pub bus: BusState,
    pub outcome: ToggleOutcome,
}

impl ToggleResult {
    pub fn toggled(&self) -> bool {
        self.outcome == ToggleOutcome::Toggled
    }
}

/// Apply one trigger pulse of `pulse_width` seconds.
pub fn conditional_toggle(cell: CellState, bus: BusState, pulse_width: f64, p: &TriggerParams) -> ToggleResult {
    let outcome = if pulse_width.is_nan() || pulse_width < p.min_pulse {
        ToggleOutcome::PulseTooShort
    } else if pulse_width > p.max_pulse {
        ToggleOutcome::PulseTooLong
    } else if bus.voltage - p.threshold_voltage(bus.v_dd) <= COMPARATOR_RESOLUTION * bus.v_dd {
        ToggleOutcome::BusBelowThreshold
    } else {
        ToggleOutcome::Toggled
    };
    if outcome != ToggleOutcome::Toggled {
        return ToggleResult { cell, bus, outcome };
    }
    ToggleResult { cell: CellState::new(!cell.bit), bus: bus.with_voltage(bus.voltage - p.droop_per_toggle), outcome }
}

/// Keep pulsing a cell until a pulse fails to toggle it or `max_pulses`
/// have been applied. Every attempt is recorded, including the failing one.
pub fn toggle_until_exhausted(
    mut cell: CellState,
    mut bus: BusState,
    pulse_width: f64,
    p: &TriggerParams,
    max_pulses: usize,
) -> Vec<ToggleResult> {
    let mut steps = Vec::new();
    for _ in 0..max_pulses {
        let r = conditional_toggle(cell, bus, pulse_width, p);
        steps.push(r);
        if !r.toggled() {
            break;
        }
        cell = r.cell;
        bus = r.bus;
    }
    steps
}

/// Resistance–width product of the trigger network and whether it clears
/// the minimum of 4 (kΩ·µm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerMargin {
    pub product: f64,
    pub ok: bool,
}

pub const MIN_TRIGGER_PRODUCT: f64 = 4.0;

pub fn trigger_margin(r_kohm: f64, w_um: f64) -> Result<TriggerMargin, ModelError> {
    require_positive("r_kohm", r_kohm)?;
    require_positive("w_um", w_um)?;
    let product = r_kohm * w_um;
    Ok(TriggerMargin { product, ok: product > MIN_TRIGGER_PRODUCT })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bus_at(v: f64) -> BusState {
        BusState::new(v, 1e-12, 1.0).unwrap()
    }

    #[test]
    fn gate_truth_table() {
        // Enumerate G = ¬FM + ¬PRE·V11 row by row; the switch conducts when G is low.
        let rows = [
            (false, false, false, false),
            (false, false, true, false),
            (false, true, false, false),
            (false, true, true, false),
            (true, false, false, true),
            (true, false, true, false),
            (true, true, false, true),
            (true, true, true, true),
        ];
        for (fm, pre, v11, conducts) in rows {
            assert_eq!(matchline_gate(fm, pre, v11), conducts, "fm={fm} pre={pre} v11={v11}");
            assert_eq!(driver_gate_level(fm, pre, v11), !conducts);
        }
        let cs = ControlState { v_fm: true, v_pre: false, v_to: false };
        assert!(!cs.driver_conducts(true));
        assert!(cs.driver_conducts(false));
    }

    #[test]
    fn bit_test_paths() {
        let full = bus_at(1.0);
        for mode in [TestMode::Irreversible, TestMode::default_recovery()] {
            let (b, e) = bit_test(CellState::new(true), full, mode);
            assert_eq!(b, full);
            assert_eq!(e, 0.0);
        }
        let (b, e) = bit_test(CellState::new(false), full, TestMode::Irreversible);
        assert_eq!(b.voltage(), 0.0);
        assert_relative_eq!(e, 0.5e-12);
        let (b, e) = bit_test(CellState::new(false), full, TestMode::default_recovery());
        assert_relative_eq!(b.voltage(), 0.5);
        assert_relative_eq!(e, 100e-15, max_relative = 1e-12);
    }

    #[test]
    fn toggle_examples() {
        let p = TriggerParams::default();
        let r = conditional_toggle(CellState::new(false), bus_at(0.71), 5e-9, &p);
        assert!(r.toggled());
        assert!(r.cell.bit);
        assert_relative_eq!(r.bus.voltage(), 0.66, epsilon = 1e-12);

        let r = conditional_toggle(CellState::new(false), bus_at(0.65), 5e-9, &p);
        assert_eq!(r.outcome, ToggleOutcome::BusBelowThreshold);
        assert!(!r.cell.bit);

        let r = conditional_toggle(CellState::new(true), bus_at(1.0), 1e-9, &p);
        assert_eq!(r.outcome, ToggleOutcome::PulseTooShort);
        let r = conditional_toggle(CellState::new(true), bus_at(1.0), 25e-9, &p);
        assert_eq!(r.outcome, ToggleOutcome::PulseTooLong);
        let r = conditional_toggle(CellState::new(true), bus_at(1.0), 0.0, &p);
        assert_eq!(r.outcome, ToggleOutcome::PulseTooShort);
        assert_eq!(r.bus.voltage(), 1.0);
    }

    #[test]
    fn bus_exactly_at_threshold_does_not_fire() {
        let p = TriggerParams::default();
        let r = conditional_toggle(CellState::new(false), bus_at(0.7), 5e-9, &p);
        assert_eq!(r.outcome, ToggleOutcome::BusBelowThreshold);
    }

    #[test]
    fn droop_exhausts_after_six() {
        let steps = toggle_until_exhausted(CellState::new(false), bus_at(1.0), 5e-9, &TriggerParams::default(), 100);
        let toggles = steps.iter().filter(|s| s.toggled()).count();
        assert_eq!(toggles, 6);
        assert_eq!(steps.last().unwrap().outcome, ToggleOutcome::BusBelowThreshold);
        for (k, s) in steps.iter().filter(|s| s.toggled()).enumerate() {
            assert_relative_eq!(s.bus.voltage(), 1.0 - (k + 1) as f64 * 0.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn droop_floors_at_zero() {
        let p = TriggerParams { threshold_fraction: 0.1, droop_per_toggle: 0.5, ..TriggerParams::default() };
        let r = conditional_toggle(CellState::new(false), bus_at(0.3), 5e-9, &p);
        assert!(r.toggled());
        assert_eq!(r.bus.voltage(), 0.0);
    }

    #[test]
    fn margin_rule() {
        assert_eq!(trigger_margin(12.0, 1.0).unwrap(), TriggerMargin { product: 12.0, ok: true });
        assert_eq!(trigger_margin(4.0, 1.0).unwrap(), TriggerMargin { product: 4.0, ok: false });
        assert!(trigger_margin(8.0, 1.0).unwrap().ok);
        assert!(trigger_margin(0.0, 1.0).is_err());
        assert!(trigger_margin(1.0, -2.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(TriggerParams::new(1.0, 2e-9, 20e-9, 0.05).is_err());
        assert!(TriggerParams::new(0.7, 20e-9, 2e-9, 0.05).is_err());
        assert!(TriggerParams::new(0.7, 2e-9, 20e-9, -0.05).is_err());
        assert!(TriggerParams::new(0.7, 2e-9, 20e-9, 0.05).is_ok());
        assert!(BusState::new(1.2, 1e-12, 1.0).is_err());
    }

    #[test]
    fn below_threshold_on_millivolt_grid_never_toggles() {
        let p = TriggerParams::default();
        for mv in 0..700 {
            for bit in [false, true] {
                let r = conditional_toggle(CellState::new(bit), bus_at(mv as f64 * 1e-3), 5e-9, &p);
                assert_eq!(r.cell.bit, bit, "{mv} mV");
            }
        }
    }

    proptest! {
        #[test]
        fn double_toggle_is_identity(bit: bool, v in 0.701f64..=1.0, w in 2e-9f64..=20e-9) {
            let p = TriggerParams { droop_per_toggle: 0.0, ..TriggerParams::default() };
            let once = conditional_toggle(CellState::new(bit), bus_at(v), w, &p);
            let twice = conditional_toggle(once.cell, once.bus, w, &p);
            prop_assert!(once.toggled() && twice.toggled());
            prop_assert_eq!(twice.cell.bit, bit);
        }

        #[test]
        fn droop_sequence(d in 0.01f64..0.2) {
            let p = TriggerParams { droop_per_toggle: d, ..TriggerParams::default() };
            let steps = toggle_until_exhausted(CellState::new(false), bus_at(1.0), 5e-9, &p, 1000);
            let mut v = 1.0;
            for s in &steps {
                if s.toggled() {
                    prop_assert!(v > 0.7);
                    v -= d;
                    prop_assert!((s.bus.voltage() - v.max(0.0)).abs() < 1e-9);
                } else {
                    prop_assert!(s.bus.voltage() <= 0.7 + 1e-9);
                }
            }
        }
    }
}
