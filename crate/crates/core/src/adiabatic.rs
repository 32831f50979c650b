//! Closed-form energy model of a capacitive load charged through a series
//! resistance.
//!
//! Everything here is in SI units (seconds, farads, ohms, volts, joules).
//! These functions double as oracles for the transient engine: a slow ramp
//! should dissipate what [`ramp_resistor_energy`] predicts, and a step should
//! split energy as [`step_charge_energies`] says.

use std::f64::consts::PI;

use crate::error::ModelError;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NotFinite { name, value });
    }
    if value <= 0.0 {
        return Err(ModelError::NonPositive { name, value });
    }
    Ok(value)
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NotFinite { name, value });
    }
    if value < 0.0 {
        return Err(ModelError::Negative { name, value });
    }
    Ok(value)
}

/// Shape of a supply waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupplyKind {
    /// Jumps from `v_low` to `v_high` at t = 0.
    Step,
    /// Linear rise from `v_low` to `v_high` over `rise_time`, then flat.
    Ramp { rise_time: f64 },
    /// Negated cosine between the two levels: `v_low` at t = 0, `v_high` at
    /// half a period, periodic with period `1 / frequency`.
    HalfSinusoid { frequency: f64 },
}

impl SupplyKind {
    pub fn name(&self) -> &'static str {
        match self {
            SupplyKind::Step => "step",
            SupplyKind::Ramp { .. } => "ramp",
            SupplyKind::HalfSinusoid { .. } => "sinusoid",
        }
    }
}

/// A supply voltage as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplyWaveform {
    kind: SupplyKind,
    v_low: f64,
    v_high: f64,
}

impl SupplyWaveform {
    fn levels(v_low: f64, v_high: f64) -> Result<(), ModelError> {
        require_non_negative("v_low", v_low)?;
        if !v_high.is_finite() || v_high <= v_low {
            return Err(ModelError::SupplyLevels { v_low, v_high });
        }
        Ok(())
    }

    pub fn step(v_low: f64, v_high: f64) -> Result<Self, ModelError> {
        Self::levels(v_low, v_high)?;
        Ok(Self { kind: SupplyKind::Step, v_low, v_high })
    }

    pub fn ramp(v_low: f64, v_high: f64, rise_time: f64) -> Result<Self, ModelError> {
        Self::levels(v_low, v_high)?;
        require_positive("rise_time", rise_time)?;
        Ok(Self { kind: SupplyKind::Ramp { rise_time }, v_low, v_high })
    }

    pub fn half_sinusoid(v_low: f64, v_high: f64, frequency: f64) -> Result<Self, ModelError> {
        Self::levels(v_low, v_high)?;
        require_positive("frequency", frequency)?;
        Ok(Self { kind: SupplyKind::HalfSinusoid { frequency }, v_low, v_high })
    }

    pub fn kind(&self) -> SupplyKind {
        self.kind
    }

    pub fn v_low(&self) -> f64 {
        self.v_low
    }

    pub fn v_high(&self) -> f64 {
        self.v_high
    }

    /// Oscillation frequency, if the waveform is periodic.
    pub fn frequency(&self) -> Option<f64> {
        match self.kind {
            SupplyKind::HalfSinusoid { frequency } => Some(frequency),
            _ => None,
        }
    }

    /// Duration of one monotone edge: the rise time of a ramp or half the
    /// period of a sinusoid. A step has none.
    pub fn edge_time(&self) -> Option<f64> {
        match self.kind {
            SupplyKind::Step => None,
            SupplyKind::Ramp { rise_time } => Some(rise_time),
            SupplyKind::HalfSinusoid { frequency } => Some(0.5 / frequency),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            SupplyKind::Step => {
                if t < 0.0 {
                    self.v_low
                } else {
                    self.v_high
                }
            }
            SupplyKind::Ramp { rise_time } => {
                let x = (t / rise_time).clamp(0.0, 1.0);
                self.v_low + (self.v_high - self.v_low) * x
            }
            SupplyKind::HalfSinusoid { frequency } => {
                let mid = 0.5 * (self.v_high + self.v_low);
                let amp = 0.5 * (self.v_high - self.v_low);
                // cos can overshoot +-1 by an ulp; keep the result in range.
                (mid - amp * (2.0 * PI * frequency * t).cos()).clamp(self.v_low, self.v_high)
            }
        }
    }
}

/// Supply voltage of `w` at time `t`.
pub fn eval_supply(w: &SupplyWaveform, t: f64) -> f64 {
    w.eval(t)
}

/// Lumped RC load: series resistance, load capacitance, optional stray
/// leakage to ground, and the voltage swing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedParams {
    pub resistance: f64,
    pub capacitance: f64,
    /// `None` is an ideal open circuit.
    pub stray_resistance: Option<f64>,
    pub swing: f64,
}

impl LumpedParams {
    pub fn new(
        resistance: f64,
        capacitance: f64,
        stray_resistance: Option<f64>,
        swing: f64,
    ) -> Result<Self, ModelError> {
        require_non_negative("resistance", resistance)?;
        require_positive("capacitance", capacitance)?;
        if let Some(r) = stray_resistance {
            require_positive("stray_resistance", r)?;
        }
        require_non_negative("swing", swing)?;
        Ok(Self { resistance, capacitance, stray_resistance, swing })
    }

    pub fn time_constant(&self) -> f64 {
        self.resistance * self.capacitance
    }
}

/// Charging current `C·V/T` when the capacitor tracks a slow ramp.
pub fn ramp_charging_current(p: &LumpedParams, rise_time: f64) -> Result<f64, ModelError> {
    require_positive("rise_time", rise_time)?;
    Ok(p.capacitance * p.swing / rise_time)
}

/// Power `i²R = (RC/T²)·C·V²` lost in the series resistance during a slow ramp.
pub fn ramp_resistor_power(p: &LumpedParams, rise_time: f64) -> Result<f64, ModelError> {
    let i = ramp_charging_current(p, rise_time)?;
    Ok(i * i * p.resistance)
}

/// Energy `(RC/T)·C·V²` lost in the series resistance over a slow ramp.
pub fn ramp_resistor_energy(p: &LumpedParams, rise_time: f64) -> Result<f64, ModelError> {
    Ok(ramp_resistor_power(p, rise_time)? * rise_time)
}

/// Change of stored energy `½C(v1² − v0²)`; negative on discharge.
pub fn capacitor_energy_delta(capacitance: f64, v0: f64, v1: f64) -> f64 {
    0.5 * capacitance * (v1 * v1 - v0 * v0)
}

/// Energy split when a capacitor is charged from 0 by an ideal voltage step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChargeEnergies {
    pub from_supply: f64,
    pub in_capacitor: f64,
    pub in_resistor: f64,
}

/// Step charging to `swing`: the supply delivers `C·V²`, half of it stays on
/// the capacitor and half is burned in the resistance regardless of R.
pub fn step_charge_energies(capacitance: f64, swing: f64) -> StepChargeEnergies {
    let stored = 0.5 * capacitance * swing * swing;
    StepChargeEnergies { from_supply: 2.0 * stored, in_capacitor: stored, in_resistor: stored }
}

/// Square-wave clocked dynamic power `f·C·V²`.
pub fn conventional_dynamic_power(frequency: f64, capacitance: f64, v_dd: f64) -> f64 {
    frequency * capacitance * v_dd * v_dd
}

/// Two-cycle energy lost in the series resistance of a bus driven at
/// `frequency`: `E = 2·f·R·C²·V²`, linear in f.
pub fn predicted_recovery_energy(frequency: f64, r_series: f64, capacitance: f64, swing: f64) -> f64 {
    2.0 * frequency * r_series * capacitance * capacitance * swing * swing
}

/// Base-10 logarithm of [`predicted_recovery_energy`], written as the sum
/// `log f + log(2·R·C²·V²)`.
pub fn predicted_recovery_energy_log10(
    frequency: f64,
    r_series: f64,
    capacitance: f64,
    swing: f64,
) -> Result<f64, ModelError> {
    require_positive("frequency", frequency)?;
    require_positive("r_series", r_series)?;
    require_positive("capacitance", capacitance)?;
    require_positive("swing", swing)?;
    Ok(frequency.log10() + (2.0 * r_series * capacitance * capacitance * swing * swing).log10())
}

/// Series resistance that makes [`predicted_recovery_energy`] reproduce a
/// measured two-cycle energy.
pub fn fit_series_resistance(
    frequency: f64,
    energy_two_cycle: f64,
    capacitance: f64,
    swing: f64,
) -> Result<f64, ModelError> {
    require_non_negative("energy_two_cycle", energy_two_cycle)?;
    let denom = 2.0 * frequency * capacitance * capacitance * swing * swing;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(ModelError::NonPositive { name: "2·f·C²·V²", value: denom });
    }
    Ok(energy_two_cycle / denom)
}

/// Slope of the straight line through two (frequency, energy) points on
/// log-log axes.
pub fn loglog_slope(a: (f64, f64), b: (f64, f64)) -> Result<f64, ModelError> {
    require_positive("frequency", a.0)?;
    require_positive("frequency", b.0)?;
    require_positive("energy", a.1)?;
    require_positive("energy", b.1)?;
    if a.0 == b.0 {
        return Err(ModelError::EqualFrequencies(a.0));
    }
    Ok((b.1.log10() - a.1.log10()) / (b.0.log10() - a.0.log10()))
}
