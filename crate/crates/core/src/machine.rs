//! Word-parallel toggle memory.
//!
//! Every word sees the same broadcast instruction. A word matches when all
//! of its tested bits are true (its matchline stays charged, a wired AND),
//! and a matching word complements every bit of the toggle set. Instructions
//! whose toggle set does not touch their test set are their own inverse,
//! so a program built only from them is undone by running it backwards.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::adiabatic::require_positive;
use crate::error::{MachineError, ModelError};
use crate::toggle::BusState;
use crate::transient::{run_two_cycle_protocol, BusNetwork};

const LIMB: usize = 64;

/// Words at or above this count are processed on the rayon pool.
const PARALLEL_WORDS: usize = 4096;

fn limbs_for(width: usize) -> usize {
    width.div_ceil(LIMB)
}

/// One memory word: its bits and its matchline.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    width: usize,
    limbs: Vec<u64>,
    bus: BusState,
}

impl Word {
    pub fn new(width: usize, bus: BusState) -> Self {
        Self { width, limbs: vec![0; limbs_for(width)], bus }
    }

    pub fn from_bits(bits: &[bool], bus: BusState) -> Self {
        let mut w = Self::new(bits.len(), bus);
        for (i, &b) in bits.iter().enumerate() {
            w.set(i, b);
        }
        w
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bus(&self) -> &BusState {
        &self.bus
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.width, "bit {index} out of range for width {}", self.width);
        self.limbs[index / LIMB] >> (index % LIMB) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.width, "bit {index} out of range for width {}", self.width);
        let mask = 1u64 << (index % LIMB);
        if value {
            self.limbs[index / LIMB] |= mask;
        } else {
            self.limbs[index / LIMB] &= !mask;
        }
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.width).map(|i| self.get(i)).collect()
    }

    /// Same bit pattern, regardless of bus state.
    pub fn same_bits(&self, other: &Word) -> bool {
        self.width == other.width && self.limbs == other.limbs
    }

    fn matches(&self, test: &[u64]) -> bool {
        self.limbs.iter().zip(test).all(|(w, t)| w & t == *t)
    }

    fn toggle(&mut self, mask: &[u64]) {
        for (w, m) in self.limbs.iter_mut().zip(mask) {
            *w ^= m;
        }
    }
}

impl fmt::Display for Word {
    /// Most significant index first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A bank of equal-width words.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    width: usize,
    words: Vec<Word>,
}

impl Machine {
    /// `count` all-zero words of `width` bits with 1 pF matchlines
    /// precharged to half of a 1 V supply.
    pub fn zeroed(width: usize, count: usize) -> Self {
        let bus = default_bus();
        Self { width, words: vec![Word::new(width, bus); count] }
    }

    pub fn from_words(width: usize, words: Vec<Word>) -> Result<Self, MachineError> {
        if let Some(w) = words.iter().find(|w| w.width != width) {
            return Err(MachineError::WidthMismatch { expected: width, found: w.width });
        }
        Ok(Self { width, words })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [Word] {
        &mut self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Bit-exact comparison of two machines, ignoring bus voltages.
    pub fn same_bits(&self, other: &Machine) -> bool {
        self.width == other.width
            && self.words.len() == other.words.len()
            && self.words.iter().zip(&other.words).all(|(a, b)| a.same_bits(b))
    }

    /// Append the words of `other`.
    pub fn concat(mut self, other: Machine) -> Result<Self, MachineError> {
        if other.width != self.width {
            return Err(MachineError::WidthMismatch { expected: self.width, found: other.width });
        }
        self.words.extend(other.words);
        Ok(self)
    }

    /// Snapshot text: one word per line, `0`/`1`, most significant first.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.words.len() * (self.width + 1));
        for w in &self.words {
            s.push_str(&w.to_string());
            s.push('\n');
        }
        s
    }

    /// Parse a snapshot. Blank lines are skipped; every other line must be
    /// a string of `0`/`1` of the same length.
    pub fn from_text(text: &str) -> Result<Self, MachineError> {
        let bus = default_bus();
        let mut width = None;
        let mut words = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let w = *width.get_or_insert(line.len());
            if line.len() != w {
                return Err(MachineError::Parse {
                    line: n + 1,
                    message: format!("word has {} bits, expected {w}", line.len()),
                });
            }
            let mut word = Word::new(w, bus);
            for (pos, ch) in line.chars().enumerate() {
                let bit = match ch {
                    '0' => false,
                    '1' => true,
                    other => {
                        return Err(MachineError::Parse {
                            line: n + 1,
                            message: format!("unexpected character {other:?}"),
                        })
                    }
                };
                word.set(w - 1 - pos, bit);
            }
            words.push(word);
        }
        Ok(Self { width: width.unwrap_or(0), words })
    }
}

fn default_bus() -> BusState {
    BusState::precharged(1e-12, 1.0).expect("valid default bus")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reversibility {
    Reversible,
    Irreversible,
}

impl Reversibility {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reversibility::Reversible => "reversible",
            Reversibility::Irreversible => "irreversible",
        }
    }
}

impl fmt::Display for Reversibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// "If every bit of `test` is true, complement every bit of `toggle`."
/// An empty test set toggles unconditionally.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    test: BTreeSet<usize>,
    toggle: BTreeSet<usize>,
}

impl Instruction {
    pub fn new(
        test: impl IntoIterator<Item = usize>,
        toggle: impl IntoIterator<Item = usize>,
    ) -> Result<Self, MachineError> {
        let toggle: BTreeSet<usize> = toggle.into_iter().collect();
        if toggle.is_empty() {
            return Err(MachineError::EmptyToggleSet);
        }
        Ok(Self { test: test.into_iter().collect(), toggle })
    }

    pub fn test_set(&self) -> &BTreeSet<usize> {
        &self.test
    }

    pub fn toggle_set(&self) -> &BTreeSet<usize> {
        &self.toggle
    }

    pub fn reversibility(&self) -> Reversibility {
        if self.test.is_disjoint(&self.toggle) {
            Reversibility::Reversible
        } else {
            Reversibility::Irreversible
        }
    }

    pub fn validate(&self, width: usize) -> Result<(), MachineError> {
        match self.test.iter().chain(&self.toggle).find(|&&i| i >= width) {
            Some(&index) => Err(MachineError::IndexOutOfRange { index, width }),
            None => Ok(()),
        }
    }

    fn masks(&self, width: usize) -> (Vec<u64>, Vec<u64>) {
        let build = |set: &BTreeSet<usize>| {
            let mut m = vec![0u64; limbs_for(width)];
            for &i in set {
                m[i / LIMB] |= 1 << (i % LIMB);
            }
            m
        };
        (build(&self.test), build(&self.toggle))
    }
}

fn write_index_list(f: &mut fmt::Formatter<'_>, set: &BTreeSet<usize>) -> fmt::Result {
    for (k, i) in set.iter().enumerate() {
        if k > 0 {
            f.write_str(",")?;
        }
        write!(f, "{i}")?;
    }
    Ok(())
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("test=")?;
        write_index_list(f, &self.test)?;
        f.write_str(" toggle=")?;
        write_index_list(f, &self.toggle)
    }
}

fn parse_index_list(s: &str) -> Result<BTreeSet<usize>, String> {
    let mut out = BTreeSet::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let bad = |_| format!("bad index {item:?}");
        match item.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
                if b < a {
                    return Err(format!("empty range {item:?}"));
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(item.parse().map_err(bad)?);
            }
        }
    }
    Ok(out)
}

impl FromStr for Instruction {
    type Err = String;

    /// `test=<list> toggle=<list>`, lists comma separated; `a-b` is an
    /// inclusive range.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut test = None;
        let mut toggle = None;
        for field in s.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| format!("expected key=value, got {field:?}"))?;
            let slot = match key {
                "test" => &mut test,
                "toggle" => &mut toggle,
                other => return Err(format!("unknown field {other:?}")),
            };
            if slot.is_some() {
                return Err(format!("duplicate field {key:?}"));
            }
            *slot = Some(parse_index_list(value)?);
        }
        let test = test.ok_or("missing test=")?;
        let toggle = toggle.ok_or("missing toggle=")?;
        Instruction::new(test, toggle).map_err(|e| e.to_string())
    }
}

/// Parse a program, one instruction per line. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_program(text: &str) -> Result<Vec<Instruction>, MachineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .map(|(n, l)| l.trim().parse().map_err(|message| MachineError::Parse { line: n + 1, message }))
        .collect()
}

pub fn format_program(prog: &[Instruction]) -> String {
    prog.iter().map(|i| format!("{i}\n")).collect()
}

pub fn classify_instruction(i: &Instruction, width: usize) -> Result<Reversibility, MachineError> {
    i.validate(width)?;
    Ok(i.reversibility())
}

/// Where the per-word energy constants come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergySource {
    Analytic,
    Calibrated,
}

/// What happens to the matchline of a word that fails its test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusMode {
    /// Charge goes back to the sinusoidal supply.
    Recovery,
    /// Charge is dumped to ground.
    Irreversible,
}

/// Per-word energy charged for one instruction. The two-cycle constants
/// are the net matchline energy of a word whose bus is held (matched) or
/// cycled back (unmatched).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModelParams {
    pub source: EnergySource,
    pub bus_mode: BusMode,
    pub frequency: f64,
    pub e_hold_two_cycle: f64,
    pub e_cycle_two_cycle: f64,
    pub e_irreversible: f64,
}

impl Default for EnergyModelParams {
    fn default() -> Self {
        Self {
            source: EnergySource::Analytic,
            bus_mode: BusMode::Recovery,
            frequency: 10e6,
            e_hold_two_cycle: 43e-15,
            e_cycle_two_cycle: 77e-15,
            e_irreversible: 500e-15,
        }
    }
}

impl EnergyModelParams {
    /// Constants measured with the transient engine on `net` at `frequency`.
    /// The irreversible cost is the full stored energy at the supply peak.
    pub fn calibrated(net: &BusNetwork, frequency: f64, bus_mode: BusMode) -> Result<Self, MachineError> {
        let hold = run_two_cycle_protocol(net, true, frequency)?.net_two_cycle();
        let cycle = run_two_cycle_protocol(net, false, frequency)?.net_two_cycle();
        let v = net.supply().v_high();
        Ok(Self {
            source: EnergySource::Calibrated,
            bus_mode,
            frequency,
            e_hold_two_cycle: hold.max(0.0),
            e_cycle_two_cycle: cycle.max(0.0),
            e_irreversible: 0.5 * net.capacitance() * v * v,
        })
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        for (name, v) in [
            ("e_hold_two_cycle", self.e_hold_two_cycle),
            ("e_cycle_two_cycle", self.e_cycle_two_cycle),
            ("e_irreversible", self.e_irreversible),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MachineError::Param(format!("{name} must be a non-negative energy, got {v:e}")));
            }
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(MachineError::Param(format!("frequency must be positive, got {:e}", self.frequency)));
        }
        Ok(())
    }

    pub fn unmatched_energy(&self) -> f64 {
        match self.bus_mode {
            BusMode::Recovery => self.e_cycle_two_cycle,
            BusMode::Irreversible => self.e_irreversible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub index: usize,
    pub matched: usize,
    pub unmatched: usize,
    pub class: Reversibility,
    pub e_matched: f64,
    pub e_unmatched: f64,
    pub e_total: f64,
}

pub const LEDGER_CSV_HEADER: &str = "instr,matched,unmatched,class,e_J";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    pub entries: Vec<LedgerEntry>,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.e_total).sum()
    }

    /// Append `other`, renumbering its entries to follow this ledger's.
    pub fn extend(&mut self, other: EnergyLedger) {
        let base = self.entries.len();
        self.entries.extend(other.entries.into_iter().map(|e| LedgerEntry { index: base + e.index, ..e }));
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{LEDGER_CSV_HEADER}")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{},{:e}", e.index, e.matched, e.unmatched, e.class, e.e_total)?;
        }
        Ok(())
    }
}

/// Broadcast one instruction to every word. The match is evaluated on the
/// state before any bit is toggled.
pub fn execute_instruction(
    m: &mut Machine,
    i: &Instruction,
    p: &EnergyModelParams,
) -> Result<LedgerEntry, MachineError> {
    i.validate(m.width)?;
    p.validate()?;
    let (test, toggle) = i.masks(m.width);
    let unmatched_bus = |bus: BusState| match p.bus_mode {
        BusMode::Recovery => bus.with_voltage(0.5 * bus.v_dd()),
        BusMode::Irreversible => bus.with_voltage(0.0),
    };
    let step = |w: &mut Word| -> usize {
        if w.matches(&test) {
            w.toggle(&toggle);
            w.bus = w.bus.with_voltage(0.5 * w.bus.v_dd());
            1
        } else {
            w.bus = unmatched_bus(w.bus);
            0
        }
    };
    let matched: usize = if m.words.len() >= PARALLEL_WORDS {
        m.words.par_iter_mut().map(step).sum()
    } else {
        m.words.iter_mut().map(step).sum()
    };
    let unmatched = m.words.len() - matched;
    let e_matched = matched as f64 * p.e_hold_two_cycle;
    let e_unmatched = unmatched as f64 * p.unmatched_energy();
    Ok(LedgerEntry {
        index: 0,
        matched,
        unmatched,
        class: i.reversibility(),
        e_matched,
        e_unmatched,
        e_total: e_matched + e_unmatched,
    })
}

/// Execute `prog` in order, one ledger entry per instruction. Nothing runs
/// if any instruction is invalid for the machine width.
pub fn run_program(m: &mut Machine, prog: &[Instruction], p: &EnergyModelParams) -> Result<EnergyLedger, MachineError> {
    for i in prog {
        i.validate(m.width)?;
    }
    p.validate()?;
    let mut ledger = EnergyLedger { entries: Vec::with_capacity(prog.len()) };
    for (index, i) in prog.iter().enumerate() {
        let entry = execute_instruction(m, i, p)?;
        ledger.entries.push(LedgerEntry { index, ..entry });
    }
    Ok(ledger)
}

/// The program that undoes `prog`: the same reversible instructions in
/// reverse order.
pub fn invert_program(prog: &[Instruction]) -> Result<Vec<Instruction>, MachineError> {
    if let Some(index) = prog.iter().position(|i| i.reversibility() == Reversibility::Irreversible) {
        return Err(MachineError::Irreversible { index });
    }
    Ok(prog.iter().rev().cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub instructions: usize,
    pub total: f64,
    pub reversible_total: f64,
    pub irreversible_total: f64,
    pub matched_words: usize,
    pub unmatched_words: usize,
    pub matched_total: f64,
    pub unmatched_total: f64,
    /// Mean matched-word energy over mean unmatched-word energy.
    pub matched_to_unmatched_ratio: Option<f64>,
    /// Irreversible instructions account for more than half the energy.
    pub irreversible_dominates: bool,
}

pub fn energy_report(ledger: &EnergyLedger) -> EnergyReport {
    let mut r = EnergyReport {
        instructions: ledger.entries.len(),
        total: 0.0,
        reversible_total: 0.0,
        irreversible_total: 0.0,
        matched_words: 0,
        unmatched_words: 0,
        matched_total: 0.0,
        unmatched_total: 0.0,
        matched_to_unmatched_ratio: None,
        irreversible_dominates: false,
    };
    for e in &ledger.entries {
        r.total += e.e_total;
        match e.class {
            Reversibility::Reversible => r.reversible_total += e.e_total,
            Reversibility::Irreversible => r.irreversible_total += e.e_total,
        }
        r.matched_words += e.matched;
        r.unmatched_words += e.unmatched;
        r.matched_total += e.e_matched;
        r.unmatched_total += e.e_unmatched;
    }
    if r.matched_words > 0 && r.unmatched_words > 0 && r.unmatched_total > 0.0 {
        let per_matched = r.matched_total / r.matched_words as f64;
        let per_unmatched = r.unmatched_total / r.unmatched_words as f64;
        r.matched_to_unmatched_ratio = Some(per_matched / per_unmatched);
    }
    r.irreversible_dominates = r.irreversible_total > 0.5 * r.total && r.total > 0.0;
    r
}

/// Throughput of `y_processors` units each `x_slowdown` times slower than
/// one fast unit, relative to that unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speedup {
    pub ratio: f64,
    /// Set when the parallel machine is no faster than the single unit.
    pub not_beneficial: bool,
}

pub fn parallel_speedup(y_processors: u64, x_slowdown: f64) -> Result<Speedup, ModelError> {
    if y_processors == 0 {
        return Err(ModelError::NonPositive { name: "y_processors", value: 0.0 });
    }
    require_positive("x_slowdown", x_slowdown)?;
    let ratio = y_processors as f64 / x_slowdown;
    Ok(Speedup { ratio, not_beneficial: ratio <= 1.0 })
}
