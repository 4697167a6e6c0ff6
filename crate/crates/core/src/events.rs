//! Trial records, setting tallies and joint outcome counts.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Measurement setting of one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    Zero,
    One,
}

impl Setting {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Setting::Zero),
            1 => Some(Setting::One),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Setting::Zero => 0,
            Setting::One => 1,
        }
    }
}

/// Detector outcome of one party. There is no "no click" class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn from_sign(sign: i8) -> Option<Self> {
        match sign {
            1 => Some(Outcome::Plus),
            -1 => Some(Outcome::Minus),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Setting pair `(x, y)`. Cells are indexed 00, 01, 10, 11 in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub a: Setting,
    pub b: Setting,
}

impl Cell {
    pub const ALL: [Cell; 4] = [
        Cell::new(Setting::Zero, Setting::Zero),
        Cell::new(Setting::Zero, Setting::One),
        Cell::new(Setting::One, Setting::Zero),
        Cell::new(Setting::One, Setting::One),
    ];

    pub const fn new(a: Setting, b: Setting) -> Self {
        Cell { a, b }
    }

    pub fn from_index(index: usize) -> Self {
        Cell::ALL[index]
    }

    pub fn index(self) -> usize {
        self.a.index() * 2 + self.b.index()
    }

    /// Parses `"00"`, `"01"`, `"10"` or `"11"`.
    pub fn parse(text: &str) -> Option<Self> {
        let bytes = text.as_bytes();
        if bytes.len() != 2 {
            return None;
        }
        let bit = |c: u8| match c {
            b'0' => Some(Setting::Zero),
            b'1' => Some(Setting::One),
            _ => None,
        };
        Some(Cell::new(bit(bytes[0])?, bit(bytes[1])?))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.a.index(), self.b.index())
    }
}

/// Outcome pair class. Indexed `++`, `+-`, `-+`, `--`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomePair {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl OutcomePair {
    pub const ALL: [OutcomePair; 4] = [
        OutcomePair::PlusPlus,
        OutcomePair::PlusMinus,
        OutcomePair::MinusPlus,
        OutcomePair::MinusMinus,
    ];

    pub fn of(a: Outcome, b: Outcome) -> Self {
        match (a, b) {
            (Outcome::Plus, Outcome::Plus) => OutcomePair::PlusPlus,
            (Outcome::Plus, Outcome::Minus) => OutcomePair::PlusMinus,
            (Outcome::Minus, Outcome::Plus) => OutcomePair::MinusPlus,
            (Outcome::Minus, Outcome::Minus) => OutcomePair::MinusMinus,
        }
    }

    pub fn outcomes(self) -> (Outcome, Outcome) {
        match self {
            OutcomePair::PlusPlus => (Outcome::Plus, Outcome::Plus),
            OutcomePair::PlusMinus => (Outcome::Plus, Outcome::Minus),
            OutcomePair::MinusPlus => (Outcome::Minus, Outcome::Plus),
            OutcomePair::MinusMinus => (Outcome::Minus, Outcome::Minus),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_match(self) -> bool {
        matches!(self, OutcomePair::PlusPlus | OutcomePair::MinusMinus)
    }
}

/// One experimental event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trial {
    pub setting_a: Setting,
    pub setting_b: Setting,
    pub outcome_a: Outcome,
    pub outcome_b: Outcome,
}

impl Trial {
    pub fn new(setting_a: Setting, setting_b: Setting, outcome_a: Outcome, outcome_b: Outcome) -> Self {
        Trial {
            setting_a,
            setting_b,
            outcome_a,
            outcome_b,
        }
    }

    /// Builds a trial from raw values; `None` unless settings are 0/1 and outcomes ±1.
    pub fn from_raw(x: u8, y: u8, a: i8, b: i8) -> Option<Self> {
        Some(Trial::new(
            Setting::from_bit(x)?,
            Setting::from_bit(y)?,
            Outcome::from_sign(a)?,
            Outcome::from_sign(b)?,
        ))
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.setting_a, self.setting_b)
    }

    pub fn outcome_pair(&self) -> OutcomePair {
        OutcomePair::of(self.outcome_a, self.outcome_b)
    }

    pub fn is_mismatch(&self) -> bool {
        self.outcome_a != self.outcome_b
    }
}

/// Ordered list of trials, in ingestion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    trials: Vec<Trial>,
}

impl Dataset {
    pub fn new(trials: Vec<Trial>) -> Self {
        Dataset { trials }
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn into_trials(self) -> Vec<Trial> {
        self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Expands a counts table into trials: cells in order 00, 01, 10, 11 and,
    /// within a cell, outcome classes in order `++`, `+-`, `-+`, `--`.
    pub fn from_joint_counts(counts: &JointCounts) -> Self {
        let mut trials = Vec::with_capacity(counts.total() as usize);
        for cell in Cell::ALL {
            for pair in OutcomePair::ALL {
                let (a, b) = pair.outcomes();
                let trial = Trial::new(cell.a, cell.b, a, b);
                for _ in 0..counts.get(cell, pair) {
                    trials.push(trial);
                }
            }
        }
        Dataset { trials }
    }

    pub fn tally_settings(&self) -> SettingTally {
        SettingTally::from_trials(&self.trials)
    }

    pub fn joint_counts(&self) -> JointCounts {
        JointCounts::from_trials(&self.trials)
    }
}

impl FromIterator<Trial> for Dataset {
    fn from_iter<I: IntoIterator<Item = Trial>>(iter: I) -> Self {
        Dataset {
            trials: iter.into_iter().collect(),
        }
    }
}

/// Per-party setting counts and joint setting-cell counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingTally {
    pub zeros_a: u64,
    pub ones_a: u64,
    pub zeros_b: u64,
    pub ones_b: u64,
    /// Indexed by [`Cell::index`].
    pub cell_counts: [u64; 4],
}

impl SettingTally {
    pub fn from_trials(trials: &[Trial]) -> Self {
        let mut cells = [0u64; 4];
        for t in trials {
            cells[t.cell().index()] += 1;
        }
        Self::from_cell_counts(cells)
    }

    /// Party tallies follow from the cell counts.
    pub fn from_cell_counts(cells: [u64; 4]) -> Self {
        SettingTally {
            zeros_a: cells[0] + cells[1],
            ones_a: cells[2] + cells[3],
            zeros_b: cells[0] + cells[2],
            ones_b: cells[1] + cells[3],
            cell_counts: cells,
        }
    }

    pub fn total(&self) -> u64 {
        self.cell_counts.iter().sum()
    }

    pub fn cell(&self, cell: Cell) -> u64 {
        self.cell_counts[cell.index()]
    }
}

/// Outcome-pair counts per setting cell: `[++, +-, -+, --]` for each of 00, 01, 10, 11.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointCounts {
    pub cells: [[u64; 4]; 4],
}

impl JointCounts {
    pub fn new(cells: [[u64; 4]; 4]) -> Self {
        JointCounts { cells }
    }

    pub fn from_trials(trials: &[Trial]) -> Self {
        let mut jc = JointCounts::default();
        for t in trials {
            jc.cells[t.cell().index()][t.outcome_pair().index()] += 1;
        }
        jc
    }

    pub fn get(&self, cell: Cell, pair: OutcomePair) -> u64 {
        self.cells[cell.index()][pair.index()]
    }

    pub fn cell(&self, cell: Cell) -> [u64; 4] {
        self.cells[cell.index()]
    }

    pub fn cell_total(&self, cell: Cell) -> u64 {
        self.cells[cell.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn tally(&self) -> SettingTally {
        let mut totals = [0u64; 4];
        for (dst, row) in totals.iter_mut().zip(self.cells.iter()) {
            *dst = row.iter().sum();
        }
        SettingTally::from_cell_counts(totals)
    }
}

/// The 245-event counts table of the published Delft data set.
pub const HENSEN_245_COUNTS: [[u64; 4]; 4] = [
    [23, 3, 4, 23],
    [33, 11, 5, 30],
    [22, 10, 6, 24],
    [4, 20, 21, 6],
];

/// The 245 heralded events of the first Delft run, rebuilt from its counts
/// table in the canonical order of [`Dataset::from_joint_counts`].
pub fn fixture_hensen_245() -> Dataset {
    Dataset::from_joint_counts(&JointCounts::new(HENSEN_245_COUNTS))
}
