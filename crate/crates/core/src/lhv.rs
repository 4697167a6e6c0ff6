//! Local-hidden-variable trial generation and postselection policies.
//!
//! A hidden variable is one of the 16 deterministic strategies
//! `(a0, a1, b0, b1)`: party A answers `a_x` to setting `x` and party B answers
//! `b_y` to setting `y`. A [`Mixture`] is a probability law over strategies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Cell, Dataset, Outcome, OutcomePair, Setting, Trial};
use crate::stats::{chsh_value, CHSH_SIGNS};

/// Weights must sum to one within this tolerance.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureError {
    #[error("mixture has no components")]
    Empty,
    #[error("weight {weight} of component {index} is negative or not finite")]
    BadWeight { index: usize, weight: f64 },
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    /// A's answers to settings 0 and 1.
    pub a: [Outcome; 2],
    /// B's answers to settings 0 and 1.
    pub b: [Outcome; 2],
}

impl Strategy {
    pub fn new(a0: Outcome, a1: Outcome, b0: Outcome, b1: Outcome) -> Self {
        Strategy { a: [a0, a1], b: [b0, b1] }
    }

    /// From signs `(a0, a1, b0, b1)`; panics on anything but ±1.
    pub fn from_signs(signs: [i8; 4]) -> Self {
        let o = |s: i8| Outcome::from_sign(s).expect("strategy sign must be +1 or -1");
        Strategy::new(o(signs[0]), o(signs[1]), o(signs[2]), o(signs[3]))
    }

    /// All 16 deterministic strategies.
    pub fn all() -> impl Iterator<Item = Strategy> {
        (0u8..16).map(|bits| {
            let o = |i: u8| {
                if bits >> (3 - i) & 1 == 0 {
                    Outcome::Plus
                } else {
                    Outcome::Minus
                }
            };
            Strategy::new(o(0), o(1), o(2), o(3))
        })
    }

    pub fn outcome_a(&self, x: Setting) -> Outcome {
        self.a[x.index()]
    }

    pub fn outcome_b(&self, y: Setting) -> Outcome {
        self.b[y.index()]
    }

    /// `a_x * b_y` for cells 00, 01, 10, 11.
    pub fn correlators(&self) -> [f64; 4] {
        Cell::ALL.map(|c| f64::from(self.outcome_a(c.a).sign() * self.outcome_b(c.b).sign()))
    }

    pub fn chsh(&self) -> f64 {
        chsh_value(&self.correlators())
    }

    pub fn flipped(&self) -> Self {
        Strategy {
            a: self.a.map(Outcome::flipped),
            b: self.b.map(Outcome::flipped),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mixture {
    components: Vec<(Strategy, f64)>,
    /// Multiply both outcomes by an independent fair sign on every trial.
    pub symmetrize: bool,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl Mixture {
    pub fn new(components: Vec<(Strategy, f64)>, symmetrize: bool) -> Result<Self, MixtureError> {
        if components.is_empty() {
            return Err(MixtureError::Empty);
        }
        for (index, &(_, weight)) in components.iter().enumerate() {
            if !weight.is_finite() || weight < 0.0 {
                return Err(MixtureError::BadWeight { index, weight });
            }
        }
        let sum: f64 = components.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(MixtureError::NotNormalized { sum });
        }
        let cumulative = components
            .iter()
            .scan(0.0, |acc, (_, w)| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Mixture {
            components,
            symmetrize,
            cumulative,
        })
    }

    pub fn single(strategy: Strategy, symmetrize: bool) -> Self {
        Mixture::new(vec![(strategy, 1.0)], symmetrize).expect("unit weight")
    }

    pub fn components(&self) -> &[(Strategy, f64)] {
        &self.components
    }

    pub fn with_symmetrize(mut self, symmetrize: bool) -> Self {
        self.symmetrize = symmetrize;
        self
    }

    fn pick(&self, u: f64) -> &Strategy {
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.components.len() - 1);
        &self.components[idx].0
    }
}

/// Uniform mixture of (+,+,+,+), (+,+,+,-), (+,-,+,+) and (+,-,-,+).
///
/// Correlators are `(1/2, 1/2, 1/2, -1/2)`, so S = 2. Over these four
/// strategies the uniform weights are the only solution for those correlators.
pub fn canonical_saturating_mixture() -> Mixture {
    let q = 0.25;
    Mixture::new(
        vec![
            (Strategy::from_signs([1, 1, 1, 1]), q),
            (Strategy::from_signs([1, 1, 1, -1]), q),
            (Strategy::from_signs([1, -1, 1, 1]), q),
            (Strategy::from_signs([1, -1, -1, 1]), q),
        ],
        true,
    )
    .expect("canonical weights are normalized")
}

/// Analytic `E(x, y) = Σ w · a(x) · b(y)`. Symmetrization does not enter.
pub fn mixture_correlators(m: &Mixture) -> [f64; 4] {
    let mut e = [0.0; 4];
    for (strategy, w) in &m.components {
        for (dst, c) in e.iter_mut().zip(strategy.correlators()) {
            *dst += w * c;
        }
    }
    e
}

/// Expected win probability per trial under uniform settings.
pub fn mixture_win_rate(m: &Mixture) -> f64 {
    let e = mixture_correlators(m);
    e.iter().zip(CHSH_SIGNS).map(|(e, s)| (1.0 + s * e) / 2.0).sum::<f64>() / 4.0
}

/// Outcomes for fixed settings. Always consumes one strategy draw and one sign
/// draw, whether or not the mixture symmetrizes.
pub fn draw_outcomes<R: Rng + ?Sized>(m: &Mixture, x: Setting, y: Setting, rng: &mut R) -> Trial {
    let strategy = m.pick(rng.random::<f64>());
    let flip = rng.random::<bool>();
    let (mut a, mut b) = (strategy.outcome_a(x), strategy.outcome_b(y));
    if m.symmetrize && flip {
        a = a.flipped();
        b = b.flipped();
    }
    Trial::new(x, y, a, b)
}

/// Uniform independent settings, then [`draw_outcomes`].
pub fn draw_trial<R: Rng + ?Sized>(m: &Mixture, rng: &mut R) -> Trial {
    let x = if rng.random::<bool>() { Setting::One } else { Setting::Zero };
    let y = if rng.random::<bool>() { Setting::One } else { Setting::Zero };
    draw_outcomes(m, x, y, rng)
}

/// Which trials of the target cell a policy may remove.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalMode {
    /// Any mismatch, `+-` or `-+`.
    MismatchAny,
    /// Only the given outcome pair.
    MismatchOriented(Orientation),
    /// Any trial in the cell.
    AnyOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    PlusMinus,
    MinusPlus,
}

impl Orientation {
    pub fn pair(self) -> OutcomePair {
        match self {
            Orientation::PlusMinus => OutcomePair::PlusMinus,
            Orientation::MinusPlus => OutcomePair::MinusPlus,
        }
    }
}

impl RemovalMode {
    fn admits(self, t: &Trial) -> bool {
        match self {
            RemovalMode::MismatchAny => t.is_mismatch(),
            RemovalMode::MismatchOriented(o) => t.outcome_pair() == o.pair(),
            RemovalMode::AnyOutcome => true,
        }
    }
}

impl std::fmt::Display for RemovalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RemovalMode::MismatchAny => "mismatch",
            RemovalMode::MismatchOriented(Orientation::PlusMinus) => "oriented:+-",
            RemovalMode::MismatchOriented(Orientation::MinusPlus) => "oriented:-+",
            RemovalMode::AnyOutcome => "any",
        })
    }
}

impl std::str::FromStr for RemovalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mismatch" => Ok(RemovalMode::MismatchAny),
            "any" => Ok(RemovalMode::AnyOutcome),
            "oriented:+-" => Ok(RemovalMode::MismatchOriented(Orientation::PlusMinus)),
            "oriented:-+" => Ok(RemovalMode::MismatchOriented(Orientation::MinusPlus)),
            _ => Err(format!(
                "unknown mode `{s}` (expected mismatch, any, oriented:+- or oriented:-+)"
            )),
        }
    }
}

/// Remove up to `max_removals` eligible trials of `cell`, earliest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostselectionPolicy {
    pub cell: Cell,
    pub max_removals: u64,
    pub mode: RemovalMode,
}

impl PostselectionPolicy {
    pub fn new(cell: Cell, max_removals: u64, mode: RemovalMode) -> Self {
        PostselectionPolicy {
            cell,
            max_removals,
            mode,
        }
    }

    pub fn none() -> Self {
        PostselectionPolicy::new(Cell::from_index(0), 0, RemovalMode::MismatchAny)
    }

    fn eligible(&self, t: &Trial) -> bool {
        t.cell() == self.cell && self.mode.admits(t)
    }

    /// In-place variant of [`apply_postselection`]; returns the removal count.
    pub fn apply_in_place(&self, trials: &mut Vec<Trial>) -> u64 {
        let mut removed = 0;
        trials.retain(|t| {
            if removed < self.max_removals && self.eligible(t) {
                removed += 1;
                false
            } else {
                true
            }
        });
        removed
    }
}

/// Returns the surviving dataset, order preserved, and how many trials were
/// removed. Removes `min(max_removals, eligible)`; a shortfall is not an error.
pub fn apply_postselection(d: &Dataset, p: &PostselectionPolicy) -> (Dataset, u64) {
    let mut trials = d.trials().to_vec();
    let removed = p.apply_in_place(&mut trials);
    (Dataset::new(trials), removed)
}
