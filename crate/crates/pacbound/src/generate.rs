//! Seeded instance families.

use std::fmt;
use std::str::FromStr;

use pacbound_core::mdp::MdpSpec;
use pacbound_core::sim::derive_seed;
use pacbound_core::Shape;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Every transition row has full support; rewards uniform in [0, 1).
    RandomDense,
    /// Deterministic transitions with one trajectory whose rewards are all
    /// 1, every other reward below 1/2.
    DeterministicTree,
    /// Random kernel, every reward equal to 1/2.
    FlatReward,
    /// Only the first action matters: arm 0 pays `(1 + gap) / 2`, every
    /// other arm `(1 - gap) / 2`, and later rewards are 0.
    TwoArmedEmbedded,
}

impl Family {
    pub const ALL: [Family; 4] = [Self::RandomDense, Self::DeterministicTree, Self::FlatReward, Self::TwoArmedEmbedded];

    pub fn name(self) -> &'static str {
        match self {
            Self::RandomDense => "random-dense",
            Self::DeterministicTree => "deterministic-tree",
            Self::FlatReward => "flat-reward",
            Self::TwoArmedEmbedded => "two-armed-embedded",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family {s:?}; expected one of {}", Self::ALL.map(Family::name).join(", ")))
    }
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub id: String,
    pub source: String,
    pub mdp: MdpSpec,
}

fn dense_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    // normalized exponentials: uniform on the simplex
    let row: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let total: f64 = row.iter().sum();
    row.into_iter().map(|x| x / total).collect()
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    row[i] = 1.0;
    row
}

/// One instance of `family`; deterministic in `(family, shape, gap, seed)`.
pub fn generate(family: Family, shape: Shape, gap: f64, seed: u64) -> Result<MdpSpec> {
    let (hh, ss, aa) = (shape.horizon, shape.states, shape.actions);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity((hh - 1) * ss * aa * ss);
    let mut rewards = vec![0.0; shape.triplets()];
    match family {
        Family::RandomDense | Family::FlatReward => {
            for _ in 0..(hh - 1) * ss * aa {
                transitions.extend(dense_row(&mut rng, ss));
            }
            for r in &mut rewards {
                *r = if family == Family::FlatReward { 0.5 } else { rng.random() };
            }
        }
        Family::DeterministicTree => {
            let next: Vec<usize> = (0..(hh - 1) * ss * aa).map(|_| rng.random_range(0..ss)).collect();
            for &n in &next {
                transitions.extend(one_hot(ss, n));
            }
            for r in &mut rewards {
                *r = 0.5 * rng.random::<f64>();
            }
            let mut state = 0;
            for h in 0..hh {
                let action = rng.random_range(0..aa);
                rewards[shape.index(h, state, action)] = 1.0;
                if h + 1 < hh {
                    state = next[(h * ss + state) * aa + action];
                }
            }
        }
        Family::TwoArmedEmbedded => {
            if aa < 2 {
                return Err(CliError::Input("two-armed-embedded needs at least 2 actions".into()));
            }
            if !(gap > 0.0 && gap <= 1.0) {
                return Err(CliError::Input(format!("gap must lie in (0, 1], got {gap}")));
            }
            for _ in 0..(hh - 1) * ss * aa {
                transitions.extend(dense_row(&mut rng, ss));
            }
            for a in 0..aa {
                rewards[shape.index(0, 0, a)] = if a == 0 { 0.5 * (1.0 + gap) } else { 0.5 * (1.0 - gap) };
            }
        }
    }
    Ok(MdpSpec::new(shape, 0, transitions, rewards)?)
}

/// `count` instances with seeds derived from `seed`.
pub fn generate_instances(family: Family, shape: Shape, gap: f64, count: usize, seed: u64) -> Result<Vec<Generated>> {
    (0..count)
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let mdp = generate(family, shape, gap, s)?;
            let id = format!("{}-h{}s{}a{}-{i}", family, shape.horizon, shape.states, shape.actions);
            let source = format!(
                "family={family} horizon={} states={} actions={} gap={gap} seed={s}",
                shape.horizon, shape.states, shape.actions
            );
            Ok(Generated { id, source, mdp })
        })
        .collect()
}
