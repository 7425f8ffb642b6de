//! Reaction-network data model: species, reactions, mass-action intensities,
//! stoichiometric updates and conservation-law extraction.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::cone;
use crate::rational::{rat_from_i64, rat_vec_to_coprime_ints};

/// A chemical species, identified by position in the network's species list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub index: usize,
    pub name: String,
}

/// A single irreversible reaction. Reversible reactions are stored as two
/// separate records.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// Consumed counts, one entry per species.
    pub nu: Vec<u32>,
    /// Produced counts, one entry per species.
    pub nu_prime: Vec<u32>,
    /// Rate constant kappa'_k (> 0).
    pub rate_const: f64,
    pub label: Option<String>,
}

impl Reaction {
    pub fn new(nu: Vec<u32>, nu_prime: Vec<u32>, rate_const: f64) -> Self {
        Reaction { nu, nu_prime, rate_const, label: None }
    }

    /// Net stoichiometric change zeta = nu' - nu.
    pub fn zeta(&self) -> Vec<i64> {
        self.nu
            .iter()
            .zip(&self.nu_prime)
            .map(|(&c, &p)| i64::from(p) - i64::from(c))
            .collect()
    }

    /// Total number of molecules consumed.
    pub fn order(&self) -> u32 {
        self.nu.iter().sum()
    }
}

/// An immutable reaction network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    /// Volume V (> 0), default 1.
    pub volume: f64,
}

/// Molecule counts, one entry per species.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub counts: Vec<i64>,
}

impl State {
    pub fn new(counts: Vec<i64>) -> Self {
        assert!(counts.iter().all(|&c| c >= 0), "state counts must be nonnegative");
        State { counts }
    }
}

/// A nonnegative vector theta with theta . zeta_k = 0 for every reaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationLaw {
    pub theta: Vec<BigRational>,
}

impl ConservationLaw {
    /// Integer-scaled coefficients (coprime).
    pub fn as_integers(&self) -> Vec<num_bigint::BigInt> {
        rat_vec_to_coprime_ints(&self.theta)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReactionError {
    #[error("reaction {reaction} drives species {species} negative")]
    NegativeCount { reaction: usize, species: usize },
    #[error("species count overflow applying reaction {reaction}")]
    Overflow { reaction: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

impl Network {
    pub fn new(species: Vec<Species>, reactions: Vec<Reaction>, volume: f64) -> Self {
        assert!(volume > 0.0, "volume must be positive");
        for r in &reactions {
            assert_eq!(r.nu.len(), species.len());
            assert_eq!(r.nu_prime.len(), species.len());
        }
        Network { species, reactions, volume }
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    /// Stoichiometric change vectors for all reactions.
    pub fn zetas(&self) -> Vec<Vec<i64>> {
        self.reactions.iter().map(Reaction::zeta).collect()
    }

    /// Mass-action intensity lambda_k(x) = kappa'_k prod_i x_i(x_i-1)...(x_i-nu_ik+1) / V^(order-1).
    ///
    /// Zero-order and unary reactions carry no volume factor. Returns exactly
    /// zero whenever some x_i < nu_ik.
    pub fn intensity(&self, k: usize, x: &State) -> f64 {
        let r = &self.reactions[k];
        let mut prod = r.rate_const;
        for (i, &nu) in r.nu.iter().enumerate() {
            for j in 0..nu {
                let factor = x.counts[i] - i64::from(j);
                if factor <= 0 {
                    return 0.0;
                }
                prod *= factor as f64;
            }
        }
        let order = r.order();
        if order > 1 {
            prod /= self.volume.powi(order as i32 - 1);
        }
        prod
    }

    /// Sum of all reaction intensities at x.
    pub fn total_intensity(&self, x: &State) -> f64 {
        (0..self.reactions.len()).map(|k| self.intensity(k, x)).sum()
    }

    /// x + zeta_k, failing when a component would go negative.
    pub fn apply_reaction(&self, x: &State, k: usize) -> Result<State, ReactionError> {
        let r = &self.reactions[k];
        let mut counts = x.counts.clone();
        for i in 0..counts.len() {
            let dz = i64::from(r.nu_prime[i]) - i64::from(r.nu[i]);
            let next = counts[i]
                .checked_add(dz)
                .ok_or(ReactionError::Overflow { reaction: k })?;
            if next < 0 {
                return Err(ReactionError::NegativeCount { reaction: k, species: i });
            }
            counts[i] = next;
        }
        Ok(State { counts })
    }

    /// In-place variant used by the simulator hot loop. The caller guarantees
    /// feasibility (intensity > 0 implies no component goes negative for
    /// mass-action networks).
    pub(crate) fn apply_reaction_unchecked(&self, counts: &mut [i64], k: usize) {
        let r = &self.reactions[k];
        for i in 0..counts.len() {
            counts[i] += i64::from(r.nu_prime[i]) - i64::from(r.nu[i]);
        }
    }

    /// Deterministic mass-action right-hand side sum_k kappa_k z^nu_k zeta_k
    /// with caller-supplied normalized rate constants.
    pub fn classical_ode_rhs(&self, kappa: &[f64], z: &[f64]) -> Vec<f64> {
        assert_eq!(kappa.len(), self.reactions.len());
        let mut out = vec![0.0; self.n_species()];
        for (k, r) in self.reactions.iter().enumerate() {
            let mut rate = kappa[k];
            for (i, &nu) in r.nu.iter().enumerate() {
                for _ in 0..nu {
                    rate *= z[i];
                }
            }
            for i in 0..out.len() {
                let dz = i64::from(r.nu_prime[i]) - i64::from(r.nu[i]);
                if dz != 0 {
                    out[i] += rate * dz as f64;
                }
            }
        }
        out
    }

    /// Generating set (extreme rays, integer-scaled, minimal support) of the
    /// nonnegative left-null cone { theta >= 0 : theta . zeta_k = 0 for all k }.
    pub fn conservation_laws(&self) -> Vec<ConservationLaw> {
        let constraints: Vec<Vec<BigRational>> = self
            .zetas()
            .iter()
            .map(|z| z.iter().map(|&c| rat_from_i64(c)).collect())
            .collect();
        cone::extreme_rays(self.n_species(), &constraints)
            .into_iter()
            .map(|theta| ConservationLaw { theta })
            .collect()
    }

    /// Structural diagnostics: order > 2 reactions, isolated species,
    /// duplicate reactions, nonpositive rate constants.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (k, r) in self.reactions.iter().enumerate() {
            let order = r.order();
            if order > 2 {
                out.push(Diagnostic {
                    message: format!(
                        "reaction {}: order {} exceeds the binary assumption of the scaling analysis",
                        k + 1,
                        order
                    ),
                });
            }
            if !(r.rate_const > 0.0) {
                out.push(Diagnostic {
                    message: format!("reaction {}: nonpositive rate constant {}", k + 1, r.rate_const),
                });
            }
            for l in 0..k {
                let o = &self.reactions[l];
                if o.nu == r.nu && o.nu_prime == r.nu_prime {
                    out.push(Diagnostic {
                        message: format!("reaction {} duplicates reaction {}", k + 1, l + 1),
                    });
                }
            }
        }
        for (i, sp) in self.species.iter().enumerate() {
            let touched = self
                .reactions
                .iter()
                .any(|r| r.nu[i] != 0 || r.nu_prime[i] != 0);
            if !touched {
                out.push(Diagnostic {
                    message: format!("species {} appears in no reaction", sp.name),
                });
            }
        }
        out
    }
}

/// Check theta . zeta_k == 0 exactly for every reaction.
pub fn is_conservation_law(network: &Network, theta: &[BigRational]) -> bool {
    network.zetas().iter().all(|zeta| {
        let dot: BigRational = theta
            .iter()
            .zip(zeta)
            .map(|(t, &z)| t * rat_from_i64(z))
            .sum();
        dot.is_zero() || (!dot.is_positive() && !dot.is_negative())
    })
}
