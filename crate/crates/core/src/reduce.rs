//! Construction of limiting models at a chosen time scale.
//!
//! Every (variable, reaction) pair is classified by its exponent gap
//! gamma + rho_k - alpha_v: negative gaps vanish in the limit, zero gaps
//! survive as jumps (alpha = 0) or deterministic drift (alpha > 0), and
//! positive gaps mark fast terms whose species equilibrate instantly and are
//! eliminated by averaging against the stationary law of the frozen fast
//! subnetwork. Closed-form equilibria and averaged rates for the worked
//! examples (Goutsias gene regulation, Michaelis-Menten, the Mastny
//! reduction) sit alongside the generic truncated stationary solver.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::network::Network;
use crate::rational::{format_rational, rat_sign, rat_to_f64};
use crate::scaling::ScalingSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermClassKind {
    Vanishing,
    Jump,
    Drift,
    Fast,
}

impl fmt::Display for TermClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TermClassKind::Vanishing => "vanishing",
            TermClassKind::Jump => "jump",
            TermClassKind::Drift => "drift",
            TermClassKind::Fast => "fast",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Species(usize),
    Aux(usize),
}

/// Classification of one reaction's contribution to one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TermClass {
    pub reaction: usize,
    pub variable: VarKind,
    /// gamma + rho_k - alpha_variable.
    pub exponent_gap: BigRational,
    pub class: TermClassKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarState {
    /// All terms vanish; the variable keeps its initial value.
    Frozen,
    /// Deterministic drift from the listed reactions (alpha > 0).
    Continuous { reactions: Vec<usize> },
    /// Integer jumps from the listed reactions (alpha = 0).
    Discrete { reactions: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitVariable {
    pub name: String,
    pub kind: VarKind,
    pub alpha: BigRational,
    /// For auxiliary variables, the defining combination theta over species.
    pub theta: Option<Vec<BigRational>>,
    pub state: VarState,
}

/// Averaged replacement for a reaction intensity, as a function of the
/// retained-variable state vector.
#[derive(Clone)]
pub struct AveragedIntensity {
    pub reaction: usize,
    pub formula: String,
    pub eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for AveragedIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AveragedIntensity")
            .field("reaction", &self.reaction)
            .field("formula", &self.formula)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct FastBlock {
    pub species: Vec<usize>,
    pub reactions: Vec<usize>,
}

/// The limiting model at a fixed time scale.
#[derive(Debug, Clone)]
pub struct LimitModel {
    pub network: Network,
    pub spec: ScalingSpec,
    pub gamma: BigRational,
    pub variables: Vec<LimitVariable>,
    pub term_classes: Vec<TermClass>,
    pub fast_block: FastBlock,
    /// Reaction -> averaged intensity, once averaging has been applied.
    pub averaged: BTreeMap<usize, AveragedIntensity>,
    /// True when no retained variable depends on an unaveraged fast species.
    pub closed: bool,
    /// Initial values per retained variable, when known.
    pub z0: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReduceError {
    /// An auxiliary theta has a nonzero pairing with a fast reaction.
    NotInK2 { aux: usize, reaction: usize },
    /// Compilation requires every retained intensity to be expressible in
    /// retained variables or averaged rates.
    NotClosed { reaction: usize },
    EmptyStateSpace,
    NotIrreducible { closed_classes: usize },
    NoRootInRange { m: u64 },
    StateSpaceTooLarge { states: usize, limit: usize },
}

impl fmt::Display for ReduceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReduceError::NotInK2 { aux, reaction } => write!(
                f,
                "auxiliary variable {aux} is not conserved by fast reaction {} \
                 (theta . zeta != 0 on the fast species)",
                reaction + 1
            ),
            ReduceError::NotClosed { reaction } => write!(
                f,
                "reaction {} depends on an eliminated fast species and no averaged \
                 intensity was supplied; the fast terms force the limit and must be \
                 averaged before simulation",
                reaction + 1
            ),
            ReduceError::EmptyStateSpace => write!(f, "fast state space is empty"),
            ReduceError::NotIrreducible { closed_classes } => write!(
                f,
                "truncated fast chain has {closed_classes} closed communicating classes"
            ),
            ReduceError::NoRootInRange { m } => {
                write!(f, "moment-closure quadratic has no root in [0, m/2] for m = {m}")
            }
            ReduceError::StateSpaceTooLarge { states, limit } => {
                write!(f, "truncated state space has {states} states (limit {limit})")
            }
        }
    }
}

impl std::error::Error for ReduceError {}

pub fn classify_gap(gap: &BigRational, alpha_v: &BigRational) -> TermClassKind {
    match rat_sign(gap) {
        -1 => TermClassKind::Vanishing,
        1 => TermClassKind::Fast,
        _ => {
            if alpha_v.is_zero() {
                TermClassKind::Jump
            } else {
                TermClassKind::Drift
            }
        }
    }
}

/// Species and reactions carrying a fast term at this gamma.
pub fn fast_sets(network: &Network, spec: &ScalingSpec, gamma: &BigRational) -> (Vec<bool>, Vec<bool>) {
    let n = network.n_species();
    let mut fast_species = vec![false; n];
    let mut fast_reactions = vec![false; network.n_reactions()];
    for (k, reaction) in network.reactions.iter().enumerate() {
        let zeta = reaction.zeta();
        for i in 0..n {
            if zeta[i] != 0 {
                let gap = gamma.clone() + &spec.rho[k] - &spec.alpha[i];
                if gap.is_positive() {
                    fast_species[i] = true;
                    fast_reactions[k] = true;
                }
            }
        }
    }
    (fast_species, fast_reactions)
}

fn aux_name(network: &Network, theta: &[BigRational]) -> String {
    let mut parts = Vec::new();
    for (i, c) in theta.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let name = &network.species[i].name;
        if c == &BigRational::from_integer(1.into()) {
            parts.push(name.clone());
        } else {
            parts.push(format!("{}*{}", format_rational(c), name));
        }
    }
    parts.join(" + ")
}

/// Build the limiting model at `gamma`, retaining the given auxiliary
/// combinations in addition to the individually convergent species.
pub fn build_limit_model(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    aux_thetas: &[Vec<BigRational>],
) -> Result<LimitModel, ReduceError> {
    let n = network.n_species();
    let zetas = network.zetas();
    let (fast_species, fast_reactions) = fast_sets(network, spec, gamma);

    // Auxiliary combinations must be conserved by every fast reaction,
    // projected onto the fast species.
    for (a, theta) in aux_thetas.iter().enumerate() {
        for (k, &is_fast) in fast_reactions.iter().enumerate() {
            if !is_fast {
                continue;
            }
            let mut dot = BigRational::zero();
            for i in 0..n {
                if fast_species[i] {
                    dot += theta[i].clone() * BigRational::from_integer(zetas[k][i].into());
                }
            }
            if !dot.is_zero() {
                return Err(ReduceError::NotInK2 { aux: a, reaction: k });
            }
        }
    }

    let mut warnings = Vec::new();
    let mut term_classes = Vec::new();
    let mut variables = Vec::new();
    let mut fast_block_species: Vec<usize> = Vec::new();

    for i in 0..n {
        let alpha = &spec.alpha[i];
        let mut jump = Vec::new();
        let mut drift = Vec::new();
        let mut has_fast = false;
        for k in 0..network.n_reactions() {
            if zetas[k][i] == 0 {
                continue;
            }
            let gap = gamma.clone() + &spec.rho[k] - alpha;
            let class = classify_gap(&gap, alpha);
            term_classes.push(TermClass {
                reaction: k,
                variable: VarKind::Species(i),
                exponent_gap: gap,
                class,
            });
            match class {
                TermClassKind::Jump => jump.push(k),
                TermClassKind::Drift => drift.push(k),
                TermClassKind::Fast => has_fast = true,
                TermClassKind::Vanishing => {}
            }
        }
        if has_fast {
            fast_block_species.push(i);
            continue;
        }
        let state = if !drift.is_empty() {
            VarState::Continuous { reactions: drift }
        } else if !jump.is_empty() {
            VarState::Discrete { reactions: jump }
        } else {
            VarState::Frozen
        };
        variables.push(LimitVariable {
            name: network.species[i].name.clone(),
            kind: VarKind::Species(i),
            alpha: alpha.clone(),
            theta: None,
            state,
        });
    }

    for (a, theta) in aux_thetas.iter().enumerate() {
        let alpha_theta = theta
            .iter()
            .zip(&spec.alpha)
            .filter(|(c, _)| c.is_positive())
            .map(|(_, al)| al.clone())
            .max()
            .unwrap_or_else(BigRational::zero);
        let mut jump = Vec::new();
        let mut drift = Vec::new();
        for k in 0..network.n_reactions() {
            let mut c = BigRational::zero();
            let mut c_top = BigRational::zero();
            for i in 0..n {
                let z = BigRational::from_integer(zetas[k][i].into());
                c += theta[i].clone() * &z;
                if spec.alpha[i] == alpha_theta {
                    c_top += theta[i].clone() * &z;
                }
            }
            if c.is_zero() {
                continue;
            }
            let gap = gamma.clone() + &spec.rho[k] - &alpha_theta;
            let class = classify_gap(&gap, &alpha_theta);
            if class != TermClassKind::Vanishing && c != c_top {
                // The combination mixes abundance levels in a surviving term,
                // so the projection does not commute with the scaling.
                warnings.push(format!(
                    "auxiliary {} has a level-mixing term from reaction {}: the full \
                     coefficient {} differs from the top-level coefficient {}",
                    a + 1,
                    k + 1,
                    format_rational(&c),
                    format_rational(&c_top)
                ));
            }
            term_classes.push(TermClass {
                reaction: k,
                variable: VarKind::Aux(a),
                exponent_gap: gap,
                class,
            });
            match class {
                TermClassKind::Jump => jump.push(k),
                TermClassKind::Drift => drift.push(k),
                TermClassKind::Fast => {
                    return Err(ReduceError::NotInK2 { aux: a, reaction: k });
                }
                TermClassKind::Vanishing => {}
            }
        }
        let state = if !drift.is_empty() {
            VarState::Continuous { reactions: drift }
        } else if !jump.is_empty() {
            VarState::Discrete { reactions: jump }
        } else {
            VarState::Frozen
        };
        variables.push(LimitVariable {
            name: aux_name(network, theta),
            kind: VarKind::Aux(a),
            alpha: alpha_theta,
            theta: Some(theta.clone()),
            state,
        });
    }

    let fast_block_reactions: Vec<usize> =
        (0..network.n_reactions()).filter(|&k| fast_reactions[k]).collect();

    let mut model = LimitModel {
        network: network.clone(),
        spec: spec.clone(),
        gamma: gamma.clone(),
        variables,
        term_classes,
        fast_block: FastBlock { species: fast_block_species, reactions: fast_block_reactions },
        averaged: BTreeMap::new(),
        closed: false,
        z0: None,
        warnings,
    };
    model.recompute_closed();
    Ok(model)
}

impl LimitModel {
    /// Reactions active in the limit (surviving jump or drift terms).
    pub fn active_reactions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for var in &self.variables {
            match &var.state {
                VarState::Continuous { reactions } | VarState::Discrete { reactions } => {
                    for &k in reactions {
                        if !out.contains(&k) {
                            out.push(k);
                        }
                    }
                }
                VarState::Frozen => {}
            }
        }
        out.sort_unstable();
        out
    }

    /// Reactions whose intensity reads an eliminated fast species and has not
    /// been averaged yet.
    pub fn unresolved_reactions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for k in self.active_reactions() {
            if self.averaged.contains_key(&k) {
                continue;
            }
            let depends_on_fast = self
                .fast_block
                .species
                .iter()
                .any(|&i| self.network.reactions[k].nu[i] > 0);
            if depends_on_fast {
                out.push(k);
            }
        }
        out
    }

    fn recompute_closed(&mut self) {
        self.closed = self.unresolved_reactions().is_empty();
    }

    /// Supply an averaged intensity for a reaction (Theorem-5.1-style
    /// replacement); the fast-block stationary law is assumed stable.
    pub fn set_averaged(
        &mut self,
        reaction: usize,
        formula: impl Into<String>,
        eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    ) {
        self.averaged
            .insert(reaction, AveragedIntensity { reaction, formula: formula.into(), eval });
        self.recompute_closed();
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Initial retained-variable values from species-space initial values
    /// (scaled). Auxiliary variables keep only the species attaining the
    /// combination's abundance level; lower levels vanish in the limit.
    pub fn initial_from_species(&self, z0_species: &[f64]) -> Vec<f64> {
        self.variables
            .iter()
            .map(|var| match &var.kind {
                VarKind::Species(i) => z0_species[*i],
                VarKind::Aux(_) => {
                    let theta = var.theta.as_ref().unwrap();
                    theta
                        .iter()
                        .enumerate()
                        .filter(|(i, c)| !c.is_zero() && self.spec.alpha[*i] == var.alpha)
                        .map(|(i, c)| rat_to_f64(c) * z0_species[i])
                        .sum()
                }
            })
            .collect()
    }

    /// Net effect of reaction `k` on retained variable `v` in the limit
    /// (zero unless the reaction survives for that variable).
    fn coefficient(&self, v: usize, k: usize) -> f64 {
        let var = &self.variables[v];
        let active = match &var.state {
            VarState::Continuous { reactions } | VarState::Discrete { reactions } => {
                reactions.contains(&k)
            }
            VarState::Frozen => false,
        };
        if !active {
            return 0.0;
        }
        let zeta = self.network.reactions[k].zeta();
        match &var.kind {
            VarKind::Species(i) => zeta[*i] as f64,
            VarKind::Aux(_) => {
                let theta = var.theta.as_ref().unwrap();
                theta.iter().zip(&zeta).map(|(c, z)| rat_to_f64(c) * *z as f64).sum()
            }
        }
    }

    /// Compile into a simulatable hybrid model; requires `closed`.
    pub fn compile(&self, z0_species: &[f64]) -> Result<HybridModel, ReduceError> {
        if let Some(k) = self.unresolved_reactions().first() {
            return Err(ReduceError::NotClosed { reaction: *k });
        }
        let names = self.variable_names();
        let z0 = self.z0.clone().unwrap_or_else(|| self.initial_from_species(z0_species));
        let n_vars = self.variables.len();
        let mut species_pos: HashMap<usize, usize> = HashMap::new();
        for (v, var) in self.variables.iter().enumerate() {
            if let VarKind::Species(i) = var.kind {
                species_pos.insert(i, v);
            }
        }

        // Per-reaction intensity as a function of the variable state vector.
        let make_rate = |k: usize| -> Result<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, ReduceError> {
            if let Some(avg) = self.averaged.get(&k) {
                return Ok(avg.eval.clone());
            }
            let kappa = self.spec.kappa[k];
            let mut factors: Vec<(usize, u32, bool)> = Vec::new(); // (var pos, order, discrete)
            for i in 0..self.network.n_species() {
                let nu = self.network.reactions[k].nu[i];
                if nu == 0 {
                    continue;
                }
                let pos = *species_pos.get(&i).ok_or(ReduceError::NotClosed { reaction: k })?;
                factors.push((pos, nu, self.spec.alpha[i].is_zero()));
            }
            Ok(Arc::new(move |state: &[f64]| {
                let mut rate = kappa;
                for &(pos, nu, discrete) in &factors {
                    let v = state[pos];
                    if discrete {
                        for j in 0..nu {
                            rate *= (v - j as f64).max(0.0);
                        }
                    } else {
                        rate *= v.powi(nu as i32);
                    }
                }
                rate
            }))
        };

        let mut drift_terms: Vec<(usize, f64, Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>)> =
            Vec::new();
        let mut jump_reactions: Vec<usize> = Vec::new();
        for (v, var) in self.variables.iter().enumerate() {
            match &var.state {
                VarState::Continuous { reactions } => {
                    for &k in reactions {
                        drift_terms.push((v, self.coefficient(v, k), make_rate(k)?));
                    }
                }
                VarState::Discrete { reactions } => {
                    for &k in reactions {
                        if !jump_reactions.contains(&k) {
                            jump_reactions.push(k);
                        }
                    }
                }
                VarState::Frozen => {}
            }
        }
        jump_reactions.sort_unstable();

        let mut channels = Vec::new();
        for k in jump_reactions {
            let delta: Vec<f64> = (0..n_vars).map(|v| self.coefficient(v, k)).collect();
            let rate = make_rate(k)?;
            let label = self.network.reactions[k]
                .label
                .clone()
                .unwrap_or_else(|| format!("r{}", k + 1));
            channels.push(JumpChannel {
                label,
                intensity: Box::new(move |_t, z| rate(z)),
                delta,
            });
        }

        let is_discrete: Vec<bool> = self
            .variables
            .iter()
            .map(|v| matches!(v.state, VarState::Discrete { .. }))
            .collect();

        let drift = Box::new(move |_t: f64, z: &[f64], dz: &mut [f64]| {
            dz.fill(0.0);
            for (v, coeff, rate) in &drift_terms {
                dz[*v] += coeff * rate(z);
            }
        });

        Ok(HybridModel { names, is_discrete, z0, drift, channels })
    }
}

/// A compiled limiting model: deterministic drift plus jump channels on a
/// shared variable vector, ready for the hybrid simulator.
pub struct HybridModel {
    pub names: Vec<String>,
    pub is_discrete: Vec<bool>,
    pub z0: Vec<f64>,
    pub drift: Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>,
    pub channels: Vec<JumpChannel>,
}

pub struct JumpChannel {
    pub label: String,
    pub intensity: Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
    pub delta: Vec<f64>,
}

impl HybridModel {
    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn total_jump_intensity(&self, t: f64, z: &[f64]) -> f64 {
        self.channels.iter().map(|c| (c.intensity)(t, z)).sum()
    }
}

impl fmt::Debug for HybridModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridModel")
            .field("names", &self.names)
            .field("is_discrete", &self.is_discrete)
            .field("z0", &self.z0)
            .field("channels", &self.channels.len())
            .finish()
    }
}

// ---------------------------------------------------------------------------
// Fast-block generators, stationary laws, and averaging.
// ---------------------------------------------------------------------------

/// Finite generator of the fast subnetwork with slow coordinates frozen.
#[derive(Debug, Clone)]
pub struct FastGenerator {
    /// Species indices forming the fast coordinates, in state-vector order.
    pub fast_species: Vec<usize>,
    pub fast_reactions: Vec<usize>,
    /// Lattice states over the fast coordinates.
    pub states: Vec<Vec<i64>>,
    /// Outgoing transitions per state: (target state index, rate).
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Rate from each state across the truncation boundary.
    pub escape: Vec<f64>,
    pub frozen_slow: Vec<f64>,
}

/// Stationary law of a finite fast generator.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub fast_species: Vec<usize>,
    pub support: Vec<Vec<i64>>,
    pub probs: Vec<f64>,
    /// Max stationarity residual max_j |(pi Q)_j|.
    pub residual: f64,
    /// Fraction of the equilibrium probability flux that crosses the
    /// truncation boundary (zero for a closed chain).
    pub truncation_mass_bound: f64,
}

impl Equilibrium {
    pub fn expectation(&self, f: impl Fn(&[i64]) -> f64) -> f64 {
        self.support.iter().zip(&self.probs).map(|(y, p)| p * f(y)).sum()
    }
}

/// Intensity of reaction `k` in the scaled limit at mixed values:
/// continuous species (alpha > 0) contribute powers, discrete species
/// (alpha = 0) contribute falling factorials.
pub fn scaled_intensity(network: &Network, spec: &ScalingSpec, k: usize, values: &[f64]) -> f64 {
    let mut rate = spec.kappa[k];
    for i in 0..network.n_species() {
        let nu = network.reactions[k].nu[i];
        if nu == 0 {
            continue;
        }
        let v = values[i];
        if spec.alpha[i].is_zero() {
            for j in 0..nu {
                rate *= (v - j as f64).max(0.0);
            }
        } else {
            rate *= v.powi(nu as i32);
        }
    }
    rate
}

/// Build the generator of the full fast block at `gamma`, with all non-fast
/// coordinates frozen at `frozen_slow` (length = species count; entries for
/// the fast species seed the reachable lattice slice and fix its conserved
/// quantities).
pub fn fast_generator(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    frozen_slow: &[f64],
    truncation: i64,
) -> Result<FastGenerator, ReduceError> {
    let (fast_species_mask, _) = fast_sets(network, spec, gamma);
    let component: Vec<usize> =
        (0..network.n_species()).filter(|&i| fast_species_mask[i]).collect();
    fast_generator_component(network, spec, gamma, frozen_slow, &component, truncation)
}

/// Generator restricted to a subset of the fast species; fast species outside
/// the subset are frozen at `frozen_slow` (their own quasi-equilibrium values
/// in a nested-averaging setup).
pub fn fast_generator_component(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    frozen_slow: &[f64],
    component: &[usize],
    truncation: i64,
) -> Result<FastGenerator, ReduceError> {
    const MAX_STATES: usize = 50_000;
    if component.is_empty() {
        return Err(ReduceError::EmptyStateSpace);
    }
    let (_, fast_reactions_mask) = fast_sets(network, spec, gamma);
    let zetas = network.zetas();
    // Keep fast reactions that move at least one component coordinate.
    let reactions: Vec<usize> = (0..network.n_reactions())
        .filter(|&k| fast_reactions_mask[k] && component.iter().any(|&i| zetas[k][i] != 0))
        .collect();

    let y0: Vec<i64> = component.iter().map(|&i| frozen_slow[i].round() as i64).collect();
    if y0.iter().any(|&v| v < 0) {
        return Err(ReduceError::EmptyStateSpace);
    }

    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut states: Vec<Vec<i64>> = vec![y0.clone()];
    index.insert(y0, 0);
    let mut transitions: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut escape: Vec<f64> = Vec::new();
    let mut head = 0;
    while head < states.len() {
        let y = states[head].clone();
        let mut out = Vec::new();
        let mut esc = 0.0;
        let mut values = frozen_slow.to_vec();
        for (c, &i) in component.iter().enumerate() {
            values[i] = y[c] as f64;
        }
        for &k in &reactions {
            let rate = scaled_intensity(network, spec, k, &values);
            if rate <= 0.0 {
                continue;
            }
            let target: Vec<i64> =
                component.iter().enumerate().map(|(c, &i)| y[c] + zetas[k][i]).collect();
            if target.iter().any(|&v| v < 0) {
                continue;
            }
            if target.iter().any(|&v| v > truncation) {
                esc += rate;
                continue;
            }
            let ti = *index.entry(target.clone()).or_insert_with(|| {
                states.push(target.clone());
                states.len() - 1
            });
            out.push((ti, rate));
        }
        if states.len() > MAX_STATES {
            return Err(ReduceError::StateSpaceTooLarge {
                states: states.len(),
                limit: MAX_STATES,
            });
        }
        transitions.push(out);
        escape.push(esc);
        head += 1;
    }

    Ok(FastGenerator {
        fast_species: component.to_vec(),
        fast_reactions: reactions,
        states,
        transitions,
        escape,
        frozen_slow: frozen_slow.to_vec(),
    })
}

/// Solve pi Q = 0, sum pi = 1 on the truncated space by direct linear solve.
/// The tolerance is only used by the growth wrapper `equilibrium_for`.
pub fn stationary_distribution(gen: &FastGenerator, _tol: f64) -> Result<Equilibrium, ReduceError> {
    let n = gen.states.len();
    if n == 0 {
        return Err(ReduceError::EmptyStateSpace);
    }

    // Find the closed communicating classes of the truncated chain.
    let mut graph = petgraph::graph::DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (s, outs) in gen.transitions.iter().enumerate() {
        for &(t, rate) in outs {
            if rate > 0.0 && t != s {
                graph.add_edge(nodes[s], nodes[t], ());
            }
        }
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut scc_of = vec![0usize; n];
    for (ci, comp) in sccs.iter().enumerate() {
        for node in comp {
            scc_of[node.index()] = ci;
        }
    }
    let mut scc_closed = vec![true; sccs.len()];
    for (s, outs) in gen.transitions.iter().enumerate() {
        for &(t, rate) in outs {
            if rate > 0.0 && scc_of[t] != scc_of[s] {
                scc_closed[scc_of[s]] = false;
            }
        }
    }
    let closed: Vec<usize> =
        (0..sccs.len()).filter(|&c| scc_closed[c]).collect();
    if closed.len() != 1 {
        return Err(ReduceError::NotIrreducible { closed_classes: closed.len() });
    }
    let class = closed[0];
    let members: Vec<usize> =
        (0..n).filter(|&s| scc_of[s] == class).collect();
    let pos: HashMap<usize, usize> =
        members.iter().enumerate().map(|(p, &s)| (s, p)).collect();
    let m = members.len();

    // Solve Q^T pi = 0 restricted to the closed class, replacing the last
    // equation with the normalization sum pi = 1.
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (p, &s) in members.iter().enumerate() {
        let mut diag = 0.0;
        for &(t, rate) in &gen.transitions[s] {
            if t == s {
                continue;
            }
            diag += rate;
            if let Some(&q) = pos.get(&t) {
                a[(q, p)] += rate;
            }
        }
        a[(p, p)] -= diag;
    }
    for p in 0..m {
        a[(m - 1, p)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or(ReduceError::NotIrreducible { closed_classes: 0 })?;

    let mut probs = vec![0.0; n];
    for (p, &s) in members.iter().enumerate() {
        probs[s] = pi[p].max(0.0);
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }

    // Residual of the full (truncated) stationarity equations.
    let mut inflow = vec![0.0; n];
    let mut outflow = vec![0.0; n];
    for (s, outs) in gen.transitions.iter().enumerate() {
        for &(t, rate) in outs {
            if t == s {
                continue;
            }
            outflow[s] += probs[s] * rate;
            inflow[t] += probs[s] * rate;
        }
    }
    let residual = (0..n).map(|s| (inflow[s] - outflow[s]).abs()).fold(0.0, f64::max);

    let boundary_flux: f64 =
        gen.escape.iter().zip(&probs).map(|(e, p)| e * p).sum();
    let total_flux: f64 = outflow.iter().sum::<f64>() + boundary_flux;
    let truncation_mass_bound =
        if total_flux > 0.0 { boundary_flux / total_flux } else { 0.0 };

    let eq = Equilibrium {
        fast_species: gen.fast_species.clone(),
        support: gen.states.clone(),
        probs,
        residual,
        truncation_mass_bound,
    };
    Ok(eq)
}

/// Stationary law with the truncation grown until the boundary flux fraction
/// drops below `tol` (closed chains converge immediately).
pub fn equilibrium_for(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    frozen_slow: &[f64],
    tol: f64,
) -> Result<Equilibrium, ReduceError> {
    let (mask, _) = fast_sets(network, spec, gamma);
    let component: Vec<usize> = (0..network.n_species()).filter(|&i| mask[i]).collect();
    equilibrium_for_component(network, spec, gamma, frozen_slow, &component, tol)
}

pub fn equilibrium_for_component(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    frozen_slow: &[f64],
    component: &[usize],
    tol: f64,
) -> Result<Equilibrium, ReduceError> {
    let seed: i64 = component
        .iter()
        .map(|&i| frozen_slow[i].round() as i64)
        .max()
        .unwrap_or(0);
    let mut truncation = seed.max(16);
    loop {
        let gen = fast_generator_component(
            network,
            spec,
            gamma,
            frozen_slow,
            component,
            truncation,
        )?;
        let eq = stationary_distribution(&gen, tol)?;
        if eq.truncation_mass_bound < tol {
            return Ok(eq);
        }
        truncation *= 2;
    }
}

/// Expectation of the scaled intensity of reaction `k` under the fast-block
/// equilibrium, with slow coordinates frozen at `z`.
pub fn averaged_intensity(
    network: &Network,
    spec: &ScalingSpec,
    k: usize,
    equilibrium: &Equilibrium,
    z: &[f64],
) -> f64 {
    equilibrium.expectation(|y| {
        let mut values = z.to_vec();
        for (c, &i) in equilibrium.fast_species.iter().enumerate() {
            values[i] = y[c] as f64;
        }
        scaled_intensity(network, spec, k, &values)
    })
}

// ---------------------------------------------------------------------------
// Closed-form equilibria and reduced models for the worked examples.
// ---------------------------------------------------------------------------

/// Stationary law of the fast monomer-dimer pair (z1, z2) on the slice
/// z1 + 2 z2 = m: probabilities proportional to (k10/k9)^(z1+z2)/(z1! z2!).
pub fn goutsias_mu(m: u64, kappa9: f64, kappa10: f64) -> Equilibrium {
    assert!(kappa9 > 0.0 && kappa10 > 0.0);
    let log_r = (kappa10 / kappa9).ln();
    let mut support = Vec::new();
    let mut log_w = Vec::new();
    for z2 in 0..=(m / 2) {
        let z1 = m - 2 * z2;
        support.push(vec![z1 as i64, z2 as i64]);
        let mut lw = (z1 + z2) as f64 * log_r;
        for j in 1..=z1 {
            lw -= (j as f64).ln();
        }
        for j in 1..=z2 {
            lw -= (j as f64).ln();
        }
        log_w.push(lw);
    }
    let max_lw = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|lw| (lw - max_lw).exp()).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();

    // Stationarity residual under the dimerization flip chain.
    let idx = |z2: i64| -> Option<usize> {
        if z2 < 0 || 2 * z2 > m as i64 {
            None
        } else {
            Some(z2 as usize)
        }
    };
    let mut residual = 0.0f64;
    for (s, y) in support.iter().enumerate() {
        let (z1, z2) = (y[0], y[1]);
        let mut net = 0.0;
        // Outgoing: dimerization and dissociation.
        net -= probs[s] * (kappa9 * (z1 * (z1 - 1)) as f64 + kappa10 * z2 as f64);
        // Incoming from (z1 + 2, z2 - 1) via dimerization.
        if let Some(src) = idx(z2 - 1) {
            net += probs[src] * kappa9 * ((z1 + 2) * (z1 + 1)) as f64;
        }
        // Incoming from (z1 - 2, z2 + 1) via dissociation.
        if let Some(src) = idx(z2 + 1) {
            if z1 >= 2 {
                net += probs[src] * kappa10 * (z2 + 1) as f64;
            }
        }
        residual = residual.max(net.abs());
    }

    Equilibrium {
        fast_species: vec![0, 1],
        support,
        probs,
        residual,
        truncation_mass_bound: 0.0,
    }
}

/// alpha(m) = E[z2] under `goutsias_mu(m)`.
pub fn goutsias_alpha(m: u64, kappa9: f64, kappa10: f64) -> f64 {
    goutsias_mu(m, kappa9, kappa10).expectation(|y| y[1] as f64)
}

/// Moment-closure approximation of alpha(m): the root of
/// kappa10 a = kappa9 (m - 2a)(m - 2a - 1) lying in [0, m/2].
pub fn alpha_moment_closure(m: u64, kappa9: f64, kappa10: f64) -> Result<f64, ReduceError> {
    let mf = m as f64;
    // 4 k9 a^2 - (4 k9 m - 2 k9 + k10) a + k9 m (m - 1) = 0.
    let a = 4.0 * kappa9;
    let b = -(4.0 * kappa9 * mf - 2.0 * kappa9 + kappa10);
    let c = kappa9 * mf * (mf - 1.0);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(ReduceError::NoRootInRange { m });
    }
    // Numerically stable smaller root.
    let q = -0.5 * (b - disc.sqrt()); // b < 0, so this is the smaller root's q
    let root = c / q;
    let eps = 1e-9 * mf.max(1.0);
    if root < -eps || root > mf / 2.0 + eps {
        return Err(ReduceError::NoRootInRange { m });
    }
    Ok(root.clamp(0.0, mf / 2.0))
}

/// The deterministic fast equilibrium of the abundant monomer-dimer pair:
/// phi1 solves 2 k9 phi1^2 + k10 phi1 = k10 y and phi2 = (y - phi1)/2.
pub fn phi_pair(y: f64, kappa9: f64, kappa10: f64) -> (f64, f64) {
    assert!(y >= 0.0);
    let phi1 = ((kappa10 * kappa10 + 8.0 * kappa9 * kappa10 * y).sqrt() - kappa10)
        / (4.0 * kappa9);
    let phi2 = (y - phi1) / 2.0;
    (phi1, phi2)
}

/// Substrate drift of the reduced Michaelis-Menten dynamics:
/// dx1/dt = -M k1 k3 x1 / (k2 + k3 + k1 x1).
pub fn michaelis_menten_rhs(x1: f64, m_total: f64, kappa: &[f64; 3]) -> f64 {
    -m_total * kappa[0] * kappa[2] * x1 / (kappa[1] + kappa[2] + kappa[0] * x1)
}

/// Reduced two-variable jump model for the autocatalytic degradation chain:
/// Z1 decreases by 1 and Z3 increases by 2 at rate k1 k3/(k2+k3) Z1, with the
/// companion null channel at rate k1 k2/(k2+k3) Z1 exposed alongside.
pub fn mastny_reduced_model(
    kappa1: f64,
    kappa2: f64,
    kappa3: f64,
    z1_0: f64,
    z3_0: f64,
) -> LimitModel {
    use crate::network::{Reaction, Species};
    let species = vec![
        Species { index: 0, name: "S1".into() },
        Species { index: 1, name: "S3".into() },
    ];
    let lambda3 = kappa1 * kappa3 / (kappa2 + kappa3);
    let lambda2 = kappa1 * kappa2 / (kappa2 + kappa3);
    let mut conv = Reaction::new(vec![1, 0], vec![0, 2], lambda3);
    conv.label = Some("convert".into());
    let mut null = Reaction::new(vec![1, 0], vec![1, 0], lambda2);
    null.label = Some("companion".into());
    let network = Network::new(species, vec![conv, null], 1.0);
    let spec = ScalingSpec::new(
        &network,
        100.0,
        vec![BigRational::zero(); 2],
        vec![BigRational::zero(); 2],
    );
    let mut model =
        build_limit_model(&network, &spec, &BigRational::zero(), &[]).unwrap();
    model.z0 = Some(vec![z1_0, z3_0]);
    model
}

/// Averaged birth-death model for the mRNA count on the intermediate time
/// scale: birth at the averaged transcription rate (frozen slow state), death
/// linear in the count.
pub fn goutsias_rna_model(
    network: &Network,
    spec: &ScalingSpec,
    z12_0: f64,
    z45_0: f64,
    z3_0: f64,
) -> Result<LimitModel, ReduceError> {
    let gamma = BigRational::from_integer(1.into());
    let mut model = build_limit_model(network, spec, &gamma, &[])?;
    let k3 = spec.kappa[2];
    let k5 = spec.kappa[4];
    let k6 = spec.kappa[5];
    let (_, phi2) = phi_pair(z12_0, spec.kappa[8], spec.kappa[9]);
    let birth = k3 * k5 * phi2 * z45_0 / (k6 + k5 * phi2);
    model.set_averaged(
        2,
        format!("k3 k5 phi2(Z12(0)) Z45(0) / (k6 + k5 phi2(Z12(0))) = {birth:.6e}"),
        Arc::new(move |_z| birth),
    );
    model.warnings.push("averaged rates assume the fast block is stable".into());
    // Variable order: RNA then DNA_2D (frozen); seed initial values.
    let mut z0 = Vec::new();
    for var in &model.variables {
        match var.kind {
            VarKind::Species(2) => z0.push(z3_0),
            VarKind::Species(5) => z0.push(0.0),
            _ => z0.push(0.0),
        }
    }
    model.z0 = Some(z0);
    Ok(model)
}

/// The slow-scale hybrid model of the gene network: the total monomer mass
/// Z12 drifts deterministically, the bound-site pair (Z45, Z6) jumps, and all
/// fast species enter through their averaged equilibria.
pub fn goutsias_slow_model(
    network: &Network,
    spec: &ScalingSpec,
) -> Result<LimitModel, ReduceError> {
    use crate::rational::rat_from_i64;
    let gamma = BigRational::from_integer(2.into());
    let theta_a: Vec<BigRational> =
        [1, 2, 0, 0, 2, 4].iter().map(|&v| rat_from_i64(v)).collect();
    let theta_b: Vec<BigRational> =
        [0, 0, 0, 1, 1, 0].iter().map(|&v| rat_from_i64(v)).collect();
    let mut model = build_limit_model(network, spec, &gamma, &[theta_a, theta_b])?;

    let k = spec.kappa.clone();
    let (k9, k10) = (k[8], k[9]);
    // Variable positions: find Z6, aux Z12, aux Z45 in the variables list.
    let pos_z12 = model
        .variables
        .iter()
        .position(|v| v.kind == VarKind::Aux(0))
        .expect("aux Z12 retained");
    let pos_z45 = model
        .variables
        .iter()
        .position(|v| v.kind == VarKind::Aux(1))
        .expect("aux Z45 retained");

    // Averaged fast equilibria: Z1 -> phi1(Z12), Z2 -> phi2(Z12),
    // Z5 -> zbar5 = k5 phi2/(k6 + k5 phi2) * Z45, Z3 -> (k3/k4) zbar5.
    let zbar5 = {
        let (k5, k6) = (k[4], k[5]);
        move |z: &[f64]| {
            let (_, phi2) = phi_pair(z[pos_z12].max(0.0), k9, k10);
            k5 * phi2 / (k6 + k5 * phi2) * z[pos_z45]
        }
    };

    let k1 = k[0];
    let (k3, k4) = (k[2], k[3]);
    let zb = zbar5;
    model.set_averaged(
        0,
        "k1 (k3/k4) zbar5(Z12, Z45)",
        Arc::new(move |z| k1 * (k3 / k4) * zb(z)),
    );
    let k2 = k[1];
    model.set_averaged(
        1,
        "k2 phi1(Z12)",
        Arc::new(move |z| {
            let (phi1, _) = phi_pair(z[pos_z12].max(0.0), k9, k10);
            k2 * phi1
        }),
    );
    let k7 = k[6];
    let zb = zbar5;
    model.set_averaged(
        6,
        "k7 phi2(Z12) zbar5(Z12, Z45)",
        Arc::new(move |z| {
            let (_, phi2) = phi_pair(z[pos_z12].max(0.0), k9, k10);
            k7 * phi2 * zb(z)
        }),
    );
    model.warnings.push("averaged rates assume the fast block is stable".into());
    Ok(model)
}

/// Serialize a limit model to the network DSL plus an annotations block, so
/// the surviving jump part is itself parseable.
pub fn format_limit_model(model: &LimitModel) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "# limit model at gamma = {}", format_rational(&model.gamma));
    for var in &model.variables {
        let desc = match &var.state {
            VarState::Frozen => "frozen at its initial value".to_string(),
            VarState::Continuous { reactions } => format!(
                "continuous, drift via reactions {}",
                reactions.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", ")
            ),
            VarState::Discrete { reactions } => format!(
                "discrete, jumps via reactions {}",
                reactions.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", ")
            ),
        };
        match &var.kind {
            VarKind::Species(_) => {
                let _ = writeln!(out, "# variable {}: {}", var.name, desc);
            }
            VarKind::Aux(_) => {
                let _ = writeln!(out, "# auxiliary {}: {}", var.name, desc);
            }
        }
    }
    if !model.fast_block.species.is_empty() {
        let names: Vec<_> = model
            .fast_block
            .species
            .iter()
            .map(|&i| model.network.species[i].name.clone())
            .collect();
        let _ = writeln!(out, "# fast block: {}", names.join(", "));
    }
    for avg in model.averaged.values() {
        let _ = writeln!(
            out,
            "# averaged rate, reaction {}: {} (stability assumed)",
            avg.reaction + 1,
            avg.formula
        );
    }
    for w in &model.warnings {
        let _ = writeln!(out, "# warning: {w}");
    }

    // Emit the surviving jump reactions as a parseable network over the
    // discrete variables (species-kind only).
    let mut discrete_species = Vec::new();
    let mut jump_reactions = Vec::new();
    for var in &model.variables {
        if let (VarKind::Species(i), VarState::Discrete { reactions }) = (&var.kind, &var.state) {
            discrete_species.push(*i);
            for &k in reactions {
                if !jump_reactions.contains(&k) {
                    jump_reactions.push(k);
                }
            }
        }
    }
    jump_reactions.sort_unstable();
    if !discrete_species.is_empty() {
        let names: Vec<_> =
            discrete_species.iter().map(|&i| model.network.species[i].name.clone()).collect();
        let _ = writeln!(out, "species {}", names.join(", "));
        for &k in &jump_reactions {
            let reaction = &model.network.reactions[k];
            let side = |coeffs: &[u32]| -> String {
                let mut parts = Vec::new();
                for &i in &discrete_species {
                    let c = coeffs[i];
                    if c == 0 {
                        continue;
                    }
                    if c == 1 {
                        parts.push(model.network.species[i].name.clone());
                    } else {
                        parts.push(format!("{c} {}", model.network.species[i].name));
                    }
                }
                if parts.is_empty() {
                    "0".to_string()
                } else {
                    parts.join(" + ")
                }
            };
            let rate = model.spec.kappa[k];
            let _ = writeln!(
                out,
                "r{}: {} -> {} @ {}",
                k + 1,
                side(&reaction.nu),
                side(&reaction.nu_prime),
                rate
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::rational::rat_from_i64;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn goutsias_dimer_gamma0_structure() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_dimer_scaling(&network);
        let model =
            build_limit_model(&network, &spec, &BigRational::zero(), &[]).unwrap();
        assert!(model.fast_block.species.is_empty());
        let by_name: HashMap<_, _> =
            model.variables.iter().map(|v| (v.name.clone(), v.state.clone())).collect();
        assert_eq!(by_name["M"], VarState::Discrete { reactions: vec![8, 9] });
        assert_eq!(by_name["D"], VarState::Discrete { reactions: vec![8, 9] });
        for s in ["RNA", "DNA", "DNA_D", "DNA_2D"] {
            assert_eq!(by_name[s], VarState::Frozen, "{s}");
        }
        assert!(model.closed);
    }

    #[test]
    fn goutsias_abundance_gamma0_structure() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let model =
            build_limit_model(&network, &spec, &BigRational::zero(), &[]).unwrap();
        let by_name: HashMap<_, _> =
            model.variables.iter().map(|v| (v.name.clone(), v.state.clone())).collect();
        assert_eq!(by_name["M"], VarState::Continuous { reactions: vec![8, 9] });
        assert_eq!(by_name["D"], VarState::Continuous { reactions: vec![8, 9] });
        assert_eq!(by_name["DNA"], VarState::Discrete { reactions: vec![4, 5] });
        assert_eq!(by_name["DNA_D"], VarState::Discrete { reactions: vec![4, 5] });
        assert_eq!(by_name["RNA"], VarState::Frozen);
        assert_eq!(by_name["DNA_2D"], VarState::Frozen);
        assert!(model.closed);
    }

    #[test]
    fn classical_scaling_gamma0_all_continuous() {
        let network = gallery::goutsias_network();
        let spec = ScalingSpec::classical(&network, 100.0);
        let model =
            build_limit_model(&network, &spec, &BigRational::zero(), &[]).unwrap();
        assert!(model.fast_block.species.is_empty());
        for var in &model.variables {
            assert!(
                matches!(var.state, VarState::Continuous { .. }),
                "{} should be continuous",
                var.name
            );
        }
    }

    #[test]
    fn goutsias_pdmp_compiles_to_expected_drift() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let model =
            build_limit_model(&network, &spec, &BigRational::zero(), &[]).unwrap();
        let z0 = [0.02, 0.06, 0.0, 0.0, 2.0, 0.0];
        let hm = model.compile(&z0).unwrap();
        let k9 = spec.kappa[8];
        let k10 = spec.kappa[9];
        let k5 = spec.kappa[4];
        let k6 = spec.kappa[5];
        // Variables are in species order: M, D, RNA, DNA, DNA_D, DNA_2D.
        let z = [0.5, 0.3, 0.0, 1.0, 1.0, 0.0];
        let mut dz = vec![0.0; 6];
        (hm.drift)(0.0, &z, &mut dz);
        let expect_m = -2.0 * k9 * 0.25 + 2.0 * k10 * 0.3;
        assert!((dz[0] - expect_m).abs() < 1e-14);
        let expect_d = k9 * 0.25 - k10 * 0.3;
        assert!((dz[1] - expect_d).abs() < 1e-14);
        assert_eq!(dz[2], 0.0);
        assert_eq!(dz[5], 0.0);
        // Jump channels are reactions 5 and 6 with intensities k5*D*DNA, k6*DNA_D.
        assert_eq!(hm.channels.len(), 2);
        let i5 = (hm.channels[0].intensity)(0.0, &z);
        let i6 = (hm.channels[1].intensity)(0.0, &z);
        assert!((i5 - k5 * 0.3 * 1.0).abs() < 1e-14);
        assert!((i6 - k6 * 1.0).abs() < 1e-14);
        assert_eq!(hm.channels[0].delta[3], -1.0);
        assert_eq!(hm.channels[0].delta[4], 1.0);
        assert_eq!(hm.channels[1].delta[3], 1.0);
        assert_eq!(hm.channels[1].delta[4], -1.0);
    }

    #[test]
    fn goutsias_gamma1_needs_averaging() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let model =
            build_limit_model(&network, &spec, &BigRational::from_integer(1.into()), &[])
                .unwrap();
        // RNA jumps via reactions 3 and 4; reaction 3 reads the fast DNA_D.
        let by_name: HashMap<_, _> =
            model.variables.iter().map(|v| (v.name.clone(), v.state.clone())).collect();
        assert_eq!(by_name["RNA"], VarState::Discrete { reactions: vec![2, 3] });
        assert_eq!(by_name["DNA_2D"], VarState::Frozen);
        assert!(!model.closed);
        assert_eq!(model.unresolved_reactions(), vec![2]);
        // M, D, DNA, DNA_D are all eliminated as fast.
        assert_eq!(model.fast_block.species, vec![0, 1, 3, 4]);
    }

    #[test]
    fn goutsias_gamma2_aux_structure() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let theta_a: Vec<BigRational> =
            [1, 2, 0, 0, 2, 4].iter().map(|&v| rat_from_i64(v)).collect();
        let theta_b: Vec<BigRational> =
            [0, 0, 0, 1, 1, 0].iter().map(|&v| rat_from_i64(v)).collect();
        let model = build_limit_model(
            &network,
            &spec,
            &BigRational::from_integer(2.into()),
            &[theta_a, theta_b],
        )
        .unwrap();
        assert!(model.warnings.is_empty(), "{:?}", model.warnings);
        // Retained: DNA_2D plus the two auxiliaries.
        assert_eq!(model.variables.len(), 3);
        let by_kind: HashMap<_, _> =
            model.variables.iter().map(|v| (v.kind, v.state.clone())).collect();
        assert_eq!(
            by_kind[&VarKind::Species(5)],
            VarState::Discrete { reactions: vec![6, 7] }
        );
        assert_eq!(by_kind[&VarKind::Aux(0)], VarState::Continuous { reactions: vec![0, 1] });
        assert_eq!(by_kind[&VarKind::Aux(1)], VarState::Discrete { reactions: vec![6, 7] });
        assert_eq!(model.fast_block.species, vec![0, 1, 2, 3, 4]);
        assert!(!model.closed);
        // Initial values keep only the top-abundance species of each theta.
        let z0 = model.initial_from_species(&[0.02, 0.06, 0.0, 0.0, 2.0, 0.0]);
        assert!((z0[1] - 0.14).abs() < 1e-15); // 0.02 + 2*0.06
        assert!((z0[2] - 2.0).abs() < 1e-15); // DNA + DNA_D
    }

    #[test]
    fn aux_not_in_k2_rejected() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        // M alone is not conserved by the fast dimerization at gamma = 2.
        let theta: Vec<BigRational> =
            [1, 0, 0, 0, 0, 0].iter().map(|&v| rat_from_i64(v)).collect();
        let err = build_limit_model(
            &network,
            &spec,
            &BigRational::from_integer(2.into()),
            &[theta],
        )
        .unwrap_err();
        assert!(matches!(err, ReduceError::NotInK2 { aux: 0, .. }));
    }

    #[test]
    fn michaelis_menten_fast_block_binomial_mean() {
        let network = gallery::michaelis_menten_network();
        let spec = gallery::michaelis_menten_scaling(&network);
        let gamma = BigRational::zero();
        // Species order S, E, ES, P; E + ES = M = 5, x1 frozen at 2.0.
        let frozen = [2.0, 5.0, 0.0, 0.0];
        let eq = equilibrium_for(&network, &spec, &gamma, &frozen, 1e-10).unwrap();
        assert!(eq.truncation_mass_bound == 0.0);
        assert!(eq.residual < 1e-12);
        let (k1, k2, k3) = (spec.kappa[0], spec.kappa[1], spec.kappa[2]);
        let p = k1 * 2.0 / (k1 * 2.0 + k2 + k3);
        let es_pos = eq.fast_species.iter().position(|&i| i == 2).unwrap();
        let mean_es = eq.expectation(|y| y[es_pos] as f64);
        assert!((mean_es - 5.0 * p).abs() < 1e-10, "mean {mean_es} vs {}", 5.0 * p);
        // Averaged product rate reproduces the closed-form drift.
        let avg = averaged_intensity(&network, &spec, 2, &eq, &frozen);
        let rhs = -michaelis_menten_rhs(2.0, 5.0, &[k1, k2, k3]);
        assert!((avg - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn relay_fast_chain_is_poisson() {
        let network = gallery::relay_network();
        let spec = gallery::relay_scaling(&network);
        let gamma = rat(-1, 1);
        // S1 fast; S2 frozen at 3.0 (abundance-scaled).
        let frozen = [0.0, 3.0];
        let eq = equilibrium_for(&network, &spec, &gamma, &frozen, 1e-12).unwrap();
        let birth = spec.kappa[0] + spec.kappa[2] * 3.0;
        let death = spec.kappa[1];
        let mean = birth / death;
        // Total variation distance against the Poisson law.
        let mut tv = 0.0;
        for (y, p) in eq.support.iter().zip(&eq.probs) {
            let z = y[0];
            let mut lp = -mean;
            for j in 1..=z {
                lp += (mean / j as f64).ln();
            }
            tv += 0.5 * (p - lp.exp()).abs();
        }
        assert!(tv < 1e-8, "tv = {tv:e}, mean = {mean}");
    }

    #[test]
    fn goutsias_flip_chain_is_binomial() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let gamma = BigRational::from_integer(1.into());
        // Component (DNA, DNA_D), total n = 2, with D frozen at phi2.
        let k9 = spec.kappa[8];
        let k10 = spec.kappa[9];
        let (_, phi2) = phi_pair(0.14, k9, k10);
        let frozen = [0.0, phi2, 0.0, 0.0, 2.0, 0.0];
        let eq = equilibrium_for_component(&network, &spec, &gamma, &frozen, &[3, 4], 1e-12)
            .unwrap();
        let k5 = spec.kappa[4];
        let k6 = spec.kappa[5];
        let p4 = k6 / (k6 + k5 * phi2); // P(site in DNA form)
        let dna_pos = eq.fast_species.iter().position(|&i| i == 3).unwrap();
        for (y, prob) in eq.support.iter().zip(&eq.probs) {
            let z4 = y[dna_pos];
            let binom = match z4 {
                0 => (1.0 - p4) * (1.0 - p4),
                1 => 2.0 * p4 * (1.0 - p4),
                2 => p4 * p4,
                _ => panic!("state outside conservation slice"),
            };
            assert!((prob - binom).abs() < 1e-10, "z4 = {z4}");
        }
    }

    #[test]
    fn stationary_poisson_birth_death_direct() {
        // Constant birth, linear death via the relay network at its fast scale.
        let network = gallery::relay_network();
        let spec = gallery::relay_scaling(&network);
        let gamma = rat(-1, 1);
        let frozen = [0.0, 0.0];
        let mean = spec.kappa[0] / spec.kappa[1];
        let eq = equilibrium_for(&network, &spec, &gamma, &frozen, 1e-12).unwrap();
        let mut tv = 0.0;
        for (y, p) in eq.support.iter().zip(&eq.probs) {
            let z = y[0];
            let mut lp = -mean;
            for j in 1..=z {
                lp += (mean / j as f64).ln();
            }
            tv += 0.5 * (p - lp.exp()).abs();
        }
        assert!(tv < 1e-8, "tv = {tv:e}");
    }

    #[test]
    fn phi_pair_identities() {
        let (k9, k10) = (8.30, 0.500);
        let (phi1, phi2) = phi_pair(1.0, k9, k10);
        assert!((phi1 - 0.159145).abs() < 1e-6);
        assert!((phi2 - 0.420428).abs() < 1e-6);
        for i in 0..=1000 {
            let y = i as f64 * 0.1;
            let (p1, p2) = phi_pair(y, k9, k10);
            assert!((p1 + 2.0 * p2 - y).abs() < 1e-10, "y = {y}");
            assert!((k9 * p1 * p1 - k10 * p2).abs() < 1e-10, "y = {y}");
        }
        assert_eq!(phi_pair(0.0, k9, k10), (0.0, 0.0));
    }

    #[test]
    fn goutsias_mu_small_m() {
        let (k9, k10) = (0.0830, 0.500);
        let eq = goutsias_mu(0, k9, k10);
        assert_eq!(eq.support, vec![vec![0, 0]]);
        assert_eq!(eq.probs, vec![1.0]);

        let eq = goutsias_mu(2, k9, k10);
        let r = k10 / k9;
        let expect = r / (r * r / 2.0 + r);
        let p01 = eq
            .support
            .iter()
            .zip(&eq.probs)
            .find(|(y, _)| y.as_slice() == [0, 1])
            .unwrap()
            .1;
        assert!((p01 - expect).abs() < 1e-12);
        assert!((expect - 0.24925).abs() < 1e-4);
        assert!(eq.residual < 1e-12);
    }

    #[test]
    fn goutsias_alpha_values_and_identities() {
        let (k9, k10) = (0.0830, 0.500);
        let r = k10 / k9;
        assert_eq!(goutsias_alpha(1, k9, k10), 0.0);
        assert!((goutsias_alpha(2, k9, k10) - 2.0 / (r + 2.0)).abs() < 1e-12);
        assert!((goutsias_alpha(3, k9, k10) - 6.0 / (r + 6.0)).abs() < 1e-12);
        for m in 0..=100u64 {
            let eq = goutsias_mu(m, k9, k10);
            let alpha = goutsias_alpha(m, k9, k10);
            // Detailed-balance identity: k10 E[z2] = k9 E[z1 (z1 - 1)].
            let lhs = k10 * alpha;
            let rhs = k9 * eq.expectation(|y| (y[0] * (y[0] - 1)) as f64);
            assert!((lhs - rhs).abs() < 1e-10 * lhs.max(1.0), "m = {m}");
            // Mean monomer count: E[z1] = m - 2 alpha(m), exactly.
            let ez1 = eq.expectation(|y| y[0] as f64);
            assert!((ez1 - (m as f64 - 2.0 * alpha)).abs() < 1e-9, "m = {m}");
        }
    }

    #[test]
    fn moment_closure_root_in_range_and_converging() {
        let (k9, k10) = (0.0830, 0.500);
        assert_eq!(alpha_moment_closure(0, k9, k10).unwrap(), 0.0);
        // m = 2: root of 0.5 a = 0.083 (2 - 2a)(1 - 2a) in [0, 1].
        let a2 = alpha_moment_closure(2, k9, k10).unwrap();
        let lhs = k10 * a2;
        let rhs = k9 * (2.0 - 2.0 * a2) * (1.0 - 2.0 * a2);
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&a2));
        // Relative error against the exact alpha shrinks with m.
        let rel = |m: u64| {
            let exact = goutsias_alpha(m, k9, k10);
            (alpha_moment_closure(m, k9, k10).unwrap() - exact).abs() / exact
        };
        assert!(rel(200) < rel(20));
    }

    #[test]
    fn michaelis_menten_rhs_values() {
        assert_eq!(michaelis_menten_rhs(0.0, 5.0, &[1.0, 1.0, 1.0]), 0.0);
        assert!((michaelis_menten_rhs(1.0, 1.0, &[1.0, 1.0, 1.0]) + 1.0 / 3.0).abs() < 1e-15);
        // Saturation at large substrate.
        let v = michaelis_menten_rhs(1e6, 2.0, &[1.0, 1.0, 3.0]);
        assert!((v + 2.0 * 3.0).abs() / 6.0 < 1e-4);
    }

    #[test]
    fn mastny_reduced_model_structure() {
        let model = mastny_reduced_model(1.0, 1.0, 1.0, 100.0, 0.0);
        assert!(model.closed);
        assert_eq!(model.variables.len(), 2);
        for var in &model.variables {
            assert!(matches!(var.state, VarState::Discrete { .. }));
        }
        // Effective conversion rate constant and companion ratio.
        assert!((model.network.reactions[0].rate_const - 0.5).abs() < 1e-15);
        let ratio = model.network.reactions[1].rate_const / model.network.reactions[0].rate_const;
        assert!((ratio - 1.0).abs() < 1e-15); // k2/k3 with k2 = k3 = 1
        let hm = model.compile(&[100.0, 0.0]).unwrap();
        // Only the conversion channel moves state: delta (-1, +2).
        let conv = hm.channels.iter().find(|c| c.label == "convert").unwrap();
        assert_eq!(conv.delta, vec![-1.0, 2.0]);
        assert!((conv.intensity)(0.0, &[100.0, 0.0]) - 50.0 < 1e-12);
        // Frozen-at-zero start freezes the model.
        let hm0 = mastny_reduced_model(1.0, 1.0, 1.0, 0.0, 0.0).compile(&[0.0, 0.0]).unwrap();
        assert_eq!(hm0.total_jump_intensity(0.0, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn rna_model_birth_death_rates() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let model = goutsias_rna_model(&network, &spec, 0.14, 2.0, 0.0).unwrap();
        assert!(model.closed);
        let hm = model.compile(&[0.0; 6]).unwrap();
        let (k3, k5, k6) = (spec.kappa[2], spec.kappa[4], spec.kappa[5]);
        let (_, phi2) = phi_pair(0.14, spec.kappa[8], spec.kappa[9]);
        let birth_expect = k3 * k5 * phi2 * 2.0 / (k6 + k5 * phi2);
        let z = hm.z0.clone();
        let birth: f64 = hm
            .channels
            .iter()
            .filter(|c| c.delta[0] > 0.0)
            .map(|c| (c.intensity)(0.0, &z))
            .sum();
        assert!((birth - birth_expect).abs() < 1e-12);
        // Death rate is k4 * Z3.
        let mut z2 = z.clone();
        z2[0] = 7.0;
        let death: f64 = hm
            .channels
            .iter()
            .filter(|c| c.delta[0] < 0.0)
            .map(|c| (c.intensity)(0.0, &z2))
            .sum();
        assert!((death - spec.kappa[3] * 7.0).abs() < 1e-12);
    }

    #[test]
    fn slow_model_matches_displayed_system() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let model = goutsias_slow_model(&network, &spec).unwrap();
        assert!(model.closed);
        let z0_species = [0.02, 0.06, 0.0, 0.0, 2.0, 0.0];
        let hm = model.compile(&z0_species).unwrap();
        assert_eq!(hm.n_vars(), 3);
        // Variable order: Z6 (species), Z12 (aux 0), Z45 (aux 1).
        assert!((hm.z0[1] - 0.14).abs() < 1e-15);
        assert!((hm.z0[2] - 2.0).abs() < 1e-15);
        assert_eq!(hm.z0[0], 0.0);
        let k = &spec.kappa;
        let z = [0.0, 0.14, 2.0];
        let (phi1, phi2) = phi_pair(0.14, k[8], k[9]);
        let zbar5 = k[4] * phi2 / (k[5] + k[4] * phi2) * 2.0;
        let mut dz = vec![0.0; 3];
        (hm.drift)(0.0, &z, &mut dz);
        let expect = k[0] * (k[2] / k[3]) * zbar5 - k[1] * phi1;
        assert!((dz[1] - expect).abs() < 1e-12, "dz12 = {} vs {}", dz[1], expect);
        assert_eq!(dz[0], 0.0);
        assert_eq!(dz[2], 0.0);
        // Channels: reaction 7 moves (Z45 - 1, Z6 + 1), reaction 8 reverses.
        assert_eq!(hm.channels.len(), 2);
        let c7 = &hm.channels[0];
        let c8 = &hm.channels[1];
        assert_eq!(c7.delta, vec![1.0, 0.0, -1.0]);
        assert_eq!(c8.delta, vec![-1.0, 0.0, 1.0]);
        assert!(((c7.intensity)(0.0, &z) - k[6] * phi2 * zbar5).abs() < 1e-12);
        let zb = [1.0, 0.14, 1.0];
        assert!(((c8.intensity)(0.0, &zb) - k[7] * 1.0).abs() < 1e-12);
    }

    #[test]
    fn format_round_trip_of_jump_part() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_dimer_scaling(&network);
        let model = build_limit_model(&network, &spec, &BigRational::zero(), &[]).unwrap();
        let text = format_limit_model(&model);
        assert!(text.contains("# limit model at gamma = 0"));
        assert!(text.contains("frozen"));
        let parsed = crate::parse::parse_network(&text);
        assert!(!parsed.has_errors(), "{:?}", parsed.diagnostics);
        let reparsed = parsed.value.unwrap();
        assert_eq!(reparsed.n_species(), 2); // M and D survive
        assert_eq!(reparsed.n_reactions(), 2); // reactions 9 and 10
    }

    #[test]
    fn term_classification_exhaustive_exclusive() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let model = build_limit_model(&network, &spec, &BigRational::zero(), &[]).unwrap();
        let zetas = network.zetas();
        let mut count = 0;
        for i in 0..network.n_species() {
            for k in 0..network.n_reactions() {
                if zetas[k][i] != 0 {
                    count += 1;
                }
            }
        }
        assert_eq!(model.term_classes.len(), count);
    }

    #[test]
    fn averaged_intensity_of_slow_only_reaction_unchanged() {
        let network = gallery::michaelis_menten_network();
        let spec = gallery::michaelis_menten_scaling(&network);
        let gamma = BigRational::zero();
        let frozen = [1.5, 3.0, 0.0, 0.0];
        let eq = equilibrium_for(&network, &spec, &gamma, &frozen, 1e-10).unwrap();
        // Reaction 2 reads only ES (fast), reaction 1 reads S and E.
        // A hypothetical reaction reading only S would be unchanged; emulate by
        // comparing expectation of the constant part.
        let c = eq.expectation(|_| 42.0);
        assert!((c - 42.0).abs() < 1e-12);
    }
}
