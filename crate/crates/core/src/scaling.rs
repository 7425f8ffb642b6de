//! Multiscale exponent analysis: species and collective balance conditions,
//! natural time scales, sign-class enumeration over the stoichiometric cone,
//! and the two-scale summary (r1, K2 generators, r2).
//!
//! Conventions: abundance exponents alpha_i >= 0, rate exponents beta_k,
//! reaction exponents rho_k = beta_k + nu_k . alpha. At time-scale exponent
//! gamma the species i content of reaction k moves at order
//! N^(gamma + rho_k - alpha_i). A linear combination theta >= 0 is balanced
//! when its maximal production and consumption exponents agree; otherwise it
//! constrains gamma by gamma <= gamma_theta.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::cone;
use crate::lp::{self, Cmp, Constraint};
use crate::network::Network;
use crate::rational::{ext_sub, rat_from_i64, rat_to_f64, Ext};

pub const DEFAULT_SIGN_BUDGET: usize = 531_441; // 3^12 leaves per component

/// Exponent assignment (N0, alpha, beta) with the derived normalized rates
/// kappa and reaction exponents rho.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSpec {
    pub n0: f64,
    pub alpha: Vec<BigRational>,
    pub beta: Vec<BigRational>,
    /// kappa_k = kappa'_k N0^(-beta_k).
    pub kappa: Vec<f64>,
    /// rho_k = beta_k + nu_k . alpha, exact.
    pub rho: Vec<BigRational>,
}

impl ScalingSpec {
    pub fn new(
        network: &Network,
        n0: f64,
        alpha: Vec<BigRational>,
        beta: Vec<BigRational>,
    ) -> Self {
        assert!(n0 > 1.0, "N0 must exceed 1");
        assert_eq!(alpha.len(), network.n_species());
        assert_eq!(beta.len(), network.n_reactions());
        assert!(alpha.iter().all(|a| !a.is_negative()), "alpha must be nonnegative");
        let kappa: Vec<f64> = network
            .reactions
            .iter()
            .zip(&beta)
            .map(|(r, b)| r.rate_const * n0.powf(-rat_to_f64(b)))
            .collect();
        let rho: Vec<BigRational> = network
            .reactions
            .iter()
            .zip(&beta)
            .map(|(r, b)| {
                let dot: BigRational = r
                    .nu
                    .iter()
                    .zip(&alpha)
                    .map(|(&nu, a)| a * rat_from_i64(i64::from(nu)))
                    .sum();
                b + dot
            })
            .collect();
        ScalingSpec { n0, alpha, beta, kappa, rho }
    }

    /// Classical scaling: every alpha_i = 1, beta_k = 0 for order <= 1 and
    /// -1 for binary reactions, so all rho_k = 1 and the N -> infinity limit
    /// is the mass-action ODE.
    pub fn classical(network: &Network, n0: f64) -> Self {
        let alpha = vec![rat_from_i64(1); network.n_species()];
        let beta = network
            .reactions
            .iter()
            .map(|r| if r.order() >= 2 { rat_from_i64(-1) } else { rat_from_i64(0) })
            .collect();
        ScalingSpec::new(network, n0, alpha, beta)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScalingError {
    #[error("species {0} appears in no reaction's net change")]
    IsolatedSpecies(usize),
    #[error("sign-class enumeration exceeded the budget of {budget} leaves")]
    SearchBudgetExceeded { budget: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BalanceVerdict {
    Balanced,
    ConstraintSatisfied { bound: Ext },
    ConstraintViolated { bound: Ext },
}

impl BalanceVerdict {
    pub fn is_balanced(&self) -> bool {
        matches!(self, BalanceVerdict::Balanced)
    }
}

/// Reactions that produce (+) and consume (-) theta . X, by sign of
/// theta . zeta_k.
fn theta_gamma_sets(network: &Network, theta: &[BigRational]) -> (Vec<usize>, Vec<usize>) {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (k, zeta) in network.zetas().iter().enumerate() {
        let dot: BigRational = theta
            .iter()
            .zip(zeta)
            .map(|(t, &z)| t * rat_from_i64(z))
            .sum();
        if dot.is_positive() {
            plus.push(k);
        } else if dot.is_negative() {
            minus.push(k);
        }
    }
    (plus, minus)
}

fn species_gamma_sets(network: &Network, i: usize) -> (Vec<usize>, Vec<usize>) {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (k, zeta) in network.zetas().iter().enumerate() {
        if zeta[i] > 0 {
            plus.push(k);
        } else if zeta[i] < 0 {
            minus.push(k);
        }
    }
    (plus, minus)
}

fn max_rho<'a>(spec: &'a ScalingSpec, ks: impl Iterator<Item = &'a usize>) -> Ext {
    Ext::max_of(ks.map(|&k| &spec.rho[k]))
}

/// Natural time-scale exponent gamma_i = alpha_i - max rho over the reactions
/// that change species i.
pub fn species_timescale(
    network: &Network,
    spec: &ScalingSpec,
    i: usize,
) -> Result<BigRational, ScalingError> {
    let (plus, minus) = species_gamma_sets(network, i);
    let m = max_rho(spec, plus.iter().chain(minus.iter()));
    match m {
        Ext::Finite(v) => Ok(&spec.alpha[i] - v),
        _ => Err(ScalingError::IsolatedSpecies(i)),
    }
}

/// Species balance: max rho over producing reactions equals max rho over
/// consuming reactions (empty max = -inf; -inf = -inf is balanced). When
/// unbalanced the verdict compares gamma against gamma_i.
pub fn check_species_balance(
    network: &Network,
    spec: &ScalingSpec,
    i: usize,
    gamma: &BigRational,
) -> BalanceVerdict {
    let (plus, minus) = species_gamma_sets(network, i);
    let mp = max_rho(spec, plus.iter());
    let mm = max_rho(spec, minus.iter());
    if mp == mm {
        return BalanceVerdict::Balanced;
    }
    let bound = ext_sub(&spec.alpha[i], &Ext::max_of([&mp, &mm].into_iter().filter_map(|e| e.as_finite())));
    if Ext::Finite(gamma.clone()) <= bound {
        BalanceVerdict::ConstraintSatisfied { bound }
    } else {
        BalanceVerdict::ConstraintViolated { bound }
    }
}

/// gamma_theta = max over supp(theta) of alpha_i, minus max rho over the
/// reactions that move theta . X; +inf when theta . X is conserved.
pub fn theta_timescale(network: &Network, spec: &ScalingSpec, theta: &[BigRational]) -> Ext {
    assert!(theta.iter().any(|t| t.is_positive()), "theta must be nonzero");
    assert!(theta.iter().all(|t| !t.is_negative()), "theta must be nonnegative");
    let (plus, minus) = theta_gamma_sets(network, theta);
    let m = max_rho(spec, plus.iter().chain(minus.iter()));
    let alpha_max = Ext::max_of(
        theta
            .iter()
            .zip(&spec.alpha)
            .filter(|(t, _)| t.is_positive())
            .map(|(_, a)| a),
    );
    let Ext::Finite(a) = alpha_max else { unreachable!("nonzero theta has support") };
    ext_sub(&a, &m)
}

/// Collective balance for theta . X: the maximal production and consumption
/// exponents must agree; otherwise gamma is checked against gamma_theta.
pub fn check_collective_balance(
    network: &Network,
    spec: &ScalingSpec,
    theta: &[BigRational],
    gamma: &BigRational,
) -> BalanceVerdict {
    let (plus, minus) = theta_gamma_sets(network, theta);
    let mp = max_rho(spec, plus.iter());
    let mm = max_rho(spec, minus.iter());
    if mp == mm {
        return BalanceVerdict::Balanced;
    }
    let bound = theta_timescale(network, spec, theta);
    if Ext::Finite(gamma.clone()) <= bound {
        BalanceVerdict::ConstraintSatisfied { bound }
    } else {
        BalanceVerdict::ConstraintViolated { bound }
    }
}

/// Maximal strongly connected components of the directed species graph with
/// an edge S_i -> S_j whenever some reaction consumes S_i and produces S_j
/// (catalysts give self-edges). Components are listed with species indices
/// ascending, ordered by smallest member.
pub fn scc_decompose(network: &Network) -> Vec<Vec<usize>> {
    let mut graph: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<_> = (0..network.n_species()).map(|_| graph.add_node(())).collect();
    for r in &network.reactions {
        for (i, &nu) in r.nu.iter().enumerate() {
            if nu == 0 {
                continue;
            }
            for (j, &nup) in r.nu_prime.iter().enumerate() {
                if nup > 0 {
                    graph.update_edge(nodes[i], nodes[j], ());
                }
            }
        }
    }
    let mut sccs: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|comp| {
            let mut ids: Vec<usize> = comp.into_iter().map(|n| n.index()).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    sccs.sort_by_key(|c| c[0]);
    sccs
}

/// A partition of the reactions by the sign of theta . zeta_k over a cone of
/// admissible theta, together with a witness in the cone's interior pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SignClass {
    pub gamma_minus: Vec<usize>,
    pub gamma_plus: Vec<usize>,
    pub gamma_zero: Vec<usize>,
    pub witness: Option<Vec<BigRational>>,
    pub feasible: bool,
}

/// Net change vectors grouped by ray: reactions whose zeta vectors are
/// positive or negative multiples of each other always receive tied signs, so
/// one representative per ray is enumerated.
struct RayGroup {
    /// Reduced direction restricted to the support (coprime, first nonzero
    /// entry positive).
    rep: Vec<i64>,
    /// (reaction index, +1 when zeta points along rep, -1 when opposite).
    members: Vec<(usize, i8)>,
}

fn ray_groups(network: &Network, support: &[bool]) -> (Vec<RayGroup>, Vec<usize>) {
    let mut groups: Vec<RayGroup> = Vec::new();
    let mut forced_zero = Vec::new();
    for (k, zeta) in network.zetas().iter().enumerate() {
        let proj: Vec<i64> = zeta
            .iter()
            .enumerate()
            .map(|(i, &z)| if support[i] { z } else { 0 })
            .collect();
        if proj.iter().all(|&z| z == 0) {
            forced_zero.push(k);
            continue;
        }
        let g = proj.iter().fold(0i64, |acc, &z| num_integer::gcd(acc, z.abs()));
        let mut rep: Vec<i64> = proj.iter().map(|&z| z / g).collect();
        let mut rel = 1i8;
        if let Some(first) = rep.iter().find(|&&z| z != 0) {
            if *first < 0 {
                rep.iter_mut().for_each(|z| *z = -*z);
                rel = -1;
            }
        }
        match groups.iter_mut().find(|grp| grp.rep == rep) {
            Some(grp) => grp.members.push((k, rel)),
            None => groups.push(RayGroup { rep, members: vec![(k, rel)] }),
        }
    }
    (groups, forced_zero)
}

/// Cone-membership constraints for a support-restricted nonzero theta.
fn base_constraints(n: usize, support: &[bool]) -> Vec<Constraint> {
    let mut cs = Vec::new();
    for i in 0..n {
        if !support[i] {
            let mut coeffs = vec![BigRational::zero(); n];
            coeffs[i] = rat_from_i64(1);
            cs.push(Constraint::new(coeffs, Cmp::Eq, BigRational::zero()));
        }
    }
    let sum: Vec<BigRational> = (0..n)
        .map(|i| if support[i] { rat_from_i64(1) } else { BigRational::zero() })
        .collect();
    cs.push(Constraint::new(sum, Cmp::Ge, rat_from_i64(1)));
    cs
}

fn sign_constraint(rep: &[i64], sign: i8) -> Constraint {
    let coeffs: Vec<BigRational> = rep.iter().map(|&z| rat_from_i64(z)).collect();
    match sign {
        1 => Constraint::new(coeffs, Cmp::Ge, rat_from_i64(1)),
        -1 => Constraint::new(coeffs, Cmp::Le, rat_from_i64(-1)),
        _ => Constraint::new(coeffs, Cmp::Eq, BigRational::zero()),
    }
}

/// Enumerate the feasible sign classes of theta with support in `support`.
/// Depth-first over ray groups with incremental infeasibility pruning; the
/// budget caps the number of leaves reached.
pub fn enumerate_sign_classes(
    network: &Network,
    support: &[bool],
    budget: usize,
) -> Result<Vec<SignClass>, ScalingError> {
    assert_eq!(support.len(), network.n_species());
    if !support.iter().any(|&s| s) {
        return Ok(Vec::new());
    }
    let n = network.n_species();
    let (groups, forced_zero) = ray_groups(network, support);
    let base = base_constraints(n, support);

    struct Dfs<'a> {
        network: &'a Network,
        groups: &'a [RayGroup],
        forced_zero: &'a [usize],
        support: &'a [bool],
        n: usize,
        budget: usize,
        leaves: usize,
        out: Vec<SignClass>,
    }

    impl Dfs<'_> {
        fn recurse(
            &mut self,
            depth: usize,
            signs: &mut Vec<i8>,
            constraints: &mut Vec<Constraint>,
        ) -> Result<(), ScalingError> {
            let feasible = lp::feasible_point(self.n, constraints);
            if depth == self.groups.len() {
                self.leaves += 1;
                if self.leaves > self.budget {
                    return Err(ScalingError::SearchBudgetExceeded { budget: self.budget });
                }
                if let Some(theta) = feasible {
                    self.emit(signs, theta);
                }
                return Ok(());
            }
            if feasible.is_none() {
                // Count the pruned subtree's leaves against the budget so the
                // cap reflects the unpruned partition count order.
                self.leaves += 1;
                if self.leaves > self.budget {
                    return Err(ScalingError::SearchBudgetExceeded { budget: self.budget });
                }
                return Ok(());
            }
            for sign in [1i8, -1, 0] {
                signs.push(sign);
                constraints.push(sign_constraint(&self.groups[depth].rep, sign));
                let r = self.recurse(depth + 1, signs, constraints);
                constraints.pop();
                signs.pop();
                r?;
            }
            Ok(())
        }

        fn emit(&mut self, signs: &[i8], theta: Vec<BigRational>) {
            let mut gamma_plus = Vec::new();
            let mut gamma_minus = Vec::new();
            let mut gamma_zero: Vec<usize> = self.forced_zero.to_vec();
            for (g, &s) in self.groups.iter().zip(signs) {
                for &(k, rel) in &g.members {
                    match s * rel {
                        1 => gamma_plus.push(k),
                        -1 => gamma_minus.push(k),
                        _ => gamma_zero.push(k),
                    }
                }
            }
            gamma_plus.sort_unstable();
            gamma_minus.sort_unstable();
            gamma_zero.sort_unstable();
            debug_assert!(witness_matches(
                self.network,
                self.support,
                &theta,
                &gamma_plus,
                &gamma_minus,
            ));
            self.out.push(SignClass {
                gamma_minus,
                gamma_plus,
                gamma_zero,
                witness: Some(theta),
                feasible: true,
            });
        }
    }

    let mut dfs = Dfs {
        network,
        groups: &groups,
        forced_zero: &forced_zero,
        support,
        n,
        budget,
        leaves: 0,
        out: Vec::new(),
    };
    let mut constraints = base;
    dfs.recurse(0, &mut Vec::new(), &mut constraints)?;
    Ok(dfs.out)
}

/// Exact substitution check used before a witness is reported.
fn witness_matches(
    network: &Network,
    support: &[bool],
    theta: &[BigRational],
    gamma_plus: &[usize],
    gamma_minus: &[usize],
) -> bool {
    if theta
        .iter()
        .enumerate()
        .any(|(i, t)| t.is_negative() || (!support[i] && !t.is_zero()))
    {
        return false;
    }
    let (plus, minus) = theta_gamma_sets(network, theta);
    plus == gamma_plus && minus == gamma_minus
}

/// One enumerated class with its balance verdict. `bound` is the sharpest
/// gamma_theta over the class's cone and is reported for unbalanced classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassVerdict {
    pub class: SignClass,
    pub support: Vec<usize>,
    pub balanced: bool,
    pub bound: Option<Ext>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub gamma: BigRational,
    pub species_verdicts: Vec<BalanceVerdict>,
    /// gamma_i per species; +inf for isolated species.
    pub natural_timescales: Vec<Ext>,
    pub class_verdicts: Vec<ClassVerdict>,
    /// min over unbalanced classes of gamma_theta; +inf when every class is
    /// balanced.
    pub max_admissible_gamma: Ext,
    pub r1: Ext,
    pub k2_generators: Vec<Vec<BigRational>>,
    pub r2: Ext,
    pub admissible: bool,
}

/// Sharpest bound over a sign class's cone: the smallest attainable value of
/// max over supp(theta) of alpha_i, minus the class's fixed max rho. The
/// minimum is found by restricting the support to species with alpha_i <= a
/// for each candidate level a.
fn class_bound(
    network: &Network,
    spec: &ScalingSpec,
    class: &SignClass,
    support: &[bool],
) -> Ext {
    let m = max_rho(spec, class.gamma_plus.iter().chain(class.gamma_minus.iter()));
    let n = network.n_species();
    let mut levels: Vec<&BigRational> = spec
        .alpha
        .iter()
        .enumerate()
        .filter(|(i, _)| support[*i])
        .map(|(_, a)| a)
        .collect();
    levels.sort();
    levels.dedup();
    let zetas = network.zetas();
    for a in levels {
        let allowed: Vec<bool> = (0..n).map(|i| support[i] && spec.alpha[i] <= *a).collect();
        let mut cs = base_constraints(n, &allowed);
        for &k in &class.gamma_plus {
            cs.push(sign_constraint(&zetas[k], 1));
        }
        for &k in &class.gamma_minus {
            cs.push(sign_constraint(&zetas[k], -1));
        }
        for &k in &class.gamma_zero {
            cs.push(sign_constraint(&zetas[k], 0));
        }
        if lp::feasible_point(n, &cs).is_some() {
            return ext_sub(a, &m);
        }
    }
    unreachable!("class is feasible at its full support level");
}

/// Fast reactions at level r1 per species: k with zeta_ik != 0 and
/// alpha_i - rho_k = r1.
fn r1_fast_structure(network: &Network, spec: &ScalingSpec, r1: &Ext) -> (Vec<usize>, Vec<bool>) {
    let mut fast = Vec::new();
    let mut l1 = vec![false; network.n_species()];
    let Ext::Finite(r1) = r1 else {
        return (fast, l1);
    };
    for (k, zeta) in network.zetas().iter().enumerate() {
        let mut is_fast = false;
        for (i, &z) in zeta.iter().enumerate() {
            if z != 0 && &(&spec.alpha[i] - &spec.rho[k]) == r1 {
                l1[i] = true;
                is_fast = true;
            }
        }
        if is_fast {
            fast.push(k);
        }
    }
    (fast, l1)
}

/// Generators of K2 = { theta >= 0 : theta . P1 zeta_k = 0 for every r1-fast
/// reaction }, where P1 projects onto the species moving at scale r1, and
/// r2 = min over generators of gamma_theta.
pub fn compute_k2_r2(
    network: &Network,
    spec: &ScalingSpec,
) -> (Vec<Vec<BigRational>>, Ext) {
    let r1 = compute_r1(network, spec);
    let (fast, l1) = r1_fast_structure(network, spec, &r1);
    let mut constraints: Vec<Vec<BigRational>> = Vec::new();
    for &k in &fast {
        let zeta = network.reactions[k].zeta();
        let projected: Vec<BigRational> = zeta
            .iter()
            .enumerate()
            .map(|(i, &z)| if l1[i] { rat_from_i64(z) } else { BigRational::zero() })
            .collect();
        if projected.iter().any(|v| !v.is_zero()) && !constraints.contains(&projected) {
            constraints.push(projected);
        }
    }
    let generators = cone::extreme_rays(network.n_species(), &constraints);
    let r2 = generators
        .iter()
        .map(|theta| theta_timescale(network, spec, theta))
        .min()
        .unwrap_or(Ext::PosInf);
    (generators, r2)
}

/// r1 = min over species of gamma_i (isolated species skipped).
pub fn compute_r1(network: &Network, spec: &ScalingSpec) -> Ext {
    (0..network.n_species())
        .filter_map(|i| species_timescale(network, spec, i).ok())
        .map(Ext::Finite)
        .min()
        .unwrap_or(Ext::PosInf)
}

/// Full balance analysis at time-scale exponent gamma: species verdicts,
/// sign classes per strongly connected species component (sufficient for the
/// collective condition), the admissibility bound, and the two-scale summary.
pub fn verify_all_balance(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    budget: usize,
) -> Result<BalanceReport, ScalingError> {
    let n = network.n_species();
    let species_verdicts: Vec<BalanceVerdict> = (0..n)
        .map(|i| check_species_balance(network, spec, i, gamma))
        .collect();
    let natural_timescales: Vec<Ext> = (0..n)
        .map(|i| match species_timescale(network, spec, i) {
            Ok(g) => Ext::Finite(g),
            Err(_) => Ext::PosInf,
        })
        .collect();
    let r1 = compute_r1(network, spec);

    let mut class_verdicts = Vec::new();
    let mut max_admissible = Ext::PosInf;
    for scc in scc_decompose(network) {
        let mut support = vec![false; n];
        for &i in &scc {
            support[i] = true;
        }
        for class in enumerate_sign_classes(network, &support, budget)? {
            let mp = max_rho(spec, class.gamma_plus.iter());
            let mm = max_rho(spec, class.gamma_minus.iter());
            let balanced = mp == mm;
            let bound = if balanced {
                None
            } else {
                let b = class_bound(network, spec, &class, &support);
                if b < max_admissible {
                    max_admissible = b.clone();
                }
                Some(b)
            };
            class_verdicts.push(ClassVerdict { class, support: scc.clone(), balanced, bound });
        }
    }

    let (k2_generators, r2) = compute_k2_r2(network, spec);
    debug_assert!(
        k2_generators.is_empty() || r2 > r1,
        "two-scale ordering violated: r2 = {r2}, r1 = {r1}"
    );
    let admissible = Ext::Finite(gamma.clone()) <= max_admissible;
    Ok(BalanceReport {
        gamma: gamma.clone(),
        species_verdicts,
        natural_timescales,
        class_verdicts,
        max_admissible_gamma: max_admissible,
        r1,
        k2_generators,
        r2,
        admissible,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaProposal {
    pub alpha: Vec<BigRational>,
    pub balanced_classes: usize,
    pub total_classes: usize,
    pub max_admissible_gamma: Ext,
}

/// Exhaustive scoring of abundance-exponent assignments over a per-species
/// candidate grid: more balanced sign classes first, larger admissibility
/// bound second. A heuristic aid; exponent selection remains judgment.
pub fn propose_alpha(
    network: &Network,
    beta: &[BigRational],
    candidate_grid: &[Vec<BigRational>],
    budget: usize,
) -> Result<Vec<AlphaProposal>, ScalingError> {
    assert_eq!(candidate_grid.len(), network.n_species());
    assert!(candidate_grid.iter().all(|g| !g.is_empty()), "empty candidate set");
    let total: usize = candidate_grid.iter().map(Vec::len).product();
    if total > budget {
        return Err(ScalingError::SearchBudgetExceeded { budget });
    }
    let mut proposals = Vec::with_capacity(total);
    let mut idx = vec![0usize; candidate_grid.len()];
    loop {
        let alpha: Vec<BigRational> = idx
            .iter()
            .zip(candidate_grid)
            .map(|(&j, g)| g[j].clone())
            .collect();
        let spec = ScalingSpec::new(network, 2.0, alpha.clone(), beta.to_vec());
        let report = verify_all_balance(network, &spec, &BigRational::zero(), budget)?;
        proposals.push(AlphaProposal {
            alpha,
            balanced_classes: report.class_verdicts.iter().filter(|c| c.balanced).count(),
            total_classes: report.class_verdicts.len(),
            max_admissible_gamma: report.max_admissible_gamma,
        });
        // odometer increment
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                let mut out = proposals;
                out.sort_by(|a, b| {
                    b.balanced_classes
                        .cmp(&a.balanced_classes)
                        .then(b.max_admissible_gamma.cmp(&a.max_admissible_gamma))
                        .then(a.alpha.cmp(&b.alpha))
                });
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < candidate_grid[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}
