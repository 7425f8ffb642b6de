//! Built-in example models, shipped as data files so they double as parser
//! fixtures. Accessors panic only if the bundled assets are malformed, which
//! the test suite rules out.

use crate::network::{Network, State};
use crate::parse::{parse_network, parse_scaling};
use crate::scaling::ScalingSpec;

pub const GOUTSIAS_CRN: &str = include_str!("../assets/goutsias.crn");
pub const GOUTSIAS_DIMER_SCALE: &str = include_str!("../assets/goutsias_dimer.scale");
pub const GOUTSIAS_ABUNDANCE_SCALE: &str = include_str!("../assets/goutsias_abundance.scale");
pub const MICHAELIS_MENTEN_CRN: &str = include_str!("../assets/michaelis_menten.crn");
pub const MICHAELIS_MENTEN_SCALE: &str = include_str!("../assets/michaelis_menten.scale");
pub const MASTNY_CRN: &str = include_str!("../assets/mastny.crn");
pub const MASTNY_SCALE: &str = include_str!("../assets/mastny.scale");
pub const OVERFLOW_CRN: &str = include_str!("../assets/overflow.crn");
pub const OVERFLOW_SCALE: &str = include_str!("../assets/overflow.scale");
pub const RELAY_CRN: &str = include_str!("../assets/relay.crn");
pub const RELAY_SCALE: &str = include_str!("../assets/relay.scale");
pub const REVERSIBLE_CHAIN_CRN: &str = include_str!("../assets/reversible_chain.crn");
pub const REVERSIBLE_CHAIN_SCALE: &str = include_str!("../assets/reversible_chain.scale");
pub const CASCADE_CRN: &str = include_str!("../assets/cascade.crn");

/// (file name, contents) pairs materialized by the `examples` command.
pub const EXAMPLE_FILES: &[(&str, &str)] = &[
    ("goutsias.crn", GOUTSIAS_CRN),
    ("goutsias_dimer.scale", GOUTSIAS_DIMER_SCALE),
    ("goutsias_abundance.scale", GOUTSIAS_ABUNDANCE_SCALE),
    ("michaelis_menten.crn", MICHAELIS_MENTEN_CRN),
    ("michaelis_menten.scale", MICHAELIS_MENTEN_SCALE),
    ("mastny.crn", MASTNY_CRN),
    ("mastny.scale", MASTNY_SCALE),
    ("overflow.crn", OVERFLOW_CRN),
    ("overflow.scale", OVERFLOW_SCALE),
    ("relay.crn", RELAY_CRN),
    ("relay.scale", RELAY_SCALE),
    ("reversible_chain.crn", REVERSIBLE_CHAIN_CRN),
    ("reversible_chain.scale", REVERSIBLE_CHAIN_SCALE),
    ("cascade.crn", CASCADE_CRN),
];

fn net(text: &str) -> Network {
    parse_network(text)
        .into_result()
        .expect("bundled network asset must parse")
        .0
}

fn scale(text: &str, network: &Network) -> ScalingSpec {
    parse_scaling(text, network)
        .into_result()
        .expect("bundled scaling asset must parse")
        .0
}

/// Regulated transcription with six species and ten reactions; species order
/// M, D, RNA, DNA, DNA_D, DNA_2D.
pub fn goutsias_network() -> Network {
    net(GOUTSIAS_CRN)
}

/// Fast dimerization scaling: reactions 9 and 10 carry rate exponent 0, all
/// others -1; every abundance exponent 0.
pub fn goutsias_dimer_scaling(network: &Network) -> ScalingSpec {
    scale(GOUTSIAS_DIMER_SCALE, network)
}

/// Alternative scaling with abundant monomer and dimer (alpha 1) and rate
/// exponents satisfying every balance equation.
pub fn goutsias_abundance_scaling(network: &Network) -> ScalingSpec {
    scale(GOUTSIAS_ABUNDANCE_SCALE, network)
}

/// Published starting point: 2 monomers, 6 dimers, 2 singly bound DNA.
pub fn goutsias_initial() -> State {
    State::new(vec![2, 6, 0, 0, 2, 0])
}

/// Substrate + enzyme <-> complex -> enzyme + product.
pub fn michaelis_menten_network() -> Network {
    net(MICHAELIS_MENTEN_CRN)
}

pub fn michaelis_menten_scaling(network: &Network) -> ScalingSpec {
    scale(MICHAELIS_MENTEN_SCALE, network)
}

/// S1 <-> 2 S2 with S2 -> S3; recombination and conversion fast.
pub fn mastny_network() -> Network {
    net(MASTNY_CRN)
}

pub fn mastny_scaling(network: &Network) -> ScalingSpec {
    scale(MASTNY_SCALE, network)
}

/// Two-species system whose sum is unbalanced although each species is
/// balanced.
pub fn overflow_network() -> Network {
    net(OVERFLOW_CRN)
}

pub fn overflow_scaling(network: &Network) -> ScalingSpec {
    scale(OVERFLOW_SCALE, network)
}

/// Source plus fast exchange; the total count bounds the admissible time
/// scale at -beta.3.
pub fn relay_network() -> Network {
    net(RELAY_CRN)
}

pub fn relay_scaling(network: &Network) -> ScalingSpec {
    scale(RELAY_SCALE, network)
}

/// Four species joined by reversible pairs with a slow middle link.
pub fn reversible_chain_network() -> Network {
    net(REVERSIBLE_CHAIN_CRN)
}

pub fn reversible_chain_scaling(network: &Network) -> ScalingSpec {
    scale(REVERSIBLE_CHAIN_SCALE, network)
}

/// Five-species binding cascade used in species-balance examples.
pub fn cascade_network() -> Network {
    net(CASCADE_CRN)
}
