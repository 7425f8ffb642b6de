//! Stable human-readable and JSON rendering of analysis results and run
//! manifests. Output is a pure function of the inputs so repeated runs are
//! byte-identical.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::network::Network;
use crate::rational::{format_rational, Ext};
use crate::scaling::{BalanceReport, BalanceVerdict, ScalingSpec};

fn ext_str(e: &Ext) -> String {
    match e {
        Ext::NegInf => "-inf".to_string(),
        Ext::PosInf => "+inf".to_string(),
        Ext::Finite(v) => format_rational(v),
    }
}

fn verdict_str(v: &BalanceVerdict) -> String {
    match v {
        BalanceVerdict::Balanced => "balanced".to_string(),
        BalanceVerdict::ConstraintSatisfied { bound } => {
            format!("unbalanced, constraint satisfied (gamma <= {})", ext_str(bound))
        }
        BalanceVerdict::ConstraintViolated { bound } => {
            format!("unbalanced, constraint violated (needs gamma <= {})", ext_str(bound))
        }
    }
}

/// Human-readable balance table: one row per species with its natural time
/// scale and verdict, the collective classes, and the derived exponents.
pub fn balance_report_human(network: &Network, report: &BalanceReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "balance report at gamma = {}", format_rational(&report.gamma));
    let _ = writeln!(out, "{:<12} {:>12}  verdict", "species", "timescale");
    for (i, species) in network.species.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<12} {:>12}  {}",
            species.name,
            ext_str(&report.natural_timescales[i]),
            verdict_str(&report.species_verdicts[i])
        );
    }
    let balanced_classes = report.class_verdicts.iter().filter(|cv| cv.balanced).count();
    let _ = writeln!(
        out,
        "collective classes: {} balanced of {}",
        balanced_classes,
        report.class_verdicts.len()
    );
    for cv in report.class_verdicts.iter().filter(|cv| !cv.balanced) {
        let names: Vec<_> =
            cv.support.iter().map(|&i| network.species[i].name.clone()).collect();
        let status = match &cv.bound {
            Some(b) => format!("unbalanced, gamma <= {}", ext_str(b)),
            None => "unbalanced".to_string(),
        };
        let _ = writeln!(out, "  {{{}}}: {}", names.join(", "), status);
    }
    let _ = writeln!(out, "max admissible gamma: {}", ext_str(&report.max_admissible_gamma));
    let _ = writeln!(out, "r1 = {}", ext_str(&report.r1));
    let _ = writeln!(out, "r2 = {}", ext_str(&report.r2));
    for theta in &report.k2_generators {
        let parts: Vec<_> = theta
            .iter()
            .enumerate()
            .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
            .map(|(i, c)| format!("{} {}", format_rational(c), network.species[i].name))
            .collect();
        let _ = writeln!(out, "conserved slow combination: {}", parts.join(" + "));
    }
    let _ = writeln!(
        out,
        "scaling admissible at this gamma: {}",
        if report.admissible { "yes" } else { "no" }
    );
    out
}

/// Machine-readable balance report.
pub fn balance_report_json(network: &Network, report: &BalanceReport) -> Value {
    let species: Vec<Value> = network
        .species
        .iter()
        .enumerate()
        .map(|(i, s)| {
            json!({
                "name": s.name,
                "timescale": ext_str(&report.natural_timescales[i]),
                "verdict": verdict_str(&report.species_verdicts[i]),
                "balanced": matches!(report.species_verdicts[i], BalanceVerdict::Balanced),
            })
        })
        .collect();
    let classes: Vec<Value> = report
        .class_verdicts
        .iter()
        .map(|cv| {
            json!({
                "support": cv.support.iter()
                    .map(|&i| network.species[i].name.clone()).collect::<Vec<_>>(),
                "balanced": cv.balanced,
                "bound": cv.bound.as_ref().map(ext_str),
            })
        })
        .collect();
    json!({
        "gamma": format_rational(&report.gamma),
        "species": species,
        "classes": classes,
        "max_admissible_gamma": ext_str(&report.max_admissible_gamma),
        "r1": ext_str(&report.r1),
        "r2": ext_str(&report.r2),
        "k2_generators": report.k2_generators.iter().map(|theta| {
            theta.iter().map(format_rational).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
        "admissible": report.admissible,
    })
}

/// Natural time scale table used by the `timescales` subcommand.
pub fn timescales_human(network: &Network, report: &BalanceReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} natural timescale gamma_i", "species");
    for (i, species) in network.species.iter().enumerate() {
        let _ =
            writeln!(out, "{:<12} {}", species.name, ext_str(&report.natural_timescales[i]));
    }
    let _ = writeln!(out, "r1 = {}", ext_str(&report.r1));
    let _ = writeln!(out, "r2 = {}", ext_str(&report.r2));
    let _ = writeln!(out, "max admissible gamma = {}", ext_str(&report.max_admissible_gamma));
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest echoing the resolved run configuration and input hashes; every
/// simulate/compare run is reproducible from this file alone.
pub struct ManifestInput<'a> {
    pub path: &'a str,
    pub contents: &'a [u8],
}

pub fn run_manifest(
    command: &str,
    inputs: &[ManifestInput],
    options: Value,
) -> Value {
    json!({
        "tool": "crn",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "inputs": inputs.iter().map(|i| json!({
            "path": i.path,
            "sha256": sha256_hex(i.contents),
        })).collect::<Vec<_>>(),
        "options": options,
    })
}

/// Summary block of a scaling spec for reports.
pub fn scaling_json(network: &Network, spec: &ScalingSpec) -> Value {
    json!({
        "n0": spec.n0,
        "alpha": network.species.iter().zip(&spec.alpha)
            .map(|(s, a)| json!({"species": s.name, "alpha": format_rational(a)}))
            .collect::<Vec<_>>(),
        "beta": spec.beta.iter().map(format_rational).collect::<Vec<_>>(),
        "kappa": spec.kappa.clone(),
        "rho": spec.rho.iter().map(format_rational).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::scaling::{verify_all_balance, DEFAULT_SIGN_BUDGET};
    use num_traits::Zero;

    #[test]
    fn human_report_is_stable_and_informative() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_abundance_scaling(&network);
        let report = verify_all_balance(
            &network,
            &spec,
            &num_rational::BigRational::zero(),
            DEFAULT_SIGN_BUDGET,
        )
        .unwrap();
        let a = balance_report_human(&network, &report);
        let b = balance_report_human(&network, &report);
        assert_eq!(a, b);
        assert!(a.contains("M"));
        assert!(a.contains("r1 = 0"));
        assert!(a.contains("r2 = 1"));
        let j = balance_report_json(&network, &report);
        assert_eq!(j["r1"], "0");
        assert_eq!(j["admissible"], true);
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip() {
        let m = run_manifest(
            "simulate",
            &[ManifestInput { path: "net.crn", contents: b"species A\n" }],
            json!({"seed": 1}),
        );
        assert_eq!(m["command"], "simulate");
        assert_eq!(m["inputs"][0]["path"], "net.crn");
        assert_eq!(m["options"]["seed"], 1);
    }
}
