//! Line-oriented parser and canonical serializer for the network DSL (`.crn`)
//! and the scaling-specification format (`.scale`).
//!
//! Grammar (`.crn`), one declaration per line, `#` starts a comment:
//!
//! ```text
//! # crn-v1
//! species A, B, C
//! volume 1
//! A + B -> C @ 1.5e-2
//! dimerize: 2 M -> D @ 8.30e-2
//! A <-> B @ 1, 2          # expands to forward then reverse
//! 0 -> A @ 4.3            # zero-order
//! ```
//!
//! Scaling files (`.scale`) are `key = value` lines with dotted map keys:
//!
//! ```text
//! # crn-scale-v1
//! N0 = 100
//! alpha.M = 1
//! beta.9 = -1        # by 1-based reaction index
//! beta.dimerize = 0  # or by label
//! ```
//!
//! Unlisted alpha/beta entries default to 0. Rates are decimal floats;
//! alpha/beta values are exact rationals (`1`, `1/2`, `0.5`).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::Signed;

use crate::network::{Network, Reaction, Species};
use crate::rational::{format_rational, parse_rational};
use crate::scaling::ScalingSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl std::fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.column, sev, self.message)
    }
}

#[derive(Debug)]
pub struct ParseOutcome<T> {
    pub value: Option<T>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl<T> ParseOutcome<T> {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn into_result(self) -> Result<(T, Vec<ParseDiagnostic>), Vec<ParseDiagnostic>> {
        let errored = self.has_errors();
        match (self.value, errored) {
            (Some(v), false) => Ok((v, self.diagnostics)),
            _ => Err(self.diagnostics),
        }
    }
}

struct Diags {
    list: Vec<ParseDiagnostic>,
    strict: bool,
}

impl Diags {
    fn error(&mut self, line: usize, column: usize, message: impl Into<String>) {
        self.list.push(ParseDiagnostic {
            line,
            column,
            message: message.into(),
            severity: Severity::Error,
        });
    }

    fn warning(&mut self, line: usize, column: usize, message: impl Into<String>) {
        let severity = if self.strict { Severity::Error } else { Severity::Warning };
        self.list.push(ParseDiagnostic { line, column, message: message.into(), severity });
    }
}

/// One side of a reaction: (coefficient, species name, column of the name).
type SideTerm = (u32, String, usize);

pub fn parse_network(text: &str) -> ParseOutcome<Network> {
    parse_network_opts(text, false)
}

/// `strict` promotes implicit species declarations to errors.
pub fn parse_network_opts(text: &str, strict: bool) -> ParseOutcome<Network> {
    let mut diags = Diags { list: Vec::new(), strict };
    let mut species: Vec<Species> = Vec::new();
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    let mut raw_reactions: Vec<(Vec<SideTerm>, Vec<SideTerm>, f64, Option<String>, usize)> =
        Vec::new();
    let mut volume = 1.0f64;

    let declare = |name: &str,
                       implicit: bool,
                       line: usize,
                       col: usize,
                       species: &mut Vec<Species>,
                       names: &mut BTreeMap<String, usize>,
                       diags: &mut Diags| {
        if names.contains_key(name) {
            if !implicit {
                diags.error(line, col, format!("duplicate species declaration `{name}`"));
            }
            return;
        }
        if implicit {
            diags.warning(line, col, format!("species `{name}` declared implicitly by use"));
        }
        let index = species.len();
        species.push(Species { index, name: name.to_string() });
        names.insert(name.to_string(), index);
    };

    for (lineno0, raw_line) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = strip_comment(raw_line);
        if line.trim().is_empty() {
            continue;
        }
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();

        if let Some(rest) = trimmed.strip_prefix("species") {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                let base_col = indent + "species".len() + 1;
                for (off, name) in split_list(rest) {
                    let col = base_col + off + 1;
                    if !is_identifier(&name) {
                        diags.error(lineno, col, format!("invalid species name `{name}`"));
                        continue;
                    }
                    declare(&name, false, lineno, col, &mut species, &mut names, &mut diags);
                }
                continue;
            }
        }
        if let Some(rest) = trimmed.strip_prefix("volume") {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                let col = indent + "volume".len() + 2;
                match rest.trim().parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => volume = v,
                    _ => diags.error(lineno, col, format!("invalid volume `{}`", rest.trim())),
                }
                continue;
            }
        }

        // Reaction line, with optional `label:` prefix.
        let (label, body, body_off) = match split_label(trimmed) {
            Some((label, body, off)) => (Some(label), body, indent + off),
            None => (None, trimmed, indent),
        };
        match parse_reaction_line(body, lineno, body_off, &mut diags) {
            Some(ReactionLine { lhs, rhs, rates, reversible }) => {
                if reversible {
                    if rates.len() != 2 {
                        diags.error(lineno, body_off + 1, "reversible reaction needs two rates `@ kf, kr`");
                        continue;
                    }
                    let fwd_label = label.as_ref().map(|l| format!("{l}.fwd"));
                    let rev_label = label.as_ref().map(|l| format!("{l}.rev"));
                    raw_reactions.push((lhs.clone(), rhs.clone(), rates[0], fwd_label, lineno));
                    raw_reactions.push((rhs, lhs, rates[1], rev_label, lineno));
                } else {
                    if rates.len() != 1 {
                        diags.error(lineno, body_off + 1, "irreversible reaction takes one rate");
                        continue;
                    }
                    raw_reactions.push((lhs, rhs, rates[0], label, lineno));
                }
            }
            None => continue,
        }
    }

    // Implicit declarations in first-use order.
    for (lhs, rhs, _, _, lineno) in &raw_reactions {
        for (_, name, col) in lhs.iter().chain(rhs.iter()) {
            if !names.contains_key(name) {
                declare(name, true, *lineno, *col, &mut species, &mut names, &mut diags);
            }
        }
    }

    let s0 = species.len();
    let mut reactions = Vec::new();
    for (lhs, rhs, rate, label, _) in raw_reactions {
        let mut nu = vec![0u32; s0];
        let mut nu_prime = vec![0u32; s0];
        for (c, name, _) in lhs {
            nu[names[&name]] += c;
        }
        for (c, name, _) in rhs {
            nu_prime[names[&name]] += c;
        }
        reactions.push(Reaction { nu, nu_prime, rate_const: rate, label });
    }

    if diags.list.iter().any(|d| d.severity == Severity::Error) {
        ParseOutcome { value: None, diagnostics: diags.list }
    } else {
        ParseOutcome {
            value: Some(Network::new(species, reactions, volume)),
            diagnostics: diags.list,
        }
    }
}

struct ReactionLine {
    lhs: Vec<SideTerm>,
    rhs: Vec<SideTerm>,
    rates: Vec<f64>,
    reversible: bool,
}

fn parse_reaction_line(
    body: &str,
    lineno: usize,
    offset: usize,
    diags: &mut Diags,
) -> Option<ReactionLine> {
    let (arrow, reversible) = match (body.find("<->"), body.find("->")) {
        (Some(i), _) => (i, true),
        (None, Some(i)) => (i, false),
        (None, None) => {
            diags.error(lineno, offset + 1, format!("unrecognized declaration `{}`", body.trim()));
            return None;
        }
    };
    let arrow_len = if reversible { 3 } else { 2 };
    let lhs_text = &body[..arrow];
    let rest = &body[arrow + arrow_len..];
    let at = match rest.find('@') {
        Some(i) => i,
        None => {
            diags.error(lineno, offset + body.len(), "missing `@ rate`");
            return None;
        }
    };
    let rhs_text = &rest[..at];
    let rates_text = &rest[at + 1..];
    let rhs_off = offset + arrow + arrow_len;
    let rates_off = rhs_off + at + 1;

    let lhs = parse_side(lhs_text, lineno, offset, diags)?;
    let rhs = parse_side(rhs_text, lineno, rhs_off, diags)?;

    let mut rates = Vec::new();
    for (off, tok) in split_list(rates_text) {
        let col = rates_off + off + 1;
        match tok.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => rates.push(v),
            Ok(v) => {
                diags.error(lineno, col, format!("rate must be positive, got `{v}`"));
                return None;
            }
            Err(_) => {
                diags.error(lineno, col, format!("invalid rate `{tok}`"));
                return None;
            }
        }
    }
    if rates.is_empty() {
        diags.error(lineno, rates_off, "missing rate after `@`");
        return None;
    }
    Some(ReactionLine { lhs, rhs, rates, reversible })
}

/// Parse `0` or `c1 S1 + c2 S2 + ...`.
fn parse_side(
    text: &str,
    lineno: usize,
    offset: usize,
    diags: &mut Diags,
) -> Option<Vec<SideTerm>> {
    if text.trim() == "0" || text.trim().is_empty() {
        return Some(Vec::new());
    }
    let mut terms = Vec::new();
    let mut pos = 0usize;
    for part in text.split('+') {
        let part_off = pos;
        pos += part.len() + 1;
        let tokens: Vec<(usize, String)> = split_ws(part)
            .into_iter()
            .map(|(o, t)| (part_off + o, t))
            .collect();
        match tokens.as_slice() {
            [(col, name)] => {
                if !is_identifier(name) {
                    diags.error(lineno, offset + col + 1, format!("invalid species name `{name}`"));
                    return None;
                }
                terms.push((1, name.clone(), offset + col + 1));
            }
            [(ccol, coeff), (ncol, name)] => {
                let c: i64 = match coeff.parse() {
                    Ok(c) => c,
                    Err(_) => {
                        diags.error(lineno, offset + ccol + 1, format!("invalid coefficient `{coeff}`"));
                        return None;
                    }
                };
                if c <= 0 || c >= (1 << 31) {
                    diags.error(
                        lineno,
                        offset + ccol + 1,
                        format!("coefficient `{c}` out of range [1, 2^31)"),
                    );
                    return None;
                }
                if !is_identifier(name) {
                    diags.error(lineno, offset + ncol + 1, format!("invalid species name `{name}`"));
                    return None;
                }
                terms.push((c as u32, name.clone(), offset + ncol + 1));
            }
            _ => {
                diags.error(
                    lineno,
                    offset + part_off + 1,
                    format!("cannot parse term `{}`", part.trim()),
                );
                return None;
            }
        }
    }
    Some(terms)
}

/// Canonical text form; `parse_network(format_network(n))` reproduces `n`
/// exactly (species order, reaction order, full-precision rates).
pub fn format_network(network: &Network) -> String {
    let mut out = String::from("# crn-v1\n");
    let names: Vec<&str> = network.species.iter().map(|s| s.name.as_str()).collect();
    let _ = writeln!(out, "species {}", names.join(", "));
    if network.volume != 1.0 {
        let _ = writeln!(out, "volume {}", network.volume);
    }
    for r in &network.reactions {
        let mut line = String::new();
        if let Some(label) = &r.label {
            let _ = write!(line, "{label}: ");
        }
        let _ = write!(
            line,
            "{} -> {} @ {}",
            format_side(&r.nu, &names),
            format_side(&r.nu_prime, &names),
            r.rate_const
        );
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn format_side(counts: &[u32], names: &[&str]) -> String {
    let mut parts = Vec::new();
    for (i, &c) in counts.iter().enumerate() {
        if c == 1 {
            parts.push(names[i].to_string());
        } else if c > 1 {
            parts.push(format!("{c} {}", names[i]));
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Parse a `.scale` document against a resolved network.
pub fn parse_scaling(text: &str, network: &Network) -> ParseOutcome<ScalingSpec> {
    let mut diags = Diags { list: Vec::new(), strict: false };
    let mut n0: Option<f64> = None;
    let mut alpha = vec![BigRational::from_integer(0.into()); network.n_species()];
    let mut beta = vec![BigRational::from_integer(0.into()); network.n_reactions()];

    for (lineno0, raw_line) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = strip_comment(raw_line);
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            diags.error(lineno, 1, format!("expected `key = value`, got `{}`", line.trim()));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let value_col = line.find('=').unwrap() + 2;
        if key == "N0" {
            match value.parse::<f64>() {
                Ok(v) if v > 1.0 && v.is_finite() => n0 = Some(v),
                _ => diags.error(lineno, value_col, format!("N0 must be a real > 1, got `{value}`")),
            }
        } else if let Some(name) = key.strip_prefix("alpha.") {
            let Some(i) = network.species_index(name.trim()) else {
                diags.error(lineno, 1, format!("unknown species `{}` in alpha", name.trim()));
                continue;
            };
            match parse_rational(value) {
                Some(v) if !v.is_negative() => alpha[i] = v,
                Some(_) => diags.error(lineno, value_col, format!("alpha.{name} must be nonnegative")),
                None => diags.error(lineno, value_col, format!("invalid rational `{value}`")),
            }
        } else if let Some(which) = key.strip_prefix("beta.") {
            let which = which.trim();
            let k = if let Ok(idx) = which.parse::<usize>() {
                if idx >= 1 && idx <= network.n_reactions() {
                    Some(idx - 1)
                } else {
                    None
                }
            } else {
                network
                    .reactions
                    .iter()
                    .position(|r| r.label.as_deref() == Some(which))
            };
            let Some(k) = k else {
                diags.error(lineno, 1, format!("unknown reaction `{which}` in beta"));
                continue;
            };
            match parse_rational(value) {
                Some(v) => beta[k] = v,
                None => diags.error(lineno, value_col, format!("invalid rational `{value}`")),
            }
        } else {
            diags.error(lineno, 1, format!("unknown key `{key}`"));
        }
    }

    let Some(n0) = n0 else {
        diags.error(1, 1, "missing required key N0");
        return ParseOutcome { value: None, diagnostics: diags.list };
    };
    if diags.list.iter().any(|d| d.severity == Severity::Error) {
        return ParseOutcome { value: None, diagnostics: diags.list };
    }
    ParseOutcome {
        value: Some(ScalingSpec::new(network, n0, alpha, beta)),
        diagnostics: diags.list,
    }
}

/// Canonical `.scale` text; omits zero entries.
pub fn format_scaling(spec: &ScalingSpec, network: &Network) -> String {
    let mut out = String::from("# crn-scale-v1\n");
    let _ = writeln!(out, "N0 = {}", spec.n0);
    for (i, a) in spec.alpha.iter().enumerate() {
        if !num_traits::Zero::is_zero(a) {
            let _ = writeln!(out, "alpha.{} = {}", network.species[i].name, format_rational(a));
        }
    }
    for (k, b) in spec.beta.iter().enumerate() {
        if !num_traits::Zero::is_zero(b) {
            let _ = writeln!(out, "beta.{} = {}", k + 1, format_rational(b));
        }
    }
    out
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '.')
}

/// Split on commas (or whitespace when no comma), returning byte offsets.
fn split_list(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    if text.contains(',') {
        let mut pos = 0;
        for part in text.split(',') {
            let trimmed = part.trim();
            if !trimmed.is_empty() {
                let off = pos + (part.len() - part.trim_start().len());
                out.push((off, trimmed.to_string()));
            }
            pos += part.len() + 1;
        }
    } else {
        out = split_ws(text);
    }
    out
}

fn split_ws(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, text[s..i].to_string()));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, text[s..].to_string()));
    }
    out
}

/// `label:` prefix, where the label is an identifier. Returns (label, rest,
/// rest offset within the input).
fn split_label(text: &str) -> Option<(String, &str, usize)> {
    let colon = text.find(':')?;
    let label = text[..colon].trim();
    // Arrow before the colon means this is not a label.
    if !is_identifier(label) || text[..colon].contains("->") {
        return None;
    }
    let rest = &text[colon + 1..];
    let rest_trimmed = rest.trim_start();
    let off = colon + 1 + (rest.len() - rest_trimmed.len());
    Some((label.to_string(), rest_trimmed, off))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dimerization() {
        let (net, warns) = parse_network("species M, D\n2 M -> D @ 8.30e-2\n")
            .into_result()
            .unwrap();
        assert!(warns.is_empty());
        assert_eq!(net.reactions.len(), 1);
        assert_eq!(net.reactions[0].nu, vec![2, 0]);
        assert_eq!(net.reactions[0].nu_prime, vec![0, 1]);
        assert_eq!(net.reactions[0].rate_const, 0.0830);
    }

    #[test]
    fn reversible_expands_in_order() {
        let (net, _) = parse_network("species A, B\nA <-> B @ 1, 2\n")
            .into_result()
            .unwrap();
        assert_eq!(net.reactions.len(), 2);
        assert_eq!(net.reactions[0].nu, vec![1, 0]);
        assert_eq!(net.reactions[0].rate_const, 1.0);
        assert_eq!(net.reactions[1].nu, vec![0, 1]);
        assert_eq!(net.reactions[1].rate_const, 2.0);
    }

    #[test]
    fn negative_rate_is_located_error() {
        let out = parse_network("species A, B\nA -> B @ -1\n");
        let errs = out.into_result().unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 2);
        assert!(errs[0].column >= 10, "column = {}", errs[0].column);
        assert!(errs[0].message.contains("positive"));
    }

    #[test]
    fn implicit_species_warns() {
        let out = parse_network("A -> B @ 1\n");
        assert!(!out.has_errors());
        let (net, warns) = out.into_result().unwrap();
        assert_eq!(net.n_species(), 2);
        assert_eq!(warns.len(), 2);
        assert!(warns.iter().all(|w| w.severity == Severity::Warning));
    }

    #[test]
    fn strict_mode_rejects_implicit_species() {
        assert!(parse_network_opts("A -> B @ 1\n", true).has_errors());
    }

    #[test]
    fn zero_order_and_volume() {
        let (net, _) = parse_network("species A\nvolume 2\n0 -> A @ 4.3\nA -> 0 @ 1\n")
            .into_result()
            .unwrap();
        assert_eq!(net.volume, 2.0);
        assert_eq!(net.reactions[0].nu, vec![0]);
        assert_eq!(net.reactions[1].nu_prime, vec![0]);
    }

    #[test]
    fn labels_resolve_in_scaling() {
        let (net, _) = parse_network("species M, D\ndim: 2 M -> D @ 0.083\nD -> 2 M @ 0.5\n")
            .into_result()
            .unwrap();
        let (spec, _) = parse_scaling("N0 = 100\nbeta.dim = -1\nalpha.M = 1\n", &net)
            .into_result()
            .unwrap();
        assert_eq!(spec.beta[0], parse_rational("-1").unwrap());
        assert_eq!(spec.alpha[0], parse_rational("1").unwrap());
    }

    #[test]
    fn scaling_errors() {
        let (net, _) = parse_network("species A\nA -> 0 @ 1\n").into_result().unwrap();
        assert!(parse_scaling("alpha.A = 1\n", &net).has_errors()); // missing N0
        assert!(parse_scaling("N0 = 10\nalpha.Z = 1\n", &net).has_errors());
        assert!(parse_scaling("N0 = 10\nalpha.A = -1\n", &net).has_errors());
        assert!(parse_scaling("N0 = 10\nbeta.7 = 1\n", &net).has_errors());
    }

    #[test]
    fn kappa_derivation_table3_row9() {
        let (net, _) = parse_network("species M, D\n2 M -> D @ 8.30e-2\n")
            .into_result()
            .unwrap();
        let (spec, _) = parse_scaling("N0 = 100\nbeta.1 = -1\nalpha.M = 1\n", &net)
            .into_result()
            .unwrap();
        assert!((spec.kappa[0] - 8.30).abs() < 1e-12);
    }

    #[test]
    fn format_round_trip_goutsias() {
        let net = crate::gallery::goutsias_network();
        let text = format_network(&net);
        let (reparsed, warns) = parse_network(&text).into_result().unwrap();
        assert!(warns.is_empty());
        assert_eq!(net, reparsed);
    }

    #[test]
    fn format_empty_network() {
        let net = Network::new(vec![], vec![], 1.0);
        assert_eq!(format_network(&net), "# crn-v1\nspecies \n");
    }

    #[test]
    fn format_volume_line() {
        let net = Network::new(
            vec![Species { index: 0, name: "A".into() }],
            vec![],
            2.0,
        );
        assert!(format_network(&net).contains("volume 2"));
    }
}
