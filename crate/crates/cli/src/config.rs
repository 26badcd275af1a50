//! Flat `key = value` configuration shared by all subcommands.

use std::collections::BTreeMap;
use std::fmt;

use nlgibbs::spectral::InteractionSpec;

#[derive(Debug, Clone)]
pub enum CliError {
    Parse { line: usize, message: String },
    Validation(Vec<String>),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError::Validation(vec![message.into()])
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { line, message } => write!(f, "config line {line}: {message}"),
            CliError::Validation(v) => write!(f, "invalid configuration:\n  {}", v.join("\n  ")),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

/// Core errors raised while building inputs are configuration problems;
/// everything else is numerical.
pub fn numerical(e: nlgibbs::Error) -> CliError {
    use nlgibbs::Error::*;
    match e {
        InvalidParam(_) | DimensionMismatch { .. } | UnsupportedBasis | Unsupported(_) | EmptyBasis => CliError::invalid(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// finite real
    Real,
    Positive,
    NonNegative,
    Count,
    Seed,
    /// strictly decreasing positive reals
    Grid,
    /// strictly increasing positive reals, possibly empty
    Ascending,
    Choice(&'static [&'static str]),
    Interaction,
    Text,
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, kind, default, help }
}

pub const COMMON: [KeySpec; 3] = [
    key("seed", Kind::Seed, "0", "RNG seed"),
    key("out", Kind::Text, ".", "existing output directory"),
    key("format", Kind::Choice(&["csv", "json", "both"]), "both", "output format"),
];

/// Splits a config document into (line, key, value) triples.
pub fn parse_document(text: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Parse { line: i + 1, message: format!("expected `key = value`, got `{line}`") });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Parse { line: i + 1, message: "empty key".into() });
        }
        if let Some((first, _, _)) = out.iter().find(|e| e.1 == k) {
            return Err(CliError::Parse { line: i + 1, message: format!("key `{k}` already set on line {first}") });
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_real(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(x)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_real).collect()
}

/// `k:w` entries separated by `;`, label components by `,`;
/// e.g. `0:100; 1:50; -1:50` or `0,0:1; 1,0:0.5; -1,0:0.5`.
pub fn parse_interaction(s: &str) -> Result<InteractionSpec, String> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(InteractionSpec::zero());
    }
    let mut entries = Vec::new();
    for item in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let (label, w) = item.split_once(':').ok_or(format!("interaction entry `{item}` lacks `:`"))?;
        let k: Vec<i64> = label.split(',').map(|c| c.trim().parse::<i64>().map_err(|_| format!("bad label `{label}`"))).collect::<Result<_, _>>()?;
        entries.push((k, parse_real(w)?));
    }
    InteractionSpec::new(entries).map_err(|e| e.to_string())
}

fn check(kind: Kind, v: &str) -> Result<(), String> {
    match kind {
        Kind::Real => parse_real(v).map(|_| ()),
        Kind::Positive => match parse_real(v)? {
            x if x > 0.0 => Ok(()),
            x => Err(format!("{x} must be > 0")),
        },
        Kind::NonNegative => match parse_real(v)? {
            x if x >= 0.0 => Ok(()),
            x => Err(format!("{x} must be ≥ 0")),
        },
        Kind::Count => v.parse::<usize>().map(|_| ()).map_err(|_| format!("`{v}` is not a nonnegative integer")),
        Kind::Seed => v.parse::<u64>().map(|_| ()).map_err(|_| format!("`{v}` is not a u64 seed")),
        Kind::Grid => {
            let g = parse_list(v)?;
            if g.is_empty() || g.iter().any(|x| *x <= 0.0) {
                return Err("need a nonempty list of positive values".into());
            }
            if g.windows(2).any(|w| w[1] >= w[0]) {
                return Err(format!("`{v}` is not strictly decreasing"));
            }
            Ok(())
        }
        Kind::Ascending => {
            let g = parse_list(v)?;
            if g.iter().any(|x| *x <= 0.0) || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(format!("`{v}` is not a strictly increasing list of positive values"));
            }
            Ok(())
        }
        Kind::Choice(opts) if !opts.contains(&v) => Err(format!("`{v}` not one of {}", opts.join(", "))),
        Kind::Choice(_) | Kind::Text => Ok(()),
        Kind::Interaction => parse_interaction(v).map(|_| ()),
    }
}

/// Validated, fully defaulted configuration.
#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Config {
    /// File entries first, flags override; unknown keys and every invalid
    /// value are reported together.
    pub fn assemble(specs: &[KeySpec], file: &[(usize, String, String)], flags: &[(String, String)]) -> Result<Config, CliError> {
        let mut errors = Vec::new();
        let mut values: BTreeMap<&'static str, String> = specs.iter().map(|s| (s.name, s.default.to_string())).collect();
        let lookup = |k: &str| specs.iter().find(|s| s.name == k);
        for (line, k, v) in file {
            match lookup(k) {
                Some(s) => {
                    values.insert(s.name, v.clone());
                }
                None => errors.push(format!("line {line}: unknown key `{k}`")),
            }
        }
        for (k, v) in flags {
            match lookup(k) {
                Some(s) => {
                    values.insert(s.name, v.clone());
                }
                None => errors.push(format!("unknown key `{k}`")),
            }
        }
        for s in specs {
            if let Err(e) = check(s.kind, &values[s.name]) {
                errors.push(format!("{}: {e}", s.name));
            }
        }
        if errors.is_empty() {
            Ok(Config { values })
        } else {
            Err(CliError::Validation(errors))
        }
    }

    pub fn str(&self, k: &str) -> &str {
        self.values.get(k).map(String::as_str).unwrap_or_else(|| panic!("key `{k}` not declared"))
    }

    pub fn f64(&self, k: &str) -> f64 {
        parse_real(self.str(k)).expect("validated")
    }

    pub fn usize(&self, k: &str) -> usize {
        self.str(k).parse().expect("validated")
    }

    pub fn u64(&self, k: &str) -> u64 {
        self.str(k).parse().expect("validated")
    }

    pub fn list(&self, k: &str) -> Vec<f64> {
        parse_list(self.str(k)).expect("validated")
    }

    pub fn interaction(&self, k: &str) -> InteractionSpec {
        parse_interaction(self.str(k)).expect("validated")
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (*k, v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECS: [KeySpec; 3] = [
        key("kappa", Kind::Positive, "1", ""),
        key("lambda_grid", Kind::Grid, "0.1,0.05", ""),
        key("interaction", Kind::Interaction, "0:1", ""),
    ];

    #[test]
    fn document_with_comments() {
        let doc = parse_document("# header\nkappa = 2 # trailing\n\nlambda_grid=0.1, 0.05,0.02\n").unwrap();
        let c = Config::assemble(&SPECS, &doc, &[]).unwrap();
        assert_eq!(c.f64("kappa"), 2.0);
        assert_eq!(c.list("lambda_grid"), vec![0.1, 0.05, 0.02]);
    }

    #[test]
    fn flags_override_file() {
        let doc = parse_document("kappa = 2").unwrap();
        let c = Config::assemble(&SPECS, &doc, &[("kappa".into(), "3".into())]).unwrap();
        assert_eq!(c.f64("kappa"), 3.0);
    }

    #[test]
    fn all_violations_are_listed() {
        let doc = parse_document("wmax = 1\nlambda_grid = 0.02, 0.05\ninteraction = 0:-1").unwrap();
        let Err(CliError::Validation(v)) = Config::assemble(&SPECS, &doc, &[]) else { panic!() };
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v[0].contains("wmax"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        assert!(matches!(parse_document("kappa = 1\nnonsense"), Err(CliError::Parse { line: 2, .. })));
        assert!(matches!(parse_document("kappa = 1\nkappa = 2"), Err(CliError::Parse { line: 2, .. })));
    }

    #[test]
    fn interaction_syntax() {
        let w = parse_interaction("0,0:1; 1,0:0.5; -1,0:0.5").unwrap();
        assert_eq!(w.hat(&[1, 0]), 0.5);
        assert!(parse_interaction("1:0.5").is_err());
        assert!(parse_interaction("none").unwrap().is_zero());
    }
}
