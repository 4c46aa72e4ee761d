//! Command table, flag/config-file merging and typed parameter access.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::{json, Value as Json};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Floats,
    Ints,
    Bool,
    Str,
}

impl Kind {
    fn placeholder(self) -> &'static str {
        match self {
            Kind::Int => "N",
            Kind::Float => "X",
            Kind::Floats => "X,..",
            Kind::Ints => "N,..",
            Kind::Bool => "BOOL",
            Kind::Str => "STR",
        }
    }
}

struct Key {
    name: &'static str,
    kind: Kind,
    help: &'static str,
}

const fn key(name: &'static str, kind: Kind, help: &'static str) -> Key {
    Key { name, kind, help }
}

const KEYS: &[Key] = &[
    key("seed", Kind::Int, "RNG seed [default: 0]"),
    key("threads", Kind::Int, "worker thread cap (falls back to SUBSPEC_THREADS)"),
    key("out", Kind::Str, "output file [default: stdout]"),
    key("format", Kind::Str, "json or csv"),
    key("ell", Kind::Int, "number of (X, Y) pairs"),
    key("b", Kind::Floats, "bracket coefficients, max 1"),
    key("samples", Kind::Int, "Monte-Carlo sample count"),
    key("lmax", Kind::Float, "largest eigenvalue to list"),
    key("lengths", Kind::Floats, "box side lengths"),
    key("nodes", Kind::Ints, "grid nodes per axis"),
    key("riemannian", Kind::Bool, "add d/dt to the frame"),
    key("conformal", Kind::Bool, "use a smooth random conformal factor in [0.5, 2]"),
    key("k", Kind::Int, "number of eigenvalues or sets"),
    key("tol", Kind::Float, "eigensolver residual tolerance"),
    key("export", Kind::Str, "directory for Matrix Market stiffness.mtx and mass.mtx"),
    key("input", Kind::Str, "input file (.csv points, .bin distances, or spectrum csv)"),
    key("metric", Kind::Str, "euclidean or heisenberg, for point files"),
    key("sample_size", Kind::Int, "points drawn from an H1 ball when no input is given"),
    key("radius", Kind::Float, "ball radius"),
    key("local", Kind::Bool, "local decomposition (outer radii capped)"),
    key("lambda", Kind::Float, "threshold to certify"),
    key("confirm", Kind::Bool, "cross-check a certificate with the eigensolver"),
    key("source", Kind::Str, "grid, sphere or file"),
    key("grid_points", Kind::Int, "number of log-spaced lambda values"),
    key("lambda_lo", Kind::Float, "lower end of the lambda grid"),
    key("lambda_hi", Kind::Float, "upper end of the lambda grid"),
    key("name", Kind::Str, "suite name: weyl, sphere, volume or doubling"),
];

const COMMON: &[&str] = &["seed", "threads", "out", "format"];
const GRID: &[&str] = &["ell", "b", "lengths", "nodes"];

pub struct CommandSpec {
    pub name: &'static str,
    about: &'static str,
    keys: &'static [&'static str],
    uses_grid: bool,
}

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "volume",
        about: "Unit-ball integral, calibrated prefactor and unit-ball volume",
        keys: &["ell", "b", "samples"],
        uses_grid: false,
    },
    CommandSpec {
        name: "sphere-spectrum",
        about: "Exact sub-Laplacian spectrum of the CR sphere",
        keys: &["ell", "lmax"],
        uses_grid: false,
    },
    CommandSpec {
        name: "assemble-solve",
        about: "Assemble the discrete operator on a box and compute its lowest eigenvalues",
        keys: &["riemannian", "conformal", "k", "tol", "export"],
        uses_grid: true,
    },
    CommandSpec {
        name: "decompose",
        about: "Decompose a finite metric measure space into k well-separated sets",
        keys: &["input", "metric", "ell", "sample_size", "radius", "k", "local"],
        uses_grid: false,
    },
    CommandSpec {
        name: "certify",
        about: "Certify a lower bound on the counting function from ball test functions",
        keys: &["conformal", "k", "radius", "lambda", "confirm", "tol"],
        uses_grid: true,
    },
    CommandSpec {
        name: "weyl-fit",
        about: "Fit the growth exponent of the eigenvalue counting function",
        keys: &[
            "source", "input", "riemannian", "k", "tol", "lmax", "grid_points", "lambda_lo", "lambda_hi",
        ],
        uses_grid: true,
    },
    CommandSpec {
        name: "verify-suite",
        about: "Run a named verification suite",
        keys: &["name", "samples"],
        uses_grid: false,
    },
];

impl CommandSpec {
    fn accepts(&self, name: &str) -> bool {
        COMMON.contains(&name) || self.keys.contains(&name) || (self.uses_grid && GRID.contains(&name))
    }

    fn key_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        let grid: &[&str] = if self.uses_grid { GRID } else { &[] };
        COMMON.iter().chain(grid).chain(self.keys).copied()
    }
}

fn lookup(name: &str) -> &'static Key {
    KEYS.iter().find(|k| k.name == name).expect("key table covers every command key")
}

pub fn cli() -> Command {
    let mut cmd = Command::new("subspec")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Spectral and volume computations on corank-one Carnot groups")
        .arg_required_else_help(true)
        .subcommand_required(true);
    for spec in COMMANDS {
        let mut sub = Command::new(spec.name).about(spec.about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat TOML file of parameters; flags take precedence"),
        );
        for name in spec.key_names() {
            let k = lookup(name);
            let mut arg = Arg::new(name)
                .long(name.replace('_', "-"))
                .value_name(k.kind.placeholder())
                .help(k.help)
                .action(ArgAction::Set);
            if k.kind == Kind::Bool {
                arg = arg.num_args(0..=1).default_missing_value("true");
            }
            if k.kind == Kind::Floats || k.kind == Kind::Ints {
                arg = arg.allow_negative_numbers(true);
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

#[derive(Debug, Clone, PartialEq)]
enum Val {
    Int(usize),
    Float(f64),
    Floats(Vec<f64>),
    Ints(Vec<usize>),
    Bool(bool),
    Str(String),
}

impl Val {
    fn to_json(&self) -> Json {
        match self {
            Val::Int(v) => json!(v),
            Val::Float(v) => json!(v),
            Val::Floats(v) => json!(v),
            Val::Ints(v) => json!(v),
            Val::Bool(v) => json!(v),
            Val::Str(v) => json!(v),
        }
    }
}

fn finite(key: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::invalid(format!("{key}: value must be finite")))
    }
}

fn list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

fn parse_flag(key: &str, kind: Kind, s: &str) -> Result<Val, CliError> {
    let bad = || CliError::invalid(format!("{key}: cannot parse {s:?} as {}", kind.placeholder()));
    Ok(match kind {
        Kind::Int => Val::Int(s.trim().parse().map_err(|_| bad())?),
        Kind::Float => Val::Float(finite(key, s.trim().parse().map_err(|_| bad())?)?),
        Kind::Floats => Val::Floats(
            list(s)
                .into_iter()
                .map(|t| t.parse().map_err(|_| bad()).and_then(|x| finite(key, x)))
                .collect::<Result<_, _>>()?,
        ),
        Kind::Ints => Val::Ints(list(s).into_iter().map(|t| t.parse().map_err(|_| bad())).collect::<Result<_, _>>()?),
        Kind::Bool => Val::Bool(s.trim().parse().map_err(|_| bad())?),
        Kind::Str => Val::Str(s.to_string()),
    })
}

fn from_toml(key: &str, kind: Kind, v: &toml::Value) -> Result<Val, CliError> {
    use toml::Value as T;
    let bad = || CliError::invalid(format!("config key {key}: expected {}", kind.placeholder()));
    let int = |v: &T| match v {
        T::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad()),
    };
    let float = |v: &T| match v {
        T::Float(x) => finite(key, *x),
        T::Integer(i) => Ok(*i as f64),
        _ => Err(bad()),
    };
    let items = |v: &T| -> Vec<T> {
        match v {
            T::Array(a) => a.clone(),
            other => vec![other.clone()],
        }
    };
    Ok(match kind {
        Kind::Int => Val::Int(int(v)?),
        Kind::Float => Val::Float(float(v)?),
        Kind::Floats => Val::Floats(items(v).iter().map(float).collect::<Result<_, _>>()?),
        Kind::Ints => Val::Ints(items(v).iter().map(int).collect::<Result<_, _>>()?),
        Kind::Bool => Val::Bool(v.as_bool().ok_or_else(bad)?),
        Kind::Str => Val::Str(v.as_str().ok_or_else(bad)?.to_string()),
    })
}

/// Merged parameters for one command. Every read is recorded so the
/// resolved configuration can be echoed into the artifact.
pub struct Params {
    pub command: &'static str,
    values: BTreeMap<&'static str, Val>,
    used: Mutex<BTreeMap<String, Json>>,
}

impl Params {
    pub fn resolve(spec: &'static CommandSpec, m: &ArgMatches) -> Result<Params, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = m.get_one::<String>("config").map(PathBuf::from) {
            for (k, v) in read_config(&path)? {
                let norm = k.replace('-', "_");
                if !spec.accepts(&norm) {
                    return Err(CliError::invalid(format!("unknown config key {k:?} for {}", spec.name)));
                }
                let key = lookup(&norm);
                values.insert(key.name, from_toml(key.name, key.kind, &v)?);
            }
        }
        for name in spec.key_names() {
            if let Some(s) = m.get_one::<String>(name) {
                let key = lookup(name);
                values.insert(key.name, parse_flag(name, key.kind, s)?);
            }
        }
        let p = Params {
            command: spec.name,
            values,
            used: Mutex::new(BTreeMap::new()),
        };
        p.usize("seed", Some(0))?;
        Ok(p)
    }

    pub fn resolved(&self) -> Json {
        Json::Object(self.used.lock().expect("config echo poisoned").iter().map(|(k, v)| (k.clone(), v.clone())).collect())
    }

    fn get(&self, key: &str, default: Option<Val>) -> Result<Val, CliError> {
        let v = match self.values.get(key) {
            Some(v) => v.clone(),
            None => default.ok_or_else(|| CliError::invalid(format!("{}: missing required parameter {key}", self.command)))?,
        };
        self.used.lock().expect("config echo poisoned").insert(key.to_string(), v.to_json());
        Ok(v)
    }

    fn get_opt(&self, key: &str) -> Option<Val> {
        let v = self.values.get(key).cloned();
        self.used.lock().expect("config echo poisoned").insert(key.to_string(), v.as_ref().map_or(Json::Null, Val::to_json));
        v
    }

    /// Reads a setting that shapes execution but not the result.
    fn peek(&self, key: &str) -> Option<&Val> {
        self.values.get(key)
    }

    pub fn seed(&self) -> u64 {
        match self.values.get("seed") {
            Some(Val::Int(s)) => *s as u64,
            _ => 0,
        }
    }

    pub fn usize(&self, key: &str, default: Option<usize>) -> Result<usize, CliError> {
        match self.get(key, default.map(Val::Int))? {
            Val::Int(v) => Ok(v),
            _ => unreachable!("typed at parse time"),
        }
    }

    pub fn f64(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        match self.get(key, default.map(Val::Float))? {
            Val::Float(v) => Ok(v),
            _ => unreachable!("typed at parse time"),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        match self.get_opt(key) {
            Some(Val::Float(v)) => Some(v),
            _ => None,
        }
    }

    pub fn floats(&self, key: &str, default: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
        match self.get(key, default.map(Val::Floats))? {
            Val::Floats(v) => Ok(v),
            _ => unreachable!("typed at parse time"),
        }
    }

    pub fn ints(&self, key: &str, default: Option<Vec<usize>>) -> Result<Vec<usize>, CliError> {
        match self.get(key, default.map(Val::Ints))? {
            Val::Ints(v) => Ok(v),
            _ => unreachable!("typed at parse time"),
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key, Some(Val::Bool(default)))? {
            Val::Bool(v) => Ok(v),
            _ => unreachable!("typed at parse time"),
        }
    }

    pub fn string(&self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        match self.get(key, default.map(|s| Val::Str(s.to_string())))? {
            Val::Str(v) => Ok(v),
            _ => unreachable!("typed at parse time"),
        }
    }

    pub fn opt_string(&self, key: &str) -> Option<String> {
        match self.get_opt(key) {
            Some(Val::Str(v)) => Some(v),
            _ => None,
        }
    }

    pub fn out(&self) -> Option<PathBuf> {
        match self.peek("out") {
            Some(Val::Str(s)) => Some(PathBuf::from(s)),
            _ => None,
        }
    }

    /// Flag or config value, then SUBSPEC_THREADS.
    pub fn threads(&self) -> Result<Option<usize>, CliError> {
        let n = match self.peek("threads") {
            Some(Val::Int(n)) => Some(*n),
            _ => match std::env::var("SUBSPEC_THREADS") {
                Ok(s) if !s.trim().is_empty() => Some(
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::invalid(format!("SUBSPEC_THREADS: not a count: {s:?}")))?,
                ),
                _ => None,
            },
        };
        match n {
            Some(0) => Err(CliError::invalid("threads must be at least 1")),
            n => Ok(n),
        }
    }
}

fn read_config(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?;
    if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
        return Err(CliError::invalid(format!("config {}: nested table {k:?} not supported", path.display())));
    }
    Ok(table)
}

pub fn spec_for(name: &str) -> &'static CommandSpec {
    COMMANDS.iter().find(|c| c.name == name).expect("subcommand registered from COMMANDS")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_command_key_is_declared() {
        for spec in COMMANDS {
            for k in spec.key_names() {
                assert!(KEYS.iter().any(|key| key.name == k), "{k}");
            }
        }
        cli().debug_assert();
    }

    #[test]
    fn flag_parsing() {
        assert_eq!(parse_flag("b", Kind::Floats, "1.0, 0.5").unwrap(), Val::Floats(vec![1.0, 0.5]));
        assert_eq!(parse_flag("nodes", Kind::Ints, "8,8,4").unwrap(), Val::Ints(vec![8, 8, 4]));
        assert!(parse_flag("lmax", Kind::Float, "inf").is_err());
        assert!(parse_flag("k", Kind::Int, "-1").is_err());
    }

    #[test]
    fn toml_scalars_promote_to_lists() {
        let v: toml::Value = toml::Value::Float(0.5);
        assert_eq!(from_toml("b", Kind::Floats, &v).unwrap(), Val::Floats(vec![0.5]));
        assert_eq!(from_toml("lmax", Kind::Float, &toml::Value::Integer(20)).unwrap(), Val::Float(20.0));
        assert!(from_toml("k", Kind::Int, &toml::Value::Integer(-2)).is_err());
    }
}
