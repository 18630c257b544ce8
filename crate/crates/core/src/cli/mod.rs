//! Command-line front end. A run is a command name plus a flat key/value
//! configuration read from `--config FILE` (`key = value` lines) and
//! `--key value` overrides; overrides win.

mod commands;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use commands::COMMANDS;

/// Environment variable consulted when no `seed` key is given.
pub const SEED_ENV: &str = "REPROGRAM_LAB_SEED";
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    /// `args` excludes the program name: `<command> [--config FILE] [--key value]…`.
    pub fn from_args(args: &[String], env_seed: Option<&str>) -> Result<Self> {
        let (command, rest) = args
            .split_first()
            .ok_or_else(|| Error::Config(format!("missing command; valid commands: {}", command_list())))?;
        if !COMMANDS.iter().any(|c| c.name == command) {
            return Err(Error::Config(format!(
                "unknown command `{command}`; valid commands: {}",
                command_list()
            )));
        }
        let mut file_params = BTreeMap::new();
        let mut overrides = BTreeMap::new();
        let mut it = rest.iter();
        while let Some(flag) = it.next() {
            let key = flag
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected `--key value`, got `{flag}`")))?;
            let value = it
                .next()
                .ok_or_else(|| Error::Config(format!("missing value for `--{key}`")))?;
            if key == "config" {
                let text = std::fs::read_to_string(value)
                    .map_err(|e| Error::Config(format!("cannot read config file `{value}`: {e}")))?;
                file_params.extend(parse_config_text(&text)?);
            } else {
                overrides.insert(key.to_string(), value.clone());
            }
        }
        let mut parameters = file_params;
        parameters.extend(overrides);
        Self::resolve(command.clone(), parameters, env_seed)
    }

    pub fn resolve(
        command: String,
        mut parameters: BTreeMap<String, String>,
        env_seed: Option<&str>,
    ) -> Result<Self> {
        let cmd = COMMANDS
            .iter()
            .find(|c| c.name == command)
            .ok_or_else(|| Error::Config(format!("unknown command `{command}`; valid commands: {}", command_list())))?;
        let seed_text = parameters.remove("seed");
        let seed = match (seed_text.as_deref(), env_seed) {
            (Some(s), _) => parse_seed("seed", s)?,
            (None, Some(s)) => parse_seed(SEED_ENV, s)?,
            (None, None) => DEFAULT_SEED,
        };
        let output_dir = PathBuf::from(parameters.remove("output_dir").unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into()));
        for key in parameters.keys() {
            if !cmd.keys.iter().any(|(k, _)| k == key) {
                return Err(Error::Config(format!(
                    "unknown key `{key}` for `{command}`; accepted keys: seed, output_dir, {}",
                    cmd.keys.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        for (key, default) in cmd.keys {
            match default {
                Some(d) => {
                    parameters.entry(key.to_string()).or_insert_with(|| d.to_string());
                }
                None if !parameters.contains_key(*key) => {
                    return Err(Error::Config(format!("missing required key `{key}` for `{command}`")));
                }
                None => {}
            }
        }
        Ok(Self {
            command,
            parameters,
            seed,
            output_dir,
        })
    }

    /// `key = value` lines of the fully resolved configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        writeln!(s, "command = {}", self.command).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "output_dir = {}", self.output_dir.display()).unwrap();
        for (k, v) in &self.parameters {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// The resolved configuration as a JSON-ready map.
    pub fn echo_map(&self) -> BTreeMap<String, String> {
        let mut m = self.parameters.clone();
        m.insert("command".into(), self.command.clone());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("output_dir".into(), self.output_dir.display().to_string());
        m
    }

    fn get(&self, key: &str) -> &str {
        self.parameters.get(key).map(String::as_str).unwrap_or("")
    }

    pub(crate) fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)
            .parse()
            .map_err(|_| Error::Config(format!("`{key}` must be a nonnegative integer, got `{}`", self.get(key))))
    }

    /// Reals may be written as `a^b` for powers, e.g. `4096^0.3`.
    pub(crate) fn real(&self, key: &str) -> Result<f64> {
        let text = self.get(key);
        parse_real(text).ok_or_else(|| Error::Config(format!("`{key}` must be a real number, got `{text}`")))
    }

    pub(crate) fn text(&self, key: &str) -> &str {
        self.get(key)
    }

    pub(crate) fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.get(key)
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("`{key}` must be a comma-separated list of integers")))
            })
            .collect()
    }
}

fn parse_seed(key: &str, s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` must be an unsigned 64-bit integer, got `{s}`")))
}

fn parse_real(text: &str) -> Option<f64> {
    let v = match text.split_once('^') {
        Some((base, exp)) => base.trim().parse::<f64>().ok()?.powf(exp.trim().parse::<f64>().ok()?),
        None => text.trim().parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

fn command_list() -> String {
    COMMANDS.iter().map(|c| c.name).collect::<Vec<_>>().join(", ")
}

/// How a completed command went.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

/// Executes the command, writing every artifact under `output_dir`.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let cmd = COMMANDS.iter().find(|c| c.name == cfg.command).expect("resolved command");
    (cmd.run)(cfg)
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Passed) => 0,
        Ok(Outcome::Failed) => 1,
        Err(e) if is_configuration_error(e) => 2,
        Err(_) => 1,
    }
}

fn is_configuration_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::Parse { .. }
            | Error::InvalidArgument(_)
            | Error::ExponentConditionViolated(_)
            | Error::HypothesisViolated(_)
            | Error::WidthExceedsDimension { .. }
            | Error::DimensionMismatch { .. }
            | Error::ChannelMismatch { .. }
    )
}

/// Entry point used by the binary; returns the process exit status.
pub fn main_with_args(args: &[String]) -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = RunConfig::from_args(args, env_seed.as_deref()).and_then(|cfg| {
        let out = execute(&cfg);
        if let Ok(o) = &out {
            eprintln!("{}: {}", cfg.command, if *o == Outcome::Passed { "passed" } else { "FAILED" });
        }
        out
    });
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}

/// Output path for a plain file name inside the output directory.
pub(crate) fn output_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    let p = Path::new(name);
    if p.components().count() != 1 || p.is_absolute() || name == ".." || name == "." {
        return Err(Error::Config(format!("output file name `{name}` must be a plain file name")));
    }
    Ok(cfg.output_dir.join(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn config_text() {
        let m = parse_config_text("# c\n\nd = 64\n tau=0.2 \n").unwrap();
        assert_eq!(m["d"], "64");
        assert_eq!(m["tau"], "0.2");
        assert!(parse_config_text("nonsense").is_err());
    }

    #[test]
    fn unknown_command_lists_valid_ones() {
        let err = RunConfig::from_args(&args(&["frobnicate"]), None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("verify-theorem1") && msg.contains("combine-image"));
        assert_eq!(exit_code(&Err(err)), 2);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_args(&args(&["verify-theorem2", "--bogus", "1"]), None).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn seed_precedence() {
        let c = RunConfig::from_args(&args(&["verify-theorem2", "--seed", "5"]), Some("9")).unwrap();
        assert_eq!(c.seed, 5);
        let c = RunConfig::from_args(&args(&["verify-theorem2"]), Some("9")).unwrap();
        assert_eq!(c.seed, 9);
        let c = RunConfig::from_args(&args(&["verify-theorem2"]), None).unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
        assert!(c.echo().contains("seed = 0"));
    }

    #[test]
    fn overrides_beat_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "n_datasets = 3\nk = 6\n").unwrap();
        let c = RunConfig::from_args(
            &args(&["verify-theorem2", "--config", path.to_str().unwrap(), "--k", "5"]),
            None,
        )
        .unwrap();
        assert_eq!(c.parameters["k"], "5");
        assert_eq!(c.parameters["n_datasets"], "3");
    }

    #[test]
    fn power_notation() {
        assert_eq!(parse_real("4096^0.5"), Some(64.0));
        assert_eq!(parse_real("0.25"), Some(0.25));
        assert_eq!(parse_real("x"), None);
    }

    #[test]
    fn output_names_stay_inside() {
        let c = RunConfig::from_args(&args(&["combine-image"]), None).unwrap();
        assert!(output_path(&c, "ok.ppm").is_ok());
        assert!(output_path(&c, "../escape.ppm").is_err());
        assert!(output_path(&c, "/tmp/x").is_err());
    }
}
