//! Run settings merged from built-in defaults, a flat `key = value` config
//! file, `IOLRT_*` environment variables and command-line flags, in that
//! order of increasing precedence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{usage, CliError, CliResult};

pub const ENV_PREFIX: &str = "IOLRT_";

pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const KEYS: &[Key] = &[
    key("data", None, "long-format panel file"),
    key("country", Some("all"), "country codes, comma separated, or EU28"),
    key("year", Some("all"), "years: 2014, 2000-2014 or 2000,2005"),
    key("out", Some("out"), "output directory"),
    key("seed", Some("0"), "master random seed"),
    key("workers", Some("0"), "worker threads, 0 for one per core"),
    key("horizon", Some("inf"), "susceptibility truncation T in years, or inf"),
    key("noise", Some("proportional"), "noise covariance: proportional (eta*Y) or isotropic"),
    key("eta", Some("0.01"), "noise scale"),
    key("method", Some("analytic"), "analytic or monte-carlo"),
    key("dt", Some("0.01"), "simulation step in years"),
    key("length", Some("10000"), "recorded years per Monte Carlo replica"),
    key("burn-in", Some("50"), "discarded years before recording"),
    key("replicas", Some("4"), "Monte Carlo replicas"),
    key("standard-errors", Some("true"), "report replica standard errors"),
    key("sum-over", Some("second"), "index summed in sector susceptibility: second or first"),
    key("shock-type", Some("impulse"), "impulse, step or tabulated"),
    key("shock", Some("all=1"), "shock vector: all=V or SECTOR=V,SECTOR=V"),
    key("shock-file", None, "tabulated shock rate: header t,SECTOR,..."),
    key("response-horizon", Some("10"), "response grid length in years"),
    key("spacing", Some("0.01"), "response grid spacing in years"),
    key("recovery-threshold", Some("0.05"), "relative recovery band"),
    key("condition-cap", Some("1e12"), "largest accepted condition number of rho(t,1)"),
    key("ridge", Some("off"), "ridge fraction of the largest singular value, or off"),
    key("target", Some("changes"), "evaluate changes or levels"),
    key(
        "baselines",
        Some("arima111_expanding,arima111_full,var1,perturbed_io"),
        "baselines to compare against",
    ),
    key("arima-constant", Some("auto"), "auto, include or exclude"),
    key("var-samples", Some("10000"), "simulated yearly observations for VAR calibration"),
    key("var-calibration-year", Some("first"), "calibration year of the VAR, or first"),
    key("oracle-lrt", Some("false"), "replace LRT predictions by observations (harness check)"),
    key("change-measure", Some("signed"), "signed or absolute yearly changes"),
    key("base-year", Some("first"), "base year of the fluctuation prediction, or first"),
    key("scenario", None, "scenario file"),
    key("p", Some("0.05"), "disparity filter significance"),
    key("sidedness", Some("two-sided"), "two-sided or out-only"),
    key("format", Some("csv"), "backbone export: csv or graphml"),
    key("response-time", Some("off"), "attach impulse responses at this time to backbone nodes"),
    key("synth-countries", Some("AUT,DEU,FRA,ITA,USA"), "countries of a synthetic panel"),
    key("synth-first-year", Some("2000"), "first year of a synthetic panel"),
    key("synth-last-year", Some("2014"), "last year of a synthetic panel"),
    key("synth-sectors", Some("10"), "sectors of a synthetic panel"),
    key("synth-density", Some("0.5"), "share of nonzero coefficients"),
    key("synth-shock-scale", Some("0.03"), "yearly shock size relative to final demand"),
];

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase().replace('-', "_"))
}

fn known(name: &str) -> bool {
    KEYS.iter().any(|k| k.name == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Env,
    Flag,
}

impl Source {
    fn label(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "config",
            Source::Env => "env",
            Source::Flag => "flag",
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected key = value", i + 1));
        };
        let k = k.trim().replace('_', "-");
        if !known(&k) {
            return usage(format!("config line {}: unknown key {k:?}", i + 1));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<&'static str, (String, Source)>,
}

impl Settings {
    pub fn resolve(
        flags: &BTreeMap<String, String>,
        config: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> CliResult<Self> {
        let mut s = Settings::default();
        for k in KEYS {
            if let Some(d) = k.default {
                s.values.insert(k.name, (d.to_string(), Source::Default));
            }
        }
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text)? {
                s.set(&k, v, Source::File);
            }
        }
        let env: BTreeMap<String, String> = env.into_iter().collect();
        for k in KEYS {
            if let Some(v) = env.get(&env_name(k.name)) {
                s.set(k.name, v.clone(), Source::Env);
            }
        }
        for (k, v) in flags {
            if !known(k) {
                return usage(format!("unknown setting {k:?}"));
            }
            s.set(k, v.clone(), Source::Flag);
        }
        Ok(s)
    }

    fn set(&mut self, name: &str, value: String, source: Source) {
        let key = KEYS.iter().find(|k| k.name == name).expect("checked key");
        self.values.insert(key.name, (value, source));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        match self.get(key) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => usage(format!("missing required setting --{key}")),
        }
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| CliError::Usage(format!("invalid value {raw:?} for --{key}")))
    }

    /// `None` for the values `off`, `first` and `none`.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) if matches!(v.trim(), "" | "off" | "first" | "none") => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        match self.require(key)?.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            other => usage(format!("invalid boolean {other:?} for --{key}")),
        }
    }

    pub fn choice<'a>(&self, key: &str, options: &[&'a str]) -> CliResult<&'a str> {
        let raw = self.require(key)?;
        options
            .iter()
            .find(|o| o.eq_ignore_ascii_case(raw))
            .copied()
            .ok_or_else(|| {
                CliError::Usage(format!("--{key} must be one of {}, got {raw:?}", options.join(", ")))
            })
    }

    /// The resolved settings in config-file syntax.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        for (k, (v, _)) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn to_json(&self) -> (serde_json::Value, serde_json::Value) {
        let mut values = serde_json::Map::new();
        let mut sources = serde_json::Map::new();
        for (k, (v, src)) in &self.values {
            values.insert(k.to_string(), v.clone().into());
            sources.insert(k.to_string(), src.label().into());
        }
        (values.into(), sources.into())
    }
}
