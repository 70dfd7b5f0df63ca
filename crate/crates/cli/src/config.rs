//! Experiment configuration: `key = value` lines, one setting each.
//!
//! Flags and files go through the same parser so they validate identically; flags are
//! overlaid on the file afterwards.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use slidekick::regularization::RegularizationProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Inclusive `start:stop:count` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub model: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub profile: Option<String>,
    pub eps: Option<Vec<f64>>,
    pub y0: Option<f64>,
    pub probe: Option<Vec<f64>>,
    pub output: Option<String>,
    pub p: Option<u32>,
    pub phi_p: Option<f64>,
    pub u_start: Option<f64>,
    pub family: Option<String>,
    pub mu: Option<Range>,
    pub start: Option<[f64; 2]>,
    pub t_end: Option<f64>,
    pub from_x: Option<f64>,
    pub to_v: Option<f64>,
    pub only: Option<Vec<u32>>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    let out = v.split(',').map(|s| num(key, s)).collect::<Result<Vec<T>, _>>()?;
    if out.is_empty() {
        return Err(ConfigError(format!("`{key}` is empty")));
    }
    Ok(out)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parse a whole file. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", n + 1)))?;
            c.set(k.trim(), v.trim()).map_err(|e| ConfigError(format!("line {}: {}", n + 1, e.0)))?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        if let Some(name) = key.strip_prefix("param.") {
            self.params.insert(name.to_string(), num(key, v)?);
            return Ok(());
        }
        match key {
            "command" => self.command = Some(v.to_string()),
            "model" => self.model = Some(v.to_string()),
            "profile" => {
                RegularizationProfile::from_str(v).map_err(|e| ConfigError(format!("`profile`: {e}")))?;
                self.profile = Some(v.to_string());
            }
            "eps" => {
                let e: Vec<f64> = list(key, v)?;
                if e.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                    return Err(ConfigError("`eps` values must lie in (0, 1)".into()));
                }
                self.eps = Some(e);
            }
            "y0" => self.y0 = Some(num(key, v)?),
            "probe" => self.probe = Some(list(key, v)?),
            "output" => self.output = Some(v.to_string()),
            "p" => self.p = Some(num(key, v)?),
            "phi_p" => self.phi_p = Some(num(key, v)?),
            "u_start" => self.u_start = Some(num(key, v)?),
            "family" => self.family = Some(v.to_string()),
            "mu" => {
                let parts: Vec<&str> = v.split(':').collect();
                if parts.len() != 3 {
                    return Err(ConfigError("`mu` must be start:stop:count".into()));
                }
                let count: usize = num(key, parts[2])?;
                if count == 0 {
                    return Err(ConfigError("`mu` count must be positive".into()));
                }
                self.mu = Some(Range { start: num(key, parts[0])?, stop: num(key, parts[1])?, count });
            }
            "start" => {
                let s: Vec<f64> = list(key, v)?;
                if s.len() != 2 {
                    return Err(ConfigError("`start` must be x,y".into()));
                }
                self.start = Some([s[0], s[1]]);
            }
            "t_end" => self.t_end = Some(num(key, v)?),
            "from_x" => self.from_x = Some(num(key, v)?),
            "to_v" => self.to_v = Some(num(key, v)?),
            "only" => self.only = Some(list(key, v)?),
            "rtol" => self.rtol = Some(num(key, v)?),
            "atol" => self.atol = Some(num(key, v)?),
            _ => return Err(ConfigError(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical `key = value` pairs; parsing them back gives an identical config.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![];
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        put("command", self.command.clone());
        put("model", self.model.clone());
        put("profile", self.profile.clone());
        put("eps", self.eps.as_deref().map(join));
        put("y0", self.y0.map(|v| v.to_string()));
        put("probe", self.probe.as_deref().map(join));
        put("output", self.output.clone());
        put("p", self.p.map(|v| v.to_string()));
        put("phi_p", self.phi_p.map(|v| v.to_string()));
        put("u_start", self.u_start.map(|v| v.to_string()));
        put("family", self.family.clone());
        put("mu", self.mu.map(|r| format!("{}:{}:{}", r.start, r.stop, r.count)));
        put("start", self.start.map(|s| join(&s)));
        put("t_end", self.t_end.map(|v| v.to_string()));
        put("from_x", self.from_x.map(|v| v.to_string()));
        put("to_v", self.to_v.map(|v| v.to_string()));
        put("only", self.only.as_deref().map(join));
        put("rtol", self.rtol.map(|v| v.to_string()));
        put("atol", self.atol.map(|v| v.to_string()));
        for (k, v) in &self.params {
            out.push((format!("param.{k}"), v.to_string()));
        }
        out
    }

    pub fn emit(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Settings present in `top` replace ours.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        for (k, v) in top.pairs() {
            self.set(&k, &v).expect("canonical pairs always parse");
        }
        self
    }
}
