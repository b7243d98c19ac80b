//! Line-oriented `section.key = value` configuration with a fixed schema.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be in
//! the schema; values are checked against the key's kind when loaded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use micromacro::noise::ExperimentParams;
use micromacro::spdc::DetailedParams;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` set twice")]
    Duplicate { line: usize, key: String },
    #[error("`{key}` = `{value}`: expected {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: String,
    },
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// Probability-like, in [0, 1].
    Unit,
    NonNeg,
    Positive,
    Real,
    Count,
    Seed,
    Bool,
    Text,
    Choice(&'static [&'static str]),
}

impl Kind {
    fn expected(&self) -> String {
        match self {
            Kind::Unit => "a number in [0, 1]".into(),
            Kind::NonNeg => "a non-negative number".into(),
            Kind::Positive => "a positive number".into(),
            Kind::Real => "a finite number".into(),
            Kind::Count => "a non-negative integer".into(),
            Kind::Seed => "an unsigned 64-bit integer".into(),
            Kind::Bool => "true or false".into(),
            Kind::Text => "text".into(),
            Kind::Choice(c) => format!("one of {}", c.join(", ")),
        }
    }

    fn accepts(&self, v: &str) -> bool {
        let num = v.parse::<f64>().ok().filter(|x| x.is_finite());
        match self {
            Kind::Unit => num.is_some_and(|x| (0.0..=1.0).contains(&x)),
            Kind::NonNeg => num.is_some_and(|x| x >= 0.0),
            Kind::Positive => num.is_some_and(|x| x > 0.0),
            Kind::Real => num.is_some(),
            Kind::Count => v.parse::<usize>().is_ok(),
            Kind::Seed => v.parse::<u64>().is_ok(),
            Kind::Bool => v == "true" || v == "false",
            Kind::Text => !v.is_empty(),
            Kind::Choice(c) => c.contains(&v),
        }
    }
}

pub struct Entry {
    pub key: &'static str,
    pub kind: Kind,
    pub default: String,
    pub doc: &'static str,
}

/// Keys that do not change any computed number; left out of the hash.
const RUN_ONLY: [&str; 3] = ["run.out", "run.svg", "run.jobs"];

pub const READINGS: &[&str] = &["zeta_bar", "zeta"];

pub fn schema() -> Vec<Entry> {
    let e = ExperimentParams::default();
    let d = DetailedParams::default();
    let f = |x: f64| format!("{x}");
    let mut s = Vec::new();
    let mut add = |key, kind, default: String, doc| s.push(Entry { key, kind, default, doc });
    add("experiment.eta_h", Kind::Unit, f(e.eta_h), "heralding efficiency");
    add("experiment.t", Kind::Unit, f(e.t), "displacement beam-splitter transmittance");
    add("experiment.eta", Kind::Unit, f(e.eta), "memory storage-retrieval efficiency");
    add("experiment.v", Kind::Unit, f(e.v), "back-displacement visibility");
    add("experiment.v_mm", Kind::Unit, f(e.v_mm), "micro-micro entanglement visibility");
    add("experiment.eta_abs", Kind::Unit, f(e.eta_abs), "memory absorption probability");
    add("experiment.r_overlap", Kind::Unit, f(e.r_overlap), "HOM mode-overlap ratio");
    add("experiment.kappa", Kind::Positive, f(e.kappa), "mapping mu = kappa |alpha|^2");
    add(
        "experiment.residual",
        Kind::Choice(&["depolarized", "polarized"]),
        "depolarized".into(),
        "polarization of residual displacement light",
    );
    add("spread.eta_h", Kind::NonNeg, f(e.spread.eta_h), "band standard deviation");
    add("spread.t", Kind::NonNeg, f(e.spread.t), "band standard deviation");
    add("spread.eta", Kind::NonNeg, f(e.spread.eta), "band standard deviation");
    add("spread.v", Kind::NonNeg, f(e.spread.v), "band standard deviation");
    add("spread.v_mm", Kind::NonNeg, f(e.spread.v_mm), "band standard deviation");

    add("curves.alpha2_min", Kind::NonNeg, "0".into(), "grid start, |alpha|^2");
    add("curves.alpha2_max", Kind::NonNeg, "100".into(), "grid end, |alpha|^2");
    add("curves.alpha2_step", Kind::Positive, "0.5".into(), "grid step");
    add("curves.band_samples", Kind::Count, "200".into(), "parameter draws for bands");

    add("size.excitations", Kind::Positive, "47".into(), "memory excitations of the macro component");
    add("size.target", Kind::Unit, f(2.0 / 3.0), "guessing probability defining sigma_max");
    add("size.alpha2_small", Kind::NonNeg, "2".into(), "|alpha|^2 for the small-displacement row");
    add("size.sigma_min", Kind::NonNeg, "0".into(), "coarse-graining sweep start (photons)");
    add("size.sigma_max", Kind::Positive, "40".into(), "coarse-graining sweep end (photons)");
    add("size.sigma_step", Kind::Positive, "0.25".into(), "coarse-graining step");

    add("hom.mu_csp", Kind::NonNeg, "0.012".into(), "coherent pulse mean photon number");
    add("hom.p_pair", Kind::Positive, "0.005".into(), "pair probability per window");
    add("hom.eta_h", Kind::Unit, "0.19".into(), "signal heralding efficiency");
    add("hom.xi", Kind::Unit, "1".into(), "mode-overlap fraction");
    add("hom.herald_efficiency", Kind::Unit, "0.1".into(), "idler detector efficiency");
    add("hom.detector_efficiency", Kind::Unit, "1".into(), "HOM detector efficiency");
    add("hom.dark_count", Kind::Unit, "0".into(), "HOM detector dark-count probability");
    add("hom.mu_min", Kind::Positive, "0.0005".into(), "sweep start");
    add("hom.mu_max", Kind::Positive, "0.2".into(), "sweep end");
    add("hom.mu_points", Kind::Count, "40".into(), "log-spaced sweep points");
    add("hom.csp_fwhm", Kind::Positive, "1.19".into(), "coherent pulse FWHM (ns)");
    add("hom.tau_c", Kind::Positive, "1.9".into(), "heralded photon coherence time (ns)");
    add("hom.window_min", Kind::Positive, "0.1".into(), "window sweep start (ns)");
    add("hom.window_max", Kind::Positive, "20".into(), "window sweep end (ns)");
    add("hom.window_step", Kind::Positive, "0.1".into(), "window sweep step (ns)");
    add("hom.v_m", Kind::Unit, "0.74".into(), "measured HOM visibility");

    add("detailed.g", Kind::NonNeg, f(d.g), "squeezing parameter");
    add("detailed.r", Kind::Unit, f(d.r), "sqrt(1 - herald efficiency)");
    add("detailed.eta_d", Kind::Unit, f(d.eta_d), "Bob detector efficiency");
    add("detailed.p_dc", Kind::Unit, f(d.p_dc), "herald dark-count probability");
    add("detailed.t1", Kind::Unit, f(d.t1), "displacement amplitude transmission");
    add("detailed.t2", Kind::Unit, f(d.t2), "memory amplitude transmission");
    add("detailed.eta_c", Kind::Unit, f(d.eta_c), "coupling efficiency");
    add("detailed.gamma", Kind::NonNeg, f(d.gamma), "displacement amplitude");
    add("detailed.sigma_phi", Kind::NonNeg, f(d.sigma_phi), "phase noise (rad)");
    add("detailed.theta_disp_deg", Kind::Real, "0".into(), "displacement polarization (deg)");
    add("detailed.reading", Kind::Choice(READINGS), "zeta_bar".into(), "phase-noise term reading");
    add("detailed.quadrature_nodes", Kind::Count, f(d.quadrature_nodes as f64), "Gauss-Hermite nodes");
    add("detailed.samples", Kind::Count, "100000".into(), "Monte-Carlo samples per grid point");
    add("detailed.z_threshold", Kind::Positive, "3".into(), "oracle agreement threshold (SE)");
    add("detailed.gamma2_max", Kind::NonNeg, "60".into(), "CHSH sweep end, gamma^2");
    add("detailed.gamma2_step", Kind::Positive, "2".into(), "CHSH sweep step");

    add("memory.tau_s", Kind::NonNeg, "50".into(), "storage time (ns)");
    add("memory.phi", Kind::Real, f(std::f64::consts::PI), "phase on the delayed pulse (rad)");
    add("memory.delta_a", Kind::Real, "0".into(), "relative amplitude mismatch");

    add("tomo.state", Kind::Choice(&["model", "bell", "werner"]), "model".into(), "state to reconstruct");
    add("tomo.alpha2", Kind::NonNeg, "13.3".into(), "|alpha|^2 for the model state");
    add("tomo.werner_w", Kind::Unit, "0.9".into(), "Werner visibility");
    add("tomo.shots", Kind::Count, "1000000".into(), "shots per setting pair");

    add("run.seed", Kind::Seed, "1".into(), "master seed");
    add("run.out", Kind::Text, "out".into(), "output directory");
    add("run.svg", Kind::Bool, "false".into(), "also write SVG plots");
    add("run.jobs", Kind::Count, "0".into(), "worker threads, 0 = all cores");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: schema().into_iter().map(|e| (e.key.to_string(), e.default)).collect(),
        }
    }
}

fn kind_of(key: &str) -> Option<Kind> {
    schema().into_iter().find(|e| e.key == key).map(|e| e.kind)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: t.into() });
            };
            let (k, v) = (k.trim(), v.trim());
            if !k.contains('.') {
                return Err(ConfigError::Syntax { line, text: t.into() });
            }
            if kind_of(k).is_none() {
                return Err(ConfigError::UnknownKey { line, key: k.into() });
            }
            if seen.insert(k.to_string(), line).is_some() {
                return Err(ConfigError::Duplicate { line, key: k.into() });
            }
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey { line: 0, key: key.into() })?;
        if !kind.accepts(value) {
            return Err(ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
                expected: kind.expected(),
            });
        }
        self.values.insert(key.into(), value.into());
        Ok(())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).unwrap_or_else(|| panic!("key {key} not in schema"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.str(key).parse().expect("validated on load")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.str(key).parse().expect("validated on load")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.str(key).parse().expect("validated on load")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.str(key) == "true"
    }

    /// All keys in schema order, as a loadable config file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in schema() {
            let _ = writeln!(out, "{} = {}", e.key, self.str(e.key));
        }
        out
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.values {
            if !RUN_ONLY.contains(&k.as_str()) {
                h.update(format!("{k}={v}\n"));
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Inclusive arithmetic grid `min, min+step, ...` up to `max`.
    pub fn grid(&self, section: &str, name: &str) -> Result<Vec<f64>, ConfigError> {
        let (lo, hi, step) = (
            self.f64(&format!("{section}.{name}_min")),
            self.f64(&format!("{section}.{name}_max")),
            self.f64(&format!("{section}.{name}_step")),
        );
        if hi < lo {
            return Err(ConfigError::Invalid {
                key: format!("{section}.{name}_max"),
                reason: format!("grid is empty ({hi} < {lo})"),
            });
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| lo + i as f64 * step).collect())
    }
}

/// Schema listing for `--help`-style output.
pub fn describe() -> String {
    let mut out = String::new();
    for e in schema() {
        let _ = writeln!(out, "{:<28} {:<20} {}", e.key, e.default, e.doc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = RunConfig::default();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn rejects_unknown_key() {
        let err = RunConfig::parse("# c\nexperiment.eta_h = 0.2\nexperiment.bogus = 1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 3,
                key: "experiment.bogus".into()
            }
        );
        assert!(err.to_string().contains("experiment.bogus"));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            RunConfig::parse("experiment.eta_h = 1.5"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(RunConfig::parse("run.svg = yes"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("eta_h = 0.1"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(
            RunConfig::parse("hom.xi = 1\nhom.xi = 0.5"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
    }

    #[test]
    fn hash_ignores_run_only_keys() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.set("run.jobs", "3").unwrap();
        b.set("run.out", "elsewhere").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("run.seed", "2").unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn grids() {
        let c = RunConfig::default();
        let g = c.grid("curves", "alpha2").unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 100.0);
        let mut e = c.clone();
        e.set("curves.alpha2_max", "0").unwrap();
        e.set("curves.alpha2_min", "5").unwrap();
        assert!(matches!(e.grid("curves", "alpha2"), Err(ConfigError::Invalid { .. })));
    }
}
