//! Experiment configuration: a TOML file with one table per section.
//!
//! ```toml
//! [model]
//! name = "advsel1d"
//! params = { r0 = 6.0, r1 = 4.0 }
//!
//! [initial]
//! name = "one-minus-x"
//! lo = [0.0]
//! hi = [1.0]
//!
//! [discretization]
//! h_list = [0.01, 0.005, 0.0025]
//! eps = { rule = "power", q = 0.5 }
//! cutoff = "gaussian"
//!
//! [run]
//! t_final = 1.0
//!
//! [oracle]
//! enabled = true
//! dx = 1.25e-4
//! ```
//!
//! Any key can be overridden from the environment as
//! `WDM_<SECTION>__<KEY>=<toml value>`, e.g. `WDM_RUN__T_FINAL=2` or
//! `WDM_MODEL__PARAMS__R1=0.5`. Values that do not parse as TOML are taken
//! as strings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wdm_core::regularize::{Cutoff, EpsilonRule};

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "WDM_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Reserved; every pipeline is deterministic.
    pub seed: u64,
    pub model: ModelSection,
    pub initial: InitialSection,
    pub discretization: DiscretizationSection,
    pub run: RunSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    /// `friedman2d`: velocity components in `t, x1, x2, I1, I2` and the params.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<String>>,
    /// `friedman2d`: `div_x a` in the same variables; finite differences if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<String>,
    /// `friedman2d`: growth rate `R` in `t, x1, x2, I`; zero if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<String>,
    /// `friedman2d`: declared bound on `|a|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_sup: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            name: "advsel1d".into(),
            params: BTreeMap::new(),
            velocity: None,
            divergence: None,
            growth: None,
            a_sup: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    /// Support box corners, one entry per dimension.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            name: "one-minus-x".into(),
            params: BTreeMap::new(),
            lo: vec![0.0],
            hi: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<f64>>,
    pub eps: EpsilonRule,
    pub cutoff: String,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            h: None,
            h_list: None,
            eps: EpsilonRule::Power { q: 0.5 },
            cutoff: "gaussian".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    /// Defaults to `min(1e-3, h_min / (2 a_sup))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Time between stored snapshots; defaults to `t_final / 8`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<f64>,
    pub negative_alarm: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            dt: None,
            snapshot_interval: None,
            negative_alarm: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub enabled: bool,
    pub dx: f64,
    pub dt: f64,
    pub tol: f64,
    pub substeps: usize,
    /// Zero cells on each side; by default enough for the reconstruction tails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
    /// `asymptote`: halve `dx` and `dt` until the limit mass moves by less than this.
    pub refine_tol: f64,
    pub max_refinements: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            enabled: false,
            dx: 1e-3,
            dt: 1e-3,
            tol: 1e-10,
            substeps: 4,
            padding: None,
            refine_tol: 1e-3,
            max_refinements: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Artifact directory; `--out` takes precedence. Not echoed in manifests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Reconstruction grid spacing; defaults to `eps / 4` in 1D, `eps / 2` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_spacing: Option<f64>,
    pub snapshots: bool,
    pub frames: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            grid_spacing: None,
            snapshots: true,
            frames: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Stationarity window at the end of the run.
    pub window: f64,
    /// Cluster linking radius; defaults to `10 h`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pos_tol: Option<f64>,
    pub mass_tol: f64,
    /// Weak gaps above this for every `h` count as stagnation.
    pub gap_floor: f64,
    /// Sample points per axis for the mutation residual.
    pub samples: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            window: 5.0,
            pos_tol: None,
            mass_tol: 1e-3,
            gap_floor: 0.05,
            samples: 101,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_scalar(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `WDM_<SECTION>__<KEY>` overrides from `vars` to a parsed config,
/// in sorted key order.
pub fn apply_overrides<I>(doc: &mut toml::Table, vars: I) -> CliResult<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_ascii_lowercase())
            .collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(usage(format!("malformed override {key}")));
        }
        let (last, parents) = path.split_last().expect("non-empty");
        let mut table = &mut *doc;
        for p in parents {
            let entry = table
                .entry(p.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| usage(format!("override {key}: '{p}' is not a section")))?;
        }
        table.insert(last.clone(), parse_scalar(&raw));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        Self::from_toml_with(text, std::iter::empty())
    }

    /// Parses `text`, applies the overrides in `vars`, and validates.
    pub fn from_toml_with<I>(text: &str, vars: I) -> CliResult<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut doc: toml::Table = text.parse().map_err(|e| usage(format!("config: {e}")))?;
        apply_overrides(&mut doc, vars)?;
        let cfg: Self = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file with the process environment's overrides.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_with(&text, std::env::vars())
    }

    /// The resolved config as written to manifests; the output directory is
    /// left out so that artifacts do not depend on where they are written.
    pub fn manifest(&self, mode: &str) -> String {
        let mut echo = self.clone();
        echo.output.dir = None;
        let body = toml::to_string(&echo).expect("config serializes");
        format!("# wdm {mode}\n{body}")
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.discretization;
        if let Some(h) = d.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(usage(format!("discretization.h = {h} must be positive")));
            }
        }
        if let Some(list) = &d.h_list {
            if list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                return Err(usage("discretization.h_list entries must be positive"));
            }
            if list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(usage("discretization.h_list must be strictly decreasing"));
            }
        }
        d.eps
            .exponent()
            .map_err(|e| usage(format!("discretization.eps: {e}")))?;
        Cutoff::by_name(&d.cutoff, 1).map_err(|e| usage(format!("discretization.cutoff: {e}")))?;

        let r = &self.run;
        if !(r.t_final >= 0.0 && r.t_final.is_finite()) {
            return Err(usage(format!("run.t_final = {} must be non-negative", r.t_final)));
        }
        if let Some(dt) = r.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(usage(format!("run.dt = {dt} must be positive")));
            }
        }
        if let Some(s) = r.snapshot_interval {
            if !(s > 0.0) {
                return Err(usage(format!("run.snapshot_interval = {s} must be positive")));
            }
        }
        if !(r.negative_alarm >= 0.0) {
            return Err(usage("run.negative_alarm must be non-negative"));
        }

        let i = &self.initial;
        if i.lo.is_empty() || i.lo.len() != i.hi.len() {
            return Err(usage("initial.lo and initial.hi need the same non-zero length"));
        }
        if i.lo.iter().zip(&i.hi).any(|(a, b)| !(a <= b)) {
            return Err(usage("initial.lo must not exceed initial.hi"));
        }

        let o = &self.oracle;
        if o.enabled && !(o.dx > 0.0 && o.dt > 0.0 && o.tol > 0.0 && o.substeps > 0 && o.refine_tol > 0.0) {
            return Err(usage("oracle dx, dt, tol, substeps and refine_tol must be positive"));
        }
        if let Some(g) = self.output.grid_spacing {
            if !(g > 0.0) {
                return Err(usage(format!("output.grid_spacing = {g} must be positive")));
            }
        }
        let a = &self.analysis;
        if !(a.window > 0.0 && a.mass_tol > 0.0 && a.gap_floor >= 0.0) {
            return Err(usage("analysis.window and analysis.mass_tol must be positive"));
        }
        if let Some(p) = a.pos_tol {
            if !(p > 0.0) {
                return Err(usage("analysis.pos_tol must be positive"));
            }
        }
        Ok(())
    }

    /// The single `h` of a run: `discretization.h`, else the finest entry of `h_list`.
    pub fn single_h(&self) -> CliResult<f64> {
        let d = &self.discretization;
        d.h.or_else(|| d.h_list.as_ref().and_then(|l| l.last().copied()))
            .ok_or_else(|| usage("discretization.h is required"))
    }

    /// The sweep: `h_list`, else the single `h`.
    pub fn sweep(&self) -> CliResult<Vec<f64>> {
        let d = &self.discretization;
        match (&d.h_list, d.h) {
            (Some(list), _) if !list.is_empty() => Ok(list.clone()),
            (_, Some(h)) => Ok(vec![h]),
            _ => Err(usage("discretization.h or discretization.h_list is required")),
        }
    }

    /// The config of one sweep member.
    pub fn member(&self, h: f64) -> Self {
        let mut m = self.clone();
        m.discretization.h = Some(h);
        m.discretization.h_list = None;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
name = "advsel1d"
params = { r0 = 6.0, r1 = 4.0 }

[discretization]
h = 0.01

[run]
t_final = 1.0
"#;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.discretization.eps, EpsilonRule::Power { q: 0.5 });
        assert_eq!(c.discretization.cutoff, "gaussian");
        assert_eq!(c.initial.name, "one-minus-x");
        assert!(!c.oracle.enabled);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ExperimentConfig::from_toml_with(
            BASE,
            env(&[
                ("WDM_RUN__T_FINAL", "2.5"),
                ("WDM_MODEL__PARAMS__R1", "0.5"),
                ("WDM_INITIAL__NAME", "const6"),
                ("WDM_DISCRETIZATION__H_LIST", "[0.1, 0.05, 0.025]"),
                ("OTHER", "x"),
            ]),
        )
        .unwrap();
        assert_eq!(c.run.t_final, 2.5);
        assert_eq!(c.model.params["r1"], 0.5);
        assert_eq!(c.initial.name, "const6");
        assert_eq!(c.discretization.h_list, Some(vec![0.1, 0.05, 0.025]));
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for (k, v) in [
            ("WDM_DISCRETIZATION__H", "-1"),
            ("WDM_DISCRETIZATION__H_LIST", "[0.1, 0.2]"),
            ("WDM_DISCRETIZATION__CUTOFF", "boxcar"),
            ("WDM_RUN__NO_SUCH_KEY", "1"),
            ("WDM_RUN__T_FINAL", "fast"),
        ] {
            let r = ExperimentConfig::from_toml_with(BASE, env(&[(k, v)]));
            assert!(matches!(r, Err(CliError::Usage(_))), "{k}={v}");
        }
    }

    #[test]
    fn manifest_round_trips_without_the_output_dir() {
        let mut c = ExperimentConfig::from_toml_str(BASE).unwrap();
        c.output.dir = Some("somewhere".into());
        let text = c.manifest("simulate");
        assert!(text.starts_with("# wdm simulate\n"));
        assert!(!text.contains("somewhere"));
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        c.output.dir = None;
        assert_eq!(back, c);
    }
}
