//! Scenario configuration, loaded from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys anywhere in the file are rejected.

use std::path::{Path, PathBuf};

use fdzf_core::channel::{self, ArrayGeometry, UeGeometry, UeLayout};
use fdzf_core::neumann::{ErrorMetric, MAX_ORDER};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", parse_message(.line, .column, .key, .message))]
    Parse {
        line: Option<usize>,
        column: Option<usize>,
        /// Offending key, when the parser names one.
        key: Option<String>,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn parse_message(line: &Option<usize>, column: &Option<usize>, key: &Option<String>, message: &str) -> String {
    let mut out = String::from("config parse error");
    if let (Some(l), Some(c)) = (line, column) {
        out.push_str(&format!(" at line {l}, column {c}"));
    }
    if let Some(k) = key {
        out.push_str(&format!(" (key `{k}`)"));
    }
    out.push_str(": ");
    out.push_str(message.trim());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// All link gains 1; the operating SNR is the per-UE SNR scale.
    Unit,
    /// Distances uniform over the cell area, log-distance pathloss and
    /// log-normal shadowing.
    LinkBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    RightDivision,
    DiagonalRatio,
}

impl From<MetricName> for ErrorMetric {
    fn from(m: MetricName) -> Self {
        match m {
            MetricName::RightDivision => ErrorMetric::RightDivision,
            MetricName::DiagonalRatio => ErrorMetric::DiagonalRatio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Ula,
    Upa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// Columns (horizontal). Ignored for a ULA.
    pub m_x: usize,
    /// Rows (vertical).
    pub m_z: usize,
    /// Spacings in wavelengths.
    pub d_x: f64,
    pub d_z: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            kind: GeometryKind::Upa,
            m_x: 8,
            m_z: 16,
            d_x: channel::DEFAULT_SPACING_X,
            d_z: channel::DEFAULT_SPACING_Z,
        }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> fdzf_core::Result<ArrayGeometry> {
        match self.kind {
            GeometryKind::Ula => ArrayGeometry::ula(self.m_z, self.d_z),
            GeometryKind::Upa => ArrayGeometry::upa(self.m_x, self.m_z, self.d_x, self.d_z),
        }
    }

    /// Same kind and spacings with `m` antennas, used by the antenna sweep.
    pub fn with_antennas(&self, m: usize) -> fdzf_core::Result<ArrayGeometry> {
        match self.kind {
            GeometryKind::Ula => ArrayGeometry::ula(m, self.d_z),
            GeometryKind::Upa => ArrayGeometry::upa_with_antennas(m, self.d_x, self.d_z),
        }
    }

    pub fn num_antennas(&self) -> usize {
        match self.kind {
            GeometryKind::Ula => self.m_z,
            GeometryKind::Upa => self.m_x * self.m_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeAngles {
    pub az_deg: f64,
    pub el_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub reference_az_deg: f64,
    pub reference_el_deg: f64,
    pub az_separation_deg: f64,
    pub el_separation_deg: f64,
    /// Explicit LOS angles per UE; overrides the separations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ues: Option<Vec<UeAngles>>,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            reference_az_deg: 0.0,
            reference_el_deg: 100.0,
            az_separation_deg: 30.0,
            el_separation_deg: 15.0,
            ues: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub az_separation_deg: f64,
    #[serde(default)]
    pub el_separation_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ues: Option<Vec<UeAngles>>,
}

impl Scenario {
    pub fn separation(az: f64, el: f64) -> Self {
        Scenario {
            name: None,
            az_separation_deg: az,
            el_separation_deg: el,
            ues: None,
        }
    }

    pub fn label(&self) -> String {
        match (&self.name, &self.ues) {
            (Some(n), _) => n.clone(),
            (None, Some(_)) => "explicit".to_string(),
            (None, None) => format!("az{}_el{}", self.az_separation_deg, self.el_separation_deg),
        }
    }
}

fn default_snr_scenarios() -> Vec<Scenario> {
    let mut s: Vec<Scenario> = [30.0, 10.0, 7.5, 5.0].iter().map(|&az| Scenario::separation(az, 15.0)).collect();
    s.push(Scenario::separation(30.0, 10.0));
    s
}

fn default_se_scenarios() -> Vec<Scenario> {
    [30.0, 10.0, 7.5, 5.0].iter().map(|&az| Scenario::separation(az, 15.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_scenarios: Vec<Scenario>,
    pub se_scenarios: Vec<Scenario>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            snr_scenarios: default_snr_scenarios(),
            se_scenarios: default_se_scenarios(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsAccuracyConfig {
    pub m_values: Vec<usize>,
    pub n_drops: usize,
    pub n_realizations_per_drop: usize,
    /// Second series order reported next to `neumann_order`.
    pub compare_order: usize,
}

impl Default for NsAccuracyConfig {
    fn default() -> Self {
        NsAccuracyConfig {
            m_values: vec![10, 32, 64, 128, 256],
            n_drops: 100,
            n_realizations_per_drop: 10,
            compare_order: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub m_x: usize,
    pub m_z: usize,
    pub n_ues: usize,
    pub n_realizations: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            m_x: 4,
            m_z: 4,
            n_ues: 2,
            n_realizations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetConfig {
    pub min_distance_m: f64,
    pub shadowing: bool,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        LinkBudgetConfig {
            min_distance_m: 35.0,
            shadowing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub n_ues: usize,
    pub n_paths: usize,
    pub asd_az_deg: f64,
    pub asd_el_deg: f64,
    pub beta_mode: BetaMode,
    pub cell_radius_m: f64,
    pub carrier_ghz: f64,
    /// `P_EIRP / sigma^2` in dB, with `sigma^2 = 1`.
    pub operating_snr_db: Vec<f64>,
    pub n_drops: usize,
    pub n_realizations_per_drop: usize,
    pub neumann_order: usize,
    pub error_metric: MetricName,
    pub geometry: GeometryConfig,
    pub placement: PlacementConfig,
    pub sweep: SweepConfig,
    pub ns_accuracy: NsAccuracyConfig,
    pub oracle: OracleConfig,
    pub link_budget: LinkBudgetConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 1,
            n_ues: 4,
            n_paths: channel::DEFAULT_N_PATHS,
            asd_az_deg: channel::DEFAULT_ASD_AZ_DEG,
            asd_el_deg: channel::DEFAULT_ASD_EL_DEG,
            beta_mode: BetaMode::Unit,
            cell_radius_m: 500.0,
            carrier_ghz: 3.7,
            operating_snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            n_drops: 200,
            n_realizations_per_drop: 200,
            neumann_order: 2,
            error_metric: MetricName::RightDivision,
            geometry: GeometryConfig::default(),
            placement: PlacementConfig::default(),
            sweep: SweepConfig::default(),
            ns_accuracy: NsAccuracyConfig::default(),
            oracle: OracleConfig::default(),
            link_budget: LinkBudgetConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn check_angles(ues: &[UeAngles], n_ues: usize, what: &str) -> Result<(), ConfigError> {
    if ues.len() != n_ues {
        return Err(invalid(format!("{what}: {} explicit UEs but n_ues = {n_ues}", ues.len())));
    }
    if ues.iter().any(|u| !u.az_deg.is_finite() || !u.el_deg.is_finite()) {
        return Err(invalid(format!("{what}: UE angles must be finite")));
    }
    Ok(())
}

fn check_scenario(s: &Scenario, n_ues: usize, what: &str) -> Result<(), ConfigError> {
    if !(s.az_separation_deg >= 0.0 && s.el_separation_deg >= 0.0) {
        return Err(invalid(format!("{what} `{}`: separations must be >= 0", s.label())));
    }
    if let Some(ues) = &s.ues {
        check_angles(ues, n_ues, what)?;
    }
    Ok(())
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimulationConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_antennas(&self) -> usize {
        self.geometry.num_antennas()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let geom = self.geometry.build().map_err(|e| invalid(format!("geometry: {e}")))?;
        let m = geom.num_antennas();
        for (name, v) in [
            ("n_ues", self.n_ues),
            ("n_paths", self.n_paths),
            ("n_drops", self.n_drops),
            ("n_realizations_per_drop", self.n_realizations_per_drop),
            ("ns_accuracy.n_drops", self.ns_accuracy.n_drops),
            ("ns_accuracy.n_realizations_per_drop", self.ns_accuracy.n_realizations_per_drop),
            ("oracle.n_ues", self.oracle.n_ues),
            ("oracle.n_realizations", self.oracle.n_realizations),
        ] {
            if v == 0 {
                return Err(invalid(format!("{name} must be >= 1")));
            }
        }
        if self.n_ues > m {
            return Err(invalid(format!("n_ues = {} exceeds M = {m}", self.n_ues)));
        }
        for (name, order) in [
            ("neumann_order", self.neumann_order),
            ("ns_accuracy.compare_order", self.ns_accuracy.compare_order),
        ] {
            if order > MAX_ORDER {
                return Err(invalid(format!("{name} = {order} exceeds {MAX_ORDER}")));
            }
        }
        for (name, v) in [("asd_az_deg", self.asd_az_deg), ("asd_el_deg", self.asd_el_deg)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and >= 0")));
            }
        }
        if !(self.cell_radius_m > self.link_budget.min_distance_m && self.link_budget.min_distance_m > 0.0) {
            return Err(invalid("need 0 < link_budget.min_distance_m < cell_radius_m"));
        }
        if !(self.carrier_ghz > 0.0 && self.carrier_ghz.is_finite()) {
            return Err(invalid("carrier_ghz must be positive"));
        }
        if self.operating_snr_db.is_empty() || self.operating_snr_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("operating_snr_db must be a non-empty list of finite values"));
        }

        let p = &self.placement;
        check_scenario(
            &Scenario {
                name: Some("placement".into()),
                az_separation_deg: p.az_separation_deg,
                el_separation_deg: p.el_separation_deg,
                ues: p.ues.clone(),
            },
            self.n_ues,
            "placement",
        )?;
        for s in &self.sweep.snr_scenarios {
            check_scenario(s, self.n_ues, "sweep.snr_scenarios")?;
        }
        for s in &self.sweep.se_scenarios {
            check_scenario(s, self.n_ues, "sweep.se_scenarios")?;
        }
        for &mv in &self.ns_accuracy.m_values {
            self.geometry.with_antennas(mv).map_err(|e| invalid(format!("ns_accuracy M = {mv}: {e}")))?;
            if mv < self.n_ues {
                return Err(invalid(format!("ns_accuracy M = {mv} is below n_ues = {}", self.n_ues)));
            }
        }
        if self.ns_accuracy.m_values.is_empty() {
            return Err(invalid("ns_accuracy.m_values must not be empty"));
        }
        let oracle_m = self.oracle.m_x * self.oracle.m_z;
        if oracle_m == 0 || self.oracle.n_ues > oracle_m {
            return Err(invalid("oracle needs 1 <= n_ues <= m_x * m_z"));
        }
        if p.ues.is_some() && self.oracle.n_ues != self.n_ues {
            return Err(invalid("explicit placement needs oracle.n_ues = n_ues"));
        }
        Ok(())
    }

    /// LOS geometry for a scenario, before link gains are known.
    pub fn scenario_ues(&self, scenario: &Scenario, n_ues: usize) -> fdzf_core::Result<Vec<UeGeometry>> {
        match &scenario.ues {
            Some(list) => list
                .iter()
                .take(n_ues)
                .map(|u| UeGeometry::new(u.az_deg, u.el_deg, self.asd_az_deg, self.asd_el_deg, 1.0))
                .collect(),
            None => UeLayout {
                reference_az_deg: self.placement.reference_az_deg,
                reference_el_deg: self.placement.reference_el_deg,
                az_separation_deg: scenario.az_separation_deg,
                el_separation_deg: scenario.el_separation_deg,
                az_asd_deg: self.asd_az_deg,
                el_asd_deg: self.asd_el_deg,
            }
            .ues(n_ues, None),
        }
    }

    /// The `[placement]` section as a scenario.
    pub fn placement_scenario(&self) -> Scenario {
        Scenario {
            name: Some("placement".into()),
            az_separation_deg: self.placement.az_separation_deg,
            el_separation_deg: self.placement.el_separation_deg,
            ues: self.placement.ues.clone(),
        }
    }
}

fn parse_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (Some(line), Some(column))
        }
        None => (None, None),
    };
    let message = err.message().to_string();
    // "unknown field `x`, expected ..." and "missing field `x`"
    let key = message
        .find("field `")
        .map(|i| &message[i + 7..])
        .and_then(|rest| rest.find('`').map(|j| rest[..j].to_string()));
    ConfigError::Parse {
        line,
        column,
        key,
        message,
    }
}

pub fn load_config(path: &Path) -> Result<SimulationConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SimulationConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(SimulationConfig::from_toml_str("").unwrap(), SimulationConfig::default());
    }

    #[test]
    fn geometry_default_is_128() {
        let cfg = SimulationConfig::default();
        assert_eq!(cfg.num_antennas(), 128);
        assert_eq!(cfg.geometry.build().unwrap().m_z(), 16);
    }

    #[test]
    fn scenario_labels() {
        assert_eq!(Scenario::separation(7.5, 15.0).label(), "az7.5_el15");
        let mut s = Scenario::separation(1.0, 1.0);
        s.name = Some("x".into());
        assert_eq!(s.label(), "x");
    }

    #[test]
    fn parse_error_position() {
        let err = SimulationConfig::from_toml_str("seed = 3\nn_uess = 4\n").unwrap_err();
        match err {
            ConfigError::Parse { line, column, key, .. } => {
                assert_eq!(line, Some(2));
                assert_eq!(column, Some(1));
                assert_eq!(key.as_deref(), Some("n_uess"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "n_ues = 0",
            "n_ues = 200",
            "neumann_order = 9",
            "operating_snr_db = []",
            "[placement]\naz_separation_deg = -1.0",
            "[ns_accuracy]\nm_values = [2]",
            "[placement]\nues = [{ az_deg = 0.0, el_deg = 90.0 }]",
        ] {
            assert!(
                matches!(SimulationConfig::from_toml_str(text), Err(ConfigError::Invalid(_))),
                "{text}"
            );
        }
    }
}
