//! Simulation configuration: the full initialization table plus the three
//! swept agent parameters.
//!
//! Configs are read from flat `key=value` text. Blank lines and lines starting
//! with `#` are ignored. Every key of the table must appear exactly once; the
//! only optional key is `lifespan_basis`. [`SimConfig::default`] carries the
//! published baseline values for programmatic use.

use std::path::Path;

use crate::SimError;

/// Which consumption quantities enter the lifespan update.
///
/// The lifespan rule multiplies an energy term and a food term. `Obtained`
/// uses what the agent actually gathered this turn (scarcity shortens life),
/// `Demanded` uses the agent's nominal per-turn demands regardless of what
/// the grids could supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifespanBasis {
    Obtained,
    Demanded,
}

/// Complete simulation setup. Field names follow the initialization table.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Renewable energy produced per site per turn.
    pub gamma: f64,
    /// Line of sight radius (Chebyshev).
    pub lambda: usize,
    /// Destruction limited by caring agents: their impact becomes beta2*(1-omega).
    pub omega: f64,
    /// Ecosystem renewal rate while 0 < B < beta_k.
    pub beta1: f64,
    /// Ecosystem destruction per agent per turn.
    pub beta2: f64,
    /// Local ecosystem capacity gating the growth term (file key `betaK`).
    pub beta_k: f64,
    /// Food carried over from one turn to the next.
    pub phi1: f64,
    /// Food production rate from fossil energy, ecosystems and renewables.
    pub phi2: f64,
    /// Stand-alone food production rate from ecosystems and renewables.
    pub phi3: f64,
    /// Minimal lifespan when fully consumption-dependent.
    pub xi1: f64,
    /// Maximal lifespan.
    pub xi2: f64,
    /// Weight of consumption in the lifespan rule.
    pub xi3: f64,
    /// Weight of local crowding in the lifespan rule.
    pub xi4: f64,
    /// Density below which crowding has no effect.
    pub xi5: f64,
    /// Density above which the crowding effect saturates.
    pub xi6: f64,
    /// Side length of the square world.
    pub s: usize,
    /// Turn budget for a run.
    pub t_max: u32,
    /// Initial population.
    pub n_agents: usize,
    /// Initial fossil energy, split equally over the urban patches.
    pub n_fossil: f64,
    /// Initial food, randomly spread over all sites.
    pub n_food: f64,
    /// Initial ecosystem richness, randomly spread over all sites.
    pub n_eco: f64,
    /// Number of distinct urban patches.
    pub n_urban: usize,
    /// Master RNG seed.
    pub seed: u64,
    /// Movement probability shared by all agents at start.
    pub alpha3: f64,
    /// Reproduction probability.
    pub alpha4: f64,
    /// Cooperation probability.
    pub alpha5: f64,
    /// Shape parameter of the Beta(alpha, 6-alpha) consumption-profile draw.
    pub beta_alpha: f64,
    /// Consumption basis for the lifespan rule (optional file key).
    pub lifespan_basis: LifespanBasis,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gamma: 10.0,
            lambda: 3,
            omega: 0.5,
            beta1: 2.0,
            beta2: 1.2,
            beta_k: 10.0,
            phi1: 0.1,
            phi2: 0.6,
            phi3: 0.001,
            xi1: 24.0,
            xi2: 100.0,
            xi3: 0.8,
            xi4: 0.6,
            xi5: 2.0,
            xi6: 14.3,
            s: 100,
            t_max: 1500,
            n_agents: 100,
            n_fossil: 1e4,
            n_food: 1e4,
            n_eco: 1e4,
            n_urban: 422,
            seed: 42,
            alpha3: 0.5,
            alpha4: 0.02,
            alpha5: 0.5,
            beta_alpha: 3.0,
            lifespan_basis: LifespanBasis::Obtained,
        }
    }
}

/// Required file keys, in reporting order.
const REQUIRED_KEYS: [&str; 27] = [
    "gamma",
    "lambda",
    "omega",
    "beta1",
    "beta2",
    "betaK",
    "phi1",
    "phi2",
    "phi3",
    "xi1",
    "xi2",
    "xi3",
    "xi4",
    "xi5",
    "xi6",
    "s",
    "t_max",
    "n_agents",
    "n_fossil",
    "n_food",
    "n_eco",
    "n_urban",
    "seed",
    "alpha3",
    "alpha4",
    "alpha5",
    "beta_alpha",
];

fn parse_f64(key: &str, raw: &str) -> Result<f64, SimError> {
    raw.parse::<f64>().map_err(|_| SimError::InvalidValue {
        key: key.to_string(),
        message: format!("expected a number, got {raw:?}"),
    })
}

fn parse_u64(key: &str, raw: &str) -> Result<u64, SimError> {
    raw.parse::<u64>().map_err(|_| SimError::InvalidValue {
        key: key.to_string(),
        message: format!("expected a non-negative integer, got {raw:?}"),
    })
}

fn parse_usize(key: &str, raw: &str) -> Result<usize, SimError> {
    raw.parse::<usize>().map_err(|_| SimError::InvalidValue {
        key: key.to_string(),
        message: format!("expected a non-negative integer, got {raw:?}"),
    })
}

impl SimConfig {
    /// Parses a flat `key=value` config. All 27 table keys are required,
    /// each exactly once; `lifespan_basis` (`obtained` or `demanded`) is
    /// optional and defaults to `obtained`.
    pub fn from_str(text: &str) -> Result<SimConfig, SimError> {
        let mut cfg = SimConfig::default();
        let mut seen: Vec<String> = Vec::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(SimError::Malformed {
                line: idx + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();

            if seen.iter().any(|k| k == key) {
                return Err(SimError::DuplicateKey(key.to_string()));
            }

            match key {
                "gamma" => cfg.gamma = parse_f64(key, value)?,
                "lambda" => cfg.lambda = parse_usize(key, value)?,
                "omega" => cfg.omega = parse_f64(key, value)?,
                "beta1" => cfg.beta1 = parse_f64(key, value)?,
                "beta2" => cfg.beta2 = parse_f64(key, value)?,
                "betaK" => cfg.beta_k = parse_f64(key, value)?,
                "phi1" => cfg.phi1 = parse_f64(key, value)?,
                "phi2" => cfg.phi2 = parse_f64(key, value)?,
                "phi3" => cfg.phi3 = parse_f64(key, value)?,
                "xi1" => cfg.xi1 = parse_f64(key, value)?,
                "xi2" => cfg.xi2 = parse_f64(key, value)?,
                "xi3" => cfg.xi3 = parse_f64(key, value)?,
                "xi4" => cfg.xi4 = parse_f64(key, value)?,
                "xi5" => cfg.xi5 = parse_f64(key, value)?,
                "xi6" => cfg.xi6 = parse_f64(key, value)?,
                "s" => cfg.s = parse_usize(key, value)?,
                "t_max" => cfg.t_max = parse_u64(key, value)? as u32,
                "n_agents" => cfg.n_agents = parse_usize(key, value)?,
                "n_fossil" => cfg.n_fossil = parse_f64(key, value)?,
                "n_food" => cfg.n_food = parse_f64(key, value)?,
                "n_eco" => cfg.n_eco = parse_f64(key, value)?,
                "n_urban" => cfg.n_urban = parse_usize(key, value)?,
                "seed" => cfg.seed = parse_u64(key, value)?,
                "alpha3" => cfg.alpha3 = parse_f64(key, value)?,
                "alpha4" => cfg.alpha4 = parse_f64(key, value)?,
                "alpha5" => cfg.alpha5 = parse_f64(key, value)?,
                "beta_alpha" => cfg.beta_alpha = parse_f64(key, value)?,
                "lifespan_basis" => {
                    cfg.lifespan_basis = match value {
                        "obtained" => LifespanBasis::Obtained,
                        "demanded" => LifespanBasis::Demanded,
                        other => {
                            return Err(SimError::InvalidValue {
                                key: key.to_string(),
                                message: format!(
                                    "expected obtained or demanded, got {other:?}"
                                ),
                            })
                        }
                    }
                }
                other => return Err(SimError::UnknownKey(other.to_string())),
            }
            seen.push(key.to_string());
        }

        for key in REQUIRED_KEYS {
            if !seen.iter().any(|k| k == key) {
                return Err(SimError::MissingKey(key.to_string()));
            }
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<SimConfig, SimError> {
        let text = std::fs::read_to_string(path)?;
        SimConfig::from_str(&text)
    }

    /// Range checks for every field. Called by the parser; call it again
    /// after mutating a config by hand.
    pub fn validate(&self) -> Result<(), SimError> {
        fn bail(key: &str, message: impl Into<String>) -> Result<(), SimError> {
            Err(SimError::InvalidValue {
                key: key.to_string(),
                message: message.into(),
            })
        }

        let finite = [
            ("gamma", self.gamma),
            ("omega", self.omega),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("betaK", self.beta_k),
            ("phi1", self.phi1),
            ("phi2", self.phi2),
            ("phi3", self.phi3),
            ("xi1", self.xi1),
            ("xi2", self.xi2),
            ("xi3", self.xi3),
            ("xi4", self.xi4),
            ("xi5", self.xi5),
            ("xi6", self.xi6),
            ("n_fossil", self.n_fossil),
            ("n_food", self.n_food),
            ("n_eco", self.n_eco),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
            ("alpha5", self.alpha5),
            ("beta_alpha", self.beta_alpha),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return bail(key, "must be finite");
            }
        }

        if self.gamma < 0.0 {
            return bail("gamma", "must be non-negative");
        }
        if self.lambda < 1 {
            return bail("lambda", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return bail("omega", "must lie in [0, 1]");
        }
        if self.beta1 < 0.0 {
            return bail("beta1", "must be non-negative");
        }
        if self.beta2 < 0.0 {
            return bail("beta2", "must be non-negative");
        }
        if self.beta_k <= 0.0 {
            return bail("betaK", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.phi1) {
            return bail("phi1", "must lie in [0, 1]");
        }
        if self.phi2 < 0.0 {
            return bail("phi2", "must be non-negative");
        }
        if self.phi3 < 0.0 {
            return bail("phi3", "must be non-negative");
        }
        if self.xi1 < 0.0 {
            return bail("xi1", "must be non-negative");
        }
        if self.xi2 <= 0.0 {
            return bail("xi2", "must be positive");
        }
        if self.xi1 > self.xi2 {
            return bail("xi1", "must not exceed xi2");
        }
        if !(0.0..=1.0).contains(&self.xi3) {
            return bail("xi3", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.xi4) {
            return bail("xi4", "must lie in [0, 1]");
        }
        if self.xi5 < 0.0 {
            return bail("xi5", "must be non-negative");
        }
        if self.xi6 <= self.xi5 {
            return bail("xi6", "must exceed xi5");
        }
        if self.s < 1 {
            return bail("s", "must be at least 1");
        }
        if self.n_fossil < 0.0 {
            return bail("n_fossil", "must be non-negative");
        }
        if self.n_food < 0.0 {
            return bail("n_food", "must be non-negative");
        }
        if self.n_eco < 0.0 {
            return bail("n_eco", "must be non-negative");
        }
        if self.n_urban < 1 {
            return bail("n_urban", "must be at least 1");
        }
        if self.n_urban > self.s * self.s {
            return bail("n_urban", "must not exceed the number of sites");
        }
        if !(0.0..=1.0).contains(&self.alpha3) {
            return bail("alpha3", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha4) {
            return bail("alpha4", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha5) {
            return bail("alpha5", "must lie in [0, 1]");
        }
        if !(1.0..=5.0).contains(&self.beta_alpha) {
            return bail("beta_alpha", "must lie in [1, 5]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_file() -> String {
        let c = SimConfig::default();
        format!(
            "gamma={}\nlambda={}\nomega={}\nbeta1={}\nbeta2={}\nbetaK={}\n\
             phi1={}\nphi2={}\nphi3={}\nxi1={}\nxi2={}\nxi3={}\nxi4={}\n\
             xi5={}\nxi6={}\ns={}\nt_max={}\nn_agents={}\nn_fossil={}\n\
             n_food={}\nn_eco={}\nn_urban={}\nseed={}\nalpha3={}\nalpha4={}\n\
             alpha5={}\nbeta_alpha={}\n",
            c.gamma,
            c.lambda,
            c.omega,
            c.beta1,
            c.beta2,
            c.beta_k,
            c.phi1,
            c.phi2,
            c.phi3,
            c.xi1,
            c.xi2,
            c.xi3,
            c.xi4,
            c.xi5,
            c.xi6,
            c.s,
            c.t_max,
            c.n_agents,
            c.n_fossil,
            c.n_food,
            c.n_eco,
            c.n_urban,
            c.seed,
            c.alpha3,
            c.alpha4,
            c.alpha5,
            c.beta_alpha,
        )
    }

    #[test]
    fn defaults_carry_the_baseline_table() {
        let c = SimConfig::default();
        assert_eq!(c.gamma, 10.0);
        assert_eq!(c.lambda, 3);
        assert_eq!(c.beta_k, 10.0);
        assert_eq!(c.phi3, 0.001);
        assert_eq!(c.xi6, 14.3);
        assert_eq!(c.s, 100);
        assert_eq!(c.t_max, 1500);
        assert_eq!(c.n_urban, 422);
        assert_eq!(c.alpha4, 0.02);
        assert_eq!(c.lifespan_basis, LifespanBasis::Obtained);
    }

    #[test]
    fn full_file_round_trips_to_defaults() {
        let parsed = SimConfig::from_str(&full_file()).expect("full file parses");
        assert_eq!(parsed, SimConfig::default());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# baseline setup\n\n{}\n# trailing note\n", full_file());
        assert!(SimConfig::from_str(&text).is_ok());
    }

    #[test]
    fn missing_key_is_reported_by_name() {
        let text: String = full_file()
            .lines()
            .filter(|l| !l.starts_with("xi6"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = SimConfig::from_str(&text).unwrap_err();
        assert!(matches!(&err, SimError::MissingKey(k) if k == "xi6"), "got {err}");
        assert!(err.to_string().contains("xi6"));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let unknown = format!("{}zeta=1\n", full_file());
        let err = SimConfig::from_str(&unknown).unwrap_err();
        assert!(matches!(&err, SimError::UnknownKey(k) if k == "zeta"), "got {err}");

        let dup = format!("{}gamma=3\n", full_file());
        let err = SimConfig::from_str(&dup).unwrap_err();
        assert!(matches!(&err, SimError::DuplicateKey(k) if k == "gamma"), "got {err}");
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let text = format!("{}just a stray line\n", full_file());
        let err = SimConfig::from_str(&text).unwrap_err();
        assert!(matches!(err, SimError::Malformed { line: 28, .. }), "got {err}");
    }

    #[test]
    fn out_of_range_values_name_the_key() {
        let cases = [
            ("omega", "1.5"),
            ("beta_alpha", "0.5"),
            ("betaK", "0"),
            ("lambda", "0"),
            ("alpha3", "-0.1"),
        ];
        for (key, bad) in cases {
            let text: String = full_file()
                .lines()
                .map(|l| {
                    if l.starts_with(&format!("{key}=")) {
                        format!("{key}={bad}\n")
                    } else {
                        format!("{l}\n")
                    }
                })
                .collect();
            let err = SimConfig::from_str(&text).unwrap_err();
            match err {
                SimError::InvalidValue { key: k, .. } => assert_eq!(k, key),
                other => panic!("expected InvalidValue for {key}, got {other}"),
            }
        }
    }

    #[test]
    fn crossed_density_thresholds_are_rejected() {
        let text: String = full_file()
            .lines()
            .map(|l| {
                if l.starts_with("xi5=") {
                    "xi5=20\n".to_string()
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        let err = SimConfig::from_str(&text).unwrap_err();
        assert!(matches!(&err, SimError::InvalidValue { key, .. } if key == "xi6"));
    }

    #[test]
    fn urban_patch_count_is_bounded_by_the_grid() {
        let mut cfg = SimConfig::default();
        cfg.s = 10;
        cfg.n_urban = 101;
        let err = cfg.validate().unwrap_err();
        assert!(matches!(&err, SimError::InvalidValue { key, .. } if key == "n_urban"));
    }

    #[test]
    fn lifespan_basis_key_is_optional_and_checked() {
        let demanded = format!("{}lifespan_basis=demanded\n", full_file());
        let cfg = SimConfig::from_str(&demanded).unwrap();
        assert_eq!(cfg.lifespan_basis, LifespanBasis::Demanded);

        let bad = format!("{}lifespan_basis=sometimes\n", full_file());
        let err = SimConfig::from_str(&bad).unwrap_err();
        assert!(matches!(&err, SimError::InvalidValue { key, .. } if key == "lifespan_basis"));
    }
}
