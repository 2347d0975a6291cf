use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compile::OptimizerConfig;
use crate::error::{Error, Result};
use crate::lindblad::{DephasingConvention, IntegratorConfig, NoiseModel};
use crate::pulse::ScheduleOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Noise-free gate matrices applied to the state vector.
    #[serde(rename = "gate", alias = "gate-level")]
    Gate,
    /// Pulse schedules evolved under the master equation.
    #[serde(rename = "pulse", alias = "pulse-level")]
    Pulse,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gate" | "gate-level" => Ok(Mode::Gate),
            "pulse" | "pulse-level" => Ok(Mode::Pulse),
            _ => Err(Error::invalid(format!("unknown mode '{s}' (expected gate or pulse)"))),
        }
    }
}

/// Times in seconds, written as numbers or as the string "inf".
pub(crate) mod seconds {
    use serde::de::{self, Deserializer, Visitor};
    use serde::ser::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct Secs;

    impl Visitor<'_> for Secs {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a time in seconds or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => other.parse().map_err(|_| E::custom(format!("bad time '{v}'"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(Secs)
    }

    pub mod list {
        use serde::de::Deserializer;
        use serde::ser::{SerializeSeq, Serializer};
        use serde::Deserialize;

        #[derive(Deserialize)]
        struct Item(#[serde(with = "super")] f64);

        struct Ref<'a>(&'a f64);

        impl serde::Serialize for Ref<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::serialize(self.0, s)
            }
        }

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&Ref(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Item>::deserialize(d)?.into_iter().map(|i| i.0).collect())
        }
    }
}

/// One sweep over dimensions and noise settings.
///
/// Times are in seconds and may be infinite. An empty `t2_values` pairs each
/// T₁ with T₂ = 2T₁ (no pure dephasing); otherwise the grid is the product
/// of the two lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d_values: Vec<usize>,
    #[serde(with = "seconds::list")]
    pub t1_values: Vec<f64>,
    #[serde(with = "seconds::list")]
    pub t2_values: Vec<f64>,
    /// Post-selected unitaries wanted per dimension.
    pub n_unitaries: usize,
    /// Candidates tried per dimension before giving up; 0 means 10·n_unitaries.
    pub max_candidates: usize,
    /// Dispersive shift, rad/s.
    pub chi: f64,
    pub n_cavity: usize,
    pub ansatz_layers: usize,
    pub infidelity_threshold: f64,
    pub mode: Mode,
    pub seed: u64,
    /// Thread count; 0 uses every core.
    pub workers: usize,
    pub bootstrap_resamples: usize,
    pub dephasing: DephasingConvention,
    pub optimizer: OptimizerConfig,
    pub integrator: IntegratorConfig,
    pub schedule: ScheduleOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d_values: vec![4],
            t1_values: vec![f64::INFINITY],
            t2_values: Vec::new(),
            n_unitaries: 100,
            max_candidates: 0,
            chi: 2.0 * PI * 1e6,
            n_cavity: crate::hilbert::DEFAULT_N_CAVITY,
            ansatz_layers: 2,
            infidelity_threshold: 0.01,
            mode: Mode::Gate,
            seed: 0,
            workers: 0,
            bootstrap_resamples: crate::stats::DEFAULT_RESAMPLES,
            dephasing: DephasingConvention::default(),
            optimizer: OptimizerConfig::default(),
            integrator: IntegratorConfig::default(),
            schedule: ScheduleOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_unitaries == 0 {
            return Err(Error::invalid("n_unitaries must be at least 1"));
        }
        if self.d_values.is_empty() || self.t1_values.is_empty() {
            return Err(Error::invalid("d_values and t1_values must not be empty"));
        }
        if self.n_cavity < 2 {
            return Err(Error::invalid("n_cavity must be at least 2"));
        }
        for &d in &self.d_values {
            if d < 2 || d > self.n_cavity {
                return Err(Error::invalid(format!("d = {d} must lie in 2..={}", self.n_cavity)));
            }
        }
        if !(self.chi.is_finite() && self.chi != 0.0) {
            return Err(Error::invalid("chi must be finite and nonzero"));
        }
        if self.ansatz_layers == 0 {
            return Err(Error::invalid("ansatz_layers must be at least 1"));
        }
        if !(self.infidelity_threshold > 0.0 && self.infidelity_threshold <= 1.0) {
            return Err(Error::invalid("infidelity_threshold must lie in (0, 1]"));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::invalid("bootstrap_resamples must be positive"));
        }
        if self.max_candidates != 0 && self.max_candidates < self.n_unitaries {
            return Err(Error::invalid("max_candidates is below n_unitaries"));
        }
        self.optimizer_config().validate()?;
        self.integrator.validate()?;
        self.noise_points()?;
        Ok(())
    }

    pub fn candidate_limit(&self) -> usize {
        if self.max_candidates == 0 {
            10 * self.n_unitaries
        } else {
            self.max_candidates
        }
    }

    /// The optimizer settings with the sweep's truncation and threshold.
    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            n_cavity: self.n_cavity,
            threshold: self.infidelity_threshold,
            ..self.optimizer.clone()
        }
    }

    /// Noise settings in grid order, T₁ outer.
    pub fn noise_points(&self) -> Result<Vec<NoiseModel>> {
        let mut out = Vec::new();
        for &t1 in &self.t1_values {
            let t2s = if self.t2_values.is_empty() {
                vec![2.0 * t1]
            } else {
                self.t2_values.clone()
            };
            for t2 in t2s {
                let n = NoiseModel {
                    t1,
                    t2,
                    dephasing: self.dephasing,
                };
                n.validate()?;
                out.push(n);
            }
        }
        Ok(out)
    }
}
