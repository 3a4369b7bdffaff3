//! Line-oriented `key = value` experiment configuration.

use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::estimators::FeatureCase;
use crate::mesh::FeatureShape;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("bad value for {key:?}: {message}")]
    Value { key: String, message: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    DdShapes,
    DdAngleSweep,
    DnShapes,
    InternalShapes,
    InternalCorrection,
    /// Any shape set with the data of the family selected by `case`.
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::DdShapes,
        ExperimentKind::DdAngleSweep,
        ExperimentKind::DnShapes,
        ExperimentKind::InternalShapes,
        ExperimentKind::InternalCorrection,
        ExperimentKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DdShapes => "dd_shapes",
            ExperimentKind::DdAngleSweep => "dd_angle_sweep",
            ExperimentKind::DnShapes => "dn_shapes",
            ExperimentKind::InternalShapes => "internal_shapes",
            ExperimentKind::InternalCorrection => "internal_correction",
            ExperimentKind::Custom => "custom",
        }
    }

    pub fn default_shapes(self) -> Vec<FeatureShape> {
        use FeatureShape::*;
        match self {
            ExperimentKind::DdShapes | ExperimentKind::DnShapes => {
                vec![Disk, Square, Triangle { alpha_deg: 15.0 }]
            }
            ExperimentKind::DdAngleSweep => vec![Triangle { alpha_deg: 15.0 }],
            ExperimentKind::InternalShapes | ExperimentKind::Custom => {
                vec![Disk, Square, Star, CShape, LShape]
            }
            ExperimentKind::InternalCorrection => vec![Disk],
        }
    }

    pub fn default_sizes(self) -> Vec<f64> {
        match self {
            ExperimentKind::DdAngleSweep => vec![0.125],
            _ => (2..=7).map(|k| 0.5f64.powi(k)).collect(),
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub shapes: Vec<FeatureShape>,
    /// Feature circumferences |γ|, strictly decreasing.
    pub sizes: Vec<f64>,
    /// Opening angles in degrees (angle sweep only).
    pub alphas: Vec<f64>,
    /// Edge length on γ relative to |γ|.
    pub h: f64,
    pub far_field: f64,
    pub grading: f64,
    /// Uniform refinements applied to every generated mesh.
    pub refinement_levels: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Feature family used by `custom` runs.
    pub case: Option<FeatureCase>,
    pub tol: f64,
    /// Iteration cap of CG; defaults to 20·√dof.
    pub max_iter: Option<usize>,
    /// Write measured wall-clock times instead of zeros (breaks byte-identical output).
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            shapes: experiment.default_shapes(),
            sizes: experiment.default_sizes(),
            alphas: vec![1.0, 2.0, 5.0, 10.0, 15.0, 25.0, 50.0],
            h: 0.05,
            far_field: 1.0 / 32.0,
            grading: 0.25,
            refinement_levels: 0,
            output_dir: PathBuf::from("out"),
            seed: crate::boundary::suites::SUITE_SEED,
            case: None,
            tol: 1e-10,
            max_iter: None,
            record_runtime: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.shapes.is_empty() {
            return Err(ConfigError::Invalid("at least one shape is required".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|s| !(*s > 0.0)) {
            return Err(ConfigError::Invalid("sizes must be positive".into()));
        }
        if self.sizes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ConfigError::Invalid("sizes must be strictly decreasing".into()));
        }
        for (key, v) in [("h", self.h), ("far_field", self.far_field), ("grading", self.grading), ("tol", self.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Value {
                    key: key.into(),
                    message: format!("{v} must be positive"),
                });
            }
        }
        match self.experiment {
            ExperimentKind::DdAngleSweep => {
                if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 180.0)) {
                    return Err(ConfigError::Invalid("alphas must lie in (0, 180)".into()));
                }
                if self.shapes.iter().any(|s| !matches!(s, FeatureShape::Triangle { .. })) {
                    return Err(ConfigError::Invalid("the angle sweep uses the triangle shape only".into()));
                }
            }
            ExperimentKind::DdShapes | ExperimentKind::DnShapes => {
                if let Some(s) = self
                    .shapes
                    .iter()
                    .find(|s| !matches!(s, FeatureShape::Disk | FeatureShape::Square | FeatureShape::Triangle { .. }))
                {
                    return Err(ConfigError::Invalid(format!("{s} is not a boundary feature shape")));
                }
            }
            ExperimentKind::InternalShapes => {
                if self.shapes.iter().any(|s| matches!(s, FeatureShape::Triangle { .. })) {
                    return Err(ConfigError::Invalid("triangle is not an internal feature shape".into()));
                }
            }
            ExperimentKind::InternalCorrection => {
                if self.shapes != [FeatureShape::Disk] {
                    return Err(ConfigError::Invalid("the correction experiment uses the disk only".into()));
                }
            }
            ExperimentKind::Custom => {
                if self.case.is_none() {
                    return Err(ConfigError::Missing("case"));
                }
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment and lists are
    /// comma-separated. Only `experiment` is required.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            if entries.iter().any(|(_, k, _)| *k == key) {
                return Err(ConfigError::DuplicateKey { line: i + 1, key });
            }
            entries.push((i + 1, key, value.trim().to_string()));
        }
        let experiment = entries
            .iter()
            .find(|(_, k, _)| k == "experiment")
            .ok_or(ConfigError::Missing("experiment"))?;
        let kind: ExperimentKind = parse_value("experiment", &experiment.2)?;
        let mut config = ExperimentConfig::new(kind);
        for (line, key, value) in &entries {
            match key.as_str() {
                "experiment" => {}
                "shapes" => config.shapes = parse_list(key, value)?,
                "sizes" => config.sizes = parse_list(key, value)?,
                "alphas" => config.alphas = parse_list(key, value)?,
                "h" => config.h = parse_value(key, value)?,
                "far_field" => config.far_field = parse_value(key, value)?,
                "grading" => config.grading = parse_value(key, value)?,
                "refinement_levels" => config.refinement_levels = parse_value(key, value)?,
                "output_dir" => config.output_dir = PathBuf::from(value),
                "seed" => config.seed = parse_seed(value)?,
                "tol" => config.tol = parse_value(key, value)?,
                "max_iter" => config.max_iter = Some(parse_value(key, value)?),
                "record_runtime" => config.record_runtime = parse_value(key, value)?,
                "case" => {
                    config.case = Some(match value.as_str() {
                        "dd" => FeatureCase::DirichletDirichlet,
                        "dn" => FeatureCase::DirichletNeumann,
                        "internal" => FeatureCase::Internal,
                        other => {
                            return Err(ConfigError::Value {
                                key: key.clone(),
                                message: format!("{other:?} is not one of dd, dn, internal"),
                            })
                        }
                    })
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: *line,
                        key: key.clone(),
                    })
                }
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        message: format!("{value:?}: {e}"),
    })
}

/// Splits on commas outside parentheses, so `triangle(15)` stays whole.
fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in value.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&value[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&value[start..]);
    items
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn parse_seed(value: &str) -> Result<u64, ConfigError> {
    let parsed = match value.strip_prefix("0x").or_else(|| value.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => value.parse(),
    };
    parsed.map_err(|e| ConfigError::Value {
        key: "seed".into(),
        message: format!("{value:?}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "# DD sweep\nexperiment = dd_shapes\nshapes = disk, triangle(20)  # two\n\
                    sizes = 0.25, 0.125\nh = 0.1\nseed = 0x5EED\nrefinement_levels = 1\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.experiment, ExperimentKind::DdShapes);
        assert_eq!(
            c.shapes,
            vec![FeatureShape::Disk, FeatureShape::Triangle { alpha_deg: 20.0 }]
        );
        assert_eq!(c.sizes, vec![0.25, 0.125]);
        assert_eq!(c.h, 0.1);
        assert_eq!(c.seed, 0x5EED);
        assert_eq!(c.refinement_levels, 1);
    }

    #[test]
    fn defaults_follow_the_family() {
        let c = ExperimentConfig::parse("experiment = internal_shapes").unwrap();
        assert_eq!(c.shapes.len(), 5);
        assert_eq!(c.sizes.len(), 6);
        assert_eq!(c.sizes[0], 0.25);
        assert_eq!(c.sizes[5], 1.0 / 128.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(ExperimentConfig::parse("h = 1"), Err(ConfigError::Missing("experiment")));
        assert!(matches!(
            ExperimentConfig::parse("experiment = dd_shapes\nfoo = 1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment = dd_shapes\nsizes = 0.1, 0.2"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment = dd_shapes\nshapes = star"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment = dd_shapes\nh = -1"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment dd_shapes"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment = custom"),
            Err(ConfigError::Missing("case"))
        ));
    }
}
