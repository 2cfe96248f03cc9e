//! Scorer kinds accepted by `--scorer`.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, Result};
use nlsmt_core::features::FEATURE_COUNT;
use nlsmt_core::network::{
    build_gn, build_gn_with_degrees, build_standard, build_tdn, default_gn_degrees, AnyModel, FeatureGrouping,
    LinearModel, ModelParams,
};
use nlsmt_core::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScorerKind {
    Linear,
    /// Fully connected with this many hidden nodes.
    Standard(usize),
    Tdn,
    /// Grouped; `None` uses the default degrees.
    Gn(Option<usize>),
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |a: &str| a.parse::<usize>().map_err(|_| format!("bad size {a:?} in scorer {s:?}"));
        match (name, arg) {
            ("linear", None) => Ok(ScorerKind::Linear),
            ("standard", None) => Ok(ScorerKind::Standard(20)),
            ("standard", Some(m)) => Ok(ScorerKind::Standard(number(m)?)),
            ("tdn", None) => Ok(ScorerKind::Tdn),
            ("gn", None) => Ok(ScorerKind::Gn(None)),
            ("gn", Some(d)) => Ok(ScorerKind::Gn(Some(number(d)?))),
            _ => Err(format!("unknown scorer {s:?}; expected linear, standard:M, tdn, gn or gn:D")),
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerKind::Linear => write!(f, "linear"),
            ScorerKind::Standard(m) => write!(f, "standard:{m}"),
            ScorerKind::Tdn => write!(f, "tdn"),
            ScorerKind::Gn(None) => write!(f, "gn"),
            ScorerKind::Gn(Some(d)) => write!(f, "gn:{d}"),
        }
    }
}

impl ScorerKind {
    /// Seeded random initial model.
    pub fn init(self, grouping: Option<&str>, seed: u64) -> Result<AnyModel<Real>> {
        let groups = match grouping {
            Some(spec) => FeatureGrouping::from_spec(FEATURE_COUNT, spec)?,
            None => FeatureGrouping::standard_five(),
        };
        let topology = match self {
            ScorerKind::Linear => return Ok(LinearModel::init_random(seed).into()),
            ScorerKind::Standard(m) => build_standard(FEATURE_COUNT, m)?,
            ScorerKind::Tdn => build_tdn(FEATURE_COUNT)?,
            ScorerKind::Gn(None) => build_gn_with_degrees(&groups, &default_gn_degrees(&groups))?,
            ScorerKind::Gn(Some(d)) => build_gn(&groups, d)?,
        };
        if topology.hidden_size() == 0 {
            return Err(anyhow!("scorer {self} has no hidden nodes"));
        }
        Ok(ModelParams::init_random(topology, seed).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlsmt_core::network::TrainableModel;

    #[test]
    fn parses_every_kind() {
        for s in ["linear", "standard:30", "tdn", "gn", "gn:3"] {
            assert_eq!(s.parse::<ScorerKind>().unwrap().to_string(), s);
        }
        assert_eq!("standard".parse::<ScorerKind>().unwrap(), ScorerKind::Standard(20));
        assert!("mlp".parse::<ScorerKind>().is_err());
        assert!("standard:x".parse::<ScorerKind>().is_err());
    }

    #[test]
    fn builds_expected_sizes() {
        let params = |k: ScorerKind| k.init(None, 1).unwrap().free_len();
        assert_eq!(params(ScorerKind::Linear), 11);
        assert_eq!(params(ScorerKind::Standard(20)), 220 + 20 + 20 + 1);
        assert_eq!(params(ScorerKind::Tdn), 110 + 55 + 55 + 1);
        assert!(ScorerKind::Standard(0).init(None, 1).is_err());
        assert!(ScorerKind::Gn(Some(9)).init(None, 1).is_err());
    }
}
