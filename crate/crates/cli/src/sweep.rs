//! Parameter sweeps over N, R and A_L.

use std::fmt;
use std::str::FromStr;

use relaysim_core::ExperimentConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    N,
    R,
    AreaSide,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::N => "N",
            SweepVar::R => "R",
            SweepVar::AreaSide => "A_L",
        }
    }

    fn integral(self) -> bool {
        !matches!(self, SweepVar::AreaSide)
    }

    pub fn set(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepVar::N => cfg.n_eds = value as usize,
            SweepVar::R => cfg.n_relays = value as usize,
            SweepVar::AreaSide => cfg.area_side = value,
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One swept variable with its values, e.g. `R=1,2,5,8,16`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = |msg: String| CliError::Config(format!("sweep '{s}': {msg}"));
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| bad("expected VAR=v1,v2,...".into()))?;
        let variable = match name.trim() {
            "N" | "n_eds" => SweepVar::N,
            "R" | "n_relays" => SweepVar::R,
            "A_L" | "area_side" => SweepVar::AreaSide,
            other => {
                return Err(bad(format!(
                    "unknown variable '{other}' (expected N, R or A_L)"
                )))
            }
        };
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("'{}' is not a number", v.trim())))
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        if values.is_empty() {
            return Err(bad("no values".into()));
        }
        if variable.integral() && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(bad(format!("{variable} takes non-negative integers")));
        }
        if !values.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("values must be strictly increasing".into()));
        }
        Ok(SweepSpec { variable, values })
    }
}

/// The cartesian product of all sweeps, first sweep varying slowest.
/// Each point lists `(variable, value)` pairs; no sweeps yield one empty
/// point.
pub fn sweep_points(sweeps: &[SweepSpec]) -> Result<Vec<Vec<(SweepVar, f64)>>, CliError> {
    for (i, a) in sweeps.iter().enumerate() {
        if sweeps[..i].iter().any(|b| b.variable == a.variable) {
            return Err(CliError::Config(format!(
                "{} is swept more than once",
                a.variable
            )));
        }
    }
    let mut points = vec![Vec::new()];
    for sweep in sweeps {
        points = points
            .into_iter()
            .flat_map(|p| {
                sweep.values.iter().map(move |&v| {
                    let mut next = p.clone();
                    next.push((sweep.variable, v));
                    next
                })
            })
            .collect();
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_validates() {
        let s: SweepSpec = "R=1,2,5,8,16".parse().unwrap();
        assert_eq!(s.variable, SweepVar::R);
        assert_eq!(s.values, vec![1.0, 2.0, 5.0, 8.0, 16.0]);
        assert!("R=2,1".parse::<SweepSpec>().is_err());
        assert!("R=1,1".parse::<SweepSpec>().is_err());
        assert!("N=1.5".parse::<SweepSpec>().is_err());
        assert!("T=1,2".parse::<SweepSpec>().is_err());
        assert!("A_L=1000,5000".parse::<SweepSpec>().is_ok());
        assert!("N".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn cartesian_product_order() {
        let sweeps = [
            "A_L=1000,5000".parse().unwrap(),
            "N=50,500".parse().unwrap(),
        ];
        let points = sweep_points(&sweeps).unwrap();
        assert_eq!(points.len(), 4);
        assert_eq!(
            points[1],
            vec![(SweepVar::AreaSide, 1000.0), (SweepVar::N, 500.0)]
        );
        assert_eq!(sweep_points(&[]).unwrap(), vec![Vec::new()]);
        let twice = ["N=1".parse().unwrap(), "N=2".parse().unwrap()];
        assert!(sweep_points(&twice).is_err());
    }

    proptest! {
        #[test]
        fn increasing_integer_lists_round_trip(
            mut values in proptest::collection::btree_set(0u32..10_000, 1..8)
                .prop_map(|s| s.into_iter().collect::<Vec<_>>())
        ) {
            values.sort_unstable();
            let text = values.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
            let spec: SweepSpec = format!("N={text}").parse().unwrap();
            let expected: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            prop_assert_eq!(spec.values, expected);
            let reversed = values.iter().rev().map(u32::to_string).collect::<Vec<_>>().join(",");
            prop_assert_eq!(format!("R={reversed}").parse::<SweepSpec>().is_ok(), values.len() == 1);
        }
    }
}
