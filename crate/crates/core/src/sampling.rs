//! Latin hypercube sampling of the parameter box and deterministic
//! train/test/validation splitting.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Result, RomError};
use crate::synthaero::ParameterPoint;

/// Sampled region of the (Mach, alpha_0) space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub mach_range: [f64; 2],
    /// Degrees.
    pub alpha0_range: [f64; 2],
}

impl ParameterBox {
    pub fn new(mach_range: [f64; 2], alpha0_range: [f64; 2]) -> Result<Self> {
        let b = Self {
            mach_range,
            alpha0_range,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mach_range[0] >= self.mach_range[1]
            || self.alpha0_range[0] >= self.alpha0_range[1]
        {
            return Err(RomError::Config(
                "parameter box ranges must satisfy min < max".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, point: &ParameterPoint) -> bool {
        point.mach >= self.mach_range[0]
            && point.mach <= self.mach_range[1]
            && point.alpha0 >= self.alpha0_range[0]
            && point.alpha0 <= self.alpha0_range[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleRole {
    Train,
    Test,
    Validation,
}

impl fmt::Display for SampleRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SampleRole::Train => "train",
            SampleRole::Test => "test",
            SampleRole::Validation => "validation",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SampleRole {
    type Err = RomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SampleRole::Train),
            "test" => Ok(SampleRole::Test),
            "validation" => Ok(SampleRole::Validation),
            other => Err(RomError::Dataset(format!("unknown sample role `{other}`"))),
        }
    }
}

/// Sampled points with their split assignment, ordered by point index.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub points: Vec<ParameterPoint>,
    pub roles: Vec<SampleRole>,
    pub seed: u64,
}

/// Unit-cube Latin hypercube: `n` samples in `d` dimensions, exactly one
/// per axis bin, random within the bin. Deterministic per seed.
pub fn lhs_unit(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![vec![0.0; d]; n];
    for axis in 0..d {
        let mut bins: Vec<usize> = (0..n).collect();
        bins.shuffle(&mut rng);
        for (i, &bin) in bins.iter().enumerate() {
            let offset: f64 = rng.random();
            samples[i][axis] = (bin as f64 + offset) / n as f64;
        }
    }
    samples
}

/// Latin hypercube sample of the parameter box.
pub fn lhs(bounds: &ParameterBox, n: usize, seed: u64) -> Result<Vec<ParameterPoint>> {
    bounds.validate()?;
    if n == 0 {
        return Err(RomError::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    lhs_unit(n, 2, seed)
        .into_iter()
        .map(|u| {
            let mach =
                bounds.mach_range[0] + u[0] * (bounds.mach_range[1] - bounds.mach_range[0]);
            let alpha0 =
                bounds.alpha0_range[0] + u[1] * (bounds.alpha0_range[1] - bounds.alpha0_range[0]);
            ParameterPoint::new(mach, alpha0)
        })
        .collect()
}

/// Seeded random partition into train/test/validation. Test and validation
/// counts are the rounded fractions; leftovers go to the training set.
pub fn split(
    points: Vec<ParameterPoint>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SamplePlan> {
    let (f_train, f_test, f_val) = fractions;
    if f_train < 0.0 || f_test < 0.0 || f_val < 0.0 {
        return Err(RomError::InvalidArgument(
            "split fractions must be nonnegative".into(),
        ));
    }
    if (f_train + f_test + f_val - 1.0).abs() > 1e-9 {
        return Err(RomError::InvalidArgument(format!(
            "split fractions must sum to 1, got {}",
            f_train + f_test + f_val
        )));
    }
    let n = points.len();
    let n_test = (f_test * n as f64).round() as usize;
    let n_val = (f_val * n as f64).round() as usize;
    if n_test + n_val > n {
        return Err(RomError::InvalidArgument(
            "test and validation fractions leave no training samples".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut roles = vec![SampleRole::Train; n];
    for &i in order.iter().take(n_test) {
        roles[i] = SampleRole::Test;
    }
    for &i in order.iter().skip(n_test).take(n_val) {
        roles[i] = SampleRole::Validation;
    }
    Ok(SamplePlan {
        points,
        roles,
        seed,
    })
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices_with_role(&self, role: SampleRole) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| (r == role).then_some(i))
            .collect()
    }

    pub fn role_counts(&self) -> (usize, usize, usize) {
        let t = self.indices_with_role(SampleRole::Train).len();
        let s = self.indices_with_role(SampleRole::Test).len();
        let v = self.indices_with_role(SampleRole::Validation).len();
        (t, s, v)
    }

    /// CSV layout `index,mach,alpha0,role`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("index,mach,alpha0,role\n");
        for (i, (p, role)) in self.points.iter().zip(&self.roles).enumerate() {
            out.push_str(&format!("{i},{},{},{role}\n", p.mach, p.alpha0));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut roles = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r').trim();
            if line.is_empty() || lineno == 0 {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(RomError::Dataset(format!(
                    "line {}: expected `index,mach,alpha0,role`",
                    lineno + 1
                )));
            }
            let mach: f64 = fields[1].trim().parse().map_err(|_| {
                RomError::Dataset(format!("line {}: bad mach `{}`", lineno + 1, fields[1]))
            })?;
            let alpha0: f64 = fields[2].trim().parse().map_err(|_| {
                RomError::Dataset(format!("line {}: bad alpha0 `{}`", lineno + 1, fields[2]))
            })?;
            points.push(ParameterPoint::new(mach, alpha0)?);
            roles.push(fields[3].trim().parse()?);
        }
        Ok(Self {
            points,
            roles,
            seed: 0,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}
