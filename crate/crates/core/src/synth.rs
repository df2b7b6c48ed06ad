//! Synthetic reservoir databases.
//!
//! Every record draws an independent standard-normal latent per feature.
//! Observed values come from pushing a shifted and scaled copy of the latent
//! through the feature's truncated marginal (a Gaussian copula), while RF is
//! a lognormal function of the unshifted latents of a few driver features.
//! Two databases that differ only in their shift/scale knobs therefore share
//! the RF mechanism but disagree on how feature values map to it.

use rand::RngExt;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};
use thiserror::Error;

use crate::dataset::{Database, DatabaseTag, FeatureSchema, ReservoirRecord};
use crate::rng::{seeded, streams};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),
    #[error("record count must be at least 1")]
    Empty,
}

/// Marginal family of one feature, before truncation to its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    TruncatedNormal {
        mean: f64,
        sd: f64,
    },
    /// Beta(a, b) stretched onto the feature range.
    BetaScaled {
        a: f64,
        b: f64,
    },
}

/// Ties a feature's latent to another feature's latent with correlation `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentLink {
    pub feature: String,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub family: Family,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub missing_rate: f64,
    /// Latent shift applied before the marginal.
    #[serde(default)]
    pub shift: f64,
    /// Latent scale applied before the marginal.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub link: Option<LatentLink>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub feature: String,
    pub weight: f64,
}

/// `RF = median * exp(sigma * (signal * q + sqrt(1 - signal^2) * noise))`
/// with `q` the normalized weighted sum of driver latents, clipped to
/// `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub drivers: Vec<Driver>,
    pub median: f64,
    pub sigma: f64,
    pub signal: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for RfModel {
    fn default() -> Self {
        let d = |feature: &str, weight| Driver { feature: feature.into(), weight };
        RfModel {
            drivers: vec![d("reserves", 0.35), d("area", 0.3), d("thickness", 0.25), d("permeability", 0.25)],
            median: 0.3,
            sigma: 0.5,
            signal: 0.9,
            lower: 0.01,
            upper: 2.32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub source: DatabaseTag,
    pub key_prefix: String,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub rf: RfModel,
}

fn feature(name: &str, family: Family, lower: f64, upper: f64) -> FeatureSpec {
    FeatureSpec { name: name.into(), family, lower, upper, missing_rate: 0.0, shift: 0.0, scale: 1.0, link: None }
}

fn lognormal(median: f64, sigma: f64) -> Family {
    Family::Lognormal { mu: median.ln(), sigma }
}

impl DistributionSpec {
    /// TORIS-like marginals with 12% missing cells, thicker pay zones and
    /// larger reserves.
    pub fn toris_like() -> Self {
        let mut features = vec![
            feature("api_gravity", Family::TruncatedNormal { mean: 33.0, sd: 8.0 }, 4.0, 73.0),
            feature("bo", lognormal(1.3, 0.15), 1.0, 3.0),
            feature("gor", lognormal(0.8, 1.0), 0.001, 60.0),
            feature("water_saturation", Family::BetaScaled { a: 3.0, b: 6.0 }, 0.0, 0.95),
            feature("temperature", Family::TruncatedNormal { mean: 160.0, sd: 45.0 }, 43.0, 390.0),
            feature("pressure", lognormal(2500.0, 0.6), 70.0, 16066.0),
            feature("thickness", lognormal(40.0, 1.0), 2.0, 10850.0),
            feature("reserves", lognormal(3e7, 1.5), 2.33e6, 5e11),
            feature("permeability", lognormal(80.0, 1.4), 0.01, 5000.0),
            feature("porosity", Family::TruncatedNormal { mean: 0.2, sd: 0.06 }, 0.01, 0.58),
            feature("area", lognormal(1500.0, 1.3), 50.0, 1.73e7),
        ];
        for f in &mut features {
            f.missing_rate = 0.12;
        }
        features[6].shift = 1.2;
        features[7].shift = 0.6;
        features[9].link = Some(LatentLink { feature: "permeability".into(), rho: 0.5 });
        DistributionSpec {
            source: DatabaseTag::Toris,
            key_prefix: "T".into(),
            features,
            rf: RfModel { lower: 0.02, upper: 1.44, ..Default::default() },
        }
    }

    /// Commercial-like: TORIS marginals with larger areas, lighter oil and
    /// higher pressures.
    pub fn commercial_like() -> Self {
        let mut s = Self::toris_like().without_divergence();
        s.source = DatabaseTag::Commercial;
        s.key_prefix = "C".into();
        for f in &mut s.features {
            f.missing_rate = 0.15;
        }
        for (name, shift) in [("api_gravity", 0.3), ("pressure", 0.4), ("area", 1.0)] {
            s.feature_mut(name).shift = shift;
        }
        s.feature_mut("permeability").upper = 50000.0;
        s
    }

    /// Atlas-like: narrower porosity and permeability, fewer gaps, and
    /// reserves counted as remaining volume.
    pub fn atlas_like() -> Self {
        let mut s = Self::toris_like().without_divergence();
        s.source = DatabaseTag::Atlas;
        s.key_prefix = "A".into();
        for f in &mut s.features {
            f.missing_rate = 0.05;
        }
        s.feature_mut("permeability").family = lognormal(120.0, 0.8);
        s.feature_mut("porosity").family = Family::TruncatedNormal { mean: 0.22, sd: 0.035 };
        for (name, shift, scale) in [("reserves", -1.0, 0.8), ("permeability", 0.6, 1.0)] {
            let f = s.feature_mut(name);
            f.shift = shift;
            f.scale = scale;
        }
        s.feature_mut("reserves").lower = 1.0;
        s.feature_mut("area").lower = 1.0;
        s.rf = RfModel::default();
        s
    }

    pub fn preset(source: DatabaseTag) -> Option<Self> {
        match source {
            DatabaseTag::Toris => Some(Self::toris_like()),
            DatabaseTag::Commercial => Some(Self::commercial_like()),
            DatabaseTag::Atlas => Some(Self::atlas_like()),
            _ => None,
        }
    }

    /// Panics if no feature has this name.
    pub fn feature_mut(&mut self, name: &str) -> &mut FeatureSpec {
        self.features.iter_mut().find(|f| f.name == name).unwrap_or_else(|| panic!("no feature {name}"))
    }

    /// Set every feature's missing-cell rate.
    pub fn with_missing_rate(mut self, rate: f64) -> Self {
        for f in &mut self.features {
            f.missing_rate = rate;
        }
        self
    }

    /// Zero all shift knobs and reset scales to 1.
    pub fn without_divergence(mut self) -> Self {
        for f in &mut self.features {
            f.shift = 0.0;
            f.scale = 1.0;
        }
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if !self.source.is_source() {
            return bad(format!("{} is not a source database", self.source));
        }
        let schema = FeatureSchema::reservoir();
        if self.features.len() != schema.len() || schema.names().any(|n| !self.features.iter().any(|f| f.name == n)) {
            return bad("features must be exactly the reservoir schema".into());
        }
        for f in &self.features {
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower < f.upper) {
                return bad(format!("{}: range [{}, {}]", f.name, f.lower, f.upper));
            }
            if !(0.0..1.0).contains(&f.missing_rate) {
                return bad(format!("{}: missing_rate {}", f.name, f.missing_rate));
            }
            if !(f.shift.is_finite() && f.scale > 0.0 && f.scale.is_finite()) {
                return bad(format!("{}: shift {} scale {}", f.name, f.shift, f.scale));
            }
            let ok = match f.family {
                Family::Lognormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && f.lower > 0.0,
                Family::TruncatedNormal { mean, sd } => mean.is_finite() && sd > 0.0,
                Family::BetaScaled { a, b } => a > 0.0 && b > 0.0,
            };
            if !ok {
                return bad(format!("{}: bad {:?}", f.name, f.family));
            }
            if let Some(link) = &f.link {
                let target = self.features.iter().find(|g| g.name == link.feature);
                if target.is_none_or(|t| t.link.is_some()) || !(-1.0..=1.0).contains(&link.rho) {
                    return bad(format!("{}: link to {}", f.name, link.feature));
                }
            }
        }
        let rf = &self.rf;
        if rf.drivers.is_empty() || rf.drivers.iter().any(|d| !self.features.iter().any(|f| f.name == d.feature)) {
            return bad("RF drivers must name features".into());
        }
        if rf.drivers.iter().map(|d| d.weight * d.weight).sum::<f64>() <= 0.0 {
            return bad("RF driver weights are all zero".into());
        }
        if !(rf.median > 0.0
            && rf.sigma > 0.0
            && (0.0..=1.0).contains(&rf.signal)
            && 0.0 <= rf.lower
            && rf.lower < rf.upper)
        {
            return bad("RF model parameters".into());
        }
        Ok(())
    }
}

/// Maps a standard-normal latent onto `[lower, upper]` through the
/// truncated marginal, monotonically.
struct Marginal {
    family: Family,
    lower: f64,
    upper: f64,
    u_lo: f64,
    u_hi: f64,
    shift: f64,
    scale: f64,
}

impl Marginal {
    fn new(f: &FeatureSpec) -> Self {
        let std = Normal::standard();
        let (u_lo, u_hi) = match f.family {
            Family::Lognormal { mu, sigma } => {
                (std.cdf((f.lower.ln() - mu) / sigma), std.cdf((f.upper.ln() - mu) / sigma))
            }
            Family::TruncatedNormal { mean, sd } => (std.cdf((f.lower - mean) / sd), std.cdf((f.upper - mean) / sd)),
            Family::BetaScaled { .. } => (0.0, 1.0),
        };
        Marginal {
            family: f.family.clone(),
            lower: f.lower,
            upper: f.upper,
            u_lo,
            u_hi,
            shift: f.shift,
            scale: f.scale,
        }
    }

    fn value(&self, z: f64) -> f64 {
        let std = Normal::standard();
        let u = std.cdf(self.shift + self.scale * z);
        let u = (self.u_lo + u * (self.u_hi - self.u_lo)).clamp(1e-15, 1.0 - 1e-15);
        let v = match self.family {
            Family::Lognormal { mu, sigma } => (mu + sigma * std.inverse_cdf(u)).exp(),
            Family::TruncatedNormal { mean, sd } => mean + sd * std.inverse_cdf(u),
            Family::BetaScaled { a, b } => {
                let beta = Beta::new(a, b).expect("validated shape");
                self.lower + (self.upper - self.lower) * beta.inverse_cdf(u)
            }
        };
        v.clamp(self.lower, self.upper)
    }
}

/// Draw `n` records. Deterministic in `(spec, n, seed)`; databases of
/// different sources use different random streams.
pub fn generate(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Database, SynthError> {
    spec.validate()?;
    if n == 0 {
        return Err(SynthError::Empty);
    }
    let schema = FeatureSchema::reservoir();
    // spec features in schema order
    let order: Vec<&FeatureSpec> =
        schema.names().map(|n| spec.features.iter().find(|f| f.name == n).expect("validated")).collect();
    let marginals: Vec<Marginal> = order.iter().map(|f| Marginal::new(f)).collect();
    let links: Vec<Option<(usize, f64)>> = order
        .iter()
        .map(|f| f.link.as_ref().map(|l| (schema.index_of(&l.feature).expect("validated"), l.rho)))
        .collect();
    let norm = spec.rf.drivers.iter().map(|d| d.weight * d.weight).sum::<f64>().sqrt();
    let drivers: Vec<(usize, f64)> =
        spec.rf.drivers.iter().map(|d| (schema.index_of(&d.feature).expect("validated"), d.weight / norm)).collect();

    let mut rng = seeded(seed, streams::SYNTH + spec.source.priority() as u64);
    let m = schema.len();
    let mut records = Vec::with_capacity(n);
    let mut z = vec![0.0; m];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        for j in 0..m {
            if let Some((src, rho)) = links[j] {
                z[j] = rho * z[src] + (1.0 - rho * rho).sqrt() * z[j];
            }
        }
        let noise: f64 = rng.sample(StandardNormal);
        let q: f64 = drivers.iter().map(|&(j, w)| w * z[j]).sum();
        let s = spec.rf.signal;
        let rf = (spec.rf.median * (spec.rf.sigma * (s * q + (1.0 - s * s).sqrt() * noise)).exp())
            .clamp(spec.rf.lower, spec.rf.upper);
        let values = (0..m)
            .map(|j| {
                let missing = order[j].missing_rate > 0.0 && rng.random_bool(order[j].missing_rate);
                (!missing).then(|| marginals[j].value(z[j]))
            })
            .collect();
        records.push(ReservoirRecord {
            key: format!("{}-{:05}", spec.key_prefix, i),
            values,
            rf: Some(rf),
            source: spec.source,
        });
    }
    Ok(Database::new(spec.source, schema, records).expect("records match the schema"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn deterministic_and_in_range() {
        let spec = DistributionSpec::toris_like();
        let a = generate(&spec, 300, 7).unwrap();
        assert_eq!(a, generate(&spec, 300, 7).unwrap());
        assert_ne!(a, generate(&spec, 300, 8).unwrap());
        for preset in
            [DistributionSpec::toris_like(), DistributionSpec::commercial_like(), DistributionSpec::atlas_like()]
        {
            let db = generate(&preset, 500, 1).unwrap();
            assert_eq!(db.tag, preset.source);
            for r in &db.records {
                let rf = r.rf.unwrap();
                assert!(rf >= preset.rf.lower && rf <= preset.rf.upper);
                for (j, v) in r.values.iter().enumerate() {
                    let f = preset.features.iter().find(|f| f.name == db.schema.features()[j].name).unwrap();
                    assert!(v.is_none_or(|x| x >= f.lower && x <= f.upper), "{} = {v:?}", f.name);
                    assert!(v.is_none_or(|x| db.schema.features()[j].contains(x)));
                }
            }
        }
    }

    #[test]
    fn rf_right_skewed_and_all_classes_present() {
        let db = generate(&DistributionSpec::toris_like(), 5000, 3).unwrap();
        let mut rf: Vec<f64> = db.records.iter().map(|r| r.rf.unwrap()).collect();
        let (mean, _) = stats(&rf);
        rf.sort_by(f64::total_cmp);
        let median = 0.5 * (rf[2499] + rf[2500]);
        assert!(mean > median);
        let mut seen = [false; 10];
        for r in &db.records {
            seen[crate::preprocess::bin_rf(r.rf.unwrap()).unwrap().index()] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn missing_rate_concentrates() {
        let db = generate(&DistributionSpec::toris_like().with_missing_rate(0.2), 5000, 11).unwrap();
        for j in 0..db.schema.len() {
            let missing = db.column(j).iter().filter(|v| v.is_none()).count() as f64 / 5000.0;
            assert!((missing - 0.2).abs() < 0.02, "feature {j}: {missing}");
        }
        assert!(db.records.iter().all(|r| r.rf.is_some_and(f64::is_finite)));
    }

    #[test]
    fn no_divergence_means_same_location() {
        // a 2-SE two-sample test rejects about 5% of the time under the null
        let spec = DistributionSpec::toris_like().with_missing_rate(0.0);
        let (mut tests, mut rejections) = (0, 0);
        for pair in 0..20u64 {
            let a = generate(&spec, 2000, 2 * pair).unwrap();
            let b = generate(&spec, 2000, 2 * pair + 1).unwrap();
            for j in 0..a.schema.len() {
                let xa: Vec<f64> = a.column(j).into_iter().flatten().collect();
                let xb: Vec<f64> = b.column(j).into_iter().flatten().collect();
                let ((ma, va), (mb, vb)) = (stats(&xa), stats(&xb));
                let se = (va / xa.len() as f64 + vb / xb.len() as f64).sqrt();
                tests += 1;
                rejections += usize::from((ma - mb).abs() >= 2.0 * se);
            }
        }
        assert!((rejections as f64) / (tests as f64) < 0.1, "{rejections} of {tests}");
    }

    #[test]
    fn divergence_moves_the_marginal() {
        let base = generate(&DistributionSpec::toris_like().with_missing_rate(0.0), 2000, 5).unwrap();
        let mut shifted = DistributionSpec::toris_like().with_missing_rate(0.0);
        shifted.feature_mut("area").shift = 1.0;
        let moved = generate(&shifted, 2000, 5).unwrap();
        let j = base.schema.index_of("area").unwrap();
        // same latents, so every area value moves up and RF is untouched
        for (a, b) in base.records.iter().zip(&moved.records) {
            assert!(b.values[j].unwrap() >= a.values[j].unwrap());
            assert_eq!(a.rf, b.rf);
        }
    }

    #[test]
    fn atlas_is_narrower() {
        let t = generate(&DistributionSpec::toris_like(), 3000, 9).unwrap();
        let a = generate(&DistributionSpec::atlas_like(), 3000, 9).unwrap();
        for name in ["porosity", "permeability"] {
            let j = t.schema.index_of(name).unwrap();
            let iqr = |db: &Database| {
                let mut v: Vec<f64> = db.column(j).into_iter().flatten().map(f64::ln_1p).collect();
                v.sort_by(f64::total_cmp);
                v[v.len() * 3 / 4] - v[v.len() / 4]
            };
            assert!(iqr(&a) < iqr(&t), "{name}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = DistributionSpec::toris_like();
        s.feature_mut("bo").lower = 5.0;
        assert!(matches!(generate(&s, 10, 0), Err(SynthError::InvalidSpec(_))));
        let mut s = DistributionSpec::toris_like();
        s.features.pop();
        assert!(generate(&s, 10, 0).is_err());
        let mut s = DistributionSpec::toris_like();
        s.rf.drivers[0].feature = "nope".into();
        assert!(generate(&s, 10, 0).is_err());
        assert_eq!(generate(&DistributionSpec::toris_like(), 0, 0).unwrap_err(), SynthError::Empty);
    }

    #[test]
    fn spec_json_round_trip() {
        let s = DistributionSpec::atlas_like();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"family\":\"lognormal\""));
        assert_eq!(serde_json::from_str::<DistributionSpec>(&text).unwrap(), s);
    }
}
