use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use super::PreprocessError;
use crate::dataset::Database;

/// Fitted Gaussian-rank and min-max parameters for one feature.
///
/// `values` holds the distinct training values in ascending order and
/// `ranks` their zero-based ranks, averaged over ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub name: String,
    pub count: usize,
    pub values: Vec<f64>,
    pub ranks: Vec<f64>,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    /// Identity of the training set the parameters were fitted on.
    pub fitted_on: String,
    pub features: Vec<FeatureTransform>,
}

/// `sqrt(2) * erfinv(2u - 1)`: the standard normal quantile of `u`.
pub fn gaussian_rank_score(u: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * u - 1.0)
}

impl FeatureTransform {
    fn fit(name: &str, column: &[f64]) -> Result<Self, PreprocessError> {
        let mut sorted = column.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut values = Vec::new();
        let mut ranks = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            values.push(sorted[i]);
            // mean of zero-based positions i..j
            ranks.push((i + j - 1) as f64 / 2.0);
            i = j;
        }
        if values.len() < 2 {
            return Err(PreprocessError::ConstantFeature(name.to_string()));
        }
        let mut t =
            FeatureTransform { name: name.to_string(), count: sorted.len(), values, ranks, z_min: 0.0, z_max: 0.0 };
        t.z_min = t.gaussian(t.values[0]);
        t.z_max = t.gaussian(*t.values.last().expect("at least two values"));
        Ok(t)
    }

    /// Fractional rank of `x`, interpolated linearly between neighbouring
    /// training values and clamped to the training extremes.
    pub fn rank(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        if x <= self.values[0] {
            return self.ranks[0];
        }
        if x >= self.values[last] {
            return self.ranks[last];
        }
        // first index with values[i] > x; 1 <= hi <= last here
        let hi = self.values.partition_point(|&v| v <= x);
        let lo = hi - 1;
        if self.values[lo] == x {
            return self.ranks[lo];
        }
        let t = (x - self.values[lo]) / (self.values[hi] - self.values[lo]);
        self.ranks[lo] + t * (self.ranks[hi] - self.ranks[lo])
    }

    /// Rank quantile `(rank + 0.5) / N`, strictly inside (0, 1).
    pub fn quantile(&self, x: f64) -> f64 {
        (self.rank(x) + 0.5) / self.count as f64
    }

    /// Gaussian rank score before min-max scaling.
    pub fn gaussian(&self, x: f64) -> f64 {
        gaussian_rank_score(self.quantile(x))
    }

    /// Gaussian rank score min-max scaled with the training range, clipped to [0, 1].
    pub fn apply(&self, x: f64) -> f64 {
        ((self.gaussian(x) - self.z_min) / (self.z_max - self.z_min)).clamp(0.0, 1.0)
    }
}

/// Fit per-feature transforms on a complete (imputed) training database.
pub fn fit_transforms(train: &Database) -> Result<TransformParams, PreprocessError> {
    if train.is_empty() {
        return Err(PreprocessError::EmptyDatabase);
    }
    let features = train
        .schema
        .features()
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let column: Vec<f64> = train
                .records
                .iter()
                .map(|r| r.values[j].ok_or_else(|| PreprocessError::ColumnEntirelyMissing(f.name.clone())))
                .collect::<Result<_, _>>()?;
            FeatureTransform::fit(&f.name, &column)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TransformParams { fitted_on: format!("{}:{}", train.tag, train.len()), features })
}

/// Map every present value through its feature's fitted transform.
///
/// Feature order must match the one the parameters were fitted on; missing
/// cells stay missing.
pub fn apply_transforms(db: &Database, params: &TransformParams) -> Result<Database, PreprocessError> {
    for (f, t) in db.schema.features().iter().zip(&params.features) {
        if f.name != t.name {
            return Err(PreprocessError::UnknownFeature(f.name.clone()));
        }
    }
    if db.schema.len() != params.features.len() {
        return Err(PreprocessError::UnknownFeature(format!(
            "{} features against {} fitted",
            db.schema.len(),
            params.features.len()
        )));
    }
    let mut out = db.clone();
    for r in &mut out.records {
        for (v, t) in r.values.iter_mut().zip(&params.features) {
            *v = v.map(|x| t.apply(x));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatabaseTag, Feature, FeatureSchema, ReservoirRecord};
    use proptest::prelude::*;

    fn single(values: &[f64]) -> Database {
        let schema = FeatureSchema::new(vec![Feature::new("x", "", f64::NEG_INFINITY, f64::INFINITY)]).unwrap();
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &v)| ReservoirRecord {
                key: format!("r{i}"),
                values: vec![Some(v)],
                rf: Some(0.3),
                source: DatabaseTag::Toris,
            })
            .collect();
        Database::new(DatabaseTag::Toris, schema, records).unwrap()
    }

    #[test]
    fn three_values_rank_plateaus() {
        let p = fit_transforms(&single(&[10.0, 20.0, 30.0])).unwrap();
        let t = &p.features[0];
        assert_eq!(t.quantile(10.0), 1.0 / 6.0);
        assert_eq!(t.quantile(20.0), 0.5);
        assert_eq!(t.quantile(30.0), 5.0 / 6.0);
        assert!((t.gaussian(10.0) - (-0.967_421_566_101_701)).abs() < 1e-9);
        assert_eq!(t.apply(10.0), 0.0);
        assert_eq!(t.apply(30.0), 1.0);
        assert!((t.apply(20.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ties_share_averaged_rank() {
        let p = fit_transforms(&single(&[5.0, 1.0, 5.0, 9.0])).unwrap();
        let t = &p.features[0];
        assert_eq!(t.values, vec![1.0, 5.0, 9.0]);
        // the pair at sorted positions 1 and 2 gets rank 1.5
        assert_eq!(t.ranks, vec![0.0, 1.5, 3.0]);
    }

    #[test]
    fn constant_feature_rejected() {
        assert_eq!(
            fit_transforms(&single(&[2.0, 2.0, 2.0])).unwrap_err(),
            PreprocessError::ConstantFeature("x".into())
        );
    }

    #[test]
    fn interpolates_and_clips_unseen_values() {
        let p = fit_transforms(&single(&[0.0, 1.0, 2.0, 3.0])).unwrap();
        let t = &p.features[0];
        assert_eq!(t.rank(1.5), 1.5);
        assert_eq!(t.apply(-100.0), 0.0);
        assert_eq!(t.apply(100.0), 1.0);
        let out = apply_transforms(&single(&[-1.0, 0.5, 7.0]), &p).unwrap();
        let v: Vec<f64> = out.records.iter().map(|r| r.values[0].unwrap()).collect();
        assert_eq!(v[0], 0.0);
        assert!(v[1] > 0.0 && v[1] < 0.5);
        assert_eq!(v[2], 1.0);
    }

    #[test]
    fn gaussian_rank_is_roughly_symmetric() {
        // strongly skewed input, 500 distinct values
        let values: Vec<f64> = (1..=500).map(|i| (i as f64 / 60.0).exp()).collect();
        let p = fit_transforms(&single(&values)).unwrap();
        let z: Vec<f64> = values.iter().map(|&x| p.features[0].gaussian(x)).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let m2 = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = z.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        assert!((m3 / m2.powf(1.5)).abs() < 0.3);
    }

    proptest! {
        #[test]
        fn output_in_unit_interval(
            train in proptest::collection::vec(-1e6f64..1e6, 2..60),
            probe in proptest::collection::vec(-2e6f64..2e6, 1..20),
        ) {
            prop_assume!(train.iter().any(|&v| v != train[0]));
            let p = fit_transforms(&single(&train)).unwrap();
            for x in train.iter().chain(&probe) {
                let y = p.features[0].apply(*x);
                prop_assert!((0.0..=1.0).contains(&y));
            }
        }

        #[test]
        fn monotone(train in proptest::collection::vec(0f64..100.0, 3..40), a in 0f64..100.0, b in 0f64..100.0) {
            prop_assume!(train.iter().any(|&v| v != train[0]));
            let p = fit_transforms(&single(&train)).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.features[0].apply(lo) <= p.features[0].apply(hi));
        }
    }
}
