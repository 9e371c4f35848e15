//! Synthetic record sets with a known joint distribution.
//!
//! Every generator is backed by a finite joint pmf over small integer
//! categories (`"0"`, `"1"`, ...) on dimensions `x1..xn`. [`DensePmf`]
//! computes every measure by enumeration of that pmf, independently of the
//! sparse table code, and serves as the reference for it.
//!
//! # Random streams
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`. In sampled mode each record consumes one `f64` drawn
//! uniformly from `[0, 1)` (53 random bits) and takes the first cell, in
//! row-major order over `x1..xn` with `xn` varying fastest, whose cumulative
//! probability exceeds it. Periods are generated one after another from the
//! same stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infomeasure::{InfoReport, MaxEntropyMode, SynergyVerdict, UnitScale, DEFAULT_EPSILON};
use crate::tableau::{Dimension, DimensionSchema, Record, MAX_DIMS, MIN_DIMS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Independent uniform dimensions.
    Independent { cardinalities: Vec<usize> },
    /// `n_dims` copies of one uniform bit.
    Copy { n_dims: usize },
    /// `x3 = x1 xor x2` with `x1`, `x2` uniform independent bits.
    Parity,
    /// `lambda * parity + (1 - lambda) * independent bits`.
    Coupled { lambda: f64 },
    /// Cell probabilities from a symmetric Dirichlet with the given concentration.
    RandomJoint {
        cardinalities: Vec<usize>,
        concentration: f64,
        pmf_seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    Sampled { seed: u64 },
    /// Each support tuple exactly `n * p` times, so frequencies equal the pmf.
    BalancedExact,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Records per period.
    pub n: usize,
    #[serde(flatten)]
    pub mode: SamplingMode,
    /// Number of periods; labels `"1".."k"` are attached when greater than one.
    #[serde(default = "one")]
    pub periods: usize,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, mode: SamplingMode) -> Self {
        Self {
            kind,
            n,
            mode,
            periods: 1,
        }
    }

    pub fn with_periods(mut self, periods: usize) -> Self {
        self.periods = periods;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.n == 0 {
            return bad("generator needs n >= 1".into());
        }
        if self.periods == 0 {
            return bad("generator needs at least one period".into());
        }
        let check_dims = |k: usize| {
            if (MIN_DIMS..=MAX_DIMS).contains(&k) {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "generator needs {MIN_DIMS} to {MAX_DIMS} dimensions, got {k}"
                )))
            }
        };
        match &self.kind {
            GeneratorKind::Independent { cardinalities } => {
                check_dims(cardinalities.len())?;
                if cardinalities.contains(&0) {
                    return bad("cardinalities must be at least 1".into());
                }
            }
            GeneratorKind::Copy { n_dims } => check_dims(*n_dims)?,
            GeneratorKind::Parity => {}
            GeneratorKind::Coupled { lambda } => {
                if !(0.0..=1.0).contains(lambda) {
                    return bad(format!("lambda must lie in [0, 1], got {lambda}"));
                }
            }
            GeneratorKind::RandomJoint {
                cardinalities,
                concentration,
                ..
            } => {
                check_dims(cardinalities.len())?;
                if cardinalities.contains(&0) {
                    return bad("cardinalities must be at least 1".into());
                }
                if !(concentration.is_finite() && *concentration > 0.0) {
                    return bad(format!("concentration must be positive, got {concentration}"));
                }
            }
        }
        Ok(())
    }

    pub fn pmf(&self) -> Result<DensePmf> {
        self.validate()?;
        match &self.kind {
            GeneratorKind::Independent { cardinalities } => {
                let cells: usize = cardinalities.iter().product();
                DensePmf::new(cardinalities.clone(), vec![1.0 / cells as f64; cells])
            }
            GeneratorKind::Copy { n_dims } => {
                let mut probs = vec![0.0; 1 << n_dims];
                probs[0] = 0.5;
                probs[(1 << n_dims) - 1] = 0.5;
                DensePmf::new(vec![2; *n_dims], probs)
            }
            GeneratorKind::Parity => coupled_pmf(1.0),
            GeneratorKind::Coupled { lambda } => coupled_pmf(*lambda),
            GeneratorKind::RandomJoint {
                cardinalities,
                concentration,
                pmf_seed,
            } => DensePmf::random(cardinalities, *concentration, *pmf_seed),
        }
    }

    /// Schema `x1..xn` with the generator's cardinalities declared.
    pub fn schema(&self) -> Result<DimensionSchema> {
        self.pmf()?.schema()
    }
}

fn coupled_pmf(lambda: f64) -> Result<DensePmf> {
    let probs = (0..8usize)
        .map(|flat| {
            let (x, y, z) = (flat >> 2 & 1, flat >> 1 & 1, flat & 1);
            let legal = if z == x ^ y { 0.25 } else { 0.0 };
            lambda * legal + (1.0 - lambda) / 8.0
        })
        .collect();
    DensePmf::new(vec![2, 2, 2], probs)
}

/// Full joint pmf over `x1..xn`, stored row-major with the last dimension fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DensePmf {
    cardinalities: Vec<usize>,
    probs: Vec<f64>,
}

impl DensePmf {
    pub fn new(cardinalities: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if !(1..=MAX_DIMS).contains(&cardinalities.len()) || cardinalities.contains(&0) {
            return Err(Error::Validation("invalid pmf shape".into()));
        }
        let cells: usize = cardinalities.iter().product();
        if probs.len() != cells {
            return Err(Error::Validation(format!(
                "pmf has {} cells, shape needs {cells}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Validation("pmf entries must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("pmf sums to {total}, not 1")));
        }
        Ok(Self {
            cardinalities,
            probs,
        })
    }

    /// Symmetric Dirichlet draw: independent `Gamma(concentration, 1)` per cell, normalized.
    pub fn random(cardinalities: &[usize], concentration: f64, seed: u64) -> Result<Self> {
        let cells: usize = cardinalities.iter().product();
        let gamma = Gamma::new(concentration, 1.0)
            .map_err(|e| Error::Validation(format!("concentration: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws: Vec<f64> = (0..cells).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("all Dirichlet draws underflowed".into()));
        }
        for d in &mut draws {
            *d /= total;
        }
        Self::new(cardinalities.to_vec(), draws)
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_dims(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn names(&self) -> Vec<String> {
        (1..=self.n_dims()).map(|i| format!("x{i}")).collect()
    }

    pub fn schema(&self) -> Result<DimensionSchema> {
        DimensionSchema::new(
            self.names()
                .into_iter()
                .zip(&self.cardinalities)
                .map(|(n, &c)| Dimension::new(n).with_cardinality(c))
                .collect(),
        )
    }

    /// Category index of every dimension for a flat cell index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_dims()];
        for d in (0..self.n_dims()).rev() {
            out[d] = flat % self.cardinalities[d];
            flat /= self.cardinalities[d];
        }
        out
    }

    /// One unit-weight record per cell with the cell's probability as weight.
    pub fn weighted_records(&self) -> Vec<Record> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(flat, p)| Record::new(self.unflatten(flat).iter().map(usize::to_string)).with_weight(*p))
            .collect()
    }

    /// Marginal over the dimensions set in `mask`, as (flat marginal index per cell, marginal pmf).
    fn marginal(&self, mask: u32) -> (Vec<usize>, Vec<f64>) {
        let dims: Vec<usize> = (0..self.n_dims()).filter(|d| mask & (1 << d) != 0).collect();
        let size: usize = dims.iter().map(|&d| self.cardinalities[d]).product();
        let mut index = Vec::with_capacity(self.probs.len());
        let mut marginal = vec![0.0; size];
        for (flat, p) in self.probs.iter().enumerate() {
            let full = self.unflatten(flat);
            let m = dims.iter().fold(0, |acc, &d| acc * self.cardinalities[d] + full[d]);
            index.push(m);
            marginal[m] += p;
        }
        (index, marginal)
    }

    /// Every measure by direct enumeration.
    ///
    /// Entropies are `-sum p log2 p` over each dense marginal. Transmissions
    /// are computed pointwise, as the expectation under the joint pmf of the
    /// alternating sum of marginal log-probabilities, rather than from the
    /// entropies. Shannon redundancy uses the declared cardinalities.
    pub fn report(&self, epsilon: f64, unit: UnitScale) -> Result<InfoReport> {
        let n = self.n_dims();
        if n < MIN_DIMS {
            return Err(Error::InvalidSubset("need at least 2 dimensions".into()));
        }
        let names = self.names();
        let full = (1u32 << n) - 1;
        let masks: Vec<u32> = {
            let mut m: Vec<u32> = (1..=full).collect();
            m.sort_by_key(|&m| (m.count_ones(), (0..n).filter(|b| m & (1 << b) != 0).collect::<Vec<_>>()));
            m
        };
        let marginals: Vec<(Vec<usize>, Vec<f64>)> = (0..=full)
            .map(|m| if m == 0 { (Vec::new(), Vec::new()) } else { self.marginal(m) })
            .collect();

        let entropy = |mask: u32| -> f64 {
            -marginals[mask as usize]
                .1
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| p * p.log2())
                .sum::<f64>()
        };
        let pointwise_transmission = |mask: u32| -> f64 {
            let subs: Vec<u32> = (1..=mask).filter(|s| s & !mask == 0).collect();
            let mut total = 0.0;
            for (flat, &p) in self.probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut local = 0.0;
                for &s in &subs {
                    let (index, marginal) = &marginals[s as usize];
                    let sign = if s.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
                    local += sign * marginal[index[flat]].log2();
                }
                total -= p * local;
            }
            total
        };
        let subset_names = |mask: u32| -> Vec<String> {
            (0..n).filter(|b| mask & (1 << b) != 0).map(|b| names[b].clone()).collect()
        };

        let entropies: Vec<f64> = (0..n).map(|d| entropy(1 << d)).collect();
        let higher: Vec<u32> = masks.iter().copied().filter(|m| m.count_ones() >= 2).collect();
        let transmissions: Vec<(Vec<String>, f64)> = higher
            .iter()
            .map(|&m| (subset_names(m), pointwise_transmission(m)))
            .collect();
        let t_full = transmissions.last().map(|t| t.1).unwrap_or(0.0);
        let r = if n % 2 == 1 { t_full } else { -t_full };

        let left = entropy(full) - entropies.iter().sum::<f64>();
        let right: f64 = higher
            .iter()
            .zip(&transmissions)
            .filter(|(m, _)| (m.count_ones() as usize) < n)
            .map(|(m, (_, t))| if m.count_ones() % 2 == 0 { *t } else { -*t })
            .sum();

        let max_entropies: Vec<f64> = self.cardinalities.iter().map(|&c| (c as f64).log2()).collect();
        let shannon = entropies
            .iter()
            .zip(&max_entropies)
            .zip(&names)
            .map(|((&h, &hmax), name)| {
                if hmax <= 0.0 {
                    Err(Error::UndefinedRedundancy(name.clone()))
                } else {
                    Ok(((hmax - h) / hmax).clamp(0.0, 1.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let joint_entropies = higher.iter().map(|&m| (subset_names(m), entropy(m))).collect();
        let mut report = InfoReport {
            dims: names,
            total_mass: 1.0,
            cell_count: self.probs.iter().filter(|p| **p > 0.0).count(),
            entropies,
            joint_entropies,
            transmissions,
            mutual_redundancy: r,
            left_bracket: left,
            right_bracket: right,
            max_entropies,
            shannon_redundancy: shannon,
            max_mode: MaxEntropyMode::Declared,
            verdict: SynergyVerdict::classify(r, epsilon),
            epsilon,
            unit,
            flags: Vec::new(),
        };
        report.set_flags();
        Ok(report)
    }
}

/// Draws or lays out the spec's records.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<Record>> {
    let pmf = spec.pmf()?;
    let labels: Vec<Vec<String>> = (0..pmf.probs.len())
        .map(|flat| pmf.unflatten(flat).iter().map(usize::to_string).collect())
        .collect();
    let period_label = |k: usize| (spec.periods > 1).then(|| (k + 1).to_string());
    let mut records = Vec::with_capacity(spec.n.saturating_mul(spec.periods));

    match spec.mode {
        SamplingMode::BalancedExact => {
            let mut counts = Vec::with_capacity(pmf.probs.len());
            for &p in &pmf.probs {
                let c = spec.n as f64 * p;
                let rounded = c.round();
                if (c - rounded).abs() > 1e-9 * c.max(1.0) {
                    let support = pmf.probs.iter().filter(|p| **p > 0.0).count();
                    return Err(Error::Validation(format!(
                        "balanced-exact generation needs n * p integral for every cell \
                         (n = {} over a support of {support})",
                        spec.n
                    )));
                }
                counts.push(rounded as usize);
            }
            for k in 0..spec.periods {
                for (flat, &count) in counts.iter().enumerate() {
                    for _ in 0..count {
                        records.push(Record {
                            values: labels[flat].clone(),
                            weight: 1.0,
                            period: period_label(k),
                        });
                    }
                }
            }
        }
        SamplingMode::Sampled { seed } => {
            let mut cumulative = Vec::with_capacity(pmf.probs.len());
            let mut acc = 0.0;
            for &p in &pmf.probs {
                acc += p;
                cumulative.push(acc);
            }
            let last = pmf.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..spec.periods {
                for _ in 0..spec.n {
                    let u: f64 = rng.random();
                    let flat = cumulative.partition_point(|&c| c <= u).min(last);
                    records.push(Record {
                        values: labels[flat].clone(),
                        weight: 1.0,
                        period: period_label(k),
                    });
                }
            }
        }
    }
    Ok(records)
}

/// Every measure of the spec's pmf by dense enumeration, with the default tolerance.
pub fn analytic_measures(spec: &GeneratorSpec) -> Result<InfoReport> {
    spec.pmf()?.report(DEFAULT_EPSILON, UnitScale::Bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(kind: GeneratorKind, n: usize) -> GeneratorSpec {
        GeneratorSpec::new(kind, n, SamplingMode::BalancedExact)
    }

    #[test]
    fn parity_balanced_layout() {
        let rs = generate(&balanced(GeneratorKind::Parity, 4)).unwrap();
        let tuples: Vec<Vec<&str>> = rs.iter().map(|r| r.values.iter().map(String::as_str).collect()).collect();
        assert_eq!(tuples, vec![vec!["0", "0", "0"], vec!["0", "1", "1"], vec!["1", "0", "1"], vec!["1", "1", "0"]]);
    }

    #[test]
    fn balanced_requires_divisibility() {
        assert!(generate(&balanced(GeneratorKind::Parity, 6)).is_err());
        assert!(generate(&balanced(GeneratorKind::Copy { n_dims: 3 }, 3)).is_err());
        assert_eq!(generate(&balanced(GeneratorKind::Copy { n_dims: 3 }, 2)).unwrap().len(), 2);
    }

    #[test]
    fn coupled_zero_is_independent_bits() {
        let coupled = generate(&balanced(GeneratorKind::Coupled { lambda: 0.0 }, 16)).unwrap();
        let independent = generate(&balanced(GeneratorKind::Independent { cardinalities: vec![2, 2, 2] }, 16)).unwrap();
        assert_eq!(coupled, independent);
    }

    #[test]
    fn analytic_canonical_values() {
        let parity = analytic_measures(&balanced(GeneratorKind::Parity, 4)).unwrap();
        assert!((parity.mutual_redundancy + 1.0).abs() < 1e-12);
        assert_eq!(parity.verdict, SynergyVerdict::SelfOrganizationPrevails);
        let copy = analytic_measures(&balanced(GeneratorKind::Copy { n_dims: 3 }, 2)).unwrap();
        assert!((copy.mutual_redundancy - 1.0).abs() < 1e-12);
        let ind = analytic_measures(&balanced(GeneratorKind::Independent { cardinalities: vec![3, 2, 4] }, 24)).unwrap();
        assert!(ind.mutual_redundancy.abs() < 1e-12);
        assert_eq!(ind.verdict, SynergyVerdict::Balanced);
    }

    // Frozen from the dense oracle. Legal parity tuples carry 3/16, the
    // others 1/16; all pair marginals stay uniform, so
    // R3 = T123 = 3 - 6 + H123 = 1 - (3/4) log2 3.
    const COUPLED_HALF_R3: f64 = -0.188_721_875_540_867_06;

    #[test]
    fn coupled_half_regression() {
        let r = analytic_measures(&balanced(GeneratorKind::Coupled { lambda: 0.5 }, 16))
            .unwrap()
            .mutual_redundancy;
        assert!((r - COUPLED_HALF_R3).abs() < 1e-12, "{r}");
        assert!((r - (1.0 - 0.75 * 3f64.log2())).abs() < 1e-12);
    }

    #[test]
    fn sampled_is_reproducible() {
        let spec = GeneratorSpec::new(GeneratorKind::Parity, 1000, SamplingMode::Sampled { seed: 42 });
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = GeneratorSpec::new(GeneratorKind::Parity, 1000, SamplingMode::Sampled { seed: 43 });
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
        assert!(generate(&spec).unwrap().iter().all(|r| {
            let v: Vec<u8> = r.values.iter().map(|s| s.parse().unwrap()).collect();
            v[2] == v[0] ^ v[1]
        }));
    }

    #[test]
    fn periods_are_labelled() {
        let spec = balanced(GeneratorKind::Parity, 4).with_periods(3);
        let rs = generate(&spec).unwrap();
        assert_eq!(rs.len(), 12);
        assert_eq!(rs[0].period.as_deref(), Some("1"));
        assert_eq!(rs[11].period.as_deref(), Some("3"));
        assert!(generate(&balanced(GeneratorKind::Parity, 4)).unwrap()[0].period.is_none());
    }

    #[test]
    fn spec_validation() {
        assert!(balanced(GeneratorKind::Parity, 0).validate().is_err());
        assert!(balanced(GeneratorKind::Coupled { lambda: 1.5 }, 8).validate().is_err());
        assert!(balanced(GeneratorKind::Copy { n_dims: 7 }, 8).validate().is_err());
        assert!(balanced(GeneratorKind::Independent { cardinalities: vec![2] }, 8).validate().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec: GeneratorSpec =
            serde_json::from_str(r#"{"kind": "coupled", "lambda": 0.25, "n": 800, "mode": "sampled", "seed": 9}"#).unwrap();
        assert_eq!(spec.kind, GeneratorKind::Coupled { lambda: 0.25 });
        assert_eq!(spec.mode, SamplingMode::Sampled { seed: 9 });
        assert_eq!(spec.periods, 1);
        let back: GeneratorSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let parity: GeneratorSpec = serde_json::from_str(r#"{"kind": "parity", "n": 4, "mode": "balanced_exact"}"#).unwrap();
        assert_eq!(parity.mode, SamplingMode::BalancedExact);
    }

    #[test]
    fn random_pmf_is_normalized_and_seeded() {
        let a = DensePmf::random(&[3, 4, 2], 0.5, 7).unwrap();
        let b = DensePmf::random(&[3, 4, 2], 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
