//! Group decomposition of the transmission and per-period trajectories.
//!
//! For groups `g` (regions, say) with mass shares `w_g = N_g / N` the pooled
//! transmission splits additively as
//!
//! ```text
//! T_pooled = sum_g w_g T_g + delta_T
//! ```
//!
//! where `delta_T` is the between-group surplus. The identity holds by
//! construction; what carries information is the sign and size of `delta_T`
//! next to the within-group terms.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infomeasure::{
    joint_entropy, mutual_redundancy, redundancy_ratio, transmission, MaxEntropyMode, SubsetMask,
    UnitScale, DEFAULT_EPSILON,
};
use crate::sum::compensated_sum;
use crate::tableau::{build_table, ContingencyTable, DimensionSchema, Record};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupingSpec {
    pub group_dim: String,
    pub measure_dims: SubsetMask,
}

impl GroupingSpec {
    pub fn new(schema: &DimensionSchema, group_dim: &str, measure_dims: SubsetMask) -> Result<Self> {
        let spec = Self {
            group_dim: group_dim.to_string(),
            measure_dims,
        };
        spec.validate(schema)?;
        Ok(spec)
    }

    /// Groups by `group_dim` and measures over every other schema dimension.
    pub fn over_rest(schema: &DimensionSchema, group_dim: &str) -> Result<Self> {
        schema.index_of(group_dim)?;
        let rest = SubsetMask::from_names(schema.names().filter(|n| *n != group_dim).map(str::to_owned))?;
        Self::new(schema, group_dim, rest)
    }

    pub fn validate(&self, schema: &DimensionSchema) -> Result<()> {
        schema.index_of(&self.group_dim)?;
        if self.measure_dims.names().contains(&self.group_dim) {
            return Err(Error::InvalidSubset(format!(
                "group dimension `{}` cannot also be measured",
                self.group_dim
            )));
        }
        if self.measure_dims.resolve(schema)?.len() < 2 {
            return Err(Error::InvalidSubset("decomposition needs at least 2 measured dimensions".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionOptions {
    /// Groups lighter than this are reported but flagged unreliable.
    pub min_group_mass: f64,
    pub epsilon: f64,
    pub unit: UnitScale,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        Self {
            min_group_mass: 1.0,
            epsilon: DEFAULT_EPSILON,
            unit: UnitScale::Bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupContribution {
    pub key: String,
    pub record_count: usize,
    pub mass: f64,
    /// Share of the pooled mass.
    pub weight: f64,
    /// Within-group transmission, bits.
    pub transmission: f64,
    /// `weight * transmission`, bits.
    pub contribution: f64,
    pub unreliable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynergyDecomposition {
    pub group_dim: String,
    pub measure_dims: Vec<String>,
    pub total_mass: f64,
    pub pooled_transmission: f64,
    pub groups: Vec<GroupContribution>,
    pub within_transmission: f64,
    pub delta_transmission: f64,
    pub unit: UnitScale,
    /// Only one group: `delta_T` is zero by construction.
    pub single_group: bool,
    pub interpretation: String,
    pub warnings: Vec<String>,
}

/// Splits the pooled transmission over `spec.measure_dims` into mass-weighted
/// within-group transmissions and the between-group surplus.
pub fn decompose(
    records: &[Record],
    schema: &DimensionSchema,
    spec: &GroupingSpec,
    options: &DecompositionOptions,
) -> Result<SynergyDecomposition> {
    spec.validate(schema)?;
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }
    let group_idx = schema.index_of(&spec.group_dim)?;
    let table = build_table(records, schema)?;
    let measure = spec.measure_dims.clone();
    let pooled = transmission(&table, &measure)?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.values[group_idx].as_str()).or_default() += 1;
    }
    let mut warnings = Vec::new();
    for key in counts.keys() {
        if table.support(group_idx).binary_search_by(|l| l.as_str().cmp(key)).is_err() {
            warnings.push(format!("group `{key}` has no mass and was left out"));
        }
    }

    let total = table.total();
    let groups: Vec<GroupContribution> = table
        .support(group_idx)
        .par_iter()
        .map(|key| -> Result<GroupContribution> {
            let sub = table
                .restrict(&spec.group_dim, key)?
                .ok_or_else(|| Error::Degenerate(format!("group `{key}` vanished")))?;
            let t = transmission(&sub, &measure)?;
            let mass = sub.total();
            let weight = mass / total;
            Ok(GroupContribution {
                key: key.clone(),
                record_count: counts.get(key.as_str()).copied().unwrap_or(0),
                mass,
                weight,
                transmission: t,
                contribution: weight * t,
                unreliable: mass < options.min_group_mass,
            })
        })
        .collect::<Result<_>>()?;

    for g in groups.iter().filter(|g| g.unreliable) {
        warnings.push(format!(
            "group `{}` has mass {} below the reliability threshold {}",
            g.key, g.mass, options.min_group_mass
        ));
    }
    let single_group = groups.len() == 1;
    if single_group {
        warnings.push(format!(
            "`{}` takes a single value; the between-group surplus is zero by construction",
            spec.group_dim
        ));
    }

    let within = compensated_sum(groups.iter().map(|g| g.contribution));
    let delta = pooled - within;
    let n = measure.len();
    Ok(SynergyDecomposition {
        group_dim: spec.group_dim.clone(),
        measure_dims: table
            .schema()
            .names()
            .filter(|d| measure.names().iter().any(|m| m == d))
            .map(str::to_owned)
            .collect(),
        total_mass: total,
        pooled_transmission: pooled,
        groups,
        within_transmission: within,
        delta_transmission: delta,
        unit: options.unit,
        single_group,
        interpretation: interpret(delta, n, options.epsilon),
        warnings,
    })
}

/// Reads `delta_T` through the sign convention of `R_n = (-1)^(1+n) T`.
fn interpret(delta_t: f64, n: usize, epsilon: f64) -> String {
    let delta_r = if n % 2 == 1 { delta_t } else { -delta_t };
    if delta_r < -epsilon {
        "negative surplus in R: the pooled level adds synergy beyond the weighted groups".into()
    } else if delta_r > epsilon {
        "positive surplus in R: the pooled level holds less synergy than the weighted groups".into()
    } else {
        "no surplus: pooled synergy equals the weighted sum of the groups".into()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PanelPoint {
    pub period: String,
    /// Joint entropy of the measured dimensions, bits.
    pub h_obs: f64,
    /// Sum of per-dimension maximum entropies, bits.
    pub h_max: f64,
    pub shannon_redundancy: f64,
    pub mutual_redundancy: f64,
    pub record_count: usize,
    pub total_mass: f64,
}

fn period_order(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels
        .iter()
        .map(|l| l.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    if numeric.is_some() {
        labels.sort_by(|a, b| {
            let (x, y) = (a.trim().parse::<f64>().unwrap(), b.trim().parse::<f64>().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    } else {
        labels.sort();
    }
}

/// One point per period, in period order (numeric when every label parses as
/// a number, lexicographic otherwise).
///
/// In cumulative mode the maximum entropy at a period counts every category
/// seen in that or any earlier period, so it never decreases.
pub fn panel_series(
    records: &[Record],
    schema: &DimensionSchema,
    measure: &SubsetMask,
    mode: MaxEntropyMode,
) -> Result<Vec<PanelPoint>> {
    let measure_idx = measure.resolve(schema)?;
    if measure_idx.len() < 2 {
        return Err(Error::InvalidSubset("panel needs at least 2 measured dimensions".into()));
    }
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut by_period: HashMap<&str, Vec<Record>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let p = r
            .period
            .as_deref()
            .ok_or_else(|| Error::Validation(format!("record {i} has no period label")))?;
        by_period.entry(p).or_default().push(r.clone());
    }
    let mut periods: Vec<String> = by_period.keys().map(|p| p.to_string()).collect();
    period_order(&mut periods);

    let tables: Vec<(usize, ContingencyTable)> = periods
        .par_iter()
        .map(|p| {
            let rs = &by_period[p.as_str()];
            let table = build_table(rs, schema).map_err(|e| match e {
                Error::EmptyTable => Error::Degenerate(format!("period `{p}` has no mass")),
                other => other,
            })?;
            Ok((rs.len(), table.project(&measure_idx)))
        })
        .collect::<Result<_>>()?;

    let mut seen: Vec<BTreeSet<String>> = vec![BTreeSet::new(); measure_idx.len()];
    let mut points = Vec::with_capacity(periods.len());
    for (period, (count, table)) in periods.into_iter().zip(tables) {
        let all = SubsetMask::all(table.schema());
        let h_obs = joint_entropy(&table, &all)?;
        let mut h_max = 0.0;
        for d in 0..measure_idx.len() {
            let categories = match mode {
                MaxEntropyMode::Declared => table.schema().dims()[d].declared_cardinality.ok_or_else(|| {
                    Error::Validation(format!(
                        "dimension `{}` has no declared cardinality",
                        table.schema().dims()[d].name
                    ))
                })?,
                MaxEntropyMode::Observed => table.support_size(d),
                MaxEntropyMode::Cumulative => {
                    seen[d].extend(table.support(d).iter().cloned());
                    seen[d].len()
                }
            };
            h_max += (categories as f64).log2();
        }
        let shannon = redundancy_ratio(h_obs, h_max, &format!("period {period}"))?;
        points.push(PanelPoint {
            mutual_redundancy: mutual_redundancy(&table, &all)?,
            period,
            h_obs,
            h_max,
            shannon_redundancy: shannon,
            record_count: count,
            total_mass: table.total(),
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> DimensionSchema {
        DimensionSchema::from_names(["region", "x", "y", "z"]).unwrap()
    }

    fn parity_rows(region: &str) -> Vec<Record> {
        [("0", "0", "0"), ("0", "1", "1"), ("1", "0", "1"), ("1", "1", "0")]
            .iter()
            .map(|(a, b, c)| Record::new([region, a, b, c]))
            .collect()
    }

    fn spec() -> GroupingSpec {
        GroupingSpec::over_rest(&schema(), "region").unwrap()
    }

    #[test]
    fn identical_groups_have_no_surplus() {
        let mut rs = parity_rows("A");
        rs.extend(parity_rows("B"));
        let d = decompose(&rs, &schema(), &spec(), &DecompositionOptions::default()).unwrap();
        assert!((d.pooled_transmission + 1.0).abs() < 1e-12);
        assert_eq!(d.groups.len(), 2);
        for g in &d.groups {
            assert!((g.transmission + 1.0).abs() < 1e-12);
            assert_eq!(g.weight, 0.5);
        }
        assert!(d.delta_transmission.abs() < 1e-12);
        assert!(!d.single_group);
    }

    #[test]
    fn single_group_degenerates() {
        let d = decompose(&parity_rows("A"), &schema(), &spec(), &DecompositionOptions::default()).unwrap();
        assert!(d.single_group);
        assert_eq!(d.delta_transmission, 0.0);
        assert_eq!(d.pooled_transmission, d.groups[0].transmission);
        assert!(!d.warnings.is_empty());
    }

    #[test]
    fn grouping_validation() {
        let s = schema();
        assert!(GroupingSpec::new(&s, "region", SubsetMask::from_names(["region", "x"]).unwrap()).is_err());
        assert!(GroupingSpec::new(&s, "nope", SubsetMask::from_names(["x", "y"]).unwrap()).is_err());
        assert!(GroupingSpec::new(&s, "region", SubsetMask::from_names(["x"]).unwrap()).is_err());
        assert!(decompose(&[], &s, &spec(), &DecompositionOptions::default()).is_err());
    }

    #[test]
    fn light_groups_are_flagged() {
        let mut rs = parity_rows("A");
        rs.push(Record::new(["B", "0", "0", "0"]).with_weight(0.5));
        rs.push(Record::new(["B", "1", "1", "0"]).with_weight(0.25));
        rs.push(Record::new(["C", "1", "1", "0"]).with_weight(0.0));
        let d = decompose(&rs, &schema(), &spec(), &DecompositionOptions::default()).unwrap();
        assert_eq!(d.groups.len(), 2);
        assert!(d.groups[1].unreliable);
        assert!(!d.groups[0].unreliable);
        assert!(d.warnings.iter().any(|w| w.contains("`C`")));
        let sum: f64 = d.groups.iter().map(|g| g.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((d.delta_transmission + d.within_transmission - d.pooled_transmission).abs() < 1e-12);
    }

    #[test]
    fn interpretation_follows_r_sign() {
        assert!(interpret(-0.1, 3, 1e-12).starts_with("negative"));
        assert!(interpret(-0.1, 4, 1e-12).starts_with("positive"));
        assert!(interpret(0.0, 3, 1e-12).starts_with("no surplus"));
    }

    fn panel_schema() -> DimensionSchema {
        DimensionSchema::from_names(["a", "b"]).unwrap()
    }

    #[test]
    fn panel_single_period_matches_direct() {
        let rs: Vec<Record> = [("p", "q"), ("p", "r"), ("s", "r")]
            .iter()
            .map(|(a, b)| Record::new([*a, *b]).with_period("2001"))
            .collect();
        let all = SubsetMask::all(&panel_schema());
        let points = panel_series(&rs, &panel_schema(), &all, MaxEntropyMode::Cumulative).unwrap();
        assert_eq!(points.len(), 1);
        let table = build_table(&rs, &panel_schema()).unwrap();
        assert_eq!(points[0].h_obs, joint_entropy(&table, &all).unwrap());
        assert_eq!(points[0].mutual_redundancy, mutual_redundancy(&table, &all).unwrap());
        assert_eq!(points[0].h_max, 2.0);
        assert_eq!(points[0].record_count, 3);
    }

    #[test]
    fn panel_cumulative_grows() {
        let rs = vec![
            Record::new(["p", "q"]).with_period("10"),
            Record::new(["s", "q"]).with_period("10"),
            Record::new(["p", "q"]).with_period("9"),
            Record::new(["s", "r"]).with_period("9"),
            Record::new(["t", "u"]).with_period("11"),
            Record::new(["p", "q"]).with_period("11"),
        ];
        let all = SubsetMask::all(&panel_schema());
        let cumulative = panel_series(&rs, &panel_schema(), &all, MaxEntropyMode::Cumulative).unwrap();
        let periods: Vec<&str> = cumulative.iter().map(|p| p.period.as_str()).collect();
        assert_eq!(periods, ["9", "10", "11"]);
        assert!(cumulative.windows(2).all(|w| w[0].h_max <= w[1].h_max));
        assert!(cumulative[2].h_max > cumulative[1].h_max);
        let observed = panel_series(&rs, &panel_schema(), &all, MaxEntropyMode::Observed).unwrap();
        assert!(observed[1].h_max < observed[0].h_max);
        assert!(panel_series(&rs, &panel_schema(), &all, MaxEntropyMode::Declared).is_err());
    }

    #[test]
    fn panel_errors() {
        let all = SubsetMask::all(&panel_schema());
        let missing = vec![Record::new(["p", "q"]).with_period("1"), Record::new(["p", "r"])];
        assert!(matches!(
            panel_series(&missing, &panel_schema(), &all, MaxEntropyMode::Observed),
            Err(Error::Validation(_))
        ));
        let empty = vec![
            Record::new(["p", "q"]).with_period("1"),
            Record::new(["s", "r"]).with_period("1"),
            Record::new(["p", "r"]).with_period("2").with_weight(0.0),
        ];
        assert!(matches!(
            panel_series(&empty, &panel_schema(), &all, MaxEntropyMode::Observed),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn lexicographic_periods() {
        let mut labels = vec!["2001Q2".to_string(), "2001Q1".into(), "2000Q4".into()];
        period_order(&mut labels);
        assert_eq!(labels, ["2000Q4", "2001Q1", "2001Q2"]);
        let mut nums = vec!["10".to_string(), "9".into(), "9.5".into()];
        period_order(&mut nums);
        assert_eq!(nums, ["9", "9.5", "10"]);
    }
}
