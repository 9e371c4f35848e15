//! Categorical data model and the sparse n-dimensional contingency table.
//!
//! Category labels are interned per dimension into dense `u32` ids. Ids are
//! assigned in sorted label order, so the lexicographic order of id tuples
//! coincides with the lexicographic order of label tuples and the cell list
//! can be iterated deterministically regardless of how the table was built.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TransformRule;
use crate::mass::Mass;

pub const MIN_DIMS: usize = 2;
pub const MAX_DIMS: usize = 6;

/// Records per counting shard; inputs smaller than this are counted on one thread.
const SHARD_SIZE: usize = 1 << 16;

/// Upper bound on the cells materialized by [`ContingencyTable::smoothed`].
const MAX_DENSE_CELLS: usize = 10_000_000;

pub(crate) type CellKey = [u32; MAX_DIMS];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_cardinality: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformRule>,
}

impl Dimension {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            declared_cardinality: None,
            transform: None,
        }
    }

    pub fn with_cardinality(mut self, cardinality: usize) -> Self {
        self.declared_cardinality = Some(cardinality);
        self
    }

    pub fn with_transform(mut self, transform: TransformRule) -> Self {
        self.transform = Some(transform);
        self
    }
}

/// Ordered, named categorical axes.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DimensionSchema {
    dims: Vec<Dimension>,
}

impl DimensionSchema {
    /// Validates and builds a schema of 2 to 6 uniquely named dimensions.
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if !(MIN_DIMS..=MAX_DIMS).contains(&dims.len()) {
            return Err(Error::Schema(format!(
                "a schema needs between {MIN_DIMS} and {MAX_DIMS} dimensions, got {}",
                dims.len()
            )));
        }
        Self::checked(dims)
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(names.into_iter().map(Dimension::new).collect())
    }

    fn checked(dims: Vec<Dimension>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &dims {
            if d.name.trim().is_empty() {
                return Err(Error::Schema("dimension names must be non-empty".into()));
            }
            if !seen.insert(d.name.as_str()) {
                return Err(Error::Schema(format!("duplicate dimension `{}`", d.name)));
            }
            if d.declared_cardinality == Some(0) {
                return Err(Error::Schema(format!(
                    "declared cardinality of `{}` must be at least 1",
                    d.name
                )));
            }
            if let Some(rule) = &d.transform {
                rule.validate()?;
            }
        }
        Ok(Self { dims })
    }

    /// Schema over a subset of dimensions, in their original order. Marginal
    /// tables may have a single dimension, so the arity bound is not applied.
    pub(crate) fn projected(&self, indices: &[usize]) -> Self {
        Self {
            dims: indices.iter().map(|&i| self.dims[i].clone()).collect(),
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dims.iter().map(|d| d.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.dims
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDimension(name.to_string()))
    }

    pub fn dimension(&self, name: &str) -> Result<&Dimension> {
        self.index_of(name).map(|i| &self.dims[i])
    }
}

impl<'de> Deserialize<'de> for DimensionSchema {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dims = Vec::<Dimension>::deserialize(deserializer)?;
        DimensionSchema::new(dims).map_err(serde::de::Error::custom)
    }
}

/// One unit of analysis: a category label per schema dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub values: Vec<String>,
    pub weight: f64,
    pub period: Option<String>,
}

impl Record {
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            values: values.into_iter().map(Into::into).collect(),
            weight: 1.0,
            period: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_period(mut self, period: impl Into<String>) -> Self {
        self.period = Some(period.into());
        self
    }
}

/// Sparse joint distribution over the schema's dimensions.
///
/// Immutable once built. Cells are kept sorted by label tuple and never
/// carry zero mass.
#[derive(Clone, Debug, PartialEq)]
pub struct ContingencyTable {
    schema: DimensionSchema,
    labels: Vec<Vec<String>>,
    cells: Vec<(CellKey, Mass)>,
    total: Mass,
}

/// Builds a table by summing record weights per category tuple.
///
/// Large inputs are counted in parallel shards; the merge is integer
/// addition, so the result does not depend on record order or shard layout.
pub fn build_table(records: &[Record], schema: &DimensionSchema) -> Result<ContingencyTable> {
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }
    let shards: Vec<Shard<'_>> = if records.len() <= SHARD_SIZE {
        vec![count_shard(records, schema.len(), 0)?]
    } else {
        records
            .par_chunks(SHARD_SIZE)
            .enumerate()
            .map(|(i, chunk)| count_shard(chunk, schema.len(), i * SHARD_SIZE))
            .collect::<Result<_>>()?
    };
    merge_shards(schema, shards)
}

struct Shard<'a> {
    labels: Vec<Vec<&'a str>>,
    cells: HashMap<CellKey, Mass>,
}

fn count_shard(records: &[Record], arity: usize, offset: usize) -> Result<Shard<'_>> {
    let mut interners: Vec<HashMap<&str, u32>> = vec![HashMap::new(); arity];
    let mut labels: Vec<Vec<&str>> = vec![Vec::new(); arity];
    let mut cells: HashMap<CellKey, Mass> = HashMap::new();

    for (i, record) in records.iter().enumerate() {
        let row = offset + i;
        if record.values.len() != arity {
            return Err(Error::Schema(format!(
                "record {row} has {} values, schema has {arity} dimensions",
                record.values.len()
            )));
        }
        let mass = Mass::from_weight(record.weight).ok_or_else(|| {
            Error::Validation(format!("record {row} has invalid weight {}", record.weight))
        })?;
        if let Some(d) = record.values.iter().position(|v| v.is_empty()) {
            return Err(Error::Validation(format!(
                "record {row} has an empty category in dimension {d}"
            )));
        }
        if mass.is_zero() {
            continue;
        }
        let mut key = [0u32; MAX_DIMS];
        for (d, value) in record.values.iter().enumerate() {
            let next = labels[d].len() as u32;
            key[d] = *interners[d].entry(value.as_str()).or_insert_with(|| {
                labels[d].push(value.as_str());
                next
            });
        }
        let cell = cells.entry(key).or_insert(Mass::ZERO);
        *cell = cell
            .checked_add(mass)
            .ok_or_else(|| Error::Validation("total mass overflow".into()))?;
    }
    Ok(Shard { labels, cells })
}

fn merge_shards(schema: &DimensionSchema, shards: Vec<Shard<'_>>) -> Result<ContingencyTable> {
    let arity = schema.len();
    if shards.len() == 1 {
        let shard = shards.into_iter().next().unwrap();
        let labels = shard
            .labels
            .into_iter()
            .map(|ls| ls.into_iter().map(str::to_owned).collect())
            .collect();
        return ContingencyTable::assemble(schema.clone(), labels, shard.cells);
    }

    let mut global: Vec<Vec<&str>> = vec![Vec::new(); arity];
    for shard in &shards {
        for (d, ls) in shard.labels.iter().enumerate() {
            global[d].extend(ls.iter().copied());
        }
    }
    for ls in &mut global {
        ls.sort_unstable();
        ls.dedup();
    }
    let lookup: Vec<HashMap<&str, u32>> = global
        .iter()
        .map(|ls| ls.iter().enumerate().map(|(i, l)| (*l, i as u32)).collect())
        .collect();

    let mut cells: HashMap<CellKey, Mass> = HashMap::new();
    for shard in &shards {
        let remap: Vec<Vec<u32>> = shard
            .labels
            .iter()
            .enumerate()
            .map(|(d, ls)| ls.iter().map(|l| lookup[d][l]).collect())
            .collect();
        for (key, mass) in &shard.cells {
            let mut global_key = [0u32; MAX_DIMS];
            for d in 0..arity {
                global_key[d] = remap[d][key[d] as usize];
            }
            let cell = cells.entry(global_key).or_insert(Mass::ZERO);
            *cell = cell
                .checked_add(*mass)
                .ok_or_else(|| Error::Validation("total mass overflow".into()))?;
        }
    }
    let labels = global
        .into_iter()
        .map(|ls| ls.into_iter().map(str::to_owned).collect())
        .collect();
    ContingencyTable::assemble(schema.clone(), labels, cells)
}

impl ContingencyTable {
    /// Canonicalizes a cell map: drops labels without mass, re-assigns ids in
    /// sorted label order and sorts the cells.
    fn assemble(
        schema: DimensionSchema,
        labels: Vec<Vec<String>>,
        cells: HashMap<CellKey, Mass>,
    ) -> Result<Self> {
        let arity = schema.len();
        let mut used: Vec<Vec<bool>> = labels.iter().map(|ls| vec![false; ls.len()]).collect();
        let mut total = Mass::ZERO;
        for (key, mass) in &cells {
            if mass.is_zero() {
                continue;
            }
            total = total
                .checked_add(*mass)
                .ok_or_else(|| Error::Validation("total mass overflow".into()))?;
            for d in 0..arity {
                used[d][key[d] as usize] = true;
            }
        }
        if total.is_zero() {
            return Err(Error::EmptyTable);
        }

        let mut remap: Vec<Vec<u32>> = Vec::with_capacity(arity);
        let mut support: Vec<Vec<String>> = Vec::with_capacity(arity);
        for (d, ls) in labels.into_iter().enumerate() {
            let mut order: Vec<(String, u32)> = ls
                .into_iter()
                .enumerate()
                .filter(|(i, _)| used[d][*i])
                .map(|(i, l)| (l, i as u32))
                .collect();
            order.sort_unstable();
            let mut map = vec![u32::MAX; used[d].len()];
            for (new, (_, old)) in order.iter().enumerate() {
                map[*old as usize] = new as u32;
            }
            remap.push(map);
            support.push(order.into_iter().map(|(l, _)| l).collect());
        }

        for (dim, ls) in schema.dims().iter().zip(&support) {
            if let Some(declared) = dim.declared_cardinality {
                if ls.len() > declared {
                    return Err(Error::Validation(format!(
                        "dimension `{}` has {} observed categories, more than its declared cardinality {declared}",
                        dim.name,
                        ls.len()
                    )));
                }
            }
        }

        let mut sorted: Vec<(CellKey, Mass)> = cells
            .into_iter()
            .filter(|(_, m)| !m.is_zero())
            .map(|(key, m)| {
                let mut k = [0u32; MAX_DIMS];
                for d in 0..arity {
                    k[d] = remap[d][key[d] as usize];
                }
                (k, m)
            })
            .collect();
        sorted.sort_unstable_by_key(|a| a.0);

        Ok(Self {
            schema,
            labels: support,
            cells: sorted,
            total,
        })
    }

    pub fn schema(&self) -> &DimensionSchema {
        &self.schema
    }

    pub fn total(&self) -> f64 {
        self.total.to_f64()
    }

    pub fn total_mass(&self) -> Mass {
        self.total
    }

    /// Number of stored (non-zero) cells.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Observed categories of dimension `index`, sorted.
    pub fn support(&self, index: usize) -> &[String] {
        &self.labels[index]
    }

    pub fn support_size(&self, index: usize) -> usize {
        self.labels[index].len()
    }

    /// Cells as label tuples with their mass, in sorted label order.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<&str>, f64)> + '_ {
        self.cells.iter().map(move |(key, mass)| {
            let tuple = (0..self.schema.len())
                .map(|d| self.labels[d][key[d] as usize].as_str())
                .collect();
            (tuple, mass.to_f64())
        })
    }

    /// Mass of one label tuple; zero when the tuple is not present.
    pub fn mass_of(&self, tuple: &[&str]) -> f64 {
        if tuple.len() != self.schema.len() {
            return 0.0;
        }
        let mut key = [0u32; MAX_DIMS];
        for (d, label) in tuple.iter().enumerate() {
            match self.labels[d].binary_search_by(|l| l.as_str().cmp(label)) {
                Ok(i) => key[d] = i as u32,
                Err(_) => return 0.0,
            }
        }
        self.cells
            .binary_search_by(|(k, _)| k.cmp(&key))
            .map(|i| self.cells[i].1.to_f64())
            .unwrap_or(0.0)
    }

    /// Masses of the marginal over `indices` (sorted, ascending), in sorted key order.
    pub(crate) fn marginal_masses(&self, indices: &[usize]) -> Vec<(CellKey, Mass)> {
        if indices.len() == self.schema.len() {
            return self.cells.clone();
        }
        let mut acc: HashMap<CellKey, Mass> = HashMap::with_capacity(self.cells.len().min(1 << 16));
        for (key, mass) in &self.cells {
            let mut k = [0u32; MAX_DIMS];
            for (slot, &d) in indices.iter().enumerate() {
                k[slot] = key[d];
            }
            *acc.entry(k).or_insert(Mass::ZERO) += *mass;
        }
        let mut out: Vec<(CellKey, Mass)> = acc.into_iter().collect();
        out.sort_unstable_by_key(|a| a.0);
        out
    }

    /// Marginal table over the named dimensions; they keep their schema order.
    pub fn marginalize<S: AsRef<str>>(&self, keep: &[S]) -> Result<ContingencyTable> {
        if keep.is_empty() {
            return Err(Error::InvalidSubset("keep set is empty".into()));
        }
        let mut indices = Vec::with_capacity(keep.len());
        for name in keep {
            indices.push(self.schema.index_of(name.as_ref())?);
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(self.project(&indices))
    }

    pub(crate) fn project(&self, indices: &[usize]) -> ContingencyTable {
        if indices.len() == self.schema.len() {
            return self.clone();
        }
        ContingencyTable {
            schema: self.schema.projected(indices),
            labels: indices.iter().map(|&d| self.labels[d].clone()).collect(),
            cells: self.marginal_masses(indices),
            total: self.total,
        }
    }

    /// Sub-table of the cells whose `dim` category equals `label`; `None` if absent.
    pub fn restrict(&self, dim: &str, label: &str) -> Result<Option<ContingencyTable>> {
        let d = self.schema.index_of(dim)?;
        let Ok(id) = self.labels[d].binary_search_by(|l| l.as_str().cmp(label)) else {
            return Ok(None);
        };
        let cells: HashMap<CellKey, Mass> = self
            .cells
            .iter()
            .filter(|(k, _)| k[d] == id as u32)
            .copied()
            .collect();
        Self::assemble(self.schema.clone(), self.labels.clone(), cells).map(Some)
    }

    /// Additive smoothing: adds `alpha` to every cell of the product of the
    /// observed supports. This densifies the table.
    pub fn smoothed(&self, alpha: f64) -> Result<ContingencyTable> {
        let add = Mass::from_weight(alpha)
            .ok_or_else(|| Error::Validation(format!("invalid smoothing constant {alpha}")))?;
        if add.is_zero() {
            return Ok(self.clone());
        }
        let sizes: Vec<usize> = self.labels.iter().map(Vec::len).collect();
        let dense = sizes
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .filter(|&n| n <= MAX_DENSE_CELLS)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "smoothing would materialize more than {MAX_DENSE_CELLS} cells"
                ))
            })?;
        let mut cells: HashMap<CellKey, Mass> = self.cells.iter().copied().collect();
        let arity = sizes.len();
        let mut key = [0u32; MAX_DIMS];
        for flat in 0..dense {
            let mut rest = flat;
            for d in (0..arity).rev() {
                key[d] = (rest % sizes[d]) as u32;
                rest /= sizes[d];
            }
            let cell = cells.entry(key).or_insert(Mass::ZERO);
            *cell = cell
                .checked_add(add)
                .ok_or_else(|| Error::Validation("total mass overflow".into()))?;
        }
        Self::assemble(self.schema.clone(), self.labels.clone(), cells)
    }
}

/// Records whose `group_dim` category equals `group_value`, in input order.
pub fn slice_group(
    records: &[Record],
    schema: &DimensionSchema,
    group_dim: &str,
    group_value: &str,
) -> Result<Vec<Record>> {
    let d = schema.index_of(group_dim)?;
    Ok(records
        .iter()
        .filter(|r| r.values.get(d).map(String::as_str) == Some(group_value))
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema2() -> DimensionSchema {
        DimensionSchema::from_names(["dim1", "dim2"]).unwrap()
    }

    fn rec(a: &str, b: &str) -> Record {
        Record::new([a, b])
    }

    fn cell_map(t: &ContingencyTable) -> Vec<(Vec<String>, f64)> {
        t.cells()
            .map(|(k, m)| (k.into_iter().map(str::to_owned).collect(), m))
            .collect()
    }

    #[test]
    fn schema_bounds() {
        assert!(DimensionSchema::from_names(["a"]).is_err());
        assert!(DimensionSchema::from_names(["a", "b", "c", "d", "e", "f", "g"]).is_err());
        assert!(DimensionSchema::from_names(["a", "a"]).is_err());
        assert!(DimensionSchema::from_names(["a", ""]).is_err());
        assert!(DimensionSchema::new(vec![Dimension::new("a").with_cardinality(0), Dimension::new("b")]).is_err());
        assert_eq!(DimensionSchema::from_names(["a", "b", "c"]).unwrap().len(), 3);
    }

    #[test]
    fn counts_unit_records() {
        let t = build_table(&[rec("A", "X"), rec("A", "X"), rec("B", "Y")], &schema2()).unwrap();
        assert_eq!(t.total(), 3.0);
        assert_eq!(t.cell_count(), 2);
        assert_eq!(t.mass_of(&["A", "X"]), 2.0);
        assert_eq!(t.mass_of(&["B", "Y"]), 1.0);
        assert_eq!(t.mass_of(&["A", "Y"]), 0.0);
    }

    #[test]
    fn zero_mass_is_an_error() {
        let err = build_table(&[rec("A", "X").with_weight(0.0)], &schema2()).unwrap_err();
        assert!(matches!(err, Error::EmptyTable));
        assert!(matches!(build_table(&[], &schema2()).unwrap_err(), Error::EmptyTable));
    }

    #[test]
    fn sums_weights() {
        let t = build_table(
            &[rec("A", "X").with_weight(1.5), rec("A", "X").with_weight(0.5)],
            &schema2(),
        )
        .unwrap();
        assert_eq!(cell_map(&t), vec![(vec!["A".to_string(), "X".to_string()], 2.0)]);
        assert_eq!(t.total(), 2.0);
    }

    #[test]
    fn build_errors() {
        let s = schema2();
        assert!(matches!(build_table(&[Record::new(["A"])], &s), Err(Error::Schema(_))));
        assert!(matches!(
            build_table(&[rec("A", "X").with_weight(-1.0)], &s),
            Err(Error::Validation(_))
        ));
        assert!(matches!(build_table(&[rec("A", "")], &s), Err(Error::Validation(_))));
    }

    #[test]
    fn zero_weight_records_do_not_enter_support() {
        let t = build_table(&[rec("A", "X"), rec("B", "Y").with_weight(0.0)], &schema2()).unwrap();
        assert_eq!(t.support(0), ["A".to_string()]);
        assert_eq!(t.support_size(1), 1);
    }

    #[test]
    fn declared_cardinality_is_enforced() {
        let s = DimensionSchema::new(vec![Dimension::new("a").with_cardinality(1), Dimension::new("b")]).unwrap();
        assert!(build_table(&[rec("A", "X"), rec("B", "X")], &s).is_err());
        assert!(build_table(&[rec("A", "X"), rec("A", "Y")], &s).is_ok());
    }

    #[test]
    fn marginal_examples() {
        let t = build_table(&[rec("A", "X"), rec("A", "X"), rec("B", "X"), rec("B", "Y")], &schema2()).unwrap();
        let m1 = t.marginalize(&["dim1"]).unwrap();
        assert_eq!(m1.mass_of(&["A"]), 2.0);
        assert_eq!(m1.mass_of(&["B"]), 2.0);
        assert_eq!(m1.total(), 4.0);
        let m2 = t.marginalize(&["dim2"]).unwrap();
        assert_eq!(m2.mass_of(&["X"]), 3.0);
        assert_eq!(m2.mass_of(&["Y"]), 1.0);
        assert_eq!(t.marginalize(&["dim2", "dim1"]).unwrap(), t);
        assert!(matches!(t.marginalize::<&str>(&[]), Err(Error::InvalidSubset(_))));
        assert!(matches!(t.marginalize(&["nope"]), Err(Error::UnknownDimension(_))));
    }

    #[test]
    fn slicing() {
        let s = DimensionSchema::from_names(["region", "tech"]).unwrap();
        let rs = vec![
            rec("10", "62"),
            rec("20", "62"),
            rec("10", "28"),
            rec("30", "62"),
            rec("20", "28"),
        ];
        let got = slice_group(&rs, &s, "region", "10").unwrap();
        assert_eq!(got, vec![rs[0].clone(), rs[2].clone()]);
        assert!(slice_group(&rs, &s, "region", "99").unwrap().is_empty());
        let all: Vec<Record> = rs.iter().map(|r| rec("10", &r.values[1])).collect();
        assert_eq!(slice_group(&all, &s, "region", "10").unwrap(), all);
        assert!(slice_group(&rs, &s, "sector", "10").is_err());
    }

    #[test]
    fn restrict_keeps_only_matching_cells() {
        let t = build_table(&[rec("A", "X"), rec("B", "X"), rec("B", "Y")], &schema2()).unwrap();
        let b = t.restrict("dim1", "B").unwrap().unwrap();
        assert_eq!(b.total(), 2.0);
        assert_eq!(b.support(0), ["B".to_string()]);
        assert!(t.restrict("dim1", "C").unwrap().is_none());
    }

    #[test]
    fn smoothing_fills_the_product_space() {
        let t = build_table(&[rec("A", "X"), rec("B", "Y")], &schema2()).unwrap();
        let s = t.smoothed(0.5).unwrap();
        assert_eq!(s.cell_count(), 4);
        assert_eq!(s.total(), 4.0);
        assert_eq!(s.mass_of(&["A", "Y"]), 0.5);
        assert!(t.smoothed(-1.0).is_err());
    }

    #[test]
    fn sharded_build_matches_sequential() {
        let s = DimensionSchema::from_names(["a", "b", "c"]).unwrap();
        let records: Vec<Record> = (0..(3 * SHARD_SIZE + 17))
            .map(|i| Record::new([(i % 7).to_string(), (i % 11).to_string(), (i % 3).to_string()]))
            .collect();
        let sharded = build_table(&records, &s).unwrap();
        let mut seq = count_shard(&records, 3, 0).map(|sh| merge_shards(&s, vec![sh])).unwrap().unwrap();
        assert_eq!(sharded, seq);
        seq = build_table(&records[..SHARD_SIZE], &s).unwrap();
        assert_eq!(seq.total(), SHARD_SIZE as f64);
    }
}
