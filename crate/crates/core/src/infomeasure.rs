//! Entropies, transmissions and mutual redundancy, all in bits.
//!
//! Probabilities are maximum-likelihood relative frequencies `mass / total`
//! with `0 log 0 = 0`. Every H over a subset of dimensions is the entropy of
//! the corresponding marginal. Transmissions follow the alternating
//! inclusion-exclusion over subset entropies,
//!
//! ```text
//! T_U = sum over non-empty V ⊆ U of (-1)^(|V|+1) H_V
//! ```
//!
//! and the mutual redundancy of `n` dimensions is `R_n = (-1)^(1+n) T_U`.
//! Sums are compensated and always reduced in the same order (subsets by
//! size, then lexicographically; cells by sorted label tuple), so results are
//! bit-reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mass::Mass;
use crate::sum::{compensated_sum, CompensatedSum};
use crate::tableau::{ContingencyTable, DimensionSchema};

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// A non-empty set of dimension names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct SubsetMask {
    names: Vec<String>,
}

impl SubsetMask {
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidSubset("subset is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidSubset(format!("`{n}` listed twice")));
            }
        }
        Ok(Self { names })
    }

    /// A subset validated against `schema`.
    pub fn new<S: AsRef<str>>(schema: &DimensionSchema, names: &[S]) -> Result<Self> {
        let mask = Self::from_names(names.iter().map(|s| s.as_ref().to_string()))?;
        mask.resolve(schema)?;
        Ok(mask)
    }

    pub fn all(schema: &DimensionSchema) -> Self {
        Self {
            names: schema.names().map(str::to_owned).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Schema positions, ascending. Any permutation of the same names resolves identically.
    pub fn resolve(&self, schema: &DimensionSchema) -> Result<Vec<usize>> {
        let mut idx = self
            .names
            .iter()
            .map(|n| {
                schema.index_of(n).map_err(|_| {
                    Error::InvalidSubset(format!("`{n}` is not a dimension of the table"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        Ok(idx)
    }
}

impl TryFrom<Vec<String>> for SubsetMask {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::from_names(names)
    }
}

impl From<SubsetMask> for Vec<String> {
    fn from(mask: SubsetMask) -> Self {
        mask.names
    }
}

/// How the maximum entropy `log2(|categories|)` of a dimension is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxEntropyMode {
    /// The schema's declared cardinality.
    Declared,
    /// Categories observed in the table at hand.
    #[default]
    Observed,
    /// Categories observed so far in a period sequence; equals `Observed` for a single table.
    Cumulative,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitScale {
    #[default]
    #[serde(rename = "bits")]
    Bits,
    #[serde(rename = "mbits", alias = "millibits")]
    Millibits,
}

impl UnitScale {
    pub fn factor(self) -> f64 {
        match self {
            UnitScale::Bits => 1.0,
            UnitScale::Millibits => 1000.0,
        }
    }
}

/// Sign reading of the mutual redundancy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynergyVerdict {
    SelfOrganizationPrevails,
    OrganizationPrevails,
    Balanced,
}

impl SynergyVerdict {
    pub fn classify(mutual_redundancy: f64, epsilon: f64) -> Self {
        if mutual_redundancy < -epsilon {
            SynergyVerdict::SelfOrganizationPrevails
        } else if mutual_redundancy > epsilon {
            SynergyVerdict::OrganizationPrevails
        } else {
            SynergyVerdict::Balanced
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SynergyVerdict::SelfOrganizationPrevails => "self_organization_prevails",
            SynergyVerdict::OrganizationPrevails => "organization_prevails",
            SynergyVerdict::Balanced => "balanced",
        }
    }
}

/// The two terms of the mutual redundancy: joint minus summed marginal
/// entropies (never positive), and the alternating sum of lower-order
/// transmissions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedundancyBalance {
    pub left_bracket: f64,
    pub right_bracket: f64,
}

impl RedundancyBalance {
    pub fn total(&self) -> f64 {
        self.left_bracket + self.right_bracket
    }
}

pub(crate) fn entropy_of_masses<I: IntoIterator<Item = Mass>>(masses: I, total: Mass) -> f64 {
    let n = total.to_f64();
    let h = compensated_sum(masses.into_iter().map(|m| {
        let p = m.to_f64() / n;
        if p > 0.0 {
            -p * p.log2()
        } else {
            0.0
        }
    }));
    h.max(0.0) + 0.0
}

fn marginal_entropy(table: &ContingencyTable, indices: &[usize]) -> f64 {
    let masses = table.marginal_masses(indices);
    entropy_of_masses(masses.into_iter().map(|(_, m)| m), table.total_mass())
}

/// Subset bitmasks over `n` positions ordered by size, then lexicographically.
pub(crate) fn canonical_subsets(n: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|&m| (m.count_ones(), positions(m)));
    masks
}

fn positions(mask: u32) -> Vec<u32> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

fn parity_sign(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Entropies of every non-empty subset of a set of dimensions.
struct EntropyLattice {
    order: Vec<u32>,
    entropies: Vec<f64>,
    n: usize,
}

impl EntropyLattice {
    fn compute(table: &ContingencyTable, indices: &[usize]) -> Self {
        let n = indices.len();
        let order = canonical_subsets(n);
        let values: Vec<f64> = order
            .par_iter()
            .map(|&mask| {
                let sub: Vec<usize> = (0..n)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| indices[b])
                    .collect();
                marginal_entropy(table, &sub)
            })
            .collect();
        let mut entropies = vec![0.0; 1 << n];
        for (&mask, h) in order.iter().zip(values) {
            entropies[mask as usize] = h;
        }
        Self {
            order,
            entropies,
            n,
        }
    }

    fn full(&self) -> u32 {
        (1u32 << self.n) - 1
    }

    fn entropy(&self, mask: u32) -> f64 {
        self.entropies[mask as usize]
    }

    fn transmission(&self, mask: u32) -> f64 {
        let mut acc = CompensatedSum::new();
        for &sub in self.order.iter().filter(|&&s| s & !mask == 0) {
            acc.add(parity_sign(sub.count_ones() + 1) * self.entropy(sub));
        }
        acc.value()
    }

    fn mutual_redundancy(&self) -> f64 {
        let n = self.n as u32;
        parity_sign(n + 1) * self.transmission(self.full())
    }

    fn balance(&self) -> RedundancyBalance {
        let full = self.full();
        let mut left = CompensatedSum::new();
        left.add(self.entropy(full));
        for b in 0..self.n {
            left.add(-self.entropy(1 << b));
        }
        let mut right = CompensatedSum::new();
        for &mask in &self.order {
            let k = mask.count_ones();
            if k >= 2 && (k as usize) < self.n {
                right.add(parity_sign(k) * self.transmission(mask));
            }
        }
        RedundancyBalance {
            left_bracket: left.value(),
            right_bracket: right.value(),
        }
    }
}

fn nonempty(table: &ContingencyTable) -> Result<()> {
    if table.total_mass().is_zero() {
        Err(Error::EmptyTable)
    } else {
        Ok(())
    }
}

fn resolve_min(table: &ContingencyTable, subset: &SubsetMask, min: usize) -> Result<Vec<usize>> {
    nonempty(table)?;
    let idx = subset.resolve(table.schema())?;
    if idx.len() < min {
        return Err(Error::InvalidSubset(format!(
            "need at least {min} dimensions, got {}",
            idx.len()
        )));
    }
    Ok(idx)
}

/// Shannon entropy of one dimension's marginal.
pub fn entropy(table: &ContingencyTable, dim: &str) -> Result<f64> {
    nonempty(table)?;
    let d = table.schema().index_of(dim)?;
    Ok(marginal_entropy(table, &[d]))
}

/// Entropy of the marginal over `subset`.
pub fn joint_entropy(table: &ContingencyTable, subset: &SubsetMask) -> Result<f64> {
    let idx = resolve_min(table, subset, 1)?;
    Ok(marginal_entropy(table, &idx))
}

/// Multivariate transmission (co-information) of the subset. Nonnegative
/// for pairs, either sign for three or more dimensions.
pub fn transmission(table: &ContingencyTable, subset: &SubsetMask) -> Result<f64> {
    let idx = resolve_min(table, subset, 2)?;
    let lattice = EntropyLattice::compute(table, &idx);
    Ok(lattice.transmission(lattice.full()))
}

/// `Y12 = H1 + H2 + T12`, the information of a pair counting the overlap twice.
pub fn y_information(table: &ContingencyTable, pair: &SubsetMask) -> Result<f64> {
    let idx = resolve_min(table, pair, 2)?;
    if idx.len() != 2 {
        return Err(Error::InvalidSubset(format!(
            "Y information needs exactly 2 dimensions, got {}",
            idx.len()
        )));
    }
    let lattice = EntropyLattice::compute(table, &idx);
    Ok(compensated_sum([
        lattice.entropy(0b01),
        lattice.entropy(0b10),
        lattice.transmission(0b11),
    ]))
}

/// `R_n = (-1)^(1+n) T`, with `n` the subset size. For pairs this is `-T12`.
pub fn mutual_redundancy(table: &ContingencyTable, subset: &SubsetMask) -> Result<f64> {
    let idx = resolve_min(table, subset, 2)?;
    Ok(EntropyLattice::compute(table, &idx).mutual_redundancy())
}

/// Splits `R_n` into its left (joint minus marginal entropies) and right
/// (alternating sum of pair, triple, ... transmissions up to order n-1) brackets.
pub fn redundancy_balance(table: &ContingencyTable, subset: &SubsetMask) -> Result<RedundancyBalance> {
    let idx = resolve_min(table, subset, 2)?;
    Ok(EntropyLattice::compute(table, &idx).balance())
}

/// `log2` of the category count of one dimension under `mode`.
pub fn max_entropy(table: &ContingencyTable, dim: &str, mode: MaxEntropyMode) -> Result<f64> {
    let d = table.schema().index_of(dim)?;
    let count = match mode {
        MaxEntropyMode::Declared => table.schema().dims()[d].declared_cardinality.ok_or_else(|| {
            Error::Validation(format!("dimension `{dim}` has no declared cardinality"))
        })?,
        MaxEntropyMode::Observed | MaxEntropyMode::Cumulative => table.support_size(d),
    };
    Ok((count as f64).log2())
}

/// `(H_max - H_obs) / H_max` from precomputed values, clamped to `[0, 1]`.
pub fn redundancy_ratio(h_obs: f64, h_max: f64, what: &str) -> Result<f64> {
    if h_max <= 0.0 {
        return Err(Error::UndefinedRedundancy(what.to_string()));
    }
    Ok(((h_max - h_obs) / h_max).clamp(0.0, 1.0))
}

/// Shannon redundancy of one dimension: the unrealized share of its option space.
pub fn shannon_redundancy(table: &ContingencyTable, dim: &str, mode: MaxEntropyMode) -> Result<f64> {
    let h_max = max_entropy(table, dim, mode)?;
    let h_obs = entropy(table, dim)?;
    redundancy_ratio(h_obs, h_max, dim)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureOptions {
    pub max_mode: MaxEntropyMode,
    pub epsilon: f64,
    pub unit: UnitScale,
    /// Additive smoothing constant; `None` keeps raw frequencies.
    pub smoothing: Option<f64>,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            max_mode: MaxEntropyMode::Observed,
            epsilon: DEFAULT_EPSILON,
            unit: UnitScale::Bits,
            smoothing: None,
        }
    }
}

/// Every measure for one table and one subset of its dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoReport {
    pub dims: Vec<String>,
    pub total_mass: f64,
    pub cell_count: usize,
    /// Per-dimension entropies, aligned with `dims`.
    pub entropies: Vec<f64>,
    /// `H_V` for every subset with at least two dimensions, in canonical order.
    pub joint_entropies: Vec<(Vec<String>, f64)>,
    /// `T_V` for the same subsets.
    pub transmissions: Vec<(Vec<String>, f64)>,
    pub mutual_redundancy: f64,
    pub left_bracket: f64,
    pub right_bracket: f64,
    pub max_entropies: Vec<f64>,
    pub shannon_redundancy: Vec<f64>,
    pub max_mode: MaxEntropyMode,
    pub verdict: SynergyVerdict,
    pub epsilon: f64,
    pub unit: UnitScale,
    pub flags: Vec<String>,
}

pub const FLAG_NEGATIVE_RIGHT_BRACKET: &str = "negative_right_bracket";

impl InfoReport {
    pub fn compute(table: &ContingencyTable, subset: &SubsetMask, options: &MeasureOptions) -> Result<Self> {
        let smoothed;
        let table = match options.smoothing {
            Some(alpha) => {
                smoothed = table.smoothed(alpha)?;
                &smoothed
            }
            None => table,
        };
        let idx = resolve_min(table, subset, 2)?;
        let names: Vec<String> = idx
            .iter()
            .map(|&i| table.schema().dims()[i].name.clone())
            .collect();
        let lattice = EntropyLattice::compute(table, &idx);
        let subset_names = |mask: u32| -> Vec<String> {
            (0..idx.len())
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| names[b].clone())
                .collect()
        };

        let entropies: Vec<f64> = (0..idx.len()).map(|b| lattice.entropy(1 << b)).collect();
        let higher: Vec<u32> = lattice
            .order
            .iter()
            .copied()
            .filter(|m| m.count_ones() >= 2)
            .collect();
        let joint_entropies = higher
            .iter()
            .map(|&m| (subset_names(m), lattice.entropy(m)))
            .collect();
        let transmissions = higher
            .iter()
            .map(|&m| (subset_names(m), lattice.transmission(m)))
            .collect();

        let mut max_entropies = Vec::with_capacity(names.len());
        let mut shannon = Vec::with_capacity(names.len());
        for (name, h) in names.iter().zip(&entropies) {
            let h_max = max_entropy(table, name, options.max_mode)?;
            shannon.push(redundancy_ratio(*h, h_max, name)?);
            max_entropies.push(h_max);
        }

        let r = lattice.mutual_redundancy();
        let balance = lattice.balance();
        let mut report = Self {
            dims: names,
            total_mass: table.total(),
            cell_count: table.cell_count(),
            entropies,
            joint_entropies,
            transmissions,
            mutual_redundancy: r,
            left_bracket: balance.left_bracket,
            right_bracket: balance.right_bracket,
            max_entropies,
            shannon_redundancy: shannon,
            max_mode: options.max_mode,
            verdict: SynergyVerdict::classify(r, options.epsilon),
            epsilon: options.epsilon,
            unit: options.unit,
            flags: Vec::new(),
        };
        report.set_flags();
        Ok(report)
    }

    pub(crate) fn set_flags(&mut self) {
        self.flags.clear();
        if self.right_bracket < -self.epsilon {
            self.flags.push(FLAG_NEGATIVE_RIGHT_BRACKET.to_string());
        }
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn entropy_of(&self, dim: &str) -> Option<f64> {
        self.dims.iter().position(|d| d == dim).map(|i| self.entropies[i])
    }

    fn lookup(list: &[(Vec<String>, f64)], subset: &[&str]) -> Option<f64> {
        list.iter()
            .find(|(names, _)| {
                names.len() == subset.len() && subset.iter().all(|s| names.iter().any(|n| n == s))
            })
            .map(|(_, v)| *v)
    }

    pub fn joint_entropy_of(&self, subset: &[&str]) -> Option<f64> {
        Self::lookup(&self.joint_entropies, subset)
    }

    pub fn transmission_of(&self, subset: &[&str]) -> Option<f64> {
        Self::lookup(&self.transmissions, subset)
    }
}

#[derive(Serialize)]
struct DimBits<'a> {
    dim: &'a str,
    bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mbits: Option<f64>,
}

#[derive(Serialize)]
struct SubsetBits<'a> {
    subset: &'a [String],
    bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mbits: Option<f64>,
}

#[derive(Serialize)]
struct DimRatio<'a> {
    dim: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct ReportWire<'a> {
    unit: UnitScale,
    dims: &'a [String],
    n: usize,
    total_mass: f64,
    cell_count: usize,
    max_mode: MaxEntropyMode,
    epsilon: f64,
    entropies: Vec<DimBits<'a>>,
    joint_entropies: Vec<SubsetBits<'a>>,
    transmissions: Vec<SubsetBits<'a>>,
    left_bracket: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    left_bracket_mbits: Option<f64>,
    right_bracket: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    right_bracket_mbits: Option<f64>,
    #[serde(rename = "R_n")]
    r_n: f64,
    #[serde(rename = "R_n_mbits", skip_serializing_if = "Option::is_none")]
    r_n_mbits: Option<f64>,
    max_entropies: Vec<DimBits<'a>>,
    shannon_redundancy: Vec<DimRatio<'a>>,
    verdict: SynergyVerdict,
    flags: &'a [String],
}

fn millibits(unit: UnitScale, v: f64) -> Option<f64> {
    (unit == UnitScale::Millibits).then_some(v * 1000.0)
}

fn dim_bits<'a>(dims: &'a [String], values: &[f64], unit: UnitScale) -> Vec<DimBits<'a>> {
    dims.iter()
        .zip(values)
        .map(|(d, &v)| DimBits {
            dim: d,
            bits: v,
            mbits: millibits(unit, v),
        })
        .collect()
}

fn subset_bits(list: &[(Vec<String>, f64)], unit: UnitScale) -> Vec<SubsetBits<'_>> {
    list.iter()
        .map(|(s, v)| SubsetBits {
            subset: s,
            bits: *v,
            mbits: millibits(unit, *v),
        })
        .collect()
}

/// Bits are always present; with the millibit unit every bit-valued field
/// gains an `mbits` sibling.
impl Serialize for InfoReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mb = |v: f64| millibits(self.unit, v);
        let unit = self.unit;
        let per_dim = |values| dim_bits(&self.dims, values, unit);
        ReportWire {
            unit: self.unit,
            dims: &self.dims,
            n: self.n(),
            total_mass: self.total_mass,
            cell_count: self.cell_count,
            max_mode: self.max_mode,
            epsilon: self.epsilon,
            entropies: per_dim(&self.entropies),
            joint_entropies: subset_bits(&self.joint_entropies, unit),
            transmissions: subset_bits(&self.transmissions, unit),
            left_bracket: self.left_bracket,
            left_bracket_mbits: mb(self.left_bracket),
            right_bracket: self.right_bracket,
            right_bracket_mbits: mb(self.right_bracket),
            r_n: self.mutual_redundancy,
            r_n_mbits: mb(self.mutual_redundancy),
            max_entropies: per_dim(&self.max_entropies),
            shannon_redundancy: self
                .dims
                .iter()
                .zip(&self.shannon_redundancy)
                .map(|(d, &value)| DimRatio { dim: d, value })
                .collect(),
            verdict: self.verdict,
            flags: &self.flags,
        }
        .serialize(serializer)
    }
}
