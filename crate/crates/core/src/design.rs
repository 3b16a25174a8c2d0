//! Randomized assignment mechanisms.
//!
//! A [`Design`] is either a completely randomized design (CRD: `n_treated` of
//! `n_units` units are treated) or a randomized block design (RBD: block `b`
//! holds `size_b` consecutive units of which `treated_b` are treated). A CRD is
//! stored as a single block, so both share one code path.
//!
//! Units of block `b` occupy the contiguous index range that follows block
//! `b - 1`. Callers with interleaved block labels reorder their rows first
//! (the CSV loader does this).
//!
//! Enumeration order is colexicographic in the treated-index set within a
//! block; across blocks the first block varies fastest. Global rank `r`
//! decomposes in mixed radix with block 0 as the least significant digit.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One block of a randomized block design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub size: usize,
    pub treated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Crd,
    Rbd,
}

/// Assignment mechanism with exact enumeration and seeded sampling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DesignSpec", into = "DesignSpec")]
pub struct Design {
    kind: Kind,
    blocks: Vec<Block>,
}

/// Serialized form of a [`Design`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignSpec {
    Crd { n_units: usize, n_treated: usize },
    Rbd { blocks: Vec<Block> },
}

impl TryFrom<DesignSpec> for Design {
    type Error = Error;

    fn try_from(spec: DesignSpec) -> Result<Self> {
        match spec {
            DesignSpec::Crd { n_units, n_treated } => Design::crd(n_units, n_treated),
            DesignSpec::Rbd { blocks } => Design::rbd(blocks),
        }
    }
}

impl From<Design> for DesignSpec {
    fn from(design: Design) -> Self {
        match design.kind {
            Kind::Crd => DesignSpec::Crd {
                n_units: design.blocks[0].size,
                n_treated: design.blocks[0].treated,
            },
            Kind::Rbd => DesignSpec::Rbd {
                blocks: design.blocks,
            },
        }
    }
}

impl Design {
    pub fn crd(n_units: usize, n_treated: usize) -> Result<Self> {
        if n_treated == 0 || n_treated >= n_units {
            return Err(Error::InvalidDesign(format!(
                "CRD needs 0 < n_treated < n_units, got n_units={n_units}, n_treated={n_treated}"
            )));
        }
        Ok(Self {
            kind: Kind::Crd,
            blocks: vec![Block {
                size: n_units,
                treated: n_treated,
            }],
        })
    }

    pub fn rbd(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidDesign("RBD needs at least one block".into()));
        }
        for (b, block) in blocks.iter().enumerate() {
            if block.treated == 0 || block.treated >= block.size {
                return Err(Error::InvalidDesign(format!(
                    "block {b} needs 0 < treated < size, got size={}, treated={}",
                    block.size, block.treated
                )));
            }
        }
        Ok(Self {
            kind: Kind::Rbd,
            blocks,
        })
    }

    /// `n_blocks` blocks of `block_size` units each, half of them treated.
    /// `n_blocks == 1` gives the equivalent CRD.
    pub fn balanced(n_blocks: usize, block_size: usize) -> Result<Self> {
        if block_size % 2 != 0 {
            return Err(Error::InvalidDesign(format!(
                "balanced blocks need an even block size, got {block_size}"
            )));
        }
        if n_blocks == 1 {
            Self::crd(block_size, block_size / 2)
        } else {
            Self::rbd(vec![
                Block {
                    size: block_size,
                    treated: block_size / 2,
                };
                n_blocks
            ])
        }
    }

    pub fn is_crd(&self) -> bool {
        self.kind == Kind::Crd
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn n_units(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn n_treated(&self) -> usize {
        self.blocks.iter().map(|b| b.treated).sum()
    }

    /// Start index of each block.
    fn offsets(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, b| {
                let start = *acc;
                *acc += b.size;
                Some(start)
            })
            .collect()
    }

    /// Exact size of the assignment space.
    pub fn total_assignments(&self) -> BigUint {
        self.blocks
            .iter()
            .map(|b| binomial_big(b.size, b.treated))
            .product()
    }

    pub fn total_assignments_u64(&self) -> Option<u64> {
        self.total_assignments().to_u64()
    }

    /// `true` when `w` has the right length and per-block treated counts.
    pub fn admits(&self, w: &Assignment) -> bool {
        if w.len() != self.n_units() {
            return false;
        }
        self.blocks
            .iter()
            .zip(self.offsets())
            .all(|(b, start)| w.0[start..start + b.size].iter().filter(|&&x| x == 1).count() == b.treated)
    }

    pub fn assignment_probability(&self, w: &Assignment) -> Result<f64> {
        self.check_len(w)?;
        if !self.admits(w) {
            return Ok(0.0);
        }
        Ok(1.0 / self.total_assignments().to_f64().unwrap_or(f64::INFINITY))
    }

    /// Probability as an exact fraction `(numerator, denominator)`.
    pub fn assignment_probability_exact(&self, w: &Assignment) -> Result<(BigUint, BigUint)> {
        self.check_len(w)?;
        let numer = if self.admits(w) {
            BigUint::one()
        } else {
            BigUint::zero()
        };
        Ok((numer, self.total_assignments()))
    }

    fn check_len(&self, w: &Assignment) -> Result<()> {
        if w.len() != self.n_units() {
            return Err(Error::LengthMismatch {
                expected: self.n_units(),
                found: w.len(),
            });
        }
        Ok(())
    }

    /// All assignments in the documented order. Fails when the space is larger
    /// than `cap`.
    pub fn enumerate(&self, cap: u64) -> Result<Enumeration> {
        let total = self.total_assignments();
        if total > BigUint::from(cap) {
            return Err(Error::CapExceeded {
                total: total.to_string(),
                cap,
            });
        }
        Ok(Enumeration::new(self))
    }

    /// Colexicographic rank of `w` (mixed radix across blocks).
    pub fn rank(&self, w: &Assignment) -> Result<BigUint> {
        self.check_len(w)?;
        if !self.admits(w) {
            return Err(Error::InvalidArgument(
                "assignment does not satisfy the design".into(),
            ));
        }
        let mut rank = BigUint::zero();
        let mut radix = BigUint::one();
        for (b, start) in self.blocks.iter().zip(self.offsets()) {
            let mut block_rank = BigUint::zero();
            let mut i = 0;
            for (c, &x) in w.0[start..start + b.size].iter().enumerate() {
                if x == 1 {
                    i += 1;
                    block_rank += binomial_big(c, i);
                }
            }
            rank += &radix * block_rank;
            radix *= binomial_big(b.size, b.treated);
        }
        Ok(rank)
    }

    /// Prepared unranking tables for repeated sampling or random access.
    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }

    /// `k` uniform draws with replacement. Draw `j` uses random stream `j`
    /// of `seed` only.
    pub fn sample(&self, k: usize, seed: u64) -> Vec<Assignment> {
        let sampler = self.sampler();
        (0..k).map(|j| sampler.draw(seed, j as u64)).collect()
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::Crd => write!(f, "crd:{}:{}", self.blocks[0].size, self.blocks[0].treated),
            Kind::Rbd => {
                write!(f, "rbd:")?;
                for (i, b) in self.blocks.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}/{}", b.size, b.treated)?;
                }
                Ok(())
            }
        }
    }
}

impl std::str::FromStr for Design {
    type Err = Error;

    /// Parses the `Display` form: `crd:N:N1` or `rbd:n/t,n/t,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDesign(format!("cannot parse design `{s}`; expected crd:N:N1 or rbd:n/t,..."));
        let num = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
        let (kind, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind.to_ascii_lowercase().as_str() {
            "crd" => {
                let (n, t) = rest.split_once(':').ok_or_else(bad)?;
                Design::crd(num(n)?, num(t)?)
            }
            "rbd" => {
                let blocks = rest
                    .split(',')
                    .map(|b| {
                        let (n, t) = b.split_once('/').ok_or_else(bad)?;
                        Ok(Block {
                            size: num(n)?,
                            treated: num(t)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Design::rbd(blocks)
            }
            _ => Err(bad()),
        }
    }
}

/// Binary treatment vector (1 = treatment).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(Vec<u8>);

impl Assignment {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(bad) = bits.iter().find(|&&x| x > 1) {
            return Err(Error::InvalidData(format!(
                "assignment entries must be 0 or 1, found {bad}"
            )));
        }
        Ok(Self(bits))
    }

    pub fn from_treated(n: usize, treated: &[usize]) -> Self {
        let mut bits = vec![0u8; n];
        for &i in treated {
            bits[i] = 1;
        }
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn is_treated(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn n_treated(&self) -> usize {
        self.0.iter().filter(|&&x| x == 1).count()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn treated_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &x)| x == 1).map(|(i, _)| i)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in &self.0 {
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Streaming enumeration of a design's assignment space.
#[derive(Debug, Clone)]
pub struct Enumeration {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    subsets: Vec<Vec<usize>>,
    done: bool,
}

impl Enumeration {
    fn new(design: &Design) -> Self {
        Self {
            blocks: design.blocks.clone(),
            offsets: design.offsets(),
            subsets: design.blocks.iter().map(|b| (0..b.treated).collect()).collect(),
            done: false,
        }
    }

    fn current(&self) -> Assignment {
        let n = self.blocks.iter().map(|b| b.size).sum();
        let mut bits = vec![0u8; n];
        for (subset, &start) in self.subsets.iter().zip(&self.offsets) {
            for &c in subset {
                bits[start + c] = 1;
            }
        }
        Assignment(bits)
    }

    fn advance(&mut self) {
        for (subset, block) in self.subsets.iter_mut().zip(&self.blocks) {
            if colex_successor(subset, block.size) {
                return;
            }
            // this digit wrapped; carry into the next block
            for (i, c) in subset.iter_mut().enumerate() {
                *c = i;
            }
        }
        self.done = true;
    }
}

impl Iterator for Enumeration {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.done {
            return None;
        }
        let out = self.current();
        self.advance();
        Some(out)
    }
}

/// Advances a sorted k-subset of `0..n` to its colex successor. Returns
/// `false` (leaving the subset untouched) if it was the last one.
fn colex_successor(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    for j in 0..k {
        let limit = if j + 1 < k { subset[j + 1] } else { n };
        if subset[j] + 1 < limit {
            subset[j] += 1;
            for (i, c) in subset.iter_mut().take(j).enumerate() {
                *c = i;
            }
            return true;
        }
    }
    false
}

pub fn binomial_big(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

#[derive(Debug, Clone)]
enum RankTable {
    Small(Vec<Vec<u128>>),
    Big(Vec<Vec<BigUint>>),
}

#[derive(Debug, Clone)]
struct BlockSampler {
    size: usize,
    treated: usize,
    start: usize,
    table: RankTable,
}

impl BlockSampler {
    fn new(block: Block, start: usize) -> Self {
        // pascal[c][i] = C(c, i) for c < size, i <= treated
        let small = (|| {
            let mut rows: Vec<Vec<u128>> = Vec::with_capacity(block.size + 1);
            for c in 0..=block.size {
                let mut row = vec![0u128; block.treated + 1];
                row[0] = 1;
                for i in 1..=block.treated.min(c) {
                    let prev = &rows[c - 1];
                    row[i] = prev[i - 1].checked_add(prev[i])?;
                }
                rows.push(row);
            }
            Some(rows)
        })();
        let table = match small {
            Some(rows) => RankTable::Small(rows),
            None => RankTable::Big(
                (0..=block.size)
                    .map(|c| (0..=block.treated).map(|i| binomial_big(c, i)).collect())
                    .collect(),
            ),
        };
        Self {
            size: block.size,
            treated: block.treated,
            start,
            table,
        }
    }

    fn draw_into<R: RngCore>(&self, rng: &mut R, bits: &mut [u8]) {
        match &self.table {
            RankTable::Small(rows) => {
                let mut r = rng::below_u128(rng, rows[self.size][self.treated]);
                let mut c = self.size;
                for i in (1..=self.treated).rev() {
                    c -= 1;
                    while rows[c][i] > r {
                        c -= 1;
                    }
                    r -= rows[c][i];
                    bits[self.start + c] = 1;
                }
            }
            RankTable::Big(rows) => {
                let mut r = rng::below_big(rng, &rows[self.size][self.treated]);
                let mut c = self.size;
                for i in (1..=self.treated).rev() {
                    c -= 1;
                    while rows[c][i] > r {
                        c -= 1;
                    }
                    r -= &rows[c][i];
                    bits[self.start + c] = 1;
                }
            }
        }
    }
}

/// Uniform sampler over a design's assignments by unranking.
#[derive(Debug, Clone)]
pub struct Sampler {
    n_units: usize,
    blocks: Vec<BlockSampler>,
}

impl Sampler {
    fn new(design: &Design) -> Self {
        Self {
            n_units: design.n_units(),
            blocks: design
                .blocks
                .iter()
                .zip(design.offsets())
                .map(|(&b, start)| BlockSampler::new(b, start))
                .collect(),
        }
    }

    /// Draw number `index` under `seed`.
    pub fn draw(&self, seed: u64, index: u64) -> Assignment {
        let mut rng = rng::stream(seed, index);
        self.draw_with(&mut rng)
    }

    pub fn draw_with<R: RngCore>(&self, rng: &mut R) -> Assignment {
        let mut bits = vec![0u8; self.n_units];
        for block in &self.blocks {
            block.draw_into(rng, &mut bits);
        }
        Assignment(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for text in ["crd:10:5", "rbd:8/4,8/4", "rbd:6/2,4/1,2/1"] {
            let d: Design = text.parse().unwrap();
            assert_eq!(d.to_string(), text);
        }
        assert_eq!("CRD: 10 : 5".parse::<Design>().unwrap(), Design::crd(10, 5).unwrap());
        for bad in ["crd:10", "crd:4:5", "rbd:8-4", "xyz:1:1", "rbd:"] {
            assert!(bad.parse::<Design>().is_err(), "{bad}");
        }
    }
    use std::collections::HashMap;

    fn crd(n: usize, k: usize) -> Design {
        Design::crd(n, k).unwrap()
    }

    #[test]
    fn totals() {
        assert_eq!(crd(10, 5).total_assignments(), BigUint::from(252u32));
        assert_eq!(crd(2, 1).total_assignments(), BigUint::from(2u32));
        let rbd = Design::rbd(vec![Block { size: 8, treated: 4 }; 2]).unwrap();
        assert_eq!(rbd.total_assignments(), BigUint::from(70u32 * 70));
        // C(100, 50) ~ 1.01e29 must not overflow
        assert_eq!(
            crd(100, 50).total_assignments().to_string(),
            "100891344545564193334812497256"
        );
    }

    #[test]
    fn invalid_designs_are_rejected() {
        assert!(Design::crd(4, 0).is_err());
        assert!(Design::crd(4, 4).is_err());
        assert!(Design::rbd(vec![]).is_err());
        assert!(Design::rbd(vec![Block { size: 2, treated: 2 }]).is_err());
        assert!(Design::balanced(2, 5).is_err());
    }

    #[test]
    fn crd_4_2_enumerates_in_colex_order() {
        let all: Vec<String> = crd(4, 2).enumerate(100).unwrap().map(|w| w.to_string()).collect();
        assert_eq!(all, ["1100", "1010", "0110", "1001", "0101", "0011"]);
    }

    #[test]
    fn enumeration_counts_match_totals() {
        assert_eq!(crd(10, 5).enumerate(1000).unwrap().count(), 252);
        let rbd = Design::rbd(vec![Block { size: 2, treated: 1 }; 2]).unwrap();
        let all: Vec<Assignment> = rbd.enumerate(10).unwrap().collect();
        assert_eq!(all.len(), 4);
        // block 0 varies fastest
        assert_eq!(all[0].to_string(), "1010");
        assert_eq!(all[1].to_string(), "0110");
        assert!(all.iter().all(|w| rbd.admits(w)));
    }

    #[test]
    fn cap_is_enforced() {
        let err = crd(30, 15).enumerate(2_000_000).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn ranks_follow_enumeration_order() {
        let design = Design::rbd(vec![
            Block { size: 4, treated: 2 },
            Block { size: 3, treated: 1 },
        ])
        .unwrap();
        for (r, w) in design.enumerate(100).unwrap().enumerate() {
            assert_eq!(design.rank(&w).unwrap(), BigUint::from(r));
        }
    }

    #[test]
    fn probabilities() {
        let d = crd(10, 5);
        let w = d.enumerate(1000).unwrap().nth(17).unwrap();
        assert_eq!(d.assignment_probability(&w).unwrap(), 1.0 / 252.0);
        let bad = Assignment::new(vec![1, 1, 1, 0]).unwrap();
        assert_eq!(crd(4, 2).assignment_probability(&bad).unwrap(), 0.0);
        assert!(matches!(
            crd(4, 2).assignment_probability(&Assignment::new(vec![1, 0]).unwrap()),
            Err(Error::LengthMismatch { .. })
        ));
        let rbd = Design::rbd(vec![Block { size: 2, treated: 1 }; 2]).unwrap();
        let w = Assignment::new(vec![0, 1, 1, 0]).unwrap();
        assert_eq!(rbd.assignment_probability(&w).unwrap(), 0.25);
        let (num, den) = rbd.assignment_probability_exact(&w).unwrap();
        assert_eq!((num, den), (BigUint::one(), BigUint::from(4u32)));
    }

    #[test]
    fn probabilities_sum_to_one() {
        for d in [
            crd(10, 5),
            crd(7, 3),
            Design::rbd(vec![Block { size: 4, treated: 2 }, Block { size: 3, treated: 1 }]).unwrap(),
        ] {
            let s: f64 = d
                .enumerate(10_000)
                .unwrap()
                .map(|w| d.assignment_probability(&w).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_respect_constraints() {
        let d = crd(10, 5);
        let draws = d.sample(3, 7);
        assert_eq!(draws.len(), 3);
        assert!(draws.iter().all(|w| w.n_treated() == 5));
        let single = Design::rbd(vec![Block { size: 4, treated: 2 }]).unwrap();
        assert_eq!(single.sample(1, 123)[0].n_treated(), 2);
    }

    #[test]
    fn sampling_is_reproducible_and_order_free() {
        let d = crd(20, 9);
        let a = d.sample(50, 42);
        assert_eq!(a, d.sample(50, 42));
        let sampler = d.sampler();
        for j in [49u64, 3, 17] {
            assert_eq!(sampler.draw(42, j), a[j as usize]);
        }
    }

    #[test]
    fn crd_2_1_frequency() {
        let draws = crd(2, 1).sample(10_000, 2024);
        let ones = draws.iter().filter(|w| w.is_treated(0)).count() as f64 / 10_000.0;
        assert!((ones - 0.5).abs() < 0.02, "{ones}");
    }

    #[test]
    fn sampling_is_uniform_chi_square() {
        // 6 cells, 60_000 draws; 99.9% critical value of chi2(5) is 20.5
        let d = crd(4, 2);
        let mut counts: HashMap<Assignment, u32> = HashMap::new();
        for w in d.sample(60_000, 11) {
            *counts.entry(w).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - 10_000.0).powi(2) / 10_000.0)
            .sum();
        assert!(chi2 < 20.5, "{chi2}");
    }

    #[test]
    fn big_spaces_sample_via_bigint() {
        let d = crd(140, 70);
        assert!(d.total_assignments().to_u128().is_none());
        let w = d.sample(2, 5);
        assert!(w.iter().all(|w| w.n_treated() == 70));
        assert_ne!(w[0], w[1]);
    }

    #[test]
    fn design_json_round_trip() {
        let d = Design::rbd(vec![Block { size: 8, treated: 4 }; 2]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Design>(&s).unwrap(), d);
        let bad = r#"{"crd":{"n_units":3,"n_treated":3}}"#;
        assert!(serde_json::from_str::<Design>(bad).is_err());
    }
}
