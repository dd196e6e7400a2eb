//! Bid designs and their construction from pilot open-ended WTP answers.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{CvmError, Result};
use crate::model::BidPair;

/// Bid levels are rounded to this many KRW.
pub const BID_ROUNDING: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<BidPair>", into = "Vec<BidPair>")]
pub struct BidDesign {
    pairs: Vec<BidPair>,
}

impl BidDesign {
    pub fn new(pairs: Vec<BidPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(CvmError::InvalidArgument("bid design has no pairs".into()));
        }
        if pairs.windows(2).any(|w| w[1].lower() <= w[0].lower()) {
            return Err(CvmError::InvalidArgument(
                "bid pairs must be strictly increasing by lower bid".into(),
            ));
        }
        Ok(BidDesign { pairs })
    }

    /// The ten pairs fielded in the 2021 UFP monitoring survey.
    pub fn published() -> Self {
        const PAIRS: [(u32, u32); 10] = [
            (1000, 2000),
            (2000, 3000),
            (3000, 4000),
            (4000, 5000),
            (5000, 7000),
            (7000, 9000),
            (9000, 11000),
            (11000, 14000),
            (14000, 17000),
            (17000, 20000),
        ];
        let pairs = PAIRS.iter().map(|&(l, u)| BidPair::new(l, u).unwrap()).collect();
        BidDesign::new(pairs).unwrap()
    }

    pub fn pairs(&self) -> &[BidPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lower,upper\n");
        for p in &self.pairs {
            s.push_str(&format!("{},{}\n", p.lower(), p.upper()));
        }
        s
    }
}

impl TryFrom<Vec<BidPair>> for BidDesign {
    type Error = CvmError;
    fn try_from(v: Vec<BidPair>) -> Result<Self> {
        BidDesign::new(v)
    }
}

impl From<BidDesign> for Vec<BidPair> {
    fn from(d: BidDesign) -> Self {
        d.pairs
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Builds `n_pairs` consecutive bid pairs from pilot WTP answers.
///
/// The lowest and highest `trim` fractions are dropped; `n_pairs + 1` levels
/// are then placed at equally spaced quantiles of what remains, rounded to
/// KRW 1,000, and consecutive levels are paired.
pub fn design_bids(pilot_wtp: &[f64], n_pairs: usize, trim: f64) -> Result<BidDesign> {
    if n_pairs == 0 {
        return Err(CvmError::InvalidArgument("need at least one bid pair".into()));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(CvmError::InvalidArgument(format!(
            "trim fraction {trim} outside [0, 0.5)"
        )));
    }
    if pilot_wtp.len() < 20 * n_pairs {
        return Err(CvmError::InvalidArgument(format!(
            "{} pilot answers is too few for {n_pairs} pairs (need {})",
            pilot_wtp.len(),
            20 * n_pairs
        )));
    }
    if pilot_wtp.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(CvmError::InvalidArgument(
            "pilot answers must be finite and non-negative".into(),
        ));
    }

    let mut sorted = pilot_wtp.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = (trim * sorted.len() as f64).floor() as usize;
    let trimmed = &sorted[cut..sorted.len() - cut];
    if trimmed.first() == trimmed.last() {
        return Err(CvmError::DegenerateData(
            "pilot answers are constant after trimming".into(),
        ));
    }

    let levels: Vec<u32> = (0..=n_pairs)
        .map(|k| {
            let q = quantile(trimmed, k as f64 / n_pairs as f64);
            let r = ((q / BID_ROUNDING).round() * BID_ROUNDING).max(BID_ROUNDING);
            r as u32
        })
        .collect();
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CvmError::DegenerateData(format!(
            "bid levels collide after rounding to KRW {BID_ROUNDING}: {levels:?}"
        )));
    }
    let pairs = levels
        .windows(2)
        .map(|w| BidPair::new(w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    BidDesign::new(pairs)
}

/// Reads a design written by [`BidDesign::to_csv`] (`lower,upper` header).
pub fn read_design<R: Read>(reader: R) -> Result<BidDesign> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CvmError::parse(1, None, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["lower", "upper"] {
        return Err(CvmError::parse(1, None, "expected header `lower,upper`"));
    }
    let mut pairs = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CvmError::parse(line, None, e.to_string()))?;
        let field = |j: usize, name: &str| -> Result<u32> {
            row.get(j)
                .unwrap_or("")
                .parse()
                .map_err(|_| CvmError::parse(line, Some(name), "expected a whole KRW amount"))
        };
        let pair = BidPair::new(field(0, "lower")?, field(1, "upper")?)
            .map_err(|e| CvmError::parse(line, None, e.to_string()))?;
        pairs.push(pair);
    }
    BidDesign::new(pairs)
}

/// Reads pilot WTP answers, one per line. A non-numeric first line is taken
/// as a header; only the first column is used.
pub fn read_pilot<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CvmError::parse(i + 1, None, e.to_string()))?;
        let cell = row.get(0).unwrap_or("");
        match cell.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(CvmError::parse(i + 1, None, format!("`{cell}` is not a number"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Analytic level k of a uniform [0, 21000] pilot trimmed 5% each side.
    fn uniform_level(k: usize) -> f64 {
        1050.0 + 1890.0 * k as f64
    }

    #[test]
    fn uniform_pilot_gives_quantile_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pilot: Vec<f64> = (0..100_000).map(|_| rng.random_range(0.0..21000.0)).collect();
        let d = design_bids(&pilot, 10, 0.05).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.pairs()[0], BidPair::new(1000, 3000).unwrap());
        assert_eq!(d.pairs()[1], BidPair::new(3000, 5000).unwrap());
        for (k, p) in d.pairs().iter().enumerate() {
            // rounding to 1,000 plus sampling error of the empirical quantile
            assert!((f64::from(p.lower()) - uniform_level(k)).abs() <= 600.0);
            assert!((f64::from(p.upper()) - uniform_level(k + 1)).abs() <= 600.0);
        }
    }

    #[test]
    fn constant_pilot_is_degenerate() {
        let pilot = vec![5000.0; 400];
        assert!(matches!(
            design_bids(&pilot, 10, 0.05),
            Err(CvmError::DegenerateData(_))
        ));
    }

    #[test]
    fn too_few_pilot_points() {
        let pilot: Vec<f64> = (0..199).map(f64::from).collect();
        assert!(design_bids(&pilot, 10, 0.05).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pilot: Vec<f64> = (0..455).map(|_| rng.random_range(0.0..30000.0)).collect();
        let a = design_bids(&pilot, 10, 0.05).unwrap();
        pilot.reverse();
        pilot.rotate_left(100);
        assert_eq!(a, design_bids(&pilot, 10, 0.05).unwrap());
    }

    #[test]
    fn published_design_is_valid() {
        let d = BidDesign::published();
        assert_eq!(d.len(), 10);
        assert_eq!(d.pairs()[9], BidPair::new(17000, 20000).unwrap());
        assert!(d.to_csv().starts_with("lower,upper\n1000,2000\n"));
    }

    #[test]
    fn pilot_reader_skips_header() {
        let v = read_pilot("wtp\n1000\n2500.5\n".as_bytes()).unwrap();
        assert_eq!(v, vec![1000.0, 2500.5]);
        assert!(read_pilot("1\nabc\n".as_bytes()).is_err());
    }

    #[test]
    fn design_csv_round_trip() {
        let d = BidDesign::published();
        assert_eq!(read_design(d.to_csv().as_bytes()).unwrap(), d);
        assert!(read_design("lower,upper\n2000,1000\n".as_bytes()).is_err());
        assert!(read_design("a,b\n1000,2000\n".as_bytes()).is_err());
        assert!(read_design("lower,upper\n".as_bytes()).is_err());
    }
}
