//! Statistics over subjective viewing scores: differential mean opinion
//! scores against the full-rate reference and Welch's t-test for deciding
//! whether two viewing conditions are perceptually distinguishable.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A viewing condition presented to observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    /// Untouched 120 fps source, the reference.
    Ref120,
    /// Variable-rate rendition produced by the decision cascade.
    Vfr,
    /// Constant 60 fps rendition.
    F60,
    /// Constant 30 fps rendition.
    F30,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Ref120,
        Condition::Vfr,
        Condition::F60,
        Condition::F30,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Ref120 => "120fps",
            Condition::Vfr => "VFR",
            Condition::F60 => "60fps",
            Condition::F30 => "30fps",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                Error::DataFormat(format!(
                    "unknown condition '{s}' (expected 120fps, VFR, 60fps or 30fps)"
                ))
            })
    }
}

/// One observer's score for one rendition of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub observer: String,
    pub sequence: String,
    pub condition: Condition,
    pub score: f64,
}

/// All scores of a viewing session. One score per (observer, sequence,
/// condition) triple, on a 0 to 100 scale.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    records: Vec<ScoreRecord>,
}

impl ScoreTable {
    pub fn new() -> Self {
        ScoreTable::default()
    }

    pub fn push(
        &mut self,
        observer: &str,
        sequence: &str,
        condition: Condition,
        score: f64,
    ) -> Result<()> {
        if !(0.0..=100.0).contains(&score) {
            return Err(Error::DataFormat(format!(
                "score {score} for observer {observer} is outside 0..=100"
            )));
        }
        if self.score(observer, sequence, condition).is_some() {
            return Err(Error::DataFormat(format!(
                "duplicate score for observer {observer}, sequence {sequence}, condition {condition}"
            )));
        }
        self.records.push(ScoreRecord {
            observer: observer.to_string(),
            sequence: sequence.to_string(),
            condition,
            score,
        });
        Ok(())
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn sequences(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.sequence.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn observers(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.observer.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn score(&self, observer: &str, sequence: &str, condition: Condition) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.observer == observer && r.sequence == sequence && r.condition == condition)
            .map(|r| r.score)
    }

    /// All scores given to (sequence, condition), in observer name order.
    pub fn scores(&self, sequence: &str, condition: Condition) -> Vec<f64> {
        let mut rows: Vec<(&str, f64)> = self
            .records
            .iter()
            .filter(|r| r.sequence == sequence && r.condition == condition)
            .map(|r| (r.observer.as_str(), r.score))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        rows.into_iter().map(|(_, s)| s).collect()
    }

    /// Reads `observer,sequence,condition,score` rows.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        {
            let headers = reader.headers().map_err(|e| csv_error(path, e))?;
            let expected = ["observer", "sequence", "condition", "score"];
            if headers.iter().ne(expected) {
                return Err(Error::DataFormat(format!(
                    "{}: expected header observer,sequence,condition,score",
                    path.display()
                )));
            }
        }
        let mut table = ScoreTable::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| csv_error(path, e))?;
            if row.len() != 4 {
                return Err(Error::DataFormat(format!(
                    "{}: row {} has {} fields, expected 4",
                    path.display(),
                    i + 2,
                    row.len()
                )));
            }
            let condition: Condition = row[2].parse()?;
            let score: f64 = row[3].parse().map_err(|_| {
                Error::DataFormat(format!(
                    "{}: row {}: bad score '{}'",
                    path.display(),
                    i + 2,
                    &row[3]
                ))
            })?;
            table.push(&row[0], &row[1], condition, score)?;
        }
        Ok(table)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("observer,sequence,condition,score\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.observer, r.sequence, r.condition, r.score
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    if err.is_io_error() {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::DataFormat(format!("{}: {err}", path.display()))
    }
}

/// Differential mean opinion score with its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dmos {
    pub value: f64,
    /// Half-width of the 95% confidence interval (normal approximation).
    pub ci95: f64,
    /// Observers contributing a (reference, test) score pair.
    pub n: usize,
}

/// Scores a rendition against the 120 fps reference: 100 minus the mean
/// per-observer score drop. Identical scoring yields 100; the confidence
/// interval is 1.96 times the standard error of the per-observer drops.
pub fn dmos(table: &ScoreTable, sequence: &str, condition: Condition) -> Result<Dmos> {
    let observers: Vec<&str> = table
        .records()
        .iter()
        .filter(|r| {
            r.sequence == sequence && (r.condition == Condition::Ref120 || r.condition == condition)
        })
        .map(|r| r.observer.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if observers.is_empty() {
        return Err(Error::MissingCondition {
            sequence: sequence.to_string(),
            condition: condition.to_string(),
        });
    }
    let mut diffs = Vec::with_capacity(observers.len());
    for obs in observers {
        let lookup = |cond: Condition| {
            table
                .score(obs, sequence, cond)
                .ok_or_else(|| Error::MissingScore {
                    observer: obs.to_string(),
                    sequence: sequence.to_string(),
                    condition: cond.to_string(),
                })
        };
        diffs.push(lookup(Condition::Ref120)? - lookup(condition)?);
    }
    if diffs.len() < 2 {
        return Err(Error::UndersizedSample(diffs.len()));
    }
    let n = diffs.len();
    let m = mean(&diffs);
    let sd = sample_variance(&diffs, m).sqrt();
    Ok(Dmos {
        value: 100.0 - m,
        ci95: 1.96 * sd / (n as f64).sqrt(),
        n,
    })
}

/// [`dmos`] for one sequence and condition, used for tabular output.
#[derive(Debug, Clone, PartialEq)]
pub struct DmosRow {
    pub sequence: String,
    pub condition: Condition,
    pub dmos: Dmos,
}

/// Computes the score of every non-reference condition of every sequence.
pub fn dmos_table(table: &ScoreTable) -> Result<Vec<DmosRow>> {
    let mut rows = Vec::new();
    for sequence in table.sequences() {
        for condition in [Condition::Vfr, Condition::F60, Condition::F30] {
            rows.push(DmosRow {
                sequence: sequence.clone(),
                condition,
                dmos: dmos(table, &sequence, condition)?,
            });
        }
    }
    Ok(rows)
}

pub fn write_dmos_csv<P: AsRef<Path>>(path: P, rows: &[DmosRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("sequence,condition,dmos,ci95\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.4}\n",
            r.sequence, r.condition, r.dmos.value, r.dmos.ci95
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Welch's two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    /// Welch-Satterthwaite effective degrees of freedom.
    pub df: f64,
    /// Two-tailed p-value.
    pub p: f64,
    /// Rejection of the equal-means hypothesis at the 5% level.
    pub different: bool,
}

/// Unequal-variance t-test of `a` against `b`. Positive `t` means `a`
/// scored higher. When both samples are constant the test degenerates:
/// equal constants give p = 1, distinct constants p = 0.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::UndersizedSample(s.len()));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let equal = ma == mb;
        let t = if equal {
            0.0
        } else {
            f64::INFINITY.copysign(ma - mb)
        };
        return Ok(TTestResult {
            t,
            df: na + nb - 2.0,
            p: if equal { 1.0 } else { 0.0 },
            different: !equal,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = student_two_tailed_p(t, df);
    Ok(TTestResult {
        t,
        df,
        p,
        different: p < 0.05,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n - 1 denominator) variance; caller guarantees n >= 2.
fn sample_variance(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64
}

/// P(|T| > |t|) for Student's t with `df` degrees of freedom, through the
/// regularized incomplete beta function.
pub fn student_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Lanczos approximation (g = 7, 9 terms), accurate to about 1e-13.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// I_x(a, b) by the standard continued fraction (modified Lentz).
fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // the continued fraction converges fast only below the distribution mode
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-30;
    let clamp = |v: f64| if v.abs() < TINY { TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - (a + b) * x / (a + 1.0));
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        // even step
        let num = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        d = 1.0 / clamp(1.0 + num * d);
        c = clamp(1.0 + num / c);
        h *= d * c;
        // odd step
        let num = -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
        d = 1.0 / clamp(1.0 + num * d);
        c = clamp(1.0 + num / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// One cell of the pairwise comparison table: `test` scored against the
/// higher-rate `reference` condition.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCell {
    pub sequence: String,
    pub test: Condition,
    pub reference: Condition,
    pub result: TTestResult,
}

/// Lower-triangular pairs (test, reference), test always the lower rate.
const PAIRS: [(Condition, Condition); 6] = [
    (Condition::Vfr, Condition::Ref120),
    (Condition::F60, Condition::Ref120),
    (Condition::F60, Condition::Vfr),
    (Condition::F30, Condition::Ref120),
    (Condition::F30, Condition::Vfr),
    (Condition::F30, Condition::F60),
];

/// Tests every rendition of a sequence against every higher-rate rendition.
/// Positive `t` means the test condition scored higher than its reference.
pub fn pairwise_table(table: &ScoreTable, sequence: &str) -> Result<Vec<PairwiseCell>> {
    let samples: Vec<Vec<f64>> = Condition::ALL
        .iter()
        .map(|&c| table.scores(sequence, c))
        .collect();
    for (cond, s) in Condition::ALL.iter().zip(&samples) {
        if s.is_empty() {
            return Err(Error::MissingCondition {
                sequence: sequence.to_string(),
                condition: cond.to_string(),
            });
        }
    }
    let of = |c: Condition| &samples[Condition::ALL.iter().position(|&x| x == c).unwrap()];
    PAIRS
        .iter()
        .map(|&(test, reference)| {
            Ok(PairwiseCell {
                sequence: sequence.to_string(),
                test,
                reference,
                result: welch_t(of(test), of(reference))?,
            })
        })
        .collect()
}

pub fn write_pairwise_csv<P: AsRef<Path>>(path: P, cells: &[PairwiseCell]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("sequence,test,reference,t,df,p,verdict\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.6},{}\n",
            c.sequence,
            c.test,
            c.reference,
            c.result.t,
            c.result.df,
            c.result.p,
            if c.result.different { "different" } else { "same" }
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn table_from(rows: &[(&str, &str, Condition, f64)]) -> ScoreTable {
        let mut t = ScoreTable::new();
        for &(o, s, c, v) in rows {
            t.push(o, s, c, v).unwrap();
        }
        t
    }

    #[test]
    fn identical_scores_give_dmos_100_with_zero_interval() {
        let t = table_from(&[
            ("o1", "park", Condition::Ref120, 80.0),
            ("o1", "park", Condition::Vfr, 80.0),
            ("o2", "park", Condition::Ref120, 65.0),
            ("o2", "park", Condition::Vfr, 65.0),
        ]);
        let d = dmos(&t, "park", Condition::Vfr).unwrap();
        assert_eq!(d.value, 100.0);
        assert_eq!(d.ci95, 0.0);
        assert_eq!(d.n, 2);
    }

    #[test]
    fn dmos_matches_hand_computation() {
        // drops of 10 and 30: mean 20, sample sd sqrt(200)
        let t = table_from(&[
            ("o1", "park", Condition::F30, 70.0),
            ("o1", "park", Condition::Ref120, 80.0),
            ("o2", "park", Condition::F30, 60.0),
            ("o2", "park", Condition::Ref120, 90.0),
        ]);
        let d = dmos(&t, "park", Condition::F30).unwrap();
        assert_relative_eq!(d.value, 80.0);
        assert_relative_eq!(d.ci95, 19.6, max_relative = 1e-12);
    }

    #[test]
    fn dmos_is_invariant_under_constant_shift() {
        let base = [("o1", 90.0, 75.0), ("o2", 70.0, 60.0), ("o3", 85.0, 80.0)];
        let build = |offset: f64| {
            let mut t = ScoreTable::new();
            for (o, r, f) in base {
                t.push(o, "seq", Condition::Ref120, r - offset).unwrap();
                t.push(o, "seq", Condition::F60, f - offset).unwrap();
            }
            dmos(&t, "seq", Condition::F60).unwrap()
        };
        let (plain, shifted) = (build(0.0), build(15.0));
        assert_relative_eq!(plain.value, shifted.value, max_relative = 1e-12);
        assert_relative_eq!(plain.ci95, shifted.ci95, max_relative = 1e-12);
    }

    #[test]
    fn dmos_requires_both_scores_per_observer() {
        let t = table_from(&[
            ("o1", "park", Condition::Ref120, 80.0),
            ("o1", "park", Condition::Vfr, 75.0),
            ("o2", "park", Condition::Vfr, 60.0),
        ]);
        match dmos(&t, "park", Condition::Vfr) {
            Err(Error::MissingScore {
                observer,
                condition,
                ..
            }) => {
                assert_eq!(observer, "o2");
                assert_eq!(condition, "120fps");
            }
            other => panic!("expected MissingScore, got {other:?}"),
        }
    }

    #[test]
    fn dmos_reports_absent_conditions() {
        let t = table_from(&[("o1", "park", Condition::Ref120, 80.0)]);
        assert!(matches!(
            dmos(&t, "park", Condition::F30),
            Err(Error::MissingScore { .. })
        ));
        assert!(matches!(
            dmos(&t, "beach", Condition::F30),
            Err(Error::MissingCondition { .. })
        ));
    }

    #[test]
    fn welch_identical_samples() {
        let r = welch_t(&[60.0, 70.0, 80.0], &[60.0, 70.0, 80.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(!r.different);
    }

    #[test]
    fn welch_constant_samples_degenerate() {
        let equal = welch_t(&[5.0, 5.0], &[5.0, 5.0]).unwrap();
        assert_eq!(equal.t, 0.0);
        assert_eq!(equal.p, 1.0);
        let apart = welch_t(&[5.0, 5.0], &[7.0, 7.0]).unwrap();
        assert_eq!(apart.p, 0.0);
        assert!(apart.t.is_infinite() && apart.t < 0.0);
        assert!(apart.different);
    }

    #[test]
    fn welch_is_antisymmetric() {
        let a = [61.0, 74.0, 68.0, 59.0];
        let b = [70.0, 82.0, 77.0];
        let ab = welch_t(&a, &b).unwrap();
        let ba = welch_t(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.df, ba.df);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn welch_rejects_tiny_samples() {
        assert!(matches!(
            welch_t(&[1.0], &[1.0, 2.0]),
            Err(Error::UndersizedSample(1))
        ));
        assert!(matches!(
            welch_t(&[1.0, 2.0], &[]),
            Err(Error::UndersizedSample(0))
        ));
    }

    #[test]
    fn welch_hand_example() {
        // equal sizes and variances: t = -1, Welch df = 8
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = welch_t(&a, &b).unwrap();
        assert_relative_eq!(r.t, -1.0, max_relative = 1e-12);
        assert_relative_eq!(r.df, 8.0, max_relative = 1e-12);
        assert_relative_eq!(r.p, oracle_two_tailed(r.t, r.df), epsilon = 1e-6);
        assert!(!r.different);
    }

    #[test]
    fn cauchy_and_df2_tails_are_closed_form() {
        // df = 1 is Cauchy: p = 1 - (2/pi) atan|t|
        for t in [0.3f64, 1.0, 2.5, 10.0] {
            let expect = 1.0 - 2.0 / std::f64::consts::PI * t.atan();
            assert_relative_eq!(student_two_tailed_p(t, 1.0), expect, epsilon = 1e-12);
        }
        // df = 2: p = 1 - t / sqrt(t^2 + 2)
        for t in [0.5f64, 1.0, 3.0] {
            let expect = 1.0 - t / (t * t + 2.0).sqrt();
            assert_relative_eq!(student_two_tailed_p(t, 2.0), expect, epsilon = 1e-12);
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    /// Quadrature of the t density. Substituting x = sqrt(df) tan(theta)
    /// turns both the tail and the normalization into finite integrals of
    /// cos(theta)^(df - 1), so no gamma function is needed.
    fn oracle_two_tailed(t: f64, df: f64) -> f64 {
        let theta0 = (t.abs() / df.sqrt()).atan();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let g = |theta: f64| theta.cos().powf(df - 1.0);
        simpson(g, theta0, half_pi, 40_000) / simpson(g, 0.0, half_pi, 40_000)
    }

    #[test]
    fn p_values_match_quadrature() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for trial in 0..50 {
            let na = rng.gen_range(3..=30);
            let nb = rng.gen_range(3..=30);
            let shift: f64 = rng.gen_range(-2.0..2.0);
            let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..10.0)).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0.0..10.0) + shift).collect();
            let r = welch_t(&a, &b).unwrap();
            let expect = oracle_two_tailed(r.t, r.df);
            assert!(
                (r.p - expect).abs() < 1e-6,
                "trial {trial}: p {} vs quadrature {expect}",
                r.p
            );
        }
    }

    /// Scores where 30 fps is clearly worse and VFR indistinguishable.
    fn session() -> ScoreTable {
        let mut t = ScoreTable::new();
        let ref_scores = [82.0, 75.0, 90.0, 68.0, 85.0, 79.0, 88.0, 72.0];
        for (i, &s) in ref_scores.iter().enumerate() {
            let o = format!("o{i}");
            t.push(&o, "park", Condition::Ref120, s).unwrap();
            t.push(&o, "park", Condition::Vfr, s - 1.0 + (i % 3) as f64).unwrap();
            t.push(&o, "park", Condition::F60, s - 4.0 + (i % 2) as f64).unwrap();
            t.push(&o, "park", Condition::F30, s - 30.0 + (i % 4) as f64).unwrap();
        }
        t
    }

    #[test]
    fn pairwise_table_covers_the_lower_triangle() {
        let cells = pairwise_table(&session(), "park").unwrap();
        assert_eq!(cells.len(), 6);
        let pairs: Vec<(Condition, Condition)> =
            cells.iter().map(|c| (c.test, c.reference)).collect();
        assert_eq!(pairs, PAIRS.to_vec());
        let cell = |test, reference| {
            cells
                .iter()
                .find(|c| c.test == test && c.reference == reference)
                .unwrap()
        };
        assert!(cell(Condition::F30, Condition::Ref120).result.different);
        assert!(cell(Condition::F30, Condition::Vfr).result.different);
        assert!(!cell(Condition::Vfr, Condition::Ref120).result.different);
    }

    #[test]
    fn pairwise_needs_every_condition() {
        let t = table_from(&[
            ("o1", "park", Condition::Ref120, 80.0),
            ("o2", "park", Condition::Ref120, 82.0),
        ]);
        match pairwise_table(&t, "park") {
            Err(Error::MissingCondition { condition, .. }) => assert_eq!(condition, "VFR"),
            other => panic!("expected MissingCondition, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let t = session();
        t.write_csv(&path).unwrap();
        let back = ScoreTable::read_csv(&path).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        for bad in [
            "observer,sequence,fps,score\no1,park,VFR,80\n",
            "observer,sequence,condition,score\no1,park,90fps,80\n",
            "observer,sequence,condition,score\no1,park,VFR,140\n",
            "observer,sequence,condition,score\no1,park,VFR,80\no1,park,VFR,70\n",
        ] {
            std::fs::write(&path, bad).unwrap();
            assert!(
                matches!(ScoreTable::read_csv(&path), Err(Error::DataFormat(_))),
                "accepted: {bad}"
            );
        }
    }

    #[test]
    fn condition_names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
        }
        assert!("45fps".parse::<Condition>().is_err());
    }

    #[test]
    fn dmos_table_covers_all_sequences() {
        let mut t = session();
        for (i, s) in [70.0, 72.0].iter().enumerate() {
            let o = format!("o{i}");
            for c in Condition::ALL {
                t.push(&o, "beach", c, *s).unwrap();
            }
        }
        let rows = dmos_table(&t).unwrap();
        assert_eq!(rows.len(), 6); // 2 sequences x 3 conditions
        let beach_vfr = rows
            .iter()
            .find(|r| r.sequence == "beach" && r.condition == Condition::Vfr)
            .unwrap();
        assert_eq!(beach_vfr.dmos.value, 100.0);
    }
}
