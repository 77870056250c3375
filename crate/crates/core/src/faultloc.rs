//! Spectrum-based fault localization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::Location;
use crate::testkit::SuiteResult;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultLocError {
    #[error("no failing test")]
    NoFailingTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub failed: u32,
    pub passed: u32,
}

/// Per-statement counts of covering failing and passing tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Indexed by `Location::index`.
    pub counts: Vec<Counts>,
    pub total_failed: u32,
    pub total_passed: u32,
}

impl Spectrum {
    pub fn counts(&self, loc: Location) -> Counts {
        self.counts.get(loc.index()).copied().unwrap_or_default()
    }

    pub fn locations(&self) -> impl Iterator<Item = Location> {
        (1..=self.counts.len() as u32).map(Location)
    }
}

pub fn build_spectrum(result: &SuiteResult) -> Result<Spectrum, FaultLocError> {
    let mut counts = vec![Counts::default(); result.statement_count];
    let (mut total_failed, mut total_passed) = (0, 0);
    for v in &result.verdicts {
        if v.passed {
            total_passed += 1;
        } else {
            total_failed += 1;
        }
        for (c, hits) in counts.iter_mut().zip(&v.coverage) {
            if *hits > 0 {
                if v.passed {
                    c.passed += 1;
                } else {
                    c.failed += 1;
                }
            }
        }
    }
    if total_failed == 0 {
        return Err(FaultLocError::NoFailingTest);
    }
    Ok(Spectrum { counts, total_failed, total_passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Ochiai,
    Tarantula,
    Jaccard,
    Naish2,
    Ochiai2,
    Kulczynski2,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::Ochiai, Metric::Tarantula, Metric::Jaccard, Metric::Naish2, Metric::Ochiai2, Metric::Kulczynski2];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ochiai => "ochiai",
            Metric::Tarantula => "tarantula",
            Metric::Jaccard => "jaccard",
            Metric::Naish2 => "naish2",
            Metric::Ochiai2 => "ochiai2",
            Metric::Kulczynski2 => "kulczynski2",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Suspiciousness of one statement. Zero denominators give 0.
pub fn suspiciousness(metric: Metric, spectrum: &Spectrum, loc: Location) -> f64 {
    let c = spectrum.counts(loc);
    let ef = c.failed as f64;
    let ep = c.passed as f64;
    let f = spectrum.total_failed as f64;
    let p = spectrum.total_passed as f64;
    let nf = f - ef;
    let np = p - ep;
    if ef == 0.0 {
        return 0.0;
    }
    match metric {
        Metric::Ochiai => ratio(ef, (f * (ef + ep)).sqrt()),
        Metric::Tarantula => {
            let fr = ratio(ef, f);
            let pr = ratio(ep, p);
            ratio(fr, fr + pr)
        }
        Metric::Jaccard => ratio(ef, f + ep),
        Metric::Naish2 => ef - ep / (p + 1.0),
        Metric::Ochiai2 => ratio(ef * np, ((ef + ep) * (nf + np) * (ef + np) * (nf + ep)).sqrt()),
        Metric::Kulczynski2 => 0.5 * (ratio(ef, f) + ratio(ef, ef + ep)),
    }
}

pub fn scores(metric: Metric, spectrum: &Spectrum) -> Vec<(Location, f64)> {
    spectrum.locations().map(|l| (l, suspiciousness(metric, spectrum, l))).collect()
}

/// Statements with positive score, most suspicious first, ties by location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric: Metric,
    pub entries: Vec<(Location, f64)>,
}

impl Ranking {
    pub fn locations(&self) -> impl Iterator<Item = Location> + '_ {
        self.entries.iter().map(|(l, _)| *l)
    }

    /// 1-based rank of a location, if ranked.
    pub fn position(&self, loc: Location) -> Option<usize> {
        self.entries.iter().position(|(l, _)| *l == loc).map(|i| i + 1)
    }
}

/// Relative tolerance under which two scores count as tied. Scores that are
/// equal as real numbers can differ in the last bits after rounding.
pub const SCORE_TOLERANCE: f64 = 1e-12;

pub fn scores_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= SCORE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

pub fn rank_scores(metric: Metric, mut entries: Vec<(Location, f64)>) -> Ranking {
    entries.retain(|(_, s)| *s > 0.0);
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut grouped: Vec<(usize, Location, f64)> = Vec::with_capacity(entries.len());
    let mut group = 0;
    let mut head = f64::NAN;
    for (loc, score) in entries {
        if !scores_tied(head, score) {
            group += 1;
            head = score;
        }
        grouped.push((group, loc, score));
    }
    grouped.sort_by_key(|(g, l, _)| (*g, *l));
    Ranking { metric, entries: grouped.into_iter().map(|(_, l, s)| (l, s)).collect() }
}

pub fn rank(spectrum: &Spectrum, metric: Metric) -> Ranking {
    rank_scores(metric, scores(metric, spectrum))
}

/// One plus the number of statements strictly more suspicious than `buggy`.
pub fn wasted_effort_from_scores(scores: &[(Location, f64)], buggy: Location) -> usize {
    let target = scores.iter().find(|(l, _)| *l == buggy).map_or(0.0, |(_, s)| *s);
    scores.iter().filter(|(_, s)| *s > target && !scores_tied(*s, target)).count() + 1
}

pub fn wasted_effort(spectrum: &Spectrum, metric: Metric, buggy: Location) -> usize {
    wasted_effort_from_scores(&scores(metric, spectrum), buggy)
}

/// CSV with one row per statement and one score column per metric.
pub fn scores_csv(spectrum: &Spectrum) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["location".to_string(), "failed".into(), "passed".into()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    w.write_record(&header).expect("in-memory write");
    for loc in spectrum.locations() {
        let c = spectrum.counts(loc);
        let mut row = vec![loc.0.to_string(), c.failed.to_string(), c.passed.to_string()];
        row.extend(Metric::ALL.iter().map(|m| format!("{:.6}", suspiciousness(*m, spectrum, loc))));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// One observed effort value for a bug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortSample {
    pub metric: Metric,
    pub bug_type: String,
    pub effort: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortRow {
    pub metric: Metric,
    pub bug_type: String,
    pub average: f64,
    pub median: f64,
    pub bugs: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Average and median effort per metric and bug type.
pub fn effort_table(samples: &[EffortSample]) -> Vec<EffortRow> {
    let mut groups: std::collections::BTreeMap<(Metric, String), Vec<f64>> = Default::default();
    for s in samples {
        groups.entry((s.metric, s.bug_type.clone())).or_default().push(s.effort as f64);
    }
    groups
        .into_iter()
        .map(|((metric, bug_type), mut v)| {
            let average = v.iter().sum::<f64>() / v.len() as f64;
            EffortRow { metric, bug_type, average, median: median(&mut v), bugs: v.len() }
        })
        .collect()
}

pub fn effort_csv(rows: &[EffortRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "bug_type", "bugs", "average", "median"]).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.metric.name().to_string(),
            r.bug_type.clone(),
            r.bugs.to_string(),
            format!("{:.2}", r.average),
            format!("{:.2}", r.median),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
