//! One-way ANOVA feature ranking and per-user duration summaries.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::segment_recording;
use crate::features::{extract_features, feature_names, DerivativeLevel, FeatureMatrix};
use crate::preprocess::SgConfig;
use crate::segmentation::{IvtConfig, SegmentKind};

/// One-way ANOVA F statistic of `values` grouped by `groups`.
///
/// Returns `+inf` when the within-group variation is zero but the groups
/// differ, and 0 when both variations are zero.
pub fn anova_f<G: Ord>(values: &[f64], groups: &[G]) -> Result<f64> {
    if values.len() != groups.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: groups.len(),
        });
    }
    let mut by_group: BTreeMap<&G, Vec<f64>> = BTreeMap::new();
    for (v, g) in values.iter().zip(groups) {
        by_group.entry(g).or_default().push(*v);
    }
    let k = by_group.len();
    let n = values.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs at least two groups, got {k}"
        )));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs more values ({n}) than groups ({k})"
        )));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok(0.0);
    }
    let grand = values.iter().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for members in by_group.values() {
        // Constant groups contribute no within-group variation at all.
        let mean = if members.iter().all(|v| *v == members[0]) {
            members[0]
        } else {
            members.iter().sum::<f64>() / members.len() as f64
        };
        ss_between += members.len() as f64 * (mean - grand).powi(2);
        ss_within += members.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let ms_between = ss_between / (k - 1) as f64;
    let ms_within = ss_within / (n - k) as f64;
    Ok(if ms_within == 0.0 {
        if ms_between > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        ms_between / ms_within
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    /// 0-based column index.
    pub column: usize,
    pub name: String,
    /// `f64::INFINITY` marks an undefined (zero within-variance) score.
    pub score: f64,
}

impl RankedFeature {
    pub fn is_undefined(&self) -> bool {
        self.score.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub fixation: Vec<RankedFeature>,
    pub saccade: Vec<RankedFeature>,
}

fn rank_matrix(m: &FeatureMatrix) -> Result<Vec<RankedFeature>> {
    let names = feature_names(m.level());
    let mut ranked: Vec<RankedFeature> = (0..m.n_cols())
        .map(|j| {
            Ok(RankedFeature {
                column: j,
                name: names[j].clone(),
                score: anova_f(&m.column(j), m.labels())?,
            })
        })
        .collect::<Result<_>>()?;
    // Stable sort: equal scores keep column order; +inf sorts first.
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(ranked)
}

/// Ranks every column of both matrices by ANOVA F over their row labels.
pub fn rank_features(fix: &FeatureMatrix, sac: &FeatureMatrix) -> Result<FeatureRanking> {
    Ok(FeatureRanking {
        fixation: rank_matrix(fix)?,
        saccade: rank_matrix(sac)?,
    })
}

/// Feature matrices over all sessions of every user (S1 and S2 merged).
pub fn merged_feature_matrices(
    dataset: &Dataset,
    level: DerivativeLevel,
    ivt: &IvtConfig,
    sg: Option<&SgConfig>,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    dataset.require_single_id()?;
    let mut fix = FeatureMatrix::empty(SegmentKind::Fixation, level);
    let mut sac = FeatureMatrix::empty(SegmentKind::Saccade, level);
    for r in dataset.recordings() {
        let seg = segment_recording(&r.trajectory, sg, None, ivt)?;
        let (f, s) = extract_features(&seg, level, &r.user_id);
        fix.append(&f)?;
        sac.append(&s)?;
    }
    Ok((fix, sac))
}

fn format_score(score: f64) -> String {
    if score.is_infinite() {
        "inf".to_string()
    } else {
        score.to_string()
    }
}

/// Writes `rank,kind,feature,score` (rank is 1-based within each kind).
pub fn write_ranking_csv<W: Write>(mut w: W, ranking: &FeatureRanking) -> io::Result<()> {
    writeln!(w, "rank,kind,feature,score")?;
    for (kind, list) in [
        (SegmentKind::Fixation, &ranking.fixation),
        (SegmentKind::Saccade, &ranking.saccade),
    ] {
        for (i, f) in list.iter().enumerate() {
            writeln!(w, "{},{},{},{}", i + 1, kind, f.name, format_score(f.score))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSummary {
    pub user: String,
    pub mean_fix_s: Option<f64>,
    pub mean_sac_s: Option<f64>,
}

/// Mean fixation and saccade durations per user over both sessions.
pub fn duration_summary(
    dataset: &Dataset,
    ivt: &IvtConfig,
    sg: Option<&SgConfig>,
) -> Result<Vec<DurationSummary>> {
    dataset.require_single_id()?;
    let mut acc: BTreeMap<&str, [(f64, usize); 2]> = BTreeMap::new();
    for r in dataset.recordings() {
        let seg = segment_recording(&r.trajectory, sg, None, ivt)?;
        let entry = acc.entry(r.user_id.as_str()).or_default();
        for s in &seg.segments {
            let slot = match s.kind {
                SegmentKind::Fixation => &mut entry[0],
                SegmentKind::Saccade => &mut entry[1],
            };
            slot.0 += s.duration_s;
            slot.1 += 1;
        }
    }
    let mean = |(sum, n): (f64, usize)| (n > 0).then(|| sum / n as f64);
    Ok(acc
        .into_iter()
        .map(|(user, [fix, sac])| DurationSummary {
            user: user.to_string(),
            mean_fix_s: mean(fix),
            mean_sac_s: mean(sac),
        })
        .collect())
}

/// Writes `user,mean_fix_s,mean_sac_s`; undefined means are empty fields.
pub fn write_duration_csv<W: Write>(mut w: W, rows: &[DurationSummary]) -> io::Result<()> {
    writeln!(w, "user,mean_fix_s,mean_sac_s")?;
    let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{}",
            r.user,
            field(r.mean_fix_s),
            field(r.mean_sac_s)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anova_hand_examples() {
        assert_eq!(anova_f(&[1.0, 1.0, 1.0, 1.0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(
            anova_f(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[0, 0, 0, 1, 1, 1]).unwrap(),
            f64::INFINITY
        );
        let f = anova_f(
            &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0],
            &["a", "a", "a", "b", "b", "b"],
        )
        .unwrap();
        assert!((f - 1.5).abs() < 1e-12);
    }

    #[test]
    fn anova_preconditions() {
        assert!(anova_f(&[1.0, 2.0], &[0, 0]).is_err());
        assert!(anova_f(&[1.0, 2.0], &[0, 1]).is_err());
        assert!(anova_f(&[1.0, 2.0], &[0]).is_err());
    }

    #[test]
    fn constant_groups_with_inexact_means() {
        // 0.1 * 3 / 3 != 0.1 in floating point; the group must still count as constant.
        let f = anova_f(&[0.1, 0.1, 0.1, 0.7, 0.7, 0.7], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!(f.is_infinite());
    }

    #[test]
    fn ranking_csv_marks_undefined() {
        let ranking = FeatureRanking {
            fixation: vec![RankedFeature {
                column: 0,
                name: "Duration".into(),
                score: f64::INFINITY,
            }],
            saccade: vec![RankedFeature {
                column: 0,
                name: "Duration".into(),
                score: 2.5,
            }],
        };
        let mut buf = Vec::new();
        write_ranking_csv(&mut buf, &ranking).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rank,kind,feature,score\n1,fixation,Duration,inf\n1,saccade,Duration,2.5\n"
        );
    }

    #[test]
    fn duration_csv_empty_field() {
        let rows = vec![DurationSummary {
            user: "u1".into(),
            mean_fix_s: Some(1.0),
            mean_sac_s: None,
        }];
        let mut buf = Vec::new();
        write_duration_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "user,mean_fix_s,mean_sac_s\nu1,1,\n"
        );
    }
}
