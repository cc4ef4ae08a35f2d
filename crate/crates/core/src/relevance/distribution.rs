use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, RelevanceError, RelevanceLabel, Result};
use crate::corpus::{Corpus, UserClass};
use crate::features::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub label: RelevanceLabel,
    pub tweets: u64,
    pub tweet_pct: f64,
    pub tokens: u64,
    pub token_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub class: UserClass,
    /// High, Medium, Low.
    pub rows: Vec<TierRow>,
}

impl ClassDistribution {
    pub fn total_tweets(&self) -> u64 {
        self.rows.iter().map(|r| r.tweets).sum()
    }

    pub fn row(&self, label: RelevanceLabel) -> &TierRow {
        &self.rows[label.index()]
    }
}

/// Publication and token counts per relevance label, by user class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub diagnosed: ClassDistribution,
    pub control: ClassDistribution,
}

impl DistributionReport {
    pub fn class(&self, class: UserClass) -> &ClassDistribution {
        match class {
            UserClass::Diagnosed => &self.diagnosed,
            UserClass::Control => &self.control,
        }
    }
}

fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Percentages are within each class, so each class column sums to 100
/// (or is all zero when the class has no records).
pub fn distribution_of(records: &[AnnotationRecord], corpus: &Corpus) -> Result<DistributionReport> {
    if records.is_empty() {
        return Err(RelevanceError::EmptyInput);
    }
    let index: HashMap<&str, (UserClass, &str)> = corpus
        .timelines
        .iter()
        .flat_map(|t| t.publications.iter().map(move |p| (p.post_id.as_str(), (t.label, p.text.as_str()))))
        .collect();

    // [class][label] -> (tweets, tokens)
    let mut counts = [[(0u64, 0u64); 3]; 2];
    for r in records {
        let (class, text) =
            index.get(r.post_id.as_str()).ok_or_else(|| RelevanceError::UnknownPost(r.post_id.clone()))?;
        let slot = &mut counts[(*class != UserClass::Diagnosed) as usize][r.label.index()];
        slot.0 += 1;
        slot.1 += tokenize(text).len() as u64;
    }

    let build = |class: UserClass, c: &[(u64, u64); 3]| {
        let tweets: u64 = c.iter().map(|x| x.0).sum();
        let tokens: u64 = c.iter().map(|x| x.1).sum();
        ClassDistribution {
            class,
            rows: RelevanceLabel::ALL
                .iter()
                .map(|&label| {
                    let (tw, tk) = c[label.index()];
                    TierRow { label, tweets: tw, tweet_pct: pct(tw, tweets), tokens: tk, token_pct: pct(tk, tokens) }
                })
                .collect(),
        }
    };
    Ok(DistributionReport {
        diagnosed: build(UserClass::Diagnosed, &counts[0]),
        control: build(UserClass::Control, &counts[1]),
    })
}

impl fmt::Display for DistributionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10}| {:^38} | {:^38}", "", "Diagnosed class", "Control class")?;
        writeln!(
            f,
            "{:<10}| {:>8} {:>8} {:>10} {:>8} | {:>8} {:>8} {:>10} {:>8}",
            "Relevance", "Tweets", "%", "Tokens", "%", "Tweets", "%", "Tokens", "%"
        )?;
        for label in RelevanceLabel::ALL {
            let d = self.diagnosed.row(label);
            let c = self.control.row(label);
            writeln!(
                f,
                "{:<10}| {:>8} {:>7.1}% {:>10} {:>7.1}% | {:>8} {:>7.1}% {:>10} {:>7.1}%",
                label.as_str(),
                d.tweets,
                d.tweet_pct,
                d.tokens,
                d.token_pct,
                c.tweets,
                c.tweet_pct,
                c.tokens,
                c.token_pct
            )?;
        }
        Ok(())
    }
}
