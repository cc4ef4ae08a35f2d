use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Result, UserClass};
use crate::features::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub users: u64,
    pub words: u64,
    pub publications: u64,
}

impl Add for ClassCounts {
    type Output = ClassCounts;

    fn add(self, rhs: ClassCounts) -> ClassCounts {
        ClassCounts {
            users: self.users + rhs.users,
            words: self.words + rhs.words,
            publications: self.publications + rhs.publications,
        }
    }
}

/// Users, words and publications by class, with `overall` always the sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub diagnosed: ClassCounts,
    pub control: ClassCounts,
    pub overall: ClassCounts,
}

impl CorpusStats {
    pub fn class(&self, class: UserClass) -> ClassCounts {
        match class {
            UserClass::Diagnosed => self.diagnosed,
            UserClass::Control => self.control,
        }
    }
}

impl Add for CorpusStats {
    type Output = CorpusStats;

    fn add(self, rhs: CorpusStats) -> CorpusStats {
        CorpusStats {
            diagnosed: self.diagnosed + rhs.diagnosed,
            control: self.control + rhs.control,
            overall: self.overall + rhs.overall,
        }
    }
}

pub fn compute_stats(corpus: &Corpus) -> Result<CorpusStats> {
    if corpus.timelines.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut diagnosed = ClassCounts::default();
    let mut control = ClassCounts::default();
    for t in &corpus.timelines {
        let slot = match t.label {
            UserClass::Diagnosed => &mut diagnosed,
            UserClass::Control => &mut control,
        };
        slot.users += 1;
        slot.publications += t.publications.len() as u64;
        slot.words += t.publications.iter().map(|p| tokenize(&p.text).len() as u64).sum::<u64>();
    }
    Ok(CorpusStats { diagnosed, control, overall: diagnosed + control })
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20} {:>12} {:>12} {:>12}", "Statistics", "Diagnosed", "Control", "Overall")?;
        type Getter = fn(&ClassCounts) -> u64;
        let rows: [(&str, Getter); 3] =
            [("Users (timelines)", |c| c.users), ("Words", |c| c.words), ("Publications", |c| c.publications)];
        for (name, get) in rows {
            writeln!(
                f,
                "{:<20} {:>12} {:>12} {:>12}",
                name,
                get(&self.diagnosed),
                get(&self.control),
                get(&self.overall)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Publication, Timeline};

    fn timeline(id: &str, label: UserClass, texts: &[&str]) -> Timeline {
        Timeline {
            user_id: id.into(),
            label,
            split: None,
            publications: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Publication {
                    user_id: id.into(),
                    post_id: format!("{id}-{i}"),
                    timestamp: i as i64,
                    text: (*t).into(),
                })
                .collect(),
        }
    }

    #[test]
    fn hand_count() {
        let c = Corpus::new(vec![timeline("d", UserClass::Diagnosed, &["one two three", "four five six"])]);
        let s = compute_stats(&c).unwrap();
        assert_eq!(s.diagnosed, ClassCounts { users: 1, words: 6, publications: 2 });
        assert_eq!(s.control, ClassCounts::default());
        assert_eq!(s.overall, s.diagnosed);
    }

    #[test]
    fn seven_to_one_ratio() {
        let mut ts = vec![timeline("d", UserClass::Diagnosed, &["x"])];
        for i in 0..7 {
            ts.push(timeline(&format!("c{i}"), UserClass::Control, &["y"]));
        }
        let s = compute_stats(&Corpus::new(ts)).unwrap();
        assert_eq!((s.diagnosed.users, s.control.users, s.overall.users), (1, 7, 8));
    }

    #[test]
    fn additive_over_disjoint_union() {
        let a = Corpus::new(vec![
            timeline("a1", UserClass::Diagnosed, &["a b", "c"]),
            timeline("a2", UserClass::Control, &["d e f"]),
        ]);
        let b = Corpus::new(vec![timeline("b1", UserClass::Control, &["g h", "i j k", "l"])]);
        let sa = compute_stats(&a).unwrap();
        let sb = compute_stats(&b).unwrap();
        let su = compute_stats(&a.union(b).unwrap()).unwrap();
        assert_eq!(su, sa + sb);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(compute_stats(&Corpus::default()), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn display_has_table_rows() {
        let c = Corpus::new(vec![timeline("d", UserClass::Diagnosed, &["x y"])]);
        let text = compute_stats(&c).unwrap().to_string();
        for row in ["Users (timelines)", "Words", "Publications", "Diagnosed", "Control", "Overall"] {
            assert!(text.contains(row), "{text}");
        }
    }
}
