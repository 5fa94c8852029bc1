use std::collections::BTreeSet;

use super::{average_precision, rank, APReport, Gallery, QueryAp};
use crate::embeddings::fold_case;
use crate::error::{Error, Result};

pub const PROTOCOL_QBE_ALMAZAN: &str = "qbe-almazan";
pub const PROTOCOL_QBS_ALMAZAN: &str = "qbs-almazan";
pub const PROTOCOL_COMPETITION_QBE: &str = "qbe-competition";
pub const PROTOCOL_COMPETITION_QBS: &str = "qbs-competition";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    Qbe,
    Qbs,
}

fn query_ap(
    query_id: &str,
    label: &str,
    vector: &[f64],
    gallery: &Gallery,
    exclude: Option<&str>,
) -> Result<Option<f64>> {
    let ranked = rank(query_id, vector, gallery, exclude)?;
    let items = gallery.items();
    let relevance: Vec<bool> = ranked.items.iter().map(|r| items[r.index].label == label).collect();
    let n_relevant = relevance.iter().filter(|&&r| r).count();
    if n_relevant == 0 {
        return Ok(None);
    }
    average_precision(&relevance, n_relevant).map(Some)
}

/// Every test image queries the remaining test images. Queries without any
/// other item of their class are dropped but still act as distractors.
pub fn run_qbe_almazan(test: &Gallery) -> Result<APReport> {
    if test.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let mut entries = Vec::new();
    for item in test.items() {
        if let Some(ap) = query_ap(&item.id, &item.label, &item.vector, test, Some(&item.id))? {
            entries.push(QueryAp {
                id: item.id.clone(),
                label: item.label.clone(),
                ap,
            });
        }
    }
    APReport::new(PROTOCOL_QBE_ALMAZAN, entries)
}

/// Every distinct (case-folded) test transcription not in `stop_words`
/// is embedded with `embed` and queries the whole test set.
pub fn run_qbs_almazan<F>(test: &Gallery, mut embed: F, stop_words: &[String]) -> Result<APReport>
where
    F: FnMut(&str) -> Result<Vec<f64>>,
{
    if test.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let stop: BTreeSet<String> = stop_words.iter().map(|w| fold_case(w)).collect();
    let labels: BTreeSet<&str> = test.items().iter().map(|i| i.label.as_str()).collect();
    let mut entries = Vec::new();
    for label in labels.into_iter().filter(|l| !stop.contains(*l)) {
        let vector = embed(label)?;
        let ap = query_ap(label, label, &vector, test, None)?.expect("query label occurs in the test set");
        entries.push(QueryAp {
            id: label.to_string(),
            label: label.to_string(),
            ap,
        });
    }
    APReport::new(PROTOCOL_QBS_ALMAZAN, entries)
}

/// Separate query set ranked against the full test set. Every query must
/// have at least one relevant test item.
pub fn run_competition_protocol(queries: &Gallery, test: &Gallery, mode: QueryMode) -> Result<APReport> {
    if test.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let mut entries = Vec::with_capacity(queries.len());
    for q in queries.items() {
        let ap = query_ap(&q.id, &q.label, &q.vector, test, None)?.ok_or_else(|| {
            Error::NoRelevant(format!("query {:?} ({:?}) has no relevant test item", q.id, q.label))
        })?;
        entries.push(QueryAp {
            id: q.id.clone(),
            label: q.label.clone(),
            ap,
        });
    }
    let name = match mode {
        QueryMode::Qbe => PROTOCOL_COMPETITION_QBE,
        QueryMode::Qbs => PROTOCOL_COMPETITION_QBS,
    };
    APReport::new(name, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gallery(items: &[(&str, &str, [f64; 2])]) -> Gallery {
        let mut g = Gallery::new();
        for (id, label, v) in items {
            g.push(*id, label, v.to_vec()).unwrap();
        }
        g
    }

    #[test]
    fn qbe_perfect_and_singletons() {
        let g = gallery(&[
            ("1", "a", [1.0, 0.0]),
            ("2", "b", [0.0, 1.0]),
            ("3", "a", [1.0, 0.1]),
            ("4", "b", [0.1, 1.0]),
        ]);
        assert_eq!(run_qbe_almazan(&g).unwrap().map, 1.0);
        let singles = gallery(&[("1", "a", [1.0, 0.0]), ("2", "b", [0.0, 1.0]), ("3", "c", [1.0, 1.0])]);
        assert!(matches!(run_qbe_almazan(&singles), Err(Error::NoQueries)));
    }

    #[test]
    fn qbe_keeps_discarded_queries_as_distractors() {
        let g = gallery(&[("1", "a", [1.0, 0.0]), ("2", "z", [1.0, 0.05]), ("3", "a", [1.0, 0.2])]);
        let r = run_qbe_almazan(&g).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert_eq!(r.entries[0].ap, 0.5);
    }

    #[test]
    fn qbs_stop_words() {
        let g = gallery(&[("1", "the", [1.0, 0.0]), ("2", "and", [0.0, 1.0])]);
        let embed = |w: &str| Ok(if w == "the" { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
        let r = run_qbs_almazan(&g, embed, &["The".into()]).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].id, "and");
        let all = ["the".to_string(), "and".to_string()];
        assert!(matches!(run_qbs_almazan(&g, embed, &all), Err(Error::NoQueries)));
    }

    #[test]
    fn competition_case_folds_and_requires_relevant() {
        let test = gallery(&[("t1", "spotting", [1.0, 0.0]), ("t2", "word", [0.0, 1.0])]);
        let q = gallery(&[("q1", "Spotting", [1.0, 0.0])]);
        let r = run_competition_protocol(&q, &test, QueryMode::Qbe).unwrap();
        assert_eq!(r.map, 1.0);
        let orphan = gallery(&[("q9", "missing", [1.0, 0.0])]);
        assert!(matches!(
            run_competition_protocol(&orphan, &test, QueryMode::Qbs),
            Err(Error::NoRelevant(_))
        ));
    }
}
