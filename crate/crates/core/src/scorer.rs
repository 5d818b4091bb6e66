//! Extraction scoring: per (event, argument, subtype) counts with precision,
//! recall and F1, plus an OVERALL micro-averaged row.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedDocument, Span};
use crate::error::{Error, Result};

pub const OVERALL: &str = "OVERALL";
pub const TRIGGER: &str = "Trigger";
pub const NO_SUBTYPE: &str = "N/A";
pub const CSV_HEADER: [&str; 9] = ["SDoH event", "Argument", "Subtype", "NT", "NP", "TP", "P", "R", "F1"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matching {
    /// Same key and at least one shared character.
    #[default]
    Overlap,
    /// Same key and identical offsets.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub event: String,
    pub argument: String,
    pub subtype: String,
    pub nt: u64,
    pub np: u64,
    pub tp: u64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from counts; zero denominators give 0.
pub fn prf(nt: u64, np: u64, tp: u64) -> Result<(f64, f64, f64)> {
    if tp > nt || tp > np {
        return Err(Error::Consistency(format!("TP={tp} exceeds NT={nt} or NP={np}")));
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, np);
    let r = ratio(tp, nt);
    let f1 = if tp == 0 { 0.0 } else { ratio(2 * tp, nt + np) };
    Ok((p, r, f1))
}

/// `num/den` rounded half-up to two decimals, computed exactly in integers.
pub fn format_ratio(num: u64, den: u64) -> String {
    if den == 0 || num == 0 {
        return "0.00".to_string();
    }
    let hundredths = (200 * num as u128 + den as u128) / (2 * den as u128);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

impl ScoreRow {
    pub fn from_counts(event: &str, argument: &str, subtype: &str, nt: u64, np: u64, tp: u64) -> Result<Self> {
        let (p, r, f1) = prf(nt, np, tp)?;
        Ok(ScoreRow {
            event: event.to_string(),
            argument: argument.to_string(),
            subtype: subtype.to_string(),
            nt,
            np,
            tp,
            p,
            r,
            f1,
        })
    }

    pub fn is_overall(&self) -> bool {
        self.event == OVERALL
    }

    /// Two-decimal P, R and F1 as printed in the score tables.
    pub fn formatted(&self) -> [String; 3] {
        [
            format_ratio(self.tp, self.np),
            format_ratio(self.tp, self.nt),
            format_ratio(2 * self.tp, self.nt + self.np),
        ]
    }
}

type Key = (String, String, String);

fn annotations(doc: &AnnotatedDocument) -> BTreeMap<Key, Vec<Span>> {
    let mut out: BTreeMap<Key, Vec<Span>> = BTreeMap::new();
    for ev in &doc.events {
        let event = ev.event_type.to_string();
        out.entry((event.clone(), TRIGGER.to_string(), NO_SUBTYPE.to_string()))
            .or_default()
            .push(ev.trigger);
        for a in &ev.arguments {
            let subtype = a.subtype.map_or_else(|| NO_SUBTYPE.to_string(), |s| s.to_string());
            out.entry((event.clone(), a.role.to_string(), subtype)).or_default().push(a.span);
        }
    }
    out
}

/// Greedy one-to-one matching; candidate pairs are taken by larger overlap,
/// then earlier gold start, then earlier predicted start.
pub fn match_spans(gold: &[Span], pred: &[Span], matching: Matching) -> u64 {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let ov = g.overlap(p);
            let ok = match matching {
                Matching::Overlap => ov >= 1,
                Matching::Exact => g == p,
            };
            if ok {
                pairs.push((ov, gi, pi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(gold[a.1].start.cmp(&gold[b.1].start))
            .then(pred[a.2].start.cmp(&pred[b.2].start))
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut gold_used = vec![false; gold.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut tp = 0;
    for (_, gi, pi) in pairs {
        if !gold_used[gi] && !pred_used[pi] {
            gold_used[gi] = true;
            pred_used[pi] = true;
            tp += 1;
        }
    }
    tp
}

/// Scores predicted against gold documents (paired by doc_id). Rows: OVERALL
/// first, then every key seen on either side in lexicographic order.
pub fn score_corpus(gold: &[AnnotatedDocument], predicted: &[AnnotatedDocument], matching: Matching) -> Result<Vec<ScoreRow>> {
    let pred_by_id: HashMap<&str, &AnnotatedDocument> = predicted.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    if pred_by_id.len() != predicted.len() {
        return Err(Error::Input("duplicate doc_id among predictions".into()));
    }
    let gold_ids: std::collections::HashSet<&str> = gold.iter().map(|d| d.doc_id.as_str()).collect();
    if gold_ids.len() != gold.len() {
        return Err(Error::Input("duplicate doc_id among gold documents".into()));
    }
    if let Some(extra) = predicted.iter().find(|d| !gold_ids.contains(d.doc_id.as_str())) {
        return Err(Error::Input(format!("predicted document {} has no gold counterpart", extra.doc_id)));
    }
    let mut counts: BTreeMap<Key, (u64, u64, u64)> = BTreeMap::new();
    for g in gold {
        let p = pred_by_id
            .get(g.doc_id.as_str())
            .ok_or_else(|| Error::Input(format!("gold document {} has no prediction", g.doc_id)))?;
        let ga = annotations(g);
        let pa = annotations(p);
        let keys: std::collections::BTreeSet<&Key> = ga.keys().chain(pa.keys()).collect();
        for key in keys {
            let empty = Vec::new();
            let gs = ga.get(key).unwrap_or(&empty);
            let ps = pa.get(key).unwrap_or(&empty);
            let tp = match_spans(gs, ps, matching);
            let c = counts.entry(key.clone()).or_default();
            c.0 += gs.len() as u64;
            c.1 += ps.len() as u64;
            c.2 += tp;
        }
    }
    let (nt, np, tp) = counts
        .values()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    let mut rows = vec![ScoreRow::from_counts(OVERALL, OVERALL, OVERALL, nt, np, tp)?];
    for ((event, argument, subtype), (nt, np, tp)) in counts {
        if nt == 0 && np == 0 {
            continue;
        }
        rows.push(ScoreRow::from_counts(&event, &argument, &subtype, nt, np, tp)?);
    }
    Ok(rows)
}

pub fn overall(rows: &[ScoreRow]) -> Option<&ScoreRow> {
    rows.iter().find(|r| r.is_overall())
}

pub fn to_csv(rows: &[ScoreRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let [p, rc, f1] = r.formatted();
        w.write_record([
            r.event.as_str(),
            &r.argument,
            &r.subtype,
            &r.nt.to_string(),
            &r.np.to_string(),
            &r.tp.to_string(),
            &p,
            &rc,
            &f1,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_csv(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_csv(rows)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EventType, Role, SdohEvent, Subtype};

    #[test]
    fn prf_examples() {
        let row = ScoreRow::from_counts("Alcohol", "Trigger", "N/A", 1080, 1030, 873).unwrap();
        assert_eq!(row.formatted(), ["0.85", "0.81", "0.83"]);
        let row = ScoreRow::from_counts(OVERALL, OVERALL, OVERALL, 13110, 8190, 6629).unwrap();
        assert_eq!(row.formatted(), ["0.81", "0.51", "0.62"]);
        assert_eq!(prf(5, 0, 0).unwrap(), (0.0, 0.0, 0.0));
        assert!(matches!(prf(3, 5, 4), Err(Error::Consistency(_))));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_ratio(1, 8), "0.13");
        assert_eq!(format_ratio(1, 200), "0.01");
        assert_eq!(format_ratio(1, 201), "0.00");
        assert_eq!(format_ratio(3, 3), "1.00");
        assert_eq!(format_ratio(0, 0), "0.00");
    }

    fn doc(id: &str, events: Vec<SdohEvent>) -> AnnotatedDocument {
        let mut d = AnnotatedDocument::new(id, "x".repeat(100));
        d.events = events;
        d
    }

    fn tob(s: usize, e: usize) -> SdohEvent {
        SdohEvent::new(EventType::Tobacco, Span::new(s, e))
    }

    #[test]
    fn hand_constructed_fixture() {
        // d1: two exact matches; d2: one overlapping match plus a false positive; d3: one miss.
        let gold = vec![
            doc("d1", vec![tob(0, 5), tob(10, 15)]),
            doc("d2", vec![tob(20, 30)]),
            doc("d3", vec![tob(40, 45)]),
        ];
        let pred = vec![
            doc("d1", vec![tob(0, 5), tob(10, 15)]),
            doc("d2", vec![tob(25, 35), tob(50, 55)]),
            doc("d3", vec![]),
        ];
        let rows = score_corpus(&gold, &pred, Matching::Overlap).unwrap();
        let t = rows.iter().find(|r| r.argument == TRIGGER).unwrap();
        assert_eq!((t.nt, t.np, t.tp), (4, 4, 3));
        let exact = score_corpus(&gold, &pred, Matching::Exact).unwrap();
        assert_eq!(exact[0].tp, 2);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let ev = tob(0, 5).with_argument(Role::StatusTime, Span::new(6, 9), Some(Subtype::Past));
        let gold = vec![doc("a", vec![ev.clone()])];
        let rows = score_corpus(&gold, &gold, Matching::Overlap).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.formatted() == ["1.00", "1.00", "1.00"]));
        assert_eq!(rows[1].subtype, "past");
        let rows = score_corpus(&gold, &[doc("a", vec![])], Matching::Overlap).unwrap();
        assert!(rows.iter().all(|r| r.p == 0.0 && r.r == 0.0));
    }

    #[test]
    fn one_to_one_prefers_larger_overlap() {
        let gold = [Span::new(0, 10), Span::new(8, 12)];
        let pred = [Span::new(8, 12)];
        assert_eq!(match_spans(&gold, &pred, Matching::Overlap), 1);
        let pred = [Span::new(0, 3), Span::new(2, 4)];
        assert_eq!(match_spans(&gold[..1], &pred, Matching::Overlap), 1);
    }

    #[test]
    fn doc_id_mismatch_is_an_input_error() {
        let r = score_corpus(&[doc("a", vec![])], &[doc("b", vec![])], Matching::Overlap);
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![ScoreRow::from_counts(OVERALL, OVERALL, OVERALL, 4, 4, 3).unwrap()];
        let csv = to_csv(&rows).unwrap();
        assert_eq!(csv, "SDoH event,Argument,Subtype,NT,NP,TP,P,R,F1\nOVERALL,OVERALL,OVERALL,4,4,3,0.75,0.75,0.75\n");
    }
}
