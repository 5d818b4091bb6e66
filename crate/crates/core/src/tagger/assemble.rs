//! Links decoded argument spans to decoded triggers.

use super::bio::{parse_argument_label, TypedSpan};
use crate::corpus::{EventType, SdohEvent};

fn midpoint(s: &TypedSpan) -> f64 {
    (s.first_token + s.last_token) as f64 / 2.0
}

/// One event per trigger. Each argument goes to the trigger in the same
/// sentence whose type admits its role and whose token midpoint is nearest;
/// ties go to the earlier trigger. Arguments without such a trigger are dropped.
///
/// `sentence_of[i]` is the sentence index of token `i`.
pub fn assemble_events(triggers: &[TypedSpan], arguments: &[TypedSpan], sentence_of: &[usize]) -> Vec<SdohEvent> {
    let mut order: Vec<usize> = (0..triggers.len()).collect();
    order.sort_by_key(|&i| (triggers[i].first_token, triggers[i].last_token));
    let typed: Vec<Option<EventType>> = triggers.iter().map(|t| t.label.parse().ok()).collect();
    let mut events: Vec<SdohEvent> = triggers
        .iter()
        .zip(&typed)
        .map(|(t, ty)| SdohEvent::new(ty.unwrap_or(EventType::Alcohol), t.span))
        .collect();

    for arg in arguments {
        let Ok((role, subtype)) = parse_argument_label(&arg.label) else { continue };
        let sentence = sentence_of[arg.first_token];
        let mid = midpoint(arg);
        let mut best: Option<(f64, usize)> = None;
        for &ti in &order {
            let Some(ty) = typed[ti] else { continue };
            let trig = &triggers[ti];
            if sentence_of[trig.first_token] != sentence || !ty.admits(role) {
                continue;
            }
            let d = (midpoint(trig) - mid).abs();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, ti));
            }
        }
        if let Some((_, ti)) = best {
            events[ti] = events[ti].clone().with_argument(role, arg.span, subtype);
        }
    }
    let mut out: Vec<SdohEvent> = order
        .into_iter()
        .filter(|&i| typed[i].is_some())
        .map(|i| events[i].clone())
        .collect();
    for ev in &mut out {
        ev.arguments.sort_by_key(|a| (a.span, a.role));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Role, Span, Subtype};

    fn span(label: &str, first: usize, last: usize) -> TypedSpan {
        TypedSpan {
            label: label.to_string(),
            span: Span::new(first * 10, last * 10 + 5),
            first_token: first,
            last_token: last,
        }
    }

    #[test]
    fn single_event_with_argument() {
        let evs = assemble_events(&[span("Alcohol", 5, 5)], &[span("StatusTime.none", 6, 6)], &[0; 8]);
        assert_eq!(evs.len(), 1);
        assert_eq!(evs[0].event_type, EventType::Alcohol);
        assert_eq!(evs[0].subtype_of(Role::StatusTime), Some(Subtype::None));
    }

    #[test]
    fn nearest_admissible_trigger() {
        let evs = assemble_events(
            &[span("Tobacco", 2, 2), span("Alcohol", 8, 8)],
            &[span("StatusTime.past", 9, 9)],
            &[0; 10],
        );
        assert!(evs[0].arguments.is_empty());
        assert_eq!(evs[1].event_type, EventType::Alcohol);
        assert_eq!(evs[1].arguments.len(), 1);
    }

    #[test]
    fn inadmissible_role_is_dropped() {
        let evs = assemble_events(&[span("Alcohol", 0, 0)], &[span("StatusEmploy.employed", 1, 1)], &[0; 2]);
        assert_eq!(evs.len(), 1);
        assert!(evs[0].arguments.is_empty());
    }

    #[test]
    fn other_sentence_is_out_of_reach() {
        let evs = assemble_events(&[span("Alcohol", 0, 0)], &[span("StatusTime.none", 3, 3)], &[0, 0, 1, 1]);
        assert!(evs[0].arguments.is_empty());
    }

    #[test]
    fn ties_go_to_the_earlier_trigger() {
        let evs = assemble_events(
            &[span("Drug", 4, 4), span("Tobacco", 0, 0)],
            &[span("StatusTime.current", 2, 2)],
            &[0; 5],
        );
        assert_eq!(evs[0].event_type, EventType::Tobacco);
        assert_eq!(evs[0].arguments.len(), 1);
        assert!(evs[1].arguments.is_empty());
    }

    #[test]
    fn argument_less_trigger_still_yields_event() {
        let evs = assemble_events(&[span("Drug", 1, 2)], &[], &[0; 3]);
        assert_eq!(evs.len(), 1);
        assert!(evs[0].arguments.is_empty());
    }
}
