//! Rule-based answer resolution from the planted records.

use std::collections::HashSet;

use super::facts::{Clause, FactObject, Relation, SupportingFact};
use super::templates::{instantiate, Claim};
use super::{clip_records, CausalLink};
use crate::schema::{ClipBundle, QaItem};
use crate::{Error, Result};

/// Whether the facts of a clip support `claim`.
pub(crate) fn entailed(claim: &Claim, facts: &[&SupportingFact]) -> bool {
    let shots_of = |c: &Clause| -> Vec<usize> {
        facts.iter().filter(|f| f.claim() == *c).map(|f| f.shot_index).collect()
    };
    match claim {
        Claim::Single(c) => !shots_of(c).is_empty(),
        Claim::Located(c, loc) => {
            let place = Clause {
                subject: c.subject.clone(),
                relation: Relation::In,
                object: FactObject::Location(loc.clone()),
            };
            let at: HashSet<usize> = shots_of(&place).into_iter().collect();
            shots_of(c).iter().any(|s| at.contains(s))
        }
        Claim::While(a, b) | Claim::When(a, b) => {
            let sa: HashSet<usize> = shots_of(a).into_iter().collect();
            shots_of(b).iter().any(|s| sa.contains(s))
        }
        Claim::Then(a, b) => {
            let first = shots_of(a).into_iter().min();
            let last = shots_of(b).into_iter().max();
            matches!((first, last), (Some(i), Some(j)) if i < j)
        }
        // any cause that actually happened in the scene could be read as a reason
        Claim::Because(_, c) => !shots_of(c).is_empty(),
    }
}

/// Index of the one candidate that the clip's records support for this
/// question.
pub fn solve_by_oracle(qa: &QaItem, clip: &ClipBundle, facts: &[SupportingFact], causes: &[CausalLink]) -> Result<usize> {
    let unsolvable = |reason: String| Error::Unsolvable {
        qid: qa.qid.clone(),
        reason,
    };
    if qa.clip_id != clip.clip_id {
        return Err(unsolvable(format!("item refers to clip {}, got {}", qa.clip_id, clip.clip_id)));
    }
    let (f, c) = clip_records(clip, facts, causes);
    let truths: HashSet<String> = instantiate(clip, &f, &c)
        .into_iter()
        .filter(|i| i.question == qa.question)
        .map(|i| i.answer.render())
        .collect();
    if truths.is_empty() {
        return Err(unsolvable("no template of the clip produces this question".into()));
    }
    let hits: Vec<usize> = (0..qa.candidates.len()).filter(|i| truths.contains(&qa.candidates[*i])).collect();
    match hits.as_slice() {
        [i] => Ok(*i),
        [] => Err(unsolvable("no candidate is supported by the facts".into())),
        _ => Err(unsolvable(format!("{} candidates are supported by the facts", hits.len()))),
    }
}
