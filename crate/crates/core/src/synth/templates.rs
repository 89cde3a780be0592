//! Question templates per difficulty, structured answers, and the
//! perturbations used to build distractors.

use rand::seq::SliceRandom;
use rand::Rng;

use super::facts::{words, CausalLink, Clause, FactObject, Relation, SupportingFact};
use super::lexicon::{self, ObjectKind, VERBS};
use crate::schema::{detokenize, Behavior, CharacterName, ClipBundle, Emotion, Granularity, Roster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    // difficulty 1: one fact on a shot
    WhoActedOnThing,
    WhatDidVerb,
    WhatDidDo,
    WhoDidVerbPerson,
    WhoActedOnPerson,
    WhoActed,
    WhoFelt,
    WhatDidFeel,
    WhereWas,
    // difficulty 2: two facts on a shot
    WhereDid,
    WhereFelt,
    WhoWhile,
    FeelWhen,
    // difficulty 3: two ordered facts on a scene
    FeelingChange,
    DoAfterSelf,
    DoAfterOther,
    FeelAfter,
    // difficulty 4: a causal link on a scene
    WhyFeel,
    WhyAct,
}

impl TemplateId {
    pub fn difficulty(self) -> u8 {
        use TemplateId::*;
        match self {
            WhoActedOnThing | WhatDidVerb | WhatDidDo | WhoDidVerbPerson | WhoActedOnPerson | WhoActed | WhoFelt
            | WhatDidFeel | WhereWas => 1,
            WhereDid | WhereFelt | WhoWhile | FeelWhen => 2,
            FeelingChange | DoAfterSelf | DoAfterOther | FeelAfter => 3,
            WhyFeel | WhyAct => 4,
        }
    }
}

/// Structured answer; rendering it gives the candidate sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Claim {
    Single(Clause),
    Located(Clause, String),
    While(Clause, Clause),
    When(Clause, Clause),
    Then(Clause, Clause),
    Because(Clause, Clause),
}

impl Claim {
    pub fn render(&self) -> String {
        let mut w: Vec<String> = match self {
            Claim::Single(c) => c.words(),
            Claim::Located(c, loc) => {
                let mut w = c.words();
                w.extend(["in".to_string(), "the".to_string(), loc.clone()]);
                w
            }
            Claim::While(a, b) => join(a, "while", b),
            Claim::When(a, b) => join(a, "when", b),
            Claim::Then(a, b) => {
                let mut w = a.words();
                w.extend(["and".to_string(), "then".to_string()]);
                w.extend(b.words());
                w
            }
            Claim::Because(a, b) => join(a, "because", b),
        };
        w.push(".".into());
        detokenize(&w)
    }

    /// Every character named by the claim.
    pub fn characters(&self) -> Vec<&CharacterName> {
        let mut out = Vec::new();
        for c in self.clauses() {
            out.push(&c.subject);
            if let FactObject::Character(o) = &c.object {
                out.push(o);
            }
        }
        out
    }

    fn clauses(&self) -> Vec<&Clause> {
        match self {
            Claim::Single(c) | Claim::Located(c, _) => vec![c],
            Claim::While(a, b) | Claim::When(a, b) | Claim::Then(a, b) | Claim::Because(a, b) => vec![a, b],
        }
    }
}

fn join(a: &Clause, word: &str, b: &Clause) -> Vec<String> {
    let mut w = a.words();
    w.push(word.to_string());
    w.extend(b.words());
    w
}

/// One template applied to concrete facts of a clip.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    pub template: TemplateId,
    pub question: String,
    pub answer: Claim,
}

impl Instance {
    pub fn difficulty(&self) -> u8 {
        self.template.difficulty()
    }
}

fn question(mut w: Vec<String>) -> String {
    w.push("?".into());
    detokenize(&w)
}

fn s(x: &str) -> String {
    x.to_string()
}

fn verb_base(c: &Clause) -> Vec<String> {
    match c.relation {
        Relation::Act(b) => lexicon::verb(b).map(|v| words(v.base)).unwrap_or_default(),
        _ => vec![],
    }
}

/// Difficulty-1 instances for one fact.
fn single_fact(f: &Clause) -> Vec<Instance> {
    use TemplateId::*;
    let mut out = Vec::new();
    let mk = |t, q: Vec<String>| Instance {
        template: t,
        question: question(q),
        answer: Claim::Single(f.clone()),
    };
    let subj = f.subject.0.clone();
    match (&f.relation, &f.object) {
        (Relation::Act(_), FactObject::Thing(_)) => {
            let mut q = vec![s("Who")];
            q.extend(f.predicate_words());
            out.push(mk(WhoActedOnThing, q));
            let mut q = vec![s("What"), s("did"), subj.clone()];
            q.extend(verb_base(f));
            out.push(mk(WhatDidVerb, q));
        }
        (Relation::Act(_), FactObject::Character(_)) => {
            let mut q = vec![s("Who"), s("did"), subj.clone()];
            q.extend(verb_base(f));
            out.push(mk(WhoDidVerbPerson, q));
            let mut q = vec![s("Who")];
            q.extend(f.predicate_words());
            out.push(mk(WhoActedOnPerson, q));
        }
        (Relation::Act(_), _) => {
            let mut q = vec![s("Who")];
            q.extend(f.predicate_words());
            out.push(mk(WhoActed, q));
        }
        (Relation::Feel(e), _) => {
            out.push(mk(WhoFelt, vec![s("Who"), s("felt"), s(e.label())]));
            out.push(mk(WhatDidFeel, vec![s("What"), s("did"), subj.clone(), s("feel")]));
        }
        (Relation::In, _) => out.push(mk(WhereWas, vec![s("Where"), s("was"), subj.clone()])),
    }
    if matches!(f.relation, Relation::Act(_)) {
        out.push(mk(WhatDidDo, vec![s("What"), s("did"), subj, s("do")]));
    }
    out
}

/// Difficulty-2 instances for an ordered pair of facts from the same shot.
fn fact_pair(a: &Clause, b: &Clause) -> Vec<Instance> {
    use TemplateId::*;
    let mut out = Vec::new();
    let same = a.subject == b.subject;
    match (&a.relation, &b.relation) {
        (Relation::Act(_), Relation::In) if same => {
            let FactObject::Location(loc) = &b.object else { return out };
            let mut q = vec![s("Where"), s("did"), a.subject.0.clone()];
            q.extend(a.base_predicate_words());
            out.push(Instance {
                template: WhereDid,
                question: question(q),
                answer: Claim::Located(a.clone(), loc.clone()),
            });
        }
        (Relation::Feel(e), Relation::In) if same => {
            let FactObject::Location(loc) = &b.object else { return out };
            out.push(Instance {
                template: WhereFelt,
                question: question(vec![s("Where"), s("did"), a.subject.0.clone(), s("feel"), s(e.label())]),
                answer: Claim::Located(a.clone(), loc.clone()),
            });
        }
        (Relation::Act(_), Relation::Act(_)) if !same => {
            let mut q = vec![s("Who")];
            q.extend(a.predicate_words());
            q.push(s("while"));
            q.extend(b.words());
            out.push(Instance {
                template: WhoWhile,
                question: question(q),
                answer: Claim::While(a.clone(), b.clone()),
            });
        }
        (Relation::Feel(_), Relation::Act(_)) if same => {
            let mut q = vec![s("What"), s("did"), a.subject.0.clone(), s("feel"), s("when")];
            q.extend(b.words());
            out.push(Instance {
                template: FeelWhen,
                question: question(q),
                answer: Claim::When(a.clone(), b.clone()),
            });
        }
        _ => {}
    }
    out
}

/// Difficulty-3 instances for a fact `a` in an earlier shot than fact `b`.
fn ordered_pair(a: &Clause, b: &Clause) -> Vec<Instance> {
    use TemplateId::*;
    let mut out = Vec::new();
    let same = a.subject == b.subject;
    let then = Claim::Then(a.clone(), b.clone());
    match (&a.relation, &b.relation) {
        (Relation::Feel(e1), Relation::Feel(e2)) if same && e1 != e2 => out.push(Instance {
            template: FeelingChange,
            question: question(vec![s("How"), s("did"), s("the"), s("feeling"), s("of"), a.subject.0.clone(), s("change")]),
            answer: then,
        }),
        (Relation::Act(_), Relation::Act(_)) => {
            let mut q = vec![s("What"), s("did"), b.subject.0.clone(), s("do"), s("after")];
            q.extend(a.words());
            out.push(Instance {
                template: if same { DoAfterSelf } else { DoAfterOther },
                question: question(q),
                answer: then,
            });
        }
        (Relation::Act(_), Relation::Feel(_)) if same => {
            let mut q = vec![s("How"), s("did"), a.subject.0.clone(), s("feel"), s("after")];
            q.extend(a.words());
            out.push(Instance {
                template: FeelAfter,
                question: question(q),
                answer: then,
            });
        }
        _ => {}
    }
    out
}

fn causal(link: &CausalLink) -> Vec<Instance> {
    let effect = link.effect.claim();
    let cause = link.cause.claim();
    let mut q = vec![s("Why"), s("did"), effect.subject.0.clone()];
    let template = match effect.relation {
        Relation::Feel(_) => TemplateId::WhyFeel,
        _ => TemplateId::WhyAct,
    };
    q.extend(effect.base_predicate_words());
    vec![Instance {
        template,
        question: question(q),
        answer: Claim::Because(effect, cause),
    }]
}

/// All template instances supported by a clip's facts and causal links.
/// Shot clips yield difficulties 1–2, scene clips 3–4.
pub fn instantiate(clip: &ClipBundle, facts: &[&SupportingFact], causes: &[&CausalLink]) -> Vec<Instance> {
    let mut out = Vec::new();
    match clip.granularity {
        Granularity::Shot => {
            for f in facts {
                out.extend(single_fact(&f.claim()));
            }
            for a in facts {
                for b in facts {
                    if a != b {
                        out.extend(fact_pair(&a.claim(), &b.claim()));
                    }
                }
            }
        }
        Granularity::Scene => {
            for a in facts {
                for b in facts {
                    if a.shot_index < b.shot_index {
                        out.extend(ordered_pair(&a.claim(), &b.claim()));
                    }
                }
            }
            for link in causes {
                out.extend(causal(link));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    Character,
    Relation,
    Object,
}

/// A random variant of `claim` with one slot substituted, or `None` when the
/// slot does not exist for this claim.
pub fn perturb<R: Rng>(claim: &Claim, kind: Perturbation, roster: &Roster, rng: &mut R) -> Option<Claim> {
    use Perturbation::*;
    match (claim, kind) {
        (Claim::Single(c), Character) => Some(Claim::Single(swap_subject(c, &[], roster, rng)?)),
        (Claim::Single(c), Relation) => Some(Claim::Single(swap_relation(c, roster, rng)?)),
        (Claim::Single(c), Object) => Some(Claim::Single(swap_object(c, roster, rng)?)),

        (Claim::Located(c, loc), Character) => Some(Claim::Located(swap_subject(c, &[], roster, rng)?, loc.clone())),
        (Claim::Located(c, loc), Relation) => Some(Claim::Located(swap_relation(c, roster, rng)?, loc.clone())),
        (Claim::Located(c, loc), Object) => {
            let other = pick_other(lexicon::LOCATIONS, loc, rng)?;
            Some(Claim::Located(c.clone(), other))
        }

        (Claim::While(a, b), Character) => {
            Some(Claim::While(swap_subject(a, &[&b.subject], roster, rng)?, b.clone()))
        }
        (Claim::While(a, b), Relation) => Some(Claim::While(swap_relation(a, roster, rng)?, b.clone())),
        (Claim::While(a, b), Object) => Some(Claim::While(swap_object(a, roster, rng)?, b.clone())),

        (Claim::When(f, a), Character) => {
            let x = other_character(&f.subject, &[], roster, rng)?;
            Some(Claim::When(with_subject(f, &x), with_subject(a, &x)))
        }
        (Claim::When(f, a), Relation) => Some(Claim::When(swap_relation(f, roster, rng)?, a.clone())),
        (Claim::When(f, a), Object) => Some(Claim::When(f.clone(), swap_object(a, roster, rng)?)),

        (Claim::Then(a, b), Character) => {
            if a.subject == b.subject {
                let x = other_character(&a.subject, &[], roster, rng)?;
                Some(Claim::Then(with_subject(a, &x), with_subject(b, &x)))
            } else {
                Some(Claim::Then(a.clone(), swap_subject(b, &[&a.subject], roster, rng)?))
            }
        }
        (Claim::Then(a, b), Relation) => {
            if a != b && rng.gen_bool(0.5) {
                Some(Claim::Then(b.clone(), a.clone()))
            } else {
                Some(Claim::Then(a.clone(), swap_relation(b, roster, rng)?))
            }
        }
        (Claim::Then(a, b), Object) => Some(Claim::Then(a.clone(), swap_object(b, roster, rng)?)),

        (Claim::Because(e, c), Character) => {
            Some(Claim::Because(e.clone(), swap_subject(c, &[&e.subject], roster, rng)?))
        }
        (Claim::Because(e, c), Relation) => Some(Claim::Because(e.clone(), swap_relation(c, roster, rng)?)),
        (Claim::Because(e, c), Object) => Some(Claim::Because(e.clone(), swap_object(c, roster, rng)?)),
    }
}

fn with_subject(c: &Clause, x: &CharacterName) -> Clause {
    Clause {
        subject: x.clone(),
        ..c.clone()
    }
}

fn other_character<R: Rng>(
    current: &CharacterName,
    avoid: &[&CharacterName],
    roster: &Roster,
    rng: &mut R,
) -> Option<CharacterName> {
    let pool: Vec<&CharacterName> = roster
        .names()
        .iter()
        .filter(|n| *n != current && !avoid.contains(n))
        .collect();
    pool.choose(rng).map(|n| (*n).clone())
}

fn swap_subject<R: Rng>(c: &Clause, avoid: &[&CharacterName], roster: &Roster, rng: &mut R) -> Option<Clause> {
    let mut avoid = avoid.to_vec();
    if let FactObject::Character(o) = &c.object {
        avoid.push(o);
    }
    let x = other_character(&c.subject, &avoid, roster, rng)?;
    Some(with_subject(c, &x))
}

fn swap_relation<R: Rng>(c: &Clause, roster: &Roster, rng: &mut R) -> Option<Clause> {
    match c.relation {
        Relation::Act(b) => {
            let v = VERBS.iter().filter(|v| v.label != b.label()).collect::<Vec<_>>();
            let v = v.choose(rng)?;
            let nb: Behavior = v.label.parse().ok()?;
            let object = if v.kind == c.object_kind() {
                c.object.clone()
            } else {
                match v.kind {
                    ObjectKind::None => FactObject::None,
                    ObjectKind::Person => FactObject::Character(other_character(&c.subject, &[], roster, rng)?),
                    k => FactObject::Thing(lexicon::things(k).choose(rng)?.to_string()),
                }
            };
            Some(Clause {
                subject: c.subject.clone(),
                relation: Relation::Act(nb),
                object,
            })
        }
        Relation::Feel(e) => Some(Clause {
            relation: Relation::Feel(other_emotion(e, rng)),
            ..c.clone()
        }),
        Relation::In => None,
    }
}

fn swap_object<R: Rng>(c: &Clause, roster: &Roster, rng: &mut R) -> Option<Clause> {
    let object = match (&c.object, c.relation) {
        (FactObject::Thing(t), _) => FactObject::Thing(pick_other(lexicon::things(c.object_kind()), t, rng)?),
        (FactObject::Character(o), _) => FactObject::Character(other_character(o, &[&c.subject], roster, rng)?),
        (FactObject::Location(l), _) => FactObject::Location(pick_other(lexicon::LOCATIONS, l, rng)?),
        (FactObject::None, Relation::Feel(e)) => {
            return Some(Clause {
                relation: Relation::Feel(other_emotion(e, rng)),
                ..c.clone()
            })
        }
        (FactObject::None, _) => return None,
    };
    Some(Clause {
        object,
        ..c.clone()
    })
}

fn other_emotion<R: Rng>(e: Emotion, rng: &mut R) -> Emotion {
    let pool: Vec<Emotion> = Emotion::ALL[..6].iter().copied().filter(|x| *x != e).collect();
    *pool.choose(rng).expect("six emotions")
}

fn pick_other<R: Rng>(pool: &[&str], current: &str, rng: &mut R) -> Option<String> {
    let rest: Vec<&&str> = pool.iter().filter(|p| **p != current).collect();
    rest.choose(rng).map(|s| s.to_string())
}
