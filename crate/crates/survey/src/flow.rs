//! Branching questionnaire logic, kept free of I/O so it can be enumerated
//! exhaustively.

use std::collections::BTreeMap;

use cvm_core::data::{RespondentRecord, ZeroReason};
use cvm_core::{Arm, BidPair, Outcome};
use serde::{Deserialize, Serialize};

use crate::definition::{IntroBlock, ItemKind, SurveyDefinition, LIKERT_LABELS};
use crate::error::{Result, SurveyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Intro,
    Bid1,
    Bid2,
    SpikeQ,
    ZeroReason,
    Covariates,
    Done,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Intro,
        Phase::Bid1,
        Phase::Bid2,
        Phase::SpikeQ,
        Phase::ZeroReason,
        Phase::Covariates,
        Phase::Done,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Answer {
    Acknowledge,
    YesNo { yes: bool },
    Reason { code: ZeroReason },
    Value { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Acknowledge,
    YesNo,
    SingleChoice,
    Likert,
    Numeric,
}

/// One selectable answer, carrying the exact payload to submit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: String,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub phase: Phase,
    pub control: Control,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bid: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub intro: Vec<IntroBlock>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub options: Vec<AnswerOption>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Question {
    fn new(phase: Phase, control: Control, prompt: String) -> Self {
        Question {
            phase,
            control,
            prompt,
            bid: None,
            item: None,
            intro: Vec::new(),
            options: Vec::new(),
            min: None,
            max: None,
        }
    }
}

fn yes_no() -> Vec<AnswerOption> {
    [("Yes", true), ("No", false)]
        .into_iter()
        .map(|(label, yes)| AnswerOption {
            label: label.into(),
            answer: Answer::YesNo { yes },
        })
        .collect()
}

/// Everything a respondent has said so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub arm: Arm,
    pub bids: BidPair,
    pub phase: Phase,
    /// Answers to the one or two bid questions, in order.
    pub bid_answers: Vec<bool>,
    pub spike_answer: Option<bool>,
    pub outcome: Option<Outcome>,
    pub zero_reason: Option<ZeroReason>,
    /// Index of the covariate item being asked.
    pub item: usize,
    pub covariates: BTreeMap<String, f64>,
    /// Number of answers accepted so far.
    pub seq: u64,
}

impl SessionState {
    pub fn new(arm: Arm, bids: BidPair) -> Self {
        SessionState {
            arm,
            bids,
            phase: Phase::Intro,
            bid_answers: Vec::new(),
            spike_answer: None,
            outcome: None,
            zero_reason: None,
            item: 0,
            covariates: BTreeMap::new(),
            seq: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// Bid amount shown in the current bid phase.
    pub fn current_bid(&self) -> Option<u32> {
        let first = self.bids.initial(self.arm);
        let second = if first == self.bids.upper() {
            self.bids.lower()
        } else {
            self.bids.upper()
        };
        match self.phase {
            Phase::Bid1 => Some(first),
            Phase::Bid2 => Some(second),
            _ => None,
        }
    }

    pub fn question(&self, def: &SurveyDefinition) -> Result<Question> {
        let q = match self.phase {
            Phase::Intro => {
                let mut q = Question::new(Phase::Intro, Control::Acknowledge, def.title.clone());
                q.intro = def.intro.clone();
                q.options = vec![AnswerOption {
                    label: "Continue".into(),
                    answer: Answer::Acknowledge,
                }];
                q
            }
            Phase::Bid1 | Phase::Bid2 => {
                let bid = self.current_bid().expect("bid phase");
                let mut q = Question::new(self.phase, Control::YesNo, def.bid_prompt(bid));
                q.bid = Some(bid);
                q.options = yes_no();
                q
            }
            Phase::SpikeQ => {
                let mut q = Question::new(Phase::SpikeQ, Control::YesNo, def.spike_question.clone());
                q.bid = Some(1);
                q.options = yes_no();
                q
            }
            Phase::ZeroReason => {
                let mut q = Question::new(Phase::ZeroReason, Control::SingleChoice, def.zero_reason_prompt.clone());
                q.options = def
                    .zero_reason_options
                    .iter()
                    .map(|o| AnswerOption {
                        label: o.label.clone(),
                        answer: Answer::Reason { code: o.code },
                    })
                    .collect();
                q
            }
            Phase::Covariates => {
                let item = &def.covariate_items[self.item];
                let control = match item.kind {
                    ItemKind::Likert => Control::Likert,
                    ItemKind::Categorical { .. } => Control::SingleChoice,
                    ItemKind::Numeric { .. } => Control::Numeric,
                };
                let mut q = Question::new(Phase::Covariates, control, item.prompt.clone());
                q.item = Some(item.id.clone());
                match &item.kind {
                    ItemKind::Likert => {
                        q.options = LIKERT_LABELS
                            .iter()
                            .zip(1..)
                            .map(|(l, v)| AnswerOption {
                                label: (*l).into(),
                                answer: Answer::Value { value: f64::from(v) },
                            })
                            .collect();
                    }
                    ItemKind::Categorical { options } => {
                        q.options = options
                            .iter()
                            .map(|o| AnswerOption {
                                label: o.label.clone(),
                                answer: Answer::Value { value: o.code },
                            })
                            .collect();
                    }
                    ItemKind::Numeric { min, max } => {
                        q.min = Some(*min);
                        q.max = Some(*max);
                    }
                }
                q
            }
            Phase::Done => return Err(SurveyError::Done),
        };
        Ok(q)
    }

    /// Applies one answer, returning the successor state.
    pub fn apply(&self, def: &SurveyDefinition, answer: &Answer) -> Result<SessionState> {
        let mut next = self.clone();
        let mismatch =
            || SurveyError::Validation(format!("answer {answer:?} does not fit the {:?} question", self.phase));
        match (self.phase, *answer) {
            (Phase::Done, _) => return Err(SurveyError::Done),
            (Phase::Intro, Answer::Acknowledge) => next.phase = Phase::Bid1,
            (Phase::Bid1, Answer::YesNo { yes }) => {
                next.bid_answers.push(yes);
                match (self.arm, yes) {
                    (Arm::UpperFirst, true) => next.settle(def, Outcome::UY),
                    (Arm::UpperFirst, false) | (Arm::LowerFirst, true) => next.phase = Phase::Bid2,
                    (Arm::LowerFirst, false) => next.phase = Phase::SpikeQ,
                }
            }
            (Phase::Bid2, Answer::YesNo { yes }) => {
                next.bid_answers.push(yes);
                match (self.arm, yes) {
                    (Arm::UpperFirst, true) => next.settle(def, Outcome::UNY),
                    (Arm::UpperFirst, false) => next.phase = Phase::SpikeQ,
                    (Arm::LowerFirst, true) => next.settle(def, Outcome::LYY),
                    (Arm::LowerFirst, false) => next.settle(def, Outcome::LYN),
                }
            }
            (Phase::SpikeQ, Answer::YesNo { yes }) => {
                next.spike_answer = Some(yes);
                let outcome = match (self.arm, yes) {
                    (Arm::UpperFirst, true) => Outcome::UNNY,
                    (Arm::UpperFirst, false) => Outcome::UNNN,
                    (Arm::LowerFirst, true) => Outcome::LNY,
                    (Arm::LowerFirst, false) => Outcome::LNN,
                };
                next.settle(def, outcome);
            }
            (Phase::ZeroReason, Answer::Reason { code }) => {
                if !def.zero_reason_options.iter().any(|o| o.code == code) {
                    return Err(SurveyError::Validation(format!("`{code}` is not an offered reason")));
                }
                next.zero_reason = Some(code);
                next.enter_covariates(def);
            }
            (Phase::Covariates, Answer::Value { value }) => {
                let item = &def.covariate_items[self.item];
                next.covariates.insert(item.id.clone(), item.accept(value)?);
                next.item += 1;
                if next.item == def.covariate_items.len() {
                    next.phase = Phase::Done;
                }
            }
            _ => return Err(mismatch()),
        }
        next.seq += 1;
        Ok(next)
    }

    fn settle(&mut self, def: &SurveyDefinition, outcome: Outcome) {
        self.outcome = Some(outcome);
        if outcome.is_zero() {
            self.phase = Phase::ZeroReason;
        } else {
            self.enter_covariates(def);
        }
    }

    fn enter_covariates(&mut self, def: &SurveyDefinition) {
        self.item = 0;
        self.phase = if def.covariate_items.is_empty() {
            Phase::Done
        } else {
            Phase::Covariates
        };
    }

    /// The completed respondent row; only available once the session is done.
    pub fn record(&self, id: &str) -> Result<RespondentRecord> {
        let outcome = match (self.phase, self.outcome) {
            (Phase::Done, Some(o)) => o,
            _ => return Err(SurveyError::Conflict("session is not complete".into())),
        };
        Ok(RespondentRecord::new(
            id,
            self.arm,
            self.bids,
            outcome,
            self.covariates.clone(),
            self.zero_reason,
        )?)
    }
}
