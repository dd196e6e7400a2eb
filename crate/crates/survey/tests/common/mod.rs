#![allow(dead_code)]

use std::sync::Arc;

use cvm_core::uncertainty::draw_wtp;
use cvm_core::SpikeParams;
use cvm_survey::flow::Control;
use cvm_survey::{Answer, Phase, QuestionPayload, ResponseStore, ServiceConfig, SurveyDefinition, SurveyService};
use rand::Rng;

pub fn service(dir: &std::path::Path, seed: u64) -> SurveyService {
    let config = ServiceConfig {
        seed,
        export_token: Some("secret".into()),
        ..ServiceConfig::default()
    };
    SurveyService::new(SurveyDefinition::bundled(), ResponseStore::open(dir).unwrap(), config)
}

pub fn shared(dir: &std::path::Path, seed: u64) -> Arc<SurveyService> {
    Arc::new(service(dir, seed))
}

/// Truthful answer for a respondent with latent WTP `w`; non-WTP items are
/// drawn from `rng`.
pub fn respond<R: Rng>(q: &QuestionPayload, w: f64, rng: &mut R) -> Answer {
    let q = &q.question;
    match q.phase {
        Phase::Intro => Answer::Acknowledge,
        Phase::Bid1 | Phase::Bid2 => Answer::YesNo {
            yes: w >= f64::from(q.bid.unwrap()),
        },
        Phase::SpikeQ => Answer::YesNo { yes: w > 0.0 },
        Phase::ZeroReason | Phase::Covariates if q.control != Control::Numeric => {
            q.options[rng.random_range(0..q.options.len())].answer
        }
        Phase::Covariates => Answer::Value {
            value: rng.random_range(q.min.unwrap() as i64..=q.max.unwrap() as i64) as f64,
        },
        _ => unreachable!("no question once done"),
    }
}

/// WTP drawn from the spike model.
pub fn latent_wtp<R: Rng>(truth: &SpikeParams<f64>, rng: &mut R) -> f64 {
    draw_wtp(truth, &[], rng).unwrap()
}
