use std::time::Instant;

use conjunct::checkpoint::build_encoder;
use conjunct::config::Config;
use conjunct::synth::synthetic_treebank;
use conjunct::workflow::{detector_counts, identifier_accuracy, labelgen};
use conjunct_core::lexicon::PairedLexicon;
use conjunct_core::models::{train_detector, train_identifier, OptimizerKind};

pub const LEARNING_SENTENCES: usize = 50;
pub const MIN_IDENTIFIER_ACCURACY: f64 = 0.99;
pub const MIN_DETECTOR_F1: f64 = 95.0;
pub const MAX_SECONDS: f64 = 60.0;

#[derive(Debug)]
pub struct LearningOutcome {
    pub identifier_accuracy: f64,
    pub detector_f1: f64,
    pub seconds: f64,
}

impl LearningOutcome {
    pub fn passes(&self) -> bool {
        self.identifier_accuracy >= MIN_IDENTIFIER_ACCURACY
            && self.detector_f1 >= MIN_DETECTOR_F1
            && self.seconds <= MAX_SECONDS
    }
}

/// Training settings for the check: defaults, with Adam at rate 0.01.
pub fn learning_config() -> Config {
    let mut cfg = Config::default();
    cfg.train.optimizer = OptimizerKind::Adam;
    cfg.train.learning_rate = 0.01;
    cfg
}

/// Trains both models on a synthetic corpus and scores them on their own
/// training data. Runs on the calling thread only.
pub fn learning_sanity(seed: u64) -> LearningOutcome {
    let started = Instant::now();
    let text = synthetic_treebank(LEARNING_SENTENCES, seed).join("\n");
    let data = labelgen(&text, "synthetic", None, &PairedLexicon::default()).unwrap().instances;
    let cfg = learning_config();
    let encoder = build_encoder(&cfg.encoder).unwrap();
    let identifier = train_identifier(&data, encoder.clone(), &cfg.train).unwrap();
    let detector = train_detector(&data, encoder, cfg.detector.flags, &cfg.train).unwrap();
    let identifier_accuracy = identifier_accuracy(&identifier, &data).unwrap();
    let detector_f1 = detector_counts(&detector, &data).unwrap().prf().f1;
    LearningOutcome {
        identifier_accuracy,
        detector_f1,
        seconds: started.elapsed().as_secs_f64(),
    }
}
