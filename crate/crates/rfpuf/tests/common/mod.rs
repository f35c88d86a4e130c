use rfpuf::ExperimentConfig;

/// A config small enough to run in well under a second.
pub fn tiny(n_tx: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.population.n_tx = n_tx;
    cfg.training.frames_per_device = 2;
    cfg.evaluation.frames_per_device = 1;
    cfg.evaluation.challenge_replays = 2;
    cfg.frame.symbols_per_frame = 256;
    cfg.frame.fft_size = 1024;
    cfg.training.mlp.epochs = 5;
    cfg.training.mlp.augment_copies = 1;
    cfg
}
