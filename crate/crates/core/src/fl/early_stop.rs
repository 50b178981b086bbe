/// Outcome of observing one validation score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    /// The score strictly beat every earlier one; checkpoint now.
    pub improved: bool,
    pub stop: bool,
}

/// Stops after `patience` consecutive evaluations without strict
/// improvement. NaN never counts as an improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<(f64, usize)>,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, stale: 0 }
    }

    /// Records `score` for evaluation number `tag` (any caller-chosen index).
    pub fn observe(&mut self, score: f64, tag: usize) -> StopDecision {
        let improved = match self.best {
            None => !score.is_nan(),
            Some((b, _)) => score > b,
        };
        if improved {
            self.best = Some((score, tag));
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        StopDecision { improved, stop: self.stale >= self.patience }
    }

    /// Best score and its tag.
    pub fn best(&self) -> Option<(f64, usize)> {
        self.best
    }
}

/// Index of the evaluation at which a run with these scores stops, if any.
pub fn early_stop(scores: &[f64], patience: usize) -> Option<usize> {
    let mut s = EarlyStopper::new(patience);
    scores.iter().enumerate().find_map(|(i, &x)| s.observe(x, i).stop.then_some(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_stale_rounds() {
        let scores = [0.5, 0.6, 0.6, 0.59, 0.6, 0.55, 0.58];
        // Best at index 1; indices 2..=6 are five stale evaluations.
        assert_eq!(early_stop(&scores, 5), Some(6));
        assert_eq!(early_stop(&scores[..6], 5), None);
        assert_eq!(early_stop(&scores, 1), Some(2));
    }

    #[test]
    fn strict_improvement_resets() {
        let mut s = EarlyStopper::new(2);
        assert!(s.observe(0.1, 0).improved);
        assert!(!s.observe(0.1, 1).improved);
        assert!(s.observe(0.2, 2).improved);
        assert!(!s.observe(0.2, 3).stop);
        assert!(s.observe(0.0, 4).stop);
        assert_eq!(s.best(), Some((0.2, 2)));
    }

    #[test]
    fn nan_is_never_best() {
        let mut s = EarlyStopper::new(3);
        assert!(!s.observe(f64::NAN, 0).improved);
        assert!(s.observe(0.3, 1).improved);
        assert!(!s.observe(f64::NAN, 2).improved);
        assert_eq!(s.best(), Some((0.3, 1)));
    }
}
