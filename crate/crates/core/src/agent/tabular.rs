use super::QFunction;
use crate::error::{Error, Result};

/// Lookup-table action values over integer states, fitted by a step of size
/// `alpha` towards each target.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    num_actions: usize,
    alpha: f64,
    table: Vec<f64>,
}

impl TabularQ {
    pub fn new(num_states: usize, num_actions: usize, alpha: f64) -> Self {
        TabularQ {
            num_actions,
            alpha,
            table: vec![0.0; num_states * num_actions],
        }
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.table[state * self.num_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.table[state * self.num_actions + action] = value;
    }

    pub fn num_states(&self) -> usize {
        self.table.len() / self.num_actions.max(1)
    }

    fn check(&self, state: usize) -> Result<()> {
        if state >= self.num_states() {
            return Err(Error::OutOfRange {
                what: "state",
                value: state.to_string(),
                range: format!("[0, {})", self.num_states()),
            });
        }
        Ok(())
    }
}

impl QFunction<usize> for TabularQ {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn q_values(&self, state: &usize) -> Result<Vec<f64>> {
        self.check(*state)?;
        let o = state * self.num_actions;
        Ok(self.table[o..o + self.num_actions].to_vec())
    }

    fn fit(&mut self, states: &[&usize], actions: &[usize], targets: &[f64]) -> Result<f64> {
        let mut loss = 0.0;
        for ((&&s, &a), &t) in states.iter().zip(actions).zip(targets) {
            self.check(s)?;
            let q = self.get(s, a);
            loss += (t - q) * (t - q);
            self.set(s, a, q + self.alpha * (t - q));
        }
        Ok(loss / states.len().max(1) as f64)
    }
}
