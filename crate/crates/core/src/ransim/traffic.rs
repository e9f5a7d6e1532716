use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalModel {
    /// Constant bit rate, exact to the byte over time.
    #[default]
    Cbr,
    /// Poisson-distributed bytes per slot with the CBR mean.
    Poisson,
}

/// Downlink traffic offered to one UE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficSource {
    pub rate_bps: u64,
    #[serde(default)]
    pub arrival: ArrivalModel,
}

impl TrafficSource {
    pub fn cbr(rate_bps: u64) -> Self {
        TrafficSource {
            rate_bps,
            arrival: ArrivalModel::Cbr,
        }
    }
}

/// Per-UE arrival process state.
#[derive(Debug, Clone, Default)]
pub(crate) struct ArrivalState {
    /// Residual bit-microseconds not yet turned into whole bytes.
    credit: u128,
}

const BYTE_MICROS: u128 = 8 * 1_000_000;

impl ArrivalState {
    pub(crate) fn arrivals<R: Rng>(&mut self, source: &TrafficSource, slot_us: u64, rng: &mut R) -> u64 {
        if source.rate_bps == 0 {
            return 0;
        }
        match source.arrival {
            ArrivalModel::Cbr => {
                self.credit += source.rate_bps as u128 * slot_us as u128;
                let bytes = self.credit / BYTE_MICROS;
                self.credit %= BYTE_MICROS;
                bytes as u64
            }
            ArrivalModel::Poisson => {
                let mean = source.rate_bps as f64 * slot_us as f64 / BYTE_MICROS as f64;
                match Poisson::new(mean) {
                    Ok(d) => d.sample(rng) as u64,
                    Err(_) => 0,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn cbr_one_megabit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut st = ArrivalState::default();
        let src = TrafficSource::cbr(1_000_000);
        for _ in 0..100 {
            assert_eq!(st.arrivals(&src, 1000, &mut rng), 125);
        }
        assert_eq!(st.arrivals(&TrafficSource::cbr(0), 1000, &mut rng), 0);
    }

    #[test]
    fn cbr_fractional_rates_are_exact_over_time() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut st = ArrivalState::default();
        let src = TrafficSource::cbr(50_000);
        let total: u64 = (0..1000).map(|_| st.arrivals(&src, 1000, &mut rng)).sum();
        assert_eq!(total, 6250);
    }

    #[test]
    fn poisson_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut st = ArrivalState::default();
        let src = TrafficSource {
            rate_bps: 1_000_000,
            arrival: ArrivalModel::Poisson,
        };
        let n = 20_000;
        let total: u64 = (0..n).map(|_| st.arrivals(&src, 1000, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 125.0).abs() < 1.0, "{mean}");
    }
}
