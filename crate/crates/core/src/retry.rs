//! Exponential backoff with full jitter.
//!
//! The delay before retry `k` (1-based) is drawn uniformly from
//! `[0, min(max_delay, base * factor^(k-1))]` and then raised to the previous
//! delay of the same task, so delays never decrease across attempts.

use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Jitter {
    None,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    pub factor: f64,
    #[serde(with = "millis")]
    pub max_delay: Duration,
    pub jitter: Jitter,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(2),
            factor: 2.0,
            max_delay: Duration::from_secs(60),
            jitter: Jitter::Full,
        }
    }
}

impl RetryPolicy {
    pub fn with_max_attempts(self, max_attempts: u32) -> Self {
        RetryPolicy { max_attempts, ..self }
    }

    /// Upper bound on the delay before retry number `retry` (1-based).
    pub fn cap(&self, retry: u32) -> Duration {
        let exp = self.factor.powi(retry.saturating_sub(1) as i32);
        let secs = (self.base_delay.as_secs_f64() * exp).min(self.max_delay.as_secs_f64());
        Duration::from_secs_f64(secs.max(0.0))
    }

    /// Delay schedule for one task. `key` seeds the jitter so runs are reproducible.
    pub fn backoff(&self, seed: u64, key: &str) -> Backoff {
        Backoff {
            policy: *self,
            rng: ChaCha8Rng::seed_from_u64(seeded::draw(seed, "backoff", key)),
            retries: 0,
            last: Duration::ZERO,
        }
    }
}

pub struct Backoff {
    policy: RetryPolicy,
    rng: ChaCha8Rng,
    retries: u32,
    last: Duration,
}

impl Backoff {
    pub fn next_delay(&mut self) -> Duration {
        self.retries += 1;
        let cap = self.policy.cap(self.retries);
        let drawn = match self.policy.jitter {
            Jitter::None => cap,
            Jitter::Full => cap.mul_f64(self.rng.random::<f64>()),
        };
        self.last = drawn.max(self.last);
        self.last
    }
}

/// Blocking wait between attempts; swapped out in tests.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, delay: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, delay: Duration) {
        std::thread::sleep(delay);
    }
}

/// Records requested delays without waiting.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    pub delays: Mutex<Vec<Duration>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, delay: Duration) {
        self.delays.lock().unwrap().push(delay);
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn caps_grow_geometrically_then_saturate() {
        let p = RetryPolicy::default();
        assert_eq!(p.cap(1), Duration::from_secs(2));
        assert_eq!(p.cap(2), Duration::from_secs(4));
        assert_eq!(p.cap(4), Duration::from_secs(16));
        assert_eq!(p.cap(10), Duration::from_secs(60));
    }

    #[test]
    fn no_jitter_is_exact() {
        let p = RetryPolicy {
            jitter: Jitter::None,
            ..RetryPolicy::default()
        };
        let mut b = p.backoff(0, "t");
        let got: Vec<u64> = (0..4).map(|_| b.next_delay().as_secs()).collect();
        assert_eq!(got, vec![2, 4, 8, 16]);
    }

    #[test]
    fn jitter_is_reproducible() {
        let p = RetryPolicy::default();
        let a: Vec<Duration> = {
            let mut b = p.backoff(9, "task");
            (0..4).map(|_| b.next_delay()).collect()
        };
        let mut b = p.backoff(9, "task");
        let again: Vec<Duration> = (0..4).map(|_| b.next_delay()).collect();
        assert_eq!(a, again);
    }

    proptest! {
        #[test]
        fn delays_are_nondecreasing_and_capped(seed in any::<u64>(), key in "[a-z]{1,8}", n in 1u32..12) {
            let p = RetryPolicy::default();
            let mut b = p.backoff(seed, &key);
            let mut prev = Duration::ZERO;
            for k in 1..=n {
                let d = b.next_delay();
                prop_assert!(d >= prev);
                prop_assert!(d <= p.cap(k).max(prev));
                prev = d;
            }
        }
    }
}
