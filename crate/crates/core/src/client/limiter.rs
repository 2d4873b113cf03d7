use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::Sleeper;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// Wait before attempt `failed_attempt + 1`: `base * 2^(failed_attempt - 1)`.
    pub fn backoff(&self, failed_attempt: u32) -> Duration {
        let exp = failed_attempt.saturating_sub(1).min(16);
        self.base_backoff.saturating_mul(1u32 << exp)
    }
}

const WINDOW: Duration = Duration::from_secs(60);

#[derive(Debug, Default)]
struct Window {
    // (time, tokens charged)
    events: VecDeque<(Instant, u64)>,
}

impl Window {
    fn prune(&mut self, now: Instant) {
        while let Some(&(t, _)) = self.events.front() {
            if now.duration_since(t) >= WINDOW {
                self.events.pop_front();
            } else {
                break;
            }
        }
    }

    fn tokens(&self) -> u64 {
        self.events.iter().map(|&(_, t)| t).sum()
    }
}

/// Sliding one-minute window over requests and tokens. Tokens are charged
/// up front at the request's `max_tokens` and corrected by [`settle`] once the
/// real usage is known.
///
/// [`settle`]: RateLimiter::settle
#[derive(Debug)]
pub struct RateLimiter {
    requests_per_minute: Option<u32>,
    tokens_per_minute: Option<u64>,
    window: Mutex<Window>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: Option<u32>, tokens_per_minute: Option<u64>) -> Self {
        Self {
            requests_per_minute,
            tokens_per_minute,
            window: Mutex::new(Window::default()),
        }
    }

    /// How long a request charging `tokens` must wait at `now`; `None` when it
    /// may go immediately.
    pub fn delay_at(&self, now: Instant, tokens: u64) -> Option<Duration> {
        let mut window = self.window.lock().unwrap();
        window.prune(now);
        let oldest = window.events.front().map(|&(t, _)| t)?;
        let wait = WINDOW.saturating_sub(now.duration_since(oldest));
        if let Some(rpm) = self.requests_per_minute {
            if window.events.len() as u64 >= u64::from(rpm) {
                return Some(wait);
            }
        }
        if let Some(tpm) = self.tokens_per_minute {
            if window.tokens() + tokens > tpm {
                return Some(wait);
            }
        }
        None
    }

    pub fn acquire(&self, tokens: u64, sleeper: &dyn Sleeper) {
        loop {
            let now = Instant::now();
            match self.delay_at(now, tokens) {
                Some(wait) if !wait.is_zero() => sleeper.sleep(wait),
                Some(_) => std::thread::yield_now(),
                None => {
                    let mut window = self.window.lock().unwrap();
                    window.events.push_back((now, tokens));
                    return;
                }
            }
        }
    }

    pub fn settle(&self, charged: u64, actual: u64) {
        let mut window = self.window.lock().unwrap();
        if let Some(entry) = window.events.iter_mut().rev().find(|(_, t)| *t == charged) {
            entry.1 = actual;
        }
    }

    #[cfg(test)]
    fn push(&self, at: Instant, tokens: u64) {
        self.window.lock().unwrap().events.push_back((at, tokens));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_is_exponential() {
        let policy = RetryPolicy::default();
        assert_eq!(policy.backoff(1), Duration::from_secs(1));
        assert_eq!(policy.backoff(2), Duration::from_secs(2));
        assert_eq!(policy.backoff(3), Duration::from_secs(4));
    }

    #[test]
    fn backoff_monotone() {
        let policy = RetryPolicy {
            max_attempts: 40,
            base_backoff: Duration::from_millis(250),
        };
        let waits: Vec<_> = (1..40).map(|a| policy.backoff(a)).collect();
        assert!(waits.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn request_budget_blocks_until_window_rolls() {
        let limiter = RateLimiter::new(Some(2), None);
        let t0 = Instant::now();
        assert_eq!(limiter.delay_at(t0, 0), None);
        limiter.push(t0, 0);
        limiter.push(t0, 0);
        let wait = limiter.delay_at(t0 + Duration::from_secs(10), 0).unwrap();
        assert_eq!(wait, Duration::from_secs(50));
        assert_eq!(limiter.delay_at(t0 + Duration::from_secs(61), 0), None);
    }

    #[test]
    fn token_budget() {
        let limiter = RateLimiter::new(None, Some(1000));
        let t0 = Instant::now();
        limiter.push(t0, 900);
        assert!(limiter.delay_at(t0, 200).is_some());
        assert!(limiter.delay_at(t0, 100).is_none());
        limiter.settle(900, 50);
        assert!(limiter.delay_at(t0, 200).is_none());
    }
}
