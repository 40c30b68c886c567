use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Shared token bucket. `acquire` blocks until a token is available.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(capacity: u32, refill_per_sec: f64) -> Self {
        let capacity = f64::from(capacity.max(1));
        Self {
            capacity,
            refill_per_sec: refill_per_sec.max(f64::MIN_POSITIVE),
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Take one token, returning how long the caller waited.
    pub fn acquire(&self) -> Duration {
        let mut waited = Duration::ZERO;
        loop {
            let wait = {
                let mut guard = self.state.lock().expect("token bucket poisoned");
                let (tokens, last) = &mut *guard;
                let now = Instant::now();
                let refill = now.duration_since(*last).as_secs_f64() * self.refill_per_sec;
                *tokens = (*tokens + refill).min(self.capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return waited;
                }
                Duration::from_secs_f64((1.0 - *tokens) / self.refill_per_sec)
            };
            std::thread::sleep(wait);
            waited += wait;
        }
    }
}
