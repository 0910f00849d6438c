use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Linear warmup to `max_lr`, then polynomial decay to `end_lr` at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub max_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub power: f64,
    pub end_lr: f64,
}

impl LrSchedule {
    pub fn lr<T: Scalar>(&self, step: u64) -> T {
        let max = T::lit(self.max_lr);
        let end = T::lit(self.end_lr);
        if step < self.warmup_steps {
            return max * T::from_u64(step).unwrap() / T::from_u64(self.warmup_steps).unwrap();
        }
        if step >= self.total_steps {
            return end;
        }
        let decay_steps = T::from_u64(self.total_steps - self.warmup_steps).unwrap();
        let progress = T::from_u64(step - self.warmup_steps).unwrap() / decay_steps;
        (max - end) * (T::one() - progress).powf(T::lit(self.power)) + end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let s = LrSchedule {
            max_lr: 1e-4,
            warmup_steps: 100,
            total_steps: 1100,
            power: 1.0,
            end_lr: 0.0,
        };
        assert_eq!(s.lr::<f64>(0), 0.0);
        assert!((s.lr::<f64>(50) - 5e-5).abs() < 1e-18);
        assert!((s.lr::<f64>(100) - 1e-4).abs() < 1e-18);
        assert!((s.lr::<f64>(600) - 5e-5).abs() < 1e-18);
        assert_eq!(s.lr::<f64>(1100), 0.0);
        assert_eq!(s.lr::<f64>(5000), 0.0);
        let mut prev = -1.0;
        for step in 0..=100 {
            let lr = s.lr::<f64>(step);
            assert!(lr > prev);
            prev = lr;
        }
        for step in 101..=1100 {
            let lr = s.lr::<f64>(step);
            assert!(lr < prev);
            prev = lr;
        }
    }
}
