use crate::error::{invalid, Result};
use crate::rational::{int, Rational};

/// One stage of the doubling schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    /// 1-based stage index.
    pub index: u32,
    /// Last time step of the stage, `floor(2^(i-1) * T / 2^floor(log2 T))`.
    pub end_time: u32,
    /// Budget available up to and including this stage, `2^(i-1) * B / 2^floor(log2 T)`.
    pub budget: Rational,
}

/// The `floor(log2 T) + 1` sampling-accepting stages over deadline `T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagePlan {
    stages: Vec<Stage>,
}

impl StagePlan {
    pub fn new(deadline: u32, budget: &Rational) -> Result<Self> {
        if deadline == 0 {
            return Err(invalid("deadline must be at least 1"));
        }
        let log = 31 - deadline.leading_zeros();
        let scale = 1u64 << log;
        let stages = (0..=log)
            .map(|k| {
                let doubling = 1u64 << k;
                Stage {
                    index: k + 1,
                    end_time: (doubling * deadline as u64 / scale) as u32,
                    budget: budget * int(doubling as i64) / int(scale as i64),
                }
            })
            .collect();
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, index: u32) -> &Stage {
        &self.stages[index as usize - 1]
    }

    pub fn last(&self) -> &Stage {
        self.stages.last().expect("plan has at least one stage")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use proptest::prelude::*;

    #[test]
    fn deadline_eight() {
        let plan = StagePlan::new(8, &int(16)).unwrap();
        let ends: Vec<u32> = plan.stages().iter().map(|s| s.end_time).collect();
        let budgets: Vec<Rational> = plan.stages().iter().map(|s| s.budget.clone()).collect();
        assert_eq!(ends, vec![1, 2, 4, 8]);
        assert_eq!(budgets, vec![int(2), int(4), int(8), int(16)]);
    }

    #[test]
    fn non_power_of_two_deadline() {
        let plan = StagePlan::new(6, &int(10)).unwrap();
        let ends: Vec<u32> = plan.stages().iter().map(|s| s.end_time).collect();
        assert_eq!(ends, vec![1, 3, 6]);
        assert_eq!(plan.stage(1).budget, ratio(5, 2));
    }

    #[test]
    fn single_step() {
        let plan = StagePlan::new(1, &int(3)).unwrap();
        assert_eq!(plan.stage_count(), 1);
        assert_eq!(plan.last().end_time, 1);
        assert_eq!(plan.last().budget, int(3));
        assert!(StagePlan::new(0, &int(3)).is_err());
    }

    proptest! {
        #[test]
        fn schedule_shape(deadline in 1u32..5000, budget in 1i64..100_000) {
            let plan = StagePlan::new(deadline, &int(budget)).unwrap();
            let log = (deadline as f64).log2().floor() as usize;
            prop_assert_eq!(plan.stage_count(), log + 1);
            prop_assert_eq!(plan.last().end_time, deadline);
            prop_assert_eq!(&plan.last().budget, &int(budget));
            for pair in plan.stages().windows(2) {
                prop_assert_eq!(&pair[1].budget, &(&pair[0].budget * int(2)));
                prop_assert!(pair[1].end_time > pair[0].end_time);
                prop_assert!(pair[1].end_time >= 2 * pair[0].end_time);
                prop_assert!(pair[1].end_time <= 2 * pair[0].end_time + 1);
            }
        }
    }
}
