//! The two five-user walkthrough instances, with their expected step traces.

use crate::model::{DeclaredBid, TaskUniverse, UserId, UserProfile};
use crate::online::{parse_trace_csv, DeltaPolicy, OnlineConfig, TraceRow};
use crate::rational::{int, one, ratio};

/// A fixed instance: one task per user with requirement 1, so every
/// marginal value is 0 or 1.
#[derive(Clone, Debug)]
pub struct WorkedExample {
    pub name: &'static str,
    pub universe: TaskUniverse,
    pub profiles: Vec<UserProfile>,
    pub config: OnlineConfig,
    expected: &'static str,
}

impl WorkedExample {
    pub fn bids(&self) -> Vec<DeclaredBid> {
        self.profiles.iter().map(UserProfile::truthful).collect()
    }

    pub fn expected_trace(&self) -> Vec<TraceRow> {
        parse_trace_csv(self.expected).expect("embedded trace parses")
    }

    pub fn expected_trace_csv(&self) -> &'static str {
        self.expected
    }
}

const EXAMPLE1_TRACE: &str = "\
# crowdsense-trace/1
t,stage,threshold,stage_budget,committed,winners,payments
1,2,1/2,4,2,1,1:2
2,3,1/4,8,2,1,1:2
3,3,1/4,8,2,1,1:2
4,4,1/4,16,2,1,1:2
5,4,1/4,16,2,1,1:2
6,4,1/4,16,6,1;4,1:2;4:4
7,4,1/4,16,10,1;4;5,1:2;4:4;5:4
8,4,1/4,16,10,1;4;5,1:2;4:4;5:4
";

const EXAMPLE2_TRACE: &str = "\
# crowdsense-trace/1
t,stage,threshold,stage_budget,committed,winners,payments
1,2,1/2,4,2,1,1:2
2,3,1/4,8,4,1,1:4
3,3,1/4,8,4,1,1:4
4,4,1/8,16,8,1,1:8
5,4,1/8,16,8,1,1:8
6,4,1/8,16,16,1;4,1:8;4:8
7,4,1/8,16,16,1;4,1:8;4:8
8,4,1/8,16,16,1;4,1:8;4:8
";

fn build(name: &'static str, first_departure: u32, expected: &'static str) -> WorkedExample {
    let rows: [(u32, u32, i64); 5] = [(1, first_departure, 2), (2, 2, 4), (4, 4, 5), (6, 6, 1), (7, 7, 3)];
    let profiles = rows
        .iter()
        .enumerate()
        .map(|(k, &(a, d, c))| UserProfile::new(UserId(k as u32 + 1), a, d, vec![k], int(c)).expect("valid profile"))
        .collect();
    WorkedExample {
        name,
        universe: TaskUniverse::uniform(5, 1).expect("valid universe"),
        profiles,
        config: OnlineConfig::new(int(16), 8).with_epsilon(ratio(1, 2)).with_delta(DeltaPolicy::fixed(one())),
        expected,
    }
}

/// Zero-interval instance: B = 16, T = 8, initial threshold 1/2, delta 1.
pub fn example1() -> WorkedExample {
    build("example1", 1, EXAMPLE1_TRACE)
}

/// As [`example1`] but user 1 stays online over steps 1..=5.
pub fn example2() -> WorkedExample {
    build("example2", 5, EXAMPLE2_TRACE)
}

pub fn by_name(name: &str) -> Option<WorkedExample> {
    match name {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        _ => None,
    }
}
