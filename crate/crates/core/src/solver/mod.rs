//! Tabular Q-learning and the exact backward-induction oracle.

mod exact;
mod qlearning;
mod qtable;

pub use exact::{expected_return, value_iteration, DEFAULT_ENUMERATION_CAP};
pub use qlearning::{schedule_at, train, train_with_log_interval, EpochLog, Training, TrainingSchedule};
pub use qtable::{greedy_action, greedy_index, QRow, QTable, QTableHeader};
