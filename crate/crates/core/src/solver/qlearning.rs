use rand::Rng;
use serde::{Deserialize, Serialize};

use super::qtable::{greedy_index, QTable};
use crate::error::{Error, Result};
use crate::mdp::{ExpansionMdp, InstallAction};
use crate::scalar::Scalar;

/// Episode budget with linearly decaying learning and exploration rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule<T> {
    pub episodes: usize,
    pub alpha_start: T,
    pub alpha_end: T,
    pub epsilon_start: T,
    pub epsilon_end: T,
    pub gamma: T,
    pub seed: u64,
}

impl<T: Scalar> TrainingSchedule<T> {
    /// Alpha 0.5 to 0.01, epsilon 1.0 to 0.05, undiscounted, seed 0.
    pub fn default_with_episodes(episodes: usize) -> Self {
        TrainingSchedule {
            episodes,
            alpha_start: T::of(0.5),
            alpha_end: T::of(0.01),
            epsilon_start: T::one(),
            epsilon_end: T::of(0.05),
            gamma: T::one(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        let bad = |msg: &str| Err(Error::Config(format!("training schedule: {msg}")));
        if self.episodes == 0 {
            return bad("episodes must be positive");
        }
        let in_unit = |x: T| x >= zero && x <= one;
        if !(self.alpha_end > zero && self.alpha_start <= one && self.alpha_start >= self.alpha_end) {
            return bad("need 0 < alpha_end <= alpha_start <= 1");
        }
        if !(in_unit(self.epsilon_start) && in_unit(self.epsilon_end) && self.epsilon_start >= self.epsilon_end) {
            return bad("need 0 <= epsilon_end <= epsilon_start <= 1");
        }
        if !in_unit(self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        Ok(())
    }
}

/// `(alpha, epsilon)` for `episode`, interpolated linearly from the start
/// values at episode 0 to the end values at the last episode.
pub fn schedule_at<T: Scalar>(schedule: &TrainingSchedule<T>, episode: usize) -> Result<(T, T)> {
    if episode >= schedule.episodes {
        return Err(Error::Domain(format!(
            "episode {episode} outside schedule of {} episodes",
            schedule.episodes
        )));
    }
    let frac = if schedule.episodes == 1 {
        T::zero()
    } else {
        T::of_usize(episode) / T::of_usize(schedule.episodes - 1)
    };
    let lerp = |a: T, b: T| a * (T::one() - frac) + b * frac;
    Ok((
        lerp(schedule.alpha_start, schedule.alpha_end),
        lerp(schedule.epsilon_start, schedule.epsilon_end),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog<T> {
    /// Episodes completed at the end of the epoch.
    pub episode: usize,
    pub max_q_delta: T,
    pub mean_return: T,
}

#[derive(Debug, Clone)]
pub struct Training<T> {
    pub qtable: QTable<T>,
    pub log: Vec<EpochLog<T>>,
}

/// Q-learning with a log entry every 10 000 episodes.
pub fn train<T: Scalar, R: Rng + ?Sized>(
    mdp: &ExpansionMdp<'_, T>,
    schedule: &TrainingSchedule<T>,
    rng: &mut R,
) -> Result<Training<T>> {
    train_with_log_interval(mdp, schedule, 10_000, rng)
}

/// Runs `schedule.episodes` episodes of epsilon-greedy Q-learning from the
/// initial state. Exploration picks uniformly among all legal actions.
/// Rewards come from the precomputed cost table only.
pub fn train_with_log_interval<T: Scalar, R: Rng + ?Sized>(
    mdp: &ExpansionMdp<'_, T>,
    schedule: &TrainingSchedule<T>,
    log_every: usize,
    rng: &mut R,
) -> Result<Training<T>> {
    schedule.validate()?;
    if log_every == 0 {
        return Err(Error::Domain("log interval must be positive".into()));
    }
    let config = mdp.config();
    // every reachable portfolio must already be tabulated
    for caps in crate::sim::reachable_capacity_grid(config.units.len(), &config.levels_kwh, config.horizon) {
        mdp.costs().lookup(&caps)?;
    }

    let levels = config.levels_kwh.len();
    let num_actions = mdp.num_actions();
    let lower = -(mdp.max_step_cost() * T::of_usize(mdp.horizon()));
    let slack = lower.abs() * T::of(1e-9);
    let mut q = QTable::new(num_actions);
    let mut log = Vec::new();
    let (mut epoch_delta, mut epoch_return, mut epoch_len) = (T::zero(), T::zero(), 0usize);

    for episode in 0..schedule.episodes {
        let (alpha, epsilon) = schedule_at(schedule, episode)?;
        let mut state = mdp.initial_state();
        let mut ret = T::zero();
        while !mdp.is_terminal(&state) {
            let explore = rng.random::<f64>() < epsilon.as_f64();
            let action = if explore {
                InstallAction::from_index(rng.random_range(0..num_actions), levels)
            } else {
                match q.row(&state) {
                    Some(row) => InstallAction::from_index(greedy_index(&row.values), levels),
                    None => InstallAction::None,
                }
            };
            let next = mdp.transition(&state, action, rng)?;
            let reward = mdp.reward(&state, action, &next)?.total();
            let future = if mdp.is_terminal(&next) {
                T::zero()
            } else {
                q.state_value(&next)
            };
            let target = reward + schedule.gamma * future;
            let idx = action.index(levels);
            let row = q.row_mut(&state);
            let old = row.values[idx];
            let new = old + alpha * (target - old);
            if new < lower - slack || new > T::zero() {
                return Err(Error::QOutOfBounds {
                    value: new.as_f64(),
                    lower: lower.as_f64(),
                    period: state.period,
                });
            }
            row.values[idx] = new;
            row.visits[idx] += 1;
            epoch_delta = epoch_delta.max((new - old).abs());
            ret = ret + reward;
            state = next;
        }
        epoch_return = epoch_return + ret;
        epoch_len += 1;
        if epoch_len == log_every || episode + 1 == schedule.episodes {
            log.push(EpochLog {
                episode: episode + 1,
                max_q_delta: epoch_delta,
                mean_return: epoch_return / T::of_usize(epoch_len),
            });
            epoch_delta = T::zero();
            epoch_return = T::zero();
            epoch_len = 0;
        }
    }
    Ok(Training { qtable: q, log })
}
