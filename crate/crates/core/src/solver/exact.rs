use std::collections::HashMap;

use rayon::prelude::*;

use super::qtable::{greedy_index, QTable};
use crate::error::Result;
use crate::mdp::{ExpansionMdp, InstallAction, PlanningState};
use crate::scalar::Scalar;

pub const DEFAULT_ENUMERATION_CAP: usize = 5_000_000;

/// Exact `Q*` by backward induction over the reachable state space.
///
/// Refuses (with an enumeration-cap error) when more than `cap` states are
/// reachable. States within one period are evaluated in parallel.
pub fn value_iteration<T: Scalar>(
    mdp: &ExpansionMdp<'_, T>,
    gamma: T,
    cap: usize,
) -> Result<QTable<T>> {
    let layers = mdp.reachable_states(cap)?;
    let radix: Vec<usize> = mdp.config().units.iter().map(|u| u.chain.ladder.len()).collect();
    let codes: usize = radix.iter().product();
    let code = |idx: &[usize]| idx.iter().zip(&radix).fold(0, |acc, (i, r)| acc * r + i);

    let mut table = QTable::new(mdp.num_actions());
    // optimal values of the next layer: capacities -> values by price code
    let mut next_values: HashMap<Vec<u64>, Vec<T>> = HashMap::new();
    for layer in layers.iter().take(mdp.horizon()).rev() {
        let rows = layer
            .par_iter()
            .map(|state| {
                let outcomes: Vec<(T, usize)> = mdp
                    .price_outcomes(&state.price_idx)
                    .into_iter()
                    .map(|(p, idx)| (p, code(&idx)))
                    .collect();
                let values = mdp
                    .legal_actions(state)
                    .into_iter()
                    .map(|a| {
                        let caps = mdp.installed_after(state, a);
                        let r = mdp.reward_for_capacity(state, a, &caps)?.total();
                        let cont = next_values.get(&caps);
                        let mut total = T::zero();
                        for &(p, c) in &outcomes {
                            let v = cont.map_or_else(T::zero, |vals| vals[c]);
                            total = total + p * (r + gamma * v);
                        }
                        Ok(total)
                    })
                    .collect::<Result<Vec<T>>>()?;
                Ok((state.clone(), values))
            })
            .collect::<Result<Vec<_>>>()?;
        next_values = HashMap::new();
        for (state, values) in rows {
            next_values
                .entry(state.capacity_kwh.clone())
                .or_insert_with(|| vec![T::zero(); codes])[code(&state.price_idx)] = values[greedy_index(&values)];
            table.insert_values(state, values);
        }
    }
    Ok(table)
}

/// Exact expected discounted return of a deterministic policy from the
/// initial state.
pub fn expected_return<T, F>(mdp: &ExpansionMdp<'_, T>, gamma: T, policy: F) -> Result<T>
where
    T: Scalar,
    F: Fn(&PlanningState) -> Result<InstallAction>,
{
    fn value<T: Scalar, F: Fn(&PlanningState) -> Result<InstallAction>>(
        mdp: &ExpansionMdp<'_, T>,
        gamma: T,
        policy: &F,
        state: &PlanningState,
        memo: &mut HashMap<PlanningState, T>,
    ) -> Result<T> {
        if mdp.is_terminal(state) {
            return Ok(T::zero());
        }
        if let Some(v) = memo.get(state) {
            return Ok(*v);
        }
        let action = policy(state)?;
        let outcomes = mdp.transition_distribution(state, action)?;
        let r = mdp.reward(state, action, &outcomes[0].1)?.total();
        let mut total = T::zero();
        for (p, next) in outcomes {
            total = total + p * (r + gamma * value(mdp, gamma, policy, &next, memo)?);
        }
        memo.insert(state.clone(), total);
        Ok(total)
    }
    let mut memo = HashMap::new();
    value(mdp, gamma, &policy, &mdp.initial_state(), &mut memo)
}
