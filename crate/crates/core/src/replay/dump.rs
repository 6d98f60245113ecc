//! CSV snapshot of stored transitions.
//!
//! Columns: `episode, t, obs_*, ag_*, dg_*, action_*, reward, done,
//! next_obs_*, next_ag_*, next_dg_*`. Floats are written in shortest
//! round-trip form, so loading a dump reproduces the buffer exactly.

use std::path::Path;

use super::{EpisodeRecord, ReplayBuffer, ReplayError, Transition};
use crate::envs::GoalObservation;

fn snap<E: std::fmt::Display>(e: E) -> ReplayError {
    ReplayError::Snapshot(e.to_string())
}

fn dims(buf: &ReplayBuffer) -> Option<(usize, usize, usize)> {
    let tr = buf.episodes.front()?.transitions.first()?;
    Some((tr.obs.observation.len(), tr.obs.achieved_goal.len(), tr.action.len()))
}

fn header(obs: usize, goal: usize, act: usize) -> Vec<String> {
    let mut h = vec!["episode".to_string(), "t".to_string()];
    let push = |h: &mut Vec<String>, prefix: &str, n: usize| h.extend((0..n).map(|i| format!("{prefix}_{i}")));
    push(&mut h, "obs", obs);
    push(&mut h, "ag", goal);
    push(&mut h, "dg", goal);
    push(&mut h, "action", act);
    h.push("reward".into());
    h.push("done".into());
    push(&mut h, "next_obs", obs);
    push(&mut h, "next_ag", goal);
    push(&mut h, "next_dg", goal);
    h
}

pub fn dump_csv(buf: &ReplayBuffer, path: &Path) -> Result<(), ReplayError> {
    let mut w = csv::Writer::from_path(path).map_err(snap)?;
    let Some((obs, goal, act)) = dims(buf) else {
        w.write_record(["episode", "t"]).map_err(snap)?;
        return w.flush().map_err(snap);
    };
    w.write_record(header(obs, goal, act)).map_err(snap)?;
    let mut row: Vec<String> = Vec::new();
    for (e, ep) in buf.episodes.iter().enumerate() {
        for (t, tr) in ep.transitions.iter().enumerate() {
            row.clear();
            row.push(e.to_string());
            row.push(t.to_string());
            let nums = |row: &mut Vec<String>, xs: &[f64]| row.extend(xs.iter().map(f64::to_string));
            nums(&mut row, &tr.obs.observation);
            nums(&mut row, &tr.obs.achieved_goal);
            nums(&mut row, &tr.obs.desired_goal);
            nums(&mut row, &tr.action);
            row.push(tr.reward.to_string());
            row.push(u8::from(tr.done).to_string());
            nums(&mut row, &tr.next_obs.observation);
            nums(&mut row, &tr.next_obs.achieved_goal);
            nums(&mut row, &tr.next_obs.desired_goal);
            w.write_record(&row).map_err(snap)?;
        }
    }
    w.flush().map_err(snap)
}

/// Reads a dump written by [`dump_csv`] into `buf`, episode by episode,
/// validating each through the normal store path.
pub fn load_csv(buf: &mut ReplayBuffer, path: &Path) -> Result<usize, ReplayError> {
    let mut r = csv::Reader::from_path(path).map_err(snap)?;
    let headers = r.headers().map_err(snap)?.clone();
    let count = |prefix: &str| headers.iter().filter(|h| h.starts_with(prefix)).count();
    let (obs, goal, act) = (count("obs_"), count("ag_"), count("action_"));
    let expected = header(obs, goal, act);
    if headers.len() > 2 && headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(ReplayError::Snapshot("unrecognised header".into()));
    }

    let mut loaded = 0;
    let mut current: Option<(String, Vec<Transition>)> = None;
    for rec in r.records() {
        let rec = rec.map_err(snap)?;
        let f = |i: usize| -> Result<f64, ReplayError> {
            rec.get(i)
                .ok_or_else(|| snap("short row"))?
                .parse::<f64>()
                .map_err(snap)
        };
        let span = |start: usize, n: usize| (start..start + n).map(f).collect::<Result<Vec<_>, _>>();
        let mut c = 2;
        let mut take = |n: usize| {
            let v = span(c, n);
            c += n;
            v
        };
        let o = take(obs)?;
        let ag = take(goal)?;
        let dg = take(goal)?;
        let action = take(act)?;
        let reward = take(1)?[0];
        let done = take(1)?[0] != 0.0;
        let no = take(obs)?;
        let nag = take(goal)?;
        let ndg = take(goal)?;
        let tr = Transition {
            obs: GoalObservation {
                observation: o,
                achieved_goal: ag,
                desired_goal: dg,
            },
            action,
            reward,
            next_obs: GoalObservation {
                observation: no,
                achieved_goal: nag,
                desired_goal: ndg,
            },
            done,
        };
        let id = rec.get(0).unwrap_or_default().to_string();
        match &mut current {
            Some((cur, trs)) if *cur == id => trs.push(tr),
            _ => {
                if let Some((_, trs)) = current.take() {
                    buf.store_episode(EpisodeRecord::new(trs)?)?;
                    loaded += 1;
                }
                current = Some((id, vec![tr]));
            }
        }
    }
    if let Some((_, trs)) = current {
        buf.store_episode(EpisodeRecord::new(trs)?)?;
        loaded += 1;
    }
    Ok(loaded)
}
