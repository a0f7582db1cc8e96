//! Text formats for trees and trajectories.
//!
//! Trees are written one JSON object per line, in node order:
//!
//! ```text
//! {"id":3,"parent":1,"method":"proximity","k":2,"direction":[..],"magnitude":[..],
//!  "command":[..],"r_d":..,"r_p":..,"r_m":..,"total":..,"state":[..]}
//! ```
//!
//! The root has `parent`, `method`, `k`, `direction` and `magnitude` set to
//! null. `state` follows the flat `[q_r | qd_r | q_o | qd_o]` layout.
//!
//! Trajectories are CSV with columns `step, s_0..s_{n-1}, a_0..a_{m-1}`,
//! where row `i` holds the state before command `i`; the final row has an
//! empty command.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ActionType, SearchTree, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub method: Option<ActionType>,
    pub k: Option<usize>,
    pub direction: Option<Vec<f64>>,
    pub magnitude: Option<Vec<f64>>,
    pub command: Vec<f64>,
    pub r_d: f64,
    pub r_p: f64,
    pub r_m: f64,
    pub total: f64,
    pub state: Vec<f64>,
}

pub fn write_tree_jsonl<W: Write>(tree: &SearchTree, mut out: W) -> std::io::Result<()> {
    for (id, n) in tree.nodes.iter().enumerate() {
        let rec = NodeRecord {
            id,
            parent: n.parent,
            method: n.action.as_ref().map(|a| a.method),
            k: n.action.as_ref().map(|a| a.step_multiple),
            direction: n.action.as_ref().map(|a| a.direction.clone()),
            magnitude: n.action.as_ref().map(|a| a.magnitude.clone()),
            command: n.absolute_command.clone(),
            r_d: n.rewards.r_d,
            r_p: n.rewards.r_p,
            r_m: n.rewards.r_m,
            total: n.rewards.total,
            state: n.state.as_slice().to_vec(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_tree_records<R: BufRead>(input: R) -> std::io::Result<Vec<NodeRecord>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(std::io::Error::from))
        .collect()
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n_s = traj.states.first().map_or(0, |s| s.dim());
    let n_a = traj.start_command.len();
    let mut header = vec!["step".to_string()];
    header.extend((0..n_s).map(|i| format!("s_{i}")));
    header.extend((0..n_a).map(|i| format!("a_{i}")));
    w.write_record(&header)?;
    for (i, s) in traj.states.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.as_slice().iter().map(|v| v.to_string()));
        match traj.commands.get(i) {
            Some(c) => row.extend(c.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat(String::new()).take(n_a)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::planner::{best_trajectory, plan, PlannerParams};
    use crate::sim::{make_env, TaskId};

    #[test]
    fn tree_round_trip() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let mut p = PlannerParams::for_task(&env);
        p.max_nodes = Some(12);
        let tree = plan(&env, &env.start, &env.goal, &p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut buf = Vec::new();
        write_tree_jsonl(&tree, &mut buf).unwrap();
        let recs = read_tree_records(&buf[..]).unwrap();
        assert_eq!(recs.len(), tree.len());
        assert_eq!(recs[0].parent, None);
        for (r, n) in recs.iter().zip(&tree.nodes) {
            assert_eq!(r.state, n.state.as_slice());
            assert_eq!(r.total, n.rewards.total);
        }

        let traj = best_trajectory(&tree, &env.goal);
        let mut csv_buf = Vec::new();
        write_trajectory_csv(&traj, &mut csv_buf).unwrap();
        let text = String::from_utf8(csv_buf).unwrap();
        assert_eq!(text.lines().count(), traj.states.len() + 1);
        assert!(text.starts_with("step,s_0,s_1,s_2,s_3,a_0"));
    }
}
