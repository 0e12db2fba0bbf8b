mod common;

use common::mapf_scenario;
use rmfs_core::planner::verify::{dwell_overlaps, max_implied_speed, scan_conflicts};

#[test]
fn random_scenarios_are_conflict_free() {
    let mut legs = 0;
    for seed in 0..300 {
        let run = mapf_scenario(seed, 3);
        let found = scan_conflicts(&run.trajectories, 0.1);
        assert!(found.is_empty(), "seed {seed} {}x{}: {:?}", run.rows, run.cols, &found[..1]);
        assert!(dwell_overlaps(&run.trajectories).is_empty(), "seed {seed}");
        for tr in &run.trajectories {
            let v = max_implied_speed(tr, run.layout.spacing_m());
            assert!(v <= run.kinematics.v_max * (1.0 + 1e-9), "seed {seed} {}: {v}", tr.robot);
        }
        legs += run.legs;
    }
    assert!(legs > 300 * 2 * 2, "too few legs planned: {legs}");
}

#[test]
fn scenarios_cover_the_size_range() {
    let runs: Vec<_> = (0..200).map(|s| mapf_scenario(s, 1)).collect();
    assert!(runs.iter().any(|r| r.rows == 3 && r.cols == 4 || r.rows * r.cols <= 15));
    assert!(runs.iter().any(|r| r.rows * r.cols >= 90));
    assert!(runs.iter().any(|r| r.robots == 8));
    assert!(runs.iter().all(|r| (2..=8).contains(&r.robots)));
}
