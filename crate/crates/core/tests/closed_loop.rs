mod common;

use powershape::admissible::conductance_for;
use powershape::control::{simulate_closed_loop, ClosedLoopMode, Controller, TargetProfile};
use powershape::grid::PowerIteration;
use powershape::{DiscreteOp, Field, FullState, Grid, Line, LineParams, SimConfig};

use common::*;

fn stable_line(n: usize) -> Line {
    let p = LineParams::default();
    let norm = DiscreteOp::sbp(Grid::new(n).unwrap()).norm(PowerIteration::default()).unwrap();
    line(n, LineParams { g: conductance_for(&p, norm, 0.7), ..p })
}

#[test]
fn shaped_loop_reaches_voltage_defined_targets() {
    let ln = stable_line(40);
    let v_star = ln.grid().sample(|z| 0.01 * (1.0 - z));
    let tp = TargetProfile::from_voltage(&ln, &v_star, 0.2).unwrap();
    let ctl = Controller::new(tp, 3.0, ClosedLoopMode::ShapedDynamics).unwrap();
    let mut r = rng(21);
    let f0 = smooth_field(&mut r, ln.grid(), 3);
    let cfg = SimConfig { dt: Some(2e-3), t_end: 6.0, stride: 5, ..Default::default() };
    let run = simulate_closed_loop(&ln, &ctl, &FullState::new(f0), &cfg, 1e-3).unwrap();
    assert!(run.converged(), "{}", run.terminal_error);
    assert!(run.pd_monotone(), "{}", run.pd_report);
    assert!(run.eq_residual.last().unwrap() < &run.eq_residual[0]);
}

#[test]
fn interconnected_run_logs_everything() {
    let ln = stable_line(30);
    let tp = TargetProfile::constant_current(&ln, 0.4).unwrap();
    let ctl = Controller::new(tp, 2.0, ClosedLoopMode::Interconnected).unwrap();
    let f0 = Field::zeros(ln.grid());
    let cfg = SimConfig { dt: Some(2e-3), t_end: 1.0, stride: 10, ..Default::default() };
    let run = simulate_closed_loop(&ln, &ctl, &FullState::with_controller(f0, 0.0), &cfg, 1e-3).unwrap();
    assert_eq!(run.casimir.len(), run.traj.len());
    assert_eq!(run.casimir[0], 0.0);
    assert!(run.casimir_drift.is_finite());
    let csv = run.to_csv(&ln, &[0.0, 0.5, 1.0]);
    assert!(csv.starts_with("t,i@0,i@0.5,i@1,v@0,v@0.5,v@1,P_d,casimir,eq_residual\n"));
    assert_eq!(csv.lines().count(), run.traj.len() + 1);
    let summary = run.summary();
    for key in ["mode = interconnected", "K = 2", "terminal_error", "pd_monotone", "casimir_drift"] {
        assert!(summary.contains(key), "{key}");
    }
}
