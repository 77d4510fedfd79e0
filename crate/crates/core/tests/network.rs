use std::f64::consts::TAU;

use fluxsync::em::{polar_to_abc, ThreePhase};
use fluxsync::inverter::{bridge_voltages, FilterParams, InverterState, SwitchState};
use fluxsync::network::{FaultElement, LineDesc, LoadDesc, Network, NetworkDesc, TransformerDesc};
use fluxsync::Error;

const F: f64 = 60.0;
const W: f64 = TAU * F;
const S: f64 = 889e6;

fn line(name: &str, from: u32, to: u32, r: f64, x: f64, b: f64) -> LineDesc {
    LineDesc { name: name.into(), from, to, r, x, b, closed: true }
}

fn load(name: &str, bus: u32, p: f64, q_ind: f64, q_cap: f64) -> LoadDesc {
    LoadDesc { name: name.into(), bus, p_mw: p, q_ind_mvar: q_ind, q_cap_mvar: q_cap, in_service: true }
}

fn transformer(lv: u32, hv: u32, residual: [f64; 3]) -> TransformerDesc {
    TransformerDesc { name: "t1".into(), lv_bus: lv, hv_bus: hv, residual_flux: residual, ..Default::default() }
}

#[test]
fn quiescent_network_stays_zero() {
    let desc = NetworkDesc {
        buses: vec![1, 2, 3],
        lines: vec![line("l", 2, 3, 0.01, 0.1, 0.02)],
        transformers: vec![transformer(1, 2, [0.0; 3])],
        loads: vec![load("ld", 3, 500.0, 100.0, 50.0)],
    };
    let mut net = Network::new(desc, F, S).unwrap();
    let initial = net.state.clone();
    for _ in 0..2000 {
        net.step(1e-5, &[], &[]).unwrap();
    }
    assert_eq!(net.state, initial);
}

#[test]
fn rl_branch_dc_step_matches_closed_form() {
    let (r, x) = (0.01, 0.1);
    let desc = NetworkDesc { buses: vec![1, 2], lines: vec![line("l", 1, 2, r, x, 0.0)], ..Default::default() };
    let mut net = Network::new(desc, F, S).unwrap();
    let dt = 1e-5;
    let tau = x / (r * W);
    let n = (5.0 * tau / dt).round() as usize;
    let src = [(1, ThreePhase::splat(1.0)), (2, ThreePhase::ZERO)];
    for _ in 0..n {
        net.step(dt, &[], &src).unwrap();
    }
    let t = n as f64 * dt;
    let oracle = (1.0 / r) * (1.0 - (-t / tau).exp());
    for ph in 0..3 {
        let i = net.state.lines[0].i[ph];
        assert!((i - oracle).abs() <= 1e-3 * oracle, "{i} vs {oracle}");
    }
}

#[test]
fn rl_branch_phasor_magnitude() {
    let (r, x) = (0.02, 0.3);
    let desc = NetworkDesc { buses: vec![1, 2], lines: vec![line("l", 1, 2, r, x, 0.0)], ..Default::default() };
    let mut net = Network::new(desc, F, S).unwrap();
    let dt = 2e-5;
    let steps = (1.0 / dt) as usize;
    let cycle = (1.0 / (F * dt)).round() as usize;
    let mut peak: f64 = 0.0;
    for k in 1..=steps {
        let t = k as f64 * dt;
        net.step(dt, &[], &[(1, polar_to_abc(1.0, W * t)), (2, ThreePhase::ZERO)]).unwrap();
        if k > steps - cycle {
            peak = peak.max(net.state.lines[0].i.magnitude());
        }
    }
    let oracle = 1.0 / (r * r + x * x).sqrt();
    assert!((peak - oracle).abs() <= 5e-3 * oracle, "{peak} vs {oracle}");
}

fn source_line_load() -> NetworkDesc {
    NetworkDesc {
        buses: vec![1, 2],
        lines: vec![line("l", 1, 2, 0.005, 0.08, 0.01)],
        loads: vec![load("ld", 2, 700.0, 100.0, 0.0)],
        ..Default::default()
    }
}

#[test]
fn near_open_fault_leaves_voltages_unchanged() {
    let dt = 5e-5;
    let mut a = Network::new(source_line_load(), F, S).unwrap();
    let mut b = Network::new(source_line_load(), F, S).unwrap();
    b.add_fault(FaultElement::new(2, 1e9, 0.0, 10.0)).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=4000 {
        let t = k as f64 * dt;
        let src = [(1, polar_to_abc(1.0, W * t))];
        b.apply_faults(t);
        assert!(b.state.faults[0].active);
        a.step(dt, &[], &src).unwrap();
        b.step(dt, &[], &src).unwrap();
        worst = worst.max((a.bus_voltage(2).unwrap() - b.bus_voltage(2).unwrap()).max_abs());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn solid_fault_collapses_bus_voltage_only_inside_window() {
    let dt = 5e-5;
    let mut net = Network::new(source_line_load(), F, S).unwrap();
    net.add_fault(FaultElement::new(2, 1e-4, 0.1, 0.15)).unwrap();
    let (mut during, mut after): (f64, f64) = (0.0, 0.0);
    let mut cleared = None;
    for k in 1..=8000 {
        let t = k as f64 * dt;
        net.apply_faults(t);
        net.step(dt, &[], &[(1, polar_to_abc(1.0, W * t))]).unwrap();
        if cleared.is_none() && t > 0.15 && net.state.faults[0].closed == [false; 3] {
            cleared = Some(t);
        }
        let v = net.bus_voltage(2).unwrap().max_abs();
        if (0.12..0.15).contains(&t) {
            during = during.max(v);
        }
        if t > 0.3 {
            after = after.max(v);
        }
        assert!(net.state.kcl_residual < 1e-8);
    }
    assert!(during < 0.01, "{during}");
    assert!(after > 0.8, "{after}");
    // Each phase waits for its own current zero, at most half a cycle.
    let cleared = cleared.expect("fault cleared");
    assert!(cleared > 0.15 + dt && cleared <= 0.15 + 0.5 / F + dt, "{cleared}");
}

#[test]
fn source_free_rl_mesh_energy_is_non_increasing() {
    let x = [0.1, 0.2, 0.15];
    let desc = NetworkDesc {
        buses: vec![1, 2, 3],
        lines: vec![
            line("a", 1, 2, 0.01, x[0], 0.0),
            line("b", 2, 3, 0.02, x[1], 0.0),
            line("c", 3, 1, 0.005, x[2], 0.0),
        ],
        loads: vec![load("r", 1, 300.0, 0.0, 0.0)],
        ..Default::default()
    };
    let mut net = Network::new(desc, F, S).unwrap();
    let loop_current = ThreePhase::new(1.0, -0.4, -0.6);
    for l in &mut net.state.lines {
        l.i = loop_current;
    }
    let energy = |n: &Network| -> f64 {
        n.state.lines.iter().zip(x).map(|(l, x)| 0.5 * x / W * l.i.dot(l.i)).sum()
    };
    let e0 = energy(&net);
    let mut prev = e0;
    for _ in 0..5000 {
        net.step(2e-5, &[], &[]).unwrap();
        let e = energy(&net);
        assert!(e <= prev * (1.0 + 1e-12), "{e} > {prev}");
        prev = e;
    }
    assert!(prev < 0.5 * e0, "{prev} vs {e0}");
}

fn transformer_bench(residual: [f64; 3]) -> Network {
    let desc = NetworkDesc {
        buses: vec![1, 2],
        transformers: vec![transformer(1, 2, residual)],
        loads: vec![load("ld", 2, 400.0, 50.0, 0.0)],
        ..Default::default()
    };
    Network::new(desc, F, S).unwrap()
}

#[test]
fn transformer_flux_is_continuous_and_saturates_with_residual() {
    let dt = 2e-5;
    let mut net = transformer_bench([1.0, -1.0, 1.0]);
    let mut prev = net.state.transformers[0].psi;
    let mut peak_mag: f64 = 0.0;
    for k in 1..=5000 {
        let t = k as f64 * dt;
        let v = polar_to_abc(1.0, W * t);
        net.step(dt, &[], &[(1, v)]).unwrap();
        let psi = net.state.transformers[0].psi;
        let bound = W * dt * 1.0;
        assert!((psi - prev).max_abs() <= bound * (1.0 + 1e-12));
        prev = psi;
        peak_mag = peak_mag.max(net.state.transformers[0].i_mag.max_abs());
    }
    assert!(peak_mag > 1.0, "{peak_mag}");
}

#[test]
fn balanced_excitation_keeps_flux_balanced() {
    let dt = 2e-5;
    let mut net = transformer_bench([0.0; 3]);
    for k in 1..=5000 {
        let t = k as f64 * dt;
        net.step(dt, &[], &[(1, polar_to_abc(1.0, W * t + 0.3))]).unwrap();
        assert!(net.state.transformers[0].psi.zero_sequence().abs() < 1e-9);
    }
}

#[test]
fn ungrounded_islands_are_reported() {
    let desc = NetworkDesc {
        buses: vec![1, 2, 3, 4],
        lines: vec![line("a", 1, 2, 0.01, 0.1, 0.0), line("b", 3, 4, 0.01, 0.1, 0.0)],
        loads: vec![load("ld", 1, 100.0, 0.0, 0.0)],
        ..Default::default()
    };
    let mut net = Network::new(desc, F, S).unwrap();
    match net.step(1e-5, &[], &[]) {
        Err(Error::SingularNetwork { buses }) => assert_eq!(buses, vec![3, 4]),
        other => panic!("expected singular network, got {other:?}"),
    }
}

#[test]
fn invalid_description_lists_every_violation() {
    let desc = NetworkDesc {
        buses: vec![1, 1],
        lines: vec![line("a", 1, 9, -1.0, 0.0, 0.0)],
        ..Default::default()
    };
    match Network::new(desc, F, S) {
        Err(Error::Config(v)) => assert!(v.len() >= 4, "{v:?}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

/// Inverter with fixed switch states feeding a transformer and load through
/// a port: KCL holds everywhere and the floating bridge neutral carries no
/// zero-sequence current.
#[test]
fn inverter_port_couples_consistently() {
    let dt = 1e-5;
    let mut net = transformer_bench([0.0; 3]);
    let port = net.add_port(1).unwrap();
    let fp = FilterParams::default();
    let mut inv = InverterState::default();
    let patterns = [
        SwitchState::new(true, false, false),
        SwitchState::new(true, true, false),
        SwitchState::new(false, true, false),
        SwitchState::new(false, true, true),
        SwitchState::new(false, false, true),
        SwitchState::new(true, false, true),
    ];
    for k in 0..20_000 {
        inv.switch = patterns[(k / 139) % 6];
        let vb = bridge_voltages(inv.switch, 2.364);
        let stamp = inv.companion(&fp, W, dt, vb);
        net.step(dt, &[stamp], &[]).unwrap();
        let (v_pcc, v_n) = net.port_voltages(port);
        inv.commit(&fp, W, dt, vb, v_pcc, v_n).unwrap();
        assert!(net.state.kcl_residual < 1e-8, "{}", net.state.kcl_residual);
        assert!(inv.i_l.sum().abs() < 1e-9);
        // inverter output equals what the transformer and its magnetizing branch draw
        let drawn = net.state.transformers[0].i_lv();
        assert!((inv.i_out() - drawn).max_abs() < 1e-8);
    }
    assert!(inv.i_l.max_abs() > 0.1);
}

#[test]
fn serialized_network_resumes_bit_identically() {
    let dt = 2e-5;
    let mut a = transformer_bench([1.0, -1.0, 1.0]);
    let drive = |k: usize| [(1, polar_to_abc(1.0, W * k as f64 * dt))];
    for k in 1..=1000 {
        a.step(dt, &[], &drive(k)).unwrap();
    }
    let mut b: Network = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    for k in 1001..=2000 {
        a.step(dt, &[], &drive(k)).unwrap();
        b.step(dt, &[], &drive(k)).unwrap();
    }
    assert_eq!(serde_json::to_string(&a.state).unwrap(), serde_json::to_string(&b.state).unwrap());
}
