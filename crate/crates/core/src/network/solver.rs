//! Nodal assembly, island detection and the per-step solve.

use nalgebra::{DMatrix, DVector};

use super::elements::{cap_conductance, ind_conductance, SeriesRl};
use super::Network;
use crate::em::ThreePhase;
use crate::error::{Error, Result};
use crate::inverter::PortStamp;

/// Sweeps allowed for the magnetizing branches to settle on a segment.
const MAX_SEGMENT_SWEEPS: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Tag {
    LineSeries(usize, usize),
    LineCapFrom(usize, usize),
    LineCapTo(usize, usize),
    TrafoSeries(usize, usize),
    TrafoMag(usize, usize),
    TrafoCore(usize, usize),
    LoadR(usize, usize),
    LoadL(usize, usize),
    LoadC(usize, usize),
    Fault(usize, usize),
    Port,
}

/// Companion branch: current `g * (v[a] - v[b]) + h` flows from `a` to `b`
/// (or to ground).
#[derive(Debug, Clone, Copy)]
struct Br {
    a: usize,
    b: Option<usize>,
    g: f64,
    h: f64,
    tag: Tag,
}

#[derive(Debug, Clone)]
pub(crate) struct Factor {
    key: Vec<u64>,
    y: DMatrix<f64>,
    unknown: Vec<usize>,
    known: Vec<usize>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

fn branches(net: &Network, dt: f64, ports: &[PortStamp]) -> Vec<Br> {
    let w = net.omega;
    let st = &net.state;
    let v0 = &st.v;
    let node = |bus: u32, ph: usize| 3 * net.bus_index(bus).expect("validated bus") + ph;
    let mut out = Vec::with_capacity(256);

    for (i, (d, s)) in net.desc.lines.iter().zip(&st.lines).enumerate() {
        if !s.closed {
            continue;
        }
        let rl = SeriesRl::new(d.r, d.x, w, dt);
        let gc = cap_conductance(d.b / 2.0, w, dt);
        for ph in 0..3 {
            let (a, b) = (node(d.from, ph), node(d.to, ph));
            let h = if s.fresh { 0.0 } else { rl.history(v0[a] - v0[b], s.i[ph]) };
            out.push(Br { a, b: Some(b), g: rl.g, h, tag: Tag::LineSeries(i, ph) });
            if gc > 0.0 {
                let (hf, ht) = if s.fresh {
                    (0.0, 0.0)
                } else {
                    (-(gc * v0[a] + s.i_cf[ph]), -(gc * v0[b] + s.i_ct[ph]))
                };
                out.push(Br { a, b: None, g: gc, h: hf, tag: Tag::LineCapFrom(i, ph) });
                out.push(Br { a: b, b: None, g: gc, h: ht, tag: Tag::LineCapTo(i, ph) });
            }
        }
    }

    for (i, (d, s)) in net.desc.transformers.iter().zip(&st.transformers).enumerate() {
        let rl = SeriesRl::new(d.r, d.x, w, dt);
        for ph in 0..3 {
            let (a, b) = (node(d.lv_bus, ph), node(d.hv_bus, ph));
            if s.closed {
                let h = if s.fresh { 0.0 } else { rl.history(v0[a] - v0[b], s.i[ph]) };
                out.push(Br { a, b: Some(b), g: rl.g, h, tag: Tag::TrafoSeries(i, ph) });
            }
            let (c, l) = d.magnetizing.segment_line(s.segment[ph]);
            let g = w * dt / (2.0 * l);
            let h = c + (s.psi[ph] + w * dt * v0[a] / 2.0) / l;
            out.push(Br { a, b: None, g, h, tag: Tag::TrafoMag(i, ph) });
            if d.r_core > 0.0 {
                out.push(Br { a, b: None, g: 1.0 / d.r_core, h: 0.0, tag: Tag::TrafoCore(i, ph) });
            }
        }
    }

    let s_mva = net.s_base / 1e6;
    for (i, (d, s)) in net.desc.loads.iter().zip(&st.loads).enumerate() {
        if !s.in_service {
            continue;
        }
        for ph in 0..3 {
            let a = node(d.bus, ph);
            if d.p_mw > 0.0 {
                out.push(Br { a, b: None, g: d.p_mw / s_mva, h: 0.0, tag: Tag::LoadR(i, ph) });
            }
            if d.q_ind_mvar > 0.0 {
                let g = ind_conductance(s_mva / d.q_ind_mvar, w, dt);
                let h = if s.fresh { 0.0 } else { g * v0[a] + s.i_l[ph] };
                out.push(Br { a, b: None, g, h, tag: Tag::LoadL(i, ph) });
            }
            if d.q_cap_mvar > 0.0 {
                let g = cap_conductance(d.q_cap_mvar / s_mva, w, dt);
                let h = if s.fresh { 0.0 } else { -(g * v0[a] + s.i_c[ph]) };
                out.push(Br { a, b: None, g, h, tag: Tag::LoadC(i, ph) });
            }
        }
    }

    for (k, f) in st.faults.iter().enumerate() {
        for ph in (0..3).filter(|&ph| f.closed[ph]) {
            out.push(Br { a: node(f.bus, ph), b: None, g: 1.0 / f.r_on, h: 0.0, tag: Tag::Fault(k, ph) });
        }
    }

    let n_bus_nodes = 3 * net.bus_ids.len();
    for (p, (stamp, &bus)) in ports.iter().zip(&net.port_buses).enumerate() {
        let neutral = n_bus_nodes + p;
        for ph in 0..3 {
            let pcc = 3 * bus + ph;
            out.push(Br {
                a: neutral,
                b: Some(pcc),
                g: stamp.g_series,
                h: stamp.j_series[ph],
                tag: Tag::Port,
            });
        }
        // The RC star point floats; eliminating it leaves a delta of g/3.
        if stamp.g_shunt > 0.0 {
            for (x, y) in [(0, 1), (1, 2), (2, 0)] {
                out.push(Br {
                    a: 3 * bus + x,
                    b: Some(3 * bus + y),
                    g: stamp.g_shunt / 3.0,
                    h: -(stamp.j_shunt[x] - stamp.j_shunt[y]) / 3.0,
                    tag: Tag::Port,
                });
            }
        }
    }
    out
}

fn matrix_key(brs: &[Br], fixed: &[bool], dt: f64) -> Vec<u64> {
    let mut key = Vec::with_capacity(3 * brs.len() + fixed.len() + 1);
    key.push(dt.to_bits());
    for b in brs {
        key.push(b.a as u64);
        key.push(b.b.map_or(u64::MAX, |x| x as u64));
        key.push(b.g.to_bits());
    }
    key.extend(fixed.iter().map(|&f| u64::from(f)));
    key
}

/// Bus ids of every node group that has no path to ground.
fn floating_buses(net: &Network, n: usize, brs: &[Br], fixed: &[bool]) -> Vec<u32> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for b in brs.iter().filter(|b| b.g > 0.0) {
        if let Some(to) = b.b {
            let (ra, rb) = (find(&mut parent, b.a), find(&mut parent, to));
            parent[ra] = rb;
        }
    }
    let mut grounded = vec![false; n];
    for b in brs.iter().filter(|b| b.g > 0.0 && b.b.is_none()) {
        let r = find(&mut parent, b.a);
        grounded[r] = true;
    }
    for (i, _) in fixed.iter().enumerate().filter(|(_, f)| **f) {
        let r = find(&mut parent, i);
        grounded[r] = true;
    }
    let n_bus_nodes = 3 * net.bus_ids.len();
    let mut out = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if !grounded[r] {
            let bus_idx = if i < n_bus_nodes { i / 3 } else { net.port_buses[i - n_bus_nodes] };
            out.push(net.bus_ids[bus_idx]);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn factor(net: &Network, n: usize, brs: &[Br], fixed: &[bool], key: Vec<u64>) -> Result<Factor> {
    let floating = floating_buses(net, n, brs, fixed);
    if !floating.is_empty() {
        return Err(Error::SingularNetwork { buses: floating });
    }
    let mut y = DMatrix::<f64>::zeros(n, n);
    for b in brs {
        y[(b.a, b.a)] += b.g;
        if let Some(to) = b.b {
            y[(to, to)] += b.g;
            y[(b.a, to)] -= b.g;
            y[(to, b.a)] -= b.g;
        }
    }
    let unknown: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let known: Vec<usize> = (0..n).filter(|&i| fixed[i]).collect();
    let yuu = y.select_rows(&unknown).select_columns(&unknown);
    let lu = yuu.lu();
    if !unknown.is_empty() && !lu.is_invertible() {
        let mut buses: Vec<u32> = net.bus_ids.clone();
        buses.dedup();
        return Err(Error::SingularNetwork { buses });
    }
    Ok(Factor { key, y, unknown, known, lu })
}

fn solve(f: &Factor, n: usize, brs: &[Br], v_fixed: &[f64]) -> Result<Vec<f64>> {
    let mut rhs = vec![0.0; n];
    for b in brs {
        rhs[b.a] -= b.h;
        if let Some(to) = b.b {
            rhs[to] += b.h;
        }
    }
    if f.unknown.is_empty() {
        return Ok(v_fixed.to_vec());
    }
    let mut bu = DVector::from_iterator(f.unknown.len(), f.unknown.iter().map(|&i| rhs[i]));
    for (r, &i) in f.unknown.iter().enumerate() {
        for &k in &f.known {
            bu[r] -= f.y[(i, k)] * v_fixed[k];
        }
    }
    let x = f
        .lu
        .solve(&bu)
        .ok_or_else(|| Error::non_finite("nodal solve"))?;
    let mut v = v_fixed.to_vec();
    for (r, &i) in f.unknown.iter().enumerate() {
        v[i] = x[r];
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::non_finite("node voltages"));
    }
    Ok(v)
}

pub(super) fn step(net: &mut Network, dt: f64, ports: &[PortStamp], sources: &[(u32, ThreePhase)]) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::non_finite(format!("network dt = {dt}")));
    }
    if ports.len() != net.port_buses.len() {
        return Err(Error::Config(vec![format!(
            "network has {} ports but {} stamps were supplied",
            net.port_buses.len(),
            ports.len()
        )]));
    }
    let n = net.state.v.len();
    if n == 0 {
        return Ok(());
    }
    let mut fixed = vec![false; n];
    let mut v_fixed = vec![0.0; n];
    for (bus, v) in sources {
        let i = net.bus_index(*bus)?;
        for ph in 0..3 {
            fixed[3 * i + ph] = true;
            v_fixed[3 * i + ph] = v[ph];
        }
    }

    let w = net.omega;
    let v0 = net.state.v.clone();
    let mut sweeps = 0;
    let (brs, v1) = loop {
        let brs = branches(net, dt, ports);
        let key = matrix_key(&brs, &fixed, dt);
        if net.cache.as_ref().is_none_or(|f| f.key != key) {
            net.cache = Some(factor(net, n, &brs, &fixed, key)?);
        }
        let v1 = solve(net.cache.as_ref().expect("factored"), n, &brs, &v_fixed)?;
        sweeps += 1;
        let mut changed = false;
        for (d, s) in net.desc.transformers.iter().zip(net.state.transformers.iter_mut()) {
            let lv = 3 * net.bus_ids.binary_search(&d.lv_bus).expect("validated bus");
            for ph in 0..3 {
                let psi1 = s.psi[ph] + w * dt * (v0[lv + ph] + v1[lv + ph]) / 2.0;
                let seg = d.magnetizing.segment(psi1);
                if seg != s.segment[ph] {
                    s.segment[ph] = seg;
                    changed = true;
                }
            }
        }
        if !changed || sweeps >= MAX_SEGMENT_SWEEPS {
            break (brs, v1);
        }
    };

    let mut net_current = vec![0.0; n];
    let st = &mut net.state;
    for b in &brs {
        let i = b.g * (v1[b.a] - b.b.map_or(0.0, |x| v1[x])) + b.h;
        net_current[b.a] += i;
        if let Some(to) = b.b {
            net_current[to] -= i;
        }
        match b.tag {
            Tag::LineSeries(k, ph) => st.lines[k].i[ph] = i,
            Tag::LineCapFrom(k, ph) => st.lines[k].i_cf[ph] = i,
            Tag::LineCapTo(k, ph) => st.lines[k].i_ct[ph] = i,
            Tag::TrafoSeries(k, ph) => st.transformers[k].i[ph] = i,
            Tag::TrafoMag(k, ph) => st.transformers[k].i_mag[ph] = i,
            Tag::TrafoCore(k, ph) => st.transformers[k].i_core[ph] = i,
            Tag::LoadR(k, ph) => st.loads[k].i_r[ph] = i,
            Tag::LoadL(k, ph) => st.loads[k].i_l[ph] = i,
            Tag::LoadC(k, ph) => st.loads[k].i_c[ph] = i,
            Tag::Fault(k, ph) => st.faults[k].record(ph, i),
            Tag::Port => {}
        }
    }
    for (d, s) in net.desc.transformers.iter().zip(st.transformers.iter_mut()) {
        let lv = 3 * net.bus_ids.binary_search(&d.lv_bus).expect("validated bus");
        for ph in 0..3 {
            let psi1 = s.psi[ph] + w * dt * (v0[lv + ph] + v1[lv + ph]) / 2.0;
            if d.magnetizing.segment(psi1) != s.segment[ph] {
                // Sweeps exhausted at a knee: fall back to the curve itself.
                let exact = d.magnetizing.current(psi1);
                net_current[lv + ph] += exact - s.i_mag[ph];
                s.i_mag[ph] = exact;
                s.segment[ph] = d.magnetizing.segment(psi1);
            }
            s.psi[ph] = psi1;
        }
        s.fresh = false;
    }
    for l in &mut st.lines {
        l.fresh = false;
    }
    for l in &mut st.loads {
        l.fresh = false;
    }
    st.kcl_residual = (0..n)
        .filter(|&i| !fixed[i])
        .map(|i| net_current[i].abs())
        .fold(0.0, f64::max);
    st.v = v1;
    Ok(())
}
