//! Block-diagram integrator: SISO state-space blocks and summing junctions
//! wired together and advanced jointly with one RK4 step over the stacked
//! state, so no block sees a stale input from its neighbours.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ss::StateSpaceModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Node(usize),
    /// Externally held input, constant across a step.
    Exo(usize),
}

#[derive(Debug, Clone)]
enum Kind {
    Dynamic(StateSpaceModel),
    Sum { limit: Option<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    kind: Kind,
    inputs: Vec<(Source, f64)>,
    offset: usize,
}

impl Node {
    fn feedthrough(&self) -> bool {
        match &self.kind {
            Kind::Dynamic(m) => m.has_feedthrough(),
            Kind::Sum { .. } => true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    exo: usize,
}

impl NetworkBuilder {
    pub fn new(exo_inputs: usize) -> Self {
        Self { nodes: Vec::new(), exo: exo_inputs }
    }

    pub fn dynamic(&mut self, model: StateSpaceModel) -> usize {
        self.nodes.push(Node { kind: Kind::Dynamic(model), inputs: Vec::new(), offset: 0 });
        self.nodes.len() - 1
    }

    pub fn sum(&mut self, limit: Option<f64>) -> usize {
        self.nodes.push(Node { kind: Kind::Sum { limit }, inputs: Vec::new(), offset: 0 });
        self.nodes.len() - 1
    }

    pub fn connect(&mut self, to: usize, from: Source, gain: f64) -> &mut Self {
        self.nodes[to].inputs.push((from, gain));
        self
    }

    pub fn build(mut self) -> Result<Network> {
        let mut offset = 0;
        for node in &mut self.nodes {
            node.offset = offset;
            if let Kind::Dynamic(m) = &node.kind {
                offset += m.order();
            }
        }
        let order = feedthrough_order(&self.nodes)?;
        let mut state = vec![0.0; offset];
        for node in &self.nodes {
            if let Kind::Dynamic(m) = &node.kind {
                state[node.offset..node.offset + m.order()].copy_from_slice(m.state());
            }
        }
        let n_nodes = self.nodes.len();
        Ok(Network {
            nodes: self.nodes,
            order,
            exo: vec![0.0; self.exo],
            state,
            outputs: vec![0.0; n_nodes],
            inputs: vec![0.0; n_nodes],
            scratch: Scratch::new(offset),
        })
    }
}

/// Topological order of the feedthrough nodes along feedthrough edges.
fn feedthrough_order(nodes: &[Node]) -> Result<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(i: usize, nodes: &[Node], marks: &mut [Mark], out: &mut Vec<usize>) -> Result<()> {
        match marks[i] {
            Mark::Done => return Ok(()),
            Mark::Active => return Err(Error::AlgebraicLoop { block: i }),
            Mark::New => {}
        }
        marks[i] = Mark::Active;
        for &(src, _) in &nodes[i].inputs {
            if let Source::Node(j) = src {
                if nodes[j].feedthrough() {
                    visit(j, nodes, marks, out)?;
                }
            }
        }
        marks[i] = Mark::Done;
        out.push(i);
        Ok(())
    }
    let mut marks = vec![Mark::New; nodes.len()];
    let mut out = Vec::new();
    for i in 0..nodes.len() {
        if nodes[i].feedthrough() {
            visit(i, nodes, &mut marks, &mut out)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Scratch {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]], tmp: vec![0.0; n] }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    order: Vec<usize>,
    exo: Vec<f64>,
    state: Vec<f64>,
    outputs: Vec<f64>,
    inputs: Vec<f64>,
    scratch: Scratch,
}

impl Network {
    pub fn set_exo(&mut self, idx: usize, value: f64) {
        self.exo[idx] = value;
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Node outputs at the current state and held inputs.
    pub fn refresh(&mut self) -> &[f64] {
        let state = core::mem::take(&mut self.state);
        self.evaluate(&state);
        self.state = state;
        &self.outputs
    }

    pub fn output(&self, node: usize) -> f64 {
        self.outputs[node]
    }

    /// Input to `node` as of the last evaluation.
    pub fn input(&self, node: usize) -> f64 {
        self.inputs[node]
    }

    fn source_value(&self, src: Source) -> f64 {
        match src {
            Source::Node(j) => self.outputs[j],
            Source::Exo(j) => self.exo[j],
        }
    }

    fn node_input(&self, i: usize) -> f64 {
        self.nodes[i].inputs.iter().map(|&(src, g)| g * self.source_value(src)).sum()
    }

    fn evaluate(&mut self, x: &[f64]) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Kind::Dynamic(m) = &node.kind {
                if !m.has_feedthrough() {
                    self.outputs[i] = m.output_at(&x[node.offset..node.offset + m.order()], 0.0);
                }
            }
        }
        for k in 0..self.order.len() {
            let i = self.order[k];
            let u = self.node_input(i);
            self.inputs[i] = u;
            let node = &self.nodes[i];
            self.outputs[i] = match &node.kind {
                Kind::Dynamic(m) => m.output_at(&x[node.offset..node.offset + m.order()], u),
                Kind::Sum { limit: Some(l) } => u.clamp(-*l, *l),
                Kind::Sum { limit: None } => u,
            };
        }
        for i in 0..self.nodes.len() {
            if !self.nodes[i].feedthrough() {
                self.inputs[i] = self.node_input(i);
            }
        }
    }

    fn derivative(&mut self, x: &[f64], dx: &mut [f64]) {
        self.evaluate(x);
        for (i, node) in self.nodes.iter().enumerate() {
            if let Kind::Dynamic(m) = &node.kind {
                let r = node.offset..node.offset + m.order();
                m.derivative(&x[r.clone()], self.inputs[i], &mut dx[r]);
            }
        }
    }

    /// One RK4 step of length `dt` with the exogenous inputs held.
    pub fn step(&mut self, dt: f64, time: f64) -> Result<()> {
        let n = self.state.len();
        if n == 0 {
            return Ok(());
        }
        let mut s = core::mem::replace(&mut self.scratch, Scratch::new(0));
        let x0 = core::mem::take(&mut self.state);

        self.derivative(&x0, &mut s.k[0]);
        for i in 0..n {
            s.tmp[i] = x0[i] + 0.5 * dt * s.k[0][i];
        }
        let tmp = core::mem::take(&mut s.tmp);
        self.derivative(&tmp, &mut s.k[1]);
        s.tmp = tmp;
        for i in 0..n {
            s.tmp[i] = x0[i] + 0.5 * dt * s.k[1][i];
        }
        let tmp = core::mem::take(&mut s.tmp);
        self.derivative(&tmp, &mut s.k[2]);
        s.tmp = tmp;
        for i in 0..n {
            s.tmp[i] = x0[i] + dt * s.k[2][i];
        }
        let tmp = core::mem::take(&mut s.tmp);
        self.derivative(&tmp, &mut s.k[3]);
        s.tmp = tmp;

        let mut x1 = x0;
        let mut finite = true;
        for i in 0..n {
            x1[i] += dt / 6.0 * (s.k[0][i] + 2.0 * s.k[1][i] + 2.0 * s.k[2][i] + s.k[3][i]);
            finite &= x1[i].is_finite();
        }
        self.state = x1;
        self.scratch = s;
        if finite {
            Ok(())
        } else {
            Err(Error::Divergence { time })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::TransferFunction;

    fn lag(tau: f64) -> StateSpaceModel {
        StateSpaceModel::from_tf(&TransferFunction::first_order_lag(1.0, tau).unwrap()).unwrap()
    }

    #[test]
    fn unity_feedback_lag_matches_analytic() {
        // y = 1/(s+1) driven by (r − y): closed loop 1/(s+2), step → 0.5(1 − e^{−2t})
        let mut b = NetworkBuilder::new(1);
        let g = b.dynamic(lag(1.0));
        let e = b.sum(None);
        b.connect(e, Source::Exo(0), 1.0).connect(e, Source::Node(g), -1.0);
        b.connect(g, Source::Node(e), 1.0);
        let mut net = b.build().unwrap();
        net.set_exo(0, 1.0);
        let dt = 1e-3;
        for k in 0..1000 {
            net.step(dt, k as f64 * dt).unwrap();
        }
        let y = net.refresh()[g];
        assert!((y - 0.5 * (1.0 - libm::exp(-2.0))).abs() < 1e-9);
    }

    #[test]
    fn algebraic_loop_detected() {
        let mut b = NetworkBuilder::new(0);
        let a = b.sum(None);
        let c = b.sum(None);
        b.connect(a, Source::Node(c), 1.0).connect(c, Source::Node(a), 0.5);
        assert!(matches!(b.build(), Err(Error::AlgebraicLoop { .. })));
    }

    #[test]
    fn clamp_applies() {
        let mut b = NetworkBuilder::new(1);
        let s = b.sum(Some(2.0));
        b.connect(s, Source::Exo(0), 1.0);
        let mut net = b.build().unwrap();
        net.set_exo(0, -5.0);
        assert_eq!(net.refresh()[s], -2.0);
    }
}
