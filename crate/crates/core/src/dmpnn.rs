//! Directional message passing over bond states.
//!
//! Hidden states live on directed edges. Each edge (i, j) is initialized
//! from the source node's features concatenated with the edge features; at
//! every step it receives the sum of states on edges entering i, excluding
//! its own reverse edge, and re-activates around the initial state:
//!
//! ```text
//! h0_ij   = ReLU(W_in [X_i | E_ij])
//! m_ij    = sum over k in N(i)\{j} of h_ki
//! h'_ij   = ReLU(h0_ij + W_e m_ij)
//! ```
//!
//! After the final step, node states aggregate incoming edges and pass
//! through the readout, and molecule representations are sum-pooled:
//!
//! ```text
//! m_i = sum over j in N(i) of h_ji
//! h_i = ReLU(W_n [X_i | m_i])
//! h_G = sum over i of h_i
//! ```
//!
//! Molecules without any bonds are valid: the node message is zero and the
//! readout runs on node features alone.

use std::rc::Rc;

use rand::Rng;

use crate::autodiff::{ParamId, ParamSet, Shape, Tape, Value};
use crate::error::{GateError, Result};
use crate::init::{xavier_uniform, zeros};
use crate::scalar::{lit, Scalar};
use crate::smiles::{MolGraph, EDGE_FEATURE_WIDTH, NODE_FEATURE_WIDTH};

/// Sizes of one message passing network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DmpnnConfig {
    pub node_in: usize,
    pub edge_in: usize,
    pub hidden: usize,
    pub out: usize,
    pub depth: usize,
}

/// Parameter handles for one message passing network.
#[derive(Clone, Debug)]
pub struct Dmpnn {
    pub cfg: DmpnnConfig,
    w_in: ParamId,
    b_in: ParamId,
    w_e: ParamId,
    b_e: ParamId,
    w_n: ParamId,
    b_n: ParamId,
}

/// Edge hidden states over a batch graph during message passing.
#[derive(Clone, Copy, Debug)]
pub struct EdgeStates {
    /// Initial per-edge state; `None` for edgeless graphs.
    pub h0: Option<Value>,
    /// Current per-edge state after `steps` message steps.
    pub h: Option<Value>,
    pub steps: usize,
}

/// Output representation of one forward pass.
///
/// `pooled` has one row per molecule in the batch and equals the column sum
/// of that molecule's node states.
#[derive(Clone, Copy, Debug)]
pub struct GraphRepr {
    pub node_states: Value,
    pub edge_states: Option<Value>,
    pub pooled: Value,
}

/// A batch of molecules laid out as one disjoint-union graph.
///
/// Node and edge rows of all molecules are stacked; the index groups below
/// drive the sparse aggregations on the tape.
pub struct BatchGraph {
    pub node_count: usize,
    pub edge_count: usize,
    pub size: usize,
    node_features: Vec<f64>,
    edge_features: Vec<f64>,
    /// Singleton groups mapping each directed edge to its source node.
    edge_src: Rc<Vec<Vec<usize>>>,
    /// For each directed edge (i, j): edges (k, i) with k != j.
    edge_msg_groups: Rc<Vec<Vec<usize>>>,
    /// For each node: incoming directed edges.
    node_in_groups: Rc<Vec<Vec<usize>>>,
    /// For each molecule: its node indices (pooling groups).
    node_groups: Rc<Vec<Vec<usize>>>,
}

impl BatchGraph {
    /// Stack featurized molecules into one batch graph.
    pub fn new(mols: &[&MolGraph]) -> Result<BatchGraph> {
        if mols.is_empty() {
            return Err(GateError::Contract("empty batch".into()));
        }
        let mut node_features = Vec::new();
        let mut edge_features = Vec::new();
        let mut edge_src = Vec::new();
        let mut edge_msg_groups = Vec::new();
        let mut node_in_groups = Vec::new();
        let mut node_groups = Vec::new();
        let mut node_base = 0usize;
        let mut edge_base = 0usize;

        for mol in mols {
            if !mol.is_featurized() {
                return Err(GateError::Contract("molecule not featurized".into()));
            }
            node_features.extend_from_slice(&mol.node_features);
            edge_features.extend_from_slice(&mol.edge_features);

            let incoming: Vec<Vec<usize>> = (0..mol.num_atoms())
                .map(|i| mol.incoming_edges(i))
                .collect();

            for (e, de) in mol.directed.iter().enumerate() {
                edge_src.push(vec![node_base + de.src]);
                let group = incoming[de.src]
                    .iter()
                    .copied()
                    .filter(|&k| k != de.reverse)
                    .map(|k| edge_base + k)
                    .collect();
                edge_msg_groups.push(group);
                debug_assert_eq!(mol.directed[de.reverse].reverse, e);
            }
            for inc in &incoming {
                node_in_groups.push(inc.iter().map(|&k| edge_base + k).collect());
            }
            node_groups.push((node_base..node_base + mol.num_atoms()).collect());

            node_base += mol.num_atoms();
            edge_base += mol.num_directed_edges();
        }

        Ok(BatchGraph {
            node_count: node_base,
            edge_count: edge_base,
            size: mols.len(),
            node_features,
            edge_features,
            edge_src: Rc::new(edge_src),
            edge_msg_groups: Rc::new(edge_msg_groups),
            node_in_groups: Rc::new(node_in_groups),
            node_groups: Rc::new(node_groups),
        })
    }

    pub fn single(mol: &MolGraph) -> Result<BatchGraph> {
        BatchGraph::new(&[mol])
    }

    /// Raw node features as a tape constant.
    pub fn node_features<T: Scalar>(&self, tape: &mut Tape<T>) -> Value {
        let data = self.node_features.iter().map(|&x| lit(x)).collect();
        tape.constant(Shape::matrix(self.node_count, NODE_FEATURE_WIDTH), data)
    }

    /// Raw edge features as a tape constant; `None` when the batch has no bonds.
    pub fn edge_features<T: Scalar>(&self, tape: &mut Tape<T>) -> Option<Value> {
        if self.edge_count == 0 {
            return None;
        }
        let data = self.edge_features.iter().map(|&x| lit(x)).collect();
        Some(tape.constant(Shape::matrix(self.edge_count, EDGE_FEATURE_WIDTH), data))
    }

    /// Per-molecule node index groups (used to re-pool perturbed states).
    pub fn pooling_groups(&self) -> Rc<Vec<Vec<usize>>> {
        Rc::clone(&self.node_groups)
    }
}

impl Dmpnn {
    /// Allocate parameters (Xavier-uniform weights, zero biases).
    pub fn new<T: Scalar, R: Rng>(
        name: &str,
        cfg: DmpnnConfig,
        params: &mut ParamSet<T>,
        rng: &mut R,
    ) -> Result<Dmpnn> {
        if cfg.node_in == 0 || cfg.edge_in == 0 || cfg.hidden == 0 || cfg.out == 0 || cfg.depth == 0
        {
            return Err(GateError::Config(format!(
                "dmpnn '{name}' has a zero dimension: {cfg:?}"
            )));
        }
        let in_width = cfg.node_in + cfg.edge_in;
        let w_in = params.alloc(
            format!("{name}.w_in"),
            Shape::matrix(in_width, cfg.hidden),
            xavier_uniform(in_width, cfg.hidden, rng),
        );
        let b_in = params.alloc(format!("{name}.b_in"), Shape::vector(cfg.hidden), zeros(cfg.hidden));
        let w_e = params.alloc(
            format!("{name}.w_e"),
            Shape::matrix(cfg.hidden, cfg.hidden),
            xavier_uniform(cfg.hidden, cfg.hidden, rng),
        );
        let b_e = params.alloc(format!("{name}.b_e"), Shape::vector(cfg.hidden), zeros(cfg.hidden));
        let readout_in = cfg.node_in + cfg.hidden;
        let w_n = params.alloc(
            format!("{name}.w_n"),
            Shape::matrix(readout_in, cfg.out),
            xavier_uniform(readout_in, cfg.out, rng),
        );
        let b_n = params.alloc(format!("{name}.b_n"), Shape::vector(cfg.out), zeros(cfg.out));
        Ok(Dmpnn { cfg, w_in, b_in, w_e, b_e, w_n, b_n })
    }

    /// `h0_ij = ReLU(W_in [X_i | E_ij])` for every directed edge.
    pub fn init_edges<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        batch: &BatchGraph,
        node_feats: Value,
        edge_feats: Option<Value>,
    ) -> Result<EdgeStates> {
        if tape.shape(node_feats).cols() != self.cfg.node_in {
            return Err(GateError::dimension(
                "dmpnn node features",
                tape.shape(node_feats),
                format!("node_in {}", self.cfg.node_in),
            ));
        }
        let Some(edge_feats) = edge_feats else {
            return Ok(EdgeStates { h0: None, h: None, steps: 0 });
        };
        if tape.shape(edge_feats).cols() != self.cfg.edge_in {
            return Err(GateError::dimension(
                "dmpnn edge features",
                tape.shape(edge_feats),
                format!("edge_in {}", self.cfg.edge_in),
            ));
        }
        let w_in = tape.param(params, self.w_in);
        let b_in = tape.param(params, self.b_in);
        let x_src = tape.gather_sum(node_feats, Rc::clone(&batch.edge_src))?;
        let cat = tape.concat(x_src, edge_feats)?;
        let lin = tape.matmul(cat, w_in)?;
        let pre = tape.add_bias(lin, b_in)?;
        let h0 = tape.relu(pre);
        Ok(EdgeStates { h0: Some(h0), h: Some(h0), steps: 0 })
    }

    /// One message step: `h'_ij = ReLU(h0_ij + W_e sum_{k in N(i)\j} h_ki)`.
    pub fn message_step<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        batch: &BatchGraph,
        states: &EdgeStates,
    ) -> Result<EdgeStates> {
        let (Some(h0), Some(h)) = (states.h0, states.h) else {
            return Ok(EdgeStates { steps: states.steps + 1, ..*states });
        };
        let w_e = tape.param(params, self.w_e);
        let b_e = tape.param(params, self.b_e);
        let msg = tape.gather_sum(h, Rc::clone(&batch.edge_msg_groups))?;
        let lin = tape.matmul(msg, w_e)?;
        let lin = tape.add_bias(lin, b_e)?;
        let sum = tape.add(h0, lin)?;
        let next = tape.relu(sum);
        Ok(EdgeStates { h0: Some(h0), h: Some(next), steps: states.steps + 1 })
    }

    /// Node readout and per-molecule sum pooling.
    pub fn node_readout<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        batch: &BatchGraph,
        node_feats: Value,
        states: &EdgeStates,
    ) -> Result<GraphRepr> {
        let msg = match states.h {
            Some(h) => tape.gather_sum(h, Rc::clone(&batch.node_in_groups))?,
            None => tape.constant(
                Shape::matrix(batch.node_count, self.cfg.hidden),
                vec![T::zero(); batch.node_count * self.cfg.hidden],
            ),
        };
        let w_n = tape.param(params, self.w_n);
        let b_n = tape.param(params, self.b_n);
        let cat = tape.concat(node_feats, msg)?;
        let lin = tape.matmul(cat, w_n)?;
        let pre = tape.add_bias(lin, b_n)?;
        let node_states = tape.relu(pre);
        let pooled = tape.gather_sum(node_states, Rc::clone(&batch.node_groups))?;
        Ok(GraphRepr { node_states, edge_states: states.h, pooled })
    }

    /// Full pass: edge init, `depth` message steps, readout, pooling.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        batch: &BatchGraph,
        node_feats: Value,
        edge_feats: Option<Value>,
    ) -> Result<GraphRepr> {
        let mut states = self.init_edges(tape, params, batch, node_feats, edge_feats)?;
        for _ in 0..self.cfg.depth {
            states = self.message_step(tape, params, batch, &states)?;
        }
        self.node_readout(tape, params, batch, node_feats, &states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::{featurize, parse_and_featurize, Atom, BondOrder, Element};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_dmpnn(hidden: usize, out: usize, seed: u64) -> (Dmpnn, ParamSet<f64>) {
        let mut params: ParamSet<f64> = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Dmpnn::new(
            "test",
            DmpnnConfig {
                node_in: NODE_FEATURE_WIDTH,
                edge_in: EDGE_FEATURE_WIDTH,
                hidden,
                out,
                depth: 2,
            },
            &mut params,
            &mut rng,
        )
        .unwrap();
        (net, params)
    }

    fn forward_graph(net: &Dmpnn, params: &ParamSet<f64>, mol: &MolGraph) -> (Vec<f64>, Vec<f64>) {
        let batch = BatchGraph::single(mol).unwrap();
        let mut tape = Tape::new();
        let nf = batch.node_features(&mut tape);
        let ef = batch.edge_features(&mut tape);
        let repr = net.forward(&mut tape, params, &batch, nf, ef).unwrap();
        (
            tape.data(repr.node_states).to_vec(),
            tape.data(repr.pooled).to_vec(),
        )
    }

    /// Plain-loop transcription of the message passing equations, sharing
    /// parameter values with the engine but no code.
    pub(crate) fn oracle_forward(
        mol: &MolGraph,
        params: &ParamSet<f64>,
        net: &Dmpnn,
    ) -> (Vec<f64>, Vec<f64>) {
        let cfg = &net.cfg;
        let w_in = &params.entry(net.w_in).data;
        let b_in = &params.entry(net.b_in).data;
        let w_e = &params.entry(net.w_e).data;
        let b_e = &params.entry(net.b_e).data;
        let w_n = &params.entry(net.w_n).data;
        let b_n = &params.entry(net.b_n).data;
        let nf = &mol.node_features;
        let ef = &mol.edge_features;
        let (n_atoms, n_edges) = (mol.num_atoms(), mol.num_directed_edges());
        let relu = |x: f64| if x > 0.0 { x } else { 0.0 };

        // h0_ij = ReLU(W_in [X_i | E_ij])
        let mut h0 = vec![0.0; n_edges * cfg.hidden];
        for (e, de) in mol.directed.iter().enumerate() {
            let mut cat = Vec::with_capacity(cfg.node_in + cfg.edge_in);
            cat.extend_from_slice(&nf[de.src * cfg.node_in..(de.src + 1) * cfg.node_in]);
            cat.extend_from_slice(&ef[e * cfg.edge_in..(e + 1) * cfg.edge_in]);
            for o in 0..cfg.hidden {
                let mut acc = b_in[o];
                for (i, &x) in cat.iter().enumerate() {
                    acc += x * w_in[i * cfg.hidden + o];
                }
                h0[e * cfg.hidden + o] = relu(acc);
            }
        }

        // depth message steps
        let mut h = h0.clone();
        for _ in 0..cfg.depth {
            let mut msg = vec![0.0; n_edges * cfg.hidden];
            for (e, de) in mol.directed.iter().enumerate() {
                for (e2, de2) in mol.directed.iter().enumerate() {
                    if de2.dst == de.src && de2.src != de.dst {
                        for o in 0..cfg.hidden {
                            msg[e * cfg.hidden + o] += h[e2 * cfg.hidden + o];
                        }
                    }
                }
            }
            let mut next = vec![0.0; n_edges * cfg.hidden];
            for e in 0..n_edges {
                for o in 0..cfg.hidden {
                    let mut acc = b_e[o];
                    for i in 0..cfg.hidden {
                        acc += msg[e * cfg.hidden + i] * w_e[i * cfg.hidden + o];
                    }
                    next[e * cfg.hidden + o] = relu(h0[e * cfg.hidden + o] + acc);
                }
            }
            h = next;
        }

        // m_i = sum of h_ji over incoming edges; h_i = ReLU(W_n [X_i | m_i])
        let mut node_states = vec![0.0; n_atoms * cfg.out];
        let mut pooled = vec![0.0; cfg.out];
        for i in 0..n_atoms {
            let mut m = vec![0.0; cfg.hidden];
            for (e, de) in mol.directed.iter().enumerate() {
                if de.dst == i {
                    for o in 0..cfg.hidden {
                        m[o] += h[e * cfg.hidden + o];
                    }
                }
            }
            let mut cat = Vec::with_capacity(cfg.node_in + cfg.hidden);
            cat.extend_from_slice(&nf[i * cfg.node_in..(i + 1) * cfg.node_in]);
            cat.extend_from_slice(&m);
            for o in 0..cfg.out {
                let mut acc = b_n[o];
                for (k, &x) in cat.iter().enumerate() {
                    acc += x * w_n[k * cfg.out + o];
                }
                let v = relu(acc);
                node_states[i * cfg.out + o] = v;
                pooled[o] += v;
            }
        }
        (node_states, pooled)
    }

    /// Random molecular-ish graph with up to `max_atoms` atoms.
    pub(crate) fn random_graph(rng: &mut ChaCha8Rng, max_atoms: usize) -> MolGraph {
        let n = 1 + (rng.random::<u64>() as usize) % max_atoms;
        let elements = [Element::C, Element::N, Element::O, Element::S];
        let atoms: Vec<Atom> = (0..n)
            .map(|_| Atom {
                element: elements[(rng.random::<u64>() as usize) % elements.len()],
                formal_charge: 0,
                aromatic: false,
                hydrogens: 0,
                ring_member: false,
            })
            .collect();
        let mut bonds = Vec::new();
        // Random spanning tree keeps the graph connected.
        for i in 1..n {
            let parent = (rng.random::<u64>() as usize) % i;
            bonds.push((parent, i, BondOrder::Single));
        }
        // Occasional extra edge to close a ring.
        if n >= 3 && rng.random::<f64>() < 0.5 {
            let a = (rng.random::<u64>() as usize) % n;
            let b = (rng.random::<u64>() as usize) % n;
            if a != b && !bonds.iter().any(|&(x, y, _)| (x, y) == (a.min(b), a.max(b))) {
                bonds.push((a.min(b), a.max(b), BondOrder::Single));
            }
        }
        featurize(MolGraph::from_parts(atoms, bonds).unwrap())
    }

    #[test]
    fn single_atom_molecule_is_valid() {
        let (net, params) = tiny_dmpnn(7, 5, 1);
        let mol = parse_and_featurize("C").unwrap();
        let (node_states, pooled) = forward_graph(&net, &params, &mol);
        assert_eq!(node_states.len(), 5);
        // One atom: pooled equals the node state.
        assert_eq!(node_states, pooled);
        let (o_nodes, o_pooled) = oracle_forward(&mol, &params, &net);
        assert_eq!(node_states, o_nodes);
        assert_eq!(pooled, o_pooled);
    }

    #[test]
    fn init_edges_nonnegative_and_symmetric_for_ethane() {
        let (net, params) = tiny_dmpnn(7, 5, 2);
        let mol = parse_and_featurize("CC").unwrap();
        let batch = BatchGraph::single(&mol).unwrap();
        let mut tape = Tape::new();
        let nf = batch.node_features(&mut tape);
        let ef = batch.edge_features(&mut tape);
        let states = net.init_edges(&mut tape, &params, &batch, nf, ef).unwrap();
        let h0 = tape.data(states.h0.unwrap());
        assert!(h0.iter().all(|&x| x >= 0.0), "ReLU output is nonnegative");
        // Both directed edges see identical inputs by symmetry.
        let (a, b) = h0.split_at(h0.len() / 2);
        assert_eq!(a, b);
    }

    #[test]
    fn leaf_edge_message_is_zero() {
        // In a two-atom molecule, edge (0,1) has no incoming edges besides
        // its reverse, so its message is zero and h1 = ReLU(h0) = h0.
        let (net, params) = tiny_dmpnn(7, 5, 3);
        let mol = parse_and_featurize("CC").unwrap();
        let batch = BatchGraph::single(&mol).unwrap();
        let mut tape = Tape::new();
        let nf = batch.node_features(&mut tape);
        let ef = batch.edge_features(&mut tape);
        let states = net.init_edges(&mut tape, &params, &batch, nf, ef).unwrap();
        let h0 = tape.data(states.h0.unwrap()).to_vec();
        let stepped = net.message_step(&mut tape, &params, &batch, &states).unwrap();
        assert_eq!(tape.data(stepped.h.unwrap()), h0.as_slice());
    }

    #[test]
    fn propane_middle_edge_receives_single_message() {
        // Atoms 0-1-2: the edge (1,2) receives exactly h_{01}.
        let (net, params) = tiny_dmpnn(6, 4, 4);
        let mol = parse_and_featurize("CCC").unwrap();
        let batch = BatchGraph::single(&mol).unwrap();
        assert_eq!(batch.edge_msg_groups[2], vec![0], "edge (1,2) sees edge (0,1)");
        let mut tape = Tape::new();
        let nf = batch.node_features(&mut tape);
        let ef = batch.edge_features(&mut tape);
        let states = net.init_edges(&mut tape, &params, &batch, nf, ef).unwrap();
        let h0 = tape.data(states.h0.unwrap()).to_vec();
        let msg = tape
            .gather_sum(states.h.unwrap(), Rc::clone(&batch.edge_msg_groups))
            .unwrap();
        let hidden = net.cfg.hidden;
        assert_eq!(&tape.data(msg)[2 * hidden..3 * hidden], &h0[..hidden]);
    }

    #[test]
    fn matches_oracle_on_random_graphs() {
        let (net, params) = tiny_dmpnn(9, 6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..25 {
            let mol = random_graph(&mut rng, 6);
            let (nodes, pooled) = forward_graph(&net, &params, &mol);
            let (o_nodes, o_pooled) = oracle_forward(&mol, &params, &net);
            for (a, b) in nodes.iter().zip(&o_nodes) {
                assert!((a - b).abs() <= 1e-12, "node state mismatch: {a} vs {b}");
            }
            for (a, b) in pooled.iter().zip(&o_pooled) {
                assert!((a - b).abs() <= 1e-12, "pooled mismatch: {a} vs {b}");
            }
        }
    }

    #[test]
    fn disjoint_union_doubles_pooled() {
        let (net, params) = tiny_dmpnn(7, 5, 6);
        let mol = parse_and_featurize("CC(C)O").unwrap();
        let single = BatchGraph::single(&mol).unwrap();
        let double = BatchGraph::new(&[&mol, &mol]).unwrap();

        let mut tape = Tape::new();
        let nf = single.node_features(&mut tape);
        let ef = single.edge_features(&mut tape);
        let one = net.forward(&mut tape, &params, &single, nf, ef).unwrap();
        let pooled_one = tape.data(one.pooled).to_vec();

        let mut tape2 = Tape::new();
        let nf2 = double.node_features(&mut tape2);
        let ef2 = double.edge_features(&mut tape2);
        let two = net.forward(&mut tape2, &params, &double, nf2, ef2).unwrap();
        let pooled_two = tape2.data(two.pooled);

        // Batch pooling keeps the copies separate and identical...
        assert_eq!(&pooled_two[..pooled_one.len()], pooled_one.as_slice());
        assert_eq!(&pooled_two[pooled_one.len()..], pooled_one.as_slice());
        // ...and their sum is twice one molecule (sum pooling is linear).
        let summed: Vec<f64> = pooled_one.iter().map(|x| 2.0 * x).collect();
        let total: Vec<f64> = (0..pooled_one.len())
            .map(|c| pooled_two[c] + pooled_two[pooled_one.len() + c])
            .collect();
        for (a, b) in total.iter().zip(&summed) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn node_permutation_equivariance() {
        let (net, params) = tiny_dmpnn(8, 5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        for _ in 0..10 {
            let mol = random_graph(&mut rng, 6);
            let n = mol.num_atoms();
            // Reversal permutation: perm[i] is the new index of old atom i.
            let perm: Vec<usize> = (0..n).rev().collect();
            let mut atoms = vec![mol.atoms[0]; n];
            for (old, &new) in perm.iter().enumerate() {
                atoms[new] = mol.atoms[old];
            }
            let bonds: Vec<(usize, usize, BondOrder)> = mol
                .bonds
                .iter()
                .map(|b| (perm[b.a], perm[b.b], b.order))
                .collect();
            let permuted = featurize(MolGraph::from_parts(atoms, bonds).unwrap());

            let (nodes, pooled) = forward_graph(&net, &params, &mol);
            let (p_nodes, p_pooled) = forward_graph(&net, &params, &permuted);

            let out = net.cfg.out;
            for i in 0..n {
                let original = &nodes[i * out..(i + 1) * out];
                let moved = &p_nodes[perm[i] * out..(perm[i] + 1) * out];
                for (a, b) in original.iter().zip(moved) {
                    assert!((a - b).abs() < 1e-12, "node states must permute");
                }
            }
            for (a, b) in pooled.iter().zip(&p_pooled) {
                assert!((a - b).abs() < 1e-12, "pooled must be invariant");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::gradcheck::{central_diff_grad, relative_error, DEFAULT_FD_STEP};

        let (net, mut params) = tiny_dmpnn(5, 4, 8);
        let mol = parse_and_featurize("CC(O)CN").unwrap();
        let batch = BatchGraph::single(&mol).unwrap();

        let loss = |params: &ParamSet<f64>| -> f64 {
            let mut tape = Tape::new();
            let nf = batch.node_features(&mut tape);
            let ef = batch.edge_features(&mut tape);
            let repr = net.forward(&mut tape, params, &batch, nf, ef).unwrap();
            let s = tape.sum_all(repr.pooled);
            tape.scalar(s)
        };

        // Analytic gradients via one backward pass.
        let mut tape = Tape::new();
        let nf = batch.node_features(&mut tape);
        let ef = batch.edge_features(&mut tape);
        let repr = net.forward(&mut tape, &params, &batch, nf, ef).unwrap();
        let s = tape.sum_all(repr.pooled);
        tape.backward(s).unwrap();
        params.zero_grads();
        tape.accumulate_param_grads(&mut params);

        for pid in [net.w_in, net.w_e, net.w_n] {
            let analytic = params.entry(pid).grad.clone();
            let base = params.entry(pid).data.clone();
            let f = |x: &[f64]| {
                let mut p = params.clone();
                p.entry_mut(pid).data.copy_from_slice(x);
                loss(&p)
            };
            let numeric = central_diff_grad(f, &base, DEFAULT_FD_STEP);
            let err = relative_error(&analytic, &numeric);
            assert!(err < 1e-5, "fd mismatch for {}: {err}", params.entry(pid).name);
        }
    }
}
