//! SMILES subset parser, molecular graphs, and feature vectors.
//!
//! Supported grammar: organic-subset atoms (B, C, N, O, P, S, F, Cl, Br, I),
//! aromatic lowercase atoms, bracket atoms with explicit hydrogen counts and
//! charges, bonds `-`, `=`, `#`, branches, and ring closures (`1`-`9` and
//! `%nn`). Stereochemistry, isotopes, and multi-fragment dots are rejected
//! with an explicit parse error rather than silently ignored. Aromaticity is
//! taken from lowercase notation; no kekulization is attempted.

use std::collections::HashMap;

use crate::error::{GateError, Result};

/// Width of every node feature vector.
pub const NODE_FEATURE_WIDTH: usize = 28;
/// Width of every directed-edge feature vector.
pub const EDGE_FEATURE_WIDTH: usize = 6;

/// Chemical element of an atom, restricted to the supported set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    C,
    N,
    O,
    F,
    P,
    S,
    Cl,
    Br,
    I,
    B,
    H,
    Other,
}

impl Element {
    fn from_symbol(sym: &str) -> Option<Element> {
        Some(match sym {
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "F" => Element::F,
            "P" => Element::P,
            "S" => Element::S,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            "B" => Element::B,
            "H" => Element::H,
            _ => return None,
        })
    }

    /// Index into the element one-hot block.
    pub fn one_hot_index(self) -> usize {
        match self {
            Element::C => 0,
            Element::N => 1,
            Element::O => 2,
            Element::F => 3,
            Element::P => 4,
            Element::S => 5,
            Element::Cl => 6,
            Element::Br => 7,
            Element::I => 8,
            Element::B => 9,
            Element::H => 10,
            Element::Other => 11,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::B => "B",
            Element::H => "H",
            Element::Other => "*",
        }
    }

    /// Normal valences, smallest first (used for implicit hydrogen counts).
    fn valences(self) -> &'static [u32] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::H => &[1],
            Element::Other => &[4],
        }
    }
}

/// One heavy atom (or explicit `[H]`) in a molecular graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i32,
    pub aromatic: bool,
    /// Attached hydrogen count: explicit for bracket atoms, valence-derived
    /// otherwise.
    pub hydrogens: u32,
    pub ring_member: bool,
}

/// Bond order between two atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn one_hot_index(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }

    /// Contribution to the valence sum (aromatic counts as one; the
    /// delocalized system adds its extra unit per aromatic atom).
    fn valence_units(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    fn key_char(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

/// Undirected bond between two atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub ring_member: bool,
}

/// One orientation of a bond.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectedEdge {
    pub src: usize,
    pub dst: usize,
    /// Index of the underlying undirected bond.
    pub bond: usize,
    /// Index of the opposite orientation; an involution.
    pub reverse: usize,
}

/// Parsed molecule: atoms, bonds, both bond orientations, and (after
/// [`featurize`]) fixed-width node and edge feature matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub directed: Vec<DirectedEdge>,
    /// Row-major `|V| x NODE_FEATURE_WIDTH`; empty until featurized.
    pub node_features: Vec<f64>,
    /// Row-major `2|B| x EDGE_FEATURE_WIDTH`; empty until featurized.
    pub edge_features: Vec<f64>,
}

impl MolGraph {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn num_directed_edges(&self) -> usize {
        self.directed.len()
    }

    pub fn is_featurized(&self) -> bool {
        !self.node_features.is_empty() || self.atoms.is_empty()
    }

    /// Heavy-atom degree (neighbor count).
    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|b| b.a == atom || b.b == atom).count()
    }

    /// Indices of directed edges pointing into `atom`.
    pub fn incoming_edges(&self, atom: usize) -> Vec<usize> {
        self.directed
            .iter()
            .enumerate()
            .filter(|(_, e)| e.dst == atom)
            .map(|(i, _)| i)
            .collect()
    }

    /// Build a graph from explicit atoms and bonds, computing ring flags,
    /// directed edges, and hydrogen counts. Charges and aromatic flags are
    /// taken as given. Used by generators and tests that bypass SMILES text.
    pub fn from_parts(
        mut atoms: Vec<Atom>,
        bonds: Vec<(usize, usize, BondOrder)>,
    ) -> Result<MolGraph> {
        let n = atoms.len();
        let mut seen = std::collections::HashSet::new();
        let mut built = Vec::with_capacity(bonds.len());
        for &(a, b, order) in &bonds {
            if a == b || a >= n || b >= n {
                return Err(GateError::Contract(format!(
                    "bond ({a},{b}) out of range for {n} atoms"
                )));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GateError::Contract(format!("duplicate bond ({a},{b})")));
            }
            built.push(Bond { a, b, order, ring_member: false });
        }
        mark_ring_bonds(&mut atoms, &mut built);
        for (i, atom) in atoms.iter_mut().enumerate() {
            let units: u32 = built
                .iter()
                .filter(|b| b.a == i || b.b == i)
                .map(|b| b.order.valence_units())
                .sum::<u32>()
                + u32::from(atom.aromatic);
            let val = atom
                .element
                .valences()
                .iter()
                .copied()
                .find(|&v| v >= units)
                .unwrap_or(units);
            atom.hydrogens = val - units;
        }
        Ok(finish_graph(atoms, built))
    }
}

fn finish_graph(atoms: Vec<Atom>, bonds: Vec<Bond>) -> MolGraph {
    let mut directed = Vec::with_capacity(bonds.len() * 2);
    for (k, bond) in bonds.iter().enumerate() {
        directed.push(DirectedEdge { src: bond.a, dst: bond.b, bond: k, reverse: 2 * k + 1 });
        directed.push(DirectedEdge { src: bond.b, dst: bond.a, bond: k, reverse: 2 * k });
    }
    MolGraph {
        atoms,
        bonds,
        directed,
        node_features: Vec::new(),
        edge_features: Vec::new(),
    }
}

/// Mark ring bonds (non-bridges) and ring atoms via iterative DFS.
fn mark_ring_bonds(atoms: &mut [Atom], bonds: &mut [Bond]) {
    let n = atoms.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, b) in bonds.iter().enumerate() {
        adj[b.a].push((b.b, k));
        adj[b.b].push((b.a, k));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![true; bonds.len()];
    let mut timer = 0usize;

    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        // Stack frames: (node, parent bond index, next neighbor cursor).
        let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        while let Some(&mut (u, pbond, ref mut cursor)) = stack.last_mut() {
            if *cursor < adj[u].len() {
                let (v, k) = adj[u][*cursor];
                *cursor += 1;
                if k == pbond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, k, 0));
                } else {
                    // Back edge: part of a cycle.
                    low[u] = low[u].min(disc[v]);
                    is_bridge[k] = false;
                }
            } else {
                stack.pop();
                if let Some(&mut (parent, _, _)) = stack.last_mut() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        // pbond is a bridge (stays true).
                    } else if pbond != usize::MAX {
                        is_bridge[pbond] = false;
                    }
                }
            }
        }
    }

    for (k, bond) in bonds.iter_mut().enumerate() {
        bond.ring_member = !is_bridge[k];
        if bond.ring_member {
            atoms[bond.a].ring_member = true;
            atoms[bond.b].ring_member = true;
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct PendingAtom {
    element: Element,
    aromatic: bool,
    charge: i32,
    explicit_h: Option<u32>,
    offset: usize,
}

struct PendingBond {
    a: usize,
    b: usize,
    order: Option<BondOrder>,
}

struct RingOpening {
    atom: usize,
    order: Option<BondOrder>,
    offset: usize,
}

/// Parse a SMILES string into a molecular graph.
pub fn parse_smiles(s: &str) -> Result<MolGraph> {
    if s.is_empty() {
        return Err(GateError::Parse { offset: 0, message: "empty SMILES".into() });
    }
    if !s.is_ascii() {
        return Err(GateError::Parse { offset: 0, message: "non-ASCII SMILES".into() });
    }
    let bytes = s.as_bytes();
    let mut atoms: Vec<PendingAtom> = Vec::new();
    let mut bonds: Vec<PendingBond> = Vec::new();
    let mut bond_set: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut branch_stack: Vec<(Option<usize>, usize)> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondOrder, usize)> = None;
    let mut rings: HashMap<u32, RingOpening> = HashMap::new();
    let mut pos = 0usize;

    let err = |offset: usize, message: &str| GateError::Parse {
        offset,
        message: message.to_string(),
    };

    let connect = |a: usize,
                       b: usize,
                       order: Option<BondOrder>,
                       offset: usize,
                       bonds: &mut Vec<PendingBond>,
                       bond_set: &mut std::collections::HashSet<(usize, usize)>|
     -> Result<()> {
        if a == b {
            return Err(err(offset, "bond endpoints must be distinct"));
        }
        if !bond_set.insert((a.min(b), a.max(b))) {
            return Err(err(offset, "more than one bond between the same atom pair"));
        }
        bonds.push(PendingBond { a, b, order });
        Ok(())
    };

    while pos < bytes.len() {
        let c = bytes[pos] as char;
        match c {
            'A'..='Z' => {
                let two: Option<&str> = if pos + 1 < bytes.len() {
                    std::str::from_utf8(&bytes[pos..pos + 2]).ok()
                } else {
                    None
                };
                let (sym, width) = match two {
                    Some(t @ ("Cl" | "Br")) => (t, 2),
                    _ => (std::str::from_utf8(&bytes[pos..pos + 1]).unwrap(), 1),
                };
                let element = Element::from_symbol(sym)
                    .filter(|e| !matches!(e, Element::H))
                    .ok_or_else(|| err(pos, &format!("unknown element '{sym}'")))?;
                atoms.push(PendingAtom {
                    element,
                    aromatic: false,
                    charge: 0,
                    explicit_h: None,
                    offset: pos,
                });
                let idx = atoms.len() - 1;
                if let Some(p) = prev {
                    let order = pending.take().map(|(o, _)| o);
                    connect(p, idx, order, pos, &mut bonds, &mut bond_set)?;
                }
                prev = Some(idx);
                pos += width;
            }
            'b' | 'c' | 'n' | 'o' | 'p' | 's' => {
                let element = Element::from_symbol(&c.to_ascii_uppercase().to_string()).unwrap();
                atoms.push(PendingAtom {
                    element,
                    aromatic: true,
                    charge: 0,
                    explicit_h: None,
                    offset: pos,
                });
                let idx = atoms.len() - 1;
                if let Some(p) = prev {
                    let order = pending.take().map(|(o, _)| o);
                    connect(p, idx, order, pos, &mut bonds, &mut bond_set)?;
                }
                prev = Some(idx);
                pos += 1;
            }
            '[' => {
                let (atom, width) = parse_bracket(bytes, pos)?;
                atoms.push(atom);
                let idx = atoms.len() - 1;
                if let Some(p) = prev {
                    let order = pending.take().map(|(o, _)| o);
                    connect(p, idx, order, pos, &mut bonds, &mut bond_set)?;
                }
                prev = Some(idx);
                pos += width;
            }
            '-' | '=' | '#' => {
                if pending.is_some() {
                    return Err(err(pos, "two consecutive bond symbols"));
                }
                let order = match c {
                    '-' => BondOrder::Single,
                    '=' => BondOrder::Double,
                    _ => BondOrder::Triple,
                };
                pending = Some((order, pos));
                pos += 1;
            }
            '(' => {
                if prev.is_none() {
                    return Err(err(pos, "branch opened before any atom"));
                }
                if pending.is_some() {
                    return Err(err(pos, "dangling bond before branch"));
                }
                branch_stack.push((prev, pos));
                pos += 1;
            }
            ')' => {
                if pending.is_some() {
                    return Err(err(pos, "dangling bond before branch close"));
                }
                let (restored, _) = branch_stack
                    .pop()
                    .ok_or_else(|| err(pos, "unbalanced ')'"))?;
                prev = restored;
                pos += 1;
            }
            '0'..='9' | '%' => {
                let (num, width) = if c == '%' {
                    if pos + 2 >= bytes.len()
                        || !bytes[pos + 1].is_ascii_digit()
                        || !bytes[pos + 2].is_ascii_digit()
                    {
                        return Err(err(pos, "'%' ring closure needs two digits"));
                    }
                    ((bytes[pos + 1] - b'0') as u32 * 10 + (bytes[pos + 2] - b'0') as u32, 3)
                } else {
                    ((bytes[pos] - b'0') as u32, 1)
                };
                let current = prev.ok_or_else(|| err(pos, "ring closure before any atom"))?;
                let order_here = pending.take().map(|(o, _)| o);
                match rings.remove(&num) {
                    Some(open) => {
                        let order = match (open.order, order_here) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(err(pos, "conflicting ring-closure bond orders"))
                            }
                            (a, b) => a.or(b),
                        };
                        connect(open.atom, current, order, pos, &mut bonds, &mut bond_set)?;
                    }
                    None => {
                        rings.insert(num, RingOpening { atom: current, order: order_here, offset: pos });
                    }
                }
                pos += width;
            }
            '.' => return Err(err(pos, "multi-fragment '.' not supported")),
            '/' | '\\' | '@' => return Err(err(pos, "stereochemistry not supported")),
            ':' => return Err(err(pos, "explicit aromatic bond ':' not supported")),
            _ => return Err(err(pos, &format!("unexpected character '{c}'"))),
        }
    }

    if let Some((_, offset)) = pending {
        return Err(err(offset, "dangling bond at end of input"));
    }
    if let Some(&(_, offset)) = branch_stack.last() {
        return Err(err(offset, "unbalanced '('"));
    }
    if let Some(open) = rings.values().next() {
        return Err(err(open.offset, "dangling ring closure"));
    }
    if atoms.is_empty() {
        return Err(err(0, "no atoms"));
    }

    build_graph(atoms, bonds)
}

fn parse_bracket(bytes: &[u8], start: usize) -> Result<(PendingAtom, usize)> {
    let err = |offset: usize, message: &str| GateError::Parse {
        offset,
        message: message.to_string(),
    };
    let mut pos = start + 1;
    if pos < bytes.len() && bytes[pos].is_ascii_digit() {
        return Err(err(pos, "isotope specifications not supported"));
    }
    if pos >= bytes.len() {
        return Err(err(start, "unterminated bracket atom"));
    }
    let c = bytes[pos] as char;
    let (element, aromatic, width) = match c {
        'b' | 'c' | 'n' | 'o' | 'p' | 's' => (
            Element::from_symbol(&c.to_ascii_uppercase().to_string()).unwrap(),
            true,
            1,
        ),
        'A'..='Z' => {
            let two: Option<&str> = if pos + 1 < bytes.len() && bytes[pos + 1].is_ascii_lowercase()
            {
                std::str::from_utf8(&bytes[pos..pos + 2]).ok()
            } else {
                None
            };
            match two.and_then(|t| Element::from_symbol(t).map(|e| (e, t.len()))) {
                Some((e, w)) => (e, false, w),
                None => {
                    let sym = std::str::from_utf8(&bytes[pos..pos + 1]).unwrap();
                    let e = Element::from_symbol(sym)
                        .ok_or_else(|| err(pos, &format!("unknown element '{sym}'")))?;
                    (e, false, 1)
                }
            }
        }
        '@' => return Err(err(pos, "stereochemistry not supported")),
        _ => return Err(err(pos, &format!("unexpected character '{c}' in bracket"))),
    };
    pos += width;

    // Explicit hydrogen count. `[nH]`, `[NH2]`, ... — but a leading `H`
    // element was already consumed above, so this only matches a suffix H.
    let mut explicit_h = 0u32;
    if pos < bytes.len() && bytes[pos] == b'H' && element != Element::H {
        pos += 1;
        if pos < bytes.len() && bytes[pos].is_ascii_digit() {
            explicit_h = (bytes[pos] - b'0') as u32;
            pos += 1;
        } else {
            explicit_h = 1;
        }
    }

    // Charge: '+', '-', optionally repeated or followed by one digit.
    let mut charge = 0i32;
    if pos < bytes.len() && (bytes[pos] == b'+' || bytes[pos] == b'-') {
        let sign: i32 = if bytes[pos] == b'+' { 1 } else { -1 };
        let symbol = bytes[pos];
        let mut magnitude = 1i32;
        pos += 1;
        if pos < bytes.len() && bytes[pos].is_ascii_digit() {
            magnitude = (bytes[pos] - b'0') as i32;
            pos += 1;
        } else {
            while pos < bytes.len() && bytes[pos] == symbol {
                magnitude += 1;
                pos += 1;
            }
        }
        charge = sign * magnitude;
    }

    if pos >= bytes.len() || bytes[pos] != b']' {
        return Err(err(start, "unterminated bracket atom"));
    }
    pos += 1;

    Ok((
        PendingAtom {
            element,
            aromatic,
            charge,
            explicit_h: Some(explicit_h),
            offset: start,
        },
        pos - start,
    ))
}

fn build_graph(pending_atoms: Vec<PendingAtom>, pending_bonds: Vec<PendingBond>) -> Result<MolGraph> {
    let mut atoms: Vec<Atom> = pending_atoms
        .iter()
        .map(|p| Atom {
            element: p.element,
            formal_charge: p.charge,
            aromatic: p.aromatic,
            hydrogens: 0,
            ring_member: false,
        })
        .collect();

    // Ring perception first: implicit bond orders depend on ring membership.
    let mut bonds: Vec<Bond> = pending_bonds
        .iter()
        .map(|p| Bond { a: p.a, b: p.b, order: BondOrder::Single, ring_member: false })
        .collect();
    mark_ring_bonds(&mut atoms, &mut bonds);

    for (bond, p) in bonds.iter_mut().zip(&pending_bonds) {
        bond.order = match p.order {
            Some(o) => o,
            None => {
                let both_aromatic = atoms[p.a].aromatic && atoms[p.b].aromatic;
                if both_aromatic && bond.ring_member {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            }
        };
    }

    // Aromatic atoms must sit in a lowercase-written ring.
    for (i, atom) in atoms.iter().enumerate() {
        if atom.aromatic && !atom.ring_member {
            return Err(GateError::Parse {
                offset: pending_atoms[i].offset,
                message: "aromatic atom outside any ring".into(),
            });
        }
    }

    // Hydrogen counts: explicit for bracket atoms, valence-derived otherwise.
    for (i, atom) in atoms.iter_mut().enumerate() {
        let units: u32 = bonds
            .iter()
            .filter(|b| b.a == i || b.b == i)
            .map(|b| b.order.valence_units())
            .sum::<u32>()
            + u32::from(atom.aromatic);
        match pending_atoms[i].explicit_h {
            Some(h) => atom.hydrogens = h,
            None => {
                let val = atom.element.valences().iter().copied().find(|&v| v >= units);
                match val {
                    Some(v) => atom.hydrogens = v - units,
                    None => {
                        return Err(GateError::Parse {
                            offset: pending_atoms[i].offset,
                            message: format!(
                                "valence overflow: {} with {} bond units",
                                atom.element.symbol(),
                                units
                            ),
                        })
                    }
                }
            }
        }
    }

    Ok(finish_graph(atoms, bonds))
}

// ---------------------------------------------------------------------------
// Featurization
// ---------------------------------------------------------------------------

/// Populate fixed-width node and edge feature matrices.
///
/// Node rows (width 28): element one-hot (12) | degree 0-5 one-hot (6) |
/// hydrogen-count 0-4 one-hot (5) | charge sign one-hot (3) | aromatic |
/// ring. Edge rows (width 6): bond-order one-hot (4) | ring | aromatic
/// conjugation proxy. All entries are 0 or 1.
pub fn featurize(mut g: MolGraph) -> MolGraph {
    let mut node = vec![0.0; g.atoms.len() * NODE_FEATURE_WIDTH];
    for (i, atom) in g.atoms.iter().enumerate() {
        let row = &mut node[i * NODE_FEATURE_WIDTH..(i + 1) * NODE_FEATURE_WIDTH];
        row[atom.element.one_hot_index()] = 1.0;
        let degree = g.bonds.iter().filter(|b| b.a == i || b.b == i).count().min(5);
        row[12 + degree] = 1.0;
        row[18 + (atom.hydrogens as usize).min(4)] = 1.0;
        let charge_idx = match atom.formal_charge.signum() {
            -1 => 0,
            0 => 1,
            _ => 2,
        };
        row[23 + charge_idx] = 1.0;
        row[26] = f64::from(atom.aromatic);
        row[27] = f64::from(atom.ring_member);
    }
    let mut edge = vec![0.0; g.directed.len() * EDGE_FEATURE_WIDTH];
    for (e, de) in g.directed.iter().enumerate() {
        let bond = &g.bonds[de.bond];
        let row = &mut edge[e * EDGE_FEATURE_WIDTH..(e + 1) * EDGE_FEATURE_WIDTH];
        row[bond.order.one_hot_index()] = 1.0;
        row[4] = f64::from(bond.ring_member);
        row[5] = f64::from(bond.order == BondOrder::Aromatic);
    }
    g.node_features = node;
    g.edge_features = edge;
    g
}

/// Parse and featurize in one step.
pub fn parse_and_featurize(s: &str) -> Result<MolGraph> {
    parse_smiles(s).map(featurize)
}

// ---------------------------------------------------------------------------
// Scaffold keys
// ---------------------------------------------------------------------------

/// Canonical ring-framework key.
///
/// Non-ring atoms of degree <= 1 are deleted iteratively until a fixpoint,
/// which strips all acyclic side chains (and dissolves fully acyclic
/// molecules). The key is the sorted multiset of remaining
/// `(element, degree, ring-flag)` triples plus a sorted edge signature;
/// acyclic molecules map to the empty key.
pub fn scaffold_key(g: &MolGraph) -> String {
    let n = g.atoms.len();
    let mut alive = vec![true; n];
    loop {
        let mut removed = false;
        for i in 0..n {
            if !alive[i] || g.atoms[i].ring_member {
                continue;
            }
            let degree = g
                .bonds
                .iter()
                .filter(|b| (b.a == i && alive[b.b]) || (b.b == i && alive[b.a]))
                .count();
            if degree <= 1 {
                alive[i] = false;
                removed = true;
            }
        }
        if !removed {
            break;
        }
    }

    if alive.iter().all(|a| !a) {
        return String::new();
    }

    let alive_degree = |i: usize| {
        g.bonds
            .iter()
            .filter(|b| (b.a == i && alive[b.b]) || (b.b == i && alive[b.a]))
            .count()
    };

    let node_sig = |i: usize| {
        format!(
            "{}{}{}",
            g.atoms[i].element.symbol(),
            alive_degree(i),
            u8::from(g.atoms[i].ring_member)
        )
    };

    let mut nodes: Vec<String> = (0..n).filter(|&i| alive[i]).map(node_sig).collect();
    nodes.sort();

    let mut edges: Vec<String> = g
        .bonds
        .iter()
        .filter(|b| alive[b.a] && alive[b.b])
        .map(|b| {
            let (sa, sb) = (node_sig(b.a), node_sig(b.b));
            let (lo, hi) = if sa <= sb { (sa, sb) } else { (sb, sa) };
            format!("{lo}{}{hi}", b.order.key_char())
        })
        .collect();
    edges.sort();

    format!("{}|{}", nodes.join(","), edges.join(","))
}
