//! XOR fountain encoding and the belief-propagation (peeling) decoder with
//! degree-two doping.
//!
//! Source indices are zero-based throughout: a block of `k` packets is
//! indexed `0..k`.
//!
//! The decoder keeps a bipartite graph between source symbols and output
//! (coded) symbols. Every output carries its residual payload, i.e. the XOR
//! of the source packets it still depends on. Processing a source symbol
//! peels it out of every adjacent output; an output that drops to a single
//! remaining neighbor is *released* and hands that neighbor to the ripple.
//! When the ripple runs dry the decoder is stalled and a source packet is
//! fetched from a [`DopingOracle`] instead.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index;
use rand::Rng;

use crate::degree::DegreeDistribution;
use crate::{Error, Result};

pub const DEFAULT_PAYLOAD_LEN: usize = 32;

pub fn xor_into(dst: &mut [u8], src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// The `k` fixed-length source packets held by the relays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBlock {
    payload_len: usize,
    packets: Vec<Vec<u8>>,
}

impl SourceBlock {
    pub fn new(packets: Vec<Vec<u8>>) -> Result<Self> {
        let payload_len = packets.first().map(Vec::len).unwrap_or(0);
        if payload_len == 0 {
            return Err(Error::InvalidParameter("source block needs at least one non-empty packet".into()));
        }
        if let Some(i) = packets.iter().position(|p| p.len() != payload_len) {
            return Err(Error::MalformedInput(format!(
                "packet {i} has length {} but the block uses {payload_len}",
                packets[i].len()
            )));
        }
        Ok(Self { payload_len, packets })
    }

    /// `k` packets of `payload_len` random bytes.
    pub fn random<R: Rng + ?Sized>(k: usize, payload_len: usize, rng: &mut R) -> Result<Self> {
        let packets = (0..k)
            .map(|_| {
                let mut p = vec![0u8; payload_len];
                rng.fill(p.as_mut_slice());
                p
            })
            .collect();
        Self::new(packets)
    }

    pub fn k(&self) -> usize {
        self.packets.len()
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn packet(&self, index: usize) -> &[u8] {
        &self.packets[index]
    }

    pub fn packets(&self) -> &[Vec<u8>] {
        &self.packets
    }

    /// XOR of the packets at `indices`.
    pub fn combine(&self, indices: &[usize]) -> Vec<u8> {
        let mut out = vec![0u8; self.payload_len];
        for &i in indices {
            xor_into(&mut out, &self.packets[i]);
        }
        out
    }

    pub fn oracle(&self) -> BlockOracle<'_> {
        BlockOracle { block: self }
    }
}

/// A stored code symbol: a set of source indices and the XOR of their packets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedSymbol {
    neighbors: Vec<usize>,
    payload: Vec<u8>,
}

impl CodedSymbol {
    /// `neighbors` may be given in any order but must be distinct and
    /// nonempty.
    pub fn new(mut neighbors: Vec<usize>, payload: Vec<u8>) -> Result<Self> {
        if neighbors.is_empty() {
            return Err(Error::MalformedInput("coded symbol has no neighbors".into()));
        }
        neighbors.sort_unstable();
        if neighbors.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedInput(format!("duplicate neighbor in {neighbors:?}")));
        }
        Ok(Self { neighbors, payload })
    }

    pub fn from_block(block: &SourceBlock, neighbors: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = neighbors.iter().find(|&&n| n >= block.k()) {
            return Err(Error::MalformedInput(format!("neighbor {bad} outside 0..{}", block.k())));
        }
        let payload = block.combine(&neighbors);
        Self::new(neighbors, payload)
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn is_consistent_with(&self, block: &SourceBlock) -> bool {
        self.neighbors.iter().all(|&n| n < block.k()) && block.combine(&self.neighbors) == self.payload
    }
}

/// Samples a degree from `dist` and XORs that many distinct source packets
/// chosen uniformly without replacement.
pub fn encode_symbol<R: Rng + ?Sized>(
    block: &SourceBlock,
    dist: &DegreeDistribution,
    rng: &mut R,
) -> Result<CodedSymbol> {
    if dist.k() != block.k() {
        return Err(Error::InvalidParameter(format!(
            "distribution support {} does not match block size {}",
            dist.k(),
            block.k()
        )));
    }
    let d = dist.sample(rng);
    let neighbors = index::sample(rng, block.k(), d).into_vec();
    CodedSymbol::from_block(block, neighbors)
}

/// Supplies true source packets to a stalled decoder.
pub trait DopingOracle {
    fn fetch(&mut self, index: usize) -> Result<Vec<u8>>;
}

/// Oracle reading packets straight from a [`SourceBlock`].
#[derive(Debug, Clone, Copy)]
pub struct BlockOracle<'a> {
    block: &'a SourceBlock,
}

impl DopingOracle for BlockOracle<'_> {
    fn fetch(&mut self, index: usize) -> Result<Vec<u8>> {
        self.block
            .packets
            .get(index)
            .cloned()
            .ok_or_else(|| Error::DopingUnavailable { index, reason: "index outside block".into() })
    }
}

/// Order in which ripple entries are processed. Any order peels the same
/// closure; the knob exists for sensitivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RippleOrder {
    #[default]
    Fifo,
    Lifo,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Decode,
    Dope,
}

/// Where a doped symbol was selected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopeSource {
    /// Neighbor of a residual-degree-two output.
    DegreeTwo,
    /// No degree-two output existed; neighbor of an output of this
    /// (lowest available) residual degree.
    Fallback(usize),
    /// No outputs remained; an uncovered source symbol.
    Uncovered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub kind: StepKind,
    pub index: usize,
    pub ripple_before: usize,
    pub ripple_after: usize,
    /// New ripple entries produced by this step.
    pub releases: usize,
    /// Releases dropped because their symbol was already decoded or queued.
    pub defected: usize,
    pub dope_source: Option<DopeSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SourceState {
    Undecoded,
    Queued,
    Decoded,
}

#[derive(Debug, Clone)]
struct OutputNode {
    // Remaining (unprocessed) neighbors, unordered.
    neighbors: Vec<usize>,
    payload: Vec<u8>,
    released: bool,
}

/// Summary of one decoding run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    pub success: bool,
    pub k: usize,
    /// Symbols supplied upfront.
    pub k_s: usize,
    /// Number of dopings.
    pub k_d: usize,
    pub doped_indices: Vec<usize>,
    pub initial_ripple: usize,
    /// Ripple size after each step.
    pub ripple_trajectory: Vec<usize>,
    /// `T_i - T_{i-1}` where `T_i` is the step at which the i-th doping
    /// happened and `T_0 = 0`.
    pub interdoping_yields: Vec<usize>,
    /// Steps after the last doping (`k - T_{k_d}`).
    pub final_run: usize,
    pub fallback_dopings: usize,
    pub uncovered_dopings: usize,
    pub defected: usize,
}

impl DecodeReport {
    pub fn doping_ratio(&self) -> f64 {
        self.k_d as f64 / self.k as f64
    }
}

/// Peeling decoder state.
#[derive(Debug, Clone)]
pub struct Decoder {
    k: usize,
    k_s: usize,
    payload_len: Option<usize>,
    order: RippleOrder,
    outputs: Vec<OutputNode>,
    adjacency: Vec<Vec<usize>>,
    state: Vec<SourceState>,
    recovered: Vec<Option<Vec<u8>>>,
    ripple: VecDeque<(usize, Vec<u8>)>,
    decoded: usize,
    doped: Vec<usize>,
    history: Vec<StepRecord>,
    initial_ripple: usize,
    initial_defected: usize,
}

impl Decoder {
    /// Builds the decoding graph and releases every degree-one symbol into
    /// the ripple.
    pub fn new(k: usize, symbols: &[CodedSymbol]) -> Result<Self> {
        Self::with_order(k, symbols, RippleOrder::Fifo)
    }

    pub fn with_order(k: usize, symbols: &[CodedSymbol], order: RippleOrder) -> Result<Self> {
        let payload_len = symbols.first().map(|s| s.payload.len());
        let mut adjacency = vec![Vec::new(); k];
        let mut outputs = Vec::with_capacity(symbols.len());
        for (o, sym) in symbols.iter().enumerate() {
            if Some(sym.payload.len()) != payload_len {
                return Err(Error::MalformedInput(format!("symbol {o} has a mismatched payload length")));
            }
            if let Some(&bad) = sym.neighbors.iter().find(|&&n| n >= k) {
                return Err(Error::MalformedInput(format!("symbol {o} references source {bad} outside 0..{k}")));
            }
            for &n in &sym.neighbors {
                adjacency[n].push(o);
            }
            outputs.push(OutputNode { neighbors: sym.neighbors.clone(), payload: sym.payload.clone(), released: false });
        }
        let mut dec = Self {
            k,
            k_s: symbols.len(),
            payload_len,
            order,
            outputs,
            adjacency,
            state: vec![SourceState::Undecoded; k],
            recovered: vec![None; k],
            ripple: VecDeque::new(),
            decoded: 0,
            doped: Vec::new(),
            history: Vec::new(),
            initial_ripple: 0,
            initial_defected: 0,
        };
        let mut defected = 0;
        for o in 0..dec.outputs.len() {
            if dec.outputs[o].neighbors.len() == 1 && !dec.release(o) {
                defected += 1;
            }
        }
        dec.initial_ripple = dec.ripple.len();
        dec.initial_defected = defected;
        Ok(dec)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn decoded_count(&self) -> usize {
        self.decoded
    }

    pub fn undecoded_count(&self) -> usize {
        self.k - self.decoded
    }

    pub fn ripple_len(&self) -> usize {
        self.ripple.len()
    }

    pub fn ripple_indices(&self) -> Vec<usize> {
        self.ripple.iter().map(|(i, _)| *i).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.decoded == self.k
    }

    pub fn is_stalled(&self) -> bool {
        self.ripple.is_empty() && !self.is_complete()
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn doped(&self) -> &[usize] {
        &self.doped
    }

    /// Recovered packet for `index`, if decoded.
    pub fn recovered(&self, index: usize) -> Option<&[u8]> {
        self.recovered[index].as_deref()
    }

    /// All packets, once decoding is complete.
    pub fn into_recovered(self) -> Option<Vec<Vec<u8>>> {
        self.recovered.into_iter().collect()
    }

    /// Unreleased outputs as (remaining neighbors, residual payload).
    pub fn residual_outputs(&self) -> impl Iterator<Item = (&[usize], &[u8])> + '_ {
        self.outputs.iter().filter(|o| !o.released).map(|o| (o.neighbors.as_slice(), o.payload.as_slice()))
    }

    /// Counts of unreleased outputs by residual degree (always >= 2).
    pub fn unreleased_degree_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for o in self.outputs.iter().filter(|o| !o.released) {
            *counts.entry(o.neighbors.len()).or_insert(0) += 1;
        }
        counts
    }

    /// Empirical degree pmf of the unreleased outputs; empty when none remain.
    pub fn unreleased_degree_histogram(&self) -> BTreeMap<usize, f64> {
        let counts = self.unreleased_degree_counts();
        let total: usize = counts.values().sum();
        counts.into_iter().map(|(d, c)| (d, c as f64 / total as f64)).collect()
    }

    /// Pops one ripple entry and peels it. Returns the number of new ripple
    /// entries.
    pub fn process_ripple_symbol<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        let ripple_before = self.ripple.len();
        let (index, value) = match self.order {
            RippleOrder::Fifo => self.ripple.pop_front(),
            RippleOrder::Lifo => self.ripple.pop_back(),
            RippleOrder::Random => {
                if self.ripple.is_empty() {
                    None
                } else {
                    let i = rng.random_range(0..self.ripple.len());
                    self.ripple.swap_remove_back(i)
                }
            }
        }
        .ok_or(Error::Stalled)?;
        let (releases, defected) = self.absorb(index, value);
        self.history.push(StepRecord {
            kind: StepKind::Decode,
            index,
            ripple_before,
            ripple_after: self.ripple.len(),
            releases,
            defected,
            dope_source: None,
        });
        Ok(releases)
    }

    /// Dopes a stalled decoder with a source packet adjacent to a
    /// residual-degree-two output, chosen uniformly among the distinct
    /// candidates. Falls back to the lowest residual degree available, and to
    /// any undecoded symbol when no outputs remain. Returns the doped index.
    pub fn dope<O, R>(&mut self, oracle: &mut O, rng: &mut R) -> Result<usize>
    where
        O: DopingOracle + ?Sized,
        R: Rng + ?Sized,
    {
        if self.is_complete() {
            return Err(Error::InvalidState("decoding already complete"));
        }
        if !self.ripple.is_empty() {
            return Err(Error::InvalidState("doping requires an empty ripple"));
        }
        let (candidates, source) = self.doping_candidates();
        let index = candidates[rng.random_range(0..candidates.len())];
        let value = oracle.fetch(index)?;
        if let Some(len) = self.payload_len {
            if value.len() != len {
                return Err(Error::MalformedInput(format!(
                    "oracle returned {} bytes for source {index}, expected {len}",
                    value.len()
                )));
            }
        }
        self.payload_len = Some(value.len());
        let (releases, defected) = self.absorb(index, value);
        self.doped.push(index);
        self.history.push(StepRecord {
            kind: StepKind::Dope,
            index,
            ripple_before: 0,
            ripple_after: self.ripple.len(),
            releases,
            defected,
            dope_source: Some(source),
        });
        Ok(index)
    }

    /// One decoding step: process the ripple if possible, otherwise dope.
    pub fn step<O, R>(&mut self, oracle: &mut O, rng: &mut R) -> Result<StepKind>
    where
        O: DopingOracle + ?Sized,
        R: Rng + ?Sized,
    {
        if self.ripple.is_empty() {
            self.dope(oracle, rng)?;
            Ok(StepKind::Dope)
        } else {
            self.process_ripple_symbol(rng)?;
            Ok(StepKind::Decode)
        }
    }

    /// Steps until `target` symbols are decoded (or all `k`).
    pub fn run_until<O, R>(&mut self, target: usize, oracle: &mut O, rng: &mut R) -> Result<()>
    where
        O: DopingOracle + ?Sized,
        R: Rng + ?Sized,
    {
        while self.decoded < target.min(self.k) {
            self.step(oracle, rng)?;
        }
        Ok(())
    }

    pub fn run<O, R>(&mut self, oracle: &mut O, rng: &mut R) -> Result<()>
    where
        O: DopingOracle + ?Sized,
        R: Rng + ?Sized,
    {
        self.run_until(self.k, oracle, rng)
    }

    pub fn report(&self) -> DecodeReport {
        let mut yields = Vec::with_capacity(self.doped.len());
        let mut last = 0;
        let mut fallback = 0;
        let mut uncovered = 0;
        for (t, rec) in self.history.iter().enumerate() {
            if rec.kind == StepKind::Dope {
                yields.push(t - last);
                last = t;
                match rec.dope_source {
                    Some(DopeSource::Fallback(_)) => fallback += 1,
                    Some(DopeSource::Uncovered) => uncovered += 1,
                    _ => {}
                }
            }
        }
        DecodeReport {
            success: self.is_complete(),
            k: self.k,
            k_s: self.k_s,
            k_d: self.doped.len(),
            doped_indices: self.doped.clone(),
            initial_ripple: self.initial_ripple,
            ripple_trajectory: self.history.iter().map(|r| r.ripple_after).collect(),
            interdoping_yields: yields,
            final_run: self.history.len() - last,
            fallback_dopings: fallback,
            uncovered_dopings: uncovered,
            defected: self.initial_defected + self.history.iter().map(|r| r.defected).sum::<usize>(),
        }
    }

    fn doping_candidates(&self) -> (Vec<usize>, DopeSource) {
        let lowest = self.outputs.iter().filter(|o| !o.released).map(|o| o.neighbors.len()).min();
        match lowest {
            Some(degree) => {
                let mut cands: Vec<usize> = self
                    .outputs
                    .iter()
                    .filter(|o| !o.released && o.neighbors.len() == degree)
                    .flat_map(|o| o.neighbors.iter().copied())
                    .collect();
                cands.sort_unstable();
                cands.dedup();
                debug_assert!(cands.iter().all(|&c| self.state[c] == SourceState::Undecoded));
                let source = if degree == 2 { DopeSource::DegreeTwo } else { DopeSource::Fallback(degree) };
                (cands, source)
            }
            None => {
                let cands = (0..self.k).filter(|&i| self.state[i] == SourceState::Undecoded).collect();
                (cands, DopeSource::Uncovered)
            }
        }
    }

    // Marks `index` decoded with `value` and peels it from its outputs.
    fn absorb(&mut self, index: usize, value: Vec<u8>) -> (usize, usize) {
        debug_assert_ne!(self.state[index], SourceState::Decoded);
        self.state[index] = SourceState::Decoded;
        self.decoded += 1;
        let mut releases = 0;
        let mut defected = 0;
        let adjacent = std::mem::take(&mut self.adjacency[index]);
        for &o in &adjacent {
            let out = &mut self.outputs[o];
            if out.released {
                continue;
            }
            let pos = out.neighbors.iter().position(|&n| n == index).expect("adjacency out of sync");
            out.neighbors.swap_remove(pos);
            xor_into(&mut out.payload, &value);
            if out.neighbors.len() == 1 {
                if self.release(o) {
                    releases += 1;
                } else {
                    defected += 1;
                }
            }
        }
        self.recovered[index] = Some(value);
        (releases, defected)
    }

    // Releases a degree-one output. Returns false when its symbol is already
    // decoded or queued (a defected release).
    fn release(&mut self, o: usize) -> bool {
        let out = &mut self.outputs[o];
        out.released = true;
        let j = out.neighbors[0];
        if self.state[j] != SourceState::Undecoded {
            return false;
        }
        self.state[j] = SourceState::Queued;
        let payload = std::mem::take(&mut out.payload);
        self.ripple.push_back((j, payload));
        true
    }
}

/// Result of [`decode_with_doping`].
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub report: DecodeReport,
    pub recovered: Vec<Vec<u8>>,
}

/// Runs the peeling decoder to completion, doping from `oracle` whenever the
/// ripple is empty.
pub fn decode_with_doping<O, R>(
    k: usize,
    symbols: &[CodedSymbol],
    oracle: &mut O,
    rng: &mut R,
    order: RippleOrder,
) -> Result<DecodeOutcome>
where
    O: DopingOracle + ?Sized,
    R: Rng + ?Sized,
{
    let mut dec = Decoder::with_order(k, symbols, order)?;
    dec.run(oracle, rng)?;
    let report = dec.report();
    let recovered = dec.into_recovered().expect("complete decode recovers every packet");
    Ok(DecodeOutcome { report, recovered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn block(k: usize, seed: u64) -> SourceBlock {
        SourceBlock::random(k, DEFAULT_PAYLOAD_LEN, &mut trial_rng(seed, 0)).unwrap()
    }

    fn sym(block: &SourceBlock, n: &[usize]) -> CodedSymbol {
        CodedSymbol::from_block(block, n.to_vec()).unwrap()
    }

    #[test]
    fn degree_one_symbol_copies_packet() {
        let b = block(8, 1);
        let dist = DegreeDistribution::point_mass(8, 1).unwrap();
        let s = encode_symbol(&b, &dist, &mut trial_rng(2, 0)).unwrap();
        assert_eq!(s.degree(), 1);
        assert_eq!(s.payload(), b.packet(s.neighbors()[0]));
    }

    #[test]
    fn full_degree_symbol_is_xor_of_everything() {
        let b = block(8, 1);
        let dist = DegreeDistribution::point_mass(8, 8).unwrap();
        let s = encode_symbol(&b, &dist, &mut trial_rng(2, 0)).unwrap();
        assert_eq!(s.neighbors(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        let mut expect = vec![0u8; DEFAULT_PAYLOAD_LEN];
        for p in b.packets() {
            for (e, x) in expect.iter_mut().zip(p) {
                *e ^= x;
            }
        }
        assert_eq!(s.payload(), expect.as_slice());
    }

    #[test]
    fn same_neighbors_cancel() {
        let b = block(20, 1);
        let dist = DegreeDistribution::ideal_soliton(20).unwrap();
        let s1 = encode_symbol(&b, &dist, &mut trial_rng(5, 0)).unwrap();
        let s2 = encode_symbol(&b, &dist, &mut trial_rng(5, 0)).unwrap();
        assert_eq!(s1.neighbors(), s2.neighbors());
        let mut x = s1.payload().to_vec();
        xor_into(&mut x, s2.payload());
        assert!(x.iter().all(|&v| v == 0));
    }

    #[test]
    fn encode_rejects_mismatched_support() {
        let b = block(8, 1);
        let dist = DegreeDistribution::ideal_soliton(9).unwrap();
        assert!(encode_symbol(&b, &dist, &mut trial_rng(2, 0)).is_err());
    }

    #[test]
    fn coded_symbol_validation() {
        assert!(CodedSymbol::new(vec![], vec![0]).is_err());
        assert!(CodedSymbol::new(vec![1, 1], vec![0]).is_err());
        let s = CodedSymbol::new(vec![3, 1], vec![0]).unwrap();
        assert_eq!(s.neighbors(), &[1, 3]);
    }

    #[test]
    fn init_releases_degree_one_symbols() {
        let b = block(5, 1);
        let dec = Decoder::new(5, &[sym(&b, &[3])]).unwrap();
        assert_eq!(dec.ripple_indices(), vec![3]);

        let dup = Decoder::new(5, &[sym(&b, &[3]), sym(&b, &[3])]).unwrap();
        assert_eq!(dup.ripple_indices(), vec![3]);
        assert_eq!(dup.report().defected, 1);
    }

    #[test]
    fn init_without_degree_one_is_stalled() {
        let b = block(5, 1);
        let mut dec = Decoder::new(5, &[sym(&b, &[0, 1]), sym(&b, &[2, 3, 4])]).unwrap();
        assert!(dec.is_stalled());
        assert_eq!(dec.process_ripple_symbol(&mut trial_rng(0, 0)), Err(Error::Stalled));
    }

    #[test]
    fn init_rejects_out_of_range_neighbor() {
        let s = CodedSymbol::new(vec![7], vec![0; 4]).unwrap();
        assert!(matches!(Decoder::new(5, &[s]), Err(Error::MalformedInput(_))));
    }

    #[test]
    fn degree_two_peel_releases_partner() {
        let b = block(4, 1);
        let mut dec = Decoder::new(4, &[sym(&b, &[0]), sym(&b, &[0, 1])]).unwrap();
        let mut rng = trial_rng(0, 0);
        assert_eq!(dec.process_ripple_symbol(&mut rng).unwrap(), 1);
        assert_eq!(dec.ripple_indices(), vec![1]);
        dec.process_ripple_symbol(&mut rng).unwrap();
        assert_eq!(dec.recovered(1), Some(b.packet(1)));
    }

    #[test]
    fn degree_three_peel_only_reduces() {
        let b = block(4, 1);
        let mut dec = Decoder::new(4, &[sym(&b, &[0]), sym(&b, &[0, 1, 2])]).unwrap();
        assert_eq!(dec.process_ripple_symbol(&mut trial_rng(0, 0)).unwrap(), 0);
        assert_eq!(dec.unreleased_degree_counts(), BTreeMap::from([(2, 1)]));
    }

    #[test]
    fn hand_peeled_three_symbol_instance() {
        // {0}, {0,1}, {1,2}: 0 releases 1, 1 releases 2, 2 finishes.
        let b = block(3, 4);
        let symbols = [sym(&b, &[0]), sym(&b, &[0, 1]), sym(&b, &[1, 2])];
        let mut dec = Decoder::new(3, &symbols).unwrap();
        let mut rng = trial_rng(0, 0);
        let releases: Vec<usize> = (0..3).map(|_| dec.process_ripple_symbol(&mut rng).unwrap()).collect();
        assert_eq!(releases, vec![1, 1, 0]);
        assert_eq!(dec.history().iter().map(|h| h.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(dec.is_complete());
        assert_eq!(dec.into_recovered().unwrap(), b.packets().to_vec());
    }

    #[test]
    fn doping_unlocks_degree_two_output() {
        let b = block(2, 1);
        let mut dec = Decoder::new(2, &[sym(&b, &[0, 1])]).unwrap();
        let doped = dec.dope(&mut b.oracle(), &mut trial_rng(3, 0)).unwrap();
        assert_eq!(dec.ripple_indices(), vec![1 - doped]);
        assert_eq!(dec.history()[0].dope_source, Some(DopeSource::DegreeTwo));
    }

    #[test]
    fn doping_uncovered_symbol_when_no_outputs_remain() {
        let b = block(8, 1);
        let symbols: Vec<_> = (0..7).map(|i| sym(&b, &[i])).collect();
        let mut dec = Decoder::new(8, &symbols).unwrap();
        let mut rng = trial_rng(0, 0);
        while dec.ripple_len() > 0 {
            dec.process_ripple_symbol(&mut rng).unwrap();
        }
        assert_eq!(dec.dope(&mut b.oracle(), &mut rng).unwrap(), 7);
        assert_eq!(dec.history().last().unwrap().dope_source, Some(DopeSource::Uncovered));
    }

    #[test]
    fn doping_counts_degree_two_co_neighbors() {
        let b = block(10, 1);
        let pairs: [&[usize]; 5] = [&[0, 1], &[0, 2], &[0, 3], &[4, 5], &[1, 6]];
        let mut symbols: Vec<_> = pairs.iter().map(|p| sym(&b, p)).collect();
        symbols.push(sym(&b, &[7, 8, 9]));
        for seed in 0..40 {
            let mut dec = Decoder::new(10, &symbols).unwrap();
            let doped = dec.dope(&mut b.oracle(), &mut trial_rng(seed, 0)).unwrap();
            assert!([0, 1, 2, 3, 4, 5, 6].contains(&doped));
            let m = pairs.iter().filter(|p| p.contains(&doped)).count();
            assert_eq!(dec.ripple_len(), m, "doped {doped}");
        }
    }

    #[test]
    fn doping_falls_back_to_lowest_degree() {
        let b = block(6, 1);
        let symbols = [sym(&b, &[0, 1, 2]), sym(&b, &[2, 3, 4, 5])];
        let mut dec = Decoder::new(6, &symbols).unwrap();
        let doped = dec.dope(&mut b.oracle(), &mut trial_rng(1, 0)).unwrap();
        assert!(doped <= 2);
        assert_eq!(dec.history()[0].dope_source, Some(DopeSource::Fallback(3)));
    }

    #[test]
    fn doping_requires_stall() {
        let b = block(3, 1);
        let mut dec = Decoder::new(3, &[sym(&b, &[0])]).unwrap();
        assert!(matches!(dec.dope(&mut b.oracle(), &mut trial_rng(0, 0)), Err(Error::InvalidState(_))));
    }

    struct Failing;
    impl DopingOracle for Failing {
        fn fetch(&mut self, index: usize) -> Result<Vec<u8>> {
            Err(Error::DopingUnavailable { index, reason: "relay unreachable".into() })
        }
    }

    #[test]
    fn oracle_failure_propagates() {
        let b = block(3, 1);
        let symbols = [sym(&b, &[0, 1])];
        let r = decode_with_doping(3, &symbols, &mut Failing, &mut trial_rng(0, 0), RippleOrder::Fifo);
        assert!(matches!(r, Err(Error::DopingUnavailable { .. })));
    }

    #[test]
    fn empty_collection_dopes_everything() {
        let b = block(12, 1);
        let out = decode_with_doping(12, &[], &mut b.oracle(), &mut trial_rng(0, 0), RippleOrder::Fifo).unwrap();
        assert_eq!(out.report.k_d, 12);
        assert_eq!(out.report.uncovered_dopings, 12);
        assert_eq!(out.recovered, b.packets().to_vec());
    }

    #[test]
    fn peelable_collection_needs_no_doping() {
        let b = block(6, 2);
        let symbols: Vec<_> = std::iter::once(sym(&b, &[0])).chain((1..6).map(|i| sym(&b, &[i - 1, i]))).collect();
        let out = decode_with_doping(6, &symbols, &mut b.oracle(), &mut trial_rng(0, 0), RippleOrder::Fifo).unwrap();
        assert_eq!(out.report.k_d, 0);
        assert_eq!(out.report.final_run, 6);
        assert_eq!(out.recovered, b.packets().to_vec());
    }

    #[test]
    fn histogram_of_single_output() {
        let b = block(5, 1);
        let dec = Decoder::new(5, &[sym(&b, &[0, 2, 4])]).unwrap();
        assert_eq!(dec.unreleased_degree_histogram(), BTreeMap::from([(3, 1.0)]));
        let empty = Decoder::new(5, &[]).unwrap();
        assert!(empty.unreleased_degree_histogram().is_empty());
    }

    #[test]
    fn ripple_orders_recover_the_same_data() {
        let k = 200;
        let b = block(k, 7);
        let dist = DegreeDistribution::ideal_soliton(k).unwrap();
        let mut rng = trial_rng(8, 0);
        let symbols: Vec<_> = (0..k).map(|_| encode_symbol(&b, &dist, &mut rng).unwrap()).collect();
        for order in [RippleOrder::Fifo, RippleOrder::Lifo, RippleOrder::Random] {
            let out = decode_with_doping(k, &symbols, &mut b.oracle(), &mut trial_rng(9, 0), order).unwrap();
            assert_eq!(out.recovered, b.packets().to_vec(), "{order:?}");
        }
    }
}
