//! Circular squad network: `k` relays on a ring, one source packet per
//! relay, and between every pair of adjacent relays `g, g+1` a shared squad
//! of storage nodes that overhears both of them.
//!
//! Squad `g` sits between relays `g` and `g + 1 (mod k)`.

use std::fmt;
use std::io::{self, Write};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::codec::{decode_with_doping, xor_into, CodedSymbol, DecodeReport, DopingOracle, RippleOrder, SourceBlock};
use crate::degree::DegreeDistribution;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SquadSizeModel {
    /// Every squad holds `round(h)` nodes.
    #[default]
    Fixed,
    /// Squad sizes are independent `Poisson(h)`.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dissemination {
    /// Plain flooding of degree-one packets in both directions.
    #[default]
    DegreeOne,
    /// Relays forward XORs of the packets arriving from the left and right.
    DegreeTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StorageMode {
    /// Each node keeps one uniformly chosen packet.
    Coupon,
    /// Ideal Soliton combining.
    #[default]
    IsCombining,
    /// Robust Soliton combining.
    RsCombining { c: f64, delta_rs: f64 },
}

/// What a storage node XORs when dissemination is degree-two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombineInput {
    /// Decode the overheard stream first, then combine source packets.
    #[default]
    DegreeOneInputs,
    /// Combine the raw degree-two transmissions.
    DegreeTwoInputs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub k: usize,
    /// Expected squad size.
    pub h: f64,
    pub squad_size_model: SquadSizeModel,
    pub dissemination: Dissemination,
    pub storage: StorageMode,
    pub combine_input: CombineInput,
}

impl NetworkConfig {
    /// Fixed squads of `h` nodes, degree-one dissemination, IS storage.
    pub fn new(k: usize, h: f64) -> Self {
        Self {
            k,
            h,
            squad_size_model: SquadSizeModel::Fixed,
            dissemination: Dissemination::DegreeOne,
            storage: StorageMode::IsCombining,
            combine_input: CombineInput::DegreeOneInputs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidParameter(format!("network needs k >= 3 relays, got {}", self.k)));
        }
        if !(self.h >= 1.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!("squad size h must be >= 1, got {}", self.h)));
        }
        Ok(())
    }

    /// Whether nodes XOR raw degree-two transmissions. Coupon nodes always
    /// keep a single source packet.
    pub fn combines_raw_transmissions(&self) -> bool {
        self.dissemination == Dissemination::DegreeTwo
            && self.combine_input == CombineInput::DegreeTwoInputs
            && self.storage != StorageMode::Coupon
    }

    /// Number of transmission slots a storage node can choose from.
    pub fn slot_count(&self) -> usize {
        if self.combines_raw_transmissions() {
            2 * degree_two_rounds(self.k)
        } else {
            self.k
        }
    }

    pub fn degree_distribution(&self) -> Result<DegreeDistribution> {
        match self.storage {
            StorageMode::Coupon => DegreeDistribution::point_mass(self.k, 1),
            StorageMode::IsCombining => DegreeDistribution::ideal_soliton(self.k),
            StorageMode::RsCombining { c, delta_rs } => DegreeDistribution::robust_soliton(self.k, c, delta_rs),
        }
    }
}

/// Rounds of first-hop exchanges the degree-two scheme needs.
pub fn degree_two_rounds(k: usize) -> usize {
    k.saturating_sub(1).div_ceil(2)
}

/// Hops between relays `a` and `b` along the ring.
pub fn ring_distance(k: usize, a: usize, b: usize) -> usize {
    let d = a.abs_diff(b) % k;
    d.min(k - d)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageNode {
    pub squad: usize,
    pub degree: usize,
    /// Sorted slot indices the node XORs.
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    cfg: NetworkConfig,
    squads: Vec<Vec<StorageNode>>,
}

impl Network {
    /// Populates every squad and pre-plans each node's degree and slots.
    pub fn build<R: Rng + ?Sized>(cfg: NetworkConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let dist = cfg.degree_distribution()?;
        let slots = cfg.slot_count();
        let poisson = match cfg.squad_size_model {
            SquadSizeModel::Poisson => Some(Poisson::new(cfg.h).map_err(|e| Error::InvalidParameter(e.to_string()))?),
            SquadSizeModel::Fixed => None,
        };
        let fixed = cfg.h.round() as usize;
        let squads = (0..cfg.k)
            .map(|g| {
                let size = poisson.as_ref().map_or(fixed, |p| p.sample(rng) as usize);
                (0..size)
                    .map(|_| {
                        let degree = dist.sample(rng).min(slots);
                        let mut chosen = index::sample(rng, slots, degree).into_vec();
                        chosen.sort_unstable();
                        StorageNode { squad: g, degree, slots: chosen }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { cfg, squads })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn k(&self) -> usize {
        self.cfg.k
    }

    pub fn squad(&self, g: usize) -> &[StorageNode] {
        &self.squads[g]
    }

    pub fn squad_sizes(&self) -> Vec<usize> {
        self.squads.iter().map(Vec::len).collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.squads.iter().map(Vec::len).sum()
    }

    /// Squads in drain order around `collector` with their squad distance:
    /// the squad right of the collector first, then alternating left and
    /// right, nearest first.
    pub fn drain_order(&self, collector: usize) -> Vec<(usize, usize)> {
        let k = self.k();
        let mut order = vec![(collector % k, 0)];
        let mut m = 1;
        while order.len() < k {
            order.push(((collector + k - m % k) % k, m));
            if order.len() < k {
                order.push(((collector + m) % k, m));
            }
            m += 1;
        }
        order
    }

    /// One line per node: `squad degree slot...`.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for node in self.squads.iter().flatten() {
            write!(out, "{} {}", node.squad, node.degree)?;
            for s in &node.slots {
                write!(out, " {s}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Content of one relay transmission, as source indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transmission {
    Single(usize),
    Pair(usize, usize),
}

impl Transmission {
    pub fn indices(&self) -> Vec<usize> {
        match *self {
            Transmission::Single(a) => vec![a],
            Transmission::Pair(a, b) => vec![a, b],
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Transmission::Single(_) => 1,
            Transmission::Pair(..) => 2,
        }
    }
}

impl fmt::Display for Transmission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transmission::Single(a) => write!(f, "p{a}"),
            Transmission::Pair(a, b) => write!(f, "p{a}^p{b}"),
        }
    }
}

/// Result of a dissemination run.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub mode: Dissemination,
    pub k: usize,
    /// Transmissions of each relay, in order.
    pub transmissions: Vec<Vec<Transmission>>,
    /// Rounds in which some relay transmitted.
    pub rounds: usize,
    /// Every relay obtained every packet and each matched the source
    /// bit for bit.
    pub verified: bool,
    /// Largest number of packets any relay held in its working buffer
    /// (own packet included). Zero for flooding, which keeps nothing.
    pub max_buffer: usize,
}

impl Schedule {
    pub fn transmission_counts(&self) -> Vec<usize> {
        self.transmissions.iter().map(Vec::len).collect()
    }

    /// One line per relay: `relay tx...`.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (r, txs) in self.transmissions.iter().enumerate() {
            write!(out, "{r}")?;
            for t in txs {
                write!(out, " {t}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

// Per-relay record of which packets arrived and whether each was correct.
struct Receipt {
    known: Vec<bool>,
    count: usize,
    exact: bool,
}

impl Receipt {
    fn new(k: usize, own: usize) -> Self {
        let mut known = vec![false; k];
        known[own] = true;
        Self { known, count: 1, exact: true }
    }

    fn learn(&mut self, index: usize, payload: &[u8], block: &SourceBlock) -> bool {
        if self.known[index] {
            return false;
        }
        self.known[index] = true;
        self.count += 1;
        self.exact &= payload == block.packet(index);
        true
    }
}

/// Flooding: each relay sends its own packet, then forwards every packet
/// the first time it hears it, until nothing new arrives.
pub fn disseminate_degree_one(block: &SourceBlock) -> Result<Schedule> {
    let k = block.k();
    if k < 3 {
        return Err(Error::InvalidParameter(format!("dissemination needs k >= 3, got {k}")));
    }
    let mut receipts: Vec<Receipt> = (0..k).map(|i| Receipt::new(k, i)).collect();
    // Forwarded packets are passed on unchanged, so borrowing them is enough.
    let mut pending: Vec<Vec<(usize, &[u8])>> = (0..k).map(|i| vec![(i, block.packet(i))]).collect();
    let mut sent: Vec<Vec<(usize, &[u8])>> = vec![Vec::new(); k];
    let mut transmissions: Vec<Vec<Transmission>> = vec![Vec::with_capacity(k); k];
    let mut rounds = 0;
    while pending.iter().any(|p| !p.is_empty()) {
        rounds += 1;
        std::mem::swap(&mut pending, &mut sent);
        for (i, batch) in sent.iter().enumerate() {
            transmissions[i].extend(batch.iter().map(|(j, _)| Transmission::Single(*j)));
        }
        for (i, next) in pending.iter_mut().enumerate() {
            next.clear();
            let (left, right) = ((i + k - 1) % k, (i + 1) % k);
            for &(j, payload) in sent[left].iter().chain(&sent[right]) {
                if receipts[i].learn(j, payload, block) {
                    next.push((j, payload));
                }
            }
        }
    }
    let verified = receipts.iter().all(|r| r.count == k && r.exact);
    Ok(Schedule { mode: Dissemination::DegreeOne, k, transmissions, rounds, verified, max_buffer: 0 })
}

// Working set kept per side by the degree-two relays.
const SIDE_BUFFER: usize = 3;

/// Degree-two combining. Round 1: relay `i` sends `p_i`. Round `r >= 2`:
/// it sends `p_{i-r+1} ^ p_{i+r-1}`, which it recovered in round `r - 1` by
/// XORing each neighbor's combination with the matching packet it already
/// held. Finishes after `ceil((k-1)/2)` rounds.
pub fn disseminate_degree_two(block: &SourceBlock) -> Result<Schedule> {
    let k = block.k();
    if k < 3 {
        return Err(Error::InvalidParameter(format!("dissemination needs k >= 3, got {k}")));
    }
    let rounds = degree_two_rounds(k);
    let at = |i: usize, off: isize| (i as isize + off).rem_euclid(k as isize) as usize;

    let mut receipts: Vec<Receipt> = (0..k).map(|i| Receipt::new(k, i)).collect();
    // left[i] holds (offset m, p_{i-m}), right[i] holds (m, p_{i+m}), newest last.
    let mut left: Vec<Vec<(usize, Vec<u8>)>> = vec![Vec::new(); k];
    let mut right: Vec<Vec<(usize, Vec<u8>)>> = vec![Vec::new(); k];
    let mut transmissions = vec![Vec::new(); k];
    let mut max_buffer = 1;

    let lookup = |buf: &[(usize, Vec<u8>)], m: usize| -> Option<Vec<u8>> {
        buf.iter().find(|(o, _)| *o == m).map(|(_, p)| p.clone())
    };

    for r in 1..=rounds {
        // Transmit.
        let mut sent: Vec<Vec<u8>> = Vec::with_capacity(k);
        for i in 0..k {
            if r == 1 {
                transmissions[i].push(Transmission::Single(i));
                sent.push(block.packet(i).to_vec());
            } else {
                let m = r - 1;
                let mut payload = lookup(&left[i], m).ok_or(Error::InvalidState("left packet missing from buffer"))?;
                let rp = lookup(&right[i], m).ok_or(Error::InvalidState("right packet missing from buffer"))?;
                xor_into(&mut payload, &rp);
                transmissions[i].push(Transmission::Pair(at(i, -(m as isize)), at(i, m as isize)));
                sent.push(payload);
            }
        }
        // Receive and online-decode.
        for i in 0..k {
            let from_left = &sent[(i + k - 1) % k];
            let from_right = &sent[(i + 1) % k];
            let (new_left, new_right) = if r == 1 {
                (from_left.clone(), from_right.clone())
            } else {
                // Left neighbor sent p_{i-r} ^ p_{i+r-2}; right sent p_{i-r+2} ^ p_{i+r}.
                let known_right = if r == 2 { block.packet(i).to_vec() } else { lookup(&right[i], r - 2).ok_or(Error::InvalidState("right buffer evicted too early"))? };
                let known_left = if r == 2 { block.packet(i).to_vec() } else { lookup(&left[i], r - 2).ok_or(Error::InvalidState("left buffer evicted too early"))? };
                let mut l = from_left.clone();
                xor_into(&mut l, &known_right);
                let mut rr = from_right.clone();
                xor_into(&mut rr, &known_left);
                (l, rr)
            };
            receipts[i].learn(at(i, -(r as isize)), &new_left, block);
            receipts[i].learn(at(i, r as isize), &new_right, block);
            for (buf, p) in [(&mut left[i], new_left), (&mut right[i], new_right)] {
                buf.push((r, p));
                if buf.len() > SIDE_BUFFER {
                    buf.remove(0);
                }
            }
            max_buffer = max_buffer.max(1 + left[i].len() + right[i].len());
        }
    }
    let verified = receipts.iter().all(|r| r.count == k && r.exact);
    Ok(Schedule { mode: Dissemination::DegreeTwo, k, transmissions, rounds, verified, max_buffer })
}

pub fn disseminate(mode: Dissemination, block: &SourceBlock) -> Result<Schedule> {
    match mode {
        Dissemination::DegreeOne => disseminate_degree_one(block),
        Dissemination::DegreeTwo => disseminate_degree_two(block),
    }
}

/// Source indices a node's stored symbol depends on. Raw degree-two slots
/// are transmissions of relay `g` (first half) and relay `g + 1` (second
/// half); XORing them cancels repeated packets, so the result is the
/// symmetric difference and may be empty.
pub fn node_neighbors(net: &Network, schedule: &Schedule, node: &StorageNode) -> Vec<usize> {
    if !net.cfg.combines_raw_transmissions() {
        return node.slots.clone();
    }
    let k = net.k();
    let per_relay = degree_two_rounds(k);
    let mut parity = vec![false; k];
    for &slot in &node.slots {
        let relay = (node.squad + slot / per_relay) % k;
        for j in schedule.transmissions[relay][slot % per_relay].indices() {
            parity[j] ^= true;
        }
    }
    parity.iter().enumerate().filter(|(_, p)| **p).map(|(j, _)| j).collect()
}

/// The symbol a node stores, or `None` when its slots cancel out.
pub fn storage_listen(net: &Network, schedule: &Schedule, block: &SourceBlock, node: &StorageNode) -> Result<Option<CodedSymbol>> {
    if schedule.k != net.k() || block.k() != net.k() {
        return Err(Error::InvalidParameter("network, schedule and block disagree on k".into()));
    }
    if net.cfg.combines_raw_transmissions() && schedule.mode != Dissemination::DegreeTwo {
        return Err(Error::InvalidParameter("raw degree-two storage needs a degree-two schedule".into()));
    }
    let neighbors = node_neighbors(net, schedule, node);
    if neighbors.is_empty() {
        return Ok(None);
    }
    CodedSymbol::from_block(block, neighbors).map(Some)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollectionReport {
    pub k_s: usize,
    /// Squads that contributed at least one node.
    pub s: usize,
    pub k_d: usize,
    pub doped_hop_costs: Vec<usize>,
    /// Total hops of the upfront phase.
    pub supersquad_hops: usize,
    /// Collected nodes whose slots cancelled to nothing.
    pub empty_symbols: usize,
}

impl CollectionReport {
    pub fn doping_hops(&self) -> usize {
        self.doped_hop_costs.iter().sum()
    }

    pub fn total_hops(&self) -> usize {
        self.supersquad_hops + self.doping_hops()
    }
}

/// Drains squads outward from `collector` until `k_s` nodes are read. A
/// node in a squad at squad distance `m` costs `m + 1` hops.
pub fn collect(
    net: &Network,
    schedule: &Schedule,
    block: &SourceBlock,
    collector: usize,
    k_s: usize,
) -> Result<(Vec<CodedSymbol>, CollectionReport)> {
    let available = net.total_nodes();
    if k_s > available {
        return Err(Error::ExhaustedNetwork { requested: k_s, available });
    }
    if collector >= net.k() {
        return Err(Error::InvalidParameter(format!("collector {collector} outside 0..{}", net.k())));
    }
    let mut report = CollectionReport { k_s, ..Default::default() };
    let mut symbols = Vec::with_capacity(k_s);
    let mut taken = 0;
    for (g, m) in net.drain_order(collector) {
        if taken == k_s {
            break;
        }
        let squad = net.squad(g);
        let n = squad.len().min(k_s - taken);
        if n == 0 {
            continue;
        }
        report.s += 1;
        report.supersquad_hops += n * (m + 1);
        for node in &squad[..n] {
            match storage_listen(net, schedule, block, node)? {
                Some(sym) => symbols.push(sym),
                None => report.empty_symbols += 1,
            }
        }
        taken += n;
    }
    Ok((symbols, report))
}

/// Doping oracle that polls packets from their source relays and charges
/// the ring distance from the collector.
#[derive(Debug, Clone)]
pub struct PollingOracle<'a> {
    block: &'a SourceBlock,
    collector: usize,
    pub hop_costs: Vec<usize>,
}

impl<'a> PollingOracle<'a> {
    pub fn new(block: &'a SourceBlock, collector: usize) -> Self {
        Self { block, collector, hop_costs: Vec::new() }
    }
}

impl DopingOracle for PollingOracle<'_> {
    fn fetch(&mut self, index: usize) -> Result<Vec<u8>> {
        let k = self.block.k();
        if index >= k {
            return Err(Error::DopingUnavailable { index, reason: "no such relay".into() });
        }
        self.hop_costs.push(ring_distance(k, self.collector, index));
        Ok(self.block.packet(index).to_vec())
    }
}

/// Collection followed by doped decoding; every doping is a poll.
#[derive(Debug, Clone)]
pub struct CollectionOutcome {
    pub decode: DecodeReport,
    pub collection: CollectionReport,
    /// Decoded packets matched the block bit for bit.
    pub exact: bool,
}

pub fn simulate_collection_with_doping<R: Rng + ?Sized>(
    net: &Network,
    schedule: &Schedule,
    block: &SourceBlock,
    collector: usize,
    k_s: usize,
    rng: &mut R,
) -> Result<CollectionOutcome> {
    let (symbols, mut collection) = collect(net, schedule, block, collector, k_s)?;
    let mut oracle = PollingOracle::new(block, collector);
    let outcome = decode_with_doping(net.k(), &symbols, &mut oracle, rng, RippleOrder::Fifo)?;
    collection.k_d = outcome.report.k_d;
    collection.doped_hop_costs = oracle.hop_costs;
    let exact = outcome.recovered.as_slice() == block.packets();
    Ok(CollectionOutcome { decode: outcome.report, collection, exact })
}

/// Source indices that appear in none of `symbols`.
pub fn uncovered_sources(k: usize, symbols: &[CodedSymbol]) -> usize {
    let mut covered = vec![false; k];
    for s in symbols {
        for &n in s.neighbors() {
            covered[n] = true;
        }
    }
    covered.iter().filter(|c| !**c).count()
}

/// Nodes read in drain order before every source is covered, or `None` if
/// the whole network does not cover them.
pub fn nodes_to_cover(net: &Network, schedule: &Schedule, collector: usize) -> Option<usize> {
    let k = net.k();
    let mut covered = vec![false; k];
    let mut missing = k;
    let mut read = 0;
    for (g, _) in net.drain_order(collector) {
        for node in net.squad(g) {
            read += 1;
            for n in node_neighbors(net, schedule, node) {
                if !covered[n] {
                    covered[n] = true;
                    missing -= 1;
                }
            }
            if missing == 0 {
                return Some(read);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::DEFAULT_PAYLOAD_LEN;
    use crate::rng::trial_rng;

    fn block(k: usize, seed: u64) -> SourceBlock {
        SourceBlock::random(k, DEFAULT_PAYLOAD_LEN, &mut trial_rng(seed, 0)).unwrap()
    }

    #[test]
    fn fixed_squads_have_h_nodes() {
        let net = Network::build(NetworkConfig::new(7, 1.0), &mut trial_rng(1, 0)).unwrap();
        assert_eq!(net.squad_sizes(), vec![1; 7]);
        let net = Network::build(NetworkConfig::new(1000, 200.0), &mut trial_rng(1, 0)).unwrap();
        assert_eq!(net.total_nodes(), 200_000);
        for g in [0, 499, 999] {
            assert!(net.squad(g).iter().all(|n| n.squad == g && n.slots.len() == n.degree && n.degree >= 1));
        }
    }

    #[test]
    fn poisson_squad_sizes_average_to_h() {
        let mut cfg = NetworkConfig::new(1000, 200.0);
        cfg.squad_size_model = SquadSizeModel::Poisson;
        cfg.storage = StorageMode::Coupon;
        let net = Network::build(cfg, &mut trial_rng(3, 0)).unwrap();
        let mean = net.total_nodes() as f64 / 1000.0;
        let se = (200.0f64 / 1000.0).sqrt();
        assert!((mean - 200.0).abs() < 3.0 * se, "mean squad size {mean}");
    }

    #[test]
    fn config_validation() {
        assert!(Network::build(NetworkConfig::new(2, 5.0), &mut trial_rng(1, 0)).is_err());
        assert!(Network::build(NetworkConfig::new(10, 0.5), &mut trial_rng(1, 0)).is_err());
    }

    #[test]
    fn flooding_sends_every_packet_once_per_relay() {
        for k in [3, 4, 7, 10] {
            let s = disseminate_degree_one(&block(k, 2)).unwrap();
            assert!(s.verified);
            for (i, txs) in s.transmissions.iter().enumerate() {
                assert_eq!(txs.len(), k);
                assert_eq!(txs[0], Transmission::Single(i));
                let mut seen: Vec<usize> = txs.iter().flat_map(|t| t.indices()).collect();
                seen.sort_unstable();
                assert_eq!(seen, (0..k).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn flooding_reaches_relay_one_within_three_rounds_per_side() {
        let s = disseminate_degree_one(&block(7, 2)).unwrap();
        // Relay 1 transmits p1, then p0 p2, p6 p3, p5 p4: one new packet per side per round.
        let expect = [1, 0, 2, 6, 3, 5, 4].map(Transmission::Single);
        assert_eq!(s.transmissions[1], expect);
        assert_eq!(s.rounds, 4);
    }

    #[test]
    fn degree_two_k7_round_structure() {
        let s = disseminate_degree_two(&block(7, 4)).unwrap();
        assert_eq!(s.rounds, 3);
        assert!(s.verified);
        assert_eq!(s.transmissions[1], vec![Transmission::Single(1), Transmission::Pair(0, 2), Transmission::Pair(6, 3)]);
    }

    #[test]
    fn degree_two_completes_in_half_the_ring() {
        for k in [3, 4, 5, 6, 9, 15, 40, 41] {
            let s = disseminate_degree_two(&block(k, 5)).unwrap();
            assert!(s.verified, "k={k}");
            assert_eq!(s.rounds, (k - 1).div_ceil(2));
            assert!(s.transmission_counts().iter().all(|&c| c == s.rounds));
            assert!(s.max_buffer <= 1 + 2 * SIDE_BUFFER);
        }
    }

    #[test]
    fn listen_takes_symmetric_difference_of_raw_slots() {
        let k = 7;
        let mut cfg = NetworkConfig::new(k, 1.0);
        cfg.dissemination = Dissemination::DegreeTwo;
        cfg.combine_input = CombineInput::DegreeTwoInputs;
        let b = block(k, 6);
        let s = disseminate_degree_two(&b).unwrap();
        let net = Network::build(cfg, &mut trial_rng(6, 0)).unwrap();
        // Squad 2 hears relays 2 and 3. Slot 1 is relay 2's p1^p3 and slot
        // 4 is relay 3's p2^p4; slot 3 is relay 3's p3.
        let node = StorageNode { squad: 2, degree: 2, slots: vec![1, 3] };
        assert_eq!(node_neighbors(&net, &s, &node), vec![1]);
        let node = StorageNode { squad: 2, degree: 2, slots: vec![1, 4] };
        let sym = storage_listen(&net, &s, &b, &node).unwrap().unwrap();
        assert_eq!(sym.neighbors(), &[1, 2, 3, 4]);
        assert!(sym.is_consistent_with(&b));
        let node = StorageNode { squad: 2, degree: 1, slots: vec![] };
        assert!(storage_listen(&net, &s, &b, &node).unwrap().is_none());
    }

    #[test]
    fn listen_with_decoded_inputs_keeps_chosen_packets() {
        let k = 12;
        let b = block(k, 7);
        let s = disseminate_degree_one(&b).unwrap();
        let net = Network::build(NetworkConfig::new(k, 2.0), &mut trial_rng(7, 0)).unwrap();
        let node = StorageNode { squad: 0, degree: 3, slots: vec![2, 5, 9] };
        let sym = storage_listen(&net, &s, &b, &node).unwrap().unwrap();
        assert_eq!(sym.neighbors(), &[2, 5, 9]);
        assert_eq!(sym.payload(), b.combine(&[2, 5, 9]).as_slice());
    }

    #[test]
    fn coupon_nodes_store_one_packet() {
        let mut cfg = NetworkConfig::new(20, 5.0);
        cfg.storage = StorageMode::Coupon;
        let net = Network::build(cfg, &mut trial_rng(8, 0)).unwrap();
        assert!((0..20).flat_map(|g| net.squad(g)).all(|n| n.degree == 1 && n.slots[0] < 20));
    }

    #[test]
    fn drain_order_alternates_sides() {
        let net = Network::build(NetworkConfig::new(7, 1.0), &mut trial_rng(1, 0)).unwrap();
        assert_eq!(net.drain_order(0), vec![(0, 0), (6, 1), (1, 1), (5, 2), (2, 2), (4, 3), (3, 3)]);
    }

    #[test]
    fn collection_counts_squads() {
        let k = 1000;
        let b = block(k, 9);
        let s = disseminate_degree_one(&b).unwrap();
        let net = Network::build(NetworkConfig::new(k, 200.0), &mut trial_rng(9, 0)).unwrap();
        let (syms, rep) = collect(&net, &s, &b, 10, 200).unwrap();
        assert_eq!((syms.len(), rep.s, rep.supersquad_hops), (200, 1, 200));
        let (_, rep) = collect(&net, &s, &b, 10, 1000).unwrap();
        assert_eq!(rep.s, 5);
        assert!(syms.iter().all(|x| x.is_consistent_with(&b)));

        let net = Network::build(NetworkConfig::new(k, 100.0), &mut trial_rng(9, 0)).unwrap();
        let (_, rep) = collect(&net, &s, &b, 0, 201).unwrap();
        assert_eq!(rep.s, 3);
        assert_eq!(rep.supersquad_hops, 100 + 100 * 2 + 2);
    }

    #[test]
    fn collection_is_deterministic() {
        let b = block(50, 10);
        let s = disseminate_degree_one(&b).unwrap();
        let net = Network::build(NetworkConfig::new(50, 4.0), &mut trial_rng(10, 0)).unwrap();
        assert_eq!(collect(&net, &s, &b, 3, 77).unwrap(), collect(&net, &s, &b, 3, 77).unwrap());
    }

    #[test]
    fn collecting_too_much_exhausts_the_network() {
        let b = block(10, 11);
        let s = disseminate_degree_one(&b).unwrap();
        let net = Network::build(NetworkConfig::new(10, 2.0), &mut trial_rng(11, 0)).unwrap();
        assert_eq!(collect(&net, &s, &b, 0, 21).unwrap_err(), Error::ExhaustedNetwork { requested: 21, available: 20 });
    }

    #[test]
    fn pure_polling_dopes_everything() {
        let k = 40;
        let b = block(k, 12);
        let s = disseminate_degree_one(&b).unwrap();
        let net = Network::build(NetworkConfig::new(k, 3.0), &mut trial_rng(12, 0)).unwrap();
        let out = simulate_collection_with_doping(&net, &s, &b, 5, 0, &mut trial_rng(12, 1)).unwrap();
        assert_eq!(out.collection.k_d, k);
        assert!(out.exact);
        let mut hops = out.collection.doped_hop_costs.clone();
        hops.sort_unstable();
        let mut expect: Vec<usize> = (0..k).map(|j| ring_distance(k, 5, j)).collect();
        expect.sort_unstable();
        assert_eq!(hops, expect);
        // Mean ring distance on an even ring is exactly k/4.
        assert_eq!(expect.iter().sum::<usize>() as f64 / k as f64, k as f64 / 4.0);
    }

    #[test]
    fn ring_distance_wraps() {
        assert_eq!(ring_distance(10, 1, 9), 2);
        assert_eq!(ring_distance(10, 9, 1), 2);
        assert_eq!(ring_distance(10, 0, 5), 5);
        assert_eq!(ring_distance(10, 4, 4), 0);
    }

    #[test]
    fn degree_two_storage_decodes_exactly() {
        let k = 30;
        let mut cfg = NetworkConfig::new(k, 20.0);
        cfg.dissemination = Dissemination::DegreeTwo;
        cfg.combine_input = CombineInput::DegreeTwoInputs;
        let b = block(k, 13);
        let s = disseminate_degree_two(&b).unwrap();
        let net = Network::build(cfg, &mut trial_rng(13, 0)).unwrap();
        let out = simulate_collection_with_doping(&net, &s, &b, 0, 60, &mut trial_rng(13, 1)).unwrap();
        assert!(out.exact && out.decode.success);
        assert_eq!(out.collection.s, 3);
    }

    #[test]
    fn dumps_are_line_per_record() {
        let b = block(5, 14);
        let s = disseminate_degree_two(&b).unwrap();
        let net = Network::build(NetworkConfig::new(5, 2.0), &mut trial_rng(14, 0)).unwrap();
        let mut buf = Vec::new();
        net.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        let first: Vec<usize> = text.lines().next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first[0], 0);
        assert_eq!(first.len(), 2 + first[1]);
        let mut buf = Vec::new();
        s.dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap(), "1 p1 p0^p2");
    }
}
