use std::collections::{BTreeSet, HashMap};

use super::portals::{build_portals, portal_dist, PortalSet};
use super::profiles::{ptas_profiles, CompressedProfiles};
use super::{budget, detour_factor, CapsHit, DetourCertificate, DpConfig, DpError, DpReport};
use crate::decomp::{DecompositionTree, TreeKind};
use crate::flow::FlowGraph;
use crate::instance::Solution;
use crate::scalar::Scalar;
use crate::transform::TransformedInstance;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
enum Node {
    /// Opens the first `open` facilities (in leaf order) at `site`.
    Leaf { site: u32, open: u32 },
    /// Extends the partial fold `prev` by one child cell.
    Join { prev: u32, child: u32, units: u32, level: u32 },
    /// `inner` with its profile moved to an admitted one at `rounding` scaled cost.
    Charge { inner: u32, rounding: f64 },
}

#[derive(Clone, Debug)]
struct Cell<T> {
    k: u32,
    flow: Vec<i32>,
    cost: T,
    node: u32,
}

type Key = (u32, Vec<i32>);

/// Result of one DP run.
#[derive(Clone, Debug)]
pub struct DpOutcome<T> {
    /// Solution of the original instance.
    pub solution: Solution<T>,
    /// Solution of the reduced instance before lifting.
    pub reduced: Solution<T>,
    pub report: DpReport,
    /// Distinct `(out, in)` profiles kept by the compression filter (empty otherwise).
    pub emitted_profiles: Vec<Profile>,
}

/// Out-counts and in-counts per portal, in clockwise order.
pub type Profile = (Vec<u64>, Vec<u64>);

/// Most profiles recorded in [`DpOutcome::emitted_profiles`].
const EMITTED_LIMIT: usize = 200_000;

struct Engine<'a, T> {
    tid: &'a TransformedInstance<T>,
    tree: &'a DecompositionTree<T>,
    cfg: &'a DpConfig,
    portals: PortalSet<T>,
    profiles: Option<CompressedProfiles>,
    /// Flow vectors hold out-counts then in-counts per portal instead of
    /// one signed net flow.
    paired: bool,
    /// Facilities at each site: forced first, then by residual capacity.
    site_facs: Vec<Vec<usize>>,
    site_demand: Vec<usize>,
    n_total: usize,
    kmax: usize,
    arena: Vec<Node>,
    caps: CapsHit,
    cells: usize,
    largest: usize,
    rejected: usize,
    emitted: BTreeSet<Profile>,
}

/// Portal DP over a split tree or quadtree with signed portal flows.
pub fn qptas_dp<T: Scalar>(
    tid: &TransformedInstance<T>,
    tree: &DecompositionTree<T>,
    cfg: &DpConfig,
) -> Result<DpOutcome<T>, DpError> {
    Engine::new(tid, tree, cfg, None)?.run()
}

/// The same DP over a quadtree, restricted to compressed portal profiles.
pub fn ptas_dp<T: Scalar>(
    tid: &TransformedInstance<T>,
    tree: &DecompositionTree<T>,
    cfg: &DpConfig,
) -> Result<DpOutcome<T>, DpError> {
    if tree.kind != TreeKind::Quadtree || tree.boxes.iter().any(|b| b.square.is_none()) {
        return Err(DpError::NotPlane);
    }
    let profiles = ptas_profiles(cfg.eps, tid.reduced.demand());
    Engine::new(tid, tree, cfg, Some(profiles))?.run()
}

impl<'a, T: Scalar> Engine<'a, T> {
    fn new(
        tid: &'a TransformedInstance<T>,
        tree: &'a DecompositionTree<T>,
        cfg: &'a DpConfig,
        profiles: Option<CompressedProfiles>,
    ) -> Result<Self, DpError> {
        let inst = &tid.reduced;
        let sites = tree.site_count();
        let mut site_demand = vec![0usize; sites];
        for &q in &inst.clients {
            site_demand[tree.site(q).ok_or(DpError::MissingSite(q))?] += 1;
        }
        let mut site_facs = vec![Vec::new(); sites];
        for (f, &q) in inst.facilities.iter().enumerate() {
            site_facs[tree.site(q).ok_or(DpError::MissingSite(q))?].push(f);
        }
        for facs in &mut site_facs {
            facs.sort_by_key(|&f| (!tid.is_forced(f), std::cmp::Reverse(tid.caps[f]), f));
        }
        let portals = build_portals(tree, cfg.rho, cfg.max_portals);
        let caps = CapsHit { portals: portals.capped, ..CapsHit::default() };
        Ok(Engine {
            tid,
            tree,
            cfg,
            portals,
            paired: profiles.is_some(),
            profiles,
            site_facs,
            site_demand,
            n_total: inst.demand(),
            kmax: inst.k,
            arena: Vec::new(),
            caps,
            cells: 0,
            largest: 0,
            rejected: 0,
            emitted: BTreeSet::new(),
        })
    }

    fn push(&mut self, node: Node) -> u32 {
        self.arena.push(node);
        (self.arena.len() - 1) as u32
    }

    fn forced_at(&self, site: usize) -> usize {
        self.site_facs[site].iter().take_while(|&&f| self.tid.is_forced(f)).count()
    }

    fn leaf(&mut self, site: usize) -> Vec<Cell<T>> {
        let demand = self.site_demand[site] as i64;
        let forced = self.forced_at(site);
        let most = self.site_facs[site].len().min(self.kmax);
        let lowest_import = -((self.n_total as i64) - demand);
        let mut out = Vec::new();
        let mut cap = 0i64;
        for open in 0..=most {
            if open > 0 {
                cap += self.tid.caps[self.site_facs[site][open - 1]] as i64;
            }
            if open < forced {
                continue;
            }
            let node = self.push(Node::Leaf { site: site as u32, open: open as u32 });
            let lo = (demand - cap).max(lowest_import);
            for v in lo..=demand {
                let v = v as i32;
                let flow = if self.paired { vec![v.max(0), (-v).max(0)] } else { vec![v] };
                out.push(Cell { k: open as u32, flow, cost: T::zero(), node });
            }
        }
        out
    }

    fn materialize(&mut self, best: HashMap<Key, (T, u32, u32, u32)>, level: u32) -> Vec<Cell<T>> {
        let mut rows: Vec<(Key, (T, u32, u32, u32))> = best.into_iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows.into_iter()
            .map(|((k, flow), (cost, prev, child, units))| {
                let node = self.push(Node::Join { prev, child, units, level });
                Cell { k, flow, cost, node }
            })
            .collect()
    }

    fn truncate(&mut self, mut cells: Vec<Cell<T>>) -> Vec<Cell<T>> {
        if let Some(cap) = self.cfg.max_cells {
            if cells.len() > cap {
                cells.sort_by(|a, b| a.cost.partial_cmp(&b.cost).expect("finite").then_with(|| (a.k, &a.flow).cmp(&(b.k, &b.flow))));
                cells.truncate(cap);
                self.caps.cells = true;
            }
        }
        cells
    }

    /// Cancels outgoing against incoming portal flow inside the box at the
    /// cheapest `dist^p` transport cost.
    fn settle(&self, b: usize, flow: &[i32]) -> Option<(Vec<i32>, T)> {
        let np = self.portals.boxes[b].points.len();
        let (pos, neg): (Vec<usize>, Vec<usize>) = if self.paired {
            ((0..np).filter(|&i| flow[i] > 0).collect(), (np..2 * np).filter(|&i| flow[i] > 0).collect())
        } else {
            ((0..np).filter(|&i| flow[i] > 0).collect(), (0..np).filter(|&i| flow[i] < 0).collect())
        };
        if pos.is_empty() || neg.is_empty() {
            return None;
        }
        let pts = &self.portals.boxes[b].points;
        let p = self.tid.reduced.p;
        let slots = flow.len();
        let (s, t) = (slots, slots + 1);
        let mut g: FlowGraph<T> = FlowGraph::new(slots + 2);
        let mut arcs = Vec::new();
        for &i in &pos {
            g.add_edge(s, i, flow[i] as i64, T::zero());
            for &j in &neg {
                let c = portal_dist(self.tree, pts[i], pts[j % np]).powp(p);
                arcs.push((i, j, g.add_edge(i, j, i64::MAX / 4, c)));
            }
        }
        for &j in &neg {
            g.add_edge(j, t, flow[j].unsigned_abs() as i64, T::zero());
        }
        let res = g.min_cost_flow(s, t, i64::MAX / 4);
        let mut out = flow.to_vec();
        for (i, j, id) in arcs {
            let f = g.flow(id) as i32;
            out[i] -= f;
            if self.paired {
                out[j] -= f;
            } else {
                out[j] += f;
            }
        }
        Some((out, res.cost))
    }

    /// Cheapest `dist^p` cost of moving units between portals of box `b`
    /// so that `from` becomes `to` (equal totals).
    fn shift_cost(&self, b: usize, from: &[u64], to: &[u64]) -> T {
        let pts = &self.portals.boxes[b].points;
        let p = self.tid.reduced.p;
        let np = from.len();
        let (s, t) = (np, np + 1);
        let mut g: FlowGraph<T> = FlowGraph::new(np + 2);
        for i in 0..np {
            if from[i] > to[i] {
                g.add_edge(s, i, (from[i] - to[i]) as i64, T::zero());
                for j in 0..np {
                    if to[j] > from[j] {
                        g.add_edge(i, j, i64::MAX / 4, portal_dist(self.tree, pts[i], pts[j]).powp(p));
                    }
                }
            } else if to[i] > from[i] {
                g.add_edge(i, t, (to[i] - from[i]) as i64, T::zero());
            }
        }
        g.min_cost_flow(s, t, i64::MAX / 4).cost
    }

    fn internal(&mut self, b: usize, tables: &mut [Option<Vec<Cell<T>>>]) -> Vec<Cell<T>> {
        let np = self.portals.boxes[b].points.len();
        let p = self.tid.reduced.p;
        let bound = self.n_total as u32;
        let slots = if self.paired { 2 * np } else { np };
        let mut acc = vec![Cell { k: 0, flow: vec![0; slots], cost: T::zero(), node: NONE }];
        for ch in self.tree.boxes[b].children.clone() {
            let child_cells = tables[ch].take().expect("children are processed first");
            let bp = &self.portals.boxes[ch];
            let hop_p: Vec<T> = bp.hop.iter().map(|&h| h.powp(p)).collect();
            let parent_of = bp.parent_of.clone();
            let npc = parent_of.len();
            let paired = self.paired;
            let target = |i: usize| if paired && i >= npc { np + parent_of[i - npc] } else { parent_of[i % npc] };
            let level = self.tree.boxes[ch].level as u32;
            let mut best: HashMap<Key, (T, u32, u32, u32)> = HashMap::new();
            for a in &acc {
                for c in &child_cells {
                    let k = a.k + c.k;
                    if k as usize > self.kmax {
                        continue;
                    }
                    let mut flow = a.flow.clone();
                    let mut cost = a.cost + c.cost;
                    let mut units = 0u32;
                    for (i, &v) in c.flow.iter().enumerate() {
                        if v != 0 {
                            flow[target(i)] += v;
                            cost = cost + hop_p[i % npc] * T::of_usize(v.unsigned_abs() as usize);
                            units += v.unsigned_abs();
                        }
                    }
                    if flow.iter().any(|x| x.unsigned_abs() > bound) {
                        continue;
                    }
                    let slot = best.entry((k, flow)).or_insert((T::infinity(), NONE, NONE, 0));
                    if cost < slot.0 {
                        *slot = (cost, a.node, c.node, units);
                    }
                }
            }
            self.cells += best.len();
            let cells = self.materialize(best, level);
            acc = self.truncate(cells);
        }

        let mut best: HashMap<Key, (T, u32)> = HashMap::new();
        for c in &acc {
            let mut offer = |key: Key, cost: T| {
                let slot = best.entry(key).or_insert((T::infinity(), c.node));
                if cost < slot.0 {
                    *slot = (cost, c.node);
                }
            };
            offer((c.k, c.flow.clone()), c.cost);
            if let Some((flow, extra)) = self.settle(b, &c.flow) {
                offer((c.k, flow), c.cost + extra);
            }
        }
        let mut rows: Vec<(Key, (T, u32))> = best.into_iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows.into_iter().map(|((k, flow), (cost, node))| Cell { k, flow, cost, node }).collect()
    }

    /// Compression filter and the count grid. A profile outside the
    /// compressed family is moved to a nearby admitted one and charged the
    /// transport cost of the move.
    fn filter(&mut self, b: usize, mut cells: Vec<Cell<T>>) -> Vec<Cell<T>> {
        if let Some(prof) = self.profiles.clone() {
            let mut best: HashMap<Key, (T, u32, f64)> = HashMap::new();
            for c in &cells {
                let (out, inn) = split(&c.flow);
                let (ro, ri) = match (prof.repair(&out), prof.repair(&inn)) {
                    (Some(ro), Some(ri)) => (ro, ri),
                    _ => {
                        self.rejected += 1;
                        continue;
                    }
                };
                let moved = self.shift_cost(b, &out, &ro) + self.shift_cost(b, &inn, &ri);
                let flow: Vec<i32> = ro.iter().chain(&ri).map(|&v| v as i32).collect();
                let cost = c.cost + moved;
                let slot = best.entry((c.k, flow)).or_insert((T::infinity(), NONE, 0.0));
                if cost < slot.0 {
                    *slot = (cost, c.node, moved.as_f64());
                }
            }
            let mut rows: Vec<(Key, (T, u32, f64))> = best.into_iter().collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            cells = Vec::with_capacity(rows.len());
            for ((k, flow), (cost, inner, rounding)) in rows {
                let node = if rounding > 0.0 { self.push(Node::Charge { inner, rounding }) } else { inner };
                if self.emitted.len() < EMITTED_LIMIT {
                    self.emitted.insert(split(&flow));
                }
                cells.push(Cell { k, flow, cost, node });
            }
        }
        if let (Some(limit), Some(first)) = (self.cfg.max_counts, cells.first()) {
            let np = first.flow.len();
            let crowded = (0..np).any(|i| {
                let mut vals: Vec<u32> = cells.iter().map(|c| c.flow[i].unsigned_abs()).collect();
                vals.sort_unstable();
                vals.dedup();
                vals.len() > limit
            });
            if crowded {
                let kept: Vec<Cell<T>> =
                    cells.iter().filter(|c| c.flow.iter().all(|v| on_grid(v.unsigned_abs(), limit))).cloned().collect();
                if !kept.is_empty() {
                    cells = kept;
                    self.caps.counts = true;
                }
            }
        }
        cells
    }

    fn run(mut self) -> Result<DpOutcome<T>, DpError> {
        let tree = self.tree;
        let mut tables: Vec<Option<Vec<Cell<T>>>> = vec![None; tree.boxes.len()];
        for level in 0..=tree.levels {
            for &b in &tree.by_level[level] {
                let cells = if level == 0 { self.leaf(tree.boxes[b].sites[0]) } else { self.internal(b, &mut tables) };
                let cells = self.filter(b, cells);
                let cells = self.truncate(cells);
                self.largest = self.largest.max(cells.len());
                tables[b] = Some(cells);
            }
        }
        let root = tables[tree.root()].take().expect("root table");
        let best = root
            .iter()
            .filter(|c| c.flow.iter().all(|&v| v == 0) && c.k as usize <= self.kmax)
            .min_by(|a, b| a.cost.partial_cmp(&b.cost).expect("finite").then(a.k.cmp(&b.k)))
            .ok_or(DpError::Infeasible)?;

        let (centers, crossings, rounding) = self.reconstruct(best.node);
        let reduced = self.tid.assign(&centers)?;
        let solution = self.tid.lift_solution(&reduced)?;
        let scale_p = tree.scale.powp(self.tid.reduced.p);
        let report = DpReport {
            rho: self.cfg.rho,
            heuristic_rho: self.cfg.rho_floored,
            compressed: self.profiles.is_some(),
            boxes: tree.boxes.len(),
            portals_max: self.portals.max_portals(),
            portals_mean: self.portals.mean_portals(),
            cells_enumerated: self.cells,
            cells_largest_table: self.largest,
            profiles_rejected: self.rejected,
            caps_hit: self.caps.clone(),
            dp_value: (best.cost / scale_p).as_f64(),
            budget_total: crossings / tree.scale.as_f64(),
            rounding_total: rounding / scale_p.as_f64(),
            detour: self.certificate(&reduced),
            final_cost: solution.cost.as_f64(),
        };
        let emitted_profiles = std::mem::take(&mut self.emitted).into_iter().collect();
        Ok(DpOutcome { solution, reduced, report, emitted_profiles })
    }

    /// Opened facilities, the scaled crossing budget `Σ α·ρ·2^i·units` and the
    /// scaled cost charged by profile repairs.
    fn reconstruct(&self, root: u32) -> (Vec<usize>, f64, f64) {
        let mut centers = Vec::new();
        let mut crossings = 0.0;
        let mut rounding = 0.0;
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if id == NONE {
                continue;
            }
            match self.arena[id as usize] {
                Node::Leaf { site, open } => {
                    centers.extend_from_slice(&self.site_facs[site as usize][..open as usize]);
                }
                Node::Join { prev, child, units, level } => {
                    crossings += units as f64 * budget(level as usize, self.cfg.rho, self.cfg.alpha);
                    stack.push(prev);
                    stack.push(child);
                }
                Node::Charge { inner, rounding: r } => {
                    rounding += r;
                    stack.push(inner);
                }
            }
        }
        centers.sort_unstable();
        (centers, crossings, rounding)
    }

    fn certificate(&self, reduced: &Solution<T>) -> DetourCertificate {
        let inst = &self.tid.reduced;
        let factor = detour_factor(self.tid.original.demand(), self.cfg.d, self.cfg.eps, inst.p.as_f64(), self.cfg.rho);
        let scale = self.tree.scale.as_f64();
        let mut cert = DetourCertificate::default();
        for (r, &f) in reduced.assignment.iter().enumerate() {
            let (Some(a), Some(b)) = (self.tree.site(inst.clients[r]), self.tree.site(inst.facilities[f])) else {
                continue;
            };
            let direct = self.tree.dist(a, b).as_f64() / scale;
            let route = self.portals.route_cost(self.tree, a, b, T::one()).as_f64() / scale;
            let detour = (route - direct).max(0.0);
            let bound = factor * direct;
            cert.clients += 1;
            cert.total_detour += detour;
            cert.total_bound += bound;
            if detour > bound + 1e-9 * direct.max(1.0) {
                cert.violations += 1;
            }
        }
        cert
    }
}

/// Splits a paired flow vector into its out-counts and in-counts.
fn split(flow: &[i32]) -> Profile {
    let np = flow.len() / 2;
    let counts = |s: &[i32]| s.iter().map(|&v| v as u64).collect();
    (counts(&flow[..np]), counts(&flow[np..]))
}

/// Count grid `0, 1, 2, 3, 4, 6, 8, 12, …` truncated to its first `limit` values.
pub(super) fn on_grid(v: u32, limit: usize) -> bool {
    let mut seen = 0;
    let mut g = 0u64;
    while seen < limit {
        if g == v as u64 {
            return true;
        }
        if g > v as u64 {
            return false;
        }
        g = next_grid(g);
        seen += 1;
    }
    false
}

fn next_grid(g: u64) -> u64 {
    match g {
        0..=3 => g + 1,
        _ if g.is_power_of_two() => g / 2 * 3,
        _ => g / 3 * 4,
    }
}
