//! Boykov-Kolmogorov augmenting-path max-flow on a graph with terminal
//! capacities stored per node.
//!
//! Two search trees grow from the source and the sink; when they touch, the
//! path is augmented and saturated tree arcs produce orphans, which are
//! re-attached (with timestamp/distance bookkeeping to keep paths short) or
//! freed.

use std::collections::VecDeque;

const NO_PARENT: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const NO_ARC: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Source,
    Sink,
}

#[derive(Debug, Clone)]
struct Node {
    first: u32,
    parent: u32,
    in_sink_tree: bool,
    /// Positive: residual source->node capacity. Negative: node->sink.
    tr_cap: f64,
    dist: u32,
    timestamp: u32,
    active: bool,
}

#[derive(Debug, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    head: Vec<u32>,
    next: Vec<u32>,
    cap: Vec<f64>,
    flow: f64,
}

impl Graph {
    pub fn new(n_nodes: usize, edge_hint: usize) -> Self {
        Graph {
            nodes: vec![
                Node {
                    first: NO_ARC,
                    parent: NO_PARENT,
                    in_sink_tree: false,
                    tr_cap: 0.0,
                    dist: 0,
                    timestamp: 0,
                    active: false,
                };
                n_nodes
            ],
            head: Vec::with_capacity(2 * edge_hint),
            next: Vec::with_capacity(2 * edge_hint),
            cap: Vec::with_capacity(2 * edge_hint),
            flow: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds source->i and i->sink capacities. Only their difference is kept
    /// per node; the common part is counted as flow immediately.
    pub fn add_tweights(&mut self, i: usize, to_source: f64, to_sink: f64) {
        let mut cs = to_source;
        let mut ct = to_sink;
        let delta = self.nodes[i].tr_cap;
        if delta > 0.0 {
            cs += delta;
        } else {
            ct -= delta;
        }
        self.flow += cs.min(ct);
        self.nodes[i].tr_cap = cs - ct;
    }

    /// Adds arc i->j with capacity `cap` and j->i with `rev_cap`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        debug_assert!(i != j);
        debug_assert!(cap >= 0.0 && rev_cap >= 0.0);
        let a = self.head.len() as u32;
        self.head.push(j as u32);
        self.next.push(self.nodes[i].first);
        self.cap.push(cap);
        self.nodes[i].first = a;
        self.head.push(i as u32);
        self.next.push(self.nodes[j].first);
        self.cap.push(rev_cap);
        self.nodes[j].first = a + 1;
    }

    #[inline]
    fn sister(a: u32) -> u32 {
        a ^ 1
    }

    fn arcs(&self, i: u32) -> ArcIter<'_> {
        ArcIter {
            next: &self.next,
            cur: self.nodes[i as usize].first,
        }
    }

    /// Runs the max-flow and returns its value (including flow that was
    /// accounted for directly by `add_tweights`).
    pub fn maxflow(&mut self) -> f64 {
        let mut queue: VecDeque<u32> = VecDeque::new();
        let mut orphans: VecDeque<u32> = VecDeque::new();
        for (i, n) in self.nodes.iter_mut().enumerate() {
            n.timestamp = 0;
            n.active = false;
            if n.tr_cap > 0.0 {
                n.in_sink_tree = false;
                n.parent = TERMINAL;
                n.dist = 1;
                n.active = true;
                queue.push_back(i as u32);
            } else if n.tr_cap < 0.0 {
                n.in_sink_tree = true;
                n.parent = TERMINAL;
                n.dist = 1;
                n.active = true;
                queue.push_back(i as u32);
            } else {
                n.parent = NO_PARENT;
            }
        }
        let mut time: u32 = 0;
        let mut current: Option<u32> = None;

        loop {
            let i = match current.take() {
                Some(i) if self.nodes[i as usize].parent != NO_PARENT => i,
                _ => loop {
                    match queue.pop_front() {
                        None => return self.flow,
                        Some(i) => {
                            self.nodes[i as usize].active = false;
                            if self.nodes[i as usize].parent != NO_PARENT {
                                break i;
                            }
                        }
                    }
                },
            };

            let middle = self.grow(i, &mut queue);
            if let Some(a) = middle {
                current = Some(i);
                time = time.wrapping_add(1);
                self.augment(a, &mut orphans);
                while let Some(o) = orphans.pop_front() {
                    self.adopt(o, time, &mut queue, &mut orphans);
                }
            }
        }
    }

    /// Expands the tree of `i`; returns an arc from the source tree into the
    /// sink tree if the trees touch.
    fn grow(&mut self, i: u32, queue: &mut VecDeque<u32>) -> Option<u32> {
        let iu = i as usize;
        let in_sink = self.nodes[iu].in_sink_tree;
        let mut a = self.nodes[iu].first;
        while a != NO_ARC {
            let residual = if in_sink {
                self.cap[Self::sister(a) as usize]
            } else {
                self.cap[a as usize]
            };
            if residual > 0.0 {
                let j = self.head[a as usize] as usize;
                if self.nodes[j].parent == NO_PARENT {
                    let (ts, d) = (self.nodes[iu].timestamp, self.nodes[iu].dist);
                    let nj = &mut self.nodes[j];
                    nj.in_sink_tree = in_sink;
                    nj.parent = Self::sister(a);
                    nj.timestamp = ts;
                    nj.dist = d + 1;
                    if !nj.active {
                        nj.active = true;
                        queue.push_back(j as u32);
                    }
                } else if self.nodes[j].in_sink_tree != in_sink {
                    return Some(if in_sink { Self::sister(a) } else { a });
                } else if self.nodes[j].timestamp <= self.nodes[iu].timestamp
                    && self.nodes[j].dist > self.nodes[iu].dist
                {
                    let (ts, d) = (self.nodes[iu].timestamp, self.nodes[iu].dist);
                    let nj = &mut self.nodes[j];
                    nj.parent = Self::sister(a);
                    nj.timestamp = ts;
                    nj.dist = d + 1;
                }
            }
            a = self.next[a as usize];
        }
        None
    }

    fn augment(&mut self, middle: u32, orphans: &mut VecDeque<u32>) {
        let mut bottleneck = self.cap[middle as usize];

        // source side: arcs parent -> node are sister(parent[node])
        let mut k = self.head[Self::sister(middle) as usize] as usize;
        loop {
            let pa = self.nodes[k].parent;
            if pa == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.cap[Self::sister(pa) as usize]);
            k = self.head[pa as usize] as usize;
        }
        bottleneck = bottleneck.min(self.nodes[k].tr_cap);

        // sink side: arcs node -> parent are parent[node]
        let mut k = self.head[middle as usize] as usize;
        loop {
            let pa = self.nodes[k].parent;
            if pa == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.cap[pa as usize]);
            k = self.head[pa as usize] as usize;
        }
        bottleneck = bottleneck.min(-self.nodes[k].tr_cap);

        self.cap[Self::sister(middle) as usize] += bottleneck;
        self.cap[middle as usize] -= bottleneck;

        let mut k = self.head[Self::sister(middle) as usize] as usize;
        loop {
            let pa = self.nodes[k].parent;
            if pa == TERMINAL {
                break;
            }
            self.cap[pa as usize] += bottleneck;
            let s = Self::sister(pa) as usize;
            self.cap[s] -= bottleneck;
            if self.cap[s] <= 0.0 {
                self.cap[s] = 0.0;
                self.nodes[k].parent = ORPHAN;
                orphans.push_back(k as u32);
            }
            k = self.head[pa as usize] as usize;
        }
        self.nodes[k].tr_cap -= bottleneck;
        if self.nodes[k].tr_cap <= 0.0 {
            self.nodes[k].tr_cap = 0.0;
            self.nodes[k].parent = ORPHAN;
            orphans.push_back(k as u32);
        }

        let mut k = self.head[middle as usize] as usize;
        loop {
            let pa = self.nodes[k].parent;
            if pa == TERMINAL {
                break;
            }
            self.cap[Self::sister(pa) as usize] += bottleneck;
            self.cap[pa as usize] -= bottleneck;
            if self.cap[pa as usize] <= 0.0 {
                self.cap[pa as usize] = 0.0;
                self.nodes[k].parent = ORPHAN;
                orphans.push_back(k as u32);
            }
            k = self.head[pa as usize] as usize;
        }
        self.nodes[k].tr_cap += bottleneck;
        if self.nodes[k].tr_cap >= 0.0 {
            self.nodes[k].tr_cap = 0.0;
            self.nodes[k].parent = ORPHAN;
            orphans.push_back(k as u32);
        }

        self.flow += bottleneck;
    }

    fn adopt(&mut self, i: u32, time: u32, queue: &mut VecDeque<u32>, orphans: &mut VecDeque<u32>) {
        let iu = i as usize;
        let in_sink = self.nodes[iu].in_sink_tree;
        let mut best_arc = NO_ARC;
        let mut best_dist = u32::MAX;

        let arcs: Vec<u32> = self.arcs(i).collect();
        for &a0 in &arcs {
            let residual = if in_sink {
                self.cap[a0 as usize]
            } else {
                self.cap[Self::sister(a0) as usize]
            };
            if residual <= 0.0 {
                continue;
            }
            let j = self.head[a0 as usize] as usize;
            if self.nodes[j].in_sink_tree != in_sink || self.nodes[j].parent == NO_PARENT {
                continue;
            }
            // distance from j to its terminal, or MAX if j hangs off an orphan
            let mut d: u32 = 0;
            let mut k = j;
            loop {
                if self.nodes[k].timestamp == time {
                    d = d.saturating_add(self.nodes[k].dist);
                    break;
                }
                let pa = self.nodes[k].parent;
                d = d.saturating_add(1);
                if pa == TERMINAL {
                    self.nodes[k].timestamp = time;
                    self.nodes[k].dist = 1;
                    break;
                }
                if pa == ORPHAN {
                    d = u32::MAX;
                    break;
                }
                k = self.head[pa as usize] as usize;
            }
            if d == u32::MAX {
                continue;
            }
            if d < best_dist {
                best_arc = a0;
                best_dist = d;
            }
            let mut k = j;
            let mut dd = d;
            while self.nodes[k].timestamp != time {
                self.nodes[k].timestamp = time;
                self.nodes[k].dist = dd;
                dd -= 1;
                k = self.head[self.nodes[k].parent as usize] as usize;
            }
        }

        if best_arc != NO_ARC {
            let n = &mut self.nodes[iu];
            n.parent = best_arc;
            n.timestamp = time;
            n.dist = best_dist + 1;
            return;
        }

        self.nodes[iu].timestamp = 0;
        for &a0 in &arcs {
            let j = self.head[a0 as usize] as usize;
            if self.nodes[j].in_sink_tree != in_sink || self.nodes[j].parent == NO_PARENT {
                continue;
            }
            let residual = if in_sink {
                self.cap[a0 as usize]
            } else {
                self.cap[Self::sister(a0) as usize]
            };
            if residual > 0.0 && !self.nodes[j].active {
                self.nodes[j].active = true;
                queue.push_back(j as u32);
            }
            let pj = self.nodes[j].parent;
            if pj != TERMINAL && pj != ORPHAN && self.head[pj as usize] == i {
                self.nodes[j].parent = ORPHAN;
                orphans.push_back(j as u32);
            }
        }
        self.nodes[iu].parent = NO_PARENT;
    }

    /// Side of the minimum cut after [`Graph::maxflow`]. Nodes reachable from
    /// neither terminal report `Source`.
    pub fn segment(&self, i: usize) -> Segment {
        let n = &self.nodes[i];
        if n.parent != NO_PARENT && n.in_sink_tree {
            Segment::Sink
        } else {
            Segment::Source
        }
    }
}

struct ArcIter<'a> {
    next: &'a [u32],
    cur: u32,
}

impl Iterator for ArcIter<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.cur == NO_ARC {
            return None;
        }
        let a = self.cur;
        self.cur = self.next[a as usize];
        Some(a)
    }
}
