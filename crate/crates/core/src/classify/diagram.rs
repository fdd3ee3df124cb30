use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classify_attractor, AttractorKind, ClassifyOptions};
use crate::analytic::{ns_fixed_point, tfp_fixed_points};
use crate::error::ClassifyError;
use crate::io::fmt_num;
use crate::model::{Params, ReducedState};

/// Seed of the per-cell random initial conditions.
pub const DEFAULT_DIAGRAM_SEED: u64 = 0x7a17_3a5e_2024_0001;

/// Offset added to equilibria to form seeds.
const SEED_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub eps_t2: (f64, f64),
    pub alpha_ratio: (f64, f64),
    pub n_eps: usize,
    pub n_alpha: usize,
    /// Parameter points per cell along each axis; a cell's label set is
    /// the union over its points.
    pub subsamples: usize,
    /// Random initial states per parameter point.
    pub random_seeds: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            eps_t2: (0.0, 4.0),
            alpha_ratio: (0.0, 12.0),
            n_eps: 40,
            n_alpha: 40,
            subsamples: 3,
            random_seeds: 3,
            seed: DEFAULT_DIAGRAM_SEED,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let ok_range = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.1 > r.0;
        if !ok_range(self.eps_t2) || !ok_range(self.alpha_ratio) {
            return Err(ClassifyError::InvalidGrid(
                "ranges must be finite and increasing".into(),
            ));
        }
        if self.eps_t2.0 < 0.0 || self.alpha_ratio.0 < 0.0 {
            return Err(ClassifyError::InvalidGrid(
                "eps T2 and alpha/alpha_c must be non-negative".into(),
            ));
        }
        if self.n_eps == 0 || self.n_alpha == 0 || self.subsamples == 0 {
            return Err(ClassifyError::InvalidGrid("counts must be positive".into()));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> (f64, f64) {
        (
            (self.eps_t2.1 - self.eps_t2.0) / self.n_eps as f64,
            (self.alpha_ratio.1 - self.alpha_ratio.0) / self.n_alpha as f64,
        )
    }

    /// Center of cell `(ie, ia)`.
    pub fn center(&self, ie: usize, ia: usize) -> (f64, f64) {
        let (de, da) = self.cell_width();
        (
            self.eps_t2.0 + (ie as f64 + 0.5) * de,
            self.alpha_ratio.0 + (ia as f64 + 0.5) * da,
        )
    }

    fn points(&self, ie: usize, ia: usize) -> Vec<(f64, f64)> {
        let (de, da) = self.cell_width();
        let s = self.subsamples;
        let mut out = Vec::with_capacity(s * s);
        for ka in 0..s {
            for ke in 0..s {
                out.push((
                    self.eps_t2.0 + (ie as f64 + (ke as f64 + 0.5) / s as f64) * de,
                    self.alpha_ratio.0 + (ia as f64 + (ka as f64 + 0.5) / s as f64) * da,
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Twin fixed points and chaos co-stable.
    I,
    /// Twin fixed points and limit cycles co-stable.
    II,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub eps_t2: f64,
    pub alpha_ratio: f64,
    /// Sorted, without repeats.
    pub labels: Vec<AttractorKind>,
    /// Seeds whose classification stayed undetermined.
    pub undetermined: usize,
    pub region: Option<Region>,
}

/// A chain of cell edges separating cells that differ in one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub label: AttractorKind,
    /// `(eps T2, alpha/alpha_c)` vertices.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub grid: GridSpec,
    pub params: Params,
    /// Row-major in `alpha`: index `ia * n_eps + ie`.
    pub cells: Vec<DiagramCell>,
    pub boundaries: Vec<Polyline>,
}

impl PhaseDiagram {
    pub fn cell(&self, ie: usize, ia: usize) -> &DiagramCell {
        &self.cells[ia * self.grid.n_eps + ie]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsT2,alpha_ratio,labels\n");
        for c in &self.cells {
            let names: Vec<&str> = c.labels.iter().map(|k| k.name()).collect();
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_num(c.eps_t2),
                fmt_num(c.alpha_ratio),
                names.join(";")
            ));
        }
        out
    }

    /// Boundary polylines of one label.
    pub fn boundary(&self, label: AttractorKind) -> impl Iterator<Item = &Polyline> {
        self.boundaries.iter().filter(move |b| b.label == label)
    }
}

/// Initial states for one parameter point: the no-signal point and the
/// twin points (when they exist) offset by a small step, then random
/// states in the ball of radius `P0`.
fn seeds(p: &Params, rng: &mut ChaCha8Rng, n_random: usize) -> Vec<ReducedState> {
    let shift = |x: ReducedState| {
        ReducedState::new(x.a + SEED_OFFSET, x.b + SEED_OFFSET, x.pz + SEED_OFFSET)
    };
    let mut out = vec![shift(ns_fixed_point(p).state)];
    if let Ok((a, b)) = tfp_fixed_points(p) {
        out.push(shift(a.state));
        out.push(shift(b.state));
    }
    while out.len() < n_random + 3 {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            out.push(ReducedState::new(p.p0 * v[0], p.p0 * v[1], p.p0 * v[2]));
        }
        if out.len() >= n_random + 3 {
            break;
        }
    }
    // Keep exactly n_random random states even when the twin points are absent.
    let fixed = if tfp_fixed_points(p).is_ok() { 3 } else { 1 };
    out.truncate(fixed + n_random);
    out
}

/// Classifies every cell of the grid. Work is spread over `workers`
/// threads (all available when `None`); the result does not depend on the
/// worker count.
pub fn stability_diagram(
    grid: &GridSpec,
    base: &Params,
    opts: &ClassifyOptions,
    workers: Option<usize>,
) -> Result<PhaseDiagram, ClassifyError> {
    grid.validate()?;
    let n = grid.n_eps * grid.n_alpha;
    let run = || -> Vec<DiagramCell> {
        (0..n)
            .into_par_iter()
            .map(|idx| {
                let (ie, ia) = (idx % grid.n_eps, idx / grid.n_eps);
                let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
                rng.set_stream(idx as u64);
                let mut labels = BTreeSet::new();
                let mut undetermined = 0;
                for (e, a) in grid.points(ie, ia) {
                    let p = base.with_alpha_ratio(a).with_eps_t2(e);
                    for x0 in seeds(&p, &mut rng, grid.random_seeds) {
                        match classify_attractor(&x0, &p, opts).kind {
                            Some(k) => {
                                labels.insert(k);
                            }
                            None => undetermined += 1,
                        }
                    }
                }
                let labels: Vec<AttractorKind> = labels.into_iter().collect();
                let region = match labels.as_slice() {
                    [AttractorKind::TwinFP, AttractorKind::Chaos] => Some(Region::I),
                    [AttractorKind::TwinFP, AttractorKind::LimitCycle] => Some(Region::II),
                    _ => None,
                };
                let (eps_t2, alpha_ratio) = grid.center(ie, ia);
                DiagramCell {
                    eps_t2,
                    alpha_ratio,
                    labels,
                    undetermined,
                    region,
                }
            })
            .collect()
    };
    let cells = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| ClassifyError::InvalidGrid(e.to_string()))?
            .install(run),
        None => run(),
    };
    let boundaries = extract_boundaries(grid, &cells);
    Ok(PhaseDiagram {
        grid: *grid,
        params: *base,
        cells,
        boundaries,
    })
}

/// Label-change edges chained into polylines. Vertices are grid corners
/// `(ie, ia)` until converted to parameter values.
fn extract_boundaries(grid: &GridSpec, cells: &[DiagramCell]) -> Vec<Polyline> {
    let has =
        |ie: usize, ia: usize, k: AttractorKind| cells[ia * grid.n_eps + ie].labels.contains(&k);
    let kinds = [
        AttractorKind::NoSignalFP,
        AttractorKind::TwinFP,
        AttractorKind::LimitCycle,
        AttractorKind::Chaos,
    ];
    let mut out = Vec::new();
    for k in kinds {
        let mut edges: Vec<((usize, usize), (usize, usize))> = Vec::new();
        for ia in 0..grid.n_alpha {
            for ie in 0..grid.n_eps {
                if ie + 1 < grid.n_eps && has(ie, ia, k) != has(ie + 1, ia, k) {
                    edges.push(((ie + 1, ia), (ie + 1, ia + 1)));
                }
                if ia + 1 < grid.n_alpha && has(ie, ia, k) != has(ie, ia + 1, k) {
                    edges.push(((ie, ia + 1), (ie + 1, ia + 1)));
                }
            }
        }
        for chain in chain_edges(edges) {
            let (de, da) = grid.cell_width();
            let points = chain
                .into_iter()
                .map(|(ie, ia)| {
                    (
                        grid.eps_t2.0 + ie as f64 * de,
                        grid.alpha_ratio.0 + ia as f64 * da,
                    )
                })
                .collect();
            out.push(Polyline { label: k, points });
        }
    }
    out
}

type Vertex = (usize, usize);

fn chain_edges(edges: Vec<(Vertex, Vertex)>) -> Vec<Vec<Vertex>> {
    let mut adj: BTreeMap<Vertex, Vec<usize>> = BTreeMap::new();
    for (i, (a, b)) in edges.iter().enumerate() {
        adj.entry(*a).or_default().push(i);
        adj.entry(*b).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut chains = Vec::new();
    // Open chains start at vertices of odd degree; closed loops afterwards.
    let starts: Vec<Vertex> = adj
        .iter()
        .filter(|(_, v)| v.len() % 2 == 1)
        .map(|(k, _)| *k)
        .chain(edges.iter().map(|e| e.0))
        .collect();
    for start in starts {
        while let Some(&first) = adj[&start].iter().find(|&&i| !used[i]) {
            let mut chain = vec![start];
            let mut at = start;
            let mut next_edge = Some(first);
            while let Some(i) = next_edge {
                used[i] = true;
                let (a, b) = edges[i];
                at = if a == at { b } else { a };
                chain.push(at);
                next_edge = adj[&at].iter().copied().find(|&j| !used[j]);
            }
            chains.push(chain);
        }
    }
    chains
}
