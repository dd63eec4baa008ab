//! World state and the turn loop.
//!
//! The world is a torus of `s * s` sites carrying five grids: agent counts
//! `G`, ecosystem richness `B`, renewable energy `R`, fossil energy `E` and
//! food `F`. One call to [`World::step`] advances a single turn:
//!
//! 1. every site's renewable stock is refilled to `gamma`;
//! 2. the agents alive at the start of the turn act in a freshly shuffled
//!    order: movement draw, reproduction draw, consumption, cooperation or
//!    competition, lifespan update, aging and death;
//! 3. food and ecosystem grids are updated from the post-consumption state;
//! 4. the roster is compacted and per-turn aggregates are reported.
//!
//! Agents born during a turn are placed on the grid immediately (they can be
//! shared with, converted or pushed) but take their first actions on the next
//! turn. All randomness flows through a single seeded generator, so a
//! configuration determines the whole trajectory.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal};
use serde::Serialize;

use crate::{LifespanBasis, SimConfig, SimError};

/// One inhabitant of the world.
///
/// The probability fields are fixed at birth and inherited on reproduction.
/// `lifespan` is recomputed every turn from consumption and local crowding;
/// the agent dies once `age` reaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub age: u32,
    pub lifespan: f64,
    pub move_p: f64,
    pub repro_p: f64,
    pub coop_p: f64,
    /// Energy demanded per turn.
    pub demand_e: f64,
    /// Food demanded per turn.
    pub demand_f: f64,
    /// Preference for fossil energy; the fossil grid is used when this
    /// exceeds a fresh uniform draw.
    pub profile: f64,
    /// Energy group: 0 renewable-leaning, 1 fossil-leaning.
    pub group: u8,
    pub pos: (usize, usize),
    intake_e: f64,
    intake_f: f64,
    caring: bool,
    alive: bool,
}

/// Aggregates reported at the end of each turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnStats {
    pub t: u32,
    pub population: usize,
    pub mean_lifespan: f64,
    pub total_e: f64,
    pub total_b: f64,
    pub total_f: f64,
    pub group0: usize,
    pub group1: usize,
    pub occupied_sites: usize,
    pub max_stack: u32,
}

/// Outcome of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Last turn executed: the turn the population died out, or `t_max`.
    pub t_e: u32,
    pub reached_t_max: bool,
    /// Per-turn aggregates, one entry per executed turn.
    pub turns: Vec<TurnStats>,
}

/// Torus Chebyshev distance between two sites of an `s`-sided grid.
pub fn chebyshev_torus(
    p1: (usize, usize),
    p2: (usize, usize),
    s: usize,
) -> Result<usize, SimError> {
    if s == 0 {
        return Err(SimError::Domain("grid side must be positive".into()));
    }
    for p in [p1, p2] {
        if p.0 >= s || p.1 >= s {
            return Err(SimError::Domain(format!(
                "site ({}, {}) outside a grid of side {s}",
                p.0, p.1
            )));
        }
    }
    let axis = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(s - d)
    };
    Ok(axis(p1.0, p2.0).max(axis(p1.1, p2.1)))
}

/// Distinct sites within torus Chebyshev distance `lambda` of `pos`,
/// sorted in row-major order. Coordinates are taken modulo `s`.
pub fn line_of_sight(pos: (usize, usize), lambda: usize, s: usize) -> Vec<(usize, usize)> {
    let l = lambda as i64;
    let side = s as i64;
    let mut sites: Vec<(usize, usize)> = Vec::with_capacity((2 * lambda + 1).pow(2));
    for di in -l..=l {
        for dj in -l..=l {
            let i = (pos.0 as i64 + di).rem_euclid(side) as usize;
            let j = (pos.1 as i64 + dj).rem_euclid(side) as usize;
            sites.push((i, j));
        }
    }
    sites.sort_unstable();
    sites.dedup();
    sites
}

/// Crowding response: 0 at or below `xi5`, 1 at or above `xi6`, linear
/// in between.
pub fn step_function(x: f64, xi5: f64, xi6: f64) -> f64 {
    if x <= xi5 {
        0.0
    } else if x >= xi6 {
        1.0
    } else {
        (x - xi5) / (xi6 - xi5)
    }
}

/// Next-turn lifespan of an agent, clamped to `[0, xi2]`.
///
/// The consumption term multiplies an energy and a food factor. Under the
/// `Obtained` basis these are the quantities actually gathered this turn
/// (zero when the corresponding demand is zero); under `Demanded` they are
/// the agent's nominal demands. Crowding enters through the step response
/// of the local agent count.
pub fn lifespan_update(
    cfg: &SimConfig,
    demand_e: f64,
    demand_f: f64,
    intake_e: f64,
    intake_f: f64,
    local_density: f64,
) -> f64 {
    let (eff_e, eff_f) = match cfg.lifespan_basis {
        LifespanBasis::Obtained => (
            if demand_e > 0.0 { intake_e } else { 0.0 },
            if demand_f > 0.0 { intake_f } else { 0.0 },
        ),
        LifespanBasis::Demanded => (demand_e, demand_f),
    };
    let range = cfg.xi2 - cfg.xi1;
    let value = cfg.xi1 + (1.0 - cfg.xi3) * range + cfg.xi3 * eff_e * eff_f * range
        - cfg.xi4 * cfg.xi2 * step_function(local_density, cfg.xi5, cfg.xi6);
    value.clamp(0.0, cfg.xi2)
}

/// Conversion by a competitor: the profile flips to its complement and the
/// agent changes group.
pub fn convert_profile(agent: &mut Agent) {
    agent.profile = 1.0 - agent.profile;
    agent.group = 1 - agent.group;
}

fn site_index(s: usize, pos: (usize, usize)) -> usize {
    pos.0 * s + pos.1
}

fn kahan_total(values: &[f64]) -> f64 {
    let mut acc = Kahan::default();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

#[derive(Debug, Clone, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

const MOORE_OFFSETS: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Full simulation state.
#[derive(Debug, Clone)]
pub struct World {
    cfg: SimConfig,
    rng: ChaCha8Rng,
    t: u32,
    agents: Vec<Agent>,
    g: Vec<u32>,
    b: Vec<f64>,
    r: Vec<f64>,
    e: Vec<f64>,
    f: Vec<f64>,
    site_agents: Vec<Vec<usize>>,
    initial_fossil: f64,
    fossil_consumed: Kahan,
    f_start: Vec<f64>,
    q_food: Vec<f64>,
    care: Vec<u32>,
}

impl World {
    /// Builds and seeds a world from a validated configuration.
    ///
    /// Renewables start at `gamma` everywhere. Ecosystem richness and food
    /// are spread over all sites with uniform random weights normalized to
    /// the configured totals. Fossil energy is split equally over `n_urban`
    /// distinct random sites. Half of the agents start on random urban
    /// patches, the rest anywhere; every agent starts at age 0 with the
    /// maximal lifespan.
    pub fn new(cfg: SimConfig) -> Result<World, SimError> {
        cfg.validate()?;
        let s = cfg.s;
        let n = s * s;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let spread = |rng: &mut ChaCha8Rng, total: f64| -> Vec<f64> {
            let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mass: f64 = weights.iter().sum();
            if mass > 0.0 {
                weights.iter().map(|w| total * w / mass).collect()
            } else {
                vec![total / n as f64; n]
            }
        };
        let b = spread(&mut rng, cfg.n_eco);
        let f = spread(&mut rng, cfg.n_food);
        let r = vec![cfg.gamma; n];

        let mut e = vec![0.0; n];
        let patches = rand::seq::index::sample(&mut rng, n, cfg.n_urban).into_vec();
        let share = cfg.n_fossil / cfg.n_urban as f64;
        for &p in &patches {
            e[p] = share;
        }

        let demand_dist = LogNormal::<f64>::new(-2.88, 1.22).expect("valid log-normal parameters");
        let profile_dist =
            Beta::new(cfg.beta_alpha, 6.0 - cfg.beta_alpha).expect("valid beta parameters");
        let urban_half = cfg.n_agents / 2;
        let mut agents = Vec::with_capacity(cfg.n_agents);
        for a_idx in 0..cfg.n_agents {
            let site = if a_idx < urban_half {
                patches[rng.gen_range(0..patches.len())]
            } else {
                rng.gen_range(0..n)
            };
            let demand_e = loop {
                let v = demand_dist.sample(&mut rng);
                if v <= 1.0 {
                    break v;
                }
            };
            let demand_f = 1.0 - (-5.0 * demand_e).exp();
            let profile: f64 = profile_dist.sample(&mut rng);
            let group = if profile > 0.0 && profile <= 0.5 { 0 } else { 1 };
            agents.push(Agent {
                age: 0,
                lifespan: cfg.xi2,
                move_p: cfg.alpha3,
                repro_p: cfg.alpha4,
                coop_p: cfg.alpha5,
                demand_e,
                demand_f,
                profile,
                group,
                pos: (site / s, site % s),
                intake_e: 0.0,
                intake_f: 0.0,
                caring: false,
                alive: true,
            });
        }

        let mut g = vec![0u32; n];
        let mut site_agents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, a) in agents.iter().enumerate() {
            let k = site_index(s, a.pos);
            g[k] += 1;
            site_agents[k].push(i);
        }

        let initial_fossil = kahan_total(&e);
        Ok(World {
            cfg,
            rng,
            t: 0,
            agents,
            g,
            b,
            r,
            e,
            f,
            site_agents,
            initial_fossil,
            fossil_consumed: Kahan::default(),
            f_start: vec![0.0; n],
            q_food: vec![0.0; n],
            care: vec![0; n],
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn side(&self) -> usize {
        self.cfg.s
    }

    pub fn turn(&self) -> u32 {
        self.t
    }

    /// Living agents. Between turns the roster holds exactly the survivors.
    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn population(&self) -> usize {
        self.agents.len()
    }

    pub fn g_at(&self, i: usize, j: usize) -> u32 {
        self.g[site_index(self.cfg.s, (i, j))]
    }

    pub fn b_at(&self, i: usize, j: usize) -> f64 {
        self.b[site_index(self.cfg.s, (i, j))]
    }

    pub fn r_at(&self, i: usize, j: usize) -> f64 {
        self.r[site_index(self.cfg.s, (i, j))]
    }

    pub fn e_at(&self, i: usize, j: usize) -> f64 {
        self.e[site_index(self.cfg.s, (i, j))]
    }

    pub fn f_at(&self, i: usize, j: usize) -> f64 {
        self.f[site_index(self.cfg.s, (i, j))]
    }

    /// Scenario setup: overwrite ecosystem richness at one site.
    pub fn set_b_at(&mut self, i: usize, j: usize, value: f64) {
        self.b[site_index(self.cfg.s, (i, j))] = value;
    }

    /// Scenario setup: overwrite food at one site.
    pub fn set_f_at(&mut self, i: usize, j: usize, value: f64) {
        self.f[site_index(self.cfg.s, (i, j))] = value;
    }

    /// Scenario setup: overwrite renewable stock at one site. Refilled to
    /// `gamma` at the start of the next turn.
    pub fn set_r_at(&mut self, i: usize, j: usize, value: f64) {
        self.r[site_index(self.cfg.s, (i, j))] = value;
    }

    /// Scenario setup: overwrite fossil stock at one site. The conservation
    /// baseline is adjusted so that initial stock still equals remaining
    /// stock plus cumulative consumption.
    pub fn set_e_at(&mut self, i: usize, j: usize, value: f64) {
        let k = site_index(self.cfg.s, (i, j));
        self.initial_fossil += value - self.e[k];
        self.e[k] = value;
    }

    pub fn total_e(&self) -> f64 {
        kahan_total(&self.e)
    }

    pub fn total_b(&self) -> f64 {
        kahan_total(&self.b)
    }

    pub fn total_f(&self) -> f64 {
        kahan_total(&self.f)
    }

    pub fn total_r(&self) -> f64 {
        kahan_total(&self.r)
    }

    /// Fossil stock present at initialization (plus setter adjustments).
    pub fn initial_fossil(&self) -> f64 {
        self.initial_fossil
    }

    /// Cumulative fossil energy consumed by agents over all turns.
    pub fn fossil_consumed(&self) -> f64 {
        self.fossil_consumed.value()
    }

    /// Advances the world one turn and reports end-of-turn aggregates.
    pub fn step(&mut self) -> TurnStats {
        let s = self.cfg.s;
        let n = s * s;

        for k in 0..n {
            self.r[k] = self.cfg.gamma;
        }
        self.f_start.copy_from_slice(&self.f);
        self.q_food.fill(0.0);
        for a in &mut self.agents {
            a.intake_e = 0.0;
            a.intake_f = 0.0;
            a.caring = false;
        }

        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.shuffle(&mut self.rng);
        for &ai in &order {
            if self.rng.gen::<f64>() < self.agents[ai].move_p {
                let pos = self.agents[ai].pos;
                let profile = self.agents[ai].profile;
                let dest = self.choose_destination(pos, profile);
                self.relocate(ai, dest);
            }
            if self.rng.gen::<f64>() < self.agents[ai].repro_p {
                self.reproduce(ai);
            }
            self.consume(ai);
            self.social(ai);
            self.vital(ai);
        }

        self.care.fill(0);
        for a in &self.agents {
            if a.alive && a.caring {
                self.care[site_index(s, a.pos)] += 1;
            }
        }
        for k in 0..n {
            let b_now = self.b[k];
            let supplied = self.cfg.phi1 * self.f_start[k]
                + self.cfg.phi2 * (self.e[k] * b_now * self.r[k])
                + self.cfg.phi3 * (b_now * self.r[k]);
            self.f[k] = (supplied - self.q_food[k]).max(0.0);

            let growth = if b_now > 0.0 && b_now < self.cfg.beta_k {
                self.cfg.beta1 * b_now
            } else {
                0.0
            };
            let plain = self.g[k] as f64 - self.care[k] as f64;
            let destruction = self.cfg.beta2 * plain
                + self.cfg.beta2 * (1.0 - self.cfg.omega) * self.care[k] as f64;
            self.b[k] = (b_now + growth - destruction).max(0.0);
        }

        self.agents.retain(|a| a.alive);
        for list in &mut self.site_agents {
            list.clear();
        }
        for (i, a) in self.agents.iter().enumerate() {
            self.site_agents[a.pos.0 * s + a.pos.1].push(i);
        }

        self.t += 1;
        self.aggregates()
    }

    fn aggregates(&self) -> TurnStats {
        let population = self.agents.len();
        let mean_lifespan = if population == 0 {
            0.0
        } else {
            self.agents.iter().map(|a| a.lifespan).sum::<f64>() / population as f64
        };
        let group0 = self.agents.iter().filter(|a| a.group == 0).count();
        TurnStats {
            t: self.t,
            population,
            mean_lifespan,
            total_e: self.total_e(),
            total_b: self.total_b(),
            total_f: self.total_f(),
            group0,
            group1: population - group0,
            occupied_sites: self.g.iter().filter(|&&c| c > 0).count(),
            max_stack: self.g.iter().copied().max().unwrap_or(0),
        }
    }

    /// Argmax of `F + profile * E` over the line of sight, ties broken
    /// uniformly; when nothing of value is in sight, a uniform step to one
    /// of the 8 Moore neighbors.
    fn choose_destination(&mut self, pos: (usize, usize), profile: f64) -> (usize, usize) {
        let s = self.cfg.s;
        let sight = line_of_sight(pos, self.cfg.lambda, s);
        let mut best = f64::NEG_INFINITY;
        for &(i, j) in &sight {
            let k = site_index(s, (i, j));
            let score = self.f[k] + profile * self.e[k];
            if score > best {
                best = score;
            }
        }
        if best <= 0.0 {
            return self.random_moore_neighbor(pos);
        }
        let ties: Vec<(usize, usize)> = sight
            .into_iter()
            .filter(|&(i, j)| {
                let k = site_index(s, (i, j));
                self.f[k] + profile * self.e[k] == best
            })
            .collect();
        if ties.len() == 1 {
            ties[0]
        } else {
            ties[self.rng.gen_range(0..ties.len())]
        }
    }

    fn random_moore_neighbor(&mut self, pos: (usize, usize)) -> (usize, usize) {
        let side = self.cfg.s as i64;
        let (di, dj) = MOORE_OFFSETS[self.rng.gen_range(0..MOORE_OFFSETS.len())];
        (
            (pos.0 as i64 + di).rem_euclid(side) as usize,
            (pos.1 as i64 + dj).rem_euclid(side) as usize,
        )
    }

    fn relocate(&mut self, ai: usize, dest: (usize, usize)) {
        let from = self.agents[ai].pos;
        if from == dest {
            return;
        }
        let s = self.cfg.s;
        let fk = site_index(s, from);
        let tk = site_index(s, dest);
        let slot = self.site_agents[fk]
            .iter()
            .position(|&x| x == ai)
            .expect("agent listed at its own site");
        self.site_agents[fk].swap_remove(slot);
        self.site_agents[tk].push(ai);
        self.g[fk] -= 1;
        self.g[tk] += 1;
        self.agents[ai].pos = dest;
    }

    fn reproduce(&mut self, ai: usize) {
        let mut child = self.agents[ai].clone();
        child.age = 0;
        child.intake_e = 0.0;
        child.intake_f = 0.0;
        child.caring = false;
        child.alive = true;
        let k = site_index(self.cfg.s, child.pos);
        let ci = self.agents.len();
        self.agents.push(child);
        self.site_agents[k].push(ci);
        self.g[k] += 1;
    }

    fn consume(&mut self, ai: usize) {
        let k = site_index(self.cfg.s, self.agents[ai].pos);
        let x: f64 = self.rng.gen();
        let demand_e = self.agents[ai].demand_e;
        let taken = if self.agents[ai].profile > x {
            let t = demand_e.min(self.e[k]);
            self.e[k] -= t;
            self.fossil_consumed.add(t);
            t
        } else {
            let t = demand_e.min(self.r[k]);
            self.r[k] -= t;
            t
        };
        self.agents[ai].intake_e += taken;

        let food = self.agents[ai].demand_f.min(self.f[k]);
        self.f[k] -= food;
        self.q_food[k] += food;
        self.agents[ai].intake_f += food;
    }

    fn social(&mut self, ai: usize) {
        let k = site_index(self.cfg.s, self.agents[ai].pos);
        if self.rng.gen::<f64>() < self.agents[ai].coop_p {
            let group = self.agents[ai].group;
            if let Some(t) = self.pick_site_mate(k, group, Some(ai)) {
                let give_e = self.agents[ai].intake_e * 0.5;
                let give_f = self.agents[ai].intake_f * 0.5;
                self.agents[ai].intake_e -= give_e;
                self.agents[ai].intake_f -= give_f;
                self.agents[t].intake_e += give_e;
                self.agents[t].intake_f += give_f;
            }
            self.agents[ai].caring = true;
        } else {
            let opposite = 1 - self.agents[ai].group;
            if let Some(t) = self.pick_site_mate(k, opposite, None) {
                convert_profile(&mut self.agents[t]);
            }
            let own = self.agents[ai].group;
            if let Some(t) = self.pick_site_mate(k, own, Some(ai)) {
                let dest = self.random_moore_neighbor(self.agents[t].pos);
                self.relocate(t, dest);
            }
        }
    }

    fn pick_site_mate(&mut self, site: usize, group: u8, exclude: Option<usize>) -> Option<usize> {
        let candidates: Vec<usize> = self.site_agents[site]
            .iter()
            .copied()
            .filter(|&c| self.agents[c].alive && self.agents[c].group == group && Some(c) != exclude)
            .collect();
        match candidates.len() {
            0 => None,
            1 => Some(candidates[0]),
            m => Some(candidates[self.rng.gen_range(0..m)]),
        }
    }

    fn vital(&mut self, ai: usize) {
        let k = site_index(self.cfg.s, self.agents[ai].pos);
        let density = self.g[k] as f64;
        let a = &self.agents[ai];
        let lifespan = lifespan_update(
            &self.cfg,
            a.demand_e,
            a.demand_f,
            a.intake_e,
            a.intake_f,
            density,
        );
        self.agents[ai].lifespan = lifespan;
        self.agents[ai].age += 1;
        if self.agents[ai].age as f64 >= lifespan {
            self.kill(ai);
        }
    }

    fn kill(&mut self, ai: usize) {
        let k = site_index(self.cfg.s, self.agents[ai].pos);
        self.agents[ai].alive = false;
        let slot = self.site_agents[k]
            .iter()
            .position(|&x| x == ai)
            .expect("agent listed at its own site");
        self.site_agents[k].swap_remove(slot);
        self.g[k] -= 1;
    }
}

/// Runs a configuration to extinction or `t_max`, whichever comes first.
pub fn run_simulation(cfg: SimConfig) -> Result<RunSummary, SimError> {
    let mut world = World::new(cfg)?;
    let t_max = world.cfg.t_max;
    let mut turns = Vec::new();
    if t_max == 0 {
        return Ok(RunSummary {
            t_e: 0,
            reached_t_max: true,
            turns,
        });
    }
    if world.population() == 0 {
        return Ok(RunSummary {
            t_e: 0,
            reached_t_max: false,
            turns,
        });
    }
    for t in 1..=t_max {
        let stats = world.step();
        let died_out = stats.population == 0;
        turns.push(stats);
        if died_out {
            return Ok(RunSummary {
                t_e: t,
                reached_t_max: false,
                turns,
            });
        }
    }
    Ok(RunSummary {
        t_e: t_max,
        reached_t_max: true,
        turns,
    })
}
