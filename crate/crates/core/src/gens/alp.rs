//! Airport landing instances.
//!
//! Plane `Pi` waits in `approach` (free) until it lands or its target time
//! passes. Landing early moves it to `early`, where it pays `early_rate`
//! until the target time; after the target it pays `late_rate` in `late`
//! until landing. Runway `Rr` remembers the wake class of its last landing
//! and its clock `sep` enforces the separation matrix. A landing is a
//! handshake on `land_r_k` (runway `r`, class `k`).

use crate::model::{
    Automaton, CmpOp, Comparator, Edge, Guard, Location, LocationSelection, Network, PriceFunction, Query, SyncDir,
};
use crate::parser::ModelDocument;
use crate::rational::Rational;
use crate::semantics::{Run, Step};

/// Global clock measuring absolute time.
pub const NOW: &str = "now";
pub const DEFAULT_BUDGET: u64 = 800;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneSpec {
    pub earliest: u64,
    pub target: u64,
    pub latest: u64,
    pub early_rate: u64,
    pub late_rate: u64,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlpInstance {
    pub planes: Vec<PlaneSpec>,
    pub runways: usize,
    /// `separation[a][b]`: minimum gap after a class-`a` landing before a
    /// class-`b` landing on the same runway.
    pub separation: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlpError {
    #[error("plane {0}: window must satisfy earliest <= target <= latest")]
    Window(usize),
    #[error("plane {0}: class {1} has no row in the separation matrix")]
    Class(usize, usize),
    #[error("separation matrix must be square")]
    Matrix,
    #[error("at least one runway is required")]
    NoRunway,
    #[error("at least one plane is required")]
    NoPlane,
}

pub fn plane_name(i: usize) -> String {
    format!("P{i}")
}

pub fn runway_name(r: usize) -> String {
    format!("R{r}")
}

fn channel(r: usize, class: usize) -> String {
    format!("land_{r}_{class}")
}

impl AlpInstance {
    pub fn check(&self) -> Result<(), AlpError> {
        if self.runways == 0 {
            return Err(AlpError::NoRunway);
        }
        if self.planes.is_empty() {
            return Err(AlpError::NoPlane);
        }
        let k = self.separation.len();
        if self.separation.iter().any(|row| row.len() != k) {
            return Err(AlpError::Matrix);
        }
        for (i, p) in self.planes.iter().enumerate() {
            if !(p.earliest <= p.target && p.target <= p.latest) {
                return Err(AlpError::Window(i));
            }
            if p.class >= k {
                return Err(AlpError::Class(i, p.class));
            }
        }
        Ok(())
    }

    /// Canonical steps needed: two switches per plane and a delay around each.
    pub fn steps(&self) -> u32 {
        4 * self.planes.len() as u32 + 1
    }

    pub fn source(&self) -> LocationSelection {
        let mut s: LocationSelection = (0..self.planes.len())
            .map(|i| (plane_name(i), "approach".to_string()))
            .collect();
        s.extend((0..self.runways).map(|r| (runway_name(r), "free".to_string())));
        s
    }

    pub fn target(&self) -> LocationSelection {
        (0..self.planes.len())
            .map(|i| (plane_name(i), "landed".to_string()))
            .collect()
    }

    pub fn network(&self) -> Result<Network, AlpError> {
        self.check()?;
        let classes = self.separation.len();
        let mut net = Network {
            global_clocks: vec![NOW.into()],
            ..Network::default()
        };
        for (i, p) in self.planes.iter().enumerate() {
            let mut a = Automaton::new(&plane_name(i));
            a.locations = vec![
                Location::new("approach").with_invariant(Guard::atom(NOW, CmpOp::Le, p.target)),
                Location::new("early")
                    .with_invariant(Guard::atom(NOW, CmpOp::Le, p.target))
                    .with_price(PriceFunction::ConstantRate(p.early_rate)),
                Location::new("late")
                    .with_invariant(Guard::atom(NOW, CmpOp::Le, p.latest))
                    .with_price(PriceFunction::ConstantRate(p.late_rate)),
                Location::new("landed"),
            ];
            a.edges
                .push(Edge::new("approach", "late").with_guard(Guard::atom(NOW, CmpOp::Eq, p.target)));
            a.edges
                .push(Edge::new("early", "landed").with_guard(Guard::atom(NOW, CmpOp::Eq, p.target)));
            for r in 0..self.runways {
                let ch = channel(r, p.class);
                a.edges.push(
                    Edge::new("approach", "early")
                        .with_guard(Guard::atom(NOW, CmpOp::Ge, p.earliest))
                        .with_sync(&ch, SyncDir::Send),
                );
                a.edges.push(Edge::new("late", "landed").with_sync(&ch, SyncDir::Send));
            }
            a.initial = Some("approach".into());
            net.automata.push(a);
        }
        for r in 0..self.runways {
            let mut a = Automaton::new(&runway_name(r));
            a.clocks.push("sep".into());
            a.locations.push(Location::new("free"));
            for k in 0..classes {
                a.locations.push(Location::new(&format!("after_{k}")));
            }
            for k in 0..classes {
                let ch = channel(r, k);
                net.channels.insert(ch.clone());
                a.edges.push(
                    Edge::new("free", &format!("after_{k}"))
                        .with_sync(&ch, SyncDir::Receive)
                        .reset("sep"),
                );
                for j in 0..classes {
                    a.edges.push(
                        Edge::new(&format!("after_{j}"), &format!("after_{k}"))
                            .with_guard(Guard::atom("sep", CmpOp::Ge, self.separation[j][k]))
                            .with_sync(&ch, SyncDir::Receive)
                            .reset("sep"),
                    );
                }
            }
            a.initial = Some("free".into());
            net.automata.push(a);
        }
        Ok(net)
    }

    pub fn query(&self, budget: Rational) -> Query {
        Query {
            source: self.source(),
            target: self.target(),
            steps: self.steps(),
            budget,
            cmp: Comparator::Le,
        }
    }
}

/// Model with one `<= budget` query reaching all-landed.
pub fn gen_alp(inst: &AlpInstance, budget: Rational) -> Result<ModelDocument, AlpError> {
    let mut doc = ModelDocument::new(inst.network()?);
    doc.queries.push(inst.query(budget));
    doc.metadata.insert("generator".into(), "alp".into());
    doc.metadata.insert("planes".into(), inst.planes.len().to_string());
    doc.metadata.insert("runways".into(), inst.runways.to_string());
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Landing {
    pub plane: usize,
    pub runway: usize,
    pub time: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("step {0} is a landing handshake between unexpected automata")]
    Handshake(usize),
    #[error("plane {0} lands {1} times")]
    LandingCount(usize, usize),
    #[error("plane {plane} lands at {time} outside [{earliest}, {latest}]")]
    Window {
        plane: usize,
        time: Rational,
        earliest: u64,
        latest: u64,
    },
    #[error("runway {runway}: plane {next} lands {gap} after plane {prev}, separation is {required}")]
    Separation {
        runway: usize,
        prev: usize,
        next: usize,
        gap: Rational,
        required: u64,
    },
}

fn index_of(name: &str, prefix: char) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok()
}

/// Landing times read off the run's delays, without replaying it.
pub fn landings(run: &Run) -> Result<Vec<Landing>, ScheduleError> {
    let mut now = run.start.clocks.get(NOW).cloned().unwrap_or_default();
    let mut out = Vec::new();
    for (i, s) in run.steps.iter().enumerate() {
        match s {
            Step::Delay(d) => now += d,
            Step::Handshake { sender, receiver } => {
                let plane = index_of(&sender.automaton, 'P').ok_or(ScheduleError::Handshake(i))?;
                let runway = index_of(&receiver.automaton, 'R').ok_or(ScheduleError::Handshake(i))?;
                out.push(Landing {
                    plane,
                    runway,
                    time: now.clone(),
                });
            }
            Step::Switch(_) | Step::Null => {}
        }
    }
    Ok(out)
}

/// Checks windows and runway separation for a run of `inst`'s network.
pub fn validate_schedule(inst: &AlpInstance, run: &Run) -> Result<Vec<Landing>, ScheduleError> {
    let ls = landings(run)?;
    for (i, p) in inst.planes.iter().enumerate() {
        let mine: Vec<&Landing> = ls.iter().filter(|l| l.plane == i).collect();
        if mine.len() != 1 {
            return Err(ScheduleError::LandingCount(i, mine.len()));
        }
        let t = &mine[0].time;
        if *t < Rational::from_integer(p.earliest.into()) || *t > Rational::from_integer(p.latest.into()) {
            return Err(ScheduleError::Window {
                plane: i,
                time: t.clone(),
                earliest: p.earliest,
                latest: p.latest,
            });
        }
    }
    for r in 0..inst.runways {
        let mut on: Vec<&Landing> = ls.iter().filter(|l| l.runway == r).collect();
        on.sort_by(|a, b| a.time.cmp(&b.time));
        for w in on.windows(2) {
            let required = inst.separation[inst.planes[w[0].plane].class][inst.planes[w[1].plane].class];
            let gap = &w[1].time - &w[0].time;
            if gap < Rational::from_integer(required.into()) {
                return Err(ScheduleError::Separation {
                    runway: r,
                    prev: w[0].plane,
                    next: w[1].plane,
                    gap,
                    required,
                });
            }
        }
    }
    Ok(ls)
}

/// Fixed desk-scale instance with `planes` planes (at most 4) and `runways` runways.
pub fn desk_instance(planes: usize, runways: usize) -> AlpInstance {
    let pool = [
        PlaneSpec {
            earliest: 2,
            target: 6,
            latest: 14,
            early_rate: 3,
            late_rate: 5,
            class: 0,
        },
        PlaneSpec {
            earliest: 3,
            target: 7,
            latest: 16,
            early_rate: 2,
            late_rate: 4,
            class: 1,
        },
        PlaneSpec {
            earliest: 4,
            target: 7,
            latest: 18,
            early_rate: 3,
            late_rate: 3,
            class: 0,
        },
        PlaneSpec {
            earliest: 5,
            target: 9,
            latest: 20,
            early_rate: 1,
            late_rate: 6,
            class: 1,
        },
    ];
    AlpInstance {
        planes: pool.iter().cycle().take(planes).cloned().collect(),
        runways,
        separation: vec![vec![3, 2], vec![4, 3]],
    }
}
