//! Grid layout: waypoints, their roles and the 4-connected waypoint graph.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{StationId, WaypointId};
use crate::kinematics::Heading;
use crate::rng::labeled_rng;

/// Above this many waypoints distances are computed on demand instead of cached.
const DISTANCE_CACHE_LIMIT: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub row: u32,
    pub col: u32,
}

impl Coord {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

impl From<[u32; 2]> for Coord {
    fn from([row, col]: [u32; 2]) -> Self {
        Self { row, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaypointKind {
    Storage,
    Highway,
    Dwelling,
    PickStationQueue,
    ReplenishStationQueue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationKind {
    Pick,
    Replenish,
}

impl fmt::Display for StationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StationKind::Pick => "pick",
            StationKind::Replenish => "replenish",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Station {
    pub id: StationId,
    pub kind: StationKind,
    pub waypoint: WaypointId,
    /// Maximum number of pods queued at or heading to the station.
    pub capacity: u32,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    pub id: u32,
    pub kind: StationKind,
    pub at: [u32; 2],
    #[serde(default = "default_station_capacity")]
    pub capacity: u32,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RandomStations {
    pub seed: u64,
    pub pick: u32,
    pub replenish: u32,
    #[serde(default = "default_station_capacity")]
    pub capacity: u32,
}

fn default_station_capacity() -> u32 {
    2
}

fn default_spacing() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub rows: u32,
    pub cols: u32,
    #[serde(default = "default_spacing")]
    pub spacing_m: f64,
    #[serde(default)]
    pub stations: Vec<StationConfig>,
    /// Places stations on perimeter cells drawn from a seeded stream.
    #[serde(default)]
    pub random_stations: Option<RandomStations>,
    /// Defaults to the centre cells of the middle row.
    #[serde(default)]
    pub dwelling: Option<Vec<[u32; 2]>>,
    #[serde(default)]
    pub highway: Vec<[u32; 2]>,
    /// Cells that are not part of the waypoint graph at all.
    #[serde(default)]
    pub blocked: Vec<[u32; 2]>,
}

impl LayoutConfig {
    /// Open grid with one replenishment station bottom-left and one pick
    /// station bottom-right.
    pub fn grid(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            spacing_m: 1.0,
            stations: vec![
                StationConfig {
                    id: 0,
                    kind: StationKind::Replenish,
                    at: [rows.saturating_sub(1), 0],
                    capacity: default_station_capacity(),
                },
                StationConfig {
                    id: 1,
                    kind: StationKind::Pick,
                    at: [rows.saturating_sub(1), cols.saturating_sub(1)],
                    capacity: default_station_capacity(),
                },
            ],
            random_stations: None,
            dwelling: None,
            highway: Vec::new(),
            blocked: Vec::new(),
        }
    }
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self::grid(3, 4)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("grid must be at least 2x2, got {rows}x{cols}")]
    TooSmall { rows: u32, cols: u32 },
    #[error("spacing_m must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("no stations")]
    NoStations,
    #[error("no {0} station")]
    MissingStationKind(StationKind),
    #[error("{what} at {at} is outside the {rows}x{cols} grid")]
    OutOfBounds {
        what: String,
        at: Coord,
        rows: u32,
        cols: u32,
    },
    #[error("{what} at {at} is on a blocked cell")]
    Blocked { what: String, at: Coord },
    #[error("duplicate station id {0}")]
    DuplicateStation(StationId),
    #[error("two stations share cell {0}")]
    SharedStationCell(Coord),
    #[error("station {0} capacity must be positive")]
    ZeroCapacity(StationId),
    #[error("not enough perimeter cells for {0} random stations")]
    NoRoomForStations(u32),
    #[error("waypoint graph is disconnected; unreachable waypoints: {}", format_coords(.unreachable))]
    Disconnected { unreachable: Vec<Coord> },
}

fn format_coords(coords: &[Coord]) -> String {
    coords
        .iter()
        .map(Coord::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Immutable description of the warehouse floor.
#[derive(Clone, Debug)]
pub struct Layout {
    rows: u32,
    cols: u32,
    spacing_m: f64,
    /// `None` marks a blocked cell.
    kinds: Vec<Option<WaypointKind>>,
    stations: Vec<Station>,
    adjacency: Vec<Vec<WaypointId>>,
    distances: Option<Vec<u32>>,
}

impl Layout {
    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    /// Number of grid cells, including blocked ones.
    pub fn cell_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn waypoint_count(&self) -> usize {
        self.kinds.iter().filter(|k| k.is_some()).count()
    }

    pub fn waypoints(&self) -> impl Iterator<Item = WaypointId> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| k.is_some())
            .map(|(i, _)| WaypointId(i as u32))
    }

    pub fn waypoints_of(&self, kind: WaypointKind) -> impl Iterator<Item = WaypointId> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(move |(_, k)| **k == Some(kind))
            .map(|(i, _)| WaypointId(i as u32))
    }

    pub fn kind(&self, wp: WaypointId) -> Option<WaypointKind> {
        self.kinds.get(wp.0 as usize).copied().flatten()
    }

    pub fn contains(&self, wp: WaypointId) -> bool {
        self.kind(wp).is_some()
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn station(&self, id: StationId) -> Option<&Station> {
        self.stations.iter().find(|s| s.id == id)
    }

    pub fn station_at(&self, wp: WaypointId) -> Option<&Station> {
        self.stations.iter().find(|s| s.waypoint == wp)
    }

    pub fn coord(&self, wp: WaypointId) -> Coord {
        Coord::new(wp.0 / self.cols, wp.0 % self.cols)
    }

    /// Waypoint at `coord`, if the cell exists and is not blocked.
    pub fn waypoint(&self, coord: Coord) -> Option<WaypointId> {
        if coord.row >= self.rows || coord.col >= self.cols {
            return None;
        }
        let wp = WaypointId(coord.row * self.cols + coord.col);
        self.contains(wp).then_some(wp)
    }

    pub fn neighbors(&self, wp: WaypointId) -> &[WaypointId] {
        &self.adjacency[wp.0 as usize]
    }

    pub fn adjacent(&self, a: WaypointId, b: WaypointId) -> bool {
        self.neighbors(a).contains(&b)
    }

    /// Heading of a robot travelling from `from` to the adjacent `to`.
    pub fn heading(&self, from: WaypointId, to: WaypointId) -> Option<Heading> {
        if !self.adjacent(from, to) {
            return None;
        }
        let (a, b) = (self.coord(from), self.coord(to));
        Some(if b.col > a.col {
            Heading::East
        } else if b.col < a.col {
            Heading::West
        } else if b.row < a.row {
            Heading::North
        } else {
            Heading::South
        })
    }

    /// Shortest-path hop count, `None` when either end is invalid or unreachable.
    pub fn graph_distance(&self, a: WaypointId, b: WaypointId) -> Option<u32> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        match &self.distances {
            Some(d) => {
                let v = d[a.0 as usize * self.kinds.len() + b.0 as usize];
                (v != u32::MAX).then_some(v)
            }
            None => {
                let v = bfs(&self.adjacency, a)[b.0 as usize];
                (v != u32::MAX).then_some(v)
            }
        }
    }

    /// Largest finite hop distance between any two waypoints.
    pub fn diameter(&self) -> u32 {
        let mut best = 0;
        for a in self.waypoints() {
            let row = match &self.distances {
                Some(d) => {
                    let n = self.kinds.len();
                    d[a.0 as usize * n..(a.0 as usize + 1) * n].to_vec()
                }
                None => bfs(&self.adjacency, a),
            };
            best = row
                .into_iter()
                .filter(|&v| v != u32::MAX)
                .fold(best, u32::max);
        }
        best
    }
}

fn bfs(adjacency: &[Vec<WaypointId>], from: WaypointId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adjacency.len()];
    let mut queue = VecDeque::new();
    dist[from.0 as usize] = 0;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        let d = dist[u.0 as usize];
        for &v in &adjacency[u.0 as usize] {
            if dist[v.0 as usize] == u32::MAX {
                dist[v.0 as usize] = d + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Builds and validates a layout. Placement is a pure function of the config.
pub fn build_layout(config: &LayoutConfig) -> Result<Layout, LayoutError> {
    let (rows, cols) = (config.rows, config.cols);
    if rows < 2 || cols < 2 {
        return Err(LayoutError::TooSmall { rows, cols });
    }
    if !(config.spacing_m.is_finite() && config.spacing_m > 0.0) {
        return Err(LayoutError::BadSpacing(config.spacing_m));
    }
    let n = (rows * cols) as usize;
    let index = |c: Coord| (c.row * cols + c.col) as usize;
    let check = |what: &str, c: Coord| -> Result<(), LayoutError> {
        if c.row >= rows || c.col >= cols {
            Err(LayoutError::OutOfBounds {
                what: what.to_owned(),
                at: c,
                rows,
                cols,
            })
        } else {
            Ok(())
        }
    };

    let mut kinds = vec![Some(WaypointKind::Storage); n];
    for &b in &config.blocked {
        let c = Coord::from(b);
        check("blocked cell", c)?;
        kinds[index(c)] = None;
    }

    let mut station_cfgs = config.stations.clone();
    if let Some(random) = &config.random_stations {
        station_cfgs.extend(random_station_placement(
            rows,
            cols,
            random,
            &station_cfgs,
            &kinds,
        )?);
    }
    if station_cfgs.is_empty() {
        return Err(LayoutError::NoStations);
    }

    let mut stations = Vec::with_capacity(station_cfgs.len());
    let mut seen_ids = BTreeSet::new();
    for sc in &station_cfgs {
        let id = StationId(sc.id);
        let c = Coord::from(sc.at);
        check(&format!("station {id}"), c)?;
        if kinds[index(c)].is_none() {
            return Err(LayoutError::Blocked {
                what: format!("station {id}"),
                at: c,
            });
        }
        if !seen_ids.insert(id) {
            return Err(LayoutError::DuplicateStation(id));
        }
        if sc.capacity == 0 {
            return Err(LayoutError::ZeroCapacity(id));
        }
        if stations.iter().any(|s: &Station| s.waypoint.0 as usize == index(c)) {
            return Err(LayoutError::SharedStationCell(c));
        }
        kinds[index(c)] = Some(match sc.kind {
            StationKind::Pick => WaypointKind::PickStationQueue,
            StationKind::Replenish => WaypointKind::ReplenishStationQueue,
        });
        stations.push(Station {
            id,
            kind: sc.kind,
            waypoint: WaypointId(index(c) as u32),
            capacity: sc.capacity,
        });
    }
    // replenishment is optional; the config requires it only when receipts can arrive
    if !stations.iter().any(|s| s.kind == StationKind::Pick) {
        return Err(LayoutError::MissingStationKind(StationKind::Pick));
    }
    stations.sort_by_key(|s| s.id);

    let dwelling: Vec<Coord> = match &config.dwelling {
        Some(cells) => cells.iter().copied().map(Coord::from).collect(),
        None => default_dwelling(rows, cols),
    };
    for c in dwelling {
        check("dwelling point", c)?;
        let slot = &mut kinds[index(c)];
        match slot {
            Some(WaypointKind::Storage) | Some(WaypointKind::Highway) => {
                *slot = Some(WaypointKind::Dwelling)
            }
            // Defaults quietly skip cells already taken; explicit ones must be free.
            _ if config.dwelling.is_none() => {}
            None => {
                return Err(LayoutError::Blocked {
                    what: "dwelling point".into(),
                    at: c,
                })
            }
            _ => {}
        }
    }
    for &h in &config.highway {
        let c = Coord::from(h);
        check("highway cell", c)?;
        match kinds[index(c)] {
            Some(WaypointKind::Storage) => kinds[index(c)] = Some(WaypointKind::Highway),
            None => {
                return Err(LayoutError::Blocked {
                    what: "highway cell".into(),
                    at: c,
                })
            }
            _ => {}
        }
    }

    let mut adjacency = vec![Vec::new(); n];
    for r in 0..rows {
        for c in 0..cols {
            let i = index(Coord::new(r, c));
            if kinds[i].is_none() {
                continue;
            }
            // Fixed neighbour order (N, W, E, S) keeps searches deterministic.
            let candidates = [
                (r > 0).then(|| Coord::new(r - 1, c)),
                (c > 0).then(|| Coord::new(r, c - 1)),
                (c + 1 < cols).then(|| Coord::new(r, c + 1)),
                (r + 1 < rows).then(|| Coord::new(r + 1, c)),
            ];
            for nb in candidates.into_iter().flatten() {
                if kinds[index(nb)].is_some() {
                    adjacency[i].push(WaypointId(index(nb) as u32));
                }
            }
        }
    }

    let root = stations[0].waypoint;
    let reach = bfs(&adjacency, root);
    let unreachable: Vec<Coord> = (0..n)
        .filter(|&i| kinds[i].is_some() && reach[i] == u32::MAX)
        .map(|i| Coord::new(i as u32 / cols, i as u32 % cols))
        .collect();
    if !unreachable.is_empty() {
        return Err(LayoutError::Disconnected { unreachable });
    }

    let distances = (n <= DISTANCE_CACHE_LIMIT).then(|| {
        let mut all = Vec::with_capacity(n * n);
        for i in 0..n {
            if kinds[i].is_some() {
                all.extend(bfs(&adjacency, WaypointId(i as u32)));
            } else {
                all.extend(std::iter::repeat_n(u32::MAX, n));
            }
        }
        all
    });

    Ok(Layout {
        rows,
        cols,
        spacing_m: config.spacing_m,
        kinds,
        stations,
        adjacency,
        distances,
    })
}

fn default_dwelling(rows: u32, cols: u32) -> Vec<Coord> {
    let row = rows / 2;
    let mut cells = vec![Coord::new(row, (cols - 1) / 2)];
    if cols / 2 != (cols - 1) / 2 {
        cells.push(Coord::new(row, cols / 2));
    }
    cells
}

fn random_station_placement(
    rows: u32,
    cols: u32,
    random: &RandomStations,
    fixed: &[StationConfig],
    kinds: &[Option<WaypointKind>],
) -> Result<Vec<StationConfig>, LayoutError> {
    let taken: BTreeSet<[u32; 2]> = fixed.iter().map(|s| s.at).collect();
    let mut perimeter: Vec<[u32; 2]> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| [r, c]))
        .filter(|&[r, c]| r == 0 || c == 0 || r == rows - 1 || c == cols - 1)
        .filter(|&[r, c]| kinds[(r * cols + c) as usize].is_some())
        .filter(|at| !taken.contains(at))
        .collect();
    let wanted = random.pick + random.replenish;
    if (perimeter.len() as u32) < wanted {
        return Err(LayoutError::NoRoomForStations(wanted));
    }
    let mut rng = labeled_rng(random.seed, "layout.stations");
    perimeter.shuffle(&mut rng);
    let first_id = fixed.iter().map(|s| s.id + 1).max().unwrap_or(0);
    Ok(perimeter
        .into_iter()
        .take(wanted as usize)
        .enumerate()
        .map(|(i, at)| StationConfig {
            id: first_id + i as u32,
            kind: if (i as u32) < random.pick {
                StationKind::Pick
            } else {
                StationKind::Replenish
            },
            at,
            capacity: random.capacity,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_three_by_four() {
        let layout = build_layout(&LayoutConfig::grid(3, 4)).unwrap();
        assert_eq!(layout.waypoint_count(), 12);
        assert_eq!(layout.stations().len(), 2);
        assert_eq!(layout.waypoints_of(WaypointKind::Dwelling).count(), 2);
        assert_eq!(layout.waypoints_of(WaypointKind::Storage).count(), 8);
        for a in layout.waypoints() {
            for b in layout.waypoints() {
                assert!(layout.graph_distance(a, b).is_some());
            }
        }
    }

    #[test]
    fn no_stations_rejected() {
        let mut cfg = LayoutConfig::grid(2, 2);
        cfg.stations.clear();
        let err = build_layout(&cfg).unwrap_err();
        assert_eq!(err, LayoutError::NoStations);
        assert_eq!(err.to_string(), "no stations");
    }

    #[test]
    fn missing_kind_rejected() {
        let mut cfg = LayoutConfig::grid(3, 3);
        cfg.stations.truncate(1);
        assert_eq!(
            build_layout(&cfg).unwrap_err(),
            LayoutError::MissingStationKind(StationKind::Pick)
        );
    }

    #[test]
    fn pick_only_layout_builds() {
        let mut cfg = LayoutConfig::grid(3, 3);
        cfg.stations.remove(0);
        let layout = build_layout(&cfg).unwrap();
        assert_eq!(layout.stations().len(), 1);
    }

    #[test]
    fn disconnected_names_unreachable_cells() {
        let mut cfg = LayoutConfig::grid(3, 4);
        // Wall off the top-right corner cell (0,3).
        cfg.blocked = vec![[0, 2], [1, 3]];
        let err = build_layout(&cfg).unwrap_err();
        assert_eq!(
            err,
            LayoutError::Disconnected {
                unreachable: vec![Coord::new(0, 3)]
            }
        );
        assert!(err.to_string().contains("(0,3)"));
    }

    #[test]
    fn seeded_random_stations_are_reproducible() {
        let mut cfg = LayoutConfig::grid(10, 10);
        cfg.stations.clear();
        cfg.random_stations = Some(RandomStations {
            seed: 7,
            pick: 2,
            replenish: 1,
            capacity: 2,
        });
        let a = build_layout(&cfg).unwrap();
        let b = build_layout(&cfg).unwrap();
        assert_eq!(a.stations(), b.stations());
        assert_eq!(a.stations().len(), 3);
        cfg.random_stations.as_mut().unwrap().seed = 8;
        let c = build_layout(&cfg).unwrap();
        assert_ne!(a.stations(), c.stations());
    }

    #[test]
    fn distance_examples() {
        let layout = build_layout(&LayoutConfig::grid(3, 4)).unwrap();
        let a = layout.waypoint(Coord::new(0, 0)).unwrap();
        let b = layout.waypoint(Coord::new(2, 3)).unwrap();
        assert_eq!(layout.graph_distance(a, a), Some(0));
        assert_eq!(layout.graph_distance(a, b), Some(5));
        assert_eq!(layout.diameter(), 5);
        assert_eq!(layout.graph_distance(a, WaypointId(99)), None);
    }

    #[test]
    fn headings_follow_grid_axes() {
        let layout = build_layout(&LayoutConfig::grid(3, 4)).unwrap();
        let at = |r, c| layout.waypoint(Coord::new(r, c)).unwrap();
        assert_eq!(layout.heading(at(1, 1), at(1, 2)), Some(Heading::East));
        assert_eq!(layout.heading(at(1, 1), at(0, 1)), Some(Heading::North));
        assert_eq!(layout.heading(at(1, 1), at(1, 0)), Some(Heading::West));
        assert_eq!(layout.heading(at(1, 1), at(2, 1)), Some(Heading::South));
        assert_eq!(layout.heading(at(1, 1), at(2, 2)), None);
    }
}
