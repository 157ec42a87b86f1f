use std::collections::{BTreeMap, HashMap};

use super::{EonError, Route};

/// A directed link `(from, to)` by node index.
pub type DirectedLink = (usize, usize);

/// Half-open slot range `[start, end)` on the 12.5 GHz grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotInterval {
    pub start: u64,
    pub end: u64,
}

impl SlotInterval {
    pub fn width(&self) -> u64 {
        self.end - self.start
    }

    pub fn overlaps(&self, other: &SlotInterval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Per-link spectrum occupancy over an unbounded slot axis.
#[derive(Debug, Clone, Default)]
pub struct SpectrumGrid {
    // start -> (end, owner), kept disjoint per link.
    links: HashMap<DirectedLink, BTreeMap<u64, (u64, usize)>>,
}

impl SpectrumGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Occupied intervals of a link with their owners, by start slot.
    pub fn occupied(&self, link: DirectedLink) -> Vec<(SlotInterval, usize)> {
        self.links
            .get(&link)
            .map(|m| {
                m.iter()
                    .map(|(&start, &(end, owner))| (SlotInterval { start, end }, owner))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_free(&self, link: DirectedLink, interval: SlotInterval) -> bool {
        self.conflict(link, interval).is_none()
    }

    /// End of the highest-starting occupied interval on `link` that
    /// overlaps `interval`, if any.
    fn conflict(&self, link: DirectedLink, interval: SlotInterval) -> Option<u64> {
        let map = self.links.get(&link)?;
        let (_, &(end, _)) = map.range(..interval.end).next_back()?;
        (end > interval.start).then_some(end)
    }

    /// Marks `interval` as used by `owner` on `link`. Fails if any slot is
    /// already taken.
    pub fn occupy(
        &mut self,
        link: DirectedLink,
        interval: SlotInterval,
        owner: usize,
    ) -> Result<(), EonError> {
        if interval.width() == 0 {
            return Err(EonError::InvalidRequest(
                "cannot occupy an empty interval".into(),
            ));
        }
        if !self.is_free(link, interval) {
            return Err(EonError::InvalidRequest(format!(
                "slots [{}, {}) on link {:?} are already occupied",
                interval.start, interval.end, link
            )));
        }
        self.links
            .entry(link)
            .or_default()
            .insert(interval.start, (interval.end, owner));
        Ok(())
    }

    /// First pair of overlapping intervals on any link, found by comparing
    /// every pair directly.
    pub fn find_overlap(&self) -> Option<(DirectedLink, SlotInterval, SlotInterval)> {
        let mut keys: Vec<&DirectedLink> = self.links.keys().collect();
        keys.sort();
        for link in keys {
            let intervals = self.occupied(*link);
            for (i, (a, _)) in intervals.iter().enumerate() {
                for (b, _) in &intervals[i + 1..] {
                    if a.overlaps(b) {
                        return Some((*link, *a, *b));
                    }
                }
            }
        }
        None
    }
}

/// Allocates the lowest-indexed block of `slots` contiguous slots that is
/// free on every link of `route`, and occupies it on all of them.
pub fn first_fit_allocate(
    grid: &mut SpectrumGrid,
    route: &Route,
    slots: u64,
    owner: usize,
) -> Result<SlotInterval, EonError> {
    if slots == 0 {
        return Err(EonError::InvalidRequest(
            "allocation needs at least one slot".into(),
        ));
    }
    let links: Vec<DirectedLink> = route.links().collect();
    if links.is_empty() {
        return Err(EonError::InvalidRequest("route has no links".into()));
    }
    let mut start = 0u64;
    loop {
        let candidate = SlotInterval {
            start,
            end: start + slots,
        };
        // Jump past the blocking interval; repeat until no link conflicts.
        match links.iter().find_map(|&l| grid.conflict(l, candidate)) {
            Some(end) => start = end,
            None => {
                for &l in &links {
                    grid.occupy(l, candidate, owner)?;
                }
                return Ok(candidate);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route(nodes: &[usize]) -> Route {
        Route {
            nodes: nodes.to_vec(),
            cost: (nodes.len() - 1) as f64,
        }
    }

    #[test]
    fn empty_grid_starts_at_zero() {
        let mut g = SpectrumGrid::new();
        let iv = first_fit_allocate(&mut g, &route(&[0, 1, 2]), 3, 0).unwrap();
        assert_eq!(iv, SlotInterval { start: 0, end: 3 });
        assert_eq!(g.occupied((1, 2)).len(), 1);
        assert!(g.occupied((1, 0)).is_empty());
    }

    #[test]
    fn skips_occupied_prefix() {
        let mut g = SpectrumGrid::new();
        g.occupy((0, 1), SlotInterval { start: 0, end: 2 }, 9)
            .unwrap();
        let iv = first_fit_allocate(&mut g, &route(&[0, 1]), 2, 0).unwrap();
        assert_eq!(iv, SlotInterval { start: 2, end: 4 });
    }

    #[test]
    fn lowest_common_gap_across_links() {
        let mut g = SpectrumGrid::new();
        g.occupy((0, 1), SlotInterval { start: 0, end: 2 }, 8)
            .unwrap();
        g.occupy((1, 2), SlotInterval { start: 1, end: 3 }, 9)
            .unwrap();
        let iv = first_fit_allocate(&mut g, &route(&[0, 1, 2]), 1, 0).unwrap();
        assert_eq!(iv, SlotInterval { start: 3, end: 4 });
        assert!(g.find_overlap().is_none());
    }

    #[test]
    fn fills_holes() {
        let mut g = SpectrumGrid::new();
        g.occupy((0, 1), SlotInterval { start: 0, end: 2 }, 1)
            .unwrap();
        g.occupy((0, 1), SlotInterval { start: 5, end: 6 }, 2)
            .unwrap();
        let r = route(&[0, 1]);
        assert_eq!(
            first_fit_allocate(&mut g, &r, 3, 3).unwrap(),
            SlotInterval { start: 2, end: 5 }
        );
        assert_eq!(
            first_fit_allocate(&mut g, &r, 1, 4).unwrap(),
            SlotInterval { start: 6, end: 7 }
        );
    }

    #[test]
    fn rejects_zero_width_and_double_booking() {
        let mut g = SpectrumGrid::new();
        assert!(first_fit_allocate(&mut g, &route(&[0, 1]), 0, 0).is_err());
        g.occupy((0, 1), SlotInterval { start: 0, end: 4 }, 0)
            .unwrap();
        assert!(g
            .occupy((0, 1), SlotInterval { start: 3, end: 5 }, 1)
            .is_err());
    }
}
