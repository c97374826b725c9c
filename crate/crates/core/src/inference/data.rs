use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfm::SensitivityField;
use crate::spatial::Coord;

/// A monitoring station and the grid cell that contains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub x_km: f64,
    pub y_km: f64,
    pub cell_id: i64,
}

impl Site {
    pub fn coord(&self) -> Coord {
        [self.x_km, self.y_km]
    }
}

/// One daily observation (ppb) at a site, by site index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub day: i64,
    pub site: usize,
    pub y: f64,
}

/// Daily monitor values keyed by (day, site).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonitorDataset {
    sites: Vec<Site>,
    records: Vec<MonitorRecord>,
}

impl MonitorDataset {
    pub fn new(sites: Vec<Site>, records: Vec<MonitorRecord>) -> Result<Self> {
        let mut ids = HashSet::new();
        for s in &sites {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::input(format!("site id {} listed twice", s.id)));
            }
        }
        let mut keys = HashSet::new();
        for r in &records {
            let site = sites
                .get(r.site)
                .ok_or_else(|| Error::input(format!("record refers to site index {}", r.site)))?;
            if !(r.y >= 0.0 && r.y.is_finite()) {
                return Err(Error::input(format!(
                    "observation {} at day {}, site {} must be finite and non-negative",
                    r.y, r.day, site.id
                )));
            }
            if !keys.insert((r.day, r.site)) {
                return Err(Error::DuplicateKey {
                    day: r.day,
                    site: site.id.clone(),
                });
            }
        }
        Ok(Self { sites, records })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn records(&self) -> &[MonitorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn coords(&self) -> Vec<Coord> {
        self.sites.iter().map(Site::coord).collect()
    }

    /// Same sites, a subset of records.
    pub fn with_records(&self, records: Vec<MonitorRecord>) -> Self {
        Self {
            sites: self.sites.clone(),
            records,
        }
    }

    /// Resolve every record against the day and cell indices of `field`.
    pub fn link(&self, field: &SensitivityField) -> Result<LinkedDataset> {
        let site_cells = self
            .sites
            .iter()
            .map(|s| {
                field.cell_index(s.cell_id).ok_or_else(|| {
                    Error::Link(format!("site {} refers to unknown cell_id {}", s.id, s.cell_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut by_site = vec![Vec::new(); self.sites.len()];
        let records = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let t = field.day_index(r.day).ok_or_else(|| {
                    Error::Link(format!("day {} is not in the sensitivity field", r.day))
                })?;
                by_site[r.site].push(i);
                Ok(LinkedRecord {
                    t,
                    site: r.site,
                    cell: site_cells[r.site],
                    y: r.y,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LinkedDataset {
            data: self.clone(),
            records,
            by_site,
            site_cells,
        })
    }
}

/// A record with its day and cell resolved to field indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkedRecord {
    pub t: usize,
    pub site: usize,
    pub cell: usize,
    pub y: f64,
}

/// Monitor data validated against a sensitivity field.
#[derive(Debug, Clone)]
pub struct LinkedDataset {
    data: MonitorDataset,
    records: Vec<LinkedRecord>,
    by_site: Vec<Vec<usize>>,
    site_cells: Vec<usize>,
}

impl LinkedDataset {
    pub fn dataset(&self) -> &MonitorDataset {
        &self.data
    }

    pub fn sites(&self) -> &[Site] {
        self.data.sites()
    }

    pub fn n_sites(&self) -> usize {
        self.data.sites().len()
    }

    pub fn records(&self) -> &[LinkedRecord] {
        &self.records
    }

    /// Record indices belonging to each site.
    pub fn by_site(&self) -> &[Vec<usize>] {
        &self.by_site
    }

    pub fn site_cell(&self, site: usize) -> usize {
        self.site_cells[site]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfm::Cell;

    fn sites() -> Vec<Site> {
        vec![
            Site { id: "a".into(), x_km: 0.0, y_km: 0.0, cell_id: 10 },
            Site { id: "b".into(), x_km: 5.0, y_km: 0.0, cell_id: 11 },
        ]
    }

    #[test]
    fn duplicates_rejected() {
        let recs = vec![
            MonitorRecord { day: 1, site: 0, y: 40.0 },
            MonitorRecord { day: 1, site: 0, y: 41.0 },
        ];
        assert!(matches!(
            MonitorDataset::new(sites(), recs),
            Err(Error::DuplicateKey { day: 1, .. })
        ));
    }

    #[test]
    fn negative_values_rejected() {
        let recs = vec![MonitorRecord { day: 1, site: 0, y: -1.0 }];
        assert!(MonitorDataset::new(sites(), recs).is_err());
    }

    #[test]
    fn link_resolves_and_rejects_unknown_cells() {
        let cells = vec![
            Cell { id: 11, x_km: 6.0, y_km: 0.0 },
            Cell { id: 10, x_km: 0.0, y_km: 0.0 },
        ];
        let field = SensitivityField::from_packed(
            cells,
            vec![1, 2],
            vec!["x".into()],
            vec![0.0; 2 * 2 * 3],
        )
        .unwrap();
        let recs = vec![
            MonitorRecord { day: 2, site: 0, y: 40.0 },
            MonitorRecord { day: 1, site: 1, y: 41.0 },
        ];
        let data = MonitorDataset::new(sites(), recs).unwrap();
        let linked = data.link(&field).unwrap();
        assert_eq!(linked.records()[0].t, 1);
        assert_eq!(linked.records()[0].cell, 1);
        assert_eq!(linked.records()[1].cell, 0);
        assert_eq!(linked.by_site(), &[vec![0], vec![1]]);

        let mut bad = sites();
        bad[1].cell_id = 99;
        let data = MonitorDataset::new(bad, vec![]).unwrap();
        assert!(matches!(data.link(&field), Err(Error::Link(_))));

        let data = MonitorDataset::new(sites(), vec![MonitorRecord { day: 5, site: 0, y: 1.0 }]).unwrap();
        assert!(matches!(data.link(&field), Err(Error::Link(_))));
    }
}
