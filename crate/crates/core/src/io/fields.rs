use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{csv_error, open_csv, parse_error, parse_field, CsvOut};
use crate::error::{Error, Result};
use crate::inference::{MonitorDataset, MonitorRecord, Site};
use crate::rfm::{cross_pair_count, cross_pair_index, Cell, SensitivityField};

pub const MONITOR_HEADER: [&str; 6] = ["day", "site_id", "x_km", "y_km", "cell_id", "o3_ppb"];

const FIELD_KEYS: [&str; 4] = ["day", "cell_id", "x_km", "y_km"];

/// Sensitivity CSV header for the given input names: the key columns, `c0`,
/// `s1_<a>`, `s2_<a>_<a>` and the cross terms `s2_<a>_<b>` in packed order.
pub fn sensitivity_header(names: &[String]) -> Vec<String> {
    let d = names.len();
    let mut h: Vec<String> = FIELD_KEYS.iter().map(|s| s.to_string()).collect();
    h.push("c0".into());
    h.extend(names.iter().map(|n| format!("s1_{n}")));
    h.extend(names.iter().map(|n| format!("s2_{n}_{n}")));
    let mut cross = vec![String::new(); cross_pair_count(d)];
    for l in 0..d {
        for j in l + 1..d {
            cross[cross_pair_index(d, l, j)] = format!("s2_{}_{}", names[l], names[j]);
        }
    }
    h.extend(cross);
    h
}

/// Read a sensitivity field. Days are sorted; cells keep the order of their
/// first appearance. Every (day, cell) pair must appear exactly once.
pub fn load_sensitivity(path: &Path) -> Result<SensitivityField> {
    let mut rdr = open_csv(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let names: Vec<String> = header
        .iter()
        .skip(5)
        .map_while(|h| h.strip_prefix("s1_").map(str::to_string))
        .collect();
    if names.is_empty() || sensitivity_header(&names) != header {
        return Err(parse_error(
            path,
            1,
            "expected header day,cell_id,x_km,y_km,c0,s1_<input>...,s2_<input>_<input>...",
        ));
    }
    let stride = SensitivityField::stride_for(names.len());
    let mut cells: Vec<Cell> = Vec::new();
    let mut cell_index: HashMap<i64, usize> = HashMap::new();
    let mut rows: BTreeMap<i64, HashMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut last_line = 1;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        last_line = line;
        let day: i64 = parse_field(path, line, "day", &rec[0])?;
        let id: i64 = parse_field(path, line, "cell_id", &rec[1])?;
        let x: f64 = parse_field(path, line, "x_km", &rec[2])?;
        let y: f64 = parse_field(path, line, "y_km", &rec[3])?;
        let coeffs = (4..4 + stride)
            .map(|i| {
                let v: f64 = parse_field(path, line, &header[i], &rec[i])?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_error(path, line, format!("{} is not finite", header[i])))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let c = match cell_index.entry(id) {
            Entry::Occupied(e) => {
                let c = *e.get();
                if cells[c].x_km != x || cells[c].y_km != y {
                    return Err(parse_error(path, line, format!("cell {id} has inconsistent coordinates")));
                }
                c
            }
            Entry::Vacant(e) => {
                cells.push(Cell { id, x_km: x, y_km: y });
                *e.insert(cells.len() - 1)
            }
        };
        if rows.entry(day).or_default().insert(c, coeffs).is_some() {
            return Err(parse_error(path, line, format!("duplicate row for day {day}, cell {id}")));
        }
    }
    let mut packed = Vec::with_capacity(rows.len() * cells.len() * stride);
    for (day, mut by_cell) in rows.iter_mut().map(|(d, m)| (*d, std::mem::take(m))) {
        for (c, cell) in cells.iter().enumerate() {
            let v = by_cell
                .remove(&c)
                .ok_or_else(|| parse_error(path, last_line, format!("no row for day {day}, cell {}", cell.id)))?;
            packed.extend(v);
        }
    }
    if rows.is_empty() {
        return Err(parse_error(path, last_line, "sensitivity file has no rows"));
    }
    SensitivityField::from_packed(cells, rows.keys().copied().collect(), names, packed).map_err(|e| match e {
        Error::Input(msg) => parse_error(path, 0, msg),
        other => other,
    })
}

pub fn write_sensitivity(path: &Path, field: &SensitivityField) -> Result<()> {
    let mut out = CsvOut::new(sensitivity_header(field.input_names()))?;
    for (t, day) in field.days().iter().enumerate() {
        for (c, cell) in field.cells().iter().enumerate() {
            let mut row = vec![day.to_string(), cell.id.to_string(), cell.x_km.to_string(), cell.y_km.to_string()];
            row.extend(field.coefficients(t, c).iter().map(f64::to_string));
            out.row(row)?;
        }
    }
    out.finish(path)
}

/// Read daily monitor values. Sites keep the order of their first
/// appearance and must have the same coordinates and cell on every row.
pub fn load_monitors(path: &Path) -> Result<MonitorDataset> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(MONITOR_HEADER) {
        return Err(parse_error(path, 1, format!("expected header {}", MONITOR_HEADER.join(","))));
    }
    let mut sites: Vec<Site> = Vec::new();
    let mut site_index: HashMap<String, usize> = HashMap::new();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let day: i64 = parse_field(path, line, "day", &rec[0])?;
        let id = rec[1].to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty site_id"));
        }
        let x: f64 = parse_field(path, line, "x_km", &rec[2])?;
        let y: f64 = parse_field(path, line, "y_km", &rec[3])?;
        let cell_id: i64 = parse_field(path, line, "cell_id", &rec[4])?;
        let o3: f64 = parse_field(path, line, "o3_ppb", &rec[5])?;
        if !(o3 >= 0.0 && o3.is_finite()) {
            return Err(parse_error(path, line, format!("o3_ppb must be finite and non-negative, got {o3}")));
        }
        let site = match site_index.get(&id) {
            Some(&s) => {
                let known = &sites[s];
                if known.x_km != x || known.y_km != y || known.cell_id != cell_id {
                    return Err(parse_error(path, line, format!("site {id} changes location or cell")));
                }
                s
            }
            None => {
                site_index.insert(id.clone(), sites.len());
                sites.push(Site { id, x_km: x, y_km: y, cell_id });
                sites.len() - 1
            }
        };
        records.push(MonitorRecord { day, site, y: o3 });
    }
    MonitorDataset::new(sites, records).map_err(|e| match e {
        Error::Input(msg) => parse_error(path, 0, msg),
        other => other,
    })
}

pub fn write_monitors(path: &Path, data: &MonitorDataset) -> Result<()> {
    let mut out = CsvOut::new(MONITOR_HEADER)?;
    for r in data.records() {
        let s = &data.sites()[r.site];
        out.row([
            r.day.to_string(),
            s.id.clone(),
            s.x_km.to_string(),
            s.y_km.to_string(),
            s.cell_id.to_string(),
            r.y.to_string(),
        ])?;
    }
    out.finish(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn field() -> SensitivityField {
        let cells = vec![Cell { id: 7, x_km: 6.0, y_km: 6.0 }, Cell { id: 3, x_km: 18.0, y_km: 6.0 }];
        let names: Vec<String> = ["nox", "voc", "bio"].iter().map(|s| s.to_string()).collect();
        let stride = SensitivityField::stride_for(3);
        let coeffs: Vec<f64> = (0..2 * 2 * stride).map(|i| 0.1 * i as f64 + 1.0 / 3.0).collect();
        SensitivityField::from_packed(cells, vec![182, 183], names, coeffs).unwrap()
    }

    #[test]
    fn header_names_cross_terms_in_packed_order() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let h = sensitivity_header(&names);
        assert_eq!(&h[4..], ["c0", "s1_a", "s1_b", "s1_c", "s2_a_a", "s2_b_b", "s2_c_c", "s2_a_b", "s2_a_c", "s2_b_c"]);
    }

    #[test]
    fn sensitivity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let f = field();
        write_sensitivity(&p, &f).unwrap();
        assert_eq!(load_sensitivity(&p).unwrap(), f);
    }

    #[test]
    fn sensitivity_missing_row_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_sensitivity(&p, &field()).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let kept: Vec<&str> = text.lines().take(4).collect();
        fs::write(&p, kept.join("\n")).unwrap();
        let err = load_sensitivity(&p).unwrap_err();
        assert!(err.is_data_error(), "{err}");
    }

    #[test]
    fn sensitivity_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "day,cell,x_km,y_km,c0,s1_a,s2_a_a\n").unwrap();
        assert!(matches!(load_sensitivity(&p), Err(Error::Parse { line: 1, .. })));
    }

    const HEADER: &str = "day,site_id,x_km,y_km,cell_id,o3_ppb\n";

    #[test]
    fn empty_monitor_file_is_an_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, HEADER).unwrap();
        let d = load_monitors(&p).unwrap();
        assert!(d.is_empty() && d.sites().is_empty());
    }

    #[test]
    fn duplicate_monitor_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, format!("{HEADER}182,A,1,2,7,40\n183,A,1,2,7,41\n182,A,1,2,7,42\n")).unwrap();
        match load_monitors(&p) {
            Err(Error::DuplicateKey { day: 182, site }) => assert_eq!(site, "A"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, format!("{HEADER}182,A,1,2,7,40\n183,A,1,2,7,forty\n")).unwrap();
        match load_monitors(&p) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("o3_ppb"));
            }
            other => panic!("{other:?}"),
        }
        fs::write(&p, format!("{HEADER}182,A,1,2,7\n")).unwrap();
        assert!(matches!(load_monitors(&p), Err(Error::Parse { line: 2, .. })));
        fs::write(&p, format!("{HEADER}182,A,1,2,7,-1\n")).unwrap();
        assert!(matches!(load_monitors(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn moving_site_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, format!("{HEADER}182,A,1,2,7,40\n183,A,1,2,8,41\n")).unwrap();
        assert!(matches!(load_monitors(&p), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn unknown_cell_is_a_link_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, format!("{HEADER}182,A,1,2,99,40\n")).unwrap();
        let d = load_monitors(&p).unwrap();
        assert!(matches!(d.link(&field()), Err(Error::Link(_))));
    }

    #[test]
    fn monitor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let sites = vec![
            Site { id: "B,1".into(), x_km: 0.5, y_km: 1.0 / 3.0, cell_id: 3 },
            Site { id: "A".into(), x_km: 7.25, y_km: 2.0, cell_id: 7 },
        ];
        let recs = vec![
            MonitorRecord { day: 183, site: 1, y: 55.123456789 },
            MonitorRecord { day: 182, site: 0, y: 0.1 + 0.2 },
            MonitorRecord { day: 183, site: 0, y: 70.0 },
        ];
        let d = MonitorDataset::new(sites, recs).unwrap();
        write_monitors(&p, &d).unwrap();
        let back = load_monitors(&p).unwrap();
        // Sites are renumbered by first appearance.
        assert_eq!(back.sites()[0].id, "A");
        assert_eq!(back.len(), 3);
        for (a, b) in d.records().iter().zip(back.records()) {
            assert_eq!(a.day, b.day);
            assert_eq!(a.y, b.y);
            assert_eq!(d.sites()[a.site], back.sites()[b.site]);
        }
    }
}
