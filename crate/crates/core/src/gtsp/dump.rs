//! GTSPLIB-style text dump, for cross-checking against external solvers.
//!
//! ```text
//! NAME : example
//! TYPE : GTSP
//! DIMENSION : 3
//! GTSP_SETS : 2
//! EDGE_WEIGHT_TYPE : EXPLICIT
//! EDGE_WEIGHT_FORMAT : FULL_MATRIX
//! NODE_COORD_SECTION
//! 1 0 0 0
//! ...
//! EDGE_WEIGHT_SECTION
//! 0 4 5
//! ...
//! GTSP_SET_SECTION
//! 1 1 2 -1
//! 2 3 -1
//! EOF
//! ```
//!
//! Node and set ids are 1-based. `NODE_COORD_SECTION` is optional; without
//! it every matrix entry is kept as an explicit cost. Without
//! `EDGE_WEIGHT_SECTION` costs are Euclidean over the coordinates.

use crate::geom::Vec3;

use super::{GtspError, GtspInstance};

pub fn write_dump(inst: &GtspInstance, name: &str) -> String {
    let n = inst.vertex_count();
    let mut out = String::new();
    out.push_str(&format!("NAME : {name}\nTYPE : GTSP\nDIMENSION : {n}\n"));
    out.push_str(&format!("GTSP_SETS : {}\n", inst.cluster_count()));
    out.push_str("EDGE_WEIGHT_TYPE : EXPLICIT\nEDGE_WEIGHT_FORMAT : FULL_MATRIX\n");
    out.push_str("NODE_COORD_SECTION\n");
    for (i, v) in inst.vertices().iter().enumerate() {
        out.push_str(&format!("{} {}\n", i + 1, v.position));
    }
    out.push_str("EDGE_WEIGHT_SECTION\n");
    for a in 0..n {
        let row: Vec<String> = (0..n).map(|b| inst.cost(a, b).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.push_str("GTSP_SET_SECTION\n");
    for (c, ids) in inst.clusters().iter().enumerate() {
        let ids: Vec<String> = ids.iter().map(|i| (i + 1).to_string()).collect();
        out.push_str(&format!("{} {} -1\n", c + 1, ids.join(" ")));
    }
    out.push_str("EOF\n");
    out
}

#[derive(PartialEq)]
enum Section {
    Header,
    Coords,
    Weights,
    Sets,
}

pub fn parse_dump(text: &str) -> Result<GtspInstance, GtspError> {
    let mut dim: Option<usize> = None;
    let mut coords: Vec<Option<Vec3>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut set_tokens: Vec<(usize, i64)> = Vec::new();
    let mut section = Section::Header;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let err = |msg: String| GtspError::Parse { line, msg };
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let kw = t.trim_end_matches(':').trim();
        match kw {
            "NODE_COORD_SECTION" => {
                section = Section::Coords;
                continue;
            }
            "EDGE_WEIGHT_SECTION" => {
                section = Section::Weights;
                continue;
            }
            "GTSP_SET_SECTION" => {
                section = Section::Sets;
                continue;
            }
            "EOF" => break,
            _ => {}
        }
        if let Some((key, val)) = t.split_once(':') {
            if key.trim() == "DIMENSION" {
                let d = val.trim().parse().map_err(|_| err("bad DIMENSION".into()))?;
                dim = Some(d);
                coords = vec![None; d];
            }
            section = Section::Header;
            continue;
        }
        match section {
            Section::Header => return Err(err(format!("unexpected line `{t}`"))),
            Section::Coords => {
                let d = dim.ok_or_else(|| err("NODE_COORD_SECTION before DIMENSION".into()))?;
                let v: Vec<f64> = t
                    .split_whitespace()
                    .map(|x| x.parse::<f64>().map_err(|_| err(format!("bad number `{x}`"))))
                    .collect::<Result<_, _>>()?;
                if !(3..=4).contains(&v.len()) {
                    return Err(err("coordinate lines need `id x y [z]`".into()));
                }
                let id = v[0] as usize;
                if id == 0 || id > d {
                    return Err(err(format!("node id {id} out of range")));
                }
                coords[id - 1] = Some(Vec3::new(v[1], v[2], v.get(3).copied().unwrap_or(0.0)));
            }
            Section::Weights => {
                for x in t.split_whitespace() {
                    weights.push(x.parse().map_err(|_| err(format!("bad weight `{x}`")))?);
                }
            }
            Section::Sets => {
                for x in t.split_whitespace() {
                    set_tokens.push((line, x.parse().map_err(|_| err(format!("bad set token `{x}`")))?));
                }
            }
        }
    }

    let n = dim.ok_or(GtspError::Parse {
        line: 0,
        msg: "missing DIMENSION".into(),
    })?;
    let have_coords = coords.iter().any(Option::is_some);
    if have_coords && coords.iter().any(Option::is_none) {
        return Err(GtspError::Parse {
            line: 0,
            msg: "NODE_COORD_SECTION incomplete".into(),
        });
    }
    if !weights.is_empty() && weights.len() != n * n {
        return Err(GtspError::Parse {
            line: 0,
            msg: format!("expected {} weights, got {}", n * n, weights.len()),
        });
    }
    if weights.is_empty() && !have_coords {
        return Err(GtspError::Parse {
            line: 0,
            msg: "no coordinates and no weights".into(),
        });
    }

    // sets: `id v1 v2 ... -1`
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut owner = vec![None; n];
    let mut it = set_tokens.into_iter();
    while let Some((line, _set_id)) = it.next() {
        let mut members = Vec::new();
        loop {
            match it.next() {
                Some((_, -1)) => break,
                Some((l, v)) if v >= 1 && (v as usize) <= n => {
                    let id = v as usize - 1;
                    if owner[id].replace(sets.len()).is_some() {
                        return Err(GtspError::Parse {
                            line: l,
                            msg: format!("node {v} in two sets"),
                        });
                    }
                    members.push(id);
                }
                Some((l, v)) => {
                    return Err(GtspError::Parse {
                        line: l,
                        msg: format!("node {v} out of range"),
                    })
                }
                None => {
                    return Err(GtspError::Parse {
                        line,
                        msg: "set not terminated by -1".into(),
                    })
                }
            }
        }
        sets.push(members);
    }
    if let Some(v) = owner.iter().position(Option::is_none) {
        return Err(GtspError::Parse {
            line: 0,
            msg: format!("node {} belongs to no set", v + 1),
        });
    }

    // vertex ids are renumbered cluster by cluster; keep the mapping
    let mut inst = GtspInstance::new();
    let mut new_id = vec![0usize; n];
    for members in &sets {
        let base = inst.vertex_count();
        for (k, &m) in members.iter().enumerate() {
            new_id[m] = base + k;
        }
        inst.push_cluster(members.iter().map(|&m| coords[m].unwrap_or(Vec3::ZERO)));
    }
    inst.validate()?;
    if !weights.is_empty() {
        for a in 0..n {
            for b in a + 1..n {
                let (w, w_rev) = (weights[a * n + b], weights[b * n + a]);
                if w != w_rev {
                    return Err(GtspError::Parse {
                        line: 0,
                        msg: format!("asymmetric weight between nodes {} and {}", a + 1, b + 1),
                    });
                }
                let (x, y) = (new_id[a], new_id[b]);
                if w != inst.euclidean(x, y) {
                    inst.update_cost(x, y, w)?;
                }
            }
        }
    }
    Ok(inst)
}
