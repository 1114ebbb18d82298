//! TU benchmark plain-text format (`DS_A.txt`, `DS_graph_indicator.txt`,
//! `DS_graph_labels.txt`, `DS_node_labels.txt`, 1-based ids).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, FeatureKind, Graph};
use crate::error::{Error, Result};

fn tu_path(root: &Path, name: &str, suffix: &str) -> PathBuf {
    root.join(format!("{name}_{suffix}.txt"))
}

/// Reads a file of comma-separated integers, one record per non-blank line.
/// Returns `(1-based line number, values)` pairs.
fn read_records(path: &Path, width: usize) -> Result<Vec<(usize, Vec<i64>)>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<i64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected an integer, found {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected {width} value(s), found {}", values.len()),
            });
        }
        out.push((i + 1, values));
    }
    Ok(out)
}

/// Maps arbitrary raw labels onto `0..n` in first-appearance order.
fn remap(raw: impl Iterator<Item = i64>) -> (Vec<usize>, Vec<i64>) {
    let mut index: HashMap<i64, usize> = HashMap::new();
    let mut order = Vec::new();
    let mapped = raw
        .map(|r| {
            *index.entry(r).or_insert_with(|| {
                order.push(r);
                order.len() - 1
            })
        })
        .collect();
    (mapped, order)
}

/// Parses `root/{name}_*.txt`. Undirected edges listed in both directions
/// collapse to one unordered pair; node ids are rebased to 0 per graph and
/// labels are remapped to contiguous indices. Edge label/attribute files are
/// ignored. Features are left empty; see [`super::one_hot_features`].
pub fn parse_tu_dataset(root: impl AsRef<Path>, name: &str) -> Result<Dataset> {
    let root = root.as_ref();
    let a_path = tu_path(root, name, "A");
    let ind_path = tu_path(root, name, "graph_indicator");
    let gl_path = tu_path(root, name, "graph_labels");
    let nl_path = tu_path(root, name, "node_labels");
    for p in [&a_path, &ind_path, &gl_path, &nl_path] {
        if !p.is_file() {
            return Err(Error::MissingFile(p.clone()));
        }
    }

    let graph_labels = read_records(&gl_path, 1)?;
    let num_graphs = graph_labels.len();
    let (class_of, raw_class_labels) = remap(graph_labels.iter().map(|(_, v)| v[0]));

    let indicator = read_records(&ind_path, 1)?;
    let n = indicator.len();
    // global node -> (graph, local index)
    let mut owner = Vec::with_capacity(n);
    let mut local = Vec::with_capacity(n);
    let mut counts = vec![0usize; num_graphs];
    for (line, v) in &indicator {
        let gid = v[0];
        if gid < 1 || gid as usize > num_graphs {
            return Err(Error::Parse {
                path: ind_path.clone(),
                line: *line,
                msg: format!("graph id {gid} outside 1..={num_graphs}"),
            });
        }
        let g = gid as usize - 1;
        owner.push(g);
        local.push(counts[g]);
        counts[g] += 1;
    }
    if let Some(g) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Parse {
            path: ind_path.clone(),
            line: 0,
            msg: format!("graph {} has no nodes", g + 1),
        });
    }

    let node_records = read_records(&nl_path, 1)?;
    if node_records.len() != n {
        return Err(Error::Parse {
            path: nl_path.clone(),
            line: node_records.last().map_or(0, |r| r.0),
            msg: format!("{} node labels for {n} nodes", node_records.len()),
        });
    }
    let (node_label_of, raw_node_labels) = remap(node_records.iter().map(|(_, v)| v[0]));

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (line, v) in read_records(&a_path, 2)? {
        let mut ends = [0usize; 2];
        for (slot, &id) in ends.iter_mut().zip(&v) {
            if id < 1 || id as usize > n {
                return Err(Error::Parse {
                    path: a_path.clone(),
                    line,
                    msg: format!("node id {id} outside 1..={n}"),
                });
            }
            *slot = id as usize - 1;
        }
        let [s, d] = ends;
        if owner[s] != owner[d] {
            return Err(Error::CrossGraphEdge {
                src: s + 1,
                dst: d + 1,
                src_graph: owner[s] + 1,
                dst_graph: owner[d] + 1,
            });
        }
        edges[owner[s]].push((local[s], local[d]));
    }

    let mut node_labels: Vec<Vec<usize>> =
        counts.iter().map(|&c| Vec::with_capacity(c)).collect();
    for (v, &g) in owner.iter().enumerate() {
        node_labels[g].push(node_label_of[v]);
    }

    let graphs = edges
        .into_iter()
        .zip(node_labels)
        .zip(counts)
        .zip(class_of)
        .map(|(((e, labels), count), class)| Graph::new(count, e, labels, class))
        .collect();

    Ok(Dataset {
        name: name.to_string(),
        graphs,
        num_classes: raw_class_labels.len(),
        num_node_labels: raw_node_labels.len(),
        feature_kind: FeatureKind::None,
        raw_class_labels,
        raw_node_labels,
    })
}

/// Writes `ds` in TU format under `dir` using the dataset's raw label
/// values. Each non-loop edge is written in both directions.
pub fn write_tu_dataset(ds: &Dataset, dir: impl AsRef<Path>, name: &str) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (mut a, mut ind, mut gl, mut nl) = (String::new(), String::new(), String::new(), String::new());
    let mut offset = 0;
    for (gi, g) in ds.graphs.iter().enumerate() {
        let _ = writeln!(gl, "{}", ds.raw_class_labels[g.label]);
        for &label in &g.node_labels {
            let _ = writeln!(ind, "{}", gi + 1);
            let _ = writeln!(nl, "{}", ds.raw_node_labels[label]);
        }
        for &(u, v) in &g.edges {
            let _ = writeln!(a, "{}, {}", offset + u + 1, offset + v + 1);
            if u != v {
                let _ = writeln!(a, "{}, {}", offset + v + 1, offset + u + 1);
            }
        }
        offset += g.node_count;
    }
    for (suffix, body) in [
        ("A", a),
        ("graph_indicator", ind),
        ("graph_labels", gl),
        ("node_labels", nl),
    ] {
        let p = tu_path(dir, name, suffix);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, a: &str, ind: &str, gl: &str, nl: &str) {
        for (s, body) in [("A", a), ("graph_indicator", ind), ("graph_labels", gl), ("node_labels", nl)] {
            fs::write(tu_path(dir, name, s), body).unwrap();
        }
    }

    /// Graph 1: triangle on nodes 1..3. Graph 2: single edge 4-5.
    /// Edges listed in both directions as TU files do.
    pub(crate) fn two_graph_fixture(dir: &Path) {
        write(
            dir,
            "FIX",
            "1, 2\n2, 1\n2, 3\n3, 2\n3, 1\n1, 3\n4, 5\n5, 4\n",
            "1\n1\n1\n2\n2\n",
            "-1\n1\n",
            "5\n3\n5\n0\n3\n",
        );
    }

    #[test]
    fn parses_hand_written_fixture() {
        let dir = tempfile::tempdir().unwrap();
        two_graph_fixture(dir.path());
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();
        assert_eq!(ds.len(), 2);
        let counts: Vec<_> = ds.graphs.iter().map(|g| g.node_count).collect();
        let edges: Vec<_> = ds.graphs.iter().map(|g| g.edges.len()).collect();
        assert_eq!(counts, vec![3, 2]);
        assert_eq!(edges, vec![3, 1]);
        assert_eq!(ds.graphs[1].edges, vec![(0, 1)]);
        // -1 first, so it becomes class 0
        assert_eq!(ds.raw_class_labels, vec![-1, 1]);
        assert_eq!(ds.labels(), vec![0, 1]);
        assert_eq!(ds.raw_node_labels, vec![5, 3, 0]);
        assert_eq!(ds.graphs[0].node_labels, vec![0, 1, 0]);
        assert_eq!(ds.graphs[1].node_labels, vec![2, 1]);
        assert_eq!(ds.num_node_labels, 3);
    }

    #[test]
    fn empty_directory_is_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = parse_tu_dataset(dir.path(), "MUTAG").unwrap_err();
        assert!(matches!(err, Error::MissingFile(ref p) if p.ends_with("MUTAG_A.txt")), "{err}");
    }

    #[test]
    fn cross_graph_edge_is_structural_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "X", "1, 2\n2, 3\n", "1\n1\n2\n", "0\n1\n", "0\n0\n0\n");
        let err = parse_tu_dataset(dir.path(), "X").unwrap_err();
        assert!(matches!(err, Error::CrossGraphEdge { src: 2, dst: 3, .. }), "{err}");
    }

    #[test]
    fn bad_token_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "X", "1, 2\n2, x\n", "1\n1\n", "0\n", "0\n0\n");
        let err = parse_tu_dataset(dir.path(), "X").unwrap_err();
        match err {
            Error::Parse { line, ref path, .. } => {
                assert_eq!(line, 2);
                assert!(path.ends_with("X_A.txt"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn self_loop_kept_once() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "L", "1, 1\n1, 2\n2, 1\n", "1\n1\n", "3\n", "0\n1\n");
        let ds = parse_tu_dataset(dir.path(), "L").unwrap();
        assert_eq!(ds.graphs[0].edges, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        two_graph_fixture(dir.path());
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();
        let out = tempfile::tempdir().unwrap();
        write_tu_dataset(&ds, out.path(), "FIX").unwrap();
        let again = parse_tu_dataset(out.path(), "FIX").unwrap();
        assert_eq!(ds, again);
    }
}
