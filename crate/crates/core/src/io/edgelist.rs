//! Plain-text edge lists.
//!
//! ```text
//! # directed            (or `# undirected`, the default)
//! # view: wave1         (optional view label)
//! # nodes: a b c d      (optional; pins node order and isolated nodes)
//! a b
//! b,c
//! ```
//!
//! Blank lines and other `#` comments are ignored. Without a node list the
//! nodes are the endpoints in sorted label order. Duplicate edges collapse.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::network::{AdjacencyView, NodeSet};

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeListDocument {
    pub nodes: NodeSet,
    pub view: AdjacencyView,
}

pub fn parse_edge_list(text: &str) -> Result<EdgeListDocument> {
    let mut directed = false;
    let mut label = String::new();
    let mut declared: Option<Vec<String>> = None;
    let mut raw_edges: Vec<(usize, String, String)> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let body = comment.trim();
            match body {
                "directed" => directed = true,
                "undirected" => directed = false,
                _ => {
                    if let Some(rest) = body.strip_prefix("nodes:") {
                        declared = Some(
                            rest.split(|c: char| c.is_whitespace() || c == ',')
                                .filter(|s| !s.is_empty())
                                .map(str::to_string)
                                .collect(),
                        );
                    } else if let Some(rest) = body.strip_prefix("view:") {
                        label = rest.trim().to_string();
                    }
                }
            }
            continue;
        }
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if tokens.len() != 2 {
            return Err(Error::MalformedLine {
                line: lineno,
                text: line.to_string(),
            });
        }
        if tokens[0] == tokens[1] {
            return Err(Error::SelfLoop {
                line: lineno,
                node: tokens[0].to_string(),
            });
        }
        raw_edges.push((lineno, tokens[0].to_string(), tokens[1].to_string()));
    }

    let nodes = match declared {
        Some(list) => NodeSet::new(list)?,
        None => {
            let set: BTreeSet<&str> = raw_edges
                .iter()
                .flat_map(|(_, a, b)| [a.as_str(), b.as_str()])
                .collect();
            NodeSet::new(set)?
        }
    };
    let mut edges = Vec::with_capacity(raw_edges.len());
    for (lineno, a, b) in &raw_edges {
        let lookup = |node: &str| {
            nodes.index_of(node).ok_or_else(|| Error::UnknownNode {
                line: *lineno,
                node: node.to_string(),
            })
        };
        edges.push((lookup(a)?, lookup(b)?));
    }
    let view = AdjacencyView::from_edges(nodes.len(), directed, edges, label)?;
    Ok(EdgeListDocument { nodes, view })
}

/// Serializes a view so that [`parse_edge_list`] reproduces the same node
/// order and edge set. Unobserved dyads are not representable and are
/// written as absent.
pub fn write_edge_list(nodes: &NodeSet, view: &AdjacencyView) -> String {
    let mut out = String::new();
    out.push_str(if view.is_directed() {
        "# directed\n"
    } else {
        "# undirected\n"
    });
    if !view.label().is_empty() {
        out.push_str(&format!("# view: {}\n", view.label()));
    }
    out.push_str("# nodes: ");
    out.push_str(&nodes.labels().join(" "));
    out.push('\n');
    for (i, j) in view.edges() {
        out.push_str(nodes.label(i));
        out.push(' ');
        out.push_str(nodes.label(j));
        out.push('\n');
    }
    out
}
