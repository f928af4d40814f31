//! Disparity-filter backbone of a susceptibility matrix.
//!
//! Entry `ρ_ij` becomes the directed edge `i → j` with weight `|ρ_ij|`; the
//! sign is kept as an attribute and the diagonal is ignored. For a node with
//! `k ≥ 2` nonzero links in a direction and strength `s`, the disparity of a
//! link of weight `w` is `α = (1 − w/s)^(k−1)`.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::iodata::{lookup, SectorGroup};
use crate::susceptibility::SusceptibilityMatrix;

/// Which node-side disparities can retain an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    /// Out-direction of the source or in-direction of the target.
    #[default]
    TwoSided,
    /// Out-direction of the source only.
    OutOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneNode {
    pub code: String,
    pub group: SectorGroup,
    /// Sum of `|ρ|` over retained incoming edges.
    pub incoming_weight: f64,
    pub response: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneEdge {
    pub from: usize,
    pub to: usize,
    /// Signed `ρ_ij`.
    pub weight: f64,
    pub sign: i8,
    pub alpha_out: Option<f64>,
    pub alpha_in: Option<f64>,
    /// Smallest disparity that applies under the chosen sidedness; 1 when no
    /// side has two or more links.
    pub alpha: f64,
    /// Kept because a relevant endpoint has a single link in that direction.
    pub preserved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGraph {
    pub nodes: Vec<BackboneNode>,
    pub edges: Vec<BackboneEdge>,
    pub p: f64,
    pub sidedness: Sidedness,
}

struct Side {
    degree: usize,
    strength: f64,
}

fn disparity(w: f64, side: &Side) -> Option<f64> {
    (side.degree >= 2).then(|| (1.0 - w / side.strength).max(0.0).powi(side.degree as i32 - 1))
}

pub fn disparity_filter(rho: &SusceptibilityMatrix, p: f64, sidedness: Sidedness) -> Result<BackboneGraph> {
    disparity_filter_matrix(&rho.values, &rho.sectors, p, sidedness)
}

pub fn disparity_filter_matrix(
    values: &DMatrix<f64>,
    sectors: &[String],
    p: f64,
    sidedness: Sidedness,
) -> Result<BackboneGraph> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidP(p));
    }
    let n = values.nrows();
    if values.ncols() != n || sectors.len() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{} with {} sector labels",
            values.nrows(),
            values.ncols(),
            sectors.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let link = |i: usize, j: usize| i != j && values[(i, j)] != 0.0;
    let out: Vec<Side> = (0..n)
        .map(|i| Side {
            degree: (0..n).filter(|j| link(i, *j)).count(),
            strength: (0..n).filter(|j| link(i, *j)).map(|j| values[(i, j)].abs()).sum(),
        })
        .collect();
    let inc: Vec<Side> = (0..n)
        .map(|j| Side {
            degree: (0..n).filter(|i| link(*i, j)).count(),
            strength: (0..n).filter(|i| link(*i, j)).map(|i| values[(i, j)].abs()).sum(),
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if !link(i, j) {
                continue;
            }
            let w = values[(i, j)].abs();
            let alpha_out = disparity(w, &out[i]);
            let alpha_in = disparity(w, &inc[j]);
            let (relevant, preserved) = match sidedness {
                Sidedness::TwoSided => (
                    [alpha_out, alpha_in],
                    out[i].degree == 1 || inc[j].degree == 1,
                ),
                Sidedness::OutOnly => ([alpha_out, None], out[i].degree == 1),
            };
            let alpha = relevant.iter().flatten().copied().fold(1.0f64, f64::min);
            let significant = relevant.iter().flatten().any(|a| *a < p);
            if significant || preserved {
                edges.push(BackboneEdge {
                    from: i,
                    to: j,
                    weight: values[(i, j)],
                    sign: if values[(i, j)] > 0.0 { 1 } else { -1 },
                    alpha_out,
                    alpha_in,
                    alpha,
                    preserved: preserved && !significant,
                });
            }
        }
    }
    edges.sort_by(|a, b| (&sectors[a.from], &sectors[a.to]).cmp(&(&sectors[b.from], &sectors[b.to])));

    let mut nodes: Vec<BackboneNode> = sectors
        .iter()
        .map(|code| BackboneNode {
            code: code.clone(),
            group: lookup(code).map_or(SectorGroup::Other, |s| s.2),
            incoming_weight: 0.0,
            response: None,
        })
        .collect();
    for e in &edges {
        nodes[e.to].incoming_weight += e.weight.abs();
    }
    Ok(BackboneGraph {
        nodes,
        edges,
        p,
        sidedness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeList,
    GraphMl,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" | "edgelist" | "edge-list" => Ok(GraphFormat::EdgeList),
            "graphml" | "xml" => Ok(GraphFormat::GraphMl),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

impl BackboneGraph {
    /// Attach per-node response values (for example `ΔY_k(t')` of a curve).
    pub fn with_responses(mut self, values: &[f64]) -> Result<Self> {
        if values.len() != self.nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} response values for {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        for (node, v) in self.nodes.iter_mut().zip(values) {
            node.response = Some(*v);
        }
        Ok(self)
    }

    pub fn export<W: Write>(&self, format: GraphFormat, w: W) -> Result<()> {
        match format {
            GraphFormat::EdgeList => self.write_edge_list(w),
            GraphFormat::GraphMl => self.write_graphml(w),
        }
    }

    /// `from,to,weight,sign,alpha,preserved_flag`, weights in shortest
    /// round-trip notation.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "from,to,weight,sign,alpha,preserved_flag")?;
        for e in &self.edges {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.nodes[e.from].code,
                self.nodes[e.to].code,
                e.weight,
                e.sign,
                e.alpha,
                u8::from(e.preserved)
            )?;
        }
        Ok(())
    }

    pub fn write_graphml<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        for (id, target, name, ty) in [
            ("d0", "node", "group", "string"),
            ("d1", "node", "incoming_weight", "double"),
            ("d2", "node", "response", "double"),
            ("d3", "edge", "weight", "double"),
            ("d4", "edge", "sign", "int"),
            ("d5", "edge", "alpha", "double"),
            ("d6", "edge", "preserved", "boolean"),
        ] {
            let _ = writeln!(
                s,
                "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>"
            );
        }
        let _ = writeln!(
            s,
            "  <graph id=\"backbone\" edgedefault=\"directed\">\n    <desc>disparity filter, p = {}</desc>",
            self.p
        );
        for node in &self.nodes {
            let _ = writeln!(s, "    <node id=\"{}\">", xml_escape(&node.code));
            let _ = writeln!(s, "      <data key=\"d0\">{}</data>", xml_escape(node.group.label()));
            let _ = writeln!(s, "      <data key=\"d1\">{}</data>", node.incoming_weight);
            if let Some(r) = node.response {
                let _ = writeln!(s, "      <data key=\"d2\">{r}</data>");
            }
            s.push_str("    </node>\n");
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "    <edge source=\"{}\" target=\"{}\">",
                xml_escape(&self.nodes[e.from].code),
                xml_escape(&self.nodes[e.to].code)
            );
            let _ = writeln!(s, "      <data key=\"d3\">{}</data>", e.weight);
            let _ = writeln!(s, "      <data key=\"d4\">{}</data>", e.sign);
            let _ = writeln!(s, "      <data key=\"d5\">{}</data>", e.alpha);
            let _ = writeln!(s, "      <data key=\"d6\">{}</data>", e.preserved);
            s.push_str("    </edge>\n");
        }
        s.push_str("  </graph>\n</graphml>\n");
        w.write_all(s.as_bytes())?;
        Ok(())
    }
}
