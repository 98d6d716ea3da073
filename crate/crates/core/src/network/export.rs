//! GraphML, DOT and edge-list writers.

use std::collections::BTreeSet;
use std::io::{self, Write};

use super::{Edge, TechNetwork};
use crate::numfmt::format_sig;

/// A network's vertices with a chosen edge set and optional annotations.
#[derive(Debug, Clone, Copy)]
pub struct GraphExport<'a> {
    pub network: &'a TechNetwork,
    pub edges: &'a [Edge],
    pub communities: Option<&'a [usize]>,
    pub overlay: Option<&'a BTreeSet<usize>>,
}

impl<'a> GraphExport<'a> {
    pub fn new(network: &'a TechNetwork, edges: &'a [Edge]) -> Self {
        GraphExport {
            network,
            edges,
            communities: None,
            overlay: None,
        }
    }

    pub fn with_communities(mut self, membership: &'a [usize]) -> Self {
        self.communities = Some(membership);
        self
    }

    pub fn with_overlay(mut self, highlighted: &'a BTreeSet<usize>) -> Self {
        self.overlay = Some(highlighted);
        self
    }

    fn flagged(&self, v: usize) -> bool {
        self.overlay.is_some_and(|o| o.contains(&v))
    }

    pub fn write_graphml<W: Write>(&self, mut w: W) -> io::Result<()> {
        let net = self.network;
        writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
        writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
        writeln!(w, r#"  <key id="code" for="node" attr.name="code" attr.type="string"/>"#)?;
        writeln!(w, r#"  <key id="size" for="node" attr.name="size" attr.type="long"/>"#)?;
        if self.communities.is_some() {
            writeln!(w, r#"  <key id="community" for="node" attr.name="community" attr.type="int"/>"#)?;
        }
        writeln!(w, r#"  <key id="overlay" for="node" attr.name="overlay" attr.type="boolean">"#)?;
        writeln!(w, "    <default>false</default>")?;
        writeln!(w, "  </key>")?;
        writeln!(w, r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#)?;
        writeln!(w, r#"  <graph id="technology-network" edgedefault="undirected">"#)?;
        for (v, code) in net.universe().codes().iter().enumerate() {
            writeln!(w, r#"    <node id="n{v}">"#)?;
            writeln!(w, r#"      <data key="code">{}</data>"#, xml_escape(code))?;
            writeln!(w, r#"      <data key="size">{}</data>"#, net.vertex_size()[v])?;
            if let Some(c) = self.communities {
                writeln!(w, r#"      <data key="community">{}</data>"#, c[v])?;
            }
            writeln!(w, r#"      <data key="overlay">{}</data>"#, self.flagged(v))?;
            writeln!(w, "    </node>")?;
        }
        for (k, e) in self.edges.iter().enumerate() {
            writeln!(
                w,
                r#"    <edge id="e{k}" source="n{}" target="n{}"><data key="weight">{}</data></edge>"#,
                e.source,
                e.target,
                format_sig(e.weight, 12)
            )?;
        }
        writeln!(w, "  </graph>")?;
        writeln!(w, "</graphml>")?;
        Ok(())
    }

    pub fn write_dot<W: Write>(&self, mut w: W) -> io::Result<()> {
        let net = self.network;
        let codes = net.universe().codes();
        writeln!(w, "graph technology_network {{")?;
        for (v, code) in codes.iter().enumerate() {
            write!(w, "  {} [size={}", dot_id(code), net.vertex_size()[v])?;
            if let Some(c) = self.communities {
                write!(w, ", community={}", c[v])?;
            }
            if self.flagged(v) {
                write!(w, ", overlay=true, style=filled, fillcolor=gold")?;
            }
            writeln!(w, "];")?;
        }
        for e in self.edges {
            writeln!(
                w,
                "  {} -- {} [weight={}];",
                dot_id(&codes[e.source]),
                dot_id(&codes[e.target]),
                format_sig(e.weight, 12)
            )?;
        }
        writeln!(w, "}}")?;
        Ok(())
    }

    /// `source,target,weight` rows keyed by class code.
    pub fn write_edge_list<W: Write>(&self, w: W) -> io::Result<()> {
        let codes = self.network.universe().codes();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["source", "target", "weight"])?;
        for e in self.edges {
            out.write_record([
                codes[e.source].as_str(),
                codes[e.target].as_str(),
                &format_sig(e.weight, 12),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
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

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}
