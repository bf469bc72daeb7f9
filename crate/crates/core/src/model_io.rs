//! Plain-text serialization of [`GraphicalModel`].
//!
//! Format (whitespace-separated, `#` starts a comment to end of line):
//!
//! ```text
//! GMODEL 1
//! nodes <m> labels <n>
//! unary <node> <v0> ... <v{n-1}>     # one line per node, any order
//! edges <E>
//! edge <i> <j>                       # canonical orientation i < j
//! <n*n reals, row-major>             # may span multiple lines
//! ...
//! ```
//!
//! All reals must be finite. [`write_model`] emits a canonical form (nodes
//! ascending, one matrix row per line) whose values round-trip exactly, so
//! `read . write` is the identity on models.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{Graph, GraphicalModel};

/// A token plus the 1-based line it came from.
struct Token {
    line: usize,
    text: String,
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn from_text(text: &str) -> Cursor {
        let mut tokens = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            for word in content.split_whitespace() {
                tokens.push(Token {
                    line,
                    text: word.to_string(),
                });
            }
        }
        Cursor { tokens, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.line)
    }

    fn next(&mut self, what: &str) -> Result<&Token> {
        let tok = self.tokens.get(self.pos).ok_or_else(|| {
            Error::parse(self.last_line(), format!("unexpected end of input, expected {what}"))
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        let tok = self.next(&format!("keyword '{kw}'"))?;
        if tok.text != kw {
            return Err(Error::parse(
                tok.line,
                format!("expected keyword '{kw}', found '{}'", tok.text),
            ));
        }
        Ok(())
    }

    fn usize(&mut self, what: &str) -> Result<(usize, usize)> {
        let tok = self.next(what)?;
        let line = tok.line;
        let value = tok.text.parse::<usize>().map_err(|_| {
            Error::parse(line, format!("expected {what}, found '{}'", tok.text))
        })?;
        Ok((value, line))
    }

    fn real(&mut self, what: &str) -> Result<f64> {
        let tok = self.next(what)?;
        let line = tok.line;
        let text = tok.text.clone();
        let value = text
            .parse::<f64>()
            .map_err(|_| Error::parse(line, format!("expected {what}, found '{text}'")))?;
        if !value.is_finite() {
            return Err(Error::parse(
                line,
                format!("non-finite value '{text}' in {what}"),
            ));
        }
        Ok(value)
    }

    fn at_end(&self) -> bool {
        self.pos == self.tokens.len()
    }
}

/// Parses a model from its text form.
pub fn parse_model(text: &str) -> Result<GraphicalModel> {
    let mut cur = Cursor::from_text(text);

    let magic = cur.next("header 'GMODEL 1'")?;
    if magic.text != "GMODEL" {
        return Err(Error::parse(
            magic.line,
            format!("expected header 'GMODEL', found '{}'", magic.text),
        ));
    }
    let (version, vline) = cur.usize("format version")?;
    if version != 1 {
        return Err(Error::parse(
            vline,
            format!("unsupported format version {version}, expected 1"),
        ));
    }

    cur.expect_keyword("nodes")?;
    let (num_nodes, nline) = cur.usize("node count")?;
    if num_nodes == 0 {
        return Err(Error::parse(nline, "node count must be positive"));
    }
    cur.expect_keyword("labels")?;
    let (num_labels, lline) = cur.usize("label count")?;
    if num_labels < 2 {
        return Err(Error::parse(
            lline,
            format!("label count must be at least 2, got {num_labels}"),
        ));
    }

    let mut unaries: Vec<Option<Vec<f64>>> = vec![None; num_nodes];
    for _ in 0..num_nodes {
        cur.expect_keyword("unary")?;
        let (node, uline) = cur.usize("node index")?;
        if node >= num_nodes {
            return Err(Error::parse(
                uline,
                format!("node index {node} out of range (nodes: {num_nodes})"),
            ));
        }
        if unaries[node].is_some() {
            return Err(Error::parse(
                uline,
                format!("duplicate unary line for node {node}"),
            ));
        }
        let mut u = Vec::with_capacity(num_labels);
        for _ in 0..num_labels {
            u.push(cur.real(&format!("unary cost of node {node}"))?);
        }
        unaries[node] = Some(u);
    }

    cur.expect_keyword("edges")?;
    let (num_edges, _) = cur.usize("edge count")?;

    let mut edges = Vec::with_capacity(num_edges);
    let mut pairwise = Vec::with_capacity(num_edges);
    for _ in 0..num_edges {
        cur.expect_keyword("edge")?;
        let (i, iline) = cur.usize("edge endpoint")?;
        let (j, jline) = cur.usize("edge endpoint")?;
        if i >= j {
            return Err(Error::parse(
                iline,
                format!("edge ({i}, {j}) must be written with i < j"),
            ));
        }
        if j >= num_nodes {
            return Err(Error::parse(
                jline,
                format!("edge ({i}, {j}) references node {j} but the model has {num_nodes} nodes"),
            ));
        }
        let mut t = Vec::with_capacity(num_labels * num_labels);
        for _ in 0..num_labels * num_labels {
            t.push(cur.real(&format!("cost matrix of edge ({i}, {j})"))?);
        }
        edges.push((i, j));
        pairwise.push(t);
    }

    if !cur.at_end() {
        let tok = cur.next("end of input")?;
        return Err(Error::parse(
            tok.line,
            format!("trailing content '{}' after the last edge block", tok.text),
        ));
    }

    let unaries: Vec<Vec<f64>> = unaries
        .into_iter()
        .map(|u| u.expect("every node seen exactly once"))
        .collect();
    let graph = Graph::new(num_nodes, edges)
        .map_err(|e| Error::parse(cur.last_line(), e.to_string()))?;
    GraphicalModel::new(graph, num_labels, unaries, pairwise)
}

/// Reads a model from any buffered reader.
pub fn read_model<R: BufRead>(mut reader: R) -> Result<GraphicalModel> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_model(&text)
}

/// Reads a model from a file path.
pub fn read_model_file(path: &std::path::Path) -> Result<GraphicalModel> {
    let file = std::fs::File::open(path)?;
    read_model(std::io::BufReader::new(file))
}

/// Canonical text form of a model. Values are printed with Rust's shortest
/// round-trip formatting, so parsing the output recovers them exactly.
pub fn model_to_string(model: &GraphicalModel) -> String {
    let mut out = String::new();
    out.push_str("GMODEL 1\n");
    out.push_str(&format!(
        "nodes {} labels {}\n",
        model.num_nodes(),
        model.num_labels()
    ));
    for i in 0..model.num_nodes() {
        out.push_str(&format!("unary {i}"));
        for v in model.unary(i) {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("edges {}\n", model.graph().num_edges()));
    let n = model.num_labels();
    for (e, &(i, j)) in model.graph().edges().iter().enumerate() {
        out.push_str(&format!("edge {i} {j}\n"));
        let t = model.pairwise(e);
        for k in 0..n {
            let row: Vec<String> = (0..n).map(|r| format!("{}", t[k * n + r])).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Writes the canonical text form to a writer.
pub fn write_model<W: Write>(model: &GraphicalModel, mut writer: W) -> Result<()> {
    writer.write_all(model_to_string(model).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{potts_matrix, triangle_graph};

    const SAMPLE: &str = "GMODEL 1
nodes 2 labels 2
unary 0 0 1
unary 1 1 0
edges 1
edge 0 1
0 1
1 0
";

    #[test]
    fn parses_a_minimal_model() {
        let m = parse_model(SAMPLE).unwrap();
        assert_eq!(m.num_nodes(), 2);
        assert_eq!(m.num_labels(), 2);
        assert_eq!(m.graph().edges(), &[(0, 1)]);
        assert_eq!(m.unary(0), &[0.0, 1.0]);
        assert_eq!(m.pairwise(0), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn accepts_comments_and_any_unary_order() {
        let text = "# a triangle\nGMODEL 1\nnodes 2 labels 2\nunary 1 1 0 # swapped\nunary 0 0 1\nedges 0\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.unary(0), &[0.0, 1.0]);
        assert_eq!(m.unary(1), &[1.0, 0.0]);
        assert_eq!(m.graph().num_edges(), 0);
    }

    #[test]
    fn rejects_duplicate_unary_with_line_number() {
        let text = "GMODEL 1\nnodes 2 labels 2\nunary 0 0 1\nunary 0 1 0\nedges 0\n";
        match parse_model(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_truncated_pairwise_block_naming_the_edge() {
        let text = "GMODEL 1\nnodes 2 labels 2\nunary 0 0 1\nunary 1 1 0\nedges 1\nedge 0 1\n0 1 1\n";
        match parse_model(text) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("edge (0, 1)"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_literals() {
        let text = "GMODEL 1\nnodes 2 labels 2\nunary 0 0 NaN\nunary 1 1 0\nedges 0\n";
        match parse_model(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("non-finite"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let inf = "GMODEL 1\nnodes 2 labels 2\nunary 0 0 inf\nunary 1 1 0\nedges 0\n";
        assert!(parse_model(inf).is_err());
    }

    #[test]
    fn rejects_wrong_orientation() {
        let text = "GMODEL 1\nnodes 2 labels 2\nunary 0 0 1\nunary 1 1 0\nedges 1\nedge 1 0\n0 1 1 0\n";
        match parse_model(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("i < j"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_trailing_content() {
        let text = format!("{SAMPLE}stray");
        assert!(matches!(parse_model(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn writer_reader_roundtrip_is_exact() {
        let model = GraphicalModel::new(
            triangle_graph(),
            2,
            vec![
                vec![-0.2261, 0.2261],
                vec![0.1f64.next_up(), -3.5e-17],
                vec![1234.5678, -0.000001],
            ],
            vec![
                vec![-0.9184, -1.6252, -1.8891, -0.9807],
                potts_matrix(2, 0.3),
                vec![1.2147, -1.5215, -0.3302, -0.0459],
            ],
        )
        .unwrap();
        let text = model_to_string(&model);
        let back = parse_model(&text).unwrap();
        assert_eq!(model, back);
        // Writing the parsed model reproduces the canonical text.
        assert_eq!(text, model_to_string(&back));
    }
}
