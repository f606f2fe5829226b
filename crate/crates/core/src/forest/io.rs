//! Line-oriented text format for ensembles.
//!
//! ```text
//! ensemble <trees> <leaf_dim> <features>
//! offset <r_1> ... <r_K>
//! sigma_lambda <v>
//! alpha <v>
//! tree_prior <gamma> <beta> <max_depth|none>
//! split_probs <s_1> ... <s_P>
//! <tree 1>
//! ...
//! end
//! ```
//!
//! Each tree line lists nodes in preorder: `[j,c]` for a split on feature
//! j at cut c, `{v_1,...,v_K}` for a leaf. Floats use the shortest
//! representation that round-trips.

use std::io::Write;

use super::prior::TreePrior;
use super::tree::{Node, Tree};
use super::Ensemble;
use crate::error::{Error, Result};

fn join(v: &[f64], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn tree_to_line(tree: &Tree) -> String {
    tree.preorder()
        .into_iter()
        .map(|i| match *tree.node(i) {
            Node::Split { feature, cut, .. } => format!("[{feature},{cut}]"),
            _ => format!("{{{}}}", join(tree.leaf_value(i), ",")),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_ensemble<W: Write>(e: &Ensemble, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "ensemble {} {} {}", e.trees.len(), e.leaf_dim(), e.num_features())?;
    writeln!(out, "offset {}", join(&e.offset, " "))?;
    writeln!(out, "sigma_lambda {}", e.sigma_lambda)?;
    writeln!(out, "alpha {}", e.alpha)?;
    let md = e.tree_prior.max_depth.map_or("none".to_string(), |d| d.to_string());
    writeln!(out, "tree_prior {} {} {}", e.tree_prior.gamma, e.tree_prior.beta, md)?;
    writeln!(out, "split_probs {}", join(&e.split_probs, " "))?;
    for t in &e.trees {
        writeln!(out, "{}", tree_to_line(t))?;
    }
    writeln!(out, "end")
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.trim().parse().map_err(|_| perr(line, format!("bad number `{tok}`")))
}

fn keyed<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (no, l) = lines.next().ok_or_else(|| perr(0, format!("unexpected end of input, expected `{key}`")))?;
    let mut toks = l.split_whitespace();
    if toks.next() != Some(key) {
        return Err(perr(no, format!("expected `{key}`")));
    }
    Ok((no, toks.collect()))
}

pub fn parse_tree(line: &str, leaf_dim: usize, num_features: usize, no: usize) -> Result<Tree> {
    let mut items = Vec::new();
    for tok in line.split_whitespace() {
        if let Some(body) = tok.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            let (j, c) = body.split_once(',').ok_or_else(|| perr(no, format!("bad split `{tok}`")))?;
            let j: usize = num(j, no)?;
            if j >= num_features {
                return Err(perr(no, format!("split feature {j} out of range")));
            }
            items.push((Some((j, num(c, no)?)), Vec::new()));
        } else if let Some(body) = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            let v = body.split(',').map(|x| num(x, no)).collect::<Result<Vec<f64>>>()?;
            if v.len() != leaf_dim {
                return Err(perr(no, format!("leaf has {} values, expected {leaf_dim}", v.len())));
            }
            items.push((None, v));
        } else {
            return Err(perr(no, format!("unrecognized token `{tok}`")));
        }
    }
    Tree::from_preorder(leaf_dim, &items).ok_or_else(|| perr(no, "malformed preorder tree"))
}

/// Reads every ensemble block in `text`.
pub fn read_ensembles(text: &str) -> Result<Vec<Ensemble>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut out = Vec::new();
    while let Some((no, head)) = lines.next() {
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "ensemble" {
            return Err(perr(no, "expected `ensemble <trees> <leaf_dim> <features>`"));
        }
        let (t, k, p): (usize, usize, usize) = (num(toks[1], no)?, num(toks[2], no)?, num(toks[3], no)?);
        let (no, v) = keyed(&mut lines, "offset")?;
        let offset = v.iter().map(|x| num(x, no)).collect::<Result<Vec<f64>>>()?;
        if offset.len() != k {
            return Err(perr(no, format!("expected {k} offset values")));
        }
        let (no, v) = keyed(&mut lines, "sigma_lambda")?;
        let sigma_lambda = num(v.first().copied().unwrap_or(""), no)?;
        let (no, v) = keyed(&mut lines, "alpha")?;
        let alpha = num(v.first().copied().unwrap_or(""), no)?;
        let (no, v) = keyed(&mut lines, "tree_prior")?;
        if v.len() != 3 {
            return Err(perr(no, "tree_prior needs gamma, beta and max depth"));
        }
        let max_depth = if v[2] == "none" { None } else { Some(num(v[2], no)?) };
        let tree_prior = TreePrior { gamma: num(v[0], no)?, beta: num(v[1], no)?, max_depth };
        let (no, v) = keyed(&mut lines, "split_probs")?;
        let split_probs = v.iter().map(|x| num(x, no)).collect::<Result<Vec<f64>>>()?;
        if split_probs.len() != p {
            return Err(perr(no, format!("expected {p} split probabilities")));
        }
        let mut trees = Vec::with_capacity(t);
        for _ in 0..t {
            let (no, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of input inside ensemble"))?;
            trees.push(parse_tree(l, k, p, no)?);
        }
        match lines.next() {
            Some((_, "end")) => {}
            Some((no, _)) => return Err(perr(no, "expected `end`")),
            None => return Err(perr(0, "missing `end`")),
        }
        out.push(Ensemble { offset, trees, split_probs, sigma_lambda, alpha, tree_prior });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut e = Ensemble::new(3, 2, 4, 0.1 / 3.0, TreePrior { max_depth: Some(4), ..TreePrior::default() });
        let (l, r) = e.trees[1].grow(0, 3, 0.1 + 0.2);
        e.trees[1].leaf_value_mut(l).copy_from_slice(&[1e-300, -2.5]);
        let (a, _) = e.trees[1].grow(r, 0, -7.0);
        e.trees[1].leaf_value_mut(a).copy_from_slice(&[std::f64::consts::PI, 1.0 / 3.0]);
        e.split_probs = vec![0.1, 0.2, 0.3, 0.4];
        e.offset = vec![0.5, -1.25];
        let mut buf = Vec::new();
        write_ensemble(&e, &mut buf).unwrap();
        write_ensemble(&e, &mut buf).unwrap();
        let back = read_ensembles(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, vec![e.clone(), e]);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "ensemble 1 1 1\noffset 0\nsigma_lambda 0.1\nalpha 1\ntree_prior 0.95 2 none\nsplit_probs 1\n[0,0.5] {1}\nend\n";
        match read_ensembles(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_ensembles(&text.replace("[0,0.5] {1}", "[0,0.5] {1} {2}")).is_ok());
    }
}
