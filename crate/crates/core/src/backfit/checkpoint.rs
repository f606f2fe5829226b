//! Sampler checkpoints: the ensemble block followed by `key value...` lines.
//!
//! ```text
//! <ensemble block>
//! seed <u64>
//! rng_word_pos <u128>
//! sweeps <n>
//! phi <v>
//! kappa <v>
//! proposed <grow> <prune> <change>
//! accepted <grow> <prune> <change>
//! fallback_leaves <n>
//! degenerate_dispersion <n>
//! xi <v_1> ... <v_N>
//! fit <v_1> ... <v_{N·K}>
//! ```

use std::collections::HashMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SamplerState;
use crate::error::{Error, Result};
use crate::forest::{read_ensembles, write_ensemble};
use crate::summaries::ChainDiagnostics;

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_checkpoint<W: Write>(state: &SamplerState, out: &mut W) -> std::io::Result<()> {
    write_ensemble(&state.ensemble, out)?;
    let d = &state.diagnostics;
    writeln!(out, "seed {}", state.seed)?;
    writeln!(out, "rng_word_pos {}", state.rng.get_word_pos())?;
    writeln!(out, "sweeps {}", state.sweeps)?;
    writeln!(out, "phi {}", state.phi)?;
    writeln!(out, "kappa {}", state.kappa)?;
    writeln!(out, "proposed {}", join(&d.proposed))?;
    writeln!(out, "accepted {}", join(&d.accepted))?;
    writeln!(out, "fallback_leaves {}", d.fallback_leaves)?;
    writeln!(out, "degenerate_dispersion {}", d.degenerate_dispersion)?;
    writeln!(out, "xi {}", join(&state.xi))?;
    writeln!(out, "fit {}", join(&state.fit))
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn read_checkpoint(text: &str) -> Result<SamplerState> {
    let end = text
        .lines()
        .position(|l| l.trim() == "end")
        .ok_or_else(|| bad(0, "checkpoint has no ensemble block"))?;
    let lines: Vec<&str> = text.lines().collect();
    let mut ensembles = read_ensembles(&lines[..=end].join("\n"))?;
    if ensembles.len() != 1 {
        return Err(bad(1, "checkpoint must hold exactly one ensemble"));
    }
    let ensemble = ensembles.remove(0);
    let mut kv: HashMap<&str, (usize, Vec<&str>)> = HashMap::new();
    for (i, l) in lines.iter().enumerate().skip(end + 1) {
        let mut toks = l.split_whitespace();
        if let Some(key) = toks.next() {
            kv.insert(key, (i + 1, toks.collect()));
        }
    }
    fn get<'a>(kv: &'a HashMap<&str, (usize, Vec<&str>)>, key: &str) -> Result<&'a (usize, Vec<&'a str>)> {
        kv.get(key).ok_or_else(|| bad(0, format!("checkpoint is missing `{key}`")))
    }
    fn many<T: std::str::FromStr>(kv: &HashMap<&str, (usize, Vec<&str>)>, key: &str) -> Result<Vec<T>> {
        let (no, toks) = get(kv, key)?;
        toks.iter()
            .map(|t| t.parse().map_err(|_| bad(*no, format!("bad value `{t}` for `{key}`"))))
            .collect()
    }
    fn one<T: std::str::FromStr>(kv: &HashMap<&str, (usize, Vec<&str>)>, key: &str) -> Result<T> {
        let (no, _) = get(kv, key)?;
        let mut v = many::<T>(kv, key)?;
        if v.len() != 1 {
            return Err(bad(*no, format!("`{key}` takes one value")));
        }
        Ok(v.remove(0))
    }
    let triple = |key: &str| -> Result<[usize; 3]> {
        let v: Vec<usize> = many(&kv, key)?;
        v.try_into().map_err(|_| bad(get(&kv, key).map(|x| x.0).unwrap_or(0), format!("`{key}` takes three counts")))
    };
    let seed: u64 = one(&kv, "seed")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(one::<u128>(&kv, "rng_word_pos")?);
    let fit: Vec<f64> = many(&kv, "fit")?;
    if fit.len() % ensemble.leaf_dim().max(1) != 0 {
        return Err(bad(get(&kv, "fit")?.0, "fit length is not a multiple of the leaf dimension"));
    }
    Ok(SamplerState {
        ensemble,
        fit,
        phi: one(&kv, "phi")?,
        kappa: one(&kv, "kappa")?,
        xi: many(&kv, "xi")?,
        rng,
        seed,
        sweeps: one(&kv, "sweeps")?,
        diagnostics: ChainDiagnostics {
            proposed: triple("proposed")?,
            accepted: triple("accepted")?,
            fallback_leaves: one(&kv, "fallback_leaves")?,
            degenerate_dispersion: one(&kv, "degenerate_dispersion")?,
        },
    })
}
