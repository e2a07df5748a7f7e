//! Plain-text policy checkpoints.
//!
//! The format is line-oriented and human-inspectable:
//!
//! ```text
//! policy v1
//! steps <environment steps at save time>
//! config <hyperparameters as one-line json>
//! net actor <layer count>
//! layer <in> <out>
//! <in lines of out weights>      (row i = weights out of input i)
//! <one line of out biases>
//! … further layers, then the remaining networks …
//! ```
//!
//! Networks appear in a fixed order (actor, q1, q2, then their targets).
//! Floats are written with the shortest representation that parses back
//! to the identical bits, so save → load is exact. Optimizer state is
//! deliberately not persisted: a reloaded policy is for evaluation or a
//! fresh fine-tune, and Adam moments rebuild within a few steps.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use super::net::{Linear, Mlp};
use super::{Learner, LearnerConfig};
use crate::error::LearnError;

const HEADER: &str = "policy v1";
const NET_ORDER: [&str; 6] = ["actor", "q1", "q2", "actor_t", "q1_t", "q2_t"];

/// Serialize a learner (and the environment-step counter that drives its
/// exploration schedule) to checkpoint text.
pub fn write_checkpoint(learner: &Learner, steps: u64) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").expect("string io");
    writeln!(out, "steps {steps}").expect("string io");
    let cfg = serde_json::to_string(&learner.cfg).expect("config serializes");
    writeln!(out, "config {cfg}").expect("string io");
    let nets = [
        &learner.actor,
        &learner.q1,
        &learner.q2,
        &learner.actor_t,
        &learner.q1_t,
        &learner.q2_t,
    ];
    for (name, net) in NET_ORDER.iter().zip(nets) {
        writeln!(out, "net {name} {}", net.layers.len()).expect("string io");
        for layer in &net.layers {
            writeln!(out, "layer {} {}", layer.w.nrows(), layer.w.ncols()).expect("string io");
            for row in layer.w.rows() {
                push_floats(&mut out, row.iter());
            }
            push_floats(&mut out, layer.b.iter());
        }
    }
    out
}

fn push_floats<'a>(out: &mut String, vals: impl Iterator<Item = &'a f32>) {
    let mut first = true;
    for v in vals {
        debug_assert!(v.is_finite(), "checkpoints must not contain non-finite weights");
        if !first {
            out.push(' ');
        }
        write!(out, "{v:?}").expect("string io");
        first = false;
    }
    out.push('\n');
}

/// Rebuild a learner from checkpoint text. Returns the learner and the
/// environment-step counter recorded at save time.
pub fn parse_checkpoint(text: &str) -> Result<(Learner, u64), LearnError> {
    let mut reader = Reader { lines: text.lines(), line: 0 };

    let (line, header) = reader.next_line()?;
    if header != HEADER {
        return Err(fail(line, format!("expected header `{HEADER}`, found `{header}`")));
    }
    let (line, steps_line) = reader.next_line()?;
    let steps: u64 = steps_line
        .strip_prefix("steps ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fail(line, "expected `steps <count>`".into()))?;
    let (line, cfg_line) = reader.next_line()?;
    let cfg_json = cfg_line
        .strip_prefix("config ")
        .ok_or_else(|| fail(line, "expected `config <json>`".into()))?;
    let cfg: LearnerConfig = serde_json::from_str(cfg_json)
        .map_err(|e| fail(line, format!("unreadable config: {e}")))?;

    let mut nets = Vec::with_capacity(NET_ORDER.len());
    for want in NET_ORDER {
        nets.push(parse_net(&mut reader, want)?);
    }
    if let Some(extra) = reader.lines.next() {
        if !extra.trim().is_empty() {
            return Err(fail(reader.line + 1, "trailing content after the last network".into()));
        }
    }

    let obs_dim = nets[0].input_dim();
    let mut learner = Learner::new(obs_dim, cfg, 0)?;
    let slots: [&mut Mlp<f32>; 6] = [
        &mut learner.actor,
        &mut learner.q1,
        &mut learner.q2,
        &mut learner.actor_t,
        &mut learner.q1_t,
        &mut learner.q2_t,
    ];
    for ((slot, parsed), name) in slots.into_iter().zip(nets).zip(NET_ORDER) {
        if dims(slot) != dims(&parsed) {
            return Err(fail(
                0,
                format!(
                    "net {name} has shape {:?} but the stored config implies {:?}",
                    dims(&parsed),
                    dims(slot)
                ),
            ));
        }
        *slot = parsed;
    }
    Ok((learner, steps))
}

struct Reader<'a> {
    lines: std::str::Lines<'a>,
    /// 1-based number of the line most recently returned.
    line: usize,
}

impl<'a> Reader<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str), LearnError> {
        self.line += 1;
        match self.lines.next() {
            Some(l) => Ok((self.line, l)),
            None => Err(fail(self.line, "unexpected end of checkpoint".into())),
        }
    }
}

fn fail(line: usize, msg: String) -> LearnError {
    LearnError::CheckpointParse { line, msg }
}

fn dims(net: &Mlp<f32>) -> Vec<(usize, usize)> {
    net.layers.iter().map(|l| (l.w.nrows(), l.w.ncols())).collect()
}

fn parse_net(reader: &mut Reader, want: &str) -> Result<Mlp<f32>, LearnError> {
    let (line, decl) = reader.next_line()?;
    let mut parts = decl.split_whitespace();
    let (tag, name, count) = (parts.next(), parts.next(), parts.next());
    if tag != Some("net") || parts.next().is_some() {
        return Err(fail(line, format!("expected `net {want} <layers>`, found `{decl}`")));
    }
    if name != Some(want) {
        return Err(fail(
            line,
            format!("networks are stored in a fixed order; expected `{want}`, found `{decl}`"),
        ));
    }
    let n_layers: usize = count
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| fail(line, format!("bad layer count in `{decl}`")))?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        layers.push(parse_layer(reader)?);
    }
    Ok(Mlp { layers })
}

fn parse_layer(reader: &mut Reader) -> Result<Linear<f32>, LearnError> {
    let (line, decl) = reader.next_line()?;
    let mut parts = decl.split_whitespace();
    let shape = (parts.next(), parts.next(), parts.next(), parts.next());
    let (n_in, n_out) = match shape {
        (Some("layer"), Some(i), Some(o), None) => match (i.parse(), o.parse()) {
            (Ok(i), Ok(o)) => (i, o),
            _ => return Err(fail(line, format!("bad layer shape in `{decl}`"))),
        },
        _ => return Err(fail(line, format!("expected `layer <in> <out>`, found `{decl}`"))),
    };
    let mut w = Array2::zeros((n_in, n_out));
    for r in 0..n_in {
        let row = parse_float_line(reader, n_out)?;
        for (c, v) in row.into_iter().enumerate() {
            w[(r, c)] = v;
        }
    }
    let b = Array1::from_vec(parse_float_line(reader, n_out)?);
    Ok(Linear { w, b })
}

fn parse_float_line(reader: &mut Reader, expect: usize) -> Result<Vec<f32>, LearnError> {
    let (line, text) = reader.next_line()?;
    let mut vals = Vec::with_capacity(expect);
    for tok in text.split_whitespace() {
        let v: f32 = tok
            .parse()
            .map_err(|_| fail(line, format!("`{tok}` is not a number")))?;
        if !v.is_finite() {
            return Err(fail(line, format!("non-finite weight `{tok}`")));
        }
        vals.push(v);
    }
    if vals.len() != expect {
        return Err(fail(line, format!("expected {expect} numbers, found {}", vals.len())));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::super::{ReplayBuffer, Transition};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// A learner whose biases and optimizer-touched weights are no longer
    /// at their initial values, so round-trip tests exercise real state.
    fn trained_learner() -> Learner {
        let cfg = LearnerConfig {
            hidden: 6,
            batch_size: 4,
            buffer_capacity: 16,
            ..Default::default()
        };
        let mut l = Learner::new(5, cfg, 21).unwrap();
        let mut buf = ReplayBuffer::new(16);
        for i in 0..8 {
            buf.push(Transition {
                obs: vec![0.1 * i as f32; 5],
                action: vec![0.3, -0.1, 0.2, -0.4],
                reward: 0.25 * i as f32,
                next_obs: vec![0.1 * (i + 1) as f32; 5],
                done: i == 7,
                stage_end: i == 3,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..3 {
            l.update(&buf, &mut rng).unwrap();
        }
        l
    }

    #[test]
    fn every_parameter_survives_a_save_load_cycle_bitwise() {
        let l = trained_learner();
        let text = write_checkpoint(&l, 31_415);
        let (back, steps) = parse_checkpoint(&text).unwrap();
        assert_eq!(steps, 31_415);
        assert_eq!(back.cfg, l.cfg);
        assert_eq!(back.obs_dim, l.obs_dim);
        assert_eq!(back.actor.flatten(), l.actor.flatten());
        assert_eq!(back.q1.flatten(), l.q1.flatten());
        assert_eq!(back.q2.flatten(), l.q2.flatten());
        assert_eq!(back.actor_t.flatten(), l.actor_t.flatten());
        assert_eq!(back.q1_t.flatten(), l.q1_t.flatten());
        assert_eq!(back.q2_t.flatten(), l.q2_t.flatten());
    }

    #[test]
    fn a_reloaded_policy_acts_identically() {
        let l = trained_learner();
        let (back, _) = parse_checkpoint(&write_checkpoint(&l, 0)).unwrap();
        let obs = [0.4f32, -0.2, 0.9, 0.0, -0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = l.act(&obs, 0, false, &mut rng).unwrap();
        let b = back.act(&obs, 0, false, &mut rng).unwrap();
        assert_eq!(a, b);
        let qa = l.q_values(&obs, &a).unwrap();
        let qb = back.q_values(&obs, &a).unwrap();
        assert_eq!(qa, qb);
    }

    #[test]
    fn a_wrong_header_is_reported_on_line_one() {
        let l = trained_learner();
        let mut text = write_checkpoint(&l, 0);
        text = text.replacen("policy v1", "policy v2", 1);
        match parse_checkpoint(&text) {
            Err(LearnError::CheckpointParse { line: 1, msg }) => {
                assert!(msg.contains("policy v1"), "{msg}");
            }
            other => panic!("expected a line-1 parse error, got {other:?}"),
        }
    }

    #[test]
    fn a_corrupted_weight_is_reported_with_its_line_number() {
        let l = trained_learner();
        let text = write_checkpoint(&l, 0);
        let mut lines: Vec<&str> = text.lines().collect();
        // The line right after the first `layer` declaration is a weight row.
        let row_idx = lines.iter().position(|l| l.starts_with("layer")).unwrap() + 1;
        lines[row_idx] = "0.25 banana 0.5";
        let corrupted = lines.join("\n");
        match parse_checkpoint(&corrupted) {
            Err(LearnError::CheckpointParse { line, msg }) => {
                assert_eq!(line, row_idx + 1, "line numbers are 1-based");
                assert!(msg.contains("banana"), "{msg}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn a_truncated_checkpoint_is_rejected_not_half_loaded() {
        let l = trained_learner();
        let text = write_checkpoint(&l, 0);
        let keep = text.lines().count() / 2;
        let truncated: String =
            text.lines().take(keep).collect::<Vec<_>>().join("\n");
        match parse_checkpoint(&truncated) {
            Err(LearnError::CheckpointParse { msg, .. }) => {
                assert!(
                    msg.contains("end of checkpoint") || msg.contains("expected"),
                    "{msg}"
                );
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn networks_out_of_order_are_rejected() {
        let l = trained_learner();
        let text = write_checkpoint(&l, 0);
        let swapped = text.replacen("net actor 3", "net q1 3", 1);
        match parse_checkpoint(&swapped) {
            Err(LearnError::CheckpointParse { msg, .. }) => {
                assert!(msg.contains("fixed order"), "{msg}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn a_row_with_missing_values_is_rejected() {
        let l = trained_learner();
        let text = write_checkpoint(&l, 0);
        let mut lines: Vec<&str> = text.lines().collect();
        let row_idx = lines.iter().position(|l| l.starts_with("layer")).unwrap() + 1;
        lines[row_idx] = "0.25";
        match parse_checkpoint(&lines.join("\n")) {
            Err(LearnError::CheckpointParse { line, msg }) => {
                assert_eq!(line, row_idx + 1);
                assert!(msg.contains("expected"), "{msg}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }
}
