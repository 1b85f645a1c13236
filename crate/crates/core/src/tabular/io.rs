//! Plain-text MDP fixtures.
//!
//! ```text
//! mdp <n_states> <n_actions> <gamma>
//! <s> <a> <s'> <prob>      # one line per nonzero entry
//! rho0 <p_0> ... <p_{n-1}>
//! ```
//!
//! Blank lines and `#` comments are ignored. Floats are written with the
//! shortest round-trip representation so a write/parse cycle is exact.

use std::fmt::Write as _;

use super::{FiniteMdp, TabularError};

pub fn write_mdp(mdp: &FiniteMdp) -> String {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut out = String::new();
    let _ = writeln!(out, "mdp {} {} {}", n, na, mdp.gamma());
    for s in 0..n {
        for a in 0..na {
            for (s_next, &p) in mdp.next_distribution(s, a).iter().enumerate() {
                if p != 0.0 {
                    let _ = writeln!(out, "{s} {a} {s_next} {p}");
                }
            }
        }
    }
    out.push_str("rho0");
    for p in mdp.rho0() {
        let _ = write!(out, " {p}");
    }
    out.push('\n');
    out
}

fn parse_field<T: std::str::FromStr>(token: Option<&str>, line: usize, what: &str) -> Result<T, TabularError> {
    let token = token.ok_or_else(|| TabularError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    token.parse().map_err(|_| TabularError::Parse {
        line,
        message: format!("bad {what} `{token}`"),
    })
}

pub fn parse_mdp(text: &str) -> Result<FiniteMdp, TabularError> {
    let mut header: Option<(usize, usize, f64)> = None;
    let mut transition = Vec::new();
    let mut rho0: Option<Vec<f64>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let first = tokens.next().unwrap_or_default();
        match (first, header) {
            ("mdp", None) => {
                let n: usize = parse_field(tokens.next(), line, "n_states")?;
                let na: usize = parse_field(tokens.next(), line, "n_actions")?;
                let gamma: f64 = parse_field(tokens.next(), line, "gamma")?;
                transition = vec![0.0; n * na * n];
                header = Some((n, na, gamma));
            }
            ("mdp", Some(_)) => {
                return Err(TabularError::Parse {
                    line,
                    message: "duplicate header".into(),
                })
            }
            (_, None) => {
                return Err(TabularError::Parse {
                    line,
                    message: "expected `mdp` header first".into(),
                })
            }
            ("rho0", Some((n, _, _))) => {
                let values = tokens
                    .map(|t| parse_field::<f64>(Some(t), line, "rho0 entry"))
                    .collect::<Result<Vec<_>, _>>()?;
                if values.len() != n {
                    return Err(TabularError::Parse {
                        line,
                        message: format!("rho0 has {} entries, expected {n}", values.len()),
                    });
                }
                rho0 = Some(values);
            }
            (_, Some((n, na, _))) => {
                let s: usize = parse_field(Some(first), line, "state")?;
                let a: usize = parse_field(tokens.next(), line, "action")?;
                let s_next: usize = parse_field(tokens.next(), line, "next state")?;
                let p: f64 = parse_field(tokens.next(), line, "probability")?;
                if s >= n || a >= na || s_next >= n {
                    return Err(TabularError::Parse {
                        line,
                        message: format!("index ({s}, {a}, {s_next}) out of range"),
                    });
                }
                transition[(s * na + a) * n + s_next] = p;
            }
        }
    }

    let (n, na, gamma) = header.ok_or(TabularError::Parse {
        line: 0,
        message: "missing `mdp` header".into(),
    })?;
    let rho0 = rho0.ok_or(TabularError::Parse {
        line: 0,
        message: "missing `rho0` line".into(),
    })?;
    FiniteMdp::new(n, na, transition, gamma, rho0)
}
