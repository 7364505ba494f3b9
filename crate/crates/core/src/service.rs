//! Line-oriented scoring protocol: one JSON request per line in, one JSON
//! response per line out, in order. Every request carries its full chain,
//! so no state is kept between lines.
//!
//! Request:  `{"chain":["가동력"],"candidate":"역량","scheme":"isr_forcing"}`
//! Response: `{"reward":2.0,"clause_a_i":0,"clause_a_ii":1,"clause_b":1,"repetition":false,"clause_d":0.0,"failure_mode":null,"valid":true}`
//! Error:    `{"error":"parse","line":3,"message":"..."}`

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, Word};
use crate::rules::{check_step, score_report, ChainState, FailureMode, FailurePriority, RewardScheme};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub chain: Vec<String>,
    pub candidate: String,
    /// Falls back to the service default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub reward: f64,
    pub clause_a_i: u8,
    pub clause_a_ii: u8,
    pub clause_b: u8,
    pub repetition: bool,
    pub clause_d: f64,
    pub failure_mode: Option<FailureMode>,
    pub valid: bool,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum RequestError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    InvalidWord(String),
    #[error("{0}")]
    Scheme(String),
    #[error("chain must contain at least one word")]
    EmptyChain,
}

impl RequestError {
    pub fn kind(&self) -> &'static str {
        match self {
            RequestError::Parse(_) => "parse",
            RequestError::InvalidWord(_) => "invalid_word",
            RequestError::Scheme(_) => "scheme",
            RequestError::EmptyChain => "empty_chain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
    pub line: usize,
    pub message: String,
}

/// Scores a chain/candidate pair with the default failure priority.
pub fn score_words(lex: &Lexicon, scheme: RewardScheme, chain: &[Word], candidate: &Word) -> Result<ScoreResponse, RequestError> {
    let state = ChainState::from_words(chain.iter().cloned());
    let prev = state.last_word().ok_or(RequestError::EmptyChain)?;
    let report = check_step(lex, prev, candidate, state.used());
    let b = score_report(scheme, &report);
    let failure_mode = FailurePriority::default().classify(&report);
    Ok(ScoreResponse {
        reward: b.total,
        clause_a_i: b.clause_a_i,
        clause_a_ii: b.clause_a_ii,
        clause_b: b.clause_b,
        repetition: b.repetition,
        clause_d: b.clause_d,
        failure_mode,
        valid: failure_mode.is_none(),
    })
}

pub fn score_request(lex: &Lexicon, default_scheme: RewardScheme, req: &ScoreRequest) -> Result<ScoreResponse, RequestError> {
    let scheme = match &req.scheme {
        None => default_scheme,
        Some(name) => name.parse().map_err(|e: crate::rules::UnknownScheme| RequestError::Scheme(e.to_string()))?,
    };
    let word = |s: &String| Word::new(s).map_err(|e| RequestError::InvalidWord(e.to_string()));
    let chain = req.chain.iter().map(word).collect::<Result<Vec<_>, _>>()?;
    if chain.is_empty() {
        return Err(RequestError::EmptyChain);
    }
    let candidate = word(&req.candidate)?;
    score_words(lex, scheme, &chain, &candidate)
}

/// Handles one request line; `Err` carries the serialized error object.
pub fn handle_line(lex: &Lexicon, default_scheme: RewardScheme, line: &str, line_no: usize) -> Result<String, String> {
    let result = serde_json::from_str::<ScoreRequest>(line)
        .map_err(|e| RequestError::Parse(e.to_string()))
        .and_then(|req| score_request(lex, default_scheme, &req));
    match result {
        Ok(resp) => Ok(serde_json::to_string(&resp).expect("response serializes")),
        Err(e) => {
            let err = ErrorResponse { error: e.kind().to_string(), line: line_no, message: e.to_string() };
            Err(serde_json::to_string(&err).expect("error serializes"))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub requests: usize,
    pub errors: usize,
}

/// Reads requests until EOF, writing one response line per request line
/// (blank lines included) and flushing after each.
pub fn serve_scores<R: BufRead, W: Write>(lex: &Lexicon, default_scheme: RewardScheme, input: R, mut output: W) -> io::Result<ServeStats> {
    let mut stats = ServeStats::default();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        stats.requests += 1;
        let out = handle_line(lex, default_scheme, line.trim_end_matches('\r'), idx + 1).unwrap_or_else(|e| {
            stats.errors += 1;
            e
        });
        output.write_all(out.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::from_strs(&["가동력", "역량", "사랑", "낭만"])
    }

    fn serve(input: &str) -> String {
        let mut out = Vec::new();
        serve_scores(&lex(), RewardScheme::IsrForcing, input.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn scores_isr_answer() {
        let out = serve("{\"chain\":[\"가동력\"],\"candidate\":\"역량\",\"scheme\":\"isr_forcing\"}\n");
        assert_eq!(
            out,
            "{\"reward\":2.0,\"clause_a_i\":0,\"clause_a_ii\":1,\"clause_b\":1,\"repetition\":false,\"clause_d\":0.0,\"failure_mode\":null,\"valid\":true}\n"
        );
    }

    #[test]
    fn repetition_response() {
        let out = serve("{\"chain\":[\"사랑\"],\"candidate\":\"사랑\",\"scheme\":\"baseline\"}\n");
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["reward"], -1.0);
        assert_eq!(v["failure_mode"], "c");
        assert_eq!(v["valid"], false);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let input = concat!(
            "{\"chain\":[\"사랑\"],\"candidate\":\"낭만\"}\n",
            "not json\n",
            "{\"chain\":[],\"candidate\":\"낭만\"}\n",
            "{\"chain\":[\"사랑\"],\"candidate\":\"nangman\"}\n",
            "{\"chain\":[\"사랑\"],\"candidate\":\"낭만\",\"scheme\":\"nope\"}\n",
            "\n",
        );
        let lines: Vec<serde_json::Value> = serve(input).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0]["valid"], true);
        assert_eq!((lines[1]["error"].as_str(), lines[1]["line"].as_u64()), (Some("parse"), Some(2)));
        assert_eq!(lines[2]["error"], "empty_chain");
        assert_eq!(lines[3]["error"], "invalid_word");
        assert_eq!(lines[4]["error"], "scheme");
        assert_eq!((lines[5]["error"].as_str(), lines[5]["line"].as_u64()), (Some("parse"), Some(6)));
    }

    #[test]
    fn request_without_scheme_uses_default() {
        let req = ScoreRequest { chain: vec!["가동력".into()], candidate: "역량".into(), scheme: None };
        assert_eq!(score_request(&lex(), RewardScheme::Baseline, &req).unwrap().reward, 0.0);
        assert_eq!(score_request(&lex(), RewardScheme::IsrForcing, &req).unwrap().reward, 2.0);
    }
}
