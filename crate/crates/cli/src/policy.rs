//! `--policy` specs for `arena run`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use anyhow::{bail, Context, Result};
use kkut_core::arena::{FirstValidPolicy, Policy, RandomValidPolicy, ScriptedPolicy};
use kkut_core::rand_chacha::ChaCha8Rng;
use kkut_core::{ChainState, Lexicon, TabularPolicy, Word};
use serde::{Deserialize, Serialize};

pub const POLICY_HELP: &str = "random | first | scripted:W1,W2,... | tabular:<policy.json> | external:<shell command>";

pub fn parse_policy(spec: &str) -> Result<Box<dyn Policy>> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match kind {
        "random" => Box::new(RandomValidPolicy),
        "first" => Box::new(FirstValidPolicy),
        "scripted" => {
            let moves = arg
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| Word::new(s.trim()).with_context(|| format!("scripted move {s:?}")))
                .collect::<Result<Vec<_>>>()?;
            Box::new(ScriptedPolicy::new(moves))
        }
        "tabular" => {
            let text = fs::read_to_string(arg).with_context(|| format!("reading policy {arg}"))?;
            let policy: TabularPolicy = serde_json::from_str(&text).with_context(|| format!("parsing policy {arg}"))?;
            Box::new(policy)
        }
        "external" if !arg.is_empty() => Box::new(ExternalPolicy::spawn(arg)?),
        _ => bail!("unknown policy {spec:?}; expected {POLICY_HELP}"),
    })
}

#[derive(Serialize)]
struct MoveRequest<'a> {
    chain: &'a [Word],
}

#[derive(Deserialize)]
struct MoveReply {
    word: String,
}

/// A child process answering one move per line: it receives
/// `{"chain":[...]}` and replies with `{"word":"..."}` or a bare word.
pub struct ExternalPolicy {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalPolicy {
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .with_context(|| format!("starting external policy {command:?}"))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalPolicy { child, stdin, stdout })
    }

    fn ask(&mut self, state: &ChainState) -> std::io::Result<String> {
        let line = serde_json::to_string(&MoveRequest { chain: state.words() }).expect("request serializes");
        writeln!(self.stdin, "{line}")?;
        self.stdin.flush()?;
        let mut reply = String::new();
        self.stdout.read_line(&mut reply)?;
        Ok(reply)
    }
}

impl Policy for ExternalPolicy {
    fn next_word(&mut self, _lex: &Lexicon, state: &ChainState, _rng: &mut ChaCha8Rng) -> Option<Word> {
        let reply = self.ask(state).ok()?;
        let reply = reply.trim();
        let text = serde_json::from_str::<MoveReply>(reply).map(|r| r.word).unwrap_or_else(|_| reply.to_string());
        Word::new(text.trim()).ok()
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
