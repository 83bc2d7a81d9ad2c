//! Trace records and their two serializations. The text form has one line
//! per step, `{index:04} {thread} {kind} {payload} #{pool hash}`, framed by
//! `#` header and footer lines; the JSON form carries every field.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSnapshot {
    pub completion: Vec<String>,
    pub regular: Vec<String>,
    pub deferred: Vec<String>,
    pub in_flight: Vec<String>,
}

impl PoolSnapshot {
    /// First 8 bytes of the SHA-256 of the JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("snapshot serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// One applied choice. `config`, `pool`, `rtc` and `stable` describe the
/// state after the step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub index: usize,
    pub thread: String,
    pub kind: String,
    pub payload: String,
    pub pool_hash: String,
    pub rtc: bool,
    pub stable: bool,
    pub output: Option<String>,
    pub discarded: Option<String>,
    pub config: String,
    pub pool: PoolSnapshot,
}

impl TraceRecord {
    /// The `thread kind payload` key a scripted strategy matches on.
    pub fn script_entry(&self) -> String {
        format!("{} {} {}", self.thread, self.kind, self.payload)
    }

    pub fn line(&self) -> String {
        format!("{:04} {} {} {} #{}", self.index, self.thread, self.kind, self.payload, self.pool_hash)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    /// No choice left and the scenario fully injected.
    Terminal,
    /// No choice left inside an RTC step or with injections outstanding.
    Deadlock,
    BudgetExceeded,
    /// A scripted strategy ran out of entries while choices remained.
    StrategyExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub model: String,
    pub strategy: String,
    pub max_steps: usize,
    pub records: Vec<TraceRecord>,
    pub outcome: Outcome,
}

impl Trace {
    /// Signals sent to the environment, in order.
    pub fn outputs(&self) -> Vec<String> {
        self.records.iter().filter_map(|r| r.output.clone()).collect()
    }

    pub fn script(&self) -> Vec<String> {
        self.records.iter().map(TraceRecord::script_entry).collect()
    }

    /// Configurations at stable points with empty pools, consecutive
    /// repeats collapsed.
    pub fn stable_configs(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in self.records.iter().filter(|r| r.stable) {
            if out.last() != Some(&r.config) {
                out.push(r.config.clone());
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# model {} strategy {} max-steps {}", self.model, self.strategy, self.max_steps);
        for r in &self.records {
            s.push_str(&r.line());
            s.push('\n');
        }
        let _ = writeln!(s, "# outcome {:?} steps {}", self.outcome, self.records.len());
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Trace, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Column view: each RTC step's records grouped under the configuration
    /// and pool it leaves behind.
    pub fn timeline(&self) -> String {
        let mut s = String::new();
        let mut rtc_no = 0usize;
        let mut in_rtc = true;
        s.push_str("== initial RTC ==\n");
        for r in &self.records {
            if r.rtc && !in_rtc {
                rtc_no += 1;
                let _ = writeln!(s, "== RTC {rtc_no} ==");
                in_rtc = true;
            }
            let out = r.output.as_deref().map(|o| format!("  => {o}")).unwrap_or_default();
            let _ = writeln!(s, "  {:04} {:<24} {:<22} {}{out}", r.index, r.thread, r.kind, r.payload);
            if in_rtc && !r.rtc {
                in_rtc = false;
                let _ = writeln!(
                    s,
                    "-- {} {} | pool [{}] deferred [{}] in-flight [{}]",
                    if r.stable { "stable" } else { "idle" },
                    r.config,
                    r.pool.completion.iter().chain(&r.pool.regular).cloned().collect::<Vec<_>>().join(", "),
                    r.pool.deferred.join(", "),
                    r.pool.in_flight.join(", ")
                );
            }
        }
        let _ = writeln!(s, "outcome: {:?}", self.outcome);
        s
    }
}
