use super::engine::{Simulator, Tables};
use super::{ProtocolConfig, ProtocolError, Result};
use crate::rng::{with_pool, CounterRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Pump,
    Read,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub trial: u64,
    /// 1 or 2.
    pub detector: u8,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMeta {
    pub n_trials: u64,
    pub seed: u64,
    pub config: ProtocolConfig,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickLog {
    pub meta: CampaignMeta,
    pub records: Vec<ClickRecord>,
}

const CHUNK: u64 = 1 << 16;

/// Per-trial sampler: one draw picks the signal pattern, four more the noise clicks.
struct Sampler {
    cum: [f64; 16],
    q: [f64; 4],
}

impl Sampler {
    fn new(t: &Tables) -> Self {
        let mut cum = [0.0; 16];
        let mut acc = 0.0;
        for o in 0..16 {
            acc += t.signal[o & 3][o >> 2];
            cum[o] = acc;
        }
        // absorb rounding so the last outcome closes the interval
        let total = acc;
        cum.iter_mut().for_each(|c| *c /= total);
        Self { cum, q: [t.noise.pump[0], t.noise.pump[1], t.noise.read[0], t.noise.read[1]] }
    }

    #[inline]
    fn draw(&self, seed: u64, trial: u64) -> u8 {
        let mut rng = CounterRng::new(seed, trial);
        let u = rng.uniform();
        let mut s = 15;
        for (o, &c) in self.cum.iter().enumerate() {
            if u < c {
                s = o;
                break;
            }
        }
        let mut bits = s as u8;
        for k in 0..4 {
            if rng.uniform() < self.q[k] {
                bits |= 1 << k;
            }
        }
        bits
    }
}

fn push_records(out: &mut Vec<ClickRecord>, trial: u64, bits: u8) {
    const MAP: [(Window, u8); 4] = [(Window::Pump, 1), (Window::Pump, 2), (Window::Read, 1), (Window::Read, 2)];
    for (k, &(window, detector)) in MAP.iter().enumerate() {
        if bits >> k & 1 == 1 {
            out.push(ClickRecord { trial, detector, window });
        }
    }
}

fn chunks(n: u64) -> Vec<(u64, u64)> {
    (0..n.div_ceil(CHUNK)).map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n))).collect()
}

/// Samples `n` trials from exact tables. Identical output for any worker count.
pub fn sample_log(tables: &Tables, cfg: &ProtocolConfig, n: u64, seed: u64) -> ClickLog {
    let s = Sampler::new(tables);
    let parts: Vec<Vec<ClickRecord>> = with_pool(|| {
        chunks(n)
            .into_par_iter()
            .map(|(a, b)| {
                let mut v = Vec::new();
                for t in a..b {
                    let bits = s.draw(seed, t);
                    if bits != 0 {
                        push_records(&mut v, t, bits);
                    }
                }
                v
            })
            .collect()
    });
    ClickLog {
        meta: CampaignMeta { n_trials: n, seed, config: *cfg, code_version: env!("CARGO_PKG_VERSION").to_string() },
        records: parts.into_iter().flatten().collect(),
    }
}

/// Outcome histogram of the same draws `sample_log` makes, without materializing the log.
pub fn sample_histogram(tables: &Tables, n: u64, seed: u64) -> [u64; 16] {
    let s = Sampler::new(tables);
    let parts: Vec<[u64; 16]> = with_pool(|| {
        chunks(n)
            .into_par_iter()
            .map(|(a, b)| {
                let mut h = [0u64; 16];
                for t in a..b {
                    h[s.draw(seed, t) as usize] += 1;
                }
                h
            })
            .collect()
    });
    let mut h = [0u64; 16];
    for p in parts {
        for k in 0..16 {
            h[k] += p[k];
        }
    }
    h
}

pub fn run_campaign(cfg: &ProtocolConfig, n: u64, seed: u64) -> Result<ClickLog> {
    if n == 0 {
        return Err(ProtocolError::Config("campaign needs at least one trial".into()));
    }
    let sim = Simulator::new(cfg)?;
    let t = sim.tables()?;
    Ok(sample_log(&t, cfg, n, seed))
}

#[derive(Serialize, Deserialize)]
struct Row {
    trial: u64,
    detector: u8,
    window: Window,
}

impl ClickLog {
    /// Checks ordering (trials non-decreasing, pump before read, detector 1 before 2) and ranges.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let key = |r: &ClickRecord| (r.trial, r.window, r.detector);
        for (k, r) in self.records.iter().enumerate() {
            if !(r.detector == 1 || r.detector == 2) {
                return Err(format!("record {k}: detector must be 1 or 2, got {}", r.detector));
            }
            if r.trial >= self.meta.n_trials {
                return Err(format!("record {k}: trial {} beyond N = {}", r.trial, self.meta.n_trials));
            }
            if k > 0 && key(&self.records[k - 1]) >= key(r) {
                return Err(format!("record {k}: out of order or duplicated"));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record(["trial", "detector", "window"])?;
        for r in &self.records {
            wr.serialize(Row { trial: r.trial, detector: r.detector, window: r.window })?;
        }
        wr.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("utf8")
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata serializes")
    }

    /// Rebuilds a log from its CSV body and sidecar metadata.
    pub fn from_parts(csv_text: &str, meta_json: &str) -> std::result::Result<Self, String> {
        let meta: CampaignMeta = serde_json::from_str(meta_json).map_err(|e| format!("metadata: {e}"))?;
        let mut rd = csv::Reader::from_reader(csv_text.as_bytes());
        let headers = rd.headers().map_err(|e| e.to_string())?.clone();
        if headers.iter().collect::<Vec<_>>() != ["trial", "detector", "window"] {
            return Err(format!("expected header trial,detector,window, got {headers:?}"));
        }
        let records = rd
            .deserialize::<Row>()
            .map(|r| r.map(|r| ClickRecord { trial: r.trial, detector: r.detector, window: r.window }).map_err(|e| e.to_string()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let log = Self { meta, records };
        log.validate()?;
        Ok(log)
    }
}
