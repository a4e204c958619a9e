//! Synthetic flow records in NSL-KDD row layout.
//!
//! Used by the throughput benchmark and by end-to-end tests. Each category
//! has its own rough traffic profile (SYN floods with high connection counts,
//! low-volume scans, long interactive sessions, short login attempts) so the
//! layers have something learnable; the numbers are not NSL-KDD statistics.

use rand::Rng;

use crate::dataset::{Category, FlowRecord, Protocol, ATTRIBUTE_COUNT};
use crate::rng::{seeded, ModelRng};

fn other_fields(service: &str, flag: &str) -> Vec<String> {
    let mut v = Vec::with_capacity(ATTRIBUTE_COUNT - 6);
    v.push(service.to_string());
    v.push(flag.to_string());
    v.extend(std::iter::repeat_n("0".to_string(), ATTRIBUTE_COUNT - 8));
    v
}

fn log_uniform(rng: &mut ModelRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln_1p()..=hi.ln_1p()).exp() - 1.0).round()
}

fn int(rng: &mut ModelRng, lo: u32, hi: u32) -> f64 {
    rng.random_range(lo..=hi) as f64
}

/// One labeled record of the given category; `new` picks a test-only
/// attack name where one exists.
pub fn synthetic_record(rng: &mut ModelRng, category: Category, new: bool) -> FlowRecord {
    let pick = |rng: &mut ModelRng, names: &[&str]| names[rng.random_range(0..names.len())].to_string();
    let (protocol, duration, src, dst, count, srv, service, flag, label) = match category {
        Category::Normal => {
            let p = match rng.random_range(0..20) {
                0..=15 => Protocol::Tcp,
                16..=18 => Protocol::Udp,
                _ => Protocol::Icmp,
            };
            let duration = if rng.random_bool(0.85) { 0.0 } else { log_uniform(rng, 1.0, 5000.0) };
            (
                p,
                duration,
                log_uniform(rng, 40.0, 50_000.0),
                log_uniform(rng, 100.0, 200_000.0),
                int(rng, 1, 30),
                int(rng, 1, 40),
                "http",
                "SF",
                "normal".to_string(),
            )
        }
        Category::Dos => {
            if rng.random_bool(0.25) {
                (
                    Protocol::Icmp,
                    0.0,
                    int(rng, 520, 1480),
                    0.0,
                    int(rng, 300, 511),
                    int(rng, 300, 511),
                    "ecr_i",
                    "SF",
                    if new { "udpstorm".into() } else { "smurf".into() },
                )
            } else {
                (
                    Protocol::Tcp,
                    0.0,
                    int(rng, 0, 2),
                    0.0,
                    int(rng, 100, 511),
                    int(rng, 1, 25),
                    "private",
                    "S0",
                    if new { pick(rng, &["apache2", "processtable", "mailbomb"]) } else { pick(rng, &["neptune", "back", "teardrop"]) },
                )
            }
        }
        Category::Probe => (
            if rng.random_bool(0.5) { Protocol::Icmp } else { Protocol::Tcp },
            0.0,
            int(rng, 0, 20),
            int(rng, 0, 20),
            int(rng, 1, 6),
            int(rng, 1, 6),
            "eco_i",
            "REJ",
            if new { pick(rng, &["mscan", "saint"]) } else { pick(rng, &["satan", "ipsweep", "nmap", "portsweep"]) },
        ),
        Category::U2R => (
            Protocol::Tcp,
            log_uniform(rng, 20.0, 2000.0),
            log_uniform(rng, 1500.0, 8000.0),
            log_uniform(rng, 2000.0, 20_000.0),
            1.0,
            1.0,
            "telnet",
            "SF",
            if new { pick(rng, &["xterm", "ps", "sqlattack"]) } else { pick(rng, &["buffer_overflow", "rootkit"]) },
        ),
        Category::R2L => (
            Protocol::Tcp,
            int(rng, 0, 6),
            int(rng, 100, 400),
            int(rng, 0, 300),
            int(rng, 1, 3),
            int(rng, 1, 3),
            "ftp_data",
            "SF",
            if new { pick(rng, &["snmpguess", "named", "sendmail"]) } else { pick(rng, &["guess_passwd", "warezmaster"]) },
        ),
    };
    FlowRecord {
        duration,
        protocol,
        src_bytes: src,
        dst_bytes: dst,
        count,
        srv_count: srv,
        other: other_fields(service, flag),
        raw_label: Some(label),
        difficulty: Some(rng.random_range(0..=21)),
    }
}

/// Share of each category, in [`Category::ALL`] order.
pub const DEFAULT_MIX: [f64; 5] = [0.52, 0.30, 0.10, 0.02, 0.06];

/// `n` labeled records drawn with the given category mix.
/// `new_fraction` of the attacks carry test-only names.
pub fn synthetic_dataset(n: usize, mix: [f64; 5], new_fraction: f64, seed: u64) -> Vec<FlowRecord> {
    let mut rng = seeded(seed);
    let total: f64 = mix.iter().sum();
    (0..n)
        .map(|i| {
            // the first five rows cover every category
            let category = if i < 5 {
                Category::ALL[i]
            } else {
                let mut u = rng.random_range(0.0..total);
                let mut chosen = Category::Normal;
                for (c, w) in Category::ALL.iter().zip(mix) {
                    if u < w {
                        chosen = *c;
                        break;
                    }
                    u -= w;
                }
                chosen
            };
            let new = rng.random_bool(new_fraction.clamp(0.0, 1.0));
            synthetic_record(&mut rng, category, new)
        })
        .collect()
}

/// Unlabeled flows for throughput measurement.
pub fn synthetic_flows(n: usize, seed: u64) -> Vec<FlowRecord> {
    let mut flows = synthetic_dataset(n, DEFAULT_MIX, 0.2, seed);
    for f in &mut flows {
        f.raw_label = None;
        f.difficulty = None;
    }
    flows
}
