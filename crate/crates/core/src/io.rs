//! JSON and JSONL file formats.
//!
//! Every document carries a `format` name and a `version`; loaders reject
//! anything else. Trajectories are JSONL: one header line, one line per
//! timestep and one footer line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::sim::{StepRecord, TrajectoryFooter, TrajectoryHeader, TrajectoryLog};

pub const FORMAT_VERSION: u32 = 1;
pub const SCENARIO_FORMAT: &str = "aeos-scenario";
pub const ASSET_POOL_FORMAT: &str = "aeos-asset-pool";
pub const MANIFEST_FORMAT: &str = "aeos-split-manifest";
pub const TRAJECTORY_FORMAT: &str = "aeos-trajectory";

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    #[serde(default)]
    config_hash: String,
    payload: T,
}

#[derive(Deserialize)]
struct EnvelopeHead {
    format: String,
    version: u32,
}

/// Serializes `value` inside a versioned envelope.
pub fn to_document<T: Serialize>(format: &str, config_hash: &str, value: &T) -> String {
    let env = Envelope {
        format: format.to_string(),
        version: FORMAT_VERSION,
        config_hash: config_hash.to_string(),
        payload: value,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("document serializes");
    s.push('\n');
    s
}

fn check_head(format: &str, found_format: &str, version: u32) -> Result<(), FormatError> {
    if found_format != format {
        return Err(FormatError::Malformed(format!(
            "expected a `{format}` document, found `{found_format}`"
        )));
    }
    if version != FORMAT_VERSION {
        return Err(FormatError::Version {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    Ok(())
}

/// Parses a versioned document, returning the payload and its config hash.
pub fn from_document<T: DeserializeOwned>(format: &str, text: &str) -> Result<(T, String), FormatError> {
    let head: EnvelopeHead = serde_json::from_str(text).map_err(|e| FormatError::parse(1, e))?;
    check_head(format, &head.format, head.version)?;
    let env: Envelope<T> = serde_json::from_str(text).map_err(|e| FormatError::parse(1, e))?;
    Ok((env.payload, env.config_hash))
}

pub fn save_document<T: Serialize>(
    path: &Path,
    format: &str,
    config_hash: &str,
    value: &T,
) -> Result<(), FormatError> {
    std::fs::write(path, to_document(format, config_hash, value))?;
    Ok(())
}

pub fn load_document<T: DeserializeOwned>(path: &Path, format: &str) -> Result<(T, String), FormatError> {
    from_document(format, &std::fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TrajectoryLine {
    Header {
        format: String,
        version: u32,
        #[serde(flatten)]
        header: TrajectoryHeader,
    },
    Step(StepRecord),
    Footer(TrajectoryFooter),
}

pub fn write_trajectory<W: Write>(log: &TrajectoryLog, mut out: W) -> Result<(), FormatError> {
    let mut line = |l: &TrajectoryLine| -> Result<(), FormatError> {
        serde_json::to_writer(&mut out, l).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    line(&TrajectoryLine::Header {
        format: TRAJECTORY_FORMAT.into(),
        version: FORMAT_VERSION,
        header: log.header.clone(),
    })?;
    for step in &log.steps {
        line(&TrajectoryLine::Step(step.clone()))?;
    }
    line(&TrajectoryLine::Footer(log.footer.clone()))?;
    out.flush()?;
    Ok(())
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<TrajectoryLog, FormatError> {
    let mut header = None;
    let mut steps = Vec::new();
    let mut footer = None;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(FormatError::Malformed(format!("content after footer at line {lineno}")));
        }
        match serde_json::from_str(&line).map_err(|e| FormatError::parse(lineno, e))? {
            TrajectoryLine::Header {
                format,
                version,
                header: h,
            } => {
                if header.is_some() || lineno != 1 {
                    return Err(FormatError::Malformed(format!("unexpected header at line {lineno}")));
                }
                check_head(TRAJECTORY_FORMAT, &format, version)?;
                header = Some(h);
            }
            TrajectoryLine::Step(s) => {
                if header.is_none() {
                    return Err(FormatError::Malformed("missing header".into()));
                }
                if s.step != steps.len() {
                    return Err(FormatError::Malformed(format!(
                        "line {lineno}: step {} out of order",
                        s.step
                    )));
                }
                steps.push(s);
            }
            TrajectoryLine::Footer(f) => footer = Some(f),
        }
    }
    let header = header.ok_or_else(|| FormatError::Malformed("missing header".into()))?;
    let footer = footer.ok_or_else(|| FormatError::Malformed("missing footer".into()))?;
    if steps.len() != header.horizon {
        return Err(FormatError::Malformed(format!(
            "{} step records for a horizon of {}",
            steps.len(),
            header.horizon
        )));
    }
    Ok(TrajectoryLog {
        header,
        steps,
        footer,
    })
}

pub fn save_trajectory(path: &Path, log: &TrajectoryLog) -> Result<(), FormatError> {
    write_trajectory(log, BufWriter::new(File::create(path)?))
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryLog, FormatError> {
    read_trajectory(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::EarthModel;
    use crate::rng::rng_from_seed;
    use crate::scengen::{generate_asset_pool, generate_scenario, Scenario, ScenarioShape};
    use crate::schedulers::GreedyScheduler;
    use crate::sim::{rollout, SimConfig};

    fn scenario() -> Scenario {
        let mut rng = rng_from_seed(3);
        let pool = generate_asset_pool(&mut rng, 3, "io", &Default::default()).unwrap();
        let shape = ScenarioShape {
            n_sats: 2,
            n_tasks: 6,
            horizon: 40,
            dt: 1.0,
        };
        generate_scenario(&mut rng, &pool.assets, shape, "io-0".into(), 3, EarthModel::default()).unwrap()
    }

    #[test]
    fn scenario_roundtrip_is_exact() {
        let s = scenario();
        let text = to_document(SCENARIO_FORMAT, "abc", &s);
        let (back, hash): (Scenario, _) = from_document(SCENARIO_FORMAT, &text).unwrap();
        assert_eq!(back, s);
        assert_eq!(hash, "abc");
        assert_eq!(to_document(SCENARIO_FORMAT, "abc", &back), text);
    }

    #[test]
    fn wrong_version_or_format_is_rejected() {
        let s = scenario();
        let text = to_document(SCENARIO_FORMAT, "", &s).replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            from_document::<Scenario>(SCENARIO_FORMAT, &text),
            Err(FormatError::Version { .. })
        ));
        let text = to_document(MANIFEST_FORMAT, "", &s);
        assert!(matches!(
            from_document::<Scenario>(SCENARIO_FORMAT, &text),
            Err(FormatError::Malformed(_))
        ));
    }

    #[test]
    fn corrupted_json_reports_line() {
        let text = to_document(SCENARIO_FORMAT, "", &scenario());
        let mut lines: Vec<&str> = text.lines().collect();
        lines[4] = "  \"horizon\": ,";
        let err = from_document::<Scenario>(SCENARIO_FORMAT, &lines.join("\n")).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn trajectory_roundtrip_and_line_count() {
        let s = scenario();
        let log = rollout(&s, SimConfig::default(), &mut GreedyScheduler::new(), 9, 1).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), s.horizon + 2);
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back, log);

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[7] = "{\"kind\": \"step\", ".into();
        let err = read_trajectory(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 8, .. }), "{err}");
    }

    #[test]
    fn truncated_trajectory_is_malformed() {
        let s = scenario();
        let log = rollout(&s, SimConfig::default(), &mut GreedyScheduler::new(), 9, 1).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().take(10).collect();
        assert!(matches!(
            read_trajectory(cut.join("\n").as_bytes()),
            Err(FormatError::Malformed(_))
        ));
    }
}
