//! JSONL stream logs.
//!
//! The first line is a header `{"channel":"header","v":1,...}`. Every other
//! line is one record tagged by `channel`:
//!
//! | channel        | fields |
//! |----------------|--------|
//! | `imu`          | `t`, `gyro` [rad/s, IMU frame], `accel` [m/s^2, IMU frame] |
//! | `joints`       | `t`, `q` [rad], `qd` [rad/s], `tau` [N m], 12 entries each in `[LF,RF,LH,RH] x [HAA,HFE,KFE]` order |
//! | `desired_foot` | `t`, `position`, `velocity`: 4 body-frame vectors each |
//! | `extero_pose`  | `t`, `position` [m], `attitude` [w,x,y,z], optional `position_var` |
//! | `extero_twist` | `t`, `linear` [m/s], `angular` [rad/s], sensor frame |
//! | `ground_truth` | `t`, `position`, `attitude`, `linear_velocity` (world), `angular_velocity` (body), `feet` (world), `stance`, `slip` |
//! | `estimate`     | `t`, `position`, `velocity`, `attitude`, `gyro_bias`, `position_var`, `velocity_var`, `attitude_var`, `stance`, `slip` |
//!
//! Vectors are JSON arrays, quaternions are `[w, x, y, z]` with `w >= 0`.
//! Timestamps are seconds and nondecreasing within each channel.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attitude::ImuSample;
use crate::error::{Error, Result};
use crate::frames::ExteroSensor;
use crate::fusion::{Estimate, ExteroPose, ExteroTwist, SensorEvent};
use crate::legodom::DesiredFoot;
use crate::model::JointState;
use crate::sim::GroundTruthRecord;

pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub v: u32,
    /// Producer, e.g. `simulate` or `estimate`.
    pub source: String,
    pub robot: String,
    pub extero_sensor: ExteroSensor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LogHeader {
    pub fn new(source: &str, robot: &str, extero_sensor: ExteroSensor) -> Self {
        Self {
            v: LOG_VERSION,
            source: source.to_string(),
            robot: robot.to_string(),
            extero_sensor,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum Record {
    Imu(ImuSample),
    Joints(JointState),
    DesiredFoot(DesiredFoot),
    ExteroPose(ExteroPose),
    ExteroTwist(ExteroTwist),
    GroundTruth(GroundTruthRecord),
    Estimate(Estimate),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
enum HeaderLine {
    Header(LogHeader),
}

impl Record {
    pub fn t(&self) -> f64 {
        match self {
            Record::Imu(r) => r.t,
            Record::Joints(r) => r.t,
            Record::DesiredFoot(r) => r.t,
            Record::ExteroPose(r) => r.t,
            Record::ExteroTwist(r) => r.t,
            Record::GroundTruth(r) => r.t,
            Record::Estimate(r) => r.t,
        }
    }

    pub fn channel(&self) -> &'static str {
        match self {
            Record::Imu(_) => "imu",
            Record::Joints(_) => "joints",
            Record::DesiredFoot(_) => "desired_foot",
            Record::ExteroPose(_) => "extero_pose",
            Record::ExteroTwist(_) => "extero_twist",
            Record::GroundTruth(_) => "ground_truth",
            Record::Estimate(_) => "estimate",
        }
    }

    /// Position in the canonical order of records sharing a timestamp.
    pub fn rank(&self) -> u8 {
        match self {
            Record::GroundTruth(_) => 0,
            Record::DesiredFoot(_) => 1,
            Record::Joints(_) => 2,
            Record::ExteroPose(_) => 3,
            Record::ExteroTwist(_) => 4,
            Record::Imu(_) => 5,
            Record::Estimate(_) => 6,
        }
    }

    /// The estimator input carried by this record, if any.
    pub fn to_event(&self) -> Option<SensorEvent> {
        match self {
            Record::Imu(r) => Some(SensorEvent::Imu(*r)),
            Record::Joints(r) => Some(SensorEvent::Joints(r.clone())),
            Record::DesiredFoot(r) => Some(SensorEvent::DesiredFoot(r.clone())),
            Record::ExteroPose(r) => Some(SensorEvent::ExteroPose(*r)),
            Record::ExteroTwist(r) => Some(SensorEvent::ExteroTwist(*r)),
            Record::GroundTruth(_) | Record::Estimate(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamLog {
    pub header: LogHeader,
    pub records: Vec<Record>,
}

/// Tracks the last timestamp per channel.
#[derive(Default)]
struct OrderCheck(HashMap<&'static str, f64>);

impl OrderCheck {
    fn check(&mut self, record: &Record, line: usize) -> Result<()> {
        let t = record.t();
        if !t.is_finite() {
            return Err(Error::Log {
                line,
                message: format!("non-finite timestamp on {}", record.channel()),
            });
        }
        let last = self.0.entry(record.channel()).or_insert(f64::NEG_INFINITY);
        if t < *last {
            return Err(Error::Log {
                line,
                message: format!("{} timestamp {t} decreases (previous {last})", record.channel()),
            });
        }
        *last = t;
        Ok(())
    }
}

pub fn parse_header(line: &str) -> Result<LogHeader> {
    let HeaderLine::Header(h) = serde_json::from_str(line).map_err(|e| Error::Log {
        line: 1,
        message: format!("expected header record: {e}"),
    })?;
    if h.v != LOG_VERSION {
        return Err(Error::Log {
            line: 1,
            message: format!("unsupported log version {}", h.v),
        });
    }
    Ok(h)
}

/// Streaming reader: parses the header eagerly and records lazily, checking
/// per-channel timestamp order.
pub struct LogReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    order: OrderCheck,
    pub header: LogHeader,
}

impl<R: BufRead> LogReader<R> {
    pub fn new(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or_else(|| Error::Log {
            line: 1,
            message: "empty log".into(),
        })??;
        Ok(Self {
            header: parse_header(&first)?,
            lines,
            line: 1,
            order: OrderCheck::default(),
        })
    }
}

impl LogReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: BufRead> Iterator for LogReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(s) => s,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let line = self.line;
            let parsed = serde_json::from_str::<Record>(&text)
                .map_err(|e| Error::Log {
                    line,
                    message: e.to_string(),
                })
                .and_then(|r| self.order.check(&r, line).map(|_| r));
            return Some(parsed);
        }
    }
}

impl StreamLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut r = LogReader::new(BufReader::new(reader))?;
        let records = r.by_ref().collect::<Result<Vec<_>>>()?;
        Ok(Self {
            header: r.header,
            records,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        let header = HeaderLine::Header(self.header.clone());
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    /// Checks per-channel timestamp order.
    pub fn validate(&self) -> Result<()> {
        let mut order = OrderCheck::default();
        self.records.iter().enumerate().try_for_each(|(i, r)| order.check(r, i + 2))
    }

    /// Stable sort by timestamp, then canonical channel rank.
    pub fn sort(&mut self) {
        self.records
            .sort_by(|a, b| a.t().total_cmp(&b.t()).then(a.rank().cmp(&b.rank())));
    }

    pub fn events(&self) -> impl Iterator<Item = SensorEvent> + '_ {
        self.records.iter().filter_map(Record::to_event)
    }

    pub fn ground_truth(&self) -> Vec<GroundTruthRecord> {
        self.records
            .iter()
            .filter_map(|r| match r {
                Record::GroundTruth(g) => Some(g.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn estimates(&self) -> Vec<Estimate> {
        self.records
            .iter()
            .filter_map(|r| match r {
                Record::Estimate(e) => Some(*e),
                _ => None,
            })
            .collect()
    }

    pub fn count(&self, channel: &str) -> usize {
        self.records.iter().filter(|r| r.channel() == channel).count()
    }
}

/// Flattens a JSON value into `(column, value)` pairs. Vectors of three get
/// `_x/_y/_z` suffixes, quaternions `_w/_x/_y/_z`, anything else an index.
fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
    use serde_json::Value;
    match value {
        Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        Value::Bool(b) => out.push((prefix.to_string(), u8::from(*b).to_string())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Array(items) => {
            let names: &[&str] = match (items.len(), prefix.ends_with("attitude")) {
                (3, _) => &["x", "y", "z"],
                (4, true) => &["w", "x", "y", "z"],
                _ => &[],
            };
            for (i, v) in items.iter().enumerate() {
                let key = names.get(i).map_or_else(|| i.to_string(), |n| n.to_string());
                flatten(&format!("{prefix}_{key}"), v, out);
            }
        }
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
    }
}

/// Writes the selected series as one CSV table, one row per record.
///
/// A selector is a channel (`estimate`) or a channel field (`estimate.position`).
/// Columns are `t` followed by `<channel>.<field>[_<component>]`; cells of
/// other channels are left empty. Returns the number of rows written.
pub fn write_csv<I, W>(records: I, selectors: &[String], mut out: W) -> Result<usize>
where
    I: IntoIterator<Item = Result<Record>>,
    W: Write,
{
    let known = ["imu", "joints", "desired_foot", "extero_pose", "extero_twist", "ground_truth", "estimate"];
    let mut wanted: Vec<(String, Option<String>)> = Vec::new();
    for s in selectors {
        let (channel, field) = match s.split_once('.') {
            Some((c, f)) => (c.to_string(), Some(f.to_string())),
            None => (s.clone(), None),
        };
        if !known.contains(&channel.as_str()) {
            return Err(Error::Config(format!("unknown channel '{channel}'")));
        }
        wanted.push((channel, field));
    }
    let mut columns: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(String, Vec<(usize, String)>)> = Vec::new();
    for record in records {
        let record = record?;
        let channel = record.channel();
        let selected: Vec<&Option<String>> = wanted.iter().filter(|(c, _)| c == channel).map(|(_, f)| f).collect();
        if selected.is_empty() {
            continue;
        }
        let serde_json::Value::Object(mut map) = serde_json::to_value(&record).map_err(|e| Error::Config(e.to_string()))? else {
            continue;
        };
        map.remove("channel");
        let t = map.remove("t").map(|v| v.to_string()).unwrap_or_default();
        let mut cells = Vec::new();
        for (field, value) in &map {
            if !selected.iter().any(|f| f.as_ref().is_none_or(|f| f == field)) {
                continue;
            }
            let mut flat = Vec::new();
            flatten(&format!("{channel}.{field}"), value, &mut flat);
            for (name, v) in flat {
                let col = *index.entry(name.clone()).or_insert_with(|| {
                    columns.push(name);
                    columns.len() - 1
                });
                cells.push((col, v));
            }
        }
        rows.push((t, cells));
    }
    writeln!(out, "t,{}", columns.join(","))?;
    let mut line = vec![String::new(); columns.len()];
    for (t, cells) in &rows {
        line.iter_mut().for_each(String::clear);
        for (c, v) in cells {
            line[*c].clone_from(v);
        }
        writeln!(out, "{t},{}", line.join(","))?;
    }
    Ok(rows.len())
}
