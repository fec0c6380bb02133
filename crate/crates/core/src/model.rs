//! Observations, tie-aggregated datasets and right-continuous step functions.

use std::io::{Read, Write};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::{Error, Result, Scalar};

/// One current status observation. `status == 0` means no failure by `time`;
/// `status == k >= 1` means failure from cause `k` at or before `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub time: T,
    pub status: usize,
}

/// All observations sharing one distinct time. `counts[0]` counts survivals,
/// `counts[k]` counts failures from cause `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGroup<T> {
    pub time: T,
    pub counts: Vec<usize>,
}

impl<T> TimeGroup<T> {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn survivals(&self) -> usize {
        self.counts[0]
    }
}

/// A validated, time-sorted sample with ties aggregated.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    k_causes: usize,
    obs: Vec<Observation<T>>,
    distinct: Vec<TimeGroup<T>>,
    t_max: T,
}

/// Validate raw `(time, status)` pairs and aggregate ties.
pub fn validate_dataset<T: Scalar>(raw: &[(T, i64)], k_causes: usize) -> Result<Dataset<T>> {
    if k_causes == 0 {
        return Err(Error::NoCauses);
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut obs = Vec::with_capacity(raw.len());
    for (row, &(time, status)) in raw.iter().enumerate() {
        if !time.is_finite() {
            return Err(Error::NonFiniteTime { row });
        }
        if status < 0 || status as usize > k_causes {
            return Err(Error::StatusOutOfRange {
                row,
                status,
                k: k_causes,
            });
        }
        obs.push(Observation {
            time,
            status: status as usize,
        });
    }
    obs.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .expect("finite times")
            .then(a.status.cmp(&b.status))
    });

    let mut distinct: Vec<TimeGroup<T>> = Vec::new();
    for o in &obs {
        match distinct.last_mut() {
            Some(g) if g.time == o.time => g.counts[o.status] += 1,
            _ => {
                let mut counts = vec![0; k_causes + 1];
                counts[o.status] = 1;
                distinct.push(TimeGroup {
                    time: o.time,
                    counts,
                });
            }
        }
    }
    let t_max = obs.last().expect("nonempty").time;
    Ok(Dataset {
        k_causes,
        obs,
        distinct,
        t_max,
    })
}

impl<T: Scalar> Dataset<T> {
    pub fn k(&self) -> usize {
        self.k_causes
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.obs
    }

    pub fn distinct(&self) -> &[TimeGroup<T>] {
        &self.distinct
    }

    pub fn times(&self) -> Vec<T> {
        self.distinct.iter().map(|g| g.time).collect()
    }

    /// The largest observation time `T_(n)`.
    pub fn t_max(&self) -> T {
        self.t_max
    }

    /// Whether some observation at `T_(n)` is a survival.
    pub fn survival_at_max(&self) -> bool {
        self.distinct.last().is_some_and(|g| g.survivals() > 0)
    }

    /// Total number of observations with the given status.
    pub fn status_count(&self, status: usize) -> usize {
        self.distinct.iter().map(|g| g.counts[status]).sum()
    }

    /// Parse the `time,status` CSV format.
    pub fn from_csv_reader<R: Read>(reader: R, k_causes: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(1, e))?.clone();
        if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "status" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `time,status`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut raw = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                csv_error(line, e)
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 2 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 2 fields, found {}", record.len()),
                });
            }
            let time: f64 = record[0].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid time `{}`", &record[0]),
            })?;
            let status: i64 = record[1].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid status `{}`", &record[1]),
            })?;
            raw.push((T::of(time), status));
        }
        validate_dataset(&raw, k_causes).map_err(|e| match e {
            // rows are 0-based data rows; the header occupies line 1
            Error::StatusOutOfRange { row, status, k } => Error::Parse {
                line: row + 2,
                msg: format!("status {status} out of range 0..={k}"),
            },
            Error::NonFiniteTime { row } => Error::Parse {
                line: row + 2,
                msg: "time is not finite".into(),
            },
            other => other,
        })
    }

    /// Write the sorted observations in the `time,status` CSV format.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,status")?;
        for o in &self.obs {
            writeln!(w, "{},{}", o.time, o.status)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}

fn csv_error(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump<T> {
    pub t: T,
    pub v: T,
}

/// Right-continuous nondecreasing step function with an explicit mass beyond
/// its last jump, so that `F(inf) = last value + tail_mass`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFn<T> {
    baseline: T,
    jumps: Vec<Jump<T>>,
    tail_mass: T,
}

#[derive(Deserialize)]
struct StepFnRepr<T> {
    baseline: T,
    jumps: Vec<Jump<T>>,
    tail_mass: T,
}

impl<'de, T: Scalar> Deserialize<'de> for StepFn<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = StepFnRepr::<T>::deserialize(d)?;
        StepFn::new_unbounded(r.baseline, r.jumps, r.tail_mass).map_err(D::Error::custom)
    }
}

impl<T: Scalar> StepFn<T> {
    /// A sub-distribution function: values in `[0, 1]`.
    pub fn new(baseline: T, jumps: Vec<Jump<T>>, tail_mass: T) -> Result<Self> {
        let f = Self::new_unbounded(baseline, jumps, tail_mass)?;
        let slack = T::epsilon() * T::of(64.0);
        if f.eval_inf() > T::one() + slack {
            return Err(Error::InvalidStepFn(format!(
                "total mass {} exceeds 1",
                f.eval_inf()
            )));
        }
        Ok(f)
    }

    /// Bounded nonnegative nondecreasing step function without the `<= 1` cap.
    pub fn new_unbounded(baseline: T, jumps: Vec<Jump<T>>, tail_mass: T) -> Result<Self> {
        if !baseline.is_finite() || baseline < T::zero() {
            return Err(Error::InvalidStepFn("baseline must be finite and >= 0".into()));
        }
        if !tail_mass.is_finite() || tail_mass < T::zero() {
            return Err(Error::InvalidStepFn("tail mass must be finite and >= 0".into()));
        }
        let mut prev_v = baseline;
        for (i, j) in jumps.iter().enumerate() {
            if !j.t.is_finite() || !j.v.is_finite() {
                return Err(Error::InvalidStepFn(format!("jump {i} is not finite")));
            }
            if i > 0 && j.t <= jumps[i - 1].t {
                return Err(Error::InvalidStepFn(format!(
                    "jump times not strictly increasing at index {i}"
                )));
            }
            let increasing = if i == 0 { j.v >= prev_v } else { j.v > prev_v };
            if !increasing {
                return Err(Error::InvalidStepFn(format!(
                    "jump values not increasing at index {i}"
                )));
            }
            prev_v = j.v;
        }
        Ok(Self {
            baseline,
            jumps,
            tail_mass,
        })
    }

    pub fn zero() -> Self {
        Self {
            baseline: T::zero(),
            jumps: Vec::new(),
            tail_mass: T::zero(),
        }
    }

    /// Build from values at sorted points; a jump is recorded wherever the
    /// value strictly increases over its predecessor (starting from 0).
    pub fn from_values(times: &[T], values: &[T], tail_mass: T) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch(format!(
                "{} times, {} values",
                times.len(),
                values.len()
            )));
        }
        let mut jumps = Vec::new();
        let mut prev = T::zero();
        for (&t, &v) in times.iter().zip(values) {
            if v < prev {
                return Err(Error::InvalidStepFn(format!("value decreases at t = {t}")));
            }
            if v > prev {
                jumps.push(Jump { t, v });
                prev = v;
            }
        }
        Self::new_unbounded(T::zero(), jumps, tail_mass)
    }

    pub fn baseline(&self) -> T {
        self.baseline
    }

    pub fn jumps(&self) -> &[Jump<T>] {
        &self.jumps
    }

    pub fn tail_mass(&self) -> T {
        self.tail_mass
    }

    pub fn jump_points(&self) -> impl Iterator<Item = T> + '_ {
        self.jumps.iter().map(|j| j.t)
    }

    /// Value at the last jump (or the baseline when there is none).
    pub fn last_value(&self) -> T {
        self.jumps.last().map_or(self.baseline, |j| j.v)
    }

    /// Right-continuous evaluation; `+inf` includes the tail mass.
    pub fn eval(&self, t: T) -> T {
        if t == T::infinity() {
            return self.eval_inf();
        }
        let idx = self.jumps.partition_point(|j| j.t <= t);
        if idx == 0 {
            self.baseline
        } else {
            self.jumps[idx - 1].v
        }
    }

    /// `F(t-)`.
    pub fn left_limit(&self, t: T) -> T {
        let idx = self.jumps.partition_point(|j| j.t < t);
        if idx == 0 {
            self.baseline
        } else {
            self.jumps[idx - 1].v
        }
    }

    pub fn eval_inf(&self) -> T {
        self.last_value() + self.tail_mass
    }

    /// Jump sizes `(t, F(t) - F(t-))`.
    pub fn increments(&self) -> impl Iterator<Item = (T, T)> + '_ {
        let mut prev = self.baseline;
        self.jumps.iter().map(move |j| {
            let d = j.v - prev;
            prev = j.v;
            (j.t, d)
        })
    }

    pub fn to_f64(&self) -> StepFn<f64> {
        StepFn {
            baseline: self.baseline.as_f64(),
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    t: j.t.as_f64(),
                    v: j.v.as_f64(),
                })
                .collect(),
            tail_mass: self.tail_mass.as_f64(),
        }
    }
}

/// Default pointwise tolerance on `F_+ <= 1`.
pub const DEFAULT_SUM_TOLERANCE: f64 = 1e-10;

/// A K-tuple of sub-distribution functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDistSystem<T> {
    components: Vec<StepFn<T>>,
    sum_tolerance: T,
}

#[derive(Serialize)]
struct SystemReprRef<'a, T> {
    #[serde(rename = "K")]
    k: usize,
    components: &'a [StepFn<T>],
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct SystemRepr<T> {
    #[serde(rename = "K")]
    k: usize,
    components: Vec<StepFn<T>>,
}

impl<T: Scalar> Serialize for SubDistSystem<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SystemReprRef {
            k: self.components.len(),
            components: &self.components,
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for SubDistSystem<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SystemRepr::<T>::deserialize(d)?;
        if r.k != r.components.len() {
            return Err(D::Error::custom(format!(
                "K = {} but {} components",
                r.k,
                r.components.len()
            )));
        }
        SubDistSystem::new(r.components).map_err(D::Error::custom)
    }
}

impl<T: Scalar> SubDistSystem<T> {
    pub fn new(components: Vec<StepFn<T>>) -> Result<Self> {
        Self::with_tolerance(components, T::of(DEFAULT_SUM_TOLERANCE))
    }

    pub fn with_tolerance(components: Vec<StepFn<T>>, sum_tolerance: T) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::NoCauses);
        }
        let s = Self {
            components,
            sum_tolerance,
        };
        s.check_sum()?;
        Ok(s)
    }

    /// Element of the cone: nonnegative nondecreasing components, no `F_+ <= 1`.
    pub fn cone(components: Vec<StepFn<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::NoCauses);
        }
        Ok(Self {
            components,
            sum_tolerance: T::infinity(),
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[StepFn<T>] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &StepFn<T> {
        &self.components[k - 1]
    }

    pub fn into_components(self) -> Vec<StepFn<T>> {
        self.components
    }

    pub fn sum_tolerance(&self) -> T {
        self.sum_tolerance
    }

    pub fn eval_plus(&self, t: T) -> T {
        self.components.iter().map(|c| c.eval(t)).sum()
    }

    pub fn total_mass(&self) -> T {
        self.components.iter().map(|c| c.eval_inf()).sum()
    }

    /// `F_{K+1}(t) = F_+(inf) - F_+(t)`.
    pub fn eval_survival(&self, t: T) -> T {
        self.total_mass() - self.eval_plus(t)
    }

    /// Sorted union of all component jump points.
    pub fn merged_jump_points(&self) -> Vec<T> {
        let mut pts: Vec<T> = self.components.iter().flat_map(|c| c.jump_points()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        pts.dedup();
        pts
    }

    fn check_sum(&self) -> Result<()> {
        let limit = T::one() + self.sum_tolerance;
        for t in self.merged_jump_points() {
            let s = self.eval_plus(t);
            if s > limit {
                return Err(Error::SumConstraint {
                    t: t.as_f64(),
                    sum: s.as_f64(),
                });
            }
        }
        let total = self.total_mass();
        if total > limit {
            return Err(Error::SumConstraint {
                t: f64::INFINITY,
                sum: total.as_f64(),
            });
        }
        Ok(())
    }

    pub fn to_f64(&self) -> SubDistSystem<f64> {
        SubDistSystem {
            components: self.components.iter().map(|c| c.to_f64()).collect(),
            sum_tolerance: self.sum_tolerance.as_f64(),
        }
    }
}

/// `F_+` as a step function together with the exact total `F_+(inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSum<T> {
    pub plus: StepFn<T>,
    pub total: T,
}

impl<T: Scalar> SystemSum<T> {
    pub fn eval_plus(&self, t: T) -> T {
        if t == T::infinity() {
            self.total
        } else {
            self.plus.eval(t)
        }
    }

    pub fn eval_survival(&self, t: T) -> T {
        self.total - self.eval_plus(t)
    }
}

/// Pointwise sum of the components, checked against `F_+ <= 1`.
pub fn system_sum<T: Scalar>(s: &SubDistSystem<T>) -> Result<SystemSum<T>> {
    let points = s.merged_jump_points();
    let limit = T::one() + s.sum_tolerance.min(T::of(DEFAULT_SUM_TOLERANCE));
    let baseline: T = s.components.iter().map(|c| c.baseline()).sum();
    let mut jumps = Vec::with_capacity(points.len());
    let mut prev = baseline;
    for t in points {
        let v = s.eval_plus(t);
        if v > limit {
            return Err(Error::SumConstraint {
                t: t.as_f64(),
                sum: v.as_f64(),
            });
        }
        if v > prev {
            jumps.push(Jump { t, v });
            prev = v;
        }
    }
    let total = s.total_mass();
    if total > limit {
        return Err(Error::SumConstraint {
            t: f64::INFINITY,
            sum: total.as_f64(),
        });
    }
    let tail = (total - prev).max(T::zero());
    let plus = StepFn {
        baseline,
        jumps,
        tail_mass: tail,
    };
    Ok(SystemSum { plus, total })
}
