use crate::field::{VelocityEvaluator, VelocityMethod, VortexBlobField};
use crate::flow::{FieldHistory, FlowMap};
use crate::{Error, Result};

/// A computed solution: blob fields at increasing times from 0 to T.
#[derive(Debug, Clone)]
pub struct BlobRun {
    times: Vec<f64>,
    fields: Vec<VortexBlobField>,
    method: VelocityMethod,
}

impl BlobRun {
    pub fn new(times: Vec<f64>, fields: Vec<VortexBlobField>, method: VelocityMethod) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::param("run", "one field per time required"));
        }
        if times.len() < 2 {
            return Err(Error::param("run", "at least two times required"));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("run", "times must start at 0 and increase"));
        }
        method.validate()?;
        Ok(Self { times, fields, method })
    }

    /// The same field at every time.
    pub fn steady(field: VortexBlobField, times: Vec<f64>, method: VelocityMethod) -> Result<Self> {
        let fields = vec![field; times.len()];
        Self::new(times, fields, method)
    }

    /// Carrier snapshots of a self-consistent flow, or the frozen field at
    /// the flow's snapshot times.
    pub fn from_flow(flow: &FlowMap) -> Result<Self> {
        match flow.history() {
            FieldHistory::Carriers(c) => {
                let fields = (0..c.times().len()).map(|k| c.snapshot(k)).collect();
                Self::new(c.times().to_vec(), fields, flow.config().velocity)
            }
            FieldHistory::Frozen(f, m) => Self::steady(f.clone(), flow.times().to_vec(), *m),
            FieldHistory::Analytic(_) => Err(Error::param("run", "analytic flows carry no vorticity")),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[VortexBlobField] {
        &self.fields
    }

    pub fn method(&self) -> VelocityMethod {
        self.method
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn evaluator(&self, k: usize) -> Result<VelocityEvaluator> {
        VelocityEvaluator::new(self.fields[k].clone(), self.method)
    }

    /// Keeps every `stride`-th time plus the last.
    pub fn thinned(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let n = self.times.len();
        let keep: Vec<usize> = (0..n).filter(|k| k % stride == 0 || *k == n - 1).collect();
        Self {
            times: keep.iter().map(|&k| self.times[k]).collect(),
            fields: keep.iter().map(|&k| self.fields[k].clone()).collect(),
            method: self.method,
        }
    }
}
