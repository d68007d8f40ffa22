use super::kind::{CascadeSpec, SmootherKind};
use super::stage::{BoxStage, OscillatorStage, Stage};
use super::{samples_for, Jet, SmootherError, JET_LEN};

/// Streaming realization of one smoother for one scalar channel.
///
/// The first sample pre-charges the filter as if the input had been held at
/// that value forever, so a stationary start produces no transient.
#[derive(Debug, Clone)]
pub struct SmootherState {
    kind: SmootherKind,
    dt: f64,
    stages: Vec<Stage>,
    offset: Option<f64>,
}

impl SmootherState {
    pub fn new(kind: SmootherKind, dt: f64) -> Result<Self, SmootherError> {
        kind.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SmootherError::Domain(format!("sample period must be positive, got {dt}")));
        }
        let stages = match kind {
            SmootherKind::Rectangular { t } => vec![Stage::Box(BoxStage::new(samples_for(t, dt), dt))],
            SmootherKind::Trapezoidal { t1, t2 } => vec![
                Stage::Box(BoxStage::new(samples_for(t1, dt), dt)),
                Stage::Box(BoxStage::new(samples_for(t2, dt), dt)),
            ],
            SmootherKind::Harmonic { t } => {
                vec![Stage::Oscillator(OscillatorStage::new(0.0, samples_for(t, dt), dt))]
            }
            SmootherKind::DampedHarmonic { sigma, t } => {
                vec![Stage::Oscillator(OscillatorStage::new(sigma, samples_for(t, dt), dt))]
            }
        };
        Ok(SmootherState { kind, dt, stages, offset: None })
    }

    pub fn kind(&self) -> &SmootherKind {
        &self.kind
    }

    pub fn sample_period(&self) -> f64 {
        self.dt
    }

    /// Delay added by this smoother after quantization.
    pub fn support(&self) -> f64 {
        self.kind.quantized_support(self.dt)
    }

    /// Feeds one raw position sample.
    pub fn step(&mut self, u: f64) -> Jet {
        self.step_jet(Jet::constant(u))
    }

    /// Feeds one sample whose derivative channels are already known (for
    /// example the output of an upstream smoother).
    pub fn step_jet(&mut self, input: Jet) -> Jet {
        let offset = *self.offset.get_or_insert(input.pos());
        let mut x = input;
        x.0[0] -= offset;
        for stage in &mut self.stages {
            x = stage.step(x);
        }
        x.0[0] += offset;
        x
    }

    pub fn reset(&mut self) {
        *self = SmootherState::new(self.kind, self.dt).expect("kind was validated on construction");
    }
}

/// Serial composition of smoothers sharing one sample period.
#[derive(Debug, Clone)]
pub struct Cascade {
    spec: CascadeSpec,
    states: Vec<SmootherState>,
}

impl Cascade {
    pub fn new(spec: &CascadeSpec, dt: f64) -> Result<Self, SmootherError> {
        spec.validate()?;
        let states = spec
            .stages
            .iter()
            .map(|k| SmootherState::new(*k, dt))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Cascade { spec: spec.clone(), states })
    }

    pub fn spec(&self) -> &CascadeSpec {
        &self.spec
    }

    pub fn support(&self) -> f64 {
        self.spec.quantized_support(self.states[0].sample_period())
    }

    /// Highest derivative channel of the output that is fed by the structure
    /// of the filter rather than by the (unknown) derivatives of a raw input.
    pub fn structural_order(&self) -> usize {
        (self.spec.order() as usize).min(JET_LEN - 1)
    }

    pub fn step(&mut self, u: f64) -> Jet {
        self.step_jet(Jet::constant(u))
    }

    pub fn step_jet(&mut self, input: Jet) -> Jet {
        self.states.iter_mut().fold(input, |x, s| s.step_jet(x))
    }

    /// Filters a whole sampled signal.
    pub fn run(&mut self, input: &[f64]) -> Vec<Jet> {
        input.iter().map(|&u| self.step(u)).collect()
    }
}
