use thiserror::Error;

pub type Result<T> = std::result::Result<T, CrawlError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrawlError {
    #[error("degenerate configuration: masses {i} and {j} are {distance:e} apart")]
    DegenerateConfiguration { i: usize, j: usize, distance: f64 },

    #[error("rest-length schedule left its domain at t = {t}: spring {spring} has rest length {length:e}")]
    ScheduleDomain { t: f64, spring: usize, length: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("integration exceeded {max_steps} steps before reaching t = {t_end}")]
    TooManySteps { max_steps: usize, t_end: f64 },

    #[error("time {t} lies outside the trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("outside the reduced chart: {0}")]
    ChartDomain(String),

    #[error("equilibrium continuation failed: {0}")]
    ContinuationFailed(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("period map has a Floquet multiplier at 1; forced response is not unique")]
    SingularPeriodMap,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl CrawlError {
    /// True for errors caused by the inputs leaving the model's domain,
    /// as opposed to numerical breakdown.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            CrawlError::DegenerateConfiguration { .. }
                | CrawlError::ScheduleDomain { .. }
                | CrawlError::ChartDomain(_)
                | CrawlError::AssumptionViolated(_)
                | CrawlError::InvalidParameter(_)
        )
    }
}
