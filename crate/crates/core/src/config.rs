use crate::linalg::EigConfig;

/// Which stability radius is approximated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Real perturbations bounded in Frobenius norm (rank-2 iteration).
    RealFro,
    /// Complex perturbations (rank-1 iteration).
    Complex,
}

/// Tolerances and limits shared by the expansion, contraction and outer loops.
#[derive(Clone, Debug)]
pub struct HecConfig {
    pub tau_eps: f64,
    pub tau_uv: f64,
    pub rel_early: f64,
    /// Early expansion/contraction termination.
    pub early: bool,
    /// Interpolated-step check and rank-2 extrapolation.
    pub accel: bool,
    pub maxit_outer: usize,
    pub maxit_expand: usize,
    pub maxit_contract: usize,
    pub max_ls: usize,
    pub extrap_period: usize,
    pub extrap_window: usize,
    pub mode: Mode,
    /// Growth factor for ε while searching for a destabilizing perturbation.
    pub ub_growth: f64,
    pub ub_maxit: usize,
    /// Number of eigenvalues of `A` whose ascent directions seed a separate
    /// run; the smallest converged ε wins. Large operators always use one.
    pub starts: usize,
    /// Also start the outer loop from the first destabilizing point along each
    /// frozen starting direction, not only from the greedy search.
    pub ray_starts: bool,
    /// Growth factor for ε along a frozen starting direction.
    pub ray_growth: f64,
    pub eig: EigConfig,
    /// Seeds every random choice (Arnoldi start vectors, fallback perturbations).
    pub seed: u64,
}

impl Default for HecConfig {
    fn default() -> Self {
        HecConfig {
            tau_eps: 1e-12,
            tau_uv: 1e-12,
            rel_early: 0.01,
            early: false,
            accel: false,
            maxit_outer: 100,
            maxit_expand: 1000,
            maxit_contract: 50,
            max_ls: 25,
            extrap_period: 5,
            extrap_window: 5,
            mode: Mode::RealFro,
            ub_growth: 10.0,
            ub_maxit: 200,
            starts: 4,
            ray_starts: true,
            ray_growth: 1.25,
            eig: EigConfig::default(),
            seed: 0,
        }
    }
}

impl HecConfig {
    pub fn validate(&self) -> Result<(), crate::Error> {
        let bad = |what: &str| Err(crate::Error::InvalidArgument(what.to_string()));
        if !(self.tau_eps > 0.0 && self.tau_uv > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.extrap_window < 3 {
            return bad("extrap_window must be at least 3");
        }
        if self.extrap_period == 0 || self.maxit_contract == 0 {
            return bad("extrap_period and maxit_contract must be positive");
        }
        if self.starts == 0 {
            return bad("starts must be at least 1");
        }
        if !(self.ray_growth > 1.0) {
            return bad("ray_growth must exceed 1");
        }
        if !(self.ub_growth > 1.0) {
            return bad("ub_growth must exceed 1");
        }
        Ok(())
    }
}
