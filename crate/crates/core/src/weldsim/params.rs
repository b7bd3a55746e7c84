/// Coefficients of the surrogate melt-pool and photodiode model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Melt persistence per 10 ms step.
    pub lambda: f64,
    /// Melt gain per absorbed watt.
    pub c: f64,
    pub a0: f64,
    /// Roughness sensitivity of absorptivity.
    pub kappa: f64,
    pub sa_ref: f64,
    pub rho0: f64,
    /// Fraction of scattering removed once the surface is molten.
    pub w: f64,
    pub m_kh: f64,
    pub m_max: f64,
    pub or_peak: f64,
    pub or_kh_factor: f64,
    pub b0: f64,
    pub e0: f64,
    pub e1: f64,
    pub sigma_oe: f64,
    pub noise_brushed: f64,
    pub noise_sandblasted: f64,
    /// Global switch for sensor noise.
    pub noise: bool,
    pub steps_per_episode: u32,
    /// Travel per step in mm (50 mm/s for 10 ms).
    pub mm_per_step: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            lambda: 0.7,
            c: 0.0035,
            a0: 0.8,
            kappa: 0.25,
            sa_ref: 1.47,
            rho0: 0.3,
            w: 0.5,
            m_kh: 1.0,
            m_max: 2.0,
            or_peak: 8.0,
            or_kh_factor: 0.15,
            b0: 1.0,
            e0: 5.0,
            e1: 2.0,
            sigma_oe: 0.1,
            noise_brushed: 0.4,
            noise_sandblasted: 0.15,
            noise: true,
            steps_per_episode: 80,
            mm_per_step: 0.5,
        }
    }
}

impl SimParams {
    pub fn noiseless() -> Self {
        Self {
            noise: false,
            ..Self::default()
        }
    }
}
