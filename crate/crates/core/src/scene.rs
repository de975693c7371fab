//! Physical scene of a semi-passive IRS sensing link.
//!
//! A BS with `n_bs_antennas` antennas illuminates an IRS with `n_res`
//! passive reflecting elements (REs). The reflected beam hits `K` targets and
//! the echoes are recorded by `n_ses` active sensing elements (SEs) on the same
//! surface over `n_slots` time slots. Stacking the slots gives
//!
//! ```text
//! Y = B(θ)·Λ·Q(θ)ᴴ·D + N
//! ```
//!
//! with `B` the SE steering matrix, `Q` the RE steering matrix evaluated at the
//! reflected spatial frequency `π(sin θ − sin θ_BI)`, `Λ` the diagonal of
//! composite path gains and `D` the RE phase schedule. The BS beamformer is
//! matched to the BS–IRS link, so it only contributes a `√N_b` factor to `Λ`.
//!
//! Steering vectors are always parameterized by spatial frequency, never by an
//! "effective angle": `sin θ − sin θ_BI` can leave `[−1, 1]`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c64, cis, ComplexMatrix, ComplexVector};
use crate::rng;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn dbsm_to_m2(dbsm: f64) -> f64 {
    10f64.powf(dbsm / 10.0)
}

pub fn m2_to_dbsm(m2: f64) -> f64 {
    10.0 * m2.log10()
}

/// Spatial frequency seen by the SE array for a wave from `theta`.
#[inline]
pub fn se_frequency(theta: f64) -> f64 {
    PI * theta.sin()
}

/// Spatial frequency seen by the RE array on the reflected path.
#[inline]
pub fn re_frequency(theta: f64, irs_arrival_angle: f64) -> f64 {
    PI * (theta.sin() - irs_arrival_angle.sin())
}

fn in_angle_range(theta: f64) -> bool {
    theta > -PI / 2.0 && theta <= PI / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    /// Direction of arrival, radians.
    pub angle: f64,
    /// IRS–target distance, meters.
    pub distance: f64,
    /// Radar cross section, m².
    pub rcs: f64,
}

impl Target {
    pub fn new(angle: f64, distance: f64, rcs: f64) -> Self {
        Self {
            angle,
            distance,
            rcs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !in_angle_range(self.angle) {
            return Err(Error::Config(format!(
                "target angle {} rad outside (-pi/2, pi/2]",
                self.angle
            )));
        }
        if !(self.distance > 0.0) || !(self.rcs > 0.0) {
            return Err(Error::Config(
                "target distance and RCS must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Scene parameters in SI units (watts, meters, radians, hertz).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub n_bs_antennas: usize,
    pub n_res: usize,
    pub n_ses: usize,
    pub n_slots: usize,
    pub carrier_freq: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub bs_irs_distance: f64,
    pub bs_departure_angle: f64,
    pub irs_arrival_angle: f64,
    pub targets: Vec<Target>,
}

impl SceneConfig {
    /// Full-size reference geometry: 28 GHz, 64 BS antennas, 64 REs, 8 SEs,
    /// 64 slots, targets at −10°, 10°, 30°.
    pub fn full_scale() -> Self {
        let targets = [-10.0f64, 10.0, 30.0]
            .iter()
            .map(|deg| Target::new(deg.to_radians(), 5.0, dbsm_to_m2(10.0)))
            .collect();
        Self {
            n_bs_antennas: 64,
            n_res: 64,
            n_ses: 8,
            n_slots: 64,
            carrier_freq: 28e9,
            tx_power: dbm_to_watts(20.0),
            noise_power: dbm_to_watts(-120.0),
            bs_irs_distance: 30.0,
            bs_departure_angle: (-60f64).to_radians(),
            irs_arrival_angle: (-60f64).to_radians(),
            targets,
        }
    }

    /// Same geometry with 32 REs and 32 slots, small enough for routine runs.
    pub fn desk_scale() -> Self {
        Self {
            n_res: 32,
            n_slots: 32,
            ..Self::full_scale()
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn target_angles(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.angle).collect()
    }

    pub fn with_tx_power_dbm(mut self, dbm: f64) -> Self {
        self.tx_power = dbm_to_watts(dbm);
        self
    }

    /// Replaces the target angles, keeping the distance and RCS of the first
    /// target for every entry.
    pub fn with_target_angles_deg(mut self, angles_deg: &[f64]) -> Self {
        let template = self
            .targets
            .first()
            .copied()
            .unwrap_or(Target::new(0.0, 5.0, dbsm_to_m2(10.0)));
        self.targets = angles_deg
            .iter()
            .map(|deg| Target {
                angle: deg.to_radians(),
                ..template
            })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bs_antennas == 0 || self.n_res == 0 || self.n_ses == 0 || self.n_slots == 0 {
            return Err(Error::Config("element and slot counts must be >= 1".into()));
        }
        for (name, v) in [
            ("carrier frequency", self.carrier_freq),
            ("transmit power", self.tx_power),
            ("noise power", self.noise_power),
            ("BS-IRS distance", self.bs_irs_distance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !in_angle_range(self.bs_departure_angle) || !in_angle_range(self.irs_arrival_angle) {
            return Err(Error::Config(
                "BS departure / IRS arrival angles must lie in (-90, 90] deg".into(),
            ));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("scene needs at least one target".into()));
        }
        self.targets.iter().try_for_each(Target::validate)
    }
}

/// `[1, e^{−jω}, …, e^{−j(n−1)ω}]ᵀ`. Any real `ω` is accepted.
pub fn ula_steering(n: usize, omega: f64) -> ComplexVector {
    ComplexVector::from_iterator(n, (0..n).map(|m| cis(-(m as f64) * omega)))
}

/// `∂/∂θ` of `ula_steering(n, π(sin θ − sin θ_ref))`. Pass `0.0` as the
/// reference for the SE array.
pub fn steering_derivative(n: usize, theta: f64, theta_ref: f64) -> ComplexVector {
    let omega = PI * (theta.sin() - theta_ref.sin());
    let slope = PI * theta.cos();
    ComplexVector::from_iterator(
        n,
        (0..n).map(|m| {
            let m = m as f64;
            c64(0.0, -m * slope) * cis(-m * omega)
        }),
    )
}

/// BS–IRS free-space gain `λ/(4π d)·e^{−j2π d/λ}`.
pub fn path_gain_bs_irs(distance: f64, wavelength: f64) -> num_complex::Complex64 {
    let magnitude = wavelength / (4.0 * PI * distance);
    cis(-2.0 * PI * distance / wavelength) * magnitude
}

/// Round-trip RE–target–SE radar gain `√(λ²κ/(64π³d⁴))·e^{−j4π d/λ}`.
pub fn path_gain_target(distance: f64, rcs: f64, wavelength: f64) -> num_complex::Complex64 {
    let magnitude = (wavelength.powi(2) * rcs / (64.0 * PI.powi(3) * distance.powi(4))).sqrt();
    cis(-4.0 * PI * distance / wavelength) * magnitude
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Dft,
    RandomPhase,
}

/// `N×L` reflection schedule of the REs (the unit transmit symbol is folded
/// in). Every entry has unit modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub kind: MeasurementKind,
    pub matrix: ComplexMatrix,
    /// Only meaningful for [`MeasurementKind::RandomPhase`].
    pub seed: u64,
}

impl MeasurementMatrix {
    pub fn n_res(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_slots(&self) -> usize {
        self.matrix.ncols()
    }

    /// `R_D = D·Dᴴ`.
    pub fn covariance(&self) -> ComplexMatrix {
        &self.matrix * self.matrix.adjoint()
    }
}

/// DFT columns repeat cyclically when `L > N`. Random phases are drawn
/// i.i.d. uniform on `[0, 2π)`, slot by slot.
pub fn build_measurement(kind: MeasurementKind, n: usize, l: usize, seed: u64) -> MeasurementMatrix {
    let matrix = match kind {
        MeasurementKind::Dft => ComplexMatrix::from_fn(n, l, |row, col| {
            // reduce the integer product first so the phase stays exact
            let k = (row * (col % n)) % n;
            cis(-2.0 * PI * k as f64 / n as f64)
        }),
        MeasurementKind::RandomPhase => {
            let mut rng = rng::seeded(seed);
            let mut m = ComplexMatrix::zeros(n, l);
            for col in 0..l {
                for row in 0..n {
                    m[(row, col)] = cis(2.0 * PI * rng.gen::<f64>());
                }
            }
            m
        }
    };
    MeasurementMatrix { kind, matrix, seed }
}

/// Matrices of the stacked echo model.
#[derive(Debug, Clone)]
pub struct ModelMatrices {
    /// `M×K` SE steering matrix.
    pub b: ComplexMatrix,
    /// `N×K` RE steering matrix.
    pub q: ComplexMatrix,
    /// Diagonal of `Λ`.
    pub lambda: Vec<num_complex::Complex64>,
    pub b_dot: ComplexMatrix,
    pub q_dot: ComplexMatrix,
    /// `√(N_b·P_t)·α_g`.
    pub link_gain: num_complex::Complex64,
    /// `α_k` per target.
    pub target_gains: Vec<num_complex::Complex64>,
}

impl ModelMatrices {
    pub fn lambda_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&ComplexVector::from_vec(self.lambda.clone()))
    }

    /// Noise-free echo `B·Λ·Qᴴ·D`.
    pub fn noiseless_echo(&self, d: &ComplexMatrix) -> ComplexMatrix {
        let mut b_lambda = self.b.clone();
        for (k, gain) in self.lambda.iter().enumerate() {
            b_lambda.column_mut(k).iter_mut().for_each(|z| *z *= gain);
        }
        b_lambda * (self.q.adjoint() * d)
    }
}

pub fn model_matrices(scene: &SceneConfig) -> ModelMatrices {
    let lambda_c = scene.wavelength();
    let k = scene.n_targets();
    let (m, n) = (scene.n_ses, scene.n_res);
    let theta_bi = scene.irs_arrival_angle;

    let mut b = ComplexMatrix::zeros(m, k);
    let mut q = ComplexMatrix::zeros(n, k);
    let mut b_dot = ComplexMatrix::zeros(m, k);
    let mut q_dot = ComplexMatrix::zeros(n, k);
    for (col, target) in scene.targets.iter().enumerate() {
        b.set_column(col, &ula_steering(m, se_frequency(target.angle)));
        q.set_column(col, &ula_steering(n, re_frequency(target.angle, theta_bi)));
        b_dot.set_column(col, &steering_derivative(m, target.angle, 0.0));
        q_dot.set_column(col, &steering_derivative(n, target.angle, theta_bi));
    }

    let alpha_g = path_gain_bs_irs(scene.bs_irs_distance, lambda_c);
    let link_gain = alpha_g * (scene.n_bs_antennas as f64 * scene.tx_power).sqrt();
    let target_gains: Vec<_> = scene
        .targets
        .iter()
        .map(|t| path_gain_target(t.distance, t.rcs, lambda_c))
        .collect();
    let lambda = target_gains.iter().map(|a| link_gain * a).collect();

    ModelMatrices {
        b,
        q,
        lambda,
        b_dot,
        q_dot,
        link_gain,
        target_gains,
    }
}

/// `M×L` received samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoData {
    pub y: ComplexMatrix,
    pub noise_seed: u64,
    pub noiseless: bool,
}

impl EchoData {
    pub fn n_ses(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_slots(&self) -> usize {
        self.y.ncols()
    }
}

/// Circular complex Gaussian matrix with per-entry variance `variance`,
/// filled column by column from `rng`.
pub fn complex_gaussian<R: Rng>(rows: usize, cols: usize, variance: f64, rng: &mut R) -> ComplexMatrix {
    let sd = (variance / 2.0).sqrt();
    let mut out = ComplexMatrix::zeros(rows, cols);
    for col in 0..cols {
        for row in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[(row, col)] = c64(sd * re, sd * im);
        }
    }
    out
}

pub fn synthesize_echo(
    scene: &SceneConfig,
    measurement: &MeasurementMatrix,
    noise_seed: u64,
    noiseless: bool,
) -> Result<EchoData> {
    if measurement.n_res() != scene.n_res || measurement.n_slots() != scene.n_slots {
        return Err(Error::Dimension(format!(
            "measurement matrix is {}x{} but the scene has N = {}, L = {}",
            measurement.n_res(),
            measurement.n_slots(),
            scene.n_res,
            scene.n_slots
        )));
    }
    let model = model_matrices(scene);
    let mut y = model.noiseless_echo(&measurement.matrix);
    if !noiseless {
        let mut rng = rng::seeded(noise_seed);
        y += complex_gaussian(scene.n_ses, scene.n_slots, scene.noise_power, &mut rng);
    }
    Ok(EchoData {
        y,
        noise_seed,
        noiseless,
    })
}

// ---------------------------------------------------------------------------
// Configuration file (degrees / dBm / dBsm / GHz at the boundary)

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub angle_deg: f64,
    pub distance_m: f64,
    pub rcs_dbsm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub kind: MeasurementKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MeasurementSpec {
    fn default() -> Self {
        Self {
            kind: MeasurementKind::Dft,
            seed: 0,
        }
    }
}

impl MeasurementSpec {
    pub fn build(&self, n: usize, l: usize) -> MeasurementMatrix {
        build_measurement(self.kind, n, l, self.seed)
    }
}

/// On-disk scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub n_bs_antennas: usize,
    pub n_res: usize,
    pub n_ses: usize,
    pub n_slots: usize,
    pub carrier_freq_ghz: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub bs_irs_distance_m: f64,
    pub bs_departure_angle_deg: f64,
    pub irs_arrival_angle_deg: f64,
    pub targets: Vec<TargetFile>,
    #[serde(default)]
    pub measurement: MeasurementSpec,
}

impl SceneFile {
    pub fn to_scene(&self) -> Result<SceneConfig> {
        let scene = SceneConfig {
            n_bs_antennas: self.n_bs_antennas,
            n_res: self.n_res,
            n_ses: self.n_ses,
            n_slots: self.n_slots,
            carrier_freq: self.carrier_freq_ghz * 1e9,
            tx_power: dbm_to_watts(self.tx_power_dbm),
            noise_power: dbm_to_watts(self.noise_power_dbm),
            bs_irs_distance: self.bs_irs_distance_m,
            bs_departure_angle: self.bs_departure_angle_deg.to_radians(),
            irs_arrival_angle: self.irs_arrival_angle_deg.to_radians(),
            targets: self
                .targets
                .iter()
                .map(|t| Target::new(t.angle_deg.to_radians(), t.distance_m, dbsm_to_m2(t.rcs_dbsm)))
                .collect(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_scene(scene: &SceneConfig, measurement: MeasurementSpec) -> Self {
        Self {
            n_bs_antennas: scene.n_bs_antennas,
            n_res: scene.n_res,
            n_ses: scene.n_ses,
            n_slots: scene.n_slots,
            carrier_freq_ghz: scene.carrier_freq / 1e9,
            tx_power_dbm: watts_to_dbm(scene.tx_power),
            noise_power_dbm: watts_to_dbm(scene.noise_power),
            bs_irs_distance_m: scene.bs_irs_distance,
            bs_departure_angle_deg: scene.bs_departure_angle.to_degrees(),
            irs_arrival_angle_deg: scene.irs_arrival_angle.to_degrees(),
            targets: scene
                .targets
                .iter()
                .map(|t| TargetFile {
                    angle_deg: t.angle.to_degrees(),
                    distance_m: t.distance,
                    rcs_dbsm: m2_to_dbsm(t.rcs),
                })
                .collect(),
            measurement,
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        crate::config::read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{frobenius, real};

    fn close(a: num_complex::Complex64, b: num_complex::Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn steering_zero_frequency_is_ones() {
        let v = ula_steering(4, 0.0);
        assert!(v.iter().all(|z| *z == real(1.0)));
    }

    #[test]
    fn steering_quarter_turn() {
        let v = ula_steering(2, PI / 2.0);
        assert!(close(v[0], real(1.0), 1e-15));
        assert!(close(v[1], c64(0.0, -1.0), 1e-15));
    }

    #[test]
    fn steering_unit_modulus_and_norm() {
        let v = ula_steering(8, se_frequency(30f64.to_radians()));
        assert!((v.norm_squared() - 8.0).abs() < 1e-12);
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn steering_accepts_frequencies_beyond_pi() {
        // sin(30°) − sin(−60°) = 1.366 > 1
        let omega = re_frequency(30f64.to_radians(), (-60f64).to_radians());
        assert!(omega > PI);
        let v = ula_steering(16, omega);
        for (m, z) in v.iter().enumerate() {
            let want = cis(-(m as f64) * omega);
            assert!(close(*z, want, 1e-15));
        }
    }

    #[test]
    fn derivative_at_broadside() {
        let d = steering_derivative(6, 0.0, 0.0);
        for (m, z) in d.iter().enumerate() {
            assert!(close(*z, c64(0.0, -(m as f64) * PI), 1e-12));
        }
    }

    #[test]
    fn derivative_vanishes_at_endfire() {
        let d = steering_derivative(5, PI / 2.0, 0.0);
        assert!(d.iter().all(|z| z.norm() < 1e-14 * 5.0 * PI));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let theta = 20f64.to_radians();
        let h = 1e-6;
        for theta_ref in [0.0, (-60f64).to_radians()] {
            let analytic = steering_derivative(8, theta, theta_ref);
            let plus = ula_steering(8, PI * ((theta + h).sin() - theta_ref.sin()));
            let minus = ula_steering(8, PI * ((theta - h).sin() - theta_ref.sin()));
            let fd = (plus - minus) / real(2.0 * h);
            for m in 0..8 {
                assert!(close(analytic[m], fd[m], 1e-6), "entry {m}");
            }
        }
    }

    #[test]
    fn bs_irs_gain() {
        let lambda = SPEED_OF_LIGHT / 28e9;
        let g = path_gain_bs_irs(30.0, lambda);
        // independent evaluation: λ / (4π d)
        let want = lambda / (4.0 * PI * 30.0);
        assert!((g.norm() - want).abs() <= 1e-15 * want);
        // high-precision reference value
        assert!((g.norm() - 2.840_086_404_307_704e-5).abs() < 1e-18);

        let full_turn = path_gain_bs_irs(lambda, lambda);
        assert!(full_turn.arg().abs() < 1e-9);
        let ratio = path_gain_bs_irs(60.0, lambda).norm() / g.norm();
        assert!((ratio - 0.5).abs() < 1e-14);
    }

    #[test]
    fn target_gain() {
        let lambda = SPEED_OF_LIGHT / 28e9;
        let a = path_gain_target(5.0, 10.0, lambda);
        let want = (lambda * lambda * 10.0 / (64.0 * PI * PI * PI * 625.0)).sqrt();
        assert!((a.norm() - want).abs() <= 1e-15 * want);
        assert!((a.norm() - 3.040_239_987_529_79e-5).abs() < 1e-18);

        let quarter = path_gain_target(10.0, 10.0, lambda).norm() / a.norm();
        assert!((quarter - 0.25).abs() < 1e-14);
        let half_wave = path_gain_target(lambda / 2.0, 1.0, lambda);
        assert!(half_wave.arg().abs() < 1e-9);
    }

    #[test]
    fn dft_two_point() {
        let d = build_measurement(MeasurementKind::Dft, 2, 2, 0).matrix;
        assert!(close(d[(0, 0)], real(1.0), 1e-15));
        assert!(close(d[(0, 1)], real(1.0), 1e-15));
        assert!(close(d[(1, 0)], real(1.0), 1e-15));
        assert!(close(d[(1, 1)], real(-1.0), 1e-15));
    }

    #[test]
    fn dft_rows_orthogonal() {
        for n in [3, 8, 32] {
            let d = build_measurement(MeasurementKind::Dft, n, n, 0);
            let r = d.covariance();
            let want = ComplexMatrix::identity(n, n).scale(n as f64);
            for (a, b) in r.iter().zip(want.iter()) {
                assert!(close(*a, *b, 1e-9));
            }
        }
    }

    #[test]
    fn dft_columns_cycle_when_longer_than_n() {
        let d = build_measurement(MeasurementKind::Dft, 4, 10, 0).matrix;
        for l in 4..10 {
            assert_eq!(d.column(l), d.column(l % 4));
        }
    }

    #[test]
    fn random_phase_reproducible_and_unit_modulus() {
        let a = build_measurement(MeasurementKind::RandomPhase, 8, 12, 99);
        let b = build_measurement(MeasurementKind::RandomPhase, 8, 12, 99);
        let c = build_measurement(MeasurementKind::RandomPhase, 8, 12, 100);
        assert_eq!(a, b);
        assert_ne!(a.matrix, c.matrix);
        assert!(a.matrix.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    fn single_target_scene(angle_deg: f64) -> SceneConfig {
        SceneConfig {
            irs_arrival_angle: 0.0,
            ..SceneConfig::desk_scale().with_target_angles_deg(&[angle_deg])
        }
    }

    #[test]
    fn model_broadside_single_target() {
        let scene = single_target_scene(0.0);
        let mm = model_matrices(&scene);
        assert!(mm.b.iter().all(|z| close(*z, real(1.0), 1e-15)));
        assert!(mm.q.iter().all(|z| close(*z, real(1.0), 1e-15)));
        let lambda = scene.wavelength();
        let want = (scene.n_bs_antennas as f64 * scene.tx_power).sqrt()
            * path_gain_bs_irs(scene.bs_irs_distance, lambda)
            * path_gain_target(5.0, 10.0, lambda);
        assert!(close(mm.lambda[0], want, 1e-12 * want.norm()));
    }

    #[test]
    fn model_derivatives_match_finite_differences() {
        let scene = SceneConfig::desk_scale();
        let mm = model_matrices(&scene);
        let h = 1e-6;
        for (k, t) in scene.targets.iter().enumerate() {
            let bump = |delta: f64| {
                let mut s = scene.clone();
                s.targets[k].angle = t.angle + delta;
                model_matrices(&s)
            };
            let (p, m) = (bump(h), bump(-h));
            for r in 0..scene.n_ses {
                let fd = (p.b[(r, k)] - m.b[(r, k)]) / real(2.0 * h);
                assert!(close(mm.b_dot[(r, k)], fd, 1e-6));
            }
            for r in 0..scene.n_res {
                let fd = (p.q[(r, k)] - m.q[(r, k)]) / real(2.0 * h);
                // entries grow like n·π, so compare relative to that scale
                assert!(close(mm.q_dot[(r, k)], fd, 1e-6 * (1.0 + r as f64)));
            }
        }
    }

    fn singular_values(y: &ComplexMatrix) -> Vec<f64> {
        let mut s: Vec<f64> = y.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    #[test]
    fn noiseless_single_target_is_rank_one() {
        let scene = SceneConfig::desk_scale().with_target_angles_deg(&[12.0]);
        let d = build_measurement(MeasurementKind::Dft, scene.n_res, scene.n_slots, 0);
        let echo = synthesize_echo(&scene, &d, 0, true).unwrap();
        let s = singular_values(&echo.y);
        assert!(s[1] < 1e-10 * s[0]);
    }

    #[test]
    fn noiseless_three_targets_rank_three() {
        let scene = SceneConfig::desk_scale();
        let d = build_measurement(MeasurementKind::RandomPhase, scene.n_res, scene.n_slots, 5);
        let echo = synthesize_echo(&scene, &d, 0, true).unwrap();
        let s = singular_values(&echo.y);
        assert!(s[2] > 1e-6 * s[0]);
        assert!(s[3] < 1e-10 * s[0]);
    }

    #[test]
    fn noise_variance_matches_configuration() {
        let mut scene = SceneConfig::desk_scale();
        scene.n_ses = 100;
        scene.n_slots = 200;
        scene.n_res = 200;
        scene.tx_power = 1e-30; // signal far below the noise floor
        let d = build_measurement(MeasurementKind::Dft, scene.n_res, scene.n_slots, 0);
        let echo = synthesize_echo(&scene, &d, 1234, false).unwrap();
        let n = (scene.n_ses * scene.n_slots) as f64;
        let var = echo.y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((var / scene.noise_power - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn echo_is_reproducible() {
        let scene = SceneConfig::desk_scale();
        let d = build_measurement(MeasurementKind::Dft, scene.n_res, scene.n_slots, 0);
        let a = synthesize_echo(&scene, &d, 77, false).unwrap();
        let b = synthesize_echo(&scene, &d, 77, false).unwrap();
        assert_eq!(a, b);
        let c = synthesize_echo(&scene, &d, 78, false).unwrap();
        assert!(frobenius(&(a.y - c.y)) > 0.0);
    }

    #[test]
    fn echo_rejects_mismatched_measurement() {
        let scene = SceneConfig::desk_scale();
        let d = build_measurement(MeasurementKind::Dft, scene.n_res + 1, scene.n_slots, 0);
        assert!(matches!(synthesize_echo(&scene, &d, 0, true), Err(Error::Dimension(_))));
    }

    #[test]
    fn validation_rejects_bad_scenes() {
        let mut s = SceneConfig::desk_scale();
        s.noise_power = 0.0;
        assert!(s.validate().is_err());
        let s = SceneConfig::desk_scale().with_target_angles_deg(&[]);
        assert!(s.validate().is_err());
        let s = SceneConfig::desk_scale().with_target_angles_deg(&[-90.0]);
        assert!(s.validate().is_err());
        assert!(SceneConfig::desk_scale().with_target_angles_deg(&[90.0]).validate().is_ok());
    }

    #[test]
    fn scene_file_round_trip() {
        let json = r#"{
            "n_bs_antennas": 64, "n_res": 32, "n_ses": 8, "n_slots": 32,
            "carrier_freq_ghz": 28.0, "tx_power_dbm": 20.0, "noise_power_dbm": -120.0,
            "bs_irs_distance_m": 30.0, "bs_departure_angle_deg": -60.0,
            "irs_arrival_angle_deg": -60.0,
            "targets": [{"angle_deg": -10.0, "distance_m": 5.0, "rcs_dbsm": 10.0}],
            "measurement": {"kind": "random_phase", "seed": 3}
        }"#;
        let file: SceneFile = serde_json::from_str(json).unwrap();
        let scene = file.to_scene().unwrap();
        assert!((scene.tx_power - 0.1).abs() < 1e-15);
        assert!((scene.targets[0].rcs - 10.0).abs() < 1e-12);
        assert_eq!(file.measurement.kind, MeasurementKind::RandomPhase);
        let back = SceneFile::from_scene(&scene, file.measurement);
        assert!((back.tx_power_dbm - 20.0).abs() < 1e-12);
        assert!((back.targets[0].angle_deg + 10.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn steering_conjugate_symmetry(n in 1usize..40, omega in -20.0f64..20.0) {
                let a = ula_steering(n, omega);
                let b = ula_steering(n, -omega);
                for (x, y) in a.iter().zip(b.iter()) {
                    prop_assert_eq!(*x, y.conj());
                }
                prop_assert!((a.norm_squared() - n as f64).abs() < 1e-9);
            }

            #[test]
            fn power_conversions_round_trip(dbm in -150.0f64..60.0, dbsm in -40.0f64..40.0) {
                let w = dbm_to_watts(dbm);
                prop_assert!((dbm_to_watts(watts_to_dbm(w)) / w - 1.0).abs() < 1e-12);
                let k = dbsm_to_m2(dbsm);
                prop_assert!((dbsm_to_m2(m2_to_dbsm(k)) / k - 1.0).abs() < 1e-12);
            }
        }
    }
}
