//! Finite-multipath full-dimensional channel.
//!
//! UE `l` sees `h_l = sum_p gamma_{l,p} a(phi_{l,p}, theta_{l,p})` with
//! `gamma ~ CN(0, 1/N_P)` and a `1 x M` steering row `a`. A [`Drop`] freezes
//! the path angles of every UE; only the gains are redrawn per realization,
//! so covariances and every analytic quantity are exact per drop.
//!
//! Angles are in degrees on every public signature and converted to radians
//! once, inside the steering-vector routines.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cis, kron_row, ComplexMatrix, C64};

pub const DEFAULT_N_PATHS: usize = 20;
pub const DEFAULT_ASD_AZ_DEG: f64 = 10.0;
pub const DEFAULT_ASD_EL_DEG: f64 = 5.0;
/// Spacings in wavelengths along x (azimuth) and z (elevation).
pub const DEFAULT_SPACING_X: f64 = 0.5;
pub const DEFAULT_SPACING_Z: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    /// Linear array on the z axis.
    Ula,
    /// Planar array in the x-z plane.
    Upa,
}

/// BS array. Spacings are normalized by the carrier wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    m_x: usize,
    m_z: usize,
    d_x: f64,
    d_z: f64,
}

impl ArrayGeometry {
    pub fn ula(m: usize, d_z: f64) -> Result<Self> {
        Self::new(ArrayKind::Ula, 1, m, 0.5, d_z)
    }

    pub fn upa(m_x: usize, m_z: usize, d_x: f64, d_z: f64) -> Result<Self> {
        Self::new(ArrayKind::Upa, m_x, m_z, d_x, d_z)
    }

    /// UPA with `m` elements laid out as close to square as the divisors of
    /// `m` allow: `m_x` is the largest divisor not above `sqrt(m)`, so 128
    /// becomes 8 columns by 16 rows and a prime count degenerates to a
    /// single column.
    pub fn upa_with_antennas(m: usize, d_x: f64, d_z: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("antenna count must be >= 1"));
        }
        let m_x = (1..=m).take_while(|d| d * d <= m).filter(|d| m % d == 0).last().unwrap_or(1);
        Self::upa(m_x, m / m_x, d_x, d_z)
    }

    pub fn new(kind: ArrayKind, m_x: usize, m_z: usize, d_x: f64, d_z: f64) -> Result<Self> {
        if m_x == 0 || m_z == 0 {
            return Err(Error::InvalidParameter("antenna counts must be >= 1"));
        }
        if kind == ArrayKind::Ula && m_x != 1 {
            return Err(Error::InvalidParameter("a ULA has m_x = 1"));
        }
        if !(d_x > 0.0 && d_z > 0.0 && d_x.is_finite() && d_z.is_finite()) {
            return Err(Error::InvalidParameter("element spacings must be positive"));
        }
        Ok(ArrayGeometry { kind, m_x, m_z, d_x, d_z })
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn m_x(&self) -> usize {
        self.m_x
    }

    pub fn m_z(&self) -> usize {
        self.m_z
    }

    pub fn d_x(&self) -> f64 {
        self.d_x
    }

    pub fn d_z(&self) -> f64 {
        self.d_z
    }

    pub fn num_antennas(&self) -> usize {
        self.m_x * self.m_z
    }

    /// Steering row for either array kind; a ULA ignores the elevation.
    pub fn steering(&self, az_deg: f64, el_deg: f64) -> Vec<C64> {
        match self.kind {
            ArrayKind::Ula => ula_row(self.m_z, self.d_z, az_deg),
            ArrayKind::Upa => upa_row(self, az_deg, el_deg),
        }
    }
}

fn phase_ramp(n: usize, spacing: f64, direction_cosine: f64) -> Vec<C64> {
    let step = -2.0 * PI * spacing * direction_cosine;
    (0..n).map(|k| if k == 0 { C64::new(1.0, 0.0) } else { cis(step * k as f64) }).collect()
}

fn ula_row(m: usize, d_z: f64, az_deg: f64) -> Vec<C64> {
    phase_ramp(m, d_z, libm::cos(az_deg.to_radians()))
}

fn upa_row(geom: &ArrayGeometry, az_deg: f64, el_deg: f64) -> Vec<C64> {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    let sin_el = libm::sin(el);
    let a_x = phase_ramp(geom.m_x, geom.d_x, sin_el * libm::cos(az));
    let a_z = phase_ramp(geom.m_z, geom.d_z, sin_el * libm::sin(az));
    kron_row(&a_x, &a_z)
}

/// `[1, e^{-j2pi d_z cos(az)}, ..., e^{-j2pi d_z (M-1) cos(az)}]`.
pub fn steering_vector_ula(geom: &ArrayGeometry, az_deg: f64) -> Result<Vec<C64>> {
    match geom.kind {
        ArrayKind::Ula => Ok(ula_row(geom.m_z, geom.d_z, az_deg)),
        ArrayKind::Upa => Err(Error::WrongGeometry),
    }
}

/// `a_x(az, el) (x) a_z(az, el)` where `a_x` ramps with `sin(el) cos(az)`
/// over spacing `d_x` and `a_z` with `sin(el) sin(az)` over `d_z`.
pub fn steering_vector_upa(geom: &ArrayGeometry, az_deg: f64, el_deg: f64) -> Result<Vec<C64>> {
    match geom.kind {
        ArrayKind::Upa => Ok(upa_row(geom, az_deg, el_deg)),
        ArrayKind::Ula => Err(Error::WrongGeometry),
    }
}

/// Large-scale description of one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeGeometry {
    pub az_los_deg: f64,
    pub el_los_deg: f64,
    /// Half-width of the azimuth support of the path angles.
    pub az_asd_deg: f64,
    pub el_asd_deg: f64,
    /// Linear power gain (pathloss and shadowing).
    pub link_gain: f64,
}

impl UeGeometry {
    pub fn new(az_los_deg: f64, el_los_deg: f64, az_asd_deg: f64, el_asd_deg: f64, link_gain: f64) -> Result<Self> {
        let ue = UeGeometry {
            az_los_deg,
            el_los_deg,
            az_asd_deg,
            el_asd_deg,
            link_gain,
        };
        ue.validate()?;
        Ok(ue)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.az_asd_deg >= 0.0 && self.el_asd_deg >= 0.0) {
            return Err(Error::InvalidParameter("angular spreads must be >= 0"));
        }
        if !(self.link_gain > 0.0 && self.link_gain.is_finite()) {
            return Err(Error::InvalidParameter("link gain must be positive"));
        }
        if !(self.az_los_deg.is_finite() && self.el_los_deg.is_finite()) {
            return Err(Error::InvalidParameter("LOS angles must be finite"));
        }
        Ok(())
    }
}

/// UEs on a line in angle space: UE `k` sits at
/// `reference + k * separation` in both azimuth and elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeLayout {
    pub reference_az_deg: f64,
    pub reference_el_deg: f64,
    pub az_separation_deg: f64,
    pub el_separation_deg: f64,
    pub az_asd_deg: f64,
    pub el_asd_deg: f64,
}

impl UeLayout {
    pub fn ues(&self, n_ues: usize, link_gains: Option<&[f64]>) -> Result<Vec<UeGeometry>> {
        if let Some(g) = link_gains {
            if g.len() != n_ues {
                return Err(Error::DimensionMismatch("one link gain per UE"));
            }
        }
        (0..n_ues)
            .map(|k| {
                UeGeometry::new(
                    self.reference_az_deg + k as f64 * self.az_separation_deg,
                    self.reference_el_deg + k as f64 * self.el_separation_deg,
                    self.az_asd_deg,
                    self.el_asd_deg,
                    link_gains.map_or(1.0, |g| g[k]),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAngle {
    pub az_deg: f64,
    pub el_deg: f64,
}

/// In-support distribution of path angles around the LOS direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleDistribution {
    /// Uniform on `[los - spread, los + spread]`, independently per
    /// dimension and path.
    #[default]
    Uniform,
}

impl AngleDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, center: f64, half_width: f64, rng: &mut R) -> f64 {
        match self {
            AngleDistribution::Uniform => {
                let u: f64 = rng.random();
                center + half_width * (2.0 * u - 1.0)
            }
        }
    }
}

/// Frozen per-drop geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Drop {
    ues: Vec<UeGeometry>,
    n_paths: usize,
    path_angles: Vec<Vec<PathAngle>>,
}

impl Drop {
    /// Builds a drop from explicit angle tables.
    pub fn from_angles(ues: Vec<UeGeometry>, path_angles: Vec<Vec<PathAngle>>) -> Result<Self> {
        if ues.is_empty() || ues.len() != path_angles.len() {
            return Err(Error::DimensionMismatch("one angle table per UE"));
        }
        let n_paths = path_angles[0].len();
        if n_paths == 0 || path_angles.iter().any(|p| p.len() != n_paths) {
            return Err(Error::DimensionMismatch("every UE needs the same nonzero path count"));
        }
        for ue in &ues {
            ue.validate()?;
        }
        Ok(Drop { ues, n_paths, path_angles })
    }

    pub fn ues(&self) -> &[UeGeometry] {
        &self.ues
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn path_angles(&self, ue: usize) -> &[PathAngle] {
        &self.path_angles[ue]
    }

    pub fn link_gains(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.link_gain).collect()
    }
}

/// Draws path angles UE by UE and path by path (azimuth, then elevation).
pub fn draw_drop<R: Rng + ?Sized>(ues: &[UeGeometry], n_paths: usize, rng: &mut R) -> Result<Drop> {
    draw_drop_with(AngleDistribution::Uniform, ues, n_paths, rng)
}

pub fn draw_drop_with<R: Rng + ?Sized>(
    dist: AngleDistribution,
    ues: &[UeGeometry],
    n_paths: usize,
    rng: &mut R,
) -> Result<Drop> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be >= 1"));
    }
    let path_angles = ues
        .iter()
        .map(|ue| {
            (0..n_paths)
                .map(|_| {
                    let az_deg = dist.sample(ue.az_los_deg, ue.az_asd_deg, rng);
                    let el_deg = dist.sample(ue.el_los_deg, ue.el_asd_deg, rng);
                    PathAngle { az_deg, el_deg }
                })
                .collect()
        })
        .collect();
    Drop::from_angles(ues.to_vec(), path_angles)
}

/// Per-UE `M x M` covariances `R_l = E{h_l^H h_l}` and the mean Gram
/// matrix `E{HH^H}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub per_ue: Vec<ComplexMatrix>,
    pub mean_gram: ComplexMatrix,
}

/// Steering rows of one drop, cached for repeated fading draws.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    num_antennas: usize,
    n_paths: usize,
    /// `N_P x M` per UE.
    responses: Vec<ComplexMatrix>,
}

impl ChannelSampler {
    pub fn new(drop: &Drop, geom: &ArrayGeometry) -> Result<Self> {
        let responses = (0..drop.num_ues())
            .map(|ue| {
                let rows: Vec<Vec<C64>> =
                    drop.path_angles(ue).iter().map(|p| geom.steering(p.az_deg, p.el_deg)).collect();
                ComplexMatrix::from_rows(&rows)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelSampler {
            num_antennas: geom.num_antennas(),
            n_paths: drop.n_paths(),
            responses,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.responses.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn path_responses(&self, ue: usize) -> &ComplexMatrix {
        &self.responses[ue]
    }

    /// One `L x M` realization. Gains are drawn UE-major, path-minor, real
    /// part first.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        let scale = 1.0 / (SQRT_2 * libm::sqrt(self.n_paths as f64));
        let mut h = ComplexMatrix::zeros(self.num_ues(), self.num_antennas);
        for (ue, resp) in self.responses.iter().enumerate() {
            let row = h.row_mut(ue);
            for p in 0..self.n_paths {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let gain = C64::new(re, im) * scale;
                for (out, &a) in row.iter_mut().zip(resp.row(p)) {
                    *out += gain * a;
                }
            }
        }
        h
    }

    /// `R_l = (1/N_P) sum_p a_p^H a_p`, exact for the frozen angles.
    pub fn covariance(&self, ue: usize) -> ComplexMatrix {
        let resp = &self.responses[ue];
        let m = self.num_antennas;
        let inv_np = 1.0 / self.n_paths as f64;
        let mut r = ComplexMatrix::zeros(m, m);
        for p in 0..self.n_paths {
            let a = resp.row(p);
            for i in 0..m {
                let ai = a[i].conj();
                for j in i..m {
                    r[(i, j)] += ai * a[j];
                }
            }
        }
        for i in 0..m {
            r[(i, i)] = C64::new(r[(i, i)].re * inv_np, 0.0);
            for j in i + 1..m {
                let v = r[(i, j)] * inv_np;
                r[(i, j)] = v;
                r[(j, i)] = v.conj();
            }
        }
        r
    }

    pub fn covariances(&self) -> CovarianceSet {
        CovarianceSet {
            per_ue: (0..self.num_ues()).map(|ue| self.covariance(ue)).collect(),
            mean_gram: compute_mean_gram(self.num_ues(), self.num_antennas),
        }
    }
}

pub fn draw_channel<R: Rng + ?Sized>(drop: &Drop, geom: &ArrayGeometry, rng: &mut R) -> Result<ComplexMatrix> {
    Ok(ChannelSampler::new(drop, geom)?.draw(rng))
}

pub fn compute_covariance(drop: &Drop, geom: &ArrayGeometry, ue: usize) -> Result<ComplexMatrix> {
    if ue >= drop.num_ues() {
        return Err(Error::InvalidParameter("UE index out of range"));
    }
    Ok(ChannelSampler::new(drop, geom)?.covariance(ue))
}

/// `E{HH^H} = M I_L`: cross terms vanish because gains are independent and
/// zero-mean across UEs, and each diagonal term is `(1/N_P) sum_p |a_p|^2`.
pub fn compute_mean_gram(l: usize, m: usize) -> ComplexMatrix {
    ComplexMatrix::identity(l).scale_real(m as f64)
}

/// Log-distance pathloss with log-normal shadowing:
/// `gain_dB = -(PL0 + 10 n log10(d / d0)) + X`, `X ~ N(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub reference_loss_db: f64,
    pub reference_distance_m: f64,
    pub exponent: f64,
    pub shadowing_std_db: f64,
}

impl PathLossModel {
    pub const EXPONENT: f64 = 3.67;
    pub const SHADOWING_STD_DB: f64 = 4.0;

    /// Intercept `22.7 + 26 log10(f_GHz)` at 1 m.
    pub fn for_carrier_ghz(f_ghz: f64) -> Self {
        PathLossModel {
            reference_loss_db: 22.7 + 26.0 * libm::log10(f_ghz),
            reference_distance_m: 1.0,
            exponent: Self::EXPONENT,
            shadowing_std_db: Self::SHADOWING_STD_DB,
        }
    }

    pub fn mean_loss_db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::InvalidDistance(distance_m));
        }
        Ok(self.reference_loss_db + 10.0 * self.exponent * libm::log10(distance_m / self.reference_distance_m))
    }

    pub fn link_gain_db<R: Rng + ?Sized>(&self, distance_m: f64, rng: &mut R, shadow_enabled: bool) -> Result<f64> {
        let mean = -self.mean_loss_db(distance_m)?;
        if shadow_enabled {
            let x: f64 = StandardNormal.sample(rng);
            Ok(mean + self.shadowing_std_db * x)
        } else {
            Ok(mean)
        }
    }
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self::for_carrier_ghz(3.7)
    }
}

/// Linear link gain; consumes no randomness when shadowing is off.
pub fn link_gain<R: Rng + ?Sized>(
    model: &PathLossModel,
    distance_m: f64,
    rng: &mut R,
    shadow_enabled: bool,
) -> Result<f64> {
    let db = model.link_gain_db(distance_m, rng, shadow_enabled)?;
    Ok(libm::pow(10.0, db / 10.0))
}

/// Distance of a point uniform over the annulus `min_m <= r <= radius_m`.
pub fn draw_cell_distance<R: Rng + ?Sized>(radius_m: f64, min_m: f64, rng: &mut R) -> Result<f64> {
    if !(radius_m > 0.0 && min_m >= 0.0 && min_m < radius_m) {
        return Err(Error::InvalidParameter("cell radius must exceed the minimum distance"));
    }
    let u: f64 = rng.random();
    Ok(libm::sqrt(min_m * min_m + u * (radius_m * radius_m - min_m * min_m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gram;
    use crate::stats::MeanAccumulator;
    use crate::testutil::hermitian_eigenvalues;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn assert_close(a: &[C64], b: &[C64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() <= tol, "{x} vs {y}");
        }
    }

    fn default_upa(m_x: usize, m_z: usize) -> ArrayGeometry {
        ArrayGeometry::upa(m_x, m_z, DEFAULT_SPACING_X, DEFAULT_SPACING_Z).unwrap()
    }

    fn layout(az_sep: f64, el_sep: f64) -> UeLayout {
        UeLayout {
            reference_az_deg: 0.0,
            reference_el_deg: 100.0,
            az_separation_deg: az_sep,
            el_separation_deg: el_sep,
            az_asd_deg: DEFAULT_ASD_AZ_DEG,
            el_asd_deg: DEFAULT_ASD_EL_DEG,
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(ArrayKind::Ula, 2, 4, 0.5, 0.5).is_err());
        assert!(ArrayGeometry::upa(0, 4, 0.5, 0.5).is_err());
        assert!(ArrayGeometry::upa(2, 4, 0.0, 0.5).is_err());
        assert_eq!(ArrayGeometry::ula(8, 0.5).unwrap().num_antennas(), 8);
        let g = ArrayGeometry::upa_with_antennas(128, 0.5, 0.7).unwrap();
        assert_eq!((g.m_x(), g.m_z()), (8, 16));
        let g = ArrayGeometry::upa_with_antennas(10, 0.5, 0.7).unwrap();
        assert_eq!((g.m_x(), g.m_z()), (2, 5));
        let g = ArrayGeometry::upa_with_antennas(256, 0.5, 0.7).unwrap();
        assert_eq!((g.m_x(), g.m_z()), (16, 16));
    }

    #[test]
    fn ula_examples() {
        let one = C64::new(1.0, 0.0);
        let g = ArrayGeometry::ula(5, 0.5).unwrap();
        assert_close(&steering_vector_ula(&g, 90.0).unwrap(), &[one; 5], 1e-14);
        let g = ArrayGeometry::ula(2, 0.5).unwrap();
        assert_close(&steering_vector_ula(&g, 0.0).unwrap(), &[one, -one], 1e-14);
        assert_close(&steering_vector_ula(&g, 60.0).unwrap(), &[one, C64::new(0.0, -1.0)], 1e-14);
        assert_eq!(steering_vector_upa(&g, 0.0, 0.0), Err(Error::WrongGeometry));
    }

    #[test]
    fn upa_examples() {
        let one = C64::new(1.0, 0.0);
        let g = default_upa(1, 1);
        assert_eq!(steering_vector_upa(&g, 37.0, 81.0).unwrap(), vec![one]);
        let g = default_upa(3, 4);
        assert_close(&steering_vector_upa(&g, 23.0, 0.0).unwrap(), &[one; 12], 1e-15);
        let g = ArrayGeometry::upa(2, 2, 0.5, 0.5).unwrap();
        assert_close(&steering_vector_upa(&g, 0.0, 90.0).unwrap(), &[one, one, -one, -one], 1e-14);
        assert_eq!(steering_vector_ula(&g, 0.0), Err(Error::WrongGeometry));
    }

    #[test]
    fn upa_single_column_at_horizon_is_a_ula() {
        let upa = ArrayGeometry::upa(1, 6, 0.5, 0.7).unwrap();
        let ula = ArrayGeometry::ula(6, 0.7).unwrap();
        for k in 0..=36 {
            let az = -90.0 + 5.0 * k as f64;
            let a = steering_vector_upa(&upa, az, 90.0).unwrap();
            // sin(az) = cos(90 - az)
            let b = steering_vector_ula(&ula, 90.0 - az).unwrap();
            assert_close(&a, &b, 1e-12);
        }
    }

    #[test]
    fn steering_entries_unit_modulus() {
        let g = default_upa(8, 16);
        for (az, el) in [(0.0, 100.0), (-47.0, 12.0), (133.0, 171.0)] {
            let a = g.steering(az, el);
            assert_eq!(a[0], C64::new(1.0, 0.0));
            assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn degenerate_support_freezes_angles() {
        let ue = UeGeometry::new(12.0, 95.0, 0.0, 0.0, 1.0).unwrap();
        let drop = draw_drop(&[ue, ue], 7, &mut rng(1)).unwrap();
        for l in 0..2 {
            for p in drop.path_angles(l) {
                assert_eq!((p.az_deg, p.el_deg), (12.0, 95.0));
            }
        }
    }

    #[test]
    fn drop_is_deterministic_and_within_support() {
        let ues = layout(30.0, 15.0).ues(4, None).unwrap();
        let a = draw_drop(&ues, 20, &mut rng(5)).unwrap();
        let b = draw_drop(&ues, 20, &mut rng(5)).unwrap();
        assert_eq!(a, b);
        for (l, ue) in ues.iter().enumerate() {
            for p in a.path_angles(l) {
                assert!((p.az_deg - ue.az_los_deg).abs() <= ue.az_asd_deg);
                assert!((p.el_deg - ue.el_los_deg).abs() <= ue.el_asd_deg);
            }
        }
        assert!(draw_drop(&ues, 0, &mut rng(5)).is_err());
    }

    #[test]
    fn uniform_path_angle_mean() {
        let ue = UeGeometry::new(40.0, 90.0, 10.0, 0.0, 1.0).unwrap();
        let drop = draw_drop(&[ue], 100_000, &mut rng(9)).unwrap();
        let mean = drop.path_angles(0).iter().map(|p| p.az_deg).sum::<f64>() / 1e5;
        // uniform on +-10 deg has std 10/sqrt(3)
        let tol = 3.0 * (10.0 / 3f64.sqrt()) / 1e5f64.sqrt();
        assert!((mean - 40.0).abs() < tol, "mean {mean}");
    }

    #[test]
    fn single_path_has_flat_magnitude() {
        let ues = layout(30.0, 15.0).ues(3, None).unwrap();
        let drop = draw_drop(&ues, 1, &mut rng(2)).unwrap();
        let h = draw_channel(&drop, &default_upa(4, 4), &mut rng(3)).unwrap();
        for l in 0..3 {
            let m0 = h[(l, 0)].norm();
            assert!(h.row(l).iter().all(|z| (z.norm() - m0).abs() < 1e-12));
        }
    }

    #[test]
    fn channel_energy_is_m_on_average() {
        let geom = default_upa(4, 4);
        let ues = layout(30.0, 15.0).ues(1, None).unwrap();
        let drop = draw_drop(&ues, 20, &mut rng(4)).unwrap();
        let sampler = ChannelSampler::new(&drop, &geom).unwrap();
        let mut r = rng(6);
        let acc: MeanAccumulator = (0..10_000).map(|_| sampler.draw(&mut r).frobenius_norm_sq()).collect();
        let m = 16.0;
        assert!((acc.mean() - m).abs() < 5.0 * m / 100.0, "mean {}", acc.mean());
    }

    #[test]
    fn fading_is_deterministic_and_leaves_drop_untouched() {
        let geom = default_upa(2, 4);
        let ues = layout(10.0, 15.0).ues(2, None).unwrap();
        let drop = draw_drop(&ues, 5, &mut rng(4)).unwrap();
        let before = drop.clone();
        let a = draw_channel(&drop, &geom, &mut rng(77)).unwrap();
        let b = draw_channel(&drop, &geom, &mut rng(77)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, draw_channel(&drop, &geom, &mut rng(78)).unwrap());
        assert_eq!(drop, before);
    }

    #[test]
    fn covariance_trace_and_rank_one() {
        let geom = default_upa(4, 4);
        let ues = layout(30.0, 15.0).ues(2, None).unwrap();
        let drop = draw_drop(&ues, 20, &mut rng(8)).unwrap();
        for ue in 0..2 {
            let r = compute_covariance(&drop, &geom, ue).unwrap();
            assert!((r.trace().re - 16.0).abs() < 1e-9);
            assert!(r.is_hermitian(0.0));
            assert!(hermitian_eigenvalues(&r).iter().all(|&e| e > -1e-10));
        }
        assert!(compute_covariance(&drop, &geom, 2).is_err());

        let drop = draw_drop(&ues, 1, &mut rng(8)).unwrap();
        let r = compute_covariance(&drop, &geom, 0).unwrap();
        let ev = hermitian_eigenvalues(&r);
        assert!((ev[15] - 16.0).abs() < 1e-9);
        assert!(ev[..15].iter().all(|e| e.abs() < 1e-9));
    }

    #[test]
    fn covariance_matches_sample_covariance() {
        let geom = default_upa(2, 2);
        let ues = layout(10.0, 15.0).ues(1, None).unwrap();
        let drop = draw_drop(&ues, 20, &mut rng(12)).unwrap();
        let sampler = ChannelSampler::new(&drop, &geom).unwrap();
        let r = sampler.covariance(0);
        let m = 4;
        let mut acc = vec![(MeanAccumulator::new(), MeanAccumulator::new()); m * m];
        let mut g = rng(13);
        for _ in 0..10_000 {
            let h = sampler.draw(&mut g);
            let row = h.row(0);
            for i in 0..m {
                for j in 0..m {
                    let x = row[i].conj() * row[j];
                    acc[i * m + j].0.push(x.re);
                    acc[i * m + j].1.push(x.im);
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                let (re, im) = &acc[i * m + j];
                assert!((re.mean() - r[(i, j)].re).abs() <= 3.0 * re.std_error() + 1e-12, "re ({i},{j})");
                assert!((im.mean() - r[(i, j)].im).abs() <= 3.0 * im.std_error() + 1e-12, "im ({i},{j})");
            }
        }
    }

    #[test]
    fn mean_gram_is_scaled_identity() {
        assert_eq!(compute_mean_gram(1, 16), ComplexMatrix::from_diagonal(&[16.0]));

        let geom = default_upa(4, 4);
        let ues = layout(7.5, 15.0).ues(2, None).unwrap();
        let drop = draw_drop(&ues, 20, &mut rng(21)).unwrap();
        let sampler = ChannelSampler::new(&drop, &geom).unwrap();
        let mut acc = [MeanAccumulator::new(); 6];
        let mut g = rng(22);
        for _ in 0..10_000 {
            let gm = gram(&sampler.draw(&mut g));
            acc[0].push(gm[(0, 0)].re);
            acc[1].push(gm[(1, 1)].re);
            acc[2].push(gm[(0, 1)].re);
            acc[3].push(gm[(0, 1)].im);
            acc[4].push(gm[(1, 0)].re);
            acc[5].push(gm[(1, 0)].im);
        }
        let expected = [16.0, 16.0, 0.0, 0.0, 0.0, 0.0];
        for (a, e) in acc.iter().zip(expected) {
            assert!((a.mean() - e).abs() <= 3.0 * a.std_error(), "{} vs {e}", a.mean());
        }
    }

    #[test]
    fn link_gain_examples() {
        let model = PathLossModel::default();
        let mut r = rng(1);
        let at_ref = model.link_gain_db(model.reference_distance_m, &mut r, false).unwrap();
        assert_eq!(at_ref, -model.reference_loss_db);
        let at_2 = model.link_gain_db(2.0 * model.reference_distance_m, &mut r, false).unwrap();
        // 10 * 3.67 * log10(2)
        assert!((at_ref - at_2 - 11.047_800_840_868_112).abs() < 1e-9, "{}", at_ref - at_2);
        let g = link_gain(&model, 200.0, &mut r, false).unwrap();
        assert!(g > 0.0);
        assert_eq!(g, link_gain(&model, 200.0, &mut rng(99), false).unwrap());
        assert_eq!(link_gain(&model, 0.0, &mut r, false), Err(Error::InvalidDistance(0.0)));
        assert!(link_gain(&model, -3.0, &mut r, true).is_err());
    }

    #[test]
    fn shadowing_std_is_four_db() {
        let model = PathLossModel::default();
        let mut r = rng(31);
        let mean = -model.mean_loss_db(150.0).unwrap();
        let n = 100_000;
        let acc: MeanAccumulator = (0..n).map(|_| model.link_gain_db(150.0, &mut r, true).unwrap()).collect();
        let sd = acc.variance().sqrt();
        // sample std of a normal has standard error sigma / sqrt(2(n-1))
        let se = 4.0 / (2.0 * (n as f64 - 1.0)).sqrt();
        assert!((sd - 4.0).abs() < 3.0 * se, "sd {sd}");
        assert!((acc.mean() - mean).abs() < 3.0 * acc.std_error());
    }

    #[test]
    fn cell_distances_stay_in_annulus() {
        let mut r = rng(3);
        for _ in 0..1000 {
            let d = draw_cell_distance(500.0, 35.0, &mut r).unwrap();
            assert!((35.0..=500.0).contains(&d));
        }
        assert!(draw_cell_distance(10.0, 20.0, &mut r).is_err());
    }
}
