use serde::{Deserialize, Serialize};

use crate::geometry::{Mat3, Point, Vec3};

/// Closed-form displacement field with its derivatives. Piecewise fields take
/// a `side` point lying strictly inside the cell the evaluation belongs to,
/// which selects the branch on either side of the fracture.
pub trait AnalyticalSolution: Sync {
    fn dim(&self) -> usize;
    /// `(μ, λ)`
    fn lame(&self) -> (f64, f64);
    fn displacement(&self, x: &Point, side: &Point) -> Vec3;
    /// `∂u_i/∂x_j` at `(i, j)`.
    fn gradient(&self, x: &Point, side: &Point) -> Mat3;
    /// `-div σ(u)`
    fn body_force(&self, x: &Point, side: &Point) -> Vec3;
    /// Tresca threshold on the fracture.
    fn friction(&self, x: &Point) -> f64;

    fn stress(&self, x: &Point, side: &Point) -> Mat3 {
        let (mu, lambda) = self.lame();
        let g = self.gradient(x, side);
        let mut id = Mat3::zeros();
        for i in 0..self.dim() {
            id[(i, i)] = 1.0;
        }
        (g + g.transpose()) * mu + id * (lambda * g.trace())
    }

    /// `λ = −σ(u⁺) n⁺`
    fn multiplier(&self, x: &Point, plus_side: &Point, normal: &Vec3) -> Vec3 {
        -(self.stress(x, plus_side) * normal)
    }
}

/// Affine field `u = A x + b`, zero body force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearField {
    pub dim: usize,
    pub a: Mat3,
    pub b: Vec3,
    pub mu: f64,
    pub lambda: f64,
}

impl LinearField {
    pub fn new(dim: usize, mut a: Mat3, mut b: Vec3, mu: f64, lambda: f64) -> Self {
        for i in dim..3 {
            b[i] = 0.0;
            for j in 0..3 {
                a[(i, j)] = 0.0;
                a[(j, i)] = 0.0;
            }
        }
        Self { dim, a, b, mu, lambda }
    }
}

impl AnalyticalSolution for LinearField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn lame(&self) -> (f64, f64) {
        (self.mu, self.lambda)
    }
    fn displacement(&self, x: &Point, _: &Point) -> Vec3 {
        self.a * x + self.b
    }
    fn gradient(&self, _: &Point, _: &Point) -> Mat3 {
        self.a
    }
    fn body_force(&self, _: &Point, _: &Point) -> Vec3 {
        Vec3::zeros()
    }
    fn friction(&self, _: &Point) -> f64 {
        0.0
    }
}

/// Smooth-by-side solution on `(−1,1)³` cut by the fracture `x = 0` whose
/// plus side is `x < 0`. Sticks for `z > 0` and slips for `z < 0` with
/// `[[u]] = (0, min(z/2, 0)², 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedTresca {
    pub g: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Default for ManufacturedTresca {
    fn default() -> Self {
        Self {
            g: 1.0,
            mu: 1.0,
            lambda: 1.0,
        }
    }
}

impl ManufacturedTresca {
    /// `(R, R', R'')` and the factor `c` of the second component.
    fn profile(x: &Point, side: &Point) -> ([f64; 3], f64) {
        let z = x.z;
        if z >= 0.0 {
            ([z * z, 2.0 * z, 2.0], 1.0)
        } else {
            let c = if side.x < 0.0 { 2.0 } else { 1.0 };
            ([z * z / 4.0, z / 2.0, 0.5], c)
        }
    }
}

impl AnalyticalSolution for ManufacturedTresca {
    fn dim(&self) -> usize {
        3
    }
    fn lame(&self) -> (f64, f64) {
        (self.mu, self.lambda)
    }

    fn displacement(&self, x: &Point, side: &Point) -> Vec3 {
        let ([r, _, _], c) = Self::profile(x, side);
        let h = -x.x.sin() * x.y.cos();
        Vec3::new(h * r - self.g * x.y, c * r, x.x * x.x * r)
    }

    fn gradient(&self, x: &Point, side: &Point) -> Mat3 {
        let ([r, r1, _], c) = Self::profile(x, side);
        let (sx, cx, sy, cy) = (x.x.sin(), x.x.cos(), x.y.sin(), x.y.cos());
        let h = -sx * cy;
        let hx = -cx * cy;
        let hy = sx * sy;
        Mat3::new(
            hx * r, hy * r - self.g, h * r1,
            0.0, 0.0, c * r1,
            2.0 * x.x * r, 0.0, x.x * x.x * r1,
        )
    }

    fn body_force(&self, x: &Point, side: &Point) -> Vec3 {
        let ([r, r1, r2], c) = Self::profile(x, side);
        let (sx, cx, sy, cy) = (x.x.sin(), x.x.cos(), x.y.sin(), x.y.cos());
        let h = -sx * cy;
        let hx = -cx * cy;
        let hxx = sx * cy;
        let hyy = sx * cy;
        let hxy = cx * sy;
        let x2 = x.x * x.x;
        let lap = Vec3::new((hxx + hyy) * r + h * r2, c * r2, 2.0 * r + x2 * r2);
        let grad_div = Vec3::new(hxx * r + 2.0 * x.x * r1, hxy * r, hx * r1 + x2 * r2);
        -(lap * self.mu + grad_div * (self.mu + self.lambda))
    }

    fn friction(&self, _: &Point) -> f64 {
        self.g
    }
}

/// Shape of the exact slip along the fracture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlipProfile {
    /// `√(ℓ² − (ℓ² − τ²))`, which reduces to `τ`.
    #[default]
    AsPrinted,
    /// `√(ℓ² − (ℓ − τ)²)`
    Elliptic,
}

/// Closed-form fracture quantities for a straight crack of length `2ℓ` in an
/// infinite plane under remote uniaxial compression `σ` at angle `ψ` to the
/// crack, with Coulomb coefficient `F` turned into a constant Tresca
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionCrack {
    pub sigma: f64,
    pub psi: f64,
    pub half_length: f64,
    pub young: f64,
    pub poisson: f64,
    pub friction_coefficient: f64,
    pub profile: SlipProfile,
    /// Use the plane-strain compliance `4(1−ν²)/E` instead of `4(1−ν)/E`.
    pub plane_strain_compliance: bool,
}

impl Default for CompressionCrack {
    fn default() -> Self {
        Self {
            sigma: 100.0e6,
            psi: std::f64::consts::PI / 9.0,
            half_length: 1.0,
            young: 25.0e9,
            poisson: 0.25,
            friction_coefficient: 1.0 / 3f64.sqrt(),
            profile: SlipProfile::AsPrinted,
            plane_strain_compliance: false,
        }
    }
}

impl CompressionCrack {
    /// Plane-strain `(μ, λ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        (e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }

    pub fn lambda_n(&self) -> f64 {
        self.sigma * self.psi.sin().powi(2)
    }

    pub fn threshold(&self) -> f64 {
        self.friction_coefficient * self.lambda_n()
    }

    fn compliance(&self) -> f64 {
        let nu = self.poisson;
        if self.plane_strain_compliance {
            4.0 * (1.0 - nu * nu) / self.young
        } else {
            4.0 * (1.0 - nu) / self.young
        }
    }

    /// `|[[u]]_τ|` at curvilinear abscissa `τ ∈ [0, 2ℓ]`.
    pub fn slip(&self, tau: f64) -> f64 {
        let l = self.half_length;
        let shape = match self.profile {
            SlipProfile::AsPrinted => (l * l - (l * l - tau * tau)).max(0.0).sqrt(),
            SlipProfile::Elliptic => (l * l - (l - tau).powi(2)).max(0.0).sqrt(),
        };
        let s = self.psi.sin();
        self.compliance() * self.sigma * s * (self.psi.cos() - self.threshold() / self.lambda_n() * s) * shape
    }

    /// Remote stress tensor in the frame where the crack lies along `t`.
    pub fn remote_stress(&self, load_direction: &Vec3) -> Mat3 {
        -(load_direction * load_direction.transpose()) * self.sigma
    }
}
