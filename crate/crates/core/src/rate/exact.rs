//! Exact moments of the cascaded channel `f_k = G^H Φ^H h_k`.
//!
//! Write `G = √ε (a r t^H + b G̃)` with `r = a_N(φ_r)`, `t = a_M(φ_t)`,
//! `a² = K_G/(K_G+1)`, `b² = 1/(K_G+1)`, and `v_k = Φ^H h_k / √β_k
//! ~ CN(v̄_k, d_k² I)` with `v̄_k = c_k Φ^H h̄_k`. Then
//! `f_k = √(εβ_k) (a (r^H v_k) t + b G̃^H v_k)`, which is Gaussian once `v_k`
//! is fixed. Every moment below is that conditional Gaussian moment averaged
//! over `v_k`. The LoS geometry enters only through
//! `r^H v̄_k = c_k ψ_k` and `v̄_k^H v̄_i = c_k c_i h̄_k^H h̄_i`.

use num_complex::Complex64;

/// Per-user inputs: `ψ_k`, the LoS / scattered power split `(c_k², d_k²)`
/// and the path-loss product `ε β_k`.
#[derive(Debug, Clone, Copy)]
pub struct UserLos {
    pub psi: Complex64,
    pub los: f64,
    pub nlos: f64,
    pub scale: f64,
}

impl UserLos {
    /// `|r^H v̄_k|²`.
    fn s2(&self) -> f64 {
        self.los * self.psi.norm_sqr()
    }

    /// `r^H v̄_k`.
    fn s(&self) -> Complex64 {
        self.psi * self.los.sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactMoments {
    m: f64,
    n: f64,
    /// `a²`
    los: f64,
    /// `b²`
    nlos: f64,
}

/// `E|s|²`, `E|s|⁴`, `E q²`, `E |s|² q` with `s = r^H v`, `q = ‖v‖²`.
struct RisMoments {
    s2: f64,
    s4: f64,
    q2: f64,
    s2q: f64,
}

impl ExactMoments {
    pub fn new(m: usize, n: usize, los: f64, nlos: f64) -> Self {
        Self { m: m as f64, n: n as f64, los, nlos }
    }

    fn ris(&self, u: &UserLos) -> RisMoments {
        let (n, d2, c2) = (self.n, u.nlos, u.los);
        let s2 = u.s2();
        RisMoments {
            s2: s2 + d2 * n,
            s4: s2 * s2 + 4.0 * s2 * d2 * n + 2.0 * d2 * d2 * n * n,
            q2: n * n + n * d2 * d2 + 2.0 * d2 * c2 * n,
            s2q: (s2 + d2 * n) * n + d2 * d2 * n + 2.0 * d2 * s2,
        }
    }

    /// `E|f_km|²`.
    pub fn entry2(&self, u: &UserLos) -> f64 {
        u.scale * (self.los * self.ris(u).s2 + self.nlos * self.n)
    }

    /// `E|f_km|⁴`.
    pub fn entry4(&self, u: &UserLos) -> f64 {
        let r = self.ris(u);
        let (a2, b2) = (self.los, self.nlos);
        u.scale * u.scale * (a2 * a2 * r.s4 + 4.0 * a2 * b2 * r.s2q + 2.0 * b2 * b2 * r.q2)
    }

    /// `E‖f_k‖⁴`.
    pub fn norm4(&self, u: &UserLos) -> f64 {
        let r = self.ris(u);
        let (a2, b2, m) = (self.los, self.nlos, self.m);
        u.scale * u.scale * (m * m * a2 * a2 * r.s4 + 2.0 * m * (m + 1.0) * a2 * b2 * r.s2q + m * (m + 1.0) * b2 * b2 * r.q2)
    }

    /// `E{|f_km|² |f_im|²}` for `i ≠ k` (same antenna, shared BS-RIS column).
    pub fn entry_cross(&self, uk: &UserLos, ui: &UserLos, los_inner: Complex64) -> f64 {
        let (a2, b2, n) = (self.los, self.nlos, self.n);
        let w = los_inner * (uk.los * ui.los).sqrt();
        // μ^H S μ for the BS-RIS column mean μ and S_k = E v_k v_k^H
        let mk = a2 * (uk.s2() + uk.nlos * n);
        let mi = a2 * (ui.s2() + ui.nlos * n);
        let tr_ss = w.norm_sqr() + ui.nlos * uk.los * n + uk.nlos * ui.los * n + n * uk.nlos * ui.nlos;
        let mssm = a2
            * ((uk.s() * w * ui.s().conj()).re + ui.nlos * uk.s2() + uk.nlos * ui.s2() + uk.nlos * ui.nlos * n);
        uk.scale * ui.scale * ((mk + b2 * n) * (mi + b2 * n) + b2 * b2 * tr_ss + 2.0 * b2 * mssm)
    }

    /// `E|f_k^H f_i|²` for `i ≠ k`.
    pub fn inner2(&self, uk: &UserLos, ui: &UserLos, los_inner: Complex64) -> f64 {
        let w = los_inner * (uk.los * ui.los).sqrt();
        let nk = uk.los * self.n;
        let ni = ui.los * self.n;
        let v = self.gram_pair(uk.s(), ui.s(), nk, ni, w)
            + ui.nlos * self.gram_square(uk.s2(), nk)
            + uk.nlos * self.gram_square(ui.s2(), ni)
            + uk.nlos * ui.nlos * self.n * self.gram_square(1.0, 1.0);
        uk.scale * ui.scale * v
    }

    /// `E|x^H Q y|²` for `Q = G G^H / ε` and fixed `x`, `y`, given
    /// `r^H x = sx`, `r^H y = sy`, `‖x‖² = nx`, `‖y‖² = ny`, `x^H y = w`.
    fn gram_pair(&self, sx: Complex64, sy: Complex64, nx: f64, ny: f64, w: Complex64) -> f64 {
        let (a2, b2, m) = (self.los, self.nlos, self.m);
        let kappa = sx.conj() * sy * a2 + w * b2;
        let (x2, y2) = (sx.norm_sqr(), sy.norm_sqr());
        m * (m - 1.0) * kappa.norm_sqr()
            + m * (a2 * a2 * x2 * y2
                + a2 * b2 * (x2 * ny + y2 * nx)
                + 2.0 * a2 * b2 * (sx * sy.conj() * w).re
                + b2 * b2 * nx * ny
                + b2 * b2 * w.norm_sqr())
    }

    /// `E x^H Q² x` given `|r^H x|² = s2` and `‖x‖² = nx`.
    fn gram_square(&self, s2: f64, nx: f64) -> f64 {
        let (a2, b2, m, n) = (self.los, self.nlos, self.m, self.n);
        m * (m - 1.0) * (n * a2 * a2 * s2 + b2 * b2 * nx + 2.0 * a2 * b2 * s2)
            + m * (a2 * a2 * s2 * n + a2 * b2 * (s2 * n + n * nx) + 2.0 * a2 * b2 * s2 + b2 * b2 * n * nx + b2 * b2 * nx)
    }
}
