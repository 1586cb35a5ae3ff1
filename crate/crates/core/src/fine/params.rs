//! Reference values, heat-generation coefficients and dimensionless groups.

use alloc::format;

use crate::geometry::PackLayout;
use crate::special::{erf, erf_prime, erfinv};
use crate::{Error, Result};

/// Dimensional material and temperature data.
///
/// The four scale fields are optional overrides; `None` derives them from
/// the pack size (`L̂`) and unit-cell width (`ℓ̂`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValues {
    pub rho_c: f64,
    pub rho_p: f64,
    pub c_c: f64,
    pub c_p: f64,
    pub k_c: f64,
    pub k_p: f64,
    pub t_ref: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub t_s1: f64,
    pub t_s2: f64,
    /// Edge temperature; carried for completeness, not used by the
    /// zero-gradient boundary conditions.
    pub t_inf: f64,
    pub eps_s1: f64,
    pub eps_s2: f64,
    pub pi_burn_hat: Option<f64>,
    pub pi_base_hat: Option<f64>,
    pub u_pc_hat: Option<f64>,
    pub q_pw_hat: Option<f64>,
}

impl ReferenceValues {
    /// Reference table used for every pack simulation.
    pub const fn table3() -> Self {
        ReferenceValues {
            rho_c: 2500.0,
            rho_p: 1500.0,
            c_c: 900.0,
            c_p: 1500.0,
            k_c: 3.0,
            k_p: 3.0,
            t_ref: 293.0,
            t_a: 0.0,
            t_b: 0.0,
            t_s1: 120.0,
            t_s2: 120.0,
            t_inf: 293.0,
            eps_s1: 0.0005,
            eps_s2: 0.0005,
            pi_burn_hat: None,
            pi_base_hat: None,
            u_pc_hat: None,
            q_pw_hat: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_c", self.rho_c),
            ("rho_p", self.rho_p),
            ("C_c", self.c_c),
            ("C_p", self.c_p),
            ("k_c", self.k_c),
            ("k_p", self.k_p),
            ("T_s1", self.t_s1),
            ("T_s2", self.t_s2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("eps_s1", self.eps_s1), ("eps_s2", self.eps_s2)] {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::Domain(format!("{name} must lie in (0, 0.5), got {v}")));
            }
        }
        if !(self.t_a >= 0.0 && self.t_b >= 0.0) {
            return Err(Error::Domain("T_a and T_b must be >= 0".into()));
        }
        Ok(())
    }

    /// `T̂_max = T̂_a + T̂_s1 + T̂_b + T̂_s2`.
    pub fn t_max(&self) -> f64 {
        self.t_a + self.t_s1 + self.t_b + self.t_s2
    }
}

/// Dimensionless coefficients of the heat-generation term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    /// Temperature span `T̂_max`.
    pub t_max_hat: f64,
    /// Absolute cut-off temperature `T̂_Max = T̂_ref + T̂_max`.
    pub t_max_abs_hat: f64,
    pub pi_base: f64,
    pub pi_burn: f64,
}

pub fn pi_coefficients(r: &ReferenceValues) -> Result<SourceParams> {
    for (name, e) in [("eps_s1", r.eps_s1), ("eps_s2", r.eps_s2)] {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Domain(format!("{name} = {e} outside (0, 1)")));
        }
    }
    if !(r.t_s1 > 0.0 && r.t_s2 > 0.0) {
        return Err(Error::Domain("T_s1 and T_s2 must be > 0".into()));
    }
    let c1 = erfinv(2.0 * r.eps_s1 - 1.0)?;
    let c2 = erfinv(2.0 * r.eps_s2 - 1.0)?;
    let t_max = r.t_max();
    let pi_base = match (r.pi_base_hat, r.pi_burn_hat) {
        (Some(b), Some(p)) if p > 0.0 => b / p,
        _ => 0.01,
    };
    Ok(SourceParams {
        a1: -2.0 * c1 * t_max / r.t_s1,
        b1: 2.0 * c1 * r.t_a / r.t_s1 + c1,
        a2: -2.0 * c2 * t_max / r.t_s2,
        b2: 2.0 * c2 * t_max / r.t_s2 - c2,
        c1,
        c2,
        t_max_hat: t_max,
        t_max_abs_hat: r.t_ref + t_max,
        pi_base,
        pi_burn: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiVariant {
    /// Burning for x ≤ x_burn, not burning elsewhere.
    Full,
    NotBurning,
    Burning,
}

impl SourceParams {
    /// Unburned cell: base plateau rising to 1, cut off above `T_max`.
    #[inline]
    pub fn pi_nb(&self, t: f64) -> f64 {
        self.pi_base + 0.5 * (erf(self.a1 * t + self.b1) + 1.0) * (1.0 - self.pi_base)
            - 0.5 * (erf(self.a2 * t + self.b2) + 1.0)
    }

    #[inline]
    pub fn pi_nb_prime(&self, t: f64) -> f64 {
        0.5 * self.a1 * erf_prime(self.a1 * t + self.b1) * (1.0 - self.pi_base) - 0.5 * self.a2 * erf_prime(self.a2 * t + self.b2)
    }

    /// Burning cell: burn plateau with the high-temperature cut-off.
    #[inline]
    pub fn pi_fb(&self, t: f64) -> f64 {
        self.pi_burn - 0.5 * (erf(self.a2 * t + self.b2) + 1.0)
    }

    #[inline]
    pub fn pi_fb_prime(&self, t: f64) -> f64 {
        -0.5 * self.a2 * erf_prime(self.a2 * t + self.b2)
    }
}

/// Fine-side source with a sharp burned/unburned switch at `x_burn`.
pub fn pi_source(t_c: f64, x: f64, variant: PiVariant, params: &SourceParams, scenario: &ScenarioConfig) -> f64 {
    if burning(x, variant, scenario) { params.pi_fb(t_c) } else { params.pi_nb(t_c) }
}

/// dΠ/dT of [`pi_source`].
pub fn pi_source_prime(t_c: f64, x: f64, variant: PiVariant, params: &SourceParams, scenario: &ScenarioConfig) -> f64 {
    if burning(x, variant, scenario) { params.pi_fb_prime(t_c) } else { params.pi_nb_prime(t_c) }
}

#[inline]
pub(crate) fn burning(x: f64, variant: PiVariant, scenario: &ScenarioConfig) -> bool {
    match variant {
        PiVariant::Full => x <= scenario.x_burn,
        PiVariant::NotBurning => false,
        PiVariant::Burning => true,
    }
}

/// Scenario data on top of the reference table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub x_burn: f64,
    pub x_r: f64,
    /// Sigmoid steepness of the upscaled burn blend.
    pub gamma: f64,
    /// Threshold factor of the 𝓡 transition detector.
    pub alpha1: f64,
    /// Uniform pipe flux in units of 𝓠.
    pub q_pw: f64,
    /// `𝓡_high / 𝓡_low`.
    pub r_ratio: f64,
    /// tanh steepness of 𝓡(x).
    pub r_steepness: f64,
}

impl ScenarioConfig {
    /// Accuracy scenario on the 20 × 1 pack (locations on unit-cell
    /// boundaries and centres, see the decisions ledger).
    pub const fn accuracy() -> Self {
        ScenarioConfig { x_burn: 0.2, x_r: -0.325, gamma: 180.0, alpha1: 0.01, q_pw: 1.0, r_ratio: 10.0, r_steepness: 100.0 }
    }

    pub fn validate(&self, layout: &PackLayout) -> Result<()> {
        let inside = |x: f64| x >= layout.x_min() && x <= layout.x_max();
        if !inside(self.x_burn) {
            return Err(Error::Domain(format!("x_burn = {} outside the pack", self.x_burn)));
        }
        if !inside(self.x_r) {
            return Err(Error::Domain(format!("x_R = {} outside the pack", self.x_r)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Domain(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.r_ratio > 0.0 && self.r_steepness > 0.0 && self.alpha1 > 0.0) {
            return Err(Error::Domain("r_ratio, r_steepness and alpha1 must be > 0".into()));
        }
        if !self.q_pw.is_finite() {
            return Err(Error::Domain("q_pw must be finite".into()));
        }
        Ok(())
    }
}

/// Dimensionless groups of the fine-scale system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimGroups {
    pub bi_p: f64,
    pub bi_c: f64,
    pub q: f64,
    pub varrho: f64,
    pub varsigma: f64,
    pub r0: f64,
    pub r_low: f64,
    pub r_high: f64,
    pub x_r: f64,
    pub r_steepness: f64,
}

impl DimGroups {
    /// 𝓡(x): high to the left of `x_R`, low to the right.
    #[inline]
    pub fn r(&self, x: f64) -> f64 {
        0.5 * (self.r_high + self.r_low) - 0.5 * (self.r_high - self.r_low) * libm::tanh(self.r_steepness * (x - self.x_r))
    }

    /// Same groups with a spatially uniform 𝓡 = `r`.
    pub fn with_uniform_r(mut self, r: f64) -> Self {
        self.r_low = r;
        self.r_high = r;
        self
    }
}

/// Dimensional scales derived from the pack size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalScales {
    pub pi_burn0: f64,
    pub pi_base0: f64,
    pub u_pc: f64,
    pub q_pw: f64,
}

pub fn dimensional_scales(r: &ReferenceValues, layout: &PackLayout) -> Result<DimensionalScales> {
    let l = layout.l_hat;
    let ell = layout.geom.ell;
    let t_max = r.t_max();
    if !(l > 0.0 && ell > 0.0 && t_max > 0.0 && r.k_p > 0.0) {
        return Err(Error::Domain("zero length, temperature or conductivity scale".into()));
    }
    let pi_burn0 = r.pi_burn_hat.unwrap_or(t_max * r.k_p / (l * ell));
    Ok(DimensionalScales {
        pi_burn0,
        pi_base0: r.pi_base_hat.unwrap_or(0.01 * pi_burn0),
        u_pc: r.u_pc_hat.unwrap_or(r.k_p / l),
        q_pw: r.q_pw_hat.unwrap_or(0.00001 * t_max * r.k_p / l),
    })
}

pub fn dimensionless_groups(r: &ReferenceValues, layout: &PackLayout, scenario: &ScenarioConfig) -> Result<DimGroups> {
    r.validate()?;
    scenario.validate(layout)?;
    let s = dimensional_scales(r, layout)?;
    let l = layout.l_hat;
    let t_max = r.t_max();
    let bi_p = s.u_pc * l / r.k_p;
    let varsigma = r.k_c / r.k_p;
    let r0 = s.pi_burn0 * l * l / (t_max * r.k_p);
    let g = DimGroups {
        bi_p,
        bi_c: bi_p / varsigma,
        q: s.q_pw * l / (t_max * r.k_p),
        varrho: r.rho_p * r.c_p / (r.rho_c * r.c_c),
        varsigma,
        r0,
        r_low: r0,
        r_high: scenario.r_ratio * r0,
        x_r: scenario.x_r,
        r_steepness: scenario.r_steepness,
    };
    for (name, v) in [("Bi_p", g.bi_p), ("Q", g.q), ("varrho", g.varrho), ("varsigma", g.varsigma), ("R0", g.r0)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} = {v} is not positive")));
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{UnitCellSpec, build_pack_layout, build_unit_cell};

    fn layout() -> PackLayout {
        build_pack_layout(&build_unit_cell(UnitCellSpec::reference()).unwrap(), 20, 1).unwrap()
    }

    #[test]
    fn table_coefficients() {
        let p = pi_coefficients(&ReferenceValues::table3()).unwrap();
        assert_eq!(p.t_max_hat, 240.0);
        // erf(C) = 2·0.0005 − 1 checked through the forward function.
        assert!((erf(p.c1) + 0.999).abs() < 1e-14);
        assert!((p.c1 + 2.326_753_765_513_524).abs() < 1e-10);
        assert_eq!(p.c1, p.c2);
        assert!((p.a1 - 9.307_015_062).abs() < 1e-8);
        assert_eq!(p.a1, p.a2);
        assert!((p.b1 + 2.326_753_766).abs() < 1e-8);
        assert!((p.b2 + 6.980_261_297).abs() < 1e-8);
    }

    #[test]
    fn coefficient_domain_errors() {
        let mut r = ReferenceValues::table3();
        r.eps_s1 = 1.0;
        assert!(pi_coefficients(&r).is_err());
        r.eps_s1 = 0.0;
        assert!(pi_coefficients(&r).is_err());
    }

    #[test]
    fn source_values() {
        let p = pi_coefficients(&ReferenceValues::table3()).unwrap();
        // 0.01 + ½(erf(−2.3268) + 1)·0.99 with erf(−2.3268) = −0.999.
        let nb0 = 0.01 + 0.5 * 0.001 * 0.99 - 0.5 * (erf(p.b2) + 1.0);
        assert!((p.pi_nb(0.0) - nb0).abs() < 1e-14);
        assert!((p.pi_nb(0.0) - 0.01049).abs() < 1e-5);
        assert!((p.pi_nb(0.5) - 0.9990).abs() < 1e-4);
        assert!(p.pi_nb(1.0) < 6e-4 && p.pi_nb(1.0) > 0.0);
        assert!((p.pi_fb(0.0) - 1.0).abs() < 1e-10);
        let s = ScenarioConfig::accuracy();
        assert_eq!(pi_source(0.3, 0.0, PiVariant::Full, &p, &s), p.pi_fb(0.3));
        assert_eq!(pi_source(0.3, 0.2, PiVariant::Full, &p, &s), p.pi_fb(0.3));
        assert_eq!(pi_source(0.3, 0.2000001, PiVariant::Full, &p, &s), p.pi_nb(0.3));
    }

    #[test]
    fn source_derivatives_match_differences() {
        let p = pi_coefficients(&ReferenceValues::table3()).unwrap();
        for &t in &[-0.1, 0.0, 0.2, 0.5, 0.75, 1.0, 1.2] {
            let h = 1e-6;
            let d_nb = (p.pi_nb(t + h) - p.pi_nb(t - h)) / (2.0 * h);
            let d_fb = (p.pi_fb(t + h) - p.pi_fb(t - h)) / (2.0 * h);
            assert!((d_nb - p.pi_nb_prime(t)).abs() < 1e-6, "{t}");
            assert!((d_fb - p.pi_fb_prime(t)).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn groups_from_table() {
        let l = layout();
        let g = dimensionless_groups(&ReferenceValues::table3(), &l, &ScenarioConfig::accuracy()).unwrap();
        assert!((g.bi_p - 1.0).abs() < 1e-12);
        assert!((g.bi_c - g.bi_p / g.varsigma).abs() < 1e-12);
        assert!((g.varrho - 1500.0 * 1500.0 / (2500.0 * 900.0)).abs() < 1e-15);
        assert!((g.varsigma - 1.0).abs() < 1e-15);
        assert!((g.q - 1e-5).abs() < 1e-17);
        assert!((g.r0 - 20.0).abs() < 1e-10);
        assert!((g.r_high - 200.0).abs() < 1e-9);
        assert!((g.r(-0.5) - 200.0).abs() < 1e-6);
        assert!((g.r(0.5) - 20.0).abs() < 1e-6);
        assert!((g.r(g.x_r) - 110.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_validation() {
        let l = layout();
        let mut s = ScenarioConfig::accuracy();
        s.x_burn = 0.7;
        assert!(dimensionless_groups(&ReferenceValues::table3(), &l, &s).is_err());
        let mut s = ScenarioConfig::accuracy();
        s.gamma = 0.0;
        assert!(s.validate(&l).is_err());
    }
}
