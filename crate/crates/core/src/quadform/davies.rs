//! Davies' algorithm for the distribution of a linear combination of
//! independent χ² variables, by numerical inversion of the characteristic
//! function with explicit truncation and discretisation error control.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{clamp_p, imhof_pvalue, QuadFormDist, TailMethod, TailProbability};
use crate::error::{Error, Result};

/// Upper limit on integration terms (and on bound evaluations).
pub const DAVIES_TERM_LIMIT: usize = 1_000_000;

const LOG28: f64 = 0.0866; // ln(2) / 8

/// Raw output of one Davies evaluation of P(Q < c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaviesOutput {
    pub cdf: f64,
    /// 0 ok; 1 accuracy not reached within the term limit; 2 round-off may be
    /// significant; 3 invalid parameters; 4 integration parameters not found.
    pub fault: u8,
    pub abs_sum: f64,
    pub terms: usize,
    pub integrations: usize,
}

struct LimitReached;

struct Qf<'a> {
    lb: &'a [f64],
    nc: &'a [f64],
    df: &'a [f64],
    sigsq: f64,
    lmax: f64,
    lmin: f64,
    mean: f64,
    c: f64,
    intl: f64,
    ersm: f64,
    count: usize,
    lim: usize,
    sorted: bool,
    fail: bool,
    th: Vec<usize>,
}

fn exp1(x: f64) -> f64 {
    if x < -50.0 {
        0.0
    } else {
        x.exp()
    }
}

/// `ln(1 + x)` if `first`, else `ln(1 + x) − x`.
fn log1(x: f64, first: bool) -> f64 {
    if x.abs() > 0.1 {
        if first {
            (1.0 + x).ln()
        } else {
            (1.0 + x).ln() - x
        }
    } else {
        let mut y = x / (2.0 + x);
        let mut term = 2.0 * y * y * y;
        let mut k = 3.0;
        let mut s = if first { 2.0 } else { -x } * y;
        y *= y;
        let mut s1 = s + term / k;
        while s1 != s {
            k += 2.0;
            term *= y;
            s = s1;
            s1 = s + term / k;
        }
        s
    }
}

impl<'a> Qf<'a> {
    fn counter(&mut self) -> core::result::Result<(), LimitReached> {
        self.count += 1;
        if self.count > self.lim {
            Err(LimitReached)
        } else {
            Ok(())
        }
    }

    fn r(&self) -> usize {
        self.lb.len()
    }

    /// Indices ordered by decreasing |λ|.
    fn order(&mut self) {
        let mut th: Vec<usize> = (0..self.r()).collect();
        let lb = self.lb;
        th.sort_by(|&a, &b| lb[b].abs().total_cmp(&lb[a].abs()).then(a.cmp(&b)));
        self.th = th;
        self.sorted = true;
    }

    /// Bound on tail probability using the mgf; cutoff returned alongside.
    fn errbd(&mut self, u: f64) -> core::result::Result<(f64, f64), LimitReached> {
        self.counter()?;
        let mut xconst = u * self.sigsq;
        let mut sum1 = u * xconst;
        let u = 2.0 * u;
        for j in (0..self.r()).rev() {
            let (nj, lj, ncj) = (self.df[j], self.lb[j], self.nc[j]);
            let x = u * lj;
            let y = 1.0 - x;
            xconst += lj * (ncj / y + nj) / y;
            sum1 += ncj * (x / y) * (x / y) + nj * (x * x / y + log1(-x, false));
        }
        Ok((exp1(-0.5 * sum1), xconst))
    }

    /// Cut-off so that P(Q > ctff) < accx when `upn > 0`, P(Q < ctff) < accx otherwise.
    fn ctff(&mut self, accx: f64, upn: &mut f64) -> core::result::Result<f64, LimitReached> {
        let mut u2 = *upn;
        let mut u1 = 0.0;
        let mut c1 = self.mean;
        let rb = 2.0 * if u2 > 0.0 { self.lmax } else { self.lmin };
        let mut c2;
        loop {
            let u = u2 / (1.0 + u2 * rb);
            let (bound, cx) = self.errbd(u)?;
            c2 = cx;
            if bound <= accx {
                break;
            }
            u1 = u2;
            c1 = c2;
            u2 *= 2.0;
        }
        let mut u = (c1 - self.mean) / (c2 - self.mean);
        while u < 0.9 {
            u = (u1 + u2) / 2.0;
            let (bound, xconst) = self.errbd(u / (1.0 + u * rb))?;
            if bound > accx {
                u1 = u;
                c1 = xconst;
            } else {
                u2 = u;
                c2 = xconst;
            }
            u = (c1 - self.mean) / (c2 - self.mean);
        }
        *upn = u2;
        Ok(c2)
    }

    /// Bound on the integration error from truncating at `u`.
    fn truncation(&mut self, u: f64, tausq: f64) -> core::result::Result<f64, LimitReached> {
        self.counter()?;
        let mut sum1 = 0.0;
        let mut prod2 = 0.0;
        let mut prod3 = 0.0;
        let mut s = 0.0;
        let sum2 = (self.sigsq + tausq) * u * u;
        let mut prod1 = 2.0 * sum2;
        let u = 2.0 * u;
        for j in 0..self.r() {
            let (lj, ncj, nj) = (self.lb[j], self.nc[j], self.df[j]);
            let x = (u * lj) * (u * lj);
            sum1 += ncj * x / (1.0 + x);
            if x > 1.0 {
                prod2 += nj * x.ln();
                prod3 += nj * log1(x, true);
                s += nj;
            } else {
                prod1 += nj * log1(x, true);
            }
        }
        sum1 *= 0.5;
        prod2 += prod1;
        prod3 += prod1;
        let x = exp1(-sum1 - 0.25 * prod2) / PI;
        let y = exp1(-sum1 - 0.25 * prod3) / PI;
        let mut err1 = if s == 0.0 { 1.0 } else { x * 2.0 / s };
        let err2 = if prod3 > 1.0 { 2.5 * y } else { 1.0 };
        if err2 < err1 {
            err1 = err2;
        }
        let x = 0.5 * sum2;
        let err2 = if x <= y { 1.0 } else { y / x };
        Ok(if err1 < err2 { err1 } else { err2 })
    }

    /// Find u with truncation(u) < accx and truncation(u / 1.2) > accx.
    fn findu(&mut self, utx: &mut f64, accx: f64) -> core::result::Result<(), LimitReached> {
        const DIVIS: [f64; 4] = [2.0, 1.4, 1.2, 1.1];
        let mut ut = *utx;
        let mut u = ut / 4.0;
        if self.truncation(u, 0.0)? > accx {
            u = ut;
            while self.truncation(u, 0.0)? > accx {
                ut *= 4.0;
                u = ut;
            }
        } else {
            ut = u;
            u /= 4.0;
            while self.truncation(u, 0.0)? <= accx {
                ut = u;
                u /= 4.0;
            }
        }
        for d in DIVIS {
            let u = ut / d;
            if self.truncation(u, 0.0)? <= accx {
                ut = u;
            }
        }
        *utx = ut;
        Ok(())
    }

    /// Integrate with `nterm` terms at step `interv`; unless `mainx`, multiply
    /// the integrand by 1 − exp(−½ tausq u²).
    fn integrate(&mut self, nterm: usize, interv: f64, tausq: f64, mainx: bool) {
        let inpi = interv / PI;
        for k in (0..=nterm).rev() {
            let u = (k as f64 + 0.5) * interv;
            let mut sum1 = -2.0 * u * self.c;
            let mut sum2 = sum1.abs();
            let mut sum3 = -0.5 * self.sigsq * u * u;
            for j in (0..self.r()).rev() {
                let nj = self.df[j];
                let x = 2.0 * self.lb[j] * u;
                let y = x * x;
                sum3 -= 0.25 * nj * log1(y, true);
                let y = self.nc[j] * x / (1.0 + y);
                let z = nj * x.atan() + y;
                sum1 += z;
                sum2 += z.abs();
                sum3 -= 0.5 * x * y;
            }
            let mut x = inpi * exp1(sum3) / u;
            if !mainx {
                x *= 1.0 - exp1(-0.5 * tausq * u * u);
            }
            self.intl += (0.5 * sum1).sin() * x;
            self.ersm += 0.5 * sum2 * x;
        }
    }

    /// Coefficient of tausq in the error when the convergence factor
    /// exp(−½ tausq u²) is used at `x`.
    fn cfe(&mut self, x: f64) -> core::result::Result<f64, LimitReached> {
        self.counter()?;
        if !self.sorted {
            self.order();
        }
        let mut axl = x.abs();
        let sxl = if x > 0.0 { 1.0 } else { -1.0 };
        let mut sum1 = 0.0;
        for j in (0..self.r()).rev() {
            let t = self.th[j];
            if self.lb[t] * sxl > 0.0 {
                let lj = self.lb[t].abs();
                let axl1 = axl - lj * (self.df[t] + self.nc[t]);
                let axl2 = lj / LOG28;
                if axl1 > axl2 {
                    axl = axl1;
                } else {
                    if axl > axl2 {
                        axl = axl2;
                    }
                    sum1 = (axl - axl1) / lj;
                    for k in (0..j).rev() {
                        let tk = self.th[k];
                        sum1 += self.df[tk] + self.nc[tk];
                    }
                    break;
                }
            }
        }
        if sum1 > 100.0 {
            self.fail = true;
            Ok(1.0)
        } else {
            Ok(2.0f64.powf(sum1 / 4.0) / (PI * axl * axl))
        }
    }
}

/// P(Σ_j λ_j χ²(df_j, nc_j) + σ N(0,1) < c) by Davies' method.
pub fn davies_cdf(
    lambdas: &[f64],
    df: &[f64],
    noncentral: &[f64],
    sigma: f64,
    c: f64,
    lim: usize,
    acc: f64,
) -> DaviesOutput {
    let mut qf = Qf {
        lb: lambdas,
        nc: noncentral,
        df,
        sigsq: sigma * sigma,
        lmax: 0.0,
        lmin: 0.0,
        mean: 0.0,
        c,
        intl: 0.0,
        ersm: 0.0,
        count: 0,
        lim,
        sorted: false,
        fail: false,
        th: Vec::new(),
    };
    let mut out = DaviesOutput { cdf: -1.0, fault: 0, abs_sum: 0.0, terms: 0, integrations: 0 };
    match run(&mut qf, &mut out, acc) {
        Ok(()) => {}
        Err(LimitReached) => out.fault = 4,
    }
    out
}

fn run(qf: &mut Qf<'_>, out: &mut DaviesOutput, acc: f64) -> core::result::Result<(), LimitReached> {
    const RATS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
    let r = qf.r();
    let mut acc1 = acc;
    let mut xlim = qf.lim as f64;
    let mut sd = qf.sigsq;
    for j in 0..r {
        let (nj, lj, ncj) = (qf.df[j], qf.lb[j], qf.nc[j]);
        if nj < 0.0 || ncj < 0.0 {
            out.fault = 3;
            return Ok(());
        }
        sd += lj * lj * (2.0 * nj + 4.0 * ncj);
        qf.mean += lj * (nj + ncj);
        if qf.lmax < lj {
            qf.lmax = lj;
        } else if qf.lmin > lj {
            qf.lmin = lj;
        }
    }
    if sd == 0.0 {
        out.cdf = if qf.c > 0.0 { 1.0 } else { 0.0 };
        return Ok(());
    }
    if qf.lmin == 0.0 && qf.lmax == 0.0 && qf.sigsq == 0.0 {
        out.fault = 3;
        return Ok(());
    }
    let sd = sd.sqrt();
    let almx = if qf.lmax < -qf.lmin { -qf.lmin } else { qf.lmax };

    let mut utx = 16.0 / sd;
    let mut up = 4.5 / sd;
    let mut un = -up;
    qf.findu(&mut utx, 0.5 * acc1)?;
    if qf.c != 0.0 && almx > 0.07 * sd {
        let tausq = 0.25 * acc1 / qf.cfe(qf.c)?;
        if qf.fail {
            qf.fail = false;
        } else if qf.truncation(utx, tausq)? < 0.2 * acc1 {
            qf.sigsq += tausq;
            qf.findu(&mut utx, 0.25 * acc1)?;
        }
    }
    acc1 *= 0.5;

    let (intv, xnt) = loop {
        let d1 = qf.ctff(acc1, &mut up)? - qf.c;
        if d1 < 0.0 {
            out.cdf = 1.0;
            return Ok(());
        }
        let d2 = qf.c - qf.ctff(acc1, &mut un)?;
        if d2 < 0.0 {
            out.cdf = 0.0;
            return Ok(());
        }
        let intv = 2.0 * PI / if d1 > d2 { d1 } else { d2 };
        let xnt = utx / intv;
        let xntm = 3.0 / acc1.sqrt();
        if xnt > xntm * 1.5 {
            if xntm > xlim {
                out.fault = 1;
                return Ok(());
            }
            let ntm = (xntm + 0.5).floor() as usize;
            let intv1 = utx / ntm as f64;
            let x = 2.0 * PI / intv1;
            if x <= qf.c.abs() {
                break (intv, xnt);
            }
            let tausq = 0.33 * acc1 / (1.1 * (qf.cfe(qf.c - x)? + qf.cfe(qf.c + x)?));
            if qf.fail {
                break (intv, xnt);
            }
            acc1 *= 0.67;
            qf.integrate(ntm, intv1, tausq, false);
            xlim -= xntm;
            qf.sigsq += tausq;
            out.integrations += 1;
            out.terms += ntm + 1;
            qf.findu(&mut utx, 0.25 * acc1)?;
            acc1 *= 0.75;
            continue;
        }
        break (intv, xnt);
    };

    if xnt > xlim {
        out.fault = 1;
        return Ok(());
    }
    let nt = (xnt + 0.5).floor() as usize;
    qf.integrate(nt, intv, 0.0, true);
    out.integrations += 1;
    out.terms += nt + 1;
    out.cdf = 0.5 - qf.intl;
    out.abs_sum = qf.ersm;

    let up = qf.ersm;
    let x = up + acc / 10.0;
    for rat in RATS {
        if rat * x == rat * up {
            out.fault = 2;
        }
    }
    Ok(())
}

/// Collapse equal eigenvalues into multiplicities.
fn grouped(lambdas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut lb = Vec::new();
    let mut df: Vec<f64> = Vec::new();
    for &l in lambdas.iter().filter(|&&l| l > 0.0) {
        match lb.last() {
            Some(&prev) if prev == l => *df.last_mut().unwrap() += 1.0,
            _ => {
                lb.push(l);
                df.push(1.0);
            }
        }
    }
    (lb, df)
}

fn validate(dist: &QuadFormDist, accuracy: f64) -> Result<()> {
    if !(accuracy > 0.0 && accuracy <= 1e-2) {
        return Err(Error::arg(alloc::format!("accuracy {accuracy} outside (0, 1e-2]")));
    }
    if dist.is_degenerate() {
        return Err(Error::arg("weighted chi-square needs at least one positive weight"));
    }
    Ok(())
}

/// P(Σ λ_j χ²₁ⱼ > q) by Davies' method, falling back to Imhof's integral when
/// Davies reports insufficient integration terms.
pub fn davies_pvalue(dist: &QuadFormDist, q: f64, accuracy: f64) -> Result<TailProbability> {
    validate(dist, accuracy)?;
    if q <= 0.0 {
        return Ok(TailProbability::certain(1.0, TailMethod::Davies));
    }
    let (lb, df) = grouped(dist.lambdas());
    match refined_tail(&lb, &df, q, accuracy) {
        Ok(p) => Ok(p),
        Err(fault) => {
            let mut p = imhof_pvalue(dist, q, accuracy)?;
            p.fault = fault;
            Ok(p)
        }
    }
}

/// P(Σ λ_k χ²₁ₖ ≥ q·V/ν) where V/ν is the residual variance estimate of a
/// normal linear model with ν degrees of freedom and the quadratic form lives
/// in the residual space (so V splits into the form's own χ²s plus ν − r more).
///
/// Exact for normal errors. `None` when Davies cannot resolve it.
pub fn studentized_pvalue(dist: &QuadFormDist, q: f64, resid_df: f64, accuracy: f64) -> Result<Option<TailProbability>> {
    validate(dist, accuracy)?;
    if !(resid_df >= 1.0) {
        return Err(Error::arg(alloc::format!("residual degrees of freedom {resid_df} below 1")));
    }
    if q <= 0.0 {
        return Ok(Some(TailProbability::certain(1.0, TailMethod::Davies)));
    }
    let shift = q / resid_df;
    let (pos, mult) = grouped(dist.lambdas());
    let r: f64 = mult.iter().sum();
    let mut lb: Vec<f64> = pos.iter().map(|l| l - shift).collect();
    let mut df = mult;
    if resid_df > r {
        lb.push(-shift);
        df.push(resid_df - r);
    }
    if lb.iter().all(|&l| l <= 0.0) {
        return Ok(Some(TailProbability::certain(crate::quadform::P_FLOOR, TailMethod::Davies)));
    }
    Ok(refined_tail(&lb, &df, 0.0, accuracy).ok())
}

/// 1 − cdf at q, tightening the accuracy for small tails; `Err(fault)` when
/// Davies gives up.
fn refined_tail(lb: &[f64], df: &[f64], q: f64, accuracy: f64) -> core::result::Result<TailProbability, u8> {
    let nc = alloc::vec![0.0; lb.len()];
    let eval = |acc: f64| davies_cdf(lb, df, &nc, 0.0, q, DAVIES_TERM_LIMIT, acc);

    let mut acc = accuracy;
    let mut out = eval(acc);
    if matches!(out.fault, 1 | 3 | 4) {
        return Err(out.fault);
    }
    // tighten for small tail probabilities so the relative error stays modest
    for _ in 0..3 {
        let p = 1.0 - out.cdf;
        if p > 1e3 * acc || acc <= 1e-14 {
            break;
        }
        let target = if p > 0.0 { (p * 1e-3).min(acc * 1e-2) } else { acc * 1e-4 };
        let next_acc = target.max(1e-15);
        let next = eval(next_acc);
        if matches!(next.fault, 1 | 3 | 4) {
            break;
        }
        acc = next_acc;
        out = next;
    }
    Ok(TailProbability { p_value: clamp_p(1.0 - out.cdf), error_bound: acc, method: TailMethod::Davies, fault: out.fault })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(l: &[f64]) -> QuadFormDist {
        QuadFormDist::new(l.to_vec()).unwrap()
    }

    #[test]
    fn studentized_matches_f_tail() {
        // λ = (1, 1): the event is F(2, d₂) ≥ f with f = q·d₂ / (2(ν − q)),
        // and P(F(2, d₂) ≥ f) = (1 + 2f/d₂)^(−d₂/2)
        for &(d2, q) in &[(2.0, 1.0), (2.0, 3.0), (10.0, 4.0), (40.0, 9.0), (200.0, 12.0)] {
            let nu = 2.0 + d2;
            let f = q * d2 / (2.0 * (nu - q));
            let oracle = (1.0 + 2.0 * f / d2).powf(-d2 / 2.0);
            let p = studentized_pvalue(&dist(&[1.0, 1.0]), q, nu, 1e-10).unwrap().unwrap();
            assert!((p.p_value - oracle).abs() < 1e-8, "d2={d2} q={q}: {} vs {oracle}", p.p_value);
        }
    }

    #[test]
    fn studentized_tends_to_plain_tail() {
        let d = dist(&[3.0, 1.0, 0.5]);
        let plain = davies_pvalue(&d, 9.0, 1e-9).unwrap().p_value;
        let stud = studentized_pvalue(&d, 9.0, 1e7, 1e-9).unwrap().unwrap().p_value;
        assert!((plain - stud).abs() < 1e-4, "{plain} vs {stud}");
    }

    #[test]
    fn studentized_beyond_support_is_floor() {
        // q ≥ ν·λ_max can never be reached
        let p = studentized_pvalue(&dist(&[1.0]), 5.0, 5.0, 1e-9).unwrap().unwrap();
        assert_eq!(p.p_value, crate::quadform::P_FLOOR);
    }

    #[test]
    fn chi_square_quantiles() {
        for (l, q) in [(&[1.0][..], 3.841_459), (&[1.0, 1.0][..], 5.991_465), (&[0.5, 0.5][..], 2.995_732)] {
            let p = davies_pvalue(&dist(l), q, 1e-9).unwrap();
            assert!((p.p_value - 0.05).abs() < 1e-6, "{l:?} {}", p.p_value);
            assert_eq!(p.method, TailMethod::Davies);
        }
    }

    #[test]
    fn two_df_exact_tail() {
        for q in [0.1, 1.0, 4.0, 10.0, 25.0] {
            let p = davies_pvalue(&dist(&[1.0, 1.0]), q, 1e-9).unwrap();
            let exact = (-q / 2.0f64).exp();
            assert!((p.p_value - exact).abs() < 1e-9 + 1e-6 * exact, "{q} {} {exact}", p.p_value);
        }
    }

    #[test]
    fn zero_statistic() {
        assert_eq!(davies_pvalue(&dist(&[2.0, 1.0]), 0.0, 1e-9).unwrap().p_value, 1.0);
    }

    #[test]
    fn rejects_bad_accuracy() {
        assert!(davies_pvalue(&dist(&[1.0]), 1.0, 0.1).is_err());
        assert!(davies_pvalue(&dist(&[1.0]), 1.0, 0.0).is_err());
    }

    #[test]
    fn log1_series_branch() {
        for x in [-0.09, -0.01, 1e-5, 0.05, 0.099] {
            let expected: f64 = (1.0f64 + x).ln();
            assert!((log1(x, true) - expected).abs() < 1e-15);
            assert!((log1(x, false) - (expected - x)).abs() < 1e-15);
        }
    }
}
