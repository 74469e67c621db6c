//! Bulk eigenmodes of a homogeneous half-space below `z = 0`.
//!
//! The wave equation for fixed in-plane wavevector is a quadratic pencil
//! `M(q) = M0 + q M1 + q² M2` in the normal wavevector `q` (units of `k0`).
//! Unknowns whose `q²` column is empty are eliminated algebraically, the
//! rest are linearised into a companion matrix whose eigenvalues are the
//! bulk roots. The decaying roots span an invariant subspace that is used
//! directly, so repeated roots (isotropic media) need no special casing.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };

/// Quadratic pencil plus the partition of unknowns.
pub(crate) struct Pencil {
    pub m0: DMatrix<C>,
    pub m1: DMatrix<C>,
    pub m2: DMatrix<C>,
    /// Unknowns carrying `q²`, in the order they appear in the state vector.
    pub dynamic: Vec<usize>,
    pub algebraic: Vec<usize>,
}

/// Tangential fields of one admissible bulk solution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ModeFields {
    pub ex: C,
    pub ey: C,
    /// `Z0·H`
    pub hx: C,
    pub hy: C,
    /// Normal component of the carrier current (nonlocal pencil only).
    pub jz: C,
}

pub(crate) struct Outgoing {
    pub fields: Vec<ModeFields>,
    pub roots: Vec<C>,
    /// Full unknown vectors, unit norm.
    pub states: Vec<DVector<C>>,
}

/// Where the mode solve happened, for error reporting.
#[derive(Clone, Copy)]
pub(crate) struct Site {
    pub omega: f64,
    pub k_par: f64,
    pub phi: f64,
}

fn sub(m: &DMatrix<C>, rows: &[usize], cols: &[usize]) -> DMatrix<C> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

struct Reduced {
    companion: DMatrix<C>,
    /// `a = elim0 u + elim1 w` for the algebraic unknowns.
    elim0: DMatrix<C>,
    elim1: DMatrix<C>,
}

impl Pencil {
    fn reduce(&self, site: Site) -> Result<Reduced> {
        let d = &self.dynamic;
        let a = &self.algebraic;
        let n = d.len();
        let singular = || Error::SingularBoundary {
            omega: site.omega,
            k_par: site.k_par,
            phi: site.phi,
            residual: f64::INFINITY,
        };
        // An undetermined algebraic unknown means a root pair has merged at
        // infinity or on the light line.
        let merged = || Error::DegenerateModes {
            omega: site.omega,
            k_par: site.k_par,
            phi: site.phi,
        };
        let (elim0, elim1) = if a.is_empty() {
            (DMatrix::zeros(0, n), DMatrix::zeros(0, n))
        } else {
            let lu = sub(&self.m0, a, a).lu();
            let p0 = lu.solve(&sub(&self.m0, a, d)).ok_or_else(merged)?;
            let p1 = lu.solve(&sub(&self.m1, a, d)).ok_or_else(merged)?;
            (-p0, -p1)
        };
        let m0_da = sub(&self.m0, d, a);
        let m1_da = sub(&self.m1, d, a);
        let c2 = sub(&self.m2, d, d) + &m1_da * &elim1;
        let c1 = sub(&self.m1, d, d) + &m0_da * &elim1 + &m1_da * &elim0;
        let c0 = sub(&self.m0, d, d) + &m0_da * &elim0;
        let lu2 = c2.lu();
        let k10 = lu2.solve(&c0).ok_or_else(singular)?;
        let k11 = lu2.solve(&c1).ok_or_else(singular)?;
        let mut companion = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            companion[(i, n + i)] = C::new(1.0, 0.0);
            for j in 0..n {
                companion[(n + i, j)] = -k10[(i, j)];
                companion[(n + i, n + j)] = -k11[(i, j)];
            }
        }
        Ok(Reduced {
            companion,
            elim0,
            elim1,
        })
    }

    /// Tangential fields for the companion state `(u, w = q u)`.
    ///
    /// Unknown 0, 1, 2 must be `Ex, Ey, Ez`; `jz_slot` is the position of
    /// the normal current among the dynamic unknowns, if any.
    fn fields(&self, red: &Reduced, state: &DVector<C>, kx: f64, ky: f64, jz_slot: Option<usize>) -> ModeFields {
        let n = self.dynamic.len();
        let u = state.rows(0, n);
        let w = state.rows(n, n);
        let alg = &red.elim0 * u + &red.elim1 * w;
        let lookup = |var: usize| -> (C, C) {
            if let Some(p) = self.dynamic.iter().position(|&v| v == var) {
                (u[p], w[p])
            } else {
                let p = self.algebraic.iter().position(|&v| v == var).expect("unknown partition");
                (alg[p], ZERO)
            }
        };
        let (ex, qex) = lookup(0);
        let (ey, qey) = lookup(1);
        let (ez, _) = lookup(2);
        ModeFields {
            ex,
            ey,
            hx: ky * ez - qey,
            hy: qex - kx * ez,
            jz: jz_slot.map(|p| u[p]).unwrap_or(ZERO),
        }
    }

    /// Full unknown vector for a companion state.
    fn unknowns(&self, red: &Reduced, state: &DVector<C>) -> DVector<C> {
        let n = self.dynamic.len();
        let u = state.rows(0, n);
        let alg = &red.elim0 * u + &red.elim1 * state.rows(n, n);
        let mut x = DVector::zeros(n + self.algebraic.len());
        for (p, &v) in self.dynamic.iter().enumerate() {
            x[v] = u[p];
        }
        for (p, &v) in self.algebraic.iter().enumerate() {
            x[v] = alg[p];
        }
        x.normalize()
    }

    fn fields_of(&self, x: &DVector<C>, q: C, kx: f64, ky: f64, jz_slot: Option<usize>) -> ModeFields {
        ModeFields {
            ex: x[0],
            ey: x[1],
            hx: ky * x[2] - q * x[1],
            hy: q * x[0] - kx * x[2],
            jz: jz_slot.map(|p| x[self.dynamic[p]]).unwrap_or(ZERO),
        }
    }

    /// Newton on `M(q) x = 0, x₀ᴴ x = 1` against the unreduced pencil. The
    /// companion loses digits when the roots span several decades.
    fn polish(&self, q0: C, x0: DVector<C>) -> (C, DVector<C>, f64) {
        let n = x0.len();
        let residual = |q: C, x: &DVector<C>| (&self.m0 + &self.m1 * q + &self.m2 * (q * q)) * x;
        let scale = self.m0.norm() + q0.norm() * self.m1.norm() + q0.norm_sqr() * self.m2.norm();
        let (mut q, mut x) = (q0, x0.clone());
        let mut best = residual(q, &x).norm() / x.norm();
        for _ in 0..4 {
            if best <= 4.0 * f64::EPSILON * scale {
                break;
            }
            let m = &self.m0 + &self.m1 * q + &self.m2 * (q * q);
            let dm = (&self.m1 + &self.m2 * (q * 2.0)) * &x;
            let mut jac = DMatrix::zeros(n + 1, n + 1);
            jac.view_mut((0, 0), (n, n)).copy_from(&m);
            jac.view_mut((0, n), (n, 1)).copy_from(&dm);
            for j in 0..n {
                jac[(n, j)] = x0[j].conj();
            }
            let mut rhs = DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-(&m * &x)));
            rhs[n] = C::new(1.0, 0.0) - x0.dotc(&x);
            let Some(step) = jac.lu().solve(&rhs) else { break };
            let xn = &x + step.rows(0, n);
            let qn = q + step[n];
            let r = residual(qn, &xn).norm() / xn.norm();
            if !(r < best) {
                break;
            }
            best = r;
            q = qn;
            x = xn.normalize();
        }
        (q, x, best / scale)
    }

    /// Outgoing modes by Newton from approximate eigenpairs, for pencils
    /// whose roots are too far apart for the companion. Fails when a seed
    /// does not converge or two seeds land on the same root.
    pub(crate) fn seeded(&self, seeds: &[(C, DVector<C>)], kx: f64, ky: f64, jz_slot: Option<usize>) -> Option<Outgoing> {
        let mut out = Outgoing {
            fields: Vec::new(),
            roots: Vec::new(),
            states: Vec::new(),
        };
        for (q0, x0) in seeds {
            let (q, x, res) = self.polish(*q0, x0.normalize());
            if !(res < 1e-12) {
                return None;
            }
            for (p, (r, _)) in out.roots.iter().zip(seeds).enumerate() {
                let merged = (q - r).norm() < 1e-10 * q.norm().max(1.0);
                let apart = (seeds[p].0 - q0).norm() > 1e-10 * q0.norm().max(1.0);
                if merged && apart {
                    return None;
                }
            }
            out.fields.push(self.fields_of(&x, q, kx, ky, jz_slot));
            out.roots.push(q);
            out.states.push(x);
        }
        Some(out)
    }

    /// Decaying (`Im q < 0`) solutions, or in the lossless limit those
    /// carrying energy toward `−z`.
    pub(crate) fn outgoing(&self, kx: f64, ky: f64, jz_slot: Option<usize>, site: Site) -> Result<Outgoing> {
        let red = self.reduce(site)?;
        let dim = red.companion.nrows();
        let want = dim / 2;
        let (kb, scale) = balance(&red.companion);
        let schur = Schur::try_new(kb.clone(), f64::EPSILON, 10_000).ok_or(Error::ModeSelection {
            expected: want,
            found: 0,
            omega: site.omega,
            k_par: site.k_par,
            phi: site.phi,
        })?;
        let roots: Vec<C> = schur.eigenvalues().expect("complex Schur form is triangular").iter().copied().collect();
        let close = |a: C, b: C, tol: f64| (a - b).norm() < tol * a.norm().max(b.norm()).max(1.0);
        let degenerate = || Error::DegenerateModes {
            omega: site.omega,
            k_par: site.k_par,
            phi: site.phi,
        };
        // state vectors spanning the eigenspace of `members`
        let eigenspace = |members: &[usize]| -> Result<Vec<DVector<C>>> {
            let mut proj = DMatrix::<C>::identity(dim, dim);
            for (j, &r) in roots.iter().enumerate() {
                if members.contains(&j) {
                    continue;
                }
                let mut f = kb.clone();
                for i in 0..dim {
                    f[(i, i)] -= r;
                }
                let norm = f.norm();
                proj = (f * proj).unscale(norm);
            }
            let vb = pivoted_range(&proj, members.len()).ok_or_else(degenerate)?;
            let v: Vec<DVector<C>> = vb.iter().map(|x| x.component_mul(&scale)).collect();
            Ok(v)
        };

        let mut down = vec![false; dim];
        for (i, &q) in roots.iter().enumerate() {
            down[i] = if q.im.abs() <= 1e-9 * q.norm().max(1.0) {
                let group: Vec<usize> = (0..dim).filter(|&j| close(roots[j], q, 1e-7)).collect();
                let v = &eigenspace(&group)?[0];
                let f = self.fields(&red, v, kx, ky, jz_slot);
                let flux = (f.ex * f.hy.conj() - f.ey * f.hx.conj()).re;
                let size = (f.ex.norm_sqr() + f.ey.norm_sqr()).max(f.hx.norm_sqr() + f.hy.norm_sqr());
                // grazing solutions carry no normal flux: direction undefined
                if flux.abs() <= 1e-10 * size {
                    return Err(degenerate());
                }
                flux < 0.0
            } else {
                q.im < 0.0
            };
        }
        let selected: Vec<usize> = (0..dim).filter(|&i| down[i]).collect();
        if selected.len() != want {
            return Err(Error::ModeSelection {
                expected: want,
                found: selected.len(),
                omega: site.omega,
                k_par: site.k_par,
                phi: site.phi,
            });
        }
        for &s in &selected {
            for r in (0..dim).filter(|&r| !down[r]) {
                if (roots[s] - roots[r]).norm() < 1e-10 {
                    return Err(degenerate());
                }
            }
        }

        // Near-coincident selected roots share one invariant subspace.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &s in &selected {
            match groups.iter_mut().find(|g| g.iter().any(|&j| close(roots[j], roots[s], 1e-7))) {
                Some(g) => g.push(s),
                None => groups.push(vec![s]),
            }
        }
        let mut fields = Vec::with_capacity(want);
        let mut out_roots = Vec::with_capacity(want);
        let mut states = Vec::with_capacity(want);
        for g in &groups {
            let mut vs = eigenspace(g)?;
            if vs.len() > 1 {
                let m = DMatrix::from_columns(&vs);
                vs = pivoted_range(&m, g.len()).ok_or_else(degenerate)?;
            }
            if let [i] = g[..] {
                let x = self.unknowns(&red, &vs[0]);
                let (q, x, _) = self.polish(roots[i], x);
                out_roots.push(q);
                fields.push(self.fields_of(&x, q, kx, ky, jz_slot));
                states.push(x);
                continue;
            }
            for (v, &i) in vs.iter().zip(g) {
                let v = v.normalize();
                out_roots.push(roots[i]);
                fields.push(self.fields(&red, &v, kx, ky, jz_slot));
                states.push(self.unknowns(&red, &v));
            }
        }
        Ok(Outgoing {
            fields,
            roots: out_roots,
            states,
        })
    }
}

/// Orthonormal basis of the `rank`-dimensional column space of `m`, by
/// Gram-Schmidt with largest-remaining-column pivoting.
fn pivoted_range(m: &DMatrix<C>, rank: usize) -> Option<Vec<DVector<C>>> {
    let mut cols: Vec<DVector<C>> = m.column_iter().map(|c| c.into_owned()).collect();
    let top = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        return None;
    }
    let mut basis: Vec<DVector<C>> = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (k, norm) = cols
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm <= 1e-12 * top {
            return None;
        }
        let q = cols[k].unscale(norm);
        for c in cols.iter_mut() {
            for _ in 0..2 {
                let proj = q.dotc(c);
                c.axpy(-proj, &q, C::new(1.0, 0.0));
            }
        }
        basis.push(q);
    }
    Some(basis)
}

/// Diagonal similarity `K = D Kb D⁻¹` equalising row and column norms
/// (Parlett-Reinsch). Returns `Kb` and the diagonal of `D`.
fn balance(k: &DMatrix<C>) -> (DMatrix<C>, DVector<C>) {
    let n = k.nrows();
    let mut kb = k.clone();
    let mut d = vec![1.0f64; n];
    let abs1 = |z: C| z.re.abs() + z.im.abs();
    for _ in 0..100 {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += abs1(kb[(j, i)]);
                    r += abs1(kb[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            let mut cc = c;
            while cc < r / 2.0 {
                f *= 2.0;
                cc *= 4.0;
            }
            while cc >= r * 2.0 {
                f /= 2.0;
                cc /= 4.0;
            }
            if (c * f + r / f) < 0.95 * total {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    kb[(i, j)] /= f;
                    kb[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    (kb, DVector::from_iterator(n, d.into_iter().map(|x| C::new(x, 0.0))))
}
