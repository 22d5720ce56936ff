//! Monomials and posynomials over positive variables.
//!
//! A monomial is `c * x_1^{a_1} * ... * x_n^{a_n}` with coefficient `c > 0`
//! and arbitrary real exponents; a posynomial is a finite sum of monomials.
//! Variables are referenced by index ([`VarId`]); names and bounds live on
//! [`crate::GpProblem`].

/// Index of a variable within its owning problem.
pub type VarId = usize;

/// `coeff * prod_i x_i^e_i`, exponents stored sparsely and sorted by
/// variable id.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    coeff: f64,
    exps: Vec<(VarId, f64)>,
}

impl Monomial {
    /// A constant monomial (no variables).
    pub fn constant(coeff: f64) -> Self {
        Self { coeff, exps: Vec::new() }
    }

    /// Synonym for [`Monomial::constant`], reads better as a builder start.
    pub fn new(coeff: f64) -> Self {
        Self::constant(coeff)
    }

    /// The bare variable `x_id`.
    pub fn var(id: VarId) -> Self {
        Self { coeff: 1.0, exps: vec![(id, 1.0)] }
    }

    /// Multiply by `x_id^exp` (exponents on the same variable accumulate).
    pub fn with(mut self, id: VarId, exp: f64) -> Self {
        if exp == 0.0 {
            return self;
        }
        match self.exps.binary_search_by(|(v, _)| v.cmp(&id)) {
            Ok(pos) => {
                self.exps[pos].1 += exp;
                if self.exps[pos].1 == 0.0 {
                    self.exps.remove(pos);
                }
            }
            Err(pos) => self.exps.insert(pos, (id, exp)),
        }
        self
    }

    /// Multiply the coefficient by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.coeff *= factor;
        self
    }

    /// Product of two monomials.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone().scaled(other.coeff);
        for &(id, e) in &other.exps {
            out = out.with(id, e);
        }
        out
    }

    /// The monomial raised to a real power (valid because coefficients are
    /// positive).
    pub fn powf(&self, p: f64) -> Self {
        Self {
            coeff: self.coeff.powf(p),
            exps: self
                .exps
                .iter()
                .map(|&(id, e)| (id, e * p))
                .filter(|&(_, e)| e != 0.0)
                .collect(),
        }
    }

    /// `1 / self`.
    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    /// Sparse `(variable, exponent)` pairs, sorted by variable id.
    pub fn exponents(&self) -> &[(VarId, f64)] {
        &self.exps
    }

    /// Evaluate at the point `x` (indexed by [`VarId`]).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.coeff;
        for &(id, e) in &self.exps {
            v *= x[id].powf(e);
        }
        v
    }

    pub(crate) fn max_var(&self) -> Option<VarId> {
        self.exps.last().map(|&(id, _)| id)
    }
}

/// Sum of monomials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Posynomial {
    terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: Monomial) {
        self.terms.push(m);
    }

    /// Builder-style [`Posynomial::push`].
    pub fn add(mut self, m: Monomial) -> Self {
        self.push(m);
        self
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Term-wise product with a monomial (stays a posynomial).
    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        Self { terms: self.terms.iter().map(|t| t.mul(m)).collect() }
    }

    /// Evaluate at the point `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub(crate) fn max_var(&self) -> Option<VarId> {
        self.terms.iter().filter_map(|t| t.max_var()).max()
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Self { terms: vec![m] }
    }
}

impl std::iter::FromIterator<Monomial> for Posynomial {
    fn from_iter<I: IntoIterator<Item = Monomial>>(iter: I) -> Self {
        Self { terms: iter.into_iter().collect() }
    }
}
