//! Problem container: positive variables with bounds, a monomial objective,
//! posynomial inequality constraints (`<= 1`) and monomial equality
//! constraints (`= 1`).

use crate::expr::{Monomial, Posynomial, VarId};
use crate::GpError;

/// Variables must satisfy `|ln x| <= MAX_LOG`; declared bounds outside this
/// range are rejected so the log-domain solver never sees exponents it
/// cannot represent robustly.
pub const MAX_LOG: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug)]
pub struct VarDecl {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// A geometric program in standard posynomial form.
#[derive(Clone, Debug)]
pub struct GpProblem {
    pub(crate) vars: Vec<VarDecl>,
    pub(crate) sense: Sense,
    pub(crate) objective: Monomial,
    pub(crate) ineqs: Vec<(String, Posynomial)>,
    pub(crate) eqs: Vec<(String, Monomial)>,
}

impl Default for GpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl GpProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            sense: Sense::Maximize,
            objective: Monomial::constant(1.0),
            ineqs: Vec::new(),
            eqs: Vec::new(),
        }
    }

    /// Add a variable with the widest representable bounds.
    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.add_var_bounded(name, (-MAX_LOG).exp(), MAX_LOG.exp())
    }

    /// Add a variable constrained to `[lower, upper]`.
    pub fn add_var_bounded(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(VarDecl { name: name.into(), lower, upper });
        self.vars.len() - 1
    }

    pub fn set_objective(&mut self, sense: Sense, m: Monomial) {
        self.sense = sense;
        self.objective = m;
    }

    /// Replace a variable's bound interval, e.g. to pin or probe a
    /// coordinate in an already-built problem. Validated on the next
    /// [`GpProblem::validate`] / solve call like any declared bound.
    pub fn set_var_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[id];
        v.lower = lower;
        v.upper = upper;
    }

    /// Add the constraint `p <= 1`.
    pub fn add_ineq(&mut self, name: impl Into<String>, p: Posynomial) {
        self.ineqs.push((name.into(), p));
    }

    /// Add the constraint `m = 1`.
    pub fn add_eq(&mut self, name: impl Into<String>, m: Monomial) {
        self.eqs.push((name.into(), m));
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, id: VarId) -> &VarDecl {
        &self.vars[id]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn n_ineqs(&self) -> usize {
        self.ineqs.len()
    }

    pub fn objective(&self) -> (&Monomial, Sense) {
        (&self.objective, self.sense)
    }

    /// Structural validation: positive finite coefficients, finite exponents,
    /// in-range variable ids, representable bounds.
    pub fn validate(&self) -> Result<(), GpError> {
        if self.vars.is_empty() {
            return Err(GpError::Invalid("problem has no variables".into()));
        }
        for (i, v) in self.vars.iter().enumerate() {
            if v.name.is_empty() {
                return Err(GpError::Invalid(format!("variable {i} has an empty name")));
            }
            if !(v.lower.is_finite() && v.upper.is_finite()) || v.lower <= 0.0 {
                return Err(GpError::Invalid(format!(
                    "variable {} has invalid bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower >= v.upper {
                return Err(GpError::Invalid(format!(
                    "variable {} has empty bound interval [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower.ln() < -MAX_LOG - 1e-9 || v.upper.ln() > MAX_LOG + 1e-9 {
                return Err(GpError::Invalid(format!(
                    "variable {} bounds [{}, {}] exceed the representable range e^[-{}, {}]",
                    v.name, v.lower, v.upper, MAX_LOG, MAX_LOG
                )));
            }
        }
        self.check_monomial(&self.objective, "objective")?;
        for (name, p) in &self.ineqs {
            if p.is_empty() {
                return Err(GpError::Invalid(format!("constraint {name} is an empty posynomial")));
            }
            for t in p.terms() {
                self.check_monomial(t, name)?;
            }
        }
        for (name, m) in &self.eqs {
            self.check_monomial(m, name)?;
        }
        Ok(())
    }

    fn check_monomial(&self, m: &Monomial, context: &str) -> Result<(), GpError> {
        if !(m.coeff().is_finite() && m.coeff() > 0.0) {
            return Err(GpError::Invalid(format!(
                "{context}: monomial coefficient {} must be positive and finite",
                m.coeff()
            )));
        }
        for &(id, e) in m.exponents() {
            if id >= self.vars.len() {
                return Err(GpError::Invalid(format!(
                    "{context}: variable id {id} out of range ({} declared)",
                    self.vars.len()
                )));
            }
            if !e.is_finite() {
                return Err(GpError::Invalid(format!("{context}: non-finite exponent on variable {id}")));
            }
        }
        Ok(())
    }

    fn fmt_monomial(&self, m: &Monomial) -> String {
        let mut s = format!("{}", m.coeff());
        for &(id, e) in m.exponents() {
            s.push_str(&format!(" * {}^{}", self.vars[id].name, e));
        }
        s
    }

    /// Human-readable problem listing, one constraint per line, terms as
    /// `coef * var^exp` products. Stable ordering for use as a regression
    /// fixture.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let verb = match self.sense {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        };
        out.push_str(&format!("{verb} {}\n", self.fmt_monomial(&self.objective)));
        out.push_str("s.t.\n");
        for (name, p) in &self.ineqs {
            let terms: Vec<String> = p.terms().iter().map(|t| self.fmt_monomial(t)).collect();
            out.push_str(&format!("{name}: {} <= 1\n", terms.join(" + ")));
        }
        for (name, m) in &self.eqs {
            out.push_str(&format!("{name}: {} = 1\n", self.fmt_monomial(m)));
        }
        for v in &self.vars {
            out.push_str(&format!("var {} in [{}, {}]\n", v.name, v.lower, v.upper));
        }
        out
    }

    pub(crate) fn max_referenced_var(&self) -> Option<VarId> {
        let mut m = self.objective.max_var();
        for (_, p) in &self.ineqs {
            m = m.max(p.max_var());
        }
        for (_, e) in &self.eqs {
            m = m.max(e.max_var());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_out_of_range_id() {
        let mut p = GpProblem::new();
        p.add_var("x");
        p.set_objective(Sense::Maximize, Monomial::var(3));
        assert!(p.validate().is_err());
    }

    #[test]
    fn validate_rejects_inverted_bounds() {
        let mut p = GpProblem::new();
        p.add_var_bounded("x", 2.0, 1.0);
        p.set_objective(Sense::Maximize, Monomial::var(0));
        assert!(p.validate().is_err());
    }

    #[test]
    fn var_lookup_by_name() {
        let mut p = GpProblem::new();
        let a = p.add_var("alpha");
        let b = p.add_var("beta");
        assert_eq!(p.var_id("alpha"), Some(a));
        assert_eq!(p.var_id("beta"), Some(b));
        assert_eq!(p.var_id("gamma"), None);
    }
}
